//! Generate, check, repair and minimize specification and verification
//! annotations for Dafny programs.

pub mod bench;
pub mod llm;
pub mod minimizer;
pub mod repair_loop;
pub mod source;
pub mod strip_merge;
pub mod verifier;
