//! Delta-based minimization of verified annotated programs.

pub mod candidates;
pub mod delta;
pub mod deps;
mod minimize;

pub use candidates::{extract_candidates, traversal_order, CandidateSegment, Category};
pub use delta::{align, compute_delta, units, DeltaAlignment, DeltaError, InsertedRun, Unit};
pub use deps::{build_dependencies, DependencyGraph};
pub use minimize::{
    apply_removals, minimize, remove_unreferenced, MinimizeError, MinimizeOptions, MinimizeResult,
    RemovalKind, RemovalRecord,
};
