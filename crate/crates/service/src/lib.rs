//! Local job service for annotation generation, repair and minimization.
//!
//! The same methods are reachable as JSON envelopes over HTTP (`/rpc`),
//! as resource routes (`/v1/...`) and as newline-delimited JSON on any byte
//! stream. `protocol.schema.json` documents the messages.

pub mod best_effort;
pub mod config;
pub mod http;
pub mod jobs;
pub mod protocol;
mod service;
pub mod stdio;

pub use config::ServiceConfig;
pub use jobs::{JobEvent, JobKind, JobState, MinimizeJobResult, Phase, SolveJobResult};
pub use protocol::{Request, Response, ServiceError, PROTOCOL_VERSION};
pub use service::Service;

/// The message schema shipped with the service.
pub const PROTOCOL_SCHEMA: &str = include_str!("../protocol.schema.json");
