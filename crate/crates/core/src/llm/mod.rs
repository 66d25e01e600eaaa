//! Chat-model access: prompts, providers, failover and arbitration.

mod gateway;
mod http;
pub mod prompt;
mod provider;
mod replay;

pub use gateway::{
    arbitrate, AttemptLog, CostLedger, Endpoint, Gateway, GatewayError, GenerationRequest,
    GenerationResult, ProviderFailure,
};
pub use http::HttpProvider;
pub use prompt::{
    render_diagnostics, render_direct_prompt, render_repair_prompt, Message, PromptKind, Role,
};
pub use provider::{
    validate_providers, Completion, Provider, ProviderConfig, ProviderError, ProviderKind,
    ReasoningEffort,
};
pub use replay::{replay_key, RecordingProvider, ReplayEntry, ReplayProvider, ScriptedProvider};
