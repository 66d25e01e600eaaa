//! Running the verifier, reading its verdicts, and classifying failures.

mod cache;
mod dafny;
mod mock;
mod patterns;

pub use cache::{cache_key, normalize_for_cache, CachedVerifier};
pub use dafny::{find_dafny, DafnyVerifier};
pub use mock::{fingerprint, FnVerifier, MockRule, MockSpec, MockVerifier};
pub use patterns::{parse_output, PatternTable};

use async_trait::async_trait;
use serde::{Deserialize, Serialize};
use std::fmt;

use crate::source::SourceFile;
use crate::strip_merge::{merge_with_manual, StripError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VerifierConfig {
    pub executable: String,
    pub timeout_s: f64,
    pub extra_args: Vec<String>,
    pub filter_symbol: Option<String>,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            executable: "dafny".into(),
            timeout_s: 60.0,
            extra_args: Vec::new(),
            filter_symbol: None,
        }
    }
}

impl VerifierConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.timeout_s > 0.0) {
            return Err(format!(
                "verifier timeout must be positive, got {}",
                self.timeout_s
            ));
        }
        Ok(())
    }

    pub fn with_timeout(mut self, timeout_s: f64) -> Self {
        self.timeout_s = timeout_s;
        self
    }

    pub fn with_filter(mut self, symbol: Option<String>) -> Self {
        self.filter_symbol = symbol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DiagnosticCategory {
    Parse,
    Resolution,
    Verification,
    Timeout,
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file: String,
    /// 1-based; 0 when the position is unknown.
    pub line: usize,
    pub col: usize,
    pub severity: Severity,
    pub message: String,
    pub category: DiagnosticCategory,
}

impl Diagnostic {
    pub fn error(
        line: usize,
        col: usize,
        message: impl Into<String>,
        category: DiagnosticCategory,
    ) -> Self {
        Self {
            file: "program.dfy".into(),
            line,
            col,
            severity: Severity::Error,
            message: message.into(),
            category,
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "Error",
            Severity::Warning => "Warning",
        };
        write!(
            f,
            "{}({},{}): {}: {}",
            self.file, self.line, self.col, sev, self.message
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VerificationStatus {
    Success,
    SyntaxError,
    VerificationFailure,
    Timeout,
    ToolError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationOutcome {
    pub status: VerificationStatus,
    pub diagnostics: Vec<Diagnostic>,
    pub elapsed_s: f64,
    pub obligations_verified: u32,
    pub obligations_failed: u32,
    #[serde(default)]
    pub cached: bool,
    /// Set for tool errors: what went wrong with the verifier itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_message: Option<String>,
}

impl VerificationOutcome {
    pub fn success(verified: u32) -> Self {
        Self {
            status: VerificationStatus::Success,
            diagnostics: Vec::new(),
            elapsed_s: 0.0,
            obligations_verified: verified,
            obligations_failed: 0,
            cached: false,
            tool_message: None,
        }
    }

    pub fn failure(verified: u32, diagnostics: Vec<Diagnostic>) -> Self {
        Self {
            status: VerificationStatus::VerificationFailure,
            obligations_failed: diagnostics
                .iter()
                .filter(|d| d.severity == Severity::Error)
                .count() as u32,
            diagnostics,
            elapsed_s: 0.0,
            obligations_verified: verified,
            cached: false,
            tool_message: None,
        }
    }

    pub fn syntax_error(message: impl Into<String>) -> Self {
        Self {
            status: VerificationStatus::SyntaxError,
            diagnostics: vec![Diagnostic::error(1, 1, message, DiagnosticCategory::Parse)],
            elapsed_s: 0.0,
            obligations_verified: 0,
            obligations_failed: 0,
            cached: false,
            tool_message: None,
        }
    }

    pub fn timeout() -> Self {
        Self {
            status: VerificationStatus::Timeout,
            diagnostics: Vec::new(),
            elapsed_s: 0.0,
            obligations_verified: 0,
            obligations_failed: 0,
            cached: false,
            tool_message: None,
        }
    }

    pub fn tool_error(message: impl Into<String>) -> Self {
        Self {
            status: VerificationStatus::ToolError,
            diagnostics: Vec::new(),
            elapsed_s: 0.0,
            obligations_verified: 0,
            obligations_failed: 0,
            cached: false,
            tool_message: Some(message.into()),
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == VerificationStatus::Success
    }

    pub fn error_count(&self) -> usize {
        self.diagnostics
            .iter()
            .filter(|d| d.severity == Severity::Error)
            .count()
    }
}

#[async_trait]
pub trait Verifier: Send + Sync {
    /// Never fails: problems with the tool itself surface as
    /// [`VerificationStatus::ToolError`].
    async fn verify(&self, text: &str, cfg: &VerifierConfig) -> VerificationOutcome;
}

#[async_trait]
impl<T: Verifier + ?Sized> Verifier for std::sync::Arc<T> {
    async fn verify(&self, text: &str, cfg: &VerifierConfig) -> VerificationOutcome {
        (**self).verify(text, cfg).await
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorClass {
    Success,
    Syntax,
    Timeout,
    Incomplete,
    PotentiallyIncorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Classification {
    pub class: ErrorClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Classification {
    fn plain(class: ErrorClass) -> Self {
        Self { class, note: None }
    }
}

/// Error class of a verified candidate. A failing candidate is Incomplete
/// when merging in the manual solution's clauses makes it verify.
pub async fn classify_outcome(
    outcome: &VerificationOutcome,
    candidate: &SourceFile,
    manual: Option<&SourceFile>,
    verifier: &dyn Verifier,
    cfg: &VerifierConfig,
) -> Classification {
    match outcome.status {
        VerificationStatus::Success => Classification::plain(ErrorClass::Success),
        VerificationStatus::SyntaxError => Classification::plain(ErrorClass::Syntax),
        VerificationStatus::Timeout => Classification::plain(ErrorClass::Timeout),
        VerificationStatus::ToolError => Classification {
            class: ErrorClass::PotentiallyIncorrect,
            note: Some(format!(
                "verifier tool error: {}",
                outcome.tool_message.as_deref().unwrap_or("unknown")
            )),
        },
        VerificationStatus::VerificationFailure => {
            let Some(manual) = manual else {
                return Classification::plain(ErrorClass::PotentiallyIncorrect);
            };
            match merge_with_manual(candidate, manual) {
                Ok(merged) => {
                    if verifier.verify(&merged, cfg).await.is_success() {
                        Classification::plain(ErrorClass::Incomplete)
                    } else {
                        Classification::plain(ErrorClass::PotentiallyIncorrect)
                    }
                }
                Err(StripError::SkeletonMismatch(detail)) => Classification {
                    class: ErrorClass::PotentiallyIncorrect,
                    note: Some(format!("cheating: {detail}")),
                },
                Err(e) => Classification {
                    class: ErrorClass::PotentiallyIncorrect,
                    note: Some(e.to_string()),
                },
            }
        }
    }
}
