//! Generate, check and repair loop for one stripped program.

use serde::{Deserialize, Serialize};
use std::path::Path;
use std::sync::Arc;

use crate::llm::{
    arbitrate, render_diagnostics, validate_providers, Gateway, GatewayError, GenerationRequest,
    GenerationResult, ProviderConfig,
};
use crate::minimizer::{minimize, MinimizeOptions};
use crate::source::{count_loc, parse, LocStats, SourceFile};
use crate::strip_merge::{
    activate_negative_test, detect_cheating, negative_test_lines, relocate_invariants, Violation,
};
use crate::verifier::{
    classify_outcome, Diagnostic, ErrorClass, VerificationOutcome, VerificationStatus, Verifier,
    VerifierConfig,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    Direct,
    #[default]
    Repair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub strategy: Strategy,
    pub max_direct_runs: usize,
    pub max_repair_iterations: usize,
    /// Every attempt queries all providers and keeps the best candidate.
    pub multimodel: bool,
    pub providers: Vec<ProviderConfig>,
    pub verifier: VerifierConfig,
    pub minimize_on_success: bool,
    pub minimize: MinimizeOptions,
    /// Diagnostic lines passed to a repair prompt.
    pub diagnostics_budget: usize,
    /// One extra repair attempt per negative test that wrongly verifies.
    pub negative_retry: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Repair,
            max_direct_runs: 5,
            max_repair_iterations: 9,
            multimodel: false,
            providers: Vec::new(),
            verifier: VerifierConfig::default(),
            minimize_on_success: false,
            minimize: MinimizeOptions::default(),
            diagnostics_budget: 100,
            negative_retry: true,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_direct_runs == 0 {
            return Err("max_direct_runs must be at least 1".into());
        }
        if self.diagnostics_budget == 0 {
            return Err("diagnostics_budget must be at least 1".into());
        }
        self.verifier.validate()?;
        if !self.providers.is_empty() {
            validate_providers(&self.providers)?;
        }
        Ok(())
    }

    /// Upper bound on regular attempts.
    pub fn max_attempts(&self) -> usize {
        match self.strategy {
            Strategy::Direct => self.max_direct_runs,
            Strategy::Repair => 1 + self.max_repair_iterations,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AttemptKind {
    Direct,
    Repair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttemptRecord {
    /// 1-based.
    pub attempt_index: usize,
    pub kind: AttemptKind,
    pub request: GenerationRequest,
    /// Empty when no provider answered.
    pub provider: String,
    pub error_class: ErrorClass,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub cheating_violations: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    pub loc: LocStats,
    pub cost: f64,
    pub llm_latency_s: f64,
    pub verify_elapsed_s: f64,
    pub obligations_verified: u32,
    pub obligations_failed: u32,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<Diagnostic>,
    /// Post-processed candidate, absent when the model returned no code.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NegativeFailure {
    /// 1-based among the markers of the program.
    pub marker_index: usize,
    pub line: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub solved: bool,
    pub attempts: Vec<AttemptRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimized_program: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimize_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub negative_tests_passed: Option<bool>,
    /// Markers of `final_program` that verified when activated.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negative_failures: Vec<NegativeFailure>,
    /// Extra attempts spent on negative tests; not counted in `attempts`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub negative_retries: Vec<AttemptRecord>,
    /// Set when the verifier itself failed and the run stopped early.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aborted: Option<String>,
}

impl SolveResult {
    pub fn total_cost(&self) -> f64 {
        self.attempts
            .iter()
            .chain(&self.negative_retries)
            .map(|a| a.cost)
            .sum()
    }

    pub fn attempts_used(&self) -> usize {
        self.attempts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ProgressEvent {
    AttemptStarted {
        attempt_index: usize,
        kind: AttemptKind,
    },
    AttemptFinished {
        record: Box<AttemptRecord>,
    },
    NegativeTests {
        passed: bool,
        failures: Vec<NegativeFailure>,
    },
    Minimizing,
    Minimized {
        loc_before: usize,
        loc_after: usize,
        removals: usize,
    },
    Finished {
        solved: bool,
    },
}

pub type ProgressSink = Arc<dyn Fn(&ProgressEvent) + Send + Sync>;

/// Rewrites each extracted candidate before the guardrails and the verifier
/// see it.
pub type CandidateTransform = Arc<dyn Fn(&str) -> String + Send + Sync>;

/// One processed model answer.
struct Candidate {
    generation: GenerationResult,
    program: Option<String>,
    violations: Vec<Violation>,
    outcome: Option<VerificationOutcome>,
}

/// What the next request needs from a finished attempt.
struct Step {
    record: AttemptRecord,
    /// Clean candidate to carry forward.
    program: Option<String>,
    outcome: Option<VerificationOutcome>,
}

#[derive(Clone)]
pub struct Solver {
    gateway: Arc<Gateway>,
    verifier: Arc<dyn Verifier>,
    cfg: RunConfig,
    manual: Option<SourceFile>,
    progress: Option<ProgressSink>,
    transform: Option<CandidateTransform>,
}

impl Solver {
    pub fn new(
        cfg: RunConfig,
        gateway: Arc<Gateway>,
        verifier: Arc<dyn Verifier>,
    ) -> Result<Self, String> {
        cfg.validate()?;
        if gateway.providers().next().is_none() {
            return Err(GatewayError::NoProviders.to_string());
        }
        Ok(Self {
            gateway,
            verifier,
            cfg,
            manual: None,
            progress: None,
            transform: None,
        })
    }

    /// Builds the gateway from `cfg.providers`, optionally replaying
    /// recorded completions.
    pub fn from_config(
        cfg: RunConfig,
        replay: Option<&Path>,
        verifier: Arc<dyn Verifier>,
    ) -> Result<Self, String> {
        let gateway =
            Gateway::from_configs(cfg.providers.clone(), replay).map_err(|e| e.to_string())?;
        Self::new(cfg, Arc::new(gateway), verifier)
    }

    /// Manual solution used to tell Incomplete from PotentiallyIncorrect.
    pub fn with_manual(mut self, manual: &str) -> Self {
        self.manual = Some(parse(manual));
        self
    }

    pub fn with_progress(mut self, sink: ProgressSink) -> Self {
        self.progress = Some(sink);
        self
    }

    pub fn with_transform(mut self, transform: CandidateTransform) -> Self {
        self.transform = Some(transform);
        self
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn gateway(&self) -> &Arc<Gateway> {
        &self.gateway
    }

    fn emit(&self, e: ProgressEvent) {
        if let Some(p) = &self.progress {
            p(&e);
        }
    }

    pub async fn solve(&self, stripped: &str) -> SolveResult {
        match self.cfg.strategy {
            Strategy::Direct => self.run_direct(stripped).await,
            Strategy::Repair => self.run_repair(stripped).await,
        }
    }

    /// Independent fresh generations until one verifies.
    pub async fn run_direct(&self, stripped: &str) -> SolveResult {
        let base = parse(stripped);
        let mut result = empty_result();
        for i in 1..=self.cfg.max_direct_runs {
            let step = self
                .attempt(
                    i,
                    AttemptKind::Direct,
                    GenerationRequest::direct(stripped),
                    &base,
                )
                .await;
            if self.record(&mut result, step) {
                break;
            }
        }
        self.finish(stripped, result).await
    }

    /// A direct attempt followed by repair attempts fed with the latest
    /// clean program and its errors.
    pub async fn run_repair(&self, stripped: &str) -> SolveResult {
        self.repair_loop(stripped, stripped.to_string(), String::new())
            .await
    }

    /// Repair loop whose first request already carries `program` and the
    /// errors of `outcome`; a verified `program` is returned unchanged.
    pub async fn repair_from(
        &self,
        stripped: &str,
        program: &str,
        outcome: &VerificationOutcome,
    ) -> SolveResult {
        if outcome.is_success() {
            let mut result = empty_result();
            result.solved = true;
            result.final_program = Some(program.to_string());
            return self.finish(stripped, result).await;
        }
        let errors = feedback(
            outcome,
            self.cfg.diagnostics_budget,
            self.cfg.verifier.timeout_s,
        );
        self.repair_loop(stripped, program.to_string(), errors)
            .await
    }

    async fn repair_loop(
        &self,
        stripped: &str,
        mut current: String,
        mut errors: String,
    ) -> SolveResult {
        let base = parse(stripped);
        let mut result = empty_result();
        for i in 1..=self.cfg.max_attempts() {
            let (kind, req) = if errors.is_empty() {
                (
                    AttemptKind::Direct,
                    GenerationRequest::direct(current.clone()),
                )
            } else {
                (
                    AttemptKind::Repair,
                    GenerationRequest::repair(current.clone(), errors.clone()),
                )
            };
            let step = self.attempt(i, kind, req, &base).await;
            errors = self.next_errors(&step, &errors);
            if let Some(p) = &step.program {
                current = p.clone();
            }
            if self.record(&mut result, step) {
                break;
            }
        }
        self.finish(stripped, result).await
    }

    /// Activates each negative test in turn; every one must fail to verify.
    pub async fn check_negative_tests(&self, program: &str) -> (bool, Vec<NegativeFailure>) {
        let lines = negative_test_lines(program);
        let src: Vec<&str> = program.lines().collect();
        let mut failures = Vec::new();
        for (i, &line) in lines.iter().enumerate() {
            let Ok(active) = activate_negative_test(program, i + 1) else {
                continue;
            };
            if self
                .verifier
                .verify(&active, &self.cfg.verifier)
                .await
                .is_success()
            {
                failures.push(NegativeFailure {
                    marker_index: i + 1,
                    line,
                    text: src[line - 1].trim().to_string(),
                });
            }
        }
        (failures.is_empty(), failures)
    }

    /// Appends the attempt; true when the loop must stop.
    fn record(&self, result: &mut SolveResult, step: Step) -> bool {
        let success = step.record.error_class == ErrorClass::Success;
        let tool = step
            .outcome
            .as_ref()
            .filter(|o| o.status == VerificationStatus::ToolError)
            .map(|o| {
                o.tool_message
                    .clone()
                    .unwrap_or_else(|| "verifier tool error".into())
            });
        if success {
            result.solved = true;
            result.final_program = step.program.clone();
        }
        self.emit(ProgressEvent::AttemptFinished {
            record: Box::new(step.record.clone()),
        });
        result.attempts.push(step.record);
        if let Some(t) = tool {
            result.aborted = Some(t);
            return true;
        }
        success
    }

    fn next_errors(&self, step: &Step, previous: &str) -> String {
        let r = &step.record;
        if !r.violations.is_empty() {
            let mut out = previous.to_string();
            for v in &r.violations {
                out.push_str(&format!("Error: forbidden change, {v}\n"));
            }
            return out;
        }
        match &step.outcome {
            Some(o) if step.program.is_some() => {
                feedback(o, self.cfg.diagnostics_budget, self.cfg.verifier.timeout_s)
            }
            _ => {
                let mut out = previous.to_string();
                out.push_str(&format!(
                    "Error: {}\n",
                    r.note.as_deref().unwrap_or("no program was produced")
                ));
                out
            }
        }
    }

    async fn attempt(
        &self,
        index: usize,
        kind: AttemptKind,
        request: GenerationRequest,
        base: &SourceFile,
    ) -> Step {
        self.emit(ProgressEvent::AttemptStarted {
            attempt_index: index,
            kind,
        });
        let mut record = AttemptRecord {
            attempt_index: index,
            kind,
            request: request.clone(),
            provider: String::new(),
            error_class: ErrorClass::Syntax,
            note: None,
            cheating_violations: 0,
            violations: Vec::new(),
            loc: LocStats::default(),
            cost: 0.0,
            llm_latency_s: 0.0,
            verify_elapsed_s: 0.0,
            obligations_verified: 0,
            obligations_failed: 0,
            diagnostics: Vec::new(),
            program: None,
        };
        let generations = if self.cfg.multimodel {
            match self.gateway.call_all(&request).await {
                Ok(all) => {
                    let (ok, failed): (Vec<_>, Vec<_>) = all.into_iter().partition(Result::is_ok);
                    let ok: Vec<GenerationResult> = ok.into_iter().flatten().collect();
                    if ok.is_empty() {
                        let reasons: Vec<String> = failed
                            .into_iter()
                            .filter_map(Result::err)
                            .map(|f| format!("{}: {}", f.provider, f.reason))
                            .collect();
                        Err(GatewayError::AllProvidersFailed(Vec::new()).to_string()
                            + ": "
                            + &reasons.join("; "))
                    } else {
                        Ok(ok)
                    }
                }
                Err(e) => Err(e.to_string()),
            }
        } else {
            self.gateway
                .call_with_failover(&request)
                .await
                .map(|g| vec![g])
                .map_err(|e| e.to_string())
        };
        let generations = match generations {
            Ok(g) => g,
            Err(e) => {
                record.note = Some(format!("generation failed: {e}"));
                return Step {
                    record,
                    program: None,
                    outcome: None,
                };
            }
        };
        record.cost = generations.iter().map(|g| g.cost).sum();
        record.llm_latency_s = generations.iter().map(|g| g.latency_s).fold(0.0, f64::max);

        let cands =
            futures::future::join_all(generations.into_iter().map(|g| self.process(g, base))).await;
        let chosen = choose(&cands);
        let c = &cands[chosen];
        record.provider = c.generation.provider.clone();
        record.program = c.program.clone();
        record.loc = c
            .program
            .as_deref()
            .map(|p| count_loc(&parse(p)))
            .unwrap_or_default();
        let Some(program) = &c.program else {
            record.note = Some("model output contains no program".into());
            return Step {
                record,
                program: None,
                outcome: None,
            };
        };
        if !c.violations.is_empty() {
            record.error_class = ErrorClass::PotentiallyIncorrect;
            record.cheating_violations = c.violations.len();
            record.violations = c.violations.clone();
            let list: Vec<String> = c.violations.iter().map(ToString::to_string).collect();
            record.note = Some(format!("cheating: {}", list.join("; ")));
            return Step {
                record,
                program: None,
                outcome: None,
            };
        }
        let outcome = c.outcome.clone().expect("clean candidates are verified");
        let class = classify_outcome(
            &outcome,
            &parse(program),
            self.manual.as_ref(),
            self.verifier.as_ref(),
            &self.cfg.verifier,
        )
        .await;
        record.error_class = class.class;
        record.note = class.note;
        record.verify_elapsed_s = outcome.elapsed_s;
        record.obligations_verified = outcome.obligations_verified;
        record.obligations_failed = outcome.obligations_failed;
        record.diagnostics = outcome.diagnostics.clone();
        Step {
            record,
            program: Some(program.clone()),
            outcome: Some(outcome),
        }
    }

    async fn process(&self, generation: GenerationResult, base: &SourceFile) -> Candidate {
        let Some(raw) = &generation.extracted_program else {
            return Candidate {
                generation,
                program: None,
                violations: Vec::new(),
                outcome: None,
            };
        };
        let mut program = relocate_invariants(raw);
        if let Some(t) = &self.transform {
            program = t(&program);
        }
        if !program.ends_with('\n') {
            program.push('\n');
        }
        let violations = detect_cheating(base, &parse(&program));
        let outcome = if violations.is_empty() {
            Some(self.verifier.verify(&program, &self.cfg.verifier).await)
        } else {
            None
        };
        Candidate {
            generation,
            program: Some(program),
            violations,
            outcome,
        }
    }

    async fn finish(&self, stripped: &str, mut result: SolveResult) -> SolveResult {
        if let Some(program) = result.final_program.clone() {
            let (passed, failures) = self.check_negative_tests(&program).await;
            if !passed && self.cfg.negative_retry {
                self.negative_retry(stripped, &program, failures, &mut result)
                    .await;
            } else {
                result.negative_tests_passed = Some(passed);
                result.negative_failures = failures;
            }
            self.emit(ProgressEvent::NegativeTests {
                passed: result.negative_tests_passed == Some(true),
                failures: result.negative_failures.clone(),
            });
            if self.cfg.minimize_on_success {
                self.minimize_final(stripped, &mut result).await;
            }
        }
        self.emit(ProgressEvent::Finished {
            solved: result.solved,
        });
        result
    }

    async fn negative_retry(
        &self,
        stripped: &str,
        verified: &str,
        failures: Vec<NegativeFailure>,
        result: &mut SolveResult,
    ) {
        let base = parse(stripped);
        let next = result.attempts.len() + 1;
        let mut current = verified.to_string();
        let mut errors = negative_feedback(&failures);
        result.negative_tests_passed = Some(false);
        result.negative_failures = failures.clone();
        for k in 0..failures.len() {
            let req = GenerationRequest::repair(current.clone(), errors.clone());
            let step = self
                .attempt(next + k, AttemptKind::Repair, req, &base)
                .await;
            let new_errors = self.next_errors(&step, &errors);
            self.emit(ProgressEvent::AttemptFinished {
                record: Box::new(step.record.clone()),
            });
            result.negative_retries.push(step.record.clone());
            if step
                .outcome
                .as_ref()
                .is_some_and(|o| o.status == VerificationStatus::ToolError)
            {
                return;
            }
            let Some(p) = step.program else {
                errors = new_errors;
                continue;
            };
            current = p.clone();
            if step.record.error_class != ErrorClass::Success {
                errors = new_errors;
                continue;
            }
            let (passed, again) = self.check_negative_tests(&p).await;
            if passed {
                result.final_program = Some(p);
                result.negative_tests_passed = Some(true);
                result.negative_failures.clear();
                return;
            }
            errors = negative_feedback(&again);
        }
    }

    async fn minimize_final(&self, stripped: &str, result: &mut SolveResult) {
        let Some(program) = result.final_program.clone() else {
            return;
        };
        self.emit(ProgressEvent::Minimizing);
        let opts = MinimizeOptions {
            verifier: self.cfg.verifier.clone(),
            ..self.cfg.minimize.clone()
        };
        match minimize(stripped, &program, self.verifier.as_ref(), &opts).await {
            Ok(m) => {
                self.emit(ProgressEvent::Minimized {
                    loc_before: count_loc(&parse(&program)).total(),
                    loc_after: count_loc(&parse(&m.text)).total(),
                    removals: m.removals.len(),
                });
                result.minimized_program = Some(m.text);
            }
            Err(e) => result.minimize_error = Some(e.to_string()),
        }
    }
}

fn empty_result() -> SolveResult {
    SolveResult {
        solved: false,
        attempts: Vec::new(),
        final_program: None,
        minimized_program: None,
        minimize_error: None,
        negative_tests_passed: None,
        negative_failures: Vec::new(),
        negative_retries: Vec::new(),
        aborted: None,
    }
}

/// Index of the candidate an attempt reports: the arbitration winner among
/// clean candidates, else the first cheater, else the first answer.
fn choose(cands: &[Candidate]) -> usize {
    let clean: Vec<usize> = (0..cands.len())
        .filter(|&i| cands[i].program.is_some() && cands[i].violations.is_empty())
        .collect();
    if !clean.is_empty() {
        let pairs: Vec<_> = clean
            .iter()
            .map(|&i| {
                (
                    cands[i].generation.clone(),
                    cands[i].outcome.clone().expect("verified"),
                )
            })
            .collect();
        return clean[arbitrate(&pairs).expect("nonempty")];
    }
    (0..cands.len())
        .find(|&i| !cands[i].violations.is_empty())
        .unwrap_or(0)
}

/// Errors block for a failed verification, synthesized when the verifier
/// reported no located diagnostics.
pub fn feedback(outcome: &VerificationOutcome, budget: usize, timeout_s: f64) -> String {
    if !outcome.diagnostics.is_empty() {
        return render_diagnostics(&outcome.diagnostics, budget);
    }
    match outcome.status {
        VerificationStatus::Timeout => {
            format!("Error: verification timed out after {timeout_s} seconds\n")
        }
        VerificationStatus::SyntaxError => format!(
            "Error: {}\n",
            outcome
                .tool_message
                .as_deref()
                .unwrap_or("the program could not be parsed")
        ),
        _ => "Error: verification failed without further diagnostics\n".into(),
    }
}

/// Errors block naming negative tests that verified.
pub fn negative_feedback(failures: &[NegativeFailure]) -> String {
    failures
        .iter()
        .map(|f| {
            format!(
                "program.dfy({},0): Error: negative test verified but must be rejected: {}\n",
                f.line, f.text
            )
        })
        .collect()
}
