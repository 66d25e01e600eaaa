//! Job table, lifecycle and execution.
//!
//! Every state change and progress report becomes one event with the next
//! ordinal of its job. Events carry the state after them, so the last event
//! always names the current state. Nothing is appended after a terminal
//! state.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;
use tokio::sync::{watch, Semaphore};
use tokio::task::AbortHandle;

use annot_core::minimizer::{minimize, MinimizeOptions, RemovalRecord};
use annot_core::repair_loop::{
    AttemptKind, ProgressEvent, ProgressSink, RunConfig, SolveResult, Solver,
};
use annot_core::source::{count_loc, parse};
use annot_core::strip_merge::{
    detect_cheating, selected_declarations, splice_declarations, strip_selected, strip_text,
};
use annot_core::verifier::{VerificationStatus, Verifier};

use crate::best_effort::{self, BestEffort};
use crate::protocol::{EventsResult, JobSummary, LineSpan, ServiceError};

/// Upper bound on one long-poll wait.
pub const MAX_WAIT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobKind {
    Generate,
    Repair,
    Minimize,
}

impl FromStr for JobKind {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "generate" => Ok(JobKind::Generate),
            "repair" => Ok(JobKind::Repair),
            "minimize" => Ok(JobKind::Minimize),
            other => Err(ServiceError::BadRequest(format!(
                "unknown job kind {other:?}; expected generate, repair or minimize"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JobState {
    Queued,
    Running,
    Done,
    Failed,
    Cancelled,
}

impl JobState {
    pub fn is_terminal(self) -> bool {
        matches!(
            self,
            JobState::Done | JobState::Failed | JobState::Cancelled
        )
    }

    /// Forward moves only; cancellation is allowed from any live state.
    pub fn can_become(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Queued, Running)
                | (Queued, Cancelled)
                | (Running, Done)
                | (Running, Failed)
                | (Running, Cancelled)
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Prompting,
    Verifying,
    Minimizing,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobEvent {
    /// 1-based, strictly increasing per job.
    pub ordinal: u64,
    /// Job state after this event.
    pub state: JobState,
    /// Absent on state changes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase: Option<Phase>,
    /// 0 before the first attempt.
    pub attempt_index: usize,
    pub summary: String,
    pub obligations_verified: u32,
    pub obligations_failed: u32,
}

/// Everything a job needs, resolved at submission.
#[derive(Debug, Clone)]
pub struct JobSpec {
    pub kind: JobKind,
    pub program_text: String,
    pub selection: Option<LineSpan>,
    pub original_text: Option<String>,
    pub run: RunConfig,
    pub replay_dir: Option<PathBuf>,
    pub artifacts_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveJobResult {
    pub solved: bool,
    /// Minimized when minimization ran, else the verified program.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program: Option<String>,
    /// Present when nothing verified.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_effort: Option<BestEffort>,
    /// Input of the generation after stripping.
    pub stripped: String,
    /// Declarations targeted by the selection; empty for the whole file.
    pub selected: Vec<String>,
    pub run: SolveResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MinimizeJobResult {
    pub program: String,
    pub changed: bool,
    pub loc_before: usize,
    pub loc_after: usize,
    pub removals: Vec<RemovalRecord>,
    pub rounds: usize,
    pub verifier_calls: usize,
}

struct Entry {
    kind: JobKind,
    state: JobState,
    events: Vec<JobEvent>,
    result: Option<Value>,
    error: Option<String>,
    abort: Option<AbortHandle>,
    changed: watch::Sender<u64>,
}

impl Entry {
    fn push(&mut self, mut e: JobEvent) {
        e.ordinal = self.events.len() as u64 + 1;
        e.state = self.state;
        self.changed.send_replace(e.ordinal);
        self.events.push(e);
    }

    fn transition(&mut self, next: JobState, summary: String) -> bool {
        if !self.state.can_become(next) {
            return false;
        }
        self.state = next;
        self.push(state_event(summary));
        true
    }

    fn snapshot(&self, id: &str, since: u64) -> EventsResult {
        EventsResult {
            job_id: id.to_string(),
            kind: self.kind,
            state: self.state,
            events: self
                .events
                .iter()
                .filter(|e| e.ordinal > since)
                .cloned()
                .collect(),
            result: self.result.clone(),
            error: self.error.clone(),
        }
    }
}

fn state_event(summary: String) -> JobEvent {
    JobEvent {
        ordinal: 0,
        state: JobState::Queued,
        phase: None,
        attempt_index: 0,
        summary,
        obligations_verified: 0,
        obligations_failed: 0,
    }
}

struct Shared {
    jobs: Mutex<BTreeMap<String, Entry>>,
    limiter: Arc<Semaphore>,
    verifier: Arc<dyn Verifier>,
    next: AtomicU64,
}

impl Shared {
    fn with<T>(&self, id: &str, f: impl FnOnce(&mut Entry) -> T) -> Option<T> {
        self.jobs
            .lock()
            .expect("job table poisoned")
            .get_mut(id)
            .map(f)
    }

    /// Progress from a live job; dropped once the job is terminal.
    fn progress(&self, id: &str, e: JobEvent) {
        self.with(id, |entry| {
            if entry.state == JobState::Running {
                entry.push(e);
            }
        });
    }
}

/// Clonable handle on the job table.
#[derive(Clone)]
pub struct JobManager {
    shared: Arc<Shared>,
}

impl JobManager {
    pub fn new(verifier: Arc<dyn Verifier>, max_concurrent_jobs: usize) -> Self {
        Self {
            shared: Arc::new(Shared {
                jobs: Mutex::new(BTreeMap::new()),
                limiter: Arc::new(Semaphore::new(max_concurrent_jobs.max(1))),
                verifier,
                next: AtomicU64::new(1),
            }),
        }
    }

    pub fn verifier(&self) -> &Arc<dyn Verifier> {
        &self.shared.verifier
    }

    /// Queues the job and returns its id at once.
    pub fn submit(&self, spec: JobSpec) -> Result<String, ServiceError> {
        if spec.program_text.trim().is_empty() {
            return Err(ServiceError::BadRequest("program_text is empty".into()));
        }
        let id = format!("job-{:06}", self.shared.next.fetch_add(1, Ordering::SeqCst));
        let mut jobs = self.shared.jobs.lock().expect("job table poisoned");
        let mut entry = Entry {
            kind: spec.kind,
            state: JobState::Queued,
            events: Vec::new(),
            result: None,
            error: None,
            abort: None,
            changed: watch::channel(0).0,
        };
        entry.push(state_event("queued".into()));
        let shared = self.shared.clone();
        let job_id = id.clone();
        entry.abort = Some(tokio::spawn(run_job(shared, job_id, spec)).abort_handle());
        jobs.insert(id.clone(), entry);
        Ok(id)
    }

    /// Events after `since`, waiting up to `wait` for one to arrive.
    pub async fn events(
        &self,
        id: &str,
        since: u64,
        wait: Duration,
    ) -> Result<EventsResult, ServiceError> {
        let unknown = || ServiceError::UnknownJob(id.to_string());
        let mut rx = {
            let jobs = self.shared.jobs.lock().expect("job table poisoned");
            let entry = jobs.get(id).ok_or_else(unknown)?;
            let snap = entry.snapshot(id, since);
            if !snap.events.is_empty() || snap.state.is_terminal() || wait.is_zero() {
                return Ok(snap);
            }
            entry.changed.subscribe()
        };
        let _ = tokio::time::timeout(wait.min(MAX_WAIT), rx.changed()).await;
        self.shared
            .with(id, |e| e.snapshot(id, since))
            .ok_or_else(unknown)
    }

    /// Idempotent; a finished job keeps its state.
    pub fn cancel(&self, id: &str) -> Result<JobState, ServiceError> {
        self.shared
            .with(id, |e| {
                if e.transition(JobState::Cancelled, "cancelled".into()) {
                    if let Some(h) = e.abort.take() {
                        h.abort();
                    }
                }
                e.state
            })
            .ok_or_else(|| ServiceError::UnknownJob(id.to_string()))
    }

    pub fn list(&self) -> Vec<JobSummary> {
        let jobs = self.shared.jobs.lock().expect("job table poisoned");
        jobs.iter()
            .map(|(id, e)| JobSummary {
                job_id: id.clone(),
                kind: e.kind,
                state: e.state,
                events: e.events.len(),
            })
            .collect()
    }
}

async fn run_job(shared: Arc<Shared>, id: String, spec: JobSpec) {
    let Ok(_permit) = shared.limiter.clone().acquire_owned().await else {
        return;
    };
    if shared.with(&id, |e| e.transition(JobState::Running, "running".into())) != Some(true) {
        return;
    }
    let sink = progress_sink(shared.clone(), id.clone());
    let outcome = match spec.kind {
        JobKind::Generate | JobKind::Repair => solve_job(&spec, shared.verifier.clone(), sink)
            .await
            .map(|r| serde_json::to_value(r).expect("result serializes")),
        JobKind::Minimize => minimize_job(&spec, shared.verifier.as_ref(), &sink)
            .await
            .map(|r| serde_json::to_value(r).expect("result serializes")),
    };
    if let (Ok(result), Some(dir)) = (&outcome, &spec.artifacts_dir) {
        write_artifact(dir, &id, spec.kind, result);
    }
    shared.with(&id, |e| match outcome {
        Ok(result) => {
            if e.state == JobState::Running {
                e.result = Some(result);
                e.transition(JobState::Done, "done".into());
            }
        }
        Err(msg) => {
            if e.state == JobState::Running {
                e.error = Some(msg.clone());
                e.transition(JobState::Failed, format!("failed: {msg}"));
            }
        }
    });
}

fn write_artifact(dir: &std::path::Path, id: &str, kind: JobKind, result: &Value) {
    let doc = serde_json::json!({ "job_id": id, "kind": kind, "result": result });
    let path = dir.join(format!("{id}.json"));
    let written = std::fs::create_dir_all(dir).and_then(|_| {
        std::fs::write(
            &path,
            serde_json::to_string_pretty(&doc).expect("artifact serializes") + "\n",
        )
    });
    if let Err(e) = written {
        tracing::warn!(path = %path.display(), error = %e, "could not write job artifact");
    }
}

fn progress_sink(shared: Arc<Shared>, id: String) -> ProgressSink {
    let last_attempt = AtomicUsize::new(0);
    Arc::new(move |e: &ProgressEvent| {
        let at = |phase, attempt_index, summary: String| JobEvent {
            ordinal: 0,
            state: JobState::Running,
            phase: Some(phase),
            attempt_index,
            summary,
            obligations_verified: 0,
            obligations_failed: 0,
        };
        let last = last_attempt.load(Ordering::SeqCst);
        let event = match e {
            ProgressEvent::AttemptStarted {
                attempt_index,
                kind,
            } => {
                last_attempt.store(*attempt_index, Ordering::SeqCst);
                let kind = match kind {
                    AttemptKind::Direct => "direct",
                    AttemptKind::Repair => "repair",
                };
                at(
                    Phase::Prompting,
                    *attempt_index,
                    format!("attempt {attempt_index}: {kind} prompt"),
                )
            }
            ProgressEvent::AttemptFinished { record } => {
                let mut summary =
                    format!("attempt {}: {:?}", record.attempt_index, record.error_class);
                if !record.provider.is_empty() {
                    summary.push_str(&format!(" from {}", record.provider));
                }
                if let Some(n) = &record.note {
                    summary.push_str(&format!("; {n}"));
                }
                JobEvent {
                    obligations_verified: record.obligations_verified,
                    obligations_failed: record.obligations_failed,
                    ..at(Phase::Verifying, record.attempt_index, summary)
                }
            }
            ProgressEvent::NegativeTests { passed: true, .. } => at(
                Phase::Verifying,
                last,
                "negative tests rejected as required".into(),
            ),
            ProgressEvent::NegativeTests { failures, .. } => {
                let markers: Vec<String> = failures
                    .iter()
                    .map(|f| f.marker_index.to_string())
                    .collect();
                at(
                    Phase::Verifying,
                    last,
                    format!("negative tests verified at markers {}", markers.join(", ")),
                )
            }
            ProgressEvent::Minimizing => at(Phase::Minimizing, last, "minimizing".into()),
            ProgressEvent::Minimized {
                loc_before,
                loc_after,
                removals,
            } => at(
                Phase::Minimizing,
                last,
                format!(
                    "minimized from {loc_before} to {loc_after} lines with {removals} removals"
                ),
            ),
            ProgressEvent::Finished { .. } => return,
        };
        shared.progress(&id, event);
    })
}

async fn solve_job(
    spec: &JobSpec,
    verifier: Arc<dyn Verifier>,
    sink: ProgressSink,
) -> Result<SolveJobResult, String> {
    let text = &spec.program_text;
    let selected: BTreeSet<String> = spec
        .selection
        .map(|s| selected_declarations(&parse(text), s.start_line, s.end_line))
        .unwrap_or_default();
    let stripped = if selected.is_empty() {
        strip_text(text)
    } else {
        strip_selected(text, &selected)
    };
    let mut solver = Solver::from_config(
        spec.run.clone(),
        spec.replay_dir.as_deref(),
        verifier.clone(),
    )?
    .with_progress(sink);
    if !selected.is_empty() {
        let (base, names) = (stripped.clone(), selected.clone());
        solver = solver.with_transform(Arc::new(move |c: &str| {
            splice_declarations(&base, c, &names, true)
        }));
    }
    let run = match spec.kind {
        JobKind::Repair => {
            let outcome = verifier.verify(text, &spec.run.verifier).await;
            if outcome.status == VerificationStatus::ToolError {
                return Err(outcome
                    .tool_message
                    .unwrap_or_else(|| "verifier tool error".into()));
            }
            solver.repair_from(&stripped, text, &outcome).await
        }
        _ => solver.solve(&stripped).await,
    };
    if let Some(reason) = &run.aborted {
        return Err(format!("verifier failed: {reason}"));
    }
    let program = run
        .minimized_program
        .clone()
        .or_else(|| run.final_program.clone());
    if let Some(p) = &program {
        let violations = detect_cheating(&parse(&stripped), &parse(p));
        if !violations.is_empty() {
            let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
            return Err(format!("result breaks the guardrails: {}", list.join("; ")));
        }
    }
    let best_effort = if run.solved {
        None
    } else {
        best_effort::choose(
            &best_effort::from_records(&run.attempts),
            spec.run.diagnostics_budget,
        )
    };
    Ok(SolveJobResult {
        solved: run.solved,
        program,
        best_effort,
        stripped,
        selected: selected.into_iter().collect(),
        run,
    })
}

async fn minimize_job(
    spec: &JobSpec,
    verifier: &dyn Verifier,
    sink: &ProgressSink,
) -> Result<MinimizeJobResult, String> {
    let text = &spec.program_text;
    let original = spec
        .original_text
        .clone()
        .unwrap_or_else(|| strip_text(text));
    sink(&ProgressEvent::Minimizing);
    let opts = MinimizeOptions {
        verifier: spec.run.verifier.clone(),
        ..spec.run.minimize.clone()
    };
    let m = minimize(&original, text, verifier, &opts)
        .await
        .map_err(|e| e.to_string())?;
    let loc_before = count_loc(&parse(text)).total();
    let loc_after = count_loc(&parse(&m.text)).total();
    sink(&ProgressEvent::Minimized {
        loc_before,
        loc_after,
        removals: m.removals.len(),
    });
    Ok(MinimizeJobResult {
        changed: m.text != *text,
        program: m.text,
        loc_before,
        loc_after,
        removals: m.removals,
        rounds: m.rounds,
        verifier_calls: m.verifier_calls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitions_only_move_forward() {
        use JobState::*;
        let all = [Queued, Running, Done, Failed, Cancelled];
        let allowed: Vec<(JobState, JobState)> = all
            .iter()
            .flat_map(|&a| all.iter().map(move |&b| (a, b)))
            .filter(|&(a, b)| a.can_become(b))
            .collect();
        assert_eq!(
            allowed,
            [
                (Queued, Running),
                (Queued, Cancelled),
                (Running, Done),
                (Running, Failed),
                (Running, Cancelled)
            ]
        );
        assert!(all
            .iter()
            .filter(|s| s.is_terminal())
            .all(|s| all.iter().all(|n| !s.can_become(*n))));
    }

    #[test]
    fn kinds_parse_and_unknown_is_a_bad_request() {
        assert_eq!("repair".parse::<JobKind>().unwrap(), JobKind::Repair);
        assert!(matches!(
            "prove".parse::<JobKind>(),
            Err(ServiceError::BadRequest(_))
        ));
    }
}
