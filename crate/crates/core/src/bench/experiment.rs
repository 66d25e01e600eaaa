//! Runs every (program, configuration) pair and aggregates the records.

use futures::StreamExt;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use super::dataset::{Dataset, ProgramCategory};
use super::metrics::{extra_loc_percent, mean, pass_at_k};
use super::stats::{fit_logistic, roc_auc, FeatureRow, FitOptions, ModelSpec, RegressionFit};
use crate::repair_loop::{RunConfig, SolveResult, Solver, Strategy};
use crate::source::LocStats;
use crate::verifier::{ErrorClass, Verifier};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedConfig {
    pub id: String,
    #[serde(flatten)]
    pub run: RunConfig,
}

/// Top-level TOML experiment file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub workers: usize,
    /// Append-only attempt records; enables resuming.
    pub records: Option<PathBuf>,
    pub replay_dir: Option<PathBuf>,
    pub configs: Vec<NamedConfig>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: None,
            workers: 4,
            records: None,
            replay_dir: None,
            configs: Vec::new(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative paths in the file are resolved against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, ExperimentError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset, &mut cfg.records, &mut cfg.replay_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.workers == 0 {
            return Err(ExperimentError::Config("workers must be at least 1".into()));
        }
        let mut ids = HashSet::new();
        for c in &self.configs {
            if !ids.insert(&c.id) {
                return Err(ExperimentError::Config(format!(
                    "duplicate config id {}",
                    c.id
                )));
            }
            c.run
                .validate()
                .map_err(|e| ExperimentError::Config(format!("{}: {e}", c.id)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgramRecord {
    pub program_id: String,
    pub config_id: String,
    pub category: ProgramCategory,
    pub strategy: Strategy,
    pub max_attempts: usize,
    /// Of the manual solution.
    pub features: LocStats,
    pub result: SolveResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra_loc_percent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub minimized_extra_loc_percent: Option<f64>,
}

impl ProgramRecord {
    pub fn classes(&self) -> Vec<ErrorClass> {
        self.result.attempts.iter().map(|a| a.error_class).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigAggregate {
    pub config_id: String,
    pub strategy: Strategy,
    pub programs: usize,
    pub solved: usize,
    /// Entry k-1 is pass@k (direct) or repair@k (repair).
    pub success_at_k: Vec<f64>,
    pub mean_attempts_when_solved: Option<f64>,
    pub mean_cost_per_attempt: Option<f64>,
    pub mean_llm_latency_per_attempt: Option<f64>,
    pub mean_verify_s_per_attempt: Option<f64>,
    pub total_cost: f64,
    pub mean_extra_loc_percent: Option<f64>,
    pub mean_minimized_extra_loc_percent: Option<f64>,
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Lines counted for extra LOC.
    pub extra_loc_convention: String,
    pub configs: Vec<ConfigAggregate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit: Option<RegressionFit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    /// Sorted by configuration, then program.
    pub records: Vec<ProgramRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

pub fn feature_rows(records: &[ProgramRecord]) -> Vec<FeatureRow> {
    records
        .iter()
        .map(|r| FeatureRow {
            program_id: r.program_id.clone(),
            config_id: r.config_id.clone(),
            l: r.features.code,
            a: r.features.annotations,
            h: r.features.helpers,
            extra: vec![],
            outcome: r.result.solved,
        })
        .collect()
}

/// Report for a set of records; the same records always give the same
/// bytes.
pub fn aggregate(records: &[ProgramRecord]) -> ExperimentReport {
    let mut records = records.to_vec();
    records.sort_by(|a, b| (&a.config_id, &a.program_id).cmp(&(&b.config_id, &b.program_id)));
    let rows = feature_rows(&records);
    let (fit, fit_error) = if rows.is_empty() {
        (None, None)
    } else {
        match fit_logistic(&rows, &ModelSpec::default(), &FitOptions::default()) {
            Ok(f) => (Some(f), None),
            Err(e) => (None, Some(e.to_string())),
        }
    };
    let scores: Vec<f64> = match &fit {
        Some(f) => rows
            .iter()
            .map(|r| f.predict(r).expect("fitted config"))
            .collect(),
        None => vec![],
    };
    let labels: Vec<bool> = rows.iter().map(|r| r.outcome).collect();
    let auc = fit.as_ref().and_then(|_| roc_auc(&scores, &labels).ok());

    let mut by_config: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        by_config.entry(&r.config_id).or_default().push(i);
    }
    let configs = by_config
        .iter()
        .map(|(id, idx)| {
            let rs: Vec<&ProgramRecord> = idx.iter().map(|&i| &records[i]).collect();
            let classes: Vec<Vec<ErrorClass>> = rs.iter().map(|r| r.classes()).collect();
            let kmax = rs.iter().map(|r| r.max_attempts).max().unwrap_or(1);
            let attempts = || rs.iter().flat_map(|r| r.result.attempts.iter());
            let cfg_auc = fit.as_ref().and_then(|_| {
                let s: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
                let l: Vec<bool> = idx.iter().map(|&i| labels[i]).collect();
                roc_auc(&s, &l).ok()
            });
            ConfigAggregate {
                config_id: id.to_string(),
                strategy: rs[0].strategy,
                programs: rs.len(),
                solved: rs.iter().filter(|r| r.result.solved).count(),
                success_at_k: (1..=kmax).map(|k| pass_at_k(&classes, k)).collect(),
                mean_attempts_when_solved: mean(
                    rs.iter()
                        .filter(|r| r.result.solved)
                        .map(|r| r.result.attempts.len() as f64),
                ),
                mean_cost_per_attempt: mean(attempts().map(|a| a.cost)),
                mean_llm_latency_per_attempt: mean(attempts().map(|a| a.llm_latency_s)),
                mean_verify_s_per_attempt: mean(attempts().map(|a| a.verify_elapsed_s)),
                total_cost: rs.iter().map(|r| r.result.total_cost()).sum(),
                mean_extra_loc_percent: mean(rs.iter().filter_map(|r| r.extra_loc_percent)),
                mean_minimized_extra_loc_percent: mean(
                    rs.iter().filter_map(|r| r.minimized_extra_loc_percent),
                ),
                auc: cfg_auc,
            }
        })
        .collect();
    ExperimentReport {
        extra_loc_convention: "code and annotation lines (L + A)".into(),
        configs,
        fit,
        fit_error,
        auc,
        records,
    }
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.1}%"))
}

fn num(x: Option<f64>, digits: usize) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{v:.digits$}"))
}

/// Fixed-width table, one line per configuration, then the fit.
pub fn render_summary(report: &ExperimentReport) -> String {
    let mut out = format!(
        "{:<24} {:<8} {:>5} {:>6} {:>7} {:>7} {:>7} {:>10} {:>9} {:>9} {:>9} {:>6}\n",
        "config",
        "strategy",
        "n",
        "solved",
        "@1",
        "@5",
        "@10",
        "cost/att",
        "llm s",
        "extra",
        "min extra",
        "auc"
    );
    for c in &report.configs {
        let at = |k: usize| pct(c.success_at_k.get(k - 1).map(|v| v * 100.0));
        let strategy = match c.strategy {
            Strategy::Direct => "direct",
            Strategy::Repair => "repair",
        };
        out.push_str(&format!(
            "{:<24} {:<8} {:>5} {:>6} {:>7} {:>7} {:>7} {:>10} {:>9} {:>9} {:>9} {:>6}\n",
            c.config_id,
            strategy,
            c.programs,
            c.solved,
            at(1),
            at(5),
            at(10),
            num(c.mean_cost_per_attempt, 4),
            num(c.mean_llm_latency_per_attempt, 1),
            pct(c.mean_extra_loc_percent),
            pct(c.mean_minimized_extra_loc_percent),
            num(c.auc, 3),
        ));
    }
    match (&report.fit, &report.fit_error) {
        (Some(f), _) => {
            out.push_str(&format!(
                "fit: n={} converged={} iterations={} auc={}\n",
                f.n,
                f.converged,
                f.iterations,
                num(report.auc, 3)
            ));
            let nc = f.alpha.len();
            for (i, (feat, b)) in f.features.iter().zip(&f.beta).enumerate() {
                out.push_str(&format!(
                    "  beta_{:?} = {:.4} (se {:.4}, p {:.4})\n",
                    feat,
                    b,
                    f.std_errors[nc + i],
                    f.wald_p_values[nc + i]
                ));
            }
            for (c, a) in f.configs.iter().zip(&f.alpha) {
                out.push_str(&format!("  alpha[{c}] = {a:.4}\n"));
            }
        }
        (None, Some(e)) => out.push_str(&format!("fit: not available ({e})\n")),
        (None, None) => out.push_str("fit: not available (no records)\n"),
    }
    out
}

/// Reads records written by an earlier run. A truncated last line, left by
/// an interrupted write, is skipped.
pub fn read_records(path: &Path) -> Result<Vec<ProgramRecord>, ExperimentError> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(vec![]),
        Err(e) => return Err(ExperimentError::Io(format!("{}: {e}", path.display()))),
    };
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str(line) {
            Ok(r) => out.push(r),
            Err(e) => tracing::warn!(
                "{}:{}: skipping unreadable record: {e}",
                path.display(),
                i + 1
            ),
        }
    }
    Ok(out)
}

struct RecordWriter {
    file: std::fs::File,
    path: PathBuf,
}

impl RecordWriter {
    fn open(path: &Path) -> Result<Self, ExperimentError> {
        let io = |e: std::io::Error| ExperimentError::Io(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        let needs_newline =
            std::fs::read(path).is_ok_and(|b| b.last().is_some_and(|c| *c != b'\n'));
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(io)?;
        if needs_newline {
            file.write_all(b"\n").map_err(io)?;
        }
        Ok(Self {
            file,
            path: path.to_path_buf(),
        })
    }

    fn append(&mut self, r: &ProgramRecord) -> Result<(), ExperimentError> {
        let mut line = serde_json::to_string(r).expect("records serialize");
        line.push('\n');
        self.file
            .write_all(line.as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| ExperimentError::Io(format!("{}: {e}", self.path.display())))
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub workers: usize,
    pub records: Option<PathBuf>,
    /// Stop after this many new records, as if interrupted.
    pub stop_after: Option<usize>,
}

/// Runs the pairs not already present in the records file, with at most
/// `workers` programs in flight, then aggregates everything.
pub async fn run_experiment_with<F>(
    dataset: &Dataset,
    configs: &[NamedConfig],
    make_solver: F,
    opts: &RunOptions,
) -> Result<ExperimentReport, ExperimentError>
where
    F: Fn(&NamedConfig) -> Result<Solver, String>,
{
    let mut records = match &opts.records {
        Some(p) => read_records(p)?,
        None => vec![],
    };
    let done: HashSet<(String, String)> = records
        .iter()
        .map(|r| (r.config_id.clone(), r.program_id.clone()))
        .collect();
    let mut writer = opts
        .records
        .as_deref()
        .map(RecordWriter::open)
        .transpose()?;

    let mut jobs = Vec::new();
    for c in configs {
        let solver = Arc::new(
            make_solver(c).map_err(|e| ExperimentError::Config(format!("{}: {e}", c.id)))?,
        );
        for e in &dataset.entries {
            if !done.contains(&(c.id.clone(), e.id.clone())) {
                jobs.push((c, solver.clone(), e));
            }
        }
    }
    let mut stream = futures::stream::iter(jobs)
        .map(|(c, solver, e)| async move {
            let result = solver
                .as_ref()
                .clone()
                .with_manual(&e.manual)
                .solve(&e.stripped)
                .await;
            let extra =
                |p: &Option<String>| p.as_deref().and_then(|p| extra_loc_percent(p, &e.manual));
            ProgramRecord {
                program_id: e.id.clone(),
                config_id: c.id.clone(),
                category: e.category,
                strategy: c.run.strategy,
                max_attempts: c.run.max_attempts(),
                features: e.features,
                extra_loc_percent: extra(&result.final_program),
                minimized_extra_loc_percent: extra(&result.minimized_program),
                result,
            }
        })
        .buffer_unordered(opts.workers.max(1));
    let mut fresh = 0;
    while let Some(r) = stream.next().await {
        if let Some(w) = writer.as_mut() {
            w.append(&r)?;
        }
        records.push(r);
        fresh += 1;
        if opts.stop_after.is_some_and(|n| fresh >= n) {
            break;
        }
    }
    Ok(aggregate(&records))
}

/// Solvers built from each configuration's providers, replaying recorded
/// completions when `replay` is set.
pub async fn run_experiment(
    dataset: &Dataset,
    configs: &[NamedConfig],
    verifier: Arc<dyn Verifier>,
    replay: Option<&Path>,
    opts: &RunOptions,
) -> Result<ExperimentReport, ExperimentError> {
    run_experiment_with(
        dataset,
        configs,
        |c| Solver::from_config(c.run.clone(), replay, verifier.clone()),
        opts,
    )
    .await
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_config() {
        let text = r#"
workers = 2
records = "out/records.jsonl"

[[configs]]
id = "direct-a"
strategy = "direct"
max_direct_runs = 5

[[configs.providers]]
name = "a"
model_id = "model-a"
priority = 1
temperature = 0.5

[configs.verifier]
timeout_s = 60

[[configs]]
id = "repair-a"
strategy = "repair"
minimize_on_success = true

[[configs.providers]]
name = "a"
priority = 1
"#;
        let cfg = ExperimentConfig::from_toml(text).unwrap();
        assert_eq!(cfg.workers, 2);
        assert_eq!(cfg.configs.len(), 2);
        assert_eq!(cfg.configs[0].run.strategy, Strategy::Direct);
        assert_eq!(cfg.configs[0].run.providers[0].model_id, "model-a");
        assert_eq!(cfg.configs[0].run.verifier.timeout_s, 60.0);
        assert_eq!(cfg.configs[1].run.max_attempts(), 10);
        assert!(cfg.configs[1].run.minimize_on_success);

        let dup = "[[configs]]\nid = \"x\"\n[[configs]]\nid = \"x\"\n";
        assert!(matches!(
            ExperimentConfig::from_toml(dup),
            Err(ExperimentError::Config(_))
        ));
    }

    #[test]
    fn empty_report() {
        let r = aggregate(&[]);
        assert!(r.configs.is_empty() && r.records.is_empty() && r.fit.is_none());
        assert!(render_summary(&r).ends_with("fit: not available (no records)\n"));
    }
}
