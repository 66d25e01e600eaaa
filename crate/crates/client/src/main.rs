use clap::{Args, Parser, Subcommand};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use annot_client::{render_event, Client, ClientError, DEFAULT_SERVER};
use annot_core::bench::{
    aggregate, load_dataset, read_records, render_summary, run_experiment, ExperimentConfig,
    RunOptions,
};
use annot_core::strip_merge::strip_text;
use annot_core::verifier::{CachedVerifier, DafnyVerifier, MockSpec, MockVerifier, Verifier};
use annot_service::protocol::{LineSpan, SubmitParams};
use annot_service::{JobState, MinimizeJobResult, SolveJobResult};

/// Generate, repair and minimize Dafny annotations.
///
/// generate, repair and minimize run as jobs on the service; strip, bench
/// and analyze run in this process.
#[derive(Parser)]
#[command(name = "annot", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Remove specification and verification annotations.
    Strip {
        file: PathBuf,
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
    /// Ask the models for the annotations of a program.
    Generate(JobArgs),
    /// Fix the annotations of a program that does not verify.
    Repair(JobArgs),
    /// Drop annotations the verifier does not need.
    Minimize {
        file: PathBuf,
        /// The program before annotations were added; defaults to the
        /// stripped file.
        #[arg(long)]
        original: Option<PathBuf>,
        #[command(flatten)]
        service: ServiceArgs,
    },
    /// Run an experiment over a dataset.
    Bench {
        config: PathBuf,
        #[command(flatten)]
        verifier: VerifierArgs,
        /// Append-only records file; reruns resume from it.
        #[arg(long)]
        records: Option<PathBuf>,
        /// Report JSON destination.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Aggregate, fit and summarize an experiment records file.
    Analyze {
        records: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

#[derive(Args)]
struct ServiceArgs {
    #[arg(long, env = "ANNOT_SERVER", default_value = DEFAULT_SERVER)]
    server: String,
    /// Write the program here instead of stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Print the whole job result as JSON instead of the program.
    #[arg(long)]
    json: bool,
    /// Suppress progress lines on stderr.
    #[arg(short, long)]
    quiet: bool,
}

#[derive(Args)]
struct JobArgs {
    file: PathBuf,
    /// Restrict generation to the declarations on these lines, as START:END.
    #[arg(long, value_parser = parse_span)]
    lines: Option<LineSpan>,
    /// Configuration override KEY=VALUE, VALUE being JSON or a bare string.
    #[arg(long = "set", value_parser = parse_assignment)]
    overrides: Vec<(String, Value)>,
    #[command(flatten)]
    service: ServiceArgs,
}

#[derive(Args)]
struct VerifierArgs {
    /// Answer verification from a mock description (JSON) instead of Dafny.
    #[arg(long)]
    mock_verifier: Option<PathBuf>,
}

fn parse_span(s: &str) -> Result<LineSpan, String> {
    let (a, b) = s.split_once(':').unwrap_or((s, s));
    let n = |x: &str| x.trim().parse::<usize>().map_err(|e| format!("{x:?}: {e}"));
    Ok(LineSpan {
        start_line: n(a)?,
        end_line: n(b)?,
    })
}

fn parse_assignment(s: &str) -> Result<(String, Value), String> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| format!("expected KEY=VALUE, got {s:?}"))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

/// `a.b=1` becomes `{"a": {"b": 1}}`.
fn overrides(pairs: &[(String, Value)]) -> Option<Value> {
    if pairs.is_empty() {
        return None;
    }
    let mut root = Map::new();
    for (key, value) in pairs {
        let mut parts: Vec<&str> = key.split('.').collect();
        let last = parts.pop().expect("split yields one part");
        let mut node = &mut root;
        for p in parts {
            let slot = node.entry(p).or_insert_with(|| Value::Object(Map::new()));
            if !slot.is_object() {
                *slot = Value::Object(Map::new());
            }
            node = slot.as_object_mut().expect("object");
        }
        node.insert(last.to_string(), value.clone());
    }
    Some(Value::Object(root))
}

enum Failure {
    /// The job ran but produced nothing usable.
    Unsolved(String),
    Error(String),
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        Failure::Error(e.to_string())
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure::Error(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => {
            std::fs::write(p, text).map_err(|e| Failure::Error(format!("{}: {e}", p.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

async fn run_job(params: SubmitParams, svc: &ServiceArgs) -> Result<Value, Failure> {
    let client = Client::new(&svc.server);
    let id = client.submit(&params).await?;
    if !svc.quiet {
        eprintln!("{id} submitted");
    }
    let quiet = svc.quiet;
    let r = client
        .wait(&id, |e| {
            if !quiet {
                eprintln!("{}", render_event(e));
            }
        })
        .await?;
    match r.state {
        JobState::Done => Ok(r.result.unwrap_or(Value::Null)),
        JobState::Failed => Err(Failure::Error(format!(
            "job {id} failed: {}",
            r.error.unwrap_or_default()
        ))),
        state => Err(Failure::Error(format!("job {id} ended {state:?}"))),
    }
}

async fn solve(kind: &str, args: JobArgs) -> Result<(), Failure> {
    let params = SubmitParams {
        kind: kind.into(),
        program_text: read(&args.file)?,
        selection_span: args.lines,
        original_text: None,
        config_overrides: overrides(&args.overrides),
    };
    let value = run_job(params, &args.service).await?;
    if args.service.json {
        return emit(
            args.service.out.as_deref(),
            &(serde_json::to_string_pretty(&value).expect("json") + "\n"),
        );
    }
    let res: SolveJobResult =
        serde_json::from_value(value).map_err(|e| Failure::Error(e.to_string()))?;
    match res.program {
        Some(p) => emit(args.service.out.as_deref(), &p),
        None => {
            let why = res
                .best_effort
                .map(|b| format!("best effort:\n{}\n{}", b.program, b.explanation))
                .unwrap_or_else(|| "no attempt produced a program".into());
            Err(Failure::Unsolved(format!(
                "no verified version was found; {why}"
            )))
        }
    }
}

async fn minimize(file: &Path, original: Option<&Path>, svc: &ServiceArgs) -> Result<(), Failure> {
    let params = SubmitParams {
        kind: "minimize".into(),
        program_text: read(file)?,
        selection_span: None,
        original_text: original.map(read).transpose()?,
        config_overrides: None,
    };
    let value = run_job(params, svc).await?;
    if svc.json {
        return emit(
            svc.out.as_deref(),
            &(serde_json::to_string_pretty(&value).expect("json") + "\n"),
        );
    }
    let res: MinimizeJobResult =
        serde_json::from_value(value).map_err(|e| Failure::Error(e.to_string()))?;
    if !svc.quiet {
        if res.removals.is_empty() {
            eprintln!("nothing to remove");
        }
        for r in &res.removals {
            eprintln!(
                "removed {:?} in {} (lines {}-{})",
                r.kind, r.declaration, r.start_line, r.end_line
            );
        }
    }
    emit(svc.out.as_deref(), &res.program)
}

fn verifier(args: &VerifierArgs) -> Result<Arc<dyn Verifier>, Failure> {
    match &args.mock_verifier {
        Some(p) => {
            let spec: MockSpec = serde_json::from_str(&read(p)?)
                .map_err(|e| Failure::Error(format!("{}: {e}", p.display())))?;
            Ok(Arc::new(MockVerifier::from_spec(spec)))
        }
        None => Ok(Arc::new(CachedVerifier::in_memory(DafnyVerifier::new()))),
    }
}

fn write_report(
    report: &annot_core::bench::ExperimentReport,
    out: Option<&Path>,
) -> Result<(), Failure> {
    if let Some(p) = out {
        let json = serde_json::to_string_pretty(report).expect("report serializes") + "\n";
        std::fs::write(p, json).map_err(|e| Failure::Error(format!("{}: {e}", p.display())))?;
    }
    print!("{}", render_summary(report));
    Ok(())
}

async fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Strip { file, out } => emit(out.as_deref(), &strip_text(&read(&file)?)),
        Command::Generate(a) => solve("generate", a).await,
        Command::Repair(a) => solve("repair", a).await,
        Command::Minimize {
            file,
            original,
            service,
        } => minimize(&file, original.as_deref(), &service).await,
        Command::Bench {
            config,
            verifier: v,
            records,
            report,
            workers,
        } => {
            let cfg = ExperimentConfig::load(&config).map_err(|e| Failure::Error(e.to_string()))?;
            let root = cfg
                .dataset
                .clone()
                .ok_or_else(|| Failure::Error(format!("{}: no dataset", config.display())))?;
            let dataset = load_dataset(&root).map_err(|e| Failure::Error(e.to_string()))?;
            for w in &dataset.warnings {
                eprintln!("skipped {}: {}", w.id, w.messages.join("; "));
            }
            let opts = RunOptions {
                workers: workers.unwrap_or(cfg.workers),
                records: records.or(cfg.records.clone()),
                stop_after: None,
            };
            let r = run_experiment(
                &dataset,
                &cfg.configs,
                verifier(&v)?,
                cfg.replay_dir.as_deref(),
                &opts,
            )
            .await
            .map_err(|e| Failure::Error(e.to_string()))?;
            write_report(&r, report.as_deref())
        }
        Command::Analyze { records, report } => {
            let recs = read_records(&records).map_err(|e| Failure::Error(e.to_string()))?;
            write_report(&aggregate(&recs), report.as_deref())
        }
    }
}

#[tokio::main]
async fn main() -> ExitCode {
    match run(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Unsolved(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Error(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
