use clap::Parser;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use annot_core::verifier::{
    find_dafny, CachedVerifier, DafnyVerifier, MockSpec, MockVerifier, Verifier,
};
use annot_service::{http, stdio, Service, ServiceConfig};

/// Serve annotation jobs to local clients.
#[derive(Parser)]
#[command(name = "annot-service", version)]
struct Args {
    /// Service configuration (TOML).
    #[arg(long)]
    config: Option<PathBuf>,
    /// HTTP listen address.
    #[arg(long, default_value = "127.0.0.1:7878")]
    listen: SocketAddr,
    /// Speak newline-delimited JSON on stdin/stdout instead of HTTP.
    #[arg(long)]
    stdio: bool,
    /// Answer verification requests from a mock description (JSON).
    #[arg(long)]
    mock_verifier: Option<PathBuf>,
    /// Persistent verification cache.
    #[arg(long)]
    verify_cache: Option<PathBuf>,
    /// Overrides the configured replay directory.
    #[arg(long)]
    replay_dir: Option<PathBuf>,
    /// Overrides the configured concurrency limit.
    #[arg(long)]
    max_jobs: Option<usize>,
}

fn verifier(args: &Args) -> Result<Arc<dyn Verifier>, String> {
    if let Some(path) = &args.mock_verifier {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let spec: MockSpec =
            serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        return Ok(Arc::new(MockVerifier::from_spec(spec)));
    }
    if find_dafny().is_none() {
        tracing::warn!("no dafny executable on PATH; verification will report tool errors");
    }
    Ok(match &args.verify_cache {
        Some(p) => Arc::new(
            CachedVerifier::open(DafnyVerifier::new(), p)
                .map_err(|e| format!("{}: {e}", p.display()))?,
        ),
        None => Arc::new(CachedVerifier::in_memory(DafnyVerifier::new())),
    })
}

#[tokio::main]
async fn main() -> Result<(), String> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    let args = Args::parse();
    let mut cfg = match &args.config {
        Some(p) => ServiceConfig::load(p)?,
        None => ServiceConfig::default(),
    };
    if let Some(d) = &args.replay_dir {
        cfg.replay_dir = Some(d.clone());
    }
    if let Some(n) = args.max_jobs {
        cfg.max_concurrent_jobs = n;
    }
    let service = Service::new(cfg, verifier(&args)?)?;
    if args.stdio {
        let input = tokio::io::BufReader::new(tokio::io::stdin());
        return stdio::serve_lines(service, input, tokio::io::stdout())
            .await
            .map_err(|e| e.to_string());
    }
    let listener = tokio::net::TcpListener::bind(args.listen)
        .await
        .map_err(|e| format!("{}: {e}", args.listen))?;
    tracing::info!(addr = %args.listen, "listening");
    axum::serve(listener, http::router(service))
        .await
        .map_err(|e| e.to_string())
}
