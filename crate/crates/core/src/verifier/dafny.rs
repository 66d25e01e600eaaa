//! The Dafny command-line verifier as an external process.

use async_trait::async_trait;
use std::path::{Path, PathBuf};
use std::process::Stdio;
use std::time::{Duration, Instant};
use tokio::io::AsyncReadExt;
use tokio::process::Command;

use super::patterns::{parse_output, PatternTable};
use super::{VerificationOutcome, Verifier, VerifierConfig};

/// Time allowed for a killed process group to be reaped.
const GRACE: Duration = Duration::from_secs(2);

pub struct DafnyVerifier {
    table: PatternTable,
}

impl DafnyVerifier {
    pub fn new() -> Self {
        Self {
            table: PatternTable::default(),
        }
    }

    pub fn with_table(table: PatternTable) -> Self {
        Self { table }
    }
}

impl Default for DafnyVerifier {
    fn default() -> Self {
        Self::new()
    }
}

/// Locates a Dafny executable: `$DAFNY` if set, else `dafny` on `PATH`.
pub fn find_dafny() -> Option<PathBuf> {
    if let Some(p) = std::env::var_os("DAFNY") {
        let p = PathBuf::from(p);
        return p.is_file().then_some(p);
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|d| d.join("dafny"))
        .find(|p| p.is_file())
}

fn build_args(file: &Path, cfg: &VerifierConfig) -> Vec<String> {
    let mut args = vec!["verify".to_string(), file.display().to_string()];
    if let Some(sym) = &cfg.filter_symbol {
        args.push("--filter-symbol".into());
        args.push(sym.clone());
    }
    args.extend(cfg.extra_args.iter().cloned());
    args
}

#[cfg(unix)]
fn kill_group(pid: u32) {
    // SAFETY: signalling a process group we created; failure is harmless.
    unsafe {
        libc::killpg(pid as libc::pid_t, libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_group(_pid: u32) {}

#[async_trait]
impl Verifier for DafnyVerifier {
    async fn verify(&self, text: &str, cfg: &VerifierConfig) -> VerificationOutcome {
        if let Err(e) = cfg.validate() {
            return VerificationOutcome::tool_error(e);
        }
        let dir = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return VerificationOutcome::tool_error(format!("temporary directory: {e}")),
        };
        let file = dir.path().join("program.dfy");
        if let Err(e) = std::fs::write(&file, text) {
            return VerificationOutcome::tool_error(format!("writing program: {e}"));
        }
        let mut cmd = Command::new(&cfg.executable);
        cmd.args(build_args(Path::new("program.dfy"), cfg))
            .current_dir(dir.path())
            .stdin(Stdio::null())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .kill_on_drop(true);
        #[cfg(unix)]
        cmd.process_group(0);

        let started = Instant::now();
        let mut child = match cmd.spawn() {
            Ok(c) => c,
            Err(e) => {
                return VerificationOutcome::tool_error(format!(
                    "cannot run {}: {e}",
                    cfg.executable
                ));
            }
        };
        let pid = child.id();
        let mut stdout = child.stdout.take().expect("piped stdout");
        let mut stderr = child.stderr.take().expect("piped stderr");
        let collect = async {
            let (mut out, mut err) = (String::new(), String::new());
            let (a, b) = tokio::join!(
                stdout.read_to_string(&mut out),
                stderr.read_to_string(&mut err)
            );
            let status = child.wait().await;
            (a.and(b).and(status), out, err)
        };
        let limit = Duration::from_secs_f64(cfg.timeout_s);
        let result = tokio::time::timeout(limit, collect).await;
        let elapsed = started.elapsed().as_secs_f64();
        let mut outcome = match result {
            Err(_) => {
                if let Some(pid) = pid {
                    kill_group(pid);
                }
                let _ = tokio::time::timeout(GRACE, child.wait()).await;
                VerificationOutcome::timeout()
            }
            Ok((Err(e), _, _)) => {
                VerificationOutcome::tool_error(format!("waiting for verifier: {e}"))
            }
            Ok((Ok(status), out, err)) => {
                let combined = format!("{out}\n{err}");
                parse_output(&self.table, &combined, status.success())
            }
        };
        outcome.elapsed_s = elapsed;
        outcome
    }
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;
    use crate::verifier::VerificationStatus;
    use std::os::unix::fs::PermissionsExt;

    fn script(dir: &Path, body: &str) -> String {
        let p = dir.join("fake-dafny");
        std::fs::write(&p, format!("#!/bin/sh\n{body}\n")).unwrap();
        std::fs::set_permissions(&p, std::fs::Permissions::from_mode(0o755)).unwrap();
        p.display().to_string()
    }

    #[tokio::test]
    async fn missing_executable_is_tool_error() {
        let cfg = VerifierConfig {
            executable: "/nonexistent/dafny".into(),
            ..Default::default()
        };
        let o = DafnyVerifier::new().verify("method M() {}", &cfg).await;
        assert_eq!(o.status, VerificationStatus::ToolError);
    }

    #[tokio::test]
    async fn arguments_and_output_are_wired() {
        let dir = tempfile::tempdir().unwrap();
        let exe = script(
            dir.path(),
            "echo \"args: $*\" >&2\ngrep -q 'ensures false' program.dfy && { echo 'program.dfy(1,27): Error: a postcondition could not be proved on this return path'; echo 'Dafny program verifier finished with 0 verified, 1 error'; exit 4; }\necho 'Dafny program verifier finished with 1 verified, 0 errors'",
        );
        let cfg = VerifierConfig {
            executable: exe,
            filter_symbol: Some("M".into()),
            ..Default::default()
        };
        let v = DafnyVerifier::new();
        let ok = v.verify("method M() ensures true {}", &cfg).await;
        assert_eq!(ok.status, VerificationStatus::Success);
        let bad = v.verify("method M() ensures false {}", &cfg).await;
        assert_eq!(bad.status, VerificationStatus::VerificationFailure);
        assert_eq!(bad.diagnostics.len(), 1);
        assert_eq!(
            build_args(Path::new("program.dfy"), &cfg),
            vec!["verify", "program.dfy", "--filter-symbol", "M"]
        );
    }

    #[tokio::test]
    async fn timeout_kills_process_group() {
        let dir = tempfile::tempdir().unwrap();
        let exe = script(dir.path(), "sleep 30 &\nsleep 30");
        let cfg = VerifierConfig {
            executable: exe,
            timeout_s: 0.3,
            ..Default::default()
        };
        let started = Instant::now();
        let o = DafnyVerifier::new().verify("method M() {}", &cfg).await;
        assert_eq!(o.status, VerificationStatus::Timeout);
        assert!(started.elapsed() < Duration::from_secs_f64(0.3) + GRACE + Duration::from_secs(1));
    }
}
