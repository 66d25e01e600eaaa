//! Service configuration and per-job overrides.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::path::{Path, PathBuf};

use annot_core::repair_loop::RunConfig;

use crate::protocol::ServiceError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Base run configuration of every job.
    pub run: RunConfig,
    /// Repair iterations (or direct runs) of an editor-initiated job.
    pub retry_limit: usize,
    /// Jobs allowed to run at once; the rest stay queued.
    pub max_concurrent_jobs: usize,
    /// Recorded completions served instead of live provider calls.
    pub replay_dir: Option<PathBuf>,
    /// Each finished job writes `<job id>.json` here.
    pub artifacts_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            run: RunConfig::default(),
            retry_limit: 3,
            max_concurrent_jobs: 2,
            replay_dir: None,
            artifacts_dir: None,
        }
    }
}

impl ServiceConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.retry_limit == 0 {
            return Err("retry_limit must be at least 1".into());
        }
        if self.max_concurrent_jobs == 0 {
            return Err("max_concurrent_jobs must be at least 1".into());
        }
        self.run.validate()
    }

    /// TOML file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut cfg: ServiceConfig =
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.replay_dir, &mut cfg.artifacts_dir]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// The run configuration of one job: the retry limit bounds both
    /// strategies, then `overrides` replace individual keys.
    pub fn job_config(&self, overrides: Option<&Value>) -> Result<RunConfig, ServiceError> {
        let mut overrides = match overrides {
            None | Some(Value::Null) => Map::new(),
            Some(Value::Object(m)) => m.clone(),
            Some(other) => {
                return Err(ServiceError::BadRequest(format!(
                    "config_overrides must be an object, got {other}"
                )))
            }
        };
        let limit = match overrides.remove("retry_limit") {
            None => self.retry_limit,
            Some(v) => v.as_u64().filter(|&n| n > 0).ok_or_else(|| {
                ServiceError::BadRequest(format!("retry_limit must be a positive integer, got {v}"))
            })? as usize,
        };
        let mut base = self.run.clone();
        base.max_repair_iterations = limit;
        base.max_direct_runs = limit;
        let mut value = serde_json::to_value(&base).expect("run config serializes");
        let Value::Object(fields) = &mut value else {
            unreachable!("run config is an object")
        };
        for (k, v) in overrides {
            let slot = fields.get_mut(&k).ok_or_else(|| {
                ServiceError::BadRequest(format!("unknown configuration key {k}"))
            })?;
            merge(slot, v);
        }
        let cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| ServiceError::BadRequest(format!("config_overrides: {e}")))?;
        cfg.validate().map_err(ServiceError::BadRequest)?;
        Ok(cfg)
    }

    /// Applies `set` to a copy; the concurrency limit is fixed at startup.
    pub fn updated(&self, set: &Value) -> Result<Self, ServiceError> {
        let mut value = serde_json::to_value(self).expect("service config serializes");
        merge(&mut value, set.clone());
        let cfg: ServiceConfig = serde_json::from_value(value)
            .map_err(|e| ServiceError::BadRequest(format!("config: {e}")))?;
        if cfg.max_concurrent_jobs != self.max_concurrent_jobs {
            return Err(ServiceError::BadRequest(
                "max_concurrent_jobs cannot change while running".into(),
            ));
        }
        cfg.validate().map_err(ServiceError::BadRequest)?;
        Ok(cfg)
    }
}

/// Objects merge key by key; anything else replaces.
fn merge(dst: &mut Value, src: Value) {
    match (dst, src) {
        (Value::Object(d), Value::Object(s)) => {
            for (k, v) in s {
                merge(d.entry(k).or_insert(Value::Null), v);
            }
        }
        (d, s) => *d = s,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use annot_core::repair_loop::Strategy;
    use serde_json::json;

    #[test]
    fn retry_limit_bounds_both_strategies() {
        let c = ServiceConfig::default();
        let r = c.job_config(None).unwrap();
        assert_eq!((r.max_repair_iterations, r.max_direct_runs), (3, 3));
        let r = c
            .job_config(Some(&json!({"retry_limit": 5, "strategy": "direct"})))
            .unwrap();
        assert_eq!(
            (r.max_repair_iterations, r.max_direct_runs, r.strategy),
            (5, 5, Strategy::Direct)
        );
    }

    #[test]
    fn overrides_merge_nested_keys_and_reject_unknown_ones() {
        let c = ServiceConfig::default();
        let r = c
            .job_config(Some(&json!({"verifier": {"timeout_s": 5.0}})))
            .unwrap();
        assert_eq!(r.verifier.timeout_s, 5.0);
        assert_eq!(r.verifier.executable, "dafny");
        for bad in [
            json!({"nope": 1}),
            json!({"retry_limit": 0}),
            json!([1]),
            json!({"verifier": {"timeout_s": -1.0}}),
        ] {
            assert!(
                matches!(c.job_config(Some(&bad)), Err(ServiceError::BadRequest(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn updates_keep_the_concurrency_limit() {
        let c = ServiceConfig::default();
        assert_eq!(
            c.updated(&json!({"retry_limit": 4})).unwrap().retry_limit,
            4
        );
        assert!(c.updated(&json!({"max_concurrent_jobs": 9})).is_err());
        assert!(c.updated(&json!({"bogus": true})).is_err());
    }
}
