//! One estimation run from a JSON config.

use std::path::Path;

use serde_json::Value;

use super::config::RunConfig;
use super::HarnessError;
use crate::error::EmestError;
use crate::io;
use crate::model::{generate_dataset, Dataset};
use crate::recursive::{entangled_mean_estimation, l2_distance, EstimateReport};
use crate::scalar::Shorth;

/// Load or generate the dataset a config refers to. Relative dataset paths are
/// resolved against `base_dir`.
pub fn load_dataset(cfg: &RunConfig, base_dir: Option<&Path>) -> Result<Dataset, HarnessError> {
    if let Some(path) = &cfg.dataset {
        let full = match base_dir {
            Some(dir) if path.is_relative() => dir.join(path),
            _ => path.clone(),
        };
        if !full.exists() {
            return Err(HarnessError::config(format!(
                "$.dataset: file {} not found",
                full.display()
            )));
        }
        let data = io::read_dataset(&full)?;
        if data.dim() == 0 {
            return Err(HarnessError::config("$.dataset: no coordinates"));
        }
        return Ok(data);
    }
    let g = cfg.generate.as_ref().expect("validated config has a source");
    let params = g.model_params(cfg.alpha)?;
    let adversary = g.adversary()?;
    Ok(generate_dataset(&params, &adversary, g.seed)?)
}

/// Run the estimator on the configured data. `seed` overrides the config seed.
pub fn run_config(cfg: &RunConfig, base_dir: Option<&Path>, seed: Option<u64>) -> Result<Value, HarnessError> {
    let data = load_dataset(cfg, base_dir)?;
    let seed = seed.unwrap_or(cfg.seed);
    let mut report =
        entangled_mean_estimation(data.samples(), cfg.alpha, &cfg.algo, &Shorth, seed).map_err(with_minimal_n)?;
    let l2 = data.truth().map(|t| {
        report.attach_truth(t.mean.as_slice());
        l2_distance(&report.estimate, t.mean.as_slice())
    });
    Ok(report_json(&report, l2))
}

/// Load the config at `path`, run it and optionally write the report to the
/// configured `out` path.
pub fn run_single(path: &Path, seed: Option<u64>) -> Result<Value, HarnessError> {
    let cfg = RunConfig::load(path)?;
    let base = path.parent();
    let json = run_config(&cfg, base, seed)?;
    if let Some(out) = &cfg.out {
        let out = match base {
            Some(dir) if out.is_relative() => dir.join(out),
            _ => out.clone(),
        };
        let text = serde_json::to_string_pretty(&json).expect("report serializes");
        std::fs::write(&out, text).map_err(|e| HarnessError::io(format!("{}: {e}", out.display())))?;
    }
    Ok(json)
}

fn report_json(report: &EstimateReport, l2: Option<f64>) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    let obj = v.as_object_mut().expect("report is an object");
    obj.insert("l2_error".into(), l2.map_or(Value::Null, Value::from));
    obj.insert("max_depth".into(), Value::from(report.max_depth()));
    v
}

fn with_minimal_n(e: EmestError) -> HarnessError {
    let min_n = match &e {
        EmestError::InfeasibleN { min_n, .. } => Some(*min_n),
        _ => None,
    };
    let mut err = HarnessError::from(e);
    if let Some(n) = min_n {
        err.message = format!("{} (minimal feasible N = {n})", err.message);
    }
    err
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{EXIT_CONFIG, EXIT_INFEASIBLE};

    #[test]
    fn clean_smoke_run_reports_finite_error() {
        let cfg = RunConfig::from_json(
            r#"{"alpha": 1.0, "generate": {"dim": 4, "n": 10000, "adversary": "identity", "seed": 3}, "seed": 1}"#,
        )
        .unwrap();
        let json = run_config(&cfg, None, None).unwrap();
        let err = json["l2_error"].as_f64().unwrap();
        assert!(err.is_finite() && err >= 0.0);
        assert_eq!(json["estimate"].as_array().unwrap().len(), 4);
    }

    #[test]
    fn tiny_n_is_infeasible() {
        let cfg = RunConfig::from_json(r#"{"alpha": 0.5, "generate": {"dim": 4, "n": 20, "adversary": "identity"}}"#)
            .unwrap();
        let err = run_config(&cfg, None, None).unwrap_err();
        assert_eq!(err.code, EXIT_INFEASIBLE);
        assert!(err.message.contains("minimal feasible N"), "{}", err.message);
    }

    #[test]
    fn missing_dataset_is_a_config_error() {
        let cfg = RunConfig::from_json(r#"{"alpha": 0.5, "dataset": "/nonexistent/x.csv"}"#).unwrap();
        assert_eq!(run_config(&cfg, None, None).unwrap_err().code, EXIT_CONFIG);
    }
}
