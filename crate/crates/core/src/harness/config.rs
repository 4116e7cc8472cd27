//! JSON run and sweep configurations.
//!
//! Single run:
//!
//! ```json
//! {
//!   "alpha": 0.3,
//!   "dataset": "data.csv",
//!   "generate": { "dim": 16, "n": 100000, "adversary": "isotropic:10000", "seed": 1, "mean": [0.0] },
//!   "seed": 7,
//!   "algo": { "max_candidates": 128 },
//!   "out": "report.json"
//! }
//! ```
//!
//! Exactly one of `dataset` and `generate` must be present. `generate.mean` is
//! optional (zeros). `algo` takes any subset of the estimator settings.
//!
//! Sweep:
//!
//! ```json
//! {
//!   "dims": [16], "ns": [25000, 50000], "alphas": [0.3],
//!   "adversaries": ["isotropic:10000"], "trials": 30,
//!   "estimators": ["entangled", "sample_mean", "oracle_inlier_mean"],
//!   "root_seed": 1, "out": "sweep.csv",
//!   "mean_scale": 10.0, "timing": false, "algo": {}
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Deserialize;

use super::HarnessError;
use crate::model::{AdversarySpec, ModelParams};
use crate::recursive::{AlgoConfig, Baseline};

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSpec {
    pub dim: usize,
    pub n: usize,
    pub adversary: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alpha: f64,
    #[serde(default)]
    pub dataset: Option<PathBuf>,
    #[serde(default)]
    pub generate: Option<GenerateSpec>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub algo: AlgoConfig,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum EstimatorKind {
    Entangled,
    Baseline(Baseline),
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Entangled => "entangled",
            EstimatorKind::Baseline(b) => b.name(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        if s == "entangled" {
            return Some(EstimatorKind::Entangled);
        }
        Baseline::ALL
            .iter()
            .find(|b| b.name() == s)
            .map(|&b| EstimatorKind::Baseline(b))
    }
}

fn default_mean_scale() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub dims: Vec<usize>,
    pub ns: Vec<usize>,
    pub alphas: Vec<f64>,
    pub adversaries: Vec<String>,
    pub trials: usize,
    pub estimators: Vec<String>,
    #[serde(default)]
    pub root_seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Coordinates of the true mean are uniform in `[-mean_scale, mean_scale]`.
    #[serde(default = "default_mean_scale")]
    pub mean_scale: f64,
    /// Record wall time in the `ms` column; off keeps the CSV reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default)]
    pub algo: AlgoConfig,
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, HarnessError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let path = if path == "." {
            "$".to_string()
        } else {
            format!("$.{path}")
        };
        HarnessError::config(format!("{path}: {}", e.inner()))
    })
}

fn read(path: &Path) -> Result<String, HarnessError> {
    std::fs::read_to_string(path)
        .map_err(|e| HarnessError::config(format!("cannot read config {}: {e}", path.display())))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&read(path)?)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(HarnessError::config(format!("$.alpha: {} not in (0, 1]", self.alpha)));
        }
        match (&self.dataset, &self.generate) {
            (Some(_), Some(_)) => return Err(HarnessError::config("$: give either `dataset` or `generate`, not both")),
            (None, None) => return Err(HarnessError::config("$: one of `dataset` or `generate` is required")),
            _ => {}
        }
        if let Some(g) = &self.generate {
            g.model_params(self.alpha)?;
            g.adversary()?;
        }
        self.algo
            .validate()
            .map_err(|e| HarnessError::config(format!("$.algo: {e}")))
    }
}

impl GenerateSpec {
    pub fn model_params(&self, alpha: f64) -> Result<ModelParams, HarnessError> {
        let mean = self.mean.clone().unwrap_or_else(|| vec![0.0; self.dim]);
        ModelParams::new(self.dim, self.n, alpha, mean).map_err(|e| HarnessError::config(format!("$.generate: {e}")))
    }

    pub fn adversary(&self) -> Result<AdversarySpec, HarnessError> {
        self.adversary
            .parse::<AdversarySpec>()
            .map_err(|e| HarnessError::config(format!("$.generate.adversary: {e}")))
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: SweepConfig = parse_json(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        Self::from_json(&read(path)?)
    }

    fn validate(&self) -> Result<(), HarnessError> {
        let nonempty = [
            ("dims", self.dims.is_empty()),
            ("ns", self.ns.is_empty()),
            ("alphas", self.alphas.is_empty()),
            ("adversaries", self.adversaries.is_empty()),
            ("estimators", self.estimators.is_empty()),
        ];
        if let Some((field, _)) = nonempty.iter().find(|(_, empty)| *empty) {
            return Err(HarnessError::config(format!("$.{field}: must not be empty")));
        }
        if self.trials == 0 {
            return Err(HarnessError::config("$.trials: must be at least 1"));
        }
        for (i, &d) in self.dims.iter().enumerate() {
            if d == 0 {
                return Err(HarnessError::config(format!("$.dims[{i}]: must be at least 1")));
            }
        }
        for (i, &n) in self.ns.iter().enumerate() {
            if n == 0 {
                return Err(HarnessError::config(format!("$.ns[{i}]: must be at least 1")));
            }
        }
        for (i, &a) in self.alphas.iter().enumerate() {
            if !(a > 0.0 && a <= 1.0) {
                return Err(HarnessError::config(format!("$.alphas[{i}]: {a} not in (0, 1]")));
            }
        }
        for (i, a) in self.adversaries.iter().enumerate() {
            let spec = a
                .parse::<AdversarySpec>()
                .map_err(|e| HarnessError::config(format!("$.adversaries[{i}]: {e}")))?;
            for &d in &self.dims {
                spec.validate(d)
                    .map_err(|e| HarnessError::config(format!("$.adversaries[{i}]: {e}")))?;
            }
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if EstimatorKind::parse(e).is_none() {
                return Err(HarnessError::config(format!(
                    "$.estimators[{i}]: unknown estimator `{e}`"
                )));
            }
        }
        if !(self.mean_scale >= 0.0 && self.mean_scale.is_finite()) {
            return Err(HarnessError::config(
                "$.mean_scale: must be a finite nonnegative number",
            ));
        }
        self.algo
            .validate()
            .map_err(|e| HarnessError::config(format!("$.algo: {e}")))
    }

    pub fn estimator_kinds(&self) -> Vec<EstimatorKind> {
        self.estimators.iter().filter_map(|e| EstimatorKind::parse(e)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_alpha_names_the_field() {
        let err = RunConfig::from_json(r#"{"generate": {"dim": 2, "n": 100, "adversary": "identity"}}"#).unwrap_err();
        assert_eq!(err.code, 2);
        assert!(err.message.contains("alpha"), "{}", err.message);
    }

    #[test]
    fn nested_errors_carry_paths() {
        let err =
            RunConfig::from_json(r#"{"alpha": 0.5, "generate": {"dim": "x", "n": 100, "adversary": "identity"}}"#)
                .unwrap_err();
        assert!(err.message.starts_with("$.generate.dim"), "{}", err.message);
        let err = RunConfig::from_json(r#"{"alpha": 0.5, "generate": {"dim": 2, "n": 100, "adversary": "bogus"}}"#)
            .unwrap_err();
        assert!(err.message.contains("$.generate.adversary"), "{}", err.message);
        let err = RunConfig::from_json(r#"{"alpha": 0.5, "generate": {"dim": 2, "n": 100, "adversary": "identity"}, "algo": {"max_candidates": 1}}"#)
            .unwrap_err();
        assert!(err.message.contains("$.algo"), "{}", err.message);
    }

    #[test]
    fn source_must_be_unique() {
        assert!(RunConfig::from_json(r#"{"alpha": 0.5}"#).is_err());
        assert!(RunConfig::from_json(
            r#"{"alpha": 0.5, "dataset": "a.csv", "generate": {"dim": 2, "n": 10, "adversary": "identity"}}"#
        )
        .is_err());
    }

    #[test]
    fn algo_overrides_are_partial() {
        let cfg = RunConfig::from_json(
            r#"{"alpha": 0.3, "generate": {"dim": 2, "n": 10, "adversary": "identity"}, "algo": {"max_candidates": 64, "outer_iterations": "proof"}}"#,
        )
        .unwrap();
        assert_eq!(cfg.algo.max_candidates, Some(64));
        assert_eq!(cfg.algo.kappa_factor, 10.0);
    }

    #[test]
    fn sweep_validation() {
        let ok = r#"{"dims": [4], "ns": [1000], "alphas": [0.3], "adversaries": ["isotropic:100"], "trials": 2, "estimators": ["entangled", "sample_mean"]}"#;
        let cfg = SweepConfig::from_json(ok).unwrap();
        assert_eq!(cfg.estimator_kinds().len(), 2);
        assert_eq!(cfg.mean_scale, 10.0);
        let bad = ok.replace("\"sample_mean\"", "\"magic\"");
        assert!(SweepConfig::from_json(&bad)
            .unwrap_err()
            .message
            .contains("$.estimators[1]"));
        let bad = ok.replace("\"trials\": 2", "\"trials\": 0");
        assert!(SweepConfig::from_json(&bad).is_err());
    }
}
