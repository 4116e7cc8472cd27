//! One-dimensional subset-of-signals estimation.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EmestError, Result};
use crate::model::{alpha_count, SampleSet};

/// Constants of the 1-d error profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorProfileConfig {
    /// Failure exponent; folded entirely into `c_delta`.
    pub delta: f64,
    pub c_delta: f64,
    pub polylog_exponent: u32,
}

impl Default for ErrorProfileConfig {
    fn default() -> Self {
        Self {
            delta: 3.0,
            c_delta: 1.0,
            polylog_exponent: 1,
        }
    }
}

impl ErrorProfileConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c_delta > 0.0 && self.c_delta.is_finite()) {
            return Err(invalid("c_delta", "must be positive"));
        }
        if !(self.delta >= 0.0) {
            return Err(invalid("delta", "must be nonnegative"));
        }
        Ok(())
    }

    /// The profile as used by the estimators. Identical to [`f_delta`] for
    /// `alpha < 1`; at `alpha = 1` (every sample is an inlier) it takes the
    /// limit of the dense branch instead of `+inf`.
    pub fn bound(&self, alpha: f64, n: usize) -> f64 {
        if alpha >= 1.0 {
            let n = n as f64;
            self.c_delta * n.ln().powi(self.polylog_exponent as i32) / n.sqrt()
        } else {
            f_delta(alpha, n, self)
        }
    }
}

/// Error profile of the 1-d estimator:
///
/// ```text
/// C (log(n/a))^p / (a^2 n^{3/2})      if C log(n)/n <= a <= n^{-3/4}
/// C (log(n/a))^p / (a^{2/3} n^{1/2})  if n^{-3/4} < a < 1
/// +inf                                otherwise
/// ```
pub fn f_delta(alpha: f64, n: usize, cfg: &ErrorProfileConfig) -> f64 {
    if n == 0 || !(alpha > 0.0 && alpha < 1.0) {
        return f64::INFINITY;
    }
    let nf = n as f64;
    let c = cfg.c_delta;
    let polylog = (nf / alpha).ln().powi(cfg.polylog_exponent as i32);
    let sparse_edge = nf.powf(-0.75);
    if alpha > sparse_edge {
        c * polylog / (alpha.powf(2.0 / 3.0) * nf.sqrt())
    } else if alpha >= c * nf.ln() / nf {
        c * polylog / (alpha * alpha * nf.powf(1.5))
    } else {
        f64::INFINITY
    }
}

/// A 1-d mean estimator for subset-of-signals data.
pub trait OneDEstimator: Sync {
    fn estimate(&self, values: &[f64], alpha: f64) -> Result<f64>;

    /// Same as [`OneDEstimator::estimate`] but free to reorder `values`.
    fn estimate_mut(&self, values: &mut [f64], alpha: f64) -> Result<f64> {
        self.estimate(values, alpha)
    }

    /// Estimate of `<direction, mu>` given the samples already projected onto
    /// `direction`. `projected` may be reordered.
    fn estimate_projected(&self, projected: &mut [f64], _direction: &DVector<f64>, alpha: f64) -> Result<f64> {
        self.estimate_mut(projected, alpha)
    }

    /// Estimate of `<direction, mu>` from the projected samples.
    fn estimate_along(&self, samples: &SampleSet, direction: &DVector<f64>, alpha: f64) -> Result<f64> {
        self.estimate_projected(&mut samples.project_onto(direction), direction, alpha)
    }

    /// Estimate of coordinate `axis` of the mean.
    fn estimate_axis(&self, samples: &SampleSet, axis: usize, alpha: f64) -> Result<f64> {
        self.estimate(&samples.coordinate(axis), alpha)
    }
}

/// Midpoint of the shortest closed interval holding `ceil(alpha * n)` samples.
/// Ties go to the window with the smallest left endpoint.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Shorth;

impl Shorth {
    /// Window scan over already sorted values.
    pub fn midpoint_sorted(sorted: &[f64], k: usize) -> f64 {
        let n = sorted.len();
        let mut best = 0;
        let mut best_width = f64::INFINITY;
        for i in 0..=n - k {
            let w = sorted[i + k - 1] - sorted[i];
            if w < best_width {
                best_width = w;
                best = i;
            }
        }
        (sorted[best] + sorted[best + k - 1]) / 2.0
    }
}

impl OneDEstimator for Shorth {
    fn estimate(&self, values: &[f64], alpha: f64) -> Result<f64> {
        self.estimate_mut(&mut values.to_vec(), alpha)
    }

    fn estimate_mut(&self, values: &mut [f64], alpha: f64) -> Result<f64> {
        if values.is_empty() {
            return Err(EmestError::Empty("1-d samples"));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid("alpha", format!("{alpha} not in (0, 1]")));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmestError::Numerical("non-finite 1-d sample".into()));
        }
        values.sort_unstable_by(f64::total_cmp);
        Ok(Self::midpoint_sorted(values, alpha_count(alpha, values.len())))
    }
}

/// Returns the true projection of a known mean, optionally perturbed by a
/// deterministic error of magnitude at most `max_error`.
#[cfg(any(test, feature = "diagnostics"))]
#[derive(Debug, Clone, PartialEq)]
pub struct InjectedOracle {
    pub mean: DVector<f64>,
    pub max_error: f64,
    pub seed: u64,
}

#[cfg(any(test, feature = "diagnostics"))]
impl InjectedOracle {
    pub fn exact(mean: DVector<f64>) -> Self {
        Self {
            mean,
            max_error: 0.0,
            seed: 0,
        }
    }

    pub fn bounded(mean: DVector<f64>, max_error: f64, seed: u64) -> Self {
        Self { mean, max_error, seed }
    }

    fn perturb(&self, key: &[f64]) -> f64 {
        if self.max_error == 0.0 {
            return 0.0;
        }
        let mut h = self.seed;
        for v in key {
            h = crate::rng::mix64(h ^ v.to_bits());
        }
        self.max_error * (2.0 * crate::rng::uniform_at(h, 0) - 1.0)
    }
}

#[cfg(any(test, feature = "diagnostics"))]
impl OneDEstimator for InjectedOracle {
    fn estimate(&self, values: &[f64], _alpha: f64) -> Result<f64> {
        if values.is_empty() {
            return Err(EmestError::Empty("1-d samples"));
        }
        Ok(self.mean[0] + self.perturb(&[0.0]))
    }

    fn estimate_projected(&self, projected: &mut [f64], direction: &DVector<f64>, _alpha: f64) -> Result<f64> {
        if projected.is_empty() {
            return Err(EmestError::Empty("1-d samples"));
        }
        Ok(direction.dot(&self.mean) + self.perturb(direction.as_slice()))
    }

    fn estimate_along(&self, samples: &SampleSet, direction: &DVector<f64>, _alpha: f64) -> Result<f64> {
        if samples.is_empty() {
            return Err(EmestError::Empty("1-d samples"));
        }
        Ok(direction.dot(&self.mean) + self.perturb(direction.as_slice()))
    }

    fn estimate_axis(&self, samples: &SampleSet, axis: usize, _alpha: f64) -> Result<f64> {
        if samples.is_empty() {
            return Err(EmestError::Empty("1-d samples"));
        }
        Ok(self.mean[axis] + self.perturb(&[axis as f64, 1.0]))
    }
}

pub fn one_d_estimate<E: OneDEstimator + ?Sized>(samples: &[f64], alpha: f64, est: &E) -> Result<f64> {
    est.estimate(samples, alpha)
}

/// Run the 1-d estimator independently along every axis.
pub fn naive_multivariate<E: OneDEstimator + ?Sized>(samples: &SampleSet, alpha: f64, est: &E) -> Result<DVector<f64>> {
    if samples.is_empty() {
        return Err(EmestError::Empty("samples"));
    }
    let mut out = DVector::zeros(samples.dim());
    for j in 0..samples.dim() {
        out[j] = est.estimate_axis(samples, j, alpha)?;
    }
    Ok(out)
}
