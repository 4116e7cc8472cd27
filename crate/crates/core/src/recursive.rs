//! Recursive dimension-halving estimator and the outer refinement loop.
//!
//! One call of [`recursive_estimate`] works in the `d`-dimensional subspace
//! spanned by the rows of `P`: it draws a fresh batch, refines the current
//! guess with a tournament, estimates the mean on the low-variance half of the
//! accepted samples' spectrum, and recurses on the high-variance half.
//! [`entangled_mean_estimation`] warm-starts from a tournament over raw
//! samples and repeats the recursive step `r` times.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EmestError, Result};
use crate::model::{generate_dataset, lift_samples, AdversarySpec, BatchPlan, GroundTruth, ModelParams, SampleSet};
use crate::rng;
use crate::scalar::{naive_multivariate, ErrorProfileConfig, OneDEstimator};
use crate::subspace::partial_estimate;
use crate::tournament::{tournament_improve, ImproveConfig, TournamentMode};

/// Hard cap on the number of outer iterations.
pub const MAX_OUTER_ITERATIONS: usize = 40;

/// When the recursion stops and falls back to per-axis 1-d estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum BaseCaseRule {
    /// `d <= dim`.
    MaxDim { dim: usize },
    /// `d <= c * log(n d / tau) * (log2 D)^2`.
    Polylog { c: f64 },
}

impl Default for BaseCaseRule {
    fn default() -> Self {
        BaseCaseRule::MaxDim { dim: 2 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterIterations {
    /// `ceil(log2 N)`.
    Pseudocode,
    /// `ceil(0.5 log2 N)`.
    Proof,
    Fixed(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AlgoConfig {
    pub profile: ErrorProfileConfig,
    pub base_case: BaseCaseRule,
    /// Per-level contraction target is `1 / (kappa_factor * log2 D)`; reported only.
    pub kappa_factor: f64,
    /// Per-call failure budget; `None` means `N^{-delta} / r`.
    pub tau: Option<f64>,
    /// Cap on tournament candidates (`current` included); `None` uses the whole batch.
    pub max_candidates: Option<usize>,
    pub tournament_mode: TournamentMode,
    pub outer_iterations: OuterIterations,
    /// Apply the `(x + y)/sqrt(2)` covariance lift before estimating.
    pub preprocess: bool,
}

impl Default for AlgoConfig {
    fn default() -> Self {
        Self {
            profile: ErrorProfileConfig::default(),
            base_case: BaseCaseRule::default(),
            kappa_factor: 10.0,
            tau: None,
            max_candidates: None,
            tournament_mode: TournamentMode::FirstSurvivor,
            outer_iterations: OuterIterations::Pseudocode,
            preprocess: false,
        }
    }
}

impl AlgoConfig {
    pub fn validate(&self) -> Result<()> {
        self.profile.validate()?;
        match self.base_case {
            BaseCaseRule::MaxDim { dim: 0 } => return Err(invalid("base_case.dim", "must be at least 1")),
            BaseCaseRule::Polylog { c } if !(c > 0.0) => return Err(invalid("base_case.c", "must be positive")),
            _ => {}
        }
        if !(self.kappa_factor > 0.0) {
            return Err(invalid("kappa_factor", "must be positive"));
        }
        if let Some(t) = self.tau {
            if !(t > 0.0 && t < 1.0) {
                return Err(invalid("tau", "must be in (0, 1)"));
            }
        }
        if self.max_candidates.is_some_and(|m| m < 2) {
            return Err(invalid("max_candidates", "must be at least 2"));
        }
        if let OuterIterations::Fixed(0) = self.outer_iterations {
            return Err(invalid("outer_iterations", "must be at least 1"));
        }
        Ok(())
    }

    pub fn outer_iterations_for(&self, n_total: usize) -> usize {
        let lg = (n_total.max(2) as f64).log2();
        let r = match self.outer_iterations {
            OuterIterations::Pseudocode => lg.ceil() as usize,
            OuterIterations::Proof => (0.5 * lg).ceil() as usize,
            OuterIterations::Fixed(r) => r,
        };
        r.clamp(1, MAX_OUTER_ITERATIONS)
    }
}

/// Sample budget of one estimation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunPlan {
    pub dim: usize,
    pub padded_dim: usize,
    /// Recursion levels, `log2` of the padded dimension (at least 1).
    pub m: usize,
    pub r: usize,
    /// `2 + m (3 r + 1)`.
    pub t: usize,
    /// Nominal batch size `floor(N / t)`.
    pub n: usize,
    pub tau: f64,
}

impl RunPlan {
    pub fn new(dim: usize, n_total: usize, cfg: &AlgoConfig) -> Result<Self> {
        if dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        let padded_dim = dim.next_power_of_two();
        let m = (padded_dim.trailing_zeros() as usize).max(1);
        let r = cfg.outer_iterations_for(n_total);
        let t = 2 + m * (3 * r + 1);
        if n_total < t {
            return Err(EmestError::InfeasibleN {
                min_n: Self::min_feasible_n(dim, cfg),
                have: n_total,
            });
        }
        let tau = cfg
            .tau
            .unwrap_or_else(|| (n_total as f64).powf(-cfg.profile.delta) / r as f64);
        Ok(Self {
            dim,
            padded_dim,
            m,
            r,
            t,
            n: n_total / t,
            tau,
        })
    }

    /// Smallest `N` whose batch plan leaves at least one sample per batch.
    pub fn min_feasible_n(dim: usize, cfg: &AlgoConfig) -> usize {
        let m = (dim.max(1).next_power_of_two().trailing_zeros() as usize).max(1);
        let t_for = |n: usize| 2 + m * (3 * cfg.outer_iterations_for(n) + 1);
        let mut n = t_for(1);
        while n < t_for(n) {
            n = t_for(n);
        }
        n
    }
}

/// Source of independent sample batches.
pub trait BatchSupplier {
    fn next_batch(&mut self) -> Result<SampleSet>;
    fn batches_drawn(&self) -> usize;
    fn samples_drawn(&self) -> usize;
}

/// Hands out the groups of a [`BatchPlan`] in order.
#[derive(Debug, Clone)]
pub struct SplitSupplier {
    batches: Vec<SampleSet>,
    next: usize,
    samples_drawn: usize,
}

impl SplitSupplier {
    pub fn new(samples: &SampleSet, plan: &BatchPlan) -> Self {
        Self {
            batches: plan.apply(samples),
            next: 0,
            samples_drawn: 0,
        }
    }

    pub fn from_batches(batches: Vec<SampleSet>) -> Self {
        Self {
            batches,
            next: 0,
            samples_drawn: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.batches.len()
    }

    pub fn planned_samples(&self) -> usize {
        self.batches.iter().map(SampleSet::len).sum()
    }
}

impl BatchSupplier for SplitSupplier {
    fn next_batch(&mut self) -> Result<SampleSet> {
        let b = self
            .batches
            .get(self.next)
            .cloned()
            .ok_or(EmestError::SupplierExhausted { drawn: self.next })?;
        self.next += 1;
        self.samples_drawn += b.len();
        Ok(b)
    }

    fn batches_drawn(&self) -> usize {
        self.next
    }

    fn samples_drawn(&self) -> usize {
        self.samples_drawn
    }
}

/// Draws every batch fresh from the data model (independent-batch access).
#[derive(Debug, Clone)]
pub struct ModelSupplier {
    params: ModelParams,
    adversary: AdversarySpec,
    seed: u64,
    drawn: usize,
    samples_drawn: usize,
}

impl ModelSupplier {
    pub fn new(params: ModelParams, adversary: AdversarySpec, seed: u64) -> Result<Self> {
        params.validate()?;
        adversary.validate(params.dim)?;
        Ok(Self {
            params,
            adversary,
            seed,
            drawn: 0,
            samples_drawn: 0,
        })
    }
}

impl BatchSupplier for ModelSupplier {
    fn next_batch(&mut self) -> Result<SampleSet> {
        let seed = rng::derive(self.seed, "model-supplier", self.drawn as u64);
        let ds = generate_dataset(&self.params, &self.adversary, seed)?;
        self.drawn += 1;
        self.samples_drawn += ds.len();
        Ok(ds.samples().clone())
    }

    fn batches_drawn(&self) -> usize {
        self.drawn
    }

    fn samples_drawn(&self) -> usize {
        self.samples_drawn
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelOutcome {
    /// Per-axis 1-d estimate on the projected batch.
    Naive,
    /// Error profile already exceeds `sqrt(d)`; tournament output returned.
    Tournament,
    /// Low-variance estimate plus recursion on the high half.
    Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelLog {
    pub iteration: usize,
    pub depth: usize,
    pub dim: usize,
    pub batch_size: usize,
    pub outcome: LevelOutcome,
    pub accepted: Option<usize>,
    pub low_max_eigenvalue: Option<f64>,
    pub moment_trace: Option<f64>,
    pub retries: usize,
}

/// Per-run constants shared by every recursion level.
pub struct RecursionContext<'a, E: OneDEstimator + ?Sized> {
    pub alpha: f64,
    /// Nominal batch size used in the error profile and base-case threshold.
    pub n: usize,
    /// Ambient dimension (after padding).
    pub ambient_dim: usize,
    pub tau: f64,
    pub cfg: &'a AlgoConfig,
    pub est: &'a E,
    pub seed: u64,
    /// Outer iteration index, only used for logging and seed derivation.
    pub iteration: usize,
}

impl<E: OneDEstimator + ?Sized> RecursionContext<'_, E> {
    fn f_bound(&self) -> f64 {
        self.cfg.profile.bound(self.alpha, self.n)
    }

    fn is_base_case(&self, d: usize) -> bool {
        if d <= 1 {
            return true;
        }
        match self.cfg.base_case {
            BaseCaseRule::MaxDim { dim } => d <= dim,
            BaseCaseRule::Polylog { c } => {
                let lg = (self.ambient_dim.max(2) as f64).log2();
                let arg = (self.n as f64) * (d as f64) / self.tau;
                (d as f64) <= c * arg.ln() * lg * lg
            }
        }
    }
}

/// Largest entry of `P P^T - I`.
pub fn row_orthonormality_residual(p: &DMatrix<f64>) -> f64 {
    (p * p.transpose() - DMatrix::identity(p.nrows(), p.nrows())).amax()
}

/// One recursive refinement step in the row space of `p` (`d x D`).
/// `current` is a `d`-vector in projected coordinates; so is the result.
pub fn recursive_estimate<E: OneDEstimator + ?Sized>(
    p: &DMatrix<f64>,
    supplier: &mut dyn BatchSupplier,
    current: &DVector<f64>,
    ctx: &RecursionContext<'_, E>,
    log: &mut Vec<LevelLog>,
) -> Result<DVector<f64>> {
    if row_orthonormality_residual(p) > 1e-8 {
        return Err(invalid("P", "rows are not orthonormal"));
    }
    recurse(p, supplier, current, ctx, log, 0)
}

fn recurse<E: OneDEstimator + ?Sized>(
    p: &DMatrix<f64>,
    supplier: &mut dyn BatchSupplier,
    current: &DVector<f64>,
    ctx: &RecursionContext<'_, E>,
    log: &mut Vec<LevelLog>,
    depth: usize,
) -> Result<DVector<f64>> {
    let d = p.nrows();
    if current.len() != d {
        return Err(EmestError::DimensionMismatch {
            expected: d,
            got: current.len(),
        });
    }
    let batch = supplier.next_batch()?.project(p)?;
    let batch_a = supplier.next_batch()?.project(p)?;
    let batch_b = supplier.next_batch()?.project(p)?;
    let level_seed = rng::derive(ctx.seed, "level", ((ctx.iteration as u64) << 8) | depth as u64);
    let mut entry = LevelLog {
        iteration: ctx.iteration,
        depth,
        dim: d,
        batch_size: batch.len(),
        outcome: LevelOutcome::Naive,
        accepted: None,
        low_max_eigenvalue: None,
        moment_trace: None,
        retries: 0,
    };

    // The tournament result is unused in this branch, so it is not computed.
    if ctx.is_base_case(d) {
        log.push(entry);
        return naive_multivariate(&batch, ctx.alpha, ctx.est);
    }

    let f = ctx.f_bound();
    let improve = ImproveConfig {
        f_bound: f,
        max_candidates: ctx.cfg.max_candidates.unwrap_or(usize::MAX),
        mode: ctx.cfg.tournament_mode,
    };
    let center = tournament_improve(current, &batch_a, &batch_b, ctx.alpha, ctx.est, &improve, level_seed)?;
    if (d as f64).sqrt() <= f {
        entry.outcome = LevelOutcome::Tournament;
        log.push(entry);
        return Ok(center);
    }

    let partial = match partial_estimate(&center, &batch, rng::derive(level_seed, "partial", 0)) {
        Err(EmestError::EmptyAcceptance { .. }) => {
            entry.retries = 1;
            let fresh = supplier.next_batch()?.project(p)?;
            partial_estimate(&center, &fresh, rng::derive(level_seed, "partial", 1))?
        }
        other => other?,
    };
    entry.outcome = LevelOutcome::Split;
    entry.accepted = Some(partial.diagnostics.n_accepted);
    entry.low_max_eigenvalue = Some(partial.diagnostics.low_max_eigenvalue);
    entry.moment_trace = Some(partial.diagnostics.moment_trace);
    log.push(entry);

    let p_high = &partial.split.p_high;
    let next_p = p_high * p;
    let next_current = p_high * current;
    let mu_high = recurse(&next_p, supplier, &next_current, ctx, log, depth + 1)?;
    Ok(&partial.mu_low + p_high.transpose() * mu_high)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedsUsed {
    pub root: u64,
    pub split: u64,
    pub estimate: u64,
    pub preprocess: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub alpha: f64,
    pub n_total: usize,
    pub algo: AlgoConfig,
    pub plan: RunPlan,
    pub f_bound: f64,
    pub contraction_target: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate: Vec<f64>,
    /// Warm start followed by the output of every outer iteration.
    pub iterates: Vec<Vec<f64>>,
    /// `|iterate - mu|` per outer iteration; filled by [`EstimateReport::attach_truth`].
    pub trace: Option<Vec<f64>>,
    pub recursion_log: Vec<LevelLog>,
    pub seeds: SeedsUsed,
    pub config_echo: ConfigEcho,
    pub early_return: bool,
    pub batches_drawn: usize,
    pub samples_drawn: usize,
    pub wall_ms: f64,
}

impl EstimateReport {
    /// Fill in the per-iteration error trace (warm start excluded).
    pub fn attach_truth(&mut self, mean: &[f64]) {
        let trace = self.iterates.iter().skip(1).map(|it| l2_distance(it, mean)).collect();
        self.trace = Some(trace);
    }

    pub fn max_depth(&self) -> usize {
        self.recursion_log.iter().map(|l| l.depth).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

pub fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Full estimator: split the samples into independent batches, warm-start with
/// a tournament from the origin, then run `r` recursive refinement steps.
pub fn entangled_mean_estimation<E: OneDEstimator + ?Sized>(
    samples: &SampleSet,
    alpha: f64,
    cfg: &AlgoConfig,
    est: &E,
    seed: u64,
) -> Result<EstimateReport> {
    cfg.validate()?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(invalid("alpha", format!("{alpha} not in (0, 1]")));
    }
    if samples.is_empty() {
        return Err(EmestError::Empty("samples"));
    }
    let plan = RunPlan::new(samples.dim(), samples.len(), cfg)?;
    let split_seed = rng::derive(seed, "estimate/split", 0);
    let pre_seed = cfg.preprocess.then(|| rng::derive(seed, "estimate/preprocess", 0));
    let work = match pre_seed {
        Some(s) => lift_samples(samples, s),
        None => samples.clone(),
    }
    .pad_to(plan.padded_dim);
    let batch_plan = BatchPlan::new(work.len(), plan.t, split_seed)?;
    let mut supplier = SplitSupplier::new(&work, &batch_plan);
    let mut report = run_with_supplier(&mut supplier, &plan, alpha, cfg, est, seed)?;
    if pre_seed.is_some() {
        let scale = std::f64::consts::SQRT_2;
        for it in report.iterates.iter_mut() {
            it.iter_mut().for_each(|v| *v *= scale);
        }
        report.estimate.iter_mut().for_each(|v| *v *= scale);
    }
    report.seeds.split = split_seed;
    report.seeds.preprocess = pre_seed;
    Ok(report)
}

/// The outer loop over an arbitrary supplier. Samples from the supplier must
/// already have `plan.padded_dim` coordinates.
pub fn run_with_supplier<E: OneDEstimator + ?Sized>(
    supplier: &mut dyn BatchSupplier,
    plan: &RunPlan,
    alpha: f64,
    cfg: &AlgoConfig,
    est: &E,
    seed: u64,
) -> Result<EstimateReport> {
    let started = Instant::now();
    let dd = plan.padded_dim;
    let f = cfg.profile.bound(alpha, plan.n);
    let lg = (dd.max(2) as f64).log2();
    let echo = ConfigEcho {
        alpha,
        n_total: plan.n * plan.t,
        algo: cfg.clone(),
        plan: plan.clone(),
        f_bound: f,
        contraction_target: 1.0 / (cfg.kappa_factor * lg),
    };
    let estimate_seed = rng::derive(seed, "estimate/levels", 0);

    let warm_a = supplier.next_batch()?;
    let warm_b = supplier.next_batch()?;
    if warm_a.dim() != dd {
        return Err(EmestError::DimensionMismatch {
            expected: dd,
            got: warm_a.dim(),
        });
    }
    let improve = ImproveConfig {
        f_bound: f,
        max_candidates: cfg.max_candidates.unwrap_or(usize::MAX),
        mode: cfg.tournament_mode,
    };
    let mut current = tournament_improve(
        &DVector::zeros(dd),
        &warm_a,
        &warm_b,
        alpha,
        est,
        &improve,
        rng::derive(seed, "estimate/warm", 0),
    )?;
    let strip = |v: &DVector<f64>| v.as_slice()[..plan.dim].to_vec();
    let mut iterates = vec![strip(&current)];
    let mut log = Vec::new();
    let early_return = f >= (plan.dim as f64).sqrt();

    if !early_return {
        let identity = DMatrix::identity(dd, dd);
        for iteration in 0..plan.r {
            let ctx = RecursionContext {
                alpha,
                n: plan.n,
                ambient_dim: dd,
                tau: plan.tau,
                cfg,
                est,
                seed: estimate_seed,
                iteration,
            };
            current = recursive_estimate(&identity, supplier, &current, &ctx, &mut log)?;
            if current.iter().any(|v| !v.is_finite()) {
                return Err(EmestError::Numerical(format!(
                    "non-finite estimate at iteration {iteration}"
                )));
            }
            iterates.push(strip(&current));
        }
    }

    Ok(EstimateReport {
        estimate: strip(&current),
        iterates,
        trace: None,
        recursion_log: log,
        seeds: SeedsUsed {
            root: seed,
            split: 0,
            estimate: estimate_seed,
            preprocess: None,
        },
        config_echo: echo,
        early_return,
        batches_drawn: supplier.batches_drawn(),
        samples_drawn: supplier.samples_drawn(),
        wall_ms: started.elapsed().as_secs_f64() * 1e3,
    })
}

/// Comparison estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    SampleMean,
    CoordinateMedian,
    NaiveShorth,
    OracleInlierMean,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [
        Baseline::SampleMean,
        Baseline::CoordinateMedian,
        Baseline::NaiveShorth,
        Baseline::OracleInlierMean,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Baseline::SampleMean => "sample_mean",
            Baseline::CoordinateMedian => "coordinate_median",
            Baseline::NaiveShorth => "naive_shorth",
            Baseline::OracleInlierMean => "oracle_inlier_mean",
        }
    }
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_unstable_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

pub fn coordinate_median(samples: &SampleSet) -> Result<DVector<f64>> {
    if samples.is_empty() {
        return Err(EmestError::Empty("samples"));
    }
    Ok(DVector::from_iterator(
        samples.dim(),
        (0..samples.dim()).map(|j| median(&mut samples.coordinate(j))),
    ))
}

pub fn baseline_estimate<E: OneDEstimator + ?Sized>(
    which: Baseline,
    samples: &SampleSet,
    alpha: f64,
    est: &E,
    truth: Option<&GroundTruth>,
) -> Result<DVector<f64>> {
    if samples.is_empty() {
        return Err(EmestError::Empty("samples"));
    }
    match which {
        Baseline::SampleMean => Ok(samples.mean()),
        Baseline::CoordinateMedian => coordinate_median(samples),
        Baseline::NaiveShorth => naive_multivariate(samples, alpha, est),
        Baseline::OracleInlierMean => {
            let t = truth.ok_or(EmestError::MissingTruth)?;
            samples.masked_mean(&t.inlier_mask)
        }
    }
}

pub fn baseline_estimators<E: OneDEstimator + ?Sized>(
    samples: &SampleSet,
    alpha: f64,
    est: &E,
    truth: Option<&GroundTruth>,
    which: &[Baseline],
) -> Result<BTreeMap<String, DVector<f64>>> {
    which
        .iter()
        .map(|&b| Ok((b.name().to_string(), baseline_estimate(b, samples, alpha, est, truth)?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{generate_dataset, AdversarySpec, ModelParams};
    use crate::scalar::Shorth;

    #[test]
    fn plan_follows_batch_formula() {
        let cfg = AlgoConfig::default();
        let p = RunPlan::new(16, 100_000, &cfg).unwrap();
        assert_eq!((p.m, p.r), (4, 17));
        assert_eq!(p.t, 2 + 4 * (3 * 17 + 1));
        assert_eq!(p.n, 100_000 / p.t);
        let p = RunPlan::new(5, 100_000, &cfg).unwrap();
        assert_eq!((p.padded_dim, p.m), (8, 3));
        let p = RunPlan::new(1, 1000, &cfg).unwrap();
        assert_eq!(p.m, 1);
        let proof = AlgoConfig {
            outer_iterations: OuterIterations::Proof,
            ..AlgoConfig::default()
        };
        assert_eq!(RunPlan::new(16, 100_000, &proof).unwrap().r, 9);
    }

    #[test]
    fn infeasible_n_reports_minimum() {
        let err = RunPlan::new(16, 50, &AlgoConfig::default()).unwrap_err();
        let EmestError::InfeasibleN { min_n, have } = err else {
            panic!("{err:?}")
        };
        assert_eq!(have, 50);
        // r grows with N, so the minimum is a fixed point of N -> t(N).
        assert_eq!(min_n, 90);
        assert!(RunPlan::new(16, min_n, &AlgoConfig::default()).is_ok());
        assert!(RunPlan::new(16, min_n - 1, &AlgoConfig::default()).is_err());
    }

    #[test]
    fn polylog_rule_never_recurses_at_small_scale() {
        let cfg = AlgoConfig {
            base_case: BaseCaseRule::Polylog { c: 4.0 },
            ..AlgoConfig::default()
        };
        let ctx = RecursionContext {
            alpha: 0.3,
            n: 476,
            ambient_dim: 16,
            tau: 1e-15 / 17.0,
            cfg: &cfg,
            est: &Shorth,
            seed: 0,
            iteration: 0,
        };
        assert!(ctx.is_base_case(16));
        assert!(ctx.is_base_case(1024));
    }

    #[test]
    fn supplier_exhaustion() {
        let s = SampleSet::from_rows(&[vec![0.0]]).unwrap();
        let mut sup = SplitSupplier::from_batches(vec![s]);
        assert!(sup.next_batch().is_ok());
        assert_eq!(sup.next_batch(), Err(EmestError::SupplierExhausted { drawn: 1 }));
    }

    #[test]
    fn baselines_on_constant_data() {
        let v = DVector::from_vec(vec![1.5, -2.0, 3.0]);
        let s = SampleSet::repeated(&v, 11);
        let truth = GroundTruth {
            mean: v.clone(),
            inlier_mask: vec![true; 11],
            descriptors: None,
        };
        let out = baseline_estimators(&s, 0.3, &Shorth, Some(&truth), &Baseline::ALL).unwrap();
        assert_eq!(out.len(), 4);
        for est in out.values() {
            assert!((est - &v).amax() < 1e-12);
        }
    }

    #[test]
    fn coordinate_median_majority() {
        let s = SampleSet::from_rows(&[vec![0.0, 0.0], vec![0.0, 0.0], vec![9.0, 9.0]]).unwrap();
        assert_eq!(coordinate_median(&s).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn oracle_baseline_needs_truth() {
        let s = SampleSet::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(
            baseline_estimate(Baseline::OracleInlierMean, &s, 0.5, &Shorth, None),
            Err(EmestError::MissingTruth)
        );
    }

    #[test]
    fn early_return_gives_warm_start() {
        // alpha far below the threshold makes the error profile infinite.
        let p = ModelParams::new(4, 2000, 0.001, vec![0.0; 4]).unwrap();
        let ds = generate_dataset(&p, &AdversarySpec::isotropic(100.0), 1).unwrap();
        let r = entangled_mean_estimation(ds.samples(), 0.001, &AlgoConfig::default(), &Shorth, 7).unwrap();
        assert!(r.early_return);
        assert_eq!(r.iterates.len(), 1);
        assert_eq!(r.estimate, r.iterates[0]);
        assert!(r.recursion_log.is_empty());
        assert_eq!(r.batches_drawn, 2);
    }
}
