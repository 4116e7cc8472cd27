//! Subset-of-signals data model.
//!
//! Every sample is Gaussian around a shared mean. At least `ceil(alpha * N)` of
//! them have covariance bounded by the identity; the rest follow an adversary
//! family. Samples and the ground truth are stored side by side in a
//! [`Dataset`], but estimators only ever receive a [`SampleSet`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, DVectorView};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, EmestError, Result};
use crate::rng;

/// Slack used when rounding `alpha * N` up, so that e.g. `0.3 * 10` counts as 3.
const CEIL_SLACK: f64 = 1e-9;

/// `ceil(alpha * n)` clamped to `[1, n]`.
pub fn alpha_count(alpha: f64, n: usize) -> usize {
    let k = (alpha * n as f64 - CEIL_SLACK).ceil();
    (k.max(1.0) as usize).min(n.max(1))
}

/// A set of samples in R^dim, stored one sample per column.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    data: DMatrix<f64>,
}

impl SampleSet {
    /// Wrap a `dim x len` matrix whose columns are samples.
    pub fn from_columns(data: DMatrix<f64>) -> Self {
        Self { data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let first = rows.first().ok_or(EmestError::Empty("sample rows"))?;
        let dim = first.len();
        if dim == 0 {
            return Err(invalid("samples", "zero-dimensional samples"));
        }
        let mut data = DMatrix::zeros(dim, rows.len());
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(EmestError::DimensionMismatch {
                    expected: dim,
                    got: row.len(),
                });
            }
            data.column_mut(i).copy_from_slice(row);
        }
        Ok(Self { data })
    }

    /// `len` copies of the same point.
    pub fn repeated(point: &DVector<f64>, len: usize) -> Self {
        Self {
            data: DMatrix::from_fn(point.len(), len, |r, _| point[r]),
        }
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn sample(&self, i: usize) -> DVectorView<'_, f64> {
        self.data.column(i)
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    /// Apply a `d x dim` projector to every sample.
    pub fn project(&self, p: &DMatrix<f64>) -> Result<SampleSet> {
        if p.ncols() != self.dim() {
            return Err(EmestError::DimensionMismatch {
                expected: self.dim(),
                got: p.ncols(),
            });
        }
        Ok(SampleSet { data: p * &self.data })
    }

    /// Inner product of every sample with `dir`.
    pub fn project_onto(&self, dir: &DVector<f64>) -> Vec<f64> {
        self.data.tr_mul(dir).as_slice().to_vec()
    }

    pub fn select(&self, indices: &[usize]) -> SampleSet {
        SampleSet {
            data: self.data.select_columns(indices),
        }
    }

    pub fn coordinate(&self, j: usize) -> Vec<f64> {
        self.data.row(j).iter().copied().collect()
    }

    pub fn mean(&self) -> DVector<f64> {
        if self.is_empty() {
            return DVector::zeros(self.dim());
        }
        self.data.column_mean()
    }

    /// Mean over the samples flagged `true`.
    pub fn masked_mean(&self, mask: &[bool]) -> Result<DVector<f64>> {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| mask[i]).collect();
        if idx.is_empty() {
            return Err(EmestError::Empty("masked sample set"));
        }
        Ok(self.select(&idx).mean())
    }

    /// Append zero-valued coordinates up to `dim`.
    pub fn pad_to(&self, dim: usize) -> SampleSet {
        if dim == self.dim() {
            return self.clone();
        }
        let mut data = DMatrix::zeros(dim, self.len());
        data.rows_mut(0, self.dim()).copy_from(&self.data);
        SampleSet { data }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub dim: usize,
    pub n_samples: usize,
    pub alpha: f64,
    pub true_mean: Vec<f64>,
}

impl ModelParams {
    pub fn new(dim: usize, n_samples: usize, alpha: f64, true_mean: Vec<f64>) -> Result<Self> {
        let p = Self {
            dim,
            n_samples,
            alpha,
            true_mean,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(invalid("dim", "must be at least 1"));
        }
        if self.n_samples == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(invalid("alpha", format!("{} not in (0, 1]", self.alpha)));
        }
        if self.true_mean.len() != self.dim {
            return Err(EmestError::DimensionMismatch {
                expected: self.dim,
                got: self.true_mean.len(),
            });
        }
        Ok(())
    }

    pub fn n_inliers(&self) -> usize {
        alpha_count(self.alpha, self.n_samples)
    }
}

/// Covariance rule for the designated inliers.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub enum InlierRule {
    /// Sigma = I.
    #[default]
    Identity,
    /// Sigma = s I with s uniform in [1/2, 1], drawn per sample.
    UniformScale,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum AdversaryKind {
    /// Outliers are also drawn with identity covariance.
    Identity,
    /// Outlier covariance `var * I`.
    IsotropicScale { var: f64 },
    /// Outlier covariance `I + scale * U U^T` for one random rank-`rank`
    /// orthonormal `U` shared by the whole dataset.
    AnisotropicLowRank { rank: usize, scale: f64 },
    /// Every sample varies along `axis` only (0-based); all other coordinates
    /// equal the mean exactly. Outliers have variance `var` on the axis.
    OneDHardEmbed { axis: usize, var: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversarySpec {
    pub kind: AdversaryKind,
    #[serde(default)]
    pub inliers: InlierRule,
}

impl AdversarySpec {
    pub fn new(kind: AdversaryKind) -> Self {
        Self {
            kind,
            inliers: InlierRule::Identity,
        }
    }

    pub fn isotropic(var: f64) -> Self {
        Self::new(AdversaryKind::IsotropicScale { var })
    }

    pub fn identity() -> Self {
        Self::new(AdversaryKind::Identity)
    }

    pub fn with_inliers(mut self, rule: InlierRule) -> Self {
        self.inliers = rule;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        match self.kind {
            AdversaryKind::Identity => Ok(()),
            AdversaryKind::IsotropicScale { var } => {
                if var.is_finite() && var >= 1.0 {
                    Ok(())
                } else {
                    Err(invalid("adversary", format!("isotropic variance {var} must be >= 1")))
                }
            }
            AdversaryKind::AnisotropicLowRank { rank, scale } => {
                if rank == 0 || rank > dim {
                    return Err(invalid("adversary", format!("rank {rank} not in [1, {dim}]")));
                }
                if !(scale.is_finite() && scale >= 0.0) {
                    return Err(EmestError::NotPsd(format!("low-rank scale {scale}")));
                }
                Ok(())
            }
            AdversaryKind::OneDHardEmbed { axis, var } => {
                if axis >= dim {
                    return Err(invalid("adversary", format!("axis {axis} out of range for dim {dim}")));
                }
                if !(var.is_finite() && var >= 0.0) {
                    return Err(EmestError::NotPsd(format!("axis variance {var}")));
                }
                Ok(())
            }
        }
    }
}

/// Canonical text form, e.g. `identity`, `isotropic:10000`, `lowrank:2:100`,
/// `embed:0:100`. A `+uniform` suffix selects the scaled inlier rule.
impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            AdversaryKind::Identity => write!(f, "identity")?,
            AdversaryKind::IsotropicScale { var } => write!(f, "isotropic:{var}")?,
            AdversaryKind::AnisotropicLowRank { rank, scale } => write!(f, "lowrank:{rank}:{scale}")?,
            AdversaryKind::OneDHardEmbed { axis, var } => write!(f, "embed:{axis}:{var}")?,
        }
        if self.inliers == InlierRule::UniformScale {
            write!(f, "+uniform")?;
        }
        Ok(())
    }
}

impl FromStr for AdversarySpec {
    type Err = EmestError;

    fn from_str(s: &str) -> Result<Self> {
        let (body, inliers) = match s.strip_suffix("+uniform") {
            Some(b) => (b, InlierRule::UniformScale),
            None => (s, InlierRule::Identity),
        };
        let parts: Vec<&str> = body.split(':').collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| invalid("adversary", format!("`{s}` is missing a parameter")))?
                .parse::<f64>()
                .map_err(|e| invalid("adversary", format!("`{s}`: {e}")))
        };
        let int = |i: usize| -> Result<usize> {
            parts
                .get(i)
                .ok_or_else(|| invalid("adversary", format!("`{s}` is missing a parameter")))?
                .parse::<usize>()
                .map_err(|e| invalid("adversary", format!("`{s}`: {e}")))
        };
        let expect_len = |n: usize| -> Result<()> {
            if parts.len() == n {
                Ok(())
            } else {
                Err(invalid("adversary", format!("`{s}` expects {} parameter(s)", n - 1)))
            }
        };
        let kind = match parts[0] {
            "identity" => {
                expect_len(1)?;
                AdversaryKind::Identity
            }
            "isotropic" => {
                expect_len(2)?;
                AdversaryKind::IsotropicScale { var: num(1)? }
            }
            "lowrank" => {
                expect_len(3)?;
                AdversaryKind::AnisotropicLowRank {
                    rank: int(1)?,
                    scale: num(2)?,
                }
            }
            "embed" => {
                expect_len(3)?;
                AdversaryKind::OneDHardEmbed {
                    axis: int(1)?,
                    var: num(2)?,
                }
            }
            other => return Err(invalid("adversary", format!("unknown adversary `{other}`"))),
        };
        Ok(Self { kind, inliers })
    }
}

/// Compact covariance description.
#[derive(Debug, Clone, PartialEq)]
pub enum CovDescriptor {
    /// `var * I`.
    Isotropic { var: f64 },
    /// `base * I + scale * U U^T` with `U` a `dim x r` matrix of orthonormal columns.
    LowRank {
        base: f64,
        scale: f64,
        basis: Arc<DMatrix<f64>>,
    },
}

impl CovDescriptor {
    pub fn axis(dim: usize, axis: usize, var: f64) -> Self {
        let mut u = DMatrix::zeros(dim, 1);
        u[(axis, 0)] = 1.0;
        CovDescriptor::LowRank {
            base: 0.0,
            scale: var,
            basis: Arc::new(u),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            CovDescriptor::Isotropic { var } => var.is_finite() && *var >= 0.0,
            CovDescriptor::LowRank { base, scale, .. } => {
                base.is_finite() && scale.is_finite() && *base >= 0.0 && *scale >= 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(EmestError::NotPsd(format!("{self:?}")))
        }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        match self {
            CovDescriptor::Isotropic { var } => *var,
            CovDescriptor::LowRank { base, scale, .. } => base + scale,
        }
    }

    pub fn min_eigenvalue(&self, dim: usize) -> f64 {
        match self {
            CovDescriptor::Isotropic { var } => *var,
            CovDescriptor::LowRank { base, scale, basis } => {
                if basis.ncols() >= dim {
                    base + scale
                } else {
                    *base
                }
            }
        }
    }

    pub fn dense(&self, dim: usize) -> DMatrix<f64> {
        match self {
            CovDescriptor::Isotropic { var } => DMatrix::identity(dim, dim) * *var,
            CovDescriptor::LowRank { base, scale, basis } => {
                DMatrix::identity(dim, dim) * *base + (basis.as_ref() * basis.transpose()) * *scale
            }
        }
    }

    /// `(Sigma + I) / 2`.
    pub fn half_identity(&self) -> Self {
        match self {
            CovDescriptor::Isotropic { var } => CovDescriptor::Isotropic { var: (var + 1.0) / 2.0 },
            CovDescriptor::LowRank { base, scale, basis } => CovDescriptor::LowRank {
                base: (base + 1.0) / 2.0,
                scale: scale / 2.0,
                basis: Arc::clone(basis),
            },
        }
    }

    /// Draw `mean + Sigma^{1/2} z` into `out`.
    fn draw<R: Rng>(&self, mean: &DVector<f64>, rng: &mut R, out: &mut [f64]) {
        let dim = mean.len();
        match self {
            CovDescriptor::Isotropic { var } => {
                let s = var.sqrt();
                for j in 0..dim {
                    let z: f64 = rng.sample(StandardNormal);
                    out[j] = mean[j] + s * z;
                }
            }
            CovDescriptor::LowRank { base, scale, basis } => {
                let sb = base.sqrt();
                for j in 0..dim {
                    out[j] = mean[j];
                    if sb > 0.0 {
                        let z: f64 = rng.sample(StandardNormal);
                        out[j] += sb * z;
                    }
                }
                let ss = scale.sqrt();
                for c in 0..basis.ncols() {
                    let w: f64 = rng.sample(StandardNormal);
                    for j in 0..dim {
                        out[j] += ss * w * basis[(j, c)];
                    }
                }
            }
        }
    }
}

/// Ground-truth metadata used only for scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub mean: DVector<f64>,
    pub inlier_mask: Vec<bool>,
    /// Absent when the dataset was read back from a file.
    pub descriptors: Option<Vec<CovDescriptor>>,
}

impl GroundTruth {
    pub fn n_inliers(&self) -> usize {
        self.inlier_mask.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: SampleSet,
    truth: Option<GroundTruth>,
    pub params: ModelParams,
    pub seed: u64,
}

impl Dataset {
    pub fn new(samples: SampleSet, truth: Option<GroundTruth>, params: ModelParams, seed: u64) -> Result<Self> {
        if samples.len() != params.n_samples {
            return Err(EmestError::DimensionMismatch {
                expected: params.n_samples,
                got: samples.len(),
            });
        }
        if samples.dim() != params.dim {
            return Err(EmestError::DimensionMismatch {
                expected: params.dim,
                got: samples.dim(),
            });
        }
        if let Some(t) = &truth {
            if t.inlier_mask.len() != samples.len() || t.mean.len() != samples.dim() {
                return Err(invalid("truth", "ground truth does not match the sample matrix"));
            }
        }
        Ok(Self {
            samples,
            truth,
            params,
            seed,
        })
    }

    /// The only view estimators get.
    pub fn samples(&self) -> &SampleSet {
        &self.samples
    }

    pub fn truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sub-dataset on the given indices, carrying the matching ground truth.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        let truth = self.truth.as_ref().map(|t| GroundTruth {
            mean: t.mean.clone(),
            inlier_mask: indices.iter().map(|&i| t.inlier_mask[i]).collect(),
            descriptors: t
                .descriptors
                .as_ref()
                .map(|d| indices.iter().map(|&i| d[i].clone()).collect()),
        });
        Dataset {
            samples: self.samples.select(indices),
            truth,
            params: ModelParams {
                n_samples: indices.len(),
                ..self.params.clone()
            },
            seed: self.seed,
        }
    }
}

fn inlier_descriptor<R: Rng>(adv: &AdversarySpec, dim: usize, rng: &mut R) -> CovDescriptor {
    let s = match adv.inliers {
        InlierRule::Identity => 1.0,
        InlierRule::UniformScale => rng.random_range(0.5..=1.0),
    };
    match adv.kind {
        AdversaryKind::OneDHardEmbed { axis, .. } => CovDescriptor::axis(dim, axis, s),
        _ => CovDescriptor::Isotropic { var: s },
    }
}

fn random_orthonormal<R: Rng>(dim: usize, rank: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, rank, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q().columns(0, rank).into_owned()
}

/// Draw a dataset from the subset-of-signals model.
///
/// Exactly `ceil(alpha * N)` samples, at uniformly random positions, get an
/// inlier covariance; the rest follow `adversary`. Sample `i` is drawn from
/// its own derived stream, so the result depends only on `(params, adversary, seed)`.
pub fn generate_dataset(params: &ModelParams, adversary: &AdversarySpec, seed: u64) -> Result<Dataset> {
    params.validate()?;
    adversary.validate(params.dim)?;
    let dim = params.dim;
    let n = params.n_samples;
    let mean = DVector::from_column_slice(&params.true_mean);

    let mut setup = rng::stream(seed, "generate/setup", 0);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut setup);
    let mut inlier_mask = vec![false; n];
    for &i in &order[..params.n_inliers()] {
        inlier_mask[i] = true;
    }

    let outlier = match adversary.kind {
        AdversaryKind::Identity => CovDescriptor::Isotropic { var: 1.0 },
        AdversaryKind::IsotropicScale { var } => CovDescriptor::Isotropic { var },
        AdversaryKind::AnisotropicLowRank { rank, scale } => CovDescriptor::LowRank {
            base: 1.0,
            scale,
            basis: Arc::new(random_orthonormal(dim, rank, &mut setup)),
        },
        AdversaryKind::OneDHardEmbed { axis, var } => CovDescriptor::axis(dim, axis, var),
    };
    outlier.validate()?;

    let mut data = DMatrix::zeros(dim, n);
    let mut descriptors = Vec::with_capacity(n);
    for (i, &is_inlier) in inlier_mask.iter().enumerate() {
        let mut r = rng::stream(seed, "generate/sample", i as u64);
        let desc = if is_inlier {
            inlier_descriptor(adversary, dim, &mut r)
        } else {
            outlier.clone()
        };
        desc.draw(&mean, &mut r, data.column_mut(i).as_mut_slice());
        descriptors.push(desc);
    }

    Dataset::new(
        SampleSet::from_columns(data),
        Some(GroundTruth {
            mean,
            inlier_mask,
            descriptors: Some(descriptors),
        }),
        params.clone(),
        seed,
    )
}

/// Partition of `0..n` into `t` groups.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchPlan {
    pub t: usize,
    pub batch_sizes: Vec<usize>,
    pub assignment: Vec<Vec<usize>>,
}

impl BatchPlan {
    /// Uniformly random permutation cut into `t` contiguous groups; the first
    /// `n mod t` groups get one extra element.
    pub fn new(n: usize, t: usize, seed: u64) -> Result<Self> {
        if t == 0 {
            return Err(invalid("t", "must be at least 1"));
        }
        if t > n {
            return Err(EmestError::TooFewSamples { n, t });
        }
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng::stream(seed, "split", 0));
        let base = n / t;
        let extra = n % t;
        let mut assignment = Vec::with_capacity(t);
        let mut offset = 0;
        for b in 0..t {
            let size = base + usize::from(b < extra);
            assignment.push(perm[offset..offset + size].to_vec());
            offset += size;
        }
        Ok(Self {
            t,
            batch_sizes: assignment.iter().map(Vec::len).collect(),
            assignment,
        })
    }

    pub fn total(&self) -> usize {
        self.batch_sizes.iter().sum()
    }

    pub fn apply(&self, samples: &SampleSet) -> Vec<SampleSet> {
        self.assignment.iter().map(|idx| samples.select(idx)).collect()
    }
}

pub fn split_batches(data: &Dataset, t: usize, seed: u64) -> Result<(BatchPlan, Vec<Dataset>)> {
    let plan = BatchPlan::new(data.len(), t, seed)?;
    let views = plan.assignment.iter().map(|idx| data.subset(idx)).collect();
    Ok((plan, views))
}

/// `(x + y) / sqrt(2)` for every sample, with `y ~ N(0, I)` drawn from a
/// per-sample stream.
pub fn lift_samples(samples: &SampleSet, seed: u64) -> SampleSet {
    let mut out = samples.as_matrix().clone();
    for (i, mut col) in out.column_iter_mut().enumerate() {
        let mut r = rng::stream(seed, "preprocess", i as u64);
        for v in col.iter_mut() {
            let y: f64 = r.sample(StandardNormal);
            *v = (*v + y) / std::f64::consts::SQRT_2;
        }
    }
    SampleSet::from_columns(out)
}

/// Replace every sample `x` by `(x + y) / sqrt(2)` with fresh `y ~ N(0, I)`.
/// Afterwards every covariance is at least `I / 2`.
pub fn preprocess_half_identity(data: &Dataset, seed: u64) -> Dataset {
    let truth = data.truth.as_ref().map(|t| GroundTruth {
        mean: &t.mean / std::f64::consts::SQRT_2,
        inlier_mask: t.inlier_mask.clone(),
        descriptors: t
            .descriptors
            .as_ref()
            .map(|d| d.iter().map(CovDescriptor::half_identity).collect()),
    });
    let params = ModelParams {
        true_mean: data
            .params
            .true_mean
            .iter()
            .map(|m| m / std::f64::consts::SQRT_2)
            .collect(),
        ..data.params.clone()
    };
    Dataset {
        samples: lift_samples(&data.samples, seed),
        truth,
        params,
        seed: data.seed,
    }
}
