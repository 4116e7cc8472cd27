//! Rejection sampling around a center and low-variance subspace estimation.
//!
//! A sample `x` is kept with probability `exp(-|x - c|^2 / d)`. Conditioned on
//! acceptance, `x ~ N(mu_i, Sigma_i)` becomes Gaussian with covariance
//! `(Sigma_i^{-1} + (2/d) I)^{-1}` which is at most `(d/2) I`, so heavy-noise
//! samples are filtered out. The bottom half of the spectrum of the accepted
//! second moment about `c` is where the kept samples are well behaved.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{invalid, EmestError, Result};
use crate::model::SampleSet;
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct RejectionOutcome {
    pub accepted: Vec<usize>,
    pub probabilities: Vec<f64>,
    pub center: DVector<f64>,
}

pub fn acceptance_probability(x: &DVector<f64>, center: &DVector<f64>) -> f64 {
    (-(x - center).norm_squared() / x.len() as f64).exp()
}

/// Keep sample `i` independently with probability `exp(-|x_i - center|^2 / d)`.
/// The coin for index `i` depends only on `(seed, i)`.
pub fn rejection_sample(samples: &SampleSet, center: &DVector<f64>, seed: u64) -> Result<RejectionOutcome> {
    if samples.dim() != center.len() {
        return Err(EmestError::DimensionMismatch {
            expected: center.len(),
            got: samples.dim(),
        });
    }
    let d = samples.dim() as f64;
    let coin_seed = rng::derive(seed, "rejection", 0);
    let mut probabilities = Vec::with_capacity(samples.len());
    let mut accepted = Vec::new();
    for (i, x) in samples.as_matrix().column_iter().enumerate() {
        let p = (-(x - center).norm_squared() / d).exp();
        if rng::uniform_at(coin_seed, i as u64) < p {
            accepted.push(i);
        }
        probabilities.push(p);
    }
    Ok(RejectionOutcome {
        accepted,
        probabilities,
        center: center.clone(),
    })
}

/// Distribution of an accepted sample.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalGaussian {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

fn check_square(m: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.nrows() != d || m.ncols() != d {
        return Err(EmestError::DimensionMismatch {
            expected: d,
            got: m.nrows(),
        });
    }
    Ok(())
}

/// `Sigma~ = (Sigma^{-1} + (2/d) I)^{-1}`, `mu~ = Sigma~ ((2/d) c + Sigma^{-1} mu)`.
pub fn conditional_params(
    sigma: &DMatrix<f64>,
    mu: &DVector<f64>,
    center: &DVector<f64>,
) -> Result<ConditionalGaussian> {
    let d = mu.len();
    check_square(sigma, d)?;
    if center.len() != d {
        return Err(EmestError::DimensionMismatch {
            expected: d,
            got: center.len(),
        });
    }
    let chol = symmetrize(sigma)
        .cholesky()
        .ok_or_else(|| EmestError::Singular("covariance is not positive definite".into()))?;
    let sigma_inv = chol.inverse();
    let w = 2.0 / d as f64;
    let precision = &sigma_inv + DMatrix::identity(d, d) * w;
    let cov = symmetrize(
        &precision
            .cholesky()
            .ok_or_else(|| EmestError::Singular("conditional precision".into()))?
            .inverse(),
    );
    let mean = &cov * (center * w + &sigma_inv * mu);
    Ok(ConditionalGaussian { mean, cov })
}

/// `(2/d) avg(Sigma~_i) (center - mu)`: the mean shift of accepted samples.
pub fn expected_bias(
    conditionals: &[ConditionalGaussian],
    mu: &DVector<f64>,
    center: &DVector<f64>,
) -> Result<DVector<f64>> {
    let first = conditionals.first().ok_or(EmestError::Empty("conditional list"))?;
    let d = first.mean.len();
    let mut avg = DMatrix::zeros(d, d);
    for c in conditionals {
        check_square(&c.cov, d)?;
        avg += &c.cov;
    }
    avg /= conditionals.len() as f64;
    Ok(avg * (center - mu) * (2.0 / d as f64))
}

/// Closed-form `E[exp(-|x - c|^2 / d)]` for `x ~ N(mu, Sigma)`:
/// `det(I + 2 Sigma B)^{-1/2} exp(-delta^T B (I + 2 Sigma B)^{-1} delta)` with `B = I/d`.
pub fn acceptance_probability_oracle(sigma: &DMatrix<f64>, mu: &DVector<f64>, center: &DVector<f64>) -> Result<f64> {
    let d = mu.len();
    check_square(sigma, d)?;
    let s = symmetrize(sigma);
    let min_eig = s.symmetric_eigenvalues().min();
    if min_eig < -1e-10 * s.amax().max(1.0) {
        return Err(EmestError::NotPsd(format!("minimum eigenvalue {min_eig}")));
    }
    let b = 1.0 / d as f64;
    let m = DMatrix::identity(d, d) + &s * (2.0 * b);
    let lu = m.clone().lu();
    let det = lu.determinant();
    let delta = mu - center;
    let solved = lu
        .solve(&delta)
        .ok_or_else(|| EmestError::Numerical("singular I + 2 Sigma B".into()))?;
    Ok(det.powf(-0.5) * (-b * delta.dot(&solved)).exp())
}

/// Complementary row-orthonormal projectors.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceSplit {
    /// `ceil(d/2) x d`, bottom eigenvectors.
    pub p_low: DMatrix<f64>,
    /// `floor(d/2) x d`, top eigenvectors.
    pub p_high: DMatrix<f64>,
    /// Descending.
    pub eigenvalues: Vec<f64>,
}

impl SubspaceSplit {
    /// Largest identity residual among `P_low P_low^T = I`, `P_high P_high^T = I`,
    /// `P_low P_high^T = 0` and `P_low^T P_low + P_high^T P_high = I`.
    pub fn max_identity_residual(&self) -> f64 {
        let d = self.p_low.ncols();
        let lo = self.p_low.nrows();
        let hi = self.p_high.nrows();
        let r1 = (&self.p_low * self.p_low.transpose() - DMatrix::identity(lo, lo)).amax();
        let r2 = if hi > 0 {
            (&self.p_high * self.p_high.transpose() - DMatrix::identity(hi, hi)).amax()
        } else {
            0.0
        };
        let r3 = if hi > 0 {
            (&self.p_low * self.p_high.transpose()).amax()
        } else {
            0.0
        };
        let r4 = (self.p_low.transpose() * &self.p_low + self.p_high.transpose() * &self.p_high
            - DMatrix::identity(d, d))
        .amax();
        r1.max(r2).max(r3).max(r4)
    }

    pub fn low_dim(&self) -> usize {
        self.p_low.nrows()
    }
}

/// `(1/k) sum (x_i - c)(x_i - c)^T`, symmetrized.
pub fn second_moment(center: &DVector<f64>, accepted: &SampleSet) -> Result<DMatrix<f64>> {
    if accepted.is_empty() {
        return Err(EmestError::EmptyAcceptance { dim: center.len() });
    }
    if accepted.dim() != center.len() {
        return Err(EmestError::DimensionMismatch {
            expected: center.len(),
            got: accepted.dim(),
        });
    }
    let mut centered = accepted.as_matrix().clone();
    for mut col in centered.column_iter_mut() {
        col -= center;
    }
    let m = &centered * centered.transpose() / accepted.len() as f64;
    Ok(symmetrize(&m))
}

/// Split R^d by the spectrum of the accepted second moment about `center`.
pub fn find_subspace(center: &DVector<f64>, accepted: &SampleSet) -> Result<SubspaceSplit> {
    let d = center.len();
    if d < 2 {
        return Err(invalid("dim", "subspace search needs d >= 2"));
    }
    let m = second_moment(center, accepted)?;
    split_from_moment(&m)
}

pub(crate) fn split_from_moment(m: &DMatrix<f64>) -> Result<SubspaceSplit> {
    let d = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0)
        .ok_or_else(|| EmestError::Numerical("eigendecomposition did not converge".into()))?;
    let mut order: Vec<usize> = (0..d).collect();
    // Stable: equal eigenvalues keep the solver's index order.
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let high = d / 2;
    let low = d - high;
    let mut p_high = DMatrix::zeros(high, d);
    let mut p_low = DMatrix::zeros(low, d);
    for (rank, &col) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(col);
        if rank < high {
            p_high.row_mut(rank).copy_from(&v.transpose());
        } else {
            p_low.row_mut(rank - high).copy_from(&v.transpose());
        }
    }
    Ok(SubspaceSplit {
        p_low,
        p_high,
        eigenvalues: order.iter().map(|&i| eig.eigenvalues[i]).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialDiagnostics {
    pub n_samples: usize,
    pub n_accepted: usize,
    pub moment_trace: f64,
    /// Largest eigenvalue of the accepted second moment inside the low half.
    pub low_max_eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialEstimate {
    pub split: SubspaceSplit,
    /// Already lifted to R^d: `P_low^T P_low mean(accepted)`.
    pub mu_low: DVector<f64>,
    pub diagnostics: PartialDiagnostics,
}

pub fn partial_estimate(center: &DVector<f64>, samples: &SampleSet, seed: u64) -> Result<PartialEstimate> {
    let d = center.len();
    if d < 2 || !d.is_multiple_of(2) {
        return Err(invalid(
            "dim",
            format!("partial estimate needs an even d >= 2, got {d}"),
        ));
    }
    if samples.is_empty() {
        return Err(EmestError::Empty("samples"));
    }
    let rej = rejection_sample(samples, center, seed)?;
    if rej.accepted.is_empty() {
        return Err(EmestError::EmptyAcceptance { dim: d });
    }
    let kept = samples.select(&rej.accepted);
    let m = second_moment(center, &kept)?;
    let split = split_from_moment(&m)?;
    let mu_low = split.p_low.transpose() * (&split.p_low * kept.mean());
    let diagnostics = PartialDiagnostics {
        n_samples: samples.len(),
        n_accepted: kept.len(),
        moment_trace: m.trace(),
        low_max_eigenvalue: split.eigenvalues[split.p_high.nrows()],
    };
    Ok(PartialEstimate {
        split,
        mu_low,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn acceptance_probability_values() {
        let c = v(&[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(acceptance_probability(&c, &c), 1.0);
        let x = v(&[2.0, 0.0, 0.0, 0.0]);
        assert!((acceptance_probability(&x, &c) - (-1.0f64).exp()).abs() < 1e-15);
        let x = v(&[40f64.sqrt(), 0.0, 0.0, 0.0]);
        assert!((acceptance_probability(&x, &c) - 4.539_992_976_248_485e-5).abs() < 1e-15);
    }

    #[test]
    fn points_at_center_are_always_kept() {
        let c = v(&[1.0, -1.0]);
        let s = SampleSet::repeated(&c, 50);
        let r = rejection_sample(&s, &c, 9).unwrap();
        assert_eq!(r.accepted.len(), 50);
        assert!(r.probabilities.iter().all(|&p| p == 1.0));
    }

    #[test]
    fn conditional_worked_examples() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let cg = conditional_params(&i2, &v(&[0.0, 0.0]), &v(&[1.0, 0.0])).unwrap();
        assert!((&cg.cov - &i2 * 0.5).amax() < 1e-15);
        assert!((&cg.mean - v(&[0.5, 0.0])).amax() < 1e-15);

        let i4 = DMatrix::<f64>::identity(4, 4);
        let mu = v(&[1.0, 2.0, 3.0, 4.0]);
        let cg = conditional_params(&i4, &mu, &mu).unwrap();
        assert!((&cg.cov - &i4 * (4.0 / 6.0)).amax() < 1e-14);
        assert!((&cg.mean - &mu).amax() < 1e-14);

        let big = &i4 * 1e12;
        let cg = conditional_params(&big, &mu, &v(&[0.0; 4])).unwrap();
        assert!((&cg.cov - &i4 * 2.0).amax() < 1e-9);
        assert!(cg.mean.amax() < 1e-9);
    }

    #[test]
    fn conditional_rejects_singular() {
        let z = DMatrix::<f64>::zeros(2, 2);
        assert!(matches!(
            conditional_params(&z, &v(&[0.0, 0.0]), &v(&[0.0, 0.0])),
            Err(EmestError::Singular(_))
        ));
    }

    #[test]
    fn bias_worked_example() {
        let i2 = DMatrix::<f64>::identity(2, 2);
        let mu = v(&[0.0, 0.0]);
        let c = v(&[1.0, 0.0]);
        let cg = conditional_params(&i2, &mu, &c).unwrap();
        let b = expected_bias(std::slice::from_ref(&cg), &mu, &c).unwrap();
        assert!((&b - v(&[0.5, 0.0])).amax() < 1e-15);
        assert!((&b - (&cg.mean - &mu)).amax() < 1e-15);
        assert_eq!(expected_bias(&[cg], &mu, &mu).unwrap(), v(&[0.0, 0.0]));
        assert!(expected_bias(&[], &mu, &c).is_err());
    }

    #[test]
    fn acceptance_oracle_closed_forms() {
        let z = DMatrix::<f64>::zeros(3, 3);
        let p = acceptance_probability_oracle(&z, &v(&[3f64.sqrt(), 0.0, 0.0]), &v(&[0.0; 3])).unwrap();
        assert!((p - (-1.0f64).exp()).abs() < 1e-14);
        let p = acceptance_probability_oracle(&DMatrix::identity(2, 2), &v(&[1.0, 1.0]), &v(&[1.0, 1.0])).unwrap();
        assert!((p - 0.5).abs() < 1e-14);
        let p = acceptance_probability_oracle(&DMatrix::identity(10, 10), &v(&[0.0; 10]), &v(&[0.0; 10])).unwrap();
        assert!((p - 0.401_877_572_016_461).abs() < 1e-12);
        let neg = -DMatrix::<f64>::identity(2, 2);
        assert!(acceptance_probability_oracle(&neg, &v(&[0.0; 2]), &v(&[0.0; 2])).is_err());
    }

    #[test]
    fn axis_aligned_split() {
        let t = 3.0;
        let acc = SampleSet::from_rows(&[vec![t, 0.0], vec![-t, 0.0]]).unwrap();
        let s = find_subspace(&v(&[0.0, 0.0]), &acc).unwrap();
        assert!((s.eigenvalues[0] - t * t).abs() < 1e-12);
        assert!(s.eigenvalues[1].abs() < 1e-12);
        assert!((s.p_high[(0, 0)].abs() - 1.0).abs() < 1e-12);
        assert!((s.p_low[(0, 1)].abs() - 1.0).abs() < 1e-12);
        assert!(s.max_identity_residual() < 1e-12);
    }

    #[test]
    fn isotropic_cloud_still_gives_valid_split() {
        let mut rows = Vec::new();
        for j in 0..4 {
            let mut e = vec![0.0; 4];
            e[j] = 1.0;
            rows.push(e.clone());
            e[j] = -1.0;
            rows.push(e);
        }
        let acc = SampleSet::from_rows(&rows).unwrap();
        let s = find_subspace(&v(&[0.0; 4]), &acc).unwrap();
        assert!(s.max_identity_residual() < 1e-10);
        assert_eq!((s.p_low.nrows(), s.p_high.nrows()), (2, 2));
    }

    #[test]
    fn empty_acceptance_is_an_error() {
        let empty = SampleSet::from_columns(DMatrix::zeros(2, 0));
        assert_eq!(
            find_subspace(&v(&[0.0, 0.0]), &empty),
            Err(EmestError::EmptyAcceptance { dim: 2 })
        );
        let far = SampleSet::from_rows(&[vec![1e6, 0.0]]).unwrap();
        assert_eq!(
            partial_estimate(&v(&[0.0, 0.0]), &far, 0),
            Err(EmestError::EmptyAcceptance { dim: 2 })
        );
    }

    #[test]
    fn partial_estimate_requires_even_dim() {
        let s = SampleSet::from_rows(&[vec![0.0; 3]]).unwrap();
        assert!(partial_estimate(&v(&[0.0; 3]), &s, 0).is_err());
    }

    #[test]
    fn degenerate_cloud_at_center() {
        let c = v(&[1.0, 2.0, 3.0, 4.0]);
        let s = SampleSet::repeated(&c, 20);
        let pe = partial_estimate(&c, &s, 1).unwrap();
        assert_eq!(pe.diagnostics.n_accepted, 20);
        assert_eq!(pe.diagnostics.moment_trace, 0.0);
        let expect = pe.split.p_low.transpose() * (&pe.split.p_low * &c);
        assert!((&pe.mu_low - expect).amax() < 1e-12);
        assert!((&pe.split.p_high * &pe.mu_low).amax() < 1e-8);
    }
}
