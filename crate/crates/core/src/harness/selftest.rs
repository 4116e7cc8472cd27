//! Deterministic invariant checks runnable from the CLI.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::config::SweepConfig;
use super::sweep;
use crate::model::SampleSet;
use crate::recursive::{entangled_mean_estimation, AlgoConfig};
use crate::rng;
use crate::scalar::{OneDEstimator, Shorth};
use crate::subspace::{
    acceptance_probability_oracle, conditional_params, expected_bias, find_subspace, ConditionalGaussian,
};
use crate::tournament::{tournament_select, TournamentMode};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn check(name: &'static str, passed: bool, detail: String) -> Check {
    Check { name, passed, detail }
}

fn gaussian_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vector(rng: &mut impl Rng, d: usize, scale: f64) -> DVector<f64> {
    DVector::from_fn(d, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

fn shorth_basics() -> Check {
    let cases: [(&[f64], f64, f64); 3] = [
        (&[0.0, 0.0, 0.0, 10.0], 0.75, 0.0),
        (&[1.0, 2.0, 3.0, 4.0, 5.0], 1.0, 3.0),
        (&[5.0, -1.0, 0.0, 1.0, 100.0, 101.0], 0.5, 0.0),
    ];
    let mut worst = 0.0f64;
    for (xs, alpha, want) in cases {
        match Shorth.estimate(xs, alpha) {
            Ok(got) => worst = worst.max((got - want).abs()),
            Err(e) => return check("shorth_basics", false, e.to_string()),
        }
    }
    check("shorth_basics", worst == 0.0, format!("max deviation {worst:e}"))
}

fn bias_identity() -> Check {
    let mut r = rng::stream(11, "selftest/bias", 0);
    let mut worst = 0.0f64;
    for d in [2usize, 4, 8] {
        let mu = gaussian_vector(&mut r, d, 3.0);
        let center = gaussian_vector(&mut r, d, 3.0);
        let mut conds: Vec<ConditionalGaussian> = Vec::new();
        for _ in 0..5 {
            let a = gaussian_matrix(&mut r, d, d);
            let sigma = &a * a.transpose() + DMatrix::identity(d, d) * 0.5;
            match conditional_params(&sigma, &mu, &center) {
                Ok(c) => conds.push(c),
                Err(e) => return check("bias_identity", false, e.to_string()),
            }
        }
        let avg = conds.iter().fold(DVector::zeros(d), |acc, c| acc + &c.mean) / conds.len() as f64;
        let want = match expected_bias(&conds, &mu, &center) {
            Ok(b) => b,
            Err(e) => return check("bias_identity", false, e.to_string()),
        };
        worst = worst.max((avg - &mu - &want).norm() / want.norm().max(1e-300));
    }
    check(
        "bias_identity",
        worst <= 1e-10,
        format!("max relative residual {worst:e}"),
    )
}

fn split_identities() -> Check {
    let mut r = rng::stream(12, "selftest/split", 0);
    let mut worst_ortho = 0.0f64;
    let mut spectral_ok = true;
    for d in [2usize, 4, 8, 16] {
        let cloud = SampleSet::from_columns(gaussian_matrix(&mut r, d, 3 * d));
        let center = gaussian_vector(&mut r, d, 1.0);
        let split = match find_subspace(&center, &cloud) {
            Ok(s) => s,
            Err(e) => return check("subspace_split", false, e.to_string()),
        };
        worst_ortho = worst_ortho.max(split.max_identity_residual());
        let trace: f64 = split.eigenvalues.iter().sum();
        if split.eigenvalues[d / 2] > 2.0 * trace / d as f64 + 1e-9 {
            spectral_ok = false;
        }
    }
    check(
        "subspace_split",
        worst_ortho <= 1e-8 && spectral_ok,
        format!(
            "identity residual {worst_ortho:e}, spectral bound {}",
            if spectral_ok { "holds" } else { "violated" }
        ),
    )
}

fn acceptance_closed_forms() -> Check {
    let two = acceptance_probability_oracle(&DMatrix::identity(2, 2), &DVector::zeros(2), &DVector::zeros(2));
    let ten = acceptance_probability_oracle(&DMatrix::identity(10, 10), &DVector::zeros(10), &DVector::zeros(10));
    match (two, ten) {
        (Ok(a), Ok(b)) => {
            let dev = (a - 0.5).abs().max((b - (10.0f64 / 12.0).powi(5)).abs());
            check("acceptance_oracle", dev <= 1e-12, format!("max deviation {dev:e}"))
        }
        (Err(e), _) | (_, Err(e)) => check("acceptance_oracle", false, e.to_string()),
    }
}

fn tournament_on_clean_data() -> Check {
    let mut r = rng::stream(13, "selftest/tournament", 0);
    let d = 3;
    let mu = gaussian_vector(&mut r, d, 2.0);
    let samples = SampleSet::repeated(&mu, 20);
    let candidates: Vec<DVector<f64>> = (0..6).map(|_| &mu + gaussian_vector(&mut r, d, 1.0)).collect();
    let best = candidates
        .iter()
        .map(|c| (c - &mu).norm())
        .fold(f64::INFINITY, f64::min);
    match tournament_select(&candidates, &samples, 1.0, &Shorth, 0.0, TournamentMode::Exhaustive) {
        Ok(out) => {
            let got = (&candidates[out.winner] - &mu).norm();
            check(
                "tournament_factor_two",
                got <= 2.0 * best + 1e-12,
                format!("winner {got:.6}, best {best:.6}"),
            )
        }
        Err(e) => check("tournament_factor_two", false, e.to_string()),
    }
}

fn noiseless_fixed_point() -> Check {
    let mut worst = 0.0f64;
    for d in [4usize, 8] {
        let mu = DVector::from_fn(d, |i, _| i as f64 - 1.5);
        let samples = SampleSet::repeated(&mu, 4000);
        match entangled_mean_estimation(&samples, 0.5, &AlgoConfig::default(), &Shorth, 1) {
            Ok(rep) => worst = worst.max((DVector::from_vec(rep.estimate) - &mu).amax()),
            Err(e) => return check("noiseless_fixed_point", false, e.to_string()),
        }
    }
    check(
        "noiseless_fixed_point",
        worst <= 1e-8,
        format!("max deviation {worst:e}"),
    )
}

fn sweep_determinism() -> Check {
    let cfg = SweepConfig::from_json(
        r#"{"dims": [2], "ns": [3000], "alphas": [0.5], "adversaries": ["isotropic:100"], "trials": 2,
            "estimators": ["entangled", "sample_mean"], "root_seed": 3}"#,
    )
    .expect("built-in sweep config is valid");
    let run = || sweep::run_rows(&cfg).map(|rows| sweep::to_csv(&rows));
    match (run(), run()) {
        (Ok(a), Ok(b)) => check("sweep_determinism", a == b, format!("{} bytes", a.len())),
        (Err(e), _) | (_, Err(e)) => check("sweep_determinism", false, e.message),
    }
}

pub fn run_selftest() -> Vec<Check> {
    vec![
        shorth_basics(),
        bias_identity(),
        split_identities(),
        acceptance_closed_forms(),
        tournament_on_clean_data(),
        noiseless_fixed_point(),
        sweep_determinism(),
    ]
}
