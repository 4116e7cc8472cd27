//! Seeded Monte-Carlo checks of the estimator's statistical behaviour.

use emest::model::{generate_dataset, split_batches, AdversarySpec, BatchPlan, ModelParams};
use emest::recursive::{
    baseline_estimate, entangled_mean_estimation, l2_distance, recursive_estimate, AlgoConfig, Baseline, ModelSupplier,
    RecursionContext,
};
use emest::rng;
use emest::scalar::{naive_multivariate, one_d_estimate, Shorth};
use emest::tournament::{tournament_improve, ImproveConfig};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let k = xs.len();
    if k % 2 == 1 {
        xs[k / 2]
    } else {
        (xs[k / 2 - 1] + xs[k / 2]) / 2.0
    }
}

fn random_mean(seed: u64, d: usize) -> Vec<f64> {
    let mut r = rng::stream(seed, "test/mean", 0);
    (0..d).map(|_| r.random_range(-10.0..10.0)).collect()
}

#[test]
fn identity_model_covariance_converges() {
    let params = ModelParams::new(2, 100_000, 0.5, vec![0.0, 0.0]).unwrap();
    let data = generate_dataset(&params, &AdversarySpec::identity(), 1).unwrap();
    let x = data.samples().as_matrix();
    let mean = data.samples().mean();
    let mut centered = x.clone();
    for mut c in centered.column_iter_mut() {
        c -= &mean;
    }
    let cov = &centered * centered.transpose() / x.ncols() as f64;
    let dev = (cov - DMatrix::identity(2, 2)).symmetric_eigenvalues().amax();
    assert!(dev <= 0.05, "operator-norm deviation {dev}");
}

#[test]
fn batches_keep_their_inlier_share() {
    let alpha = 0.3;
    let params = ModelParams::new(1, 10_000, alpha, vec![0.0]).unwrap();
    let data = generate_dataset(&params, &AdversarySpec::isotropic(100.0), 9).unwrap();
    let mut good = 0;
    for seed in 0..200 {
        let (_, views) = split_batches(&data, 4, seed).unwrap();
        let ok = views.iter().all(|v| {
            let t = v.truth().unwrap();
            t.n_inliers() as f64 / v.len() as f64 >= 0.9 * alpha
        });
        good += usize::from(ok);
    }
    assert!(good as f64 >= 0.99 * 200.0, "{good}/200 splits kept the share");
}

#[test]
fn shorth_finds_sparse_inlier_mass() {
    let tol = emest::scalar::ErrorProfileConfig::default().bound(0.3, 10_000);
    let mut good = 0;
    for trial in 0..100 {
        let mut r = rng::stream(trial, "test/shorth", 0);
        let mu: f64 = r.random_range(-50.0..50.0);
        let inl = Normal::new(mu, 1.0).unwrap();
        let out = Normal::new(mu, 1000.0).unwrap();
        let xs: Vec<f64> = (0..10_000)
            .map(|i| {
                if i < 3000 {
                    inl.sample(&mut r)
                } else {
                    out.sample(&mut r)
                }
            })
            .collect();
        let est = one_d_estimate(&xs, 0.3, &Shorth).unwrap();
        good += usize::from((est - mu).abs() <= tol);
    }
    assert!(good >= 95, "{good}/100 within {tol}");
}

#[test]
fn naive_shorth_tracks_the_oracle_in_low_dimension() {
    let adv = AdversarySpec::isotropic(1e4);
    let mut naive = Vec::new();
    let mut oracle = Vec::new();
    for trial in 0..50 {
        let mu = random_mean(trial, 4);
        let params = ModelParams::new(4, 10_000, 0.3, mu.clone()).unwrap();
        let data = generate_dataset(&params, &adv, trial).unwrap();
        let est = naive_multivariate(data.samples(), 0.3, &Shorth).unwrap();
        naive.push(l2_distance(est.as_slice(), &mu));
        let o = baseline_estimate(Baseline::OracleInlierMean, data.samples(), 0.3, &Shorth, data.truth()).unwrap();
        oracle.push(l2_distance(o.as_slice(), &mu));
    }
    let (n, o) = (median(naive), median(oracle));
    assert!(n <= 5.0 * o, "naive {n} vs oracle {o}");
}

#[test]
fn warm_start_lands_within_sqrt_d() {
    let d = 16;
    let adv = AdversarySpec::isotropic(1e4);
    let mut good = 0;
    for trial in 0..100u64 {
        let mu = random_mean(trial, d);
        let params = ModelParams::new(d, 5000, 0.3, mu.clone()).unwrap();
        let a = generate_dataset(&params, &adv, rng::derive(trial, "a", 0)).unwrap();
        let b = generate_dataset(&params, &adv, rng::derive(trial, "b", 0)).unwrap();
        let mut r = rng::stream(trial, "test/far", 0);
        let dir = DVector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal)).normalize();
        let mu = DVector::from_vec(mu);
        let current = &mu + dir * 1e6;
        // A full 5000-point tournament per trial is quadratic in shorth calls.
        let cfg = ImproveConfig {
            f_bound: emest::scalar::ErrorProfileConfig::default().bound(0.3, 5000),
            max_candidates: 256,
            ..ImproveConfig::default()
        };
        let out = tournament_improve(&current, a.samples(), b.samples(), 0.3, &Shorth, &cfg, trial).unwrap();
        good += usize::from((out - &mu).norm() <= 4.0 * (d as f64).sqrt());
    }
    assert!(good >= 90, "{good}/100 warm starts within 4 sqrt(d)");
}

#[test]
fn base_case_delegates_to_naive_estimate() {
    let d = 2;
    let params = ModelParams::new(d, 300, 0.5, vec![1.0, -1.0]).unwrap();
    let data = generate_dataset(&params, &AdversarySpec::isotropic(50.0), 4).unwrap();
    let batches = BatchPlan::new(300, 3, 1).unwrap().apply(data.samples());
    let first = batches[0].clone();
    let mut supplier = emest::recursive::SplitSupplier::from_batches(batches);
    let cfg = AlgoConfig::default();
    let ctx = RecursionContext {
        alpha: 0.5,
        n: 100,
        ambient_dim: d,
        tau: 1e-6,
        cfg: &cfg,
        est: &Shorth,
        seed: 0,
        iteration: 0,
    };
    let out = recursive_estimate(
        &DMatrix::identity(d, d),
        &mut supplier,
        &DVector::zeros(d),
        &ctx,
        &mut Vec::new(),
    )
    .unwrap();
    assert_eq!(out, naive_multivariate(&first, 0.5, &Shorth).unwrap());
}

#[test]
fn clean_data_error_matches_parametric_rate() {
    let (d, n) = (8, 100_000);
    let errs: Vec<f64> = (0..30u64)
        .map(|trial| {
            let mu = random_mean(trial, d);
            let params = ModelParams::new(d, n, 1.0, mu.clone()).unwrap();
            let data = generate_dataset(&params, &AdversarySpec::identity(), trial).unwrap();
            let rep = entangled_mean_estimation(data.samples(), 1.0, &AlgoConfig::default(), &Shorth, trial).unwrap();
            l2_distance(&rep.estimate, &mu)
        })
        .collect();
    let m = median(errs);
    let limit = 3.0 * (d as f64 / n as f64).sqrt();
    assert!(m <= limit, "median error {m} exceeds {limit}");
}

#[test]
fn error_trace_is_roughly_monotone() {
    let (d, n) = (32, 100_000);
    let adv = AdversarySpec::isotropic(1e4);
    let traces: Vec<Vec<f64>> = (0..30u64)
        .map(|trial| {
            let mu = random_mean(trial, d);
            let params = ModelParams::new(d, n, 0.3, mu.clone()).unwrap();
            let data = generate_dataset(&params, &adv, trial).unwrap();
            let mut rep =
                entangled_mean_estimation(data.samples(), 0.3, &AlgoConfig::default(), &Shorth, trial).unwrap();
            rep.attach_truth(&mu);
            let warm = l2_distance(&rep.iterates[0], &mu);
            std::iter::once(warm).chain(rep.trace.unwrap()).collect()
        })
        .collect();
    let steps = traces[0].len() - 1;
    for s in 0..steps {
        let ratio = median(traces.iter().map(|t| t[s + 1] / t[s]).collect());
        assert!(ratio <= 1.2, "step {s}: median ratio {ratio}");
    }
}

#[test]
fn one_call_halves_distance_with_large_batches() {
    let d = 32;
    let batch = 200_000;
    let adv = AdversarySpec::isotropic(1e4);
    // Each tournament comparison runs a shorth over the whole 2e5 batch, so the
    // candidate list is kept short.
    let cfg = AlgoConfig {
        max_candidates: Some(32),
        ..AlgoConfig::default()
    };
    let results: Vec<(f64, f64)> = (0..30u64)
        .map(|trial| {
            let mu = random_mean(trial, d);
            let params = ModelParams::new(d, batch, 0.3, mu.clone()).unwrap();
            let mut supplier = ModelSupplier::new(params, adv, trial).unwrap();
            let mu = DVector::from_vec(mu);
            let mut r = rng::stream(trial, "test/start", 0);
            let dir = DVector::from_fn(d, |_, _| r.sample::<f64, _>(StandardNormal)).normalize();
            let start = &mu + dir * (d as f64).sqrt();
            let ctx = RecursionContext {
                alpha: 0.3,
                n: batch,
                ambient_dim: d,
                tau: 1e-15,
                cfg: &cfg,
                est: &Shorth,
                seed: trial,
                iteration: 0,
            };
            let out =
                recursive_estimate(&DMatrix::identity(d, d), &mut supplier, &start, &ctx, &mut Vec::new()).unwrap();
            ((&start - &mu).norm(), (out - &mu).norm())
        })
        .collect();
    // Error floor: the inlier mean of one batch.
    let floor = (d as f64 / (0.3 * batch as f64)).sqrt();
    let ratio = median(results.iter().map(|(b, a)| b / a).collect());
    let after = median(results.iter().map(|&(_, a)| a).collect());
    assert!(
        ratio >= 2.0 || after <= 3.0 * floor,
        "median ratio {ratio}, median error {after}"
    );
}
