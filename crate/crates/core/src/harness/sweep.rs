//! Benchmark sweeps over `(D, N, alpha, adversary)` grids.
//!
//! Every cell gets a seed derived only from the root seed and its own
//! coordinates, so any cell can be regenerated in isolation. Cells run on a
//! rayon pool; rows are sorted before the CSV is written.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;

use super::config::{EstimatorKind, SweepConfig};
use super::{thread_cap, HarnessError};
use crate::model::{generate_dataset, AdversarySpec, Dataset, ModelParams};
use crate::recursive::{baseline_estimate, entangled_mean_estimation, l2_distance, AlgoConfig, EstimateReport};
use crate::rng;
use crate::scalar::Shorth;

pub const CSV_HEADER: &str = "D,N,alpha,adversary,estimator,trial,seed,l2_error,ms,notes";

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub dim: usize,
    pub n: usize,
    pub alpha: f64,
    pub adversary: String,
    pub estimator: String,
    pub trial: usize,
    pub seed: u64,
    /// `None` for failed runs, written as `nan`.
    pub l2_error: Option<f64>,
    pub ms: f64,
    pub notes: String,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        let err = self.l2_error.map_or_else(|| "nan".to_string(), |e| format!("{e}"));
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.dim,
            self.n,
            self.alpha,
            self.adversary,
            self.estimator,
            self.trial,
            self.seed,
            err,
            self.ms,
            self.notes
        )
    }

    fn sort_key(&self) -> (usize, usize, u64, &str, &str, usize) {
        (
            self.dim,
            self.n,
            self.alpha.to_bits(),
            self.adversary.as_str(),
            self.estimator.as_str(),
            self.trial,
        )
    }
}

/// One grid point plus trial index.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub dim: usize,
    pub n: usize,
    pub alpha: f64,
    pub adversary: String,
    pub trial: usize,
}

impl Cell {
    /// Stable seed: SplitMix64 of the FNV-1a hash of `root|D|N|alpha|adversary|trial`.
    pub fn seed(&self, root: u64) -> u64 {
        let key = format!(
            "{root}|{}|{}|{}|{}|{}",
            self.dim, self.n, self.alpha, self.adversary, self.trial
        );
        rng::mix64(rng::fnv1a(key.as_bytes()))
    }
}

pub fn cells(cfg: &SweepConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &dim in &cfg.dims {
        for &n in &cfg.ns {
            for &alpha in &cfg.alphas {
                for adversary in &cfg.adversaries {
                    for trial in 0..cfg.trials {
                        out.push(Cell {
                            dim,
                            n,
                            alpha,
                            adversary: adversary.clone(),
                            trial,
                        });
                    }
                }
            }
        }
    }
    out
}

fn cell_dataset(cell: &Cell, seed: u64, mean_scale: f64) -> Result<Dataset, HarnessError> {
    let mut mrng = rng::stream(seed, "sweep/mean", 0);
    let mean = (0..cell.dim)
        .map(|_| mrng.random_range(-mean_scale..=mean_scale))
        .collect();
    let params = ModelParams::new(cell.dim, cell.n, cell.alpha, mean)?;
    let adversary: AdversarySpec = cell.adversary.parse()?;
    Ok(generate_dataset(
        &params,
        &adversary,
        rng::derive(seed, "sweep/data", 0),
    )?)
}

fn entangled_notes(report: &EstimateReport) -> String {
    let splits: Vec<_> = report.recursion_log.iter().filter(|l| l.accepted.is_some()).collect();
    let rate = if splits.is_empty() {
        f64::NAN
    } else {
        splits
            .iter()
            .map(|l| l.accepted.unwrap_or(0) as f64 / l.batch_size.max(1) as f64)
            .sum::<f64>()
            / splits.len() as f64
    };
    let mut notes = format!("depth={};accept={rate:.4}", report.max_depth());
    if report.early_return {
        notes.push_str(";early_return");
    }
    notes
}

/// All rows of one cell, one per estimator.
pub fn run_cell(cell: &Cell, cfg: &SweepConfig, algo: &AlgoConfig) -> Vec<ResultRow> {
    let seed = cell.seed(cfg.root_seed);
    let row = |estimator: &str, l2_error: Option<f64>, ms: f64, notes: String| ResultRow {
        dim: cell.dim,
        n: cell.n,
        alpha: cell.alpha,
        adversary: cell.adversary.clone(),
        estimator: estimator.to_string(),
        trial: cell.trial,
        seed,
        l2_error,
        ms: if cfg.timing { (ms * 1e3).round() / 1e3 } else { 0.0 },
        notes,
    };
    let kinds = cfg.estimator_kinds();
    let data = match cell_dataset(cell, seed, cfg.mean_scale) {
        Ok(d) => d,
        Err(e) => {
            return kinds
                .iter()
                .map(|k| row(k.name(), None, 0.0, format!("failed:{}", e.code)))
                .collect()
        }
    };
    let truth = data.truth().expect("generated data carries truth");
    kinds
        .iter()
        .map(|&kind| {
            let started = Instant::now();
            let result = match kind {
                EstimatorKind::Entangled => entangled_mean_estimation(
                    data.samples(),
                    cell.alpha,
                    algo,
                    &Shorth,
                    rng::derive(seed, "sweep/estimate", 0),
                )
                .map(|r| (r.estimate.clone(), entangled_notes(&r))),
                EstimatorKind::Baseline(b) => baseline_estimate(b, data.samples(), cell.alpha, &Shorth, Some(truth))
                    .map(|v| (v.as_slice().to_vec(), String::new())),
            };
            let ms = started.elapsed().as_secs_f64() * 1e3;
            match result {
                Ok((est, notes)) => {
                    let err = l2_distance(&est, truth.mean.as_slice());
                    if err.is_finite() {
                        row(kind.name(), Some(err), ms, notes)
                    } else {
                        row(kind.name(), None, ms, format!("failed:{}", super::EXIT_NUMERICAL))
                    }
                }
                Err(e) => row(kind.name(), None, ms, format!("failed:{}", HarnessError::from(e).code)),
            }
        })
        .collect()
}

/// Run every cell and return the rows in sorted order.
pub fn run_rows(cfg: &SweepConfig) -> Result<Vec<ResultRow>, HarnessError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::io(format!("cannot start worker pool: {e}")))?;
    let cells = cells(cfg);
    let mut rows: Vec<ResultRow> = pool.install(|| {
        cells
            .par_iter()
            .flat_map_iter(|c| run_cell(c, cfg, &cfg.algo))
            .collect()
    });
    rows.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    Ok(rows)
}

pub fn to_csv(rows: &[ResultRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

/// Run the sweep at `path` and write the CSV to the configured output (or
/// `out_override`). Returns the CSV text and the path written, if any.
pub fn run_sweep(path: &Path, out_override: Option<&Path>) -> Result<(String, Option<PathBuf>), HarnessError> {
    let cfg = SweepConfig::load(path)?;
    let csv = to_csv(&run_rows(&cfg)?);
    let out = out_override.map(Path::to_path_buf).or_else(|| {
        cfg.out.as_ref().map(|o| match path.parent() {
            Some(dir) if o.is_relative() => dir.join(o),
            _ => o.clone(),
        })
    });
    if let Some(out) = &out {
        std::fs::write(out, &csv).map_err(|e| HarnessError::io(format!("{}: {e}", out.display())))?;
    }
    Ok((csv, out))
}

/// Median of the finite errors for one estimator at one `(D, N, alpha, adversary)`.
pub fn median_error(rows: &[ResultRow], estimator: &str, n: usize) -> Option<f64> {
    let mut errs: Vec<f64> = rows
        .iter()
        .filter(|r| r.estimator == estimator && r.n == n)
        .filter_map(|r| r.l2_error)
        .collect();
    if errs.is_empty() {
        return None;
    }
    errs.sort_by(f64::total_cmp);
    let k = errs.len();
    Some(if k % 2 == 1 {
        errs[k / 2]
    } else {
        (errs[k / 2 - 1] + errs[k / 2]) / 2.0
    })
}
