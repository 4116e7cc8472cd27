//! Candidate selection by pairwise projected 1-d comparisons.
//!
//! For candidates `m_j`, `m_l` the samples are projected on
//! `v = (m_l - m_j) / |m_l - m_j|` and the 1-d estimator gives `e`. Candidate
//! `j` is disqualified by `l` when `|v.m_j - e| > |v.m_l - e| + 2 f`. With 1-d
//! errors at most `f`, the candidate closest to the mean always survives and
//! every survivor is within `2 min_i |m_i - mu| + 4 f` of the mean.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EmestError, Result};
use crate::model::SampleSet;
use crate::rng;
use crate::scalar::OneDEstimator;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TournamentMode {
    /// Evaluate every ordered pair and fill the whole matrix.
    Exhaustive,
    /// Stop scanning a candidate's opponents at the first disqualification.
    /// Winner and disqualification flags are identical to `Exhaustive`.
    ShortCircuit,
    /// Like `ShortCircuit`, but candidates are examined in index order and the
    /// scan stops at the first survivor. Same winner as `Exhaustive`; rows after
    /// the winner are left unevaluated.
    #[default]
    FirstSurvivor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TournamentOutcome {
    pub winner: usize,
    /// `disqualified[j]` is true iff some opponent disqualified candidate `j`.
    /// Only meaningful where `evaluated[j]` holds.
    pub disqualified: Vec<bool>,
    /// Whether candidate `j` was compared against its opponents at all.
    pub evaluated: Vec<bool>,
    /// `matrix[j][l]` is true iff `l` disqualified `j` (among evaluated pairs).
    pub matrix: Vec<Vec<bool>>,
    /// 1-d estimate along `v_{j,l}`; `None` for `j == l`, duplicates and
    /// pairs skipped by short-circuiting.
    pub estimates: Vec<Vec<Option<f64>>>,
    /// Every candidate was disqualified; the winner is the one with the
    /// smallest worst-case margin violation.
    pub no_survivor: bool,
}

impl TournamentOutcome {
    pub fn survivors(&self) -> Vec<usize> {
        (0..self.disqualified.len())
            .filter(|&j| self.evaluated[j] && !self.disqualified[j])
            .collect()
    }
}

struct Row {
    evaluated: bool,
    disqualified: bool,
    flags: Vec<bool>,
    estimates: Vec<Option<f64>>,
    worst_excess: f64,
}

/// Inner products shared by every pair: `proj[(i, j)] = <x_i, mu_j>`.
struct Projections {
    proj: DMatrix<f64>,
}

impl Projections {
    fn new(candidates: &[DVector<f64>], samples: &SampleSet) -> Self {
        let d = samples.dim();
        let cmat = DMatrix::from_fn(d, candidates.len(), |r, c| candidates[c][r]);
        Self {
            proj: samples.as_matrix().tr_mul(&cmat),
        }
    }

    /// `<x_i, (mu_l - mu_j) / norm>` for every sample, written into `buf`.
    fn along(&self, j: usize, l: usize, norm: f64, buf: &mut [f64]) {
        let pj = self.proj.column(j);
        let pl = self.proj.column(l);
        for ((b, a), c) in buf.iter_mut().zip(pl.iter()).zip(pj.iter()) {
            *b = (a - c) / norm;
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Stop {
    Never,
    FirstDisqualification,
    /// Worst excess reached this value, so the row cannot win the fallback.
    AtLeast(f64),
}

/// Compare candidate `j` against its opponents, visiting `first` before the rest.
#[allow(clippy::too_many_arguments)]
fn compare_row<E: OneDEstimator + ?Sized>(
    j: usize,
    candidates: &[DVector<f64>],
    projections: &Projections,
    alpha: f64,
    est: &E,
    f_bound: f64,
    stop: Stop,
    first: &[usize],
) -> Result<Row> {
    let k = candidates.len();
    let mut row = Row {
        evaluated: true,
        disqualified: false,
        flags: vec![false; k],
        estimates: vec![None; k],
        worst_excess: f64::NEG_INFINITY,
    };
    let mut buf = vec![0.0; projections.proj.nrows()];
    let mj = &candidates[j];
    let rest = (0..k).filter(|l| !first.contains(l));
    for l in first.iter().copied().chain(rest) {
        if l == j {
            continue;
        }
        let ml = &candidates[l];
        let diff = ml - mj;
        let norm = diff.norm();
        if norm == 0.0 {
            continue;
        }
        let v = diff / norm;
        projections.along(j, l, norm, &mut buf);
        let e = est.estimate_projected(&mut buf, &v, alpha)?;
        row.estimates[l] = Some(e);
        let excess = (v.dot(mj) - e).abs() - (v.dot(ml) - e).abs() - 2.0 * f_bound;
        row.worst_excess = row.worst_excess.max(excess);
        if excess > 0.0 {
            row.flags[l] = true;
            row.disqualified = true;
        }
        match stop {
            Stop::FirstDisqualification if row.disqualified => break,
            Stop::AtLeast(bound) if row.worst_excess >= bound => break,
            _ => {}
        }
    }
    Ok(row)
}

/// Lowest index among the rows with the smallest worst excess.
fn argmin_worst(rows: &[Row]) -> usize {
    let mut best = 0;
    for (j, r) in rows.iter().enumerate() {
        if r.worst_excess < rows[best].worst_excess {
            best = j;
        }
    }
    best
}

/// Pick a candidate close to the mean. The winner is the lowest-index survivor.
pub fn tournament_select<E: OneDEstimator + ?Sized>(
    candidates: &[DVector<f64>],
    samples: &SampleSet,
    alpha: f64,
    est: &E,
    f_bound: f64,
    mode: TournamentMode,
) -> Result<TournamentOutcome> {
    let k = candidates.len();
    if k == 0 {
        return Err(EmestError::Empty("candidate list"));
    }
    if samples.is_empty() {
        return Err(EmestError::Empty("tournament samples"));
    }
    let d = candidates[0].len();
    if let Some(bad) = candidates.iter().find(|c| c.len() != d) {
        return Err(EmestError::DimensionMismatch {
            expected: d,
            got: bad.len(),
        });
    }
    if samples.dim() != d {
        return Err(EmestError::DimensionMismatch {
            expected: d,
            got: samples.dim(),
        });
    }
    if !(f_bound >= 0.0) {
        return Err(crate::error::invalid("f_bound", "must be nonnegative"));
    }

    let projections = Projections::new(candidates, samples);
    let row_of = |j: usize, stop: Stop, first: &[usize]| {
        compare_row(j, candidates, &projections, alpha, est, f_bound, stop, first)
    };
    let chunk = rayon::current_num_threads().max(1);
    let rows: Vec<Row> = match mode {
        TournamentMode::Exhaustive => (0..k)
            .into_par_iter()
            .map(|j| row_of(j, Stop::Never, &[]))
            .collect::<Result<_>>()?,
        TournamentMode::ShortCircuit => (0..k)
            .into_par_iter()
            .map(|j| row_of(j, Stop::FirstDisqualification, &[]))
            .collect::<Result<_>>()?,
        TournamentMode::FirstSurvivor => {
            let mut rows = Vec::with_capacity(k);
            for start in (0..k).step_by(chunk) {
                let batch: Vec<Row> = (start..(start + chunk).min(k))
                    .into_par_iter()
                    .map(|j| row_of(j, Stop::FirstDisqualification, &[]))
                    .collect::<Result<_>>()?;
                let found = batch.iter().any(|r| !r.disqualified);
                rows.extend(batch);
                if found {
                    break;
                }
            }
            rows.resize_with(k, || Row {
                evaluated: false,
                disqualified: false,
                flags: vec![false; k],
                estimates: vec![None; k],
                worst_excess: f64::NEG_INFINITY,
            });
            rows
        }
    };

    let survivor = rows.iter().position(|r| r.evaluated && !r.disqualified);
    let (winner, no_survivor, rows) = match survivor {
        Some(w) => (w, false, rows),
        None if mode == TournamentMode::Exhaustive => (argmin_worst(&rows), true, rows),
        None => {
            // Smallest worst excess wins. A row is abandoned once its excess
            // reaches the best complete row so far; its known disqualifiers go first.
            let mut full: Vec<Row> = Vec::with_capacity(k);
            let mut bound = f64::INFINITY;
            for start in (0..k).step_by(chunk) {
                let batch: Vec<Row> = (start..(start + chunk).min(k))
                    .into_par_iter()
                    .map(|j| {
                        let first: Vec<usize> = (0..k).filter(|&l| rows[j].flags[l]).collect();
                        row_of(j, Stop::AtLeast(bound), &first)
                    })
                    .collect::<Result<_>>()?;
                for r in &batch {
                    bound = bound.min(r.worst_excess);
                }
                full.extend(batch);
            }
            (argmin_worst(&full), true, full)
        }
    };

    let mut out = TournamentOutcome {
        winner,
        disqualified: Vec::with_capacity(k),
        evaluated: Vec::with_capacity(k),
        matrix: Vec::with_capacity(k),
        estimates: Vec::with_capacity(k),
        no_survivor,
    };
    for r in rows {
        out.disqualified.push(r.disqualified);
        out.evaluated.push(r.evaluated);
        out.matrix.push(r.flags);
        out.estimates.push(r.estimates);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImproveConfig {
    pub f_bound: f64,
    /// Cap on the candidate list size, `current` included.
    pub max_candidates: usize,
    pub mode: TournamentMode,
}

impl Default for ImproveConfig {
    fn default() -> Self {
        Self {
            f_bound: 0.0,
            max_candidates: usize::MAX,
            mode: TournamentMode::FirstSurvivor,
        }
    }
}

/// Tournament over `{current} + batch_a`, judged on `batch_b`.
///
/// `current` sits at index 0, so it is kept whenever it survives. When
/// `batch_a` has more than `max_candidates - 1` points a uniform subsample is used.
pub fn tournament_improve<E: OneDEstimator + ?Sized>(
    current: &DVector<f64>,
    batch_a: &SampleSet,
    batch_b: &SampleSet,
    alpha: f64,
    est: &E,
    cfg: &ImproveConfig,
    seed: u64,
) -> Result<DVector<f64>> {
    if batch_a.is_empty() || batch_b.is_empty() {
        return Err(EmestError::Empty("tournament batch"));
    }
    if batch_a.dim() != current.len() {
        return Err(EmestError::DimensionMismatch {
            expected: current.len(),
            got: batch_a.dim(),
        });
    }
    let room = cfg.max_candidates.max(2) - 1;
    let picked: Vec<usize> = if batch_a.len() > room {
        let mut idx = index::sample(&mut rng::stream(seed, "tournament/candidates", 0), batch_a.len(), room).into_vec();
        idx.sort_unstable();
        idx
    } else {
        (0..batch_a.len()).collect()
    };
    let mut candidates = Vec::with_capacity(picked.len() + 1);
    candidates.push(current.clone());
    candidates.extend(picked.iter().map(|&i| batch_a.sample(i).into_owned()));
    let outcome = tournament_select(&candidates, batch_b, alpha, est, cfg.f_bound, cfg.mode)?;
    Ok(candidates.swap_remove(outcome.winner))
}
