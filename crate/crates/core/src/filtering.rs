//! Spectral covariate filtering.
//!
//! Each round computes the top eigenvector `v` of the second-moment matrix of
//! the surviving points, scores every survivor by `(vᵀx̃)²` and removes the
//! single highest-scoring point (smallest index on ties).

use crate::error::{invalid_config, invalid_input, Result};
use crate::numerics::{default_start, power_iteration, power_iteration_from, Eigenpair, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterMode {
    /// Remove exactly `budget` points.
    RemoveExactly,
    /// Stop as soon as the top eigenvalue drops to `spectral_threshold`.
    StopEarly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Centering {
    /// Use raw second moments (covariates have mean zero).
    ZeroMean,
    /// Subtract the mean of the current survivors every round.
    Recenter,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterConfig<T> {
    pub budget: usize,
    pub mode: FilterMode,
    pub spectral_threshold: T,
    pub center: Centering,
    pub power_tol: T,
    pub power_max_iters: usize,
}

impl<T: Scalar> FilterConfig<T> {
    pub fn remove(budget: usize) -> Self {
        Self {
            budget,
            mode: FilterMode::RemoveExactly,
            spectral_threshold: T::lit(1.5),
            center: Centering::ZeroMean,
            power_tol: T::lit(1e-8),
            power_max_iters: 2_000,
        }
    }

    pub fn none() -> Self {
        Self::remove(0)
    }

    pub fn with_mode(mut self, mode: FilterMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_center(mut self, center: Centering) -> Self {
        self.center = center;
        self
    }

    pub fn with_threshold(mut self, threshold: T) -> Self {
        self.spectral_threshold = threshold;
        self
    }

    /// Checks the config against a point set of size `n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if 2 * self.budget >= n && self.budget > 0 {
            return invalid_config(format!(
                "filter budget {} must be below half of {} points",
                self.budget, n
            ));
        }
        if !(self.spectral_threshold > T::zero()) {
            return invalid_config("spectral threshold must be positive");
        }
        if !(self.power_tol > T::zero()) {
            return invalid_config("power-iteration tolerance must be positive");
        }
        Ok(())
    }
}

impl<T: Scalar> Default for FilterConfig<T> {
    fn default() -> Self {
        Self::none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Removal<T> {
    pub index: usize,
    pub score: T,
    pub top_eigenvalue: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FilterReport<T> {
    /// Ascending.
    pub surviving_indices: Vec<usize>,
    pub removal_trace: Vec<Removal<T>>,
    /// Top eigenvalue of the survivors after the last round.
    pub final_top_eigenvalue: T,
    /// Rounds whose power iteration missed its tolerance.
    pub unconverged_rounds: usize,
}

impl<T> FilterReport<T> {
    pub fn removed_indices(&self) -> Vec<usize> {
        self.removal_trace.iter().map(|r| r.index).collect()
    }
}

/// Per-point projections onto the top eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct OutlierScores<T> {
    /// Aligned with the `indices` argument.
    pub scores: Vec<T>,
    pub top_eigenvalue: T,
    pub top_eigenvector: Vec<T>,
    pub converged: bool,
}

fn center_of<T: Scalar>(points: &Matrix<T>, indices: &[usize], center: Centering) -> Vec<T> {
    match center {
        Centering::ZeroMean => vec![T::zero(); points.cols()],
        Centering::Recenter => crate::numerics::mean_rows(points, indices),
    }
}

/// `(1/|S|) Σ_{i∈S} x̃ᵢx̃ᵢᵀ`, with `x̃ᵢ = xᵢ − mean(S)` when recentering.
pub fn second_moment_matrix<T: Scalar>(
    points: &Matrix<T>,
    indices: &[usize],
    center: Centering,
) -> Result<Matrix<T>> {
    if indices.is_empty() {
        return invalid_input("second moment over an empty index set");
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= points.rows()) {
        return invalid_input(format!("index {bad} out of range for {} points", points.rows()));
    }
    let mu = center_of(points, indices, center);
    Ok(second_moment_about(points, indices, &mu))
}

fn second_moment_about<T: Scalar>(points: &Matrix<T>, indices: &[usize], mu: &[T]) -> Matrix<T> {
    let p = points.cols();
    let mut acc = vec![T::zero(); p * p];
    let mut dev = vec![T::zero(); p];
    for &i in indices {
        for ((d, &x), &m) in dev.iter_mut().zip(points.row(i)).zip(mu) {
            *d = x - m;
        }
        for a in 0..p {
            let da = dev[a];
            if da == T::zero() {
                continue;
            }
            let row = &mut acc[a * p..(a + 1) * p];
            for b in a..p {
                row[b] += da * dev[b];
            }
        }
    }
    let inv = T::one() / T::from_count(indices.len());
    acc.iter_mut().for_each(|v| *v *= inv);
    let mut m = Matrix::new(p, p, acc).expect("finite second moments");
    m.symmetrize_upper();
    m
}

/// Scores `(vᵀx̃ᵢ)²` along the top eigenvector of the second-moment matrix.
pub fn outlier_scores<T: Scalar>(
    points: &Matrix<T>,
    indices: &[usize],
    center: Centering,
) -> Result<OutlierScores<T>> {
    let cfg = FilterConfig::<T>::none();
    scores_with_start(points, indices, center, None, cfg.power_tol, cfg.power_max_iters)
}

fn scores_with_start<T: Scalar>(
    points: &Matrix<T>,
    indices: &[usize],
    center: Centering,
    start: Option<&[T]>,
    tol: T,
    max_iters: usize,
) -> Result<OutlierScores<T>> {
    if indices.is_empty() {
        return invalid_input("outlier scores over an empty index set");
    }
    let mu = center_of(points, indices, center);
    let m = second_moment_about(points, indices, &mu);
    let Eigenpair { value, vector, converged, .. } = match start {
        Some(v) => power_iteration_from(&m, v, tol, max_iters)?,
        None => power_iteration(&m, tol, max_iters)?,
    };
    let scores = indices
        .iter()
        .map(|&i| {
            let proj = points
                .row(i)
                .iter()
                .zip(&mu)
                .zip(&vector)
                .fold(T::zero(), |acc, ((&x, &c), &v)| acc + (x - c) * v);
            proj * proj
        })
        .collect();
    Ok(OutlierScores {
        scores,
        top_eigenvalue: value,
        top_eigenvector: vector,
        converged,
    })
}

/// Removes up to `cfg.budget` points, one per round, by maximal outlier score.
///
/// The previous round's eigenvector warm-starts the next power iteration.
pub fn filter_covariates<T: Scalar>(points: &Matrix<T>, cfg: &FilterConfig<T>) -> Result<FilterReport<T>> {
    let n = points.rows();
    cfg.validate(n)?;
    if n == 0 {
        return invalid_input("cannot filter an empty point set");
    }
    let mut alive: Vec<usize> = (0..n).collect();
    let mut trace = Vec::with_capacity(cfg.budget);
    let mut unconverged = 0;
    let mut start: Option<Vec<T>> = None;

    if cfg.budget == 0 && cfg.mode == FilterMode::RemoveExactly {
        let s = scores_with_start(points, &alive, cfg.center, start.as_deref(), cfg.power_tol, cfg.power_max_iters)?;
        return Ok(FilterReport {
            surviving_indices: alive,
            removal_trace: trace,
            final_top_eigenvalue: s.top_eigenvalue,
            unconverged_rounds: usize::from(!s.converged),
        });
    }

    loop {
        let s = scores_with_start(points, &alive, cfg.center, start.as_deref(), cfg.power_tol, cfg.power_max_iters)?;
        if !s.converged {
            unconverged += 1;
        }
        let stop = trace.len() >= cfg.budget
            || (cfg.mode == FilterMode::StopEarly && s.top_eigenvalue <= cfg.spectral_threshold);
        if stop {
            return Ok(FilterReport {
                surviving_indices: alive,
                removal_trace: trace,
                final_top_eigenvalue: s.top_eigenvalue,
                unconverged_rounds: unconverged,
            });
        }
        // `alive` is ascending, so a strict comparison keeps the smallest index on ties.
        let mut best = 0;
        for (pos, &sc) in s.scores.iter().enumerate() {
            if sc > s.scores[best] {
                best = pos;
            }
        }
        let index = alive.remove(best);
        trace.push(Removal {
            index,
            score: s.scores[best],
            top_eigenvalue: s.top_eigenvalue,
        });
        // Nudge the warm start so it is never an exact non-dominant eigenvector
        // of the next round's matrix.
        let nudge = default_start::<T>(points.cols());
        start = Some(
            s.top_eigenvector
                .iter()
                .zip(&nudge)
                .map(|(&v, &d)| v + T::lit(1e-2) * d)
                .collect(),
        );
    }
}
