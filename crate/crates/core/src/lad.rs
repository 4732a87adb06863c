//! Least absolute deviation regression.
//!
//! `fit_lad` runs graduated iteratively-reweighted least squares: for each
//! smoothing level `δ` it minimizes the smoothed ℓ1 loss with weights
//! `1/max(|rᵢ|, δ)`, warm-starting the next level. A final vertex polish
//! re-solves exact interpolations through the rows with the smallest
//! residuals, since an ℓ1 optimum always interpolates `p` points.

use crate::error::{invalid_config, invalid_input, RegressionError, Result};
use crate::estimator::EstimatorResult;
use crate::filtering::{filter_covariates, FilterConfig};
use crate::numerics::{qr_factor, solve_weighted_least_squares, Matrix};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct LadConfig<T> {
    /// Strictly decreasing positive smoothing levels.
    pub smoothing_schedule: Vec<T>,
    pub inner_max_iters: usize,
    /// Relative change of the smoothed objective that ends a level.
    pub obj_tol: T,
}

impl<T: Scalar> Default for LadConfig<T> {
    fn default() -> Self {
        Self {
            smoothing_schedule: [1.0, 0.1, 0.01, 1e-4, 1e-6].iter().map(|&d| T::lit(d)).collect(),
            inner_max_iters: 200,
            obj_tol: T::lit(1e-10),
        }
    }
}

impl<T: Scalar> LadConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.smoothing_schedule.is_empty() {
            return invalid_config("smoothing schedule is empty");
        }
        if self.smoothing_schedule.iter().any(|&d| !(d > T::zero())) {
            return invalid_config("smoothing levels must be positive");
        }
        if self.smoothing_schedule.windows(2).any(|w| !(w[1] < w[0])) {
            return invalid_config("smoothing schedule must be strictly decreasing");
        }
        if !(self.obj_tol >= T::zero()) {
            return invalid_config("objective tolerance must be nonnegative");
        }
        Ok(())
    }
}

/// `Σᵢ |yᵢ − xᵢᵀβ|`.
pub fn l1_objective<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T]) -> T {
    x.row_iter()
        .zip(y)
        .map(|(r, &yi)| (yi - crate::numerics::dot(r, beta)).abs())
        .sum()
}

fn residuals<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T]) -> Vec<T> {
    x.row_iter()
        .zip(y)
        .map(|(r, &yi)| yi - crate::numerics::dot(r, beta))
        .collect()
}

fn smoothed_objective<T: Scalar>(r: &[T], delta: T) -> T {
    let half = T::lit(0.5);
    r.iter()
        .map(|&ri| {
            let a = ri.abs();
            if a >= delta {
                a
            } else {
                half * (a * a / delta + delta)
            }
        })
        .sum()
}

/// Per-level trace of a LAD fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LadTrace<T> {
    /// Best ℓ1 objective seen at the end of each smoothing level.
    pub stage_objectives: Vec<T>,
}

pub fn fit_lad<T: Scalar>(x: &Matrix<T>, y: &[T], cfg: &LadConfig<T>) -> Result<EstimatorResult<T>> {
    fit_lad_traced(x, y, cfg).map(|(r, _)| r)
}

/// [`fit_lad`] plus the per-level objective trace.
pub fn fit_lad_traced<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    cfg: &LadConfig<T>,
) -> Result<(EstimatorResult<T>, LadTrace<T>)> {
    cfg.validate()?;
    let (n, p) = x.shape();
    if y.len() != n {
        return invalid_input(format!("{} responses for {n} rows", y.len()));
    }
    if n < p {
        return invalid_input(format!("LAD needs n >= p, got {n} < {p}"));
    }
    let qr = qr_factor(x)?;
    qr.require_full_rank()?;

    let mut beta = qr.solve(y)?;
    let mut best_obj = l1_objective(x, y, &beta);
    let mut best = beta.clone();
    let mut iterations = 0;
    let mut converged = true;
    let mut stage_objectives = Vec::with_capacity(cfg.smoothing_schedule.len());

    for &delta in &cfg.smoothing_schedule {
        let mut r = residuals(x, y, &beta);
        let mut prev = smoothed_objective(&r, delta);
        let mut level_done = false;
        for _ in 0..cfg.inner_max_iters {
            let w: Vec<T> = r.iter().map(|&ri| T::one() / ri.abs().max(delta)).collect();
            let next = solve_weighted_least_squares(x, y, &w)?;
            iterations += 1;
            if next.iter().any(|v| !v.is_finite()) {
                return Err(RegressionError::NumericalFailure {
                    iteration: iterations,
                    reason: "non-finite IRLS iterate".into(),
                });
            }
            beta = next;
            r = residuals(x, y, &beta);
            let obj = l1_objective(x, y, &beta);
            if obj < best_obj {
                best_obj = obj;
                best.clone_from(&beta);
            }
            let h = smoothed_objective(&r, delta);
            if (prev - h).abs() <= cfg.obj_tol * (T::one() + prev.abs()) {
                level_done = true;
                break;
            }
            prev = h;
        }
        converged &= level_done;
        stage_objectives.push(best_obj);
    }

    if let Some((b, obj)) = vertex_polish(x, y, &best, best_obj) {
        best = b;
        best_obj = obj;
        if let Some(last) = stage_objectives.last_mut() {
            *last = best_obj;
        }
    }

    Ok((
        EstimatorResult {
            beta_hat: best,
            iterations,
            final_objective: best_obj,
            final_grad_norm: None,
            converged,
            nonmonotone_steps: 0,
            stalled: false,
        },
        LadTrace { stage_objectives },
    ))
}

/// Tries exact interpolations through `p`-subsets of the rows with the smallest
/// residuals at `beta`; returns an improvement if one exists.
fn vertex_polish<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], obj: T) -> Option<(Vec<T>, T)> {
    let (n, p) = x.shape();
    let r = residuals(x, y, beta);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| r[a].abs().partial_cmp(&r[b].abs()).unwrap_or(std::cmp::Ordering::Equal));
    let mut k = p;
    while k < n && binomial(k + 1, p) <= 64 {
        k += 1;
    }
    let pool = &order[..k];
    let mut best: Option<(Vec<T>, T)> = None;
    let mut best_obj = obj;
    for subset in Combinations::new(k, p) {
        let rows: Vec<usize> = subset.iter().map(|&i| pool[i]).collect();
        if let Some(b) = interpolate(x, y, &rows) {
            let o = l1_objective(x, y, &b);
            if o < best_obj {
                best_obj = o;
                best = Some((b, o));
            }
        }
    }
    best
}

/// Exact solve of `X_S β = y_S` for a square row subset; `None` when singular.
fn interpolate<T: Scalar>(x: &Matrix<T>, y: &[T], rows: &[usize]) -> Option<Vec<T>> {
    let xs = x.select_rows(rows);
    let ys: Vec<T> = rows.iter().map(|&i| y[i]).collect();
    let qr = qr_factor(&xs).ok()?;
    qr.solve(&ys).ok()
}

pub(crate) fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// Lexicographic `k`-subsets of `0..n`.
pub(crate) struct Combinations {
    n: usize,
    idx: Vec<usize>,
    first: bool,
    done: bool,
}

impl Combinations {
    pub(crate) fn new(n: usize, k: usize) -> Self {
        Self {
            n,
            idx: (0..k).collect(),
            first: true,
            done: k > n,
        }
    }
}

impl Iterator for Combinations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        if self.done {
            return None;
        }
        if self.first {
            self.first = false;
            return Some(self.idx.clone());
        }
        let k = self.idx.len();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if self.idx[i] < self.n - k + i {
                self.idx[i] += 1;
                for j in i + 1..k {
                    self.idx[j] = self.idx[j - 1] + 1;
                }
                return Some(self.idx.clone());
            }
        }
        self.done = true;
        None
    }
}

/// Brute-force ℓ1 minimizer over all interpolating vertices (`n ≤ 12`, `p ≤ 3`).
///
/// Ties keep the lexicographically first subset.
pub fn lad_vertex_oracle<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<(Vec<T>, T)> {
    let (n, p) = x.shape();
    if n > 12 || p > 3 {
        return Err(RegressionError::SizeCap(format!(
            "vertex oracle limited to n <= 12 and p <= 3, got {n}x{p}"
        )));
    }
    if y.len() != n {
        return invalid_input("response length mismatch");
    }
    if n < p || p == 0 {
        return invalid_input("vertex oracle needs 1 <= p <= n");
    }
    let mut best: Option<(Vec<T>, T)> = None;
    for rows in Combinations::new(n, p) {
        if let Some(b) = interpolate(x, y, &rows) {
            let o = l1_objective(x, y, &b);
            if best.as_ref().is_none_or(|(_, bo)| o < *bo) {
                best = Some((b, o));
            }
        }
    }
    best.ok_or(RegressionError::RankDeficient { rank: 0, cols: p })
}

/// Filter the covariates, then fit LAD on the survivors.
pub fn lad_pipeline<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    cfg: &LadConfig<T>,
    filter_cfg: &FilterConfig<T>,
) -> Result<EstimatorResult<T>> {
    if y.len() != x.rows() {
        return invalid_input("response length mismatch");
    }
    let report = filter_covariates(x, filter_cfg)?;
    let keep = &report.surviving_indices;
    let ys: Vec<T> = keep.iter().map(|&i| y[i]).collect();
    fit_lad(&x.select_rows(keep), &ys, cfg)
}
