//! Least trimmed squares by alternating minimization with hard thresholding.
//!
//! The iteration tracks a sparse corruption estimate `b`:
//! `b ← HT_m(P_X b + (I − P_X) y)`, then `β̂ = argmin ‖Xβ − (y − b)‖₂`.
//! The projection `P_X` is applied through a reused QR factorization.

use crate::error::{invalid_config, invalid_input, Result};
use crate::estimator::EstimatorResult;
use crate::filtering::{filter_covariates, FilterConfig};
use crate::lad::{fit_lad, LadConfig};
use crate::numerics::{dot, norm2, power_iteration, qr_factor, Matrix, QrFactor};
use crate::scalar::Scalar;
use std::cmp::Ordering;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtsInit {
    /// `b⁰ = 0`.
    Zero,
    /// `b⁰ = HT_m(y − Xβ̂_LAD)`.
    Lad,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtsConfig<T> {
    /// Trimming parameter: number of responses treated as corrupted.
    pub m: usize,
    pub max_iters: usize,
    /// Stop once `‖bʲ − bʲ⁻¹‖₂ ≤ stop_tol_alpha·√n`; zero disables the rule.
    pub stop_tol_alpha: T,
    pub init: LtsInit,
}

impl<T: Scalar> LtsConfig<T> {
    pub fn new(m: usize) -> Self {
        Self {
            m,
            max_iters: 100,
            stop_tol_alpha: T::zero(),
            init: LtsInit::Zero,
        }
    }

    pub fn with_max_iters(mut self, iters: usize) -> Self {
        self.max_iters = iters;
        self
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.m >= n {
            return invalid_config(format!("trimming parameter m = {} must be below n = {n}", self.m));
        }
        if !(self.stop_tol_alpha >= T::zero()) {
            return invalid_config("stopping tolerance must be nonnegative");
        }
        Ok(())
    }
}

/// Keeps the `m` largest-magnitude entries (smaller index wins ties), zeroes the rest.
pub fn hard_threshold<T: Scalar>(v: &[T], m: usize) -> Result<Vec<T>> {
    if m > v.len() {
        return invalid_input(format!("hard threshold level {m} exceeds length {}", v.len()));
    }
    let mut out = vec![T::zero(); v.len()];
    if m == 0 {
        return Ok(out);
    }
    let mut order: Vec<usize> = (0..v.len()).collect();
    // Stable sort keeps ascending index order among equal magnitudes.
    order.sort_by(|&a, &b| v[b].abs().partial_cmp(&v[a].abs()).unwrap_or(Ordering::Equal));
    for &i in &order[..m] {
        out[i] = v[i];
    }
    Ok(out)
}

fn step_with<T: Scalar>(qr: &QrFactor<T>, resid_y: &[T], b_prev: &[T], m: usize) -> Result<Vec<T>> {
    let pb = qr.project(b_prev);
    let v: Vec<T> = pb.iter().zip(resid_y).map(|(&a, &r)| a + r).collect();
    hard_threshold(&v, m)
}

/// One update `HT_m(P_X b + (I − P_X) y)`.
pub fn lts_step<T: Scalar>(x: &Matrix<T>, y: &[T], b_prev: &[T], m: usize) -> Result<Vec<T>> {
    let n = x.rows();
    if y.len() != n || b_prev.len() != n {
        return invalid_input("lts_step: length mismatch");
    }
    let qr = qr_factor(x)?;
    qr.require_full_rank()?;
    let py = qr.project(y);
    let resid_y: Vec<T> = y.iter().zip(&py).map(|(&a, &b)| a - b).collect();
    step_with(&qr, &resid_y, b_prev, m)
}

/// Sum of the `n − m` smallest squared residuals.
pub fn trimmed_objective<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], m: usize) -> T {
    let mut sq: Vec<T> = x
        .row_iter()
        .zip(y)
        .map(|(r, &yi)| {
            let e = yi - dot(r, beta);
            e * e
        })
        .collect();
    sq.sort_by(|a, b| a.partial_cmp(b).unwrap_or(Ordering::Equal));
    sq[..sq.len().saturating_sub(m)].iter().copied().sum()
}

pub fn fit_lts<T: Scalar>(x: &Matrix<T>, y: &[T], cfg: &LtsConfig<T>) -> Result<EstimatorResult<T>> {
    let n = x.rows();
    if y.len() != n {
        return invalid_input(format!("{} responses for {n} rows", y.len()));
    }
    cfg.validate(n)?;
    let qr = qr_factor(x)?;
    qr.require_full_rank()?;
    let py = qr.project(y);
    let resid_y: Vec<T> = y.iter().zip(&py).map(|(&a, &b)| a - b).collect();

    let mut b = match cfg.init {
        LtsInit::Zero => vec![T::zero(); n],
        LtsInit::Lad => {
            let beta = fit_lad(x, y, &LadConfig::default())?.beta_hat;
            let r: Vec<T> = x.row_iter().zip(y).map(|(row, &yi)| yi - dot(row, &beta)).collect();
            hard_threshold(&r, cfg.m)?
        }
    };
    let stop = cfg.stop_tol_alpha * T::from_count(n).sqrt();
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..cfg.max_iters {
        let next = step_with(&qr, &resid_y, &b, cfg.m)?;
        let diff = norm2(&next.iter().zip(&b).map(|(&a, &c)| a - c).collect::<Vec<_>>());
        b = next;
        iterations += 1;
        if cfg.stop_tol_alpha > T::zero() && diff <= stop {
            converged = true;
            break;
        }
        if diff <= T::epsilon() * (T::one() + norm2(&b)) {
            // Fixed point reached; further rounds reproduce `b`.
            converged = true;
            break;
        }
    }
    let target: Vec<T> = y.iter().zip(&b).map(|(&a, &c)| a - c).collect();
    let beta = qr.solve(&target)?;
    let objective = trimmed_objective(x, y, &beta, cfg.m);
    Ok(EstimatorResult {
        beta_hat: beta,
        iterations,
        final_objective: objective,
        final_grad_norm: None,
        converged,
        nonmonotone_steps: 0,
        stalled: false,
    })
}

/// Iteration count `⌈log₂(‖y‖₂(1 + ‖X‖₂)/α)⌉` that suffices for target error `α`,
/// with `‖X‖₂` from power iteration on `XᵀX`.
pub fn lts_iteration_bound<T: Scalar>(x: &Matrix<T>, y: &[T], alpha: T) -> Result<usize> {
    if !(alpha > T::zero()) {
        return invalid_config("target error must be positive");
    }
    if y.len() != x.rows() {
        return invalid_input("response length mismatch");
    }
    let top = power_iteration(&x.gram(), T::lit(1e-10), 10_000)?;
    let xnorm = top.value.max(T::zero()).sqrt();
    let ratio = norm2(y) * (T::one() + xnorm) / alpha;
    if ratio <= T::one() {
        return Ok(0);
    }
    Ok(ratio.log2().ceil().to_usize().unwrap_or(usize::MAX))
}

/// Filter the covariates, then run LTS on the survivors with the same `m`.
pub fn lts_pipeline<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    cfg: &LtsConfig<T>,
    filter_cfg: &FilterConfig<T>,
) -> Result<EstimatorResult<T>> {
    if y.len() != x.rows() {
        return invalid_input("response length mismatch");
    }
    let report = filter_covariates(x, filter_cfg)?;
    let keep = &report.surviving_indices;
    let ys: Vec<T> = keep.iter().map(|&i| y[i]).collect();
    fit_lts(&x.select_rows(keep), &ys, cfg)
}
