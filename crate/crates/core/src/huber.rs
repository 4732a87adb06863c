//! Huber regression: loss, gradient-descent fitting, pairwise symmetrization,
//! data-driven choice of the transition point and the filtered pipeline.

use crate::error::{invalid_config, invalid_input, RegressionError, Result};
use crate::estimator::EstimatorResult;
use crate::filtering::{filter_covariates, FilterConfig};
use crate::lad::{fit_lad, LadConfig};
use crate::numerics::{dot, empirical_quantile, norm2, qr_factor, Matrix};
use crate::scalar::Scalar;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Floor applied to an estimated transition point that comes out as zero.
pub const GAMMA_MIN: f64 = 1e-8;

#[inline]
fn loss_psi<T: Scalar>(r: T, gamma: T) -> (T, T) {
    if r.abs() <= gamma {
        (T::lit(0.5) * r * r, r)
    } else {
        (gamma * r.abs() - T::lit(0.5) * gamma * gamma, gamma * r.signum())
    }
}

/// Huber loss `ℓ_γ(x)` and its derivative `ψ_γ(x)`.
pub fn huber_loss_and_grad<T: Scalar>(x: T, gamma: T) -> Result<(T, T)> {
    if !(gamma > T::zero()) {
        return invalid_config(format!("Huber gamma must be positive, got {gamma}"));
    }
    Ok(loss_psi(x, gamma))
}

/// Objective `(1/n)Σℓ_γ(yᵢ − xᵢᵀβ)` and gradient `−(1/n)Σψ_γ(yᵢ − xᵢᵀβ)xᵢ`.
pub fn huber_objective_grad<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    beta: &[T],
    gamma: T,
) -> Result<(T, Vec<T>)> {
    if y.len() != x.rows() || beta.len() != x.cols() {
        return invalid_input(format!(
            "shape mismatch: X is {}x{}, y has {}, beta has {}",
            x.rows(),
            x.cols(),
            y.len(),
            beta.len()
        ));
    }
    if !(gamma > T::zero()) {
        return invalid_config(format!("Huber gamma must be positive, got {gamma}"));
    }
    Ok(objective_grad_unchecked(x, y, beta, gamma))
}

fn objective_grad_unchecked<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], gamma: T) -> (T, Vec<T>) {
    let mut obj = T::zero();
    let mut grad = vec![T::zero(); x.cols()];
    for (row, &yi) in x.row_iter().zip(y) {
        let (l, psi) = loss_psi(yi - dot(row, beta), gamma);
        obj += l;
        if psi != T::zero() {
            for (g, &xij) in grad.iter_mut().zip(row) {
                *g -= psi * xij;
            }
        }
    }
    let inv = T::one() / T::from_count(x.rows().max(1));
    grad.iter_mut().for_each(|g| *g *= inv);
    (obj * inv, grad)
}

fn objective_unchecked<T: Scalar>(x: &Matrix<T>, y: &[T], beta: &[T], gamma: T) -> T {
    let s: T = x
        .row_iter()
        .zip(y)
        .map(|(row, &yi)| loss_psi(yi - dot(row, beta), gamma).0)
        .sum();
    s / T::from_count(x.rows().max(1))
}

#[derive(Debug, Clone, PartialEq)]
pub enum HuberInit<T> {
    Zero,
    Given(Vec<T>),
    /// Warm start from the LAD fit of the same data.
    Lad,
}

/// How the first trial step of each backtracking search is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRule {
    /// Always start from `initial_step`.
    Fixed,
    /// Start from the Barzilai–Borwein step `sᵀs / sᵀ(∇f₁ − ∇f₀)` of the previous move.
    BarzilaiBorwein,
}

/// Metric for the descent direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preconditioner {
    /// Plain gradient steps `−∇L`.
    Identity,
    /// Steps `−(XᵀX/n)⁻¹∇L`, i.e. the least-squares fit of the clipped
    /// residuals. `XᵀX/n` bounds the Hessian, so the unit step always passes
    /// the Armijo test. Falls back to `Identity` on rank-deficient designs.
    Gram,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearch<T> {
    pub shrink: T,
    pub sufficient_decrease: T,
    pub initial_step: T,
    pub rule: StepRule,
}

impl<T: Scalar> Default for LineSearch<T> {
    fn default() -> Self {
        Self {
            shrink: T::lit(0.5),
            sufficient_decrease: T::lit(1e-4),
            initial_step: T::one(),
            rule: StepRule::BarzilaiBorwein,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HuberConfig<T> {
    pub gamma: T,
    pub max_iters: usize,
    /// `None` selects `1e-8·(1 + ‖∇L(β₀)‖₂)`.
    pub grad_tol: Option<T>,
    pub init: HuberInit<T>,
    pub line_search: LineSearch<T>,
    pub preconditioner: Preconditioner,
}

impl<T: Scalar> HuberConfig<T> {
    pub fn new(gamma: T) -> Self {
        Self {
            gamma,
            max_iters: 10_000,
            grad_tol: None,
            init: HuberInit::Zero,
            line_search: LineSearch::default(),
            preconditioner: Preconditioner::Gram,
        }
    }

    pub fn with_init(mut self, init: HuberInit<T>) -> Self {
        self.init = init;
        self
    }

    pub fn with_preconditioner(mut self, preconditioner: Preconditioner) -> Self {
        self.preconditioner = preconditioner;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > T::zero()) {
            return invalid_config(format!("Huber gamma must be positive, got {}", self.gamma));
        }
        if let Some(t) = self.grad_tol {
            if !(t > T::zero()) {
                return invalid_config("gradient tolerance must be positive");
            }
        }
        let ls = &self.line_search;
        if !(ls.shrink > T::zero() && ls.shrink < T::one()) {
            return invalid_config("line-search shrink factor must lie in (0, 1)");
        }
        if !(ls.sufficient_decrease > T::zero() && ls.sufficient_decrease < T::one()) {
            return invalid_config("sufficient-decrease constant must lie in (0, 1)");
        }
        if !(ls.initial_step > T::zero()) {
            return invalid_config("initial step must be positive");
        }
        Ok(())
    }
}

/// Descent with Armijo backtracking on the Huber objective.
///
/// The first trial step is `1` for the Gram preconditioner and follows
/// `line_search.rule` for plain gradient steps.
pub fn fit_huber<T: Scalar>(x: &Matrix<T>, y: &[T], cfg: &HuberConfig<T>) -> Result<EstimatorResult<T>> {
    cfg.validate()?;
    let (n, p) = x.shape();
    if n == 0 {
        return invalid_input("Huber regression needs at least one row");
    }
    if y.len() != n {
        return invalid_input(format!("{} responses for {n} rows", y.len()));
    }
    let gamma = cfg.gamma;
    let mut beta = match &cfg.init {
        HuberInit::Zero => vec![T::zero(); p],
        HuberInit::Given(b) => {
            if b.len() != p {
                return invalid_input("initial coefficient vector has the wrong length");
            }
            b.clone()
        }
        HuberInit::Lad => fit_lad(x, y, &LadConfig::default())?.beta_hat,
    };
    let (mut f, mut g) = objective_grad_unchecked(x, y, &beta, gamma);
    if !f.is_finite() {
        return Err(RegressionError::NumericalFailure {
            iteration: 0,
            reason: "non-finite Huber objective at the initial point".into(),
        });
    }
    let mut gnorm = norm2(&g);
    let tol = cfg.grad_tol.unwrap_or_else(|| T::lit(1e-8) * (T::one() + gnorm));
    let ls = cfg.line_search;
    let mut prev_move: Option<(Vec<T>, Vec<T>)> = None;
    let mut iterations = 0;
    let mut nonmonotone = 0;
    let mut stalled = false;
    let tiny = T::epsilon() * T::epsilon();

    let qr = match cfg.preconditioner {
        Preconditioner::Gram => qr_factor(x).ok().filter(|q| q.is_full_rank()),
        Preconditioner::Identity => None,
    };

    while gnorm > tol && iterations < cfg.max_iters {
        // Descent direction `dir` and the slope `∇Lᵀdir < 0`.
        let (dir, slope) = match &qr {
            Some(q) => {
                let psi: Vec<T> = x
                    .row_iter()
                    .zip(y)
                    .map(|(row, &yi)| loss_psi(yi - dot(row, &beta), gamma).1)
                    .collect();
                let d = q.solve(&psi)?;
                let slope = dot(&g, &d);
                if !(slope < T::zero()) {
                    break;
                }
                (d, slope)
            }
            None => (g.iter().map(|&v| -v).collect::<Vec<T>>(), -gnorm * gnorm),
        };
        let mut t = match (ls.rule, &prev_move) {
            _ if qr.is_some() => T::one(),
            (StepRule::BarzilaiBorwein, Some((s, d))) => {
                let sd = dot(s, d);
                if sd > T::zero() {
                    dot(s, s) / sd
                } else {
                    ls.initial_step
                }
            }
            _ => ls.initial_step,
        };
        let mut accepted = None;
        if t * -slope <= T::lit(4.0) * T::epsilon() * f.abs() {
            // The decrease is below the rounding of f: take the full step only
            // if f does not rise and the gradient shrinks.
            let cand: Vec<T> = beta.iter().zip(&dir).map(|(&b, &di)| b + t * di).collect();
            let (fc, gc) = objective_grad_unchecked(x, y, &cand, gamma);
            if !(fc <= f && norm2(&gc) < gnorm) {
                stalled = true;
                break;
            }
            accepted = Some((cand, fc));
        }
        for _ in 0..200 {
            if accepted.is_some() {
                break;
            }
            let cand: Vec<T> = beta.iter().zip(&dir).map(|(&b, &di)| b + t * di).collect();
            let fc = objective_unchecked(x, y, &cand, gamma);
            if fc.is_finite() && fc <= f + ls.sufficient_decrease * t * slope {
                accepted = Some((cand, fc));
                break;
            }
            t *= ls.shrink;
            if t < tiny {
                break;
            }
        }
        let Some((cand, fc)) = accepted else {
            stalled = true;
            break;
        };
        iterations += 1;
        if fc > f {
            nonmonotone += 1;
        }
        let (_, gc) = objective_grad_unchecked(x, y, &cand, gamma);
        let s: Vec<T> = cand.iter().zip(&beta).map(|(&a, &b)| a - b).collect();
        let d: Vec<T> = gc.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        prev_move = Some((s, d));
        beta = cand;
        f = fc;
        g = gc;
        gnorm = norm2(&g);
        if !f.is_finite() || !gnorm.is_finite() {
            return Err(RegressionError::NumericalFailure {
                iteration: iterations,
                reason: "non-finite Huber objective".into(),
            });
        }
    }

    Ok(EstimatorResult {
        beta_hat: beta,
        iterations,
        final_objective: f,
        final_grad_norm: Some(gnorm),
        converged: gnorm <= tol,
        nonmonotone_steps: nonmonotone,
        stalled,
    })
}

/// Pairs row `i` with row `n + i`: `((xᵢ − x_{n+i})/√2, (yᵢ − y_{n+i})/√2)`.
pub fn symmetrize_pairs<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<(Matrix<T>, Vec<T>)> {
    let rows = x.rows();
    if y.len() != rows {
        return invalid_input("response length mismatch");
    }
    if !rows.is_multiple_of(2) {
        return invalid_input(format!("symmetrization needs an even row count, got {rows}"));
    }
    let half = rows / 2;
    let s = T::lit(std::f64::consts::FRAC_1_SQRT_2);
    let xs = Matrix::from_fn(half, x.cols(), |i, j| (x[(i, j)] - x[(half + i, j)]) * s);
    let ys = (0..half).map(|i| (y[i] - y[half + i]) * s).collect();
    Ok((xs, ys))
}

/// Final step of the transition-point estimate: twice the `(1 − c*/4)` empirical
/// quantile of the symmetrized residual magnitudes.
pub fn gamma_from_residuals<T: Scalar>(abs_residuals: &[T], c_star: f64) -> Result<T> {
    if !(c_star > 0.0 && c_star < 1.0) {
        return invalid_config(format!("c* must lie in (0, 1), got {c_star}"));
    }
    Ok(T::lit(2.0) * empirical_quantile(abs_residuals, 1.0 - c_star / 4.0)?)
}

/// Data-driven Huber transition point.
///
/// Splits the sample by a seeded permutation, fits LAD on the first half,
/// symmetrizes the second half and returns twice the `(1 − c*/4)` quantile
/// of the residual magnitudes. May return zero on noiseless data.
pub fn estimate_gamma<T: Scalar>(x: &Matrix<T>, y: &[T], c_star: f64, seed: u64) -> Result<T> {
    let n = x.rows();
    if y.len() != n {
        return invalid_input("response length mismatch");
    }
    if n < 4 {
        return invalid_input(format!("gamma estimation needs at least 4 rows, got {n}"));
    }
    if !(c_star > 0.0 && c_star < 1.0) {
        return invalid_config(format!("c* must lie in (0, 1), got {c_star}"));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (first, second) = perm.split_at(n / 2);
    let y1: Vec<T> = first.iter().map(|&i| y[i]).collect();
    let beta0 = fit_lad(&x.select_rows(first), &y1, &LadConfig::default())?.beta_hat;

    let pairs = second.len() / 2;
    let order: Vec<usize> = second[..2 * pairs].to_vec();
    let y2: Vec<T> = order.iter().map(|&i| y[i]).collect();
    let (xs, ys) = symmetrize_pairs(&x.select_rows(&order), &y2)?;
    let w: Vec<T> = xs
        .row_iter()
        .zip(&ys)
        .map(|(r, &yi)| (yi - dot(r, &beta0)).abs())
        .collect();
    gamma_from_residuals(&w, c_star)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GammaChoice<T> {
    Fixed(T),
    /// Estimate from the raw data with [`estimate_gamma`].
    Auto { c_star: f64, seed: u64 },
}

impl<T: Scalar> GammaChoice<T> {
    /// Default data-driven choice, `c* = 0.1`.
    pub fn auto(seed: u64) -> Self {
        GammaChoice::Auto { c_star: 0.1, seed }
    }

    pub fn resolve(&self, x: &Matrix<T>, y: &[T]) -> Result<T> {
        match *self {
            GammaChoice::Fixed(g) => Ok(g),
            GammaChoice::Auto { c_star, seed } => {
                Ok(estimate_gamma(x, y, c_star, seed)?.max(T::lit(GAMMA_MIN)))
            }
        }
    }
}

/// Symmetrize pairs, filter the symmetrized covariates, fit Huber on the survivors.
///
/// With `GammaChoice::Auto` the transition point is estimated first on the raw
/// (unsymmetrized) data. `huber_cfg.gamma` is overwritten by the resolved value.
pub fn huber_pipeline<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    gamma: GammaChoice<T>,
    filter_cfg: &FilterConfig<T>,
    huber_cfg: &HuberConfig<T>,
) -> Result<EstimatorResult<T>> {
    let gamma = gamma.resolve(x, y)?;
    let (xs, ys) = symmetrize_pairs(x, y)?;
    let cfg = HuberConfig { gamma, ..huber_cfg.clone() };
    filtered_huber(&xs, &ys, &cfg, filter_cfg)
}

/// Filter the covariates and fit Huber on the survivors, without symmetrization.
pub fn filtered_huber<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    cfg: &HuberConfig<T>,
    filter_cfg: &FilterConfig<T>,
) -> Result<EstimatorResult<T>> {
    if y.len() != x.rows() {
        return invalid_input("response length mismatch");
    }
    let report = filter_covariates(x, filter_cfg)?;
    let keep = &report.surviving_indices;
    let ys: Vec<T> = keep.iter().map(|&i| y[i]).collect();
    fit_huber(&x.select_rows(keep), &ys, cfg)
}
