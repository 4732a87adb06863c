use super::matrix::{dot, norm2, Matrix};
use crate::error::{invalid_input, Result};
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Dominant eigenpair found by power iteration.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenpair<T> {
    pub value: T,
    /// Unit ℓ2 norm.
    pub vector: Vec<T>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖M·v − λ·v‖₂` at the returned pair.
    pub residual: T,
}

const RESTART_SEED: u64 = 0x005e_ed0f_e16e;

fn check_square<T: Scalar>(m: &Matrix<T>) -> Result<()> {
    if !m.is_square() || m.rows() == 0 {
        return invalid_input(format!(
            "expected a non-empty square matrix, got {}x{}",
            m.rows(),
            m.cols()
        ));
    }
    if !m.all_finite() {
        return invalid_input("matrix has non-finite entries");
    }
    Ok(())
}

/// Default start: the all-ones direction with a small fixed perturbation, so
/// highly structured matrices (eigenvectors like `(1, −1)/√2`) cannot leave the
/// start exactly orthogonal to the dominant eigenvector.
pub(crate) fn default_start<T: Scalar>(p: usize) -> Vec<T> {
    let golden = 0.618_033_988_749_894_9_f64;
    let v: Vec<T> = (0..p)
        .map(|i| T::lit(1.0 + 1e-2 * ((i as f64 * golden).fract() - 0.5)))
        .collect();
    let n = norm2(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Leading eigenpair of a symmetric positive semidefinite matrix.
///
/// Stops once `‖Mv − λv‖₂ ≤ tol·max(λ, 1)`. If the budget runs out the
/// iteration is restarted once from a seeded random vector; the better of the
/// two runs is returned with `converged = false` when neither met `tol`.
pub fn power_iteration<T: Scalar>(m: &Matrix<T>, tol: T, max_iters: usize) -> Result<Eigenpair<T>> {
    check_square(m)?;
    power_iteration_from(m, &default_start(m.rows()), tol, max_iters)
}

/// [`power_iteration`] from a caller-supplied start vector (warm start).
pub fn power_iteration_from<T: Scalar>(
    m: &Matrix<T>,
    start: &[T],
    tol: T,
    max_iters: usize,
) -> Result<Eigenpair<T>> {
    check_square(m)?;
    if !(tol > T::zero()) {
        return invalid_input("power iteration tolerance must be positive");
    }
    if start.len() != m.rows() {
        return invalid_input("start vector has the wrong length");
    }
    let s = norm2(start);
    let start: Vec<T> = if s > T::zero() && s.is_finite() {
        start.iter().map(|&x| x / s).collect()
    } else {
        default_start(m.rows())
    };
    let first = run(m, start, tol, max_iters);
    if first.converged {
        return Ok(first);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RESTART_SEED);
    let mut v: Vec<T> = (0..m.rows())
        .map(|_| T::lit(rng.random_range(-1.0..1.0)))
        .collect();
    let n = norm2(&v);
    v.iter_mut().for_each(|x| *x /= n);
    let second = run(m, v, tol, max_iters);
    let mut best = if second.converged || second.residual < first.residual {
        second
    } else {
        first
    };
    best.iterations = best.iterations.max(max_iters);
    Ok(best)
}

fn run<T: Scalar>(m: &Matrix<T>, mut v: Vec<T>, tol: T, max_iters: usize) -> Eigenpair<T> {
    let mut w = m.matvec(&v).expect("square");
    let mut lambda = dot(&v, &w);
    let mut residual = residual_norm(&w, &v, lambda);
    let mut iterations = 0;
    loop {
        if residual <= tol * lambda.max(T::one()) {
            return Eigenpair { value: lambda, vector: v, converged: true, iterations, residual };
        }
        if iterations >= max_iters {
            return Eigenpair { value: lambda, vector: v, converged: false, iterations, residual };
        }
        let wn = norm2(&w);
        if wn == T::zero() || !wn.is_finite() {
            // Mv = 0 makes λ = 0 exact and the residual zero; this branch is unreachable
            // for finite input and is kept as a guard.
            return Eigenpair { value: lambda, vector: v, converged: false, iterations, residual };
        }
        v = w.iter().map(|&x| x / wn).collect();
        w = m.matvec(&v).expect("square");
        lambda = dot(&v, &w);
        residual = residual_norm(&w, &v, lambda);
        iterations += 1;
    }
}

fn residual_norm<T: Scalar>(w: &[T], v: &[T], lambda: T) -> T {
    w.iter()
        .zip(v)
        .map(|(&a, &b)| (a - lambda * b) * (a - lambda * b))
        .sum::<T>()
        .sqrt()
}

/// All eigenvalues of a small symmetric matrix, ascending (cyclic Jacobi).
///
/// Used where exact extremes matter (stability certificates), not on the hot
/// filtering path.
pub fn symmetric_eigenvalues<T: Scalar>(m: &Matrix<T>) -> Result<Vec<T>> {
    check_square(m)?;
    let p = m.rows();
    let mut a = m.clone();
    let frob = a.as_slice().iter().map(|&x| x * x).sum::<T>().sqrt();
    let thresh = T::epsilon() * T::lit(0.5) * frob;
    for _sweep in 0..100 {
        let off = (0..p)
            .flat_map(|i| (0..p).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<T>()
            .sqrt();
        if off <= thresh {
            break;
        }
        for i in 0..p {
            for j in i + 1..p {
                let aij = a[(i, j)];
                if aij == T::zero() {
                    continue;
                }
                let theta = (a[(j, j)] - a[(i, i)]) / (T::lit(2.0) * aij);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..p {
                    let aki = a[(k, i)];
                    let akj = a[(k, j)];
                    a[(k, i)] = c * aki - s * akj;
                    a[(k, j)] = s * aki + c * akj;
                }
                for k in 0..p {
                    let aik = a[(i, k)];
                    let ajk = a[(j, k)];
                    a[(i, k)] = c * aik - s * ajk;
                    a[(j, k)] = s * aik + c * ajk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..p).map(|i| a[(i, i)]).collect();
    ev.sort_by(|x, y| x.partial_cmp(y).expect("finite eigenvalues"));
    Ok(ev)
}

/// `‖A‖₂ = max |λᵢ|` for symmetric `A`.
pub fn spectral_norm_symmetric<T: Scalar>(m: &Matrix<T>) -> Result<T> {
    let ev = symmetric_eigenvalues(m)?;
    Ok(ev[0].abs().max(ev[ev.len() - 1].abs()))
}
