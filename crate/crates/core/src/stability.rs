//! Certificates for the stability notions used by the filtered estimators.
//!
//! Exact checks enumerate subsets and are capped in size; anything sampled or
//! greedy carries `exact = false` and is one-sided evidence only.

use crate::error::{invalid_input, RegressionError, Result};
use crate::lad::{binomial, Combinations};
use crate::numerics::{symmetric_eigenvalues, Matrix};
use crate::scalar::{ceil_count, floor_count, Scalar};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Largest point set the exact subset enumerations accept.
pub const MAX_EXACT_POINTS: usize = 20;
/// Largest number of size-`m` subsets [`ssc_sss_params`] enumerates.
pub const MAX_SUBSETS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct StrongStabilityQuery<T> {
    pub epsilon: f64,
    pub delta: f64,
    pub mu: Vec<T>,
    pub sigma2: T,
}

impl<T: Scalar> StrongStabilityQuery<T> {
    /// Standardized query: `μ = 0`, `σ² = 1`.
    pub fn standard(p: usize, epsilon: f64, delta: f64) -> Self {
        Self {
            epsilon,
            delta,
            mu: vec![T::zero(); p],
            sigma2: T::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrongStabilityReport<T> {
    pub pass: bool,
    /// `max ‖mean(S′) − μ‖₂`.
    pub worst_mean_dev: T,
    /// `max ‖(1/|S′|)Σ(xᵢ−μ)(xᵢ−μ)ᵀ − σ²I‖₂`.
    pub worst_spectral_dev: T,
    pub subsets_checked: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakStabilityParams<T> {
    pub epsilon: f64,
    pub lower: T,
    pub upper: T,
    pub exact: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SscSssProfile<T> {
    pub level: usize,
    /// `min_{|S|=m} λ_min(Σ_{i∈S} xᵢxᵢᵀ)`.
    pub ssc: T,
    /// `max_{|S|=m} λ_max(Σ_{i∈S} xᵢxᵢᵀ)`.
    pub sss: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1StabilityEstimate<T> {
    pub epsilon: f64,
    /// Largest complement mass `(1/n)Σ_{top ⌊εn⌋}|xᵢᵀv|` over sampled directions.
    pub m_upper: T,
    /// Smallest trimmed mass `(1/n)Σ_{rest}|xᵢᵀv|` over sampled directions.
    pub big_m_lower: T,
    pub directions_sampled: usize,
    pub exact: bool,
}

fn size_cap(n: usize) -> Result<()> {
    if n > MAX_EXACT_POINTS {
        return Err(RegressionError::SizeCap(format!(
            "exact enumeration limited to {MAX_EXACT_POINTS} points, got {n}"
        )));
    }
    Ok(())
}

fn outer_sums<T: Scalar>(points: &Matrix<T>, mu: &[T]) -> (Vec<Vec<T>>, Vec<Matrix<T>>) {
    let p = points.cols();
    let devs: Vec<Vec<T>> = points
        .row_iter()
        .map(|r| r.iter().zip(mu).map(|(&x, &m)| x - m).collect())
        .collect();
    let outers = devs
        .iter()
        .map(|d| Matrix::from_fn(p, p, |a, b| d[a] * d[b]))
        .collect();
    (devs, outers)
}

/// Exact `(ε, δ)` strong-stability check over every `S′` with `|S′| ≥ (1−ε)n`.
///
/// Passes iff the worst mean deviation is at most `σδ` and the worst spectral
/// deviation at most `σ²δ²/ε`; boundary equality passes.
pub fn check_strong_stability<T: Scalar>(
    points: &Matrix<T>,
    q: &StrongStabilityQuery<T>,
) -> Result<StrongStabilityReport<T>> {
    let (n, p) = points.shape();
    size_cap(n)?;
    if !(q.epsilon > 0.0 && q.epsilon < 0.5) {
        return invalid_input(format!("epsilon must lie in (0, 1/2), got {}", q.epsilon));
    }
    if !(q.delta >= q.epsilon) {
        return invalid_input(format!("delta {} must be at least epsilon {}", q.delta, q.epsilon));
    }
    if !(q.sigma2 > T::zero()) {
        return invalid_input("sigma^2 must be positive");
    }
    if q.mu.len() != p {
        return invalid_input("mu has the wrong dimension");
    }
    let min_size = ceil_count((1.0 - q.epsilon) * n as f64).max(1);
    if min_size > n {
        return invalid_input("no subset satisfies the size constraint");
    }
    let (devs, outers) = outer_sums(points, &q.mu);
    let mut total_dev = vec![T::zero(); p];
    let mut total_outer = Matrix::zeros(p, p);
    for (d, o) in devs.iter().zip(&outers) {
        crate::numerics::axpy(T::one(), d, &mut total_dev);
        total_outer = sum_mat(&total_outer, o, T::one());
    }

    let mut worst_mean = T::zero();
    let mut worst_spec = T::zero();
    let mut checked = 0;
    for removed in 0..=(n - min_size) {
        for drop in Combinations::new(n, removed) {
            let mut s_dev = total_dev.clone();
            let mut s_outer = total_outer.clone();
            for &i in &drop {
                crate::numerics::axpy(-T::one(), &devs[i], &mut s_dev);
                s_outer = sum_mat(&s_outer, &outers[i], -T::one());
            }
            let size = T::from_count(n - removed);
            let mean_dev = s_dev.iter().map(|&v| (v / size) * (v / size)).sum::<T>().sqrt();
            let mut cov = s_outer.scale(T::one() / size);
            for a in 0..p {
                cov[(a, a)] -= q.sigma2;
            }
            let ev = symmetric_eigenvalues(&cov)?;
            let spec = ev[0].abs().max(ev[p - 1].abs());
            worst_mean = worst_mean.max(mean_dev);
            worst_spec = worst_spec.max(spec);
            checked += 1;
        }
    }
    let sigma = q.sigma2.sqrt();
    let delta = T::lit(q.delta);
    let pass = worst_mean <= sigma * delta && worst_spec <= q.sigma2 * delta * delta / T::lit(q.epsilon);
    Ok(StrongStabilityReport {
        pass,
        worst_mean_dev: worst_mean,
        worst_spectral_dev: worst_spec,
        subsets_checked: checked,
    })
}

fn sum_mat<T: Scalar>(a: &Matrix<T>, b: &Matrix<T>, s: T) -> Matrix<T> {
    Matrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)] + s * b[(i, j)])
}

fn gram_over<T: Scalar>(outers: &[Matrix<T>], keep: impl Iterator<Item = usize>, p: usize) -> Matrix<T> {
    let mut g = Matrix::zeros(p, p);
    for i in keep {
        g = sum_mat(&g, &outers[i], T::one());
    }
    g
}

/// Weak-stability bounds `L`, `U` with full-`n` normalization.
///
/// `U` is always exact (attained by the full set). `L` is exact for
/// `n ≤ 20`; larger sets use greedy eigenvalue-minimizing removal, which
/// only bounds the true `L` from above.
pub fn weak_stability_params<T: Scalar>(points: &Matrix<T>, epsilon: f64) -> Result<WeakStabilityParams<T>> {
    let (n, p) = points.shape();
    if n == 0 {
        return invalid_input("empty point set");
    }
    if !(0.0..1.0).contains(&epsilon) {
        return invalid_input(format!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    let min_size = ceil_count((1.0 - epsilon) * n as f64).max(1);
    let drop_count = n - min_size;
    let (_, outers) = outer_sums(points, &vec![T::zero(); p]);
    let inv_n = T::one() / T::from_count(n);
    let full = gram_over(&outers, 0..n, p).scale(inv_n);
    let full_ev = symmetric_eigenvalues(&full)?;
    let upper = full_ev[p - 1];

    let (lower, exact) = if n <= MAX_EXACT_POINTS {
        let mut lower = T::infinity();
        for drop in Combinations::new(n, drop_count) {
            let mut m = full.clone();
            for &i in &drop {
                m = sum_mat(&m, &outers[i], -inv_n);
            }
            lower = lower.min(symmetric_eigenvalues(&m)?[0]);
        }
        (lower, true)
    } else {
        let mut m = full.clone();
        let mut alive: Vec<usize> = (0..n).collect();
        for _ in 0..drop_count {
            let mut best: Option<(usize, T)> = None;
            for (pos, &i) in alive.iter().enumerate() {
                let cand = sum_mat(&m, &outers[i], -inv_n);
                let lam = symmetric_eigenvalues(&cand)?[0];
                if best.is_none_or(|(_, b)| lam < b) {
                    best = Some((pos, lam));
                }
            }
            let (pos, _) = best.expect("non-empty");
            let i = alive.remove(pos);
            m = sum_mat(&m, &outers[i], -inv_n);
        }
        (symmetric_eigenvalues(&m)?[0], false)
    };
    Ok(WeakStabilityParams {
        epsilon,
        lower,
        upper,
        exact,
    })
}

/// Weak parameters implied by `(ε, δ)` strong stability with `μ = 0`, `σ² = 1`:
/// `L = (1−ε)(1−δ²/ε)`, `U = 1 + δ²/ε`.
pub fn strong_to_weak(epsilon: f64, delta: f64) -> Result<WeakStabilityParams<f64>> {
    if !(epsilon > 0.0 && epsilon < 0.5) {
        return Err(RegressionError::Domain(format!("epsilon must lie in (0, 1/2), got {epsilon}")));
    }
    let ratio = delta * delta / epsilon;
    if !(ratio < 1.0) || delta < 0.0 {
        return Err(RegressionError::Domain(format!(
            "conversion requires delta^2/epsilon < 1, got {ratio}"
        )));
    }
    Ok(WeakStabilityParams {
        epsilon,
        lower: (1.0 - epsilon) * (1.0 - ratio),
        upper: 1.0 + ratio,
        exact: true,
    })
}

/// Exact SSC/SSS parameters at level `m` (unnormalized Gram sums).
pub fn ssc_sss_params<T: Scalar>(points: &Matrix<T>, m: usize) -> Result<SscSssProfile<T>> {
    let (n, p) = points.shape();
    if m == 0 || m > n {
        return invalid_input(format!("level m = {m} must lie in [1, {n}]"));
    }
    let count = binomial(n, m);
    if count > MAX_SUBSETS {
        return Err(RegressionError::SizeCap(format!(
            "C({n}, {m}) = {count} subsets exceeds the cap of {MAX_SUBSETS}"
        )));
    }
    let (_, outers) = outer_sums(points, &vec![T::zero(); p]);
    let full = gram_over(&outers, 0..n, p);
    let mut ssc = T::infinity();
    let mut sss = T::neg_infinity();
    // Enumerate whichever of the subset or its complement is smaller.
    let by_complement = m > n / 2;
    let k = if by_complement { n - m } else { m };
    for idx in Combinations::new(n, k) {
        let g = if by_complement {
            let mut g = full.clone();
            for &i in &idx {
                g = sum_mat(&g, &outers[i], -T::one());
            }
            g
        } else {
            gram_over(&outers, idx.iter().copied(), p)
        };
        let ev = symmetric_eigenvalues(&g)?;
        ssc = ssc.min(ev[0]);
        sss = sss.max(ev[p - 1]);
    }
    Ok(SscSssProfile { level: m, ssc, sss })
}

/// Sampled-direction estimate of the ℓ1-stability constants.
///
/// For each direction the worst subset is analytic: the complement mass keeps
/// the `⌊εn⌋` largest `|xᵢᵀv|`, the trimmed mass drops them. Exact only for `p = 1`.
pub fn l1_stability_estimate<T: Scalar>(
    points: &Matrix<T>,
    epsilon: f64,
    n_directions: usize,
    seed: u64,
) -> Result<L1StabilityEstimate<T>> {
    let (n, p) = points.shape();
    if n_directions == 0 {
        return invalid_input("need at least one direction");
    }
    if n == 0 || p == 0 {
        return invalid_input("empty point set");
    }
    if !(0.0..1.0).contains(&epsilon) {
        return invalid_input(format!("epsilon must lie in [0, 1), got {epsilon}"));
    }
    let k = floor_count(epsilon * n as f64).min(n);
    let directions: Vec<Vec<T>> = if p == 1 {
        vec![vec![T::one()], vec![-T::one()]]
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n_directions)
            .map(|_| loop {
                let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                if norm > 0.0 {
                    break v.iter().map(|&x| T::lit(x / norm)).collect();
                }
            })
            .collect()
    };
    let inv_n = T::one() / T::from_count(n);
    let mut m_upper = T::zero();
    let mut big_m_lower = T::infinity();
    for v in &directions {
        let mut proj: Vec<T> = points.row_iter().map(|r| crate::numerics::dot(r, v).abs()).collect();
        proj.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
        let top: T = proj[..k].iter().copied().sum();
        let rest: T = proj[k..].iter().copied().sum();
        m_upper = m_upper.max(top * inv_n);
        big_m_lower = big_m_lower.min(rest * inv_n);
    }
    Ok(L1StabilityEstimate {
        epsilon,
        m_upper,
        big_m_lower,
        directions_sampled: directions.len(),
        exact: p == 1,
    })
}
