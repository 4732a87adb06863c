//! One-step improvement of a rough estimate via robust mean estimation.
//!
//! Each point is mapped to `β̂₁ + (yᵢ − xᵢᵀβ̂₁)xᵢ`, whose expectation is `β*`;
//! the mapped points are bucketed by median-of-means, filtered with
//! recentering, and averaged.

use crate::error::{invalid_config, invalid_input, Result};
use crate::filtering::{filter_covariates, Centering, FilterConfig};
use crate::numerics::{dot, mean_rows, Matrix};
use crate::scalar::{ceil_count, Scalar};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PostprocessConfig {
    pub buckets: usize,
    pub filter_budget: usize,
    pub seed: u64,
}

impl PostprocessConfig {
    /// `k = ⌈ε′n⌉` buckets and a within-bucket budget of `⌈0.2k⌉`.
    pub fn for_fraction(n: usize, eps_prime: f64, seed: u64) -> Self {
        let buckets = ceil_count(eps_prime * n as f64).clamp(1, n.max(1));
        Self {
            buckets,
            filter_budget: ceil_count(0.2 * buckets as f64),
            seed,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.buckets == 0 || self.buckets > n {
            return invalid_config(format!("bucket count must lie in [1, {n}], got {}", self.buckets));
        }
        if self.filter_budget > 0 && 2 * self.filter_budget >= self.buckets {
            return invalid_config(format!(
                "filter budget {} must be below half the bucket count {}",
                self.filter_budget, self.buckets
            ));
        }
        Ok(())
    }
}

/// Row `i` is `β₁ + (yᵢ − xᵢᵀβ₁)·xᵢ`.
pub fn shift_map<T: Scalar>(x: &Matrix<T>, y: &[T], beta1: &[T]) -> Result<Matrix<T>> {
    let (n, p) = x.shape();
    if y.len() != n || beta1.len() != p {
        return invalid_input("shift map: shape mismatch");
    }
    if beta1.iter().any(|v| !v.is_finite()) {
        return invalid_input("initial estimate is not finite");
    }
    let mut out = Matrix::zeros(n, p);
    for (i, row) in x.row_iter().enumerate() {
        let r = y[i] - dot(row, beta1);
        for (o, (&b, &xj)) in out.row_mut(i).iter_mut().zip(beta1.iter().zip(row)) {
            *o = b + r * xj;
        }
    }
    Ok(out)
}

/// Bucket means over a given ordering; the trailing `n mod k` entries are dropped.
pub fn bucket_means_in_order<T: Scalar>(points: &Matrix<T>, order: &[usize], k: usize) -> Result<Matrix<T>> {
    let n = points.rows();
    if k == 0 || k > n {
        return invalid_input(format!("bucket count must lie in [1, {n}], got {k}"));
    }
    if order.len() != n {
        return invalid_input("ordering must cover every point");
    }
    let size = n / k;
    let mut out = Matrix::zeros(k, points.cols());
    for b in 0..k {
        let mean = mean_rows(points, &order[b * size..(b + 1) * size]);
        out.row_mut(b).copy_from_slice(&mean);
    }
    Ok(out)
}

/// Median-of-means bucketing under a seeded random permutation.
pub fn median_of_means_buckets<T: Scalar>(points: &Matrix<T>, k: usize, seed: u64) -> Result<Matrix<T>> {
    let mut order: Vec<usize> = (0..points.rows()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    bucket_means_in_order(points, &order, k)
}

/// Filter with per-round recentering, then average the survivors.
pub fn robust_mean<T: Scalar>(points: &Matrix<T>, filter_budget: usize) -> Result<Vec<T>> {
    if points.rows() == 0 {
        return invalid_input("empty point set");
    }
    if filter_budget == 0 {
        let all: Vec<usize> = (0..points.rows()).collect();
        return Ok(mean_rows(points, &all));
    }
    let cfg = FilterConfig::remove(filter_budget).with_center(Centering::Recenter);
    let report = filter_covariates(points, &cfg)?;
    Ok(mean_rows(points, &report.surviving_indices))
}

/// `shift_map → median_of_means_buckets → robust_mean`.
pub fn postprocess_estimate<T: Scalar>(
    x: &Matrix<T>,
    y: &[T],
    beta1: &[T],
    cfg: &PostprocessConfig,
) -> Result<Vec<T>> {
    cfg.validate(x.rows())?;
    let shifted = shift_map(x, y, beta1)?;
    let buckets = median_of_means_buckets(&shifted, cfg.buckets, cfg.seed)?;
    robust_mean(&buckets, cfg.filter_budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{gen_linear_model, DistributionSpec, LinearModelDraw};
    use approx::assert_abs_diff_eq;

    #[test]
    fn shift_map_examples() {
        let x = Matrix::column(&[2.0]).unwrap();
        let m = shift_map(&x, &[6.0], &[0.0]).unwrap();
        assert_eq!(m[(0, 0)], 12.0);

        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, -1.0], [0.5, 0.5]]).unwrap();
        let beta = [0.7, -0.2];
        let y = x.matvec(&beta).unwrap();
        let m = shift_map(&x, &y, &beta).unwrap();
        assert_eq!(m.shape(), (3, 2));
        for r in m.row_iter() {
            assert_abs_diff_eq!(r[0], 0.7, epsilon = 1e-15);
            assert_abs_diff_eq!(r[1], -0.2, epsilon = 1e-15);
        }
        assert!(shift_map(&x, &y, &[1.0]).is_err());
    }

    #[test]
    fn bucketing_examples() {
        let pts = Matrix::column(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        let id: Vec<usize> = (0..6).collect();
        let b = bucket_means_in_order(&pts, &id, 3).unwrap();
        assert_eq!(b.as_slice(), &[1.5, 3.5, 5.5]);
        assert_eq!(bucket_means_in_order(&pts, &id, 6).unwrap(), pts);
        assert_eq!(median_of_means_buckets(&pts, 1, 7).unwrap().as_slice(), &[3.5]);
        assert!(median_of_means_buckets(&pts, 7, 7).is_err());
        assert!(median_of_means_buckets(&pts, 0, 7).is_err());
    }

    #[test]
    fn buckets_partition_the_points() {
        // Integer powers of two make every bucket sum identify its members.
        let n = 23;
        let pts = Matrix::column(&(0..n).map(|i| (1u64 << i) as f64).collect::<Vec<_>>()).unwrap();
        let k = 5;
        let b = median_of_means_buckets(&pts, k, 3).unwrap();
        let size = n / k;
        let mut seen = 0u64;
        for v in b.as_slice() {
            let bits = (v * size as f64).round() as u64;
            assert_eq!(bits.count_ones() as usize, size);
            assert_eq!(seen & bits, 0, "buckets overlap");
            seen |= bits;
        }
        assert_eq!(seen.count_ones() as usize, k * size);
    }

    #[test]
    fn robust_mean_examples() {
        let pts = Matrix::column(&[0.0, 0.0, 0.0, 100.0]).unwrap();
        assert_eq!(robust_mean(&pts, 1).unwrap(), vec![0.0]);
        assert_eq!(robust_mean(&pts, 0).unwrap(), vec![25.0]);
        let same = Matrix::from_rows(&[[2.0, -1.0]; 5]).unwrap();
        assert_eq!(robust_mean(&same, 2).unwrap(), vec![2.0, -1.0]);
    }

    #[test]
    fn exact_initial_estimate_is_returned() {
        let cov = DistributionSpec::sym_pareto(4.0);
        let zero = DistributionSpec::gaussian(0.0);
        let d: LinearModelDraw<f64> = gen_linear_model(100, 3, &cov, &zero, 2).unwrap();
        let cfg = PostprocessConfig::for_fraction(100, 0.1, 1);
        let b = postprocess_estimate(&d.x, &d.y, &d.beta_star, &cfg).unwrap();
        for (a, e) in b.iter().zip(&d.beta_star) {
            assert_abs_diff_eq!(a, e, epsilon = 1e-12);
        }
    }

    #[test]
    fn no_filter_all_buckets_is_plain_mean() {
        let x = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [1.0, 1.0], [2.0, -1.0]]).unwrap();
        let y = [1.0, 2.0, 2.5, 0.0];
        let beta = [0.3, 0.4];
        let cfg = PostprocessConfig { buckets: 4, filter_budget: 0, seed: 0 };
        let got = postprocess_estimate(&x, &y, &beta, &cfg).unwrap();
        let want = mean_rows(&shift_map(&x, &y, &beta).unwrap(), &[0, 1, 2, 3]);
        for (a, b) in got.iter().zip(&want) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn shifted_rows_are_unbiased() {
        // Gaussian design, β₁ off by a fixed offset: each row has mean β* and
        // per-coordinate variance ‖β*−β₁‖² + 2(β*−β₁)ⱼ² + σ².
        let n = 100_000;
        let cov = DistributionSpec::gaussian(1.0);
        let d: LinearModelDraw<f64> = gen_linear_model(n, 2, &cov, &cov, 8).unwrap();
        let beta1: Vec<f64> = d.beta_star.iter().map(|b| b + 0.3).collect();
        let all: Vec<usize> = (0..n).collect();
        let mean = mean_rows(&shift_map(&d.x, &d.y, &beta1).unwrap(), &all);
        let var = 2.0 * 0.09 + 2.0 * 0.09 + 1.0;
        let se = (var / n as f64).sqrt();
        for (j, (m, b)) in mean.iter().zip(&d.beta_star).enumerate() {
            assert!((m - b).abs() < 3.0 * se, "coord {j}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(PostprocessConfig { buckets: 0, filter_budget: 0, seed: 0 }.validate(10).is_err());
        assert!(PostprocessConfig { buckets: 11, filter_budget: 0, seed: 0 }.validate(10).is_err());
        assert!(PostprocessConfig { buckets: 4, filter_budget: 2, seed: 0 }.validate(10).is_err());
        let c = PostprocessConfig::for_fraction(2000, 0.05, 0);
        assert_eq!((c.buckets, c.filter_budget), (100, 20));
    }
}
