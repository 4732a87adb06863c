use super::matrix::{dot, Matrix};
use crate::error::{invalid_input, RegressionError, Result};
use crate::scalar::Scalar;

/// Column-pivoted Householder QR of an `n×p` matrix with `n ≥ p`.
///
/// Reflectors are kept so the factor can be reused: `LTS` applies the
/// projection onto the column space once per iteration without ever
/// forming the `n×n` hat matrix.
#[derive(Debug, Clone)]
pub struct QrFactor<T> {
    rows: usize,
    cols: usize,
    /// Upper-triangular `R` (p×p), columns in pivoted order.
    r: Matrix<T>,
    /// Householder vectors, `vs[k]` acts on entries `k..n`.
    vs: Vec<Vec<T>>,
    betas: Vec<T>,
    /// `perm[j]` = original column stored at pivoted position `j`.
    perm: Vec<usize>,
    rank: usize,
}

/// Factorizes `x`. Numerical rank uses the tolerance `1e-10 × largest column norm`.
pub fn qr_factor<T: Scalar>(x: &Matrix<T>) -> Result<QrFactor<T>> {
    let (n, p) = x.shape();
    if n < p {
        return invalid_input(format!("least squares needs rows >= cols, got {n}x{p}"));
    }
    if p == 0 {
        return invalid_input("design matrix has no columns");
    }
    // Column-major working copy.
    let mut a: Vec<Vec<T>> = (0..p).map(|j| x.column_vec(j)).collect();
    let max_col_norm = a
        .iter()
        .map(|c| dot(c, c).sqrt())
        .fold(T::zero(), |m, v| m.max(v));
    let rel = T::lit(1e-10).max(T::lit(10.0) * T::epsilon() * T::from_count(n));
    let tol = rel * max_col_norm;

    let mut perm: Vec<usize> = (0..p).collect();
    let mut vs = Vec::with_capacity(p);
    let mut betas = Vec::with_capacity(p);
    let mut rdiag = Vec::with_capacity(p);

    for k in 0..p {
        // Pivot: trailing column with the largest remaining norm.
        let (piv, _) = (k..p)
            .map(|j| (j, dot(&a[j][k..], &a[j][k..])))
            .fold((k, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
        a.swap(k, piv);
        perm.swap(k, piv);

        let col = &a[k][k..];
        let norm = dot(col, col).sqrt();
        if norm == T::zero() {
            vs.push(vec![T::zero(); n - k]);
            betas.push(T::zero());
            rdiag.push(T::zero());
            continue;
        }
        let alpha = if col[0] >= T::zero() { -norm } else { norm };
        let mut v = col.to_vec();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        let beta = if vtv > T::zero() { T::lit(2.0) / vtv } else { T::zero() };
        for col in a.iter_mut().skip(k) {
            let s = beta * dot(&v, &col[k..]);
            for (c, &vi) in col[k..].iter_mut().zip(&v) {
                *c -= s * vi;
            }
        }
        a[k][k] = alpha;
        for c in a[k][k + 1..].iter_mut() {
            *c = T::zero();
        }
        rdiag.push(alpha);
        vs.push(v);
        betas.push(beta);
    }

    let rank = rdiag.iter().take_while(|d| d.abs() > tol).count();
    let r = Matrix::from_fn(p, p, |i, j| if i <= j { a[j][i] } else { T::zero() });
    Ok(QrFactor {
        rows: n,
        cols: p,
        r,
        vs,
        betas,
        perm,
        rank,
    })
}

impl<T: Scalar> QrFactor<T> {
    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_full_rank(&self) -> bool {
        self.rank == self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn require_full_rank(&self) -> Result<()> {
        if self.is_full_rank() {
            Ok(())
        } else {
            Err(RegressionError::RankDeficient {
                rank: self.rank,
                cols: self.cols,
            })
        }
    }

    /// In place `v ← Qᵀv`.
    pub fn apply_qt(&self, v: &mut [T]) {
        for (k, (h, &beta)) in self.vs.iter().zip(&self.betas).enumerate() {
            if beta == T::zero() {
                continue;
            }
            let s = beta * dot(h, &v[k..]);
            for (vi, &hi) in v[k..].iter_mut().zip(h) {
                *vi -= s * hi;
            }
        }
    }

    /// In place `v ← Qv`.
    pub fn apply_q(&self, v: &mut [T]) {
        for (k, (h, &beta)) in self.vs.iter().zip(&self.betas).enumerate().rev() {
            if beta == T::zero() {
                continue;
            }
            let s = beta * dot(h, &v[k..]);
            for (vi, &hi) in v[k..].iter_mut().zip(h) {
                *vi -= s * hi;
            }
        }
    }

    /// `argmin_β ‖Xβ − y‖₂`; fails on rank deficiency.
    pub fn solve(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.rows {
            return invalid_input(format!(
                "response length {} does not match {} rows",
                y.len(),
                self.rows
            ));
        }
        self.require_full_rank()?;
        let mut c = y.to_vec();
        self.apply_qt(&mut c);
        let p = self.cols;
        let mut z = vec![T::zero(); p];
        for i in (0..p).rev() {
            let mut s = c[i];
            for (j, &zj) in z.iter().enumerate().skip(i + 1) {
                s -= self.r[(i, j)] * zj;
            }
            z[i] = s / self.r[(i, i)];
        }
        let mut beta = vec![T::zero(); p];
        for (j, &orig) in self.perm.iter().enumerate() {
            beta[orig] = z[j];
        }
        Ok(beta)
    }

    /// Orthogonal projection of `v` onto the (numerical) column space.
    pub fn project(&self, v: &[T]) -> Vec<T> {
        let mut c = v.to_vec();
        self.apply_qt(&mut c);
        for ci in c[self.rank..].iter_mut() {
            *ci = T::zero();
        }
        self.apply_q(&mut c);
        c
    }
}

/// Least squares through a pivoted QR factorization, never the normal equations.
pub fn solve_least_squares<T: Scalar>(x: &Matrix<T>, y: &[T]) -> Result<Vec<T>> {
    if y.len() != x.rows() {
        return invalid_input(format!(
            "response length {} does not match {} rows",
            y.len(),
            x.rows()
        ));
    }
    qr_factor(x)?.solve(y)
}

/// `argmin_β Σ wᵢ(yᵢ − xᵢᵀβ)²` for nonnegative weights.
pub fn solve_weighted_least_squares<T: Scalar>(x: &Matrix<T>, y: &[T], w: &[T]) -> Result<Vec<T>> {
    if y.len() != x.rows() || w.len() != x.rows() {
        return invalid_input("weighted least squares: length mismatch");
    }
    let sw: Vec<T> = w.iter().map(|&wi| wi.max(T::zero()).sqrt()).collect();
    let xw = Matrix::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * sw[i]);
    let yw: Vec<T> = y.iter().zip(&sw).map(|(&yi, &s)| yi * s).collect();
    solve_least_squares(&xw, &yw)
}

/// Explicit `n×n` hat matrix `X(XᵀX)⁻¹Xᵀ`, built column by column from the QR factor.
pub fn hat_matrix<T: Scalar>(x: &Matrix<T>) -> Result<Matrix<T>> {
    let qr = qr_factor(x)?;
    qr.require_full_rank()?;
    let n = x.rows();
    let mut h = Matrix::zeros(n, n);
    let mut e = vec![T::zero(); n];
    for j in 0..n {
        e.iter_mut().for_each(|v| *v = T::zero());
        e[j] = T::one();
        let col = qr.project(&e);
        for i in 0..n {
            h[(i, j)] = col[i];
        }
    }
    Ok(h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_design_returns_response() {
        let x = Matrix::<f64>::identity(2);
        let b = solve_least_squares(&x, &[3.0, -1.0]).unwrap();
        assert_abs_diff_eq!(b[0], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(b[1], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn intercept_only_gives_mean() {
        let x = Matrix::column(&[1.0, 1.0, 1.0]).unwrap();
        let b = solve_least_squares(&x, &[1.0, 2.0, 3.0]).unwrap();
        assert_abs_diff_eq!(b[0], 2.0, epsilon = 1e-14);
    }

    #[test]
    fn single_regressor_closed_form() {
        // (XᵀX)⁻¹Xᵀy = (1 + 12) / (1 + 4)
        let x = Matrix::column(&[1.0, 2.0]).unwrap();
        let b = solve_least_squares(&x, &[1.0, 6.0]).unwrap();
        assert_abs_diff_eq!(b[0], 13.0 / 5.0, epsilon = 1e-14);
    }

    #[test]
    fn rank_deficiency_reports_rank() {
        let x = Matrix::from_rows(&[[1.0, 2.0, 0.0], [2.0, 4.0, 1.0], [3.0, 6.0, 0.0], [4.0, 8.0, 2.0]])
            .unwrap();
        match solve_least_squares(&x, &[1.0, 2.0, 3.0, 4.0]) {
            Err(RegressionError::RankDeficient { rank, cols }) => {
                assert_eq!((rank, cols), (2, 3));
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
        assert!(solve_least_squares(&Matrix::<f64>::zeros(3, 1), &[1.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn wide_matrix_rejected() {
        let x = Matrix::<f64>::zeros(1, 2);
        assert!(matches!(
            solve_least_squares(&x, &[1.0]),
            Err(RegressionError::InvalidInput(_))
        ));
    }

    #[test]
    fn residual_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let (n, p) = (30, 6);
            let x = Matrix::from_fn(n, p, |_, _| rng.random_range(-1.0..1.0));
            let y: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let b = solve_least_squares(&x, &y).unwrap();
            let fit = x.matvec(&b).unwrap();
            let r: Vec<f64> = y.iter().zip(&fit).map(|(a, b)| a - b).collect();
            let xtr = x.t_matvec(&r).unwrap();
            let xty = x.t_matvec(&y).unwrap();
            let lhs = xtr.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let rhs = xty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(lhs <= 1e-8 * rhs, "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn hat_matrix_idempotent_and_matches_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = Matrix::from_fn(12, 3, |_, _| rng.random_range(-2.0..2.0));
        let h = hat_matrix(&x).unwrap();
        let hh = h.matmul(&h).unwrap();
        assert!(hh.max_abs_diff(&h) <= 1e-10);
        let v: Vec<f64> = (0..12).map(|i| i as f64 - 4.0).collect();
        let qr = qr_factor(&x).unwrap();
        let pv = qr.project(&v);
        let hv = h.matvec(&v).unwrap();
        for (a, b) in pv.iter().zip(&hv) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
        // Projection is a fixed point of itself.
        let ppv = qr.project(&pv);
        for (a, b) in pv.iter().zip(&ppv) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn weighted_solve_matches_row_scaling() {
        let x = Matrix::column(&[1.0, 1.0, 1.0]).unwrap();
        // Weighted mean with weights (1, 1, 2).
        let b = solve_weighted_least_squares(&x, &[1.0, 2.0, 4.0], &[1.0, 1.0, 2.0]).unwrap();
        assert_abs_diff_eq!(b[0], 11.0 / 4.0, epsilon = 1e-14);
    }

    #[test]
    fn works_in_single_precision() {
        let x = Matrix::<f32>::column(&[1.0, 2.0]).unwrap();
        let b = solve_least_squares(&x, &[1.0, 6.0]).unwrap();
        assert!((b[0] - 2.6).abs() < 1e-5);
    }
}
