use crate::error::{invalid_input, Result};
use crate::scalar::Scalar;
use std::cmp::Ordering;

fn cmp<T: Scalar>(a: &T, b: &T) -> Ordering {
    a.partial_cmp(b).unwrap_or(Ordering::Equal)
}

/// Lower empirical quantile: the `k`-th smallest value with `k = ⌈q·n⌉`
/// clamped to `[1, n]`, so `q = 0` gives the minimum.
pub fn empirical_quantile<T: Scalar>(values: &[T], q: f64) -> Result<T> {
    if values.is_empty() {
        return invalid_input("empirical quantile of an empty sample");
    }
    if !(0.0..=1.0).contains(&q) {
        return invalid_input(format!("quantile level {q} outside [0, 1]"));
    }
    let n = values.len();
    let k = ((q * n as f64).ceil() as usize).clamp(1, n);
    let mut buf = values.to_vec();
    let (_, kth, _) = buf.select_nth_unstable_by(k - 1, cmp);
    Ok(*kth)
}

pub fn max_value<T: Scalar>(values: &[T]) -> Result<T> {
    empirical_quantile(values, 1.0)
}

pub fn min_value<T: Scalar>(values: &[T]) -> Result<T> {
    empirical_quantile(values, 0.0)
}
