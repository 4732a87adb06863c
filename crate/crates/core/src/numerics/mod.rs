//! Dense linear-algebra and order-statistics kernels.

mod eigen;
mod matrix;
mod qr;
mod quantile;

pub(crate) use eigen::default_start;
pub use eigen::{
    power_iteration, power_iteration_from, spectral_norm_symmetric, symmetric_eigenvalues,
    Eigenpair,
};
pub use matrix::{axpy, dot, mean_rows, norm2, norm_inf, scaled, sub, Matrix};
pub use qr::{hat_matrix, qr_factor, solve_least_squares, solve_weighted_least_squares, QrFactor};
pub use quantile::{empirical_quantile, max_value, min_value};
