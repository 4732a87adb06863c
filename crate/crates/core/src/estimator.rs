use crate::scalar::Scalar;

/// Output shared by every regression fit in the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorResult<T> {
    pub beta_hat: Vec<T>,
    pub iterations: usize,
    /// Objective of the method that produced the fit, evaluated at `beta_hat`.
    pub final_objective: T,
    /// Gradient norm at `beta_hat`, for the smooth (Huber) objective only.
    pub final_grad_norm: Option<T>,
    pub converged: bool,
    /// Accepted steps that increased the objective. Zero for a sound line search.
    pub nonmonotone_steps: usize,
    /// Stopped because the predicted decrease fell below the rounding level
    /// of the objective before the gradient tolerance was met.
    pub stalled: bool,
}

impl<T: Scalar> EstimatorResult<T> {
    pub(crate) fn direct(beta_hat: Vec<T>, final_objective: T) -> Self {
        Self {
            beta_hat,
            iterations: 0,
            final_objective,
            final_grad_norm: None,
            converged: true,
            nonmonotone_steps: 0,
            stalled: false,
        }
    }

    /// ℓ2 distance between the fitted coefficients and `beta`.
    pub fn l2_error(&self, beta: &[T]) -> T {
        self.beta_hat
            .iter()
            .zip(beta)
            .map(|(&a, &b)| (a - b) * (a - b))
            .sum::<T>()
            .sqrt()
    }
}
