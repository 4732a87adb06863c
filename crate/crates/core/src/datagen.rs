//! Seeded synthetic data: symmetrized-Pareto linear models, adversarial
//! corruption, and the discrete heavy-tail design used to lower-bound OLS.

use crate::error::{invalid_config, invalid_input, RegressionError, Result};
use crate::numerics::Matrix;
use crate::scalar::{floor_count, Scalar};
use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{Read, Write};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistributionKind {
    /// Density `∝ (1 + |x|)^{−(1+α)}`; the `k`-th moment is finite iff `k < α`.
    SymPareto { alpha: f64 },
    Gaussian { sigma: f64 },
    /// Three-point law on `{0, ±σ√(n/2τ)}`, each extreme with probability `τ/n`.
    OlsLowerBound { sigma: f64, n: usize, tau: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DistributionSpec {
    pub kind: DistributionKind,
    /// Variance multiplier: samples are scaled by `√covariance_scale`.
    pub covariance_scale: f64,
}

impl DistributionSpec {
    pub fn sym_pareto(alpha: f64) -> Self {
        Self::from_kind(DistributionKind::SymPareto { alpha })
    }

    pub fn gaussian(sigma: f64) -> Self {
        Self::from_kind(DistributionKind::Gaussian { sigma })
    }

    pub fn ols_lower_bound(sigma: f64, n: usize, tau: f64) -> Self {
        Self::from_kind(DistributionKind::OlsLowerBound { sigma, n, tau })
    }

    fn from_kind(kind: DistributionKind) -> Self {
        Self {
            kind,
            covariance_scale: 1.0,
        }
    }

    pub fn with_covariance_scale(mut self, scale: f64) -> Self {
        self.covariance_scale = scale;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.covariance_scale > 0.0 && self.covariance_scale.is_finite()) {
            return invalid_config(format!("covariance scale must be positive, got {}", self.covariance_scale));
        }
        match self.kind {
            DistributionKind::SymPareto { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                invalid_config(format!("Pareto alpha must be positive, got {alpha}"))
            }
            DistributionKind::Gaussian { sigma } if !(sigma >= 0.0 && sigma.is_finite()) => {
                invalid_config(format!("Gaussian sigma must be non-negative, got {sigma}"))
            }
            DistributionKind::OlsLowerBound { sigma, n, tau } => {
                if !(tau > 0.0 && tau <= 0.25) {
                    return invalid_config(format!("tau must lie in (0, 1/4], got {tau}"));
                }
                if n == 0 || !(sigma >= 0.0 && sigma.is_finite()) {
                    return invalid_config("lower-bound law needs n >= 1 and sigma >= 0");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    /// Draw one value. Call [`validate`](Self::validate) first.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let raw = match self.kind {
            DistributionKind::SymPareto { alpha } => {
                let u: f64 = rng.random();
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sym_pareto_transform(alpha, u, sign)
            }
            DistributionKind::Gaussian { sigma } => {
                let g: f64 = StandardNormal.sample(rng);
                sigma * g
            }
            DistributionKind::OlsLowerBound { sigma, n, tau } => {
                let extreme = sigma * (n as f64 / (2.0 * tau)).sqrt();
                let q = tau / n as f64;
                let u: f64 = rng.random();
                if u < q {
                    -extreme
                } else if u < 2.0 * q {
                    extreme
                } else {
                    0.0
                }
            }
        };
        raw * self.covariance_scale.sqrt()
    }
}

fn sym_pareto_transform(alpha: f64, u: f64, sign: f64) -> f64 {
    sign * ((1.0 - u).powf(-1.0 / alpha) - 1.0)
}

/// Inverse-CDF draw from the symmetrized Pareto law: `sign·((1−u)^{−1/α} − 1)`.
pub fn sample_sym_pareto(alpha: f64, u: f64, sign: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return invalid_config(format!("alpha must be positive, got {alpha}"));
    }
    if !(0.0..1.0).contains(&u) {
        return Err(RegressionError::Domain(format!("u must lie in [0, 1), got {u}")));
    }
    if sign != 1.0 && sign != -1.0 {
        return invalid_input(format!("sign must be +1 or -1, got {sign}"));
    }
    Ok(sym_pareto_transform(alpha, u, sign))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModelDraw<T> {
    pub x: Matrix<T>,
    pub y: Vec<T>,
    pub beta_star: Vec<T>,
    /// Sorted ascending.
    pub corrupted_indices: Vec<usize>,
}

impl<T: Scalar> LinearModelDraw<T> {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn is_corrupted(&self) -> Vec<bool> {
        let mut flags = vec![false; self.n()];
        for &i in &self.corrupted_indices {
            flags[i] = true;
        }
        flags
    }
}

fn unit_sphere<R: Rng + ?Sized>(p: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut *rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-12 {
            return v.iter().map(|x| x / norm).collect();
        }
    }
}

fn assemble<T: Scalar>(n: usize, p: usize, x: Vec<f64>, beta: Vec<f64>, z: Vec<f64>) -> Result<LinearModelDraw<T>> {
    let y: Vec<T> = (0..n)
        .map(|i| {
            let row = &x[i * p..(i + 1) * p];
            T::lit(row.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>() + z[i])
        })
        .collect();
    Ok(LinearModelDraw {
        x: Matrix::new(n, p, x.into_iter().map(T::lit).collect())?,
        y,
        beta_star: beta.into_iter().map(T::lit).collect(),
        corrupted_indices: Vec::new(),
    })
}

/// `y = Xβ* + z` with `β*` uniform on the unit sphere and i.i.d. entries.
///
/// Randomness is drawn in the order `β*`, `X` (row-major), `z`.
pub fn gen_linear_model<T: Scalar>(
    n: usize,
    p: usize,
    cov_spec: &DistributionSpec,
    noise_spec: &DistributionSpec,
    seed: u64,
) -> Result<LinearModelDraw<T>> {
    if n == 0 || p == 0 {
        return invalid_input(format!("need n >= 1 and p >= 1, got n = {n}, p = {p}"));
    }
    cov_spec.validate()?;
    noise_spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = unit_sphere(p, &mut rng);
    let x: Vec<f64> = (0..n * p).map(|_| cov_spec.sample(&mut rng)).collect();
    let z: Vec<f64> = (0..n).map(|_| noise_spec.sample(&mut rng)).collect();
    assemble(n, p, x, beta, z)
}

/// Covariates uniform on `{−1, 1}^p`, noise from the three-point lower-bound law.
pub fn gen_ols_lower_bound<T: Scalar>(n: usize, p: usize, sigma: f64, tau: f64, seed: u64) -> Result<LinearModelDraw<T>> {
    if p == 0 || n < 10 * p {
        return invalid_config(format!("lower-bound design needs n >= 10p, got n = {n}, p = {p}"));
    }
    let noise = DistributionSpec::ols_lower_bound(sigma, n, tau);
    noise.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta = unit_sphere(p, &mut rng);
    let x: Vec<f64> = (0..n * p)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect();
    let z: Vec<f64> = (0..n).map(|_| noise.sample(&mut rng)).collect();
    assemble(n, p, x, beta, z)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionSpec {
    pub epsilon: f64,
    /// `None` means `10·(1, …, 1)`.
    pub covariate_target: Option<Vec<f64>>,
    pub response_target: f64,
    pub covariate_fraction: f64,
}

impl CorruptionSpec {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            covariate_target: None,
            response_target: 200.0,
            covariate_fraction: 0.5,
        }
    }
}

/// Replace `⌊εn⌋` seeded-random responses by the response target; the first
/// `⌊fraction·εn⌋` chosen rows also get the covariate target.
pub fn corrupt_adversarial<T: Scalar>(
    draw: &LinearModelDraw<T>,
    spec: &CorruptionSpec,
    seed: u64,
) -> Result<LinearModelDraw<T>> {
    if !(0.0..0.5).contains(&spec.epsilon) {
        return invalid_config(format!("epsilon must lie in [0, 1/2), got {}", spec.epsilon));
    }
    if !(0.0..=1.0).contains(&spec.covariate_fraction) {
        return invalid_config("covariate fraction must lie in [0, 1]");
    }
    let (n, p) = draw.x.shape();
    let target: Vec<T> = match &spec.covariate_target {
        Some(t) if t.len() != p => return invalid_config("covariate target has the wrong dimension"),
        Some(t) => t.iter().map(|&v| T::lit(v)).collect(),
        None => vec![T::lit(10.0); p],
    };
    let eps_n = spec.epsilon * n as f64;
    let k = floor_count(eps_n);
    let k_cov = floor_count(spec.covariate_fraction * eps_n).min(k);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = sample_indices(&mut rng, n, k).into_vec();

    let mut out = draw.clone();
    for (pos, &i) in chosen.iter().enumerate() {
        out.y[i] = T::lit(spec.response_target);
        if pos < k_cov {
            out.x.row_mut(i).copy_from_slice(&target);
        }
    }
    let mut all: Vec<usize> = draw.corrupted_indices.iter().copied().chain(chosen).collect();
    all.sort_unstable();
    all.dedup();
    out.corrupted_indices = all;
    Ok(out)
}

/// Per-trial seed: a splitmix64 mix of `(seed, trial)`, so trials can run in any order.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed ^ splitmix64(trial.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Write `x1,…,xp,y,corrupted`.
pub fn write_csv<T: Scalar, W: Write>(draw: &LinearModelDraw<T>, writer: W) -> Result<()> {
    let p = draw.p();
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = (1..=p).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    header.push("corrupted".into());
    w.write_record(&header).map_err(io_err)?;
    let flags = draw.is_corrupted();
    for (i, row) in draw.x.row_iter().enumerate() {
        let mut rec: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        rec.push(draw.y[i].to_string());
        rec.push(if flags[i] { "1" } else { "0" }.into());
        w.write_record(&rec).map_err(io_err)?;
    }
    w.flush().map_err(|e| RegressionError::InvalidInput(e.to_string()))?;
    Ok(())
}

/// Data read back from CSV. `beta_star` is not stored, so it is left empty.
pub fn read_csv<T: Scalar, R: Read>(reader: R) -> Result<LinearModelDraw<T>> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers().map_err(io_err)?.clone();
    let cols: Vec<&str> = header.iter().collect();
    let y_pos = cols
        .iter()
        .position(|&c| c == "y")
        .ok_or_else(|| RegressionError::InvalidInput("missing `y` column".into()))?;
    let corrupted_pos = cols.iter().position(|&c| c == "corrupted");
    let x_pos: Vec<usize> = (0..cols.len())
        .filter(|&j| j != y_pos && Some(j) != corrupted_pos)
        .collect();
    if x_pos.is_empty() {
        return invalid_input("no covariate columns");
    }
    let parse = |s: &str, line: usize| -> Result<T> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| RegressionError::InvalidInput(format!("line {line}: cannot parse `{s}`")))?;
        Ok(T::lit(v))
    };
    let (mut data, mut y, mut corrupted) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(io_err)?;
        let line = i + 2;
        for &j in &x_pos {
            data.push(parse(&rec[j], line)?);
        }
        y.push(parse(&rec[y_pos], line)?);
        if let Some(c) = corrupted_pos {
            if rec[c].trim() == "1" {
                corrupted.push(i);
            }
        }
    }
    if y.is_empty() {
        return invalid_input("no data rows");
    }
    Ok(LinearModelDraw {
        x: Matrix::new(y.len(), x_pos.len(), data)?,
        y,
        beta_star: Vec::new(),
        corrupted_indices: corrupted,
    })
}

fn io_err(e: csv::Error) -> RegressionError {
    RegressionError::InvalidInput(e.to_string())
}
