//! Monte-Carlo trial runner, OLS baseline and quantile-curve aggregation.

use crate::datagen::{
    corrupt_adversarial, gen_linear_model, gen_ols_lower_bound, trial_seed, CorruptionSpec, DistributionSpec,
    LinearModelDraw,
};
use crate::error::{invalid_config, invalid_input, RegressionError, Result};
use crate::estimator::EstimatorResult;
use crate::filtering::FilterConfig;
use crate::huber::{filtered_huber, fit_huber, huber_pipeline, GammaChoice, HuberConfig};
use crate::lad::{fit_lad, lad_pipeline, LadConfig};
use crate::lts::{fit_lts, lts_pipeline, LtsConfig};
use crate::numerics::{empirical_quantile, solve_least_squares, Matrix};
use crate::postprocess::{postprocess_estimate, PostprocessConfig};
use rayon::prelude::*;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

/// Ordinary least squares, reported with zero iterations and objective `½‖y − Xβ̂‖²`.
pub fn fit_ols(x: &Matrix<f64>, y: &[f64]) -> Result<EstimatorResult<f64>> {
    let beta = solve_least_squares(x, y)?;
    let fitted = x.matvec(&beta)?;
    let obj = 0.5 * fitted.iter().zip(y).map(|(f, v)| (v - f) * (v - f)).sum::<f64>();
    Ok(EstimatorResult::direct(beta, obj))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MethodKind {
    Ols,
    Huber,
    /// Filter raw covariates, then Huber.
    HuberFilter,
    /// Symmetrize pairs, filter, then Huber.
    HuberSym,
    Lts,
    LtsFilter,
    Lad,
    LadFilter,
}

impl MethodKind {
    const NAMES: [(&'static str, MethodKind); 8] = [
        ("ols", MethodKind::Ols),
        ("huber", MethodKind::Huber),
        ("huber-filter", MethodKind::HuberFilter),
        ("huber-sym", MethodKind::HuberSym),
        ("lts", MethodKind::Lts),
        ("lts-filter", MethodKind::LtsFilter),
        ("lad", MethodKind::Lad),
        ("lad-filter", MethodKind::LadFilter),
    ];

    pub fn name(self) -> &'static str {
        Self::NAMES.iter().find(|(_, k)| *k == self).map(|(s, _)| *s).unwrap_or("?")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub postprocess: bool,
}

impl MethodSpec {
    pub fn new(kind: MethodKind) -> Self {
        Self { kind, postprocess: false }
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.name())?;
        if self.postprocess {
            f.write_str("+post")?;
        }
        Ok(())
    }
}

impl FromStr for MethodSpec {
    type Err = RegressionError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (base, postprocess) = match s.strip_suffix("+post") {
            Some(b) => (b, true),
            None => (s, false),
        };
        MethodKind::NAMES
            .iter()
            .find(|(name, _)| *name == base)
            .map(|&(_, kind)| MethodSpec { kind, postprocess })
            .ok_or_else(|| RegressionError::InvalidConfig(format!("unknown method `{s}`")))
    }
}

pub fn parse_methods(list: &str) -> Result<Vec<MethodSpec>> {
    let methods: Vec<MethodSpec> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if methods.is_empty() {
        return invalid_config("method list is empty");
    }
    Ok(methods)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodParams {
    pub gamma: GammaChoice<f64>,
    pub trim_m: usize,
    pub filter_budget: usize,
    pub lts_max_iters: usize,
    /// Bucket fraction `ε′` for post-processing; the budget is `⌈0.2k⌉`.
    pub post_fraction: f64,
}

impl Default for MethodParams {
    fn default() -> Self {
        Self {
            gamma: GammaChoice::Fixed(0.5),
            trim_m: 30,
            filter_budget: 10,
            lts_max_iters: 100,
            post_fraction: 0.05,
        }
    }
}

/// Fit one method on one data set. `seed` drives γ estimation and post-processing.
pub fn fit_method(
    method: MethodSpec,
    x: &Matrix<f64>,
    y: &[f64],
    params: &MethodParams,
    seed: u64,
) -> Result<EstimatorResult<f64>> {
    let filter = FilterConfig::remove(params.filter_budget);
    let lts_cfg = LtsConfig::new(params.trim_m).with_max_iters(params.lts_max_iters);
    let gamma = match params.gamma {
        GammaChoice::Auto { c_star, .. } => GammaChoice::Auto { c_star, seed },
        fixed => fixed,
    };
    let huber_cfg = |x: &Matrix<f64>, y: &[f64]| -> Result<HuberConfig<f64>> { Ok(HuberConfig::new(gamma.resolve(x, y)?)) };
    let mut fit = match method.kind {
        MethodKind::Ols => fit_ols(x, y)?,
        MethodKind::Huber => fit_huber(x, y, &huber_cfg(x, y)?)?,
        MethodKind::HuberFilter => filtered_huber(x, y, &huber_cfg(x, y)?, &filter)?,
        MethodKind::HuberSym => huber_pipeline(x, y, gamma, &filter, &HuberConfig::new(1.0))?,
        MethodKind::Lts => fit_lts(x, y, &lts_cfg)?,
        MethodKind::LtsFilter => lts_pipeline(x, y, &lts_cfg, &filter)?,
        MethodKind::Lad => fit_lad(x, y, &LadConfig::default())?,
        MethodKind::LadFilter => lad_pipeline(x, y, &LadConfig::default(), &filter)?,
    };
    if method.postprocess {
        let cfg = PostprocessConfig::for_fraction(x.rows(), params.post_fraction, trial_seed(seed, 7));
        fit.beta_hat = postprocess_estimate(x, y, &fit.beta_hat, &cfg)?;
    }
    Ok(fit)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    Heavy,
    Adversarial { epsilon: f64 },
    OlsLowerBound { sigma: f64, tau: f64 },
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Heavy => "heavy",
            Scenario::Adversarial { .. } => "adversarial",
            Scenario::OlsLowerBound { .. } => "ols-lb",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub n: usize,
    pub p: usize,
    pub trials: usize,
    pub seed: u64,
    /// Ignored by the lower-bound scenario, which fixes its own laws.
    pub covariates: DistributionSpec,
    pub noise: DistributionSpec,
    pub methods: Vec<MethodSpec>,
    pub params: MethodParams,
    /// Worker count; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    /// Pareto(`alpha_x`) covariates and Pareto(`alpha_z`) noise.
    pub fn heavy(n: usize, p: usize, trials: usize, seed: u64, alpha_x: f64, alpha_z: f64) -> Self {
        Self {
            scenario: Scenario::Heavy,
            n,
            p,
            trials,
            seed,
            covariates: DistributionSpec::sym_pareto(alpha_x),
            noise: DistributionSpec::sym_pareto(alpha_z),
            methods: vec![MethodSpec::new(MethodKind::Ols)],
            params: MethodParams::default(),
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return invalid_config("need at least one trial");
        }
        if self.n == 0 || self.p == 0 {
            return invalid_config("n and p must be positive");
        }
        if self.methods.is_empty() {
            return invalid_config("method list is empty");
        }
        if self.threads == Some(0) {
            return invalid_config("thread count must be positive");
        }
        if let Scenario::Adversarial { epsilon } = self.scenario {
            if !(0.0..0.5).contains(&epsilon) {
                return invalid_config(format!("epsilon must lie in [0, 1/2), got {epsilon}"));
            }
        }
        self.covariates.validate()?;
        self.noise.validate()
    }

    fn draw(&self, seed: u64) -> Result<LinearModelDraw<f64>> {
        match self.scenario {
            Scenario::Heavy => gen_linear_model(self.n, self.p, &self.covariates, &self.noise, seed),
            Scenario::Adversarial { epsilon } => {
                let clean = gen_linear_model(self.n, self.p, &self.covariates, &self.noise, seed)?;
                corrupt_adversarial(&clean, &CorruptionSpec::new(epsilon), trial_seed(seed, 1))
            }
            Scenario::OlsLowerBound { sigma, tau } => gen_ols_lower_bound(self.n, self.p, sigma, tau, seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub method: String,
    /// `None` when the fit failed.
    pub error: Option<f64>,
    /// `ok`, `stalled`, `unconverged`, or an error code.
    pub status: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrialTable {
    pub records: Vec<TrialRecord>,
    /// Accepted line-search steps that increased the objective, summed over all fits.
    pub descent_violations: usize,
}

impl TrialTable {
    pub fn errors_for(&self, method: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method)
            .filter_map(|r| r.error)
            .collect()
    }

    pub fn methods(&self) -> Vec<String> {
        let mut seen: Vec<String> = Vec::new();
        for r in &self.records {
            if !seen.contains(&r.method) {
                seen.push(r.method.clone());
            }
        }
        seen
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["trial", "method", "error", "status"]).map_err(csv_err)?;
        for r in &self.records {
            let err = r.error.map(|e| e.to_string()).unwrap_or_default();
            w.write_record([r.trial.to_string(), r.method.clone(), err, r.status.clone()])
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| RegressionError::InvalidInput(e.to_string()))
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let header: Vec<String> = r.headers().map_err(csv_err)?.iter().map(str::to_owned).collect();
        if header != ["trial", "method", "error", "status"] {
            return invalid_input(format!("unexpected results header {header:?}"));
        }
        let mut records = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let bad = |what: &str| RegressionError::InvalidInput(format!("line {}: bad {what}", i + 2));
            let trial = rec[0].trim().parse().map_err(|_| bad("trial"))?;
            let error = match rec[2].trim() {
                "" => None,
                s => Some(s.parse::<f64>().map_err(|_| bad("error"))?),
            };
            records.push(TrialRecord {
                trial,
                method: rec[1].to_owned(),
                error,
                status: rec[3].to_owned(),
            });
        }
        Ok(Self {
            records,
            descent_violations: 0,
        })
    }
}

fn csv_err(e: csv::Error) -> RegressionError {
    RegressionError::InvalidInput(e.to_string())
}

fn run_one(cfg: &ExperimentConfig, trial: usize) -> (Vec<TrialRecord>, usize) {
    let seed = trial_seed(cfg.seed, trial as u64);
    let mut violations = 0;
    let draw = match cfg.draw(seed) {
        Ok(d) => d,
        Err(e) => {
            let records = cfg
                .methods
                .iter()
                .map(|m| TrialRecord {
                    trial,
                    method: m.to_string(),
                    error: None,
                    status: e.code().to_owned(),
                })
                .collect();
            return (records, 0);
        }
    };
    let records = cfg
        .methods
        .iter()
        .map(|&m| {
            let (error, status) = match fit_method(m, &draw.x, &draw.y, &cfg.params, trial_seed(seed, 2)) {
                Ok(fit) => {
                    violations += fit.nonmonotone_steps;
                    let e = fit.l2_error(&draw.beta_star);
                    if !e.is_finite() {
                        (None, "numerical_failure")
                    } else if fit.converged {
                        (Some(e), "ok")
                    } else if fit.stalled {
                        (Some(e), "stalled")
                    } else {
                        (Some(e), "unconverged")
                    }
                }
                Err(e) => (None, e.code()),
            };
            TrialRecord {
                trial,
                method: m.to_string(),
                error,
                status: status.to_owned(),
            }
        })
        .collect();
    (records, violations)
}

/// Run every trial and method. The table is identical for any worker count.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<TrialTable> {
    cfg.validate()?;
    let work = || -> Vec<(Vec<TrialRecord>, usize)> {
        (0..cfg.trials).into_par_iter().map(|t| run_one(cfg, t)).collect()
    };
    let per_trial = match cfg.threads {
        Some(k) => rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build()
            .map_err(|e| RegressionError::InvalidConfig(e.to_string()))?
            .install(work),
        None => work(),
    };
    let mut table = TrialTable::default();
    for (records, v) in per_trial {
        table.records.extend(records);
        table.descent_violations += v;
    }
    Ok(table)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantileCurve {
    pub method: String,
    /// `(τ, error quantile at 1 − τ)`, in grid order.
    pub points: Vec<(f64, f64)>,
    pub missing: usize,
}

impl QuantileCurve {
    pub fn at(&self, tau: f64) -> Option<f64> {
        self.points.iter().find(|(t, _)| *t == tau).map(|&(_, v)| v)
    }
}

pub fn validate_tau_grid(tau_grid: &[f64]) -> Result<()> {
    if tau_grid.is_empty() {
        return invalid_config("tau grid is empty");
    }
    if let Some(t) = tau_grid.iter().find(|t| !(**t > 0.0 && **t < 1.0)) {
        return invalid_config(format!("tau values must lie in (0, 1), got {t}"));
    }
    if tau_grid.windows(2).any(|w| w[0] >= w[1]) {
        return invalid_config("tau grid must be sorted strictly ascending");
    }
    Ok(())
}

/// Per-method curves of `τ ↦ quantile_{1−τ}(error)`. Methods with no finite
/// error are omitted and named in the returned warnings.
pub fn quantile_curve(table: &TrialTable, tau_grid: &[f64]) -> Result<(Vec<QuantileCurve>, Vec<String>)> {
    validate_tau_grid(tau_grid)?;
    let mut curves = Vec::new();
    let mut warnings = Vec::new();
    for method in table.methods() {
        let rows: Vec<&TrialRecord> = table.records.iter().filter(|r| r.method == method).collect();
        let finite: Vec<f64> = rows.iter().filter_map(|r| r.error).filter(|e| e.is_finite()).collect();
        let missing = rows.len() - finite.len();
        if finite.is_empty() {
            warnings.push(format!("method `{method}` has no finite errors; omitted"));
            continue;
        }
        let points = tau_grid
            .iter()
            .map(|&t| Ok((t, empirical_quantile(&finite, 1.0 - t)?)))
            .collect::<Result<_>>()?;
        curves.push(QuantileCurve { method, points, missing });
    }
    Ok((curves, warnings))
}

pub fn write_curves_csv<W: Write>(curves: &[QuantileCurve], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "tau", "quantile_error"]).map_err(csv_err)?;
    for c in curves {
        for (t, v) in &c.points {
            w.write_record([c.method.clone(), t.to_string(), v.to_string()])
                .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| RegressionError::InvalidInput(e.to_string()))
}
