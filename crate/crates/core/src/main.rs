use clap::{Args, Parser, Subcommand, ValueEnum};
use robustreg::datagen::{read_csv, DistributionSpec, LinearModelDraw};
use robustreg::experiments::{
    fit_method, parse_methods, quantile_curve, run_trials, write_curves_csv, ExperimentConfig, MethodKind,
    MethodParams, MethodSpec, Scenario, TrialTable,
};
use robustreg::filtering::{filter_covariates, Centering, FilterConfig, FilterMode};
use robustreg::huber::GammaChoice;
use robustreg::stability::{
    check_strong_stability, l1_stability_estimate, ssc_sss_params, weak_stability_params, StrongStabilityQuery,
};
use robustreg::{RegressionError, Result};
use serde_json::json;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "robustreg", version, about = "Robust regression with covariate filtering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte-Carlo experiment and write per-trial errors.
    Simulate(SimulateArgs),
    /// Fit one estimator to a CSV data set.
    Fit(FitArgs),
    /// Run the spectral covariate filter on a CSV data set.
    Filter(FilterArgs),
    /// Certify stability properties of the covariates in a CSV data set.
    Certify(CertifyArgs),
    /// Aggregate a results table into error-quantile curves.
    Quantiles(QuantilesArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    Heavy,
    Adversarial,
    OlsLb,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    scenario: ScenarioArg,
    #[arg(long, default_value_t = 200)]
    n: usize,
    #[arg(long, default_value_t = 40)]
    p: usize,
    #[arg(long, default_value_t = 2000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2.0)]
    alpha_x: f64,
    #[arg(long, default_value_t = 2.0)]
    alpha_z: f64,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    /// Noise scale for the ols-lb scenario.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Failure probability for the ols-lb scenario.
    #[arg(long, default_value_t = 0.05)]
    tau: f64,
    #[arg(long, default_value = "ols,huber,huber-filter,lts,lts-filter")]
    methods: String,
    /// Huber transition point, or `auto`.
    #[arg(long, default_value = "0.5")]
    gamma: String,
    #[arg(long, default_value_t = 30)]
    trim_m: usize,
    #[arg(long, default_value_t = 10)]
    filter_remove: usize,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    input: PathBuf,
    /// Huber transition point, or `auto`.
    #[arg(long, default_value = "auto")]
    gamma: String,
    /// LTS trimming level; defaults to ⌈0.1n⌉.
    #[arg(long)]
    trim_m: Option<usize>,
    #[arg(long, default_value_t = 0)]
    filter_remove: usize,
    /// Symmetrize pairs before filtering (Huber only).
    #[arg(long)]
    symmetrize: bool,
    #[arg(long)]
    postprocess: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FilterModeArg {
    /// Remove exactly K points.
    Exact,
    /// Stop once the top eigenvalue falls to the threshold.
    Spectral,
}

#[derive(Args)]
struct FilterArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    remove: usize,
    #[arg(long, value_enum, default_value = "exact")]
    mode: FilterModeArg,
    #[arg(long, default_value_t = 1.5)]
    threshold: f64,
    /// Recenter on the survivors' mean every round.
    #[arg(long)]
    recenter: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CertifyKind {
    Strong,
    Weak,
    SscSss,
    L1,
}

#[derive(Args)]
struct CertifyArgs {
    #[arg(long, value_enum)]
    kind: CertifyKind,
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    eps: f64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    level: Option<usize>,
    #[arg(long, default_value_t = 256)]
    directions: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct QuantilesArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.001,0.01,0.1,0.5")]
    tau: Vec<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn io_error(path: &Path, e: std::io::Error) -> RegressionError {
    RegressionError::InvalidInput(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| io_error(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn emit_json(value: &serde_json::Value, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value).expect("JSON values always serialize");
    match out {
        Some(path) => {
            let mut w = create(path)?;
            writeln!(w, "{text}").map_err(|e| io_error(path, e))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn parse_gamma(s: &str) -> Result<GammaChoice<f64>> {
    if s == "auto" {
        return Ok(GammaChoice::auto(0));
    }
    match s.parse::<f64>() {
        Ok(g) if g > 0.0 && g.is_finite() => Ok(GammaChoice::Fixed(g)),
        _ => Err(RegressionError::InvalidConfig(format!("gamma must be positive or `auto`, got `{s}`"))),
    }
}

fn load(path: &Path) -> Result<LinearModelDraw<f64>> {
    read_csv(open(path)?)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scenario = match a.scenario {
        ScenarioArg::Heavy => Scenario::Heavy,
        ScenarioArg::Adversarial => Scenario::Adversarial { epsilon: a.eps },
        ScenarioArg::OlsLb => Scenario::OlsLowerBound {
            sigma: a.sigma,
            tau: a.tau,
        },
    };
    let cfg = ExperimentConfig {
        scenario,
        n: a.n,
        p: a.p,
        trials: a.trials,
        seed: a.seed,
        covariates: DistributionSpec::sym_pareto(a.alpha_x),
        noise: DistributionSpec::sym_pareto(a.alpha_z),
        methods: parse_methods(&a.methods)?,
        params: MethodParams {
            gamma: parse_gamma(&a.gamma)?,
            trim_m: a.trim_m,
            filter_budget: a.filter_remove,
            ..MethodParams::default()
        },
        threads: a.threads,
    };
    let table = run_trials(&cfg)?;
    table.write_csv(create(&a.out)?)?;
    let failed = table.records.iter().filter(|r| r.error.is_none()).count();
    eprintln!(
        "{} trials, {} records ({failed} missing), {} non-monotone line-search steps",
        cfg.trials,
        table.records.len(),
        table.descent_violations
    );
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let data = load(&a.input)?;
    let n = data.n();
    let base: MethodSpec = a.method.parse()?;
    let filtered = a.filter_remove > 0;
    let kind = match (base.kind, filtered, a.symmetrize) {
        (MethodKind::Huber, _, true) => MethodKind::HuberSym,
        (_, _, true) => return Err(RegressionError::InvalidConfig("--symmetrize applies to huber only".into())),
        (MethodKind::Huber, true, _) => MethodKind::HuberFilter,
        (MethodKind::Lts, true, _) => MethodKind::LtsFilter,
        (MethodKind::Lad, true, _) => MethodKind::LadFilter,
        (MethodKind::Ols, true, _) => {
            return Err(RegressionError::InvalidConfig("ols does not take a filter budget".into()))
        }
        (k, _, _) => k,
    };
    let method = MethodSpec {
        kind,
        postprocess: a.postprocess || base.postprocess,
    };
    let params = MethodParams {
        gamma: parse_gamma(&a.gamma)?,
        trim_m: a.trim_m.unwrap_or_else(|| n.div_ceil(10)),
        filter_budget: a.filter_remove,
        ..MethodParams::default()
    };
    let result = fit_method(method, &data.x, &data.y, &params, a.seed)?;
    let mut doc = json!({
        "method": method.to_string(),
        "beta_hat": result.beta_hat,
        "iterations": result.iterations,
        "objective": result.final_objective,
        "converged": result.converged,
    });
    if method.postprocess {
        // The initial estimate was fitted on the same sample.
        doc["postprocess_regime"] = json!("same-sample");
    }
    emit_json(&doc, a.out.as_deref())
}

fn filter(a: FilterArgs) -> Result<()> {
    let data = load(&a.input)?;
    let cfg = FilterConfig::remove(a.remove)
        .with_mode(match a.mode {
            FilterModeArg::Exact => FilterMode::RemoveExactly,
            FilterModeArg::Spectral => FilterMode::StopEarly,
        })
        .with_center(if a.recenter { Centering::Recenter } else { Centering::ZeroMean })
        .with_threshold(a.threshold);
    let report = filter_covariates(&data.x, &cfg)?;
    let trace: Vec<_> = report
        .removal_trace
        .iter()
        .map(|r| json!({"index": r.index, "score": r.score, "top_eigenvalue": r.top_eigenvalue}))
        .collect();
    let doc = json!({
        "surviving_indices": report.surviving_indices,
        "removed_indices": report.removed_indices(),
        "removal_trace": trace,
        "final_top_eigenvalue": report.final_top_eigenvalue,
        "unconverged_rounds": report.unconverged_rounds,
    });
    emit_json(&doc, a.out.as_deref())
}

fn certify(a: CertifyArgs) -> Result<()> {
    let data = load(&a.input)?;
    let (n, p) = data.x.shape();
    let doc = match a.kind {
        CertifyKind::Strong => {
            let q = StrongStabilityQuery {
                epsilon: a.eps,
                delta: a.delta,
                mu: vec![0.0; p],
                sigma2: a.sigma2,
            };
            let r = check_strong_stability(&data.x, &q)?;
            json!({
                "kind": "strong",
                "pass": r.pass,
                "worst_mean_dev": r.worst_mean_dev,
                "worst_spectral_dev": r.worst_spectral_dev,
                "subsets_checked": r.subsets_checked,
            })
        }
        CertifyKind::Weak => {
            let w = weak_stability_params(&data.x, a.eps)?;
            json!({"kind": "weak", "epsilon": w.epsilon, "lower": w.lower, "upper": w.upper, "exact": w.exact})
        }
        CertifyKind::SscSss => {
            let m = a.level.unwrap_or(n);
            let s = ssc_sss_params(&data.x, m)?;
            json!({"kind": "ssc-sss", "level": s.level, "ssc": s.ssc, "sss": s.sss})
        }
        CertifyKind::L1 => {
            let e = l1_stability_estimate(&data.x, a.eps, a.directions, a.seed)?;
            json!({
                "kind": "l1",
                "epsilon": e.epsilon,
                "m_upper": e.m_upper,
                "big_m_lower": e.big_m_lower,
                "directions_sampled": e.directions_sampled,
                "exact": e.exact,
            })
        }
    };
    emit_json(&doc, a.out.as_deref())
}

fn quantiles(a: QuantilesArgs) -> Result<()> {
    let table = TrialTable::read_csv(open(&a.input)?)?;
    let (curves, warnings) = quantile_curve(&table, &a.tau)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    for c in &curves {
        if c.missing > 0 {
            eprintln!("{}: {} missing values excluded", c.method, c.missing);
        }
    }
    write_curves_csv(&curves, create(&a.out)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Filter(a) => filter(a),
        Command::Certify(a) => certify(a),
        Command::Quantiles(a) => quantiles(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
