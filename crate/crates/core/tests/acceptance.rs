//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use robustreg::datagen::{gen_linear_model, DistributionSpec, LinearModelDraw};
use robustreg::experiments::{parse_methods, quantile_curve, run_trials, ExperimentConfig, Scenario, TrialTable};
use robustreg::huber::{estimate_gamma, huber_objective_grad};
use robustreg::lad::{fit_lad, l1_objective, LadConfig};
use robustreg::lts::{fit_lts, hard_threshold, LtsConfig};
use robustreg::postprocess::{postprocess_estimate, PostprocessConfig};
use robustreg::stability::{
    check_strong_stability, l1_stability_estimate, strong_to_weak, weak_stability_params, StrongStabilityQuery,
};
use robustreg::Matrix64;
use std::process::Command;
use std::time::Instant;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn quantile(table: &TrialTable, method: &str, tau: f64) -> f64 {
    let (curves, _) = quantile_curve(table, &[tau]).unwrap();
    curves.iter().find(|c| c.method == method).and_then(|c| c.at(tau)).unwrap_or(f64::NAN)
}

fn extreme(table: &TrialTable, method: &str, max: bool) -> f64 {
    let e = table.errors_for(method);
    if max {
        e.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    } else {
        e.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn missing(table: &TrialTable) -> usize {
    table.records.iter().filter(|r| r.error.is_none()).count()
}

fn heavy_table() -> (TrialTable, f64) {
    let mut cfg = ExperimentConfig::heavy(200, 40, 2000, 20_240_601, 2.0, 2.0);
    cfg.methods = parse_methods("ols,huber,huber-filter,lts,lts-filter").unwrap();
    cfg.params.filter_budget = 10;
    cfg.params.trim_m = 30;
    let start = Instant::now();
    let t = run_trials(&cfg).unwrap();
    (t, start.elapsed().as_secs_f64())
}

const TAUS: [f64; 3] = [0.2, 0.05, 0.01];

fn filtered_dominates(table: &TrialTable, plain: &str, filtered: &str) -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for tau in TAUS {
        let (p, f) = (quantile(table, plain, tau), quantile(table, filtered, tau));
        ok &= if tau == 0.01 { f < p } else { f <= p };
        parts.push(format!("tau={tau}: {f:.3} vs {p:.3}"));
    }
    (ok, parts.join(", "))
}

fn criterion_1(table: &TrialTable, secs: f64) -> Outcome {
    let (dom, detail) = filtered_dominates(table, "huber", "huber-filter");
    let q02 = quantile(table, "huber-filter", 0.2);
    let ols_max = extreme(table, "ols", true);
    let pass = dom && q02 < 1.1 && ols_max > 3.0 && table.descent_violations == 0;
    outcome(
        pass,
        format!(
            "filtered vs plain Huber [{detail}]; filtered q(0.2)={q02:.3}; OLS max={ols_max:.2}; \
             missing={}; non-monotone steps={}; {secs:.1}s",
            missing(table),
            table.descent_violations
        ),
    )
}

fn criterion_2(table: &TrialTable) -> Outcome {
    let (dom, detail) = filtered_dominates(table, "lts", "lts-filter");
    outcome(dom, format!("filtered vs plain LTS [{detail}]"))
}

fn criterion_3() -> Outcome {
    let mut cfg = ExperimentConfig::heavy(200, 40, 500, 20_240_602, 4.0, 2.0);
    cfg.scenario = Scenario::Adversarial { epsilon: 0.1 };
    cfg.methods = parse_methods("ols,huber,huber-filter,lts,lts-filter").unwrap();
    cfg.params.filter_budget = 30;
    cfg.params.trim_m = 30;
    let start = Instant::now();
    let t = run_trials(&cfg).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let hf = median(t.errors_for("huber-filter"));
    let lf = median(t.errors_for("lts-filter"));
    let ols_min = extreme(&t, "ols", false);
    let lts_max = extreme(&t, "lts", true);
    let pass = hf < 2.0 && lf < 2.0 && ols_min > 10.0 && lts_max > 5.0 && t.descent_violations == 0;
    outcome(
        pass,
        format!(
            "median filtered Huber={hf:.3}, filtered LTS={lf:.3}; OLS min={ols_min:.2}; LTS max={lts_max:.2}; \
             missing={}; non-monotone steps={}; {secs:.1}s",
            missing(&t),
            t.descent_violations
        ),
    )
}

fn criterion_4() -> Outcome {
    let (n, p, sigma, tau) = (100, 5, 1.0, 0.05);
    let mut cfg = ExperimentConfig::heavy(n, p, 20_000, 20_240_603, 2.0, 2.0);
    cfg.scenario = Scenario::OlsLowerBound { sigma, tau };
    let t = run_trials(&cfg).unwrap();
    let threshold = p as f64 * sigma * sigma / (8.0 * n as f64 * tau);
    let errs = t.errors_for("ols");
    let hits = errs.iter().filter(|&&e| e * e >= threshold).count();
    let freq = hits as f64 / 20_000.0;
    outcome(
        freq >= tau / 2.0 && errs.len() == 20_000,
        format!("P(err^2 >= {threshold}) = {freq:.4} (need >= {})", tau / 2.0),
    )
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, p: usize) -> Matrix64 {
    Matrix64::from_fn(n, p, |_, _| StandardNormal.sample(&mut *rng))
}

fn criterion_5() -> Outcome {
    let (n, p) = (200, 10);
    let mut good = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(50_000 + seed);
        let x = gaussian_matrix(&mut rng, n, p);
        let beta: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut y = x.matvec(&beta).unwrap();
        for i in sample_indices(&mut rng, n, 20) {
            y[i] = 100.0;
        }
        let fit = fit_lts(&x, &y, &LtsConfig::new(30).with_max_iters(50)).unwrap();
        let err = fit.l2_error(&beta);
        worst = worst.max(err);
        if err <= 1e-6 {
            good += 1;
        }
    }
    outcome(good >= 99, format!("{good}/100 seeds with error <= 1e-6 (worst {worst:.2e})"))
}

fn norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn criterion_6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = 0;
    let mut comparisons = 0u64;
    for inst in 0..500 {
        let n = rng.random_range(1..=8usize);
        let m = rng.random_range(0..=n);
        // Every other instance draws from a small integer grid to force ties.
        let a: Vec<f64> = (0..n)
            .map(|_| {
                if inst % 2 == 0 {
                    rng.random_range(-3..=3) as f64
                } else {
                    StandardNormal.sample(&mut rng)
                }
            })
            .collect();
        let b = hard_threshold(&a, m).unwrap();
        let support: u32 = (0..n).filter(|&i| b[i] != 0.0).fold(0, |acc, i| acc | (1 << i));
        for s in 0u32..(1 << n) {
            if s & support != support {
                continue;
            }
            let a_s: Vec<f64> = (0..n).map(|i| if s >> i & 1 == 1 { a[i] } else { 0.0 }).collect();
            let lhs = norm_diff(&b, &a_s);
            for c_supp in 0u32..(1 << n) {
                if c_supp.count_ones() as usize > m {
                    continue;
                }
                // The closest m-sparse c on this support agrees with a_S there.
                let c: Vec<f64> = (0..n).map(|i| if c_supp >> i & 1 == 1 { a_s[i] } else { 0.0 }).collect();
                comparisons += 1;
                if lhs > norm_diff(&c, &a_s) + 1e-12 {
                    violations += 1;
                }
            }
        }
    }
    outcome(violations == 0, format!("{violations} violations over {comparisons} comparisons"))
}

/// Brute-force LAD over all interpolating p-subsets, p ≤ 2, by Cramer's rule.
fn vertex_min(x: &Matrix64, y: &[f64]) -> Option<f64> {
    let (n, p) = x.shape();
    let obj = |beta: &[f64]| -> f64 {
        (0..n)
            .map(|i| (y[i] - x.row(i).iter().zip(beta).map(|(a, b)| a * b).sum::<f64>()).abs())
            .sum()
    };
    let mut best: Option<f64> = None;
    let mut consider = |beta: Vec<f64>| {
        let v = obj(&beta);
        best = Some(best.map_or(v, |b: f64| b.min(v)));
    };
    if p == 1 {
        for i in 0..n {
            let a = x[(i, 0)];
            if a.abs() > 1e-12 {
                consider(vec![y[i] / a]);
            }
        }
    } else {
        for i in 0..n {
            for j in i + 1..n {
                let (a, b, c, d) = (x[(i, 0)], x[(i, 1)], x[(j, 0)], x[(j, 1)]);
                let det = a * d - b * c;
                if det.abs() > 1e-12 {
                    consider(vec![(y[i] * d - b * y[j]) / det, (a * y[j] - c * y[i]) / det]);
                }
            }
        }
    }
    best
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    let mut done = 0;
    while done < 200 {
        let p = rng.random_range(1..=2usize);
        let n = rng.random_range(p + 1..=8usize);
        let x = gaussian_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                if rng.random_bool(0.2) {
                    z * 20.0
                } else {
                    z
                }
            })
            .collect();
        let Some(oracle) = vertex_min(&x, &y) else { continue };
        let Ok(fit) = fit_lad(&x, &y, &LadConfig::default()) else {
            failures += 1;
            done += 1;
            continue;
        };
        let gap = (l1_objective(&x, &y, &fit.beta_hat) - oracle).abs();
        worst = worst.max(gap);
        if gap > 1e-6 {
            failures += 1;
        }
        done += 1;
    }
    outcome(failures == 0, format!("{failures}/200 instances off by > 1e-6 (worst gap {worst:.2e})"))
}

/// Rescale rows so the sample has zero mean and identity second moment.
fn whiten(x: &Matrix64) -> Matrix64 {
    let (n, p) = x.shape();
    let mean: Vec<f64> = (0..p).map(|j| (0..n).map(|i| x[(i, j)]).sum::<f64>() / n as f64).collect();
    let c = Matrix64::from_fn(n, p, |i, j| x[(i, j)] - mean[j]);
    // Cholesky of the empirical covariance, then solve against it row by row.
    let cov = Matrix64::from_fn(p, p, |a, b| (0..n).map(|i| c[(i, a)] * c[(i, b)]).sum::<f64>() / n as f64);
    let mut l = vec![vec![0.0; p]; p];
    for i in 0..p {
        for j in 0..=i {
            let s: f64 = cov[(i, j)] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            l[i][j] = if i == j { s.sqrt() } else { s / l[j][j] };
        }
    }
    let mut out = Matrix64::zeros(n, p);
    for i in 0..n {
        for j in 0..p {
            let s: f64 = c[(i, j)] - (0..j).map(|k| l[j][k] * out[(i, k)]).sum::<f64>();
            out[(i, j)] = s / l[j][j];
        }
    }
    out
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut passes, mut violations) = (0, 0);
    for _ in 0..200 {
        let p = rng.random_range(1..=3usize);
        let n = rng.random_range(4.max(2 * p)..=12usize);
        let x = whiten(&gaussian_matrix(&mut rng, n, p));
        let eps = [0.1, 0.2, 0.3][rng.random_range(0..3)];
        let delta = eps + rng.random::<f64>() * (1.5 - eps);
        let q = StrongStabilityQuery::standard(p, eps, delta);
        let report = check_strong_stability(&x, &q).unwrap();
        if !report.pass {
            continue;
        }
        passes += 1;
        let ratio = delta * delta / eps;
        let weak = weak_stability_params(&x, eps).unwrap();
        if weak.upper > 1.0 + ratio + 1e-9 {
            violations += 1;
        }
        if let Ok(implied) = strong_to_weak(eps, delta) {
            if weak.lower < implied.lower - 1e-9 {
                violations += 1;
            }
        }
        let l1 = l1_stability_estimate(&x, eps, 64, rng.random()).unwrap();
        if l1.m_upper > 2.0 * delta + 1e-9 {
            violations += 1;
        }
    }
    outcome(
        violations == 0 && passes > 0,
        format!("{violations} violations among {passes} strong-stability passes"),
    )
}

fn criterion_9() -> Outcome {
    let (n, p, c_star) = (2000, 10, 0.1);
    let cov = DistributionSpec::gaussian(1.0);
    let noise = DistributionSpec::sym_pareto(2.0);
    // E|z| = 1/(α−1) for the symmetrized Pareto law.
    let mean_abs = 1.0;
    let (mut tail_ok, mut size_ok) = (0, 0);
    let mut worst_tail: f64 = 0.0;
    for rep in 0..200u64 {
        let d: LinearModelDraw<f64> = gen_linear_model(n, p, &cov, &noise, 90_000 + rep).unwrap();
        let gamma = estimate_gamma(&d.x, &d.y, c_star, rep).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(190_000 + rep);
        let fresh = 100_000;
        let cut = gamma / 2f64.sqrt();
        let hits = (0..fresh)
            .filter(|_| (noise.sample(&mut rng) - noise.sample(&mut rng)).abs() >= cut)
            .count();
        let tail = hits as f64 / fresh as f64;
        worst_tail = worst_tail.max(tail);
        tail_ok += (tail < c_star) as usize;
        size_ok += (gamma <= 20.0 * mean_abs) as usize;
    }
    outcome(
        tail_ok >= 190 && size_ok >= 190,
        format!("tail < c* in {tail_ok}/200 (worst {worst_tail:.4}); gamma <= 20 E|z| in {size_ok}/200"),
    )
}

fn criterion_10() -> Outcome {
    let (n, p) = (2000, 10);
    // Var of the α = 4 law is 1/3; scale to identity covariance.
    let cov = DistributionSpec::sym_pareto(4.0).with_covariance_scale(3.0);
    let noise = DistributionSpec::sym_pareto(3.0);
    let mut lad_err = Vec::new();
    let mut post_err = Vec::new();
    for trial in 0..300u64 {
        let d: LinearModelDraw<f64> = gen_linear_model(n, p, &cov, &noise, 100_000 + trial).unwrap();
        // The initial estimate comes from an independent sample with the same β*.
        let mut aux: LinearModelDraw<f64> = gen_linear_model(n, p, &cov, &noise, 200_000 + trial).unwrap();
        let own = aux.x.matvec(&aux.beta_star).unwrap();
        let target = aux.x.matvec(&d.beta_star).unwrap();
        for i in 0..n {
            aux.y[i] += target[i] - own[i];
        }
        let beta1 = fit_lad(&aux.x, &aux.y, &LadConfig::default()).unwrap().beta_hat;
        let k = (0.05 * n as f64).ceil() as usize;
        let cfg = PostprocessConfig {
            buckets: k,
            filter_budget: (0.1 * k as f64).ceil() as usize,
            seed: trial,
        };
        let beta2 = postprocess_estimate(&d.x, &d.y, &beta1, &cfg).unwrap();
        lad_err.push(norm_diff(&beta1, &d.beta_star));
        post_err.push(norm_diff(&beta2, &d.beta_star));
    }
    let (ml, mp) = (median(lad_err), median(post_err));
    outcome(mp < ml, format!("median error postprocessed={mp:.4} vs LAD initial={ml:.4}"))
}

fn criterion_11() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    while checked < 100 {
        let (n, p) = (rng.random_range(5..40usize), rng.random_range(1..6usize));
        let x = gaussian_matrix(&mut rng, n, p);
        let y: Vec<f64> = (0..n).map(|_| 3.0 * normal(&mut rng)).collect();
        let beta: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let gamma = 0.2 + rng.random::<f64>();
        let h = 1e-6;
        let r = x.matvec(&beta).unwrap();
        // Skip draws where a residual sits within the probe distance of the knee.
        let margin = h * 10.0 * (1.0 + x.as_slice().iter().fold(0.0f64, |m, v| m.max(v.abs())));
        if r.iter().zip(&y).any(|(f, v)| ((v - f).abs() - gamma).abs() < margin) {
            continue;
        }
        let (_, grad) = huber_objective_grad(&x, &y, &beta, gamma).unwrap();
        let fd: Vec<f64> = (0..p)
            .map(|j| {
                let mut up = beta.clone();
                let mut dn = beta.clone();
                up[j] += h;
                dn[j] -= h;
                let (fu, _) = huber_objective_grad(&x, &y, &up, gamma).unwrap();
                let (fl, _) = huber_objective_grad(&x, &y, &dn, gamma).unwrap();
                (fu - fl) / (2.0 * h)
            })
            .collect();
        let scale = grad.iter().map(|g| g * g).sum::<f64>().sqrt().max(1.0);
        worst = worst.max(norm_diff(&grad, &fd) / scale);
        checked += 1;
    }

    let mut cfg = ExperimentConfig::heavy(200, 40, 200, 20_240_611, 2.0, 2.0);
    cfg.methods = parse_methods("huber,huber-filter,huber-sym").unwrap();
    let heavy = run_trials(&cfg).unwrap();
    cfg.scenario = Scenario::Adversarial { epsilon: 0.1 };
    cfg.covariates = DistributionSpec::sym_pareto(4.0);
    cfg.params.filter_budget = 30;
    let adv = run_trials(&cfg).unwrap();
    let violations = heavy.descent_violations + adv.descent_violations;
    outcome(
        worst <= 1e-4 && violations == 0,
        format!("worst relative gradient error {worst:.2e} over 100 instances; {violations} non-monotone accepted steps"),
    )
}

fn criterion_12() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_robustreg");
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["--scenario", "heavy", "--n", "80", "--p", "6", "--trials", "40", "--filter-remove", "4", "--trim-m", "8",
          "--methods", "ols,huber,huber-filter,huber-sym,lts,lts-filter,lad,lad-filter,huber+post"],
        &["--scenario", "adversarial", "--n", "80", "--p", "6", "--trials", "40", "--alpha-x", "4", "--eps", "0.1",
          "--filter-remove", "12", "--trim-m", "12", "--methods", "ols,huber-filter,lts-filter", "--gamma", "auto"],
        &["--scenario", "ols-lb", "--n", "60", "--p", "5", "--trials", "200", "--tau", "0.1", "--methods", "ols"],
    ];
    let mut identical = 0;
    for (r, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (k, threads) in ["1", "1", "4"].iter().enumerate() {
            let out = dir.path().join(format!("run{r}_{k}.csv"));
            let status = Command::new(bin)
                .arg("simulate")
                .args(*args)
                .args(["--seed", "77", "--threads", threads, "--out"])
                .arg(&out)
                .output()
                .unwrap();
            if !status.status.success() {
                return outcome(false, format!("simulate failed: {}", String::from_utf8_lossy(&status.stderr)));
            }
            outputs.push(std::fs::read(&out).unwrap());
        }
        if outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty() {
            identical += 1;
        }
    }
    outcome(identical == runs.len(), format!("{identical}/{} simulate configs byte-identical across repeats and 1/4 workers", runs.len()))
}

fn main() {
    let (heavy, heavy_secs) = heavy_table();
    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Check)> = vec![
        ("1 heavy-tail Huber ordering", Box::new(|| criterion_1(&heavy, heavy_secs))),
        ("2 heavy-tail LTS ordering", Box::new(|| criterion_2(&heavy))),
        ("3 adversarial corruption", Box::new(criterion_3)),
        ("4 OLS heavy-tail lower bound", Box::new(criterion_4)),
        ("5 LTS exact recovery", Box::new(criterion_5)),
        ("6 hard-threshold optimality", Box::new(criterion_6)),
        ("7 LAD vertex-oracle agreement", Box::new(criterion_7)),
        ("8 stability consistency", Box::new(criterion_8)),
        ("9 gamma estimation", Box::new(criterion_9)),
        ("10 postprocessing improvement", Box::new(criterion_10)),
        ("11 gradient and descent checks", Box::new(criterion_11)),
        ("12 simulate determinism", Box::new(criterion_12)),
    ];
    let mut failed = Vec::new();
    for (name, run) in &criteria {
        let o = run();
        println!("[{}] criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        if !o.pass {
            failed.push(*name);
        }
    }
    if !failed.is_empty() {
        println!("{} of {} criteria failed", failed.len(), criteria.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", criteria.len());
}
