use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vlstein_core::stats::Interval;
use vlstein_core::{
    binary_example_exponent, brute_force_exponent, check_change_of_measure, gaussian_example_exponent,
    run_dmc_trials, run_paired_trials, solve_dmc_exponent, solve_vl_exponent_with, DmcSchemeConfig,
    ExponentQuery, JointSource, MeasureTriple, NoiselessConfig, Pmf, SimReport, SolverOptions,
};

use crate::config::{ExperimentConfig, Mode, SourceSpec};
use crate::sweep::{emit_sweep_csv, run_sweep};
use crate::{fmt_f64, CliError};

/// Result of one run: data for the CSV sink, prose for stderr.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub csv: String,
    pub summary: String,
    /// False only when a `verify` suite found a violation.
    pub verified: bool,
}

pub fn run(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    cfg.validate()?;
    match cfg.mode()? {
        Mode::Exponent => exponent(cfg),
        Mode::ExponentDmc => exponent_dmc(cfg),
        Mode::SimulateLink => simulate_link(cfg),
        Mode::SimulateDmc => simulate_dmc(cfg),
        Mode::Sweep => sweep(cfg),
        Mode::Verify => verify(cfg),
    }
}

fn ok(csv: String, summary: String) -> Result<Outcome, CliError> {
    Ok(Outcome { csv, summary, verified: true })
}

fn row(fields: &[f64]) -> String {
    fields.iter().map(|&x| fmt_f64(x)).collect::<Vec<_>>().join(",")
}

fn solver_options(cfg: &ExperimentConfig) -> SolverOptions {
    SolverOptions { seed: cfg.seed, ..SolverOptions::default() }
}

fn exponent(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let (rate, eps) = (cfg.rate()?, cfg.epsilon()?);
    let (theta, iux, iuy, origin) = match cfg.source()? {
        SourceSpec::Gaussian { rho } => {
            let theta = gaussian_example_exponent(rho, rate, eps)?;
            // The Gaussian test channel meets the rate constraint with equality.
            let iux = if rho > 0.0 { rate / (1.0 - eps) } else { 0.0 };
            (theta, iux, theta, "closed_form")
        }
        spec => {
            let mut q = ExponentQuery::new(spec.discrete()?, rate, eps)?;
            if let Some(k) = cfg.u_cardinality {
                q = q.with_u_cardinality(k)?;
            }
            let r = solve_vl_exponent_with(&q, &solver_options(cfg))?;
            (r.theta, r.iux, r.iuy, "optimizer")
        }
    };
    let csv = format!("theta,iux,iuy,theta_source\n{},{origin}\n", row(&[theta, iux, iuy]));
    ok(csv, format!("exponent: theta = {theta:.6} bits (I(U;X) = {iux:.6}, I(U;Y) = {iuy:.6}, {origin})"))
}

fn exponent_dmc(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let source = cfg.source()?.discrete()?;
    let dmc = cfg.dmc()?.dmc("dmc")?;
    let (kappa, eps) = (cfg.kappa()?, cfg.epsilon()?);
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(CliError::config("kappa", "must be positive"));
    }
    let capacity = dmc.capacity()?;
    let r = solve_dmc_exponent(&source, &dmc, kappa, eps)?;
    let csv = format!(
        "capacity,rate,theta,iux,iuy\n{}\n",
        row(&[capacity, kappa * capacity, r.theta, r.iux, r.iuy])
    );
    ok(csv, format!("exponent-dmc: C = {capacity:.6}, R = kappa C = {:.6}, theta = {:.6} bits", kappa * capacity, r.theta))
}

const LINK_HEADER: &str = "variant,n,rate,codebook_size,trials_h0,trials_h1,alpha_hat,alpha_lo,alpha_hi,beta_hat,beta_lo,beta_hi,mean_len_per_symbol,empirical_exponent,reject_mass";

fn link_row(variant: &str, r: &SimReport) -> String {
    format!(
        "{variant},{},{},{},{},{},{}",
        r.n,
        fmt_f64(r.rate),
        r.codebook_size,
        r.trials_h0,
        r.trials_h1,
        row(&[
            r.alpha_hat,
            r.alpha_ci.lower,
            r.alpha_ci.upper,
            r.beta_hat,
            r.beta_ci.lower,
            r.beta_ci.upper,
            r.mean_len_per_symbol,
            r.empirical_exponent,
            r.reject_mass,
        ])
    )
}

fn simulate_link(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let scheme = NoiselessConfig::new(
        cfg.source()?.discrete()?,
        cfg.aux()?.aux("aux")?,
        cfg.n()?,
        cfg.mu()?,
        cfg.epsilon()?,
        cfg.seed,
    )?;
    let report = run_paired_trials(&scheme, cfg.trials())?;
    let csv = format!(
        "{LINK_HEADER}\n{}\n{}\n",
        link_row("with_reject", &report.with_reject),
        link_row("without_reject", &report.without_reject)
    );
    let w = &report.with_reject;
    let summary = format!(
        "simulate-link: n = {}, M = {}, alpha = {:.5} {}, beta = {:.3e} {}, E[L]/n = {:.4}, beta increases from S_n = {}",
        w.n,
        w.codebook_size,
        w.alpha_hat,
        ci(&w.alpha_ci),
        w.beta_hat,
        ci(&w.beta_ci),
        w.mean_len_per_symbol,
        report.beta_increases
    );
    ok(csv, summary)
}

fn ci(i: &Interval) -> String {
    format!("[{:.5}, {:.5}]", i.lower, i.upper)
}

fn simulate_dmc(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let scheme = DmcSchemeConfig::new(
        cfg.source()?.discrete()?,
        cfg.aux()?.aux("aux")?,
        cfg.dmc()?.dmc("dmc")?,
        cfg.n()?,
        cfg.kappa()?,
        cfg.epsilon()?,
        cfg.epsilon_prime()?,
        cfg.seed,
    )?;
    let r = run_dmc_trials(&scheme, cfg.trials())?;
    let csv = format!(
        "n,q,n_prime,trials_h0,trials_h1,alpha_hat,alpha_lo,alpha_hi,beta_hat,beta_lo,beta_hi,empirical_exponent,\
         mean_tau_over_n,analytical_mean_tau_over_n,continue_hat,phase1_fa_hat,exact_false_alarm,phase1_miss_hat,\
         exact_miss,channel_decoding_error_rate,tau_ks_statistic\n{},{},{},{},{},{}\n",
        r.n,
        r.q,
        r.n_prime,
        r.trials_h0,
        r.trials_h1,
        row(&[
            r.alpha_hat,
            r.alpha_ci.lower,
            r.alpha_ci.upper,
            r.beta_hat,
            r.beta_ci.lower,
            r.beta_ci.upper,
            r.empirical_exponent,
            r.mean_tau_over_n,
            r.analytical_mean_tau_over_n,
            r.continue_hat,
            r.phase1_fa_hat,
            r.exact_false_alarm,
            r.phase1_miss_hat,
            r.exact_miss,
            r.channel_decoding_error_rate,
            r.tau_ks_statistic,
        ])
    );
    let summary = format!(
        "simulate-dmc: n = {}, q = {}, n' = {}, alpha = {:.5}, beta = {:.3e}, E[tau]/n = {:.4} (analytical {:.4}), \
         false alarm {:.5} (design {:.5}), phase-2 decoding errors {:.4}",
        r.n,
        r.q,
        r.n_prime,
        r.alpha_hat,
        r.beta_hat,
        r.mean_tau_over_n,
        r.analytical_mean_tau_over_n,
        r.phase1_fa_hat,
        r.exact_false_alarm,
        r.channel_decoding_error_rate
    );
    ok(csv, summary)
}

fn sweep(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let spec = cfg.sweep()?;
    let rows = run_sweep(cfg)?;
    let mut buf = Vec::new();
    emit_sweep_csv(&spec, &rows, &mut buf)?;
    let dominated = rows.iter().filter(|r| r.theta_vl < r.theta_fl).count();
    let summary = format!(
        "sweep over {}: {} rows, rows with theta_vl < theta_fl: {dominated}",
        spec.parameter.name(),
        rows.len()
    );
    ok(String::from_utf8(buf).expect("csv is ascii"), summary)
}

struct Check {
    name: &'static str,
    cases: usize,
    failures: usize,
    /// Largest violation margin seen, zero or below when everything held.
    worst: f64,
}

fn dirichlet(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let s: f64 = v.iter().sum();
    v.into_iter().map(|x| x / s).collect()
}

fn change_of_measure_check(cases: u64, seed: u64) -> Result<Check, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut check = Check { name: "change_of_measure", cases: 0, failures: 0, worst: f64::NEG_INFINITY };
    while (check.cases as u64) < cases {
        let k = rng.random_range(1..=8);
        let p = Pmf::new(dirichlet(k, &mut rng))?;
        let q = Pmf::new(dirichlet(k, &mut rng))?;
        let event: Vec<usize> = (0..k).filter(|_| rng.random_bool(0.5)).collect();
        if !(p.mass_of(&event) > 0.0) {
            continue;
        }
        let r = check_change_of_measure(&MeasureTriple::new(p, q, event)?)?;
        check.cases += 1;
        check.failures += !r.holds as usize;
        if r.finite_divergence {
            check.worst = check.worst.max(r.lhs - r.rhs);
        }
    }
    Ok(check)
}

fn verify(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let opts = solver_options(cfg);
    let mut checks = vec![change_of_measure_check(cfg.trials(), cfg.seed)?];

    // Solver against the closed form on the binary example.
    let mut closed = Check { name: "solver_vs_closed_form", cases: 0, failures: 0, worst: f64::NEG_INFINITY };
    for i in 1..=9 {
        let alpha = 0.05 * i as f64;
        for (rate, eps) in [(0.8, 0.1), (0.4, 0.0), (0.3, 0.25)] {
            let exact = binary_example_exponent(alpha, rate, eps)?;
            let got = solve_vl_exponent_with(&ExponentQuery::new(JointSource::dsbs(alpha)?, rate, eps)?, &opts)?.theta;
            let gap = (got - exact).abs();
            closed.cases += 1;
            closed.failures += (gap > 1e-6) as usize;
            closed.worst = closed.worst.max(gap - 1e-6);
        }
    }
    checks.push(closed);

    // No grid point may beat the solver.
    let mut grid = Check { name: "solver_vs_grid", cases: 0, failures: 0, worst: f64::NEG_INFINITY };
    for (alpha, rate, eps) in [(0.1, 0.3, 0.1), (0.2, 0.6, 0.0), (0.3, 0.2, 0.25)] {
        let source = JointSource::dsbs(alpha)?;
        let g = brute_force_exponent(&source, rate, eps, 11)?;
        let s = solve_vl_exponent_with(&ExponentQuery::new(source, rate, eps)?, &opts)?;
        let margin = g.theta - s.theta;
        grid.cases += 1;
        grid.failures += (margin > 1e-9) as usize;
        grid.worst = grid.worst.max(margin - 1e-9);
    }
    checks.push(grid);

    // Variable-length coding never loses to fixed-length coding.
    let mut gain = Check { name: "vl_dominates_fl", cases: 0, failures: 0, worst: f64::NEG_INFINITY };
    for i in 0..=20 {
        let (alpha, rho) = (0.025 * i as f64, 0.05 * i as f64);
        for (vl, fl) in [
            (binary_example_exponent(alpha, 0.8, 0.1)?, binary_example_exponent(alpha, 0.8, 0.0)?),
            (gaussian_example_exponent(rho, 0.8, 0.1)?, gaussian_example_exponent(rho, 0.8, 0.0)?),
        ] {
            gain.cases += 1;
            gain.failures += (vl < fl) as usize;
            gain.worst = gain.worst.max(fl - vl);
        }
    }
    checks.push(gain);

    let mut csv = String::from("check,cases,failures,worst\n");
    let mut summary = String::from("verify:");
    for c in &checks {
        writeln!(csv, "{},{},{},{}", c.name, c.cases, c.failures, fmt_f64(c.worst)).unwrap();
        write!(summary, " {} {}/{} ok;", c.name, c.cases - c.failures, c.cases).unwrap();
    }
    let verified = checks.iter().all(|c| c.failures == 0);
    summary.push_str(if verified { " all hold" } else { " VIOLATIONS FOUND" });
    Ok(Outcome { csv, summary, verified })
}
