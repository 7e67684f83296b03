use std::io::Write;

use vlstein_core::{
    binary_example_exponent, gaussian_example_exponent, solve_vl_exponent_with, ExponentQuery,
    SolverOptions,
};

use crate::config::{ExperimentConfig, SourceSpec, SweepSpec, SweptParameter};
use crate::{fmt_f64, CliError};

pub const SWEEP_HEADER: &str = "param,value,theta_vl,theta_fl,theta_source";

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub theta_vl: f64,
    pub theta_fl: f64,
    /// `closed_form` or `optimizer`.
    pub theta_source: &'static str,
}

/// Variable- and fixed-length exponents at one point.
fn exponents(source: &SourceSpec, rate: f64, epsilon: f64, u_card: Option<usize>, seed: u64) -> Result<SweepRow, CliError> {
    let row = |vl, fl, src| SweepRow { value: 0.0, theta_vl: vl, theta_fl: fl, theta_source: src };
    Ok(match source {
        SourceSpec::Dsbs { alpha } => row(
            binary_example_exponent(*alpha, rate, epsilon)?,
            binary_example_exponent(*alpha, rate, 0.0)?,
            "closed_form",
        ),
        SourceSpec::Gaussian { rho } => row(
            gaussian_example_exponent(*rho, rate, epsilon)?,
            gaussian_example_exponent(*rho, rate, 0.0)?,
            "closed_form",
        ),
        SourceSpec::Table { .. } => {
            let joint = source.discrete()?;
            let opts = SolverOptions { seed, ..SolverOptions::default() };
            let solve = |eps: f64| -> Result<f64, CliError> {
                let mut q = ExponentQuery::new(joint.clone(), rate, eps)?;
                if let Some(k) = u_card {
                    q = q.with_u_cardinality(k)?;
                }
                Ok(solve_vl_exponent_with(&q, &opts)?.theta)
            };
            row(solve(epsilon)?, solve(0.0)?, "optimizer")
        }
    })
}

/// One row per grid point, in grid order.
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, CliError> {
    let spec = cfg.sweep()?;
    spec.validate()?;
    let capacity = match spec.parameter {
        SweptParameter::Kappa => cfg.dmc()?.dmc("dmc")?.capacity()?,
        _ => 0.0,
    };
    spec.values()
        .into_iter()
        .map(|v| {
            let (source, rate, eps) = match spec.parameter {
                SweptParameter::Alpha => (SourceSpec::Dsbs { alpha: v }, cfg.rate()?, cfg.epsilon()?),
                SweptParameter::Rho => (SourceSpec::Gaussian { rho: v }, cfg.rate()?, cfg.epsilon()?),
                SweptParameter::Rate => (cfg.source()?, v, cfg.epsilon()?),
                SweptParameter::Epsilon => (cfg.source()?, cfg.rate()?, v),
                SweptParameter::Kappa => (cfg.source()?, v * capacity, cfg.epsilon()?),
            };
            let mut row = exponents(&source, rate, eps, cfg.u_cardinality, cfg.seed)?;
            row.value = v;
            Ok(row)
        })
        .collect()
}

pub fn emit_sweep_csv<W: Write>(spec: &SweepSpec, rows: &[SweepRow], out: &mut W) -> Result<(), CliError> {
    if rows.is_empty() {
        return Err(CliError::config("sweep", "no rows to write"));
    }
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            spec.parameter.name(),
            fmt_f64(r.value),
            fmt_f64(r.theta_vl),
            fmt_f64(r.theta_fl),
            r.theta_source
        )?;
    }
    Ok(())
}
