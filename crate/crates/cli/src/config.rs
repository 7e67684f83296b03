//! Experiment configuration: a single JSON object, strict about field names.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vlstein_core::{AuxChannel, Dmc, JointSource};

use crate::CliError;

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_TRIALS: u64 = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exponent,
    ExponentDmc,
    SimulateLink,
    SimulateDmc,
    Sweep,
    Verify,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Exponent => "exponent",
            Mode::ExponentDmc => "exponent-dmc",
            Mode::SimulateLink => "simulate-link",
            Mode::SimulateDmc => "simulate-dmc",
            Mode::Sweep => "sweep",
            Mode::Verify => "verify",
        }
    }
}

/// Joint source `P_XY`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    /// Doubly symmetric binary source with crossover `alpha`.
    Dsbs { alpha: f64 },
    /// Unit-variance Gaussian pair; only the closed-form exponent is available.
    Gaussian { rho: f64 },
    /// Joint pmf, rows indexed by `x`.
    Table { table: Vec<Vec<f64>> },
}

impl SourceSpec {
    pub fn discrete(&self) -> Result<JointSource, CliError> {
        let built = match self {
            SourceSpec::Dsbs { alpha } => JointSource::dsbs(*alpha),
            SourceSpec::Table { table } => JointSource::new(table.clone()),
            SourceSpec::Gaussian { .. } => {
                return Err(CliError::config("source", "a gaussian source has no discrete simulator"))
            }
        };
        built.map_err(|e| CliError::config("source", e))
    }
}

/// Channel given by name or by its transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ChannelSpec {
    Bsc { p: f64 },
    Bec { e: f64 },
    Identity { size: usize },
    Matrix { rows: Vec<Vec<f64>> },
}

impl ChannelSpec {
    pub fn dmc(&self, field: &str) -> Result<Dmc, CliError> {
        match self {
            ChannelSpec::Bsc { p } => Dmc::bsc(*p),
            ChannelSpec::Bec { e } => Dmc::bec(*e),
            ChannelSpec::Identity { size } => Dmc::identity(*size),
            ChannelSpec::Matrix { rows } => Dmc::new(rows.clone()),
        }
        .map_err(|e| CliError::config(field, e))
    }

    pub fn aux(&self, field: &str) -> Result<AuxChannel, CliError> {
        match self {
            ChannelSpec::Bsc { p } => AuxChannel::bsc(*p),
            ChannelSpec::Identity { size } => AuxChannel::identity(*size, *size),
            ChannelSpec::Bec { e } => AuxChannel::new(vec![vec![1.0 - e, *e, 0.0], vec![0.0, *e, 1.0 - e]]),
            ChannelSpec::Matrix { rows } => AuxChannel::new(rows.clone()),
        }
        .map_err(|e| CliError::config(field, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweptParameter {
    Alpha,
    Rho,
    #[serde(rename = "R")]
    Rate,
    Epsilon,
    Kappa,
}

impl SweptParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweptParameter::Alpha => "alpha",
            SweptParameter::Rho => "rho",
            SweptParameter::Rate => "R",
            SweptParameter::Epsilon => "epsilon",
            SweptParameter::Kappa => "kappa",
        }
    }

    /// Closed interval of admissible values; `open_upper` excludes the right end.
    fn domain(self) -> (f64, f64, bool) {
        match self {
            SweptParameter::Alpha => (0.0, 0.5, false),
            SweptParameter::Rho => (0.0, 1.0, false),
            SweptParameter::Rate => (0.0, f64::INFINITY, false),
            SweptParameter::Epsilon => (0.0, 1.0, true),
            SweptParameter::Kappa => (0.0, f64::INFINITY, false),
        }
    }
}

/// Grid over one parameter; everything else comes from the enclosing config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub parameter: SweptParameter,
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.steps < 2 {
            return Err(CliError::config("sweep.steps", format!("{} < 2", self.steps)));
        }
        let (lo, hi, open) = self.parameter.domain();
        for (name, v) in [("sweep.start", self.start), ("sweep.stop", self.stop)] {
            let inside = v >= lo && if open { v < hi } else { v <= hi } && v.is_finite();
            if !inside {
                return Err(CliError::config(
                    name,
                    format!("{v} outside the domain of {}", self.parameter.name()),
                ));
            }
        }
        if self.parameter == SweptParameter::Kappa && self.start.min(self.stop) <= 0.0 {
            return Err(CliError::config("sweep.start", "kappa must be positive"));
        }
        Ok(())
    }

    /// Evenly spaced grid including both ends.
    pub fn values(&self) -> Vec<f64> {
        let last = (self.steps - 1) as f64;
        (0..self.steps)
            .map(|i| {
                if i == self.steps - 1 {
                    self.stop
                } else {
                    self.start + (self.stop - self.start) * i as f64 / last
                }
            })
            .collect()
    }
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_cardinality: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dmc: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon_prime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            mode: None,
            seed: DEFAULT_SEED,
            trials: None,
            output_path: None,
            source: None,
            rate: None,
            epsilon: None,
            u_cardinality: None,
            aux: None,
            dmc: None,
            n: None,
            mu: None,
            kappa: None,
            epsilon_prime: None,
            sweep: None,
        }
    }
}

fn need<T: Clone>(v: &Option<T>, field: &str, mode: Mode) -> Result<T, CliError> {
    v.clone()
        .ok_or_else(|| CliError::config(field, format!("required by mode {}", mode.name())))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("config", e))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::config("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn mode(&self) -> Result<Mode, CliError> {
        self.mode.ok_or_else(|| CliError::config("mode", "missing"))
    }

    pub fn trials(&self) -> u64 {
        self.trials.unwrap_or(DEFAULT_TRIALS)
    }

    pub fn source(&self) -> Result<SourceSpec, CliError> {
        need(&self.source, "source", self.mode()?)
    }

    pub fn rate(&self) -> Result<f64, CliError> {
        need(&self.rate, "rate", self.mode()?)
    }

    pub fn epsilon(&self) -> Result<f64, CliError> {
        need(&self.epsilon, "epsilon", self.mode()?)
    }

    pub fn aux(&self) -> Result<ChannelSpec, CliError> {
        need(&self.aux, "aux", self.mode()?)
    }

    pub fn dmc(&self) -> Result<ChannelSpec, CliError> {
        need(&self.dmc, "dmc", self.mode()?)
    }

    pub fn n(&self) -> Result<usize, CliError> {
        need(&self.n, "n", self.mode()?)
    }

    pub fn mu(&self) -> Result<f64, CliError> {
        need(&self.mu, "mu", self.mode()?)
    }

    pub fn kappa(&self) -> Result<f64, CliError> {
        need(&self.kappa, "kappa", self.mode()?)
    }

    pub fn epsilon_prime(&self) -> Result<f64, CliError> {
        need(&self.epsilon_prime, "epsilon_prime", self.mode()?)
    }

    pub fn sweep(&self) -> Result<SweepSpec, CliError> {
        need(&self.sweep, "sweep", self.mode()?)
    }

    /// Checks that the fields the mode reads are present and well formed.
    pub fn validate(&self) -> Result<(), CliError> {
        match self.mode()? {
            Mode::Exponent => {
                self.source()?;
                self.rate()?;
                self.epsilon()?;
            }
            Mode::ExponentDmc => {
                self.source()?.discrete()?;
                self.dmc()?.dmc("dmc")?;
                self.kappa()?;
                self.epsilon()?;
            }
            Mode::SimulateLink => {
                self.source()?.discrete()?;
                self.aux()?.aux("aux")?;
                self.n()?;
                self.mu()?;
                self.epsilon()?;
            }
            Mode::SimulateDmc => {
                self.source()?.discrete()?;
                self.aux()?.aux("aux")?;
                self.dmc()?.dmc("dmc")?;
                self.n()?;
                self.kappa()?;
                self.epsilon()?;
                self.epsilon_prime()?;
            }
            Mode::Sweep => {
                let sweep = self.sweep()?;
                sweep.validate()?;
                let fixed = |p: SweptParameter| sweep.parameter != p;
                if fixed(SweptParameter::Rate) && fixed(SweptParameter::Kappa) {
                    self.rate()?;
                }
                if fixed(SweptParameter::Epsilon) {
                    self.epsilon()?;
                }
                if matches!(sweep.parameter, SweptParameter::Rate | SweptParameter::Epsilon | SweptParameter::Kappa) {
                    self.source()?;
                }
                if sweep.parameter == SweptParameter::Kappa {
                    self.dmc()?.dmc("dmc")?;
                }
            }
            Mode::Verify => {}
        }
        if self.trials == Some(0) {
            return Err(CliError::config("trials", "must be positive"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected() {
        let err = ExperimentConfig::from_json(r#"{"mode":"exponent","epsilom":0.1}"#).unwrap_err();
        assert!(err.to_string().contains("epsilom"), "{err}");
        let err = ExperimentConfig::from_json(r#"{"source":{"kind":"dsbs","alpha":0.1,"beta":1}}"#).unwrap_err();
        assert!(err.to_string().contains("beta"), "{err}");
    }

    #[test]
    fn seed_defaults_to_zero() {
        let cfg = ExperimentConfig::from_json(r#"{"mode":"verify"}"#).unwrap();
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.trials(), DEFAULT_TRIALS);
    }

    #[test]
    fn missing_field_names_the_field() {
        let cfg = ExperimentConfig::from_json(r#"{"mode":"exponent","source":{"kind":"dsbs","alpha":0.1}}"#).unwrap();
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("rate"), "{err}");
    }

    #[test]
    fn sweep_grid_hits_both_ends() {
        let s = SweepSpec { parameter: SweptParameter::Alpha, start: 0.05, stop: 0.45, steps: 9 };
        let v = s.values();
        assert_eq!(v.len(), 9);
        assert_eq!(v[0], 0.05);
        assert_eq!(v[8], 0.45);
        assert!((v[1] - 0.1).abs() < 1e-15);
    }

    #[test]
    fn sweep_domain_is_enforced() {
        let bad = SweepSpec { parameter: SweptParameter::Alpha, start: 0.1, stop: 0.6, steps: 3 };
        assert!(bad.validate().is_err());
        let bad = SweepSpec { parameter: SweptParameter::Epsilon, start: 0.0, stop: 1.0, steps: 3 };
        assert!(bad.validate().is_err());
        let bad = SweepSpec { parameter: SweptParameter::Rho, start: 0.0, stop: 1.0, steps: 1 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn round_trips_through_json() {
        let cfg = ExperimentConfig {
            mode: Some(Mode::SimulateDmc),
            seed: 17,
            trials: Some(500),
            source: Some(SourceSpec::Table { table: vec![vec![0.4, 0.1], vec![0.1, 0.4]] }),
            aux: Some(ChannelSpec::Bsc { p: 0.125 }),
            dmc: Some(ChannelSpec::Matrix { rows: vec![vec![0.9, 0.1], vec![0.2, 0.8]] }),
            n: Some(12),
            kappa: Some(1.0),
            epsilon: Some(0.2),
            epsilon_prime: Some(0.15),
            ..Default::default()
        };
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
