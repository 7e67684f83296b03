//! Optimal type-II error exponents for distributed testing against
//! independence under variable-length coding, and Monte Carlo simulators of
//! the coding schemes that achieve them.

pub mod dmc_scheme;
pub mod error;
pub mod exponent;
pub mod info;
pub mod noiseless;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use exponent::{
    binary_example_exponent, capacity, gaussian_example_exponent, solve_dmc_exponent,
    solve_fl_exponent, solve_vl_exponent, solve_vl_exponent_with, Dmc, ExponentQuery,
    ExponentResult, SolverOptions,
};
pub use info::{AuxChannel, EmpiricalType, JointSource, Pmf};
pub use noiseless::{
    build_codebook, build_reject_set, decode, encode, run_paired_trials, run_trials, Codebook,
    Hypothesis, Message, NoiselessConfig, NoiselessScheme, PairedReport, RejectSetSpec, SimReport,
};
pub use dmc_scheme::{
    design_np_test, miss_probability_bounds, phase1_detect, run_dmc_trial, run_dmc_trials,
    DmcSchemeConfig, DmcScheme, DmcSimReport, DmcTrialRecord, MissBounds, NpTest, Signal,
};
pub use verify::{
    brute_force_exponent, brute_force_exponent_with, check_change_of_measure, ChangeOfMeasure,
    GridOptimum, MeasureTriple,
};
