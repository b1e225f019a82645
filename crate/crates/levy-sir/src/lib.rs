//! Simulation and threshold analysis for a stochastic SIR epidemic model
//! driven by correlated Brownian noise and a tempered stable jump process.
//!
//! The crate has two halves:
//!
//! * analytics — reproduction numbers, noise intensities, hypothesis checks
//!   and the extinction/persistence classification ([`model`], [`quad`]);
//! * simulation — series-representation sampling of the jump driver,
//!   Euler time stepping and Monte Carlo ensembles ([`sampler`], [`engine`],
//!   [`analytics`]), with configuration and output handling in [`config`]
//!   and [`output`].
//!
//! Ensembles are path-parallel via rayon when the default `parallel` feature
//! is enabled; `--no-default-features` builds a sequential variant with
//! identical results.

// Validation guards are written as negated comparisons (`!(x > 0.0)`) on
// purpose: they must reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytics;
pub mod config;
pub mod engine;
pub mod model;
pub mod output;
pub mod quad;
pub mod sampler;
pub mod special;

pub use analytics::{
    detect_extinction, running_time_average, verdict_ensemble, verdict_path, DetectedRegime,
    DetectorSettings, RegimeVerdict, VerdictSettings,
};
pub use config::{emit_config, parse_config, preset, ConfigError, ExperimentConfig};
pub use engine::{
    euler_step, run_ensemble, run_ensemble_sequential, simulate_ensemble_member, simulate_path,
    EngineError, EnsembleSummary, ProbeSettings, SimConfig, SirPath, SirState,
};
pub use model::{
    basic_reproduction_number, beta_noise_intensity, check_hypotheses, classify_regime,
    deterministic_equilibria, jump_moment, lambda_p, modified_reproduction_number, rho_inf_norm,
    variance_matched_sigma, Equilibria, Hypotheses, HypothesisStatus, ModelError, ModelParams,
    NoiseSpec, Regime, TemperedStableParams, ThresholdReport,
};
pub use quad::{
    compensator_rate, levy_integral, IntegralEstimate, OriginRule, QuadratureError,
    QuadratureSettings,
};
pub use sampler::{
    correlated_gaussian_increments, cumulant, dropped_mean_rate, increments_on_grid,
    sample_jump_train, JumpTrain, RngStream, SamplerError,
};
