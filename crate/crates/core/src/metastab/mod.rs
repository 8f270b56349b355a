//! Exit times of the mean rate from metastable domains, and estimators for
//! the constants controlling how close rescaled exit times are to a unit
//! exponential.

pub mod domain;
pub mod eps;
pub mod exit;

pub use domain::{DomainSpec, RateInterval};
pub use eps::{estimate_eps, EpsDesign, EpsReport, ProbabilityEstimate};
pub use exit::{
    calibrate_beta, calibrate_beta_from_samples, exit_ensemble, exit_time, first_passage, BetaCalibration,
    ExitEnsembleReport, ExitSample, Passage, PassageKind,
};
