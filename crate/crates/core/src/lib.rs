//! Exact event-driven simulation and mean-field analysis of a network of
//! `N` leaky neurons with mean-field excitatory coupling.
//!
//! Each potential decays at rate `α`, and neuron `i` spikes at rate
//! `λ(U_i)`. A spike resets the spiking neuron to zero and raises every
//! other potential by `h/N`.
//!
//! * [`model`]: parameters, rate functions and the phase-diagram classifier.
//! * [`engine`]: exact simulation, the extinction sampler, the dominated
//!   auxiliary process and the shared-noise couplings.
//! * [`meanfield`]: the limit ODE, the invariant density and its fixed point,
//!   and Wasserstein diagnostics.
//! * [`ldp`]: rate function, quasi-potential bounds and path actions.
//! * [`metastab`]: exit-time experiments and exponentiality estimators.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod engine;
pub mod error;
pub mod ldp;
pub mod meanfield;
pub mod metastab;
pub mod model;
pub mod numeric;
pub mod rng;
pub mod stats;

pub use error::{Error, Result};
pub use model::{ModelParams, RateSpec, RegimeReport};
