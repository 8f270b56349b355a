use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// A spike of `neuron` (zero-based) at time `t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpikeEvent {
    pub t: f64,
    pub neuron: usize,
}

/// Full state of the finite system.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState {
    pub t: f64,
    pub u: Vec<f64>,
    /// Cached `Σ λ(u_i)`.
    pub total_rate: f64,
}

impl SystemState {
    pub fn new(u: Vec<f64>, params: &ModelParams) -> Result<Self> {
        if u.len() != params.n {
            return Err(Error::Argument(format!(
                "expected {} potentials, got {}",
                params.n,
                u.len()
            )));
        }
        if let Some(x) = u.iter().find(|x| !(**x >= 0.0 && x.is_finite())) {
            return Err(Error::Domain(format!(
                "potentials must be finite and non-negative, got {x}"
            )));
        }
        let mut s = SystemState {
            t: 0.0,
            u,
            total_rate: 0.0,
        };
        s.refresh_rate(params);
        Ok(s)
    }

    pub fn n(&self) -> usize {
        self.u.len()
    }

    pub fn refresh_rate(&mut self, params: &ModelParams) {
        self.total_rate = self.u.iter().map(|&x| params.lambda(x)).sum();
    }

    /// Mean rate `Λ/N`.
    pub fn lambda_bar(&self) -> f64 {
        self.total_rate / self.u.len() as f64
    }

    pub fn mean_potential(&self) -> f64 {
        self.u.iter().sum::<f64>() / self.u.len() as f64
    }

    /// Deterministic leak over `dt`: every potential is scaled by `e^{-α dt}`.
    pub fn flow(&mut self, dt: f64, params: &ModelParams) {
        debug_assert!(dt >= 0.0);
        if dt > 0.0 {
            let decay = (-params.alpha * dt).exp();
            for x in &mut self.u {
                *x *= decay;
            }
            self.t += dt;
            self.refresh_rate(params);
        }
    }

    /// Flows up to absolute time `t`.
    pub fn flow_to(&mut self, t: f64, params: &ModelParams) {
        if t > self.t {
            let dt = t - self.t;
            self.flow(dt, params);
            self.t = t;
        }
    }

    /// Applies a spike of neuron `i`: reset to zero, `h/N` to every other.
    pub fn fire(&mut self, i: usize, params: &ModelParams) {
        let kick = params.h / self.u.len() as f64;
        for (j, x) in self.u.iter_mut().enumerate() {
            if j == i {
                *x = 0.0;
            } else {
                *x += kick;
            }
        }
        self.refresh_rate(params);
    }

    /// Potential of neuron `i` at a later time `t` without mutating the state.
    #[inline]
    pub fn potential_at(&self, i: usize, t: f64, alpha: f64) -> f64 {
        self.u[i] * (-alpha * (t - self.t)).exp()
    }
}

/// Free-function form of [`SystemState::flow`].
pub fn flow(state: &SystemState, dt: f64, params: &ModelParams) -> SystemState {
    let mut s = state.clone();
    s.flow(dt, params);
    s
}
