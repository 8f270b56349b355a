//! The one-dimensional limit of the auxiliary process,
//! `ẋ = −r x + G(x) f(x)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::ode::{integrate_at, OdeTolerance};

/// Constants of the limit equation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitOdeConfig {
    pub r: f64,
    pub kh: f64,
    pub lambda_star: f64,
    /// `λ(u*)`.
    pub lambda_threshold: f64,
    /// Floor of the clamped jump rate `f`.
    pub eta: f64,
    /// `(1 − λ*/(kh)) λ(u*)`.
    pub z_inf: f64,
    /// `λ(u*)(1 − (λ* + r)/(kh))`, the non-zero equilibrium.
    pub x_inf: f64,
}

impl LimitOdeConfig {
    /// `eta = 0` gives the unclamped equation `f(x) = x ∧ z_∞`.
    pub fn new(params: &ModelParams, eta: f64) -> Result<Self> {
        if !(eta >= 0.0) {
            return Err(Error::Domain(format!("eta must be non-negative, got {eta}")));
        }
        let kh = params.k() * params.h;
        let ls = params.lambda_star();
        let r = params.r();
        let lt = params.lambda_at_threshold();
        Ok(LimitOdeConfig {
            r,
            kh,
            lambda_star: ls,
            lambda_threshold: lt,
            eta,
            z_inf: (1.0 - ls / kh) * lt,
            x_inf: lt * (1.0 - (ls + r) / kh),
        })
    }

    /// `G(x) = (kh(1 − x/λ(u*)) − λ*)₊`.
    #[inline]
    pub fn drift_g(&self, x: f64) -> f64 {
        (self.kh * (1.0 - x / self.lambda_threshold) - self.lambda_star).max(0.0)
    }

    /// `f(x) = η ∨ (x ∧ z_∞)`.
    #[inline]
    pub fn clamp_f(&self, x: f64) -> f64 {
        self.eta.max(x.min(self.z_inf))
    }

    /// Right-hand side `−r x + G(x) f(x)`.
    #[inline]
    pub fn velocity(&self, x: f64) -> f64 {
        -self.r * x + self.drift_g(x) * self.clamp_f(x)
    }

    /// Whether a positive equilibrium exists (`kh > λ* + r`).
    pub fn supercritical(&self) -> bool {
        self.kh > self.lambda_star + self.r
    }
}

/// Integrates the limit ODE from `x0` and samples it at `times` (sorted,
/// starting at or after 0). Relative tolerance 1e−10.
pub fn limit_ode(x0: f64, times: &[f64], config: &LimitOdeConfig) -> Result<Vec<f64>> {
    if !(x0 >= 0.0) {
        return Err(Error::Domain(format!("x0 must be non-negative, got {x0}")));
    }
    if times.windows(2).any(|w| w[1] < w[0]) || times.first().is_some_and(|&t| t < 0.0) {
        return Err(Error::Argument(
            "observation times must be sorted and non-negative".into(),
        ));
    }
    integrate_at(|x| config.velocity(x), x0, times, OdeTolerance::default()).ok_or_else(|| Error::NonConvergence {
        iterations: OdeTolerance::default().max_steps,
        last_change: f64::NAN,
        history: vec![],
    })
}

/// Uniform time grid `0, dt, …, horizon`.
pub fn time_grid(horizon: f64, dt: f64) -> Vec<f64> {
    let steps = (horizon / dt).round() as usize;
    (0..=steps).map(|j| horizon * j as f64 / steps as f64).collect()
}
