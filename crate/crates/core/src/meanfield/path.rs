//! Piecewise-constant mean-rate paths `t ↦ z_t` and the drift they induce.

use serde::Serialize;

use crate::error::{Error, Result};

/// A rate path constant on cells `[j dt, (j+1) dt)`, with the cumulative
/// weights `Φ(t_j) = ∫_0^{t_j} e^{α s} z_s ds` precomputed so that the
/// leak-discounted drift between any two times costs O(1).
///
/// Intended for horizons with `α · horizon` well below 700.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatePath {
    pub dt: f64,
    pub alpha: f64,
    pub values: Vec<f64>,
    #[serde(skip)]
    phi: Vec<f64>,
}

impl RatePath {
    pub fn new(dt: f64, alpha: f64, values: Vec<f64>) -> Result<Self> {
        if !(dt > 0.0) || values.is_empty() {
            return Err(Error::Argument("rate path needs dt > 0 and at least one cell".into()));
        }
        let mut phi = Vec::with_capacity(values.len() + 1);
        phi.push(0.0);
        for (j, &z) in values.iter().enumerate() {
            let t0 = j as f64 * dt;
            let t1 = (j + 1) as f64 * dt;
            let last = *phi.last().expect("non-empty");
            phi.push(last + z * ((alpha * t1).exp() - (alpha * t0).exp()) / alpha);
        }
        Ok(RatePath { dt, alpha, values, phi })
    }

    /// Constant path on `[0, horizon]`.
    pub fn constant(z: f64, horizon: f64, dt: f64, alpha: f64) -> Result<Self> {
        let cells = ((horizon / dt).ceil() as usize).max(1);
        Self::new(dt, alpha, vec![z; cells])
    }

    pub fn horizon(&self) -> f64 {
        self.values.len() as f64 * self.dt
    }

    fn cell(&self, t: f64) -> usize {
        ((t / self.dt).floor() as usize).min(self.values.len() - 1)
    }

    pub fn value_at(&self, t: f64) -> f64 {
        self.values[self.cell(t.max(0.0))]
    }

    fn phi_at(&self, t: f64) -> f64 {
        let j = self.cell(t);
        let t0 = j as f64 * self.dt;
        self.phi[j] + self.values[j] * ((self.alpha * t).exp() - (self.alpha * t0).exp()) / self.alpha
    }

    /// `∫_s^t e^{−α(t−r)} z_r dr` for `s ≤ t`.
    pub fn drift_integral(&self, s: f64, t: f64) -> f64 {
        if t <= s {
            return 0.0;
        }
        let (js, jt) = (self.cell(s), self.cell(t));
        if js == jt {
            return self.values[js] * -(-self.alpha * (t - s)).exp_m1() / self.alpha;
        }
        (self.phi_at(t) - self.phi_at(s)) * (-self.alpha * t).exp()
    }
}
