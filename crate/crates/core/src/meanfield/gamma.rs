//! The normalising integral of the invariant densities.
//!
//! For a constant drift `a` the one-neuron process has invariant density
//! `g_a(x) = p_a/(a − αx) exp(−∫_0^x λ(y)/(a − αy) dy)` on `[0, a/α)`, with
//! `Γ(a) = 1/p_a`. With `s = 1 − αx/a` and `q = k a/α²` the unsaturated part
//! of the integrand becomes `e^{q(1−s)} s^{q−1}`, which is singular at
//! `s = 0` when `q < 1`; that end is integrated by its power series. Past
//! the saturation point the integrand is a pure power of `s` and integrates
//! in closed form.

use crate::error::{Error, Result};
use crate::model::{ModelParams, RateSpec};
use crate::numeric::quad;

/// Below this `s` the series is used instead of quadrature.
const SERIES_SPLIT: f64 = 1e-6;

/// `log` of the reduced integrand `e^{q(1−s)} s^{q−1}`.
#[inline]
fn log_kernel(q: f64, s: f64) -> f64 {
    q * (1.0 - s) + (q - 1.0) * s.ln()
}

/// `∫_0^s e^{q(1−t)} t^{q−1} dt` by its power series, for small `q s`.
pub(crate) fn series_mass(q: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    let mut term = 1.0; // (−q s)^n / n!
    for n in 0..200 {
        let add = term / (n as f64 + q);
        sum += add;
        if add.abs() < 1e-18 * sum.abs() {
            break;
        }
        term *= -q * s / (n as f64 + 1.0);
    }
    (q + q * s.ln()).exp() * sum
}

/// `∫_lo^hi e^{q(1−s)} s^{q−1} ds` for `0 ≤ lo ≤ hi ≤ 1`.
pub(crate) fn lin_mass(q: f64, lo: f64, hi: f64, rel_tol: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let mut total = 0.0;
    let mut lo_q = lo;
    if lo < SERIES_SPLIT {
        let top = hi.min(SERIES_SPLIT);
        total += series_mass(q, top) - series_mass(q, lo);
        lo_q = top;
    }
    if hi > lo_q {
        let r = quad::integrate(|s| log_kernel(q, s).exp(), lo_q, hi, 1e-300, rel_tol, 20_000);
        total += r.value;
    }
    total
}

/// Saturation geometry of `g_a` in the `s` variable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Shape {
    pub alpha: f64,
    pub k: f64,
    pub lambda_star: f64,
    pub a: f64,
    /// `k a / α²`.
    pub q: f64,
    /// Value of `s` at which `λ` saturates (0 when it never does on the support).
    pub s_sat: f64,
}

impl Shape {
    pub fn new(a: f64, params: &ModelParams) -> Result<Self> {
        let (k, ls) = match params.rate {
            RateSpec::PiecewiseLinear { k, lambda_star } => (k, lambda_star),
            _ => {
                return Err(Error::UnsupportedRate(
                    "invariant densities are tabulated for the piecewise-linear rate".into(),
                ))
            }
        };
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Domain(format!("drift a must be positive, got {a}")));
        }
        let alpha = params.alpha;
        let x_sat = ls / k;
        let s_sat = (1.0 - alpha * x_sat / a).max(0.0);
        Ok(Shape {
            alpha,
            k,
            lambda_star: ls,
            a,
            q: k * a / (alpha * alpha),
            s_sat,
        })
    }

    /// `exp(−K)` at the saturation point, where `K(x) = ∫_0^x λ/(a − αy)`.
    pub fn survival_at_sat(&self) -> f64 {
        if self.s_sat > 0.0 {
            (self.q * (1.0 - self.s_sat) + self.q * self.s_sat.ln()).exp()
        } else {
            0.0
        }
    }

    /// `exp(−K(x))` expressed through `s = 1 − αx/a`.
    pub fn survival(&self, s: f64) -> f64 {
        if s >= self.s_sat {
            if s <= 0.0 {
                return 0.0;
            }
            (self.q * (1.0 - s) + self.q * s.ln()).exp()
        } else {
            self.survival_at_sat() * (s / self.s_sat).powf(self.lambda_star / self.alpha)
        }
    }

    /// `Γ(a)`: the unsaturated mass plus the closed-form saturated tail.
    pub fn gamma(&self, rel_tol: f64) -> f64 {
        let lin = lin_mass(self.q, self.s_sat, 1.0, rel_tol) / self.alpha;
        let tail = if self.s_sat > 0.0 {
            self.survival_at_sat() / self.lambda_star
        } else {
            0.0
        };
        lin + tail
    }
}

/// `Γ(a) = 1/p_a`, the normalising constant of the invariant density with
/// constant drift `a` (piecewise-linear rate).
pub fn gamma_of_a(a: f64, params: &ModelParams, quad_tol: f64) -> Result<f64> {
    Ok(Shape::new(a, params)?.gamma(quad_tol))
}
