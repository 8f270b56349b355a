//! Integrated spiking rate along the deterministic leak.
//!
//! Between spikes `u_i(s) = u_i e^{-αs}`, so for the piecewise-linear rate
//! the integrated intensity of each neuron is available in closed form:
//! saturated at `λ*` until `k u e^{-αs}` drops below `λ*`, then exponential.

use crate::error::{Error, Result};
use crate::model::{ModelParams, RateSpec};
use crate::numeric::quad;

/// Value of an integrated rate, flagged when it came from quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratedRate {
    pub value: f64,
    pub exact: bool,
}

/// `∫_0^∞ λ(u e^{-αs}) ds`, the expected number of future spikes of an
/// isolated neuron started at `u`.
pub fn residual_integrated_rate(u: f64, params: &ModelParams) -> Result<IntegratedRate> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("potential must be non-negative, got {u}")));
    }
    match &params.rate {
        RateSpec::PiecewiseLinear { k, lambda_star } => Ok(IntegratedRate {
            value: pl_residual(u, *k, *lambda_star, params.alpha),
            exact: true,
        }),
        RateSpec::GenericLipschitz(g) => {
            if u == 0.0 {
                return Ok(IntegratedRate {
                    value: 0.0,
                    exact: true,
                });
            }
            // substitute v = u e^{-αs}: (1/α) ∫_0^u λ(v)/v dv
            let q = quad::integrate(
                |v| if v > 0.0 { (g.eval)(v) / v } else { g.lip },
                0.0,
                u,
                1e-12,
                1e-10,
                4000,
            );
            Ok(IntegratedRate {
                value: q.value / params.alpha,
                exact: false,
            })
        }
    }
}

#[inline]
fn pl_residual(u: f64, k: f64, ls: f64, alpha: f64) -> f64 {
    let c = k * u;
    if c >= ls {
        ls / alpha * ((c / ls).ln() + 1.0)
    } else {
        c / alpha
    }
}

/// `∫_0^τ λ(u e^{-αs}) ds` for the piecewise-linear rate.
#[inline]
pub fn pl_integrated(u: f64, tau: f64, k: f64, ls: f64, alpha: f64) -> f64 {
    let c = k * u;
    if c <= ls {
        c / alpha * -(-alpha * tau).exp_m1()
    } else {
        let sc = (c / ls).ln() / alpha;
        if tau <= sc {
            ls * tau
        } else {
            ls * sc + ls / alpha * -(-alpha * (tau - sc)).exp_m1()
        }
    }
}

fn pl_constants(params: &ModelParams) -> Result<(f64, f64)> {
    match params.rate {
        RateSpec::PiecewiseLinear { k, lambda_star } => Ok((k, lambda_star)),
        _ => Err(Error::UnsupportedRate(
            "closed-form integrated rate needs the piecewise-linear rate".into(),
        )),
    }
}

/// Total residual intensity `Σ_i ∫_0^∞ λ(u_i e^{-αs}) ds` (piecewise-linear).
pub fn total_residual(u: &[f64], params: &ModelParams) -> Result<f64> {
    let (k, ls) = pl_constants(params)?;
    Ok(u.iter().map(|&x| pl_residual(x, k, ls, params.alpha)).sum())
}

/// Result of inverting the integrated total rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub tau: f64,
    pub residual: f64,
}

/// Solves `∫_0^τ Λ(s) ds = e` for the leak started from `u`.
///
/// Returns `Ok(None)` when `e` exceeds the total residual intensity, i.e.
/// no further spike happens. Safeguarded Newton on a doubling bracket; the
/// derivative of the integrated rate is the instantaneous total rate.
pub fn invert_integrated_rate(u: &[f64], e: f64, params: &ModelParams) -> Result<Option<Inversion>> {
    let (k, ls) = pl_constants(params)?;
    let alpha = params.alpha;
    let total: f64 = u.iter().map(|&x| pl_residual(x, k, ls, alpha)).sum();
    if !(e < total) {
        return Ok(None);
    }
    let eval = |tau: f64| -> (f64, f64) {
        let decay = (-alpha * tau).exp();
        let mut f = 0.0;
        let mut rate = 0.0;
        for &x in u {
            f += pl_integrated(x, tau, k, ls, alpha);
            rate += (k * x * decay).min(ls);
        }
        (f - e, rate)
    };
    let target = 1e-12 * e.max(1.0);
    let (f0, rate0) = eval(0.0);
    debug_assert!(f0 < 0.0);
    let mut lo = 0.0;
    let mut hi = if rate0 > 0.0 { e / rate0 } else { 1.0 / alpha };
    loop {
        let (fh, _) = eval(hi);
        if fh >= 0.0 {
            break;
        }
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Err(Error::Domain("integrated-rate bracket diverged".into()));
        }
    }
    let mut x = if rate0 > 0.0 {
        (e / rate0).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    let mut best = Inversion {
        tau: x,
        residual: f64::INFINITY,
    };
    for _ in 0..200 {
        let (fx, dfx) = eval(x);
        if fx.abs() < best.residual {
            best = Inversion {
                tau: x,
                residual: fx.abs(),
            };
        }
        if fx.abs() <= target {
            return Ok(Some(best));
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            return Ok(Some(best));
        }
        let newton = x - fx / dfx;
        x = if dfx > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Ok(Some(best))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_horizon_tends_to_residual() {
        for &u in &[0.3, 2.0, 9.0] {
            let full = pl_residual(u, 1.0, 2.0, 1.0);
            let long = pl_integrated(u, 60.0, 1.0, 2.0, 1.0);
            assert!((full - long).abs() < 1e-12);
        }
    }

    #[test]
    fn inversion_hits_target() {
        let p = ModelParams::piecewise_linear(4, 1.0, 1.0, 1.0, 2.0).unwrap();
        let u = [0.1, 0.5, 3.0, 7.0];
        for &e in &[1e-6, 0.3, 2.0, 5.0] {
            let inv = invert_integrated_rate(&u, e, &p).unwrap().unwrap();
            assert!(inv.residual <= 1e-12 * e.max(1.0), "{e} {inv:?}");
        }
        let total = total_residual(&u, &p).unwrap();
        assert!(invert_integrated_rate(&u, total + 1e-9, &p).unwrap().is_none());
    }

    #[test]
    fn generic_rate_flags_quadrature() {
        let p = ModelParams::new(1, 1.0, 10.0, RateSpec::tanh(1.0, 1.0, 1.0)).unwrap();
        let r = residual_integrated_rate(0.5, &p).unwrap();
        assert!(!r.exact);
        assert!(r.value > 0.0 && r.value < 0.5);
    }
}
