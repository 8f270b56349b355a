//! Couplings driven by shared per-neuron Poisson noise.

use rand::Rng;
use serde::Serialize;

use super::aux::AuxParams;
use super::noise::PoissonField;
use super::state::SystemState;
use crate::error::{Error, Result};
use crate::meanfield::path::RatePath;
use crate::model::ModelParams;
use crate::rng::{Purpose, StreamKey};

/// Output of a coupled run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingDiagnostics {
    /// Observation times of `discrepancy`.
    pub times: Vec<f64>,
    /// Coupling-specific distance between the two components.
    pub discrepancy: Vec<f64>,
    /// First time the two full states coincide.
    pub coalescence_time: Option<f64>,
    pub domination_violations: u64,
    pub events: u64,
}

/// Relative rounding slack of the domination check: `Z ≤ Λ/N` is asserted
/// up to the accumulated error of summing `N` rates.
const DOMINATION_SLACK: f64 = 1e-12;

/// Runs the network together with the auxiliary process `Z`, making every
/// `Z`-jump coincide with a network spike.
///
/// At a spike at time `t`, `Z` jumps with probability `N Z(t−)/Λ(t−)`, which
/// yields jump rate `N Z` as long as `Z ≤ Λ/N`. Domination is asserted at
/// every event, before and after the jump, and recorded in the discrepancy
/// path as `Λ/N − Z`.
pub fn couple_u_z(
    init: &[f64],
    z0: f64,
    params: &ModelParams,
    horizon: f64,
    key: &StreamKey,
) -> Result<CouplingDiagnostics> {
    let aux = AuxParams::new(params)?;
    let mut state = SystemState::new(init.to_vec(), params)?;
    let n = params.n as f64;
    if !(z0 >= 0.0 && z0 <= aux.z_n && z0 <= state.lambda_bar()) {
        return Err(Error::Argument(format!(
            "Z(0) = {z0} must lie in [0, min(Λ(0)/N, z_N)] = [0, {}]",
            state.lambda_bar().min(aux.z_n)
        )));
    }
    let mut field = PoissonField::new(&key.with_purpose(Purpose::NOISE), params.n, params.lambda_star(), 0.0);
    let mut coin = key.with_purpose(Purpose::COUPLING).rng();
    let dominated = |z: f64, total: f64| z <= total / n * (1.0 + DOMINATION_SLACK) + f64::MIN_POSITIVE;
    let mut diag = CouplingDiagnostics {
        times: vec![0.0],
        discrepancy: vec![state.lambda_bar() - z0],
        coalescence_time: None,
        domination_violations: 0,
        events: 0,
    };
    let (mut z, mut tz) = (z0, 0.0);
    loop {
        let t = field.peek_time();
        if t > horizon {
            break;
        }
        let atom = field.pop();
        let ui = state.potential_at(atom.neuron, atom.t, params.alpha);
        if atom.mark > params.lambda(ui) {
            continue;
        }
        state.flow_to(atom.t, params);
        let z_minus = z * (-aux.r * (atom.t - tz)).exp();
        let total_minus = state.total_rate;
        if !dominated(z_minus, total_minus) {
            diag.domination_violations += 1;
        }
        state.fire(atom.neuron, params);
        let ratio = n * z_minus / total_minus;
        let jump = ratio >= 1.0 || coin.random::<f64>() < ratio;
        z = if jump { aux.z_n.min(aux.m_n(z_minus)) } else { z_minus };
        tz = atom.t;
        if !dominated(z, state.total_rate) {
            diag.domination_violations += 1;
        }
        diag.events += 1;
        diag.times.push(atom.t);
        diag.discrepancy.push(state.lambda_bar() - z);
    }
    Ok(diag)
}

/// `h (√(λ* t) + 2 t λ*) e^{(α + h k + λ*) t} √N`, the bound on the expected
/// total distance between the network and its independent mean-field copies.
pub fn chaos_bound(params: &ModelParams, t: f64) -> f64 {
    let ls = params.lambda_star();
    let (h, k, a) = (params.h, params.k(), params.alpha);
    h * ((ls * t).sqrt() + 2.0 * t * ls) * ((a + h * k + ls) * t).exp() * (params.n as f64).sqrt()
}

/// Couples the network with `N` independent copies of the mean-field
/// neuron, whose drift `h z_t` is read from `rate`, through the shared
/// per-neuron noise. Records `Σ_i |U_i − Ū_i|` at multiples of `dt`.
pub fn couple_chaos(
    init: &[f64],
    params: &ModelParams,
    rate: Option<&RatePath>,
    horizon: f64,
    dt: f64,
    key: &StreamKey,
) -> Result<CouplingDiagnostics> {
    let rate = rate.ok_or_else(|| Error::Argument("the chaos coupling needs a mean-field rate path".into()))?;
    if rate.horizon() < horizon {
        return Err(Error::Argument(format!(
            "rate path covers [0, {}] but the horizon is {horizon}",
            rate.horizon()
        )));
    }
    let mut state = SystemState::new(init.to_vec(), params)?;
    let mut field = PoissonField::new(&key.with_purpose(Purpose::NOISE), params.n, params.lambda_star(), 0.0);
    // mean-field copies: value at their own last update time
    let mut bar_t = vec![0.0; params.n];
    let mut bar_u = init.to_vec();
    let h = params.h;
    let alpha = params.alpha;
    let bar_at = |i: usize, t: f64, bar_t: &[f64], bar_u: &[f64]| {
        bar_u[i] * (-alpha * (t - bar_t[i])).exp() + h * rate.drift_integral(bar_t[i], t)
    };
    let mut grid: Vec<f64> = Vec::new();
    if dt > 0.0 {
        let steps = (horizon / dt + 1e-9).floor() as usize;
        grid.extend((0..=steps).map(|j| (j as f64 * dt).min(horizon)));
    }
    if grid.last().is_none_or(|&t| t < horizon) {
        grid.push(horizon);
    }
    let mut diag = CouplingDiagnostics {
        times: Vec::with_capacity(grid.len()),
        discrepancy: Vec::with_capacity(grid.len()),
        coalescence_time: None,
        domination_violations: 0,
        events: 0,
    };
    for &g in &grid {
        while field.peek_time() <= g {
            let atom = field.pop();
            let i = atom.neuron;
            let ui = state.potential_at(i, atom.t, alpha);
            let bi = bar_at(i, atom.t, &bar_t, &bar_u);
            if atom.mark <= params.lambda(bi) {
                bar_t[i] = atom.t;
                bar_u[i] = 0.0;
            }
            if atom.mark <= params.lambda(ui) {
                state.flow_to(atom.t, params);
                state.fire(i, params);
                diag.events += 1;
            }
        }
        state.flow_to(g, params);
        let d: f64 = (0..params.n)
            .map(|i| (state.u[i] - bar_at(i, g, &bar_t, &bar_u)).abs())
            .sum();
        diag.times.push(g);
        diag.discrepancy.push(d);
    }
    Ok(diag)
}

/// Two copies of the network driven by the same per-neuron noise.
///
/// Both states are flowed together at every event where either fires, so
/// once they coincide they perform identical floating-point operations and
/// remain bitwise equal.
pub struct SyncPair<'p> {
    params: &'p ModelParams,
    pub a: SystemState,
    pub b: SystemState,
    field: PoissonField,
    pub coalescence_time: Option<f64>,
    pub events: u64,
}

impl<'p> SyncPair<'p> {
    pub fn new(params: &'p ModelParams, a: SystemState, b: SystemState, key: &StreamKey) -> Result<Self> {
        if a.n() != b.n() || a.n() != params.n {
            return Err(Error::Argument(format!(
                "coupled states must both have N = {} neurons (got {} and {})",
                params.n,
                a.n(),
                b.n()
            )));
        }
        let t0 = a.t.max(b.t);
        let field = PoissonField::new(&key.with_purpose(Purpose::NOISE), params.n, params.lambda_star(), t0);
        let mut a = a;
        let mut b = b;
        a.flow_to(t0, params);
        b.flow_to(t0, params);
        let coalescence_time = (a.u == b.u).then_some(t0);
        Ok(SyncPair {
            params,
            a,
            b,
            field,
            coalescence_time,
            events: 0,
        })
    }

    /// Advances to the next atom at which at least one copy fires, or
    /// flows both to `horizon`. Returns `true` if an event happened.
    pub fn step(&mut self, horizon: f64) -> bool {
        let p = self.params;
        loop {
            if self.field.peek_time() > horizon {
                self.a.flow_to(horizon, p);
                self.b.flow_to(horizon, p);
                return false;
            }
            let atom = self.field.pop();
            let i = atom.neuron;
            let fire_a = atom.mark <= p.lambda(self.a.potential_at(i, atom.t, p.alpha));
            let fire_b = atom.mark <= p.lambda(self.b.potential_at(i, atom.t, p.alpha));
            if !(fire_a || fire_b) {
                continue;
            }
            self.a.flow_to(atom.t, p);
            self.b.flow_to(atom.t, p);
            if fire_a {
                self.a.fire(i, p);
            }
            if fire_b {
                self.b.fire(i, p);
            }
            self.events += 1;
            if self.coalescence_time.is_none() && self.a.u == self.b.u {
                self.coalescence_time = Some(atom.t);
            }
            return true;
        }
    }

    /// `Σ_i |λ(U_i) − λ(Ũ_i)|`.
    pub fn rate_distance(&self) -> f64 {
        let p = self.params;
        self.a
            .u
            .iter()
            .zip(&self.b.u)
            .map(|(&x, &y)| (p.lambda(x) - p.lambda(y)).abs())
            .sum()
    }

    /// Runs to `horizon`, calling `on_grid` at every multiple of `dt` and
    /// at the horizon. Returns `false` if the event budget ran out.
    pub fn run_grid<F: FnMut(&SyncPair<'p>)>(&mut self, horizon: f64, dt: f64, cap: u64, mut on_grid: F) -> bool {
        let t0 = self.a.t;
        let mut grid: Vec<f64> = Vec::new();
        if dt > 0.0 {
            let steps = ((horizon - t0) / dt + 1e-9).floor() as u64;
            grid.extend((1..=steps).map(|j| (t0 + j as f64 * dt).min(horizon)));
        }
        if grid.last().map_or(horizon > t0, |&t| t < horizon) {
            grid.push(horizon);
        }
        on_grid(self);
        let start = self.events;
        for g in grid {
            while self.step(g) {
                if self.events - start >= cap {
                    return false;
                }
            }
            on_grid(self);
        }
        true
    }
}

/// Synchronous coupling of two networks; records the rate distance
/// `Σ_i |λ(U_i) − λ(Ũ_i)|` at multiples of `dt` and the coalescence time.
pub fn couple_synchronous(
    u0: &[f64],
    v0: &[f64],
    params: &ModelParams,
    horizon: f64,
    dt: f64,
    key: &StreamKey,
) -> Result<CouplingDiagnostics> {
    if u0.len() != v0.len() {
        return Err(Error::Argument(format!(
            "mismatched sizes {} and {}",
            u0.len(),
            v0.len()
        )));
    }
    let a = SystemState::new(u0.to_vec(), params)?;
    let b = SystemState::new(v0.to_vec(), params)?;
    let mut pair = SyncPair::new(params, a, b, key)?;
    let mut times = Vec::new();
    let mut discrepancy = Vec::new();
    pair.run_grid(horizon, dt, u64::MAX, |p| {
        times.push(p.a.t);
        discrepancy.push(p.rate_distance());
    });
    Ok(CouplingDiagnostics {
        times,
        discrepancy,
        coalescence_time: pair.coalescence_time,
        domination_violations: 0,
        events: pair.events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bound_value() {
        let p = ModelParams::piecewise_linear(100, 1.0, 10.0, 1.0, 1.0).unwrap();
        let expected = 10.0 * 3.0 * 12f64.exp() * 10.0;
        assert!((chaos_bound(&p, 1.0) - expected).abs() <= 1e-12 * expected);
    }

    #[test]
    fn equal_starts_coalesce_immediately() {
        let p = ModelParams::piecewise_linear(10, 1.0, 2.0, 1.0, 1.0).unwrap();
        let u = vec![0.5; 10];
        let d = couple_synchronous(&u, &u, &p, 5.0, 1.0, &StreamKey::new(1, 0, Purpose::NOISE)).unwrap();
        assert_eq!(d.coalescence_time, Some(0.0));
        assert!(d.discrepancy.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_aux_start_is_dominated() {
        let p = ModelParams::piecewise_linear(100, 1.0, 10.0, 1.0, 1.0).unwrap();
        let d = couple_u_z(&vec![1.0; 100], 0.0, &p, 5.0, &StreamKey::new(2, 0, Purpose::NOISE)).unwrap();
        assert_eq!(d.domination_violations, 0);
        let last = *d.discrepancy.last().unwrap();
        assert!(last >= 0.0);
    }
}
