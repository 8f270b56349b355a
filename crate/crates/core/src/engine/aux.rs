//! The one-dimensional auxiliary process `Z^N`, pathwise dominated by `Λ^N/N`.
//!
//! `Z` decays at rate `r` and jumps at rate `N z` to `min(z_N, m_N(z))`. The
//! clamped variant, used for exit below a level `η`, jumps at rate
//! `N · (η ∨ z ∧ z_∞)` to `z ∨ (z_N ∧ m_N(z))`; the two coincide on
//! `[η, z_N]`.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{Purpose, StreamKey};

/// Constants of the auxiliary process for one population size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxParams {
    pub n: usize,
    pub kh: f64,
    pub lambda_star: f64,
    pub r: f64,
    /// `λ(u*)`.
    pub lambda_threshold: f64,
    /// `λ(u* − h/N)`.
    pub lambda_shifted: f64,
    /// Ceiling `z_N`.
    pub z_n: f64,
    /// `(1 − λ*/(kh)) λ(u*)`.
    pub z_inf: f64,
}

impl AuxParams {
    /// Validates that `z_N > 0` and that `m_N` is positive and
    /// non-decreasing on `[0, z_N]`.
    ///
    /// Monotonicity is checked in the weak sense: the domination argument
    /// only needs `m_N(z) ≤ m_N(z')` for `z ≤ z'`.
    pub fn new(params: &ModelParams) -> Result<Self> {
        let n = params.n as f64;
        let u_star = params.u_star();
        if !(n * u_star > params.h) {
            return Err(Error::Precondition(format!(
                "auxiliary process needs N > h/u* = {}, got N = {}",
                params.h / u_star,
                params.n
            )));
        }
        let kh = params.k() * params.h;
        let ls = params.lambda_star();
        let shifted = params.lambda(u_star - params.h / n);
        let z_n = (1.0 - ls / kh - 1.0 / n) * shifted - ls / n;
        let aux = AuxParams {
            n: params.n,
            kh,
            lambda_star: ls,
            r: params.r(),
            lambda_threshold: params.lambda_at_threshold(),
            lambda_shifted: shifted,
            z_n,
            z_inf: (1.0 - ls / kh) * params.lambda_at_threshold(),
        };
        if !(z_n > 0.0) {
            return Err(Error::Precondition(format!(
                "z_N = {z_n} is not positive for N = {}",
                params.n
            )));
        }
        let slope = 1.0 - kh / (n * shifted);
        if slope < 0.0 {
            return Err(Error::Precondition(format!(
                "m_N is decreasing (slope {slope}) for N = {}; a larger N is needed",
                params.n
            )));
        }
        if !(aux.m_n(0.0) > 0.0) {
            return Err(Error::Precondition(format!(
                "m_N(0) = {} is not positive",
                aux.m_n(0.0)
            )));
        }
        Ok(aux)
    }

    /// `m_N(z) = z + (kh/N)(1 − z/λ(u*−h/N) − 1/N)₊ − λ*/N`.
    pub fn m_n(&self, z: f64) -> f64 {
        let n = self.n as f64;
        z + self.kh / n * (1.0 - z / self.lambda_shifted - 1.0 / n).max(0.0) - self.lambda_star / n
    }
}

/// Which auxiliary dynamics to run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxVariant {
    /// Rate `N z`, target `z_N ∧ m_N(z)`; requires `z ≤ z_N`.
    Plain,
    /// Rate `N (η ∨ z ∧ z_∞)`, target `z ∨ (z_N ∧ m_N(z))`.
    Clamped { eta: f64 },
}

impl AuxVariant {
    fn target(&self, aux: &AuxParams, z: f64) -> f64 {
        let t = aux.z_n.min(aux.m_n(z));
        match self {
            AuxVariant::Plain => t,
            AuxVariant::Clamped { .. } => z.max(t),
        }
    }

    /// Time from `z` to the next jump for a unit-exponential mark `e`, or
    /// `None` when the decaying rate never accumulates `e`.
    fn waiting_time(&self, aux: &AuxParams, z: f64, e: f64) -> Option<f64> {
        let n = aux.n as f64;
        let r = aux.r;
        let m = e / n;
        match *self {
            AuxVariant::Plain => {
                // ∫_0^τ z e^{-rs} ds = (z/r)(1 - e^{-rτ})
                let x = r * m / z;
                if !(x < 1.0) {
                    None
                } else {
                    Some(-(-x).ln_1p() / r)
                }
            }
            AuxVariant::Clamped { eta } => {
                let zi = aux.z_inf;
                // saturated piece above z_∞
                let s1 = if z > zi { (z / zi).ln() / r } else { 0.0 };
                let mass1 = zi * s1;
                if m <= mass1 {
                    return Some(m / zi);
                }
                let z1 = z.min(zi);
                let m2 = m - mass1;
                let mass2 = if z1 > eta { (z1 - eta) / r } else { 0.0 };
                if m2 <= mass2 {
                    return Some(s1 - (-(r * m2 / z1)).ln_1p() / r);
                }
                let s2 = if z1 > eta { s1 + (z1 / eta).ln() / r } else { s1 };
                Some(s2 + (m2 - mass2) / eta)
            }
        }
    }
}

/// Jump skeleton of an auxiliary path: value `values[j]` right after time
/// `times[j]`, decaying at rate `r` until the next entry.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxPath {
    pub r: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub horizon: f64,
}

impl AuxPath {
    pub fn value_at(&self, t: f64) -> f64 {
        let j = self.times.partition_point(|&s| s <= t).saturating_sub(1);
        self.values[j] * (-self.r * (t - self.times[j])).exp()
    }
}

fn check_start(aux: &AuxParams, variant: AuxVariant, z0: f64) -> Result<()> {
    let ok = match variant {
        AuxVariant::Plain => (0.0..=aux.z_n).contains(&z0),
        AuxVariant::Clamped { eta } => z0 >= 0.0 && eta > 0.0,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "invalid auxiliary start z0 = {z0} (z_N = {})",
            aux.z_n
        )))
    }
}

/// Exact simulation of the auxiliary process on `[0, horizon]`.
pub fn simulate_aux(aux: &AuxParams, variant: AuxVariant, z0: f64, horizon: f64, key: &StreamKey) -> Result<AuxPath> {
    check_start(aux, variant, z0)?;
    let mut rng = key.with_purpose(Purpose::AUX).rng();
    let mut times = vec![0.0];
    let mut values = vec![z0];
    let (mut t, mut z) = (0.0, z0);
    if z0 > 0.0 {
        while let Some(w) = variant.waiting_time(aux, z, Exp1.sample(&mut rng)) {
            if t + w > horizon {
                break;
            }
            t += w;
            z = variant.target(aux, z * (-aux.r * w).exp());
            times.push(t);
            values.push(z);
        }
    }
    Ok(AuxPath {
        r: aux.r,
        times,
        values,
        horizon,
    })
}

/// Result of running the auxiliary process until it first drops to `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuxExit {
    pub tau: f64,
    pub jumps: u64,
    pub truncated: bool,
}

/// First time the (clamped) auxiliary process falls to `eta`, from `z0`.
pub fn aux_exit_time(aux: &AuxParams, eta: f64, z0: f64, key: &StreamKey, cap: u64) -> Result<AuxExit> {
    let variant = AuxVariant::Clamped { eta };
    check_start(aux, variant, z0)?;
    let mut rng: ChaCha8Rng = key.with_purpose(Purpose::AUX).rng();
    let (mut t, mut z) = (0.0, z0);
    let mut jumps = 0u64;
    if z <= eta {
        return Ok(AuxExit {
            tau: 0.0,
            jumps,
            truncated: false,
        });
    }
    loop {
        let drain = (z / eta).ln() / aux.r;
        let w = variant
            .waiting_time(aux, z, Exp1.sample(&mut rng))
            .unwrap_or(f64::INFINITY);
        if w >= drain {
            return Ok(AuxExit {
                tau: t + drain,
                jumps,
                truncated: false,
            });
        }
        if jumps >= cap {
            return Ok(AuxExit {
                tau: t,
                jumps,
                truncated: true,
            });
        }
        t += w;
        z = variant.target(aux, z * (-aux.r * w).exp());
        jumps += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn map_and_ceiling_example() {
        let p = ModelParams::piecewise_linear(10, 1.0, 1.0, 1.0, 0.5).unwrap();
        let aux = AuxParams::new(&p).unwrap();
        assert!((aux.m_n(0.2) - 0.19).abs() < 1e-12);
        assert!((aux.z_n - 0.11).abs() < 1e-12);
    }

    #[test]
    fn fixed_point_of_map() {
        let p = ModelParams::piecewise_linear(200, 1.0, 10.0, 1.0, 1.0).unwrap();
        let aux = AuxParams::new(&p).unwrap();
        let z = aux.z_n + aux.lambda_star / aux.n as f64;
        assert!((aux.m_n(z) - z).abs() < 1e-12);
        assert!(aux.m_n(0.5 * aux.z_n) > 0.5 * aux.z_n);
    }

    #[test]
    fn zero_start_stays_zero() {
        let p = ModelParams::piecewise_linear(100, 1.0, 10.0, 1.0, 1.0).unwrap();
        let aux = AuxParams::new(&p).unwrap();
        let path = simulate_aux(&aux, AuxVariant::Plain, 0.0, 10.0, &StreamKey::new(1, 0, Purpose::AUX)).unwrap();
        assert_eq!(path.values, vec![0.0]);
        assert_eq!(path.value_at(5.0), 0.0);
    }

    #[test]
    fn small_n_is_rejected() {
        let p = ModelParams::piecewise_linear(5, 1.0, 10.0, 1.0, 1.0).unwrap();
        assert!(AuxParams::new(&p).is_err());
    }

    #[test]
    fn clamped_waiting_time_is_consistent() {
        let p = ModelParams::piecewise_linear(50, 1.0, 10.0, 1.0, 1.0).unwrap();
        let aux = AuxParams::new(&p).unwrap();
        let v = AuxVariant::Clamped { eta: 0.2 };
        // integrate the clamped rate numerically up to the returned time
        for &(z, e) in &[(1.5, 3.0), (1.5, 80.0), (0.5, 10.0), (0.5, 200.0), (0.1, 5.0)] {
            let w = v.waiting_time(&aux, z, e).unwrap();
            let f = |s: f64| 50.0 * (z * (-s).exp()).clamp(0.2, aux.z_inf);
            let q = crate::numeric::quad::integrate(f, 0.0, w, 1e-12, 1e-12, 2000);
            assert!((q.value - e).abs() < 1e-8, "{z} {e} {}", q.value);
        }
    }
}
