//! Exact sampling of the last spiking time.
//!
//! After every spike a fresh `E ~ Exp(1)` is compared with the total
//! residual intensity `Σ_i ∫_0^∞ λ(u_i e^{-αs}) ds`. If `E` is larger the
//! network never fires again and the current time is the last spike;
//! otherwise the next spike time solves `∫_0^τ Λ = E`.

use rand_distr::{Distribution, Exp1};

use super::integrated::invert_integrated_rate;
use super::state::{SpikeEvent, SystemState};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{Purpose, StreamKey};

/// Default spike budget of an extinction run.
pub const DEFAULT_CAP: u64 = 100_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct ExtinctionRun {
    /// Time of the last spike (0 when the network never fires). When
    /// `truncated`, the time of the last simulated spike.
    pub last_spike: f64,
    pub spikes: u64,
    pub events: Vec<SpikeEvent>,
    pub truncated: bool,
    /// Largest inversion residual met along the run.
    pub max_residual: f64,
}

pub fn simulate_until_extinction(
    init: &[f64],
    params: &ModelParams,
    key: &StreamKey,
    cap: u64,
    keep_log: bool,
) -> Result<ExtinctionRun> {
    if !params.rate.is_piecewise_linear() {
        return Err(Error::UnsupportedRate(
            "the extinction sampler needs the piecewise-linear rate".into(),
        ));
    }
    let mut state = SystemState::new(init.to_vec(), params)?;
    let mut rng = key.with_purpose(Purpose::EXTINCTION).rng();
    let mut events = Vec::new();
    let mut spikes = 0u64;
    let mut max_residual: f64 = 0.0;
    loop {
        let e: f64 = Exp1.sample(&mut rng);
        let Some(inv) = invert_integrated_rate(&state.u, e, params)? else {
            return Ok(ExtinctionRun {
                last_spike: state.t,
                spikes,
                events,
                truncated: false,
                max_residual,
            });
        };
        if spikes >= cap {
            return Ok(ExtinctionRun {
                last_spike: state.t,
                spikes,
                events,
                truncated: true,
                max_residual,
            });
        }
        max_residual = max_residual.max(inv.residual / e.max(1.0));
        let t = state.t + inv.tau;
        state.flow_to(t, params);
        let i = pick(&state, params, &mut rng);
        state.fire(i, params);
        spikes += 1;
        if keep_log {
            events.push(SpikeEvent { t, neuron: i });
        }
    }
}

fn pick(state: &SystemState, params: &ModelParams, rng: &mut impl rand::Rng) -> usize {
    let target = rng.random::<f64>() * state.total_rate;
    let mut acc = 0.0;
    let mut chosen = 0;
    for (i, &x) in state.u.iter().enumerate() {
        let r = params.lambda(x);
        if r > 0.0 {
            acc += r;
            chosen = i;
            if target < acc {
                break;
            }
        }
    }
    chosen
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn silent_start_is_extinct_at_zero() {
        let p = ModelParams::piecewise_linear(5, 1.0, 1.0, 1.0, 1.0).unwrap();
        let run =
            simulate_until_extinction(&[0.0; 5], &p, &StreamKey::new(3, 0, Purpose::EXTINCTION), 10, true).unwrap();
        assert_eq!(run.last_spike, 0.0);
        assert!(run.events.is_empty());
        assert!(!run.truncated);
    }

    #[test]
    fn cap_truncates() {
        let p = ModelParams::piecewise_linear(50, 1.0, 10.0, 1.0, 1.0).unwrap();
        let run =
            simulate_until_extinction(&[2.0; 50], &p, &StreamKey::new(3, 0, Purpose::EXTINCTION), 100, false).unwrap();
        assert!(run.truncated);
        assert_eq!(run.spikes, 100);
    }
}
