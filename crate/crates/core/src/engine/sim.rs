//! Next-spike sampling.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use super::integrated::invert_integrated_rate;
use super::noise::PoissonField;
use super::state::{SpikeEvent, SystemState};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{Purpose, StreamKey};

/// Sampling scheme for the next spike.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Per-neuron marked Poisson atoms at rate `λ*`, merged into a
    /// rate-`Nλ*` proposal clock.
    #[default]
    Thinning,
    /// Closed-form integrated-rate inversion (piecewise-linear rate only).
    Inversion,
}

/// Outcome of advancing to the next spike or the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Step {
    Spike(SpikeEvent),
    /// No spike before the horizon; the state has been flowed to it.
    Horizon,
}

/// Advances `state` through thinning atoms of `field` until an accepted
/// atom or `horizon`. A candidate of neuron `i` with mark `m` at time `t`
/// is accepted iff `m ≤ λ(u_i(t))`.
pub fn step_thinning(state: &mut SystemState, params: &ModelParams, field: &mut PoissonField, horizon: f64) -> Step {
    loop {
        let t = field.peek_time();
        if t > horizon {
            state.flow_to(horizon, params);
            return Step::Horizon;
        }
        let atom = field.pop();
        let ui = state.potential_at(atom.neuron, atom.t, params.alpha);
        if atom.mark <= params.lambda(ui) {
            state.flow_to(atom.t, params);
            state.fire(atom.neuron, params);
            return Step::Spike(SpikeEvent {
                t: atom.t,
                neuron: atom.neuron,
            });
        }
    }
}

/// Samples the next spike by inverting the integrated total rate, then
/// picks the spiking neuron proportionally to its rate.
pub fn step_inversion(
    state: &mut SystemState,
    params: &ModelParams,
    rng: &mut ChaCha8Rng,
    horizon: f64,
) -> Result<Step> {
    let e: f64 = Exp1.sample(rng);
    let next = invert_integrated_rate(&state.u, e, params)?;
    let t = match next {
        Some(inv) if state.t + inv.tau <= horizon => state.t + inv.tau,
        // memoryless restart: a fresh mark is drawn on the next call
        _ => {
            state.flow_to(horizon, params);
            return Ok(Step::Horizon);
        }
    };
    state.flow_to(t, params);
    let i = select_neuron(state, params, rng);
    state.fire(i, params);
    Ok(Step::Spike(SpikeEvent { t, neuron: i }))
}

fn select_neuron(state: &SystemState, params: &ModelParams, rng: &mut ChaCha8Rng) -> usize {
    let target = rng.random::<f64>() * state.total_rate;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &x) in state.u.iter().enumerate() {
        let r = params.lambda(x);
        if r > 0.0 {
            acc += r;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

#[allow(clippy::large_enum_variant)]
enum Driver {
    Thinning(PoissonField),
    Inversion(ChaCha8Rng),
}

/// Summary of a bounded run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOutcome {
    pub spikes: u64,
    pub truncated: bool,
}

/// Event-driven simulator owning its state and randomness.
pub struct Simulator<'p> {
    params: &'p ModelParams,
    pub state: SystemState,
    driver: Driver,
    pub spikes: u64,
}

impl<'p> Simulator<'p> {
    /// The noise is derived from `key`: per-neuron sub-streams of
    /// `key.with_purpose(NOISE)` for thinning, `SELECTION` for inversion.
    pub fn new(params: &'p ModelParams, state: SystemState, backend: Backend, key: &StreamKey) -> Result<Self> {
        if state.n() != params.n {
            return Err(Error::Argument(format!(
                "state has {} neurons, params {}",
                state.n(),
                params.n
            )));
        }
        let driver = match backend {
            Backend::Thinning => Driver::Thinning(PoissonField::new(
                &key.with_purpose(Purpose::NOISE),
                params.n,
                params.lambda_star(),
                state.t,
            )),
            Backend::Inversion => {
                if !params.rate.is_piecewise_linear() {
                    return Err(Error::UnsupportedRate(
                        "inversion backend needs the piecewise-linear rate".into(),
                    ));
                }
                Driver::Inversion(key.with_purpose(Purpose::SELECTION).rng())
            }
        };
        Ok(Simulator {
            params,
            state,
            driver,
            spikes: 0,
        })
    }

    pub fn params(&self) -> &ModelParams {
        self.params
    }

    /// Advances to the next spike, or flows to `horizon` if none occurs.
    pub fn next_event(&mut self, horizon: f64) -> Step {
        let step = match &mut self.driver {
            Driver::Thinning(field) => step_thinning(&mut self.state, self.params, field, horizon),
            Driver::Inversion(rng) => step_inversion(&mut self.state, self.params, rng, horizon)
                .expect("inversion backend validated at construction"),
        };
        if let Step::Spike(_) = step {
            self.spikes += 1;
        }
        step
    }

    /// Runs to `horizon`, calling `on_spike` after every spike. Stops early
    /// once `cap` spikes have been produced.
    pub fn run<F: FnMut(&SpikeEvent, &SystemState)>(&mut self, horizon: f64, cap: u64, mut on_spike: F) -> RunOutcome {
        let start = self.spikes;
        loop {
            if self.spikes - start >= cap {
                return RunOutcome {
                    spikes: self.spikes - start,
                    truncated: true,
                };
            }
            match self.next_event(horizon) {
                Step::Spike(ev) => on_spike(&ev, &self.state),
                Step::Horizon => {
                    return RunOutcome {
                        spikes: self.spikes - start,
                        truncated: false,
                    }
                }
            }
        }
    }

    /// Like [`run`](Self::run), additionally calling `on_grid` with the state
    /// at every multiple of `dt` in `[0, horizon]` (including both ends).
    pub fn run_with_grid<F, G>(
        &mut self,
        horizon: f64,
        dt: f64,
        cap: u64,
        mut on_spike: F,
        mut on_grid: G,
    ) -> RunOutcome
    where
        F: FnMut(&SpikeEvent, &SystemState),
        G: FnMut(&SystemState),
    {
        let start = self.spikes;
        let t0 = self.state.t;
        let steps = if dt > 0.0 {
            ((horizon - t0) / dt + 1e-9).floor() as u64
        } else {
            0
        };
        let mut grid: Vec<f64> = (1..=steps).map(|j| (t0 + j as f64 * dt).min(horizon)).collect();
        if grid.last().map_or(horizon > t0, |&t| t < horizon) {
            grid.push(horizon);
        }
        on_grid(&self.state);
        for target in grid {
            loop {
                if self.spikes - start >= cap {
                    return RunOutcome {
                        spikes: self.spikes - start,
                        truncated: true,
                    };
                }
                match self.next_event(target) {
                    Step::Spike(ev) => on_spike(&ev, &self.state),
                    Step::Horizon => break,
                }
            }
            on_grid(&self.state);
        }
        RunOutcome {
            spikes: self.spikes - start,
            truncated: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spike_moves_mass_as_prescribed() {
        let p = ModelParams::piecewise_linear(2, 1.0, 1.0, 1.0, 5.0).unwrap();
        let mut s = SystemState::new(vec![0.7, 0.0], &p).unwrap();
        s.fire(0, &p);
        assert_eq!(s.u, vec![0.0, 0.5]);
    }

    #[test]
    fn silent_state_never_spikes() {
        let p = ModelParams::piecewise_linear(1, 1.0, 1.0, 1.0, 1.0).unwrap();
        for backend in [Backend::Thinning, Backend::Inversion] {
            let s = SystemState::new(vec![0.0], &p).unwrap();
            let mut sim = Simulator::new(&p, s, backend, &StreamKey::new(1, 0, Purpose::NOISE)).unwrap();
            assert_eq!(sim.next_event(100.0), Step::Horizon);
            assert_eq!(sim.state.t, 100.0);
        }
    }
}
