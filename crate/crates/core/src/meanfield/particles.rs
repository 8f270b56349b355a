//! Large finite networks used as surrogates of the non-linear limit.

use rand::Rng;

use super::density::DensityTable;
use super::path::RatePath;
use crate::engine::integrated::pl_integrated;
use crate::engine::sim::{Backend, Simulator, Step};
use crate::engine::state::SystemState;
use crate::error::{Error, Result};
use crate::model::{ModelParams, RateSpec};
use crate::rng::{Purpose, StreamKey};
use crate::stats::mean_se;

/// Law of i.i.d. initial potentials.
#[derive(Debug, Clone)]
pub enum InitLaw {
    Dirac(f64),
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Resampled with replacement.
    Samples(Vec<f64>),
    Density(Box<DensityTable>),
}

impl InitLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            InitLaw::Dirac(x) => *x,
            InitLaw::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            InitLaw::Samples(v) => v[rng.random_range(0..v.len())],
            InitLaw::Density(t) => t.sample(rng),
        }
    }

    pub fn draw(&self, n: usize, key: &StreamKey) -> Vec<f64> {
        let mut rng = key.with_purpose(Purpose::INIT).rng();
        (0..n).map(|_| self.sample(&mut rng)).collect()
    }
}

fn pl(params: &ModelParams) -> Result<(f64, f64)> {
    match params.rate {
        RateSpec::PiecewiseLinear { k, lambda_star } => Ok((k, lambda_star)),
        _ => Err(Error::UnsupportedRate(
            "exact time averages need the piecewise-linear rate".into(),
        )),
    }
}

/// Averages of `λ̄` over consecutive cells of width `dt`, integrated exactly
/// along the leak between events.
#[derive(Debug, Clone, PartialEq)]
pub struct CellAverages {
    pub dt: f64,
    pub values: Vec<f64>,
    pub spikes: u64,
}

pub fn cell_averaged_lambda_bar(
    params: &ModelParams,
    init: Vec<f64>,
    horizon: f64,
    dt: f64,
    key: &StreamKey,
) -> Result<CellAverages> {
    let (k, ls) = pl(params)?;
    let alpha = params.alpha;
    let cells = ((horizon / dt).round() as usize).max(1);
    let state = SystemState::new(init, params)?;
    let mut sim = Simulator::new(params, state, Backend::Thinning, key)?;
    let n = params.n as f64;
    let mut values = Vec::with_capacity(cells);
    let mut snapshot = sim.state.u.clone();
    for j in 1..=cells {
        let target = horizon * j as f64 / cells as f64;
        let start = sim.state.t;
        let mut integral = 0.0;
        loop {
            snapshot.clone_from(&sim.state.u);
            let t_prev = sim.state.t;
            let step = sim.next_event(target);
            let tau = sim.state.t - t_prev;
            integral += snapshot
                .iter()
                .map(|&u| pl_integrated(u, tau, k, ls, alpha))
                .sum::<f64>();
            if step == Step::Horizon {
                break;
            }
        }
        values.push(integral / (n * (target - start)));
    }
    Ok(CellAverages {
        dt: horizon / cells as f64,
        values,
        spikes: sim.spikes,
    })
}

/// Time average of `λ̄` over `[0, horizon]` with a batch-means standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeAverage {
    pub mean: f64,
    pub se: f64,
    pub spikes: u64,
}

pub fn time_averaged_lambda_bar(
    params: &ModelParams,
    init: Vec<f64>,
    horizon: f64,
    batches: usize,
    key: &StreamKey,
) -> Result<TimeAverage> {
    if batches < 2 {
        return Err(Error::Argument("batch means need at least two batches".into()));
    }
    let cells = cell_averaged_lambda_bar(params, init, horizon, horizon / batches as f64, key)?;
    let (mean, se) = mean_se(&cells.values);
    Ok(TimeAverage {
        mean,
        se,
        spikes: cells.spikes,
    })
}

/// Mean-rate path of an `m`-particle network started i.i.d. from `law`,
/// as a surrogate for the non-linear `z_t`.
pub fn surrogate_rate_path(
    params: &ModelParams,
    law: &InitLaw,
    m: usize,
    horizon: f64,
    dt: f64,
    key: &StreamKey,
) -> Result<RatePath> {
    let big = params.with_n(m);
    let init = law.draw(m, &key.child(1));
    let cells = cell_averaged_lambda_bar(&big, init, horizon, dt, &key.child(2))?;
    RatePath::new(cells.dt, params.alpha, cells.values)
}

/// Mean potential of a network sampled at `times` (sorted).
pub fn mean_potential_at(params: &ModelParams, init: Vec<f64>, times: &[f64], key: &StreamKey) -> Result<Vec<f64>> {
    let state = SystemState::new(init, params)?;
    let mut sim = Simulator::new(params, state, Backend::Thinning, key)?;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        while let Step::Spike(_) = sim.next_event(t) {}
        out.push(sim.state.mean_potential());
    }
    Ok(out)
}
