use std::io::{self, Write};

use rayon::prelude::*;
use serde::Serialize;

use super::domain::{DomainSpec, RateInterval};
use crate::engine::sim::{Backend, Simulator, Step};
use crate::engine::state::SystemState;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::roots::bisect;
use crate::rng::StreamKey;
use crate::stats::{ks_exp1, mean_se, wilson};

/// How a first-passage run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PassageKind {
    /// `λ̄` left the domain.
    Exit,
    /// `λ̄` entered the trap.
    Trap,
    Horizon,
    /// The event budget ran out first.
    Truncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Passage {
    pub t: f64,
    pub kind: PassageKind,
    pub lambda_bar: f64,
    pub events: u64,
}

/// Mean rate at time `s` after a snapshot, assuming no spike in between.
fn decayed_lambda_bar(u: &[f64], s: f64, params: &ModelParams) -> f64 {
    let decay = (-params.alpha * s).exp();
    u.iter().map(|&x| params.lambda(x * decay)).sum::<f64>() / u.len() as f64
}

/// Time in `[0, dt]` at which the decaying mean rate of `u` reaches `level`.
fn down_crossing(u: &[f64], dt: f64, level: f64, params: &ModelParams) -> f64 {
    bisect(
        |s| decayed_lambda_bar(u, s, params) - level,
        0.0,
        dt,
        1e-15 * (1.0 + dt),
        200,
    )
    .unwrap_or(dt)
}

/// Runs the network from `state` until `λ̄` leaves `domain`, enters
/// `trap` (if given), or time reaches `horizon`.
///
/// `λ̄` only decreases between spikes, so leaving through the lower edge
/// of the domain or entering the trap from above can happen during a
/// flow. Those crossings are located exactly by root-finding on the
/// decaying mean rate; jumps at spikes are checked after every event.
pub fn first_passage(
    state: SystemState,
    params: &ModelParams,
    domain: RateInterval,
    trap: Option<RateInterval>,
    horizon: f64,
    key: &StreamKey,
    cap: u64,
) -> Result<Passage> {
    let lb = state.lambda_bar();
    let t_start = state.t;
    if !domain.contains(lb) {
        return Ok(Passage {
            t: t_start,
            kind: PassageKind::Exit,
            lambda_bar: lb,
            events: 0,
        });
    }
    if trap.is_some_and(|k| k.contains(lb)) {
        return Ok(Passage {
            t: t_start,
            kind: PassageKind::Trap,
            lambda_bar: lb,
            events: 0,
        });
    }
    let chunk = 1.0 / params.alpha;
    let mut sim = Simulator::new(params, state, Backend::Thinning, key)?;
    let mut prev = sim.state.u.clone();
    loop {
        let t0 = sim.state.t;
        if t0 >= horizon {
            return Ok(Passage {
                t: t0,
                kind: PassageKind::Horizon,
                lambda_bar: sim.state.lambda_bar(),
                events: sim.spikes,
            });
        }
        if sim.spikes >= cap {
            return Ok(Passage {
                t: t0,
                kind: PassageKind::Truncated,
                lambda_bar: sim.state.lambda_bar(),
                events: sim.spikes,
            });
        }
        prev.copy_from_slice(&sim.state.u);
        let lb0 = sim.state.lambda_bar();
        let step = sim.next_event((t0 + chunk).min(horizon));
        let t1 = sim.state.t;
        let dt = t1 - t0;
        let lb_pre = match step {
            Step::Spike(_) => decayed_lambda_bar(&prev, dt, params),
            Step::Horizon => sim.state.lambda_bar(),
        };
        let mut hit: Option<(f64, PassageKind, f64)> = None;
        if let Some(k) = trap {
            if lb0 > k.hi && lb_pre <= k.hi {
                hit = Some((down_crossing(&prev, dt, k.hi, params), PassageKind::Trap, k.hi));
            }
        }
        if hit.is_none() && lb_pre < domain.lo {
            hit = Some((
                down_crossing(&prev, dt, domain.lo, params),
                PassageKind::Exit,
                domain.lo,
            ));
        }
        if let Some((s, kind, level)) = hit {
            return Ok(Passage {
                t: t0 + s,
                kind,
                lambda_bar: level,
                events: sim.spikes,
            });
        }
        if let Step::Spike(_) = step {
            let lb1 = sim.state.lambda_bar();
            if !domain.contains(lb1) {
                return Ok(Passage {
                    t: t1,
                    kind: PassageKind::Exit,
                    lambda_bar: lb1,
                    events: sim.spikes,
                });
            }
            if trap.is_some_and(|k| k.contains(lb1)) {
                return Ok(Passage {
                    t: t1,
                    kind: PassageKind::Trap,
                    lambda_bar: lb1,
                    events: sim.spikes,
                });
            }
        }
    }
}

/// One exit time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExitSample {
    pub tau: f64,
    pub replica: u64,
    pub init_id: usize,
    /// `λ̄` at the exit instant.
    pub lambda_bar: f64,
    pub events: u64,
    /// The event cap was hit; `tau` is then a lower bound.
    pub truncated: bool,
}

/// Samples `τ = inf{t ≥ 0 : λ̄_t ∉ 𝒟}` from `init`.
pub fn exit_time(
    domain: &DomainSpec,
    init: &[f64],
    params: &ModelParams,
    key: &StreamKey,
    cap: u64,
) -> Result<ExitSample> {
    let state = SystemState::new(init.to_vec(), params)?;
    let d = domain.domain();
    let lb = state.lambda_bar();
    if !d.contains(lb) {
        return Err(Error::Argument(format!(
            "initial λ̄ = {lb} lies outside the domain [{}, {}]",
            d.lo, d.hi
        )));
    }
    let p = first_passage(state, params, d, None, f64::INFINITY, key, cap)?;
    Ok(ExitSample {
        tau: p.t,
        replica: key.replica,
        init_id: 0,
        lambda_bar: p.lambda_bar,
        events: p.events,
        truncated: p.kind == PassageKind::Truncated,
    })
}

/// Mean exit time from one initial state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InitSummary {
    pub init_id: usize,
    pub replicas: usize,
    pub mean: f64,
    pub se: f64,
    pub truncated: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExitEnsembleReport {
    pub samples: Vec<ExitSample>,
    pub per_init: Vec<InitSummary>,
    /// Pooled mean and standard error of the raw exit times.
    pub mean: f64,
    pub se: f64,
    /// KS distance to `Exp(1)` of each `τ` divided by its own init's mean.
    pub ks: f64,
    /// Same, with each `τ` divided by the mean of the other samples from
    /// its init (removes the self-normalization bias).
    pub ks_leave_one_out: f64,
    /// `(t, |P(τ/E τ ≥ t) − e^{−t}|)` on a grid of `t`.
    pub sup_cdf_error: Vec<(f64, f64)>,
    /// `E_i τ / E_j τ` for every pair of inits.
    pub mean_ratio: Vec<Vec<f64>>,
    pub max_ratio_deviation: f64,
    /// Some sample hit the event cap.
    pub partial: bool,
}

const CDF_GRID_STEP: f64 = 0.05;
const CDF_GRID_END: f64 = 5.0;

impl ExitEnsembleReport {
    /// Builds the statistics from samples grouped by `init_id`.
    pub fn from_samples(samples: Vec<ExitSample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Argument("no exit samples".into()));
        }
        let inits = samples.iter().map(|s| s.init_id).max().unwrap_or(0) + 1;
        let mut groups: Vec<Vec<f64>> = vec![Vec::new(); inits];
        let mut truncated = vec![0usize; inits];
        for s in &samples {
            groups[s.init_id].push(s.tau);
            truncated[s.init_id] += s.truncated as usize;
        }
        let mut per_init = Vec::with_capacity(inits);
        let mut rescaled = Vec::with_capacity(samples.len());
        let mut rescaled_loo = Vec::with_capacity(samples.len());
        for (id, g) in groups.iter().enumerate() {
            if g.is_empty() {
                return Err(Error::Argument(format!("init {id} has no samples")));
            }
            let (mean, se) = mean_se(g);
            if !(mean > 0.0) {
                return Err(Error::Domain(format!("mean exit time from init {id} is {mean}")));
            }
            per_init.push(InitSummary {
                init_id: id,
                replicas: g.len(),
                mean,
                se,
                truncated: truncated[id],
            });
            let total: f64 = g.iter().sum();
            let n = g.len() as f64;
            for &t in g {
                rescaled.push(t / mean);
                if g.len() > 1 {
                    rescaled_loo.push(t / ((total - t) / (n - 1.0)));
                }
            }
        }
        let raw: Vec<f64> = samples.iter().map(|s| s.tau).collect();
        let (mean, se) = mean_se(&raw);
        let ks = ks_exp1(&rescaled)?;
        let ks_leave_one_out = if rescaled_loo.is_empty() {
            f64::NAN
        } else {
            ks_exp1(&rescaled_loo)?
        };

        let mut sorted = rescaled.clone();
        sorted.sort_by(f64::total_cmp);
        let steps = (CDF_GRID_END / CDF_GRID_STEP).round() as usize;
        let sup_cdf_error = (0..=steps)
            .map(|j| {
                let t = j as f64 * CDF_GRID_STEP;
                let at_least = sorted.len() - sorted.partition_point(|&x| x < t);
                (t, (at_least as f64 / sorted.len() as f64 - (-t).exp()).abs())
            })
            .collect();

        let means: Vec<f64> = per_init.iter().map(|s| s.mean).collect();
        let mean_ratio: Vec<Vec<f64>> = means.iter().map(|a| means.iter().map(|b| a / b).collect()).collect();
        let max_ratio_deviation = mean_ratio.iter().flatten().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
        let partial = samples.iter().any(|s| s.truncated);
        Ok(ExitEnsembleReport {
            samples,
            per_init,
            mean,
            se,
            ks,
            ks_leave_one_out,
            sup_cdf_error,
            mean_ratio,
            max_ratio_deviation,
            partial,
        })
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "replica,init_id,tau")?;
        for s in &self.samples {
            writeln!(w, "{},{},{}", s.replica, s.init_id, s.tau)?;
        }
        Ok(())
    }
}

/// Minimum replicas per init accepted by [`exit_ensemble`].
pub const MIN_REPLICAS: usize = 100;

/// Exit times from each of `inits`, `replicas` runs apiece, in parallel.
/// Samples are ordered by `(init_id, replica)` regardless of scheduling.
pub fn exit_ensemble(
    domain: &DomainSpec,
    inits: &[Vec<f64>],
    params: &ModelParams,
    replicas: usize,
    key: &StreamKey,
    cap: u64,
) -> Result<ExitEnsembleReport> {
    if replicas < MIN_REPLICAS {
        return Err(Error::Argument(format!(
            "exit ensembles need at least {MIN_REPLICAS} replicas, got {replicas}"
        )));
    }
    if inits.is_empty() {
        return Err(Error::Argument("no initial states".into()));
    }
    let jobs: Vec<(usize, u64)> = (0..inits.len())
        .flat_map(|i| (0..replicas as u64).map(move |r| (i, r)))
        .collect();
    let samples = jobs
        .into_par_iter()
        .map(|(i, r)| {
            let k = key.child(i as u64).child(r);
            let mut s = exit_time(domain, &inits[i], params, &k, cap)?;
            s.init_id = i;
            s.replica = r;
            Ok(s)
        })
        .collect::<Result<Vec<_>>>()?;
    ExitEnsembleReport::from_samples(samples)
}

/// A time `β` with `P(τ > β)` near one half.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaCalibration {
    pub beta: f64,
    pub survival: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub replicas: usize,
}

/// Survival bracket accepted for `β`, inset from `[1/4, 3/4]` to absorb
/// Monte Carlo error.
pub const BETA_BRACKET: (f64, f64) = (0.3, 0.7);

/// Picks the sample time whose empirical survival is closest to 1/2
/// inside [`BETA_BRACKET`]. Censored samples (`None`) count as surviving
/// past every candidate and are never candidates themselves; a candidate
/// beyond the earliest censoring time is rejected.
pub fn calibrate_beta_from_samples(taus: &[f64], censored_at: Option<f64>) -> Result<BetaCalibration> {
    if taus.is_empty() {
        return Err(Error::Argument("no samples to calibrate β".into()));
    }
    let mut v = taus.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    while i < n {
        let t = v[i];
        let mut j = i;
        while j < n && v[j] == t {
            j += 1;
        }
        let survival = (n - j) as f64 / n as f64;
        let inside = survival >= BETA_BRACKET.0 && survival <= BETA_BRACKET.1;
        if inside && best.is_none_or(|(_, s)| (survival - 0.5).abs() < (s - 0.5).abs()) {
            best = Some((t, survival));
        }
        i = j;
    }
    let (beta, survival) = best.ok_or_else(|| {
        Error::Calibration(format!(
            "no sample time has survival in [{}, {}]",
            BETA_BRACKET.0, BETA_BRACKET.1
        ))
    })?;
    if let Some(c) = censored_at {
        if beta >= c {
            return Err(Error::Calibration(format!(
                "β = {beta} lies beyond the earliest truncated run at {c}"
            )));
        }
    }
    let surviving = (survival * n as f64).round() as usize;
    let (ci_lo, ci_hi) = wilson(surviving, n, 1.96);
    Ok(BetaCalibration {
        beta,
        survival,
        ci_lo,
        ci_hi,
        replicas: n,
    })
}

/// Calibrates `β` from exit times started at `x0`, which must lie in the
/// trap.
pub fn calibrate_beta(
    x0: &[f64],
    domain: &DomainSpec,
    params: &ModelParams,
    replicas: usize,
    key: &StreamKey,
    cap: u64,
) -> Result<BetaCalibration> {
    let lb = params.lambda_bar(x0);
    let trap = domain.trap();
    if !trap.contains(lb) {
        return Err(Error::Argument(format!(
            "x0 has λ̄ = {lb}, outside the trap [{}, {}]",
            trap.lo, trap.hi
        )));
    }
    let samples = (0..replicas as u64)
        .into_par_iter()
        .map(|r| exit_time(domain, x0, params, &key.child(r), cap))
        .collect::<Result<Vec<_>>>()?;
    let censored_at = samples.iter().filter(|s| s.truncated).map(|s| s.tau).reduce(f64::min);
    let taus: Vec<f64> = samples
        .iter()
        .map(|s| if s.truncated { f64::INFINITY } else { s.tau })
        .collect();
    calibrate_beta_from_samples(&taus, censored_at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Purpose;

    fn synthetic(taus: &[f64]) -> Vec<ExitSample> {
        taus.iter()
            .enumerate()
            .map(|(r, &tau)| ExitSample {
                tau,
                replica: r as u64,
                init_id: 0,
                lambda_bar: 0.0,
                events: 0,
                truncated: false,
            })
            .collect()
    }

    #[test]
    fn degenerate_times_give_point_mass_ks() {
        let rep = ExitEnsembleReport::from_samples(synthetic(&[2.5; 200])).unwrap();
        assert!((rep.ks - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert_eq!(rep.max_ratio_deviation, 0.0);
    }

    #[test]
    fn degenerate_times_fail_calibration() {
        assert!(matches!(
            calibrate_beta_from_samples(&[3.0; 50], None),
            Err(Error::Calibration(_))
        ));
    }

    #[test]
    fn calibration_picks_the_median() {
        let taus: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        let b = calibrate_beta_from_samples(&taus, None).unwrap();
        assert_eq!(b.beta, 50.0);
        assert_eq!(b.survival, 0.5);
    }

    #[test]
    fn init_outside_domain_rejected() {
        let p = ModelParams::piecewise_linear(10, 1.0, 1.0, 1.0, 1.0).unwrap();
        let d = DomainSpec::level_set(0.5, 0.8).unwrap();
        let k = StreamKey::new(1, 0, Purpose::NOISE);
        assert!(matches!(
            exit_time(&d, &[0.1; 10], &p, &k, 1000),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn silent_network_exits_by_decay() {
        // with negligible coupling, spikes can only lower the mean rate, so
        // the exit comes no later than the spike-free decay time ln 2
        let p = ModelParams::piecewise_linear(4, 1.0, 1e-12, 1.0, 10.0).unwrap();
        let d = DomainSpec::level_set(0.5, 0.9).unwrap();
        let k = StreamKey::new(3, 0, Purpose::NOISE);
        let s = exit_time(&d, &[1.0; 4], &p, &k, 1_000_000).unwrap();
        assert!(s.tau <= 2f64.ln() + 1e-12);
        assert!(s.tau > 0.0);
    }
}
