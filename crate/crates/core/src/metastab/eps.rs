use rayon::prelude::*;
use serde::Serialize;

use super::domain::{DomainSpec, RateInterval};
use super::exit::{calibrate_beta, first_passage, BetaCalibration, PassageKind};
use crate::engine::coupling::SyncPair;
use crate::engine::state::SystemState;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{Purpose, StreamKey};
use crate::stats::wilson;

/// Empirical probability with its 95% Wilson interval, maximized over a
/// design of initial states.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbabilityEstimate {
    pub value: f64,
    pub successes: usize,
    pub trials: usize,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Index of the design point attaining the maximum.
    pub worst: usize,
}

impl ProbabilityEstimate {
    fn max_over(counts: &[usize], trials: usize) -> Self {
        let (worst, &successes) = counts
            .iter()
            .enumerate()
            .max_by_key(|(_, c)| **c)
            .expect("non-empty design");
        let (ci_lo, ci_hi) = wilson(successes, trials, 1.96);
        ProbabilityEstimate {
            value: successes as f64 / trials as f64,
            successes,
            trials,
            ci_lo,
            ci_hi,
            worst,
        }
    }
}

/// Initial-state design for the three estimated probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct EpsDesign {
    pub s1: f64,
    pub s2: f64,
    /// Starting points inside the trap, for the early-exit probability.
    pub trap_inits: Vec<Vec<f64>>,
    /// Starting points inside the domain, for the slow-return probability.
    pub domain_inits: Vec<Vec<f64>>,
    /// Pairs of trap states coupled synchronously.
    pub pairs: Vec<(Vec<f64>, Vec<f64>)>,
    pub description: String,
    /// Also calibrate `β` from the first trap start.
    pub calibrate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsReport {
    /// `max_x P_x(τ ≤ s1)` over trap starts.
    pub eps1: ProbabilityEstimate,
    /// `max_x P_x(τ ∧ τ_trap > s2)` over domain starts.
    pub eps2: ProbabilityEstimate,
    /// `max P(coupled copies still differ at s1)` over pairs.
    pub eps4: ProbabilityEstimate,
    /// `2 eps1 + eps4`.
    pub eps3: f64,
    /// `2 eps1 + eps4` from the upper confidence bounds.
    pub eps3_upper: f64,
    pub s1: f64,
    pub s2: f64,
    pub beta: Option<BetaCalibration>,
    pub design: String,
    pub partial: bool,
}

pub fn eps3(eps1: f64, eps4: f64) -> f64 {
    2.0 * eps1 + eps4
}

fn check_in(u: &[f64], region: RateInterval, what: &str, params: &ModelParams) -> Result<()> {
    let lb = params.lambda_bar(u);
    if !region.contains(lb) {
        return Err(Error::Argument(format!(
            "{what} start has λ̄ = {lb}, outside [{}, {}]",
            region.lo, region.hi
        )));
    }
    Ok(())
}

/// Estimates the constants of the abstract exit-time framework for the
/// mean-rate domain `domain` with trap `trap`.
pub fn estimate_eps(
    domain: &DomainSpec,
    trap: RateInterval,
    design: &EpsDesign,
    params: &ModelParams,
    replicas: usize,
    key: &StreamKey,
    cap: u64,
) -> Result<EpsReport> {
    let EpsDesign { s1, s2, .. } = *design;
    if !(s1 >= s2 && s2 > 0.0) {
        return Err(Error::Argument(format!("need s1 ≥ s2 > 0, got s1 = {s1}, s2 = {s2}")));
    }
    if design.trap_inits.is_empty() || design.domain_inits.is_empty() || design.pairs.is_empty() {
        return Err(Error::Argument("every design set must be non-empty".into()));
    }
    if replicas == 0 {
        return Err(Error::Argument("replicas must be positive".into()));
    }
    let dom = domain.domain();
    for u in &design.trap_inits {
        check_in(u, trap, "trap", params)?;
    }
    for u in &design.domain_inits {
        check_in(u, dom, "domain", params)?;
    }
    for (u, v) in &design.pairs {
        check_in(u, trap, "coupling", params)?;
        check_in(v, trap, "coupling", params)?;
    }

    // early exit before s1 from the trap
    let k1 = key.child(1);
    let early = run_design(&design.trap_inits, replicas, |u, r, i| {
        let k = k1.child(i as u64).child(r);
        let p = first_passage(SystemState::new(u.to_vec(), params)?, params, dom, None, s1, &k, cap)?;
        Ok((p.kind == PassageKind::Exit, p.kind == PassageKind::Truncated))
    })?;

    // neither exited nor reached the trap by s2
    let k2 = key.child(2);
    let slow = run_design(&design.domain_inits, replicas, |u, r, i| {
        let k = k2.child(i as u64).child(r);
        let p = first_passage(
            SystemState::new(u.to_vec(), params)?,
            params,
            dom,
            Some(trap),
            s2,
            &k,
            cap,
        )?;
        Ok((
            matches!(p.kind, PassageKind::Horizon | PassageKind::Truncated),
            p.kind == PassageKind::Truncated,
        ))
    })?;

    // synchronous copies not yet merged at s1; merging is absorbing
    let k4 = key.child(4).with_purpose(Purpose::COUPLING);
    let pair_refs: Vec<&(Vec<f64>, Vec<f64>)> = design.pairs.iter().collect();
    let apart = run_design(&pair_refs, replicas, |(u, v), r, i| {
        let k = k4.child(i as u64).child(r);
        let a = SystemState::new(u.clone(), params)?;
        let b = SystemState::new(v.clone(), params)?;
        let mut pair = SyncPair::new(params, a, b, &k)?;
        let done = pair.run_grid(s1, 0.0, cap, |_| {});
        let merged = pair.coalescence_time.is_some_and(|t| t <= s1);
        Ok((!merged, !done))
    })?;

    let eps1 = ProbabilityEstimate::max_over(&early.0, replicas);
    let eps2 = ProbabilityEstimate::max_over(&slow.0, replicas);
    let eps4 = ProbabilityEstimate::max_over(&apart.0, replicas);
    let beta = if design.calibrate {
        Some(calibrate_beta(
            &design.trap_inits[0],
            domain,
            params,
            replicas,
            &key.child(5),
            cap,
        )?)
    } else {
        None
    };
    Ok(EpsReport {
        eps3: eps3(eps1.value, eps4.value),
        eps3_upper: eps3(eps1.ci_hi, eps4.ci_hi),
        eps1,
        eps2,
        eps4,
        s1,
        s2,
        beta,
        design: design.description.clone(),
        partial: early.1 || slow.1 || apart.1,
    })
}

/// Runs `trial` for every (design point, replica) and counts successes
/// per design point; also reports whether any trial was truncated.
fn run_design<T, F>(points: &[T], replicas: usize, trial: F) -> Result<(Vec<usize>, bool)>
where
    T: Sync,
    F: Fn(&T, u64, usize) -> Result<(bool, bool)> + Sync,
{
    let jobs: Vec<(usize, u64)> = (0..points.len())
        .flat_map(|i| (0..replicas as u64).map(move |r| (i, r)))
        .collect();
    let outcomes = jobs
        .into_par_iter()
        .map(|(i, r)| trial(&points[i], r, i).map(|o| (i, o)))
        .collect::<Result<Vec<_>>>()?;
    let mut counts = vec![0usize; points.len()];
    let mut truncated = false;
    for (i, (hit, trunc)) in outcomes {
        counts[i] += hit as usize;
        truncated |= trunc;
    }
    Ok((counts, truncated))
}
