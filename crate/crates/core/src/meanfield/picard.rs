//! Experimental Picard scheme for the non-linear mean rate `z_t`.
//!
//! Given a guess of `z` on a time window, `M` independent mean-field neurons
//! with drift `h z_t` are simulated and `E λ(Ū(t))` is re-estimated. The
//! same random numbers are reused across iterations within a window, so the
//! iteration is a deterministic map and converges when the window is short
//! compared with the inverse Lipschitz constant of the drift.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1};

use super::particles::InitLaw;
use super::path::RatePath;
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::rng::{Purpose, StreamKey};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PicardOptions {
    /// Cell width of the rate path; must not exceed `0.01/(kh + λ*)`.
    pub dt: f64,
    pub replicas: usize,
    pub max_iter: usize,
    /// Absolute floor of the stopping tolerance.
    pub floor: f64,
}

impl PicardOptions {
    pub fn for_params(params: &ModelParams, replicas: usize) -> Self {
        let dt = 0.01 / (params.k() * params.h + params.lambda_star());
        PicardOptions {
            dt,
            replicas,
            max_iter: 50,
            floor: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardResult {
    pub path: RatePath,
    /// Monte Carlo standard error of each cell value.
    pub se: Vec<f64>,
    /// Iterations used in each window.
    pub iterations: Vec<usize>,
    pub window_cells: usize,
}

#[derive(Clone)]
struct Particle {
    u: f64,
    rng: ChaCha8Rng,
    /// Time of the next proposal atom and its mark.
    next: f64,
    mark: f64,
}

impl Particle {
    fn new(u: f64, mut rng: ChaCha8Rng, ls: f64) -> Self {
        let gap: f64 = Exp1.sample(&mut rng);
        let mark = (1.0 - rng.random::<f64>()) * ls;
        Particle {
            u,
            rng,
            next: gap / ls,
            mark,
        }
    }

    fn refresh(&mut self, ls: f64) {
        let gap: f64 = Exp1.sample(&mut self.rng);
        self.next += gap / ls;
        self.mark = (1.0 - self.rng.random::<f64>()) * ls;
    }
}

/// Leak plus constant drift `h z` over `delta`.
#[inline]
fn advance(u: f64, delta: f64, hz: f64, alpha: f64) -> f64 {
    let d = (-alpha * delta).exp();
    u * d + hz * (1.0 - d) / alpha
}

pub fn picard_z(
    law: &InitLaw,
    params: &ModelParams,
    horizon: f64,
    opts: PicardOptions,
    key: &StreamKey,
) -> Result<PicardResult> {
    let kh = params.k() * params.h;
    let ls = params.lambda_star();
    if opts.dt > 0.01 / (kh + ls) * (1.0 + 1e-12) {
        return Err(Error::Argument(format!(
            "grid step {} exceeds 0.01/(kh + λ*) = {}",
            opts.dt,
            0.01 / (kh + ls)
        )));
    }
    if opts.replicas < 2 {
        return Err(Error::Argument("Picard iteration needs at least two replicas".into()));
    }
    let alpha = params.alpha;
    let h = params.h;
    let cells = ((horizon / opts.dt).ceil() as usize).max(1);
    let window = ((0.25 / (h * params.rate.lip() + ls) / opts.dt).floor() as usize).max(1);

    let base = key.with_purpose(Purpose::MEAN_FIELD);
    let mut init_rng = base.with_purpose(Purpose::INIT).rng();
    let mut particles: Vec<Particle> = (0..opts.replicas)
        .map(|i| Particle::new(law.sample(&mut init_rng), base.substream(i as u64), ls))
        .collect();

    let m = opts.replicas as f64;
    let stats = |ps: &[Particle]| {
        let (mut s, mut s2) = (0.0, 0.0);
        for p in ps {
            let r = params.lambda(p.u);
            s += r;
            s2 += r * r;
        }
        let mean = s / m;
        let var = ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0);
        (mean, (var / m).sqrt())
    };

    let mut z = Vec::with_capacity(cells);
    let mut se = Vec::with_capacity(cells);
    let mut iterations = Vec::new();
    let mut start = 0;
    while start < cells {
        let end = (start + window).min(cells);
        let t0 = start as f64 * opts.dt;
        let (z0, se0) = stats(&particles);
        let mut guess = vec![z0; end - start];
        let mut history = Vec::new();
        let mut done = None;
        for it in 1..=opts.max_iter {
            let mut trial = particles.clone();
            let mut sums = vec![0.0; end - start];
            let mut sums2 = vec![0.0; end - start];
            for p in &mut trial {
                let mut t = t0;
                for (c, &zc) in guess.iter().enumerate() {
                    let r = params.lambda(p.u);
                    sums[c] += r;
                    sums2[c] += r * r;
                    let t_end = t0 + (c + 1) as f64 * opts.dt;
                    while p.next <= t_end {
                        p.u = advance(p.u, p.next - t, h * zc, alpha);
                        t = p.next;
                        if p.mark <= params.lambda(p.u) {
                            p.u = 0.0;
                        }
                        p.refresh(ls);
                    }
                    p.u = advance(p.u, t_end - t, h * zc, alpha);
                    t = t_end;
                }
            }
            let new: Vec<f64> = sums.iter().map(|s| s / m).collect();
            let errs: Vec<f64> = sums
                .iter()
                .zip(&sums2)
                .map(|(s, s2)| {
                    let mean = s / m;
                    (((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0) / m).sqrt()
                })
                .collect();
            let change = new.iter().zip(&guess).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            let max_se = errs.iter().cloned().fold(se0, f64::max);
            history.push(change);
            guess = new;
            if change <= (2.0 * max_se).max(opts.floor) {
                done = Some((it, trial, errs));
                break;
            }
        }
        let Some((it, trial, errs)) = done else {
            return Err(Error::NonConvergence {
                iterations: opts.max_iter,
                last_change: *history.last().unwrap_or(&f64::NAN),
                history,
            });
        };
        particles = trial;
        z.extend_from_slice(&guess);
        se.extend_from_slice(&errs);
        iterations.push(it);
        start = end;
    }
    Ok(PicardResult {
        path: RatePath::new(opts.dt, alpha, z)?,
        se,
        iterations,
        window_cells: window,
    })
}
