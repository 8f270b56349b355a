//! Large-deviation quantities for the auxiliary process near its
//! equilibrium: the local rate function, quasi-potential bounds, the
//! closed-form extinction constant and the action of sampled paths.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::aux::{aux_exit_time, AuxParams};
use crate::error::{Error, Result};
use crate::meanfield::limit::LimitOdeConfig;
use crate::model::ModelParams;
use crate::numeric::quad;
use crate::rng::{Purpose, StreamKey};
use crate::stats::mean_se;

/// `Q(u) = u ln u − u + 1`, with `Q(0) = 1`.
pub fn entropy_q(u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("Q is defined on u ≥ 0, got {u}")));
    }
    Ok(q_unchecked(u))
}

#[inline]
fn q_unchecked(u: f64) -> f64 {
    if u == 0.0 {
        1.0
    } else {
        u * u.ln() - u + 1.0
    }
}

/// Exit-level configuration: the limit-equation constants with floor `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LdpConfig {
    pub limit: LimitOdeConfig,
    /// Drain time `(ln z_∞ − ln η)/r` from the ceiling down to `η`.
    pub drain_time: f64,
}

impl LdpConfig {
    pub fn new(params: &ModelParams, eta: f64) -> Result<Self> {
        let limit = LimitOdeConfig::new(params, eta)?;
        if !limit.supercritical() {
            return Err(Error::Precondition(format!(
                "kh > λ* + r is required (kh = {}, λ* + r = {})",
                limit.kh,
                limit.lambda_star + limit.r
            )));
        }
        if !(eta > 0.0 && eta < limit.x_inf) {
            return Err(Error::Domain(format!(
                "eta must lie in (0, x_inf = {}), got {eta}",
                limit.x_inf
            )));
        }
        let drain_time = (limit.z_inf.ln() - eta.ln()) / limit.r;
        Ok(LdpConfig { limit, drain_time })
    }

    pub fn eta(&self) -> f64 {
        self.limit.eta
    }
}

/// `G(x)`, the jump size of the rescaled auxiliary process.
pub fn drift_g(x: f64, params: &ModelParams) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(Error::Domain(format!("x must be non-negative, got {x}")));
    }
    Ok(LimitOdeConfig::new(params, 0.0)?.drift_g(x))
}

/// Hamiltonian `H(x, p) = f(x)(e^{G(x) p} − 1) − r x p`.
pub fn hamiltonian(x: f64, p: f64, config: &LdpConfig) -> f64 {
    let c = &config.limit;
    c.clamp_f(x) * (c.drift_g(x) * p).exp_m1() - c.r * x * p
}

/// Local rate `L(x, q)`, the Legendre transform of `H` in `p`.
pub fn rate_l(x: f64, q: f64, config: &LdpConfig) -> f64 {
    let c = &config.limit;
    let drift = q + c.r * x;
    if drift < 0.0 {
        return f64::INFINITY;
    }
    let g = c.drift_g(x);
    if x >= c.z_inf || g == 0.0 {
        return if drift == 0.0 { 0.0 } else { f64::INFINITY };
    }
    let f = c.clamp_f(x);
    f * q_unchecked(drift / (g * f))
}

/// Bounds `lower ≤ V̄_η ≤ upper` on the quasi-potential from `x_∞` to `η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuasiPotentialBounds {
    pub lower: f64,
    pub upper: f64,
}

fn q_of_r_over_g(c: &LimitOdeConfig, z: f64) -> f64 {
    let g = c.drift_g(z);
    q_unchecked(c.r / g)
}

/// `upper = (x_∞ − η)/r` and `lower = (1/r) ∫_η^{x_∞} Q(r/G(z)) dz`.
pub fn quasi_potential_bounds(config: &LdpConfig) -> Result<QuasiPotentialBounds> {
    let c = &config.limit;
    let eta = config.eta();
    let upper = (c.x_inf - eta) / c.r;
    let q = quad::integrate(|z| q_of_r_over_g(c, z), eta, c.x_inf, 1e-14, 1e-12, 10_000);
    let lower = q.value / c.r;
    if !(lower > 0.0 && lower <= upper) {
        return Err(Error::Domain(format!(
            "bounds out of order: lower {lower}, upper {upper}"
        )));
    }
    Ok(QuasiPotentialBounds { lower, upper })
}

/// `F(u) = u − 1 − ln u − ½ ln² u`.
fn w_kernel(u: f64) -> f64 {
    let l = u.ln();
    u - 1.0 - l - 0.5 * l * l
}

/// Closed-form constant `W₀ = (λ(u*)/kh) F((kh − λ*)/r)` together with the
/// quadrature of `(1/r) ∫_0^{x_∞} Q(r/G)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WZero {
    pub closed_form: f64,
    pub quadrature: f64,
}

pub fn w_zero(params: &ModelParams) -> Result<WZero> {
    let c = LimitOdeConfig::new(params, 0.0)?;
    if !c.supercritical() {
        return Err(Error::Precondition(format!(
            "kh > λ* + r is required (kh = {}, λ* + r = {})",
            c.kh,
            c.lambda_star + c.r
        )));
    }
    let ratio = (c.kh - c.lambda_star) / c.r;
    let closed_form = c.lambda_threshold / c.kh * w_kernel(ratio);
    let q = quad::integrate(|z| q_of_r_over_g(&c, z), 0.0, c.x_inf, 1e-15, 1e-13, 10_000);
    let quadrature = q.value / c.r;
    if !(closed_form > 0.0) {
        return Err(Error::Domain(format!("W0 = {closed_form} is not positive")));
    }
    Ok(WZero {
        closed_form,
        quadrature,
    })
}

/// A path sampled on a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl PathSample {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::Argument("times and values differ in length".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Argument("times must be strictly increasing".into()));
        }
        if values.iter().any(|&v| !(v >= 0.0)) {
            return Err(Error::Argument("path values must be non-negative".into()));
        }
        Ok(PathSample { times, values })
    }

    /// Derivative estimates: central differences inside, second-order
    /// one-sided differences at both ends.
    pub fn derivatives(&self) -> Vec<f64> {
        let (t, x) = (&self.times, &self.values);
        let n = t.len();
        let mut d = vec![0.0; n];
        for i in 1..n - 1 {
            let (h0, h1) = (t[i] - t[i - 1], t[i + 1] - t[i]);
            d[i] = (h0 * h0 * (x[i + 1] - x[i]) + h1 * h1 * (x[i] - x[i - 1])) / (h0 * h1 * (h0 + h1));
        }
        d[0] = one_sided(t[0], t[1], t[2], x[0], x[1], x[2]);
        d[n - 1] = one_sided(t[n - 1], t[n - 2], t[n - 3], x[n - 1], x[n - 2], x[n - 3]);
        d
    }

    pub fn max_step(&self) -> f64 {
        self.times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }
}

/// Derivative at `t0` of the parabola through three points.
fn one_sided(t0: f64, t1: f64, t2: f64, x0: f64, x1: f64, x2: f64) -> f64 {
    let (a, b) = (t1 - t0, t2 - t0);
    -x0 * (a + b) / (a * b) + x1 * b / (a * (b - a)) - x2 * a / (b * (b - a))
}

/// Action of a path together with the grid step it was evaluated on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathAction {
    pub action: f64,
    pub max_step: f64,
}

/// Trapezoidal `∫ L(x_s, ẋ_s) ds` along a sampled path.
///
/// Finite differences of a pure decay land slightly below the admissible
/// half-line `q ≥ −r x`; drifts that fall short by less than the
/// truncation error of the difference scheme at the local step are treated
/// as lying on the boundary.
pub fn action_of_path(path: &PathSample, config: &LdpConfig) -> Result<PathAction> {
    let n = path.times.len();
    if n < 3 {
        return Err(Error::Argument(format!("action needs at least 3 nodes, got {n}")));
    }
    let r = config.limit.r;
    let d = path.derivatives();
    let t = &path.times;
    let mut costs = Vec::with_capacity(n);
    for i in 0..n {
        let x = path.values[i];
        let q = d[i];
        let step = if i == 0 {
            t[1] - t[0]
        } else if i == n - 1 {
            t[n - 1] - t[n - 2]
        } else {
            (t[i + 1] - t[i]).max(t[i] - t[i - 1])
        };
        let slack = (r * step).powi(2) * r * x + 8.0 * f64::EPSILON * (q.abs() + r * x);
        let drift = q + r * x;
        let q_eff = if drift < 0.0 && drift >= -slack { -r * x } else { q };
        let c = rate_l(x, q_eff, config);
        if c.is_infinite() {
            return Ok(PathAction {
                action: f64::INFINITY,
                max_step: path.max_step(),
            });
        }
        costs.push(c);
    }
    let mut action = 0.0;
    for i in 1..n {
        action += 0.5 * (costs[i] + costs[i - 1]) * (t[i] - t[i - 1]);
    }
    Ok(PathAction {
        action,
        max_step: path.max_step(),
    })
}

/// One population size of the extinction-scaling experiment.
///
/// Runs that hit the jump cap are recorded at their censoring time, so
/// `median` and `mean` are then lower bounds; `median_exact` says whether
/// the median is unaffected by censoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub n: usize,
    pub median: f64,
    pub mean: f64,
    pub se: f64,
    pub log_mean_over_n: f64,
    pub truncated: usize,
    pub median_exact: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingReport {
    pub eta: f64,
    pub start: f64,
    pub rows: Vec<ScalingRow>,
    pub bounds: QuasiPotentialBounds,
    pub slack: f64,
    /// Medians strictly increasing in `N`, each comparison resting on an
    /// exact median for the smaller `N`.
    pub monotone: bool,
    /// Ratios `m_{j+1}/m_j` of successive medians.
    pub growth: Vec<f64>,
    /// Every ratio is at least [`GROWTH_FACTOR`] and every
    /// `ln m_{j+1} ≥ GROWTH_FACTOR · ln m_j`.
    pub growth_ok: bool,
    /// Largest-`N` `(1/N) ln E L` is uncensored and inside the slackened
    /// bounds.
    pub within_bounds: bool,
    pub verdict: bool,
}

/// Relative slack on the quasi-potential bounds for the finite-`N` check.
pub const SCALING_SLACK: f64 = 0.5;
/// Minimal growth between successive medians.
pub const GROWTH_FACTOR: f64 = 1.5;

impl ScalingReport {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "N,median,mean,log_mean_over_N")?;
        for r in &self.rows {
            writeln!(w, "{},{},{},{}", r.n, r.median, r.mean, r.log_mean_over_n)?;
        }
        Ok(())
    }

    pub fn summary_json(&self) -> serde_json::Value {
        serde_json::json!({
            "eta": self.eta,
            "lower": self.bounds.lower,
            "upper": self.bounds.upper,
            "slack": self.slack,
            "verdict": self.verdict,
        })
    }
}

fn censored_median(values: &[(f64, bool)]) -> (f64, bool) {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.0.total_cmp(&b.0));
    let pos = 0.5 * (v.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    let m = v[lo].0 + (pos - lo as f64) * (v[hi].0 - v[lo].0);
    (m, v[..=hi].iter().all(|x| !x.1))
}

/// Samples the time `L^N_η` for the auxiliary process to fall to `η`,
/// started from `x_∞`, for each `N`.
///
/// The start `x_∞` can lie above the ceiling `z_N` at moderate `N`; the
/// clamped dynamics are used, under which the process first drains to
/// `z_N` without effective jumps and then follows the plain dynamics.
pub fn extinction_scaling(
    params: &ModelParams,
    eta: f64,
    ns: &[usize],
    replicas: usize,
    cap: u64,
    key: &StreamKey,
) -> Result<ScalingReport> {
    if replicas == 0 {
        return Err(Error::Argument("replicas must be positive".into()));
    }
    if !(params.a() + params.b() < 1.0) {
        return Err(Error::Precondition(format!(
            "a + b = {} must be below 1",
            params.a() + params.b()
        )));
    }
    let config = LdpConfig::new(params, eta)?;
    let bounds = quasi_potential_bounds(&config)?;
    let start = config.limit.x_inf;
    let mut rows = Vec::with_capacity(ns.len());
    for (j, &n) in ns.iter().enumerate() {
        let aux = AuxParams::new(&params.with_n(n))?;
        let runs: Vec<_> = (0..replicas as u64)
            .into_par_iter()
            .map(|r| {
                let k = key.with_purpose(Purpose::AUX).child(j as u64).child(r);
                aux_exit_time(&aux, eta, start, &k, cap)
            })
            .collect::<Result<Vec<_>>>()?;
        let taus: Vec<f64> = runs.iter().map(|r| r.tau).collect();
        let (mean, se) = mean_se(&taus);
        let tagged: Vec<(f64, bool)> = runs.iter().map(|r| (r.tau, r.truncated)).collect();
        let (median, median_exact) = censored_median(&tagged);
        rows.push(ScalingRow {
            n,
            median,
            mean,
            se,
            log_mean_over_n: mean.ln() / n as f64,
            truncated: runs.iter().filter(|r| r.truncated).count(),
            median_exact,
        });
    }
    let monotone = rows.windows(2).all(|w| w[0].median_exact && w[1].median > w[0].median);
    let growth: Vec<f64> = rows.windows(2).map(|w| w[1].median / w[0].median).collect();
    let growth_ok = rows.windows(2).all(|w| {
        w[0].median_exact
            && w[1].median >= GROWTH_FACTOR * w[0].median
            && w[1].median.ln() >= GROWTH_FACTOR * w[0].median.ln()
    });
    let within_bounds = rows.last().is_some_and(|r| {
        r.truncated == 0
            && r.log_mean_over_n >= bounds.lower * (1.0 - SCALING_SLACK)
            && r.log_mean_over_n <= bounds.upper * (1.0 + SCALING_SLACK)
    });
    let verdict = monotone && growth_ok && within_bounds;
    Ok(ScalingReport {
        eta,
        start,
        rows,
        bounds,
        slack: SCALING_SLACK,
        monotone,
        growth,
        growth_ok,
        within_bounds,
        verdict,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ModelParams {
        ModelParams::piecewise_linear(100, 1.0, 10.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn q_values() {
        assert_eq!(entropy_q(1.0).unwrap(), 0.0);
        assert_eq!(entropy_q(0.0).unwrap(), 1.0);
        assert!((entropy_q(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        assert!(entropy_q(-1.0).is_err());
    }

    #[test]
    fn rate_on_pure_decay() {
        let c = LdpConfig::new(&params(), 0.1).unwrap();
        assert!((rate_l(0.5, -0.5, &c) - 0.5).abs() < 1e-15);
        assert!(rate_l(0.5, -0.6, &c).is_infinite());
        let q = -0.5 + c.limit.drift_g(0.5) * 0.5;
        assert!(rate_l(0.5, q, &c).abs() < 1e-15);
    }

    #[test]
    fn censoring_below_median_is_detected() {
        assert_eq!(
            censored_median(&[(1.0, false), (3.0, false), (2.0, true)]),
            (2.0, false)
        );
        assert_eq!(censored_median(&[(1.0, false), (3.0, true), (2.0, false)]), (2.0, true));
    }

    #[test]
    fn subcritical_scaling_rejected() {
        let p = ModelParams::piecewise_linear(100, 1.0, 1.5, 1.0, 1.0).unwrap();
        let k = StreamKey::new(1, 0, Purpose::AUX);
        assert!(matches!(
            extinction_scaling(&p, 0.1, &[20], 10, 100, &k),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn one_sided_is_exact_on_parabolas() {
        let f = |t: f64| 1.0 + 2.0 * t - 3.0 * t * t;
        let d = one_sided(0.5, 0.6, 0.8, f(0.5), f(0.6), f(0.8));
        assert!((d - (2.0 - 3.0)).abs() < 1e-12);
    }
}
