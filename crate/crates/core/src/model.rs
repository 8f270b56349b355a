//! Model parameters, spiking-rate functions and the regime classifier.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::roots::newton_bisect;

/// A user-supplied bounded, increasing, Lipschitz spiking rate.
///
/// The structural constants cannot be verified for an arbitrary function, so
/// they are carried as assertions and only spot-checked on a grid.
#[derive(Clone)]
pub struct GenericRate {
    pub name: String,
    pub eval: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub lambda_star: f64,
    pub lip: f64,
    pub k: f64,
    pub u_star: f64,
    pub r: f64,
}

impl fmt::Debug for GenericRate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GenericRate")
            .field("name", &self.name)
            .field("lambda_star", &self.lambda_star)
            .field("lip", &self.lip)
            .field("k", &self.k)
            .field("u_star", &self.u_star)
            .field("r", &self.r)
            .finish()
    }
}

/// Spiking-rate descriptor.
#[derive(Debug, Clone)]
pub enum RateSpec {
    /// `λ(u) = min(k u, λ*)`.
    PiecewiseLinear {
        k: f64,
        lambda_star: f64,
    },
    GenericLipschitz(GenericRate),
}

impl RateSpec {
    pub fn piecewise_linear(k: f64, lambda_star: f64) -> Self {
        RateSpec::PiecewiseLinear { k, lambda_star }
    }

    /// Saturating `λ(u) = λ* tanh(s u / λ*)` with slope `s` at the origin.
    ///
    /// The lower-slope constant is taken on `[0, u*]` with
    /// `u* = λ*/(2s)`, where `λ' ≥ s sech²(1/2)`. Concavity gives
    /// `λ'(u) u ≤ λ(u)`, so the drift-comparison constant equals `α`.
    pub fn tanh(slope: f64, lambda_star: f64, alpha: f64) -> Self {
        let c = 1.0 / (0.5f64).cosh();
        RateSpec::GenericLipschitz(GenericRate {
            name: "tanh".into(),
            eval: Arc::new(move |u: f64| lambda_star * (slope * u / lambda_star).tanh()),
            lambda_star,
            lip: slope,
            k: slope * c * c,
            u_star: 0.5 * lambda_star / slope,
            r: alpha,
        })
    }

    pub fn lambda_star(&self) -> f64 {
        match self {
            RateSpec::PiecewiseLinear { lambda_star, .. } => *lambda_star,
            RateSpec::GenericLipschitz(g) => g.lambda_star,
        }
    }

    pub fn k(&self) -> f64 {
        match self {
            RateSpec::PiecewiseLinear { k, .. } => *k,
            RateSpec::GenericLipschitz(g) => g.k,
        }
    }

    pub fn lip(&self) -> f64 {
        match self {
            RateSpec::PiecewiseLinear { k, .. } => *k,
            RateSpec::GenericLipschitz(g) => g.lip,
        }
    }

    pub fn u_star(&self) -> f64 {
        match self {
            RateSpec::PiecewiseLinear { k, lambda_star } => lambda_star / k,
            RateSpec::GenericLipschitz(g) => g.u_star,
        }
    }

    pub fn is_piecewise_linear(&self) -> bool {
        matches!(self, RateSpec::PiecewiseLinear { .. })
    }

    /// Evaluates the rate without checking the sign of `u`.
    #[inline]
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            RateSpec::PiecewiseLinear { k, lambda_star } => (k * u).min(*lambda_star),
            RateSpec::GenericLipschitz(g) => (g.eval)(u),
        }
    }

    /// Spot-checks `λ(0) = 0`, monotonicity and the upper bound on a grid
    /// reaching well past the threshold.
    pub fn validate(&self) -> Result<()> {
        let ls = self.lambda_star();
        let k = self.k();
        if !(ls.is_finite() && ls > 0.0) {
            return Err(Error::Argument(format!("lambda_star must be positive, got {ls}")));
        }
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::Argument(format!("k must be positive, got {k}")));
        }
        if let RateSpec::GenericLipschitz(g) = self {
            for (name, v) in [("lip", g.lip), ("u_star", g.u_star), ("r", g.r)] {
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::Argument(format!("{name} must be positive, got {v}")));
                }
            }
            if (g.eval)(0.0) != 0.0 {
                return Err(Error::Argument("rate must vanish at 0".into()));
            }
            let top = 20.0 * g.u_star.max(ls / g.lip);
            let mut prev = 0.0;
            for i in 1..=2000 {
                let u = top * i as f64 / 2000.0;
                let v = (g.eval)(u);
                if !v.is_finite() || v < prev - 1e-12 || v > ls * (1.0 + 1e-12) {
                    return Err(Error::Argument(format!(
                        "rate '{}' fails the bounded non-decreasing check at u = {u}",
                        g.name
                    )));
                }
                prev = v;
            }
        }
        Ok(())
    }
}

/// Physical parameters of the network.
#[derive(Debug, Clone)]
pub struct ModelParams {
    pub n: usize,
    pub alpha: f64,
    pub h: f64,
    pub rate: RateSpec,
}

impl ModelParams {
    pub fn new(n: usize, alpha: f64, h: f64, rate: RateSpec) -> Result<Self> {
        let p = ModelParams { n, alpha, h, rate };
        p.validate()?;
        Ok(p)
    }

    /// Piecewise-linear model, the common case.
    pub fn piecewise_linear(n: usize, alpha: f64, h: f64, k: f64, lambda_star: f64) -> Result<Self> {
        Self::new(n, alpha, h, RateSpec::piecewise_linear(k, lambda_star))
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Argument("n must be at least 1".into()));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Argument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::Argument(format!("h must be positive, got {}", self.h)));
        }
        self.rate.validate()?;
        let (a, b) = (self.a(), self.b());
        if !(a.is_finite() && a > 0.0 && b.is_finite() && b > 0.0) {
            return Err(Error::Argument(format!(
                "derived a = {a}, b = {b} must be finite and positive"
            )));
        }
        Ok(())
    }

    /// Same parameters with a different population size.
    pub fn with_n(&self, n: usize) -> Self {
        ModelParams { n, ..self.clone() }
    }

    #[inline]
    pub fn lambda(&self, u: f64) -> f64 {
        self.rate.eval(u)
    }

    pub fn k(&self) -> f64 {
        self.rate.k()
    }

    pub fn lambda_star(&self) -> f64 {
        self.rate.lambda_star()
    }

    pub fn u_star(&self) -> f64 {
        self.rate.u_star()
    }

    /// Drift-comparison constant; equals `α` for the piecewise-linear rate.
    pub fn r(&self) -> f64 {
        match &self.rate {
            RateSpec::PiecewiseLinear { .. } => self.alpha,
            RateSpec::GenericLipschitz(g) => g.r,
        }
    }

    /// `α / (k h)`.
    pub fn a(&self) -> f64 {
        self.alpha / (self.k() * self.h)
    }

    /// `λ* / (k h)`.
    pub fn b(&self) -> f64 {
        self.lambda_star() / (self.k() * self.h)
    }

    /// `λ(u*)`.
    pub fn lambda_at_threshold(&self) -> f64 {
        self.lambda(self.u_star())
    }

    /// Mean rate `Σ λ(u_i) / N` of a configuration.
    pub fn lambda_bar(&self, u: &[f64]) -> f64 {
        u.iter().map(|&x| self.lambda(x)).sum::<f64>() / u.len() as f64
    }

    pub fn to_config(&self) -> ModelConfig {
        let rate = match &self.rate {
            RateSpec::PiecewiseLinear { k, lambda_star } => RateConfig {
                kind: RateKind::PiecewiseLinear,
                k: Some(*k),
                lambda_star: *lambda_star,
                slope: None,
            },
            RateSpec::GenericLipschitz(g) => RateConfig {
                kind: RateKind::Tanh,
                k: None,
                lambda_star: g.lambda_star,
                slope: Some(g.lip),
            },
        };
        ModelConfig {
            n: self.n,
            alpha: self.alpha,
            h: self.h,
            rate,
        }
    }
}

/// Checked rate evaluation.
pub fn rate_eval(spec: &RateSpec, u: f64) -> Result<f64> {
    if !(u >= 0.0) {
        return Err(Error::Domain(format!("potential must be non-negative, got {u}")));
    }
    Ok(spec.eval(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateKind {
    PiecewiseLinear,
    Tanh,
}

/// The `rate.*` keys of a model section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateConfig {
    pub kind: RateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    pub lambda_star: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope: Option<f64>,
}

/// Serializable form of [`ModelParams`]: keys `n`, `alpha`, `h`,
/// `rate.kind`, `rate.k`, `rate.lambda_star` (and `rate.slope` for tanh).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub n: usize,
    pub alpha: f64,
    pub h: f64,
    pub rate: RateConfig,
}

impl TryFrom<&ModelConfig> for ModelParams {
    type Error = Error;

    fn try_from(c: &ModelConfig) -> Result<Self> {
        let rate = match c.rate.kind {
            RateKind::PiecewiseLinear => {
                if c.rate.slope.is_some() {
                    return Err(Error::Argument("rate.slope is only used by the tanh rate".into()));
                }
                let k = c.rate.k.ok_or_else(|| Error::Argument("rate.k is required".into()))?;
                RateSpec::piecewise_linear(k, c.rate.lambda_star)
            }
            RateKind::Tanh => {
                if c.rate.k.is_some() {
                    return Err(Error::Argument("the tanh rate derives k from rate.slope".into()));
                }
                let s = c
                    .rate
                    .slope
                    .ok_or_else(|| Error::Argument("rate.slope is required".into()))?;
                if !(s > 0.0) {
                    return Err(Error::Argument(format!("rate.slope must be positive, got {s}")));
                }
                RateSpec::tanh(s, c.rate.lambda_star, c.alpha)
            }
        };
        ModelParams::new(c.n, c.alpha, c.h, rate)
    }
}

/// Root of `y e^y = 1`.
pub fn solve_y0() -> f64 {
    newton_bisect(|y| (y * y.exp() - 1.0, (1.0 + y) * y.exp()), 0.0, 1.0, 1e-15, 200)
        .expect("y e^y - 1 changes sign on [0, 1]")
}

/// `1 - 1/sqrt(y0 + 1)`, the largest `b` admitted by the contraction
/// condition at `a = 0`.
pub fn b_max() -> f64 {
    1.0 - 1.0 / (solve_y0() + 1.0).sqrt()
}

/// Root in `(0, y0)` of `(y+1) e^{4(y+1)} = (e^{-y}/y - 1) e^{-2y}`.
pub fn solve_y1() -> f64 {
    let y0 = solve_y0();
    let f = |y: f64| {
        let lhs = (y + 1.0) * (4.0 * (y + 1.0)).exp();
        let e3 = (-3.0 * y).exp();
        let e2 = (-2.0 * y).exp();
        let rhs = e3 / y - e2;
        let dlhs = (4.0 * (y + 1.0)).exp() * (1.0 + 4.0 * (y + 1.0));
        let drhs = -3.0 * e3 / y - e3 / (y * y) + 2.0 * e2;
        (lhs - rhs, dlhs - drhs)
    };
    newton_bisect(f, 1e-6, y0, 1e-15, 300).expect("y1 bracket")
}

/// Left side of the contraction condition, `+∞` when `2a + b ≥ 1`.
pub fn contraction_lhs(a: f64, b: f64) -> f64 {
    let m = 1.0 - 2.0 * a - b;
    if m <= 0.0 {
        return f64::INFINITY;
    }
    b / m * (1.0 + 1.0 / m)
}

/// Left side of the exit condition, `+∞` when `2a + b ≥ 1`.
pub fn exit_lhs(a: f64, b: f64) -> f64 {
    let m = 1.0 - 2.0 * a - b;
    if m <= 0.0 {
        return f64::INFINITY;
    }
    let c = 1.0 / m;
    let d = b * c;
    d * d.exp() * (1.0 + c * ((4.0 + 2.0 * b) * c).exp())
}

/// Status of every parameter condition of the phase diagram.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeFlags {
    pub delta0_unique_attractive: bool,
    pub delta0_unstable: bool,
    pub exponential_extinction: bool,
    pub contraction_condition: bool,
    pub exit_condition: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub a: f64,
    pub b: f64,
    pub flags: RegimeFlags,
    pub contraction_lhs: f64,
    pub exit_lhs: f64,
    pub y0: f64,
    pub b_max: f64,
    pub y1: f64,
}

/// Classifies a point `(a, b)` of the phase diagram.
pub fn classify_ab(a: f64, b: f64) -> RegimeReport {
    let y0 = solve_y0();
    let c_lhs = contraction_lhs(a, b);
    let e_lhs = exit_lhs(a, b);
    let flags = RegimeFlags {
        delta0_unique_attractive: a > 1.0,
        delta0_unstable: a < 1.0,
        exponential_extinction: a + b < 1.0,
        contraction_condition: 2.0 * a + b < 1.0 && c_lhs <= y0,
        exit_condition: 2.0 * a + b < 1.0 && e_lhs <= 1.0,
    };
    RegimeReport {
        a,
        b,
        flags,
        contraction_lhs: c_lhs,
        exit_lhs: e_lhs,
        y0,
        b_max: 1.0 - 1.0 / (y0 + 1.0).sqrt(),
        y1: solve_y1(),
    }
}

/// Classifies a piecewise-linear model.
pub fn classify_regime(params: &ModelParams) -> Result<RegimeReport> {
    if !params.rate.is_piecewise_linear() {
        return Err(Error::UnsupportedRate(
            "the phase diagram is defined for the piecewise-linear rate".into(),
        ));
    }
    Ok(classify_ab(params.a(), params.b()))
}
