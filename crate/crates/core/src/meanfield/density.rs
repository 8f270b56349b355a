//! Self-consistent invariant density of the non-linear neuron.
//!
//! For a drift `a` the invariant density `g_a` has mean rate
//! `p_a = 1/Γ(a)`; an equilibrium of the non-linear process is a root of
//! `h p_a = a`. The root is bracketed by scanning, refined by bisection,
//! and the density is tabulated on a grid refined geometrically towards the
//! right end of its support.

use std::io::{self, Write};

use rand::Rng;
use serde::Serialize;

use super::gamma::{lin_mass, series_mass, Shape};
use crate::error::{Error, Result};
use crate::model::ModelParams;
use crate::numeric::roots::bisect;

const SCAN_POINTS: usize = 512;
const QUAD_TOL: f64 = 1e-13;

/// Solver settings for [`solve_pstar_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PstarOptions {
    pub scan_points: usize,
    /// Bisection tolerance on `a`.
    pub tol: f64,
    /// Uniform cells before geometric refinement.
    pub grid_cells: usize,
}

impl Default for PstarOptions {
    fn default() -> Self {
        PstarOptions {
            scan_points: SCAN_POINTS,
            tol: 1e-13,
            grid_cells: 2000,
        }
    }
}

/// Tabulated invariant density with its fixed point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityTable {
    /// `h p*`, the drift of the equilibrium.
    pub a_star: f64,
    /// Equilibrium mean rate `p* = 1/Γ(a*)`.
    pub p_star: f64,
    /// `|h p* − a*|`.
    pub residual: f64,
    /// Every root `a` of `h p_a = a` found by the scan, increasing.
    pub roots: Vec<f64>,
    pub alpha: f64,
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub cdf: Vec<f64>,
    /// Total mass including the analytic remainder past the last node.
    pub mass: f64,
    #[serde(skip)]
    shape: Shape,
}

impl DensityTable {
    /// Right end `a*/α` of the support.
    pub fn support_end(&self) -> f64 {
        self.a_star / self.alpha
    }

    /// Whether several non-zero equilibria were found.
    pub fn non_unique(&self) -> bool {
        self.roots.len() > 1
    }

    /// Closed-form density at `x`.
    pub fn density_at(&self, x: f64) -> f64 {
        density_value(&self.shape, self.p_star, x)
    }

    /// Draws from the tabulated law by inverting the piecewise-linear cdf.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c <= u);
        if j == 0 {
            return self.grid[0];
        }
        if j >= self.cdf.len() {
            return *self.grid.last().expect("non-empty grid");
        }
        let (c0, c1) = (self.cdf[j - 1], self.cdf[j]);
        let (x0, x1) = (self.grid[j - 1], self.grid[j]);
        if c1 > c0 {
            x0 + (u - c0) / (c1 - c0) * (x1 - x0)
        } else {
            x0
        }
    }

    /// `x,g,cdf` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,g,cdf")?;
        for ((x, g), c) in self.grid.iter().zip(&self.values).zip(&self.cdf) {
            writeln!(w, "{x},{g},{c}")?;
        }
        Ok(())
    }
}

fn density_value(sh: &Shape, p: f64, x: f64) -> f64 {
    if x < 0.0 || x >= sh.a / sh.alpha {
        return 0.0;
    }
    let s = 1.0 - sh.alpha * x / sh.a;
    p / (sh.a * s) * sh.survival(s)
}

/// `h p_a − a` for the scan.
fn fixed_point_gap(a: f64, params: &ModelParams) -> Result<f64> {
    Ok(params.h / Shape::new(a, params)?.gamma(QUAD_TOL) - a)
}

/// Lower end of the drift bracket, `α (u* ∧ (kh − α)/Lip) / h`.
pub fn default_a0(params: &ModelParams) -> f64 {
    let kh = params.k() * params.h;
    params.alpha * params.u_star().min((kh - params.alpha) / params.rate.lip()) / params.h
}

pub fn solve_pstar(params: &ModelParams) -> Result<DensityTable> {
    solve_pstar_with(params, PstarOptions::default())
}

pub fn solve_pstar_with(params: &ModelParams, opts: PstarOptions) -> Result<DensityTable> {
    let kh = params.k() * params.h;
    if !(kh > params.alpha) {
        return Err(Error::Precondition(format!(
            "a non-zero equilibrium needs kh > α (kh = {kh}, α = {})",
            params.alpha
        )));
    }
    let lo = default_a0(params);
    let hi = params.h * params.lambda_star();
    let m = opts.scan_points.max(2);
    let mut profile = Vec::with_capacity(m);
    for j in 0..m {
        let a = lo + (hi - lo) * j as f64 / (m - 1) as f64;
        profile.push((a, fixed_point_gap(a, params)?));
    }
    let mut roots = Vec::new();
    for w in profile.windows(2) {
        let ((a0, f0), (a1, f1)) = (w[0], w[1]);
        if f0 == 0.0 {
            roots.push(a0);
        } else if f0.signum() != f1.signum() && f1 != 0.0 {
            let r = bisect(
                |a| fixed_point_gap(a, params).unwrap_or(f64::NAN),
                a0,
                a1,
                opts.tol * a1,
                400,
            )
            .expect("bracket has a sign change");
            roots.push(r);
        }
    }
    if let Some(&(a, f)) = profile.last() {
        if f == 0.0 {
            roots.push(a);
        }
    }
    let Some(&a_star) = roots.last() else {
        let min = profile.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
        let max = profile.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
        return Err(Error::NoEquilibrium {
            lo,
            hi,
            min_residual: min,
            max_residual: max,
            profile,
        });
    };
    tabulate(a_star, roots, params, opts.grid_cells)
}

/// Tabulates `g_a` for a given drift `a` and its root list.
fn tabulate(a: f64, roots: Vec<f64>, params: &ModelParams, cells: usize) -> Result<DensityTable> {
    let sh = Shape::new(a, params)?;
    let gamma = sh.gamma(QUAD_TOL);
    let p = 1.0 / gamma;
    let residual = (params.h * p - a).abs();

    // grid in s = 1 − αx/a: uniform down to 1e−3, then geometric to 1e−12
    let s_break = 1e-3;
    let mut s_nodes: Vec<f64> = (0..=cells)
        .map(|j| 1.0 - (1.0 - s_break) * j as f64 / cells as f64)
        .collect();
    for d in 1..=90 {
        s_nodes.push(s_break * 10f64.powf(-(d as f64) / 10.0));
    }
    if sh.s_sat > 0.0 && sh.s_sat < 1.0 {
        s_nodes.push(sh.s_sat);
    }
    s_nodes.sort_by(|x, y| y.total_cmp(x));
    s_nodes.dedup();

    let mass_between = |s_hi: f64, s_lo: f64| -> f64 {
        // s_lo < s_hi; split at the saturation point
        let mut m = 0.0;
        let lin_lo = s_lo.max(sh.s_sat);
        if s_hi > lin_lo {
            m += p / sh.alpha * lin_mass(sh.q, lin_lo, s_hi, 1e-14);
        }
        let sat_hi = s_hi.min(sh.s_sat);
        if sat_hi > s_lo {
            m += p / sh.lambda_star * (sh.survival(sat_hi) - sh.survival(s_lo));
        }
        m
    };

    let mut grid = Vec::with_capacity(s_nodes.len());
    let mut values = Vec::with_capacity(s_nodes.len());
    let mut cdf = Vec::with_capacity(s_nodes.len());
    let mut acc = 0.0;
    for (j, &s) in s_nodes.iter().enumerate() {
        if j > 0 {
            acc += mass_between(s_nodes[j - 1], s);
        }
        let x = a * (1.0 - s) / sh.alpha;
        grid.push(x);
        values.push(p / (a * s) * sh.survival(s));
        cdf.push(acc);
    }
    let s_min = *s_nodes.last().expect("grid");
    let remainder = if s_min > sh.s_sat {
        p / sh.alpha * series_mass(sh.q, s_min)
    } else {
        p / sh.lambda_star * sh.survival(s_min)
    };
    Ok(DensityTable {
        a_star: a,
        p_star: p,
        residual,
        roots,
        alpha: sh.alpha,
        grid,
        values,
        cdf,
        mass: acc + remainder,
        shape: sh,
    })
}

/// Tabulates `g_a` for an arbitrary drift `a` (not necessarily a fixed point).
pub fn density_for_drift(a: f64, params: &ModelParams) -> Result<DensityTable> {
    tabulate(a, vec![], params, PstarOptions::default().grid_cells)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_bracket_start() {
        let p = ModelParams::piecewise_linear(100, 1.0, 10.0, 1.0, 1.0).unwrap();
        assert!((default_a0(&p) - 0.1).abs() < 1e-15);
    }

    #[test]
    fn subcritical_is_rejected() {
        let p = ModelParams::piecewise_linear(100, 1.0, 0.5, 1.0, 1.0).unwrap();
        assert!(matches!(solve_pstar(&p), Err(Error::Precondition(_))));
    }
}
