//! Adaptive Dormand–Prince 5(4) integration for scalar autonomous ODEs.

/// Step-size control settings.
#[derive(Debug, Clone, Copy)]
pub struct OdeTolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_steps: usize,
}

impl Default for OdeTolerance {
    fn default() -> Self {
        OdeTolerance {
            rel: 1e-10,
            abs: 1e-13,
            max_steps: 1_000_000,
        }
    }
}

// autonomous right-hand side, so the node offsets are not needed
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// difference between 5th and embedded 4th order weights
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `x' = f(x)` from `x0` over `[0, horizon]` and returns the
/// solution sampled at every point of `times` (which must be sorted and lie
/// in `[0, horizon]`). Output points are hit exactly by clipping steps.
///
/// Returns `None` if the step budget is exhausted.
pub fn integrate_at<F: FnMut(f64) -> f64>(mut f: F, x0: f64, times: &[f64], tol: OdeTolerance) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(times.len());
    let mut t = 0.0;
    let mut x = x0;
    let mut k1 = f(x);
    let mut dt: f64 = 1e-3;
    let mut steps = 0;
    for &target in times {
        while t < target {
            if steps >= tol.max_steps {
                return None;
            }
            let h = dt.min(target - t);
            let k2 = f(x + h * A21 * k1);
            let k3 = f(x + h * (A31 * k1 + A32 * k2));
            let k4 = f(x + h * (A41 * k1 + A42 * k2 + A43 * k3));
            let k5 = f(x + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4));
            let k6 = f(x + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5));
            let x_new = x + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6);
            let k7 = f(x_new);
            let err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7);
            let scale = tol.abs + tol.rel * x.abs().max(x_new.abs());
            let ratio = err.abs() / scale;
            steps += 1;
            if ratio <= 1.0 {
                t = if h == target - t { target } else { t + h };
                x = x_new;
                k1 = k7;
            }
            let factor = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            // the clipped step must not shrink the controller's memory
            if ratio <= 1.0 && h < dt {
                dt = dt.max(h * factor);
            } else {
                dt = h * factor;
            }
        }
        out.push(x);
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let ts = [0.0, 1.0, 2.5];
        let xs = integrate_at(|x| -x, 1.0, &ts, OdeTolerance::default()).unwrap();
        for (t, x) in ts.iter().zip(&xs) {
            assert!((x - (-t).exp()).abs() < 1e-10, "{t} {x}");
        }
    }

    #[test]
    fn logistic_growth() {
        let ts = [3.0];
        let xs = integrate_at(|x| x * (1.0 - x), 0.1, &ts, OdeTolerance::default()).unwrap();
        let exact = 1.0 / (1.0 + 9.0 * (-3.0f64).exp());
        assert!((xs[0] - exact).abs() < 1e-10);
    }
}
