//! One-dimensional Wasserstein-1 distance between empirical laws.

use crate::error::{Error, Result};

/// Exact `W₁` between the empirical measures of two samples, computed as
/// `∫ |F_a − F_b| dx` over the merged breakpoints. For equal sizes this is
/// the mean absolute difference of the order statistics.
pub fn w1_empirical(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("W1 needs two non-empty samples".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    if x.len() == y.len() {
        let s: f64 = x.iter().zip(&y).map(|(p, q)| (p - q).abs()).sum();
        return Ok(s / x.len() as f64);
    }
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = x[0].min(y[0]);
    let mut total = 0.0;
    while i < x.len() || j < y.len() {
        let next = match (x.get(i), y.get(j)) {
            (Some(&p), Some(&q)) => p.min(q),
            (Some(&p), None) => p,
            (None, Some(&q)) => q,
            (None, None) => unreachable!(),
        };
        total += (i as f64 / n - j as f64 / m).abs() * (next - prev);
        while i < x.len() && x[i] <= next {
            i += 1;
        }
        while j < y.len() && y[j] <= next {
            j += 1;
        }
        prev = next;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_cases() {
        assert_eq!(w1_empirical(&[0.0, 1.0], &[0.0, 3.0]).unwrap(), 1.0);
        assert_eq!(w1_empirical(&[0.0], &[2.5]).unwrap(), 2.5);
        assert_eq!(w1_empirical(&[1.0, 2.0], &[2.0, 1.0]).unwrap(), 0.0);
        assert!(w1_empirical(&[], &[1.0]).is_err());
    }

    #[test]
    fn unequal_sizes_match_quantile_coupling() {
        // {0, 1} against {0, 0, 3}: ∫|F−G| = (2/3 − 1/2)·1 + (1 − 2/3)·2
        let d = w1_empirical(&[0.0, 1.0], &[0.0, 0.0, 3.0]).unwrap();
        assert!((d - (1.0 / 6.0 + 2.0 / 3.0)).abs() < 1e-15);
    }
}
