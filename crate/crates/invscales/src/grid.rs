//! Probe grids over open intervals, used by invariant checks, image
//! validation, and minimum finding.

use crate::scale::Interval;

/// Relative clip kept away from finite endpoints.
pub const ENDPOINT_CLIP: f64 = 1e-6;

/// Decade span used to probe unbounded directions.
const DECADES_LO: f64 = 1e-6;
const DECADES_HI: f64 = 1e6;

/// Builds an `n`-point probe grid across the interior of `domain`.
///
/// Finite intervals use geometric spacing when the interval is strictly
/// positive and uniform spacing otherwise, clipped `ENDPOINT_CLIP` (relative)
/// from each endpoint. Unbounded directions are probed log-spaced from
/// `1e-6` to `1e6` away from the finite anchor (or from zero when both ends
/// are unbounded, mirrored across the sign change).
pub fn probe_grid(domain: &Interval, n: usize) -> Vec<f64> {
    assert!(n >= 2, "probe grid needs at least two points");
    let (lo, hi) = (domain.lo(), domain.hi());
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => {
            let span = hi - lo;
            let a = lo + ENDPOINT_CLIP * span;
            let b = hi - ENDPOINT_CLIP * span;
            if lo > 0.0 {
                geometric(a, b, n)
            } else {
                linear(a, b, n)
            }
        }
        (true, false) => geometric_offsets(n).iter().map(|d| lo + d).collect(),
        (false, true) => {
            let mut g: Vec<f64> = geometric_offsets(n).iter().map(|d| hi - d).collect();
            g.reverse();
            g
        }
        (false, false) => {
            let half = n / 2;
            let mut g: Vec<f64> = geometric_offsets(half).iter().map(|d| -d).collect();
            g.reverse();
            g.extend(geometric_offsets(n - half));
            g
        }
    }
}

fn linear(a: f64, b: f64, n: usize) -> Vec<f64> {
    let step = (b - a) / (n - 1) as f64;
    (0..n).map(|i| a + step * i as f64).collect()
}

fn geometric(a: f64, b: f64, n: usize) -> Vec<f64> {
    let (la, lb) = (a.ln(), b.ln());
    let step = (lb - la) / (n - 1) as f64;
    (0..n).map(|i| (la + step * i as f64).exp()).collect()
}

fn geometric_offsets(n: usize) -> Vec<f64> {
    geometric(DECADES_LO, DECADES_HI, n)
}

/// Uniformly spaced grid on `[a, b]` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    assert!(n >= 2);
    linear(a, b, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_grid_stays_interior() {
        let d = Interval::new(0.0, 1.0).unwrap();
        let g = probe_grid(&d, 64);
        assert_eq!(g.len(), 64);
        assert!(g.iter().all(|z| d.contains(*z)));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn half_infinite_grid_is_increasing() {
        let d = Interval::new(2.0, f64::INFINITY).unwrap();
        let g = probe_grid(&d, 64);
        assert!(g.iter().all(|z| d.contains(*z)));
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g[0] - 2.0 < 1e-5);
        assert!(g[63] > 1e5);
    }

    #[test]
    fn doubly_infinite_grid_straddles_zero() {
        let d = Interval::new(f64::NEG_INFINITY, f64::INFINITY).unwrap();
        let g = probe_grid(&d, 64);
        assert!(g.windows(2).all(|w| w[0] < w[1]));
        assert!(g[0] < -1e5 && g[63] > 1e5);
    }
}
