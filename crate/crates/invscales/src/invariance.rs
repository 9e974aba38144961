//! Numerical verification of the invariance claims: affine similarity of
//! scales under generators, asymptotic invariance under iteration, and
//! shift/stretch invariance of normalized distributions.
//!
//! Affine similarity is measured, not proved: T(G(z)) is fitted to
//! a + b·T(z) by least squares on a grid and the max residual is reported
//! in units of the response range, so one tolerance works across scales.

use serde::{Deserialize, Serialize};

use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::grid::probe_grid;
use crate::scale::{CanonicalScale, Generator};

/// Default grid size for the distribution-level checks.
const DEFAULT_GRID: usize = 64;

/// Below this response range the residual is reported absolutely.
const RANGE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InvarianceReport {
    #[serde(rename = "a")]
    pub fitted_a: f64,
    #[serde(rename = "b")]
    pub fitted_b: f64,
    /// Max residual in units of the fitted response's range (absolute when
    /// the range is below 1e−12).
    pub max_residual: f64,
    pub passed: bool,
    pub grid_size: usize,
    pub tolerance: f64,
}

impl InvarianceReport {
    fn new(a: f64, b: f64, max_residual: f64, grid_size: usize, tolerance: f64) -> Self {
        // A constant fit (b = 0) never passes: it means the response
        // carries no trace of the scale.
        let passed = max_residual <= tolerance && b != 0.0;
        InvarianceReport { fitted_a: a, fitted_b: b, max_residual, passed, grid_size, tolerance }
    }
}

/// Least-squares affine fit ys ≈ a + b·xs via the centered normal
/// equations. Returns (a, b, max_residual) with the residual range-
/// normalized as in InvarianceReport.
pub fn fit_affine(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateInput(format!(
            "affine fit needs matched sequences, got {} xs and {} ys",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::DegenerateInput(format!(
            "affine fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("affine fit input contains non-finite values".into()));
    }

    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxx += (x - x_mean) * (x - x_mean);
        sxy += (x - x_mean) * (y - y_mean);
    }
    if sxx == 0.0 {
        return Err(Error::DegenerateInput("affine fit xs are all equal".into()));
    }
    let b = sxy / sxx;
    let a = y_mean - b * x_mean;

    let mut max_abs = 0.0f64;
    let mut y_lo = f64::INFINITY;
    let mut y_hi = f64::NEG_INFINITY;
    for (&x, &y) in xs.iter().zip(ys) {
        max_abs = max_abs.max((y - a - b * x).abs());
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    let range = y_hi - y_lo;
    let residual = if range < RANGE_FLOOR { max_abs } else { max_abs / range };
    Ok((a, b, residual))
}

/// Fits T(G(z)) ≈ a + b·T(z) over the grid. Evaluation errors (a grid
/// point or its image outside a domain) propagate.
pub fn check_affine_similarity(
    t: &CanonicalScale,
    g: &Generator,
    grid: &[f64],
    tol: f64,
) -> Result<InvarianceReport> {
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    for &z in grid {
        xs.push(t.eval(z)?);
        ys.push(t.eval(g.apply(z)?)?);
    }
    let (a, b, residual) = fit_affine(&xs, &ys)?;
    Ok(InvarianceReport::new(a, b, residual, grid.len(), tol))
}

/// G^n(z), with G^0 the identity. Fails with the iteration index when an
/// iterate leaves the generator's domain or the double range.
pub fn iterate_generator(g: &Generator, n: usize, z: f64) -> Result<f64> {
    let mut current = z;
    for step in 0..n {
        current = match g.apply(current) {
            Ok(next) => next,
            Err(_) => return Err(Error::IterateDomain { step, z: current }),
        };
        if !current.is_finite() {
            return Err(Error::IterateDomain { step, z: current });
        }
    }
    Ok(current)
}

/// Fits T(G^{n+1}(z)) ≈ a + b·T(G^n(z)) over the grid; when n ≥ 2 the
/// report for n−1 comes along so the caller can see the residual trend
/// (no monotonicity is asserted).
pub fn check_asymptotic_invariance(
    t: &CanonicalScale,
    g: &Generator,
    n: usize,
    grid: &[f64],
    tol: f64,
) -> Result<(InvarianceReport, Option<InvarianceReport>)> {
    if n == 0 {
        return Err(Error::DegenerateInput("asymptotic invariance needs n >= 1".into()));
    }
    // T at G^{n−1}, G^n, G^{n+1} per grid point.
    let mut prev = Vec::with_capacity(grid.len());
    let mut mid = Vec::with_capacity(grid.len());
    let mut next = Vec::with_capacity(grid.len());
    for &z in grid {
        let z_prev = iterate_generator(g, n - 1, z)?;
        let z_mid = g.apply(z_prev).map_err(|_| Error::IterateDomain { step: n - 1, z: z_prev })?;
        let z_next = g.apply(z_mid).map_err(|_| Error::IterateDomain { step: n, z: z_mid })?;
        prev.push(t.eval(z_prev)?);
        mid.push(t.eval(z_mid)?);
        next.push(t.eval(z_next)?);
    }
    let (a, b, residual) = fit_affine(&mid, &next)?;
    let report = InvarianceReport::new(a, b, residual, grid.len(), tol);
    let earlier = if n >= 2 {
        let (a, b, residual) = fit_affine(&prev, &mid)?;
        Some(InvarianceReport::new(a, b, residual, grid.len(), tol))
    } else {
        None
    };
    Ok((report, earlier))
}

/// Log-density differences (shifted minus base) on the grid, skipping
/// points where both densities vanish. Any point where exactly one side
/// vanishes contributes an infinite residual.
fn log_density_deltas(d: &Distribution, other: &Distribution) -> Result<Vec<f64>> {
    let mut deltas = Vec::new();
    for z in probe_grid(d.domain(), DEFAULT_GRID) {
        let base = d.log_pdf(z)?;
        let new = other.log_pdf(z)?;
        let delta = new - base;
        if delta.is_nan() {
            continue; // both −inf: no mass at z on either side
        }
        deltas.push(delta);
    }
    if deltas.len() < 2 {
        return Err(Error::DegenerateInput(
            "densities vanish on nearly the whole probe grid".into(),
        ));
    }
    Ok(deltas)
}

/// Shift check: renormalizes with T ↦ T + a and verifies both faces of
/// the invariance: the constants obey k_a = k·e^{−λa}, and every density
/// ratio q(z₁)/q(z₂) is unchanged. fitted_b reports the measured k_a/k.
pub fn check_shift_invariance(d: &Distribution, a: f64, tol: f64) -> Result<InvarianceReport> {
    let shifted = d.shifted(a)?;
    // The shifted normalization constant satisfies k' = k·e^{+λa}; the
    // absorbed constant k_a (the original pattern read over the unshifted
    // scale) is k·(Z_a/Z) = k·k/k' and must equal k·e^{−λa}.
    let measured = d.k() / shifted.k();
    let expected = (-d.lambda() * a).exp();
    let res_k = (measured - expected).abs() / expected;

    // Ratio invariance over grid pairs, in log space: the largest
    // relative change of q(z₁)/q(z₂) is exp(spread of deltas) − 1.
    let deltas = log_density_deltas(d, &shifted)?;
    let spread = deltas.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        - deltas.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let res_ratio = spread.exp_m1();

    let residual = res_k.max(res_ratio);
    Ok(InvarianceReport::new(a, measured, residual, DEFAULT_GRID, tol))
}

/// Stretch check: verifies T ↦ b·T with λ ↦ λ/b reproduces the identical
/// density pointwise, and that the conserved product λ·⟨T − T*⟩ under dT
/// is unchanged by the transform (on a natural domain it equals one both
/// before and after; truncated domains shift its value but not its
/// invariance). fitted_b reports the applied stretch.
pub fn check_stretch_invariance(d: &Distribution, b: f64, tol: f64) -> Result<InvarianceReport> {
    if !(b > 0.0) || !b.is_finite() {
        return Err(Error::Param(format!("stretch check needs b > 0, got {b}")));
    }
    let stretched = d.stretched(b)?;
    let res_pdf = log_density_deltas(d, &stretched)?
        .iter()
        .fold(0.0f64, |m, &delta| m.max(delta.exp_m1().abs()));
    let res_conserved = (stretched.conserved_check()? - d.conserved_check()?).abs();
    let residual = res_pdf.max(res_conserved);
    Ok(InvarianceReport::new(0.0, b, residual, DEFAULT_GRID, tol))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::MeasureKind;
    use crate::quad::QuadratureConfig;
    use crate::scale::{BaseScale, Interval};

    fn linspace_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        crate::grid::linspace(lo, hi, n)
    }

    #[test]
    fn fit_affine_identity_and_exact() {
        let xs = [1.0, 2.0, 3.0];
        let (a, b, r) = fit_affine(&xs, &xs).unwrap();
        assert_eq!((a, b), (0.0, 1.0));
        assert!(r <= 1e-15);

        let ys: Vec<f64> = xs.iter().map(|x| 5.0 + 2.0 * x).collect();
        let (a, b, r) = fit_affine(&xs, &ys).unwrap();
        assert!((a - 5.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
        assert!(r <= 1e-12);
    }

    #[test]
    fn fit_affine_normal_equations_reference() {
        // By hand: x̄=1, ȳ=2/3, Sxx=2, Sxy=1 → b=1/2, a=1/6; residuals
        // (−1/6, 1/3, −1/6) over range 1 → 1/3.
        let (a, b, r) = fit_affine(&[0.0, 1.0, 2.0], &[0.0, 1.0, 1.0]).unwrap();
        assert!((a - 1.0 / 6.0).abs() < 1e-14, "a = {a}");
        assert!((b - 0.5).abs() < 1e-14, "b = {b}");
        assert!((r - 1.0 / 3.0).abs() < 1e-14, "r = {r}");
    }

    #[test]
    fn fit_affine_rejects_degenerate_input() {
        assert!(matches!(
            fit_affine(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(fit_affine(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::DegenerateInput(_))));
        assert!(matches!(
            fit_affine(&[1.0, 2.0, 3.0], &[1.0, 2.0]),
            Err(Error::DegenerateInput(_))
        ));
        assert!(matches!(
            fit_affine(&[1.0, 2.0, f64::NAN], &[1.0, 2.0, 3.0]),
            Err(Error::DegenerateInput(_))
        ));
    }

    #[test]
    fn affine_similarity_of_lomax_scale_under_power_linear() {
        // w = 2·ln(1+z), G(z) = (1+z)² − 1: w∘G = 2w exactly.
        let t = CanonicalScale::identity(BaseScale::linear_log(2.0, 1.0).unwrap());
        let g = Generator::power_linear(2.0, 1.0).unwrap();
        let grid = linspace_grid(0.1, 9.0, 33);
        let rep = check_affine_similarity(&t, &g, &grid, 1e-9).unwrap();
        assert!(rep.passed, "residual = {}", rep.max_residual);
        assert!(rep.fitted_a.abs() < 1e-9, "a = {}", rep.fitted_a);
        assert!((rep.fitted_b - 2.0).abs() < 1e-9, "b = {}", rep.fitted_b);
    }

    #[test]
    fn affine_similarity_of_linear_scale_under_shift() {
        let t = CanonicalScale::identity(BaseScale::linear());
        let g = Generator::shift(3.0).unwrap();
        let grid = linspace_grid(-4.0, 4.0, 17);
        let rep = check_affine_similarity(&t, &g, &grid, 1e-12).unwrap();
        assert!(rep.passed);
        assert!((rep.fitted_a - 3.0).abs() < 1e-12);
        assert!((rep.fitted_b - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_scale_is_not_stretch_invariant() {
        // T = z − ln z; z ↦ 2z is not an affine motion of this scale.
        let t = CanonicalScale::identity(BaseScale::log_linear(1.0).unwrap());
        let g = Generator::stretch(2.0).unwrap();
        let grid = linspace_grid(0.2, 8.0, 33);
        let rep = check_affine_similarity(&t, &g, &grid, 1e-9).unwrap();
        assert!(!rep.passed);
        assert!(rep.max_residual > 1e-3, "residual = {}", rep.max_residual);
    }

    #[test]
    fn group_closure_squares_the_slope() {
        // G∘G for PowerLinear(2,1) is PowerLinear(4,1); the b coefficient
        // squares.
        let t = CanonicalScale::identity(BaseScale::linear_log(2.0, 1.0).unwrap());
        let grid = linspace_grid(0.1, 9.0, 33);
        let g1 = Generator::power_linear(2.0, 1.0).unwrap();
        let g2 = Generator::power_linear(4.0, 1.0).unwrap();
        let r1 = check_affine_similarity(&t, &g1, &grid, 1e-9).unwrap();
        let r2 = check_affine_similarity(&t, &g2, &grid, 1e-9).unwrap();
        assert!(r1.passed && r2.passed);
        let rel = (r2.fitted_b - r1.fitted_b * r1.fitted_b).abs() / r2.fitted_b.abs();
        assert!(rel < 1e-6, "closure slope off by {rel}");
    }

    #[test]
    fn iterate_generator_references() {
        let g = Generator::shift(1.0).unwrap();
        assert_eq!(iterate_generator(&g, 0, 4.0).unwrap(), 4.0);
        assert_eq!(iterate_generator(&g, 5, 0.0).unwrap(), 5.0);

        // ((1+1)²−1) = 3, then ((1+3)²−1) = 15.
        let g = Generator::power_linear(2.0, 1.0).unwrap();
        assert!((iterate_generator(&g, 2, 1.0).unwrap() - 15.0).abs() < 1e-12);
    }

    #[test]
    fn iterate_generator_reports_the_failing_step() {
        // Table generator z ↦ z + 0.5 on (0,1): 0.2 → 0.7 → 1.2, and the
        // third application (index 2) finds its input outside the table.
        let g = Generator::custom(vec![0.0, 1.0], vec![0.5, 1.5]).unwrap();
        let out = iterate_generator(&g, 3, 0.2);
        match out {
            Err(Error::IterateDomain { step, z }) => {
                assert_eq!(step, 2);
                assert!((z - 1.2).abs() < 1e-12);
            }
            other => panic!("expected IterateDomain, got {other:?}"),
        }
    }

    #[test]
    fn asymptotic_invariance_of_exact_pairs() {
        let t = CanonicalScale::identity(BaseScale::linear_log(2.0, 1.0).unwrap());
        let g = Generator::power_linear(2.0, 1.0).unwrap();
        let grid = linspace_grid(0.05, 1.2, 17);
        let (now, before) = check_asymptotic_invariance(&t, &g, 2, &grid, 1e-8).unwrap();
        assert!(now.passed && before.as_ref().unwrap().passed);
        assert!((now.fitted_b - 2.0).abs() < 1e-8);

        // Stretch is itself affine: passes at any n, with a ≈ 0, b ≈ 2.
        let t = CanonicalScale::identity(BaseScale::linear());
        let g = Generator::stretch(2.0).unwrap();
        let grid = linspace_grid(-3.0, 3.0, 17);
        let (now, before) = check_asymptotic_invariance(&t, &g, 3, &grid, 1e-9).unwrap();
        assert!(now.passed && before.unwrap().passed);
        assert!(now.fitted_a.abs() < 1e-9 && (now.fitted_b - 2.0).abs() < 1e-9);

        let (_, none) = check_asymptotic_invariance(&t, &g, 1, &grid, 1e-9).unwrap();
        assert!(none.is_none());
        assert!(check_asymptotic_invariance(&t, &g, 0, &grid, 1e-9).is_err());
    }

    fn exponential(lambda: f64) -> Distribution {
        let scale = CanonicalScale::identity(BaseScale::linear())
            .with_domain(0.0, f64::INFINITY)
            .unwrap();
        let dom = *scale.domain();
        Distribution::new(scale, lambda, MeasureKind::OverT, dom, QuadratureConfig::default())
            .unwrap()
    }

    fn gamma(alpha: f64, lambda: f64) -> Distribution {
        let scale = CanonicalScale::identity(BaseScale::log_linear(alpha).unwrap());
        let dom = *scale.domain();
        Distribution::new(scale, lambda, MeasureKind::OverZ, dom, QuadratureConfig::default())
            .unwrap()
    }

    #[test]
    fn shift_invariance_constants() {
        let d = exponential(1.0);
        let rep = check_shift_invariance(&d, 0.0, 1e-12).unwrap();
        assert!(rep.passed);
        assert!((rep.fitted_b - 1.0).abs() < 1e-10);

        let rep = check_shift_invariance(&d, 1.0, 1e-8).unwrap();
        assert!(rep.passed, "residual = {}", rep.max_residual);
        assert!((rep.fitted_b - (-1.0f64).exp()).abs() < 1e-9);

        let d = gamma(1.0, 1.0);
        let rep = check_shift_invariance(&d, 2.0, 1e-8).unwrap();
        assert!(rep.passed, "residual = {}", rep.max_residual);
        assert!((rep.fitted_b - (-2.0f64).exp()).abs() < 1e-9);

        let rep = check_shift_invariance(&d, -1.0, 1e-8).unwrap();
        assert!(rep.passed, "residual = {}", rep.max_residual);
        assert!((rep.fitted_b - 1.0f64.exp()).abs() / 1.0f64.exp() < 1e-8);
    }

    #[test]
    fn stretch_invariance_preserves_density_and_conservation() {
        let d = exponential(2.0);
        let rep = check_stretch_invariance(&d, 1.0, 1e-10).unwrap();
        assert!(rep.passed);

        let rep = check_stretch_invariance(&d, 2.0, 1e-8).unwrap();
        assert!(rep.passed, "residual = {}", rep.max_residual);

        let d = gamma(2.0, 1.0);
        for b in [0.5, 3.0, 10.0] {
            let rep = check_stretch_invariance(&d, b, 1e-8).unwrap();
            assert!(rep.passed, "b = {b}: residual = {}", rep.max_residual);
        }
        assert!(check_stretch_invariance(&d, 0.0, 1e-8).is_err());
    }

    #[test]
    fn report_serializes_with_short_keys() {
        let d = exponential(1.0);
        let rep = check_shift_invariance(&d, 0.5, 1e-8).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        for key in ["a", "b", "max_residual", "passed", "grid_size", "tolerance"] {
            assert!(json.get(key).is_some(), "missing key {key}");
        }
        assert!((json["a"].as_f64().unwrap() - 0.5).abs() < 1e-15);
        let back: InvarianceReport = serde_json::from_value(json).unwrap();
        assert_eq!(back.passed, rep.passed);
    }

    #[test]
    fn constant_response_fails_even_with_zero_residual() {
        // A generator that collapses T(G(z)) to a constant must not pass.
        // Build ys constant artificially through fit_affine + report.
        let (a, b, r) = fit_affine(&[1.0, 2.0, 3.0], &[4.0, 4.0, 4.0]).unwrap();
        let rep = InvarianceReport::new(a, b, r, 3, 1e-6);
        assert_eq!(rep.fitted_b, 0.0);
        assert!(!rep.passed);
    }

    #[test]
    fn stretch_invariance_holds_on_restricted_domains() {
        // Truncation shifts the conserved product away from 1 (boundary
        // terms no longer vanish), but the stretch still transports it.
        let scale = CanonicalScale::identity(BaseScale::log_linear(1.0).unwrap())
            .with_domain(0.5, 6.0)
            .unwrap();
        let d = Distribution::new(
            scale,
            1.0,
            MeasureKind::OverZ,
            Interval::new(0.5, 6.0).unwrap(),
            QuadratureConfig::default(),
        )
        .unwrap();
        let rep = check_stretch_invariance(&d, 2.0, 1e-8).unwrap();
        assert!(rep.passed, "residual = {}", rep.max_residual);
    }
}
