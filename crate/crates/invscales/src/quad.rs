//! Globally adaptive quadrature on open intervals.
//!
//! The kernel is the embedded 7-point Gauss / 15-point Kronrod pair; the
//! driver keeps a worst-first heap of subintervals and bisects the one with
//! the largest error estimate until the summed estimate meets tolerance.
//! Infinite endpoints are folded to (0,1) or (−1,1) by the rational map
//! t = z/(1+|z|) before any evaluation. Nodes are interior, so integrable
//! endpoint singularities (beta, gamma scales) need no special casing.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scale::Interval;

/// Abscissae of the 15-point Kronrod rule: the odd-indexed entries (plus 0)
/// are the embedded 7-point Gauss nodes.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

/// Weights of the 7-point Gauss rule.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Weights of the 15-point Kronrod rule.
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

/// How infinite endpoints are folded to a finite interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfiniteMap {
    #[default]
    RationalMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    pub infinite_map: InfiniteMap,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        QuadratureConfig {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_depth: 50,
            infinite_map: InfiniteMap::RationalMap,
        }
    }
}

impl QuadratureConfig {
    /// Tight tolerances for one-time constants (normalization, λ-solving).
    /// Deeper than default: endpoint-singular kernels (beta with α < 1)
    /// only gain half a digit per bisection level.
    pub fn tight() -> Self {
        QuadratureConfig { rel_tol: 1e-12, abs_tol: 1e-14, max_depth: 80, ..Default::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) || !(self.abs_tol > 0.0) {
            return Err(Error::Config(format!(
                "quadrature tolerances must be positive: rel {}, abs {}",
                self.rel_tol, self.abs_tol
            )));
        }
        Ok(())
    }
}

/// One G7K15 application on [a,b]: (estimate, error bound, ∫|f|, ∫|f−mean|).
fn qk15<F>(f: &F, a: f64, b: f64) -> Result<(f64, f64, f64, f64)>
where
    F: Fn(f64) -> Result<f64>,
{
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let eval = |z: f64| -> Result<f64> {
        let v = f(z)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::non_finite(z, "quadrature integrand"))
        }
    };

    let fc = eval(centre)?;
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0f64; 7];
    let mut fv2 = [0.0f64; 7];

    for j in 0..3 {
        let jtw = 2 * j + 1;
        let dx = half * XGK[jtw];
        let f1 = eval(centre - dx)?;
        let f2 = eval(centre + dx)?;
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        let fsum = f1 + f2;
        resg += WG[j] * fsum;
        resk += WGK[jtw] * fsum;
        resabs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..4 {
        let jtwm1 = 2 * j;
        let dx = half * XGK[jtwm1];
        let f1 = eval(centre - dx)?;
        let f2 = eval(centre + dx)?;
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        let fsum = f1 + f2;
        resk += WGK[jtwm1] * fsum;
        resabs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let reskh = resk * 0.5;
    let mut resasc = WGK[7] * (fc - reskh).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - reskh).abs() + (fv2[j] - reskh).abs());
    }

    let result = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((resk - resg) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    let tiny_floor = f64::MIN_POSITIVE / (50.0 * f64::EPSILON);
    if resabs > tiny_floor {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    Ok((result, err, resabs, resasc))
}

struct Segment {
    a: f64,
    b: f64,
    result: f64,
    err: f64,
    depth: u32,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Hard cap on subdivisions; hitting it means the integrand is hostile.
const MAX_SEGMENTS: usize = 200_000;

fn integrate_finite<F>(f: &F, lo: f64, hi: f64, cfg: &QuadratureConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let (r, e, _, _) = qk15(f, lo, hi)?;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a: lo, b: hi, result: r, err: e, depth: 0 });
    let mut total = r;
    let mut total_err = e;

    loop {
        if total_err <= cfg.abs_tol.max(cfg.rel_tol * total.abs()) {
            return Ok(total);
        }
        if !total.is_finite() {
            return Err(Error::Divergent(format!(
                "integral on ({lo}, {hi}) is not finite"
            )));
        }
        let worst = heap.pop().expect("heap holds every live segment");
        if worst.depth >= cfg.max_depth {
            return Err(Error::NonConverged(format!(
                "quadrature depth {} exhausted on ({}, {}); residual error {:.3e}",
                cfg.max_depth, worst.a, worst.b, total_err
            )));
        }
        if heap.len() >= MAX_SEGMENTS {
            return Err(Error::NonConverged(format!(
                "quadrature segment budget exhausted; residual error {total_err:.3e}"
            )));
        }
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval narrower than float spacing; cannot improve further.
            return Err(Error::NonConverged(format!(
                "quadrature stalled at machine precision near {mid}; residual error {total_err:.3e}"
            )));
        }
        let (r1, e1, _, _) = qk15(f, worst.a, mid)?;
        let (r2, e2, _, _) = qk15(f, mid, worst.b)?;
        total += r1 + r2 - worst.result;
        total_err += e1 + e2 - worst.err;
        heap.push(Segment { a: worst.a, b: mid, result: r1, err: e1, depth: worst.depth + 1 });
        heap.push(Segment { a: mid, b: worst.b, result: r2, err: e2, depth: worst.depth + 1 });
    }
}

/// Adaptive integral of `f` over an open interval, infinite endpoints
/// allowed. Error target: max(abs_tol, rel_tol·|I|).
pub fn integrate<F>(f: F, domain: &Interval, cfg: &QuadratureConfig) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    cfg.validate()?;
    let (lo, hi) = (domain.lo(), domain.hi());

    // The mapped integrand treats a non-finite z (fold point u→1 under-
    // flowing) as zero: an integrable tail must vanish there anyway.
    match (lo.is_finite(), hi.is_finite()) {
        (true, true) => integrate_finite(&f, lo, hi, cfg),
        (true, false) => {
            let g = |u: f64| -> Result<f64> {
                let om = 1.0 - u;
                let z = lo + u / om;
                if !z.is_finite() {
                    return Ok(0.0);
                }
                let v = f(z)?;
                if v == 0.0 {
                    return Ok(0.0);
                }
                Ok(v / (om * om))
            };
            integrate_finite(&g, 0.0, 1.0, cfg)
        }
        (false, true) => {
            let g = |u: f64| -> Result<f64> {
                let om = 1.0 - u;
                let z = hi - u / om;
                if !z.is_finite() {
                    return Ok(0.0);
                }
                let v = f(z)?;
                if v == 0.0 {
                    return Ok(0.0);
                }
                Ok(v / (om * om))
            };
            integrate_finite(&g, 0.0, 1.0, cfg)
        }
        (false, false) => {
            let g = |t: f64| -> Result<f64> {
                let om = 1.0 - t.abs();
                let z = t / om;
                if !z.is_finite() {
                    return Ok(0.0);
                }
                let v = f(z)?;
                if v == 0.0 {
                    return Ok(0.0);
                }
                Ok(v / (om * om))
            };
            integrate_finite(&g, -1.0, 1.0, cfg)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, PI};

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default()
    }

    #[test]
    fn unit_constant() {
        let v = integrate(|_| Ok(1.0), &Interval::UNIT, &cfg()).unwrap();
        assert!((v - 1.0).abs() < 1e-14);
    }

    #[test]
    fn exponential_tail() {
        let v = integrate(|z| Ok((-z).exp()), &Interval::POSITIVE, &cfg()).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn gaussian_whole_line() {
        let v = integrate(|z| Ok((-PI * z * z).exp()), &Interval::REAL_LINE, &cfg()).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn negative_half_line() {
        let dom = Interval::new(f64::NEG_INFINITY, 0.0).unwrap();
        let v = integrate(|z| Ok(z.exp()), &dom, &cfg()).unwrap();
        assert!((v - 1.0).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn integrable_endpoint_singularity() {
        // ∫₀¹ z^{−1/2} dz = 2. Bisection gains half a digit per level on an
        // inverse-sqrt endpoint, so this one needs depth beyond the default.
        let deep = QuadratureConfig { max_depth: 80, ..cfg() };
        let v = integrate(|z| Ok(1.0 / z.sqrt()), &Interval::UNIT, &deep).unwrap();
        assert!((v - 2.0).abs() < 1e-9, "got {v}");

        // ∫₀¹ log z dz = −1; a log singularity converges at the defaults.
        let v = integrate(|z| Ok(z.ln()), &Interval::UNIT, &cfg()).unwrap();
        assert!((v + 1.0).abs() < 1e-10, "got {v}");
    }

    #[test]
    fn smooth_integrand_hits_tight_tolerance() {
        let v = integrate(|z| Ok(z.exp()), &Interval::UNIT, &QuadratureConfig::tight()).unwrap();
        assert!((v - (E - 1.0)).abs() < 1e-13, "got {v}");
    }

    #[test]
    fn divergent_integrand_errors() {
        let out = integrate(|z| Ok(1.0 / z), &Interval::UNIT, &cfg());
        assert!(
            matches!(out, Err(Error::NonConverged(_)) | Err(Error::Divergent(_))),
            "got {out:?}"
        );
    }

    #[test]
    fn non_finite_interior_value_errors() {
        let dom = Interval::new(-1.0, 1.0).unwrap();
        let out = integrate(|z| Ok(z.sqrt()), &dom, &cfg());
        assert!(matches!(out, Err(Error::NonFinite { .. })), "got {out:?}");
    }

    #[test]
    fn config_serde_defaults() {
        let c: QuadratureConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(c, QuadratureConfig::default());
        let c: QuadratureConfig = serde_json::from_str("{\"rel_tol\":1e-8}").unwrap();
        assert_eq!(c.rel_tol, 1e-8);
        assert_eq!(c.max_depth, 50);
    }
}
