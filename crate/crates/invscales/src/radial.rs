//! The Gaussian radial measure.
//!
//! Every unimodal canonical scale T has a minimum T* (interior or at the
//! boundary). The signed radial coordinate R(z) = sign(z−z*)·√(T(z)−T*)
//! turns the exponential form k·e^{−λT} into a Gaussian in R: with
//! v = √(λ/π) the density over dR is v·e^{−λR²}, its variance is 1/(2λ),
//! and πv²σ² = ½ independently of λ. This module finds T*, builds the
//! chart, transforms distributions to the radial measure, and implements
//! the rotational partitions of the conserved quantity T = R².

use std::f64::consts::PI;

use crate::dist::{Distribution, MeasureKind};
use crate::error::{Error, Result};
use crate::grid::probe_grid;
use crate::scale::{CanonicalScale, Interval};
use crate::sum::neumaier_sum;

/// Tolerance on z* for interior minima, relative to 1+|z*|.
const ZSTAR_TOL: f64 = 1e-10;

/// Where the scale attains its minimum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum MinLocation {
    Interior,
    /// Minimum at an endpoint (z_star may be infinite; t_star is the limit).
    Boundary,
}

pub(crate) struct ScaleMinimum {
    pub z_star: f64,
    pub t_star: f64,
    pub location: MinLocation,
}

fn effective_deriv(
    scale: &CanonicalScale,
    t_stretch: f64,
    z: f64,
) -> Result<f64> {
    Ok(t_stretch * scale.deriv_signed_saturating(z)?)
}

/// Extrapolates the limit of T at a finite endpoint from three interior
/// samples, assuming T − T* ~ c·ε^p. Returns −inf when the values diverge
/// (log-type scales are unbounded below at the edge).
fn boundary_limit(scale: &CanonicalScale, endpoint: f64, toward: f64) -> Result<f64> {
    let eps = 1e-7 * (1.0 + endpoint.abs());
    let dir = (toward - endpoint).signum();
    let t1 = scale.eval_saturating(endpoint + dir * eps)?;
    let t2 = scale.eval_saturating(endpoint + dir * 2.0 * eps)?;
    let t3 = scale.eval_saturating(endpoint + dir * 4.0 * eps)?;
    extrapolate_limit(t1, t2, t3)
}

/// Limit of T toward an infinite endpoint, extrapolated in u = ±1/z from
/// three samples beyond the far probe point (T − T* ~ c·u^p there).
fn boundary_limit_infinite(
    scale: &CanonicalScale,
    positive_end: bool,
    anchor: f64,
) -> Result<f64> {
    let a = anchor.abs().max(1.0);
    let eps = 1.0 / (4.0 * a);
    let zs = |u: f64| if positive_end { 1.0 / u } else { -1.0 / u };
    let t1 = scale.eval_saturating(zs(eps))?;
    let t2 = scale.eval_saturating(zs(2.0 * eps))?;
    let t3 = scale.eval_saturating(zs(4.0 * eps))?;
    extrapolate_limit(t1, t2, t3)
}

/// Shared Richardson step: t1 is the sample nearest the endpoint, t2 and
/// t3 at twice and four times the offset.
fn extrapolate_limit(t1: f64, t2: f64, t3: f64) -> Result<f64> {
    if !t1.is_finite() {
        return Ok(t1);
    }
    if !t2.is_finite() || !t3.is_finite() {
        // Interior samples saturated; the nearest one is the best guess.
        return Ok(t1);
    }
    let d1 = t2 - t1;
    let d2 = t3 - t2;
    // Flat to rounding: the sample is already the limit.
    if d1.abs() <= 1e-14 * (1.0 + t1.abs()) {
        return Ok(t1);
    }
    let r = d2 / d1;
    // r = 2^p. p near zero means logarithmic divergence toward the endpoint.
    if !(r > 1.0001) {
        return Ok(if d1 > 0.0 { f64::NEG_INFINITY } else { f64::INFINITY });
    }
    Ok(t1 - d1 / (r - 1.0))
}

pub(crate) fn find_minimum_impl(
    scale: &CanonicalScale,
    domain: &Interval,
) -> Result<ScaleMinimum> {
    let grid = probe_grid(domain, 64);
    let mut signs: Vec<f64> = Vec::with_capacity(grid.len());
    for &z in &grid {
        signs.push(scale.deriv_signed_saturating(z)?);
    }

    // Count strict sign changes, skipping exact zeros.
    let mut changes: Vec<usize> = Vec::new();
    let mut last_sign = 0.0f64;
    for (i, &d) in signs.iter().enumerate() {
        let s = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            continue;
        };
        if last_sign != 0.0 && s != last_sign {
            changes.push(i);
        }
        last_sign = s;
    }

    match changes.len() {
        0 => {
            // Monotone: minimum sits at an endpoint.
            let increasing = last_sign >= 0.0;
            let (z_star, inward) =
                if increasing { (domain.lo(), domain.hi()) } else { (domain.hi(), domain.lo()) };
            let t_star = if z_star.is_finite() {
                boundary_limit(scale, z_star, inward)?
            } else {
                let anchor = if increasing { grid[0] } else { grid[grid.len() - 1] };
                boundary_limit_infinite(scale, z_star > 0.0, anchor)?
            };
            Ok(ScaleMinimum { z_star, t_star, location: MinLocation::Boundary })
        }
        1 => {
            let i = changes[0];
            // Find the nearest preceding probe with a nonzero sign.
            let j = (0..i).rev().find(|&j| signs[j] != 0.0).expect("change implies prior sign");
            if signs[j] > 0.0 {
                // + to −: interior maximum, so the scale is not unimodal-down.
                return Err(Error::MultiModal { sign_changes: 1 });
            }
            let (mut lo, mut hi) = (grid[j], grid[i]);
            // Bisect the signed derivative's root.
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if hi - lo <= ZSTAR_TOL * (1.0 + mid.abs()) {
                    break;
                }
                let d = scale.deriv_signed_saturating(mid)?;
                if d < 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let z_star = 0.5 * (lo + hi);
            let t_star = scale.eval_saturating(z_star)?;
            Ok(ScaleMinimum { z_star, t_star, location: MinLocation::Interior })
        }
        n => Err(Error::MultiModal { sign_changes: n }),
    }
}

/// Minimum of the canonical scale over the domain. Interior minima are
/// bisected to |z − z*| ≤ 1e−10·(1+|z*|); a monotone scale reports its
/// endpoint with the extrapolated limit value (which may be −inf for
/// scales unbounded below at the edge).
pub fn find_scale_minimum(scale: &CanonicalScale, domain: &Interval) -> Result<(f64, f64)> {
    let m = find_minimum_impl(scale, domain)?;
    Ok((m.z_star, m.t_star))
}

// ---------------------------------------------------------------------------
// RadialChart
// ---------------------------------------------------------------------------

/// Chart for the signed radial coordinate of an effective scale
/// T_eff(z) = t_shift + t_stretch·T(z).
#[derive(Debug, Clone)]
pub struct RadialChart {
    scale: CanonicalScale,
    t_shift: f64,
    t_stretch: f64,
    z_star: f64,
    t_star: f64,
    /// lim |dR/dz| at an interior z*, i.e. √(T_eff″(z*)/2).
    slope_at_star: f64,
    one_sided: bool,
    v: f64,
}

/// Below this threshold on T_eff − T*, |dR/dz| switches from the ratio
/// formula (which loses precision to cancellation) to the cached limit.
const RADICAND_FLOOR: f64 = 1e-9;

impl RadialChart {
    /// Builds the chart for T_eff = t_shift + t_stretch·T over `domain`.
    /// `v` is the radial stretch (√(λ/π) when the chart belongs to a
    /// distribution with rate λ; 1 for a bare chart).
    pub(crate) fn build(
        scale: &CanonicalScale,
        t_shift: f64,
        t_stretch: f64,
        domain: &Interval,
        v: f64,
    ) -> Result<Self> {
        if !(t_stretch > 0.0) {
            return Err(Error::Param(format!("radial chart needs t_stretch > 0, got {t_stretch}")));
        }
        let m = find_minimum_impl(scale, domain)?;
        if !m.z_star.is_finite() {
            return Err(Error::Param(format!(
                "scale minimum sits at an infinite endpoint (z* = {}); no radial chart exists",
                m.z_star
            )));
        }
        let t_star = t_shift + t_stretch * m.t_star;
        if !t_star.is_finite() {
            return Err(Error::Param(format!(
                "scale is unbounded below near z* = {} (T* = {}); no radial chart exists",
                m.z_star, t_star
            )));
        }
        let one_sided = m.location == MinLocation::Boundary;
        let slope_at_star = if one_sided {
            // Boundary minimum: the ratio formula applies on the whole
            // interior (the 1/√ endpoint singularity is integrable).
            f64::INFINITY
        } else {
            // √(T_eff″/2) with T_eff″ from a central difference of the
            // analytic first derivative.
            let h = 1e-5 * (1.0 + m.z_star.abs());
            let dp = effective_deriv(scale, t_stretch, m.z_star + h)?;
            let dm = effective_deriv(scale, t_stretch, m.z_star - h)?;
            let second = (dp - dm) / (2.0 * h);
            if !(second > 0.0) {
                return Err(Error::Param(format!(
                    "scale has non-positive curvature {second} at its minimum z* = {}",
                    m.z_star
                )));
            }
            (0.5 * second).sqrt()
        };
        Ok(RadialChart {
            scale: scale.clone(),
            t_shift,
            t_stretch,
            z_star: m.z_star,
            t_star,
            slope_at_star,
            one_sided,
            v,
        })
    }

    /// Bare chart of a canonical scale itself (no shift/stretch, v = 1).
    pub fn of_scale(scale: &CanonicalScale, domain: &Interval) -> Result<Self> {
        Self::build(scale, 0.0, 1.0, domain, 1.0)
    }

    pub fn z_star(&self) -> f64 {
        self.z_star
    }

    pub fn t_star(&self) -> f64 {
        self.t_star
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn one_sided(&self) -> bool {
        self.one_sided
    }

    fn t_eff(&self, z: f64) -> Result<f64> {
        Ok(self.t_shift + self.t_stretch * self.scale.eval_saturating(z)?)
    }

    /// R(z) = sign(z−z*)·√(T_eff(z)−T*); one-sided charts return √ only.
    pub fn radial(&self, z: f64) -> Result<f64> {
        let d = self.t_eff(z)? - self.t_star;
        if d < -1e-12 * (1.0 + self.t_star.abs()) {
            return Err(Error::NegativeRadicand { z, deficit: -d });
        }
        let r = d.max(0.0).sqrt();
        if self.one_sided {
            Ok(r)
        } else {
            Ok(if z < self.z_star { -r } else { r })
        }
    }

    /// |dR/dz| = |T_eff′|/(2√(T_eff−T*)), switching to the curvature limit
    /// where the radicand is too small for the ratio to be trustworthy.
    pub fn dr_dz_abs(&self, z: f64) -> Result<f64> {
        let d = self.t_eff(z)? - self.t_star;
        if !self.one_sided && d < RADICAND_FLOOR * (1.0 + self.t_star.abs()) {
            return Ok(self.slope_at_star);
        }
        let dt = effective_deriv(&self.scale, self.t_stretch, z)?.abs();
        Ok(dt / (2.0 * d.max(f64::MIN_POSITIVE).sqrt()))
    }

    /// ln |dR/dz| without overflowing for extreme-value scales.
    pub(crate) fn log_dr_dz(&self, z: f64) -> Result<f64> {
        let d = self.t_eff(z)? - self.t_star;
        if !self.one_sided && d < RADICAND_FLOOR * (1.0 + self.t_star.abs()) {
            return Ok(self.slope_at_star.ln());
        }
        let log_dt = self.scale.log_deriv_abs(z)? + self.t_stretch.ln();
        Ok(log_dt - (2.0f64).ln() - 0.5 * d.max(f64::MIN_POSITIVE).ln())
    }

    /// Normalization prefactor of the Gaussian radial density for rate λ:
    /// √(λ/π), doubled for one-sided charts (R covers only half the line).
    pub fn gaussian_k(&self, lambda: f64) -> f64 {
        let base = (lambda / PI).sqrt();
        if self.one_sided {
            2.0 * base
        } else {
            base
        }
    }
}

/// R(z) for a chart (spec-shaped free function).
pub fn radial_coordinate(chart: &RadialChart, z: f64) -> Result<f64> {
    chart.radial(z)
}

// ---------------------------------------------------------------------------
// Distribution-level radial operations
// ---------------------------------------------------------------------------

/// Re-expresses a distribution over the Gaussian radial measure: same scale
/// and λ, measure OverR, with the scale re-centered so T_eff ≥ 0 and the
/// normalization constant lands on (1 or 2)·√(λ/π).
pub fn to_gaussian_form(d: &Distribution) -> Result<Distribution> {
    d.with_measure(MeasureKind::OverR)
}

/// (σ², πv²σ²) of a radial-measure distribution. The circular check equals
/// ½ for every valid chart; a two-sided chart must also have ⟨R⟩ = 0 within
/// 1e−8, which this verifies before returning.
pub fn radial_variance(d_r: &Distribution) -> Result<(f64, f64)> {
    let chart = d_r.chart().ok_or_else(|| {
        Error::Param("radial_variance needs a distribution over measure R".into())
    })?;
    let sigma2 = d_r.mean_of(|z| {
        let r = chart.radial(z)?;
        Ok(r * r)
    })?;
    if !chart.one_sided() {
        let mean_r = d_r.mean_of(|z| chart.radial(z))?;
        if mean_r.abs() > 1e-8 {
            return Err(Error::NonConverged(format!(
                "radial mean should vanish on a two-sided chart; got {mean_r:.3e}"
            )));
        }
    }
    let circular = PI * chart.v() * chart.v() * sigma2;
    Ok((sigma2, circular))
}

// ---------------------------------------------------------------------------
// Rotational partitions
// ---------------------------------------------------------------------------

/// A conserved total T = R² split over an angle θ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Partition2D {
    pub total: f64,
    pub theta: f64,
}

impl Partition2D {
    pub fn new(total: f64, theta: f64) -> Result<Self> {
        if !(total >= 0.0) {
            return Err(Error::NegativeTotal { total });
        }
        Ok(Partition2D { total, theta })
    }

    pub fn components(&self) -> (f64, f64) {
        let r = self.total.sqrt();
        (r * self.theta.cos(), r * self.theta.sin())
    }
}

/// (w, ẇ) = (√total·cos θ, √total·sin θ); w² + ẇ² = total.
pub fn circular_partition(total: f64, theta: f64) -> Result<(f64, f64)> {
    Ok(Partition2D::new(total, theta)?.components())
}

/// Factors e^{−λ·total} into location and rate parts (e^{−λw²}, e^{−λẇ²}).
pub fn factor_location_rate(d: &Distribution, total: f64, theta: f64) -> Result<(f64, f64)> {
    let (w, wdot) = circular_partition(total, theta)?;
    let lambda = d.lambda();
    Ok(((-lambda * w * w).exp(), (-lambda * wdot * wdot).exp()))
}

/// Σ(√pᵢ)², compensated; equals Σpᵢ and documents the spherical embedding
/// of probability vectors.
pub fn sqrt_probability_partition(probs: &[f64]) -> Result<f64> {
    for (index, &p) in probs.iter().enumerate() {
        if !(p >= 0.0) {
            return Err(Error::NegativeProbability { p, index });
        }
    }
    Ok(neumaier_sum(probs.iter().map(|&p| {
        let s = p.sqrt();
        s * s
    })))
}

// ---------------------------------------------------------------------------
// Parametric curves
// ---------------------------------------------------------------------------

/// One row of the three-chart parametric description of a distribution.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CurveRow {
    pub z: f64,
    #[serde(rename = "T")]
    pub t: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub q_z: f64,
    #[serde(rename = "q_T")]
    pub q_t: f64,
    #[serde(rename = "q_R")]
    pub q_r: f64,
}

/// Rows (z, T, R, q_z, q_T, q_R): the native curve, the exponential-
/// Boltzmann curve (log q_T = log k − λT with the distribution's own k),
/// and the Gaussian radial curve q_R = k_R·e^{−λ(T−T*)}.
pub fn parametric_curves(d: &Distribution, grid: &[f64]) -> Result<Vec<CurveRow>> {
    let owned_chart;
    let chart = match d.chart() {
        Some(c) => c,
        None => {
            owned_chart = RadialChart::build(
                d.scale(),
                d.t_shift(),
                d.t_stretch(),
                d.domain(),
                (d.lambda() / PI).sqrt(),
            )?;
            &owned_chart
        }
    };
    let lambda = d.lambda();
    let k_r = chart.gaussian_k(lambda);
    let mut rows = Vec::with_capacity(grid.len());
    for &z in grid {
        let t = d.t_eff(z)?;
        let r = chart.radial(z)?;
        let q_z = d.pdf(z)?;
        let q_t = d.k() * (-lambda * t).exp();
        let q_r = k_r * (-lambda * (t - chart.t_star())).exp();
        rows.push(CurveRow { z, t, r, q_z, q_t, q_r });
    }
    Ok(rows)
}

/// CSV with header `z,T,R,q_z,q_T,q_R`, floats at 17 significant digits.
pub fn curves_to_csv(rows: &[CurveRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 160 + 32);
    out.push_str("z,T,R,q_z,q_T,q_R\n");
    for row in rows {
        out.push_str(&format!(
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}\n",
            row.z, row.t, row.r, row.q_z, row.q_t, row.q_r
        ));
    }
    out
}
