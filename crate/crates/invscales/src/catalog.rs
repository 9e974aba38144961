//! Named classical families expressed as (base scale, exp_rate, measure,
//! domain) configurations, each paired with an independent closed-form
//! oracle.
//!
//! The catalog parameterization is the canonical one: q = k·e^{−λT(z)}
//! read under the family's measure. Where textbook parameters differ the
//! oracle documents the mapping (gamma shape s = αλ+1 and rate λ; Gaussian
//! variance σ² = 1/(2λ); Lomax exponent γ = λα; Student exponent γ with
//! curvature β). Sign convention for the extreme-value scales T = e^{β·w}:
//! w = z gives Gumbel; w = log z gives Weibull for β > 0 and Fréchet for
//! β < 0.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::dist::{Distribution, MeasureKind};
use crate::error::{Error, Result};
use crate::quad::QuadratureConfig;
use crate::scale::{compose_scales, BaseScale, CanonicalScale, Endpoint};
use crate::special::{ln_beta, ln_gamma};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NamedFamily {
    /// T = z over dT on (0,∞); k = λ.
    Exponential { lambda: f64 },
    /// T = z² over dz on ℝ; σ² = 1/(2λ), k = √(λ/π).
    Gaussian { lambda: f64 },
    /// T = z − α·log z over dz on (0,∞); shape αλ+1, rate λ.
    Gamma { alpha: f64, lambda: f64 },
    /// T = −[(α−1)log z + (β−1)log(1−z)] over dz on (0,1); λ = 1.
    Beta { alpha: f64, beta: f64 },
    /// T = α·log(1+βz) over dz on (0,∞); tail exponent γ = λα > 1.
    Lomax { alpha: f64, beta: f64, lambda: f64 },
    /// T = γ·log(1+βz²) over dz on ℝ; λ = 1, γ > 1/2.
    StudentGeneralized { beta: f64, gamma_exp: f64 },
    /// T = e^{βz} over dT on ℝ, β > 0; k = λ.
    Gumbel { beta: f64, lambda: f64 },
    /// T = z^β over dT on (0,∞), β < 0; k = λ.
    Frechet { beta: f64, lambda: f64 },
    /// T = z^β over dT on (0,∞), β > 0; k = λ.
    Weibull { beta: f64, lambda: f64 },
    /// T = z^β over dz on (0,∞), β > 0; k = λ^{1/β}/Γ(1+1/β).
    StretchedExponential { beta: f64, lambda: f64 },
}

pub const FAMILY_TAGS: [&str; 10] = [
    "exponential",
    "gaussian",
    "gamma",
    "beta",
    "lomax",
    "student_generalized",
    "gumbel",
    "frechet",
    "weibull",
    "stretched_exponential",
];

fn positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Param(format!("{name} must be positive and finite, got {v}")))
    }
}

fn finite(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Param(format!("{name} must be finite, got {v}")))
    }
}

impl NamedFamily {
    pub fn tag(&self) -> &'static str {
        match self {
            NamedFamily::Exponential { .. } => "exponential",
            NamedFamily::Gaussian { .. } => "gaussian",
            NamedFamily::Gamma { .. } => "gamma",
            NamedFamily::Beta { .. } => "beta",
            NamedFamily::Lomax { .. } => "lomax",
            NamedFamily::StudentGeneralized { .. } => "student_generalized",
            NamedFamily::Gumbel { .. } => "gumbel",
            NamedFamily::Frechet { .. } => "frechet",
            NamedFamily::Weibull { .. } => "weibull",
            NamedFamily::StretchedExponential { .. } => "stretched_exponential",
        }
    }

    pub fn params(&self) -> Vec<(&'static str, f64)> {
        match *self {
            NamedFamily::Exponential { lambda } => vec![("lambda", lambda)],
            NamedFamily::Gaussian { lambda } => vec![("lambda", lambda)],
            NamedFamily::Gamma { alpha, lambda } => vec![("alpha", alpha), ("lambda", lambda)],
            NamedFamily::Beta { alpha, beta } => vec![("alpha", alpha), ("beta", beta)],
            NamedFamily::Lomax { alpha, beta, lambda } => {
                vec![("alpha", alpha), ("beta", beta), ("lambda", lambda)]
            }
            NamedFamily::StudentGeneralized { beta, gamma_exp } => {
                vec![("beta", beta), ("gamma_exp", gamma_exp)]
            }
            NamedFamily::Gumbel { beta, lambda }
            | NamedFamily::Frechet { beta, lambda }
            | NamedFamily::Weibull { beta, lambda }
            | NamedFamily::StretchedExponential { beta, lambda } => {
                vec![("beta", beta), ("lambda", lambda)]
            }
        }
    }

    pub fn param_names(tag: &str) -> Result<&'static [&'static str]> {
        Ok(match tag {
            "exponential" | "gaussian" => &["lambda"],
            "gamma" => &["alpha", "lambda"],
            "beta" => &["alpha", "beta"],
            "lomax" => &["alpha", "beta", "lambda"],
            "student_generalized" => &["beta", "gamma_exp"],
            "gumbel" | "frechet" | "weibull" | "stretched_exponential" => &["beta", "lambda"],
            other => return Err(Error::Param(format!("unknown family '{other}'"))),
        })
    }

    /// Builds a family from its tag and a parameter map (the wire form).
    pub fn from_params(tag: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let names = Self::param_names(tag)?;
        for key in params.keys() {
            if !names.contains(&key.as_str()) {
                return Err(Error::Param(format!(
                    "family '{tag}' does not take a parameter '{key}' (expected {names:?})"
                )));
            }
        }
        let get = |name: &str| -> Result<f64> {
            params
                .get(name)
                .copied()
                .ok_or_else(|| Error::Param(format!("family '{tag}' needs parameter '{name}'")))
        };
        let family = match tag {
            "exponential" => NamedFamily::Exponential { lambda: get("lambda")? },
            "gaussian" => NamedFamily::Gaussian { lambda: get("lambda")? },
            "gamma" => NamedFamily::Gamma { alpha: get("alpha")?, lambda: get("lambda")? },
            "beta" => NamedFamily::Beta { alpha: get("alpha")?, beta: get("beta")? },
            "lomax" => NamedFamily::Lomax {
                alpha: get("alpha")?,
                beta: get("beta")?,
                lambda: get("lambda")?,
            },
            "student_generalized" => NamedFamily::StudentGeneralized {
                beta: get("beta")?,
                gamma_exp: get("gamma_exp")?,
            },
            "gumbel" => NamedFamily::Gumbel { beta: get("beta")?, lambda: get("lambda")? },
            "frechet" => NamedFamily::Frechet { beta: get("beta")?, lambda: get("lambda")? },
            "weibull" => NamedFamily::Weibull { beta: get("beta")?, lambda: get("lambda")? },
            "stretched_exponential" => NamedFamily::StretchedExponential {
                beta: get("beta")?,
                lambda: get("lambda")?,
            },
            other => return Err(Error::Param(format!("unknown family '{other}'"))),
        };
        family.validate()?;
        Ok(family)
    }

    /// Parameter validation, shared by build and the oracle.
    pub fn validate(&self) -> Result<()> {
        match *self {
            NamedFamily::Exponential { lambda } | NamedFamily::Gaussian { lambda } => {
                positive("lambda", lambda)?;
            }
            NamedFamily::Gamma { alpha, lambda } => {
                finite("alpha", alpha)?;
                if alpha < 0.0 {
                    return Err(Error::Param(format!("gamma needs alpha >= 0, got {alpha}")));
                }
                positive("lambda", lambda)?;
            }
            NamedFamily::Beta { alpha, beta } => {
                positive("alpha", alpha)?;
                finite("beta", beta)?;
                if beta <= 1.0 {
                    return Err(Error::Param(format!("beta family needs beta > 1, got {beta}")));
                }
            }
            NamedFamily::Lomax { alpha, beta, lambda } => {
                positive("alpha", alpha)?;
                positive("beta", beta)?;
                positive("lambda", lambda)?;
                let gamma = lambda * alpha;
                if gamma <= 1.0 {
                    return Err(Error::Divergent(format!(
                        "lomax needs tail exponent lambda*alpha > 1 for integrability, got {gamma}"
                    )));
                }
            }
            NamedFamily::StudentGeneralized { beta, gamma_exp } => {
                positive("beta", beta)?;
                finite("gamma_exp", gamma_exp)?;
                if gamma_exp <= 0.5 {
                    return Err(Error::Divergent(format!(
                        "student needs gamma_exp > 1/2 for integrability, got {gamma_exp}"
                    )));
                }
            }
            NamedFamily::Gumbel { beta, lambda }
            | NamedFamily::Weibull { beta, lambda }
            | NamedFamily::StretchedExponential { beta, lambda } => {
                positive("beta", beta)?;
                positive("lambda", lambda)?;
            }
            NamedFamily::Frechet { beta, lambda } => {
                finite("beta", beta)?;
                if beta >= 0.0 {
                    return Err(Error::Param(format!("frechet needs beta < 0, got {beta}")));
                }
                positive("lambda", lambda)?;
            }
        }
        Ok(())
    }

    fn scale(&self) -> Result<CanonicalScale> {
        Ok(match *self {
            NamedFamily::Exponential { .. } => {
                CanonicalScale::identity(BaseScale::linear()).with_domain(0.0, f64::INFINITY)?
            }
            NamedFamily::Gaussian { .. } => CanonicalScale::identity(BaseScale::square()),
            NamedFamily::Gamma { alpha, .. } => {
                CanonicalScale::identity(BaseScale::log_linear(alpha)?)
            }
            NamedFamily::Beta { alpha, beta } => {
                CanonicalScale::identity(BaseScale::log_linear_log(alpha, beta)?)
            }
            NamedFamily::Lomax { alpha, beta, .. } => {
                CanonicalScale::identity(BaseScale::linear_log(alpha, beta)?)
                    .with_domain(0.0, f64::INFINITY)?
            }
            NamedFamily::StudentGeneralized { beta, gamma_exp } => CanonicalScale::identity(
                compose_scales(BaseScale::linear_log(gamma_exp, beta)?, BaseScale::square())?,
            ),
            NamedFamily::Gumbel { beta, .. } => CanonicalScale::new(BaseScale::linear(), beta)?,
            NamedFamily::Frechet { beta, .. } | NamedFamily::Weibull { beta, .. } => {
                CanonicalScale::new(BaseScale::log(), beta)?
            }
            NamedFamily::StretchedExponential { beta, .. } => {
                CanonicalScale::new(BaseScale::log(), beta)?
            }
        })
    }

    pub fn measure(&self) -> MeasureKind {
        match self {
            NamedFamily::Exponential { .. }
            | NamedFamily::Gumbel { .. }
            | NamedFamily::Frechet { .. }
            | NamedFamily::Weibull { .. } => MeasureKind::OverT,
            _ => MeasureKind::OverZ,
        }
    }

    pub fn lambda(&self) -> f64 {
        match *self {
            NamedFamily::Exponential { lambda }
            | NamedFamily::Gaussian { lambda }
            | NamedFamily::Gamma { lambda, .. }
            | NamedFamily::Lomax { lambda, .. }
            | NamedFamily::Gumbel { lambda, .. }
            | NamedFamily::Frechet { lambda, .. }
            | NamedFamily::Weibull { lambda, .. }
            | NamedFamily::StretchedExponential { lambda, .. } => lambda,
            // Beta and Student carry their exponents inside the scale.
            NamedFamily::Beta { .. } | NamedFamily::StudentGeneralized { .. } => 1.0,
        }
    }

    /// Builds the normalized distribution for this family.
    pub fn build(&self) -> Result<Distribution> {
        self.validate()?;
        let scale = self.scale()?;
        let domain = *scale.domain();
        Distribution::new(scale, self.lambda(), self.measure(), domain, QuadratureConfig::tight())
    }

    /// The closed-form normalization constant, for cross-checking the
    /// quadrature-normalized build.
    pub fn closed_form_k(&self) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            NamedFamily::Exponential { lambda } => lambda,
            NamedFamily::Gaussian { lambda } => (lambda / PI).sqrt(),
            NamedFamily::Gamma { alpha, lambda } => {
                let shape = alpha * lambda + 1.0;
                ((shape) * lambda.ln() - ln_gamma(shape)).exp()
            }
            NamedFamily::Beta { alpha, beta } => (-ln_beta(alpha, beta)).exp(),
            NamedFamily::Lomax { alpha, beta, lambda } => beta * (lambda * alpha - 1.0),
            NamedFamily::StudentGeneralized { beta, gamma_exp } => {
                (beta / PI).sqrt() * (ln_gamma(gamma_exp) - ln_gamma(gamma_exp - 0.5)).exp()
            }
            NamedFamily::Gumbel { lambda, .. }
            | NamedFamily::Frechet { lambda, .. }
            | NamedFamily::Weibull { lambda, .. } => lambda,
            NamedFamily::StretchedExponential { beta, lambda } => {
                (lambda.ln() / beta - ln_gamma(1.0 + 1.0 / beta)).exp()
            }
        })
    }
}

/// Textbook density at z, written independently of the scale machinery
/// (log-space with the Lanczos log-Γ where a Γ or Β constant is needed).
pub fn closed_form_pdf(family: &NamedFamily, z: f64) -> Result<f64> {
    family.validate()?;
    let out = match *family {
        NamedFamily::Exponential { lambda } => {
            if z <= 0.0 {
                return Err(Error::domain(z, "exponential"));
            }
            lambda * (-lambda * z).exp()
        }
        NamedFamily::Gaussian { lambda } => {
            // Variance form: σ² = 1/(2λ).
            let sigma2 = 1.0 / (2.0 * lambda);
            (-z * z / (2.0 * sigma2)).exp() / (2.0 * PI * sigma2).sqrt()
        }
        NamedFamily::Gamma { alpha, lambda } => {
            if z <= 0.0 {
                return Err(Error::domain(z, "gamma"));
            }
            let shape = alpha * lambda + 1.0;
            (shape * lambda.ln() + (shape - 1.0) * z.ln() - lambda * z - ln_gamma(shape)).exp()
        }
        NamedFamily::Beta { alpha, beta } => {
            if z <= 0.0 || z >= 1.0 {
                return Err(Error::domain(z, "beta"));
            }
            ((alpha - 1.0) * z.ln() + (beta - 1.0) * (-z).ln_1p() - ln_beta(alpha, beta)).exp()
        }
        NamedFamily::Lomax { alpha, beta, lambda } => {
            if z <= 0.0 {
                return Err(Error::domain(z, "lomax"));
            }
            let gamma = lambda * alpha;
            beta * (gamma - 1.0) * (-gamma * (beta * z).ln_1p()).exp()
        }
        NamedFamily::StudentGeneralized { beta, gamma_exp } => {
            let norm =
                (beta / PI).sqrt() * (ln_gamma(gamma_exp) - ln_gamma(gamma_exp - 0.5)).exp();
            norm * (-gamma_exp * (beta * z * z).ln_1p()).exp()
        }
        NamedFamily::Gumbel { beta, lambda } => {
            let t = (beta * z).exp();
            lambda * beta * t * (-lambda * t).exp()
        }
        NamedFamily::Frechet { beta, lambda } | NamedFamily::Weibull { beta, lambda } => {
            if z <= 0.0 {
                return Err(Error::domain(z, "extreme value"));
            }
            let t = (beta * z.ln()).exp();
            lambda * beta.abs() * t / z * (-lambda * t).exp()
        }
        NamedFamily::StretchedExponential { beta, lambda } => {
            if z <= 0.0 {
                return Err(Error::domain(z, "stretched exponential"));
            }
            let norm = (lambda.ln() / beta - ln_gamma(1.0 + 1.0 / beta)).exp();
            norm * (-lambda * (beta * z.ln()).exp()).exp()
        }
    };
    Ok(out)
}

/// Max absolute difference between the built density and the closed form
/// over the grid. Exceeding tol is an error carrying the measured value.
pub fn cross_check(family: &NamedFamily, grid: &[f64], tol: f64) -> Result<f64> {
    let d = family.build()?;
    let mut max_err = 0.0f64;
    for &z in grid {
        let built = d.pdf(z)?;
        let oracle = closed_form_pdf(family, z)?;
        max_err = max_err.max((built - oracle).abs());
    }
    if max_err > tol {
        return Err(Error::NonConverged(format!(
            "{} cross-check error {max_err:.3e} exceeds {tol:.3e}",
            family.tag()
        )));
    }
    Ok(max_err)
}

/// Mode of the beta family: (α−1)/(α+β−2) clamped to [0,1], with the edge
/// conventions: α=β is 1/2 by symmetry (uniform included), 0<α<1 pins the
/// extremum to 0, and α+β=2 with α≠1 has no defined mode.
pub fn beta_mode(alpha: f64, beta: f64) -> Result<f64> {
    positive("alpha", alpha)?;
    positive("beta", beta)?;
    if alpha == beta {
        return Ok(0.5);
    }
    if alpha < 1.0 {
        return Ok(0.0);
    }
    if alpha + beta == 2.0 {
        return Err(Error::Param(format!(
            "beta mode is undefined at alpha + beta = 2 (alpha = {alpha}, beta = {beta})"
        )));
    }
    Ok(((alpha - 1.0) / (alpha + beta - 2.0)).clamp(0.0, 1.0))
}

/// The versioned reference parameter table: three parameter sets per
/// family, used by the acceptance checks.
pub fn reference_families() -> Vec<NamedFamily> {
    vec![
        NamedFamily::Exponential { lambda: 0.5 },
        NamedFamily::Exponential { lambda: 1.0 },
        NamedFamily::Exponential { lambda: 3.0 },
        // σ² ∈ {0.5, 1, 2}
        NamedFamily::Gaussian { lambda: 1.0 },
        NamedFamily::Gaussian { lambda: 0.5 },
        NamedFamily::Gaussian { lambda: 0.25 },
        NamedFamily::Gamma { alpha: 1.0, lambda: 1.0 },
        NamedFamily::Gamma { alpha: 2.0, lambda: 1.0 },
        NamedFamily::Gamma { alpha: 0.5, lambda: 2.0 },
        NamedFamily::Beta { alpha: 2.0, beta: 2.0 },
        NamedFamily::Beta { alpha: 3.0, beta: 2.0 },
        NamedFamily::Beta { alpha: 5.0, beta: 1.5 },
        NamedFamily::Lomax { alpha: 2.0, beta: 1.0, lambda: 1.0 },
        NamedFamily::Lomax { alpha: 3.0, beta: 2.0, lambda: 1.0 },
        NamedFamily::Lomax { alpha: 1.5, beta: 0.5, lambda: 2.0 },
        NamedFamily::StudentGeneralized { beta: 1.0, gamma_exp: 2.0 },
        NamedFamily::StudentGeneralized { beta: 2.0, gamma_exp: 1.0 },
        NamedFamily::StudentGeneralized { beta: 0.5, gamma_exp: 3.0 },
        NamedFamily::Gumbel { beta: 1.0, lambda: 1.0 },
        NamedFamily::Gumbel { beta: 2.0, lambda: 1.0 },
        NamedFamily::Gumbel { beta: 1.0, lambda: 0.5 },
        NamedFamily::Frechet { beta: -1.0, lambda: 1.0 },
        NamedFamily::Frechet { beta: -2.0, lambda: 1.0 },
        NamedFamily::Frechet { beta: -1.5, lambda: 2.0 },
        NamedFamily::Weibull { beta: 1.0, lambda: 1.0 },
        NamedFamily::Weibull { beta: 2.0, lambda: 1.0 },
        NamedFamily::Weibull { beta: 1.5, lambda: 2.0 },
        NamedFamily::StretchedExponential { beta: 1.0, lambda: 1.0 },
        NamedFamily::StretchedExponential { beta: 2.0, lambda: 1.0 },
        NamedFamily::StretchedExponential { beta: 0.5, lambda: 1.0 },
    ]
}

/// Wire form of a family: {"family": tag, "params": {name: value}}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FamilySpec {
    pub family: String,
    pub params: BTreeMap<String, f64>,
}

impl FamilySpec {
    pub fn to_family(&self) -> Result<NamedFamily> {
        NamedFamily::from_params(&self.family, &self.params)
    }

    pub fn of_family(f: &NamedFamily) -> Self {
        FamilySpec {
            family: f.tag().to_string(),
            params: f.params().iter().map(|&(k, v)| (k.to_string(), v)).collect(),
        }
    }
}

/// One `catalog list` row.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CatalogEntry {
    pub family: String,
    pub params_schema: Vec<String>,
    pub scale_kind: String,
    pub measure: MeasureKind,
    pub domain: [Endpoint; 2],
}

/// The rows of `catalog list`, one per family tag.
pub fn catalog_entries() -> Vec<CatalogEntry> {
    FAMILY_TAGS
        .iter()
        .map(|&tag| {
            // A representative member, for the scale kind and domain.
            let rep = match tag {
                "exponential" => NamedFamily::Exponential { lambda: 1.0 },
                "gaussian" => NamedFamily::Gaussian { lambda: 1.0 },
                "gamma" => NamedFamily::Gamma { alpha: 1.0, lambda: 1.0 },
                "beta" => NamedFamily::Beta { alpha: 2.0, beta: 2.0 },
                "lomax" => NamedFamily::Lomax { alpha: 2.0, beta: 1.0, lambda: 1.0 },
                "student_generalized" => {
                    NamedFamily::StudentGeneralized { beta: 1.0, gamma_exp: 2.0 }
                }
                "gumbel" => NamedFamily::Gumbel { beta: 1.0, lambda: 1.0 },
                "frechet" => NamedFamily::Frechet { beta: -1.0, lambda: 1.0 },
                "weibull" => NamedFamily::Weibull { beta: 1.0, lambda: 1.0 },
                _ => NamedFamily::StretchedExponential { beta: 1.0, lambda: 1.0 },
            };
            let scale = rep.scale().expect("representative member is valid");
            let kind = if rep.exp_rate() != 0.0 {
                format!("exp({})", scale.base().kind_name())
            } else {
                scale.base().kind_name().to_string()
            };
            CatalogEntry {
                family: tag.to_string(),
                params_schema: NamedFamily::param_names(tag)
                    .expect("tag is known")
                    .iter()
                    .map(|s| s.to_string())
                    .collect(),
                scale_kind: kind,
                measure: rep.measure(),
                domain: [Endpoint(scale.domain().lo()), Endpoint(scale.domain().hi())],
            }
        })
        .collect()
}

impl NamedFamily {
    fn exp_rate(&self) -> f64 {
        match *self {
            NamedFamily::Gumbel { beta, .. }
            | NamedFamily::Frechet { beta, .. }
            | NamedFamily::Weibull { beta, .. }
            | NamedFamily::StretchedExponential { beta, .. } => beta,
            _ => 0.0,
        }
    }
}
