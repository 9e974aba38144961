//! Base scales w(z), canonical scales T(z), and variable generators.
//!
//! A base scale is a declared measurement function with an analytic
//! derivative and an open domain. A canonical scale optionally lifts the
//! base through `T(z) = exp(exp_rate * w(z))`, turning shift invariance of
//! `w` into stretch invariance of `T`. Generators are the bijections the
//! invariance checks push scales through.

use serde::de::Error as DeError;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::grid;

/// Largest x for which exp(x) is finite in f64.
const EXP_OVERFLOW: f64 = 709.78;

// ---------------------------------------------------------------------------
// Interval
// ---------------------------------------------------------------------------

/// Open interval (lo, hi); endpoints may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    lo: f64,
    hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Param(format!("invalid interval ({lo}, {hi})")));
        }
        Ok(Interval { lo, hi })
    }

    pub const REAL_LINE: Interval = Interval { lo: f64::NEG_INFINITY, hi: f64::INFINITY };
    pub const POSITIVE: Interval = Interval { lo: 0.0, hi: f64::INFINITY };
    pub const UNIT: Interval = Interval { lo: 0.0, hi: 1.0 };

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    /// Strict interior membership; the interval is open.
    pub fn contains(&self, z: f64) -> bool {
        z > self.lo && z < self.hi && z.is_finite()
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        self.lo >= other.lo && self.hi <= other.hi
    }

    pub fn intersect(&self, other: &Interval) -> Result<Interval> {
        Interval::new(self.lo.max(other.lo), self.hi.min(other.hi))
    }

    pub fn is_finite(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }
}

// ---------------------------------------------------------------------------
// BaseScale
// ---------------------------------------------------------------------------

/// The measurement function kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum ScaleKind {
    /// w(z) = z
    Linear,
    /// w(z) = log z
    Log,
    /// w(z) = z − alpha·log z (gamma-type scale)
    LogLinear { alpha: f64 },
    /// w(z) = alpha·log(1 + beta·z), beta > 0 (Lomax-type scale)
    LinearLog { alpha: f64, beta: f64 },
    /// Beta-type scale on (0,1), stored in raw-sum parameters:
    /// w(z) = −[(alpha−1)·log z + (beta−1)·log(1−z)].
    /// The sign makes w smallest at the density mode; the rate pairing is
    /// chosen by the distribution that consumes the scale.
    LogLinearLog { alpha: f64, beta: f64 },
    /// w(z) = z²
    Square,
    /// outer ∘ inner with chain-rule derivative
    Composite { outer: Box<BaseScale>, inner: Box<BaseScale> },
}

impl ScaleKind {
    fn name(&self) -> &'static str {
        match self {
            ScaleKind::Linear => "linear",
            ScaleKind::Log => "log",
            ScaleKind::LogLinear { .. } => "log_linear",
            ScaleKind::LinearLog { .. } => "linear_log",
            ScaleKind::LogLinearLog { .. } => "log_linear_log",
            ScaleKind::Square => "square",
            ScaleKind::Composite { .. } => "composite",
        }
    }
}

/// A base scale: kind plus the open interval it is evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseScale {
    kind: ScaleKind,
    domain: Interval,
}

fn require_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Param(format!("{name} must be finite, got {x}")))
    }
}

impl BaseScale {
    pub fn linear() -> Self {
        BaseScale { kind: ScaleKind::Linear, domain: Interval::REAL_LINE }
    }

    pub fn log() -> Self {
        BaseScale { kind: ScaleKind::Log, domain: Interval::POSITIVE }
    }

    pub fn log_linear(alpha: f64) -> Result<Self> {
        require_finite("alpha", alpha)?;
        Ok(BaseScale { kind: ScaleKind::LogLinear { alpha }, domain: Interval::POSITIVE })
    }

    pub fn linear_log(alpha: f64, beta: f64) -> Result<Self> {
        require_finite("alpha", alpha)?;
        require_finite("beta", beta)?;
        if beta <= 0.0 {
            return Err(Error::Param(format!("linear_log needs beta > 0, got {beta}")));
        }
        Ok(BaseScale {
            kind: ScaleKind::LinearLog { alpha, beta },
            domain: Interval::new(-1.0 / beta, f64::INFINITY)?,
        })
    }

    pub fn log_linear_log(alpha: f64, beta: f64) -> Result<Self> {
        require_finite("alpha", alpha)?;
        require_finite("beta", beta)?;
        Ok(BaseScale { kind: ScaleKind::LogLinearLog { alpha, beta }, domain: Interval::UNIT })
    }

    pub fn square() -> Self {
        BaseScale { kind: ScaleKind::Square, domain: Interval::REAL_LINE }
    }

    /// Restricts the scale to a sub-interval of its natural domain.
    pub fn with_domain(mut self, lo: f64, hi: f64) -> Result<Self> {
        let wanted = Interval::new(lo, hi)?;
        if !wanted.is_subset_of(&self.domain) {
            return Err(Error::Param(format!(
                "domain ({lo}, {hi}) is not inside the natural domain ({}, {})",
                self.domain.lo(),
                self.domain.hi()
            )));
        }
        self.domain = wanted;
        Ok(self)
    }

    pub fn kind(&self) -> &ScaleKind {
        &self.kind
    }

    pub fn kind_name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn domain(&self) -> &Interval {
        &self.domain
    }

    fn check_domain(&self, z: f64) -> Result<()> {
        if self.domain.contains(z) {
            Ok(())
        } else {
            Err(Error::domain(z, format!("{} scale", self.kind.name())))
        }
    }

    /// w(z).
    pub fn eval(&self, z: f64) -> Result<f64> {
        self.check_domain(z)?;
        let w = self.eval_unchecked(z)?;
        if w.is_finite() {
            Ok(w)
        } else {
            Err(Error::non_finite(z, format!("{} scale", self.kind.name())))
        }
    }

    fn eval_unchecked(&self, z: f64) -> Result<f64> {
        Ok(match &self.kind {
            ScaleKind::Linear => z,
            ScaleKind::Log => z.ln(),
            ScaleKind::LogLinear { alpha } => z - alpha * z.ln(),
            ScaleKind::LinearLog { alpha, beta } => alpha * (beta * z).ln_1p(),
            ScaleKind::LogLinearLog { alpha, beta } => {
                -((alpha - 1.0) * z.ln() + (beta - 1.0) * (-z).ln_1p())
            }
            ScaleKind::Square => z * z,
            ScaleKind::Composite { outer, inner } => outer.eval(inner.eval(z)?)?,
        })
    }

    /// |dw/dz|, analytic.
    pub fn deriv_abs(&self, z: f64) -> Result<f64> {
        Ok(self.deriv_signed(z)?.abs())
    }

    /// dw/dz with its sign, for minimum finding.
    pub fn deriv_signed(&self, z: f64) -> Result<f64> {
        self.check_domain(z)?;
        Ok(match &self.kind {
            ScaleKind::Linear => 1.0,
            ScaleKind::Log => 1.0 / z,
            ScaleKind::LogLinear { alpha } => 1.0 - alpha / z,
            ScaleKind::LinearLog { alpha, beta } => alpha * beta / (1.0 + beta * z),
            ScaleKind::LogLinearLog { alpha, beta } => {
                (1.0 - alpha) / z + (beta - 1.0) / (1.0 - z)
            }
            ScaleKind::Square => 2.0 * z,
            ScaleKind::Composite { outer, inner } => {
                outer.deriv_signed(inner.eval(z)?)? * inner.deriv_signed(z)?
            }
        })
    }
}

/// Composes `outer ∘ inner`, validating on a probe grid that the image of
/// `inner` lands inside `outer`'s domain.
pub fn compose_scales(outer: BaseScale, inner: BaseScale) -> Result<BaseScale> {
    // Identity composition: unrestricted linear outer changes nothing.
    if outer == BaseScale::linear() {
        return Ok(inner);
    }
    let domain = *inner.domain();
    for z in grid::probe_grid(&domain, 64) {
        let w = inner.eval(z)?;
        if !outer.domain().contains(w) {
            return Err(Error::DomainMismatch(format!(
                "inner image {w} at z = {z} falls outside the outer domain ({}, {})",
                outer.domain().lo(),
                outer.domain().hi()
            )));
        }
    }
    Ok(BaseScale {
        kind: ScaleKind::Composite { outer: Box::new(outer), inner: Box::new(inner) },
        domain,
    })
}

// ---------------------------------------------------------------------------
// CanonicalScale
// ---------------------------------------------------------------------------

/// Base scale plus exponential lift: T(z) = w(z) when `exp_rate` is zero,
/// otherwise T(z) = exp(exp_rate · w(z)).
///
/// `exp_rate` may be negative (T = z^beta with beta < 0 is the Fréchet
/// scale); zero always means the identity limit.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalScale {
    base: BaseScale,
    exp_rate: f64,
}

impl CanonicalScale {
    pub fn new(base: BaseScale, exp_rate: f64) -> Result<Self> {
        require_finite("exp_rate", exp_rate)?;
        Ok(CanonicalScale { base, exp_rate })
    }

    pub fn identity(base: BaseScale) -> Self {
        CanonicalScale { base, exp_rate: 0.0 }
    }

    pub fn base(&self) -> &BaseScale {
        &self.base
    }

    pub fn exp_rate(&self) -> f64 {
        self.exp_rate
    }

    pub fn domain(&self) -> &Interval {
        self.base.domain()
    }

    pub fn with_domain(self, lo: f64, hi: f64) -> Result<Self> {
        Ok(CanonicalScale { base: self.base.with_domain(lo, hi)?, exp_rate: self.exp_rate })
    }

    /// T(z). Errors with NonFinite when exp overflows the double range.
    pub fn eval(&self, z: f64) -> Result<f64> {
        let t = self.eval_saturating(z)?;
        if t.is_finite() {
            Ok(t)
        } else {
            Err(Error::non_finite(z, "canonical scale exp overflow"))
        }
    }

    /// T(z) with overflow saturated to +inf instead of an error. Density
    /// evaluation wants the saturating form: e^{-lambda*inf} is a clean zero.
    pub(crate) fn eval_saturating(&self, z: f64) -> Result<f64> {
        let w = self.base.eval(z)?;
        if self.exp_rate == 0.0 {
            return Ok(w);
        }
        let x = self.exp_rate * w;
        if x > EXP_OVERFLOW {
            Ok(f64::INFINITY)
        } else {
            Ok(x.exp())
        }
    }

    /// |dT/dz| by the chain rule.
    pub fn deriv_abs(&self, z: f64) -> Result<f64> {
        let d = self.deriv_signed_saturating(z)?;
        if d.is_finite() {
            Ok(d.abs())
        } else {
            Err(Error::non_finite(z, "canonical scale derivative overflow"))
        }
    }

    /// dT/dz with its sign, for minimum finding.
    pub fn deriv_signed(&self, z: f64) -> Result<f64> {
        let d = self.deriv_signed_saturating(z)?;
        if d.is_finite() {
            Ok(d)
        } else {
            Err(Error::non_finite(z, "canonical scale derivative overflow"))
        }
    }

    pub(crate) fn deriv_signed_saturating(&self, z: f64) -> Result<f64> {
        let dw = self.base.deriv_signed(z)?;
        if self.exp_rate == 0.0 {
            return Ok(dw);
        }
        let x = self.exp_rate * self.base.eval(z)?;
        if x > EXP_OVERFLOW {
            Ok(f64::INFINITY * (self.exp_rate * dw).signum())
        } else {
            Ok(self.exp_rate * dw * x.exp())
        }
    }

    /// ln |dT/dz| computed without forming e^{exp_rate·w} (stable for large
    /// exponents). Returns -inf where the derivative vanishes.
    pub(crate) fn log_deriv_abs(&self, z: f64) -> Result<f64> {
        let dw = self.base.deriv_signed(z)?;
        if self.exp_rate == 0.0 {
            return Ok(dw.abs().ln());
        }
        let x = self.exp_rate * self.base.eval(z)?;
        Ok((self.exp_rate * dw).abs().ln() + x)
    }
}

// ---------------------------------------------------------------------------
// Generator
// ---------------------------------------------------------------------------

/// A bijective transformation of the underlying variable (or of the
/// variable-angle pair for rotations).
#[derive(Debug, Clone, PartialEq)]
pub enum Generator {
    /// z ↦ a + z
    Shift { a: f64 },
    /// z ↦ b·z, b > 0
    Stretch { b: f64 },
    /// z ↦ ((1 + beta·z)^alpha − 1)/beta on (−1/beta, ∞)
    PowerLinear { alpha: f64, beta: f64 },
    /// (z, theta) ↦ (z, theta + epsilon); leaves z itself fixed
    Rotation { epsilon: f64 },
    /// Tabulated strictly monotone map, linearly interpolated between knots.
    Custom { xs: Vec<f64>, ys: Vec<f64> },
}

impl Generator {
    pub fn shift(a: f64) -> Result<Self> {
        require_finite("a", a)?;
        Ok(Generator::Shift { a })
    }

    pub fn stretch(b: f64) -> Result<Self> {
        require_finite("b", b)?;
        if b <= 0.0 {
            return Err(Error::Param(format!("stretch needs b > 0, got {b}")));
        }
        Ok(Generator::Stretch { b })
    }

    pub fn power_linear(alpha: f64, beta: f64) -> Result<Self> {
        require_finite("alpha", alpha)?;
        require_finite("beta", beta)?;
        if beta <= 0.0 {
            return Err(Error::Param(format!("power_linear needs beta > 0, got {beta}")));
        }
        if alpha <= 0.0 {
            return Err(Error::Param(format!("power_linear needs alpha > 0, got {alpha}")));
        }
        Ok(Generator::PowerLinear { alpha, beta })
    }

    pub fn rotation(epsilon: f64) -> Result<Self> {
        require_finite("epsilon", epsilon)?;
        Ok(Generator::Rotation { epsilon })
    }

    /// Tabulated map; `xs` strictly increasing, `ys` strictly monotone.
    pub fn custom(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::DegenerateInput(format!(
                "custom generator table lengths differ: {} vs {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::DegenerateInput("custom generator needs at least 2 knots".into()));
        }
        if !xs.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Param("custom generator xs must be strictly increasing".into()));
        }
        let increasing = ys.windows(2).all(|w| w[0] < w[1]);
        let decreasing = ys.windows(2).all(|w| w[0] > w[1]);
        if !increasing && !decreasing {
            return Err(Error::Param(
                "custom generator ys must be strictly monotone (bijection)".into(),
            ));
        }
        Ok(Generator::Custom { xs, ys })
    }

    /// The z-interval the generator accepts.
    pub fn domain(&self) -> Interval {
        match self {
            Generator::Shift { .. } | Generator::Stretch { .. } | Generator::Rotation { .. } => {
                Interval::REAL_LINE
            }
            Generator::PowerLinear { beta, .. } => {
                Interval::new(-1.0 / beta, f64::INFINITY).expect("beta > 0")
            }
            // Closed at the knots: widen by nothing, accept endpoints.
            Generator::Custom { xs, .. } => {
                Interval { lo: xs[0] - f64::EPSILON * xs[0].abs().max(1.0), hi: xs[xs.len() - 1] }
            }
        }
    }

    /// G(z). Rotation acts on the pair, so on a bare z it is the identity;
    /// use `apply_pair` to advance the angle.
    pub fn apply(&self, z: f64) -> Result<f64> {
        match self {
            Generator::Shift { a } => Ok(a + z),
            Generator::Stretch { b } => Ok(b * z),
            Generator::PowerLinear { alpha, beta } => {
                if z <= -1.0 / beta {
                    return Err(Error::domain(z, "power_linear generator"));
                }
                Ok(((1.0 + beta * z).powf(*alpha) - 1.0) / beta)
            }
            Generator::Rotation { .. } => Ok(z),
            Generator::Custom { xs, ys } => {
                let n = xs.len();
                if z < xs[0] || z > xs[n - 1] {
                    return Err(Error::domain(z, "custom generator table"));
                }
                let idx = match xs.binary_search_by(|x| x.partial_cmp(&z).unwrap()) {
                    Ok(i) => return Ok(ys[i]),
                    Err(i) => i,
                };
                let (x0, x1) = (xs[idx - 1], xs[idx]);
                let (y0, y1) = (ys[idx - 1], ys[idx]);
                Ok(y0 + (z - x0) / (x1 - x0) * (y1 - y0))
            }
        }
    }

    /// G applied to a (z, theta) pair.
    pub fn apply_pair(&self, z: f64, theta: f64) -> Result<(f64, f64)> {
        match self {
            Generator::Rotation { epsilon } => Ok((z, theta + epsilon)),
            _ => Ok((self.apply(z)?, theta)),
        }
    }
}

// ---------------------------------------------------------------------------
// Wire format
// ---------------------------------------------------------------------------

/// Domain endpoint that serializes infinities as "inf" / "-inf".
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Endpoint(pub f64);

impl Serialize for Endpoint {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.0 == f64::INFINITY {
            s.serialize_str("inf")
        } else if self.0 == f64::NEG_INFINITY {
            s.serialize_str("-inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(x) => Ok(Endpoint(x)),
            Raw::Tag(t) => match t.as_str() {
                "inf" | "+inf" => Ok(Endpoint(f64::INFINITY)),
                "-inf" => Ok(Endpoint(f64::NEG_INFINITY)),
                other => Err(D::Error::custom(format!("bad endpoint {other:?}"))),
            },
        }
    }
}

/// JSON form of a scale: `{kind, alpha, beta, exp_rate, inner, domain}`.
/// `exp_rate` defaults to 0, `domain` to the kind's natural domain.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ScaleSpec {
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exp_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner: Option<Box<ScaleSpec>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub domain: Option<[Endpoint; 2]>,
}

impl ScaleSpec {
    /// The scale described by this node's own kind/alpha/beta, ignoring
    /// `inner` and `domain`.
    fn node_base(&self) -> Result<BaseScale> {
        let need = |name: &str, v: Option<f64>| -> Result<f64> {
            v.ok_or_else(|| Error::Config(format!("scale kind {:?} needs {name}", self.kind)))
        };
        match self.kind.as_str() {
            "linear" => Ok(BaseScale::linear()),
            "log" => Ok(BaseScale::log()),
            "square" => Ok(BaseScale::square()),
            "log_linear" => BaseScale::log_linear(need("alpha", self.alpha)?),
            "linear_log" => {
                BaseScale::linear_log(need("alpha", self.alpha)?, need("beta", self.beta)?)
            }
            "log_linear_log" => {
                BaseScale::log_linear_log(need("alpha", self.alpha)?, need("beta", self.beta)?)
            }
            other => Err(Error::Config(format!("unknown scale kind {other:?}"))),
        }
    }

    pub fn to_base(&self) -> Result<BaseScale> {
        // Presence of `inner` marks composition; this node's kind and
        // parameters then describe the outer scale.
        let mut base = match &self.inner {
            Some(inner) => compose_scales(self.node_base()?, inner.to_base()?)?,
            None => self.node_base()?,
        };
        if let Some([lo, hi]) = self.domain {
            base = base.with_domain(lo.0, hi.0)?;
        }
        Ok(base)
    }

    pub fn to_canonical(&self) -> Result<CanonicalScale> {
        CanonicalScale::new(self.to_base()?, self.exp_rate.unwrap_or(0.0))
    }

    pub fn from_canonical(cs: &CanonicalScale) -> Self {
        let mut spec = Self::from_base(cs.base());
        if cs.exp_rate() != 0.0 {
            spec.exp_rate = Some(cs.exp_rate());
        }
        spec
    }

    pub fn from_base(b: &BaseScale) -> Self {
        let (kind, alpha, beta, inner) = match b.kind() {
            ScaleKind::Linear => ("linear".to_string(), None, None, None),
            ScaleKind::Log => ("log".to_string(), None, None, None),
            ScaleKind::Square => ("square".to_string(), None, None, None),
            ScaleKind::LogLinear { alpha } => ("log_linear".to_string(), Some(*alpha), None, None),
            ScaleKind::LinearLog { alpha, beta } => {
                ("linear_log".to_string(), Some(*alpha), Some(*beta), None)
            }
            ScaleKind::LogLinearLog { alpha, beta } => {
                ("log_linear_log".to_string(), Some(*alpha), Some(*beta), None)
            }
            ScaleKind::Composite { outer, inner } => {
                let outer_spec = Self::from_base(outer);
                (
                    outer_spec.kind,
                    outer_spec.alpha,
                    outer_spec.beta,
                    Some(Box::new(Self::from_base(inner))),
                )
            }
        };
        ScaleSpec {
            kind,
            alpha,
            beta,
            exp_rate: None,
            inner,
            domain: Some([Endpoint(b.domain().lo()), Endpoint(b.domain().hi())]),
        }
    }
}

// ---------------------------------------------------------------------------
