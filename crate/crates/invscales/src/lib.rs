//! Probability distributions built from invariances of a canonical
//! measurement scale.
//!
//! The core objects: a base scale `w(z)`, its exponential lift
//! `T(z) = exp(exp_rate * w(z))`, and densities `q = k * exp(-lambda * T(z))`
//! read in the z, T, or R chart. Everything else (the named catalog,
//! invariance checks, fitting, the CLI) is built on those.

pub mod catalog;
pub mod cli;
pub mod dist;
pub mod error;
pub mod fit;
pub mod grid;
pub mod invariance;
pub mod quad;
pub mod radial;
pub mod rng;
pub mod scale;
pub mod special;
pub mod sum;

pub use catalog::{
    beta_mode, catalog_entries, closed_form_pdf, cross_check, reference_families, CatalogEntry,
    FamilySpec, NamedFamily,
};
pub use dist::{normalize, solve_lambda, DistSpec, Distribution, MeasureKind};
pub use error::{Error, Result};
pub use fit::{
    log_likelihood, mle_fit, parse_data, read_data_file, sufficient_stats_gamma, FitResult,
};
pub use invariance::{
    check_affine_similarity, check_asymptotic_invariance, check_shift_invariance,
    check_stretch_invariance, fit_affine, iterate_generator, InvarianceReport,
};
pub use quad::QuadratureConfig;
pub use radial::{find_scale_minimum, parametric_curves, RadialChart};
pub use scale::{BaseScale, CanonicalScale, Generator, Interval, ScaleSpec};
