//! Maximum-likelihood fitting of catalog families by derivative-free
//! simplex search.
//!
//! Normalization constants come from quadrature, so analytic gradients are
//! unavailable in general; Nelder-Mead needs only objective values. Each
//! candidate parameter point rebuilds (renormalizes) the family once, with
//! the result cached by the parameter bit pattern. Feasibility is a box
//! clip on every simplex move plus a −∞ penalty for anything the clip
//! cannot express (joint constraints, build failures).

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::catalog::NamedFamily;
use crate::dist::Distribution;
use crate::error::{Error, Result};
use crate::sum::neumaier_sum;

/// Relative simplex diameter below which the search is converged.
pub const SIMPLEX_TOL: f64 = 1e-6;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitResult {
    pub family: String,
    pub params: BTreeMap<String, f64>,
    pub log_likelihood: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Per-parameter feasible box, aligned with the family's parameter order.
/// Joint constraints (the Lomax tail exponent, for one) stay with the
/// penalty.
fn param_box(tag: &str) -> Result<Vec<(f64, f64)>> {
    const POS: (f64, f64) = (1e-12, 1e12);
    Ok(match tag {
        "exponential" | "gaussian" => vec![POS],
        "gamma" => vec![(0.0, 1e12), POS],
        "beta" => vec![POS, (1.0 + 1e-9, 1e12)],
        "lomax" => vec![POS, POS, POS],
        "student_generalized" => vec![POS, (0.5 + 1e-9, 1e12)],
        "gumbel" | "weibull" | "stretched_exponential" => vec![POS, POS],
        "frechet" => vec![(-1e12, -1e-12), POS],
        other => return Err(Error::Param(format!("unknown family '{other}'"))),
    })
}

fn clip(theta: &mut [f64], boxes: &[(f64, f64)]) {
    for (v, &(lo, hi)) in theta.iter_mut().zip(boxes) {
        *v = v.clamp(lo, hi);
    }
}

/// Log-likelihood of `theta` (in the family's parameter order) on the
/// sorted data, or −∞ where the point is infeasible.
struct Objective<'a> {
    tag: &'a str,
    names: &'static [&'static str],
    data: &'a [f64],
    cache: HashMap<Vec<u64>, f64>,
    evals: usize,
}

impl<'a> Objective<'a> {
    fn eval(&mut self, theta: &[f64]) -> f64 {
        let key: Vec<u64> = theta.iter().map(|v| v.to_bits()).collect();
        if let Some(&ll) = self.cache.get(&key) {
            return ll;
        }
        self.evals += 1;
        let ll = self.eval_uncached(theta);
        self.cache.insert(key, ll);
        ll
    }

    fn eval_uncached(&self, theta: &[f64]) -> f64 {
        let params: BTreeMap<String, f64> =
            self.names.iter().zip(theta).map(|(&n, &v)| (n.to_string(), v)).collect();
        let family = match NamedFamily::from_params(self.tag, &params) {
            Ok(f) => f,
            Err(_) => return f64::NEG_INFINITY,
        };
        let d = match family.build() {
            Ok(d) => d,
            Err(_) => return f64::NEG_INFINITY,
        };
        log_likelihood(&d, self.data).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Σ log pdf(zᵢ), compensated. Any point outside the domain is an error;
/// a zero-density point makes the sum −∞.
pub fn log_likelihood(d: &Distribution, data: &[f64]) -> Result<f64> {
    let mut terms = Vec::with_capacity(data.len());
    for &z in data {
        let lp = d.log_pdf(z)?;
        if lp == f64::NEG_INFINITY {
            return Ok(f64::NEG_INFINITY);
        }
        terms.push(lp);
    }
    Ok(neumaier_sum(terms))
}

/// Maximizes Σ log_pdf(family(θ), zᵢ) over θ from `init`. The data order
/// never matters: a sorted copy drives every evaluation, so permutations
/// produce bit-identical results. Stopping at `max_iter` before
/// convergence returns the best point inside the error.
pub fn mle_fit(
    family_tag: &str,
    data: &[f64],
    init: &BTreeMap<String, f64>,
    max_iter: usize,
) -> Result<FitResult> {
    let names = NamedFamily::param_names(family_tag)?;
    let boxes = param_box(family_tag)?;
    if data.is_empty() {
        return Err(Error::InfeasibleInit("empty data".to_string()));
    }

    let init_family = NamedFamily::from_params(family_tag, init)
        .map_err(|e| Error::InfeasibleInit(format!("init: {e}")))?;
    let d0 = init_family
        .build()
        .map_err(|e| Error::InfeasibleInit(format!("init does not build: {e}")))?;
    let domain = d0.domain();
    for &z in data {
        if !domain.contains(z) {
            return Err(Error::InfeasibleInit(format!(
                "data point {z} outside the {family_tag} domain ({}, {})",
                domain.lo(),
                domain.hi()
            )));
        }
    }

    // Sorted copy: summation order, and therefore every objective value,
    // is independent of the caller's data order.
    let mut sorted = data.to_vec();
    sorted.sort_by(f64::total_cmp);

    let mut obj = Objective { tag: family_tag, names, data: &sorted, cache: HashMap::new(), evals: 0 };

    let x0: Vec<f64> = names.iter().map(|n| init[*n]).collect();
    let f0 = obj.eval(&x0);
    if !f0.is_finite() {
        return Err(Error::InfeasibleInit(format!(
            "log-likelihood at init is {f0}; the data does not support the initial point"
        )));
    }

    // Initial simplex: 5% perturbation per coordinate (an absolute step
    // where the coordinate is zero), clipped to the box.
    let dim = x0.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(dim + 1);
    simplex.push((x0.clone(), f0));
    for j in 0..dim {
        let mut v = x0.clone();
        let step = if v[j] != 0.0 { 0.05 * v[j].abs() } else { 2.5e-4 };
        v[j] += step;
        clip(&mut v, &boxes);
        if v == x0 {
            v[j] = x0[j] - step;
            clip(&mut v, &boxes);
        }
        let f = obj.eval(&v);
        simplex.push((v, f));
    }

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // Best first (maximization).
        simplex.sort_by(|a, b| f64::total_cmp(&b.1, &a.1));

        let diam = simplex[1..]
            .iter()
            .map(|(v, _)| {
                v.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        let scale = 1.0 + simplex[0].0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if diam < SIMPLEX_TOL * scale {
            converged = true;
            break;
        }
        iterations += 1;

        let worst = simplex[dim].clone();
        let second = simplex[dim - 1].1;
        let best = simplex[0].1;
        let centroid: Vec<f64> = (0..dim)
            .map(|j| simplex[..dim].iter().map(|(v, _)| v[j]).sum::<f64>() / dim as f64)
            .collect();
        let moved = |coef: f64| -> Vec<f64> {
            let mut v: Vec<f64> =
                centroid.iter().zip(&worst.0).map(|(c, w)| c + coef * (c - w)).collect();
            clip(&mut v, &boxes);
            v
        };

        let xr = moved(REFLECT);
        let fr = obj.eval(&xr);
        if fr > best {
            let xe = moved(EXPAND);
            let fe = obj.eval(&xe);
            simplex[dim] = if fe > fr { (xe, fe) } else { (xr, fr) };
            continue;
        }
        if fr > second {
            simplex[dim] = (xr, fr);
            continue;
        }
        // Contract toward the better of worst/reflected.
        let (xc, fc) = if fr > worst.1 {
            let x = moved(CONTRACT);
            let f = obj.eval(&x);
            (x, f)
        } else {
            let x = moved(-CONTRACT);
            let f = obj.eval(&x);
            (x, f)
        };
        if fc > worst.1.max(fr) {
            simplex[dim] = (xc, fc);
            continue;
        }
        // Shrink toward the best vertex.
        let best_v = simplex[0].0.clone();
        for entry in simplex.iter_mut().skip(1) {
            let mut v: Vec<f64> =
                best_v.iter().zip(&entry.0).map(|(b, w)| b + SHRINK * (w - b)).collect();
            clip(&mut v, &boxes);
            let f = obj.eval(&v);
            *entry = (v, f);
        }
    }

    simplex.sort_by(|a, b| f64::total_cmp(&b.1, &a.1));
    let (best_theta, best_ll) = simplex[0].clone();
    let params: BTreeMap<String, f64> =
        names.iter().zip(&best_theta).map(|(&n, &v)| (n.to_string(), v)).collect();

    if !converged {
        return Err(Error::FitNonConverged {
            iterations,
            best_log_likelihood: best_ll,
            best_params: names.iter().zip(&best_theta).map(|(&n, &v)| (n.to_string(), v)).collect(),
        });
    }
    Ok(FitResult {
        family: family_tag.to_string(),
        params,
        log_likelihood: best_ll,
        iterations,
        converged,
    })
}

/// (⟨z⟩, ⟨log z⟩): the arithmetic and (log of the) geometric mean, which
/// together determine the gamma likelihood. Compensated summation.
pub fn sufficient_stats_gamma(data: &[f64]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::DegenerateInput("sufficient stats need nonempty data".to_string()));
    }
    let mut logs = Vec::with_capacity(data.len());
    for &z in data {
        if !(z > 0.0) || !z.is_finite() {
            return Err(Error::domain(z, "sufficient_stats_gamma"));
        }
        logs.push(z.ln());
    }
    let n = data.len() as f64;
    Ok((neumaier_sum(data.iter().copied()) / n, neumaier_sum(logs) / n))
}

/// Data file format: one float per line, or a single-column CSV whose
/// first line (the header) does not parse as a float.
pub fn parse_data(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
    if let Some(first) = lines.next() {
        if let Ok(v) = first.parse::<f64>() {
            out.push(v);
        }
    }
    for line in lines {
        let v = line
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("unparseable data line {line:?}")))?;
        out.push(v);
    }
    Ok(out)
}

pub fn read_data_file(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    parse_data(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::trigamma;
    use std::f64::consts::E;

    fn init_of(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    #[test]
    fn sufficient_stats_reference_values() {
        let (m, g) = sufficient_stats_gamma(&[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m, 1.0);
        assert_eq!(g, 0.0);

        // (1 + e + e²)/3 and (0 + 1 + 2)/3.
        let (m, g) = sufficient_stats_gamma(&[1.0, E, E * E]).unwrap();
        assert!((m - 3.7024459757965650).abs() < 1e-15, "arith {m}");
        assert!((g - 1.0).abs() < 1e-15, "geo {g}");

        assert!(matches!(sufficient_stats_gamma(&[]), Err(Error::DegenerateInput(_))));
        assert!(matches!(sufficient_stats_gamma(&[1.0, -2.0]), Err(Error::Domain { .. })));
        assert!(matches!(sufficient_stats_gamma(&[0.0]), Err(Error::Domain { .. })));
    }

    #[test]
    fn exponential_fit_recovers_rate() {
        let truth = NamedFamily::Exponential { lambda: 2.0 };
        let n = 100_000;
        let data = truth.build().unwrap().sample(n, 7).unwrap();

        let init = init_of(&[("lambda", 1.0)]);
        let fit = mle_fit("exponential", &data, &init, 400).unwrap();
        let lambda_hat = fit.params["lambda"];

        // λ̂ is asymptotically λ ± λ/√n.
        let band = 3.0 * 2.0 / (n as f64).sqrt();
        assert!((lambda_hat - 2.0).abs() < band, "λ̂ = {lambda_hat}, band {band}");
        assert!(fit.converged);
        assert!(fit.log_likelihood.is_finite());

        // The closed-form MLE is 1/mean; the search should land on it.
        let mean = neumaier_sum(data.iter().copied()) / n as f64;
        assert!((lambda_hat - 1.0 / mean).abs() < 1e-5, "{} vs {}", lambda_hat, 1.0 / mean);

        // Improvement over the starting point.
        let d_init = NamedFamily::Exponential { lambda: 1.0 }.build().unwrap();
        let ll_init = log_likelihood(&d_init, &data).unwrap();
        assert!(fit.log_likelihood >= ll_init - 1e-9);
    }

    #[test]
    fn gamma_self_fit_within_three_standard_errors() {
        let (alpha, lambda) = (2.0, 1.0);
        let truth = NamedFamily::Gamma { alpha, lambda };
        let n = 20_000;
        let data = truth.build().unwrap().sample(n, 11).unwrap();

        let init = init_of(&[("alpha", 1.2), ("lambda", 0.7)]);
        let fit = mle_fit("gamma", &data, &init, 600).unwrap();
        let (a_hat, l_hat) = (fit.params["alpha"], fit.params["lambda"]);

        // Fisher information in (shape s, rate r) coordinates, then the
        // delta method through (α, λ) = ((s−1)/r, r).
        let (s, r) = (alpha * lambda + 1.0, lambda);
        let (i11, i12, i22) = (trigamma(s), -1.0 / r, s / (r * r));
        let det = i11 * i22 - i12 * i12;
        let (c11, c12, c22) = (i22 / det, -i12 / det, i11 / det);
        let (j11, j12) = (1.0 / r, -(s - 1.0) / (r * r));
        let var_a = j11 * j11 * c11 + 2.0 * j11 * j12 * c12 + j12 * j12 * c22;
        let var_l = c22;
        let nf = n as f64;
        let (se_a, se_l) = ((var_a / nf).sqrt(), (var_l / nf).sqrt());

        assert!((a_hat - alpha).abs() < 3.0 * se_a, "α̂ = {a_hat}, 3se = {}", 3.0 * se_a);
        assert!((l_hat - lambda).abs() < 3.0 * se_l, "λ̂ = {l_hat}, 3se = {}", 3.0 * se_l);
        assert!(fit.converged);
    }

    #[test]
    fn permutation_of_data_is_bit_identical() {
        let truth = NamedFamily::Gamma { alpha: 1.0, lambda: 2.0 };
        let data = truth.build().unwrap().sample(500, 3).unwrap();
        let mut shuffled = data.clone();
        shuffled.reverse();
        let mid = shuffled.len() / 2;
        shuffled.rotate_left(mid / 3);

        let init = init_of(&[("alpha", 1.0), ("lambda", 1.0)]);
        let a = mle_fit("gamma", &data, &init, 500).unwrap();
        let b = mle_fit("gamma", &shuffled, &init, 500).unwrap();

        assert_eq!(a.iterations, b.iterations);
        assert_eq!(a.log_likelihood.to_bits(), b.log_likelihood.to_bits());
        for (k, v) in &a.params {
            assert_eq!(v.to_bits(), b.params[k].to_bits(), "param {k}");
        }
    }

    #[test]
    fn equal_sufficient_stats_give_equal_gamma_argmax() {
        // Two datasets of different sizes engineered to share
        // (⟨z⟩, ⟨log z⟩) = (2, 1/2): the likelihood differs only by a
        // positive factor, so the argmax must agree.
        let disc = (4.0f64 - E).sqrt();
        let two = vec![2.0 - disc, 2.0 + disc];
        let (sum, prod) = (5.0, E.powf(1.5));
        let d2 = ((sum * sum - 4.0 * prod) as f64).sqrt();
        let three = vec![1.0, (sum - d2) / 2.0, (sum + d2) / 2.0];

        let (m2, g2) = sufficient_stats_gamma(&two).unwrap();
        let (m3, g3) = sufficient_stats_gamma(&three).unwrap();
        assert!((m2 - 2.0).abs() < 1e-12 && (m3 - 2.0).abs() < 1e-12);
        assert!((g2 - 0.5).abs() < 1e-12 && (g3 - 0.5).abs() < 1e-12);

        let init = init_of(&[("alpha", 1.0), ("lambda", 1.0)]);
        let a = mle_fit("gamma", &two, &init, 800).unwrap();
        let b = mle_fit("gamma", &three, &init, 800).unwrap();
        assert!(
            (a.params["alpha"] - b.params["alpha"]).abs() < 1e-6,
            "α: {} vs {}",
            a.params["alpha"],
            b.params["alpha"]
        );
        assert!(
            (a.params["lambda"] - b.params["lambda"]).abs() < 1e-6,
            "λ: {} vs {}",
            a.params["lambda"],
            b.params["lambda"]
        );
    }

    #[test]
    fn infeasible_inputs_are_rejected() {
        let init = init_of(&[("alpha", 1.0), ("lambda", 1.0)]);
        // Negative point is outside the gamma domain.
        let err = mle_fit("gamma", &[1.0, -0.5, 2.0], &init, 100);
        assert!(matches!(err, Err(Error::InfeasibleInit(_))), "{err:?}");

        let err = mle_fit("gamma", &[], &init, 100);
        assert!(matches!(err, Err(Error::InfeasibleInit(_))));

        let bad_init = init_of(&[("alpha", 1.0), ("lambda", -2.0)]);
        let err = mle_fit("gamma", &[1.0, 2.0], &bad_init, 100);
        assert!(matches!(err, Err(Error::InfeasibleInit(_))));

        let missing = init_of(&[("alpha", 1.0)]);
        let err = mle_fit("gamma", &[1.0, 2.0], &missing, 100);
        assert!(matches!(err, Err(Error::InfeasibleInit(_))));
    }

    #[test]
    fn iteration_cap_carries_best_point() {
        let data =
            NamedFamily::Exponential { lambda: 2.0 }.build().unwrap().sample(200, 5).unwrap();
        let init = init_of(&[("lambda", 0.1)]);
        match mle_fit("exponential", &data, &init, 3) {
            Err(Error::FitNonConverged { iterations, best_log_likelihood, best_params }) => {
                assert_eq!(iterations, 3);
                assert!(best_log_likelihood.is_finite());
                assert_eq!(best_params.len(), 1);
                assert_eq!(best_params[0].0, "lambda");
            }
            other => panic!("expected FitNonConverged, got {other:?}"),
        }
    }

    #[test]
    fn data_parsing_formats() {
        let plain = "1.5\n2.25\n\n-3e-2\n";
        assert_eq!(parse_data(plain).unwrap(), vec![1.5, 2.25, -0.03]);

        let csv = "value\r\n1.0\r\n2.0\r\n";
        assert_eq!(parse_data(csv).unwrap(), vec![1.0, 2.0]);

        assert!(matches!(parse_data("value\n1.0\nbad\n"), Err(Error::Config(_))));
        assert_eq!(parse_data("").unwrap(), Vec::<f64>::new());
        assert_eq!(parse_data("header only").unwrap(), Vec::<f64>::new());
    }

    #[test]
    fn fit_result_serializes() {
        let data =
            NamedFamily::Exponential { lambda: 1.0 }.build().unwrap().sample(100, 1).unwrap();
        let fit = mle_fit("exponential", &data, &init_of(&[("lambda", 1.0)]), 300).unwrap();
        let json = serde_json::to_value(&fit).unwrap();
        for key in ["family", "params", "log_likelihood", "iterations", "converged"] {
            assert!(json.get(key).is_some(), "missing {key}");
        }
        let back: FitResult = serde_json::from_value(json).unwrap();
        assert_eq!(back.params["lambda"].to_bits(), fit.params["lambda"].to_bits());
    }
}
