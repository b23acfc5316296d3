//! Exact certified radii from a known probability vector of the smoothed
//! classifier: the standard radius and the cost-sensitive radius.

use crate::cost::SensitiveTargets;
use crate::error::{Error, Result};
use crate::gauss::phi_inv_raw;

/// Clamp applied before the Gaussian quantile on exact probability paths.
/// Monte-Carlo paths never hit {0, 1}: Clopper-Pearson bounds are interior
/// for 0 < k < n and the boundary counts use closed forms.
pub const EXACT_CLAMP_EPS: f64 = 1e-12;

/// Per-class probabilities of the smoothed classifier at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Domain("probability vector is empty".into()));
        }
        let mut sum = 0.0;
        for (k, &p) in probs.iter().enumerate() {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::Domain(format!(
                    "probability [{k}] = {p} outside [0, 1]"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        Ok(ProbVector { probs })
    }

    pub fn from_counts(counts: &[u64]) -> Result<Self> {
        let n: u64 = counts.iter().sum();
        if n == 0 {
            return Err(Error::Domain("counts sum to zero".into()));
        }
        ProbVector::new(counts.iter().map(|&c| c as f64 / n as f64).collect())
    }

    pub fn num_classes(&self) -> usize {
        self.probs.len()
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs[k]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.probs
    }

    /// Index of the largest entry, ties broken by lowest class index.
    pub fn argmax(&self) -> usize {
        argmax_lowest(&self.probs)
    }
}

/// Argmax with ties broken by lowest index; the convention used identically
/// in radii, oracle classifiers, and the certifier.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// A certified radius together with whether the certificate's precondition
/// held. The signed expression is reported even when it did not, for
/// diagnostics and the training surrogate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadiusResult {
    pub radius: f64,
    pub top_class: usize,
    pub applicable: bool,
}

#[inline]
fn clip(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

/// (sigma/2) * (phi_inv(clip(pa)) - phi_inv(clip(pb))); the shared kernel of
/// every radius expression. Clamping keeps the quantile finite at {0, 1}.
pub fn clamped_phi_inv_gap(pa: f64, pb: f64, sigma: f64, clamp_eps: f64) -> f64 {
    0.5 * sigma * (phi_inv_raw(clip(pa, clamp_eps)) - phi_inv_raw(clip(pb, clamp_eps)))
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma = {sigma} must be positive")));
    }
    Ok(())
}

/// Standard certified radius: (sigma/2) * (phi_inv(p_y) - phi_inv(max_{k != y} p_k)).
/// Applicable only when the smoothed prediction equals y.
pub fn standard_radius(p: &ProbVector, y: usize, sigma: f64) -> Result<RadiusResult> {
    check_sigma(sigma)?;
    if y >= p.num_classes() {
        return Err(Error::IndexOutOfRange {
            what: "label",
            index: y,
            size: p.num_classes(),
        });
    }
    let top = p.argmax();
    let runner_up = p
        .as_slice()
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != y)
        .max_by(|a, b| {
            a.1.partial_cmp(b.1)
                .unwrap()
                .then(b.0.cmp(&a.0)) // ties to lowest index
        })
        .map(|(_, &v)| v)
        .unwrap_or(0.0);
    let radius = clamped_phi_inv_gap(p.get(y), runner_up, sigma, EXACT_CLAMP_EPS);
    Ok(RadiusResult {
        radius,
        top_class: top,
        applicable: top == y,
    })
}

/// Cost-sensitive certified radius:
/// (sigma/2) * (phi_inv(max_k p_k) - phi_inv(max_{k in Omega_y} p_k)).
/// Applicable iff the top class lies outside Omega_y.
pub fn cost_sensitive_radius(
    p: &ProbVector,
    omega: &SensitiveTargets,
    sigma: f64,
) -> Result<RadiusResult> {
    check_sigma(sigma)?;
    if omega.is_empty() {
        return Err(Error::Domain(
            "cost-sensitive radius undefined for an empty target set".into(),
        ));
    }
    let m = p.num_classes();
    for &k in &omega.targets {
        if k >= m {
            return Err(Error::IndexOutOfRange {
                what: "target class",
                index: k,
                size: m,
            });
        }
    }
    let top = p.argmax();
    let p_top = p.get(top);
    let p_omega = omega
        .targets
        .iter()
        .map(|&k| p.get(k))
        .fold(f64::NEG_INFINITY, f64::max);
    let radius = clamped_phi_inv_gap(p_top, p_omega, sigma, EXACT_CLAMP_EPS);
    Ok(RadiusResult {
        radius,
        top_class: top,
        applicable: !omega.contains(top),
    })
}
