//! Monte-Carlo certification of smoothed classifiers: the cost-sensitive
//! dual-bound procedure (R1 and R2) and the standard single-bound procedure
//! used for the overall-accuracy metric.

use serde::{Deserialize, Serialize};

use crate::classifier::BaseClassifier;
use crate::cost::SensitiveTargets;
use crate::error::{Error, Result};
use crate::gauss::{binom_lower, binom_upper, phi_inv_raw};
use crate::radius::argmax_lowest;
use crate::rng;

/// Clamp for Clopper-Pearson bounds that hit {0, 1} via k = 0 or k = n at
/// extreme confidence; keeps the quantile finite and certification
/// conservative (a clamped lower bound yields a large negative radius).
const BOUND_CLAMP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub sigma: f64,
    pub n0: u64,
    pub n: u64,
    pub alpha: f64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        SmoothingConfig {
            sigma: 0.5,
            n0: 100,
            n: 100_000,
            alpha: 0.001,
        }
    }
}

impl SmoothingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma = {} must be > 0", self.sigma)));
        }
        if self.n0 == 0 || self.n == 0 {
            return Err(Error::Config("n0 and n must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha = {} outside (0, 1)",
                self.alpha
            )));
        }
        Ok(())
    }
}

/// Per-class prediction counts from noisy sampling.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleCounts {
    pub counts: Vec<u64>,
    pub n: u64,
}

impl SampleCounts {
    pub fn top_index(&self) -> usize {
        let as_f64: Vec<f64> = self.counts.iter().map(|&c| c as f64).collect();
        argmax_lowest(&as_f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Certified,
    Abstain,
    CostViolation,
    Misclassified,
}

impl std::fmt::Display for Status {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Status::Certified => "certified",
            Status::Abstain => "abstain",
            Status::CostViolation => "cost_violation",
            Status::Misclassified => "misclassified",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificationOutcome {
    pub prediction: usize,
    pub r1: f64,
    pub r2: f64,
    /// max(r1, r2); the certificate value when status is Certified.
    pub radius: f64,
    pub status: Status,
    pub counts0: SampleCounts,
    pub counts: SampleCounts,
}

/// Key for the deterministic noise streams of one certification call.
/// The selection (n0) and estimation (n) phases use disjoint counters.
#[derive(Debug, Clone, Copy)]
pub struct NoiseKey {
    pub master: u64,
    pub example: u64,
}

impl NoiseKey {
    pub fn new(master: u64, example: u64) -> Self {
        NoiseKey { master, example }
    }
}

/// Draws n noisy predictions and returns per-class counts.
pub fn sample_under_noise<R: rand::Rng>(
    f: &BaseClassifier,
    x: &[f64],
    n: u64,
    sigma: f64,
    rng: &mut R,
) -> Result<SampleCounts> {
    if n == 0 {
        return Err(Error::Domain("sample_under_noise: n must be >= 1".into()));
    }
    let m = f.num_classes();
    let mut counts = vec![0u64; m];
    let mut noisy = vec![0.0; x.len()];
    for _ in 0..n {
        rng::fill_gaussian(rng, sigma, &mut noisy);
        for (v, xi) in noisy.iter_mut().zip(x) {
            *v += xi;
        }
        let c = f.predict(&noisy)?;
        counts[c] += 1;
    }
    Ok(SampleCounts { counts, n })
}

fn clamped_quantile(p: f64) -> f64 {
    phi_inv_raw(p.clamp(BOUND_CLAMP_EPS, 1.0 - BOUND_CLAMP_EPS))
}

/// Cost-sensitive certification with the dual bounds R1 and R2.
///
/// R1 = sigma * phi_inv(lower_{1-alpha}(p_A)).
/// R2 = (sigma/2) * (phi_inv(lower_{1-alpha/2}(p_A)) - phi_inv(p_B_upper)),
/// where p_B_upper is the max over Omega_y of per-class upper bounds at
/// confidence 1 - alpha/(2|Omega_y|). Both hold with confidence 1 - alpha.
pub fn certify_cost_sensitive(
    f: &BaseClassifier,
    x: &[f64],
    omega: &SensitiveTargets,
    cfg: &SmoothingConfig,
    key: NoiseKey,
) -> Result<CertificationOutcome> {
    cfg.validate()?;
    if omega.is_empty() {
        return Err(Error::Domain(
            "cost-sensitive certification needs a nonempty target set".into(),
        ));
    }
    let m = f.num_classes();
    for &k in &omega.targets {
        if k >= m {
            return Err(Error::IndexOutOfRange {
                what: "target class",
                index: k,
                size: m,
            });
        }
    }

    let mut rng0 = rng::stream(key.master, "certify-cs", &[key.example, 0]);
    let counts0 = sample_under_noise(f, x, cfg.n0, cfg.sigma, &mut rng0)?;
    let prediction = counts0.top_index();

    let mut rng1 = rng::stream(key.master, "certify-cs", &[key.example, 1]);
    let counts = sample_under_noise(f, x, cfg.n, cfg.sigma, &mut rng1)?;

    let k_a = counts.counts[prediction];
    let p_a_low = binom_lower(k_a, cfg.n, 1.0 - cfg.alpha)?.value;
    let r1 = cfg.sigma * clamped_quantile(p_a_low);

    let p_a_low2 = binom_lower(k_a, cfg.n, 1.0 - cfg.alpha / 2.0)?.value;
    let per_target_conf = 1.0 - cfg.alpha / (2.0 * omega.len() as f64);
    let mut p_b_up = f64::NEG_INFINITY;
    for &k in &omega.targets {
        let up = binom_upper(counts.counts[k], cfg.n, per_target_conf)?.value;
        p_b_up = p_b_up.max(up);
    }
    let r2 = 0.5 * cfg.sigma * (clamped_quantile(p_a_low2) - clamped_quantile(p_b_up));

    let radius = r1.max(r2);
    let status = if omega.contains(prediction) {
        Status::CostViolation
    } else if radius > 0.0 {
        Status::Certified
    } else {
        Status::Abstain
    };
    Ok(CertificationOutcome {
        prediction,
        r1,
        r2,
        radius,
        status,
        counts0,
        counts,
    })
}

/// Standard certification (single Cohen-style lower bound). Certified iff
/// the bound is positive and the prediction matches the label.
pub fn certify_standard(
    f: &BaseClassifier,
    x: &[f64],
    y: usize,
    cfg: &SmoothingConfig,
    key: NoiseKey,
) -> Result<CertificationOutcome> {
    cfg.validate()?;
    if y >= f.num_classes() {
        return Err(Error::IndexOutOfRange {
            what: "label",
            index: y,
            size: f.num_classes(),
        });
    }
    let mut rng0 = rng::stream(key.master, "certify-std", &[key.example, 0]);
    let counts0 = sample_under_noise(f, x, cfg.n0, cfg.sigma, &mut rng0)?;
    let prediction = counts0.top_index();

    let mut rng1 = rng::stream(key.master, "certify-std", &[key.example, 1]);
    let counts = sample_under_noise(f, x, cfg.n, cfg.sigma, &mut rng1)?;

    let k_a = counts.counts[prediction];
    let p_a_low = binom_lower(k_a, cfg.n, 1.0 - cfg.alpha)?.value;
    let r1 = cfg.sigma * clamped_quantile(p_a_low);

    let status = if r1 <= 0.0 {
        Status::Abstain
    } else if prediction == y {
        Status::Certified
    } else {
        Status::Misclassified
    };
    Ok(CertificationOutcome {
        prediction,
        r1,
        r2: f64::NEG_INFINITY,
        radius: r1,
        status,
        counts0,
        counts,
    })
}
