//! Dataset-level evaluation: runs per-example certification in parallel and
//! aggregates certified accuracy and cost-sensitive robustness metrics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::certify::{
    certify_cost_sensitive, certify_standard, CertificationOutcome, NoiseKey, SmoothingConfig,
    Status,
};
use crate::classifier::BaseClassifier;
use crate::cost::CostMatrix;
use crate::data::Dataset;
use crate::error::{Error, Result};

/// Certification results for one test example under both modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleResult {
    pub index: usize,
    pub label: usize,
    pub sensitive: bool,
    /// Standard certification (present for every example).
    pub standard: ExampleCertificate,
    /// Cost-sensitive certification (sensitive examples only).
    pub cost_sensitive: Option<ExampleCertificate>,
}

/// The slice of a certification outcome worth persisting per example.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExampleCertificate {
    pub prediction: usize,
    pub r1: f64,
    pub r2: f64,
    pub radius: f64,
    pub status: Status,
}

impl From<&CertificationOutcome> for ExampleCertificate {
    fn from(o: &CertificationOutcome) -> Self {
        ExampleCertificate {
            prediction: o.prediction,
            r1: o.r1,
            r2: o.r2,
            radius: o.radius,
            status: o.status,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatusCounts {
    pub certified: usize,
    pub abstain: usize,
    pub cost_violation: usize,
    pub misclassified: usize,
}

impl StatusCounts {
    fn tally<'a>(statuses: impl Iterator<Item = &'a Status>) -> Self {
        let mut c = StatusCounts {
            certified: 0,
            abstain: 0,
            cost_violation: 0,
            misclassified: 0,
        };
        for s in statuses {
            match s {
                Status::Certified => c.certified += 1,
                Status::Abstain => c.abstain += 1,
                Status::CostViolation => c.cost_violation += 1,
                Status::Misclassified => c.misclassified += 1,
            }
        }
        c
    }
}

/// Aggregated metrics over a test set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Fraction of all examples with a positive standard certificate.
    pub acc: f64,
    /// Fraction of sensitive examples certified cost-sensitively beyond
    /// epsilon (dual-bound radius).
    pub rob_cs: f64,
    /// Same, but counting only the single-bound radius R1.
    pub rob_cs_std: f64,
    /// Fraction of non-sensitive examples with standard radius > epsilon.
    pub rob_non_std: f64,
    pub epsilon: f64,
    pub n_examples: usize,
    pub n_sensitive: usize,
    pub standard_statuses: StatusCounts,
    pub cost_sensitive_statuses: StatusCounts,
    /// (radius, certified-accuracy) points for the standard certificate.
    pub curve: Vec<(f64, f64)>,
    pub smoothing: SmoothingConfig,
    pub seed: u64,
}

/// Fraction of sensitive results that are certified with radius beyond
/// epsilon. Undefined (an error) when there are no sensitive examples.
pub fn rob_cost_sensitive(
    results: &[(&ExampleCertificate, bool)],
    epsilon: f64,
    use_r1_only: bool,
) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::UndefinedMetric(
            "cost-sensitive robustness needs at least one sensitive example".into(),
        ));
    }
    let hits = results
        .iter()
        .filter(|(c, _)| {
            let r = if use_r1_only { c.r1 } else { c.radius };
            c.status == Status::Certified && r > epsilon
        })
        .count();
    Ok(hits as f64 / results.len() as f64)
}

/// Fraction of examples whose standard certificate is positive.
pub fn overall_acc(results: &[ExampleResult]) -> f64 {
    if results.is_empty() {
        return 0.0;
    }
    let hits = results
        .iter()
        .filter(|r| r.standard.status == Status::Certified)
        .count();
    hits as f64 / results.len() as f64
}

/// Certified accuracy at each radius in `grid`: the fraction of examples
/// certified with standard radius strictly greater than the grid point.
pub fn certified_accuracy_curve(results: &[ExampleResult], grid: &[f64]) -> Vec<(f64, f64)> {
    grid.iter()
        .map(|&r| {
            let hits = results
                .iter()
                .filter(|e| e.standard.status == Status::Certified && e.standard.radius > r)
                .count();
            let frac = if results.is_empty() {
                0.0
            } else {
                hits as f64 / results.len() as f64
            };
            (r, frac)
        })
        .collect()
}

/// Certify every test example under both modes. Per-example noise is keyed
/// by (seed, example index), so the result is independent of thread count
/// and iteration order.
pub fn certify_dataset(
    f: &BaseClassifier,
    dataset: &Dataset,
    cost: &CostMatrix,
    cfg: &SmoothingConfig,
    seed: u64,
) -> Result<Vec<ExampleResult>> {
    cfg.validate()?;
    if dataset.m != f.num_classes() {
        return Err(Error::DimensionMismatch {
            expected: f.num_classes(),
            got: dataset.m,
        });
    }
    (0..dataset.len())
        .into_par_iter()
        .map(|i| {
            let x = &dataset.features[i];
            let y = dataset.labels[i];
            let key = NoiseKey::new(seed, i as u64);
            let std_out = certify_standard(f, x, y, cfg, key)?;
            let omega = cost.omega(y)?;
            let cs = if omega.is_empty() {
                None
            } else {
                Some(ExampleCertificate::from(&certify_cost_sensitive(
                    f, x, &omega, cfg, key,
                )?))
            };
            Ok(ExampleResult {
                index: i,
                label: y,
                sensitive: !omega.is_empty(),
                standard: ExampleCertificate::from(&std_out),
                cost_sensitive: cs,
            })
        })
        .collect()
}

/// Full evaluation: certify the dataset and aggregate into a report.
pub fn run_experiment(
    f: &BaseClassifier,
    dataset: &Dataset,
    cost: &CostMatrix,
    cfg: &SmoothingConfig,
    epsilon: f64,
    seed: u64,
    grid: &[f64],
) -> Result<(EvalReport, Vec<ExampleResult>)> {
    let results = certify_dataset(f, dataset, cost, cfg, seed)?;
    let report = summarize(&results, cfg, epsilon, seed, grid)?;
    Ok((report, results))
}

/// Aggregate per-example certificates into an [`EvalReport`].
pub fn summarize(
    results: &[ExampleResult],
    cfg: &SmoothingConfig,
    epsilon: f64,
    seed: u64,
    grid: &[f64],
) -> Result<EvalReport> {
    let sensitive: Vec<(&ExampleCertificate, bool)> = results
        .iter()
        .filter_map(|r| r.cost_sensitive.as_ref().map(|c| (c, r.sensitive)))
        .collect();
    let (rob_cs, rob_cs_std) = if sensitive.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            rob_cost_sensitive(&sensitive, epsilon, false)?,
            rob_cost_sensitive(&sensitive, epsilon, true)?,
        )
    };
    let non_sensitive: Vec<&ExampleResult> = results.iter().filter(|r| !r.sensitive).collect();
    let rob_non_std = if non_sensitive.is_empty() {
        f64::NAN
    } else {
        non_sensitive
            .iter()
            .filter(|r| r.standard.status == Status::Certified && r.standard.radius > epsilon)
            .count() as f64
            / non_sensitive.len() as f64
    };
    Ok(EvalReport {
        acc: overall_acc(results),
        rob_cs,
        rob_cs_std,
        rob_non_std,
        epsilon,
        n_examples: results.len(),
        n_sensitive: sensitive.len(),
        standard_statuses: StatusCounts::tally(results.iter().map(|r| &r.standard.status)),
        cost_sensitive_statuses: StatusCounts::tally(
            results.iter().filter_map(|r| {
                r.cost_sensitive.as_ref().map(|c| &c.status)
            }),
        ),
        curve: certified_accuracy_curve(results, grid),
        smoothing: *cfg,
        seed,
    })
}

/// Evenly spaced radius grid for certified-accuracy curves.
pub fn radius_grid(max_radius: f64, steps: usize) -> Vec<f64> {
    (0..=steps)
        .map(|i| max_radius * i as f64 / steps as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cert(status: Status, radius: f64) -> ExampleCertificate {
        ExampleCertificate {
            prediction: 0,
            r1: radius,
            r2: radius,
            radius,
            status,
        }
    }

    #[test]
    fn rob_cs_undefined_without_sensitive_examples() {
        let err = rob_cost_sensitive(&[], 0.5, false).unwrap_err();
        assert!(matches!(err, Error::UndefinedMetric(_)));
    }

    #[test]
    fn rob_cs_counts_only_certified_beyond_epsilon() {
        let a = cert(Status::Certified, 0.6);
        let b = cert(Status::Certified, 0.4);
        let c = cert(Status::Abstain, 0.9);
        let rows = vec![(&a, true), (&b, true), (&c, true)];
        let rob = rob_cost_sensitive(&rows, 0.5, false).unwrap();
        assert!((rob - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn curve_is_monotone_nonincreasing() {
        let results: Vec<ExampleResult> = [0.1, 0.3, 0.7, 1.2]
            .iter()
            .enumerate()
            .map(|(i, &r)| ExampleResult {
                index: i,
                label: 0,
                sensitive: false,
                standard: cert(Status::Certified, r),
                cost_sensitive: None,
            })
            .collect();
        let curve = certified_accuracy_curve(&results, &radius_grid(1.5, 10));
        for w in curve.windows(2) {
            assert!(w[1].1 <= w[0].1);
        }
        assert!((curve[0].1 - 1.0).abs() < 1e-12);
        assert_eq!(curve.last().unwrap().1, 0.0);
    }
}
