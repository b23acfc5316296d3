//! Dataset container, CSV ingestion, and seeded synthetic fixtures.
//!
//! CSV format: header "label,f0,f1,...,f{d-1}", one example per row.
//! Labels are 0-based class indices.

use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub m: usize,
    pub d: usize,
    pub name: String,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
        m: usize,
        name: impl Into<String>,
        seed: Option<u64>,
    ) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Config("dataset is empty".into()));
        }
        if features.len() != labels.len() {
            return Err(Error::Config(format!(
                "dataset: {} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let d = features[0].len();
        for (i, row) in features.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Format(format!(
                    "dataset row {i}: width {} differs from {d}",
                    row.len()
                )));
            }
            if row.iter().any(|v| v.is_nan()) {
                return Err(Error::Format(format!("dataset row {i}: NaN feature")));
            }
        }
        for (i, &y) in labels.iter().enumerate() {
            if y >= m {
                return Err(Error::Format(format!(
                    "dataset row {i}: label {y} >= m = {m}"
                )));
            }
        }
        Ok(Dataset {
            features,
            labels,
            m,
            d,
            name: name.into(),
            seed,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Parses the CSV format above. `m` defaults to max(label) + 1.
    pub fn load_csv(path: &Path, m: Option<usize>) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Dataset::parse_csv(&text, m, path.display().to_string())
    }

    pub fn parse_csv(text: &str, m: Option<usize>, name: String) -> Result<Self> {
        // lines starting with '#' carry provenance metadata (seed, generator)
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim_start().starts_with('#'));
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::Format("dataset CSV is empty".into()))?;
        let cols: Vec<&str> = header.split(',').collect();
        if cols.first() != Some(&"label") {
            return Err(Error::Format(format!(
                "dataset CSV header must start with 'label', got '{header}'"
            )));
        }
        let d = cols.len() - 1;
        if d == 0 {
            return Err(Error::Format("dataset CSV has no feature columns".into()));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (row_idx, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != d + 1 {
                return Err(Error::Format(format!(
                    "dataset row {row_idx}: expected {} columns, got {}",
                    d + 1,
                    fields.len()
                )));
            }
            let label: usize = fields[0].trim().parse().map_err(|_| {
                Error::Format(format!("dataset row {row_idx}: bad label '{}'", fields[0]))
            })?;
            let mut row = Vec::with_capacity(d);
            for f in &fields[1..] {
                let v: f64 = f.trim().parse().map_err(|_| {
                    Error::Format(format!("dataset row {row_idx}: bad feature '{f}'"))
                })?;
                row.push(v);
            }
            labels.push(label);
            features.push(row);
        }
        let m = m.unwrap_or_else(|| labels.iter().copied().max().map_or(1, |x| x + 1));
        Dataset::new(features, labels, m, name, None)
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        if let Some(seed) = self.seed {
            out.push_str(&format!("# dataset={} seed={seed}\n", self.name));
        }
        out.push_str("label");
        for j in 0..self.d {
            out.push_str(&format!(",f{j}"));
        }
        out.push('\n');
        for (row, &y) in self.features.iter().zip(&self.labels) {
            out.push_str(&y.to_string());
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }
}

/// Parameters of the Gaussian-blob fixtures.
#[derive(Debug, Clone, Copy)]
pub struct BlobSpec {
    pub classes: usize,
    pub n_train: usize,
    pub n_test: usize,
    /// Radius of the circle the class means sit on.
    pub mean_radius: f64,
    /// Per-class standard deviation.
    pub spread: f64,
}

/// The "blobs-5" benchmark: 5 Gaussian classes in 2-D, 500 train / 500 test.
pub const BLOBS_5: BlobSpec = BlobSpec {
    classes: 5,
    n_train: 500,
    n_test: 500,
    mean_radius: 2.5,
    spread: 0.85,
};

/// Seeded synthetic fixtures by name. "blobs-5" is the benchmark used in
/// the method-comparison experiments.
pub fn gen_synthetic(spec: &str, seed: u64) -> Result<(Dataset, Dataset)> {
    match spec {
        "blobs-5" => Ok(gen_blobs(&BLOBS_5, spec, seed)),
        other => Err(Error::Config(format!("unknown synthetic dataset '{other}'"))),
    }
}

/// Gaussian blobs with means evenly spaced on a circle, classes cycling
/// through the sample index so every split is class-balanced.
pub fn gen_blobs(spec: &BlobSpec, name: &str, seed: u64) -> (Dataset, Dataset) {
    let make = |split: &str, n: usize, tag_counter: u64| {
        let mut features = Vec::with_capacity(n);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % spec.classes;
            let angle = 2.0 * PI * class as f64 / spec.classes as f64;
            let mut rng = rng::stream(seed, "blobs", &[tag_counter, i as u64]);
            let noise = rng::gaussian_vec(&mut rng, spec.spread, 2);
            features.push(vec![
                spec.mean_radius * angle.cos() + noise[0],
                spec.mean_radius * angle.sin() + noise[1],
            ]);
            labels.push(class);
        }
        Dataset::new(
            features,
            labels,
            spec.classes,
            format!("{name}-{split}"),
            Some(seed),
        )
        .expect("blob fixture is well-formed")
    };
    (
        make("train", spec.n_train, 0),
        make("test", spec.n_test, 1),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_valid_csv() {
        let text = "label,f0,f1\n0,1.5,-2.0\n2,0.25,3.5\n";
        let ds = Dataset::parse_csv(text, None, "t".into()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.d, 2);
        assert_eq!(ds.m, 3);
        assert_eq!(ds.features[1], vec![0.25, 3.5]);
    }

    #[test]
    fn parse_reports_bad_row() {
        let text = "label,f0,f1\n0,1.5,-2.0\n1,0.25\n";
        let err = Dataset::parse_csv(text, None, "t".into()).unwrap_err();
        assert!(err.to_string().contains("row 2"), "{err}");
    }

    #[test]
    fn parse_rejects_label_out_of_range() {
        let text = "label,f0\n5,1.0\n";
        assert!(Dataset::parse_csv(text, Some(3), "t".into()).is_err());
    }

    #[test]
    fn synthetic_is_reproducible() {
        let (tr_a, te_a) = gen_synthetic("blobs-5", 7).unwrap();
        let (tr_b, te_b) = gen_synthetic("blobs-5", 7).unwrap();
        assert_eq!(tr_a, tr_b);
        assert_eq!(te_a, te_b);
        let (tr_c, _) = gen_synthetic("blobs-5", 8).unwrap();
        assert_ne!(tr_a, tr_c);
        assert_eq!(tr_a.len(), 500);
        assert_eq!(te_a.len(), 500);
        assert_eq!(tr_a.m, 5);
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ds.csv");
        let (tr, _) = gen_synthetic("blobs-5", 3).unwrap();
        tr.save_csv(&path).unwrap();
        let back = Dataset::load_csv(&path, Some(tr.m)).unwrap();
        assert_eq!(back.labels, tr.labels);
        for (a, b) in back.features.iter().zip(&tr.features) {
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
