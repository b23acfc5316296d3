//! Binary cost matrices and the derived sensitive-target sets.
//!
//! A cost matrix C assigns cost C[j][k] in {0, 1} to an adversarial
//! transformation from seed class j to target class k. Label indices are
//! 0-based everywhere, including all file formats.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// m x m binary cost matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CostMatrixRaw", into = "CostMatrixRaw")]
pub struct CostMatrix {
    m: usize,
    entries: Vec<Vec<u8>>,
}

/// Wire form of the cost matrix file: {"m": int, "entries": [[0|1, ...], ...]}.
#[derive(Serialize, Deserialize)]
struct CostMatrixRaw {
    m: usize,
    entries: Vec<Vec<u8>>,
}

impl TryFrom<CostMatrixRaw> for CostMatrix {
    type Error = Error;
    fn try_from(raw: CostMatrixRaw) -> Result<Self> {
        CostMatrix::new(raw.m, raw.entries)
    }
}

impl From<CostMatrix> for CostMatrixRaw {
    fn from(c: CostMatrix) -> Self {
        CostMatrixRaw {
            m: c.m,
            entries: c.entries,
        }
    }
}

/// Row category: how many off-diagonal targets in the row carry cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// |Omega_j| = 0
    NonSensitive,
    /// |Omega_j| = m - 1
    Seedwise,
    /// 1 <= |Omega_j| < m - 1
    Pairwise,
}

/// The set of cost-sensitive target classes for one seed class.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SensitiveTargets {
    pub seed: usize,
    pub targets: BTreeSet<usize>,
}

impl SensitiveTargets {
    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn contains(&self, class: usize) -> bool {
        self.targets.contains(&class)
    }
}

impl CostMatrix {
    /// Validates entries in {0,1} and a zero diagonal. A nonzero diagonal is
    /// a hard error rather than being silently zeroed.
    pub fn new(m: usize, entries: Vec<Vec<u8>>) -> Result<Self> {
        if m == 0 {
            return Err(Error::Config("cost matrix: m must be positive".into()));
        }
        if entries.len() != m {
            return Err(Error::Config(format!(
                "cost matrix: expected {m} rows, got {}",
                entries.len()
            )));
        }
        for (j, row) in entries.iter().enumerate() {
            if row.len() != m {
                return Err(Error::Config(format!(
                    "cost matrix: row {j} has {} columns, expected {m}",
                    row.len()
                )));
            }
            for (k, &v) in row.iter().enumerate() {
                if v > 1 {
                    return Err(Error::Config(format!(
                        "cost matrix: entry ({j},{k}) = {v} is not binary"
                    )));
                }
                if j == k && v != 0 {
                    return Err(Error::Config(format!(
                        "cost matrix: nonzero diagonal entry at ({j},{j})"
                    )));
                }
            }
        }
        Ok(CostMatrix { m, entries })
    }

    /// All-ones-off-diagonal matrix (the overall-robustness cost matrix).
    pub fn overall(m: usize) -> Result<Self> {
        let entries = (0..m)
            .map(|j| (0..m).map(|k| u8::from(j != k)).collect())
            .collect();
        CostMatrix::new(m, entries)
    }

    /// All-zero matrix (no sensitive examples).
    pub fn zero(m: usize) -> Result<Self> {
        CostMatrix::new(m, vec![vec![0; m]; m])
    }

    /// Seedwise matrix: the given rows are all ones off-diagonal.
    pub fn seedwise(m: usize, seeds: &[usize]) -> Result<Self> {
        let mut entries = vec![vec![0u8; m]; m];
        for &j in seeds {
            if j >= m {
                return Err(Error::IndexOutOfRange {
                    what: "seed class",
                    index: j,
                    size: m,
                });
            }
            for (k, e) in entries[j].iter_mut().enumerate() {
                if k != j {
                    *e = 1;
                }
            }
        }
        CostMatrix::new(m, entries)
    }

    /// Pairwise matrix: one seed row with the given target set.
    pub fn pairwise(m: usize, seed: usize, targets: &[usize]) -> Result<Self> {
        let mut entries = vec![vec![0u8; m]; m];
        if seed >= m {
            return Err(Error::IndexOutOfRange {
                what: "seed class",
                index: seed,
                size: m,
            });
        }
        for &k in targets {
            if k >= m {
                return Err(Error::IndexOutOfRange {
                    what: "target class",
                    index: k,
                    size: m,
                });
            }
            if k == seed {
                return Err(Error::Config(format!(
                    "cost matrix: target {k} equals seed class"
                )));
            }
            entries[seed][k] = 1;
        }
        CostMatrix::new(m, entries)
    }

    /// CLI shorthand: "seedwise:3" or "seedwise:2,4" or "pairwise:3->2,4,5".
    pub fn parse_shorthand(spec: &str, m: usize) -> Result<Self> {
        if spec == "overall" {
            return CostMatrix::overall(m);
        }
        if let Some(rest) = spec.strip_prefix("seedwise:") {
            let seeds = parse_index_list(rest)?;
            return CostMatrix::seedwise(m, &seeds);
        }
        if let Some(rest) = spec.strip_prefix("pairwise:") {
            let (seed, targets) = rest.split_once("->").ok_or_else(|| {
                Error::Config(format!("cost shorthand '{spec}': expected 'pairwise:j->k,...'"))
            })?;
            let seed: usize = seed
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("cost shorthand '{spec}': bad seed index")))?;
            let targets = parse_index_list(targets)?;
            return CostMatrix::pairwise(m, seed, &targets);
        }
        Err(Error::Config(format!(
            "unrecognized cost shorthand '{spec}' (expected 'overall', 'seedwise:...' or 'pairwise:...')"
        )))
    }

    pub fn num_classes(&self) -> usize {
        self.m
    }

    pub fn entry(&self, j: usize, k: usize) -> u8 {
        self.entries[j][k]
    }

    /// Omega_j = {k : C[j][k] = 1}.
    pub fn omega(&self, seed: usize) -> Result<SensitiveTargets> {
        if seed >= self.m {
            return Err(Error::IndexOutOfRange {
                what: "seed class",
                index: seed,
                size: self.m,
            });
        }
        let targets = self.entries[seed]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1)
            .map(|(k, _)| k)
            .collect();
        Ok(SensitiveTargets { seed, targets })
    }

    pub fn classify_row(&self, seed: usize) -> Result<RowKind> {
        let omega = self.omega(seed)?;
        Ok(match omega.len() {
            0 => RowKind::NonSensitive,
            n if n == self.m - 1 => RowKind::Seedwise,
            _ => RowKind::Pairwise,
        })
    }

    /// True when label's row has at least one sensitive target.
    pub fn is_sensitive_label(&self, label: usize) -> Result<bool> {
        Ok(!self.omega(label)?.is_empty())
    }

    /// Partition of example indices into the sensitive subset S^s and its
    /// complement, in input order.
    pub fn sensitive_split(&self, labels: &[usize]) -> Result<(Vec<usize>, Vec<usize>)> {
        let mut sensitive = Vec::new();
        let mut rest = Vec::new();
        for (i, &y) in labels.iter().enumerate() {
            if y >= self.m {
                return Err(Error::IndexOutOfRange {
                    what: "label",
                    index: y,
                    size: self.m,
                });
            }
            if self.is_sensitive_label(y)? {
                sensitive.push(i);
            } else {
                rest.push(i);
            }
        }
        Ok((sensitive, rest))
    }
}

fn parse_index_list(s: &str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|tok| {
            tok.trim()
                .parse::<usize>()
                .map_err(|_| Error::Config(format!("bad class index '{tok}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn omega_overall_matrix() {
        let c = CostMatrix::overall(3).unwrap();
        let o = c.omega(0).unwrap();
        assert_eq!(o.targets, BTreeSet::from([1, 2]));
    }

    #[test]
    fn omega_single_pairwise() {
        // m = 10, C_35 = 1 only
        let c = CostMatrix::pairwise(10, 3, &[5]).unwrap();
        assert_eq!(c.omega(3).unwrap().targets, BTreeSet::from([5]));
        assert!(c.omega(0).unwrap().is_empty());
    }

    #[test]
    fn omega_multi_pairwise() {
        let c = CostMatrix::pairwise(10, 3, &[2, 4, 5]).unwrap();
        assert_eq!(c.omega(3).unwrap().targets, BTreeSet::from([2, 4, 5]));
    }

    #[test]
    fn omega_out_of_range() {
        let c = CostMatrix::overall(3).unwrap();
        assert!(c.omega(3).is_err());
    }

    #[test]
    fn classify_row_categories() {
        let c = CostMatrix::overall(5).unwrap();
        assert_eq!(c.classify_row(0).unwrap(), RowKind::Seedwise);
        let c = CostMatrix::pairwise(10, 3, &[5]).unwrap();
        assert_eq!(c.classify_row(3).unwrap(), RowKind::Pairwise);
        assert_eq!(c.classify_row(1).unwrap(), RowKind::NonSensitive);
        let c = CostMatrix::zero(4).unwrap();
        assert_eq!(c.classify_row(2).unwrap(), RowKind::NonSensitive);
    }

    #[test]
    fn nonzero_diagonal_rejected() {
        let mut entries = vec![vec![0u8; 3]; 3];
        entries[1][1] = 1;
        assert!(CostMatrix::new(3, entries).is_err());
    }

    #[test]
    fn non_binary_entry_rejected() {
        let mut entries = vec![vec![0u8; 3]; 3];
        entries[0][1] = 2;
        assert!(CostMatrix::new(3, entries).is_err());
    }

    #[test]
    fn sensitive_split_edges() {
        let labels = vec![3, 5, 3, 1];
        let zero = CostMatrix::zero(6).unwrap();
        let (s, rest) = zero.sensitive_split(&labels).unwrap();
        assert!(s.is_empty());
        assert_eq!(rest.len(), 4);

        let overall = CostMatrix::overall(6).unwrap();
        let (s, rest) = overall.sensitive_split(&labels).unwrap();
        assert_eq!(s.len(), 4);
        assert!(rest.is_empty());

        // only row 3 nonzero: S^s is exactly the examples labeled 3
        let single = CostMatrix::seedwise(6, &[3]).unwrap();
        let (s, rest) = single.sensitive_split(&labels).unwrap();
        assert_eq!(s, vec![0, 2]);
        assert_eq!(rest, vec![1, 3]);
    }

    #[test]
    fn sensitive_split_rejects_bad_label() {
        let c = CostMatrix::overall(3).unwrap();
        assert!(c.sensitive_split(&[0, 3]).is_err());
    }

    #[test]
    fn shorthand_parsing() {
        let c = CostMatrix::parse_shorthand("seedwise:3", 10).unwrap();
        assert_eq!(c.classify_row(3).unwrap(), RowKind::Seedwise);
        let c = CostMatrix::parse_shorthand("pairwise:3->2,4,5", 10).unwrap();
        assert_eq!(c.omega(3).unwrap().targets, BTreeSet::from([2, 4, 5]));
        assert!(CostMatrix::parse_shorthand("triplewise:1", 10).is_err());
        assert!(CostMatrix::parse_shorthand("pairwise:3->3", 10).is_err());
    }

    #[test]
    fn json_round_trip() {
        let c = CostMatrix::pairwise(4, 1, &[0, 3]).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: CostMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(c, back);
        // malformed: nonzero diagonal must fail at load time
        let bad = r#"{"m":2,"entries":[[1,0],[0,0]]}"#;
        assert!(serde_json::from_str::<CostMatrix>(bad).is_err());
    }
}
