use std::path::Path;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::seed::rng;

/// Rows of features with a sensitive group and a binary label each.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    features: Vec<Vec<f64>>,
    groups: Vec<String>,
    labels: Vec<bool>,
    dim: usize,
}

impl TabularDataset {
    pub fn new(features: Vec<Vec<f64>>, groups: Vec<String>, labels: Vec<bool>) -> Result<Self> {
        let n = labels.len();
        if features.len() != n || groups.len() != n {
            return Err(Error::input(format!(
                "dataset fields disagree on length: {} features, {} groups, {n} labels",
                features.len(),
                groups.len()
            )));
        }
        if n == 0 {
            return Err(Error::input("dataset is empty"));
        }
        let dim = features[0].len();
        if features.iter().any(|r| r.len() != dim) {
            return Err(Error::input("feature rows have different lengths"));
        }
        Ok(TabularDataset { features, groups, labels, dim })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn features(&self, i: usize) -> &[f64] {
        &self.features[i]
    }

    pub fn group(&self, i: usize) -> &str {
        &self.groups[i]
    }

    pub fn label(&self, i: usize) -> bool {
        self.labels[i]
    }

    /// Distinct group labels, sorted.
    pub fn group_labels(&self) -> Vec<String> {
        let mut g = self.groups.clone();
        g.sort();
        g.dedup();
        g
    }

    /// Reads a CSV with columns `group`, `label` (0/1) and any number of
    /// numeric feature columns.
    pub fn load_csv(path: &Path) -> Result<Self> {
        let csv_err = |source| Error::Csv { path: path.to_path_buf(), source };
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
        let headers = reader.headers().map_err(csv_err)?.clone();
        let find = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::MissingColumn { path: path.to_path_buf(), column: name.into() })
        };
        let (ig, il) = (find("group")?, find("label")?);
        let feature_cols: Vec<usize> = (0..headers.len()).filter(|&i| i != ig && i != il).collect();
        let (mut features, mut groups, mut labels) = (Vec::new(), Vec::new(), Vec::new());
        for record in reader.records() {
            let record = record.map_err(csv_err)?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let label = match &record[il] {
                "1" => true,
                "0" => false,
                other => return Err(Error::UnknownLabel { path: path.to_path_buf(), line, label: other.into() }),
            };
            let row = feature_cols
                .iter()
                .map(|&i| {
                    record[i].parse::<f64>().map_err(|_| {
                        Error::input(format!("{}:{line}: `{}` is not a number", path.display(), &record[i]))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            features.push(row);
            groups.push(record[ig].to_string());
            labels.push(label);
        }
        if labels.is_empty() {
            return Err(Error::EmptyFile { path: path.to_path_buf() });
        }
        Self::new(features, groups, labels)
    }
}

/// One sensitive group of a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupSpec {
    pub label: String,
    pub size: usize,
    /// Target true-positive rate of the threshold-at-zero stump on feature 0.
    pub tpr: f64,
    /// Target true-negative rate of the same stump.
    pub tnr: f64,
    #[serde(default = "half")]
    pub positive_rate: f64,
}

fn half() -> f64 {
    0.5
}

/// Generative recipe for [`make_synthetic`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSpec {
    pub groups: Vec<GroupSpec>,
    /// Feature count. Feature 0 carries the signal, the rest are noise.
    pub d: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        serde_json::from_str(&text).map_err(|source| Error::Json { path: path.to_path_buf(), source })
    }

    /// Two equally sized groups with the given per-group TPR/TNR targets.
    pub fn two_groups(n: usize, tpr: (f64, f64), tnr: (f64, f64), d: usize, seed: u64) -> Self {
        let g = |label: &str, size, tpr, tnr| GroupSpec { label: label.into(), size, tpr, tnr, positive_rate: 0.5 };
        SyntheticSpec { groups: vec![g("g0", n / 2, tpr.0, tnr.0), g("g1", n - n / 2, tpr.1, tnr.1)], d, seed }
    }
}

/// Draws a dataset in which, for group `s`, feature 0 of a positive is
/// `N(Phi^-1(tpr_s), 1)` and of a negative `N(-Phi^-1(tnr_s), 1)`, so the
/// rule `x0 > 0` has exactly the requested rates in expectation.
pub fn make_synthetic(spec: &SyntheticSpec) -> Result<TabularDataset> {
    if spec.groups.is_empty() {
        return Err(Error::config("synthetic spec needs at least one group"));
    }
    let std_normal = Normal::new(0.0, 1.0).expect("standard normal");
    let shift = |p: f64| std_normal.inverse_cdf(p).clamp(-8.0, 8.0);
    let mut r = rng(spec.seed);
    let (mut features, mut groups, mut labels) = (Vec::new(), Vec::new(), Vec::new());
    for g in &spec.groups {
        for (name, v) in [("tpr", g.tpr), ("tnr", g.tnr), ("positive_rate", g.positive_rate)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(format!("group `{}`: {name} = {v} is outside [0,1]", g.label)));
            }
        }
        let n_pos = (g.size as f64 * g.positive_rate).round() as usize;
        let mut ys: Vec<bool> = (0..g.size).map(|i| i < n_pos).collect();
        ys.shuffle(&mut r);
        for y in ys {
            let mean = if y { shift(g.tpr) } else { -shift(g.tnr) };
            let mut row = Vec::with_capacity(spec.d);
            for j in 0..spec.d {
                let z: f64 = StandardNormal.sample(&mut r);
                row.push(if j == 0 { mean + z } else { z });
            }
            features.push(row);
            groups.push(g.label.clone());
            labels.push(y);
        }
    }
    TabularDataset::new(features, groups, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_at_zero_hits_target_rates() {
        let spec = SyntheticSpec::two_groups(1000, (0.9, 0.7), (0.8, 0.8), 2, 1);
        let data = make_synthetic(&spec).unwrap();
        for (label, target) in [("g0", 0.9), ("g1", 0.7)] {
            let (mut tp, mut pos) = (0, 0);
            for i in 0..data.len() {
                if data.group(i) == label && data.label(i) {
                    pos += 1;
                    if data.features(i)[0] > 0.0 {
                        tp += 1;
                    }
                }
            }
            let tpr = tp as f64 / pos as f64;
            assert!((tpr - target).abs() < 0.05, "{label}: {tpr}");
        }
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = SyntheticSpec::two_groups(100, (0.9, 0.7), (0.8, 0.8), 3, 5);
        assert_eq!(make_synthetic(&spec).unwrap(), make_synthetic(&spec).unwrap());
    }

    #[test]
    fn invalid_rates() {
        let spec = SyntheticSpec::two_groups(100, (1.2, 0.7), (0.8, 0.8), 1, 0);
        assert!(make_synthetic(&spec).is_err());
    }

    #[test]
    fn zero_features_allowed() {
        let spec = SyntheticSpec::two_groups(10, (0.5, 0.5), (0.5, 0.5), 0, 0);
        let data = make_synthetic(&spec).unwrap();
        assert_eq!(data.dim(), 0);
        assert_eq!(data.len(), 10);
    }
}
