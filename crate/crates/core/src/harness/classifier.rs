use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Training recipe of a toy classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClassifierSpec {
    /// Logistic regression on standardized features, full-batch gradient descent.
    Logistic { learning_rate: f64, iterations: usize },
    /// Best single-feature threshold on the training data.
    Stump,
    /// Label noiser: returns the true label with probability `p_correct`,
    /// keyed on the instance index, independent of any training data.
    Bernoulli { p_correct: f64, seed: u64 },
}

impl ClassifierSpec {
    pub fn logistic() -> Self {
        ClassifierSpec::Logistic { learning_rate: 0.5, iterations: 300 }
    }

    pub fn bernoulli(p_correct: f64, seed: u64) -> Self {
        ClassifierSpec::Bernoulli { p_correct, seed }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ClassifierSpec::Logistic { .. } => "logistic",
            ClassifierSpec::Stump => "stump",
            ClassifierSpec::Bernoulli { .. } => "bernoulli",
        }
    }

    /// Fits on the rows `train` of `data`.
    pub fn fit(&self, data: &TabularDataset, train: &[usize]) -> Result<Model, String> {
        match *self {
            ClassifierSpec::Bernoulli { p_correct, seed } => {
                if !(0.0..=1.0).contains(&p_correct) {
                    return Err(format!("p_correct = {p_correct} outside [0,1]"));
                }
                Ok(Model::Bernoulli { p_correct, seed })
            }
            _ if data.dim() == 0 => Err(format!("{} classifier needs at least one feature", self.name())),
            _ if train.is_empty() => Err("empty training set".into()),
            ClassifierSpec::Stump => Ok(fit_stump(data, train)),
            ClassifierSpec::Logistic { learning_rate, iterations } => {
                fit_logistic(data, train, learning_rate, iterations)
            }
        }
    }
}

impl FromStr for ClassifierSpec {
    type Err = Error;

    /// `logistic`, `logistic:lr=0.5,iters=300`, `stump`, `bernoulli:0.9`,
    /// `bernoulli:0.9,seed=3`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, args) = s.split_once(':').unwrap_or((s, ""));
        let args: Vec<&str> = args.split(',').map(str::trim).filter(|a| !a.is_empty()).collect();
        let bad = |what: &str| Error::config(format!("classifier `{s}`: {what}"));
        let num = |v: &str| v.parse::<f64>().map_err(|_| bad(&format!("`{v}` is not a number")));
        match kind.trim() {
            "stump" if args.is_empty() => Ok(ClassifierSpec::Stump),
            "logistic" => {
                let (mut lr, mut iters) = (0.5, 300usize);
                for a in args {
                    match a.split_once('=') {
                        Some(("lr", v)) => lr = num(v)?,
                        Some(("iters", v)) => iters = num(v)? as usize,
                        _ => return Err(bad(&format!("unknown option `{a}`"))),
                    }
                }
                Ok(ClassifierSpec::Logistic { learning_rate: lr, iterations: iters })
            }
            "bernoulli" => {
                let mut it = args.into_iter();
                let p = num(it.next().ok_or_else(|| bad("missing p_correct"))?)?;
                let mut seed = 0;
                for a in it {
                    match a.split_once('=') {
                        Some(("seed", v)) => seed = v.parse().map_err(|_| bad("seed must be an integer"))?,
                        _ => return Err(bad(&format!("unknown option `{a}`"))),
                    }
                }
                if !(0.0..=1.0).contains(&p) {
                    return Err(bad("p_correct must be in [0,1]"));
                }
                Ok(ClassifierSpec::Bernoulli { p_correct: p, seed })
            }
            _ => Err(bad("expected logistic, stump or bernoulli:<p>")),
        }
    }
}

/// A trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Logistic { weights: Vec<f64>, bias: f64, mean: Vec<f64>, scale: Vec<f64> },
    Stump { feature: usize, threshold: f64, positive_above: bool },
    Bernoulli { p_correct: f64, seed: u64 },
}

impl Model {
    /// Predicted label of row `i`.
    pub fn predict(&self, data: &TabularDataset, i: usize) -> bool {
        match self {
            Model::Logistic { weights, bias, mean, scale } => {
                let x = data.features(i);
                let z: f64 =
                    bias + weights.iter().enumerate().map(|(j, w)| w * (x[j] - mean[j]) / scale[j]).sum::<f64>();
                z > 0.0
            }
            Model::Stump { feature, threshold, positive_above } => {
                (data.features(i)[*feature] > *threshold) == *positive_above
            }
            Model::Bernoulli { p_correct, seed } => {
                let u = (derive_seed(*seed, "bernoulli", i as u64) >> 11) as f64 / (1u64 << 53) as f64;
                let y = data.label(i);
                if u < *p_correct {
                    y
                } else {
                    !y
                }
            }
        }
    }
}

fn fit_stump(data: &TabularDataset, train: &[usize]) -> Model {
    let total_pos = train.iter().filter(|&&i| data.label(i)).count() as i64;
    let n = train.len() as i64;
    let mut best = (i64::MIN, 0usize, f64::NEG_INFINITY, true);
    for feature in 0..data.dim() {
        let mut order: Vec<usize> = train.to_vec();
        order.sort_by(|&a, &b| data.features(a)[feature].total_cmp(&data.features(b)[feature]));
        // Threshold below everything: all rows predicted "above".
        let (mut pos_below, mut below) = (0i64, 0i64);
        let mut consider = |threshold: f64, pos_below: i64, below: i64| {
            // Correct count when predicting positive above the threshold.
            let above_correct = (total_pos - pos_below) + (below - pos_below);
            let below_correct = n - above_correct;
            for (score, positive_above) in [(above_correct, true), (below_correct, false)] {
                if score > best.0 {
                    best = (score, feature, threshold, positive_above);
                }
            }
        };
        consider(f64::NEG_INFINITY, 0, 0);
        for (k, &i) in order.iter().enumerate() {
            below += 1;
            if data.label(i) {
                pos_below += 1;
            }
            let v = data.features(i)[feature];
            let next = order.get(k + 1).map(|&j| data.features(j)[feature]);
            if next != Some(v) {
                let threshold = match next {
                    Some(w) => 0.5 * (v + w),
                    None => v,
                };
                consider(threshold, pos_below, below);
            }
        }
    }
    Model::Stump { feature: best.1, threshold: best.2, positive_above: best.3 }
}

fn fit_logistic(data: &TabularDataset, train: &[usize], lr: f64, iterations: usize) -> Result<Model, String> {
    let d = data.dim();
    let n = train.len() as f64;
    let mut mean = vec![0.0; d];
    for &i in train {
        for (m, x) in mean.iter_mut().zip(data.features(i)) {
            *m += x / n;
        }
    }
    let mut scale = vec![0.0; d];
    for &i in train {
        for (j, x) in data.features(i).iter().enumerate() {
            scale[j] += (x - mean[j]).powi(2) / n;
        }
    }
    for s in &mut scale {
        *s = if *s > 0.0 { s.sqrt() } else { 1.0 };
    }
    let rows: Vec<(Vec<f64>, f64)> = train
        .iter()
        .map(|&i| {
            let z = data.features(i).iter().enumerate().map(|(j, x)| (x - mean[j]) / scale[j]).collect();
            (z, if data.label(i) { 1.0 } else { 0.0 })
        })
        .collect();

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..iterations {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (x, y) in &rows {
            let z = b + w.iter().zip(x).map(|(wi, xi)| wi * xi).sum::<f64>();
            let err = 1.0 / (1.0 + (-z).exp()) - y;
            gb += err;
            for (g, xi) in gw.iter_mut().zip(x) {
                *g += err * xi;
            }
        }
        b -= lr * gb / n;
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= lr * g / n;
        }
        if !b.is_finite() || w.iter().any(|v| !v.is_finite()) {
            return Err("non-finite parameters during gradient descent".into());
        }
    }
    Ok(Model::Logistic { weights: w, bias: b, mean, scale })
}
