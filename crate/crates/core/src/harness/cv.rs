use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use super::classifier::ClassifierSpec;
use super::dataset::TabularDataset;
use crate::error::{Error, Result};
use crate::kfold::HalfSplitPair;
use crate::metrics::MetricSpec;
use crate::seed::{derive_seed, rng};
use crate::types::{EvaluationInput, EvaluationSource, GroupConfusionMatrix};

/// Indices grouped by (group, label), each stratum shuffled, strata
/// concatenated in sorted key order.
fn stratified_order(data: &TabularDataset, indices: &[usize], seed: u64) -> Vec<usize> {
    let mut strata: BTreeMap<(&str, bool), Vec<usize>> = BTreeMap::new();
    for &i in indices {
        strata.entry((data.group(i), data.label(i))).or_default().push(i);
    }
    let mut r = rng(seed);
    strata
        .into_values()
        .flat_map(|mut s| {
            s.shuffle(&mut r);
            s
        })
        .collect()
}

fn kfold_indices(data: &TabularDataset, indices: &[usize], k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::config(format!("K-fold split needs K >= 2, got {k}")));
    }
    if k > indices.len() {
        return Err(Error::input(format!("cannot split {} instances into {k} folds", indices.len())));
    }
    let mut folds = vec![Vec::new(); k];
    for (pos, i) in stratified_order(data, indices, seed).into_iter().enumerate() {
        folds[pos % k].push(i);
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Stratified K-fold partition of all rows. Fold sizes differ by at most one.
pub fn kfold_split(data: &TabularDataset, k: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    let all: Vec<usize> = (0..data.len()).collect();
    kfold_indices(data, &all, k, seed)
}

/// Stratified split into (train, test) with about `test_fraction` of every
/// stratum in the test part.
pub fn holdout_split(data: &TabularDataset, test_fraction: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::config(format!("test fraction must be in (0,1), got {test_fraction}")));
    }
    let mut strata: BTreeMap<(&str, bool), Vec<usize>> = BTreeMap::new();
    for i in 0..data.len() {
        strata.entry((data.group(i), data.label(i))).or_default().push(i);
    }
    let mut r = rng(seed);
    let (mut train, mut test) = (Vec::new(), Vec::new());
    for mut s in strata.into_values() {
        s.shuffle(&mut r);
        let n_test = (s.len() as f64 * test_fraction).round() as usize;
        test.extend_from_slice(&s[..n_test]);
        train.extend_from_slice(&s[n_test..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Two disjoint stratified halves of size `floor(n/2)` each. With odd `n`
/// one row belongs to neither.
pub fn half_split(data: &TabularDataset, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let all: Vec<usize> = (0..data.len()).collect();
    let order = stratified_order(data, &all, seed);
    let usable = 2 * (order.len() / 2);
    let (mut a, mut b): (Vec<usize>, Vec<usize>) = (Vec::new(), Vec::new());
    for (pos, &i) in order[..usable].iter().enumerate() {
        if pos % 2 == 0 {
            a.push(i);
        } else {
            b.push(i);
        }
    }
    a.sort_unstable();
    b.sort_unstable();
    (a, b)
}

fn count_matrices(
    data: &TabularDataset,
    groups: &[String],
    rows: &[usize],
    predict: impl Fn(usize) -> bool,
) -> Vec<GroupConfusionMatrix<f64>> {
    let mut cells = vec![[0.0f64; 4]; groups.len()];
    for &i in rows {
        let g = groups.iter().position(|l| l == data.group(i)).expect("known group");
        let cell = match (data.label(i), predict(i)) {
            (true, true) => 0,
            (false, false) => 1,
            (false, true) => 2,
            (true, false) => 3,
        };
        cells[g][cell] += 1.0;
    }
    groups
        .iter()
        .zip(cells)
        .map(|(g, c)| GroupConfusionMatrix::from_cells(g.clone(), c).expect("counts are nonnegative"))
        .collect()
}

/// Per-fold confusion matrices of a cross-validation run.
#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub input: EvaluationInput<f64>,
    pub folds: Vec<Vec<usize>>,
    pub train_sizes: Vec<usize>,
}

fn cv_on(data: &TabularDataset, indices: &[usize], spec: &ClassifierSpec, k: usize, seed: u64) -> Result<CvOutcome> {
    let folds = kfold_indices(data, indices, k, seed)?;
    let groups = data.group_labels();
    let mut matrices = Vec::with_capacity(k);
    let mut train_sizes = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        let train: Vec<usize> =
            folds.iter().enumerate().filter(|(g, _)| *g != f).flat_map(|(_, rows)| rows.iter().copied()).collect();
        let model = spec.fit(data, &train).map_err(|reason| Error::Divergence { fold: f, reason })?;
        train_sizes.push(train.len());
        matrices.push(count_matrices(data, &groups, test, |i| model.predict(data, i)));
    }
    Ok(CvOutcome { input: EvaluationInput::new(matrices, EvaluationSource::Kfold)?, folds, train_sizes })
}

/// K-fold CV of `spec` over the whole dataset.
pub fn run_cv(data: &TabularDataset, spec: &ClassifierSpec, k: usize, seed: u64) -> Result<CvOutcome> {
    let all: Vec<usize> = (0..data.len()).collect();
    cv_on(data, &all, spec, k, seed)
}

/// Trains on a stratified train part and counts matrices on the test part.
pub fn run_holdout(
    data: &TabularDataset,
    spec: &ClassifierSpec,
    test_fraction: f64,
    seed: u64,
) -> Result<EvaluationInput<f64>> {
    let (train, test) = holdout_split(data, test_fraction, seed)?;
    let model = spec.fit(data, &train).map_err(|reason| Error::Divergence { fold: 0, reason })?;
    EvaluationInput::hold_out(count_matrices(data, &data.group_labels(), &test, |i| model.predict(data, i)))
}

/// Metric values of the pooled-over-folds matrices of `input`.
pub fn metric_point(input: &EvaluationInput<f64>, metrics: &[MetricSpec], reference: &str) -> Result<Vec<f64>> {
    let groups = input.clone().with_reference_first(reference)?.summed_groups();
    let mut out = Vec::new();
    for m in metrics {
        out.extend(m.evaluate(&groups)?.into_iter().map(|v| v.unwrap_or(f64::NAN)));
    }
    Ok(out)
}

/// M pairs of K-fold CV results of `metric` on disjoint dataset halves.
///
/// Split `m` and both of its CVs draw their seeds from `seed` and `m` only,
/// so two classifiers run with the same seed see identical splits.
pub fn half_split_protocol(
    data: &TabularDataset,
    spec: &ClassifierSpec,
    k: usize,
    m: usize,
    metric: &MetricSpec,
    reference: &str,
    seed: u64,
) -> Result<Vec<HalfSplitPair<f64>>> {
    if m == 0 {
        return Err(Error::config("half-split protocol needs M >= 1 repetitions"));
    }
    if metric.arity() != 1 {
        return Err(Error::config(format!("half-split protocol needs a scalar metric, `{}` is not", metric.name)));
    }
    if data.len() / 2 < 2 * k {
        return Err(Error::input(format!(
            "dataset too small for half splits: floor({}/2) < 2K = {}",
            data.len(),
            2 * k
        )));
    }
    let metrics = std::slice::from_ref(metric);
    (0..m)
        .into_par_iter()
        .map(|rep| {
            let (d, dc) = half_split(data, derive_seed(seed, "half-split", rep as u64));
            let run = |rows: &[usize], tag: &str| -> Result<f64> {
                let cv = cv_on(data, rows, spec, k, derive_seed(seed, tag, rep as u64))?;
                let v = metric_point(&cv.input, metrics, reference)?[0];
                if v.is_nan() {
                    return Err(Error::input(format!("metric `{}` undefined on half-split {rep}", metric.name)));
                }
                Ok(v)
            };
            Ok(HalfSplitPair { mu: run(&d, "half-cv")?, mu_c: run(&dc, "half-cv-complement")? })
        })
        .collect()
}

/// Pooled metric point of `n_repeats` independent K-fold CVs. Repeat `r`
/// uses `derive_seed(seed, "repeat", r)` as its split seed.
pub fn repeated_cv_sweep(
    data: &TabularDataset,
    spec: &ClassifierSpec,
    k: usize,
    n_repeats: usize,
    metrics: &[MetricSpec],
    reference: &str,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    if n_repeats == 0 {
        return Err(Error::config("sweep needs at least one repeat"));
    }
    (0..n_repeats)
        .into_par_iter()
        .map(|r| {
            let cv = run_cv(data, spec, k, derive_seed(seed, "repeat", r as u64))?;
            metric_point(&cv.input, metrics, reference)
        })
        .collect()
}
