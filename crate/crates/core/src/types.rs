//! Shared vocabulary: per-group confusion matrices, Dirichlet parameters,
//! evaluation inputs and the joint sample matrix produced by the sampler.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Label given to the cellwise sum of several groups.
pub const POOLED_GROUP: &str = "pooled";

/// Cell order used throughout: TP, TN, FP, FN.
pub const CELL_NAMES: [&str; 4] = ["tp", "tn", "fp", "fn"];

/// Confusion matrix of one sensitive group. Cells are scalars rather than
/// integers so that effective (fractional) counts fit the same type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfusionMatrix<S> {
    pub group: String,
    pub tp: S,
    pub tn: S,
    pub fp: S,
    #[serde(rename = "fn")]
    pub fn_: S,
}

impl<S: Scalar> GroupConfusionMatrix<S> {
    /// Builds a matrix, rejecting negative cells.
    pub fn new(group: impl Into<String>, tp: S, tn: S, fp: S, fn_: S) -> Result<Self> {
        let cm = GroupConfusionMatrix { group: group.into(), tp, tn, fp, fn_ };
        if let Some((name, _)) = cm.named_cells().into_iter().find(|(_, v)| v.is_negative()) {
            return Err(Error::input(format!("group `{}`: cell {name} is negative", cm.group)));
        }
        Ok(cm)
    }

    pub fn zero(group: impl Into<String>) -> Self {
        let z = S::zero();
        GroupConfusionMatrix { group: group.into(), tp: z, tn: z, fp: z, fn_: z }
    }

    pub fn from_cells(group: impl Into<String>, cells: [S; 4]) -> Result<Self> {
        Self::new(group, cells[0], cells[1], cells[2], cells[3])
    }

    pub fn cells(&self) -> [S; 4] {
        [self.tp, self.tn, self.fp, self.fn_]
    }

    fn named_cells(&self) -> [(&'static str, S); 4] {
        let c = self.cells();
        [(CELL_NAMES[0], c[0]), (CELL_NAMES[1], c[1]), (CELL_NAMES[2], c[2]), (CELL_NAMES[3], c[3])]
    }

    pub fn total(&self) -> S {
        self.tp + self.tn + self.fp + self.fn_
    }

    /// Actual positives, `tp + fn`.
    pub fn positives(&self) -> S {
        self.tp + self.fn_
    }

    /// Actual negatives, `tn + fp`.
    pub fn negatives(&self) -> S {
        self.tn + self.fp
    }

    /// Predicted positives, `tp + fp`.
    pub fn predicted_positives(&self) -> S {
        self.tp + self.fp
    }

    pub fn scale(&self, factor: S) -> Self {
        GroupConfusionMatrix {
            group: self.group.clone(),
            tp: self.tp * factor,
            tn: self.tn * factor,
            fp: self.fp * factor,
            fn_: self.fn_ * factor,
        }
    }

    /// Cellwise sum, keeping this matrix's label.
    pub fn add(&self, other: &Self) -> Self {
        GroupConfusionMatrix {
            group: self.group.clone(),
            tp: self.tp + other.tp,
            tn: self.tn + other.tn,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
        }
    }

    pub fn map<T>(&self, f: impl Fn(S) -> T) -> GroupConfusionMatrix<T> {
        GroupConfusionMatrix {
            group: self.group.clone(),
            tp: f(self.tp),
            tn: f(self.tn),
            fp: f(self.fp),
            fn_: f(self.fn_),
        }
    }
}

/// Cellwise sum of all groups, labelled [`POOLED_GROUP`].
pub fn pool<S: Scalar>(groups: &[GroupConfusionMatrix<S>]) -> Result<GroupConfusionMatrix<S>> {
    if groups.is_empty() {
        return Err(Error::input("cannot pool an empty list of confusion matrices"));
    }
    let init = GroupConfusionMatrix::zero(POOLED_GROUP);
    Ok(groups.iter().fold(init, |acc, g| acc.add(g)))
}

/// Dirichlet prior over the four cell probabilities (TP, TN, FP, FN).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DirichletPrior<S> {
    alpha: [S; 4],
}

impl<S: Scalar> DirichletPrior<S> {
    pub fn new(alpha: [S; 4]) -> Result<Self> {
        if alpha.iter().any(|a| a.partial_cmp(&S::zero()) != Some(std::cmp::Ordering::Greater)) {
            return Err(Error::config(format!("Dirichlet concentrations must be strictly positive, got {alpha:?}")));
        }
        Ok(DirichletPrior { alpha })
    }

    /// The uniform prior Dir(1, 1, 1, 1).
    pub fn uniform() -> Self {
        DirichletPrior { alpha: [S::one(); 4] }
    }

    pub fn alpha(&self) -> [S; 4] {
        self.alpha
    }
}

impl<S: Scalar> Default for DirichletPrior<S> {
    fn default() -> Self {
        Self::uniform()
    }
}

/// Posterior concentration vector of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletPosterior<S> {
    pub group: String,
    pub alpha: [S; 4],
}

impl<S: Scalar> DirichletPosterior<S> {
    pub fn concentration(&self) -> S {
        self.alpha.iter().fold(S::zero(), |acc, a| acc + *a)
    }

    /// Posterior mean of the cell probabilities, `alpha_i / alpha_0`.
    pub fn mean(&self) -> [S; 4] {
        let total = self.concentration();
        self.alpha.map(|a| a / total)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationSource {
    HoldOut,
    Kfold,
}

/// Observed confusion matrices, one list of groups per fold.
/// A hold-out evaluation is a single fold.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationInput<S> {
    folds: Vec<Vec<GroupConfusionMatrix<S>>>,
    source: EvaluationSource,
}

impl<S: Scalar> EvaluationInput<S> {
    pub fn hold_out(groups: Vec<GroupConfusionMatrix<S>>) -> Result<Self> {
        Self::new(vec![groups], EvaluationSource::HoldOut)
    }

    pub fn kfold(folds: Vec<Vec<GroupConfusionMatrix<S>>>) -> Result<Self> {
        Self::new(folds, EvaluationSource::Kfold)
    }

    pub fn new(folds: Vec<Vec<GroupConfusionMatrix<S>>>, source: EvaluationSource) -> Result<Self> {
        if folds.is_empty() || folds.iter().any(|f| f.is_empty()) {
            return Err(Error::input("evaluation input needs at least one group in every fold"));
        }
        if source == EvaluationSource::HoldOut && folds.len() != 1 {
            return Err(Error::input(format!("hold-out input must have exactly one fold, got {}", folds.len())));
        }
        let mut reference: Option<BTreeSet<&str>> = None;
        for (k, fold) in folds.iter().enumerate() {
            let labels: BTreeSet<&str> = fold.iter().map(|g| g.group.as_str()).collect();
            if labels.len() != fold.len() {
                return Err(Error::input(format!("fold {k}: group labels are not unique")));
            }
            match &reference {
                None => reference = Some(labels),
                Some(r) if *r != labels => {
                    return Err(Error::input(format!("fold {k}: group set {labels:?} differs from fold 0 {r:?}")))
                }
                Some(_) => {}
            }
        }
        Ok(EvaluationInput { folds, source })
    }

    pub fn source(&self) -> EvaluationSource {
        self.source
    }

    /// Number of folds; 1 for hold-out.
    pub fn k(&self) -> usize {
        self.folds.len()
    }

    pub fn folds(&self) -> &[Vec<GroupConfusionMatrix<S>>] {
        &self.folds
    }

    /// Group labels in the order of the first fold.
    pub fn group_labels(&self) -> Vec<String> {
        self.folds[0].iter().map(|g| g.group.clone()).collect()
    }

    /// The K matrices of one group, in fold order.
    pub fn group_folds(&self, group: &str) -> Option<Vec<GroupConfusionMatrix<S>>> {
        self.folds.iter().map(|fold| fold.iter().find(|g| g.group == group).cloned()).collect()
    }

    /// Per-group sum over folds, in [`Self::group_labels`] order.
    pub fn summed_groups(&self) -> Vec<GroupConfusionMatrix<S>> {
        self.group_labels()
            .iter()
            .map(|label| {
                let folds = self.group_folds(label).expect("group present in every fold");
                folds[1..].iter().fold(folds[0].clone(), |acc, cm| acc.add(cm))
            })
            .collect()
    }

    /// Reorders groups inside every fold so that `reference` comes first.
    pub fn with_reference_first(mut self, reference: &str) -> Result<Self> {
        for fold in &mut self.folds {
            let pos = fold
                .iter()
                .position(|g| g.group == reference)
                .ok_or_else(|| Error::config(format!("reference group `{reference}` not present in input")))?;
            let g = fold.remove(pos);
            fold.insert(0, g);
        }
        Ok(self)
    }
}

/// T rows of joint metric samples, stored row-major.
///
/// A row containing a NaN is *flagged*: some metric had a zero denominator
/// for that draw. Flagged rows are kept so that row indices stay aligned
/// with the sampler's seed derivation.
#[derive(Debug, Clone, PartialEq)]
pub struct JointSampleMatrix {
    columns: Vec<String>,
    data: Vec<f64>,
    seed: Option<u64>,
}

impl JointSampleMatrix {
    pub fn from_flat(columns: Vec<String>, data: Vec<f64>, seed: Option<u64>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::input("sample matrix needs at least one column"));
        }
        if !data.len().is_multiple_of(columns.len()) {
            return Err(Error::input(format!("{} values do not fill rows of width {}", data.len(), columns.len())));
        }
        Ok(JointSampleMatrix { columns, data, seed })
    }

    pub fn from_rows(columns: Vec<String>, rows: &[Vec<f64>], seed: Option<u64>) -> Result<Self> {
        let width = columns.len();
        if let Some((t, _)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(Error::input(format!("row {t} does not have {width} values")));
        }
        Self::from_flat(columns, rows.concat(), seed)
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.columns.len()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn row(&self, t: usize) -> &[f64] {
        let w = self.width();
        &self.data[t * w..(t + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.width())
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Copy of one column, flagged values included.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let j = self.column_index(name).ok_or_else(|| Error::input(format!("no column `{name}` in sample matrix")))?;
        Ok(self.rows().map(|r| r[j]).collect())
    }

    pub fn is_flagged(&self, t: usize) -> bool {
        self.row(t).iter().any(|v| v.is_nan())
    }

    pub fn flagged_count(&self) -> usize {
        self.rows().filter(|r| r.iter().any(|v| v.is_nan())).count()
    }

    /// Sub-matrix with the named columns, in the given order.
    pub fn select(&self, names: &[&str]) -> Result<JointSampleMatrix> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n).ok_or_else(|| Error::input(format!("no column `{n}` in sample matrix"))))
            .collect::<Result<Vec<_>>>()?;
        let data = self.rows().flat_map(|r| idx.iter().map(move |&j| r[j])).collect();
        Ok(JointSampleMatrix { columns: names.iter().map(|s| s.to_string()).collect(), data, seed: self.seed })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cm(g: &str, c: [f64; 4]) -> GroupConfusionMatrix<f64> {
        GroupConfusionMatrix::from_cells(g, c).unwrap()
    }

    #[test]
    fn pool_sums_cells() {
        let p = pool(&[cm("g0", [1., 2., 3., 4.]), cm("g1", [5., 6., 7., 8.])]).unwrap();
        assert_eq!(p.cells(), [6., 8., 10., 12.]);
        assert_eq!(p.group, POOLED_GROUP);
    }

    #[test]
    fn pool_zero_and_single() {
        assert_eq!(pool(&[cm("g0", [0.; 4])]).unwrap().cells(), [0.; 4]);
        assert_eq!(pool(&[cm("g0", [3., 2., 1., 4.])]).unwrap().cells(), [3., 2., 1., 4.]);
    }

    #[test]
    fn pool_empty_is_error() {
        assert!(pool::<f64>(&[]).is_err());
    }

    #[test]
    fn negative_cell_rejected() {
        assert!(GroupConfusionMatrix::new("g", 1.0, -1.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn prior_must_be_positive() {
        assert!(DirichletPrior::new([1.0, 0.0, 1.0, 1.0]).is_err());
        assert!(DirichletPrior::new([1.0, f64::NAN, 1.0, 1.0]).is_err());
        assert_eq!(DirichletPrior::<f64>::default().alpha(), [1.0; 4]);
    }

    #[test]
    fn kfold_requires_same_groups() {
        let f0 = vec![cm("a", [1.; 4]), cm("b", [1.; 4])];
        let f1 = vec![cm("a", [1.; 4]), cm("c", [1.; 4])];
        assert!(EvaluationInput::kfold(vec![f0.clone(), f1]).is_err());
        let dup = vec![cm("a", [1.; 4]), cm("a", [1.; 4])];
        assert!(EvaluationInput::hold_out(dup).is_err());
        let ok = EvaluationInput::kfold(vec![f0.clone(), f0]).unwrap();
        assert_eq!(ok.k(), 2);
        assert_eq!(ok.summed_groups()[1].cells(), [2.; 4]);
    }

    #[test]
    fn reference_reordering() {
        let input = EvaluationInput::hold_out(vec![cm("a", [1.; 4]), cm("b", [2.; 4])]).unwrap();
        let input = input.with_reference_first("b").unwrap();
        assert_eq!(input.group_labels(), vec!["b", "a"]);
        assert!(input.with_reference_first("zz").is_err());
    }

    #[test]
    fn sample_matrix_select_and_flags() {
        let m =
            JointSampleMatrix::from_rows(vec!["x".into(), "y".into()], &[vec![1.0, 2.0], vec![f64::NAN, 3.0]], Some(7))
                .unwrap();
        assert_eq!(m.n_rows(), 2);
        assert_eq!(m.flagged_count(), 1);
        let s = m.select(&["y"]).unwrap();
        assert_eq!(s.as_flat(), &[2.0, 3.0]);
        assert!(m.select(&["z"]).is_err());
    }
}
