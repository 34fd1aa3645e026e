//! Builtin performance and fairness metrics.
//!
//! Performance metrics are computed on the pooled matrix (sum over groups).
//! Fairness metrics are differences `group1 - group0`, where group 0 is the
//! reference group and always comes first in the slice handed to
//! [`MetricSpec::evaluate`]. A zero denominator yields `None` for that
//! coordinate instead of an error.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::GroupConfusionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    Performance,
    Fairness,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Formula {
    Accuracy,
    Tpr,
    Fpr,
    AcceptanceRate,
    Ppv,
    DemographicParity,
    EqualOpportunity,
    PredictiveParity,
    EqualizedOdds,
}

/// A named metric with its output columns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSpec {
    pub name: &'static str,
    pub kind: MetricKind,
    /// One column per output coordinate; `columns.len()` is the arity.
    pub columns: Vec<&'static str>,
    pub formula: &'static str,
    #[serde(skip)]
    eval: Formula,
}

impl MetricSpec {
    pub fn arity(&self) -> usize {
        self.columns.len()
    }

    /// Number of groups the metric needs, if fixed.
    pub fn required_groups(&self) -> Option<usize> {
        match self.kind {
            MetricKind::Performance => None,
            MetricKind::Fairness => Some(2),
        }
    }

    pub fn check_groups(&self, n_groups: usize) -> Result<()> {
        if n_groups == 0 {
            return Err(Error::config(format!("metric `{}` needs at least one group", self.name)));
        }
        match self.required_groups() {
            Some(n) if n != n_groups => {
                Err(Error::config(format!("metric `{}` needs exactly {n} groups, got {n_groups}", self.name)))
            }
            _ => Ok(()),
        }
    }

    /// Evaluates on groups ordered reference first.
    pub fn evaluate<S: Scalar>(&self, groups: &[GroupConfusionMatrix<S>]) -> Result<Vec<Option<S>>> {
        self.check_groups(groups.len())?;
        let cells: Vec<[S; 4]> = groups.iter().map(|g| g.cells()).collect();
        Ok(self.evaluate_cells(&cells))
    }

    /// Same as [`Self::evaluate`] on raw `[tp, tn, fp, fn]` arrays. The group
    /// count is not re-checked; callers validate once up front.
    pub fn evaluate_cells<S: Scalar>(&self, groups: &[[S; 4]]) -> Vec<Option<S>> {
        let pooled = || {
            groups.iter().fold([S::zero(); 4], |mut acc, c| {
                for i in 0..4 {
                    acc[i] = acc[i] + c[i];
                }
                acc
            })
        };
        let diff = |f: fn(&[S; 4]) -> Option<S>| match (f(&groups[1]), f(&groups[0])) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
        match self.eval {
            Formula::Accuracy => vec![accuracy(&pooled())],
            Formula::Tpr => vec![tpr(&pooled())],
            Formula::Fpr => vec![fpr(&pooled())],
            Formula::AcceptanceRate => vec![acceptance_rate(&pooled())],
            Formula::Ppv => vec![ppv(&pooled())],
            Formula::DemographicParity => vec![diff(acceptance_rate)],
            Formula::EqualOpportunity => vec![diff(tpr)],
            Formula::PredictiveParity => vec![diff(ppv)],
            Formula::EqualizedOdds => vec![diff(tpr), diff(fpr)],
        }
    }
}

fn ratio<S: Scalar>(num: S, den: S) -> Option<S> {
    if den == S::zero() {
        None
    } else {
        Some(num / den)
    }
}

fn accuracy<S: Scalar>(c: &[S; 4]) -> Option<S> {
    ratio(c[0] + c[1], c[0] + c[1] + c[2] + c[3])
}

fn tpr<S: Scalar>(c: &[S; 4]) -> Option<S> {
    ratio(c[0], c[0] + c[3])
}

fn fpr<S: Scalar>(c: &[S; 4]) -> Option<S> {
    ratio(c[2], c[2] + c[1])
}

fn acceptance_rate<S: Scalar>(c: &[S; 4]) -> Option<S> {
    ratio(c[0] + c[2], c[0] + c[1] + c[2] + c[3])
}

fn ppv<S: Scalar>(c: &[S; 4]) -> Option<S> {
    ratio(c[0], c[0] + c[2])
}

fn spec(
    name: &'static str,
    kind: MetricKind,
    columns: Vec<&'static str>,
    formula: &'static str,
    eval: Formula,
) -> MetricSpec {
    MetricSpec { name, kind, columns, formula, eval }
}

/// All shipped metrics.
pub fn builtin_metrics() -> Vec<MetricSpec> {
    use MetricKind::*;
    vec![
        spec("accuracy", Performance, vec!["accuracy"], "(tp+tn)/(tp+tn+fp+fn)", Formula::Accuracy),
        spec("tpr", Performance, vec!["tpr"], "tp/(tp+fn)", Formula::Tpr),
        spec("fpr", Performance, vec!["fpr"], "fp/(fp+tn)", Formula::Fpr),
        spec("ar", Performance, vec!["ar"], "(tp+fp)/(tp+tn+fp+fn)", Formula::AcceptanceRate),
        spec("ppv", Performance, vec!["ppv"], "tp/(tp+fp)", Formula::Ppv),
        spec("dp", Fairness, vec!["dp"], "AR_1 - AR_0", Formula::DemographicParity),
        spec("eop", Fairness, vec!["eop"], "TPR_1 - TPR_0", Formula::EqualOpportunity),
        spec("pp", Fairness, vec!["pp"], "PPV_1 - PPV_0", Formula::PredictiveParity),
        spec("eo", Fairness, vec!["eo_tpr", "eo_fpr"], "(TPR_1 - TPR_0, FPR_1 - FPR_0)", Formula::EqualizedOdds),
    ]
}

pub fn metric_by_name(name: &str) -> Result<MetricSpec> {
    let key = name.trim().to_ascii_lowercase();
    builtin_metrics()
        .into_iter()
        .find(|m| m.name == key)
        .ok_or_else(|| Error::config(format!("unknown metric `{name}`")))
}

/// Parses a comma-separated metric list such as `accuracy,eop`.
pub fn parse_metric_list(list: &str) -> Result<Vec<MetricSpec>> {
    let metrics = list.split(',').filter(|s| !s.trim().is_empty()).map(metric_by_name).collect::<Result<Vec<_>>>()?;
    if metrics.is_empty() {
        return Err(Error::config("metric list is empty"));
    }
    Ok(metrics)
}

/// Output column names of a metric list, in order.
pub fn column_names(metrics: &[MetricSpec]) -> Vec<String> {
    metrics.iter().flat_map(|m| m.columns.iter().map(|c| c.to_string())).collect()
}

/// Recovers the metric list behind a sample matrix header.
pub fn metrics_for_columns(columns: &[String]) -> Result<Vec<MetricSpec>> {
    let registry = builtin_metrics();
    let mut out = Vec::new();
    let mut i = 0;
    while i < columns.len() {
        let m = registry
            .iter()
            .find(|m| columns[i..].iter().take(m.arity()).map(String::as_str).eq(m.columns.iter().copied()))
            .ok_or_else(|| Error::input(format!("column `{}` is not a known metric output", columns[i])))?;
        i += m.arity();
        out.push(m.clone());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;
    use proptest::prelude::*;

    fn cm(g: &str, c: [f64; 4]) -> GroupConfusionMatrix<f64> {
        GroupConfusionMatrix::from_cells(g, c).unwrap()
    }

    fn eval(name: &str, groups: &[GroupConfusionMatrix<f64>]) -> Vec<Option<f64>> {
        metric_by_name(name).unwrap().evaluate(groups).unwrap()
    }

    #[test]
    fn accuracy_direct() {
        assert_eq!(eval("accuracy", &[cm("g", [3., 2., 1., 4.])]), vec![Some(0.5)]);
    }

    #[test]
    fn eop_is_group1_minus_group0() {
        // TPR_0 = 7/10, TPR_1 = 8/10, exact in rationals.
        let g0 =
            GroupConfusionMatrix::<Rational64>::from_cells("g0", [7, 5, 5, 3].map(Rational64::from_integer)).unwrap();
        let g1 =
            GroupConfusionMatrix::<Rational64>::from_cells("g1", [8, 5, 5, 2].map(Rational64::from_integer)).unwrap();
        let out = metric_by_name("eop").unwrap().evaluate(&[g0, g1]).unwrap();
        assert_eq!(out, vec![Some(Rational64::new(1, 10))]);
    }

    #[test]
    fn eo_identical_groups() {
        let g = [4., 3., 2., 1.];
        assert_eq!(eval("eo", &[cm("a", g), cm("b", g)]), vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn performance_uses_pooled_matrix() {
        let a = cm("a", [1., 0., 0., 1.]);
        let b = cm("b", [3., 0., 0., 0.]);
        assert_eq!(eval("tpr", &[a, b]), vec![Some(0.8)]);
    }

    #[test]
    fn zero_denominator_is_flagged() {
        let no_pos = cm("a", [0., 5., 1., 0.]);
        assert_eq!(eval("tpr", std::slice::from_ref(&no_pos)), vec![None]);
        assert_eq!(eval("eop", &[no_pos, cm("b", [1., 1., 1., 1.])]), vec![None]);
        assert_eq!(eval("accuracy", &[cm("z", [0.; 4])]), vec![None]);
    }

    #[test]
    fn fairness_needs_two_groups() {
        let m = metric_by_name("dp").unwrap();
        assert!(m.evaluate(&[cm("a", [1.; 4])]).is_err());
        assert!(m.check_groups(3).is_err());
        assert!(metric_by_name("accuracy").unwrap().check_groups(3).is_ok());
    }

    #[test]
    fn perfect_classifier() {
        let a = cm("a", [5., 5., 0., 0.]);
        let b = cm("b", [3., 7., 0., 0.]);
        assert_eq!(eval("accuracy", &[a.clone(), b.clone()]), vec![Some(1.0)]);
        assert_eq!(eval("eop", &[a.clone(), b.clone()]), vec![Some(0.0)]);
        assert_eq!(eval("eo", &[a, b]), vec![Some(0.0), Some(0.0)]);
    }

    #[test]
    fn columns_map_back_to_metrics() {
        let cols: Vec<String> = ["accuracy", "eo_tpr", "eo_fpr", "dp"].iter().map(|s| s.to_string()).collect();
        let names: Vec<_> = metrics_for_columns(&cols).unwrap().iter().map(|m| m.name).collect();
        assert_eq!(names, ["accuracy", "eo", "dp"]);
        assert!(metrics_for_columns(&["eo_tpr".to_string()]).is_err());
    }

    #[test]
    fn registry_and_parsing() {
        let names: Vec<_> = builtin_metrics().iter().map(|m| m.name).collect();
        for n in ["accuracy", "tpr", "fpr", "ar", "ppv", "dp", "eop", "pp", "eo"] {
            assert!(names.contains(&n), "{n}");
        }
        let list = parse_metric_list("accuracy, EO").unwrap();
        assert_eq!(column_names(&list), vec!["accuracy", "eo_tpr", "eo_fpr"]);
        assert!(parse_metric_list("accuracy,f1").is_err());
        assert!(parse_metric_list(" , ").is_err());
    }

    proptest! {
        #[test]
        fn scale_invariance(
            a in prop::array::uniform4(1u32..50),
            b in prop::array::uniform4(1u32..50),
            k in 1u32..20,
        ) {
            let ga = cm("a", a.map(f64::from));
            let gb = cm("b", b.map(f64::from));
            let sa = ga.scale(f64::from(k) * 0.5);
            let sb = gb.scale(f64::from(k) * 0.5);
            for m in builtin_metrics() {
                let base = m.evaluate(&[ga.clone(), gb.clone()]).unwrap();
                let scaled = m.evaluate(&[sa.clone(), sb.clone()]).unwrap();
                for (x, y) in base.iter().zip(&scaled) {
                    prop_assert!((x.unwrap() - y.unwrap()).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn evaluation_is_pure(a in prop::array::uniform4(0.0f64..100.0)) {
            let g = [cm("a", a), cm("b", [a[1], a[0], a[3], a[2]])];
            for m in builtin_metrics() {
                let x = m.evaluate(&g).unwrap();
                let y = m.evaluate(&g).unwrap();
                let bits = |v: &Vec<Option<f64>>| v.iter().map(|o| o.map(f64::to_bits)).collect::<Vec<_>>();
                prop_assert_eq!(bits(&x), bits(&y));
            }
        }
    }
}
