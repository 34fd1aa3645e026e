//! K-fold evaluation: the effective confusion matrix and the strategies for
//! choosing the between-fold correlation `rho`.
//!
//! K correlated fold matrices carry less information than K independent
//! ones. The effective matrix rescales their sum by `1 / (1 + (K-1) rho)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::types::{EvaluationInput, GroupConfusionMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoStrategy {
    /// `rho = 1/K`.
    Fixed,
    /// `rho` somewhere in `[0, 1/K]`; the midpoint is used as the point value.
    Interval,
    /// Transferred from a reference method's fixed `rho` via the variance ratio.
    Relative,
    /// Same transfer applied to the whole reference interval.
    RelativeInterval,
    /// Supplied directly by the user.
    Given,
}

/// A correlation estimate and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhoEstimate<S> {
    pub strategy: RhoStrategy,
    pub value: S,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interval: Option<(S, S)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference_method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_over: Option<S>,
}

impl<S: Scalar> RhoEstimate<S> {
    /// A user-supplied correlation in `[0, 1]`.
    pub fn given(value: S) -> Result<Self> {
        if !(value >= S::zero() && value <= S::one()) {
            return Err(Error::config(format!("rho must lie in [0, 1], got {value:?}")));
        }
        Ok(RhoEstimate { strategy: RhoStrategy::Given, value, interval: None, reference_method: None, r_over: None })
    }
}

/// Results of K-fold CV on two disjoint halves of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HalfSplitPair<S> {
    pub mu: S,
    pub mu_c: S,
}

fn check_folds(k: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::config(format!("correlation strategies need K >= 2 folds, got {k}")));
    }
    Ok(())
}

/// `1 + (K-1) rho`, the factor dividing the summed fold counts.
pub fn variance_inflation<S: Scalar>(k: usize, rho: S) -> S {
    S::one() + S::from_count(k.saturating_sub(1)) * rho
}

/// Effective matrix of one group from its K fold matrices:
/// `(sum_k CM_k) / (1 + (K-1) rho)`.
pub fn effective_cm<S: Scalar>(fold_cms: &[GroupConfusionMatrix<S>], rho: S) -> Result<GroupConfusionMatrix<S>> {
    let (first, rest) =
        fold_cms.split_first().ok_or_else(|| Error::input("effective matrix needs at least one fold"))?;
    if !(rho >= S::zero() && rho <= S::one()) {
        return Err(Error::config(format!("rho must lie in [0, 1], got {rho:?}")));
    }
    let sum = rest.iter().fold(first.clone(), |acc, cm| acc.add(cm));
    let d = variance_inflation(fold_cms.len(), rho);
    Ok(GroupConfusionMatrix { group: sum.group, tp: sum.tp / d, tn: sum.tn / d, fp: sum.fp / d, fn_: sum.fn_ / d })
}

/// Effective matrices for every group of an evaluation input. A hold-out
/// input (K = 1) is returned unchanged whatever `rho` is.
pub fn effective_groups<S: Scalar>(input: &EvaluationInput<S>, rho: S) -> Result<Vec<GroupConfusionMatrix<S>>> {
    input
        .group_labels()
        .iter()
        .map(|label| {
            let folds = input.group_folds(label).expect("validated input");
            effective_cm(&folds, rho)
        })
        .collect()
}

/// `rho = 1/K`.
pub fn rho_fixed<S: Scalar>(k: usize) -> Result<RhoEstimate<S>> {
    check_folds(k)?;
    Ok(RhoEstimate {
        strategy: RhoStrategy::Fixed,
        value: S::one() / S::from_count(k),
        interval: None,
        reference_method: None,
        r_over: None,
    })
}

/// `rho` in `[0, 1/K]`, represented by the midpoint `1/(2K)`.
pub fn rho_interval<S: Scalar>(k: usize) -> Result<RhoEstimate<S>> {
    check_folds(k)?;
    let hi = S::one() / S::from_count(k);
    Ok(RhoEstimate {
        strategy: RhoStrategy::Interval,
        value: hi / S::from_count(2),
        interval: Some((S::zero(), hi)),
        reference_method: None,
        r_over: None,
    })
}

/// Unbiased overestimate of the K-fold CV variance from M half-split pairs:
/// `sum (mu - mu_c)^2 / (2M)`.
pub fn sigma_over<S: Scalar>(pairs: &[HalfSplitPair<S>]) -> Result<S> {
    if pairs.is_empty() {
        return Err(Error::input("variance overestimate needs at least one half-split pair"));
    }
    let sum = pairs.iter().fold(S::zero(), |acc, p| {
        let d = p.mu - p.mu_c;
        acc + d * d
    });
    Ok(sum / S::from_count(2 * pairs.len()))
}

/// Ratio of overestimated variances, reference over target.
///
/// Two identical zero variances give 1; a zero target variance alone is an
/// error because the ratio is unbounded.
pub fn r_over<S: Scalar>(sigma_reference: S, sigma_target: S) -> Result<S> {
    if sigma_reference.is_negative() || sigma_target.is_negative() {
        return Err(Error::input("variance estimates must be nonnegative"));
    }
    if sigma_target == S::zero() {
        if sigma_reference == S::zero() {
            return Ok(S::one());
        }
        return Err(Error::input("target method has zero variance overestimate; variance ratio is unbounded"));
    }
    Ok(sigma_reference / sigma_target)
}

/// Unclamped transfer `((r-1) + r (K-1) rho0) / (K-1)`.
pub fn relative_rho_raw<S: Scalar>(rho0: S, r: S, k: usize) -> Result<S> {
    check_folds(k)?;
    let km1 = S::from_count(k - 1);
    Ok(((r - S::one()) + r * km1 * rho0) / km1)
}

/// Correlation of a target method given a reference estimate and the
/// variance ratio `r_over`. Every resulting value is clamped into `[0, 1]`.
pub fn rho_relative<S: Scalar>(rho0: &RhoEstimate<S>, r_over: S, k: usize) -> Result<RhoEstimate<S>> {
    check_folds(k)?;
    if r_over.partial_cmp(&S::zero()) != Some(std::cmp::Ordering::Greater) {
        return Err(Error::config(format!("r_over must be positive, got {r_over:?}")));
    }
    let transfer = |rho: S| relative_rho_raw(rho, r_over, k).map(|v| v.clamp_to(S::zero(), S::one()));
    let value = transfer(rho0.value)?;
    let (strategy, interval) = match rho0.interval {
        Some((lo, hi)) => (RhoStrategy::RelativeInterval, Some((transfer(lo)?, transfer(hi)?))),
        None => (RhoStrategy::Relative, None),
    };
    Ok(RhoEstimate { strategy, value, interval, reference_method: rho0.reference_method.clone(), r_over: Some(r_over) })
}
