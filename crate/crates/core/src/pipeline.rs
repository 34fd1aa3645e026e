//! Glue from observed matrices to posterior samples: reference-group
//! ordering, effective matrices for K-fold input, conjugate update and the
//! hierarchical sampler.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{PriorConfig, ReferenceRho, RhoConfig};
use crate::kfold::{effective_groups, rho_fixed, rho_interval, rho_relative, variance_inflation, RhoEstimate};
use crate::metrics::MetricSpec;
use crate::posterior::{resample_size, sample_joint, update};
use crate::types::{DirichletPosterior, EvaluationInput, GroupConfusionMatrix, JointSampleMatrix};

/// The reference correlation named by `reference` for `k` folds.
pub fn reference_rho(reference: ReferenceRho, k: usize) -> Result<RhoEstimate<f64>> {
    match reference {
        ReferenceRho::Fixed => rho_fixed(k),
        ReferenceRho::Interval => rho_interval(k),
    }
}

/// Turns a configured strategy into an estimate for `k` folds.
pub fn resolve_rho(config: &RhoConfig, k: usize) -> Result<RhoEstimate<f64>> {
    match config {
        RhoConfig::Fixed => rho_fixed(k),
        RhoConfig::Interval => rho_interval(k),
        RhoConfig::Value { value } => RhoEstimate::given(*value),
        RhoConfig::Relative { r_over, reference } => rho_relative(&reference_rho(*reference, k)?, *r_over, k),
    }
}

/// Posterior of every group, ready for sampling.
#[derive(Debug, Clone, Serialize)]
pub struct PosteriorModel {
    /// Matrices used for the update (effective ones for K-fold input),
    /// reference group first.
    pub observed: Vec<GroupConfusionMatrix<f64>>,
    pub posteriors: Vec<DirichletPosterior<f64>>,
    /// Multinomial trial count per group.
    pub totals: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<RhoEstimate<f64>>,
    /// Factor `1 / (1 + (K-1) rho)` applied to the summed fold counts.
    pub effective_scale: f64,
    pub k: usize,
}

impl PosteriorModel {
    /// Builds the posterior of `input`. `rho` is required when the input has
    /// more than one fold and ignored otherwise.
    pub fn fit(
        input: &EvaluationInput<f64>,
        prior: &PriorConfig,
        reference: &str,
        rho: Option<RhoEstimate<f64>>,
    ) -> Result<Self> {
        let input = input.clone().with_reference_first(reference)?;
        let k = input.k();
        let (observed, rho, scale) = if k == 1 {
            (input.summed_groups(), None, 1.0)
        } else {
            let rho = rho.ok_or_else(|| Error::config(format!("K-fold input with K = {k} needs a rho strategy")))?;
            let eff = effective_groups(&input, rho.value)?;
            let scale = 1.0 / variance_inflation(k, rho.value);
            (eff, Some(rho), scale)
        };
        let posteriors =
            observed.iter().map(|cm| Ok(update(&prior.for_group(&cm.group)?, cm))).collect::<Result<Vec<_>>>()?;
        let totals = observed.iter().map(resample_size).collect();
        Ok(PosteriorModel { observed, posteriors, totals, rho, effective_scale: scale, k })
    }

    pub fn sample(&self, metrics: &[MetricSpec], t: usize, seed: u64) -> Result<JointSampleMatrix> {
        sample_joint(&self.posteriors, &self.totals, metrics, t, seed)
    }
}
