//! End-to-end experiments built on the harness: transferring a correlation
//! from a reference classifier, and the HDR coverage study over repeated
//! cross-validations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::harness::{half_split_protocol, repeated_cv_sweep, run_cv, ClassifierSpec, TabularDataset};
use crate::hdr::fit_hdr;
use crate::io::{PriorConfig, ReferenceRho};
use crate::kfold::{r_over, rho_relative, sigma_over, HalfSplitPair, RhoEstimate};
use crate::metrics::{column_names, MetricSpec};
use crate::pipeline::{reference_rho, PosteriorModel};
use crate::seed::derive_seed;

/// Default number of half-split repetitions.
pub const DEFAULT_HALF_SPLITS: usize = 5;

#[derive(Debug, Clone, Serialize)]
pub struct RhoReport {
    pub estimate: RhoEstimate<f64>,
    pub reference_classifier: String,
    pub target_classifier: String,
    pub metric: String,
    pub k: usize,
    pub m: usize,
    pub sigma_over_reference: f64,
    pub sigma_over_target: f64,
    pub r_over: f64,
    pub pairs_reference: Vec<HalfSplitPair<f64>>,
    pub pairs_target: Vec<HalfSplitPair<f64>>,
}

/// Estimates the target classifier's correlation relative to a reference.
///
/// Both classifiers run the half-split protocol with the same seed, so they
/// are evaluated on identical halves and folds.
#[allow(clippy::too_many_arguments)]
pub fn estimate_rho(
    data: &TabularDataset,
    target: &ClassifierSpec,
    reference: &ClassifierSpec,
    k: usize,
    m: usize,
    metric: &MetricSpec,
    reference_group: &str,
    reference_strategy: ReferenceRho,
    seed: u64,
) -> Result<RhoReport> {
    let rho0 = reference_rho(reference_strategy, k)?;
    let protocol_seed = derive_seed(seed, "half-split-protocol", 0);
    let pairs_reference = half_split_protocol(data, reference, k, m, metric, reference_group, protocol_seed)?;
    let pairs_target = half_split_protocol(data, target, k, m, metric, reference_group, protocol_seed)?;
    let sigma_ref = sigma_over(&pairs_reference)?;
    let sigma_target = sigma_over(&pairs_target)?;
    let ratio = r_over(sigma_ref, sigma_target)?;
    let mut estimate = rho_relative(&rho0, ratio, k)?;
    estimate.reference_method = Some(reference.name().to_string());
    Ok(RhoReport {
        estimate,
        reference_classifier: reference.name().to_string(),
        target_classifier: target.name().to_string(),
        metric: metric.name.to_string(),
        k,
        m,
        sigma_over_reference: sigma_ref,
        sigma_over_target: sigma_target,
        r_over: ratio,
        pairs_reference,
        pairs_target,
    })
}

/// Correlation strategies compared by the coverage study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverageStrategy {
    /// `rho = 1/K`.
    Fixed,
    /// Midpoint of `[0, 1/K]`.
    Interval,
    /// Relative transfer of `1/K`.
    Relative,
    /// Relative transfer of `[0, 1/K]`.
    RelativeInterval,
}

impl CoverageStrategy {
    pub const ALL: [CoverageStrategy; 4] = [
        CoverageStrategy::Fixed,
        CoverageStrategy::Interval,
        CoverageStrategy::Relative,
        CoverageStrategy::RelativeInterval,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CoverageStrategy::Fixed => "fixed",
            CoverageStrategy::Interval => "interval",
            CoverageStrategy::Relative => "relative",
            CoverageStrategy::RelativeInterval => "relative_interval",
        }
    }

    fn is_relative(self) -> bool {
        matches!(self, CoverageStrategy::Relative | CoverageStrategy::RelativeInterval)
    }
}

impl std::str::FromStr for CoverageStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CoverageStrategy::ALL.into_iter().find(|c| c.name() == s.trim()).ok_or_else(|| {
            Error::config(format!("unknown rho strategy `{s}` (fixed|interval|relative|relative_interval)"))
        })
    }
}

/// Settings of the coverage study.
#[derive(Debug, Clone)]
pub struct CoverageSettings {
    pub k: usize,
    pub repeats: usize,
    pub half_splits: usize,
    pub samples: usize,
    pub coverage: f64,
    pub resolution: usize,
    pub strategies: Vec<CoverageStrategy>,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageRow {
    pub strategy: String,
    pub rho: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_interval: Option<(f64, f64)>,
    pub area: f64,
    /// Percentage of repeated-CV points inside the HDR.
    pub pct_res: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub columns: Vec<String>,
    pub k: usize,
    pub repeats: usize,
    pub coverage: f64,
    pub anchor_point: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_over: Option<f64>,
    pub rows: Vec<CoverageRow>,
}

/// For one anchor CV, fits the posterior and its HDR under each correlation
/// strategy, then measures what share of `repeats` fresh CVs fall inside.
///
/// Strategies: `1/K`, the `[0, 1/K]` midpoint, and the relative transfer of
/// both (with `r_over` from the half-split protocol against `reference`).
pub fn coverage_experiment(
    data: &TabularDataset,
    target: &ClassifierSpec,
    reference: &ClassifierSpec,
    metrics: &[MetricSpec],
    reference_group: &str,
    settings: &CoverageSettings,
) -> Result<CoverageReport> {
    let k = settings.k;
    let anchor = run_cv(data, target, k, derive_seed(settings.seed, "anchor", 0))?;
    let anchor_point = crate::harness::metric_point(&anchor.input, metrics, reference_group)?;
    let points = repeated_cv_sweep(data, target, k, settings.repeats, metrics, reference_group, settings.seed)?;

    if settings.strategies.is_empty() {
        return Err(Error::config("no rho strategy selected"));
    }
    let ratio = if settings.strategies.iter().any(|s| s.is_relative()) {
        let scalar_metric = metrics
            .iter()
            .find(|m| m.arity() == 1)
            .ok_or_else(|| Error::config("relative strategies need a one-dimensional metric"))?;
        let report = estimate_rho(
            data,
            target,
            reference,
            k,
            settings.half_splits,
            scalar_metric,
            reference_group,
            ReferenceRho::Fixed,
            settings.seed,
        )?;
        Some(report.r_over)
    } else {
        None
    };

    let fixed = reference_rho(ReferenceRho::Fixed, k)?;
    let interval = reference_rho(ReferenceRho::Interval, k)?;
    let strategies = settings
        .strategies
        .iter()
        .map(|&s| {
            let rho = match s {
                CoverageStrategy::Fixed => fixed.clone(),
                CoverageStrategy::Interval => interval.clone(),
                CoverageStrategy::Relative => rho_relative(&fixed, ratio.unwrap_or(1.0), k)?,
                CoverageStrategy::RelativeInterval => rho_relative(&interval, ratio.unwrap_or(1.0), k)?,
            };
            Ok((s.name(), rho))
        })
        .collect::<Result<Vec<_>>>()?;

    let posterior_seed = derive_seed(settings.seed, "posterior", 0);
    let mut rows = Vec::with_capacity(strategies.len());
    for (name, rho) in strategies {
        let model = PosteriorModel::fit(&anchor.input, &PriorConfig::default(), reference_group, Some(rho.clone()))?;
        let samples = model.sample(metrics, settings.samples, posterior_seed)?;
        let region = fit_hdr(&samples, settings.coverage, settings.resolution)?;
        let pct = 100.0 * region.coverage_fraction(&points)?;
        rows.push(CoverageRow {
            strategy: name.to_string(),
            rho: rho.value,
            rho_interval: rho.interval,
            area: region.area,
            pct_res: pct,
        });
    }
    Ok(CoverageReport {
        columns: column_names(metrics),
        k,
        repeats: settings.repeats,
        coverage: settings.coverage,
        anchor_point,
        r_over: ratio,
        rows,
    })
}
