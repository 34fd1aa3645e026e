//! Dirichlet-multinomial posterior of per-group confusion matrices and the
//! hierarchical sampler that turns it into joint metric samples.
//!
//! One sample row is produced as follows, independently for every group `s`:
//!
//! 1. draw cell probabilities `pi_s ~ Dir(alpha_post_s)`,
//! 2. draw a confusion matrix `CM_s ~ Multinomial(N_s, pi_s)`,
//!
//! and then every requested metric is evaluated on the family `{CM_s}`.

use rand::Rng;
use rand_distr::{Binomial, Distribution, Gamma};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{column_names, MetricSpec};
use crate::scalar::Scalar;
use crate::seed::stream_rng;
use crate::types::{DirichletPosterior, DirichletPrior, GroupConfusionMatrix, JointSampleMatrix};

/// Default number of posterior samples.
pub const DEFAULT_SAMPLES: usize = 100_000;

/// Conjugate update: `alpha_post = alpha + (tp, tn, fp, fn)`.
pub fn update<S: Scalar>(prior: &DirichletPrior<S>, observed: &GroupConfusionMatrix<S>) -> DirichletPosterior<S> {
    let a = prior.alpha();
    let c = observed.cells();
    DirichletPosterior { group: observed.group.clone(), alpha: [a[0] + c[0], a[1] + c[1], a[2] + c[2], a[3] + c[3]] }
}

/// Integer trial count used when resampling a (possibly effective) matrix:
/// its total rounded half-to-even.
pub fn resample_size<S: Scalar>(cm: &GroupConfusionMatrix<S>) -> u64 {
    let total = cm.total().to_f64_lossy();
    if total.is_finite() && total > 0.0 {
        total.round_ties_even() as u64
    } else {
        0
    }
}

struct GroupSampler {
    gammas: [Gamma<f64>; 4],
    trials: u64,
}

impl GroupSampler {
    fn new(post: &DirichletPosterior<f64>, trials: u64) -> Result<Self> {
        let mk = |a: f64| {
            Gamma::new(a, 1.0)
                .map_err(|e| Error::config(format!("group `{}`: invalid concentration {a}: {e}", post.group)))
        };
        Ok(GroupSampler {
            gammas: [mk(post.alpha[0])?, mk(post.alpha[1])?, mk(post.alpha[2])?, mk(post.alpha[3])?],
            trials,
        })
    }

    fn draw_probabilities<R: Rng>(&self, rng: &mut R) -> [f64; 4] {
        let g = [
            self.gammas[0].sample(rng),
            self.gammas[1].sample(rng),
            self.gammas[2].sample(rng),
            self.gammas[3].sample(rng),
        ];
        let sum: f64 = g.iter().sum();
        if sum > 0.0 {
            g.map(|x| x / sum)
        } else {
            // All four draws underflowed; only possible for tiny concentrations.
            [0.25; 4]
        }
    }

    fn draw_counts<R: Rng>(&self, pi: &[f64; 4], rng: &mut R) -> [f64; 4] {
        // Sequential binomial conditioning.
        let mut counts = [0.0; 4];
        let mut remaining = self.trials;
        let mut mass = 1.0;
        for i in 0..3 {
            if remaining == 0 {
                break;
            }
            let p = if mass > 0.0 { (pi[i] / mass).clamp(0.0, 1.0) } else { 0.0 };
            let k = Binomial::new(remaining, p).expect("p in [0,1]").sample(rng);
            counts[i] = k as f64;
            remaining -= k;
            mass -= pi[i];
        }
        counts[3] = remaining as f64;
        counts
    }
}

/// Draws `t` rows of joint metric samples.
///
/// `posteriors` must be ordered reference group first; `group_totals[s]` is
/// the multinomial trial count of group `s`. Row `t` uses its own generator
/// (stream `t` of `seed`), so the result is identical for any thread count.
pub fn sample_joint(
    posteriors: &[DirichletPosterior<f64>],
    group_totals: &[u64],
    metrics: &[MetricSpec],
    t: usize,
    seed: u64,
) -> Result<JointSampleMatrix> {
    if posteriors.len() != group_totals.len() {
        return Err(Error::config(format!("{} posteriors but {} group totals", posteriors.len(), group_totals.len())));
    }
    sample_rows(posteriors, Some(group_totals), metrics, t, seed)
}

/// Like [`sample_joint`] but evaluates the metrics on the cell
/// probabilities `pi_s` themselves, skipping the multinomial step.
pub fn sample_parameters(
    posteriors: &[DirichletPosterior<f64>],
    metrics: &[MetricSpec],
    t: usize,
    seed: u64,
) -> Result<JointSampleMatrix> {
    sample_rows(posteriors, None, metrics, t, seed)
}

fn sample_rows(
    posteriors: &[DirichletPosterior<f64>],
    group_totals: Option<&[u64]>,
    metrics: &[MetricSpec],
    t: usize,
    seed: u64,
) -> Result<JointSampleMatrix> {
    if t == 0 {
        return Err(Error::config("sample count T must be at least 1"));
    }
    if metrics.is_empty() {
        return Err(Error::config("no metrics requested"));
    }
    for m in metrics {
        m.check_groups(posteriors.len())?;
    }
    let samplers = posteriors
        .iter()
        .enumerate()
        .map(|(i, p)| GroupSampler::new(p, group_totals.map_or(0, |n| n[i])))
        .collect::<Result<Vec<_>>>()?;
    let resample = group_totals.is_some();
    let columns = column_names(metrics);
    let width = columns.len();
    let mut data = vec![0.0; t * width];

    data.par_chunks_mut(width).enumerate().for_each(|(row, out)| {
        let mut rng = stream_rng(seed, row as u64);
        let cms: Vec<[f64; 4]> = samplers
            .iter()
            .map(|s| {
                let pi = s.draw_probabilities(&mut rng);
                if resample {
                    s.draw_counts(&pi, &mut rng)
                } else {
                    pi
                }
            })
            .collect();
        let mut j = 0;
        for m in metrics {
            for v in m.evaluate_cells(&cms) {
                out[j] = v.unwrap_or(f64::NAN);
                j += 1;
            }
        }
    });

    JointSampleMatrix::from_flat(columns, data, Some(seed))
}

/// Mean, standard deviation and central credible interval of one column.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MarginalSummary {
    pub metric: String,
    pub mean: f64,
    pub sd: f64,
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub n_used: usize,
    pub n_flagged: usize,
}

/// Linear-interpolation quantile of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Summary of column `metric`, skipping flagged (NaN) values. `level` is the
/// central interval mass, e.g. 0.95.
pub fn marginal_summary(samples: &JointSampleMatrix, metric: &str, level: f64) -> Result<MarginalSummary> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::config(format!("credible level must be in (0,1), got {level}")));
    }
    let column = samples.column(metric)?;
    let mut values: Vec<f64> = column.iter().copied().filter(|v| !v.is_nan()).collect();
    let n_flagged = column.len() - values.len();
    if values.is_empty() {
        return Err(Error::EmptySummary(metric.to_string()));
    }
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let (mean, sd) = if values[0] == values[values.len() - 1] {
        (values[0], 0.0)
    } else {
        let mean = values.iter().sum::<f64>() / n;
        (mean, (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
    };
    let tail = (1.0 - level) / 2.0;
    Ok(MarginalSummary {
        metric: metric.to_string(),
        mean,
        sd,
        level,
        lower: quantile_sorted(&values, tail),
        upper: quantile_sorted(&values, 1.0 - tail),
        n_used: values.len(),
        n_flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::metric_by_name;

    fn post(g: &str, a: [f64; 4]) -> DirichletPosterior<f64> {
        DirichletPosterior { group: g.into(), alpha: a }
    }

    #[test]
    fn update_examples() {
        let uniform = DirichletPrior::<f64>::uniform();
        let cm = GroupConfusionMatrix::from_cells("g", [3., 2., 1., 4.]).unwrap();
        assert_eq!(update(&uniform, &cm).alpha, [4., 3., 2., 5.]);
        let zero = GroupConfusionMatrix::zero("g");
        assert_eq!(update(&uniform, &zero).alpha, [1.; 4]);
        let two = DirichletPrior::new([2.0; 4]).unwrap();
        let eff = GroupConfusionMatrix::from_cells("g", [10.5, 0., 0., 0.]).unwrap();
        assert_eq!(update(&two, &eff).alpha, [12.5, 2., 2., 2.]);
    }

    #[test]
    fn resample_size_rounds_half_even() {
        let cm = |t: f64| GroupConfusionMatrix::from_cells("g", [t, 0., 0., 0.]).unwrap();
        assert_eq!(resample_size(&cm(52.5)), 52);
        assert_eq!(resample_size(&cm(53.5)), 54);
        assert_eq!(resample_size(&cm(210.52)), 211);
    }

    #[test]
    fn degenerate_concentration() {
        let acc = metric_by_name("accuracy").unwrap();
        let m = sample_joint(&[post("g", [1e9, 1., 1., 1.])], &[100], &[acc], 1, 3).unwrap();
        assert!((m.row(0)[0] - 1.0).abs() < 1e-3);
    }

    #[test]
    fn counts_sum_to_trials() {
        let s = GroupSampler::new(&post("g", [2., 3., 4., 5.]), 37).unwrap();
        let mut rng = stream_rng(1, 0);
        for _ in 0..200 {
            let pi = s.draw_probabilities(&mut rng);
            assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let c = s.draw_counts(&pi, &mut rng);
            assert_eq!(c.iter().sum::<f64>(), 37.0);
        }
    }

    #[test]
    fn fairness_metric_with_one_group_is_config_error() {
        let eop = metric_by_name("eop").unwrap();
        let err = sample_joint(&[post("g", [1.; 4])], &[10], &[eop], 10, 0).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn zero_samples_rejected() {
        let acc = metric_by_name("accuracy").unwrap();
        assert!(sample_joint(&[post("g", [1.; 4])], &[10], &[acc], 0, 0).is_err());
    }

    #[test]
    fn flagged_rows_are_kept() {
        // With N = 1 the sampled matrix often has no actual positives.
        let tpr = metric_by_name("tpr").unwrap();
        let m = sample_joint(&[post("g", [1.; 4])], &[1], &[tpr], 500, 11).unwrap();
        assert_eq!(m.n_rows(), 500);
        let flagged = m.flagged_count();
        assert!(flagged > 0 && flagged < 500);
        let s = marginal_summary(&m, "tpr", 0.95).unwrap();
        assert_eq!(s.n_flagged, flagged);
        assert_eq!(s.n_used + s.n_flagged, 500);
    }

    #[test]
    fn summary_examples() {
        let cols = vec!["x".to_string()];
        let constant = JointSampleMatrix::from_flat(cols.clone(), vec![0.7; 50], None).unwrap();
        let s = marginal_summary(&constant, "x", 0.95).unwrap();
        assert!((s.mean - 0.7).abs() < 1e-15);
        assert_eq!(s.sd, 0.0);
        let binary: Vec<f64> = (0..100).map(|i| (i % 2) as f64).collect();
        let m = JointSampleMatrix::from_flat(cols.clone(), binary, None).unwrap();
        assert_eq!(marginal_summary(&m, "x", 0.9).unwrap().mean, 0.5);
        let all_nan = JointSampleMatrix::from_flat(cols, vec![f64::NAN; 3], None).unwrap();
        assert!(matches!(marginal_summary(&all_nan, "x", 0.95), Err(Error::EmptySummary(_))));
        assert!(marginal_summary(&m, "nope", 0.95).is_err());
    }

    #[test]
    fn quantiles_interpolate() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert_eq!(quantile_sorted(&v, 0.125), 0.5);
        assert_eq!(quantile_sorted(&v, 1.0), 4.0);
    }
}
