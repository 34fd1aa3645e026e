//! Bayesian uncertainty for classifier performance and fairness metrics.
//!
//! Per-group confusion matrices get a Dirichlet-Multinomial posterior.
//! K-fold results are first folded into an effective confusion matrix whose
//! size reflects the correlation between folds. Posterior samples of any
//! metric vector can then be summarized, compared between two methods
//! against a region of practical equivalence, or enclosed in a highest
//! density region.
//!
//! The algebraic core (confusion matrices, priors, the effective-matrix
//! arithmetic, metric formulas) is generic over [`Scalar`], so it runs both
//! in `f64` and in exact rationals. Sampling, HDR estimation and the
//! experiment harness work in `f64`.

pub mod cli;
pub mod comparison;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod hdr;
pub mod io;
pub mod kfold;
pub mod metrics;
pub mod pipeline;
pub mod posterior;
pub mod scalar;
pub mod seed;
pub mod types;

pub use comparison::{compare, gap_distribution, ComparisonReport, GapMode, Orientation, Rope};
pub use error::{Error, Result};
pub use hdr::{fit_hdr, HdrRegion};
pub use kfold::{effective_cm, RhoEstimate, RhoStrategy};
pub use metrics::{builtin_metrics, metric_by_name, parse_metric_list, MetricKind, MetricSpec};
pub use pipeline::PosteriorModel;
pub use posterior::{marginal_summary, sample_joint, sample_parameters, update, MarginalSummary};
pub use scalar::Scalar;
pub use types::{
    DirichletPosterior, DirichletPrior, EvaluationInput, EvaluationSource, GroupConfusionMatrix, JointSampleMatrix,
};

pub type ConfusionMatrix = GroupConfusionMatrix<f64>;
pub type ExactConfusionMatrix = GroupConfusionMatrix<num_rational::Rational64>;
pub type Prior = DirichletPrior<f64>;
pub type ExactPrior = DirichletPrior<num_rational::Rational64>;
pub type Posterior = DirichletPosterior<f64>;
pub type ExactPosterior = DirichletPosterior<num_rational::Rational64>;
pub type Input = EvaluationInput<f64>;
pub type Rho = RhoEstimate<f64>;
