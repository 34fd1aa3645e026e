//! Self-contained experiment driver: synthetic data, toy classifiers,
//! seeded K-fold splitting, repeated-CV sweeps and the disjoint-half
//! variance protocol used to transfer correlations between methods.

mod classifier;
mod cv;
mod dataset;

pub use classifier::{ClassifierSpec, Model};
pub use cv::{
    half_split, half_split_protocol, holdout_split, kfold_split, metric_point, repeated_cv_sweep, run_cv, run_holdout,
    CvOutcome,
};
pub use dataset::{make_synthetic, GroupSpec, SyntheticSpec, TabularDataset};
