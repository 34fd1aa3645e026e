//! Probabilistic comparison of two methods through the distribution of their
//! metric gaps and a Region of Practical Equivalence (RoPE) around zero.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::metrics::{MetricKind, MetricSpec};
use crate::types::JointSampleMatrix;

/// Default half-width of the RoPE on every axis.
pub const DEFAULT_ROPE_EPS: f64 = 0.01;

/// How the gap of one column is formed from the two methods' samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// `a - b`.
    Difference,
    /// `|b| - |a|`: positive when A is closer to zero.
    AbsoluteCloserToZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GapMode {
    /// Literal differences `a - b` on every column.
    Raw,
    /// Performance columns as `a - b`, fairness columns as `|b| - |a|`, so
    /// that positive always means "A is better".
    Oriented,
}

impl std::str::FromStr for GapMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(GapMode::Raw),
            "oriented" => Ok(GapMode::Oriented),
            other => Err(Error::config(format!("unknown gap mode `{other}` (raw|oriented)"))),
        }
    }
}

/// One orientation per output column of `metrics`.
pub fn orientations(metrics: &[MetricSpec], mode: GapMode) -> Vec<Orientation> {
    metrics
        .iter()
        .flat_map(|m| {
            let o = match (mode, m.kind) {
                (GapMode::Oriented, MetricKind::Fairness) => Orientation::AbsoluteCloserToZero,
                _ => Orientation::Difference,
            };
            std::iter::repeat_n(o, m.arity())
        })
        .collect()
}

/// Rowwise gaps between two independently drawn sample matrices.
/// A gap is NaN whenever either input value is.
pub fn gap_distribution(
    a: &JointSampleMatrix,
    b: &JointSampleMatrix,
    orientation: &[Orientation],
) -> Result<JointSampleMatrix> {
    if a.columns() != b.columns() {
        return Err(Error::input(format!("metric columns differ: {:?} vs {:?}", a.columns(), b.columns())));
    }
    if a.n_rows() != b.n_rows() {
        return Err(Error::input(format!("sample counts differ: {} vs {}", a.n_rows(), b.n_rows())));
    }
    if orientation.len() != a.width() {
        return Err(Error::config(format!("{} orientations for {} columns", orientation.len(), a.width())));
    }
    let data = a
        .as_flat()
        .iter()
        .zip(b.as_flat())
        .enumerate()
        .map(|(i, (&x, &y))| match orientation[i % orientation.len()] {
            Orientation::Difference => x - y,
            Orientation::AbsoluteCloserToZero => y.abs() - x.abs(),
        })
        .collect();
    JointSampleMatrix::from_flat(a.columns().to_vec(), data, None)
}

/// Axis-aligned box `|x_i| <= eps_i` around the origin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rope {
    eps: Vec<f64>,
}

impl Rope {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::config("RoPE needs at least one dimension"));
        }
        if let Some(e) = eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::config(format!("RoPE half-widths must be positive, got {e}")));
        }
        Ok(Rope { eps })
    }

    /// RoPE over `(theta, eta)` half-widths.
    pub fn from_parts(eps_theta: &[f64], eps_eta: &[f64]) -> Result<Self> {
        Self::new(eps_theta.iter().chain(eps_eta).copied().collect())
    }

    pub fn uniform(dim: usize, eps: f64) -> Result<Self> {
        Self::new(vec![eps; dim])
    }

    /// Parses `"0.01,0.02"`; the number of entries must equal `dim`.
    pub fn parse(text: &str, dim: usize) -> Result<Self> {
        let eps = text
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| Error::config(format!("invalid RoPE entry `{s}`"))))
            .collect::<Result<Vec<_>>>()?;
        if eps.len() != dim {
            return Err(Error::config(format!("RoPE has {} entries but there are {dim} metric columns", eps.len())));
        }
        Self::new(eps)
    }

    pub fn eps(&self) -> &[f64] {
        &self.eps
    }

    pub fn dim(&self) -> usize {
        self.eps.len()
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.eps).all(|(v, e)| v.abs() <= *e)
    }

    /// Per-axis symbol: `+` above the band, `-` below it, `0` inside.
    pub fn pattern(&self, x: &[f64]) -> String {
        x.iter()
            .zip(&self.eps)
            .map(|(v, e)| {
                if *v > *e {
                    '+'
                } else if *v < -*e {
                    '-'
                } else {
                    '0'
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ComparisonReport {
    pub columns: Vec<String>,
    pub rope: Vec<f64>,
    /// P(A and B practically equivalent): gap inside the RoPE.
    pub p_equivalent: f64,
    /// P(A >> B): every gap coordinate positive and the gap outside the RoPE.
    pub p_a_outperforms: f64,
    /// P(B >> A): every gap coordinate negative and the gap outside the RoPE.
    pub p_b_outperforms: f64,
    /// Probability of every non-RoPE cell, keyed by its per-axis pattern.
    /// Together with `p_equivalent` these partition the unflagged samples.
    pub orthant_probs: BTreeMap<String, f64>,
    pub n_used: usize,
    pub n_flagged: usize,
    #[serde(skip)]
    pub gap_samples: JointSampleMatrix,
}

/// Classifies every gap row against the RoPE.
pub fn compare(gap: &JointSampleMatrix, rope: &Rope) -> Result<ComparisonReport> {
    if rope.dim() != gap.width() {
        return Err(Error::config(format!("RoPE has {} dimensions, gaps have {}", rope.dim(), gap.width())));
    }
    let inside = "0".repeat(gap.width());
    let mut cells: BTreeMap<String, usize> = BTreeMap::new();
    let (mut n_used, mut n_flagged, mut n_inside, mut a_wins, mut b_wins) = (0, 0, 0, 0, 0);
    for row in gap.rows() {
        if row.iter().any(|v| v.is_nan()) {
            n_flagged += 1;
            continue;
        }
        n_used += 1;
        if rope.contains(row) {
            n_inside += 1;
            continue;
        }
        if row.iter().all(|v| *v > 0.0) {
            a_wins += 1;
        } else if row.iter().all(|v| *v < 0.0) {
            b_wins += 1;
        }
        *cells.entry(rope.pattern(row)).or_default() += 1;
    }
    debug_assert!(!cells.contains_key(&inside));
    if n_used == 0 {
        return Err(Error::EmptySummary("gap".to_string()));
    }
    let p = |c: usize| c as f64 / n_used as f64;
    Ok(ComparisonReport {
        columns: gap.columns().to_vec(),
        rope: rope.eps().to_vec(),
        p_equivalent: p(n_inside),
        p_a_outperforms: p(a_wins),
        p_b_outperforms: p(b_wins),
        orthant_probs: cells.into_iter().map(|(k, c)| (k, p(c))).collect(),
        n_used,
        n_flagged,
        gap_samples: gap.clone(),
    })
}
