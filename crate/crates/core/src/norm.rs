//! Intra-sample score: nuclear norm of the logits matrix.
//!
//! The nuclear norm is computed from a full dense SVD of the valid block.
//! No randomized or truncated path exists.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};
use crate::logits::LogitsMatrix;

/// Relative threshold for counting a singular value toward the effective rank.
pub const RANK_REL_THRESHOLD: f64 = 1e-12;

const SVD_EPS: f64 = 1e-15;
const SVD_MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub nuclear: f64,
    pub frobenius: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
    pub effective_rank: usize,
}

impl NormReport {
    /// `min(valid_rows, V)` for the matrix this report describes.
    pub fn min_dim(&self) -> usize {
        self.singular_values.len()
    }
}

/// Singular values of the valid block, sorted non-increasing.
pub fn singular_values(logits: &LogitsMatrix) -> Result<Vec<f64>> {
    let block = logits.valid_block();
    let svd = block
        .clone()
        .try_svd(false, false, SVD_EPS, SVD_MAX_ITER)
        .ok_or_else(|| UdsError::SvdNoConvergence {
            rows: block.nrows(),
            cols: block.ncols(),
            condition_hint: row_norm_ratio(logits),
        })?;
    let mut sv: Vec<f64> = svd.singular_values.iter().map(|s| s.max(0.0)).collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    Ok(sv)
}

fn row_norm_ratio(logits: &LogitsMatrix) -> f64 {
    let norms: Vec<f64> = (0..logits.valid_rows())
        .map(|r| logits.row(r).iter().map(|v| v * v).sum::<f64>().sqrt())
        .filter(|&n| n > 0.0)
        .collect();
    let max = norms.iter().copied().fold(0.0, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    if norms.is_empty() {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Nuclear norm, Frobenius norm and spectrum of a logits matrix.
pub fn nuclear_norm(logits: &LogitsMatrix) -> Result<NormReport> {
    let singular_values = singular_values(logits)?;
    let nuclear = singular_values.iter().sum();
    let top = singular_values.first().copied().unwrap_or(0.0);
    let effective_rank = singular_values
        .iter()
        .filter(|&&s| s > RANK_REL_THRESHOLD * top)
        .count();
    Ok(NormReport {
        nuclear,
        frobenius: logits.frobenius(),
        singular_values,
        effective_rank,
    })
}

/// Options for turning a logits matrix into the intra-sample score.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntraScoreOptions {
    /// Restrict scoring to these valid positions (e.g. response tokens only).
    pub position_mask: Option<Vec<bool>>,
    /// Divide the nuclear norm by the number of scored positions.
    pub length_normalize: bool,
}

/// `s_intra` for one sample.
pub fn intra_score(logits: &LogitsMatrix, opts: &IntraScoreOptions) -> Result<f64> {
    let report = match &opts.position_mask {
        Some(mask) => nuclear_norm(&logits.select_rows(mask)?)?,
        None => nuclear_norm(logits)?,
    };
    let positions = match &opts.position_mask {
        Some(mask) => mask.iter().filter(|&&m| m).count(),
        None => logits.valid_rows(),
    };
    Ok(if opts.length_normalize {
        report.nuclear / positions as f64
    } else {
        report.nuclear
    })
}

/// Slack in both sides of `||L||_F <= ||L||_* <= sqrt(min_dim) ||L||_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundVerdict {
    /// `nuclear - frobenius`
    pub lower_slack: f64,
    /// `sqrt(min_dim) * frobenius - nuclear`
    pub upper_slack: f64,
    pub tolerance: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

impl BoundVerdict {
    pub fn holds(&self) -> bool {
        self.lower_ok && self.upper_ok
    }
}

pub fn lemma_bounds_check(report: &NormReport, min_dim: usize) -> BoundVerdict {
    let tolerance = 1e-9 * report.frobenius;
    let lower_slack = report.nuclear - report.frobenius;
    let upper_slack = (min_dim as f64).sqrt() * report.frobenius - report.nuclear;
    BoundVerdict {
        lower_slack,
        upper_slack,
        tolerance,
        lower_ok: lower_slack >= -tolerance,
        upper_ok: upper_slack >= -tolerance,
    }
}
