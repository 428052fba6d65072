//! First-order links between a parameter step, the logits it perturbs and
//! the loss change it causes, plus the before/after loss quadrant table.

use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};
use crate::logits::{LogitsMatrix, ProbMatrix};
use crate::toy::{OptimizerState, Sample, ToyModel};

/// Per-row one-hot labels; rows without a label contribute nothing.
#[derive(Debug, Clone, PartialEq)]
pub struct OneHotLabels {
    cols: usize,
    targets: Vec<Option<u32>>,
}

impl OneHotLabels {
    pub fn new(cols: usize, targets: Vec<Option<u32>>) -> Result<Self> {
        if let Some(t) = targets.iter().flatten().find(|&&t| t as usize >= cols) {
            return Err(UdsError::TokenOutOfRange {
                token: *t,
                vocab: cols,
            });
        }
        Ok(Self { cols, targets })
    }

    /// Reads a dense `rows x cols` 0/1 matrix; every row must be one-hot or
    /// all zero.
    pub fn from_dense(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(UdsError::Shape("label matrix size mismatch".into()));
        }
        let targets = (0..rows)
            .map(|r| {
                let row = &data[r * cols..(r + 1) * cols];
                let ones: Vec<usize> = (0..cols).filter(|&c| row[c] == 1.0).collect();
                let zeros = row.iter().filter(|&&x| x == 0.0).count();
                match (ones.len(), zeros + ones.len() == cols) {
                    (0, true) => Ok(None),
                    (1, true) => Ok(Some(ones[0] as u32)),
                    _ => Err(UdsError::Shape(format!("label row {r} is not one-hot"))),
                }
            })
            .collect::<Result<_>>()?;
        Ok(Self { cols, targets })
    }

    /// Next-token labels on the sample's target positions.
    pub fn for_sample(sample: &Sample, cols: usize) -> Result<Self> {
        let targets = sample
            .response_mask()
            .into_iter()
            .enumerate()
            .map(|(n, on)| on.then(|| sample.tokens[n + 1]))
            .collect();
        Self::new(cols, targets)
    }

    pub fn rows(&self) -> usize {
        self.targets.len()
    }

    pub fn target(&self, row: usize) -> Option<u32> {
        self.targets[row]
    }

    pub fn labelled_rows(&self) -> usize {
        self.targets.iter().flatten().count()
    }
}

/// `<P - Y, dL>` over the valid, labelled rows.
pub fn predicted_loss_delta(
    delta_logits: &LogitsMatrix,
    probs: &ProbMatrix,
    labels: &OneHotLabels,
) -> Result<f64> {
    let shape = |r: usize, c: usize| format!("{r}x{c}");
    if delta_logits.rows() != probs.rows()
        || delta_logits.cols() != probs.cols()
        || labels.rows() != probs.rows()
        || labels.cols != probs.cols()
    {
        return Err(UdsError::DimensionMismatch {
            expected: shape(probs.rows(), probs.cols()),
            actual: format!(
                "dL {}, labels {}",
                shape(delta_logits.rows(), delta_logits.cols()),
                shape(labels.rows(), labels.cols)
            ),
        });
    }
    let mut total = 0.0;
    for r in 0..probs.valid_rows() {
        let Some(y) = labels.target(r) else { continue };
        let p = probs.row(r);
        let d = delta_logits.row(r);
        total += p.iter().zip(d).map(|(pi, di)| pi * di).sum::<f64>() - d[y as usize];
    }
    Ok(total)
}

fn jvp_matrix(model: &ToyModel, tokens: &[u32], step: &[f64]) -> Result<LogitsMatrix> {
    let raw = model.jvp(tokens, step)?;
    LogitsMatrix::from_dense(tokens.len(), model.spec().vocab, raw)
}

/// `dL ~ -(lr / B) * J * sum_j g_j` for an SGD step on a batch of `B`
/// per-sample gradients.
pub fn delta_logits_sgd(
    model: &ToyModel,
    tokens: &[u32],
    batch_grads: &[Vec<f64>],
    lr: f64,
) -> Result<LogitsMatrix> {
    if batch_grads.is_empty() {
        return Err(UdsError::Shape("empty gradient batch".into()));
    }
    let p = model.param_count();
    let mut step = vec![0.0; p];
    for g in batch_grads {
        if g.len() != p {
            return Err(UdsError::DimensionMismatch {
                expected: format!("{p} gradient entries"),
                actual: format!("{}", g.len()),
            });
        }
        if g.iter().any(|x| !x.is_finite()) {
            return Err(UdsError::NonFiniteUpdate { what: "gradient".into() });
        }
        for (s, x) in step.iter_mut().zip(g) {
            *s += x;
        }
    }
    let scale = -lr / batch_grads.len() as f64;
    for s in &mut step {
        *s *= scale;
    }
    jvp_matrix(model, tokens, &step)
}

/// `dL ~ -lr * J * m_hat / (sqrt(v_hat) + eps)` for the Adam step the state
/// would take on mean batch gradient `grad`.
pub fn delta_logits_adam(
    model: &ToyModel,
    tokens: &[u32],
    state: &OptimizerState,
    grad: &[f64],
    lr: f64,
) -> Result<LogitsMatrix> {
    let step = state.step_delta_with_lr(grad, lr)?;
    jvp_matrix(model, tokens, &step)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossDeltaRecord {
    pub step: usize,
    pub sample_id: String,
    pub loss_before: f64,
    pub loss_after: f64,
    pub predicted_delta: f64,
    pub actual_delta: f64,
    pub nuclear: f64,
}

impl LossDeltaRecord {
    pub fn new(
        step: usize,
        sample_id: impl Into<String>,
        loss_before: f64,
        loss_after: f64,
        predicted_delta: f64,
        nuclear: f64,
    ) -> Self {
        Self {
            step,
            sample_id: sample_id.into(),
            loss_before,
            loss_after,
            predicted_delta,
            actual_delta: loss_after - loss_before,
            nuclear,
        }
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(UdsError::Shape(format!(
            "correlation needs >= 3 paired values, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(UdsError::Shape("zero variance; correlation undefined".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

/// Pearson correlation between loss reduction `-actual_delta` and the
/// nuclear norm.
pub fn correlation_probe(records: &[LossDeltaRecord]) -> Result<f64> {
    let reduction: Vec<f64> = records.iter().map(|r| -r.actual_delta).collect();
    let nuclear: Vec<f64> = records.iter().map(|r| r.nuclear).collect();
    pearson(&reduction, &nuclear)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityClass {
    TooHard,
    Informative,
    Overfitted,
    TooEasy,
}

/// A loss is "high" when strictly above `cutoff`.
pub fn classify_utility(loss_before: f64, loss_after: f64, cutoff: f64) -> UtilityClass {
    match (loss_before > cutoff, loss_after > cutoff) {
        (true, true) => UtilityClass::TooHard,
        (true, false) => UtilityClass::Informative,
        (false, true) => UtilityClass::Overfitted,
        (false, false) => UtilityClass::TooEasy,
    }
}

/// Median of the step-start losses, the default quadrant cutoff.
pub fn median_cutoff(losses: &[f64]) -> Option<f64> {
    if losses.is_empty() {
        return None;
    }
    let mut v = losses.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len().is_multiple_of(2) { 0.5 * (v[m - 1] + v[m]) } else { v[m] })
}
