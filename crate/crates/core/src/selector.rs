//! Score combination, top-K selection and the per-batch selection step.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::{diversity_distance, MemoryBuffer};
use crate::error::{Result, UdsError};
use crate::logits::LogitsMatrix;
use crate::norm::{intra_score, IntraScoreOptions};
use crate::projection::{Embedding, ProjectionPair};

/// Default trade-off factor between utility and diversity.
pub const DEFAULT_ALPHA: f64 = 3e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scorer {
    Uds,
    MaxLoss,
    MaxGrad,
    Random,
    Regular,
}

impl Scorer {
    pub const ALL: [Scorer; 5] = [
        Scorer::Uds,
        Scorer::MaxLoss,
        Scorer::MaxGrad,
        Scorer::Random,
        Scorer::Regular,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scorer::Uds => "uds",
            Scorer::MaxLoss => "maxloss",
            Scorer::MaxGrad => "maxgrad",
            Scorer::Random => "random",
            Scorer::Regular => "regular",
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Scorer {
    type Err = UdsError;

    fn from_str(s: &str) -> Result<Self> {
        Scorer::ALL
            .into_iter()
            .find(|sc| sc.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UdsError::Config(format!("unknown scorer {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    pub batch_size: usize,
    pub select_k: usize,
    pub alpha: f64,
    pub buffer_capacity: usize,
    pub d1: usize,
    pub d2: usize,
    pub seed: u64,
    pub scorer: Scorer,
    /// Score only response positions.
    pub response_only: bool,
    pub length_normalize: bool,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self {
            batch_size: 8,
            select_k: 4,
            alpha: DEFAULT_ALPHA,
            buffer_capacity: 1024,
            d1: 32,
            d2: 32,
            seed: 0,
            scorer: Scorer::Uds,
            response_only: false,
            length_normalize: false,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        let (b, k, m) = (self.batch_size, self.select_k, self.buffer_capacity);
        if k == 0 || k > b {
            return Err(UdsError::Config(format!("need 1 <= K <= B, got K = {k}, B = {b}")));
        }
        if k > m {
            return Err(UdsError::Config(format!(
                "K = {k} exceeds buffer capacity M = {m}"
            )));
        }
        if b > m {
            return Err(UdsError::Config(format!("need B <= M, got B = {b}, M = {m}")));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return Err(UdsError::Config(format!("alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if self.d1 == 0 || self.d2 == 0 {
            return Err(UdsError::Config("projection dimensions must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub step: usize,
    pub sample_id: String,
    pub scorer: Scorer,
    pub s_intra: f64,
    pub s_inter: f64,
    pub alpha: f64,
    pub s_total: f64,
    pub selected: bool,
}

pub fn combine_scores(s_intra: f64, s_inter: f64, alpha: f64) -> f64 {
    s_intra + alpha * s_inter
}

/// Indices of the `k` largest values, lower index first on ties, returned
/// in ascending index order.
pub fn top_k_indices(values: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > values.len() {
        return Err(UdsError::Config(format!(
            "k = {k} outside [1, {}]",
            values.len()
        )));
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    order.truncate(k);
    order.sort_unstable();
    Ok(order)
}

pub fn select_topk(scores: &[ScoreRecord], k: usize) -> Result<Vec<usize>> {
    let totals: Vec<f64> = scores.iter().map(|r| r.s_total).collect();
    top_k_indices(&totals, k)
}

/// One candidate in a batch.
#[derive(Debug, Clone)]
pub struct Candidate {
    pub id: String,
    pub logits: LogitsMatrix,
    /// Valid positions to score when `response_only` is on.
    pub response_mask: Option<Vec<bool>>,
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub selected: Vec<usize>,
    pub records: Vec<ScoreRecord>,
    pub embeddings: Vec<Embedding>,
}

/// One selection step: score every candidate against the buffer as it was
/// at step start, keep the top `K`, then push only their embeddings.
pub fn uds_step(
    step: usize,
    batch: &[Candidate],
    config: &SelectionConfig,
    buffer: &mut MemoryBuffer,
    pair: &ProjectionPair,
) -> Result<StepOutcome> {
    if batch.len() != config.batch_size {
        return Err(UdsError::Config(format!(
            "batch holds {} candidates, expected B = {}",
            batch.len(),
            config.batch_size
        )));
    }
    if config.select_k > buffer.capacity() {
        return Err(UdsError::Config(format!(
            "K = {} exceeds buffer capacity {}",
            config.select_k,
            buffer.capacity()
        )));
    }
    if buffer.dim().is_some_and(|d| d != pair.embedding_dim()) {
        return Err(UdsError::DimensionMismatch {
            expected: format!("buffer dimension {}", pair.embedding_dim()),
            actual: format!("{:?}", buffer.dim()),
        });
    }
    let frozen: &MemoryBuffer = buffer;
    let scored: Vec<(f64, f64, Embedding)> = batch
        .par_iter()
        .map(|c| {
            let opts = IntraScoreOptions {
                position_mask: if config.response_only { c.response_mask.clone() } else { None },
                length_normalize: config.length_normalize,
            };
            let wrap = |e: UdsError| UdsError::Step {
                step,
                sample: c.id.clone(),
                source: Box::new(e),
            };
            let s_intra = intra_score(&c.logits, &opts).map_err(wrap)?;
            let z = pair
                .project(&c.logits)
                .map_err(wrap)?
                .with_source(step, c.id.clone());
            let s_inter = diversity_distance(&z, frozen).map_err(wrap)?;
            Ok((s_intra, s_inter, z))
        })
        .collect::<Result<_>>()?;

    let mut records: Vec<ScoreRecord> = batch
        .iter()
        .zip(&scored)
        .map(|(c, (s_intra, s_inter, _))| ScoreRecord {
            step,
            sample_id: c.id.clone(),
            scorer: Scorer::Uds,
            s_intra: *s_intra,
            s_inter: *s_inter,
            alpha: config.alpha,
            s_total: combine_scores(*s_intra, *s_inter, config.alpha),
            selected: false,
        })
        .collect();
    let selected = select_topk(&records, config.select_k)?;
    for &i in &selected {
        records[i].selected = true;
    }
    let embeddings: Vec<Embedding> = scored.into_iter().map(|(_, _, z)| z).collect();
    let chosen: Vec<Embedding> = selected.iter().map(|&i| embeddings[i].clone()).collect();
    buffer.push_selected(chosen)?;
    Ok(StepOutcome {
        selected,
        records,
        embeddings,
    })
}

/// Side inputs some baselines need.
#[derive(Debug, Clone, Copy, Default)]
pub struct BaselineInputs<'a> {
    pub losses: Option<&'a [f64]>,
    pub grad_norms: Option<&'a [f64]>,
}

/// Scores a batch with a reference policy. `s_total` carries the policy
/// score directly (`s_inter = 0`, `alpha = 0`).
pub fn baseline_score<R: Rng + ?Sized>(
    step: usize,
    ids: &[String],
    inputs: BaselineInputs<'_>,
    scorer: Scorer,
    rng: &mut R,
) -> Result<Vec<ScoreRecord>> {
    let need = |side: Option<&[f64]>, name: &str| -> Result<Vec<f64>> {
        let v = side.ok_or_else(|| UdsError::MissingSideInput {
            scorer: scorer.to_string(),
            input: name.to_string(),
        })?;
        if v.len() != ids.len() {
            return Err(UdsError::DimensionMismatch {
                expected: format!("{} {name}", ids.len()),
                actual: format!("{}", v.len()),
            });
        }
        Ok(v.to_vec())
    };
    let values = match scorer {
        Scorer::MaxLoss => need(inputs.losses, "losses")?,
        Scorer::MaxGrad => need(inputs.grad_norms, "grad_norms")?,
        Scorer::Random => (0..ids.len()).map(|_| rng.random::<f64>()).collect(),
        Scorer::Regular => vec![1.0; ids.len()],
        Scorer::Uds => {
            return Err(UdsError::Config(
                "uds scores come from uds_step, not baseline_score".into(),
            ))
        }
    };
    Ok(ids
        .iter()
        .zip(values)
        .map(|(id, v)| ScoreRecord {
            step,
            sample_id: id.clone(),
            scorer,
            s_intra: v,
            s_inter: 0.0,
            alpha: 0.0,
            s_total: v,
            selected: false,
        })
        .collect())
}

/// Applies the selection rule for a baseline: `Regular` keeps everything,
/// the others take the top `k`.
pub fn select_baseline(records: &mut [ScoreRecord], k: usize) -> Result<Vec<usize>> {
    let selected = match records.first().map(|r| r.scorer) {
        Some(Scorer::Regular) => (0..records.len()).collect(),
        _ => select_topk(records, k)?,
    };
    for &i in &selected {
        records[i].selected = true;
    }
    Ok(selected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("s{i}")).collect()
    }

    /// Exhaustive arg max of the subset sum, ties to the lexicographically
    /// smallest index set.
    fn brute_force(values: &[f64], k: usize) -> Vec<usize> {
        let n = values.len();
        let mut best: Option<(f64, Vec<usize>)> = None;
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let set: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let sum: f64 = set.iter().map(|&i| values[i]).sum();
            let better = match &best {
                None => true,
                Some((b, bs)) => sum > *b || (sum == *b && set < *bs),
            };
            if better {
                best = Some((sum, set));
            }
        }
        best.unwrap().1
    }

    #[test]
    fn combine_examples() {
        assert_eq!(combine_scores(10.0, 5.0, 0.0), 10.0);
        assert_eq!(combine_scores(10.0, 5.0, 2.0), 20.0);
        let t = combine_scores(300.0, 40.0, 1.5e-3);
        assert!((t - 300.0) / t < 0.01);
    }

    #[test]
    fn topk_examples() {
        assert_eq!(top_k_indices(&[3.0, 1.0, 4.0, 1.0, 5.0], 2).unwrap(), vec![2, 4]);
        assert_eq!(top_k_indices(&[7.0; 6], 3).unwrap(), vec![0, 1, 2]);
        assert_eq!(top_k_indices(&[1.0, 2.0, 3.0], 3).unwrap(), vec![0, 1, 2]);
        assert!(top_k_indices(&[1.0], 0).is_err());
        assert!(top_k_indices(&[1.0], 2).is_err());
    }

    #[test]
    fn topk_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..300 {
            let b = rng.random_range(1..=8);
            let k = rng.random_range(1..=b);
            // Coarse values so ties happen.
            let v: Vec<f64> = (0..b).map(|_| rng.random_range(0..4) as f64).collect();
            assert_eq!(top_k_indices(&v, k).unwrap(), brute_force(&v, k), "{v:?} k={k}");
        }
    }

    #[test]
    fn config_validation() {
        let ok = SelectionConfig::default();
        ok.validate().unwrap();
        for bad in [
            SelectionConfig { select_k: 0, ..ok.clone() },
            SelectionConfig { select_k: 9, ..ok.clone() },
            SelectionConfig { buffer_capacity: 4, ..ok.clone() },
            SelectionConfig { alpha: -1.0, ..ok.clone() },
            SelectionConfig { alpha: f64::NAN, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err(), "{bad:?}");
        }
        let err = SelectionConfig { batch_size: 8, select_k: 8, buffer_capacity: 4, ..ok }
            .validate()
            .unwrap_err()
            .to_string();
        assert!(err.contains("K = 8"), "{err}");
    }

    #[test]
    fn scorer_names_round_trip() {
        for s in Scorer::ALL {
            assert_eq!(s.name().parse::<Scorer>().unwrap(), s);
        }
        assert!("greats".parse::<Scorer>().is_err());
    }

    #[test]
    fn maxloss_and_regular() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let losses = [0.1, 2.0, 0.5];
        let mut recs = baseline_score(
            0,
            &ids(3),
            BaselineInputs { losses: Some(&losses), grad_norms: None },
            Scorer::MaxLoss,
            &mut rng,
        )
        .unwrap();
        assert_eq!(select_baseline(&mut recs, 1).unwrap(), vec![1]);

        let mut recs = baseline_score(0, &ids(8), BaselineInputs::default(), Scorer::Regular, &mut rng).unwrap();
        assert_eq!(select_baseline(&mut recs, 2).unwrap(), (0..8).collect::<Vec<_>>());
    }

    #[test]
    fn missing_side_input_names_scorer() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = baseline_score(0, &ids(2), BaselineInputs::default(), Scorer::MaxGrad, &mut rng)
            .unwrap_err()
            .to_string();
        assert!(err.contains("maxgrad") && err.contains("grad_norms"), "{err}");
    }

    #[test]
    fn random_is_reproducible() {
        let pick = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut r = baseline_score(0, &ids(8), BaselineInputs::default(), Scorer::Random, &mut rng).unwrap();
            select_baseline(&mut r, 3).unwrap()
        };
        assert_eq!(pick(5), pick(5));
    }

    proptest::proptest! {
        #[test]
        fn scale_invariant_and_monotone(
            v in proptest::collection::vec(0.0f64..100.0, 1..9),
            c in 0.01f64..100.0,
            bump in 0.0f64..50.0,
            seed in 0usize..100,
        ) {
            let k = 1 + seed % v.len();
            let base = top_k_indices(&v, k).unwrap();
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            // Scaling can merge near-ties through rounding; only compare
            // when the k-th and (k+1)-th values are clearly apart.
            let mut sorted = v.clone();
            sorted.sort_by(|a, b| b.total_cmp(a));
            if k == v.len() || sorted[k - 1] - sorted[k] > 1e-9 * sorted[0].max(1.0) {
                proptest::prop_assert_eq!(top_k_indices(&scaled, k).unwrap(), base.clone());
            }
            if let Some(&i) = base.first() {
                let mut up = v.clone();
                up[i] += bump;
                proptest::prop_assert!(top_k_indices(&up, k).unwrap().contains(&i));
            }
        }
    }
}
