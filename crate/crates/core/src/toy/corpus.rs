//! Synthetic token corpus with controllable near-duplicate clusters.
//!
//! Every sequence is a walk on a sparse random Markov chain over the
//! vocabulary. Distinct samples are independent walks. Each cluster draws one
//! prototype and emits `duplication` copies with per-token substitution
//! noise. Prototypes are either full walks or templates (a short walk
//! repeated to full length), so clusters are redundant in two ways: fluent
//! near-copies and low-diversity repetition. The evaluation split is fresh
//! walks from the same chain.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};
use crate::toy::model::{read_u32, read_u64};

/// One training sequence. Position `n` of [`Sample::inputs`] predicts
/// `tokens[n + 1]`; positions predicting tokens at index `>= prompt_len` are
/// targets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub id: String,
    pub tokens: Vec<u32>,
    pub prompt_len: usize,
    pub cluster: Option<usize>,
}

impl Sample {
    pub fn inputs(&self) -> &[u32] {
        &self.tokens[..self.tokens.len().saturating_sub(1)]
    }

    pub fn target_positions(&self) -> Vec<usize> {
        (0..self.inputs().len())
            .filter(|&n| n + 1 >= self.prompt_len)
            .collect()
    }

    /// `true` at input positions whose prediction is a response token.
    pub fn response_mask(&self) -> Vec<bool> {
        (0..self.inputs().len()).map(|n| n + 1 >= self.prompt_len).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub vocab: usize,
    /// Tokens per sample, so `seq_len - 1` input positions.
    pub seq_len: usize,
    pub prompt_len: usize,
    pub distinct: usize,
    pub clusters: usize,
    pub duplication: usize,
    /// Per-token substitution probability inside a cluster.
    pub noise: f64,
    /// Successors per token in the Markov chain.
    pub branching: usize,
    pub eval_size: usize,
    /// The first `templated` clusters repeat a walk of `period` tokens; the
    /// rest use a full walk.
    pub templated: usize,
    pub period: usize,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            vocab: 128,
            seq_len: 65,
            prompt_len: 16,
            distinct: 256,
            clusters: 8,
            duplication: 32,
            noise: 0.05,
            branching: 4,
            eval_size: 64,
            templated: 4,
            period: 8,
        }
    }
}

impl CorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(UdsError::Config(format!("corpus spec: {m}")));
        if self.distinct + self.clusters * self.duplication == 0 {
            return bad("no training samples");
        }
        if self.clusters > 0 && self.duplication == 0 {
            return bad("clusters need duplication >= 1");
        }
        if self.vocab < 2 || self.seq_len < 2 {
            return bad("vocab and seq_len must be >= 2");
        }
        if self.templated > self.clusters {
            return bad("templated exceeds clusters");
        }
        if self.prompt_len >= self.seq_len {
            return bad("prompt must leave at least one response token");
        }
        if self.branching == 0 || self.branching > self.vocab {
            return bad("branching must lie in [1, vocab]");
        }
        if !(0.0..=1.0).contains(&self.noise) {
            return bad("noise must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn train_size(&self) -> usize {
        self.distinct + self.clusters * self.duplication
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticCorpus {
    pub spec: CorpusSpec,
    pub seed: u64,
    pub train: Vec<Sample>,
    pub eval: Vec<Sample>,
}

/// Sparse row-stochastic transition table.
struct Chain {
    successors: Vec<Vec<(u32, f64)>>,
}

impl Chain {
    fn new(vocab: usize, branching: usize, rng: &mut ChaCha8Rng) -> Self {
        let successors = (0..vocab)
            .map(|_| {
                let mut picked = HashSet::new();
                while picked.len() < branching {
                    picked.insert(rng.random_range(0..vocab as u32));
                }
                let mut picked: Vec<u32> = picked.into_iter().collect();
                picked.sort_unstable();
                let weights: Vec<f64> = (0..branching).map(|_| rng.random_range(0.1..1.0)).collect();
                let total: f64 = weights.iter().sum();
                picked.into_iter().zip(weights.into_iter().map(|w| w / total)).collect()
            })
            .collect();
        Self { successors }
    }

    fn walk(&self, len: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
        let mut tok = rng.random_range(0..self.successors.len() as u32);
        let mut out = Vec::with_capacity(len);
        out.push(tok);
        while out.len() < len {
            let mut u: f64 = rng.random();
            let succ = &self.successors[tok as usize];
            tok = succ.last().map_or(0, |s| s.0);
            for &(t, p) in succ {
                if u < p {
                    tok = t;
                    break;
                }
                u -= p;
            }
            out.push(tok);
        }
        out
    }
}

/// Generates a corpus deterministically from `(spec, seed)`.
pub fn make_corpus(spec: &CorpusSpec, seed: u64) -> Result<SyntheticCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chain = Chain::new(spec.vocab, spec.branching, &mut rng);
    let mut seen: HashSet<Vec<u32>> = HashSet::new();
    let mut fresh_walk = |rng: &mut ChaCha8Rng, period: usize| -> Vec<u32> {
        let draw = |rng: &mut ChaCha8Rng| match period {
            0 => chain.walk(spec.seq_len, rng),
            p => chain.walk(p.min(spec.seq_len), rng).into_iter().cycle().take(spec.seq_len).collect(),
        };
        for _ in 0..1000 {
            let w = draw(rng);
            if seen.insert(w.clone()) {
                return w;
            }
        }
        // A chain this constrained cannot yield enough distinct walks.
        draw(rng)
    };

    let mut train = Vec::with_capacity(spec.train_size());
    for i in 0..spec.distinct {
        train.push(Sample {
            id: format!("d{i}"),
            tokens: fresh_walk(&mut rng, 0),
            prompt_len: spec.prompt_len,
            cluster: None,
        });
    }
    for c in 0..spec.clusters {
        let proto = fresh_walk(&mut rng, if c < spec.templated { spec.period } else { 0 });
        for j in 0..spec.duplication {
            let tokens = if spec.duplication == 1 {
                proto.clone()
            } else {
                proto
                    .iter()
                    .map(|&t| {
                        if rng.random::<f64>() < spec.noise {
                            rng.random_range(0..spec.vocab as u32)
                        } else {
                            t
                        }
                    })
                    .collect()
            };
            train.push(Sample {
                id: format!("c{c}-{j}"),
                tokens,
                prompt_len: spec.prompt_len,
                cluster: Some(c),
            });
        }
    }
    let eval = (0..spec.eval_size)
        .map(|i| Sample {
            id: format!("e{i}"),
            tokens: fresh_walk(&mut rng, 0),
            prompt_len: spec.prompt_len,
            cluster: None,
        })
        .collect();
    Ok(SyntheticCorpus {
        spec: spec.clone(),
        seed,
        train,
        eval,
    })
}

const CORPUS_MAGIC: &[u8; 4] = b"UDSC";
const CORPUS_FORMAT_VERSION: u32 = 1;

impl SyntheticCorpus {
    /// Training samples that belong to a near-duplicate cluster.
    pub fn near_duplicate_count(&self) -> usize {
        if self.spec.duplication <= 1 {
            return 0;
        }
        self.train.iter().filter(|s| s.cluster.is_some()).count()
    }

    /// Binary layout: magic, version, seed, spec as length-prefixed JSON,
    /// then both splits as `(count, [id, prompt_len, cluster+1, tokens])`.
    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(CORPUS_MAGIC)?;
        w.write_all(&CORPUS_FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        let spec = serde_json::to_vec(&self.spec)?;
        w.write_all(&(spec.len() as u64).to_le_bytes())?;
        w.write_all(&spec)?;
        for split in [&self.train, &self.eval] {
            w.write_all(&(split.len() as u64).to_le_bytes())?;
            for s in split {
                w.write_all(&(s.id.len() as u64).to_le_bytes())?;
                w.write_all(s.id.as_bytes())?;
                w.write_all(&(s.prompt_len as u64).to_le_bytes())?;
                w.write_all(&s.cluster.map_or(0u64, |c| c as u64 + 1).to_le_bytes())?;
                w.write_all(&(s.tokens.len() as u64).to_le_bytes())?;
                for t in &s.tokens {
                    w.write_all(&t.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != CORPUS_MAGIC {
            return Err(UdsError::Format("not a corpus checkpoint".into()));
        }
        let version = read_u32(r)?;
        if version != CORPUS_FORMAT_VERSION {
            return Err(UdsError::Format(format!("unsupported corpus format version {version}")));
        }
        let seed = read_u64(r)?;
        let mut spec = vec![0u8; read_u64(r)? as usize];
        r.read_exact(&mut spec)?;
        let spec: CorpusSpec = serde_json::from_slice(&spec)?;
        let mut splits = Vec::with_capacity(2);
        for _ in 0..2 {
            let n = read_u64(r)? as usize;
            let mut split = Vec::with_capacity(n);
            for _ in 0..n {
                let mut id = vec![0u8; read_u64(r)? as usize];
                r.read_exact(&mut id)?;
                let id = String::from_utf8(id).map_err(|e| UdsError::Format(e.to_string()))?;
                let prompt_len = read_u64(r)? as usize;
                let cluster = match read_u64(r)? {
                    0 => None,
                    c => Some(c as usize - 1),
                };
                let len = read_u64(r)? as usize;
                let tokens = (0..len).map(|_| read_u32(r)).collect::<Result<Vec<_>>>()?;
                split.push(Sample {
                    id,
                    tokens,
                    prompt_len,
                    cluster,
                });
            }
            splits.push(split);
        }
        let eval = splits.pop().unwrap_or_default();
        let train = splits.pop().unwrap_or_default();
        Ok(Self {
            spec,
            seed,
            train,
            eval,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_to(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_from(&mut f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(duplication: usize, clusters: usize) -> CorpusSpec {
        CorpusSpec {
            vocab: 32,
            seq_len: 20,
            prompt_len: 4,
            distinct: 30,
            clusters,
            templated: clusters / 2,
            duplication,
            eval_size: 10,
            ..CorpusSpec::default()
        }
    }

    #[test]
    fn no_duplication_means_all_distinct() {
        let c = make_corpus(&small(1, 10), 1).unwrap();
        let set: HashSet<_> = c.train.iter().map(|s| s.tokens.clone()).collect();
        assert_eq!(set.len(), c.train.len());
        assert_eq!(c.near_duplicate_count(), 0);
    }

    #[test]
    fn eighty_near_duplicates() {
        let c = make_corpus(&small(8, 10), 2).unwrap();
        assert_eq!(c.near_duplicate_count(), 80);
        assert_eq!(c.train.len(), 110);
        assert!(c.train.iter().flat_map(|s| &s.tokens).all(|&t| t < 32));
    }

    #[test]
    fn deterministic_from_seed() {
        assert_eq!(make_corpus(&small(3, 2), 7).unwrap(), make_corpus(&small(3, 2), 7).unwrap());
        assert_ne!(make_corpus(&small(3, 2), 7).unwrap(), make_corpus(&small(3, 2), 8).unwrap());
    }

    #[test]
    fn rejects_empty_spec() {
        let spec = CorpusSpec {
            distinct: 0,
            clusters: 0,
            ..small(1, 0)
        };
        assert!(make_corpus(&spec, 0).is_err());
    }

    #[test]
    fn targets_and_mask() {
        let s = Sample {
            id: "x".into(),
            tokens: vec![0, 1, 2, 3, 4],
            prompt_len: 2,
            cluster: None,
        };
        assert_eq!(s.inputs(), &[0, 1, 2, 3]);
        assert_eq!(s.target_positions(), vec![1, 2, 3]);
        assert_eq!(s.response_mask(), vec![false, true, true, true]);
    }

    #[test]
    fn binary_round_trip() {
        let c = make_corpus(&small(2, 3), 4).unwrap();
        let mut bytes = Vec::new();
        c.write_to(&mut bytes).unwrap();
        assert_eq!(SyntheticCorpus::read_from(&mut bytes.as_slice()).unwrap(), c);
    }
}
