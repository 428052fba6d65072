//! Two-sided structured random projection `z = vec(G2 * L * G1^T)`.
//!
//! Each factor is `sqrt(n / d) * S * F * D`: a Rademacher sign flip `D`, an
//! orthonormal DCT-II `F` and a uniform row subsample `S` drawn without
//! replacement. Factors are stored as seed, signs and selected rows; the
//! dense matrices only ever exist inside the oracle.
//!
//! Vectorization is column-major over the `d2 x d1` result, so
//! `z[j * d2 + i] = (G2 L G1^T)[i, j]` and `z = (G1 kron G2) vec(L)`.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};
use crate::logits::LogitsMatrix;
use crate::transform::{dct2_row, Dct2};

/// Tag recorded in every factor; names the transform and generator.
pub const FACTOR_VERSION: &str = "uds-srft/dct2/chacha8/v1";

/// `N * V` limit for [`project_dense_oracle`].
pub const DENSE_GUARD: usize = 1 << 20;

const VOCAB_STREAM: u64 = 1;
const SEQ_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFactor {
    pub version: String,
    pub input_dim: usize,
    pub output_dim: usize,
    pub signs: Vec<i8>,
    /// Strictly increasing.
    pub selected_rows: Vec<usize>,
    pub scale: f64,
    pub seed: u64,
    pub stream: u64,
}

impl ProjectionFactor {
    /// Draws one factor from `(seed, stream)` with a ChaCha8 generator.
    pub fn generate(input_dim: usize, output_dim: usize, seed: u64, stream: u64) -> Result<Self> {
        if input_dim == 0 {
            return Err(UdsError::ProjectionBound("input dimension must be >= 1".into()));
        }
        if output_dim == 0 || output_dim > input_dim {
            return Err(UdsError::ProjectionBound(format!(
                "output dimension {output_dim} must lie in [1, {input_dim}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        let signs = (0..input_dim)
            .map(|_| if rng.random::<bool>() { 1 } else { -1 })
            .collect();
        let mut selected_rows = partial_fisher_yates(&mut rng, input_dim, output_dim);
        selected_rows.sort_unstable();
        Ok(Self {
            version: FACTOR_VERSION.to_string(),
            input_dim,
            output_dim,
            signs,
            selected_rows,
            scale: (input_dim as f64 / output_dim as f64).sqrt(),
            seed,
            stream,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(UdsError::ProjectionBound(m));
        if self.version != FACTOR_VERSION {
            return bad(format!("unknown factor version {:?}", self.version));
        }
        if self.output_dim == 0 || self.output_dim > self.input_dim {
            return bad(format!(
                "output dimension {} outside [1, {}]",
                self.output_dim, self.input_dim
            ));
        }
        if self.signs.len() != self.input_dim || self.signs.iter().any(|&s| s != 1 && s != -1) {
            return bad("sign vector must hold input_dim entries of +-1".into());
        }
        if self.selected_rows.len() != self.output_dim
            || self.selected_rows.windows(2).any(|w| w[0] >= w[1])
            || self.selected_rows.iter().any(|&r| r >= self.input_dim)
        {
            return bad("selected rows must be strictly increasing indices below input_dim".into());
        }
        if !self.scale.is_finite() || self.scale <= 0.0 {
            return bad(format!("scale {} is not a positive number", self.scale));
        }
        Ok(())
    }

    /// Dense `output_dim x input_dim` matrix, built from the cosine formula
    /// and the dimensions alone (the stored `scale` is not consulted).
    pub fn dense(&self) -> Vec<Vec<f64>> {
        let scale = (self.input_dim as f64 / self.output_dim as f64).sqrt();
        self.selected_rows
            .iter()
            .map(|&k| {
                dct2_row(self.input_dim, k)
                    .iter()
                    .zip(&self.signs)
                    .map(|(c, &s)| scale * c * f64::from(s))
                    .collect()
            })
            .collect()
    }
}

/// First `k` entries of a partially shuffled `0..n`: a uniform draw of `k`
/// distinct indices.
fn partial_fisher_yates(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.random_range(i..n);
        pool.swap(i, j);
    }
    pool.truncate(k);
    pool
}

/// Fixed-length projected representation of one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub data: Vec<f64>,
    pub source_step: usize,
    pub source_sample: String,
}

impl Embedding {
    pub fn new(data: Vec<f64>) -> Self {
        Self {
            data,
            source_step: 0,
            source_sample: String::new(),
        }
    }

    pub fn with_source(mut self, step: usize, sample: impl Into<String>) -> Self {
        self.source_step = step;
        self.source_sample = sample.into();
        self
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }
}

/// Builds the vocabulary-side (`d1 x V`) and sequence-side (`d2 x N`)
/// factors from one seed, on independent generator streams.
pub fn build_projection(
    vocab: usize,
    seq_len: usize,
    d1: usize,
    d2: usize,
    seed: u64,
) -> Result<(ProjectionFactor, ProjectionFactor)> {
    if d1 == 0 || d1 > vocab {
        return Err(UdsError::ProjectionBound(format!(
            "d1 = {d1} must satisfy 1 <= d1 <= vocab = {vocab}"
        )));
    }
    if d2 == 0 || d2 > seq_len {
        return Err(UdsError::ProjectionBound(format!(
            "d2 = {d2} must satisfy 1 <= d2 <= seq_len = {seq_len}"
        )));
    }
    Ok((
        ProjectionFactor::generate(vocab, d1, seed, VOCAB_STREAM)?,
        ProjectionFactor::generate(seq_len, d2, seed, SEQ_STREAM)?,
    ))
}

/// A factor pair with its transform plans, shareable across threads.
#[derive(Debug, Clone)]
pub struct ProjectionPair {
    vocab: ProjectionFactor,
    seq: ProjectionFactor,
    vocab_plan: Dct2,
    seq_plan: Dct2,
}

impl ProjectionPair {
    pub fn new(vocab: ProjectionFactor, seq: ProjectionFactor) -> Result<Self> {
        vocab.validate()?;
        seq.validate()?;
        Ok(Self {
            vocab_plan: Dct2::new(vocab.input_dim),
            seq_plan: Dct2::new(seq.input_dim),
            vocab,
            seq,
        })
    }

    pub fn build(vocab: usize, seq_len: usize, d1: usize, d2: usize, seed: u64) -> Result<Self> {
        let (g1, g2) = build_projection(vocab, seq_len, d1, d2, seed)?;
        Self::new(g1, g2)
    }

    pub fn vocab_factor(&self) -> &ProjectionFactor {
        &self.vocab
    }

    pub fn seq_factor(&self) -> &ProjectionFactor {
        &self.seq
    }

    pub fn embedding_dim(&self) -> usize {
        self.vocab.output_dim * self.seq.output_dim
    }

    pub fn check_shape(&self, logits: &LogitsMatrix) -> Result<()> {
        if logits.cols() != self.vocab.input_dim || logits.rows() != self.seq.input_dim {
            return Err(UdsError::DimensionMismatch {
                expected: format!("{}x{}", self.seq.input_dim, self.vocab.input_dim),
                actual: format!("{}x{}", logits.rows(), logits.cols()),
            });
        }
        Ok(())
    }

    /// Fast path: transform along the vocabulary for every valid row, keep
    /// `d1` columns, then transform along the sequence for each kept column.
    pub fn project(&self, logits: &LogitsMatrix) -> Result<Embedding> {
        self.check_shape(logits)?;
        let (n, v) = (logits.rows(), logits.cols());
        let (d1, d2) = (self.vocab.output_dim, self.seq.output_dim);

        // stage[j * n + r]: row r of L after the vocabulary-side SFD, column j.
        let mut stage = vec![0.0; d1 * n];
        let mut signed = vec![0.0; v];
        let mut transformed = vec![0.0; v];
        let mut buf = self.vocab_plan.buffer();
        for r in 0..logits.valid_rows() {
            for ((s, &x), &sign) in signed.iter_mut().zip(logits.row(r)).zip(&self.vocab.signs) {
                *s = x * f64::from(sign);
            }
            self.vocab_plan.forward(&signed, &mut transformed, &mut buf);
            for (j, &k) in self.vocab.selected_rows.iter().enumerate() {
                stage[j * n + r] = transformed[k];
            }
        }

        let scale = self.vocab.scale * self.seq.scale;
        let mut out = vec![0.0; d1 * d2];
        let mut col = vec![0.0; n];
        let mut col_t = vec![0.0; n];
        let mut buf = self.seq_plan.buffer();
        for j in 0..d1 {
            for ((c, &x), &sign) in col.iter_mut().zip(&stage[j * n..(j + 1) * n]).zip(&self.seq.signs) {
                *c = x * f64::from(sign);
            }
            self.seq_plan.forward(&col, &mut col_t, &mut buf);
            for (i, &k) in self.seq.selected_rows.iter().enumerate() {
                out[j * d2 + i] = scale * col_t[k];
            }
        }
        Ok(Embedding::new(out))
    }
}

/// One-off fast projection. Prefer [`ProjectionPair`] when projecting many
/// samples with the same factors.
pub fn project_fast(
    logits: &LogitsMatrix,
    g1: &ProjectionFactor,
    g2: &ProjectionFactor,
) -> Result<Embedding> {
    ProjectionPair::new(g1.clone(), g2.clone())?.project(logits)
}

fn check_factor_dims(logits: &LogitsMatrix, g1: &ProjectionFactor, g2: &ProjectionFactor) -> Result<()> {
    if logits.cols() != g1.input_dim || logits.rows() != g2.input_dim {
        return Err(UdsError::DimensionMismatch {
            expected: format!("{}x{}", g2.input_dim, g1.input_dim),
            actual: format!("{}x{}", logits.rows(), logits.cols()),
        });
    }
    Ok(())
}

/// Reference projection through the Kronecker form `(G1 kron G2) vec(L)`.
///
/// Every entry of the `d x NV` operator is formed explicitly (one row at a
/// time) from dense factor matrices. Rejects `N * V > 2^20`.
pub fn project_dense_oracle(
    logits: &LogitsMatrix,
    g1: &ProjectionFactor,
    g2: &ProjectionFactor,
) -> Result<Embedding> {
    let size = logits.rows() * logits.cols();
    if size > DENSE_GUARD {
        return Err(UdsError::SizeGuard {
            size,
            limit: DENSE_GUARD,
        });
    }
    project_dense_unguarded(logits, g1, g2)
}

/// [`project_dense_oracle`] without the size guard. Benchmarks only.
pub fn project_dense_unguarded(
    logits: &LogitsMatrix,
    g1: &ProjectionFactor,
    g2: &ProjectionFactor,
) -> Result<Embedding> {
    check_factor_dims(logits, g1, g2)?;
    let n = logits.rows();
    let u = logits.vec_col_major();
    let a = g1.dense();
    let b = g2.dense();
    let mut row = vec![0.0; u.len()];
    let mut z = Vec::with_capacity(a.len() * b.len());
    for a_row in &a {
        for b_row in &b {
            for (v, &av) in a_row.iter().enumerate() {
                for (nn, &bv) in b_row.iter().enumerate() {
                    row[v * n + nn] = av * bv;
                }
            }
            z.push(row.iter().zip(&u).map(|(g, x)| g * x).sum());
        }
    }
    Ok(Embedding::new(z))
}

/// The full `d x NV` Kronecker operator. Tiny inputs only.
pub fn kronecker_operator(g1: &ProjectionFactor, g2: &ProjectionFactor) -> Result<Vec<Vec<f64>>> {
    let size = g1.input_dim * g2.input_dim;
    if size * g1.output_dim * g2.output_dim > DENSE_GUARD {
        return Err(UdsError::SizeGuard {
            size: size * g1.output_dim * g2.output_dim,
            limit: DENSE_GUARD,
        });
    }
    let a = g1.dense();
    let b = g2.dense();
    let n = g2.input_dim;
    Ok(a.iter()
        .flat_map(|ar| {
            b.iter().map(move |br| {
                let mut row = vec![0.0; size];
                for (v, &av) in ar.iter().enumerate() {
                    for (nn, &bv) in br.iter().enumerate() {
                        row[v * n + nn] = av * bv;
                    }
                }
                row
            })
        })
        .collect())
}

/// Pairwise squared-distance distortion of a projection over a point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistortionReport {
    pub points: usize,
    pub pairs: usize,
    pub skipped: usize,
    /// `max |‖v_i - v_j‖² / ‖u_i - u_j‖² - 1|`.
    pub max_distortion: f64,
    pub mean_distortion: f64,
    pub median_distortion: f64,
    /// All points coincide; nothing was measured.
    pub degenerate: bool,
}

pub fn jl_distortion_probe(
    points: &[LogitsMatrix],
    g1: &ProjectionFactor,
    g2: &ProjectionFactor,
) -> Result<DistortionReport> {
    let pair = ProjectionPair::new(g1.clone(), g2.clone())?;
    distortion_with(points, &pair)
}

pub fn distortion_with(points: &[LogitsMatrix], pair: &ProjectionPair) -> Result<DistortionReport> {
    if points.len() < 2 {
        return Err(UdsError::Shape("distortion probe needs at least two points".into()));
    }
    let (r0, c0) = (points[0].rows(), points[0].cols());
    if let Some(p) = points.iter().find(|p| p.rows() != r0 || p.cols() != c0) {
        return Err(UdsError::DimensionMismatch {
            expected: format!("{r0}x{c0}"),
            actual: format!("{}x{}", p.rows(), p.cols()),
        });
    }
    let projected = points
        .iter()
        .map(|p| pair.project(p))
        .collect::<Result<Vec<_>>>()?;
    let mut skipped = 0;
    let mut all = Vec::new();
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            let du = sq_dist(points[i].data(), points[j].data());
            if du == 0.0 {
                skipped += 1;
                continue;
            }
            let dv = sq_dist(&projected[i].data, &projected[j].data);
            all.push((dv / du - 1.0).abs());
        }
    }
    all.sort_by(f64::total_cmp);
    let pairs = all.len();
    let median = match pairs {
        0 => 0.0,
        p if p % 2 == 0 => 0.5 * (all[p / 2 - 1] + all[p / 2]),
        p => all[p / 2],
    };
    Ok(DistortionReport {
        points: points.len(),
        pairs,
        skipped,
        max_distortion: all.last().copied().unwrap_or(0.0),
        mean_distortion: if pairs > 0 { all.iter().sum::<f64>() / pairs as f64 } else { 0.0 },
        median_distortion: median,
        degenerate: pairs == 0,
    })
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Serialized form of a factor pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorRecord {
    pub version: String,
    pub vocab: ProjectionFactor,
    pub seq: ProjectionFactor,
}

impl FactorRecord {
    pub fn new(vocab: ProjectionFactor, seq: ProjectionFactor) -> Self {
        Self {
            version: FACTOR_VERSION.to_string(),
            vocab,
            seq,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rec: Self = serde_json::from_str(text)?;
        if rec.version != FACTOR_VERSION {
            return Err(UdsError::Format(format!("unsupported factor record {:?}", rec.version)));
        }
        rec.vocab.validate()?;
        rec.seq.validate()?;
        Ok(rec)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_logits(rng: &mut ChaCha8Rng, n: usize, v: usize) -> LogitsMatrix {
        let data = (0..n * v).map(|_| rng.random_range(-2.0..2.0)).collect();
        LogitsMatrix::from_dense(n, v, data).unwrap()
    }

    fn norm(x: &[f64]) -> f64 {
        x.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    #[test]
    fn bounds_are_checked() {
        assert!(build_projection(8, 4, 0, 1, 0).is_err());
        assert!(build_projection(8, 4, 9, 1, 0).is_err());
        let err = build_projection(8, 4, 2, 5, 0).unwrap_err().to_string();
        assert!(err.contains("d2"), "{err}");
    }

    #[test]
    fn same_seed_same_factors() {
        let a = build_projection(64, 16, 8, 4, 42).unwrap();
        let b = build_projection(64, 16, 8, 4, 42).unwrap();
        assert_eq!(a, b);
        let c = build_projection(64, 16, 8, 4, 43).unwrap();
        assert_ne!(a, c);
        // The two sides draw from different streams.
        assert_ne!(a.0.signs[..16], a.1.signs[..]);
    }

    #[test]
    fn factor_invariants() {
        let (g1, g2) = build_projection(100, 30, 17, 9, 3).unwrap();
        g1.validate().unwrap();
        g2.validate().unwrap();
        assert!((g1.scale - (100.0f64 / 17.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn zero_matrix_projects_to_zero() {
        let pair = ProjectionPair::build(32, 16, 8, 4, 1).unwrap();
        let z = pair.project(&LogitsMatrix::zeros(16, 32).unwrap()).unwrap();
        assert_eq!(z.dim(), 32);
        assert!(z.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn full_selection_is_isometric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let l = random_logits(&mut rng, 12, 20);
        let pair = ProjectionPair::build(20, 12, 20, 12, 5).unwrap();
        let z = pair.project(&l).unwrap();
        let a = norm(&z.data);
        let b = l.frobenius();
        assert!((a - b).abs() < 1e-9 * b);
    }

    #[test]
    fn fast_matches_dense_16x32() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let l = random_logits(&mut rng, 16, 32);
        let (g1, g2) = build_projection(32, 16, 8, 4, 77).unwrap();
        let fast = project_fast(&l, &g1, &g2).unwrap();
        let dense = project_dense_oracle(&l, &g1, &g2).unwrap();
        for (a, b) in fast.data.iter().zip(&dense.data) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn scalar_embedding_hand_expanded() {
        // 2x2 input with d1 = d2 = 1: z = s1 * s2 * sum_{n,v} F2[k2,n] D2[n] L[n,v] D1[v] F1[k1,v].
        let l = LogitsMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let (g1, g2) = build_projection(2, 2, 1, 1, 8).unwrap();
        let f = crate::transform::dct2_matrix(2);
        let (k1, k2) = (g1.selected_rows[0], g2.selected_rows[0]);
        let mut want = 0.0;
        for n in 0..2 {
            for v in 0..2 {
                want += f[k2][n] * f64::from(g2.signs[n]) * l.get(n, v) * f64::from(g1.signs[v]) * f[k1][v];
            }
        }
        want *= 2f64.sqrt() * 2f64.sqrt();
        let z = project_dense_oracle(&l, &g1, &g2).unwrap();
        assert_eq!(z.dim(), 1);
        assert!((z.data[0] - want).abs() < 1e-12);
        assert!((project_fast(&l, &g1, &g2).unwrap().data[0] - want).abs() < 1e-12);
    }

    #[test]
    fn kronecker_operator_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = random_logits(&mut rng, 4, 6);
        let (g1, g2) = build_projection(6, 4, 3, 2, 1).unwrap();
        let op = kronecker_operator(&g1, &g2).unwrap();
        let u = l.vec_col_major();
        let z: Vec<f64> = op.iter().map(|r| r.iter().zip(&u).map(|(a, b)| a * b).sum()).collect();
        let oracle = project_dense_oracle(&l, &g1, &g2).unwrap();
        for (a, b) in z.iter().zip(&oracle.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_names_shapes() {
        let pair = ProjectionPair::build(8, 4, 2, 2, 0).unwrap();
        let err = pair.project(&LogitsMatrix::zeros(4, 9).unwrap()).unwrap_err().to_string();
        assert!(err.contains("4x8") && err.contains("4x9"), "{err}");
    }

    #[test]
    fn size_guard() {
        let l = LogitsMatrix::zeros(2048, 1024).unwrap();
        let (g1, g2) = build_projection(1024, 2048, 1, 1, 0).unwrap();
        assert!(matches!(
            project_dense_oracle(&l, &g1, &g2),
            Err(UdsError::SizeGuard { .. })
        ));
    }

    #[test]
    fn padded_rows_project_like_explicit_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let short = random_logits(&mut rng, 5, 16);
        let padded = short.pad_to(8).unwrap();
        let explicit = LogitsMatrix::from_dense(8, 16, padded.data().to_vec()).unwrap();
        let pair = ProjectionPair::build(16, 8, 4, 4, 2).unwrap();
        assert_eq!(pair.project(&padded).unwrap(), pair.project(&explicit).unwrap());
    }

    #[test]
    fn distortion_probe_cases() {
        let l = LogitsMatrix::from_rows(&[vec![1.0, 2.0], vec![0.5, 0.0]]).unwrap();
        let (g1, g2) = build_projection(2, 2, 2, 2, 0).unwrap();
        let r = jl_distortion_probe(&[l.clone(), l.clone()], &g1, &g2).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.skipped, 1);

        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let pts: Vec<_> = (0..6).map(|_| random_logits(&mut rng, 6, 10)).collect();
        let (g1, g2) = build_projection(10, 6, 10, 6, 1).unwrap();
        let r = jl_distortion_probe(&pts, &g1, &g2).unwrap();
        assert_eq!(r.pairs, 15);
        assert!(r.max_distortion < 1e-9);
        assert!(jl_distortion_probe(&pts[..1], &g1, &g2).is_err());
    }

    #[test]
    fn record_round_trip_is_exact() {
        let (g1, g2) = build_projection(128, 64, 32, 32, 99).unwrap();
        let rec = FactorRecord::new(g1, g2);
        let back = FactorRecord::from_json(&rec.to_json().unwrap()).unwrap();
        assert_eq!(rec, back);
        assert_eq!(rec.vocab.scale.to_bits(), back.vocab.scale.to_bits());
    }

    #[test]
    fn record_rejects_tampering() {
        let (g1, g2) = build_projection(8, 8, 2, 2, 0).unwrap();
        let mut rec = FactorRecord::new(g1, g2);
        rec.vocab.signs[0] = 0;
        assert!(FactorRecord::from_json(&rec.to_json().unwrap()).is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(48))]
        #[test]
        fn linear_and_matches_oracle(
            n in 1usize..12, v in 1usize..12, seed in 0u64..10_000,
            a in -3.0f64..3.0, b in -3.0f64..3.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let d1 = rng.random_range(1..=v);
            let d2 = rng.random_range(1..=n);
            let pair = ProjectionPair::build(v, n, d1, d2, seed).unwrap();
            let x = random_logits(&mut rng, n, v);
            let y = random_logits(&mut rng, n, v);
            let zx = pair.project(&x).unwrap();
            let zy = pair.project(&y).unwrap();
            let zc = pair.project(&x.lin_comb(a, &y, b).unwrap()).unwrap();
            let scale = 1.0 + norm(&zx.data) + norm(&zy.data);
            for i in 0..zc.dim() {
                proptest::prop_assert!((zc.data[i] - (a * zx.data[i] + b * zy.data[i])).abs() <= 1e-8 * scale);
            }
            let dense = project_dense_oracle(&x, pair.vocab_factor(), pair.seq_factor()).unwrap();
            for (p, q) in zx.data.iter().zip(&dense.data) {
                proptest::prop_assert!((p - q).abs() < 1e-8);
            }
        }
    }
}
