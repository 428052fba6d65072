//! Structured random projection of an `N x V` logits matrix to a `d2 x d1`
//! embedding, checked against the dense Kronecker operator.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uds::projection::project_dense_oracle;
use uds::{LogitsMatrix, ProjectionPair};

fn main() -> uds::Result<()> {
    let (n, v, d1, d2) = (32, 256, 32, 8);
    let pair = ProjectionPair::build(v, n, d1, d2, 7)?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let logits = LogitsMatrix::from_dense(n, v, (0..n * v).map(|_| rng.random_range(-3.0..3.0)).collect())?;

    let t = Instant::now();
    let fast = pair.project(&logits)?;
    let fast_ms = t.elapsed().as_secs_f64() * 1e3;
    let t = Instant::now();
    let dense = project_dense_oracle(&logits, pair.vocab_factor(), pair.seq_factor())?;
    let dense_ms = t.elapsed().as_secs_f64() * 1e3;

    let diff = fast.data.iter().zip(&dense.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let norm = |x: &[f64]| x.iter().map(|t| t * t).sum::<f64>().sqrt();
    println!("{n}x{v} logits -> embedding of {} values", pair.embedding_dim());
    println!("fast {fast_ms:.3} ms, dense {dense_ms:.3} ms, max difference {diff:.2e}");
    println!("norm ratio ||z|| / ||L||_F = {:.4}", norm(&fast.data) / logits.frobenius());
    Ok(())
}
