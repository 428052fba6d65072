//! Nuclear norm of a logits matrix and how it sits between the Frobenius
//! bounds. A confident, repetitive sample has few dominant directions; a
//! varied one spreads mass over many.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uds::{lemma_bounds_check, nuclear_norm, LogitsMatrix};

fn main() -> uds::Result<()> {
    let (n, v) = (16, 64);
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let spread: Vec<f64> = (0..n * v).map(|_| rng.random_range(-2.0..2.0)).collect();
    let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..v).map(|_| rng.random_range(-1.0..1.0)).collect();
    let rank_one: Vec<f64> = (0..n * v).map(|k| u[k / v] * w[k % v]).collect();

    for (name, data) in [("random", spread), ("rank one", rank_one)] {
        let logits = LogitsMatrix::from_dense(n, v, data)?;
        let r = nuclear_norm(&logits)?;
        let verdict = lemma_bounds_check(&r, r.min_dim());
        println!(
            "{name:>9}: nuclear {:.3}  frobenius {:.3}  sqrt(min_dim)*frobenius {:.3}  effective rank {}  bounds hold: {}",
            r.nuclear,
            r.frobenius,
            (r.min_dim() as f64).sqrt() * r.frobenius,
            r.effective_rank,
            verdict.holds()
        );
    }

    // Only the valid rows are scored; padding must be zero.
    let padded = LogitsMatrix::new(4, 3, vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 2)?;
    let report = nuclear_norm(&padded)?;
    println!("4x3 with 2 valid rows: nuclear {}, {} singular values", report.nuclear, report.min_dim());
    Ok(())
}
