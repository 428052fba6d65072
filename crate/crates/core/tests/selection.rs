//! The per-batch selection step against brute force and its degenerate cases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uds::buffer::MemoryBuffer;
use uds::norm::nuclear_norm;
use uds::selector::{uds_step, Candidate, SelectionConfig};
use uds::{LogitsMatrix, ProjectionPair, UdsError};

const N: usize = 8;
const V: usize = 16;

fn random(rng: &mut ChaCha8Rng, scale: f64) -> LogitsMatrix {
    let data = (0..N * V).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
    LogitsMatrix::from_dense(N, V, data).unwrap()
}

fn candidates(mats: &[LogitsMatrix]) -> Vec<Candidate> {
    mats.iter()
        .enumerate()
        .map(|(i, l)| Candidate {
            id: format!("s{i}"),
            logits: l.clone(),
            response_mask: None,
        })
        .collect()
}

fn config(b: usize, k: usize, alpha: f64) -> SelectionConfig {
    SelectionConfig {
        batch_size: b,
        select_k: k,
        alpha,
        buffer_capacity: 16,
        d1: 8,
        d2: 4,
        ..SelectionConfig::default()
    }
}

fn nuclear_ranking(mats: &[LogitsMatrix], k: usize) -> Vec<usize> {
    let norms: Vec<f64> = mats.iter().map(|m| nuclear_norm(m).unwrap().nuclear).collect();
    uds::selector::top_k_indices(&norms, k).unwrap()
}

/// All `k`-subsets by bitmask; best total, lowest mask among equals.
fn brute_force(totals: &[f64], k: usize) -> Vec<usize> {
    let b = totals.len();
    let mut best: Option<(f64, u32)> = None;
    for mask in 0u32..1 << b {
        if mask.count_ones() as usize == k {
            let s: f64 = (0..b).filter(|i| mask >> i & 1 == 1).map(|i| totals[i]).sum();
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, mask));
            }
        }
    }
    let mask = best.unwrap().1;
    (0..b).filter(|i| mask >> i & 1 == 1).collect()
}

#[test]
fn empty_buffer_reduces_to_nuclear_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let pair = ProjectionPair::build(V, N, 8, 4, 3).unwrap();
    for trial in 0..20 {
        let mats: Vec<_> = (0..6).map(|_| { let sc = rng.random_range(0.1..5.0); random(&mut rng, sc) }).collect();
        let mut buffer = MemoryBuffer::new(16).unwrap();
        let out = uds_step(trial, &candidates(&mats), &config(6, 3, 1e6), &mut buffer, &pair).unwrap();
        assert!(out.records.iter().all(|r| r.s_inter == 0.0));
        assert_eq!(out.selected, nuclear_ranking(&mats, 3));
    }
}

#[test]
fn zero_alpha_reduces_to_nuclear_ranking() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let pair = ProjectionPair::build(V, N, 8, 4, 3).unwrap();
    let mut buffer = MemoryBuffer::new(16).unwrap();
    for step in 0..20 {
        let mats: Vec<_> = (0..6).map(|_| { let sc = rng.random_range(0.1..5.0); random(&mut rng, sc) }).collect();
        let out = uds_step(step, &candidates(&mats), &config(6, 2, 0.0), &mut buffer, &pair).unwrap();
        assert_eq!(out.selected, nuclear_ranking(&mats, 2));
    }
    assert_eq!(buffer.len(), 16);
}

#[test]
fn near_duplicate_is_dropped_against_loaded_buffer() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    // Full-dimension factors: embedding distances equal logits distances.
    let pair = ProjectionPair::build(V, N, V, N, 5).unwrap();
    let dup = random(&mut rng, 10.0);
    let twin = dup.lin_comb(1.0, &random(&mut rng, 0.05), 1.0).unwrap();
    let mid_far = random(&mut rng, 6.0);
    let mid_near = dup.lin_comb(0.6, &random(&mut rng, 0.5), 1.0).unwrap();
    let mats = vec![dup.clone(), twin, mid_far, mid_near];
    let cand = candidates(&mats);

    // Without memory the two high-norm duplicates win.
    let mut empty = MemoryBuffer::new(16).unwrap();
    let alpha = 1.0;
    let out = uds_step(0, &cand, &config(4, 2, alpha), &mut empty, &pair).unwrap();
    assert_eq!(out.selected, vec![0, 1]);

    let mut buffer = MemoryBuffer::new(16).unwrap();
    buffer.push_selected(vec![pair.project(&dup).unwrap()]).unwrap();
    let out = uds_step(1, &cand, &config(4, 2, alpha), &mut buffer, &pair).unwrap();
    let totals: Vec<f64> = out.records.iter().map(|r| r.s_total).collect();
    assert_eq!(out.selected, brute_force(&totals, 2), "totals {totals:?}");
    let dups = out.selected.iter().filter(|&&i| i < 2).count();
    assert_eq!(dups, 1, "selected {:?}, totals {totals:?}", out.selected);
}

#[test]
fn scoring_uses_buffer_as_of_step_start() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pair = ProjectionPair::build(V, N, 8, 4, 1).unwrap();
    let mut buffer = MemoryBuffer::new(16).unwrap();
    let warm: Vec<_> = (0..3).map(|_| pair.project(&random(&mut rng, 1.0)).unwrap()).collect();
    buffer.push_selected(warm).unwrap();
    let before = buffer.clone();
    let mats: Vec<_> = (0..4).map(|_| random(&mut rng, 2.0)).collect();
    let out = uds_step(0, &candidates(&mats), &config(4, 2, 0.5), &mut buffer, &pair).unwrap();
    for (r, m) in out.records.iter().zip(&mats) {
        let z = pair.project(m).unwrap();
        assert_eq!(r.s_inter, uds::diversity_distance(&z, &before).unwrap());
    }
    // Only the selected embeddings were appended, in index order.
    assert_eq!(buffer.len(), 5);
    let tail: Vec<_> = buffer.entries().skip(3).map(|e| e.source_sample.clone()).collect();
    let want: Vec<_> = out.selected.iter().map(|i| format!("s{i}")).collect();
    assert_eq!(tail, want);
}

#[test]
fn random_batches_agree_with_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pair = ProjectionPair::build(V, N, 8, 4, 2).unwrap();
    let mut buffer = MemoryBuffer::new(16).unwrap();
    for step in 0..40 {
        let b = rng.random_range(2..=8);
        let k = rng.random_range(1..=b);
        let mats: Vec<_> = (0..b).map(|_| { let sc = rng.random_range(0.5..3.0); random(&mut rng, sc) }).collect();
        let out = uds_step(step, &candidates(&mats), &config(b, k, 0.7), &mut buffer, &pair).unwrap();
        let totals: Vec<f64> = out.records.iter().map(|r| r.s_total).collect();
        assert_eq!(out.selected, brute_force(&totals, k));
    }
}

#[test]
fn bad_candidate_names_step_and_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pair = ProjectionPair::build(V, N, 8, 4, 2).unwrap();
    let mut mats: Vec<_> = (0..3).map(|_| random(&mut rng, 1.0)).collect();
    mats.push(LogitsMatrix::zeros(N, V + 1).unwrap());
    let mut buffer = MemoryBuffer::new(16).unwrap();
    let err = uds_step(42, &candidates(&mats), &config(4, 2, 1.0), &mut buffer, &pair).unwrap_err();
    assert!(matches!(&err, UdsError::Step { step: 42, sample, .. } if sample == "s3"), "{err}");
    assert!(buffer.is_empty());
}

#[test]
fn wrong_batch_size_is_rejected() {
    let pair = ProjectionPair::build(V, N, 8, 4, 2).unwrap();
    let mut buffer = MemoryBuffer::new(16).unwrap();
    let mats = vec![LogitsMatrix::zeros(N, V).unwrap(); 3];
    assert!(uds_step(0, &candidates(&mats), &config(4, 2, 1.0), &mut buffer, &pair).is_err());
}

#[test]
fn combined_score_examples() {
    use uds::combine_scores;
    assert_eq!(combine_scores(10.0, 5.0, 0.0), 10.0);
    assert_eq!(combine_scores(10.0, 5.0, 2.0), 20.0);
    // Nuclear norms in the hundreds, distances in the tens: at a small
    // alpha the diversity term is under one percent of the total.
    let total = combine_scores(350.0, 40.0, 1.5e-3);
    assert!(1.5e-3 * 40.0 / total < 0.01);
}

#[test]
fn top_k_examples() {
    use uds::selector::top_k_indices;
    assert_eq!(top_k_indices(&[3.0, 1.0, 4.0, 1.0, 5.0], 2).unwrap(), vec![2, 4]);
    assert_eq!(top_k_indices(&[7.0; 5], 3).unwrap(), vec![0, 1, 2]);
    assert_eq!(top_k_indices(&[0.3, -1.0, 2.0], 3).unwrap(), vec![0, 1, 2]);
    assert!(top_k_indices(&[1.0, 2.0], 0).is_err());
    assert!(top_k_indices(&[1.0, 2.0], 3).is_err());
}

#[test]
fn baseline_policies() {
    use uds::selector::{baseline_score, select_baseline, BaselineInputs};
    use uds::Scorer;
    let ids: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
    let losses = [0.1, 2.0, 0.5];
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let inputs = BaselineInputs { losses: Some(&losses), grad_norms: None };
    let mut recs = baseline_score(0, &ids, inputs, Scorer::MaxLoss, &mut rng).unwrap();
    assert_eq!(select_baseline(&mut recs, 1).unwrap(), vec![1]);

    let pick = |seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ids: Vec<String> = (0..16).map(|i| format!("s{i}")).collect();
        let mut recs = baseline_score(0, &ids, BaselineInputs::default(), Scorer::Random, &mut rng).unwrap();
        select_baseline(&mut recs, 4).unwrap()
    };
    assert_eq!(pick(9), pick(9));
    assert_ne!(pick(9), pick(10));

    let mut recs = baseline_score(0, &ids, BaselineInputs::default(), Scorer::Regular, &mut rng).unwrap();
    assert_eq!(select_baseline(&mut recs, 1).unwrap(), vec![0, 1, 2]);
    assert!(recs.iter().all(|r| r.selected));

    let missing = baseline_score(0, &ids, BaselineInputs::default(), Scorer::MaxGrad, &mut rng);
    assert!(matches!(missing, Err(UdsError::MissingSideInput { .. })));
}

mod props {
    use proptest::prelude::*;
    use uds::selector::top_k_indices;

    proptest! {
        #[test]
        fn top_k_is_scale_invariant(
            v in prop::collection::vec(-1e3f64..1e3, 1..24),
            c in 1e-3f64..1e3,
            k_frac in 0.0f64..1.0,
        ) {
            let k = 1 + ((v.len() - 1) as f64 * k_frac) as usize;
            let scaled: Vec<f64> = v.iter().map(|x| c * x).collect();
            let a = top_k_indices(&v, k).unwrap();
            prop_assert_eq!(a.len(), k);
            prop_assert!(a.windows(2).all(|w| w[0] < w[1]));
            // Scaling can merge distinct values into float ties only when
            // they were already within rounding of each other.
            let b = top_k_indices(&scaled, k).unwrap();
            let min_in = a.iter().map(|&i| v[i]).fold(f64::INFINITY, f64::min);
            let max_out = (0..v.len()).filter(|i| !a.contains(i)).map(|i| v[i]).fold(f64::NEG_INFINITY, f64::max);
            if min_in - max_out > 1e-9 * min_in.abs().max(1.0) || max_out == f64::NEG_INFINITY {
                prop_assert_eq!(a, b);
            }
        }
    }
}
