//! The acceptance suite: twelve checks, each reported as one pass/fail line.
//!
//! Tolerances are pinned here. A failing check is a report entry, not an
//! error; [`AcceptanceReport::all_passed`] decides the exit status.

use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::buffer::{diversity_distance, MemoryBuffer};
use crate::error::{Result, UdsError};
use crate::harness::config::{RunConfig, TOY_ALPHA};
use crate::harness::probe::JlStudy;
use crate::harness::run::run_experiment;
use crate::logits::{softmax_rows, LogitsMatrix};
use crate::norm::{lemma_bounds_check, nuclear_norm};
use crate::projection::{
    distortion_with, project_dense_oracle, project_dense_unguarded, project_fast, Embedding,
    ProjectionFactor, ProjectionPair,
};
use crate::selector::{top_k_indices, Scorer, SelectionConfig};
use crate::taylor::{pearson, predicted_loss_delta, OneHotLabels};
use crate::toy::{
    make_corpus, Architecture, CorpusSpec, ModelSpec, OptimizerSpec, OptimizerState, Sample,
    ToyModel,
};

pub const LEMMA_REL_TOL: f64 = 1e-9;
pub const LEMMA_EQUALITY_TOL: f64 = 1e-6;
pub const KRONECKER_ABS_TOL: f64 = 1e-8;
pub const ISOMETRY_TOL: f64 = 1e-9;
pub const JL_MAX_DISTORTION: f64 = 0.5;
pub const JL_MIN_GOOD_SEEDS: usize = 18;
pub const GRAD_REL_TOL: f64 = 1e-4;
pub const GRAD_FD_STEP: f64 = 1e-5;
pub const TAYLOR_RATIO_BAND: (f64, f64) = (1.6, 2.4);
pub const CORRELATION_FLOOR: f64 = 0.3;
pub const FAST_PATH_RATIO: f64 = 0.5;

/// Seeds for the paired end-to-end comparison. Disjoint from the seeds the
/// toy trade-off factor was calibrated on (100..105).
pub const PAIRED_SEEDS: [u64; 5] = [0, 1, 2, 3, 4];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub results: Vec<CriterionResult>,
}

impl CriterionResult {
    /// `PASS  1 lemma-bounds 0.53s :: detail`
    pub fn line(&self) -> String {
        format!(
            "{} {:>2} {} {}s :: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.elapsed_s,
            self.detail
        )
    }
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        !self.results.is_empty() && self.results.iter().all(|r| r.passed)
    }

    pub fn failed(&self) -> impl Iterator<Item = &CriterionResult> {
        self.results.iter().filter(|r| !r.passed)
    }

    pub fn to_text(&self) -> String {
        self.results.iter().map(|r| r.line() + "\n").collect()
    }

    /// Inverse of [`AcceptanceReport::to_text`].
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |n: usize, m: &str| UdsError::Format(format!("report line {}: {m}", n + 1));
        let mut results = Vec::new();
        for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let (head, detail) = line.split_once(" :: ").ok_or_else(|| bad(n, "missing ` :: `"))?;
            let parts: Vec<&str> = head.split_whitespace().collect();
            let [verdict, id, name, elapsed] = parts[..] else {
                return Err(bad(n, "expected `VERDICT ID NAME ELAPSEDs`"));
            };
            let passed = match verdict {
                "PASS" => true,
                "FAIL" => false,
                _ => return Err(bad(n, "verdict must be PASS or FAIL")),
            };
            results.push(CriterionResult {
                id: id.parse().map_err(|_| bad(n, "bad id"))?,
                name: name.to_string(),
                passed,
                detail: detail.to_string(),
                elapsed_s: elapsed
                    .strip_suffix('s')
                    .and_then(|e| e.parse().ok())
                    .ok_or_else(|| bad(n, "bad elapsed time"))?,
            });
        }
        Ok(Self { results })
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.results {
            out += &serde_json::to_string(r)?;
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let results = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { results })
    }
}

#[derive(Debug, Clone, Default)]
pub struct AcceptanceOptions {
    /// Run only these criterion ids.
    pub only: Option<Vec<u8>>,
    /// Negative control: multiply the stored projection scale by this
    /// factor before the fast path runs.
    pub corrupt_scale: Option<f64>,
}

type Check = fn(&AcceptanceOptions) -> Result<(bool, String)>;

pub const CRITERIA: [(u8, &str, Check); 12] = [
    (1, "lemma-bounds", lemma_bounds),
    (2, "kronecker-equivalence", kronecker_equivalence),
    (3, "isometry", isometry),
    (4, "empirical-jl", empirical_jl),
    (5, "buffer-semantics", buffer_semantics),
    (6, "selection-correctness", selection_correctness),
    (7, "gradient-integrity", gradient_integrity),
    (8, "taylor-consistency", taylor_consistency),
    (9, "correlation-analog", correlation_analog),
    (10, "end-to-end-ordering", end_to_end_ordering),
    (11, "degenerate-budget", degenerate_budget),
    (12, "fast-path-advantage", fast_path_advantage),
];

/// Runs one criterion. Errors inside a check become a failing entry.
pub fn run_criterion(id: u8, opts: &AcceptanceOptions) -> Option<CriterionResult> {
    let &(id, name, check) = CRITERIA.iter().find(|c| c.0 == id)?;
    let started = Instant::now();
    let (passed, detail) = match check(opts) {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    Some(CriterionResult {
        id,
        name: name.to_string(),
        passed,
        detail: detail.replace('\n', " "),
        elapsed_s: (started.elapsed().as_secs_f64() * 1e3).round() / 1e3,
    })
}

/// Runs the selected criteria in id order, calling `on_result` after each.
pub fn run_acceptance_with(
    opts: &AcceptanceOptions,
    mut on_result: impl FnMut(&CriterionResult),
) -> AcceptanceReport {
    let mut report = AcceptanceReport::default();
    for &(id, _, _) in &CRITERIA {
        if opts.only.as_ref().is_some_and(|o| !o.contains(&id)) {
            continue;
        }
        if let Some(r) = run_criterion(id, opts) {
            on_result(&r);
            report.results.push(r);
        }
    }
    report
}

pub fn run_acceptance(opts: &AcceptanceOptions) -> AcceptanceReport {
    run_acceptance_with(opts, |_| {})
}

fn random_logits(rng: &mut ChaCha8Rng, n: usize, v: usize) -> LogitsMatrix {
    let data = (0..n * v).map(|_| rng.random_range(-1.0..1.0)).collect();
    LogitsMatrix::from_dense(n, v, data).expect("finite by construction")
}

fn lemma_bounds(_: &AcceptanceOptions) -> Result<(bool, String)> {
    const SHAPES: [(usize, usize); 8] =
        [(4, 4), (4, 16), (8, 8), (16, 16), (16, 64), (32, 32), (32, 128), (64, 256)];
    let mut rng = ChaCha8Rng::seed_from_u64(0x1e33a);
    let mut failures = 0;
    for i in 0..1000 {
        let (n, v) = SHAPES[i % SHAPES.len()];
        let scale = 10f64.powf(rng.random_range(-3.0..3.0));
        let data = (0..n * v).map(|_| scale * rng.random_range(-1.0..1.0)).collect();
        let l = LogitsMatrix::from_dense(n, v, data)?;
        let r = nuclear_norm(&l)?;
        let tol = LEMMA_REL_TOL * r.frobenius;
        let verdict = lemma_bounds_check(&r, n.min(v));
        if !(verdict.holds() && verdict.tolerance <= tol) {
            failures += 1;
        }
    }

    // Rank one: nuclear == frobenius.
    let mut worst_rank1 = 0.0f64;
    let mut worst_flat = 0.0f64;
    for &(n, v) in &SHAPES {
        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..v).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = u.iter().flat_map(|ui| w.iter().map(move |x| ui * x)).collect();
        let r = nuclear_norm(&LogitsMatrix::from_dense(n, v, data)?)?;
        worst_rank1 = worst_rank1.max((r.nuclear - r.frobenius).abs() / r.frobenius);

        // Orthonormal rows: all singular values equal.
        let g = DMatrix::from_fn(v, n, |_, _| rng.random_range(-1.0..1.0));
        let q = g.qr().q();
        let data = (0..n * v).map(|k| 3.0 * q[(k % v, k / v)]).collect();
        let r = nuclear_norm(&LogitsMatrix::from_dense(n, v, data)?)?;
        let upper = (n.min(v) as f64).sqrt() * r.frobenius;
        worst_flat = worst_flat.max((upper - r.nuclear).abs() / upper);
    }
    let passed = failures == 0 && worst_rank1 < LEMMA_EQUALITY_TOL && worst_flat < LEMMA_EQUALITY_TOL;
    Ok((
        passed,
        format!(
            "violations {failures}/1000 (rel tol {LEMMA_REL_TOL:e}); rank-1 gap {worst_rank1:.2e}, \
             equal-spectrum gap {worst_flat:.2e} (tol {LEMMA_EQUALITY_TOL:e})"
        ),
    ))
}

fn kronecker_equivalence(opts: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xc3);
    let mut worst = 0.0f64;
    for case in 0..200u64 {
        let (n, v) = loop {
            let n = rng.random_range(1..=128usize);
            let v = rng.random_range(1..=512usize);
            if n * v <= 1 << 16 {
                break (n, v);
            }
        };
        let d1 = rng.random_range(1..=v.min(32));
        let d2 = rng.random_range(1..=n.min(32));
        let mut g1 = ProjectionFactor::generate(v, d1, case, 1)?;
        let g2 = ProjectionFactor::generate(n, d2, case, 2)?;
        let l = random_logits(&mut rng, n, v);
        let dense = project_dense_oracle(&l, &g1, &g2)?;
        if let Some(f) = opts.corrupt_scale {
            g1.scale *= f;
        }
        let fast = project_fast(&l, &g1, &g2)?;
        for (a, b) in fast.data.iter().zip(&dense.data) {
            worst = worst.max((a - b).abs());
        }
    }
    let corrupted = opts
        .corrupt_scale
        .map_or(String::new(), |f| format!(" [projection scale corrupted x{f}]"));
    Ok((
        worst <= KRONECKER_ABS_TOL,
        format!("200 instances, NV <= 2^16, max |fast - dense| {worst:.2e} (tol {KRONECKER_ABS_TOL:e}){corrupted}"),
    ))
}

fn isometry(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x150);
    let (n, v) = (64, 128);
    let points: Vec<_> = (0..16).map(|_| random_logits(&mut rng, n, v)).collect();
    let pair = ProjectionPair::build(v, n, v, n, 9)?;
    let r = distortion_with(&points, &pair)?;
    Ok((
        r.max_distortion < ISOMETRY_TOL && !r.degenerate,
        format!("16 points, {n}x{v} at full dimension, max distortion {:.2e} (tol {ISOMETRY_TOL:e})", r.max_distortion),
    ))
}

/// Spearman rank correlation, no ties expected.
fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    let rank = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    pearson(&rank(x), &rank(y))
}

fn empirical_jl(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let study = JlStudy {
        threshold: JL_MAX_DISTORTION,
        ..JlStudy::default()
    };
    let at_1024 = study.run(&[(32, 32)])?;
    let sweep = JlStudy {
        point_seed: 2000,
        ..study
    }
    .run(&[(8, 8), (16, 16), (32, 32), (64, 64)])?;
    let good = at_1024[0].seeds_within;
    let d: Vec<f64> = sweep.iter().map(|r| (r.d1 * r.d2) as f64).collect();
    let medians: Vec<f64> = sweep.iter().map(|r| r.median_distortion).collect();
    let rho = spearman(&d, &medians)?;
    Ok((
        good >= JL_MIN_GOOD_SEEDS && rho < 0.0,
        format!(
            "d=1024: max distortion <= {JL_MAX_DISTORTION} in {good}/20 seeds (worst {:.3}); \
             median distortion over d {{64,256,1024,4096}} = [{}], spearman {rho:.2}",
            at_1024[0].worst_max_distortion,
            medians.iter().map(|m| format!("{m:.4}")).collect::<Vec<_>>().join(", ")
        ),
    ))
}

fn buffer_semantics(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xbf);
    let capacity = 37;
    let dim = 6;
    let mut buffer = MemoryBuffer::new(capacity)?;
    let mut oracle: Vec<Vec<f64>> = Vec::new();
    let mut mismatches = 0;
    for op in 0..10_000 {
        let k = rng.random_range(0..=8usize);
        let batch: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..dim).map(|_| rng.random_range(-5.0..5.0)).collect())
            .collect();
        buffer.push_selected(batch.iter().cloned().map(Embedding::new).collect())?;
        oracle.extend(batch);
        if oracle.len() > capacity {
            oracle.drain(..oracle.len() - capacity);
        }
        let same = buffer.len() == oracle.len()
            && buffer.entries().zip(&oracle).all(|(e, o)| &e.data == o);
        let probe = Embedding::new((0..dim).map(|_| rng.random_range(-5.0..5.0)).collect());
        let want = if oracle.is_empty() {
            0.0
        } else {
            oracle
                .iter()
                .map(|o| o.iter().zip(&probe.data).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
                .sum::<f64>()
                / oracle.len() as f64
        };
        let got = diversity_distance(&probe, &buffer)?;
        if !same || (got - want).abs() > 1e-12 * want.max(1.0) {
            mismatches += 1;
            if mismatches == 1 {
                eprintln!("buffer mismatch at operation {op}");
            }
        }
    }
    let rejected = SelectionConfig {
        batch_size: 8,
        select_k: 4,
        buffer_capacity: 3,
        ..SelectionConfig::default()
    }
    .validate()
    .is_err();
    Ok((
        mismatches == 0 && rejected,
        format!("10^4 pushes into M = {capacity}: {mismatches} mismatches against replay; K > M rejected: {rejected}"),
    ))
}

fn selection_correctness(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1);
    let mut wrong = 0;
    for _ in 0..1000 {
        let b = rng.random_range(1..=8usize);
        let k = rng.random_range(1..=b);
        let scores: Vec<f64> = (0..b).map(|_| rng.random_range(-10.0..10.0)).collect();
        // Exhaustive: best subset sum, lowest bitmask among equals.
        let mut best: Option<(f64, u32)> = None;
        for mask in 0u32..(1 << b) {
            if mask.count_ones() as usize != k {
                continue;
            }
            let s: f64 = (0..b).filter(|i| mask >> i & 1 == 1).map(|i| scores[i]).sum();
            if best.is_none_or(|(bs, _)| s > bs) {
                best = Some((s, mask));
            }
        }
        let (_, mask) = best.expect("k <= b");
        let want: Vec<usize> = (0..b).filter(|i| mask >> i & 1 == 1).collect();
        if top_k_indices(&scores, k)? != want {
            wrong += 1;
        }
    }
    let ties_ok = (1..=8).all(|b| {
        (1..=b).all(|k| {
            let first = top_k_indices(&vec![0.5; b], k);
            first.as_ref().is_ok_and(|s| *s == (0..k).collect::<Vec<_>>())
                && (0..5).all(|_| top_k_indices(&vec![0.5; b], k).ok() == first.as_ref().ok().cloned())
        })
    });
    Ok((
        wrong == 0 && ties_ok,
        format!("{wrong}/1000 disagreements with subset enumeration (B <= 8); all-equal ties resolve to 0..K: {ties_ok}"),
    ))
}

fn grad_check(arch: Architecture, rng: &mut ChaCha8Rng) -> Result<(usize, f64)> {
    let spec = ModelSpec {
        arch,
        ..ModelSpec::default()
    };
    let corpus = make_corpus(&CorpusSpec::default(), 5)?;
    let model = ToyModel::init(spec, 17)?;
    let mut worst = 0.0f64;
    let mut checked = 0;
    for s in corpus.train.iter().step_by(97).take(4) {
        let (_, grad) = model.loss_and_grad(s)?;
        // Half the probes on coordinates the sample touches.
        let touched: Vec<usize> = (0..grad.len()).filter(|&i| grad[i] != 0.0).collect();
        for probe in 0..8 {
            let i = if probe % 2 == 0 && !touched.is_empty() {
                touched[rng.random_range(0..touched.len())]
            } else {
                rng.random_range(0..grad.len())
            };
            let mut p = model.params().to_vec();
            p[i] += GRAD_FD_STEP;
            let up = model.with_params(p.clone()).loss(s)?;
            p[i] -= 2.0 * GRAD_FD_STEP;
            let down = model.with_params(p).loss(s)?;
            let fd = (up - down) / (2.0 * GRAD_FD_STEP);
            let rel = (grad[i] - fd).abs() / grad[i].abs().max(fd.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    Ok((checked, worst))
}

fn gradient_integrity(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6d);
    let (n_lin, lin) = grad_check(Architecture::LinearSoftmax, &mut rng)?;
    let (n_mlp, mlp) = grad_check(Architecture::TinyMlp, &mut rng)?;
    Ok((
        lin < GRAD_REL_TOL && mlp < GRAD_REL_TOL && n_lin >= 20 && n_mlp >= 20,
        format!(
            "max relative error: linear {lin:.2e} over {n_lin} coords, mlp {mlp:.2e} over {n_mlp} coords \
             (tol {GRAD_REL_TOL:e}, step {GRAD_FD_STEP:e})"
        ),
    ))
}

/// Mean absolute and relative gap between actual and first-order predicted
/// loss change over `samples`, for the step `dtheta`.
fn taylor_gaps(model: &ToyModel, samples: &[Sample], dtheta: &[f64]) -> Result<(f64, f64)> {
    let after = model.with_params(model.params().iter().zip(dtheta).map(|(p, d)| p + d).collect());
    let (mut abs, mut rel) = (0.0, 0.0);
    for s in samples {
        let logits = model.forward_logits(s.inputs())?;
        let probs = softmax_rows(&logits)?;
        let dl = LogitsMatrix::from_dense(logits.rows(), logits.cols(), model.jvp(s.inputs(), dtheta)?)?;
        let labels = OneHotLabels::for_sample(s, logits.cols())?;
        let predicted = predicted_loss_delta(&dl, &probs, &labels)? / labels.labelled_rows() as f64;
        let actual = after.loss(s)? - model.loss(s)?;
        abs += (actual - predicted).abs();
        rel += (actual - predicted).abs() / predicted.abs();
    }
    let n = samples.len() as f64;
    Ok((abs / n, rel / n))
}

fn taylor_consistency(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let corpus = make_corpus(&CorpusSpec::default(), 11)?;
    let model = ToyModel::init(ModelSpec::default(), 3)?;
    let batch: Vec<&Sample> = corpus.train.iter().step_by(61).take(8).collect();
    let mut mean = vec![0.0; model.param_count()];
    for s in &batch {
        let (_, g) = model.loss_and_grad(s)?;
        for (m, x) in mean.iter_mut().zip(g) {
            *m += x / batch.len() as f64;
        }
    }
    let probe: Vec<Sample> = corpus.train.iter().step_by(5).take(100).cloned().collect();

    let mut lines = Vec::new();
    let mut passed = true;
    for (name, spec, lr) in [
        ("sgd", OptimizerSpec::Sgd { lr: 0.0 }, 0.5),
        ("adam", OptimizerSpec::adam(0.0), 2e-3),
    ] {
        let state = OptimizerState::new(spec, model.param_count());
        let (abs_hi, rel_hi) = taylor_gaps(&model, &probe, &state.step_delta_with_lr(&mean, lr)?)?;
        let (abs_lo, rel_lo) = taylor_gaps(&model, &probe, &state.step_delta_with_lr(&mean, lr / 2.0)?)?;
        let ratio = rel_hi / rel_lo;
        let ok = (TAYLOR_RATIO_BAND.0..=TAYLOR_RATIO_BAND.1).contains(&ratio);
        passed &= ok;
        lines.push(format!(
            "{name} lr {lr}: relative-gap ratio {ratio:.3} (absolute-gap ratio {:.3})",
            abs_hi / abs_lo
        ));
    }
    Ok((
        passed,
        format!(
            "{} over 100 samples; band [{}, {}] applies to the relative gap",
            lines.join("; "),
            TAYLOR_RATIO_BAND.0,
            TAYLOR_RATIO_BAND.1
        ),
    ))
}

fn quiet(mut cfg: RunConfig) -> RunConfig {
    cfg.output_dir = None;
    cfg.log_scores = false;
    cfg
}

fn correlation_analog(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut cfg = quiet(RunConfig::default());
    cfg.steps = 300;
    cfg.track_correlation = true;
    let uds = run_experiment(&cfg)?.summary.median_correlation;
    cfg.selection.scorer = Scorer::Regular;
    cfg.selection.select_k = cfg.selection.batch_size;
    let regular = run_experiment(&cfg)?.summary.median_correlation;
    let fmt = |c: Option<f64>| c.map_or("undefined".into(), |c| format!("{c:.3}"));
    Ok((
        uds.is_some_and(|c| c > CORRELATION_FLOOR),
        format!(
            "uds run, {} steps: median batch pearson(-dloss, nuclear) {} (floor {CORRELATION_FLOOR}); \
             regular run for reference {}",
            cfg.steps,
            fmt(uds),
            fmt(regular)
        ),
    ))
}

/// Final eval losses for the paired seeds, plus the slowest run time.
fn paired_losses(base: &RunConfig) -> Result<(Vec<f64>, f64)> {
    let mut losses = Vec::new();
    let mut total = 0.0;
    for &seed in &PAIRED_SEEDS {
        let mut cfg = base.clone();
        cfg.master_seed = seed;
        let t = Instant::now();
        losses.push(run_experiment(&cfg)?.summary.final_eval_loss);
        total += t.elapsed().as_secs_f64();
    }
    Ok((losses, total))
}

fn end_to_end_ordering(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut base = quiet(RunConfig::default());
    base.selection.batch_size = 8;
    base.selection.select_k = 4;
    let with = |scorer: Scorer, alpha: f64| {
        let mut c = base.clone();
        c.selection.scorer = scorer;
        c.selection.alpha = alpha;
        c
    };
    let (uds, t_uds) = paired_losses(&with(Scorer::Uds, TOY_ALPHA))?;
    let (nuc, t_nuc) = paired_losses(&with(Scorer::Uds, 0.0))?;
    let (rnd, t_rnd) = paired_losses(&with(Scorer::Random, 0.0))?;
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let diffs: Vec<f64> = rnd.iter().zip(&uds).map(|(r, u)| r - u).collect();
    let dm = mean(&diffs);
    let n = diffs.len() as f64;
    let se = (diffs.iter().map(|d| (d - dm).powi(2)).sum::<f64>() / (n - 1.0)).sqrt() / n.sqrt();
    let (mu, mn, mr) = (mean(&uds), mean(&nuc), mean(&rnd));
    let within_budget = [t_uds, t_nuc, t_rnd].iter().all(|&t| t < 600.0);
    Ok((
        mu <= mn && mn <= mr && dm > se && within_budget,
        format!(
            "mean final eval loss over seeds {PAIRED_SEEDS:?}: uds(alpha {TOY_ALPHA}) {mu:.4} <= nuclear-only {mn:.4} \
             <= random {mr:.4}; random - uds = {dm:.4} vs paired se {se:.4}; policy times {t_uds:.0}/{t_nuc:.0}/{t_rnd:.0} s"
        ),
    ))
}

fn degenerate_budget(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let mut base = quiet(RunConfig::default());
    base.steps = 150;
    base.selection.select_k = base.selection.batch_size;
    let mut full = base.clone();
    full.selection.scorer = Scorer::Uds;
    let mut regular = base.clone();
    regular.selection.scorer = Scorer::Regular;
    let a = run_experiment(&full)?;
    let b = run_experiment(&regular)?;
    let first_diff = a.param_hashes.iter().zip(&b.param_hashes).position(|(x, y)| x != y);
    let identical = first_diff.is_none()
        && a.param_hashes.len() == b.param_hashes.len()
        && a.final_params.iter().zip(&b.final_params).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok((
        identical,
        match first_diff {
            None => format!("K = B = {}: {} parameter snapshots bitwise identical to regular", base.selection.batch_size, a.param_hashes.len()),
            Some(s) => format!("trajectories diverge at step {s}"),
        },
    ))
}

fn fast_path_advantage(_: &AcceptanceOptions) -> Result<(bool, String)> {
    let (n, v) = (512, 8192);
    let mut rng = ChaCha8Rng::seed_from_u64(0xfa57);
    let l = random_logits(&mut rng, n, v);
    let g1 = ProjectionFactor::generate(v, 32, 1, 1)?;
    let g2 = ProjectionFactor::generate(n, 32, 1, 2)?;
    let t = Instant::now();
    let fast = project_fast(&l, &g1, &g2)?;
    let t_fast = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let dense = project_dense_unguarded(&l, &g1, &g2)?;
    let t_dense = t.elapsed().as_secs_f64();
    let agree = fast.data.iter().zip(&dense.data).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok((
        t_fast < FAST_PATH_RATIO * t_dense,
        format!(
            "N={n} V={v} d=1024: fast {:.2} ms, dense {:.0} ms, ratio {:.2e} (limit {FAST_PATH_RATIO}); max diff {agree:.1e}",
            t_fast * 1e3,
            t_dense * 1e3,
            t_fast / t_dense
        ),
    ))
}
