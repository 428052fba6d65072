//! The training loop: draw a batch, score it with the configured policy,
//! train on the selected subset, evaluate periodically.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::buffer::MemoryBuffer;
use crate::error::{Result, UdsError};
use crate::harness::config::RunConfig;
use crate::harness::rng::{self, derive_seed, substream};
use crate::logits::softmax_rows;
use crate::norm::nuclear_norm;
use crate::projection::{distortion_with, DistortionReport, FactorRecord, ProjectionPair};
use crate::selector::{
    baseline_score, select_baseline, uds_step, BaselineInputs, Candidate, ScoreRecord, Scorer,
};
use crate::taylor::{predicted_loss_delta, LossDeltaRecord, OneHotLabels};
use crate::toy::{make_corpus, OptimizerState, Sample, SyntheticCorpus, ToyModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// Updates completed so far.
    pub step: usize,
    pub policy: Scorer,
    /// Mean loss of the trained samples since the previous row.
    pub train_loss: f64,
    pub eval_loss: f64,
    pub selected_fraction: f64,
    pub buffer_occupancy: usize,
    /// Median per-batch correlation since the previous row, when tracked.
    pub correlation: Option<f64>,
    /// Mean wall time per step since the previous row. Excluded from
    /// determinism comparisons.
    pub wall_ms: f64,
}

impl MetricsRow {
    /// Equality ignoring wall time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        let strip = |r: &Self| Self { wall_ms: 0.0, ..r.clone() };
        strip(self) == strip(other)
    }
}

/// One line of the run log. The `kind` field names the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogEvent {
    Score(ScoreRecord),
    LossDelta(LossDeltaRecord),
    BatchCorrelation { step: usize, pearson: Option<f64> },
    Metrics(MetricsRow),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: Scorer,
    pub alpha: f64,
    pub batch_size: usize,
    pub select_k: usize,
    pub buffer_capacity: usize,
    pub d1: usize,
    pub d2: usize,
    pub steps: usize,
    pub trained_samples: usize,
    pub initial_eval_loss: f64,
    pub final_eval_loss: f64,
    pub median_correlation: Option<f64>,
    pub mean_step_ms: f64,
    /// Projection distortion over final-model eval logits.
    pub jl: Option<DistortionReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub summary: RunSummary,
    pub final_params: Vec<f64>,
    /// Hash of the parameters after every update.
    pub param_hashes: Vec<u64>,
    pub batch_correlations: Vec<Option<f64>>,
    pub buffer: MemoryBuffer,
    pub projection: ProjectionPair,
}

/// FNV-1a over the bit patterns, for bitwise trajectory comparison.
pub fn param_hash(params: &[f64]) -> u64 {
    params.iter().fold(0xcbf2_9ce4_8422_2325u64, |h, x| {
        x.to_bits()
            .to_le_bytes()
            .iter()
            .fold(h, |h, &b| (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01b3))
    })
}

struct LogWriter {
    out: Option<BufWriter<File>>,
}

impl LogWriter {
    fn open(dir: Option<&Path>) -> Result<Self> {
        let out = match dir {
            Some(d) => {
                std::fs::create_dir_all(d)?;
                Some(BufWriter::new(File::create(d.join("log.jsonl"))?))
            }
            None => None,
        };
        Ok(Self { out })
    }

    fn emit(&mut self, event: &LogEvent) -> Result<()> {
        if let Some(w) = &mut self.out {
            serde_json::to_writer(&mut *w, event)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        if let Some(mut w) = self.out {
            w.flush()?;
        }
        Ok(())
    }
}

fn at_step(step: usize, sample: &str) -> impl Fn(UdsError) -> UdsError + '_ {
    move |e| match e {
        e @ UdsError::Step { .. } => e,
        e => UdsError::Step {
            step,
            sample: sample.to_string(),
            source: Box::new(e),
        },
    }
}

pub fn eval_loss(model: &ToyModel, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(f64::NAN);
    }
    let losses = samples
        .par_iter()
        .map(|s| model.loss(s))
        .collect::<Result<Vec<_>>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Endless batch stream: reshuffle every epoch, drop the ragged tail.
struct BatchOrder {
    rng: ChaCha8Rng,
    order: Vec<usize>,
    pos: usize,
    batch: usize,
}

impl BatchOrder {
    fn new(n: usize, batch: usize, rng: ChaCha8Rng) -> Self {
        Self {
            rng,
            order: (0..n).collect(),
            pos: n,
            batch,
        }
    }

    fn next_batch(&mut self) -> Vec<usize> {
        if self.pos + self.batch > self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.pos = 0;
        }
        let b = self.order[self.pos..self.pos + self.batch].to_vec();
        self.pos += self.batch;
        b
    }
}

fn median(v: &[f64]) -> Option<f64> {
    crate::taylor::median_cutoff(v)
}

/// Runs one experiment. When `config.output_dir` is set, writes `log.jsonl`,
/// `summary.txt`, `config.txt` and the final buffer, projection, model and
/// corpus checkpoints there.
pub fn run_experiment(config: &RunConfig) -> Result<RunOutput> {
    config.validate()?;
    let sel = &config.selection;
    let corpus = make_corpus(&config.corpus, derive_seed(config.master_seed, rng::CORPUS))?;
    let mut model = ToyModel::init(config.model.clone(), derive_seed(config.master_seed, rng::MODEL_INIT))?;
    let pair = ProjectionPair::build(
        config.model.vocab,
        config.model.context,
        sel.d1,
        sel.d2,
        derive_seed(config.master_seed, rng::PROJECTION),
    )?;
    let mut batches = BatchOrder::new(
        corpus.train.len(),
        sel.batch_size,
        substream(config.master_seed, rng::BATCH_ORDER),
    );
    let mut policy_rng = substream(config.master_seed, rng::RANDOM_POLICY);
    let mut buffer = MemoryBuffer::new(sel.buffer_capacity)?;
    let mut opt = OptimizerState::new(config.optimizer, model.param_count());
    let mut log = LogWriter::open(config.output_dir.as_deref())?;

    let initial_eval_loss = eval_loss(&model, &corpus.eval)?;
    let mut rows = Vec::new();
    let mut param_hashes = Vec::with_capacity(config.steps);
    let mut batch_correlations = Vec::new();
    let mut trained_samples = 0usize;
    let (mut win_loss, mut win_n, mut win_ms, mut win_steps) = (0.0, 0usize, 0.0, 0usize);
    let mut win_corr: Vec<f64> = Vec::new();
    let mut total_ms = 0.0;

    for step in 0..config.steps {
        let idx = batches.next_batch();
        let batch: Vec<&Sample> = idx.iter().map(|&i| &corpus.train[i]).collect();
        let started = Instant::now();

        let (selected, records) = select(step, &batch, config, &model, &mut buffer, &pair, &mut policy_rng)?;

        let grads = selected
            .par_iter()
            .map(|&i| model.loss_and_grad(batch[i]).map_err(at_step(step, &batch[i].id)))
            .collect::<Result<Vec<_>>>()?;
        let mut mean = vec![0.0; model.param_count()];
        for (_, g) in &grads {
            for (m, x) in mean.iter_mut().zip(g) {
                *m += x;
            }
        }
        let inv = 1.0 / grads.len() as f64;
        mean.iter_mut().for_each(|m| *m *= inv);
        let before = model.clone();
        let first = &batch[selected[0]].id;
        opt.apply_update(model.params_mut(), &mean).map_err(at_step(step, first))?;

        let ms = started.elapsed().as_secs_f64() * 1e3;
        total_ms += ms;
        trained_samples += selected.len();
        param_hashes.push(param_hash(model.params()));
        win_loss += grads.iter().map(|(l, _)| l).sum::<f64>();
        win_n += grads.len();
        win_ms += ms;
        win_steps += 1;

        if config.log_scores {
            for r in records {
                log.emit(&LogEvent::Score(r))?;
            }
        }
        if config.track_correlation {
            let deltas = loss_deltas(step, &batch, &before, &model)?;
            let corr = crate::taylor::correlation_probe(&deltas).ok();
            for d in deltas {
                log.emit(&LogEvent::LossDelta(d))?;
            }
            log.emit(&LogEvent::BatchCorrelation { step, pearson: corr })?;
            batch_correlations.push(corr);
            win_corr.extend(corr);
        }

        let done = step + 1;
        if done % config.eval_interval == 0 || done == config.steps {
            let row = MetricsRow {
                step: done,
                policy: sel.scorer,
                train_loss: win_loss / win_n as f64,
                eval_loss: eval_loss(&model, &corpus.eval)?,
                selected_fraction: selected.len() as f64 / sel.batch_size as f64,
                buffer_occupancy: buffer.len(),
                correlation: median(&win_corr),
                wall_ms: win_ms / win_steps as f64,
            };
            log.emit(&LogEvent::Metrics(row.clone()))?;
            rows.push(row);
            (win_loss, win_n, win_ms, win_steps) = (0.0, 0, 0.0, 0);
            win_corr.clear();
        }
    }

    let final_eval_loss = match rows.last() {
        Some(r) => r.eval_loss,
        None => initial_eval_loss,
    };
    let all_corr: Vec<f64> = batch_correlations.iter().flatten().copied().collect();
    let summary = RunSummary {
        policy: sel.scorer,
        alpha: sel.alpha,
        batch_size: sel.batch_size,
        select_k: sel.select_k,
        buffer_capacity: sel.buffer_capacity,
        d1: sel.d1,
        d2: sel.d2,
        steps: config.steps,
        trained_samples,
        initial_eval_loss,
        final_eval_loss,
        median_correlation: median(&all_corr),
        mean_step_ms: if config.steps > 0 { total_ms / config.steps as f64 } else { 0.0 },
        jl: jl_on_eval(&model, &corpus, &pair),
    };
    log.finish()?;
    if let Some(dir) = &config.output_dir {
        write_artifacts(dir, config, &summary, &rows, &model, &corpus, &buffer, &pair)?;
    }
    Ok(RunOutput {
        rows,
        summary,
        final_params: model.params().to_vec(),
        param_hashes,
        batch_correlations,
        buffer,
        projection: pair,
    })
}

/// Scores the batch and returns the selected indices (ascending).
fn select(
    step: usize,
    batch: &[&Sample],
    config: &RunConfig,
    model: &ToyModel,
    buffer: &mut MemoryBuffer,
    pair: &ProjectionPair,
    policy_rng: &mut ChaCha8Rng,
) -> Result<(Vec<usize>, Vec<ScoreRecord>)> {
    let sel = &config.selection;
    let ids: Vec<String> = batch.iter().map(|s| s.id.clone()).collect();
    match sel.scorer {
        Scorer::Uds => {
            let candidates = batch
                .par_iter()
                .map(|s| {
                    let logits = model.forward_padded(s.inputs()).map_err(at_step(step, &s.id))?;
                    Ok(Candidate {
                        id: s.id.clone(),
                        logits,
                        response_mask: Some(s.response_mask()),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let out = uds_step(step, &candidates, sel, buffer, pair)?;
            Ok((out.selected, out.records))
        }
        scorer => {
            let (losses, grad_norms) = match scorer {
                Scorer::MaxLoss => {
                    let l = batch
                        .par_iter()
                        .map(|s| model.loss(s).map_err(at_step(step, &s.id)))
                        .collect::<Result<Vec<_>>>()?;
                    (Some(l), None)
                }
                Scorer::MaxGrad => {
                    let g = batch
                        .par_iter()
                        .map(|s| {
                            let (_, g) = model.loss_and_grad(s).map_err(at_step(step, &s.id))?;
                            Ok(g.iter().map(|x| x * x).sum::<f64>().sqrt())
                        })
                        .collect::<Result<Vec<_>>>()?;
                    (None, Some(g))
                }
                _ => (None, None),
            };
            let inputs = BaselineInputs {
                losses: losses.as_deref(),
                grad_norms: grad_norms.as_deref(),
            };
            let mut records = baseline_score(step, &ids, inputs, scorer, policy_rng)?;
            let selected = select_baseline(&mut records, sel.select_k)?;
            Ok((selected, records))
        }
    }
}

/// Actual and first-order predicted loss change of every candidate under
/// the update just taken.
fn loss_deltas(
    step: usize,
    batch: &[&Sample],
    before: &ToyModel,
    after: &ToyModel,
) -> Result<Vec<LossDeltaRecord>> {
    let dtheta: Vec<f64> = after
        .params()
        .iter()
        .zip(before.params())
        .map(|(a, b)| a - b)
        .collect();
    batch
        .par_iter()
        .map(|s| {
            let wrap = at_step(step, &s.id);
            let logits = before.forward_logits(s.inputs()).map_err(&wrap)?;
            let nuclear = nuclear_norm(&logits).map_err(&wrap)?.nuclear;
            let probs = softmax_rows(&logits).map_err(&wrap)?;
            let raw = before.jvp(s.inputs(), &dtheta).map_err(&wrap)?;
            let dl = crate::logits::LogitsMatrix::from_dense(logits.rows(), logits.cols(), raw)
                .map_err(&wrap)?;
            let labels = OneHotLabels::for_sample(s, logits.cols()).map_err(&wrap)?;
            let predicted = predicted_loss_delta(&dl, &probs, &labels).map_err(&wrap)?
                / labels.labelled_rows() as f64;
            let lb = before.loss(s).map_err(&wrap)?;
            let la = after.loss(s).map_err(&wrap)?;
            Ok(LossDeltaRecord::new(step, s.id.clone(), lb, la, predicted, nuclear))
        })
        .collect()
}

fn jl_on_eval(model: &ToyModel, corpus: &SyntheticCorpus, pair: &ProjectionPair) -> Option<DistortionReport> {
    let points = corpus
        .eval
        .iter()
        .take(32)
        .map(|s| model.forward_padded(s.inputs()))
        .collect::<Result<Vec<_>>>()
        .ok()?;
    distortion_with(&points, pair).ok()
}

#[allow(clippy::too_many_arguments)]
fn write_artifacts(
    dir: &Path,
    config: &RunConfig,
    summary: &RunSummary,
    rows: &[MetricsRow],
    model: &ToyModel,
    corpus: &SyntheticCorpus,
    buffer: &MemoryBuffer,
    pair: &ProjectionPair,
) -> Result<()> {
    std::fs::write(dir.join("config.txt"), config.to_text())?;
    std::fs::write(dir.join("summary.txt"), summary_text(summary, rows))?;
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(summary)?)?;
    FactorRecord::new(pair.vocab_factor().clone(), pair.seq_factor().clone())
        .save(&dir.join("projection.json"))?;
    buffer.to_checkpoint().save(&dir.join("buffer.json"))?;
    model.save(&dir.join("model.bin"))?;
    corpus.save(&dir.join("corpus.bin"))?;
    Ok(())
}

/// Plain-text metrics table followed by the run totals.
pub fn summary_text(summary: &RunSummary, rows: &[MetricsRow]) -> String {
    let mut s = format!(
        "{:>6} {:>8} {:>10} {:>10} {:>6} {:>7} {:>8} {:>9}\n",
        "step", "policy", "train", "eval", "K/B", "buffer", "corr", "ms/step"
    );
    for r in rows {
        let corr = r.correlation.map_or("-".to_string(), |c| format!("{c:.3}"));
        s += &format!(
            "{:>6} {:>8} {:>10.5} {:>10.5} {:>6.3} {:>7} {:>8} {:>9.3}\n",
            r.step, r.policy, r.train_loss, r.eval_loss, r.selected_fraction, r.buffer_occupancy, corr, r.wall_ms
        );
    }
    s += &format!(
        "\npolicy {}  alpha {}  B {}  K {}  M {}  d {}x{}\n",
        summary.policy, summary.alpha, summary.batch_size, summary.select_k, summary.buffer_capacity, summary.d1, summary.d2
    );
    s += &format!(
        "steps {}  trained samples {}  eval loss {:.5} -> {:.5}  mean step {:.3} ms\n",
        summary.steps, summary.trained_samples, summary.initial_eval_loss, summary.final_eval_loss, summary.mean_step_ms
    );
    if let Some(c) = summary.median_correlation {
        s += &format!("median batch correlation {c:.4}\n");
    }
    if let Some(jl) = &summary.jl {
        s += &format!("projection distortion max {:.4} mean {:.4}\n", jl.max_distortion, jl.mean_distortion);
    }
    s
}
