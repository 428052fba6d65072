//! End-to-end runs, sweeps, artifacts and the acceptance report plumbing.

use uds::buffer::{BufferCheckpoint, MemoryBuffer};
use uds::harness::acceptance::run_acceptance_with;
use uds::harness::probe::JlStudy;
use uds::harness::{run_experiment, run_sweep, AcceptanceOptions, AcceptanceReport, Axis, LogEvent, RunConfig};
use uds::projection::FactorRecord;
use uds::toy::{SyntheticCorpus, ToyModel};
use uds::Scorer;

fn quick() -> RunConfig {
    RunConfig {
        steps: 30,
        eval_interval: 10,
        ..RunConfig::default()
    }
}

fn with_policy(mut cfg: RunConfig, scorer: Scorer) -> RunConfig {
    cfg.selection.scorer = scorer;
    cfg
}

#[test]
fn same_config_same_trajectory() {
    for scorer in [Scorer::Uds, Scorer::Random, Scorer::MaxLoss] {
        let cfg = with_policy(quick(), scorer);
        let a = run_experiment(&cfg).unwrap();
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a.param_hashes, b.param_hashes, "{scorer}");
        assert_eq!(a.rows.len(), b.rows.len());
        assert!(a.rows.iter().zip(&b.rows).all(|(x, y)| x.same_outcome(y)), "{scorer}");
    }
}

#[test]
fn different_seed_different_trajectory() {
    let a = run_experiment(&quick()).unwrap();
    let mut cfg = quick();
    cfg.master_seed = 1;
    let b = run_experiment(&cfg).unwrap();
    assert_ne!(a.param_hashes.last(), b.param_hashes.last());
}

#[test]
fn full_budget_matches_regular_training() {
    let mut cfg = quick();
    cfg.selection.select_k = cfg.selection.batch_size;
    let uds = run_experiment(&cfg).unwrap();
    let regular = run_experiment(&with_policy(cfg, Scorer::Regular)).unwrap();
    assert_eq!(uds.param_hashes, regular.param_hashes);
    assert_eq!(uds.summary.final_eval_loss, regular.summary.final_eval_loss);
}

#[test]
fn budget_is_k_per_step() {
    for scorer in [Scorer::Uds, Scorer::Random, Scorer::MaxGrad] {
        let out = run_experiment(&with_policy(quick(), scorer)).unwrap();
        assert_eq!(out.summary.trained_samples, 4 * 30, "{scorer}");
        assert!(out.rows.iter().all(|r| r.selected_fraction == 0.5));
    }
    let out = run_experiment(&with_policy(quick(), Scorer::Regular)).unwrap();
    assert_eq!(out.summary.trained_samples, 8 * 30);
}

#[test]
fn buffer_fills_to_capacity_and_stops() {
    let mut cfg = quick();
    cfg.selection.buffer_capacity = 50;
    let out = run_experiment(&cfg).unwrap();
    let occ: Vec<usize> = out.rows.iter().map(|r| r.buffer_occupancy).collect();
    assert!(occ.windows(2).all(|w| w[0] <= w[1]), "{occ:?}");
    assert_eq!(out.buffer.len(), 50);
}

#[test]
fn plain_training_learns_the_chain() {
    let mut cfg = with_policy(RunConfig::default(), Scorer::Regular);
    cfg.corpus.clusters = 0;
    cfg.corpus.templated = 0;
    cfg.steps = 150;
    let out = run_experiment(&cfg).unwrap();
    let uniform = (cfg.corpus.vocab as f64).ln();
    assert!(out.summary.initial_eval_loss > 0.9 * uniform);
    assert!(out.summary.final_eval_loss < 0.6 * uniform, "{}", out.summary.final_eval_loss);
}

#[test]
fn alpha_sweep_zero_row_is_nuclear_only() {
    let base = quick();
    let report = run_sweep(&base, Axis::Alpha, &["0".into(), "10".into()]).unwrap();
    assert_eq!(report.completed().count(), 2);
    let mut direct = base.clone();
    direct.selection.alpha = 0.0;
    let direct = run_experiment(&direct).unwrap().summary;
    let (_, zero) = report.completed().find(|(v, _)| *v == "0").unwrap();
    assert_eq!(zero.final_eval_loss, direct.final_eval_loss);
    assert_eq!(zero.alpha, 0.0);
    let (_, ten) = report.completed().find(|(v, _)| *v == "10").unwrap();
    assert_ne!(ten.final_eval_loss, zero.final_eval_loss);
}

#[test]
fn k_sweep_full_row_is_regular_and_bad_values_are_skipped() {
    let base = quick();
    let report = run_sweep(&base, Axis::K, &["2".into(), "8".into(), "9".into()]).unwrap();
    let regular = run_experiment(&with_policy(base, Scorer::Regular)).unwrap().summary;
    let (_, full) = report.completed().find(|(v, _)| *v == "8").unwrap();
    assert_eq!(full.final_eval_loss, regular.final_eval_loss);
    let skipped = report.rows.iter().find(|r| r.value == "9").unwrap();
    assert!(skipped.summary.is_none());
    assert!(skipped.warning.as_deref().unwrap().contains("K = 9"), "{:?}", skipped.warning);
    assert!(report.to_text().contains("skipped"));
}

#[test]
fn distortion_shrinks_with_projection_size() {
    let study = JlStudy { seeds: 10, ..JlStudy::default() };
    let rows = study.run(&[(2, 2), (4, 4), (8, 8), (32, 32)]).unwrap();
    for w in rows.windows(2) {
        assert!(w[1].median_distortion <= w[0].median_distortion, "{rows:?}");
        assert!(w[1].mean_max_distortion <= w[0].mean_max_distortion, "{rows:?}");
    }
}

#[test]
fn artifacts_are_written_and_reload() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = quick();
    cfg.output_dir = Some(dir.path().to_path_buf());
    cfg.track_correlation = true;
    let out = run_experiment(&cfg).unwrap();

    let log = std::fs::read_to_string(dir.path().join("log.jsonl")).unwrap();
    let events: Vec<LogEvent> = log.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let count = |f: fn(&LogEvent) -> bool| events.iter().filter(|e| f(e)).count();
    assert_eq!(count(|e| matches!(e, LogEvent::Score(_))), 8 * 30);
    assert_eq!(count(|e| matches!(e, LogEvent::LossDelta(_))), 8 * 30);
    assert_eq!(count(|e| matches!(e, LogEvent::BatchCorrelation { .. })), 30);
    assert_eq!(count(|e| matches!(e, LogEvent::Metrics(_))), out.rows.len());

    let ck = BufferCheckpoint::load(&dir.path().join("buffer.json")).unwrap();
    let buffer = MemoryBuffer::from_checkpoint(ck).unwrap();
    assert_eq!(buffer.len(), out.buffer.len());
    assert!(buffer.entries().zip(out.buffer.entries()).all(|(a, b)| a == b));

    let model = ToyModel::load(&dir.path().join("model.bin")).unwrap();
    assert_eq!(model.params(), out.final_params.as_slice());
    let factors = FactorRecord::load(&dir.path().join("projection.json")).unwrap();
    assert_eq!(&factors.vocab, out.projection.vocab_factor());
    assert_eq!(&factors.seq, out.projection.seq_factor());
    let corpus = SyntheticCorpus::load(&dir.path().join("corpus.bin")).unwrap();
    assert_eq!(corpus.spec, cfg.corpus);
    assert_eq!(RunConfig::from_file(&dir.path().join("config.txt")).unwrap(), cfg);
    assert!(dir.path().join("summary.json").exists());
}

#[test]
fn corrupted_projection_fails_the_equivalence_check() {
    let opts = AcceptanceOptions { only: Some(vec![2]), corrupt_scale: Some(1.001) };
    let report = run_acceptance_with(&opts, |_| {});
    assert_eq!(report.results.len(), 1);
    let failed: Vec<u8> = report.failed().map(|r| r.id).collect();
    assert_eq!(failed, vec![2]);
    assert!(report.to_text().starts_with("FAIL"));

    let clean = run_acceptance_with(&AcceptanceOptions { only: Some(vec![2]), corrupt_scale: None }, |_| {});
    assert!(clean.all_passed());
}

#[test]
fn acceptance_report_round_trips() {
    let opts = AcceptanceOptions { only: Some(vec![3, 5]), corrupt_scale: None };
    let report = run_acceptance_with(&opts, |_| {});
    assert_eq!(AcceptanceReport::parse(&report.to_text()).unwrap().results.len(), 2);
    assert_eq!(AcceptanceReport::from_jsonl(&report.to_jsonl().unwrap()).unwrap(), report);
}
