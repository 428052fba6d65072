//! Trains the toy model under several selection policies at the same
//! budget and prints the final held-out loss of each.
//!
//! `cargo run --release --example training_run -- 300` sets the step count.

use uds::harness::{run_experiment, RunConfig};
use uds::Scorer;

fn main() -> uds::Result<()> {
    let steps = std::env::args().nth(1).map_or(Ok(200), |s| s.parse()).expect("steps must be an integer");
    for (name, scorer, alpha) in [
        ("uds", Scorer::Uds, None),
        ("nuclear only", Scorer::Uds, Some(0.0)),
        ("max loss", Scorer::MaxLoss, None),
        ("random", Scorer::Random, None),
        ("regular (2x budget)", Scorer::Regular, None),
    ] {
        let mut cfg = RunConfig { steps, ..RunConfig::default() };
        cfg.selection.scorer = scorer;
        if let Some(a) = alpha {
            cfg.selection.alpha = a;
        }
        let s = run_experiment(&cfg)?.summary;
        println!(
            "{name:>20}: eval loss {:.4} -> {:.4}, {} samples, {:.2} ms/step",
            s.initial_eval_loss, s.final_eval_loss, s.trained_samples, s.mean_step_ms
        );
    }
    Ok(())
}
