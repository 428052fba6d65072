//! Sweeps the diversity weight. Zero is nuclear-norm selection alone.

use uds::harness::{run_sweep, Axis, RunConfig};

fn main() -> uds::Result<()> {
    let base = RunConfig { steps: 150, ..RunConfig::default() };
    let values: Vec<String> = ["0", "1", "3", "10", "30"].iter().map(|s| s.to_string()).collect();
    print!("{}", run_sweep(&base, Axis::Alpha, &values)?.to_text());
    Ok(())
}
