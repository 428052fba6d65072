//! One-axis parameter sweeps.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, UdsError};
use crate::harness::config::RunConfig;
use crate::harness::run::{run_experiment, RunSummary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Alpha,
    K,
    D1,
    D2,
    M,
}

impl Axis {
    /// The config key the axis writes.
    pub fn key(self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::K => "select_k",
            Axis::D1 => "d1",
            Axis::D2 => "d2",
            Axis::M => "buffer_capacity",
        }
    }

    fn name(self) -> &'static str {
        match self {
            Axis::Alpha => "alpha",
            Axis::K => "K",
            Axis::D1 => "d1",
            Axis::D2 => "d2",
            Axis::M => "M",
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Axis {
    type Err = UdsError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "alpha" => Ok(Axis::Alpha),
            "k" | "select_k" => Ok(Axis::K),
            "d1" => Ok(Axis::D1),
            "d2" => Ok(Axis::D2),
            "m" | "buffer_capacity" => Ok(Axis::M),
            _ => Err(UdsError::Config(format!("unknown sweep axis {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    /// `None` when the value was skipped or the run aborted.
    pub summary: Option<RunSummary>,
    pub warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub axis: Axis,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn completed(&self) -> impl Iterator<Item = (&str, &RunSummary)> {
        self.rows
            .iter()
            .filter_map(|r| r.summary.as_ref().map(|s| (r.value.as_str(), s)))
    }

    pub fn to_text(&self) -> String {
        let mut s = format!(
            "{:>10} {:>8} {:>11} {:>8} {:>9} {:>8}  note\n",
            self.axis.name(),
            "policy",
            "eval loss",
            "trained",
            "ms/step",
            "jl max"
        );
        for r in &self.rows {
            match &r.summary {
                Some(m) => {
                    let jl = m.jl.as_ref().map_or("-".into(), |j| format!("{:.4}", j.max_distortion));
                    s += &format!(
                        "{:>10} {:>8} {:>11.5} {:>8} {:>9.3} {:>8}  {}\n",
                        r.value,
                        m.policy,
                        m.final_eval_loss,
                        m.trained_samples,
                        m.mean_step_ms,
                        jl,
                        r.warning.as_deref().unwrap_or("")
                    );
                }
                None => {
                    s += &format!(
                        "{:>10} {:>8} {:>11} {:>8} {:>9} {:>8}  skipped: {}\n",
                        r.value,
                        "-",
                        "-",
                        "-",
                        "-",
                        "-",
                        r.warning.as_deref().unwrap_or("")
                    )
                }
            }
        }
        s
    }
}

/// One run per value, in parallel. Invalid values are skipped and the reason
/// kept in the report. Each run writes to `<output_dir>/<axis>=<value>` when
/// the base config has an output directory.
pub fn run_sweep(base: &RunConfig, axis: Axis, values: &[String]) -> Result<SweepReport> {
    if values.is_empty() {
        return Err(UdsError::Config("sweep needs at least one value".into()));
    }
    let rows = values
        .par_iter()
        .map(|value| {
            let mut cfg = base.clone();
            let prepared = cfg.set(axis.key(), value).and_then(|_| cfg.validate());
            if let Err(e) = prepared {
                eprintln!("warning: skipping {axis} = {value}: {e}");
                return SweepRow {
                    value: value.clone(),
                    summary: None,
                    warning: Some(e.to_string()),
                };
            }
            cfg.output_dir = base.output_dir.as_ref().map(|d| d.join(format!("{axis}={value}")));
            match run_experiment(&cfg) {
                Ok(out) => SweepRow {
                    value: value.clone(),
                    summary: Some(out.summary),
                    warning: None,
                },
                Err(e) => {
                    eprintln!("warning: run {axis} = {value} aborted: {e}");
                    SweepRow {
                        value: value.clone(),
                        summary: None,
                        warning: Some(format!("aborted: {e}")),
                    }
                }
            }
        })
        .collect();
    let report = SweepReport { axis, rows };
    if let Some(dir) = &base.output_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("sweep.txt"), report.to_text())?;
        std::fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok(report)
}
