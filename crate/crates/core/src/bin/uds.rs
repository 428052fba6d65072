//! Command-line front end. Every run-config key is also a flag
//! (`--batch_size 8`); `--config FILE` supplies defaults, `$UDS_OUTPUT_DIR`
//! overrides the file's output directory, and explicit flags win over both.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{value_parser, Arg, ArgMatches, Command};

use uds::buffer::{BufferCheckpoint, MemoryBuffer};
use uds::harness::acceptance::run_acceptance_with;
use uds::harness::config::KEYS;
use uds::harness::probe::{jl_table, JlStudy};
use uds::harness::run::summary_text;
use uds::harness::{run_experiment, run_sweep, AcceptanceOptions, Axis, RunConfig};
use uds::{Result, UdsError};

fn with_config_flags(cmd: Command) -> Command {
    let cmd = cmd.arg(
        Arg::new("config")
            .long("config")
            .short('c')
            .value_name("FILE")
            .value_parser(value_parser!(PathBuf))
            .help("key = value file; flags override it"),
    );
    KEYS.iter().fold(cmd, |cmd, &key| {
        cmd.arg(Arg::new(key).long(key).value_name("VALUE").help_heading("Run config"))
    })
}

fn cli() -> Command {
    Command::new("uds")
        .about("Utility-diversity online batch selection on a toy language model")
        .subcommand_required(true)
        .subcommand(with_config_flags(Command::new("run").about("Run one experiment")))
        .subcommand(
            with_config_flags(Command::new("sweep").about("Run one experiment per value of one axis"))
                .arg(Arg::new("axis").long("axis").required(true).help("alpha, K, d1, d2 or M"))
                .arg(
                    Arg::new("values")
                        .long("values")
                        .required(true)
                        .value_delimiter(',')
                        .help("comma-separated axis values"),
                ),
        )
        .subcommand(
            Command::new("accept")
                .about("Run the acceptance suite")
                .arg(
                    Arg::new("only")
                        .long("only")
                        .value_delimiter(',')
                        .value_parser(value_parser!(u8))
                        .help("criterion ids to run"),
                )
                .arg(
                    Arg::new("corrupt-scale")
                        .long("corrupt-scale")
                        .value_parser(value_parser!(f64))
                        .help("negative control: scale the stored projection factor"),
                )
                .arg(
                    Arg::new("report")
                        .long("report")
                        .value_parser(value_parser!(PathBuf))
                        .help("write the text report here"),
                )
                .arg(
                    Arg::new("jsonl")
                        .long("jsonl")
                        .value_parser(value_parser!(PathBuf))
                        .help("write the report as JSON lines here"),
                ),
        )
        .subcommand(
            Command::new("probe-jl")
                .about("Projection distortion over random points for several output sizes")
                .arg(Arg::new("rows").long("rows").default_value("64").value_parser(value_parser!(usize)))
                .arg(Arg::new("cols").long("cols").default_value("128").value_parser(value_parser!(usize)))
                .arg(Arg::new("points").long("points").default_value("32").value_parser(value_parser!(usize)))
                .arg(Arg::new("seeds").long("seeds").default_value("20").value_parser(value_parser!(u64)))
                .arg(
                    Arg::new("threshold")
                        .long("threshold")
                        .default_value("0.5")
                        .value_parser(value_parser!(f64)),
                )
                .arg(
                    Arg::new("dims")
                        .long("dims")
                        .default_value("8x8,16x16,32x32,64x64")
                        .value_delimiter(',')
                        .help("d1xd2 pairs"),
                ),
        )
        .subcommand(
            Command::new("inspect-buffer")
                .about("Summarize a saved buffer checkpoint")
                .arg(
                    Arg::new("path")
                        .required(true)
                        .value_parser(value_parser!(PathBuf))
                        .help("buffer.json or a run output directory"),
                )
                .arg(
                    Arg::new("entries")
                        .long("entries")
                        .default_value("5")
                        .value_parser(value_parser!(usize))
                        .help("entries to list from each end"),
                ),
        )
}

fn build_config(m: &ArgMatches) -> Result<RunConfig> {
    let mut cfg = match m.get_one::<PathBuf>("config") {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_env();
    for &key in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)?;
        }
    }
    Ok(cfg)
}

fn cmd_run(m: &ArgMatches) -> Result<ExitCode> {
    let cfg = build_config(m)?;
    let out = run_experiment(&cfg)?;
    print!("{}", summary_text(&out.summary, &out.rows));
    if let Some(dir) = &cfg.output_dir {
        println!("outputs in {}", dir.display());
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(m: &ArgMatches) -> Result<ExitCode> {
    let cfg = build_config(m)?;
    let axis: Axis = m.get_one::<String>("axis").expect("required").parse()?;
    let values: Vec<String> = m.get_many::<String>("values").expect("required").cloned().collect();
    let report = run_sweep(&cfg, axis, &values)?;
    print!("{}", report.to_text());
    Ok(if report.completed().next().is_some() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn cmd_accept(m: &ArgMatches) -> Result<ExitCode> {
    let opts = AcceptanceOptions {
        only: m.get_many::<u8>("only").map(|v| v.copied().collect()),
        corrupt_scale: m.get_one::<f64>("corrupt-scale").copied(),
    };
    let report = run_acceptance_with(&opts, |r| println!("{}", r.line()));
    if let Some(path) = m.get_one::<PathBuf>("report") {
        std::fs::write(path, report.to_text())?;
    }
    if let Some(path) = m.get_one::<PathBuf>("jsonl") {
        std::fs::write(path, report.to_jsonl()?)?;
    }
    let passed = report.results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", report.results.len());
    for r in report.failed() {
        eprintln!("failed: {} {}", r.id, r.name);
    }
    Ok(if report.all_passed() { ExitCode::SUCCESS } else { ExitCode::from(2) })
}

fn cmd_probe(m: &ArgMatches) -> Result<ExitCode> {
    let dims = m
        .get_many::<String>("dims")
        .expect("defaulted")
        .map(|s| {
            let (a, b) = s
                .split_once('x')
                .ok_or_else(|| UdsError::Config(format!("expected d1xd2, got {s:?}")))?;
            let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| UdsError::Config(format!("bad dimension in {s:?}")));
            Ok((parse(a)?, parse(b)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let study = JlStudy {
        rows: *m.get_one("rows").expect("defaulted"),
        cols: *m.get_one("cols").expect("defaulted"),
        points: *m.get_one("points").expect("defaulted"),
        seeds: *m.get_one("seeds").expect("defaulted"),
        threshold: *m.get_one("threshold").expect("defaulted"),
        ..JlStudy::default()
    };
    println!(
        "{} points of {}x{}, {} seeds, threshold {}",
        study.points, study.rows, study.cols, study.seeds, study.threshold
    );
    print!("{}", jl_table(&study.run(&dims)?));
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(m: &ArgMatches) -> Result<ExitCode> {
    let mut path = m.get_one::<PathBuf>("path").expect("required").clone();
    if path.is_dir() {
        path.push("buffer.json");
    }
    let ck = BufferCheckpoint::load(&path)?;
    MemoryBuffer::from_checkpoint(ck.clone())?;
    let show = *m.get_one::<usize>("entries").expect("defaulted");
    println!("buffer {}", path.display());
    println!("  format {}  projection {}", ck.version, ck.factor_version);
    println!(
        "  capacity {}  occupied {}  pushed in total {}",
        ck.capacity,
        ck.entries.len(),
        ck.total_pushed
    );
    if let Some(e) = ck.entries.first() {
        println!("  embedding dim {}", e.dim());
    }
    let n = ck.entries.len();
    for (i, e) in ck.entries.iter().enumerate() {
        if i < show || i + show >= n {
            let norm = e.data.iter().map(|x| x * x).sum::<f64>().sqrt();
            println!("  [{i:>4}] step {} sample {}  norm {norm:.4}", e.source_step, e.source_sample);
        } else if i == show {
            println!("  ...");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let result = match matches.subcommand() {
        Some(("run", m)) => cmd_run(m),
        Some(("sweep", m)) => cmd_sweep(m),
        Some(("accept", m)) => cmd_accept(m),
        Some(("probe-jl", m)) => cmd_probe(m),
        Some(("inspect-buffer", m)) => cmd_inspect(m),
        _ => unreachable!("subcommand required"),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::FAILURE
    })
}
