use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use serde_json::{Map, Value};

use oqt::config::normalize;
use oqt::runner::{run, run_suite_to, RunOutcome};
use oqt::suite::SuiteLevel;

/// Run a thermalization experiment or a self-test suite.
///
/// Every flag can also be set through an `OQT_` environment variable
/// (`OQT_CONFIG`, `OQT_EXPERIMENT`, `OQT_SEED`, `OQT_OUT`, `OQT_WORKERS`,
/// `OQT_MODE`, `OQT_SUITE`). Flags and variables override keys of the config file.
#[derive(Parser, Debug)]
#[command(name = "oqt", version)]
struct Args {
    /// JSON scenario config.
    #[arg(long, env = "OQT_CONFIG")]
    config: Option<PathBuf>,
    /// fig1, no_signalling, appendix_a or custom.
    #[arg(long, env = "OQT_EXPERIMENT")]
    experiment: Option<String>,
    #[arg(long, env = "OQT_SEED")]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "OQT_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: hardware parallelism).
    #[arg(long, env = "OQT_WORKERS")]
    workers: Option<usize>,
    /// master, trajectories or both.
    #[arg(long, env = "OQT_MODE")]
    mode: Option<String>,
    /// quick or full; runs the self-test suite instead of an experiment.
    #[arg(long, env = "OQT_SUITE")]
    suite: Option<String>,
}

fn execute(args: Args) -> oqt::Result<RunOutcome> {
    if let Some(level) = &args.suite {
        let level: SuiteLevel = level.parse()?;
        let out = args.out.unwrap_or_else(|| PathBuf::from("out"));
        return run_suite_to(level, args.seed.unwrap_or(0), args.workers, &out);
    }
    let mut raw = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| oqt::Error::Config(format!("cannot read config {}: {e}", path.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(oqt::Error::Config("config must be a JSON object".into())),
                Err(e) => return Err(oqt::Error::Config(format!("config is not valid JSON: {e}"))),
            }
        }
        None => Map::new(),
    };
    if let Some(e) = args.experiment {
        raw.insert("experiment".into(), Value::String(e));
    }
    if let Some(s) = args.seed {
        raw.insert("seed".into(), Value::from(s));
    }
    if let Some(m) = args.mode {
        raw.insert("mode".into(), Value::String(m));
    }
    if let Some(w) = args.workers {
        raw.insert("workers".into(), Value::from(w));
    }
    if let Some(o) = &args.out {
        raw.insert("out".into(), Value::String(o.display().to_string()));
    }
    let cfg = normalize(Value::Object(raw))?;
    run(&cfg, &PathBuf::from(&cfg.out))
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(outcome) => {
            for c in outcome.failures() {
                eprintln!("{}", c.line());
            }
            let failed = outcome.failures().count();
            if failed == 0 {
                println!("PASS ({} checks)", outcome.checks.len());
            } else {
                println!("FAIL ({failed} of {} checks)", outcome.checks.len());
            }
            ExitCode::from(outcome.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
