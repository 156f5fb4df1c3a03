use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use tumblecap_core::harness::{occlusion_margin, run_batch, run_scenario, RunReport, ScenarioConfig};
use tumblecap_core::observability::compare_parameterizations;
use tumblecap_core::Error;

const EXIT_SCENARIO_FAILURE: u8 = 2;
const EXIT_CONFIG: u8 = 3;
const EXIT_IO: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "tumblecap", version, about = "Simulate vision-guided capture of a tumbling target")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one scenario and write its per-epoch CSV.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for epochs.csv and trajectory.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the terminal blackout length, s.
        #[arg(long)]
        blackout: Option<f64>,
    },
    /// Run every scenario in a directory or matching glob patterns.
    Batch {
        #[arg(required = true)]
        inputs: Vec<String>,
        #[arg(long)]
        jobs: Option<usize>,
        /// Also write the table to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Longest terminal blackout that still captures within the envelope.
    Margin {
        scenario: PathBuf,
        /// Capture envelope, m.
        #[arg(long)]
        envelope: f64,
        /// Search resolution, s.
        #[arg(long, default_value_t = 0.25)]
        resolution: f64,
    },
    /// Observability Gramian conditioning of both parameterizations.
    Gramian {
        scenario: PathBuf,
        #[arg(long, default_value_t = 200)]
        epochs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Io(String),
    Scenario,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(m) => Failure::Io(m),
            Error::Config(_) | Error::InvalidArgument(_) => Failure::Config(e.to_string()),
            other => Failure::Io(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Scenario) => ExitCode::from(EXIT_SCENARIO_FAILURE),
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Io(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_IO)
        }
    }
}

fn load(path: &Path) -> Result<ScenarioConfig, Failure> {
    ScenarioConfig::load(path).map_err(|e| Failure::Config(e.to_string()))
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run { scenario, seed, out, blackout } => {
            let mut cfg = load(&scenario)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(b) = blackout {
                cfg.terminal_blackout = b;
            }
            let rep = run_scenario(&cfg)?;
            if let Some(dir) = out {
                write_run(&dir, &rep)?;
            }
            print_summary(&rep);
            if rep.success {
                Ok(())
            } else {
                Err(Failure::Scenario)
            }
        }
        Command::Batch { inputs, jobs, out } => {
            if jobs == Some(0) {
                return Err(Failure::Config("--jobs must be at least 1".into()));
            }
            let paths = expand_inputs(&inputs)?;
            let cfgs = paths.iter().map(|p| load(p)).collect::<Result<Vec<_>, _>>()?;
            let table = run_batch(&cfgs, jobs)?;
            print!("{table}");
            if let Some(path) = out {
                fs::write(&path, table.to_string()).map_err(|e| Failure::Io(e.to_string()))?;
            }
            if table.rows.iter().all(|r| r.success) {
                Ok(())
            } else {
                Err(Failure::Scenario)
            }
        }
        Command::Margin { scenario, envelope, resolution } => {
            let cfg = load(&scenario)?;
            let res = occlusion_margin(&cfg, envelope, resolution)?;
            for (blackout, err) in &res.probes {
                println!("probe blackout={blackout} position_error={err}");
            }
            println!("margin={}", res.margin);
            if res.margin > 0.0 {
                Ok(())
            } else {
                Err(Failure::Scenario)
            }
        }
        Command::Gramian { scenario, epochs, out } => {
            let cfg = load(&scenario)?;
            if epochs == 0 {
                return Err(Failure::Config("--epochs must be at least 1".into()));
            }
            let x0 = cfg.initial_target()?;
            let records = compare_parameterizations(&x0, 1.0 / cfg.rates.sensor, epochs, cfg.filter.max_step);
            let mut text = String::from("t,cond_raw,cond_normalized,variant\n");
            for r in &records {
                text.push_str(&format!("{},{},{},minimal\n", r.t, r.minimal_raw, r.minimal_normalized));
                text.push_str(&format!("{},{},{},redundant\n", r.t, r.redundant_raw, r.redundant_normalized));
            }
            match out {
                Some(path) => fs::write(&path, text).map_err(|e| Failure::Io(e.to_string()))?,
                None => print!("{text}"),
            }
            Ok(())
        }
    }
}

fn write_run(dir: &Path, rep: &RunReport) -> Result<(), Failure> {
    let io = |e: std::io::Error| Failure::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    let file = fs::File::create(dir.join("epochs.csv")).map_err(io)?;
    let mut w = std::io::BufWriter::new(file);
    rep.write_epochs_csv(&mut w)?;
    w.flush().map_err(io)?;
    if let Some(plan) = &rep.plan {
        let file = fs::File::create(dir.join("trajectory.csv")).map_err(io)?;
        let mut w = std::io::BufWriter::new(file);
        plan.write_csv(&mut w)?;
        w.flush().map_err(io)?;
    }
    Ok(())
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| x.to_string())
}

fn print_summary(rep: &RunReport) {
    println!("scenario={} seed={}", rep.name, rep.seed);
    println!("converged_at={}", fmt_opt(rep.converged_at));
    println!("departure_at={}", fmt_opt(rep.departure_at));
    println!("occlusion_at={}", fmt_opt(rep.occlusion_at));
    println!("intercept_at={}", fmt_opt(rep.intercept_at));
    println!("position_error={}", rep.position_error_at_capture);
    println!("relative_speed={}", rep.relative_speed_at_capture);
    println!("prediction_error={}", fmt_opt(rep.prediction_error));
    match rep.failure_stage {
        None => println!("result=success"),
        Some(stage) => println!("result=failure stage={}", stage.label()),
    }
}

/// Directories contribute their `*.toml` files; anything else is a glob.
/// The combined list is sorted so batch order does not depend on the shell.
fn expand_inputs(inputs: &[String]) -> Result<Vec<PathBuf>, Failure> {
    let mut paths = Vec::new();
    for input in inputs {
        let p = Path::new(input);
        if p.is_dir() {
            let entries = fs::read_dir(p).map_err(|e| Failure::Config(format!("{input}: {e}")))?;
            for entry in entries {
                let path = entry.map_err(|e| Failure::Config(e.to_string()))?.path();
                if path.extension().is_some_and(|x| x == "toml") {
                    paths.push(path);
                }
            }
        } else {
            let matches = glob::glob(input).map_err(|e| Failure::Config(format!("{input}: {e}")))?;
            let before = paths.len();
            for m in matches {
                paths.push(m.map_err(|e| Failure::Config(e.to_string()))?);
            }
            if paths.len() == before {
                return Err(Failure::Config(format!("{input}: no scenario files matched")));
            }
        }
    }
    if paths.is_empty() {
        return Err(Failure::Config("no scenario files given".into()));
    }
    paths.sort();
    paths.dedup();
    Ok(paths)
}
