use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use scns_core::{
    config::parse_config,
    ensemble::{martingale_test, run_ensemble, EnsembleOptions, EnsembleResult, MIN_TEST_PATHS},
    io, report,
    verify::{run_suite, Suite},
    OperatorWorkspace, RngStream, ScnsError,
};

#[derive(Parser)]
#[command(name = "scns", version, about = "Simulate and audit the regularized stochastic chemotaxis-fluid system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate one path and write records and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run independent paths and write pooled statistics.
    Ensemble {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        paths: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an invariant suite.
    Verify {
        #[arg(long, value_enum)]
        suite: SuiteArg,
    },
    /// Render diagnostics of a finished run or ensemble.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        emit: Emit,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Ops,
    Model,
    Noise,
    Energy,
    Weakform,
    All,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Csv,
    Svg,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ScnsError> for Failure {
    fn from(e: ScnsError) -> Self {
        match e {
            ScnsError::ConfigInvalid(_) | ScnsError::ParseError { .. } | ScnsError::AssumptionViolation { .. } => {
                Failure::Config(e.to_string())
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

fn load_config(path: &Path) -> Result<scns_core::Config, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::Config(format!("--config {}: {e}", path.display())))?;
    Ok(parse_config(&text)?)
}

fn io_err(e: impl std::fmt::Display) -> Failure {
    Failure::Runtime(e.to_string())
}

fn cmd_run(config: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let setup = cfg.setup()?;
    fs::create_dir_all(out).map_err(io_err)?;
    let seed = seed.unwrap_or(setup.seed);
    let mut ws = OperatorWorkspace::new(&setup.grid);
    let stream = RngStream::new(seed, 0);
    let result = scns_core::run(&setup.initial, &setup.params, &setup.settings, &setup.sampler, &stream, &mut ws)?;
    fs::write(out.join("config.txt"), cfg.render()).map_err(io_err)?;
    io::write_records_file(&out.join("records.ndjson"), &result.stream.records)?;
    for (k, s) in result.snapshots.iter().enumerate() {
        io::write_state(out, &format!("snap{k:03}"), s)?;
    }
    io::write_state(out, "final", &result.final_state)?;
    log::info!(
        "{} steps ({} rejected), max courant {:.3}, records written to {}",
        result.steps,
        result.rejected_steps,
        result.max_courant,
        out.display()
    );
    Ok(())
}

fn cmd_ensemble(config: &Path, paths: usize, seed: u64, out: &Path) -> Result<(), Failure> {
    let cfg = load_config(config)?;
    let setup = cfg.setup()?;
    fs::create_dir_all(out).map_err(io_err)?;
    let result = run_ensemble(&setup, paths, seed, &EnsembleOptions::default())?;
    fs::write(out.join("config.txt"), cfg.render()).map_err(io_err)?;
    let json = serde_json::to_string_pretty(&result).map_err(io_err)?;
    fs::write(out.join("ensemble.json"), json).map_err(io_err)?;
    if paths >= MIN_TEST_PATHS {
        let mt = martingale_test(&result.me_curves())?;
        let json = serde_json::to_string_pretty(&mt).map_err(io_err)?;
        fs::write(out.join("martingale.json"), json).map_err(io_err)?;
        println!("martingale test: max |z| = {:.3}, max corr = {:.4} (bound {:.4}), {}",
            mt.max_abs_z, mt.max_increment_corr, mt.corr_bound, if mt.passed { "pass" } else { "FAIL" });
    }
    Ok(())
}

fn cmd_verify(suite: SuiteArg) -> Result<bool, Failure> {
    let name = match suite {
        SuiteArg::Ops => "ops",
        SuiteArg::Model => "model",
        SuiteArg::Noise => "noise",
        SuiteArg::Energy => "energy",
        SuiteArg::Weakform => "weakform",
        SuiteArg::All => "all",
    };
    let checks = run_suite(Suite::parse(name).expect("known suite"))?;
    let mut ok = true;
    for c in &checks {
        println!("{} {:<40} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        ok &= c.passed;
    }
    Ok(ok)
}

fn cmd_report(input: &Path, emit: Emit) -> Result<(), Failure> {
    let cfg_path = input.join("config.txt");
    let c_dagger = match fs::read_to_string(&cfg_path) {
        Ok(text) => scns_core::config::parse_unvalidated(&text)?.constants.c_dagger,
        Err(_) => 1.0,
    };
    let mut families = Vec::new();
    let records = input.join("records.ndjson");
    if records.exists() {
        families.extend(report::run_families(&io::read_records_file(&records)?, c_dagger));
    }
    let ens = input.join("ensemble.json");
    if ens.exists() {
        let text = fs::read_to_string(&ens).map_err(io_err)?;
        let result: EnsembleResult = serde_json::from_str(&text).map_err(|e| Failure::Runtime(format!("{}: {e}", ens.display())))?;
        families.push(report::ensemble_family(&result));
    }
    if families.is_empty() {
        return Err(Failure::Runtime(format!("{} holds neither records.ndjson nor ensemble.json", input.display())));
    }
    let dir = input.join("report");
    fs::create_dir_all(&dir).map_err(io_err)?;
    for f in &families {
        let (ext, body) = match emit {
            Emit::Csv => ("csv", report::to_csv(f)?),
            Emit::Svg => ("svg", report::to_svg(f)?),
        };
        fs::write(dir.join(format!("{}.{ext}", f.name)), body).map_err(io_err)?;
    }
    println!("wrote {} {} files to {}", families.len(), match emit { Emit::Csv => "csv", Emit::Svg => "svg" }, dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, &out).map(|_| true),
        Command::Ensemble { config, paths, seed, out } => cmd_ensemble(&config, paths, seed, &out).map(|_| true),
        Command::Verify { suite } => cmd_verify(suite),
        Command::Report { input, emit } => cmd_report(&input, emit).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
