//! Command-line experiment runner.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dctneuron::harness::{self, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(name = "dctneuron", version, about = "Nonlinear OFDM channel identification experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Identification quality versus estimation SNR.
    Estimate(Common),
    /// Bit error rate versus detection SNR.
    Ber(Common),
    /// Inverse learning and its composition error.
    Inverse(Common),
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// SNR during identification, dB.
    #[arg(long, allow_hyphen_values = true)]
    est_snr_db: Option<String>,
    /// Comma-separated SNR list in dB: detection SNRs for `ber`, estimation
    /// SNRs for `estimate`.
    #[arg(long, allow_hyphen_values = true)]
    snr_db: Option<String>,
    /// identity | soft | hard | hard:<saturation> | file:<csv>
    #[arg(long)]
    nonlinearity: Option<String>,
    /// predistortion | iterative
    #[arg(long)]
    method: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Additional `key=value` overrides, applied last.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output CSV path; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn build_config(scenario: Scenario, args: &Common) -> dctneuron::Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| dctneuron::Error::io(path, e))?;
            let mut cfg = ExperimentConfig::default();
            cfg.apply_str(&text, &path.display().to_string())?;
            cfg
        }
        None => ExperimentConfig::default(),
    };
    cfg.scenario = scenario;
    if let Some(s) = args.seed {
        cfg.master_seed = s;
    }
    if let Some(t) = args.trials {
        cfg.trials = t;
    }
    if let Some(v) = &args.est_snr_db {
        cfg.set("est_snr_db", v)?;
    }
    if let Some(v) = &args.snr_db {
        let key = match scenario {
            Scenario::Estimate => "est_snr_grid_db",
            _ => "det_snr_grid_db",
        };
        cfg.set(key, v)?;
    }
    if let Some(v) = &args.nonlinearity {
        cfg.set("nonlinearity", v)?;
    }
    if let Some(v) = &args.method {
        cfg.set("detector.method", v)?;
    }
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| dctneuron::Error::Parameter(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(scenario: Scenario, args: &Common) -> dctneuron::Result<()> {
    let cfg = build_config(scenario, args)?;
    let records = harness::run(&cfg)?;
    match &args.out {
        Some(path) => {
            let file = File::create(path).map_err(|e| dctneuron::Error::io(path, e))?;
            let mut w = BufWriter::new(file);
            harness::write_records(&records, &mut w)?;
            w.flush().map_err(|e| dctneuron::Error::io(path, e))
        }
        None => harness::write_records(&records, io::stdout().lock()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (scenario, args) = match &cli.command {
        Command::Estimate(a) => (Scenario::Estimate, a),
        Command::Ber(a) => (Scenario::Ber, a),
        Command::Inverse(a) => (Scenario::Inverse, a),
    };
    match execute(scenario, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
