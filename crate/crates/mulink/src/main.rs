//! Thin command-line front end over the library's harness: each
//! subcommand is one scenario runner, driven by a TOML config file plus a
//! few overriding flags. Errors leave as a single machine-readable JSON
//! line on stderr and a nonzero exit status.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mulink::harness::{
    CsiMode, Scenario, SimConfig, load_config, run_estimate_stats, run_scenario,
};

#[derive(Parser)]
#[command(
    name = "mulink",
    version,
    about = "Multi-user MIMO-OFDM link simulations",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run description; built-in defaults apply when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Output stem, overriding the config; files land at <out>.csv etc.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// CSI mode, overriding the config: perfect, exact, nire, or decay.
    #[arg(long, value_name = "CSI-MODE")]
    mode: Option<CsiMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Uplink BER/SER/goodput sweep over SNR.
    Uplink(RunArgs),
    /// Precoded downlink sweep over SNR.
    Downlink(RunArgs),
    /// Flat-fading detector comparison on shared draws.
    DetectBench(RunArgs),
    /// PAPR, CCDF, ACLR, PSD, and tone-reservation report.
    Waveform(RunArgs),
    /// Estimate covariance statistics and write them as matrix files.
    EstimateStats(RunArgs),
}

impl Command {
    fn split(&self) -> (Option<Scenario>, &RunArgs) {
        match self {
            Command::Uplink(a) => (Some(Scenario::Uplink), a),
            Command::Downlink(a) => (Some(Scenario::Downlink), a),
            Command::DetectBench(a) => (Some(Scenario::DetectBench), a),
            Command::Waveform(a) => (Some(Scenario::Waveform), a),
            Command::EstimateStats(a) => (None, a),
        }
    }
}

fn effective_config(scenario: Option<Scenario>, args: &RunArgs) -> mulink::Result<SimConfig> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => SimConfig::default(),
    };
    if let (Some(sub), Some(file)) = (scenario, cfg.scenario) {
        if sub != file {
            return Err(mulink::Error::InvalidConfig(format!(
                "config selects scenario \"{file}\" but the subcommand is \"{sub}\""
            )));
        }
    }
    if let Some(s) = scenario {
        cfg.scenario = Some(s);
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &args.out {
        cfg.out = out.display().to_string();
    }
    if let Some(mode) = args.mode {
        cfg.equalizer.csi_mode = mode;
    }
    Ok(cfg)
}

fn run(command: &Command) -> mulink::Result<()> {
    let (scenario, args) = command.split();
    let cfg = effective_config(scenario, args)?;
    if matches!(command, Command::EstimateStats(_)) {
        let written = run_estimate_stats(&cfg)?;
        println!("estimate-stats: seed {}, config {}", cfg.seed, cfg.hash());
        for path in &written {
            println!("wrote {}", path.display());
        }
        return Ok(());
    }
    let report = run_scenario(&cfg)?;
    let written = report.write_files(&cfg.out)?;
    println!(
        "{}: seed {}, config {}, {} result rows, {} aborted points",
        report.scenario,
        report.seed,
        report.config_hash,
        report.link_rows.len() + report.detect_rows.len() + report.waveform_rows.len(),
        report.aborted.len()
    );
    for path in &written {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let line = serde_json::json!({ "error": e.to_string(), "kind": e.kind() });
            eprintln!("{line}");
            ExitCode::FAILURE
        }
    }
}
