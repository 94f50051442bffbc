use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use leo_rsma::experiments::{
    persist, run_power_sweep, run_satellite_sweep, run_single, ExperimentConfig, ResultTable, Sidecar, Sweep,
};
use leo_rsma::wmmse::Variant;

const EXIT_CONFIG: u8 = 2;
const EXIT_PARTIAL: u8 = 3;

#[derive(Parser)]
#[command(
    version,
    about = "Rate-splitting precoding experiments for cooperative LEO downlinks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Average MMFR versus per-satellite transmit power.
    PowerSweep(Common),
    /// Average MMFR versus the number of satellites.
    SatSweep(Common),
    /// One drop at the first grid power, with iteration traces.
    Single(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated variant names, e.g. `rsma-scsi,sdma-scsi`.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
}

impl Common {
    fn resolve(&self) -> anyhow::Result<ExperimentConfig> {
        let mut config = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        if let Some(names) = &self.variants {
            config.variants = names
                .iter()
                .map(|n| n.trim().parse::<Variant>())
                .collect::<Result<_, _>>()?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn sweep_name(s: Sweep) -> &'static str {
    match s {
        Sweep::PowerDbw => "power_dbw",
        Sweep::Satellites => "satellites",
    }
}

fn print_summary(table: &ResultTable) {
    println!(
        "{:<10} {:>8} {:<13} {:>5} {:>10} {:>10} {:>10}",
        "sweep", "value", "variant", "drops", "mmfr_ub", "mmfr_true", "stderr"
    );
    for s in table.summary() {
        println!(
            "{:<10} {:>8} {:<13} {:>5} {:>10.5} {:>10.5} {:>10.2e}",
            sweep_name(s.sweep),
            s.value,
            s.variant,
            s.drops,
            s.mmfr_ub,
            s.mmfr_true,
            s.mmfr_stderr
        );
    }
}

fn sweep(config: &ExperimentConfig, kind: Sweep) -> anyhow::Result<ExitCode> {
    let table = match kind {
        Sweep::PowerDbw => run_power_sweep(config)?,
        Sweep::Satellites => run_satellite_sweep(config)?,
    };
    persist(&table, &Sidecar::new(config, kind), &config.output_dir)?;
    print_summary(&table);
    let failures = table.failures();
    if failures > 0 {
        for r in table.rows.iter().filter(|r| !r.is_ok()) {
            eprintln!(
                "{}={} drop {} {}: {}",
                sweep_name(r.sweep),
                r.value,
                r.drop,
                r.variant,
                r.status
            );
        }
        eprintln!("{failures} of {} rows failed", table.rows.len());
        return Ok(ExitCode::from(EXIT_PARTIAL));
    }
    Ok(ExitCode::SUCCESS)
}

fn single(config: &ExperimentConfig) -> anyhow::Result<ExitCode> {
    let reports = run_single(config)?;
    let dir: &Path = &config.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join("single.json");
    std::fs::write(&path, serde_json::to_string_pretty(&reports)? + "\n")
        .with_context(|| format!("writing {}", path.display()))?;
    for r in &reports {
        println!(
            "{:<13} ub {:.5} true {:.5} ± {:.1e}  {} iterations{}",
            r.variant,
            r.mmfr_ub,
            r.mmfr_true,
            r.mmfr_stderr,
            r.iterations,
            if r.converged { "" } else { " (not converged)" }
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let common = match &cli.command {
        Command::PowerSweep(c) | Command::SatSweep(c) | Command::Single(c) => c,
    };
    let config = match common.resolve() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("configuration error: {e:#}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let outcome = match cli.command {
        Command::PowerSweep(_) => sweep(&config, Sweep::PowerDbw),
        Command::SatSweep(_) => sweep(&config, Sweep::Satellites),
        Command::Single(_) => single(&config),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
