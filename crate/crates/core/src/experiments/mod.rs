//! Sweeps over transmit power and satellite count, Monte Carlo evaluation of
//! every designed variant, and CSV/JSON persistence of the results.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{generate_statistics, ArrayConfig, ChannelStatistics, RicianTable};
use crate::error::{Error, Result};
use crate::geometry::{build_scenario, ScenarioConfig};
use crate::rates::{ergodic_rates_mc, mc_stream};
use crate::wmmse::{optimize_variants, Csi, IterationTrace, OptimizerSettings, Variant, VariantInputs, VariantResult};

/// Column names of the results CSV, in order.
pub const CSV_HEADER: &str = "sweep,value,variant,drop,mmfr_ub,mmfr_true,mmfr_stderr,iterations,wall_time,status";

/// Version of the CSV/sidecar layout.
pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub const RESULTS_FILE: &str = "results.csv";
pub const SIDECAR_FILE: &str = "results.json";

/// Everything that defines an experiment run. Missing fields take their
/// [`Default`] values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Constellation and UT layout. `num_satellites` is the fixed S of the
    /// power sweep; `rng_seed` is replaced per drop.
    pub scenario: ScenarioConfig,
    pub arrays: ArrayConfig,
    pub rician: RicianTable,
    /// Per-satellite power budgets of the power sweep (dBW).
    pub power_grid_dbw: Vec<f64>,
    /// Satellite counts of the satellite sweep.
    pub satellite_grid: Vec<usize>,
    /// Power budget of the satellite sweep (dBW).
    pub sweep_power_dbw: f64,
    pub variants: Vec<Variant>,
    pub mc_samples: usize,
    /// Realizations each iCSI design is averaged over.
    pub design_realizations: usize,
    pub num_drops: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub max_iters: usize,
    pub rel_obj_tol: f64,
    pub solver_tol: f64,
    /// Write measured run times instead of zeros. Off by default so that
    /// reruns produce identical files.
    pub record_wall_time: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let opt = OptimizerSettings::default();
        ExperimentConfig {
            scenario: ScenarioConfig::default(),
            arrays: ArrayConfig::default(),
            rician: RicianTable::default(),
            power_grid_dbw: vec![5.0, 10.0, 15.0, 20.0],
            satellite_grid: vec![1, 2, 4],
            sweep_power_dbw: 15.0,
            variants: Variant::ALL.to_vec(),
            mc_samples: 5000,
            design_realizations: 50,
            num_drops: 10,
            seed: 1,
            output_dir: PathBuf::from("results"),
            max_iters: opt.max_iters,
            rel_obj_tol: opt.rel_obj_tol,
            solver_tol: opt.solver_tol,
            record_wall_time: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Json(j) => Error::Format {
                path: path.to_path_buf(),
                message: j.to_string(),
            },
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.scenario.validate()?;
        self.arrays.validate()?;
        self.rician.validate()?;
        if self.power_grid_dbw.is_empty() || self.satellite_grid.is_empty() {
            return Err(Error::invalid("sweep grids must be nonempty"));
        }
        if self
            .power_grid_dbw
            .iter()
            .chain([&self.sweep_power_dbw])
            .any(|p| !p.is_finite())
        {
            return Err(Error::invalid("powers must be finite"));
        }
        if self.satellite_grid.contains(&0) {
            return Err(Error::invalid("satellite counts must be at least 1"));
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("no variants requested"));
        }
        if self.mc_samples < 100 {
            return Err(Error::invalid("mc_samples must be at least 100"));
        }
        if self.num_drops == 0 {
            return Err(Error::invalid("num_drops must be at least 1"));
        }
        if self.variants.iter().any(|v| v.csi() == Csi::Instantaneous) && self.design_realizations < 2 {
            return Err(Error::invalid("iCSI variants need at least two design realizations"));
        }
        OptimizerSettings {
            power_budget: 1.0,
            ..self.optimizer(0.0)
        }
        .validate()
    }

    /// Optimizer settings for a power budget in dBW.
    pub fn optimizer(&self, power_dbw: f64) -> OptimizerSettings {
        OptimizerSettings {
            max_iters: self.max_iters,
            rel_obj_tol: self.rel_obj_tol,
            solver_tol: self.solver_tol,
            power_budget: dbw_to_watts(power_dbw),
            variant: self.variants[0],
        }
    }
}

pub fn dbw_to_watts(dbw: f64) -> f64 {
    10f64.powf(dbw / 10.0)
}

/// The swept quantity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sweep {
    /// Per-satellite power budget in dBW.
    PowerDbw,
    /// Number of satellites.
    Satellites,
}

/// One (sweep value, drop, variant) outcome. Metrics are empty when the
/// design failed; `status` then holds the error.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub sweep: Sweep,
    pub value: f64,
    pub variant: Variant,
    pub drop: usize,
    /// Closed-form upper-bound MMFR of the design (bits/s/Hz).
    pub mmfr_ub: Option<f64>,
    /// Monte Carlo ergodic MMFR (bits/s/Hz).
    pub mmfr_true: Option<f64>,
    pub mmfr_stderr: Option<f64>,
    pub iterations: Option<usize>,
    /// Seconds; zero unless timing was requested.
    pub wall_time: f64,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Drop-averaged view of the rows of one (sweep value, variant).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub sweep: Sweep,
    pub value: f64,
    pub variant: Variant,
    /// Drops that produced a result.
    pub drops: usize,
    pub mmfr_ub: f64,
    pub mmfr_true: f64,
    /// Monte Carlo standard error of `mmfr_true`.
    pub mmfr_stderr: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    /// Averages over drops, ordered by sweep value then variant as first seen.
    pub fn summary(&self) -> Vec<SummaryRow> {
        let mut keys: Vec<(Sweep, f64, Variant)> = Vec::new();
        for r in &self.rows {
            let key = (r.sweep, r.value, r.variant);
            if !keys.contains(&key) {
                keys.push(key);
            }
        }
        keys.into_iter()
            .map(|(sweep, value, variant)| {
                let ok: Vec<&ResultRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.sweep == sweep && r.value == value && r.variant == variant && r.is_ok())
                    .collect();
                let n = ok.len() as f64;
                let mean = |f: fn(&ResultRow) -> Option<f64>| ok.iter().filter_map(|r| f(r)).sum::<f64>() / n;
                let var = ok.iter().filter_map(|r| r.mmfr_stderr).map(|s| s * s).sum::<f64>();
                SummaryRow {
                    sweep,
                    value,
                    variant,
                    drops: ok.len(),
                    mmfr_ub: mean(|r| r.mmfr_ub),
                    mmfr_true: mean(|r| r.mmfr_true),
                    mmfr_stderr: var.sqrt() / n,
                }
            })
            .collect()
    }

    /// Writes the CSV rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(writer);
        let fail = |e: csv::Error| Error::Numerical(format!("csv: {e}"));
        if self.rows.is_empty() {
            w.write_record(CSV_HEADER.split(',')).map_err(fail)?;
        }
        for r in &self.rows {
            w.serialize(r).map_err(fail)?;
        }
        w.flush().map_err(|e| Error::Numerical(format!("csv: {e}")))?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<Self> {
        let format = |message: String| Error::Format {
            path: path.to_path_buf(),
            message,
        };
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r
            .headers()
            .map_err(|e| format(e.to_string()))?
            .iter()
            .collect::<Vec<_>>()
            .join(",");
        if header != CSV_HEADER {
            return Err(format(format!("unexpected header `{header}`")));
        }
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<ResultRow>, _>>()
            .map_err(|e| format(e.to_string()))?;
        Ok(ResultTable { rows })
    }
}

/// JSON stored next to the CSV: the resolved configuration and provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema_version: u32,
    pub crate_version: String,
    /// Sweep that produced the table.
    pub sweep: Sweep,
    pub seed: u64,
    pub config: ExperimentConfig,
}

impl Sidecar {
    pub fn new(config: &ExperimentConfig, sweep: Sweep) -> Self {
        Sidecar {
            schema_version: RESULTS_SCHEMA_VERSION,
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            sweep,
            seed: config.seed,
            config: config.clone(),
        }
    }
}

/// Writes `results.csv` and `results.json` into `dir` (created if missing).
pub fn persist(table: &ResultTable, sidecar: &Sidecar, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let csv_path = dir.join(RESULTS_FILE);
    let file = File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    table.write_csv(BufWriter::new(file)).map_err(|e| match e {
        Error::Numerical(message) => Error::Format {
            path: csv_path.clone(),
            message,
        },
        other => other,
    })?;
    let json_path = dir.join(SIDECAR_FILE);
    let text = serde_json::to_string_pretty(sidecar)?;
    std::fs::write(&json_path, text + "\n").map_err(|e| Error::io(&json_path, e))?;
    Ok(())
}

/// Reads back what [`persist`] wrote.
pub fn load(dir: &Path) -> Result<(ResultTable, Sidecar)> {
    let csv_path = dir.join(RESULTS_FILE);
    let file = File::open(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let table = ResultTable::read_csv(BufReader::new(file), &csv_path)?;
    let json_path = dir.join(SIDECAR_FILE);
    let text = std::fs::read_to_string(&json_path).map_err(|e| Error::io(&json_path, e))?;
    let sidecar = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: json_path.clone(),
        message: e.to_string(),
    })?;
    Ok((table, sidecar))
}

/// Independent seeds of one drop.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DropSeeds {
    pub scenario: u64,
    pub statistics: u64,
    pub icsi: u64,
    pub monte_carlo: u64,
}

impl DropSeeds {
    pub fn new(seed: u64, drop: usize) -> Self {
        let mut rng = mc_stream(seed, drop);
        DropSeeds {
            scenario: rng.next_u64(),
            statistics: rng.next_u64(),
            icsi: rng.next_u64(),
            monte_carlo: rng.next_u64(),
        }
    }
}

/// A realized drop: noise-normalized statistics with the design side data.
#[derive(Clone, Debug)]
pub struct ScenarioDraw {
    pub stats: ChannelStatistics<f64>,
    pub mask: Vec<Vec<bool>>,
    pub nearest: Vec<usize>,
}

/// Builds the scenario and statistics of one drop with `num_satellites`.
pub fn build_drop(config: &ExperimentConfig, num_satellites: usize, seeds: &DropSeeds) -> Result<ScenarioDraw> {
    let scenario_cfg = ScenarioConfig {
        num_satellites,
        rng_seed: seeds.scenario,
        ..config.scenario.clone()
    };
    let scenario = build_scenario::<f64>(&scenario_cfg)?;
    let stats = generate_statistics(&scenario, &config.arrays, &config.rician, seeds.statistics)?
        .normalized_by_noise(config.arrays.noise_variance());
    Ok(ScenarioDraw {
        mask: scenario.association_mask(),
        nearest: (0..scenario.num_uts()).map(|k| scenario.nearest_satellite(k)).collect(),
        stats,
    })
}

/// A design with its evaluated ergodic MMFR.
pub struct Evaluated {
    pub design: VariantResult<f64>,
    pub mmfr_true: f64,
    pub mmfr_stderr: f64,
}

/// Designs all variants of `config` at `power_dbw` on `drop`, then evaluates
/// them by Monte Carlo (iCSI designs report their own realizations).
pub fn evaluate_drop(
    config: &ExperimentConfig,
    draw: &ScenarioDraw,
    power_dbw: f64,
    seeds: &DropSeeds,
) -> Result<Vec<Evaluated>> {
    let inputs = VariantInputs {
        stats: &draw.stats,
        mask: &draw.mask,
        nearest: &draw.nearest,
        noise: 1.0,
        design_realizations: config.design_realizations,
        seed: seeds.icsi,
    };
    let designs = optimize_variants(&inputs, &config.variants, &config.optimizer(power_dbw))?;
    designs
        .into_iter()
        .map(|design| {
            let (mmfr_true, mmfr_stderr) = match &design.icsi {
                Some(icsi) => (icsi.mean, icsi.stderr),
                None => {
                    let report =
                        ergodic_rates_mc(&draw.stats, &design.layout, 1.0, config.mc_samples, seeds.monte_carlo)?;
                    (report.mmfr, report.mmfr_stderr)
                }
            };
            Ok(Evaluated {
                design,
                mmfr_true,
                mmfr_stderr,
            })
        })
        .collect()
}

fn rows_for(
    config: &ExperimentConfig,
    sweep: Sweep,
    value: f64,
    drop: usize,
    outcome: Result<Vec<Evaluated>>,
    elapsed: f64,
) -> Vec<ResultRow> {
    let wall_time = if config.record_wall_time { elapsed } else { 0.0 };
    match outcome {
        Ok(evals) => evals
            .into_iter()
            .map(|e| ResultRow {
                sweep,
                value,
                variant: e.design.variant,
                drop,
                mmfr_ub: Some(e.design.mmfr_ub),
                mmfr_true: Some(e.mmfr_true),
                mmfr_stderr: Some(e.mmfr_stderr),
                iterations: Some(e.design.iterations),
                wall_time,
                status: "ok".into(),
            })
            .collect(),
        Err(err) => config
            .variants
            .iter()
            .map(|&variant| ResultRow {
                sweep,
                value,
                variant,
                drop,
                mmfr_ub: None,
                mmfr_true: None,
                mmfr_stderr: None,
                iterations: None,
                wall_time,
                status: format!("error: {err}"),
            })
            .collect(),
    }
}

/// Runs `(value, drop)` tasks in parallel and assembles rows in
/// `(value, drop, variant)` order.
fn sweep_tasks(
    config: &ExperimentConfig,
    sweep: Sweep,
    values: &[f64],
    task: impl Fn(f64, &DropSeeds) -> Result<Vec<Evaluated>> + Sync,
) -> ResultTable {
    let tasks: Vec<(usize, usize)> = (0..values.len())
        .flat_map(|v| (0..config.num_drops).map(move |d| (v, d)))
        .collect();
    let chunks: Vec<Vec<ResultRow>> = tasks
        .par_iter()
        .map(|&(v, d)| {
            let seeds = DropSeeds::new(config.seed, d);
            let start = Instant::now();
            let outcome = task(values[v], &seeds);
            rows_for(config, sweep, values[v], d, outcome, start.elapsed().as_secs_f64())
        })
        .collect();
    ResultTable {
        rows: chunks.into_iter().flatten().collect(),
    }
}

/// Sweeps the power budget over `power_grid_dbw` with `scenario.num_satellites`
/// satellites. Every drop keeps its scenario across the grid.
pub fn run_power_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let sats = config.scenario.num_satellites;
    Ok(sweep_tasks(
        config,
        Sweep::PowerDbw,
        &config.power_grid_dbw,
        |p, seeds| {
            let draw = build_drop(config, sats, seeds)?;
            evaluate_drop(config, &draw, p, seeds)
        },
    ))
}

/// Sweeps the satellite count over `satellite_grid` at `sweep_power_dbw`.
pub fn run_satellite_sweep(config: &ExperimentConfig) -> Result<ResultTable> {
    config.validate()?;
    let values: Vec<f64> = config.satellite_grid.iter().map(|&s| s as f64).collect();
    Ok(sweep_tasks(config, Sweep::Satellites, &values, |s, seeds| {
        let draw = build_drop(config, s as usize, seeds)?;
        evaluate_drop(config, &draw, config.sweep_power_dbw, seeds)
    }))
}

/// Per-variant artifacts of a single design run.
#[derive(Clone, Debug, Serialize)]
pub struct SingleReport {
    pub variant: Variant,
    pub mmfr_ub: f64,
    pub mmfr_true: f64,
    pub mmfr_stderr: f64,
    pub iterations: usize,
    pub converged: bool,
    pub trace: IterationTrace,
}

/// One drop (drop 0) at the first grid power: designs, evaluations and traces.
pub fn run_single(config: &ExperimentConfig) -> Result<Vec<SingleReport>> {
    config.validate()?;
    let seeds = DropSeeds::new(config.seed, 0);
    let draw = build_drop(config, config.scenario.num_satellites, &seeds)?;
    let evals = evaluate_drop(config, &draw, config.power_grid_dbw[0], &seeds)?;
    Ok(evals
        .into_iter()
        .map(|e| SingleReport {
            variant: e.design.variant,
            mmfr_ub: e.design.mmfr_ub,
            mmfr_true: e.mmfr_true,
            mmfr_stderr: e.mmfr_stderr,
            iterations: e.design.iterations,
            converged: e.design.converged,
            trace: e.design.trace,
        })
        .collect())
}

#[cfg(test)]
mod tests;
