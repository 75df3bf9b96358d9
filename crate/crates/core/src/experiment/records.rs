//! Versioned CSV files. Line 1 of every file is `# schema: <name>/v<n>`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::baselines::TrajRow;
use super::ExperimentError;
use crate::agent::EpisodeMetrics;

pub const METRICS_SCHEMA: &str = "skyharvest.metrics/v1";
pub const TIMING_SCHEMA: &str = "skyharvest.timing/v1";
pub const EVAL_SCHEMA: &str = "skyharvest.eval/v1";
pub const TRAJECTORY_SCHEMA: &str = "skyharvest.trajectory/v1";
pub const SENSORS_SCHEMA: &str = "skyharvest.sensors/v1";
pub const SWEEP_SCHEMA: &str = "skyharvest.sweep/v1";

pub(crate) const METRICS_COLUMNS: &[&str] =
    &["episode", "return", "fair_data_slot_bits", "fair_data_cum_bits", "energy_J", "jain_mean", "violations"];
pub(crate) const TIMING_COLUMNS: &[&str] = &["episode", "wall_time_s"];
pub(crate) const EVAL_COLUMNS: &[&str] =
    &["seed", "episode", "return", "fair_data_slot_bits", "fair_data_cum_bits", "energy_J", "jain_mean", "violations"];
pub(crate) const TRAJECTORY_COLUMNS: &[&str] = &[
    "t",
    "x_m",
    "y_m",
    "p_tx_W",
    "n_eligible",
    "slot_bits",
    "slot_energy_J",
    "jain_slot",
    "reward",
    "violation",
];
pub(crate) const SENSORS_COLUMNS: &[&str] = &["id", "x_m", "y_m"];
pub(crate) const SWEEP_COLUMNS: &[&str] = &["n_sensors", "seed", "algorithm", "reward", "fair_data", "energy"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub fair_data_slot_bits: f64,
    pub fair_data_cum_bits: f64,
    #[serde(rename = "energy_J")]
    pub energy_j: f64,
    pub jain_mean: f64,
    pub violations: usize,
}

impl From<&EpisodeMetrics> for MetricsRow {
    fn from(m: &EpisodeMetrics) -> Self {
        Self {
            episode: m.episode,
            ret: m.ret,
            fair_data_slot_bits: m.fair_data_slot_bits,
            fair_data_cum_bits: m.fair_data_cum_bits,
            energy_j: m.energy_j,
            jain_mean: m.jain_mean,
            violations: m.violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub episode: usize,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub seed: u64,
    pub episode: usize,
    #[serde(rename = "return")]
    pub ret: f64,
    pub fair_data_slot_bits: f64,
    pub fair_data_cum_bits: f64,
    #[serde(rename = "energy_J")]
    pub energy_j: f64,
    pub jain_mean: f64,
    pub violations: usize,
}

impl EvalRow {
    pub fn new(seed: u64, m: &MetricsRow) -> Self {
        Self {
            seed,
            episode: m.episode,
            ret: m.ret,
            fair_data_slot_bits: m.fair_data_slot_bits,
            fair_data_cum_bits: m.fair_data_cum_bits,
            energy_j: m.energy_j,
            jain_mean: m.jain_mean,
            violations: m.violations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorRow {
    pub id: usize,
    pub x_m: f64,
    pub y_m: f64,
}

pub(crate) fn write_csv<T: Serialize>(path: &Path, schema: &str, columns: &[&str], rows: &[T]) -> Result<(), ExperimentError> {
    let io = |e: &dyn std::fmt::Display| ExperimentError::io(path, e);
    let mut file = BufWriter::new(File::create(path).map_err(|e| io(&e))?);
    writeln!(file, "# schema: {schema}").map_err(|e| io(&e))?;
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(file);
    w.write_record(columns).map_err(|e| io(&e))?;
    for r in rows {
        w.serialize(r).map_err(|e| io(&e))?;
    }
    w.flush().map_err(|e| io(&e))?;
    Ok(())
}

pub(crate) fn read_csv<T: DeserializeOwned>(path: &Path, schema: &str) -> Result<Vec<T>, ExperimentError> {
    let io = |e: &dyn std::fmt::Display| ExperimentError::io(path, e);
    let mut reader = BufReader::new(File::open(path).map_err(|e| io(&e))?);
    let mut first = String::new();
    reader.read_line(&mut first).map_err(|e| io(&e))?;
    let found = first.trim().strip_prefix("# schema: ").unwrap_or("");
    if found != schema {
        return Err(ExperimentError::Io(format!("{}: expected schema {schema}, found '{}'", path.display(), first.trim())));
    }
    let mut r = csv::ReaderBuilder::new().from_reader(reader);
    r.deserialize().map(|row| row.map_err(|e| io(&e))).collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>, ExperimentError> {
    read_csv(path, METRICS_SCHEMA)
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajRow>, ExperimentError> {
    read_csv(path, TRAJECTORY_SCHEMA)
}
