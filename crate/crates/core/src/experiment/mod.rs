//! Reproducible experiment runner: configuration, baselines, run
//! directories, sweeps and plots.

mod baselines;
mod commands;
pub mod plot;
mod records;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::agent::{AgentConfig, AgentError, Enhancements};
use crate::autodiff::AdError;
use crate::env::{EnvConfig, EnvError};
use crate::per::PerError;

pub use baselines::{greedy_action, rollout, Policy, TrajRow};
pub use commands::{
    cmd_eval, cmd_plot, cmd_sweep, cmd_train, eval_seeds, evaluate_seed, EvalSource, EvalSummary, Manifest, SeedSummary,
    SweepReport, SweepRow, TrainOptions, MANIFEST_SCHEMA, SUMMARY_SCHEMA,
};
pub use records::{
    read_metrics, read_trajectory, MetricsRow, EVAL_SCHEMA, METRICS_SCHEMA, SENSORS_SCHEMA, SWEEP_SCHEMA, TIMING_SCHEMA,
    TRAJECTORY_SCHEMA,
};

pub const CODE_VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("usage: {0}")]
    Usage(String),
    #[error("io error: {0}")]
    Io(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl ExperimentError {
    /// Process exit status for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Usage(_) => 2,
            ExperimentError::Io(_) => 3,
            ExperimentError::Numeric(_) => 4,
        }
    }

    pub(crate) fn io(path: &Path, e: impl fmt::Display) -> Self {
        ExperimentError::Io(format!("{}: {e}", path.display()))
    }
}

impl From<AgentError> for ExperimentError {
    fn from(e: AgentError) -> Self {
        match e {
            AgentError::Config(m) => ExperimentError::Config(m),
            AgentError::Env(EnvError::Config(m)) => ExperimentError::Config(m),
            AgentError::Ad(AdError::Io(m)) => ExperimentError::Io(m),
            AgentError::Ad(AdError::Checkpoint(m)) => ExperimentError::Config(format!("checkpoint: {m}")),
            other => ExperimentError::Numeric(other.to_string()),
        }
    }
}

impl From<EnvError> for ExperimentError {
    fn from(e: EnvError) -> Self {
        AgentError::from(e).into()
    }
}

impl From<PerError> for ExperimentError {
    fn from(e: PerError) -> Self {
        ExperimentError::Numeric(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sacppv,
    Sac,
    Random,
    Greedy,
}

impl Algorithm {
    pub fn parse(s: &str) -> Result<Self, ExperimentError> {
        match s.trim() {
            "sacppv" => Ok(Self::Sacppv),
            "sac" => Ok(Self::Sac),
            "random" => Ok(Self::Random),
            "greedy" => Ok(Self::Greedy),
            other => Err(ExperimentError::Usage(format!("unknown algorithm '{other}' (expected sacppv, sac, random, greedy)"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Sacppv => "sacppv",
            Self::Sac => "sac",
            Self::Random => "random",
            Self::Greedy => "greedy",
        }
    }

    pub fn is_learned(&self) -> bool {
        matches!(self, Self::Sacppv | Self::Sac)
    }
}

/// Everything one experiment needs. Every field is required in the file;
/// the shipped configs are generated from the code defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    pub episodes: usize,
    /// Deterministic evaluation episodes per seed after training.
    pub eval_episodes: usize,
    /// Periodic checkpoint interval in episodes; 0 keeps only the final one.
    pub checkpoint_every: usize,
    pub out_dir: String,
    pub env: EnvConfig,
    pub agent: AgentConfig,
}

impl RunConfig {
    /// Full-size scenario with the published training length.
    pub fn paper() -> Self {
        Self {
            algorithm: Algorithm::Sacppv,
            seeds: vec![1],
            episodes: 12_000,
            eval_episodes: 10,
            checkpoint_every: 1000,
            out_dir: "runs/paper".into(),
            env: EnvConfig::default(),
            agent: AgentConfig::default(),
        }
    }

    /// Desk-scale scenario.
    pub fn tiny() -> Self {
        Self {
            algorithm: Algorithm::Sacppv,
            seeds: vec![1, 2, 3, 4, 5],
            episodes: 300,
            eval_episodes: 10,
            checkpoint_every: 100,
            out_dir: "runs/tiny".into(),
            env: EnvConfig::tiny(),
            agent: AgentConfig::tiny(),
        }
    }

    /// Parses a TOML config; errors carry the offending field path.
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let de = toml::Deserializer::new(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            let msg = inner.message().to_string();
            ExperimentError::Config(format!("at `{path}`: {msg}"))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let text = std::fs::read_to_string(path).map_err(|e| ExperimentError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// SHA-256 of the canonical TOML echo, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.seeds.is_empty() {
            return Err(ExperimentError::Config("seeds must list at least one seed".into()));
        }
        self.env.validate()?;
        self.agent.validate()?;
        Ok(())
    }

    /// Agent settings with the algorithm applied: `sac` turns every
    /// enhancement off.
    pub fn effective_agent(&self) -> AgentConfig {
        let mut a = self.agent.clone();
        if self.algorithm == Algorithm::Sac {
            a.enhancements = Enhancements::NONE;
        }
        a
    }

    /// Display label: `sacppv`, `sac`, `sac+pfam`, `random`, ...
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::Sacppv => {
                let e = self.agent.enhancements;
                if e == Enhancements::ALL {
                    "sacppv".into()
                } else if e == Enhancements::NONE {
                    "sac".into()
                } else {
                    format!("sac+{}", e.tag())
                }
            }
            other => other.name().into(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_round_trip_and_hash() {
        for cfg in [RunConfig::paper(), RunConfig::tiny()] {
            let text = cfg.to_toml();
            let back = RunConfig::from_toml(&text).unwrap();
            assert_eq!(back, cfg);
            assert_eq!(back.hash(), cfg.hash());
            assert_eq!(cfg.hash().len(), 64);
        }
        assert_ne!(RunConfig::paper().hash(), RunConfig::tiny().hash());
    }

    #[test]
    fn missing_field_names_its_path() {
        let text = RunConfig::tiny().to_toml().replace("x_max = 100.0\n", "");
        let err = RunConfig::from_toml(&text).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        let msg = err.to_string();
        assert!(msg.contains("env.area") && msg.contains("x_max"), "{msg}");
    }

    #[test]
    fn unknown_field_rejected() {
        let text = RunConfig::tiny().to_toml().replace("episodes = 300", "episodes = 300\nepisdes = 3");
        assert!(RunConfig::from_toml(&text).is_err());
    }

    #[test]
    fn labels() {
        let mut c = RunConfig::tiny();
        assert_eq!(c.label(), "sacppv");
        c.agent.enhancements = Enhancements::ablate(&["per", "vrc"]).unwrap();
        assert_eq!(c.label(), "sac+pfam");
        c.algorithm = Algorithm::Sac;
        assert_eq!(c.label(), "sac");
        assert_eq!(c.effective_agent().enhancements, Enhancements::NONE);
    }
}
