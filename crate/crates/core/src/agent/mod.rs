//! Soft actor-critic with optional parameter-free attention, prioritized
//! replay and value-based reward centering.

mod nets;
pub mod pfam;
mod sac;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::AdError;
use crate::env::EnvError;
use crate::per::PerError;

pub use nets::{
    actor_forward, critic_forward, squash_sample, squashed_log_prob, ActorNet, CriticNet, CriticPair, ACTION_DIM,
    LOG_STD_MAX, LOG_STD_MIN, SQUASH_EPS,
};
pub use sac::{ActionMode, EntropyTemp, Noise, SacAgent, UpdateStats, VrcState};
pub use train::{episode_seeds, train, EpisodeMetrics, TrainOutcome};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("agent configuration: {0}")]
    Config(String),
    #[error("numeric failure at step {step}: {source}")]
    Numeric { step: u64, source: AdError },
    #[error(transparent)]
    Ad(#[from] AdError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Per(#[from] PerError),
}

/// Which enhancements are active. All off is vanilla SAC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Enhancements {
    pub pfam: bool,
    pub per: bool,
    pub vrc: bool,
}

impl Enhancements {
    pub const ALL: Self = Self { pfam: true, per: true, vrc: true };
    pub const NONE: Self = Self { pfam: false, per: false, vrc: false };

    /// Flags with the named enhancements switched off.
    pub fn ablate(names: &[&str]) -> Result<Self, AgentError> {
        let mut f = Self::ALL;
        for n in names {
            match n.trim() {
                "pfam" => f.pfam = false,
                "per" => f.per = false,
                "vrc" => f.vrc = false,
                "" => {}
                other => return Err(AgentError::Config(format!("unknown enhancement '{other}' (expected pfam, per, vrc)"))),
            }
        }
        Ok(f)
    }

    /// Short tag such as `pfam+per`, `none` or `pfam+per+vrc`.
    pub fn tag(&self) -> String {
        let on: Vec<&str> = [(self.pfam, "pfam"), (self.per, "per"), (self.vrc, "vrc")]
            .iter()
            .filter(|(b, _)| *b)
            .map(|(_, n)| *n)
            .collect();
        if on.is_empty() {
            "none".into()
        } else {
            on.join("+")
        }
    }
}

/// How the average-reward estimate moves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VrcMode {
    /// `r̄ += η·lr·ρ·mean(δ)`.
    TdError,
    /// `r̄ += η·(mean(r) − r̄)`, kept as a diagnostic reference.
    RunningAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    /// Width of both hidden layers in every network.
    pub hidden: usize,
    pub lr_actor: f64,
    pub lr_critic: f64,
    pub lr_alpha: f64,
    pub gamma: f64,
    pub tau: f64,
    pub batch_size: usize,
    /// Uniform-random steps before the first update.
    pub warmup_steps: usize,
    pub buffer_capacity: usize,
    pub alpha_per: f64,
    pub init_alpha: f64,
    /// Target entropy H₀.
    pub target_entropy: f64,
    /// Average-reward step size η.
    pub vrc_eta: f64,
    pub vrc_mode: VrcMode,
    /// Use clipped `π/b` ratios from stored behavior log-probabilities
    /// instead of ρ = 1.
    pub vrc_importance_ratio: bool,
    pub pfam_omega: f64,
    pub enhancements: Enhancements,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            hidden: 256,
            lr_actor: 3e-4,
            lr_critic: 3e-4,
            lr_alpha: 3e-4,
            gamma: 0.99,
            tau: 0.005,
            batch_size: 256,
            warmup_steps: 1000,
            buffer_capacity: 1_000_000,
            alpha_per: crate::per::DEFAULT_ALPHA,
            init_alpha: 0.2,
            target_entropy: -(ACTION_DIM as f64),
            vrc_eta: 0.01,
            vrc_mode: VrcMode::TdError,
            vrc_importance_ratio: false,
            pfam_omega: pfam::OMEGA,
            enhancements: Enhancements::ALL,
        }
    }
}

impl AgentConfig {
    /// Smaller networks for the desk-scale scenario.
    pub fn tiny() -> Self {
        Self { hidden: 32, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: String| Err(AgentError::Config(m));
        if self.hidden < 2 {
            return bad(format!("hidden must be at least 2, got {}", self.hidden));
        }
        for (name, v) in [("lr_actor", self.lr_actor), ("lr_critic", self.lr_critic), ("lr_alpha", self.lr_alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau must lie in [0, 1], got {}", self.tau));
        }
        if self.batch_size == 0 || self.buffer_capacity < self.batch_size {
            return bad(format!("need 0 < batch_size <= buffer_capacity, got {} and {}", self.batch_size, self.buffer_capacity));
        }
        if !(self.alpha_per >= 0.0 && self.alpha_per.is_finite()) {
            return bad(format!("alpha_per must be nonnegative, got {}", self.alpha_per));
        }
        if !(self.init_alpha > 0.0 && self.init_alpha.is_finite()) {
            return bad(format!("init_alpha must be positive, got {}", self.init_alpha));
        }
        if !self.target_entropy.is_finite() || !self.vrc_eta.is_finite() || self.vrc_eta < 0.0 {
            return bad("target_entropy must be finite and vrc_eta nonnegative".into());
        }
        if !(self.pfam_omega > 0.0) {
            return bad(format!("pfam_omega must be positive, got {}", self.pfam_omega));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ablation_parsing() {
        assert_eq!(Enhancements::ablate(&[]).unwrap(), Enhancements::ALL);
        assert_eq!(Enhancements::ablate(&["pfam", "per", "vrc"]).unwrap(), Enhancements::NONE);
        let f = Enhancements::ablate(&["per"]).unwrap();
        assert!(f.pfam && !f.per && f.vrc);
        assert_eq!(f.tag(), "pfam+vrc");
        assert_eq!(Enhancements::NONE.tag(), "none");
        assert!(Enhancements::ablate(&["dropout"]).is_err());
    }

    #[test]
    fn default_config_is_valid() {
        AgentConfig::default().validate().unwrap();
        AgentConfig::tiny().validate().unwrap();
        let bad = AgentConfig { batch_size: 0, ..AgentConfig::default() };
        assert!(bad.validate().is_err());
    }
}
