use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::sac::{ActionMode, SacAgent};
use super::{AgentConfig, AgentError, ACTION_DIM};
use crate::env::{EnvConfig, Environment};
use crate::per::{beta_at, ReplayBuffer, Transition};

/// Log-density of a uniform action on `[-1, 1]^3`.
const UNIFORM_LOG_PROB: f64 = -(ACTION_DIM as f64) * std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub ret: f64,
    /// Sum over slots of each slot's fairness-weighted volume.
    pub fair_data_slot_bits: f64,
    /// Fairness-weighted volume of the per-sensor episode totals.
    pub fair_data_cum_bits: f64,
    pub energy_j: f64,
    pub jain_mean: f64,
    pub violations: usize,
    pub collected_bits: u64,
    /// Not part of any deterministic output.
    #[serde(skip)]
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub agent: SacAgent,
    pub metrics: Vec<EpisodeMetrics>,
    pub env_steps: u64,
}

/// Per-episode dynamics seeds derived from the run seed.
pub fn episode_seeds(seed: u64, episodes: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    (0..episodes).map(|_| rng.random()).collect()
}

/// Runs the training loop for `episodes` episodes. The sensor layout is
/// drawn once from `seed`; `on_episode` sees every finished episode.
pub fn train(
    env_cfg: &EnvConfig,
    cfg: &AgentConfig,
    episodes: usize,
    seed: u64,
    on_episode: &mut dyn FnMut(&EpisodeMetrics, &SacAgent) -> Result<(), AgentError>,
) -> Result<TrainOutcome, AgentError> {
    env_cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut agent = SacAgent::new(env_cfg.obs_dim(), cfg.clone(), &mut rng)?;
    let mut buffer = if cfg.enhancements.per {
        ReplayBuffer::prioritized(cfg.buffer_capacity, cfg.alpha_per)
    } else {
        ReplayBuffer::uniform(cfg.buffer_capacity)
    };
    let total_steps = (episodes * env_cfg.slots) as u64;
    let mut t: u64 = 0;
    let mut metrics = Vec::with_capacity(episodes);

    for (episode, ep_seed) in episode_seeds(seed, episodes).into_iter().enumerate() {
        let started = Instant::now();
        let mut env = Environment::reset_with_layout(env_cfg.clone(), seed, ep_seed)?;
        let mut obs = env.observe();
        let (mut ret, mut jain_sum, mut violations) = (0.0, 0.0, 0);
        while !env.is_done() {
            let (action, log_prob) = if (t as usize) < cfg.warmup_steps {
                ((0..ACTION_DIM).map(|_| rng.random_range(-1.0..=1.0)).collect(), UNIFORM_LOG_PROB)
            } else {
                agent.select_action(&obs, ActionMode::Stochastic, &mut rng)?
            };
            let out = env.step(&action)?;
            ret += out.reward;
            jain_sum += out.info.jain;
            violations += out.info.violation as usize;
            buffer.push(Transition {
                state: std::mem::replace(&mut obs, out.next_state.clone()),
                action,
                reward: out.reward,
                next_state: out.next_state,
                done: out.done,
                log_prob,
            })?;
            if t as usize >= cfg.warmup_steps && buffer.len() >= cfg.batch_size {
                let batch = buffer.sample(cfg.batch_size, beta_at(t, total_steps), &mut rng)?;
                let stats = agent.update(&batch, &mut rng).map_err(|e| match e {
                    AgentError::Numeric { source, .. } => AgentError::Numeric { step: t, source },
                    other => other,
                })?;
                buffer.update_priorities(&batch.indices, &stats.td_abs)?;
            }
            t += 1;
        }
        let state = env.state();
        let m = EpisodeMetrics {
            episode,
            ret,
            fair_data_slot_bits: state.cum_fair_data,
            fair_data_cum_bits: state.cumulative_fair_data(),
            energy_j: state.cum_energy,
            jain_mean: jain_sum / env_cfg.slots as f64,
            violations,
            collected_bits: state.sensors.iter().map(|s| s.cumulative_collected_bits).sum(),
            wall_time_s: started.elapsed().as_secs_f64(),
        };
        on_episode(&m, &agent)?;
        metrics.push(m);
    }
    Ok(TrainOutcome { agent, metrics, env_steps: t })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> (EnvConfig, AgentConfig) {
        let env = EnvConfig { slots: 10, ..EnvConfig::tiny() };
        let agent = AgentConfig { hidden: 8, batch_size: 16, warmup_steps: 20, buffer_capacity: 1000, ..AgentConfig::default() };
        (env, agent)
    }

    #[test]
    fn zero_episodes_returns_fresh_agent() {
        let (env, cfg) = small();
        let out = train(&env, &cfg, 0, 3, &mut |_, _| Ok(())).unwrap();
        assert!(out.metrics.is_empty());
        let fresh = SacAgent::new(env.obs_dim(), cfg, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(out.agent, fresh);
    }

    #[test]
    fn same_seed_same_metrics() {
        let (env, cfg) = small();
        let run = || {
            let mut out = train(&env, &cfg, 5, 9, &mut |_, _| Ok(())).unwrap();
            out.metrics.iter_mut().for_each(|m| m.wall_time_s = 0.0);
            out
        };
        let (a, b) = (run(), run());
        assert_eq!(a.metrics.len(), 5);
        assert_eq!(a.metrics, b.metrics);
        assert_eq!(a.agent, b.agent);
        assert!(a.agent.updates() > 0);
        let c = train(&env, &cfg, 5, 10, &mut |_, _| Ok(())).unwrap();
        assert_ne!(a.metrics[0].ret, c.metrics[0].ret);
    }

    #[test]
    fn every_ablation_runs() {
        let (env, cfg) = small();
        for names in [&["pfam"][..], &["per"], &["vrc"], &["pfam", "per", "vrc"]] {
            let cfg = AgentConfig { enhancements: super::super::Enhancements::ablate(names).unwrap(), ..cfg.clone() };
            let mut seen = 0;
            let out = train(&env, &cfg, 3, 1, &mut |m, _| {
                assert_eq!(m.episode, seen);
                seen += 1;
                Ok(())
            })
            .unwrap();
            assert!(out.metrics.iter().all(|m| m.ret.is_finite()));
        }
    }
}
