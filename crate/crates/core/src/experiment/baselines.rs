use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::agent::{EpisodeMetrics, SacAgent};
use crate::env::{ActionCmd, EnvConfig, Environment, WorldState};
use crate::models::Vec3;

use super::ExperimentError;

/// Heads for the nearest sensor with pending data at the largest step the
/// per-axis limits allow, never overshooting it. Transmits at full power
/// when a pending sensor is within the service radius after the move.
pub fn greedy_action(state: &WorldState, cfg: &EnvConfig) -> ActionCmd {
    let uav = state.uav_position;
    let pending = state.sensors.iter().filter(|s| s.pending_bits > 0);
    let nearest = pending.min_by(|a, b| {
        let da = (a.position - uav).horizontal_norm();
        let db = (b.position - uav).horizontal_norm();
        da.total_cmp(&db)
    });
    let Some(target) = nearest else {
        return ActionCmd { dx: 0.0, dy: 0.0, p_tx: cfg.p_tx_min };
    };
    let (dx, dy) = (target.position.x - uav.x, target.position.y - uav.y);
    let mut s: f64 = 1.0;
    if dx.abs() > cfg.move_max_x {
        s = s.min(cfg.move_max_x / dx.abs());
    }
    if dy.abs() > cfg.move_max_y {
        s = s.min(cfg.move_max_y / dy.abs());
    }
    let (dx, dy) = (s * dx, s * dy);
    let moved = Vec3::new(uav.x + dx, uav.y + dy, uav.z);
    let in_range = state.sensors.iter().any(|n| n.pending_bits > 0 && moved.distance(&n.position) <= cfg.d_max);
    ActionCmd { dx, dy, p_tx: if in_range { cfg.p_tx_max } else { cfg.p_tx_min } }
}

/// An action source for evaluation rollouts.
pub enum Policy<'a> {
    Random(ChaCha8Rng),
    Greedy,
    /// Deterministic (tanh μ) actions from a trained actor.
    Actor(&'a SacAgent),
}

impl Policy<'_> {
    fn act(&mut self, env: &Environment) -> Result<ActionCmd, ExperimentError> {
        let cfg = env.config();
        let raw = match self {
            Policy::Greedy => return Ok(greedy_action(env.state(), cfg)),
            Policy::Random(rng) => (0..3).map(|_| rng.random_range(-1.0..=1.0)).collect::<Vec<f64>>(),
            Policy::Actor(agent) => agent.mean_action(&env.observe())?,
        };
        Ok(ActionCmd::from_normalized(&raw, cfg)?)
    }
}

/// One row of a trajectory export. Row 0 is the start position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajRow {
    pub t: usize,
    pub x_m: f64,
    pub y_m: f64,
    #[serde(rename = "p_tx_W")]
    pub p_tx_w: f64,
    pub n_eligible: usize,
    pub slot_bits: f64,
    #[serde(rename = "slot_energy_J")]
    pub slot_energy_j: f64,
    pub jain_slot: f64,
    pub reward: f64,
    pub violation: u8,
}

/// Plays one full episode. The trajectory has `slots + 1` rows when
/// requested.
pub fn rollout(
    mut env: Environment,
    policy: &mut Policy,
    episode: usize,
    record: bool,
) -> Result<(EpisodeMetrics, Option<Vec<TrajRow>>), ExperimentError> {
    let start = env.state().uav_position;
    let mut traj = record.then(|| {
        vec![TrajRow {
            t: 0,
            x_m: start.x,
            y_m: start.y,
            p_tx_w: 0.0,
            n_eligible: 0,
            slot_bits: 0.0,
            slot_energy_j: 0.0,
            jain_slot: 0.0,
            reward: 0.0,
            violation: 0,
        }]
    });
    let (mut ret, mut jain_sum, mut violations) = (0.0, 0.0, 0);
    while !env.is_done() {
        let cmd = policy.act(&env)?;
        let out = env.step_command(cmd)?;
        ret += out.reward;
        jain_sum += out.info.jain;
        violations += out.info.violation as usize;
        if let Some(rows) = &mut traj {
            let i = &out.info;
            rows.push(TrajRow {
                t: i.slot,
                x_m: i.position.x,
                y_m: i.position.y,
                p_tx_w: i.p_tx,
                n_eligible: i.n_eligible,
                slot_bits: i.slot_bits,
                slot_energy_j: i.slot_energy,
                jain_slot: i.jain,
                reward: out.reward,
                violation: i.violation as u8,
            });
        }
    }
    let state = env.state();
    let metrics = EpisodeMetrics {
        episode,
        ret,
        fair_data_slot_bits: state.cum_fair_data,
        fair_data_cum_bits: state.cumulative_fair_data(),
        energy_j: state.cum_energy,
        jain_mean: jain_sum / env.config().slots as f64,
        violations,
        collected_bits: state.sensors.iter().map(|s| s.cumulative_collected_bits).sum(),
        wall_time_s: 0.0,
    };
    Ok((metrics, traj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::BlsNode;

    fn world(uav: (f64, f64), sensors: &[(f64, f64, u64)]) -> WorldState {
        WorldState {
            uav_position: Vec3::new(uav.0, uav.1, 50.0),
            sensors: sensors
                .iter()
                .map(|&(x, y, p)| BlsNode {
                    position: Vec3::new(x, y, 0.0),
                    pending_bits: p,
                    cumulative_collected_bits: 0,
                    generated_bits: p,
                })
                .collect(),
            slot: 0,
            cum_fair_data: 0.0,
            cum_energy: 0.0,
        }
    }

    #[test]
    fn idle_without_pending_data() {
        let cfg = EnvConfig::default();
        let a = greedy_action(&world((100.0, 100.0), &[(120.0, 100.0, 0)]), &cfg);
        assert_eq!(a, ActionCmd { dx: 0.0, dy: 0.0, p_tx: cfg.p_tx_min });
    }

    #[test]
    fn heads_east_at_full_step() {
        let cfg = EnvConfig { d_max: 60.0, ..EnvConfig::default() };
        let a = greedy_action(&world((100.0, 100.0), &[(200.0, 100.0, 10)]), &cfg);
        assert_eq!((a.dx, a.dy), (20.0, 0.0));
        assert_eq!(a.p_tx, cfg.p_tx_min);
        let near = greedy_action(&world((100.0, 100.0), &[(110.0, 105.0, 10)]), &cfg);
        assert_eq!((near.dx, near.dy), (10.0, 5.0));
        assert_eq!(near.p_tx, cfg.p_tx_max);
    }

    #[test]
    fn picks_nearest_pending() {
        let cfg = EnvConfig::default();
        let a = greedy_action(&world((100.0, 100.0), &[(105.0, 100.0, 0), (100.0, 60.0, 5), (170.0, 100.0, 5)]), &cfg);
        assert_eq!((a.dx, a.dy), (0.0, -20.0));
        assert_eq!(a.p_tx, cfg.p_tx_max);
    }

    #[test]
    fn rollout_records_every_slot() {
        let cfg = EnvConfig::tiny();
        let env = Environment::reset_with_layout(cfg.clone(), 1, 2).unwrap();
        let (m, traj) = rollout(env, &mut Policy::Greedy, 0, true).unwrap();
        let traj = traj.unwrap();
        assert_eq!(traj.len(), cfg.slots + 1);
        assert_eq!((traj[0].x_m, traj[0].y_m), (cfg.start_x, cfg.start_y));
        let sum: f64 = traj.iter().map(|r| r.reward).sum();
        assert!((sum - m.ret).abs() < 1e-9);
        assert_eq!(m.violations, 0);
    }
}
