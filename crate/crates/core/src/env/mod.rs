//! Episodic UAV data-collection environment.
//!
//! One slot of [`Environment::step`] runs, in order: action scaling, the
//! position update with boundary clamping, data arrivals, link evaluation and
//! OFDMA service, energy accounting, and the reward.

mod config;

pub use config::{Area, ArrivalParams, ChannelMode, EnvConfig, FairnessScope};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::models::{self, ModelError, Vec3};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("environment configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("step called after the episode finished (slot {slot} of {slots})")]
    EpisodeDone { slot: usize, slots: usize },
    #[error("action has {got} components, expected 3")]
    ActionShape { got: usize },
}

impl From<EnvError> for String {
    fn from(e: EnvError) -> String {
        e.to_string()
    }
}

/// One batteryless sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlsNode {
    pub position: Vec3,
    /// Whole bits waiting for upload. Integer bookkeeping keeps
    /// `generated = collected + pending` exact.
    pub pending_bits: u64,
    pub cumulative_collected_bits: u64,
    /// Everything ever generated at this sensor.
    pub generated_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub uav_position: Vec3,
    pub sensors: Vec<BlsNode>,
    /// Slots completed so far; 0 right after reset.
    pub slot: usize,
    /// Sum over finished slots of the slot's fairness-weighted volume.
    pub cum_fair_data: f64,
    pub cum_energy: f64,
}

impl WorldState {
    /// Fairness-weighted total over per-sensor cumulative volumes.
    pub fn cumulative_fair_data(&self) -> f64 {
        let totals: Vec<f64> = self.sensors.iter().map(|s| s.cumulative_collected_bits as f64).collect();
        models::fair_data_term(&totals)
    }
}

/// A physical action: displacement in metres and UAV transmit power in watts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionCmd {
    pub dx: f64,
    pub dy: f64,
    pub p_tx: f64,
}

impl ActionCmd {
    /// Affine map from the policy's `[-1, 1]^3` box onto the action bounds.
    /// Out-of-box components are clipped first.
    pub fn from_normalized(raw: &[f64], cfg: &EnvConfig) -> Result<Self, EnvError> {
        if raw.len() != 3 {
            return Err(EnvError::ActionShape { got: raw.len() });
        }
        let c = |v: f64| if v.is_nan() { 0.0 } else { v.clamp(-1.0, 1.0) };
        let (ax, ay, ap) = (c(raw[0]), c(raw[1]), c(raw[2]));
        Ok(Self {
            dx: ax * cfg.move_max_x,
            dy: ay * cfg.move_max_y,
            p_tx: cfg.p_tx_min + 0.5 * (ap + 1.0) * (cfg.p_tx_max - cfg.p_tx_min),
        })
    }

    /// Inverse of [`ActionCmd::from_normalized`].
    pub fn to_normalized(&self, cfg: &EnvConfig) -> [f64; 3] {
        let n = |v: f64, m: f64| if m > 0.0 { (v / m).clamp(-1.0, 1.0) } else { 0.0 };
        let span = cfg.p_tx_max - cfg.p_tx_min;
        let p = if span > 0.0 { 2.0 * (self.p_tx - cfg.p_tx_min) / span - 1.0 } else { -1.0 };
        [n(self.dx, cfg.move_max_x), n(self.dy, cfg.move_max_y), p.clamp(-1.0, 1.0)]
    }
}

/// Per-slot diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotInfo {
    pub slot: usize,
    pub position: Vec3,
    pub p_tx: f64,
    /// Bits delivered by each sensor this slot.
    pub volumes: Vec<f64>,
    pub slot_bits: f64,
    pub jain: f64,
    pub fair_data: f64,
    pub charge_energy: f64,
    pub propulsion_energy: f64,
    pub slot_energy: f64,
    pub violation: bool,
    pub n_eligible: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub done: bool,
    pub info: SlotInfo,
}

/// Downlink/uplink figures for one sensor at the current UAV position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub distance: f64,
    pub harvested: f64,
    pub gain: f64,
}

/// Places sensors uniformly at random and the UAV at its start point.
pub fn initial_state<R: Rng>(cfg: &EnvConfig, rng: &mut R) -> Result<WorldState, EnvError> {
    cfg.validate()?;
    let a = cfg.area;
    let sensors = (0..cfg.n_sensors)
        .map(|_| {
            let x = rng.random_range(a.x_min..=a.x_max);
            let y = rng.random_range(a.y_min..=a.y_max);
            BlsNode {
                position: Vec3::new(x, y, 0.0),
                pending_bits: 0,
                cumulative_collected_bits: 0,
                generated_bits: 0,
            }
        })
        .collect();
    Ok(WorldState {
        uav_position: Vec3::new(cfg.start_x, cfg.start_y, cfg.altitude),
        sensors,
        slot: 0,
        cum_fair_data: 0.0,
        cum_energy: 0.0,
    })
}

/// Bernoulli arrivals with normal sizes truncated at zero and rounded to
/// whole bits.
pub fn generate_arrivals<R: Rng>(state: &mut WorldState, arrivals: &ArrivalParams, rng: &mut R) {
    // std_bits == 0 is a valid degenerate normal.
    let size = Normal::new(arrivals.mean_bits, arrivals.std_bits).expect("finite arrival parameters");
    for s in &mut state.sensors {
        if rng.random_bool(arrivals.p_gen) {
            let bits = size.sample(rng).max(0.0).round() as u64;
            s.pending_bits += bits;
            s.generated_bits += bits;
        }
    }
}

/// Link budget of every sensor for transmit power `p_tx` at the UAV's
/// current position. `fading`, when given, holds one multiplicative
/// power factor per sensor replacing the LoS/NLoS average.
pub fn link_budgets(
    state: &WorldState,
    p_tx: f64,
    cfg: &EnvConfig,
    fading: Option<&[f64]>,
) -> Result<Vec<LinkBudget>, EnvError> {
    let ch = &cfg.channel;
    state
        .sensors
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let distance = state.uav_position.distance(&s.position);
            let p_rx = models::received_power(p_tx, distance, &cfg.wpt, ch.alpha)?;
            let harvested = models::harvested_power(p_rx, &cfg.wpt)?;
            let gain = match fading {
                Some(f) => ch.beta0 * distance.powf(-ch.alpha) * f[i],
                None => {
                    let theta = models::elevation_deg(&state.uav_position, &s.position);
                    models::expected_channel_gain(distance, theta, ch)?
                }
            };
            Ok(LinkBudget { distance, harvested, gain })
        })
        .collect()
}

/// Served set under an equal bandwidth split, with the per-sensor bandwidth.
///
/// Candidates are in range, have data and harvest power; those below the rate
/// threshold at `B / |candidates|` are dropped and the split is recomputed
/// once over the survivors.
fn served_set(state: &WorldState, links: &[LinkBudget], cfg: &EnvConfig) -> (Vec<usize>, f64) {
    let candidates: Vec<usize> = (0..links.len())
        .filter(|&i| {
            links[i].distance <= cfg.d_max && state.sensors[i].pending_bits > 0 && links[i].harvested > 0.0
        })
        .collect();
    if candidates.is_empty() {
        return (candidates, 0.0);
    }
    let rate = |i: usize, bw: f64| models::achievable_rate(links[i].harvested, links[i].gain, bw, &cfg.channel);
    let bw = cfg.bandwidth / candidates.len() as f64;
    let kept: Vec<usize> = candidates.into_iter().filter(|&i| rate(i, bw) >= cfg.rate_threshold).collect();
    if kept.is_empty() {
        return (kept, 0.0);
    }
    let bw = cfg.bandwidth / kept.len() as f64;
    (kept, bw)
}

/// Sensors the UAV can serve from its current position at power
/// `action.p_tx`, using the expected channel gain. The caller applies the
/// displacement before asking.
pub fn eligible_sensors(state: &WorldState, action: &ActionCmd, cfg: &EnvConfig) -> Result<Vec<usize>, EnvError> {
    let links = link_budgets(state, action.p_tx, cfg, None)?;
    Ok(served_set(state, &links, cfg).0)
}

/// Cumulative fair data per joule, scaled by `xi`, minus the boundary
/// penalty. A ratio of running sums, not a per-slot increment.
pub fn compute_reward(state: &WorldState, violation: bool, cfg: &EnvConfig) -> f64 {
    let fair = match cfg.fairness_scope {
        FairnessScope::Slot => state.cum_fair_data,
        FairnessScope::Cumulative => state.cumulative_fair_data(),
    };
    let penalty = if violation { cfg.penalty } else { 0.0 };
    let ratio = if state.cum_energy > 0.0 { cfg.xi * fair / state.cum_energy } else { 0.0 };
    ratio - penalty
}

/// Normalized observation: UAV (x, y) then each sensor's (x, y), all in [0, 1].
pub fn observe(state: &WorldState, cfg: &EnvConfig) -> Vec<f64> {
    let a = cfg.area;
    let nx = |x: f64| (x - a.x_min) / a.width();
    let ny = |y: f64| (y - a.y_min) / a.height();
    let mut obs = Vec::with_capacity(2 + 2 * state.sensors.len());
    obs.push(nx(state.uav_position.x));
    obs.push(ny(state.uav_position.y));
    for s in &state.sensors {
        obs.push(nx(s.position.x));
        obs.push(ny(s.position.y));
    }
    obs
}

/// A seeded environment instance: configuration, world state and RNG stream.
#[derive(Debug, Clone)]
pub struct Environment {
    cfg: EnvConfig,
    state: WorldState,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn reset(cfg: EnvConfig, seed: u64) -> Result<Self, EnvError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let state = initial_state(&cfg, &mut rng)?;
        Ok(Self { cfg, state, rng })
    }

    /// Sensor placement drawn from `layout_seed`, arrivals and fading from
    /// `dynamics_seed`. Training keeps the layout fixed across episodes.
    pub fn reset_with_layout(cfg: EnvConfig, layout_seed: u64, dynamics_seed: u64) -> Result<Self, EnvError> {
        let state = initial_state(&cfg, &mut ChaCha8Rng::seed_from_u64(layout_seed))?;
        Ok(Self { cfg, state, rng: ChaCha8Rng::seed_from_u64(dynamics_seed) })
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn observe(&self) -> Vec<f64> {
        observe(&self.state, &self.cfg)
    }

    pub fn is_done(&self) -> bool {
        self.state.slot >= self.cfg.slots
    }

    /// Steps with a policy action in `[-1, 1]^3`.
    pub fn step(&mut self, raw_action: &[f64]) -> Result<StepOutcome, EnvError> {
        let cmd = ActionCmd::from_normalized(raw_action, &self.cfg)?;
        self.step_command(cmd)
    }

    /// Steps with a physical action. Displacement and power are clipped to
    /// their bounds.
    pub fn step_command(&mut self, cmd: ActionCmd) -> Result<StepOutcome, EnvError> {
        let cfg = &self.cfg;
        if self.state.slot >= cfg.slots {
            return Err(EnvError::EpisodeDone { slot: self.state.slot, slots: cfg.slots });
        }
        let cmd = ActionCmd {
            dx: cmd.dx.clamp(-cfg.move_max_x, cfg.move_max_x),
            dy: cmd.dy.clamp(-cfg.move_max_y, cfg.move_max_y),
            p_tx: cmd.p_tx.clamp(cfg.p_tx_min, cfg.p_tx_max),
        };

        let state = &mut self.state;
        let tentative = models::update_position(state.uav_position, Vec3::new(cmd.dx, cmd.dy, 0.0));
        let a = cfg.area;
        let violation = !a.contains(tentative.x, tentative.y);
        state.uav_position = Vec3::new(
            tentative.x.clamp(a.x_min, a.x_max),
            tentative.y.clamp(a.y_min, a.y_max),
            tentative.z,
        );

        generate_arrivals(state, &cfg.arrivals, &mut self.rng);

        let fading = match cfg.channel_mode {
            ChannelMode::Expected => None,
            ChannelMode::Sampled => {
                let mut f = Vec::with_capacity(state.sensors.len());
                for s in &state.sensors {
                    let theta = models::elevation_deg(&state.uav_position, &s.position);
                    let p_los = models::los_probability(theta, &cfg.channel)?;
                    let scale = if self.rng.random_bool(p_los) { 1.0 } else { cfg.channel.kappa };
                    let small: f64 = Exp1.sample(&mut self.rng);
                    f.push(scale * small);
                }
                Some(f)
            }
        };
        let links = link_budgets(state, cmd.p_tx, cfg, fading.as_deref())?;
        let (served, bw) = served_set(state, &links, cfg);

        let mut volumes = vec![0.0; state.sensors.len()];
        for &i in &served {
            let rate = models::achievable_rate(links[i].harvested, links[i].gain, bw, &cfg.channel);
            let node = &mut state.sensors[i];
            // Partial bits are not delivered.
            let capacity = models::data_volume(rate, cfg.slot_duration).floor();
            let d = if capacity >= node.pending_bits as f64 { node.pending_bits } else { capacity as u64 };
            node.pending_bits -= d;
            node.cumulative_collected_bits += d;
            volumes[i] = d as f64;
        }
        let slot_bits: f64 = volumes.iter().sum();
        let jain = models::jain_index(&volumes);
        let fair_data = models::fair_data_term(&volumes);

        let speed = (cmd.dx * cmd.dx + cmd.dy * cmd.dy).sqrt() / cfg.slot_duration;
        let charge_energy = cmd.p_tx * cfg.slot_duration;
        let propulsion_energy = models::propulsion_energy(speed, cfg.slot_duration, &cfg.rotor);
        let slot_energy = models::slot_energy(charge_energy, propulsion_energy);

        state.cum_fair_data += fair_data;
        state.cum_energy += slot_energy;
        state.slot += 1;

        let reward = compute_reward(state, violation, cfg);
        let done = state.slot == cfg.slots;
        let info = SlotInfo {
            slot: state.slot,
            position: state.uav_position,
            p_tx: cmd.p_tx,
            volumes,
            slot_bits,
            jain,
            fair_data,
            charge_energy,
            propulsion_energy,
            slot_energy,
            violation,
            n_eligible: served.len(),
        };
        Ok(StepOutcome { next_state: observe(state, cfg), reward, done, info })
    }
}
