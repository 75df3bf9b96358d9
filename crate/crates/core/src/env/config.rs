use serde::{Deserialize, Serialize};

use crate::models::{ChannelParams, RotorParams, WptParams};

use super::EnvError;

/// How the uplink gain enters the rate computation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelMode {
    /// LoS/NLoS-averaged gain, deterministic.
    Expected,
    /// Bernoulli LoS draw times an exponential(1) small-scale power factor.
    Sampled,
}

/// Which volumes the fairness index is taken over in the reward numerator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FairnessScope {
    /// Per-slot Jain over the slot's collected volumes, summed over slots.
    Slot,
    /// Jain over per-sensor cumulative totals.
    Cumulative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalParams {
    /// Per-sensor, per-slot probability of new data.
    pub p_gen: f64,
    pub mean_bits: f64,
    pub std_bits: f64,
}

impl Default for ArrivalParams {
    fn default() -> Self {
        Self { p_gen: 0.1, mean_bits: 1e6, std_bits: 2e5 }
    }
}

/// Axis-aligned operating rectangle in metres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Area {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Area {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        (self.x_min..=self.x_max).contains(&x) && (self.y_min..=self.y_max).contains(&y)
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }
}

/// Full simulation parameterization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvConfig {
    pub area: Area,
    /// Fixed UAV altitude (m).
    pub altitude: f64,
    pub start_x: f64,
    pub start_y: f64,
    pub n_sensors: usize,
    /// Slots per episode.
    pub slots: usize,
    /// Slot length (s).
    pub slot_duration: f64,
    /// Service radius for both charging and uplink (m, 3D distance).
    pub d_max: f64,
    /// Minimum uplink rate a served sensor must reach (bits/s).
    pub rate_threshold: f64,
    /// Weight on fair data per joule in the reward.
    pub xi: f64,
    /// Reward penalty for a boundary violation.
    pub penalty: f64,
    pub p_tx_min: f64,
    pub p_tx_max: f64,
    /// Per-slot displacement bounds along x and y (m).
    pub move_max_x: f64,
    pub move_max_y: f64,
    /// Total uplink bandwidth shared by OFDMA (Hz).
    pub bandwidth: f64,
    pub channel_mode: ChannelMode,
    pub fairness_scope: FairnessScope,
    pub arrivals: ArrivalParams,
    pub channel: ChannelParams,
    pub wpt: WptParams,
    pub rotor: RotorParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            area: Area { x_min: 0.0, x_max: 400.0, y_min: 0.0, y_max: 400.0 },
            altitude: 50.0,
            start_x: 100.0,
            start_y: 100.0,
            n_sensors: 20,
            slots: 200,
            slot_duration: 1.0,
            d_max: 150.0,
            rate_threshold: 1e5,
            xi: 1e-6,
            penalty: 1.0,
            p_tx_min: 0.0,
            p_tx_max: 10.0,
            move_max_x: 20.0,
            move_max_y: 20.0,
            bandwidth: 2e7,
            channel_mode: ChannelMode::Expected,
            fairness_scope: FairnessScope::Slot,
            arrivals: ArrivalParams::default(),
            channel: ChannelParams::default(),
            wpt: WptParams::default(),
            rotor: RotorParams::default(),
        }
    }
}

impl EnvConfig {
    /// Desk-scale scenario: 3 sensors in a 100 m square, 50-slot episodes.
    /// The start point keeps the same relative placement as the full-size
    /// scenario.
    pub fn tiny() -> Self {
        Self {
            area: Area { x_min: 0.0, x_max: 100.0, y_min: 0.0, y_max: 100.0 },
            start_x: 25.0,
            start_y: 25.0,
            n_sensors: 3,
            slots: 50,
            ..Self::default()
        }
    }

    pub fn obs_dim(&self) -> usize {
        2 + 2 * self.n_sensors
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::Config(msg));
        let a = &self.area;
        if !(a.x_min < a.x_max && a.y_min < a.y_max) {
            return bad(format!("area bounds are empty: {a:?}"));
        }
        if !a.contains(self.start_x, self.start_y) {
            return bad(format!("start point ({}, {}) lies outside the operating area", self.start_x, self.start_y));
        }
        if !(self.altitude > 0.0) {
            return bad("altitude must be positive".into());
        }
        if self.n_sensors == 0 {
            return bad("n_sensors must be at least 1".into());
        }
        if self.slots == 0 {
            return bad("slots must be at least 1".into());
        }
        if !(self.slot_duration > 0.0) {
            return bad("slot_duration must be positive".into());
        }
        if !(self.d_max > 0.0) {
            return bad("d_max must be positive".into());
        }
        if !(self.rate_threshold >= 0.0) {
            return bad("rate_threshold must be nonnegative".into());
        }
        if !(self.xi.is_finite() && self.penalty >= 0.0) {
            return bad("xi must be finite and penalty nonnegative".into());
        }
        if !(self.p_tx_min >= 0.0 && self.p_tx_min <= self.p_tx_max) {
            return bad(format!("transmit power bounds invalid: [{}, {}]", self.p_tx_min, self.p_tx_max));
        }
        if !(self.move_max_x >= 0.0 && self.move_max_y >= 0.0) {
            return bad("move bounds must be nonnegative".into());
        }
        if !(self.bandwidth > 0.0) {
            return bad("bandwidth must be positive".into());
        }
        let arr = &self.arrivals;
        if !((0.0..=1.0).contains(&arr.p_gen) && arr.mean_bits > 0.0 && arr.std_bits >= 0.0) {
            return bad(format!("arrival parameters out of range: {arr:?}"));
        }
        self.channel.validate()?;
        self.wpt.validate()?;
        self.rotor.validate()?;
        Ok(())
    }
}
