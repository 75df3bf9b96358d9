//! Physical and objective models: wireless power transfer, the air-to-ground
//! channel, uplink rate, rotary-wing propulsion energy and Jain fairness.
//!
//! Every function here is pure. Inputs outside an operation's domain produce a
//! [`ModelError`] instead of a silently wrong number.

use std::f64::consts::PI;
use std::ops::{Add, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },
    #[error("invalid parameters: {0}")]
    Config(String),
}

fn domain(op: &'static str, msg: impl Into<String>) -> ModelError {
    ModelError::Domain { op, msg: msg.into() }
}

/// A point or displacement in metres.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y + self.z * self.z).sqrt()
    }

    pub fn horizontal_norm(&self) -> f64 {
        (self.x * self.x + self.y * self.y).sqrt()
    }

    pub fn distance(&self, other: &Vec3) -> f64 {
        (*self - *other).norm()
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x + rhs.x, self.y + rhs.y, self.z + rhs.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, rhs: Vec3) -> Vec3 {
        Vec3::new(self.x - rhs.x, self.y - rhs.y, self.z - rhs.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

/// Air-to-ground channel constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelParams {
    /// Path loss at the 1 m reference distance (linear).
    pub beta0: f64,
    /// Path-loss exponent, shared with the Friis downlink.
    pub alpha: f64,
    /// Extra NLoS attenuation factor in (0, 1].
    pub kappa: f64,
    /// Logistic LoS coefficient `C`.
    pub c_env: f64,
    /// Logistic LoS coefficient `D`.
    pub d_env: f64,
    /// Receiver noise power in watts.
    pub noise_power: f64,
}

impl Default for ChannelParams {
    fn default() -> Self {
        Self {
            beta0: 1e-3,
            alpha: 2.6,
            kappa: 0.2,
            c_env: 10.0,
            d_env: 0.6,
            // -110 dBm
            noise_power: 1e-14,
        }
    }
}

impl ChannelParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let ok = self.alpha > 0.0
            && self.kappa > 0.0
            && self.kappa <= 1.0
            && self.beta0 > 0.0
            && self.noise_power > 0.0
            && self.c_env.is_finite()
            && self.d_env.is_finite();
        if ok {
            Ok(())
        } else {
            Err(ModelError::Config(format!("channel parameters out of range: {self:?}")))
        }
    }
}

/// Downlink power-transfer and rectenna constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WptParams {
    pub g_t: f64,
    pub g_r: f64,
    /// Carrier wavelength in metres.
    pub wavelength: f64,
    /// Rectenna activation threshold (W).
    pub p_min_rx: f64,
    /// Rectenna saturation threshold (W).
    pub p_max_rx: f64,
    /// Efficiency polynomial in the received power, lowest order first.
    pub eta_coeffs: Vec<f64>,
}

impl Default for WptParams {
    fn default() -> Self {
        Self {
            g_t: 10.0,
            g_r: 10.0,
            wavelength: 0.3275,
            p_min_rx: 1e-6,
            p_max_rx: 1e-2,
            eta_coeffs: vec![0.5],
        }
    }
}

impl WptParams {
    /// Rectenna efficiency at received power `p_rx` (Horner evaluation).
    pub fn eta(&self, p_rx: f64) -> f64 {
        self.eta_coeffs.iter().rev().fold(0.0, |acc, c| acc * p_rx + c)
    }

    /// Checks thresholds and samples the efficiency curve over the active
    /// interval on a dense grid.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.p_min_rx > 0.0 && self.p_min_rx < self.p_max_rx) {
            return Err(ModelError::Config(format!(
                "rectenna thresholds must satisfy 0 < p_min_rx < p_max_rx (got {} and {})",
                self.p_min_rx, self.p_max_rx
            )));
        }
        if !(self.g_t > 0.0 && self.g_r > 0.0 && self.wavelength > 0.0) {
            return Err(ModelError::Config("antenna gains and wavelength must be positive".into()));
        }
        if self.eta_coeffs.is_empty() {
            return Err(ModelError::Config("eta_coeffs must not be empty".into()));
        }
        const GRID: usize = 1000;
        for k in 0..=GRID {
            let p = self.p_min_rx + (self.p_max_rx - self.p_min_rx) * k as f64 / GRID as f64;
            let eta = self.eta(p);
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(ModelError::Config(format!(
                    "rectenna efficiency {eta} at {p} W lies outside (0, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Rotary-wing propulsion constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RotorParams {
    /// Blade-profile power in hover (W).
    pub p0: f64,
    /// Induced power in hover (W).
    pub pm: f64,
    pub u_tip: f64,
    /// Mean rotor-induced velocity in hover (m/s).
    pub v_ind: f64,
    /// Fuselage drag ratio.
    pub d0: f64,
    pub rho0: f64,
    /// Rotor solidity.
    pub s0: f64,
    /// Rotor disc area (m^2).
    pub disc_area: f64,
}

impl Default for RotorParams {
    fn default() -> Self {
        Self {
            p0: 79.86,
            pm: 88.63,
            u_tip: 120.0,
            v_ind: 4.03,
            d0: 0.6,
            rho0: 1.225,
            s0: 0.05,
            disc_area: 0.503,
        }
    }
}

impl RotorParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let all = [self.p0, self.pm, self.u_tip, self.v_ind, self.d0, self.rho0, self.s0, self.disc_area];
        if all.iter().all(|v| *v > 0.0 && v.is_finite()) {
            Ok(())
        } else {
            Err(ModelError::Config(format!("rotor parameters must be strictly positive: {self:?}")))
        }
    }
}

/// Friis received power at distance `dist` with path-loss exponent `alpha`.
pub fn received_power(p_tx: f64, dist: f64, wpt: &WptParams, alpha: f64) -> Result<f64, ModelError> {
    if !(dist > 0.0) {
        return Err(domain("received_power", format!("distance must be positive, got {dist}")));
    }
    if !(p_tx >= 0.0) {
        return Err(domain("received_power", format!("transmit power must be nonnegative, got {p_tx}")));
    }
    let four_pi = 4.0 * PI;
    Ok(p_tx * wpt.g_t * wpt.g_r * wpt.wavelength * wpt.wavelength / (four_pi * four_pi * dist.powf(alpha)))
}

/// DC power out of the rectenna: zero below activation, `eta(p)·p` on the
/// active interval, saturated above `p_max_rx`.
pub fn harvested_power(p_rx: f64, wpt: &WptParams) -> Result<f64, ModelError> {
    if !(p_rx >= 0.0) {
        return Err(domain("harvested_power", format!("received power must be nonnegative, got {p_rx}")));
    }
    if p_rx < wpt.p_min_rx {
        return Ok(0.0);
    }
    let p = p_rx.min(wpt.p_max_rx);
    let eta = wpt.eta(p);
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(ModelError::Config(format!("rectenna efficiency {eta} at {p} W lies outside (0, 1]")));
    }
    Ok(eta * p)
}

/// Elevation angle in degrees of `uav` as seen from `ground`.
pub fn elevation_deg(uav: &Vec3, ground: &Vec3) -> f64 {
    let d = uav.distance(ground);
    if d == 0.0 {
        return 90.0;
    }
    ((uav.z - ground.z) / d).clamp(-1.0, 1.0).asin().to_degrees()
}

/// Logistic line-of-sight probability.
pub fn los_probability(elevation_deg: f64, ch: &ChannelParams) -> Result<f64, ModelError> {
    if !(0.0..=90.0).contains(&elevation_deg) {
        return Err(domain("los_probability", format!("elevation {elevation_deg} outside [0, 90] degrees")));
    }
    Ok(1.0 / (1.0 + ch.c_env * (-ch.d_env * (elevation_deg - ch.c_env)).exp()))
}

/// LoS/NLoS-averaged large-scale gain.
pub fn expected_channel_gain(dist: f64, elevation_deg: f64, ch: &ChannelParams) -> Result<f64, ModelError> {
    if !(dist > 0.0) {
        return Err(domain("expected_channel_gain", format!("distance must be positive, got {dist}")));
    }
    let p_los = los_probability(elevation_deg, ch)?;
    let path = ch.beta0 * dist.powf(-ch.alpha);
    Ok(p_los * path + (1.0 - p_los) * ch.kappa * path)
}

/// Shannon rate in bits/s for transmit power `p_h` over a link of gain `gain`.
pub fn achievable_rate(p_h: f64, gain: f64, bandwidth: f64, ch: &ChannelParams) -> f64 {
    bandwidth * (1.0 + p_h * gain / ch.noise_power).log2()
}

pub fn data_volume(rate: f64, t_d: f64) -> f64 {
    rate * t_d
}

/// Energy in joules spent by the rotors flying at `speed` for `t_d` seconds.
pub fn propulsion_energy(speed: f64, t_d: f64, rotor: &RotorParams) -> f64 {
    let blade = rotor.p0 * (1.0 + 3.0 * (speed / rotor.u_tip).powi(2));
    let r2 = (speed / rotor.v_ind).powi(2);
    let induced = rotor.pm * ((1.0 + 0.25 * r2 * r2).sqrt() - 0.5 * r2).sqrt();
    let parasite = 0.5 * rotor.d0 * rotor.rho0 * rotor.s0 * rotor.disc_area * speed.powi(3);
    (blade + induced + parasite) * t_d
}

pub fn slot_energy(charge_energy: f64, prop_energy: f64) -> f64 {
    charge_energy + prop_energy
}

/// Jain's fairness index over all entries. The all-zero vector maps to 0.
pub fn jain_index(volumes: &[f64]) -> f64 {
    let n = volumes.len() as f64;
    let sum: f64 = volumes.iter().sum();
    let sum_sq: f64 = volumes.iter().map(|d| d * d).sum();
    if sum_sq == 0.0 {
        return 0.0;
    }
    sum * sum / (n * sum_sq)
}

/// Total volume weighted by its own fairness index.
pub fn fair_data_term(volumes: &[f64]) -> f64 {
    volumes.iter().sum::<f64>() * jain_index(volumes)
}

pub fn update_position(pos: Vec3, mv: Vec3) -> Vec3 {
    pos + mv
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn friis_zero_power_and_scaling() {
        let wpt = WptParams::default();
        assert_eq!(received_power(0.0, 37.0, &wpt, 2.6).unwrap(), 0.0);
        let r1 = received_power(3.0, 40.0, &wpt, 2.6).unwrap();
        let r2 = received_power(3.0, 80.0, &wpt, 2.6).unwrap();
        assert!((r2 / r1 - 2f64.powf(-2.6)).abs() < 1e-14);
        assert!(received_power(1.0, 0.0, &wpt, 2.6).is_err());
        assert!(received_power(1.0, -1.0, &wpt, 2.6).is_err());
    }

    #[test]
    fn friis_reference_point() {
        // 10 W, 10 dBi each side, 915 MHz, 50 m
        let p = received_power(10.0, 50.0, &WptParams::default(), 2.6).unwrap();
        assert!((p - 2.6e-5).abs() / 2.6e-5 < 0.01, "{p}");
    }

    #[test]
    fn rectenna_branches() {
        let wpt = WptParams::default();
        assert_eq!(harvested_power(wpt.p_min_rx / 2.0, &wpt).unwrap(), 0.0);
        assert_eq!(
            harvested_power(2.0 * wpt.p_max_rx, &wpt).unwrap(),
            harvested_power(wpt.p_max_rx, &wpt).unwrap()
        );
        assert_eq!(harvested_power(1e-5, &wpt).unwrap(), 5e-6);
    }

    #[test]
    fn rectenna_rejects_bad_efficiency() {
        let wpt = WptParams { eta_coeffs: vec![1.5], ..WptParams::default() };
        assert!(matches!(harvested_power(1e-4, &wpt), Err(ModelError::Config(_))));
        assert!(wpt.validate().is_err());
        // Efficiency crossing zero inside the active interval.
        let wpt = WptParams { eta_coeffs: vec![0.5, -100.0], ..WptParams::default() };
        assert!(wpt.validate().is_err());
        assert!(WptParams::default().validate().is_ok());
    }

    #[test]
    fn los_logistic() {
        let ch = ChannelParams::default();
        let at_c = los_probability(ch.c_env, &ch).unwrap();
        assert!((at_c - 1.0 / (1.0 + ch.c_env)).abs() < 1e-15);
        assert!((los_probability(90.0, &ch).unwrap() - 1.0).abs() < 1e-10);
        assert!(los_probability(91.0, &ch).is_err());
        assert!(los_probability(-0.1, &ch).is_err());
    }

    #[test]
    fn expected_gain_limits() {
        let ch = ChannelParams { kappa: 1.0, ..ChannelParams::default() };
        for theta in [0.0, 10.0, 45.0, 90.0] {
            let g = expected_channel_gain(80.0, theta, &ch).unwrap();
            let path = ch.beta0 * 80f64.powf(-ch.alpha);
            assert!((g - path).abs() <= 1e-15 * path);
        }
        let ch = ChannelParams::default();
        let g = expected_channel_gain(50.0, 90.0, &ch).unwrap();
        assert!((g - 3.83e-8).abs() / 3.83e-8 < 0.005, "{g}");
        assert!(expected_channel_gain(0.0, 45.0, &ch).is_err());
    }

    #[test]
    fn rate_edge_cases() {
        let ch = ChannelParams::default();
        assert_eq!(achievable_rate(0.0, 1e-8, 1e6, &ch), 0.0);
        assert_eq!(achievable_rate(1.0, ch.noise_power, 1e6, &ch), 1e6);
        assert_eq!(achievable_rate(1.0, 1e-8, 0.0, &ch), 0.0);
    }

    #[test]
    fn volume_and_energy_sums() {
        assert_eq!(data_volume(0.0, 1.0), 0.0);
        assert_eq!(data_volume(1234.5, 1.0), 1234.5);
        assert_eq!(data_volume(5.64e6, 0.5), 2.82e6);
        assert_eq!(slot_energy(0.0, 168.49), 168.49);
        assert_eq!(slot_energy(10.0, 0.0), 10.0);
        assert!((slot_energy(10.0 * 1.0, 168.49) - 178.49).abs() < 1e-12);
    }

    #[test]
    fn hover_energy() {
        let rotor = RotorParams::default();
        assert_eq!(propulsion_energy(0.0, 1.0, &rotor), rotor.p0 + rotor.pm);
        assert!((propulsion_energy(0.0, 1.0, &rotor) - 168.49).abs() < 1e-12);
        assert_eq!(propulsion_energy(0.0, 2.5, &rotor), (rotor.p0 + rotor.pm) * 2.5);
    }

    #[test]
    fn energy_valley_exists() {
        let rotor = RotorParams::default();
        let hover = propulsion_energy(0.0, 1.0, &rotor);
        let best = (1..=400)
            .map(|k| k as f64 * 0.1)
            .map(|v| (v, propulsion_energy(v, 1.0, &rotor)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        assert!(best.0 > 0.0 && best.1 < hover, "{best:?}");
    }

    #[test]
    fn jain_cases() {
        assert_eq!(jain_index(&[0.0, 0.0, 0.0]), 0.0);
        assert!((jain_index(&[4.0; 5]) - 1.0).abs() < 1e-15);
        assert!((jain_index(&[0.0, 7.0, 0.0, 0.0]) - 0.25).abs() < 1e-15);
        assert!((jain_index(&[1.0, 2.0, 3.0]) - 36.0 / 42.0).abs() < 1e-15);
        assert_eq!(fair_data_term(&[0.0; 3]), 0.0);
        assert!((fair_data_term(&[2.5; 4]) - 10.0).abs() < 1e-12);
        assert!((fair_data_term(&[1.0, 2.0, 3.0]) - 6.0 * 36.0 / 42.0).abs() < 1e-12);
    }

    #[test]
    fn position_update() {
        let p = Vec3::new(100.0, 100.0, 50.0);
        assert_eq!(update_position(p, Vec3::default()), p);
        assert_eq!(update_position(p, Vec3::new(20.0, 0.0, 0.0)), Vec3::new(120.0, 100.0, 50.0));
        let m = Vec3::new(3.5, -7.25, 0.0);
        assert_eq!(update_position(update_position(p, m), -m), p);
    }

    #[test]
    fn elevation_geometry() {
        let uav = Vec3::new(0.0, 0.0, 50.0);
        assert!((elevation_deg(&uav, &Vec3::default()) - 90.0).abs() < 1e-12);
        assert!((elevation_deg(&uav, &Vec3::new(50.0, 0.0, 0.0)) - 45.0).abs() < 1e-12);
    }
}
