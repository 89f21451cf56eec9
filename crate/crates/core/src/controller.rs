//! Proportional stimulus scheduling.
//!
//! At every update tick the controller looks at the signed heading error
//! towards the current carrot target and emits exactly one stimulus command:
//!
//! - error magnitude above the steering threshold: a pulse train on the
//!   antenna *contralateral* to the intended turn (stimulating the right
//!   antenna evokes a left turn and vice versa), with train frequency
//!   proportional to the error magnitude and clamped to the calibrated band;
//! - error magnitude at or below the threshold: a fixed elytral burst that
//!   produces forward thrust.
//!
//! The policy is a pure function of the configuration and the pose, so the
//! trial runner stays the single owner of time and randomness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{heading_error, GeometryError, Point, Pose2D};

/// Errors produced by the controller.
#[derive(Debug, Error)]
pub enum ControllerError {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("invalid controller config: {0}")]
    InvalidConfig(String),
}

/// Stimulation channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    LeftAntenna,
    RightAntenna,
    /// Both elytral electrodes driven together.
    ElytraBoth,
}

impl Channel {
    /// Which antenna this channel drives, if any.
    pub fn antenna_side(&self) -> Option<AntennaSide> {
        match self {
            Channel::LeftAntenna => Some(AntennaSide::Left),
            Channel::RightAntenna => Some(AntennaSide::Right),
            Channel::ElytraBoth => None,
        }
    }
}

/// Antenna identity, used by the plant's response tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AntennaSide {
    Left,
    Right,
}

/// One scheduled stimulus: a pulse train on a single channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusCommand {
    pub channel: Channel,
    /// Pulse-train frequency.
    pub frequency_hz: f64,
    /// Train duration.
    pub duration_ms: f64,
    /// Pulse amplitude.
    pub amplitude_v: f64,
    /// Per-pulse width for antennal trains; `None` for elytral bursts.
    pub pulse_width_ms: Option<f64>,
    /// Duty cycle for elytral bursts; `None` for antennal trains.
    pub duty_pct: Option<f64>,
    /// Time the command was issued, trial clock.
    pub timestamp_s: f64,
}

/// Controller gains and stimulus recipes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    /// Proportional gain mapping degrees of heading error to Hz.
    pub kp: f64,
    /// Seconds between control updates.
    pub t_update_s: f64,
    /// Heading-error magnitude above which the controller steers.
    pub theta_threshold_deg: f64,
    /// Lower clamp of the steering frequency band.
    pub f_min_hz: f64,
    /// Upper clamp of the steering frequency band.
    pub f_max_hz: f64,
    /// Antennal train duration.
    pub antenna_duration_ms: f64,
    /// Antennal pulse width.
    pub antenna_pulse_width_ms: f64,
    /// Elytral burst frequency.
    pub elytra_frequency_hz: f64,
    /// Elytral burst duration.
    pub elytra_duration_ms: f64,
    /// Elytral duty cycle.
    pub elytra_duty_pct: f64,
    /// Pulse amplitude for both channels.
    pub amplitude_v: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            kp: 0.5,
            t_update_s: 1.0,
            theta_threshold_deg: 25.0,
            f_min_hz: 10.0,
            f_max_hz: 40.0,
            antenna_duration_ms: 400.0,
            antenna_pulse_width_ms: 2.0,
            elytra_frequency_hz: 20.0,
            elytra_duration_ms: 200.0,
            elytra_duty_pct: 50.0,
            amplitude_v: 2.5,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), ControllerError> {
        let bad = |msg: &str| Err(ControllerError::InvalidConfig(msg.into()));
        if !(self.kp > 0.0) {
            return bad("kp must be positive");
        }
        if !(self.t_update_s > 0.0) {
            return bad("t_update_s must be positive");
        }
        if !(self.theta_threshold_deg > 0.0 && self.theta_threshold_deg < 180.0) {
            return bad("theta_threshold_deg must lie in (0, 180)");
        }
        if !(self.f_min_hz > 0.0 && self.f_max_hz > self.f_min_hz) {
            return bad("steering band requires 0 < f_min < f_max");
        }
        if !(self.antenna_duration_ms > 0.0 && self.elytra_duration_ms > 0.0) {
            return bad("stimulus durations must be positive");
        }
        if !(self.antenna_pulse_width_ms > 0.0) {
            return bad("antenna pulse width must be positive");
        }
        if !(self.elytra_frequency_hz > 0.0) {
            return bad("elytra frequency must be positive");
        }
        if !(self.elytra_duty_pct > 0.0 && self.elytra_duty_pct <= 100.0) {
            return bad("elytra duty must lie in (0, 100]");
        }
        if !(self.amplitude_v > 0.0) {
            return bad("amplitude must be positive");
        }
        Ok(())
    }

    /// Steering frequency for a heading error: `kp * |theta|` clamped to the
    /// calibrated band.
    pub fn steering_frequency(&self, theta_deg: f64) -> f64 {
        (self.kp * theta_deg.abs()).clamp(self.f_min_hz, self.f_max_hz)
    }
}

/// Decide the stimulus for one control update.
///
/// `now_s` stamps the command with the trial clock. Fails only when the
/// carrot coincides with the pose, which leaves the bearing undefined.
pub fn decide(
    cfg: &ControllerConfig,
    pose: &Pose2D,
    carrot: Point,
    now_s: f64,
) -> Result<StimulusCommand, ControllerError> {
    let theta = heading_error(pose, carrot)?;
    if theta.abs() > cfg.theta_threshold_deg {
        // Turn towards the carrot: a positive error (carrot to the left)
        // needs a counter-clockwise turn, evoked from the right antenna.
        let channel = if theta > 0.0 {
            Channel::RightAntenna
        } else {
            Channel::LeftAntenna
        };
        Ok(StimulusCommand {
            channel,
            frequency_hz: cfg.steering_frequency(theta),
            duration_ms: cfg.antenna_duration_ms,
            amplitude_v: cfg.amplitude_v,
            pulse_width_ms: Some(cfg.antenna_pulse_width_ms),
            duty_pct: None,
            timestamp_s: now_s,
        })
    } else {
        Ok(StimulusCommand {
            channel: Channel::ElytraBoth,
            frequency_hz: cfg.elytra_frequency_hz,
            duration_ms: cfg.elytra_duration_ms,
            amplitude_v: cfg.amplitude_v,
            pulse_width_ms: None,
            duty_pct: Some(cfg.elytra_duty_pct),
            timestamp_s: now_s,
        })
    }
}
