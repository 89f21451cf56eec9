//! Stochastic agent model.
//!
//! The plant is a unicycle with two stimulus-evoked behaviours layered on a
//! free-walking baseline:
//!
//! - **Antennal turns**: a pulse train on one antenna commits a contralateral
//!   turn whose magnitude is drawn from a frequency-binned response table
//!   (piecewise-linear between bin centres). The turn executes as a
//!   trapezoidal angular-speed profile — linear ramp over `ramp_time`, then a
//!   plateau chosen so the profile integrates to the committed angle — with a
//!   forward escape-run boost proportional to the train frequency.
//! - **Elytral thrust**: a burst on both elytra adds a forward-speed boost
//!   (noisy around `thrust_gain`) with the same ramp, held for the burst
//!   window, after which speed relaxes back to the free baseline.
//!
//! Outside active responses the agent free-walks: speed relaxes towards
//! `free_speed_mean` and heading diffuses with `free_heading_noise` per
//! square-root second. Repeated stimulation habituates: response magnitude is
//! scaled by a per-channel-class gain that declines linearly per stimulus
//! down to a floor.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{AntennaSide, Channel, StimulusCommand};
use crate::geometry::{normalize_deg, Pose2D};

/// Largest timestep the integrator accepts.
pub const MAX_TIMESTEP_S: f64 = 0.02;

/// Frequency bins of the turn-response table, Hz.
pub const TURN_BIN_RANGES: [(f64, f64); 4] =
    [(10.0, 16.0), (17.0, 24.0), (25.0, 32.0), (33.0, 40.0)];

/// Bin centres used as interpolation knots, Hz.
pub const TURN_BIN_CENTERS: [f64; 4] = [13.0, 20.5, 28.5, 36.5];

/// Lowest stimulation frequency the response model covers.
pub const FREQ_MIN_HZ: f64 = TURN_BIN_RANGES[0].0;
/// Highest stimulation frequency the response model covers.
pub const FREQ_MAX_HZ: f64 = TURN_BIN_RANGES[3].1;

/// Bin index for a stimulation frequency, splitting at the midpoints of the
/// inter-bin gaps (16.5, 24.5, 32.5 Hz).
pub fn turn_bin_index(f_hz: f64) -> usize {
    if f_hz < 16.5 {
        0
    } else if f_hz < 24.5 {
        1
    } else if f_hz < 32.5 {
        2
    } else {
        3
    }
}

/// Errors produced by the plant.
#[derive(Debug, Error)]
pub enum PlantError {
    #[error("frequency out of range: {0} Hz outside [{FREQ_MIN_HZ}, {FREQ_MAX_HZ}]")]
    FrequencyOutOfRange(f64),
    #[error("invalid timestep: {0} s outside (0, {MAX_TIMESTEP_S}]")]
    InvalidTimestep(f64),
    #[error("channel {got:?} not valid here: expected {expected}")]
    WrongChannel { expected: &'static str, got: Channel },
    #[error("invalid plant params: {0}")]
    InvalidParams(String),
}

/// Mean and standard deviation of an induced turn angle, degrees.
///
/// Left turns are positive, right (clockwise) turns negative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleStats {
    pub mean_deg: f64,
    pub sd_deg: f64,
}

impl AngleStats {
    const fn new(mean_deg: f64, sd_deg: f64) -> Self {
        AngleStats { mean_deg, sd_deg }
    }
}

/// Per-side, per-frequency-bin induced turn statistics.
///
/// Right-antenna stimulation evokes left (positive) turns, left-antenna
/// stimulation right (negative) turns; magnitudes grow with frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TurnResponseTable {
    pub right_antenna: [AngleStats; 4],
    pub left_antenna: [AngleStats; 4],
}

impl Default for TurnResponseTable {
    fn default() -> Self {
        TurnResponseTable {
            right_antenna: [
                AngleStats::new(15.01, 10.46),
                AngleStats::new(17.60, 13.56),
                AngleStats::new(24.11, 15.51),
                AngleStats::new(28.50, 17.34),
            ],
            left_antenna: [
                AngleStats::new(-13.55, 7.25),
                AngleStats::new(-17.23, 9.88),
                AngleStats::new(-20.12, 9.95),
                AngleStats::new(-27.04, 13.84),
            ],
        }
    }
}

impl TurnResponseTable {
    pub fn stats(&self, side: AntennaSide) -> &[AngleStats; 4] {
        match side {
            AntennaSide::Left => &self.left_antenna,
            AntennaSide::Right => &self.right_antenna,
        }
    }

    /// Piecewise-linear interpolation over the bin centres, clamped flat
    /// outside the centre range.
    pub fn interpolate(&self, f_hz: f64, side: AntennaSide) -> AngleStats {
        let s = self.stats(side);
        let c = TURN_BIN_CENTERS;
        if f_hz <= c[0] {
            return s[0];
        }
        if f_hz >= c[3] {
            return s[3];
        }
        for i in 0..3 {
            if f_hz <= c[i + 1] {
                let w = (f_hz - c[i]) / (c[i + 1] - c[i]);
                return AngleStats::new(
                    s[i].mean_deg + w * (s[i + 1].mean_deg - s[i].mean_deg),
                    s[i].sd_deg + w * (s[i + 1].sd_deg - s[i].sd_deg),
                );
            }
        }
        unreachable!("f_hz < c[3] must fall in some segment");
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let check = |side: &str, s: &[AngleStats; 4], sign: f64| -> Result<(), PlantError> {
            for (i, a) in s.iter().enumerate() {
                if !a.mean_deg.is_finite() || !a.sd_deg.is_finite() || a.sd_deg < 0.0 {
                    return Err(PlantError::InvalidParams(format!(
                        "{side} antenna bin {i}: non-finite stats or negative sd"
                    )));
                }
                if a.mean_deg * sign <= 0.0 {
                    return Err(PlantError::InvalidParams(format!(
                        "{side} antenna bin {i}: mean has the wrong sign"
                    )));
                }
                if i > 0 && a.mean_deg.abs() <= s[i - 1].mean_deg.abs() {
                    return Err(PlantError::InvalidParams(format!(
                        "{side} antenna: |mean| must increase strictly with bin index"
                    )));
                }
            }
            Ok(())
        };
        check("right", &self.right_antenna, 1.0)?;
        check("left", &self.left_antenna, -1.0)
    }
}

/// Calibrated plant parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BeetleParams {
    pub turn_table: TurnResponseTable,
    /// Mean forward-speed boost of an elytral burst.
    pub thrust_gain_mms: f64,
    /// Thrust boost sd as a fraction of `thrust_gain_mms`.
    pub thrust_sd_frac: f64,
    /// Linear rise time of every evoked response.
    pub ramp_time_s: f64,
    /// Free-walking speed the agent relaxes towards.
    pub free_speed_mean_mms: f64,
    /// Relaxation rate of the free-walking speed, 1/s.
    pub free_speed_relaxation_hz: f64,
    /// Heading diffusion during free walking, deg per sqrt(s).
    pub free_heading_noise_deg: f64,
    /// Forward escape-run boost during an antennal turn, mm/s per Hz.
    pub escape_run_gain: f64,
    /// Per-stimulus habituation slope (fraction of response lost per
    /// stimulus on that channel class).
    pub attenuation_rate: f64,
    /// Habituation floor, in (0, 1].
    pub attenuation_floor: f64,
    /// Global scale on every stochastic term; 0 gives the deterministic
    /// mean-response plant used by calibration checks.
    pub noise_scale: f64,
}

impl Default for BeetleParams {
    fn default() -> Self {
        BeetleParams {
            turn_table: TurnResponseTable::default(),
            thrust_gain_mms: 40.0,
            thrust_sd_frac: 0.25,
            ramp_time_s: 0.1,
            free_speed_mean_mms: 7.0,
            free_speed_relaxation_hz: 2.0,
            free_heading_noise_deg: 36.0,
            escape_run_gain: 0.45,
            attenuation_rate: 0.00125,
            attenuation_floor: 0.55,
            noise_scale: 1.0,
        }
    }
}

impl BeetleParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        self.turn_table.validate()?;
        let bad = |msg: &str| Err(PlantError::InvalidParams(msg.into()));
        if !(self.thrust_gain_mms > 0.0) {
            return bad("thrust_gain_mms must be positive");
        }
        if !(self.thrust_sd_frac >= 0.0) {
            return bad("thrust_sd_frac must be non-negative");
        }
        if !(self.ramp_time_s > 0.0) {
            return bad("ramp_time_s must be positive");
        }
        if !(self.free_speed_mean_mms >= 0.0) {
            return bad("free_speed_mean_mms must be non-negative");
        }
        if !(self.free_speed_relaxation_hz >= 0.0) {
            return bad("free_speed_relaxation_hz must be non-negative");
        }
        if !(self.free_heading_noise_deg >= 0.0) {
            return bad("free_heading_noise_deg must be non-negative");
        }
        if !(self.escape_run_gain >= 0.0) {
            return bad("escape_run_gain must be non-negative");
        }
        if !(self.attenuation_rate >= 0.0) {
            return bad("attenuation_rate must be non-negative");
        }
        if !(self.attenuation_floor > 0.0 && self.attenuation_floor <= 1.0) {
            return bad("attenuation_floor must lie in (0, 1]");
        }
        if !(self.noise_scale >= 0.0) {
            return bad("noise_scale must be non-negative");
        }
        Ok(())
    }
}

/// Habituation gain after `n_stimuli` on a channel class: linear decline
/// with a floor, `max(floor, 1 - rate * n)`.
pub fn attenuation_gain(params: &BeetleParams, n_stimuli: u32) -> f64 {
    (1.0 - params.attenuation_rate * n_stimuli as f64).max(params.attenuation_floor)
}

/// Draw an induced turn angle for a stimulation frequency, degrees.
///
/// `gain` is the current habituation gain (see [`attenuation_gain`]); it
/// scales the mean response, not its spread. `noise_scale` in the params
/// scales the spread; 0 returns the attenuated mean exactly.
pub fn sample_turn_angle<R: Rng + ?Sized>(
    params: &BeetleParams,
    f_hz: f64,
    side: AntennaSide,
    gain: f64,
    rng: &mut R,
) -> Result<f64, PlantError> {
    if !(FREQ_MIN_HZ..=FREQ_MAX_HZ).contains(&f_hz) {
        return Err(PlantError::FrequencyOutOfRange(f_hz));
    }
    let stats = params.turn_table.interpolate(f_hz, side);
    let z: f64 = rng.sample(StandardNormal);
    Ok(stats.mean_deg * gain + z * stats.sd_deg * params.noise_scale)
}

/// A stimulus response currently executing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActiveResponse {
    Turn {
        start_s: f64,
        end_s: f64,
        /// Total heading change the profile integrates to.
        committed_deg: f64,
        /// Angular speed held after the ramp.
        plateau_deg_s: f64,
        /// Forward escape-run boost during the window.
        run_boost_mms: f64,
    },
    Thrust {
        start_s: f64,
        end_s: f64,
        /// Forward-speed boost held during the window.
        boost_mms: f64,
    },
}

impl ActiveResponse {
    fn end_s(&self) -> f64 {
        match self {
            ActiveResponse::Turn { end_s, .. } | ActiveResponse::Thrust { end_s, .. } => *end_s,
        }
    }
}

/// Full plant state: pose, speeds, the active response, and the stimulus
/// bookkeeping used by habituation and the exclusion rules.
#[derive(Debug, Clone, PartialEq)]
pub struct BeetleState {
    /// Plant clock, seconds since trial start.
    pub t_s: f64,
    pub pose: Pose2D,
    pub linear_speed_mms: f64,
    /// Angular speed applied during the last step.
    pub angular_speed_deg_s: f64,
    pub active_response: Option<ActiveResponse>,
    pub antenna_stim_count: u32,
    pub elytra_stim_count: u32,
    /// Side and length of the current same-side antenna-stimulus run.
    pub consecutive_unilateral: Option<(AntennaSide, u32)>,
}

impl BeetleState {
    pub fn new(pose: Pose2D, params: &BeetleParams) -> Self {
        BeetleState {
            t_s: 0.0,
            pose,
            linear_speed_mms: params.free_speed_mean_mms,
            angular_speed_deg_s: 0.0,
            active_response: None,
            antenna_stim_count: 0,
            elytra_stim_count: 0,
            consecutive_unilateral: None,
        }
    }

    /// Apply a command to whichever channel it addresses.
    pub fn apply_stimulus<R: Rng + ?Sized>(
        &mut self,
        params: &BeetleParams,
        cmd: &StimulusCommand,
        rng: &mut R,
    ) -> Result<(), PlantError> {
        match cmd.channel {
            Channel::ElytraBoth => self.apply_elytra_stimulus(params, cmd, rng),
            Channel::LeftAntenna | Channel::RightAntenna => {
                self.apply_antenna_stimulus(params, cmd, rng)
            }
        }
    }

    /// Commit a contralateral turn for an antennal pulse train.
    ///
    /// The turn executes as a trapezoid: angular speed ramps over
    /// `ramp_time`, then holds at `angle / (duration - ramp/2)` so the
    /// profile integrates to the committed angle. A new stimulus replaces any
    /// response still active (defensive; the controller cadence outlasts
    /// every response window).
    pub fn apply_antenna_stimulus<R: Rng + ?Sized>(
        &mut self,
        params: &BeetleParams,
        cmd: &StimulusCommand,
        rng: &mut R,
    ) -> Result<(), PlantError> {
        let side = cmd.channel.antenna_side().ok_or(PlantError::WrongChannel {
            expected: "an antenna channel",
            got: cmd.channel,
        })?;
        let gain = attenuation_gain(params, self.antenna_stim_count);
        let angle = sample_turn_angle(params, cmd.frequency_hz, side, gain, rng)?;
        let duration_s = cmd.duration_ms / 1000.0;
        let ramp = params.ramp_time_s.min(duration_s);
        let plateau = angle / (duration_s - ramp / 2.0);
        self.active_response = Some(ActiveResponse::Turn {
            start_s: self.t_s,
            end_s: self.t_s + duration_s,
            committed_deg: angle,
            plateau_deg_s: plateau,
            run_boost_mms: params.escape_run_gain * cmd.frequency_hz * gain,
        });
        self.antenna_stim_count += 1;
        self.consecutive_unilateral = match self.consecutive_unilateral {
            Some((s, n)) if s == side => Some((side, n + 1)),
            _ => Some((side, 1)),
        };
        Ok(())
    }

    /// Commit a forward-speed boost for an elytral burst.
    pub fn apply_elytra_stimulus<R: Rng + ?Sized>(
        &mut self,
        params: &BeetleParams,
        cmd: &StimulusCommand,
        rng: &mut R,
    ) -> Result<(), PlantError> {
        if cmd.channel != Channel::ElytraBoth {
            return Err(PlantError::WrongChannel {
                expected: "elytra_both",
                got: cmd.channel,
            });
        }
        let gain = attenuation_gain(params, self.elytra_stim_count);
        let z: f64 = rng.sample(StandardNormal);
        let spread = params.thrust_sd_frac * params.thrust_gain_mms * params.noise_scale;
        let boost = (params.thrust_gain_mms * gain + z * spread).max(0.0);
        self.active_response = Some(ActiveResponse::Thrust {
            start_s: self.t_s,
            end_s: self.t_s + cmd.duration_ms / 1000.0,
            boost_mms: boost,
        });
        self.elytra_stim_count += 1;
        self.consecutive_unilateral = None;
        Ok(())
    }

    /// Advance the plant by one timestep (unicycle Euler integration).
    ///
    /// Response profiles are evaluated at the step midpoint, which makes the
    /// discrete integral of the trapezoid exact whenever `dt` divides the
    /// ramp and window lengths. Heading noise and speed relaxation apply only
    /// while no response is active.
    pub fn step<R: Rng + ?Sized>(
        &mut self,
        params: &BeetleParams,
        dt: f64,
        rng: &mut R,
    ) -> Result<(), PlantError> {
        if !(dt > 0.0 && dt <= MAX_TIMESTEP_S) {
            return Err(PlantError::InvalidTimestep(dt));
        }
        let t_mid = self.t_s + dt / 2.0;
        if let Some(resp) = self.active_response {
            if t_mid >= resp.end_s() {
                self.active_response = None;
            }
        }
        let mut angular = 0.0;
        match self.active_response {
            Some(ActiveResponse::Turn {
                start_s,
                end_s,
                plateau_deg_s,
                run_boost_mms,
                ..
            }) => {
                let shape = ramp_shape(t_mid - start_s, params.ramp_time_s.min(end_s - start_s));
                angular = plateau_deg_s * shape;
                self.linear_speed_mms = params.free_speed_mean_mms + run_boost_mms * shape;
            }
            Some(ActiveResponse::Thrust {
                start_s,
                end_s,
                boost_mms,
            }) => {
                let shape = ramp_shape(t_mid - start_s, params.ramp_time_s.min(end_s - start_s));
                self.linear_speed_mms = params.free_speed_mean_mms + boost_mms * shape;
            }
            None => {
                let z: f64 = rng.sample(StandardNormal);
                let sigma = params.free_heading_noise_deg * dt.sqrt() * params.noise_scale;
                self.pose.heading_deg = normalize_deg(self.pose.heading_deg + z * sigma);
                if params.free_speed_relaxation_hz > 0.0 {
                    let pull = 1.0 - (-params.free_speed_relaxation_hz * dt).exp();
                    self.linear_speed_mms +=
                        (params.free_speed_mean_mms - self.linear_speed_mms) * pull;
                }
            }
        }
        self.angular_speed_deg_s = angular;
        self.pose.heading_deg = normalize_deg(self.pose.heading_deg + angular * dt);
        self.linear_speed_mms = self.linear_speed_mms.max(0.0);
        let h = self.pose.heading_deg.to_radians();
        self.pose.x += self.linear_speed_mms * h.cos() * dt;
        self.pose.y += self.linear_speed_mms * h.sin() * dt;
        self.t_s += dt;
        Ok(())
    }
}

/// Leading-ramp profile: 0 at onset, linear to 1 over `ramp`, then flat.
fn ramp_shape(elapsed_s: f64, ramp_s: f64) -> f64 {
    if elapsed_s <= 0.0 {
        0.0
    } else if elapsed_s < ramp_s {
        elapsed_s / ramp_s
    } else {
        1.0
    }
}
