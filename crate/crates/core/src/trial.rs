//! Trials, sessions, and the parameter sweep.
//!
//! A trial runs the closed loop: the plant advances every `frame_dt`, and at
//! every `t_update` tick the controller projects the pose onto the lane,
//! places a carrot target a lookahead ahead, and applies the decided stimulus
//! to the plant. Trials terminate on destination arrival, arena exit, or
//! timeout. Sessions chain trials with alternating travel direction while
//! the habituation counters persist across the session (one simulated
//! animal). The sweep runs one session per (gain, update-interval)
//! combination per animal, visiting the grid in a seed-determined random
//! order, and tags every record with its combination.
//!
//! Trials are deterministic: every random draw comes from a per-trial
//! ChaCha8 stream derived from the configured seed, so identical configs
//! reproduce identical records byte for byte, regardless of execution order
//! or parallelism.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::{decide, ControllerConfig, ControllerError, StimulusCommand};
use crate::geometry::{
    carrot_target, carrot_target_reversed, project_onto_path, ArenaSpec, GeometryError, PathSpec,
    Pose2D,
};
use crate::plant::{BeetleParams, BeetleState, PlantError, MAX_TIMESTEP_S};

/// Errors produced while configuring or running trials.
#[derive(Debug, Error)]
pub enum TrialError {
    #[error("invalid trial config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Controller(#[from] ControllerError),
    #[error(transparent)]
    Plant(#[from] PlantError),
}

impl From<GeometryError> for TrialError {
    fn from(e: GeometryError) -> Self {
        TrialError::InvalidConfig(e.to_string())
    }
}

/// Travel direction along the lane.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// Start circle to destination circle (increasing x).
    Forward,
    /// Destination back to the start circle.
    Reversed,
}

impl Direction {
    pub fn flipped(self) -> Direction {
        match self {
            Direction::Forward => Direction::Reversed,
            Direction::Reversed => Direction::Forward,
        }
    }
}

/// Everything one trial needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub controller: ControllerConfig,
    pub beetle: BeetleParams,
    pub path: PathSpec,
    pub arena: ArenaSpec,
    /// Carrot lookahead distance.
    pub lookahead_mm: f64,
    /// Wall-clock limit of a trial (simulated seconds).
    pub timeout_s: f64,
    /// Integration and logging timestep.
    pub frame_dt_s: f64,
    /// Seed of the trial's random stream.
    pub seed: u64,
    pub direction: Direction,
    /// Probability that a frame is flagged miss-tracked.
    pub dropout_rate: f64,
    /// Half-width of the uniform initial-heading jitter around the lane
    /// tangent.
    pub heading_jitter_deg: f64,
}

impl Default for TrialConfig {
    fn default() -> Self {
        TrialConfig {
            controller: ControllerConfig::default(),
            beetle: BeetleParams::default(),
            path: PathSpec::default(),
            arena: ArenaSpec::default(),
            lookahead_mm: 80.0,
            timeout_s: 300.0,
            frame_dt_s: 0.01,
            seed: 0,
            direction: Direction::Forward,
            dropout_rate: 0.0,
            heading_jitter_deg: 30.0,
        }
    }
}

impl TrialConfig {
    pub fn validate(&self) -> Result<(), TrialError> {
        self.path.validate()?;
        self.arena.validate()?;
        self.controller.validate()?;
        self.beetle.validate()?;
        let bad = |msg: &str| Err(TrialError::InvalidConfig(msg.into()));
        if !(self.lookahead_mm > 0.0) {
            return bad("lookahead_mm must be positive");
        }
        if !(self.timeout_s > 0.0) {
            return bad("timeout_s must be positive");
        }
        if !(self.frame_dt_s > 0.0 && self.frame_dt_s <= MAX_TIMESTEP_S) {
            return bad("frame_dt_s must lie in (0, 0.02]");
        }
        if !(self.dropout_rate >= 0.0 && self.dropout_rate < 1.0) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.heading_jitter_deg >= 0.0 && self.heading_jitter_deg <= 180.0) {
            return bad("heading_jitter_deg must lie in [0, 180]");
        }
        if self.controller.t_update_s < self.frame_dt_s {
            return bad("t_update_s must be at least one frame_dt_s");
        }
        Ok(())
    }
}

/// Why a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminationReason {
    Success,
    OutOfBounds,
    Timeout,
}

/// Why a trial is dropped from analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExclusionReason {
    /// 15 or more consecutive same-side antenna stimuli.
    UnilateralRuns,
    /// More than 20% of frames miss-tracked.
    MissTracking,
}

/// One logged pose sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub t_s: f64,
    pub pose: Pose2D,
    pub tracked: bool,
}

/// Identifies where in a sweep a record came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialTag {
    pub kp: f64,
    pub t_update_s: f64,
    pub seed: u64,
    pub beetle_index: u32,
    pub trial_index: u32,
    pub direction: Direction,
}

/// Complete log of one trial: the unit of all analysis.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub frames: Vec<Frame>,
    pub stimuli: Vec<StimulusCommand>,
    pub outcome: TerminationReason,
    pub excluded: Option<ExclusionReason>,
    pub tag: TrialTag,
}

/// Habituation bookkeeping carried across a session.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct StimulusCarry {
    antenna: u32,
    elytra: u32,
}

/// SplitMix64 finalizer; mixes one 64-bit lane into a hash state.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Deterministic child seed from a base seed and an index path.
pub fn derive_seed(base: u64, lanes: &[u64]) -> u64 {
    lanes
        .iter()
        .fold(splitmix64(base), |h, &v| splitmix64(h ^ splitmix64(v)))
}

// Lane tags keep the different derivation streams disjoint.
const LANE_TRIAL: u64 = 0x7472_6961_6c00_0001; // per-trial seeds within a session
const LANE_ORDER: u64 = 0x6f72_6465_7200_0002; // per-animal grid visiting order
const LANE_SESSION: u64 = 0x7365_7373_0000_0003; // per-(animal, combo) session seeds

/// Run one trial.
///
/// The closed loop: at every update tick whose frame is tracked, project the
/// pose onto the lane, place the carrot, decide the stimulus, apply it; then
/// advance the plant one frame. Miss-tracked ticks skip their update (no
/// stale command is replayed). The returned record has its exclusion flags
/// already applied.
pub fn run_trial(config: &TrialConfig) -> Result<TrialRecord, TrialError> {
    config.validate()?;
    let tag = TrialTag {
        kp: config.controller.kp,
        t_update_s: config.controller.t_update_s,
        seed: config.seed,
        beetle_index: 0,
        trial_index: 0,
        direction: config.direction,
    };
    let mut carry = StimulusCarry::default();
    run_trial_impl(config, tag, &mut carry)
}

fn run_trial_impl(
    config: &TrialConfig,
    tag: TrialTag,
    carry: &mut StimulusCarry,
) -> Result<TrialRecord, TrialError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let path = &config.path;
    let (start_x, dest) = match config.direction {
        Direction::Forward => (path.x_start_mm, path.end_point()),
        Direction::Reversed => (path.x_end_mm, path.start_point()),
    };
    let start = path.point_at(start_x);
    let mut heading = path.tangent_deg(start_x);
    if config.direction == Direction::Reversed {
        heading += 180.0;
    }
    if config.heading_jitter_deg > 0.0 {
        heading += (rng.random::<f64>() * 2.0 - 1.0) * config.heading_jitter_deg;
    }
    let mut state = BeetleState::new(Pose2D::new(start.x, start.y, heading), &config.beetle);
    state.antenna_stim_count = carry.antenna;
    state.elytra_stim_count = carry.elytra;

    let dt = config.frame_dt_s;
    let update_every = ((config.controller.t_update_s / dt).round() as u64).max(1);
    let timeout_frames = (config.timeout_s / dt).round() as u64;
    let draw_tracked = |rng: &mut ChaCha8Rng| {
        config.dropout_rate == 0.0 || rng.random::<f64>() >= config.dropout_rate
    };

    let mut frames = Vec::with_capacity(1024);
    let mut stimuli = Vec::new();
    let tracked0 = draw_tracked(&mut rng);
    frames.push(Frame {
        t_s: 0.0,
        pose: state.pose,
        tracked: tracked0,
    });

    let outcome = loop {
        let k = frames.len() as u64 - 1;
        if k % update_every == 0 && frames.last().is_some_and(|f| f.tracked) {
            let proj = project_onto_path(path, state.pose.position());
            let carrot = match config.direction {
                Direction::Forward => carrot_target(path, proj.foot, config.lookahead_mm),
                Direction::Reversed => {
                    carrot_target_reversed(path, proj.foot, config.lookahead_mm)
                }
            };
            match decide(&config.controller, &state.pose, carrot, state.t_s) {
                Ok(cmd) => {
                    state.apply_stimulus(&config.beetle, &cmd, &mut rng)?;
                    stimuli.push(cmd);
                }
                // Sitting exactly on the carrot leaves the bearing undefined;
                // skip this update and let the next tick re-aim.
                Err(ControllerError::Geometry(GeometryError::DegenerateTarget)) => {}
                Err(e) => return Err(e.into()),
            }
        }
        state.step(&config.beetle, dt, &mut rng)?;
        let tracked = draw_tracked(&mut rng);
        frames.push(Frame {
            t_s: state.t_s,
            pose: state.pose,
            tracked,
        });
        if state.pose.position().distance_to(dest) <= path.endpoint_radius_mm {
            break TerminationReason::Success;
        }
        if !config.arena.contains(state.pose.position()) {
            break TerminationReason::OutOfBounds;
        }
        if k + 1 >= timeout_frames {
            break TerminationReason::Timeout;
        }
    };

    carry.antenna = state.antenna_stim_count;
    carry.elytra = state.elytra_stim_count;
    Ok(flag_exclusions(TrialRecord {
        frames,
        stimuli,
        outcome,
        excluded: None,
        tag,
    }))
}

/// Apply the exclusion rules to a completed record.
///
/// A run of 15 or more consecutive same-side antenna stimuli (elytra bursts
/// break the run) marks `unilateral_runs`; failing that, strictly more than
/// 20% miss-tracked frames marks `miss_tracking`. Pure and idempotent: the
/// flags depend on the record alone.
pub fn flag_exclusions(record: TrialRecord) -> TrialRecord {
    let mut record = record;
    let mut run_side = None;
    let mut run_len: u32 = 0;
    let mut max_run: u32 = 0;
    for cmd in &record.stimuli {
        match cmd.channel.antenna_side() {
            Some(side) => {
                if run_side == Some(side) {
                    run_len += 1;
                } else {
                    run_side = Some(side);
                    run_len = 1;
                }
                max_run = max_run.max(run_len);
            }
            None => {
                run_side = None;
                run_len = 0;
            }
        }
    }
    record.excluded = if max_run >= 15 {
        Some(ExclusionReason::UnilateralRuns)
    } else {
        let untracked = record.frames.iter().filter(|f| !f.tracked).count();
        if untracked as f64 > 0.20 * record.frames.len() as f64 {
            Some(ExclusionReason::MissTracking)
        } else {
            None
        }
    };
    record
}

/// Run a session: `n_trials` trials by one animal, directions alternating,
/// habituation counters carried across trials. Per-trial seeds derive from
/// the base seed and trial index.
pub fn run_session(base: &TrialConfig, n_trials: u32) -> Result<Vec<TrialRecord>, TrialError> {
    if n_trials == 0 {
        return Err(TrialError::InvalidConfig("n_trials must be at least 1".into()));
    }
    session_records(base, n_trials, 0)
}

fn session_records(
    base: &TrialConfig,
    n_trials: u32,
    beetle_index: u32,
) -> Result<Vec<TrialRecord>, TrialError> {
    base.validate()?;
    let mut carry = StimulusCarry::default();
    let mut records = Vec::with_capacity(n_trials as usize);
    for i in 0..n_trials {
        let mut cfg = base.clone();
        cfg.direction = if i % 2 == 0 {
            base.direction
        } else {
            base.direction.flipped()
        };
        cfg.seed = derive_seed(base.seed, &[LANE_TRIAL, i as u64]);
        let tag = TrialTag {
            kp: cfg.controller.kp,
            t_update_s: cfg.controller.t_update_s,
            seed: cfg.seed,
            beetle_index,
            trial_index: i,
            direction: cfg.direction,
        };
        records.push(run_trial_impl(&cfg, tag, &mut carry)?);
    }
    Ok(records)
}

/// The 3x3 sweep configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    /// Template for every trial; its seed is the sweep's master seed, and
    /// its controller gain/update-interval are overridden per combination.
    pub base: TrialConfig,
    pub kp_values: Vec<f64>,
    pub t_update_values: Vec<f64>,
    pub n_beetles: u32,
    pub trials_per_session: u32,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            base: TrialConfig::default(),
            kp_values: vec![0.25, 0.50, 0.75],
            t_update_values: vec![1.0, 1.5, 2.0],
            n_beetles: 19,
            trials_per_session: 12,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<(), TrialError> {
        self.base.validate()?;
        let bad = |msg: &str| Err(TrialError::InvalidConfig(msg.into()));
        if self.kp_values.is_empty() || self.t_update_values.is_empty() {
            return bad("sweep grids must be non-empty");
        }
        if self.kp_values.iter().any(|&k| !(k > 0.0)) {
            return bad("kp grid values must be positive");
        }
        if self
            .t_update_values
            .iter()
            .any(|&t| !(t >= self.base.frame_dt_s))
        {
            return bad("t_update grid values must be at least one frame_dt_s");
        }
        if self.n_beetles == 0 {
            return bad("n_beetles must be at least 1");
        }
        if self.trials_per_session == 0 {
            return bad("trials_per_session must be at least 1");
        }
        Ok(())
    }

    /// Grid combinations in canonical order: update-interval major, gain
    /// minor.
    pub fn combos(&self) -> Vec<(f64, f64)> {
        let mut combos = Vec::with_capacity(self.t_update_values.len() * self.kp_values.len());
        for &tu in &self.t_update_values {
            for &kp in &self.kp_values {
                combos.push((tu, kp));
            }
        }
        combos
    }
}

/// Run the full sweep: one session per animal per grid combination, combos
/// visited in a per-animal seed-determined random order.
///
/// Sessions execute independently (over a thread pool when one is
/// available), but the returned order — animal major, then that animal's
/// visiting order, then trial index — and every byte of the records are
/// identical to sequential execution.
pub fn run_sweep(sweep: &SweepConfig) -> Result<Vec<TrialRecord>, TrialError> {
    sweep.validate()?;
    let combos = sweep.combos();
    let master = sweep.base.seed;
    let mut jobs = Vec::new();
    for b in 0..sweep.n_beetles {
        let mut order: Vec<usize> = (0..combos.len()).collect();
        let mut order_rng = ChaCha8Rng::seed_from_u64(derive_seed(master, &[LANE_ORDER, b as u64]));
        order.shuffle(&mut order_rng);
        for (slot, combo_index) in order.into_iter().enumerate() {
            jobs.push((b, slot, combo_index));
        }
    }
    let mut sessions: Vec<((u32, usize), Vec<TrialRecord>)> = jobs
        .into_par_iter()
        .map(|(b, slot, combo_index)| {
            let (tu, kp) = combos[combo_index];
            let mut cfg = sweep.base.clone();
            cfg.controller.t_update_s = tu;
            cfg.controller.kp = kp;
            cfg.seed = derive_seed(master, &[LANE_SESSION, b as u64, combo_index as u64]);
            session_records(&cfg, sweep.trials_per_session, b).map(|recs| ((b, slot), recs))
        })
        .collect::<Result<Vec<_>, _>>()?;
    sessions.sort_by_key(|(key, _)| *key);
    Ok(sessions.into_iter().flat_map(|(_, recs)| recs).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::Channel;
    use approx::assert_abs_diff_eq;

    /// Straight lane, quiet plant: the agent starts aligned and should ride
    /// the lane into the destination on thrust alone.
    fn straight_quiet_config() -> TrialConfig {
        TrialConfig {
            path: PathSpec {
                amplitude_mm: 0.0,
                ..PathSpec::default()
            },
            beetle: BeetleParams {
                noise_scale: 0.0,
                free_heading_noise_deg: 0.0,
                ..BeetleParams::default()
            },
            heading_jitter_deg: 0.0,
            ..TrialConfig::default()
        }
    }

    #[test]
    fn aligned_straight_path_succeeds_on_thrust_alone() {
        let record = run_trial(&straight_quiet_config()).unwrap();
        assert_eq!(record.outcome, TerminationReason::Success);
        assert!(!record.stimuli.is_empty());
        assert!(record
            .stimuli
            .iter()
            .all(|s| s.channel == Channel::ElytraBoth));
        let last = record.frames.last().unwrap();
        let dest = record.frames[0].pose; // path end is at (425, 0); start (-425, 0)
        assert!(last.pose.x > 300.0, "should have crossed the arena");
        let _ = dest;
        assert!(record.excluded.is_none());
    }

    #[test]
    fn success_implies_final_pose_inside_destination_circle() {
        let cfg = straight_quiet_config();
        let record = run_trial(&cfg).unwrap();
        assert_eq!(record.outcome, TerminationReason::Success);
        let dest = cfg.path.end_point();
        let last = record.frames.last().unwrap().pose.position();
        assert!(last.distance_to(dest) <= cfg.path.endpoint_radius_mm + 1e-9);
    }

    #[test]
    fn immobile_agent_times_out_at_the_limit() {
        let mut cfg = straight_quiet_config();
        // Effectively pinned: no baseline walk, negligible thrust.
        cfg.beetle.free_speed_mean_mms = 0.0;
        cfg.beetle.thrust_gain_mms = 1e-9;
        cfg.beetle.escape_run_gain = 0.0;
        cfg.timeout_s = 30.0; // shortened limit, same rule
        let record = run_trial(&cfg).unwrap();
        assert_eq!(record.outcome, TerminationReason::Timeout);
        let last = record.frames.last().unwrap();
        assert_abs_diff_eq!(last.t_s, 30.0, epsilon = 1e-6);
        assert_eq!(record.frames.len(), 3001);
    }

    #[test]
    fn agent_leaving_the_arena_is_out_of_bounds() {
        let mut cfg = straight_quiet_config();
        // Arena much smaller than the lane: the agent starts outside.
        cfg.arena = ArenaSpec {
            width_mm: 100.0,
            height_mm: 50.0,
        };
        let record = run_trial(&cfg).unwrap();
        assert_eq!(record.outcome, TerminationReason::OutOfBounds);
        let last = record.frames.last().unwrap().pose.position();
        assert!(!cfg.arena.contains(last));
    }

    #[test]
    fn stimulus_timestamps_sit_on_update_ticks() {
        let mut cfg = TrialConfig::default();
        cfg.seed = 11;
        cfg.controller.t_update_s = 1.5;
        let record = run_trial(&cfg).unwrap();
        assert!(!record.stimuli.is_empty());
        for s in &record.stimuli {
            let phase = s.timestamp_s / cfg.controller.t_update_s;
            let err = (phase - phase.round()).abs() * cfg.controller.t_update_s;
            assert!(
                err < cfg.frame_dt_s,
                "stimulus at t={} is off-cadence",
                s.timestamp_s
            );
        }
        for pair in record.stimuli.windows(2) {
            assert!(
                pair[1].timestamp_s - pair[0].timestamp_s
                    >= cfg.controller.t_update_s - cfg.frame_dt_s
            );
        }
    }

    #[test]
    fn frames_are_strictly_time_ordered() {
        let mut cfg = TrialConfig::default();
        cfg.seed = 13;
        let record = run_trial(&cfg).unwrap();
        for pair in record.frames.windows(2) {
            assert!(pair[1].t_s > pair[0].t_s);
        }
    }

    #[test]
    fn first_update_reacts_to_the_initial_pose() {
        let mut cfg = TrialConfig::default();
        cfg.seed = 17;
        let record = run_trial(&cfg).unwrap();
        let first = record.stimuli.first().unwrap();
        assert_eq!(first.timestamp_s, 0.0);
        // Recompute what the controller must have seen at t=0.
        let pose0 = record.frames[0].pose;
        let proj = project_onto_path(&cfg.path, pose0.position());
        let carrot = carrot_target(&cfg.path, proj.foot, cfg.lookahead_mm);
        let expected = decide(&cfg.controller, &pose0, carrot, 0.0).unwrap();
        assert_eq!(first, &expected);
    }

    #[test]
    fn identical_configs_reproduce_identical_records() {
        let mut cfg = TrialConfig::default();
        cfg.seed = 23;
        let a = run_trial(&cfg).unwrap();
        let b = run_trial(&cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_seeds_change_the_record() {
        let mut cfg = TrialConfig::default();
        cfg.seed = 29;
        let a = run_trial(&cfg).unwrap();
        cfg.seed = 31;
        let b = run_trial(&cfg).unwrap();
        assert_ne!(a.frames, b.frames);
    }

    #[test]
    fn dropout_skips_updates_on_untracked_ticks() {
        let mut cfg = TrialConfig::default();
        cfg.seed = 37;
        cfg.dropout_rate = 0.5;
        cfg.timeout_s = 60.0;
        let record = run_trial(&cfg).unwrap();
        // Every stimulus must coincide with a tracked frame.
        for s in &record.stimuli {
            let k = (s.timestamp_s / cfg.frame_dt_s).round() as usize;
            assert!(
                record.frames[k].tracked,
                "stimulus at t={} on an untracked tick",
                s.timestamp_s
            );
        }
        // With 50% dropout some ticks must have been skipped.
        let expected_ticks = (record.frames.len() - 1)
            / (cfg.controller.t_update_s / cfg.frame_dt_s) as usize
            + 1;
        assert!(record.stimuli.len() < expected_ticks);
    }

    fn synthetic_record(stimuli: Vec<StimulusCommand>, frames: Vec<Frame>) -> TrialRecord {
        TrialRecord {
            frames,
            stimuli,
            outcome: TerminationReason::Success,
            excluded: None,
            tag: TrialTag {
                kp: 0.5,
                t_update_s: 1.0,
                seed: 0,
                beetle_index: 0,
                trial_index: 0,
                direction: Direction::Forward,
            },
        }
    }

    fn cmd_at(channel: Channel, t_s: f64) -> StimulusCommand {
        StimulusCommand {
            channel,
            frequency_hz: 20.0,
            duration_ms: 400.0,
            amplitude_v: 2.5,
            pulse_width_ms: Some(2.0),
            duty_pct: None,
            timestamp_s: t_s,
        }
    }

    fn tracked_frames(n: usize, untracked: usize) -> Vec<Frame> {
        (0..n)
            .map(|i| Frame {
                t_s: i as f64 * 0.01,
                pose: Pose2D::new(0.0, 0.0, 0.0),
                tracked: i >= untracked,
            })
            .collect()
    }

    #[test]
    fn unilateral_runs_of_fifteen_are_excluded() {
        let stimuli: Vec<_> = (0..15)
            .map(|i| cmd_at(Channel::LeftAntenna, i as f64))
            .collect();
        let rec = flag_exclusions(synthetic_record(stimuli, tracked_frames(100, 0)));
        assert_eq!(rec.excluded, Some(ExclusionReason::UnilateralRuns));
    }

    #[test]
    fn elytra_bursts_break_unilateral_runs() {
        let mut stimuli = Vec::new();
        for i in 0..14 {
            stimuli.push(cmd_at(Channel::RightAntenna, i as f64));
        }
        stimuli.push(cmd_at(Channel::ElytraBoth, 14.0));
        for i in 15..29 {
            stimuli.push(cmd_at(Channel::RightAntenna, i as f64));
        }
        let rec = flag_exclusions(synthetic_record(stimuli, tracked_frames(100, 0)));
        assert_eq!(rec.excluded, None);
    }

    #[test]
    fn side_changes_break_unilateral_runs() {
        let mut stimuli = Vec::new();
        for i in 0..14 {
            stimuli.push(cmd_at(Channel::RightAntenna, i as f64));
        }
        stimuli.push(cmd_at(Channel::LeftAntenna, 14.0));
        for i in 15..29 {
            stimuli.push(cmd_at(Channel::RightAntenna, i as f64));
        }
        let rec = flag_exclusions(synthetic_record(stimuli, tracked_frames(100, 0)));
        assert_eq!(rec.excluded, None);
    }

    #[test]
    fn heavy_miss_tracking_is_excluded() {
        // 21 of 100 frames untracked: strictly over the 20% bar.
        let rec = flag_exclusions(synthetic_record(vec![], tracked_frames(100, 21)));
        assert_eq!(rec.excluded, Some(ExclusionReason::MissTracking));
        // Exactly 20% is not "more than 20%".
        let rec = flag_exclusions(synthetic_record(vec![], tracked_frames(100, 20)));
        assert_eq!(rec.excluded, None);
    }

    #[test]
    fn unilateral_exclusion_takes_precedence() {
        let stimuli: Vec<_> = (0..20)
            .map(|i| cmd_at(Channel::LeftAntenna, i as f64))
            .collect();
        let rec = flag_exclusions(synthetic_record(stimuli, tracked_frames(100, 30)));
        assert_eq!(rec.excluded, Some(ExclusionReason::UnilateralRuns));
    }

    #[test]
    fn flag_exclusions_is_idempotent() {
        let stimuli: Vec<_> = (0..16)
            .map(|i| cmd_at(Channel::RightAntenna, i as f64))
            .collect();
        let once = flag_exclusions(synthetic_record(stimuli, tracked_frames(100, 0)));
        let twice = flag_exclusions(once.clone());
        assert_eq!(once, twice);
    }

    #[test]
    fn sessions_alternate_direction() {
        let mut cfg = TrialConfig::default();
        cfg.seed = 41;
        cfg.timeout_s = 5.0; // keep it quick; outcomes don't matter here
        let records = run_session(&cfg, 4).unwrap();
        let dirs: Vec<_> = records.iter().map(|r| r.tag.direction).collect();
        assert_eq!(
            dirs,
            vec![
                Direction::Forward,
                Direction::Reversed,
                Direction::Forward,
                Direction::Reversed
            ]
        );
        let trials: Vec<_> = records.iter().map(|r| r.tag.trial_index).collect();
        assert_eq!(trials, vec![0, 1, 2, 3]);
    }

    #[test]
    fn habituation_persists_across_a_session() {
        // Quiet plant, aggressive attenuation: the same stimulus frequency
        // must evoke a visibly weaker turn late in the session.
        let mut cfg = TrialConfig::default();
        cfg.seed = 43;
        cfg.beetle.noise_scale = 0.0;
        cfg.beetle.free_heading_noise_deg = 0.0;
        cfg.beetle.attenuation_rate = 0.005;
        cfg.beetle.attenuation_floor = 0.4;
        cfg.timeout_s = 60.0;
        let records = run_session(&cfg, 6).unwrap();
        let gain_of = |rec: &TrialRecord, cmd_idx: usize| -> Option<f64> {
            let cmd = rec.stimuli.iter().filter(|s| s.channel != Channel::ElytraBoth).nth(cmd_idx)?;
            let side = cmd.channel.antenna_side().unwrap();
            let k = (cmd.timestamp_s / cfg.frame_dt_s).round() as usize;
            let k_end = k + (cmd.duration_ms / 1000.0 / cfg.frame_dt_s).round() as usize;
            if k_end >= rec.frames.len() {
                return None;
            }
            let measured = crate::geometry::normalize_deg(
                rec.frames[k_end].pose.heading_deg - rec.frames[k].pose.heading_deg,
            );
            let expected = cfg
                .beetle
                .turn_table
                .interpolate(cmd.frequency_hz, side)
                .mean_deg;
            Some(measured / expected)
        };
        let early = records
            .iter()
            .take(2)
            .find_map(|r| gain_of(r, 0))
            .expect("an early antenna stimulus");
        let late = records
            .iter()
            .rev()
            .take(2)
            .find_map(|r| gain_of(r, 0))
            .expect("a late antenna stimulus");
        assert!(
            late < early - 0.05,
            "habituation should weaken turns: early {early}, late {late}"
        );
    }

    #[test]
    fn minimal_sweep_yields_the_expected_record_count() {
        let sweep = SweepConfig {
            n_beetles: 1,
            kp_values: vec![0.5],
            t_update_values: vec![1.0],
            trials_per_session: 12,
            base: TrialConfig {
                timeout_s: 10.0,
                ..TrialConfig::default()
            },
        };
        let records = run_sweep(&sweep).unwrap();
        assert_eq!(records.len(), 12);
        assert!(records.iter().all(|r| r.tag.kp == 0.5));
    }

    #[test]
    fn sweep_is_deterministic_and_covers_the_grid() {
        let sweep = SweepConfig {
            n_beetles: 2,
            kp_values: vec![0.25, 0.75],
            t_update_values: vec![1.0, 2.0],
            trials_per_session: 2,
            base: TrialConfig {
                seed: 99,
                timeout_s: 8.0,
                ..TrialConfig::default()
            },
        };
        let a = run_sweep(&sweep).unwrap();
        let b = run_sweep(&sweep).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 2 * 4 * 2);
        // Every combo appears once per animal.
        for beetle in 0..2u32 {
            let mut combos: Vec<(u64, u64)> = a
                .iter()
                .filter(|r| r.tag.beetle_index == beetle && r.tag.trial_index == 0)
                .map(|r| (r.tag.t_update_s.to_bits(), r.tag.kp.to_bits()))
                .collect();
            combos.sort();
            combos.dedup();
            assert_eq!(combos.len(), 4);
        }
    }

    #[test]
    fn sweep_visiting_order_varies_by_animal() {
        // With 9 combos and several animals, at least two animals should
        // visit the grid in different orders (probability of failure under
        // a correct shuffle is negligible for this seed).
        let sweep = SweepConfig {
            n_beetles: 4,
            trials_per_session: 1,
            base: TrialConfig {
                seed: 7,
                timeout_s: 2.0,
                ..TrialConfig::default()
            },
            ..SweepConfig::default()
        };
        let records = run_sweep(&sweep).unwrap();
        let order_of = |beetle: u32| -> Vec<(u64, u64)> {
            records
                .iter()
                .filter(|r| r.tag.beetle_index == beetle)
                .map(|r| (r.tag.t_update_s.to_bits(), r.tag.kp.to_bits()))
                .collect()
        };
        let orders: Vec<_> = (0..4).map(order_of).collect();
        assert!(
            orders.windows(2).any(|w| w[0] != w[1]),
            "grid visiting order should differ between animals"
        );
    }

    #[test]
    fn invalid_configs_are_rejected_before_running() {
        let mut cfg = TrialConfig::default();
        cfg.timeout_s = 0.0;
        assert!(run_trial(&cfg).is_err());
        let mut cfg = TrialConfig::default();
        cfg.frame_dt_s = 0.05;
        assert!(run_trial(&cfg).is_err());
        let mut cfg = TrialConfig::default();
        cfg.dropout_rate = 1.0;
        assert!(run_trial(&cfg).is_err());
        let mut cfg = TrialConfig::default();
        cfg.controller.t_update_s = 0.001;
        assert!(run_trial(&cfg).is_err());
    }

    #[test]
    fn derive_seed_is_stable_and_spreads() {
        let a = derive_seed(1, &[2, 3]);
        let b = derive_seed(1, &[2, 3]);
        assert_eq!(a, b);
        assert_ne!(derive_seed(1, &[2, 3]), derive_seed(1, &[3, 2]));
        assert_ne!(derive_seed(1, &[2]), derive_seed(2, &[2]));
    }
}
