//! Post-hoc analysis of recorded trials.
//!
//! Everything in this module consumes [`TrialRecord`]s produced by the trial
//! runner (or reconstructed from logs/marker ingest) and is deliberately
//! decoupled from the simulation: the same pipeline applies to synthetic and
//! to externally tracked data.
//!
//! Conventions shared by all metrics:
//!
//! * positions are smoothed with a 100 ms centered moving average before any
//!   geometric measurement; headings are never filtered,
//! * excluded trials are dropped before aggregation,
//! * success-only metrics (tracking error, navigation time, control effort)
//!   return an error for unsuccessful trials rather than a sentinel value.

use crate::controller::{AntennaSide, Channel};
use crate::geometry::{area_between, normalize_deg, project_onto_path, PathSpec, Point};
use crate::plant::{turn_bin_index, TURN_BIN_CENTERS};
use crate::trial::{TerminationReason, TrialRecord};
use rayon::prelude::*;
use thiserror::Error;

/// Window of the position moving-average filter, seconds.
pub const FILTER_WINDOW_S: f64 = 0.1;
/// Sampling interval of the distance/speed time series, seconds.
pub const SERIES_TICK_S: f64 = 0.5;
/// Window for instantaneous-speed estimation, seconds.
pub const SPEED_WINDOW_S: f64 = 0.1;
/// Outlier cut applied to reconstructed turn angles, in standard deviations.
pub const OUTLIER_SIGMA: f64 = 2.7;
/// Bin width of commanded-frequency histograms, Hz.
pub const HISTOGRAM_BIN_HZ: f64 = 2.0;

/// Errors produced by the metrics pipeline.
#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("metric undefined: {0}")]
    Undefined(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Geometry(#[from] crate::geometry::GeometryError),
}

/// Sample mean and standard deviation (n−1 denominator; `sd = 0` for a
/// single sample).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

/// Mean ± sd of a sample, `None` when empty.
pub fn mean_sd(values: &[f64]) -> Option<MeanSd> {
    if values.is_empty() {
        return None;
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = if n < 2 {
        0.0
    } else {
        let ss = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>();
        (ss / (n - 1) as f64).sqrt()
    };
    Some(MeanSd { mean, sd, n })
}

/// Centered moving average over timed samples.
///
/// For each sample the filter averages every sample within `window_s / 2`
/// of its timestamp (inclusive), so the window truncates at the ends of the
/// series instead of padding. The direct windowed recomputation is O(n·w)
/// but exact: no running-sum drift, identical results regardless of series
/// length or traversal order.
pub fn moving_average(series: &[(f64, f64)], window_s: f64) -> Vec<(f64, f64)> {
    let half = window_s / 2.0 + 1e-9;
    let mut out = Vec::with_capacity(series.len());
    for (i, &(t, _)) in series.iter().enumerate() {
        let mut lo = i;
        while lo > 0 && t - series[lo - 1].0 <= half {
            lo -= 1;
        }
        let mut hi = i;
        while hi + 1 < series.len() && series[hi + 1].0 - t <= half {
            hi += 1;
        }
        let sum: f64 = series[lo..=hi].iter().map(|&(_, v)| v).sum();
        out.push((t, sum / (hi - lo + 1) as f64));
    }
    out
}

/// Positions of a trial after the standard smoothing filter, one point per
/// frame. Headings are left untouched by design and are not part of the
/// output.
pub fn filtered_trajectory(record: &TrialRecord) -> Vec<Point> {
    let xs: Vec<(f64, f64)> = record
        .frames
        .iter()
        .map(|f| (f.t_s, f.pose.x))
        .collect();
    let ys: Vec<(f64, f64)> = record
        .frames
        .iter()
        .map(|f| (f.t_s, f.pose.y))
        .collect();
    let fx = moving_average(&xs, FILTER_WINDOW_S);
    let fy = moving_average(&ys, FILTER_WINDOW_S);
    fx.into_iter()
        .zip(fy)
        .map(|((_, x), (_, y))| Point { x, y })
        .collect()
}

fn require_success(record: &TrialRecord, metric: &str) -> Result<(), MetricsError> {
    if record.outcome != TerminationReason::Success {
        return Err(MetricsError::Undefined(format!(
            "{metric} is only defined for successful trials (outcome: {:?})",
            record.outcome
        )));
    }
    Ok(())
}

/// Mean lateral deviation of a successful trial: area enclosed between the
/// filtered trajectory and the reference path, divided by the path's arc
/// length. Millimetres.
pub fn tracking_error(record: &TrialRecord, path: &PathSpec) -> Result<f64, MetricsError> {
    require_success(record, "tracking error")?;
    let filtered = filtered_trajectory(record);
    let area = area_between(&filtered, path)?;
    Ok(area / path.arc_length_mm())
}

/// Time from trial start to arrival, seconds. Successful trials only.
pub fn navigation_time(record: &TrialRecord) -> Result<f64, MetricsError> {
    require_success(record, "navigation time")?;
    record
        .frames
        .last()
        .map(|f| f.t_s)
        .ok_or_else(|| MetricsError::InvalidInput("record has no frames".into()))
}

/// Number of stimulation commands issued during a successful trial.
pub fn control_effort(record: &TrialRecord) -> Result<usize, MetricsError> {
    require_success(record, "control effort")?;
    Ok(record.stimuli.len())
}

/// Index of the frame whose timestamp is closest to `t`.
fn nearest_index(ts: &[f64], t: f64) -> usize {
    let idx = ts.partition_point(|&x| x < t);
    if idx == 0 {
        return 0;
    }
    if idx >= ts.len() {
        return ts.len() - 1;
    }
    if (ts[idx] - t).abs() < (t - ts[idx - 1]).abs() {
        idx
    } else {
        idx - 1
    }
}

fn frame_times(record: &TrialRecord) -> Vec<f64> {
    record.frames.iter().map(|f| f.t_s).collect()
}

fn series_ticks(last_t: f64) -> Vec<f64> {
    let mut ticks = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * SERIES_TICK_S;
        if t > last_t + 1e-9 {
            break;
        }
        ticks.push(t);
        k += 1;
    }
    ticks
}

/// Distance from the (filtered) position to the reference path, sampled
/// every 500 ms. Empty when the record covers less than one second.
pub fn distance_to_path_series(record: &TrialRecord, path: &PathSpec) -> Vec<(f64, f64)> {
    let ts = frame_times(record);
    if ts.is_empty() || *ts.last().unwrap() < 1.0 - 1e-9 {
        return Vec::new();
    }
    let filtered = filtered_trajectory(record);
    series_ticks(*ts.last().unwrap())
        .into_iter()
        .map(|t| {
            let i = nearest_index(&ts, t);
            let proj = project_onto_path(path, filtered[i]);
            (t, proj.distance_mm)
        })
        .collect()
}

/// Ground speed sampled every 500 ms: net displacement of the filtered
/// position across a 100 ms centered window (truncated at the record's
/// ends), divided by the window's actual time span. Empty when the record
/// covers less than one second.
pub fn instantaneous_speed_series(record: &TrialRecord) -> Vec<(f64, f64)> {
    let ts = frame_times(record);
    if ts.is_empty() || *ts.last().unwrap() < 1.0 - 1e-9 {
        return Vec::new();
    }
    let filtered = filtered_trajectory(record);
    series_ticks(*ts.last().unwrap())
        .into_iter()
        .filter_map(|t| {
            let lo = nearest_index(&ts, t - SPEED_WINDOW_S / 2.0);
            let hi = nearest_index(&ts, t + SPEED_WINDOW_S / 2.0);
            let span = ts[hi] - ts[lo];
            if span <= 0.0 {
                return None;
            }
            let v = filtered[lo].distance_to(filtered[hi]) / span;
            Some((t, v))
        })
        .collect()
}

/// Mean ± sd of one reconstructed response bin, after outlier rejection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinReconstruction {
    /// Samples measured for the bin before outlier rejection.
    pub n_raw: usize,
    /// Samples surviving the ±2.7 σ cut.
    pub n_used: usize,
    pub mean_deg: f64,
    pub sd_deg: f64,
}

/// Turn response recovered from closed-loop recordings, one slot per
/// frequency bin (13, 20.5, 28.5, 36.5 Hz). Empty bins stay `None`.
#[derive(Debug, Clone, Default)]
pub struct TurnReconstruction {
    pub left_antenna: [Option<BinReconstruction>; 4],
    pub right_antenna: [Option<BinReconstruction>; 4],
}

impl TurnReconstruction {
    /// Bin centers in Hz, matching the array slots.
    pub fn bin_centers_hz() -> [f64; 4] {
        TURN_BIN_CENTERS
    }
}

/// One pass of mean/sd, drop samples beyond ±2.7 σ, then recompute.
fn reject_outliers(samples: &[f64]) -> Option<BinReconstruction> {
    let first = mean_sd(samples)?;
    let kept: Vec<f64> = if first.sd == 0.0 {
        samples.to_vec()
    } else {
        samples
            .iter()
            .copied()
            .filter(|v| (v - first.mean).abs() <= OUTLIER_SIGMA * first.sd)
            .collect()
    };
    let stats = mean_sd(&kept)?;
    Some(BinReconstruction {
        n_raw: samples.len(),
        n_used: stats.n,
        mean_deg: stats.mean,
        sd_deg: stats.sd,
    })
}

/// Measure the heading change produced by a single stimulus: heading at
/// 500 ms after onset minus heading at onset (counterclockwise positive).
/// `None` when the record ends before the measurement window does.
fn induced_angle_deg(record: &TrialRecord, ts: &[f64], onset_s: f64) -> Option<f64> {
    let end = onset_s + 0.5;
    if end > *ts.last()? + 1e-9 {
        return None;
    }
    let h0 = record.frames[nearest_index(ts, onset_s)].pose.heading_deg;
    let h1 = record.frames[nearest_index(ts, end)].pose.heading_deg;
    Some(normalize_deg(h1 - h0))
}

/// Reconstruct the per-frequency turn response from closed-loop records.
///
/// Every antenna stimulus in a non-excluded trial contributes the heading
/// change over the 500 ms after its onset, grouped by stimulated side and
/// commanded-frequency bin. Each (side, bin) cell is summarized after a
/// single ±2.7 σ outlier pass; bins that received no stimuli are absent
/// rather than zero.
pub fn reconstruct_turn_response(records: &[TrialRecord]) -> TurnReconstruction {
    let mut samples: [[Vec<f64>; 4]; 2] = Default::default();
    for record in records.iter().filter(|r| r.excluded.is_none()) {
        let ts = frame_times(record);
        if ts.is_empty() {
            continue;
        }
        for stim in &record.stimuli {
            let side = match stim.channel.antenna_side() {
                Some(AntennaSide::Left) => 0,
                Some(AntennaSide::Right) => 1,
                None => continue,
            };
            let bin = turn_bin_index(stim.frequency_hz);
            if let Some(angle) = induced_angle_deg(record, &ts, stim.timestamp_s) {
                samples[side][bin].push(angle);
            }
        }
    }
    let mut out = TurnReconstruction::default();
    for bin in 0..4 {
        out.left_antenna[bin] = reject_outliers(&samples[0][bin]);
        out.right_antenna[bin] = reject_outliers(&samples[1][bin]);
    }
    out
}

/// Within-session drift diagnostics: early vs late trials and the
/// forward-speed boost of successive elytra stimuli.
#[derive(Debug, Clone)]
pub struct AttenuationReport {
    /// Success rate over each session's first four trials, percent.
    pub first4_success_pct: f64,
    /// Success rate over each session's last four trials, percent.
    pub last4_success_pct: f64,
    /// Mean |heading change| induced by antenna stimuli in the first four
    /// trials, degrees. `None` when no measurable stimulus exists.
    pub first4_mean_abs_turn_deg: Option<f64>,
    /// Same for the last four trials.
    pub last4_mean_abs_turn_deg: Option<f64>,
    /// Forward-speed boost per consecutive group of twenty elytra stimuli
    /// (session-local ordering; the final group may be partial). The boost
    /// of one stimulus is estimated as the displacement speed 100–200 ms
    /// after onset minus the displacement speed in the 100 ms before onset.
    pub thrust_boost_groups: Vec<MeanSd>,
}

/// Estimate the forward-speed boost of one elytra stimulus from raw frames.
fn thrust_boost_sample(record: &TrialRecord, ts: &[f64], onset_s: f64) -> Option<f64> {
    let window_speed = |a: f64, b: f64| -> Option<f64> {
        let lo = nearest_index(ts, a);
        let hi = nearest_index(ts, b);
        let span = ts[hi] - ts[lo];
        if span <= 0.0 {
            return None;
        }
        let pa = record.frames[lo].pose;
        let pb = record.frames[hi].pose;
        Some(((pb.x - pa.x).powi(2) + (pb.y - pa.y).powi(2)).sqrt() / span)
    };
    if onset_s + 0.2 > *ts.last()? + 1e-9 {
        return None;
    }
    let during = window_speed(onset_s + 0.1, onset_s + 0.2)?;
    let before = window_speed((onset_s - 0.1).max(0.0), onset_s)?;
    Some(during - before)
}

/// Build the attenuation diagnostics for a set of sessions (each a list of
/// trial records in running order). Sessions shorter than eight trials
/// cannot be split into distinct early/late quartets and are rejected.
pub fn attenuation_report(
    sessions: &[Vec<TrialRecord>],
) -> Result<AttenuationReport, MetricsError> {
    if sessions.is_empty() {
        return Err(MetricsError::InvalidInput("no sessions given".into()));
    }
    for (i, s) in sessions.iter().enumerate() {
        if s.len() < 8 {
            return Err(MetricsError::InvalidInput(format!(
                "session {i} has {} trials; need at least 8",
                s.len()
            )));
        }
    }
    let mut first_success = 0usize;
    let mut last_success = 0usize;
    let mut first_angles = Vec::new();
    let mut last_angles = Vec::new();
    let mut boost_groups: Vec<Vec<f64>> = Vec::new();
    for session in sessions {
        let n = session.len();
        let quartets = [(0..4, true), (n - 4..n, false)];
        for (range, early) in quartets {
            for record in &session[range] {
                if record.outcome == TerminationReason::Success {
                    if early {
                        first_success += 1;
                    } else {
                        last_success += 1;
                    }
                }
                let ts = frame_times(record);
                if ts.is_empty() {
                    continue;
                }
                for stim in &record.stimuli {
                    if stim.channel.antenna_side().is_none() {
                        continue;
                    }
                    if let Some(angle) = induced_angle_deg(record, &ts, stim.timestamp_s) {
                        if early {
                            first_angles.push(angle.abs());
                        } else {
                            last_angles.push(angle.abs());
                        }
                    }
                }
            }
        }
        // Elytra stimuli numbered consecutively across the whole session.
        let mut elytra_seen = 0usize;
        for record in session {
            let ts = frame_times(record);
            if ts.is_empty() {
                continue;
            }
            for stim in &record.stimuli {
                if stim.channel != Channel::ElytraBoth {
                    continue;
                }
                let group = elytra_seen / 20;
                elytra_seen += 1;
                if let Some(boost) = thrust_boost_sample(record, &ts, stim.timestamp_s) {
                    if boost_groups.len() <= group {
                        boost_groups.resize(group + 1, Vec::new());
                    }
                    boost_groups[group].push(boost);
                }
            }
        }
    }
    let denom = (4 * sessions.len()) as f64;
    Ok(AttenuationReport {
        first4_success_pct: 100.0 * first_success as f64 / denom,
        last4_success_pct: 100.0 * last_success as f64 / denom,
        first4_mean_abs_turn_deg: mean_sd(&first_angles).map(|m| m.mean),
        last4_mean_abs_turn_deg: mean_sd(&last_angles).map(|m| m.mean),
        thrust_boost_groups: boost_groups
            .iter()
            .filter_map(|g| mean_sd(g))
            .collect(),
    })
}

/// Aggregated metrics for one (t_update, Kp) cell of a sweep.
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub t_update_s: f64,
    pub kp: f64,
    /// All trials recorded for the cell.
    pub n_trials: usize,
    /// Trials dropped by the exclusion rules.
    pub n_excluded: usize,
    /// Successful trials among the non-excluded ones.
    pub n_success: usize,
    /// Successes as a percentage of non-excluded trials; `None` when every
    /// trial was excluded.
    pub success_rate_pct: Option<f64>,
    pub tracking_error_mm: Option<MeanSd>,
    pub nav_time_s: Option<MeanSd>,
    pub effort: Option<MeanSd>,
    pub dist_mm: Option<MeanSd>,
    pub speed_mms: Option<MeanSd>,
}

/// Histogram of commanded antenna frequencies for one Kp (pooled over
/// update intervals), 2-Hz bins over 10–40 Hz.
#[derive(Debug, Clone)]
pub struct FrequencyHistogram {
    pub kp: f64,
    /// Bin edges, `counts.len() + 1` entries.
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub median_hz: Option<f64>,
    /// Total number of antenna commands counted.
    pub n: usize,
}

/// Full summary of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepSummary {
    /// One row per (t_update, Kp) cell, ordered by t_update then Kp.
    pub rows: Vec<MetricsRow>,
    /// One histogram per Kp value, ascending.
    pub histograms: Vec<FrequencyHistogram>,
}

fn median(sorted: &[f64]) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let n = sorted.len();
    Some(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

struct PerTrial {
    key: (u64, u64),
    kp: f64,
    t_update_s: f64,
    excluded: bool,
    success: bool,
    tracking_error_mm: Option<f64>,
    nav_time_s: Option<f64>,
    effort: Option<f64>,
    dist_samples: Vec<f64>,
    speed_samples: Vec<f64>,
    antenna_freqs: Vec<f64>,
}

fn per_trial(record: &TrialRecord, path: &PathSpec, series_success_only: bool) -> PerTrial {
    let tag = &record.tag;
    let key = (tag.t_update_s.to_bits(), tag.kp.to_bits());
    let excluded = record.excluded.is_some();
    let success = record.outcome == TerminationReason::Success;
    let mut out = PerTrial {
        key,
        kp: tag.kp,
        t_update_s: tag.t_update_s,
        excluded,
        success,
        tracking_error_mm: None,
        nav_time_s: None,
        effort: None,
        dist_samples: Vec::new(),
        speed_samples: Vec::new(),
        antenna_freqs: Vec::new(),
    };
    if excluded {
        return out;
    }
    out.antenna_freqs = record
        .stimuli
        .iter()
        .filter(|s| s.channel.antenna_side().is_some())
        .map(|s| s.frequency_hz)
        .collect();
    if success {
        out.tracking_error_mm = tracking_error(record, path).ok();
        out.nav_time_s = navigation_time(record).ok();
        out.effort = control_effort(record).ok().map(|e| e as f64);
    }
    if success || !series_success_only {
        out.dist_samples = distance_to_path_series(record, path)
            .into_iter()
            .map(|(_, d)| d)
            .collect();
        out.speed_samples = instantaneous_speed_series(record)
            .into_iter()
            .map(|(_, v)| v)
            .collect();
    }
    out
}

/// Summarize a sweep's records into per-cell metric rows and per-Kp
/// frequency histograms.
///
/// With `series_success_only` the pooled distance/speed samples come from
/// successful trials only; otherwise every non-excluded trial contributes.
/// Rows are keyed by the (t_update, Kp) tags carried in the records and
/// ordered ascending, so the output is independent of record order.
pub fn summarize_sweep(
    records: &[TrialRecord],
    path: &PathSpec,
    series_success_only: bool,
) -> SweepSummary {
    let per: Vec<PerTrial> = records
        .par_iter()
        .map(|r| per_trial(r, path, series_success_only))
        .collect();

    use std::collections::BTreeMap;
    let mut cells: BTreeMap<(u64, u64), Vec<&PerTrial>> = BTreeMap::new();
    let mut freqs_by_kp: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for p in &per {
        cells.entry(p.key).or_default().push(p);
        freqs_by_kp
            .entry(p.key.1)
            .or_default()
            .extend_from_slice(&p.antenna_freqs);
    }

    let rows = cells
        .values()
        .map(|trials| {
            let n_trials = trials.len();
            let n_excluded = trials.iter().filter(|t| t.excluded).count();
            let included = n_trials - n_excluded;
            let n_success = trials.iter().filter(|t| t.success && !t.excluded).count();
            let collect = |f: fn(&PerTrial) -> Option<f64>| -> Vec<f64> {
                trials.iter().filter_map(|t| f(t)).collect()
            };
            let pooled = |f: fn(&PerTrial) -> &Vec<f64>| -> Vec<f64> {
                trials.iter().flat_map(|t| f(t).iter().copied()).collect()
            };
            MetricsRow {
                t_update_s: trials[0].t_update_s,
                kp: trials[0].kp,
                n_trials,
                n_excluded,
                n_success,
                success_rate_pct: (included > 0)
                    .then(|| 100.0 * n_success as f64 / included as f64),
                tracking_error_mm: mean_sd(&collect(|t| t.tracking_error_mm)),
                nav_time_s: mean_sd(&collect(|t| t.nav_time_s)),
                effort: mean_sd(&collect(|t| t.effort)),
                dist_mm: mean_sd(&pooled(|t| &t.dist_samples)),
                speed_mms: mean_sd(&pooled(|t| &t.speed_samples)),
            }
        })
        .collect();

    let histograms = freqs_by_kp
        .into_iter()
        .map(|(kp_bits, mut freqs)| {
            let n_bins = 15usize;
            let lo = 10.0_f64;
            let edges: Vec<f64> = (0..=n_bins)
                .map(|i| lo + i as f64 * HISTOGRAM_BIN_HZ)
                .collect();
            let mut counts = vec![0u64; n_bins];
            for &f in &freqs {
                let bin = (((f - lo) / HISTOGRAM_BIN_HZ) as usize).min(n_bins - 1);
                counts[bin] += 1;
            }
            freqs.sort_by(|a, b| a.partial_cmp(b).unwrap());
            FrequencyHistogram {
                kp: f64::from_bits(kp_bits),
                edges,
                median_hz: median(&freqs),
                n: freqs.len(),
                counts,
            }
        })
        .collect();

    SweepSummary { rows, histograms }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controller::StimulusCommand;
    use crate::geometry::Pose2D;
    use crate::trial::{Direction, ExclusionReason, Frame, TrialTag};
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tag() -> TrialTag {
        TrialTag {
            kp: 0.5,
            t_update_s: 1.0,
            seed: 1,
            beetle_index: 0,
            trial_index: 0,
            direction: Direction::Forward,
        }
    }

    fn record(
        frames: Vec<Frame>,
        stimuli: Vec<StimulusCommand>,
        outcome: TerminationReason,
    ) -> TrialRecord {
        TrialRecord {
            frames,
            stimuli,
            outcome,
            excluded: None,
            tag: tag(),
        }
    }

    fn antenna(channel: Channel, frequency_hz: f64, t: f64) -> StimulusCommand {
        StimulusCommand {
            channel,
            frequency_hz,
            duration_ms: 400.0,
            amplitude_v: 2.5,
            pulse_width_ms: Some(2.0),
            duty_pct: None,
            timestamp_s: t,
        }
    }

    fn elytra(t: f64) -> StimulusCommand {
        StimulusCommand {
            channel: Channel::ElytraBoth,
            frequency_hz: 20.0,
            duration_ms: 200.0,
            amplitude_v: 2.5,
            pulse_width_ms: None,
            duty_pct: Some(50.0),
            timestamp_s: t,
        }
    }

    fn frames_from(f: impl Fn(f64) -> Pose2D, duration_s: f64) -> Vec<Frame> {
        let n = (duration_s / 0.01).round() as usize;
        (0..=n)
            .map(|k| {
                let t = k as f64 * 0.01;
                Frame {
                    t_s: t,
                    pose: f(t),
                    tracked: true,
                }
            })
            .collect()
    }

    #[test]
    fn moving_average_matches_brute_force_bitwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let series: Vec<(f64, f64)> = (0..300)
            .map(|k| (k as f64 * 0.01, rng.random::<f64>() * 10.0 - 5.0))
            .collect();
        let fast = moving_average(&series, FILTER_WINDOW_S);
        let half = FILTER_WINDOW_S / 2.0 + 1e-9;
        for (i, &(t, _)) in series.iter().enumerate() {
            let window: Vec<f64> = series
                .iter()
                .filter(|&&(tj, _)| (tj - t).abs() <= half)
                .map(|&(_, v)| v)
                .collect();
            let expect = window.iter().sum::<f64>() / window.len() as f64;
            assert_eq!(fast[i].1, expect, "sample {i} diverged from brute force");
        }
    }

    #[test]
    fn moving_average_of_impulse_spreads_over_eleven_frames() {
        let mut series: Vec<(f64, f64)> = (0..101).map(|k| (k as f64 * 0.01, 0.0)).collect();
        series[50].1 = 1.0;
        let out = moving_average(&series, FILTER_WINDOW_S);
        let nonzero: Vec<usize> = out
            .iter()
            .enumerate()
            .filter(|(_, &(_, v))| v != 0.0)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(nonzero, (45..=55).collect::<Vec<_>>());
        for i in nonzero {
            assert_abs_diff_eq!(out[i].1, 1.0 / 11.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn moving_average_truncates_at_edges() {
        let series: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.01, 1.0)).collect();
        for (_, v) in moving_average(&series, FILTER_WINDOW_S) {
            assert_eq!(v, 1.0);
        }
        let ramp: Vec<(f64, f64)> = (0..50).map(|k| (k as f64 * 0.01, k as f64)).collect();
        let out = moving_average(&ramp, FILTER_WINDOW_S);
        // First window holds samples 0..=5 only.
        assert_abs_diff_eq!(out[0].1, (0.0 + 1.0 + 2.0 + 3.0 + 4.0 + 5.0) / 6.0);
        assert!(moving_average(&[], FILTER_WINDOW_S).is_empty());
    }

    #[test]
    fn on_path_success_has_near_zero_tracking_error() {
        let path = PathSpec::default();
        let speed = 20.0;
        let length = path.arc_length_mm();
        // Walk the lane by arc length at constant speed.
        let frames = frames_from(
            |t| {
                let s = (speed * t).min(length);
                let x = path.x_start_mm + (path.x_end_mm - path.x_start_mm) * s / length;
                let p = path.point_at(x);
                Pose2D {
                    x: p.x,
                    y: p.y,
                    heading_deg: path.tangent_deg(x),
                }
            },
            length / speed,
        );
        let rec = record(frames, Vec::new(), TerminationReason::Success);
        let err = tracking_error(&rec, &path).unwrap();
        assert!(err.abs() < 0.01, "on-path error should vanish, got {err}");
    }

    #[test]
    fn offset_trajectory_tracking_error_matches_offset_scale() {
        let path = PathSpec::default();
        let offset = 5.0;
        let length = path.arc_length_mm();
        let speed = 20.0;
        let frames = frames_from(
            |t| {
                let s = (speed * t).min(length);
                let x = path.x_start_mm + (path.x_end_mm - path.x_start_mm) * s / length;
                let p = path.point_at(x);
                Pose2D {
                    x: p.x,
                    y: p.y + offset,
                    heading_deg: 0.0,
                }
            },
            length / speed,
        );
        let rec = record(frames, Vec::new(), TerminationReason::Success);
        let err = tracking_error(&rec, &path).unwrap();
        // Vertical offset d encloses d·Δx of area.
        let expect = offset * (path.x_end_mm - path.x_start_mm) / length;
        assert_abs_diff_eq!(err, expect, epsilon = expect * 0.01);
    }

    #[test]
    fn success_only_metrics_reject_other_outcomes() {
        let path = PathSpec::default();
        let frames = frames_from(
            |t| Pose2D {
                x: t,
                y: 0.0,
                heading_deg: 0.0,
            },
            5.0,
        );
        let rec = record(frames, vec![elytra(0.0)], TerminationReason::Timeout);
        assert!(matches!(
            tracking_error(&rec, &path),
            Err(MetricsError::Undefined(_))
        ));
        assert!(matches!(
            navigation_time(&rec),
            Err(MetricsError::Undefined(_))
        ));
        assert!(matches!(
            control_effort(&rec),
            Err(MetricsError::Undefined(_))
        ));
    }

    #[test]
    fn navigation_time_and_effort_read_off_the_record() {
        let frames = frames_from(
            |t| Pose2D {
                x: t,
                y: 0.0,
                heading_deg: 0.0,
            },
            12.34,
        );
        let rec = record(
            frames,
            vec![elytra(0.0), elytra(1.0), antenna(Channel::LeftAntenna, 15.0, 2.0)],
            TerminationReason::Success,
        );
        assert_abs_diff_eq!(navigation_time(&rec).unwrap(), 12.34, epsilon = 1e-9);
        assert_eq!(control_effort(&rec).unwrap(), 3);
    }

    #[test]
    fn series_cadence_and_short_record_behavior() {
        let path = PathSpec::default();
        let frames = frames_from(
            |t| Pose2D {
                x: -425.0 + 10.0 * t,
                y: 0.0,
                heading_deg: 0.0,
            },
            10.0,
        );
        let rec = record(frames, Vec::new(), TerminationReason::Timeout);
        let dist = distance_to_path_series(&rec, &path);
        assert_eq!(dist.len(), 21);
        for (k, &(t, _)) in dist.iter().enumerate() {
            assert_abs_diff_eq!(t, k as f64 * 0.5, epsilon = 1e-9);
        }
        let speed = instantaneous_speed_series(&rec);
        assert_eq!(speed.len(), 21);

        let short = record(
            frames_from(
                |t| Pose2D {
                    x: t,
                    y: 0.0,
                    heading_deg: 0.0,
                },
                0.8,
            ),
            Vec::new(),
            TerminationReason::Timeout,
        );
        assert!(distance_to_path_series(&short, &path).is_empty());
        assert!(instantaneous_speed_series(&short).is_empty());
    }

    #[test]
    fn speed_series_recovers_constant_speed() {
        let speed = 25.0;
        let frames = frames_from(
            |t| Pose2D {
                x: speed * t,
                y: 0.0,
                heading_deg: 0.0,
            },
            8.0,
        );
        let rec = record(frames, Vec::new(), TerminationReason::Timeout);
        let series = instantaneous_speed_series(&rec);
        assert_eq!(series.len(), 17);
        for (t, v) in series {
            if t >= 0.1 && t <= 8.0 - 0.1 {
                // Interior ticks see the exact linear motion.
                assert_abs_diff_eq!(v, speed, epsilon = 1e-9);
            } else {
                // The truncated position filter biases the two edge ticks
                // towards the record interior; they stay finite and positive.
                assert!(v > 0.0 && v <= speed + 1e-9, "edge tick speed {v}");
            }
        }
    }

    /// Record whose heading steps by `angle` right after each stimulus
    /// onset, so the induced angle is exactly the step.
    fn stepped_heading_record(stims: &[(Channel, f64, f64)]) -> TrialRecord {
        let duration = stims.iter().map(|s| s.2).fold(0.0, f64::max) + 1.0;
        let stims_owned: Vec<(Channel, f64, f64)> = stims.to_vec();
        let heading = move |t: f64| -> f64 {
            let mut h = 0.0;
            for &(ch, _, onset) in &stims_owned {
                if t > onset + 0.05 {
                    h += match ch {
                        Channel::RightAntenna => 15.0,
                        Channel::LeftAntenna => -10.0,
                        Channel::ElytraBoth => 0.0,
                    };
                }
            }
            h
        };
        let frames = frames_from(
            move |t| Pose2D {
                x: 0.0,
                y: 0.0,
                heading_deg: heading(t),
            },
            duration,
        );
        let stimuli = stims
            .iter()
            .map(|&(ch, f, t)| match ch {
                Channel::ElytraBoth => elytra(t),
                _ => antenna(ch, f, t),
            })
            .collect();
        record(frames, stimuli, TerminationReason::Timeout)
    }

    #[test]
    fn reconstruction_recovers_planted_step_angles() {
        let rec = stepped_heading_record(&[
            (Channel::RightAntenna, 13.0, 1.0),
            (Channel::RightAntenna, 14.5, 3.0),
            (Channel::LeftAntenna, 20.5, 5.0),
            (Channel::ElytraBoth, 20.0, 7.0),
        ]);
        let out = reconstruct_turn_response(&[rec]);
        let right0 = out.right_antenna[0].unwrap();
        assert_eq!(right0.n_raw, 2);
        assert_eq!(right0.n_used, 2);
        assert_abs_diff_eq!(right0.mean_deg, 15.0, epsilon = 1e-9);
        assert_abs_diff_eq!(right0.sd_deg, 0.0, epsilon = 1e-9);
        let left1 = out.left_antenna[1].unwrap();
        assert_eq!(left1.n_raw, 1);
        assert_abs_diff_eq!(left1.mean_deg, -10.0, epsilon = 1e-9);
        // Elytra stimuli never reach the turn bins; untouched bins are absent.
        assert!(out.right_antenna[1].is_none());
        assert!(out.right_antenna[3].is_none());
        assert!(out.left_antenna[0].is_none());
    }

    #[test]
    fn reconstruction_skips_excluded_trials_and_truncated_windows() {
        let mut excluded = stepped_heading_record(&[(Channel::RightAntenna, 13.0, 1.0)]);
        excluded.excluded = Some(ExclusionReason::MissTracking);
        let out = reconstruct_turn_response(&[excluded]);
        assert!(out.right_antenna[0].is_none());

        // Stimulus 200 ms before the record ends: no full 500 ms window.
        let mut rec = stepped_heading_record(&[(Channel::RightAntenna, 13.0, 1.0)]);
        let cutoff = 1.2;
        rec.frames.retain(|f| f.t_s <= cutoff);
        let out = reconstruct_turn_response(&[rec]);
        assert!(out.right_antenna[0].is_none());
    }

    #[test]
    fn outlier_pass_drops_extreme_sample() {
        let mut samples = vec![10.0; 20];
        samples.push(1000.0);
        let bin = reject_outliers(&samples).unwrap();
        assert_eq!(bin.n_raw, 21);
        assert_eq!(bin.n_used, 20);
        assert_abs_diff_eq!(bin.mean_deg, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(bin.sd_deg, 0.0, epsilon = 1e-12);

        // Without the extreme sample everything survives.
        let bin = reject_outliers(&samples[..20]).unwrap();
        assert_eq!(bin.n_used, 20);
        assert!(reject_outliers(&[]).is_none());
    }

    #[test]
    fn attenuation_report_contrasts_early_and_late_trials() {
        let success_rec = |angle: f64| {
            let mut r = stepped_heading_record(&[(Channel::RightAntenna, 13.0, 1.0)]);
            for f in &mut r.frames {
                if f.t_s > 1.05 {
                    f.pose.heading_deg = angle;
                }
            }
            r.outcome = TerminationReason::Success;
            r
        };
        let failure_rec = |angle: f64| {
            let mut r = success_rec(angle);
            r.outcome = TerminationReason::Timeout;
            r
        };
        // 12 trials: early quartet all succeed with 12° turns, late quartet
        // 1/4 succeed with 6° turns.
        let mut session = Vec::new();
        for _ in 0..4 {
            session.push(success_rec(12.0));
        }
        for _ in 0..4 {
            session.push(success_rec(9.0));
        }
        session.push(success_rec(6.0));
        for _ in 0..3 {
            session.push(failure_rec(6.0));
        }
        let report = attenuation_report(&[session.clone(), session]).unwrap();
        assert_abs_diff_eq!(report.first4_success_pct, 100.0);
        assert_abs_diff_eq!(report.last4_success_pct, 25.0);
        assert_abs_diff_eq!(report.first4_mean_abs_turn_deg.unwrap(), 12.0, epsilon = 1e-9);
        assert_abs_diff_eq!(report.last4_mean_abs_turn_deg.unwrap(), 6.0, epsilon = 1e-9);
    }

    #[test]
    fn attenuation_report_rejects_short_sessions() {
        let rec = stepped_heading_record(&[(Channel::RightAntenna, 13.0, 1.0)]);
        let short = vec![rec; 5];
        assert!(matches!(
            attenuation_report(&[short]),
            Err(MetricsError::InvalidInput(_))
        ));
        assert!(matches!(
            attenuation_report(&[]),
            Err(MetricsError::InvalidInput(_))
        ));
    }

    #[test]
    fn thrust_boost_groups_decline_under_attenuation() {
        use crate::controller::ControllerConfig;
        use crate::plant::BeetleParams;
        use crate::trial::{run_session, TrialConfig};
        // Deterministic beetle that only ever receives elytra stimuli
        // (threshold set above any reachable heading error) with noise off
        // and a fast attenuation schedule.
        let config = TrialConfig {
            controller: ControllerConfig {
                theta_threshold_deg: 179.0,
                ..ControllerConfig::default()
            },
            beetle: BeetleParams {
                noise_scale: 0.0,
                free_heading_noise_deg: 0.0,
                escape_run_gain: 0.0,
                attenuation_rate: 0.002,
                attenuation_floor: 0.2,
                ..BeetleParams::default()
            },
            heading_jitter_deg: 0.0,
            timeout_s: 120.0,
            seed: 99,
            ..TrialConfig::default()
        };
        let session = run_session(&config, 12).unwrap();
        let total_elytra: usize = session
            .iter()
            .flat_map(|r| &r.stimuli)
            .filter(|s| s.channel == Channel::ElytraBoth)
            .count();
        assert!(
            total_elytra >= 60,
            "expected at least three thrust groups, got {total_elytra} stimuli"
        );
        let report = attenuation_report(&[session]).unwrap();
        assert!(report.thrust_boost_groups.len() >= 3);
        for pair in report.thrust_boost_groups.windows(2) {
            assert!(
                pair[0].mean > pair[1].mean,
                "boost means should fall monotonically: {:?}",
                report.thrust_boost_groups
            );
        }
    }

    #[test]
    fn summarize_sweep_groups_and_counts_consistently() {
        use crate::controller::ControllerConfig;
        use crate::trial::{run_sweep, SweepConfig, TrialConfig};
        let sweep = SweepConfig {
            base: TrialConfig {
                seed: 5,
                timeout_s: 60.0,
                ..TrialConfig::default()
            },
            kp_values: vec![0.25, 0.5],
            t_update_values: vec![1.0, 2.0],
            n_beetles: 1,
            trials_per_session: 3,
        };
        let records = run_sweep(&sweep).unwrap();
        let path = PathSpec::default();
        let summary = summarize_sweep(&records, &path, true);
        assert_eq!(summary.rows.len(), 4);
        let combos: Vec<(f64, f64)> =
            summary.rows.iter().map(|r| (r.t_update_s, r.kp)).collect();
        assert_eq!(
            combos,
            vec![(1.0, 0.25), (1.0, 0.5), (2.0, 0.25), (2.0, 0.5)]
        );
        for row in &summary.rows {
            assert_eq!(row.n_trials, 3);
            assert!(row.n_success + row.n_excluded <= row.n_trials);
            if let Some(rate) = row.success_rate_pct {
                assert!((0.0..=100.0).contains(&rate));
            }
        }
        assert_eq!(summary.histograms.len(), 2);
        let antenna_total: usize = records
            .iter()
            .filter(|r| r.excluded.is_none())
            .flat_map(|r| &r.stimuli)
            .filter(|s| s.channel.antenna_side().is_some())
            .count();
        let hist_total: usize = summary.histograms.iter().map(|h| h.n).sum();
        assert_eq!(hist_total, antenna_total);
        for hist in &summary.histograms {
            assert_eq!(hist.counts.len(), 15);
            assert_eq!(hist.edges.len(), 16);
            assert_eq!(hist.counts.iter().sum::<u64>() as usize, hist.n);
            if let Some(m) = hist.median_hz {
                assert!((10.0..=40.0).contains(&m));
            }
        }
        assert_eq!(
            ControllerConfig::default().f_min_hz, 10.0,
            "histogram range is tied to the command clamp"
        );
    }

    #[test]
    fn summarize_sweep_separates_excluded_trials() {
        let path = PathSpec::default();
        let frames = frames_from(
            |t| Pose2D {
                x: t,
                y: 0.0,
                heading_deg: 0.0,
            },
            5.0,
        );
        let mut good = record(frames.clone(), vec![antenna(Channel::LeftAntenna, 15.0, 1.0)],
            TerminationReason::Success);
        good.frames.last_mut().unwrap();
        let mut bad = record(frames, vec![antenna(Channel::LeftAntenna, 15.0, 1.0)],
            TerminationReason::Success);
        bad.excluded = Some(ExclusionReason::MissTracking);
        let summary = summarize_sweep(&[good, bad], &path, true);
        assert_eq!(summary.rows.len(), 1);
        let row = &summary.rows[0];
        assert_eq!(row.n_trials, 2);
        assert_eq!(row.n_excluded, 1);
        assert_eq!(row.n_success, 1);
        assert_abs_diff_eq!(row.success_rate_pct.unwrap(), 100.0);
        // Excluded trial's stimuli stay out of the histograms.
        assert_eq!(summary.histograms[0].n, 1);
    }

    #[test]
    fn median_handles_even_and_odd_counts() {
        assert_eq!(median(&[]), None);
        assert_abs_diff_eq!(median(&[3.0]).unwrap(), 3.0);
        assert_abs_diff_eq!(median(&[1.0, 2.0, 4.0]).unwrap(), 2.0);
        assert_abs_diff_eq!(median(&[1.0, 2.0, 4.0, 10.0]).unwrap(), 3.0);
    }

    #[test]
    fn mean_sd_basics() {
        assert!(mean_sd(&[]).is_none());
        let single = mean_sd(&[4.0]).unwrap();
        assert_eq!((single.mean, single.sd, single.n), (4.0, 0.0, 1));
        let m = mean_sd(&[2.0, 4.0, 6.0]).unwrap();
        assert_abs_diff_eq!(m.mean, 4.0);
        assert_abs_diff_eq!(m.sd, 2.0);
    }
}
