//! JSONL trial logs.
//!
//! One line per event, time-ordered. Four line types:
//!
//! * `meta` — sweep coordinates of the trial (gain, update interval, seed,
//!   animal, trial index, direction); always first when present,
//! * `frame` — one tracked/untracked pose sample,
//! * `stim` — one stimulation command,
//! * `outcome` — the termination reason and exclusion flag; always last.
//!
//! The `stim` line carries only the fields that vary (time, channel,
//! frequency, duration). Amplitude, pulse width, and duty cycle are fixed
//! by the per-channel recipes, so reading restores them from the default
//! recipe constants.
//!
//! Reading tolerates a missing `meta` (zeroed coordinates) and a missing
//! `outcome` (recorded as `timeout`), so externally ingested frame streams
//! are valid logs; everything else — unknown line types, out-of-order
//! times, data after the outcome — is an error.

use crate::controller::{Channel, ControllerConfig, StimulusCommand};
use crate::geometry::Pose2D;
use crate::trial::{Direction, ExclusionReason, Frame, TerminationReason, TrialRecord, TrialTag};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;
use thiserror::Error;

/// Errors reading or writing JSONL logs.
#[derive(Debug, Error)]
pub enum LogError {
    #[error("log I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("log line {line}: {source}")]
    Parse {
        line: usize,
        source: serde_json::Error,
    },
    #[error("log line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

/// One JSONL log line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrialLogLine {
    Meta {
        kp: f64,
        t_update_s: f64,
        seed: u64,
        beetle: u32,
        trial: u32,
        direction: Direction,
    },
    Frame {
        t: f64,
        x: f64,
        y: f64,
        heading: f64,
        tracked: bool,
    },
    Stim {
        t: f64,
        channel: Channel,
        freq_hz: f64,
        dur_ms: f64,
    },
    Outcome {
        reason: TerminationReason,
        excluded: Option<ExclusionReason>,
    },
}

impl TrialLogLine {
    fn time(&self) -> Option<f64> {
        match self {
            TrialLogLine::Frame { t, .. } | TrialLogLine::Stim { t, .. } => Some(*t),
            _ => None,
        }
    }
}

/// Flatten a record into its log lines: meta, then frames and stimuli
/// merged by timestamp (the frame first on ties, since the command reacts
/// to the frame), then the outcome.
pub fn record_to_lines(record: &TrialRecord) -> Vec<TrialLogLine> {
    let tag = &record.tag;
    let mut lines = Vec::with_capacity(record.frames.len() + record.stimuli.len() + 2);
    lines.push(TrialLogLine::Meta {
        kp: tag.kp,
        t_update_s: tag.t_update_s,
        seed: tag.seed,
        beetle: tag.beetle_index,
        trial: tag.trial_index,
        direction: tag.direction,
    });
    let mut stims = record.stimuli.iter().peekable();
    for frame in &record.frames {
        while let Some(s) = stims.peek() {
            if s.timestamp_s < frame.t_s {
                let s = stims.next().unwrap();
                lines.push(TrialLogLine::Stim {
                    t: s.timestamp_s,
                    channel: s.channel,
                    freq_hz: s.frequency_hz,
                    dur_ms: s.duration_ms,
                });
            } else {
                break;
            }
        }
        lines.push(TrialLogLine::Frame {
            t: frame.t_s,
            x: frame.pose.x,
            y: frame.pose.y,
            heading: frame.pose.heading_deg,
            tracked: frame.tracked,
        });
        while let Some(s) = stims.peek() {
            if s.timestamp_s <= frame.t_s {
                let s = stims.next().unwrap();
                lines.push(TrialLogLine::Stim {
                    t: s.timestamp_s,
                    channel: s.channel,
                    freq_hz: s.frequency_hz,
                    dur_ms: s.duration_ms,
                });
            } else {
                break;
            }
        }
    }
    for s in stims {
        lines.push(TrialLogLine::Stim {
            t: s.timestamp_s,
            channel: s.channel,
            freq_hz: s.frequency_hz,
            dur_ms: s.duration_ms,
        });
    }
    lines.push(TrialLogLine::Outcome {
        reason: record.outcome,
        excluded: record.excluded,
    });
    lines
}

/// Restore the fixed per-channel stimulus metadata the log omits.
fn restore_command(t: f64, channel: Channel, freq_hz: f64, dur_ms: f64) -> StimulusCommand {
    let recipe = ControllerConfig::default();
    let (pulse_width_ms, duty_pct) = match channel {
        Channel::ElytraBoth => (None, Some(recipe.elytra_duty_pct)),
        Channel::LeftAntenna | Channel::RightAntenna => {
            (Some(recipe.antenna_pulse_width_ms), None)
        }
    };
    StimulusCommand {
        channel,
        frequency_hz: freq_hz,
        duration_ms: dur_ms,
        amplitude_v: recipe.amplitude_v,
        pulse_width_ms,
        duty_pct,
        timestamp_s: t,
    }
}

/// Rebuild a record from its log lines. Inverse of [`record_to_lines`] up
/// to the fixed stimulus metadata restored by the recipe constants.
pub fn lines_to_record(lines: &[TrialLogLine]) -> Result<TrialRecord, LogError> {
    let mut tag = TrialTag {
        kp: 0.0,
        t_update_s: 0.0,
        seed: 0,
        beetle_index: 0,
        trial_index: 0,
        direction: Direction::Forward,
    };
    let mut frames = Vec::new();
    let mut stimuli = Vec::new();
    let mut outcome: Option<(TerminationReason, Option<ExclusionReason>)> = None;
    let mut last_time = f64::NEG_INFINITY;
    for (i, line) in lines.iter().enumerate() {
        let line_no = i + 1;
        let malformed = |reason: &str| LogError::Malformed {
            line: line_no,
            reason: reason.to_string(),
        };
        if outcome.is_some() {
            return Err(malformed("data after the outcome line"));
        }
        if let Some(t) = line.time() {
            if t < last_time {
                return Err(malformed("timestamps must be non-decreasing"));
            }
            last_time = t;
        }
        match *line {
            TrialLogLine::Meta {
                kp,
                t_update_s,
                seed,
                beetle,
                trial,
                direction,
            } => {
                if i != 0 {
                    return Err(malformed("meta line must come first"));
                }
                tag = TrialTag {
                    kp,
                    t_update_s,
                    seed,
                    beetle_index: beetle,
                    trial_index: trial,
                    direction,
                };
            }
            TrialLogLine::Frame {
                t,
                x,
                y,
                heading,
                tracked,
            } => frames.push(Frame {
                t_s: t,
                pose: Pose2D {
                    x,
                    y,
                    heading_deg: heading,
                },
                tracked,
            }),
            TrialLogLine::Stim {
                t,
                channel,
                freq_hz,
                dur_ms,
            } => stimuli.push(restore_command(t, channel, freq_hz, dur_ms)),
            TrialLogLine::Outcome { reason, excluded } => outcome = Some((reason, excluded)),
        }
    }
    let (outcome, excluded) = outcome.unwrap_or((TerminationReason::Timeout, None));
    Ok(TrialRecord {
        frames,
        stimuli,
        outcome,
        excluded,
        tag,
    })
}

/// Serialize a record to a JSONL stream.
pub fn write_record<W: Write>(mut w: W, record: &TrialRecord) -> Result<(), LogError> {
    for line in record_to_lines(record) {
        let text = serde_json::to_string(&line).map_err(|source| LogError::Parse {
            line: 0,
            source,
        })?;
        writeln!(w, "{text}")?;
    }
    Ok(())
}

/// Parse one JSONL stream into a record.
pub fn read_record<R: BufRead>(r: R) -> Result<TrialRecord, LogError> {
    let mut lines = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let text = line?;
        if text.trim().is_empty() {
            continue;
        }
        lines.push(
            serde_json::from_str::<TrialLogLine>(&text).map_err(|source| LogError::Parse {
                line: i + 1,
                source,
            })?,
        );
    }
    lines_to_record(&lines)
}

/// Write a record to a JSONL file.
pub fn write_record_to_path(path: &Path, record: &TrialRecord) -> Result<(), LogError> {
    let file = std::fs::File::create(path)?;
    let mut w = std::io::BufWriter::new(file);
    write_record(&mut w, record)?;
    w.flush()?;
    Ok(())
}

/// Read a record from a JSONL file.
pub fn read_record_from_path(path: &Path) -> Result<TrialRecord, LogError> {
    let file = std::fs::File::open(path)?;
    read_record(std::io::BufReader::new(file))
}
