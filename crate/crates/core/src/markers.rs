//! Motion-capture marker ingest.
//!
//! Converts a three-marker rig CSV into the frame stream the rest of the
//! pipeline consumes. Expected layout, one row per capture frame:
//!
//! ```text
//! frame, t_s, front_x, front_y, front_z, rear1_x, rear1_y, rear1_z, rear2_x, rear2_y, rear2_z
//! ```
//!
//! A header row is optional and detected by its non-numeric cells. All
//! coordinates are millimetres; the z column is parsed but discarded (the
//! pose lives in the arena plane). A frame with any blank marker cell is
//! miss-tracked: it keeps the previous frame's pose and is flagged
//! `tracked = false` (leading miss-tracked frames borrow the first tracked
//! pose). A frame whose markers coincide so closely that the front axis is
//! undefined is treated the same way — geometrically it *is* a tracking
//! failure.

use crate::geometry::Pose2D;
use crate::trial::Frame;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

/// Errors reading marker files.
#[derive(Debug, Error)]
pub enum MarkerError {
    #[error("cannot read marker file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse marker file: {0}")]
    Csv(#[from] csv::Error),
    #[error("marker row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error("marker row {row}: time must increase strictly")]
    BadTimeline { row: usize },
    #[error("no tracked frame in the whole file")]
    NoTrackedFrames,
}

/// Minimum front-axis length for a usable heading, millimetres.
const MIN_AXIS_MM: f64 = 1e-9;

fn pose_from_markers(m: &[(f64, f64); 3]) -> Option<Pose2D> {
    let (front, rear_a, rear_b) = (m[0], m[1], m[2]);
    let mid = ((rear_a.0 + rear_b.0) / 2.0, (rear_a.1 + rear_b.1) / 2.0);
    let axis = (front.0 - mid.0, front.1 - mid.1);
    if axis.0.hypot(axis.1) < MIN_AXIS_MM {
        return None;
    }
    Some(Pose2D {
        x: (front.0 + rear_a.0 + rear_b.0) / 3.0,
        y: (front.1 + rear_a.1 + rear_b.1) / 3.0,
        heading_deg: axis.1.atan2(axis.0).to_degrees(),
    })
}

fn is_header(record: &csv::StringRecord) -> bool {
    record
        .get(1)
        .map(|cell| cell.trim().parse::<f64>().is_err())
        .unwrap_or(true)
}

/// Parse a marker CSV into a frame stream.
pub fn ingest_markers<R: Read>(reader: R) -> Result<Vec<Frame>, MarkerError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    // (time, pose-if-tracked) per frame; poses are filled in afterwards.
    let mut raw: Vec<(f64, Option<Pose2D>)> = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let row = i + 1;
        let record = result?;
        if i == 0 && is_header(&record) {
            continue;
        }
        let malformed = |reason: String| MarkerError::Malformed { row, reason };
        if record.len() != 11 {
            return Err(malformed(format!(
                "expected 11 columns (frame, time, 3 markers x 3 coords), got {}",
                record.len()
            )));
        }
        let time: f64 = record[1]
            .parse()
            .map_err(|_| malformed(format!("unreadable time {:?}", &record[1])))?;
        if let Some(&(prev, _)) = raw.last() {
            if time <= prev {
                return Err(MarkerError::BadTimeline { row });
            }
        }
        // Markers occupy columns 2..11 in (x, y, z) triples; any blank cell
        // miss-tracks the whole frame.
        let mut markers = [(0.0, 0.0); 3];
        let mut tracked = true;
        'markers: for m in 0..3 {
            let mut coords = [0.0; 3];
            for c in 0..3 {
                let cell = &record[2 + 3 * m + c];
                if cell.is_empty() {
                    tracked = false;
                    break 'markers;
                }
                coords[c] = cell
                    .parse()
                    .map_err(|_| malformed(format!("unreadable coordinate {cell:?}")))?;
            }
            markers[m] = (coords[0], coords[1]);
        }
        let pose = if tracked {
            pose_from_markers(&markers)
        } else {
            None
        };
        raw.push((time, pose));
    }

    let first_pose = raw
        .iter()
        .find_map(|&(_, p)| p)
        .ok_or(MarkerError::NoTrackedFrames)?;
    let mut last_pose = first_pose;
    Ok(raw
        .into_iter()
        .map(|(t_s, pose)| {
            if let Some(p) = pose {
                last_pose = p;
            }
            Frame {
                t_s,
                pose: last_pose,
                tracked: pose.is_some(),
            }
        })
        .collect())
}

/// Parse a marker CSV file into a frame stream.
pub fn ingest_markers_from_path(path: &Path) -> Result<Vec<Frame>, MarkerError> {
    let file = std::fs::File::open(path)?;
    ingest_markers(std::io::BufReader::new(file))
}
