//! On-disk configuration.
//!
//! One JSON document drives both single trials and sweeps. Every section
//! and every field is optional — omitted values fall back to the built-in
//! defaults — but unknown keys anywhere are an error, so typos fail loudly
//! instead of silently running the defaults.

use crate::controller::ControllerConfig;
use crate::geometry::{ArenaSpec, PathSpec};
use crate::plant::BeetleParams;
use crate::trial::{Direction, SweepConfig, TrialConfig, TrialError};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Errors loading or validating a configuration document.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error(transparent)]
    Invalid(#[from] TrialError),
}

/// Trial-level settings: everything a single run needs beyond the path,
/// arena, plant, and controller sections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrialSection {
    pub lookahead_mm: f64,
    pub timeout_s: f64,
    pub frame_dt_s: f64,
    pub seed: u64,
    pub direction: Direction,
    pub dropout_rate: f64,
    pub heading_jitter_deg: f64,
}

impl Default for TrialSection {
    fn default() -> Self {
        let t = TrialConfig::default();
        TrialSection {
            lookahead_mm: t.lookahead_mm,
            timeout_s: t.timeout_s,
            frame_dt_s: t.frame_dt_s,
            seed: t.seed,
            direction: t.direction,
            dropout_rate: t.dropout_rate,
            heading_jitter_deg: t.heading_jitter_deg,
        }
    }
}

/// Sweep grid and cohort size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    pub kp_values: Vec<f64>,
    pub t_update_values: Vec<f64>,
    pub n_beetles: u32,
    pub trials_per_session: u32,
}

impl Default for SweepSection {
    fn default() -> Self {
        let s = SweepConfig::default();
        SweepSection {
            kp_values: s.kp_values,
            t_update_values: s.t_update_values,
            n_beetles: s.n_beetles,
            trials_per_session: s.trials_per_session,
        }
    }
}

/// The complete configuration document.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigDocument {
    pub path: PathSpec,
    pub arena: ArenaSpec,
    pub beetle: BeetleParams,
    pub controller: ControllerConfig,
    pub trial: TrialSection,
    pub sweep: SweepSection,
}

impl ConfigDocument {
    /// Parse and validate a JSON document.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDocument = serde_json::from_str(text)?;
        doc.to_trial_config().validate()?;
        doc.to_sweep_config().validate()?;
        Ok(doc)
    }

    /// Load and validate a JSON document from disk.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Assemble the single-trial configuration.
    pub fn to_trial_config(&self) -> TrialConfig {
        TrialConfig {
            controller: self.controller,
            beetle: self.beetle,
            path: self.path,
            arena: self.arena,
            lookahead_mm: self.trial.lookahead_mm,
            timeout_s: self.trial.timeout_s,
            frame_dt_s: self.trial.frame_dt_s,
            seed: self.trial.seed,
            direction: self.trial.direction,
            dropout_rate: self.trial.dropout_rate,
            heading_jitter_deg: self.trial.heading_jitter_deg,
        }
    }

    /// Assemble the sweep configuration (the trial settings become the
    /// per-session template).
    pub fn to_sweep_config(&self) -> SweepConfig {
        SweepConfig {
            base: self.to_trial_config(),
            kp_values: self.sweep.kp_values.clone(),
            t_update_values: self.sweep.t_update_values.clone(),
            n_beetles: self.sweep.n_beetles,
            trials_per_session: self.sweep.trials_per_session,
        }
    }
}
