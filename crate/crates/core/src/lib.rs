//! Closed-loop navigation toolkit for stimulus-driven insect agents.
//!
//! The crate simulates a walking insect platform whose locomotion is steered
//! by electrical stimulation: antennal pulse trains evoke graded contralateral
//! turns, elytral bursts evoke forward thrust. A proportional controller maps
//! heading error against a moving carrot point on a reference path into
//! stimulus commands, and a trial runner executes the full experiment
//! protocol (sessions, direction swaps, exclusion rules, parameter sweeps).
//! The analysis layer reproduces the offline pipeline: trajectory filtering,
//! tracking error, effort and speed summaries, turn-response reconstruction,
//! and the hypothesis tests used to compare controller settings.
//!
//! Modules are layered bottom-up and usable on their own:
//!
//! - [`geometry`]: reference path, projections, carrot targets, area metrics
//! - [`controller`]: stimulus scheduling policy and command types
//! - [`plant`]: stochastic agent model (turn tables, thrust, habituation)
//! - [`trial`]: single trials, sessions, and the full parameter sweep
//! - [`metrics`]: offline analysis of logged trials
//! - [`stats`]: Welch's t-test and one-way ANOVA used by the comparisons
//! - [`config`], [`log`], [`markers`], [`report`], [`cli`]: file formats and
//!   the command-line front end

pub mod cli;
pub mod config;
pub mod controller;
pub mod geometry;
pub mod log;
pub mod markers;
pub mod metrics;
pub mod plant;
pub mod report;
pub mod stats;
pub mod trial;

pub use config::ConfigDocument;
pub use controller::{Channel, ControllerConfig, StimulusCommand};
pub use geometry::{ArenaSpec, PathSpec, Point, Pose2D};
pub use plant::{BeetleParams, BeetleState, TurnResponseTable};
pub use trial::{Direction, SweepConfig, TrialConfig, TrialRecord};
