//! Command-line interface.
//!
//! Five subcommands cover the whole workflow:
//!
//! * `simulate` — one trial from a config, JSONL log out,
//! * `sweep` — the full (gain x update-interval) grid, one JSONL per trial
//!   plus `summary.csv`,
//! * `analyze` — metrics table from existing JSONL logs,
//! * `report` — metrics table plus SVG figures,
//! * `ingest` — motion-capture marker CSV to JSONL frames.
//!
//! Seeds resolve as: `--seed` flag, then the `CYBORGNAV_SEED` environment
//! variable, then the config file. Exit codes: 0 on success, 1 for
//! validation problems (bad flags, bad config, malformed inputs), 2 for
//! I/O failures.

use crate::config::{ConfigDocument, ConfigError};
use crate::log::{read_record_from_path, write_record, write_record_to_path, LogError, TrialLogLine};
use crate::markers::{ingest_markers_from_path, MarkerError};
use crate::metrics::summarize_sweep;
use crate::report::{histogram_svg, summary_csv_string, trajectory_svg};
use crate::trial::{run_sweep, run_trial, TrialError, TrialRecord, TrialTag};
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "CYBORGNAV_SEED";

#[derive(Debug, Parser)]
#[command(
    name = "cyborgnav",
    version,
    about = "Closed-loop navigation simulator and analysis toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trial and write its JSONL log.
    Simulate(SimulateArgs),
    /// Run the parameter sweep; one JSONL per trial plus summary.csv.
    Sweep(SweepArgs),
    /// Summarize JSONL trial logs into the metrics table.
    Analyze(AnalyzeArgs),
    /// Render the metrics table and SVG figures from JSONL trial logs.
    Report(ReportArgs),
    /// Convert a three-marker motion-capture CSV into JSONL frames.
    Ingest(IngestArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output JSONL path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed override (beats CYBORGNAV_SEED and the config).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Configuration file (JSON); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Master seed override (beats CYBORGNAV_SEED and the config).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Pool distance/speed series from failed (non-excluded) trials too.
    #[arg(long)]
    pub include_failed_series: bool,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// JSONL files or directories of *.jsonl logs.
    #[arg(long, required = true, num_args = 1..)]
    pub logs: Vec<PathBuf>,
    /// Configuration file fixing the reference geometry.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Pool distance/speed series from failed (non-excluded) trials too.
    #[arg(long)]
    pub include_failed_series: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// JSONL files or directories of *.jsonl logs.
    #[arg(long, required = true, num_args = 1..)]
    pub logs: Vec<PathBuf>,
    /// Configuration file fixing the reference geometry.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if missing).
    #[arg(long)]
    pub out: PathBuf,
    /// Pool distance/speed series from failed (non-excluded) trials too.
    #[arg(long)]
    pub include_failed_series: bool,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Marker CSV to convert.
    #[arg(long)]
    pub markers: PathBuf,
    /// Output JSONL path; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Errors from command execution (not argument parsing).
#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Trial(#[from] TrialError),
    #[error(transparent)]
    Log(#[from] LogError),
    #[error(transparent)]
    Marker(#[from] MarkerError),
    #[error("{0}")]
    Validation(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    /// 1 for validation problems, 2 for I/O failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Write { .. } => 2,
            CliError::Config(ConfigError::Io(_)) => 2,
            CliError::Log(LogError::Io(_)) => 2,
            CliError::Marker(MarkerError::Io(_)) => 2,
            CliError::Marker(MarkerError::Csv(e)) if e.is_io_error() => 2,
            _ => 1,
        }
    }
}

fn resolve_seed(
    flag: Option<u64>,
    env: Option<&str>,
    config_seed: u64,
) -> Result<u64, CliError> {
    if let Some(seed) = flag {
        return Ok(seed);
    }
    if let Some(text) = env {
        return text.trim().parse().map_err(|_| {
            CliError::Validation(format!(
                "{SEED_ENV} must be an unsigned 64-bit integer, got {text:?}"
            ))
        });
    }
    Ok(config_seed)
}

fn load_config(path: Option<&Path>) -> Result<ConfigDocument, CliError> {
    match path {
        Some(p) => Ok(ConfigDocument::load(p)?),
        None => Ok(ConfigDocument::default()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn ensure_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

/// File name a sweep trial is stored under.
fn trial_file_name(tag: &TrialTag) -> String {
    format!(
        "b{:02}_tu{:.2}_kp{:.2}_t{:02}.jsonl",
        tag.beetle_index, tag.t_update_s, tag.kp, tag.trial_index
    )
}

/// Expand `--logs` arguments: files pass through, directories contribute
/// their `*.jsonl` entries. The final list is sorted so the analysis never
/// depends on filesystem enumeration order.
fn collect_log_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = Vec::new();
    for path in paths {
        if path.is_dir() {
            let entries = std::fs::read_dir(path).map_err(LogError::Io)?;
            for entry in entries {
                let p = entry.map_err(LogError::Io)?.path();
                if p.extension().is_some_and(|e| e == "jsonl") {
                    files.push(p);
                }
            }
        } else {
            files.push(path.clone());
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(CliError::Validation("no JSONL logs found".into()));
    }
    Ok(files)
}

fn read_records(paths: &[PathBuf]) -> Result<Vec<TrialRecord>, CliError> {
    paths
        .iter()
        .map(|p| Ok(read_record_from_path(p)?))
        .collect()
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let mut trial = config.to_trial_config();
    trial.seed = resolve_seed(
        args.seed,
        std::env::var(SEED_ENV).ok().as_deref(),
        trial.seed,
    )?;
    let record = run_trial(&trial)?;
    match &args.out {
        Some(path) => write_record_to_path(path, &record)?,
        None => write_record(std::io::stdout().lock(), &record)?,
    }
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let mut sweep = config.to_sweep_config();
    sweep.base.seed = resolve_seed(
        args.seed,
        std::env::var(SEED_ENV).ok().as_deref(),
        sweep.base.seed,
    )?;
    let records = run_sweep(&sweep)?;
    ensure_dir(&args.out)?;
    for record in &records {
        write_record_to_path(&args.out.join(trial_file_name(&record.tag)), record)?;
    }
    let summary = summarize_sweep(&records, &sweep.base.path, !args.include_failed_series);
    write_text(
        &args.out.join("summary.csv"),
        &summary_csv_string(&summary.rows),
    )
}

fn analyze(args: &AnalyzeArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let records = read_records(&collect_log_files(&args.logs)?)?;
    let summary = summarize_sweep(&records, &config.path, !args.include_failed_series);
    let text = summary_csv_string(&summary.rows);
    match &args.out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report(args: &ReportArgs) -> Result<(), CliError> {
    let config = load_config(args.config.as_deref())?;
    let records = read_records(&collect_log_files(&args.logs)?)?;
    let summary = summarize_sweep(&records, &config.path, !args.include_failed_series);
    ensure_dir(&args.out)?;
    write_text(
        &args.out.join("summary.csv"),
        &summary_csv_string(&summary.rows),
    )?;
    write_text(
        &args.out.join("trajectories.svg"),
        &trajectory_svg(&records, &config.path, &config.arena),
    )?;
    write_text(
        &args.out.join("frequencies.svg"),
        &histogram_svg(&summary.histograms),
    )
}

fn ingest(args: &IngestArgs) -> Result<(), CliError> {
    let frames = ingest_markers_from_path(&args.markers)?;
    let mut text = String::new();
    for frame in &frames {
        let line = TrialLogLine::Frame {
            t: frame.t_s,
            x: frame.pose.x,
            y: frame.pose.y,
            heading: frame.pose.heading_deg,
            tracked: frame.tracked,
        };
        text.push_str(&serde_json::to_string(&line).expect("log lines always serialize"));
        text.push('\n');
    }
    match &args.out {
        Some(path) => write_text(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Simulate(args) => simulate(args),
        Command::Sweep(args) => sweep(args),
        Command::Analyze(args) => analyze(args),
        Command::Report(args) => report(args),
        Command::Ingest(args) => ingest(args),
    }
}

/// Parse arguments, run the command, and return the process exit code.
pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(std::io::stderr(), "error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial::Direction;

    #[test]
    fn seed_precedence_is_flag_env_config() {
        assert_eq!(resolve_seed(Some(1), Some("2"), 3).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some("2"), 3).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, 3).unwrap(), 3);
        assert!(matches!(
            resolve_seed(None, Some("not-a-number"), 3),
            Err(CliError::Validation(_))
        ));
    }

    #[test]
    fn arguments_parse_into_commands() {
        let cli = Cli::try_parse_from(["cyborgnav", "simulate", "--seed", "7"]).unwrap();
        match cli.command {
            Command::Simulate(args) => assert_eq!(args.seed, Some(7)),
            other => panic!("wrong command: {other:?}"),
        }
        let cli = Cli::try_parse_from([
            "cyborgnav", "sweep", "--out", "runs", "--config", "c.json",
        ])
        .unwrap();
        match cli.command {
            Command::Sweep(args) => {
                assert_eq!(args.out, PathBuf::from("runs"));
                assert!(!args.include_failed_series);
            }
            other => panic!("wrong command: {other:?}"),
        }
        let cli =
            Cli::try_parse_from(["cyborgnav", "analyze", "--logs", "a.jsonl", "b.jsonl"]).unwrap();
        match cli.command {
            Command::Analyze(args) => assert_eq!(args.logs.len(), 2),
            other => panic!("wrong command: {other:?}"),
        }
    }

    #[test]
    fn unknown_flags_fail_to_parse() {
        assert!(Cli::try_parse_from(["cyborgnav", "simulate", "--sneed", "7"]).is_err());
        assert!(Cli::try_parse_from(["cyborgnav", "analyze"]).is_err());
        assert!(Cli::try_parse_from(["cyborgnav"]).is_err());
    }

    #[test]
    fn sweep_file_names_are_zero_padded_and_stable() {
        let tag = TrialTag {
            kp: 0.25,
            t_update_s: 1.5,
            seed: 0,
            beetle_index: 7,
            trial_index: 11,
            direction: Direction::Forward,
        };
        assert_eq!(trial_file_name(&tag), "b07_tu1.50_kp0.25_t11.jsonl");
    }

    #[test]
    fn exit_codes_split_validation_from_io() {
        assert_eq!(CliError::Validation("x".into()).exit_code(), 1);
        let io = std::io::Error::new(std::io::ErrorKind::PermissionDenied, "nope");
        assert_eq!(
            CliError::Write {
                path: PathBuf::from("x"),
                source: io
            }
            .exit_code(),
            2
        );
        let missing = ConfigDocument::load(Path::new("/nonexistent/c.json")).unwrap_err();
        assert_eq!(CliError::Config(missing).exit_code(), 2);
        let invalid = ConfigDocument::from_json("{\"controller\":{\"kp\":-1}}").unwrap_err();
        assert_eq!(CliError::Config(invalid).exit_code(), 1);
    }

    #[test]
    fn log_collection_sorts_and_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("b.jsonl"), "").unwrap();
        std::fs::write(dir.path().join("a.jsonl"), "").unwrap();
        std::fs::write(dir.path().join("ignore.txt"), "").unwrap();
        let files = collect_log_files(&[dir.path().to_path_buf()]).unwrap();
        assert_eq!(
            files,
            vec![dir.path().join("a.jsonl"), dir.path().join("b.jsonl")]
        );
        let empty = tempfile::tempdir().unwrap();
        assert!(matches!(
            collect_log_files(&[empty.path().to_path_buf()]),
            Err(CliError::Validation(_))
        ));
    }
}
