//! Report rendering: the summary CSV table and SVG figures.
//!
//! Everything here is plain string assembly from already-computed data, so
//! identical inputs produce byte-identical files — the property the
//! pipeline's determinism guarantee rests on. SVG was chosen for plots
//! precisely because it needs no raster backend.

use crate::geometry::{ArenaSpec, PathSpec};
use crate::metrics::{FrequencyHistogram, MeanSd, MetricsRow};
use crate::trial::{TerminationReason, TrialRecord};
use std::fmt::Write as _;
use std::io::Write;
use thiserror::Error;

/// Errors writing report files.
#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

/// Column order of the summary table.
pub const SUMMARY_COLUMNS: [&str; 13] = [
    "t_update_s",
    "kp",
    "success_rate_pct",
    "tracking_error_mm_mean",
    "tracking_error_mm_sd",
    "nav_time_s_mean",
    "nav_time_s_sd",
    "effort_mean",
    "effort_sd",
    "dist_mm_mean",
    "dist_mm_sd",
    "speed_mms_mean",
    "speed_mms_sd",
];

fn push_opt(fields: &mut Vec<String>, value: Option<f64>) {
    fields.push(value.map(|v| format!("{v}")).unwrap_or_default());
}

fn push_mean_sd(fields: &mut Vec<String>, value: Option<MeanSd>) {
    push_opt(fields, value.map(|m| m.mean));
    push_opt(fields, value.map(|m| m.sd));
}

/// Render the summary rows as CSV text (header + one line per row).
/// Cells whose metric is undefined — a cell with no successful trial, say —
/// stay empty rather than carrying a sentinel number.
pub fn summary_csv_string(rows: &[MetricsRow]) -> String {
    let mut out = String::new();
    out.push_str(&SUMMARY_COLUMNS.join(","));
    out.push('\n');
    for row in rows {
        let mut fields = vec![format!("{}", row.t_update_s), format!("{}", row.kp)];
        push_opt(&mut fields, row.success_rate_pct);
        push_mean_sd(&mut fields, row.tracking_error_mm);
        push_mean_sd(&mut fields, row.nav_time_s);
        push_mean_sd(&mut fields, row.effort);
        push_mean_sd(&mut fields, row.dist_mm);
        push_mean_sd(&mut fields, row.speed_mms);
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Write the summary CSV to a stream.
pub fn write_summary_csv<W: Write>(mut w: W, rows: &[MetricsRow]) -> Result<(), ReportError> {
    w.write_all(summary_csv_string(rows).as_bytes())?;
    Ok(())
}

struct SvgCanvas {
    body: String,
    width: f64,
    height: f64,
}

impl SvgCanvas {
    fn new(width: f64, height: f64) -> Self {
        SvgCanvas {
            body: String::new(),
            width,
            height,
        }
    }

    fn finish(self, title: &str) -> String {
        format!(
            concat!(
                r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w:.0} {h:.0}" "#,
                r#"font-family="sans-serif" font-size="12">"#,
                "\n<title>{title}</title>\n",
                r##"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="#ffffff"/>"##,
                "\n{body}</svg>\n"
            ),
            w = self.width,
            h = self.height,
            title = title,
            body = self.body,
        )
    }
}

/// Overlay of trial trajectories on the reference lane, in arena
/// coordinates. Successful trials draw green, timeouts grey, bounds exits
/// red; excluded trials draw dashed.
pub fn trajectory_svg(records: &[TrialRecord], path: &PathSpec, arena: &ArenaSpec) -> String {
    let margin = 20.0;
    let mut c = SvgCanvas::new(arena.width_mm + 2.0 * margin, arena.height_mm + 2.0 * margin);
    let sx = move |x: f64| margin + arena.width_mm / 2.0 + x;
    let sy = move |y: f64| margin + arena.height_mm / 2.0 - y;

    writeln!(
        c.body,
        r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
        margin, margin, arena.width_mm, arena.height_mm
    )
    .unwrap();

    // Reference lane, sampled finely enough to look smooth at arena scale.
    let mut lane = String::new();
    let steps = 425;
    for i in 0..=steps {
        let x = path.x_start_mm + (path.x_end_mm - path.x_start_mm) * i as f64 / steps as f64;
        let p = path.point_at(x);
        let _ = write!(lane, "{:.2},{:.2} ", sx(p.x), sy(p.y));
    }
    writeln!(
        c.body,
        r##"<polyline points="{}" fill="none" stroke="#1c7ed6" stroke-width="2" stroke-dasharray="6 4"/>"##,
        lane.trim_end()
    )
    .unwrap();
    for endpoint in [path.start_point(), path.end_point()] {
        writeln!(
            c.body,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#1c7ed6"/>"##,
            sx(endpoint.x),
            sy(endpoint.y),
            path.endpoint_radius_mm
        )
        .unwrap();
    }

    for record in records {
        let color = match record.outcome {
            TerminationReason::Success => "#2b8a3e",
            TerminationReason::Timeout => "#868e96",
            TerminationReason::OutOfBounds => "#e03131",
        };
        let dash = if record.excluded.is_some() {
            r#" stroke-dasharray="2 3""#
        } else {
            ""
        };
        let mut line = String::new();
        for frame in &record.frames {
            let _ = write!(line, "{:.2},{:.2} ", sx(frame.pose.x), sy(frame.pose.y));
        }
        writeln!(
            c.body,
            r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="1" opacity="0.6"{}/>"#,
            line.trim_end(),
            color,
            dash
        )
        .unwrap();
    }
    c.finish("trial trajectories")
}

/// Commanded-frequency histograms, one panel per gain, on a shared count
/// axis. Each panel marks its median frequency.
pub fn histogram_svg(histograms: &[FrequencyHistogram]) -> String {
    let panel_w = 260.0;
    let panel_h = 220.0;
    let margin = 40.0;
    let n_panels = histograms.len().max(1);
    let mut c = SvgCanvas::new(
        margin + n_panels as f64 * (panel_w + margin),
        panel_h + 2.0 * margin,
    );
    let max_count = histograms
        .iter()
        .flat_map(|h| h.counts.iter().copied())
        .max()
        .unwrap_or(0)
        .max(1) as f64;

    for (i, hist) in histograms.iter().enumerate() {
        let x0 = margin + i as f64 * (panel_w + margin);
        let y0 = margin;
        let (f_lo, f_hi) = (hist.edges[0], *hist.edges.last().unwrap());
        let fx = |f: f64| x0 + (f - f_lo) / (f_hi - f_lo) * panel_w;
        writeln!(
            c.body,
            r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#333333"/>"##,
            x0, y0, panel_w, panel_h
        )
        .unwrap();
        let mut title = format!("Kp = {} (n = {}", hist.kp, hist.n);
        if let Some(m) = hist.median_hz {
            let _ = write!(title, ", median {m:.1} Hz");
        }
        title.push(')');
        writeln!(
            c.body,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            x0,
            y0 - 8.0,
            title
        )
        .unwrap();
        for (b, &count) in hist.counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let h = count as f64 / max_count * (panel_h - 10.0);
            let xl = fx(hist.edges[b]);
            let xr = fx(hist.edges[b + 1]);
            writeln!(
                c.body,
                r##"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="#4dabf7" stroke="#1864ab"/>"##,
                xl,
                y0 + panel_h - h,
                xr - xl,
                h
            )
            .unwrap();
        }
        if let Some(m) = hist.median_hz {
            writeln!(
                c.body,
                r##"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="#e8590c" stroke-dasharray="4 3"/>"##,
                y0,
                y0 + panel_h,
                x = fx(m)
            )
            .unwrap();
        }
        for f in [f_lo, (f_lo + f_hi) / 2.0, f_hi] {
            writeln!(
                c.body,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.0}</text>"#,
                fx(f),
                y0 + panel_h + 16.0,
                f
            )
            .unwrap();
        }
    }
    c.finish("commanded antenna frequencies")
}
