//! CSV tables and log-log SVG plots of convergence records.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chernoff_core::evolution::{fit_rate, ConvergenceRecord, RateFit};

use crate::RunError;

pub const CSV_HEADER: &str = "mesh,error,slope_running";

/// How the running slope column is filled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlopeColumn {
    /// Least-squares fit over the rows so far; `nan` until three rows exist.
    Fitted,
    /// Errors are at round-off; every row reads `exact`.
    Exact,
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn format_value(x: f64) -> String {
    format!("{x:.16e}")
}

/// Slopes are reported at 6 significant digits.
pub fn format_slope(x: f64) -> String {
    format!("{x:.5e}")
}

pub fn render_table(records: &[ConvergenceRecord], slope: SlopeColumn) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for (i, r) in records.iter().enumerate() {
        let running = match slope {
            SlopeColumn::Exact => "exact".to_string(),
            SlopeColumn::Fitted => {
                let prefix: Vec<(f64, f64)> =
                    records[..=i].iter().map(|r| (r.mesh, r.error)).collect();
                fit_rate(&prefix).map_or_else(|_| "nan".to_string(), |f| format_slope(f.slope))
            }
        };
        let _ = writeln!(
            out,
            "{},{},{}",
            format_value(r.mesh),
            format_value(r.error),
            running
        );
    }
    out
}

/// Reads back the `(mesh, error)` columns of an emitted table.
pub fn parse_table(text: &str) -> Result<Vec<ConvergenceRecord>, String> {
    let mut lines = text.lines();
    match lines.next() {
        Some(CSV_HEADER) => {}
        other => return Err(format!("unexpected header {other:?}")),
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 3 {
                return Err(format!(
                    "row {}: expected 3 columns, got {}",
                    i + 1,
                    cols.len()
                ));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| format!("row {}: `{s}`: {e}", i + 1))
            };
            Ok(ConvergenceRecord {
                mesh: num(cols[0])?,
                error: num(cols[1])?,
            })
        })
        .collect()
}

pub fn emit_table(
    records: &[ConvergenceRecord],
    slope: SlopeColumn,
    path: &Path,
) -> Result<(), RunError> {
    write_file(path, &render_table(records, slope))
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;

/// Log-log scatter of the records with one `<path>` for the data series and
/// one for the fitted line, when a fit is given.
pub fn render_plot(title: &str, records: &[ConvergenceRecord], fit: Option<RateFit>) -> String {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.mesh > 0.0 && r.error > 0.0)
        .map(|r| (r.mesh.log10(), r.error.log10()))
        .collect();
    let (mut x0, mut x1, mut y0, mut y1) = pts.iter().fold(
        (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        ),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if pts.is_empty() {
        (x0, x1, y0, y1) = (-1.0, 0.0, -1.0, 0.0);
    }
    if x1 - x0 < 1e-12 {
        x0 -= 0.5;
        x1 += 0.5;
    }
    if y1 - y0 < 1e-12 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(
        svg,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        WIDTH - 2.0 * MARGIN,
        HEIGHT - 2.0 * MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">log10 mesh [{x0:.3}, {x1:.3}]</text>"#,
        WIDTH / 2.0,
        HEIGHT - 20.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="20" y="{}" transform="rotate(-90 20 {})" text-anchor="middle">log10 error [{y0:.3}, {y1:.3}]</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    if !pts.is_empty() {
        let d: Vec<String> = pts
            .iter()
            .enumerate()
            .map(|(i, &(x, y))| {
                format!(
                    "{}{:.3} {:.3}",
                    if i == 0 { "M" } else { "L" },
                    sx(x),
                    sy(y)
                )
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<path class="series-data" d="{}" fill="none" stroke="steelblue"/>"#,
            d.join(" ")
        );
        for &(x, y) in &pts {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="steelblue"/>"#,
                sx(x),
                sy(y)
            );
        }
    }
    if let (Some(fit), false) = (fit, pts.is_empty()) {
        // fit is in natural logs; plot coordinates are log10
        let line = |x: f64| {
            (fit.intercept + fit.slope * x * std::f64::consts::LN_10) / std::f64::consts::LN_10
        };
        let _ = writeln!(
            svg,
            r#"<path class="series-fit" d="M{:.3} {:.3} L{:.3} {:.3}" fill="none" stroke="firebrick" stroke-dasharray="6 4"/>"#,
            sx(x0),
            sy(line(x0)),
            sx(x1),
            sy(line(x1))
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}">slope {}</text>"#,
            MARGIN + 10.0,
            MARGIN + 20.0,
            format_slope(fit.slope)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

pub fn emit_plot(
    title: &str,
    records: &[ConvergenceRecord],
    fit: Option<RateFit>,
    path: &Path,
) -> Result<(), RunError> {
    if records.is_empty() {
        return Err(RunError::Config("cannot plot an empty record set".into()));
    }
    write_file(path, &render_plot(title, records, fit))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<(), RunError> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}
