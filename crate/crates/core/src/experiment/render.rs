//! Human-readable report tables and plot-ready region grids.

use std::io::Write;
use std::path::Path;

use crate::region::ClassificationSnapshot;
use crate::repair::{Count, RepairReport, Stat};
use crate::{Error, Result};

pub const PLOT_HEADER: &str = "# isar-plot-data v1";

const HEADERS: [&str; 7] = [
    "Method",
    "Verified:Unknown:Failed",
    "Verified broken",
    "Failed repaired",
    "Min rob (failed)",
    "Min rob (safe)",
    "Min rob (overall)",
];

/// Fixed-point with `digits` decimals, trailing zeros trimmed, `-0` shown as `0`.
fn trimmed(v: f64, digits: usize) -> String {
    let mut s = format!("{v:.digits$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

pub fn format_count(c: &Count) -> String {
    format!("{} ({}%)", c.count, trimmed(c.percent(), 1))
}

pub fn format_stat(s: &Stat) -> String {
    format!("{} ± {}", trimmed(s.mean, 2), trimmed(s.std, 2))
}

fn cell<T>(v: Option<&T>, f: impl Fn(&T) -> String) -> String {
    v.map(f).unwrap_or_else(|| "N/A".into())
}

/// Renders a report as a fixed-width table. A report over zero regions
/// renders the header alone.
pub fn render_report(report: &RepairReport) -> String {
    let mut rows: Vec<[String; 7]> = vec![HEADERS.map(String::from)];
    if report.regions > 0 {
        for r in &report.rows {
            let stat = |pick: fn(&crate::repair::MinRobStats) -> Option<Stat>| {
                cell(r.min_rob.as_ref().and_then(&pick).as_ref(), format_stat)
            };
            rows.push([
                r.label.clone(),
                format!("{}:{}:{}", r.verified, r.unknown, r.failed),
                cell(r.broken.as_ref(), format_count),
                cell(r.repaired.as_ref(), format_count),
                stat(|m| m.failed),
                stat(|m| m.safe),
                stat(|m| m.overall),
            ]);
        }
    }
    let widths: Vec<usize> =
        (0..7).map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let line = |r: &[String; 7]| {
        let mut s = format!("{:<w$}", r[0], w = widths[0]);
        for c in 1..7 {
            s.push_str(&format!(" | {:>w$}", r[c], w = widths[c]));
        }
        s.trim_end().to_string()
    };
    let mut out = line(&rows[0]);
    out.push('\n');
    out.push_str(&widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    out.push('\n');
    for r in &rows[1..] {
        out.push_str(&line(r));
        out.push('\n');
    }
    out
}

pub fn read_report(path: &Path) -> Result<RepairReport> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text)?;
    let schema = |reason: String| Error::Schema { path: path.to_path_buf(), reason };
    let report: RepairReport = serde_json::from_value(value).map_err(|e| schema(e.to_string()))?;
    report.check_header().map_err(schema)?;
    Ok(report)
}

/// Reads a report document and renders it.
pub fn report_render(path: &Path) -> Result<String> {
    Ok(render_report(&read_report(path)?))
}

pub fn read_snapshot(path: &Path) -> Result<ClassificationSnapshot> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema = |reason: String| Error::Schema { path: path.to_path_buf(), reason };
    let snap: ClassificationSnapshot = serde_json::from_str(&text).map_err(|e| schema(e.to_string()))?;
    snap.check_header().map_err(schema)?;
    Ok(snap)
}

/// Writes one CSV row per region: id, lower bounds, upper bounds, class.
/// Returns the number of data rows.
pub fn write_plot_data<W: Write>(snap: &ClassificationSnapshot, mut out: W) -> Result<usize> {
    writeln!(out, "{PLOT_HEADER}").map_err(|e| Error::io("<plot data>", e))?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string()];
    header.extend(snap.coordinates.iter().map(|c| format!("{c}_lower")));
    header.extend(snap.coordinates.iter().map(|c| format!("{c}_upper")));
    header.push("class".into());
    w.write_record(&header)?;
    for r in &snap.regions {
        let mut row = vec![r.id.to_string()];
        row.extend(r.lower.iter().map(f64::to_string));
        row.extend(r.upper.iter().map(f64::to_string));
        row.push(r.class.label().into());
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::io("<plot data>", e))?;
    Ok(snap.regions.len())
}

/// Converts a region-classification file into plot data.
pub fn emit_plot_data<W: Write>(regions_path: &Path, out: W) -> Result<usize> {
    write_plot_data(&read_snapshot(regions_path)?, out)
}
