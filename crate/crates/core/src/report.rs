//! CSV and SVG output for learning curves and the pathology sweep.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{AggregatePoint, RunResult};
use crate::gaussian::PathologyRow;

#[derive(Debug, Serialize)]
struct RunRow<'a> {
    seed: u64,
    step: usize,
    labels_used: usize,
    acquisition: &'a str,
    acquired_index: Option<usize>,
    score: Option<f64>,
    accuracy: f64,
    nll: f64,
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let row = e.position().map_or(0, |p| p.line() as usize);
    Error::Csv { path: path.display().to_string(), row, message: e.to_string() }
}

/// One row per step per run.
pub fn write_runs_csv(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for run in runs {
        for r in &run.curve.records {
            w.serialize(RunRow {
                seed: run.seed,
                step: r.step,
                labels_used: r.labels_used,
                acquisition: run.acquisition.name(),
                acquired_index: r.acquired_index,
                score: r.score,
                accuracy: r.accuracy,
                nll: r.nll,
            })
            .map_err(|e| csv_error(path, e))?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_aggregate_csv(path: &Path, points: &[AggregatePoint]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for p in points {
        w.serialize(p).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_aggregate_csv(path: &Path) -> Result<Vec<AggregatePoint>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let expected = ["step", "mean_accuracy", "se_accuracy", "mean_nll", "se_nll"];
    let headers = r.headers().map_err(|e| csv_error(path, e))?;
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(Error::Csv {
            path: path.display().to_string(),
            row: 1,
            message: format!("expected columns {}", expected.join(",")),
        });
    }
    r.deserialize().map(|row| row.map_err(|e| csv_error(path, e))).collect()
}

pub fn write_pathology_csv(path: &Path, rows: &[PathologyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["M", "bald", "eig_target", "gershgorin_lo", "gershgorin_hi"])
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize((r.m, r.bald, r.eig_target, r.gershgorin_lo, r.gershgorin_hi))
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

/// A labelled aggregate curve.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<AggregatePoint>,
}

/// Long-format row for plotting tools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TidyRow {
    pub acquisition: String,
    pub metric: String,
    pub step: usize,
    pub mean: f64,
    pub se: f64,
}

pub fn tidy(series: &[Series]) -> Vec<TidyRow> {
    let mut rows = Vec::new();
    for s in series {
        for (metric, pick) in [("accuracy", true), ("nll", false)] {
            for p in &s.points {
                let (mean, se) = if pick { (p.mean_accuracy, p.se_accuracy) } else { (p.mean_nll, p.se_nll) };
                rows.push(TidyRow { acquisition: s.label.clone(), metric: metric.into(), step: p.step, mean, se });
            }
        }
    }
    rows
}

pub fn write_tidy_csv(path: &Path, rows: &[TidyRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush()?;
    Ok(())
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Accuracy against acquired labels with shaded one-standard-error bands.
pub fn accuracy_svg(series: &[Series]) -> String {
    let (w, h, pad) = (640.0, 400.0, 50.0);
    let all = series.iter().flat_map(|s| &s.points);
    let max_step = all.clone().map(|p| p.step).max().unwrap_or(1).max(1) as f64;
    let lo = all
        .clone()
        .map(|p| p.mean_accuracy - p.se_accuracy)
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    let hi = all.map(|p| p.mean_accuracy + p.se_accuracy).fold(f64::NEG_INFINITY, f64::max).max(lo + 1e-3);
    let x = |step: usize| pad + (w - 2.0 * pad) * step as f64 / max_step;
    let y = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<path d="M{pad} {pad} V{} H{}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">acquired labels</text>"#, w / 2.0, h - 12.0);
    let _ = writeln!(svg, r#"<text x="14" y="{}" transform="rotate(-90 14 {})" text-anchor="middle">test accuracy</text>"#, h / 2.0, h / 2.0);
    for (v, label) in [(lo, lo), (hi, hi)] {
        let _ = writeln!(svg, r#"<text x="{}" y="{:.1}" text-anchor="end">{label:.3}</text>"#, pad - 4.0, y(v) + 4.0);
    }
    let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, w - pad, h - pad + 16.0, max_step);
    for (i, s) in series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let upper = s.points.iter().map(|p| format!("{:.1},{:.1}", x(p.step), y(p.mean_accuracy + p.se_accuracy)));
        let lower = s.points.iter().rev().map(|p| format!("{:.1},{:.1}", x(p.step), y(p.mean_accuracy - p.se_accuracy)));
        let band: Vec<String> = upper.chain(lower).collect();
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{colour}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = s.points.iter().map(|p| format!("{:.1},{:.1}", x(p.step), y(p.mean_accuracy))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2"/>"#, line.join(" "));
        let ly = pad + 16.0 * i as f64;
        let _ = writeln!(svg, r#"<text x="{}" y="{ly}" fill="{colour}">{}</text>"#, w - pad - 100.0, s.label);
    }
    svg.push_str("</svg>\n");
    svg
}
