//! Report rendering: JSON, an aligned text table and CSV.
//!
//! Percentages print with one decimal and the reasonable score with two.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;

use crate::error::Error;
use crate::scoring::{Slice, SweepParameter, SweepPoint, TaskReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Table,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "json" => Ok(Format::Json),
            "table" => Ok(Format::Table),
            "csv" => Ok(Format::Csv),
            other => Err(Error::InvalidParameter(format!("unknown format {other:?}"))),
        }
    }
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.1}"))
}

fn ratio(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"))
}

fn to_json<T: Serialize + ?Sized>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn policy_label(r: &TaskReport) -> String {
    let p = r.parameters.policy;
    let mut parts = vec!["nfc"];
    if p.casefold {
        parts.push("casefold");
    }
    if p.collapse_whitespace {
        parts.push("collapse");
    }
    if p.strip_edges {
        parts.push("strip");
    }
    parts.join("+")
}

/// One row per report, columns in fixed order, `-` for absent slices.
pub fn render_table(reports: &[TaskReport]) -> String {
    let mut header: Vec<String> = vec!["Model".into(), "Task".into()];
    header.extend(Slice::ALL.iter().map(|s| s.header().to_string()));
    header.push("Δr".into());
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.model.clone(), r.task.code().to_uppercase()];
            row.extend(Slice::ALL.iter().map(|s| pct(r.slice(*s))));
            row.push(ratio(r.delta_r));
            row
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|i| {
            rows.iter()
                .map(|r| r[i].chars().count())
                .chain([header[i].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cells: &[String]| {
        cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                let pad = w - c.chars().count();
                if i < 2 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect::<Vec<_>>()
            .join(" | ")
    };
    let mut out = String::new();
    if let Some(first) = reports.first() {
        let _ = writeln!(
            out,
            "tau={} theta={} policy={}",
            first.parameters.tau,
            first.parameters.theta,
            policy_label(first)
        );
    }
    let _ = writeln!(out, "{}", line(&header));
    let _ = writeln!(out, "{}", widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-"));
    for row in &rows {
        let _ = writeln!(out, "{}", line(row));
    }
    out
}

pub fn render_report(report: &TaskReport, format: Format) -> String {
    match format {
        Format::Json => to_json(report),
        Format::Table => render_table(std::slice::from_ref(report)),
        Format::Csv => {
            let mut out = String::from("task,model,slice,score\n");
            for (slice, v) in &report.slices {
                let _ = writeln!(out, "{},{},{},{:.1}", report.task, csv_field(&report.model), slice, v);
            }
            if let Some(d) = report.delta_r {
                let _ = writeln!(out, "{},{},delta_r,{:.2}", report.task, csv_field(&report.model), d);
            }
            out
        }
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Sweep curves. CSV rows are `parameter,slice,score`, one per grid value
/// and selected slice.
pub fn render_sweep(
    points: &[SweepPoint],
    parameter: SweepParameter,
    slices: &[Slice],
    format: Format,
) -> String {
    match format {
        Format::Json => {
            #[derive(Serialize)]
            struct Curve<'a> {
                parameter: &'a str,
                points: &'a [SweepPoint],
            }
            to_json(&Curve {
                parameter: parameter.code(),
                points,
            })
        }
        Format::Table => {
            let reports: Vec<TaskReport> = points
                .iter()
                .map(|p| {
                    let mut r = p.report.clone();
                    r.model = format!("{}={}", parameter.code(), p.value);
                    r
                })
                .collect();
            render_table(&reports)
        }
        Format::Csv => {
            let mut out = String::from("parameter,slice,score\n");
            for p in points {
                for s in slices {
                    if let Some(v) = p.report.slice(*s) {
                        let _ = writeln!(out, "{},{},{:.1}", p.value, s, v);
                    }
                }
            }
            out
        }
    }
}
