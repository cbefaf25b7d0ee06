use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{RiskReport, SweepTable};
use crate::error::{Error, Result};
use crate::matcore::fmt_real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown format {other:?}; expected json or csv"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Report {
    Sweep(SweepTable),
    Risk(RiskReport),
}

fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn opt_real(v: Option<f64>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

const RISK_HEADER: &str = "empirical_risk,stderr,oracle,excess,total,ratio,replicates,seed_master,seed_stream,lower_bound_only,formula,flags";

fn risk_row(r: &RiskReport) -> String {
    let rate = &r.theoretical_rate;
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt_real(r.empirical_risk),
        fmt_real(r.stderr),
        fmt_real(rate.oracle),
        fmt_real(rate.excess),
        fmt_real(rate.total),
        opt_real(r.ratio),
        r.replicates,
        r.seed.master,
        r.seed.stream,
        rate.lower_bound_only,
        csv_field(&rate.formula),
        csv_field(&r.heuristic_flags.join(";")),
    )
}

/// Serializes with a fixed field order. JSON reals use the shortest string
/// that parses back to the same bits; CSV reals carry 17 significant digits.
pub fn render_report(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(report)?;
            text.push('\n');
            Ok(text)
        }
        Format::Csv => {
            let mut out = String::new();
            match report {
                Report::Risk(r) => {
                    writeln!(out, "{RISK_HEADER}").unwrap();
                    writeln!(out, "{}", risk_row(r)).unwrap();
                }
                Report::Sweep(t) => {
                    writeln!(out, "axis,value,{RISK_HEADER}").unwrap();
                    for pt in &t.points {
                        writeln!(out, "{},{},{}", csv_field(&t.axis), fmt_real(pt.value), risk_row(&pt.report)).unwrap();
                    }
                }
            }
            Ok(out)
        }
    }
}

pub fn emit_report(report: &Report, path: &Path, format: Format) -> Result<()> {
    std::fs::write(path, render_report(report, format)?)?;
    Ok(())
}

/// Reads a JSON report written by [`emit_report`].
pub fn read_report(path: &Path) -> Result<Report> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::RateBreakdown;
    use crate::harness::SweepPoint;
    use crate::matcore::Seed;

    fn sample_report() -> RiskReport {
        RiskReport {
            empirical_risk: 0.1 + 0.2,
            stderr: 1.0 / 3.0,
            theoretical_rate: RateBreakdown {
                oracle: 2.0,
                excess: std::f64::consts::PI,
                total: 2.0 + std::f64::consts::PI,
                formula: "a, b".into(),
                lower_bound_only: true,
            },
            ratio: Some(0.3 / (2.0 + std::f64::consts::PI)),
            replicates: 7,
            seed: Seed::new(u64::MAX, 3),
            heuristic_flags: vec!["x".into(), "y".into()],
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.json");
        let report = Report::Risk(sample_report());
        emit_report(&report, &path, Format::Json).unwrap();
        assert_eq!(read_report(&path).unwrap(), report);
        let table = Report::Sweep(SweepTable {
            axis: "k".into(),
            points: vec![SweepPoint { value: 8.0, report: sample_report() }],
        });
        emit_report(&table, &path, Format::Json).unwrap();
        assert_eq!(read_report(&path).unwrap(), table);
    }

    #[test]
    fn csv_layout() {
        let table = Report::Sweep(SweepTable {
            axis: "k".into(),
            points: (0..3).map(|i| SweepPoint { value: i as f64, report: sample_report() }).collect(),
        });
        let text = render_report(&table, Format::Csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].starts_with("axis,value,empirical_risk"));
        let first: f64 = lines[1].split(',').nth(2).unwrap().parse().unwrap();
        assert_eq!(first, 0.1 + 0.2);
        assert!(lines[1].contains("\"a, b\""));
    }

    #[test]
    fn unknown_format() {
        assert!(matches!("xml".parse::<Format>(), Err(Error::Config(_))));
        assert_eq!("csv".parse::<Format>().unwrap(), Format::Csv);
    }
}
