//! Report rows and their CSV/JSON serialization.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::config::Format;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    Pass,
    Fail,
    /// Reported without a tolerance rule.
    Info,
    /// Outside the region where a rule applies.
    Skip,
}

impl Flag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Flag::Pass => "pass",
            Flag::Fail => "fail",
            Flag::Info => "info",
            Flag::Skip => "skip",
        }
    }

    pub fn check(ok: bool) -> Flag {
        if ok {
            Flag::Pass
        } else {
            Flag::Fail
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub experiment: String,
    pub generator: String,
    pub f_id: String,
    /// `key=value` pairs joined by `;`.
    pub parameter: String,
    pub estimate: f64,
    pub se: f64,
    pub model: f64,
    pub flag: Flag,
}

pub const CSV_HEADER: &str = "experiment,generator,f_id,parameter,estimate,se,model,flag";

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_number(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Serializes rows in the given format.
pub fn emit_report(rows: &[ReportRow], format: Format) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::invalid("cannot emit an empty report"));
    }
    if let Some(r) = rows.iter().find(|r| !r.estimate.is_finite() || !r.se.is_finite()) {
        return Err(Error::invalid(format!(
            "row {}/{}/{} has a non-finite estimate or SE",
            r.experiment, r.f_id, r.parameter
        )));
    }
    match format {
        Format::Csv => {
            let mut out = String::with_capacity(64 * (rows.len() + 1));
            out.push_str(CSV_HEADER);
            out.push('\n');
            for r in rows {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    csv_field(&r.experiment),
                    csv_field(&r.generator),
                    csv_field(&r.f_id),
                    csv_field(&r.parameter),
                    fmt_number(r.estimate),
                    fmt_number(r.se),
                    fmt_number(r.model),
                    r.flag.as_str()
                )
                .unwrap();
            }
            Ok(out)
        }
        Format::Json => {
            // serde_json writes the shortest decimal that round-trips; a
            // non-finite model value becomes null.
            let mut s = serde_json::to_string_pretty(rows).map_err(|e| Error::invalid(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(estimate: f64) -> ReportRow {
        ReportRow {
            experiment: "e".into(),
            generator: "constant".into(),
            f_id: "const_m1".into(),
            parameter: "n=10".into(),
            estimate,
            se: 0.0,
            model: 1.0,
            flag: Flag::Pass,
        }
    }

    #[test]
    fn one_row_csv() {
        let csv = emit_report(&[row(1.0)], Format::Csv).unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(
            lines[1],
            "e,constant,const_m1,n=10,1.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0,pass"
        );
    }

    #[test]
    fn csv_numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 12345.678901234567, f64::MAX] {
            assert_eq!(fmt_number(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn json_round_trip_is_exact() {
        let rows = vec![row(0.1 + 0.2), row(std::f64::consts::PI), row(-1e-17)];
        let s = emit_report(&rows, Format::Json).unwrap();
        let back: Vec<ReportRow> = serde_json::from_str(&s).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(emit_report(&[], Format::Csv).is_err());
        assert!(emit_report(&[row(f64::NAN)], Format::Json).is_err());
    }

    #[test]
    fn quotes_fields_with_commas() {
        let mut r = row(1.0);
        r.parameter = "a=1,b=2".into();
        let csv = emit_report(&[r], Format::Csv).unwrap();
        assert!(csv.contains("\"a=1,b=2\""));
    }
}
