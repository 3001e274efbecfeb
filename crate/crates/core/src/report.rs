//! Check rows, CSV/JSON report emission and exit-code policy.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{LabError, Result};
use crate::varform::VariationReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    /// Disagreement with a published display; informational unless strict.
    Finding,
    Info,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Finding => "finding",
            Verdict::Info => "info",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub suite: String,
    pub id: String,
    /// Short description of the identity being checked.
    pub anchor: String,
    pub case: String,
    pub value: f64,
    pub reference: f64,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub note: String,
}

impl ReportRow {
    /// Row whose verdict is `residual ≤ tolerance`.
    #[allow(clippy::too_many_arguments)]
    pub fn check(
        suite: &str,
        id: &str,
        anchor: &str,
        case: &str,
        value: f64,
        reference: f64,
        residual: f64,
        tolerance: f64,
    ) -> Self {
        Self {
            suite: suite.into(),
            id: id.into(),
            anchor: anchor.into(),
            case: case.into(),
            value,
            reference,
            residual,
            tolerance,
            verdict: if residual <= tolerance { Verdict::Pass } else { Verdict::Fail },
            note: String::new(),
        }
    }

    /// Boolean condition with no numeric residual.
    pub fn condition(suite: &str, id: &str, anchor: &str, case: &str, value: f64, reference: f64, ok: bool) -> Self {
        let mut r = Self::check(suite, id, anchor, case, value, reference, 0.0, 0.0);
        r.verdict = if ok { Verdict::Pass } else { Verdict::Fail };
        r
    }

    pub fn info(suite: &str, id: &str, anchor: &str, case: &str, value: f64, reference: f64) -> Self {
        let mut r = Self::check(suite, id, anchor, case, value, reference, f64::NAN, f64::NAN);
        r.verdict = Verdict::Info;
        r
    }

    pub fn from_variation(suite: &str, anchor: &str, v: &VariationReport) -> Self {
        let mut r = Self::check(suite, &v.id, anchor, &v.case, v.formula, v.oracle, v.rel_residual, v.tolerance);
        r.verdict = if v.pass { Verdict::Pass } else { Verdict::Fail };
        let mut note = String::new();
        if let Some(c) = v.fitted_coefficient {
            let _ = write!(note, "display disagrees with oracle; fitted factor {}", fmt_f64(c));
        }
        if !v.pass && !v.terms.is_empty() {
            for (name, val) in &v.terms {
                let _ = write!(note, "{}{name}={}", if note.is_empty() { "" } else { "; " }, fmt_f64(*val));
            }
        }
        r.note = note;
        r
    }

    /// Failed rows become findings.
    pub fn as_finding(mut self) -> Self {
        if self.verdict == Verdict::Fail {
            self.verdict = Verdict::Finding;
        }
        self
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

/// 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RowRef {
    pub suite: String,
    pub id: String,
    pub case: String,
    pub value: String,
    pub reference: String,
    pub residual: String,
    pub tolerance: String,
    pub note: String,
}

impl From<&ReportRow> for RowRef {
    fn from(r: &ReportRow) -> Self {
        Self {
            suite: r.suite.clone(),
            id: r.id.clone(),
            case: r.case.clone(),
            value: fmt_f64(r.value),
            reference: fmt_f64(r.reference),
            residual: fmt_f64(r.residual),
            tolerance: fmt_f64(r.tolerance),
            note: r.note.clone(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Counts {
    pub pass: usize,
    pub fail: usize,
    pub finding: usize,
    pub info: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub command: String,
    pub seed: u64,
    pub strict_paper: bool,
    pub settings: serde_json::Value,
    pub counts: Counts,
    pub failures: Vec<RowRef>,
    pub findings: Vec<RowRef>,
    pub exit_code: i32,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub command: String,
    pub seed: u64,
    pub settings: serde_json::Value,
    pub rows: Vec<ReportRow>,
}

pub const CSV_HEADER: [&str; 10] = [
    "suite", "id", "anchor", "case", "value", "reference", "residual", "tolerance", "verdict", "note",
];

impl Report {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(CSV_HEADER).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record([
                r.suite.as_str(),
                r.id.as_str(),
                r.anchor.as_str(),
                r.case.as_str(),
                &fmt_f64(r.value),
                &fmt_f64(r.reference),
                &fmt_f64(r.residual),
                &fmt_f64(r.tolerance),
                r.verdict.label(),
                r.note.as_str(),
            ])
            .map_err(csv_err)?;
        }
        let body = w.into_inner().map_err(|e| LabError::Io(e.to_string()))?;
        let body = String::from_utf8(body).map_err(|e| LabError::Io(e.to_string()))?;
        Ok(format!("# sigmalab {} seed={}\n{body}", self.command, self.seed))
    }

    pub fn summary(&self, strict_paper: bool) -> Summary {
        let mut counts = Counts::default();
        let mut failures = Vec::new();
        let mut findings = Vec::new();
        for r in &self.rows {
            match r.verdict {
                Verdict::Pass => counts.pass += 1,
                Verdict::Fail => {
                    counts.fail += 1;
                    failures.push(RowRef::from(r));
                }
                Verdict::Finding => {
                    counts.finding += 1;
                    findings.push(RowRef::from(r));
                }
                Verdict::Info => counts.info += 1,
            }
        }
        let exit_code = if counts.fail > 0 || (strict_paper && counts.finding > 0) { 2 } else { 0 };
        Summary {
            command: self.command.clone(),
            seed: self.seed,
            strict_paper,
            settings: self.settings.clone(),
            counts,
            failures,
            findings,
            exit_code,
        }
    }

    /// Writes `report.csv` and `summary.json` into `dir`.
    pub fn write(&self, dir: &Path, strict_paper: bool) -> Result<Summary> {
        std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
        let summary = self.summary(strict_paper);
        let csv_path = dir.join("report.csv");
        std::fs::write(&csv_path, self.to_csv()?).map_err(|e| LabError::Io(format!("{}: {e}", csv_path.display())))?;
        let json = serde_json::to_string_pretty(&summary).map_err(|e| LabError::Io(e.to_string()))?;
        let json_path = dir.join("summary.json");
        std::fs::write(&json_path, json + "\n").map_err(|e| LabError::Io(format!("{}: {e}", json_path.display())))?;
        Ok(summary)
    }
}

fn csv_err(e: csv::Error) -> LabError {
    LabError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_round_trips() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, std::f64::consts::PI] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_f64(1.0), "1.0000000000000000e0");
    }

    #[test]
    fn exit_policy() {
        let mut report = Report {
            command: "selftest".into(),
            seed: 1,
            settings: serde_json::Value::Null,
            rows: vec![ReportRow::check("s", "a", "x", "c", 1.0, 1.0, 0.0, 1e-9)],
        };
        assert_eq!(report.summary(false).exit_code, 0);
        report.rows.push(ReportRow::check("s", "b", "x", "c", 1.0, 2.0, 1.0, 1e-9).as_finding());
        assert_eq!(report.summary(false).exit_code, 0);
        assert_eq!(report.summary(true).exit_code, 2);
        report.rows.push(ReportRow::check("s", "c", "x", "c", 1.0, 2.0, 1.0, 1e-9));
        let s = report.summary(false);
        assert_eq!((s.exit_code, s.counts.fail, s.counts.finding), (2, 1, 1));
        let csv = report.to_csv().unwrap();
        assert!(csv.starts_with("# sigmalab selftest seed=1\nsuite,id,anchor"));
    }
}
