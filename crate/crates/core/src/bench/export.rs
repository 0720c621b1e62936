//! Report serializations. All three are deterministic for a given report;
//! their layouts are fixed by golden files under `fixtures/golden`.

use std::fmt::Write as _;
use std::str::FromStr;

use num_rational::Ratio;

use super::{BenchError, CaseVerdict, EvaluationReport};
use crate::aql::print_reference;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    Json,
    Csv,
    Sql,
}

impl FromStr for ExportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(ExportFormat::Json),
            "csv" => Ok(ExportFormat::Csv),
            "sql" => Ok(ExportFormat::Sql),
            other => Err(format!("unknown export format `{other}` (json, csv, sql)")),
        }
    }
}

impl ExportFormat {
    pub fn media_type(self) -> &'static str {
        match self {
            ExportFormat::Json => "application/json",
            ExportFormat::Csv => "text/csv",
            ExportFormat::Sql => "application/sql",
        }
    }
}

const COLUMNS: [&str; 10] = [
    "case_id",
    "classification",
    "degraded",
    "tool",
    "exit_status",
    "cached",
    "wall_time_ms",
    "matched_from",
    "matched_to",
    "detail",
];

/// Column values of one verdict; `None` is an empty CSV field or SQL NULL.
fn row(v: &CaseVerdict) -> [Option<String>; 10] {
    let bit = |b: bool| Some(if b { "1" } else { "0" }.to_string());
    [
        Some(v.case_id.clone()),
        Some(v.classification.to_string()),
        bit(v.degraded),
        Some(v.run.tool.clone()),
        Some(format!("{:?}", v.run.exit_status)),
        bit(v.run.cached),
        Some(v.run.wall_time_ms.to_string()),
        v.matched_flow.as_ref().map(|f| print_reference(&f.from)),
        v.matched_flow.as_ref().map(|f| print_reference(&f.to)),
        v.run.detail.clone(),
    ]
}

fn csv(report: &EvaluationReport) -> Vec<u8> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(COLUMNS).expect("writing to Vec cannot fail");
    for v in &report.verdicts {
        w.write_record(row(v).iter().map(|c| c.as_deref().unwrap_or(""))).expect("writing to Vec cannot fail");
    }
    w.into_inner().expect("writing to Vec cannot fail")
}

fn sql_text(s: &str) -> String {
    format!("'{}'", s.replace('\'', "''"))
}

fn decimal(r: Ratio<u64>) -> String {
    format!("{:.6}", *r.numer() as f64 / *r.denom() as f64)
}

fn sql(report: &EvaluationReport) -> Vec<u8> {
    let mut out = String::new();
    out.push_str("BEGIN TRANSACTION;\n");
    out.push_str(
        "CREATE TABLE verdicts (\n  case_id TEXT PRIMARY KEY,\n  classification TEXT NOT NULL,\n  degraded INTEGER NOT NULL,\n  tool TEXT NOT NULL,\n  exit_status TEXT NOT NULL,\n  cached INTEGER NOT NULL,\n  wall_time_ms INTEGER NOT NULL,\n  matched_from TEXT,\n  matched_to TEXT,\n  detail TEXT\n);\n",
    );
    out.push_str(
        "CREATE TABLE aggregates (\n  strictness TEXT NOT NULL,\n  tp INTEGER NOT NULL,\n  fp INTEGER NOT NULL,\n  tn INTEGER NOT NULL,\n  fn INTEGER NOT NULL,\n  precision TEXT NOT NULL,\n  recall TEXT NOT NULL,\n  f_measure TEXT NOT NULL,\n  precision_value REAL NOT NULL,\n  recall_value REAL NOT NULL,\n  f_measure_value REAL NOT NULL\n);\n",
    );
    // Integer columns are written bare, everything else quoted.
    let numeric = [false, false, true, false, false, true, true, false, false, false];
    for v in &report.verdicts {
        let values: Vec<String> = row(v)
            .into_iter()
            .zip(numeric)
            .map(|(c, n)| match c {
                None => "NULL".to_string(),
                Some(c) if n => c,
                Some(c) => sql_text(&c),
            })
            .collect();
        writeln!(out, "INSERT INTO verdicts VALUES ({});", values.join(", ")).unwrap();
    }
    let ratio = |r: Ratio<u64>| sql_text(&format!("{}/{}", r.numer(), r.denom()));
    writeln!(
        out,
        "INSERT INTO aggregates VALUES ({}, {}, {}, {}, {}, {}, {}, {}, {}, {}, {});",
        sql_text(&report.strictness.to_string()),
        report.tp,
        report.fp,
        report.tn,
        report.fn_,
        ratio(report.precision),
        ratio(report.recall),
        ratio(report.f_measure),
        decimal(report.precision),
        decimal(report.recall),
        decimal(report.f_measure),
    )
    .unwrap();
    out.push_str("COMMIT;\n");
    out.into_bytes()
}

pub fn export_report(report: &EvaluationReport, format: ExportFormat) -> Vec<u8> {
    match format {
        ExportFormat::Json => {
            let mut bytes = serde_json::to_vec_pretty(report).expect("reports always serialize");
            bytes.push(b'\n');
            bytes
        }
        ExportFormat::Csv => csv(report),
        ExportFormat::Sql => sql(report),
    }
}

/// Reads a JSON export back. The stored metrics must agree with the counts.
pub fn import_report_json(bytes: &[u8]) -> Result<EvaluationReport, BenchError> {
    let report: EvaluationReport = serde_json::from_slice(bytes).map_err(|e| BenchError::Import(e.to_string()))?;
    if !report.is_consistent() {
        return Err(BenchError::Import("metrics do not match the verdict counts".into()));
    }
    Ok(report)
}
