use std::collections::HashMap;
use std::fmt;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use super::{match_flows, BenchError, BenchmarkCase, Polarity, SourceSinkSelection};
use crate::aql::{print_query, Answer, Flow};
use crate::dispatch::{RunStatus, ToolRun};
use crate::Strictness;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Classification {
    TP,
    FN,
    FP,
    TN,
}

impl Classification {
    pub fn of(polarity: Polarity, matched: bool) -> Self {
        match (polarity, matched) {
            (Polarity::Positive, true) => Classification::TP,
            (Polarity::Positive, false) => Classification::FN,
            (Polarity::Negative, true) => Classification::FP,
            (Polarity::Negative, false) => Classification::TN,
        }
    }

    /// TP and TN cases are the successful ones.
    pub fn is_success(self) -> bool {
        matches!(self, Classification::TP | Classification::TN)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub tool: String,
    pub exit_status: RunStatus,
    pub wall_time_ms: u64,
    pub cached: bool,
    pub detail: Option<String>,
}

impl RunSummary {
    /// For answers supplied from files rather than produced by a run.
    pub fn external() -> Self {
        RunSummary { tool: "external".into(), exit_status: RunStatus::Success, wall_time_ms: 0, cached: false, detail: None }
    }
}

impl From<&ToolRun> for RunSummary {
    fn from(run: &ToolRun) -> Self {
        RunSummary {
            tool: run.tool.clone(),
            exit_status: run.exit_status,
            wall_time_ms: run.wall_time.as_millis().try_into().unwrap_or(u64::MAX),
            cached: run.cached,
            detail: run.detail.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseVerdict {
    pub case_id: String,
    pub classification: Classification,
    /// Present iff the classification is TP or FP.
    pub matched_flow: Option<Flow>,
    /// The run failed; the case was classified from an empty answer.
    pub degraded: bool,
    pub query: String,
    pub run: RunSummary,
}

mod ratio_text {
    use num_rational::Ratio;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(r: &Ratio<u64>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ratio<u64>, D::Error> {
        let text = String::deserialize(d)?;
        text.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub strictness: Strictness,
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    #[serde(with = "ratio_text")]
    pub precision: Ratio<u64>,
    #[serde(with = "ratio_text")]
    pub recall: Ratio<u64>,
    #[serde(with = "ratio_text")]
    pub f_measure: Ratio<u64>,
    /// Sorted by case id.
    pub verdicts: Vec<CaseVerdict>,
}

fn ratio(n: u64, d: u64) -> Ratio<u64> {
    if d == 0 {
        Ratio::from_integer(0)
    } else {
        Ratio::new(n, d)
    }
}

/// Precision, recall and F-measure, with 0/0 taken as 0.
pub fn metrics(tp: u64, fp: u64, fn_: u64) -> (Ratio<u64>, Ratio<u64>, Ratio<u64>) {
    let p = ratio(tp, tp + fp);
    let r = ratio(tp, tp + fn_);
    let sum = p + r;
    let f = if sum == Ratio::from_integer(0) { sum } else { Ratio::from_integer(2) * p * r / sum };
    (p, r, f)
}

impl EvaluationReport {
    pub fn from_verdicts(strictness: Strictness, mut verdicts: Vec<CaseVerdict>) -> Self {
        verdicts.sort_by(|a, b| a.case_id.cmp(&b.case_id));
        let count = |c| verdicts.iter().filter(|v| v.classification == c).count() as u64;
        let (tp, fp, tn, fn_) =
            (count(Classification::TP), count(Classification::FP), count(Classification::TN), count(Classification::FN));
        let (precision, recall, f_measure) = metrics(tp, fp, fn_);
        EvaluationReport { strictness, tp, fp, tn, fn_, precision, recall, f_measure, verdicts }
    }

    pub fn verdict(&self, case_id: &str) -> Option<&CaseVerdict> {
        self.verdicts.iter().find(|v| v.case_id == case_id)
    }

    /// True when the stored metrics equal those recomputed from the counts.
    pub fn is_consistent(&self) -> bool {
        (self.precision, self.recall, self.f_measure) == metrics(self.tp, self.fp, self.fn_)
            && self.verdicts.len() as u64 == self.tp + self.fp + self.tn + self.fn_
    }
}

pub(crate) fn classify(
    case: &BenchmarkCase,
    actual: &Answer,
    run: RunSummary,
    selection: Option<&SourceSinkSelection>,
    strictness: Strictness,
) -> CaseVerdict {
    let degraded = !run.exit_status.is_success();
    let matched_flow = match_flows(&case.expected, actual, selection, strictness);
    CaseVerdict {
        case_id: case.id.clone(),
        classification: Classification::of(case.polarity, matched_flow.is_some()),
        matched_flow,
        degraded,
        query: print_query(&case.generated_query),
        run,
    }
}

/// Classifies every active case. Inactive cases are skipped.
pub fn evaluate(
    cases: &[BenchmarkCase],
    answers: &HashMap<String, (Answer, RunSummary)>,
    selection: Option<&SourceSinkSelection>,
    strictness: Strictness,
) -> Result<EvaluationReport, BenchError> {
    let mut verdicts = Vec::new();
    for case in cases.iter().filter(|c| c.active) {
        let (answer, run) = answers.get(&case.id).ok_or_else(|| BenchError::MissingAnswer(case.id.clone()))?;
        verdicts.push(classify(case, answer, run.clone(), selection, strictness));
    }
    Ok(EvaluationReport::from_verdicts(strictness, verdicts))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: u64, d: u64) -> Ratio<u64> {
        Ratio::new(n, d)
    }

    #[test]
    fn metric_arithmetic() {
        assert_eq!(metrics(1, 0, 0), (r(1, 1), r(1, 1), r(1, 1)));
        assert_eq!(metrics(0, 0, 1), (r(0, 1), r(0, 1), r(0, 1)));
        assert_eq!(metrics(0, 0, 0), (r(0, 1), r(0, 1), r(0, 1)));
        assert_eq!(metrics(1, 1, 0), (r(1, 2), r(1, 1), r(2, 3)));
        assert_eq!(metrics(3, 1, 2), (r(3, 4), r(3, 5), r(2, 3)));
    }

    #[test]
    fn classification_table() {
        assert_eq!(Classification::of(Polarity::Positive, true), Classification::TP);
        assert_eq!(Classification::of(Polarity::Positive, false), Classification::FN);
        assert_eq!(Classification::of(Polarity::Negative, true), Classification::FP);
        assert_eq!(Classification::of(Polarity::Negative, false), Classification::TN);
    }

    proptest::proptest! {
        #[test]
        fn metric_identities(tp in 0u64..50, fp in 0u64..50, fn_ in 0u64..50) {
            let (p, rc, f) = metrics(tp, fp, fn_);
            let one = Ratio::from_integer(1);
            let zero = Ratio::from_integer(0);
            proptest::prop_assert!(p <= one && rc <= one && f <= one);
            proptest::prop_assert_eq!(f == zero, tp == 0);
            proptest::prop_assert_eq!(f == one, tp > 0 && fp == 0 && fn_ == 0);
            // F equals the closed form 2tp / (2tp + fp + fn).
            if tp > 0 {
                proptest::prop_assert_eq!(f, Ratio::new(2 * tp, 2 * tp + fp + fn_));
            }
        }
    }
}
