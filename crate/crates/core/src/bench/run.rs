use std::collections::HashMap;

use rayon::prelude::*;

use super::{evaluate, BenchError, BenchmarkCase, EvaluationReport, RunSummary, SourceSinkSelection};
use crate::aql::Answer;
use crate::dispatch::Dispatcher;
use crate::Strictness;

/// Executes the generated query of every active case. Cases run in parallel;
/// the dispatcher serializes invocations of the same tool. Queries answered
/// before come from the answer cache without launching anything, which makes
/// re-runs incremental.
pub fn run_cases(
    cases: &[BenchmarkCase],
    dispatcher: &Dispatcher,
) -> Result<HashMap<String, (Answer, RunSummary)>, BenchError> {
    cases
        .par_iter()
        .filter(|c| c.active)
        .map(|case| {
            let (answer, run) = dispatcher.execute(&case.generated_query)?;
            Ok((case.id.clone(), (answer, RunSummary::from(&run))))
        })
        .collect()
}

pub fn run_benchmark(
    cases: &[BenchmarkCase],
    dispatcher: &Dispatcher,
    selection: Option<&SourceSinkSelection>,
    strictness: Strictness,
) -> Result<EvaluationReport, BenchError> {
    let answers = run_cases(cases, dispatcher)?;
    evaluate(cases, &answers, selection, strictness)
}
