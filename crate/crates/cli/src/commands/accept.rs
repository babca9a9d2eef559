use crate::cli::AcceptParams;
use crate::emit::{Cell, Run, RunStatus};
use crate::error::{CliError, CliResult, EXIT_ACCEPTANCE};
use lie_anneal::acceptance::{run_criterion, CriterionOutcome, CRITERIA};
use serde_json::json;

const OP: &str = "accept";

pub fn run((p, mut out): (AcceptParams, Run)) -> CliResult<u8> {
    let ids = p
        .criteria
        .clone()
        .unwrap_or_else(|| CRITERIA.iter().map(|c| c.0).collect());
    if ids.is_empty() {
        return Err(CliError::validation(OP, "invalid parameter `criteria`: empty"));
    }
    for id in &ids {
        if !CRITERIA.iter().any(|c| c.0 == *id) {
            return Err(CliError::validation(
                OP,
                format!(
                    "invalid parameter `criteria`: {id} is not one of 1..={}",
                    CRITERIA.len()
                ),
            ));
        }
    }
    let seed = out.seed();
    let mut outcomes = Vec::new();
    for id in ids {
        let o = match run_criterion(id, seed) {
            Ok(o) => o,
            Err(e) => CriterionOutcome {
                id,
                title: CRITERIA
                    .iter()
                    .find(|c| c.0 == id)
                    .map(|c| c.1)
                    .unwrap_or_default()
                    .to_string(),
                passed: false,
                summary: format!("error: {e}"),
                details: json!(null),
                seconds: 0.0,
            },
        };
        say!("{}", o.line());
        outcomes.push(o);
    }
    let rows: Vec<Vec<Cell>> = outcomes
        .iter()
        .map(|o| {
            vec![
                (o.id as usize).into(),
                o.title.as_str().into(),
                o.passed.into(),
                o.summary.as_str().into(),
            ]
        })
        .collect();
    out.csv("acceptance.csv", &["criterion", "title", "passed", "summary"], &rows)?;
    out.json("acceptance.json", &outcomes)?;
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    say!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    out.finish(RunStatus::Complete)?;
    Ok(if failed > 0 { EXIT_ACCEPTANCE } else { 0 })
}
