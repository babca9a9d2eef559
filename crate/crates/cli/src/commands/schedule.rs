use super::{positive, schedule_options};
use crate::cli::{ScheduleAction, ScheduleParams};
use crate::emit::{Cell, Run, RunStatus};
use crate::error::{core, CliError, CliResult};
use lie_anneal::annealing::{make_schedule, u_bound_integrate, CoolingSchedule};
use serde_json::json;

const OP: &str = "schedule";

pub fn run((p, mut out): (ScheduleParams, Run)) -> CliResult<u8> {
    let c = &p.constants;
    let missing = |name: &str| CliError::validation(OP, format!("invalid parameter `{name}`: required"));
    let d = c.d.ok_or_else(|| missing("D"))?;
    let k = c.k.ok_or_else(|| missing("K"))?;
    let n = c.n.ok_or_else(|| missing("N"))?;
    let s = match (p.c, p.r) {
        (None, None) => make_schedule(d, k, n, schedule_options(c)),
        (Some(cc), Some(r)) => CoolingSchedule::new(cc, r, d, k, n),
        _ => {
            return Err(CliError::validation(
                OP,
                "invalid parameter `c`: give both `c` and `R` or neither",
            ))
        }
    }
    .map_err(core(OP))?;
    let summary = json!({"schedule": s, "c": s.c, "R": s.r, "ln_R": s.r.ln(), "eps0": s.epsilon(0.0),
        "admissible": s.flags.admissible()});

    match p.action.unwrap_or(ScheduleAction::Make) {
        ScheduleAction::Make => {
            out.json("schedule.json", &summary)?;
            say!(
                "{}",
                serde_json::to_string_pretty(&summary).expect("schedule serializes")
            );
        }
        ScheduleAction::UBound => {
            let u0 = p.u0.unwrap_or(1.0);
            let t_end = positive(OP, "t_end", p.t_end.unwrap_or(1e8))?;
            let dtau = positive(OP, "dtau", p.dtau.unwrap_or(1e-2))?;
            let tr = u_bound_integrate(u0, &s, t_end, dtau).map_err(core(OP))?;
            let rows: Vec<Vec<Cell>> = tr
                .times
                .iter()
                .zip(&tr.values)
                .map(|(t, u)| vec![(*t).into(), (*u).into()])
                .collect();
            out.csv("u_bound.csv", &["t", "u"], &rows)?;
            let report = json!({"schedule": summary, "u0": u0, "t_end": t_end, "final": tr.final_value(), "sup": tr.sup,
                "verdict": tr.verdict, "clipped": tr.clipped, "steps": tr.times.len() - 1});
            out.json("u_bound.json", &report)?;
            say!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
    }
    out.finish(RunStatus::Complete)?;
    Ok(0)
}
