use super::{count, element, increasing, model, positive, schedule_from};
use crate::cli::{ConcentrateParams, Mode};
use crate::emit::{Run, RunStatus};
use crate::error::{core, CliResult};
use lie_anneal::annealing::{concentration_report, make_benchmark_potential, BenchmarkMode, ConcentrationOptions};
use lie_anneal::rng::derive_seed;
use lie_anneal::GroupModel;
use serde_json::json;
use std::f64::consts::PI;

const OP: &str = "concentrate";

/// A start point far from the identity.
fn default_z0(m: &GroupModel) -> Vec<f64> {
    match m {
        GroupModel::Torus(d) => vec![PI; *d],
        GroupModel::Su2 => vec![0.0, 1.0, 0.0, 0.0],
        _ => vec![0.5, 0.5, 0.5],
    }
}

pub fn run((p, mut out): (ConcentrateParams, Run)) -> CliResult<u8> {
    let m = model(OP, p.model.as_deref(), "torus:2")?;
    let mode = match p.mode.unwrap_or(Mode::Smooth) {
        Mode::Smooth => BenchmarkMode::Smooth,
        Mode::Exact => BenchmarkMode::Exact,
    };
    let x0 = element(OP, &m, p.minimizer.as_deref())?;
    let z0 = element(OP, &m, Some(p.z0.clone().unwrap_or_else(|| default_z0(&m)).as_slice()))?;
    let times = p.times.clone().unwrap_or_else(|| vec![10.0, 100.0, 1000.0]);
    increasing(OP, "times", &times)?;
    let n_paths = count(OP, "n_paths", p.n_paths.unwrap_or(10_000))?;
    let n_gibbs = count(OP, "n_gibbs", p.n_gibbs.unwrap_or(20_000))?;
    let defaults = ConcentrationOptions::default();
    let dt = positive(OP, "dt", p.dt.unwrap_or(defaults.dt))?;
    let proposal_scale = positive(
        OP,
        "proposal_scale",
        p.proposal_scale.unwrap_or(defaults.proposal_scale),
    )?;
    if let Some(d) = &p.deltas {
        for v in d {
            positive(OP, "deltas", *v)?;
        }
    }
    let seed = out.seed();

    let bench = make_benchmark_potential(&m, &x0, mode).map_err(core(OP))?;
    let (schedule, source) = schedule_from(OP, &m, &bench, &p.schedule, derive_seed(seed, "schedule"))?;
    out.json("schedule.json", &json!({"schedule": schedule, "constants": source}))?;
    let opts = ConcentrationOptions {
        dt,
        delta_grid: p.deltas.clone(),
        gibbs_burn_in: p.burn_in.unwrap_or(defaults.gibbs_burn_in),
        proposal_scale,
        probe: Some((bench.field.clone(), bench.x0)),
    };
    let rep = concentration_report(
        &m,
        bench.field.clone(),
        &bench.label,
        &schedule,
        &z0,
        &times,
        n_paths,
        n_gibbs,
        &opts,
        derive_seed(seed, "report"),
    )
    .map_err(core(OP))?;
    rep.write_csv(&out.path("concentration.csv")).map_err(core(OP))?;
    out.adopt("concentration.csv")?;
    out.json("concentration.json", &rep)?;
    say!(
        "{m}: M̂ = {:.4}, {} violation(s), tail monotone {:?}, probe monotone {}",
        rep.m_hat,
        rep.violations.len(),
        rep.tail_monotone,
        rep.probe.as_ref().map(|t| t.monotone).unwrap_or(false)
    );
    out.finish(RunStatus::Complete)?;
    Ok(0)
}
