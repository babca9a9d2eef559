mod accept;
mod concentrate;
mod gap;
mod kernel;
mod schedule;
mod simulate;

use crate::cli::{Cli, Command, ScheduleConstants};
use crate::config::{load_file, resolve, Resolved};
use crate::emit::Run;
use crate::error::{core, CliError, CliResult};
use lie_anneal::annealing::{benchmark_schedule, make_schedule, BenchmarkPotential, CoolingSchedule, ScheduleOptions};
use lie_anneal::kernel::{build_mc_kernel, KernelModel};
use lie_anneal::{GroupElement, GroupModel};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

/// Runs one subcommand and returns the process exit code.
pub fn run(cli: Cli) -> CliResult<u8> {
    let base = match &cli.config {
        Some(p) => load_file(p)?,
        None => Map::new(),
    };
    let name = cli.command.name();
    let (seed, out) = (cli.seed, cli.out.as_deref());
    match &cli.command {
        Command::Simulate(cmd) => simulate::run(cmd, base, seed, out),
        Command::Kernel(p) => kernel::run(start(name, base, p, seed, out)?),
        Command::Gap(p) => gap::run(start(name, base, p, seed, out)?),
        Command::Schedule(p) => schedule::run(start(name, base, p, seed, out)?),
        Command::Concentrate(p) => concentrate::run(start(name, base, p, seed, out)?),
        Command::Accept(p) => accept::run(start(name, base, p, seed, out)?),
    }
}

fn start<P: Serialize + DeserializeOwned + Default>(
    name: &str,
    base: Map<String, Value>,
    flags: &P,
    seed: Option<u64>,
    out: Option<&std::path::Path>,
) -> CliResult<(P, Run)> {
    let Resolved {
        params,
        seed,
        out,
        config,
        hash,
    } = resolve(name, base, flags, seed, out)?;
    let run = Run::start(name, &out, config, hash, seed)?;
    Ok((params, run))
}

pub(crate) fn model(op: &'static str, id: Option<&str>, default: &str) -> CliResult<GroupModel> {
    GroupModel::parse(id.unwrap_or(default)).map_err(core(op))
}

/// Element from flat coordinates, or the identity.
pub(crate) fn element(op: &'static str, m: &GroupModel, coords: Option<&[f64]>) -> CliResult<GroupElement> {
    match coords {
        None => Ok(m.identity()),
        Some(c) => m.element(c).map_err(core(op)),
    }
}

pub(crate) fn points(op: &'static str, m: &GroupModel, flat: &[f64]) -> CliResult<Vec<GroupElement>> {
    let n = m.coord_len();
    if flat.is_empty() || !flat.len().is_multiple_of(n) {
        return Err(CliError::validation(
            op,
            format!(
                "invalid parameter `points`: expected a multiple of {n} coordinates for {m}, got {}",
                flat.len()
            ),
        ));
    }
    flat.chunks(n).map(|c| m.element(c).map_err(core(op))).collect()
}

pub(crate) fn positive(op: &str, name: &str, v: f64) -> CliResult<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CliError::validation(
            op,
            format!("invalid parameter `{name}`: must be a positive finite number, got {v}"),
        ))
    }
}

pub(crate) fn count(op: &str, name: &str, v: usize) -> CliResult<usize> {
    if v == 0 {
        Err(CliError::validation(
            op,
            format!("invalid parameter `{name}`: must be at least 1"),
        ))
    } else {
        Ok(v)
    }
}

pub(crate) fn increasing(op: &str, name: &str, v: &[f64]) -> CliResult<()> {
    if v.is_empty() || v.iter().any(|t| !(t.is_finite() && *t >= 0.0)) || v.windows(2).any(|w| w[1] < w[0]) {
        return Err(CliError::validation(
            op,
            format!("invalid parameter `{name}`: must be a non-empty, non-decreasing list of non-negative times"),
        ));
    }
    Ok(())
}

/// Closed-form kernel when the model has one, otherwise a Monte-Carlo grid
/// at `t`.
pub(crate) fn kernel_for(m: GroupModel, t: f64, seed: u64) -> lie_anneal::Result<KernelModel> {
    match KernelModel::closed_form(m) {
        Ok(k) => Ok(k),
        Err(_) => build_mc_kernel(m, t, 20_000, t / 100.0, None, seed),
    }
}

/// Schedule from explicit constants, or estimated from `bench` when any of
/// `D`, `K`, `N` is missing.
pub(crate) fn schedule_from(
    op: &'static str,
    m: &GroupModel,
    bench: &BenchmarkPotential,
    c: &ScheduleConstants,
    seed: u64,
) -> CliResult<(CoolingSchedule, Value)> {
    let opts = schedule_options(c);
    match (c.d, c.k, c.n) {
        (Some(d), Some(k), Some(n)) => {
            let s = make_schedule(d, k, n, opts).map_err(core(op))?;
            Ok((s, serde_json::json!({"source": "given"})))
        }
        _ => {
            let (s, inputs) = benchmark_schedule(m, bench, opts, seed).map_err(core(op))?;
            Ok((s, serde_json::json!({"source": "estimated", "inputs": inputs})))
        }
    }
}

pub(crate) fn schedule_options(c: &ScheduleConstants) -> ScheduleOptions {
    let d = ScheduleOptions::default();
    ScheduleOptions {
        margin: c.margin.unwrap_or(d.margin),
        r_min: c.r_min.unwrap_or(d.r_min),
    }
}

pub(crate) fn coord_header(m: &GroupModel) -> Vec<String> {
    (0..m.coord_len()).map(|c| format!("c{c}")).collect()
}
