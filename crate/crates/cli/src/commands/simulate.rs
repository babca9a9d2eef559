use super::{count, element, increasing, kernel_for, model, positive, schedule_from};
use crate::cli::{PotentialKind, SimKind, SimulateCmd, SimulateParams};
use crate::config::{resolve, DEFAULT_OUT};
use crate::emit::{Manifest, Progress, Run, RunStatus};
use crate::error::{core, CliError, CliResult};
use lie_anneal::annealing::{make_benchmark_potential, BenchmarkMode};
use lie_anneal::dynamics::{simulate_block, NoiseScale, PathEnsemble, SdeSpec};
use lie_anneal::kernel::{KernelModel, NaturalPotential};
use lie_anneal::rng::derive_seed;
use lie_anneal::{GroupElement, ScalarField};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

const OP: &str = "simulate";
const CSV: &str = "ensemble.csv";
const SIDECAR: &str = "ensemble.json";

struct Plan {
    spec: SdeSpec,
    x0: GroupElement,
    times: Vec<f64>,
    n_paths: usize,
}

pub fn run(cmd: &SimulateCmd, base: Map<String, Value>, seed: Option<u64>, out: Option<&Path>) -> CliResult<u8> {
    let interval = Duration::from_secs_f64(positive(
        OP,
        "checkpoint_interval",
        cmd.checkpoint_interval.max(f64::MIN_POSITIVE),
    )?);
    let block = count(OP, "block_size", cmd.block_size)?;

    let (r, previous) = if cmd.resume {
        let dir = match (out, base.get("out")) {
            (Some(o), _) => o.to_path_buf(),
            (None, Some(Value::String(s))) => PathBuf::from(s),
            _ => PathBuf::from(DEFAULT_OUT),
        };
        let man = Manifest::load(&dir)?;
        if man.command != OP {
            return Err(CliError::validation(
                "resume",
                format!("`{}` holds a `{}` run", dir.display(), man.command),
            ));
        }
        let mut merged = man.config.clone();
        merged.extend(base);
        let r = resolve(OP, merged, &cmd.params, seed, Some(&dir))?;
        if r.hash != man.config_hash {
            return Err(CliError::validation(
                "resume",
                "configuration differs from the run recorded in the manifest",
            ));
        }
        (r, Some(man))
    } else {
        (resolve(OP, base, &cmd.params, seed, out)?, None)
    };

    let mut run = match previous {
        Some(man) if man.status == RunStatus::Complete => {
            say!("run in {} is already complete", r.out.display());
            return Ok(0);
        }
        Some(man) => Run::reopen(&r.out, man),
        None => Run::start(OP, &r.out, r.config.clone(), r.hash.clone(), r.seed)?,
    };
    let plan = plan(&r.params, &mut run)?;
    let sim_seed = derive_seed(r.seed, "simulate");

    let mut ensemble = if cmd.resume && run.path(SIDECAR).exists() {
        let e = PathEnsemble::load(&run.path(CSV), &run.path(SIDECAR)).map_err(core("resume"))?;
        if e.seed != sim_seed || e.times != plan.times || e.n_paths > plan.n_paths {
            return Err(CliError::validation(
                "resume",
                "partial ensemble does not belong to this run",
            ));
        }
        Some(e)
    } else {
        None
    };
    let mut done = ensemble.as_ref().map(|e| e.n_paths).unwrap_or(0);
    let progress = |done| Progress {
        completed_paths: done,
        total_paths: plan.n_paths,
    };
    let mut last = Instant::now();
    let mut blocks = 0;
    while done < plan.n_paths {
        let end = (done + block).min(plan.n_paths);
        let b = simulate_block(&plan.spec, &plan.x0, &plan.times, done..end, sim_seed).map_err(core(OP))?;
        match &mut ensemble {
            None => ensemble = Some(b),
            Some(e) => e.append(b).map_err(core(OP))?,
        }
        done = end;
        blocks += 1;
        let halt = cmd.halt_after_blocks == Some(blocks);
        if done < plan.n_paths && (halt || last.elapsed() >= interval) {
            write(&mut run, ensemble.as_ref().expect("at least one block ran"))?;
            run.checkpoint(progress(done))?;
            log::info!("checkpoint: {done} of {} paths", plan.n_paths);
            last = Instant::now();
            if halt {
                eprintln!("halted after {done} of {} paths; continue with --resume", plan.n_paths);
                return Ok(0);
            }
        }
    }
    let e = ensemble.expect("n_paths is at least 1");
    write(&mut run, &e)?;
    say!(
        "{} paths of {} recorded at {:?} in {}",
        e.n_paths,
        e.model,
        e.times,
        run.path(CSV).display()
    );
    run.checkpoint(progress(done))?;
    run.finish(RunStatus::Complete)?;
    Ok(0)
}

fn write(run: &mut Run, e: &PathEnsemble) -> CliResult<()> {
    e.write_csv(&run.path(CSV))
        .map_err(|err| CliError::io(OP, &run.path(CSV), err))?;
    e.write_sidecar(&run.path(SIDECAR))
        .map_err(|err| CliError::io(OP, &run.path(SIDECAR), err))?;
    run.adopt(CSV)?;
    run.adopt(SIDECAR)
}

fn plan(p: &SimulateParams, run: &mut Run) -> CliResult<Plan> {
    let m = model(OP, p.model.as_deref(), "torus:1")?;
    let kind = p.kind.unwrap_or(SimKind::Diffusion);
    let x0 = element(OP, &m, p.x0.as_deref())?;
    let times = p.times.clone().unwrap_or_else(|| match kind {
        SimKind::Anneal => vec![10.0, 100.0, 1000.0],
        _ => vec![1.0],
    });
    increasing(OP, "times", &times)?;
    let dt = positive(OP, "dt", p.dt.unwrap_or(1e-3))?;
    let n_paths = count(OP, "n_paths", p.n_paths.unwrap_or(1000))?;
    let budget = positive(OP, "max_path_steps", p.max_path_steps.unwrap_or(1e11))?;
    let horizon = times.last().copied().unwrap_or(0.0);
    let steps = n_paths as f64 * (horizon / dt).ceil();
    if steps > budget {
        return Err(CliError::validation(
            OP,
            format!("invalid parameter `n_paths`: {steps:.3e} path steps exceed max_path_steps = {budget:.3e}"),
        ));
    }
    let seed = run.seed();
    let potential = p.potential.unwrap_or(match kind {
        SimKind::Anneal => PotentialKind::Benchmark,
        _ => PotentialKind::Natural,
    });
    let minimizer = element(OP, &m, p.minimizer.as_deref())?;
    let benchmark = |mode| make_benchmark_potential(&m, &minimizer, mode).map_err(core(OP));

    let spec = match kind {
        SimKind::Diffusion => SdeSpec::diffusion(m, dt),
        SimKind::Ou => {
            let eps = positive(OP, "eps", p.eps.unwrap_or(1.0))?;
            let (u, label): (Arc<dyn ScalarField>, String) = match potential {
                PotentialKind::Natural => {
                    let tau = positive(OP, "tau", p.tau.unwrap_or(0.5))?;
                    let km = match &p.grid {
                        Some(h) => KernelModel::load_grid(h, &h.with_extension("csv")).map_err(|e| {
                            CliError::validation(OP, format!("cannot load grid `{}`: {e}", h.display()))
                        })?,
                        None => kernel_for(m, tau, derive_seed(seed, "kernel")).map_err(core(OP))?,
                    };
                    let w = NaturalPotential::new(Arc::new(km), tau).map_err(core(OP))?;
                    (Arc::new(w), format!("natural(tau={tau})"))
                }
                PotentialKind::Benchmark => {
                    let b = benchmark(BenchmarkMode::Smooth)?;
                    (b.field, b.label)
                }
                PotentialKind::BenchmarkExact => {
                    let b = benchmark(BenchmarkMode::Exact)?;
                    (b.field, b.label)
                }
            };
            SdeSpec::diffusion(m, dt)
                .with_potential(u, label)
                .with_noise(NoiseScale::Constant { eps })
        }
        SimKind::Anneal => {
            let mode = match potential {
                PotentialKind::Benchmark => BenchmarkMode::Smooth,
                PotentialKind::BenchmarkExact => BenchmarkMode::Exact,
                PotentialKind::Natural => {
                    return Err(CliError::validation(
                        OP,
                        "invalid parameter `potential`: annealing runs use a benchmark potential",
                    ))
                }
            };
            let b = benchmark(mode)?;
            let (schedule, source) = schedule_from(OP, &m, &b, &p.schedule, derive_seed(seed, "schedule"))?;
            if !schedule.flags.admissible() {
                log::warn!("schedule outside the admissible range: {:?}", schedule.flags);
            }
            run.json("schedule.json", &json!({"schedule": schedule, "constants": source}))?;
            let mut spec = SdeSpec::diffusion(m, dt)
                .with_potential(b.field, b.label)
                .with_noise(NoiseScale::Schedule { schedule });
            spec.cap_dt_by_noise = true;
            spec
        }
    };
    Ok(Plan {
        spec,
        x0,
        times,
        n_paths,
    })
}
