use super::{count, element, kernel_for, model, positive};
use crate::cli::{GapMethod, GapParams, Mode};
use crate::emit::{Cell, Run, RunStatus};
use crate::error::{core, CliResult};
use lie_anneal::annealing::{make_benchmark_potential, BenchmarkMode};
use lie_anneal::dynamics::diffusion_endpoints;
use lie_anneal::functional::{
    estimate_d, estimate_dm_constant, estimate_spectral_gap, gap_from_dm, perturbed_gap_bound, TestFunctionDictionary,
    DEFAULT_DM_TIMES,
};
use lie_anneal::rng::derive_seed;
use lie_anneal::GroupModel;
use serde_json::json;

const OP: &str = "gap";

pub fn run((p, mut out): (GapParams, Run)) -> CliResult<u8> {
    let m = model(OP, p.model.as_deref(), "torus:1")?;
    let method = p.method.unwrap_or(GapMethod::Rayleigh);
    let t = positive(OP, "t", p.t.unwrap_or(1.0))?;
    let dt = positive(OP, "dt", p.dt.unwrap_or(1e-2))?;
    let dict = TestFunctionDictionary::by_id(m, p.dictionary.as_deref().unwrap_or("standard")).map_err(core(OP))?;
    let nil = m == GroupModel::HeisenbergNilmanifold;
    let dm_times = p.dm_times.clone().unwrap_or_else(|| {
        if nil {
            vec![0.001, 0.01, 0.1, 0.5]
        } else {
            DEFAULT_DM_TIMES.to_vec()
        }
    });
    let seed = out.seed();

    let report = match method {
        GapMethod::Rayleigh => {
            let n = count(OP, "n_paths", p.n_paths.unwrap_or(100_000))?;
            let law = diffusion_endpoints(&m, &m.identity(), t, dt, n, derive_seed(seed, "law")).map_err(core(OP))?;
            let g = estimate_spectral_gap(&m, &law, &dict).map_err(core(OP))?;
            json!({"method": method, "model": m.id(), "t": t, "n_paths": n, "dictionary": dict.id, "gap": g.value, "estimate": g})
        }
        GapMethod::Dm => {
            let n = count(OP, "n_paths", p.n_paths.unwrap_or(if nil { 4_000 } else { 20_000 }))?;
            let dm = estimate_dm_constant(&m, &dict, &dm_times, n, dt, derive_seed(seed, "dm")).map_err(core(OP))?;
            let a = gap_from_dm(dm.k_hat, t).map_err(core(OP))?;
            let rows: Vec<Vec<Cell>> = dm
                .table
                .iter()
                .map(|r| {
                    vec![
                        r.function.clone().into(),
                        r.t.into(),
                        r.numerator.into(),
                        r.denominator.into(),
                        r.ratio.into(),
                        r.standard_error.into(),
                        r.skipped.into(),
                    ]
                })
                .collect();
            out.csv(
                "dm_table.csv",
                &[
                    "function",
                    "t",
                    "numerator",
                    "denominator",
                    "ratio",
                    "standard_error",
                    "skipped",
                ],
                &rows,
            )?;
            json!({"method": method, "model": m.id(), "t": t, "n_paths": n, "a_t": a.value, "k_hat": dm.k_hat,
                "estimate": a, "dm": dm})
        }
        GapMethod::Perturbed => {
            let eps = positive(OP, "eps", p.eps.unwrap_or(1.0))?;
            let mode = match p.mode.unwrap_or(Mode::Smooth) {
                Mode::Smooth => BenchmarkMode::Smooth,
                Mode::Exact => BenchmarkMode::Exact,
            };
            let x0 = element(OP, &m, p.minimizer.as_deref())?;
            let n_probe = count(OP, "n_probe", p.n_probe.unwrap_or(2_000))?;
            let n = count(OP, "n_paths", p.n_paths.unwrap_or(if nil { 4_000 } else { 20_000 }))?;
            let bench = make_benchmark_potential(&m, &x0, mode).map_err(core(OP))?;
            let d = estimate_d(
                &m,
                bench.field.as_ref(),
                &bench.x0,
                &[eps],
                |t| kernel_for(m, t, derive_seed(seed, "kernel")),
                n_probe,
                derive_seed(seed, "d"),
            )
            .map_err(core(OP))?;
            let dm = estimate_dm_constant(&m, &dict, &dm_times, n, dt, derive_seed(seed, "dm")).map_err(core(OP))?;
            let a = 1.0 / (2.0 * dm.k_hat * eps * eps);
            let d_eps = d.d_hat / (eps * eps);
            let g = perturbed_gap_bound(a, d_eps).map_err(core(OP))?;
            json!({"method": method, "model": m.id(), "eps": eps, "potential": bench.label, "k_hat": dm.k_hat,
                "d_hat": d.d_hat, "D_eps": d_eps, "a_eps": a, "gap": g.value, "estimate": g, "d_report": d})
        }
    };
    out.json("gap.json", &report)?;
    say!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    out.finish(RunStatus::Complete)?;
    Ok(0)
}
