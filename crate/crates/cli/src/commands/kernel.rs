use super::{coord_header, count, kernel_for, model, points, positive};
use crate::cli::{KernelAction, KernelParams};
use crate::emit::{Cell, Run, RunStatus};
use crate::error::{core, CliError, CliResult};
use lie_anneal::kernel::{build_mc_kernel, varadhan_diagnostic, KernelModel};
use lie_anneal::rng::derive_seed;
use lie_anneal::{GroupElement, GroupModel};
use serde_json::json;

const OP: &str = "kernel";

fn default_varadhan_times(m: &GroupModel) -> Vec<f64> {
    match m {
        GroupModel::Torus(_) => vec![0.1, 0.05, 0.02, 0.01, 0.005, 0.002],
        _ => vec![0.05, 0.03, 0.02, 0.01, 0.005, 0.003],
    }
}

pub fn run((p, mut out): (KernelParams, Run)) -> CliResult<u8> {
    let m = model(OP, p.model.as_deref(), "torus:1")?;
    let t = positive(OP, "t", p.t.unwrap_or(0.5))?;
    let n_paths = count(OP, "n_paths", p.n_paths.unwrap_or(100_000))?;
    let dt = positive(OP, "dt", p.dt.unwrap_or(t / 100.0))?;
    if let Some(b) = p.bandwidth {
        positive(OP, "bandwidth", b)?;
    }
    let seed = out.seed();
    let load = |header: &std::path::Path| {
        KernelModel::load_grid(header, &header.with_extension("csv"))
            .map_err(|e| CliError::validation(OP, format!("cannot load grid `{}`: {e}", header.display())))
    };

    match p.action.unwrap_or(KernelAction::Build) {
        KernelAction::Build => {
            let km = build_mc_kernel(m, t, n_paths, dt, p.bandwidth, derive_seed(seed, "kernel")).map_err(core(OP))?;
            km.save_grid(&out.path("kernel.json"), &out.path("kernel.csv"))
                .map_err(core(OP))?;
            out.adopt("kernel.json")?;
            out.adopt("kernel.csv")?;
            let cert = km.certify(t).map_err(core(OP))?;
            let report = json!({"model": m.id(), "t": t, "n_paths": n_paths, "dt": dt, "backend": km.backend(),
                "certificate": cert, "provenance": km.provenance()});
            out.json("kernel_report.json", &report)?;
            say!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
        }
        KernelAction::Evaluate => {
            let km = match &p.grid {
                Some(h) => load(h)?,
                None => kernel_for(m, t, derive_seed(seed, "kernel")).map_err(core(OP))?,
            };
            if km.model() != m {
                return Err(CliError::validation(
                    OP,
                    format!("model mismatch: grid is for {}, requested {m}", km.model()),
                ));
            }
            let pts = match &p.points {
                Some(flat) => points(OP, &m, flat)?,
                None => vec![m.identity()],
            };
            let mut header: Vec<String> = coord_header(&m);
            header.extend(["log_p".into(), "se_log_p".into()]);
            header.extend((0..m.dimension()).map(|i| format!("grad_{i}")));
            let mut rows = Vec::new();
            for g in &pts {
                let v = km.evaluate(t, g).map_err(core(OP))?;
                let grad = km.gradient(t, g).map_err(core(OP))?;
                let mut row: Vec<Cell> = g.coords().iter().map(|c| Cell::F(*c)).collect();
                row.push(v.log_p.into());
                row.push(v.se_log_p.unwrap_or(f64::NAN).into());
                row.extend(grad.grad.iter().map(|c| Cell::F(*c)));
                rows.push(row);
            }
            let header: Vec<&str> = header.iter().map(String::as_str).collect();
            out.csv("kernel_values.csv", &header, &rows)?;
        }
        KernelAction::Varadhan => {
            let times = p.times.clone().unwrap_or_else(|| default_varadhan_times(&m));
            let pts = match &p.points {
                Some(flat) => points(OP, &m, flat)?,
                None => {
                    return Err(CliError::validation(
                        OP,
                        "invalid parameter `points`: required for varadhan",
                    ))
                }
            };
            let grid = p.grid.as_deref().map(load).transpose()?;
            let mut reports = Vec::new();
            let mut rows = Vec::new();
            for (i, g) in pts.iter().enumerate() {
                let r = varadhan_for(&m, g, &times, grid.as_ref(), n_paths, seed)?;
                for row in &r.rows {
                    rows.push(vec![i.into(), row.t.into(), row.minus_t_log_p.into()]);
                }
                reports.push(r);
            }
            out.csv("varadhan.csv", &["point", "t", "minus_t_log_p"], &rows)?;
            out.json("varadhan.json", &reports)?;
            for r in &reports {
                say!(
                    "point {:?}: limit {:.6} ± {:.1e}, d²/2 = {:.6}, relative error {:.4}",
                    r.point, r.limit, r.limit_error, r.reference, r.relative_error
                );
            }
        }
    }
    out.finish(RunStatus::Complete)?;
    Ok(0)
}

fn varadhan_for(
    m: &GroupModel,
    g: &GroupElement,
    times: &[f64],
    grid: Option<&KernelModel>,
    n_paths: usize,
    seed: u64,
) -> CliResult<lie_anneal::kernel::VaradhanReport> {
    let m = *m;
    varadhan_diagnostic(&m, g, times, |t| match grid {
        Some(k) => Ok(k.clone()),
        None => match KernelModel::closed_form(m) {
            Ok(k) => Ok(k),
            Err(_) => build_mc_kernel(
                m,
                t,
                n_paths,
                t / 100.0,
                None,
                derive_seed(seed, &format!("varadhan/{t}")),
            ),
        },
    })
    .map_err(core(OP))
}
