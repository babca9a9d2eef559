use super::gibbs::{gibbs_sampler, sublevel_mass, GibbsDiagnostics};
use super::CoolingSchedule;
use crate::dynamics::{mean_and_se, simulate_annealing, NoiseScale};
use crate::error::{Error, Result};
use crate::functional::probe_grid;
use crate::group::{GroupElement, GroupModel, ScalarField};
use crate::rng::derive_seed;
use serde::Serialize;
use std::path::Path;
use std::sync::Arc;

/// Fewest Gibbs samples a density-ratio bin may hold.
pub const MIN_SAMPLES_PER_BIN: usize = 50;
const MAX_BINS: usize = 20;
const DEFAULT_DELTA_FRACTIONS: [f64; 4] = [0.1, 0.2, 0.5, 1.0];

#[derive(Clone)]
pub struct ConcentrationOptions {
    pub dt: f64,
    /// Defaults to `{0.1, 0.2, 0.5, 1}·N`.
    pub delta_grid: Option<Vec<f64>>,
    pub gibbs_burn_in: usize,
    pub proposal_scale: f64,
    /// Continuous function whose ensemble mean should approach its value at
    /// `minimizer`.
    pub probe: Option<(Arc<dyn ScalarField>, GroupElement)>,
}

impl Default for ConcentrationOptions {
    fn default() -> Self {
        ConcentrationOptions {
            dt: 0.02,
            delta_grid: None,
            gibbs_burn_in: 2_000,
            proposal_scale: 0.5,
            probe: None,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationRow {
    pub t: f64,
    pub delta: f64,
    pub empirical: f64,
    pub empirical_se: f64,
    pub gibbs_mass: f64,
    pub gibbs_se: f64,
    /// `M̂ √μ_ε(t)(A_δ)`.
    pub bound: f64,
    /// `bound − empirical`.
    pub margin: f64,
    pub combined_se: f64,
    pub violated: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeTrend {
    pub target: f64,
    pub means: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// `|mean − target|` never increases by more than three combined SE.
    pub monotone: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcentrationReport {
    pub model: GroupModel,
    pub potential: String,
    pub schedule: CoolingSchedule,
    pub times: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub u0: f64,
    pub m_hat: f64,
    pub m_hat_per_time: Vec<f64>,
    pub rows: Vec<ConcentrationRow>,
    pub violations: Vec<(f64, f64)>,
    /// Per δ: empirical tail probability never increases by more than three
    /// combined SE across checkpoints.
    pub tail_monotone: Vec<bool>,
    pub probe: Option<ProbeTrend>,
    pub gibbs: Vec<GibbsDiagnostics>,
    pub n_paths: usize,
    pub n_gibbs: usize,
}

impl ConcentrationReport {
    pub fn row(&self, t: f64, delta: f64) -> Option<&ConcentrationRow> {
        self.rows.iter().find(|r| r.t == t && r.delta == delta)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["t", "delta", "empirical", "gibbs_mass", "bound", "margin"])?;
        for r in &self.rows {
            w.write_record([r.t, r.delta, r.empirical, r.gibbs_mass, r.bound, r.margin].map(|v| format!("{v:.16e}")))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(f), self)?;
        Ok(())
    }
}

/// Runs the annealing ensemble and compares its tail masses against the
/// Gibbs measure at the current temperature.
#[allow(clippy::too_many_arguments)]
pub fn concentration_report(
    model: &GroupModel,
    u: Arc<dyn ScalarField>,
    label: &str,
    schedule: &CoolingSchedule,
    z0: &GroupElement,
    checkpoints: &[f64],
    n_paths: usize,
    n_gibbs: usize,
    opts: &ConcentrationOptions,
    seed: u64,
) -> Result<ConcentrationReport> {
    if !schedule.flags.admissible() {
        return Err(Error::invalid(
            "schedule",
            format!("not admissible: {:?}", schedule.flags),
        ));
    }
    if n_gibbs < 2 * MIN_SAMPLES_PER_BIN {
        return Err(Error::invalid(
            "n_gibbs",
            format!("need at least {} samples", 2 * MIN_SAMPLES_PER_BIN),
        ));
    }
    let ens = simulate_annealing(
        model,
        u.clone(),
        label,
        NoiseScale::Schedule { schedule: *schedule },
        z0,
        checkpoints,
        opts.dt,
        n_paths,
        derive_seed(seed, "anneal"),
    )?;
    let epsilons: Vec<f64> = checkpoints.iter().map(|t| schedule.epsilon(*t)).collect();
    let mut gibbs_runs = Vec::with_capacity(checkpoints.len());
    for (k, eps) in epsilons.iter().enumerate() {
        gibbs_runs.push(gibbs_sampler(
            model,
            u.as_ref(),
            *eps,
            n_gibbs,
            opts.gibbs_burn_in,
            opts.proposal_scale,
            derive_seed(seed, &format!("gibbs/{k}")),
        )?);
    }

    let grid = probe_grid(model)?;
    let grid_u: Vec<f64> = grid.iter().map(|g| u.value(g)).collect();
    let marginals: Vec<Vec<f64>> = (0..checkpoints.len())
        .map(|k| ens.marginal(k).iter().map(|g| u.value(g)).collect())
        .collect();
    let gibbs_u: Vec<Vec<f64>> = gibbs_runs
        .iter()
        .map(|r| r.samples.iter().map(|g| u.value(g)).collect())
        .collect();
    let u0 = grid_u
        .iter()
        .chain(marginals.iter().flatten())
        .chain(gibbs_u.iter().flatten())
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if !u0.is_finite() {
        return Err(Error::non_finite("potential minimum"));
    }
    let n_osc = if schedule.n > 0.0 {
        schedule.n
    } else {
        grid_u.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - u0
    };
    let delta_grid = match &opts.delta_grid {
        Some(d) => d.clone(),
        None => DEFAULT_DELTA_FRACTIONS.iter().map(|f| f * n_osc).collect(),
    };
    if delta_grid.iter().any(|d| !(*d >= 0.0)) {
        return Err(Error::invalid("delta_grid", "entries must be non-negative"));
    }

    let m_hat_per_time: Vec<f64> = marginals
        .iter()
        .zip(&gibbs_u)
        .map(|(p, g)| l2_density_norm(p, g))
        .collect();
    let m_hat = m_hat_per_time.iter().cloned().fold(0.0, f64::max);

    let mut rows = Vec::new();
    for (k, t) in checkpoints.iter().enumerate() {
        let n_eff = gibbs_runs[k].diagnostics.ess;
        for delta in &delta_grid {
            let hits = marginals[k].iter().filter(|v| **v >= u0 + delta).count();
            let p = hits as f64 / n_paths as f64;
            let p_se = (p * (1.0 - p) / n_paths as f64).sqrt();
            let gm = sublevel_mass(&gibbs_runs[k].samples, u.as_ref(), *delta, u0, Some(n_eff))?;
            let root = gm.mass.sqrt();
            let root_se = if gm.mass > 0.0 {
                gm.standard_error / (2.0 * root)
            } else {
                (1.0 / n_eff.max(1.0)).sqrt()
            };
            let bound = m_hat * root;
            let combined_se = p_se.hypot(m_hat * root_se);
            let margin = bound - p;
            rows.push(ConcentrationRow {
                t: *t,
                delta: *delta,
                empirical: p,
                empirical_se: p_se,
                gibbs_mass: gm.mass,
                gibbs_se: gm.standard_error,
                bound,
                margin,
                combined_se,
                violated: margin < -3.0 * combined_se,
            });
        }
    }
    let violations = rows.iter().filter(|r| r.violated).map(|r| (r.t, r.delta)).collect();
    let nd = delta_grid.len();
    let tail_monotone = (0..nd)
        .map(|j| {
            (1..checkpoints.len()).all(|k| {
                let (a, b) = (&rows[(k - 1) * nd + j], &rows[k * nd + j]);
                b.empirical <= a.empirical + 3.0 * a.empirical_se.hypot(b.empirical_se)
            })
        })
        .collect();

    let probe = opts.probe.as_ref().map(|(f, xmin)| {
        let target = f.value(xmin);
        let (means, ses): (Vec<f64>, Vec<f64>) = (0..checkpoints.len())
            .map(|k| {
                let v: Vec<f64> = ens.marginal(k).iter().map(|g| f.value(g)).collect();
                mean_and_se(&v)
            })
            .unzip();
        let monotone = (1..means.len())
            .all(|k| (means[k] - target).abs() <= (means[k - 1] - target).abs() + 3.0 * ses[k].hypot(ses[k - 1]));
        ProbeTrend {
            target,
            means,
            standard_errors: ses,
            monotone,
        }
    });

    Ok(ConcentrationReport {
        model: *model,
        potential: label.to_string(),
        schedule: *schedule,
        times: checkpoints.to_vec(),
        epsilons,
        delta_grid,
        u0,
        m_hat,
        m_hat_per_time,
        rows,
        violations,
        tail_monotone,
        probe,
        gibbs: gibbs_runs.iter().map(|r| r.diagnostics).collect(),
        n_paths,
        n_gibbs,
    })
}

/// `sqrt(Σ P_j² / G_j)` over bins cut at quantiles of the Gibbs energies,
/// with at least `MIN_SAMPLES_PER_BIN` Gibbs samples in each bin.
fn l2_density_norm(ensemble_u: &[f64], gibbs_u: &[f64]) -> f64 {
    let mut sorted = gibbs_u.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let bins = (n / MIN_SAMPLES_PER_BIN).clamp(1, MAX_BINS);
    let mut edges: Vec<f64> = (1..bins).map(|j| sorted[j * n / bins]).collect();
    edges.dedup();
    let bin_of = |v: f64| edges.partition_point(|e| *e <= v);
    let mut g = vec![0usize; edges.len() + 1];
    let mut p = vec![0usize; edges.len() + 1];
    for v in gibbs_u {
        g[bin_of(*v)] += 1;
    }
    for v in ensemble_u {
        p[bin_of(*v)] += 1;
    }
    let (ng, np) = (n as f64, ensemble_u.len() as f64);
    g.iter()
        .zip(&p)
        .filter(|(gj, _)| **gj > 0)
        .map(|(gj, pj)| {
            let (gj, pj) = (*gj as f64 / ng, *pj as f64 / np);
            pj * pj / gj
        })
        .sum::<f64>()
        .sqrt()
}
