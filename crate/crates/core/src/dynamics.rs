//! Geometric Euler–Maruyama integration of left-invariant Stratonovich SDEs
//!
//! ```text
//! dY = V₀(Y) dt + Σᵢ ε(t) Vᵢ(Y) ∘ dBᵢ,   V₀ = −½ Σᵢ (Vᵢ U) Vᵢ
//! ```
//!
//! Each step is `Y ← Y · exp(v₀ dt + ε Σᵢ ξᵢ √dt eᵢ)` with ε frozen at the left
//! endpoint. Paths run in parallel, each on its own counter-based stream.

use crate::annealing::CoolingSchedule;
use crate::error::{ensure_positive, Error, Result};
use crate::group::{finite_difference, AlgebraVector, GroupElement, GroupModel, ScalarField, DEFAULT_FD_STEP};
use crate::rng::path_rng;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

pub const SCHEME_ID: &str = "geometric-euler";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseScale {
    Constant { eps: f64 },
    Schedule { schedule: CoolingSchedule },
}

impl NoiseScale {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            NoiseScale::Constant { eps } => *eps,
            NoiseScale::Schedule { schedule } => schedule.epsilon(t),
        }
    }
}

/// Everything that determines the law of a run apart from the start point.
#[derive(Clone)]
pub struct SdeSpec {
    pub model: GroupModel,
    pub potential: Option<Arc<dyn ScalarField>>,
    /// Free-form description of the potential, kept for provenance.
    pub potential_label: String,
    pub noise: NoiseScale,
    pub dt: f64,
    /// Shrink steps to `min(dt, ε(t)²/10)`.
    pub cap_dt_by_noise: bool,
}

impl std::fmt::Debug for SdeSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeSpec")
            .field("model", &self.model)
            .field("potential", &self.potential_label)
            .field("noise", &self.noise)
            .field("dt", &self.dt)
            .field("cap_dt_by_noise", &self.cap_dt_by_noise)
            .finish()
    }
}

/// Serializable summary of an [`SdeSpec`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecSummary {
    pub model: GroupModel,
    pub potential: Option<String>,
    pub noise: NoiseScale,
    pub dt: f64,
    pub cap_dt_by_noise: bool,
    pub scheme: String,
}

impl SdeSpec {
    pub fn diffusion(model: GroupModel, dt: f64) -> Self {
        SdeSpec {
            model,
            potential: None,
            potential_label: String::new(),
            noise: NoiseScale::Constant { eps: 1.0 },
            dt,
            cap_dt_by_noise: false,
        }
    }

    pub fn with_potential(mut self, u: Arc<dyn ScalarField>, label: impl Into<String>) -> Self {
        self.potential = Some(u);
        self.potential_label = label.into();
        self
    }

    pub fn with_noise(mut self, noise: NoiseScale) -> Self {
        self.noise = noise;
        self
    }

    pub fn summary(&self) -> SpecSummary {
        SpecSummary {
            model: self.model,
            potential: self.potential.as_ref().map(|_| self.potential_label.clone()),
            noise: self.noise,
            dt: self.dt,
            cap_dt_by_noise: self.cap_dt_by_noise,
            scheme: SCHEME_ID.to_string(),
        }
    }

    fn validate(&self, horizon: f64) -> Result<()> {
        ensure_positive("dt", self.dt)?;
        match self.noise {
            NoiseScale::Constant { eps } => ensure_positive("eps", eps)?,
            NoiseScale::Schedule { schedule } => {
                for t in [0.0, horizon] {
                    let e = schedule.epsilon(t);
                    if !(e > 0.0 && e.is_finite()) {
                        return Err(Error::invalid("schedule", format!("ε({t}) = {e}")));
                    }
                }
            }
        }
        Ok(())
    }

    /// `v₀ = −½ grad_hor U` at `g`, written into the horizontal slots of `out`.
    fn drift(&self, g: &GroupElement, out: &mut AlgebraVector) -> Result<()> {
        let Some(u) = &self.potential else {
            return Ok(());
        };
        let rank = self.model.horizontal_rank();
        let mut grad = [0.0; 6];
        if !u.horizontal_gradient(g, &mut grad[..rank]) {
            for (i, d) in grad[..rank].iter_mut().enumerate() {
                *d = finite_difference(&self.model, u.as_ref(), g, i, DEFAULT_FD_STEP)?;
            }
        }
        for (i, d) in grad[..rank].iter().enumerate() {
            if !d.is_finite() {
                return Err(Error::non_finite(format!(
                    "drift V_{} U at {:?}",
                    i + 1,
                    g.coords().as_ref()
                )));
            }
            out.set(i, -0.5 * d);
        }
        Ok(())
    }
}

/// `g · exp(v₀ dt + noise)`.
pub fn geometric_step(
    model: &GroupModel,
    g: &GroupElement,
    v0: &AlgebraVector,
    noise: &AlgebraVector,
    dt: f64,
) -> Result<GroupElement> {
    ensure_positive("dt", dt)?;
    let incr = (*v0).scale(dt).add(noise);
    model.translate(g, &incr)
}

/// Checkpointed states of a Monte-Carlo run.
#[derive(Clone, Debug)]
pub struct PathEnsemble {
    pub model: GroupModel,
    pub times: Vec<f64>,
    pub n_paths: usize,
    /// Index of the first path; non-zero for blocks of a larger run.
    pub first_path: usize,
    pub seed: u64,
    pub spec: SpecSummary,
    states: Vec<GroupElement>,
    /// Running sum of the Lie-algebra increments, i.e. the unwrapped path on
    /// abelian models.
    development: Vec<AlgebraVector>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    model: GroupModel,
    seed: u64,
    n_paths: usize,
    #[serde(default)]
    first_path: usize,
    times: Vec<f64>,
    spec: SpecSummary,
    columns: Vec<String>,
}

impl PathEnsemble {
    pub fn state(&self, path: usize, time_index: usize) -> &GroupElement {
        &self.states[path * self.times.len() + time_index]
    }

    pub fn development(&self, path: usize, time_index: usize) -> &AlgebraVector {
        &self.development[path * self.times.len() + time_index]
    }

    /// States of every path at one checkpoint.
    pub fn marginal(&self, time_index: usize) -> Vec<GroupElement> {
        (0..self.n_paths).map(|p| *self.state(p, time_index)).collect()
    }

    pub fn final_states(&self) -> Vec<GroupElement> {
        self.marginal(self.times.len() - 1)
    }

    /// One row per (path, time) with `{:.16e}` coordinates.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        write!(w, "path,time")?;
        for c in 0..self.model.coord_len() {
            write!(w, ",c{c}")?;
        }
        writeln!(w)?;
        for p in 0..self.n_paths {
            for (k, t) in self.times.iter().enumerate() {
                write!(w, "{},{t:.16e}", p + self.first_path)?;
                for c in self.state(p, k).coords().iter() {
                    write!(w, ",{c:.16e}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        let side = Sidecar {
            model: self.model,
            seed: self.seed,
            n_paths: self.n_paths,
            first_path: self.first_path,
            times: self.times.clone(),
            spec: self.spec.clone(),
            columns: (0..self.model.coord_len()).map(|c| format!("c{c}")).collect(),
        };
        let f = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(f, &side)?;
        Ok(())
    }

    /// Reads states back from a CSV/sidecar pair. The development is not
    /// persisted and is zero in the result.
    pub fn load(csv_path: &Path, sidecar_path: &Path) -> Result<Self> {
        let side: Sidecar = serde_json::from_reader(File::open(sidecar_path)?)?;
        let nt = side.times.len();
        let mut states = vec![side.model.identity(); side.n_paths * nt];
        let mut seen = vec![false; states.len()];
        let mut rdr = csv::Reader::from_path(csv_path)?;
        for rec in rdr.records() {
            let rec = rec?;
            let field = |i: usize| -> Result<f64> {
                rec.get(i)
                    .ok_or_else(|| Error::Format(format!("short row {:?}", rec)))?
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("{e} in row {:?}", rec)))
            };
            let p: usize = rec
                .get(0)
                .and_then(|s| s.parse::<usize>().ok())
                .and_then(|p| p.checked_sub(side.first_path))
                .ok_or_else(|| Error::Format(format!("bad path index in {:?}", rec)))?;
            let t = field(1)?;
            let k = side
                .times
                .iter()
                .position(|&s| s == t)
                .ok_or_else(|| Error::Format(format!("time {t} not in sidecar")))?;
            if p >= side.n_paths {
                return Err(Error::Format(format!("path {p} out of range")));
            }
            let coords: Vec<f64> = (0..side.model.coord_len())
                .map(|c| field(2 + c))
                .collect::<Result<_>>()?;
            // Stored states are canonical up to rounding; keep their exact
            // bits so that a loaded ensemble writes back byte-identically.
            let g = side.model.element_verbatim(&coords)?;
            let c = side.model.canonical(g);
            let moved = g
                .coords()
                .iter()
                .zip(c.coords().iter())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            states[p * nt + k] = if moved <= 1e-12 { g } else { c };
            seen[p * nt + k] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Format("missing (path, time) rows".into()));
        }
        Ok(PathEnsemble {
            model: side.model,
            development: vec![AlgebraVector::zeros(side.model.dimension()); states.len()],
            times: side.times,
            n_paths: side.n_paths,
            first_path: side.first_path,
            seed: side.seed,
            spec: side.spec,
            states,
        })
    }

    /// Appends the block that starts where this one ends.
    pub fn append(&mut self, other: PathEnsemble) -> Result<()> {
        if other.model != self.model
            || other.times != self.times
            || other.seed != self.seed
            || other.first_path != self.first_path + self.n_paths
        {
            return Err(Error::invalid(
                "ensemble",
                format!(
                    "block starting at path {} does not continue paths {}..{}",
                    other.first_path,
                    self.first_path,
                    self.first_path + self.n_paths
                ),
            ));
        }
        self.n_paths += other.n_paths;
        self.states.extend(other.states);
        self.development.extend(other.development);
        Ok(())
    }
}

fn check_checkpoints(checkpoints: &[f64]) -> Result<f64> {
    if checkpoints.is_empty() {
        return Err(Error::invalid("checkpoints", "empty"));
    }
    if checkpoints.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::invalid("checkpoints", "must be finite and non-negative"));
    }
    if checkpoints.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("checkpoints", "must be non-decreasing"));
    }
    Ok(*checkpoints.last().unwrap())
}

fn run_path(
    spec: &SdeSpec,
    x0: &GroupElement,
    checkpoints: &[f64],
    seed: u64,
    index: usize,
) -> Result<(Vec<GroupElement>, Vec<AlgebraVector>)> {
    let model = &spec.model;
    let dim = model.dimension();
    let rank = model.horizontal_rank();
    let mut rng = path_rng(seed, index as u64);
    let mut g = *x0;
    let mut dev = AlgebraVector::zeros(dim);
    let mut drift = AlgebraVector::zeros(dim);
    let mut t = 0.0_f64;
    let mut states = Vec::with_capacity(checkpoints.len());
    let mut devs = Vec::with_capacity(checkpoints.len());
    for &tc in checkpoints {
        while t < tc {
            let eps = spec.noise.at(t);
            let mut h = spec.dt;
            if spec.cap_dt_by_noise {
                h = h.min(eps * eps / 10.0);
            }
            let remaining = tc - t;
            let last = remaining <= h * (1.0 + 1e-9);
            if last {
                h = remaining;
            }
            spec.drift(&g, &mut drift)?;
            let sq = h.sqrt() * eps;
            let mut incr = AlgebraVector::zeros(dim);
            for i in 0..rank {
                let xi: f64 = rng.sample(StandardNormal);
                incr.set(i, drift[i] * h + sq * xi);
            }
            g = model.translate_unchecked(&g, &incr);
            dev = dev.add(&incr);
            t = if last { tc } else { t + h };
        }
        states.push(g);
        devs.push(dev);
    }
    Ok((states, devs))
}

/// Runs `n_paths` independent paths from `x0` and records them at each
/// checkpoint (non-decreasing, may include 0).
pub fn simulate(
    spec: &SdeSpec,
    x0: &GroupElement,
    checkpoints: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    simulate_block(spec, x0, checkpoints, 0..n_paths, seed)
}

/// Runs only the paths with indices in `paths`. Blocks of one run can be
/// simulated separately and joined with [`PathEnsemble::append`].
pub fn simulate_block(
    spec: &SdeSpec,
    x0: &GroupElement,
    checkpoints: &[f64],
    paths: Range<usize>,
    seed: u64,
) -> Result<PathEnsemble> {
    let horizon = check_checkpoints(checkpoints)?;
    spec.validate(horizon)?;
    spec.model.check(x0)?;
    if paths.is_empty() {
        return Err(Error::invalid("n_paths", "must be at least 1"));
    }
    let (first_path, n_paths) = (paths.start, paths.len());
    let x0 = spec.model.canonical(*x0);
    let runs: Vec<_> = paths
        .into_par_iter()
        .map(|p| run_path(spec, &x0, checkpoints, seed, p))
        .collect::<Result<_>>()?;
    let mut states = Vec::with_capacity(n_paths * checkpoints.len());
    let mut development = Vec::with_capacity(n_paths * checkpoints.len());
    for (s, d) in runs {
        states.extend(s);
        development.extend(d);
    }
    Ok(PathEnsemble {
        model: spec.model,
        times: checkpoints.to_vec(),
        n_paths,
        first_path,
        seed,
        spec: spec.summary(),
        states,
        development,
    })
}

/// Driftless diffusion with unit noise, recorded at `t_end`.
pub fn simulate_diffusion(
    model: &GroupModel,
    x0: &GroupElement,
    t_end: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    ensure_positive("t_end", t_end)?;
    simulate(&SdeSpec::diffusion(*model, dt), x0, &[t_end], n_paths, seed)
}

/// End states of the driftless diffusion at time `t`.
pub fn diffusion_endpoints(
    model: &GroupModel,
    x0: &GroupElement,
    t: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<GroupElement>> {
    Ok(simulate_diffusion(model, x0, t, dt, n_paths, seed)?.final_states())
}

/// Potential-drift process with constant noise `eps`, recorded at `checkpoints`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_potential_ou(
    model: &GroupModel,
    u: Arc<dyn ScalarField>,
    label: &str,
    y0: &GroupElement,
    eps: f64,
    checkpoints: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    let spec = SdeSpec::diffusion(*model, dt)
        .with_potential(u, label)
        .with_noise(NoiseScale::Constant { eps });
    simulate(&spec, y0, checkpoints, n_paths, seed)
}

/// Annealing process; steps are `min(dt, ε(t)²/10)`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_annealing(
    model: &GroupModel,
    u: Arc<dyn ScalarField>,
    label: &str,
    noise: NoiseScale,
    z0: &GroupElement,
    checkpoints: &[f64],
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<PathEnsemble> {
    if let NoiseScale::Schedule { schedule } = noise {
        if !schedule.flags.admissible() {
            log::warn!(
                "annealing with a schedule outside the admissible range: {:?}",
                schedule.flags
            );
        }
    }
    let mut spec = SdeSpec::diffusion(*model, dt)
        .with_potential(u, label)
        .with_noise(noise);
    spec.cap_dt_by_noise = true;
    simulate(&spec, z0, checkpoints, n_paths, seed)
}

/// Monte-Carlo `P_t f(x) = E f(X_t^x)` with its standard error.
pub fn semigroup_apply<F: ScalarField + ?Sized>(
    model: &GroupModel,
    f: &F,
    t: f64,
    x: &GroupElement,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<(f64, f64)> {
    model.check(x)?;
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::invalid("t", format!("must be non-negative, got {t}")));
    }
    if t == 0.0 {
        return Ok((f.value(x), 0.0));
    }
    let ends = diffusion_endpoints(model, x, t, dt, n_paths, seed)?;
    let vals: Vec<f64> = ends.iter().map(|g| f.value(g)).collect();
    if vals.iter().any(|v| !v.is_finite()) {
        return Err(Error::non_finite("semigroup_apply integrand"));
    }
    Ok(mean_and_se(&vals))
}

/// Sample mean and its standard error.
pub fn mean_and_se(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    if vals.len() < 2 {
        return (mean, 0.0);
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Constant, FnField};
    use approx::assert_abs_diff_eq;

    #[test]
    fn trivial_steps() {
        let m = GroupModel::Su2;
        let g = m.element(&[0.5, 0.5, 0.5, 0.5]).unwrap();
        let z = AlgebraVector::zeros(3);
        assert_eq!(geometric_step(&m, &g, &z, &z, 0.1).unwrap(), g);
        let n = AlgebraVector::from_slice(&[0.3, -1.2, 0.0]);
        let q = geometric_step(&m, &g, &z, &n, 0.1).unwrap().as_quaternion().unwrap();
        assert_abs_diff_eq!(q.norm(), 1.0, epsilon = 1e-12);

        let t = GroupModel::torus(2).unwrap();
        let g = t.element(&[0.1, 0.2]).unwrap();
        let s = geometric_step(
            &t,
            &g,
            &AlgebraVector::from_slice(&[1.0, 2.0]),
            &AlgebraVector::from_slice(&[0.5, 0.0]),
            0.1,
        )
        .unwrap();
        assert_abs_diff_eq!(s[0], 0.7, epsilon = 1e-15);
        assert_abs_diff_eq!(s[1], 0.4, epsilon = 1e-15);
    }

    #[test]
    fn semigroup_trivia() {
        let m = GroupModel::torus(1).unwrap();
        let x = m.element(&[0.3]).unwrap();
        let (v, se) = semigroup_apply(&m, &Constant(1.0), 0.5, &x, 100, 0.01, 1).unwrap();
        assert_eq!((v, se), (1.0, 0.0));
        let cos = FnField::new(|g: &GroupElement| g[0].cos());
        assert_eq!(
            semigroup_apply(&m, &cos, 0.0, &x, 10, 0.01, 1).unwrap(),
            (0.3_f64.cos(), 0.0)
        );
    }

    #[test]
    fn checkpoints_land_exactly() {
        let m = GroupModel::torus(1).unwrap();
        let e = simulate(&SdeSpec::diffusion(m, 0.3), &m.identity(), &[0.0, 0.5, 1.0, 1.0], 3, 9).unwrap();
        assert_eq!(e.times.len(), 4);
        assert_eq!(e.development(0, 0)[0], 0.0);
        assert_eq!(e.state(1, 2), e.state(1, 3));
    }

    #[test]
    fn rejects_bad_input() {
        let m = GroupModel::torus(1).unwrap();
        let x = m.identity();
        assert!(simulate_diffusion(&m, &x, 1.0, 0.0, 10, 1).is_err());
        assert!(simulate_diffusion(&m, &x, -1.0, 0.1, 10, 1).is_err());
        assert!(simulate_diffusion(&m, &x, 1.0, 0.1, 0, 1).is_err());
        assert!(simulate_diffusion(&m, &GroupModel::Su2.identity(), 1.0, 0.1, 1, 1).is_err());
    }

    #[test]
    fn drift_failure_reports_location() {
        let m = GroupModel::torus(1).unwrap();
        let bad: Arc<dyn ScalarField> =
            Arc::new(FnField::new(|g: &GroupElement| if g[0] > 0.1 { f64::NAN } else { 0.0 }));
        let err =
            simulate_potential_ou(&m, bad, "bad", &m.element(&[0.5]).unwrap(), 1.0, &[0.1], 0.01, 2, 1).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }), "{err}");
    }
}
