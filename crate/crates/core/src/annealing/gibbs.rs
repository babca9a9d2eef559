use crate::dynamics::mean_and_se;
use crate::error::{ensure_positive, Error, Result};
use crate::group::{AlgebraVector, GroupElement, GroupModel, ScalarField};
use crate::rng::{derive_seed, path_rng};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

/// Number of independent chains a Gibbs run is split into.
pub const GIBBS_CHAINS: usize = 8;
/// Steps between stored samples.
pub const GIBBS_THIN: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GibbsDiagnostics {
    pub acceptance_rate: f64,
    /// Effective sample size of `U` along the chains.
    pub ess: f64,
    /// Proposal scales after burn-in tuning, averaged over chains.
    pub proposal_scale: f64,
    /// Acceptance fell outside `[1%, 99%]`.
    pub poorly_tuned: bool,
}

#[derive(Clone, Debug)]
pub struct GibbsRun {
    pub samples: Vec<GroupElement>,
    pub diagnostics: GibbsDiagnostics,
}

/// Metropolis sampling of `exp(−U/ε²)` with respect to Haar measure.
///
/// Proposals are `g · exp(σ Σ ξᵢ eᵢ)` over the full algebra basis. During
/// burn-in `σ` is adapted toward 30–50% acceptance; afterwards it is frozen.
#[allow(clippy::too_many_arguments)]
pub fn gibbs_sampler(
    model: &GroupModel,
    u: &dyn ScalarField,
    eps: f64,
    n_samples: usize,
    burn_in: usize,
    proposal_scale: f64,
    seed: u64,
) -> Result<GibbsRun> {
    ensure_positive("eps", eps)?;
    ensure_positive("proposal_scale", proposal_scale)?;
    if !model.is_compact() {
        return Err(Error::Unsupported("Gibbs sampling needs a compact model".into()));
    }
    if n_samples == 0 {
        return Err(Error::invalid("n_samples", "must be at least 1"));
    }
    let beta = 1.0 / (eps * eps);
    let chains = GIBBS_CHAINS.min(n_samples);
    let per: Vec<usize> = (0..chains)
        .map(|c| n_samples / chains + usize::from(c < n_samples % chains))
        .collect();
    let runs: Vec<ChainOut> = (0..chains)
        .into_par_iter()
        .map(|c| run_chain(model, u, beta, per[c], burn_in, proposal_scale, seed, c))
        .collect::<Result<_>>()?;
    let mut samples = Vec::with_capacity(n_samples);
    let (mut acc, mut tot, mut ess, mut sig) = (0usize, 0usize, 0.0, 0.0);
    for r in runs {
        acc += r.accepted;
        tot += r.proposed;
        ess += effective_sample_size(&r.energies);
        sig += r.sigma / chains as f64;
        samples.extend(r.samples);
    }
    let acceptance_rate = acc as f64 / tot.max(1) as f64;
    let poorly_tuned = !(0.01..=0.99).contains(&acceptance_rate);
    if poorly_tuned {
        log::warn!("Gibbs acceptance rate {acceptance_rate:.3} at ε = {eps}; retune proposal_scale (now {sig:.3e})");
    }
    Ok(GibbsRun {
        samples,
        diagnostics: GibbsDiagnostics {
            acceptance_rate,
            ess,
            proposal_scale: sig,
            poorly_tuned,
        },
    })
}

struct ChainOut {
    samples: Vec<GroupElement>,
    energies: Vec<f64>,
    accepted: usize,
    proposed: usize,
    sigma: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_chain(
    model: &GroupModel,
    u: &dyn ScalarField,
    beta: f64,
    n: usize,
    burn_in: usize,
    sigma0: f64,
    seed: u64,
    chain: usize,
) -> Result<ChainOut> {
    let mut rng = path_rng(derive_seed(seed, "gibbs"), chain as u64);
    let dim = model.dimension();
    let mut g = model.haar_sample(&mut rng)?;
    let mut ug = u.value(&g);
    if !ug.is_finite() {
        return Err(Error::non_finite(format!("potential at {:?}", g.coords().as_ref())));
    }
    let mut sigma = sigma0;
    let (mut win_acc, mut win) = (0usize, 0usize);
    let mut out = ChainOut {
        samples: Vec::with_capacity(n),
        energies: Vec::with_capacity(n),
        accepted: 0,
        proposed: 0,
        sigma,
    };
    let total = burn_in + n * GIBBS_THIN;
    for step in 0..total {
        let mut v = AlgebraVector::zeros(dim);
        for i in 0..dim {
            let xi: f64 = rng.sample(StandardNormal);
            v.set(i, sigma * xi);
        }
        let cand = model.translate_unchecked(&g, &v);
        let uc = u.value(&cand);
        let log_a = -beta * (uc - ug);
        let accept = uc.is_finite() && (log_a >= 0.0 || rng.random::<f64>() < log_a.exp());
        if accept {
            g = cand;
            ug = uc;
        }
        if step < burn_in {
            win += 1;
            win_acc += usize::from(accept);
            if win == 100 {
                let r = win_acc as f64 / win as f64;
                if r < 0.3 {
                    sigma *= 0.8;
                } else if r > 0.5 {
                    sigma = (sigma * 1.25).min(4.0);
                }
                win = 0;
                win_acc = 0;
            }
        } else {
            out.proposed += 1;
            out.accepted += usize::from(accept);
            if (step - burn_in + 1).is_multiple_of(GIBBS_THIN) {
                out.samples.push(g);
                out.energies.push(ug);
            }
        }
    }
    out.sigma = sigma;
    Ok(out)
}

/// ESS from the initial positive sequence of autocorrelations.
pub fn effective_sample_size(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 4 {
        return n as f64;
    }
    let mean = x.iter().sum::<f64>() / n as f64;
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    if var <= 0.0 {
        return n as f64;
    }
    let rho =
        |k: usize| -> f64 { (0..n - k).map(|i| (x[i] - mean) * (x[i + k] - mean)).sum::<f64>() / (n as f64 * var) };
    let mut tau = 1.0;
    let mut k = 1;
    while k + 1 < n / 2 {
        let pair = rho(k) + rho(k + 1);
        if pair <= 0.0 {
            break;
        }
        tau += 2.0 * pair;
        k += 2;
    }
    (n as f64 / tau).min(n as f64)
}

/// `μ_ε` with a Haar Monte-Carlo estimate of `Z_ε = ∫ exp(−U/ε²) dμ`.
#[derive(Clone, Debug, Serialize)]
pub struct GibbsTarget {
    pub model: GroupModel,
    pub eps: f64,
    pub z_hat: f64,
    pub z_se: f64,
}

impl GibbsTarget {
    pub fn estimate(model: &GroupModel, u: &dyn ScalarField, eps: f64, n: usize, seed: u64) -> Result<Self> {
        ensure_positive("eps", eps)?;
        if n < 2 {
            return Err(Error::invalid("n", "need at least two Haar samples"));
        }
        let mut rng = path_rng(derive_seed(seed, "partition"), 0);
        let vals: Vec<f64> = (0..n)
            .map(|_| Ok((-u.value(&model.haar_sample(&mut rng)?) / (eps * eps)).exp()))
            .collect::<Result<_>>()?;
        let (m, se) = mean_and_se(&vals);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::non_finite(format!("partition function at ε = {eps}")));
        }
        Ok(GibbsTarget {
            model: *model,
            eps,
            z_hat: m * model.haar_volume(),
            z_se: se * model.haar_volume(),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SublevelMass {
    pub mass: f64,
    pub standard_error: f64,
    /// Reference minimum `U₀`.
    pub u0: f64,
}

/// Fraction of `samples` in `A_δ = {U ≥ U₀ + δ}`, with a binomial error
/// based on `n_eff` (the sample count when `None`).
pub fn sublevel_mass(
    samples: &[GroupElement],
    u: &dyn ScalarField,
    delta: f64,
    u0: f64,
    n_eff: Option<f64>,
) -> Result<SublevelMass> {
    if samples.is_empty() {
        return Err(Error::invalid("samples", "empty sample set"));
    }
    if !(delta >= 0.0) {
        return Err(Error::invalid("delta", format!("must be non-negative, got {delta}")));
    }
    let hits = samples.iter().filter(|g| u.value(g) >= u0 + delta).count();
    let n = samples.len() as f64;
    let p = hits as f64 / n;
    let ne = n_eff.unwrap_or(n).clamp(1.0, n);
    Ok(SublevelMass {
        mass: p,
        standard_error: (p * (1.0 - p) / ne).sqrt(),
        u0,
    })
}

/// `U₀` as the minimum over samples and the deterministic probe grid.
pub fn potential_floor(model: &GroupModel, u: &dyn ScalarField, samples: &[GroupElement]) -> Result<f64> {
    let grid = crate::functional::probe_grid(model)?;
    Ok(samples
        .iter()
        .chain(grid.iter())
        .map(|g| u.value(g))
        .fold(f64::INFINITY, f64::min))
}
