//! Carré du champ, Poincaré and Driver–Melcher checks, spectral-gap
//! estimates and the perturbation bound.

mod dictionary;

pub use dictionary::{DictEntry, NilBase, Su2Coefficient, TestFunctionDictionary, TorusTrig, WeilBrezin};

use crate::dynamics::{diffusion_endpoints, mean_and_se};
use crate::error::{ensure_positive, Error, Result};
use crate::group::{directional_derivative, AlgebraVector, GroupElement, GroupModel, ScalarField, DEFAULT_FD_STEP};
use crate::kernel::KernelModel;
use crate::rng::path_rng;
use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;
use std::collections::BTreeMap;

/// Step of the common-random-number differences in [`estimate_dm_constant`].
pub const DM_FD_STEP: f64 = 1e-2;

/// Default time grid of [`estimate_dm_constant`]. Small times matter: every
/// ratio tends to 1 as `t → 0`.
pub const DEFAULT_DM_TIMES: [f64; 7] = [0.001, 0.01, 0.03, 0.1, 0.25, 0.5, 1.0];

/// `Γ(f, g)(x) = Σᵢ (Vᵢf)(x)(Vᵢg)(x)`, with `g = f` when absent.
pub fn carre_du_champ(
    model: &GroupModel,
    f: &dyn ScalarField,
    g: Option<&dyn ScalarField>,
    x: &GroupElement,
) -> Result<f64> {
    let mut s = 0.0;
    for i in 0..model.horizontal_rank() {
        let a = directional_derivative(model, f, x, i, DEFAULT_FD_STEP)?;
        let b = match g {
            Some(g) => directional_derivative(model, g, x, i, DEFAULT_FD_STEP)?,
            None => a,
        };
        s += a * b;
    }
    Ok(s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GapKind {
    RayleighUpper,
    DmLowerFormula,
    PerturbationLower,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapEstimate {
    pub value: f64,
    pub kind: GapKind,
    pub standard_error: f64,
    /// Times, noise levels and constants that went into the value.
    pub provenance: BTreeMap<String, f64>,
    /// Set when the covariance matrix had to be ridged.
    pub regularized: bool,
}

/// `a_t = 1/(2Kt)`.
pub fn gap_from_dm(k: f64, t: f64) -> Result<GapEstimate> {
    ensure_positive("K", k)?;
    ensure_positive("t", t)?;
    Ok(GapEstimate {
        value: 1.0 / (2.0 * k * t),
        kind: GapKind::DmLowerFormula,
        standard_error: 0.0,
        provenance: BTreeMap::from([("K".into(), k), ("t".into(), t)]),
        regularized: false,
    })
}

/// `a · exp(−2D)`.
pub fn perturbed_gap_bound(a_eps: f64, d_eps: f64) -> Result<GapEstimate> {
    ensure_positive("a_eps", a_eps)?;
    if !(d_eps >= 0.0 && d_eps.is_finite()) {
        return Err(Error::invalid("D_eps", format!("must be non-negative, got {d_eps}")));
    }
    Ok(GapEstimate {
        value: a_eps * (-2.0 * d_eps).exp(),
        kind: GapKind::PerturbationLower,
        standard_error: 0.0,
        provenance: BTreeMap::from([("a".into(), a_eps), ("D".into(), d_eps)]),
        regularized: false,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PoincareReport {
    /// `P_t Γ(f,f)(e)`.
    pub lhs: f64,
    /// `2a_t (P_t f²(e) − (P_t f(e))²)`.
    pub rhs: f64,
    /// Standard error of `lhs − rhs`.
    pub standard_error: f64,
    /// `(lhs − rhs) / standard_error`, or 0 when both sides are exact.
    pub margin_in_se: f64,
}

/// Endpoints of the driftless diffusion from the identity, simulated on the
/// covering group so that left translates of the start are well defined.
fn lifted_endpoints(model: &GroupModel, t: f64, n_paths: usize, dt: f64, seed: u64) -> Result<Vec<GroupElement>> {
    let cover = match model {
        GroupModel::HeisenbergNilmanifold => GroupModel::Heisenberg,
        m => *m,
    };
    diffusion_endpoints(&cover, &cover.identity(), t, dt, n_paths, seed)
}

/// Checks `P_t Γ(f,f)(e) ≥ 2a_t (P_t f²(e) − (P_t f(e))²)` on one ensemble.
#[allow(clippy::too_many_arguments)]
pub fn local_poincare_check(
    model: &GroupModel,
    f: &dyn ScalarField,
    t: f64,
    a_t: f64,
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<PoincareReport> {
    ensure_positive("t", t)?;
    ensure_positive("a_t", a_t)?;
    let ends = diffusion_endpoints(model, &model.identity(), t, dt, n_paths, seed)?;
    let rows: Vec<(f64, f64)> = ends
        .par_iter()
        .map(|x| Ok((carre_du_champ(model, f, None, x)?, f.value(x))))
        .collect::<Result<_>>()?;
    let n = rows.len() as f64;
    let gam = rows.iter().map(|r| r.0).sum::<f64>() / n;
    let m1 = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let m2 = rows.iter().map(|r| r.1 * r.1).sum::<f64>() / n;
    let lhs = gam;
    let rhs = 2.0 * a_t * (m2 - m1 * m1);
    // influence function of lhs − rhs
    let psi: Vec<f64> = rows
        .iter()
        .map(|&(g, v)| g - 2.0 * a_t * (v * v - 2.0 * m1 * v))
        .collect();
    let (_, se) = mean_and_se(&psi);
    let diff = lhs - rhs;
    let margin_in_se = if se > 0.0 {
        diff / se
    } else if diff.abs() <= 1e-12 * (lhs.abs() + rhs.abs()).max(1e-300) {
        0.0
    } else {
        diff.signum() * f64::INFINITY
    };
    Ok(PoincareReport {
        lhs,
        rhs,
        standard_error: se,
        margin_in_se,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DmRow {
    pub function: String,
    pub t: f64,
    /// `Γ(P_t f, P_t f)(e)`.
    pub numerator: f64,
    /// `P_t Γ(f,f)(e)`.
    pub denominator: f64,
    pub ratio: f64,
    pub standard_error: f64,
    /// Set when the denominator is statistically indistinguishable from 0.
    pub skipped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DmEstimate {
    /// `max(1, largest ratio)`; every ratio tends to 1 as `t → 0`.
    pub k_hat: f64,
    /// Largest ratio in the table.
    pub max_ratio: f64,
    pub max_ratio_se: f64,
    pub table: Vec<DmRow>,
    pub t_grid: Vec<f64>,
    pub dictionary: String,
}

/// Estimates the smallest `K` with `Γ(P_t f, P_t f)(e) ≤ K P_t Γ(f,f)(e)` over
/// a dictionary and a grid of times in `(0, 1]`.
///
/// `Vᵢ P_t f(e)` is a central difference over the start points `exp(±h eᵢ)`
/// driven by the same noise; for left-invariant dynamics that path is
/// `exp(±h eᵢ) · X_t`. Steps are capped at `t/10`.
pub fn estimate_dm_constant(
    model: &GroupModel,
    dict: &TestFunctionDictionary,
    t_grid: &[f64],
    n_paths: usize,
    dt: f64,
    seed: u64,
) -> Result<DmEstimate> {
    if dict.model != *model {
        return Err(Error::ModelMismatch {
            expected: model.id(),
            found: dict.model.id(),
        });
    }
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(t > 0.0 && t <= 1.0)) {
        return Err(Error::invalid("t_grid", "times must lie in (0, 1]"));
    }
    if n_paths < 2 {
        return Err(Error::invalid("n_paths", "need at least two paths for error bars"));
    }
    let h = DM_FD_STEP;
    let rank = model.horizontal_rank();
    let shifts: Vec<(GroupElement, GroupElement)> = (0..rank)
        .map(|i| {
            let e = model.basis(i);
            (model.exp_unchecked(&e.scale(h)), model.exp_unchecked(&e.scale(-h)))
        })
        .collect();
    let mut table = Vec::new();
    for (k, &t) in t_grid.iter().enumerate() {
        let ends = lifted_endpoints(
            model,
            t,
            n_paths,
            dt.min(t / 10.0),
            crate::rng::derive_seed(seed, &format!("dm/{k}")),
        )?;
        for entry in &dict.entries {
            let f = entry.f.as_ref();
            // per path: the rank difference quotients and Γ(f,f) at the endpoint
            let rows: Vec<(AlgebraVector, f64)> = ends
                .par_iter()
                .map(|y| {
                    let mut d = AlgebraVector::zeros(rank);
                    for (i, (p, m)) in shifts.iter().enumerate() {
                        let fp = f.value(&model.mul_unchecked(p, y));
                        let fm = f.value(&model.mul_unchecked(m, y));
                        d.set(i, (fp - fm) / (2.0 * h));
                    }
                    let x = model.canonical(*y);
                    Ok((d, carre_du_champ(model, f, None, &x)?))
                })
                .collect::<Result<_>>()?;
            table.push(dm_row(&entry.name, t, &rows, rank));
        }
    }
    let live: Vec<&DmRow> = table.iter().filter(|r| !r.skipped).collect();
    if live.is_empty() {
        return Err(Error::Degenerate(
            "every Driver–Melcher ratio has a vanishing denominator".into(),
        ));
    }
    let best = live
        .iter()
        .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
        .expect("non-empty");
    Ok(DmEstimate {
        k_hat: best.ratio.max(1.0),
        max_ratio: best.ratio,
        max_ratio_se: best.standard_error,
        table,
        t_grid: t_grid.to_vec(),
        dictionary: dict.id.clone(),
    })
}

fn dm_row(name: &str, t: f64, rows: &[(AlgebraVector, f64)], rank: usize) -> DmRow {
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..rank)
        .map(|i| rows.iter().map(|r| r.0[i]).sum::<f64>() / n)
        .collect();
    let numerator: f64 = means.iter().map(|m| m * m).sum();
    let gammas: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let (denominator, den_se) = mean_and_se(&gammas);
    let skipped = !(denominator > 3.0 * den_se && denominator > 1e-14);
    if skipped {
        return DmRow {
            function: name.to_string(),
            t,
            numerator,
            denominator,
            ratio: f64::NAN,
            standard_error: f64::NAN,
            skipped,
        };
    }
    let ratio = numerator / denominator;
    let psi: Vec<f64> = rows
        .iter()
        .map(|(d, g)| {
            let num: f64 = (0..rank).map(|i| 2.0 * means[i] * (d[i] - means[i])).sum();
            (num - ratio * (g - denominator)) / denominator
        })
        .collect();
    let (_, se) = mean_and_se(&psi);
    DmRow {
        function: name.to_string(),
        t,
        numerator,
        denominator,
        ratio,
        standard_error: se,
        skipped,
    }
}

/// Smallest generalized eigenvalue of `(⟨½Γ(fᵢ,fⱼ)⟩, cov(fᵢ,fⱼ))` over a
/// sample of the target measure. An upper bound on the gap of the
/// corresponding symmetric diffusion.
pub fn estimate_spectral_gap(
    model: &GroupModel,
    samples: &[GroupElement],
    dict: &TestFunctionDictionary,
) -> Result<GapEstimate> {
    if samples.len() < 20 {
        return Err(Error::invalid("samples", "need at least 20 samples"));
    }
    let n = dict.len();
    let rank = model.horizontal_rank();
    // per sample: values and derivative rows
    let rows: Vec<(Vec<f64>, Vec<f64>)> = samples
        .par_iter()
        .map(|x| {
            let v: Vec<f64> = dict.entries.iter().map(|e| e.f.value(x)).collect();
            let mut d = Vec::with_capacity(n * rank);
            for e in &dict.entries {
                for i in 0..rank {
                    d.push(directional_derivative(model, e.f.as_ref(), x, i, DEFAULT_FD_STEP)?);
                }
            }
            Ok((v, d))
        })
        .collect::<Result<_>>()?;
    let (value, regularized) = rayleigh(&rows, n, rank)?;
    let batches = 10;
    let size = rows.len() / batches;
    let mut parts = Vec::with_capacity(batches);
    for b in 0..batches {
        if let Ok((v, _)) = rayleigh(&rows[b * size..(b + 1) * size], n, rank) {
            parts.push(v);
        }
    }
    let (_, se) = mean_and_se(&parts);
    Ok(GapEstimate {
        value,
        kind: GapKind::RayleighUpper,
        standard_error: se * (parts.len() as f64).sqrt() / (batches as f64).sqrt(),
        provenance: BTreeMap::from([("n_samples".into(), samples.len() as f64)]),
        regularized,
    })
}

fn rayleigh(rows: &[(Vec<f64>, Vec<f64>)], n: usize, rank: usize) -> Result<(f64, bool)> {
    let m = rows.len() as f64;
    let mut mean = vec![0.0; n];
    for (v, _) in rows {
        for i in 0..n {
            mean[i] += v[i] / m;
        }
    }
    let mut a = DMatrix::<f64>::zeros(n, n);
    let mut b = DMatrix::<f64>::zeros(n, n);
    for (v, d) in rows {
        for i in 0..n {
            for j in 0..=i {
                b[(i, j)] += (v[i] - mean[i]) * (v[j] - mean[j]);
                let mut g = 0.0;
                for k in 0..rank {
                    g += d[i * rank + k] * d[j * rank + k];
                }
                a[(i, j)] += 0.5 * g;
            }
        }
    }
    for i in 0..n {
        for j in 0..i {
            a[(j, i)] = a[(i, j)];
            b[(j, i)] = b[(i, j)];
        }
    }
    a /= m;
    b /= m;
    // functions with no variance carry no information about the gap
    let max_var = (0..n).map(|i| b[(i, i)]).fold(0.0, f64::max);
    if !(max_var > 1e-14) {
        return Err(Error::Degenerate("dictionary has zero variance on the sample".into()));
    }
    let keep: Vec<usize> = (0..n).filter(|&i| b[(i, i)] > 1e-12 * max_var).collect();
    if keep.len() < n {
        log::warn!("dropping {} dictionary functions with zero variance", n - keep.len());
    }
    let a = a.select_rows(&keep).select_columns(&keep);
    let mut b = b.select_rows(&keep).select_columns(&keep);
    let mut regularized = false;
    let chol = match b.clone().cholesky() {
        Some(c) => c,
        None => {
            let ridge = 1e-10 * b.trace();
            log::warn!("covariance matrix not positive definite; adding ridge {ridge:e}");
            for i in 0..b.nrows() {
                b[(i, i)] += ridge;
            }
            regularized = true;
            b.cholesky()
                .ok_or_else(|| Error::Degenerate("covariance matrix singular after ridging".into()))?
        }
    };
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Degenerate("singular Cholesky factor".into()))?;
    let c = &linv * a * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    Ok((SymmetricEigen::new(c).eigenvalues.min(), regularized))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DReport {
    /// `max |U(x) + ε² log p(ε², x₀, x)|` over probes and noise levels.
    pub d_hat: f64,
    pub argmax: Vec<f64>,
    pub argmax_eps: f64,
    /// Per-ε maxima, in the order of the grid.
    pub per_eps: Vec<(f64, f64)>,
    pub n_probes: usize,
}

/// Deterministic chart grid used as part of every probe set.
pub fn probe_grid(model: &GroupModel) -> Result<Vec<GroupElement>> {
    let mut out = Vec::new();
    match model {
        GroupModel::Torus(d) => {
            let per = match d {
                1 => 256_usize,
                2 => 48,
                3 => 16,
                _ => 6,
            };
            let total = per.pow(*d as u32);
            for idx in 0..total {
                let mut r = idx;
                let mut c = vec![0.0; *d];
                for v in c.iter_mut() {
                    *v = (r % per) as f64 * std::f64::consts::TAU / per as f64;
                    r /= per;
                }
                out.push(model.element(&c)?);
            }
        }
        GroupModel::HeisenbergNilmanifold => {
            let per = 12;
            for i in 0..per {
                for j in 0..per {
                    for k in 0..per {
                        let c = [i as f64 / per as f64, j as f64 / per as f64, k as f64 / per as f64];
                        out.push(model.element(&c)?);
                    }
                }
            }
        }
        GroupModel::Su2 => {
            let per = 10;
            for i in 0..per {
                for j in 0..per {
                    for k in 0..per {
                        let u = (i as f64 + 0.5) / per as f64;
                        let a1 = j as f64 / per as f64 * std::f64::consts::TAU;
                        let a2 = k as f64 / per as f64 * std::f64::consts::TAU;
                        let (r1, r2) = ((1.0 - u).sqrt(), u.sqrt());
                        out.push(model.element(&[r1 * a1.cos(), r2 * a2.cos(), r2 * a2.sin(), r1 * a1.sin()])?);
                    }
                }
            }
        }
        GroupModel::Heisenberg => {
            return Err(Error::Unsupported("probe grids need a compact model".into()));
        }
    }
    Ok(out)
}

/// Estimates `D = sup_x |U(x) + ε² log p(ε², x₀, x)|` over a Haar sample of
/// size `n_probe` plus [`probe_grid`], for every `ε` in `eps_grid`.
#[allow(clippy::too_many_arguments)]
pub fn estimate_d<F>(
    model: &GroupModel,
    u: &dyn ScalarField,
    x0: &GroupElement,
    eps_grid: &[f64],
    mut km_builder: F,
    n_probe: usize,
    seed: u64,
) -> Result<DReport>
where
    F: FnMut(f64) -> Result<KernelModel>,
{
    model.check(x0)?;
    if eps_grid.is_empty() {
        return Err(Error::invalid("eps_grid", "empty"));
    }
    for &e in eps_grid {
        ensure_positive("eps", e)?;
    }
    if matches!(model, GroupModel::HeisenbergNilmanifold) && x0.coords().iter().any(|c| *c != 0.0) {
        return Err(Error::Unsupported(
            "nilmanifold kernels are only available from the identity coset".into(),
        ));
    }
    let x0_inv = model.inverse(x0)?;
    let mut rng = path_rng(seed, 0);
    let mut probes = probe_grid(model)?;
    for _ in 0..n_probe {
        probes.push(model.haar_sample(&mut rng)?);
    }
    let mut best = (f64::NEG_INFINITY, Vec::new(), 0.0);
    let mut per_eps = Vec::new();
    for &eps in eps_grid {
        let t = eps * eps;
        let km = km_builder(t)?;
        let vals: Vec<f64> = probes
            .par_iter()
            .map(|x| {
                let rel = model.mul(&x0_inv, x)?;
                Ok((u.value(x) + t * km.log_heat_kernel(t, &rel)?).abs())
            })
            .collect::<Result<_>>()?;
        let (i, m) = vals.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
        if !m.is_finite() {
            return Err(Error::non_finite(format!("estimate_d at ε = {eps}")));
        }
        per_eps.push((eps, m));
        if m > best.0 {
            best = (m, probes[i].coords().to_vec(), eps);
        }
    }
    Ok(DReport {
        d_hat: best.0,
        argmax: best.1,
        argmax_eps: best.2,
        per_eps,
        n_probes: probes.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{Constant, FnField};
    use approx::assert_abs_diff_eq;

    #[test]
    fn carre_du_champ_examples() {
        let t = GroupModel::torus(1).unwrap();
        assert_eq!(carre_du_champ(&t, &Constant(2.0), None, &t.identity()).unwrap(), 0.0);
        let sin = TorusTrig {
            k: vec![1.0],
            sine: true,
        };
        assert_abs_diff_eq!(
            carre_du_champ(&t, &sin, None, &t.identity()).unwrap(),
            1.0,
            epsilon = 1e-15
        );
        let h = GroupModel::Heisenberg;
        let z = FnField::new(|g: &GroupElement| g[2]);
        assert_abs_diff_eq!(
            carre_du_champ(&h, &z, None, &h.identity()).unwrap(),
            0.0,
            epsilon = 1e-10
        );
    }

    #[test]
    fn formula_examples() {
        assert_eq!(gap_from_dm(1.0, 1.0).unwrap().value, 0.5);
        assert_eq!(gap_from_dm(1.0, 0.25).unwrap().value, 2.0);
        assert_eq!(gap_from_dm(2.0, 0.5).unwrap().value, 0.5);
        assert!(gap_from_dm(0.0, 1.0).is_err());
        assert_eq!(perturbed_gap_bound(0.7, 0.0).unwrap().value, 0.7);
        assert_abs_diff_eq!(perturbed_gap_bound(0.5, 1.0).unwrap().value, 0.0677, epsilon = 1e-4);
        assert!(perturbed_gap_bound(0.5, -1.0).is_err());
    }

    #[test]
    fn constant_dictionary_is_degenerate() {
        let t = GroupModel::torus(1).unwrap();
        let dict = TestFunctionDictionary::custom(
            "const",
            t,
            vec![DictEntry {
                name: "one".into(),
                f: std::sync::Arc::new(Constant(1.0)),
            }],
        )
        .unwrap();
        assert!(matches!(
            estimate_dm_constant(&t, &dict, &[0.5], 100, 0.01, 1),
            Err(Error::Degenerate(_))
        ));
        let s: Vec<_> = (0..100).map(|i| t.element(&[i as f64 * 0.1]).unwrap()).collect();
        assert!(matches!(
            estimate_spectral_gap(&t, &s, &dict),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn constant_poincare_margin_is_zero() {
        let t = GroupModel::torus(1).unwrap();
        let r = local_poincare_check(&t, &Constant(1.0), 1.0, 0.5, 100, 0.01, 1).unwrap();
        assert_eq!((r.lhs, r.rhs, r.margin_in_se), (0.0, 0.0, 0.0));
    }
}
