//! Heat kernel `p(t, x)` of `L = ½ Σ V_i²` (density of `X_t` started at the
//! identity, w.r.t. Haar measure), its logarithm and horizontal gradient.
//!
//! Backends: theta series on tori, the contour integral on the free
//! Heisenberg group, lattice sums of it on the nilmanifold, and grid density
//! estimates from simulated paths for any compact model.

pub mod gaveau;
pub mod kde;
pub mod nilmanifold;
pub mod theta;
mod varadhan;

pub use kde::{GridLayout, KdeGrid};
pub use varadhan::{varadhan_diagnostic, VaradhanReport, VaradhanRow};

use crate::dynamics;
use crate::error::{Error, Result};
use crate::group::{AlgebraVector, GroupElement, GroupModel, ScalarField};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

/// Relative standard error of a grid density above which values and
/// gradients are flagged as noisy.
pub const NOISE_THRESHOLD: f64 = 0.25;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    ClosedFormSeries,
    GaveauIntegral,
    McKdeGrid,
}

#[derive(Clone, Debug)]
enum Backend {
    Theta,
    FreeHeisenberg,
    Nilmanifold,
    Grid { t: f64, grid: Box<KdeGrid> },
}

/// Estimated total mass of the density and its standard error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormalizationCertificate {
    pub mass: f64,
    pub standard_error: f64,
}

/// Provenance of a Monte-Carlo kernel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridProvenance {
    pub n_paths: usize,
    pub dt: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct KernelValue {
    pub log_p: f64,
    /// Standard error of `log p` (grid backends only).
    pub se_log_p: Option<f64>,
    pub noisy: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelGradient {
    pub grad: AlgebraVector,
    pub standard_error: Option<Vec<f64>>,
    pub noisy: bool,
}

/// Evaluator for `p(t, ·)` on one model.
#[derive(Clone, Debug)]
pub struct KernelModel {
    model: GroupModel,
    backend: Backend,
    t_range: (f64, f64),
    certificate: Option<NormalizationCertificate>,
    provenance: Option<GridProvenance>,
}

impl KernelModel {
    /// Closed-form backend: tori, the free Heisenberg group and the nilmanifold.
    pub fn closed_form(model: GroupModel) -> Result<Self> {
        let (backend, t_range) = match model {
            GroupModel::Torus(_) => (Backend::Theta, (1e-3, 1e4)),
            GroupModel::Heisenberg => (Backend::FreeHeisenberg, (1e-3, 1e3)),
            GroupModel::HeisenbergNilmanifold => (Backend::Nilmanifold, (2e-3, 1e2)),
            GroupModel::Su2 => {
                return Err(Error::Unsupported(
                    "no closed-form heat kernel for su2; build a Monte-Carlo kernel".into(),
                ))
            }
        };
        Ok(KernelModel {
            model,
            backend,
            t_range,
            certificate: None,
            provenance: None,
        })
    }

    pub fn from_grid(t: f64, grid: KdeGrid, provenance: Option<GridProvenance>) -> Self {
        let mass = grid.total_mass();
        KernelModel {
            model: grid.model,
            certificate: Some(NormalizationCertificate {
                mass,
                // binning and scattering conserve mass exactly
                standard_error: 0.0,
            }),
            backend: Backend::Grid {
                t,
                grid: Box::new(grid),
            },
            t_range: (t, t),
            provenance,
        }
    }

    pub fn model(&self) -> GroupModel {
        self.model
    }

    pub fn backend(&self) -> BackendKind {
        match self.backend {
            Backend::Theta | Backend::Nilmanifold => BackendKind::ClosedFormSeries,
            Backend::FreeHeisenberg => BackendKind::GaveauIntegral,
            Backend::Grid { .. } => BackendKind::McKdeGrid,
        }
    }

    pub fn t_range(&self) -> (f64, f64) {
        self.t_range
    }

    pub fn grid(&self) -> Option<&KdeGrid> {
        match &self.backend {
            Backend::Grid { grid, .. } => Some(grid),
            _ => None,
        }
    }

    pub fn provenance(&self) -> Option<&GridProvenance> {
        self.provenance.as_ref()
    }

    /// Stored certificate for grid kernels; closed forms integrate on demand
    /// (see [`KernelModel::certify`]).
    pub fn certificate(&self) -> Option<NormalizationCertificate> {
        self.certificate
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.t_range;
        let tol = 1e-12 * hi.abs().max(1.0);
        if t.is_finite() && t >= lo - tol && t <= hi + tol {
            Ok(())
        } else {
            Err(Error::OutOfRange { t, lo, hi })
        }
    }

    fn prepare(&self, x: &GroupElement) -> Result<GroupElement> {
        self.model.check(x)?;
        let c = self.model.canonical(*x);
        let moved = x
            .coords()
            .iter()
            .zip(c.coords().iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if moved > 1e-9 {
            log::warn!("kernel argument {:?} reduced to {:?}", x.coords(), c.coords());
        }
        Ok(c)
    }

    pub fn evaluate(&self, t: f64, x: &GroupElement) -> Result<KernelValue> {
        self.check_time(t)?;
        let x = self.prepare(x)?;
        let v = match &self.backend {
            Backend::Theta => KernelValue {
                log_p: x
                    .coords()
                    .iter()
                    .map(|&a| theta::log_density_and_derivative(t, a).0)
                    .sum(),
                se_log_p: None,
                noisy: false,
            },
            Backend::FreeHeisenberg => KernelValue {
                log_p: gaveau::evaluate(t, heis(&x))?.log_p,
                se_log_p: None,
                noisy: false,
            },
            Backend::Nilmanifold => KernelValue {
                log_p: nilmanifold::log_density_and_gradient(t, heis(&x))?.0,
                se_log_p: None,
                noisy: false,
            },
            Backend::Grid { grid, .. } => {
                let (p, se) = grid.density_at(&x);
                let p = p.max(f64::MIN_POSITIVE);
                let rel = se / p;
                KernelValue {
                    log_p: p.ln(),
                    se_log_p: Some(rel),
                    noisy: rel > NOISE_THRESHOLD,
                }
            }
        };
        if !v.log_p.is_finite() {
            return Err(Error::non_finite(format!("log p({t}, {:?})", x.coords())));
        }
        Ok(v)
    }

    pub fn log_heat_kernel(&self, t: f64, x: &GroupElement) -> Result<f64> {
        Ok(self.evaluate(t, x)?.log_p)
    }

    pub fn gradient(&self, t: f64, x: &GroupElement) -> Result<KernelGradient> {
        self.check_time(t)?;
        let x = self.prepare(x)?;
        let n = self.model.dimension();
        let mut grad = AlgebraVector::zeros(n);
        match &self.backend {
            Backend::Theta => {
                for (i, &a) in x.coords().iter().enumerate() {
                    grad.set(i, theta::log_density_and_derivative(t, a).1);
                }
            }
            Backend::FreeHeisenberg => {
                let e = gaveau::evaluate(t, heis(&x))?;
                grad.set(0, e.grad[0]);
                grad.set(1, e.grad[1]);
            }
            Backend::Nilmanifold => {
                let (_, g) = nilmanifold::log_density_and_gradient(t, heis(&x))?;
                grad.set(0, g[0]);
                grad.set(1, g[1]);
            }
            Backend::Grid { grid, .. } => {
                let h = grid.mean_spacing();
                let mut ses = Vec::new();
                let mut noisy = false;
                for i in 0..self.model.horizontal_rank() {
                    let e = self.model.basis(i);
                    let (pp, sp) = grid.density_at(&self.model.translate_unchecked(&x, &e.scale(h)));
                    let (pm, sm) = grid.density_at(&self.model.translate_unchecked(&x, &e.scale(-h)));
                    let (pp, pm) = (pp.max(f64::MIN_POSITIVE), pm.max(f64::MIN_POSITIVE));
                    grad.set(i, (pp.ln() - pm.ln()) / (2.0 * h));
                    let (rp, rm) = (sp / pp, sm / pm);
                    noisy |= rp.max(rm) > NOISE_THRESHOLD;
                    ses.push(rp.hypot(rm) / (2.0 * h));
                }
                return Ok(KernelGradient {
                    grad,
                    standard_error: Some(ses),
                    noisy,
                });
            }
        }
        if grad.iter().any(|v| !v.is_finite()) {
            return Err(Error::non_finite("horizontal gradient of log p"));
        }
        Ok(KernelGradient {
            grad,
            standard_error: None,
            noisy: false,
        })
    }

    pub fn grad_hor_log_kernel(&self, t: f64, x: &GroupElement) -> Result<AlgebraVector> {
        Ok(self.gradient(t, x)?.grad)
    }

    /// Integrates `p(t, ·)` over the model by a node rule on the default
    /// grid layout (grid kernels return their stored certificate).
    pub fn certify(&self, t: f64) -> Result<NormalizationCertificate> {
        if let Some(c) = self.certificate {
            self.check_time(t)?;
            return Ok(c);
        }
        if !self.model.is_compact() {
            return Err(Error::Unsupported("normalization on a non-compact model".into()));
        }
        self.check_time(t)?;
        match self.model {
            GroupModel::Torus(d) => {
                // product structure: one circle integral, to the d-th power
                let n = 4096;
                let h = std::f64::consts::TAU / n as f64;
                let one: f64 = (0..n)
                    .map(|k| theta::log_density_and_derivative(t, k as f64 * h).0.exp() * h)
                    .sum();
                Ok(NormalizationCertificate {
                    mass: one.powi(d as i32),
                    standard_error: 0.0,
                })
            }
            _ => {
                let n = 24;
                let mut total = 0.0;
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            let c = [i, j, k].map(|v| (v as f64 + 0.5) / n as f64);
                            total += nilmanifold::log_density_and_gradient(t, c)?.0.exp();
                        }
                    }
                }
                Ok(NormalizationCertificate {
                    mass: total / (n * n * n) as f64,
                    standard_error: 0.0,
                })
            }
        }
    }

    /// Writes a grid kernel as a JSON header plus a CSV payload
    /// (`index,i,j,k,p,se`).
    pub fn save_grid(&self, header_path: &Path, csv_path: &Path) -> Result<()> {
        let Backend::Grid { t, grid } = &self.backend else {
            return Err(Error::Unsupported("only Monte-Carlo kernels are persisted".into()));
        };
        let header = GridHeader {
            model: self.model,
            t: *t,
            bandwidth: grid.bandwidth.clone(),
            layout: grid.layout.clone(),
            n_samples: grid.n_samples,
            provenance: self.provenance.clone(),
            certificate: self.certificate,
        };
        std::fs::write(header_path, serde_json::to_string_pretty(&header)?)?;
        let mut w = std::io::BufWriter::new(std::fs::File::create(csv_path)?);
        writeln!(w, "index,i,j,k,p,se")?;
        let dims: Vec<usize> = grid.layout.axes.iter().map(|a| a.n).collect();
        for (flat, (p, se)) in grid.density.iter().zip(&grid.standard_error).enumerate() {
            let mut idx = [0usize; 3];
            let mut rest = flat;
            for k in (0..dims.len()).rev() {
                idx[k] = rest % dims[k];
                rest /= dims[k];
            }
            writeln!(w, "{flat},{},{},{},{p:.16e},{se:.16e}", idx[0], idx[1], idx[2])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load_grid(header_path: &Path, csv_path: &Path) -> Result<Self> {
        let header: GridHeader = serde_json::from_str(&std::fs::read_to_string(header_path)?)?;
        let expected = header.layout.len();
        let mut density = Vec::with_capacity(expected);
        let mut se = Vec::with_capacity(expected);
        let file = BufReader::new(std::fs::File::open(csv_path)?);
        for (lineno, line) in file.lines().enumerate().skip(1) {
            let line = line?;
            let f: Vec<&str> = line.split(',').collect();
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("{}:{}: {e}", csv_path.display(), lineno + 1)))
            };
            if f.len() != 6 {
                return Err(Error::Format(format!(
                    "{}:{}: expected 6 fields",
                    csv_path.display(),
                    lineno + 1
                )));
            }
            density.push(parse(f[4])?);
            se.push(parse(f[5])?);
        }
        if density.len() != expected {
            return Err(Error::Format(format!(
                "grid payload has {} rows, header declares {expected}",
                density.len()
            )));
        }
        let grid = KdeGrid {
            model: header.model,
            layout: header.layout,
            bandwidth: header.bandwidth,
            n_samples: header.n_samples,
            density,
            standard_error: se,
        };
        Ok(KernelModel::from_grid(header.t, grid, header.provenance))
    }
}

#[derive(Serialize, Deserialize)]
struct GridHeader {
    model: GroupModel,
    t: f64,
    bandwidth: Vec<f64>,
    layout: GridLayout,
    n_samples: usize,
    provenance: Option<GridProvenance>,
    certificate: Option<NormalizationCertificate>,
}

fn heis(x: &GroupElement) -> [f64; 3] {
    x.as_heisenberg().expect("checked model kind")
}

pub fn log_heat_kernel(km: &KernelModel, t: f64, x: &GroupElement) -> Result<f64> {
    km.log_heat_kernel(t, x)
}

pub fn grad_hor_log_kernel(km: &KernelModel, t: f64, x: &GroupElement) -> Result<AlgebraVector> {
    km.grad_hor_log_kernel(t, x)
}

/// Simulates `n_paths` driftless paths from the identity to time `t` and
/// estimates their density on the model's default grid.
///
/// `bandwidth = None` uses Silverman's rule scaled by 0.8.
pub fn build_mc_kernel(
    model: GroupModel,
    t: f64,
    n_paths: usize,
    dt: f64,
    bandwidth: Option<f64>,
    seed: u64,
) -> Result<KernelModel> {
    build_mc_kernel_on(model, t, n_paths, dt, bandwidth, seed, GridLayout::for_model(&model)?)
}

pub fn build_mc_kernel_on(
    model: GroupModel,
    t: f64,
    n_paths: usize,
    dt: f64,
    bandwidth: Option<f64>,
    seed: u64,
    layout: GridLayout,
) -> Result<KernelModel> {
    if n_paths == 0 {
        return Err(Error::invalid("n_paths", "must be positive"));
    }
    if !model.is_compact() {
        return Err(Error::Unsupported(format!("grid density estimate on {model}")));
    }
    crate::error::ensure_positive("t", t)?;
    crate::error::ensure_positive("dt", dt)?;
    if let Some(b) = bandwidth {
        crate::error::ensure_positive("bandwidth", b)?;
    }
    if dt > t / 100.0 + 1e-15 {
        log::warn!("dt = {dt} exceeds t/100 = {}", t / 100.0);
    }
    if n_paths < 10_000 {
        log::warn!("n_paths = {n_paths} is below the recommended 10^4");
    }
    let ends = dynamics::diffusion_endpoints(&model, &model.identity(), t, dt, n_paths, seed)?;
    let grid = KdeGrid::from_samples(&model, &ends, layout, bandwidth)?;
    Ok(KernelModel::from_grid(
        t,
        grid,
        Some(GridProvenance { n_paths, dt, seed }),
    ))
}

/// The natural potential `W_τ = −log p(τ, ·)` as a scalar field.
pub struct NaturalPotential {
    pub kernel: std::sync::Arc<KernelModel>,
    pub tau: f64,
}

impl NaturalPotential {
    pub fn new(kernel: std::sync::Arc<KernelModel>, tau: f64) -> Result<Self> {
        kernel.check_time(tau)?;
        Ok(NaturalPotential { kernel, tau })
    }
}

impl ScalarField for NaturalPotential {
    fn value(&self, g: &GroupElement) -> f64 {
        self.kernel.log_heat_kernel(self.tau, g).map(|v| -v).unwrap_or(f64::NAN)
    }

    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        Some(
            self.kernel
                .grad_hor_log_kernel(self.tau, g)
                .map(|v| -v[i])
                .unwrap_or(f64::NAN),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::{PI, TAU};

    #[test]
    fn torus_examples() {
        let km = KernelModel::closed_form(GroupModel::Torus(1)).unwrap();
        let m = GroupModel::Torus(1);
        // uniformization at large t
        let lp = km.log_heat_kernel(200.0, &m.element(&[1.0]).unwrap()).unwrap();
        assert_abs_diff_eq!(lp, -(TAU.ln()), epsilon = 1e-12);
        // 50-term series oracle at t = 1, θ = 0
        let s = 1.0 + 2.0 * (1..=50).map(|n| (-((n * n) as f64) / 2.0).exp()).sum::<f64>();
        let lp0 = km.log_heat_kernel(1.0, &m.identity()).unwrap();
        assert_abs_diff_eq!(lp0, (s / TAU).ln(), epsilon = 1e-14);
        // antisymmetry at π, zero at identity
        assert_abs_diff_eq!(
            km.grad_hor_log_kernel(0.7, &m.element(&[PI]).unwrap()).unwrap()[0],
            0.0,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            km.grad_hor_log_kernel(0.7, &m.identity()).unwrap()[0],
            0.0,
            epsilon = 1e-15
        );
        // outside range
        assert!(matches!(
            km.log_heat_kernel(1e-5, &m.identity()),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn su2_has_no_closed_form() {
        assert!(KernelModel::closed_form(GroupModel::Su2).is_err());
    }

    #[test]
    fn zero_paths_is_an_error() {
        assert!(build_mc_kernel(GroupModel::Torus(1), 0.5, 0, 0.005, Some(0.05), 1).is_err());
        assert!(build_mc_kernel(GroupModel::Torus(1), 0.5, 10, 0.005, Some(-1.0), 1).is_err());
    }
}
