//! Gaussian kernel density estimates on chart grids.
//!
//! Samples are linearly binned onto grid nodes and the binned masses are
//! scattered with a discretized Gaussian, one axis at a time. Scattering with
//! normalized weights moves mass around without creating or destroying it, so
//! the estimate integrates to one over the chart exactly.
//!
//! The nilmanifold grid has `N × N × 2N` nodes. Crossing the `x` or `y`
//! boundary shifts the `z` index by the lattice twist, so the estimate lives
//! on Γ\G rather than on the 3-torus.

use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupModel};
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    /// Nodes at `lo + iΔ`, wrapping around.
    Periodic,
    /// Cell-centred nodes at `lo + (i+½)Δ`, mirrored at both ends.
    Reflect,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
    pub kind: AxisKind,
}

impl Axis {
    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / self.n as f64
    }

    fn fractional_index(&self, c: f64) -> f64 {
        let f = (c - self.lo) / self.spacing();
        match self.kind {
            AxisKind::Periodic => f,
            AxisKind::Reflect => f - 0.5,
        }
    }

    pub fn node(&self, i: usize) -> f64 {
        match self.kind {
            AxisKind::Periodic => self.lo + i as f64 * self.spacing(),
            AxisKind::Reflect => self.lo + (i as f64 + 0.5) * self.spacing(),
        }
    }
}

/// Chart layout for a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridLayout {
    pub axes: Vec<Axis>,
    /// Nilmanifold gluing of the `z` index across the `x`/`y` boundaries.
    pub twisted: bool,
}

impl GridLayout {
    /// Default layout: torus 1024 / 256² / 64³ nodes, nilmanifold 32×32×64,
    /// SU(2) 64³.
    pub fn for_model(model: &GroupModel) -> Result<Self> {
        Self::with_resolution(model, None)
    }

    pub fn with_resolution(model: &GroupModel, n: Option<usize>) -> Result<Self> {
        let periodic = |lo: f64, hi: f64, n: usize| Axis {
            lo,
            hi,
            n,
            kind: AxisKind::Periodic,
        };
        match model {
            GroupModel::Torus(d) if *d <= 3 => {
                let n = n.unwrap_or([1024, 256, 64][*d - 1]);
                Ok(GridLayout {
                    axes: vec![periodic(0.0, TAU, n); *d],
                    twisted: false,
                })
            }
            GroupModel::HeisenbergNilmanifold => {
                let n = n.unwrap_or(32);
                Ok(GridLayout {
                    axes: vec![periodic(0.0, 1.0, n), periodic(0.0, 1.0, n), periodic(0.0, 1.0, 2 * n)],
                    twisted: true,
                })
            }
            GroupModel::Su2 => {
                let n = n.unwrap_or(64);
                Ok(GridLayout {
                    axes: vec![
                        Axis {
                            lo: 0.0,
                            hi: 1.0,
                            n,
                            kind: AxisKind::Reflect,
                        },
                        periodic(-PI, PI, n),
                        periodic(-PI, PI, n),
                    ],
                    twisted: false,
                })
            }
            other => Err(Error::Unsupported(format!("grid density estimate on {other}"))),
        }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.spacing()).product()
    }

    fn strides(&self) -> [usize; 3] {
        let mut s = [0; 3];
        let mut acc = 1;
        for k in (0..self.dim()).rev() {
            s[k] = acc;
            acc *= self.axes[k].n;
        }
        s
    }

    /// Flat index of a possibly out-of-range node, applying the gluing.
    fn wrap(&self, idx: [i64; 3]) -> usize {
        let mut idx = idx;
        if self.twisted {
            let n = self.axes[0].n as i64;
            let nz = self.axes[2].n as i64;
            let wx = idx[0].div_euclid(n);
            let wy = idx[1].div_euclid(n);
            if wx != 0 || wy != 0 {
                let (a, b) = (-wx, -wy);
                // z shift of the lattice element (a, b, ab/2) in units of 1/(2N)
                idx[2] += n * a * b + a * idx[1] - b * idx[0];
                idx[0] += a * n;
                idx[1] += b * n;
            }
            idx[2] = idx[2].rem_euclid(nz);
        }
        let strides = self.strides();
        let mut flat = 0;
        for (k, ax) in self.axes.iter().enumerate() {
            let n = ax.n as i64;
            let i = match ax.kind {
                AxisKind::Periodic => idx[k].rem_euclid(n),
                AxisKind::Reflect => {
                    let p = idx[k].rem_euclid(2 * n);
                    if p < n {
                        p
                    } else {
                        2 * n - 1 - p
                    }
                }
            };
            flat += i as usize * strides[k];
        }
        flat
    }

    fn unflatten(&self, mut flat: usize) -> [i64; 3] {
        let mut idx = [0_i64; 3];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].n;
            idx[k] = (flat % n) as i64;
            flat /= n;
        }
        idx
    }

    /// Corner indices and multilinear weights around chart point `c`.
    fn stencil(&self, c: &[f64]) -> ([usize; 8], [f64; 8], usize) {
        let d = self.dim();
        let mut base = [0_i64; 3];
        let mut frac = [0.0; 3];
        for k in 0..d {
            let f = self.axes[k].fractional_index(c[k]);
            let i = f.floor();
            base[k] = i as i64;
            frac[k] = f - i;
        }
        let mut idx = [0; 8];
        let mut w = [0.0; 8];
        let corners = 1 << d;
        for (m, (slot, wt)) in idx.iter_mut().zip(w.iter_mut()).enumerate().take(corners) {
            let mut cell = base;
            let mut weight = 1.0;
            for k in 0..d {
                if m >> k & 1 == 1 {
                    cell[k] += 1;
                    weight *= frac[k];
                } else {
                    weight *= 1.0 - frac[k];
                }
            }
            *slot = self.wrap(cell);
            *wt = weight;
        }
        (idx, w, corners)
    }

    pub fn interpolate(&self, values: &[f64], c: &[f64]) -> f64 {
        let (idx, w, n) = self.stencil(c);
        (0..n).map(|m| w[m] * values[idx[m]]).sum()
    }

    fn bin(&self, points: &[[f64; 3]]) -> Vec<f64> {
        let mut mass = vec![0.0; self.len()];
        for p in points {
            let (idx, w, n) = self.stencil(&p[..self.dim()]);
            for m in 0..n {
                mass[idx[m]] += w[m];
            }
        }
        mass
    }

    /// Separable scatter of `mass` with Gaussian widths `h` (chart units).
    fn smooth(&self, mass: &[f64], h: &[f64]) -> Vec<f64> {
        let mut cur = mass.to_vec();
        for (k, ax) in self.axes.iter().enumerate() {
            let step = ax.spacing();
            let reach = ((4.0 * h[k] / step).ceil() as i64).clamp(1, ax.n as i64 * 2);
            let mut w: Vec<f64> = (-reach..=reach)
                .map(|j| {
                    let u = j as f64 * step / h[k];
                    (-0.5 * u * u).exp()
                })
                .collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= total);
            let mut out = vec![0.0; cur.len()];
            for (flat, &m) in cur.iter().enumerate() {
                if m == 0.0 {
                    continue;
                }
                let base = self.unflatten(flat);
                for (o, wj) in (-reach..=reach).zip(w.iter()) {
                    let mut idx = base;
                    idx[k] += o;
                    out[self.wrap(idx)] += m * wj;
                }
            }
            cur = out;
        }
        cur
    }
}

/// Chart coordinates of `g` (see [`GroupModel::chart`]).
pub fn chart_coords(model: &GroupModel, g: &GroupElement) -> [f64; 3] {
    match g {
        GroupElement::Torus(a) => {
            let mut c = [0.0; 3];
            c[..a.len()].copy_from_slice(a);
            c
        }
        GroupElement::Heisenberg(h) => match model {
            GroupModel::HeisenbergNilmanifold => crate::group::heisenberg::reduce(*h),
            _ => *h,
        },
        GroupElement::Su2(q) => [q.x * q.x + q.y * q.y, q.z.atan2(q.w), q.y.atan2(q.x)],
    }
}

/// Factor converting a density in chart coordinates into a density w.r.t.
/// the model's Haar measure.
pub fn haar_factor(model: &GroupModel) -> f64 {
    match model {
        // chart (u, ξ₁, ξ₂) carries half the Lebesgue measure of S³; Haar is a
        // probability measure, so p = 4π² ρ
        GroupModel::Su2 => 4.0 * PI * PI,
        _ => 1.0,
    }
}

/// Density estimate on a chart grid, expressed w.r.t. Haar measure.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KdeGrid {
    pub model: GroupModel,
    pub layout: GridLayout,
    pub bandwidth: Vec<f64>,
    pub n_samples: usize,
    /// Density values at nodes (row-major, last axis fastest).
    pub density: Vec<f64>,
    /// Pointwise standard error of `density`.
    pub standard_error: Vec<f64>,
}

/// Silverman's rule scaled by 0.8, per axis. Periodic axes use the circular
/// standard deviation.
pub fn silverman_bandwidth(layout: &GridLayout, points: &[[f64; 3]]) -> Vec<f64> {
    let d = layout.dim() as f64;
    let n = points.len().max(2) as f64;
    let factor = 0.8 * (4.0 / (d + 2.0)).powf(1.0 / (d + 4.0)) * n.powf(-1.0 / (d + 4.0));
    layout
        .axes
        .iter()
        .enumerate()
        .map(|(k, ax)| {
            let sd = match ax.kind {
                AxisKind::Periodic => {
                    let scale = TAU / (ax.hi - ax.lo);
                    let (mut c, mut s) = (0.0, 0.0);
                    for p in points {
                        let a = (p[k] - ax.lo) * scale;
                        c += a.cos();
                        s += a.sin();
                    }
                    let r = (c.hypot(s) / n).clamp(1e-12, 1.0 - 1e-12);
                    (-2.0 * r.ln()).sqrt() / scale
                }
                AxisKind::Reflect => {
                    let mean = points.iter().map(|p| p[k]).sum::<f64>() / n;
                    (points.iter().map(|p| (p[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
                }
            };
            let sd = sd.min((ax.hi - ax.lo) / 4.0);
            (factor * sd).max(ax.spacing())
        })
        .collect()
}

impl KdeGrid {
    /// Estimate from samples; `bandwidth = None` selects Silverman's rule.
    pub fn from_samples(
        model: &GroupModel,
        samples: &[GroupElement],
        layout: GridLayout,
        bandwidth: Option<f64>,
    ) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::invalid("n_paths", "density estimate needs at least one sample"));
        }
        let points: Vec<[f64; 3]> = samples.iter().map(|g| chart_coords(model, g)).collect();
        let h = match bandwidth {
            Some(b) => {
                crate::error::ensure_positive("bandwidth", b)?;
                vec![b; layout.dim()]
            }
            None => silverman_bandwidth(&layout, &points),
        };
        let n = samples.len() as f64;
        let mass = layout.bin(&points);
        let smooth = layout.smooth(&mass, &h);
        let h_half: Vec<f64> = h.iter().map(|v| v / 2.0_f64.sqrt()).collect();
        let smooth_half = layout.smooth(&mass, &h_half);
        let cell = layout.cell_volume();
        let jac = haar_factor(model);
        // ∫K_h² factor: Π 1/(2√π h_k)
        let sq_norm: f64 = h.iter().map(|v| 1.0 / (2.0 * PI.sqrt() * v)).product();
        let mut density = Vec::with_capacity(smooth.len());
        let mut se = Vec::with_capacity(smooth.len());
        for (s, s2) in smooth.iter().zip(smooth_half.iter()) {
            let rho = s / (n * cell);
            let second = sq_norm * s2 / (n * cell);
            let var = ((second - rho * rho) / n).max(0.0);
            density.push(rho * jac);
            se.push(var.sqrt() * jac);
        }
        Ok(KdeGrid {
            model: *model,
            layout,
            bandwidth: h,
            n_samples: samples.len(),
            density,
            standard_error: se,
        })
    }

    /// `(p, se)` at `g` by multilinear interpolation.
    pub fn density_at(&self, g: &GroupElement) -> (f64, f64) {
        let c = chart_coords(&self.model, g);
        let c = &c[..self.layout.dim()];
        (
            self.layout.interpolate(&self.density, c),
            self.layout.interpolate(&self.standard_error, c),
        )
    }

    /// `∫ p dμ` over the chart by the node rule, which is exact for the
    /// multilinear interpolant on periodic and mirrored axes.
    pub fn total_mass(&self) -> f64 {
        let vol = self.layout.cell_volume() / haar_factor(&self.model);
        self.density.iter().sum::<f64>() * vol
    }

    /// Mean cell width, the default step for gradients of the interpolant.
    pub fn mean_spacing(&self) -> f64 {
        self.layout.axes.iter().map(|a| a.spacing()).sum::<f64>() / self.layout.dim() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;
    use approx::assert_abs_diff_eq;

    #[test]
    fn twisted_wrap_matches_lattice_reduction() {
        let layout = GridLayout::with_resolution(&GroupModel::HeisenbergNilmanifold, Some(8)).unwrap();
        let n = 8_i64;
        for idx in [[9, 3, 5], [-1, 2, 0], [4, -3, 15], [17, 9, 3]] {
            let flat = layout.wrap(idx);
            let lifted = [
                idx[0] as f64 / n as f64,
                idx[1] as f64 / n as f64,
                idx[2] as f64 / (2 * n) as f64,
            ];
            let r = crate::group::heisenberg::reduce(lifted);
            let expect = [
                (r[0] * n as f64).round() as i64 % n,
                (r[1] * n as f64).round() as i64 % n,
                (r[2] * 2.0 * n as f64).round() as i64 % (2 * n),
            ];
            assert_eq!(layout.unflatten(flat), expect, "{idx:?}");
        }
    }

    #[test]
    fn mass_is_preserved() {
        let mut rng = path_rng(3, 0);
        for model in [GroupModel::Torus(2), GroupModel::HeisenbergNilmanifold, GroupModel::Su2] {
            let samples: Vec<_> = (0..2000).map(|_| model.haar_sample(&mut rng).unwrap()).collect();
            let layout = GridLayout::with_resolution(&model, Some(16)).unwrap();
            let kde = KdeGrid::from_samples(&model, &samples, layout, None).unwrap();
            assert_abs_diff_eq!(kde.total_mass(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn uniform_samples_give_flat_density() {
        let mut rng = path_rng(4, 0);
        let model = GroupModel::Su2;
        let samples: Vec<_> = (0..50_000).map(|_| model.haar_sample(&mut rng).unwrap()).collect();
        let layout = GridLayout::with_resolution(&model, Some(16)).unwrap();
        let kde = KdeGrid::from_samples(&model, &samples, layout, Some(0.15)).unwrap();
        for _ in 0..20 {
            let g = model.haar_sample(&mut rng).unwrap();
            let (p, se) = kde.density_at(&g);
            assert!((p - 1.0).abs() < 5.0 * se + 0.02, "p = {p}, se = {se}");
        }
    }

    #[test]
    fn empty_sample_is_an_error() {
        let layout = GridLayout::for_model(&GroupModel::Torus(1)).unwrap();
        assert!(KdeGrid::from_samples(&GroupModel::Torus(1), &[], layout, None).is_err());
    }
}
