use super::{make_schedule, CoolingSchedule, ScheduleOptions};
use crate::error::{Error, Result};
use crate::functional::{
    estimate_d, estimate_dm_constant, probe_grid, NilBase, TestFunctionDictionary, WeilBrezin, DEFAULT_DM_TIMES,
};
use crate::group::{heisenberg, FnField, GroupElement, GroupModel, ScalarField};
use crate::kernel::{build_mc_kernel, KernelModel};
use crate::rng::derive_seed;
use crate::rng::path_rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::sync::Arc;

/// Haar points added to the probe grid when scanning `|U − d²|`.
pub const BENCHMARK_SCAN_POINTS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BenchmarkMode {
    /// `U = d½(x0, ·)²`, non-smooth at the cut locus.
    Exact,
    /// A smooth single well at `x0` built from characters.
    Smooth,
}

impl std::str::FromStr for BenchmarkMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(BenchmarkMode::Exact),
            "smooth" => Ok(BenchmarkMode::Smooth),
            _ => Err(Error::invalid(
                "mode",
                format!("expected `exact` or `smooth`, got `{s}`"),
            )),
        }
    }
}

#[derive(Clone)]
pub struct BenchmarkPotential {
    pub field: Arc<dyn ScalarField>,
    pub label: String,
    pub mode: BenchmarkMode,
    pub x0: GroupElement,
    /// Scanned `sup |U − d½(x0, ·)²|`.
    pub d1_hat: f64,
    pub non_smooth: bool,
    /// Oscillation `max U − min U`.
    pub oscillation: f64,
    /// Smallest value seen, attained at `x0`.
    pub u_min: f64,
}

impl std::fmt::Debug for BenchmarkPotential {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BenchmarkPotential")
            .field("label", &self.label)
            .field("mode", &self.mode)
            .field("x0", &self.x0)
            .field("d1_hat", &self.d1_hat)
            .field("non_smooth", &self.non_smooth)
            .field("oscillation", &self.oscillation)
            .field("u_min", &self.u_min)
            .finish()
    }
}

/// Potential whose sup-distance to `d½(x0, ·)²` is bounded.
pub fn make_benchmark_potential(
    model: &GroupModel,
    x0: &GroupElement,
    mode: BenchmarkMode,
) -> Result<BenchmarkPotential> {
    model.check(x0)?;
    let m = *model;
    let xc = *x0;
    let exact = move |x: &GroupElement| m.half_distance_sq(&xc, x).unwrap_or(f64::NAN);
    let (field, label): (Arc<dyn ScalarField>, String) = match mode {
        BenchmarkMode::Exact => (Arc::new(FnField::new(exact)), "distance-squared".into()),
        BenchmarkMode::Smooth => (smooth_well(model, x0)?, "smooth-well".into()),
    };
    if !model.is_compact() {
        if mode == BenchmarkMode::Smooth {
            return Err(Error::Unsupported(format!("smooth benchmark on non-compact {model}")));
        }
        return Ok(BenchmarkPotential {
            field,
            label,
            mode,
            x0: *x0,
            d1_hat: 0.0,
            non_smooth: true,
            oscillation: f64::INFINITY,
            u_min: 0.0,
        });
    }

    let mut scan = probe_grid(model)?;
    if mode == BenchmarkMode::Smooth {
        let mut rng = path_rng(0x5ca9, 0);
        for _ in 0..BENCHMARK_SCAN_POINTS {
            scan.push(model.haar_sample(&mut rng)?);
        }
    }
    scan.push(*x0);
    let (mut lo, mut hi, mut d1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0_f64);
    for g in &scan {
        let u = field.value(g);
        if !u.is_finite() {
            return Err(Error::non_finite(format!(
                "benchmark potential at {:?}",
                g.coords().as_ref()
            )));
        }
        lo = lo.min(u);
        hi = hi.max(u);
        if mode == BenchmarkMode::Smooth {
            d1 = d1.max((u - exact(g)).abs());
        }
    }
    Ok(BenchmarkPotential {
        field,
        label,
        mode,
        x0: *x0,
        d1_hat: d1,
        non_smooth: mode == BenchmarkMode::Exact,
        oscillation: hi - lo,
        u_min: lo,
    })
}

/// Constants that went into [`benchmark_schedule`].
#[derive(Clone, Debug, Serialize)]
pub struct ScheduleInputs {
    /// `sup_ε sup_x |U + ε² log p(ε², x0, x)|` over `eps_grid`.
    pub d_hat: f64,
    pub k_hat: f64,
    pub oscillation: f64,
    pub eps_grid: Vec<f64>,
}

/// Noise levels at which `D` is probed.
pub const SCHEDULE_EPS_GRID: [f64; 3] = [0.5, 0.75, 1.0];

/// Cooling schedule for a benchmark potential with `D`, `K` and `N`
/// estimated from the model.
pub fn benchmark_schedule(
    model: &GroupModel,
    bench: &BenchmarkPotential,
    opts: ScheduleOptions,
    seed: u64,
) -> Result<(CoolingSchedule, ScheduleInputs)> {
    let m = *model;
    let closed = KernelModel::closed_form(m).is_ok();
    let builder = |t: f64| {
        if closed {
            KernelModel::closed_form(m)
        } else {
            build_mc_kernel(m, t, 20_000, t / 100.0, None, derive_seed(seed, "schedule-kernel"))
        }
    };
    let d = estimate_d(
        model,
        bench.field.as_ref(),
        &bench.x0,
        &SCHEDULE_EPS_GRID,
        builder,
        2_000,
        derive_seed(seed, "schedule-d"),
    )?;
    let k_hat = driver_melcher_constant(model, derive_seed(seed, "schedule-dm"))?;
    let schedule = make_schedule(d.d_hat, k_hat, bench.oscillation, opts)?;
    Ok((
        schedule,
        ScheduleInputs {
            d_hat: d.d_hat,
            k_hat,
            oscillation: bench.oscillation,
            eps_grid: SCHEDULE_EPS_GRID.to_vec(),
        },
    ))
}

/// `K̂` for the standard dictionary of `model` at default effort.
pub fn driver_melcher_constant(model: &GroupModel, seed: u64) -> Result<f64> {
    let dict = TestFunctionDictionary::standard(*model)?;
    let (times, n): (&[f64], usize) = match model {
        GroupModel::HeisenbergNilmanifold => (&[0.001, 0.01, 0.1, 0.5], 4_000),
        _ => (&DEFAULT_DM_TIMES, 20_000),
    };
    Ok(estimate_dm_constant(model, &dict, times, n, 1e-2, seed)?.k_hat)
}

fn smooth_well(model: &GroupModel, x0: &GroupElement) -> Result<Arc<dyn ScalarField>> {
    Ok(match (model, x0) {
        (GroupModel::Torus(_), _) => {
            let c = x0.coords();
            Arc::new(TorusWell { centre: c.to_vec() })
        }
        (GroupModel::Su2, GroupElement::Su2(q0)) => Arc::new(Su2Well { q0: *q0 }),
        (GroupModel::HeisenbergNilmanifold, _) => {
            let well = NilWell::new();
            if model.cc_distance(&model.identity(), x0)? < 1e-14 {
                Arc::new(well)
            } else {
                // right translation by the group inverse of the representative
                // is well defined on Γ\G
                let shift = heisenberg::inverse(x0.as_heisenberg().expect("nilmanifold element"));
                Arc::new(FnField::new(move |x: &GroupElement| {
                    let h = heisenberg::mul(x.as_heisenberg().expect("nilmanifold element"), shift);
                    well.value(&GroupElement::Heisenberg(heisenberg::reduce(h)))
                }))
            }
        }
        _ => return Err(Error::Unsupported(format!("smooth benchmark on {model}"))),
    })
}

/// `Σ (1 − cos(θᵢ − θ₀ᵢ))`.
struct TorusWell {
    centre: Vec<f64>,
}

impl ScalarField for TorusWell {
    fn value(&self, g: &GroupElement) -> f64 {
        self.centre
            .iter()
            .enumerate()
            .map(|(i, c)| 1.0 - (g[i] - c).cos())
            .sum()
    }
    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        Some((g[i] - self.centre.get(i)?).sin())
    }
}

/// `1 − Re(q̄₀ q)`.
struct Su2Well {
    q0: crate::group::Quaternion,
}

impl ScalarField for Su2Well {
    fn value(&self, g: &GroupElement) -> f64 {
        1.0 - self.q0.dot(g.as_quaternion().expect("su2 element"))
    }
    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        use crate::group::Quaternion;
        let u = [Quaternion::I, Quaternion::J, Quaternion::K].get(i).copied()?;
        let q = g.as_quaternion()?;
        Some(-self.q0.dot(q * u))
    }
}

/// `(2 − cos 2πx − cos 2πy)/4π² + (π/2)(1 − Re F/F(e))` with `F` the
/// frequency-one Weil–Brezin theta function.
struct NilWell {
    cx: NilBase,
    cy: NilBase,
    theta: WeilBrezin,
    theta_e: f64,
}

impl NilWell {
    fn new() -> Self {
        let theta = WeilBrezin {
            k: 1,
            excited: false,
            imaginary: false,
        };
        let theta_e = (-40..=40).map(|n: i32| (-PI * f64::from(n * n)).exp()).sum();
        NilWell {
            cx: NilBase {
                m: 1.0,
                n: 0.0,
                sine: false,
            },
            cy: NilBase {
                m: 0.0,
                n: 1.0,
                sine: false,
            },
            theta,
            theta_e,
        }
    }
}

impl ScalarField for NilWell {
    fn value(&self, g: &GroupElement) -> f64 {
        (2.0 - self.cx.value(g) - self.cy.value(g)) / (TAU * TAU)
            + FRAC_PI_2 * (1.0 - self.theta.value(g) / self.theta_e)
    }
    fn directional(&self, g: &GroupElement, i: usize) -> Option<f64> {
        let base = -(self.cx.directional(g, i)? + self.cy.directional(g, i)?) / (TAU * TAU);
        Some(base - FRAC_PI_2 * self.theta.directional(g, i)? / self.theta_e)
    }
    fn horizontal_gradient(&self, g: &GroupElement, out: &mut [f64]) -> bool {
        let mut th = [0.0; 2];
        let ok = self.theta.horizontal_gradient(g, &mut th[..out.len().min(2)]);
        for (i, o) in out.iter_mut().enumerate().take(2) {
            let base = match (self.cx.directional(g, i), self.cy.directional(g, i)) {
                (Some(a), Some(b)) => -(a + b) / (TAU * TAU),
                _ => return false,
            };
            *o = base - FRAC_PI_2 * th[i] / self.theta_e;
        }
        ok
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::finite_difference;

    #[test]
    fn wells_vanish_at_centre_and_have_consistent_derivatives() {
        let cases = [
            (GroupModel::torus(2).unwrap(), vec![0.3, 5.0]),
            (GroupModel::Su2, vec![0.5, 0.5, 0.5, 0.5]),
            (GroupModel::HeisenbergNilmanifold, vec![0.0, 0.0, 0.0]),
        ];
        for (m, c) in cases {
            let x0 = m.element(&c).unwrap();
            let b = make_benchmark_potential(&m, &x0, BenchmarkMode::Smooth).unwrap();
            assert!(b.field.value(&x0).abs() < 1e-12, "{m}");
            assert!(b.u_min.abs() < 1e-12 && b.oscillation > 0.0 && b.d1_hat.is_finite());
            let probe = m
                .element(&c.iter().map(|v| v * 0.9 + 0.05).collect::<Vec<_>>())
                .unwrap();
            for i in 0..m.horizontal_rank() {
                let an = b.field.directional(&probe, i).unwrap();
                let fd = finite_difference(&m, b.field.as_ref(), &probe, i, 1e-5).unwrap();
                assert!((an - fd).abs() < 1e-6, "{m} {i}: {an} vs {fd}");
            }
        }
    }

    #[test]
    fn torus_surrogate_distance_is_known() {
        let m = GroupModel::torus(1).unwrap();
        let x0 = m.element(&[1.0]).unwrap();
        let b = make_benchmark_potential(&m, &x0, BenchmarkMode::Smooth).unwrap();
        // sup of |θ²/2 − (1 − cos θ)| over [−π, π] is attained at ±π
        let exact = PI * PI / 2.0 - 2.0;
        assert!((b.d1_hat - exact).abs() < 1e-2, "{}", b.d1_hat);
        assert!((b.oscillation - 2.0).abs() < 1e-3);
        let e = make_benchmark_potential(&m, &x0, BenchmarkMode::Exact).unwrap();
        assert_eq!(e.d1_hat, 0.0);
        assert!(e.non_smooth);
        assert_eq!(e.field.value(&x0), 0.0);
    }

    #[test]
    fn shifted_nil_well_is_minimal_at_centre() {
        let m = GroupModel::HeisenbergNilmanifold;
        let x0 = m.element(&[0.25, 0.5, 0.75]).unwrap();
        let b = make_benchmark_potential(&m, &x0, BenchmarkMode::Smooth).unwrap();
        assert!(b.field.value(&x0).abs() < 1e-12);
        assert!(b.u_min > -1e-12);
    }
}
