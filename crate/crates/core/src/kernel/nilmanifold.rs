//! Heat kernel on the Heisenberg nilmanifold Γ\G.
//!
//! The density at the coset of `g` is `Σ_λ p_G(λg)`. For small `t` the sum is
//! taken directly over the few lattice images close to the identity. For
//! larger `t` the sum over the central direction is done by Poisson
//! summation: with `w = (a+x, b+y)` and `Z = z + ab/2 + ½(ay − bx)`,
//!
//! ```text
//! Σ_m p_G(w, Z+m) = Σ_k q_k(|w|²) e^{2πikZ},
//! q_k(ρ²) = (2πt)⁻¹ (πkt / sinh πkt) exp(−ρ²/(2t) · πkt coth πkt).
//! ```

use super::gaveau;
use crate::error::{Error, Result};
use crate::group::heisenberg;
use std::f64::consts::PI;

/// Below this time the direct image sum is used.
pub const POISSON_MIN_T: f64 = 0.1;

/// `(log p, [V₁ log p, V₂ log p])` at a canonical representative.
pub fn log_density_and_gradient(t: f64, g: [f64; 3]) -> Result<(f64, [f64; 2])> {
    if t < POISSON_MIN_T {
        image_sum(t, g)
    } else {
        poisson_sum(t, g)
    }
}

pub fn image_sum(t: f64, g: [f64; 3]) -> Result<(f64, [f64; 2])> {
    let [x, y, z] = g;
    let mut cands = Vec::new();
    let mut best_hi = f64::INFINITY;
    for a in -6_i64..=6 {
        for b in -6_i64..=6 {
            let (af, bf) = (a as f64, b as f64);
            let zc = z + 0.5 * af * bf + 0.5 * (af * y - bf * x);
            let m0 = -zc.round();
            for dm in -3..=3 {
                let img = [af + x, bf + y, zc + m0 + dm as f64];
                let lo = heisenberg::distance_lower_bound(img);
                best_hi = best_hi.min(heisenberg::distance_upper_bound(img));
                cands.push((lo, img));
            }
        }
    }
    let cutoff = best_hi * best_hi + 90.0 * t;
    let mut terms = Vec::new();
    for (lo, img) in cands {
        if lo * lo <= cutoff {
            terms.push(gaveau::evaluate(t, img)?);
        }
    }
    let m = terms.iter().map(|e| e.log_p).fold(f64::NEG_INFINITY, f64::max);
    let (mut s, mut g1, mut g2) = (0.0, 0.0, 0.0);
    for e in &terms {
        let w = (e.log_p - m).exp();
        s += w;
        g1 += w * e.grad[0];
        g2 += w * e.grad[1];
    }
    Ok((m + s.ln(), [g1 / s, g2 / s]))
}

pub fn poisson_sum(t: f64, g: [f64; 3]) -> Result<(f64, [f64; 2])> {
    let [x, y, z] = g;
    let k_max = (40.0 / (PI * t)).ceil().max(1.0) as usize;
    // Fourier coefficients in k only depend on |w|² through these constants
    let mut amp = Vec::with_capacity(k_max + 1);
    let mut rate = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        let u = PI * k as f64 * t;
        let (ratio, coth_term) = if k == 0 {
            (1.0, 1.0)
        } else {
            (u / u.sinh(), u / u.tanh())
        };
        let c = if k == 0 { 1.0 } else { 2.0 };
        amp.push(c * ratio / (2.0 * PI * t));
        rate.push(coth_term / (2.0 * t));
    }
    let reach = (100.0 * t).sqrt() + 1.0;
    let n_ab = reach.ceil() as i64 + 1;
    let (mut s, mut v1, mut v2) = (0.0, 0.0, 0.0);
    for a in -n_ab..=n_ab {
        let wx = a as f64 + x;
        if wx.abs() > reach + 1.0 {
            continue;
        }
        for b in -n_ab..=n_ab {
            let wy = b as f64 + y;
            let rho2 = wx * wx + wy * wy;
            if rho2 / (2.0 * t) > 60.0 {
                continue;
            }
            let zz = z + 0.5 * (a * b) as f64 + 0.5 * (a as f64 * y - b as f64 * x);
            let (vz1, vz2) = (-0.5 * wy, 0.5 * wx);
            for k in 0..=k_max {
                let q = amp[k] * (-rho2 * rate[k]).exp();
                if q == 0.0 {
                    break;
                }
                let phase = 2.0 * PI * k as f64 * zz;
                let (sn, cs) = phase.sin_cos();
                s += q * cs;
                // V_i q = q · (−rate) · V_i|w|², with V_i|w|² = 2w_i
                let dq = -rate[k] * q * cs;
                let dphase = -q * sn * 2.0 * PI * k as f64;
                v1 += dq * 2.0 * wx + dphase * vz1;
                v2 += dq * 2.0 * wy + dphase * vz2;
            }
        }
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Convergence {
            operation: "nilmanifold Poisson summation",
            diagnostics: format!("t = {t}, g = {g:?}, sum = {s}"),
        });
    }
    Ok((s.ln(), [v1 / s, v2 / s]))
}
