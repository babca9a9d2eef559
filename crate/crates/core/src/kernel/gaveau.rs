//! Heat kernel of `½(V₁² + V₂²)` on the free Heisenberg group.
//!
//! With `A = (x²+y²)/(2t)` and `ω = 2|z|/t`,
//!
//! ```text
//! p(t; x, y, z) = 1/(2π²t²) ∫ℝ e^{iωs} (s / sinh s) exp(−A s coth s) ds.
//! ```
//!
//! The integrand is entire in the strip `|Im s| < π`. We move the contour to
//! `Im s = η`, where `η` is the saddle point of the exponent on the imaginary
//! axis. On that line the integrand is a non-oscillating bump at `σ = 0`, and
//! the trapezoid rule converges geometrically.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// `log p` and the horizontal derivatives `(V₁ log p, V₂ log p)`.
#[derive(Clone, Copy, Debug)]
pub struct FreeEval {
    pub log_p: f64,
    pub grad: [f64; 2],
    /// `∂z log p`.
    pub dz: f64,
}

fn exponent_on_axis(eta: f64, a: f64, omega: f64) -> f64 {
    if eta < 1e-6 {
        // η/sin η ≈ 1 + η²/6, η cot η ≈ 1 − η²/3
        return -omega * eta + eta * eta / 6.0 - a * (1.0 - eta * eta / 3.0);
    }
    -omega * eta + (eta / eta.sin()).ln() - a * eta / eta.tan()
}

fn saddle(a: f64, omega: f64) -> f64 {
    if omega == 0.0 {
        return 0.0;
    }
    // the exponent is convex in η on [0, π)
    let (mut lo, mut hi) = (0.0_f64, PI - 1e-9);
    let phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = exponent_on_axis(x1, a, omega);
    let mut f2 = exponent_on_axis(x2, a, omega);
    for _ in 0..90 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = exponent_on_axis(x1, a, omega);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = exponent_on_axis(x2, a, omega);
        }
    }
    0.5 * (lo + hi)
}

/// Integrand and its `A`- and `ω`-weighted versions at `s = σ + iη`.
fn integrand(sigma: f64, eta: f64, a: f64, omega: f64, shift: f64) -> [Complex64; 3] {
    let s = Complex64::new(sigma, eta);
    let (q, sc) = if s.norm() < 1e-6 {
        let s2 = s * s;
        (1.0 - s2 / 6.0, 1.0 + s2 / 3.0)
    } else {
        let sh = s.sinh();
        (s / sh, s * s.cosh() / sh)
    };
    let f = q * (Complex64::i() * omega * s - a * sc - shift).exp();
    [f, -sc * f, Complex64::i() * s * f]
}

/// Free-group kernel at `g = (x, y, z)`.
pub fn evaluate(t: f64, g: [f64; 3]) -> Result<FreeEval> {
    let [x, y, z] = g;
    let a = (x * x + y * y) / (2.0 * t);
    let omega = 2.0 * z.abs() / t;
    let eta = saddle(a, omega);
    let l0 = exponent_on_axis(eta, a, omega);

    // curvature of the exponent at the saddle sets the bump width
    let de = 1e-4_f64.min(0.5 * (PI - eta)).max(1e-9);
    let lo_eta = (eta - de).max(0.0);
    let curv = ((exponent_on_axis(eta + de, a, omega) - 2.0 * exponent_on_axis(eta, a, omega)
        + exponent_on_axis(lo_eta, a, omega))
        / (de * de))
        .abs();
    let width = 1.0 / (curv + 1.0).sqrt();
    let mut h = (0.5 * width).min(0.25);

    // march out until the integrand is negligible
    let mut sigma_max = h;
    loop {
        let f = integrand(sigma_max, eta, a, omega, l0)[0].norm();
        if (f < 1e-19 && sigma_max > 4.0 * width) || sigma_max > 600.0 {
            break;
        }
        sigma_max += h.max(0.25 * width);
    }

    let mut n = (sigma_max / h).ceil() as usize;
    let mut sums = [Complex64::new(0.0, 0.0); 3];
    for k in 0..=n {
        let w = if k == 0 { 0.5 } else { 1.0 };
        let v = integrand(k as f64 * h, eta, a, omega, l0);
        for j in 0..3 {
            sums[j] += w * v[j];
        }
    }
    let mut est: [f64; 3] = [0, 1, 2].map(|j| 2.0 * h * sums[j].re);
    let mut converged = false;
    for _ in 0..14 {
        let mut mid = [Complex64::new(0.0, 0.0); 3];
        for k in 0..n {
            let v = integrand((k as f64 + 0.5) * h, eta, a, omega, l0);
            for j in 0..3 {
                mid[j] += v[j];
            }
        }
        for j in 0..3 {
            sums[j] += mid[j];
        }
        h *= 0.5;
        n *= 2;
        let next: [f64; 3] = [0, 1, 2].map(|j| 2.0 * h * sums[j].re);
        let scale = next[0].abs().max(1e-300);
        let change = (0..3).map(|j| (next[j] - est[j]).abs()).fold(0.0, f64::max);
        est = next;
        if change <= 1e-12 * scale.max(est[1].abs()).max(est[2].abs()) {
            converged = true;
            break;
        }
    }
    if !converged || !(est[0] > 0.0) {
        return Err(Error::Convergence {
            operation: "heisenberg heat kernel quadrature",
            diagnostics: format!("t = {t}, g = {g:?}, integral = {}", est[0]),
        });
    }
    let log_p = -(2.0 * PI * PI * t * t).ln() + l0 + est[0].ln();
    let d_a = est[1] / est[0];
    let d_omega = est[2] / est[0];
    let dz = z.signum() * (2.0 / t) * d_omega;
    let dz = if z == 0.0 { 0.0 } else { dz };
    Ok(FreeEval {
        log_p,
        grad: [(x / t) * d_a - 0.5 * y * dz, (y / t) * d_a + 0.5 * x * dz],
        dz,
    })
}
