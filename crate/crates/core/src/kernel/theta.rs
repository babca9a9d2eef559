//! Heat kernel of `½ d²/dθ²` on the circle, as a density w.r.t. Lebesgue
//! measure on `[0, 2π)`.

use std::f64::consts::{PI, TAU};

const SERIES_TERMS: usize = 50;
/// Below this time the wrapped Gaussian is summed in log space instead of
/// the Fourier series, which loses relative accuracy in the tails.
const SWITCH_T: f64 = 0.5;

fn centered(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// `(log p, d/dθ log p)` at time `t`.
pub fn log_density_and_derivative(t: f64, theta: f64) -> (f64, f64) {
    let th = centered(theta);
    if t >= SWITCH_T {
        let (mut s, mut ds) = (0.5, 0.0);
        for n in 1..=SERIES_TERMS {
            let nf = n as f64;
            let w = (-nf * nf * t / 2.0).exp();
            if w < 1e-20 {
                break;
            }
            let (sn, cn) = (nf * th).sin_cos();
            s += w * cn;
            ds -= w * nf * sn;
        }
        // p = (1/2π)(1 + 2Σ ...) = (1/π)(½ + Σ ...)
        ((s / PI).ln(), ds / s)
    } else {
        let mut terms = [0.0; 9];
        let mut slopes = [0.0; 9];
        for (k, (lt, sl)) in terms.iter_mut().zip(slopes.iter_mut()).enumerate() {
            let u = th - TAU * (k as f64 - 4.0);
            *lt = -u * u / (2.0 * t);
            *sl = -u / t;
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (mut z, mut g) = (0.0, 0.0);
        for (lt, sl) in terms.iter().zip(slopes.iter()) {
            let w = (lt - m).exp();
            z += w;
            g += w * sl;
        }
        (m + z.ln() - 0.5 * (TAU * t).ln(), g / z)
    }
}
