//! Sub-Riemannian distance on SU(2) with the frame `{i, j}`.
//!
//! Normal geodesics from the identity with unit speed are
//! `γ(s) = exp(s(X + βk))·exp(−sβk)` for a unit horizontal `X`. Conjugation by
//! `exp(θk)` is an isometry fixing `e`, so the distance to `q = a + bi + cj + dk`
//! only depends on `(a, |d|)`. We solve `(a(s,β), d(s,β)) = (a, |d|)` over a
//! grid in `(ψ = atan β, s)` followed by Newton refinement, and keep the
//! shortest solution.

use super::quaternion::Quaternion;
use crate::error::{Error, Result};
use std::f64::consts::{FRAC_PI_2, PI};

const N_PSI: usize = 72;
const N_S: usize = 160;
const S_MAX: f64 = 2.0 * PI;

/// Scalar and `k` components of the geodesic endpoint.
fn endpoint(s: f64, beta: f64) -> (f64, f64) {
    let r = (1.0 + beta * beta).sqrt();
    let c = (s * r).cos();
    let sr = (s * r).sin() / r;
    let (sb, cb) = (s * beta).sin_cos();
    (c * cb + sr * beta * sb, sr * beta * cb - c * sb)
}

fn newton(mut s: f64, mut beta: f64, a: f64, d: f64) -> Option<(f64, f64)> {
    for _ in 0..60 {
        let (fa, fd) = endpoint(s, beta);
        let (ra, rd) = (fa - a, fd - d);
        if ra.hypot(rd) < 1e-13 {
            return Some((s, beta));
        }
        let h = 1e-7;
        let (pa, pd) = endpoint(s + h, beta);
        let (ma, md) = endpoint(s - h, beta);
        let (qa, qd) = endpoint(s, beta + h);
        let (na, nd) = endpoint(s, beta - h);
        let j11 = (pa - ma) / (2.0 * h);
        let j21 = (pd - md) / (2.0 * h);
        let j12 = (qa - na) / (2.0 * h);
        let j22 = (qd - nd) / (2.0 * h);
        let det = j11 * j22 - j12 * j21;
        if det.abs() < 1e-300 {
            return None;
        }
        let mut ds = (j22 * ra - j12 * rd) / det;
        let mut db = (j11 * rd - j21 * ra) / det;
        // damp large steps
        let len = ds.hypot(db);
        if len > 0.5 {
            ds *= 0.5 / len;
            db *= 0.5 / len;
        }
        s -= ds;
        beta -= db;
        if !(s > 0.0 && s <= S_MAX + 1.0) || !beta.is_finite() {
            return None;
        }
    }
    let (fa, fd) = endpoint(s, beta);
    ((fa - a).hypot(fd - d) < 1e-10).then_some((s, beta))
}

/// Distance from the identity to the unit quaternion `q`.
pub fn distance_from_identity(q: Quaternion) -> Result<f64> {
    let q = q.normalized();
    let a = q.w.clamp(-1.0, 1.0);
    let d = q.z.abs().min(1.0);
    let horizontal = q.x.hypot(q.y);
    if horizontal < 1e-14 {
        // on the one-parameter subgroup exp(ζk)
        let zeta = d.atan2(a);
        return Ok((zeta * (2.0 * PI - zeta)).max(0.0).sqrt());
    }

    let s_at = |k: usize| S_MAX * (k as f64 / N_S as f64).powi(2);
    let psi_at = |j: usize| (j as f64 + 0.5) / N_PSI as f64 * FRAC_PI_2;
    let mut res = vec![0.0; N_PSI * N_S];
    for j in 0..N_PSI {
        let beta = psi_at(j).tan();
        for k in 0..N_S {
            let (fa, fd) = endpoint(s_at(k + 1), beta);
            res[j * N_S + k] = (fa - a).hypot(fd - d);
        }
    }
    let mut minima = Vec::new();
    for j in 0..N_PSI {
        for k in 0..N_S {
            let v = res[j * N_S + k];
            let mut is_min = true;
            'nb: for dj in -1_i64..=1 {
                for dk in -1_i64..=1 {
                    let (jj, kk) = (j as i64 + dj, k as i64 + dk);
                    if (dj, dk) == (0, 0) || jj < 0 || kk < 0 {
                        continue;
                    }
                    let (jj, kk) = (jj as usize, kk as usize);
                    if jj >= N_PSI || kk >= N_S {
                        continue;
                    }
                    if res[jj * N_S + kk] < v {
                        is_min = false;
                        break 'nb;
                    }
                }
            }
            if is_min {
                minima.push((v, j, k));
            }
        }
    }
    minima.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut best = f64::INFINITY;
    for &(_, j, k) in minima.iter().take(48) {
        if let Some((s, _)) = newton(s_at(k + 1), psi_at(j).tan(), a, d) {
            best = best.min(s);
        }
    }
    if best.is_finite() {
        Ok(best)
    } else {
        Err(Error::Convergence {
            operation: "su2 cc_distance",
            diagnostics: format!(
                "no geodesic endpoint matched q = ({}, {}, {}, {}) among {} seeds",
                q.w,
                q.x,
                q.y,
                q.z,
                minima.len().min(48)
            ),
        })
    }
}

pub fn distance(x: Quaternion, y: Quaternion) -> Result<f64> {
    distance_from_identity(x.conj() * y)
}
