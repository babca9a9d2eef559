//! Heisenberg group in exponential coordinates and its integer nilmanifold.
//!
//! Group law `(x,y,z)·(x',y',z') = (x+x', y+y', z+z'+½(xy'−yx'))`, frame
//! `V₁ = ∂x − (y/2)∂z`, `V₂ = ∂y + (x/2)∂z`, `[V₁,V₂] = ∂z`.
//!
//! The lattice Γ is generated by `(1,0,0)`, `(0,1,0)`, `(0,0,1)`; its elements
//! are `(a, b, ab/2 + m)` with integers `a, b, m`. The nilmanifold is the
//! quotient Γ\G by left multiplication, so left-invariant fields descend to
//! it. Canonical representatives lie in `[0,1)³`.

use std::f64::consts::PI;

pub fn mul(g: [f64; 3], h: [f64; 3]) -> [f64; 3] {
    [
        g[0] + h[0],
        g[1] + h[1],
        g[2] + h[2] + 0.5 * (g[0] * h[1] - g[1] * h[0]),
    ]
}

pub fn inverse(g: [f64; 3]) -> [f64; 3] {
    [-g[0], -g[1], -g[2]]
}

/// Lattice element `(a, b, ab/2 + m)`.
pub fn lattice_element(a: i64, b: i64, m: i64) -> [f64; 3] {
    let (a, b) = (a as f64, b as f64);
    [a, b, 0.5 * a * b + m as f64]
}

/// Left-multiplies `g` by the lattice element that brings it into `[0,1)³`.
pub fn reduce(g: [f64; 3]) -> [f64; 3] {
    let mut cur = g;
    // A second pass absorbs rounding that lands exactly on 1.0.
    for _ in 0..3 {
        let a = -cur[0].floor();
        let b = -cur[1].floor();
        let x = cur[0] + a;
        let y = cur[1] + b;
        let z1 = cur[2] + 0.5 * a * b + 0.5 * (a * cur[1] - b * cur[0]);
        let z = z1 - z1.floor();
        cur = [x, y, z];
        if (0.0..1.0).contains(&x) && (0.0..1.0).contains(&y) && (0.0..1.0).contains(&z) {
            return cur;
        }
    }
    [
        cur[0].clamp(0.0, 1.0 - f64::EPSILON),
        cur[1].clamp(0.0, 1.0 - f64::EPSILON),
        cur[2].clamp(0.0, 1.0 - f64::EPSILON),
    ]
}

/// `(φ − sin φ) / (8 sin²(φ/2))`: ratio `|z|/r²` reached by the circular-arc
/// geodesic that turns through angle `φ`.
fn area_ratio(phi: f64) -> f64 {
    let num = if phi < 1e-3 {
        let p3 = phi * phi * phi;
        p3 / 6.0 - p3 * phi * phi / 120.0
    } else {
        phi - phi.sin()
    };
    let s = (0.5 * phi).sin();
    num / (8.0 * s * s)
}

/// Carnot–Carathéodory distance from the identity in the free group.
///
/// Geodesics ending at `(w, z)` are circular arcs with chord `r = |w|` and
/// signed segment area `z`. The turning angle solves a monotone scalar
/// equation; it is found by bisection to 1e-10.
pub fn distance_from_identity(g: [f64; 3]) -> f64 {
    let r = g[0].hypot(g[1]);
    let z = g[2].abs();
    if z == 0.0 {
        return r;
    }
    let full_loop = (4.0 * PI * z).sqrt();
    if r == 0.0 {
        return full_loop;
    }
    let mu = z / (r * r);
    if mu > 1e12 {
        return full_loop;
    }
    let (mut lo, mut hi) = (0.0_f64, 2.0 * PI);
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if area_ratio(mid) < mu {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    let s = (0.5 * phi).sin();
    if s <= 0.0 {
        return full_loop;
    }
    r * phi / (2.0 * s)
}

/// `d ≥ max(r, √(4π|z|) − r)` (isoperimetric inequality after closing the
/// curve with its chord).
pub fn distance_lower_bound(g: [f64; 3]) -> f64 {
    let r = g[0].hypot(g[1]);
    r.max((4.0 * PI * g[2].abs()).sqrt() - r)
}

/// Straight segment followed by a closed loop of the right area.
pub fn distance_upper_bound(g: [f64; 3]) -> f64 {
    g[0].hypot(g[1]) + (4.0 * PI * g[2].abs()).sqrt()
}

/// Distance on the nilmanifold between two canonical representatives:
/// `min_λ d(e, x⁻¹ λ y)` over lattice elements.
pub fn nil_distance(x: [f64; 3], y: [f64; 3]) -> f64 {
    let xi = inverse(x);
    let mut best = f64::INFINITY;
    for a in -3_i64..=3 {
        for b in -3_i64..=3 {
            let base = mul(xi, mul(lattice_element(a, b, 0), y));
            let m0 = -base[2].round() as i64;
            for m in (m0 - 3)..=(m0 + 3) {
                let cand = [base[0], base[1], base[2] + m as f64];
                if distance_lower_bound(cand) >= best {
                    continue;
                }
                best = best.min(distance_from_identity(cand));
            }
        }
    }
    best
}
