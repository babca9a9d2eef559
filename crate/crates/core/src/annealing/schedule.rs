use crate::error::{ensure_positive, Error, Result};
use serde::{Deserialize, Serialize};

/// `ε(t) = c / √log(R + t)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoolingSchedule {
    pub c: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "N")]
    pub n: f64,
    pub flags: ScheduleFlags,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleFlags {
    /// `c² ≥ 2D`.
    pub c_sq_covers_2d: bool,
    /// `ε(0) ≤ 1`.
    pub eps0_at_most_one: bool,
    /// `c² > 3NK`, the regime where the `u` envelope stays bounded.
    pub c_sq_exceeds_3nk: bool,
}

impl ScheduleFlags {
    pub fn admissible(&self) -> bool {
        self.c_sq_covers_2d && self.eps0_at_most_one
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOptions {
    /// Relative margin above `√(3NK)`.
    pub margin: f64,
    /// Lower bound for `R`.
    pub r_min: f64,
}

impl Default for ScheduleOptions {
    fn default() -> Self {
        ScheduleOptions {
            margin: 0.05,
            r_min: 1.0,
        }
    }
}

impl CoolingSchedule {
    /// Builds a schedule from explicit constants and computes its flags.
    pub fn new(c: f64, r: f64, d: f64, k: f64, n: f64) -> Result<Self> {
        ensure_positive("c", c)?;
        if !(r > 1.0) || !r.is_finite() {
            return Err(Error::invalid("R", format!("must exceed 1, got {r}")));
        }
        let eps0 = c / r.ln().sqrt();
        let tol = 1e-12;
        Ok(CoolingSchedule {
            c,
            r,
            d,
            k,
            n,
            flags: ScheduleFlags {
                c_sq_covers_2d: c * c >= 2.0 * d * (1.0 - tol),
                eps0_at_most_one: eps0 <= 1.0 + tol,
                c_sq_exceeds_3nk: c * c > 3.0 * n * k,
            },
        })
    }

    pub fn epsilon(&self, t: f64) -> f64 {
        self.c / (self.r + t).ln().sqrt()
    }

    /// Inverse temperature `β(t) = ε(t)⁻²`.
    pub fn beta(&self, t: f64) -> f64 {
        (self.r + t).ln() / (self.c * self.c)
    }

    /// `β′(t) = 1 / (c²(R + t))`.
    pub fn beta_prime(&self, t: f64) -> f64 {
        1.0 / (self.c * self.c * (self.r + t))
    }
}

/// `c = max(√(2D), √(3NK)(1 + margin))`, `R = max(exp(c²), R_min)`.
pub fn make_schedule(d: f64, k: f64, n: f64, opts: ScheduleOptions) -> Result<CoolingSchedule> {
    ensure_positive("D", d)?;
    ensure_positive("K", k)?;
    if !(n >= 0.0) || !n.is_finite() {
        return Err(Error::invalid("N", format!("must be non-negative, got {n}")));
    }
    if !(opts.margin >= 0.0) {
        return Err(Error::invalid("margin", "must be non-negative"));
    }
    let c = (2.0 * d).sqrt().max((3.0 * n * k).sqrt() * (1.0 + opts.margin));
    let r = (c * c).exp().max(opts.r_min);
    if !r.is_finite() {
        return Err(Error::invalid("D", format!("c² = {} overflows R = exp(c²)", c * c)));
    }
    CoolingSchedule::new(c, r, d, k, n)
}
