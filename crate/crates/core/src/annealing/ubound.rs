use super::CoolingSchedule;
use crate::error::{ensure_positive, Error, Result};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum UBoundVerdict {
    Bounded,
    Growing,
}

#[derive(Clone, Debug, Serialize)]
pub struct UBoundTrajectory {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub sup: f64,
    pub verdict: UBoundVerdict,
    /// The integrator produced a negative value that was clipped to zero.
    pub clipped: bool,
}

impl UBoundTrajectory {
    pub fn final_value(&self) -> f64 {
        *self.values.last().expect("trajectory is never empty")
    }
}

/// Right-hand side in `τ = ln(R + t)`, where the equation is autonomous.
fn rhs(u: f64, s: &CoolingSchedule) -> f64 {
    let u = u.max(0.0);
    let c2 = s.c * s.c;
    -u / s.k + s.n * u / c2 + 2.0 * s.n * u.sqrt() / c2
}

/// Upper envelope `ū` obtained by integrating the `u′` inequality as an
/// equality with classical RK4.
///
/// Steps are uniform of size `dtau` in `τ = ln(R + t)`, i.e. geometric in
/// `R + t`, so horizons like `t = 10⁸` take a few thousand steps. The step is
/// further capped at `0.02·min(K, c²/N)` so that fast linear rates stay
/// resolved.
pub fn u_bound_integrate(u0: f64, schedule: &CoolingSchedule, t_end: f64, dtau: f64) -> Result<UBoundTrajectory> {
    if !(u0 >= 0.0 && u0.is_finite()) {
        return Err(Error::invalid(
            "u0",
            format!("must be a finite non-negative number, got {u0}"),
        ));
    }
    ensure_positive("t_end", t_end)?;
    ensure_positive("dt", dtau)?;
    let r = schedule.r;
    let tau0 = r.ln();
    let tau1 = (r + t_end).ln();
    let c2 = schedule.c * schedule.c;
    let stiff = if schedule.n > 0.0 {
        schedule.k.min(c2 / schedule.n)
    } else {
        schedule.k
    };
    let dtau = dtau.min(0.02 * stiff);
    let steps = ((tau1 - tau0) / dtau).ceil().max(1.0) as usize;
    let h = (tau1 - tau0) / steps as f64;
    let mut times = Vec::with_capacity(steps + 1);
    let mut values = Vec::with_capacity(steps + 1);
    times.push(0.0);
    values.push(u0);
    let mut u = u0;
    let mut clipped = false;
    for i in 1..=steps {
        let k1 = rhs(u, schedule);
        let k2 = rhs(u + 0.5 * h * k1, schedule);
        let k3 = rhs(u + 0.5 * h * k2, schedule);
        let k4 = rhs(u + h * k3, schedule);
        u += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if u < 0.0 {
            u = 0.0;
            clipped = true;
        }
        if !u.is_finite() {
            return Err(Error::non_finite(format!("u-bound at step {i}")));
        }
        let t = if i == steps {
            t_end
        } else {
            (tau0 + i as f64 * h).exp() - r
        };
        times.push(t);
        values.push(u);
    }
    if clipped {
        log::warn!("u-bound went negative and was clipped to zero");
    }
    let sup = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let verdict = if rhs(u, schedule) <= 1e-6 * (1.0 + u) {
        UBoundVerdict::Bounded
    } else {
        UBoundVerdict::Growing
    };
    Ok(UBoundTrajectory {
        times,
        values,
        sup,
        verdict,
        clipped,
    })
}

/// Closed form of the envelope when `N = 0`.
pub fn u_bound_closed_form(u0: f64, schedule: &CoolingSchedule, t: f64) -> f64 {
    u0 * (schedule.r / (schedule.r + t)).powf(1.0 / schedule.k)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sched(c: f64, k: f64, n: f64) -> CoolingSchedule {
        CoolingSchedule::new(c, (c * c).exp().max(2.0), 1.0, k, n).unwrap()
    }

    #[test]
    fn no_oscillation_matches_closed_form() {
        let s = sched(2.0, 1.0, 0.0);
        let tr = u_bound_integrate(1.0, &s, 1e8, 1e-2).unwrap();
        for (t, v) in tr.times.iter().zip(&tr.values) {
            let exact = u_bound_closed_form(1.0, &s, *t);
            assert!((v - exact).abs() <= 1e-6 * exact, "{t}: {v} vs {exact}");
        }
        assert_eq!(tr.verdict, UBoundVerdict::Bounded);
    }

    #[test]
    fn verdicts_follow_the_boundedness_condition() {
        let (n, k) = (1.0_f64, 1.0_f64);
        let good = sched((4.0 * n * k).sqrt(), k, n);
        let tr = u_bound_integrate(1.0, &good, 1e8, 1e-2).unwrap();
        assert_eq!(tr.verdict, UBoundVerdict::Bounded);
        // the fixed point 4/9 attracts at rate 3/8 in log time
        assert!((tr.final_value() - 4.0 / 9.0).abs() < 5e-3, "{}", tr.final_value());
        assert!(tr.sup <= 1.0 + 1e-12);

        let bad = sched((n * k).sqrt(), k, n);
        let tr = u_bound_integrate(1.0, &bad, 1e8, 1e-2).unwrap();
        assert_eq!(tr.verdict, UBoundVerdict::Growing);
        assert!(tr.final_value() > 10.0);
    }

    #[test]
    fn rejects_negative_start() {
        let s = sched(2.0, 1.0, 0.0);
        assert!(u_bound_integrate(-1.0, &s, 1.0, 0.1).is_err());
        let tr = u_bound_integrate(0.0, &s, 10.0, 0.1).unwrap();
        assert!(tr.values.iter().all(|v| *v == 0.0));
    }
}
