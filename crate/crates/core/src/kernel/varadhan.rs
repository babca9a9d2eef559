use super::KernelModel;
use crate::error::{Error, Result};
use crate::group::{GroupElement, GroupModel};
use nalgebra::{Matrix3, Vector3};
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VaradhanRow {
    pub t: f64,
    pub minus_t_log_p: f64,
}

/// Short-time behaviour of `−t log p(t, x)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VaradhanReport {
    pub point: Vec<f64>,
    pub rows: Vec<VaradhanRow>,
    /// Intercept of the fit `−t log p ≈ L + α t ln t + β t`.
    pub limit: f64,
    /// Largest change of the intercept when one row is left out.
    pub limit_error: f64,
    /// `d_CC(e, x)² / 2`.
    pub reference: f64,
    pub relative_error: f64,
    /// Set when some times were dropped because `p` underflowed.
    pub truncated: bool,
}

fn fit_intercept(rows: &[VaradhanRow]) -> Option<f64> {
    let mut a = Matrix3::<f64>::zeros();
    let mut b = Vector3::<f64>::zeros();
    for r in rows {
        let phi = Vector3::new(1.0, r.t * r.t.ln(), r.t);
        a += phi * phi.transpose();
        b += phi * r.minus_t_log_p;
    }
    a.lu().solve(&b).map(|c| c[0])
}

/// Tabulates `−t log p(t, x)` for decreasing `t_list` and extrapolates to
/// `t → 0` by least squares on `{1, t ln t, t}`.
pub fn varadhan_diagnostic<F>(
    model: &GroupModel,
    x: &GroupElement,
    t_list: &[f64],
    mut km_builder: F,
) -> Result<VaradhanReport>
where
    F: FnMut(f64) -> Result<KernelModel>,
{
    if t_list.len() < 4 {
        return Err(Error::invalid(
            "t_list",
            "need at least four times for the fit and its error",
        ));
    }
    if t_list.windows(2).any(|w| w[1] >= w[0]) || t_list.iter().any(|&t| !(t > 0.0)) {
        return Err(Error::invalid("t_list", "must be positive and strictly decreasing"));
    }
    model.check(x)?;
    let reference = model.half_distance_sq(&model.identity(), x)?;
    let mut rows = Vec::new();
    let mut truncated = false;
    for &t in t_list {
        let km = km_builder(t)?;
        match km.log_heat_kernel(t, x) {
            Ok(lp) if lp.is_finite() => rows.push(VaradhanRow {
                t,
                minus_t_log_p: -t * lp,
            }),
            Ok(_) | Err(Error::NonFinite { .. }) | Err(Error::Convergence { .. }) => truncated = true,
            Err(e) => return Err(e),
        }
    }
    if rows.len() < 4 {
        return Err(Error::Convergence {
            operation: "varadhan_diagnostic",
            diagnostics: format!("only {} finite kernel values", rows.len()),
        });
    }
    let limit = fit_intercept(&rows).ok_or_else(|| Error::Degenerate("singular Varadhan fit".into()))?;
    let mut limit_error: f64 = 0.0;
    for skip in 0..rows.len() {
        let sub: Vec<_> = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != skip)
            .map(|(_, r)| *r)
            .collect();
        if let Some(l) = fit_intercept(&sub) {
            limit_error = limit_error.max((l - limit).abs());
        }
    }
    let relative_error = if reference > 0.0 {
        (limit - reference).abs() / reference
    } else {
        limit.abs()
    };
    Ok(VaradhanReport {
        point: x.coords().to_vec(),
        rows,
        limit,
        limit_error,
        reference,
        relative_error,
        truncated,
    })
}
