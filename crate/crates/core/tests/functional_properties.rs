use lie_anneal::dynamics::diffusion_endpoints;
use lie_anneal::functional::{
    carre_du_champ, estimate_d, estimate_dm_constant, estimate_spectral_gap, gap_from_dm, local_poincare_check,
    DictEntry, TestFunctionDictionary, TorusTrig, DEFAULT_DM_TIMES,
};
use lie_anneal::group::{FnField, GroupElement, GroupModel, ScalarField};
use lie_anneal::kernel::KernelModel;
use lie_anneal::rng::path_rng;
use proptest::prelude::*;
use std::f64::consts::TAU;
use std::sync::Arc;

fn trig(k: &[f64], sine: bool) -> DictEntry {
    DictEntry {
        name: format!("{}{k:?}", if sine { "sin" } else { "cos" }),
        f: Arc::new(TorusTrig { k: k.to_vec(), sine }),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn carre_du_champ_is_bilinear_and_positive(x in 0.0..1.0_f64, y in 0.0..1.0_f64, z in 0.0..1.0_f64, s in -2.0..2.0_f64) {
        let m = GroupModel::HeisenbergNilmanifold;
        let d = TestFunctionDictionary::standard(m).unwrap();
        let g = m.element(&[x, y, z]).unwrap();
        let f = d.entries[2].f.clone();
        let h = d.entries[13].f.clone();
        let fh = FnField::new(move |p: &GroupElement| f.value(p) + s * h.value(p));
        let (f, h) = (d.entries[2].f.as_ref(), d.entries[13].f.as_ref());
        let lhs = carre_du_champ(&m, &fh, None, &g).unwrap();
        let rhs = carre_du_champ(&m, f, None, &g).unwrap()
            + 2.0 * s * carre_du_champ(&m, f, Some(h), &g).unwrap()
            + s * s * carre_du_champ(&m, h, None, &g).unwrap();
        // fh has no analytic derivative, so it goes through central differences
        prop_assert!((lhs - rhs).abs() < 1e-6 * (1.0 + rhs.abs()), "{lhs} vs {rhs}");
        for e in &d.entries {
            prop_assert!(carre_du_champ(&m, e.f.as_ref(), None, &g).unwrap() >= 0.0);
        }
        let exact = carre_du_champ(&m, f, Some(h), &g).unwrap();
        let swapped = carre_du_champ(&m, h, Some(f), &g).unwrap();
        prop_assert!((exact - swapped).abs() < 1e-12);
    }
}

#[test]
fn integration_by_parts_on_torus() {
    // L = ½Δ acts on trigonometric polynomials by −|k|²/2
    let d = TestFunctionDictionary::torus_trig(2, 2).unwrap();
    let m = d.model;
    let n = 64;
    let grid: Vec<GroupElement> = (0..n * n)
        .map(|i| {
            m.element(&[(i % n) as f64 * TAU / n as f64, (i / n) as f64 * TAU / n as f64])
                .unwrap()
        })
        .collect();
    for a in &d.entries {
        for b in &d.entries {
            let mut fl = 0.0;
            let mut gam = 0.0;
            let kb = b.name.clone();
            for x in &grid {
                let lg = {
                    let ks: Vec<f64> = kb[3..]
                        .trim_matches(|c| c == '[' || c == ']')
                        .split(", ")
                        .map(|s| s.parse().unwrap())
                        .collect();
                    -0.5 * ks.iter().map(|k| k * k).sum::<f64>() * b.f.value(x)
                };
                fl += a.f.value(x) * lg;
                gam += carre_du_champ(&m, a.f.as_ref(), Some(b.f.as_ref()), x).unwrap();
            }
            let r = (fl + 0.5 * gam) / grid.len() as f64;
            assert!(r.abs() < 1e-12, "{} / {}: {r}", a.name, b.name);
        }
    }
}

#[test]
fn poincare_check_detects_violations() {
    let m = GroupModel::torus(1).unwrap();
    let sin = TorusTrig {
        k: vec![1.0],
        sine: true,
    };
    let ok = local_poincare_check(&m, &sin, 1.0, 0.5, 100_000, 1e-2, 1).unwrap();
    assert!(ok.margin_in_se >= -3.0, "{ok:?}");
    // both sides in closed form: lhs = (1 + e^{−2})/2, rhs = 2a (1 − e^{−2})/2
    let lhs = 0.5 * (1.0 + (-2.0_f64).exp());
    assert!((ok.lhs - lhs).abs() < 4.0 * ok.standard_error + 1e-3, "{ok:?}");
    let bad = local_poincare_check(&m, &sin, 1.0, 10.0, 100_000, 1e-2, 1).unwrap();
    assert!(bad.margin_in_se < -20.0, "{bad:?}");
}

#[test]
fn driver_melcher_on_torus_is_one() {
    let m = GroupModel::torus(1).unwrap();
    let d = TestFunctionDictionary::torus_trig(1, 3).unwrap();
    let est = estimate_dm_constant(&m, &d, &DEFAULT_DM_TIMES, 20_000, 1e-2, 4).unwrap();
    assert!((0.9..=1.1).contains(&est.k_hat), "{}", est.k_hat);
    for r in est.table.iter().filter(|r| !r.skipped) {
        assert!(r.ratio <= 1.0 + 3.0 * r.standard_error + 1e-9, "{r:?}");
    }
}

#[test]
fn driver_melcher_on_nilmanifold_is_finite() {
    let m = GroupModel::HeisenbergNilmanifold;
    let d = TestFunctionDictionary::standard(m).unwrap();
    let est = estimate_dm_constant(&m, &d, &[0.001, 0.01, 0.1, 0.5], 4_000, 1e-2, 5).unwrap();
    assert!(est.k_hat.is_finite());
    assert!(est.k_hat >= 1.0 - 3.0 * est.max_ratio_se);
    // at t = 1e-3 the ratios sit within the O(h²) difference bias of 1
    assert!(est.max_ratio > 0.99, "{} ± {}", est.max_ratio, est.max_ratio_se);
    assert!(est
        .table
        .iter()
        .filter(|r| !r.skipped)
        .all(|r| r.ratio > 0.0 && r.ratio.is_finite()));
}

#[test]
fn rayleigh_on_haar_and_heat_kernel_laws() {
    let m = GroupModel::torus(1).unwrap();
    let mut rng = path_rng(8, 0);
    let haar: Vec<_> = (0..20_000).map(|_| m.haar_sample(&mut rng).unwrap()).collect();
    let d = TestFunctionDictionary::torus_trig(1, 2).unwrap();
    let g = estimate_spectral_gap(&m, &haar, &d).unwrap();
    assert!((g.value - 0.5).abs() < 0.05, "{g:?}");

    let t = 0.25;
    let law = diffusion_endpoints(&m, &m.identity(), t, 1e-2, 100_000, 9).unwrap();
    let dict = TestFunctionDictionary::custom(
        "sin-cos-2",
        m,
        vec![
            trig(&[1.0], true),
            trig(&[1.0], false),
            trig(&[2.0], true),
            trig(&[2.0], false),
        ],
    )
    .unwrap();
    let upper = estimate_spectral_gap(&m, &law, &dict).unwrap();
    assert!((upper.value - 1.0 / (2.0 * t)).abs() <= 0.15 / (2.0 * t), "{upper:?}");
    let lower = gap_from_dm(1.0, t).unwrap();
    assert!(lower.value <= upper.value + 3.0 * upper.standard_error);
}

#[test]
fn d_estimate_properties() {
    let m = GroupModel::torus(1).unwrap();
    let x0 = m.element(&[0.4]).unwrap();
    let km = Arc::new(KernelModel::closed_form(m).unwrap());
    let eps0: f64 = 0.7;
    let (k2, x0c) = (km.clone(), x0);
    let cancel = FnField::new(move |x: &GroupElement| {
        let rel = m.mul(&m.inverse(&x0c).unwrap(), x).unwrap();
        -eps0 * eps0 * k2.log_heat_kernel(eps0 * eps0, &rel).unwrap()
    });
    let builder = |_t: f64| KernelModel::closed_form(m);
    let r = estimate_d(&m, &cancel, &x0, &[eps0], builder, 100, 1).unwrap();
    assert!(r.d_hat < 1e-12, "{}", r.d_hat);

    let x0c = x0;
    let dist = FnField::new(move |x: &GroupElement| m.half_distance_sq(&x0c, x).unwrap());
    let small = estimate_d(&m, &dist, &x0, &[0.5, 1.0], builder, 50, 2).unwrap();
    let large = estimate_d(&m, &dist, &x0, &[0.5, 1.0], builder, 500, 2).unwrap();
    assert!(large.d_hat >= small.d_hat);
    let refined = estimate_d(&m, &dist, &x0, &[0.5, 0.625, 0.75, 0.875, 1.0], builder, 500, 2).unwrap();
    assert!(
        (refined.d_hat - large.d_hat).abs() <= 0.2 * large.d_hat,
        "{} vs {}",
        refined.d_hat,
        large.d_hat
    );

    let x0c = x0;
    let shifted = FnField::new(move |x: &GroupElement| m.half_distance_sq(&x0c, x).unwrap() + 10.0);
    let s = estimate_d(&m, &shifted, &x0, &[0.5, 1.0], builder, 500, 2).unwrap();
    assert!(s.d_hat <= 10.0 + large.d_hat + 1e-12);
}
