use lie_anneal::annealing::{
    concentration_report, gibbs_sampler, make_benchmark_potential, make_schedule, sublevel_mass, u_bound_closed_form,
    u_bound_integrate, BenchmarkMode, ConcentrationOptions, GibbsTarget, ScheduleOptions,
};
use lie_anneal::group::{Constant, FnField, GroupElement, GroupModel, ScalarField};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

fn neg_cos() -> Arc<dyn ScalarField> {
    Arc::new(FnField::with_derivative(
        |g: &GroupElement| -g[0].cos(),
        |g: &GroupElement, _| g[0].sin(),
    ))
}

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    (0..=n)
        .map(|k| {
            let c = if k == 0 || k == n {
                1.0
            } else if k % 2 == 1 {
                4.0
            } else {
                2.0
            };
            c * f(a + k as f64 * h)
        })
        .sum::<f64>()
        * h
        / 3.0
}

fn centred(g: &GroupElement) -> f64 {
    let a = g[0].rem_euclid(TAU);
    if a >= PI {
        a - TAU
    } else {
        a
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn schedule_invariants(d in 0.01..20.0_f64, k in 0.1..5.0_f64, n in 0.0..5.0_f64, t in 0.0..1e6_f64) {
        let s = make_schedule(d, k, n, ScheduleOptions::default()).unwrap();
        prop_assert!(s.r > 1.0);
        prop_assert!(s.epsilon(0.0) <= 1.0 + 1e-12);
        prop_assert!(s.flags.admissible());
        prop_assert_eq!(s.flags.c_sq_exceeds_3nk, s.c * s.c > 3.0 * n * k);
        prop_assert!(s.epsilon(t + 1e-3 * s.r + 1.0) < s.epsilon(t));
        let exact = 1.0 / (s.c * s.c * (s.r + t));
        prop_assert!((s.beta_prime(t) - exact).abs() <= 1e-10 * exact);
    }

    #[test]
    fn u_bound_without_oscillation_is_closed_form(u0 in 0.01..10.0_f64, k in 0.2..4.0_f64, c in 0.5..2.5_f64) {
        let s = lie_anneal::annealing::CoolingSchedule::new(c, (c * c).exp().max(1.5), 1.0, k, 0.0).unwrap();
        let tr = u_bound_integrate(u0, &s, 1e6, 1e-2).unwrap();
        for (t, v) in tr.times.iter().zip(&tr.values).step_by(17) {
            let e = u_bound_closed_form(u0, &s, *t);
            prop_assert!((v - e).abs() <= 1e-6 * e, "{} {} {}", t, v, e);
        }
    }
}

#[test]
fn gibbs_with_flat_potential_is_haar() {
    let m = GroupModel::Su2;
    let run = gibbs_sampler(&m, &Constant(0.0), 0.3, 20_000, 500, 0.5, 1).unwrap();
    assert_eq!(run.samples.len(), 20_000);
    assert!(run.diagnostics.acceptance_rate > 0.99);
    for c in 0..4 {
        let v: Vec<f64> = run.samples.iter().map(|g| g[c]).collect();
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        // E q_c = 0, Var q_c = 1/4 under Haar; the chain moves every step
        let se = (0.25 / run.diagnostics.ess.min(v.len() as f64)).sqrt();
        assert!(mean.abs() < 3.0 * se + 0.01, "component {c}: {mean} ± {se}");
    }
}

#[test]
fn gibbs_matches_von_mises_histogram() {
    let m = GroupModel::torus(1).unwrap();
    let run = gibbs_sampler(&m, neg_cos().as_ref(), 1.0, 40_000, 2_000, 1.0, 2).unwrap();
    let d = &run.diagnostics;
    // on a circle the largest proposals are already independent draws, so
    // acceptance may stay above the tuning band
    assert!(!d.poorly_tuned, "{d:?}");
    let nb = 16;
    let z = simpson(|t| t.cos().exp(), -PI, PI, 2048);
    let probs: Vec<f64> = (0..nb)
        .map(|b| {
            let a = -PI + b as f64 * TAU / nb as f64;
            simpson(|t| t.cos().exp(), a, a + TAU / nb as f64, 256) / z
        })
        .collect();
    let mut counts = vec![0usize; nb];
    for g in &run.samples {
        let u = (centred(g) + PI) / TAU;
        counts[((u * nb as f64) as usize).min(nb - 1)] += 1;
    }
    // correlated draws: scale the statistic by the effective sample fraction
    let n = run.samples.len() as f64;
    let stat: f64 = counts
        .iter()
        .zip(&probs)
        .map(|(&c, &p)| (c as f64 - n * p).powi(2) / (n * p))
        .sum::<f64>()
        * (d.ess / n).min(1.0);
    let p = 1.0 - ChiSquared::new((nb - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "χ² p-value {p}, ess {}", d.ess);
}

#[test]
fn gibbs_concentrates_at_low_temperature() {
    let m = GroupModel::torus(1).unwrap();
    let run = gibbs_sampler(&m, neg_cos().as_ref(), 0.1, 20_000, 2_000, 0.5, 3).unwrap();
    let inside = run.samples.iter().filter(|g| centred(g).abs() <= 0.5).count();
    assert!(inside as f64 / run.samples.len() as f64 > 0.99);
}

#[test]
#[allow(clippy::needless_range_loop)]
fn gibbs_chain_is_reversible() {
    // consecutive stored states of one chain follow a power of the Metropolis
    // kernel, which is reversible, so transition counts are symmetric
    let m = GroupModel::torus(1).unwrap();
    let n = 200_000;
    let run = gibbs_sampler(&m, neg_cos().as_ref(), 0.8, n, 2_000, 1.0, 4).unwrap();
    let nb = 8;
    let bin = |g: &GroupElement| ((g[0].rem_euclid(TAU) / TAU * nb as f64) as usize).min(nb - 1);
    let mut counts = vec![vec![0.0_f64; nb]; nb];
    for w in run.samples.windows(2) {
        counts[bin(&w[0])][bin(&w[1])] += 1.0;
    }
    let mut stat = 0.0;
    let mut dof = 0;
    for i in 0..nb {
        for j in i + 1..nb {
            let s = counts[i][j] + counts[j][i];
            if s > 0.0 {
                stat += (counts[i][j] - counts[j][i]).powi(2) / s;
                dof += 1;
            }
        }
    }
    let p = 1.0 - ChiSquared::new(dof as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "symmetry χ² = {stat} on {dof} dof");
}

#[test]
fn partition_function_matches_bessel() {
    let m = GroupModel::torus(1).unwrap();
    let z = GibbsTarget::estimate(&m, neg_cos().as_ref(), 1.0, 200_000, 5).unwrap();
    // ∫ e^{cos θ} dθ = 2π I₀(1)
    let exact = TAU * 1.266_065_877_752_008_4;
    assert!(
        (z.z_hat - exact).abs() < 4.0 * z.z_se,
        "{} ± {} vs {exact}",
        z.z_hat,
        z.z_se
    );
}

#[test]
fn sublevel_mass_edge_cases_and_quadrature() {
    let m = GroupModel::torus(1).unwrap();
    let u = neg_cos();
    let run = gibbs_sampler(&m, u.as_ref(), 0.5, 40_000, 2_000, 0.5, 6).unwrap();
    let all = sublevel_mass(&run.samples, u.as_ref(), 0.0, -1.0, None).unwrap();
    assert_eq!(all.mass, 1.0);
    let none = sublevel_mass(&run.samples, u.as_ref(), 2.5, -1.0, None).unwrap();
    assert_eq!(none.mass, 0.0);
    assert!(sublevel_mass(&[], u.as_ref(), 0.1, -1.0, None).is_err());

    // A₁ = {cos θ ≤ 0} under density ∝ exp(4 cos θ)
    let dens = |t: f64| (4.0 * t.cos()).exp();
    let exact = 2.0 * simpson(dens, PI / 2.0, PI, 1024) / simpson(dens, -PI, PI, 2048);
    let est = sublevel_mass(&run.samples, u.as_ref(), 1.0, -1.0, Some(run.diagnostics.ess)).unwrap();
    assert!(
        (est.mass - exact).abs() < 4.0 * est.standard_error,
        "{est:?} vs {exact}"
    );

    let mut prev = 1.0;
    for d in [0.0, 0.1, 0.3, 0.6, 1.0, 1.5, 2.0] {
        let s = sublevel_mass(&run.samples, u.as_ref(), d, -1.0, None).unwrap().mass;
        assert!(s <= prev);
        prev = s;
    }
    let mut prev = 1.0;
    for eps in [1.0, 0.7, 0.5, 0.3, 0.2] {
        let r = gibbs_sampler(&m, u.as_ref(), eps, 20_000, 2_000, 0.5, 7).unwrap();
        let s = sublevel_mass(&r.samples, u.as_ref(), 0.5, -1.0, None).unwrap().mass;
        assert!(s < prev, "ε = {eps}: {s} after {prev}");
        prev = s;
    }
    assert!(prev < 0.01);
}

#[test]
fn exact_benchmark_is_left_covariant() {
    let cases = [
        (GroupModel::torus(2).unwrap(), vec![1.0, 4.0], vec![2.5, 0.2]),
        (GroupModel::Heisenberg, vec![0.3, -0.2, 0.4], vec![-0.5, 0.7, 1.1]),
        (GroupModel::Su2, vec![0.9, 0.1, -0.3, 0.2], vec![0.1, 0.5, 0.5, -0.7]),
    ];
    for (m, a, b) in cases {
        let x0 = m.element(&a).unwrap();
        let x = m.element(&b).unwrap();
        let ux0 = make_benchmark_potential(&m, &x0, BenchmarkMode::Exact).unwrap();
        let ue = make_benchmark_potential(&m, &m.identity(), BenchmarkMode::Exact).unwrap();
        let lhs = ux0.field.value(&x);
        let rhs = ue.field.value(&m.mul(&m.inverse(&x0).unwrap(), &x).unwrap());
        assert!((lhs - rhs).abs() < 1e-8 * (1.0 + rhs), "{m}: {lhs} vs {rhs}");
        assert_eq!(ux0.field.value(&x0), 0.0);
    }
}

#[test]
fn flat_potential_never_reaches_positive_levels() {
    let m = GroupModel::torus(1).unwrap();
    let s = make_schedule(1.0, 1.0, 0.0, ScheduleOptions::default()).unwrap();
    let opts = ConcentrationOptions {
        delta_grid: Some(vec![0.1, 1.0]),
        ..Default::default()
    };
    let rep = concentration_report(
        &m,
        Arc::new(Constant(0.0)),
        "flat",
        &s,
        &m.identity(),
        &[1.0, 2.0],
        500,
        1_000,
        &opts,
        1,
    )
    .unwrap();
    assert!(rep.rows.iter().all(|r| r.empirical == 0.0 && r.gibbs_mass == 0.0));
    assert!(rep.violations.is_empty());
}

#[test]
fn torus_concentration_pipeline() {
    let m = GroupModel::torus(1).unwrap();
    let x0 = m.identity();
    let b = make_benchmark_potential(&m, &x0, BenchmarkMode::Smooth).unwrap();
    let s = make_schedule(1.0 + b.d1_hat, 1.0, b.oscillation, ScheduleOptions::default()).unwrap();
    let probe: Arc<dyn ScalarField> = Arc::new(FnField::new(|g: &GroupElement| g[0].cos()));
    let opts = ConcentrationOptions {
        probe: Some((probe, x0)),
        ..Default::default()
    };
    let start = m.element(&[PI]).unwrap();
    let rep = concentration_report(
        &m,
        b.field.clone(),
        &b.label,
        &s,
        &start,
        &[1.0, 10.0, 100.0],
        10_000,
        20_000,
        &opts,
        2,
    )
    .unwrap();
    assert!(rep.violations.is_empty(), "{:?}", rep.rows);
    assert!(rep.tail_monotone.iter().all(|v| *v));
    assert!(rep.probe.as_ref().unwrap().monotone, "{:?}", rep.probe);
    assert!(rep
        .rows
        .iter()
        .all(|r| (0.0..=1.0).contains(&r.empirical) && (0.0..=1.0).contains(&r.gibbs_mass)));
    assert!(rep.m_hat >= 1.0 - 1e-9);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.csv");
    rep.write_csv(&path).unwrap();
    let mut rd = csv::Reader::from_path(&path).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(str::to_string).collect();
    assert_eq!(header, ["t", "delta", "empirical", "gibbs_mass", "bound", "margin"]);
    assert_eq!(rd.records().count(), rep.rows.len());
    let json = dir.path().join("c.json");
    rep.write_json(&json).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(v["schedule"]["R"].as_f64().unwrap(), s.r);
}
