//! Full-scale acceptance suite. Every criterion prints one PASS/FAIL line;
//! run with `--nocapture` to see them.

use lie_anneal::acceptance::{run_criterion, CriterionOutcome};

const SEED: u64 = 20_240_601;

fn check(id: u32) -> CriterionOutcome {
    let out = run_criterion(id, SEED).unwrap_or_else(|e| panic!("criterion {id} errored: {e}"));
    println!("{}", out.line());
    out
}

#[test]
fn criterion_1_natural_ou_gap() {
    assert!(check(1).passed);
}

#[test]
fn criterion_2_local_poincare() {
    assert!(check(2).passed);
}

#[test]
fn criterion_3_kernel_fidelity() {
    assert!(check(3).passed);
}

#[test]
fn criterion_4_varadhan() {
    assert!(check(4).passed);
}

#[test]
fn criterion_5_schedule_and_envelope() {
    assert!(check(5).passed);
}

#[test]
fn criterion_6_perturbation_bound() {
    assert!(check(6).passed);
}

#[test]
fn criterion_7_concentration() {
    assert!(check(7).passed);
}

#[test]
fn criterion_8_determinism() {
    assert!(check(8).passed);
}
