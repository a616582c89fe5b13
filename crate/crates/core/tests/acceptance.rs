//! Acceptance gate: the ten scripted verification criteria, one test each.
//!
//! Every test prints its single verdict line (visible under --nocapture)
//! and fails if the criterion's numerical claims or wall-clock budget are
//! violated. Tolerances live with the criteria themselves.

use sirlab::acceptance::{self, CriterionReport};

fn run(report: CriterionReport) {
    println!("{}", report.verdict_line());
    for line in &report.details {
        println!("    {line}");
    }
    assert!(
        report.passed,
        "criterion {} ({}) failed:\n{}",
        report.id,
        report.name,
        report.details.join("\n")
    );
}

#[test]
fn criterion_01_variance_inequalities() {
    run(acceptance::criterion_variance_inequalities());
}

#[test]
fn criterion_02_square_variance_tightness() {
    run(acceptance::criterion_square_variance_tightness());
}

#[test]
fn criterion_03_distribution_oracle_agreement() {
    run(acceptance::criterion_master_oracle_agreement());
}

#[test]
fn criterion_04_moment_equation_residuals() {
    run(acceptance::criterion_moment_equation_residuals());
}

#[test]
fn criterion_05_closure_round_trip() {
    run(acceptance::criterion_closure_roundtrip());
}

#[test]
fn criterion_06_reduction_to_the_limit() {
    run(acceptance::criterion_limit_reduction());
}

#[test]
fn criterion_07_ensemble_agreement() {
    run(acceptance::criterion_ensemble_agreement());
}

#[test]
fn criterion_08_envelope_domination() {
    run(acceptance::criterion_envelope_domination());
}

#[test]
fn criterion_09_convergence_to_the_limit() {
    run(acceptance::criterion_convergence_to_limit());
}

#[test]
fn criterion_10_bounding_dynamics() {
    run(acceptance::criterion_bounding_dynamics());
}
