//! Frozen cross-implementation values. These numbers were computed with an
//! independent implementation (different language, different integrator)
//! before this crate existed, and the solves here must land on them. They
//! guard against shared-bug blindness: a defect in this crate's integrator
//! or moment accounting would have to reproduce the foreign values to slip
//! through.

use sirlab::master::{check_moment_odes, solve_master, StateDistribution};
use sirlab::model::{InitialCondition, ModelParams, Scenario};
use sirlab::ode::OdeOptions;
use sirlab::tolerances::{TIGHT_ABS_TOL, TIGHT_REL_TOL};
use sirlab::trajectory::uniform_grid;

fn tight() -> OdeOptions<f64> {
    OdeOptions::with_tolerances(TIGHT_REL_TOL, TIGHT_ABS_TOL)
}

fn reference_scenario(n: u32) -> Scenario {
    Scenario::new(
        ModelParams::new(3.0, 0.25, n).unwrap(),
        InitialCondition::new(0.9, 0.1).unwrap(),
    )
    .unwrap()
}

/// Extremes of the four closure trajectories on the thirty-node reference
/// run over [0, 5].
#[test]
fn closure_value_envelope_matches_the_foreign_run() {
    let expected: [(f64, f64); 4] = [
        (-0.9755, 0.0),
        (-0.3964, 0.0767),
        (-0.2097, 0.1767),
        (0.0, 0.9230),
    ];
    let sc = reference_scenario(30);
    let grid = uniform_grid(5.0, 0.01).unwrap();
    let init = StateDistribution::from_scenario(&sc).unwrap();
    let solution = solve_master(&sc.params, &init, &grid, &tight()).unwrap();
    for (k, name) in ["h1", "h2", "h3", "h4"].iter().enumerate() {
        let column = solution.table.column(name).unwrap();
        let lo = column.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = column.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (want_lo, want_hi) = expected[k];
        assert!(
            (lo - want_lo).abs() < 2e-3 && (hi - want_hi).abs() < 2e-3,
            "{name} range [{lo:.4}, {hi:.4}], foreign run gave [{want_lo}, {want_hi}]"
        );
    }
}

/// Finite-difference residuals of the moment equations at grid step 1e-2
/// on the ten-node reference run over [0, 2].
#[test]
fn moment_residual_magnitudes_match_the_foreign_run() {
    let expected = [1.879e-5, 1.905e-5, 3.013e-5, 2.359e-5];
    let sc = reference_scenario(10);
    let grid = uniform_grid(2.0, 1e-2).unwrap();
    let init = StateDistribution::from_scenario(&sc).unwrap();
    let solution = solve_master(&sc.params, &init, &grid, &tight()).unwrap();
    let residuals = check_moment_odes(&sc.params, &solution).unwrap().as_array();
    for (k, (got, want)) in residuals.iter().zip(expected).enumerate() {
        assert!(
            (got - want).abs() <= 1e-3 * want,
            "moment {}: residual {got:.4e}, foreign run gave {want:.4e}",
            k + 1
        );
    }
}
