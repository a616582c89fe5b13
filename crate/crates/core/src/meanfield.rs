//! The deterministic infinite-population limit.
//!
//! The pair y = (y1, y2) of susceptible and infected fractions obeys
//! y1' = -tau y1 y2 and y2' = tau y1 y2 - gamma y2. This is the target the
//! stochastic moments converge to as the population grows, and the reduced
//! moment system collapses onto it when its variance state and the finite-size
//! correction are both switched off.

use crate::error::{Error, Result};
use crate::model::InitialCondition;
use crate::ode::{solve_on_grid, OdeOptions};
use crate::scalar::Real;
use crate::trajectory::TrajectoryTable;

pub fn meanfield_rhs<R: Real>(tau: R, gamma: R, y: &[R; 2]) -> [R; 2] {
    let flow = tau * y[0] * y[1];
    [-flow, flow - gamma * y[1]]
}

pub const MEANFIELD_COLUMNS: [&str; 2] = ["y1", "y2"];

/// Integrates the limit system over `grid`, which must start at zero.
pub fn solve_meanfield<R: Real>(
    tau: R,
    gamma: R,
    init: &InitialCondition<R>,
    grid: &[R],
    opts: &OdeOptions<R>,
) -> Result<TrajectoryTable<R>> {
    if !(tau.is_finite() && tau >= R::zero()) || !(gamma.is_finite() && gamma >= R::zero()) {
        return Err(Error::InvalidParams(format!(
            "rates (tau = {tau}, gamma = {gamma}) must be finite and nonnegative"
        )));
    }
    init.validate()?;
    let rhs = |_t: R, y: &[R], dy: &mut [R]| {
        let d = meanfield_rhs(tau, gamma, &[y[0], y[1]]);
        dy[0] = d[0];
        dy[1] = d[1];
    };
    let solution = solve_on_grid(rhs, grid, &[init.s0, init.i0], opts)?;
    if let Some(trunc) = solution.truncation {
        return Err(Error::IntegrationAccuracy {
            t: trunc.t.as_f64(),
            detail: format!("limit system solve stopped early: {:?}", trunc.reason),
        });
    }
    let mut table = TrajectoryTable::new(grid.to_vec())?;
    let column = |k: usize| solution.states.iter().map(|y| y[k]).collect();
    table.push_column(MEANFIELD_COLUMNS[0], column(0))?;
    table.push_column(MEANFIELD_COLUMNS[1], column(1))?;
    table.set_metadata("tau", format!("{tau}"));
    table.set_metadata("gamma", format!("{gamma}"));
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::{TIGHT_ABS_TOL, TIGHT_REL_TOL};
    use crate::trajectory::uniform_grid;

    fn tight() -> OdeOptions<f64> {
        OdeOptions::with_tolerances(TIGHT_REL_TOL, TIGHT_ABS_TOL)
    }

    #[test]
    fn no_infection_pressure_decays_exponentially() {
        // With tau = 0 the infected fraction is pure exponential decay.
        let init = InitialCondition::new(0.0, 1.0).unwrap();
        let grid = uniform_grid(4.0, 0.5).unwrap();
        let table = solve_meanfield(0.0, 0.25, &init, &grid, &tight()).unwrap();
        let y2 = table.column("y2").unwrap();
        for (&t, &v) in grid.iter().zip(y2) {
            assert!((v - (-0.25 * t).exp()).abs() < 1e-10);
        }
        assert!(table.column("y1").unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn conserved_quantity_along_the_flow() {
        // y1 + y2 - (gamma / tau) ln y1 is constant on trajectories.
        let (tau, gamma) = (3.0, 0.25);
        let init = InitialCondition::new(0.9, 0.1).unwrap();
        let grid = uniform_grid(5.0, 0.25).unwrap();
        let table = solve_meanfield(tau, gamma, &init, &grid, &tight()).unwrap();
        let y1 = table.column("y1").unwrap();
        let y2 = table.column("y2").unwrap();
        let invariant = |a: f64, b: f64| a + b - gamma / tau * a.ln();
        let reference = invariant(0.9, 0.1);
        for (&a, &b) in y1.iter().zip(y2) {
            assert!((invariant(a, b) - reference).abs() < 1e-9);
        }
    }

    #[test]
    fn fractions_stay_in_the_simplex() {
        let init = InitialCondition::new(0.9, 0.1).unwrap();
        let grid = uniform_grid(5.0, 0.01).unwrap();
        let table = solve_meanfield(3.0, 0.25, &init, &grid, &tight()).unwrap();
        let y1 = table.column("y1").unwrap();
        let y2 = table.column("y2").unwrap();
        for (&a, &b) in y1.iter().zip(y2) {
            assert!(a >= -1e-12 && b >= -1e-12 && a + b <= 1.0 + 1e-12);
        }
        // Susceptibles only fall; with these rates nearly all get infected,
        // and the infected wave decays after its peak.
        assert!(y1.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(y1[grid.len() - 1] < 1e-3);
        let peak = y2.iter().cloned().fold(0.0f64, f64::max);
        assert!(peak > 0.5);
        assert!(y2[grid.len() - 1] < peak);
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let init = InitialCondition::new(0.9, 0.1).unwrap();
        let grid = [0.0, 1.0];
        assert!(solve_meanfield(-1.0, 0.25, &init, &grid, &tight()).is_err());
        assert!(solve_meanfield(3.0, f64::NAN, &init, &grid, &tight()).is_err());
    }
}
