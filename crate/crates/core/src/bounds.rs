//! The quantitative convergence bound.
//!
//! The reduced moment state z_n of the n-node process and the limit state
//! z_bar = (y1, y2, 0) both solve the reduced system, one with the true
//! closure values and eps = 1/n, the other with zero closures and eps = 0.
//! A Lipschitz constant L for the closed right-hand side over its trust
//! region and a bound M on the eps-sized perturbation terms give, by the
//! integral form of Gronwall's inequality,
//!
//!   |z_n(t) - z_bar(t)|_1  <=  delta0 e^(L t) + M (e^(L t) - 1) / L,
//!
//! and the mean-square distance of the stochastic process from the limit is
//! in turn at most that l1 gap. The envelope is crude (it grows like e^(L t)
//! with L on the order of tens) but fully explicit, which is the point; its
//! value is as a certified ceiling whose decay in 1/n is observable at small
//! times.

use crate::error::Result;
use crate::master::MasterSolution;
use crate::model::ModelParams;
use crate::moments::MomentVector;
use crate::scalar::Real;
use crate::trajectory::TrajectoryTable;

/// Lipschitz constant of the closed right-hand side on the trust region
/// [0, 1] x [0, 1] x [0, 2] with closure values in their legal ranges,
/// uniformly in eps in [0, 1].
pub fn lipschitz_constant<R: Real>(tau: R, gamma: R) -> R {
    R::of(22.0) * tau + R::of(2.0) * gamma
}

/// Uniform bound on the finite-size perturbation terms of the closed system
/// over the trust region: the z3 source (2 tau z1 z2 + gamma z2) eps plus
/// the eps-dependent part of the z3 growth rate, tau |h1| z3 eps <= 2 tau eps.
pub fn perturbation_bound<R: Real>(tau: R, gamma: R, epsilon: R) -> R {
    (R::of(4.0) * tau + gamma) * epsilon
}

/// Data of one Gronwall envelope.
#[derive(Clone, Copy, Debug)]
pub struct BoundParams<R: Real = f64> {
    pub lipschitz: R,
    pub perturbation: R,
    pub initial_gap: R,
}

impl<R: Real> BoundParams<R> {
    /// Envelope constants for comparing an n-node population against the
    /// limit dynamics.
    pub fn for_model(params: &ModelParams<R>, initial_gap: R) -> Self {
        Self {
            lipschitz: lipschitz_constant(params.tau, params.gamma),
            perturbation: perturbation_bound(params.tau, params.gamma, params.epsilon()),
            initial_gap,
        }
    }
}

/// The envelope value at time `t`, written as
/// `delta0 e^(Lt) + M expm1(Lt) / L` so that it degrades gracefully to the
/// L = 0 limit `delta0 + M t` instead of dividing zero by zero.
pub fn gronwall_envelope<R: Real>(bp: &BoundParams<R>, t: R) -> R {
    let lt = bp.lipschitz * t;
    let growth = if bp.lipschitz == R::zero() { t } else { lt.exp_m1() / bp.lipschitz };
    bp.initial_gap * lt.exp() + bp.perturbation * growth
}

/// Squared distance of the population moments from a limit point, plus the
/// total variance: the quantity whose decay to zero is mean-square
/// convergence of the process to the deterministic trajectory.
pub fn mean_square_error<R: Real>(z: &MomentVector<R>, y1: R, y2: R) -> R {
    let ds = z.mean_s - y1;
    let di = z.mean_i - y2;
    ds * ds + di * di + z.total_var
}

/// Fixed column layout of a bound-verification table.
pub const BOUND_COLUMNS: [&str; 4] = ["measured_l1", "gronwall", "mse", "ratio"];

#[derive(Clone, Debug)]
pub struct BoundReport<R: Real = f64> {
    pub table: TrajectoryTable<R>,
    /// Largest measured/envelope ratio over the grid; at most one exactly
    /// when the bound is tight somewhere (it is at t = 0 whenever the
    /// initial gap is positive).
    pub max_ratio: R,
    /// True when the measured gap never exceeds the envelope.
    pub dominated: bool,
}

/// Measures the l1 gap between the moments of a solved distribution and the
/// limit trajectory on their (shared) grid and compares it against the
/// Gronwall envelope pointwise.
pub fn verify_bound<R: Real>(
    params: &ModelParams<R>,
    master: &MasterSolution<R>,
    meanfield: &TrajectoryTable<R>,
) -> Result<BoundReport<R>> {
    master.table.require_same_grid(meanfield)?;
    let times = master.table.times();
    let y1 = meanfield.column("y1")?;
    let y2 = meanfield.column("y2")?;

    let gaps: Vec<R> = master
        .moments
        .iter()
        .zip(y1.iter().zip(y2))
        .map(|(m, (&a, &b))| {
            let z = m.as_vector();
            (z.mean_s - a).abs() + (z.mean_i - b).abs() + z.total_var
        })
        .collect();
    let bp = BoundParams::for_model(params, gaps[0]);

    let mut envelope = Vec::with_capacity(times.len());
    let mut mse = Vec::with_capacity(times.len());
    let mut ratio = Vec::with_capacity(times.len());
    let mut max_ratio = R::zero();
    let mut dominated = true;
    for (k, &t) in times.iter().enumerate() {
        let bound = gronwall_envelope(&bp, t);
        let m = mean_square_error(&master.moments[k].as_vector(), y1[k], y2[k]);
        let r = if bound > R::zero() {
            gaps[k] / bound
        } else if gaps[k] == R::zero() {
            R::zero()
        } else {
            R::infinity()
        };
        dominated = dominated && gaps[k] <= bound + bound * R::epsilon();
        max_ratio = max_ratio.max(r);
        envelope.push(bound);
        mse.push(m);
        ratio.push(r);
    }

    let mut table = TrajectoryTable::new(times.to_vec())?;
    table.push_column(BOUND_COLUMNS[0], gaps)?;
    table.push_column(BOUND_COLUMNS[1], envelope)?;
    table.push_column(BOUND_COLUMNS[2], mse)?;
    table.push_column(BOUND_COLUMNS[3], ratio)?;
    table.set_metadata("n", format!("{}", params.n));
    table.set_metadata("tau", format!("{}", params.tau));
    table.set_metadata("gamma", format!("{}", params.gamma));
    table.set_metadata("lipschitz", format!("{}", bp.lipschitz));
    table.set_metadata("perturbation", format!("{}", bp.perturbation));
    Ok(BoundReport { table, max_ratio, dominated })
}
