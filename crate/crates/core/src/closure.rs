//! The reduced three-variable moment system.
//!
//! Writing z = (E[s], E[i], Var[s] + Var[i]) and replacing the mixed moments
//! by the four closure values from [`MomentSet::closure_values`], the exact
//! moment equations become
//!
//!   z1' = -tau (z1 z2 + h1 z3 / 2)
//!   z2' =  tau (z1 z2 + h1 z3 / 2) - gamma z2
//!   z3' = (4 tau (h3 - h2) + tau h1 (z1 - z2 + eps) - 2 gamma h4) z3
//!         + (2 tau z1 z2 + gamma z2) eps
//!
//! with eps = 1/n the finite-size correction. Feeding back the h values
//! extracted from the solved distribution reproduces its moments; freezing
//! them at constants gives the comparison dynamics whose ordering against the
//! true moments is studied empirically. With eps = 0 and z3 = 0 the first two
//! equations are evaluated through the same code path as the plain limit
//! system, so that reduction is exact rather than approximate.

use crate::error::{Error, Result};
use crate::meanfield::meanfield_rhs;
use crate::model::ModelParams;
use crate::moments::{MomentVector, CLOSURE_RANGES};
use crate::ode::{solve_on_grid, OdeOptions, Truncation};
use crate::scalar::Real;
use crate::tolerances::{DIVERGENCE_CAP, DOMAIN_SLACK, H_RANGE_SLACK};
use crate::trajectory::TrajectoryTable;

/// Time-dependent closure values: either four constants or a table sampled
/// from a solved distribution, interpolated linearly and held constant
/// outside its time range.
#[derive(Clone, Debug)]
pub enum ClosureFunctions<R: Real = f64> {
    Constant([R; 4]),
    Table { times: Vec<R>, values: [Vec<R>; 4] },
}

/// Names of the four closure columns, shared by every table that carries them.
pub const CLOSURE_COLUMNS: [&str; 4] = ["h1", "h2", "h3", "h4"];

impl<R: Real> ClosureFunctions<R> {
    pub fn constant(h: [R; 4]) -> Result<Self> {
        for (k, (&value, &(lo, hi))) in h.iter().zip(CLOSURE_RANGES.iter()).enumerate() {
            if !value.is_finite() || value < R::of(lo) || value > R::of(hi) {
                return Err(Error::ClosureRange { index: k + 1, value: value.as_f64() });
            }
        }
        Ok(Self::Constant(h))
    }

    /// Builds a table closure, tolerating range excursions up to
    /// [`H_RANGE_SLACK`] (clamped) since sampled values carry integration
    /// noise.
    pub fn table(times: Vec<R>, mut values: [Vec<R>; 4]) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::Table("closure table needs at least one sample".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Table("closure table times must be strictly increasing".into()));
        }
        if times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Table("closure table times must be finite".into()));
        }
        let slack = R::of(H_RANGE_SLACK);
        for (k, column) in values.iter_mut().enumerate() {
            if column.len() != times.len() {
                return Err(Error::Table(format!(
                    "closure column {} has {} samples, expected {}",
                    CLOSURE_COLUMNS[k],
                    column.len(),
                    times.len()
                )));
            }
            let (lo, hi) = (R::of(CLOSURE_RANGES[k].0), R::of(CLOSURE_RANGES[k].1));
            for value in column.iter_mut() {
                if !value.is_finite() || *value < lo - slack || *value > hi + slack {
                    return Err(Error::ClosureRange { index: k + 1, value: value.as_f64() });
                }
                *value = value.max(lo).min(hi);
            }
        }
        Ok(Self::Table { times, values })
    }

    /// Reads the closure columns out of a moment table, typically one
    /// produced by the distribution solver.
    pub fn from_trajectory(table: &TrajectoryTable<R>) -> Result<Self> {
        let mut values: [Vec<R>; 4] = Default::default();
        for (slot, name) in values.iter_mut().zip(CLOSURE_COLUMNS) {
            *slot = table.column(name)?.to_vec();
        }
        Self::table(table.times().to_vec(), values)
    }

    /// Closure values at time `t`.
    pub fn eval(&self, t: R) -> [R; 4] {
        match self {
            Self::Constant(h) => *h,
            Self::Table { times, values } => {
                let last = times.len() - 1;
                let sample = |k: usize| [values[0][k], values[1][k], values[2][k], values[3][k]];
                if t <= times[0] {
                    return sample(0);
                }
                if t >= times[last] {
                    return sample(last);
                }
                let hi = times.partition_point(|&x| x <= t);
                let lo = hi - 1;
                let w = (t - times[lo]) / (times[hi] - times[lo]);
                let mut h = [R::zero(); 4];
                for (k, slot) in h.iter_mut().enumerate() {
                    let (a, b) = (values[k][lo], values[k][hi]);
                    *slot = a + w * (b - a);
                }
                h
            }
        }
    }
}

/// Everything the reduced system needs: rates, the finite-size correction
/// eps (zero recovers the limit dynamics), and the closure values.
#[derive(Clone, Debug)]
pub struct ClosedSystemSpec<R: Real = f64> {
    pub tau: R,
    pub gamma: R,
    pub epsilon: R,
    pub closures: ClosureFunctions<R>,
}

impl<R: Real> ClosedSystemSpec<R> {
    pub fn new(tau: R, gamma: R, epsilon: R, closures: ClosureFunctions<R>) -> Result<Self> {
        if !(tau.is_finite() && tau >= R::zero()) || !(gamma.is_finite() && gamma >= R::zero()) {
            return Err(Error::InvalidParams(format!(
                "rates (tau = {tau}, gamma = {gamma}) must be finite and nonnegative"
            )));
        }
        if !epsilon.is_finite() || epsilon < R::zero() || epsilon > R::one() {
            return Err(Error::InvalidParams(format!(
                "finite-size correction eps = {epsilon} must lie in [0, 1]"
            )));
        }
        Ok(Self { tau, gamma, epsilon, closures })
    }

    /// Spec matching a finite population: eps = 1/n.
    pub fn for_population(params: &ModelParams<R>, closures: ClosureFunctions<R>) -> Result<Self> {
        params.validate()?;
        Self::new(params.tau, params.gamma, params.epsilon(), closures)
    }
}

/// Right-hand side of the reduced system at state `z` with closure values
/// `h`. The mean equations are the limit system plus a variance correction,
/// evaluated so that the correction vanishes identically when z3 = 0.
pub fn g_rhs<R: Real>(spec: &ClosedSystemSpec<R>, h: &[R; 4], z: &[R; 3]) -> [R; 3] {
    let [z1, z2, z3] = *z;
    let base = meanfield_rhs(spec.tau, spec.gamma, &[z1, z2]);
    let correction = spec.tau * h[0] * z3 * R::of(0.5);
    let growth = R::of(4.0) * spec.tau * (h[2] - h[1]) + spec.tau * h[0] * (z1 - z2 + spec.epsilon)
        - R::of(2.0) * spec.gamma * h[3];
    let source = (R::of(2.0) * spec.tau * z1 * z2 + spec.gamma * z2) * spec.epsilon;
    [base[0] - correction, base[1] + correction, growth * z3 + source]
}

/// Where and why a reduced-system trajectory left its trust region or blew up.
#[derive(Clone, Copy, Debug)]
pub struct ClosedSolution<R: Real = f64> {
    /// First grid time at which z left [0, 1] x [0, 1] x [0, 2] (by more
    /// than [`DOMAIN_SLACK`]); the moment interpretation of z is suspect
    /// from here on, though integration continues.
    pub domain_exit: Option<R>,
    /// Set when the solve stopped before the end of the grid, which for this
    /// system means finite-time blowup of the comparison dynamics.
    pub truncation: Option<Truncation<R>>,
}

/// Integrates the reduced system over `grid`. The returned table covers the
/// grid points actually reached; rows are never fabricated past a blowup.
pub fn solve_closed<R: Real>(
    spec: &ClosedSystemSpec<R>,
    init: &MomentVector<R>,
    grid: &[R],
    opts: &OdeOptions<R>,
) -> Result<(TrajectoryTable<R>, ClosedSolution<R>)> {
    init.validate()?;
    let mut opts = *opts;
    opts.divergence_cap.get_or_insert(R::of(DIVERGENCE_CAP));
    let rhs = |t: R, y: &[R], dy: &mut [R]| {
        let h = spec.closures.eval(t);
        let d = g_rhs(spec, &h, &[y[0], y[1], y[2]]);
        dy.copy_from_slice(&d);
    };
    let solution = solve_on_grid(rhs, grid, &init.as_array(), &opts)?;

    let slack = R::of(DOMAIN_SLACK);
    let inside = |z: &[R]| {
        let unit = |x: R| x >= -slack && x <= R::one() + slack;
        unit(z[0]) && unit(z[1]) && z[2] >= -slack && z[2] <= R::of(2.0) + slack
    };
    let domain_exit = solution
        .states
        .iter()
        .zip(grid)
        .find(|(z, _)| !inside(z))
        .map(|(_, &t)| t);

    let reached = solution.states.len();
    let mut table = TrajectoryTable::new(grid[..reached].to_vec())?;
    for (k, name) in CLOSED_COLUMNS.iter().enumerate() {
        table.push_column(name, solution.states.iter().map(|z| z[k]).collect())?;
    }
    table.set_metadata("tau", format!("{}", spec.tau));
    table.set_metadata("gamma", format!("{}", spec.gamma));
    table.set_metadata("epsilon", format!("{}", spec.epsilon));
    if let Some(t) = domain_exit {
        table.set_metadata("domain_exit_t", format!("{t}"));
    }
    if let Some(trunc) = solution.truncation {
        table.set_metadata("truncated_t", format!("{}", trunc.t));
        table.set_metadata("truncated_reason", format!("{:?}", trunc.reason));
    }
    Ok((table, ClosedSolution { domain_exit, truncation: solution.truncation }))
}

pub const CLOSED_COLUMNS: [&str; 3] = ["z1", "z2", "z3"];

/// Largest finite-difference residual of the total-variance equation along a
/// solved distribution trajectory, in raw moment form:
///
///   V' = 2 tau (E[si2] - E[s2i]) + 2 tau E[si] (E[s] - E[i] + 1/n)
///        - 2 gamma Var[i] + gamma E[i] / n.
///
/// This is the identity the z3 equation encodes before the closure values
/// are substituted.
pub fn check_total_variance_ode<R: Real>(
    params: &ModelParams<R>,
    solution: &crate::master::MasterSolution<R>,
) -> Result<R> {
    let times = solution.table.times();
    if times.len() < 3 {
        return Err(Error::Grid("need at least three grid points to differentiate".into()));
    }
    let h = crate::trajectory::uniform_step(times)?;
    let m = &solution.moments;
    let eps = params.epsilon();
    let two = R::of(2.0);
    let mut worst = R::zero();
    for k in 1..times.len() - 1 {
        let dv = (m[k + 1].total_variance() - m[k - 1].total_variance()) / (two * h);
        let rhs = two * params.tau * (m[k].e_si2 - m[k].e_s2i)
            + two * params.tau * m[k].e_si * (m[k].mean_s - m[k].mean_i + eps)
            - two * params.gamma * m[k].var_i()
            + params.gamma * m[k].mean_i * eps;
        worst = worst.max((dv - rhs).abs());
    }
    Ok(worst)
}
