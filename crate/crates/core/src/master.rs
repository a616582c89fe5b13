//! Exact distribution dynamics on the finite state triangle.
//!
//! A population of n nodes in states (S, I) with S + I <= n evolves by two
//! jumps: infection takes (S, I) to (S - 1, I + 1) at rate (tau / n) S I and
//! recovery takes it to (S, I - 1) at rate gamma I. The forward equations for
//! the full distribution over the triangle are a linear ODE, solved here on a
//! time grid, with a matrix-exponential cross-check for small n.

use crate::error::{Error, Result};
use crate::expm::{expm, SquareMatrix};
use crate::model::{ModelParams, Scenario};
use crate::moments::MomentSet;
use crate::ode::{solve_on_grid, OdeOptions};
use crate::scalar::{CompensatedSum, Real};
use crate::tolerances::MASS_TOL;
use crate::trajectory::{uniform_step, TrajectoryTable};

/// Number of states (s, i) with s + i <= n.
pub fn num_states(n: u32) -> usize {
    let n = n as usize;
    (n + 1) * (n + 2) / 2
}

/// Position of (s, i) in the flattened triangle: blocks of decreasing length
/// ordered by s, then by i within a block.
pub fn state_index(n: u32, s: u32, i: u32) -> usize {
    debug_assert!(s + i <= n, "state ({s}, {i}) outside triangle for n = {n}");
    let (n, s, i) = (n as usize, s as usize, i as usize);
    s * (n + 1) - (s * s - s) / 2 + i
}

/// States in index order.
pub fn states(n: u32) -> impl Iterator<Item = (u32, u32)> {
    (0..=n).flat_map(move |s| (0..=(n - s)).map(move |i| (s, i)))
}

/// A probability distribution over the state triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct StateDistribution<R: Real = f64> {
    n: u32,
    mass: Vec<R>,
}

impl<R: Real> StateDistribution<R> {
    /// Build from raw masses, absorbing the small defects numerical
    /// integration leaves behind: negative mass up to a total of `MASS_TOL`
    /// is clamped to zero and the result is renormalized provided the total
    /// is within `MASS_TOL` of one. Larger defects are rejected.
    pub fn from_masses(n: u32, mut mass: Vec<R>) -> Result<Self> {
        if mass.len() != num_states(n) {
            return Err(Error::InvalidParams(format!(
                "expected {} masses for n = {}, got {}",
                num_states(n),
                n,
                mass.len()
            )));
        }
        let mut negative = CompensatedSum::new();
        for &x in &mass {
            if !x.is_finite() {
                return Err(Error::InvalidParams("mass entries must be finite".into()));
            }
            if x < R::zero() {
                negative.add(-x);
            }
        }
        if negative.value() > R::of(MASS_TOL) {
            return Err(Error::InvalidParams(format!(
                "negative probability mass totals {}",
                negative.value()
            )));
        }
        let mut total = CompensatedSum::new();
        for x in &mut mass {
            *x = x.max(R::zero());
            total.add(*x);
        }
        let total = total.value();
        if (total - R::one()).abs() > R::of(MASS_TOL) {
            return Err(Error::Unnormalized { total: total.as_f64() });
        }
        for x in &mut mass {
            *x = *x / total;
        }
        Ok(Self { n, mass })
    }

    pub fn point_mass(n: u32, s: u32, i: u32) -> Result<Self> {
        if s + i > n {
            return Err(Error::InvalidParams(format!(
                "initial counts ({s}, {i}) exceed population {n}"
            )));
        }
        let mut mass = vec![R::zero(); num_states(n)];
        mass[state_index(n, s, i)] = R::one();
        Ok(Self { n, mass })
    }

    /// Point mass at the integer counts of a scenario.
    pub fn from_scenario(scenario: &Scenario<R>) -> Result<Self> {
        let (s0, i0) = scenario.initial_counts()?;
        Self::point_mass(scenario.params.n, s0, i0)
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn mass(&self) -> &[R] {
        &self.mass
    }

    pub fn prob(&self, s: u32, i: u32) -> R {
        self.mass[state_index(self.n, s, i)]
    }

    /// Largest entrywise probability difference.
    pub fn sup_distance(&self, other: &Self) -> R {
        assert_eq!(self.n, other.n, "population mismatch");
        self.mass
            .iter()
            .zip(&other.mass)
            .map(|(&a, &b)| (a - b).abs())
            .fold(R::zero(), R::max)
    }

    /// Probability that the epidemic is over.
    pub fn absorbed_mass(&self) -> R {
        (0..=self.n).map(|s| self.prob(s, 0)).sum()
    }

    /// Fraction-scale moments up to the mixed third order.
    pub fn moments(&self) -> MomentSet<R> {
        let n = R::of(f64::from(self.n));
        let mut acc = [CompensatedSum::new(); 7];
        for (s, i) in states(self.n) {
            let w = self.mass[state_index(self.n, s, i)];
            if w == R::zero() {
                continue;
            }
            let fs = R::of(f64::from(s)) / n;
            let fi = R::of(f64::from(i)) / n;
            acc[0].add(w * fs);
            acc[1].add(w * fi);
            acc[2].add(w * fs * fs);
            acc[3].add(w * fi * fi);
            acc[4].add(w * fs * fi);
            acc[5].add(w * fs * fs * fi);
            acc[6].add(w * fs * fi * fi);
        }
        MomentSet {
            mean_s: acc[0].value(),
            mean_i: acc[1].value(),
            e_s2: acc[2].value(),
            e_i2: acc[3].value(),
            e_si: acc[4].value(),
            e_s2i: acc[5].value(),
            e_si2: acc[6].value(),
        }
    }
}

/// Forward operator: writes d/dt of the distribution into `out`.
///
/// Every state with I >= 1 loses mass at its total jump rate; infection mass
/// arrives from (s + 1, i - 1) and recovery mass from (s, i + 1).
pub fn generator_apply<R: Real>(params: &ModelParams<R>, mass: &[R], out: &mut [R]) {
    let n = params.n;
    debug_assert_eq!(mass.len(), num_states(n));
    debug_assert_eq!(out.len(), num_states(n));
    let beta = params.tau / params.n_real();
    for (s, i) in states(n) {
        let idx = state_index(n, s, i);
        let fs = R::of(f64::from(s));
        let fi = R::of(f64::from(i));
        let mut rate = -(beta * fs * fi + params.gamma * fi) * mass[idx];
        if i >= 1 && s + 1 <= n {
            let src = state_index(n, s + 1, i - 1);
            rate = rate + beta * R::of(f64::from(s + 1)) * (fi - R::one()) * mass[src];
        }
        if s + i + 1 <= n {
            let src = state_index(n, s, i + 1);
            rate = rate + params.gamma * (fi + R::one()) * mass[src];
        }
        out[idx] = rate;
    }
}

/// The same operator as a dense matrix in column convention: entry (target,
/// source) is the rate from source into target, so columns sum to zero.
pub fn generator_matrix<R: Real>(params: &ModelParams<R>) -> SquareMatrix<R> {
    let n = params.n;
    let beta = params.tau / params.n_real();
    let mut q = SquareMatrix::zeros(num_states(n));
    for (s, i) in states(n) {
        if i == 0 {
            continue;
        }
        let src = state_index(n, s, i);
        let infection = beta * R::of(f64::from(s)) * R::of(f64::from(i));
        let recovery = params.gamma * R::of(f64::from(i));
        q[(src, src)] = q[(src, src)] - (infection + recovery);
        if s >= 1 {
            let tgt = state_index(n, s - 1, i + 1);
            q[(tgt, src)] = q[(tgt, src)] + infection;
        }
        let tgt = state_index(n, s, i - 1);
        q[(tgt, src)] = q[(tgt, src)] + recovery;
    }
    q
}

/// Distribution snapshots on a grid together with their moment summaries.
#[derive(Clone, Debug)]
pub struct MasterSolution<R: Real = f64> {
    pub table: TrajectoryTable<R>,
    pub distributions: Vec<StateDistribution<R>>,
    pub moments: Vec<MomentSet<R>>,
}

/// Fixed column layout of the master moment table.
pub const MASTER_COLUMNS: [&str; 12] = [
    "mean_s", "mean_i", "var_s", "var_i", "e_si", "e_s2i", "e_si2", "total_var", "h1", "h2",
    "h3", "h4",
];

/// Integrate the forward equations from `init` over `grid`.
pub fn solve_master<R: Real>(
    params: &ModelParams<R>,
    init: &StateDistribution<R>,
    grid: &[R],
    opts: &OdeOptions<R>,
) -> Result<MasterSolution<R>> {
    params.validate()?;
    if init.n() != params.n {
        return Err(Error::InvalidParams(format!(
            "distribution is over n = {}, parameters say n = {}",
            init.n(),
            params.n
        )));
    }
    let rhs = |_t: R, y: &[R], dy: &mut [R]| generator_apply(params, y, dy);
    let solution = solve_on_grid(rhs, grid, init.mass(), opts)?;
    if let Some(trunc) = solution.truncation {
        return Err(Error::IntegrationAccuracy {
            t: trunc.t.as_f64(),
            detail: format!("distribution solve stopped early: {:?}", trunc.reason),
        });
    }
    let mut distributions = Vec::with_capacity(grid.len());
    for (state, &t) in solution.states.into_iter().zip(grid) {
        let dist = StateDistribution::from_masses(params.n, state).map_err(|e| {
            Error::IntegrationAccuracy { t: t.as_f64(), detail: e.to_string() }
        })?;
        distributions.push(dist);
    }
    build_solution(params, grid, distributions)
}

/// Exponential-propagator solution at the same grid, built independently of
/// the step-by-step integrator. Intended for small n; cost grows with the
/// cube of the state count.
pub fn solve_master_expm<R: Real>(
    params: &ModelParams<R>,
    init: &StateDistribution<R>,
    grid: &[R],
) -> Result<MasterSolution<R>> {
    params.validate()?;
    if init.n() != params.n {
        return Err(Error::InvalidParams(format!(
            "distribution is over n = {}, parameters say n = {}",
            init.n(),
            params.n
        )));
    }
    let q = generator_matrix(params);
    let mut distributions = Vec::with_capacity(grid.len());
    for &t in grid {
        let propagator = expm(&q.scale(t))?;
        let mass = propagator.apply(init.mass());
        let dist = StateDistribution::from_masses(params.n, mass).map_err(|e| {
            Error::IntegrationAccuracy { t: t.as_f64(), detail: e.to_string() }
        })?;
        distributions.push(dist);
    }
    build_solution(params, grid, distributions)
}

fn build_solution<R: Real>(
    params: &ModelParams<R>,
    grid: &[R],
    distributions: Vec<StateDistribution<R>>,
) -> Result<MasterSolution<R>> {
    let moments: Vec<MomentSet<R>> = distributions.iter().map(|d| d.moments()).collect();
    let mut columns: Vec<Vec<R>> = vec![Vec::with_capacity(grid.len()); MASTER_COLUMNS.len()];
    for (m, &t) in moments.iter().zip(grid) {
        let h = m.closure_values().map_err(|e| Error::IntegrationAccuracy {
            t: t.as_f64(),
            detail: e.to_string(),
        })?;
        for (slot, value) in columns.iter_mut().zip([
            m.mean_s,
            m.mean_i,
            m.var_s(),
            m.var_i(),
            m.e_si,
            m.e_s2i,
            m.e_si2,
            m.total_variance(),
            h[0],
            h[1],
            h[2],
            h[3],
        ]) {
            slot.push(value);
        }
    }
    let mut table = TrajectoryTable::new(grid.to_vec())?;
    for (name, column) in MASTER_COLUMNS.iter().zip(columns) {
        table.push_column(name, column)?;
    }
    table.set_metadata("n", format!("{}", params.n));
    table.set_metadata("tau", format!("{}", params.tau));
    table.set_metadata("gamma", format!("{}", params.gamma));
    Ok(MasterSolution { table, distributions, moments })
}

/// Worst absolute mismatch between centered finite differences of the moment
/// trajectories and the exact moment equations, per moment.
#[derive(Clone, Copy, Debug)]
pub struct MomentOdeResiduals<R: Real = f64> {
    pub mean_s: R,
    pub mean_i: R,
    pub square_s: R,
    pub square_i: R,
}

impl<R: Real> MomentOdeResiduals<R> {
    pub fn as_array(&self) -> [R; 4] {
        [self.mean_s, self.mean_i, self.square_s, self.square_i]
    }

    pub fn max(&self) -> R {
        self.as_array().into_iter().fold(R::zero(), R::max)
    }
}

/// Check the first and second moment equations against a solved distribution
/// trajectory on a uniform grid, differentiating numerically in time. The
/// residual of a smooth trajectory shrinks quadratically with the grid step.
pub fn check_moment_odes<R: Real>(
    params: &ModelParams<R>,
    solution: &MasterSolution<R>,
) -> Result<MomentOdeResiduals<R>> {
    let times = solution.table.times();
    if times.len() < 3 {
        return Err(Error::Grid("need at least three grid points to differentiate".into()));
    }
    let h = uniform_step(times)?;
    let m = &solution.moments;
    let inv_n = R::one() / params.n_real();
    let two = R::of(2.0);
    let mut worst = MomentOdeResiduals {
        mean_s: R::zero(),
        mean_i: R::zero(),
        square_s: R::zero(),
        square_i: R::zero(),
    };
    for k in 1..times.len() - 1 {
        let dd = |f: fn(&MomentSet<R>) -> R| (f(&m[k + 1]) - f(&m[k - 1])) / (two * h);
        let rhs_mean_s = -params.tau * m[k].e_si;
        let rhs_mean_i = params.tau * m[k].e_si - params.gamma * m[k].mean_i;
        let rhs_square_s = -params.tau * (two * m[k].e_s2i - m[k].e_si * inv_n);
        let rhs_square_i = params.tau * (two * m[k].e_si2 + m[k].e_si * inv_n)
            - params.gamma * (two * m[k].e_i2 - m[k].mean_i * inv_n);
        worst.mean_s = worst.mean_s.max((dd(|m| m.mean_s) - rhs_mean_s).abs());
        worst.mean_i = worst.mean_i.max((dd(|m| m.mean_i) - rhs_mean_i).abs());
        worst.square_s = worst.square_s.max((dd(|m| m.e_s2) - rhs_square_s).abs());
        worst.square_i = worst.square_i.max((dd(|m| m.e_i2) - rhs_square_i).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tolerances::{TIGHT_ABS_TOL, TIGHT_REL_TOL};
    use crate::trajectory::uniform_grid;

    fn params(tau: f64, gamma: f64, n: u32) -> ModelParams {
        ModelParams::new(tau, gamma, n).unwrap()
    }

    fn tight() -> OdeOptions<f64> {
        OdeOptions::with_tolerances(TIGHT_REL_TOL, TIGHT_ABS_TOL)
    }

    #[test]
    fn indexing_is_a_bijection_onto_the_triangle() {
        let n = 5;
        let mut seen = vec![false; num_states(n)];
        for (k, (s, i)) in states(n).enumerate() {
            let idx = state_index(n, s, i);
            assert_eq!(idx, k);
            assert!(!seen[idx]);
            seen[idx] = true;
        }
        assert!(seen.iter().all(|&b| b));
        assert_eq!(num_states(5), 21);
    }

    #[test]
    fn point_mass_moments_match_the_state() {
        let d = StateDistribution::<f64>::point_mass(10, 9, 1).unwrap();
        let m = d.moments();
        assert_eq!(m.mean_s, 0.9);
        assert_eq!(m.mean_i, 0.1);
        assert_eq!(m.e_si, 0.9 * 0.1);
        assert_eq!(m.e_s2i, 0.81 * 0.1);
        assert_eq!(d.absorbed_mass(), 0.0);
    }

    #[test]
    fn from_masses_cleans_integration_noise_and_rejects_garbage() {
        let n = 2;
        let k = num_states(n);
        let mut mass = vec![1.0 / k as f64; k];
        mass[0] -= 2e-10;
        mass[1] += 1e-10;
        let d = StateDistribution::from_masses(n, mass).unwrap();
        let total: f64 = d.mass().iter().sum();
        assert!((total - 1.0).abs() < 1e-15);

        let mut bad = vec![1.0 / k as f64; k];
        bad[0] -= 1e-6;
        assert!(StateDistribution::from_masses(n, bad).is_err());
        assert!(StateDistribution::from_masses(n, vec![0.5; k]).is_err());
        assert!(StateDistribution::from_masses(n, vec![0.5; k + 1]).is_err());
    }

    #[test]
    fn generator_conserves_mass_and_matches_its_matrix() {
        let p = params(1.7, 0.6, 4);
        let k = num_states(p.n);
        // An arbitrary fixed distribution with full support.
        let mass: Vec<f64> = (0..k).map(|j| (j + 1) as f64).collect();
        let total: f64 = mass.iter().sum();
        let mass: Vec<f64> = mass.iter().map(|x| x / total).collect();

        let mut out = vec![0.0; k];
        generator_apply(&p, &mass, &mut out);
        let drift: f64 = out.iter().sum();
        assert!(drift.abs() < 1e-15);

        let q = generator_matrix(&p);
        let via_matrix = q.apply(&mass);
        for (a, b) in out.iter().zip(&via_matrix) {
            assert!((a - b).abs() < 1e-15);
        }
        for c in 0..k {
            let col: f64 = (0..k).map(|r| q[(r, c)]).sum();
            assert!(col.abs() < 1e-13);
        }
    }

    #[test]
    fn absorbing_states_are_stationary() {
        let p = params(2.0, 0.5, 3);
        let d = StateDistribution::<f64>::point_mass(3, 2, 0).unwrap();
        let mut out = vec![0.0; num_states(3)];
        generator_apply(&p, d.mass(), &mut out);
        assert!(out.iter().all(|&x| x == 0.0));
        assert_eq!(d.absorbed_mass(), 1.0);
    }

    #[test]
    fn pure_recovery_matches_binomial_thinning() {
        // With no infection each initially infected node recovers
        // independently, so I(t) is binomial with survival e^(-gamma t).
        let p = params(0.0, 0.25, 8);
        let init = StateDistribution::point_mass(8, 0, 8).unwrap();
        let grid = [0.0, 0.7];
        let sol = solve_master(&p, &init, &grid, &tight()).unwrap();
        let m = &sol.moments[1];
        let survive = (-0.25f64 * 0.7).exp();
        assert!((m.mean_i - survive).abs() < 1e-9);
        let var = survive * (1.0 - survive) / 8.0;
        assert!((m.var_i() - var).abs() < 1e-9);
        assert_eq!(m.mean_s, 0.0);

        let binom = |k: u32| -> f64 {
            let choose = (0..k).fold(1.0, |acc, j| acc * (8 - j) as f64 / (j + 1) as f64);
            choose * survive.powi(k as i32) * (1.0 - survive).powi(8 - k as i32)
        };
        for k in 0..=8u32 {
            assert!((sol.distributions[1].prob(0, k) - binom(k)).abs() < 1e-9);
        }
    }

    #[test]
    fn grid_solve_agrees_with_exponential_propagator() {
        let p = params(2.5, 0.4, 3);
        let init = Scenario::new(
            p,
            crate::model::InitialCondition::new(2.0 / 3.0, 1.0 / 3.0).unwrap(),
        )
        .and_then(|sc| StateDistribution::from_scenario(&sc))
        .unwrap();
        let grid = [0.0, 0.5, 1.5];
        let stepped = solve_master(&p, &init, &grid, &tight()).unwrap();
        let exact = solve_master_expm(&p, &init, &grid).unwrap();
        for (a, b) in stepped.distributions.iter().zip(&exact.distributions) {
            assert!(a.sup_distance(b) < 1e-9);
        }
    }

    #[test]
    fn moment_equations_hold_along_a_solution() {
        let p = params(3.0, 0.25, 6);
        let init = StateDistribution::point_mass(6, 5, 1).unwrap();
        let grid = uniform_grid(1.0, 0.01).unwrap();
        let sol = solve_master(&p, &init, &grid, &tight()).unwrap();
        let residuals = check_moment_odes(&p, &sol).unwrap();
        assert!(residuals.max() < 1e-4, "residuals {:?}", residuals.as_array());
    }

    #[test]
    fn closure_columns_stay_in_range() {
        let p = params(3.0, 0.25, 6);
        let init = StateDistribution::point_mass(6, 5, 1).unwrap();
        let grid = uniform_grid(2.0, 0.1).unwrap();
        let sol = solve_master(&p, &init, &grid, &tight()).unwrap();
        for name in ["h1", "h2", "h3"] {
            for &v in sol.table.column(name).unwrap() {
                assert!((-1.0..=1.0).contains(&v));
            }
        }
        for &v in sol.table.column("h4").unwrap() {
            assert!((0.0..=1.0).contains(&v));
        }
        // The closure table starts at the point-mass convention.
        assert_eq!(sol.table.column("h1").unwrap()[0], 0.0);
    }
}
