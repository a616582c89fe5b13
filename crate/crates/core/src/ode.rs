//! Adaptive explicit Runge-Kutta integration on caller-supplied grids.
//!
//! The method is the Dormand-Prince 5(4) embedded pair with the first-same-
//! as-last optimization and a standard PI-free step controller: accept when
//! the scaled error norm is at most one, propose `h * 0.9 * err^(-1/5)`
//! clamped to `[0.2 h, 5 h]`. Internal steps are clamped so each requested
//! grid time is hit exactly, and the state is carried continuously across
//! grid points (no restarts), which keeps the sampled trajectory smooth
//! enough for finite-difference studies on top of it.
//!
//! All state vectors are dense `Vec<R>`; the right-hand side writes its
//! result into a caller-provided buffer to keep the hot loop allocation-free.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tolerances::{DEFAULT_ABS_TOL, DEFAULT_REL_TOL};

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions<R: Real = f64> {
    pub rel_tol: R,
    pub abs_tol: R,
    /// Hard cap on accepted plus rejected steps for one solve.
    pub max_steps: usize,
    /// When set, a state component exceeding this magnitude (or a non-finite
    /// state, or step-size underflow) truncates the solve gracefully instead
    /// of failing it. Used for closed-system trajectories that genuinely
    /// blow up in finite time.
    pub divergence_cap: Option<R>,
}

impl<R: Real> Default for OdeOptions<R> {
    fn default() -> Self {
        Self {
            rel_tol: R::of(DEFAULT_REL_TOL),
            abs_tol: R::of(DEFAULT_ABS_TOL),
            max_steps: 10_000_000,
            divergence_cap: None,
        }
    }
}

impl<R: Real> OdeOptions<R> {
    pub fn with_tolerances(rel_tol: R, abs_tol: R) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TruncationReason {
    DivergenceCap,
    StepSizeUnderflow,
    NonFinite,
}

#[derive(Clone, Copy, Debug)]
pub struct Truncation<R: Real = f64> {
    pub t: R,
    pub reason: TruncationReason,
}

#[derive(Clone, Debug)]
pub struct GridSolution<R: Real = f64> {
    /// One state per grid point actually reached; `states.len()` can fall
    /// short of the grid length only when `truncation` is set.
    pub states: Vec<Vec<R>>,
    pub truncation: Option<Truncation<R>>,
    pub rhs_evals: usize,
    pub accepted: usize,
    pub rejected: usize,
}

/// Dormand-Prince 5(4) tableau.
struct Tableau<R> {
    a: [[R; 6]; 6],
    c: [R; 6],
    /// Error weights: fifth-order weights minus the embedded fourth-order
    /// weights, applied to all seven stages.
    e: [R; 7],
}

fn tableau<R: Real>() -> Tableau<R> {
    let f = R::of;
    Tableau {
        a: [
            [f(1.0 / 5.0), f(0.0), f(0.0), f(0.0), f(0.0), f(0.0)],
            [f(3.0 / 40.0), f(9.0 / 40.0), f(0.0), f(0.0), f(0.0), f(0.0)],
            [f(44.0 / 45.0), f(-56.0 / 15.0), f(32.0 / 9.0), f(0.0), f(0.0), f(0.0)],
            [
                f(19372.0 / 6561.0),
                f(-25360.0 / 2187.0),
                f(64448.0 / 6561.0),
                f(-212.0 / 729.0),
                f(0.0),
                f(0.0),
            ],
            [
                f(9017.0 / 3168.0),
                f(-355.0 / 33.0),
                f(46732.0 / 5247.0),
                f(49.0 / 176.0),
                f(-5103.0 / 18656.0),
                f(0.0),
            ],
            [
                f(35.0 / 384.0),
                f(0.0),
                f(500.0 / 1113.0),
                f(125.0 / 192.0),
                f(-2187.0 / 6784.0),
                f(11.0 / 84.0),
            ],
        ],
        c: [f(1.0 / 5.0), f(3.0 / 10.0), f(4.0 / 5.0), f(8.0 / 9.0), f(1.0), f(1.0)],
        e: [
            f(71.0 / 57600.0),
            f(0.0),
            f(-71.0 / 16695.0),
            f(71.0 / 1920.0),
            f(-17253.0 / 339200.0),
            f(22.0 / 525.0),
            f(-1.0 / 40.0),
        ],
    }
}

struct Integrator<'a, R: Real, F> {
    rhs: F,
    opts: &'a OdeOptions<R>,
    tab: Tableau<R>,
    dim: usize,
    t: R,
    y: Vec<R>,
    /// f(t, y); valid at all times (first-same-as-last).
    dy: Vec<R>,
    k: [Vec<R>; 7],
    scratch: Vec<R>,
    h: R,
    rhs_evals: usize,
    accepted: usize,
    rejected: usize,
}

impl<'a, R: Real, F: FnMut(R, &[R], &mut [R])> Integrator<'a, R, F> {
    fn new(mut rhs: F, t0: R, y0: &[R], opts: &'a OdeOptions<R>) -> Self {
        let dim = y0.len();
        let mut dy = vec![R::zero(); dim];
        rhs(t0, y0, &mut dy);
        Self {
            rhs,
            opts,
            tab: tableau(),
            dim,
            t: t0,
            y: y0.to_vec(),
            dy,
            k: std::array::from_fn(|_| vec![R::zero(); dim]),
            scratch: vec![R::zero(); dim],
            h: R::zero(),
            rhs_evals: 1,
            accepted: 0,
            rejected: 0,
        }
    }

    fn scale(&self, i: usize, y_new: &[R]) -> R {
        self.opts.abs_tol + self.opts.rel_tol * self.y[i].abs().max(y_new[i].abs())
    }

    /// Starting step size, chosen from the magnitudes of the state and its
    /// first two derivatives so the very first step is already plausible.
    fn initial_step(&mut self, span: R) -> R {
        let scales: Vec<R> = self
            .y
            .iter()
            .map(|y| self.opts.abs_tol + self.opts.rel_tol * y.abs())
            .collect();
        let d0 = scaled_rms(&self.y, &scales);
        let d1 = scaled_rms(&self.dy, &scales);
        let small = R::of(1e-5);
        let mut h0 = if d0 < small || d1 < small {
            R::of(1e-6)
        } else {
            R::of(0.01) * (d0 / d1)
        };
        h0 = h0.min(span);
        for i in 0..self.dim {
            self.scratch[i] = self.y[i] + h0 * self.dy[i];
        }
        let mut f1 = vec![R::zero(); self.dim];
        (self.rhs)(self.t + h0, &self.scratch, &mut f1);
        self.rhs_evals += 1;
        for i in 0..self.dim {
            f1[i] = (f1[i] - self.dy[i]) / h0;
        }
        let d2 = scaled_rms(&f1, &scales);
        let d_max = d1.max(d2);
        let h1 = if d_max <= R::of(1e-15) {
            (h0 * R::of(1e-3)).max(R::of(1e-6))
        } else {
            (R::of(0.01) / d_max).powf(R::of(0.2))
        };
        (h0 * R::of(100.0)).min(h1).min(span)
    }

    /// One attempted step of size `h`. Returns the scaled error norm; the
    /// candidate state is left in `scratch` and the last stage in `k[6]`.
    fn attempt(&mut self, h: R) -> R {
        let tab = &self.tab;
        self.k[0].copy_from_slice(&self.dy);
        for stage in 0..6 {
            for i in 0..self.dim {
                let mut acc = R::zero();
                for (j, kj) in self.k.iter().enumerate().take(stage + 1) {
                    acc = acc + tab.a[stage][j] * kj[i];
                }
                self.scratch[i] = self.y[i] + h * acc;
            }
            let (head, tail) = self.k.split_at_mut(stage + 1);
            let _ = head;
            (self.rhs)(self.t + tab.c[stage] * h, &self.scratch, &mut tail[0]);
            self.rhs_evals += 1;
        }
        // Stage 6 used the fifth-order weights, so scratch now holds the
        // fifth-order candidate and k[6] its derivative.
        let mut err = R::zero();
        for i in 0..self.dim {
            let mut e = R::zero();
            for (j, kj) in self.k.iter().enumerate() {
                e = e + tab.e[j] * kj[i];
            }
            let w = h * e / self.scale(i, &self.scratch);
            err = err + w * w;
        }
        (err / R::of(self.dim as f64)).sqrt()
    }

    fn step_underflow(&self) -> R {
        let ulp_scale = self.t.abs().max(R::one());
        ulp_scale * R::epsilon() * R::of(16.0)
    }
}

fn scaled_rms<R: Real>(v: &[R], scales: &[R]) -> R {
    let mut acc = R::zero();
    for (x, sc) in v.iter().zip(scales) {
        let w = *x / *sc;
        acc = acc + w * w;
    }
    (acc / R::of(v.len() as f64)).sqrt()
}

/// Integrates `y' = rhs(t, y)` from `grid[0]`, sampling the state at every
/// grid time. The grid must be strictly increasing.
pub fn solve_on_grid<R, F>(
    rhs: F,
    grid: &[R],
    y0: &[R],
    opts: &OdeOptions<R>,
) -> Result<GridSolution<R>>
where
    R: Real,
    F: FnMut(R, &[R], &mut [R]),
{
    if grid.len() < 2 {
        return Err(Error::Grid("integration grid needs at least two points".into()));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Grid("integration grid must be strictly increasing".into()));
    }
    if y0.is_empty() {
        return Err(Error::InvalidParams("empty initial state".into()));
    }

    let mut integ = Integrator::new(rhs, grid[0], y0, opts);
    let span = *grid.last().unwrap() - grid[0];
    integ.h = integ.initial_step(span);

    let mut states = Vec::with_capacity(grid.len());
    states.push(y0.to_vec());

    let truncate = |reason: TruncationReason, t: R| Truncation { t, reason };
    let mut truncation = None;

    'targets: for &target in &grid[1..] {
        while integ.t < target {
            if integ.accepted + integ.rejected >= opts.max_steps {
                return Err(Error::StepBudgetExhausted { t: integ.t.as_f64() });
            }
            let remaining = target - integ.t;
            if remaining < integ.step_underflow() {
                // Within roundoff of the target already; snap rather than
                // forcing a denormal-sized step.
                integ.t = target;
                break;
            }
            let clamped = integ.h >= remaining;
            let h = if clamped { remaining } else { integ.h };
            if h < integ.step_underflow() {
                if opts.divergence_cap.is_some() {
                    truncation = Some(truncate(TruncationReason::StepSizeUnderflow, integ.t));
                    break 'targets;
                }
                return Err(Error::StepSizeUnderflow { t: integ.t.as_f64() });
            }

            let err = integ.attempt(h);

            if !err.is_finite() {
                if opts.divergence_cap.is_some() {
                    truncation = Some(truncate(TruncationReason::NonFinite, integ.t));
                    break 'targets;
                }
                return Err(Error::NonFiniteState { t: integ.t.as_f64() });
            }

            let factor = if err == R::zero() {
                R::of(5.0)
            } else {
                (R::of(0.9) * err.powf(R::of(-0.2))).max(R::of(0.2)).min(R::of(5.0))
            };

            if err <= R::one() {
                integ.t = if clamped { target } else { integ.t + h };
                std::mem::swap(&mut integ.y, &mut integ.scratch);
                let (dy, k6) = (&mut integ.dy, &integ.k[6]);
                dy.copy_from_slice(k6);
                integ.accepted += 1;
                if !clamped {
                    integ.h = h * factor;
                } else {
                    integ.h = integ.h.max(h * factor.min(R::one()));
                }
                if let Some(cap) = opts.divergence_cap {
                    if integ.y.iter().any(|v| v.abs() > cap || !v.is_finite()) {
                        truncation = Some(truncate(TruncationReason::DivergenceCap, integ.t));
                        break 'targets;
                    }
                }
            } else {
                integ.rejected += 1;
                integ.h = h * factor;
            }
        }
        states.push(integ.y.clone());
    }

    Ok(GridSolution {
        states,
        truncation,
        rhs_evals: integ.rhs_evals,
        accepted: integ.accepted,
        rejected: integ.rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trajectory::uniform_grid;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let grid = uniform_grid(4.0, 0.5).unwrap();
        let sol = solve_on_grid(
            |_t, y: &[f64], dy: &mut [f64]| dy[0] = -0.25 * y[0],
            &grid,
            &[1.0],
            &OdeOptions::default(),
        )
        .unwrap();
        for (t, y) in grid.iter().zip(&sol.states) {
            let exact = (-0.25 * t).exp();
            assert!((y[0] - exact).abs() < 1e-9, "t={t}: {} vs {exact}", y[0]);
        }
        assert!(sol.truncation.is_none());
    }

    #[test]
    fn final_point_equals_target_exactly() {
        let grid = vec![0.0, 0.3333333333333333, 1.0];
        let sol = solve_on_grid(
            |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0],
            &grid,
            &[1.0],
            &OdeOptions::default(),
        )
        .unwrap();
        assert_eq!(sol.states.len(), 3);
        assert!((sol.states[2][0] - 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let grid = uniform_grid(2.0, 2.0).unwrap();
        let rhs = |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = (5.0 * t).cos() * 5.0;
        let exact = (10.0f64).sin();
        let mut errors = Vec::new();
        for tol in [1e-4, 1e-7, 1e-10] {
            let sol = solve_on_grid(rhs, &grid, &[0.0], &OdeOptions::with_tolerances(tol, tol * 1e-2)).unwrap();
            errors.push((sol.states[1][0] - exact).abs());
        }
        assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
        assert!(errors[2] < 1e-9);
    }

    #[test]
    fn oscillator_stays_on_energy_shell() {
        let grid = uniform_grid(20.0, 0.1).unwrap();
        let sol = solve_on_grid(
            |_t, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            &grid,
            &[1.0, 0.0],
            &OdeOptions::with_tolerances(1e-10, 1e-12),
        )
        .unwrap();
        for y in &sol.states {
            let energy = y[0] * y[0] + y[1] * y[1];
            assert!((energy - 1.0).abs() < 1e-7);
        }
    }

    #[test]
    fn finite_time_blowup_truncates_under_cap() {
        // y' = y^2 from y(0)=1 blows up at t=1.
        let grid = uniform_grid(2.0, 0.01).unwrap();
        let opts = OdeOptions { divergence_cap: Some(1e6), ..OdeOptions::default() };
        let sol = solve_on_grid(
            |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
            &grid,
            &[1.0],
            &opts,
        )
        .unwrap();
        let trunc = sol.truncation.expect("must truncate");
        assert!(sol.states.len() < grid.len());
        assert!((trunc.t - 1.0).abs() < 0.01, "truncated at {}", trunc.t);
    }

    #[test]
    fn blowup_without_cap_is_an_error() {
        let grid = uniform_grid(2.0, 0.01).unwrap();
        let res = solve_on_grid(
            |_t, y: &[f64], dy: &mut [f64]| dy[0] = y[0] * y[0],
            &grid,
            &[1.0],
            &OdeOptions::default(),
        );
        assert!(res.is_err());
    }

    #[test]
    fn step_budget_is_enforced() {
        let grid = uniform_grid(1.0, 0.5).unwrap();
        let opts = OdeOptions { max_steps: 3, ..OdeOptions::default() };
        let res = solve_on_grid(
            |t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = (100.0 * t).sin() * 100.0,
            &grid,
            &[0.0],
            &opts,
        );
        match res {
            Err(Error::StepBudgetExhausted { .. }) => {}
            other => panic!("expected step budget error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_degenerate_grids() {
        let opts = OdeOptions::default();
        let rhs = |_t: f64, _y: &[f64], dy: &mut [f64]| dy[0] = 0.0;
        assert!(solve_on_grid(rhs, &[0.0], &[1.0], &opts).is_err());
        assert!(solve_on_grid(rhs, &[0.0, 0.0], &[1.0], &opts).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let grid: Vec<f32> = uniform_grid(1.0f32, 0.25).unwrap();
        let opts = OdeOptions::<f32>::with_tolerances(1e-5, 1e-6);
        let sol = solve_on_grid(
            |_t, y: &[f32], dy: &mut [f32]| dy[0] = -y[0],
            &grid,
            &[1.0f32],
            &opts,
        )
        .unwrap();
        let exact = (-1.0f32).exp();
        assert!((sol.states[4][0] - exact).abs() < 1e-4);
    }
}
