//! Model parameters and initial conditions.
//!
//! The process being studied is an epidemic on a complete graph with `n`
//! nodes: each of the `S` susceptible nodes is infected at rate `tau/n` per
//! infected neighbor (so the aggregate infection rate is `(tau/n)*S*I`), and
//! each infected node recovers at rate `gamma`. All fractions (`s0`, `i0`)
//! are per-node, in `[0, 1]`.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tolerances::INTEGER_COUNT_TOL;

/// Rate parameters and population size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams<R: Real = f64> {
    /// Transmission rate across each susceptible-infected edge, scaled by n.
    pub tau: R,
    /// Per-node recovery rate.
    pub gamma: R,
    /// Number of nodes.
    pub n: u32,
}

impl<R: Real> ModelParams<R> {
    pub fn new(tau: R, gamma: R, n: u32) -> Result<Self> {
        let p = Self { tau, gamma, n };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau.is_finite() || self.tau < R::zero() {
            return Err(Error::InvalidParams(format!(
                "tau = {} must be finite and nonnegative",
                self.tau
            )));
        }
        if !self.gamma.is_finite() || self.gamma < R::zero() {
            return Err(Error::InvalidParams(format!(
                "gamma = {} must be finite and nonnegative",
                self.gamma
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidParams("population n must be at least 1".into()));
        }
        Ok(())
    }

    /// Population size as a scalar.
    #[inline]
    pub fn n_real(&self) -> R {
        R::of(f64::from(self.n))
    }

    /// The finite-size perturbation scale 1/n.
    #[inline]
    pub fn epsilon(&self) -> R {
        R::one() / self.n_real()
    }
}

/// Initial fractions of susceptible and infected nodes. Any remainder
/// `1 - s0 - i0` starts recovered.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitialCondition<R: Real = f64> {
    pub s0: R,
    pub i0: R,
}

impl<R: Real> InitialCondition<R> {
    pub fn new(s0: R, i0: R) -> Result<Self> {
        let ic = Self { s0, i0 };
        ic.validate()?;
        Ok(ic)
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |x: R| x.is_finite() && x >= R::zero() && x <= R::one();
        if !in_unit(self.s0) || !in_unit(self.i0) {
            return Err(Error::InvalidParams(format!(
                "initial fractions s0 = {}, i0 = {} must lie in [0, 1]",
                self.s0, self.i0
            )));
        }
        if self.s0 + self.i0 > R::one() + R::epsilon() {
            return Err(Error::InvalidParams(format!(
                "initial fractions s0 + i0 = {} exceed 1",
                self.s0 + self.i0
            )));
        }
        Ok(())
    }
}

/// A validated parameter bundle. Constructing one is the single gate every
/// solver entry point goes through.
#[derive(Clone, Copy, Debug)]
pub struct Scenario<R: Real = f64> {
    pub params: ModelParams<R>,
    pub init: InitialCondition<R>,
}

impl<R: Real> Scenario<R> {
    pub fn new(params: ModelParams<R>, init: InitialCondition<R>) -> Result<Self> {
        params.validate()?;
        init.validate()?;
        Ok(Self { params, init })
    }

    /// Initial `(S, I)` counts for the discrete solvers.
    ///
    /// Fails unless `n * s0` and `n * i0` are integral to within
    /// [`INTEGER_COUNT_TOL`]; the count-level solvers cannot represent
    /// fractional nodes.
    pub fn initial_counts(&self) -> Result<(u32, u32)> {
        let n = self.params.n;
        // The base tolerance assumes double precision; widen it when the
        // working scalar is coarser so that exactly representable fractions
        // still pass.
        let tol = INTEGER_COUNT_TOL.max(R::epsilon().as_f64() * f64::from(n) * 4.0);
        let to_count = |name: &'static str, frac: R| -> Result<u32> {
            let value = frac.as_f64() * f64::from(n);
            let rounded = value.round();
            if (value - rounded).abs() > tol {
                return Err(Error::NonIntegerCount { name, value, n });
            }
            Ok(rounded as u32)
        };
        let s = to_count("s0", self.init.s0)?;
        let i = to_count("i0", self.init.i0)?;
        if s + i > n {
            return Err(Error::InvalidParams(format!(
                "initial counts S0 = {s}, I0 = {i} exceed population n = {n}"
            )));
        }
        Ok((s, i))
    }
}

/// Validates a raw parameter set and returns the checked bundle.
pub fn validate_params<R: Real>(
    params: ModelParams<R>,
    init: InitialCondition<R>,
) -> Result<Scenario<R>> {
    Scenario::new(params, init)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accepts_the_reference_parameter_set() {
        let sc = validate_params(
            ModelParams { tau: 3.0, gamma: 0.25, n: 10 },
            InitialCondition { s0: 0.9, i0: 0.1 },
        )
        .unwrap();
        assert_eq!(sc.initial_counts().unwrap(), (9, 1));
        assert_eq!(sc.params.epsilon(), 0.1);
    }

    #[test]
    fn rejects_fractions_summing_past_one() {
        let err = validate_params(
            ModelParams { tau: 3.0, gamma: 0.25, n: 10 },
            InitialCondition { s0: 0.9, i0: 0.2 },
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("exceed 1"), "unexpected message: {msg}");
    }

    #[test]
    fn rejects_negative_rates_and_empty_population() {
        assert!(ModelParams::new(-1.0, 0.25, 10).is_err());
        assert!(ModelParams::new(1.0, -0.25, 10).is_err());
        assert!(ModelParams::new(1.0, 0.25, 0).is_err());
        assert!(ModelParams::new(f64::NAN, 0.25, 10).is_err());
    }

    #[test]
    fn rejects_non_integral_counts() {
        let sc = validate_params(
            ModelParams { tau: 1.0, gamma: 0.25, n: 10 },
            InitialCondition { s0: 0.85, i0: 0.1 },
        )
        .unwrap();
        match sc.initial_counts() {
            Err(Error::NonIntegerCount { name, .. }) => assert_eq!(name, "s0"),
            other => panic!("expected NonIntegerCount, got {other:?}"),
        }
    }

    #[test]
    fn leftover_fraction_starts_recovered() {
        let sc = validate_params(
            ModelParams { tau: 1.0, gamma: 0.25, n: 10 },
            InitialCondition { s0: 0.5, i0: 0.2 },
        )
        .unwrap();
        assert_eq!(sc.initial_counts().unwrap(), (5, 2));
    }

    #[test]
    fn generic_over_f32() {
        let sc = validate_params(
            ModelParams { tau: 3.0f32, gamma: 0.25, n: 30 },
            InitialCondition { s0: 0.9f32, i0: 0.1 },
        )
        .unwrap();
        assert_eq!(sc.initial_counts().unwrap(), (27, 3));
    }
}
