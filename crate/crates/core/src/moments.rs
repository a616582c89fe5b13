//! Moment summaries of the epidemic state.
//!
//! All moments are of the per-node fractions `s = S/n` and `i = I/n`, not of
//! the raw counts; every solver and check in the crate works at this scale so
//! that tolerances mean the same thing for every population size.

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::tolerances::{H_RANGE_SLACK, VARIANCE_FLOOR};

/// First and second moments, including the mixed third-order products the
/// closed system needs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentSet<R: Real = f64> {
    pub mean_s: R,
    pub mean_i: R,
    pub e_s2: R,
    pub e_i2: R,
    pub e_si: R,
    pub e_s2i: R,
    pub e_si2: R,
}

impl<R: Real> MomentSet<R> {
    /// Variance of the susceptible fraction, with the tiny negative values
    /// produced by catastrophic cancellation at near-point-masses clamped
    /// to zero.
    pub fn var_s(&self) -> R {
        (self.e_s2 - self.mean_s * self.mean_s).max(R::zero())
    }

    pub fn var_i(&self) -> R {
        (self.e_i2 - self.mean_i * self.mean_i).max(R::zero())
    }

    pub fn total_variance(&self) -> R {
        self.var_s() + self.var_i()
    }

    pub fn as_vector(&self) -> MomentVector<R> {
        MomentVector {
            mean_s: self.mean_s,
            mean_i: self.mean_i,
            total_var: self.total_variance(),
        }
    }

    /// The four closure values that make the reduced three-variable system
    /// exact: correlation-like ratios of the mixed moments to the total
    /// variance, zero by convention wherever the total variance vanishes.
    ///
    /// The first three are bounded by 1 in magnitude and the fourth lies in
    /// [0, 1]; integration roundoff may push an extracted value out of range
    /// by a hair, which is clamped, while larger excursions are an accuracy
    /// failure.
    pub fn closure_values(&self) -> Result<[R; 4]> {
        let v = self.total_variance();
        if v < R::of(VARIANCE_FLOOR) {
            return Ok([R::zero(); 4]);
        }
        let two = R::of(2.0);
        let raw = [
            (self.e_si - self.mean_s * self.mean_i) / (v / two),
            (self.e_s2i - self.mean_s * self.mean_s * self.mean_i) / (two * v),
            (self.e_si2 - self.mean_s * self.mean_i * self.mean_i) / (two * v),
            self.var_i() / v,
        ];
        let slack = R::of(H_RANGE_SLACK);
        let mut h = [R::zero(); 4];
        for (k, (&value, &(lo, hi))) in raw.iter().zip(CLOSURE_RANGES.iter()).enumerate() {
            let (lo, hi) = (R::of(lo), R::of(hi));
            if value < lo - slack || value > hi + slack {
                return Err(Error::ClosureRange { index: k + 1, value: value.as_f64() });
            }
            h[k] = value.max(lo).min(hi);
        }
        Ok(h)
    }
}

/// Legal ranges of the four closure values.
pub const CLOSURE_RANGES: [(f64, f64); 4] = [(-1.0, 1.0), (-1.0, 1.0), (-1.0, 1.0), (0.0, 1.0)];

/// The reduced state `z = (E[s], E[i], Var[s] + Var[i])`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentVector<R: Real = f64> {
    pub mean_s: R,
    pub mean_i: R,
    pub total_var: R,
}

impl<R: Real> MomentVector<R> {
    pub fn new(mean_s: R, mean_i: R, total_var: R) -> Result<Self> {
        let z = Self { mean_s, mean_i, total_var };
        z.validate()?;
        Ok(z)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |x: R| x.is_finite() && x >= R::zero() && x <= R::one();
        if !unit(self.mean_s) || !unit(self.mean_i) {
            return Err(Error::InvalidParams(format!(
                "means ({}, {}) must lie in [0, 1]",
                self.mean_s, self.mean_i
            )));
        }
        // Two fraction variances are each at most 1/4, but the reachable
        // bound used throughout is the crude one: each variance is at most 1.
        if !self.total_var.is_finite()
            || self.total_var < R::zero()
            || self.total_var > R::of(2.0)
        {
            return Err(Error::InvalidParams(format!(
                "total variance {} must lie in [0, 2]",
                self.total_var
            )));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [R; 3] {
        [self.mean_s, self.mean_i, self.total_var]
    }

    pub fn l1_distance(&self, other: &Self) -> R {
        (self.mean_s - other.mean_s).abs()
            + (self.mean_i - other.mean_i).abs()
            + (self.total_var - other.total_var).abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn point_mass_moments(s: f64, i: f64) -> MomentSet {
        MomentSet {
            mean_s: s,
            mean_i: i,
            e_s2: s * s,
            e_i2: i * i,
            e_si: s * i,
            e_s2i: s * s * i,
            e_si2: s * i * i,
        }
    }

    #[test]
    fn point_mass_has_zero_variance_and_zero_closure() {
        let m = point_mass_moments(0.9, 0.1);
        assert_eq!(m.var_s(), 0.0);
        assert_eq!(m.var_i(), 0.0);
        assert_eq!(m.e_si, 0.9 * 0.1);
        assert_eq!(m.closure_values().unwrap(), [0.0; 4]);
    }

    #[test]
    fn two_point_mixture_closure_values_are_in_range() {
        // Equal mixture of the states (1, 0) and (0, 1) for n = 1.
        let m = MomentSet {
            mean_s: 0.5,
            mean_i: 0.5,
            e_s2: 0.5,
            e_i2: 0.5,
            e_si: 0.0,
            e_s2i: 0.0,
            e_si2: 0.0,
        };
        assert_eq!(m.var_s(), 0.25);
        assert_eq!(m.var_i(), 0.25);
        let h = m.closure_values().unwrap();
        // Perfect anticorrelation: h1 = (0 - 0.25) / (0.5 / 2) = -1.
        assert_eq!(h[0], -1.0);
        assert_eq!(h[3], 0.5);
        for (k, &(lo, hi)) in CLOSURE_RANGES.iter().enumerate() {
            assert!(h[k] >= lo && h[k] <= hi);
        }
    }

    #[test]
    fn tiny_cancellation_noise_is_clamped_not_fatal() {
        let mut m = point_mass_moments(0.6, 0.2);
        // Perturb so var_s is a hair negative and h1 lands just above 1,
        // inside the clamp band but outside exact range.
        m.e_s2 = m.mean_s * m.mean_s - 1e-18;
        assert_eq!(m.var_s(), 0.0);
        m.e_i2 = m.mean_i * m.mean_i + 1e-6;
        m.e_si = m.mean_s * m.mean_i + 5e-7 * (1.0 + 8e-10);
        let h = m.closure_values().unwrap();
        assert_eq!(h[0], 1.0);
    }

    #[test]
    fn genuine_range_violation_is_an_error() {
        let mut m = point_mass_moments(0.6, 0.2);
        m.e_i2 = m.mean_i * m.mean_i + 1e-6;
        m.e_si = m.mean_s * m.mean_i + 1e-5;
        match m.closure_values() {
            Err(Error::ClosureRange { index: 1, .. }) => {}
            other => panic!("expected closure range error, got {other:?}"),
        }
    }

    #[test]
    fn moment_vector_validation_and_distance() {
        let a: MomentVector = MomentVector::new(0.9, 0.1, 0.0).unwrap();
        let b = MomentVector::new(0.8, 0.15, 0.01).unwrap();
        assert!((a.l1_distance(&b) - 0.16).abs() < 1e-15);
        assert_eq!(a.l1_distance(&a), 0.0);
        assert!(MomentVector::new(-0.1, 0.5, 0.0).is_err());
        assert!(MomentVector::new(0.5, 0.5, 2.5).is_err());
        assert!(MomentVector::new(0.5, 0.5, -0.01).is_err());
    }
}
