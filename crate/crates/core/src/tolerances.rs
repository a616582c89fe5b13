//! Central numerical tolerances.
//!
//! Every threshold that decides pass/fail or triggers a fallback lives here,
//! so a reader can audit the crate's numerical policy in one place and tests
//! can assert the relationships between thresholds.

/// Default relative tolerance for the adaptive integrator.
pub const DEFAULT_REL_TOL: f64 = 1e-8;

/// Default absolute tolerance for the adaptive integrator.
pub const DEFAULT_ABS_TOL: f64 = 1e-10;

/// Tightened relative tolerance for finite-difference residual studies,
/// where integration error is amplified by the reciprocal grid step.
pub const TIGHT_REL_TOL: f64 = 1e-10;

/// Tightened absolute tolerance companion to [`TIGHT_REL_TOL`].
pub const TIGHT_ABS_TOL: f64 = 1e-12;

/// Allowed deviation of a probability distribution's total mass from one.
/// Beyond this the distribution is rejected rather than renormalized.
pub const MASS_TOL: f64 = 1e-9;

/// Most negative single probability mass tolerated before clamping is
/// considered an integration-accuracy failure rather than roundoff.
pub const MASS_NEG_FLOOR: f64 = -1e-12;

/// Total variance below this is treated as exactly zero when forming the
/// closure values, whose denominators would otherwise be 0/0 at a point mass.
pub const VARIANCE_FLOOR: f64 = 1e-12;

/// Inequality slack floor: enumerated slacks must stay above this, the
/// negative of the roundoff budget for compensated enumeration.
pub const SLACK_FLOOR: f64 = -1e-12;

/// Absolute slack below which a floating-point inequality check is re-run in
/// exact rational arithmetic before it counts as a pass.
pub const EXACT_CHECK_BAND: f64 = 1e-9;

/// How far `n * s0` may sit from an integer and still be accepted as an
/// integral initial count for the discrete solvers.
pub const INTEGER_COUNT_TOL: f64 = 1e-9;

/// Extracted closure values may exceed their legal ranges by at most this
/// much (integration roundoff) before extraction fails; smaller excursions
/// are clamped.
pub const H_RANGE_SLACK: f64 = 1e-9;

/// Relative non-uniformity allowed in a grid passed to finite-difference
/// checks.
pub const GRID_REL_TOL: f64 = 1e-9;

/// Slack for the empirical bounding-dynamics ordering checks. The constant-h
/// curves are bounds at plotting resolution only, with genuine violations of
/// a few times 1e-4 mid-trajectory, so the ordering is asserted at the
/// resolution the claim is made at.
pub const ORDERING_SLACK: f64 = 1e-3;

/// State magnitude at which a closed-system solve is declared divergent and
/// truncated instead of erroring out.
pub const DIVERGENCE_CAP: f64 = 1e6;

/// How far a closed-system state may poke outside the box [0, 1] x [0, 1] x
/// [0, 2] before the crossing counts as a domain exit; late-time fractions
/// decay through zero with integration noise of about this size.
pub const DOMAIN_SLACK: f64 = 1e-9;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_ordering_is_consistent() {
        assert!(TIGHT_REL_TOL < DEFAULT_REL_TOL);
        assert!(TIGHT_ABS_TOL < DEFAULT_ABS_TOL);
        assert!(DEFAULT_ABS_TOL < DEFAULT_REL_TOL);
        assert!(MASS_NEG_FLOOR < 0.0 && MASS_NEG_FLOOR.abs() < MASS_TOL);
        assert!(SLACK_FLOOR < 0.0);
        assert!(VARIANCE_FLOOR > 0.0 && VARIANCE_FLOOR < MASS_TOL);
        assert!(H_RANGE_SLACK <= MASS_TOL);
        assert!(ORDERING_SLACK > H_RANGE_SLACK);
        assert!(DIVERGENCE_CAP > 1.0);
    }
}
