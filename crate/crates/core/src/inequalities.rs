//! Elementary variance and covariance bounds, checkable in exact arithmetic.
//!
//! The Gronwall envelope rests on four inequalities about random variables
//! with values in [0, 1]:
//!
//!   Var[Y + Z]          <= 2 (Var[Y] + Var[Z])
//!   Var[Y^2]            <= 4 Var[Y]
//!   |E[YZ] - E[Y]E[Z]|  <= (Var[Y] + Var[Z]) / 2
//!   |E[Y^2 Z] - E[Y]^2 E[Z]| <= 2 (Var[Y] + Var[Z])
//!
//! together with the Cauchy-Schwarz steps inside their proofs. Each check
//! returns the slack (bound minus attained value), which must be nonnegative.
//! Everything is generic over [`Exact`]: `f64` gives the fast screening pass
//! over random instances, and `BigRational` settles any slack that lands
//! within roundoff of zero, so a pass never hides behind floating-point
//! noise. The second bound is attained in the limit by two-point variables
//! near 1, pinned down by [`square_variance_tightness_ratio`].

use crate::error::{Error, Result};
use crate::tolerances::{EXACT_CHECK_BAND, SLACK_FLOOR};
use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, Signed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

/// Arithmetic the checks run in: field operations, signs, and order. `f64`
/// and `BigRational` both qualify; the latter makes every check a statement
/// about integers.
pub trait Exact: Clone + Num + Signed + PartialOrd {}
impl<T: Clone + Num + Signed + PartialOrd> Exact for T {}

/// A finitely supported random pair (Y, Z) with values in [0, 1]^2.
/// Construction normalizes the weights in the working arithmetic, so a
/// rational instance is a genuine probability distribution, exactly.
#[derive(Clone, Debug)]
pub struct JointRv<T: Exact> {
    y: Vec<T>,
    z: Vec<T>,
    probs: Vec<T>,
}

impl<T: Exact> JointRv<T> {
    pub fn new(y: Vec<T>, z: Vec<T>, weights: Vec<T>) -> Result<Self> {
        if y.is_empty() || y.len() != z.len() || y.len() != weights.len() {
            return Err(Error::Distribution(
                "support points and weights must be nonempty and equal in number".into(),
            ));
        }
        let unit = |x: &T| *x >= T::zero() && *x <= T::one();
        if !y.iter().all(unit) || !z.iter().all(unit) {
            return Err(Error::Distribution("support points must lie in [0, 1]".into()));
        }
        if weights.iter().any(|w| *w < T::zero() || w != w) {
            return Err(Error::Distribution("weights must be nonnegative".into()));
        }
        let total = weights.iter().cloned().fold(T::zero(), |a, b| a + b);
        if !(total > T::zero()) {
            return Err(Error::Distribution("weights must not all vanish".into()));
        }
        let probs = weights.into_iter().map(|w| w / total.clone()).collect();
        Ok(Self { y, z, probs })
    }

    pub fn support(&self) -> usize {
        self.y.len()
    }

    /// E[Y^py Z^pz].
    pub fn moment(&self, py: u32, pz: u32) -> T {
        let pow = |x: &T, e: u32| {
            let mut acc = T::one();
            for _ in 0..e {
                acc = acc * x.clone();
            }
            acc
        };
        self.probs
            .iter()
            .zip(self.y.iter().zip(&self.z))
            .map(|(p, (a, b))| p.clone() * pow(a, py) * pow(b, pz))
            .fold(T::zero(), |acc, v| acc + v)
    }

    pub fn var_y(&self) -> T {
        let m = self.moment(1, 0);
        self.moment(2, 0) - m.clone() * m
    }

    pub fn var_z(&self) -> T {
        let m = self.moment(0, 1);
        self.moment(0, 2) - m.clone() * m
    }

    pub fn covariance(&self) -> T {
        self.moment(1, 1) - self.moment(1, 0) * self.moment(0, 1)
    }
}

/// Slack of Var[Y + Z] <= 2 (Var[Y] + Var[Z]), which equals Var[Y - Z].
pub fn check_sum_variance_bound<T: Exact>(rv: &JointRv<T>) -> T {
    let two = T::one() + T::one();
    two.clone() * (rv.var_y() + rv.var_z())
        - (rv.var_y() + rv.var_z() + two * rv.covariance())
}

/// Slack of Var[Y^2] <= 4 Var[Y] for Y with values in [0, 1].
pub fn check_square_variance_bound<T: Exact>(rv: &JointRv<T>) -> T {
    let two = T::one() + T::one();
    let four = two.clone() * two;
    let m2 = rv.moment(2, 0);
    let var_sq = rv.moment(4, 0) - m2.clone() * m2;
    four * rv.var_y() - var_sq
}

/// Slacks of the two covariance bounds and of the Cauchy-Schwarz steps
/// inside them, the latter in squared form so no roots are needed.
#[derive(Clone, Debug)]
pub struct CovarianceSlacks<T: Exact> {
    /// (Var[Y] + Var[Z]) / 2 - |Cov[Y, Z]|.
    pub centered: T,
    /// 2 (Var[Y] + Var[Z]) - |E[Y^2 Z] - E[Y]^2 E[Z]|.
    pub mixed: T,
    /// Var[Y] Var[Z] - Cov[Y, Z]^2.
    pub cauchy_schwarz_sq: T,
    /// 4 Var[Y] Var[Z] - Cov[Y^2, Z]^2.
    pub mixed_sq: T,
}

pub fn check_covariance_bounds<T: Exact>(rv: &JointRv<T>) -> CovarianceSlacks<T> {
    let two = T::one() + T::one();
    let four = two.clone() * two.clone();
    let (vy, vz) = (rv.var_y(), rv.var_z());
    let cov = rv.covariance();
    let mixed_gap = rv.moment(2, 1) - rv.moment(1, 0) * rv.moment(1, 0) * rv.moment(0, 1);
    let cov_sq_z = rv.moment(2, 1) - rv.moment(2, 0) * rv.moment(0, 1);
    CovarianceSlacks {
        centered: (vy.clone() + vz.clone()) / two.clone() - cov.abs(),
        mixed: two * (vy.clone() + vz.clone()) - mixed_gap.abs(),
        cauchy_schwarz_sq: vy.clone() * vz.clone() - cov.clone() * cov,
        mixed_sq: four * vy * vz - cov_sq_z.clone() * cov_sq_z,
    }
}

/// Var[Y^2] / Var[Y] for the two-point variable taking values 1 and
/// 1 - 2 delta with equal probability, computed from its moments. Closed
/// form: 4 (1 - 2 delta + delta^2), which approaches the constant in the
/// square-variance bound as delta shrinks.
pub fn square_variance_tightness_ratio<T: Exact>(delta: T) -> Result<T> {
    let two = T::one() + T::one();
    if !(delta > T::zero()) || !(delta < T::one() / two.clone()) {
        return Err(Error::Distribution("tightness parameter must lie in (0, 1/2)".into()));
    }
    let low = T::one() - two.clone() * delta;
    let rv = JointRv::new(
        vec![T::one(), low.clone()],
        vec![T::zero(), T::zero()],
        vec![T::one(), T::one()],
    )?;
    let m2 = rv.moment(2, 0);
    let var_sq = rv.moment(4, 0) - m2.clone() * m2;
    Ok(var_sq / rv.var_y())
}

/// The six slacks checked per instance, in the order of
/// [`LEMMA_SLACK_COLUMNS`].
pub fn all_slacks<T: Exact>(rv: &JointRv<T>) -> [T; 6] {
    let cov = check_covariance_bounds(rv);
    [
        check_sum_variance_bound(rv),
        check_square_variance_bound(rv),
        cov.centered,
        cov.mixed,
        cov.cauchy_schwarz_sq,
        cov.mixed_sq,
    ]
}

pub const LEMMA_SLACK_COLUMNS: [&str; 6] = [
    "slack_sum_variance",
    "slack_square_variance",
    "slack_covariance",
    "slack_mixed_covariance",
    "slack_cauchy_schwarz_sq",
    "slack_mixed_sq",
];

/// Exact image of a floating-point instance: dyadic points, weights taken
/// verbatim, probabilities renormalized in rational arithmetic.
pub fn to_rational(rv: &JointRv<f64>) -> JointRv<BigRational> {
    let lift = |v: &[f64]| -> Vec<BigRational> {
        v.iter().map(|&x| Ratio::<BigInt>::from_float(x).expect("finite by construction")).collect()
    };
    JointRv::new(lift(&rv.y), lift(&rv.z), lift(&rv.probs))
        .expect("a valid float instance lifts to a valid rational instance")
}

/// Draws instance `index` of the pseudorandom family keyed by `base_seed`:
/// support size uniform on {2, ..., 10}, points uniform on the unit square,
/// weights standard exponential. Each index gets its own generator stream,
/// so instances can be regenerated individually.
pub fn random_instance(base_seed: u64, index: u64) -> JointRv<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(index);
    let support = rng.random_range(2..=10usize);
    let mut y = Vec::with_capacity(support);
    let mut z = Vec::with_capacity(support);
    let mut w = Vec::with_capacity(support);
    for _ in 0..support {
        y.push(rng.random::<f64>());
        z.push(rng.random::<f64>());
        w.push(rng.sample::<f64, _>(Exp1));
    }
    JointRv::new(y, z, w).expect("generated instance is always valid")
}

/// One screened instance: its six slacks, and whether any of them needed and
/// survived exact adjudication.
#[derive(Clone, Debug)]
pub struct InstanceReport {
    pub index: u64,
    pub support: usize,
    pub slacks: [f64; 6],
    /// True when some slack fell inside [`EXACT_CHECK_BAND`] and the
    /// rational re-check ran.
    pub adjudicated: bool,
    /// False only if a slack is negative beyond [`SLACK_FLOOR`], or a
    /// near-zero slack turned out genuinely negative in exact arithmetic.
    pub ok: bool,
}

/// Draws and checks one instance, escalating near-zero slacks to exact
/// arithmetic.
pub fn evaluate_instance(base_seed: u64, index: u64) -> InstanceReport {
    let rv = random_instance(base_seed, index);
    let slacks = all_slacks(&rv);
    let mut ok = slacks.iter().all(|&s| s >= SLACK_FLOOR);
    let adjudicated = slacks.iter().any(|s| s.abs() < EXACT_CHECK_BAND);
    if ok && adjudicated {
        let exact = all_slacks(&to_rational(&rv));
        ok = exact.iter().all(|s| !s.is_negative());
    }
    InstanceReport { index, support: rv.support(), slacks, adjudicated, ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::{One, ToPrimitive, Zero};

    fn rational(x: f64) -> BigRational {
        Ratio::<BigInt>::from_float(x).unwrap()
    }

    #[test]
    fn perfectly_correlated_pair_attains_the_cauchy_schwarz_bound() {
        // Y = Z on {0, 1}: Var[Y - Z] = 0 and Cov^2 = Var[Y] Var[Z].
        let rv = JointRv::new(vec![0.0, 1.0], vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(check_sum_variance_bound(&rv), 0.0);
        assert_eq!(check_covariance_bounds(&rv).cauchy_schwarz_sq, 0.0);
        // The exact lift agrees: both slacks are literally zero.
        let exact = to_rational(&rv);
        assert!(check_sum_variance_bound(&exact).is_zero());
        assert!(check_covariance_bounds(&exact).cauchy_schwarz_sq.is_zero());
    }

    #[test]
    fn anticorrelated_pair_has_unit_slack() {
        // Y = 1 - Z on {0, 1}: Var[Y + Z] = 0, so the slack is the full
        // bound 2 (1/4 + 1/4).
        let rv = JointRv::new(vec![0.0, 1.0], vec![1.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(check_sum_variance_bound(&rv), 1.0);
        assert_eq!(check_covariance_bounds(&rv).centered, 0.0);
    }

    #[test]
    fn tightness_ratio_matches_the_closed_form() {
        for &(delta, expected) in
            &[(0.1, 3.24), (0.01, 3.9204), (0.001, 3.992004)]
        {
            let exact = square_variance_tightness_ratio(rational(delta)).unwrap();
            let formula = 4.0 * (1.0 - 2.0 * delta + delta * delta);
            assert!(
                (exact.to_f64().unwrap() - formula).abs() < 1e-15,
                "delta = {delta}"
            );
            assert!((exact.to_f64().unwrap() - expected).abs() < 1e-13, "delta = {delta}");
        }
        let near = square_variance_tightness_ratio(rational(0.001)).unwrap();
        assert!(near.to_f64().unwrap() > 3.99);
        // The ratio never reaches 4: the bound is tight but unattained.
        assert!(near < rational(4.0));
    }

    #[test]
    fn tightness_parameter_is_range_checked() {
        assert!(square_variance_tightness_ratio(0.0).is_err());
        assert!(square_variance_tightness_ratio(0.5).is_err());
        assert!(square_variance_tightness_ratio(-0.2).is_err());
        assert!(square_variance_tightness_ratio(0.25).is_ok());
    }

    #[test]
    fn rational_lift_is_exactly_normalized() {
        let rv = random_instance(5, 0);
        let exact = to_rational(&rv);
        let total = exact.probs.iter().cloned().fold(BigRational::zero(), |a, b| a + b);
        assert!(total.is_one());
    }

    #[test]
    fn random_instances_satisfy_every_bound() {
        for index in 0..200 {
            let report = evaluate_instance(17, index);
            assert!(report.ok, "instance {index}: slacks {:?}", report.slacks);
            assert!((2..=10).contains(&report.support));
        }
    }

    #[test]
    fn boundary_instances_survive_adjudication() {
        // Degenerate: Y constant, Z constant. Every variance and covariance
        // is zero, so all six slacks sit exactly on the boundary.
        let rv = JointRv::new(vec![0.5, 0.5], vec![0.25, 0.25], vec![1.0, 3.0]).unwrap();
        let slacks = all_slacks(&rv);
        for s in slacks {
            assert!(s.abs() < EXACT_CHECK_BAND);
        }
        let exact = all_slacks(&to_rational(&rv));
        for s in exact {
            assert!(!s.is_negative());
        }
    }

    #[test]
    fn invalid_instances_are_rejected() {
        assert!(JointRv::<f64>::new(vec![], vec![], vec![]).is_err());
        assert!(JointRv::new(vec![0.5], vec![0.5, 0.5], vec![1.0]).is_err());
        assert!(JointRv::new(vec![1.5], vec![0.5], vec![1.0]).is_err());
        assert!(JointRv::new(vec![0.5], vec![-0.1], vec![1.0]).is_err());
        assert!(JointRv::new(vec![0.5], vec![0.5], vec![-1.0]).is_err());
        assert!(JointRv::new(vec![0.5], vec![0.5], vec![0.0]).is_err());
        assert!(JointRv::new(vec![0.5], vec![0.5], vec![f64::NAN]).is_err());
    }
}
