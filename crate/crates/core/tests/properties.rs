//! Randomized structural invariants. These complement the fixed oracle
//! values: every case here must hold for all inputs in the stated domain,
//! so proptest hunts for counterexamples instead of checking a single
//! known answer.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use proptest::collection::vec;
use proptest::prelude::*;
use sirlab::bounds::{gronwall_envelope, mean_square_error, BoundParams};
use sirlab::closure::{g_rhs, ClosedSystemSpec, ClosureFunctions};
use sirlab::inequalities::{all_slacks, evaluate_instance, JointRv};
use sirlab::master::{generator_apply, num_states, state_index, states, StateDistribution};
use sirlab::meanfield::meanfield_rhs;
use sirlab::model::ModelParams;
use sirlab::moments::MomentVector;
use sirlab::trajectory::{uniform_grid, uniform_step, TrajectoryTable};

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

proptest! {
    /// All six variance and covariance slacks are nonnegative in exact
    /// arithmetic, with no tolerance at all.
    #[test]
    fn exact_slacks_are_never_negative(
        points in vec((0i64..=8, 0i64..=8, 1i64..=20), 2..7),
    ) {
        let y: Vec<BigRational> = points.iter().map(|(a, _, _)| ratio(*a, 8)).collect();
        let z: Vec<BigRational> = points.iter().map(|(_, b, _)| ratio(*b, 8)).collect();
        let w: Vec<BigRational> = points.iter().map(|(_, _, c)| ratio(*c, 1)).collect();
        let rv = JointRv::new(y, z, w).unwrap();
        for slack in all_slacks(&rv) {
            prop_assert!(!slack.is_negative());
        }
    }

    /// The float screening pipeline agrees: randomized instances never
    /// report a violation.
    #[test]
    fn screened_instances_pass(seed in any::<u64>(), index in 0u64..50) {
        let report = evaluate_instance(seed, index);
        prop_assert!(report.ok);
    }

    /// With the finite-size correction off and no variance, the reduced
    /// system collapses to the limit system bitwise.
    #[test]
    fn reduced_rhs_collapses_to_the_limit_rhs(
        tau in 0.0f64..10.0,
        gamma in 0.0f64..5.0,
        h1 in -1.0f64..=1.0,
        h2 in -1.0f64..=1.0,
        h3 in -1.0f64..=1.0,
        h4 in 0.0f64..=1.0,
        z1 in 0.0f64..=1.0,
        z2 in 0.0f64..=1.0,
    ) {
        let spec = ClosedSystemSpec::new(
            tau,
            gamma,
            0.0,
            ClosureFunctions::constant([h1, h2, h3, h4]).unwrap(),
        )
        .unwrap();
        let g = g_rhs(&spec, &[h1, h2, h3, h4], &[z1, z2, 0.0]);
        let y = meanfield_rhs(tau, gamma, &[z1, z2]);
        prop_assert_eq!(g[0], y[0]);
        prop_assert_eq!(g[1], y[1]);
        prop_assert_eq!(g[2], 0.0);
    }

    /// The envelope grows in time and in each of its three constants.
    #[test]
    fn envelope_is_monotone(
        lipschitz in 0.0f64..50.0,
        perturbation in 0.0f64..5.0,
        gap in 0.0f64..1.0,
        t in 0.0f64..2.0,
        dt in 0.001f64..1.0,
        bump in 0.001f64..1.0,
    ) {
        let base = BoundParams { lipschitz, perturbation, initial_gap: gap };
        let value = gronwall_envelope(&base, t);
        prop_assert!(gronwall_envelope(&base, t + dt) >= value);
        let more_l = BoundParams { lipschitz: lipschitz + bump, ..base };
        let more_m = BoundParams { perturbation: perturbation + bump, ..base };
        let more_d = BoundParams { initial_gap: gap + bump, ..base };
        // Lipschitz growth only matters once something is nonzero.
        if gap + perturbation > 0.0 {
            prop_assert!(gronwall_envelope(&more_l, t) >= value);
        }
        prop_assert!(gronwall_envelope(&more_m, t) >= value);
        prop_assert!(gronwall_envelope(&more_d, t) >= value);
    }

    /// The mean-square distance never exceeds the l1 distance for
    /// fractions in the unit box.
    #[test]
    fn mean_square_error_below_l1(
        z1 in 0.0f64..=1.0,
        z2 in 0.0f64..=1.0,
        v in 0.0f64..=2.0,
        y1 in 0.0f64..=1.0,
        y2 in 0.0f64..=1.0,
    ) {
        let z = MomentVector::new(z1, z2, v).unwrap();
        let limit = MomentVector::new(y1, y2, 0.0).unwrap();
        prop_assert!(mean_square_error(&z, y1, y2) <= z.l1_distance(&limit));
    }

    /// Triangle enumeration and the state index are inverse bijections.
    #[test]
    fn state_index_is_a_bijection(n in 1u32..40) {
        let mut seen = vec![false; num_states(n)];
        for (s, i) in states(n) {
            let idx = state_index(n, s, i);
            prop_assert!(!seen[idx], "state ({s}, {i}) repeats index {idx}");
            seen[idx] = true;
        }
        prop_assert!(seen.iter().all(|&v| v));
    }

    /// The forward operator conserves total probability mass: its output
    /// sums to zero for any state weighting.
    #[test]
    fn generator_conserves_mass(
        n in 1u32..12,
        tau in 0.0f64..5.0,
        gamma in 0.0f64..5.0,
        raw in vec(0.0f64..1.0, 1..100),
    ) {
        let params = ModelParams::new(tau, gamma, n).unwrap();
        let dim = num_states(n);
        let mass: Vec<f64> = (0..dim).map(|k| raw[k % raw.len()]).collect();
        let total: f64 = mass.iter().sum();
        prop_assume!(total > 0.0);
        let mass: Vec<f64> = mass.iter().map(|m| m / total).collect();
        let mut out = vec![0.0; dim];
        generator_apply(&params, &mass, &mut out);
        let drift: f64 = out.iter().sum();
        prop_assert!(drift.abs() < 1e-12, "mass drift {drift}");
    }

    /// Point-mass moments come back exactly as the state fractions.
    #[test]
    fn point_mass_moments_are_exact(n in 1u32..30, pick in any::<u32>()) {
        let all: Vec<(u32, u32)> = states(n).collect();
        let (s, i) = all[pick as usize % all.len()];
        let dist: StateDistribution = StateDistribution::point_mass(n, s, i).unwrap();
        let m = dist.moments();
        prop_assert_eq!(m.mean_s, f64::from(s) / f64::from(n));
        prop_assert_eq!(m.mean_i, f64::from(i) / f64::from(n));
        prop_assert!(m.total_variance().abs() < 1e-15);
    }

    /// Tables written to CSV parse back bitwise identical, metadata
    /// included.
    #[test]
    fn csv_round_trip_is_identity(
        steps in vec(0.001f64..10.0, 1..40),
        values in vec(-1.0e3f64..1.0e3, 1..40),
        tag in "[a-z]{1,12}",
    ) {
        let mut t = 0.0;
        let mut times = vec![0.0];
        for dt in &steps {
            t += dt;
            times.push(t);
        }
        let column: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(k, x)| x * values[k % values.len()])
            .collect();
        let mut table = TrajectoryTable::new(times).unwrap();
        table.push_column("value", column).unwrap();
        table.set_metadata("tag", &tag);
        let mut bytes = Vec::new();
        table.write_csv(&mut bytes).unwrap();
        let parsed = TrajectoryTable::<f64>::read_csv(bytes.as_slice()).unwrap();
        prop_assert_eq!(parsed.times(), table.times());
        prop_assert_eq!(parsed.column("value").unwrap(), table.column("value").unwrap());
        prop_assert_eq!(parsed.metadata().get("tag").unwrap(), &tag);
        let mut again = Vec::new();
        parsed.write_csv(&mut again).unwrap();
        prop_assert_eq!(bytes, again);
    }

    /// Uniform grids rebuild their step and end exactly on the horizon.
    #[test]
    fn uniform_grid_round_trips(k in 1u32..400, dt in 0.001f64..0.5) {
        let t_end = dt * f64::from(k);
        let grid = uniform_grid(t_end, dt).unwrap();
        prop_assert_eq!(grid.len(), k as usize + 1);
        prop_assert_eq!(*grid.last().unwrap(), t_end);
        let step = uniform_step(&grid).unwrap();
        prop_assert!((step - dt).abs() <= 1e-9 * dt);
    }
}
