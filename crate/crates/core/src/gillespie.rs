//! Event-driven sampling of the epidemic chain.
//!
//! Classic direct-method simulation: draw the next event time from the total
//! jump rate, pick infection or recovery in proportion to their rates, repeat
//! until absorption or the horizon. Ensembles aggregate in fixed-size chunks
//! that are merged in chunk order, so the statistics are bitwise reproducible
//! for a given seed regardless of how many threads run the chunks.
//!
//! Everything here is `f64`-concrete: the chain state is integer counts, the
//! randomness pipeline is fixed-width, and nothing downstream wants these
//! paths at any other precision.

use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::trajectory::TrajectoryTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

/// One realized path: the state (s, i) holding from `times[k]` until the
/// next entry. The first entry is the initial state at time zero.
#[derive(Clone, Debug)]
pub struct EventPath {
    pub times: Vec<f64>,
    pub s: Vec<u32>,
    pub i: Vec<u32>,
}

impl EventPath {
    /// Time of absorption into i = 0, if it happened before the horizon.
    pub fn absorption_time(&self) -> Option<f64> {
        let last = self.i.len() - 1;
        (self.i[last] == 0).then(|| self.times[last])
    }
}

/// Simulates one path from the integer counts of `scenario` until `t_end`
/// (exclusive) or absorption, whichever is first.
pub fn simulate_one(scenario: &Scenario, t_end: f64, rng: &mut ChaCha8Rng) -> Result<EventPath> {
    let (mut s, mut i) = scenario.initial_counts()?;
    let n = f64::from(scenario.params.n);
    let (tau, gamma) = (scenario.params.tau, scenario.params.gamma);
    let mut t = 0.0;
    let mut path =
        EventPath { times: vec![0.0], s: vec![s], i: vec![i] };
    while i > 0 {
        let rate_inf = tau / n * f64::from(s) * f64::from(i);
        let rate_rec = gamma * f64::from(i);
        let total = rate_inf + rate_rec;
        if total <= 0.0 {
            break;
        }
        let wait = Exp::new(total)
            .map_err(|e| Error::Distribution(format!("exponential rate {total}: {e}")))?
            .sample(rng);
        t += wait;
        if t > t_end {
            break;
        }
        if rng.random::<f64>() * total < rate_inf {
            s -= 1;
            i += 1;
        } else {
            i -= 1;
        }
        path.times.push(t);
        path.s.push(s);
        path.i.push(i);
    }
    Ok(path)
}

/// State fractions at each grid time, carrying the last event state forward.
/// Grid times must be nondecreasing and start at or after zero.
pub fn sample_on_grid(path: &EventPath, grid: &[f64], n: u32) -> (Vec<f64>, Vec<f64>) {
    let n = f64::from(n);
    let mut fs = Vec::with_capacity(grid.len());
    let mut fi = Vec::with_capacity(grid.len());
    let mut k = 0;
    for &t in grid {
        while k + 1 < path.times.len() && path.times[k + 1] <= t {
            k += 1;
        }
        fs.push(f64::from(path.s[k]) / n);
        fi.push(f64::from(path.i[k]) / n);
    }
    (fs, fi)
}

/// Reps per aggregation chunk. Fixed so the merge tree, and therefore the
/// floating-point result, is independent of thread count.
const CHUNK: u64 = 64;

/// Welford accumulators for the s and i fractions at every grid point.
struct ChunkStats {
    count: u64,
    mean_s: Vec<f64>,
    m2_s: Vec<f64>,
    mean_i: Vec<f64>,
    m2_i: Vec<f64>,
}

impl ChunkStats {
    fn new(len: usize) -> Self {
        Self {
            count: 0,
            mean_s: vec![0.0; len],
            m2_s: vec![0.0; len],
            mean_i: vec![0.0; len],
            m2_i: vec![0.0; len],
        }
    }

    fn push(&mut self, fs: &[f64], fi: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for (j, (&a, &b)) in fs.iter().zip(fi).enumerate() {
            let ds = a - self.mean_s[j];
            self.mean_s[j] += ds / k;
            self.m2_s[j] += ds * (a - self.mean_s[j]);
            let di = b - self.mean_i[j];
            self.mean_i[j] += di / k;
            self.m2_i[j] += di * (b - self.mean_i[j]);
        }
    }

    /// Chan's pairwise merge; exact for either side empty.
    fn merge(mut self, other: Self) -> Self {
        if other.count == 0 {
            return self;
        }
        if self.count == 0 {
            return other;
        }
        let (na, nb) = (self.count as f64, other.count as f64);
        let n = na + nb;
        for j in 0..self.mean_s.len() {
            let ds = other.mean_s[j] - self.mean_s[j];
            self.mean_s[j] += ds * nb / n;
            self.m2_s[j] += other.m2_s[j] + ds * ds * na * nb / n;
            let di = other.mean_i[j] - self.mean_i[j];
            self.mean_i[j] += di * nb / n;
            self.m2_i[j] += other.m2_i[j] + di * di * na * nb / n;
        }
        self.count += other.count;
        self
    }
}

/// Fixed column layout of an ensemble table.
pub const ENSEMBLE_COLUMNS: [&str; 7] =
    ["sim_mean_s", "sim_mean_i", "sim_var_s", "sim_var_i", "se_s", "se_i", "reps"];

/// Runs `reps` independent paths and returns per-grid-point ensemble
/// statistics. Path r uses stream r of a ChaCha generator keyed by `seed`,
/// so any prefix of the ensemble is reproducible in isolation.
pub fn run_ensemble(
    scenario: &Scenario,
    grid: &[f64],
    reps: u64,
    seed: u64,
) -> Result<TrajectoryTable<f64>> {
    if reps < 2 {
        return Err(Error::InvalidParams("ensemble needs at least two paths".into()));
    }
    if grid.is_empty() {
        return Err(Error::Grid("sampling grid is empty".into()));
    }
    let t_end = *grid.last().unwrap();
    let chunks = reps.div_ceil(CHUNK);
    let stats = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<ChunkStats> {
            let mut acc = ChunkStats::new(grid.len());
            for r in c * CHUNK..((c + 1) * CHUNK).min(reps) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(r);
                let path = simulate_one(scenario, t_end, &mut rng)?;
                let (fs, fi) = sample_on_grid(&path, grid, scenario.params.n);
                acc.push(&fs, &fi);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    let merged = stats
        .into_iter()
        .fold(ChunkStats::new(grid.len()), ChunkStats::merge);

    let count = merged.count as f64;
    let variance = |m2: &[f64]| -> Vec<f64> { m2.iter().map(|&v| v / (count - 1.0)).collect() };
    let var_s = variance(&merged.m2_s);
    let var_i = variance(&merged.m2_i);
    let stderr = |var: &[f64]| -> Vec<f64> { var.iter().map(|&v| (v / count).sqrt()).collect() };
    let (se_s, se_i) = (stderr(&var_s), stderr(&var_i));

    let mut table = TrajectoryTable::new(grid.to_vec())?;
    table.push_column(ENSEMBLE_COLUMNS[0], merged.mean_s)?;
    table.push_column(ENSEMBLE_COLUMNS[1], merged.mean_i)?;
    table.push_column(ENSEMBLE_COLUMNS[2], var_s)?;
    table.push_column(ENSEMBLE_COLUMNS[3], var_i)?;
    table.push_column(ENSEMBLE_COLUMNS[4], se_s)?;
    table.push_column(ENSEMBLE_COLUMNS[5], se_i)?;
    table.push_column(ENSEMBLE_COLUMNS[6], vec![count; grid.len()])?;
    table.set_metadata("n", format!("{}", scenario.params.n));
    table.set_metadata("tau", format!("{}", scenario.params.tau));
    table.set_metadata("gamma", format!("{}", scenario.params.gamma));
    table.set_metadata("seed", format!("{seed}"));
    table.set_metadata("reps", format!("{reps}"));
    Ok(table)
}
