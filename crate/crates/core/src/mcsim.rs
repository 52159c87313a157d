//! Event-driven Monte Carlo of the coupled graphical construction.
//!
//! One exponential race at total rate `R = sum_{i<j} c(i,j) + sum_i kappa(i)`
//! drives four bit vectors at once:
//!
//! - `xstar`: the stationary copy, started from a fresh Bernoulli(rho) draw;
//! - `x`: the process of interest, started from `x0`;
//! - `y`: the density-0 process started from `x0`;
//! - `z`: the density-0 process started full.
//!
//! An exchange event swaps the chosen pair of coordinates in all four
//! vectors; a resampling event at vertex i draws one shared Bernoulli(rho)
//! variate `xi` (consumed in event order) and sets `xstar_i = x_i = xi`,
//! `y_i = 0`, `z_i = 0`. The construction keeps the identity
//! `x_i = (1 - z_i) xstar_i + z_i y_i` at every instant, asserted after
//! every event in debug builds. The absorption time of `z` is the strong
//! stationary time sampled by `sample_sst`.
//!
//! Trials own independent RNG streams derived from `(seed, trial index)`,
//! so results are bit-identical for a fixed seed regardless of thread
//! scheduling; all cross-trial aggregation sums integers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::network::Network;
use crate::{Error, Result};

/// Per-trial event budget guarding against pathological rate inputs.
pub const EVENT_CAP: u64 = 1_000_000_000;

#[derive(Debug, Clone, Copy)]
enum Move {
    Exchange(usize, usize),
    Resample(usize),
}

/// The race table: every possible move with its cumulative rate.
struct EventTable {
    moves: Vec<Move>,
    cum: Vec<f64>,
    total: f64,
}

impl EventTable {
    fn new(net: &Network) -> Self {
        let mut moves = Vec::new();
        let mut rates = Vec::new();
        for (i, j, c) in net.edges() {
            moves.push(Move::Exchange(i, j));
            rates.push(c);
        }
        for i in 0..net.n() {
            let k = net.kappa()[i];
            if k > 0.0 {
                moves.push(Move::Resample(i));
                rates.push(k);
            }
        }
        let mut cum = Vec::with_capacity(rates.len());
        let mut acc = 0.0;
        for r in rates {
            acc += r;
            cum.push(acc);
        }
        EventTable { moves, cum, total: acc }
    }

    fn choose(&self, u: f64) -> Move {
        let target = u * self.total;
        let idx = self.cum.partition_point(|&c| c <= target);
        self.moves[idx.min(self.moves.len() - 1)]
    }
}

fn exp_variate<R: Rng>(rng: &mut R, rate: f64) -> f64 {
    -(1.0 - rng.random::<f64>()).ln() / rate
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// The four coupled occupation vectors at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledState {
    pub t: f64,
    pub xstar: Vec<u8>,
    pub x: Vec<u8>,
    pub y: Vec<u8>,
    pub z: Vec<u8>,
}

impl CoupledState {
    /// Checks `x = (1 - z) xstar + z y` coordinatewise.
    pub fn coupling_identity_holds(&self) -> bool {
        self.x
            .iter()
            .zip(&self.xstar)
            .zip(&self.y)
            .zip(&self.z)
            .all(|(((&x, &xs), &y), &z)| x == (1 - z) * xs + z * y)
    }
}

struct Trajectory<'a> {
    table: &'a EventTable,
    rho: f64,
    rng: ChaCha8Rng,
    state: CoupledState,
    z_ones: usize,
    events: u64,
    cap: u64,
}

impl<'a> Trajectory<'a> {
    fn new(table: &'a EventTable, rho: f64, x0: &[u8], mut rng: ChaCha8Rng, cap: u64) -> Self {
        let n = x0.len();
        let xstar: Vec<u8> = (0..n).map(|_| (rng.random::<f64>() < rho) as u8).collect();
        let state = CoupledState {
            t: 0.0,
            xstar,
            x: x0.to_vec(),
            y: x0.to_vec(),
            z: vec![1; n],
        };
        Trajectory { table, rho, rng, state, z_ones: n, events: 0, cap }
    }

    /// Applies one freshly drawn event at absolute time `t_next`.
    fn apply_event_at(&mut self, t_next: f64) -> Result<()> {
        self.events += 1;
        if self.events > self.cap {
            return Err(Error::RuntimeCap(format!(
                "trial exceeded {} events before reaching its goal",
                self.cap
            )));
        }
        let u = self.rng.random::<f64>();
        match self.table.choose(u) {
            Move::Exchange(i, j) => {
                self.state.xstar.swap(i, j);
                self.state.x.swap(i, j);
                self.state.y.swap(i, j);
                self.state.z.swap(i, j);
            }
            Move::Resample(i) => {
                let xi = (self.rng.random::<f64>() < self.rho) as u8;
                self.state.xstar[i] = xi;
                self.state.x[i] = xi;
                self.state.y[i] = 0;
                if self.state.z[i] == 1 {
                    self.z_ones -= 1;
                }
                self.state.z[i] = 0;
            }
        }
        self.state.t = t_next;
        debug_assert!(self.state.coupling_identity_holds(), "coupling identity violated");
        Ok(())
    }

    /// Runs forward, cloning the state at each requested time (ascending).
    fn run_snapshots(mut self, times: &[f64]) -> Result<Vec<CoupledState>> {
        let mut out = Vec::with_capacity(times.len());
        let mut idx = 0;
        while idx < times.len() {
            let t_next = self.state.t + exp_variate(&mut self.rng, self.table.total);
            while idx < times.len() && times[idx] <= t_next {
                let mut snap = self.state.clone();
                snap.t = times[idx];
                out.push(snap);
                idx += 1;
            }
            if idx == times.len() {
                break;
            }
            self.apply_event_at(t_next)?;
        }
        Ok(out)
    }

    /// Runs until `z` is absorbed at the empty configuration; returns that
    /// event time, the strong stationary time of the trial.
    fn run_to_absorption(mut self) -> Result<f64> {
        while self.z_ones > 0 {
            let t_next = self.state.t + exp_variate(&mut self.rng, self.table.total);
            self.apply_event_at(t_next)?;
        }
        Ok(self.state.t)
    }
}

fn validate_x0(net: &Network, x0: &[u8]) {
    assert_eq!(x0.len(), net.n(), "start vector length must match the network");
    assert!(x0.iter().all(|&b| b <= 1), "start vector entries must be 0 or 1");
}

/// One trial of the coupled construction, sampled at the requested times.
/// `trial` selects the RNG stream, so ensembles index trials under one seed.
pub fn run_coupled(
    net: &Network,
    x0: &[u8],
    sample_times: &[f64],
    seed: u64,
    trial: u64,
) -> Result<Vec<CoupledState>> {
    validate_x0(net, x0);
    assert!(
        sample_times.iter().all(|t| t.is_finite() && *t >= 0.0),
        "sample times must be finite and nonnegative"
    );
    let mut times = sample_times.to_vec();
    times.sort_by(f64::total_cmp);
    let table = EventTable::new(net);
    Trajectory::new(&table, net.rho(), x0, trial_rng(seed, trial), EVENT_CAP)
        .run_snapshots(&times)
}

/// Ensemble occupation means of the four coupled vectors.
#[derive(Debug, Clone, Serialize)]
pub struct CoupledEnsemble {
    pub times: Vec<f64>,
    pub trials: usize,
    /// Mean occupation per time per vertex, one row per sampled time.
    pub xstar_mean: Vec<Vec<f64>>,
    pub x_mean: Vec<Vec<f64>>,
    pub y_mean: Vec<Vec<f64>>,
    pub z_mean: Vec<Vec<f64>>,
    /// Mean and standard error of the surviving count `|Z(t)|`.
    pub z_total_mean: Vec<f64>,
    pub z_total_stderr: Vec<f64>,
}

/// Runs `trials` independent coupled trajectories and aggregates occupation
/// counts at the requested times.
pub fn run_coupled_ensemble(
    net: &Network,
    x0: &[u8],
    sample_times: &[f64],
    trials: usize,
    seed: u64,
) -> Result<CoupledEnsemble> {
    validate_x0(net, x0);
    assert!(trials >= 1, "need at least one trial");
    let mut times = sample_times.to_vec();
    times.sort_by(f64::total_cmp);
    let n = net.n();
    let nt = times.len();
    let table = EventTable::new(net);

    // Flattened per-(time, vertex) hit counts plus |Z| moment sums; u64
    // addition makes the parallel reduction order-independent.
    #[derive(Clone)]
    struct Counts {
        xstar: Vec<u64>,
        x: Vec<u64>,
        y: Vec<u64>,
        z: Vec<u64>,
        ztot: Vec<u64>,
        ztot2: Vec<u64>,
    }
    let zero = || Counts {
        xstar: vec![0; nt * n],
        x: vec![0; nt * n],
        y: vec![0; nt * n],
        z: vec![0; nt * n],
        ztot: vec![0; nt],
        ztot2: vec![0; nt],
    };
    let counts = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<Counts> {
            let snaps = Trajectory::new(&table, net.rho(), x0, trial_rng(seed, trial), EVENT_CAP)
                .run_snapshots(&times)?;
            let mut c = zero();
            for (ti, s) in snaps.iter().enumerate() {
                let mut alive = 0u64;
                for i in 0..n {
                    c.xstar[ti * n + i] += s.xstar[i] as u64;
                    c.x[ti * n + i] += s.x[i] as u64;
                    c.y[ti * n + i] += s.y[i] as u64;
                    c.z[ti * n + i] += s.z[i] as u64;
                    alive += s.z[i] as u64;
                }
                c.ztot[ti] += alive;
                c.ztot2[ti] += alive * alive;
            }
            Ok(c)
        })
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.xstar.iter_mut().zip(&b.xstar) {
                *x += y;
            }
            for (x, y) in a.x.iter_mut().zip(&b.x) {
                *x += y;
            }
            for (x, y) in a.y.iter_mut().zip(&b.y) {
                *x += y;
            }
            for (x, y) in a.z.iter_mut().zip(&b.z) {
                *x += y;
            }
            for (x, y) in a.ztot.iter_mut().zip(&b.ztot) {
                *x += y;
            }
            for (x, y) in a.ztot2.iter_mut().zip(&b.ztot2) {
                *x += y;
            }
            Ok(a)
        })?;

    let m = trials as f64;
    let row = |flat: &[u64], ti: usize| -> Vec<f64> {
        (0..n).map(|i| flat[ti * n + i] as f64 / m).collect()
    };
    let mut ensemble = CoupledEnsemble {
        times: times.clone(),
        trials,
        xstar_mean: Vec::with_capacity(nt),
        x_mean: Vec::with_capacity(nt),
        y_mean: Vec::with_capacity(nt),
        z_mean: Vec::with_capacity(nt),
        z_total_mean: Vec::with_capacity(nt),
        z_total_stderr: Vec::with_capacity(nt),
    };
    for ti in 0..nt {
        ensemble.xstar_mean.push(row(&counts.xstar, ti));
        ensemble.x_mean.push(row(&counts.x, ti));
        ensemble.y_mean.push(row(&counts.y, ti));
        ensemble.z_mean.push(row(&counts.z, ti));
        let mean = counts.ztot[ti] as f64 / m;
        let var = (counts.ztot2[ti] as f64 / m - mean * mean).max(0.0);
        ensemble.z_total_mean.push(mean);
        ensemble.z_total_stderr.push((var / m).sqrt());
    }
    Ok(ensemble)
}

/// Sampled strong stationary times `T = inf{t : Z(t) = 0}`, one per trial,
/// in trial order.
#[derive(Debug, Clone, Serialize)]
pub struct SstSample {
    pub trials: usize,
    pub values: Vec<f64>,
}

impl SstSample {
    /// Empirical survival `P(T > t)` with its binomial standard error.
    pub fn survival_at(&self, t: f64) -> (f64, f64) {
        let hits = self.values.iter().filter(|&&v| v > t).count();
        let p = hits as f64 / self.trials as f64;
        (p, (p * (1.0 - p) / self.trials as f64).sqrt())
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.trials as f64
    }
}

/// Simulates the coupled construction to absorption of `Z`, `trials` times.
pub fn sample_sst(net: &Network, trials: usize, seed: u64) -> Result<SstSample> {
    assert!(trials >= 1, "need at least one trial");
    let table = EventTable::new(net);
    let x0 = vec![1u8; net.n()];
    let values: Vec<f64> = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            Trajectory::new(&table, net.rho(), &x0, trial_rng(seed, trial), EVENT_CAP)
                .run_to_absorption()
        })
        .collect::<Result<_>>()?;
    Ok(SstSample { trials, values })
}

/// Writes the empirical survival of an SST sample as CSV with columns
/// `t,p_hat,stderr`.
pub fn write_sst_csv<W: std::io::Write>(
    sample: &SstSample,
    times: &[f64],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "t,p_hat,stderr")?;
    for &t in times {
        let (p, se) = sample.survival_at(t);
        writeln!(w, "{},{},{}", t, p, se)?;
    }
    Ok(())
}

/// A Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Estimates the survival probability of a single random walker started at
/// `start`, jumping at the conductance rates and killed at rate `kappa(i)`
/// in vertex i. Unbiased for the survival vector entry `z_start(t)`.
pub fn killed_walk_survival(
    net: &Network,
    start: usize,
    t: f64,
    trials: usize,
    seed: u64,
) -> Estimate {
    assert!(start < net.n(), "start vertex out of range");
    assert!(t >= 0.0 && t.is_finite(), "time must be finite and nonnegative");
    assert!(trials >= 1, "need at least one trial");
    let n = net.n();
    // Per-vertex cumulative jump tables; killing occupies [0, kappa).
    let mut jumps: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let mut total: Vec<f64> = vec![0.0; n];
    for i in 0..n {
        let mut acc = net.kappa()[i];
        for j in 0..n {
            let c = net.cond()[(i, j)];
            if c > 0.0 {
                acc += c;
                jumps[i].push((j, acc));
            }
        }
        total[i] = acc;
    }

    let alive: u64 = (0..trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(seed, trial);
            let mut pos = start;
            let mut now = 0.0;
            loop {
                if total[pos] == 0.0 {
                    return 1u64;
                }
                now += exp_variate(&mut rng, total[pos]);
                if now > t {
                    return 1u64;
                }
                let target = rng.random::<f64>() * total[pos];
                if target < net.kappa()[pos] {
                    return 0u64;
                }
                let k = jumps[pos].partition_point(|&(_, c)| c <= target);
                pos = jumps[pos][k.min(jumps[pos].len() - 1)].0;
            }
        })
        .sum();
    let p = alive as f64 / trials as f64;
    Estimate { value: p, stderr: (p * (1.0 - p) / trials as f64).sqrt() }
}

/// Empirical covariance of one vertex pair of `Z(t)` with its confidence
/// radius; `flag` marks a lower confidence endpoint above 0, which would
/// contradict negative dependence.
#[derive(Debug, Clone, Serialize)]
pub struct NdCovReport {
    pub i: usize,
    pub j: usize,
    pub cov_hat: f64,
    pub radius: f64,
    pub flag: bool,
}

/// Estimates `Cov(Z_i(t), Z_j(t))` for each requested pair from `trials`
/// coupled runs; the radius is four asymptotic standard errors of the
/// sample covariance.
pub fn nd_check_mc(
    net: &Network,
    t: f64,
    pairs: &[(usize, usize)],
    trials: usize,
    seed: u64,
) -> Result<Vec<NdCovReport>> {
    assert!(t >= 0.0 && t.is_finite(), "time must be finite and nonnegative");
    assert!(trials >= 1, "need at least one trial");
    for &(i, j) in pairs {
        assert!(i < net.n() && j < net.n() && i != j, "pairs must be distinct vertices");
    }
    let n = net.n();
    let table = EventTable::new(net);
    let x0 = vec![1u8; n];
    let times = [t];

    let zero = || (vec![0u64; n], vec![0u64; pairs.len()]);
    let (ones, both) = (0..trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<(Vec<u64>, Vec<u64>)> {
            let snaps = Trajectory::new(&table, net.rho(), &x0, trial_rng(seed, trial), EVENT_CAP)
                .run_snapshots(&times)?;
            let z = &snaps[0].z;
            let mut c = zero();
            for i in 0..n {
                c.0[i] += z[i] as u64;
            }
            for (k, &(i, j)) in pairs.iter().enumerate() {
                c.1[k] += (z[i] & z[j]) as u64;
            }
            Ok(c)
        })
        .try_reduce(zero, |mut a, b| {
            for (x, y) in a.0.iter_mut().zip(&b.0) {
                *x += y;
            }
            for (x, y) in a.1.iter_mut().zip(&b.1) {
                *x += y;
            }
            Ok(a)
        })?;

    let m = trials as f64;
    let mut out = Vec::with_capacity(pairs.len());
    for (k, &(i, j)) in pairs.iter().enumerate() {
        let n11 = both[k] as f64;
        let n10 = ones[i] as f64 - n11;
        let n01 = ones[j] as f64 - n11;
        let n00 = m - n11 - n10 - n01;
        let a = ones[i] as f64 / m;
        let b = ones[j] as f64 / m;
        let cov = n11 / m - a * b;
        // Asymptotic variance of the sample covariance: second moment of
        // the influence terms (Z_i - a)(Z_j - b), computed exactly from the
        // 2x2 occupancy table.
        let s2 = n11 * ((1.0 - a) * (1.0 - b)).powi(2)
            + n10 * ((1.0 - a) * b).powi(2)
            + n01 * (a * (1.0 - b)).powi(2)
            + n00 * (a * b).powi(2);
        let var = (s2 / m - cov * cov).max(0.0) / m;
        let radius = 4.0 * var.sqrt();
        out.push(NdCovReport { i, j, cov_hat: cov, radius, flag: cov - radius > 0.0 });
    }
    Ok(out)
}

/// Writes ND covariance reports as CSV with columns `i,j,cov_hat,radius,flag`.
pub fn write_nd_csv<W: std::io::Write>(
    reports: &[NdCovReport],
    w: &mut W,
) -> std::io::Result<()> {
    writeln!(w, "i,j,cov_hat,radius,flag")?;
    for r in reports {
        writeln!(w, "{},{},{},{},{}", r.i, r.j, r.cov_hat, r.radius, r.flag)?;
    }
    Ok(())
}
