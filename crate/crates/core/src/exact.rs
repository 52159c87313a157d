//! Exact master-equation engine on the 2^n configuration space.
//!
//! Configurations are bitmasks: bit i set means vertex i occupied, so state
//! 0 is the empty network and state 2^n - 1 the full one. The product
//! measure `pi(x) = rho^|x| (1-rho)^(n-|x|)` is reversible for the
//! generator, so conjugating by `diag(sqrt(pi))` yields a symmetric matrix
//! and one dense eigendecomposition serves every start and every time.
//!
//! The absorbing density-0 dynamics (pure annihilation at the boundary) has
//! no such symmetrization; `ZProcess` evolves it by uniformization instead.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::network::Network;
use crate::{Error, Result};

/// Largest vertex count for the dense 2^n engine.
pub const EXACT_CAP: usize = 12;
/// Largest vertex count when maximizing over all 2^n starting states.
pub const WORST_START_CAP: usize = 8;
/// Largest vertex count for the full-chain gap computation.
pub const FULL_GAP_CAP: usize = 5;

fn check_cap(n: usize, cap: usize, what: &str) -> Result<()> {
    if n > cap {
        return Err(Error::CapExceeded(format!("{what} supports n <= {cap}, got n = {n}")));
    }
    Ok(())
}

/// A probability vector over the 2^n bit-configurations, stamped with the
/// time it describes.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    n: usize,
    t: f64,
    probs: DVector<f64>,
}

impl ExactDistribution {
    fn from_parts(n: usize, t: f64, probs: DVector<f64>) -> Self {
        debug_assert_eq!(probs.len(), 1 << n);
        ExactDistribution { n, t, probs }
    }

    /// The point mass on one configuration at time 0.
    pub fn point_mass(n: usize, state: usize) -> Result<Self> {
        check_cap(n, EXACT_CAP, "the exact engine")?;
        assert!(state < (1 << n), "state {state} out of range for n = {n}");
        let mut probs = DVector::zeros(1 << n);
        probs[state] = 1.0;
        Ok(ExactDistribution::from_parts(n, 0.0, probs))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn probs(&self) -> &DVector<f64> {
        &self.probs
    }

    /// Per-vertex occupation means `E[X_i]`.
    pub fn mean_occupation(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.n);
        for (x, &p) in self.probs.iter().enumerate() {
            let mut bits = x;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                m[i] += p;
                bits &= bits - 1;
            }
        }
        m
    }
}

/// The reversible product measure `pi(x) = rho^|x| (1-rho)^(n-|x|)`.
pub fn stationary(n: usize, rho: f64) -> Result<ExactDistribution> {
    check_cap(n, EXACT_CAP, "the exact engine")?;
    if !(rho > 0.0 && rho < 1.0) || !rho.is_finite() {
        return Err(Error::BadDensity(rho));
    }
    let states = 1usize << n;
    let mut probs = DVector::zeros(states);
    for x in 0..states {
        let k = (x as u32).count_ones() as i32;
        probs[x] = rho.powi(k) * (1.0 - rho).powi(n as i32 - k);
    }
    Ok(ExactDistribution::from_parts(n, f64::INFINITY, probs))
}

/// Applies the shared clamp-and-renormalize policy to a freshly computed
/// probability vector: a genuinely negative entry or a mass defect beyond
/// 1e-9 is an error; drift beyond 1e-12 is renormalized away.
fn sanitize_probabilities(probs: &mut DVector<f64>, context: &str) -> Result<()> {
    let min = probs.min();
    if min < -1e-9 {
        return Err(Error::NumericalBreakdown(format!(
            "{context}: probability {min:.3e} is negative beyond tolerance"
        )));
    }
    probs.apply(|p| *p = p.max(0.0));
    let mass = probs.sum();
    if (mass - 1.0).abs() > 1e-9 {
        return Err(Error::NumericalBreakdown(format!(
            "{context}: probability mass {mass} drifted from 1"
        )));
    }
    if (mass - 1.0).abs() > 1e-12 {
        *probs /= mass;
    }
    Ok(())
}

/// The full exchange-and-resample generator on 2^n states, together with
/// the eigendecomposition of its symmetrized form. Immutable after
/// construction; evolutions for different starts and times share it freely.
pub struct FullGenerator {
    n: usize,
    states: usize,
    rho: f64,
    /// Off-diagonal rates per row: `rows[x]` lists `(y, rate x -> y)`.
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
    pi: DVector<f64>,
    sqrt_pi: DVector<f64>,
    /// Eigenvalues of the symmetrized generator, ascending; all <= 0 with
    /// the last one 0 (the stationary mode).
    evals: DVector<f64>,
    /// Orthonormal eigenvectors, columns matching `evals`.
    q: DMatrix<f64>,
}

/// Off-diagonal transition rows for the exclusion dynamics at resampling
/// density `rho` (which may be 0 for the absorbing dual process).
fn build_rows(net: &Network, rho: f64) -> (Vec<Vec<(usize, f64)>>, Vec<f64>) {
    let n = net.n();
    let states = 1usize << n;
    let edges = net.edges();
    let mut rows = vec![Vec::new(); states];
    let mut diag = vec![0.0; states];
    for x in 0..states {
        let mut total = 0.0;
        for &(i, j, c) in &edges {
            if ((x >> i) ^ (x >> j)) & 1 == 1 {
                rows[x].push((x ^ ((1 << i) | (1 << j)), c));
                total += c;
            }
        }
        for i in 0..n {
            let k = net.kappa()[i];
            if k == 0.0 {
                continue;
            }
            let rate = if (x >> i) & 1 == 1 { k * (1.0 - rho) } else { k * rho };
            if rate > 0.0 {
                rows[x].push((x ^ (1 << i), rate));
                total += rate;
            }
        }
        diag[x] = -total;
    }
    (rows, diag)
}

impl FullGenerator {
    pub fn new(net: &Network) -> Result<Self> {
        let n = net.n();
        check_cap(n, EXACT_CAP, "the exact engine")?;
        let states = 1usize << n;
        let rho = net.rho();
        let (rows, diag) = build_rows(net, rho);
        let pi = stationary(n, rho)?.probs().clone();
        let sqrt_pi = pi.map(f64::sqrt);

        // Symmetrized form S(x,y) = sqrt(pi(x)/pi(y)) L(x,y). Exchanges are
        // already symmetric (they preserve the particle count); creation and
        // annihilation at vertex i both become kappa_i sqrt(rho(1-rho)).
        let mut s = DMatrix::zeros(states, states);
        for x in 0..states {
            s[(x, x)] = diag[x];
            for &(y, r) in &rows[x] {
                s[(x, y)] = r * sqrt_pi[x] / sqrt_pi[y];
            }
        }
        let asym = (&s - s.transpose()).amax();
        if asym > 1e-12 * s.amax().max(1.0) {
            return Err(Error::NumericalBreakdown(format!(
                "symmetrized generator deviates from symmetry by {asym:.3e}"
            )));
        }
        // Exact symmetry, so the eigensolver sees what the theory promises.
        let s = 0.5 * (&s + s.transpose());

        let eig = s.symmetric_eigen();
        let mut order: Vec<usize> = (0..states).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let mut evals = DVector::zeros(states);
        let mut q = DMatrix::zeros(states, states);
        for (dst, &src) in order.iter().enumerate() {
            evals[dst] = eig.eigenvalues[src].min(0.0);
            q.set_column(dst, &eig.eigenvectors.column(src));
        }
        Ok(FullGenerator { n, states, rho, rows, diag, pi, sqrt_pi, evals, q })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn states(&self) -> usize {
        self.states
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    pub fn stationary_distribution(&self) -> ExactDistribution {
        ExactDistribution::from_parts(self.n, f64::INFINITY, self.pi.clone())
    }

    /// Off-diagonal rates out of state `x`.
    pub fn transitions(&self, x: usize) -> &[(usize, f64)] {
        &self.rows[x]
    }

    pub fn diagonal(&self, x: usize) -> f64 {
        self.diag[x]
    }

    /// Spectral gap of the full chain: the smallest nonzero eigenvalue of
    /// the negated symmetrized generator.
    pub fn gap(&self) -> f64 {
        -self.evals[self.states - 2]
    }

    /// The extreme deterministic start farthest from equilibrium: the full
    /// configuration when rho <= 1/2, the empty one otherwise.
    pub fn x_star(&self) -> usize {
        if self.rho <= 0.5 {
            self.states - 1
        } else {
            0
        }
    }

    /// Law of the process at time `mu0.t() + t` started from `mu0`.
    pub fn evolve(&self, mu0: &ExactDistribution, t: f64) -> Result<ExactDistribution> {
        assert!(t >= 0.0, "evolution needs t >= 0");
        assert_eq!(mu0.n(), self.n, "distribution and generator sizes differ");
        let v = mu0.probs().component_div(&self.sqrt_pi);
        let mut w = self.q.tr_mul(&v);
        for k in 0..self.states {
            w[k] *= (t * self.evals[k]).exp();
        }
        let mut probs = (&self.q * w).component_mul(&self.sqrt_pi);
        sanitize_probabilities(&mut probs, "evolve")?;
        Ok(ExactDistribution::from_parts(self.n, mu0.t() + t, probs))
    }

    pub fn evolve_from(&self, state: usize, t: f64) -> Result<ExactDistribution> {
        self.evolve(&ExactDistribution::point_mass(self.n, state)?, t)
    }

    /// L2 distance to stationarity at time `t` from every point start.
    /// Entry `x` is `sqrt(sum_k exp(2 t lambda_k) q_k(x)^2 / pi(x))` over
    /// the nonstationary modes.
    pub fn l2_distances_all_starts(&self, t: f64) -> DVector<f64> {
        assert!(t >= 0.0);
        let mut out = DVector::zeros(self.states);
        for x in 0..self.states {
            let mut acc = 0.0;
            for k in 0..self.states - 1 {
                acc += (2.0 * t * self.evals[k]).exp() * self.q[(x, k)].powi(2);
            }
            out[x] = (acc / self.pi[x]).max(0.0).sqrt();
        }
        out
    }

    /// Exact sup distance over all starts and targets at time `t`. The
    /// matrix of ratios `P_t(x,y)/pi(y) - 1` is a Gram matrix of the
    /// half-time rows, so its largest absolute entry sits on the diagonal:
    /// `max_x P_t(x,x)/pi(x) - 1`, a plain spectral sum.
    pub fn sup_distance(&self, t: f64) -> f64 {
        assert!(t >= 0.0);
        let mut worst = 0.0f64;
        for x in 0..self.states {
            let mut acc = 0.0;
            for k in 0..self.states - 1 {
                acc += (t * self.evals[k]).exp() * self.q[(x, k)].powi(2);
            }
            worst = worst.max(acc / self.pi[x]);
        }
        worst
    }

    /// Dense transition kernel `P_t(x,y)`, rows indexed by the start.
    fn transition_matrix(&self, t: f64) -> DMatrix<f64> {
        let mut e = self.q.clone();
        for k in 0..self.states {
            let f = (t * self.evals[k]).exp();
            e.column_mut(k).scale_mut(f);
        }
        let a = e * self.q.transpose();
        let mut p = a;
        for x in 0..self.states {
            for y in 0..self.states {
                p[(x, y)] *= self.sqrt_pi[y] / self.sqrt_pi[x];
            }
        }
        p
    }

    /// Maximizes the chosen distance over all 2^n point starts at time `t`;
    /// returns the worst start and its distance.
    pub fn worst_distance(&self, metric: Metric, t: f64) -> Result<(usize, f64)> {
        check_cap(self.n, WORST_START_CAP, "the worst-case start scan")?;
        let p = self.transition_matrix(t);
        let mut best = (0usize, f64::NEG_INFINITY);
        for x in 0..self.states {
            let mut mu = p.row(x).transpose();
            sanitize_probabilities(&mut mu, "worst-case row")?;
            let d = distances_vec(&mu, &self.pi).get(metric);
            if d > best.1 {
                best = (x, d);
            }
        }
        Ok(best)
    }
}

/// The five distances from stationarity used throughout.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DistanceReport {
    pub tv: f64,
    pub sep: f64,
    pub kl: f64,
    pub l2: f64,
    pub sup: f64,
}

impl DistanceReport {
    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Tv => self.tv,
            Metric::Sep => self.sep,
            Metric::Kl => self.kl,
            Metric::L2 => self.l2,
            Metric::Sup => self.sup,
        }
    }
}

fn distances_vec(mu: &DVector<f64>, pi: &DVector<f64>) -> DistanceReport {
    let mut tv = 0.0;
    let mut sep = f64::NEG_INFINITY;
    let mut kl = 0.0;
    let mut l2sq = 0.0;
    let mut sup = 0.0f64;
    for (m, p) in mu.iter().zip(pi.iter()) {
        let ratio = m / p;
        tv += (m - p).abs();
        sep = sep.max(1.0 - ratio);
        if *m > 0.0 {
            kl += m * (ratio).ln();
        }
        l2sq += p * (ratio - 1.0).powi(2);
        sup = sup.max((ratio - 1.0).abs());
    }
    DistanceReport {
        tv: (0.5 * tv).clamp(0.0, 1.0),
        sep: sep.clamp(0.0, 1.0),
        kl: kl.max(0.0),
        l2: l2sq.max(0.0).sqrt(),
        sup,
    }
}

/// All five distances between `mu` and the reference measure `pi`
/// (strictly positive, same size).
pub fn distances(mu: &ExactDistribution, pi: &ExactDistribution) -> DistanceReport {
    assert_eq!(mu.n(), pi.n(), "distribution sizes differ");
    debug_assert!(pi.probs().min() > 0.0, "reference measure must be positive");
    distances_vec(mu.probs(), pi.probs())
}

/// Writes distance curves as CSV with columns `t,tv,sep,kl,l2,sup`.
pub fn write_distance_csv<W: std::io::Write>(
    times: &[f64],
    reports: &[DistanceReport],
    w: &mut W,
) -> std::io::Result<()> {
    assert_eq!(times.len(), reports.len());
    writeln!(w, "t,tv,sep,kl,l2,sup")?;
    for (t, r) in times.iter().zip(reports) {
        writeln!(w, "{},{},{},{},{},{}", t, r.tv, r.sep, r.kl, r.l2, r.sup)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Metric {
    Tv,
    Sep,
    Kl,
    L2,
    Sup,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tv" => Ok(Metric::Tv),
            "sep" => Ok(Metric::Sep),
            "kl" => Ok(Metric::Kl),
            "l2" => Ok(Metric::L2),
            "sup" => Ok(Metric::Sup),
            other => Err(Error::Parse(format!("unknown metric '{other}'"))),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Metric::Tv => "tv",
            Metric::Sep => "sep",
            Metric::Kl => "kl",
            Metric::L2 => "l2",
            Metric::Sup => "sup",
        };
        write!(f, "{s}")
    }
}

/// Which deterministic start the mixing time maximizes over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum StartRule {
    /// The extreme configuration (full when rho <= 1/2, empty otherwise).
    XStar,
    /// Exact maximum over all 2^n starts; needs n within the worst-start cap.
    Worst,
}

impl std::str::FromStr for StartRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "xstar" | "x-star" | "x_star" | "x*" => Ok(StartRule::XStar),
            "worst" => Ok(StartRule::Worst),
            other => Err(Error::Parse(format!("unknown start rule '{other}'"))),
        }
    }
}

/// Smallest time at which the chosen distance drops to `eps`.
///
/// Monotone decay of the distance is not assumed: a doubling bracket is
/// followed by a 64-point log scan, and bisection refines the last crossing
/// found. Distances from a fixed start do decay here (the semigroup
/// contracts every metric involved), so the scan is defensive only.
pub fn exact_mixing_time(net: &Network, eps: f64, metric: Metric, start: StartRule) -> Result<f64> {
    assert!(eps > 0.0 && eps.is_finite(), "eps must be positive");
    if start == StartRule::Worst {
        check_cap(net.n(), WORST_START_CAP, "the worst-case start scan")?;
    }
    let gen = FullGenerator::new(net)?;
    let f = |t: f64| -> Result<f64> {
        match start {
            StartRule::XStar => {
                let mu = gen.evolve_from(gen.x_star(), t)?;
                Ok(distances_vec(mu.probs(), &gen.pi).get(metric))
            }
            StartRule::Worst => Ok(gen.worst_distance(metric, t)?.1),
        }
    };

    if f(0.0)? <= eps {
        return Ok(0.0);
    }
    let gap = gen.gap();
    let t_cap = 1e3 * (gen.n as f64 * std::f64::consts::LN_2 + 20.0) / gap;
    let mut hi = 1.0 / gap;
    while f(hi)? > eps {
        hi *= 2.0;
        if hi > t_cap {
            return Err(Error::NoConvergence(format!(
                "distance stays above {eps} out to t = {t_cap:.3e}"
            )));
        }
    }

    let grid = crate::log_grid(hi * 1e-6, hi, 64);
    let mut lo = 0.0;
    let mut hi_cell = hi;
    for pair in grid.windows(2).rev() {
        if f(pair[0])? > eps {
            lo = pair[0];
            hi_cell = pair[1];
            break;
        }
    }
    let mut hi = hi_cell;
    for _ in 0..200 {
        if (hi - lo) <= 1e-9 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid)? > eps {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Spectral gap of the full 2^n chain; by a one-particle reduction it must
/// equal the gap of the single-particle matrix, which callers can check.
pub fn full_gap(gen: &FullGenerator) -> Result<f64> {
    check_cap(gen.n(), FULL_GAP_CAP, "the full-chain gap")?;
    Ok(gen.gap())
}

/// The absorbing dual process: exclusion dynamics with resampling density
/// 0, so particles only ever disappear at the boundary and the empty
/// configuration absorbs. Evolved by uniformization, which stays positive
/// and needs no reversible structure.
pub struct ZProcess {
    n: usize,
    states: usize,
    rows: Vec<Vec<(usize, f64)>>,
    diag: Vec<f64>,
}

impl ZProcess {
    /// Builds the density-0 dynamics for `net`'s rates; the density stored
    /// in `net` plays no role here.
    pub fn new(net: &Network) -> Result<Self> {
        let n = net.n();
        check_cap(n, EXACT_CAP, "the exact engine")?;
        let (rows, diag) = build_rows(net, 0.0);
        Ok(ZProcess { n, states: 1usize << n, rows, diag })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Off-diagonal rates out of state `x`.
    pub fn transitions(&self, x: usize) -> &[(usize, f64)] {
        &self.rows[x]
    }

    pub fn diagonal(&self, x: usize) -> f64 {
        self.diag[x]
    }

    /// One sweep of `mu P` with `P = I + L/r`.
    fn apply_uniformized(&self, mu: &DVector<f64>, r: f64) -> DVector<f64> {
        let mut out = DVector::zeros(self.states);
        for x in 0..self.states {
            let m = mu[x];
            if m == 0.0 {
                continue;
            }
            out[x] += m * (1.0 + self.diag[x] / r);
            for &(y, rate) in &self.rows[x] {
                out[y] += m * rate / r;
            }
        }
        out
    }

    /// Law at time `t` from the point start `state`, by uniformization in
    /// chunks small enough (r dt <= 20) that the Poisson weights stay
    /// well-scaled in linear space.
    pub fn distribution(&self, state: usize, t: f64) -> Result<ExactDistribution> {
        assert!(t >= 0.0, "evolution needs t >= 0");
        assert!(state < self.states, "state {state} out of range");
        let r = self.diag.iter().fold(0.0f64, |a, d| a.max(-d));
        let mut mu = DVector::zeros(self.states);
        mu[state] = 1.0;
        if t > 0.0 && r > 0.0 {
            let chunks = (r * t / 20.0).ceil().max(1.0) as usize;
            let tau = t / chunks as f64;
            let a = r * tau;
            let k_max = (a + 40.0 * a.sqrt() + 60.0) as usize;
            for _ in 0..chunks {
                let mut weight = (-a).exp();
                let mut cum = weight;
                let mut acc = weight * &mu;
                let mut power = mu;
                for k in 1..=k_max {
                    if cum >= 1.0 - 1e-15 {
                        break;
                    }
                    power = self.apply_uniformized(&power, r);
                    weight *= a / k as f64;
                    cum += weight;
                    acc += weight * &power;
                }
                mu = acc;
            }
        }
        sanitize_probabilities(&mut mu, "uniformization")?;
        Ok(ExactDistribution::from_parts(self.n, t, mu))
    }

    pub fn distribution_from_ones(&self, t: f64) -> Result<ExactDistribution> {
        self.distribution(self.states - 1, t)
    }

    /// `P(T > t)` for the absorption time `T` of the dual started full:
    /// one minus the mass on the empty configuration.
    pub fn survival_probability(&self, t: f64) -> Result<f64> {
        let mu = self.distribution_from_ones(t)?;
        Ok((1.0 - mu.probs()[0]).clamp(0.0, 1.0))
    }
}

/// A joint occupation moment of the dual process next to the product of
/// the matching marginals.
#[derive(Debug, Clone, Serialize)]
pub struct NdMomentPair {
    pub subset: Vec<usize>,
    /// `E[prod_{i in S} Z_i(t)]` from the full dual law.
    pub joint: f64,
    /// `prod_{i in S} E[Z_i(t)]`.
    pub product: f64,
}

/// Exact joint-vs-product occupation moments of the absorbing dual started
/// from the full configuration. Negative dependence predicts
/// `joint <= product` for every vertex subset; callers assert it.
pub fn nd_moments_exact(net: &Network, t: f64, subsets: &[Vec<usize>]) -> Result<Vec<NdMomentPair>> {
    let z = ZProcess::new(net)?;
    let mu = z.distribution_from_ones(t)?;
    let means = mu.mean_occupation();
    let mut out = Vec::with_capacity(subsets.len());
    for subset in subsets {
        let mut mask = 0usize;
        for &i in subset {
            assert!(i < net.n(), "vertex {i} out of range");
            mask |= 1 << i;
        }
        let joint: f64 = (0..mu.probs().len())
            .filter(|x| x & mask == mask)
            .map(|x| mu.probs()[x])
            .sum();
        let mut product = 1.0;
        let mut bits = mask;
        while bits != 0 {
            product *= means[bits.trailing_zeros() as usize];
            bits &= bits - 1;
        }
        out.push(NdMomentPair { subset: subset.clone(), joint, product });
    }
    Ok(out)
}
