//! Monte Carlo simulation of the θ-mixed coalescing/annihilating system.
//!
//! Time is discretized with step `dt`; each particle receives an independent
//! `N(0, 2 dt)` increment. Between adjacent particles the gap performs a
//! Brownian motion of variance `4 dt` per step, so a pair whose gap goes
//! from `d0 > 0` to `d1 > 0` has met during the step with the bridge
//! probability `exp(-d0 d1 / (2 dt))`. A pair with `d1 <= 0` has certainly
//! met. Reacting pairs annihilate with probability `θ` and otherwise merge
//! at their midpoint.
//!
//! Replica `r` of a run seeded with `seed` draws from ChaCha8 stream `r`, so
//! each replica is reproducible on its own and results do not depend on how
//! replicas are scheduled across threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entrance::{neg_theta_pow, StepFunction};
use crate::error::{check_increasing, check_theta, Error, Result};

/// A finite simple configuration: strictly increasing particle positions.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PointConfig(Vec<f64>);

impl PointConfig {
    pub fn new(positions: Vec<f64>) -> Result<Self> {
        check_increasing(&positions)?;
        Ok(Self(positions))
    }

    pub fn empty() -> Self {
        Self(Vec::new())
    }

    /// Particles at `lo, lo + spacing, …` up to `hi`.
    pub fn grid(lo: f64, hi: f64, spacing: f64) -> Result<Self> {
        if !(spacing > 0.0) || !(hi >= lo) {
            return Err(Error::InvalidArgument(
                "grid needs spacing > 0 and hi >= lo".into(),
            ));
        }
        let n = ((hi - lo) / spacing + 1e-9).floor() as usize + 1;
        Self::new((0..n).map(|i| lo + spacing * i as f64).collect())
    }

    pub fn positions(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Number of particles in the open interval `(a, b)`.
    pub fn count_open(&self, a: f64, b: f64) -> u64 {
        let lo = self.0.partition_point(|&p| p <= a);
        let hi = self.0.partition_point(|&p| p < b);
        hi.saturating_sub(lo) as u64
    }

    pub fn is_simple(&self) -> bool {
        self.0.windows(2).all(|w| w[0] < w[1]) && self.0.iter().all(|p| p.is_finite())
    }
}

/// Parameters of a simulation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub theta: f64,
    pub dt: f64,
    pub t_end: f64,
    pub seed: u64,
    pub reps: usize,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        check_theta(self.theta)?;
        if !(self.dt > 0.0) || !(self.t_end > 0.0) || self.dt > self.t_end {
            return Err(Error::InvalidArgument(format!(
                "need 0 < dt <= t_end, got dt = {} and t_end = {}",
                self.dt, self.t_end
            )));
        }
        if self.reps == 0 {
            return Err(Error::InvalidArgument("reps must be at least 1".into()));
        }
        Ok(())
    }

    /// Number of steps and the (possibly shortened) step that lands on `t_end`.
    pub fn schedule(&self) -> (usize, f64) {
        let n = (self.t_end / self.dt - 1e-9).ceil().max(1.0) as usize;
        (n, self.t_end / n as f64)
    }
}

/// Mean and standard error of a Monte Carlo statistic.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MCEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    pub seed: u64,
}

impl MCEstimate {
    /// Sample mean and `sd / √n` with the `n - 1` variance denominator,
    /// accumulated in slice order.
    pub fn from_values(values: &[f64], seed: u64) -> Self {
        let n = values.len();
        if n == 0 {
            return Self {
                mean: f64::NAN,
                stderr: f64::NAN,
                n,
                seed,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        Self {
            mean,
            stderr,
            n,
            seed,
        }
    }
}

/// The random stream of replica `replica` for a run seeded with `seed`.
pub fn replica_rng(seed: u64, replica: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replica);
    rng
}

/// Run `f` on every replica in parallel and return the results in replica order.
pub fn run_replicas<T, F>(seed: u64, reps: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut ChaCha8Rng) -> T + Sync,
{
    (0..reps as u64)
        .into_par_iter()
        .map(|r| f(r, &mut replica_rng(seed, r)))
        .collect()
}

/// Reusable buffers for [`step`].
#[derive(Debug, Default)]
struct Workspace {
    moved: Vec<f64>,
    out: Vec<f64>,
}

/// Advance a configuration by one step of length `dt`.
pub fn step<R: Rng + ?Sized>(cfg: &PointConfig, theta: f64, dt: f64, rng: &mut R) -> PointConfig {
    let mut ws = Workspace::default();
    let mut positions = cfg.0.clone();
    step_in_place(&mut positions, theta, dt, rng, &mut ws);
    PointConfig(positions)
}

fn step_in_place<R: Rng + ?Sized>(
    positions: &mut Vec<f64>,
    theta: f64,
    dt: f64,
    rng: &mut R,
    ws: &mut Workspace,
) {
    if positions.is_empty() {
        return;
    }
    let sd = (2.0 * dt).sqrt();
    ws.moved.clear();
    for &p in positions.iter() {
        let z: f64 = rng.sample(StandardNormal);
        ws.moved.push(p + sd * z);
    }
    ws.out.clear();
    // (pre-move, post-move) of the particle awaiting its right neighbour
    let mut current: Option<(f64, f64)> = None;
    for (&pre, &post) in positions.iter().zip(&ws.moved) {
        let Some((cpre, cpost)) = current else {
            current = Some((pre, post));
            continue;
        };
        let d0 = pre - cpre;
        let d1 = post - cpost;
        let met = d1 <= 0.0 || {
            let arg = d0 * d1 / (2.0 * dt);
            arg < 50.0 && rng.random::<f64>() < (-arg).exp()
        };
        if !met {
            ws.out.push(cpost);
            current = Some((pre, post));
        } else if rng.random::<f64>() < theta {
            current = None;
        } else {
            let place = if d1 <= 0.0 {
                0.5 * (cpre + pre)
            } else {
                0.5 * (cpost + post)
            };
            current = Some((0.5 * (cpre + pre), place));
        }
    }
    if let Some((_, post)) = current {
        ws.out.push(post);
    }
    ws.out.sort_by(f64::total_cmp);
    // exact ties are null events for Brownian motions; react them so the
    // configuration stays simple
    positions.clear();
    for &p in &ws.out {
        if positions.last() == Some(&p) {
            if rng.random::<f64>() < theta {
                positions.pop();
            }
        } else {
            positions.push(p);
        }
    }
}

/// Simulate one replica from `initial` up to `sc.t_end` with the given stream.
pub fn simulate_with<R: Rng + ?Sized>(
    initial: &PointConfig,
    sc: &SimConfig,
    rng: &mut R,
) -> PointConfig {
    let (steps, h) = sc.schedule();
    let mut ws = Workspace::default();
    let mut positions = initial.0.clone();
    for _ in 0..steps {
        if positions.is_empty() {
            break;
        }
        step_in_place(&mut positions, sc.theta, h, rng, &mut ws);
    }
    PointConfig(positions)
}

/// Simulate replica `replica` of the run described by `sc`.
pub fn simulate(initial: &PointConfig, sc: &SimConfig, replica: u64) -> Result<PointConfig> {
    sc.validate()?;
    Ok(simulate_with(
        initial,
        sc,
        &mut replica_rng(sc.seed, replica),
    ))
}

/// Configurations of replica `replica` at `snapshots` equally spaced times
/// (the last one at `t_end`), preceded by the initial configuration at `t = 0`.
pub fn trajectory(
    initial: &PointConfig,
    sc: &SimConfig,
    replica: u64,
    snapshots: usize,
) -> Result<Vec<(f64, PointConfig)>> {
    sc.validate()?;
    let snapshots = snapshots.max(1);
    let (steps, h) = sc.schedule();
    let mut rng = replica_rng(sc.seed, replica);
    let mut ws = Workspace::default();
    let mut positions = initial.0.clone();
    let mut out = vec![(0.0, initial.clone())];
    let mut next = 1;
    for s in 1..=steps {
        step_in_place(&mut positions, sc.theta, h, &mut rng, &mut ws);
        while next <= snapshots && s * snapshots >= next * steps {
            out.push((
                sc.t_end * next as f64 / snapshots as f64,
                PointConfig(positions.clone()),
            ));
            next += 1;
        }
    }
    Ok(out)
}

/// Final configurations of all replicas, in replica order.
pub fn sample_final(initial: &PointConfig, sc: &SimConfig) -> Result<Vec<PointConfig>> {
    sc.validate()?;
    Ok(run_replicas(sc.seed, sc.reps, |_, rng| {
        simulate_with(initial, sc, rng)
    }))
}

/// `(-θ)^{X(a_1,b_1) + … + X(a_n,b_n)}` for one configuration.
pub fn spin_statistic(cfg: &PointConfig, theta: f64, intervals: &[(f64, f64)]) -> f64 {
    let n: u64 = intervals.iter().map(|&(a, b)| cfg.count_open(a, b)).sum();
    neg_theta_pow(theta, n)
}

fn check_intervals(intervals: &[(f64, f64)]) -> Result<()> {
    let flat: Vec<f64> = intervals.iter().flat_map(|&(a, b)| [a, b]).collect();
    check_increasing(&flat)
}

/// Monte Carlo estimate of `E[(-θ)^{X_t(x_1,x_2) + … + X_t(x_{2n-1},x_{2n})}]`
/// at `t = sc.t_end`.
pub fn mc_dual_statistic(
    initial: &PointConfig,
    intervals: &[(f64, f64)],
    sc: &SimConfig,
) -> Result<MCEstimate> {
    check_intervals(intervals)?;
    let samples = sample_final(initial, sc)?;
    Ok(dual_statistic_from_samples(
        &samples, sc.theta, intervals, sc.seed,
    ))
}

/// The duality statistic evaluated on already simulated configurations.
pub fn dual_statistic_from_samples(
    samples: &[PointConfig],
    theta: f64,
    intervals: &[(f64, f64)],
    seed: u64,
) -> MCEstimate {
    let values: Vec<f64> = samples
        .iter()
        .map(|c| spin_statistic(c, theta, intervals))
        .collect();
    MCEstimate::from_values(&values, seed)
}

/// Estimated probabilities of zero and of one survivor at `sc.t_end`, starting
/// from `k` particles at `0, ε, …, (k-1)ε`.
pub fn survivor_distribution(
    k: usize,
    eps: f64,
    sc: &SimConfig,
) -> Result<(MCEstimate, MCEstimate)> {
    if k == 0 || !(eps > 0.0) {
        return Err(Error::InvalidArgument("need k >= 1 and eps > 0".into()));
    }
    let initial = PointConfig::new((0..k).map(|i| i as f64 * eps).collect())?;
    let samples = sample_final(&initial, sc)?;
    let zero: Vec<f64> = samples
        .iter()
        .map(|c| (c.is_empty()) as u8 as f64)
        .collect();
    let one: Vec<f64> = samples
        .iter()
        .map(|c| (c.len() == 1) as u8 as f64)
        .collect();
    Ok((
        MCEstimate::from_values(&zero, sc.seed),
        MCEstimate::from_values(&one, sc.seed),
    ))
}

/// Monte Carlo estimate of the Laplace functional `E[∏_i (1 - φ(x_i))]`.
pub fn mc_laplace(initial: &PointConfig, phi: &StepFunction, sc: &SimConfig) -> Result<MCEstimate> {
    check_phi(phi)?;
    let samples = sample_final(initial, sc)?;
    Ok(laplace_from_samples(&samples, phi, sc.seed))
}

pub(crate) fn check_phi(phi: &StepFunction) -> Result<()> {
    if let Some(v) = phi.values().iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(Error::PhiOutOfRange(*v));
    }
    if phi.support().is_none() {
        return Err(Error::InvalidArgument(
            "test function must have compact support".into(),
        ));
    }
    Ok(())
}

pub fn laplace_from_samples(samples: &[PointConfig], phi: &StepFunction, seed: u64) -> MCEstimate {
    let values: Vec<f64> = samples
        .iter()
        .map(|c| c.positions().iter().map(|&x| 1.0 - phi.eval(x)).product())
        .collect();
    MCEstimate::from_values(&values, seed)
}

/// Uniform binning of `[lo, hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformGrid {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, bins: usize) -> Result<Self> {
        let g = Self { lo, hi, bins };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if self.bins == 0 || !(self.hi > self.lo) {
            return Err(Error::EmptyGrid);
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        (self.hi - self.lo) / self.bins as f64
    }

    pub fn edges(&self, i: usize) -> (f64, f64) {
        let w = self.width();
        (self.lo + w * i as f64, self.lo + w * (i + 1) as f64)
    }

    pub fn center(&self, i: usize) -> f64 {
        let (a, b) = self.edges(i);
        0.5 * (a + b)
    }

    pub fn bin_of(&self, x: f64) -> Option<usize> {
        if x < self.lo || x >= self.hi {
            return None;
        }
        Some((((x - self.lo) / self.width()) as usize).min(self.bins - 1))
    }
}

/// One-point density histogram with per-bin standard errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub grid: UniformGrid,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

/// Histogram estimate of `ρ_t`: counts per bin divided by replicas × bin width.
pub fn empirical_intensity(samples: &[PointConfig], grid: UniformGrid) -> Result<Histogram> {
    grid.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let mut sum = vec![0.0; grid.bins];
    let mut sumsq = vec![0.0; grid.bins];
    let mut counts = vec![0.0; grid.bins];
    for c in samples {
        counts.iter_mut().for_each(|v| *v = 0.0);
        for &x in c.positions() {
            if let Some(b) = grid.bin_of(x) {
                counts[b] += 1.0;
            }
        }
        for b in 0..grid.bins {
            sum[b] += counts[b];
            sumsq[b] += counts[b] * counts[b];
        }
    }
    let (density, stderr) = normalize(&sum, &sumsq, samples.len(), |_| grid.width());
    Ok(Histogram {
        grid,
        density,
        stderr,
        samples: samples.len(),
    })
}

/// Two-point density histogram over ordered pairs `x_1 < x_2`; entry
/// `i * bins + j` (with `i <= j`) covers bins `i` and `j`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairHistogram {
    pub grid: UniformGrid,
    pub density: Vec<f64>,
    pub stderr: Vec<f64>,
    pub samples: usize,
}

impl PairHistogram {
    pub fn get(&self, i: usize, j: usize) -> (f64, f64) {
        let k = i.min(j) * self.grid.bins + i.max(j);
        (self.density[k], self.stderr[k])
    }
}

/// Histogram estimate of `ρ_t(x_1, x_2)` for `x_1 < x_2`. Diagonal bins are
/// normalized by the area `w²/2` of their ordered half.
pub fn empirical_pair_intensity(
    samples: &[PointConfig],
    grid: UniformGrid,
) -> Result<PairHistogram> {
    grid.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let nb = grid.bins;
    let mut sum = vec![0.0; nb * nb];
    let mut sumsq = vec![0.0; nb * nb];
    let mut counts = vec![0.0; nb * nb];
    let mut touched = Vec::new();
    for c in samples {
        let bins: Vec<usize> = c
            .positions()
            .iter()
            .filter_map(|&x| grid.bin_of(x))
            .collect();
        for (a, &i) in bins.iter().enumerate() {
            for &j in &bins[a + 1..] {
                let k = i * nb + j;
                if counts[k] == 0.0 {
                    touched.push(k);
                }
                counts[k] += 1.0;
            }
        }
        for &k in &touched {
            sum[k] += counts[k];
            sumsq[k] += counts[k] * counts[k];
            counts[k] = 0.0;
        }
        touched.clear();
    }
    let w = grid.width();
    let (density, stderr) = normalize(&sum, &sumsq, samples.len(), |k| {
        if k / nb == k % nb {
            0.5 * w * w
        } else {
            w * w
        }
    });
    Ok(PairHistogram {
        grid,
        density,
        stderr,
        samples: samples.len(),
    })
}

fn normalize(
    sum: &[f64],
    sumsq: &[f64],
    n: usize,
    area: impl Fn(usize) -> f64,
) -> (Vec<f64>, Vec<f64>) {
    let nf = n as f64;
    sum.iter()
        .zip(sumsq)
        .enumerate()
        .map(|(k, (&s, &sq))| {
            let mean = s / nf;
            let var = if n > 1 {
                ((sq - nf * mean * mean) / (nf - 1.0)).max(0.0)
            } else {
                0.0
            };
            (mean / area(k), (var / nf).sqrt() / area(k))
        })
        .unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sc(theta: f64, dt: f64, t_end: f64, seed: u64, reps: usize) -> SimConfig {
        SimConfig {
            theta,
            dt,
            t_end,
            seed,
            reps,
        }
    }

    #[test]
    fn empty_and_single_particle_steps() {
        let mut rng = replica_rng(1, 0);
        assert!(step(&PointConfig::empty(), 0.5, 1e-3, &mut rng).is_empty());
        let one = PointConfig::new(vec![0.25]).unwrap();
        let moved: Vec<f64> = (0..20000)
            .map(|_| step(&one, 0.5, 0.01, &mut rng).positions()[0] - 0.25)
            .collect();
        let est = MCEstimate::from_values(&moved, 1);
        let var = moved.iter().map(|d| d * d).sum::<f64>() / moved.len() as f64;
        assert!(est.mean.abs() < 4.0 * est.stderr);
        assert!((var - 0.02).abs() < 0.02 * 0.05, "variance {var}");
    }

    #[test]
    fn close_pair_theta_zero_leaves_one() {
        let init = PointConfig::new(vec![-1e-3, 1e-3]).unwrap();
        let cfg = sc(0.0, 1e-3, 0.1, 3, 500);
        let samples = sample_final(&init, &cfg).unwrap();
        assert!(samples.iter().all(|c| c.len() == 1 || c.len() == 2));
        // gap survives with probability P(|N(0, 0.4)| < 0.002) ≈ 0.0025
        let merged = samples.iter().filter(|c| c.len() == 1).count();
        assert!(merged >= 495, "{merged}");
    }

    #[test]
    fn close_pair_theta_one_mostly_vanishes() {
        let init = PointConfig::new(vec![-1e-3, 1e-3]).unwrap();
        let cfg = sc(1.0, 1e-3, 0.1, 4, 2000);
        let samples = sample_final(&init, &cfg).unwrap();
        assert!(samples.iter().all(|c| c.len() % 2 == 0));
        let gone = samples.iter().filter(|c| c.is_empty()).count();
        assert!(gone as f64 / 2000.0 > 0.98);
    }

    #[test]
    fn determinism() {
        let init = PointConfig::grid(-1.0, 1.0, 0.1).unwrap();
        let cfg = sc(0.4, 1e-3, 0.2, 99, 16);
        let a = sample_final(&init, &cfg).unwrap();
        let b = sample_final(&init, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(simulate(&init, &cfg, 5).unwrap(), a[5]);
        let c = sample_final(&init, &SimConfig { seed: 100, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_start_statistics() {
        let cfg = sc(0.5, 1e-2, 0.5, 1, 50);
        let est = mc_dual_statistic(&PointConfig::empty(), &[(-1.0, 1.0)], &cfg).unwrap();
        assert_eq!((est.mean, est.stderr), (1.0, 0.0));
        let phi = StepFunction::indicator(-1.0, 1.0, 0.5).unwrap();
        let lap = mc_laplace(&PointConfig::empty(), &phi, &cfg).unwrap();
        assert_eq!(lap.mean, 1.0);
        let zero = StepFunction::indicator(-1.0, 1.0, 0.0).unwrap();
        let lap0 = mc_laplace(&PointConfig::new(vec![0.0]).unwrap(), &zero, &cfg).unwrap();
        assert_eq!(lap0.mean, 1.0);
        let bad = StepFunction::indicator(-1.0, 1.0, 1.0).unwrap();
        assert_eq!(
            mc_laplace(&PointConfig::empty(), &bad, &cfg),
            Err(Error::PhiOutOfRange(1.0))
        );
    }

    #[test]
    fn survivor_single_particle() {
        let cfg = sc(0.5, 1e-3, 0.01, 2, 100);
        let (p0, p1) = survivor_distribution(1, 1e-3, &cfg).unwrap();
        assert_eq!((p0.mean, p1.mean), (0.0, 1.0));
    }

    #[test]
    fn histogram_single_sample() {
        let grid = UniformGrid::new(0.0, 1.0, 1).unwrap();
        let h = empirical_intensity(&[PointConfig::new(vec![0.5]).unwrap()], grid).unwrap();
        assert_eq!(h.density, vec![1.0]);
        assert_eq!(UniformGrid::new(0.0, 1.0, 0), Err(Error::EmptyGrid));
        assert_eq!(UniformGrid::new(1.0, 1.0, 3), Err(Error::EmptyGrid));
    }

    #[test]
    fn pair_histogram_normalization() {
        let grid = UniformGrid::new(0.0, 2.0, 2).unwrap();
        let s = vec![PointConfig::new(vec![0.2, 0.4, 1.5]).unwrap()];
        let h = empirical_pair_intensity(&s, grid).unwrap();
        assert_eq!(h.get(0, 0).0, 2.0); // one pair over area 1/2
        assert_eq!(h.get(0, 1).0, 2.0); // two pairs over area 1
        assert_eq!(h.get(1, 1).0, 0.0);
    }

    #[test]
    fn trajectory_snapshots() {
        let init = PointConfig::new(vec![-0.5, 0.5]).unwrap();
        let cfg = sc(0.0, 0.01, 0.1, 8, 1);
        let tr = trajectory(&init, &cfg, 0, 5).unwrap();
        assert_eq!(tr.len(), 6);
        assert!((tr[5].0 - 0.1).abs() < 1e-15);
        assert_eq!(tr[5].1, simulate(&init, &cfg, 0).unwrap());
    }
}
