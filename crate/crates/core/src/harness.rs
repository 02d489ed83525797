//! Analytic-versus-simulation checks and the Fredholm Pfaffian series.
//!
//! Every check produces a [`CheckReport`]: a list of entries comparing an
//! analytic value with either a Monte Carlo estimate or a second analytic
//! value. A statistical entry passes when
//! `|analytic - mean| <= z * stderr + bias`, where `z` and `bias` are
//! recorded alongside the resolved inputs and a hash of them.

use std::io::{self, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::entrance::{p_k, InitialData, StepFunction};
use crate::error::{check_increasing, check_theta, check_time, Error, Result};
use crate::io::format_sig;
use crate::kernel::ScalarKernel;
use crate::pfaffian::{assemble_intensity_matrix, pfaffian, SkewMatrix};
use crate::quadrature::{for_each_simplex_node, GaussLegendre};
use crate::sim::{
    dual_statistic_from_samples, sample_final, MCEstimate, PointConfig, SimConfig, UniformGrid,
};
use crate::sim::{empirical_intensity, empirical_pair_intensity};

/// Schema tag written into every JSON report.
pub const REPORT_SCHEMA: &str = "cabm.check/1";

/// Header of the flat CSV summary.
pub const SUMMARY_CSV_HEADER: &str = "check,param_hash,analytic,mc_mean,mc_stderr,tolerance,pass";

/// Simulation side of a check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimParams {
    pub dt: f64,
    pub reps: usize,
    pub seed: u64,
    /// Multiplier of the standard error in the pass criterion.
    pub z: f64,
    /// Floor of the discretization-bias allowance.
    pub bias_allowance: f64,
    /// Also simulate at `2 dt` and widen the bias allowance to the measured gap.
    pub dt_gap: bool,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            reps: 100_000,
            seed: 42,
            z: 3.0,
            bias_allowance: 0.01,
            dt_gap: false,
        }
    }
}

impl SimParams {
    fn sim_config(&self, theta: f64, t_end: f64, seed_offset: u64) -> SimConfig {
        SimConfig {
            theta,
            dt: self.dt.min(t_end),
            t_end,
            seed: self.seed.wrapping_add(seed_offset),
            reps: self.reps,
        }
    }
}

/// One comparison inside a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub label: String,
    pub analytic: f64,
    /// Monte Carlo mean, or the second analytic value for exact entries.
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub n: usize,
    pub discrepancy: f64,
    pub bias: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Outcome of one check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub schema: String,
    pub check: String,
    pub param_hash: String,
    pub inputs: Value,
    pub z: f64,
    pub bias_allowance: f64,
    pub entries: Vec<CheckEntry>,
    pub notes: Vec<String>,
    pub pass: bool,
}

impl CheckReport {
    pub fn new(check: &str, inputs: Value, z: f64, bias_allowance: f64) -> Self {
        let param_hash = format!("{:016x}", fnv1a(inputs.to_string().as_bytes()));
        Self {
            schema: REPORT_SCHEMA.into(),
            check: check.into(),
            param_hash,
            inputs,
            z,
            bias_allowance,
            entries: Vec::new(),
            notes: Vec::new(),
            pass: true,
        }
    }

    /// Statistical entry with the report's bias allowance.
    pub fn push_mc(&mut self, label: impl Into<String>, analytic: f64, est: &MCEstimate) {
        self.push_mc_with_bias(label, analytic, est, self.bias_allowance);
    }

    pub fn push_mc_with_bias(
        &mut self,
        label: impl Into<String>,
        analytic: f64,
        est: &MCEstimate,
        bias: f64,
    ) {
        let tolerance = self.z * est.stderr + bias;
        self.push(CheckEntry {
            label: label.into(),
            analytic,
            mc_mean: est.mean,
            mc_stderr: est.stderr,
            n: est.n,
            discrepancy: (analytic - est.mean).abs(),
            bias,
            tolerance,
            pass: false,
        });
    }

    /// Deterministic entry: `value` must match `analytic` within `tolerance`.
    pub fn push_exact(
        &mut self,
        label: impl Into<String>,
        analytic: f64,
        value: f64,
        tolerance: f64,
    ) {
        self.push(CheckEntry {
            label: label.into(),
            analytic,
            mc_mean: value,
            mc_stderr: 0.0,
            n: 0,
            discrepancy: (analytic - value).abs(),
            bias: tolerance,
            tolerance,
            pass: false,
        });
    }

    fn push(&mut self, mut e: CheckEntry) {
        e.pass = e.discrepancy <= e.tolerance;
        self.pass &= e.pass;
        self.entries.push(e);
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    /// Mark the report failed with an explanation (e.g. non-converged quadrature).
    pub fn fail(&mut self, reason: impl Into<String>) {
        self.pass = false;
        self.notes.push(reason.into());
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }

    /// Summary rows without the header.
    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.entries {
            writeln!(
                w,
                "{}:{},{},{},{},{},{},{}",
                self.check,
                e.label.replace(',', ";"),
                self.param_hash,
                format_sig(e.analytic),
                format_sig(e.mc_mean),
                format_sig(e.mc_stderr),
                format_sig(e.tolerance),
                e.pass
            )?;
        }
        Ok(())
    }
}

/// CSV summary of several reports.
pub fn write_csv_summary<W: Write>(mut w: W, reports: &[CheckReport]) -> io::Result<()> {
    writeln!(w, "{SUMMARY_CSV_HEADER}")?;
    for r in reports {
        r.write_csv_rows(&mut w)?;
    }
    Ok(())
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(0xcbf2_9ce4_8422_2325, |h, &b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

/// The particle configuration realizing finite simple spin data.
pub fn realize(data: &InitialData) -> Result<PointConfig> {
    match data {
        InitialData::FiniteSpin { atoms } if atoms.is_simple() => {
            PointConfig::new(atoms.positions())
        }
        _ => Err(Error::InvalidData(format!(
            "{} data has no finite simple particle realization",
            data.variant_name()
        ))),
    }
}

fn check_battery(points: &[f64]) -> Result<()> {
    check_increasing(points)?;
    if points.is_empty() || !points.len().is_multiple_of(2) {
        return Err(Error::InvalidArgument(
            "duality points must be a positive even number".into(),
        ));
    }
    Ok(())
}

fn battery_label(points: &[f64]) -> String {
    let inner: Vec<String> = points.iter().map(|x| format_sig(*x)).collect();
    format!("pf[{}]", inner.join(" "))
}

/// Fast path against generic quadrature for every pair of a battery. Adds one
/// entry (largest disagreement) and fails the report on non-convergence.
fn kernel_crosscheck(
    report: &mut CheckReport,
    kernel: &ScalarKernel,
    t: f64,
    points: &[Vec<f64>],
) -> Result<()> {
    let mut pairs = Vec::new();
    for b in points {
        for i in 0..b.len() {
            for j in i + 1..b.len() {
                pairs.push((b[i], b[j]));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pairs.dedup();
    let evals: Vec<_> = pairs
        .par_iter()
        .map(|&(x, y)| Ok((kernel.eval(t, x, y)?, kernel.eval_quadrature(t, x, y)?)))
        .collect::<Result<_>>()?;
    let mut worst = (1.0, 1.0, 0.0);
    for ((fast, quad), (x, y)) in evals.iter().zip(&pairs) {
        if !quad.converged() {
            report.fail(format!(
                "quadrature not converged at ({x}, {y}): estimate {}",
                quad.error_estimate
            ));
        }
        let d = (fast.k - quad.k).abs();
        if d >= worst.2 {
            worst = (fast.k, quad.k, d);
        }
    }
    if !pairs.is_empty() {
        report.push_exact("kernel fast path vs quadrature", worst.0, worst.1, 1e-8);
    }
    Ok(())
}

/// Monte Carlo estimates for each battery, with the bias allowance widened to
/// the noise-corrected `dt` versus `2 dt` gap when requested.
fn dual_estimates(
    initial: &PointConfig,
    theta: f64,
    t: f64,
    batteries: &[Vec<f64>],
    p: &SimParams,
    report: &mut CheckReport,
) -> Result<Vec<MCEstimate>> {
    let sc = p.sim_config(theta, t, 0);
    let samples = sample_final(initial, &sc)?;
    let pairs = |b: &Vec<f64>| -> Vec<(f64, f64)> { b.chunks(2).map(|c| (c[0], c[1])).collect() };
    let est: Vec<MCEstimate> = batteries
        .iter()
        .map(|b| dual_statistic_from_samples(&samples, theta, &pairs(b), sc.seed))
        .collect();
    if p.dt_gap && 2.0 * sc.dt <= t {
        let coarse_sc = SimConfig {
            dt: 2.0 * sc.dt,
            seed: sc.seed.wrapping_add(1),
            ..sc
        };
        let coarse = sample_final(initial, &coarse_sc)?;
        let mut gap: f64 = 0.0;
        for (b, fine) in batteries.iter().zip(&est) {
            let c = dual_statistic_from_samples(&coarse, theta, &pairs(b), coarse_sc.seed);
            let noise = p.z * (fine.stderr.powi(2) + c.stderr.powi(2)).sqrt();
            gap = gap.max((fine.mean - c.mean).abs() - noise);
            report.note(format!(
                "{}: dt = {} gives {}, 2dt gives {}",
                battery_label(b),
                sc.dt,
                fine.mean,
                c.mean
            ));
        }
        report.bias_allowance = report.bias_allowance.max(gap);
        report.note(format!("noise-corrected dt gap {}", gap.max(0.0)));
    }
    Ok(est)
}

/// Compare `pf(K_t(x_i, x_j))` with the Monte Carlo duality statistic for each
/// battery of points `x_1 < … < x_{2n}`.
pub fn duality_check(
    data: &InitialData,
    theta: f64,
    t: f64,
    batteries: &[Vec<f64>],
    p: &SimParams,
) -> Result<CheckReport> {
    check_time(t)?;
    batteries.iter().try_for_each(|b| check_battery(b))?;
    let kernel = ScalarKernel::new(data.clone(), theta)?;
    let initial = realize(data)?;
    let inputs = json!({
        "theta": theta, "t": t, "data": data, "points": batteries, "sim": p,
    });
    let mut report = CheckReport::new("duality", inputs, p.z, p.bias_allowance);
    kernel_crosscheck(&mut report, &kernel, t, batteries)?;
    let analytic: Vec<f64> = batteries
        .iter()
        .map(|b| kernel.duality_pfaffian(t, b))
        .collect::<Result<_>>()?;
    if theta == 0.0 {
        for (b, &a) in batteries.iter().zip(&analytic) {
            report.push_exact(
                format!("{} in [0,1]", battery_label(b)),
                a,
                a.clamp(0.0, 1.0),
                1e-9,
            );
        }
    }
    let est = dual_estimates(&initial, theta, t, batteries, p, &mut report)?;
    for ((b, a), e) in batteries.iter().zip(&analytic).zip(&est) {
        report.push_mc(battery_label(b), *a, e);
    }
    Ok(report)
}

/// Grid and tolerances of an intensity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensitySpec {
    pub grid: UniformGrid,
    /// Bin pairs `(i, j)`, `i <= j`, compared for the two-point intensity.
    pub pairs: Vec<(usize, usize)>,
    /// Bias allowance as a fraction of the analytic value.
    pub relative_bias: f64,
    /// Absolute floor of the bias allowance.
    pub absolute_bias: f64,
}

/// Bin averages of `ρ_t` from the Pfaffian side.
pub fn analytic_bin_intensity(
    kernel: &ScalarKernel,
    t: f64,
    grid: &UniformGrid,
) -> Result<Vec<f64>> {
    let rule = GaussLegendre::new(6);
    (0..grid.bins)
        .map(|i| {
            let (a, b) = grid.edges(i);
            let mut acc = 0.0;
            for (x, w) in rule.mapped(a, b) {
                acc += w * kernel.intensity(t, &[x])?;
            }
            Ok(acc / (b - a))
        })
        .collect()
}

/// Average of `ρ_t(x, y)` over the ordered part of bins `i × j`.
pub fn analytic_pair_intensity(
    kernel: &ScalarKernel,
    t: f64,
    grid: &UniformGrid,
    i: usize,
    j: usize,
) -> Result<f64> {
    let (i, j) = (i.min(j), i.max(j));
    let rule = GaussLegendre::new(6);
    let (a, b) = grid.edges(i);
    let mut acc = 0.0;
    let mut area = 0.0;
    if i == j {
        let mut err = None;
        for_each_simplex_node(&rule, 2, a, b, |x, w| match kernel.intensity(t, x) {
            Ok(v) => {
                acc += w * v;
                area += w;
            }
            Err(e) => err = Some(e),
        });
        if let Some(e) = err {
            return Err(e);
        }
    } else {
        let (c, d) = grid.edges(j);
        for (x, wx) in rule.mapped(a, b) {
            for (y, wy) in rule.mapped(c, d) {
                acc += wx * wy * kernel.intensity(t, &[x, y])?;
                area += wx * wy;
            }
        }
    }
    Ok(acc / area)
}

/// Compare one- and two-point intensities with histograms of simulated
/// configurations started from `initial`, which should realize (or
/// approximate) `data`.
pub fn intensity_check(
    data: &InitialData,
    theta: f64,
    t: f64,
    initial: &PointConfig,
    spec: &IntensitySpec,
    p: &SimParams,
) -> Result<CheckReport> {
    check_time(t)?;
    let kernel = ScalarKernel::new(data.clone(), theta)?;
    let grid = UniformGrid::new(spec.grid.lo, spec.grid.hi, spec.grid.bins)?;
    if let Some(&(i, j)) = spec.pairs.iter().find(|&&(i, j)| i.max(j) >= grid.bins) {
        return Err(Error::InvalidArgument(format!(
            "bin pair ({i}, {j}) is off the grid"
        )));
    }
    let inputs = json!({
        "theta": theta, "t": t, "data": data, "initial_particles": initial.len(),
        "initial_range": [initial.positions().first(), initial.positions().last()],
        "spec": spec, "sim": p,
    });
    let mut report = CheckReport::new("intensity", inputs, p.z, spec.absolute_bias);
    let rho = analytic_bin_intensity(&kernel, t, &grid)?;
    let sc = p.sim_config(theta, t, 0);
    let samples = sample_final(initial, &sc)?;
    let hist = empirical_intensity(&samples, grid)?;
    for (b, &a) in rho.iter().enumerate() {
        let est = MCEstimate {
            mean: hist.density[b],
            stderr: hist.stderr[b],
            n: hist.samples,
            seed: sc.seed,
        };
        let bias = spec.absolute_bias.max(spec.relative_bias * a.abs());
        report.push_mc_with_bias(
            format!("rho1 bin {}", format_sig(grid.center(b))),
            a,
            &est,
            bias,
        );
    }
    if !spec.pairs.is_empty() {
        let pair_hist = empirical_pair_intensity(&samples, grid)?;
        for &(i, j) in &spec.pairs {
            let a = analytic_pair_intensity(&kernel, t, &grid, i, j)?;
            let (mean, stderr) = pair_hist.get(i, j);
            let est = MCEstimate {
                mean,
                stderr,
                n: pair_hist.samples,
                seed: sc.seed,
            };
            let bias = spec.absolute_bias.max(spec.relative_bias * a.abs());
            let label = format!(
                "rho2 bins {} {}",
                format_sig(grid.center(i.min(j))),
                format_sig(grid.center(i.max(j)))
            );
            report.push_mc_with_bias(label, a, &est, bias);
        }
    }
    // Decorrelation at distance only holds for the infinite, translation
    // invariant law; finitely many particles stay correlated.
    if matches!(data, InitialData::Maximal) {
        let x1 = grid.center(grid.bins / 2);
        let x2 = x1 + 20.0 * t.sqrt();
        let r1 = kernel.intensity(t, &[x1])?;
        let r2 = kernel.intensity(t, &[x2])?;
        let ratio = kernel.intensity(t, &[x1, x2])? / (r1 * r2);
        report.push_exact("rho2 factorization at 20 sqrt(t)", 1.0, ratio, 0.01);
    }
    Ok(report)
}

/// Tuning of [`laplace_fredholm_with`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FredholmOptions {
    /// Hard cap on the series order.
    pub k_max: usize,
    /// Largest number of index tuples summed at one order.
    pub node_budget: usize,
    /// Upper limit on Gauss–Legendre nodes per piece of `φ`.
    pub max_nodes: usize,
    /// Grid size for estimating the kernel supremum over the support.
    pub sup_grid: usize,
}

impl Default for FredholmOptions {
    fn default() -> Self {
        Self {
            k_max: 12,
            node_budget: 200_000,
            max_nodes: 48,
            sup_grid: 65,
        }
    }
}

/// Truncated Fredholm Pfaffian series for `E[∏(1 - φ(x_i))]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FredholmResult {
    /// `partial_sums[k]` is the series truncated after order `k`.
    pub partial_sums: Vec<f64>,
    pub terms: Vec<f64>,
    /// Hadamard majorant of `|terms[k]|`.
    pub term_bounds: Vec<f64>,
    /// Majorant of all orders above `k_max`.
    pub tail_bound: f64,
    pub value: f64,
    pub k_max: usize,
    pub converged: bool,
    pub tol: f64,
    /// Largest entry of the balanced matrix kernel on the support of `φ`.
    pub kernel_sup: f64,
    /// Scaling `λ²` applied to the `(1,1)` block entries (and `1/λ²` to `(2,2)`).
    pub balance: f64,
    /// Gauss–Legendre nodes per piece of `φ` used at each order.
    pub nodes_per_piece: Vec<usize>,
}

impl FredholmResult {
    /// Every computed term respects its Hadamard majorant.
    pub fn majorant_holds(&self) -> bool {
        self.terms
            .iter()
            .zip(&self.term_bounds)
            .all(|(t, b)| t.abs() <= b * (1.0 + 1e-9) + 1e-300)
    }
}

/// [`laplace_fredholm_with`] with default options.
pub fn laplace_fredholm(
    kernel: &ScalarKernel,
    t: f64,
    phi: &StepFunction,
    tol: f64,
) -> Result<FredholmResult> {
    laplace_fredholm_with(kernel, t, phi, tol, FredholmOptions::default())
}

/// `1 + Σ_k (-1)^k ∫_{x_1<…<x_k} ∏φ(x_i) ρ_t(x_1, …, x_k) dx`, stopped at the
/// first order whose Hadamard tail majorant `Σ_{j>k} (2j)^{j/2} (M ∫φ)^j / j!`
/// drops below `tol`. Finite starts of total mass `N` stop exactly at order `N`. `M` bounds the entries of the matrix kernel after the
/// Pfaffian-preserving rescaling of each `2×2` block by `diag(λ, 1/λ)`; it is
/// estimated on a grid over the support of `φ`.
pub fn laplace_fredholm_with(
    kernel: &ScalarKernel,
    t: f64,
    phi: &StepFunction,
    tol: f64,
    opts: FredholmOptions,
) -> Result<FredholmResult> {
    check_time(t)?;
    if let Some(v) = phi.values().iter().find(|v| !(0.0..1.0).contains(*v)) {
        return Err(Error::PhiOutOfRange(*v));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument("tolerance must be positive".into()));
    }
    let mut result = FredholmResult {
        partial_sums: vec![1.0],
        terms: vec![1.0],
        term_bounds: vec![1.0],
        tail_bound: 0.0,
        value: 1.0,
        k_max: 0,
        converged: true,
        tol,
        kernel_sup: 0.0,
        balance: 1.0,
        nodes_per_piece: vec![0],
    };
    let pieces: Vec<(f64, f64, f64)> = phi.pieces().filter(|p| p.2 != 0.0).collect();
    let Some((lo, hi)) = phi.support() else {
        if pieces.is_empty() {
            return Ok(result);
        }
        return Err(Error::InvalidArgument(
            "test function must have compact support".into(),
        ));
    };
    let mass = phi.integral(lo, hi);
    let (sup, balance) = balanced_sup(kernel, t, lo, hi, opts.sup_grid)?;
    result.kernel_sup = sup;
    result.balance = balance;
    let log_bound = |j: usize| -> f64 {
        let jf = j as f64;
        0.5 * jf * (2.0 * jf).ln() + jf * (sup * mass).ln() - ln_factorial(j)
    };
    // At most `N` particles from a start of total mass `N`, so every
    // correlation function of order above `N` vanishes.
    let particle_cap = match kernel.data() {
        InitialData::FiniteSpin { atoms } => Some(atoms.total_mass() as usize),
        _ => None,
    };
    let tail_after = |k: usize| -> f64 {
        if sup * mass == 0.0 || particle_cap.is_some_and(|n| k >= n) {
            return 0.0;
        }
        let mut total = 0.0;
        for j in k + 1..k + 2000 {
            let b = log_bound(j).exp();
            total += b;
            if j > k + 10 && b < total * 1e-17 {
                break;
            }
        }
        total
    };
    result.tail_bound = tail_after(0);
    let mut k = 0;
    while result.tail_bound >= tol {
        if k == opts.k_max {
            result.converged = false;
            break;
        }
        k += 1;
        let (integral, m) = ordered_integral(kernel, t, &pieces, k, &opts)?;
        let term = if k % 2 == 0 { integral } else { -integral };
        result.terms.push(term);
        result.term_bounds.push(if sup * mass == 0.0 {
            0.0
        } else {
            log_bound(k).exp()
        });
        result.value += term;
        result.partial_sums.push(result.value);
        result.nodes_per_piece.push(m);
        result.tail_bound = tail_after(k);
    }
    result.k_max = k;
    Ok(result)
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|i| (i as f64).ln()).sum()
}

/// Largest entry of the matrix kernel on `[lo, hi]` after rescaling the
/// `(1,1)` entries by `λ²` and the `(2,2)` entries by `1/λ²`, with `λ`
/// chosen to balance them. Returns `(sup, λ²)`.
fn balanced_sup(kernel: &ScalarKernel, t: f64, lo: f64, hi: f64, n: usize) -> Result<(f64, f64)> {
    let n = n.max(2);
    let xs: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let c = 1.0 / (1.0 + kernel.theta());
    let (mut sk, mut sd, mut sxy) = (c, 0.0f64, 0.0f64);
    for (i, &x) in xs.iter().enumerate() {
        let diag = kernel.eval(t, x, x)?;
        sd = sd.max(c * diag.dy.abs());
        for &y in &xs[i + 1..] {
            let e = kernel.eval(t, x, y)?;
            sk = sk.max(c * e.k.abs());
            sd = sd.max(c * e.dx.abs()).max(c * e.dy.abs());
            sxy = sxy.max(c * e.dxy.abs());
        }
    }
    let balance = if sxy > 0.0 { (sxy / sk).sqrt() } else { 1.0 };
    let sup = (balance * sk).max(sxy / balance).max(sd);
    Ok((sup, balance))
}

/// `∫_{x_1<…<x_k} ∏φ(x_i) ρ_t(x) dx` by the symmetrized tensor rule: a
/// composite Gauss–Legendre rule on the pieces of `φ`, summed over strictly
/// increasing index tuples. Tuples with repeated nodes are dropped; `ρ_t`
/// vanishes on coincident points.
fn ordered_integral(
    kernel: &ScalarKernel,
    t: f64,
    pieces: &[(f64, f64, f64)],
    k: usize,
    opts: &FredholmOptions,
) -> Result<(f64, usize)> {
    let p = pieces.len();
    let mut m = opts.max_nodes.max(1);
    while m > 1 && binomial(m * p, k) > opts.node_budget as f64 {
        m -= 1;
    }
    let rule = GaussLegendre::new(m);
    let mut xs = Vec::with_capacity(m * p);
    let mut ws = Vec::with_capacity(m * p);
    for &(a, b, v) in pieces {
        for (x, w) in rule.mapped(a, b) {
            xs.push(x);
            ws.push(w * v);
        }
    }
    if xs.len() < k {
        return Ok((0.0, m));
    }
    let full = assemble_intensity_matrix(&xs, t, kernel.theta(), |t, x, y| kernel.eval(t, x, y))?;
    let combos = combinations(xs.len(), k);
    let values: Vec<f64> = combos
        .par_chunks(k)
        .map(|idx| {
            let sub = SkewMatrix::from_upper(2 * k, |r, c| {
                full.get(2 * idx[r / 2] + r % 2, 2 * idx[c / 2] + c % 2)
            })?;
            let w: f64 = idx.iter().map(|&i| ws[i]).product();
            Ok(w * pfaffian(&sub)?)
        })
        .collect::<Result<_>>()?;
    Ok((values.iter().sum(), m))
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// All strictly increasing `k`-tuples from `0..n` in lexicographic order,
/// flattened.
fn combinations(n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::new();
    if k == 0 || k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.extend_from_slice(&idx);
        let Some(d) = (0..k).rev().find(|&d| idx[d] < n - k + d) else {
            return out;
        };
        idx[d] += 1;
        for e in d + 1..k {
            idx[e] = idx[e - 1] + 1;
        }
    }
}

/// Inputs of [`mixture_check`] beyond `θ`, `k` and `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    /// Spacing of the clustered start.
    pub eps: f64,
    /// Observation time of the survivor count.
    pub survivor_t: f64,
    /// Also run the survivor count at `eps / 2`.
    pub halving: bool,
    /// Points `(t, x, y)` for the kernel linearity check.
    pub kernel_battery: Vec<(f64, f64, f64)>,
    /// Point batteries for the Pfaffian identity and clustered duality.
    pub duality_points: Vec<Vec<f64>>,
    /// Bias allowance of the survivor probabilities.
    pub survivor_bias: f64,
    /// Run part (a), the kernel and Pfaffian identities.
    pub check_kernel: bool,
    /// Run part (b), the survivor probabilities.
    pub check_survivors: bool,
    /// Run part (c), the clustered-start duality statistic.
    pub check_duality: bool,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            eps: 1e-3,
            survivor_t: 0.1,
            halving: true,
            kernel_battery: vec![
                (0.5, -0.7, 0.4),
                (1.0, -1.0, 1.0),
                (0.2, 0.1, 0.9),
                (2.0, -3.0, -0.5),
            ],
            duality_points: vec![vec![-0.5, 0.5], vec![-1.0, -0.2, 0.3, 1.2]],
            survivor_bias: 0.02,
            check_kernel: true,
            check_survivors: true,
            check_duality: true,
        }
    }
}

/// Clustered-start mixture: `k` coincident particles at the origin behave as
/// the empty system with probability `p_k` and as one particle otherwise.
///
/// (a) `K^{f_k}` by quadrature against `p_k K^{f_0} + (1-p_k) K^{f_1}` from the
/// fast path, and the same identity for Pfaffians; (b) survivor probabilities
/// from `k` particles at spacing `ε` against `p_k`; (c) the duality statistic
/// from the clustered start against the mixture of Pfaffians.
pub fn mixture_check(
    theta: f64,
    k: u32,
    t: f64,
    spec: &MixtureSpec,
    p: &SimParams,
) -> Result<CheckReport> {
    check_theta(theta)?;
    check_time(t)?;
    if k < 2 {
        return Err(Error::InvalidArgument("mixture check needs k >= 2".into()));
    }
    spec.duality_points
        .iter()
        .try_for_each(|b| check_battery(b))?;
    let pk = p_k(theta, k as u64);
    let inputs = json!({
        "theta": theta, "k": k, "t": t, "p_k": pk, "spec": spec, "sim": p,
    });
    let mut report = CheckReport::new("mixture", inputs, p.z, p.bias_allowance);
    report.note(format!("analytic p_k = {pk}"));

    let fk = ScalarKernel::new(InitialData::clustered(0.0, k)?, theta)?;
    let f1 = ScalarKernel::new(InitialData::finite_spin(&[0.0])?, theta)?;
    let kernel_battery: &[(f64, f64, f64)] = if spec.check_kernel {
        &spec.kernel_battery
    } else {
        &[]
    };
    for &(tt, x, y) in kernel_battery {
        let quad = fk.eval_quadrature(tt, x, y)?;
        if !quad.converged() {
            report.fail(format!("quadrature not converged at ({tt}, {x}, {y})"));
        }
        let mix = pk + (1.0 - pk) * f1.value(tt, x, y)?;
        report.push_exact(
            format!(
                "K linearity t={} x={} y={}",
                format_sig(tt),
                format_sig(x),
                format_sig(y)
            ),
            mix,
            quad.k,
            1e-8,
        );
    }
    let mixed_pf: Vec<f64> = spec
        .duality_points
        .iter()
        .map(|b| Ok(pk + (1.0 - pk) * f1.duality_pfaffian(t, b)?))
        .collect::<Result<_>>()?;
    if spec.check_kernel {
        for (b, &mix) in spec.duality_points.iter().zip(&mixed_pf) {
            let direct = fk.duality_pfaffian(t, b)?;
            report.push_exact(format!("{} identity", battery_label(b)), mix, direct, 1e-10);
        }
    }

    let kk = k as usize;
    if spec.check_survivors {
        survivor_part(&mut report, theta, kk, pk, spec, p)?;
    }
    if spec.check_duality {
        clustered_duality_part(&mut report, theta, kk, t, &mixed_pf, spec, p)?;
    }
    Ok(report)
}

fn survivor_part(
    report: &mut CheckReport,
    theta: f64,
    kk: usize,
    pk: f64,
    spec: &MixtureSpec,
    p: &SimParams,
) -> Result<()> {
    let surv_sc = p.sim_config(theta, spec.survivor_t, 10);
    let (p0, p1) = crate::sim::survivor_distribution(kk, spec.eps, &surv_sc)?;
    report.push_mc_with_bias(
        format!("P0 eps={}", format_sig(spec.eps)),
        pk,
        &p0,
        spec.survivor_bias,
    );
    report.push_mc_with_bias(
        format!("P1 eps={}", format_sig(spec.eps)),
        1.0 - pk,
        &p1,
        spec.survivor_bias,
    );
    if spec.halving {
        let half_sc = p.sim_config(theta, spec.survivor_t, 11);
        let (h0, _) = crate::sim::survivor_distribution(kk, 0.5 * spec.eps, &half_sc)?;
        report.push_mc_with_bias(
            format!("P0 eps={}", format_sig(0.5 * spec.eps)),
            pk,
            &h0,
            spec.survivor_bias,
        );
        let diff = MCEstimate {
            mean: h0.mean,
            stderr: (p0.stderr.powi(2) + h0.stderr.powi(2)).sqrt(),
            n: h0.n,
            seed: h0.seed,
        };
        report.push_mc_with_bias(
            "P0 eps-halving consistency",
            p0.mean,
            &diff,
            spec.survivor_bias,
        );
    }
    Ok(())
}

fn clustered_duality_part(
    report: &mut CheckReport,
    theta: f64,
    kk: usize,
    t: f64,
    mixed_pf: &[f64],
    spec: &MixtureSpec,
    p: &SimParams,
) -> Result<()> {
    let start: Vec<f64> = (0..kk)
        .map(|i| (i as f64 - 0.5 * (kk - 1) as f64) * spec.eps)
        .collect();
    let initial = PointConfig::new(start)?;
    let sc = p.sim_config(theta, t, 20);
    let samples = sample_final(&initial, &sc)?;
    for (b, &mix) in spec.duality_points.iter().zip(mixed_pf) {
        let pairs: Vec<(f64, f64)> = b.chunks(2).map(|c| (c[0], c[1])).collect();
        let est = dual_statistic_from_samples(&samples, theta, &pairs, sc.seed);
        report.push_mc(format!("clustered {}", battery_label(b)), mix, &est);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SimParams {
        SimParams {
            dt: 1e-2,
            reps: 2000,
            seed: 5,
            ..SimParams::default()
        }
    }

    #[test]
    fn report_pass_rule() {
        let mut r = CheckReport::new("demo", json!({"a": 1}), 3.0, 0.01);
        let est = MCEstimate {
            mean: 0.5,
            stderr: 0.01,
            n: 100,
            seed: 1,
        };
        r.push_mc("inside", 0.539, &est);
        assert!(r.pass);
        r.push_mc("outside", 0.541, &est);
        assert!(!r.pass);
        assert!(r.entries[0].pass && !r.entries[1].pass);
        assert_eq!(
            r.param_hash,
            CheckReport::new("x", json!({"a": 1}), 1.0, 0.0).param_hash
        );
        let mut csv = Vec::new();
        write_csv_summary(&mut csv, &[r]).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with(SUMMARY_CSV_HEADER));
        assert_eq!(text.lines().count(), 3);
    }

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
    }

    #[test]
    fn empty_measure_duality_is_one() {
        let r = duality_check(
            &InitialData::empty(),
            0.5,
            0.5,
            &[vec![-0.5, 0.5]],
            &quick(),
        )
        .unwrap();
        assert!(r.pass);
        let e = r.entries.last().unwrap();
        assert_eq!((e.analytic, e.mc_mean, e.mc_stderr), (1.0, 1.0, 0.0));
    }

    #[test]
    fn duality_rejects_non_realizable_data() {
        let err = duality_check(&InitialData::Maximal, 0.0, 1.0, &[vec![0.0, 1.0]], &quick());
        assert!(matches!(err, Err(Error::InvalidData(_))));
        let odd = duality_check(&InitialData::empty(), 0.0, 1.0, &[vec![0.0]], &quick());
        assert!(matches!(odd, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn empty_system_intensity_is_zero() {
        let spec = IntensitySpec {
            grid: UniformGrid::new(-1.0, 1.0, 4).unwrap(),
            pairs: vec![(0, 2)],
            relative_bias: 0.02,
            absolute_bias: 0.0,
        };
        let r = intensity_check(
            &InitialData::empty(),
            0.3,
            1.0,
            &PointConfig::empty(),
            &spec,
            &quick(),
        )
        .unwrap();
        assert!(r.pass);
        assert!(r
            .entries
            .iter()
            .all(|e| e.analytic == 0.0 && e.mc_mean == 0.0));
    }

    #[test]
    fn fredholm_trivial_phi() {
        let k = ScalarKernel::new(InitialData::Maximal, 0.0).unwrap();
        let r = laplace_fredholm(&k, 1.0, &StepFunction::constant(0.0), 1e-6).unwrap();
        assert_eq!((r.value, r.k_max, r.converged), (1.0, 0, true));
        let bad = StepFunction::indicator(0.0, 1.0, 1.0).unwrap();
        assert_eq!(
            laplace_fredholm(&k, 1.0, &bad, 1e-6),
            Err(Error::PhiOutOfRange(1.0))
        );
    }

    #[test]
    fn fredholm_single_particle_is_exact() {
        // one particle: E[1 - φ(X)] = 1 - c P(X in (a, b)), series stops at k = 1
        let data = InitialData::finite_spin(&[0.0]).unwrap();
        let k = ScalarKernel::new(data, 0.5).unwrap();
        let phi = StepFunction::indicator(-0.3, 0.4, 0.6).unwrap();
        let r = laplace_fredholm(&k, 0.5, &phi, 1e-8).unwrap();
        let s = 1.0f64;
        let p = 0.5
            * (libm::erf(0.4 / s / std::f64::consts::SQRT_2)
                + libm::erf(0.3 / s / std::f64::consts::SQRT_2));
        assert!(
            (r.value - (1.0 - 0.6 * p)).abs() < 1e-9,
            "{r:?} vs {}",
            1.0 - 0.6 * p
        );
        assert!(r.terms.iter().skip(2).all(|t| t.abs() < 1e-12));
        assert!(r.majorant_holds());
    }

    #[test]
    fn combinations_enumerate() {
        assert_eq!(combinations(4, 2), vec![0, 1, 0, 2, 0, 3, 1, 2, 1, 3, 2, 3]);
        assert_eq!(combinations(5, 3).len(), 3 * 10);
        assert!(combinations(2, 3).is_empty());
        assert_eq!(binomial(24, 12), 2_704_156.0);
    }
}
