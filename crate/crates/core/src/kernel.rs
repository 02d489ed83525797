//! The scalar kernel `K_t^f(x, y)` and its derivatives.
//!
//! `K` is the bounded solution of `∂_t K = ΔK` on the wedge `{x < y}` with
//! `K = 1` on the diagonal and initial value `f`. By the image method
//!
//! ```text
//! K_t(x,y) = 1 + ∫∫_{x'<y'} (g_t(x-x', y-y') - g_t(y-x', x-y')) (f(x',y') - 1) dx' dy'
//! g_t(a,b) = exp(-(a² + b²) / 4t) / (4πt)
//! ```
//!
//! Two independent evaluation routes are provided:
//!
//! * [`ScalarKernel::eval`] splits the wedge into products of the cells on
//!   which `f` is constant. Off-diagonal cell pairs integrate in closed form
//!   through normal probabilities; a cell paired with itself reduces to a
//!   one-dimensional Gauss–Legendre integral (closed form when the cell is
//!   the whole line).
//! * [`ScalarKernel::eval_quadrature`] integrates the formula above directly
//!   with tensor Gauss–Legendre rules on the truncated wedge, evaluating `f`
//!   pointwise, and reports the `m` versus `2m` discrepancy.
//!
//! Derivatives are obtained by differentiating the Gaussian factors under
//! the integral sign in both routes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::entrance::{neg_theta_pow, InitialData, Weight};
use crate::error::{check_time, Error, Result};
use crate::pfaffian::{assemble_duality_matrix, assemble_intensity_matrix, pfaffian};
use crate::quadrature::{normal_mass, normal_pdf, GaussLegendre};

/// Quadrature disagreement above which an evaluation is flagged.
pub const CONVERGENCE_TOL: f64 = 1e-6;

/// Cells further than this many standard deviations carry no mass in `f64`.
const NEGLIGIBLE_SIGMAS: f64 = 40.0;

/// `K`, `D_x K`, `D_y K`, `D_xy K` at one point `(t, x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelEval {
    pub k: f64,
    pub dx: f64,
    pub dy: f64,
    pub dxy: f64,
    /// Largest component difference between the `m` and `2m` rules; zero for
    /// the semi-analytic route.
    pub error_estimate: f64,
}

impl KernelEval {
    pub const IDENTITY: KernelEval = KernelEval {
        k: 1.0,
        dx: 0.0,
        dy: 0.0,
        dxy: 0.0,
        error_estimate: 0.0,
    };

    pub fn converged(&self) -> bool {
        self.error_estimate <= CONVERGENCE_TOL
    }

    pub fn max_abs_diff(&self, other: &KernelEval) -> f64 {
        (self.k - other.k)
            .abs()
            .max((self.dx - other.dx).abs())
            .max((self.dy - other.dy).abs())
            .max((self.dxy - other.dxy).abs())
    }
}

/// Parameters of the generic tensor quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    /// Truncation radius in units of `√t` around `[x, y]`.
    pub radius: f64,
    /// Gauss–Legendre nodes per axis on each panel.
    pub nodes: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            radius: 10.0,
            nodes: 64,
        }
    }
}

impl QuadratureSpec {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 8.0 || self.nodes < 8 {
            return Err(Error::InvalidArgument(format!(
                "quadrature needs radius >= 8 and nodes >= 8, got {} and {}",
                self.radius, self.nodes
            )));
        }
        Ok(())
    }
}

/// Planar heat kernel `g_t(x, y) = exp(-(x² + y²)/4t) / (4πt)`.
pub fn gaussian_g(t: f64, x: f64, y: f64) -> Result<f64> {
    check_time(t)?;
    Ok(g_unchecked(t, x, y))
}

#[inline]
fn g_unchecked(t: f64, x: f64, y: f64) -> f64 {
    (-(x * x + y * y) / (4.0 * t)).exp() / (4.0 * PI * t)
}

/// How `f(x', y')` depends on the cells containing `x'` and `y'`.
#[derive(Debug, Clone)]
enum PairRule {
    /// `f = 0` if a blocking cell or an infinite edge lies in the closed
    /// range of cells, otherwise `(-θ)^{sum of edge weights in between}`.
    Spin {
        theta: f64,
        blocking: Vec<bool>,
        edge_weight: Vec<Weight>,
    },
    /// `f = v_i v_j`.
    Product { values: Vec<f64> },
}

/// Partition of the line into cells on whose products `f` is constant.
#[derive(Debug, Clone)]
struct CellModel {
    /// Finite cell boundaries; cell `i` is `[edges[i-1], edges[i]]`.
    edges: Vec<f64>,
    rule: PairRule,
}

impl CellModel {
    fn new(data: &InitialData, theta: f64) -> Self {
        match data {
            InitialData::FiniteSpin { atoms } => CellModel {
                edges: atoms.positions(),
                rule: PairRule::Spin {
                    theta,
                    blocking: vec![false; atoms.atoms().len() + 1],
                    edge_weight: atoms
                        .atoms()
                        .iter()
                        .map(|a| Weight::Finite(a.multiplicity))
                        .collect(),
                },
            },
            InitialData::Maximal => CellModel {
                edges: vec![],
                rule: PairRule::Spin {
                    theta,
                    blocking: vec![true],
                    edge_weight: vec![],
                },
            },
            InitialData::Product { f } => CellModel {
                edges: f.breakpoints().to_vec(),
                rule: PairRule::Product {
                    values: f.values().to_vec(),
                },
            },
            InitialData::ClosedSetAvoid {
                intervals,
                isolated,
            } => {
                enum Comp {
                    Interval(f64, f64),
                    Point(f64, Weight),
                }
                let mut comps: Vec<Comp> = intervals
                    .iter()
                    .map(|&(l, u)| Comp::Interval(l, u))
                    .chain(isolated.iter().map(|p| Comp::Point(p.position, p.weight)))
                    .collect();
                let key = |c: &Comp| match c {
                    Comp::Interval(l, _) => *l,
                    Comp::Point(p, _) => *p,
                };
                comps.sort_by(|a, b| key(a).total_cmp(&key(b)));
                let mut edges = Vec::new();
                let mut edge_weight = Vec::new();
                let mut blocking = vec![false];
                for c in comps {
                    match c {
                        Comp::Interval(l, u) => {
                            edges.extend([l, u]);
                            edge_weight.extend([Weight::Finite(0), Weight::Finite(0)]);
                            blocking.extend([true, false]);
                        }
                        Comp::Point(p, w) => {
                            edges.push(p);
                            edge_weight.push(w);
                            blocking.push(false);
                        }
                    }
                }
                CellModel {
                    edges,
                    rule: PairRule::Spin {
                        theta,
                        blocking,
                        edge_weight,
                    },
                }
            }
        }
    }

    fn bounds(&self, i: usize) -> (f64, f64) {
        let lo = if i == 0 {
            f64::NEG_INFINITY
        } else {
            self.edges[i - 1]
        };
        let hi = self.edges.get(i).copied().unwrap_or(f64::INFINITY);
        (lo, hi)
    }

    /// Index range of cells that meet `[lo, hi]`.
    fn cells_meeting(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let first = self.edges.partition_point(|&e| e <= lo);
        let last = self.edges.partition_point(|&e| e < hi);
        first..last + 1
    }

    /// `f - 1` on a cell paired with itself.
    fn self_pair_excess(&self, i: usize) -> f64 {
        match &self.rule {
            PairRule::Spin { blocking, .. } => {
                if blocking[i] {
                    -1.0
                } else {
                    0.0
                }
            }
            PairRule::Product { values } => values[i] * values[i] - 1.0,
        }
    }

    /// `Σ_{i<j in range} (f_ij - 1) a_i b_j` in linear time, with `a` and `b`
    /// indexed relative to `range.start`.
    fn pair_sum(&self, range: &std::ops::Range<usize>, a: &[f64], b: &[f64]) -> f64 {
        let mut plain = 0.0;
        let mut prefix_a = 0.0;
        let mut weighted = 0.0;
        match &self.rule {
            PairRule::Spin {
                theta,
                blocking,
                edge_weight,
            } => {
                // acc = Σ_{i<j} f_ij a_i, carried across edges
                let mut acc = 0.0;
                for (r, c) in range.clone().enumerate() {
                    plain += b[r] * prefix_a;
                    prefix_a += a[r];
                    if blocking[c] {
                        acc = 0.0;
                        continue;
                    }
                    weighted += b[r] * acc;
                    acc += a[r];
                    if c + 1 < range.end {
                        acc *= match edge_weight[c] {
                            Weight::Finite(w) => neg_theta_pow(*theta, w as u64),
                            Weight::Infinite => 0.0,
                        };
                    }
                }
            }
            PairRule::Product { values } => {
                let mut acc = 0.0;
                for (r, c) in range.clone().enumerate() {
                    plain += b[r] * prefix_a;
                    prefix_a += a[r];
                    weighted += values[c] * b[r] * acc;
                    acc += values[c] * a[r];
                }
            }
        }
        weighted - plain
    }
}

/// Evaluator of `K_t^f` for fixed initial data and `θ`.
#[derive(Debug, Clone)]
pub struct ScalarKernel {
    data: InitialData,
    theta: f64,
    cells: CellModel,
    spec: QuadratureSpec,
    rule: GaussLegendre,
    rule_fine: GaussLegendre,
    line_rule: GaussLegendre,
}

impl ScalarKernel {
    pub fn new(data: InitialData, theta: f64) -> Result<Self> {
        Self::with_quadrature(data, theta, QuadratureSpec::default())
    }

    pub fn with_quadrature(data: InitialData, theta: f64, spec: QuadratureSpec) -> Result<Self> {
        data.validate(theta)?;
        spec.validate()?;
        let cells = CellModel::new(&data, theta);
        Ok(Self {
            data,
            theta,
            cells,
            spec,
            rule: GaussLegendre::new(spec.nodes),
            rule_fine: GaussLegendre::new(2 * spec.nodes),
            line_rule: GaussLegendre::new(20),
        })
    }

    pub fn data(&self) -> &InitialData {
        &self.data
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn quadrature_spec(&self) -> QuadratureSpec {
        self.spec
    }

    fn check_args(t: f64, x: f64, y: f64) -> Result<()> {
        check_time(t)?;
        if !(x.is_finite() && y.is_finite()) || x > y {
            return Err(Error::NotIncreasing);
        }
        Ok(())
    }

    /// Semi-analytic evaluation of `K` and its derivatives at `x ≤ y`.
    pub fn eval(&self, t: f64, x: f64, y: f64) -> Result<KernelEval> {
        Self::check_args(t, x, y)?;
        let s = (2.0 * t).sqrt();
        let range = self
            .cells
            .cells_meeting(x - NEGLIGIBLE_SIGMAS * s, y + NEGLIGIBLE_SIGMAS * s);
        let r = range.len();
        let (mut ax, mut ay, mut dax, mut day) =
            (vec![0.0; r], vec![0.0; r], vec![0.0; r], vec![0.0; r]);
        for (k, c) in range.clone().enumerate() {
            let (lo, hi) = self.cells.bounds(c);
            ax[k] = normal_mass((lo - x) / s, (hi - x) / s);
            ay[k] = normal_mass((lo - y) / s, (hi - y) / s);
            dax[k] = (normal_pdf((lo - x) / s) - normal_pdf((hi - x) / s)) / s;
            day[k] = (normal_pdf((lo - y) / s) - normal_pdf((hi - y) / s)) / s;
        }
        let cs = &self.cells;
        let mut out = KernelEval {
            k: 1.0 + cs.pair_sum(&range, &ax, &ay) - cs.pair_sum(&range, &ay, &ax),
            dx: cs.pair_sum(&range, &dax, &ay) - cs.pair_sum(&range, &ay, &dax),
            dy: cs.pair_sum(&range, &ax, &day) - cs.pair_sum(&range, &day, &ax),
            dxy: cs.pair_sum(&range, &dax, &day) - cs.pair_sum(&range, &day, &dax),
            error_estimate: 0.0,
        };
        for c in range {
            let excess = cs.self_pair_excess(c);
            if excess == 0.0 {
                continue;
            }
            let (lo, hi) = cs.bounds(c);
            let same = self.same_cell(lo, hi, s, x, y);
            out.k += excess * same[0];
            out.dx += excess * same[1];
            out.dy += excess * same[2];
            out.dxy += excess * same[3];
        }
        if x == y {
            out.k = 1.0;
        }
        Ok(out)
    }

    /// `E[sign(Y - X); X, Y ∈ [lo, hi]]` for `X ~ N(x, s²)`, `Y ~ N(y, s²)`
    /// and its `x`, `y`, `xy` derivatives.
    fn same_cell(&self, lo: f64, hi: f64, s: f64, x: f64, y: f64) -> [f64; 4] {
        let w = y - x;
        if lo == f64::NEG_INFINITY && hi == f64::INFINITY {
            let e = (-w * w / (4.0 * s * s)).exp();
            let sqrt_pi = PI.sqrt();
            let dx = -e / (s * sqrt_pi);
            return [
                libm::erf(w / (2.0 * s)),
                dx,
                -dx,
                w * e / (2.0 * s * s * s * sqrt_pi),
            ];
        }
        let a = lo.max(x - 12.0 * s);
        let b = hi.min(x + 12.0 * s);
        if a >= b {
            return [0.0; 4];
        }
        let (zl, zh) = ((lo - y) / s, (hi - y) / s);
        let edge_pdf = normal_pdf(zl) + normal_pdf(zh);
        let panels = ((b - a) / s).ceil().max(1.0) as usize;
        let mut acc = [0.0; 4];
        let h = (b - a) / panels as f64;
        for p in 0..panels {
            let pa = a + h * p as f64;
            for (xp, wq) in self.line_rule.mapped(pa, pa + h) {
                let u = (xp - x) / s;
                let density = normal_pdf(u) / s;
                let zp = (xp - y) / s;
                let g = normal_mass(zp, zh) - normal_mass(zl, zp);
                let gy = (2.0 * normal_pdf(zp) - edge_pdf) / s;
                let score = u / s;
                acc[0] += wq * density * g;
                acc[1] += wq * density * score * g;
                acc[2] += wq * density * gy;
                acc[3] += wq * density * score * gy;
            }
        }
        acc
    }

    /// Direct tensor Gauss–Legendre evaluation of the image-method integral.
    pub fn eval_quadrature(&self, t: f64, x: f64, y: f64) -> Result<KernelEval> {
        Self::check_args(t, x, y)?;
        let coarse = self.quadrature_with(&self.rule, t, x, y);
        let fine = self.quadrature_with(&self.rule_fine, t, x, y);
        let mut out = fine;
        out.error_estimate = coarse.max_abs_diff(&fine);
        Ok(out)
    }

    fn quadrature_with(&self, rule: &GaussLegendre, t: f64, x: f64, y: f64) -> KernelEval {
        let rt = t.sqrt();
        let box_lo = x - self.spec.radius * rt;
        let box_hi = y + self.spec.radius * rt;
        // panels: the box split at every breakpoint of f, then into pieces no
        // wider than 4√t so each Gaussian is resolved
        let mut cuts = vec![box_lo];
        cuts.extend(
            self.data
                .breakpoints()
                .into_iter()
                .filter(|&e| e > box_lo && e < box_hi),
        );
        cuts.push(box_hi);
        let mut panels = Vec::new();
        for w in cuts.windows(2) {
            let pieces = ((w[1] - w[0]) / (4.0 * rt)).ceil().max(1.0) as usize;
            let h = (w[1] - w[0]) / pieces as f64;
            for p in 0..pieces {
                let lo = w[0] + h * p as f64;
                let hi = if p + 1 == pieces { w[1] } else { lo + h };
                panels.push((lo, hi));
            }
        }
        let four_t = 4.0 * t;
        let mut acc = [0.0; 4];
        let mut add = |xp: f64, yp: f64, weight: f64| {
            let excess = self.data.spin_unchecked(self.theta, xp, yp) - 1.0;
            if excess == 0.0 {
                return;
            }
            let (u1, v1) = (x - xp, y - yp);
            let (u2, v2) = (y - xp, x - yp);
            let g1 = g_unchecked(t, u1, v1);
            let g2 = g_unchecked(t, u2, v2);
            let w = weight * excess;
            acc[0] += w * (g1 - g2);
            acc[1] += w * (-g1 * u1 + g2 * v2) / (2.0 * t);
            acc[2] += w * (-g1 * v1 + g2 * u2) / (2.0 * t);
            acc[3] += w * (g1 * u1 * v1 - g2 * v2 * u2) / (four_t * t);
        };
        for (i, &(li, hi_i)) in panels.iter().enumerate() {
            // triangle x' < y' inside panel i
            for (xp, wx) in rule.mapped(li, hi_i) {
                for (yp, wy) in rule.mapped(xp, hi_i) {
                    add(xp, yp, wx * wy);
                }
            }
            for &(lj, hj) in &panels[i + 1..] {
                for (xp, wx) in rule.mapped(li, hi_i) {
                    for (yp, wy) in rule.mapped(lj, hj) {
                        add(xp, yp, wx * wy);
                    }
                }
            }
        }
        let mut out = KernelEval {
            k: 1.0 + acc[0],
            dx: acc[1],
            dy: acc[2],
            dxy: acc[3],
            error_estimate: 0.0,
        };
        if x == y {
            out.k = 1.0;
        }
        out
    }

    /// `K_t(x, y)` only.
    pub fn value(&self, t: f64, x: f64, y: f64) -> Result<f64> {
        Ok(self.eval(t, x, y)?.k)
    }

    /// One-point density `ρ_t(x) = -D_y K_t(x, x) / (1 + θ)`.
    pub fn density(&self, t: f64, x: f64) -> Result<f64> {
        Ok(-self.eval(t, x, x)?.dy / (1.0 + self.theta))
    }

    /// `pf(K_t(x_i, x_j))` for strictly increasing `x_1 < … < x_{2n}`.
    pub fn duality_pfaffian(&self, t: f64, points: &[f64]) -> Result<f64> {
        let m = assemble_duality_matrix(points, t, |t, x, y| self.value(t, x, y))?;
        pfaffian(&m)
    }

    /// `ρ_t(x_1, …, x_n)` as the Pfaffian of the assembled intensity matrix.
    pub fn intensity(&self, t: f64, points: &[f64]) -> Result<f64> {
        let m = assemble_intensity_matrix(points, t, self.theta, |t, x, y| self.eval(t, x, y))?;
        pfaffian(&m)
    }
}

/// Evaluate `K_t^f` and its derivatives at `x ≤ y` with the semi-analytic route.
pub fn kernel_eval(
    f: &InitialData,
    theta: f64,
    t: f64,
    x: f64,
    y: f64,
    q: QuadratureSpec,
) -> Result<KernelEval> {
    ScalarKernel::with_quadrature(f.clone(), theta, q)?.eval(t, x, y)
}

/// Central finite-difference residual `|∂_t K - (∂_x² + ∂_y²) K|` at `(t, x, y)`
/// with step `h` in all three variables.
pub fn heat_residual(kernel: &ScalarKernel, t: f64, x: f64, y: f64, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::Stencil(format!("step must be positive, got {h}")));
    }
    if t <= h {
        return Err(Error::Stencil(format!("t = {t} must exceed the step {h}")));
    }
    if y - x < 3.0 * h {
        return Err(Error::Stencil(format!(
            "(x, y) = ({x}, {y}) is within 3h of the diagonal"
        )));
    }
    let k = |t: f64, x: f64, y: f64| kernel.value(t, x, y);
    let centre = k(t, x, y)?;
    let dt = (k(t + h, x, y)? - k(t - h, x, y)?) / (2.0 * h);
    let dxx = (k(t, x + h, y)? - 2.0 * centre + k(t, x - h, y)?) / (h * h);
    let dyy = (k(t, x, y + h)? - 2.0 * centre + k(t, x, y - h)?) / (h * h);
    Ok((dt - dxx - dyy).abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entrance::{IsolatedPoint, StepFunction};

    fn maximal_closed_form(t: f64, x: f64, y: f64) -> f64 {
        libm::erfc((y - x) / (8.0 * t).sqrt())
    }

    #[test]
    fn g_values() {
        let t = 0.7;
        assert!((gaussian_g(t, 0.0, 0.0).unwrap() - 1.0 / (4.0 * PI * t)).abs() < 1e-15);
        let a = gaussian_g(t, 0.3, -1.2).unwrap();
        assert_eq!(a, gaussian_g(t, -1.2, 0.3).unwrap());
        assert_eq!(a, gaussian_g(t, -0.3, -1.2).unwrap());
        assert!(gaussian_g(0.0, 0.0, 0.0).is_err());
        // normalization over the plane
        let rule = GaussLegendre::new(64);
        let r = 12.0 * t.sqrt();
        let total = rule.integrate_composite(-r, r, 6, |u| {
            rule.integrate_composite(-r, r, 6, |v| g_unchecked(t, u, v))
        });
        assert!((total - 1.0).abs() < 1e-8, "{total}");
    }

    #[test]
    fn empty_data_is_identity() {
        let k = ScalarKernel::new(InitialData::empty(), 0.4).unwrap();
        let e = k.eval(0.3, -1.0, 2.0).unwrap();
        assert_eq!(e.k, 1.0);
        assert_eq!((e.dx, e.dy, e.dxy), (0.0, 0.0, 0.0));
        let q = k.eval_quadrature(0.3, -1.0, 2.0).unwrap();
        assert_eq!(q.k, 1.0);
    }

    #[test]
    fn maximal_matches_reflection_principle() {
        let k = ScalarKernel::new(InitialData::Maximal, 0.0).unwrap();
        let v = k.value(1.0, -1.0, 1.0).unwrap();
        assert!((v - 0.317_310_507_862_914_15).abs() < 1e-12, "{v}");
        for &(t, x, y) in &[(0.1, 0.0, 0.05), (2.0, -3.0, 1.0), (0.5, 1.0, 1.0)] {
            assert!((k.value(t, x, y).unwrap() - maximal_closed_form(t, x, y)).abs() < 1e-14);
        }
        let q = k.eval_quadrature(1.0, -1.0, 1.0).unwrap();
        assert!((q.k - 0.317_310_507_862_914_15).abs() < 1e-8, "{}", q.k);
        assert!(q.converged());
    }

    #[test]
    fn maximal_density() {
        // ρ = 1/√(2πt) for the coalescing maximal entrance law
        for t in [0.25, 1.0, 3.0] {
            let rho = ScalarKernel::new(InitialData::Maximal, 0.0)
                .unwrap()
                .density(t, 0.7)
                .unwrap();
            assert!((rho - 1.0 / (2.0 * PI * t).sqrt()).abs() < 1e-14);
        }
    }

    #[test]
    fn routes_agree_on_mixed_data() {
        let cases: Vec<(InitialData, f64)> = vec![
            (InitialData::finite_spin(&[-1.0, 0.0, 2.0]).unwrap(), 0.5),
            (InitialData::clustered(0.0, 3).unwrap(), 0.5),
            (
                InitialData::Product {
                    f: StepFunction::new(vec![-0.5, 0.8], vec![1.0, -0.3, 0.6]).unwrap(),
                },
                1.0,
            ),
            (
                InitialData::ClosedSetAvoid {
                    intervals: vec![(-0.4, 0.1)],
                    isolated: vec![
                        IsolatedPoint {
                            position: 0.9,
                            weight: Weight::Finite(2),
                        },
                        IsolatedPoint {
                            position: -1.5,
                            weight: Weight::Infinite,
                        },
                    ],
                },
                0.3,
            ),
        ];
        for (data, theta) in cases {
            let k = ScalarKernel::new(data.clone(), theta).unwrap();
            for &(t, x, y) in &[(0.5, -0.5, 0.5), (0.2, -1.2, 1.4), (1.0, 0.3, 0.31)] {
                let a = k.eval(t, x, y).unwrap();
                let q = k.eval_quadrature(t, x, y).unwrap();
                assert!(q.converged(), "{data:?} {q:?}");
                assert!(
                    a.max_abs_diff(&q) < 1e-8,
                    "{data:?} at ({t},{x},{y}): {a:?} vs {q:?}"
                );
            }
        }
    }

    #[test]
    fn heat_residual_errors_and_zero() {
        let empty = ScalarKernel::new(InitialData::empty(), 0.0).unwrap();
        assert_eq!(heat_residual(&empty, 1.0, -1.0, 1.0, 1e-3).unwrap(), 0.0);
        assert!(heat_residual(&empty, 1e-3, -1.0, 1.0, 1e-3).is_err());
        assert!(heat_residual(&empty, 1.0, 0.0, 2e-3, 1e-3).is_err());
    }

    #[test]
    fn quadrature_spec_bounds() {
        let bad = QuadratureSpec {
            radius: 5.0,
            nodes: 64,
        };
        assert!(ScalarKernel::with_quadrature(InitialData::Maximal, 0.0, bad).is_err());
    }
}
