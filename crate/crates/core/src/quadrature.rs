//! Gauss–Legendre rules and the normal-distribution helpers shared by the
//! kernel and the Fredholm series.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// An `m`-point Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussLegendre {
    /// Nodes are the roots of `P_m`, found by Newton iteration from the
    /// Chebyshev-like initial guess.
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        let mf = m as f64;
        for i in 0..m.div_ceil(2) {
            let mut z = (PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, z);
                dp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(m, z);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            nodes[i] = -z;
            nodes[m - 1 - i] = z;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&z, &w)| (mid + half * z, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule over `panels` equal sub-intervals of `[a, b]`.
    pub fn integrate_composite<F: FnMut(f64) -> f64>(
        &self,
        a: f64,
        b: f64,
        panels: usize,
        mut f: F,
    ) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = z;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let dp = m as f64 * (z * p - p0) / (z * z - 1.0);
    (p, dp)
}

/// Visit every node of the collapsed tensor rule on the ordered simplex
/// `lo < x_1 < ... < x_k < hi`. The callback receives the point and its
/// weight; weights sum to `(hi - lo)^k / k!`.
pub fn for_each_simplex_node<F: FnMut(&[f64], f64)>(
    rule: &GaussLegendre,
    k: usize,
    lo: f64,
    hi: f64,
    mut f: F,
) {
    if k == 0 {
        f(&[], 1.0);
        return;
    }
    let m = rule.len();
    let mut idx = vec![0usize; k];
    let mut x = vec![0.0; k];
    loop {
        let mut w = 1.0;
        let mut left = lo;
        for d in 0..k {
            let (z, wz) = (rule.nodes[idx[d]], rule.weights[idx[d]]);
            let half = 0.5 * (hi - left);
            x[d] = left + half * (1.0 + z);
            w *= half * wz;
            left = x[d];
        }
        f(&x, w);
        let mut d = k;
        loop {
            if d == 0 {
                return;
            }
            d -= 1;
            idx[d] += 1;
            if idx[d] < m {
                break;
            }
            idx[d] = 0;
        }
    }
}

pub(crate) fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() * (0.5 / PI).sqrt()
}

/// `P(N <= z)` for a standard normal.
#[cfg(test)]
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * FRAC_1_SQRT_2)
}

/// `P(a <= N <= b)` for a standard normal, computed from the tail that keeps
/// the most relative precision.
pub(crate) fn normal_mass(a: f64, b: f64) -> f64 {
    if a >= b {
        return 0.0;
    }
    if a >= 0.0 {
        0.5 * (libm::erfc(a * FRAC_1_SQRT_2) - libm::erfc(b * FRAC_1_SQRT_2))
    } else if b <= 0.0 {
        0.5 * (libm::erfc(-b * FRAC_1_SQRT_2) - libm::erfc(-a * FRAC_1_SQRT_2))
    } else {
        1.0 - 0.5 * libm::erfc(-a * FRAC_1_SQRT_2) - 0.5 * libm::erfc(b * FRAC_1_SQRT_2)
    }
}
