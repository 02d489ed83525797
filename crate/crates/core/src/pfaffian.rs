//! Pfaffians of real skew-symmetric matrices and assembly of the kernel
//! matrices whose Pfaffians give duality expectations and intensities.
//!
//! [`pfaffian`] uses skew-symmetric `L T L^T` elimination with partial
//! pivoting (Parlett–Reid style), `O(n^3)` with no complex arithmetic.
//! [`pfaffian_bruteforce`] expands along the first row and serves as an
//! independent oracle for small orders.

use crate::error::{check_increasing, check_time, Error, Result};
use crate::kernel::KernelEval;

/// Pivots smaller than this are treated as exact zeros.
const PIVOT_FLOOR: f64 = 1e-300;

/// Dense real skew-symmetric matrix of even order, row-major.
///
/// Only the strict upper triangle is ever written by callers; the lower
/// triangle is always its exact negation and the diagonal is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    order: usize,
    data: Vec<f64>,
}

impl SkewMatrix {
    pub fn zeros(order: usize) -> Result<Self> {
        if order < 2 || !order.is_multiple_of(2) {
            return Err(Error::OddOrder(order));
        }
        Ok(Self {
            order,
            data: vec![0.0; order * order],
        })
    }

    /// Build from a function giving the upper-triangle entries `(i, j)`, `i < j`.
    pub fn from_upper<F: FnMut(usize, usize) -> f64>(order: usize, mut upper: F) -> Result<Self> {
        let mut m = Self::zeros(order)?;
        for i in 0..order {
            for j in i + 1..order {
                m.set(i, j, upper(i, j));
            }
        }
        Ok(m)
    }

    /// Build from full rows; only the strict upper triangle is read.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let order = rows.len();
        if rows.iter().any(|r| r.len() != order) {
            return Err(Error::InvalidArgument("matrix rows must be square".into()));
        }
        Self::from_upper(order, |i, j| rows[i][j])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.order + j]
    }

    /// Set entry `(i, j)` and its mirror `(j, i)` to `-value`. Setting a
    /// diagonal entry is a no-op since it must stay zero.
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        if i == j {
            return;
        }
        self.data[i * self.order + j] = value;
        self.data[j * self.order + i] = -value;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            order: self.order,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    /// The matrix with rows and columns `a` and `b` removed.
    pub fn without(&self, a: usize, b: usize) -> Result<Self> {
        let keep: Vec<usize> = (0..self.order).filter(|&i| i != a && i != b).collect();
        Self::from_upper(keep.len(), |i, j| self.get(keep[i], keep[j]))
    }

    fn check_finite(&self) -> Result<()> {
        match self.data.iter().position(|v| !v.is_finite()) {
            Some(p) => Err(Error::NonFinite {
                row: p / self.order,
                col: p % self.order,
            }),
            None => Ok(()),
        }
    }
}

/// Pfaffian by skew-symmetric Gaussian elimination with partial pivoting.
///
/// The sign convention is `pf([[0, a], [-a, 0]]) = a`.
pub fn pfaffian(a: &SkewMatrix) -> Result<f64> {
    a.check_finite()?;
    let n = a.order;
    let mut m = a.data.clone();
    let mut pf = 1.0;
    let mut k = 0;
    while k + 1 < n {
        // largest entry below the diagonal in column k
        let (mut kp, mut best) = (k + 1, m[(k + 1) * n + k].abs());
        for r in k + 2..n {
            let v = m[r * n + k].abs();
            if v > best {
                best = v;
                kp = r;
            }
        }
        if best < PIVOT_FLOOR {
            return Ok(0.0);
        }
        if kp != k + 1 {
            swap_rows_cols(&mut m, n, k + 1, kp);
            pf = -pf;
        }
        let pivot = m[k * n + k + 1];
        pf *= pivot;
        if k + 2 < n {
            let tau: Vec<f64> = (k + 2..n).map(|j| m[k * n + j] / pivot).collect();
            let col: Vec<f64> = (k + 2..n).map(|r| m[r * n + k + 1]).collect();
            for (ii, i) in (k + 2..n).enumerate() {
                let row = &mut m[i * n..(i + 1) * n];
                for (jj, j) in (k + 2..n).enumerate() {
                    row[j] += tau[ii] * col[jj] - col[ii] * tau[jj];
                }
            }
        }
        k += 2;
    }
    Ok(pf)
}

fn swap_rows_cols(m: &mut [f64], n: usize, a: usize, b: usize) {
    for c in 0..n {
        m.swap(a * n + c, b * n + c);
    }
    for r in 0..n {
        m.swap(r * n + a, r * n + b);
    }
}

/// Pfaffian by recursive expansion along the first row, for orders up to 12.
pub fn pfaffian_bruteforce(a: &SkewMatrix) -> Result<f64> {
    if a.order > 12 {
        return Err(Error::OrderTooLarge(a.order));
    }
    a.check_finite()?;
    let idx: Vec<usize> = (0..a.order).collect();
    Ok(expand(a, &idx))
}

fn expand(a: &SkewMatrix, idx: &[usize]) -> f64 {
    if idx.is_empty() {
        return 1.0;
    }
    let first = idx[0];
    let mut total = 0.0;
    let mut rest = Vec::with_capacity(idx.len() - 2);
    for (pos, &j) in idx.iter().enumerate().skip(1) {
        let entry = a.get(first, j);
        if entry == 0.0 {
            continue;
        }
        rest.clear();
        rest.extend(idx[1..].iter().copied().filter(|&r| r != j));
        // pos 1 contributes with +, then alternating
        let sign = if pos % 2 == 1 { 1.0 } else { -1.0 };
        total += sign * entry * expand(a, &rest);
    }
    total
}

/// One 2×2 block `𝐊_t(x, y)` of the derived-form matrix kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatrixKernelBlock {
    pub k11: f64,
    pub k12: f64,
    pub k21: f64,
    pub k22: f64,
}

impl MatrixKernelBlock {
    /// Off-diagonal block for `x < y`, including the `1/(1+θ)` prefactor:
    /// `[[K, -D_y K], [-D_x K, D_xy K]] / (1+θ)`.
    ///
    /// Entry `(1,2)` pairs the value at `x` with the density slot at `y`, so it
    /// carries the `y`-derivative; `(2,1)` carries the `x`-derivative.
    pub fn off_diagonal(eval: &KernelEval, theta: f64) -> Self {
        let c = 1.0 / (1.0 + theta);
        Self {
            k11: c * eval.k,
            k12: -c * eval.dy,
            k21: -c * eval.dx,
            k22: c * eval.dxy,
        }
    }

    /// Diagonal block at `x = y`. It is skew-symmetric and its `(1,2)` entry is
    /// the one-point density `-D_y K(x,x) / (1+θ)`.
    pub fn diagonal(eval: &KernelEval, theta: f64) -> Self {
        let density = -eval.dy / (1.0 + theta);
        Self {
            k11: 0.0,
            k12: density,
            k21: -density,
            k22: 0.0,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.k11
            .abs()
            .max(self.k12.abs())
            .max(self.k21.abs())
            .max(self.k22.abs())
    }
}

/// The `2n × 2n` matrix `(K_t(x_i, x_j))` whose Pfaffian is the duality
/// expectation for the intervals `(x_1,x_2), …, (x_{2n-1},x_{2n})`.
pub fn assemble_duality_matrix<F>(points: &[f64], t: f64, mut scalar: F) -> Result<SkewMatrix>
where
    F: FnMut(f64, f64, f64) -> Result<f64>,
{
    check_time(t)?;
    check_increasing(points)?;
    let mut m = SkewMatrix::zeros(points.len())?;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            m.set(i, j, scalar(t, points[i], points[j])?);
        }
    }
    Ok(m)
}

/// The `2n × 2n` matrix of `2×2` blocks `𝐊_t(x_i, x_j)` whose Pfaffian is
/// the intensity `ρ_t(x_1, …, x_n)`.
pub fn assemble_intensity_matrix<F>(
    points: &[f64],
    t: f64,
    theta: f64,
    mut kernel: F,
) -> Result<SkewMatrix>
where
    F: FnMut(f64, f64, f64) -> Result<KernelEval>,
{
    check_time(t)?;
    crate::error::check_theta(theta)?;
    check_increasing(points)?;
    let n = points.len();
    if n == 0 {
        return Err(Error::InvalidArgument(
            "intensity needs at least one point".into(),
        ));
    }
    let mut m = SkewMatrix::zeros(2 * n)?;
    for i in 0..n {
        let diag = MatrixKernelBlock::diagonal(&kernel(t, points[i], points[i])?, theta);
        m.set(2 * i, 2 * i + 1, diag.k12);
        for j in i + 1..n {
            let b = MatrixKernelBlock::off_diagonal(&kernel(t, points[i], points[j])?, theta);
            m.set(2 * i, 2 * j, b.k11);
            m.set(2 * i, 2 * j + 1, b.k12);
            m.set(2 * i + 1, 2 * j, b.k21);
            m.set(2 * i + 1, 2 * j + 1, b.k22);
        }
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_by_four() -> SkewMatrix {
        let up = [
            [0.0, 1.0, 2.0, 3.0],
            [0.0, 0.0, 4.0, 5.0],
            [0.0, 0.0, 0.0, 6.0],
        ];
        SkewMatrix::from_upper(4, |i, j| up[i][j]).unwrap()
    }

    #[test]
    fn two_by_two_convention() {
        let m = SkewMatrix::from_upper(2, |_, _| -2.5).unwrap();
        assert_eq!(pfaffian(&m).unwrap(), -2.5);
        assert_eq!(pfaffian_bruteforce(&m).unwrap(), -2.5);
    }

    #[test]
    fn four_by_four_cofactor_value() {
        // a12 a34 - a13 a24 + a14 a23
        let m = four_by_four();
        let oracle = 1.0 * 6.0 - 2.0 * 5.0 + 3.0 * 4.0;
        assert_eq!(oracle, 8.0);
        assert!((pfaffian(&m).unwrap() - 8.0).abs() < 1e-12);
        assert!((pfaffian_bruteforce(&m).unwrap() - 8.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        for order in [2, 4, 10] {
            let z = SkewMatrix::zeros(order).unwrap();
            assert_eq!(pfaffian(&z).unwrap(), 0.0);
            assert_eq!(pfaffian_bruteforce(&z).unwrap(), 0.0);
        }
    }

    #[test]
    fn construction_errors() {
        assert_eq!(SkewMatrix::zeros(3), Err(Error::OddOrder(3)));
        assert_eq!(SkewMatrix::zeros(0), Err(Error::OddOrder(0)));
        let mut m = four_by_four();
        m.set(1, 3, f64::NAN);
        assert!(matches!(pfaffian(&m), Err(Error::NonFinite { .. })));
        let big = SkewMatrix::zeros(14).unwrap();
        assert_eq!(pfaffian_bruteforce(&big), Err(Error::OrderTooLarge(14)));
    }

    #[test]
    fn lower_triangle_is_exact_negation() {
        let m = four_by_four();
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(m.get(i, j), -m.get(j, i));
            }
        }
    }

    #[test]
    fn rank_deficient_is_zero() {
        // rows 0 and 1 equal up to sign in the off-pair columns
        let v = [0.7, -1.3, 2.2, 0.4];
        let m = SkewMatrix::from_upper(6, |i, j| match (i, j) {
            (0, 1) => 0.0,
            (0, j) => v[j - 2],
            (1, j) => -v[j - 2],
            (i, j) => (i * 7 + j * 3) as f64 * 0.1,
        })
        .unwrap();
        assert!(pfaffian(&m).unwrap().abs() < 1e-12);
        assert!(pfaffian_bruteforce(&m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn duality_matrix_two_points() {
        let m = assemble_duality_matrix(&[0.0, 1.0], 1.0, |_, x, y| Ok(x + y + 0.25)).unwrap();
        assert_eq!(pfaffian(&m).unwrap(), 1.25);
        assert_eq!(
            assemble_duality_matrix(&[1.0, 0.0], 1.0, |_, _, _| Ok(1.0)),
            Err(Error::NotIncreasing)
        );
    }
}
