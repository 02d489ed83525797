//! Initial data and spin functions on the wedge `{x < y}`.
//!
//! Every entrance law of the system is labelled by a function `f` on the
//! wedge. The representable families are:
//!
//! * [`InitialData::FiniteSpin`]: `s_μ(x, y) = (-θ)^{μ(x,y)}` for a finite
//!   point measure `μ` (multiplicities allowed),
//! * [`InitialData::Product`]: `f(x) f(y)` for a step function `f` (θ = 1 only),
//! * [`InitialData::ClosedSetAvoid`]: `𝕀(S_c ∩ (x,y) = ∅) (-θ)^{Σ w(z)}` for a
//!   closed set made of intervals (cluster part) and weighted isolated points
//!   (θ < 1 only),
//! * [`InitialData::Maximal`]: `f ≡ 0`.
//!
//! Throughout `0^k = 𝕀(k = 0)` and `(-θ)^∞ = 0`.

use serde::de::{self, Deserializer, Visitor};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{check_theta, Error, Result};

/// One atom of a point measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub position: f64,
    #[serde(default = "one")]
    pub multiplicity: u32,
}

fn one() -> u32 {
    1
}

/// A finite point measure with strictly increasing atom positions.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
#[serde(transparent)]
pub struct PointMeasure {
    atoms: Vec<Atom>,
}

impl PointMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        if atoms
            .iter()
            .any(|a| !a.position.is_finite() || a.multiplicity == 0)
        {
            return Err(Error::InvalidData(
                "atoms need finite positions and positive multiplicities".into(),
            ));
        }
        if atoms.windows(2).any(|w| w[0].position >= w[1].position) {
            return Err(Error::InvalidData(
                "atom positions must be strictly increasing".into(),
            ));
        }
        Ok(Self { atoms })
    }

    /// A simple measure with one unit atom per position.
    pub fn simple(positions: &[f64]) -> Result<Self> {
        Self::new(
            positions
                .iter()
                .map(|&position| Atom {
                    position,
                    multiplicity: 1,
                })
                .collect(),
        )
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn positions(&self) -> Vec<f64> {
        self.atoms.iter().map(|a| a.position).collect()
    }

    pub fn is_simple(&self) -> bool {
        self.atoms.iter().all(|a| a.multiplicity == 1)
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> u64 {
        self.atoms.iter().map(|a| a.multiplicity as u64).sum()
    }

    /// `μ({x})`.
    pub fn mass_at(&self, x: f64) -> u64 {
        self.atoms
            .iter()
            .find(|a| a.position == x)
            .map_or(0, |a| a.multiplicity as u64)
    }

    /// `μ((a, b))`, the mass in the open interval.
    pub fn mass_open(&self, a: f64, b: f64) -> u64 {
        if a >= b {
            return 0;
        }
        let lo = self.atoms.partition_point(|at| at.position <= a);
        let hi = self.atoms.partition_point(|at| at.position < b);
        self.atoms[lo..hi.max(lo)]
            .iter()
            .map(|at| at.multiplicity as u64)
            .sum()
    }
}

impl<'de> Deserialize<'de> for PointMeasure {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let atoms = Vec::<Atom>::deserialize(d)?;
        PointMeasure::new(atoms).map_err(de::Error::custom)
    }
}

/// Weight of an isolated point of a closed set: a positive integer or `∞`.
///
/// Serialized as a JSON integer or the string `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Weight {
    Finite(u32),
    Infinite,
}

impl Serialize for Weight {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Weight::Finite(w) => s.serialize_u32(*w),
            Weight::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Weight {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct WeightVisitor;
        impl Visitor<'_> for WeightVisitor {
            type Value = Weight;
            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("a positive integer or \"inf\"")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Weight, E> {
                match u32::try_from(v) {
                    Ok(w) if w > 0 => Ok(Weight::Finite(w)),
                    _ => Err(E::custom(format!("weight {v} out of range"))),
                }
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Weight, E> {
                if v <= 0 {
                    return Err(E::custom(format!("weight {v} must be positive")));
                }
                self.visit_u64(v as u64)
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Weight, E> {
                match v {
                    "inf" | "infinity" | "∞" => Ok(Weight::Infinite),
                    _ => Err(E::custom(format!("unknown weight {v:?}"))),
                }
            }
        }
        d.deserialize_any(WeightVisitor)
    }
}

/// `(-θ)^k` with `0^0 = 1`.
pub fn neg_theta_pow(theta: f64, k: u64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    let mag = if theta == 0.0 {
        0.0
    } else {
        theta.powi(k.min(i32::MAX as u64) as i32)
    };
    if k % 2 == 1 {
        -mag
    } else {
        mag
    }
}

fn neg_theta_pow_weight(theta: f64, w: Weight) -> f64 {
    match w {
        Weight::Finite(k) => neg_theta_pow(theta, k as u64),
        Weight::Infinite => 0.0,
    }
}

/// Right-continuous step function `ℝ → [-1, 1]`.
///
/// `values[0]` holds left of `breakpoints[0]`, `values[i]` on
/// `[breakpoints[i-1], breakpoints[i])` and the last value to the right of
/// the last breakpoint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFunction {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

#[derive(Deserialize)]
struct StepFunctionRepr {
    breakpoints: Vec<f64>,
    values: Vec<f64>,
}

impl<'de> Deserialize<'de> for StepFunction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = StepFunctionRepr::deserialize(d)?;
        StepFunction::new(r.breakpoints, r.values).map_err(de::Error::custom)
    }
}

impl StepFunction {
    pub fn new(breakpoints: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidData(
                "step function needs one more value than breakpoints".into(),
            ));
        }
        if breakpoints.iter().any(|b| !b.is_finite())
            || breakpoints.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::InvalidData(
                "breakpoints must be finite and strictly increasing".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("step values must be finite".into()));
        }
        Ok(Self {
            breakpoints,
            values,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            breakpoints: vec![],
            values: vec![c],
        }
    }

    /// `c` on `[a, b)` and zero elsewhere.
    pub fn indicator(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::new(vec![a, b], vec![0.0, c, 0.0])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.values[self.breakpoints.partition_point(|&b| b <= x)]
    }

    /// Pieces as `(lo, hi, value)` with infinite outer ends.
    pub fn pieces(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        (0..self.values.len()).map(move |i| {
            let lo = if i == 0 {
                f64::NEG_INFINITY
            } else {
                self.breakpoints[i - 1]
            };
            let hi = self.breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
            (lo, hi, self.values[i])
        })
    }

    /// `∫_a^b f`, which is infinite only if a non-zero value reaches infinity.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if a >= b {
            return 0.0;
        }
        self.pieces()
            .map(|(lo, hi, v)| {
                let (l, h) = (lo.max(a), hi.min(b));
                if h > l && v != 0.0 {
                    v * (h - l)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn sup_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Smallest interval outside which the function vanishes, if bounded.
    pub fn support(&self) -> Option<(f64, f64)> {
        let first = *self.values.first()?;
        let last = *self.values.last()?;
        if first != 0.0 || last != 0.0 {
            return None;
        }
        let mut lo = None;
        let mut hi = None;
        for (l, h, v) in self.pieces() {
            if v != 0.0 {
                lo.get_or_insert(l);
                hi = Some(h);
            }
        }
        Some((lo.unwrap_or(0.0), hi.unwrap_or(0.0)))
    }
}

/// An isolated point of a closed set together with its weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolatedPoint {
    pub position: f64,
    pub weight: Weight,
}

/// Tagged representation of an initial / spin function on the wedge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum InitialData {
    FiniteSpin {
        atoms: PointMeasure,
    },
    Product {
        f: StepFunction,
    },
    /// Closed set given by disjoint closed intervals (its cluster part) and
    /// weighted isolated points.
    ClosedSetAvoid {
        #[serde(default)]
        intervals: Vec<(f64, f64)>,
        #[serde(default)]
        isolated: Vec<IsolatedPoint>,
    },
    Maximal,
}

impl InitialData {
    pub fn finite_spin(positions: &[f64]) -> Result<Self> {
        Ok(Self::FiniteSpin {
            atoms: PointMeasure::simple(positions)?,
        })
    }

    /// `k` coincident particles at `position`.
    pub fn clustered(position: f64, k: u32) -> Result<Self> {
        if k == 0 {
            return Ok(Self::FiniteSpin {
                atoms: PointMeasure::empty(),
            });
        }
        Ok(Self::FiniteSpin {
            atoms: PointMeasure::new(vec![Atom {
                position,
                multiplicity: k,
            }])?,
        })
    }

    pub fn empty() -> Self {
        Self::FiniteSpin {
            atoms: PointMeasure::empty(),
        }
    }

    pub fn variant_name(&self) -> &'static str {
        match self {
            Self::FiniteSpin { .. } => "finite_spin",
            Self::Product { .. } => "product",
            Self::ClosedSetAvoid { .. } => "closed_set_avoid",
            Self::Maximal => "maximal",
        }
    }

    /// Check structural invariants and that the representation is valid for `θ`.
    pub fn validate(&self, theta: f64) -> Result<()> {
        check_theta(theta)?;
        match self {
            Self::FiniteSpin { .. } | Self::Maximal => Ok(()),
            Self::Product { f } => {
                if theta != 1.0 {
                    return Err(Error::InvalidForTheta {
                        variant: "product",
                        theta,
                    });
                }
                if f.sup_abs() > 1.0 {
                    return Err(Error::InvalidData(
                        "product factor must take values in [-1, 1]".into(),
                    ));
                }
                Ok(())
            }
            Self::ClosedSetAvoid {
                intervals,
                isolated,
            } => {
                if theta == 1.0 {
                    return Err(Error::InvalidForTheta {
                        variant: "closed_set_avoid",
                        theta,
                    });
                }
                validate_closed_set(intervals, isolated)
            }
        }
    }

    /// The spin / initial function `f(x, y)` for `x < y`.
    pub fn spin_eval(&self, theta: f64, x: f64, y: f64) -> Result<f64> {
        self.validate(theta)?;
        if x >= y {
            return Err(Error::NotIncreasing);
        }
        Ok(self.spin_unchecked(theta, x, y))
    }

    pub(crate) fn spin_unchecked(&self, theta: f64, x: f64, y: f64) -> f64 {
        match self {
            Self::FiniteSpin { atoms } => neg_theta_pow(theta, atoms.mass_open(x, y)),
            Self::Product { f } => f.eval(x) * f.eval(y),
            Self::ClosedSetAvoid {
                intervals,
                isolated,
            } => {
                if intervals.iter().any(|&(l, u)| l < y && u > x) {
                    return 0.0;
                }
                isolated
                    .iter()
                    .filter(|p| x < p.position && p.position < y)
                    .map(|p| neg_theta_pow_weight(theta, p.weight))
                    .product()
            }
            Self::Maximal => 0.0,
        }
    }

    /// Finite breakpoints of `f` in increasing order. Off the diagonal the
    /// function is constant on products of the cells between them.
    pub fn breakpoints(&self) -> Vec<f64> {
        match self {
            Self::FiniteSpin { atoms } => atoms.positions(),
            Self::Product { f } => f.breakpoints().to_vec(),
            Self::ClosedSetAvoid {
                intervals,
                isolated,
            } => {
                let mut b: Vec<f64> = intervals
                    .iter()
                    .flat_map(|&(l, u)| [l, u])
                    .chain(isolated.iter().map(|p| p.position))
                    .collect();
                b.sort_by(f64::total_cmp);
                b
            }
            Self::Maximal => vec![],
        }
    }
}

fn validate_closed_set(intervals: &[(f64, f64)], isolated: &[IsolatedPoint]) -> Result<()> {
    if intervals
        .iter()
        .any(|&(l, u)| !(l.is_finite() && u.is_finite() && l < u))
    {
        return Err(Error::InvalidData(
            "intervals must be finite with lo < hi".into(),
        ));
    }
    let mut sorted = intervals.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[0].1 >= w[1].0) {
        return Err(Error::InvalidData("intervals must be disjoint".into()));
    }
    let mut pts: Vec<f64> = isolated.iter().map(|p| p.position).collect();
    if pts.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidData("isolated points must be finite".into()));
    }
    pts.sort_by(f64::total_cmp);
    if pts.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidData(
            "isolated points must be distinct".into(),
        ));
    }
    if isolated.iter().any(|p| {
        intervals
            .iter()
            .any(|&(l, u)| l <= p.position && p.position <= u)
    }) {
        return Err(Error::InvalidData(
            "isolated points must lie outside the intervals".into(),
        ));
    }
    if isolated.iter().any(|p| p.weight == Weight::Finite(0)) {
        return Err(Error::InvalidData(
            "isolated weights must be positive".into(),
        ));
    }
    Ok(())
}

/// Probability that `k` coincident particles react down to zero survivors:
/// `p_k = (θ + (-θ)^k) / (1 + θ)`.
pub fn p_k(theta: f64, k: u64) -> f64 {
    (theta + neg_theta_pow(theta, k)) / (1.0 + theta)
}

/// The `n`-th block approximation `f_n` of `f` by a `±1` step function:
/// `1` outside `[-n, n)`, and on each block `[k/n, (k+1)/n)` equal to `1`
/// then `-1`, switching at the point that preserves the block integral.
pub fn approx_step(f: &StepFunction, n: u32) -> StepFunction {
    let nf = n as f64;
    let nn = n as i64 * n as i64;
    let mut breakpoints = Vec::new();
    let mut values = vec![1.0];
    let push = |at: f64, v: f64, bp: &mut Vec<f64>, vals: &mut Vec<f64>| {
        if *vals.last().unwrap() != v {
            bp.push(at);
            vals.push(v);
        }
    };
    for k in -nn..nn {
        let lo = k as f64 / nf;
        let hi = (k + 1) as f64 / nf;
        let mass = f.integral(lo, hi).clamp(-(hi - lo), hi - lo);
        let a = (lo + 0.5 * ((hi - lo) + mass)).clamp(lo, hi);
        if a > lo {
            push(lo, 1.0, &mut breakpoints, &mut values);
        }
        if a < hi {
            push(a, -1.0, &mut breakpoints, &mut values);
        }
    }
    push(nf, 1.0, &mut breakpoints, &mut values);
    StepFunction {
        breakpoints,
        values,
    }
}

/// The measure `μ_n` of sign changes of [`approx_step`]; its half-line spin
/// `ŝ_{μ_n}` equals `±f_n` almost everywhere.
pub fn approx_product(f: &StepFunction, n: u32) -> PointMeasure {
    let fn_ = approx_step(f, n);
    PointMeasure::simple(fn_.breakpoints()).expect("sign changes are strictly increasing")
}

/// Half-line spin `ŝ_μ(x) = (-1)^{μ(0,x)}` for `x ≥ 0` and `(-1)^{μ(x,0]}`
/// for `x < 0`. With `θ = 1`, `s_μ(x,y) = ŝ_μ(x) ŝ_μ(y)` away from atoms.
///
/// An atom at the origin is charged to the negative half-line; counting it
/// on neither side would break the factorization for `x < 0 < y`.
pub fn hat_spin(mu: &PointMeasure, x: f64) -> f64 {
    let count = if x >= 0.0 {
        mu.mass_open(0.0, x)
    } else {
        mu.mass_open(x, 0.0) + mu.mass_at(0.0)
    };
    if count % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Check `∏ f_k(x_{2i-1}, x_{2i}) = p_k ∏ f_0 + (1 - p_k) ∏ f_1` at the given
/// points, where `f_j(x, y) = (-θ)^{j 𝕀(x<0<y)}`. Tolerance `1e-12`.
pub fn mixture_initial_identity(theta: f64, k: u64, points: &[f64]) -> Result<bool> {
    if !(0.0..1.0).contains(&theta) {
        return Err(Error::ThetaOutOfRange(theta));
    }
    if k < 2 {
        return Err(Error::InvalidArgument(
            "mixture identity needs k >= 2".into(),
        ));
    }
    crate::error::check_increasing(points)?;
    if !points.len().is_multiple_of(2) || points.is_empty() {
        return Err(Error::InvalidArgument(
            "need a positive even number of points".into(),
        ));
    }
    let f = |j: u64, x: f64, y: f64| neg_theta_pow(theta, if x < 0.0 && 0.0 < y { j } else { 0 });
    let prod = |j: u64| -> f64 { points.chunks(2).map(|p| f(j, p[0], p[1])).product() };
    let pk = p_k(theta, k);
    let lhs = prod(k);
    let rhs = pk * prod(0) + (1.0 - pk) * prod(1);
    Ok((lhs - rhs).abs() <= 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finite_spin_examples() {
        let d = InitialData::finite_spin(&[0.0]).unwrap();
        assert_eq!(d.spin_eval(0.5, -1.0, 1.0).unwrap(), -0.5);
        assert_eq!(d.spin_eval(0.0, -1.0, 1.0).unwrap(), 0.0);
        assert_eq!(d.spin_eval(0.0, 1.0, 2.0).unwrap(), 1.0);
        assert_eq!(d.spin_eval(0.0, 1.0, 1.0), Err(Error::NotIncreasing));
    }

    #[test]
    fn closed_set_examples() {
        let d = InitialData::ClosedSetAvoid {
            intervals: vec![(0.0, 1.0)],
            isolated: vec![],
        };
        assert_eq!(d.spin_eval(0.5, 2.0, 3.0).unwrap(), 1.0);
        assert_eq!(d.spin_eval(0.5, -1.0, 0.5).unwrap(), 0.0);
        assert!(matches!(
            d.spin_eval(1.0, 2.0, 3.0),
            Err(Error::InvalidForTheta { .. })
        ));
        let w = InitialData::ClosedSetAvoid {
            intervals: vec![],
            isolated: vec![
                IsolatedPoint {
                    position: 0.0,
                    weight: Weight::Finite(2),
                },
                IsolatedPoint {
                    position: 1.0,
                    weight: Weight::Infinite,
                },
            ],
        };
        assert!((w.spin_eval(0.5, -1.0, 0.5).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(w.spin_eval(0.5, -1.0, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn closed_set_validation() {
        let bad = InitialData::ClosedSetAvoid {
            intervals: vec![(0.0, 1.0), (0.5, 2.0)],
            isolated: vec![],
        };
        assert!(bad.validate(0.5).is_err());
        let inside = InitialData::ClosedSetAvoid {
            intervals: vec![(0.0, 1.0)],
            isolated: vec![IsolatedPoint {
                position: 0.5,
                weight: Weight::Finite(1),
            }],
        };
        assert!(inside.validate(0.5).is_err());
    }

    #[test]
    fn product_requires_theta_one() {
        let d = InitialData::Product {
            f: StepFunction::constant(0.5),
        };
        assert!((d.spin_eval(1.0, 0.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!(d.spin_eval(0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn p_k_values() {
        for theta in [0.0, 0.3, 0.5, 1.0] {
            assert_eq!(p_k(theta, 1), 0.0);
            assert!((p_k(theta, 2) - theta).abs() < 1e-15);
            assert_eq!(p_k(theta, 0), 1.0);
        }
        assert!((p_k(0.5, 3) - 0.25).abs() < 1e-15);
        // recursion over one pair reaction: p_k = θ p_{k-2} + (1-θ) p_{k-1}
        for theta in [0.1, 0.5, 0.9] {
            for k in 2..12 {
                let rec = theta * p_k(theta, k - 2) + (1.0 - theta) * p_k(theta, k - 1);
                assert!((p_k(theta, k) - rec).abs() < 1e-14);
            }
        }
        assert!((p_k(0.5, 200) - 0.5 / 1.5).abs() < 1e-15);
    }

    #[test]
    fn approx_of_constants() {
        assert!(approx_product(&StepFunction::constant(1.0), 5).is_empty());
        let mu = approx_product(&StepFunction::constant(-1.0), 4);
        assert_eq!(mu.positions(), vec![-4.0, 4.0]);
    }

    #[test]
    fn approx_midpoints_on_zero_region() {
        let f = StepFunction::new(vec![0.0, 1.0], vec![1.0, 0.0, 1.0]).unwrap();
        let n = 10;
        let fn_ = approx_step(&f, n);
        for k in 0..10 {
            let mid = k as f64 / 10.0 + 0.05;
            assert!(
                fn_.breakpoints().iter().any(|&b| (b - mid).abs() < 1e-12),
                "block {k}"
            );
        }
        // block integrals preserved
        for k in -100..100 {
            let (lo, hi) = (k as f64 / 10.0, (k + 1) as f64 / 10.0);
            assert!((fn_.integral(lo, hi) - f.integral(lo, hi)).abs() < 1e-12);
        }
    }

    #[test]
    fn hat_spin_matches_step_up_to_sign() {
        let f = StepFunction::new(vec![-0.7, 0.3, 1.1], vec![1.0, -0.4, 0.6, 1.0]).unwrap();
        let n = 8;
        let fn_ = approx_step(&f, n);
        let mu = approx_product(&f, n);
        let sign = hat_spin(&mu, n as f64 + 1.0) * fn_.eval(n as f64 + 1.0);
        for i in 0..2000 {
            let x = -9.0 + 18.0 * (i as f64 + 0.37) / 2000.0;
            assert_eq!(sign * hat_spin(&mu, x), fn_.eval(x), "x = {x}");
        }
    }

    #[test]
    fn theta_one_factorization() {
        let mu = PointMeasure::simple(&[-1.3, 0.0, 0.4, 2.0]).unwrap();
        let d = InitialData::FiniteSpin { atoms: mu.clone() };
        let xs = [-2.0, -1.0, -0.2, 0.1, 1.0, 3.0];
        for (i, &x) in xs.iter().enumerate() {
            for &y in &xs[i + 1..] {
                let s = d.spin_eval(1.0, x, y).unwrap();
                assert_eq!(s, hat_spin(&mu, x) * hat_spin(&mu, y), "({x}, {y})");
            }
        }
    }

    #[test]
    fn mixture_identity_examples() {
        assert!(mixture_initial_identity(0.5, 2, &[-1.0, 1.0]).unwrap());
        assert!(mixture_initial_identity(0.5, 5, &[1.0, 2.0, 3.0, 4.0]).unwrap());
        assert!(mixture_initial_identity(0.0, 2, &[-1.0, 1.0]).unwrap());
        assert!(mixture_initial_identity(1.0, 2, &[-1.0, 1.0]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let d = InitialData::ClosedSetAvoid {
            intervals: vec![(0.0, 1.0)],
            isolated: vec![IsolatedPoint {
                position: 3.0,
                weight: Weight::Infinite,
            }],
        };
        let s = serde_json::to_string(&d).unwrap();
        assert!(s.contains("\"variant\":\"closed_set_avoid\""));
        assert!(s.contains("\"inf\""));
        assert_eq!(serde_json::from_str::<InitialData>(&s).unwrap(), d);
        let m: InitialData = serde_json::from_str(r#"{"variant":"maximal"}"#).unwrap();
        assert_eq!(m, InitialData::Maximal);
        let spin: InitialData =
            serde_json::from_str(r#"{"variant":"finite_spin","atoms":[{"position":-1},{"position":2,"multiplicity":3}]}"#)
                .unwrap();
        if let InitialData::FiniteSpin { atoms } = spin {
            assert_eq!(atoms.total_mass(), 4);
        } else {
            panic!("wrong variant");
        }
        assert!(serde_json::from_str::<InitialData>(
            r#"{"variant":"finite_spin","atoms":[{"position":2},{"position":1}]}"#
        )
        .is_err());
    }
}
