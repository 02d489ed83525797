use cabm::entrance::{InitialData, IsolatedPoint, PointMeasure, StepFunction, Weight};
use cabm::kernel::{heat_residual, ScalarKernel};
use libm::erf;
use proptest::prelude::*;

fn sorted_distinct(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(f64::total_cmp);
    v.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    v
}

/// Data valid for every `θ` in the returned range.
fn data_strategy() -> impl Strategy<Value = (InitialData, f64)> {
    let spin = (prop::collection::vec(-2.0..2.0f64, 0..5), 0.0..=1.0f64).prop_map(|(v, th)| {
        let atoms = PointMeasure::simple(&sorted_distinct(v)).unwrap();
        (InitialData::FiniteSpin { atoms }, th)
    });
    let product = prop::collection::vec((-2.0..2.0f64, -1.0..=1.0f64), 1..4).prop_map(|v| {
        let bps = sorted_distinct(v.iter().map(|p| p.0).collect());
        let mut vals: Vec<f64> = v.iter().map(|p| p.1).collect();
        vals.resize(bps.len() + 1, 0.5);
        let f = StepFunction::new(bps, vals).unwrap();
        (InitialData::Product { f }, 1.0)
    });
    let avoid = (
        -2.0..0.0f64,
        0.1..1.0f64,
        0.5..2.0f64,
        1u32..3,
        0.0..0.99f64,
    )
        .prop_map(|(a, len, p, w, th)| {
            let data = InitialData::ClosedSetAvoid {
                intervals: vec![(a, a + len)],
                isolated: vec![IsolatedPoint {
                    position: a + len + p,
                    weight: Weight::Finite(w),
                }],
            };
            (data, th)
        });
    prop_oneof![
        spin,
        product,
        avoid,
        (0.0..=1.0f64).prop_map(|th| (InitialData::Maximal, th))
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn diagonal_is_one((data, theta) in data_strategy(), t in 0.01..3.0f64, x in -3.0..3.0f64) {
        let k = ScalarKernel::new(data, theta).unwrap();
        prop_assert!((k.value(t, x, x).unwrap() - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn bounded_by_one(
        (data, theta) in data_strategy(),
        t in 0.01..3.0f64,
        x in -3.0..3.0f64,
        w in 0.0..4.0f64,
    ) {
        let k = ScalarKernel::new(data, theta).unwrap();
        prop_assert!(k.value(t, x, x + w).unwrap().abs() <= 1.0 + 1e-8);
    }

    #[test]
    fn derivatives_match_differences(
        (data, theta) in data_strategy(),
        t in 0.1..2.0f64,
        x in -2.5..2.5f64,
        w in 0.05..3.0f64,
    ) {
        let k = ScalarKernel::new(data, theta).unwrap();
        let y = x + w;
        let h = 1e-4;
        let v = |x: f64, y: f64| k.value(t, x, y).unwrap();
        let e = k.eval(t, x, y).unwrap();
        let dx = (v(x + h, y) - v(x - h, y)) / (2.0 * h);
        let dy = (v(x, y + h) - v(x, y - h)) / (2.0 * h);
        let dxy = (v(x + h, y + h) - v(x + h, y - h) - v(x - h, y + h) + v(x - h, y - h)) / (4.0 * h * h);
        prop_assert!((e.dx - dx).abs() <= 1e-5, "dx {} vs {}", e.dx, dx);
        prop_assert!((e.dy - dy).abs() <= 1e-5, "dy {} vs {}", e.dy, dy);
        prop_assert!((e.dxy - dxy).abs() <= 1e-5, "dxy {} vs {}", e.dxy, dxy);
    }

    /// `f ≡ c²` (a constant product) reduces to one error function in `y - x`.
    #[test]
    fn constant_data_reduces_to_erf(c in -1.0..=1.0f64, t in 0.05..3.0f64, x in -2.0..2.0f64, w in 0.0..4.0f64) {
        let data = InitialData::Product { f: StepFunction::constant(c) };
        let k = ScalarKernel::new(data, 1.0).unwrap();
        let oracle = 1.0 + (c * c - 1.0) * erf(w / (8.0 * t).sqrt());
        prop_assert!((k.value(t, x, x + w).unwrap() - oracle).abs() <= 1e-10);
    }

    #[test]
    fn fast_path_agrees_with_quadrature(
        (data, theta) in data_strategy(),
        t in 0.1..2.0f64,
        x in -2.0..2.0f64,
        w in 0.1..3.0f64,
    ) {
        let k = ScalarKernel::new(data, theta).unwrap();
        let fast = k.eval(t, x, x + w).unwrap();
        let quad = k.eval_quadrature(t, x, x + w).unwrap();
        prop_assert!(quad.converged());
        prop_assert!(fast.max_abs_diff(&quad) <= 1e-6, "{:?} vs {:?}", fast, quad);
    }
}

#[test]
fn small_time_recovers_initial_data() {
    let cases = [
        (InitialData::finite_spin(&[-1.0, 0.0, 2.0]).unwrap(), 0.5),
        (
            InitialData::Product {
                f: StepFunction::new(vec![-1.0, 0.0, 1.5], vec![1.0, 0.3, -0.5, 1.0]).unwrap(),
            },
            1.0,
        ),
        (
            InitialData::ClosedSetAvoid {
                intervals: vec![(-0.5, 0.2)],
                isolated: vec![IsolatedPoint {
                    position: 1.0,
                    weight: Weight::Finite(2),
                }],
            },
            0.4,
        ),
    ];
    let points = [
        (-1.5, -0.7),
        (-0.4, 0.5),
        (-0.8, 1.8),
        (0.5, 2.5),
        (1.2, 1.7),
        (-3.0, 3.0),
    ];
    for (data, theta) in cases {
        let k = ScalarKernel::new(data.clone(), theta).unwrap();
        for &(x, y) in &points {
            let target = data.spin_eval(theta, x, y).unwrap();
            for t in [1e-4, 1e-3] {
                let v = k.value(t, x, y).unwrap();
                assert!(
                    (v - target).abs() <= 1e-3,
                    "{data:?} at ({x}, {y}), t = {t}: {v} vs {target}"
                );
            }
        }
    }
}

#[test]
fn maximal_density_is_free_of_the_data() {
    for theta in [0.0, 0.5, 1.0] {
        let k = ScalarKernel::new(InitialData::Maximal, theta).unwrap();
        for t in [0.1, 1.0, 4.0] {
            let rho = k.density(t, 0.3).unwrap();
            let oracle = 1.0 / ((1.0 + theta) * (2.0 * std::f64::consts::PI * t).sqrt());
            assert!((rho - oracle).abs() <= 1e-12 * oracle, "{rho} vs {oracle}");
            assert!((k.intensity(t, &[0.3]).unwrap() - rho).abs() <= 1e-14);
        }
    }
}

#[test]
fn heat_residual_decays_quadratically() {
    let k = ScalarKernel::new(InitialData::finite_spin(&[-1.0, 0.0, 2.0]).unwrap(), 0.5).unwrap();
    for &(t, x, y) in &[(0.5, -0.7, 0.6), (1.0, -1.0, 1.5), (0.3, 0.2, 1.4)] {
        let coarse = heat_residual(&k, t, x, y, 0.04).unwrap();
        let fine = heat_residual(&k, t, x, y, 0.02).unwrap();
        assert!(heat_residual(&k, t, x, y, 1e-3).unwrap() <= 1e-4);
        assert!(
            (coarse / fine - 4.0).abs() <= 0.5,
            "ratio {} at {t} {x} {y}",
            coarse / fine
        );
    }
}

#[test]
fn single_particle_two_point_intensity_vanishes() {
    // one particle can never fill two sites
    let k = ScalarKernel::new(InitialData::finite_spin(&[0.0]).unwrap(), 0.0).unwrap();
    for &(x, y) in &[(-0.5, 0.5), (-1.0, 0.2), (0.1, 1.3)] {
        assert!(k.intensity(0.7, &[x, y]).unwrap().abs() <= 1e-12);
    }
    let rho = k.intensity(0.7, &[0.4]).unwrap();
    let gauss = (-0.16f64 / 2.8).exp() / (2.8 * std::f64::consts::PI).sqrt();
    assert!((rho - gauss).abs() <= 1e-12);
}
