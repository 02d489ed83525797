use cabm::sim::{
    empirical_intensity, replica_rng, sample_final, step, survivor_distribution, trajectory,
    MCEstimate, PointConfig, SimConfig, UniformGrid,
};
use libm::erfc;
use proptest::prelude::*;

fn config_strategy() -> impl Strategy<Value = PointConfig> {
    prop::collection::vec(-3.0..3.0f64, 1..12).prop_map(|mut v| {
        v.sort_by(f64::total_cmp);
        v.dedup();
        PointConfig::new(v).unwrap()
    })
}

fn sim(theta: f64, dt: f64, t_end: f64, seed: u64, reps: usize) -> SimConfig {
    SimConfig {
        theta,
        dt,
        t_end,
        seed,
        reps,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn steps_keep_structure(
        start in config_strategy(),
        theta in prop_oneof![Just(0.0), Just(1.0), 0.0..=1.0f64],
        dt in 1e-4..0.2f64,
        seed in any::<u64>(),
    ) {
        let mut rng = replica_rng(seed, 0);
        let mut cfg = start.clone();
        for _ in 0..40 {
            let next = step(&cfg, theta, dt, &mut rng);
            prop_assert!(next.is_simple());
            prop_assert!(next.len() <= cfg.len());
            if theta == 1.0 {
                prop_assert_eq!(next.len() % 2, cfg.len() % 2);
            }
            if theta == 0.0 {
                prop_assert!(!next.is_empty());
            }
            cfg = next;
        }
    }

    #[test]
    fn same_seed_same_path(start in config_strategy(), theta in 0.0..=1.0f64, seed in any::<u64>(), rep in 0u64..1000) {
        let sc = sim(theta, 0.01, 0.3, seed, 1);
        let a = trajectory(&start, &sc, rep, 5).unwrap();
        let b = trajectory(&start, &sc, rep, 5).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn output_is_independent_of_thread_count() {
    let start = PointConfig::grid(-2.0, 2.0, 0.1).unwrap();
    let sc = sim(0.5, 1e-3, 0.1, 9, 64);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| sample_final(&start, &sc).unwrap())
    };
    let one = run(1);
    let four = run(4);
    assert_eq!(one.len(), 64);
    assert!(one.iter().zip(&four).all(|(a, b)| a
        .positions()
        .iter()
        .map(|x| x.to_bits())
        .eq(b.positions().iter().map(|x| x.to_bits()))));
}

#[test]
fn trajectory_snapshot_times() {
    let start = PointConfig::new(vec![0.0]).unwrap();
    let traj = trajectory(&start, &sim(0.0, 0.01, 1.0, 1, 1), 0, 4).unwrap();
    let times: Vec<f64> = traj.iter().map(|p| p.0).collect();
    assert_eq!(times, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    assert_eq!(traj[0].1, start);
}

#[test]
fn free_particle_has_variance_two_t() {
    let start = PointConfig::new(vec![0.0]).unwrap();
    let sc = sim(0.0, 0.05, 0.8, 3, 20_000);
    let samples = sample_final(&start, &sc).unwrap();
    let sq: Vec<f64> = samples.iter().map(|c| c.positions()[0].powi(2)).collect();
    let est = MCEstimate::from_values(&sq, sc.seed);
    assert!((est.mean - 1.6).abs() <= 4.0 * est.stderr, "{est:?}");
}

/// The bridge correction makes pair collisions exact at any step size: two
/// annihilating particles at distance `d` are gone by time `t` with
/// probability `erfc(d / √(8t))`.
#[test]
fn pair_meeting_probability_is_step_free() {
    for dt in [0.5, 0.1, 0.01] {
        let sc = sim(1.0, dt, 0.5, 11, 20_000);
        let (p0, _) = survivor_distribution(2, 1.0, &sc).unwrap();
        let exact = erfc(1.0 / 2.0);
        assert!(
            (p0.mean - exact).abs() <= 4.0 * p0.stderr,
            "dt {dt}: {p0:?} vs {exact}"
        );
    }
}

#[test]
fn far_particles_spread_as_free_gaussians() {
    let start = PointConfig::new(vec![-3.0, 3.0]).unwrap();
    let t = 0.5;
    let sc = sim(0.0, 1e-2, t, 5, 20_000);
    let samples = sample_final(&start, &sc).unwrap();
    let grid = UniformGrid::new(-5.0, 5.0, 20).unwrap();
    let hist = empirical_intensity(&samples, grid).unwrap();
    let gauss = |x: f64, m: f64| {
        (-(x - m).powi(2) / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t).sqrt()
    };
    for b in 0..grid.bins {
        let (a, c) = grid.edges(b);
        // Simpson average of the two bumps over the bin
        let f = |x: f64| gauss(x, -3.0) + gauss(x, 3.0);
        let avg = (f(a) + 4.0 * f(0.5 * (a + c)) + f(c)) / 6.0;
        let tol = 4.0 * hist.stderr[b] + 0.01 * avg + 1e-3;
        assert!(
            (hist.density[b] - avg).abs() <= tol,
            "bin {b}: {} vs {avg}",
            hist.density[b]
        );
    }
}

#[test]
fn close_annihilating_pair_vanishes() {
    let (p0, p1) = survivor_distribution(2, 1e-3, &sim(1.0, 1e-3, 0.1, 2, 2000)).unwrap();
    assert!(p0.mean >= 0.99);
    assert_eq!(p1.mean, 0.0);
}
