use std::sync::{Arc, Mutex};

use proptest::prelude::*;
use rbsde::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid, NO_OBSTACLE};
use rbsde::pathsim::{euler_maruyama, hitting_time_index, simulate_brownian};
use rbsde::solvers::{
    penalty_sweep, solve_lsmc, solve_lsmc_unreflected, solve_tree, solve_tree_unreflected, Backend, RbsdeProblem,
    SchemeOptions, Terminal,
};

fn put_problem(gen: GeneratorSpec, obs: ObstacleSpec, n: usize) -> RbsdeProblem {
    RbsdeProblem::new(
        gen,
        Terminal::put_on_log(1.0),
        obs,
        SdeCoeffs::gbm_log(0.05, 0.3),
        TimeGrid::uniform(0.0, 1.0, n).unwrap(),
        vec![0.0],
    )
    .unwrap()
}

/// Smallest obstacle value over the lattice states alive at time `t`.
fn lowest_live_obstacle(obs: &ObstacleSpec, t: f64) -> f64 {
    let (sigma, dt) = (0.3, 1.0 / 60.0);
    let drift = 0.05 - 0.5 * sigma * sigma;
    let i = (t / dt).round() as i64;
    (0..=i)
        .map(|j| obs.eval(t, &[drift * t + sigma * (2 * j - i) as f64 * dt.sqrt()]))
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn generator_below_obstacle_is_never_seen() {
    let obs = ObstacleSpec::put_on_log(1.0);
    let seen = Arc::new(Mutex::new(Vec::new()));
    let s = seen.clone();
    let probe = GeneratorSpec::new("recording discount", 0.05, move |t, y, _| {
        s.lock().unwrap().push((t, y));
        -0.05 * y
    });
    solve_tree(&put_problem(probe, obs.clone(), 60), SchemeOptions::default()).unwrap();
    let seen = seen.lock().unwrap();
    assert!(!seen.is_empty());
    assert!(seen.iter().all(|&(t, y)| y >= lowest_live_obstacle(&obs, t)));

    // altering g strictly below the obstacle leaves the solution bit-identical
    let base = solve_tree(&put_problem(GeneratorSpec::discount(0.05), obs.clone(), 60), SchemeOptions::default()).unwrap();
    let o = obs.clone();
    let altered = GeneratorSpec::new("altered below", 0.05, move |t, y, _| {
        if y < lowest_live_obstacle(&o, t) {
            1e6
        } else {
            -0.05 * y
        }
    });
    let alt = solve_tree(&put_problem(altered, obs, 60), SchemeOptions::default()).unwrap();
    for (a, b) in base.y.iter().flatten().zip(alt.y.iter().flatten()) {
        assert_eq!(a.to_bits(), b.to_bits());
    }
}

#[test]
fn far_obstacle_reduces_to_unreflected_bitwise() {
    let gens = [GeneratorSpec::abs_z(), GeneratorSpec::linear(-0.2, vec![0.4], 0.1), GeneratorSpec::sqrt_cap()];
    for g in gens {
        let p = put_problem(g, ObstacleSpec::constant(NO_OBSTACLE), 80);
        let r = solve_tree(&p, SchemeOptions::default()).unwrap();
        let u = solve_tree_unreflected(&p, SchemeOptions::default()).unwrap();
        assert!(r.dk.iter().flatten().all(|&v| v == 0.0));
        for (a, b) in r.y.iter().flatten().zip(u.y.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        for (a, b) in r.z.iter().flatten().zip(u.z.iter().flatten()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn far_obstacle_lsmc_matches_unreflected() {
    let p = put_problem(GeneratorSpec::discount(0.05), ObstacleSpec::constant(NO_OBSTACLE), 20);
    let inc = simulate_brownian(&p.grid, 20_000, 1, 3).unwrap();
    let b = euler_maruyama(&p.forward, 0.0, &p.x0, inc).unwrap();
    let r = solve_lsmc(&p, &b, 3, SchemeOptions::default()).unwrap();
    let u = solve_lsmc_unreflected(&p, &b, 3, SchemeOptions::default()).unwrap();
    assert_eq!(r.origin_y().to_bits(), u.origin_y().to_bits());
    assert_eq!(r.expected_k_total(), 0.0);
}

#[test]
fn penalization_increases_toward_reflection() {
    let problems = [
        put_problem(GeneratorSpec::discount(0.05), ObstacleSpec::put_on_log(1.0), 400),
        RbsdeProblem::new(
            GeneratorSpec::zero(),
            Terminal::constant(0.0),
            ObstacleSpec::linear_in_time(1.0, -1.0),
            SdeCoeffs::brownian(1),
            TimeGrid::uniform(0.0, 1.0, 400).unwrap(),
            vec![0.0],
        )
        .unwrap(),
    ];
    for p in &problems {
        let s = penalty_sweep(p, Backend::Tree, &[4.0, 16.0, 64.0], SchemeOptions::default()).unwrap();
        assert!(s.monotone, "{s:?}");
        assert!(s.y0.iter().all(|&y| y <= s.reflected_y0 + 1e-12));
    }
}

#[test]
fn gbm_mean_matches_exponential_growth() {
    let grid = TimeGrid::uniform(0.0, 1.0, 100).unwrap();
    let inc = simulate_brownian(&grid, 200_000, 1, 11).unwrap();
    let b = euler_maruyama(&SdeCoeffs::geometric(0.1, 0.2), 0.0, &[1.0], inc).unwrap();
    let m: f64 = (0..b.n_paths()).map(|p| b.x(100, p)[0]).sum::<f64>() / b.n_paths() as f64;
    // Euler mean is (1 + m dt)^N exactly; sampling noise 0.2 / sqrt(2e5)
    let exact = (1.0f64 + 0.1 * 0.01).powi(100);
    assert!((m - exact).abs() < 4.0 * 0.23 / (2e5f64).sqrt(), "{m} vs {exact}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn hitting_index_matches_scan(seed in 0u64..1000, eta in 0.05f64..1.0, q in 0.2f64..3.0, slope in -1.0f64..1.0) {
        let grid = TimeGrid::uniform(0.0, 0.5, 25).unwrap();
        let inc = simulate_brownian(&grid, 64, 1, seed).unwrap();
        let b = euler_maruyama(&SdeCoeffs::brownian(1), 0.0, &[0.0], inc).unwrap();
        let obs = ObstacleSpec::linear_in_time(0.0, slope);
        let tau = hitting_time_index(&b, eta, &[q], &obs).unwrap();
        for p in 0..64 {
            let scan = (1..=25)
                .find(|&i| eta + q * b.x(i, p)[0] <= obs.eval(grid.time(i), b.x(i, p)))
                .unwrap_or(25);
            prop_assert_eq!(tau[p], scan);
        }
    }

    #[test]
    fn tree_solution_dominates_obstacle(k in 0.6f64..1.6, r in 0.0f64..0.1, vol in 0.1f64..0.6) {
        let p = RbsdeProblem::new(
            GeneratorSpec::discount(r),
            Terminal::put_on_log(k),
            ObstacleSpec::put_on_log(k),
            SdeCoeffs::gbm_log(r, vol),
            TimeGrid::uniform(0.0, 1.0, 64).unwrap(),
            vec![0.0],
        ).unwrap();
        let s = solve_tree(&p, SchemeOptions::default()).unwrap();
        prop_assert!(s.max_obstacle_deficit() <= 0.0);
        prop_assert!(s.dk.iter().flatten().all(|&v| v >= 0.0));
        for (i, lvl) in s.dk.iter().enumerate() {
            for (j, &dk) in lvl.iter().enumerate() {
                if dk > 0.0 {
                    prop_assert_eq!(s.y[i][j], s.obstacle[i][j]);
                }
            }
        }
    }
}
