//! American put on a log-price state against an independent dense
//! Cox–Ross–Rubinstein lattice and against regression Monte Carlo.

use rbsde::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid};
use rbsde::pathsim::{euler_maruyama, simulate_brownian};
use rbsde::solvers::{solve_lsmc, solve_tree, RbsdeProblem, SchemeOptions, Terminal};

const R: f64 = 0.06;
const VOL: f64 = 0.4;
const S0: f64 = 100.0;
const STRIKE: f64 = 100.0;
const T: f64 = 0.5;

/// Classic CRR lattice on the price with risk-neutral probabilities.
fn crr_put(steps: usize) -> f64 {
    let dt = T / steps as f64;
    let u = (VOL * dt.sqrt()).exp();
    let d = 1.0 / u;
    let disc = (-R * dt).exp();
    let p = ((R * dt).exp() - d) / (u - d);
    let mut v: Vec<f64> = (0..=steps)
        .map(|j| (STRIKE - S0 * u.powi(j as i32) * d.powi((steps - j) as i32)).max(0.0))
        .collect();
    for i in (0..steps).rev() {
        for j in 0..=i {
            let s = S0 * u.powi(j as i32) * d.powi((i - j) as i32);
            let cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            v[j] = cont.max(STRIKE - s);
        }
    }
    v[0]
}

fn problem(steps: usize) -> RbsdeProblem {
    RbsdeProblem::new(
        GeneratorSpec::discount(R),
        Terminal::put_on_log(STRIKE),
        ObstacleSpec::put_on_log(STRIKE),
        SdeCoeffs::gbm_log(R, VOL),
        TimeGrid::uniform(0.0, T, steps).unwrap(),
        vec![S0.ln()],
    )
    .unwrap()
}

#[test]
fn tree_matches_dense_crr() {
    let oracle = crr_put(10_000);
    let tree = solve_tree(&problem(2000), SchemeOptions::default()).unwrap().origin_y();
    let rel = (tree - oracle).abs() / oracle;
    println!("tree {tree:.6} crr {oracle:.6} rel {rel:.2e}");
    assert!(rel <= 1e-3);
}

#[test]
fn lsmc_close_to_tree() {
    let tree = solve_tree(&problem(2000), SchemeOptions::default()).unwrap().origin_y();
    let p = problem(50);
    let inc = simulate_brownian(&p.grid, 100_000, 1, 2024).unwrap();
    let bundle = euler_maruyama(&p.forward, 0.0, &p.x0, inc).unwrap();
    let lsmc = solve_lsmc(&p, &bundle, 3, SchemeOptions::default()).unwrap().origin_y();
    let rel = (lsmc - tree).abs() / tree;
    println!("lsmc {lsmc:.6} tree {tree:.6} rel {rel:.2e}");
    assert!(rel <= 1e-2);
}
