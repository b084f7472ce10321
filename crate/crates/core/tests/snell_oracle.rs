use proptest::prelude::*;
use rbsde::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid};
use rbsde::solvers::{enumerate_snell, solve_tree, RbsdeProblem, SchemeOptions, Terminal};

fn instance(depth: usize, c: [f64; 6], sigma: f64, drift: f64) -> RbsdeProblem {
    let [a0, a1, w, b0, b1, v] = c;
    let obs = ObstacleSpec::state("wave", move |t, x: &[f64]| b0 + b1 * (v * x[0] + t).cos());
    let o = obs.clone();
    let xi = Terminal::new("random", move |x| (a0 + a1 * (w * x[0]).sin() + 0.3 * x[0] * x[0]).max(o.eval(1.0, x)));
    RbsdeProblem::new(
        GeneratorSpec::zero(),
        xi,
        obs,
        SdeCoeffs::scalar(drift, sigma),
        TimeGrid::uniform(0.0, 1.0, depth).unwrap(),
        vec![0.1],
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tree_root_equals_path_enumeration(
        depth in 1usize..=12,
        c in prop::array::uniform6(-2.0f64..2.0),
        sigma in 0.05f64..1.5,
        drift in -0.5f64..0.5,
    ) {
        let p = instance(depth, c, sigma, drift);
        let tree = solve_tree(&p, SchemeOptions::default()).unwrap().origin_y();
        let snell = enumerate_snell(&p).unwrap();
        prop_assert!((tree - snell).abs() <= 1e-12, "tree {tree} vs enumeration {snell}");
    }
}
