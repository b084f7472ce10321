use rbsde::applications::{
    apriori_check, converse_comparison, flatness_check, self_financing_check, zero_interest_check, CheckSettings,
    ConverseSettings, ConverseVerdict, Probe, ProbeOrder,
};
use rbsde::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid, NO_OBSTACLE};
use rbsde::representation::{McSettings, RepBackend};
use rbsde::solvers::{solve_tree, RbsdeProblem, SchemeOptions, Terminal};
use rbsde::Error;

fn tree_settings() -> ConverseSettings {
    ConverseSettings {
        backend: RepBackend::Tree,
        ..ConverseSettings::default()
    }
}

fn probes(etas: &[f64]) -> Vec<Probe> {
    etas.iter()
        .zip([0.0, 0.25, 0.5].iter().cycle())
        .zip([1.0, -0.5, 2.0].iter().cycle())
        .map(|((&eta, &t), &z)| Probe { t, eta, z: vec![z] })
        .collect()
}

#[test]
fn identical_generators_are_equal() {
    let g = GeneratorSpec::abs_z();
    let r = converse_comparison(&g, &g, &ObstacleSpec::constant(-10.0), &probes(&[0.5, 1.0, 2.0]), &tree_settings()).unwrap();
    assert_eq!(r.verdict, ConverseVerdict::Equal);
    assert!(r.probes.iter().all(|p| p.difference == 0.0));
}

#[test]
fn constant_offset_is_recovered() {
    let g2 = GeneratorSpec::abs_z();
    let g1 = g2.shifted(0.1);
    let settings = ConverseSettings {
        mc: McSettings {
            n_paths: 20_000,
            replicates: 4,
            ..McSettings::default()
        },
        diff_tol: 0.01,
        ..ConverseSettings::default()
    };
    let r = converse_comparison(&g1, &g2, &ObstacleSpec::constant(-10.0), &probes(&[0.5, 1.0]), &settings).unwrap();
    assert_eq!(r.verdict, ConverseVerdict::FirstDominates);
    for p in &r.probes {
        assert!((p.difference - 0.1).abs() <= 0.02, "{p:?}");
        assert!(p.forward.as_ref().unwrap().holds);
    }
    assert!(r.consistent);
}

#[test]
fn crossing_generators_ordered_above_obstacle() {
    let up = GeneratorSpec::linear(1.0, vec![0.0], 0.0);
    let down = GeneratorSpec::linear(-1.0, vec![0.0], 0.0);
    let obs = ObstacleSpec::constant(0.5);
    let r = converse_comparison(&up, &down, &obs, &probes(&[0.6, 1.0, 2.0]), &tree_settings()).unwrap();
    assert_eq!(r.verdict, ConverseVerdict::FirstDominates);
    assert!(r.probes.iter().all(|p| p.order == ProbeOrder::Greater));
    assert!(r.probes.iter().all(|p| p.forward.as_ref().is_some_and(|f| f.holds)));

    let below = converse_comparison(&up, &down, &obs, &probes(&[0.4]), &tree_settings());
    assert!(matches!(below, Err(Error::Precondition(_))));

    // without the obstacle the same pair crosses at eta = 0
    let free = ObstacleSpec::constant(-10.0);
    let r = converse_comparison(&up, &down, &free, &probes(&[-1.0, 1.0]), &tree_settings()).unwrap();
    assert_eq!(r.verdict, ConverseVerdict::Crossing);
}

#[test]
fn self_financing_both_directions() {
    let s = CheckSettings::default();
    let ok = self_financing_check(&GeneratorSpec::new("abs-y-plus-abs-z", 1.0, |_, y, z: &[f64]| y.abs() + z[0].abs()), -1.0, &s).unwrap();
    assert!(ok.holds && ok.solution_deviation <= 1e-8, "{ok:?}");
    let zero = self_financing_check(&GeneratorSpec::zero(), -1.0, &s).unwrap();
    assert!(zero.holds && zero.solution_deviation == 0.0);
    let bad = self_financing_check(&GeneratorSpec::abs_z().shifted(0.2), -1.0, &s).unwrap();
    assert!(!bad.generator_condition && !bad.solution_condition && bad.probe_condition == Some(false));
    // constant driver closed form: Y_0 = 0.2 T
    assert!((bad.solution_deviation - 0.2).abs() < 1e-9);
}

#[test]
fn zero_interest_both_directions() {
    let s = CheckSettings::default();
    let obs = ObstacleSpec::constant(0.0);
    let ok = zero_interest_check(&GeneratorSpec::abs_z(), &obs, 0.0, &[1.0, 0.0, 3.0], &s).unwrap();
    for r in &ok {
        assert!(r.holds && r.solution_deviation <= 1e-8, "{r:?}");
    }
    let g = GeneratorSpec::linear(0.1, vec![0.0], 0.0).sum(&GeneratorSpec::abs_z());
    let bad = zero_interest_check(&g, &obs, 0.0, &[1.0], &s).unwrap();
    assert!(!bad[0].generator_condition && !bad[0].solution_condition);
    let est = bad[0].probe_limits[0].estimate;
    assert!((est - 0.1).abs() < 0.01, "{est}");
}

#[test]
fn flatness_both_directions() {
    let s = CheckSettings::default();
    let rising = ObstacleSpec::linear_in_time(-0.5, 1.0);
    let r = flatness_check(&GeneratorSpec::abs_z(), &rising, 1.0, 0.0, &s).unwrap();
    assert_eq!(r.sigma_idx, s.n_steps);
    assert!(r.check.holds);
    let r = flatness_check(&GeneratorSpec::zero(), &rising, 0.3, 0.0, &s).unwrap();
    assert!((r.sigma - 0.8).abs() < 1e-12);
    assert!(r.check.holds);
    let bad = flatness_check(&GeneratorSpec::linear(1.0, vec![0.0], 0.0), &rising, 1.0, 0.0, &s).unwrap();
    assert!(!bad.check.generator_condition && !bad.check.solution_condition);
    assert_eq!(bad.check.probe_condition, Some(false));
}

fn apriori_family(n: usize) -> Vec<RbsdeProblem> {
    let grid = TimeGrid::uniform(0.0, 1.0, n).unwrap();
    vec![
        RbsdeProblem::new(GeneratorSpec::zero(), Terminal::linear(0.0, vec![1.0]), ObstacleSpec::constant(NO_OBSTACLE), SdeCoeffs::brownian(1), grid.clone(), vec![0.0]).unwrap(),
        RbsdeProblem::new(GeneratorSpec::discount(0.06), Terminal::put_on_log(1.0), ObstacleSpec::put_on_log(1.0), SdeCoeffs::gbm_log(0.06, 0.4), grid.clone(), vec![0.0]).unwrap(),
        RbsdeProblem::new(GeneratorSpec::abs_z().shifted(0.2), Terminal::constant(0.0), ObstacleSpec::constant(-1.0), SdeCoeffs::brownian(1), grid.clone(), vec![0.0]).unwrap(),
        RbsdeProblem::new(GeneratorSpec::zero(), Terminal::constant(0.0), ObstacleSpec::linear_in_time(1.0, -1.0), SdeCoeffs::brownian(1), grid, vec![0.0]).unwrap(),
    ]
}

#[test]
fn apriori_ratio_is_stable_under_refinement() {
    let max_ratio = |n: usize| {
        apriori_family(n)
            .iter()
            .map(|p| {
                let s = solve_tree(p, SchemeOptions::default()).unwrap();
                let r = apriori_check(p, &s, 0, n, 20_000, 1).unwrap();
                assert!(!r.flagged);
                r.ratio
            })
            .fold(0.0, f64::max)
    };
    let (a, b) = (max_ratio(100), max_ratio(200));
    assert!(a.is_finite() && a > 0.0);
    assert!((b - a).abs() / a < 0.2, "{a} vs {b}");
}

#[test]
fn apriori_brownian_terminal_within_doob_envelope() {
    let p = &apriori_family(100)[0];
    let s = solve_tree(p, SchemeOptions::default()).unwrap();
    let r = apriori_check(p, &s, 0, 100, 20_000, 2).unwrap();
    // Y = B, Z = 1: lhs = E sup B^2 + T <= 5 T, rhs = E B_T^2 = T
    assert!((r.rhs - 1.0).abs() < 0.05);
    assert!(r.ratio > 2.0 && r.ratio <= 5.0, "{}", r.ratio);
}
