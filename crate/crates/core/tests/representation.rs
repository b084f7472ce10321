use rbsde::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid};
use rbsde::pathsim::{euler_maruyama, hitting_time_index, simulate_brownian};
use rbsde::representation::{
    corollary32_check, corollary33_check, corollary34_config, representation_sweep, short_horizon_terminal,
    McSettings, RepBackend, RepresentationInstance, Verdict,
};
use rbsde::Error;

fn mc(n_paths: usize, replicates: usize, seed: u64) -> McSettings {
    McSettings {
        n_paths,
        replicates,
        seed,
        ..McSettings::default()
    }
}

fn beta_z_instance() -> RepresentationInstance {
    RepresentationInstance::new(
        GeneratorSpec::linear(0.0, vec![0.5], 0.0),
        SdeCoeffs::scalar(0.3, 1.0),
        ObstacleSpec::constant(-10.0),
        0.0,
        1.0,
        vec![0.0],
        1.0,
        vec![2.0],
    )
    .unwrap()
}

#[test]
fn beta_z_with_drift_converges_to_direct_target() {
    let inst = beta_z_instance().with_mc(mc(20_000, 4, 1));
    assert!((inst.target() - 1.6).abs() < 1e-15);
    let rep = representation_sweep(&inst).unwrap();
    assert_eq!(rep.verdict, Verdict::Converged, "{:?}", rep.rows);
    assert!(rep.final_row().abs_error <= rep.abs_tol);
}

#[test]
fn tree_backend_sqrt_cap_beyond_lipschitz() {
    let inst = corollary34_config(GeneratorSpec::sqrt_cap(), ObstacleSpec::constant(-10.0), vec![1.0], 0.25, 0.0, 1.0)
        .unwrap()
        .with_backend(RepBackend::Tree);
    assert_eq!(inst.target(), 0.5);
    let rep = representation_sweep(&inst).unwrap();
    assert_eq!(rep.verdict, Verdict::Converged);
    let slope = rep.loglog_slope.unwrap();
    assert!(slope > 0.5, "slope {slope}");
}

#[test]
fn linear_generator_error_shrinks_linearly() {
    // a y + c has target a eta + c; the error is first order in eps
    let inst = corollary34_config(GeneratorSpec::linear(0.5, vec![0.0], 0.2), ObstacleSpec::constant(-10.0), vec![1.0], 1.0, 0.0, 1.0)
        .unwrap()
        .with_backend(RepBackend::Tree);
    let rep = representation_sweep(&inst).unwrap();
    assert_eq!(rep.verdict, Verdict::Converged);
    assert!((rep.loglog_slope.unwrap() - 1.0).abs() < 0.1);
    assert!((rep.richardson_limit.unwrap() - 0.7).abs() < rep.final_row().abs_error);
}

#[test]
fn robust_in_evaluation_time() {
    let g = GeneratorSpec::new("time-scaled z", 2.0, |t, _, z: &[f64]| (1.0 + t) * 0.5 * z[0]);
    for t in [0.0, 0.25, 0.5] {
        let inst = corollary34_config(g.clone(), ObstacleSpec::constant(-10.0), vec![1.0], 1.0, t, 1.0)
            .unwrap()
            .with_backend(RepBackend::Tree);
        let rep = representation_sweep(&inst).unwrap();
        assert_eq!(rep.verdict, Verdict::Converged, "t = {t}");
    }
    let inst = corollary34_config(g, ObstacleSpec::constant(-10.0), vec![1.0], 1.0, 0.5, 1.0)
        .unwrap()
        .with_mc(mc(20_000, 4, 9));
    assert_eq!(representation_sweep(&inst).unwrap().verdict, Verdict::Converged);
}

#[test]
fn smaller_stopping_time_keeps_limit() {
    let inst = RepresentationInstance::new(
        GeneratorSpec::abs_z(),
        SdeCoeffs::brownian(1),
        ObstacleSpec::constant(0.7),
        0.0,
        1.0,
        vec![0.0],
        1.0,
        vec![1.0],
    )
    .unwrap()
    .with_backend(RepBackend::Tree);
    let plain = representation_sweep(&inst).unwrap();
    let capped = representation_sweep(&inst.clone().with_stop_cap(Some(0.03))).unwrap();
    assert_eq!(plain.verdict, Verdict::Converged);
    assert_eq!(capped.verdict, Verdict::Converged);
    assert_eq!(plain.target, capped.target);
    assert!(capped.rows[0].tau_truncated_fraction > plain.rows[0].tau_truncated_fraction);
}

#[test]
fn lp_norms_agree_on_verdict() {
    let base = corollary34_config(GeneratorSpec::abs_z(), ObstacleSpec::constant(-10.0), vec![1.0], 0.5, 0.0, 1.0)
        .unwrap()
        .with_mc(mc(20_000, 4, 5));
    let a = representation_sweep(&base.clone()).unwrap();
    let b = representation_sweep(&base.with_p_norm(1.5).unwrap()).unwrap();
    assert_eq!(a.verdict, b.verdict);
    for (ra, rb) in a.rows.iter().zip(&b.rows) {
        assert_eq!(ra.estimate, rb.estimate);
        assert!(rb.lp_error >= ra.lp_error - 1e-15);
    }
}

#[test]
fn k_correction_is_necessary_on_binding_obstacle() {
    let c = 1000.0;
    let inst = RepresentationInstance::new(
        GeneratorSpec::constant(-c),
        SdeCoeffs::brownian(1),
        ObstacleSpec::constant(0.95),
        0.0,
        0.0224,
        vec![0.0],
        1.0,
        vec![1.0],
    )
    .unwrap()
    .with_mc(mc(20_000, 4, 3));
    let rep = representation_sweep(&inst).unwrap();
    assert_eq!(rep.verdict, Verdict::Converged, "{:?}", rep.rows);
    assert!(rep.rows[0].tau_truncated_fraction > 0.1);
    assert!(rep.final_row().k_free_error > 5.0 * rep.abs_tol);
}

#[test]
fn stopped_terminals_dominate_barrier() {
    let grid = TimeGrid::uniform(0.0, 0.1, 20).unwrap();
    let b = euler_maruyama(&SdeCoeffs::brownian(1), 0.0, &[0.0], simulate_brownian(&grid, 100_000, 1, 8).unwrap()).unwrap();
    let obs = ObstacleSpec::linear_in_time(0.8, 1.0);
    let tau = hitting_time_index(&b, 1.0, &[1.0], &obs).unwrap();
    let term = short_horizon_terminal(&b, 1.0, &[1.0], &tau, 20, &obs).unwrap();
    let truncated = term.stops.iter().filter(|&&s| s < 20).count();
    assert!(truncated > 10_000);
    for (p, (&v, &s)) in term.values.iter().zip(&term.stops).enumerate() {
        assert!(v >= obs.eval(grid.time(s), b.x(s, p)));
    }
}

#[test]
fn preset_equals_general_construction() {
    let g = GeneratorSpec::abs_z();
    let a = corollary34_config(g.clone(), ObstacleSpec::constant(0.5), vec![1.0], 1.0, 0.0, 1.0)
        .unwrap()
        .with_mc(mc(5_000, 2, 4));
    let b = RepresentationInstance::new(g, SdeCoeffs::brownian(1), ObstacleSpec::constant(0.5), 0.0, 1.0, vec![0.0], 1.0, vec![1.0])
        .unwrap()
        .with_mc(mc(5_000, 2, 4));
    let (ra, rb) = (representation_sweep(&a).unwrap(), representation_sweep(&b).unwrap());
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    ra.write_csv(&mut ca).unwrap();
    rb.write_csv(&mut cb).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn ito_obstacle_with_nonnegative_drift_needs_no_reflection() {
    let drifting = corollary34_config(GeneratorSpec::zero(), ObstacleSpec::ito(0.0, 0.1, vec![0.0]), vec![1.0], 1.0, 0.0, 1.0)
        .unwrap()
        .with_mc(mc(20_000, 4, 6));
    let r = corollary32_check(&drifting).unwrap();
    assert!(r.passed, "{:?}", r.sweep.rows);

    let diffusive = corollary34_config(GeneratorSpec::abs_z(), ObstacleSpec::ito(0.0, 0.0, vec![0.2]), vec![1.0], 1.0, 0.0, 1.0)
        .unwrap()
        .with_mc(mc(20_000, 4, 7));
    let r = corollary32_check(&diffusive).unwrap();
    assert!(r.k_ratio <= r.k_tolerance, "{}", r.k_ratio);
    assert!(r.passed);

    let falling = corollary34_config(GeneratorSpec::zero(), ObstacleSpec::ito(0.0, -0.1, vec![0.0]), vec![1.0], 1.0, 0.0, 1.0).unwrap();
    assert!(matches!(corollary32_check(&falling), Err(Error::Precondition(_))));
}

#[test]
fn bounded_obstacle_keeps_solution_above_level() {
    let inst = corollary34_config(GeneratorSpec::abs_z(), ObstacleSpec::constant(0.0), vec![1.0], 1.0, 0.0, 1.0)
        .unwrap()
        .with_mc(mc(20_000, 4, 2));
    let r = corollary33_check(&inst, 0.0, 1e-3).unwrap();
    assert!(r.passed, "{r:?}");
    assert!(r.min_y >= -1e-3);

    let flat = corollary34_config(GeneratorSpec::zero(), ObstacleSpec::constant(0.0), vec![0.0], 0.5, 0.0, 1.0)
        .unwrap()
        .with_backend(RepBackend::Tree);
    let r = corollary33_check(&flat, 0.0, 1e-12).unwrap();
    assert!(r.sweep.rows.iter().all(|row| row.estimate.abs() < 1e-12));

    let tight = corollary34_config(GeneratorSpec::abs_z(), ObstacleSpec::constant(0.0), vec![8.0], 0.01, 0.0, 1.0)
        .unwrap()
        .with_backend(RepBackend::Tree);
    let r = corollary33_check(&tight, 0.0, 1e-12).unwrap();
    assert!(r.min_y >= 0.0);
    assert!(r.sweep.final_row().tau_truncated_fraction > 0.0);

    let no_a3 = corollary34_config(GeneratorSpec::constant(0.1), ObstacleSpec::constant(0.0), vec![1.0], 1.0, 0.0, 1.0).unwrap();
    assert!(matches!(corollary33_check(&no_a3, 0.0, 1e-3), Err(Error::Precondition(_))));
}

#[test]
fn reruns_are_byte_identical() {
    let inst = beta_z_instance().with_mc(mc(5_000, 2, 77));
    let (mut a, mut b) = (Vec::new(), Vec::new());
    representation_sweep(&inst).unwrap().write_csv(&mut a).unwrap();
    representation_sweep(&inst).unwrap().write_csv(&mut b).unwrap();
    assert_eq!(a, b);
}
