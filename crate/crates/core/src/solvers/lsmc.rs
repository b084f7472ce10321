//! Least-squares Monte Carlo: conditional expectations by per-step
//! regression on simulated forward paths.
//!
//! `Z` is regressed from `(Y_{i+1} - E_i) dW_i / dt`, the fitted `E_i` being
//! subtracted first to reduce variance.
//!
//! With [`LsmcValue::Pathwise`] the response handed to the next regression
//! is the realised path value: it continues as `Y_{i+1} + g dt` where the
//! fitted value stays above the obstacle and restarts from `L` where it does
//! not. The stored `Y` and `dK` are always the fitted ones.

use rayon::prelude::*;

use super::regression::Design;
use super::{step_value, LsmcValue, Mode, RbsdeProblem, SchemeOptions};
use crate::error::{Error, Result};
use crate::model::{dot, mean, DiscreteSolution, GeneratorSpec, Layout, ObstacleSpec, RegressionFallback, SolverFlags, StopMask};
use crate::pathsim::PathBundle;

pub(crate) struct LsmcRun<'a> {
    pub gen: &'a GeneratorSpec,
    pub obs: &'a ObstacleSpec,
    pub bundle: &'a PathBundle,
    /// Terminal node of the equation.
    pub last: usize,
    /// Per-path value at its stop node (or at `last`).
    pub terminal: &'a [f64],
    /// Per-path stop node, `<= last`.
    pub stops: Option<&'a [usize]>,
    pub mode: Mode,
    pub degree: usize,
    pub opts: SchemeOptions,
    /// Keep the full `(Y, Z, dK, L)` arrays.
    pub keep: bool,
}

pub(crate) struct Kept {
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub dk: Vec<Vec<f64>>,
    pub obstacle: Vec<Vec<f64>>,
}

pub(crate) struct LsmcOutput {
    pub y0: f64,
    /// `K` accumulated along each path up to its stop.
    pub k_paths: Vec<f64>,
    pub fallbacks: Vec<RegressionFallback>,
    /// Smallest fitted `Y` over every live node and terminal value.
    pub min_y: f64,
    pub kept: Option<Kept>,
}

pub(crate) fn lsmc_backward(run: &LsmcRun<'_>) -> Result<LsmcOutput> {
    let b = run.bundle;
    let grid = b.grid();
    let (n, d, np) = (b.n(), b.d(), b.n_paths());
    if b.origin_idx() != 0 {
        return Err(Error::config("regression solver needs paths that start at the first grid node"));
    }
    if run.last == 0 || run.last > grid.n_steps() {
        return Err(Error::config(format!("terminal node {} outside the path grid", run.last)));
    }
    if run.terminal.len() != np || run.stops.is_some_and(|s| s.len() != np) {
        return Err(Error::config("terminal values and stop indices need one entry per path"));
    }
    let stop = |p: usize| run.stops.map_or(run.last, |s| s[p].min(run.last));

    let pathwise = run.opts.lsmc_value == LsmcValue::Pathwise;
    let mut y = run.terminal.to_vec();
    let mut resp = if pathwise { run.terminal.to_vec() } else { Vec::new() };
    let mut k_paths = vec![0.0; np];
    let mut fallbacks = Vec::new();
    let mut kept = run.keep.then(|| {
        let times = grid.nodes();
        let obstacle = (0..=run.last)
            .map(|i| (0..np).map(|p| run.obs.eval(times[i], b.x(i, p))).collect())
            .collect();
        Kept {
            y: vec![Vec::new(); run.last + 1],
            z: vec![Vec::new(); run.last],
            dk: vec![Vec::new(); run.last],
            obstacle,
        }
    });
    if let Some(k) = kept.as_mut() {
        k.y[run.last] = y.clone();
    }
    let mut e_full = vec![0.0; np];
    let mut min_y = y.iter().copied().fold(f64::INFINITY, f64::min);

    for i in (0..run.last).rev() {
        let t = grid.time(i);
        let dt = grid.dt(i);
        let active: Vec<usize> = (0..np).filter(|&p| stop(p) > i).collect();
        let mut z_step = if run.keep { vec![0.0; np * d] } else { Vec::new() };
        let mut dk_step = if run.keep { vec![0.0; np] } else { Vec::new() };
        if !active.is_empty() {
            let x = b.x_node(i);
            let (design, feat, nf) = select_design(run, x, n, t, &active);
            if design.degree_used < run.degree && design.n_components() > 0 {
                fallbacks.push(RegressionFallback {
                    step: i,
                    requested_degree: run.degree,
                    used_degree: design.degree_used,
                });
            }
            let f: &[f64] = feat.as_deref().unwrap_or(x);
            let r: &[f64] = if pathwise { &resp } else { &y };
            let m = design.len();
            let phi = design.feature_rows(f, nf, &active);
            let ce = design.fit_rows(&phi, &active, |p| r[p]);
            let e: Vec<f64> = phi.par_chunks(m).map(|row| dot(row, &ce)).collect();
            for (&p, &v) in active.iter().zip(&e) {
                e_full[p] = v;
            }
            let cz: Vec<Vec<f64>> = (0..d)
                .map(|c| design.fit_rows(&phi, &active, |p| (r[p] - e_full[p]) * b.dw(i, p)[c] / dt))
                .collect();
            let updates: Vec<(f64, f64, f64, [f64; 8])> = active
                .par_iter()
                .zip(&e)
                .zip(phi.par_chunks(m))
                .map(|((&p, &ev), row)| {
                    let xp = &x[p * n..(p + 1) * n];
                    let mut zbuf = [0.0; 8];
                    let mut zv = vec![0.0; if d > 8 { d } else { 0 }];
                    let z: &mut [f64] = if d <= 8 { &mut zbuf[..d] } else { &mut zv };
                    for (c, coef) in cz.iter().enumerate() {
                        z[c] = dot(row, coef);
                    }
                    let l = run.obs.eval(t, xp);
                    let (yv, inc) = step_value(run.gen, run.mode, t, ev, l, z, dt, run.opts.picard_passes);
                    let realised = if !pathwise {
                        0.0
                    } else if run.mode == Mode::Reflect && inc > 0.0 {
                        l
                    } else {
                        // shift the realised value by the same driver and push
                        r[p] + (yv - ev)
                    };
                    (yv, inc, realised, zbuf)
                })
                .collect();
            for (&p, &(yv, inc, rv, zb)) in active.iter().zip(&updates) {
                if !(yv.is_finite() && rv.is_finite()) {
                    return Err(Error::NonFinite {
                        node: i,
                        time: t,
                        what: "Y",
                    });
                }
                y[p] = yv;
                min_y = min_y.min(yv);
                if pathwise {
                    resp[p] = rv;
                }
                k_paths[p] += inc;
                if run.keep {
                    dk_step[p] = inc;
                    if d <= 8 {
                        z_step[p * d..(p + 1) * d].copy_from_slice(&zb[..d]);
                    } else {
                        let fp = &f[p * nf..(p + 1) * nf];
                        for (c, coef) in cz.iter().enumerate() {
                            z_step[p * d + c] = design.predict(coef, fp);
                        }
                    }
                }
            }
        }
        if let Some(kp) = kept.as_mut() {
            kp.y[i] = y.clone();
            kp.z[i] = z_step;
            kp.dk[i] = dk_step;
        }
    }

    Ok(LsmcOutput {
        y0: mean(&y),
        k_paths,
        fallbacks,
        min_y,
        kept,
    })
}

/// Regression design at one step and its feature matrix. With
/// `obstacle_basis` the obstacle value joins the state as an extra regressor
/// at the degree the state alone supports.
fn select_design(run: &LsmcRun<'_>, x: &[f64], n: usize, t: f64, active: &[usize]) -> (Design, Option<Vec<f64>>, usize) {
    let plain = Design::build(x, n, active, run.degree);
    if !run.opts.obstacle_basis || run.obs.is_state_free() || plain.n_components() == 0 {
        return (plain, None, n);
    }
    let np = x.len() / n;
    let mut aug = vec![0.0; np * (n + 1)];
    aug.par_chunks_mut(n + 1).enumerate().for_each(|(p, row)| {
        let xp = &x[p * n..(p + 1) * n];
        row[..n].copy_from_slice(xp);
        row[n] = run.obs.eval(t, xp);
    });
    let design = Design::build_at_degree(&aug, n + 1, active, plain.degree_used);
    (design, Some(aug), n + 1)
}

pub(crate) fn solve_lsmc_mode(
    prob: &RbsdeProblem,
    bundle: &PathBundle,
    degree: usize,
    mode: Mode,
    opts: SchemeOptions,
) -> Result<DiscreteSolution> {
    let np = bundle.n_paths();
    if np < 10 * (degree + 1) {
        return Err(Error::precondition(format!(
            "{np} paths are too few for a degree-{degree} regression (need at least {})",
            10 * (degree + 1)
        )));
    }
    if bundle.grid() != &prob.grid {
        return Err(Error::config("path bundle and problem use different time grids"));
    }
    let last = prob.grid.n_steps();
    if mode != Mode::Free {
        prob.check_terminal((0..np).map(|p| bundle.x(last, p)))?;
    }
    let terminal: Vec<f64> = (0..np).map(|p| prob.terminal.eval(bundle.x(last, p))).collect();
    let out = lsmc_backward(&LsmcRun {
        gen: &prob.generator,
        obs: &prob.obstacle,
        bundle,
        last,
        terminal: &terminal,
        stops: None,
        mode,
        degree,
        opts,
        keep: true,
    })?;
    let kept = out.kept.expect("kept arrays requested");
    let sol = DiscreteSolution {
        grid: prob.grid.clone(),
        layout: Layout::Paths,
        dim_z: bundle.d(),
        y: kept.y,
        z: kept.z,
        dk: kept.dk,
        obstacle: kept.obstacle,
        reflected: mode == Mode::Reflect,
        stops: None::<StopMask>,
        flags: SolverFlags {
            z_degenerate: false,
            regression_fallbacks: out.fallbacks,
            picard_passes: opts.picard_passes,
        },
    };
    sol.post_check(opts.skorokhod_tol)?;
    Ok(sol)
}

/// Reflected solution by regression on the paths of `bundle`, which must be
/// simulated on the problem grid from `x0`.
pub fn solve_lsmc(prob: &RbsdeProblem, bundle: &PathBundle, degree: usize, opts: SchemeOptions) -> Result<DiscreteSolution> {
    solve_lsmc_mode(prob, bundle, degree, Mode::Reflect, opts)
}

pub fn solve_lsmc_unreflected(
    prob: &RbsdeProblem,
    bundle: &PathBundle,
    degree: usize,
    opts: SchemeOptions,
) -> Result<DiscreteSolution> {
    solve_lsmc_mode(prob, bundle, degree, Mode::Free, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{SdeCoeffs, TimeGrid};
    use crate::pathsim::{euler_maruyama, simulate_brownian};
    use crate::solvers::Terminal;

    fn setup(gen: GeneratorSpec, term: Terminal, obs: ObstacleSpec, paths: usize) -> (RbsdeProblem, PathBundle) {
        let grid = TimeGrid::uniform(0.0, 1.0, 10).unwrap();
        let coeffs = SdeCoeffs::brownian(1);
        let inc = simulate_brownian(&grid, paths, 1, 5).unwrap();
        let bundle = euler_maruyama(&coeffs, 0.0, &[0.0], inc).unwrap();
        (RbsdeProblem::new(gen, term, obs, coeffs, grid, vec![0.0]).unwrap(), bundle)
    }

    #[test]
    fn linear_terminal_recovered_exactly() {
        let (p, b) = setup(GeneratorSpec::zero(), Terminal::linear(1.0, vec![2.0]), ObstacleSpec::absent(), 2000);
        let s = solve_lsmc(&p, &b, 2, SchemeOptions::default()).unwrap();
        assert!((s.origin_y() - (1.0 + 2.0 * mean(&(0..2000).map(|q| b.x(10, q)[0]).collect::<Vec<_>>()))).abs() < 1e-9);
        // Z is 2 up to the sampling error of dW^2 / dt
        let z5: Vec<f64> = (0..2000).map(|q| s.z_at(5, q)[0]).collect();
        assert!((mean(&z5) - 2.0).abs() < 0.2);
    }

    #[test]
    fn time_obstacle_closed_form() {
        let (p, b) = setup(
            GeneratorSpec::zero(),
            Terminal::constant(0.0),
            ObstacleSpec::linear_in_time(1.0, -1.0),
            200,
        );
        let s = solve_lsmc(&p, &b, 3, SchemeOptions::default()).unwrap();
        assert!((s.origin_y() - 1.0).abs() < 1e-12);
        assert!((s.expected_k_total() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_paths_rejected() {
        let (p, b) = setup(GeneratorSpec::zero(), Terminal::constant(0.0), ObstacleSpec::absent(), 20);
        assert!(matches!(solve_lsmc(&p, &b, 3, SchemeOptions::default()), Err(Error::Precondition(_))));
    }

    #[test]
    fn thread_count_does_not_change_result() {
        let (p, b) = setup(GeneratorSpec::abs_z(), Terminal::put_on_log(1.0), ObstacleSpec::put_on_log(1.0), 9000);
        let a = solve_lsmc(&p, &b, 3, SchemeOptions::default()).unwrap().origin_y();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let c = pool.install(|| solve_lsmc(&p, &b, 3, SchemeOptions::default()).unwrap().origin_y());
        assert_eq!(a.to_bits(), c.to_bits());
    }
}
