//! Dispatch from a parsed configuration to the library and back to checks,
//! results and CSV tables.

use std::fmt::Write as _;

use rbsde::applications::{
    apriori_check, converse_comparison, flatness_check, self_financing_check, zero_interest_check,
    BiconditionalReport, CheckSettings, ConverseReport, ConverseSettings, Probe,
};
use rbsde::io::{solution_summary, write_solution_csv};
use rbsde::model::{validate_spec, DiscreteSolution, GeneratorSpec, Layout, ObstacleSpec, SdeCoeffs, TimeGrid};
use rbsde::pathsim::{euler_maruyama, simulate_brownian_with, PathBundle};
use rbsde::representation::{
    corollary32_check, corollary33_check, corollary34_config, representation_sweep, CorollaryReport,
    RepresentationInstance, RepresentationReport, Verdict,
};
use rbsde::solvers::{penalty_sweep, solve, solve_penalized, Backend, RbsdeProblem, SchemeOptions};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Kind, Preset, SolverBackend, Suite};
use crate::registry;
use crate::report::Check;

#[derive(Debug, Clone, PartialEq)]
pub enum RunError {
    /// The configuration is well-formed but does not describe a valid
    /// experiment.
    Config(String),
    /// The library refused or failed while running.
    Runtime(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Config(m) => write!(f, "configuration error: {m}"),
            RunError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<rbsde::Error> for RunError {
    fn from(e: rbsde::Error) -> Self {
        RunError::Runtime(e.to_string())
    }
}

fn cfg_err(e: String) -> RunError {
    RunError::Config(e)
}

/// Everything a run produces before it is written out.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub checks: Vec<Check>,
    pub results: Value,
    pub tolerances: Value,
    /// `(suffix, bytes)`; the suffix is appended to the output stem.
    pub tables: Vec<(String, Vec<u8>)>,
}

fn scheme(c: &ExperimentConfig) -> SchemeOptions {
    SchemeOptions {
        picard_passes: c.solver.picard_passes,
        skorokhod_tol: c.solver.skorokhod_tol,
        lsmc_value: c.solver.lsmc_value,
        obstacle_basis: c.solver.obstacle_basis,
    }
}

struct Setup {
    coeffs: SdeCoeffs,
    x0: Vec<f64>,
    gen: GeneratorSpec,
    obs: ObstacleSpec,
}

fn setup(c: &ExperimentConfig) -> Result<Setup, RunError> {
    let (coeffs, x0) = registry::sde(&c.sde).map_err(cfg_err)?;
    let gen = registry::generator(&c.generator, coeffs.d()).map_err(cfg_err)?;
    let obs = registry::obstacle(&c.obstacle, coeffs.n()).map_err(cfg_err)?;
    Ok(Setup { coeffs, x0, gen, obs })
}

/// Build only; used by `validate`.
pub fn check_config(c: &ExperimentConfig) -> Result<(), RunError> {
    match c.kind {
        Kind::Solve | Kind::Apriori => {
            problem(c, c.grid.n_steps)?;
        }
        Kind::Representation | Kind::Corollary32 | Kind::Corollary33 => {
            instance(c)?;
        }
        Kind::ConverseComparison => {
            converse_inputs(c)?;
        }
        Kind::Properties => {
            setup(c)?;
        }
    }
    Ok(())
}

pub fn run(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    match c.kind {
        Kind::Solve => run_solve(c),
        Kind::Representation | Kind::Corollary32 | Kind::Corollary33 => run_representation(c),
        Kind::ConverseComparison => run_converse(c),
        Kind::Properties => run_properties(c),
        Kind::Apriori => run_apriori(c),
    }
}

fn problem(c: &ExperimentConfig, n_steps: usize) -> Result<RbsdeProblem, RunError> {
    let s = setup(c)?;
    let grid = TimeGrid::uniform(c.grid.t0, c.grid.horizon, n_steps).map_err(|e| cfg_err(e.to_string()))?;
    let term = registry::terminal(&c.terminal, &s.obs, c.grid.horizon, s.coeffs.n()).map_err(cfg_err)?;
    RbsdeProblem::new(s.gen, term, s.obs, s.coeffs, grid, s.x0).map_err(|e| cfg_err(e.to_string()))
}

fn bundle(c: &ExperimentConfig, p: &RbsdeProblem) -> Result<PathBundle, RunError> {
    let mc = &c.monte_carlo;
    let inc = simulate_brownian_with(&p.grid, mc.n_paths, p.forward.d(), mc.seed, mc.antithetic)?;
    Ok(euler_maruyama(&p.forward, p.grid.t0(), &p.x0, inc)?)
}

fn solve_with(c: &ExperimentConfig, p: &RbsdeProblem) -> Result<DiscreteSolution, RunError> {
    let opts = scheme(c);
    let paths = match c.solver.backend {
        SolverBackend::Tree => None,
        SolverBackend::Lsmc => Some(bundle(c, p)?),
    };
    let backend = match &paths {
        None => Backend::Tree,
        Some(b) => Backend::Lsmc {
            bundle: b,
            degree: c.monte_carlo.degree,
        },
    };
    Ok(match c.solver.n_penalty {
        Some(n) => solve_penalized(p, backend, n, opts)?,
        None => solve(p, backend, opts)?,
    })
}

/// Per-node means for path solutions, whose full table would be huge.
fn path_summary_csv(sol: &DiscreteSolution) -> Vec<u8> {
    let mut s = String::from("node,time,y_mean,y_min,y_max,obstacle_mean,expected_k\n");
    let k = sol.expected_k();
    for i in 0..=sol.n_steps() {
        let y = &sol.y[i];
        let m = y.iter().sum::<f64>() / y.len() as f64;
        let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l = sol.obstacle[i].iter().sum::<f64>() / y.len() as f64;
        let _ = writeln!(s, "{i},{},{m},{lo},{hi},{l},{}", sol.grid.time(i), k[i]);
    }
    s.into_bytes()
}

fn run_solve(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    let p = problem(c, c.grid.n_steps)?;
    let sol = solve_with(c, &p)?;
    let summary = solution_summary(&sol);
    let mut checks = Vec::new();
    let mut tables = Vec::new();
    let mut results = json!({ "solution": summary });

    if c.solver.validate_samples > 0 {
        let v = validate_spec(&p.generator, &p.forward, &p.obstacle, c.solver.validate_samples, c.monte_carlo.seed);
        for a in &v.checks {
            let excess = a.worst.as_ref().map(|w| w.lhs - w.rhs);
            checks.push(Check::new(
                format!("assumption {}", a.name),
                a.passed,
                json!({ "samples": a.samples, "worst_excess": excess }),
            ));
        }
        results["validation"] = serde_json::to_value(&v).expect("serialisable");
    }

    if !c.solver.penalty_sweep.is_empty() {
        let bundle_store = match c.solver.backend {
            SolverBackend::Tree => None,
            SolverBackend::Lsmc => Some(bundle(c, &p)?),
        };
        let backend = match &bundle_store {
            None => Backend::Tree,
            Some(b) => Backend::Lsmc {
                bundle: b,
                degree: c.monte_carlo.degree,
            },
        };
        let sw = penalty_sweep(&p, backend, &c.solver.penalty_sweep, scheme(c))?;
        let last_gap = *sw.gaps.last().expect("non-empty sweep");
        let scale = if sw.reflected_y0.abs() > 1e-12 { sw.reflected_y0.abs() } else { 1.0 };
        let rel_gap = last_gap / scale;
        checks.push(Check::new(
            "penalty monotone",
            sw.monotone,
            json!({ "y0": sw.y0, "n_values": sw.n_values }),
        ));
        checks.push(Check::new(
            "penalty gap",
            rel_gap.abs() <= c.solver.penalty_gap_tol,
            json!({ "relative_gap": rel_gap, "tolerance": c.solver.penalty_gap_tol, "reflected_y0": sw.reflected_y0 }),
        ));
        let mut csv = String::from("n_penalty,y0,reflected_y0,gap\n");
        for ((n, y), g) in sw.n_values.iter().zip(&sw.y0).zip(&sw.gaps) {
            let _ = writeln!(csv, "{n},{y},{},{g}", sw.reflected_y0);
        }
        tables.push(("-penalty".to_string(), csv.into_bytes()));
        results["penalty"] = serde_json::to_value(&sw).expect("serialisable");
    }

    if c.solver.write_solution {
        let bytes = match sol.layout {
            Layout::Lattice => {
                let mut b = Vec::new();
                write_solution_csv(&sol, &mut b).expect("in-memory write");
                b
            }
            Layout::Paths => path_summary_csv(&sol),
        };
        tables.insert(0, (String::new(), bytes));
    }

    Ok(Outcome {
        checks,
        results,
        tolerances: json!({
            "skorokhod_tol": c.solver.skorokhod_tol,
            "penalty_gap_tol": c.solver.penalty_gap_tol,
        }),
        tables,
    })
}

fn instance(c: &ExperimentConfig) -> Result<RepresentationInstance, RunError> {
    let r = &c.representation;
    let horizon = c.grid.horizon;
    let inst = match r.preset {
        Some(Preset::Corollary34) => {
            if r.z.is_empty() {
                return Err(cfg_err("representation.z is required by the preset".into()));
            }
            let d = r.z.len();
            let gen = registry::generator(&c.generator, d).map_err(cfg_err)?;
            let obs = registry::obstacle(&c.obstacle, d).map_err(cfg_err)?;
            corollary34_config(gen, obs, r.z.clone(), r.eta, r.t, horizon)?
        }
        None => {
            let s = setup(c)?;
            let n = s.coeffs.n();
            let x = r.x.clone().unwrap_or(s.x0);
            let q = if r.q.is_empty() { vec![0.0; n] } else { r.q.clone() };
            if q.len() != n || x.len() != n {
                return Err(cfg_err(format!("representation.q and .x need {n} entries")));
            }
            RepresentationInstance::new(s.gen, s.coeffs, s.obs, r.t, horizon, x, r.eta, q)?
        }
    };
    Ok(inst
        .with_epsilons(r.epsilons.clone())?
        .with_p_norm(r.p_norm)?
        .with_backend(r.backend)
        .with_mc(c.monte_carlo.clone())
        .with_tolerances(c.tolerances.clone())
        .with_stop_cap(r.stop_cap)
        .with_scheme(scheme(c)))
}

fn sweep_check(rep: &RepresentationReport) -> Check {
    let last = rep.final_row();
    Check::new(
        "representation converges",
        rep.verdict == Verdict::Converged && last.abs_error <= rep.abs_tol,
        json!({
            "verdict": rep.verdict,
            "final_abs_error": last.abs_error,
            "final_stderr": last.stderr,
            "abs_tol": rep.abs_tol,
            "target": rep.target,
            "loglog_slope": rep.loglog_slope,
            "richardson_limit": rep.richardson_limit,
        }),
    )
}

fn corollary_check(r: &CorollaryReport) -> Check {
    Check::new(
        "reflection increment vanishes",
        r.passed,
        json!({
            "k_ratio": r.k_ratio,
            "k_tolerance": r.k_tolerance,
            "simplified_verdict": r.simplified_verdict,
            "min_y": r.min_y,
            "y_floor": r.y_floor,
        }),
    )
}

fn run_representation(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    let inst = instance(c)?;
    let (sweep, checks, results) = match c.kind {
        Kind::Corollary32 => {
            let r = corollary32_check(&inst)?;
            (r.sweep.clone(), vec![corollary_check(&r)], serde_json::to_value(&r).expect("serialisable"))
        }
        Kind::Corollary33 => {
            let r = corollary33_check(&inst, c.representation.level, c.representation.floor_tol)?;
            (r.sweep.clone(), vec![corollary_check(&r)], serde_json::to_value(&r).expect("serialisable"))
        }
        _ => {
            let r = representation_sweep(&inst)?;
            let v = serde_json::to_value(&r).expect("serialisable");
            (r.clone(), vec![sweep_check(&r)], v)
        }
    };
    let mut csv = Vec::new();
    sweep.write_csv(&mut csv).expect("in-memory write");
    Ok(Outcome {
        checks,
        results,
        tolerances: json!({
            "abs_tol": sweep.abs_tol,
            "noise_sigmas": c.tolerances.noise_sigmas,
            "overshoot_factor": c.tolerances.overshoot_factor,
            "max_refinements": c.tolerances.max_refinements,
            "p_norm": sweep.p_norm,
            "k_tolerance": 0.01 * (1.0 + sweep.target.abs()),
            "floor_tol": c.representation.floor_tol,
        }),
        tables: vec![(String::new(), csv)],
    })
}

struct ConverseInputs {
    gen1: GeneratorSpec,
    gen2: GeneratorSpec,
    obs: ObstacleSpec,
    probes: Vec<Probe>,
    settings: ConverseSettings,
}

fn converse_inputs(c: &ExperimentConfig) -> Result<ConverseInputs, RunError> {
    let cc = &c.converse;
    let g2 = c
        .generator2
        .as_ref()
        .ok_or_else(|| cfg_err("converse-comparison needs a [generator2] section".into()))?;
    let d = cc.probes.first().map(|p| p.z.len()).ok_or_else(|| cfg_err("converse.probes is empty".into()))?;
    if d == 0 || cc.probes.iter().any(|p| p.z.len() != d) {
        return Err(cfg_err("every probe needs the same non-empty z".into()));
    }
    Ok(ConverseInputs {
        gen1: registry::generator(&c.generator, d).map_err(cfg_err)?,
        gen2: registry::generator(g2, d).map_err(cfg_err)?,
        obs: registry::obstacle(&c.obstacle, d).map_err(cfg_err)?,
        probes: cc
            .probes
            .iter()
            .map(|p| Probe {
                t: p.t,
                eta: p.eta,
                z: p.z.clone(),
            })
            .collect(),
        settings: ConverseSettings {
            horizon: c.grid.horizon,
            backend: cc.backend,
            mc: c.monte_carlo.clone(),
            tol: c.tolerances.clone(),
            diff_tol: cc.diff_tol,
            forward_check: cc.forward_check,
            forward_steps: cc.forward_steps,
        },
    })
}

fn converse_checks(c: &ExperimentConfig, r: &ConverseReport) -> Vec<Check> {
    let cc = &c.converse;
    let mut checks = vec![Check::new(
        "limits consistent with forward ordering",
        r.consistent && r.inconclusive.is_empty(),
        json!({ "inconclusive_probes": r.inconclusive }),
    )];
    if let Some(v) = cc.expect_verdict {
        checks.push(Check::new("ordering verdict", r.verdict == v, json!({ "verdict": r.verdict, "expected": v })));
    }
    for (k, p) in r.probes.iter().enumerate() {
        if let Some(d) = cc.expect_difference {
            checks.push(Check::new(
                format!("difference at probe {k}"),
                (p.difference - d).abs() <= cc.expect_tol,
                json!({ "difference": p.difference, "expected": d, "tolerance": cc.expect_tol, "stderr": p.stderr }),
            ));
        }
        if let Some(f) = &p.forward {
            checks.push(
                Check::new(format!("node-wise ordering at probe {k}"), f.holds, json!({ "min_gap": f.min_gap }))
                    .directed("generators => solutions"),
            );
        }
    }
    checks
}

fn run_converse(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    let inp = converse_inputs(c)?;
    let r = converse_comparison(&inp.gen1, &inp.gen2, &inp.obs, &inp.probes, &inp.settings)?;
    let mut csv = String::from("t,eta,z,limit1,limit2,difference,stderr,margin,order,direct_difference,forward_holds\n");
    for p in &r.probes {
        let z: Vec<String> = p.probe.z.iter().map(|v| v.to_string()).collect();
        let order = serde_json::to_value(p.order).expect("serialisable");
        let fwd = p.forward.as_ref().map(|f| f.holds.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{},{},{}",
            p.probe.t,
            p.probe.eta,
            z.join(";"),
            p.limit1,
            p.limit2,
            p.difference,
            p.stderr,
            p.margin,
            order.as_str().unwrap_or_default(),
            p.direct_difference,
            fwd
        );
    }
    Ok(Outcome {
        checks: converse_checks(c, &r),
        results: serde_json::to_value(&r).expect("serialisable"),
        tolerances: json!({
            "diff_tol": c.converse.diff_tol,
            "noise_sigmas": c.tolerances.noise_sigmas,
            "expect_tol": c.converse.expect_tol,
        }),
        tables: vec![(String::new(), csv.into_bytes())],
    })
}

fn check_settings(c: &ExperimentConfig) -> CheckSettings {
    let p = &c.properties;
    CheckSettings {
        tol: p.tol,
        probe_tol: p.probe_tol,
        horizon: c.grid.horizon,
        n_steps: c.grid.n_steps,
        drift: p.drift,
        sigma: p.sigma,
        probe_times: p.probe_times.clone(),
    }
}

fn biconditional_checks(r: &BiconditionalReport, expect: Option<bool>) -> Vec<Check> {
    let metrics = json!({
        "generator_condition": r.generator_condition,
        "generator_deviation": r.generator_deviation,
        "solution_condition": r.solution_condition,
        "solution_deviation": r.solution_deviation,
        "probe_condition": r.probe_condition,
    });
    let mut out = vec![
        Check::new(format!("{}: forward", r.name), r.forward, metrics.clone()).directed("generator => solution"),
        Check::new(format!("{}: backward", r.name), r.backward, metrics.clone()).directed("solution => generator"),
    ];
    if let Some(e) = expect {
        out.push(Check::new(format!("{}: expected outcome", r.name), r.holds == e, json!({ "holds": r.holds, "expected": e })));
    }
    out
}

fn run_properties(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    let s = setup(c)?;
    let settings = check_settings(c);
    let p = &c.properties;
    let reports: Vec<BiconditionalReport> = match p.suite {
        Suite::SelfFinancing => vec![self_financing_check(&s.gen, p.level, &settings)?],
        Suite::ZeroInterest => zero_interest_check(&s.gen, &s.obs, p.level, &p.y_values, &settings)?,
        Suite::Flatness => vec![flatness_check(&s.gen, &s.obs, p.eta, p.t, &settings)?.check],
    };
    let mut csv = String::from(
        "name,generator_condition,generator_deviation,solution_condition,solution_deviation,probe_condition,forward,backward,holds\n",
    );
    let mut checks = Vec::new();
    for r in &reports {
        let probe = r.probe_condition.map(|b| b.to_string()).unwrap_or_default();
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{},{},{}",
            r.name,
            r.generator_condition,
            r.generator_deviation,
            r.solution_condition,
            r.solution_deviation,
            probe,
            r.forward,
            r.backward,
            r.holds
        );
        checks.extend(biconditional_checks(r, p.expect_holds));
    }
    Ok(Outcome {
        checks,
        results: serde_json::to_value(&reports).expect("serialisable"),
        tolerances: json!({ "tol": p.tol, "probe_tol": p.probe_tol }),
        tables: vec![(String::new(), csv.into_bytes())],
    })
}

fn run_apriori(c: &ExperimentConfig) -> Result<Outcome, RunError> {
    let a = &c.apriori;
    let n = c.grid.n_steps;
    let mut levels = vec![1usize];
    if a.refine {
        levels.push(2);
    }
    let mut reports = Vec::new();
    let mut csv = String::from("n_steps,lhs,rhs,ratio,flagged,samples\n");
    for &m in &levels {
        let p = problem(c, n * m)?;
        let sol = solve_with(c, &p)?;
        let tau = a.tau_idx.unwrap_or(n) * m;
        let r = apriori_check(&p, &sol, a.sigma_idx * m, tau, a.walks, a.seed)?;
        let _ = writeln!(csv, "{},{},{},{},{},{}", n * m, r.lhs, r.rhs, r.ratio, r.flagged, r.samples);
        reports.push((n * m, r));
    }
    let mut checks: Vec<Check> = reports
        .iter()
        .map(|(steps, r)| {
            Check::new(
                format!("right side positive at {steps} steps"),
                !r.flagged,
                json!({ "lhs": r.lhs, "rhs": r.rhs }),
            )
        })
        .collect();
    if let [(_, r1), (_, r2)] = reports.as_slice() {
        let change = (r2.ratio - r1.ratio).abs() / r1.ratio.abs().max(f64::MIN_POSITIVE);
        checks.push(Check::new(
            "ratio stable under refinement",
            change < a.max_ratio_change,
            json!({ "ratio": r1.ratio, "refined_ratio": r2.ratio, "relative_change": change }),
        ));
    }
    let results: Vec<Value> = reports
        .iter()
        .map(|(steps, r)| json!({ "n_steps": steps, "report": r }))
        .collect();
    Ok(Outcome {
        checks,
        results: Value::Array(results),
        tolerances: json!({ "max_ratio_change": a.max_ratio_change }),
        tables: vec![(String::new(), csv.into_bytes())],
    })
}
