//! Consequences of the representation: converse comparison of generators,
//! structural characterisations of generators by constant solutions, and an
//! empirical a priori estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, DiscreteSolution, GeneratorSpec, Layout, ObstacleSpec, SdeCoeffs, StopMask, TimeGrid};
use crate::pathsim::{euler_maruyama, simulate_brownian};
use crate::representation::{
    corollary34_config, representation_sweep, McSettings, RepBackend, RepTolerances, RepresentationInstance,
    RepresentationReport,
};
use crate::solvers::{comparison_check, solve_tree, Backend, OrderRegion, RbsdeProblem, SchemeOptions, Terminal};

/// Test point `(t, eta_t, z)` of a converse comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub t: f64,
    pub eta: f64,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConverseSettings {
    pub horizon: f64,
    pub backend: RepBackend,
    pub mc: McSettings,
    pub tol: RepTolerances,
    /// Differences within `diff_tol` plus the noise margin count as equal.
    pub diff_tol: f64,
    /// Also solve matched short-horizon problems and compare them node-wise.
    pub forward_check: bool,
    pub forward_steps: usize,
}

impl Default for ConverseSettings {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            backend: RepBackend::Lsmc,
            mc: McSettings::default(),
            tol: RepTolerances::default(),
            diff_tol: 0.02,
            forward_check: true,
            forward_steps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProbeOrder {
    Greater,
    Equal,
    Less,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConverseVerdict {
    Equal,
    /// `g1 >= g2` on the probed region.
    FirstDominates,
    SecondDominates,
    Crossing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ForwardComparison {
    pub holds: bool,
    pub min_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeResult {
    pub probe: Probe,
    pub limit1: f64,
    pub limit2: f64,
    pub difference: f64,
    /// Standard error of the difference, from paired replicates.
    pub stderr: f64,
    pub margin: f64,
    pub order: ProbeOrder,
    /// `g1 - g2` evaluated directly at the probe.
    pub direct_difference: f64,
    pub verdict1: crate::representation::Verdict,
    pub verdict2: crate::representation::Verdict,
    /// Node-wise ordering of matched solutions; `None` when `g1 >= g2` does
    /// not hold on the sampled region.
    pub forward: Option<ForwardComparison>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConverseReport {
    pub probes: Vec<ProbeResult>,
    pub verdict: ConverseVerdict,
    /// Probes whose sweeps did not converge.
    pub inconclusive: Vec<usize>,
    /// Every confirmed forward ordering is matched by `limit1 >= limit2 -
    /// margin`.
    pub consistent: bool,
}

fn paired_stderr(a: &RepresentationReport, b: &RepresentationReport) -> f64 {
    let (ra, rb) = (&a.final_row().replicate_estimates, &b.final_row().replicate_estimates);
    let d: Vec<f64> = ra.iter().zip(rb).map(|(x, y)| x - y).collect();
    if d.len() < 2 {
        return 0.0;
    }
    let m = d.iter().sum::<f64>() / d.len() as f64;
    let var = d.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (d.len() - 1) as f64;
    (var / d.len() as f64).sqrt()
}

fn lowest_reachable(obs: &ObstacleSpec, grid: &TimeGrid, x: &[f64]) -> f64 {
    if obs.is_state_free() {
        grid.nodes()
            .iter()
            .map(|&t| obs.eval(t, x))
            .fold(f64::INFINITY, f64::min)
            .max(-10.0)
    } else {
        -10.0
    }
}

fn forward_comparison(
    gen1: &GeneratorSpec,
    gen2: &GeneratorSpec,
    obs: &ObstacleSpec,
    probe: &Probe,
    eps: f64,
    s: &ConverseSettings,
) -> Result<Option<ForwardComparison>> {
    let d = probe.z.len();
    let coeffs = SdeCoeffs::brownian(d);
    let grid = TimeGrid::uniform(probe.t, probe.t + eps, s.forward_steps.max(1))?;
    let x0 = vec![0.0; d];
    let (eta, z, o, horizon) = (probe.eta, probe.z.clone(), obs.clone(), grid.horizon());
    let terminal = Terminal::new("eta + z.x", move |x| (eta + dot(&z, x)).max(o.eval(horizon, x)));
    let mk = |g: &GeneratorSpec| {
        RbsdeProblem::new(g.clone(), terminal.clone(), obs.clone(), coeffs.clone(), grid.clone(), x0.clone())
    };
    let (p1, p2) = (mk(gen1)?, mk(gen2)?);
    let region = OrderRegion {
        y_min: lowest_reachable(obs, &grid, &x0),
        seed: s.mc.seed,
        ..OrderRegion::default()
    };
    let opts = SchemeOptions::default();
    let res = if d == 1 {
        comparison_check(&p1, &p2, Backend::Tree, opts, region, 1e-12)
    } else {
        let n = s.mc.n_paths.min(20_000);
        let inc = simulate_brownian(&grid, n, d, s.mc.seed)?;
        let bundle = euler_maruyama(&coeffs, probe.t, &x0, inc)?;
        comparison_check(
            &p1,
            &p2,
            Backend::Lsmc {
                bundle: &bundle,
                degree: s.mc.degree,
            },
            opts,
            region,
            1e-6,
        )
    };
    match res {
        Ok(r) => Ok(Some(ForwardComparison {
            holds: r.holds,
            min_gap: r.min_gap,
        })),
        Err(Error::Precondition(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Recover the ordering of two generators from their representation limits
/// at each probe, under the Brownian preset with `q = z`.
pub fn converse_comparison(
    gen1: &GeneratorSpec,
    gen2: &GeneratorSpec,
    obs: &ObstacleSpec,
    probes: &[Probe],
    settings: &ConverseSettings,
) -> Result<ConverseReport> {
    if probes.is_empty() {
        return Err(Error::config("no probes given"));
    }
    let mut results = Vec::with_capacity(probes.len());
    let mut inconclusive = Vec::new();
    for (k, probe) in probes.iter().enumerate() {
        let l = obs.eval(probe.t, &vec![0.0; probe.z.len()]);
        if probe.eta <= l {
            return Err(Error::precondition(format!(
                "probe {k}: eta = {} does not exceed L = {l}",
                probe.eta
            )));
        }
        let build = |g: &GeneratorSpec| -> Result<RepresentationInstance> {
            Ok(
                corollary34_config(g.clone(), obs.clone(), probe.z.clone(), probe.eta, probe.t, settings.horizon)?
                    .with_backend(settings.backend)
                    .with_mc(settings.mc.clone())
                    .with_tolerances(settings.tol.clone()),
            )
        };
        let (i1, i2) = (build(gen1)?, build(gen2)?);
        let (r1, r2) = (representation_sweep(&i1)?, representation_sweep(&i2)?);
        let (l1, l2) = (r1.final_row().estimate, r2.final_row().estimate);
        let difference = l1 - l2;
        let stderr = paired_stderr(&r1, &r2);
        let margin = settings.tol.noise_sigmas * stderr + settings.diff_tol;
        let order = if difference > margin {
            ProbeOrder::Greater
        } else if difference < -margin {
            ProbeOrder::Less
        } else {
            ProbeOrder::Equal
        };
        use crate::representation::Verdict;
        if r1.verdict != Verdict::Converged || r2.verdict != Verdict::Converged {
            inconclusive.push(k);
        }
        let forward = if settings.forward_check {
            forward_comparison(gen1, gen2, obs, probe, i1.epsilons[0], settings)?
        } else {
            None
        };
        results.push(ProbeResult {
            probe: probe.clone(),
            limit1: l1,
            limit2: l2,
            difference,
            stderr,
            margin,
            order,
            direct_difference: gen1.eval(probe.t, probe.eta, &probe.z) - gen2.eval(probe.t, probe.eta, &probe.z),
            verdict1: r1.verdict,
            verdict2: r2.verdict,
            forward,
        });
    }
    let all = |f: &dyn Fn(ProbeOrder) -> bool| results.iter().all(|r| f(r.order));
    let verdict = if all(&|o| o == ProbeOrder::Equal) {
        ConverseVerdict::Equal
    } else if all(&|o| o != ProbeOrder::Less) {
        ConverseVerdict::FirstDominates
    } else if all(&|o| o != ProbeOrder::Greater) {
        ConverseVerdict::SecondDominates
    } else {
        ConverseVerdict::Crossing
    };
    let consistent = results.iter().all(|r| match &r.forward {
        Some(f) if f.holds => r.difference >= -r.margin,
        _ => true,
    });
    Ok(ConverseReport {
        probes: results,
        verdict,
        inconclusive,
        consistent,
    })
}

/// Lattice and probe settings shared by the structural checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckSettings {
    /// Deviation allowed for exact identities on the lattice.
    pub tol: f64,
    /// Deviation allowed for representation estimates.
    pub probe_tol: f64,
    pub horizon: f64,
    pub n_steps: usize,
    pub drift: f64,
    pub sigma: f64,
    pub probe_times: Vec<f64>,
}

impl Default for CheckSettings {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            probe_tol: 0.02,
            horizon: 1.0,
            n_steps: 200,
            drift: 0.0,
            sigma: 1.0,
            probe_times: vec![0.0, 0.25, 0.5],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbeLimit {
    pub t: f64,
    pub eta: f64,
    pub estimate: f64,
}

/// Both sides of a characterisation `generator condition <=> constant
/// solution`, each tested separately.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BiconditionalReport {
    pub name: String,
    pub generator_condition: bool,
    pub generator_deviation: f64,
    pub solution_condition: bool,
    pub solution_deviation: f64,
    /// Representation estimates of the generator value at `z = 0`.
    pub probe_limits: Vec<ProbeLimit>,
    pub probe_condition: Option<bool>,
    /// Generator condition implies the solution condition.
    pub forward: bool,
    /// Solution condition implies the generator condition, read off the
    /// probes where available.
    pub backward: bool,
    /// Every tested side holds.
    pub holds: bool,
    /// Every tested side agrees.
    pub consistent: bool,
}

fn biconditional(
    name: String,
    gen_dev: f64,
    sol_dev: f64,
    probes: Vec<ProbeLimit>,
    s: &CheckSettings,
) -> BiconditionalReport {
    let generator_condition = gen_dev <= s.tol;
    let solution_condition = sol_dev <= s.tol;
    let probe_condition = (!probes.is_empty()).then(|| probes.iter().all(|p| p.estimate.abs() <= s.probe_tol));
    let recovered = probe_condition.unwrap_or(generator_condition);
    let forward = !generator_condition || solution_condition;
    let backward = !solution_condition || recovered;
    let sides = [Some(generator_condition), Some(solution_condition), probe_condition];
    let tested: Vec<bool> = sides.iter().flatten().copied().collect();
    BiconditionalReport {
        name,
        generator_condition,
        generator_deviation: gen_dev,
        solution_condition,
        solution_deviation: sol_dev,
        probe_limits: probes,
        probe_condition,
        forward,
        backward,
        holds: tested.iter().all(|&b| b),
        consistent: tested.iter().all(|&b| b == tested[0]),
    }
}

fn tree_problem(
    gen: &GeneratorSpec,
    terminal: Terminal,
    obs: &ObstacleSpec,
    t0: f64,
    horizon: f64,
    n_steps: usize,
    s: &CheckSettings,
) -> Result<RbsdeProblem> {
    RbsdeProblem::new(
        gen.clone(),
        terminal,
        obs.clone(),
        SdeCoeffs::scalar(s.drift, s.sigma),
        TimeGrid::uniform(t0, horizon, n_steps)?,
        vec![0.0],
    )
}

/// `max |Y - c|` over every node plus `E[K_T]`.
fn constancy_deviation(sol: &DiscreteSolution, c: f64) -> f64 {
    let dy = sol
        .y
        .iter()
        .flat_map(|l| l.iter())
        .fold(0.0_f64, |m, v| m.max((v - c).abs()));
    dy + sol.expected_k_total()
}

fn probe_limits(
    gen: &GeneratorSpec,
    obs: &ObstacleSpec,
    eta: f64,
    times: &[f64],
    horizon: f64,
    s: &CheckSettings,
) -> Result<Vec<ProbeLimit>> {
    let mut out = Vec::new();
    for &t in times.iter().filter(|&&t| t < horizon) {
        if eta <= obs.eval(t, &[0.0]) {
            continue;
        }
        let inst = RepresentationInstance::new(
            gen.clone(),
            SdeCoeffs::scalar(s.drift, s.sigma),
            obs.clone(),
            t,
            horizon,
            vec![0.0],
            eta,
            vec![0.0],
        )?
        .with_backend(RepBackend::Tree);
        let rep = representation_sweep(&inst)?;
        out.push(ProbeLimit {
            t,
            eta,
            estimate: rep.final_row().estimate,
        });
    }
    Ok(out)
}

fn sampled_deviation(grid_times: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    grid_times.iter().fold(0.0_f64, |m, &t| m.max(f(t).abs()))
}

/// With a strictly negative constant obstacle: `g(t, 0, 0) = 0` iff the
/// solution with zero terminal value is identically zero.
pub fn self_financing_check(gen: &GeneratorSpec, level: f64, s: &CheckSettings) -> Result<BiconditionalReport> {
    if level >= 0.0 {
        return Err(Error::precondition(format!("the obstacle level {level} must be negative")));
    }
    let obs = ObstacleSpec::constant(level);
    let prob = tree_problem(gen, Terminal::constant(0.0), &obs, 0.0, s.horizon, s.n_steps, s)?;
    let sol = solve_tree(&prob, SchemeOptions::default())?;
    let gen_dev = sampled_deviation(prob.grid.nodes(), |t| gen.eval(t, 0.0, &[0.0]));
    let sol_dev = constancy_deviation(&sol, 0.0);
    let probes = probe_limits(gen, &obs, 0.0, &s.probe_times, s.horizon, s)?;
    Ok(biconditional(format!("self-financing {}", gen.name()), gen_dev, sol_dev, probes, s))
}

/// With `sup L <= C` and `y >= C`: `g(t, y, 0) = 0` iff the solution with
/// terminal value `y` stays at `y`. One report per `y`.
pub fn zero_interest_check(
    gen: &GeneratorSpec,
    obs: &ObstacleSpec,
    level: f64,
    y_values: &[f64],
    s: &CheckSettings,
) -> Result<Vec<BiconditionalReport>> {
    if let Some(c) = obs.upper_bound().or(obs.constant_value()) {
        if c > level {
            return Err(Error::precondition(format!("obstacle bound {c} exceeds C = {level}")));
        }
    }
    let mut out = Vec::with_capacity(y_values.len());
    for &y in y_values {
        if y < level {
            return Err(Error::precondition(format!("y = {y} lies below C = {level}")));
        }
        let prob = tree_problem(gen, Terminal::constant(y), obs, 0.0, s.horizon, s.n_steps, s)?;
        let sol = solve_tree(&prob, SchemeOptions::default())?;
        let gen_dev = sampled_deviation(prob.grid.nodes(), |t| gen.eval(t, y, &[0.0]));
        let sol_dev = constancy_deviation(&sol, y);
        let probes = probe_limits(gen, obs, y, &s.probe_times, s.horizon, s)?;
        out.push(biconditional(format!("zero-interest {} at y = {y}", gen.name()), gen_dev, sol_dev, probes, s));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlatnessReport {
    pub check: BiconditionalReport,
    /// First grid time at or after `t` with `eta <= L`, or the horizon.
    pub sigma: f64,
    pub sigma_idx: usize,
}

/// On `[t, sigma_t]`, `sigma_t` the first time the obstacle reaches `eta`:
/// `g(s, eta, 0) = 0` there iff the solution with terminal value `eta` at
/// `sigma_t` is constant.
pub fn flatness_check(gen: &GeneratorSpec, obs: &ObstacleSpec, eta: f64, t: f64, s: &CheckSettings) -> Result<FlatnessReport> {
    if eta <= obs.eval(t, &[0.0]) {
        return Err(Error::precondition(format!("eta = {eta} must exceed L(t) = {}", obs.eval(t, &[0.0]))));
    }
    if !obs.is_state_free() {
        return Err(Error::config("the flatness check needs an obstacle that depends on time only"));
    }
    let full = TimeGrid::uniform(t, s.horizon, s.n_steps)?;
    let nodes = full.nodes();
    let hit = (0..=s.n_steps).find(|&i| eta <= obs.eval(nodes[i], &[0.0]));
    let sigma_idx = match hit {
        // the grid may overshoot the crossing; end one node earlier then
        Some(i) if obs.eval(nodes[i], &[0.0]) > eta + s.tol => i - 1,
        Some(i) => i,
        None => s.n_steps,
    };
    if sigma_idx == 0 {
        return Err(Error::precondition("the obstacle reaches eta within the first step"));
    }
    let sigma = nodes[sigma_idx];
    // within tolerance of the crossing the terminal value sits on the obstacle
    let o = obs.clone();
    let terminal = Terminal::new(format!("constant({eta})"), move |x| eta.max(o.eval(sigma, x)));
    let prob = tree_problem(gen, terminal, obs, t, sigma, sigma_idx, s)?;
    let sol = solve_tree(&prob, SchemeOptions::default())?;
    let gen_dev = sampled_deviation(prob.grid.nodes(), |u| gen.eval(u, eta, &[0.0]));
    let sol_dev = constancy_deviation(&sol, eta);
    let probes = probe_limits(gen, obs, eta, &[t], sigma, s)?;
    Ok(FlatnessReport {
        check: biconditional(format!("flatness {} at eta = {eta}", gen.name()), gen_dev, sol_dev, probes, s),
        sigma,
        sigma_idx,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AprioriReport {
    /// `E[sup |Y|^2 + sum |Z|^2 dt + (K_tau - K_sigma)^2]`.
    pub lhs: f64,
    /// `E[|Y_tau|^2 + (int gamma)^2 + sup (L^+)^2]`.
    pub rhs: f64,
    /// `lhs / rhs`; zero when both sides vanish, infinite when only `rhs`
    /// does.
    pub ratio: f64,
    /// `rhs = 0` while `lhs` exceeds the tolerance.
    pub flagged: bool,
    pub samples: usize,
}

/// Sample means of both sides of the a priori estimate between nodes
/// `sigma_idx < tau_idx`. Lattice solutions are sampled by `walks` random
/// walks from the root.
pub fn apriori_check(
    prob: &RbsdeProblem,
    sol: &DiscreteSolution,
    sigma_idx: usize,
    tau_idx: usize,
    walks: usize,
    seed: u64,
) -> Result<AprioriReport> {
    let n = sol.n_steps();
    if sigma_idx >= tau_idx || tau_idx > n {
        return Err(Error::config(format!("need sigma < tau <= {n}, got {sigma_idx} and {tau_idx}")));
    }
    let grid = &sol.grid;
    let gamma_int: f64 = (sigma_idx..tau_idx).map(|i| prob.generator.gamma(grid.time(i)) * grid.dt(i)).sum();
    let side = |states: &[usize], stop: usize| -> (f64, f64) {
        let end = tau_idx.min(stop);
        let (mut sup_y, mut z2, mut k, mut sup_l) = (0.0_f64, 0.0, 0.0, 0.0_f64);
        for i in sigma_idx..=end {
            let s = states[i];
            sup_y = sup_y.max(sol.y[i][s].powi(2));
            sup_l = sup_l.max(sol.obstacle[i][s].max(0.0).powi(2));
            if i < end {
                z2 += sol.z_at(i, s).iter().map(|v| v * v).sum::<f64>() * grid.dt(i);
                k += sol.dk[i][s];
            }
        }
        let y_end = sol.y[end][states[end]];
        (sup_y + z2 + k * k, y_end * y_end + gamma_int * gamma_int + sup_l)
    };
    let (mut lhs, mut rhs, samples) = match sol.layout {
        Layout::Paths => {
            let np = sol.y[0].len();
            let (mut a, mut b) = (0.0, 0.0);
            for p in 0..np {
                let states = vec![p; n + 1];
                let stop = match &sol.stops {
                    Some(StopMask::Paths(s)) => s[p],
                    _ => n,
                };
                let (l, r) = side(&states, stop);
                a += l;
                b += r;
            }
            (a, b, np)
        }
        Layout::Lattice => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (mut a, mut b) = (0.0, 0.0);
            let mut states = vec![0usize; n + 1];
            for _ in 0..walks.max(1) {
                let mut stop = n;
                for i in 0..n {
                    let absorbed = matches!(&sol.stops, Some(StopMask::Lattice(m)) if m[i][states[i]]);
                    if absorbed {
                        stop = i;
                        break;
                    }
                    states[i + 1] = states[i] + usize::from(rng.random::<bool>());
                }
                let (l, r) = side(&states, stop);
                a += l;
                b += r;
            }
            (a, b, walks.max(1))
        }
    };
    lhs /= samples as f64;
    rhs /= samples as f64;
    let tol = 1e-8;
    let (ratio, flagged) = if rhs > 0.0 {
        (lhs / rhs, false)
    } else if lhs <= tol {
        (0.0, false)
    } else {
        (f64::INFINITY, true)
    };
    Ok(AprioriReport {
        lhs,
        rhs,
        ratio,
        flagged,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn self_financing_zero_generator_is_exact() {
        let r = self_financing_check(&GeneratorSpec::zero(), -1.0, &CheckSettings::default()).unwrap();
        assert!(r.holds && r.consistent);
        assert_eq!(r.solution_deviation, 0.0);
    }

    #[test]
    fn self_financing_violation_fails_everywhere() {
        let g = GeneratorSpec::abs_z().shifted(0.2);
        let r = self_financing_check(&g, -1.0, &CheckSettings::default()).unwrap();
        assert!(!r.generator_condition && !r.solution_condition);
        assert_eq!(r.probe_condition, Some(false));
        assert!(r.consistent);
    }

    #[test]
    fn positive_level_rejected() {
        assert!(self_financing_check(&GeneratorSpec::zero(), 0.5, &CheckSettings::default()).is_err());
    }

    #[test]
    fn flatness_truncates_at_obstacle() {
        let obs = ObstacleSpec::linear_in_time(-0.5, 1.0);
        let r = flatness_check(&GeneratorSpec::abs_z(), &obs, 0.25, 0.0, &CheckSettings::default()).unwrap();
        assert!((r.sigma - 0.75).abs() < 1e-12);
        assert!(r.check.holds);
    }

    #[test]
    fn apriori_degenerate_branch() {
        let prob = RbsdeProblem::new(
            GeneratorSpec::zero(),
            Terminal::constant(0.0),
            ObstacleSpec::constant(-1.0),
            SdeCoeffs::brownian(1),
            TimeGrid::uniform(0.0, 1.0, 20).unwrap(),
            vec![0.0],
        )
        .unwrap();
        let sol = solve_tree(&prob, SchemeOptions::default()).unwrap();
        let r = apriori_check(&prob, &sol, 0, 20, 100, 0).unwrap();
        assert_eq!((r.lhs, r.rhs, r.ratio, r.flagged), (0.0, 0.0, 0.0, false));
    }
}
