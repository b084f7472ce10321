//! Local representation of the generator: for the reflected equation on
//! `[t, t + eps ^ tau]` with terminal value `eta + q.(X - x)`,
//!
//! `(Y_t - eta - E[K_end - K_t]) / eps  ->  g(t, eta, sigma^T q) + q.b(t, x)`
//!
//! as `eps -> 0`, where `tau` is the first time `eta + q.(X - x)` meets the
//! obstacle. This module estimates the left side along a schedule of `eps`
//! and judges convergence.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{dot, mean, GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid};
use crate::pathsim::{derive_seed, euler_maruyama, hitting_time_index, simulate_brownian_nested, PathBundle};
use crate::solvers::{lattice_backward, lsmc_backward, LatticeRun, LsmcRun, Mode, SchemeOptions, TreeModel};

/// Default schedule as fractions of `T - t`.
pub const DEFAULT_SCHEDULE: [f64; 5] = [0.2, 0.1, 0.05, 0.025, 0.0125];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RepBackend {
    Lsmc,
    /// Binomial tree with absorbing stopped nodes (scalar, constant
    /// coefficients); deterministic.
    Tree,
}

/// What the stopping time is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Barrier {
    Obstacle,
    /// A constant level `C >= sup L`.
    Constant(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSettings {
    pub n_paths: usize,
    pub seed: u64,
    pub degree: usize,
    pub replicates: usize,
    pub antithetic: bool,
    /// Subtract the sample mean of the zero-mean martingale part of the
    /// terminal value.
    pub control_variate: bool,
    /// Time steps of each short-horizon grid.
    pub steps_per_eps: usize,
    /// Lattice steps of each short-horizon tree.
    pub tree_steps_per_eps: usize,
}

impl Default for McSettings {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            seed: 0,
            degree: 3,
            replicates: 8,
            antithetic: false,
            control_variate: true,
            steps_per_eps: 20,
            tree_steps_per_eps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepTolerances {
    /// Absolute tolerance; `0.02 (1 + |target|)` when absent.
    pub abs_tol: Option<f64>,
    /// Standard errors allowed as noise margin.
    pub noise_sigmas: f64,
    /// Allowed barrier overshoot in units of the RMS one-step move of the
    /// gap `eta + q.(X - x) - L`.
    pub overshoot_factor: f64,
    /// Grid doublings tried after an excessive overshoot.
    pub max_refinements: usize,
}

impl Default for RepTolerances {
    fn default() -> Self {
        Self {
            abs_tol: None,
            noise_sigmas: 3.0,
            overshoot_factor: 8.0,
            max_refinements: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RepresentationInstance {
    pub gen: GeneratorSpec,
    pub coeffs: SdeCoeffs,
    pub obs: ObstacleSpec,
    pub t: f64,
    pub horizon: f64,
    pub x: Vec<f64>,
    pub eta: f64,
    pub q: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub p_norm: f64,
    pub backend: RepBackend,
    pub mc: McSettings,
    pub tol: RepTolerances,
    pub barrier: Barrier,
    /// Stop every path no later than `t + stop_cap`.
    pub stop_cap: Option<f64>,
    pub scheme: SchemeOptions,
}

impl RepresentationInstance {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        gen: GeneratorSpec,
        coeffs: SdeCoeffs,
        obs: ObstacleSpec,
        t: f64,
        horizon: f64,
        x: Vec<f64>,
        eta: f64,
        q: Vec<f64>,
    ) -> Result<Self> {
        if !(t >= 0.0 && t < horizon && horizon.is_finite()) {
            return Err(Error::config(format!("need 0 <= t < T, got t = {t}, T = {horizon}")));
        }
        if x.len() != coeffs.n() || q.len() != coeffs.n() {
            return Err(Error::config(format!(
                "x and q must have the state dimension {} (got {} and {})",
                coeffs.n(),
                x.len(),
                q.len()
            )));
        }
        let l = obs.eval(t, &x);
        if eta <= l {
            return Err(Error::precondition(format!("eta = {eta} must exceed L(t, x) = {l}")));
        }
        let span = horizon - t;
        Ok(Self {
            gen,
            coeffs,
            obs,
            t,
            horizon,
            x,
            eta,
            q,
            epsilons: DEFAULT_SCHEDULE.iter().map(|f| f * span).collect(),
            p_norm: 1.0,
            backend: RepBackend::Lsmc,
            mc: McSettings::default(),
            tol: RepTolerances::default(),
            barrier: Barrier::Obstacle,
            stop_cap: None,
            scheme: SchemeOptions::default(),
        })
    }

    pub fn with_epsilons(mut self, eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::config("epsilon schedule is empty"));
        }
        if eps.iter().any(|e| !(e.is_finite() && *e > 0.0)) || eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::config("epsilon schedule must be positive and strictly decreasing"));
        }
        if eps[0] > self.horizon - self.t + 1e-12 {
            return Err(Error::config(format!(
                "largest epsilon {} exceeds T - t = {}",
                eps[0],
                self.horizon - self.t
            )));
        }
        self.epsilons = eps;
        Ok(self)
    }

    pub fn with_p_norm(mut self, p: f64) -> Result<Self> {
        if !(1.0..2.0).contains(&p) {
            return Err(Error::config(format!("p must lie in [1, 2), got {p}")));
        }
        self.p_norm = p;
        Ok(self)
    }

    pub fn with_backend(mut self, backend: RepBackend) -> Self {
        self.backend = backend;
        self
    }

    pub fn with_mc(mut self, mc: McSettings) -> Self {
        self.mc = mc;
        self
    }

    pub fn with_tolerances(mut self, tol: RepTolerances) -> Self {
        self.tol = tol;
        self
    }

    pub fn with_barrier(mut self, barrier: Barrier) -> Self {
        self.barrier = barrier;
        self
    }

    pub fn with_stop_cap(mut self, cap: Option<f64>) -> Self {
        self.stop_cap = cap;
        self
    }

    pub fn with_scheme(mut self, scheme: SchemeOptions) -> Self {
        self.scheme = scheme;
        self
    }

    /// `g(t, eta, sigma^T q) + q.b(t, x)`, evaluated directly.
    pub fn target(&self) -> f64 {
        let sq = self.coeffs.sigma_t_q(self.t, &self.x, &self.q);
        self.gen.eval(self.t, self.eta, &sq) + self.coeffs.q_dot_b(self.t, &self.x, &self.q)
    }

    pub fn abs_tol(&self) -> f64 {
        self.tol.abs_tol.unwrap_or(0.02 * (1.0 + self.target().abs()))
    }

    fn barrier_obstacle(&self) -> ObstacleSpec {
        match self.barrier {
            Barrier::Obstacle => self.obs.clone(),
            Barrier::Constant(c) => ObstacleSpec::constant(c),
        }
    }
}

/// Per-path terminal values of the stopped equation.
#[derive(Debug, Clone, PartialEq)]
pub struct StoppedTerminal {
    pub values: Vec<f64>,
    /// Node at which each path stops, `min(eps_idx, tau_idx)`.
    pub stops: Vec<usize>,
    /// Largest `(L - (eta + q.(X - x)))^+` at a stopped node, i.e. how far
    /// the grid overshot the barrier before the value was lifted onto it.
    pub max_overshoot: f64,
}

/// `eta + q.(X_stop - x)` lifted onto the barrier at the stopped node.
pub fn short_horizon_terminal(
    bundle: &PathBundle,
    eta: f64,
    q: &[f64],
    tau_idx: &[usize],
    eps_idx: usize,
    barrier: &ObstacleSpec,
) -> Result<StoppedTerminal> {
    if tau_idx.len() != bundle.n_paths() || eps_idx > bundle.grid().n_steps() {
        return Err(Error::config("stop indices do not match the path bundle"));
    }
    let x0 = bundle.origin_x();
    let qx0 = dot(q, x0);
    let times = bundle.grid().nodes();
    let mut values = Vec::with_capacity(tau_idx.len());
    let mut stops = Vec::with_capacity(tau_idx.len());
    let mut max_overshoot = 0.0_f64;
    for (p, &tau) in tau_idx.iter().enumerate() {
        let s = tau.min(eps_idx);
        let x = bundle.x(s, p);
        let raw = eta + dot(q, x) - qx0;
        let l = barrier.eval(times[s], x);
        max_overshoot = max_overshoot.max(l - raw);
        let v = raw.max(l);
        if v < l {
            return Err(Error::Invariant(format!("stopped terminal {v} below barrier {l}")));
        }
        values.push(v);
        stops.push(s);
    }
    Ok(StoppedTerminal {
        values,
        stops,
        max_overshoot,
    })
}

/// One replicate's estimate at one `eps`.
#[derive(Debug, Clone, PartialEq, Serialize)]
struct Point {
    epsilon: f64,
    estimate: f64,
    k_free: f64,
    k_term: f64,
    truncated: f64,
    overshoot: f64,
    min_y: f64,
}

fn gap_rms(inst: &RepresentationInstance, bundle: &PathBundle, barrier: &ObstacleSpec) -> f64 {
    let (t0, t1) = (bundle.grid().time(0), bundle.grid().time(1));
    let qx0 = dot(&inst.q, &inst.x);
    let d0 = inst.eta - barrier.eval(t0, &inst.x);
    let np = bundle.n_paths();
    let ss: f64 = (0..np)
        .map(|p| {
            let x = bundle.x(1, p);
            let d1 = inst.eta + dot(&inst.q, x) - qx0 - barrier.eval(t1, x);
            (d1 - d0) * (d1 - d0)
        })
        .sum();
    (ss / np as f64).sqrt()
}

fn cap_index(inst: &RepresentationInstance, grid: &TimeGrid) -> Option<usize> {
    inst.stop_cap.map(|cap| {
        let k = ((cap / grid.spacing()) + 1e-9).floor() as usize;
        k.clamp(1, grid.n_steps())
    })
}

fn lsmc_point(inst: &RepresentationInstance, bundle: &PathBundle) -> Result<Point> {
    let grid = bundle.grid();
    let last = grid.n_steps();
    let eps = grid.horizon() - grid.t0();
    let barrier = inst.barrier_obstacle();
    let mut tau = hitting_time_index(bundle, inst.eta, &inst.q, &barrier)?;
    if let Some(c) = cap_index(inst, grid) {
        tau.iter_mut().for_each(|v| *v = (*v).min(c));
    }
    let term = short_horizon_terminal(bundle, inst.eta, &inst.q, &tau, last, &barrier)?;
    let allowed = inst.tol.overshoot_factor * gap_rms(inst, bundle, &barrier);
    if term.max_overshoot > allowed {
        return Err(Error::GridTooCoarse {
            overshoot: term.max_overshoot,
            tolerance: allowed,
        });
    }
    let out = lsmc_backward(&LsmcRun {
        gen: &inst.gen,
        obs: &inst.obs,
        bundle,
        last,
        terminal: &term.values,
        stops: Some(&term.stops),
        mode: Mode::Reflect,
        degree: inst.mc.degree,
        opts: inst.scheme,
        keep: false,
    })?;
    let cv = if inst.mc.control_variate {
        martingale_mean(inst, bundle, &term.stops)
    } else {
        0.0
    };
    let k = mean(&out.k_paths);
    let y = out.y0 - cv;
    let np = term.stops.len() as f64;
    Ok(Point {
        epsilon: eps,
        estimate: (y - inst.eta - k) / eps,
        k_free: (y - inst.eta) / eps,
        k_term: k / eps,
        truncated: term.stops.iter().filter(|&&s| s < last).count() as f64 / np,
        overshoot: term.max_overshoot,
        min_y: out.min_y,
    })
}

/// Sample mean of `sum_{i < stop} q.sigma(t_i, X_i) dW_i`, whose expectation
/// is zero.
fn martingale_mean(inst: &RepresentationInstance, bundle: &PathBundle, stops: &[usize]) -> f64 {
    use rayon::prelude::*;
    let grid = bundle.grid();
    let (n, d) = (inst.coeffs.n(), inst.coeffs.d());
    let parts: Vec<f64> = (0..bundle.n_paths())
        .into_par_iter()
        .map_init(
            || vec![0.0; n * d],
            |sig, p| {
                let mut acc = 0.0;
                for i in 0..stops[p] {
                    inst.coeffs.diffusion_into(grid.time(i), bundle.x(i, p), sig);
                    let dw = bundle.dw(i, p);
                    for (k, qk) in inst.q.iter().enumerate() {
                        acc += qk * dot(&sig[k * d..(k + 1) * d], dw);
                    }
                }
                acc
            },
        )
        .collect();
    mean(&parts)
}

fn tree_point(inst: &RepresentationInstance, eps: f64, steps: usize) -> Result<Point> {
    let c = inst
        .coeffs
        .constant_coeffs()
        .filter(|c| c.b.len() == 1 && c.sigma.len() == 1)
        .ok_or_else(|| Error::config("the tree backend needs scalar constant coefficients"))?;
    let grid = TimeGrid::uniform(inst.t, inst.t + eps, steps)?;
    let tree = TreeModel::new(grid.clone(), inst.x[0], c.b[0], c.sigma[0].abs())?;
    let barrier = inst.barrier_obstacle();
    let (x0, q, eta) = (inst.x[0], inst.q[0], inst.eta);
    let cap = cap_index(inst, &grid);
    let times = grid.nodes().to_vec();
    let lifted = |i: usize, x: f64| (eta + q * (x - x0)).max(barrier.eval(times[i], &[x]));
    let absorb = |i: usize, x: f64| {
        let hit = i > 0 && eta + q * (x - x0) <= barrier.eval(times[i], &[x]);
        (hit || cap.is_some_and(|c| i >= c)).then(|| lifted(i, x))
    };
    let n = steps;
    let terminal = |x: f64| lifted(n, x);
    let sol = lattice_backward(&LatticeRun {
        gen: &inst.gen,
        obs: &inst.obs,
        tree: &tree,
        terminal: &terminal,
        absorb: Some(&absorb),
        mode: Mode::Reflect,
        opts: inst.scheme,
    })?;
    let mass = sol.lattice_mass();
    let mut truncated = 0.0;
    let mut overshoot = 0.0_f64;
    let mut min_y = f64::INFINITY;
    for i in 0..=n {
        for j in 0..=i {
            if mass[i][j] == 0.0 {
                continue;
            }
            min_y = min_y.min(sol.y[i][j]);
            let x = tree.state(i, j);
            if i < n && absorb(i, x).is_some() {
                truncated += mass[i][j];
                overshoot = overshoot.max(barrier.eval(times[i], &[x]) - (eta + q * (x - x0)));
            }
        }
    }
    let y = sol.y[0][0];
    let k = sol.expected_k_total();
    Ok(Point {
        epsilon: eps,
        estimate: (y - eta - k) / eps,
        k_free: (y - eta) / eps,
        k_term: k / eps,
        truncated,
        overshoot,
        min_y,
    })
}

/// All schedule points of one Monte Carlo replicate, sharing one fine
/// Brownian path per simulated path.
fn lsmc_replicate(inst: &RepresentationInstance, eps: &[f64], steps: usize, seed: u64) -> Result<Vec<Point>> {
    let eps_min = *eps.last().unwrap();
    let blocks: Vec<f64> = eps.iter().map(|e| e / eps_min).collect();
    let nested = blocks.iter().all(|b| (b - b.round()).abs() < 1e-9);
    let d = inst.coeffs.d();
    let mc = &inst.mc;
    let mut out = Vec::with_capacity(eps.len());
    if nested {
        let b0 = blocks[0].round() as usize;
        let fine = TimeGrid::uniform(inst.t, inst.t + eps[0], b0 * steps)?;
        let spec: Vec<(usize, usize)> = blocks.iter().map(|b| (b.round() as usize, steps)).collect();
        let sets = simulate_brownian_nested(&fine, mc.n_paths, d, seed, mc.antithetic, &spec)?;
        for (inc, &e) in sets.into_iter().zip(eps) {
            let bundle = euler_maruyama(&inst.coeffs, inst.t, &inst.x, inc).map_err(|err| at(e, err))?;
            out.push(lsmc_point(inst, &bundle).map_err(|err| at(e, err))?);
        }
    } else {
        for (k, &e) in eps.iter().enumerate() {
            let fine = TimeGrid::uniform(inst.t, inst.t + e, steps)?;
            let sets = simulate_brownian_nested(&fine, mc.n_paths, d, derive_seed(seed, k as u64), mc.antithetic, &[(1, steps)])?;
            let inc = sets.into_iter().next().unwrap();
            let bundle = euler_maruyama(&inst.coeffs, inst.t, &inst.x, inc).map_err(|err| at(e, err))?;
            out.push(lsmc_point(inst, &bundle).map_err(|err| at(e, err))?);
        }
    }
    Ok(out)
}

fn at(epsilon: f64, err: Error) -> Error {
    match err {
        Error::AtEpsilon { .. } => err,
        other => Error::AtEpsilon {
            epsilon,
            source: Box::new(other),
        },
    }
}

fn is_too_coarse(err: &Error) -> bool {
    match err {
        Error::GridTooCoarse { .. } => true,
        Error::AtEpsilon { source, .. } => is_too_coarse(source),
        _ => false,
    }
}

/// Points for every replicate, `[replicate][eps]`, refining the grid after
/// an excessive overshoot. Returns the steps per `eps` finally used.
fn run_points(inst: &RepresentationInstance, eps: &[f64]) -> Result<(Vec<Vec<Point>>, usize)> {
    let mut steps = match inst.backend {
        RepBackend::Tree => inst.mc.tree_steps_per_eps,
        RepBackend::Lsmc => inst.mc.steps_per_eps,
    }
    .max(1);
    let mut attempt = 0;
    loop {
        let res: Result<Vec<Vec<Point>>> = match inst.backend {
            RepBackend::Tree => eps
                .iter()
                .map(|&e| tree_point(inst, e, steps).map_err(|err| at(e, err)))
                .collect::<Result<Vec<_>>>()
                .map(|v| vec![v]),
            RepBackend::Lsmc => (0..inst.mc.replicates.max(1))
                .map(|r| lsmc_replicate(inst, eps, steps, derive_seed(inst.mc.seed, r as u64)))
                .collect(),
        };
        match res {
            Err(e) if is_too_coarse(&e) && attempt < inst.tol.max_refinements => {
                attempt += 1;
                steps *= 2;
            }
            other => return other.map(|v| (v, steps)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Converged,
    Inconclusive,
    Failed,
}

/// Convergence rule: the last error is within `abs_tol` plus `z` standard
/// errors, and over the final three points the error does not grow beyond
/// `max(previous, abs_tol)` plus `z` combined standard errors. Otherwise the
/// run is inconclusive when the noise alone exceeds `abs_tol`, else failed.
pub fn convergence_verdict(errors: &[f64], stderrs: &[f64], abs_tol: f64, z: f64) -> Verdict {
    let n = errors.len();
    if n == 0 {
        return Verdict::Inconclusive;
    }
    let last_ok = errors[n - 1] <= abs_tol + z * stderrs[n - 1];
    let tail_ok = (n.saturating_sub(3)..n - 1).all(|k| {
        let noise = z * (stderrs[k].powi(2) + stderrs[k + 1].powi(2)).sqrt();
        errors[k + 1] <= errors[k].max(abs_tol) + noise
    });
    if last_ok && tail_ok {
        Verdict::Converged
    } else if z * stderrs[n - 1] > abs_tol {
        Verdict::Inconclusive
    } else {
        Verdict::Failed
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub estimate: f64,
    pub target: f64,
    pub abs_error: f64,
    pub stderr: f64,
    pub tau_truncated_fraction: f64,
    /// `(mean_r |estimate_r - target|^p)^(1/p)` over replicates.
    pub lp_error: f64,
    /// Mean `K` increment divided by `eps`.
    pub k_term: f64,
    /// Quotient without the `K` correction.
    pub k_free_estimate: f64,
    pub k_free_error: f64,
    pub k_free_stderr: f64,
    pub max_overshoot: f64,
    pub min_y: f64,
    pub replicate_estimates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepresentationReport {
    pub target: f64,
    pub abs_tol: f64,
    pub p_norm: f64,
    pub backend: RepBackend,
    pub n_paths: usize,
    pub replicates: usize,
    pub seed: u64,
    pub steps_per_eps: usize,
    pub rows: Vec<EpsilonRow>,
    pub verdict: Verdict,
    pub k_free_verdict: Verdict,
    pub richardson_limit: Option<f64>,
    pub loglog_slope: Option<f64>,
}

impl RepresentationReport {
    pub fn final_row(&self) -> &EpsilonRow {
        self.rows.last().expect("report has rows")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(
            w,
            "epsilon,estimate,target,abs_error,stderr,tau_truncated_fraction,lp_error,k_term,k_free_estimate"
        )?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.epsilon,
                r.estimate,
                r.target,
                r.abs_error,
                r.stderr,
                r.tau_truncated_fraction,
                r.lp_error,
                r.k_term,
                r.k_free_estimate
            )?;
        }
        Ok(())
    }
}

fn mean_sd(v: &[f64]) -> (f64, f64) {
    let m = mean(v);
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (v.len() - 1) as f64;
    (m, var.sqrt())
}

fn loglog_slope(eps: &[f64], err: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .zip(err)
        .filter(|(_, e)| **e > 0.0)
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn build_report(inst: &RepresentationInstance, points: &[Vec<Point>], steps: usize) -> RepresentationReport {
    let target = inst.target();
    let abs_tol = inst.abs_tol();
    let reps = points.len();
    let sqrt_r = (reps as f64).sqrt();
    let p = inst.p_norm;
    let rows: Vec<EpsilonRow> = (0..points[0].len())
        .map(|k| {
            let col: Vec<&Point> = points.iter().map(|r| &r[k]).collect();
            let ests: Vec<f64> = col.iter().map(|c| c.estimate).collect();
            let free: Vec<f64> = col.iter().map(|c| c.k_free).collect();
            let (m, sd) = mean_sd(&ests);
            let (mf, sdf) = mean_sd(&free);
            let lp = (ests.iter().map(|e| (e - target).abs().powf(p)).sum::<f64>() / reps as f64).powf(1.0 / p);
            EpsilonRow {
                epsilon: col[0].epsilon,
                estimate: m,
                target,
                abs_error: (m - target).abs(),
                stderr: sd / sqrt_r,
                tau_truncated_fraction: mean(&col.iter().map(|c| c.truncated).collect::<Vec<_>>()),
                lp_error: lp,
                k_term: mean(&col.iter().map(|c| c.k_term).collect::<Vec<_>>()),
                k_free_estimate: mf,
                k_free_error: (mf - target).abs(),
                k_free_stderr: sdf / sqrt_r,
                max_overshoot: col.iter().map(|c| c.overshoot).fold(0.0, f64::max),
                min_y: col.iter().map(|c| c.min_y).fold(f64::INFINITY, f64::min),
                replicate_estimates: ests,
            }
        })
        .collect();
    let z = inst.tol.noise_sigmas;
    let errs: Vec<f64> = rows.iter().map(|r| r.abs_error).collect();
    let ses: Vec<f64> = rows.iter().map(|r| r.stderr).collect();
    let verdict = convergence_verdict(&errs, &ses, abs_tol, z);
    let ferrs: Vec<f64> = rows.iter().map(|r| r.k_free_error).collect();
    let fses: Vec<f64> = rows.iter().map(|r| r.k_free_stderr).collect();
    let k_free_verdict = convergence_verdict(&ferrs, &fses, abs_tol, z);
    let richardson_limit = (rows.len() >= 2).then(|| {
        let (a, b) = (&rows[rows.len() - 2], &rows[rows.len() - 1]);
        b.estimate + (b.estimate - a.estimate) * b.epsilon / (a.epsilon - b.epsilon)
    });
    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    RepresentationReport {
        target,
        abs_tol,
        p_norm: p,
        backend: inst.backend,
        n_paths: if inst.backend == RepBackend::Lsmc { inst.mc.n_paths } else { 0 },
        replicates: reps,
        seed: inst.mc.seed,
        steps_per_eps: steps,
        richardson_limit,
        loglog_slope: loglog_slope(&eps, &errs),
        rows,
        verdict,
        k_free_verdict,
    }
}

/// Estimate of the quotient at a single `eps`, mean over replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuotientEstimate {
    pub epsilon: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub k_term: f64,
    pub k_free_estimate: f64,
    pub tau_truncated_fraction: f64,
}

pub fn difference_quotient(inst: &RepresentationInstance, eps: f64) -> Result<QuotientEstimate> {
    if !(eps > 0.0 && eps <= inst.horizon - inst.t + 1e-12) {
        return Err(Error::config(format!("epsilon {eps} outside (0, T - t]")));
    }
    let (points, steps) = run_points(inst, &[eps])?;
    let rep = build_report(inst, &points, steps);
    let r = rep.final_row();
    Ok(QuotientEstimate {
        epsilon: r.epsilon,
        estimate: r.estimate,
        stderr: r.stderr,
        k_term: r.k_term,
        k_free_estimate: r.k_free_estimate,
        tau_truncated_fraction: r.tau_truncated_fraction,
    })
}

/// Run the whole schedule with common random numbers and judge convergence.
pub fn representation_sweep(inst: &RepresentationInstance) -> Result<RepresentationReport> {
    let (points, steps) = run_points(inst, &inst.epsilons)?;
    Ok(build_report(inst, &points, steps))
}

/// Preset with `n = d`, `b = 0`, `sigma = I`, `x = 0` and `q = z`, under
/// which the target is `g(t, eta, z)`.
pub fn corollary34_config(
    gen: GeneratorSpec,
    obs: ObstacleSpec,
    z: Vec<f64>,
    eta: f64,
    t: f64,
    horizon: f64,
) -> Result<RepresentationInstance> {
    let d = z.len();
    if d == 0 {
        return Err(Error::config("z must be non-empty"));
    }
    RepresentationInstance::new(gen, SdeCoeffs::brownian(d), obs, t, horizon, vec![0.0; d], eta, z)
}

/// Deterministic states around `x` at which obstacle conditions are sampled.
fn probe_states(inst: &RepresentationInstance) -> Vec<Vec<f64>> {
    let spread = 4.0 * inst.epsilons[0].sqrt();
    let mut out = vec![inst.x.clone()];
    for k in 0..inst.x.len() {
        for m in [-4.0, -2.0, -1.0, 1.0, 2.0, 4.0] {
            let mut x = inst.x.clone();
            x[k] += m * spread / 4.0;
            out.push(x);
        }
    }
    out
}

fn probe_times(inst: &RepresentationInstance) -> Vec<f64> {
    (0..=40).map(|k| inst.t + inst.epsilons[0] * k as f64 / 40.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorollaryReport {
    pub sweep: RepresentationReport,
    /// Mean `K` increment over `eps` at the smallest `eps`.
    pub k_ratio: f64,
    pub k_tolerance: f64,
    /// Verdict of the quotient without the `K` correction.
    pub simplified_verdict: Verdict,
    /// Smallest `Y` seen; checked against the level for bounded obstacles.
    pub min_y: f64,
    pub y_floor: Option<f64>,
    pub passed: bool,
}

fn corollary_report(sweep: RepresentationReport, y_floor: Option<f64>, floor_tol: f64) -> CorollaryReport {
    let last = sweep.final_row();
    let k_tolerance = 0.01 * (1.0 + sweep.target.abs());
    let k_ratio = last.k_term;
    let min_y = sweep.rows.iter().map(|r| r.min_y).fold(f64::INFINITY, f64::min);
    let floor_ok = y_floor.is_none_or(|c| min_y >= c - floor_tol);
    let simplified_verdict = sweep.k_free_verdict;
    let passed = k_ratio <= k_tolerance && simplified_verdict == Verdict::Converged && floor_ok;
    CorollaryReport {
        k_ratio,
        k_tolerance,
        simplified_verdict,
        min_y,
        y_floor,
        passed,
        sweep,
    }
}

/// Itô-form obstacle `L = l0 + u t + v.X` with `g(s, L_s, V_s) + U_s >= 0`:
/// the `K` increment vanishes relative to `eps` and the quotient without
/// it converges. The condition is sampled on a grid of times and states
/// first.
pub fn corollary32_check(inst: &RepresentationInstance) -> Result<CorollaryReport> {
    let ito = inst
        .obs
        .ito_form()
        .ok_or_else(|| Error::config("the Itô-obstacle check needs an obstacle in Itô form"))?;
    for &s in &probe_times(inst) {
        for x in probe_states(inst) {
            let l = inst.obs.eval(s, &x);
            let v = inst.coeffs.sigma_t_q(s, &x, &ito.vol);
            let u = ito.drift + inst.coeffs.q_dot_b(s, &x, &ito.vol);
            let val = inst.gen.eval(s, l, &v) + u;
            if val < -1e-12 {
                return Err(Error::precondition(format!(
                    "g(s, L, V) + U = {val} < 0 at s = {s}, x = {x:?}"
                )));
            }
        }
    }
    Ok(corollary_report(representation_sweep(inst)?, None, 0.0))
}

/// Bounded obstacle `sup L <= C < eta` with a generator vanishing at
/// `z = 0`: stopping at the level `C` keeps `Y >= C`, so `K` vanishes.
pub fn corollary33_check(inst: &RepresentationInstance, level: f64, floor_tol: f64) -> Result<CorollaryReport> {
    if inst.eta <= level {
        return Err(Error::precondition(format!("eta = {} must exceed C = {level}", inst.eta)));
    }
    if !inst.gen.satisfies_a3() {
        return Err(Error::precondition("the generator is not declared to vanish at z = 0"));
    }
    match inst.obs.upper_bound() {
        Some(c) if c > level => {
            return Err(Error::precondition(format!("declared obstacle bound {c} exceeds C = {level}")));
        }
        Some(_) => {}
        None => {
            for &s in &probe_times(inst) {
                for x in probe_states(inst) {
                    let l = inst.obs.eval(s, &x);
                    if l > level + 1e-12 {
                        return Err(Error::precondition(format!("L = {l} exceeds C = {level} at s = {s}")));
                    }
                }
            }
        }
    }
    let inst = inst.clone().with_barrier(Barrier::Constant(level));
    Ok(corollary_report(representation_sweep(&inst)?, Some(level), floor_tol))
}
