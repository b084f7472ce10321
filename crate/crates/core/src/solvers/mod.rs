//! Backward solvers for the reflected equation on a time grid.
//!
//! Every solver applies the same one-step update: a conditional expectation
//! `E` of the next value, an explicit driver step `E + dt g(t, ., Z)` and the
//! reflection `Y = max(., L)`, whose excess is the increment `dK`. The
//! argument handed to `g` is first projected onto `[L, oo)`, so `g` is never
//! evaluated below the obstacle.

mod comparison;
mod lsmc;
mod penalty;
pub(crate) mod regression;
mod snell;
mod tree;

use std::fmt;

use serde::{Deserialize, Serialize};
use std::sync::Arc;

pub use comparison::{compare_solutions, comparison_check, ComparisonReport, OrderRegion};
pub(crate) use lsmc::{lsmc_backward, LsmcRun};
pub use lsmc::{solve_lsmc, solve_lsmc_unreflected};
pub use penalty::{solve_penalized, PenaltySweep, penalty_sweep};
pub use regression::PolyBasis;
pub use snell::{enumerate_snell, ENUMERATION_LIMIT};
pub(crate) use tree::{lattice_backward, LatticeRun};
pub use tree::{solve_tree, solve_tree_unreflected, TreeModel};

use crate::error::{Error, Result};
use crate::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid, DEFAULT_SKOROKHOD_TOL};
use crate::pathsim::PathBundle;

type TerminalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Terminal condition `xi = Phi(X_T)`.
#[derive(Clone)]
pub struct Terminal {
    name: String,
    f: Arc<TerminalFn>,
}

impl fmt::Debug for Terminal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Terminal").field("name", &self.name).finish()
    }
}

impl Terminal {
    pub fn new<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), move |_| c)
    }

    /// `c0 + q.x`.
    pub fn linear(c0: f64, q: Vec<f64>) -> Self {
        let name = format!("linear(c0={c0}, q={q:?})");
        Self::new(name, move |x| c0 + crate::model::dot(&q, x))
    }

    /// `(strike - exp(x_0))^+`.
    pub fn put_on_log(strike: f64) -> Self {
        Self::new(format!("put(strike={strike})"), move |x| (strike - x[0].exp()).max(0.0))
    }

    /// The obstacle itself at the horizon.
    pub fn obstacle_at(obs: &ObstacleSpec, horizon: f64) -> Self {
        let o = obs.clone();
        Self::new(format!("obstacle {} at T", obs.name()), move |x| o.eval(horizon, x))
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Full problem description: generator, terminal condition, obstacle,
/// forward dynamics started at `x0` at the first grid node.
#[derive(Debug, Clone)]
pub struct RbsdeProblem {
    pub generator: GeneratorSpec,
    pub terminal: Terminal,
    pub obstacle: ObstacleSpec,
    pub forward: SdeCoeffs,
    pub grid: TimeGrid,
    pub x0: Vec<f64>,
}

impl RbsdeProblem {
    pub fn new(
        generator: GeneratorSpec,
        terminal: Terminal,
        obstacle: ObstacleSpec,
        forward: SdeCoeffs,
        grid: TimeGrid,
        x0: Vec<f64>,
    ) -> Result<Self> {
        if x0.len() != forward.n() {
            return Err(Error::config(format!(
                "x0 has dimension {}, forward coefficients expect {}",
                x0.len(),
                forward.n()
            )));
        }
        Ok(Self {
            generator,
            terminal,
            obstacle,
            forward,
            grid,
            x0,
        })
    }

    /// `xi >= L(T, .)` at every listed terminal state.
    pub(crate) fn check_terminal<'a>(&self, states: impl Iterator<Item = &'a [f64]>) -> Result<()> {
        let horizon = self.grid.horizon();
        for (k, x) in states.enumerate() {
            let xi = self.terminal.eval(x);
            let l = self.obstacle.eval(horizon, x);
            if xi < l - 1e-12 * (1.0 + l.abs()) {
                return Err(Error::TerminalBelowObstacle {
                    state: k,
                    xi,
                    obstacle: l,
                });
            }
        }
        Ok(())
    }
}

/// What the regression solver feeds into the next regression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LsmcValue {
    /// Realised path values, restarted at the obstacle where the fitted
    /// value is reflected.
    #[default]
    Pathwise,
    /// The fitted values themselves.
    Fitted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeOptions {
    /// Extra fixed-point passes of the explicit driver step.
    pub picard_passes: usize,
    pub skorokhod_tol: f64,
    pub lsmc_value: LsmcValue,
    /// Add the obstacle value to the regression features.
    pub obstacle_basis: bool,
}

impl Default for SchemeOptions {
    fn default() -> Self {
        Self {
            picard_passes: 1,
            skorokhod_tol: DEFAULT_SKOROKHOD_TOL,
            lsmc_value: LsmcValue::default(),
            obstacle_basis: true,
        }
    }
}

/// Where conditional expectations come from.
#[derive(Debug, Clone, Copy)]
pub enum Backend<'a> {
    /// Recombining binomial tree on the problem grid (scalar, constant
    /// coefficients).
    Tree,
    /// Regression on simulated paths.
    Lsmc { bundle: &'a PathBundle, degree: usize },
}

/// How the obstacle enters the one-step update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Mode {
    Reflect,
    Free,
    /// Explicit penalty `n (L - E)^+ dt`.
    Penalty(f64),
}

/// One backward step from the conditional expectation `e`; returns `(Y, dK)`.
#[inline]
pub(crate) fn step_value(
    gen: &GeneratorSpec,
    mode: Mode,
    t: f64,
    e: f64,
    l: f64,
    z: &[f64],
    dt: f64,
    passes: usize,
) -> (f64, f64) {
    match mode {
        Mode::Reflect => {
            let mut yt = e + dt * gen.eval(t, e.max(l), z);
            for _ in 0..passes {
                yt = e + dt * gen.eval(t, yt.max(l), z);
            }
            let y = yt.max(l);
            (y, y - yt)
        }
        Mode::Free | Mode::Penalty(_) => {
            let mut yt = e + dt * gen.eval(t, e, z);
            for _ in 0..passes {
                yt = e + dt * gen.eval(t, yt, z);
            }
            match mode {
                Mode::Penalty(n) => {
                    let push = dt * n * (l - e).max(0.0);
                    (yt + push, push)
                }
                _ => (yt, 0.0),
            }
        }
    }
}

/// Solve with the chosen backend; the output passes the shared post-check.
pub fn solve(prob: &RbsdeProblem, backend: Backend<'_>, opts: SchemeOptions) -> Result<crate::model::DiscreteSolution> {
    match backend {
        Backend::Tree => solve_tree(prob, opts),
        Backend::Lsmc { bundle, degree } => solve_lsmc(prob, bundle, degree, opts),
    }
}
