//! Recombining binomial tree for scalar forward dynamics with constant
//! drift and volatility.

use super::{step_value, Mode, RbsdeProblem, SchemeOptions};
use crate::error::{Error, Result};
use crate::model::{DiscreteSolution, GeneratorSpec, Layout, ObstacleSpec, SolverFlags, StopMask, TimeGrid};

/// Node `(i, j)` sits at `x0 + b (t_i - t0) + sigma (2j - i) sqrt(dt)`; up and
/// down moves have probability one half.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    grid: TimeGrid,
    x0: f64,
    b: f64,
    sigma: f64,
}

impl TreeModel {
    pub fn new(grid: TimeGrid, x0: f64, b: f64, sigma: f64) -> Result<Self> {
        if !grid.is_uniform() {
            return Err(Error::config("the binomial tree needs a uniform grid"));
        }
        if !(x0.is_finite() && b.is_finite() && sigma.is_finite()) || sigma < 0.0 {
            return Err(Error::config("tree parameters must be finite with sigma >= 0"));
        }
        Ok(Self { grid, x0, b, sigma })
    }

    pub fn from_problem(prob: &RbsdeProblem) -> Result<Self> {
        let c = prob
            .forward
            .constant_coeffs()
            .filter(|c| c.b.len() == 1 && c.sigma.len() == 1)
            .ok_or_else(|| Error::config("the binomial tree needs scalar constant forward coefficients"))?;
        Self::new(prob.grid.clone(), prob.x0[0], c.b[0], c.sigma[0].abs())
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn dt(&self) -> f64 {
        self.grid.spacing()
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn drift(&self) -> f64 {
        self.b
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    #[inline]
    pub fn state(&self, i: usize, j: usize) -> f64 {
        let t = self.grid.time(i) - self.grid.t0();
        self.x0 + self.b * t + self.sigma * (2.0 * j as f64 - i as f64) * self.dt().sqrt()
    }
}

type AbsorbFn<'a> = dyn Fn(usize, f64) -> Option<f64> + Sync + 'a;

pub(crate) struct LatticeRun<'a> {
    pub gen: &'a GeneratorSpec,
    pub obs: &'a ObstacleSpec,
    pub tree: &'a TreeModel,
    /// Terminal value as a function of the terminal state.
    pub terminal: &'a (dyn Fn(f64) -> f64 + Sync),
    /// `Some(v)` freezes node `(i, x)` at value `v`.
    pub absorb: Option<&'a AbsorbFn<'a>>,
    pub mode: Mode,
    pub opts: SchemeOptions,
}

pub(crate) fn lattice_backward(run: &LatticeRun<'_>) -> Result<DiscreteSolution> {
    let tree = run.tree;
    let grid = tree.grid();
    let n = tree.n_steps();
    let dt = tree.dt();
    let two_sqdt = 2.0 * dt.sqrt();
    let z_degenerate = tree.sigma == 0.0;

    let mut y: Vec<Vec<f64>> = (0..=n).map(|i| vec![0.0; i + 1]).collect();
    let mut obstacle: Vec<Vec<f64>> = (0..=n).map(|i| vec![0.0; i + 1]).collect();
    let mut z: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i + 1]).collect();
    let mut dk: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i + 1]).collect();
    let mut mask: Option<Vec<Vec<bool>>> = run.absorb.map(|_| (0..=n).map(|i| vec![false; i + 1]).collect());

    let tn = grid.horizon();
    for j in 0..=n {
        let x = tree.state(n, j);
        obstacle[n][j] = run.obs.eval(tn, &[x]);
        y[n][j] = (run.terminal)(x);
        if !y[n][j].is_finite() {
            return Err(Error::NonFinite {
                node: n,
                time: tn,
                what: "terminal value",
            });
        }
    }

    for i in (0..n).rev() {
        let t = grid.time(i);
        let (cur, next) = y.split_at_mut(i + 1);
        let (cur, next) = (&mut cur[i], &next[0]);
        for j in 0..=i {
            let x = tree.state(i, j);
            let l = run.obs.eval(t, &[x]);
            obstacle[i][j] = l;
            if let Some(v) = run.absorb.and_then(|f| f(i, x)) {
                cur[j] = v;
                if let Some(m) = mask.as_mut() {
                    m[i][j] = true;
                }
                continue;
            }
            let (up, down) = (next[j + 1], next[j]);
            let e = 0.5 * (up + down);
            let zv = if z_degenerate { 0.0 } else { (up - down) / two_sqdt };
            let (yv, inc) = step_value(run.gen, run.mode, t, e, l, &[zv], dt, run.opts.picard_passes);
            if !yv.is_finite() {
                return Err(Error::NonFinite {
                    node: i,
                    time: t,
                    what: "Y",
                });
            }
            cur[j] = yv;
            z[i][j] = zv;
            dk[i][j] = inc;
        }
    }

    Ok(DiscreteSolution {
        grid: grid.clone(),
        layout: Layout::Lattice,
        dim_z: 1,
        y,
        z,
        dk,
        obstacle,
        reflected: run.mode == Mode::Reflect,
        stops: mask.map(StopMask::Lattice),
        flags: SolverFlags {
            z_degenerate,
            regression_fallbacks: Vec::new(),
            picard_passes: run.opts.picard_passes,
        },
    })
}

pub(crate) fn solve_tree_mode(prob: &RbsdeProblem, mode: Mode, opts: SchemeOptions) -> Result<DiscreteSolution> {
    let tree = TreeModel::from_problem(prob)?;
    let n = tree.n_steps();
    if mode != Mode::Free {
        let states: Vec<[f64; 1]> = (0..=n).map(|j| [tree.state(n, j)]).collect();
        prob.check_terminal(states.iter().map(|s| &s[..]))?;
    }
    let terminal = |x: f64| prob.terminal.eval(&[x]);
    let sol = lattice_backward(&LatticeRun {
        gen: &prob.generator,
        obs: &prob.obstacle,
        tree: &tree,
        terminal: &terminal,
        absorb: None,
        mode,
        opts,
    })?;
    sol.post_check(opts.skorokhod_tol)?;
    Ok(sol)
}

/// Reflected solution on the binomial tree.
pub fn solve_tree(prob: &RbsdeProblem, opts: SchemeOptions) -> Result<DiscreteSolution> {
    solve_tree_mode(prob, Mode::Reflect, opts)
}

/// The same scheme with the obstacle ignored.
pub fn solve_tree_unreflected(prob: &RbsdeProblem, opts: SchemeOptions) -> Result<DiscreteSolution> {
    solve_tree_mode(prob, Mode::Free, opts)
}
