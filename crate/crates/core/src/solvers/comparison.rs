//! Ordering of two solutions computed on the same lattice or paths.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{solve, Backend, RbsdeProblem, SchemeOptions, TreeModel};
use crate::error::{Error, Result};
use crate::model::DiscreteSolution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    /// `Y1 >= Y2 - tolerance` at every node.
    pub holds: bool,
    /// Smallest `Y1 - Y2` over all nodes.
    pub min_gap: f64,
    /// `(node, state)` where `min_gap` is attained.
    pub worst: Option<(usize, usize)>,
    pub tolerance: f64,
}

/// Region in which the generator ordering `g1 >= g2` is sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrderRegion {
    pub y_min: f64,
    pub y_max: f64,
    pub z_radius: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for OrderRegion {
    fn default() -> Self {
        Self {
            y_min: -10.0,
            y_max: 10.0,
            z_radius: 10.0,
            samples: 2000,
            seed: 0,
        }
    }
}

/// Node-wise comparison of two solutions of identical shape.
pub fn compare_solutions(s1: &DiscreteSolution, s2: &DiscreteSolution, tolerance: f64) -> Result<ComparisonReport> {
    if s1.layout != s2.layout || s1.y.len() != s2.y.len() || s1.y.iter().zip(&s2.y).any(|(a, b)| a.len() != b.len()) {
        return Err(Error::config("solutions live on different lattices or path sets"));
    }
    let mut min_gap = f64::INFINITY;
    let mut worst = None;
    for (i, (a, b)) in s1.y.iter().zip(&s2.y).enumerate() {
        for (s, (u, v)) in a.iter().zip(b).enumerate() {
            if u - v < min_gap {
                min_gap = u - v;
                worst = Some((i, s));
            }
        }
    }
    Ok(ComparisonReport {
        holds: min_gap >= -tolerance,
        min_gap,
        worst,
        tolerance,
    })
}

/// Solve both problems on the same backend and check `Y1 >= Y2` everywhere.
/// The hypotheses `g1 >= g2` (sampled in `region`), `xi1 >= xi2` and
/// `L1 >= L2` (on the terminal and sampled states) are checked first.
pub fn comparison_check(
    p1: &RbsdeProblem,
    p2: &RbsdeProblem,
    backend: Backend<'_>,
    opts: SchemeOptions,
    region: OrderRegion,
    tolerance: f64,
) -> Result<ComparisonReport> {
    if p1.grid != p2.grid || p1.x0 != p2.x0 {
        return Err(Error::config("compared problems must share the grid and the start state"));
    }
    let d = p1.forward.d();
    let mut rng = ChaCha8Rng::seed_from_u64(region.seed);
    let (t0, t1) = (p1.grid.t0(), p1.grid.horizon());
    for _ in 0..region.samples {
        let t = rng.random_range(t0..=t1);
        let y = rng.random_range(region.y_min..=region.y_max);
        let z: Vec<f64> = (0..d).map(|_| rng.random_range(-region.z_radius..=region.z_radius)).collect();
        let (a, b) = (p1.generator.eval(t, y, &z), p2.generator.eval(t, y, &z));
        if a < b {
            return Err(Error::precondition(format!(
                "g1 < g2 at t = {t}, y = {y}, z = {z:?} ({a} < {b})"
            )));
        }
    }
    let terminal_states: Vec<Vec<f64>> = match backend {
        Backend::Tree => {
            let tree = TreeModel::from_problem(p1)?;
            let n = tree.n_steps();
            (0..=n).map(|j| vec![tree.state(n, j)]).collect()
        }
        Backend::Lsmc { bundle, .. } => {
            let n = bundle.grid().n_steps();
            (0..bundle.n_paths()).map(|p| bundle.x(n, p).to_vec()).collect()
        }
    };
    for x in &terminal_states {
        let (a, b) = (p1.terminal.eval(x), p2.terminal.eval(x));
        if a < b {
            return Err(Error::precondition(format!("xi1 < xi2 at x = {x:?}")));
        }
        for &t in p1.grid.nodes() {
            let (a, b) = (p1.obstacle.eval(t, x), p2.obstacle.eval(t, x));
            if a < b {
                return Err(Error::precondition(format!("L1 < L2 at t = {t}, x = {x:?}")));
            }
        }
    }
    let s1 = solve(p1, backend, opts)?;
    let s2 = solve(p2, backend, opts)?;
    compare_solutions(&s1, &s2, tolerance)
}
