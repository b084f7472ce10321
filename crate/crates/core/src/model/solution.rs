use serde::Serialize;

use super::grid::TimeGrid;
use crate::error::{Error, Result};

/// How the state index of a [`DiscreteSolution`] level is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Recombining binomial lattice: level `i` holds `i + 1` nodes, node `j`
    /// having taken `j` up-moves.
    Lattice,
    /// Simulated paths: every level holds one value per path.
    Paths,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegressionFallback {
    pub step: usize,
    pub requested_degree: usize,
    pub used_degree: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SolverFlags {
    /// Tree volatility was zero, so `Z` is reported as the zero vector.
    pub z_degenerate: bool,
    pub regression_fallbacks: Vec<RegressionFallback>,
    pub picard_passes: usize,
}

/// Early termination of the backward equation.
#[derive(Debug, Clone, PartialEq)]
pub enum StopMask {
    /// Per-path node index at which that path's equation ends.
    Paths(Vec<usize>),
    /// Absorbing lattice nodes, `[level][node]`.
    Lattice(Vec<Vec<bool>>),
}

/// Grid-indexed triple `(Y, Z, K)` with per-step reflection increments.
///
/// `y` and `obstacle` are indexed `[node][state]`, `dk` is indexed
/// `[step][state]` and `z` is `[step][state * dim_z + component]`. `K` is
/// not stored: `K_0 = 0` and `K_{i+1} = K_i + dK_i` along each path.
#[derive(Debug, Clone)]
pub struct DiscreteSolution {
    pub grid: TimeGrid,
    pub layout: Layout,
    pub dim_z: usize,
    pub y: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub dk: Vec<Vec<f64>>,
    pub obstacle: Vec<Vec<f64>>,
    /// False for penalised solutions, which only approximate the reflection.
    pub reflected: bool,
    pub stops: Option<StopMask>,
    pub flags: SolverFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantReport {
    pub min_dk: f64,
    pub max_obstacle_deficit: f64,
    pub skorokhod_defect: f64,
    pub defect_bound: f64,
    pub expected_k_total: f64,
}

impl DiscreteSolution {
    pub fn n_steps(&self) -> usize {
        self.grid.n_steps()
    }

    pub fn n_states(&self, node: usize) -> usize {
        self.y[node].len()
    }

    pub fn n_paths(&self) -> Option<usize> {
        match self.layout {
            Layout::Paths => Some(self.y[0].len()),
            Layout::Lattice => None,
        }
    }

    /// `Y` at the initial node. On paths all values coincide there; the mean
    /// is returned.
    pub fn origin_y(&self) -> f64 {
        mean(&self.y[0])
    }

    pub fn z_at(&self, step: usize, state: usize) -> &[f64] {
        &self.z[step][state * self.dim_z..(state + 1) * self.dim_z]
    }

    fn step_active(&self, step: usize, state: usize) -> bool {
        match &self.stops {
            None => true,
            Some(StopMask::Paths(stop)) => step < stop[state],
            Some(StopMask::Lattice(mask)) => !mask[step][state],
        }
    }

    fn node_active(&self, node: usize, state: usize) -> bool {
        match &self.stops {
            Some(StopMask::Paths(stop)) => node <= stop[state],
            _ => true,
        }
    }

    /// Probability mass carried by each lattice node, absorbed mass staying
    /// at the absorbing node.
    pub fn lattice_mass(&self) -> Vec<Vec<f64>> {
        let n = self.n_steps();
        let mut mass: Vec<Vec<f64>> = (0..=n).map(|i| vec![0.0; i + 1]).collect();
        mass[0][0] = 1.0;
        for i in 0..n {
            for j in 0..=i {
                let m = mass[i][j];
                if m == 0.0 || !self.step_active(i, j) {
                    continue;
                }
                mass[i + 1][j] += 0.5 * m;
                mass[i + 1][j + 1] += 0.5 * m;
            }
        }
        mass
    }

    /// Weighted sum over every (step, state) of `f(step, state)`, weighted by
    /// lattice mass or `1 / n_paths`.
    fn weighted_step_sum(&self, f: impl Fn(usize, usize) -> f64) -> Vec<f64> {
        let n = self.n_steps();
        match self.layout {
            Layout::Paths => {
                let w = 1.0 / self.y[0].len() as f64;
                (0..n)
                    .map(|i| (0..self.dk[i].len()).map(|p| f(i, p)).sum::<f64>() * w)
                    .collect()
            }
            Layout::Lattice => {
                let mass = self.lattice_mass();
                (0..n)
                    .map(|i| (0..=i).map(|j| mass[i][j] * f(i, j)).sum())
                    .collect()
            }
        }
    }

    /// `E[K_{t_i}]` for every node, starting from `K_0 = 0`.
    pub fn expected_k(&self) -> Vec<f64> {
        let per_step = self.weighted_step_sum(|i, s| self.dk[i][s]);
        let mut out = Vec::with_capacity(per_step.len() + 1);
        let mut acc = 0.0;
        out.push(0.0);
        for v in per_step {
            acc += v;
            out.push(acc);
        }
        out
    }

    pub fn expected_k_total(&self) -> f64 {
        *self.expected_k().last().unwrap()
    }

    /// Cumulative `K` along one simulated path.
    pub fn path_k(&self, path: usize) -> Option<Vec<f64>> {
        if self.layout != Layout::Paths {
            return None;
        }
        let mut acc = 0.0;
        let mut out = vec![0.0];
        for dk in &self.dk {
            acc += dk[path];
            out.push(acc);
        }
        Some(out)
    }

    pub fn max_abs_y(&self) -> f64 {
        self.y
            .iter()
            .flat_map(|lvl| lvl.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `(L - Y)^+` over active nodes.
    pub fn max_obstacle_deficit(&self) -> f64 {
        let mut worst = 0.0_f64;
        for (i, (ys, ls)) in self.y.iter().zip(&self.obstacle).enumerate() {
            for (s, (y, l)) in ys.iter().zip(ls).enumerate() {
                if self.node_active(i, s) {
                    worst = worst.max(l - y);
                }
            }
        }
        worst
    }

    /// Discrete flat-off defect `sum_i E[(Y_i - L_i) dK_i]`.
    pub fn skorokhod_defect(&self) -> f64 {
        self.weighted_step_sum(|i, s| (self.y[i][s] - self.obstacle[i][s]) * self.dk[i][s])
            .into_iter()
            .sum()
    }

    /// Shared post-check for every solver output: `dK >= 0`, `Y >= L` and the
    /// flat-off condition up to `skorokhod_tol * (1 + max|Y|) * E[K_T]`.
    /// The last two apply to reflected solutions only.
    pub fn post_check(&self, skorokhod_tol: f64) -> Result<InvariantReport> {
        let min_dk = self
            .dk
            .iter()
            .flat_map(|lvl| lvl.iter())
            .fold(f64::INFINITY, |m, v| m.min(*v));
        let min_dk = if min_dk.is_finite() { min_dk } else { 0.0 };
        let expected_k_total = self.expected_k_total();
        let report = InvariantReport {
            min_dk,
            max_obstacle_deficit: self.max_obstacle_deficit(),
            skorokhod_defect: self.skorokhod_defect(),
            defect_bound: skorokhod_tol * (1.0 + self.max_abs_y()) * expected_k_total,
            expected_k_total,
        };
        if report.min_dk < 0.0 {
            return Err(Error::Invariant(format!("negative reflection increment {}", report.min_dk)));
        }
        if self.reflected {
            if report.max_obstacle_deficit > 0.0 {
                return Err(Error::Invariant(format!(
                    "Y falls below the obstacle by {}",
                    report.max_obstacle_deficit
                )));
            }
            if report.skorokhod_defect > report.defect_bound {
                return Err(Error::Invariant(format!(
                    "flat-off defect {} exceeds {}",
                    report.skorokhod_defect, report.defect_bound
                )));
            }
        }
        Ok(report)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.iter().sum::<f64>() / v.len() as f64
}
