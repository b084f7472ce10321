use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Strictly increasing time nodes `t0 = nodes[0] < ... < nodes[n] = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    nodes: Vec<f64>,
    uniform: bool,
}

impl TimeGrid {
    pub fn uniform(t0: f64, horizon: f64, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::config("time grid needs at least one step"));
        }
        if !(t0.is_finite() && horizon.is_finite()) || t0 < 0.0 || t0 >= horizon {
            return Err(Error::config(format!(
                "time grid requires 0 <= t0 < T, got t0 = {t0}, T = {horizon}"
            )));
        }
        let dt = (horizon - t0) / n_steps as f64;
        let mut nodes: Vec<f64> = (0..n_steps).map(|i| t0 + i as f64 * dt).collect();
        nodes.push(horizon);
        Ok(Self {
            nodes,
            uniform: true,
        })
    }

    /// Non-uniform grid from explicit nodes.
    pub fn from_nodes(nodes: Vec<f64>) -> Result<Self> {
        if nodes.len() < 2 {
            return Err(Error::config("time grid needs at least two nodes"));
        }
        if nodes[0] < 0.0 || nodes.iter().any(|t| !t.is_finite()) {
            return Err(Error::config("time grid nodes must be finite and start at t0 >= 0"));
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("time grid nodes must be strictly increasing"));
        }
        Ok(Self {
            nodes,
            uniform: false,
        })
    }

    pub fn t0(&self) -> f64 {
        self.nodes[0]
    }

    pub fn horizon(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn n_steps(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn time(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    /// Length of step `i`, i.e. `t_{i+1} - t_i`.
    pub fn dt(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    /// Nominal uniform spacing `(T - t0) / n_steps`.
    pub fn spacing(&self) -> f64 {
        (self.horizon() - self.t0()) / self.n_steps() as f64
    }

    pub fn is_uniform(&self) -> bool {
        self.uniform
    }

    /// First node index whose time is `>= t` (within a relative rounding slack).
    pub fn index_at_or_after(&self, t: f64) -> Option<usize> {
        let slack = 1e-12 * (1.0 + self.horizon().abs());
        self.nodes.iter().position(|&s| s >= t - slack)
    }

    /// Grid made of the first `n_steps` steps of this one.
    pub fn prefix(&self, n_steps: usize) -> Result<Self> {
        if n_steps == 0 || n_steps > self.n_steps() {
            return Err(Error::config(format!(
                "prefix of {n_steps} steps requested from a grid with {} steps",
                self.n_steps()
            )));
        }
        Ok(Self {
            nodes: self.nodes[..=n_steps].to_vec(),
            uniform: self.uniform,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_endpoints_are_exact() {
        let g = TimeGrid::uniform(0.25, 1.0, 3).unwrap();
        assert_eq!(g.t0(), 0.25);
        assert_eq!(g.horizon(), 1.0);
        assert_eq!(g.n_steps(), 3);
        assert!((g.dt(1) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(TimeGrid::uniform(1.0, 1.0, 4).is_err());
        assert!(TimeGrid::uniform(-0.1, 1.0, 4).is_err());
        assert!(TimeGrid::uniform(0.0, 1.0, 0).is_err());
        assert!(TimeGrid::from_nodes(vec![0.0, 0.5, 0.5, 1.0]).is_err());
    }

    #[test]
    fn index_lookup_rounds_up() {
        let g = TimeGrid::uniform(0.0, 2.0, 8).unwrap();
        assert_eq!(g.index_at_or_after(1.0), Some(4));
        assert_eq!(g.index_at_or_after(1.01), Some(5));
        assert_eq!(g.index_at_or_after(2.5), None);
    }
}
