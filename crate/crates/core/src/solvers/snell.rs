//! Brute-force optimal stopping on the (non-recombined) binary tree.

use super::{RbsdeProblem, TreeModel};
use crate::error::{Error, Result};

/// Deepest tree that [`enumerate_snell`] accepts.
pub const ENUMERATION_LIMIT: usize = 12;

/// `sup_tau E[L_tau 1{tau < T} + xi 1{tau = T}]` by walking every one of the
/// `2^N` move sequences. The state is accumulated move by move rather than
/// read off the lattice. Only defined for a zero generator.
pub fn enumerate_snell(prob: &RbsdeProblem) -> Result<f64> {
    let tree = TreeModel::from_problem(prob)?;
    let depth = tree.n_steps();
    if depth > ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooDeep {
            depth,
            limit: ENUMERATION_LIMIT,
        });
    }
    for &(t, y, z) in &[(0.0, 0.0, 0.0), (0.5, 1.0, -1.0), (1.0, -2.0, 3.0)] {
        if prob.generator.eval(t, y, &[z]) != 0.0 {
            return Err(Error::precondition("optimal-stopping enumeration needs the zero generator"));
        }
    }
    let dt = tree.dt();
    let up = tree.drift() * dt + tree.sigma() * dt.sqrt();
    let down = tree.drift() * dt - tree.sigma() * dt.sqrt();
    let grid = tree.grid();

    fn value(prob: &RbsdeProblem, times: &[f64], up: f64, down: f64, level: usize, x: f64) -> f64 {
        let last = times.len() - 1;
        if level == last {
            return prob.terminal.eval(&[x]);
        }
        let cont = 0.5
            * (value(prob, times, up, down, level + 1, x + up) + value(prob, times, up, down, level + 1, x + down));
        prob.obstacle.eval(times[level], &[x]).max(cont)
    }

    Ok(value(prob, grid.nodes(), up, down, 0, tree.x0()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid};
    use crate::solvers::{solve_tree, SchemeOptions, Terminal};

    fn problem(n: usize) -> RbsdeProblem {
        RbsdeProblem::new(
            GeneratorSpec::zero(),
            Terminal::put_on_log(1.0),
            ObstacleSpec::put_on_log(1.0),
            SdeCoeffs::scalar(-0.02, 0.3),
            TimeGrid::uniform(0.0, 1.0, n).unwrap(),
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn agrees_with_lattice() {
        let p = problem(10);
        let a = enumerate_snell(&p).unwrap();
        let b = solve_tree(&p, SchemeOptions::default()).unwrap().origin_y();
        assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
    }

    #[test]
    fn refuses_deep_trees() {
        assert!(matches!(enumerate_snell(&problem(13)), Err(Error::EnumerationTooDeep { depth: 13, limit: 12 })));
    }

    #[test]
    fn refuses_nonzero_generator() {
        let mut p = problem(3);
        p.generator = GeneratorSpec::constant(1.0);
        assert!(matches!(enumerate_snell(&p), Err(Error::Precondition(_))));
    }
}
