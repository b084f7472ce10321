//! Penalised approximation: the reflection is replaced by the explicit push
//! `n (L - E)^+ dt`, and the accumulated push plays the role of `K`.

use serde::Serialize;

use super::lsmc::solve_lsmc_mode;
use super::tree::solve_tree_mode;
use super::{Backend, Mode, RbsdeProblem, SchemeOptions};
use crate::error::{Error, Result};
use crate::model::DiscreteSolution;

/// Penalised solution for penalty level `n_penalty`. Refused when
/// `n_penalty * dt >= 1`, where the explicit push is no longer monotone.
pub fn solve_penalized(
    prob: &RbsdeProblem,
    backend: Backend<'_>,
    n_penalty: f64,
    opts: SchemeOptions,
) -> Result<DiscreteSolution> {
    if !(n_penalty >= 0.0 && n_penalty.is_finite()) {
        return Err(Error::config("penalty level must be finite and non-negative"));
    }
    let max_dt = (0..prob.grid.n_steps()).map(|i| prob.grid.dt(i)).fold(0.0, f64::max);
    let product = n_penalty * max_dt;
    if product >= 1.0 {
        return Err(Error::PenaltyUnstable { product });
    }
    let mode = Mode::Penalty(n_penalty);
    match backend {
        Backend::Tree => solve_tree_mode(prob, mode, opts),
        Backend::Lsmc { bundle, degree } => solve_lsmc_mode(prob, bundle, degree, mode, opts),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PenaltySweep {
    pub n_values: Vec<f64>,
    pub y0: Vec<f64>,
    pub reflected_y0: f64,
    /// `reflected_y0 - y0[k]`.
    pub gaps: Vec<f64>,
    /// Whether `y0` is non-decreasing along the (sorted) penalty levels.
    pub monotone: bool,
}

/// Origin values for each penalty level against the reflected solution on
/// the same backend.
pub fn penalty_sweep(prob: &RbsdeProblem, backend: Backend<'_>, n_values: &[f64], opts: SchemeOptions) -> Result<PenaltySweep> {
    let mut n_values = n_values.to_vec();
    n_values.sort_by(f64::total_cmp);
    let reflected_y0 = super::solve(prob, backend, opts)?.origin_y();
    let y0 = n_values
        .iter()
        .map(|&n| solve_penalized(prob, backend, n, opts).map(|s| s.origin_y()))
        .collect::<Result<Vec<_>>>()?;
    let gaps = y0.iter().map(|v| reflected_y0 - v).collect();
    let monotone = y0.windows(2).all(|w| w[1] >= w[0]);
    Ok(PenaltySweep {
        n_values,
        y0,
        reflected_y0,
        gaps,
        monotone,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs, TimeGrid};
    use crate::solvers::{solve_tree_unreflected, Terminal};

    fn problem(n: usize) -> RbsdeProblem {
        RbsdeProblem::new(
            GeneratorSpec::zero(),
            Terminal::constant(0.0),
            ObstacleSpec::linear_in_time(1.0, -1.0),
            SdeCoeffs::scalar(0.0, 1.0),
            TimeGrid::uniform(0.0, 1.0, n).unwrap(),
            vec![0.0],
        )
        .unwrap()
    }

    #[test]
    fn unstable_penalty_refused() {
        let p = problem(10);
        assert!(matches!(
            solve_penalized(&p, Backend::Tree, 10.0, SchemeOptions::default()),
            Err(Error::PenaltyUnstable { .. })
        ));
    }

    #[test]
    fn zero_penalty_is_unreflected() {
        let p = problem(20);
        let a = solve_penalized(&p, Backend::Tree, 0.0, SchemeOptions::default()).unwrap();
        let b = solve_tree_unreflected(&p, SchemeOptions::default()).unwrap();
        assert_eq!(a.y, b.y);
    }

    #[test]
    fn sweep_is_monotone_and_approaches_reflection() {
        let p = problem(400);
        let s = penalty_sweep(&p, Backend::Tree, &[1.0, 4.0, 16.0, 64.0], SchemeOptions::default()).unwrap();
        assert!(s.monotone);
        assert!(s.gaps.iter().all(|&g| g >= -1e-12));
        assert!(s.gaps[3] < s.gaps[0]);
    }
}
