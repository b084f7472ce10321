//! CSV tables and JSON summaries of solver output.

use std::io::{self, Write};

use serde::Serialize;

use crate::model::{DiscreteSolution, Layout, SolverFlags};

/// One row per `(node, state)`: `node,state,time,y,dk,obstacle,z0,..`.
/// `dk` and `z` are empty at the terminal node.
pub fn write_solution_csv<W: Write>(sol: &DiscreteSolution, mut w: W) -> io::Result<()> {
    let d = sol.dim_z;
    write!(w, "node,state,time,y,dk,obstacle")?;
    for c in 0..d {
        write!(w, ",z{c}")?;
    }
    writeln!(w)?;
    let n = sol.n_steps();
    for i in 0..=n {
        let t = sol.grid.time(i);
        for s in 0..sol.n_states(i) {
            write!(w, "{i},{s},{t},{},", sol.y[i][s])?;
            if i < n {
                write!(w, "{}", sol.dk[i][s])?;
            }
            write!(w, ",{}", sol.obstacle[i][s])?;
            for c in 0..d {
                if i < n {
                    write!(w, ",{}", sol.z_at(i, s)[c])?;
                } else {
                    write!(w, ",")?;
                }
            }
            writeln!(w)?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionSummary {
    pub layout: Layout,
    pub n_steps: usize,
    pub t0: f64,
    pub horizon: f64,
    pub origin_y: f64,
    pub expected_k_total: f64,
    pub min_dk: f64,
    pub max_obstacle_deficit: f64,
    pub skorokhod_defect: f64,
    pub reflected: bool,
    pub flags: SolverFlags,
}

pub fn solution_summary(sol: &DiscreteSolution) -> SolutionSummary {
    let min_dk = sol
        .dk
        .iter()
        .flat_map(|l| l.iter())
        .fold(f64::INFINITY, |m, v| m.min(*v));
    SolutionSummary {
        layout: sol.layout,
        n_steps: sol.n_steps(),
        t0: sol.grid.t0(),
        horizon: sol.grid.horizon(),
        origin_y: sol.origin_y(),
        expected_k_total: sol.expected_k_total(),
        min_dk: if min_dk.is_finite() { min_dk } else { 0.0 },
        max_obstacle_deficit: sol.max_obstacle_deficit(),
        skorokhod_defect: sol.skorokhod_defect(),
        reflected: sol.reflected,
        flags: sol.flags.clone(),
    }
}

/// Pretty JSON followed by a newline.
pub fn write_json<T: Serialize, W: Write>(value: &T, mut w: W) -> io::Result<()> {
    serde_json::to_writer_pretty(&mut w, value).map_err(io::Error::other)?;
    writeln!(w)
}
