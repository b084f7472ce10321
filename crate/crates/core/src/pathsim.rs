//! Reproducible Brownian increments, Euler–Maruyama simulation of the
//! forward flow started at `(t, x)`, and grid-resolved first hitting times.
//!
//! Every path draws from its own ChaCha stream keyed by `(seed, path)`, so a
//! path's noise does not depend on how many other paths are generated or on
//! how the work is scheduled.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{dot, ObstacleSpec, SdeCoeffs, TimeGrid};

/// Brownian increments laid out `[step][path][component]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianIncrements {
    grid: TimeGrid,
    n_paths: usize,
    d: usize,
    seed: u64,
    antithetic: bool,
    data: Vec<f64>,
}

impl BrownianIncrements {
    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn n_paths(&self) -> usize {
        self.n_paths
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn is_antithetic(&self) -> bool {
        self.antithetic
    }

    /// Increment of `path` over `step`, a slice of length `d`.
    pub fn get(&self, step: usize, path: usize) -> &[f64] {
        let off = (step * self.n_paths + path) * self.d;
        &self.data[off..off + self.d]
    }

    /// All paths' increments over `step`, `[path][component]`.
    pub fn step(&self, step: usize) -> &[f64] {
        let len = self.n_paths * self.d;
        &self.data[step * len..(step + 1) * len]
    }
}

/// Mix a base seed with an index (SplitMix64 finaliser).
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed ^ index.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(0xD1B5_4A32_D192_ED03);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Increments of one path, `[step][component]`, independent of every other
/// path.
pub fn path_increments(grid: &TimeGrid, d: usize, seed: u64, path: usize, antithetic: bool) -> Vec<f64> {
    let (stream, sign) = if antithetic {
        ((path / 2) as u64, if path % 2 == 1 { -1.0 } else { 1.0 })
    } else {
        (path as u64, 1.0)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let mut out = Vec::with_capacity(grid.n_steps() * d);
    for i in 0..grid.n_steps() {
        let sd = grid.dt(i).sqrt();
        for _ in 0..d {
            let z: f64 = StandardNormal.sample(&mut rng);
            out.push(sign * sd * z);
        }
    }
    out
}

/// Fill a `[node-major]` buffer from per-path rows computed in parallel.
fn transpose_paths(n_paths: usize, row_len: usize, width: usize, rows: &[f64]) -> Vec<f64> {
    // rows: [path][slot][width] -> out: [slot][path][width]
    let slots = row_len / width;
    let mut out = vec![0.0; rows.len()];
    for p in 0..n_paths {
        let row = &rows[p * row_len..(p + 1) * row_len];
        for s in 0..slots {
            let dst = (s * n_paths + p) * width;
            out[dst..dst + width].copy_from_slice(&row[s * width..(s + 1) * width]);
        }
    }
    out
}

pub fn simulate_brownian(grid: &TimeGrid, n_paths: usize, d: usize, seed: u64) -> Result<BrownianIncrements> {
    simulate_brownian_with(grid, n_paths, d, seed, false)
}

/// With `antithetic`, path `2k + 1` carries the negated increments of path
/// `2k`.
pub fn simulate_brownian_with(
    grid: &TimeGrid,
    n_paths: usize,
    d: usize,
    seed: u64,
    antithetic: bool,
) -> Result<BrownianIncrements> {
    if n_paths == 0 || d == 0 {
        return Err(Error::config(format!(
            "Brownian simulation needs n_paths >= 1 and d >= 1 (got {n_paths}, {d})"
        )));
    }
    let row_len = grid.n_steps() * d;
    let mut rows = vec![0.0; n_paths * row_len];
    rows.par_chunks_mut(row_len).enumerate().for_each(|(p, row)| {
        row.copy_from_slice(&path_increments(grid, d, seed, p, antithetic));
    });
    Ok(BrownianIncrements {
        grid: grid.clone(),
        n_paths,
        d,
        seed,
        antithetic,
        data: transpose_paths(n_paths, row_len, d, &rows),
    })
}

/// Increments on several coarse grids that share one fine Brownian path.
///
/// `fine` must be uniform. Coarse grid `k` starts at `fine.t0()`, has
/// `coarse[k].1` steps, each the sum of `coarse[k].0` consecutive fine
/// increments, so shorter horizons reuse the prefixes of longer ones.
pub fn simulate_brownian_nested(
    fine: &TimeGrid,
    n_paths: usize,
    d: usize,
    seed: u64,
    antithetic: bool,
    coarse: &[(usize, usize)],
) -> Result<Vec<BrownianIncrements>> {
    if n_paths == 0 || d == 0 {
        return Err(Error::config(format!(
            "Brownian simulation needs n_paths >= 1 and d >= 1 (got {n_paths}, {d})"
        )));
    }
    if !fine.is_uniform() {
        return Err(Error::config("nested increments need a uniform fine grid"));
    }
    let dt = fine.spacing();
    let mut grids = Vec::with_capacity(coarse.len());
    for &(block, steps) in coarse {
        if block == 0 || steps == 0 || block * steps > fine.n_steps() {
            return Err(Error::config(format!(
                "coarse grid of {steps} x {block} fine steps exceeds the {} fine steps",
                fine.n_steps()
            )));
        }
        let t0 = fine.t0();
        let horizon = if block * steps == fine.n_steps() {
            fine.horizon()
        } else {
            t0 + (block * steps) as f64 * dt
        };
        grids.push(TimeGrid::uniform(t0, horizon, steps)?);
    }
    let per_path: Vec<Vec<Vec<f64>>> = (0..n_paths)
        .into_par_iter()
        .map(|p| {
            let row = path_increments(fine, d, seed, p, antithetic);
            coarse
                .iter()
                .map(|&(block, steps)| {
                    let mut out = vec![0.0; steps * d];
                    for s in 0..steps {
                        for b in 0..block {
                            let f = s * block + b;
                            for c in 0..d {
                                out[s * d + c] += row[f * d + c];
                            }
                        }
                    }
                    out
                })
                .collect()
        })
        .collect();
    Ok(grids
        .into_iter()
        .zip(coarse)
        .enumerate()
        .map(|(k, (grid, &(_, steps)))| {
            let row_len = steps * d;
            let mut rows = Vec::with_capacity(n_paths * row_len);
            for path in &per_path {
                rows.extend_from_slice(&path[k]);
            }
            BrownianIncrements {
                grid,
                n_paths,
                d,
                seed,
                antithetic,
                data: transpose_paths(n_paths, row_len, d, &rows),
            }
        })
        .collect())
}

/// Simulated forward states `X` laid out `[node][path][component]`, together
/// with the increments that drove them.
#[derive(Debug, Clone)]
pub struct PathBundle {
    increments: BrownianIncrements,
    n: usize,
    x: Vec<f64>,
    origin_idx: usize,
    origin_x: Vec<f64>,
}

impl PathBundle {
    pub fn grid(&self) -> &TimeGrid {
        &self.increments.grid
    }

    pub fn increments(&self) -> &BrownianIncrements {
        &self.increments
    }

    pub fn n_paths(&self) -> usize {
        self.increments.n_paths
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.increments.d
    }

    pub fn seed(&self) -> u64 {
        self.increments.seed
    }

    pub fn origin_idx(&self) -> usize {
        self.origin_idx
    }

    pub fn origin_time(&self) -> f64 {
        self.grid().time(self.origin_idx)
    }

    pub fn origin_x(&self) -> &[f64] {
        &self.origin_x
    }

    pub fn x(&self, node: usize, path: usize) -> &[f64] {
        let off = (node * self.n_paths() + path) * self.n;
        &self.x[off..off + self.n]
    }

    /// States of every path at `node`, `[path][component]`.
    pub fn x_node(&self, node: usize) -> &[f64] {
        let len = self.n_paths() * self.n;
        &self.x[node * len..(node + 1) * len]
    }

    pub fn dw(&self, step: usize, path: usize) -> &[f64] {
        self.increments.get(step, path)
    }

    /// Dump as CSV with columns `path,node,time,x0,..`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write!(w, "path,node,time")?;
        for k in 0..self.n {
            write!(w, ",x{k}")?;
        }
        writeln!(w)?;
        for p in 0..self.n_paths() {
            for i in 0..=self.grid().n_steps() {
                write!(w, "{p},{i},{}", self.grid().time(i))?;
                for v in self.x(i, p) {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        Ok(())
    }
}

/// Euler–Maruyama: `X_{i+1} = X_i + b(t_i, X_i) dt_i + sigma(t_i, X_i) dW_i`
/// from the node of `origin_t` on; earlier nodes carry `x`.
pub fn euler_maruyama(
    coeffs: &SdeCoeffs,
    origin_t: f64,
    x: &[f64],
    increments: BrownianIncrements,
) -> Result<PathBundle> {
    let grid = increments.grid.clone();
    let (n, d) = (coeffs.n(), coeffs.d());
    if x.len() != n {
        return Err(Error::config(format!("start state has dimension {}, coefficients expect {n}", x.len())));
    }
    if increments.d != d {
        return Err(Error::config(format!(
            "increments have dimension {}, coefficients expect {d}",
            increments.d
        )));
    }
    let origin_idx = grid
        .index_at_or_after(origin_t)
        .ok_or_else(|| Error::config(format!("origin time {origin_t} lies beyond the grid")))?;
    if origin_t < grid.t0() - 1e-12 {
        return Err(Error::config(format!("origin time {origin_t} precedes the grid start")));
    }
    let n_nodes = grid.n_steps() + 1;
    let row_len = n_nodes * n;
    let n_paths = increments.n_paths;
    let mut rows = vec![0.0; n_paths * row_len];
    let failure = std::sync::Mutex::new(None::<Error>);
    rows.par_chunks_mut(row_len).enumerate().for_each(|(p, row)| {
        let mut b = vec![0.0; n];
        let mut s = vec![0.0; n * d];
        for i in 0..=origin_idx {
            row[i * n..(i + 1) * n].copy_from_slice(x);
        }
        for i in origin_idx..grid.n_steps() {
            let t = grid.time(i);
            let dt = grid.dt(i);
            let (cur, next) = row.split_at_mut((i + 1) * n);
            let xi = &cur[i * n..];
            coeffs.drift_into(t, xi, &mut b);
            coeffs.diffusion_into(t, xi, &mut s);
            let dw = increments.get(i, p);
            for k in 0..n {
                let diff: f64 = (0..d).map(|c| s[k * d + c] * dw[c]).sum();
                let v = xi[k] + b[k] * dt + diff;
                if !v.is_finite() {
                    let mut f = failure.lock().unwrap();
                    if f.is_none() {
                        *f = Some(Error::NonFinite {
                            node: i + 1,
                            time: grid.time(i + 1),
                            what: "forward state",
                        });
                    }
                    return;
                }
                next[k] = v;
            }
        }
    });
    if let Some(e) = failure.into_inner().unwrap() {
        return Err(e);
    }
    Ok(PathBundle {
        increments,
        n,
        x: transpose_paths(n_paths, row_len, n, &rows),
        origin_idx,
        origin_x: x.to_vec(),
    })
}

/// First node after the origin at which `eta + q.(X - x) <= L`, per path;
/// the last node when the barrier is never reached.
pub fn hitting_time_index(bundle: &PathBundle, eta: f64, q: &[f64], obs: &ObstacleSpec) -> Result<Vec<usize>> {
    let o = bundle.origin_idx;
    let x0 = &bundle.origin_x;
    let l0 = obs.eval(bundle.origin_time(), x0);
    if eta <= l0 {
        return Err(Error::precondition(format!(
            "eta = {eta} must lie strictly above the obstacle L = {l0} at the origin"
        )));
    }
    if q.len() != bundle.n {
        return Err(Error::config("q must have the state dimension"));
    }
    let last = bundle.grid().n_steps();
    let times = bundle.grid().nodes();
    let q_dot_x0 = dot(q, x0);
    Ok((0..bundle.n_paths())
        .into_par_iter()
        .map(|p| {
            (o + 1..=last)
                .find(|&i| {
                    let x = bundle.x(i, p);
                    eta + (dot(q, x) - q_dot_x0) <= obs.eval(times[i], x)
                })
                .unwrap_or(last)
        })
        .collect())
}
