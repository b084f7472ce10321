//! Per-step least squares on polynomial features of the forward state.
//!
//! Sums over paths are accumulated in fixed-size chunks and the chunk totals
//! are added in chunk order, so fitted coefficients do not depend on the
//! number of worker threads.

use nalgebra::{DMatrix, DVector, SVD};
use rayon::prelude::*;

const CHUNK: usize = 4096;
const RANK_TOL: f64 = 1e-10;
const STACK: usize = 64;
const SMALL: usize = 16;

/// Monomials of total degree `<= degree` in `dim` variables.
#[derive(Debug, Clone)]
pub struct PolyBasis {
    exponents: Vec<Vec<u32>>,
    degree: usize,
}

impl PolyBasis {
    pub fn new(dim: usize, degree: usize) -> Self {
        let mut exponents = Vec::new();
        let mut cur = vec![0u32; dim];
        fn rec(k: usize, left: usize, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if k == cur.len() {
                out.push(cur.clone());
                return;
            }
            for e in 0..=left {
                cur[k] = e as u32;
                rec(k + 1, left - e, cur, out);
            }
            cur[k] = 0;
        }
        rec(0, degree, &mut cur, &mut exponents);
        exponents.sort_by_key(|e| e.iter().sum::<u32>());
        Self { exponents, degree }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn eval_into(&self, u: &[f64], out: &mut [f64]) {
        let w = self.degree + 1;
        let mut buf = [0.0; SMALL];
        let mut heap;
        let pow: &mut [f64] = if u.len() * w <= SMALL {
            &mut buf[..u.len() * w]
        } else {
            heap = vec![0.0; u.len() * w];
            &mut heap
        };
        for (k, &v) in u.iter().enumerate() {
            let row = &mut pow[k * w..(k + 1) * w];
            row[0] = 1.0;
            for j in 1..w {
                row[j] = row[j - 1] * v;
            }
        }
        for (o, e) in out.iter_mut().zip(&self.exponents) {
            *o = e.iter().enumerate().map(|(k, &p)| pow[k * w + p as usize]).product();
        }
    }
}

/// Fitted design at one time step: centring/scaling of the active state
/// components plus the factorised Gram matrix.
pub(crate) struct Design {
    basis: PolyBasis,
    /// (component index, mean, scale) of each non-degenerate component
    comps: Vec<(usize, f64, f64)>,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    count: usize,
    pub degree_used: usize,
}

fn chunked_sum<F>(idx: &[usize], width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    chunked_sum_range(idx.len(), width, |k, acc| f(idx[k], acc))
}

/// Sum of `f(k, .)` over `k < len`, accumulated chunk by chunk.
fn chunked_sum_range<F>(len: usize, width: usize, f: F) -> Vec<f64>
where
    F: Fn(usize, &mut [f64]) + Sync,
{
    let partials: Vec<Vec<f64>> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = vec![0.0; width];
            for k in c * CHUNK..((c + 1) * CHUNK).min(len) {
                f(k, &mut acc);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; width];
    for part in partials {
        for (t, v) in total.iter_mut().zip(part) {
            *t += v;
        }
    }
    total
}

impl Design {
    /// Build the design for `x` (`[path][component]`, `n` components) over
    /// the paths in `idx`. The degree is lowered until the Gram matrix has
    /// full rank and at least ten paths per coefficient are available.
    pub fn build(x: &[f64], n: usize, idx: &[usize], degree: usize) -> Self {
        let comps = Self::components(x, n, idx);
        let mut deg = if comps.is_empty() { 0 } else { degree };
        loop {
            let basis = PolyBasis::new(comps.len(), deg);
            let m = basis.len();
            if deg > 0 && idx.len() < 10 * m {
                deg -= 1;
                continue;
            }
            let design = Self::factor(x, n, idx, basis, comps.clone(), deg);
            if deg == 0 || design.svd.rank(RANK_TOL * design.svd.singular_values.max()) == m {
                return design;
            }
            deg -= 1;
        }
    }

    /// Design of exactly `degree`, collinear features being resolved by the
    /// minimum-norm least-squares solution.
    pub fn build_at_degree(x: &[f64], n: usize, idx: &[usize], degree: usize) -> Self {
        let comps = Self::components(x, n, idx);
        let deg = if comps.is_empty() { 0 } else { degree };
        let basis = PolyBasis::new(comps.len(), deg);
        Self::factor(x, n, idx, basis, comps, deg)
    }

    fn components(x: &[f64], n: usize, idx: &[usize]) -> Vec<(usize, f64, f64)> {
        let count = idx.len().max(1);
        let stats = chunked_sum(idx, 2 * n, |p, acc| {
            for k in 0..n {
                let v = x[p * n + k];
                acc[k] += v;
                acc[n + k] += v * v;
            }
        });
        let mut comps = Vec::new();
        for k in 0..n {
            let m = stats[k] / count as f64;
            let var = (stats[n + k] / count as f64 - m * m).max(0.0);
            let sd = var.sqrt();
            if sd > 1e-12 * (1.0 + m.abs()) {
                comps.push((k, m, sd));
            }
        }
        comps
    }

    fn factor(x: &[f64], n: usize, idx: &[usize], basis: PolyBasis, comps: Vec<(usize, f64, f64)>, deg: usize) -> Self {
        let m = basis.len();
        let count = idx.len().max(1);
        let mut tmp = Self {
            basis,
            comps,
            svd: SVD::new(DMatrix::identity(1, 1), true, true),
            count,
            degree_used: deg,
        };
        let gram = {
            let t = &tmp;
            chunked_sum(idx, m * m, |p, acc| {
                t.with_features(&x[p * n..(p + 1) * n], |phi| {
                    for a in 0..m {
                        for b in a..m {
                            acc[a * m + b] += phi[a] * phi[b];
                        }
                    }
                })
            })
        };
        let g = DMatrix::from_fn(m, m, |a, b| gram[a.min(b) * m + a.max(b)]) / count as f64;
        tmp.svd = SVD::new(g, true, true);
        tmp
    }

    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.basis.len()];
        self.features_into(x, &mut out);
        out
    }

    fn features_into(&self, x: &[f64], out: &mut [f64]) {
        let mut ubuf = [0.0; SMALL];
        let mut uvec;
        let u: &mut [f64] = if self.comps.len() <= SMALL {
            &mut ubuf[..self.comps.len()]
        } else {
            uvec = vec![0.0; self.comps.len()];
            &mut uvec
        };
        for (v, &(k, m, s)) in u.iter_mut().zip(&self.comps) {
            *v = (x[k] - m) / s;
        }
        self.basis.eval_into(u, out);
    }

    /// Run `f` on the feature vector of `x` without allocating for small bases.
    fn with_features<R>(&self, x: &[f64], f: impl FnOnce(&[f64]) -> R) -> R {
        let m = self.basis.len();
        if m <= SMALL {
            let mut buf = [0.0; SMALL];
            self.features_into(x, &mut buf[..m]);
            f(&buf[..m])
        } else if m <= STACK {
            let mut buf = [0.0; STACK];
            self.features_into(x, &mut buf[..m]);
            f(&buf[..m])
        } else {
            let phi = self.features(x);
            f(&phi)
        }
    }

    pub fn n_components(&self) -> usize {
        self.comps.len()
    }

    /// Least-squares coefficients for `response(path)` over the paths in `idx`.
    #[cfg(test)]
    pub fn fit<F>(&self, x: &[f64], n: usize, idx: &[usize], response: F) -> Vec<f64>
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let m = self.basis.len();
        let rhs = chunked_sum(idx, m, |p, acc| {
            let r = response(p);
            self.with_features(&x[p * n..(p + 1) * n], |phi| {
                for a in 0..m {
                    acc[a] += phi[a] * r;
                }
            })
        });
        self.solve(rhs)
    }

    pub fn len(&self) -> usize {
        self.basis.len()
    }

    /// Feature vectors of the paths in `idx`, one row of [`Design::len`]
    /// entries per listed path.
    pub fn feature_rows(&self, x: &[f64], n: usize, idx: &[usize]) -> Vec<f64> {
        let m = self.basis.len();
        let mut out = vec![0.0; idx.len() * m];
        out.par_chunks_mut(m)
            .zip(idx.par_iter())
            .for_each(|(row, &p)| self.features_into(&x[p * n..(p + 1) * n], row));
        out
    }

    /// [`Design::fit`] on precomputed rows; `response` takes the path index.
    pub fn fit_rows<F>(&self, phi: &[f64], idx: &[usize], response: F) -> Vec<f64>
    where
        F: Fn(usize) -> f64 + Sync,
    {
        let m = self.basis.len();
        let rhs = chunked_sum_range(idx.len(), m, |k, acc| {
            let r = response(idx[k]);
            for (a, v) in acc.iter_mut().zip(&phi[k * m..(k + 1) * m]) {
                *a += v * r;
            }
        });
        self.solve(rhs)
    }

    fn solve(&self, rhs: Vec<f64>) -> Vec<f64> {
        let m = self.basis.len();
        let b = DVector::from_vec(rhs) / self.count as f64;
        let eps = RANK_TOL * self.svd.singular_values.max();
        self.svd
            .solve(&b, eps)
            .map(|c| c.iter().copied().collect())
            .unwrap_or_else(|_| vec![0.0; m])
    }

    pub fn predict(&self, coef: &[f64], x: &[f64]) -> f64 {
        self.with_features(x, |phi| phi.iter().zip(coef).map(|(a, b)| a * b).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(PolyBasis::new(1, 3).len(), 4);
        assert_eq!(PolyBasis::new(2, 3).len(), 10);
        assert_eq!(PolyBasis::new(0, 3).len(), 1);
    }

    #[test]
    fn recovers_exact_cubic() {
        let x: Vec<f64> = (0..200).map(|i| -1.0 + i as f64 / 100.0).collect();
        let idx: Vec<usize> = (0..200).collect();
        let d = Design::build(&x, 1, &idx, 3);
        assert_eq!(d.degree_used, 3);
        let f = |v: f64| 1.0 - 2.0 * v + 0.5 * v * v * v;
        let c = d.fit(&x, 1, &idx, |p| f(x[p]));
        for &v in &[-0.9, 0.1, 0.77] {
            assert!((d.predict(&c, &[v]) - f(v)).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_state_degenerates_to_mean() {
        let x = vec![2.0; 50];
        let idx: Vec<usize> = (0..50).collect();
        let d = Design::build(&x, 1, &idx, 3);
        assert_eq!(d.degree_used, 0);
        let c = d.fit(&x, 1, &idx, |p| p as f64);
        assert!((d.predict(&c, &[2.0]) - 24.5).abs() < 1e-12);
    }

    #[test]
    fn two_point_support_lowers_degree() {
        // only two distinct states: a cubic is not identifiable
        let x: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { -1.0 } else { 1.0 }).collect();
        let idx: Vec<usize> = (0..100).collect();
        let d = Design::build(&x, 1, &idx, 3);
        assert_eq!(d.degree_used, 1);
    }

    #[test]
    fn fit_mean_property_holds() {
        // OLS with an intercept reproduces the response mean
        let x: Vec<f64> = (0..300).map(|i| ((i * 37) % 101) as f64 / 50.0).collect();
        let idx: Vec<usize> = (0..300).collect();
        let d = Design::build(&x, 1, &idx, 2);
        let resp = |p: usize| (x[p] * 3.0).sin() + p as f64 * 1e-3;
        let c = d.fit(&x, 1, &idx, resp);
        let fitted: f64 = idx.iter().map(|&p| d.predict(&c, &x[p..p + 1])).sum::<f64>() / 300.0;
        let actual: f64 = idx.iter().map(|&p| resp(p)).sum::<f64>() / 300.0;
        assert!((fitted - actual).abs() < 1e-10);
    }
}
