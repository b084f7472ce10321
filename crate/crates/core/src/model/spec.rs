//! Generator, forward-coefficient and obstacle specifications.
//!
//! All three wrap opaque callables behind `Arc` so they can be cloned into
//! worker closures; the callables must be pure.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

pub type DriverFn = dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync;
pub type GrowthFn = dyn Fn(f64) -> f64 + Send + Sync;
pub type VecFieldFn = dyn Fn(f64, &[f64], &mut [f64]) + Send + Sync;
pub type ObstacleFn = dyn Fn(f64, &[f64]) -> f64 + Send + Sync;

/// Value used for "no obstacle": far below anything a test problem reaches.
pub const NO_OBSTACLE: f64 = -1e9;

/// A driver `g(t, y, z)` together with its declared linear-growth data.
///
/// The growth bound is `|g(t,y,z)| <= lambda * (gamma(t) + |y| + |z|)`;
/// `satisfies_a3` declares `g(t, y, 0) = 0`.
#[derive(Clone)]
pub struct GeneratorSpec {
    name: String,
    eval: Arc<DriverFn>,
    lambda: f64,
    gamma: Arc<GrowthFn>,
    satisfies_a3: bool,
}

impl fmt::Debug for GeneratorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneratorSpec")
            .field("name", &self.name)
            .field("lambda", &self.lambda)
            .field("satisfies_a3", &self.satisfies_a3)
            .finish()
    }
}

impl GeneratorSpec {
    pub fn new<F>(name: impl Into<String>, lambda: f64, eval: F) -> Self
    where
        F: Fn(f64, f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            eval: Arc::new(eval),
            lambda,
            gamma: Arc::new(|_| 0.0),
            satisfies_a3: false,
        }
    }

    pub fn with_gamma<F>(mut self, gamma: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        self.gamma = Arc::new(gamma);
        self
    }

    pub fn with_constant_gamma(self, gamma: f64) -> Self {
        self.with_gamma(move |_| gamma)
    }

    pub fn with_a3(mut self, flag: bool) -> Self {
        self.satisfies_a3 = flag;
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn zero() -> Self {
        Self::new("zero", 0.0, |_, _, _| 0.0).with_a3(true)
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("constant({c})"), c.abs(), move |_, _, _| c)
            .with_constant_gamma(if c == 0.0 { 0.0 } else { 1.0 })
            .with_a3(c == 0.0)
    }

    /// `a*y + beta.z + c`.
    pub fn linear(a: f64, beta: Vec<f64>, c: f64) -> Self {
        let beta_norm = norm(&beta);
        let lambda = a.abs().max(beta_norm).max(c.abs());
        let name = format!("linear(a={a}, beta={beta:?}, c={c})");
        Self::new(name, lambda, move |_, y, z| a * y + dot(&beta, z) + c)
            .with_constant_gamma(if c == 0.0 { 0.0 } else { 1.0 })
            .with_a3(a == 0.0 && c == 0.0)
    }

    pub fn abs_z() -> Self {
        Self::new("abs-z", 1.0, |_, _, z| norm(z)).with_a3(true)
    }

    /// `sqrt(min(|y|, 1))`: continuous, bounded, not Lipschitz at `y = 0`.
    pub fn sqrt_cap() -> Self {
        Self::new("sqrt-cap", 1.0, |_, y, _| y.abs().min(1.0).sqrt()).with_constant_gamma(1.0)
    }

    /// Discounting driver `-r*y`.
    pub fn discount(r: f64) -> Self {
        Self::new(format!("discount({r})"), r.abs(), move |_, y, _| -r * y)
    }

    /// `g + c`.
    pub fn shifted(&self, c: f64) -> Self {
        let inner = self.eval.clone();
        let gamma = self.gamma.clone();
        let mut out = Self::new(format!("{}+{c}", self.name), self.lambda.max(c.abs()), move |t, y, z| {
            inner(t, y, z) + c
        })
        .with_a3(self.satisfies_a3 && c == 0.0);
        out.gamma = if c == 0.0 {
            gamma
        } else {
            Arc::new(move |t| gamma(t) + 1.0)
        };
        out
    }

    /// Pointwise sum `g1 + g2`.
    pub fn sum(&self, other: &Self) -> Self {
        let (f1, f2) = (self.eval.clone(), other.eval.clone());
        let (g1, g2) = (self.gamma.clone(), other.gamma.clone());
        Self::new(
            format!("{}+{}", self.name, other.name),
            self.lambda + other.lambda,
            move |t, y, z| f1(t, y, z) + f2(t, y, z),
        )
        .with_gamma(move |t| g1(t) + g2(t))
        .with_a3(self.satisfies_a3 && other.satisfies_a3)
    }

    #[inline]
    pub fn eval(&self, t: f64, y: f64, z: &[f64]) -> f64 {
        (self.eval)(t, y, z)
    }

    pub fn gamma(&self, t: f64) -> f64 {
        (self.gamma)(t)
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn satisfies_a3(&self) -> bool {
        self.satisfies_a3
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

/// Constant drift vector and row-major `n x d` diffusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstantCoeffs {
    pub b: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Forward SDE `dX = b(t,X) dt + sigma(t,X) dB` with declared Lipschitz
/// constant `mu` and growth constant `nu`.
#[derive(Clone)]
pub struct SdeCoeffs {
    name: String,
    n: usize,
    d: usize,
    drift: Arc<VecFieldFn>,
    diffusion: Arc<VecFieldFn>,
    mu: f64,
    nu: f64,
    constant: Option<ConstantCoeffs>,
}

impl fmt::Debug for SdeCoeffs {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SdeCoeffs")
            .field("name", &self.name)
            .field("n", &self.n)
            .field("d", &self.d)
            .field("mu", &self.mu)
            .field("nu", &self.nu)
            .field("constant", &self.constant)
            .finish()
    }
}

impl SdeCoeffs {
    /// General coefficients. `diffusion` writes a row-major `n x d` matrix.
    pub fn new<B, S>(name: impl Into<String>, n: usize, d: usize, mu: f64, nu: f64, drift: B, diffusion: S) -> Self
    where
        B: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
        S: Fn(f64, &[f64], &mut [f64]) + Send + Sync + 'static,
    {
        Self {
            name: name.into(),
            n,
            d,
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            mu,
            nu,
            constant: None,
        }
    }

    pub fn constant(b: Vec<f64>, sigma: Vec<f64>, d: usize) -> Self {
        let n = b.len();
        assert_eq!(sigma.len(), n * d, "sigma must be n x d");
        let nu = norm(&b) + norm(&sigma);
        let (bc, sc) = (b.clone(), sigma.clone());
        let mut out = Self::new(
            format!("constant(b={b:?}, sigma={sigma:?})"),
            n,
            d,
            0.0,
            nu,
            move |_, _, out| out.copy_from_slice(&bc),
            move |_, _, out| out.copy_from_slice(&sc),
        );
        out.constant = Some(ConstantCoeffs { b, sigma });
        out
    }

    pub fn scalar(b: f64, sigma: f64) -> Self {
        Self::constant(vec![b], vec![sigma], 1)
    }

    /// `n = d`, `b = 0`, `sigma = I`: the state is the Brownian motion itself.
    pub fn brownian(d: usize) -> Self {
        let mut sigma = vec![0.0; d * d];
        for k in 0..d {
            sigma[k * d + k] = 1.0;
        }
        Self::constant(vec![0.0; d], sigma, d).with_name(format!("brownian(d={d})"))
    }

    /// Log-price of a geometric Brownian motion: `b = r - vol^2/2`, `sigma = vol`.
    pub fn gbm_log(r: f64, vol: f64) -> Self {
        Self::scalar(r - 0.5 * vol * vol, vol).with_name(format!("gbm-log(r={r}, vol={vol})"))
    }

    /// Geometric Brownian motion in levels: `b(x) = m x`, `sigma(x) = s x`.
    pub fn geometric(m: f64, s: f64) -> Self {
        let c = m.abs() + s.abs();
        Self::new(
            format!("geometric(m={m}, s={s})"),
            1,
            1,
            c,
            c,
            move |_, x, out| out[0] = m * x[0],
            move |_, x, out| out[0] = s * x[0],
        )
    }

    pub fn ornstein_uhlenbeck(kappa: f64, theta: f64, sigma: f64) -> Self {
        let nu = (kappa * theta.abs() + sigma.abs()).max(kappa.abs());
        Self::new(
            format!("ou(kappa={kappa}, theta={theta}, sigma={sigma})"),
            1,
            1,
            kappa.abs(),
            nu,
            move |_, x, out| out[0] = kappa * (theta - x[0]),
            move |_, _, out| out[0] = sigma,
        )
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_constants(mut self, mu: f64, nu: f64) -> Self {
        self.mu = mu;
        self.nu = nu;
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn constant_coeffs(&self) -> Option<&ConstantCoeffs> {
        self.constant.as_ref()
    }

    #[inline]
    pub fn drift_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.drift)(t, x, out)
    }

    #[inline]
    pub fn diffusion_into(&self, t: f64, x: &[f64], out: &mut [f64]) {
        (self.diffusion)(t, x, out)
    }

    pub fn drift(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.drift_into(t, x, &mut out);
        out
    }

    pub fn diffusion(&self, t: f64, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.d];
        self.diffusion_into(t, x, &mut out);
        out
    }

    /// `sigma^T(t,x) q`, a vector of dimension `d`.
    pub fn sigma_t_q(&self, t: f64, x: &[f64], q: &[f64]) -> Vec<f64> {
        let s = self.diffusion(t, x);
        (0..self.d)
            .map(|c| (0..self.n).map(|k| s[k * self.d + c] * q[k]).sum())
            .collect()
    }

    pub fn q_dot_b(&self, t: f64, x: &[f64], q: &[f64]) -> f64 {
        dot(q, &self.drift(t, x))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObstacleKind {
    Constant,
    DeterministicInTime,
    State,
    ItoForm,
}

/// Itô-form obstacle `L_t = l0 + drift*t + vol.B_t`, evaluated on a state
/// that is the driving Brownian motion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ItoForm {
    pub l0: f64,
    pub drift: f64,
    pub vol: Vec<f64>,
}

/// Lower barrier `L(t, x)`.
#[derive(Clone)]
pub struct ObstacleSpec {
    name: String,
    kind: ObstacleKind,
    eval: Arc<ObstacleFn>,
    ito: Option<ItoForm>,
    upper_bound: Option<f64>,
    constant: Option<f64>,
}

impl fmt::Debug for ObstacleSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObstacleSpec")
            .field("name", &self.name)
            .field("kind", &self.kind)
            .field("ito", &self.ito)
            .field("upper_bound", &self.upper_bound)
            .finish()
    }
}

impl ObstacleSpec {
    fn build(name: String, kind: ObstacleKind, eval: Arc<ObstacleFn>) -> Self {
        Self {
            name,
            kind,
            eval,
            ito: None,
            upper_bound: None,
            constant: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        let mut out = Self::build(format!("constant({c})"), ObstacleKind::Constant, Arc::new(move |_, _| c));
        out.constant = Some(c);
        out
    }

    /// Placeholder obstacle that never binds.
    pub fn absent() -> Self {
        Self::constant(NO_OBSTACLE).with_name("none")
    }

    pub fn deterministic<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self::build(name.into(), ObstacleKind::DeterministicInTime, Arc::new(move |t, _| f(t)))
    }

    /// `l0 + slope * t`.
    pub fn linear_in_time(l0: f64, slope: f64) -> Self {
        Self::deterministic(format!("linear-in-time(l0={l0}, slope={slope})"), move |t| l0 + slope * t)
    }

    pub fn state<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(f64, &[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::build(name.into(), ObstacleKind::State, Arc::new(f))
    }

    /// Put payoff `(strike - exp(x_0))^+` on a log-price state.
    pub fn put_on_log(strike: f64) -> Self {
        Self::state(format!("put(strike={strike})"), move |_, x| (strike - x[0].exp()).max(0.0))
    }

    pub fn ito(l0: f64, drift: f64, vol: Vec<f64>) -> Self {
        let v = vol.clone();
        let mut out = Self::build(
            format!("ito(l0={l0}, u={drift}, v={vol:?})"),
            ObstacleKind::ItoForm,
            Arc::new(move |t, x| l0 + drift * t + dot(&v, x)),
        );
        out.ito = Some(ItoForm { l0, drift, vol });
        out
    }

    pub fn with_upper_bound(mut self, c: f64) -> Self {
        self.upper_bound = Some(c);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    #[inline]
    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        (self.eval)(t, x)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> ObstacleKind {
        self.kind
    }

    pub fn ito_form(&self) -> Option<&ItoForm> {
        self.ito.as_ref()
    }

    pub fn upper_bound(&self) -> Option<f64> {
        self.upper_bound
    }

    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    /// True when `L` does not depend on the state.
    pub fn is_state_free(&self) -> bool {
        matches!(self.kind, ObstacleKind::Constant | ObstacleKind::DeterministicInTime)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_generator_flags() {
        let g = GeneratorSpec::linear(0.0, vec![0.5], 0.0);
        assert!(g.satisfies_a3());
        assert_eq!(g.eval(0.0, 3.0, &[2.0]), 1.0);
        assert!(!GeneratorSpec::linear(0.1, vec![0.0], 0.0).satisfies_a3());
    }

    #[test]
    fn shift_and_sum_compose() {
        let g = GeneratorSpec::abs_z().shifted(0.2);
        assert!((g.eval(0.0, 5.0, &[-1.0]) - 1.2).abs() < 1e-15);
        assert!(!g.satisfies_a3());
        let h = GeneratorSpec::linear(0.1, vec![0.0], 0.0).sum(&GeneratorSpec::abs_z());
        assert!((h.eval(0.0, 1.0, &[2.0]) - 2.1).abs() < 1e-15);
    }

    #[test]
    fn sigma_transpose_q_uses_columns() {
        // n = 2, d = 1
        let c = SdeCoeffs::constant(vec![0.0, 0.0], vec![1.0, 2.0], 1);
        assert_eq!(c.sigma_t_q(0.0, &[0.0, 0.0], &[1.0, 1.0]), vec![3.0]);
    }

    #[test]
    fn ito_obstacle_evaluates_on_state() {
        let l = ObstacleSpec::ito(0.5, 0.1, vec![0.2]);
        assert!((l.eval(1.0, &[1.0]) - 0.8).abs() < 1e-15);
        assert_eq!(l.kind(), ObstacleKind::ItoForm);
    }
}
