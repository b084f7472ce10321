//! Sampling-based checks of the standing assumptions on a problem setup.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::spec::{norm, GeneratorSpec, ObstacleSpec, SdeCoeffs};

/// Region in which assumptions are sampled.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SampleBox {
    pub t_min: f64,
    pub t_max: f64,
    /// Half-width of the cube sampled for `y`, `z` and `x`.
    pub radius: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self {
            t_min: 0.0,
            t_max: 1.0,
            radius: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub t: f64,
    pub y: Option<f64>,
    pub z: Vec<f64>,
    pub x: Vec<f64>,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: String,
    pub passed: bool,
    pub samples: usize,
    /// Sample with the largest `lhs - rhs` among the violations.
    pub worst: Option<SamplePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub seed: u64,
    pub n_samples: usize,
    pub sample_box: SampleBox,
    pub checks: Vec<AssumptionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    name: &'static str,
    samples: usize,
    worst: Option<SamplePoint>,
}

impl Tracker {
    fn new(name: &'static str) -> Self {
        Self {
            name,
            samples: 0,
            worst: None,
        }
    }

    fn record(&mut self, ok: bool, point: impl FnOnce() -> SamplePoint) {
        self.samples += 1;
        if ok {
            return;
        }
        let p = point();
        let excess = p.lhs - p.rhs;
        if self.worst.as_ref().is_none_or(|w| excess > w.lhs - w.rhs) {
            self.worst = Some(p);
        }
    }

    fn finish(self) -> AssumptionCheck {
        AssumptionCheck {
            name: self.name.to_string(),
            passed: self.worst.is_none(),
            samples: self.samples,
            worst: self.worst,
        }
    }
}

fn uniform_vec(rng: &mut ChaCha8Rng, dim: usize, r: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-r..=r)).collect()
}

fn frob_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Validate with the default sampling box.
pub fn validate_spec(
    gen: &GeneratorSpec,
    coeffs: &SdeCoeffs,
    obs: &ObstacleSpec,
    n_samples: usize,
    seed: u64,
) -> ValidationReport {
    validate_spec_in(gen, coeffs, obs, n_samples, seed, SampleBox::default())
}

pub fn validate_spec_in(
    gen: &GeneratorSpec,
    coeffs: &SdeCoeffs,
    obs: &ObstacleSpec,
    n_samples: usize,
    seed: u64,
    sample_box: SampleBox,
) -> ValidationReport {
    let n_samples = n_samples.max(1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (n, d, r) = (coeffs.n(), coeffs.d(), sample_box.radius);
    let slack = |rhs: f64| rhs * (1.0 + 1e-12) + 1e-12;

    let mut a1 = Tracker::new("A1");
    let mut a2 = Tracker::new("A2");
    let mut a3 = gen.satisfies_a3().then(|| Tracker::new("A3"));
    let mut h1 = Tracker::new("H1");
    let mut h2 = Tracker::new("H2");
    let mut finite = Tracker::new("obstacle-finite");
    let mut bounded = obs.upper_bound().map(|_| Tracker::new("obstacle-upper-bound"));

    for _ in 0..n_samples {
        let t = rng.random_range(sample_box.t_min..=sample_box.t_max);
        let y: f64 = rng.random_range(-r..=r);
        let z = uniform_vec(&mut rng, d, r);
        let x = uniform_vec(&mut rng, n, r);
        let x2 = uniform_vec(&mut rng, n, r);

        // (A1) linear growth
        let g = gen.eval(t, y, &z);
        let bound = gen.lambda() * (gen.gamma(t) + y.abs() + norm(&z));
        a1.record(g.is_finite() && g.abs() <= slack(bound), || SamplePoint {
            t,
            y: Some(y),
            z: z.clone(),
            x: vec![],
            lhs: g.abs(),
            rhs: bound,
        });

        // (A2) continuity, probed at a tiny random displacement
        let h = 1e-8;
        let dy: f64 = rng.random_range(-h..=h);
        let zp: Vec<f64> = z.iter().map(|v| v + rng.random_range(-h..=h)).collect();
        let jump = (gen.eval(t, y + dy, &zp) - g).abs();
        let allowed = 1e-2 * (1.0 + g.abs());
        a2.record(jump <= allowed, || SamplePoint {
            t,
            y: Some(y),
            z: z.clone(),
            x: vec![],
            lhs: jump,
            rhs: allowed,
        });

        // (A3) g(t, y, 0) = 0
        if let Some(a3) = a3.as_mut() {
            let zero = vec![0.0; d];
            let v = gen.eval(t, y, &zero).abs();
            a3.record(v <= 1e-12, || SamplePoint {
                t,
                y: Some(y),
                z: zero.clone(),
                x: vec![],
                lhs: v,
                rhs: 0.0,
            });
        }

        // (H1) Lipschitz in x
        let (b1, b2) = (coeffs.drift(t, &x), coeffs.drift(t, &x2));
        let (s1, s2) = (coeffs.diffusion(t, &x), coeffs.diffusion(t, &x2));
        let lhs = frob_diff(&b1, &b2) + frob_diff(&s1, &s2);
        let rhs = coeffs.mu() * frob_diff(&x, &x2);
        h1.record(lhs <= slack(rhs), || SamplePoint {
            t,
            y: None,
            z: vec![],
            x: x.clone(),
            lhs,
            rhs,
        });

        // (H2) linear growth in x
        let lhs = norm(&b1) + norm(&s1);
        let rhs = coeffs.nu() * (1.0 + norm(&x));
        h2.record(lhs.is_finite() && lhs <= slack(rhs), || SamplePoint {
            t,
            y: None,
            z: vec![],
            x: x.clone(),
            lhs,
            rhs,
        });

        let l = obs.eval(t, &x);
        finite.record(l.is_finite(), || SamplePoint {
            t,
            y: None,
            z: vec![],
            x: x.clone(),
            lhs: l,
            rhs: f64::MAX,
        });
        if let (Some(tr), Some(c)) = (bounded.as_mut(), obs.upper_bound()) {
            tr.record(l <= c, || SamplePoint {
                t,
                y: None,
                z: vec![],
                x: x.clone(),
                lhs: l,
                rhs: c,
            });
        }
    }

    let mut checks = vec![a1.finish(), a2.finish()];
    checks.extend(a3.map(Tracker::finish));
    checks.push(h1.finish());
    checks.push(h2.finish());
    checks.push(finite.finish());
    checks.extend(bounded.map(Tracker::finish));
    ValidationReport {
        seed,
        n_samples,
        sample_box,
        checks,
    }
}
