//! Built-in generators, obstacles, forward dynamics and terminal values.

use rbsde::model::{GeneratorSpec, ObstacleSpec, SdeCoeffs};
use rbsde::solvers::Terminal;
use serde::Serialize;

use crate::config::{GeneratorConfig, ObstacleConfig, SdeConfig, TerminalConfig};
use crate::expr::Formula;

pub fn sde(c: &SdeConfig) -> Result<(SdeCoeffs, Vec<f64>), String> {
    let out = match c {
        SdeConfig::Brownian { d, x0 } => {
            if *d == 0 {
                return Err("sde.d must be positive".into());
            }
            (SdeCoeffs::brownian(*d), x0.clone().unwrap_or_else(|| vec![0.0; *d]))
        }
        SdeConfig::Scalar { b, sigma, x0 } => (SdeCoeffs::scalar(*b, *sigma), vec![*x0]),
        SdeConfig::Constant { b, sigma, d, x0 } => {
            if b.is_empty() || *d == 0 || sigma.len() != b.len() * d {
                return Err(format!(
                    "sde.sigma must hold n x d = {} x {d} entries, found {}",
                    b.len(),
                    sigma.len()
                ));
            }
            (
                SdeCoeffs::constant(b.clone(), sigma.clone(), *d),
                x0.clone().unwrap_or_else(|| vec![0.0; b.len()]),
            )
        }
        SdeConfig::GbmLog { r, vol, s0 } => {
            if *s0 <= 0.0 {
                return Err("sde.s0 must be positive".into());
            }
            (SdeCoeffs::gbm_log(*r, *vol), vec![s0.ln()])
        }
        SdeConfig::Geometric { m, s, x0 } => (SdeCoeffs::geometric(*m, *s), vec![*x0]),
        SdeConfig::OrnsteinUhlenbeck { kappa, theta, sigma, x0 } => {
            (SdeCoeffs::ornstein_uhlenbeck(*kappa, *theta, *sigma), vec![*x0])
        }
    };
    if out.1.len() != out.0.n() {
        return Err(format!("sde.x0 has {} entries, the state has {}", out.1.len(), out.0.n()));
    }
    Ok(out)
}

/// Generator for Brownian dimension `d`.
pub fn generator(c: &GeneratorConfig, d: usize) -> Result<GeneratorSpec, String> {
    Ok(match c {
        GeneratorConfig::Zero {} => GeneratorSpec::zero(),
        GeneratorConfig::Constant { c } => GeneratorSpec::constant(*c),
        GeneratorConfig::Linear { a, beta, c } => {
            let beta = if beta.is_empty() { vec![0.0; d] } else { beta.clone() };
            if beta.len() != d {
                return Err(format!("generator.beta has {} entries, the noise has {d}", beta.len()));
            }
            GeneratorSpec::linear(*a, beta, *c)
        }
        GeneratorConfig::AbsZ {} => GeneratorSpec::abs_z(),
        GeneratorConfig::SqrtCap {} => GeneratorSpec::sqrt_cap(),
        GeneratorConfig::Discount { r } => GeneratorSpec::discount(*r),
        GeneratorConfig::Expression {
            expr,
            lambda,
            gamma,
            vanishes_at_zero,
        } => {
            let f = Formula::parse(expr)?;
            f.probe_driver(d)?;
            GeneratorSpec::new(expr.clone(), *lambda, move |t, y, z| f.driver(t, y, z).unwrap_or(f64::NAN))
                .with_constant_gamma(*gamma)
                .with_a3(*vanishes_at_zero)
        }
    })
}

pub fn obstacle(c: &ObstacleConfig, n: usize) -> Result<ObstacleSpec, String> {
    Ok(match c {
        ObstacleConfig::Absent {} => ObstacleSpec::absent(),
        ObstacleConfig::Constant { value } => ObstacleSpec::constant(*value),
        ObstacleConfig::LinearInTime { l0, slope } => ObstacleSpec::linear_in_time(*l0, *slope),
        ObstacleConfig::Ito { l0, drift, vol } => {
            if vol.len() != n {
                return Err(format!("obstacle.vol has {} entries, the state has {n}", vol.len()));
            }
            ObstacleSpec::ito(*l0, *drift, vol.clone())
        }
        ObstacleConfig::Put { strike } => ObstacleSpec::put_on_log(*strike),
        ObstacleConfig::Expression { expr, upper_bound } => {
            let f = Formula::parse(expr)?;
            f.probe_field(n)?;
            let spec = if f.mentions("x") {
                ObstacleSpec::state(expr.clone(), move |t, x| f.field(t, x).unwrap_or(f64::NAN))
            } else {
                ObstacleSpec::deterministic(expr.clone(), move |t| f.field(t, &[]).unwrap_or(f64::NAN))
            };
            match upper_bound {
                Some(b) => spec.with_upper_bound(*b),
                None => spec,
            }
        }
    })
}

pub fn terminal(c: &TerminalConfig, obs: &ObstacleSpec, horizon: f64, n: usize) -> Result<Terminal, String> {
    Ok(match c {
        TerminalConfig::Constant { value } => Terminal::constant(*value),
        TerminalConfig::Linear { c0, q } => {
            if q.len() != n {
                return Err(format!("terminal.q has {} entries, the state has {n}", q.len()));
            }
            Terminal::linear(*c0, q.clone())
        }
        TerminalConfig::Put { strike } => Terminal::put_on_log(*strike),
        TerminalConfig::Obstacle {} => Terminal::obstacle_at(obs, horizon),
        TerminalConfig::Expression { expr } => {
            let f = Formula::parse(expr)?;
            f.probe_field(n)?;
            Terminal::new(expr.clone(), move |x| f.field(horizon, x).unwrap_or(f64::NAN))
        }
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct Entry {
    pub id: &'static str,
    pub formula: &'static str,
    pub properties: &'static str,
    pub used_by: &'static str,
}

#[derive(Debug, Clone, Serialize)]
pub struct Catalog {
    pub generators: Vec<Entry>,
    pub obstacles: Vec<Entry>,
    pub sde: Vec<Entry>,
    pub terminals: Vec<Entry>,
    pub presets: Vec<Entry>,
    pub kinds: Vec<Entry>,
}

const fn e(id: &'static str, formula: &'static str, properties: &'static str, used_by: &'static str) -> Entry {
    Entry {
        id,
        formula,
        properties,
        used_by,
    }
}

pub fn catalog() -> Catalog {
    Catalog {
        generators: vec![
            e("zero", "g = 0", "(A1)(A2)(A3); Lipschitz", "Snell envelope oracle, closed-form obstacle"),
            e("constant", "g = c", "(A1)(A2); (A3) iff c = 0", "converse comparison offsets"),
            e("linear", "g = a*y + beta.z + c", "(A1)(A2); (A3) iff a = c = 0; Lipschitz", "representation limits, crossing generators"),
            e("abs-z", "g = |z|", "(A1)(A2)(A3); Lipschitz", "representation limits, K-vanishing checks"),
            e("sqrt-cap", "g = sqrt(min(|y|, 1))", "(A1)(A2); continuous non-Lipschitz", "representation beyond the Lipschitz case"),
            e("discount", "g = -r*y", "(A1)(A2); Lipschitz", "American put"),
            e("expression", "user formula in t, y, z, z0.., znorm", "declared lambda, gamma and (A3) flag", "custom experiments"),
        ],
        obstacles: vec![
            e("absent", "L = -1e9", "never binds", "unreflected runs"),
            e("constant", "L = value", "bounded by value", "bounded-obstacle checks"),
            e("linear-in-time", "L = l0 + slope*t", "deterministic", "closed-form obstacle, flatness"),
            e("ito", "L = l0 + drift*t + vol.x", "Ito process on a Brownian state", "Ito-obstacle K-vanishing check"),
            e("put", "L = (strike - exp(x0))^+", "state dependent", "American put"),
            e("expression", "user formula in t, x, x0..", "optional declared upper bound", "custom experiments"),
        ],
        sde: vec![
            e("brownian", "b = 0, sigma = I", "(H1)(H2)", "presets"),
            e("scalar", "b, sigma constant (n = d = 1)", "(H1)(H2); tree backend", "drift and volatility variants"),
            e("constant", "b vector, sigma n x d row-major", "(H1)(H2)", "multidimensional runs"),
            e("gbm-log", "b = r - vol^2/2, sigma = vol on log-price", "(H1)(H2)", "American put"),
            e("geometric", "b = m*x, sigma = s*x", "(H1)(H2)", "state-dependent coefficients"),
            e("ornstein-uhlenbeck", "b = kappa*(theta - x), sigma constant", "(H1)(H2)", "mean-reverting state"),
        ],
        terminals: vec![
            e("constant", "xi = value", "", ""),
            e("linear", "xi = c0 + q.x", "", ""),
            e("put", "xi = (strike - exp(x0))^+", "", ""),
            e("obstacle", "xi = L(T, x)", "", ""),
            e("expression", "user formula in x, x0..", "", ""),
        ],
        presets: vec![e(
            "corollary34",
            "n=d, q=z, b=0, σ=1, x = 0",
            "generator value g(t, eta, z) as the short-horizon limit",
            "representation with the state equal to the Brownian motion",
        )],
        kinds: KIND_ENTRIES.to_vec(),
    }
}

const KIND_ENTRIES: [Entry; 7] = [
    e("solve", "reflected solution on tree or paths", "optional penalty sweep", "closed-form and option checks"),
    e("representation", "short-horizon quotient sweep over epsilon", "convergence verdict", "generator representation"),
    e("corollary32", "sweep with an Ito obstacle", "K increment vanishes", "Ito-obstacle case"),
    e("corollary33", "sweep with an obstacle bounded by C", "K increment vanishes, Y >= C", "bounded-obstacle case"),
    e("converse-comparison", "limits of two generators at probes", "ordering verdict", "converse comparison"),
    e("properties", "constant-solution characterisations", "both directions tested", "self-financing, zero interest, flatness"),
    e("apriori", "a priori estimate ratio", "stable under refinement", "a priori estimate"),
];

pub fn print_catalog(mut w: impl std::io::Write) -> std::io::Result<()> {
    let c = catalog();
    let sections: [(&str, &[Entry]); 6] = [
        ("generators", &c.generators),
        ("obstacles", &c.obstacles),
        ("sde", &c.sde),
        ("terminals", &c.terminals),
        ("presets", &c.presets),
        ("kinds", &c.kinds),
    ];
    for (title, entries) in sections {
        writeln!(w, "[{title}]")?;
        for en in entries {
            write!(w, "  {:<22} {}", en.id, en.formula)?;
            if !en.properties.is_empty() {
                write!(w, "  | {}", en.properties)?;
            }
            if !en.used_by.is_empty() {
                write!(w, "  | {}", en.used_by)?;
            }
            writeln!(w)?;
        }
    }
    Ok(())
}
