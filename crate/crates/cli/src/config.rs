//! Experiment files: a strict TOML schema with every default spelled out in
//! the resolved form that is echoed into each report.

use rbsde::applications::ConverseVerdict;
use rbsde::representation::{McSettings, RepBackend, RepTolerances, DEFAULT_SCHEDULE};
use rbsde::solvers::LsmcValue;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    Solve,
    Representation,
    Corollary32,
    Corollary33,
    ConverseComparison,
    Properties,
    Apriori,
}

impl Kind {
    pub const ALL: [Kind; 7] = [
        Kind::Solve,
        Kind::Representation,
        Kind::Corollary32,
        Kind::Corollary33,
        Kind::ConverseComparison,
        Kind::Properties,
        Kind::Apriori,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Kind::Solve => "solve",
            Kind::Representation => "representation",
            Kind::Corollary32 => "corollary32",
            Kind::Corollary33 => "corollary33",
            Kind::ConverseComparison => "converse-comparison",
            Kind::Properties => "properties",
            Kind::Apriori => "apriori",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorConfig {
    Zero {},
    Constant {
        c: f64,
    },
    /// `a y + beta.z + c`; an empty `beta` is the zero vector.
    Linear {
        #[serde(default)]
        a: f64,
        #[serde(default)]
        beta: Vec<f64>,
        #[serde(default)]
        c: f64,
    },
    AbsZ {},
    SqrtCap {},
    Discount {
        r: f64,
    },
    Expression {
        expr: String,
        /// Declared growth constant.
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default)]
        gamma: f64,
        /// Declared `g(t, y, 0) = 0`.
        #[serde(default)]
        vanishes_at_zero: bool,
    },
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig::Zero {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ObstacleConfig {
    Absent {},
    Constant {
        value: f64,
    },
    /// `l0 + slope t`.
    LinearInTime {
        l0: f64,
        slope: f64,
    },
    /// `l0 + drift t + vol.x` on a Brownian state.
    Ito {
        #[serde(default)]
        l0: f64,
        #[serde(default)]
        drift: f64,
        vol: Vec<f64>,
    },
    /// `(strike - exp(x0))^+` on a log-price.
    Put {
        strike: f64,
    },
    Expression {
        expr: String,
        #[serde(default)]
        upper_bound: Option<f64>,
    },
}

impl Default for ObstacleConfig {
    fn default() -> Self {
        ObstacleConfig::Absent {}
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SdeConfig {
    /// `X = x0 + B` in dimension `d`.
    Brownian {
        #[serde(default = "one_usize")]
        d: usize,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    Scalar {
        b: f64,
        sigma: f64,
        #[serde(default)]
        x0: f64,
    },
    /// Constant drift and row-major `n x d` diffusion.
    Constant {
        b: Vec<f64>,
        sigma: Vec<f64>,
        d: usize,
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    /// Log-price of a geometric Brownian motion started at `s0`.
    GbmLog {
        r: f64,
        vol: f64,
        s0: f64,
    },
    Geometric {
        m: f64,
        s: f64,
        x0: f64,
    },
    OrnsteinUhlenbeck {
        kappa: f64,
        theta: f64,
        sigma: f64,
        #[serde(default)]
        x0: f64,
    },
}

impl Default for SdeConfig {
    fn default() -> Self {
        SdeConfig::Brownian { d: 1, x0: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "id", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TerminalConfig {
    Constant {
        value: f64,
    },
    /// `c0 + q.x`.
    Linear {
        #[serde(default)]
        c0: f64,
        q: Vec<f64>,
    },
    Put {
        strike: f64,
    },
    /// The obstacle at the horizon.
    Obstacle {},
    Expression {
        expr: String,
    },
}

impl Default for TerminalConfig {
    fn default() -> Self {
        TerminalConfig::Constant { value: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub t0: f64,
    pub horizon: f64,
    pub n_steps: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            t0: 0.0,
            horizon: 1.0,
            n_steps: 100,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverBackend {
    Tree,
    Lsmc,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub backend: SolverBackend,
    pub picard_passes: usize,
    pub skorokhod_tol: f64,
    pub lsmc_value: LsmcValue,
    pub obstacle_basis: bool,
    /// Solve the penalised equation at this level instead.
    pub n_penalty: Option<f64>,
    /// Penalty levels compared against the reflected solution.
    pub penalty_sweep: Vec<f64>,
    /// Largest relative gap allowed at the strongest penalty.
    pub penalty_gap_tol: f64,
    /// Samples for the assumption checks; 0 skips them.
    pub validate_samples: usize,
    pub write_solution: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            backend: SolverBackend::Tree,
            picard_passes: 1,
            skorokhod_tol: rbsde::model::DEFAULT_SKOROKHOD_TOL,
            lsmc_value: LsmcValue::default(),
            obstacle_basis: true,
            n_penalty: None,
            penalty_sweep: Vec::new(),
            penalty_gap_tol: 0.02,
            validate_samples: 0,
            write_solution: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    /// `n = d`, `q = z`, `b = 0`, `sigma = I`, `x = 0`.
    Corollary34,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepresentationConfig {
    pub preset: Option<Preset>,
    /// `z` for the preset.
    pub z: Vec<f64>,
    pub t: f64,
    /// Start state; the forward start state when absent.
    pub x: Option<Vec<f64>>,
    pub eta: f64,
    pub q: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub p_norm: f64,
    pub backend: RepBackend,
    pub stop_cap: Option<f64>,
    /// Constant level `C` of the bounded-obstacle check.
    pub level: f64,
    pub floor_tol: f64,
}

impl Default for RepresentationConfig {
    fn default() -> Self {
        Self {
            preset: None,
            z: Vec::new(),
            t: 0.0,
            x: None,
            eta: 1.0,
            q: Vec::new(),
            epsilons: DEFAULT_SCHEDULE.to_vec(),
            p_norm: 1.0,
            backend: RepBackend::Lsmc,
            stop_cap: None,
            level: 0.0,
            floor_tol: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    pub t: f64,
    pub eta: f64,
    pub z: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConverseConfig {
    pub backend: RepBackend,
    pub diff_tol: f64,
    pub forward_check: bool,
    pub forward_steps: usize,
    pub probes: Vec<ProbeConfig>,
    pub expect_verdict: Option<ConverseVerdict>,
    /// Expected `limit1 - limit2` at every probe.
    pub expect_difference: Option<f64>,
    pub expect_tol: f64,
}

impl Default for ConverseConfig {
    fn default() -> Self {
        Self {
            backend: RepBackend::Lsmc,
            diff_tol: 0.02,
            forward_check: true,
            forward_steps: 100,
            probes: Vec::new(),
            expect_verdict: None,
            expect_difference: None,
            expect_tol: 0.02,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Suite {
    SelfFinancing,
    ZeroInterest,
    Flatness,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropertiesConfig {
    pub suite: Suite,
    /// Obstacle level: negative for self-financing, the bound `C` for zero
    /// interest.
    pub level: f64,
    pub y_values: Vec<f64>,
    pub eta: f64,
    pub t: f64,
    /// Whether the characterisation is expected to hold; absent means
    /// only consistency is checked.
    pub expect_holds: Option<bool>,
    pub tol: f64,
    pub probe_tol: f64,
    pub drift: f64,
    pub sigma: f64,
    pub probe_times: Vec<f64>,
}

impl Default for PropertiesConfig {
    fn default() -> Self {
        let s = rbsde::applications::CheckSettings::default();
        Self {
            suite: Suite::SelfFinancing,
            level: -1.0,
            y_values: vec![1.0],
            eta: 1.0,
            t: 0.0,
            expect_holds: None,
            tol: s.tol,
            probe_tol: s.probe_tol,
            drift: s.drift,
            sigma: s.sigma,
            probe_times: s.probe_times,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AprioriConfig {
    pub sigma_idx: usize,
    /// Defaults to the last node.
    pub tau_idx: Option<usize>,
    pub walks: usize,
    pub seed: u64,
    /// Also run on the doubled grid and compare the ratios.
    pub refine: bool,
    pub max_ratio_change: f64,
}

impl Default for AprioriConfig {
    fn default() -> Self {
        Self {
            sigma_idx: 0,
            tau_idx: None,
            walks: 20_000,
            seed: 1,
            refine: true,
            max_ratio_change: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// File stem; the config file stem when absent.
    pub name: Option<String>,
    pub dir: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            name: None,
            dir: "out".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: Kind,
    #[serde(default)]
    pub generator: GeneratorConfig,
    /// Second generator of a comparison.
    #[serde(default)]
    pub generator2: Option<GeneratorConfig>,
    #[serde(default)]
    pub obstacle: ObstacleConfig,
    #[serde(default)]
    pub sde: SdeConfig,
    #[serde(default)]
    pub terminal: TerminalConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub monte_carlo: McSettings,
    #[serde(default)]
    pub representation: RepresentationConfig,
    #[serde(default)]
    pub tolerances: RepTolerances,
    #[serde(default)]
    pub converse: ConverseConfig,
    #[serde(default)]
    pub properties: PropertiesConfig,
    #[serde(default)]
    pub apriori: AprioriConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

/// Command-line replacements applied after parsing.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub n_paths: Option<usize>,
}

impl ExperimentConfig {
    /// Parse; errors carry the line, column and offending field.
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.monte_carlo.seed = seed;
            self.apriori.seed = seed;
        }
        if let Some(n) = o.n_paths {
            self.monte_carlo.n_paths = n;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_fills_defaults() {
        let c = ExperimentConfig::parse("kind = \"solve\"\n").unwrap();
        assert_eq!(c.generator, GeneratorConfig::Zero {});
        assert_eq!(c.grid.n_steps, 100);
        assert_eq!(c.monte_carlo.n_paths, 100_000);
        assert_eq!(c.representation.epsilons, DEFAULT_SCHEDULE.to_vec());
    }

    #[test]
    fn unknown_keys_rejected_with_location() {
        let e = ExperimentConfig::parse("kind = \"solve\"\n[grid]\nn_step = 3\n").unwrap_err();
        assert!(e.contains("line 3") && e.contains("n_step"), "{e}");
        let e = ExperimentConfig::parse("kind = \"solve\"\n[generator]\nid = \"abs-z\"\nc = 1\n").unwrap_err();
        assert!(e.contains("c"), "{e}");
        let e = ExperimentConfig::parse("kind = \"solve\"\nextra = 1\n").unwrap_err();
        assert!(e.contains("extra"), "{e}");
    }

    #[test]
    fn tagged_sections() {
        let c = ExperimentConfig::parse(
            "kind = \"representation\"\n[generator]\nid = \"linear\"\nbeta = [0.5]\n[sde]\nid = \"scalar\"\nb = 0.3\nsigma = 1.0\n",
        )
        .unwrap();
        assert_eq!(
            c.generator,
            GeneratorConfig::Linear {
                a: 0.0,
                beta: vec![0.5],
                c: 0.0
            }
        );
        assert!(matches!(c.sde, SdeConfig::Scalar { b, .. } if b == 0.3));
    }
}
