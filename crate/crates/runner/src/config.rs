//! Experiment configuration, read from TOML. See `docs/config.md`.

use std::path::{Path, PathBuf};

use plmpc_core::learning::SeedStrategy;
use plmpc_core::scenarios::{self, ScenarioSpec};
use serde::{Deserialize, Serialize};

use crate::RunError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Learning iterations after the seed.
    pub iterations: usize,
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    #[serde(default)]
    pub theta: ThetaConfig,
    #[serde(default)]
    pub extensions: ExtensionConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub tolerances: ToleranceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Built-in scenario: `spring-mass`, `building` or `tiny`.
    #[serde(default)]
    pub name: Option<String>,
    /// Complete scenario written out in the config instead of a name.
    #[serde(default)]
    pub inline: Option<Box<ScenarioSpec>>,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub seed_strategy: Option<SeedStrategy>,
    #[serde(default)]
    pub alpha_target: Option<f64>,
    #[serde(default)]
    pub rpi_max_horizon: Option<usize>,
    #[serde(default)]
    pub candidate_cap: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ThetaConfig {
    /// Hold theta at this value in every iteration instead of sampling.
    #[serde(default)]
    pub fixed: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct ExtensionConfig {
    /// Per-iteration initial-state offsets sampled from this box.
    #[serde(default)]
    pub initial_offset: Option<BoxConfig>,
    /// Per-iteration dynamics deviations with entries in `[-a, a]`, `[-b, b]`.
    #[serde(default)]
    pub deviation: Option<DeviationConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeviationConfig {
    pub a_scale: f64,
    pub b_scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "yes")]
    pub trajectories: bool,
    #[serde(default = "yes")]
    pub shifted_costs: bool,
    #[serde(default)]
    pub dump_safe_sets: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { trajectories: true, shifted_costs: true, dump_safe_sets: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    /// Slack allowed in the cost inequalities checked after each iteration.
    #[serde(default = "invariant_default")]
    pub invariant: f64,
    #[serde(default = "match_default")]
    pub state_match: f64,
    #[serde(default)]
    pub qp_feasibility: Option<f64>,
    #[serde(default)]
    pub qp_gap: Option<f64>,
}

fn invariant_default() -> f64 {
    1e-6
}
fn match_default() -> f64 {
    plmpc_core::learning::DEFAULT_MATCH_TOLERANCE
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { invariant: invariant_default(), state_match: match_default(), qp_feasibility: None, qp_gap: None }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let cfg: Self = toml::from_str(text).map_err(|e| RunError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Config for a built-in scenario with defaults everywhere else.
    pub fn for_scenario(name: &str, iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            seed,
            output_dir: None,
            scenario: ScenarioConfig { name: Some(name.into()), ..Default::default() },
            theta: ThetaConfig::default(),
            extensions: ExtensionConfig::default(),
            output: OutputConfig::default(),
            tolerances: ToleranceConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), RunError> {
        if self.iterations == 0 {
            return Err(RunError::Usage("iterations must be at least 1".into()));
        }
        match (&self.scenario.name, &self.scenario.inline) {
            (Some(_), Some(_)) => return Err(RunError::Usage("scenario: give either name or inline, not both".into())),
            (None, None) => return Err(RunError::Usage("scenario: name or inline is required".into())),
            (Some(n), None) if scenarios::by_name(n).is_none() => {
                return Err(RunError::Usage(format!("unknown scenario '{n}' (expected spring-mass, building or tiny)")))
            }
            _ => {}
        }
        if let Some(b) = &self.extensions.initial_offset {
            if b.lower.len() != b.upper.len() || b.lower.iter().zip(&b.upper).any(|(l, u)| l > u) {
                return Err(RunError::Usage("extensions.initial_offset: lower and upper must match and be ordered".into()));
            }
        }
        if let Some(d) = &self.extensions.deviation {
            if !(d.a_scale >= 0.0 && d.b_scale >= 0.0) {
                return Err(RunError::Usage("extensions.deviation: scales must be nonnegative".into()));
            }
        }
        Ok(())
    }

    /// Scenario with the config's overrides applied.
    pub fn resolve_scenario(&self) -> Result<ScenarioSpec, RunError> {
        let mut spec = match (&self.scenario.name, &self.scenario.inline) {
            (Some(n), _) => scenarios::by_name(n).expect("validated name").map_err(RunError::Core)?,
            (None, Some(s)) => (**s).clone(),
            (None, None) => unreachable!("validated"),
        };
        let s = &self.scenario;
        if let Some(n) = s.horizon {
            spec.lmpc.horizon = n;
        }
        if let Some(st) = s.seed_strategy {
            spec.seed_strategy = st;
        }
        if let Some(a) = s.alpha_target {
            spec.tube.alpha_target = a;
        }
        if let Some(h) = s.rpi_max_horizon {
            spec.tube.max_horizon = h;
        }
        if s.candidate_cap.is_some() {
            spec.lmpc.candidate_cap = s.candidate_cap;
        }
        spec.lmpc.match_tolerance = self.tolerances.state_match;
        if let Some(f) = self.tolerances.qp_feasibility {
            spec.lmpc.qp.feasibility_tol = f;
        }
        if let Some(g) = self.tolerances.qp_gap {
            spec.lmpc.qp.gap_abs_tol = g;
            spec.lmpc.qp.gap_rel_tol = g;
        }
        spec.validate().map_err(|e| RunError::Usage(format!("scenario: {e}")))?;
        if let Some(th) = &self.theta.fixed {
            if th.len() != spec.domain.dim() {
                return Err(RunError::Usage(format!("theta.fixed has {} entries, scenario needs {}", th.len(), spec.domain.dim())));
            }
        }
        Ok(spec)
    }
}
