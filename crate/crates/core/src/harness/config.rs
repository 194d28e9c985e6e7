//! Experiment configuration (JSON).

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::adversary::{Adversary, AttackKind};
use crate::env::{make_bandit, make_combination_lock, make_random_linear, make_random_tabular, LinearMdp, RewardKind, TabularMdp};
use crate::estimators::BonusParams;
use crate::learners::{
    FixedPolicy, Learner, SupervisedBandC, SupervisedC, SupervisedUnif, UcbBandit, Ucbvi,
};
use crate::oracle::OptimalSolution;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentSpec {
    CombinationLock {
        num_actions: usize,
        horizon: usize,
    },
    RandomTabular {
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        #[serde(default)]
        seed: u64,
    },
    RandomLinear {
        dimension: usize,
        num_states: usize,
        num_actions: usize,
        horizon: usize,
        #[serde(default)]
        seed: u64,
    },
    Bandit {
        means: Vec<f64>,
        #[serde(default = "default_reward_kind")]
        reward_kind: RewardKind,
    },
    /// Canonical-basis linear embedding (`d = S·A`) of a tabular environment.
    CanonicalEmbedding {
        base: Box<EnvironmentSpec>,
    },
    /// A tabular MDP stored as JSON.
    File {
        path: PathBuf,
    },
}

fn default_reward_kind() -> RewardKind {
    RewardKind::Bernoulli
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarySpec {
    pub attack: AttackKind,
    #[serde(default)]
    pub budget: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for AdversarySpec {
    fn default() -> Self {
        AdversarySpec { attack: AttackKind::None, budget: 0, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    #[default]
    Tabular,
    Linear,
}

fn one() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    0.1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum LearnerSpec {
    /// Greedy policy on the nominal Q*.
    FixedOptimal,
    UcbBandit,
    /// `c_bar` defaults to the adversary budget.
    UcbBanditKnownC {
        #[serde(default)]
        c_bar: Option<f64>,
    },
    SupervisedBandC {
        #[serde(default)]
        ell_max: Option<usize>,
    },
    Ucbvi {
        #[serde(default = "one")]
        bonus_scale: f64,
    },
    SupervisedC {
        #[serde(default)]
        mode: FeatureMode,
        #[serde(default = "one")]
        lambda: f64,
        #[serde(default = "one")]
        bonus_scale: f64,
        #[serde(default)]
        ell_max: Option<usize>,
    },
    SupervisedUnif {
        #[serde(default = "default_epsilon")]
        epsilon: f64,
        #[serde(default = "one")]
        bonus_scale: f64,
    },
    UniformElimination {
        #[serde(default = "one")]
        bonus_scale: f64,
    },
}

fn default_replicates() -> usize {
    1
}

fn default_diagnostics_every() -> usize {
    0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub environment: EnvironmentSpec,
    #[serde(default)]
    pub adversary: AdversarySpec,
    pub learner: LearnerSpec,
    pub episodes: usize,
    pub delta: f64,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Write a diagnostics block into the run log every this many episodes
    /// (0 disables the periodic blocks; the summary is always written).
    #[serde(default = "default_diagnostics_every")]
    pub diagnostics_every: usize,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::Config(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if self.replicates == 0 {
            return Err(Error::Config("replicates must be at least 1".into()));
        }
        match &self.learner {
            LearnerSpec::SupervisedUnif { epsilon, .. } if !(0.0..=1.0).contains(epsilon) => {
                Err(Error::Config(format!("epsilon must lie in [0,1], got {epsilon}")))
            }
            LearnerSpec::SupervisedC { lambda, .. } if *lambda <= 0.0 => {
                Err(Error::Config(format!("lambda must be positive, got {lambda}")))
            }
            _ => Ok(()),
        }
    }
}

/// A constructed environment: the tabular model used by the oracle and, for
/// linear kinds, the feature representation.
#[derive(Debug, Clone)]
pub struct BuiltEnvironment {
    pub tabular: Arc<TabularMdp>,
    pub linear: Option<LinearMdp>,
}

pub fn build_environment(spec: &EnvironmentSpec) -> Result<BuiltEnvironment> {
    let plain = |m: TabularMdp| BuiltEnvironment { tabular: Arc::new(m), linear: None };
    Ok(match spec {
        EnvironmentSpec::CombinationLock { num_actions, horizon } => plain(make_combination_lock(*num_actions, *horizon)?),
        EnvironmentSpec::RandomTabular { num_states, num_actions, horizon, seed } => {
            plain(make_random_tabular(*num_states, *num_actions, *horizon, *seed)?)
        }
        EnvironmentSpec::Bandit { means, reward_kind } => plain(make_bandit(means, *reward_kind)?),
        EnvironmentSpec::File { path } => plain(TabularMdp::from_json(&std::fs::read_to_string(path)?)?),
        EnvironmentSpec::RandomLinear { dimension, num_states, num_actions, horizon, seed } => {
            let lin = make_random_linear(*dimension, *num_states, *num_actions, *horizon, *seed)?;
            BuiltEnvironment { tabular: Arc::new(lin.tabular.clone()), linear: Some(lin) }
        }
        EnvironmentSpec::CanonicalEmbedding { base } => {
            let inner = build_environment(base)?;
            let lin = LinearMdp::canonical_embedding(&inner.tabular)?;
            BuiltEnvironment { tabular: inner.tabular, linear: Some(lin) }
        }
    })
}

/// `T = K·H`, at least 1.
pub fn total_steps(episodes: usize, horizon: usize) -> u64 {
    ((episodes * horizon) as u64).max(1)
}

pub fn build_adversary(spec: &AdversarySpec, nominal: Arc<TabularMdp>) -> Result<Adversary> {
    Adversary::new(spec.attack, spec.budget, spec.seed, nominal)
}

fn require_bandit(m: &TabularMdp, name: &str) -> Result<()> {
    if m.num_states != 1 || m.horizon != 1 {
        return Err(Error::Config(format!("{name} needs a bandit environment (S = 1, H = 1)")));
    }
    Ok(())
}

pub fn build_learner(
    config: &ExperimentConfig,
    env: &BuiltEnvironment,
    solution: &OptimalSolution,
) -> Result<Box<dyn Learner>> {
    let m = &env.tabular;
    let steps = total_steps(config.episodes, m.horizon);
    let params = BonusParams {
        num_states: m.num_states,
        num_actions: m.num_actions,
        horizon: m.horizon,
        total_steps: steps,
        delta: config.delta,
    };
    Ok(match &config.learner {
        LearnerSpec::FixedOptimal => Box::new(FixedPolicy::new(solution.greedy_policy())),
        LearnerSpec::UcbBandit => {
            require_bandit(m, "ucb_bandit")?;
            Box::new(UcbBandit::new(m.num_actions, steps, config.delta)?)
        }
        LearnerSpec::UcbBanditKnownC { c_bar } => {
            require_bandit(m, "ucb_bandit_known_c")?;
            let c = c_bar.unwrap_or(config.adversary.budget as f64);
            Box::new(UcbBandit::with_known_corruption(m.num_actions, steps, config.delta, c)?)
        }
        LearnerSpec::SupervisedBandC { ell_max } => {
            require_bandit(m, "supervised_band_c")?;
            match ell_max {
                Some(l) => Box::new(SupervisedBandC::with_ell_max(m.num_actions, steps, config.delta, *l)?),
                None => Box::new(SupervisedBandC::new(m.num_actions, steps, config.delta)?),
            }
        }
        LearnerSpec::Ucbvi { bonus_scale } => Box::new(Ucbvi::with_bonus_scale(params, *bonus_scale)?),
        LearnerSpec::SupervisedC { mode, lambda, bonus_scale, ell_max } => match mode {
            FeatureMode::Tabular => match ell_max {
                Some(l) => Box::new(SupervisedC::tabular_with_ell_max(params, *bonus_scale, *l)?),
                None => Box::new(SupervisedC::tabular(params, *bonus_scale)?),
            },
            FeatureMode::Linear => {
                let lin = env.linear.as_ref().ok_or_else(|| {
                    Error::Config("linear mode needs a random_linear or canonical_embedding environment".into())
                })?;
                if ell_max.is_some() {
                    return Err(Error::Config("ell_max override is only supported in tabular mode".into()));
                }
                Box::new(SupervisedC::linear(&lin.features, m.horizon, steps, config.delta, *lambda, *bonus_scale)?)
            }
        },
        LearnerSpec::SupervisedUnif { epsilon, bonus_scale } => {
            Box::new(SupervisedUnif::with_bonus_scale(params, *epsilon, *bonus_scale)?)
        }
        LearnerSpec::UniformElimination { bonus_scale } => {
            Box::new(SupervisedUnif::with_bonus_scale(params, 0.0, *bonus_scale)?)
        }
    })
}
