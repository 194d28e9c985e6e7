//! Episodic MDP environments.
//!
//! A [`TabularMdp`] is stationary: transitions and mean rewards depend on
//! `(state, action)` only. Corrupted episodes may use stage-dependent models,
//! represented by [`StagedMdp`]. Both implement [`EpisodicModel`], which is
//! what the oracle and the rollout code consume.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

use crate::{rng_from_seed, Error, Result, SimRng};

/// Tolerance for simplex checks on transition rows and initial laws.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// How realized rewards are drawn from the mean reward table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RewardKind {
    /// `R ~ Bernoulli(r(x,a))`.
    #[default]
    Bernoulli,
    /// `R = r(x,a)` exactly.
    Deterministic,
}

/// Read access to a (possibly stage-dependent) finite episodic model.
///
/// Stages are 0-based: `stage ∈ 0..horizon()`.
pub trait EpisodicModel {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    fn horizon(&self) -> usize;
    fn initial_dist(&self) -> &[f64];
    fn reward_kind(&self) -> RewardKind;
    fn transition_row(&self, stage: usize, state: usize, action: usize) -> &[f64];
    fn mean_reward(&self, stage: usize, state: usize, action: usize) -> f64;
}

/// One observed step of an episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: usize,
    pub action: usize,
    pub reward: f64,
    pub next_state: usize,
    /// 0-based stage within the episode.
    pub stage: usize,
    /// 0-based episode index.
    pub episode: usize,
}

/// Finite-state, finite-action episodic MDP with stationary dynamics.
///
/// Tables are row-major: `transition[x][a][x']`, `mean_reward[x][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TabularMdpRaw")]
pub struct TabularMdp {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub transition: Vec<Vec<Vec<f64>>>,
    pub mean_reward: Vec<Vec<f64>>,
    pub initial_dist: Vec<f64>,
    #[serde(default)]
    pub reward_kind: RewardKind,
}

#[derive(Deserialize)]
struct TabularMdpRaw {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    transition: Vec<Vec<Vec<f64>>>,
    mean_reward: Vec<Vec<f64>>,
    initial_dist: Vec<f64>,
    #[serde(default)]
    reward_kind: RewardKind,
}

impl TryFrom<TabularMdpRaw> for TabularMdp {
    type Error = Error;

    fn try_from(raw: TabularMdpRaw) -> Result<Self> {
        let mdp = TabularMdp {
            num_states: raw.num_states,
            num_actions: raw.num_actions,
            horizon: raw.horizon,
            transition: raw.transition,
            mean_reward: raw.mean_reward,
            initial_dist: raw.initial_dist,
            reward_kind: raw.reward_kind,
        };
        mdp.validate()?;
        Ok(mdp)
    }
}

fn check_simplex(row: &[f64], what: &str) -> Result<()> {
    if let Some(p) = row.iter().find(|p| !p.is_finite() || **p < 0.0) {
        return Err(Error::InvalidMdp(format!("{what}: entry {p} is negative or not finite")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidMdp(format!("{what}: sums to {total}")));
    }
    Ok(())
}

impl TabularMdp {
    /// Builds and validates an MDP.
    pub fn new(
        transition: Vec<Vec<Vec<f64>>>,
        mean_reward: Vec<Vec<f64>>,
        initial_dist: Vec<f64>,
        horizon: usize,
        reward_kind: RewardKind,
    ) -> Result<Self> {
        let num_states = transition.len();
        let num_actions = transition.first().map_or(0, Vec::len);
        let mdp = TabularMdp {
            num_states,
            num_actions,
            horizon,
            transition,
            mean_reward,
            initial_dist,
            reward_kind,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    /// Checks every type invariant: shapes, simplex rows, rewards in `[0,1]`.
    pub fn validate(&self) -> Result<()> {
        let (s, a) = (self.num_states, self.num_actions);
        if s == 0 || a == 0 || self.horizon == 0 {
            return Err(Error::InvalidMdp(format!(
                "S, A and H must be positive (got S={s}, A={a}, H={})",
                self.horizon
            )));
        }
        if self.transition.len() != s || self.mean_reward.len() != s {
            return Err(Error::InvalidMdp("table row count differs from num_states".into()));
        }
        for x in 0..s {
            if self.transition[x].len() != a || self.mean_reward[x].len() != a {
                return Err(Error::InvalidMdp(format!("state {x}: wrong number of actions")));
            }
            for act in 0..a {
                let row = &self.transition[x][act];
                if row.len() != s {
                    return Err(Error::InvalidMdp(format!("p(.|{x},{act}) has length {}", row.len())));
                }
                check_simplex(row, &format!("p(.|{x},{act})"))?;
                let r = self.mean_reward[x][act];
                if !(0.0..=1.0).contains(&r) {
                    return Err(Error::InvalidMdp(format!("r({x},{act}) = {r} outside [0,1]")));
                }
            }
        }
        if self.initial_dist.len() != s {
            return Err(Error::InvalidMdp("initial_dist has wrong length".into()));
        }
        check_simplex(&self.initial_dist, "initial_dist")
    }

    /// Samples `(reward, next_state)` for `(x, a)`.
    pub fn step(&self, x: usize, a: usize, rng: &mut SimRng) -> Result<(f64, usize)> {
        if x >= self.num_states {
            return Err(Error::OutOfRange { what: "state", id: x, limit: self.num_states });
        }
        if a >= self.num_actions {
            return Err(Error::OutOfRange { what: "action", id: a, limit: self.num_actions });
        }
        Ok(sample_step(self, 0, x, a, rng))
    }

    /// Same MDP with every mean reward set to zero.
    pub fn with_zero_rewards(&self) -> TabularMdp {
        let mut out = self.clone();
        for row in &mut out.mean_reward {
            row.iter_mut().for_each(|r| *r = 0.0);
        }
        out
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

impl EpisodicModel for TabularMdp {
    fn num_states(&self) -> usize {
        self.num_states
    }
    fn num_actions(&self) -> usize {
        self.num_actions
    }
    fn horizon(&self) -> usize {
        self.horizon
    }
    fn initial_dist(&self) -> &[f64] {
        &self.initial_dist
    }
    fn reward_kind(&self) -> RewardKind {
        self.reward_kind
    }
    fn transition_row(&self, _stage: usize, state: usize, action: usize) -> &[f64] {
        &self.transition[state][action]
    }
    fn mean_reward(&self, _stage: usize, state: usize, action: usize) -> f64 {
        self.mean_reward[state][action]
    }
}

/// Episode model whose dynamics may change with the stage.
///
/// All stages share the nominal shape (S, A, H, initial law).
#[derive(Debug, Clone)]
pub struct StagedMdp {
    stages: Vec<Arc<TabularMdp>>,
}

impl StagedMdp {
    /// The nominal MDP repeated at every stage.
    pub fn stationary(mdp: Arc<TabularMdp>) -> Self {
        let stages = vec![mdp.clone(); mdp.horizon];
        StagedMdp { stages }
    }

    pub fn from_stages(stages: Vec<Arc<TabularMdp>>) -> Result<Self> {
        let first = stages
            .first()
            .ok_or_else(|| Error::InvalidArgument("staged MDP needs at least one stage".into()))?;
        if stages.len() != first.horizon {
            return Err(Error::InvalidArgument(format!(
                "{} stage models for horizon {}",
                stages.len(),
                first.horizon
            )));
        }
        for m in &stages {
            if m.num_states != first.num_states
                || m.num_actions != first.num_actions
                || m.initial_dist != first.initial_dist
            {
                return Err(Error::InvalidArgument("stage models differ in shape".into()));
            }
        }
        Ok(StagedMdp { stages })
    }

    pub fn stage(&self, h: usize) -> &Arc<TabularMdp> {
        &self.stages[h]
    }

    /// True when every stage is the given MDP (pointer identity).
    pub fn is_identically(&self, mdp: &Arc<TabularMdp>) -> bool {
        self.stages.iter().all(|m| Arc::ptr_eq(m, mdp))
    }
}

impl EpisodicModel for StagedMdp {
    fn num_states(&self) -> usize {
        self.stages[0].num_states
    }
    fn num_actions(&self) -> usize {
        self.stages[0].num_actions
    }
    fn horizon(&self) -> usize {
        self.stages.len()
    }
    fn initial_dist(&self) -> &[f64] {
        &self.stages[0].initial_dist
    }
    fn reward_kind(&self) -> RewardKind {
        self.stages[0].reward_kind
    }
    fn transition_row(&self, stage: usize, state: usize, action: usize) -> &[f64] {
        &self.stages[stage].transition[state][action]
    }
    fn mean_reward(&self, stage: usize, state: usize, action: usize) -> f64 {
        self.stages[stage].mean_reward[state][action]
    }
}

/// Inverse-CDF draw from a probability vector.
pub fn sample_categorical(probs: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            acc += p;
            last_positive = i;
            if u < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Samples `(reward, next_state)` at `stage` without bounds checks.
pub fn sample_step<M: EpisodicModel + ?Sized>(
    model: &M,
    stage: usize,
    x: usize,
    a: usize,
    rng: &mut SimRng,
) -> (f64, usize) {
    let mean = model.mean_reward(stage, x, a);
    let reward = match model.reward_kind() {
        RewardKind::Deterministic => mean,
        RewardKind::Bernoulli => {
            if rng.random::<f64>() < mean {
                1.0
            } else {
                0.0
            }
        }
    };
    let next = sample_categorical(model.transition_row(stage, x, a), rng);
    (reward, next)
}

fn dirichlet_ones(n: usize, rng: &mut SimRng) -> Vec<f64> {
    let draws: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = draws.iter().sum();
    draws.into_iter().map(|v| v / total).collect()
}

/// Combination-lock instance with `H+1` states.
///
/// State 0 is the absorbing sink, state `h` (1..=H) is the lock position
/// reached after `h-1` correct moves. Action 0 is the correct move; reward 1
/// is paid only for action 0 at state `H`. Episodes start at state 1.
pub fn make_combination_lock(num_actions: usize, horizon: usize) -> Result<TabularMdp> {
    if num_actions < 2 {
        return Err(Error::InvalidArgument(format!("combination lock needs A >= 2, got {num_actions}")));
    }
    if horizon < 1 {
        return Err(Error::InvalidArgument("combination lock needs H >= 1".into()));
    }
    let s = horizon + 1;
    let sink_row = |_: usize| {
        let mut row = vec![0.0; s];
        row[0] = 1.0;
        row
    };
    let mut transition = vec![vec![vec![0.0; s]; num_actions]; s];
    let mut mean_reward = vec![vec![0.0; num_actions]; s];
    for (x, rows) in transition.iter_mut().enumerate() {
        for (a, row) in rows.iter_mut().enumerate() {
            *row = if x >= 1 && x < horizon && a == 0 {
                let mut r = vec![0.0; s];
                r[x + 1] = 1.0;
                r
            } else {
                sink_row(a)
            };
        }
    }
    mean_reward[horizon][0] = 1.0;
    let mut initial_dist = vec![0.0; s];
    initial_dist[1] = 1.0;
    TabularMdp::new(transition, mean_reward, initial_dist, horizon, RewardKind::Deterministic)
}

/// Random tabular MDP: Dirichlet(1) transition rows, uniform mean rewards,
/// episodes start in state 0. Deterministic in `seed`.
pub fn make_random_tabular(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
) -> Result<TabularMdp> {
    if num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("S, A and H must all be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut transition = Vec::with_capacity(num_states);
    let mut mean_reward = Vec::with_capacity(num_states);
    for _ in 0..num_states {
        let mut rows = Vec::with_capacity(num_actions);
        let mut rewards = Vec::with_capacity(num_actions);
        for _ in 0..num_actions {
            rows.push(dirichlet_ones(num_states, &mut rng));
            rewards.push(rng.random::<f64>());
        }
        transition.push(rows);
        mean_reward.push(rewards);
    }
    let mut initial_dist = vec![0.0; num_states];
    initial_dist[0] = 1.0;
    TabularMdp::new(transition, mean_reward, initial_dist, horizon, RewardKind::Bernoulli)
}

/// Multi-armed bandit as a one-state, one-stage MDP.
pub fn make_bandit(means: &[f64], reward_kind: RewardKind) -> Result<TabularMdp> {
    if means.is_empty() {
        return Err(Error::InvalidArgument("bandit needs at least one arm".into()));
    }
    TabularMdp::new(
        vec![vec![vec![1.0]; means.len()]],
        vec![means.to_vec()],
        vec![1.0],
        1,
        reward_kind,
    )
}

/// Linear MDP: `p(x'|x,a) = μ*[x']·φ(x,a)` and `r(x,a) = θ*·φ(x,a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LinearMdpRaw", into = "LinearMdpRaw")]
pub struct LinearMdp {
    pub dimension: usize,
    /// `features[x][a]` is φ(x,a).
    pub features: Vec<Vec<Vec<f64>>>,
    /// `mu_star[x']` is the row of μ* for next state `x'`.
    pub mu_star: Vec<Vec<f64>>,
    pub theta_star: Vec<f64>,
    /// The induced tabular MDP, used by the oracle.
    pub tabular: TabularMdp,
}

#[derive(Clone, Serialize, Deserialize)]
struct LinearMdpRaw {
    dimension: usize,
    horizon: usize,
    features: Vec<Vec<Vec<f64>>>,
    mu_star: Vec<Vec<f64>>,
    theta_star: Vec<f64>,
    initial_dist: Vec<f64>,
    #[serde(default)]
    reward_kind: RewardKind,
}

impl TryFrom<LinearMdpRaw> for LinearMdp {
    type Error = Error;

    fn try_from(raw: LinearMdpRaw) -> Result<Self> {
        LinearMdp::new(
            raw.features,
            raw.mu_star,
            raw.theta_star,
            raw.initial_dist,
            raw.horizon,
            raw.reward_kind,
        )
    }
}

impl From<LinearMdp> for LinearMdpRaw {
    fn from(m: LinearMdp) -> Self {
        LinearMdpRaw {
            dimension: m.dimension,
            horizon: m.tabular.horizon,
            features: m.features,
            mu_star: m.mu_star,
            theta_star: m.theta_star,
            initial_dist: m.tabular.initial_dist,
            reward_kind: m.tabular.reward_kind,
        }
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

impl LinearMdp {
    /// Builds the induced tabular MDP and checks every linear-MDP invariant.
    pub fn new(
        features: Vec<Vec<Vec<f64>>>,
        mu_star: Vec<Vec<f64>>,
        theta_star: Vec<f64>,
        initial_dist: Vec<f64>,
        horizon: usize,
        reward_kind: RewardKind,
    ) -> Result<Self> {
        let d = theta_star.len();
        let s = features.len();
        if d == 0 || s == 0 {
            return Err(Error::InvalidMdp("empty feature space or state space".into()));
        }
        if mu_star.len() != s {
            return Err(Error::InvalidMdp(format!("mu_star has {} rows for {s} states", mu_star.len())));
        }
        for row in &mu_star {
            if row.len() != d {
                return Err(Error::DimensionMismatch { expected: d, actual: row.len() });
            }
        }
        let num_actions = features[0].len();
        let mut transition = Vec::with_capacity(s);
        let mut mean_reward = Vec::with_capacity(s);
        for (x, per_action) in features.iter().enumerate() {
            if per_action.len() != num_actions {
                return Err(Error::InvalidMdp(format!("state {x}: wrong number of actions")));
            }
            let mut rows = Vec::with_capacity(num_actions);
            let mut rewards = Vec::with_capacity(num_actions);
            for (a, phi) in per_action.iter().enumerate() {
                if phi.len() != d {
                    return Err(Error::DimensionMismatch { expected: d, actual: phi.len() });
                }
                if norm2(phi) > 1.0 + 1e-12 {
                    return Err(Error::InvalidMdp(format!("||phi({x},{a})|| = {} > 1", norm2(phi))));
                }
                rows.push(mu_star.iter().map(|m| dot(m, phi)).collect::<Vec<_>>());
                rewards.push(dot(&theta_star, phi));
            }
            transition.push(rows);
            mean_reward.push(rewards);
        }
        if norm2(&theta_star) > (d as f64).sqrt() + 1e-12 {
            return Err(Error::InvalidMdp("||theta*|| exceeds sqrt(d)".into()));
        }
        check_mu_norm(&mu_star, d)?;
        let tabular = TabularMdp::new(transition, mean_reward, initial_dist, horizon, reward_kind)
            .map_err(|e| Error::ConstructionFailure(format!("induced MDP invalid: {e}")))?;
        Ok(LinearMdp { dimension: d, features, mu_star, theta_star, tabular })
    }

    /// The tabular MDP embedded with canonical basis features, `d = S·A`.
    pub fn canonical_embedding(mdp: &TabularMdp) -> Result<Self> {
        let (s, a) = (mdp.num_states, mdp.num_actions);
        let d = s * a;
        let mut features = vec![vec![vec![0.0; d]; a]; s];
        let mut mu_star = vec![vec![0.0; d]; s];
        let mut theta_star = vec![0.0; d];
        for x in 0..s {
            for act in 0..a {
                let j = x * a + act;
                features[x][act][j] = 1.0;
                theta_star[j] = mdp.mean_reward[x][act];
                for (next, row) in mu_star.iter_mut().enumerate() {
                    row[j] = mdp.transition[x][act][next];
                }
            }
        }
        LinearMdp::new(features, mu_star, theta_star, mdp.initial_dist.clone(), mdp.horizon, mdp.reward_kind)
    }

    pub fn feature(&self, x: usize, a: usize) -> &[f64] {
        &self.features[x][a]
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `max_{||v||∞ ≤ 1} ||vᵀμ*||₂ ≤ √d`. The maximum of a convex function over
/// the cube is attained at a sign vector; those are enumerated up to 16
/// states, beyond that the triangle-inequality bound is used.
fn check_mu_norm(mu_star: &[Vec<f64>], d: usize) -> Result<()> {
    let limit = (d as f64).sqrt() + 1e-9;
    let s = mu_star.len();
    let worst = if s <= 16 {
        let mut worst: f64 = 0.0;
        let mut acc = vec![0.0; d];
        for mask in 0u32..(1u32 << s) {
            acc.iter_mut().for_each(|v| *v = 0.0);
            for (x, row) in mu_star.iter().enumerate() {
                let sign = if mask & (1 << x) != 0 { -1.0 } else { 1.0 };
                for (j, m) in row.iter().enumerate() {
                    acc[j] += sign * m;
                }
            }
            worst = worst.max(norm2(&acc));
        }
        worst
    } else {
        (0..d)
            .map(|j| mu_star.iter().map(|row| row[j].abs()).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt()
    };
    if worst > limit {
        return Err(Error::InvalidMdp(format!("max ||v^T mu*|| = {worst} exceeds sqrt(d)")));
    }
    Ok(())
}

/// Random linear MDP.
///
/// `d` anchor distributions over states are drawn from Dirichlet(1); every
/// column of μ* is a Dirichlet(1) mixture of the anchors, so each column is a
/// distribution over next states. Features are Dirichlet(1) weight vectors
/// (nonnegative, summing to one, hence `||φ||₂ ≤ 1`), which makes every
/// `μ*φ(x,a)` a convex combination of distributions. θ* is uniform on
/// `[0,1]^d`, so `r(x,a) ∈ [0,1]`.
pub fn make_random_linear(
    dimension: usize,
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    seed: u64,
) -> Result<LinearMdp> {
    if dimension == 0 || num_states == 0 || num_actions == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("d, S, A and H must all be at least 1".into()));
    }
    let mut rng = rng_from_seed(seed);
    let anchors: Vec<Vec<f64>> = (0..dimension).map(|_| dirichlet_ones(num_states, &mut rng)).collect();
    let mut mu_star = vec![vec![0.0; dimension]; num_states];
    for j in 0..dimension {
        let mix = dirichlet_ones(dimension, &mut rng);
        for (x, row) in mu_star.iter_mut().enumerate() {
            row[j] = anchors.iter().zip(&mix).map(|(anchor, w)| w * anchor[x]).sum();
        }
    }
    let features: Vec<Vec<Vec<f64>>> = (0..num_states)
        .map(|_| (0..num_actions).map(|_| dirichlet_ones(dimension, &mut rng)).collect())
        .collect();
    let theta_star: Vec<f64> = (0..dimension).map(|_| rng.random::<f64>()).collect();
    let mut initial_dist = vec![0.0; num_states];
    initial_dist[0] = 1.0;
    LinearMdp::new(features, mu_star, theta_star, initial_dist, horizon, RewardKind::Bernoulli)
        .map_err(|e| match e {
            Error::ConstructionFailure(m) => Error::ConstructionFailure(m),
            other => Error::ConstructionFailure(other.to_string()),
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn combination_lock_shape() {
        let m = make_combination_lock(3, 4).unwrap();
        assert_eq!(m.num_states, 5);
        for a in 0..3 {
            assert_eq!(m.transition[0][a][0], 1.0, "sink is absorbing");
        }
        for h in 1..4 {
            assert_eq!(m.transition[h][0][h + 1], 1.0);
            for a in 1..3 {
                assert_eq!(m.transition[h][a][0], 1.0);
            }
        }
        assert_eq!(m.mean_reward[4][0], 1.0);
        let total: f64 = m.mean_reward.iter().flatten().sum();
        assert_eq!(total, 1.0);
    }

    #[test]
    fn combination_lock_rejects_bad_args() {
        assert!(matches!(make_combination_lock(1, 3), Err(Error::InvalidArgument(_))));
        assert!(matches!(make_combination_lock(2, 0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn random_tabular_is_deterministic_and_valid() {
        let a = make_random_tabular(4, 3, 5, 17).unwrap();
        let b = make_random_tabular(4, 3, 5, 17).unwrap();
        assert_eq!(a, b);
        let c = make_random_tabular(4, 3, 5, 18).unwrap();
        assert_ne!(a, c);
        for rows in &a.transition {
            for row in rows {
                assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn step_checks_ids_and_follows_deterministic_rows() {
        let m = make_combination_lock(2, 3).unwrap();
        let mut rng = rng_from_seed(1);
        assert!(m.step(9, 0, &mut rng).is_err());
        assert!(m.step(0, 2, &mut rng).is_err());
        for _ in 0..50 {
            assert_eq!(m.step(1, 0, &mut rng).unwrap().1, 2);
        }
    }

    #[test]
    fn deterministic_reward_is_exact() {
        let m = make_bandit(&[0.3], RewardKind::Deterministic).unwrap();
        let mut rng = rng_from_seed(3);
        for _ in 0..10 {
            assert_eq!(m.step(0, 0, &mut rng).unwrap().0, 0.3);
        }
    }

    #[test]
    fn bernoulli_reward_mean() {
        // 1e5 draws: binomial standard error is 0.0016, so 0.01 is > 6 SE.
        let m = make_bandit(&[0.5], RewardKind::Bernoulli).unwrap();
        let mut rng = rng_from_seed(11);
        let n = 100_000;
        let total: f64 = (0..n).map(|_| m.step(0, 0, &mut rng).unwrap().0).sum();
        assert!((total / n as f64 - 0.5).abs() < 0.01);
    }

    #[test]
    fn invalid_rows_are_rejected() {
        let bad = TabularMdp::new(vec![vec![vec![0.6, 0.6]], vec![vec![1.0, 0.0]]], vec![vec![0.5], vec![0.5]], vec![1.0, 0.0], 2, RewardKind::Bernoulli);
        assert!(matches!(bad, Err(Error::InvalidMdp(_))));
        let neg = TabularMdp::new(vec![vec![vec![1.5, -0.5]], vec![vec![1.0, 0.0]]], vec![vec![0.5], vec![0.5]], vec![1.0, 0.0], 2, RewardKind::Bernoulli);
        assert!(neg.is_err());
        let reward = TabularMdp::new(vec![vec![vec![1.0]]], vec![vec![1.5]], vec![1.0], 1, RewardKind::Bernoulli);
        assert!(reward.is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let m = make_random_tabular(3, 2, 2, 5).unwrap();
        let back = TabularMdp::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
        let broken = m.to_json().unwrap().replacen("\"horizon\": 2", "\"horizon\": 0", 1);
        assert!(TabularMdp::from_json(&broken).is_err());
    }

    #[test]
    fn random_linear_is_valid_and_deterministic() {
        let a = make_random_linear(4, 8, 3, 3, 2).unwrap();
        let b = make_random_linear(4, 8, 3, 3, 2).unwrap();
        assert_eq!(a, b);
        let worst = a
            .tabular
            .transition
            .iter()
            .flatten()
            .map(|row| (row.iter().sum::<f64>() - 1.0).abs())
            .fold(0.0, f64::max);
        assert!(worst <= 1e-9);
        let back = LinearMdp::from_json(&a.to_json().unwrap()).unwrap();
        assert_eq!(a, back);
    }

    #[test]
    fn canonical_embedding_reproduces_tabular() {
        let m = make_random_tabular(3, 2, 4, 9).unwrap();
        let lin = LinearMdp::canonical_embedding(&m).unwrap();
        assert_eq!(lin.dimension, 6);
        assert_eq!(lin.tabular, m);
    }

    #[test]
    fn staged_model_checks_shape() {
        let m = Arc::new(make_combination_lock(2, 2).unwrap());
        let staged = StagedMdp::stationary(m.clone());
        assert!(staged.is_identically(&m));
        assert!(StagedMdp::from_stages(vec![m.clone()]).is_err());
        let other = Arc::new(make_combination_lock(3, 2).unwrap());
        assert!(StagedMdp::from_stages(vec![m, other]).is_err());
    }
}
