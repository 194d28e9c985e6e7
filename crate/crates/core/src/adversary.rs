//! Budgeted episode-level adversaries.
//!
//! `lock_decoy` and `front_random` are front-loaded: they corrupt the earliest
//! episodes until the budget is spent. `zero_best_arm` spends budget only on
//! episodes whose announced policy can reach a zeroed action, so against a
//! learner that always may play the best arm it is front-loaded as well.
//! The decision for episode `k` is made after the learner announces its policy
//! and before any of the episode's randomness is drawn.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{make_random_tabular, EpisodicModel, StagedMdp, TabularMdp, Transition};
use crate::oracle::{evaluate_announced, AnnouncedPolicy};
use crate::{argmax_by, Error, Result};

/// Corruption budget `C` and the running count `Σ c_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub limit: usize,
    pub spent: usize,
}

impl Budget {
    pub fn new(limit: usize) -> Self {
        Budget { limit, spent: 0 }
    }

    pub fn remaining(&self) -> usize {
        self.limit - self.spent
    }

    /// Spends one unit if available.
    fn try_spend(&mut self) -> bool {
        if self.spent < self.limit {
            self.spent += 1;
            true
        } else {
            false
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    None,
    ZeroBestArm,
    LockDecoy,
    FrontRandom,
}

/// What the learner faces in one episode.
#[derive(Debug, Clone)]
pub struct AdversaryDecision {
    pub corrupt: bool,
    pub episode_mdp: StagedMdp,
}

impl AdversaryDecision {
    /// Whether the episode model differs from `nominal` at `(h, x, a)`.
    pub fn stage_corrupted(&self, nominal: &TabularMdp, h: usize, x: usize, a: usize) -> bool {
        if !self.corrupt {
            return false;
        }
        let m = self.episode_mdp.stage(h);
        m.mean_reward[x][a] != nominal.mean_reward[x][a] || m.transition[x][a] != nominal.transition[x][a]
    }

    /// Hash of the full decision, used to check it is not altered by the rollout.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = DefaultHasher::new();
        self.corrupt.hash(&mut hasher);
        let m = &self.episode_mdp;
        for h in 0..m.horizon() {
            for x in 0..m.num_states() {
                for a in 0..m.num_actions() {
                    m.mean_reward(h, x, a).to_bits().hash(&mut hasher);
                    for p in m.transition_row(h, x, a) {
                        p.to_bits().hash(&mut hasher);
                    }
                }
            }
        }
        hasher.finish()
    }
}

#[derive(Debug, Clone)]
pub struct Adversary {
    kind: AttackKind,
    budget: Budget,
    seed: u64,
    nominal: Arc<TabularMdp>,
    nominal_staged: StagedMdp,
    /// Precomputed corrupted model for the static attacks.
    fixed: Option<StagedMdp>,
}

impl Adversary {
    pub fn new(kind: AttackKind, budget: usize, seed: u64, nominal: Arc<TabularMdp>) -> Result<Self> {
        let nominal_staged = StagedMdp::stationary(nominal.clone());
        let fixed = match kind {
            AttackKind::ZeroBestArm => Some(StagedMdp::stationary(Arc::new(zero_best_arm(&nominal)?))),
            AttackKind::LockDecoy => Some(lock_decoy(&nominal)?),
            AttackKind::None | AttackKind::FrontRandom => None,
        };
        let budget = if kind == AttackKind::None { 0 } else { budget };
        Ok(Adversary { kind, budget: Budget::new(budget), seed, nominal, nominal_staged, fixed })
    }

    pub fn none(nominal: Arc<TabularMdp>) -> Self {
        Adversary::new(AttackKind::None, 0, 0, nominal).expect("no attack always constructs")
    }

    pub fn attack_zero_best_arm(budget: usize, nominal: Arc<TabularMdp>) -> Result<Self> {
        Adversary::new(AttackKind::ZeroBestArm, budget, 0, nominal)
    }

    pub fn attack_lock_decoy(budget: usize, nominal: Arc<TabularMdp>) -> Result<Self> {
        Adversary::new(AttackKind::LockDecoy, budget, 0, nominal)
    }

    pub fn attack_front_random(budget: usize, seed: u64, nominal: Arc<TabularMdp>) -> Result<Self> {
        Adversary::new(AttackKind::FrontRandom, budget, seed, nominal)
    }

    pub fn kind(&self) -> AttackKind {
        self.kind
    }

    pub fn budget(&self) -> Budget {
        self.budget
    }

    pub fn nominal(&self) -> &Arc<TabularMdp> {
        &self.nominal
    }

    /// Decides episode `k`. `history` holds the trajectories of episodes `< k`;
    /// the attacks in this library only use the budget, `k` and the announced
    /// policy.
    pub fn decide(
        &mut self,
        k: usize,
        _history: &[Vec<Transition>],
        announced: &AnnouncedPolicy,
    ) -> Result<AdversaryDecision> {
        let pointless = match (&self.fixed, self.kind) {
            (Some(m), AttackKind::ZeroBestArm) if self.budget.remaining() > 0 => {
                evaluate_announced(m, announced) == evaluate_announced(&*self.nominal, announced)
            }
            _ => false,
        };
        if self.kind == AttackKind::None || pointless || !self.budget.try_spend() {
            return Ok(AdversaryDecision { corrupt: false, episode_mdp: self.nominal_staged.clone() });
        }
        let episode_mdp = match &self.fixed {
            Some(m) => m.clone(),
            None => {
                let n = &self.nominal;
                let stream = self.seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
                let mut fresh = make_random_tabular(n.num_states, n.num_actions, n.horizon, stream)?;
                fresh.initial_dist = n.initial_dist.clone();
                fresh.reward_kind = n.reward_kind;
                StagedMdp::stationary(Arc::new(fresh))
            }
        };
        Ok(AdversaryDecision { corrupt: true, episode_mdp })
    }
}

/// Sets the reward of the highest-mean action to zero in every state.
pub fn zero_best_arm(mdp: &TabularMdp) -> Result<TabularMdp> {
    let mut out = mdp.clone();
    for rewards in out.mean_reward.iter_mut() {
        let best = argmax_by(0..rewards.len(), |a| rewards[a]).unwrap_or(0);
        rewards[best] = 0.0;
    }
    out.validate()?;
    Ok(out)
}

/// Stage-0 decoy: action `A-1` pays 1 and action 0 leads to state 0 (the sink
/// of a combination lock). Later stages are nominal.
pub fn lock_decoy(mdp: &TabularMdp) -> Result<StagedMdp> {
    if mdp.num_actions < 2 {
        return Err(Error::InvalidArgument("lock decoy needs at least two actions".into()));
    }
    let decoy = mdp.num_actions - 1;
    let mut first = mdp.clone();
    for x in 0..first.num_states {
        first.mean_reward[x][decoy] = 1.0;
        let mut row = vec![0.0; first.num_states];
        row[0] = 1.0;
        first.transition[x][0] = row;
    }
    first.validate()?;
    let nominal = Arc::new(mdp.clone());
    let mut stages = vec![nominal; mdp.horizon];
    stages[0] = Arc::new(first);
    StagedMdp::from_stages(stages)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_bandit, make_combination_lock, make_random_tabular, RewardKind};
    use crate::oracle::optimal_values;

    fn dummy_policy() -> AnnouncedPolicy {
        AnnouncedPolicy::Deterministic { policy: vec![vec![0]] }
    }

    fn arm(a: usize) -> AnnouncedPolicy {
        AnnouncedPolicy::Deterministic { policy: vec![vec![a]] }
    }

    #[test]
    fn zero_budget_never_corrupts() {
        let m = Arc::new(make_random_tabular(3, 2, 2, 1).unwrap());
        for kind in [AttackKind::ZeroBestArm, AttackKind::LockDecoy, AttackKind::FrontRandom] {
            let mut adv = Adversary::new(kind, 0, 5, m.clone()).unwrap();
            for k in 0..20 {
                let d = adv.decide(k, &[], &dummy_policy()).unwrap();
                assert!(!d.corrupt);
                assert!(d.episode_mdp.is_identically(&m));
            }
        }
    }

    #[test]
    fn zero_best_arm_front_loaded() {
        let m = Arc::new(make_bandit(&[1.0, 0.5], RewardKind::Deterministic).unwrap());
        let mut adv = Adversary::attack_zero_best_arm(5, m.clone()).unwrap();
        let flags: Vec<bool> = (0..12).map(|k| adv.decide(k, &[], &dummy_policy()).unwrap().corrupt).collect();
        assert_eq!(flags.iter().filter(|&&c| c).count(), 5);
        assert!(flags[..5].iter().all(|&c| c) && flags[5..].iter().all(|&c| !c));
        assert_eq!(adv.budget().spent, 5);
    }

    #[test]
    fn zero_best_arm_waits_for_the_best_arm() {
        let m = Arc::new(make_bandit(&[1.0, 0.5], RewardKind::Deterministic).unwrap());
        let mut adv = Adversary::attack_zero_best_arm(2, m).unwrap();
        let plays = [1, 0, 1, 1, 0, 0, 0];
        let flags: Vec<bool> = plays.iter().enumerate().map(|(k, &a)| adv.decide(k, &[], &arm(a)).unwrap().corrupt).collect();
        assert_eq!(flags, vec![false, true, false, false, true, false, false]);
    }

    #[test]
    fn zero_best_arm_benchmark() {
        let m = Arc::new(make_bandit(&[1.0, 0.5], RewardKind::Deterministic).unwrap());
        let mut adv = Adversary::attack_zero_best_arm(1, m).unwrap();
        let d = adv.decide(0, &[], &dummy_policy()).unwrap();
        assert_eq!(d.episode_mdp.stage(0).mean_reward[0], vec![0.0, 0.5]);
        assert_eq!(optimal_values(&d.episode_mdp).value, 0.5);
    }

    #[test]
    fn lock_decoy_is_stage_dependent() {
        let m = Arc::new(make_combination_lock(3, 3).unwrap());
        let mut adv = Adversary::attack_lock_decoy(2, m.clone()).unwrap();
        let d = adv.decide(0, &[], &dummy_policy()).unwrap();
        let sol = optimal_values(&d.episode_mdp);
        // the decoy pays 1 immediately, the lock is unreachable
        assert_eq!(sol.value, 1.0);
        assert_eq!(sol.optimal_actions[0][1], vec![2]);
        assert!(d.stage_corrupted(&m, 0, 1, 0));
        assert!(!d.stage_corrupted(&m, 1, 2, 0));
        assert!(Arc::ptr_eq(d.episode_mdp.stage(1), d.episode_mdp.stage(2)));
    }

    #[test]
    fn front_random_is_seeded_and_budgeted() {
        let m = Arc::new(make_random_tabular(4, 2, 3, 0).unwrap());
        let mut a = Adversary::attack_front_random(3, 11, m.clone()).unwrap();
        let mut b = Adversary::attack_front_random(3, 11, m.clone()).unwrap();
        let mut count = 0;
        for k in 0..10 {
            let (da, db) = (a.decide(k, &[], &dummy_policy()).unwrap(), b.decide(k, &[], &dummy_policy()).unwrap());
            assert_eq!(da.fingerprint(), db.fingerprint());
            count += da.corrupt as usize;
        }
        assert_eq!(count, 3);
    }
}
