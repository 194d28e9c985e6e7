//! Episodic learners.
//!
//! Every learner follows the same protocol: `announce` commits to a
//! randomized Markovian policy for the coming episode (in a form the oracle
//! evaluates exactly), `act` draws actions consistent with that law, and
//! `observe` ingests the realized trajectory.

mod bandit;
mod elimination;
mod supervised;
mod ucbvi;

pub use bandit::{SupervisedBandC, UcbBandit};
pub use elimination::SupervisedUnif;
pub use supervised::{LinearEstimates, SupervisedC, TabularEstimates, TwoEstimateSource};
pub use ucbvi::Ucbvi;

use serde::{Deserialize, Serialize};

use crate::env::Transition;
use crate::oracle::{AnnouncedPolicy, DeterministicPolicy};
use crate::{argmax_by, Error, Result, SimRng};

/// Largest action count representable by [`ActionSet`].
pub const MAX_ACTIONS: usize = 64;

/// A subset of `{0, …, A-1}` with `A ≤ 64`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ActionSet(u64);

impl ActionSet {
    pub fn empty() -> Self {
        ActionSet(0)
    }

    pub fn full(num_actions: usize) -> Self {
        if num_actions >= 64 {
            ActionSet(u64::MAX)
        } else {
            ActionSet((1u64 << num_actions) - 1)
        }
    }

    pub fn from_actions(actions: &[usize]) -> Self {
        ActionSet(actions.iter().fold(0, |m, &a| m | (1u64 << a)))
    }

    pub fn insert(&mut self, a: usize) {
        self.0 |= 1u64 << a;
    }

    pub fn contains(&self, a: usize) -> bool {
        a < 64 && self.0 & (1u64 << a) != 0
    }

    pub fn len(&self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    pub fn is_subset(&self, other: &ActionSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// Members in ascending order.
    pub fn iter(&self) -> impl Iterator<Item = usize> + use<> {
        let bits = self.0;
        (0..64).filter(move |a| bits & (1u64 << a) != 0)
    }
}

pub(crate) fn check_action_count(num_actions: usize) -> Result<()> {
    if num_actions == 0 || num_actions > MAX_ACTIONS {
        return Err(Error::InvalidArgument(format!(
            "learners support 1..={MAX_ACTIONS} actions, got {num_actions}"
        )));
    }
    Ok(())
}

/// Upper/lower Q estimates, the active sets they act on, and the UCB policy.
///
/// Tables are indexed `[h][x][a]` with 0-based stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QSupervisor {
    /// Base-learner index (1-based); 1 for single-learner algorithms.
    pub ell: usize,
    pub q_up: Vec<Vec<Vec<f64>>>,
    pub q_low: Vec<Vec<Vec<f64>>>,
    pub active: Vec<Vec<ActionSet>>,
    pub ucb_policy: Vec<Vec<usize>>,
}

impl QSupervisor {
    pub fn horizon(&self) -> usize {
        self.q_up.len()
    }

    /// `{a ∈ active: Q̄(a) ≥ max_{a' ∈ active} Q_low(a')}`.
    pub fn plausible_set(&self, h: usize, x: usize) -> ActionSet {
        plausible(&self.q_up[h][x], &self.q_low[h][x], self.active[h][x])
    }

    /// `V̄_h(x) = Q̄_h(x, π^ucb_h(x))`, with a trailing zero row.
    pub fn upper_values(&self) -> Vec<Vec<f64>> {
        let mut v: Vec<Vec<f64>> = self
            .q_up
            .iter()
            .zip(&self.ucb_policy)
            .map(|(q, pol)| q.iter().zip(pol).map(|(qx, &a)| qx[a]).collect())
            .collect();
        v.push(vec![0.0; self.q_up.first().map_or(0, Vec::len)]);
        v
    }

    /// `V_low,h(x) = max_{a ∈ active} Q_low_h(x, a)`, with a trailing zero row.
    pub fn lower_values(&self) -> Vec<Vec<f64>> {
        let mut v: Vec<Vec<f64>> = self
            .q_low
            .iter()
            .zip(&self.active)
            .map(|(q, act)| q.iter().zip(act).map(|(qx, set)| max_over(qx, *set)).collect())
            .collect();
        v.push(vec![0.0; self.q_low.first().map_or(0, Vec::len)]);
        v
    }
}

pub(crate) fn max_over(values: &[f64], set: ActionSet) -> f64 {
    set.iter().map(|a| values[a]).fold(f64::NEG_INFINITY, f64::max)
}

pub(crate) fn plausible(q_up: &[f64], q_low: &[f64], active: ActionSet) -> ActionSet {
    let threshold = max_over(q_low, active);
    let mut out = ActionSet::empty();
    for a in active.iter() {
        if q_up[a] >= threshold {
            out.insert(a);
        }
    }
    out
}

pub(crate) fn argmax_in(values: &[f64], set: ActionSet) -> usize {
    argmax_by(set.iter(), |a| values[a]).unwrap_or(0)
}

/// The contract shared by every learner.
pub trait Learner: Send {
    fn name(&self) -> &str;

    /// Commits to the policy of the next episode.
    fn announce(&mut self) -> Result<AnnouncedPolicy>;

    /// Draws the action at `stage` in `state`, consistent with the announced law.
    fn act(&mut self, stage: usize, state: usize, rng: &mut SimRng) -> usize;

    /// Ingests the episode's trajectory and closes the episode.
    fn observe(&mut self, trajectory: &[Transition]) -> Result<()>;

    /// Base learner charged with the last observed episode, if any.
    fn charged_learner(&self) -> Option<usize> {
        None
    }

    /// Supervisors computed at the last `announce`, most robust learner last.
    fn supervisors(&self) -> &[QSupervisor] {
        &[]
    }
}

/// Plays a fixed deterministic policy; never learns.
#[derive(Debug, Clone)]
pub struct FixedPolicy {
    policy: DeterministicPolicy,
}

impl FixedPolicy {
    pub fn new(policy: DeterministicPolicy) -> Self {
        FixedPolicy { policy }
    }
}

impl Learner for FixedPolicy {
    fn name(&self) -> &str {
        "fixed_policy"
    }

    fn announce(&mut self) -> Result<AnnouncedPolicy> {
        Ok(AnnouncedPolicy::Deterministic { policy: self.policy.clone() })
    }

    fn act(&mut self, stage: usize, state: usize, _rng: &mut SimRng) -> usize {
        self.policy[stage][state]
    }

    fn observe(&mut self, _trajectory: &[Transition]) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn action_set_basics() {
        let full = ActionSet::full(3);
        assert_eq!(full.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(ActionSet::full(64).len(), 64);
        let s = ActionSet::from_actions(&[2, 0]);
        assert!(s.is_subset(&full) && !full.is_subset(&s));
        assert!(s.contains(2) && !s.contains(1));
        assert!(check_action_count(65).is_err());
    }

    #[test]
    fn plausible_set_example() {
        let up = [3.0, 1.0, 2.5];
        let low = [2.0, 0.5, 2.4];
        assert_eq!(plausible(&up, &low, ActionSet::full(3)), ActionSet::from_actions(&[0, 2]));
        // only the active members count for the threshold
        assert_eq!(plausible(&up, &low, ActionSet::from_actions(&[0, 1])), ActionSet::from_actions(&[0]));
        assert_eq!(argmax_in(&[1.0, 5.0, 5.0], ActionSet::full(3)), 1);
    }

    proptest! {
        #[test]
        fn consistent_bounds_keep_the_upper_argmax(
            pairs in prop::collection::vec((0.0f64..5.0, 0.0f64..5.0), 1..8)
        ) {
            let up: Vec<f64> = pairs.iter().map(|(a, b)| a.max(*b)).collect();
            let low: Vec<f64> = pairs.iter().map(|(a, b)| a.min(*b)).collect();
            let set = ActionSet::full(up.len());
            let p = plausible(&up, &low, set);
            prop_assert!(p.contains(argmax_in(&up, set)));
            prop_assert!(p.is_subset(&set));
        }
    }
}
