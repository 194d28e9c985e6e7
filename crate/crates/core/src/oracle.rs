//! Exact dynamic programming on known models.
//!
//! Everything here is a pure function of an [`EpisodicModel`] and a policy
//! description. Randomized policies announced by learners are evaluated by
//! forward propagation of the joint law of (state, latent index), where the
//! latent index is the followed learner (master policies) or the
//! switched/not-switched flag (ε-switching policies). The latent process is
//! independent of the states, which is what makes the joint forward pass exact.

use serde::{Deserialize, Serialize};

use crate::env::EpisodicModel;
use crate::schedule::ScheduleChain;
use crate::{Error, Result};

/// Actions whose Q-value is within this distance of the maximum are treated as
/// optimal; their gap is reported as exactly zero.
pub const OPTIMAL_TIE_TOL: f64 = 1e-12;

/// `policy[h][x]` is the action taken at stage `h` in state `x`.
pub type DeterministicPolicy = Vec<Vec<usize>>;

/// `policy[h][x][a]` is the probability of action `a`.
pub type StochasticPolicy = Vec<Vec<Vec<f64>>>;

/// Optimal values of a (possibly stage-dependent) model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalSolution {
    /// `q_star[h][x][a]`, `h = 0..H`.
    pub q_star: Vec<Vec<Vec<f64>>>,
    /// `v_star[h][x]`, `h = 0..=H`; the last row is zero.
    pub v_star: Vec<Vec<f64>>,
    /// `gaps[h][x][a] = V*_h(x) − Q*_h(x,a)`.
    pub gaps: Vec<Vec<Vec<f64>>>,
    /// `optimal_actions[h][x]`, ascending.
    pub optimal_actions: Vec<Vec<Vec<usize>>>,
    /// `Σ_x p0(x) V*_0(x)`.
    pub value: f64,
}

impl OptimalSolution {
    pub fn horizon(&self) -> usize {
        self.q_star.len()
    }

    /// Greedy policy on Q*, lowest index among optimal actions.
    pub fn greedy_policy(&self) -> DeterministicPolicy {
        self.optimal_actions
            .iter()
            .map(|per_state| per_state.iter().map(|acts| acts[0]).collect())
            .collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `Σ_{x'} p(x'|x,a) v(x')`.
pub(crate) fn expect(row: &[f64], v: &[f64]) -> f64 {
    row.iter().zip(v).map(|(p, val)| p * val).sum()
}

/// Backward induction from `V*_H ≡ 0`.
pub fn optimal_values<M: EpisodicModel + ?Sized>(model: &M) -> OptimalSolution {
    let (s, a, horizon) = (model.num_states(), model.num_actions(), model.horizon());
    let mut q_star = vec![vec![vec![0.0; a]; s]; horizon];
    let mut v_star = vec![vec![0.0; s]; horizon + 1];
    let mut gaps = vec![vec![vec![0.0; a]; s]; horizon];
    let mut optimal_actions = vec![vec![Vec::new(); s]; horizon];
    for h in (0..horizon).rev() {
        let (head, tail) = v_star.split_at_mut(h + 1);
        let next = &tail[0];
        for x in 0..s {
            let q = &mut q_star[h][x];
            for (act, qa) in q.iter_mut().enumerate() {
                *qa = model.mean_reward(h, x, act) + expect(model.transition_row(h, x, act), next);
            }
            let best = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            head[h][x] = best;
            for act in 0..a {
                let gap = best - q[act];
                if gap <= OPTIMAL_TIE_TOL {
                    optimal_actions[h][x].push(act);
                    gaps[h][x][act] = 0.0;
                } else {
                    gaps[h][x][act] = gap;
                }
            }
        }
    }
    let value = expect(model.initial_dist(), &v_star[0]);
    OptimalSolution { q_star, v_star, gaps, optimal_actions, value }
}

/// A master policy: per-learner deterministic base policies followed through
/// the layer chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MasterPolicy {
    /// `base_policies[ℓ-1][h][x]`.
    pub base_policies: Vec<DeterministicPolicy>,
    pub chain: ScheduleChain,
}

/// Follows `explore` until a per-stage ε-coin comes up, then `ucb` for the
/// rest of the episode. The coin is tossed before acting at each stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingPolicy {
    pub explore: StochasticPolicy,
    pub ucb: DeterministicPolicy,
    pub epsilon: f64,
}

/// What a learner commits to before an episode, in a form the oracle can
/// evaluate exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AnnouncedPolicy {
    Deterministic { policy: DeterministicPolicy },
    Stochastic { policy: StochasticPolicy },
    Master(MasterPolicy),
    Switching(SwitchingPolicy),
}

/// A Markovian policy view used by [`evaluate_policy`].
#[derive(Debug, Clone, Copy)]
pub enum PolicyRef<'a> {
    Deterministic(&'a DeterministicPolicy),
    Stochastic(&'a StochasticPolicy),
}

impl PolicyRef<'_> {
    fn for_each_action(&self, h: usize, x: usize, mut f: impl FnMut(usize, f64)) {
        match self {
            PolicyRef::Deterministic(p) => f(p[h][x], 1.0),
            PolicyRef::Stochastic(p) => {
                for (a, &w) in p[h][x].iter().enumerate() {
                    if w > 0.0 {
                        f(a, w);
                    }
                }
            }
        }
    }
}

/// Exact expected H-step reward of a Markovian policy by forward propagation.
pub fn evaluate_policy<M: EpisodicModel + ?Sized>(model: &M, policy: PolicyRef<'_>) -> f64 {
    let s = model.num_states();
    let mut dist = model.initial_dist().to_vec();
    let mut value = 0.0;
    for h in 0..model.horizon() {
        let mut next = vec![0.0; s];
        for x in 0..s {
            let mass = dist[x];
            if mass == 0.0 {
                continue;
            }
            policy.for_each_action(h, x, |a, w| {
                let m = mass * w;
                value += m * model.mean_reward(h, x, a);
                for (nx, p) in model.transition_row(h, x, a).iter().enumerate() {
                    next[nx] += m * p;
                }
            });
        }
        dist = next;
    }
    value
}

/// Forward pass over (state, latent). `kernel(h)[i][j]` is the latent
/// transition applied before acting at stage `h`; `act(i, h, x, emit)` emits
/// the action law of latent `i`.
fn evaluate_latent<M, K, P>(model: &M, initial_latent: &[f64], kernel: K, act: P) -> f64
where
    M: EpisodicModel + ?Sized,
    K: Fn(usize) -> Vec<Vec<f64>>,
    P: Fn(usize, usize, usize, &mut dyn FnMut(usize, f64)),
{
    let s = model.num_states();
    let n = initial_latent.len();
    // joint[x][i]
    let mut joint: Vec<Vec<f64>> = model
        .initial_dist()
        .iter()
        .map(|p| initial_latent.iter().map(|q| p * q).collect())
        .collect();
    let mut value = 0.0;
    for h in 0..model.horizon() {
        let k = kernel(h);
        let mut moved = vec![vec![0.0; n]; s];
        for x in 0..s {
            for i in 0..n {
                let m = joint[x][i];
                if m == 0.0 {
                    continue;
                }
                for (j, p) in k[i].iter().enumerate() {
                    if *p > 0.0 {
                        moved[x][j] += m * p;
                    }
                }
            }
        }
        let mut next = vec![vec![0.0; n]; s];
        for x in 0..s {
            for j in 0..n {
                let m = moved[x][j];
                if m == 0.0 {
                    continue;
                }
                act(j, h, x, &mut |a, w| {
                    let mw = m * w;
                    value += mw * model.mean_reward(h, x, a);
                    for (nx, p) in model.transition_row(h, x, a).iter().enumerate() {
                        if *p > 0.0 {
                            next[nx][j] += mw * p;
                        }
                    }
                });
            }
        }
        joint = next;
    }
    value
}

/// Exact value of a master policy via the augmented (state, learner) chain.
pub fn evaluate_master_policy<M: EpisodicModel + ?Sized>(model: &M, master: &MasterPolicy) -> f64 {
    let kernel = master.chain.kernel();
    let mut start = vec![0.0; master.chain.ell_max];
    start[0] = 1.0;
    evaluate_latent(model, &start, |_| kernel.clone(), |ell, h, x, emit| {
        emit(master.base_policies[ell][h][x], 1.0)
    })
}

/// Exact value of an ε-switching policy (latent 0 = exploring, 1 = switched).
pub fn evaluate_switching_policy<M: EpisodicModel + ?Sized>(model: &M, policy: &SwitchingPolicy) -> f64 {
    let eps = policy.epsilon;
    let kernel = vec![vec![1.0 - eps, eps], vec![0.0, 1.0]];
    evaluate_latent(model, &[1.0, 0.0], |_| kernel.clone(), |mode, h, x, emit| {
        if mode == 1 {
            emit(policy.ucb[h][x], 1.0);
        } else {
            for (a, &w) in policy.explore[h][x].iter().enumerate() {
                if w > 0.0 {
                    emit(a, w);
                }
            }
        }
    })
}

/// Exact value of any announced policy.
pub fn evaluate_announced<M: EpisodicModel + ?Sized>(model: &M, policy: &AnnouncedPolicy) -> f64 {
    match policy {
        AnnouncedPolicy::Deterministic { policy } => evaluate_policy(model, PolicyRef::Deterministic(policy)),
        AnnouncedPolicy::Stochastic { policy } => evaluate_policy(model, PolicyRef::Stochastic(policy)),
        AnnouncedPolicy::Master(m) => evaluate_master_policy(model, m),
        AnnouncedPolicy::Switching(p) => evaluate_switching_policy(model, p),
    }
}

/// `Σ_{Z_sub} H/gap(x,a) + H²|Z_opt|/gap_min` with `gap(x,a) = min_h gap_h(x,a)`.
pub fn gap_complexity(solution: &OptimalSolution, horizon: usize) -> Result<f64> {
    let h_f = horizon as f64;
    let mut gap_min = f64::INFINITY;
    for per_state in &solution.gaps {
        for per_action in per_state {
            for &g in per_action {
                if g > 0.0 && g < gap_min {
                    gap_min = g;
                }
            }
        }
    }
    if !gap_min.is_finite() {
        return Err(Error::UndefinedGapMin);
    }
    let s = solution.gaps.first().map_or(0, Vec::len);
    let a = solution.gaps.first().and_then(|g| g.first()).map_or(0, Vec::len);
    let mut sub_sum = 0.0;
    let mut num_opt = 0usize;
    for x in 0..s {
        for act in 0..a {
            let gap = solution.gaps.iter().map(|g| g[x][act]).fold(f64::INFINITY, f64::min);
            if gap == 0.0 {
                num_opt += 1;
            } else {
                sub_sum += h_f / gap;
            }
        }
    }
    Ok(sub_sum + h_f * h_f * num_opt as f64 / gap_min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_bandit, make_combination_lock, make_random_tabular, RewardKind};

    fn uniform(s: usize, a: usize, h: usize) -> StochasticPolicy {
        vec![vec![vec![1.0 / a as f64; a]; s]; h]
    }

    #[test]
    fn combination_lock_values() {
        let m = make_combination_lock(2, 3).unwrap();
        let sol = optimal_values(&m);
        assert_eq!(sol.value, 1.0);
        for h in 0..3 {
            assert_eq!(sol.v_star[h][0], 0.0, "sink has zero value");
        }
        // x^(h) is reachable at stage h-1 (0-based); the wrong action forfeits 1.
        for h in 1..=3 {
            assert_eq!(sol.gaps[h - 1][h][1], 1.0);
            assert_eq!(sol.optimal_actions[h - 1][h], vec![0]);
        }
    }

    #[test]
    fn uniform_policy_on_small_lock() {
        let m = make_combination_lock(2, 2).unwrap();
        let v = evaluate_policy(&m, PolicyRef::Stochastic(&uniform(3, 2, 2)));
        assert!((v - 0.25).abs() < 1e-15);
        let single = make_combination_lock(2, 1).unwrap();
        let sol = optimal_values(&single);
        assert_eq!(sol.q_star[0][1], vec![1.0, 0.0]);
    }

    #[test]
    fn zero_reward_mdp_is_worthless() {
        let m = make_random_tabular(4, 3, 5, 2).unwrap().with_zero_rewards();
        assert_eq!(evaluate_policy(&m, PolicyRef::Stochastic(&uniform(4, 3, 5))), 0.0);
    }

    #[test]
    fn greedy_matches_value() {
        let m = make_random_tabular(5, 3, 6, 8).unwrap();
        let sol = optimal_values(&m);
        let v = evaluate_policy(&m, PolicyRef::Deterministic(&sol.greedy_policy()));
        assert!((v - sol.value).abs() < 1e-9);
    }

    #[test]
    fn degenerate_single_chain() {
        let m = make_random_tabular(1, 1, 7, 3).unwrap();
        let pol = vec![vec![0]; 7];
        let v = evaluate_policy(&m, PolicyRef::Deterministic(&pol));
        assert!((v - 7.0 * m.mean_reward[0][0]).abs() < 1e-12);
    }

    #[test]
    fn master_with_identical_bases_collapses() {
        let m = make_random_tabular(4, 2, 5, 1).unwrap();
        let pol = optimal_values(&m).greedy_policy();
        let master = MasterPolicy {
            base_policies: vec![pol.clone(); 3],
            chain: ScheduleChain::new(3, 5).unwrap(),
        };
        let direct = evaluate_policy(&m, PolicyRef::Deterministic(&pol));
        assert!((evaluate_master_policy(&m, &master) - direct).abs() < 1e-9);
    }

    #[test]
    fn switching_with_zero_epsilon_is_exploration() {
        let m = make_combination_lock(3, 3).unwrap();
        let p = SwitchingPolicy {
            explore: uniform(4, 3, 3),
            ucb: vec![vec![0; 4]; 3],
            epsilon: 0.0,
        };
        assert!((evaluate_switching_policy(&m, &p) - 1.0 / 27.0).abs() < 1e-15);
        let always = SwitchingPolicy { epsilon: 1.0, ..p };
        assert_eq!(evaluate_switching_policy(&m, &always), 1.0);
    }

    #[test]
    fn gap_complexity_bandit_example() {
        let m = make_bandit(&[1.0, 0.5], RewardKind::Deterministic).unwrap();
        let sol = optimal_values(&m);
        assert!((gap_complexity(&sol, 1).unwrap() - 4.0).abs() < 1e-12);
        // The Z_opt term scales with H², the Z_sub term with H.
        let doubled = gap_complexity(&sol, 2).unwrap();
        assert!((doubled - (2.0 * 2.0 + 4.0 * 2.0)).abs() < 1e-12);
    }

    #[test]
    fn gap_complexity_single_action_errors() {
        let m = make_bandit(&[0.7], RewardKind::Deterministic).unwrap();
        assert!(matches!(gap_complexity(&optimal_values(&m), 1), Err(Error::UndefinedGapMin)));
    }
}
