//! Near-uniform action elimination and its pure-elimination special case.

use rand::Rng;

use crate::env::Transition;
use crate::estimators::{ucbvi_bonus, BonusParams, TabularStats};
use crate::oracle::{AnnouncedPolicy, SwitchingPolicy};
use crate::{Error, Result, SimRng};

use super::{argmax_in, check_action_count, plausible, ActionSet, Learner, QSupervisor};

/// Eliminates implausible actions permanently and plays uniformly over the
/// survivors; at each stage a coin with bias `ε` may switch the rest of the
/// episode to the UCB policy. `ε = 0` is pure uniform elimination.
#[derive(Debug, Clone)]
pub struct SupervisedUnif {
    params: BonusParams,
    epsilon: f64,
    bonus_scale: f64,
    stats: TabularStats,
    /// Persistent active sets `A_{k;h}(x)`.
    active: Vec<Vec<ActionSet>>,
    plausible: Vec<Vec<ActionSet>>,
    supervisor: Option<QSupervisor>,
    switched: bool,
    episode: usize,
}

impl SupervisedUnif {
    pub fn new(params: BonusParams, epsilon: f64) -> Result<Self> {
        Self::with_bonus_scale(params, epsilon, 1.0)
    }

    pub fn uniform_elimination(params: BonusParams) -> Result<Self> {
        Self::new(params, 0.0)
    }

    pub fn with_bonus_scale(params: BonusParams, epsilon: f64, bonus_scale: f64) -> Result<Self> {
        check_action_count(params.num_actions)?;
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in [0,1], got {epsilon}")));
        }
        if !(params.delta > 0.0 && params.delta < 1.0) || bonus_scale < 0.0 {
            return Err(Error::InvalidArgument("need delta in (0,1) and a nonnegative bonus scale".into()));
        }
        let (s, a, h) = (params.num_states, params.num_actions, params.horizon);
        Ok(SupervisedUnif {
            params,
            epsilon,
            bonus_scale,
            stats: TabularStats::new(s, a),
            active: vec![vec![ActionSet::full(a); s]; h],
            plausible: vec![vec![ActionSet::full(a); s]; h],
            supervisor: None,
            switched: false,
            episode: 0,
        })
    }

    pub fn active_sets(&self) -> &[Vec<ActionSet>] {
        &self.active
    }
}

impl Learner for SupervisedUnif {
    fn name(&self) -> &str {
        if self.epsilon > 0.0 {
            "supervised_unif"
        } else {
            "uniform_elimination"
        }
    }

    fn announce(&mut self) -> Result<AnnouncedPolicy> {
        let (s, a, horizon) = (self.params.num_states, self.params.num_actions, self.params.horizon);
        let h_f = horizon as f64;
        let mut q_up = vec![vec![vec![0.0; a]; s]; horizon];
        let mut q_low = vec![vec![vec![0.0; a]; s]; horizon];
        let mut ucb = vec![vec![0; s]; horizon];
        let mut v_up = vec![0.0; s];
        let mut v_low = vec![0.0; s];
        for h in (0..horizon).rev() {
            let (mut nu, mut nl) = (vec![0.0; s], vec![0.0; s]);
            for x in 0..s {
                for act in 0..a {
                    let b = self.bonus_scale * ucbvi_bonus(self.stats.count(x, act), &self.params);
                    let r = self.stats.mean_reward(x, act);
                    q_up[h][x][act] = h_f.min(r + self.stats.expected_value(x, act, &v_up) + b);
                    q_low[h][x][act] = (r + self.stats.expected_value(x, act, &v_low) - b).clamp(0.0, h_f);
                }
                let pi = argmax_in(&q_up[h][x], self.active[h][x]);
                ucb[h][x] = pi;
                nu[x] = q_up[h][x][pi];
                nl[x] = q_low[h][x][pi];
                let keep = plausible(&q_up[h][x], &q_low[h][x], self.active[h][x]);
                if keep.is_empty() {
                    return Err(Error::LearnerInvariant {
                        episode: self.episode,
                        message: format!("plausible set empty at stage {h}, state {x}"),
                    });
                }
                self.plausible[h][x] = keep;
            }
            v_up = nu;
            v_low = nl;
        }
        let explore = self
            .plausible
            .iter()
            .map(|per_state| {
                per_state
                    .iter()
                    .map(|set| {
                        let w = 1.0 / set.len() as f64;
                        (0..a).map(|act| if set.contains(act) { w } else { 0.0 }).collect()
                    })
                    .collect()
            })
            .collect();
        self.supervisor = Some(QSupervisor {
            ell: 1,
            q_up,
            q_low,
            active: self.active.clone(),
            ucb_policy: ucb.clone(),
        });
        self.active = self.plausible.clone();
        Ok(AnnouncedPolicy::Switching(SwitchingPolicy { explore, ucb, epsilon: self.epsilon }))
    }

    fn act(&mut self, stage: usize, state: usize, rng: &mut SimRng) -> usize {
        if stage == 0 {
            self.switched = false;
        }
        if !self.switched && rng.random::<f64>() < self.epsilon {
            self.switched = true;
        }
        if self.switched {
            return self.supervisor.as_ref().map_or(0, |s| s.ucb_policy[stage][state]);
        }
        let set = self.plausible[stage][state];
        let pick = rng.random_range(0..set.len());
        set.iter().nth(pick).unwrap_or(0)
    }

    fn observe(&mut self, trajectory: &[Transition]) -> Result<()> {
        for t in trajectory {
            self.stats.record_transition(t);
        }
        self.episode += 1;
        Ok(())
    }

    fn supervisors(&self) -> &[QSupervisor] {
        self.supervisor.as_slice()
    }
}
