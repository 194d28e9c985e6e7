use crate::env::Transition;
use crate::estimators::{ucbvi_bonus, BonusParams, TabularStats};
use crate::oracle::AnnouncedPolicy;
use crate::{Error, Result, SimRng};

use super::{argmax_in, check_action_count, max_over, ActionSet, Learner, QSupervisor};

/// Optimistic value iteration on global statistics.
#[derive(Debug, Clone)]
pub struct Ucbvi {
    params: BonusParams,
    bonus_scale: f64,
    stats: TabularStats,
    supervisor: Option<QSupervisor>,
}

impl Ucbvi {
    pub fn new(params: BonusParams) -> Result<Self> {
        Self::with_bonus_scale(params, 1.0)
    }

    pub fn with_bonus_scale(params: BonusParams, bonus_scale: f64) -> Result<Self> {
        check_action_count(params.num_actions)?;
        if !(params.delta > 0.0 && params.delta < 1.0) || bonus_scale < 0.0 {
            return Err(Error::InvalidArgument("UCBVI needs delta in (0,1) and a nonnegative bonus scale".into()));
        }
        Ok(Ucbvi {
            params,
            bonus_scale,
            stats: TabularStats::new(params.num_states, params.num_actions),
            supervisor: None,
        })
    }

    pub fn stats(&self) -> &TabularStats {
        &self.stats
    }

    fn plan(&self) -> QSupervisor {
        let (s, a, horizon) = (self.params.num_states, self.params.num_actions, self.params.horizon);
        let h_f = horizon as f64;
        let full = ActionSet::full(a);
        let mut q_up = vec![vec![vec![0.0; a]; s]; horizon];
        let mut q_low = vec![vec![vec![0.0; a]; s]; horizon];
        let mut policy = vec![vec![0; s]; horizon];
        let mut v_up = vec![0.0; s];
        let mut v_low = vec![0.0; s];
        for h in (0..horizon).rev() {
            for x in 0..s {
                for act in 0..a {
                    let b = self.bonus_scale * ucbvi_bonus(self.stats.count(x, act), &self.params);
                    let r = self.stats.mean_reward(x, act);
                    q_up[h][x][act] = h_f.min(r + self.stats.expected_value(x, act, &v_up) + b);
                    q_low[h][x][act] = (r + self.stats.expected_value(x, act, &v_low) - b).clamp(0.0, h_f);
                }
            }
            let (mut nu, mut nl) = (vec![0.0; s], vec![0.0; s]);
            for x in 0..s {
                policy[h][x] = argmax_in(&q_up[h][x], full);
                nu[x] = q_up[h][x][policy[h][x]];
                nl[x] = max_over(&q_low[h][x], full);
            }
            v_up = nu;
            v_low = nl;
        }
        QSupervisor { ell: 1, q_up, q_low, active: vec![vec![full; s]; horizon], ucb_policy: policy }
    }
}

impl Learner for Ucbvi {
    fn name(&self) -> &str {
        "ucbvi"
    }

    fn announce(&mut self) -> Result<AnnouncedPolicy> {
        let sup = self.plan();
        let policy = sup.ucb_policy.clone();
        self.supervisor = Some(sup);
        Ok(AnnouncedPolicy::Deterministic { policy })
    }

    fn act(&mut self, stage: usize, state: usize, _rng: &mut SimRng) -> usize {
        self.supervisor.as_ref().map_or(0, |s| s.ucb_policy[stage][state])
    }

    fn observe(&mut self, trajectory: &[Transition]) -> Result<()> {
        for t in trajectory {
            self.stats.record_transition(t);
        }
        Ok(())
    }

    fn supervisors(&self) -> &[QSupervisor] {
        self.supervisor.as_slice()
    }
}
