//! Multi-armed bandit learners, run as one-state, one-stage episodic problems.

use crate::env::Transition;
use crate::estimators::{bandit_bonuses, ucb_bonus};
use crate::oracle::AnnouncedPolicy;
use crate::schedule::{bandit_learner_mass, ell_max_for, sample_bandit_learner};
use crate::{argmax_by, Error, Result, SimRng};

use super::{argmax_in, check_action_count, plausible, ActionSet, Learner, QSupervisor};

/// UCB with `b(a) = √(ln(AT/δ)/N(a))`, optionally widened by `c̄/N(a)`.
#[derive(Debug, Clone)]
pub struct UcbBandit {
    num_actions: usize,
    total_steps: u64,
    delta: f64,
    c_bar: f64,
    counts: Vec<u64>,
    sums: Vec<f64>,
    chosen: usize,
}

impl UcbBandit {
    pub fn new(num_actions: usize, total_steps: u64, delta: f64) -> Result<Self> {
        Self::with_known_corruption(num_actions, total_steps, delta, 0.0)
    }

    /// The known-corruption variant: index `μ̂ + b + c̄/N`.
    pub fn with_known_corruption(num_actions: usize, total_steps: u64, delta: f64, c_bar: f64) -> Result<Self> {
        check_action_count(num_actions)?;
        if !(delta > 0.0 && delta < 1.0) || c_bar < 0.0 {
            return Err(Error::InvalidArgument("UCB needs delta in (0,1) and c_bar >= 0".into()));
        }
        Ok(UcbBandit {
            num_actions,
            total_steps,
            delta,
            c_bar,
            counts: vec![0; num_actions],
            sums: vec![0.0; num_actions],
            chosen: 0,
        })
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Upper confidence index of every arm (infinite while unplayed).
    pub fn indices(&self) -> Vec<f64> {
        (0..self.num_actions)
            .map(|a| {
                let n = self.counts[a];
                if n == 0 {
                    return f64::INFINITY;
                }
                let mean = self.sums[a] / n as f64;
                mean + ucb_bonus(n, self.num_actions, self.total_steps, self.delta) + self.c_bar / n as f64
            })
            .collect()
    }
}

impl Learner for UcbBandit {
    fn name(&self) -> &str {
        if self.c_bar > 0.0 {
            "ucb_bandit_known_c"
        } else {
            "ucb_bandit"
        }
    }

    fn announce(&mut self) -> Result<AnnouncedPolicy> {
        let idx = self.indices();
        self.chosen = argmax_by(0..self.num_actions, |a| idx[a]).unwrap_or(0);
        Ok(AnnouncedPolicy::Deterministic { policy: vec![vec![self.chosen]] })
    }

    fn act(&mut self, _stage: usize, _state: usize, _rng: &mut SimRng) -> usize {
        self.chosen
    }

    fn observe(&mut self, trajectory: &[Transition]) -> Result<()> {
        for t in trajectory {
            self.counts[t.action] += 1;
            self.sums[t.action] += t.reward;
        }
        Ok(())
    }
}

/// Corruption-robust bandit learner with `⌈log₂ T⌉` nested base learners.
///
/// Each round every base learner, from the most robust down, recommends the
/// arm maximizing its upper estimate over the active set handed down to it
/// and passes on the arms it still finds plausible. One learner is drawn per
/// round and its recommendation is played; the round's data is charged to it.
#[derive(Debug, Clone)]
pub struct SupervisedBandC {
    num_actions: usize,
    total_steps: u64,
    delta: f64,
    ell_max: usize,
    mass: Vec<f64>,
    n_gl: Vec<u64>,
    sum_gl: Vec<f64>,
    /// `[ℓ-1][a]`.
    n_sb: Vec<Vec<u64>>,
    sum_sb: Vec<Vec<f64>>,
    base_actions: Vec<usize>,
    supervisors: Vec<QSupervisor>,
    drawn: usize,
    charged: Option<usize>,
    round: usize,
}

impl SupervisedBandC {
    pub fn new(num_actions: usize, total_steps: u64, delta: f64) -> Result<Self> {
        Self::with_ell_max(num_actions, total_steps, delta, ell_max_for(total_steps))
    }

    pub fn with_ell_max(num_actions: usize, total_steps: u64, delta: f64, ell_max: usize) -> Result<Self> {
        check_action_count(num_actions)?;
        if !(delta > 0.0 && delta < 1.0) || ell_max == 0 {
            return Err(Error::InvalidArgument("need delta in (0,1) and ell_max >= 1".into()));
        }
        Ok(SupervisedBandC {
            num_actions,
            total_steps,
            delta,
            ell_max,
            mass: bandit_learner_mass(ell_max),
            n_gl: vec![0; num_actions],
            sum_gl: vec![0.0; num_actions],
            n_sb: vec![vec![0; num_actions]; ell_max],
            sum_sb: vec![vec![0.0; num_actions]; ell_max],
            base_actions: vec![0; ell_max],
            supervisors: Vec::new(),
            drawn: 1,
            charged: None,
            round: 0,
        })
    }

    pub fn ell_max(&self) -> usize {
        self.ell_max
    }

    /// Recommended arm of each base learner at the last announce (`[ℓ-1]`).
    pub fn base_actions(&self) -> &[usize] {
        &self.base_actions
    }

    /// `(μ̂_up, μ̂_low)` of base learner `ell`.
    pub fn estimates(&self, ell: usize) -> (Vec<f64>, Vec<f64>) {
        let mut up = Vec::with_capacity(self.num_actions);
        let mut low = Vec::with_capacity(self.num_actions);
        for a in 0..self.num_actions {
            let ng = self.n_gl[a];
            let ns = self.n_sb[ell - 1][a];
            let mean_gl = self.sum_gl[a] / ng.max(1) as f64;
            let mean_sb = self.sum_sb[ell - 1][a] / ns.max(1) as f64;
            let (b_gl, b_sb) = bandit_bonuses(ng, ns, ell, self.delta, self.num_actions, self.total_steps);
            up.push(1f64.min(mean_gl + b_gl).min(mean_sb + b_sb));
            low.push(0f64.max(mean_gl - b_gl).max(mean_sb - b_sb));
        }
        (up, low)
    }
}

impl Learner for SupervisedBandC {
    fn name(&self) -> &str {
        "supervised_band_c"
    }

    fn announce(&mut self) -> Result<AnnouncedPolicy> {
        let mut active = ActionSet::full(self.num_actions);
        let mut supervisors = Vec::with_capacity(self.ell_max);
        for ell in (1..=self.ell_max).rev() {
            let (up, low) = self.estimates(ell);
            let base = argmax_in(&up, active);
            self.base_actions[ell - 1] = base;
            let next = plausible(&up, &low, active);
            if next.is_empty() {
                return Err(Error::LearnerInvariant {
                    episode: self.round,
                    message: format!("empty active set below learner {ell}"),
                });
            }
            supervisors.push(QSupervisor {
                ell,
                q_up: vec![vec![up]],
                q_low: vec![vec![low]],
                active: vec![vec![active]],
                ucb_policy: vec![vec![base]],
            });
            active = next;
        }
        supervisors.reverse();
        self.supervisors = supervisors;
        let mut probs = vec![0.0; self.num_actions];
        for (ell_idx, &a) in self.base_actions.iter().enumerate() {
            probs[a] += self.mass[ell_idx];
        }
        Ok(AnnouncedPolicy::Stochastic { policy: vec![vec![probs]] })
    }

    fn act(&mut self, _stage: usize, _state: usize, rng: &mut SimRng) -> usize {
        self.drawn = sample_bandit_learner(self.ell_max, rng);
        self.base_actions[self.drawn - 1]
    }

    fn observe(&mut self, trajectory: &[Transition]) -> Result<()> {
        let ell = self.drawn;
        for t in trajectory {
            self.n_gl[t.action] += 1;
            self.sum_gl[t.action] += t.reward;
            self.n_sb[ell - 1][t.action] += 1;
            self.sum_sb[ell - 1][t.action] += t.reward;
        }
        self.charged = Some(ell);
        self.round += 1;
        Ok(())
    }

    fn charged_learner(&self) -> Option<usize> {
        self.charged
    }

    fn supervisors(&self) -> &[QSupervisor] {
        &self.supervisors
    }
}
