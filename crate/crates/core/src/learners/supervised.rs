//! Supervised value iteration with corruption, in tabular and linear modes.

use nalgebra::DVector;

use crate::env::Transition;
use crate::estimators::bonus::{linear_bonus_from_norms, linear_sub_cbar};
use crate::estimators::{compute_beta, tabular_bonus_global, tabular_bonus_sub, BonusParams, RidgeModel, TabularStats};
use crate::oracle::{AnnouncedPolicy, MasterPolicy};
use crate::schedule::{ell_max_for, ScheduleChain};
use crate::{Error, Result, SimRng};

use super::{argmax_in, check_action_count, max_over, plausible, ActionSet, Learner, QSupervisor};

/// Global and per-learner subsampled model estimates with their bonuses.
///
/// A "backup" is `r̃(x,a) + p̃(x,a)ᵀv`.
pub trait TwoEstimateSource: Send {
    fn num_states(&self) -> usize;
    fn num_actions(&self) -> usize;
    /// Refreshes any caches before planning.
    fn prepare(&mut self) {}
    fn global_backup(&self, x: usize, a: usize, v: &[f64]) -> f64;
    fn global_bonus(&self, ell: usize, x: usize, a: usize) -> f64;
    fn sub_backup(&self, ell: usize, x: usize, a: usize, v: &[f64]) -> f64;
    fn sub_bonus(&self, ell: usize, x: usize, a: usize) -> f64;
    /// Adds an episode to the global statistics and to learner `charged`.
    fn ingest(&mut self, charged: usize, trajectory: &[Transition]) -> Result<()>;
}

/// Counts-based estimates.
#[derive(Debug, Clone)]
pub struct TabularEstimates {
    params: BonusParams,
    bonus_scale: f64,
    global: TabularStats,
    sub: Vec<TabularStats>,
}

impl TabularEstimates {
    pub fn new(params: BonusParams, ell_max: usize, bonus_scale: f64) -> Self {
        let (s, a) = (params.num_states, params.num_actions);
        TabularEstimates {
            params,
            bonus_scale,
            global: TabularStats::new(s, a),
            sub: vec![TabularStats::new(s, a); ell_max],
        }
    }

    pub fn global(&self) -> &TabularStats {
        &self.global
    }

    pub fn sub(&self, ell: usize) -> &TabularStats {
        &self.sub[ell - 1]
    }
}

fn stats_backup(stats: &TabularStats, x: usize, a: usize, v: &[f64]) -> f64 {
    stats.mean_reward(x, a) + stats.expected_value(x, a, v)
}

impl TwoEstimateSource for TabularEstimates {
    fn num_states(&self) -> usize {
        self.params.num_states
    }

    fn num_actions(&self) -> usize {
        self.params.num_actions
    }

    fn global_backup(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        stats_backup(&self.global, x, a, v)
    }

    fn global_bonus(&self, ell: usize, x: usize, a: usize) -> f64 {
        self.bonus_scale * tabular_bonus_global(self.global.count(x, a), ell, &self.params)
    }

    fn sub_backup(&self, ell: usize, x: usize, a: usize, v: &[f64]) -> f64 {
        stats_backup(&self.sub[ell - 1], x, a, v)
    }

    fn sub_bonus(&self, ell: usize, x: usize, a: usize) -> f64 {
        self.bonus_scale * tabular_bonus_sub(self.sub[ell - 1].count(x, a), ell, &self.params)
    }

    fn ingest(&mut self, charged: usize, trajectory: &[Transition]) -> Result<()> {
        for t in trajectory {
            self.global.record_transition(t);
            self.sub[charged - 1].record_transition(t);
        }
        Ok(())
    }
}

/// Per-`(x,a)` quantities of one ridge model, refreshed lazily.
#[derive(Debug, Clone, Default)]
struct RidgeCache {
    reward: Vec<f64>,
    weights: Vec<Vec<(usize, f64)>>,
    elliptic: Vec<f64>,
    inverse: Vec<f64>,
    dirty: bool,
}

/// Ridge-regression estimates over a known feature map.
#[derive(Debug, Clone)]
pub struct LinearEstimates {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    dim: usize,
    delta: f64,
    beta: f64,
    bonus_scale: f64,
    features: Vec<Vec<DVector<f64>>>,
    /// Index 0 is the global model, `ℓ` the subsampled model of learner `ℓ`.
    models: Vec<RidgeModel>,
    caches: Vec<RidgeCache>,
}

impl LinearEstimates {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        features: &[Vec<Vec<f64>>],
        horizon: usize,
        total_steps: u64,
        delta: f64,
        lambda: f64,
        ell_max: usize,
        bonus_scale: f64,
    ) -> Result<Self> {
        let num_states = features.len();
        let num_actions = features.first().map_or(0, Vec::len);
        let dim = features.first().and_then(|f| f.first()).map_or(0, Vec::len);
        if num_states == 0 || num_actions == 0 || dim == 0 {
            return Err(Error::InvalidArgument("empty feature map".into()));
        }
        let mut feats = Vec::with_capacity(num_states);
        for per_state in features {
            if per_state.len() != num_actions {
                return Err(Error::InvalidArgument("ragged feature map".into()));
            }
            let mut row = Vec::with_capacity(num_actions);
            for phi in per_state {
                if phi.len() != dim {
                    return Err(Error::DimensionMismatch { expected: dim, actual: phi.len() });
                }
                row.push(DVector::from_column_slice(phi));
            }
            feats.push(row);
        }
        let models = (0..=ell_max).map(|_| RidgeModel::new(dim, lambda)).collect::<Result<Vec<_>>>()?;
        let caches = vec![RidgeCache { dirty: true, ..Default::default() }; ell_max + 1];
        Ok(LinearEstimates {
            num_states,
            num_actions,
            horizon,
            dim,
            delta,
            beta: compute_beta(dim, num_actions, total_steps, horizon, delta),
            bonus_scale,
            features: feats,
            models,
            caches,
        })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn global(&self) -> &RidgeModel {
        &self.models[0]
    }

    pub fn sub(&self, ell: usize) -> &RidgeModel {
        &self.models[ell]
    }

    fn refresh(&mut self, idx: usize) {
        let model = &self.models[idx];
        let n = self.num_states * self.num_actions;
        let mut cache = RidgeCache {
            reward: Vec::with_capacity(n),
            weights: Vec::with_capacity(n),
            elliptic: Vec::with_capacity(n),
            inverse: Vec::with_capacity(n),
            dirty: false,
        };
        for per_state in &self.features {
            for phi in per_state {
                cache.reward.push(model.predict_reward(phi));
                cache.weights.push(model.next_state_weights(phi));
                cache.elliptic.push(model.elliptic_norm(phi));
                cache.inverse.push(model.inverse_norm(phi));
            }
        }
        self.caches[idx] = cache;
    }

    fn backup(&self, idx: usize, x: usize, a: usize, v: &[f64]) -> f64 {
        let c = &self.caches[idx];
        let i = x * self.num_actions + a;
        c.reward[i] + c.weights[i].iter().map(|&(nx, w)| w * v[nx]).sum::<f64>()
    }

    fn bonus(&self, idx: usize, c_bar: f64, x: usize, a: usize) -> f64 {
        let c = &self.caches[idx];
        let i = x * self.num_actions + a;
        self.bonus_scale
            * linear_bonus_from_norms(c.elliptic[i], c.inverse[i], c_bar, self.beta, self.dim, self.num_actions, self.horizon)
    }
}

impl TwoEstimateSource for LinearEstimates {
    fn num_states(&self) -> usize {
        self.num_states
    }

    fn num_actions(&self) -> usize {
        self.num_actions
    }

    fn prepare(&mut self) {
        for idx in 0..self.models.len() {
            if self.caches[idx].dirty {
                self.refresh(idx);
            }
        }
    }

    fn global_backup(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        self.backup(0, x, a, v)
    }

    fn global_bonus(&self, ell: usize, x: usize, a: usize) -> f64 {
        self.bonus(0, 2f64.powi(ell as i32), x, a)
    }

    fn sub_backup(&self, ell: usize, x: usize, a: usize, v: &[f64]) -> f64 {
        self.backup(ell, x, a, v)
    }

    fn sub_bonus(&self, ell: usize, x: usize, a: usize) -> f64 {
        self.bonus(ell, linear_sub_cbar(ell, self.delta), x, a)
    }

    fn ingest(&mut self, charged: usize, trajectory: &[Transition]) -> Result<()> {
        for t in trajectory {
            let phi = self.features[t.state][t.action].as_slice().to_vec();
            self.models[0].add(&phi, t.reward, t.next_state)?;
            self.models[charged].add(&phi, t.reward, t.next_state)?;
        }
        self.caches[0].dirty = true;
        self.caches[charged].dirty = true;
        Ok(())
    }
}

/// The master algorithm: nested base learners planned top-down every
/// episode, followed through the layer schedule.
#[derive(Debug, Clone)]
pub struct SupervisedC<E> {
    name: String,
    source: E,
    horizon: usize,
    chain: ScheduleChain,
    supervisors: Vec<QSupervisor>,
    current: usize,
    charged: Option<usize>,
    episode: usize,
}

impl SupervisedC<TabularEstimates> {
    pub fn tabular(params: BonusParams, bonus_scale: f64) -> Result<Self> {
        let ell_max = ell_max_for(params.total_steps);
        Self::tabular_with_ell_max(params, bonus_scale, ell_max)
    }

    pub fn tabular_with_ell_max(params: BonusParams, bonus_scale: f64, ell_max: usize) -> Result<Self> {
        check_action_count(params.num_actions)?;
        if !(params.delta > 0.0 && params.delta < 1.0) {
            return Err(Error::InvalidArgument("delta must lie in (0,1)".into()));
        }
        let source = TabularEstimates::new(params, ell_max, bonus_scale);
        SupervisedC::from_source("supervised_c_tabular", source, params.horizon, ell_max)
    }
}

impl SupervisedC<LinearEstimates> {
    pub fn linear(
        features: &[Vec<Vec<f64>>],
        horizon: usize,
        total_steps: u64,
        delta: f64,
        lambda: f64,
        bonus_scale: f64,
    ) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidArgument("delta must lie in (0,1)".into()));
        }
        let ell_max = ell_max_for(total_steps);
        let source = LinearEstimates::new(features, horizon, total_steps, delta, lambda, ell_max, bonus_scale)?;
        check_action_count(source.num_actions())?;
        SupervisedC::from_source("supervised_c_linear", source, horizon, ell_max)
    }
}

impl<E: TwoEstimateSource> SupervisedC<E> {
    pub fn from_source(name: &str, source: E, horizon: usize, ell_max: usize) -> Result<Self> {
        Ok(SupervisedC {
            name: name.to_string(),
            source,
            horizon,
            chain: ScheduleChain::new(ell_max, horizon)?,
            supervisors: Vec::new(),
            current: 1,
            charged: None,
            episode: 0,
        })
    }

    pub fn ell_max(&self) -> usize {
        self.chain.ell_max
    }

    pub fn chain(&self) -> ScheduleChain {
        self.chain
    }

    pub fn source(&self) -> &E {
        &self.source
    }

    /// Two-estimate value iteration of base learner `ell` on active sets
    /// `active`; returns its supervisor and the active sets for `ell - 1`.
    fn plan_learner(&self, ell: usize, active: Vec<Vec<ActionSet>>) -> Result<(QSupervisor, Vec<Vec<ActionSet>>)> {
        let (s, a, horizon) = (self.source.num_states(), self.source.num_actions(), self.horizon);
        let h_f = horizon as f64;
        let src = &self.source;
        let mut q_up = vec![vec![vec![0.0; a]; s]; horizon];
        let mut q_low = vec![vec![vec![0.0; a]; s]; horizon];
        let mut policy = vec![vec![0; s]; horizon];
        let mut next = vec![vec![ActionSet::empty(); s]; horizon];
        let mut v_up = vec![0.0; s];
        let mut v_low = vec![0.0; s];
        for h in (0..horizon).rev() {
            let (mut nu, mut nl) = (vec![0.0; s], vec![0.0; s]);
            for x in 0..s {
                for act in 0..a {
                    let b_gl = src.global_bonus(ell, x, act);
                    let b_sb = src.sub_bonus(ell, x, act);
                    let up = h_f
                        .min(src.global_backup(x, act, &v_up) + b_gl)
                        .min(src.sub_backup(ell, x, act, &v_up) + b_sb);
                    let low = (src.global_backup(x, act, &v_low) - b_gl)
                        .max(src.sub_backup(ell, x, act, &v_low) - b_sb)
                        .max(0.0);
                    q_up[h][x][act] = up.max(0.0);
                    q_low[h][x][act] = low.min(h_f);
                }
                let set = active[h][x];
                let pi = argmax_in(&q_up[h][x], set);
                policy[h][x] = pi;
                nu[x] = q_up[h][x][pi];
                nl[x] = max_over(&q_low[h][x], set);
                let keep = plausible(&q_up[h][x], &q_low[h][x], set);
                if keep.is_empty() {
                    return Err(Error::LearnerInvariant {
                        episode: self.episode,
                        message: format!("active set of learner {} empty at stage {h}, state {x}", ell - 1),
                    });
                }
                next[h][x] = keep;
            }
            v_up = nu;
            v_low = nl;
        }
        let sup = QSupervisor { ell, q_up, q_low, active, ucb_policy: policy };
        Ok((sup, next))
    }
}

impl<E: TwoEstimateSource> Learner for SupervisedC<E> {
    fn name(&self) -> &str {
        &self.name
    }

    fn announce(&mut self) -> Result<AnnouncedPolicy> {
        self.source.prepare();
        let (s, a) = (self.source.num_states(), self.source.num_actions());
        let mut active = vec![vec![ActionSet::full(a); s]; self.horizon];
        let mut sups = Vec::with_capacity(self.chain.ell_max);
        for ell in (1..=self.chain.ell_max).rev() {
            let (sup, next) = self.plan_learner(ell, active)?;
            sups.push(sup);
            active = next;
        }
        sups.reverse();
        self.supervisors = sups;
        let base_policies = self.supervisors.iter().map(|s| s.ucb_policy.clone()).collect();
        Ok(AnnouncedPolicy::Master(MasterPolicy { base_policies, chain: self.chain }))
    }

    fn act(&mut self, stage: usize, state: usize, rng: &mut SimRng) -> usize {
        if stage == 0 {
            self.current = 1;
        }
        self.current = self.chain.step(self.current, rng);
        self.supervisors[self.current - 1].ucb_policy[stage][state]
    }

    fn observe(&mut self, trajectory: &[Transition]) -> Result<()> {
        let charged = self.current;
        self.source.ingest(charged, trajectory)?;
        self.charged = Some(charged);
        self.current = 1;
        self.episode += 1;
        Ok(())
    }

    fn charged_learner(&self) -> Option<usize> {
        self.charged
    }

    fn supervisors(&self) -> &[QSupervisor] {
        &self.supervisors
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{make_random_tabular, sample_step, LinearMdp};
    use crate::learners::Ucbvi;
    use crate::rng_from_seed;

    fn params(s: usize, a: usize, h: usize, k: u64) -> BonusParams {
        BonusParams { num_states: s, num_actions: a, horizon: h, total_steps: k * h as u64, delta: 0.05 }
    }

    fn run_episode(l: &mut dyn Learner, mdp: &crate::env::TabularMdp, k: usize, rng: &mut SimRng) {
        l.announce().unwrap();
        let mut x = 0;
        let mut traj = Vec::new();
        for h in 0..mdp.horizon {
            let a = l.act(h, x, rng);
            let (r, nx) = sample_step(mdp, h, x, a, rng);
            traj.push(Transition { state: x, action: a, reward: r, next_state: nx, stage: h, episode: k });
            x = nx;
        }
        l.observe(&traj).unwrap();
    }

    #[test]
    fn supervisor_invariants_hold_along_a_run() {
        let mdp = make_random_tabular(4, 3, 3, 9).unwrap();
        let mut l = SupervisedC::tabular(params(4, 3, 3, 300), 1.0).unwrap();
        let mut rng = rng_from_seed(1);
        for k in 0..300 {
            run_episode(&mut l, &mdp, k, &mut rng);
            let sups = l.supervisors();
            for w in sups.windows(2) {
                for h in 0..3 {
                    for x in 0..4 {
                        assert!(w[0].active[h][x].is_subset(&w[1].active[h][x]));
                    }
                }
            }
            for sup in sups {
                for h in 0..3 {
                    for x in 0..4 {
                        assert!(sup.active[h][x].contains(sup.ucb_policy[h][x]));
                        for a in 0..3 {
                            assert!((0.0..=3.0).contains(&sup.q_up[h][x][a]));
                            assert!((0.0..=3.0).contains(&sup.q_low[h][x][a]));
                        }
                    }
                }
            }
            assert!(l.charged_learner().unwrap() <= l.ell_max());
        }
    }

    #[test]
    fn single_learner_matches_two_estimate_min_of_identical_stats() {
        let mdp = make_random_tabular(3, 2, 2, 4).unwrap();
        let p = params(3, 2, 2, 100);
        let mut l = SupervisedC::tabular_with_ell_max(p, 1.0, 1).unwrap();
        let mut rng = rng_from_seed(8);
        for k in 0..100 {
            run_episode(&mut l, &mdp, k, &mut rng);
        }
        assert_eq!(l.source().global(), l.source().sub(1));
        l.announce().unwrap();
        let sup = &l.supervisors()[0];
        // with identical data the subsampled bonus is the binding one
        for x in 0..3 {
            for a in 0..2 {
                let n = l.source().global().count(x, a);
                assert!(tabular_bonus_sub(n, 1, &p) >= tabular_bonus_global(n, 1, &p) - 1e-12 || n == 0);
                assert!(sup.q_up[1][x][a] <= 2.0);
            }
        }
    }

    #[test]
    fn ucbvi_dominates_single_learner_upper_bound() {
        // the two-estimate Q̄ adds a robustness term, so it is never below UCBVI's
        let mdp = make_random_tabular(3, 2, 3, 5).unwrap();
        let p = params(3, 2, 3, 200);
        let mut sc = SupervisedC::tabular_with_ell_max(p, 1.0, 1).unwrap();
        let mut ucbvi = Ucbvi::new(p).unwrap();
        let mut rng = rng_from_seed(2);
        let mut traj = Vec::new();
        for k in 0..200 {
            let mut x = 0;
            traj.clear();
            for h in 0..3 {
                let a = (k + h) % 2;
                let (r, nx) = sample_step(&mdp, h, x, a, &mut rng);
                traj.push(Transition { state: x, action: a, reward: r, next_state: nx, stage: h, episode: k });
                x = nx;
            }
            sc.announce().unwrap();
            sc.current = 1;
            sc.observe(&traj).unwrap();
            ucbvi.observe(&traj).unwrap();
        }
        sc.announce().unwrap();
        ucbvi.announce().unwrap();
        let (a, b) = (&sc.supervisors()[0], &ucbvi.supervisors()[0]);
        for h in 0..3 {
            for x in 0..3 {
                for act in 0..2 {
                    assert!(a.q_up[h][x][act] >= b.q_up[h][x][act] - 1e-12);
                }
            }
        }
    }

    #[test]
    fn linear_mode_runs_and_stays_clamped() {
        let tab = make_random_tabular(3, 2, 2, 6).unwrap();
        let lin = LinearMdp::canonical_embedding(&tab).unwrap();
        let mut l = SupervisedC::linear(&lin.features, 2, 100, 0.05, 1.0, 1.0).unwrap();
        let mut rng = rng_from_seed(3);
        for k in 0..50 {
            run_episode(&mut l, &tab, k, &mut rng);
        }
        assert_eq!(l.source().global().len(), 100);
        for sup in l.supervisors() {
            assert!(sup.q_up.iter().flatten().flatten().all(|q| (0.0..=2.0).contains(q)));
        }
        assert!(l.source().beta() > 0.0);
    }
}
