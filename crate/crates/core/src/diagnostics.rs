//! Run-time checks of learner snapshots against exact quantities.
//!
//! Nothing here mutates a learner; all functions take read-only snapshots.

use rand::Rng;
use serde::Serialize;

use crate::env::{sample_categorical, sample_step, EpisodicModel};
use crate::estimators::{RidgeModel, TabularStats};
use crate::learners::QSupervisor;
use crate::oracle::{expect, DeterministicPolicy, MasterPolicy, OptimalSolution};
use crate::{Error, Result, SimRng};

/// Slack for floating-point comparisons in the admissibility and validity checks.
pub const CHECK_TOL: f64 = 1e-9;

/// Exact occupancy is used when `S·A·H·ℓ_max` stays below this.
pub const EXACT_CELL_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    UpperBelowOptimal,
    LowerAboveOptimal,
    OptimalActionInactive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityViolation {
    pub stage: usize,
    pub state: usize,
    pub action: usize,
    pub kind: ViolationKind,
    pub q_star: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub ell: usize,
    pub admissible: bool,
    pub violations: Vec<AdmissibilityViolation>,
}

/// Checks `Q_low ≤ Q* ≤ Q̄` everywhere and that every optimal action is active.
pub fn check_admissible(sup: &QSupervisor, solution: &OptimalSolution) -> Result<AdmissibilityReport> {
    if sup.horizon() != solution.horizon() {
        return Err(Error::DimensionMismatch { expected: solution.horizon(), actual: sup.horizon() });
    }
    let mut violations = Vec::new();
    for h in 0..sup.horizon() {
        for (x, q_star_x) in solution.q_star[h].iter().enumerate() {
            for (a, &qs) in q_star_x.iter().enumerate() {
                let up = sup.q_up[h][x][a];
                let low = sup.q_low[h][x][a];
                if up < qs - CHECK_TOL {
                    violations.push(AdmissibilityViolation {
                        stage: h,
                        state: x,
                        action: a,
                        kind: ViolationKind::UpperBelowOptimal,
                        q_star: qs,
                        bound: up,
                    });
                }
                if low > qs + CHECK_TOL {
                    violations.push(AdmissibilityViolation {
                        stage: h,
                        state: x,
                        action: a,
                        kind: ViolationKind::LowerAboveOptimal,
                        q_star: qs,
                        bound: low,
                    });
                }
            }
            for &a in &solution.optimal_actions[h][x] {
                if !sup.active[h][x].contains(a) {
                    violations.push(AdmissibilityViolation {
                        stage: h,
                        state: x,
                        action: a,
                        kind: ViolationKind::OptimalActionInactive,
                        q_star: q_star_x[a],
                        bound: f64::NAN,
                    });
                }
            }
        }
    }
    Ok(AdmissibilityReport { ell: sup.ell, admissible: violations.is_empty(), violations })
}

/// Upper and lower Bellman errors, `[h][x][a]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BellmanErrors {
    pub upper: Vec<Vec<Vec<f64>>>,
    pub lower: Vec<Vec<Vec<f64>>>,
}

impl BellmanErrors {
    pub fn max_abs(&self) -> f64 {
        self.upper
            .iter()
            .chain(&self.lower)
            .flatten()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// `Q̄_h − (r + pᵀV̄_{h+1})` and `Q_low,h − (r + pᵀV_low,h+1)` under the true model.
pub fn bellman_errors<M: EpisodicModel + ?Sized>(sup: &QSupervisor, model: &M) -> Result<BellmanErrors> {
    if sup.horizon() != model.horizon() {
        return Err(Error::DimensionMismatch { expected: model.horizon(), actual: sup.horizon() });
    }
    let v_up = sup.upper_values();
    let v_low = sup.lower_values();
    let (s, a_n) = (model.num_states(), model.num_actions());
    let mut upper = vec![vec![vec![0.0; a_n]; s]; sup.horizon()];
    let mut lower = upper.clone();
    for h in 0..sup.horizon() {
        for x in 0..s {
            for a in 0..a_n {
                let row = model.transition_row(h, x, a);
                let r = model.mean_reward(h, x, a);
                upper[h][x][a] = sup.q_up[h][x][a] - (r + expect(row, &v_up[h + 1]));
                lower[h][x][a] = sup.q_low[h][x][a] - (r + expect(row, &v_low[h + 1]));
            }
        }
    }
    Ok(BellmanErrors { upper, lower })
}

/// A stationary reward and transition estimate. Rows may be signed, as for
/// ridge predictions in linear mode.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelEstimate {
    pub reward: Vec<Vec<f64>>,
    /// `transition[x][a][x']`.
    pub transition: Vec<Vec<Vec<f64>>>,
}

impl ModelEstimate {
    pub fn from_tabular(stats: &TabularStats, num_states: usize, num_actions: usize) -> Self {
        let reward = (0..num_states).map(|x| (0..num_actions).map(|a| stats.mean_reward(x, a)).collect()).collect();
        let transition = (0..num_states)
            .map(|x| (0..num_actions).map(|a| stats.transition_row(x, a)).collect())
            .collect();
        ModelEstimate { reward, transition }
    }

    /// Ridge predictions at `features[x][a]`.
    pub fn from_ridge(model: &RidgeModel, features: &[Vec<Vec<f64>>], num_states: usize) -> Self {
        let mut reward = Vec::with_capacity(features.len());
        let mut transition = Vec::with_capacity(features.len());
        for per_state in features {
            let mut r_x = Vec::with_capacity(per_state.len());
            let mut p_x = Vec::with_capacity(per_state.len());
            for phi in per_state {
                let v = nalgebra::DVector::from_column_slice(phi);
                r_x.push(model.predict_reward(&v));
                let mut row = vec![0.0; num_states];
                for (nx, w) in model.next_state_weights(&v) {
                    row[nx] += w;
                }
                p_x.push(row);
            }
            reward.push(r_x);
            transition.push(p_x);
        }
        ModelEstimate { reward, transition }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityViolation {
    pub stage: usize,
    pub state: usize,
    pub action: usize,
    /// Index into the list of value functions checked.
    pub value_index: usize,
    pub deviation: f64,
    pub bonus: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidityReport {
    pub valid: bool,
    /// Largest `deviation − bonus` seen (negative when valid with room).
    pub worst_excess: f64,
    pub violations: Vec<ValidityViolation>,
}

/// Checks `|r̃ − r* + (p̃ − p*)ᵀV*_{h+1}| ≤ b` at every `(h,x,a)`.
pub fn check_valid<M: EpisodicModel + ?Sized>(
    estimate: &ModelEstimate,
    bonus: &[Vec<f64>],
    truth: &M,
    solution: &OptimalSolution,
) -> ValidityReport {
    check_valid_against(estimate, bonus, truth, &[&solution.v_star])
}

/// Same check against each value table in `values` (`[h][x]`, rows `0..=H`),
/// e.g. `V*`, `V̄` and `V_low` for signed estimates.
pub fn check_valid_against<M: EpisodicModel + ?Sized>(
    estimate: &ModelEstimate,
    bonus: &[Vec<f64>],
    truth: &M,
    values: &[&Vec<Vec<f64>>],
) -> ValidityReport {
    let mut violations = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    for (vi, v) in values.iter().enumerate() {
        for h in 0..truth.horizon() {
            let next = &v[h + 1];
            for x in 0..truth.num_states() {
                for a in 0..truth.num_actions() {
                    let dev = (estimate.reward[x][a] - truth.mean_reward(h, x, a)
                        + expect(&estimate.transition[x][a], next)
                        - expect(truth.transition_row(h, x, a), next))
                    .abs();
                    let b = bonus[x][a];
                    worst = worst.max(dev - b);
                    if dev > b + CHECK_TOL {
                        violations.push(ValidityViolation {
                            stage: h,
                            state: x,
                            action: a,
                            value_index: vi,
                            deviation: dev,
                            bonus: b,
                        });
                    }
                }
            }
        }
    }
    ValidityReport { valid: violations.is_empty(), worst_excess: worst, violations }
}

/// Transition law of the schedule conditioned on `ℓ_H = ell`:
/// `cond[t][i][j] = K[i][j] g_{t+1}(j) / g_t(i)` for the move from `ℓ_t` to `ℓ_{t+1}`.
fn conditioned_kernels(master: &MasterPolicy, ell: usize) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)> {
    let chain = master.chain;
    if ell == 0 || ell > chain.ell_max {
        return Err(Error::OutOfRange { what: "learner", id: ell, limit: chain.ell_max });
    }
    let g = chain.reach_probabilities(ell);
    if g[0][0] == 0.0 {
        return Err(Error::InvalidArgument(format!("learner {ell} is never charged")));
    }
    let kernel = chain.kernel();
    let n = chain.ell_max;
    let cond = (0..chain.horizon)
        .map(|t| {
            (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| if g[t][i] > 0.0 { kernel[i][j] * g[t + 1][j] / g[t][i] } else { 0.0 })
                        .collect()
                })
                .collect()
        })
        .collect();
    Ok((cond, g))
}

/// Exact `[h][x][a]` occupancy of the master policy given `ℓ_H = ell`, and the
/// conditional state laws at each stage (`[h][x]`).
fn conditioned_occupancy<M: EpisodicModel + ?Sized>(
    model: &M,
    master: &MasterPolicy,
    ell: usize,
) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>)> {
    let (cond, _) = conditioned_kernels(master, ell)?;
    let (s, a_n, horizon, n) = (model.num_states(), model.num_actions(), model.horizon(), master.chain.ell_max);
    let mut joint: Vec<Vec<f64>> = model
        .initial_dist()
        .iter()
        .map(|&p| {
            let mut v = vec![0.0; n];
            v[0] = p;
            v
        })
        .collect();
    let mut occupancy = vec![vec![vec![0.0; a_n]; s]; horizon];
    let mut state_law = vec![vec![0.0; s]; horizon];
    for h in 0..horizon {
        let mut moved = vec![vec![0.0; n]; s];
        for x in 0..s {
            for i in 0..n {
                let m = joint[x][i];
                if m == 0.0 {
                    continue;
                }
                for j in 0..n {
                    moved[x][j] += m * cond[h][i][j];
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
                state_law[h][x] += m;
                let a = master.base_policies[j][h][x];
                occupancy[h][x][a] += m;
                for (nx, p) in model.transition_row(h, x, a).iter().enumerate() {
                    next[nx][j] += m * p;
                }
            }
        }
        joint = next;
    }
    Ok((occupancy, state_law))
}

/// Occupancy of a deterministic policy started from `start` at stage `from`.
fn forward_occupancy<M: EpisodicModel + ?Sized>(
    model: &M,
    policy: &DeterministicPolicy,
    from: usize,
    start: &[f64],
) -> Vec<Vec<Vec<f64>>> {
    let (s, a_n, horizon) = (model.num_states(), model.num_actions(), model.horizon());
    let mut occupancy = vec![vec![vec![0.0; a_n]; s]; horizon];
    let mut dist = start.to_vec();
    for h in from..horizon {
        let mut next = vec![0.0; s];
        for x in 0..s {
            if dist[x] == 0.0 {
                continue;
            }
            let a = policy[h][x];
            occupancy[h][x][a] += dist[x];
            for (nx, p) in model.transition_row(h, x, a).iter().enumerate() {
                next[nx] += dist[x] * p;
            }
        }
        dist = next;
    }
    occupancy
}

fn check_master_shape<M: EpisodicModel + ?Sized>(model: &M, master: &MasterPolicy) -> Result<()> {
    if master.chain.horizon != model.horizon() || master.base_policies.len() != master.chain.ell_max {
        return Err(Error::DimensionMismatch { expected: model.horizon(), actual: master.chain.horizon });
    }
    Ok(())
}

/// UCB visitation ratio of the master policy conditioned on `ℓ_H = ell`,
/// with `π^ucb` the base policy of `ell`: the largest ratio between the
/// occupancy of "switch to `π^ucb` at stage h" and the policy's own occupancy.
/// Infinite if the switched policy reaches a cell the policy never visits.
pub fn exact_visitation_ratio<M: EpisodicModel + ?Sized>(model: &M, master: &MasterPolicy, ell: usize) -> Result<f64> {
    check_master_shape(model, master)?;
    let (occ, state_law) = conditioned_occupancy(model, master, ell)?;
    let ucb = &master.base_policies[ell - 1];
    let mut ratio: f64 = 1.0;
    for h in 0..model.horizon() {
        let switched = forward_occupancy(model, ucb, h, &state_law[h]);
        for hp in h..model.horizon() {
            for (x, per_state) in switched[hp].iter().enumerate() {
                for (a, &num) in per_state.iter().enumerate() {
                    if num <= 0.0 {
                        continue;
                    }
                    let den = occ[hp][x][a];
                    if den <= 0.0 {
                        return Ok(f64::INFINITY);
                    }
                    ratio = ratio.max(num / den);
                }
            }
        }
    }
    Ok(ratio)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VisitationEstimate {
    pub ell: usize,
    pub ratio: f64,
    /// Whether `ratio` is exact or a Monte Carlo lower-confidence value.
    pub exact: bool,
}

/// Exact ratio when the augmented chain is small, otherwise a Monte Carlo
/// lower-confidence estimate from `num_samples` episodes per policy.
pub fn estimate_visitation_ratio<M: EpisodicModel + ?Sized>(
    model: &M,
    master: &MasterPolicy,
    ell: usize,
    num_samples: usize,
    rng: &mut SimRng,
) -> Result<VisitationEstimate> {
    let cells = model.num_states() * model.num_actions() * model.horizon() * master.chain.ell_max;
    if cells <= EXACT_CELL_LIMIT {
        let ratio = exact_visitation_ratio(model, master, ell)?;
        return Ok(VisitationEstimate { ell, ratio, exact: true });
    }
    let ratio = monte_carlo_visitation_ratio(model, master, ell, num_samples, rng)?;
    Ok(VisitationEstimate { ell, ratio, exact: false })
}

/// Monte Carlo version of [`exact_visitation_ratio`]. Each cell's ratio is
/// lower-bounded by `(p̂_num − w_num)/(p̂_den + w_den)` with three-sigma
/// binomial widths; the reported value is the largest such bound, at least 1.
pub fn monte_carlo_visitation_ratio<M: EpisodicModel + ?Sized>(
    model: &M,
    master: &MasterPolicy,
    ell: usize,
    num_samples: usize,
    rng: &mut SimRng,
) -> Result<f64> {
    check_master_shape(model, master)?;
    if num_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let (cond, _) = conditioned_kernels(master, ell)?;
    let (s, a_n, horizon) = (model.num_states(), model.num_actions(), model.horizon());
    let ucb = &master.base_policies[ell - 1];
    let n = num_samples as f64;
    let width = |p: f64| 3.0 * (p * (1.0 - p) / n).sqrt() + 1.0 / n;

    // Sample conditioned master trajectories; also remember the state at each
    // stage to seed the switched rollouts.
    let mut base_counts = vec![vec![vec![0u64; a_n]; s]; horizon];
    let mut stage_states = vec![Vec::with_capacity(num_samples); horizon];
    for _ in 0..num_samples {
        let mut x = sample_categorical(model.initial_dist(), rng);
        let mut i = 0;
        for h in 0..horizon {
            i = sample_categorical(&cond[h][i], rng);
            stage_states[h].push(x);
            let a = master.base_policies[i][h][x];
            base_counts[h][x][a] += 1;
            x = sample_step(model, h, x, a, rng).1;
        }
    }
    let mut ratio: f64 = 1.0;
    for h in 0..horizon {
        let mut counts = vec![vec![vec![0u64; a_n]; s]; horizon];
        for _ in 0..num_samples {
            let mut x = stage_states[h][rng.random_range(0..num_samples)];
            for hp in h..horizon {
                let a = ucb[hp][x];
                counts[hp][x][a] += 1;
                x = sample_step(model, hp, x, a, rng).1;
            }
        }
        for hp in h..horizon {
            for x in 0..s {
                for a in 0..a_n {
                    if counts[hp][x][a] == 0 {
                        continue;
                    }
                    let pn = counts[hp][x][a] as f64 / n;
                    let pd = base_counts[hp][x][a] as f64 / n;
                    let lo = pn - width(pn);
                    if lo > 0.0 {
                        ratio = ratio.max(lo / (pd + width(pd)));
                    }
                }
            }
        }
    }
    Ok(ratio)
}
