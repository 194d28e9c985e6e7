//! Learner-selection laws.
//!
//! For episodic RL the followed learner evolves within an episode as a
//! nondecreasing Markov chain: from learner `f` it jumps to `ℓ > f` with
//! probability `2^{-(ℓ-f)} / (2ℓH)` and stays otherwise. The chain starts at
//! learner 1 before stage 1; the index after the last stage is the learner
//! charged with the episode's data.
//!
//! For bandits a single learner is drawn per round: `ℓ > 1` with probability
//! `2^{-ℓ}`, learner 1 with the remaining mass.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result, SimRng};

/// `max(1, ⌈log₂ T⌉)`.
pub fn ell_max_for(total_steps: u64) -> usize {
    if total_steps <= 2 {
        return 1;
    }
    // ⌈log₂ T⌉ for T ≥ 3 via the bit length of T - 1.
    (u64::BITS - (total_steps - 1).leading_zeros()) as usize
}

/// Smallest `ℓ ≥ 1` with `2^ℓ ≥ C` (the critically robust learner).
pub fn critical_learner(budget: u64) -> usize {
    let mut ell = 1;
    while (1u64 << ell) < budget {
        ell += 1;
    }
    ell
}

/// The within-episode layer chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduleChain {
    pub ell_max: usize,
    pub horizon: usize,
}

/// One realization `(ℓ_1, …, ℓ_H)`; `ℓ_0 = 1` is implicit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduleSample {
    pub indices: Vec<usize>,
}

impl ScheduleSample {
    /// The learner charged with the episode, `ℓ_H`.
    pub fn charged(&self) -> usize {
        *self.indices.last().unwrap_or(&1)
    }
}

impl ScheduleChain {
    pub fn new(ell_max: usize, horizon: usize) -> Result<Self> {
        if ell_max == 0 || horizon == 0 {
            return Err(Error::InvalidArgument("schedule needs ell_max >= 1 and H >= 1".into()));
        }
        Ok(ScheduleChain { ell_max, horizon })
    }

    /// Probability of moving from `from` to `to > from` in one stage.
    pub fn jump_probability(&self, from: usize, to: usize) -> f64 {
        if to <= from || to > self.ell_max {
            return 0.0;
        }
        let gap = (to - from) as i32;
        0.5f64.powi(gap) / (2.0 * to as f64 * self.horizon as f64)
    }

    /// Total probability of leaving `from` in one stage.
    pub fn jump_out_mass(&self, from: usize) -> f64 {
        (from + 1..=self.ell_max).map(|to| self.jump_probability(from, to)).sum()
    }

    pub fn stay_probability(&self, from: usize) -> f64 {
        1.0 - self.jump_out_mass(from)
    }

    /// One-stage kernel as a dense `ell_max × ell_max` matrix (0-based rows).
    pub fn kernel(&self) -> Vec<Vec<f64>> {
        (1..=self.ell_max)
            .map(|from| {
                (1..=self.ell_max)
                    .map(|to| match to.cmp(&from) {
                        std::cmp::Ordering::Less => 0.0,
                        std::cmp::Ordering::Equal => self.stay_probability(from),
                        std::cmp::Ordering::Greater => self.jump_probability(from, to),
                    })
                    .collect()
            })
            .collect()
    }

    /// Advances the chain by one stage.
    pub fn step(&self, from: usize, rng: &mut SimRng) -> usize {
        if from >= self.ell_max {
            return from;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for to in from + 1..=self.ell_max {
            acc += self.jump_probability(from, to);
            if u < acc {
                return to;
            }
        }
        from
    }

    pub fn sample(&self, rng: &mut SimRng) -> ScheduleSample {
        let mut current = 1;
        let indices = (0..self.horizon)
            .map(|_| {
                current = self.step(current, rng);
                current
            })
            .collect();
        ScheduleSample { indices }
    }

    /// `marginals[h][f-1] = Pr[ℓ_h = f]` for `h = 0..=H`, by forward recursion.
    pub fn exact_marginals(&self) -> Vec<Vec<f64>> {
        let kernel = self.kernel();
        let mut rows = Vec::with_capacity(self.horizon + 1);
        let mut current = vec![0.0; self.ell_max];
        current[0] = 1.0;
        rows.push(current.clone());
        for _ in 0..self.horizon {
            let mut next = vec![0.0; self.ell_max];
            for (from, mass) in current.iter().enumerate() {
                if *mass == 0.0 {
                    continue;
                }
                for (to, p) in kernel[from].iter().enumerate() {
                    next[to] += mass * p;
                }
            }
            rows.push(next.clone());
            current = next;
        }
        rows
    }

    /// `Pr[ℓ_H = f | ℓ_h = f] = (stay probability of f)^{H-h}`.
    pub fn exact_stay_probability(&self, h: usize, f: usize) -> f64 {
        let remaining = self.horizon.saturating_sub(h);
        self.stay_probability(f).powi(remaining as i32)
    }

    /// Final-learner law `q_ℓ = Pr[ℓ_H = ℓ]` and its prefix sums `q_{≤ℓ}`.
    pub fn exact_final_mass(&self) -> FinalMass {
        let q = self.exact_marginals().pop().unwrap_or_default();
        let mut acc = 0.0;
        let prefix = q
            .iter()
            .map(|v| {
                acc += v;
                acc
            })
            .collect();
        FinalMass { q, prefix }
    }

    /// `g[h][f-1] = Pr[ℓ_H = target | ℓ_h = f]` for `h = 0..=H`.
    pub fn reach_probabilities(&self, target: usize) -> Vec<Vec<f64>> {
        let kernel = self.kernel();
        let mut rows = vec![vec![0.0; self.ell_max]; self.horizon + 1];
        rows[self.horizon][target - 1] = 1.0;
        for h in (0..self.horizon).rev() {
            for from in 0..self.ell_max {
                rows[h][from] = (0..self.ell_max).map(|to| kernel[from][to] * rows[h + 1][to]).sum();
            }
        }
        rows
    }

    /// `Pr[ℓ_h = … = ℓ_H = ℓ | ℓ_H = ℓ]`, exact.
    pub fn exact_tail_stay_given_final(&self, h: usize, ell: usize) -> f64 {
        let marg = self.exact_marginals();
        let q = marg[self.horizon][ell - 1];
        if q == 0.0 {
            return 0.0;
        }
        marg[h][ell - 1] * self.exact_stay_probability(h, ell) / q
    }
}

/// Law of the charged learner `ℓ_H`.
#[derive(Debug, Clone, PartialEq)]
pub struct FinalMass {
    /// `q[ℓ-1] = Pr[ℓ_H = ℓ]`.
    pub q: Vec<f64>,
    /// `prefix[ℓ-1] = Pr[ℓ_H ≤ ℓ]`.
    pub prefix: Vec<f64>,
}

/// Exact law of the bandit learner draw: `Pr[ℓ] = 2^{-ℓ}` for `ℓ > 1`.
pub fn bandit_learner_mass(ell_max: usize) -> Vec<f64> {
    let mut mass: Vec<f64> = (1..=ell_max).map(|ell| 0.5f64.powi(ell as i32)).collect();
    let rest: f64 = mass.iter().skip(1).sum();
    mass[0] = 1.0 - rest;
    mass
}

/// Draws the bandit learner for one round.
pub fn sample_bandit_learner(ell_max: usize, rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for ell in 2..=ell_max {
        acc += 0.5f64.powi(ell as i32);
        if u < acc {
            return ell;
        }
    }
    1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;

    #[test]
    fn ell_max_is_base_two_ceiling() {
        assert_eq!(ell_max_for(1), 1);
        assert_eq!(ell_max_for(2), 1);
        assert_eq!(ell_max_for(3), 2);
        assert_eq!(ell_max_for(4), 2);
        assert_eq!(ell_max_for(5), 3);
        assert_eq!(ell_max_for(20_000), 15);
        assert_eq!(ell_max_for(1 << 20), 20);
    }

    #[test]
    fn critical_learner_matches_definition() {
        assert_eq!(critical_learner(0), 1);
        assert_eq!(critical_learner(2), 1);
        assert_eq!(critical_learner(3), 2);
        assert_eq!(critical_learner(10), 4);
        assert_eq!(critical_learner(218), 8);
    }

    #[test]
    fn single_learner_never_moves() {
        let chain = ScheduleChain::new(1, 6).unwrap();
        let mut rng = rng_from_seed(0);
        for _ in 0..20 {
            assert_eq!(chain.sample(&mut rng).indices, vec![1; 6]);
        }
    }

    #[test]
    fn two_learners_one_stage() {
        let chain = ScheduleChain::new(2, 1).unwrap();
        let m = chain.exact_marginals();
        assert_eq!(m[1][1], 1.0 / 8.0);
        assert_eq!(m[0], vec![1.0, 0.0]);
    }

    #[test]
    fn stay_probability_examples() {
        let chain = ScheduleChain::new(2, 2).unwrap();
        assert_eq!(chain.exact_stay_probability(2, 1), 1.0);
        // jump mass 1/(2*2*2) * 1/2 = 1/16 per stage at H = 2
        assert!((chain.stay_probability(1) - 15.0 / 16.0).abs() < 1e-15);
        let h1 = ScheduleChain::new(2, 1).unwrap();
        assert!((h1.stay_probability(1) - 7.0 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn samples_are_nondecreasing() {
        let chain = ScheduleChain::new(6, 8).unwrap();
        let mut rng = rng_from_seed(42);
        for _ in 0..2000 {
            let s = chain.sample(&mut rng);
            assert!(s.indices.windows(2).all(|w| w[0] <= w[1]));
            assert!(s.indices.iter().all(|&l| (1..=6).contains(&l)));
        }
    }

    #[test]
    fn bandit_mass_example() {
        assert_eq!(bandit_learner_mass(3), vec![5.0 / 8.0, 0.25, 0.125]);
        assert_eq!(bandit_learner_mass(1), vec![1.0]);
        let mut rng = rng_from_seed(1);
        assert!((0..100).all(|_| sample_bandit_learner(1, &mut rng) == 1));
    }

    #[test]
    fn reach_probabilities_agree_with_marginals() {
        let chain = ScheduleChain::new(4, 5).unwrap();
        let q = chain.exact_final_mass().q;
        for ell in 1..=4 {
            let g = chain.reach_probabilities(ell);
            assert!((g[0][0] - q[ell - 1]).abs() < 1e-15);
        }
    }
}
