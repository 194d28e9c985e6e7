use serde::{Deserialize, Serialize};

use crate::env::Transition;

/// Visit counts, reward sums and transition counts over `(x, a)`, pooled over
/// stages (the dynamics are stationary).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularStats {
    pub num_states: usize,
    pub num_actions: usize,
    counts: Vec<u64>,
    reward_sums: Vec<f64>,
    /// Flattened `[x][a][x']`.
    next_counts: Vec<u64>,
}

impl TabularStats {
    pub fn new(num_states: usize, num_actions: usize) -> Self {
        TabularStats {
            num_states,
            num_actions,
            counts: vec![0; num_states * num_actions],
            reward_sums: vec![0.0; num_states * num_actions],
            next_counts: vec![0; num_states * num_actions * num_states],
        }
    }

    fn idx(&self, x: usize, a: usize) -> usize {
        x * self.num_actions + a
    }

    pub fn record(&mut self, x: usize, a: usize, reward: f64, next: usize) {
        let i = self.idx(x, a);
        self.counts[i] += 1;
        self.reward_sums[i] += reward;
        self.next_counts[i * self.num_states + next] += 1;
    }

    pub fn record_transition(&mut self, t: &Transition) {
        self.record(t.state, t.action, t.reward, t.next_state);
    }

    pub fn count(&self, x: usize, a: usize) -> u64 {
        self.counts[self.idx(x, a)]
    }

    pub fn reward_sum(&self, x: usize, a: usize) -> f64 {
        self.reward_sums[self.idx(x, a)]
    }

    pub fn next_count(&self, x: usize, a: usize, next: usize) -> u64 {
        self.next_counts[self.idx(x, a) * self.num_states + next]
    }

    /// `r̂(x,a)`; zero when unvisited.
    pub fn mean_reward(&self, x: usize, a: usize) -> f64 {
        let n = self.count(x, a);
        if n == 0 {
            0.0
        } else {
            self.reward_sum(x, a) / n as f64
        }
    }

    /// `p̂(·|x,a)`; uniform when unvisited.
    pub fn transition_row(&self, x: usize, a: usize) -> Vec<f64> {
        let n = self.count(x, a);
        if n == 0 {
            return vec![1.0 / self.num_states as f64; self.num_states];
        }
        let base = self.idx(x, a) * self.num_states;
        self.next_counts[base..base + self.num_states]
            .iter()
            .map(|&c| c as f64 / n as f64)
            .collect()
    }

    /// `p̂(x,a)ᵀ v` without materializing the row.
    pub fn expected_value(&self, x: usize, a: usize, v: &[f64]) -> f64 {
        let n = self.count(x, a);
        if n == 0 {
            return v.iter().sum::<f64>() / self.num_states as f64;
        }
        let base = self.idx(x, a) * self.num_states;
        let weighted: f64 = self.next_counts[base..base + self.num_states]
            .iter()
            .zip(v)
            .filter(|(c, _)| **c > 0)
            .map(|(&c, val)| c as f64 * val)
            .sum();
        weighted / n as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn unvisited_pair_conventions() {
        let s = TabularStats::new(4, 2);
        assert_eq!(s.mean_reward(1, 1), 0.0);
        assert_eq!(s.transition_row(1, 1), vec![0.25; 4]);
        assert_eq!(s.expected_value(1, 1, &[4.0, 0.0, 0.0, 0.0]), 1.0);
    }

    #[test]
    fn counts_and_estimates() {
        let mut s = TabularStats::new(3, 2);
        s.record(0, 1, 1.0, 2);
        s.record(0, 1, 0.0, 2);
        s.record(0, 1, 1.0, 0);
        s.record(2, 0, 0.5, 1);
        assert_eq!(s.count(0, 1), 3);
        assert!((s.mean_reward(0, 1) - 2.0 / 3.0).abs() < 1e-15);
        let row = s.transition_row(0, 1);
        assert!((row[0] - 1.0 / 3.0).abs() < 1e-15 && (row[2] - 2.0 / 3.0).abs() < 1e-15);
        assert!((s.expected_value(0, 1, &[3.0, 7.0, 6.0]) - 5.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn stats_are_consistent(
            data in prop::collection::vec((0usize..4, 0usize..3, 0.0f64..=1.0, 0usize..4), 0..200)
        ) {
            let mut s = TabularStats::new(4, 3);
            for &(x, a, r, n) in &data {
                s.record(x, a, r, n);
            }
            for x in 0..4 {
                for a in 0..3 {
                    let n = s.count(x, a);
                    let total: u64 = (0..4).map(|nx| s.next_count(x, a, nx)).sum();
                    prop_assert_eq!(total, n);
                    let r = s.mean_reward(x, a);
                    prop_assert!((0.0..=1.0).contains(&r));
                    prop_assert!((r * n as f64 - s.reward_sum(x, a)).abs() < 1e-9);
                    let row_sum: f64 = s.transition_row(x, a).iter().sum();
                    prop_assert!((row_sum - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
