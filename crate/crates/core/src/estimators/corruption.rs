//! Bookkeeping of corrupted data points.
//!
//! A stage of a corrupted episode counts as corrupted when the episode model
//! at that stage differs from the nominal one at the visited `(x, a)`. Under
//! the coupling that reuses the same randomness for both models these are
//! exactly the stages whose `(reward, next state)` could differ from the
//! idealized sample.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Per-episode record of corrupted stages and the charged learner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EpisodeCorruption {
    pub corrupted_stages: usize,
    /// `None` for learners without a schedule.
    pub charged: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorruptionLog {
    pub episodes: Vec<EpisodeCorruption>,
}

impl CorruptionLog {
    pub fn push(&mut self, corrupted_stages: usize, charged: Option<usize>) {
        self.episodes.push(EpisodeCorruption { corrupted_stages, charged });
    }
}

/// Corrupted data points in the global statistics.
pub fn count_corrupted_global(log: &CorruptionLog) -> usize {
    log.episodes.iter().map(|e| e.corrupted_stages).sum()
}

/// Corrupted data points charged to learner `ell`.
pub fn count_corrupted_sub(log: &CorruptionLog, ell: usize) -> usize {
    log.episodes
        .iter()
        .filter(|e| e.charged == Some(ell))
        .map(|e| e.corrupted_stages)
        .sum()
}

/// `2 C H α ‖V_N⁻¹ x‖₂`, the deterministic bound on how much `C` corrupted
/// episodes (each touching at most `H` targets of size `α`) move a ridge
/// prediction at `x`.
pub fn ridge_corruption_bound(
    budget: usize,
    horizon: usize,
    alpha: f64,
    cov_inv: &DMatrix<f64>,
    x: &DVector<f64>,
) -> f64 {
    2.0 * budget as f64 * horizon as f64 * alpha * (cov_inv * x).norm()
}
