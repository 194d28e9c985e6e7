//! Simulation toolkit for episodic reinforcement learning under adversarial
//! corruption.
//!
//! The crate is organised bottom-up:
//!
//! - [`env`]: tabular and linear episodic MDPs, the combination lock, sampling.
//! - [`oracle`]: exact dynamic programming (optimal values, gaps, exact
//!   evaluation of announced randomized policies).
//! - [`schedule`]: the learner-selection laws used by the robust learners.
//! - [`estimators`]: counts, empirical models, ridge regression and bonuses.
//! - [`learners`]: UCB/UCBVI baselines and the supervised corruption-robust
//!   learners (bandit, tabular, linear), plus action-elimination variants.
//! - [`adversary`]: budgeted episode-level attacks.
//! - [`diagnostics`]: admissibility, Bellman errors, validity and visitation
//!   ratios computed from learner snapshots.
//! - [`harness`]: seeded experiments, exact regret records, CSV/SVG output.
//!
//! Conventions: states, actions and stages are dense 0-based indices. Learner
//! indices `ℓ` are 1-based, since they enter the formulas (`2^ℓ`, `ln(16ℓ²/δ)`).

pub mod adversary;
pub mod diagnostics;
pub mod env;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod learners;
pub mod oracle;
pub mod schedule;

pub use error::{Error, Result};

/// Random number generator used for every stochastic component.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Builds a [`SimRng`] from a plain seed (tests and one-off sampling).
pub fn rng_from_seed(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

/// Index of the maximum over `candidates`, lowest index on ties.
pub(crate) fn argmax_by<I>(candidates: I, value: impl Fn(usize) -> f64) -> Option<usize>
where
    I: IntoIterator<Item = usize>,
{
    let mut best: Option<(usize, f64)> = None;
    for a in candidates {
        let v = value(a);
        match best {
            Some((_, bv)) if v <= bv => {}
            _ => best = Some((a, v)),
        }
    }
    best.map(|(a, _)| a)
}
