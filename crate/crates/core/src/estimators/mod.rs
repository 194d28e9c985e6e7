//! Statistics shared by the learners: counts and empirical models, ridge
//! regression in non-parametric form, the bonus formulas, and corruption
//! bookkeeping.

pub mod bonus;
pub mod corruption;
pub mod ridge;
pub mod tabular;

pub use bonus::{
    bandit_bonuses, compute_beta, linear_bonus_global, linear_bonus_sub, tabular_bonus_global,
    tabular_bonus_sub, ucb_bonus, ucbvi_bonus, BonusParams,
};
pub use corruption::{count_corrupted_global, count_corrupted_sub, ridge_corruption_bound, CorruptionLog, EpisodeCorruption};
pub use ridge::{ridge_fit, RidgeModel, REFACTOR_EVERY};
pub use tabular::TabularStats;
