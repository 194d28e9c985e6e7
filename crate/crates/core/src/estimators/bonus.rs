//! Confidence bonuses. All logarithms are natural.

use nalgebra::{DMatrix, DVector};

/// Problem constants that every tabular bonus needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BonusParams {
    pub num_states: usize,
    pub num_actions: usize,
    pub horizon: usize,
    pub total_steps: u64,
    pub delta: f64,
}

impl BonusParams {
    fn sah(&self) -> f64 {
        (self.num_states * self.num_actions * self.horizon) as f64
    }
}

/// `min{H, 2H√(2 ln(64SAHT²/δ)/N) + 2^ℓH²/N}`, and `H` at `N = 0`.
pub fn tabular_bonus_global(n: u64, ell: usize, p: &BonusParams) -> f64 {
    let h = p.horizon as f64;
    if n == 0 {
        return h;
    }
    let t = p.total_steps as f64;
    let nf = n as f64;
    let conf = 2.0 * h * (2.0 * (64.0 * p.sah() * t * t / p.delta).ln() / nf).sqrt();
    let robust = 2f64.powi(ell as i32) * h * h / nf;
    h.min(conf + robust)
}

/// `min{H, 2H√(2 ln(64SAHT³/δ)/N) + 2H² ln(16ℓ²/δ)/N}`, and `H` at `N = 0`.
pub fn tabular_bonus_sub(n: u64, ell: usize, p: &BonusParams) -> f64 {
    let h = p.horizon as f64;
    if n == 0 {
        return h;
    }
    let t = p.total_steps as f64;
    let nf = n as f64;
    let l = ell as f64;
    let conf = 2.0 * h * (2.0 * (64.0 * p.sah() * t * t * t / p.delta).ln() / nf).sqrt();
    let robust = 2.0 * h * h * (16.0 * l * l / p.delta).ln() / nf;
    h.min(conf + robust)
}

/// Plain optimistic value iteration bonus `min{H, 2H√(2 ln(64SAHT²/δ)/N)}`.
pub fn ucbvi_bonus(n: u64, p: &BonusParams) -> f64 {
    let h = p.horizon as f64;
    if n == 0 {
        return h;
    }
    let t = p.total_steps as f64;
    h.min(2.0 * h * (2.0 * (64.0 * p.sah() * t * t / p.delta).ln() / n as f64).sqrt())
}

/// `β = 14√(30 ln(A d T² H / δ))`.
pub fn compute_beta(d: usize, num_actions: usize, total_steps: u64, horizon: usize, delta: f64) -> f64 {
    let t = total_steps as f64;
    let arg = num_actions as f64 * d as f64 * t * t * horizon as f64 / delta;
    14.0 * (30.0 * arg.ln()).sqrt()
}

/// `β(d+√A)H‖φ‖_{Λ⁻¹} + 4H² C̄ ‖Λ⁻¹φ‖₂` from the two norms.
pub fn linear_bonus_from_norms(
    elliptic_norm: f64,
    inverse_norm: f64,
    c_bar: f64,
    beta: f64,
    d: usize,
    num_actions: usize,
    horizon: usize,
) -> f64 {
    let h = horizon as f64;
    beta * (d as f64 + (num_actions as f64).sqrt()) * h * elliptic_norm + 4.0 * h * h * c_bar * inverse_norm
}

fn norms(phi: &DVector<f64>, lambda_inv: &DMatrix<f64>) -> (f64, f64) {
    let w = lambda_inv * phi;
    (phi.dot(&w).max(0.0).sqrt(), w.norm())
}

/// Global linear bonus, `C̄ = 2^ℓ`.
pub fn linear_bonus_global(
    phi: &DVector<f64>,
    lambda_inv: &DMatrix<f64>,
    ell: usize,
    beta: f64,
    d: usize,
    num_actions: usize,
    horizon: usize,
) -> f64 {
    let (e, i) = norms(phi, lambda_inv);
    linear_bonus_from_norms(e, i, 2f64.powi(ell as i32), beta, d, num_actions, horizon)
}

/// `C̄_{ℓ;sb} = min{2^ℓ, 2 ln(16ℓ²/δ)}`.
pub fn linear_sub_cbar(ell: usize, delta: f64) -> f64 {
    let l = ell as f64;
    2f64.powi(ell as i32).min(2.0 * (16.0 * l * l / delta).ln())
}

/// Subsampled linear bonus.
#[allow(clippy::too_many_arguments)]
pub fn linear_bonus_sub(
    phi: &DVector<f64>,
    lambda_inv: &DMatrix<f64>,
    ell: usize,
    beta: f64,
    d: usize,
    num_actions: usize,
    horizon: usize,
    delta: f64,
) -> f64 {
    let (e, i) = norms(phi, lambda_inv);
    linear_bonus_from_norms(e, i, linear_sub_cbar(ell, delta), beta, d, num_actions, horizon)
}

/// Bandit bonuses `(b_gl, b_sb)` of base learner `ℓ`.
///
/// `b_gl = √(2 ln(32AT³/δ)/N_gl) + 2^ℓ/N_gl` when `N_gl > 1`, else 1;
/// `b_sb = √(2 ln(32AT³/δ)/N_sb) + 2 ln(16ℓ²/δ)/N_sb` when `N_sb > 1`, else 1.
pub fn bandit_bonuses(n_gl: u64, n_sb: u64, ell: usize, delta: f64, num_actions: usize, total_steps: u64) -> (f64, f64) {
    let t = total_steps as f64;
    let log_term = 2.0 * (32.0 * num_actions as f64 * t * t * t / delta).ln();
    let l = ell as f64;
    let b_gl = if n_gl > 1 {
        let n = n_gl as f64;
        (log_term / n).sqrt() + 2f64.powi(ell as i32) / n
    } else {
        1.0
    };
    let b_sb = if n_sb > 1 {
        let n = n_sb as f64;
        (log_term / n).sqrt() + 2.0 * (16.0 * l * l / delta).ln() / n
    } else {
        1.0
    };
    (b_gl, b_sb)
}

/// Classic UCB bonus `√(ln(AT/δ)/N)`; infinite for an unplayed arm.
pub fn ucb_bonus(n: u64, num_actions: usize, total_steps: u64, delta: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    ((num_actions as f64 * total_steps as f64 / delta).ln() / n as f64).sqrt()
}
