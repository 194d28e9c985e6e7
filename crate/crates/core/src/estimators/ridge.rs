//! Ridge regression with a non-parametric transition model.
//!
//! The reward parameter is `θ̂ = Λ⁻¹ Σ φ_i R_i`. Transition predictions are
//! never materialized as a matrix: `(μ̂φ)ᵀV = Σ_i V(x'_i) φ_iᵀ Λ⁻¹ φ`, which we
//! evaluate by grouping samples by next state, `Σ_{x'} V(x') s_{x'}ᵀ Λ⁻¹ φ`
//! with `s_{x'} = Σ_{i: x'_i = x'} φ_i`.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Full re-factorization period of `Λ⁻¹`.
pub const REFACTOR_EVERY: usize = 256;

#[derive(Debug, Clone)]
pub struct RidgeModel {
    pub lambda: f64,
    dim: usize,
    cov: DMatrix<f64>,
    cov_inv: DMatrix<f64>,
    reward_moment: DVector<f64>,
    next_state_sums: BTreeMap<usize, DVector<f64>>,
    samples: Vec<(DVector<f64>, f64, usize)>,
    since_refactor: usize,
}

impl RidgeModel {
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::InvalidArgument(format!("ridge needs lambda > 0, got {lambda}")));
        }
        if dim == 0 {
            return Err(Error::InvalidArgument("ridge needs d >= 1".into()));
        }
        Ok(RidgeModel {
            lambda,
            dim,
            cov: DMatrix::identity(dim, dim) * lambda,
            cov_inv: DMatrix::identity(dim, dim) / lambda,
            reward_moment: DVector::zeros(dim),
            next_state_sums: BTreeMap::new(),
            samples: Vec::new(),
            since_refactor: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// `Λ = Σ φφᵀ + λI`.
    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn covariance_inverse(&self) -> &DMatrix<f64> {
        &self.cov_inv
    }

    pub fn samples(&self) -> &[(DVector<f64>, f64, usize)] {
        &self.samples
    }

    /// Adds one `(φ, R, x')` sample; Sherman–Morrison update of `Λ⁻¹`.
    pub fn add(&mut self, phi: &[f64], reward: f64, next_state: usize) -> Result<()> {
        if phi.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, actual: phi.len() });
        }
        let v = DVector::from_column_slice(phi);
        self.cov += &v * v.transpose();
        self.reward_moment += &v * reward;
        self.next_state_sums
            .entry(next_state)
            .and_modify(|s| *s += &v)
            .or_insert_with(|| v.clone());
        self.since_refactor += 1;
        if self.since_refactor >= REFACTOR_EVERY {
            self.refactor();
        } else {
            let w = &self.cov_inv * &v;
            let denom = 1.0 + v.dot(&w);
            self.cov_inv -= (&w * w.transpose()) / denom;
        }
        self.samples.push((v, reward, next_state));
        Ok(())
    }

    /// Recomputes `Λ⁻¹` from `Λ` via Cholesky (Λ ⪰ λI is positive definite).
    pub fn refactor(&mut self) {
        self.since_refactor = 0;
        if let Some(chol) = self.cov.clone().cholesky() {
            self.cov_inv = chol.inverse();
        } else if let Some(inv) = self.cov.clone().try_inverse() {
            self.cov_inv = inv;
        }
    }

    /// `θ̂ = Λ⁻¹ Σ φ_i R_i`.
    pub fn theta(&self) -> DVector<f64> {
        &self.cov_inv * &self.reward_moment
    }

    pub fn predict_reward(&self, phi: &DVector<f64>) -> f64 {
        self.reward_moment.dot(&(&self.cov_inv * phi))
    }

    /// `Σ_{x'} s_{x'}ᵀ Λ⁻¹ φ` for every observed next state, ascending.
    pub fn next_state_weights(&self, phi: &DVector<f64>) -> Vec<(usize, f64)> {
        let w = &self.cov_inv * phi;
        self.next_state_sums.iter().map(|(&x, s)| (x, s.dot(&w))).collect()
    }

    /// `(μ̂φ)ᵀ V`.
    pub fn predict_value(&self, phi: &DVector<f64>, v: &[f64]) -> f64 {
        self.next_state_weights(phi).into_iter().map(|(x, c)| c * v[x]).sum()
    }

    /// `‖φ‖_{Λ⁻¹}`.
    pub fn elliptic_norm(&self, phi: &DVector<f64>) -> f64 {
        phi.dot(&(&self.cov_inv * phi)).max(0.0).sqrt()
    }

    /// `‖Λ⁻¹φ‖₂`.
    pub fn inverse_norm(&self, phi: &DVector<f64>) -> f64 {
        (&self.cov_inv * phi).norm()
    }
}

/// Builds a ridge model from `(φ, target, next_state)` samples.
pub fn ridge_fit(samples: &[(Vec<f64>, f64, usize)], dim: usize, lambda: f64) -> Result<RidgeModel> {
    let mut model = RidgeModel::new(dim, lambda)?;
    for (phi, y, next) in samples {
        model.add(phi, *y, *next)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng_from_seed;
    use rand::Rng;

    fn dense_solution(samples: &[(Vec<f64>, f64, usize)], d: usize, lambda: f64) -> (DMatrix<f64>, DVector<f64>) {
        let mut a = DMatrix::identity(d, d) * lambda;
        let mut b = DVector::zeros(d);
        for (phi, y, _) in samples {
            let v = DVector::from_column_slice(phi);
            a += &v * v.transpose();
            b += v * *y;
        }
        let theta = a.clone().lu().solve(&b).unwrap();
        (a, theta)
    }

    #[test]
    fn one_sample_closed_form() {
        let m = ridge_fit(&[(vec![1.0, 0.0], 1.0, 2)], 2, 1.0).unwrap();
        let t = m.theta();
        assert!((t[0] - 0.5).abs() < 1e-15 && t[1].abs() < 1e-15);
        let mut v = vec![0.0; 4];
        v[2] = 5.0;
        let q = DVector::from_vec(vec![1.0, 0.0]);
        assert!((m.predict_value(&q, &v) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn empty_model() {
        let m = RidgeModel::new(3, 2.0).unwrap();
        assert_eq!(m.theta(), DVector::zeros(3));
        assert_eq!(m.covariance(), &(DMatrix::identity(3, 3) * 2.0));
        assert_eq!(m.predict_value(&DVector::from_vec(vec![1.0, 0.0, 0.0]), &[1.0; 5]), 0.0);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(RidgeModel::new(2, 0.0).is_err());
        let mut m = RidgeModel::new(2, 1.0).unwrap();
        assert!(matches!(m.add(&[1.0], 0.0, 0), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn matches_dense_normal_equations() {
        let mut rng = rng_from_seed(17);
        let d = 5;
        let samples: Vec<_> = (0..20)
            .map(|_| {
                let phi: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                (phi, rng.random::<f64>(), rng.random_range(0..6usize))
            })
            .collect();
        let m = ridge_fit(&samples, d, 1.0).unwrap();
        let (a, theta) = dense_solution(&samples, d, 1.0);
        assert!((m.theta() - theta).amax() < 1e-9);
        // dense μ̂ = Σ_i δ_{x'_i} φ_iᵀ Λ⁻¹
        let a_inv = a.try_inverse().unwrap();
        let v: Vec<f64> = (0..6).map(|i| i as f64 * 0.7 - 1.0).collect();
        let q = DVector::from_vec(vec![0.3, -0.2, 0.5, 0.1, 0.0]);
        let mut mu_hat = DMatrix::zeros(6, d);
        for (phi, _, nx) in &samples {
            let row = (&a_inv * DVector::from_column_slice(phi)).transpose();
            let mut target = mu_hat.row_mut(*nx);
            target += row;
        }
        let dense = (&mu_hat * &q).dot(&DVector::from_vec(v.clone()));
        assert!((m.predict_value(&q, &v) - dense).abs() < 1e-9);
        let literal: f64 = samples
            .iter()
            .map(|(phi, _, nx)| v[*nx] * DVector::from_column_slice(phi).dot(&(&a_inv * &q)))
            .sum();
        assert!((m.predict_value(&q, &v) - literal).abs() < 1e-9);
    }

    #[test]
    fn inverse_stays_accurate_across_refactorization() {
        let mut rng = rng_from_seed(5);
        let mut m = RidgeModel::new(4, 1.0).unwrap();
        for i in 0..(2 * REFACTOR_EVERY + 37) {
            let phi: Vec<f64> = (0..4).map(|_| rng.random_range(-0.5..0.5)).collect();
            m.add(&phi, rng.random(), i % 3).unwrap();
            if i % 97 == 0 {
                let prod = m.covariance() * m.covariance_inverse();
                assert!((prod - DMatrix::<f64>::identity(4, 4)).amax() < 1e-8);
            }
        }
        let eig = m.covariance().clone().symmetric_eigen();
        assert!(eig.eigenvalues.min() >= 1.0 - 1e-9);
    }
}
