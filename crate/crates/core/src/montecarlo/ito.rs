//! One-dimensional Itô market `dR = σ θ_t dt + σ dW` with deterministic,
//! bounded market price of risk `θ`, and its minimal martingale density
//! `Z = E(-θ • W)`.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::market::{path_rng, PathBundle, TimeGrid};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ItoModel<T> {
    pub sigma: T,
    /// `θ` on each grid step.
    pub theta: Vec<T>,
    pub grid: TimeGrid<T>,
}

impl<T: Scalar> ItoModel<T> {
    pub fn new(sigma: T, theta: Vec<T>, grid: TimeGrid<T>) -> Result<Self> {
        if !(sigma > T::zero()) {
            return Err(Error::InvalidParameter(format!("volatility must be positive, got {sigma}")));
        }
        if theta.len() != grid.n_steps {
            return Err(Error::GridMismatch(format!("{} values of theta for {} steps", theta.len(), grid.n_steps)));
        }
        if theta.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidParameter("theta must be finite".into()));
        }
        Ok(Self { sigma, theta, grid })
    }

    pub fn constant(sigma: T, theta: T, grid: TimeGrid<T>) -> Result<Self> {
        Self::new(sigma, vec![theta; grid.n_steps], grid)
    }

    pub fn from_fn(sigma: T, grid: TimeGrid<T>, theta: impl Fn(T) -> T) -> Result<Self> {
        let th = (0..grid.n_steps).map(|k| theta(grid.time(k))).collect();
        Self::new(sigma, th, grid)
    }

    /// `K = sup |θ|`.
    pub fn theta_bound(&self) -> T {
        self.theta.iter().fold(T::zero(), |m, t| m.max(t.abs()))
    }

    /// Return increments `σ θ_k Δt + σ ΔW_k`, one ChaCha stream per path.
    pub fn simulate(&self, first_path: u64, n_paths: usize, seed: u64) -> PathBundle<T> {
        let n = self.grid.n_steps;
        let dt = self.grid.dt();
        let sq = dt.sqrt();
        let mut inc = vec![T::zero(); n_paths * n];
        inc.par_chunks_mut(n).enumerate().for_each(|(i, path)| {
            let mut rng = path_rng(seed, first_path + i as u64);
            for (k, v) in path.iter_mut().enumerate() {
                let z: f64 = rng.sample(StandardNormal);
                *v = self.sigma * (self.theta[k] * dt + sq * T::lit(z));
            }
        });
        PathBundle::from_increments(seed, self.grid, 1, first_path, n_paths, inc).expect("consistent shape")
    }

    /// `E[(Z_s/Z_τ)^q] = exp(q(q-1)/2 ∫_τ^s θ² du)` between grid indices.
    pub fn ratio_moment(&self, q: T, from: usize, to: usize) -> T {
        let chi: T = self.theta[from..to].iter().map(|&t| t * t).sum::<T>() * self.grid.dt();
        (q * (q - T::one()) / T::lit(2.0) * chi).exp()
    }
}

/// Fills the dual layer of `returns` (increments of the model) with the
/// minimal martingale density `Z_{k+1} = Z_k exp(-θ_k ΔW_k - θ_k² Δt / 2)`.
pub fn minimal_measure_density<T: Scalar>(model: &ItoModel<T>, returns: &PathBundle<T>) -> Result<PathBundle<T>> {
    if returns.grid != model.grid || returns.dim != 1 {
        return Err(Error::GridMismatch("returns do not belong to the Itô model".into()));
    }
    let n = model.grid.n_steps;
    let dt = model.grid.dt();
    let half = T::lit(0.5);
    let mut z = vec![T::zero(); returns.n_paths * (n + 1)];
    z.par_chunks_mut(n + 1).enumerate().for_each(|(i, zs)| {
        zs[0] = T::one();
        for k in 0..n {
            let th = model.theta[k];
            let dw = returns.increment(i, k)[0] / model.sigma - th * dt;
            zs[k + 1] = zs[k] * (-th * dw - half * th * th * dt).exp();
        }
    });
    let mut out = returns.clone();
    out.set_dual(z);
    Ok(out)
}

/// Reverse Hölder constant for the minimal density when `q < 0`:
/// `μ°[0,T] exp(q(q-1) K² T / 2)`.
pub fn minimal_measure_constant<T: Scalar>(q: T, theta_bound: T, horizon: T, mu_total: T) -> T {
    mu_total * (q * (q - T::one()) / T::lit(2.0) * theta_bound * theta_bound * horizon).exp()
}
