//! Seeded simulation of Lévy return increments and of the wealth, consumption
//! and dual processes built on top of them.

use std::io::Write;
use std::sync::Arc;

use rand::distr::weighted::WeightedIndex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::dot;
use crate::scalar::Scalar;

use super::{ConsumptionMode, LevyMarket};

/// Uniform grid `t_k = k T / n`, `k = 0..=n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub horizon: T,
    pub n_steps: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(horizon: T, n_steps: usize) -> Result<Self> {
        if n_steps == 0 {
            return Err(Error::InvalidParameter("time grid needs at least one step".into()));
        }
        if !(horizon > T::zero()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(Self { horizon, n_steps })
    }

    pub fn dt(&self) -> T {
        self.horizon / T::from_usize_lossy(self.n_steps)
    }

    pub fn time(&self, k: usize) -> T {
        if k == self.n_steps {
            self.horizon
        } else {
            self.horizon * T::from_usize_lossy(k) / T::from_usize_lossy(self.n_steps)
        }
    }

    pub fn len(&self) -> usize {
        self.n_steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn times(&self) -> Vec<T> {
        (0..=self.n_steps).map(|k| self.time(k)).collect()
    }

    /// Nearest grid index to `t`.
    pub fn index_of(&self, t: T) -> usize {
        let k = (t / self.dt()).round().to_usize().unwrap_or(0);
        k.min(self.n_steps)
    }

    /// `count + 1` evenly spread grid indices from 0 to `n_steps`.
    pub fn checkpoints(&self, count: usize) -> Vec<usize> {
        let count = count.clamp(1, self.n_steps);
        let mut idx: Vec<usize> = (0..=count).map(|j| j * self.n_steps / count).collect();
        idx.dedup();
        idx
    }
}

/// Constant proportions `pi` and a propensity to consume on the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy<T> {
    pub pi: Vec<T>,
    /// `kappa[k]` applies on `[t_k, t_{k+1})`; the last entry is forced to 1.
    pub kappa: Vec<T>,
}

impl<T: Scalar> Strategy<T> {
    pub fn new(pi: Vec<T>, kappa: Vec<T>) -> Self {
        Self { pi, kappa }
    }

    pub fn from_fn(pi: Vec<T>, grid: &TimeGrid<T>, kappa: impl Fn(T) -> T) -> Self {
        Self { pi, kappa: grid.times().into_iter().map(kappa).collect() }
    }

    pub fn shifted(&self, delta: &[T]) -> Self {
        Self { pi: self.pi.iter().zip(delta).map(|(&a, &b)| a + b).collect(), kappa: self.kappa.clone() }
    }

    pub fn scaled_kappa(&self, factor: T) -> Self {
        Self { pi: self.pi.clone(), kappa: self.kappa.iter().map(|&k| k * factor).collect() }
    }
}

/// Simulated paths on a uniform grid. Returns are stored as increments; the
/// wealth, consumption and dual layers are filled by later stages and share
/// the return storage.
#[derive(Debug, Clone)]
pub struct PathBundle<T> {
    pub seed: u64,
    pub grid: TimeGrid<T>,
    pub dim: usize,
    /// Global id of the first path; path `i` of the bundle is `first_path + i`.
    pub first_path: u64,
    pub n_paths: usize,
    returns: Arc<[T]>,
    pub wealth: Vec<T>,
    pub consumption: Vec<T>,
    pub dual: Vec<T>,
    pub rejected: Vec<bool>,
}

impl<T: Scalar> PathBundle<T> {
    /// Bundle from raw increments laid out path-major, `n_paths * n_steps * dim`.
    pub fn from_increments(seed: u64, grid: TimeGrid<T>, dim: usize, first_path: u64, n_paths: usize, increments: Vec<T>) -> Result<Self> {
        if increments.len() != n_paths * grid.n_steps * dim {
            return Err(Error::GridMismatch(format!(
                "{} increments for {n_paths} paths of {} steps in dimension {dim}",
                increments.len(),
                grid.n_steps
            )));
        }
        Ok(Self {
            seed,
            grid,
            dim,
            first_path,
            n_paths,
            returns: increments.into(),
            wealth: Vec::new(),
            consumption: Vec::new(),
            dual: Vec::new(),
            rejected: vec![false; n_paths],
        })
    }

    /// `ΔR` of path `i` over `[t_k, t_{k+1})`.
    pub fn increment(&self, i: usize, k: usize) -> &[T] {
        let n = self.grid.n_steps;
        let start = (i * n + k) * self.dim;
        &self.returns[start..start + self.dim]
    }

    /// Cumulative return `R_{t_k}` of path `i`.
    pub fn cumulative_return(&self, i: usize, k: usize) -> Vec<T> {
        let mut r = vec![T::zero(); self.dim];
        for j in 0..k {
            for (a, &b) in r.iter_mut().zip(self.increment(i, j)) {
                *a = *a + b;
            }
        }
        r
    }

    fn point_index(&self, i: usize, k: usize) -> usize {
        i * (self.grid.n_steps + 1) + k
    }

    pub fn wealth_at(&self, i: usize, k: usize) -> T {
        self.wealth[self.point_index(i, k)]
    }

    pub fn consumption_at(&self, i: usize, k: usize) -> T {
        self.consumption[self.point_index(i, k)]
    }

    pub fn dual_at(&self, i: usize, k: usize) -> T {
        self.dual[self.point_index(i, k)]
    }

    pub fn wealth_path(&self, i: usize) -> &[T] {
        let s = self.point_index(i, 0);
        &self.wealth[s..s + self.grid.n_steps + 1]
    }

    pub fn dual_path(&self, i: usize) -> &[T] {
        let s = self.point_index(i, 0);
        &self.dual[s..s + self.grid.n_steps + 1]
    }

    pub fn has_wealth(&self) -> bool {
        !self.wealth.is_empty()
    }

    pub fn rejected_count(&self) -> usize {
        self.rejected.iter().filter(|&&r| r).count()
    }

    pub fn retained(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.n_paths).filter(move |&i| !self.rejected[i])
    }

    pub fn set_dual(&mut self, dual: Vec<T>) {
        assert_eq!(dual.len(), self.n_paths * (self.grid.n_steps + 1));
        self.dual = dual;
    }
}

/// Independent random stream of one path.
pub fn path_rng(seed: u64, path_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path_id);
    rng
}

/// Simulates `n_paths` return paths starting at global path id `first_path`.
///
/// Each path draws from its own ChaCha stream, so a path's increments depend
/// only on `(seed, path id)` and not on how paths are split across blocks or
/// threads.
pub fn simulate_paths<T: Scalar>(
    market: &LevyMarket<T>,
    grid: &TimeGrid<T>,
    first_path: u64,
    n_paths: usize,
    seed: u64,
) -> PathBundle<T> {
    let dim = market.dim();
    let n = grid.n_steps;
    let dt = grid.dt();
    let sqrt_dt = dt.sqrt();
    let root = market.diffusion_root();
    let gaussian = market.has_diffusion();
    let jumps = market.jumps().weighted_jumps();
    let total = market.jumps().total_intensity();
    let comp = market.jumps().truncated_mean();
    let deterministic: Vec<T> = market.drift().iter().zip(&comp).map(|(&b, &h)| (b - h) * dt).collect();
    let counts = if jumps.is_empty() {
        None
    } else {
        let lambda = (total * dt).to_f64_lossy();
        let weights: Vec<f64> = jumps.iter().map(|j| j.weight.to_f64_lossy()).collect();
        Some((Poisson::new(lambda).expect("positive jump intensity"), WeightedIndex::new(weights).expect("positive weights")))
    };

    let mut returns = vec![T::zero(); n_paths * n * dim];
    returns.par_chunks_mut((n * dim).max(1)).enumerate().for_each(|(i, path)| {
        let mut rng = path_rng(seed, first_path + i as u64);
        let mut z = vec![T::zero(); dim];
        for k in 0..n {
            let inc = &mut path[k * dim..(k + 1) * dim];
            inc.copy_from_slice(&deterministic);
            if gaussian {
                for zj in z.iter_mut() {
                    let v: f64 = rng.sample(StandardNormal);
                    *zj = T::lit(v);
                }
                for (r, inc_r) in inc.iter_mut().enumerate() {
                    let s: T = (0..dim).map(|j| root[(r, j)] * z[j]).sum();
                    *inc_r = *inc_r + s * sqrt_dt;
                }
            }
            if let Some((poisson, pick)) = &counts {
                let m: f64 = poisson.sample(&mut rng);
                for _ in 0..(m as u64) {
                    let jump = &jumps[pick.sample(&mut rng)];
                    for (inc_r, &x) in inc.iter_mut().zip(&jump.size) {
                        *inc_r = *inc_r + x;
                    }
                }
            }
        }
    });

    PathBundle {
        seed,
        grid: *grid,
        dim,
        first_path,
        n_paths,
        returns: returns.into(),
        wealth: Vec::new(),
        consumption: Vec::new(),
        dual: Vec::new(),
        rejected: vec![false; n_paths],
    }
}

/// Euler increments of the Lévy return process on `grid`:
/// `ΔR = (b - ∫h dF) Δt + A sqrt(Δt) Z + Σ jumps`.
pub fn simulate_returns<T: Scalar>(market: &LevyMarket<T>, grid: &TimeGrid<T>, n_paths: usize, seed: u64) -> PathBundle<T> {
    simulate_paths(market, grid, 0, n_paths, seed)
}

/// Wealth `X_{k+1} = X_k (1 + pi.ΔR_k - kappa_k Δt)` (no `Δt` term without
/// intermediate consumption) and consumption `c_k = kappa_k X_k`, `c_T = X_T`.
///
/// Paths whose multiplier is not positive are flagged in `rejected`; their
/// wealth after the violation is `NaN`.
pub fn wealth_path<T: Scalar>(
    returns: &PathBundle<T>,
    strategy: &Strategy<T>,
    x0: T,
    mode: ConsumptionMode,
) -> Result<PathBundle<T>> {
    if !(x0 > T::zero()) {
        return Err(Error::InvalidParameter(format!("initial capital must be positive, got {x0}")));
    }
    let n = returns.grid.n_steps;
    if strategy.pi.len() != returns.dim {
        return Err(Error::InvalidParameter(format!("strategy has {} components, market {}", strategy.pi.len(), returns.dim)));
    }
    if strategy.kappa.len() != n + 1 {
        return Err(Error::GridMismatch(format!("kappa has {} values for {} grid points", strategy.kappa.len(), n + 1)));
    }
    let dt = returns.grid.dt();
    let mut kappa = strategy.kappa.clone();
    kappa[n] = T::one();
    if kappa.iter().any(|&k| k < T::zero() || !k.is_finite()) {
        return Err(Error::InvalidParameter("propensity to consume must be finite and nonnegative".into()));
    }
    let width = n + 1;
    let mut wealth = vec![T::zero(); returns.n_paths * width];
    let mut consumption = vec![T::zero(); returns.n_paths * width];
    let mut rejected = returns.rejected.clone();
    wealth
        .par_chunks_mut(width)
        .zip(consumption.par_chunks_mut(width))
        .zip(rejected.par_iter_mut())
        .enumerate()
        .for_each(|(i, ((xs, cs), rej))| {
            xs[0] = x0;
            for k in 0..n {
                let drag = match mode {
                    ConsumptionMode::WithConsumption => kappa[k] * dt,
                    ConsumptionMode::TerminalOnly => T::zero(),
                };
                let mult = T::one() + dot(&strategy.pi, returns.increment(i, k)) - drag;
                if !(mult > T::zero()) || *rej {
                    *rej = true;
                    xs[k + 1..].iter_mut().for_each(|x| *x = T::nan());
                    break;
                }
                xs[k + 1] = xs[k] * mult;
            }
            for k in 0..=n {
                let kap = match mode {
                    ConsumptionMode::WithConsumption => kappa[k],
                    ConsumptionMode::TerminalOnly if k == n => T::one(),
                    ConsumptionMode::TerminalOnly => T::zero(),
                };
                cs[k] = kap * xs[k];
            }
        });
    let n_rejected = rejected.iter().filter(|&&r| r).count();
    if n_rejected == returns.n_paths {
        return Err(Error::AllPathsRejected { n_paths: returns.n_paths });
    }
    Ok(PathBundle { wealth, consumption, rejected, dual: Vec::new(), ..returns.clone() })
}

/// Writes `path_id,t,R,X,c,Y` rows (`R_1..R_d` for several assets). Layers
/// not yet filled are written empty; rejected paths are skipped.
pub fn write_paths_csv<T: Scalar, W: Write>(bundle: &PathBundle<T>, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["path_id".to_string(), "t".to_string()];
    if bundle.dim == 1 {
        header.push("R".into());
    } else {
        header.extend((1..=bundle.dim).map(|j| format!("R_{j}")));
    }
    header.extend(["X", "c", "Y"].map(String::from));
    w.write_record(&header)?;
    let opt = |v: &Vec<T>, i: usize, k: usize| -> String {
        if v.is_empty() {
            String::new()
        } else {
            v[bundle.point_index(i, k)].to_string()
        }
    };
    for i in bundle.retained() {
        let mut r = vec![T::zero(); bundle.dim];
        for k in 0..=bundle.grid.n_steps {
            if k > 0 {
                for (a, &b) in r.iter_mut().zip(bundle.increment(i, k - 1)) {
                    *a = *a + b;
                }
            }
            let mut rec = vec![(bundle.first_path + i as u64).to_string(), bundle.grid.time(k).to_string()];
            rec.extend(r.iter().map(|x| x.to_string()));
            rec.push(opt(&bundle.wealth, i, k));
            rec.push(opt(&bundle.consumption, i, k));
            rec.push(opt(&bundle.dual, i, k));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{JumpAtom, JumpMeasure};

    #[test]
    fn zero_triplet_gives_zero_increments() {
        let m = LevyMarket::<f64>::no_trade(1, 1.0).unwrap();
        let b = simulate_returns(&m, &TimeGrid::new(1.0, 10).unwrap(), 5, 1);
        for i in 0..5 {
            for k in 0..10 {
                assert_eq!(b.increment(i, k), &[0.0]);
            }
        }
    }

    #[test]
    fn pure_drift_is_deterministic() {
        let m = LevyMarket::new(vec![0.05f64], vec![vec![0.0]], JumpMeasure::none(1), 1.0).unwrap();
        let b = simulate_returns(&m, &TimeGrid::new(1.0, 10).unwrap(), 3, 9);
        for i in 0..3 {
            for k in 0..10 {
                assert!((b.increment(i, k)[0] - 0.005).abs() < 1e-17);
            }
        }
    }

    #[test]
    fn gaussian_increment_mean_within_clt_band() {
        let m = LevyMarket::black_scholes(0.0, 0.2, 1.0).unwrap();
        let n = 100_000;
        let b = simulate_returns(&m, &TimeGrid::new(1.0, 1).unwrap(), n, 2024);
        let mean = (0..n).map(|i| b.increment(i, 0)[0]).sum::<f64>() / n as f64;
        assert!(mean.abs() <= 3.0 * 0.2 / (n as f64).sqrt(), "mean {mean}");
        let var = (0..n).map(|i| b.increment(i, 0)[0].powi(2)).sum::<f64>() / n as f64;
        assert!((var - 0.04).abs() < 0.04 * 0.02);
    }

    #[test]
    fn block_splitting_does_not_change_paths() {
        let j = JumpMeasure::from_atoms(1, vec![JumpAtom { size: vec![-0.1], intensity: 3.0 }]).unwrap();
        let m = LevyMarket::new(vec![0.05], vec![vec![0.04]], j, 1.0).unwrap();
        let g = TimeGrid::new(1.0, 20).unwrap();
        let whole = simulate_returns(&m, &g, 10, 77);
        let tail = simulate_paths(&m, &g, 6, 4, 77);
        for i in 0..4 {
            for k in 0..20 {
                assert_eq!(whole.increment(6 + i, k), tail.increment(i, k));
            }
        }
        let again = simulate_returns(&m, &g, 10, 77);
        assert_eq!(whole.returns, again.returns);
    }

    #[test]
    fn no_trade_wealth_matches_linear_ode() {
        let t_end = 1.0;
        let m = LevyMarket::<f64>::no_trade(1, t_end).unwrap();
        let g = TimeGrid::new(t_end, 50).unwrap();
        let b = simulate_returns(&m, &g, 1, 0);
        let s = Strategy::from_fn(vec![0.0], &g, |t| 1.0 / (1.0 + t_end - t));
        let w = wealth_path(&b, &s, 1.0, ConsumptionMode::WithConsumption).unwrap();
        for k in 0..=50 {
            let t = g.time(k);
            let exact = (1.0 + t_end - t) / (1.0 + t_end);
            assert!((w.wealth_at(0, k) - exact).abs() < 1e-14);
            if k < 50 {
                assert!((w.consumption_at(0, k) - 1.0 / (1.0 + t_end)).abs() < 1e-14);
            }
        }
        assert_eq!(w.consumption_at(0, 50), w.wealth_at(0, 50));
    }

    #[test]
    fn terminal_only_without_trading_keeps_wealth() {
        let m = LevyMarket::black_scholes(0.05, 0.2, 1.0).unwrap();
        let g = TimeGrid::new(1.0, 10).unwrap();
        let b = simulate_returns(&m, &g, 4, 3);
        let s = Strategy::new(vec![0.0], vec![0.0; 11]);
        let w = wealth_path(&b, &s, 2.5, ConsumptionMode::TerminalOnly).unwrap();
        assert!(w.wealth.iter().all(|&x| x == 2.5));
    }

    #[test]
    fn large_negative_move_rejects_path() {
        let j = JumpMeasure::from_atoms(1, vec![JumpAtom { size: vec![-0.5], intensity: 50.0 }]).unwrap();
        // drift equal to the compensator: R is a pure jump process
        let m = LevyMarket::new(vec![-25.0], vec![vec![0.0]], j, 1.0).unwrap();
        let g = TimeGrid::new(1.0, 4).unwrap();
        let b = simulate_returns(&m, &g, 200, 5);
        // pi = 3 turns a single jump into pi.ΔR = -1.5
        let s = Strategy::new(vec![3.0], vec![0.0; 5]);
        let w = wealth_path(&b, &s, 1.0, ConsumptionMode::TerminalOnly);
        assert!(matches!(w, Err(Error::AllPathsRejected { n_paths: 200 })));
        let s = Strategy::new(vec![0.1], vec![0.0; 5]);
        let w = wealth_path(&b, &s, 1.0, ConsumptionMode::TerminalOnly).unwrap();
        assert!(w.rejected_count() > 0 && w.rejected_count() < 200);
        for i in w.retained() {
            assert!(w.wealth_path(i).iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn csv_has_expected_columns() {
        let m = LevyMarket::black_scholes(0.05, 0.2, 1.0).unwrap();
        let g = TimeGrid::new(1.0, 2).unwrap();
        let b = simulate_returns(&m, &g, 2, 3);
        let w = wealth_path(&b, &Strategy::new(vec![1.0], vec![0.5; 3]), 1.0, ConsumptionMode::WithConsumption).unwrap();
        let mut buf = Vec::new();
        write_paths_csv(&w, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "path_id,t,R,X,c,Y");
        assert_eq!(text.lines().count(), 1 + 2 * 3);
    }
}
