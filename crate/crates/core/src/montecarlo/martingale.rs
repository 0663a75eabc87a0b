//! Martingale optimality checks on simulated paths.
//!
//! `I_t = L_t X_t^p / p + ∫_0^t U_s(c_s) ds` is a supermartingale for every
//! strategy and a martingale for the optimal one; `Z_t = X_t Y_t + ∫_0^t c_s
//! Y_s ds` is a supermartingale for every strategy and deflator, and a
//! martingale for the optimal pair.

use serde::Serialize;

use crate::duality::dual_process;
use crate::error::{Error, Result};
use crate::market::{simulate_paths, wealth_path, ConsumptionMode, LevyMarket, PathBundle, Preferences, Strategy};
use crate::opportunity::OpportunityCurve;
use crate::scalar::Scalar;

use super::stats::{map_blocks, Estimate, Moments};
use super::McConfig;

/// Width of the acceptance band in standard errors.
pub const SE_BAND: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ConsistentMartingale,
    ConsistentSupermartingale,
    Violation,
}

/// Classifies a mean increment: flat within the band, significantly
/// negative, or significantly positive.
pub fn verdict(step: &Estimate, scale: f64) -> Verdict {
    let band = SE_BAND * step.se + 1e-12 * scale.abs().max(1.0);
    if step.mean.abs() <= band {
        Verdict::ConsistentMartingale
    } else if step.mean < 0.0 {
        Verdict::ConsistentSupermartingale
    } else {
        Verdict::Violation
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MartingaleTestReport {
    pub checkpoints: Vec<f64>,
    pub means: Vec<f64>,
    pub standard_errors: Vec<f64>,
    /// Paired increments between adjacent checkpoints.
    pub increments: Vec<Estimate>,
    pub verdicts: Vec<Verdict>,
    /// Paired difference between the last and the first checkpoint.
    pub drift: Estimate,
    pub n_paths: usize,
    pub rejected: usize,
}

impl MartingaleTestReport {
    pub fn is_martingale(&self) -> bool {
        self.verdicts.iter().all(|v| *v == Verdict::ConsistentMartingale) && verdict(&self.drift, self.means[0]) == Verdict::ConsistentMartingale
    }

    pub fn is_supermartingale(&self) -> bool {
        self.verdicts.iter().all(|v| *v != Verdict::Violation) && verdict(&self.drift, self.means[0]) != Verdict::Violation
    }

    /// Overall decrease beyond the band.
    pub fn strictly_decreasing(&self) -> bool {
        verdict(&self.drift, self.means[0]) == Verdict::ConsistentSupermartingale
    }
}

/// Moments of a process observed at checkpoints, with paired increments.
#[derive(Debug, Clone, Default)]
pub struct ProcessMoments {
    levels: Vec<Moments>,
    steps: Vec<Moments>,
    total: Moments,
    rejected: usize,
}

impl ProcessMoments {
    pub fn new(n_checkpoints: usize) -> Self {
        Self {
            levels: vec![Moments::default(); n_checkpoints],
            steps: vec![Moments::default(); n_checkpoints.saturating_sub(1)],
            total: Moments::default(),
            rejected: 0,
        }
    }

    pub fn push_path(&mut self, values: &[f64]) {
        for (m, &v) in self.levels.iter_mut().zip(values) {
            m.push(v);
        }
        for (m, w) in self.steps.iter_mut().zip(values.windows(2)) {
            m.push(w[1] - w[0]);
        }
        self.total.push(values[values.len() - 1] - values[0]);
    }

    pub fn merge(&mut self, other: &Self) {
        for (a, b) in self.levels.iter_mut().zip(&other.levels) {
            a.merge(b);
        }
        for (a, b) in self.steps.iter_mut().zip(&other.steps) {
            a.merge(b);
        }
        self.total.merge(&other.total);
        self.rejected += other.rejected;
    }

    pub fn report(&self, checkpoints: Vec<f64>) -> MartingaleTestReport {
        let means: Vec<f64> = self.levels.iter().map(Moments::mean).collect();
        let increments: Vec<Estimate> = self.steps.iter().map(Moments::estimate).collect();
        let scale = means.first().copied().unwrap_or(1.0);
        MartingaleTestReport {
            checkpoints,
            standard_errors: self.levels.iter().map(Moments::std_error).collect(),
            verdicts: increments.iter().map(|e| verdict(e, scale)).collect(),
            increments,
            means,
            drift: self.total.estimate(),
            n_paths: self.total.n as usize,
            rejected: self.rejected,
        }
    }
}

fn checkpoint_times<T: Scalar>(bundle: &PathBundle<T>, idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&k| bundle.grid.time(k).to_f64_lossy()).collect()
}

/// `U_s(c_s)` integrated by the trapezoid rule, with `D` taken on each step
/// from the piece containing its midpoint.
fn running_utility<T: Scalar>(bundle: &PathBundle<T>, i: usize, prefs: &Preferences<T>, out: &mut [f64]) {
    let grid = bundle.grid;
    let dt = grid.dt().to_f64_lossy();
    let p = prefs.p();
    out[0] = 0.0;
    if prefs.mode == ConsumptionMode::TerminalOnly {
        out.iter_mut().for_each(|v| *v = 0.0);
        return;
    }
    let mut prev = bundle.consumption_at(i, 0).powf(p) / p;
    for k in 0..grid.n_steps {
        let next = bundle.consumption_at(i, k + 1).powf(p) / p;
        let mid = (grid.time(k) + grid.time(k + 1)) / T::lit(2.0);
        let d = prefs.discount.at(mid);
        out[k + 1] = out[k] + 0.5 * dt * (d * (prev + next)).to_f64_lossy();
        prev = next;
    }
}

/// Moments of `I` at the checkpoint indices `idx` for one bundle with wealth.
pub fn primal_moments<T: Scalar>(bundle: &PathBundle<T>, prefs: &Preferences<T>, curve: &OpportunityCurve<T>, idx: &[usize]) -> ProcessMoments {
    let p = prefs.p();
    let mut acc = ProcessMoments::new(idx.len());
    acc.rejected = bundle.rejected_count();
    let mut integral = vec![0.0; bundle.grid.len()];
    let mut vals = vec![0.0; idx.len()];
    for i in bundle.retained() {
        running_utility(bundle, i, prefs, &mut integral);
        for (v, &k) in vals.iter_mut().zip(idx) {
            *v = (curve.l[k] * bundle.wealth_at(i, k).powf(p) / p).to_f64_lossy() + integral[k];
        }
        acc.push_path(&vals);
    }
    acc
}

/// Martingale test of `I` on a bundle already carrying wealth paths.
pub fn primal_martingale_test_on<T: Scalar>(
    bundle: &PathBundle<T>,
    prefs: &Preferences<T>,
    curve: &OpportunityCurve<T>,
    checkpoints: usize,
) -> Result<MartingaleTestReport> {
    if bundle.grid != curve.grid {
        return Err(Error::GridMismatch("paths and opportunity curve use different grids".into()));
    }
    let idx = bundle.grid.checkpoints(checkpoints);
    Ok(primal_moments(bundle, prefs, curve, &idx).report(checkpoint_times(bundle, &idx)))
}

/// Simulates `mc.n_paths` paths in blocks and tests `I` for `strategy`.
pub fn primal_martingale_test<T: Scalar>(
    market: &LevyMarket<T>,
    prefs: &Preferences<T>,
    strategy: &Strategy<T>,
    curve: &OpportunityCurve<T>,
    x0: T,
    mc: &McConfig,
) -> Result<MartingaleTestReport> {
    let grid = curve.grid;
    let idx = grid.checkpoints(mc.checkpoints);
    let parts = map_blocks(mc.n_paths, |first, count| -> Result<ProcessMoments> {
        let returns = simulate_paths(market, &grid, first, count, mc.seed);
        let wealth = wealth_path(&returns, strategy, x0, prefs.mode)?;
        Ok(primal_moments(&wealth, prefs, curve, &idx))
    });
    let mut total = ProcessMoments::new(idx.len());
    for part in parts {
        total.merge(&part?);
    }
    if total.total.n == 0 {
        return Err(Error::AllPathsRejected { n_paths: mc.n_paths });
    }
    let times = idx.iter().map(|&k| grid.time(k).to_f64_lossy()).collect();
    Ok(total.report(times))
}

/// Paired estimate of `E[I_T(candidate)] - E[I_T(reference)]` on common
/// random numbers. Since `I_0` is deterministic and `I(reference)` is a
/// martingale for the optimal reference, a significantly negative value shows
/// the candidate is strictly suboptimal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub gap: Estimate,
    /// Gap below `-3 se`.
    pub strict: bool,
    pub rejected: usize,
}

pub fn suboptimality_gap<T: Scalar>(
    market: &LevyMarket<T>,
    prefs: &Preferences<T>,
    reference: &Strategy<T>,
    candidate: &Strategy<T>,
    curve: &OpportunityCurve<T>,
    x0: T,
    mc: &McConfig,
) -> Result<GapReport> {
    let grid = curve.grid;
    let last = [grid.n_steps];
    let parts = map_blocks(mc.n_paths, |first, count| -> Result<(Moments, usize)> {
        let returns = simulate_paths(market, &grid, first, count, mc.seed);
        let a = wealth_path(&returns, reference, x0, prefs.mode)?;
        let b = wealth_path(&returns, candidate, x0, prefs.mode)?;
        let terminal = |bundle: &PathBundle<T>, i: usize, buf: &mut Vec<f64>| {
            running_utility(bundle, i, prefs, buf);
            let k = last[0];
            (curve.l[k] * bundle.wealth_at(i, k).powf(prefs.p()) / prefs.p()).to_f64_lossy() + buf[k]
        };
        let mut buf = vec![0.0; grid.len()];
        let mut m = Moments::default();
        let mut rejected = 0;
        for i in 0..count {
            if a.rejected[i] || b.rejected[i] {
                rejected += 1;
                continue;
            }
            let ia = terminal(&a, i, &mut buf);
            let ib = terminal(&b, i, &mut buf);
            m.push(ib - ia);
        }
        Ok((m, rejected))
    });
    let mut total = Moments::default();
    let mut rejected = 0;
    for part in parts {
        let (m, r) = part?;
        total.merge(&m);
        rejected += r;
    }
    let gap = total.estimate();
    Ok(GapReport { strict: gap.mean < -SE_BAND * gap.se, gap, rejected })
}

/// Moments of `Z = X Y + ∫ c Y ds` from wealth paths and deflator paths on
/// the same randomness.
pub fn deflator_moments<T: Scalar>(wealth: &PathBundle<T>, deflator: &PathBundle<T>, idx: &[usize]) -> ProcessMoments {
    let grid = wealth.grid;
    let dt = grid.dt().to_f64_lossy();
    let mut acc = ProcessMoments::new(idx.len());
    let mut integral = vec![0.0; grid.len()];
    let mut vals = vec![0.0; idx.len()];
    for i in 0..wealth.n_paths {
        if wealth.rejected[i] || deflator.rejected[i] {
            acc.rejected += 1;
            continue;
        }
        let cy = |k: usize| (wealth.consumption_at(i, k) * deflator.dual_at(i, k)).to_f64_lossy();
        integral[0] = 0.0;
        for k in 0..grid.n_steps {
            integral[k + 1] = integral[k] + 0.5 * dt * (cy(k) + cy(k + 1));
        }
        for (v, &k) in vals.iter_mut().zip(idx) {
            *v = (wealth.wealth_at(i, k) * deflator.dual_at(i, k)).to_f64_lossy() + integral[k];
        }
        acc.push_path(&vals);
    }
    acc
}

/// Tests `Z` for given wealth and deflator bundles (same grid, same paths).
pub fn dual_supermartingale_test<T: Scalar>(wealth: &PathBundle<T>, deflator: &PathBundle<T>, checkpoints: usize) -> Result<MartingaleTestReport> {
    if wealth.grid != deflator.grid || wealth.n_paths != deflator.n_paths {
        return Err(Error::GridMismatch("wealth and deflator bundles differ in shape".into()));
    }
    if deflator.dual.is_empty() {
        return Err(Error::InvalidParameter("deflator bundle has no dual layer".into()));
    }
    let idx = wealth.grid.checkpoints(checkpoints);
    Ok(deflator_moments(wealth, deflator, &idx).report(checkpoint_times(wealth, &idx)))
}

/// Blockwise test of `Z` for wealth under `strategy` against the optimal
/// deflator `Ŷ` built from `optimal` on the same paths.
pub fn dual_supermartingale_test_blocks<T: Scalar>(
    market: &LevyMarket<T>,
    prefs: &Preferences<T>,
    optimal: &Strategy<T>,
    strategy: &Strategy<T>,
    curve: &OpportunityCurve<T>,
    x0: T,
    mc: &McConfig,
) -> Result<MartingaleTestReport> {
    let grid = curve.grid;
    let idx = grid.checkpoints(mc.checkpoints);
    let parts = map_blocks(mc.n_paths, |first, count| -> Result<ProcessMoments> {
        let returns = simulate_paths(market, &grid, first, count, mc.seed);
        let opt = wealth_path(&returns, optimal, x0, prefs.mode)?;
        let dual = dual_process(curve, prefs, &opt)?;
        let wealth = if strategy == optimal { opt } else { wealth_path(&returns, strategy, x0, prefs.mode)? };
        Ok(deflator_moments(&wealth, &dual.paths, &idx))
    });
    let mut total = ProcessMoments::new(idx.len());
    for part in parts {
        total.merge(&part?);
    }
    if total.total.n == 0 {
        return Err(Error::AllPathsRejected { n_paths: mc.n_paths });
    }
    Ok(total.report(idx.iter().map(|&k| grid.time(k).to_f64_lossy()).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_returns, TimeGrid};
    use crate::opportunity::l_closed_form;

    #[test]
    fn verdict_bands() {
        let e = |mean, se| Estimate { mean, se, n: 100 };
        assert_eq!(verdict(&e(0.1, 0.05), 1.0), Verdict::ConsistentMartingale);
        assert_eq!(verdict(&e(-0.2, 0.05), 1.0), Verdict::ConsistentSupermartingale);
        assert_eq!(verdict(&e(0.2, 0.05), 1.0), Verdict::Violation);
        assert_eq!(verdict(&e(1e-15, 0.0), 1.0), Verdict::ConsistentMartingale);
    }

    #[test]
    fn no_trade_processes_are_constant() {
        let grid = TimeGrid::new(1.0, 50).unwrap();
        let market = LevyMarket::<f64>::no_trade(1, 1.0).unwrap();
        for p in [0.5, -1.0] {
            let prefs = Preferences::standard(p, 1.0).unwrap();
            let curve = l_closed_form(0.0, p, &grid).unwrap();
            let strat = Strategy::new(vec![0.0], curve.kappa.clone());
            let w = wealth_path(&simulate_returns(&market, &grid, 4, 3), &strat, 2.0, prefs.mode).unwrap();
            let r = primal_martingale_test_on(&w, &prefs, &curve, 10).unwrap();
            let expect = 2f64.powf(1.0 - p) * 2f64.powf(p) / p;
            assert!(r.means.iter().all(|m| (m - expect).abs() < 1e-12 * expect.abs()), "{:?}", r.means);
            assert!(r.is_martingale());
            let dual = dual_process(&curve, &prefs, &w).unwrap();
            let z = dual_supermartingale_test(&w, &dual.paths, 10).unwrap();
            let xy = 2.0 * dual.y0;
            assert!(z.means.iter().all(|m| (m - xy).abs() < 1e-12 * xy), "{:?}", z.means);
        }
    }
}
