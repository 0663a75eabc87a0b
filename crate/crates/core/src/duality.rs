//! Dual objects: the conjugate utility, the dual optimizer `Ŷ = L X̂^{p-1}`
//! and the identities linking primal and dual values.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{ConsumptionMode, PathBundle, Preferences};
use crate::montecarlo::stats::{map_blocks, trapezoid, Estimate, Moments};
use crate::opportunity::OpportunityCurve;
use crate::scalar::Scalar;

/// Relative tolerance of the algebraic conjugacy identity.
pub const CONJUGACY_TOL: f64 = 1e-12;

/// Convex conjugate `U*_t(y) = sup_x {U_t(x) - xy} = -(1/q) y^q D_t^β`.
pub fn u_star<T: Scalar>(y: T, t: T, prefs: &Preferences<T>) -> T {
    -y.powf(prefs.q()) * prefs.discount.at(t).powf(prefs.beta()) / prefs.q()
}

/// Dual optimizer along simulated optimal wealth paths.
#[derive(Debug, Clone)]
pub struct DualState<T> {
    pub x0: T,
    /// `y0 = L_0 x0^{p-1}`, the marginal value of initial capital.
    pub y0: T,
    /// `-(1/q) y0^q L*_0`.
    pub dual_value: T,
    /// Wealth bundle with the dual layer filled by `Ŷ`.
    pub paths: PathBundle<T>,
    /// Largest relative deviation from `Ŷ_t = D_t ĉ_t^{p-1}` over retained
    /// paths (at `T` only when there is no intermediate consumption).
    pub identity_discrepancy: T,
}

/// `Ŷ = L X̂^{p-1}` pathwise on a bundle simulated under the optimal strategy.
pub fn dual_process<T: Scalar>(curve: &OpportunityCurve<T>, prefs: &Preferences<T>, wealth: &PathBundle<T>) -> Result<DualState<T>> {
    if !wealth.has_wealth() {
        return Err(Error::InvalidParameter("dual process needs a bundle with wealth paths".into()));
    }
    if wealth.grid != curve.grid {
        return Err(Error::GridMismatch("opportunity curve and paths use different grids".into()));
    }
    let p = prefs.p();
    let pm1 = p - T::one();
    let width = curve.grid.len();
    let times = curve.grid.times();
    let d: Vec<T> = times.iter().map(|&t| prefs.discount.at(t)).collect();
    let mut dual = vec![T::nan(); wealth.n_paths * width];
    let mut worst = T::zero();
    for i in wealth.retained() {
        let xs = wealth.wealth_path(i);
        for k in 0..width {
            let y = curve.l[k] * xs[k].powf(pm1);
            dual[i * width + k] = y;
            let check = match prefs.mode {
                ConsumptionMode::WithConsumption => true,
                ConsumptionMode::TerminalOnly => k + 1 == width,
            };
            if check {
                let marginal = d[k] * wealth.consumption_at(i, k).powf(pm1);
                worst = worst.max((y - marginal).abs() / y);
            }
        }
    }
    let first = wealth.retained().next().ok_or(Error::AllPathsRejected { n_paths: wealth.n_paths })?;
    let x0 = wealth.wealth_at(first, 0);
    let y0 = curve.l[0] * x0.powf(pm1);
    let dual_value = -y0.powf(prefs.q()) * curve.lstar[0] / prefs.q();
    let mut paths = wealth.clone();
    paths.set_dual(dual);
    Ok(DualState { x0, y0, dual_value, paths, identity_discrepancy: worst })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConjugacyReport {
    /// `u(x0) = L_0 x0^p / p`
    pub primal_value: f64,
    pub y0: f64,
    /// `-(1/q) y0^q L_0^β`
    pub dual_value: f64,
    /// `u(x0) - x0 y0`
    pub legendre_value: f64,
    pub relative_gap: f64,
    pub passed: bool,
}

/// Checks `-(1/q) y0^q L*_0 = u(x0) - x0 y0` with `y0 = L_0 x0^{p-1}`.
pub fn conjugacy_identity<T: Scalar>(l0: T, p: T, x0: T) -> ConjugacyReport {
    let one = T::one();
    let beta = one / (one - p);
    let q = p / (p - one);
    let y0 = l0 * x0.powf(p - one);
    let u = l0 * x0.powf(p) / p;
    let dual = -y0.powf(q) * l0.powf(beta) / q;
    let legendre = u - x0 * y0;
    let gap = (dual - legendre).abs() / dual.abs().max(legendre.abs()).max(T::min_positive_value());
    let gap = gap.to_f64_lossy();
    ConjugacyReport {
        primal_value: u.to_f64_lossy(),
        y0: y0.to_f64_lossy(),
        dual_value: dual.to_f64_lossy(),
        legendre_value: legendre.to_f64_lossy(),
        relative_gap: gap,
        passed: gap <= CONJUGACY_TOL.max(64.0 * T::epsilon().to_f64_lossy()),
    }
}

pub fn conjugacy_check<T: Scalar>(curve: &OpportunityCurve<T>, prefs: &Preferences<T>, x0: T) -> ConjugacyReport {
    conjugacy_identity(curve.l[0], prefs.p(), x0)
}

/// Monte Carlo estimate of the dual value `E[∫ U*_t(Ŷ_t) μ°(dt)]`, the
/// `dt` part by the trapezoid rule.
pub fn dual_value_mc<T: Scalar>(state: &DualState<T>, prefs: &Preferences<T>) -> Estimate {
    dual_value_moments(&state.paths, prefs).estimate()
}

pub(crate) fn dual_value_moments<T: Scalar>(paths: &PathBundle<T>, prefs: &Preferences<T>) -> Moments {
    let grid = paths.grid;
    let times = grid.times();
    let dt = grid.dt().to_f64_lossy();
    let width = grid.len();
    let mut m = Moments::default();
    let mut buf = vec![0.0; width];
    for i in paths.retained() {
        let ys = paths.dual_path(i);
        for k in 0..width {
            buf[k] = u_star(ys[k], times[k], prefs).to_f64_lossy();
        }
        let running = match prefs.mode {
            ConsumptionMode::WithConsumption => trapezoid(&buf, dt),
            ConsumptionMode::TerminalOnly => 0.0,
        };
        m.push(running + buf[width - 1]);
    }
    m
}

/// Simulates the optimal wealth in blocks and estimates the dual value
/// without holding all paths in memory.
pub fn dual_value_blocks<T: Scalar>(
    market: &crate::market::LevyMarket<T>,
    prefs: &Preferences<T>,
    curve: &OpportunityCurve<T>,
    y_star: &[T],
    x0: T,
    n_paths: usize,
    seed: u64,
) -> Result<(Estimate, usize)> {
    let strategy = crate::market::Strategy::new(y_star.to_vec(), curve.kappa.clone());
    let parts = map_blocks(n_paths, |first, count| -> Result<(Moments, usize)> {
        let returns = crate::market::simulate_paths(market, &curve.grid, first, count, seed);
        let wealth = crate::market::wealth_path(&returns, &strategy, x0, prefs.mode)?;
        let state = dual_process(curve, prefs, &wealth)?;
        Ok((dual_value_moments(&state.paths, prefs), wealth.rejected_count()))
    });
    let mut total = Moments::default();
    let mut rejected = 0;
    for part in parts {
        let (m, r) = part?;
        total.merge(&m);
        rejected += r;
    }
    Ok((total.estimate(), rejected))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{simulate_returns, wealth_path, LevyMarket, PiecewiseDiscount, Strategy, TimeGrid};
    use crate::opportunity::l_closed_form;

    #[test]
    fn u_star_examples() {
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        assert!((u_star(2.0, 0.0, &prefs) - 0.5f64).abs() < 1e-15);
        let d = Preferences::new(0.5, PiecewiseDiscount::constant(16.0, 1.0).unwrap(), ConsumptionMode::WithConsumption).unwrap();
        assert!((u_star(1.0, 0.3, &d) - 256.0f64).abs() < 1e-12);
    }

    #[test]
    fn u_star_is_legendre_transform() {
        for (p, y) in [(0.5, 0.7), (-1.0, 1.3), (0.3, 2.0)] {
            let prefs = Preferences::standard(p, 1.0).unwrap();
            // maximizer x = y^{1/(p-1)} for D = 1
            let sup = (1..200_000)
                .map(|i| i as f64 * 1e-4)
                .map(|x| prefs.utility(0.0, x) - x * y)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((sup - u_star(y, 0.0, &prefs)).abs() < 1e-6, "p={p}");
        }
    }

    #[test]
    fn conjugacy_examples() {
        let r = conjugacy_identity(1.0, 0.5, 1.0);
        assert_eq!((r.primal_value, r.y0, r.dual_value), (2.0, 1.0, 1.0));
        assert!(r.passed);
        let r = conjugacy_identity(2f64.sqrt(), 0.5, 1.0);
        assert!(r.passed && (r.legendre_value - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn no_trade_dual_is_closed_form() {
        let grid = TimeGrid::new(1.0, 20).unwrap();
        let m = LevyMarket::<f64>::no_trade(1, 1.0).unwrap();
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let curve = l_closed_form(0.0, 0.5, &grid).unwrap();
        let r = simulate_returns(&m, &grid, 3, 1);
        let w = wealth_path(&r, &Strategy::new(vec![0.0], curve.kappa.clone()), 1.0, prefs.mode).unwrap();
        let s = dual_process(&curve, &prefs, &w).unwrap();
        assert_eq!(s.y0, 2f64.sqrt());
        assert!(s.identity_discrepancy < 1e-14);
        for (k, t) in grid.times().into_iter().enumerate() {
            let x = (2.0 - t) / 2.0;
            let expect = (2.0 - t).sqrt() / x.sqrt();
            assert!((s.paths.dual_at(1, k) / expect - 1.0).abs() < 1e-13);
        }
        let v = dual_value_mc(&s, &prefs);
        // U*(Ŷ) is constant in time here, so the trapezoid rule is exact
        assert!((v.mean - s.dual_value).abs() < 1e-12, "{} {}", v.mean, s.dual_value);
        assert!(v.se < 1e-6);
    }
}
