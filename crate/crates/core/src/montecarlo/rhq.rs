//! Reverse Hölder inequalities for positive (super)martingale deflators:
//!
//! ```text
//! ∫_τ^T E[(Y_s/Y_τ)^q] μ°(ds) <= C_q   (q < 0)
//! ∫_τ^T E[(Y_s/Y_τ)^q] μ°(ds) >= C_q   (0 < q < 1)
//! ```
//!
//! checked on deterministic grids of τ. With independent increments the
//! conditional expectation from τ equals the unconditional average of the
//! ratio, so plain path averages are used.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::duality::dual_process;
use crate::error::{Error, Result};
use crate::market::{path_rng, simulate_paths, wealth_path, ConsumptionMode, LevyMarket, PathBundle, Preferences, Strategy};
use crate::opportunity::OpportunityCurve;
use crate::scalar::Scalar;

use super::martingale::SE_BAND;
use super::stats::{map_blocks, trapezoid, Estimate, Moments};
use super::McConfig;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RhqReport {
    pub q: f64,
    pub tau_grid: Vec<f64>,
    pub estimates: Vec<Estimate>,
    /// Largest estimate for `q < 0`, smallest for `0 < q < 1`.
    pub implied_cq: f64,
    /// Constant the estimates were compared with, if any.
    pub constant: Option<f64>,
    pub holds: bool,
}

/// Per-τ moments of `∫_τ^T (Y_s/Y_τ)^q μ°(ds)`, mergeable across blocks.
pub fn rhq_moments<T: Scalar>(paths: &PathBundle<T>, q: f64, mode: ConsumptionMode, tau_idx: &[usize]) -> Vec<Moments> {
    let grid = paths.grid;
    let n = grid.n_steps;
    let dt = grid.dt().to_f64_lossy();
    let mut out = vec![Moments::default(); tau_idx.len()];
    let mut buf = Vec::with_capacity(n + 1);
    for i in paths.retained() {
        let ys = paths.dual_path(i);
        for (m, &k) in out.iter_mut().zip(tau_idx) {
            let base = ys[k].to_f64_lossy();
            buf.clear();
            buf.extend(ys[k..].iter().map(|&y| (y.to_f64_lossy() / base).powf(q)));
            let running = match mode {
                ConsumptionMode::WithConsumption => trapezoid(&buf, dt),
                ConsumptionMode::TerminalOnly => 0.0,
            };
            m.push(running + buf[buf.len() - 1]);
        }
    }
    out
}

impl RhqReport {
    pub fn from_moments(q: f64, tau_grid: Vec<f64>, moments: &[Moments], constant: Option<f64>) -> Self {
        let estimates: Vec<Estimate> = moments.iter().map(Moments::estimate).collect();
        let means = estimates.iter().map(|e| e.mean);
        let implied_cq = if q < 0.0 { means.fold(f64::NEG_INFINITY, f64::max) } else { means.fold(f64::INFINITY, f64::min) };
        let holds = match constant {
            Some(c) => estimates.iter().all(|e| rhq_holds(q, e, c)),
            None => true,
        };
        Self { q, tau_grid, estimates, implied_cq, constant, holds }
    }

    /// Constant that holds for every τ with the sampling band added:
    /// upper confidence bound for `q < 0`, lower for `0 < q < 1`.
    pub fn conservative_cq(&self) -> f64 {
        let band = |e: &Estimate| if self.q < 0.0 { e.mean + SE_BAND * e.se } else { e.mean - SE_BAND * e.se };
        let vals = self.estimates.iter().map(band);
        if self.q < 0.0 {
            vals.fold(f64::NEG_INFINITY, f64::max)
        } else {
            vals.fold(f64::INFINITY, f64::min)
        }
    }
}

fn rhq_holds(q: f64, e: &Estimate, c: f64) -> bool {
    let slack = SE_BAND * e.se + 1e-12 * c.abs().max(1.0);
    if q < 0.0 {
        e.mean <= c + slack
    } else {
        e.mean >= c - slack
    }
}

/// Estimates the reverse Hölder functional for each τ in `tau_idx` from the
/// dual layer of `paths`, optionally comparing with `constant`.
pub fn rhq_estimate<T: Scalar>(
    paths: &PathBundle<T>,
    q: f64,
    prefs: &Preferences<T>,
    tau_idx: &[usize],
    constant: Option<f64>,
) -> Result<RhqReport> {
    check_q(q)?;
    if paths.dual.is_empty() {
        return Err(Error::InvalidParameter("bundle has no dual layer".into()));
    }
    let moments = rhq_moments(paths, q, prefs.mode, tau_idx);
    let taus = tau_idx.iter().map(|&k| paths.grid.time(k).to_f64_lossy()).collect();
    Ok(RhqReport::from_moments(q, taus, &moments, constant))
}

fn check_q(q: f64) -> Result<()> {
    if !(q < 1.0) || q == 0.0 || !q.is_finite() {
        return Err(Error::InvalidParameter(format!("reverse Hölder exponent must lie in (-inf, 0) or (0, 1), got {q}")));
    }
    Ok(())
}

/// Transfers a reverse Hölder constant from exponent `q` to `q1`.
///
/// * `q < q1 < 0` or `0 < q < q1 < 1`: `M^{1 - q1/q} C^{q1/q}` (Jensen),
/// * `q < 0 < q1 < 1`: `C^{q1/q}`,
/// * `0 < q1 < q < 1`: `M^{(q1-q)/(1-q)} C^{(1-q1)/(1-q)}` (Hölder, using
///   that the ratios have mean at most one),
///
/// where `M = μ°[0,T]`. Other orderings are not covered.
pub fn rhq_constant_transfer(cq: f64, q: f64, q1: f64, mu_total: f64) -> Result<f64> {
    check_q(q)?;
    check_q(q1)?;
    if !(cq > 0.0) || !(mu_total > 0.0) {
        return Err(Error::InvalidParameter("constants must be positive".into()));
    }
    if q == q1 {
        return Ok(cq);
    }
    let mismatch = Err(Error::RegimeMismatch { q, q1 });
    if q < q1 && (q1 < 0.0 || q > 0.0) {
        Ok(mu_total.powf(1.0 - q1 / q) * cq.powf(q1 / q))
    } else if q < 0.0 && q1 > 0.0 {
        Ok(cq.powf(q1 / q))
    } else if 0.0 < q1 && q1 < q {
        Ok(mu_total.powf((q1 - q) / (1.0 - q)) * cq.powf((1.0 - q1) / (1.0 - q)))
    } else {
        mismatch
    }
}

/// One transfer of the dichotomy check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransferCheck {
    pub from_q: f64,
    pub to_q: f64,
    /// Transferred constant at each τ.
    pub transferred: Vec<f64>,
    /// Smallest `estimate + 3 se - transferred` over τ.
    pub worst_margin: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DichotomyReport {
    pub checks: Vec<TransferCheck>,
    pub passed: bool,
}

/// For every ordered pair of reports with exponents in `(0, 1)` on the same
/// τ grid, transfers the estimate at each τ (lowered by its band) to the
/// other exponent with mass `μ°[τ,T]` and checks the other estimate against
/// it. The uniform constant is useless here: at `τ = T` the functional is
/// `μ°{T} = 1`, so the smallest constant over τ carries no information.
pub fn dichotomy_check(reports: &[RhqReport], masses: &[f64]) -> Result<DichotomyReport> {
    let mut checks = Vec::new();
    for a in reports {
        if a.estimates.len() != masses.len() {
            return Err(Error::GridMismatch("one mass per τ is needed".into()));
        }
        for b in reports {
            if a.q == b.q {
                continue;
            }
            if !(a.q > 0.0 && b.q > 0.0) {
                return Err(Error::RegimeMismatch { q: a.q, q1: b.q });
            }
            if a.tau_grid != b.tau_grid {
                return Err(Error::GridMismatch("reports use different τ grids".into()));
            }
            let mut transferred = Vec::with_capacity(masses.len());
            let mut worst = f64::INFINITY;
            for ((ea, eb), &m) in a.estimates.iter().zip(&b.estimates).zip(masses) {
                let c = (ea.mean - SE_BAND * ea.se).max(f64::MIN_POSITIVE);
                let t = rhq_constant_transfer(c, a.q, b.q, m)?;
                worst = worst.min(eb.mean + SE_BAND * eb.se + 1e-12 * t - t);
                transferred.push(t);
            }
            checks.push(TransferCheck { from_q: a.q, to_q: b.q, transferred, worst_margin: worst, holds: worst >= 0.0 });
        }
    }
    let passed = checks.iter().all(|c| c.holds);
    Ok(DichotomyReport { checks, passed })
}

/// `φ(q) = E[R^q]^{1/(1-q)}` for samples of a ratio `R = Y_s / Y_t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhiCurve {
    pub q: Vec<f64>,
    pub phi: Vec<Estimate>,
    /// `φ(q) >= φ(q') - 3 se` for adjacent `q < q'`.
    pub monotone: bool,
    /// `exp(-E[R log R])`, the limit of `φ` as `q -> 1`.
    pub entropy_limit: Estimate,
}

pub fn phi_curve(ratios: &[f64], q_grid: &[f64]) -> Result<PhiCurve> {
    if q_grid.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
        return Err(Error::InvalidParameter("phi is defined for q in (0, 1)".into()));
    }
    if ratios.iter().any(|&r| !(r > 0.0)) {
        return Err(Error::InvalidParameter("ratios must be positive".into()));
    }
    let phi: Vec<Estimate> = q_grid
        .iter()
        .map(|&q| {
            let m: Moments = ratios.iter().map(|r| r.powf(q)).collect();
            let e = 1.0 / (1.0 - q);
            let value = m.mean().powf(e);
            // delta method
            Estimate { mean: value, se: value * e * m.std_error() / m.mean(), n: m.n }
        })
        .collect();
    let monotone = phi.windows(2).all(|w| w[0].mean >= w[1].mean - SE_BAND * w[0].se.max(w[1].se));
    let ent: Moments = ratios.iter().map(|r| r * r.ln()).collect();
    let lim = (-ent.mean()).exp();
    let entropy_limit = Estimate { mean: lim, se: lim * ent.std_error(), n: ent.n };
    Ok(PhiCurve { q: q_grid.to_vec(), phi, monotone, entropy_limit })
}

/// `φ(q) = exp(-σ² q / 2)` for a lognormal martingale ratio with log-variance `σ²`.
pub fn phi_lognormal(sigma2: f64, q: f64) -> f64 {
    (-sigma2 * q / 2.0).exp()
}

/// Samples of `exp(σ Z - σ²/2)`, one ChaCha stream per sample.
pub fn lognormal_ratios(sigma2: f64, n: usize, seed: u64) -> Vec<f64> {
    let s = sigma2.sqrt();
    (0..n as u64)
        .map(|i| {
            let z: f64 = path_rng(seed, i).sample(StandardNormal);
            (s * z - sigma2 / 2.0).exp()
        })
        .collect()
}

/// `Y_s / Y_t` on the retained paths of a bundle's dual layer.
pub fn ratios<T: Scalar>(paths: &PathBundle<T>, t_idx: usize, s_idx: usize) -> Vec<f64> {
    paths.retained().map(|i| (paths.dual_at(i, s_idx) / paths.dual_at(i, t_idx)).to_f64_lossy()).collect()
}

/// Simulates the optimal triple in blocks and returns, for each exponent in
/// `qs`, the per-τ moments of the reverse Hölder functional of `Ŷ`.
#[allow(clippy::too_many_arguments)]
pub fn optimal_dual_rhq<T: Scalar>(
    market: &LevyMarket<T>,
    prefs: &Preferences<T>,
    curve: &OpportunityCurve<T>,
    y_star: &[T],
    x0: T,
    qs: &[f64],
    tau_idx: &[usize],
    mc: &McConfig,
) -> Result<Vec<RhqReport>> {
    for &q in qs {
        check_q(q)?;
    }
    let strategy = Strategy::new(y_star.to_vec(), curve.kappa.clone());
    let grid = curve.grid;
    let parts = map_blocks(mc.n_paths, |first, count| -> Result<Vec<Vec<Moments>>> {
        let returns = simulate_paths(market, &grid, first, count, mc.seed);
        let wealth = wealth_path(&returns, &strategy, x0, prefs.mode)?;
        let dual = dual_process(curve, prefs, &wealth)?;
        Ok(qs.iter().map(|&q| rhq_moments(&dual.paths, q, prefs.mode, tau_idx)).collect())
    });
    let mut total = vec![vec![Moments::default(); tau_idx.len()]; qs.len()];
    for part in parts {
        for (acc, block) in total.iter_mut().zip(part?) {
            for (a, b) in acc.iter_mut().zip(&block) {
                a.merge(b);
            }
        }
    }
    let taus: Vec<f64> = tau_idx.iter().map(|&k| grid.time(k).to_f64_lossy()).collect();
    Ok(qs.iter().zip(&total).map(|(&q, m)| RhqReport::from_moments(q, taus.clone(), m, None)).collect())
}

/// `Ŷ_s / Ŷ_t` along simulated optimal paths.
pub fn optimal_dual_ratios<T: Scalar>(
    market: &LevyMarket<T>,
    prefs: &Preferences<T>,
    curve: &OpportunityCurve<T>,
    y_star: &[T],
    x0: T,
    (t_idx, s_idx): (usize, usize),
    mc: &McConfig,
) -> Result<Vec<f64>> {
    let strategy = Strategy::new(y_star.to_vec(), curve.kappa.clone());
    let grid = curve.grid;
    let parts = map_blocks(mc.n_paths, |first, count| -> Result<Vec<f64>> {
        let returns = simulate_paths(market, &grid, first, count, mc.seed);
        let wealth = wealth_path(&returns, &strategy, x0, prefs.mode)?;
        Ok(ratios(&dual_process(curve, prefs, &wealth)?.paths, t_idx, s_idx))
    });
    let mut out = Vec::with_capacity(mc.n_paths);
    for part in parts {
        out.extend(part?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transfer_examples() {
        assert_eq!(rhq_constant_transfer(3.0, 0.4, 0.4, 2.0).unwrap(), 3.0);
        assert!((rhq_constant_transfer(4.0, -1.0, 0.5, 2.0).unwrap() - 0.5).abs() < 1e-15);
        let c = 1.7;
        assert!((rhq_constant_transfer(c, 0.25, 0.5, 2.0).unwrap() - c * c / 2.0).abs() < 1e-14);
        assert!((rhq_constant_transfer(c, -2.0, -1.0, 2.0).unwrap() - 2f64.sqrt() * c.sqrt()).abs() < 1e-14);
        // converse: exponents (q1-q)/(1-q) and (1-q1)/(1-q)
        let v = rhq_constant_transfer(c, 0.5, 0.25, 2.0).unwrap();
        assert!((v - 2f64.powf(-0.5) * c.powf(1.5)).abs() < 1e-14);
        assert!(matches!(rhq_constant_transfer(c, 0.5, -1.0, 2.0), Err(Error::RegimeMismatch { .. })));
        assert!(matches!(rhq_constant_transfer(c, -1.0, -2.0, 2.0), Err(Error::RegimeMismatch { .. })));
        assert!(rhq_constant_transfer(c, 1.0, 0.5, 2.0).is_err());
    }

    #[test]
    fn converse_after_forward_is_consistent() {
        // forward then back never tightens a lower bound
        let (c, m) = (1.3, 2.0);
        let up = rhq_constant_transfer(c, 0.3, 0.7, m).unwrap();
        let back = rhq_constant_transfer(up, 0.7, 0.3, m).unwrap();
        assert!(back <= c * (1.0 + 1e-12));
    }

    #[test]
    fn dichotomy_on_lognormal_ratios() {
        // one τ with unit mass: the functional is E[R^q] = exp(σ² q(q-1)/2)
        let r = lognormal_ratios(0.09, 50_000, 3);
        let reports: Vec<RhqReport> = [0.2, 0.5, 0.8]
            .iter()
            .map(|&q| {
                let m: Moments = r.iter().map(|x| x.powf(q)).collect();
                RhqReport::from_moments(q, vec![0.0], &[m], None)
            })
            .collect();
        let d = dichotomy_check(&reports, &[1.0]).unwrap();
        assert_eq!(d.checks.len(), 6);
        assert!(d.passed, "{:?}", d.checks);
        // an inflated estimate breaks the transfer towards smaller exponents
        let mut bad = reports.clone();
        bad[2].estimates[0].mean = 1.0;
        bad[2].estimates[0].se = 0.0;
        assert!(!dichotomy_check(&bad, &[1.0]).unwrap().passed);
        assert!(dichotomy_check(&reports, &[1.0, 2.0]).is_err());
    }

    #[test]
    fn constant_ratio_phi_is_one() {
        let r = vec![1.0; 100];
        let c = phi_curve(&r, &[0.1, 0.5, 0.9]).unwrap();
        assert!(c.phi.iter().all(|e| (e.mean - 1.0).abs() < 1e-15));
        assert!(c.monotone);
        assert_eq!(c.entropy_limit.mean, 1.0);
    }

    #[test]
    fn deterministic_decreasing_ratio() {
        // R = b < 1 gives φ(q) = b^{q/(1-q)}, decreasing in q
        let r = vec![0.8; 10];
        let c = phi_curve(&r, &[0.1, 0.3, 0.5, 0.7, 0.9]).unwrap();
        for (q, e) in c.q.iter().zip(&c.phi) {
            assert!((e.mean - 0.8f64.powf(q / (1.0 - q))).abs() < 1e-14);
        }
        assert!(c.monotone);
    }

    #[test]
    fn lognormal_phi() {
        let r = lognormal_ratios(0.04, 100_000, 11);
        let c = phi_curve(&r, &[0.2, 0.5, 0.8]).unwrap();
        for (q, e) in c.q.iter().zip(&c.phi) {
            assert!(e.within(phi_lognormal(0.04, *q), 3.0), "q={q} {:?}", e);
        }
        assert!(c.entropy_limit.within((-0.02f64).exp(), 3.0));
        assert!(c.monotone);
    }
}
