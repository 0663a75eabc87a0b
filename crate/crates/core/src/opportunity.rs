//! Deterministic opportunity process `L`, its dual `L* = L^β` and the optimal
//! propensity to consume `κ̂ = (D/L)^β` for exponential Lévy markets.
//!
//! With intermediate consumption, `M = L^β` solves the linear terminal-value
//! problem `M' = -a M - D^β`, `M_T = D_T^β` where `a = p ḡ / (1-p)`. For
//! `D ≡ 1` this gives `M = ((1+a) e^{aτ} - 1) / a`, `τ = T - t`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market::{ConsumptionMode, PiecewiseDiscount, Preferences, TimeGrid};
use crate::scalar::Scalar;

/// Below this `|a|` the closed form switches to its `a -> 0` limit.
pub const A_SWITCH: f64 = 1e-8;
/// Number of steps the ODE integrator uses at least on `[0, T]`.
pub const ODE_MIN_STEPS: usize = 2000;
pub const ODE_MAX_HALVINGS: usize = 10;
/// Tolerance of the pointwise bound and threshold comparisons.
pub const BOUND_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveSource {
    ClosedForm,
    Ode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpportunityCurve<T> {
    pub grid: TimeGrid<T>,
    pub l: Vec<T>,
    pub lstar: Vec<T>,
    pub kappa: Vec<T>,
    pub a_param: T,
    pub source: CurveSource,
    pub mode: ConsumptionMode,
}

impl<T: Scalar> OpportunityCurve<T> {
    fn assemble(grid: TimeGrid<T>, l: Vec<T>, kappa: Vec<T>, p: T, a: T, source: CurveSource, mode: ConsumptionMode) -> Self {
        let beta = T::one() / (T::one() - p);
        let lstar = l.iter().map(|&v| v.powf(beta)).collect();
        Self { grid, l, lstar, kappa, a_param: a, source, mode }
    }

    pub fn times(&self) -> Vec<T> {
        self.grid.times()
    }

    pub fn l0(&self) -> T {
        self.l[0]
    }

    /// `L` at the grid point nearest to `t`.
    pub fn l_at(&self, t: T) -> T {
        self.l[self.grid.index_of(t)]
    }
}

/// `a = p ḡ / (1 - p)`.
pub fn a_param<T: Scalar>(g_bar: T, p: T) -> T {
    p * g_bar / (T::one() - p)
}

/// `((1+a) e^{aτ} - 1) / a`, written as `e^{aτ} + expm1(aτ)/a` to avoid the
/// cancellation for small `a`.
fn m_closed<T: Scalar>(a: T, tau: T) -> T {
    if a.abs() < T::lit(A_SWITCH) {
        T::one() + tau
    } else {
        (a * tau).exp() + (a * tau).exp_m1() / a
    }
}

/// Closed form with intermediate consumption and `D ≡ 1`.
pub fn l_closed_form<T: Scalar>(a: T, p: T, grid: &TimeGrid<T>) -> Result<OpportunityCurve<T>> {
    if !(a > -T::one()) || !a.is_finite() {
        return Err(Error::InvalidA(a.to_f64_lossy()));
    }
    let horizon = grid.horizon;
    let small = a.abs() < T::lit(A_SWITCH);
    let mut l = Vec::with_capacity(grid.len());
    let mut kappa = Vec::with_capacity(grid.len());
    for t in grid.times() {
        let tau = horizon - t;
        if small {
            l.push((T::one() + tau).powf(T::one() - p));
            kappa.push(T::one() / (T::one() + tau));
        } else {
            let m = m_closed(a, tau);
            l.push(m.powf(T::one() - p));
            kappa.push(T::one() / m);
        }
    }
    Ok(OpportunityCurve::assemble(*grid, l, kappa, p, a, CurveSource::ClosedForm, ConsumptionMode::WithConsumption))
}

/// Without intermediate consumption: `L_t = D_T e^{p ḡ (T-t)}`, `κ = 0`
/// before `T`.
pub fn l_terminal_only<T: Scalar>(g_bar: T, p: T, grid: &TimeGrid<T>) -> OpportunityCurve<T> {
    terminal_curve(g_bar, p, T::one(), grid)
}

fn terminal_curve<T: Scalar>(g_bar: T, p: T, d_terminal: T, grid: &TimeGrid<T>) -> OpportunityCurve<T> {
    let l = grid.times().into_iter().map(|t| d_terminal * (p * g_bar * (grid.horizon - t)).exp()).collect();
    let mut kappa = vec![T::zero(); grid.len()];
    *kappa.last_mut().unwrap() = T::one();
    OpportunityCurve::assemble(*grid, l, kappa, p, a_param(g_bar, p), CurveSource::ClosedForm, ConsumptionMode::TerminalOnly)
}

/// Right-hand side `L' = -p ḡ L - (1-p) D^β L^q` (the last term only with
/// intermediate consumption).
fn rhs<T: Scalar>(l: T, p: T, g_bar: T, d_beta: T, consume: bool) -> T {
    let mut v = -p * g_bar * l;
    if consume {
        v = v - (T::one() - p) * d_beta * l.powf(p / (p - T::one()));
    }
    v
}

/// Classical RK4 backward over `[lo, hi]` in `n` equal steps, starting from
/// `l_hi` at `hi`. `None` if positivity is lost.
#[allow(clippy::too_many_arguments)]
fn rk4_backward<T: Scalar>(l_hi: T, lo: T, hi: T, n: usize, p: T, g_bar: T, d_beta: T, consume: bool) -> Option<T> {
    let h = (hi - lo) / T::from_usize_lossy(n);
    let two = T::lit(2.0);
    let f = |l: T| if l > T::zero() { Some(rhs(l, p, g_bar, d_beta, consume)) } else { None };
    let mut l = l_hi;
    for _ in 0..n {
        // integrate in s = -t so the step is positive
        let k1 = -f(l)?;
        let k2 = -f(l + h / two * k1)?;
        let k3 = -f(l + h / two * k2)?;
        let k4 = -f(l + h * k3)?;
        l = l + h / T::lit(6.0) * (k1 + two * k2 + two * k3 + k4);
        if !(l > T::zero()) || !l.is_finite() {
            return None;
        }
    }
    Some(l)
}

/// Integrates the opportunity ODE backward from `L_T = D_T` with step at
/// most `T / 2000`, splitting steps at the discount breakpoints.
pub fn l_ode_solve<T: Scalar>(g_bar: T, prefs: &Preferences<T>, grid: &TimeGrid<T>) -> Result<OpportunityCurve<T>> {
    if !g_bar.is_finite() {
        return Err(Error::InvalidParameter(format!("maximum of g must be finite, got {g_bar}")));
    }
    check_horizon(prefs, grid)?;
    let p = prefs.p();
    let beta = prefs.beta();
    let consume = prefs.mode == ConsumptionMode::WithConsumption;
    let disc = &prefs.discount;
    let horizon = grid.horizon;
    let h_max = horizon / T::from_usize_lossy(ODE_MIN_STEPS);
    let times = grid.times();

    let mut l = vec![T::zero(); grid.len()];
    l[grid.n_steps] = disc.terminal();
    for k in (0..grid.n_steps).rev() {
        let (t0, t1) = (times[k], times[k + 1]);
        // knots inside (t0, t1) from the discount breakpoints
        let mut knots = vec![t1];
        knots.extend(disc.breakpoints().iter().rev().copied().filter(|&b| b > t0 && b < t1));
        knots.push(t0);
        let mut value = l[k + 1];
        for w in knots.windows(2) {
            let (hi, lo) = (w[0], w[1]);
            let d_beta = disc.at((hi + lo) / T::lit(2.0)).powf(beta);
            let base = ((hi - lo) / h_max).ceil().to_usize().unwrap_or(1).max(1);
            let mut solved = None;
            for halving in 0..=ODE_MAX_HALVINGS {
                if let Some(v) = rk4_backward(value, lo, hi, base << halving, p, g_bar, d_beta, consume) {
                    solved = Some(v);
                    break;
                }
            }
            value = solved.ok_or(Error::StepPositivityLoss { t: lo.to_f64_lossy(), retries: ODE_MAX_HALVINGS })?;
        }
        l[k] = value;
    }
    let kappa = feedback(&l, prefs, grid);
    Ok(OpportunityCurve::assemble(*grid, l, kappa, p, a_param(g_bar, p), CurveSource::Ode, prefs.mode))
}

fn check_horizon<T: Scalar>(prefs: &Preferences<T>, grid: &TimeGrid<T>) -> Result<()> {
    if prefs.horizon() != grid.horizon {
        return Err(Error::GridMismatch(format!("grid horizon {} differs from discount horizon {}", grid.horizon, prefs.horizon())));
    }
    Ok(())
}

fn feedback<T: Scalar>(l: &[T], prefs: &Preferences<T>, grid: &TimeGrid<T>) -> Vec<T> {
    let beta = prefs.beta();
    let times = grid.times();
    let mut kappa: Vec<T> = match prefs.mode {
        ConsumptionMode::WithConsumption => times.iter().zip(l).map(|(&t, &lt)| (prefs.discount.at(t) / lt).powf(beta)).collect(),
        ConsumptionMode::TerminalOnly => vec![T::zero(); l.len()],
    };
    *kappa.last_mut().unwrap() = T::one();
    kappa
}

/// The opportunity curve for given preferences: closed forms where they
/// apply (constant `D`, by homogeneity `L(D ≡ k) = k L(D ≡ 1)`), the ODE
/// otherwise.
pub fn opportunity_curve<T: Scalar>(g_bar: T, prefs: &Preferences<T>, grid: &TimeGrid<T>) -> Result<OpportunityCurve<T>> {
    check_horizon(prefs, grid)?;
    let p = prefs.p();
    match prefs.mode {
        // only D_T enters without intermediate consumption
        ConsumptionMode::TerminalOnly => Ok(terminal_curve(g_bar, p, prefs.discount.terminal(), grid)),
        ConsumptionMode::WithConsumption if prefs.discount.is_constant() => {
            let mut curve = l_closed_form(a_param(g_bar, p), p, grid)?;
            let k = prefs.discount.values()[0];
            if k != T::one() {
                curve = OpportunityCurve::assemble(*grid, curve.l.iter().map(|&v| k * v).collect(), curve.kappa, p, curve.a_param, curve.source, curve.mode);
            }
            Ok(curve)
        }
        ConsumptionMode::WithConsumption => l_ode_solve(g_bar, prefs, grid),
    }
}

/// `κ̂_t = (D_t / L_t)^β`, with `κ̂ = 0` before `T` when there is no
/// intermediate consumption.
pub fn kappa_hat<T: Scalar>(curve: &OpportunityCurve<T>, prefs: &Preferences<T>) -> Vec<T> {
    feedback(&curve.l, prefs, &curve.grid)
}

/// Pointwise comparison of `L` with the no-trade bound
/// `B_t = μ°[t,T]^{-p} ∫_t^T D_s μ°(ds)`: `L ≥ B` for `p > 0`, `L ≤ B` for
/// `p < 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport<T> {
    pub bound: Vec<T>,
    /// Signed slack, nonnegative when the bound holds.
    pub slack: Vec<T>,
    pub bound_lo: Vec<T>,
    pub bound_hi: Vec<T>,
    /// Uniform bound: `k1` for `p > 0`, `k2 μ°[t,T]^{1-p}` for `p < 0`.
    pub uniform: Vec<T>,
    pub holds: bool,
    /// Equality (to tolerance) at every grid point.
    pub equality: bool,
    /// Strict inequality at every grid point before `T`.
    pub strict: bool,
}

pub fn bounds_check<T: Scalar>(curve: &OpportunityCurve<T>, prefs: &Preferences<T>) -> BoundReport<T> {
    let p = prefs.p();
    let disc = &prefs.discount;
    let tol = T::lit(BOUND_TOL);
    let times = curve.times();
    let n = times.len();
    let mut rep = BoundReport {
        bound: Vec::with_capacity(n),
        slack: Vec::with_capacity(n),
        bound_lo: Vec::with_capacity(n),
        bound_hi: Vec::with_capacity(n),
        uniform: Vec::with_capacity(n),
        holds: true,
        equality: true,
        strict: true,
    };
    for (k, &t) in times.iter().enumerate() {
        let mass = prefs.mu_circ_mass(t);
        let b = mass.powf(-p) * disc.integral_mu_circ(t, curve.mode);
        let l = curve.l[k];
        let (slack, uniform) = if p > T::zero() {
            (l - b, disc.k1())
        } else {
            (b - l, disc.k2() * mass.powf(T::one() - p))
        };
        let scaled = tol * b.abs().max(T::one());
        rep.holds &= slack >= -scaled;
        let uniform_ok = if p > T::zero() { l >= uniform - scaled } else { l <= uniform + scaled };
        rep.holds &= uniform_ok;
        rep.equality &= slack.abs() <= scaled;
        if k + 1 < n {
            rep.strict &= slack > scaled;
        }
        if p > T::zero() {
            rep.bound_lo.push(b);
            rep.bound_hi.push(T::infinity());
        } else {
            rep.bound_lo.push(T::zero());
            rep.bound_hi.push(b);
        }
        rep.bound.push(b);
        rep.slack.push(slack);
        rep.uniform.push(uniform);
    }
    rep
}

/// Model-independent threshold `1/(1+T-t)` for the propensity to consume,
/// widened by `(k2/k1)^β` (for `p > 0`, an upper bound) or narrowed by
/// `(k1/k2)^β` (for `p < 0`, a lower bound) under non-constant `D`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdReport<T> {
    pub threshold: Vec<T>,
    /// `true` when the threshold bounds `κ̂` from above.
    pub upper: bool,
    pub passed: bool,
    /// `κ̂` equals the threshold at every grid point.
    pub equality: bool,
    pub max_violation: T,
}

pub fn threshold_check<T: Scalar>(curve: &OpportunityCurve<T>, prefs: &Preferences<T>) -> Result<ThresholdReport<T>> {
    if prefs.mode != ConsumptionMode::WithConsumption {
        return Err(Error::InvalidParameter("the consumption threshold needs intermediate consumption".into()));
    }
    let p = prefs.p();
    let upper = p > T::zero();
    let ratio = prefs.discount.k2() / prefs.discount.k1();
    let factor = if upper { ratio } else { T::one() / ratio }.powf(prefs.beta());
    let tol = T::lit(BOUND_TOL);
    let kappa = kappa_hat(curve, prefs);
    let mut rep = ThresholdReport { threshold: Vec::new(), upper, passed: true, equality: true, max_violation: T::zero() };
    for (k, t) in curve.times().into_iter().enumerate() {
        let th = factor / (curve.grid.horizon - t + T::one());
        let excess = if upper { kappa[k] - th } else { th - kappa[k] };
        rep.max_violation = rep.max_violation.max(excess);
        rep.passed &= excess <= tol;
        rep.equality &= (kappa[k] - th).abs() <= tol;
        rep.threshold.push(th);
    }
    Ok(rep)
}

/// Exact `L` for piecewise-constant `D` from the linear equation for
/// `M = L^β`; used to cross-check the integrator.
pub fn l_piecewise_exact<T: Scalar>(g_bar: T, prefs: &Preferences<T>, t: T) -> T {
    let p = prefs.p();
    let beta = prefs.beta();
    let disc: &PiecewiseDiscount<T> = &prefs.discount;
    if prefs.mode == ConsumptionMode::TerminalOnly {
        return disc.terminal() * (p * g_bar * (disc.horizon() - t)).exp();
    }
    let a = a_param(g_bar, p);
    let mut m = disc.terminal().powf(beta);
    for (lo, hi, v) in disc.pieces().into_iter().rev() {
        if hi <= t {
            break;
        }
        let tau = hi - lo.max(t);
        let growth = if a.abs() < T::lit(A_SWITCH) { tau } else { (a * tau).exp_m1() / a };
        m = m * (a * tau).exp() + v.powf(beta) * growth;
    }
    m.powf(T::one() - p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(n: usize) -> TimeGrid<f64> {
        TimeGrid::new(1.0, n).unwrap()
    }

    #[test]
    fn a_param_examples() {
        assert_eq!(a_param(0.0625, 0.5), 0.0625);
        assert_eq!(a_param(0.0, 0.5), 0.0);
        assert_eq!(a_param(0.0625, -1.0), -0.03125);
    }

    #[test]
    fn no_trade_closed_form() {
        let c = l_closed_form(0.0, 0.5, &grid(10)).unwrap();
        assert!((c.l[0] - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(c.kappa[0], 0.5);
        assert_eq!(*c.l.last().unwrap(), 1.0);
        assert_eq!(*c.kappa.last().unwrap(), 1.0);
    }

    #[test]
    fn merton_closed_form() {
        let c = l_closed_form(0.0625, 0.5, &grid(10)).unwrap();
        assert!((c.l[0] - 1.447897027279085).abs() < 1e-13);
        assert!((c.kappa[0] - 0.477006884466293).abs() < 1e-13);
        assert_eq!((c.l[10], c.kappa[10]), (1.0, 1.0));
        for (l, ls) in c.l.iter().zip(&c.lstar) {
            assert!((l.powf(2.0) - ls).abs() <= 1e-12 * ls);
        }
    }

    #[test]
    fn small_a_matches_limit() {
        let c = l_closed_form(1e-9, 0.5, &grid(4)).unwrap();
        assert!((c.l[0] / 2f64.sqrt() - 1.0).abs() < 1e-7);
        // both branches agree at the switch
        let above: f64 = m_closed(1.0001e-8, 1.0);
        assert!((above / 2.0 - 1.0).abs() < 1e-7);
    }

    #[test]
    fn invalid_a() {
        assert!(matches!(l_closed_form(-1.0, -2.0, &grid(4)), Err(Error::InvalidA(_))));
        assert!(l_closed_form(-0.9, -2.0, &grid(4)).is_ok());
    }

    #[test]
    fn terminal_only() {
        let c = l_terminal_only(0.0625, 0.5, &grid(4));
        assert!((c.l[0] - 1.0317434074991027).abs() < 1e-15);
        assert_eq!(c.l[4], 1.0);
        assert_eq!(c.kappa, vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(l_terminal_only(0.0, -3.0, &grid(4)).l.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn ode_matches_closed_form() {
        for (g_bar, p) in [(0.0625, 0.5), (0.0625, -1.0), (0.0, 0.5), (0.3, 0.9)] {
            let prefs = Preferences::standard(p, 1.0).unwrap();
            let ode = l_ode_solve(g_bar, &prefs, &grid(2000)).unwrap();
            let cf = l_closed_form(a_param(g_bar, p), p, &grid(2000)).unwrap();
            for (a, b) in ode.l.iter().zip(&cf.l) {
                assert!((a / b - 1.0).abs() < 1e-10);
            }
            assert_eq!(ode.source, CurveSource::Ode);
        }
    }

    #[test]
    fn ode_homogeneous_in_constant_discount() {
        for mode in [ConsumptionMode::WithConsumption, ConsumptionMode::TerminalOnly] {
            let one = Preferences::new(0.5, PiecewiseDiscount::unit(1.0), mode).unwrap();
            let k = Preferences::new(0.5, PiecewiseDiscount::constant(3.0, 1.0).unwrap(), mode).unwrap();
            let a = l_ode_solve(0.1, &one, &grid(50)).unwrap();
            let b = l_ode_solve(0.1, &k, &grid(50)).unwrap();
            for (x, y) in a.l.iter().zip(&b.l) {
                assert!((3.0 * x / y - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ode_matches_piecewise_exact() {
        let d = PiecewiseDiscount::new(vec![0.25, 0.55, 1.0], vec![1.0, 2.0, 0.7, 1.3], 1.0).unwrap();
        for p in [0.5, -1.0] {
            let prefs = Preferences::new(p, d.clone(), ConsumptionMode::WithConsumption).unwrap();
            let g = grid(40);
            let c = l_ode_solve(0.08, &prefs, &g).unwrap();
            for (k, t) in g.times().into_iter().enumerate() {
                let exact = l_piecewise_exact(0.08, &prefs, t);
                assert!((c.l[k] / exact - 1.0).abs() < 1e-11, "p={p} t={t}");
            }
            assert_eq!(c.l[40], 1.3);
            assert_eq!(c.kappa[40], 1.0);
        }
    }

    #[test]
    fn bounds_no_trade_equality() {
        for p in [0.5, -1.0] {
            let prefs = Preferences::standard(p, 1.0).unwrap();
            let c = l_closed_form(0.0, p, &grid(20)).unwrap();
            let r = bounds_check(&c, &prefs);
            assert!(r.holds && r.equality && !r.strict);
        }
    }

    #[test]
    fn bounds_strict_with_trading() {
        let pos = Preferences::standard(0.5, 1.0).unwrap();
        let c = l_closed_form(0.0625, 0.5, &grid(20)).unwrap();
        let r = bounds_check(&c, &pos);
        assert!(r.holds && r.strict && c.l[0] > 2f64.sqrt());
        let neg = Preferences::standard(-1.0, 1.0).unwrap();
        let c = l_closed_form(a_param(0.0625, -1.0), -1.0, &grid(20)).unwrap();
        let r = bounds_check(&c, &neg);
        assert!(r.holds && r.strict && c.l[0] <= 4.0);
    }

    #[test]
    fn threshold_signs() {
        let pos = Preferences::standard(0.5, 1.0).unwrap();
        let c = l_closed_form(0.0625, 0.5, &grid(20)).unwrap();
        let r = threshold_check(&c, &pos).unwrap();
        assert!(r.passed && r.upper && !r.equality);
        let neg = Preferences::standard(-1.0, 1.0).unwrap();
        let c = l_closed_form(a_param(0.0625, -1.0), -1.0, &grid(20)).unwrap();
        let r = threshold_check(&c, &neg).unwrap();
        assert!(r.passed && !r.upper);
        let c = l_closed_form(0.0, -1.0, &grid(20)).unwrap();
        assert!(threshold_check(&c, &neg).unwrap().equality);
    }

    #[test]
    fn dispatcher_uses_closed_forms() {
        let prefs = Preferences::new(0.5, PiecewiseDiscount::constant(2.0, 1.0).unwrap(), ConsumptionMode::WithConsumption).unwrap();
        let c = opportunity_curve(0.0625, &prefs, &grid(10)).unwrap();
        assert_eq!(c.source, CurveSource::ClosedForm);
        assert_eq!(c.l[10], 2.0);
        let k = kappa_hat(&c, &prefs);
        for (a, b) in k.iter().zip(&c.kappa) {
            assert!((a - b).abs() < 1e-14);
        }
        let bad = Preferences::standard(0.5, 2.0).unwrap();
        assert!(matches!(opportunity_curve(0.0, &bad, &grid(10)), Err(Error::GridMismatch(_))));
    }
}
