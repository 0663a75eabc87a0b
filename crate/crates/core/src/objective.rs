//! The deterministic concave objective
//!
//! ```text
//! g(y) = y.b + (p-1)/2 y'cy + ∫ [ ((1+y.x)^p - 1)/p - y.h(x) ] F(dx)
//! ```
//!
//! and its maximization over the admissible set. The optimal portfolio
//! proportion is the argmax; the maximum feeds the opportunity process.
//! Nothing here depends on the investor's wealth.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, solve, Matrix};
use crate::market::{constraint_set, cutoff, ConstraintSet, LevyMarket, Preferences};
use crate::scalar::Scalar;

/// Rays along which `g` keeps increasing past this norm are declared unbounded.
pub const UNBOUNDED_CAP: f64 = 1e8;
/// Final bracket width of the one-dimensional search.
pub const BRACKET_TOL: f64 = 1e-10;
/// Stopping tolerance on the (projected) gradient norm.
pub const GRADIENT_TOL: f64 = 1e-10;
/// `1 + y.x` at or below this is treated as the boundary of the domain of
/// the derivatives.
pub const BOUNDARY_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MaximizerStatus {
    Interior,
    Boundary,
    UnboundedAbove,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaximizerResult<T> {
    pub y_star: Vec<T>,
    pub value: T,
    pub status: MaximizerStatus,
    pub first_order_residual: T,
}

impl<T: Scalar> MaximizerResult<T> {
    /// Converts an unbounded outcome into an error; opportunity curves must
    /// not be built from it.
    pub fn bounded(self) -> Result<Self> {
        match self.status {
            MaximizerStatus::UnboundedAbove => Err(Error::UnboundedAbove {
                cap: UNBOUNDED_CAP,
                sup_estimate: self.value.to_f64_lossy(),
            }),
            _ => Ok(self),
        }
    }
}

struct Jump<T> {
    x: Vec<T>,
    hx: Vec<T>,
    w: T,
}

/// `g` bound to a market, an exponent and an admissible set.
pub struct GFunction<'a, T> {
    pub market: &'a LevyMarket<T>,
    pub prefs: &'a Preferences<T>,
    pub domain: ConstraintSet<T>,
    jumps: Vec<Jump<T>>,
}

impl<'a, T: Scalar> GFunction<'a, T> {
    /// Domain is the budget constraint of `market` intersected with `user`.
    pub fn new(market: &'a LevyMarket<T>, prefs: &'a Preferences<T>, user: Option<&ConstraintSet<T>>) -> Result<Self> {
        let domain = constraint_set(market, user)?;
        Ok(Self::with_domain(market, prefs, domain))
    }

    pub fn with_domain(market: &'a LevyMarket<T>, prefs: &'a Preferences<T>, domain: ConstraintSet<T>) -> Self {
        let jumps = market
            .jumps()
            .weighted_jumps()
            .iter()
            .map(|j| Jump { x: j.size.clone(), hx: cutoff(&j.size), w: j.weight })
            .collect();
        Self { market, prefs, domain, jumps }
    }

    pub fn dim(&self) -> usize {
        self.market.dim()
    }

    fn p(&self) -> T {
        self.prefs.p()
    }

    /// Smallest `1 + y.x` over the jump support (`+inf` without jumps).
    pub fn jump_margin(&self, y: &[T]) -> T {
        self.jumps.iter().map(|j| T::one() + dot(y, &j.x)).fold(T::infinity(), T::min)
    }

    fn eval_unconstrained(&self, y: &[T]) -> T {
        let p = self.p();
        let b = self.market.drift();
        let c = self.market.diffusion();
        let mut v = dot(y, b) + (p - T::one()) / T::lit(2.0) * c.quad_form(y);
        for j in &self.jumps {
            let u = dot(y, &j.x);
            let yh = dot(y, &j.hx);
            let one_plus = T::one() + u;
            let term = if one_plus > T::zero() {
                // ((1+u)^p - 1)/p without cancellation for small u
                (p * u.ln_1p()).exp_m1() / p - yh
            } else if one_plus == T::zero() && p > T::zero() {
                -T::one() / p - yh
            } else {
                return T::neg_infinity();
            };
            v = v + j.w * term;
        }
        v
    }

    /// `g(y)`, or `-inf` outside the domain.
    pub fn eval(&self, y: &[T]) -> T {
        if !self.domain.contains(y) {
            return T::neg_infinity();
        }
        self.eval_unconstrained(y)
    }

    fn check_interior(&self, y: &[T]) -> Result<()> {
        let m = self.jump_margin(y);
        if !(m > T::lit(BOUNDARY_MARGIN)) {
            return Err(Error::DomainBoundary { margin: m.to_f64_lossy() });
        }
        Ok(())
    }

    pub fn grad(&self, y: &[T]) -> Result<Vec<T>> {
        self.check_interior(y)?;
        let p = self.p();
        let mut g = self.market.drift().to_vec();
        let cy = self.market.diffusion().mul_vec(y);
        for (gi, ci) in g.iter_mut().zip(cy) {
            *gi = *gi + (p - T::one()) * ci;
        }
        for j in &self.jumps {
            let f = (T::one() + dot(y, &j.x)).powf(p - T::one());
            for ((gi, &xi), &hi) in g.iter_mut().zip(&j.x).zip(&j.hx) {
                *gi = *gi + j.w * (f * xi - hi);
            }
        }
        Ok(g)
    }

    pub fn hess(&self, y: &[T]) -> Result<Matrix<T>> {
        self.check_interior(y)?;
        let pm1 = self.p() - T::one();
        let mut h = self.market.diffusion().scale(pm1);
        for j in &self.jumps {
            let f = (T::one() + dot(y, &j.x)).powf(self.p() - T::lit(2.0));
            h.add_outer(&j.x, pm1 * j.w * f);
        }
        Ok(h)
    }

    /// `(y, g(y))` on `n` equispaced points of `[lo, hi]` (dimension one).
    pub fn scan(&self, lo: T, hi: T, n: usize) -> Vec<(T, T)> {
        let n = n.max(2);
        let step = (hi - lo) / T::from_usize_lossy(n - 1);
        (0..n)
            .map(|i| {
                let y = if i == n - 1 { hi } else { lo + step * T::from_usize_lossy(i) };
                (y, self.eval(&[y]))
            })
            .collect()
    }

    pub fn maximize(&self) -> Result<MaximizerResult<T>> {
        if self.dim() == 1 {
            self.maximize_1d()
        } else {
            self.maximize_nd()
        }
    }

    fn derivative_1d(&self, y: T) -> Option<T> {
        self.grad(&[y]).ok().map(|g| g[0])
    }

    fn second_derivative_1d(&self, y: T) -> Option<T> {
        self.hess(&[y]).ok().map(|h| h[(0, 0)])
    }

    fn maximize_1d(&self) -> Result<MaximizerResult<T>> {
        let (lo, hi) = self.domain.interval_bounds();
        let zero = T::zero();
        let f = |y: T| self.eval(&[y]);
        let done = |y: T, status, residual: T| MaximizerResult { y_star: vec![y], value: f(y), status, first_order_residual: residual };

        if lo == hi {
            return Ok(done(zero, MaximizerStatus::Boundary, zero));
        }
        // the origin is interior to the jump region, so g'(0) always exists
        let d0 = self.derivative_1d(zero).expect("origin lies inside the jump region");
        let flat = self.market.diffusion()[(0, 0)] == zero && self.jumps.iter().all(|j| j.x[0] == zero);
        if d0 == zero {
            return Ok(done(zero, MaximizerStatus::Interior, zero));
        }
        let dir = d0.signum();
        let limit = if dir > zero { hi } else { -lo };
        if !(limit > zero) {
            // the origin is the active bound and g decreases into the set
            return Ok(done(zero, MaximizerStatus::Boundary, zero));
        }
        let cap = T::lit(UNBOUNDED_CAP);
        let at = |s: T| dir * s;

        if flat {
            // g is linear: the supremum is at the bound or at infinity
            return Ok(if limit.is_finite() {
                done(at(limit), MaximizerStatus::Boundary, zero)
            } else {
                MaximizerResult {
                    y_star: vec![at(cap)],
                    value: f(at(cap)),
                    status: MaximizerStatus::UnboundedAbove,
                    first_order_residual: d0.abs(),
                }
            });
        }

        // expanding search along s = dir * y >= 0
        let (mut s0, mut s1) = (zero, zero);
        let (mut f1, mut step) = (zero, T::one().min(limit / T::lit(2.0)));
        let mut s2 = step;
        let mut f2 = f(at(s2));
        let mut reached_limit = false;
        while f2 > f1 {
            if s2 >= limit {
                reached_limit = true;
                break;
            }
            if s2 > cap {
                return Ok(MaximizerResult {
                    y_star: vec![at(s2)],
                    value: f2,
                    status: MaximizerStatus::UnboundedAbove,
                    first_order_residual: self.derivative_1d(at(s2)).unwrap_or(T::nan()).abs(),
                });
            }
            step = step * T::lit(2.0);
            s0 = s1;
            s1 = s2;
            f1 = f2;
            s2 = (s2 + step).min(limit);
            f2 = f(at(s2));
        }
        if reached_limit {
            // increasing up to the limit: a box bound with outward slope is the optimum
            if let Some(d) = self.derivative_1d(at(limit)) {
                if dir * d >= zero {
                    return Ok(done(at(limit), MaximizerStatus::Boundary, zero));
                }
            }
            s0 = s1;
        }
        let (mut a, mut b) = (s0, s2);
        // golden section stalls at sqrt(eps) relative precision where g is flat;
        // Newton may then move anywhere inside the original bracket
        let (pa, pb) = (a, b);

        // golden section on [a, b]
        let r = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
        let mut c = b - r * (b - a);
        let mut d = a + r * (b - a);
        let (mut fc, mut fd) = (f(at(c)), f(at(d)));
        let tol = T::lit(BRACKET_TOL).max(T::epsilon() * T::lit(16.0) * b.abs().max(T::one()));
        let mut iters = 0;
        while b - a > tol && iters < 400 {
            iters += 1;
            if fc >= fd {
                b = d;
                d = c;
                fd = fc;
                c = b - r * (b - a);
                fc = f(at(c));
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + r * (b - a);
                fd = f(at(d));
            }
        }
        let mut s = if fc >= fd { c } else { d };
        let mut fs = f(at(s));

        // Newton polish
        for _ in 0..50 {
            let (Some(g1), Some(g2)) = (self.derivative_1d(at(s)), self.second_derivative_1d(at(s))) else { break };
            if g1 == zero || !(g2 < zero) {
                break;
            }
            let next = s - dir * g1 / g2;
            if !(next >= pa && next <= pb) {
                break;
            }
            let f_next = f(at(next));
            let g_next = self.derivative_1d(at(next));
            match g_next {
                Some(gn) if f_next >= fs - T::epsilon() * fs.abs().max(T::one()) && gn.abs() <= g1.abs() => {
                    let converged = (next - s).abs() <= T::epsilon() * s.abs().max(T::one());
                    s = next;
                    fs = f_next;
                    if converged || gn == zero {
                        break;
                    }
                }
                _ => break,
            }
        }
        let y = at(s);
        let residual = self.derivative_1d(y).map(|g| g.abs()).unwrap_or(T::nan());
        Ok(MaximizerResult { y_star: vec![y], value: fs, status: MaximizerStatus::Interior, first_order_residual: residual })
    }

    /// Active-set Newton ascent. Frozen box coordinates are permanent
    /// equality constraints; the jump half-spaces are never reached because
    /// `g` (or its slope) blows up in front of them.
    fn maximize_nd(&self) -> Result<MaximizerResult<T>> {
        let n = self.dim();
        let zero = T::zero();
        let dom = &self.domain;

        // all inequality constraints as (a, b): a.y <= b
        let mut cons: Vec<(Vec<T>, T)> = Vec::new();
        let mut fixed: Vec<usize> = Vec::new();
        for i in 0..n {
            let mut e = vec![zero; n];
            e[i] = T::one();
            if dom.is_frozen(i) {
                fixed.push(cons.len());
                cons.push((e, dom.upper[i]));
                continue;
            }
            if dom.upper[i].is_finite() {
                cons.push((e.clone(), dom.upper[i]));
            }
            if dom.lower[i].is_finite() {
                cons.push((e.iter().map(|&v| -v).collect(), -dom.lower[i]));
            }
        }
        for h in &dom.halfspaces {
            cons.push((h.normal.clone(), h.offset));
        }

        let mut y = vec![zero; n];
        let mut active: Vec<usize> = fixed.clone();
        let mut fy = self.eval(&y);
        let cap = T::lit(UNBOUNDED_CAP);
        let scale = norm(&self.grad(&y)?).max(T::one());
        let gtol = T::lit(GRADIENT_TOL).max(T::epsilon().sqrt() * T::epsilon().sqrt() * T::lit(1e4) * scale);

        let mut residual = T::infinity();
        for _ in 0..500 {
            let g = self.grad(&y)?;
            let h = self.hess(&y)?;
            let delta = T::lit(1e-12) * (T::one() + h.max_abs());
            let (step, mult) = kkt_step(&h, &g, &active, &cons, delta);
            let Some(step) = step else { break };

            // projected gradient: g minus its part absorbed by active constraints
            let mut pg = g.clone();
            for (k, &ci) in active.iter().enumerate() {
                for (v, &a) in pg.iter_mut().zip(&cons[ci].0) {
                    *v = *v - mult[k] * a;
                }
            }
            residual = norm(&pg);

            if residual <= gtol || norm(&step) <= T::epsilon() * norm(&y).max(T::one()) {
                // drop the constraint with the most negative multiplier, if any
                let worst = active
                    .iter()
                    .enumerate()
                    .filter(|(_, ci)| !fixed.contains(ci))
                    .min_by(|a, b| mult[a.0].partial_cmp(&mult[b.0]).unwrap());
                match worst {
                    Some((k, _)) if mult[k] < -gtol => {
                        active.remove(k);
                        continue;
                    }
                    _ => break,
                }
            }

            // ratio test against inactive constraints
            let mut alpha_max = T::one();
            let mut blocking = None;
            for (ci, (a, b)) in cons.iter().enumerate() {
                if active.contains(&ci) {
                    continue;
                }
                let ad = dot(a, &step);
                if ad > zero {
                    let room = (*b - dot(a, &y)).max(zero) / ad;
                    if room < alpha_max {
                        alpha_max = room;
                        blocking = Some(ci);
                    }
                }
            }
            // backtracking line search on the feasible segment
            let slope = dot(&g, &step);
            let mut alpha = alpha_max;
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<T> = y.iter().zip(&step).map(|(&v, &s)| v + alpha * s).collect();
                let fc = self.eval_unconstrained(&cand);
                if fc.is_finite() && self.jump_margin(&cand) > T::lit(BOUNDARY_MARGIN) && fc >= fy + T::lit(1e-4) * alpha * slope {
                    accepted = Some((cand, fc));
                    break;
                }
                alpha = alpha / T::lit(2.0);
            }
            let Some((cand, fc)) = accepted else {
                if let Some(ci) = blocking.filter(|_| alpha_max == zero) {
                    active.push(ci);
                    continue;
                }
                break;
            };
            // snap onto the blocking constraint when the full feasible step was taken
            if alpha == alpha_max {
                if let Some(ci) = blocking {
                    active.push(ci);
                }
            }
            let improvement = fc - fy;
            y = cand;
            fy = fc;
            if norm(&y) > cap {
                return Ok(MaximizerResult { y_star: y, value: fy, status: MaximizerStatus::UnboundedAbove, first_order_residual: residual });
            }
            if alpha_max == T::one() && improvement <= T::epsilon() * fy.abs().max(T::one()) && residual <= gtol.sqrt() {
                // no measurable progress left; finish with the current residual
                let g = self.grad(&y)?;
                let (_, mult) = kkt_step(&self.hess(&y)?, &g, &active, &cons, delta);
                let mut pg = g;
                for (k, &ci) in active.iter().enumerate() {
                    for (v, &a) in pg.iter_mut().zip(&cons[ci].0) {
                        *v = *v - mult[k] * a;
                    }
                }
                residual = norm(&pg);
                break;
            }
        }
        let on_bound = active.iter().any(|ci| !fixed.contains(ci)) || !fixed.is_empty();
        let status = if on_bound { MaximizerStatus::Boundary } else { MaximizerStatus::Interior };
        Ok(MaximizerResult { y_star: y, value: fy, status, first_order_residual: residual })
    }
}

/// Solves the equality-constrained Newton system
/// `[H - δI, A'; A, 0] [d; -μ] = [-g; 0]` for the ascent step `d` and the
/// multipliers `μ` of the active constraints.
fn kkt_step<T: Scalar>(h: &Matrix<T>, g: &[T], active: &[usize], cons: &[(Vec<T>, T)], delta: T) -> (Option<Vec<T>>, Vec<T>) {
    let n = g.len();
    let m = active.len();
    let size = n + m;
    let mut k = vec![vec![T::zero(); size]; size];
    let mut rhs = vec![T::zero(); size];
    for i in 0..n {
        for j in 0..n {
            k[i][j] = h[(i, j)];
        }
        k[i][i] = k[i][i] - delta;
        rhs[i] = -g[i];
    }
    for (r, &ci) in active.iter().enumerate() {
        for j in 0..n {
            k[n + r][j] = cons[ci].0[j];
            k[j][n + r] = cons[ci].0[j];
        }
    }
    match solve(&k, &rhs, T::epsilon() * T::lit(1e-3)) {
        Some(sol) => (Some(sol[..n].to_vec()), sol[n..].iter().map(|&v| -v).collect()),
        None => (None, vec![T::zero(); m]),
    }
}

/// `g(y)` for the given market, exponent and (optional) user constraints.
pub fn g_eval<T: Scalar>(f: &GFunction<'_, T>, y: &[T]) -> T {
    f.eval(y)
}

pub fn g_grad<T: Scalar>(f: &GFunction<'_, T>, y: &[T]) -> Result<Vec<T>> {
    f.grad(y)
}

pub fn g_hess<T: Scalar>(f: &GFunction<'_, T>, y: &[T]) -> Result<Matrix<T>> {
    f.hess(y)
}

pub fn g_max<T: Scalar>(f: &GFunction<'_, T>) -> Result<MaximizerResult<T>> {
    f.maximize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{JumpAtom, JumpMeasure};

    fn merton() -> LevyMarket<f64> {
        LevyMarket::black_scholes(0.05, 0.2, 1.0).unwrap()
    }

    fn atoms(b: f64, c: f64, xs: &[(f64, f64)]) -> LevyMarket<f64> {
        let jumps = JumpMeasure::from_atoms(1, xs.iter().map(|&(x, l)| JumpAtom { size: vec![x], intensity: l }).collect()).unwrap();
        LevyMarket::new(vec![b], vec![vec![c]], jumps, 1.0).unwrap()
    }

    #[test]
    fn merton_values() {
        let m = merton();
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let g = GFunction::new(&m, &prefs, None).unwrap();
        assert_eq!(g.eval(&[0.0]), 0.0);
        assert!((g.eval(&[2.5]) - 0.0625).abs() < 1e-15);
        assert_eq!(g.grad(&[0.0]).unwrap(), vec![0.05]);
        assert!((g.hess(&[1.0]).unwrap()[(0, 0)] + 0.02).abs() < 1e-16);
        let r = g.maximize().unwrap();
        assert_eq!(r.status, MaximizerStatus::Interior);
        assert!((r.y_star[0] - 2.5).abs() < 1e-9, "{:?}", r);
        assert!((r.value - 0.0625).abs() < 1e-14);
        assert!(r.first_order_residual <= GRADIENT_TOL);
    }

    #[test]
    fn small_atom_includes_truncation_term() {
        let m = atoms(0.0, 0.0, &[(0.1, 1.0)]);
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let g = GFunction::new(&m, &prefs, None).unwrap();
        let expect = 2.0 * (1.1f64.sqrt() - 1.0) - 0.1;
        assert!((g.eval(&[1.0]) - expect).abs() < 1e-15);
        assert!((g.eval(&[1.0]) + 0.0023823036596968).abs() < 1e-13);
    }

    #[test]
    fn boundary_atom_value() {
        let m = atoms(0.0, 0.0, &[(-0.5, 1.0)]);
        let pos = Preferences::standard(0.5, 1.0).unwrap();
        let g = GFunction::new(&m, &pos, None).unwrap();
        // 0^p/p = 0, so the atom contributes -1/p - y.h(x) = -2 + 1
        assert!((g.eval(&[2.0]) + 1.0).abs() < 1e-15);
        assert_eq!(g.eval(&[2.1]), f64::NEG_INFINITY);
        assert!(matches!(g.grad(&[2.0]), Err(Error::DomainBoundary { .. })));
        let neg = Preferences::standard(-1.0, 1.0).unwrap();
        let g = GFunction::new(&m, &neg, None).unwrap();
        assert_eq!(g.eval(&[2.0]), f64::NEG_INFINITY);
    }

    #[test]
    fn symmetric_jumps_give_zero() {
        let m = atoms(0.0, 0.04, &[(0.1, 1.0), (-0.1, 1.0)]);
        for p in [0.5, -1.0] {
            let prefs = Preferences::standard(p, 1.0).unwrap();
            let r = GFunction::new(&m, &prefs, None).unwrap().maximize().unwrap();
            assert!(r.y_star[0].abs() < 1e-9);
        }
    }

    #[test]
    fn steep_drift_stays_inside_jump_bound() {
        // the slope of the jump term diverges at y = 2, so the optimum is
        // interior however large the drift
        let m = atoms(10.0, 0.0, &[(-0.5, 1.0)]);
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let g = GFunction::new(&m, &prefs, None).unwrap();
        let r = g.maximize().unwrap();
        assert_eq!(r.status, MaximizerStatus::Interior);
        assert!(r.y_star[0] < 2.0 && r.y_star[0] > 1.99);
        let best = g.scan(0.0, 2.0, 200_001).into_iter().map(|(_, v)| v).fold(f64::NEG_INFINITY, f64::max);
        assert!(r.value >= best - 1e-12);
    }

    #[test]
    fn user_bound_gives_boundary() {
        let m = merton();
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let user = ConstraintSet::interval(-1.0, 1.0);
        let r = GFunction::new(&m, &prefs, Some(&user)).unwrap().maximize().unwrap();
        assert_eq!(r.status, MaximizerStatus::Boundary);
        assert_eq!(r.y_star, vec![1.0]);
        let r = GFunction::new(&m, &prefs, Some(&ConstraintSet::origin(1))).unwrap().maximize().unwrap();
        assert_eq!((r.y_star[0], r.value), (0.0, 0.0));
    }

    #[test]
    fn linear_objective_is_unbounded() {
        let m = atoms(0.05, 0.0, &[]);
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let r = GFunction::new(&m, &prefs, None).unwrap().maximize().unwrap();
        assert_eq!(r.status, MaximizerStatus::UnboundedAbove);
        assert!(matches!(r.bounded(), Err(Error::UnboundedAbove { .. })));
        // a large positive jump only: g grows like sqrt(y)
        let m = atoms(0.0, 0.0, &[(1.5, 1.0)]);
        let r = GFunction::new(&m, &prefs, None).unwrap().maximize().unwrap();
        assert_eq!(r.status, MaximizerStatus::UnboundedAbove);
    }

    #[test]
    fn no_trade_market_is_zero() {
        let m = LevyMarket::<f64>::no_trade(1, 1.0).unwrap();
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let r = GFunction::new(&m, &prefs, None).unwrap().maximize().unwrap();
        assert_eq!((r.y_star[0], r.value, r.status), (0.0, 0.0, MaximizerStatus::Interior));
    }

    #[test]
    fn two_assets_merton() {
        // y* = c^{-1} b / (1-p)
        let m = LevyMarket::<f64>::new(vec![0.05, 0.03], vec![vec![0.04, 0.01], vec![0.01, 0.09]], JumpMeasure::none(2), 1.0).unwrap();
        let prefs = Preferences::standard(-1.0, 1.0).unwrap();
        let g = GFunction::new(&m, &prefs, None).unwrap();
        let r = g.maximize().unwrap();
        let det: f64 = 0.04 * 0.09 - 0.01 * 0.01;
        let y0 = (0.09 * 0.05 - 0.01 * 0.03) / det / 2.0;
        let y1 = (-0.01 * 0.05 + 0.04 * 0.03) / det / 2.0;
        assert_eq!(r.status, MaximizerStatus::Interior);
        assert!((r.y_star[0] - y0).abs() < 1e-9 && (r.y_star[1] - y1).abs() < 1e-9, "{:?}", r);
        // with a box the first coordinate is capped
        let user = ConstraintSet::boxed(vec![-0.2, -10.0], vec![0.2, 10.0]);
        let r = GFunction::new(&m, &prefs, Some(&user)).unwrap().maximize().unwrap();
        assert_eq!(r.status, MaximizerStatus::Boundary);
        assert!((r.y_star[0] - 0.2).abs() < 1e-12);
        // remaining coordinate solves its own first-order condition
        let y1: f64 = (0.03 - 2.0 * 0.01 * 0.2) / (2.0 * 0.09);
        assert!((r.y_star[1] - y1).abs() < 1e-9, "{:?}", r);
        assert!(r.first_order_residual <= 1e-9);
    }

    #[test]
    fn two_assets_with_jumps_and_frozen_coordinate() {
        let jumps = JumpMeasure::from_atoms(2, vec![JumpAtom { size: vec![-0.3, 0.2], intensity: 2.0 }, JumpAtom { size: vec![0.1, -0.4], intensity: 1.0 }]).unwrap();
        let m = LevyMarket::new(vec![0.2, 0.1], vec![vec![0.04, 0.0], vec![0.0, 0.02]], jumps, 1.0).unwrap();
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let g = GFunction::new(&m, &prefs, None).unwrap();
        let r = g.maximize().unwrap();
        assert_eq!(r.status, MaximizerStatus::Interior);
        assert!(r.first_order_residual <= GRADIENT_TOL);
        // frozen second coordinate reduces to a one-dimensional problem
        let user = ConstraintSet::boxed(vec![f64::NEG_INFINITY, 0.0], vec![f64::INFINITY, 0.0]);
        let r2 = GFunction::new(&m, &prefs, Some(&user)).unwrap().maximize().unwrap();
        assert_eq!(r2.y_star[1], 0.0);
        assert!(r2.value <= r.value);
        let m1 = LevyMarket::new(
            vec![0.2],
            vec![vec![0.04]],
            JumpMeasure::from_atoms(1, vec![JumpAtom { size: vec![-0.3], intensity: 2.0 }, JumpAtom { size: vec![0.1], intensity: 1.0 }]).unwrap(),
            1.0,
        )
        .unwrap();
        let r1 = GFunction::new(&m1, &prefs, None).unwrap().maximize().unwrap();
        assert!((r1.y_star[0] - r2.y_star[0]).abs() < 1e-8, "{:?} {:?}", r1, r2);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = atoms(0.1, 0.03, &[(-0.4, 1.5), (0.3, 0.7), (1.5, 0.2)]);
        for p in [0.5, -2.0] {
            let prefs = Preferences::standard(p, 1.0).unwrap();
            let g = GFunction::new(&m, &prefs, None).unwrap();
            for y in [-0.5, 0.0, 0.7, 2.0] {
                let h = 1e-5;
                let fd = (g.eval(&[y + h]) - g.eval(&[y - h])) / (2.0 * h);
                let an = g.grad(&[y]).unwrap()[0];
                assert!((fd - an).abs() <= 1e-6 * an.abs().max(1e-3), "p={p} y={y}");
                let fd2 = (g.grad(&[y + h]).unwrap()[0] - g.grad(&[y - h]).unwrap()[0]) / (2.0 * h);
                let an2 = g.hess(&[y]).unwrap()[(0, 0)];
                assert!((fd2 - an2).abs() <= 1e-6 * an2.abs().max(1e-3));
            }
        }
    }

    #[test]
    fn f32_maximizer() {
        let m = LevyMarket::<f32>::black_scholes(0.05, 0.2, 1.0).unwrap();
        let prefs = Preferences::standard(0.5f32, 1.0).unwrap();
        let r = GFunction::new(&m, &prefs, None).unwrap().maximize().unwrap();
        assert!((r.y_star[0] - 2.5).abs() < 1e-3);
    }
}
