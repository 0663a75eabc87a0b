//! Scenario runners shared by the command line and the integration tests.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use serde::Serialize;

use crate::config::ScenarioConfig;
use crate::duality::{conjugacy_check, dual_process, dual_value_blocks, ConjugacyReport};
use crate::error::{Error, Result};
use crate::market::{simulate_paths, wealth_path, ConsumptionMode, ConstraintSet, LevyMarket, PathBundle, Preferences, Strategy};
use crate::montecarlo::{
    dichotomy_check, dual_supermartingale_test_blocks, lognormal_ratios, optimal_dual_ratios, optimal_dual_rhq, phi_curve, phi_lognormal,
    primal_martingale_test, suboptimality_gap, DichotomyReport, Estimate, GapReport, MartingaleTestReport, McConfig, PhiCurve, RhqReport, SE_BAND,
};
use crate::objective::{GFunction, MaximizerResult};
use crate::opportunity::{bounds_check, opportunity_curve, threshold_check, BoundReport, OpportunityCurve, BOUND_TOL};

/// Market, preferences, maximizer and opportunity curve of a scenario.
#[derive(Debug, Clone)]
pub struct Solved {
    pub market: LevyMarket<f64>,
    pub prefs: Preferences<f64>,
    pub domain: ConstraintSet<f64>,
    pub maximizer: MaximizerResult<f64>,
    pub curve: OpportunityCurve<f64>,
}

impl Solved {
    pub fn g_bar(&self) -> f64 {
        self.maximizer.value
    }

    pub fn optimal_strategy(&self) -> Strategy<f64> {
        Strategy::new(self.maximizer.y_star.clone(), self.curve.kappa.clone())
    }

    pub fn bounds(&self) -> BoundReport<f64> {
        bounds_check(&self.curve, &self.prefs)
    }
}

/// Maximizes the objective and builds the opportunity curve; an unbounded
/// objective is an error.
pub fn run_solve(cfg: &ScenarioConfig) -> Result<Solved> {
    solve_with(cfg, cfg.user_constraints().as_ref(), cfg.preferences()?)
}

fn solve_with(cfg: &ScenarioConfig, user: Option<&ConstraintSet<f64>>, prefs: Preferences<f64>) -> Result<Solved> {
    let market = cfg.market()?;
    let grid = cfg.grid()?;
    let (domain, maximizer) = {
        let g = GFunction::new(&market, &prefs, user)?;
        (g.domain.clone(), g.maximize()?.bounded()?)
    };
    let curve = opportunity_curve(maximizer.value, &prefs, &grid)?;
    Ok(Solved { market, prefs, domain, maximizer, curve })
}

/// Summary printed by `solve`.
#[derive(Debug, Clone, Serialize)]
pub struct SolveSummary {
    pub y_star: Vec<f64>,
    pub g_bar: f64,
    pub status: crate::objective::MaximizerStatus,
    pub residual: f64,
    pub a: f64,
    pub l0: f64,
    pub kappa0: f64,
    pub curve: crate::opportunity::CurveSource,
}

impl From<&Solved> for SolveSummary {
    fn from(s: &Solved) -> Self {
        Self {
            y_star: s.maximizer.y_star.clone(),
            g_bar: s.maximizer.value,
            status: s.maximizer.status,
            residual: s.maximizer.first_order_residual,
            a: s.curve.a_param,
            l0: s.curve.l0(),
            kappa0: s.curve.kappa[0],
            curve: s.curve.source,
        }
    }
}

/// Rows `(t, L, Lstar, kappa, bound_lo, bound_hi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurveRow {
    pub t: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "Lstar")]
    pub lstar: f64,
    pub kappa: f64,
    pub bound_lo: f64,
    pub bound_hi: f64,
}

pub fn curve_rows(s: &Solved) -> Vec<CurveRow> {
    let b = s.bounds();
    s.curve
        .times()
        .into_iter()
        .enumerate()
        .map(|(k, t)| CurveRow {
            t,
            l: s.curve.l[k],
            lstar: s.curve.lstar[k],
            kappa: s.curve.kappa[k],
            bound_lo: b.bound_lo[k],
            bound_hi: b.bound_hi[k],
        })
        .collect()
}

/// Output of `dual`: conjugacy identity and, with paths, the simulated dual value.
#[derive(Debug, Clone, Serialize)]
pub struct DualSummary {
    pub y0: f64,
    pub primal_value: f64,
    pub dual_value: f64,
    pub conjugacy_gap: f64,
    pub conjugacy: ConjugacyReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dual_value_mc: Option<Estimate>,
}

pub fn run_dual(cfg: &ScenarioConfig, mc: Option<&McConfig>) -> Result<DualSummary> {
    let s = run_solve(cfg)?;
    let c = conjugacy_check(&s.curve, &s.prefs, cfg.run.x0);
    let dual_value_mc = match mc {
        Some(mc) => Some(dual_value_blocks(&s.market, &s.prefs, &s.curve, &s.maximizer.y_star, cfg.run.x0, mc.n_paths, mc.seed)?.0),
        None => None,
    };
    Ok(DualSummary { y0: c.y0, primal_value: c.primal_value, dual_value: c.dual_value, conjugacy_gap: c.relative_gap, conjugacy: c, dual_value_mc })
}

/// Optimal wealth, consumption and dual paths for export.
pub fn optimal_paths(cfg: &ScenarioConfig, n_paths: usize, seed: u64) -> Result<PathBundle<f64>> {
    let s = run_solve(cfg)?;
    let returns = simulate_paths(&s.market, &s.curve.grid, 0, n_paths, seed);
    let wealth = wealth_path(&returns, &s.optimal_strategy(), cfg.run.x0, s.prefs.mode)?;
    Ok(dual_process(&s.curve, &s.prefs, &wealth)?.paths)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyTest {
    Primal,
    Dual,
    Rhq,
    Phi,
    Dichotomy,
}

impl FromStr for VerifyTest {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "primal" => Self::Primal,
            "dual" => Self::Dual,
            "rhq" => Self::Rhq,
            "phi" => Self::Phi,
            "dichotomy" => Self::Dichotomy,
            _ => return Err(Error::InvalidParameter(format!("unknown verification `{s}`"))),
        })
    }
}

/// Verdict of `verify`, with whichever detailed reports apply.
#[derive(Debug, Clone, Serialize)]
pub struct Verification {
    pub test: VerifyTest,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub martingale: Option<MartingaleTestReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rhq: Option<RhqReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<PhiCurve>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dichotomy: Option<DichotomyReport>,
}

impl Verification {
    fn new(test: VerifyTest) -> Self {
        Self { test, passed: false, metrics: BTreeMap::new(), martingale: None, gap: None, rhq: None, phi: None, dichotomy: None }
    }

    /// `(t, mean, se)` at the martingale checkpoints, if any.
    pub fn checkpoint_rows(&self) -> Vec<(f64, f64, f64)> {
        self.martingale
            .as_ref()
            .map(|m| m.checkpoints.iter().zip(&m.means).zip(&m.standard_errors).map(|((&t, &m), &s)| (t, m, s)).collect())
            .unwrap_or_default()
    }
}

/// `q` values `0.1, 0.2, ..., 0.9`.
pub fn decile_grid() -> Vec<f64> {
    (1..10).map(|i| i as f64 / 10.0).collect()
}

pub fn run_verify(cfg: &ScenarioConfig, test: VerifyTest, mc: &McConfig, q: Option<f64>) -> Result<Verification> {
    let s = run_solve(cfg)?;
    let x0 = cfg.run.x0;
    let mut v = Verification::new(test);
    match test {
        VerifyTest::Primal => {
            let opt = s.optimal_strategy();
            let rep = primal_martingale_test(&s.market, &s.prefs, &opt, &s.curve, x0, mc)?;
            let delta = vec![cfg.experiment.perturbation; s.market.dim()];
            let gap = suboptimality_gap(&s.market, &s.prefs, &opt, &opt.shifted(&delta), &s.curve, x0, mc)?;
            v.metrics.insert("drift".into(), rep.drift.mean);
            v.metrics.insert("drift_se".into(), rep.drift.se);
            v.metrics.insert("gap".into(), gap.gap.mean);
            v.metrics.insert("gap_se".into(), gap.gap.se);
            v.passed = rep.is_martingale() && gap.strict;
            v.martingale = Some(rep);
            v.gap = Some(gap);
        }
        VerifyTest::Dual => {
            let c = conjugacy_check(&s.curve, &s.prefs, x0);
            let opt = s.optimal_strategy();
            let z = dual_supermartingale_test_blocks(&s.market, &s.prefs, &opt, &opt, &s.curve, x0, mc)?;
            let idle = Strategy::new(vec![0.0; s.market.dim()], s.curve.kappa.clone());
            let z_idle = dual_supermartingale_test_blocks(&s.market, &s.prefs, &opt, &idle, &s.curve, x0, mc)?;
            let (est, _) = dual_value_blocks(&s.market, &s.prefs, &s.curve, &s.maximizer.y_star, x0, mc.n_paths, mc.seed)?;
            let xy = x0 * c.y0;
            let flat_at_xy = z.means.iter().zip(&z.standard_errors).all(|(m, se)| (m - xy).abs() <= SE_BAND * se + 1e-12 * xy);
            v.metrics.insert("conjugacy_gap".into(), c.relative_gap);
            v.metrics.insert("dual_value".into(), c.dual_value);
            v.metrics.insert("dual_value_mc".into(), est.mean);
            v.metrics.insert("dual_value_se".into(), est.se);
            v.metrics.insert("x0_y0".into(), xy);
            v.passed = c.passed && z.is_martingale() && flat_at_xy && z_idle.is_supermartingale() && est.within(c.dual_value, SE_BAND);
            v.martingale = Some(z);
        }
        VerifyTest::Rhq => {
            let conj = s.prefs.q();
            let q = q.unwrap_or(conj);
            let idx = s.curve.grid.checkpoints(mc.checkpoints);
            let mut rep = optimal_dual_rhq(&s.market, &s.prefs, &s.curve, &s.maximizer.y_star, x0, &[q], &idx, mc)?.remove(0);
            if q == conj {
                // ∫ E[(Ŷ_s/Ŷ_τ)^q D_s^β] μ°(ds) = L_τ^β, so D's range brackets the estimates
                let beta = s.prefs.beta();
                let (k1, k2) = (s.prefs.discount.k1(), s.prefs.discount.k2());
                let mut worst = f64::NEG_INFINITY;
                for (e, &k) in rep.estimates.iter().zip(&idx) {
                    let lb = s.curve.lstar[k];
                    let (lo, hi) = (lb / k2.powf(beta), lb / k1.powf(beta));
                    let band = SE_BAND * e.se + 1e-12 * hi;
                    worst = worst.max((lo - e.mean - band).max(e.mean - hi - band));
                }
                v.metrics.insert("worst_excess".into(), worst);
                rep.holds = worst <= 0.0;
            }
            v.metrics.insert("q".into(), q);
            v.metrics.insert("implied_cq".into(), rep.implied_cq);
            v.passed = rep.holds && rep.estimates.iter().all(|e| e.mean > 0.0);
            v.rhq = Some(rep);
        }
        VerifyTest::Phi => {
            let grid = decile_grid();
            let sigma2 = cfg.experiment.sigma2;
            let logn = phi_curve(&lognormal_ratios(sigma2, mc.n_paths, mc.seed), &grid)?;
            let matches = logn.q.iter().zip(&logn.phi).all(|(&q, e)| e.within(phi_lognormal(sigma2, q), SE_BAND));
            let limit_ok = logn.entropy_limit.within((-sigma2 / 2.0).exp(), SE_BAND);
            let last = s.curve.grid.n_steps;
            let r = optimal_dual_ratios(&s.market, &s.prefs, &s.curve, &s.maximizer.y_star, x0, (0, last), mc)?;
            let dual_phi = phi_curve(&r, &grid)?;
            v.metrics.insert("lognormal_matches".into(), f64::from(u8::from(matches)));
            v.metrics.insert("entropy_limit".into(), logn.entropy_limit.mean);
            v.metrics.insert("dual_monotone".into(), f64::from(u8::from(dual_phi.monotone)));
            v.passed = matches && limit_ok && logn.monotone && dual_phi.monotone;
            v.phi = Some(logn);
        }
        VerifyTest::Dichotomy => {
            let qs = match q {
                Some(q) => vec![q],
                None => cfg.experiment.q_values.clone(),
            };
            let d = dichotomy_for(&s, x0, &qs, mc)?;
            v.metrics.insert("transfers".into(), d.checks.len() as f64);
            v.passed = d.passed;
            v.dichotomy = Some(d);
        }
    }
    Ok(v)
}

fn dichotomy_for(s: &Solved, x0: f64, qs: &[f64], mc: &McConfig) -> Result<DichotomyReport> {
    // τ = T is degenerate (every ratio is one) and is left out
    let mut idx = s.curve.grid.checkpoints(mc.checkpoints);
    idx.pop();
    let reports = optimal_dual_rhq(&s.market, &s.prefs, &s.curve, &s.maximizer.y_star, x0, qs, &idx, mc)?;
    let masses: Vec<f64> = reports[0].tau_grid.iter().map(|&t| s.prefs.mu_circ_mass(t)).collect();
    dichotomy_check(&reports, &masses)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentTag {
    ConstraintMonotonicity,
    Threshold,
    TaxWindow,
    RhqDichotomy,
    KappaLowerBound,
}

impl ExperimentTag {
    pub const ALL: [ExperimentTag; 5] = [Self::ConstraintMonotonicity, Self::Threshold, Self::TaxWindow, Self::RhqDichotomy, Self::KappaLowerBound];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::ConstraintMonotonicity => "constraint_monotonicity",
            Self::Threshold => "threshold",
            Self::TaxWindow => "tax_window",
            Self::RhqDichotomy => "rhq_dichotomy",
            Self::KappaLowerBound => "kappa_lower_bound",
        }
    }

    /// Identifier of the property the suite checks.
    pub fn property(self) -> &'static str {
        match self {
            Self::ConstraintMonotonicity => "consumption_decreases_with_wider_constraints",
            Self::Threshold => "model_independent_consumption_threshold",
            Self::TaxWindow => "tax_window_consumption_sign_pattern",
            Self::RhqDichotomy => "reverse_hoelder_all_or_none",
            Self::KappaLowerBound => "consumption_bound_from_reverse_hoelder",
        }
    }

    pub fn is_stochastic(self) -> bool {
        matches!(self, Self::RhqDichotomy | Self::KappaLowerBound)
    }
}

impl fmt::Display for ExperimentTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| Error::UnknownTag(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub tag: ExperimentTag,
    pub property: String,
    pub passed: bool,
    pub metrics: BTreeMap<String, f64>,
    /// Wall-clock time; the only field that varies between identical runs.
    pub runtime_seconds: f64,
}

pub fn run_experiment(scenario: &str, cfg: &ScenarioConfig, tag: ExperimentTag) -> Result<ExperimentReport> {
    let start = Instant::now();
    let mut metrics = BTreeMap::new();
    let passed = match tag {
        ExperimentTag::ConstraintMonotonicity => constraint_monotonicity(cfg, &mut metrics)?,
        ExperimentTag::Threshold => {
            let s = run_solve(cfg)?;
            let r = threshold_check(&s.curve, &s.prefs)?;
            metrics.insert("max_violation".into(), r.max_violation);
            metrics.insert("equality".into(), f64::from(u8::from(r.equality)));
            r.passed
        }
        ExperimentTag::TaxWindow => tax_window(cfg, &mut metrics)?,
        ExperimentTag::RhqDichotomy => {
            let s = run_solve(cfg)?;
            let d = dichotomy_for(&s, cfg.run.x0, &cfg.experiment.q_values, &cfg.mc()?)?;
            for c in &d.checks {
                metrics.insert(format!("margin_{}_to_{}", c.from_q, c.to_q), c.worst_margin);
            }
            d.passed
        }
        ExperimentTag::KappaLowerBound => kappa_lower_bound(cfg, &mut metrics)?,
    };
    Ok(ExperimentReport {
        scenario: scenario.to_string(),
        tag,
        property: tag.property().to_string(),
        passed,
        metrics,
        runtime_seconds: start.elapsed().as_secs_f64(),
    })
}

/// Nested intervals, widest first: `ḡ` grows with the set, and `κ̂` moves
/// against it for `p > 0` and with it for `p < 0`.
fn constraint_monotonicity(cfg: &ScenarioConfig, metrics: &mut BTreeMap<String, f64>) -> Result<bool> {
    let intervals = &cfg.experiment.intervals;
    if cfg.market.drift.len() != 1 {
        return Err(Error::Config("constraint intervals need a one-asset market".into()));
    }
    if intervals.len() < 2 {
        return Err(Error::Config("need at least two nested intervals".into()));
    }
    let prefs = cfg.preferences()?;
    let positive = prefs.p() > 0.0;
    let mut solved = Vec::with_capacity(intervals.len());
    for (i, &[lo, hi]) in intervals.iter().enumerate() {
        if i > 0 {
            let [plo, phi] = intervals[i - 1];
            if !(plo <= lo && hi <= phi) {
                return Err(Error::Config(format!("interval {i} is not contained in interval {}", i - 1)));
            }
        }
        let s = solve_with(cfg, Some(&ConstraintSet::interval(lo, hi)), prefs.clone())?;
        metrics.insert(format!("g_bar_{i}"), s.g_bar());
        solved.push(s);
    }
    let mut passed = true;
    let mut worst = f64::NEG_INFINITY;
    for pair in solved.windows(2) {
        let (wide, narrow) = (&pair[0], &pair[1]);
        passed &= wide.g_bar() >= narrow.g_bar() - BOUND_TOL;
        for (kw, kn) in wide.curve.kappa.iter().zip(&narrow.curve.kappa) {
            worst = worst.max(if positive { kw - kn } else { kn - kw });
        }
    }
    passed &= worst <= BOUND_TOL;
    metrics.insert("max_violation".into(), worst);
    // the trivial set {0} reproduces the no-trade propensity
    if let Some(s) = solved.iter().find(|s| s.domain.interval_bounds() == (0.0, 0.0)) {
        let reference = opportunity_curve(0.0, &s.prefs, &s.curve.grid)?;
        let err = s.curve.kappa.iter().zip(&reference.kappa).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        metrics.insert("no_trade_kappa_error".into(), err);
        passed &= err <= BOUND_TOL;
    }
    Ok(passed)
}

/// Raising `D` by `1 + ξ` on `[t1, t2)` lowers `κ̂` before the window,
/// raises it inside and leaves it unchanged afterwards.
fn tax_window(cfg: &ScenarioConfig, metrics: &mut BTreeMap<String, f64>) -> Result<bool> {
    let base = run_solve(cfg)?;
    if base.prefs.mode != ConsumptionMode::WithConsumption {
        return Err(Error::Config("the tax window needs intermediate consumption".into()));
    }
    let [t1, t2] = cfg.experiment.window;
    let disc = base.prefs.discount.with_window(t1, t2, cfg.experiment.xi)?;
    let taxed_prefs = base.prefs.with_discount(disc.clone());
    let taxed = opportunity_curve(base.g_bar(), &taxed_prefs, &base.curve.grid)?;
    let (mut before, mut inside, mut after) = (f64::NEG_INFINITY, f64::INFINITY, 0.0f64);
    for (k, t) in base.curve.times().into_iter().enumerate() {
        let diff = taxed.kappa[k] - base.curve.kappa[k];
        if disc.at(t) != base.prefs.discount.at(t) {
            inside = inside.min(diff);
        } else if t < t1 {
            before = before.max(diff);
        } else {
            after = after.max(diff.abs());
        }
    }
    metrics.insert("max_diff_before".into(), before);
    metrics.insert("min_diff_inside".into(), inside);
    metrics.insert("max_abs_diff_after".into(), after);
    Ok(before < -BOUND_TOL && inside > BOUND_TOL && after <= BOUND_TOL)
}

/// `κ̂ ≥ (k1/k2)^β / C_q` for `p > 0` and `κ̂ ≤ (k2/k1)^β / C_q` for
/// `p < 0`, with `C_q` estimated from `Ŷ` at the conjugate exponent.
fn kappa_lower_bound(cfg: &ScenarioConfig, metrics: &mut BTreeMap<String, f64>) -> Result<bool> {
    let s = run_solve(cfg)?;
    if s.prefs.mode != ConsumptionMode::WithConsumption {
        return Err(Error::Config("the consumption bound needs intermediate consumption".into()));
    }
    let mc = cfg.mc()?;
    let q = s.prefs.q();
    let idx = s.curve.grid.checkpoints(mc.checkpoints);
    let rep = optimal_dual_rhq(&s.market, &s.prefs, &s.curve, &s.maximizer.y_star, cfg.run.x0, &[q], &idx, &mc)?.remove(0);
    let cq = rep.conservative_cq();
    let beta = s.prefs.beta();
    let (k1, k2) = (s.prefs.discount.k1(), s.prefs.discount.k2());
    let positive = s.prefs.p() > 0.0;
    let bound = if positive { (k1 / k2).powf(beta) / cq } else { (k2 / k1).powf(beta) / cq };
    let signed = |k: f64, b: f64| if positive { k - b } else { b - k };
    let margin = s.curve.kappa.iter().map(|&k| signed(k, bound)).fold(f64::INFINITY, f64::min);
    // the same argument at each τ with the τ-wise estimate
    let mut pointwise = f64::INFINITY;
    for (e, &k) in rep.estimates.iter().zip(&idx).filter(|(_, &k)| k < s.curve.grid.n_steps) {
        let c = if positive { e.mean + SE_BAND * e.se } else { (e.mean - SE_BAND * e.se).max(f64::MIN_POSITIVE) };
        let b = if positive { (k1 / k2).powf(beta) / c } else { (k2 / k1).powf(beta) / c };
        pointwise = pointwise.min(signed(s.curve.kappa[k], b));
    }
    metrics.insert("q".into(), q);
    metrics.insert("cq".into(), cq);
    metrics.insert("bound".into(), bound);
    metrics.insert("min_margin".into(), margin);
    metrics.insert("min_pointwise_margin".into(), pointwise);
    Ok(margin >= -BOUND_TOL && pointwise >= -BOUND_TOL)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ScenarioConfig {
        ScenarioConfig::parse(text).unwrap()
    }

    const MERTON: &str = "[market]\nT = 1.0\ndrift = [0.05]\ndiffusion = [[0.04]]\n[preferences]\np = 0.5\n[run]\ngrid_steps = 200\n";

    #[test]
    fn merton_solve() {
        let s = run_solve(&cfg(MERTON)).unwrap();
        assert!((s.maximizer.y_star[0] - 2.5).abs() < 1e-9);
        assert!((s.curve.a_param - 0.0625).abs() < 1e-12);
        let rows = curve_rows(&s);
        assert_eq!(rows.len(), 201);
        assert_eq!(rows[200].kappa, 1.0);
    }

    #[test]
    fn unbounded_objective_is_an_error() {
        let text = "[market]\nT = 1.0\ndrift = [0.05]\n[preferences]\np = 0.5\n";
        assert!(matches!(run_solve(&cfg(text)), Err(Error::UnboundedAbove { .. })));
    }

    #[test]
    fn tags_round_trip() {
        for t in ExperimentTag::ALL {
            assert_eq!(t.as_str().parse::<ExperimentTag>().unwrap(), t);
        }
        assert!(matches!("no_such_tag".parse::<ExperimentTag>(), Err(Error::UnknownTag(_))));
    }

    #[test]
    fn deterministic_suites_pass_on_merton() {
        for p in [0.5, -1.0] {
            let c = cfg(&MERTON.replace("p = 0.5", &format!("p = {p}")));
            for tag in [ExperimentTag::ConstraintMonotonicity, ExperimentTag::Threshold, ExperimentTag::TaxWindow] {
                let r = run_experiment("merton", &c, tag).unwrap();
                assert!(r.passed, "p={p} {tag}: {:?}", r.metrics);
            }
        }
    }

    #[test]
    fn stochastic_suites_need_a_seed() {
        let c = cfg(MERTON);
        assert!(matches!(run_experiment("m", &c, ExperimentTag::KappaLowerBound), Err(Error::Config(_))));
    }
}
