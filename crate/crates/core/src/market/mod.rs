//! Exponential Lévy market models, preferences, admissibility constraints and
//! path simulation.

mod constraints;
mod jumps;
mod paths;
mod preferences;

pub use constraints::{constraint_set, ConstraintSet, Halfspace};
pub use jumps::{cutoff, within_cutoff, DensityFn, JumpAtom, JumpDensity, JumpMeasure, WeightedJump, DEFAULT_DENSITY_NODES, MIN_DENSITY_NODES};
pub use paths::{path_rng, simulate_paths, simulate_returns, wealth_path, write_paths_csv, PathBundle, Strategy, TimeGrid};
pub use preferences::{ConsumptionMode, PiecewiseDiscount, Preferences};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{psd_factor, Matrix};
use crate::scalar::{lit, Scalar};

use jumps::{dyadic_tail, TailSide};

/// Lévy triplet `(b, c, F)` of the return process `R` with respect to the
/// truncation `h(x) = x 1{|x| <= 1}`, and the investment horizon.
#[derive(Debug, Clone)]
pub struct LevyMarket<T> {
    drift: Vec<T>,
    diffusion: Matrix<T>,
    diffusion_root: Matrix<T>,
    jumps: JumpMeasure<T>,
    horizon: T,
}

impl<T: Scalar> LevyMarket<T> {
    /// Validates shapes and that `diffusion` is symmetric positive
    /// semidefinite up to `-1e-12`; small negative eigenvalues are clamped.
    pub fn new(drift: Vec<T>, diffusion: Vec<Vec<T>>, jumps: JumpMeasure<T>, horizon: T) -> Result<Self> {
        let dim = drift.len();
        if dim == 0 {
            return Err(Error::InvalidParameter("market needs at least one risky asset".into()));
        }
        if jumps.dim() != dim {
            return Err(Error::InvalidParameter(format!("jump measure dimension {} != {dim}", jumps.dim())));
        }
        if drift.iter().any(|b| !b.is_finite()) {
            return Err(Error::InvalidParameter("drift must be finite".into()));
        }
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        let c = Matrix::from_rows(&diffusion)
            .filter(|m| m.dim() == dim)
            .ok_or_else(|| Error::InvalidParameter(format!("diffusion must be {dim}x{dim}")))?;
        if c.max_abs().is_nan() || !c.max_abs().is_finite() {
            return Err(Error::InvalidParameter("diffusion must be finite".into()));
        }
        if !c.is_symmetric(T::lit(1e-12).max(T::epsilon() * lit(16.0))) {
            return Err(Error::InvalidParameter("diffusion matrix must be symmetric".into()));
        }
        let f = psd_factor(&c);
        let tol = T::lit(1e-12).max(T::epsilon() * lit(16.0) * c.max_abs());
        if f.min_eigenvalue < -tol {
            return Err(Error::InvalidParameter(format!(
                "diffusion matrix has negative eigenvalue {}",
                f.min_eigenvalue
            )));
        }
        Ok(Self { drift, diffusion: f.clamped, diffusion_root: f.root, jumps, horizon })
    }

    /// Geometric Brownian motion in one dimension: `b = mu`, `c = sigma^2`.
    pub fn black_scholes(mu: T, sigma: T, horizon: T) -> Result<Self> {
        Self::new(vec![mu], vec![vec![sigma * sigma]], JumpMeasure::none(1), horizon)
    }

    /// `S ≡ 1`: zero triplet.
    pub fn no_trade(dim: usize, horizon: T) -> Result<Self> {
        Self::new(vec![T::zero(); dim], vec![vec![T::zero(); dim]; dim], JumpMeasure::none(dim), horizon)
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &[T] {
        &self.drift
    }

    pub fn diffusion(&self) -> &Matrix<T> {
        &self.diffusion
    }

    /// `A` with `A A^T = c`.
    pub fn diffusion_root(&self) -> &Matrix<T> {
        &self.diffusion_root
    }

    pub fn jumps(&self) -> &JumpMeasure<T> {
        &self.jumps
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn has_diffusion(&self) -> bool {
        self.diffusion.max_abs() > T::zero()
    }

    pub fn with_horizon(&self, horizon: T) -> Result<Self> {
        Self::new(self.drift.clone(), self.diffusion.rows(), self.jumps.clone(), horizon)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

pub const CHECK_POSITIVITY: &str = "price_positivity";
pub const CHECK_FINITE_ACTIVITY: &str = "finite_activity";
pub const CHECK_P_MOMENT: &str = "p_moment";
pub const CHECK_NON_MONOTONE: &str = "non_monotone";

/// Structural checks on a market/preference pair. Never fails; callers
/// decide what to do with failed checks.
pub fn validate_market<T: Scalar>(market: &LevyMarket<T>, prefs: &Preferences<T>) -> ValidationReport {
    let jumps = market.jumps();
    let mut checks = Vec::new();

    // S = E(R) > 0 iff every jump exceeds -1 componentwise
    let bad_atoms = jumps.atoms().iter().filter(|a| a.size.iter().any(|&x| x <= -T::one())).count();
    let mut positivity_detail = format!("{bad_atoms} atom(s) at or below -1");
    let mut positivity = bad_atoms == 0;
    if let Some(d) = jumps.density() {
        let below = if d.lower < -T::one() {
            true
        } else {
            let (mass, _) = dyadic_tail(|x| (d.density)(x), T::one(), TailSide::Left);
            mass > T::zero()
        };
        if below {
            positivity = false;
            positivity_detail.push_str("; density puts mass on (-inf, -1]");
        }
    }
    checks.push(Check { name: CHECK_POSITIVITY, passed: positivity, detail: positivity_detail });

    let total = jumps.total_intensity();
    let mut finite = total.is_finite();
    let mut activity_detail = format!("total intensity on the model support {total}");
    if let Some(d) = jumps.density() {
        let edge = d.lower.abs().max(d.upper.abs());
        let (tail, ok) = dyadic_tail(|x| (d.density)(x), edge, TailSide::Both);
        finite &= ok;
        activity_detail.push_str(&format!("; density mass beyond the box {tail} ({})", if ok { "finite" } else { "divergent" }));
    }
    checks.push(Check { name: CHECK_FINITE_ACTIVITY, passed: finite, detail: activity_detail });

    let p = prefs.p();
    if p > T::zero() {
        let atom_part: T = jumps
            .atoms()
            .iter()
            .map(|a| {
                let n = a.size.iter().map(|&x| x * x).sum::<T>().sqrt();
                if n > T::one() {
                    a.intensity * n.powf(p)
                } else {
                    T::zero()
                }
            })
            .sum();
        let (density_part, ok) = match jumps.density() {
            Some(d) => dyadic_tail(|x| x.abs().powf(p) * (d.density)(x), T::one(), TailSide::Both),
            None => (T::zero(), true),
        };
        let passed = ok && atom_part.is_finite();
        checks.push(Check {
            name: CHECK_P_MOMENT,
            passed,
            detail: format!(
                "int |x|^p 1{{|x|>1}} F(dx): atoms {atom_part}, density {density_part} ({})",
                if ok { "finite" } else { "divergent" }
            ),
        });
    }

    // each asset must move both ways
    let comp = jumps.truncated_mean();
    let mut monotone_assets = Vec::new();
    for i in 0..market.dim() {
        let fv_drift = market.drift()[i] - comp[i];
        let diffusive = market.diffusion()[(i, i)] > T::zero();
        let sizes = jumps.weighted_jumps().iter().map(|j| j.size[i]);
        let (mut up, mut down) = (false, false);
        for x in sizes {
            up |= x > T::zero();
            down |= x < T::zero();
        }
        let increasing = !diffusive && !down && fv_drift >= T::zero();
        let decreasing = !diffusive && !up && fv_drift <= T::zero();
        if increasing || decreasing {
            monotone_assets.push(i);
        }
    }
    checks.push(Check {
        name: CHECK_NON_MONOTONE,
        passed: monotone_assets.is_empty(),
        detail: if monotone_assets.is_empty() {
            "every asset has upside and downside".to_string()
        } else {
            format!("monotone return process for asset(s) {monotone_assets:?}")
        },
    });

    ValidationReport { checks }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    #[test]
    fn diffusive_market_passes_everything() {
        let m = LevyMarket::black_scholes(0.05, 0.2, 1.0).unwrap();
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        let r = validate_market(&m, &prefs);
        assert!(r.passed(), "{r:?}");
        assert!(r.check(CHECK_P_MOMENT).is_some());
    }

    #[test]
    fn atom_below_minus_one_breaks_positivity() {
        let j = JumpMeasure::from_atoms(1, vec![JumpAtom { size: vec![-1.2], intensity: 0.3 }]).unwrap();
        let m = LevyMarket::new(vec![0.05], vec![vec![0.04]], j, 1.0).unwrap();
        let r = validate_market(&m, &Preferences::standard(0.5, 1.0).unwrap());
        assert!(!r.check(CHECK_POSITIVITY).unwrap().passed);
        assert!(r.check(CHECK_NON_MONOTONE).unwrap().passed);
    }

    #[test]
    fn heavy_tailed_density_breaks_p_moment() {
        // f(x) = |x|^{-1.4} on |x| > 1: the p = 0.5 moment integrand is |x|^{-0.9}.
        let f: DensityFn<f64> = Arc::new(|x: f64| if x.abs() > 1.0 { x.abs().powf(-1.4) } else { 0.0 });
        let d = JumpDensity { density: f, lower: -0.99, upper: 4.0, nodes: 64 };
        let m = LevyMarket::new(vec![0.0], vec![vec![0.04]], JumpMeasure::new(1, vec![], Some(d.clone())).unwrap(), 1.0).unwrap();
        let r = validate_market(&m, &Preferences::standard(0.5, 1.0).unwrap());
        assert!(!r.check(CHECK_P_MOMENT).unwrap().passed, "{r:?}");
        // the activity itself is finite: |x|^{-1.4} is integrable at infinity
        assert!(r.check(CHECK_FINITE_ACTIVITY).unwrap().passed, "{r:?}");
        // p = 0.3 gives |x|^{-1.1}: integrable
        let r = validate_market(&m, &Preferences::standard(0.3, 1.0).unwrap());
        assert!(r.check(CHECK_P_MOMENT).unwrap().passed, "{r:?}");
        // no moment condition for p < 0
        let r = validate_market(&m, &Preferences::standard(-1.0, 1.0).unwrap());
        assert!(r.check(CHECK_P_MOMENT).is_none());
    }

    #[test]
    fn monotone_markets_flagged() {
        let up = LevyMarket::new(vec![0.1], vec![vec![0.0]], JumpMeasure::none(1), 1.0).unwrap();
        let prefs = Preferences::standard(0.5, 1.0).unwrap();
        assert!(!validate_market(&up, &prefs).check(CHECK_NON_MONOTONE).unwrap().passed);
        // positive jumps with compensated drift below zero: goes both ways
        let j = JumpMeasure::from_atoms(1, vec![JumpAtom { size: vec![0.1], intensity: 1.0 }]).unwrap();
        let both = LevyMarket::new(vec![0.05], vec![vec![0.0]], j.clone(), 1.0).unwrap();
        assert!(validate_market(&both, &prefs).check(CHECK_NON_MONOTONE).unwrap().passed);
        let only_up = LevyMarket::new(vec![0.1], vec![vec![0.0]], j, 1.0).unwrap();
        assert!(!validate_market(&only_up, &prefs).check(CHECK_NON_MONOTONE).unwrap().passed);
    }

    #[test]
    fn non_psd_diffusion_rejected() {
        let r = LevyMarket::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]], JumpMeasure::none(2), 1.0);
        assert!(r.is_err());
        let r = LevyMarket::new(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.4, 1.0]], JumpMeasure::none(2), 1.0);
        assert!(r.is_err());
        // tiny negative eigenvalue is clamped
        let m = LevyMarket::new(vec![0.0], vec![vec![-1e-14]], JumpMeasure::none(1), 1.0).unwrap();
        assert_eq!(m.diffusion()[(0, 0)], 0.0);
    }
}
