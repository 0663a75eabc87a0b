//! Finite-activity jump measures: point masses plus an optional one-dimensional
//! density discretized by Gauss-Legendre quadrature.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::gauss_legendre;
use crate::scalar::Scalar;

pub const MIN_DENSITY_NODES: usize = 16;
pub const DEFAULT_DENSITY_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct JumpAtom<T> {
    pub size: Vec<T>,
    /// Expected number of jumps of this size per unit time.
    pub intensity: T,
}

/// Density handle `x -> f(x)` of a one-dimensional jump component.
pub type DensityFn<T> = Arc<dyn Fn(T) -> T + Send + Sync>;

/// Jump density on the bounded box `[lower, upper]`.
///
/// The handle describes the untruncated model: integrability diagnostics may
/// evaluate it outside the box. Pricing, optimization and simulation only
/// see its restriction to the box.
#[derive(Clone)]
pub struct JumpDensity<T> {
    pub density: DensityFn<T>,
    pub lower: T,
    pub upper: T,
    pub nodes: usize,
}

impl<T: fmt::Debug> fmt::Debug for JumpDensity<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpDensity")
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .field("nodes", &self.nodes)
            .finish_non_exhaustive()
    }
}

/// A jump size together with the mass `F({x})` the discretized measure puts on it.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedJump<T> {
    pub size: Vec<T>,
    pub weight: T,
}

/// Lévy measure with finite total mass.
#[derive(Debug, Clone)]
pub struct JumpMeasure<T> {
    dim: usize,
    atoms: Vec<JumpAtom<T>>,
    density: Option<JumpDensity<T>>,
    discretized: Vec<WeightedJump<T>>,
}

impl<T: Scalar> JumpMeasure<T> {
    pub fn none(dim: usize) -> Self {
        Self { dim, atoms: Vec::new(), density: None, discretized: Vec::new() }
    }

    pub fn from_atoms(dim: usize, atoms: Vec<JumpAtom<T>>) -> Result<Self> {
        Self::new(dim, atoms, None)
    }

    pub fn new(dim: usize, atoms: Vec<JumpAtom<T>>, density: Option<JumpDensity<T>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be positive".into()));
        }
        let mut discretized = Vec::with_capacity(atoms.len());
        for a in &atoms {
            if a.size.len() != dim {
                return Err(Error::InvalidParameter(format!(
                    "jump atom of length {} in a {dim}-dimensional market",
                    a.size.len()
                )));
            }
            if !(a.intensity > T::zero()) || !a.intensity.is_finite() {
                return Err(Error::InvalidParameter(format!("jump intensity must be positive, got {}", a.intensity)));
            }
            if a.size.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidParameter("jump sizes must be finite".into()));
            }
            discretized.push(WeightedJump { size: a.size.clone(), weight: a.intensity });
        }
        if let Some(d) = &density {
            if dim != 1 {
                return Err(Error::InvalidParameter("jump densities are supported in dimension 1 only".into()));
            }
            if d.nodes < MIN_DENSITY_NODES {
                return Err(Error::InvalidParameter(format!(
                    "density quadrature needs at least {MIN_DENSITY_NODES} nodes, got {}",
                    d.nodes
                )));
            }
            if !(d.lower < d.upper) || !d.lower.is_finite() || !d.upper.is_finite() {
                return Err(Error::InvalidParameter("density box must be a bounded nonempty interval".into()));
            }
            let (xs, ws) = gauss_legendre(d.nodes);
            let half = (d.upper - d.lower) / T::lit(2.0);
            let mid = (d.upper + d.lower) / T::lit(2.0);
            for (&x, &w) in xs.iter().zip(&ws) {
                let at = mid + half * T::lit(x);
                let f = (d.density)(at);
                if f < T::zero() || !f.is_finite() {
                    return Err(Error::InvalidParameter(format!("jump density must be finite and nonnegative, f({at}) = {f}")));
                }
                let weight = half * T::lit(w) * f;
                if weight > T::zero() {
                    discretized.push(WeightedJump { size: vec![at], weight });
                }
            }
        }
        Ok(Self { dim, atoms, density, discretized })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn atoms(&self) -> &[JumpAtom<T>] {
        &self.atoms
    }

    pub fn density(&self) -> Option<&JumpDensity<T>> {
        self.density.as_ref()
    }

    /// Atoms followed by the quadrature nodes of the density part. Every
    /// integral against the measure in this crate is a finite sum over these.
    pub fn weighted_jumps(&self) -> &[WeightedJump<T>] {
        &self.discretized
    }

    pub fn total_intensity(&self) -> T {
        self.discretized.iter().map(|j| j.weight).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.discretized.is_empty()
    }

    /// `∫ h(x) F(dx)` with the truncation `h(x) = x 1{|x| <= 1}`.
    pub fn truncated_mean(&self) -> Vec<T> {
        let mut m = vec![T::zero(); self.dim];
        for j in &self.discretized {
            if within_cutoff(&j.size) {
                for (mi, &xi) in m.iter_mut().zip(&j.size) {
                    *mi = *mi + j.weight * xi;
                }
            }
        }
        m
    }

    /// Support points whose half-spaces `y.x >= -1` make up the budget
    /// constraint. For a density these are the box endpoints.
    pub fn support_points(&self) -> Vec<Vec<T>> {
        let mut pts: Vec<Vec<T>> = self.atoms.iter().map(|a| a.size.clone()).collect();
        if let Some(d) = &self.density {
            pts.push(vec![d.lower]);
            pts.push(vec![d.upper]);
        }
        pts
    }
}

/// Membership in the region where the cut-off function is the identity.
pub fn within_cutoff<T: Scalar>(x: &[T]) -> bool {
    x.iter().map(|&v| v * v).sum::<T>() <= T::one()
}

/// `h(x) = x 1{|x| <= 1}`.
pub fn cutoff<T: Scalar>(x: &[T]) -> Vec<T> {
    if within_cutoff(x) {
        x.to_vec()
    } else {
        vec![T::zero(); x.len()]
    }
}

/// Integral of a nonnegative weight over the tail `{|x| > start}` of the real
/// line, evaluated on dyadic shells. Returns the partial sum and whether the
/// shell contributions decay geometrically (the integral is then finite).
pub(crate) fn dyadic_tail<T: Scalar, F: Fn(T) -> T>(f: F, start: T, side: TailSide) -> (T, bool) {
    const SHELLS: usize = 40;
    const WINDOW: usize = 8;
    let (xs, ws) = gauss_legendre(32);
    let mut shells = Vec::with_capacity(SHELLS);
    let mut lo = start.max(T::min_positive_value());
    for _ in 0..SHELLS {
        let hi = lo * T::lit(2.0);
        let half = (hi - lo) / T::lit(2.0);
        let mid = (hi + lo) / T::lit(2.0);
        let s: T = xs
            .iter()
            .zip(&ws)
            .map(|(&x, &w)| {
                let at = mid + half * T::lit(x);
                let v = match side {
                    TailSide::Right => f(at),
                    TailSide::Left => f(-at),
                    TailSide::Both => f(at) + f(-at),
                };
                T::lit(w) * v
            })
            .sum::<T>()
            * half;
        shells.push(s);
        lo = hi;
    }
    let total: T = shells.iter().copied().sum();
    if !total.is_finite() {
        return (total, false);
    }
    let tail = &shells[SHELLS - WINDOW..];
    let scale = shells.iter().fold(T::zero(), |m, &s| m.max(s.abs()));
    if tail.iter().all(|&s| s.abs() <= T::epsilon() * scale) {
        return (total, true);
    }
    // geometric decay: successive ratios bounded away from one
    let converging = tail.windows(2).all(|w| w[0] > T::zero() && w[1] / w[0] < T::lit(0.999))
        || tail.iter().all(|&s| s == T::zero());
    (total, converging)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum TailSide {
    #[cfg_attr(not(test), allow(dead_code))]
    Right,
    Left,
    Both,
}
