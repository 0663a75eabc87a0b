//! Admissibility regions for portfolio proportions.

use crate::error::{Error, Result};
use crate::linalg::{dot, norm};
use crate::scalar::Scalar;

use super::LevyMarket;

/// `{ y : normal . y <= offset }`
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace<T> {
    pub normal: Vec<T>,
    pub offset: T,
}

/// Closed convex polyhedron `{ lower <= y <= upper } ∩ halfspaces`.
///
/// Coordinates with `lower == upper` are frozen; interior is measured
/// relative to the remaining free coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub halfspaces: Vec<Halfspace<T>>,
}

impl<T: Scalar> ConstraintSet<T> {
    pub fn unbounded(dim: usize) -> Self {
        Self { lower: vec![T::neg_infinity(); dim], upper: vec![T::infinity(); dim], halfspaces: Vec::new() }
    }

    pub fn boxed(lower: Vec<T>, upper: Vec<T>) -> Self {
        Self { lower, upper, halfspaces: Vec::new() }
    }

    pub fn interval(lower: T, upper: T) -> Self {
        Self::boxed(vec![lower], vec![upper])
    }

    /// The no-trade set `{0}`.
    pub fn origin(dim: usize) -> Self {
        Self::boxed(vec![T::zero(); dim], vec![T::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn contains(&self, y: &[T]) -> bool {
        self.contains_with_tol(y, T::zero())
    }

    pub fn contains_with_tol(&self, y: &[T], tol: T) -> bool {
        y.len() == self.dim()
            && y.iter().zip(self.lower.iter().zip(&self.upper)).all(|(&v, (&lo, &hi))| v >= lo - tol && v <= hi + tol)
            && self.halfspaces.iter().all(|h| dot(&h.normal, y) <= h.offset + tol)
    }

    pub fn contains_origin(&self) -> bool {
        self.contains(&vec![T::zero(); self.dim()])
    }

    pub fn intersect(&self, other: &Self) -> Self {
        Self {
            lower: self.lower.iter().zip(&other.lower).map(|(&a, &b)| a.max(b)).collect(),
            upper: self.upper.iter().zip(&other.upper).map(|(&a, &b)| a.min(b)).collect(),
            halfspaces: self.halfspaces.iter().chain(&other.halfspaces).cloned().collect(),
        }
    }

    pub fn is_frozen(&self, i: usize) -> bool {
        self.lower[i] == self.upper[i]
    }

    /// Folds half-spaces into the bounds. Only meaningful in dimension one.
    pub fn interval_bounds(&self) -> (T, T) {
        assert_eq!(self.dim(), 1, "interval_bounds on a multi-dimensional set");
        let (mut lo, mut hi) = (self.lower[0], self.upper[0]);
        for h in &self.halfspaces {
            let a = h.normal[0];
            if a > T::zero() {
                hi = hi.min(h.offset / a);
            } else if a < T::zero() {
                lo = lo.max(h.offset / a);
            } else if h.offset < T::zero() {
                return (T::infinity(), T::neg_infinity());
            }
        }
        (lo, hi)
    }

    /// In dimension one, rewrites the set as a plain interval.
    pub fn canonical(&self) -> Self {
        if self.dim() == 1 {
            let (lo, hi) = self.interval_bounds();
            Self::interval(lo, hi)
        } else {
            self.clone()
        }
    }

    pub fn is_bounded(&self) -> bool {
        if self.dim() == 1 {
            let (lo, hi) = self.interval_bounds();
            return lo.is_finite() && hi.is_finite();
        }
        self.lower.iter().chain(&self.upper).all(|v| v.is_finite())
    }

    /// Clips `y` into the box part of the set.
    pub fn clamp_box(&self, y: &[T]) -> Vec<T> {
        y.iter().zip(self.lower.iter().zip(&self.upper)).map(|(&v, (&lo, &hi))| v.max(lo).min(hi)).collect()
    }

    /// Nonempty interior relative to the free coordinates, given that the
    /// origin belongs to the set.
    fn has_relative_interior(&self) -> bool {
        let n = self.dim();
        let free: Vec<usize> = (0..n).filter(|&i| !self.is_frozen(i)).collect();
        if free.is_empty() {
            return true;
        }
        // constraints active at the origin, restricted to free coordinates
        let mut tight: Vec<Vec<T>> = Vec::new();
        for &i in &free {
            let mut e = vec![T::zero(); free.len()];
            let k = free.iter().position(|&j| j == i).unwrap();
            if self.lower[i] == T::zero() {
                e[k] = -T::one();
                tight.push(e.clone());
            }
            if self.upper[i] == T::zero() {
                e[k] = T::one();
                tight.push(e);
            }
        }
        for h in &self.halfspaces {
            if h.offset == T::zero() {
                let a: Vec<T> = free.iter().map(|&i| h.normal[i]).collect();
                if norm(&a) == T::zero() {
                    continue;
                }
                tight.push(a);
            }
        }
        if tight.is_empty() {
            return true;
        }
        // perceptron search for d with a.d < 0 for every tight a
        let normed: Vec<Vec<T>> = tight
            .iter()
            .map(|a| {
                let s = norm(a);
                a.iter().map(|&v| v / s).collect()
            })
            .collect();
        let mut d = vec![T::zero(); free.len()];
        for _ in 0..10_000 {
            match normed.iter().find(|a| dot(a, &d) >= -T::epsilon().sqrt() * norm(&d).max(T::epsilon())) {
                None => return true,
                Some(a) => {
                    for (di, &ai) in d.iter_mut().zip(a.iter()) {
                        *di = *di - ai;
                    }
                }
            }
        }
        false
    }
}

/// Budget constraint of the market, `{y : y.x >= -1 for every jump x}`,
/// intersected with optional user constraints.
pub fn constraint_set<T: Scalar>(market: &LevyMarket<T>, user: Option<&ConstraintSet<T>>) -> Result<ConstraintSet<T>> {
    let dim = market.dim();
    let mut set = ConstraintSet::unbounded(dim);
    for x in market.jumps().support_points() {
        if x.iter().all(|&v| v == T::zero()) {
            continue;
        }
        set.halfspaces.push(Halfspace { normal: x.iter().map(|&v| -v).collect(), offset: T::one() });
    }
    if let Some(u) = user {
        if u.dim() != dim {
            return Err(Error::InvalidParameter(format!("constraint set of dimension {} for a {dim}-asset market", u.dim())));
        }
        if !u.contains_origin() {
            return Err(Error::OriginExcluded);
        }
        set = set.intersect(u);
    }
    let set = set.canonical();
    if dim == 1 {
        let (lo, hi) = set.interval_bounds();
        let degenerate_at_origin = lo == T::zero() && hi == T::zero();
        if !(lo < hi) && !degenerate_at_origin {
            return Err(Error::EmptyInterior);
        }
    } else if !set.has_relative_interior() {
        return Err(Error::EmptyInterior);
    }
    debug_assert!(set.contains_origin());
    Ok(set)
}
