//! Power-utility preferences `U_t(x) = D_t x^p / p` with a deterministic
//! step-function discount `D`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Whether utility is drawn from intermediate consumption as well as from
/// the bulk consumption of remaining wealth at the horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ConsumptionMode {
    TerminalOnly,
    #[default]
    WithConsumption,
}

/// Right-continuous step function on `[0, T]`.
///
/// `values[0]` applies on `[0, b_0)`, `values[i]` on `[b_{i-1}, b_i)` and the
/// last value on `[b_last, T]`. A breakpoint at `T` itself changes only `D_T`.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseDiscount<T> {
    breakpoints: Vec<T>,
    values: Vec<T>,
    horizon: T,
}

impl<T: Scalar> PiecewiseDiscount<T> {
    pub fn new(breakpoints: Vec<T>, values: Vec<T>, horizon: T) -> Result<Self> {
        if !(horizon > T::zero()) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        if values.len() != breakpoints.len() + 1 {
            return Err(Error::InvalidParameter(format!(
                "{} discount breakpoints need {} values, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                values.len()
            )));
        }
        if breakpoints.iter().any(|&b| !(b > T::zero() && b <= horizon)) {
            return Err(Error::InvalidParameter("discount breakpoints must lie in (0, T]".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("discount breakpoints must be strictly increasing".into()));
        }
        if values.iter().any(|&v| !(v > T::zero()) || !v.is_finite()) {
            return Err(Error::InvalidParameter("discount values must be positive and finite".into()));
        }
        Ok(Self { breakpoints, values, horizon })
    }

    pub fn constant(value: T, horizon: T) -> Result<Self> {
        Self::new(Vec::new(), vec![value], horizon)
    }

    pub fn unit(horizon: T) -> Self {
        Self::constant(T::one(), horizon).expect("unit discount on a positive horizon")
    }

    pub fn horizon(&self) -> T {
        self.horizon
    }

    pub fn breakpoints(&self) -> &[T] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_constant(&self) -> bool {
        self.values.iter().all(|&v| v == self.values[0])
    }

    /// `D_t`, right-continuous.
    pub fn at(&self, t: T) -> T {
        let idx = self.breakpoints.iter().take_while(|&&b| b <= t).count();
        self.values[idx]
    }

    pub fn terminal(&self) -> T {
        self.at(self.horizon)
    }

    /// Lower bound `k1 = min D`.
    pub fn k1(&self) -> T {
        self.values.iter().copied().fold(T::infinity(), T::min)
    }

    /// Upper bound `k2 = max D`.
    pub fn k2(&self) -> T {
        self.values.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Pieces `(start, end, value)` covering `[0, T)`; the value at `T` is
    /// [`terminal`](Self::terminal).
    pub fn pieces(&self) -> Vec<(T, T, T)> {
        let mut out = Vec::with_capacity(self.values.len());
        let mut start = T::zero();
        for (i, &v) in self.values.iter().enumerate() {
            let end = self.breakpoints.get(i).copied().unwrap_or(self.horizon);
            if end > start {
                out.push((start, end, v));
            }
            start = end;
        }
        out
    }

    /// `∫_t^T D_s ds`.
    pub fn integral(&self, t: T) -> T {
        self.pieces()
            .into_iter()
            .map(|(a, b, v)| {
                let lo = a.max(t);
                if b > lo {
                    (b - lo) * v
                } else {
                    T::zero()
                }
            })
            .sum()
    }

    /// `∫_t^T D_s μ°(ds)` for the consumption clock `μ° = μ + δ_T`.
    pub fn integral_mu_circ(&self, t: T, mode: ConsumptionMode) -> T {
        match mode {
            ConsumptionMode::TerminalOnly => self.terminal(),
            ConsumptionMode::WithConsumption => self.integral(t) + self.terminal(),
        }
    }

    /// Multiplies `D` by `1 + xi` on `[t1, t2)`.
    pub fn with_window(&self, t1: T, t2: T, xi: T) -> Result<Self> {
        if !(T::zero() <= t1 && t1 < t2 && t2 <= self.horizon) {
            return Err(Error::InvalidParameter(format!("window [{t1}, {t2}) must lie in [0, T]")));
        }
        if !(xi > T::zero()) {
            return Err(Error::InvalidParameter(format!("window factor must be positive, got {xi}")));
        }
        let mut cuts: Vec<T> = self.breakpoints.clone();
        for c in [t1, t2] {
            if c > T::zero() && !cuts.contains(&c) {
                cuts.push(c);
            }
        }
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let starts = std::iter::once(T::zero()).chain(cuts.iter().copied());
        let values = starts
            .map(|s| {
                let base = self.at(s);
                if s >= t1 && s < t2 {
                    base * (T::one() + xi)
                } else {
                    base
                }
            })
            .collect();
        Self::new(cuts, values, self.horizon)
    }
}

/// Relative-risk-aversion parameter `p` with its derived exponents, the
/// discount process and the consumption mode.
#[derive(Debug, Clone, PartialEq)]
pub struct Preferences<T> {
    p: T,
    pub discount: PiecewiseDiscount<T>,
    pub mode: ConsumptionMode,
}

impl<T: Scalar> Preferences<T> {
    pub fn new(p: T, discount: PiecewiseDiscount<T>, mode: ConsumptionMode) -> Result<Self> {
        if !p.is_finite() || p == T::zero() || p >= T::one() {
            return Err(Error::InvalidParameter(format!("p must lie in (-inf, 0) or (0, 1), got {p}")));
        }
        Ok(Self { p, discount, mode })
    }

    /// Unit discount, intermediate consumption.
    pub fn standard(p: T, horizon: T) -> Result<Self> {
        Self::new(p, PiecewiseDiscount::unit(horizon), ConsumptionMode::WithConsumption)
    }

    pub fn p(&self) -> T {
        self.p
    }

    /// Relative risk tolerance `1 / (1 - p)`.
    pub fn beta(&self) -> T {
        T::one() / (T::one() - self.p)
    }

    /// Conjugate exponent `p / (p - 1)`.
    pub fn q(&self) -> T {
        self.p / (self.p - T::one())
    }

    pub fn horizon(&self) -> T {
        self.discount.horizon()
    }

    /// `U_t(x) = D_t x^p / p`
    pub fn utility(&self, t: T, x: T) -> T {
        self.discount.at(t) * x.powf(self.p) / self.p
    }

    /// Mass `μ°[t, T]` of the consumption clock.
    pub fn mu_circ_mass(&self, t: T) -> T {
        match self.mode {
            ConsumptionMode::TerminalOnly => T::one(),
            ConsumptionMode::WithConsumption => self.horizon() - t + T::one(),
        }
    }

    pub fn with_discount(&self, discount: PiecewiseDiscount<T>) -> Self {
        Self { p: self.p, discount, mode: self.mode }
    }
}
