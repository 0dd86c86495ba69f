//! Parameter vectors in `R^N`.

use alloc::vec::Vec;
use core::ops::{Deref, DerefMut};

/// A point in `R^N`, `N >= 1`.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    /// Wraps a vector of coordinates.
    pub fn new(coords: Vec<f64>) -> Self {
        ParamVector(coords)
    }

    /// The zero vector of dimension `n`.
    pub fn zeros(n: usize) -> Self {
        ParamVector(alloc::vec![0.0; n])
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Squared Euclidean norm.
    pub fn norm_sq(&self) -> f64 {
        norm_sq(&self.0)
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.norm_sq())
    }

    /// True when every coordinate is finite.
    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Multiplies every coordinate by `s`.
    pub fn scale(mut self, s: f64) -> Self {
        self.0.iter_mut().for_each(|v| *v *= s);
        self
    }

    /// `self += a * x`.
    pub fn axpy(&mut self, a: f64, x: &[f64]) {
        for (v, xi) in self.0.iter_mut().zip(x) {
            *v += a * xi;
        }
    }

    /// Consumes the wrapper.
    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Borrow as slice.
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        ParamVector(v)
    }
}

impl From<&[f64]> for ParamVector {
    fn from(v: &[f64]) -> Self {
        ParamVector(v.to_vec())
    }
}

/// Squared Euclidean norm of a slice.
pub fn norm_sq(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Euclidean norm of a slice.
pub fn norm(x: &[f64]) -> f64 {
    libm::sqrt(norm_sq(x))
}

/// Inner product.
pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Squared distance between two points.
pub fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Axis-aligned box `prod_i [lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoxDomain {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl BoxDomain {
    /// Builds a box; requires `lo_i <= hi_i` and equal lengths.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> crate::Result<Self> {
        crate::error::check_dim(lo.len(), hi.len())?;
        if lo.is_empty() {
            return Err(crate::Error::invalid("box", "dimension must be at least 1"));
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a <= b) || !a.is_finite() || !b.is_finite()) {
            return Err(crate::Error::invalid("box", "bounds must be finite with lo <= hi"));
        }
        Ok(BoxDomain { lo, hi })
    }

    /// The cube `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> crate::Result<Self> {
        BoxDomain::new(alloc::vec![lo; dim], alloc::vec![hi; dim])
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Lower corner.
    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    /// Upper corner.
    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// Closed-box membership.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    /// Clamps `x` into the box coordinatewise.
    pub fn project(&self, x: &mut [f64]) {
        for (v, (a, b)) in x.iter_mut().zip(self.lo.iter().zip(&self.hi)) {
            *v = v.clamp(*a, *b);
        }
    }

    /// Lebesgue volume `|Theta|`.
    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    /// The box grown by `margin` on every side.
    pub fn inflate(&self, margin: f64) -> crate::Result<Self> {
        BoxDomain::new(
            self.lo.iter().map(|v| v - margin).collect(),
            self.hi.iter().map(|v| v + margin).collect(),
        )
    }

    /// The box shifted by `c`.
    pub fn translate(&self, c: &[f64]) -> crate::Result<Self> {
        BoxDomain::new(
            self.lo.iter().zip(c).map(|(v, s)| v + s).collect(),
            self.hi.iter().zip(c).map(|(v, s)| v + s).collect(),
        )
    }
}
