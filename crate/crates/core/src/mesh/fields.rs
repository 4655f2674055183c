use std::ops::{Add, Index, IndexMut, Sub};

use super::Grid;
use crate::error::{Error, Result};

/// Nodal scalar values on a [`Grid`], row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self { nx: grid.nx(), ny: grid.ny(), values: vec![c; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|k| {
                let (x, y) = grid.point(k);
                f(x, y)
            })
            .collect();
        Self { nx: grid.nx(), ny: grid.ny(), values }
    }

    pub fn from_vec(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        grid.check_len(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("scalar field"));
        }
        Ok(Self { nx: grid.nx(), ny: grid.ny(), values })
    }

    /// Wraps raw values produced by an operator on `grid`; the caller
    /// guarantees the length.
    pub(crate) fn wrap(grid: &Grid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { nx: grid.nx(), ny: grid.ny(), values }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { nx: self.nx, ny: self.ny, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.len(), other.len());
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { nx: self.nx, ny: self.ny, values }
    }

    /// `self += a·x`
    pub fn axpy(&mut self, a: f64, x: &Self) {
        for (s, &v) in self.values.iter_mut().zip(&x.values) {
            *s += a * v;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        self.map(|v| a * v)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Discrete L² inner product with trapezoidal weights.
    pub fn inner_h(&self, grid: &Grid, other: &Self) -> f64 {
        weighted_dot(grid.weights(), &self.values, &other.values)
    }

    pub fn norm_h(&self, grid: &Grid) -> f64 {
        self.inner_h(grid, self).sqrt()
    }

    pub fn integral(&self, grid: &Grid) -> f64 {
        grid.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    pub fn mean(&self, grid: &Grid) -> f64 {
        self.integral(grid) / grid.area()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

impl Index<usize> for ScalarField {
    type Output = f64;

    fn index(&self, k: usize) -> &f64 {
        &self.values[k]
    }
}

impl IndexMut<usize> for ScalarField {
    fn index_mut(&mut self, k: usize) -> &mut f64 {
        &mut self.values[k]
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;

    fn add(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;

    fn sub(self, rhs: Self) -> ScalarField {
        self.zip_map(rhs, |a, b| a - b)
    }
}

pub(crate) fn weighted_dot(w: &[f64], a: &[f64], b: &[f64]) -> f64 {
    w.iter().zip(a).zip(b).map(|((w, a), b)| w * a * b).sum()
}

/// Nodal 2-vector field (displacement, body force, traction data).
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    nx: usize,
    ny: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl VectorField2 {
    pub fn zeros(grid: &Grid) -> Self {
        Self { nx: grid.nx(), ny: grid.ny(), x: vec![0.0; grid.len()], y: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> (f64, f64)) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..grid.len() {
            let (x, y) = grid.point(k);
            let (a, b) = f(x, y);
            out.x[k] = a;
            out.y[k] = b;
        }
        out
    }

    pub fn from_components(grid: &Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        grid.check_len(x.len())?;
        grid.check_len(y.len())?;
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector field"));
        }
        Ok(Self { nx: grid.nx(), ny: grid.ny(), x, y })
    }

    /// Interleaved degrees of freedom `[x0, y0, x1, y1, ...]`.
    pub fn to_dofs(&self) -> Vec<f64> {
        let mut d = Vec::with_capacity(2 * self.x.len());
        for (a, b) in self.x.iter().zip(&self.y) {
            d.push(*a);
            d.push(*b);
        }
        d
    }

    pub fn from_dofs(grid: &Grid, dofs: &[f64]) -> Self {
        debug_assert_eq!(dofs.len(), 2 * grid.len());
        let mut out = Self::zeros(grid);
        for k in 0..grid.len() {
            out.x[k] = dofs[2 * k];
            out.y[k] = dofs[2 * k + 1];
        }
        out
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn axpy(&mut self, a: f64, v: &Self) {
        for (s, &w) in self.x.iter_mut().zip(&v.x) {
            *s += a * w;
        }
        for (s, &w) in self.y.iter_mut().zip(&v.y) {
            *s += a * w;
        }
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self {
            nx: self.nx,
            ny: self.ny,
            x: self.x.iter().map(|v| a * v).collect(),
            y: self.y.iter().map(|v| a * v).collect(),
        }
    }

    pub fn magnitude(&self, grid: &Grid) -> ScalarField {
        ScalarField::wrap(grid, self.x.iter().zip(&self.y).map(|(a, b)| a.hypot(*b)).collect())
    }

    pub fn norm_h(&self, grid: &Grid) -> f64 {
        let w = grid.weights();
        (weighted_dot(w, &self.x, &self.x) + weighted_dot(w, &self.y, &self.y)).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.iter().chain(&self.y).fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let dx = self.x.iter().zip(&other.x).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let dy = self.y.iter().zip(&other.y).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        dx.max(dy)
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// True when every Dirichlet-tagged node carries exactly zero.
    pub fn satisfies_dirichlet(&self, grid: &Grid) -> bool {
        (0..grid.len()).filter(|&k| grid.is_dirichlet_node(k)).all(|k| self.x[k] == 0.0 && self.y[k] == 0.0)
    }
}

/// Pointwise symmetric 2×2 tensor.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sym2 {
    pub xx: f64,
    pub yy: f64,
    pub xy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 { xx: 0.0, yy: 0.0, xy: 0.0 };

    pub fn new(xx: f64, yy: f64, xy: f64) -> Self {
        Self { xx, yy, xy }
    }

    pub fn iso(s: f64) -> Self {
        Self { xx: s, yy: s, xy: 0.0 }
    }

    pub fn trace(&self) -> f64 {
        self.xx + self.yy
    }

    /// Full contraction `A : B`.
    pub fn ddot(&self, o: &Sym2) -> f64 {
        self.xx * o.xx + self.yy * o.yy + 2.0 * self.xy * o.xy
    }

    pub fn scale(&self, a: f64) -> Sym2 {
        Sym2 { xx: a * self.xx, yy: a * self.yy, xy: a * self.xy }
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }
}

impl Add for Sym2 {
    type Output = Sym2;

    fn add(self, o: Sym2) -> Sym2 {
        Sym2 { xx: self.xx + o.xx, yy: self.yy + o.yy, xy: self.xy + o.xy }
    }
}

impl Sub for Sym2 {
    type Output = Sym2;

    fn sub(self, o: Sym2) -> Sym2 {
        Sym2 { xx: self.xx - o.xx, yy: self.yy - o.yy, xy: self.xy - o.xy }
    }
}

/// Nodal symmetric tensor field; the off-diagonal is stored once.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensorField {
    nx: usize,
    ny: usize,
    pub xx: Vec<f64>,
    pub yy: Vec<f64>,
    pub xy: Vec<f64>,
}

impl SymTensorField {
    pub fn zeros(grid: &Grid) -> Self {
        let n = grid.len();
        Self { nx: grid.nx(), ny: grid.ny(), xx: vec![0.0; n], yy: vec![0.0; n], xy: vec![0.0; n] }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> Sym2) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..grid.len() {
            let (x, y) = grid.point(k);
            out.set(k, f(x, y));
        }
        out
    }

    pub fn len(&self) -> usize {
        self.xx.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xx.is_empty()
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    #[inline]
    pub fn at(&self, k: usize) -> Sym2 {
        Sym2 { xx: self.xx[k], yy: self.yy[k], xy: self.xy[k] }
    }

    #[inline]
    pub fn set(&mut self, k: usize, s: Sym2) {
        self.xx[k] = s.xx;
        self.yy[k] = s.yy;
        self.xy[k] = s.xy;
    }

    pub fn trace(&self, grid: &Grid) -> ScalarField {
        ScalarField::wrap(grid, self.xx.iter().zip(&self.yy).map(|(a, b)| a + b).collect())
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..self.len()).fold(0.0, |m, k| {
            let d = self.at(k) - other.at(k);
            m.max(d.xx.abs()).max(d.yy.abs()).max(d.xy.abs())
        })
    }
}
