//! Uniform tensor grids and compactly supported sampled functions.
//!
//! Samples live at cell centres `lower + (i + 1/2) h`, row-major with the
//! last axis fastest. Everything outside the box is zero.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par;

pub const MAX_DIM: usize = 3;
/// Default cap on the total number of grid points.
pub const DEFAULT_POINT_CAP: usize = 1 << 22;
/// Relative slack accepted when checking that a shift is a multiple of `h`.
const ALIGN_TOL: f64 = 1e-9;
/// Chunk length for deterministic blocked summation.
pub(crate) const SUM_CHUNK: usize = 4096;

/// Axis-parallel box `[lower, upper]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl GridBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = lower.len();
        if d == 0 || d > MAX_DIM || upper.len() != d {
            return Err(invalid(format!("box dimension must be 1..=3, got {d}")));
        }
        for i in 0..d {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(invalid(format!(
                    "box axis {i}: need lower < upper, got [{}, {}]",
                    lower[i], upper[i]
                )));
            }
        }
        Ok(Self { lower, upper })
    }

    /// `[-half_width, half_width]^d`.
    pub fn centered_cube(d: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; d], vec![half_width; d])
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn width(&self, axis: usize) -> f64 {
        self.upper[axis] - self.lower[axis]
    }

    pub fn volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.width(a)).product()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(&xi, (&lo, &hi))| lo <= xi && xi <= hi)
    }
}

/// Uniform grid over a [`GridBox`].
#[derive(Clone, Debug, PartialEq)]
pub struct Grid {
    bounds: GridBox,
    n: Vec<usize>,
    h: Vec<f64>,
}

impl Grid {
    pub fn new(bounds: GridBox, n: Vec<usize>) -> Result<Self> {
        Self::with_cap(bounds, n, DEFAULT_POINT_CAP)
    }

    pub fn with_cap(bounds: GridBox, n: Vec<usize>, cap: usize) -> Result<Self> {
        if n.len() != bounds.dim() {
            return Err(invalid("grid point counts do not match box dimension"));
        }
        if n.iter().any(|&k| k < 2) {
            return Err(invalid("need at least 2 points per axis"));
        }
        let total = n.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k));
        match total {
            Some(t) if t <= cap => {}
            _ => return Err(invalid(format!("grid exceeds the point cap {cap}"))),
        }
        let h = (0..n.len())
            .map(|a| bounds.width(a) / n[a] as f64)
            .collect();
        Ok(Self { bounds, n, h })
    }

    /// `[-half_width, half_width]^d` with `n` points per axis.
    pub fn centered(d: usize, half_width: f64, n: usize) -> Result<Self> {
        Self::new(GridBox::centered_cube(d, half_width)?, vec![n; d])
    }

    pub fn bounds(&self) -> &GridBox {
        &self.bounds
    }

    pub fn dim(&self) -> usize {
        self.n.len()
    }

    pub fn n(&self) -> &[usize] {
        &self.n
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn len(&self) -> usize {
        self.n.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn cell_volume(&self) -> f64 {
        self.h.iter().product()
    }

    /// Row-major strides (last axis fastest); unused axes get stride 0.
    pub fn strides(&self) -> [usize; MAX_DIM] {
        let mut s = [0usize; MAX_DIM];
        let d = self.dim();
        let mut acc = 1;
        for a in (0..d).rev() {
            s[a] = acc;
            acc *= self.n[a];
        }
        s
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        self.bounds.lower[axis] + (i as f64 + 0.5) * self.h[axis]
    }

    pub fn unravel(&self, flat: usize) -> [usize; MAX_DIM] {
        let mut idx = [0usize; MAX_DIM];
        let mut rem = flat;
        for a in (0..self.dim()).rev() {
            idx[a] = rem % self.n[a];
            rem /= self.n[a];
        }
        idx
    }

    pub fn ravel(&self, idx: &[usize]) -> usize {
        let s = self.strides();
        (0..self.dim()).map(|a| idx[a] * s[a]).sum()
    }

    /// Cell-centre coordinates of a flat index; trailing entries are zero.
    pub fn point(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.unravel(flat);
        let mut x = [0.0; MAX_DIM];
        for a in 0..self.dim() {
            x[a] = self.coord(a, idx[a]);
        }
        x
    }

    /// Same box, `factor` times more points per axis.
    pub fn refined(&self, factor: usize) -> Result<Self> {
        Self::new(
            self.bounds.clone(),
            self.n.iter().map(|&k| k * factor).collect(),
        )
    }

    /// Converts a shift along `axis` into a whole number of cells.
    pub fn cells_for_shift(&self, axis: usize, u: f64) -> Result<isize> {
        let h = self.h[axis];
        let k = u / h;
        let r = k.round();
        if !u.is_finite() || (k - r).abs() > ALIGN_TOL * k.abs().max(1.0) {
            return Err(Error::UnalignedShift(u, h));
        }
        Ok(r as isize)
    }

    /// True when the origin lies on a cell vertex strictly inside the box,
    /// so no sample sits at `0` and the nearest samples are at `±h/2`.
    pub fn origin_on_vertex(&self) -> bool {
        (0..self.dim()).all(|a| {
            let lo = self.bounds.lower[a];
            let k = -lo / self.h[a];
            let r = k.round();
            (k - r).abs() < ALIGN_TOL && r >= 1.0 && (r as usize) < self.n[a]
        })
    }
}

/// Quadrature flavour for sampled data.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum QuadKind {
    #[default]
    Midpoint,
    Trapezoid,
}

/// Tensor-product quadrature rule. `refinement` is the number of sub-samples
/// per cell and axis used whenever a weight or analytic function is
/// integrated rather than stored samples.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub kind: QuadKind,
    pub refinement: usize,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self::midpoint()
    }
}

impl QuadratureRule {
    pub fn midpoint() -> Self {
        Self {
            kind: QuadKind::Midpoint,
            refinement: 1,
        }
    }

    pub fn trapezoid() -> Self {
        Self {
            kind: QuadKind::Trapezoid,
            refinement: 1,
        }
    }

    pub fn with_refinement(mut self, refinement: usize) -> Self {
        self.refinement = refinement;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.refinement == 0 {
            return Err(invalid("quadrature refinement must be >= 1"));
        }
        Ok(())
    }

    /// Per-node weight factor in `[0.5^d, 1]` for the trapezoid ends.
    pub(crate) fn node_factor(&self, grid: &Grid, flat: usize) -> f64 {
        match self.kind {
            QuadKind::Midpoint => 1.0,
            QuadKind::Trapezoid => {
                let idx = grid.unravel(flat);
                (0..grid.dim())
                    .map(|a| {
                        if idx[a] == 0 || idx[a] + 1 == grid.n[a] {
                            0.5
                        } else {
                            1.0
                        }
                    })
                    .product()
            }
        }
    }
}

/// Compactly supported function sampled on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    samples: Vec<f64>,
    /// Zero cells before the first and after the last nonzero sample, per axis.
    free: Vec<(usize, usize)>,
}

impl GridFunction {
    pub fn new(grid: Grid, samples: Vec<f64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(invalid(format!(
                "expected {} samples, got {}",
                grid.len(),
                samples.len()
            )));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        let free = free_cells(&grid, &samples);
        Ok(Self {
            grid,
            samples,
            free,
        })
    }

    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self::new(grid, vec![0.0; n]).expect("zeros are finite")
    }

    /// Samples `f` at every cell centre.
    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync + Send) -> Result<Self> {
        let d = grid.dim();
        let samples = par::map_range(grid.len(), |i| {
            let x = grid.point(i);
            f(&x[..d])
        });
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    /// Zero cells at the (low, high) end of `axis`.
    pub fn free_cells(&self, axis: usize) -> (usize, usize) {
        self.free[axis]
    }

    /// Distance from the support to the nearest box face.
    pub fn support_margin(&self) -> f64 {
        (0..self.grid.dim())
            .map(|a| {
                let (lo, hi) = self.free[a];
                lo.min(hi) as f64 * self.grid.h[a]
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn is_zero(&self) -> bool {
        self.samples.iter().all(|&v| v == 0.0)
    }

    pub fn is_nonnegative(&self) -> bool {
        self.samples.iter().all(|&v| v >= 0.0)
    }

    pub fn sup_abs(&self) -> f64 {
        self.samples.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.samples.iter().map(|&v| f(v)).collect(),
        )
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Self::new(
            self.grid.clone(),
            self.samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        )
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    pub fn abs(&self) -> Self {
        self.map(f64::abs).expect("abs of finite is finite")
    }

    /// `a·self + b·other`.
    pub fn axpby(&self, a: f64, other: &Self, b: f64) -> Result<Self> {
        self.zip_with(other, |x, y| a * x + b * y)
    }

    /// Max absolute difference.
    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }
}

fn free_cells(grid: &Grid, samples: &[f64]) -> Vec<(usize, usize)> {
    let d = grid.dim();
    let mut first = vec![usize::MAX; d];
    let mut last = vec![0usize; d];
    let mut any = false;
    for (flat, &v) in samples.iter().enumerate() {
        if v != 0.0 {
            any = true;
            let idx = grid.unravel(flat);
            for a in 0..d {
                first[a] = first[a].min(idx[a]);
                last[a] = last[a].max(idx[a]);
            }
        }
    }
    (0..d)
        .map(|a| {
            if any {
                (first[a], grid.n[a] - 1 - last[a])
            } else {
                (grid.n[a], grid.n[a])
            }
        })
        .collect()
}

/// Deterministic blocked sum of `term(i)` over `0..n`.
pub(crate) fn det_sum(n: usize, term: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let blocks = n.div_ceil(SUM_CHUNK);
    let partial = par::map_range(blocks, |b| {
        let lo = b * SUM_CHUNK;
        let hi = (lo + SUM_CHUNK).min(n);
        (lo..hi).map(&term).sum::<f64>()
    });
    partial.into_iter().sum()
}

/// Tensor-product quadrature of the samples.
pub fn integrate(f: &GridFunction, rule: &QuadratureRule) -> Result<f64> {
    rule.validate()?;
    let grid = f.grid();
    let s = f.samples();
    let v = grid.cell_volume();
    let total = det_sum(s.len(), |i| s[i] * rule.node_factor(grid, i));
    let out = total * v;
    if !out.is_finite() {
        return Err(Error::NonFiniteInput);
    }
    Ok(out)
}

/// How [`translate_with`] treats shifts that are not multiples of `h`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ShiftPolicy {
    #[default]
    Strict,
    /// Multilinear interpolation between samples. Not used by the checks.
    Interpolate,
}

/// `x ↦ f(x + u)` for a grid-aligned `u`.
pub fn translate(f: &GridFunction, u: &[f64]) -> Result<GridFunction> {
    translate_with(f, u, ShiftPolicy::Strict)
}

pub fn translate_with(f: &GridFunction, u: &[f64], policy: ShiftPolicy) -> Result<GridFunction> {
    let grid = f.grid();
    let d = grid.dim();
    if u.len() != d {
        return Err(invalid("shift dimension does not match grid"));
    }
    match policy {
        ShiftPolicy::Strict => {
            let mut k = [0isize; MAX_DIM];
            for a in 0..d {
                k[a] = grid.cells_for_shift(a, u[a])?;
            }
            Ok(shift_cells(f, &k[..d]))
        }
        ShiftPolicy::Interpolate => translate_linear(f, u),
    }
}

/// `g[i] = f[i + k]`, zero where `i + k` leaves the grid.
pub(crate) fn shift_cells(f: &GridFunction, k: &[isize]) -> GridFunction {
    let grid = f.grid().clone();
    let d = grid.dim();
    let n = grid.n().to_vec();
    let src = f.samples();
    let strides = grid.strides();
    let mut out = vec![0.0; grid.len()];
    let row = n[d - 1];
    par::fill_chunks(&mut out, row, |r, chunk| {
        let base = grid.unravel(r * row);
        let mut off = 0isize;
        for a in 0..d - 1 {
            let j = base[a] as isize + k[a];
            if j < 0 || j >= n[a] as isize {
                return;
            }
            off += j * strides[a] as isize;
        }
        let kl = k[d - 1];
        for (i, slot) in chunk.iter_mut().enumerate() {
            let j = i as isize + kl;
            if j >= 0 && j < row as isize {
                *slot = src[(off + j) as usize];
            }
        }
    });
    GridFunction::new(grid, out).expect("shift of finite samples is finite")
}

fn translate_linear(f: &GridFunction, u: &[f64]) -> Result<GridFunction> {
    let grid = f.grid().clone();
    let d = grid.dim();
    let mut base = [0isize; MAX_DIM];
    let mut frac = [0.0; MAX_DIM];
    for a in 0..d {
        if !u[a].is_finite() {
            return Err(Error::NonFiniteInput);
        }
        let k = u[a] / grid.h()[a];
        base[a] = k.floor() as isize;
        frac[a] = k - k.floor();
    }
    let mut acc = vec![0.0; grid.len()];
    for corner in 0..(1usize << d) {
        let mut k = [0isize; MAX_DIM];
        let mut w = 1.0;
        for a in 0..d {
            let bit = (corner >> a) & 1;
            k[a] = base[a] + bit as isize;
            w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
        }
        if w == 0.0 {
            continue;
        }
        let shifted = shift_cells(f, &k[..d]);
        for (o, s) in acc.iter_mut().zip(shifted.samples()) {
            *o += w * s;
        }
    }
    GridFunction::new(grid, acc)
}

/// Elementwise operations for [`pointwise`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PointwiseOp {
    Add,
    Sub,
    Mul,
    Abs,
    Pow(f64),
    Scale(f64),
}

/// Elementwise combination. Unary ops ignore `g` but still require a matching
/// grid when it is given.
pub fn pointwise(f: &GridFunction, g: Option<&GridFunction>, op: PointwiseOp) -> Result<GridFunction> {
    if let Some(g) = g {
        if g.grid() != f.grid() {
            return Err(Error::GridMismatch);
        }
    }
    let need = || g.ok_or_else(|| invalid("binary pointwise op needs a second operand"));
    match op {
        PointwiseOp::Add => f.add(need()?),
        PointwiseOp::Sub => f.sub(need()?),
        PointwiseOp::Mul => f.mul(need()?),
        PointwiseOp::Abs => Ok(f.abs()),
        PointwiseOp::Pow(e) => f.map(|v| v.powf(e)),
        PointwiseOp::Scale(c) => f.scale(c),
    }
}
