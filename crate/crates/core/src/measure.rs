//! Discrete weighted measures `ω dx` on a grid and the `L_{p,ω}` norms built on them.

use crate::error::{Error, Result};
use crate::grid::{det_sum, Grid, GridFunction, QuadKind, QuadratureRule, MAX_DIM};
use crate::par;
use crate::weights::{singular, Weight};

/// Per-sample masses `W_i ≈ ∫_{cell i} ω`.
///
/// With the midpoint rule at refinement 1, a power weight whose singularity
/// sits on a cell vertex gets the lattice correction
/// `-C_d(α) h^{d+α} / 2^d` on each of the `2^d` cells touching the origin.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightedMeasure {
    grid: Grid,
    masses: Vec<f64>,
    corrected: bool,
}

impl WeightedMeasure {
    pub fn new(grid: &Grid, w: &Weight, rule: &QuadratureRule) -> Result<Self> {
        rule.validate()?;
        let d = grid.dim();
        w.validate(d)?;
        let vol = grid.cell_volume();
        let m = rule.refinement;
        let sub = m.pow(d as u32);
        let h = grid.h().to_vec();
        let mut masses = par::map_range(grid.len(), |i| {
            let c = grid.point(i);
            let omega = if m == 1 {
                w.eval(&c[..d])
            } else {
                let mut acc = 0.0;
                let mut x = [0.0; MAX_DIM];
                for s in 0..sub {
                    let mut rem = s;
                    for a in 0..d {
                        let k = rem % m;
                        rem /= m;
                        x[a] = c[a] - 0.5 * h[a] + (k as f64 + 0.5) * h[a] / m as f64;
                    }
                    acc += w.eval(&x[..d]);
                }
                acc / sub as f64
            };
            omega * vol * rule.node_factor(grid, i)
        });
        let mut corrected = false;
        if let (Weight::Power { alpha }, QuadKind::Midpoint, 1) = (w, rule.kind, m) {
            if *alpha != 0.0 && grid.origin_on_vertex() && uniform_spacing(&h) {
                corrected = apply_correction(grid, &mut masses, *alpha);
            }
        }
        if masses.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(Self {
            grid: grid.clone(),
            masses,
            corrected,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    /// Whether the singular lattice correction was applied.
    pub fn is_corrected(&self) -> bool {
        self.corrected
    }

    fn check(&self, f: &GridFunction) -> Result<()> {
        if f.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        Ok(())
    }

    /// `Σ |f_i|^p W_i`.
    pub fn power_sum(&self, f: &GridFunction, p: f64) -> Result<f64> {
        self.check(f)?;
        if !(p > 0.0) || p.is_nan() || p.is_infinite() {
            return Err(Error::InvalidExponent(p));
        }
        let s = f.samples();
        let w = &self.masses;
        let total = if p == 1.0 {
            det_sum(s.len(), |i| s[i].abs() * w[i])
        } else if p == 2.0 {
            det_sum(s.len(), |i| s[i] * s[i] * w[i])
        } else {
            det_sum(s.len(), |i| {
                let a = s[i].abs();
                if a == 0.0 {
                    0.0
                } else {
                    a.powf(p) * w[i]
                }
            })
        };
        Ok(total)
    }

    /// `‖f‖_{p,ω}`; `p = ∞` is the max of `|f|`.
    pub fn norm(&self, f: &GridFunction, p: f64) -> Result<f64> {
        if p == f64::INFINITY {
            self.check(f)?;
            return Ok(f.sup_abs());
        }
        let s = self.power_sum(f, p)?;
        Ok(s.max(0.0).powf(1.0 / p))
    }

    /// `∫ f ω`.
    pub fn integral(&self, f: &GridFunction) -> Result<f64> {
        self.check(f)?;
        let s = f.samples();
        Ok(det_sum(s.len(), |i| s[i] * self.masses[i]))
    }

    /// `∫ f g ω`.
    pub fn pairing(&self, f: &GridFunction, g: &GridFunction) -> Result<f64> {
        self.check(f)?;
        self.check(g)?;
        let (a, b) = (f.samples(), g.samples());
        Ok(det_sum(a.len(), |i| a[i] * b[i] * self.masses[i]))
    }
}

fn uniform_spacing(h: &[f64]) -> bool {
    h.iter().all(|v| (v - h[0]).abs() <= 1e-12 * h[0])
}

fn apply_correction(grid: &Grid, masses: &mut [f64], alpha: f64) -> bool {
    let d = grid.dim();
    let h = grid.h()[0];
    let c = singular::lattice_constant(alpha, d);
    let delta = c * h.powf(d as f64 + alpha) / (1usize << d) as f64;
    let mut origin = [0usize; MAX_DIM];
    for a in 0..d {
        origin[a] = (-grid.bounds().lower()[a] / grid.h()[a]).round() as usize;
    }
    let mut cells = Vec::with_capacity(1 << d);
    for corner in 0..(1usize << d) {
        let mut idx = [0usize; MAX_DIM];
        for a in 0..d {
            idx[a] = origin[a] - 1 + ((corner >> a) & 1);
        }
        cells.push(grid.ravel(&idx[..d]));
    }
    if cells.iter().any(|&i| masses[i] - delta <= 0.0) {
        return false;
    }
    for i in cells {
        masses[i] -= delta;
    }
    true
}

/// `(∫ |f|^p ω)^{1/p}`, or the max of `|f|` for `p = ∞`.
pub fn weighted_lp_norm(f: &GridFunction, p: f64, w: &Weight, rule: &QuadratureRule) -> Result<f64> {
    if p.is_nan() || p <= 0.0 {
        return Err(Error::InvalidExponent(p));
    }
    WeightedMeasure::new(f.grid(), w, rule)?.norm(f, p)
}

/// `‖f‖_∞`.
pub fn sup_norm(f: &GridFunction) -> f64 {
    f.sup_abs()
}
