//! Intermediate functions `F_f(u) = ∫ (𝓡_{u,ω} f)^q |G| ω` and the norm
//! sandwiches they satisfy.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{det_sum, shift_cells, GridFunction, QuadratureRule};
use crate::measure::WeightedMeasure;
use crate::ops::{weighted_steklov, weighted_steklov_kernel_at};
use crate::par;
use crate::weights::Weight;

/// Dual element `G` with `‖G‖_{p′,ω} = 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualWitness {
    pub g: GridFunction,
    pub p_prime: f64,
    pub normalized: bool,
}

/// `G = (|f| / ‖f‖_{p,ω})^{p−1}` for `p > 1`, `G ≡ 1` for `p = 1`.
/// Pairs with `f` to exactly `‖f‖_{p,ω}` on the discrete measure.
pub fn extremal_witness(f: &GridFunction, p: f64, measure: &WeightedMeasure) -> Result<DualWitness> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let norm = measure.norm(f, p)?;
    if norm == 0.0 {
        return Err(Error::ZeroFunction);
    }
    if p == 1.0 {
        return Ok(DualWitness {
            g: f.map(|_| 1.0)?,
            p_prime: f64::INFINITY,
            normalized: true,
        });
    }
    let g = f.map(|v| (v.abs() / norm).powf(p - 1.0))?;
    Ok(DualWitness {
        g,
        p_prime: p / (p - 1.0),
        normalized: true,
    })
}

/// Points `k · step`, `k = 0..=n` per axis, covering `[0, n·step]^d`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UGrid {
    pub d: usize,
    pub step: f64,
    pub n: usize,
}

impl UGrid {
    /// The unit cube at the coarsest grid-aligned spacing not finer than `1/per_axis`.
    pub fn unit_cube(d: usize, h: f64, per_axis: usize) -> Result<Self> {
        let cells = (1.0 / (per_axis as f64 * h) - 1e-9).ceil().max(1.0);
        let step = cells * h;
        let n = (1.0 / step).round() as usize;
        if n == 0 || (n as f64 * step - 1.0).abs() > 1e-9 {
            return Err(invalid(format!("grid spacing {h} does not tile the unit cube")));
        }
        Ok(Self { d, step, n })
    }

    pub fn len(&self) -> usize {
        (self.n + 1).pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn index(&self, flat: usize) -> Vec<usize> {
        let mut rem = flat;
        let mut idx = vec![0; self.d];
        for a in (0..self.d).rev() {
            idx[a] = rem % (self.n + 1);
            rem /= self.n + 1;
        }
        idx
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.index(flat).iter().map(|&k| k as f64 * self.step).collect()
    }
}

/// `F_f` sampled on a [`UGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct IntermediateFunction {
    pub u_grid: UGrid,
    pub values: Vec<f64>,
    pub p: f64,
    pub q: f64,
    pub witness: DualWitness,
    pub normalizer: f64,
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidExponent(p));
    }
    if p >= 1.0 && q != 1.0 {
        return Err(invalid(format!("q must be 1 for p >= 1, got {q}")));
    }
    if p < 1.0 && !(q > 0.0 && q < p) {
        return Err(invalid(format!("q must lie in (0, p) for p < 1, got {q}")));
    }
    Ok(())
}

fn shifts(grid: &crate::grid::Grid, u: &[f64]) -> Result<Vec<isize>> {
    (0..grid.dim()).map(|a| grid.cells_for_shift(a, u[a])).collect()
}

/// `F_f(u) = ∫ (f + S_{u,ω}f / (2N))^q |G| ω` for every `u` on `u_grid`.
/// `S_{u,ω}f` is `S_{0,ω}f` read `u/h` cells ahead.
#[allow(clippy::too_many_arguments)]
pub fn intermediate_function(
    f: &GridFunction,
    witness: &DualWitness,
    p: f64,
    q: f64,
    w: &Weight,
    u_grid: &UGrid,
    normalizer: f64,
    measure: &WeightedMeasure,
) -> Result<IntermediateFunction> {
    check_exponents(p, q)?;
    if !f.is_nonnegative() {
        return Err(Error::NegativeInput);
    }
    if !(normalizer > 0.0 && normalizer.is_finite()) {
        return Err(invalid("normalizer must be positive"));
    }
    let grid = f.grid();
    if witness.g.grid() != grid || u_grid.d != grid.dim() {
        return Err(Error::GridMismatch);
    }
    let far = vec![u_grid.n as f64 * u_grid.step; grid.dim()];
    weighted_steklov_kernel_at(grid, &far, w)?.check_reach(f)?;
    let s0 = weighted_steklov(f, &vec![0.0; grid.dim()], w)?;
    let fs = f.samples();
    let gs = witness.g.samples();
    let masses = measure.masses();
    let scale = 0.5 / normalizer;
    let values = par::map_range(u_grid.len(), |j| -> Result<f64> {
        let k = shifts(grid, &u_grid.point(j))?;
        let su = shift_cells(&s0, &k);
        let ss = su.samples();
        Ok(det_sum(fs.len(), |i| {
            let r = fs[i] + scale * ss[i];
            if r == 0.0 || gs[i] == 0.0 {
                0.0
            } else if q == 1.0 {
                r * gs[i].abs() * masses[i]
            } else {
                r.powf(q) * gs[i].abs() * masses[i]
            }
        }))
    })
    .into_iter()
    .collect::<Result<Vec<f64>>>()?;
    Ok(IntermediateFunction {
        u_grid: u_grid.clone(),
        values,
        p,
        q,
        witness: witness.clone(),
        normalizer,
    })
}

impl IntermediateFunction {
    /// `‖F‖_{L_a([0,1]^d)}` by the left Riemann sum over the u-grid.
    pub fn la_norm_unit_cube(&self, a: f64) -> Result<f64> {
        if !(a >= 1.0 && a.is_finite()) {
            return Err(Error::InvalidExponent(a));
        }
        let vol = self.u_grid.step.powi(self.u_grid.d as i32);
        let mut s = 0.0;
        for (j, v) in self.values.iter().enumerate() {
            if self.u_grid.index(j).iter().all(|&k| k < self.u_grid.n) {
                s += v.abs().powf(a) * vol;
            }
        }
        Ok(s.powf(1.0 / a))
    }
}

/// `(sup_u |F(u)|, max_{|u₁−u₂| ≤ δ} |F(u₁) − F(u₂)|)`.
pub fn sup_and_modulus(f: &IntermediateFunction, delta: f64) -> (f64, f64) {
    let sup = f.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let pts: Vec<Vec<f64>> = (0..f.u_grid.len()).map(|j| f.u_grid.point(j)).collect();
    let tol = 1e-12 * f.u_grid.step;
    let per = par::map_range(pts.len(), |i| {
        let mut m = 0.0f64;
        for j in i + 1..pts.len() {
            let dist: f64 = pts[i].iter().zip(&pts[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            if dist <= delta + tol {
                m = m.max((f.values[i] - f.values[j]).abs());
            }
        }
        m
    });
    (sup, per.into_iter().fold(0.0, f64::max))
}

/// `(Σ_j x_j^s)^{1/s}`.
pub fn lsm_norm(seq: &[f64], s: f64) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::InvalidExponent(s));
    }
    if seq.is_empty() {
        return Err(invalid("sequence norm needs at least one entry"));
    }
    Ok(seq.iter().map(|v| v.abs().powf(s)).sum::<f64>().powf(1.0 / s))
}

/// `max_{u, f} ‖S_{u,ω}f‖_{p,ω} / ‖f‖_{p,ω}` over the u-grid: the default
/// normalizer of `𝓡`.
pub fn normalizer_estimate(members: &[GridFunction], p: f64, w: &Weight, u_grid: &UGrid, measure: &WeightedMeasure) -> Result<f64> {
    let mut best = 0.0f64;
    for f in members {
        let nf = measure.norm(f, p)?;
        if nf == 0.0 {
            continue;
        }
        let grid = f.grid();
        let s0 = weighted_steklov(f, &vec![0.0; grid.dim()], w)?;
        let far = vec![u_grid.n as f64 * u_grid.step; grid.dim()];
        weighted_steklov_kernel_at(grid, &far, w)?.check_reach(f)?;
        let ratios = par::map_range(u_grid.len(), |j| -> Result<f64> {
            let su = shift_cells(&s0, &shifts(grid, &u_grid.point(j))?);
            Ok(measure.norm(&su, p)? / nf)
        });
        for r in ratios {
            best = best.max(r?);
        }
    }
    if best == 0.0 {
        return Err(Error::ZeroFunction);
    }
    Ok(best)
}

/// Both sides of the transference sandwich for one nonnegative `f`, in
/// norm units (`(sup F)^{1/q}`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sandwich {
    pub norm: f64,
    pub sup: f64,
    /// `F_f(0)^{1/q}`.
    pub at_zero: f64,
    pub modulus: f64,
    pub la_unit_cube: Option<f64>,
}

/// Evaluates `F_f` with the extremal witness of `f^q` in `L_{p/q,ω}` and
/// returns the sandwich quantities.
#[allow(clippy::too_many_arguments)]
pub fn sandwich(
    f: &GridFunction,
    p: f64,
    q: f64,
    w: &Weight,
    u_grid: &UGrid,
    normalizer: f64,
    measure: &WeightedMeasure,
    la: Option<f64>,
) -> Result<(Sandwich, IntermediateFunction)> {
    check_exponents(p, q)?;
    let norm = measure.norm(f, p)?;
    let r = p / q;
    let fq = if q == 1.0 { f.clone() } else { f.map(|v| v.abs().powf(q))? };
    let witness = extremal_witness(&fq, r, measure)?;
    let big_f = intermediate_function(f, &witness, p, q, w, u_grid, normalizer, measure)?;
    let (sup, modulus) = sup_and_modulus(&big_f, u_grid.step);
    let unit = |v: f64| if q == 1.0 { v } else { v.max(0.0).powf(1.0 / q) };
    let la_unit_cube = match la {
        Some(a) => Some(unit(big_f.la_norm_unit_cube(a)?)),
        None => None,
    };
    Ok((
        Sandwich {
            norm,
            sup: unit(sup),
            at_zero: unit(big_f.values[0]),
            modulus,
            la_unit_cube,
        },
        big_f,
    ))
}

/// `‖f‖ ≤ ‖F_f‖` and `‖F_g‖ ≤ 4^{1/min(1,p)} ‖g‖`, both in norm units.
pub fn sandwich_constant(p: f64) -> f64 {
    4f64.powf(1.0 / p.min(1.0))
}

/// Convenience: measure with the default midpoint rule.
pub fn default_measure(f: &GridFunction, w: &Weight) -> Result<WeightedMeasure> {
    WeightedMeasure::new(f.grid(), w, &QuadratureRule::midpoint())
}
