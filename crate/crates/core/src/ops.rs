//! Box averages, Steklov means, the weighted Steklov mean and the `𝓡` operator.
//!
//! Every operator is a discrete convolution with grid-aligned taps:
//! `g[i] = Σ_j w_j f[i + j]`, zero outside the grid. Box integrals use
//! composite Simpson weights (3/8 on the last panel for odd counts).

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridFunction, MAX_DIM};
use crate::measure::WeightedMeasure;
use crate::par;
use crate::weights::quad::{box_nodes, Cuts};
use crate::weights::Weight;

/// Largest grid spacing accepted by the unit-cube Steklov means.
pub const STEKLOV_MAX_H: f64 = 0.125;

/// Integration box `offset + [lower, upper]` relative to the evaluation point.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxSpec {
    pub offset: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxSpec {
    pub fn new(offset: Vec<f64>, lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let d = offset.len();
        if lower.len() != d || upper.len() != d {
            return Err(invalid("box spec dimensions disagree"));
        }
        if (0..d).any(|a| !(lower[a] < upper[a])) {
            return Err(invalid("box spec needs lower < upper"));
        }
        Ok(Self { offset, lower, upper })
    }

    /// `S_{δ,v}`: offset `v`, box `[-δ/2, δ/2]^d`.
    pub fn shifted(delta: f64, v: &[f64]) -> Result<Self> {
        let d = v.len();
        Self::new(v.to_vec(), vec![-delta / 2.0; d], vec![delta / 2.0; d])
    }

    /// `V_δ`.
    pub fn v(delta: f64, d: usize) -> Result<Self> {
        Self::shifted(delta, &vec![0.0; d])
    }

    /// `Z_δ`: box `[δ/2, δ]^d`.
    pub fn z(delta: f64, d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![delta / 2.0; d], vec![delta; d])
    }

    /// `B_δ`: box `[0, δ]^d`.
    pub fn b(delta: f64, d: usize) -> Result<Self> {
        Self::new(vec![0.0; d], vec![0.0; d], vec![delta; d])
    }

    /// Unit cube shifted by `u`.
    pub fn steklov(u: &[f64]) -> Result<Self> {
        Self::shifted(1.0, u)
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }
}

/// Grid-aligned convolution taps.
#[derive(Clone, Debug, PartialEq)]
pub struct Kernel {
    /// First tap offset (in cells) per axis.
    lo: Vec<isize>,
    /// Tap count per axis.
    len: Vec<usize>,
    data: KernelData,
}

#[derive(Clone, Debug, PartialEq)]
enum KernelData {
    Separable(Vec<Vec<f64>>),
    Dense(Vec<f64>),
}

impl Kernel {
    /// Moves every tap by `k` cells.
    pub fn shifted(&self, k: &[isize]) -> Self {
        let mut out = self.clone();
        for (l, s) in out.lo.iter_mut().zip(k) {
            *l += s;
        }
        out
    }

    pub fn taps(&self) -> usize {
        self.len.iter().product()
    }

    /// Sum of all taps.
    pub fn mass(&self) -> f64 {
        match &self.data {
            KernelData::Separable(ax) => ax.iter().map(|w| w.iter().sum::<f64>()).product(),
            KernelData::Dense(w) => w.iter().sum(),
        }
    }

    /// Errors with `ReachExceedsMargin` when the result would leave the box.
    pub fn check_reach(&self, f: &GridFunction) -> Result<()> {
        for a in 0..self.lo.len() {
            let lo = self.lo[a];
            let hi = lo + self.len[a] as isize - 1;
            let (left, right) = f.free_cells(a);
            if hi > left as isize || -lo > right as isize {
                return Err(Error::ReachExceedsMargin { axis: a });
            }
        }
        Ok(())
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let grid = f.grid();
        if self.lo.len() != grid.dim() {
            return Err(Error::GridMismatch);
        }
        self.check_reach(f)?;
        if f.is_zero() {
            return Ok(f.clone());
        }
        let out = match &self.data {
            KernelData::Separable(axes) => {
                let mut cur = f.samples().to_vec();
                for (a, w) in axes.iter().enumerate() {
                    cur = convolve_axis(grid, &cur, a, self.lo[a], w);
                }
                cur
            }
            KernelData::Dense(w) => convolve_dense(grid, f.samples(), &self.lo, &self.len, w),
        };
        GridFunction::new(grid.clone(), out)
    }
}

fn convolve_axis(grid: &Grid, src: &[f64], axis: usize, lo: isize, w: &[f64]) -> Vec<f64> {
    let n = grid.n()[axis] as isize;
    let stride = grid.strides()[axis] as isize;
    par::map_range(src.len(), |flat| {
        let i = grid.unravel(flat)[axis] as isize;
        let start = (i + lo).max(0);
        let end = (i + lo + w.len() as isize).min(n);
        let mut s = 0.0;
        let mut j = start;
        while j < end {
            s += w[(j - i - lo) as usize] * src[(flat as isize + (j - i) * stride) as usize];
            j += 1;
        }
        s
    })
}

fn convolve_dense(grid: &Grid, src: &[f64], lo: &[isize], len: &[usize], w: &[f64]) -> Vec<f64> {
    let d = grid.dim();
    let n = grid.n();
    let strides = grid.strides();
    par::map_range(src.len(), |flat| {
        let idx = grid.unravel(flat);
        let mut a0 = [0isize; MAX_DIM];
        let mut a1 = [0isize; MAX_DIM];
        for a in 0..d {
            a0[a] = (idx[a] as isize + lo[a]).max(0);
            a1[a] = (idx[a] as isize + lo[a] + len[a] as isize).min(n[a] as isize);
            if a0[a] >= a1[a] {
                return 0.0;
            }
        }
        let mut s = 0.0;
        let mut cur = a0;
        loop {
            let mut tap = 0usize;
            let mut at = 0usize;
            for a in 0..d {
                tap = tap * len[a] + (cur[a] - idx[a] as isize - lo[a]) as usize;
                at += cur[a] as usize * strides[a];
            }
            s += w[tap] * src[at];
            let mut a = d;
            loop {
                if a == 0 {
                    return s;
                }
                a -= 1;
                cur[a] += 1;
                if cur[a] < a1[a] {
                    break;
                }
                cur[a] = a0[a];
            }
        }
    })
}

/// Composite Newton–Cotes panels on `n` intervals: `(first node, intervals)`.
fn panels(n: usize) -> Vec<(usize, usize)> {
    match n {
        0 => vec![],
        1 => vec![(0, 1)],
        _ => {
            let simpson = if n % 2 == 0 { n } else { n - 3 };
            let mut out: Vec<(usize, usize)> = (0..simpson / 2).map(|k| (2 * k, 2)).collect();
            if n % 2 == 1 {
                out.push((simpson, 3));
            }
            out
        }
    }
}

fn panel_weights(len: usize) -> &'static [f64] {
    match len {
        1 => &[0.5, 0.5],
        2 => &[1.0 / 3.0, 4.0 / 3.0, 1.0 / 3.0],
        _ => &[3.0 / 8.0, 9.0 / 8.0, 9.0 / 8.0, 3.0 / 8.0],
    }
}

/// Quadrature weights for `n` intervals of width `h`.
fn newton_cotes(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; n + 1];
    for (start, len) in panels(n) {
        for (i, c) in panel_weights(len).iter().enumerate() {
            w[start + i] += c * h;
        }
    }
    w
}

fn cells(x: f64, h: f64) -> Result<isize> {
    let k = x / h;
    let r = k.round();
    if !x.is_finite() || (k - r).abs() > 1e-9 * k.abs().max(1.0) {
        return Err(Error::UnalignedShift(x, h));
    }
    Ok(r as isize)
}

/// Separable taps for a box spec on `grid`.
pub fn box_kernel(grid: &Grid, spec: &BoxSpec) -> Result<Kernel> {
    let d = grid.dim();
    if spec.offset.len() != d {
        return Err(invalid("box spec dimension does not match grid"));
    }
    let mut lo = Vec::with_capacity(d);
    let mut len = Vec::with_capacity(d);
    let mut axes = Vec::with_capacity(d);
    for a in 0..d {
        let h = grid.h()[a];
        let i0 = cells(spec.offset[a] + spec.lower[a], h)?;
        let i1 = cells(spec.offset[a] + spec.upper[a], h)?;
        let n = (i1 - i0) as usize;
        lo.push(i0);
        len.push(n + 1);
        axes.push(newton_cotes(n, h));
    }
    Ok(Kernel {
        lo,
        len,
        data: KernelData::Separable(axes),
    })
}

/// `g(x) = ∫_{box} f(x + offset + s) ds`.
pub fn box_average(f: &GridFunction, spec: &BoxSpec) -> Result<GridFunction> {
    box_kernel(f.grid(), spec)?.apply(f)
}

fn check_steklov_grid(grid: &Grid) -> Result<()> {
    if grid.h().iter().any(|&h| h > STEKLOV_MAX_H + 1e-15) {
        return Err(invalid(format!(
            "Steklov means need h <= {STEKLOV_MAX_H}, got {:?}",
            grid.h()
        )));
    }
    Ok(())
}

/// `S_u f(x) = ∫_{[-1/2,1/2]^d} f(x + u + t) dt`.
pub fn steklov(f: &GridFunction, u: &[f64]) -> Result<GridFunction> {
    check_steklov_grid(f.grid())?;
    box_average(f, &BoxSpec::steklov(u)?)
}

type KernelKey = (String, Vec<u64>);
static WEIGHTED_KERNELS: OnceLock<Mutex<HashMap<KernelKey, Arc<Kernel>>>> = OnceLock::new();

/// Normalized taps of `S_{0,ω}`.
pub fn weighted_steklov_kernel(grid: &Grid, w: &Weight) -> Result<Arc<Kernel>> {
    check_steklov_grid(grid)?;
    let d = grid.dim();
    w.validate(d)?;
    let key = (w.to_string(), grid.h().iter().map(|h| h.to_bits()).collect());
    let cache = WEIGHTED_KERNELS.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(k) = cache.lock().expect("kernel cache").get(&key) {
        return Ok(Arc::clone(k));
    }
    let k = Arc::new(build_weighted_kernel(grid, w)?);
    cache.lock().expect("kernel cache").insert(key, Arc::clone(&k));
    Ok(k)
}

fn build_weighted_kernel(grid: &Grid, w: &Weight) -> Result<Kernel> {
    let d = grid.dim();
    let unit = box_kernel(grid, &BoxSpec::steklov(&vec![0.0; d])?)?;
    if w.is_constant() {
        return Ok(unit);
    }
    let lo = unit.lo.clone();
    let len = unit.len.clone();
    let mut kernel = if w.is_separable(d) {
        let axes = (0..d)
            .map(|a| {
                let cuts = Cuts {
                    singular_origin: w.singular_at_origin(),
                    axis0_breaks: if a == 0 { w.breaks() } else { &[] },
                };
                moments_1d(len[a] - 1, grid.h()[a], cuts, |t| w.axis_factor(a, t))
            })
            .collect();
        Kernel {
            lo,
            len,
            data: KernelData::Separable(axes),
        }
    } else {
        let data = moments_dense(&len, grid.h(), w);
        Kernel {
            lo,
            len,
            data: KernelData::Dense(data),
        }
    };
    let mass = kernel.mass();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(invalid("weight average over the unit cube is not positive"));
    }
    match &mut kernel.data {
        KernelData::Separable(axes) => {
            for ax in axes.iter_mut() {
                let s: f64 = ax.iter().sum();
                ax.iter_mut().for_each(|v| *v /= s);
            }
        }
        KernelData::Dense(data) => data.iter_mut().for_each(|v| *v /= mass),
    }
    Ok(kernel)
}

/// Lagrange basis values at `t` for equispaced nodes `x0 + i h`, `i ≤ len`.
fn lagrange(len: usize, x0: f64, h: f64, t: f64, out: &mut [f64; 4]) {
    let s = (t - x0) / h;
    for i in 0..=len {
        let mut v = 1.0;
        for k in 0..=len {
            if k != i {
                v *= (s - k as f64) / (i as f64 - k as f64);
            }
        }
        out[i] = v;
    }
}

/// `m_j = ∫_{-1/2}^{1/2} ω(t) φ_j(t) dt` for the composite basis on `n` intervals.
fn moments_1d(n: usize, h: f64, cuts: Cuts<'_>, omega: impl Fn(f64) -> f64) -> Vec<f64> {
    let mut m = vec![0.0; n + 1];
    let x0 = -0.5;
    let mut basis = [0.0; 4];
    for (start, len) in panels(n) {
        let a = x0 + start as f64 * h;
        let b = a + len as f64 * h;
        box_nodes(&[a], &[b], cuts, &mut |t, wt| {
            let om = omega(t[0]) * wt;
            lagrange(len, a, h, t[0], &mut basis);
            for i in 0..=len {
                m[start + i] += om * basis[i];
            }
        });
    }
    m
}

fn moments_dense(len: &[usize], h: &[f64], w: &Weight) -> Vec<f64> {
    let d = len.len();
    let per_axis: Vec<Vec<(usize, usize)>> = len.iter().map(|&l| panels(l - 1)).collect();
    let counts: Vec<usize> = per_axis.iter().map(|p| p.len()).collect();
    let total_panels: usize = counts.iter().product();
    let taps: usize = len.iter().product();
    let cuts = Cuts {
        singular_origin: w.singular_at_origin(),
        axis0_breaks: w.breaks(),
    };
    let partial = par::map_range(total_panels, |pi| {
        let mut rem = pi;
        let mut pan = [(0usize, 0usize); MAX_DIM];
        for a in (0..d).rev() {
            pan[a] = per_axis[a][rem % counts[a]];
            rem /= counts[a];
        }
        let mut lo = [0.0; MAX_DIM];
        let mut hi = [0.0; MAX_DIM];
        for a in 0..d {
            lo[a] = -0.5 + pan[a].0 as f64 * h[a];
            hi[a] = lo[a] + pan[a].1 as f64 * h[a];
        }
        let local: usize = (0..d).map(|a| pan[a].1 + 1).product();
        let mut acc = vec![0.0; local];
        let mut basis = [[0.0; 4]; MAX_DIM];
        box_nodes(&lo[..d], &hi[..d], cuts, &mut |t, wt| {
            let om = w.eval_raw(t) * wt;
            for a in 0..d {
                lagrange(pan[a].1, lo[a], h[a], t[a], &mut basis[a]);
            }
            for (l, slot) in acc.iter_mut().enumerate() {
                let mut r = l;
                let mut v = om;
                for a in (0..d).rev() {
                    let k = pan[a].1 + 1;
                    v *= basis[a][r % k];
                    r /= k;
                }
                *slot += v;
            }
        });
        (pan, acc)
    });
    let mut out = vec![0.0; taps];
    for (pan, acc) in partial {
        for (l, v) in acc.iter().enumerate() {
            let mut r = l;
            let mut flat = 0usize;
            let mut mult = 1usize;
            for a in (0..d).rev() {
                let k = pan[a].1 + 1;
                flat += (pan[a].0 + r % k) * mult;
                mult *= len[a];
                r /= k;
            }
            out[flat] += v;
        }
    }
    out
}

/// Kernel of `S_{u,ω}` on `grid`.
pub fn weighted_steklov_kernel_at(grid: &Grid, u: &[f64], w: &Weight) -> Result<Kernel> {
    let base = weighted_steklov_kernel(grid, w)?;
    let k: Vec<isize> = (0..grid.dim())
        .map(|a| grid.cells_for_shift(a, u[a]))
        .collect::<Result<_>>()?;
    Ok(base.shifted(&k))
}

/// `S_{u,ω}f(x) = ⟨ω⟩^{-1} ∫_{[-1/2,1/2]^d} f(x + u + t) ω(t) dt`.
pub fn weighted_steklov(f: &GridFunction, u: &[f64], w: &Weight) -> Result<GridFunction> {
    if u.len() != f.grid().dim() {
        return Err(invalid("shift dimension does not match grid"));
    }
    weighted_steklov_kernel_at(f.grid(), u, w)?.apply(f)
}

/// `𝓡_{u,ω}f = f + S_{u,ω}f / (2N)`.
pub fn r_operator(f: &GridFunction, u: &[f64], w: &Weight, normalizer: f64) -> Result<GridFunction> {
    if !(normalizer > 0.0 && normalizer.is_finite()) {
        return Err(invalid(format!("normalizer must be positive, got {normalizer}")));
    }
    let s = weighted_steklov(f, u, w)?;
    f.axpby(1.0, &s, 0.5 / normalizer)
}

/// Operators addressable from configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", deny_unknown_fields)]
pub enum Operator {
    #[serde(rename = "I")]
    Identity,
    #[serde(rename = "S_u")]
    Steklov { u: Vec<f64> },
    #[serde(rename = "S_uw")]
    WeightedSteklov { u: Vec<f64>, weight: Weight },
    #[serde(rename = "R")]
    R { u: Vec<f64>, weight: Weight, normalizer: f64 },
    #[serde(rename = "S_dv")]
    ShiftedBox { delta: f64, v: Vec<f64> },
    #[serde(rename = "V")]
    V { delta: f64 },
    #[serde(rename = "Z")]
    Z { delta: f64 },
    #[serde(rename = "B")]
    B { delta: f64 },
}

/// Every accepted operator tag.
pub const OPERATOR_TAGS: [&str; 8] = ["I", "S_u", "S_uw", "R", "S_dv", "V", "Z", "B"];

impl Operator {
    pub fn tag(&self) -> &'static str {
        match self {
            Operator::Identity => "I",
            Operator::Steklov { .. } => "S_u",
            Operator::WeightedSteklov { .. } => "S_uw",
            Operator::R { .. } => "R",
            Operator::ShiftedBox { .. } => "S_dv",
            Operator::V { .. } => "V",
            Operator::Z { .. } => "Z",
            Operator::B { .. } => "B",
        }
    }

    /// Builds an operator from a tag and loose parameters.
    pub fn from_tag(tag: &str, d: usize, u: Option<&[f64]>, delta: Option<f64>, weight: &Weight, normalizer: Option<f64>) -> Result<Self> {
        let zero = vec![0.0; d];
        let u = u.map(|v| v.to_vec()).unwrap_or(zero);
        let need_delta = || delta.ok_or_else(|| invalid(format!("operator {tag} needs delta")));
        Ok(match tag {
            "I" => Operator::Identity,
            "S_u" => Operator::Steklov { u },
            "S_uw" => Operator::WeightedSteklov {
                u,
                weight: weight.clone(),
            },
            "R" => Operator::R {
                u,
                weight: weight.clone(),
                normalizer: normalizer.ok_or_else(|| invalid("operator R needs a normalizer"))?,
            },
            "S_dv" => Operator::ShiftedBox {
                delta: need_delta()?,
                v: u,
            },
            "V" => Operator::V { delta: need_delta()? },
            "Z" => Operator::Z { delta: need_delta()? },
            "B" => Operator::B { delta: need_delta()? },
            other => return Err(Error::UnknownOperator(other.to_string())),
        })
    }

    pub fn apply(&self, f: &GridFunction) -> Result<GridFunction> {
        let d = f.grid().dim();
        match self {
            Operator::Identity => Ok(f.clone()),
            Operator::Steklov { u } => steklov(f, u),
            Operator::WeightedSteklov { u, weight } => weighted_steklov(f, u, weight),
            Operator::R { u, weight, normalizer } => r_operator(f, u, weight, *normalizer),
            Operator::ShiftedBox { delta, v } => box_average(f, &BoxSpec::shifted(*delta, v)?),
            Operator::V { delta } => box_average(f, &BoxSpec::v(*delta, d)?),
            Operator::Z { delta } => box_average(f, &BoxSpec::z(*delta, d)?),
            Operator::B { delta } => box_average(f, &BoxSpec::b(*delta, d)?),
        }
    }
}

/// Empirical operator norm over a set of inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpNormEstimate {
    pub value: f64,
    pub n_trials: usize,
    pub argmax_id: usize,
    pub theoretical_cap: Option<f64>,
}

/// `3^{2d+1/p}[ω]_p^{1/p}`.
pub fn steklov_bound(d: usize, p: f64, ap: f64) -> f64 {
    3f64.powf(2.0 * d as f64 + 1.0 / p) * ap.powf(1.0 / p)
}

/// `max_f ‖Tf‖_{p,ω} / ‖f‖_{p,ω}`; members with zero norm are skipped.
pub fn operator_norm_estimate(
    op: &Operator,
    p: f64,
    w: &Weight,
    members: &[GridFunction],
    theoretical_cap: Option<f64>,
) -> Result<OpNormEstimate> {
    if members.is_empty() {
        return Err(invalid("operator norm needs at least one input"));
    }
    let measure = WeightedMeasure::new(members[0].grid(), w, &Default::default())?;
    let ratios = par::map_slice(members, |f| -> Result<Option<f64>> {
        let nf = measure.norm(f, p)?;
        if nf == 0.0 {
            return Ok(None);
        }
        Ok(Some(measure.norm(&op.apply(f)?, p)? / nf))
    });
    let mut best: Option<(usize, f64)> = None;
    let mut trials = 0;
    for (i, r) in ratios.into_iter().enumerate() {
        match r? {
            None => log::warn!("skipping zero-norm input {i}"),
            Some(v) => {
                trials += 1;
                if best.is_none_or(|b| v > b.1) {
                    best = Some((i, v));
                }
            }
        }
    }
    let (argmax_id, value) = best.ok_or(Error::ZeroFunction)?;
    Ok(OpNormEstimate {
        value,
        n_trials: trials,
        argmax_id,
        theoretical_cap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{translate, GridBox};
    use approx::assert_relative_eq;

    fn plateau(d: usize, n: usize, half: f64) -> GridFunction {
        let g = Grid::centered(d, 4.0, n).unwrap();
        GridFunction::from_fn(g, move |x| if x.iter().all(|v| v.abs() <= half) { 1.0 } else { 0.0 }).unwrap()
    }

    fn bump(d: usize, n: usize) -> GridFunction {
        let g = Grid::centered(d, 4.0, n).unwrap();
        GridFunction::from_fn(g, |x| {
            let r2: f64 = x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum();
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp() * (1.0 + x[0])
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn interior(f: &GridFunction, radius: f64) -> Vec<usize> {
        let d = f.grid().dim();
        (0..f.grid().len())
            .filter(|&i| f.grid().point(i)[..d].iter().all(|v| v.abs() < radius))
            .collect()
    }

    #[test]
    fn newton_cotes_weights_integrate_cubics() {
        for n in 1..12 {
            let w = newton_cotes(n, 0.1);
            assert_relative_eq!(w.iter().sum::<f64>(), n as f64 * 0.1, epsilon = 1e-14);
            if n >= 2 {
                let s: f64 = w.iter().enumerate().map(|(i, c)| c * (i as f64 * 0.1).powi(3)).sum();
                assert_relative_eq!(s, (n as f64 * 0.1).powi(4) / 4.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn v_of_constant_and_linear() {
        let f = plateau(1, 512, 2.0);
        let v = box_average(&f, &BoxSpec::v(1.0, 1).unwrap()).unwrap();
        for i in interior(&f, 1.4) {
            assert_relative_eq!(v.samples()[i], 1.0, epsilon = 1e-14);
        }
        let g = Grid::centered(1, 4.0, 512).unwrap();
        let lin = GridFunction::from_fn(g, |x| if x[0].abs() < 2.5 { x[0] } else { 0.0 }).unwrap();
        let v = box_average(&lin, &BoxSpec::v(0.5, 1).unwrap()).unwrap();
        for i in interior(&lin, 2.0) {
            let x = lin.grid().coord(0, i);
            assert_relative_eq!(v.samples()[i], 0.5 * x, epsilon = 1e-13);
        }
    }

    #[test]
    fn z_and_b_boxes_have_exact_volume() {
        let f = plateau(2, 64, 2.0);
        let z = box_average(&f, &BoxSpec::z(1.0, 2).unwrap()).unwrap();
        let b = box_average(&f, &BoxSpec::b(0.5, 2).unwrap()).unwrap();
        let c = f.grid().ravel(&[32, 32]);
        assert_relative_eq!(z.samples()[c], 0.25, epsilon = 1e-14);
        assert_relative_eq!(b.samples()[c], 0.25, epsilon = 1e-14);
    }

    #[test]
    fn z_matches_refined_quadrature() {
        let smooth = |x: &[f64]| {
            let r2 = x[0] * x[0];
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        };
        let grid = Grid::centered(1, 4.0, 1024).unwrap();
        let f = GridFunction::from_fn(grid.clone(), smooth).unwrap();
        let z = box_average(&f, &BoxSpec::z(0.5, 1).unwrap()).unwrap();
        for i in (0..1024).step_by(37) {
            let x = grid.coord(0, i);
            // 4096-panel midpoint oracle on [x + 1/4, x + 1/2]
            let m = 4096;
            let hh = 0.25 / m as f64;
            let oracle: f64 = (0..m).map(|k| smooth(&[x + 0.25 + (k as f64 + 0.5) * hh]) * hh).sum();
            assert!((z.samples()[i] - oracle).abs() <= 1e-6, "i={i} {} {oracle}", z.samples()[i]);
        }
    }

    #[test]
    fn reach_is_enforced() {
        let f = plateau(1, 64, 3.6);
        assert!(matches!(
            box_average(&f, &BoxSpec::v(1.0, 1).unwrap()),
            Err(Error::ReachExceedsMargin { axis: 0 })
        ));
        assert!(matches!(
            box_average(&f, &BoxSpec::shifted(0.5, &[0.01]).unwrap()),
            Err(Error::UnalignedShift(..))
        ));
    }

    #[test]
    fn steklov_identities() {
        let f = plateau(1, 512, 2.5);
        let s = steklov(&f, &[0.0]).unwrap();
        for i in interior(&f, 1.9) {
            assert_relative_eq!(s.samples()[i], 1.0, epsilon = 1e-14);
        }
        let g = Grid::centered(1, 4.0, 512).unwrap();
        let lin = GridFunction::from_fn(g, |x| if x[0].abs() < 2.5 { 2.0 * x[0] + 1.0 } else { 0.0 }).unwrap();
        let s = steklov(&lin, &[0.0]).unwrap();
        for i in interior(&lin, 1.9) {
            assert_relative_eq!(s.samples()[i], lin.samples()[i], epsilon = 1e-13);
        }
        let coarse = Grid::centered(1, 4.0, 32).unwrap();
        assert!(steklov(&GridFunction::zeros(coarse), &[0.0]).is_err());
    }

    #[test]
    fn weighted_steklov_reductions() {
        let f = bump(1, 512);
        let a = steklov(&f, &[0.25]).unwrap();
        let b = weighted_steklov(&f, &[0.25], &Weight::one()).unwrap();
        assert_eq!(a, b);
        let c = weighted_steklov(&f, &[0.25], &Weight::Constant { c: 3.0 }).unwrap();
        assert_eq!(a, c);
        let p = plateau(1, 512, 2.5);
        for w in [Weight::power(0.5), Weight::power(-0.5), Weight::Step { breaks: vec![0.1], levels: vec![1.0, 4.0] }] {
            let s = weighted_steklov(&p, &[0.0], &w).unwrap();
            for i in interior(&p, 1.9) {
                assert_relative_eq!(s.samples()[i], 1.0, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn weighted_steklov_matches_refined_oracle() {
        let f = bump(1, 512);
        let w = Weight::power(0.5);
        let s = weighted_steklov(&f, &[0.0], &w).unwrap();
        let smooth = |x: f64| {
            let r2 = (x - 0.3) * (x - 0.3);
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp() * (1.0 + x)
            } else {
                0.0
            }
        };
        // ∫_{-1/2}^{1/2} |t|^{1/2} dt = 2/3 · 2^{-1/2}
        let mass = (2.0f64 / 3.0) * 0.5f64.sqrt();
        for i in (40..470).step_by(29) {
            let x = f.grid().coord(0, i);
            // substitution t = ±s² removes the singularity: ∫_0^{1/√2} f(x ± s²) 2 s² ds
            let m = 20000;
            let top = 0.5f64.sqrt();
            let hh = top / m as f64;
            let mut oracle = 0.0;
            for k in 0..m {
                let sv = (k as f64 + 0.5) * hh;
                oracle += (smooth(x + sv * sv) + smooth(x - sv * sv)) * 2.0 * sv * sv * hh;
            }
            oracle /= mass;
            assert!((s.samples()[i] - oracle).abs() <= 1e-6, "i={i} {} {}", s.samples()[i], oracle);
        }
    }

    #[test]
    fn dense_kernel_matches_separable_in_one_dimension() {
        let grid = Grid::centered(1, 4.0, 256).unwrap();
        let w = Weight::power(0.5);
        let sep = weighted_steklov_kernel(&grid, &w).unwrap();
        let dense = moments_dense(&sep.len, grid.h(), &w);
        let total: f64 = dense.iter().sum();
        if let KernelData::Separable(ax) = &sep.data {
            for (a, b) in ax[0].iter().zip(&dense) {
                assert_relative_eq!(*a, b / total, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn two_dimensional_power_weight_kernel() {
        let p = plateau(2, 128, 2.5);
        let w = Weight::power(0.5);
        let s = weighted_steklov(&p, &[0.0, 0.0], &w).unwrap();
        for i in interior(&p, 1.9) {
            assert_relative_eq!(s.samples()[i], 1.0, epsilon = 1e-12);
        }
        let k = weighted_steklov_kernel(p.grid(), &w).unwrap();
        assert!(matches!(k.data, KernelData::Dense(_)));
        assert_eq!(k.taps(), 17 * 17);
    }

    #[test]
    fn r_operator_properties() {
        let f = bump(1, 512);
        let r = r_operator(&f, &[0.25], &Weight::power(0.5), 1.3).unwrap();
        assert!(r.samples().iter().zip(f.samples()).all(|(a, b)| a >= b));
        let p = plateau(1, 512, 2.5);
        let r = r_operator(&p, &[0.0], &Weight::one(), 2.0).unwrap();
        for i in interior(&p, 1.9) {
            assert_relative_eq!(r.samples()[i], 1.25, epsilon = 1e-14);
        }
        assert!(r_operator(&p, &[0.0], &Weight::one(), 0.0).is_err());
    }

    #[test]
    fn commutation_of_box_operators() {
        let f = bump(1, 512);
        let w = Weight::power(0.5);
        let sv = BoxSpec::shifted(0.25, &[0.125]).unwrap();
        let a = weighted_steklov(&box_average(&f, &sv).unwrap(), &[0.5], &w).unwrap();
        let b = box_average(&weighted_steklov(&f, &[0.5], &w).unwrap(), &sv).unwrap();
        assert!(a.max_abs_diff(&b).unwrap() <= 1e-14 * f.sup_abs());
    }

    #[test]
    fn translation_commutes_with_steklov() {
        let f = bump(1, 512);
        let a = steklov(&f, &[0.25]).unwrap();
        let b = translate(&steklov(&f, &[0.0]).unwrap(), &[0.25]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn operator_norms() {
        let members: Vec<GridFunction> = (0..4)
            .map(|k| {
                let g = Grid::centered(1, 4.0, 512).unwrap();
                GridFunction::from_fn(g, move |x| {
                    let c = 0.2 * k as f64 - 0.3;
                    let r2 = (x[0] - c) * (x[0] - c) / 0.5;
                    if r2 < 1.0 {
                        (1.0 - 1.0 / (1.0 - r2)).exp()
                    } else {
                        0.0
                    }
                })
                .unwrap()
            })
            .collect();
        let id = operator_norm_estimate(&Operator::Identity, 2.0, &Weight::one(), &members, None).unwrap();
        assert_eq!(id.value, 1.0);
        let s = operator_norm_estimate(&Operator::Steklov { u: vec![0.25] }, 2.0, &Weight::one(), &members, None).unwrap();
        assert!(s.value <= 1.0 + 1e-9);
        assert_eq!(s.n_trials, 4);
        let mut with_zero = members.clone();
        with_zero.push(GridFunction::zeros(members[0].grid().clone()));
        let s2 = operator_norm_estimate(&Operator::Steklov { u: vec![0.25] }, 2.0, &Weight::one(), &with_zero, None).unwrap();
        assert_eq!(s2.n_trials, 4);
    }

    #[test]
    fn operator_tags_parse() {
        for tag in OPERATOR_TAGS {
            let op = Operator::from_tag(tag, 1, None, Some(0.5), &Weight::one(), Some(1.0)).unwrap();
            assert_eq!(op.tag(), tag);
            let json = serde_json::to_string(&op).unwrap();
            assert_eq!(serde_json::from_str::<Operator>(&json).unwrap(), op);
        }
        assert!(matches!(
            Operator::from_tag("T", 1, None, None, &Weight::one(), None),
            Err(Error::UnknownOperator(_))
        ));
        let _ = GridBox::centered_cube(1, 1.0);
    }
}
