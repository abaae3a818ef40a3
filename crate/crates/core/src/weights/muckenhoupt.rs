//! Dyadic estimates of `[ω]_p`, `[ω]_∞` and the discrete maximal function.

use serde::{Deserialize, Serialize};

use super::Weight;
use crate::error::{invalid, Error, Result};
use crate::grid::{GridBox, GridFunction, QuadratureRule, MAX_DIM};
use crate::par;

/// Default growth factor per depth that flags an estimate as diverging.
pub const DEFAULT_DIVERGENCE_FACTOR: f64 = 1.5;
/// Number of trailing depth increments inspected for divergence.
const DIVERGENCE_WINDOW: usize = 3;
/// Cap on the number of weight samples per depth.
const SAMPLE_CAP: usize = 1 << 24;

/// Dyadic cubes of a base cube, optionally with half-shifted copies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CubeFamily {
    pub base: GridBox,
    pub max_depth: usize,
    #[serde(default = "yes")]
    pub include_shifted: bool,
    /// Weight samples per axis in each finest cube (even).
    #[serde(default = "default_samples")]
    pub samples_per_cube: usize,
    #[serde(default = "default_factor")]
    pub divergence_factor: f64,
}

fn yes() -> bool {
    true
}

fn default_samples() -> usize {
    8
}

fn default_factor() -> f64 {
    DEFAULT_DIVERGENCE_FACTOR
}

impl CubeFamily {
    pub fn new(base: GridBox, max_depth: usize) -> Self {
        Self {
            base,
            max_depth,
            include_shifted: true,
            samples_per_cube: default_samples(),
            divergence_factor: DEFAULT_DIVERGENCE_FACTOR,
        }
    }

    /// Dyadic family of `[-1, 1]^d`.
    pub fn unit(d: usize, max_depth: usize) -> Result<Self> {
        Ok(Self::new(GridBox::centered_cube(d, 1.0)?, max_depth))
    }

    pub fn with_depth(&self, max_depth: usize) -> Self {
        Self {
            max_depth,
            ..self.clone()
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.base.dim();
        let w0 = self.base.width(0);
        if (1..d).any(|a| (self.base.width(a) - w0).abs() > 1e-12 * w0) {
            return Err(invalid("cube family base must be a cube"));
        }
        if self.samples_per_cube < 2 || self.samples_per_cube % 2 != 0 {
            return Err(invalid("samples_per_cube must be even and >= 2"));
        }
        if !(self.divergence_factor > 1.0) {
            return Err(invalid("divergence factor must exceed 1"));
        }
        Ok(())
    }
}

/// Sup of the `A_p` functional over a cube family, tracked by depth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApEstimate {
    pub p: f64,
    pub value: f64,
    pub depth_profile: Vec<(usize, f64)>,
    pub diverging: bool,
}

impl ApEstimate {
    /// Largest relative change over the last `window` depth increments.
    pub fn trailing_drift(&self, window: usize) -> f64 {
        let v: Vec<f64> = self.depth_profile.iter().map(|x| x.1).collect();
        let start = v.len().saturating_sub(window + 1);
        v[start..]
            .windows(2)
            .map(|w| (w[1] - w[0]).abs() / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    }
}

/// `[ω]_p` over `cubes`. At depth `D` the weight is sampled at
/// `2^D · samples_per_cube · refinement` midpoints per axis of the base cube
/// and every cube of depth `≤ D` is scored from those samples.
pub fn ap_constant(w: &Weight, p: f64, cubes: &CubeFamily, rule: &QuadratureRule) -> Result<ApEstimate> {
    if !(p.is_finite() && p >= 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    cubes.validate()?;
    rule.validate()?;
    let d = cubes.base.dim();
    w.validate(d)?;
    let mut profile = Vec::with_capacity(cubes.max_depth + 1);
    let mut running = 0.0f64;
    for depth in 0..=cubes.max_depth {
        let sup = ap_at_depth(w, p, cubes, rule.refinement, depth)?;
        running = if sup.is_finite() { running.max(sup) } else { f64::INFINITY };
        profile.push((depth, running));
    }
    let diverging = is_diverging(&profile, cubes.divergence_factor);
    Ok(ApEstimate {
        p,
        value: running,
        depth_profile: profile,
        diverging,
    })
}

fn is_diverging(profile: &[(usize, f64)], factor: f64) -> bool {
    if profile.iter().any(|x| !x.1.is_finite()) {
        return true;
    }
    if profile.len() < DIVERGENCE_WINDOW + 1 {
        return false;
    }
    profile[profile.len() - DIVERGENCE_WINDOW - 1..]
        .windows(2)
        .all(|w| w[1].1 >= factor * w[0].1)
}

/// Block sums at one pyramid level.
struct Level {
    n: usize,
    sum: Vec<f64>,
    sum_dual: Vec<f64>,
    min: Vec<f64>,
}

fn ap_at_depth(w: &Weight, p: f64, cubes: &CubeFamily, refinement: usize, depth: usize) -> Result<f64> {
    let d = cubes.base.dim();
    let m = cubes.samples_per_cube * refinement;
    let half = m / 2;
    let per_axis = (1usize << depth) * m;
    if per_axis.checked_pow(d as u32).is_none_or(|t| t > SAMPLE_CAP) {
        return Err(invalid(format!("cube family depth {depth} needs too many samples")));
    }
    let lo = cubes.base.lower().to_vec();
    let step: Vec<f64> = (0..d).map(|a| cubes.base.width(a) / per_axis as f64).collect();
    let dual = if p > 1.0 { 1.0 - p / (p - 1.0) } else { 0.0 };

    // leaf blocks: half-size cubes of depth + 1
    let nb = 2usize << depth;
    let blocks = nb.pow(d as u32);
    let leaf: Vec<(f64, f64, f64)> = par::map_range(blocks, |b| {
        let bi = unravel(b, nb, d);
        let mut s = 0.0;
        let mut sd = 0.0;
        let mut mn = f64::INFINITY;
        let mut x = [0.0; MAX_DIM];
        for local in 0..half.pow(d as u32) {
            let li = unravel(local, half, d);
            for a in 0..d {
                x[a] = lo[a] + ((bi[a] * half + li[a]) as f64 + 0.5) * step[a];
            }
            let v = w.eval(&x[..d]);
            s += v;
            if p > 1.0 {
                sd += v.powf(dual);
            }
            mn = mn.min(v);
        }
        (s, sd, mn)
    });
    let mut level = Level {
        n: nb,
        sum: leaf.iter().map(|x| x.0).collect(),
        sum_dual: leaf.iter().map(|x| x.1).collect(),
        min: leaf.iter().map(|x| x.2).collect(),
    };
    let mut sup = 0.0f64;
    for k in (0..=depth).rev() {
        let count = ((m << (depth - k)) as f64).powi(d as i32);
        let windows = level.n - 1;
        let total = windows.pow(d as u32);
        let scores = par::map_range(total, |j| {
            let ji = unravel(j, windows, d);
            let aligned = ji[..d].iter().all(|v| v % 2 == 0);
            if !aligned && !cubes.include_shifted {
                return 0.0;
            }
            let (s, sd, mn) = window(&level, &ji[..d], d);
            let mean = s / count;
            if p > 1.0 {
                mean * (sd / count).powf(p - 1.0)
            } else {
                mean / mn
            }
        });
        for v in scores {
            if !v.is_finite() {
                return Ok(f64::INFINITY);
            }
            sup = sup.max(v);
        }
        if k > 0 {
            level = coarsen(&level, d);
        }
    }
    Ok(sup)
}

fn unravel(mut flat: usize, n: usize, d: usize) -> [usize; MAX_DIM] {
    let mut idx = [0usize; MAX_DIM];
    for a in (0..d).rev() {
        idx[a] = flat % n;
        flat /= n;
    }
    idx
}

fn ravel(idx: &[usize], n: usize) -> usize {
    idx.iter().fold(0, |acc, &i| acc * n + i)
}

/// Sums over the `2^d` blocks starting at `start`.
fn window(level: &Level, start: &[usize], d: usize) -> (f64, f64, f64) {
    let mut s = 0.0;
    let mut sd = 0.0;
    let mut mn = f64::INFINITY;
    let mut idx = [0usize; MAX_DIM];
    for corner in 0..(1usize << d) {
        for a in 0..d {
            idx[a] = start[a] + ((corner >> a) & 1);
        }
        let f = ravel(&idx[..d], level.n);
        s += level.sum[f];
        sd += level.sum_dual[f];
        mn = mn.min(level.min[f]);
    }
    (s, sd, mn)
}

fn coarsen(level: &Level, d: usize) -> Level {
    let n = level.n / 2;
    let total = n.pow(d as u32);
    let merged = par::map_range(total, |j| {
        let ji = unravel(j, n, d);
        let mut start = [0usize; MAX_DIM];
        for a in 0..d {
            start[a] = 2 * ji[a];
        }
        window(level, &start[..d], d)
    });
    Level {
        n,
        sum: merged.iter().map(|x| x.0).collect(),
        sum_dual: merged.iter().map(|x| x.1).collect(),
        min: merged.iter().map(|x| x.2).collect(),
    }
}

/// Samples per axis used for each cube in the `[ω]_∞` estimate.
fn ainfty_samples(d: usize) -> usize {
    match d {
        1 => 64,
        2 => 16,
        _ => 8,
    }
}

/// `sup_Q ⟨ω⟩_Q^{-1} ∫_Q M[ω χ_Q]` over `cubes`, each cube sampled on its
/// own midpoint grid and `M` taken as the discrete centred maximal function.
pub fn ainfty_constant(w: &Weight, cubes: &CubeFamily) -> Result<f64> {
    cubes.validate()?;
    let d = cubes.base.dim();
    w.validate(d)?;
    let m = ainfty_samples(d);
    let side0 = cubes.base.width(0);
    let lo = cubes.base.lower().to_vec();
    let mut list: Vec<[f64; MAX_DIM]> = Vec::new();
    let mut sides = Vec::new();
    for k in 0..=cubes.max_depth {
        let per = 1usize << k;
        let side = side0 / per as f64;
        let starts = if cubes.include_shifted && k > 0 { 2 * per - 1 } else { per };
        let stride = if cubes.include_shifted && k > 0 { side / 2.0 } else { side };
        sides.extend(std::iter::repeat_n(side, starts.pow(d as u32)));
        for j in 0..starts.pow(d as u32) {
            let ji = unravel(j, starts, d);
            let mut corner = [0.0; MAX_DIM];
            for a in 0..d {
                corner[a] = lo[a] + ji[a] as f64 * stride;
            }
            list.push(corner);
        }
    }
    let n = vec![m; d];
    let scores = par::map_range(list.len(), |c| {
        let corner = &list[c];
        let side = sides[c];
        let h = side / m as f64;
        let samples: Vec<f64> = (0..m.pow(d as u32))
            .map(|i| {
                let ii = unravel(i, m, d);
                let mut x = [0.0; MAX_DIM];
                for a in 0..d {
                    x[a] = corner[a] + (ii[a] as f64 + 0.5) * h;
                }
                w.eval(&x[..d])
            })
            .collect();
        let mf = maximal_samples(&n, &samples);
        mf.iter().sum::<f64>() / samples.iter().sum::<f64>()
    });
    Ok(scores.into_iter().fold(0.0, f64::max))
}

/// `log a₀ = 2^{11+d} [ω]_∞`; never exponentiated.
pub fn log_a0(w: &Weight, cubes: &CubeFamily) -> Result<f64> {
    let d = cubes.base.dim();
    Ok(2f64.powi(11 + d as i32) * ainfty_constant(w, cubes)?)
}

/// Discrete centred maximal function: the largest average of `g` over cubes
/// of `(2r+1)^d` cells centred at each sample, with zero outside the grid.
pub fn maximal_function(g: &GridFunction) -> Result<GridFunction> {
    if !g.is_nonnegative() {
        return Err(Error::NegativeInput);
    }
    let out = maximal_samples(g.grid().n(), g.samples());
    GridFunction::new(g.grid().clone(), out)
}

fn maximal_samples(n: &[usize], values: &[f64]) -> Vec<f64> {
    let d = n.len();
    let prefix = PrefixSum::new(n, values);
    let rmax = n.iter().copied().max().unwrap_or(1);
    let total: usize = n.iter().product();
    par::map_range(total, |flat| {
        let mut idx = [0usize; MAX_DIM];
        let mut rem = flat;
        for a in (0..d).rev() {
            idx[a] = rem % n[a];
            rem /= n[a];
        }
        let mut best = 0.0f64;
        for r in 0..rmax {
            let mut lo = [0usize; MAX_DIM];
            let mut hi = [0usize; MAX_DIM];
            for a in 0..d {
                lo[a] = idx[a].saturating_sub(r);
                hi[a] = (idx[a] + r + 1).min(n[a]);
            }
            let s = prefix.box_sum(&lo[..d], &hi[..d]);
            let vol = ((2 * r + 1) as f64).powi(d as i32);
            best = best.max(s / vol);
        }
        best
    })
}

/// Inclusive-exclusive summed-area table with a zero border.
struct PrefixSum {
    dims: Vec<usize>,
    table: Vec<f64>,
}

impl PrefixSum {
    fn new(n: &[usize], values: &[f64]) -> Self {
        let d = n.len();
        let dims: Vec<usize> = n.iter().map(|k| k + 1).collect();
        let total: usize = dims.iter().product();
        let mut table = vec![0.0; total];
        let mut strides = vec![1usize; d];
        for a in (0..d.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        let mut vstride = vec![1usize; d];
        for a in (0..d.saturating_sub(1)).rev() {
            vstride[a] = vstride[a + 1] * n[a + 1];
        }
        for (flat, slot) in table.iter_mut().enumerate() {
            let mut rem = flat;
            let mut src = 0usize;
            let mut inside = true;
            for a in 0..d {
                let i = rem / strides[a];
                rem %= strides[a];
                if i == 0 {
                    inside = false;
                } else {
                    src += (i - 1) * vstride[a];
                }
            }
            if inside {
                *slot = values[src];
            }
        }
        for a in 0..d {
            let s = strides[a];
            for flat in 0..total {
                if (flat / s) % dims[a] != 0 {
                    table[flat] += table[flat - s];
                }
            }
        }
        Self { dims, table }
    }

    /// Sum over `lo..hi` (half-open, in value coordinates).
    fn box_sum(&self, lo: &[usize], hi: &[usize]) -> f64 {
        let d = lo.len();
        let mut s = 0.0;
        for corner in 0..(1usize << d) {
            let mut flat = 0usize;
            let mut sign = 1.0;
            for a in 0..d {
                let c = if (corner >> a) & 1 == 1 {
                    hi[a]
                } else {
                    sign = -sign;
                    lo[a]
                };
                flat = flat * self.dims[a] + c;
            }
            s += sign * self.table[flat];
        }
        s
    }
}

/// Outcome of [`select_q`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QSelection {
    pub q: f64,
    /// `r = p/q`, the exponent whose `A_r` estimate was confirmed.
    pub r: f64,
    pub estimate: ApEstimate,
    pub log_a0: f64,
}

/// Picks `q ∈ (0, p)` with a non-diverging `[ω]_{p/q}` estimate.
/// Tries `p/2`, then halves `q` until admissible and bisects back toward the
/// last failing value.
pub fn select_q(w: &Weight, p: f64, cubes: &CubeFamily) -> Result<QSelection> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let rule = QuadratureRule::midpoint();
    let test = |q: f64| ap_constant(w, p / q, cubes, &rule);
    let ainf_cubes = cubes.with_depth(cubes.max_depth.min(8));
    let la0 = log_a0(w, &ainf_cubes)?;
    let first = test(p / 2.0)?;
    if !first.diverging {
        return Ok(QSelection {
            q: p / 2.0,
            r: 2.0,
            estimate: first,
            log_a0: la0,
        });
    }
    let mut bad = p / 2.0;
    let mut good = None;
    for _ in 0..10 {
        let q = bad / 2.0;
        let est = test(q)?;
        if !est.diverging {
            good = Some((q, est));
            break;
        }
        bad = q;
    }
    let (mut q_ok, mut est_ok) = good.ok_or(Error::AinftyNotConfirmed)?;
    for _ in 0..6 {
        let mid = 0.5 * (q_ok + bad);
        let est = test(mid)?;
        if est.diverging {
            bad = mid;
        } else {
            q_ok = mid;
            est_ok = est;
        }
    }
    Ok(QSelection {
        q: q_ok,
        r: p / q_ok,
        estimate: est_ok,
        log_a0: la0,
    })
}
