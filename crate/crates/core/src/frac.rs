//! Fractional differences `(E - V_δ)^k f = Σ_s (-1)^s C_s^k V_δ^s f`.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridFunction;
use crate::ops::{box_kernel, BoxSpec};

/// Hard cap on the number of series terms.
pub const MAX_TERMS: usize = 10_000;

/// Binomial coefficients `C_0..C_N` of order `k` with a tail bound.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FracDiffSeries {
    pub k: f64,
    pub coeffs: Vec<f64>,
    pub n: usize,
    /// Upper bound for `Σ_{s>N} |C_s|`.
    pub tail_bound: f64,
    /// `2 · max_{s≤N} |C_s| s^{1+k}`.
    pub decay_constant: f64,
}

fn is_integer(k: f64) -> bool {
    k.fract() == 0.0
}

/// `C_s = C_{s-1}(k - s + 1)/s`, carried in double-double.
pub fn binom_coeffs(k: f64, n: usize) -> Result<FracDiffSeries> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidExponent(k));
    }
    if n == 0 || n > MAX_TERMS {
        return Err(invalid(format!("series length must be in 1..={MAX_TERMS}")));
    }
    let mut coeffs = Vec::with_capacity(n + 1);
    let (mut hi, mut lo) = (1.0f64, 0.0f64);
    coeffs.push(1.0);
    for s in 1..=n {
        let t = k - s as f64 + 1.0;
        let p = hi * t;
        let e = hi.mul_add(t, -p) + lo * t;
        let q = p / s as f64;
        let r = (-q).mul_add(s as f64, p);
        let qlo = (r + e) / s as f64;
        hi = q + qlo;
        lo = qlo - (hi - q);
        coeffs.push(hi);
    }
    let decay_constant = 2.0
        * (1..=n)
            .map(|s| coeffs[s].abs() * (s as f64).powf(1.0 + k))
            .fold(0.0, f64::max);
    let tail_bound = if is_integer(k) && n as f64 >= k {
        0.0
    } else {
        decay_constant * (n as f64).powf(-k) / k
    };
    Ok(FracDiffSeries {
        k,
        coeffs,
        n,
        tail_bound,
        decay_constant,
    })
}

impl FracDiffSeries {
    /// `(Σ_{s=0}^{N} |C_s|^p)^{1/p}` for `p < 1`, plain absolute sum otherwise.
    pub fn abs_sum(&self, p: f64) -> f64 {
        if p < 1.0 {
            self.coeffs.iter().map(|c| c.abs().powf(p)).sum::<f64>().powf(1.0 / p)
        } else {
            self.coeffs.iter().map(|c| c.abs()).sum()
        }
    }

    /// `Σ_{s=0}^{N} (-1)^s C_s`.
    pub fn alternating_sum(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(s, c)| if s % 2 == 0 { *c } else { -*c })
            .sum()
    }
}

/// Result of [`frac_difference`].
#[derive(Clone, Debug, PartialEq)]
pub struct FracDiffResult {
    pub value: GridFunction,
    pub series: FracDiffSeries,
    /// Bound on the dropped terms relative to `‖f‖_∞`.
    pub relative_tail: f64,
}

/// Largest number of `V_δ` applications that keeps the support inside the box.
fn margin_terms(f: &GridFunction, delta: f64) -> Result<usize> {
    let grid = f.grid();
    let mut avail = usize::MAX;
    for a in 0..grid.dim() {
        let half = (delta / 2.0 / grid.h()[a]).round() as usize;
        let (l, r) = f.free_cells(a);
        avail = avail.min(l.min(r) / half.max(1));
    }
    Ok(avail)
}

/// `Σ_{s>N} |C_s| ρ^s` for `ρ = δ^d < 1`, valid once `|C_s|` is nonincreasing.
fn geometric_tail(series_next: f64, rho: f64, n: usize) -> f64 {
    series_next.abs() * rho.powi(n as i32 + 1) / (1.0 - rho)
}

/// `(E - V_δ)^k f` with the number of terms chosen so that the dropped tail
/// is at most `tol · ‖f‖_∞` in sup norm (using `‖V_δ g‖_∞ ≤ δ^d ‖g‖_∞`).
/// For `δ ≥ 1` and non-integer `k` the series is cut at the margin budget and
/// the achieved bound is reported.
pub fn frac_difference(f: &GridFunction, k: f64, delta: f64, tol: f64) -> Result<FracDiffResult> {
    if !(k.is_finite() && k > 0.0) {
        return Err(Error::InvalidExponent(k));
    }
    if !(delta > 0.0 && tol > 0.0) {
        return Err(invalid("frac difference needs delta > 0 and tol > 0"));
    }
    let d = f.grid().dim();
    let rho = delta.powi(d as i32);
    let available = margin_terms(f, delta)?;
    let (n, tail) = if is_integer(k) {
        (k as usize, 0.0)
    } else if rho < 1.0 {
        let probe = binom_coeffs(k, MAX_TERMS)?;
        let start = (((k - 1.0) / 2.0).ceil().max(1.0)) as usize;
        let n = (start..MAX_TERMS)
            .find(|&n| geometric_tail(probe.coeffs[n + 1], rho, n) <= tol)
            .ok_or_else(|| invalid("frac series does not reach the tolerance"))?;
        (n, geometric_tail(probe.coeffs[n + 1], rho, n))
    } else {
        let n = available.clamp(1, MAX_TERMS);
        let s = binom_coeffs(k, n)?;
        (n, if rho == 1.0 { s.tail_bound } else { f64::INFINITY })
    };
    if n > available {
        return Err(Error::InsufficientSupportMargin {
            needed: n,
            available,
        });
    }
    let mut out = frac_difference_terms(f, k, delta, n)?;
    out.relative_tail = tail;
    Ok(out)
}

/// The series truncated after exactly `n` terms.
pub fn frac_difference_terms(f: &GridFunction, k: f64, delta: f64, n: usize) -> Result<FracDiffResult> {
    let series = binom_coeffs(k, n.max(1))?;
    let d = f.grid().dim();
    let available = margin_terms(f, delta)?;
    if n > available {
        return Err(Error::InsufficientSupportMargin {
            needed: n,
            available,
        });
    }
    let kernel = box_kernel(f.grid(), &BoxSpec::v(delta, d)?)?;
    let mut acc = f.samples().to_vec();
    let mut cur = f.clone();
    for s in 1..=n {
        cur = kernel.apply(&cur)?;
        let c = if s % 2 == 0 { series.coeffs[s] } else { -series.coeffs[s] };
        if c != 0.0 {
            for (a, v) in acc.iter_mut().zip(cur.samples()) {
                *a += c * v;
            }
        }
    }
    let value = GridFunction::new(f.grid().clone(), acc)?;
    let tail = if is_integer(k) && n as f64 >= k { 0.0 } else { series.tail_bound };
    Ok(FracDiffResult {
        value,
        series,
        relative_tail: tail,
    })
}
