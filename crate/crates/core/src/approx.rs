//! de la Vallée Poussin means, discrete spectra and bandlimited approximation.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, GridFunction, QuadratureRule, MAX_DIM};
use crate::measure::weighted_lp_norm;
use crate::par;
use crate::weights::Weight;

/// How `J(f, σ)` is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VpMethod {
    /// Convolution with the sampled kernel, `f` extended by zero.
    #[default]
    DirectQuadrature,
    /// Fourier multiplier on the periodized box.
    Spectral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VpParams {
    pub sigma: f64,
    #[serde(default)]
    pub method: VpMethod,
}

impl VpParams {
    pub fn new(sigma: f64, method: VpMethod) -> Self {
        Self { sigma, method }
    }

    pub fn direct(sigma: f64) -> Self {
        Self::new(sigma, VpMethod::DirectQuadrature)
    }

    pub fn spectral(sigma: f64) -> Self {
        Self::new(sigma, VpMethod::Spectral)
    }
}

fn vp_factor(sigma: f64, t: f64) -> f64 {
    if t.abs() < 1e-4 / sigma {
        let s2 = sigma * sigma;
        let t2 = t * t;
        1.5 * s2 - 0.625 * s2 * s2 * t2 + 0.0875 * s2 * s2 * s2 * t2 * t2
    } else {
        ((sigma * t).cos() - (2.0 * sigma * t).cos()) / (t * t)
    }
}

/// `ϑ_σ(t) = σ^{-d} Π_j (cos σt_j − cos 2σt_j) / t_j²`.
pub fn vp_kernel(sigma: f64, t: &[f64]) -> f64 {
    t.iter().map(|&x| vp_factor(sigma, x) / sigma).product()
}

/// Multiplier of `J(·, σ)` along one axis: 1 up to `σ`, linear down to 0 at `2σ`.
pub fn vp_multiplier(sigma: f64, y: f64) -> f64 {
    let a = y.abs();
    if a <= sigma {
        1.0
    } else if a < 2.0 * sigma {
        (2.0 * sigma - a) / sigma
    } else {
        0.0
    }
}

fn check_band(grid: &Grid, sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(invalid(format!("sigma must be positive, got {sigma}")));
    }
    for &h in grid.h() {
        if sigma * h / PI >= 0.5 {
            return Err(Error::BandNotResolvable { sigma, h });
        }
    }
    Ok(())
}

/// `J(f, σ) = π^{-d} ∫ ϑ_σ(x − u) f(u) du`.
pub fn vp_apply(f: &GridFunction, params: &VpParams) -> Result<GridFunction> {
    let grid = f.grid();
    check_band(grid, params.sigma)?;
    match params.method {
        VpMethod::DirectQuadrature => {
            let mut cur = f.samples().to_vec();
            for a in 0..grid.dim() {
                let n = grid.n()[a];
                let h = grid.h()[a];
                let taps: Vec<f64> = (0..n)
                    .map(|m| h * vp_factor(params.sigma, m as f64 * h) / (params.sigma * PI))
                    .collect();
                cur = full_convolve_axis(grid, &cur, a, &taps);
            }
            GridFunction::new(grid.clone(), cur)
        }
        VpMethod::Spectral => {
            let sigma = params.sigma;
            let mut s = spectrum(f);
            s.apply_multiplier(|y| y.iter().map(|&v| vp_multiplier(sigma, v)).product());
            s.inverse()
        }
    }
}

/// `g[i] = Σ_j taps[|i − j|] src[j]` along `axis`.
fn full_convolve_axis(grid: &Grid, src: &[f64], axis: usize, taps: &[f64]) -> Vec<f64> {
    let n = grid.n()[axis];
    let stride = grid.strides()[axis];
    par::map_range(src.len(), |flat| {
        let i = grid.unravel(flat)[axis];
        let base = flat - i * stride;
        let mut s = 0.0;
        for j in 0..n {
            let v = src[base + j * stride];
            if v != 0.0 {
                s += taps[i.abs_diff(j)] * v;
            }
        }
        s
    })
}

/// Discrete Fourier coefficients of the samples, unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub grid: Grid,
    pub coeffs: Vec<Complex64>,
    /// `2π / width` per axis.
    pub freq_step: Vec<f64>,
}

fn fft_axes(grid: &Grid, data: &mut [Complex64], inverse: bool) {
    let d = grid.dim();
    let mut planner = FftPlanner::<f64>::new();
    let strides = grid.strides();
    for a in 0..d {
        let n = grid.n()[a];
        let stride = strides[a];
        let fft = if inverse {
            planner.plan_fft_inverse(n)
        } else {
            planner.plan_fft_forward(n)
        };
        let lines = data.len() / n;
        let starts: Vec<usize> = (0..data.len())
            .filter(|&flat| grid.unravel(flat)[a] == 0)
            .collect();
        debug_assert_eq!(starts.len(), lines);
        let src: &[Complex64] = data;
        let done: Vec<Vec<Complex64>> = par::map_slice(&starts, |&s| {
            let mut line: Vec<Complex64> = (0..n).map(|j| src[s + j * stride]).collect();
            fft.process(&mut line);
            line
        });
        for (s, line) in starts.iter().zip(done) {
            for (j, v) in line.into_iter().enumerate() {
                data[s + j * stride] = v;
            }
        }
    }
}

/// Forward transform of `f`.
pub fn spectrum(f: &GridFunction) -> Spectrum {
    let grid = f.grid().clone();
    let mut coeffs: Vec<Complex64> = f.samples().iter().map(|&v| Complex64::new(v, 0.0)).collect();
    fft_axes(&grid, &mut coeffs, false);
    let freq_step = (0..grid.dim()).map(|a| 2.0 * PI / grid.bounds().width(a)).collect();
    Spectrum {
        grid,
        coeffs,
        freq_step,
    }
}

impl Spectrum {
    /// Signed angular frequency of index `k` on `axis`.
    pub fn freq(&self, axis: usize, k: usize) -> f64 {
        let n = self.grid.n()[axis];
        let signed = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
        signed * self.freq_step[axis]
    }

    /// Frequency vector of coefficient `flat`.
    pub fn freq_of(&self, flat: usize) -> [f64; MAX_DIM] {
        let idx = self.grid.unravel(flat);
        let mut y = [0.0; MAX_DIM];
        for (a, v) in y.iter_mut().enumerate().take(self.grid.dim()) {
            *v = self.freq(a, idx[a]);
        }
        y
    }

    pub fn apply_multiplier(&mut self, m: impl Fn(&[f64]) -> f64 + Sync + Send) {
        let d = self.grid.dim();
        let factors = par::map_range(self.coeffs.len(), |i| m(&self.freq_of(i)[..d]));
        for (c, f) in self.coeffs.iter_mut().zip(factors) {
            *c *= f;
        }
    }

    /// Inverse transform; the imaginary part is dropped.
    pub fn inverse(&self) -> Result<GridFunction> {
        let mut data = self.coeffs.clone();
        fft_axes(&self.grid, &mut data, true);
        let scale = 1.0 / self.grid.len() as f64;
        GridFunction::new(self.grid.clone(), data.iter().map(|c| c.re * scale).collect())
    }

    pub fn energy(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Energy of coefficients with some `|y_a| > radius`.
    pub fn energy_outside_cube(&self, radius: f64) -> f64 {
        let d = self.grid.dim();
        (0..self.coeffs.len())
            .filter(|&i| self.freq_of(i)[..d].iter().any(|y| y.abs() > radius))
            .map(|i| self.coeffs[i].norm_sqr())
            .sum()
    }
}

/// Zeroes every coefficient with `|y| > σ`; the exact discrete `L²` best
/// approximation from the band.
pub fn bandlimit_project(f: &GridFunction, sigma: f64) -> Result<GridFunction> {
    if sigma.is_infinite() && sigma > 0.0 {
        return Ok(f.clone());
    }
    if !(sigma >= 0.0) {
        return Err(invalid(format!("sigma must be nonnegative, got {sigma}")));
    }
    let mut s = spectrum(f);
    s.apply_multiplier(|y| {
        if y.iter().map(|v| v * v).sum::<f64>().sqrt() <= sigma {
            1.0
        } else {
            0.0
        }
    });
    s.inverse()
}

/// `‖f − J(f, σ/2)‖_{p,ω}`, an upper bound for `A_σ(f)_{p,ω}`.
pub fn best_approx_upper(f: &GridFunction, sigma: f64, p: f64, w: &Weight, method: VpMethod) -> Result<f64> {
    let j = vp_apply(f, &VpParams::new(sigma / 2.0, method))?;
    weighted_lp_norm(&f.sub(&j)?, p, w, &QuadratureRule::midpoint())
}

/// `Δ^r f` through the multiplier `(−|y|²)^r`.
pub fn laplacian_iterate(f: &GridFunction, r: u32) -> Result<GridFunction> {
    if r == 0 {
        return Err(invalid("laplacian order must be at least 1"));
    }
    let mut s = spectrum(f);
    s.apply_multiplier(|y| (-y.iter().map(|v| v * v).sum::<f64>()).powi(r as i32));
    s.inverse()
}

/// Which candidate attained [`k_functional_upper`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "sigma")]
pub enum KCandidate {
    Itself,
    Zero,
    Vp(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KFunctionalBound {
    pub value: f64,
    pub argmin: KCandidate,
}

/// `min_g ‖f − g‖_{L_a} + δ^r ‖Δ^r g‖_{L_a}` over `g ∈ {f, 0, J(f, σ_i)}`.
pub fn k_functional_upper(f: &GridFunction, delta: f64, r: u32, a: f64, sigmas: &[f64]) -> Result<KFunctionalBound> {
    if !(a >= 1.0) {
        return Err(Error::InvalidExponent(a));
    }
    let one = Weight::one();
    let rule = QuadratureRule::midpoint();
    let norm = |g: &GridFunction| weighted_lp_norm(g, a, &one, &rule);
    let scale = delta.powi(r as i32);
    let mut best = KFunctionalBound {
        value: norm(f)?,
        argmin: KCandidate::Zero,
    };
    let own = scale * norm(&laplacian_iterate(f, r)?)?;
    if own < best.value {
        best = KFunctionalBound {
            value: own,
            argmin: KCandidate::Itself,
        };
    }
    for &s in sigmas {
        let g = vp_apply(f, &VpParams::spectral(s))?;
        let v = norm(&f.sub(&g)?)? + scale * norm(&laplacian_iterate(&g, r)?)?;
        if v < best.value {
            best = KFunctionalBound {
                value: v,
                argmin: KCandidate::Vp(s),
            };
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::translate;
    use crate::measure::WeightedMeasure;
    use approx::assert_relative_eq;

    fn bump(grid: Grid, c: f64, width: f64) -> GridFunction {
        GridFunction::from_fn(grid, move |x| {
            let r2: f64 = x.iter().map(|v| (v - c) * (v - c)).sum::<f64>() / (width * width);
            if r2 < 1.0 {
                (1.0 - 1.0 / (1.0 - r2)).exp()
            } else {
                0.0
            }
        })
        .unwrap()
    }

    fn l2(f: &GridFunction) -> f64 {
        weighted_lp_norm(f, 2.0, &Weight::one(), &QuadratureRule::midpoint()).unwrap()
    }

    #[test]
    fn kernel_values() {
        assert_relative_eq!(vp_kernel(2.0, &[0.0]), 3.0, epsilon = 1e-15);
        assert_relative_eq!(vp_kernel(2.0, &[0.0, 0.0]), 9.0, epsilon = 1e-15);
        assert_relative_eq!(vp_kernel(1.0, &[PI]), -2.0 / (PI * PI), epsilon = 1e-15);
        for &t in &[1e-7, 3e-5, 0.2, 1.7] {
            assert_eq!(vp_kernel(3.0, &[t]), vp_kernel(3.0, &[-t]));
        }
        // both branches agree at the switch
        let s = 2.0;
        let t = 1e-4 / s;
        let taylor = vp_factor(s, t * 0.999_999);
        let direct = ((s * t).cos() - (2.0 * s * t).cos()) / (t * t);
        assert_relative_eq!(taylor, direct, max_relative = 1e-7);
    }

    #[test]
    fn nyquist_is_enforced() {
        let g = Grid::centered(1, 4.0, 64).unwrap();
        let f = bump(g, 0.0, 1.0);
        assert!(matches!(
            vp_apply(&f, &VpParams::direct(30.0)),
            Err(Error::BandNotResolvable { .. })
        ));
    }

    #[test]
    fn spectrum_round_trip_and_projection() {
        let g = Grid::centered(2, 4.0, 32).unwrap();
        let f = bump(g, 0.3, 1.5);
        let back = spectrum(&f).inverse().unwrap();
        assert!(back.max_abs_diff(&f).unwrap() <= 1e-12 * f.sup_abs());
        assert_eq!(bandlimit_project(&f, f64::INFINITY).unwrap(), f);
        let p = bandlimit_project(&f, 3.0).unwrap();
        let pp = bandlimit_project(&p, 3.0).unwrap();
        assert!(p.max_abs_diff(&pp).unwrap() <= 1e-13);
    }

    #[test]
    fn direct_and_spectral_agree() {
        // periodization error of the spectral path decays with the box width
        let g = Grid::centered(1, 64.0, 8192).unwrap();
        let f = bump(g, 0.2, 0.7);
        for &s in &[4.0, 8.0, 16.0] {
            let a = vp_apply(&f, &VpParams::direct(s)).unwrap();
            let b = vp_apply(&f, &VpParams::spectral(s)).unwrap();
            let rel = l2(&a.sub(&b).unwrap()) / l2(&b);
            assert!(rel <= 1e-4, "sigma {s}: {rel}");
        }
    }

    #[test]
    fn reproduces_bandlimited_functions() {
        // (sin(σx/4)/(σx/4))^4 has spectrum in [-σ, σ]
        let sigma = 4.0;
        let g = Grid::centered(1, 16.0, 2048).unwrap();
        let f = GridFunction::from_fn(g, |x| {
            let t = sigma * x[0] / 4.0;
            if t == 0.0 {
                1.0
            } else {
                (t.sin() / t).powi(4)
            }
        })
        .unwrap();
        let j = vp_apply(&f, &VpParams::direct(sigma)).unwrap();
        assert!(l2(&j.sub(&f).unwrap()) / l2(&f) <= 1e-3);
    }

    #[test]
    fn output_band_is_twice_sigma() {
        let g = Grid::centered(1, 16.0, 2048).unwrap();
        let f = bump(g, 0.0, 0.5);
        let sigma = 4.0;
        let j = vp_apply(&f, &VpParams::direct(sigma)).unwrap();
        let s = spectrum(&j);
        let step = s.freq_step[0];
        let out = s.energy_outside_cube(2.0 * sigma * (1.0 + 0.05) + step);
        assert!(out <= 1e-6 * s.energy(), "{}", out / s.energy());
    }

    #[test]
    fn projection_beats_vp_competitor() {
        let g = Grid::centered(1, 8.0, 1024).unwrap();
        let f = bump(g, 0.1, 0.6);
        for &sigma in &[4.0, 8.0, 16.0] {
            let exact = l2(&f.sub(&bandlimit_project(&f, sigma).unwrap()).unwrap());
            let upper = best_approx_upper(&f, sigma, 2.0, &Weight::one(), VpMethod::Spectral).unwrap();
            assert!(exact <= upper + 1e-14);
        }
        let a = best_approx_upper(&f, 4.0, 2.0, &Weight::one(), VpMethod::Spectral).unwrap();
        let b = best_approx_upper(&f, 8.0, 2.0, &Weight::one(), VpMethod::Spectral).unwrap();
        assert!(b <= a);
    }

    #[test]
    fn vp_is_linear_and_translation_invariant() {
        let g = Grid::centered(1, 8.0, 512).unwrap();
        let f = bump(g.clone(), 0.1, 0.6);
        let h = bump(g, -0.4, 1.1);
        let p = VpParams::direct(4.0);
        let lhs = vp_apply(&f.axpby(2.0, &h, -0.5).unwrap(), &p).unwrap();
        let rhs = vp_apply(&f, &p).unwrap().axpby(2.0, &vp_apply(&h, &p).unwrap(), -0.5).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() <= 1e-12);
        let direct = vp_apply(&translate(&f, &[0.25]).unwrap(), &p).unwrap();
        let ref_shift = vp_apply(&f, &p).unwrap();
        let k = (0.25 / f.grid().h()[0]).round() as usize;
        for i in 100..400 {
            assert_relative_eq!(direct.samples()[i], ref_shift.samples()[i + k], epsilon = 1e-10);
        }
    }

    #[test]
    fn laplacian_matches_finite_differences() {
        let g = Grid::centered(2, 4.0, 128).unwrap();
        let f = bump(g.clone(), 0.0, 2.0);
        let lap = laplacian_iterate(&f, 1).unwrap();
        let h = g.h()[0];
        let n = 128;
        let mut worst: f64 = 0.0;
        for i in 1..n - 1 {
            for j in 1..n - 1 {
                let c = g.ravel(&[i, j]);
                let s = f.samples();
                let fd = (s[g.ravel(&[i + 1, j])] + s[g.ravel(&[i - 1, j])] + s[g.ravel(&[i, j + 1])] + s[g.ravel(&[i, j - 1])]
                    - 4.0 * s[c])
                    / (h * h);
                worst = worst.max((fd - lap.samples()[c]).abs());
            }
        }
        assert!(worst <= 50.0 * h * h * lap.sup_abs(), "{worst}");
        // a windowed single mode is an eigenfunction away from the window edge
        let g1 = Grid::centered(1, 8.0, 1024).unwrap();
        let y = 2.0 * PI * 3.0 / 16.0;
        let wave = GridFunction::from_fn(g1.clone(), move |x| (y * x[0]).cos()).unwrap();
        let l = laplacian_iterate(&wave, 1).unwrap();
        for i in 0..1024 {
            assert_relative_eq!(l.samples()[i], -y * y * wave.samples()[i], epsilon = 1e-9);
        }
        let m = WeightedMeasure::new(&g1, &Weight::one(), &QuadratureRule::midpoint()).unwrap();
        assert!(m.norm(&l, 2.0).unwrap() > 0.0);
    }

    #[test]
    fn k_functional_candidates() {
        let g = Grid::centered(1, 8.0, 512).unwrap();
        let f = bump(g, 0.0, 1.5);
        let one = Weight::one();
        let rule = QuadratureRule::midpoint();
        let delta = 0.01;
        let own = delta * weighted_lp_norm(&laplacian_iterate(&f, 1).unwrap(), 2.0, &one, &rule).unwrap();
        let k0 = k_functional_upper(&f, delta, 1, 2.0, &[]).unwrap();
        assert!(k0.value <= own + 1e-15);
        let k1 = k_functional_upper(&f, delta, 1, 2.0, &[2.0, 4.0, 8.0]).unwrap();
        assert!(k1.value <= k0.value);
        let big = k_functional_upper(&f, 1e6, 1, 2.0, &[2.0]).unwrap();
        assert_eq!(big.argmin, KCandidate::Zero);
        assert_relative_eq!(big.value, weighted_lp_norm(&f, 2.0, &one, &rule).unwrap());
    }
}
