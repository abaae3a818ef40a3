//! Gauss–Legendre rules and box quadrature that respects weight singularities.

use std::f64::consts::PI;

use crate::grid::MAX_DIM;

const GL_ORDER: usize = 12;
/// Dyadic refinement levels toward a corner singularity.
const CORNER_DEPTH: usize = 200;

/// Nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2 * j + 1) as f64 * z * p2 - j as f64 * p3) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / dp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Where a weight is allowed to be non-smooth.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct Cuts<'a> {
    pub singular_origin: bool,
    pub axis0_breaks: &'a [f64],
}

/// Feeds every quadrature node `(t, weight)` of the box `[lo, hi]` to `visit`.
pub(crate) fn box_nodes(lo: &[f64], hi: &[f64], cuts: Cuts<'_>, visit: &mut dyn FnMut(&[f64], f64)) {
    let rule = gauss_legendre(GL_ORDER);
    split(lo, hi, cuts, &rule, visit);
}

fn split(lo: &[f64], hi: &[f64], cuts: Cuts<'_>, rule: &(Vec<f64>, Vec<f64>), visit: &mut dyn FnMut(&[f64], f64)) {
    let d = lo.len();
    if cuts.singular_origin {
        for a in 0..d {
            if lo[a] < 0.0 && 0.0 < hi[a] {
                let (mut h1, mut l2) = (hi.to_vec(), lo.to_vec());
                h1[a] = 0.0;
                l2[a] = 0.0;
                split(lo, &h1, cuts, rule, visit);
                split(&l2, hi, cuts, rule, visit);
                return;
            }
        }
    }
    if let Some(&b) = cuts.axis0_breaks.iter().find(|&&b| lo[0] < b && b < hi[0]) {
        let (mut h1, mut l2) = (hi.to_vec(), lo.to_vec());
        h1[0] = b;
        l2[0] = b;
        split(lo, &h1, cuts, rule, visit);
        split(&l2, hi, cuts, rule, visit);
        return;
    }
    let corner = cuts.singular_origin && (0..d).all(|a| lo[a] == 0.0 || hi[a] == 0.0);
    if corner {
        toward_corner(lo, hi, rule, visit);
    } else {
        tensor(lo, hi, rule, visit);
    }
}

/// Dyadic refinement toward the vertex at the origin; the last cell is dropped.
fn toward_corner(lo: &[f64], hi: &[f64], rule: &(Vec<f64>, Vec<f64>), visit: &mut dyn FnMut(&[f64], f64)) {
    let d = lo.len();
    let mut lo = lo.to_vec();
    let mut hi = hi.to_vec();
    for _ in 0..CORNER_DEPTH {
        let mid: Vec<f64> = (0..d).map(|a| 0.5 * (lo[a] + hi[a])).collect();
        let mut next = None;
        for pattern in 0..(1usize << d) {
            let mut sl = vec![0.0; d];
            let mut sh = vec![0.0; d];
            for a in 0..d {
                if (pattern >> a) & 1 == 0 {
                    sl[a] = lo[a];
                    sh[a] = mid[a];
                } else {
                    sl[a] = mid[a];
                    sh[a] = hi[a];
                }
            }
            if (0..d).all(|a| sl[a] == 0.0 || sh[a] == 0.0) {
                next = Some((sl, sh));
            } else {
                tensor(&sl, &sh, rule, visit);
            }
        }
        let (l, h) = next.expect("one sub-box keeps the corner");
        lo = l;
        hi = h;
    }
}

fn tensor(lo: &[f64], hi: &[f64], rule: &(Vec<f64>, Vec<f64>), visit: &mut dyn FnMut(&[f64], f64)) {
    let d = lo.len();
    let (x, w) = rule;
    let n = x.len();
    let mut t = [0.0; MAX_DIM];
    let total = n.pow(d as u32);
    for flat in 0..total {
        let mut rem = flat;
        let mut weight = 1.0;
        for a in 0..d {
            let i = rem % n;
            rem /= n;
            let half = 0.5 * (hi[a] - lo[a]);
            t[a] = lo[a] + half * (x[i] + 1.0);
            weight *= half * w[i];
        }
        visit(&t[..d], weight);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(GL_ORDER);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
        // ∫ x^22 over [-1,1] = 2/23
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(22)).sum();
        assert_relative_eq!(s, 2.0 / 23.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_power_integrals() {
        // ∫_{-1}^{1} |t|^{-1/2} dt = 4
        let mut s = 0.0;
        let cuts = Cuts {
            singular_origin: true,
            axis0_breaks: &[],
        };
        box_nodes(&[-1.0], &[1.0], cuts, &mut |t, w| s += w * t[0].abs().powf(-0.5));
        assert_relative_eq!(s, 4.0, epsilon = 1e-12);
        // ∫_{[-1/2,1/2]^2} |t|^{1/2} via polar symmetry check against a fine tensor sum
        let mut s2 = 0.0;
        box_nodes(&[-0.5, -0.5], &[0.5, 0.5], cuts, &mut |t, w| {
            s2 += w * (t[0] * t[0] + t[1] * t[1]).powf(0.25)
        });
        let n = 4000;
        let h = 1.0 / n as f64;
        let mut brute = 0.0;
        for i in 0..n {
            for j in 0..n {
                let x = -0.5 + (i as f64 + 0.5) * h;
                let y = -0.5 + (j as f64 + 0.5) * h;
                brute += (x * x + y * y).powf(0.25) * h * h;
            }
        }
        assert_relative_eq!(s2, brute, max_relative = 1e-7);
    }

    #[test]
    fn step_breaks_are_exact() {
        let mut s = 0.0;
        let cuts = Cuts {
            singular_origin: false,
            axis0_breaks: &[0.3],
        };
        box_nodes(&[0.0], &[1.0], cuts, &mut |t, w| s += w * if t[0] < 0.3 { 1.0 } else { 5.0 });
        assert_relative_eq!(s, 0.3 + 3.5, epsilon = 1e-13);
    }
}
