//! Lattice constants for midpoint sums against `|x|^α`.
//!
//! For smooth `g`, the cell-centred lattice sum with spacing `h` satisfies
//! `h^d Σ g(x)|x|^α - ∫ g|x|^α = C_d(α) h^{d+α} g(0) + O(h^{d+α+2})`.
//! `C_d(α)` is calibrated once per `(α, d)` against a Gaussian.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Mutex, OnceLock};

use statrs::function::gamma::gamma;

static CACHE: OnceLock<Mutex<HashMap<(u64, usize), f64>>> = OnceLock::new();

/// `C_d(α)`; zero for `α = 0`.
pub(crate) fn lattice_constant(alpha: f64, d: usize) -> f64 {
    if alpha == 0.0 {
        return 0.0;
    }
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let key = (alpha.to_bits(), d);
    if let Some(&c) = cache.lock().expect("cache lock").get(&key) {
        return c;
    }
    let c = calibrate(alpha, d);
    cache.lock().expect("cache lock").insert(key, c);
    c
}

fn calibrate(alpha: f64, d: usize) -> f64 {
    let df = d as f64;
    let exact = PI.powf(df / 2.0) * gamma((alpha + df) / 2.0) / gamma(df / 2.0);
    let (hs, radius): (&[f64], f64) = match d {
        1 => (&[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 8.0),
        2 => (&[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 7.0),
        _ => (&[1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0], 6.0),
    };
    let c: Vec<f64> = hs
        .iter()
        .map(|&h| (lattice_sum(alpha, d, h, radius) - exact) / h.powf(df + alpha))
        .collect();
    let r1 = (4.0 * c[1] - c[0]) / 3.0;
    let r2 = (4.0 * c[2] - c[1]) / 3.0;
    (16.0 * r2 - r1) / 15.0
}

/// `h^d Σ exp(-|x|²)|x|^α` over `x ∈ h(Z + 1/2)^d`, using octant symmetry.
fn lattice_sum(alpha: f64, d: usize, h: f64, radius: f64) -> f64 {
    let m = (radius / h).ceil() as usize;
    let coords: Vec<f64> = (0..m).map(|i| (i as f64 + 0.5) * h).collect();
    let sq: Vec<f64> = coords.iter().map(|x| x * x).collect();
    let term = |r2: f64| (-r2).exp() * r2.powf(alpha / 2.0);
    let mut acc = Neumaier::default();
    match d {
        1 => sq.iter().for_each(|&a| acc.add(term(a))),
        2 => {
            for &a in &sq {
                for &b in &sq {
                    acc.add(term(a + b));
                }
            }
        }
        _ => {
            for &a in &sq {
                for &b in &sq {
                    for &c in &sq {
                        acc.add(term(a + b + c));
                    }
                }
            }
        }
    }
    acc.sum() * (2.0 * h).powi(d as i32)
}

#[derive(Default)]
struct Neumaier {
    s: f64,
    c: f64,
}

impl Neumaier {
    fn add(&mut self, x: f64) {
        let t = self.s + x;
        if self.s.abs() >= x.abs() {
            self.c += (self.s - t) + x;
        } else {
            self.c += (x - t) + self.s;
        }
        self.s = t;
    }

    fn sum(&self) -> f64 {
        self.s + self.c
    }
}
