//! Seeded corpora of compactly supported test functions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::grid::{Grid, GridFunction};
use crate::par;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Sums of at most five smooth bumps; nonnegative.
    #[default]
    BumpMixtures,
    /// Random trigonometric sums under a smooth window; signed.
    RandomTrigWindowed,
    /// Indicators of boxes with edges on the 1/8 lattice.
    Indicators,
}

impl EnsembleKind {
    pub fn is_nonnegative(self) -> bool {
        !matches!(self, EnsembleKind::RandomTrigWindowed)
    }
}

/// `height · exp(1 − 1/(1 − |x − center|²/radius²))` inside the ball.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radius: f64,
    pub height: f64,
}

impl Bump {
    pub fn eval(&self, x: &[f64]) -> f64 {
        let r2: f64 = x
            .iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            / (self.radius * self.radius);
        if r2 < 1.0 {
            self.height * (1.0 - 1.0 / (1.0 - r2)).exp()
        } else {
            0.0
        }
    }
}

/// Continuous description of a member, so it can be resampled on any grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MemberSpec {
    Bumps { bumps: Vec<Bump> },
    Trig { window: Bump, modes: Vec<(f64, Vec<f64>, f64)> },
    Indicator { lower: Vec<f64>, upper: Vec<f64> },
}

impl MemberSpec {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            MemberSpec::Bumps { bumps } => bumps.iter().map(|b| b.eval(x)).sum(),
            MemberSpec::Trig { window, modes } => {
                let w = window.eval(x);
                if w == 0.0 {
                    return 0.0;
                }
                let s: f64 = modes
                    .iter()
                    .map(|(amp, freq, phase)| {
                        let arg: f64 = freq.iter().zip(x).map(|(f, v)| f * v).sum();
                        amp * (arg + phase).cos()
                    })
                    .sum();
                w * s
            }
            MemberSpec::Indicator { lower, upper } => {
                if x.iter().zip(lower.iter().zip(upper)).all(|(v, (l, u))| *l <= *v && *v <= *u) {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<GridFunction> {
        GridFunction::from_fn(grid.clone(), |x| self.eval(x))
    }
}

/// A seeded corpus and its samples on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Ensemble {
    pub seed: u64,
    pub kind: EnsembleKind,
    pub specs: Vec<MemberSpec>,
    pub members: Vec<GridFunction>,
}

fn draw_spec(rng: &mut ChaCha8Rng, kind: EnsembleKind, d: usize) -> MemberSpec {
    let center = |rng: &mut ChaCha8Rng| (0..d).map(|_| rng.random_range(-0.75..=0.75)).collect::<Vec<f64>>();
    match kind {
        EnsembleKind::BumpMixtures => {
            let count = rng.random_range(1..=5usize);
            let bumps = (0..count)
                .map(|_| Bump {
                    center: center(rng),
                    radius: rng.random_range(0.25..=0.75),
                    height: rng.random_range(0.1..=1.0),
                })
                .collect();
            MemberSpec::Bumps { bumps }
        }
        EnsembleKind::RandomTrigWindowed => {
            let window = Bump {
                center: center(rng),
                radius: rng.random_range(0.5..=0.75),
                height: 1.0,
            };
            let count = rng.random_range(1..=4usize);
            let modes = (0..count)
                .map(|_| {
                    let amp = rng.random_range(0.1..=1.0);
                    let freq = (0..d).map(|_| rng.random_range(-6.0..=6.0)).collect();
                    let phase = rng.random_range(0.0..std::f64::consts::TAU);
                    (amp, freq, phase)
                })
                .collect();
            MemberSpec::Trig { window, modes }
        }
        EnsembleKind::Indicators => {
            let mut lower = Vec::with_capacity(d);
            let mut upper = Vec::with_capacity(d);
            for _ in 0..d {
                let a = rng.random_range(-8..=6i32);
                let len = rng.random_range(1..=(8 - a).min(8));
                lower.push(a as f64 / 8.0);
                upper.push((a + len) as f64 / 8.0);
            }
            MemberSpec::Indicator { lower, upper }
        }
    }
}

/// `n` members drawn from a ChaCha8 stream seeded with `seed`.
pub fn gen_ensemble(seed: u64, n: usize, kind: EnsembleKind, grid: &Grid) -> Result<Ensemble> {
    if n == 0 {
        return Err(invalid("ensemble needs at least one member"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = grid.dim();
    let specs: Vec<MemberSpec> = (0..n).map(|_| draw_spec(&mut rng, kind, d)).collect();
    let members = par::map_slice(&specs, |s| s.sample(grid)).into_iter().collect::<Result<_>>()?;
    Ok(Ensemble {
        seed,
        kind,
        specs,
        members,
    })
}

impl Ensemble {
    /// Same members sampled on another grid.
    pub fn resample(&self, grid: &Grid) -> Result<Ensemble> {
        let members = par::map_slice(&self.specs, |s| s.sample(grid)).into_iter().collect::<Result<_>>()?;
        Ok(Ensemble {
            seed: self.seed,
            kind: self.kind,
            specs: self.specs.clone(),
            members,
        })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}
