//! Weight catalog and Muckenhoupt characteristics.

mod muckenhoupt;
pub(crate) mod quad;
pub(crate) mod singular;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub use muckenhoupt::{
    ainfty_constant, ap_constant, log_a0, maximal_function, select_q, ApEstimate, CubeFamily,
    QSelection, DEFAULT_DIVERGENCE_FACTOR,
};

/// Points closer than this to a power-weight singularity are evaluated at
/// this radius instead.
pub const REGULARIZATION_RADIUS: f64 = 1e-8;

/// A weight from the catalog.
///
/// `Step` takes `levels[j]` on the `j`-th interval of the first coordinate
/// cut at `breaks` (so `levels.len() == breaks.len() + 1`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Weight {
    Constant { c: f64 },
    Power { alpha: f64 },
    ProductPower { alphas: Vec<f64> },
    Step { breaks: Vec<f64>, levels: Vec<f64> },
}

impl Default for Weight {
    fn default() -> Self {
        Weight::Constant { c: 1.0 }
    }
}

impl Weight {
    pub fn one() -> Self {
        Weight::Constant { c: 1.0 }
    }

    pub fn power(alpha: f64) -> Self {
        Weight::Power { alpha }
    }

    /// Checks parameters and local integrability in dimension `d`.
    pub fn validate(&self, d: usize) -> Result<()> {
        match self {
            Weight::Constant { c } => {
                if !(c.is_finite() && *c > 0.0) {
                    return Err(invalid(format!("constant weight needs c > 0, got {c}")));
                }
            }
            Weight::Power { alpha } => {
                if !alpha.is_finite() || *alpha <= -(d as f64) {
                    return Err(invalid(format!(
                        "power weight needs alpha > -{d}, got {alpha}"
                    )));
                }
            }
            Weight::ProductPower { alphas } => {
                if alphas.len() != d {
                    return Err(invalid(format!(
                        "product weight needs {d} exponents, got {}",
                        alphas.len()
                    )));
                }
                if alphas.iter().any(|a| !a.is_finite() || *a <= -1.0) {
                    return Err(invalid("product weight exponents must exceed -1"));
                }
            }
            Weight::Step { breaks, levels } => {
                if levels.len() != breaks.len() + 1 {
                    return Err(invalid("step weight needs one more level than breaks"));
                }
                if breaks.windows(2).any(|w| w[0] >= w[1]) || breaks.iter().any(|b| !b.is_finite()) {
                    return Err(invalid("step breaks must be finite and increasing"));
                }
                if levels.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
                    return Err(invalid("step levels must be positive"));
                }
            }
        }
        Ok(())
    }

    /// `ω(x)`. Power singularities are evaluated at [`REGULARIZATION_RADIUS`].
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Weight::Constant { c } => *c,
            Weight::Power { alpha } => {
                if *alpha == 0.0 {
                    return 1.0;
                }
                let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                r.max(REGULARIZATION_RADIUS).powf(*alpha)
            }
            Weight::ProductPower { alphas } => alphas
                .iter()
                .zip(x)
                .map(|(&a, &xi)| {
                    if a == 0.0 {
                        1.0
                    } else {
                        xi.abs().max(REGULARIZATION_RADIUS).powf(a)
                    }
                })
                .product(),
            Weight::Step { breaks, levels } => {
                let j = breaks.partition_point(|&b| b <= x[0]);
                levels[j]
            }
        }
    }

    /// `ω(x)` without regularization; used by quadrature, which never lands on 0.
    pub(crate) fn eval_raw(&self, x: &[f64]) -> f64 {
        match self {
            Weight::Power { alpha } if *alpha != 0.0 => {
                x.iter().map(|v| v * v).sum::<f64>().powf(alpha / 2.0)
            }
            Weight::ProductPower { alphas } => alphas
                .iter()
                .zip(x)
                .map(|(&a, &xi)| if a == 0.0 { 1.0 } else { xi.abs().powf(a) })
                .product(),
            _ => self.eval(x),
        }
    }

    /// `ω^e`, closed under the catalog.
    pub fn powf(&self, e: f64) -> Weight {
        match self {
            Weight::Constant { c } => Weight::Constant { c: c.powf(e) },
            Weight::Power { alpha } => Weight::Power { alpha: alpha * e },
            Weight::ProductPower { alphas } => Weight::ProductPower {
                alphas: alphas.iter().map(|a| a * e).collect(),
            },
            Weight::Step { breaks, levels } => Weight::Step {
                breaks: breaks.clone(),
                levels: levels.iter().map(|l| l.powf(e)).collect(),
            },
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            Weight::Constant { .. } => true,
            Weight::Power { alpha } => *alpha == 0.0,
            Weight::ProductPower { alphas } => alphas.iter().all(|a| *a == 0.0),
            Weight::Step { levels, .. } => levels.windows(2).all(|w| w[0] == w[1]),
        }
    }

    /// True when `ω(t) = Π_a ω_a(t_a)`.
    pub fn is_separable(&self, d: usize) -> bool {
        match self {
            Weight::Power { alpha } => d == 1 || *alpha == 0.0,
            _ => true,
        }
    }

    /// Factor of a separable weight along `axis`.
    pub(crate) fn axis_factor(&self, axis: usize, t: f64) -> f64 {
        match self {
            Weight::Constant { c } => {
                if axis == 0 {
                    *c
                } else {
                    1.0
                }
            }
            Weight::Power { .. } => {
                if axis == 0 {
                    self.eval_raw(&[t])
                } else {
                    1.0
                }
            }
            Weight::ProductPower { alphas } => {
                if alphas[axis] == 0.0 {
                    1.0
                } else {
                    t.abs().powf(alphas[axis])
                }
            }
            Weight::Step { .. } => {
                if axis == 0 {
                    self.eval(&[t])
                } else {
                    1.0
                }
            }
        }
    }

    /// True when the weight is singular (non-smooth and unbounded or
    /// vanishing) at the origin.
    pub(crate) fn singular_at_origin(&self) -> bool {
        match self {
            Weight::Power { alpha } => *alpha != 0.0,
            Weight::ProductPower { alphas } => alphas.iter().any(|a| *a != 0.0),
            _ => false,
        }
    }

    /// Break points of the first coordinate.
    pub(crate) fn breaks(&self) -> &[f64] {
        match self {
            Weight::Step { breaks, .. } => breaks,
            _ => &[],
        }
    }

    /// Whether the power-weight range says `ω ∈ A_p` (`p ≥ 1`) in dimension `d`.
    /// `None` when the catalog entry has no closed-form answer.
    pub fn in_ap_theory(&self, d: usize, p: f64) -> Option<bool> {
        let df = d as f64;
        match self {
            Weight::Constant { .. } | Weight::Step { .. } => Some(true),
            Weight::Power { alpha } => Some(if p == 1.0 {
                -df < *alpha && *alpha <= 0.0
            } else {
                -df < *alpha && *alpha < df * (p - 1.0)
            }),
            Weight::ProductPower { alphas } => Some(alphas.iter().all(|&a| {
                if p == 1.0 {
                    -1.0 < a && a <= 0.0
                } else {
                    -1.0 < a && a < p - 1.0
                }
            })),
        }
    }
}

/// `ω' = ω^{1-p'}`.
pub fn dual_weight(w: &Weight, p: f64) -> Result<Weight> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponent(p));
    }
    let pp = p / (p - 1.0);
    Ok(w.powf(1.0 - pp))
}

/// `eval_weight` as a free function.
pub fn eval_weight(w: &Weight, x: &[f64]) -> f64 {
    w.eval(x)
}

impl fmt::Display for Weight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn join(v: &[f64]) -> String {
            v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",")
        }
        match self {
            Weight::Constant { c } => write!(f, "const:{c:?}"),
            Weight::Power { alpha } => write!(f, "power:{alpha:?}"),
            Weight::ProductPower { alphas } => write!(f, "product:{}", join(alphas)),
            Weight::Step { breaks, levels } => write!(f, "step:{};{}", join(breaks), join(levels)),
        }
    }
}

impl FromStr for Weight {
    type Err = Error;

    /// Parses `const:c`, `power:a`, `product:a,b`, `step:b1,b2;l0,l1,l2`.
    fn from_str(s: &str) -> Result<Self> {
        fn nums(s: &str) -> Result<Vec<f64>> {
            s.split(',')
                .map(|t| {
                    t.trim()
                        .parse::<f64>()
                        .map_err(|_| invalid(format!("bad number `{t}` in weight")))
                })
                .collect()
        }
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| invalid(format!("weight `{s}` must look like kind:params")))?;
        match kind {
            "const" | "constant" => Ok(Weight::Constant { c: one(nums(rest)?)? }),
            "power" => Ok(Weight::Power { alpha: one(nums(rest)?)? }),
            "product" => Ok(Weight::ProductPower { alphas: nums(rest)? }),
            "step" => {
                let (b, l) = rest
                    .split_once(';')
                    .ok_or_else(|| invalid("step weight needs breaks;levels"))?;
                Ok(Weight::Step {
                    breaks: nums(b)?,
                    levels: nums(l)?,
                })
            }
            other => Err(invalid(format!("unknown weight kind `{other}`"))),
        }
    }
}

fn one(v: Vec<f64>) -> Result<f64> {
    match v.as_slice() {
        [x] => Ok(*x),
        _ => Err(invalid("expected a single weight parameter")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn eval_catalog() {
        assert_eq!(Weight::one().eval(&[3.0]), 1.0);
        assert_relative_eq!(Weight::power(1.0).eval(&[2.0]), 2.0);
        assert_relative_eq!(Weight::power(1.0).eval(&[3.0, 4.0]), 5.0);
        assert_relative_eq!(Weight::power(-0.5).eval(&[0.0]), 1e4, max_relative = 1e-12);
        let s = Weight::Step {
            breaks: vec![0.0, 1.0],
            levels: vec![1.0, 2.0, 3.0],
        };
        assert_eq!(s.eval(&[-1.0]), 1.0);
        assert_eq!(s.eval(&[0.5]), 2.0);
        assert_eq!(s.eval(&[1.5, 9.0]), 3.0);
        let pp = Weight::ProductPower { alphas: vec![1.0, 2.0] };
        assert_relative_eq!(pp.eval(&[2.0, -3.0]), 18.0);
    }

    #[test]
    fn dual_of_catalog() {
        assert_eq!(dual_weight(&Weight::one(), 2.0).unwrap(), Weight::one());
        assert_eq!(dual_weight(&Weight::power(1.0), 2.0).unwrap(), Weight::power(-1.0));
        assert!(matches!(dual_weight(&Weight::one(), 1.0), Err(Error::InvalidExponent(_))));
    }

    #[test]
    fn dual_preserves_power_range() {
        for d in 1..=3 {
            for &p in &[1.5, 2.0, 3.0, 5.0] {
                let df = d as f64;
                let pp = p / (p - 1.0);
                for i in 1..40 {
                    let alpha = -df + i as f64 * (df * p) / 40.0;
                    if alpha >= df * (p - 1.0) {
                        continue;
                    }
                    let w = Weight::power(alpha);
                    assert_eq!(w.in_ap_theory(d, p), Some(true));
                    let dual = dual_weight(&w, p).unwrap();
                    assert_eq!(dual.in_ap_theory(d, pp), Some(true), "d={d} p={p} a={alpha}");
                }
            }
        }
    }

    #[test]
    fn parse_and_display_round_trip() {
        for s in ["const:1.0", "power:0.5", "product:0.5,-0.25", "step:0.0,1.0;1.0,2.0,3.0"] {
            let w: Weight = s.parse().unwrap();
            assert_eq!(w.to_string(), s);
            assert_eq!(w.to_string().parse::<Weight>().unwrap(), w);
        }
        assert!("power".parse::<Weight>().is_err());
        assert!("sinc:1".parse::<Weight>().is_err());
    }

    #[test]
    fn json_form() {
        let w: Weight = serde_json::from_str(r#"{"kind":"power","alpha":0.5}"#).unwrap();
        assert_eq!(w, Weight::power(0.5));
        assert!(serde_json::from_str::<Weight>(r#"{"kind":"power","alpha":0.5,"x":1}"#).is_err());
    }

    #[test]
    fn validation() {
        assert!(Weight::power(-1.0).validate(1).is_err());
        assert!(Weight::power(-1.5).validate(2).is_ok());
        assert!(Weight::Constant { c: 0.0 }.validate(1).is_err());
        assert!(Weight::ProductPower { alphas: vec![0.5] }.validate(2).is_err());
    }
}
