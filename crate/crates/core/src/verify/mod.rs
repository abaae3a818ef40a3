//! Run configuration, the per-theorem dispatcher and report assembly.

mod checks;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::de::{self, MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::approx::VpMethod;
use crate::ensemble::{gen_ensemble, Ensemble, EnsembleKind};
use crate::error::{Error, Result};
use crate::grid::{Grid, GridBox};
use crate::par;
use crate::report::{sort_reports, InequalityReport};
use crate::weights::Weight;

pub use checks::dispatch;

/// Every id accepted by [`dispatch`].
pub const THEOREM_IDS: [&str; 12] = [
    "suf", "suwf", "ruwf", "commute", "frac", "sduf", "dela", "jackson", "marchaud", "sandwich", "trver", "holder",
];

/// A weight written either as `"power:0.5"` or as a tagged object.
#[derive(Clone, Debug, PartialEq)]
pub struct WeightArg(pub Weight);

impl Default for WeightArg {
    fn default() -> Self {
        WeightArg(Weight::one())
    }
}

impl Serialize for WeightArg {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0.to_string())
    }
}

impl<'de> Deserialize<'de> for WeightArg {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct V;
        impl<'de> Visitor<'de> for V {
            type Value = WeightArg;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a weight string like \"power:0.5\" or a weight object")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<WeightArg, E> {
                Weight::from_str(v).map(WeightArg).map_err(E::custom)
            }
            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<WeightArg, A::Error> {
                Weight::deserialize(de::value::MapAccessDeserializer::new(map)).map(WeightArg)
            }
        }
        d.deserialize_any(V)
    }
}

fn default_d() -> usize {
    1
}
fn default_half_width() -> f64 {
    4.0
}
fn default_n() -> usize {
    2048
}
fn default_members() -> usize {
    8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default = "default_d")]
    pub d: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
    /// Points per axis.
    #[serde(default = "default_n")]
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            d: default_d(),
            half_width: default_half_width(),
            n: default_n(),
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid> {
        Grid::new(GridBox::centered_cube(self.d, self.half_width)?, vec![self.n; self.d])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_members")]
    pub n: usize,
    #[serde(default)]
    pub kind: EnsembleKind,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            n: default_members(),
            kind: EnsembleKind::default(),
        }
    }
}

/// Optional knobs of a single check; each check documents its defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ps: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightArg>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub deltas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalizer: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<VpMethod>,
    /// Half width of a dedicated grid (dela).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub half_width: Option<f64>,
    /// Points per axis of a dedicated grid (dela).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u_per_axis: Option<usize>,
    /// Depth of the dyadic `A_p` estimate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSpec {
    pub id: String,
    #[serde(default)]
    pub params: CheckParams,
}

impl CheckSpec {
    pub fn new(id: &str) -> Self {
        Self {
            id: id.to_string(),
            params: CheckParams::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv_dir: Option<PathBuf>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub grid: GridSpec,
    #[serde(default)]
    pub weight: WeightArg,
    #[serde(default)]
    pub ensemble: EnsembleSpec,
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Catalog and id checks that run before any computation.
    pub fn validate(&self) -> Result<()> {
        let grid = self.grid.build()?;
        self.weight.0.validate(grid.dim())?;
        if self.ensemble.n == 0 {
            return Err(Error::InvalidParameter("ensemble.n must be at least 1".into()));
        }
        for c in &self.checks {
            if !THEOREM_IDS.contains(&c.id.as_str()) {
                return Err(Error::UnknownTheorem(c.id.clone()));
            }
            if let Some(w) = &c.params.weight {
                w.0.validate(grid.dim())?;
            }
        }
        Ok(())
    }

    /// Every field spelled out.
    pub fn normalized(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// CSV plot data produced by a check.
#[derive(Clone, Debug, PartialEq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CheckOutput {
    pub reports: Vec<InequalityReport>,
    pub artifacts: Vec<Artifact>,
}

/// Shared inputs of one run.
#[derive(Clone, Debug)]
pub struct Context {
    pub grid: Grid,
    pub weight: Weight,
    pub ensemble: Ensemble,
}

impl Context {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let grid = cfg.grid.build()?;
        let ensemble = gen_ensemble(cfg.ensemble.seed, cfg.ensemble.n, cfg.ensemble.kind, &grid)?;
        Ok(Self {
            grid,
            weight: cfg.weight.0.clone(),
            ensemble,
        })
    }
}

/// Runs every check; reports come back sorted by theorem id, then params.
pub fn run(cfg: &RunConfig) -> Result<CheckOutput> {
    cfg.validate()?;
    let ctx = Context::new(cfg)?;
    let outs = par::map_slice(&cfg.checks, |c| {
        dispatch(&c.id, &c.params, &ctx).map_err(|e| Error::Check {
            id: c.id.clone(),
            source: Box::new(e),
        })
    });
    let mut all = CheckOutput::default();
    for o in outs {
        let o = o?;
        all.reports.extend(o.reports);
        all.artifacts.extend(o.artifacts);
    }
    sort_reports(&mut all.reports);
    all.artifacts.sort_by(|a, b| a.name.cmp(&b.name));
    Ok(all)
}
