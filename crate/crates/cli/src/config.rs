//! Run configuration: a JSON document whose keys are checked strictly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crnsynth::crn::{parse_network, NetworkSpec, ReactionNetwork};
use crnsynth::models::{HyperbolicUnfolding, McKeithanSystem, SemiNormalForm, Tutorial};

use crate::CliError;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// `tutorial`, `seminf`, `mckeithan`, `unfolding` or a network file.
    pub model: String,
    pub parameters: BTreeMap<String, Value>,
    /// Target level for the McKeithan model; required there.
    pub d: Option<f64>,
    pub grid: Option<GridSpec>,
    pub horizon: f64,
    pub tolerances: Tolerances,
    pub out: Option<String>,
    pub seed: u64,
    /// Random probe points tagged by `strata`.
    pub probes: usize,
    pub order: u16,
    pub anchors: Vec<[f64; 3]>,
    /// `v` samples `(lo, hi, n)` for the McKeithan closed forms.
    pub v_range: Option<(f64, f64, usize)>,
    pub simulation: Option<SimulationSpec>,
    pub oracle: OracleSpec,
    pub series: SeriesSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: "tutorial".into(),
            parameters: BTreeMap::new(),
            d: None,
            grid: None,
            horizon: 0.5,
            tolerances: Tolerances::default(),
            out: None,
            seed: 0,
            probes: 0,
            order: 3,
            anchors: Vec::new(),
            v_range: None,
            simulation: None,
            oracle: OracleSpec::default(),
            series: SeriesSpec::default(),
        }
    }
}

/// Target-plane grid: ranges of the two in-plane coordinates and node counts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub u: [f64; 2],
    pub w: [f64; 2],
    pub n: [usize; 2],
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub locus: f64,
    pub saturation: f64,
    pub ode: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            locus: 1e-9,
            saturation: 1e-7,
            ode: 1e-10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationSpec {
    pub c0: Vec<f64>,
    pub t_end: f64,
    pub samples: usize,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

fn default_temperature() -> f64 {
    300.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OracleSpec {
    pub dt: f64,
    pub substeps: usize,
    pub max_arcs: usize,
    /// Backward time from the anchor to the oracle's start point.
    pub lead: f64,
}

impl Default for OracleSpec {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            substeps: 2,
            max_arcs: 3,
            lead: 0.1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SeriesSpec {
    /// `s0` samples `(lo, hi, n)` for the crossing column.
    pub s0: (f64, f64, usize),
    /// Target point `(w0, s0)` and backward times for the residual table.
    pub probe: [f64; 2],
    pub times: Vec<f64>,
}

impl Default for SeriesSpec {
    fn default() -> Self {
        Self {
            s0: (-0.5, 0.5, 41),
            probe: [0.01, 0.05],
            times: vec![-0.01, -0.02, -0.05],
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TutorialParams {
    #[serde(default = "one")]
    a: f64,
    #[serde(default = "one")]
    c: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SeminfParams {
    a: f64,
    b: f64,
    c: f64,
    us0: f64,
    usx: f64,
    usy: f64,
    alpha: [f64; 3],
}

impl Default for SeminfParams {
    fn default() -> Self {
        let s = SemiNormalForm::default();
        Self { a: s.a, b: s.b, c: s.c, us0: s.us0, usx: s.usx, usy: s.usy, alpha: s.alpha }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct McKeithanParamsIn {
    alpha: [f64; 3],
    beta: [f64; 3],
    delta: [f64; 2],
    /// Physical control for the fixed-`v` network.
    #[serde(default = "one")]
    v: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UnfoldingParams {
    #[serde(default = "minus_one")]
    a: f64,
    #[serde(default = "half")]
    us0: f64,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn half() -> f64 {
    0.5
}

/// Resolved model.
#[derive(Clone, Debug)]
pub enum Model {
    Tutorial(Tutorial),
    Seminf(SemiNormalForm),
    McKeithan { sys: McKeithanSystem, v: f64 },
    Unfolding(HyperbolicUnfolding),
    Network(ReactionNetwork),
}

fn params<T: DeserializeOwned>(map: &BTreeMap<String, Value>) -> Result<T, CliError> {
    let v = Value::Object(map.clone().into_iter().collect());
    serde_json::from_value(v).map_err(|e| CliError::Config(format!("parameters: {e}")))
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let t = &self.tolerances;
        if !(t.locus > 0.0 && t.saturation > 0.0 && t.ode > 0.0) {
            return Err(CliError::Config("tolerances must be positive".into()));
        }
        if let Some(g) = &self.grid {
            if g.n[0] < 2 || g.n[1] < 2 || g.u[0] == g.u[1] || g.w[0] == g.w[1] {
                return Err(CliError::Config("grid needs at least 2 nodes per axis and nonempty ranges".into()));
            }
        }
        if !(self.horizon > 0.0) {
            return Err(CliError::Config("horizon must be positive".into()));
        }
        if self.order == 0 {
            return Err(CliError::Config("order must be at least 1".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<Model, CliError> {
        let p = &self.parameters;
        match self.model.as_str() {
            "tutorial" => {
                let t: TutorialParams = params(p)?;
                Ok(Model::Tutorial(Tutorial::new(t.a, t.c)?))
            }
            "seminf" => {
                let s: SeminfParams = params(p)?;
                Ok(Model::Seminf(SemiNormalForm {
                    a: s.a,
                    b: s.b,
                    c: s.c,
                    us0: s.us0,
                    usx: s.usx,
                    usy: s.usy,
                    alpha: s.alpha,
                }))
            }
            "mckeithan" => {
                let m: McKeithanParamsIn = params(p)?;
                let d = self.d.ok_or_else(|| CliError::Config("mckeithan needs the target level d".into()))?;
                Ok(Model::McKeithan { sys: McKeithanSystem::new(m.alpha, m.beta, m.delta, d)?, v: m.v })
            }
            "unfolding" => {
                let u: UnfoldingParams = params(p)?;
                Ok(Model::Unfolding(HyperbolicUnfolding::new(u.a, u.us0)?))
            }
            path => {
                if !p.is_empty() {
                    return Err(CliError::Config("parameters are not used with a network file".into()));
                }
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("model {path}: not a builtin model and not readable: {e}")))?;
                match parse_network(&text)? {
                    NetworkSpec::Network(n) => Ok(Model::Network(n)),
                    NetworkSpec::McKeithan { params, d } => Ok(Model::McKeithan {
                        sys: McKeithanSystem::new(params.alpha, params.beta, params.delta, self.d.unwrap_or(d))?,
                        v: 1.0,
                    }),
                }
            }
        }
    }
}
