//! Scenario configuration: strict JSON with unknown-key rejection.

use std::fmt;
use std::path::{Path, PathBuf};

use pucci_core::grid::{Grid, GridSpec, SpaceTimePoint};
use pucci_core::operators::{EllipticityPair, Operator, PLaplaceParams};
use serde::{Deserialize, Serialize};

use crate::fields::FieldSpec;
use crate::LabError;

/// The studies the runner knows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    Solve,
    ClassCheck,
    Decay,
    Boundary,
    Counterexample,
    PSweep,
    EllipticitySweep,
    EpsSweep,
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            ScenarioKind::Solve => "solve",
            ScenarioKind::ClassCheck => "class_check",
            ScenarioKind::Decay => "decay",
            ScenarioKind::Boundary => "boundary",
            ScenarioKind::Counterexample => "counterexample",
            ScenarioKind::PSweep => "p_sweep",
            ScenarioKind::EllipticitySweep => "ellipticity_sweep",
            ScenarioKind::EpsSweep => "eps_sweep",
        };
        f.write_str(name)
    }
}

/// Operator as written in a config; `epsilon` of the p-Laplacian defaults to `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    Heat {
        #[serde(default = "one")]
        lambda: f64,
    },
    PucciPlus {
        lambda: f64,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
    },
    PucciMinus {
        lambda: f64,
        #[serde(rename = "Lambda")]
        big_lambda: f64,
    },
    PLaplace {
        p: f64,
        #[serde(default)]
        epsilon: Option<f64>,
    },
}

impl OperatorSpec {
    pub fn build(&self, h: f64) -> Result<Operator, LabError> {
        let op = match *self {
            OperatorSpec::Heat { lambda } => Operator::Heat { lambda },
            OperatorSpec::PucciPlus { lambda, big_lambda } => {
                Operator::PucciPlus(EllipticityPair::new(lambda, big_lambda)?)
            }
            OperatorSpec::PucciMinus { lambda, big_lambda } => {
                Operator::PucciMinus(EllipticityPair::new(lambda, big_lambda)?)
            }
            OperatorSpec::PLaplace { p, epsilon } => Operator::PLaplace(PLaplaceParams::new(p, epsilon.unwrap_or(h))?),
        };
        op.validate()?;
        Ok(op)
    }
}

/// `"auto"` or an explicit count of internal steps per lattice step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Substeps {
    Count(usize),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AutoTag {
    Auto,
}

/// Affine function `a + b . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub a: f64,
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EllipticitySpec {
    pub lambda: f64,
    #[serde(rename = "Lambda")]
    pub big_lambda: f64,
}

/// Scalar and list parameters of the sweeps and the counterexample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    #[serde(default)]
    pub p_list: Vec<f64>,
    #[serde(default)]
    pub p: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub eps_schedule: Option<Vec<f64>>,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub delta_list: Vec<f64>,
}

/// Data fields. `u` is a given space-time field; when absent, studies that
/// need one solve the Dirichlet problem with `g` and `f`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    #[serde(default)]
    pub u: Option<FieldSpec>,
    #[serde(default)]
    pub f: Option<FieldSpec>,
    #[serde(default)]
    pub g: Option<FieldSpec>,
    /// Known affine part `L_g` of the boundary data on the face `x_n = 0`.
    #[serde(default)]
    pub face_affine: Option<AffineSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSpec {
    #[serde(default = "half")]
    pub eta: f64,
    /// Number of scales `K`; defaults to the deepest resolvable one.
    #[serde(default)]
    pub depth: Option<usize>,
    /// Target exponent of the coefficient bounds.
    #[serde(default = "half")]
    pub alpha: f64,
    #[serde(default = "one")]
    pub c1: f64,
    /// Explicit interior points (snapped to the nearest node).
    #[serde(default)]
    pub points: Vec<SpaceTimePoint>,
    /// Number of low-discrepancy interior points added from the seed.
    #[serde(default)]
    pub sample_points: usize,
    /// Explicit face points (half-space lattices).
    #[serde(default)]
    pub boundary_points: Vec<SpaceTimePoint>,
    #[serde(default)]
    pub boundary_samples: usize,
    /// Radius of the region `Q_r(0)` used for sampling, error norms and
    /// class checks of solved fields.
    #[serde(default = "half")]
    pub region: f64,
    #[serde(default)]
    pub ellipticity: Option<EllipticitySpec>,
    #[serde(default)]
    pub f_bound: Option<f64>,
    /// Class-membership tolerance; defaults to `10 (h + tau) (1 + max|u|)`.
    #[serde(default)]
    pub tolerance: Option<f64>,
    #[serde(default)]
    pub face_tolerance: Option<f64>,
}

impl Default for AnalysisSpec {
    fn default() -> Self {
        Self {
            eta: 0.5,
            depth: None,
            alpha: 0.5,
            c1: 1.0,
            points: Vec::new(),
            sample_points: 0,
            boundary_points: Vec::new(),
            boundary_samples: 0,
            region: 0.5,
            ellipticity: None,
            f_bound: None,
            tolerance: None,
            face_tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    /// Informative tag; the subcommand decides what runs.
    #[serde(default)]
    pub scenario: Option<ScenarioKind>,
    pub grid: GridSpec,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub analysis: AnalysisSpec,
    #[serde(default)]
    pub substeps: Option<Substeps>,
    #[serde(default)]
    pub seed: u64,
    /// Used when no output directory is given on the command line.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Also write solved fields as grid-function files.
    #[serde(default)]
    pub write_fields: bool,
    /// Directory that relative file paths resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

impl ScenarioConfig {
    /// Minimal configuration on `grid`; everything else at defaults.
    pub fn new(grid: GridSpec) -> Self {
        Self {
            scenario: None,
            grid,
            operator: None,
            params: Params::default(),
            data: DataSpec::default(),
            analysis: AnalysisSpec::default(),
            substeps: None,
            seed: 0,
            output_dir: None,
            write_fields: false,
            base_dir: PathBuf::from("."),
        }
    }

    pub fn from_json(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, LabError> {
        let mut cfg: ScenarioConfig =
            serde_json::from_str(text).map_err(|e| LabError::invalid(format!("invalid config: {e}")))?;
        cfg.base_dir = base_dir.into();
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| LabError::invalid(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::from_json(&text, base).map_err(|e| LabError::invalid(format!("{}: {e}", path.display())))
    }

    pub fn resolve_path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Checks everything that does not need a computation.
    pub fn validate(&self) -> Result<Grid, LabError> {
        let grid = Grid::new(self.grid)?;
        let a = &self.analysis;
        if !(a.eta > 0.0 && a.eta < 1.0) {
            return Err(LabError::invalid(format!("analysis.eta must lie in (0, 1), got {}", a.eta)));
        }
        if !(a.alpha > 0.0 && a.alpha <= 1.0) {
            return Err(LabError::invalid(format!("analysis.alpha must lie in (0, 1], got {}", a.alpha)));
        }
        if !(a.c1.is_finite() && a.c1 > 0.0) {
            return Err(LabError::invalid(format!("analysis.c1 must be positive, got {}", a.c1)));
        }
        if !(a.region > 0.0 && a.region <= self.grid.spatial_extent) {
            return Err(LabError::invalid(format!("analysis.region must lie in (0, R], got {}", a.region)));
        }
        for (name, v) in [("f_bound", a.f_bound), ("tolerance", a.tolerance), ("face_tolerance", a.face_tolerance)] {
            if let Some(v) = v {
                if !(v.is_finite() && v >= 0.0) {
                    return Err(LabError::invalid(format!("analysis.{name} must be >= 0, got {v}")));
                }
            }
        }
        if let Some(e) = a.ellipticity {
            EllipticityPair::new(e.lambda, e.big_lambda)?;
        }
        for p in a.points.iter().chain(&a.boundary_points) {
            if p.x.len() != grid.n_dim() {
                return Err(LabError::invalid(format!("point {:?} does not have {} coordinates", p.x, grid.n_dim())));
            }
        }
        if let Some(op) = &self.operator {
            op.build(grid.h())?;
        }
        let pr = &self.params;
        if let Some(&p) = pr.p_list.iter().find(|p| !(p.is_finite() && **p > 1.0)) {
            return Err(LabError::invalid(format!("params.p_list entries must exceed 1, got {p}")));
        }
        if let Some(p) = pr.p {
            if !(p.is_finite() && p > 1.0) {
                return Err(LabError::invalid(format!("params.p must exceed 1, got {p}")));
            }
        }
        if let Some(eps) = pr.epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(LabError::invalid(format!("params.epsilon must be positive, got {eps}")));
            }
        }
        if let Some(&d) = pr.delta_list.iter().find(|d| !(d.is_finite() && **d >= 0.0)) {
            return Err(LabError::invalid(format!("params.delta_list entries must be >= 0, got {d}")));
        }
        if let Some(d) = pr.delta {
            if !(d.is_finite() && d > 0.0) {
                return Err(LabError::invalid(format!("params.delta must be positive, got {d}")));
            }
        }
        if let Some(Substeps::Count(0)) = self.substeps {
            return Err(LabError::invalid("substeps must be >= 1 or \"auto\""));
        }
        for field in [&self.data.u, &self.data.f, &self.data.g].into_iter().flatten() {
            field.check(self)?;
        }
        if let Some(l) = &self.data.face_affine {
            if l.b.len() != grid.n_dim() {
                return Err(LabError::invalid(format!("data.face_affine.b must have {} entries", grid.n_dim())));
            }
        }
        Ok(grid)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"grid": {"n_dim": 2, "h": 0.125, "tau": 0.0078125}}"#;

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = ScenarioConfig::from_json(MINIMAL, ".").unwrap();
        assert_eq!(cfg.analysis, AnalysisSpec::default());
        assert_eq!(cfg.seed, 0);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"grid": {"n_dim": 2, "h": 0.125, "tau": 0.0078125}, "sede": 3}"#;
        let err = ScenarioConfig::from_json(text, ".").unwrap_err();
        assert!(err.to_string().contains("sede"), "{err}");
        let text = r#"{"grid": {"n_dim": 2, "h": 0.125, "tau": 0.0078125}, "analysis": {"etta": 0.5}}"#;
        assert!(ScenarioConfig::from_json(text, ".").is_err());
        let text = r#"{"grid": {"n_dim": 2, "h": 0.125, "tau": 0.0078125},
                      "operator": {"type": "heat", "lambda": 1, "mu": 2}}"#;
        assert!(ScenarioConfig::from_json(text, ".").is_err());
    }

    #[test]
    fn substeps_accept_auto_and_counts() {
        let text = r#"{"grid": {"n_dim": 1, "h": 0.125, "tau": 0.0078125}, "substeps": "auto"}"#;
        let cfg = ScenarioConfig::from_json(text, ".").unwrap();
        assert_eq!(cfg.substeps, Some(Substeps::Auto(AutoTag::Auto)));
        let text = r#"{"grid": {"n_dim": 1, "h": 0.125, "tau": 0.0078125}, "substeps": 4}"#;
        let cfg = ScenarioConfig::from_json(text, ".").unwrap();
        assert_eq!(cfg.substeps, Some(Substeps::Count(4)));
        let text = r#"{"grid": {"n_dim": 1, "h": 0.125, "tau": 0.0078125}, "substeps": 0}"#;
        let cfg = ScenarioConfig::from_json(text, ".").unwrap();
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn parameter_ranges_are_validated() {
        let mut cfg = ScenarioConfig::from_json(MINIMAL, ".").unwrap();
        cfg.params.delta_list = vec![0.0, -0.1];
        assert!(cfg.validate().unwrap_err().to_string().contains("delta_list"));
        cfg.params.delta_list.clear();
        cfg.params.p_list = vec![2.0, 1.0];
        assert!(cfg.validate().unwrap_err().to_string().contains("p_list"));
        cfg.params.p_list.clear();
        cfg.analysis.eta = 1.0;
        assert!(cfg.validate().is_err());
        cfg.analysis.eta = 0.5;
        cfg.grid.h = 0.3;
        assert_eq!(cfg.validate().unwrap_err().exit_code(), 1);
    }

    #[test]
    fn p_laplace_epsilon_defaults_to_h() {
        let spec = OperatorSpec::PLaplace { p: 2.5, epsilon: None };
        match spec.build(0.125).unwrap() {
            Operator::PLaplace(params) => assert_eq!(params.epsilon(), 0.125),
            other => panic!("unexpected {other:?}"),
        }
    }
}
