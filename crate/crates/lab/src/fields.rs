//! Named analytic fields and file-backed data.

use std::path::PathBuf;

use pucci_core::grid::{read_gridfn, Grid, GridFunction};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::LabError;

/// A space-time field `(x, t) -> value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FieldSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `a + b . x`.
    Linear {
        a: f64,
        b: Vec<f64>,
    },
    /// `|x|^2 + 2 lambda n t`, caloric for `u_t = lambda Δu`.
    HeatParaboloid {
        #[serde(default = "one")]
        lambda: f64,
    },
    /// `|x|^2 + 2 (n + p - 2) t`, a classical solution of the normalized p-Laplace flow.
    PLaplaceParaboloid {
        p: f64,
    },
    /// `x_n^2` for `x_n < 0`, `x_n^2 / (1 + delta)` for `x_n >= 0`.
    Counterexample {
        delta: f64,
    },
    /// `x_n^3 + 6 lambda x_n t`, caloric and zero on `x_n = 0`.
    CaloricCubic {
        #[serde(default = "one")]
        lambda: f64,
    },
    /// `prod cos(x_i) e^{-n lambda t}`, caloric.
    CaloricCosine {
        #[serde(default = "one")]
        lambda: f64,
    },
    XnSquared,
    /// `sin(1.3 x_1 + 0.4) cos(0.9 x_n - 0.2) + 0.3 x_1 x_n + 0.2 t`.
    Smooth,
    /// `|x_1| + 0.5 |x_n|`.
    Kinked,
    /// `x_n (1 + |x_1|^{1/2})`: zero on the face, kinked along it.
    FaceKink,
    /// A grid-function file on the configured lattice.
    File {
        path: PathBuf,
    },
}

fn one() -> f64 {
    1.0
}

impl FieldSpec {
    /// Value at `(x, t)`; `None` for file-backed data.
    pub fn eval(&self, x: &[f64], t: f64) -> Option<f64> {
        let n = x.len();
        let x1 = x[0];
        let xn = x[n - 1];
        let r2 = || x.iter().map(|v| v * v).sum::<f64>();
        let v = match self {
            FieldSpec::Zero => 0.0,
            FieldSpec::Constant { value } => *value,
            FieldSpec::Linear { a, b } => a + b.iter().zip(x).map(|(b, x)| b * x).sum::<f64>(),
            FieldSpec::HeatParaboloid { lambda } => r2() + 2.0 * lambda * n as f64 * t,
            FieldSpec::PLaplaceParaboloid { p } => r2() + 2.0 * (n as f64 + p - 2.0) * t,
            FieldSpec::Counterexample { delta } => {
                if xn < 0.0 {
                    xn * xn
                } else {
                    xn * xn / (1.0 + delta)
                }
            }
            FieldSpec::CaloricCubic { lambda } => xn * xn * xn + 6.0 * lambda * xn * t,
            FieldSpec::CaloricCosine { lambda } => {
                x.iter().map(|v| v.cos()).product::<f64>() * (-(n as f64) * lambda * t).exp()
            }
            FieldSpec::XnSquared => xn * xn,
            FieldSpec::Smooth => (1.3 * x1 + 0.4).sin() * (0.9 * xn - 0.2).cos() + 0.3 * x1 * xn + 0.2 * t,
            FieldSpec::Kinked => x1.abs() + 0.5 * xn.abs(),
            FieldSpec::FaceKink => {
                if n == 1 {
                    xn
                } else {
                    xn * (1.0 + x1.abs().sqrt())
                }
            }
            FieldSpec::File { .. } => return None,
        };
        Some(v)
    }

    /// Static checks: parameters in range, files present, dimensions consistent.
    pub fn check(&self, cfg: &ScenarioConfig) -> Result<(), LabError> {
        match self {
            FieldSpec::Linear { b, .. } if b.len() != cfg.grid.n_dim => {
                Err(LabError::invalid(format!("linear field needs {} slope entries, got {}", cfg.grid.n_dim, b.len())))
            }
            FieldSpec::PLaplaceParaboloid { p } if !(p.is_finite() && *p > 1.0) => {
                Err(LabError::invalid(format!("p_laplace_paraboloid needs p > 1, got {p}")))
            }
            FieldSpec::Counterexample { delta } if !(delta.is_finite() && *delta > -1.0) => {
                Err(LabError::invalid(format!("counterexample needs delta > -1, got {delta}")))
            }
            FieldSpec::File { path } => {
                let full = cfg.resolve_path(path);
                if full.is_file() {
                    Ok(())
                } else {
                    Err(LabError::invalid(format!("data file {} does not exist", full.display())))
                }
            }
            _ => Ok(()),
        }
    }

    /// Samples the field on `grid`, or loads it when file-backed.
    pub fn realize(&self, grid: &Grid, cfg: &ScenarioConfig) -> Result<GridFunction, LabError> {
        if let FieldSpec::File { path } = self {
            let full = cfg.resolve_path(path);
            let u = read_gridfn(&full).map_err(|e| LabError::invalid(format!("{}: {e}", full.display())))?;
            if u.grid() != grid {
                return Err(LabError::invalid(format!(
                    "{}: lattice {:?} differs from the configured {:?}",
                    full.display(),
                    u.grid().spec(),
                    grid.spec()
                )));
            }
            return Ok(u);
        }
        Ok(GridFunction::sample(grid, |x, t| self.eval(x, t).unwrap_or(f64::NAN))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use pucci_core::grid::GridSpec;

    fn second_diff(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
        (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h)
    }

    #[test]
    fn caloric_fields_satisfy_their_equations() {
        let h = 1e-3;
        let (x, t) = ([0.3, -0.2], -0.4);
        for (field, lambda) in [
            (FieldSpec::HeatParaboloid { lambda: 1.5 }, 1.5),
            (FieldSpec::CaloricCubic { lambda: 0.7 }, 0.7),
            (FieldSpec::CaloricCosine { lambda: 1.2 }, 1.2),
        ] {
            let u = |x: [f64; 2], t: f64| field.eval(&x, t).unwrap();
            let ut = (u(x, t + h) - u(x, t - h)) / (2.0 * h);
            let lap = second_diff(|s| u([s, x[1]], t), x[0], h) + second_diff(|s| u([x[0], s], t), x[1], h);
            assert!((ut - lambda * lap).abs() < 1e-5, "{field:?}: {ut} vs {}", lambda * lap);
        }
    }

    #[test]
    fn p_laplace_paraboloid_time_slope() {
        let f = FieldSpec::PLaplaceParaboloid { p: 1.8 };
        let slope = f.eval(&[0.1, 0.2], 0.0).unwrap() - f.eval(&[0.1, 0.2], -1.0).unwrap();
        assert!((slope - 2.0 * (2.0 + 1.8 - 2.0)).abs() < 1e-14);
    }

    #[test]
    fn counterexample_branches_meet_at_the_interface() {
        let f = FieldSpec::Counterexample { delta: 0.2 };
        assert_eq!(f.eval(&[0.3, 0.0], 0.0), Some(0.0));
        assert_eq!(f.eval(&[0.0, -0.5], 0.0), Some(0.25));
        assert!((f.eval(&[0.0, 0.5], 0.0).unwrap() - 0.25 / 1.2).abs() < 1e-16);
    }

    #[test]
    fn face_fields_vanish_on_the_face() {
        for f in [FieldSpec::CaloricCubic { lambda: 1.0 }, FieldSpec::FaceKink] {
            assert_eq!(f.eval(&[0.4, 0.0], -0.3), Some(0.0));
        }
    }

    #[test]
    fn file_fields_round_trip_through_realize() {
        let dir = tempfile::tempdir().unwrap();
        let grid = Grid::new(GridSpec::unit(1, 0.25, 0.125)).unwrap();
        let u = FieldSpec::Smooth.realize(&grid, &ScenarioConfig::new(*grid.spec())).unwrap();
        pucci_core::grid::write_gridfn(&u, dir.path().join("u.gf")).unwrap();
        let mut cfg = ScenarioConfig::new(*grid.spec());
        cfg.base_dir = dir.path().to_path_buf();
        let spec = FieldSpec::File { path: "u.gf".into() };
        spec.check(&cfg).unwrap();
        assert_eq!(spec.realize(&grid, &cfg).unwrap(), u);
        let other = Grid::new(GridSpec::unit(1, 0.125, 0.125)).unwrap();
        assert_eq!(spec.realize(&other, &cfg).unwrap_err().exit_code(), 1);
        let missing = FieldSpec::File { path: "nope.gf".into() };
        assert!(missing.check(&cfg).unwrap_err().to_string().contains("nope.gf"));
    }
}
