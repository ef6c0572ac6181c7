//! Run configuration: a flat TOML file with dotted keys mirroring [`Scenario`].
//!
//! ```toml
//! n = 3
//! h = 0.01
//! duration = 100.0
//! x0 = [1.0, 0.0, 3.0]
//! a_true = [0.33, 0.66, 0.99]
//! trajectory.kind = "circle"
//! trajectory.speed = 0.5
//! trajectory.omega = 0.5
//! gains.k = 0.5
//! gains.k_star = 5.0
//! ```
//!
//! Omitted keys take the circular-experiment defaults. Unknown keys are rejected.

use std::path::Path;

use bearing_core::linalg::DEFAULT_DIRECTION_EPS;
use bearing_core::{
    circle_scenario, Gains, Matrix, NoiseKind, NoiseSpec, ObserverMode, Scenario, Trajectory,
    Vector,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TrajectoryConfig {
    Circle { speed: f64, omega: f64 },
    Constant { velocity: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GainsConfig {
    pub k: f64,
    pub k_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub kind: NoiseKind,
    #[serde(default)]
    pub half_width: f64,
    #[serde(default)]
    pub stream: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub json: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    pub pe_check: bool,
    pub bounds: bool,
    /// excitation window (s)
    pub delta: f64,
    pub epsilon: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            pe_check: false,
            bounds: false,
            delta: 4.0 * std::f64::consts::PI,
            epsilon: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verbosity {
    Quiet,
    #[default]
    Summary,
    Full,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReportConfig {
    pub verbosity: Verbosity,
}

/// The scenario half of a config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n: usize,
    pub h: f64,
    pub duration: f64,
    pub seed: u64,
    pub mode: ObserverMode,
    pub x0: Vec<f64>,
    pub a_true: Vec<f64>,
    pub x_hat_1_0: Vec<f64>,
    pub z_hat_star_0: Vec<f64>,
    /// rows
    pub m0: Vec<Vec<f64>>,
    pub trajectory: TrajectoryConfig,
    pub gains: GainsConfig,
    pub noise: NoiseConfig,
}

/// A parsed config file. Read it with [`RunConfig::parse`], which applies defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    #[serde(flatten)]
    pub scenario: ScenarioConfig,
    pub output: OutputConfig,
    pub analysis: AnalysisConfig,
    pub report: ReportConfig,
}

/// Same layout with every scenario key optional; filled from the defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialConfig {
    n: Option<usize>,
    h: Option<f64>,
    duration: Option<f64>,
    seed: Option<u64>,
    mode: Option<ObserverMode>,
    x0: Option<Vec<f64>>,
    a_true: Option<Vec<f64>>,
    x_hat_1_0: Option<Vec<f64>>,
    z_hat_star_0: Option<Vec<f64>>,
    m0: Option<Vec<Vec<f64>>>,
    trajectory: Option<TrajectoryConfig>,
    gains: Option<PartialGains>,
    noise: Option<NoiseConfig>,
    #[serde(default)]
    output: OutputConfig,
    #[serde(default)]
    analysis: AnalysisConfig,
    #[serde(default)]
    report: ReportConfig,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialGains {
    k: Option<f64>,
    k_star: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_scenario(s: &Scenario<f64>) -> Self {
        Self {
            n: s.n,
            h: s.h,
            duration: s.duration,
            seed: s.seed,
            mode: s.mode,
            x0: s.x0.to_f64_vec(),
            a_true: s.a_true.to_f64_vec(),
            x_hat_1_0: s.x_hat_1_0.to_f64_vec(),
            z_hat_star_0: s.z_hat_star_0.to_f64_vec(),
            m0: s.m0.to_rows_f64(),
            trajectory: match &s.trajectory {
                Trajectory::Circle { speed, omega } => TrajectoryConfig::Circle {
                    speed: *speed,
                    omega: *omega,
                },
                Trajectory::Constant { velocity } => TrajectoryConfig::Constant {
                    velocity: velocity.to_f64_vec(),
                },
            },
            gains: GainsConfig {
                k: s.gains.k,
                k_star: s.gains.k_star,
            },
            noise: NoiseConfig {
                kind: s.noise.kind,
                half_width: s.noise.half_width,
                stream: s.noise.stream,
            },
        }
    }

    /// Validates every field and builds the scenario.
    pub fn to_scenario(&self) -> Result<Scenario<f64>, CliError> {
        let n = self.n;
        if n < 2 {
            return Err(field("n", format!("must be at least 2, got {n}")));
        }
        let vector = |name: &'static str, v: &[f64]| -> Result<Vector<f64>, CliError> {
            if v.len() != n {
                return Err(field(name, format!("needs {n} entries, got {}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(field(name, "entries must be finite"));
            }
            Ok(Vector::from_slice(v))
        };
        let x0 = vector("x0", &self.x0)?;
        if x0.norm() <= DEFAULT_DIRECTION_EPS {
            return Err(field(
                "x0",
                format!(
                    "degenerate direction: |x0| = {:e} is at or below {DEFAULT_DIRECTION_EPS:e}",
                    x0.norm()
                ),
            ));
        }
        let a_true = vector("a_true", &self.a_true)?;
        let x_hat_1_0 = vector("x_hat_1_0", &self.x_hat_1_0)?;
        let z_hat_star_0 = vector("z_hat_star_0", &self.z_hat_star_0)?;

        if self.m0.len() != n || self.m0.iter().any(|r| r.len() != n) {
            return Err(field("m0", format!("must be {n} rows of {n} entries")));
        }
        let m0 = Matrix::from_rows(&self.m0).map_err(|e| field("m0", e.to_string()))?;
        if !m0.is_finite() {
            return Err(field("m0", "entries must be finite"));
        }
        if !m0.is_symmetric(1e-12 * (1.0 + m0.max_abs())) {
            return Err(field("m0", "must be symmetric"));
        }
        if m0.symmetric_eigenvalues()[0] <= 0.0 {
            return Err(field("m0", "must be positive definite"));
        }

        for (name, g) in [
            ("gains.k", self.gains.k),
            ("gains.k_star", self.gains.k_star),
        ] {
            if !(g > 0.0 && g.is_finite()) {
                return Err(field(name, format!("must be positive and finite, got {g}")));
            }
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(field(
                "h",
                format!("must be positive and finite, got {}", self.h),
            ));
        }
        if !(self.duration.is_finite() && self.duration >= 10.0 * self.h) {
            return Err(field(
                "duration",
                format!(
                    "must be at least 10 steps ({} s), got {}",
                    10.0 * self.h,
                    self.duration
                ),
            ));
        }

        let trajectory = match &self.trajectory {
            TrajectoryConfig::Circle { speed, omega } => {
                if !speed.is_finite() {
                    return Err(field("trajectory.speed", "must be finite"));
                }
                if !omega.is_finite() {
                    return Err(field("trajectory.omega", "must be finite"));
                }
                Trajectory::Circle {
                    speed: *speed,
                    omega: *omega,
                }
            }
            TrajectoryConfig::Constant { velocity } => Trajectory::Constant {
                velocity: vector("trajectory.velocity", velocity)?,
            },
        };

        let hw = self.noise.half_width;
        if !(hw >= 0.0 && hw.is_finite()) {
            return Err(field(
                "noise.half_width",
                format!("must be finite and non-negative, got {hw}"),
            ));
        }

        let scenario = Scenario {
            n,
            trajectory,
            a_true,
            x0,
            gains: Gains {
                k: self.gains.k,
                k_star: self.gains.k_star,
            },
            mode: self.mode,
            m0,
            x_hat_1_0,
            z_hat_star_0,
            h: self.h,
            duration: self.duration,
            noise: NoiseSpec {
                kind: self.noise.kind,
                half_width: hw,
                stream: self.noise.stream,
            },
            seed: self.seed,
        };
        scenario
            .validate()
            .map_err(|e| CliError::Validation(e.to_string()))?;
        Ok(scenario)
    }
}

fn field(name: &str, msg: impl std::fmt::Display) -> CliError {
    CliError::Validation(format!("{name}: {msg}"))
}

impl RunConfig {
    pub fn from_scenario(s: &Scenario<f64>) -> Self {
        Self {
            scenario: ScenarioConfig::from_scenario(s),
            output: OutputConfig::default(),
            analysis: AnalysisConfig::default(),
            report: ReportConfig::default(),
        }
    }

    /// Parses config text; missing scenario keys default to the circular experiment.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let p: PartialConfig =
            toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))?;
        let d = ScenarioConfig::from_scenario(&circle_scenario());
        let gains = p.gains.unwrap_or_default();
        let n = p.n.unwrap_or(d.n);
        let sized = |v: Option<Vec<f64>>, dflt: Vec<f64>| {
            v.unwrap_or(if n == d.n { dflt } else { vec![0.0; n] })
        };
        let m0 =
            p.m0.unwrap_or_else(|| Matrix::<f64>::identity(n).to_rows_f64());
        Ok(Self {
            scenario: ScenarioConfig {
                n,
                h: p.h.unwrap_or(d.h),
                duration: p.duration.unwrap_or(d.duration),
                seed: p.seed.unwrap_or(d.seed),
                mode: p.mode.unwrap_or(d.mode),
                x0: sized(p.x0, d.x0),
                a_true: sized(p.a_true, d.a_true),
                x_hat_1_0: sized(p.x_hat_1_0, d.x_hat_1_0),
                z_hat_star_0: sized(p.z_hat_star_0, d.z_hat_star_0),
                m0,
                trajectory: p.trajectory.unwrap_or(d.trajectory),
                gains: GainsConfig {
                    k: gains.k.unwrap_or(d.gains.k),
                    k_star: gains.k_star.unwrap_or(d.gains.k_star),
                },
                noise: p.noise.unwrap_or(d.noise),
            },
            output: p.output,
            analysis: p.analysis,
            report: p.report,
        })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Validation(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Validation(msg) => CliError::Validation(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// Writes every field, defaults included.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_circle() {
        let cfg = RunConfig::parse("").unwrap();
        assert_eq!(cfg.scenario.to_scenario().unwrap(), circle_scenario());
    }

    #[test]
    fn dotted_keys_and_sections() {
        let cfg = RunConfig::parse(
            "gains.k = 0.7\nnoise.kind = \"uniform_position\"\nnoise.half_width = 0.5\n",
        )
        .unwrap();
        assert_eq!(cfg.scenario.gains.k, 0.7);
        assert_eq!(cfg.scenario.gains.k_star, 5.0);
        assert_eq!(cfg.scenario.noise.kind, NoiseKind::UniformPosition);
    }

    #[test]
    fn unknown_keys_rejected() {
        for text in [
            "gain.k = 1.0",
            "gains.kk = 1.0",
            "foo = 1",
            "analysis.delt = 3.0",
        ] {
            assert!(RunConfig::parse(text).is_err(), "{text}");
        }
    }

    #[test]
    fn validation_names_field() {
        let err = RunConfig::parse("gains.k = -1.0")
            .unwrap()
            .scenario
            .to_scenario()
            .unwrap_err();
        assert!(err.to_string().contains("gains.k"), "{err}");
        let err = RunConfig::parse("x0 = [0.0, 0.0, 0.0]")
            .unwrap()
            .scenario
            .to_scenario()
            .unwrap_err();
        assert!(
            err.to_string().contains("x0") && err.to_string().contains("degenerate"),
            "{err}"
        );
        let err = RunConfig::parse("m0 = [[1.0, 2.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]")
            .unwrap()
            .scenario
            .to_scenario()
            .unwrap_err();
        assert!(err.to_string().contains("m0"), "{err}");
    }

    #[test]
    fn other_dimension_defaults() {
        let cfg = RunConfig::parse("n = 2\nx0 = [1.0, 2.0]\ntrajectory.kind = \"circle\"\ntrajectory.speed = 1.0\ntrajectory.omega = 1.0\n")
            .unwrap();
        let s = cfg.scenario.to_scenario().unwrap();
        assert_eq!(s.m0, Matrix::identity(2));
        assert_eq!(s.a_true.dim(), 2);
    }
}
