//! JSON scenario files: schema, parsing with JSON-path error reporting, and
//! validation into ready-to-run objects.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::comparison::{AffinePart, ComparisonForm, ComparisonSystem, OrderMode, Region};
use crate::cone::PolyhedralCone;
use crate::dynamics::{DynamicalSystem, DynamicsError, IntegratorConfig, JacobianMode};
use crate::sampling::SamplingConfig;
use crate::vnorm::GainMatrix;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub system: SystemSpec,
    /// Row-major `A`; the identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparison: Option<ComparisonSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub ordering: OrderingSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Vec<String>>,
    #[serde(default)]
    pub qm: QmSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<OutputSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub rhs: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default)]
    pub jacobian: JacobianMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormSpec {
    #[default]
    U,
    UAndX,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComparisonSpec {
    pub rhs: Vec<String>,
    #[serde(default)]
    pub form: FormSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<AffineSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineSpec {
    pub matrix: Vec<Vec<f64>>,
    pub offset: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x0: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OrderingSpec {
    #[default]
    Componentwise,
    Cone {
        g: Vec<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QmSpec {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_bound")]
    pub bound: f64,
    /// State fed to a map of the form `φ(t, u, x)`; `initial.x0` if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frozen_state: Option<Vec<f64>>,
}

fn default_samples() -> usize {
    SamplingConfig::default().samples
}

fn default_bound() -> f64 {
    SamplingConfig::default().bound
}

impl Default for QmSpec {
    fn default() -> Self {
        QmSpec {
            samples: default_samples(),
            bound: default_bound(),
            frozen_state: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
}

/// A schema or consistency problem, located by a JSON path such as
/// `$.initial.u0[1]`.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(path: impl Into<String>, message: impl fmt::Display) -> Self {
        ConfigError {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let inner = e.path().to_string();
            let path = if inner == "." {
                "$".to_string()
            } else {
                format!("$.{inner}")
            };
            ConfigError::new(path, e.into_inner())
        })
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::new("$", format!("cannot read {}: {e}", path.display())))?;
        Scenario::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises")
    }

    /// Validates every part of the scenario and builds the runtime objects.
    pub fn prepare(&self) -> Result<Prepared, ConfigError> {
        let n = self.system.n.unwrap_or(self.system.rhs.len());
        if let Some(declared) = self.system.n {
            if declared != self.system.rhs.len() {
                return Err(ConfigError::new(
                    "$.system.n",
                    format!(
                        "n = {declared} but {} rhs entries given",
                        self.system.rhs.len()
                    ),
                ));
            }
        }
        let system = DynamicalSystem::new(&self.system.rhs, n, self.system.jacobian).map_err(
            |e| match e {
                DynamicsError::Expr { context, source } => {
                    let idx = context.trim_start_matches("rhs");
                    ConfigError::new(format!("$.system.rhs{idx}"), source)
                }
                other => ConfigError::new("$.system", other),
            },
        )?;
        let system = match &self.label {
            Some(label) => system.with_label(label.clone()),
            None => system,
        };

        let gain = match &self.gain {
            Some(rows) => GainMatrix::new(rows).map_err(|e| ConfigError::new("$.gain", e))?,
            None => GainMatrix::identity(n),
        };
        if gain.cols() != n {
            return Err(ConfigError::new(
                "$.gain",
                format!("gain has {} columns, system has {n} states", gain.cols()),
            ));
        }

        let comparison = match &self.comparison {
            None => None,
            Some(spec) => {
                let form = match spec.form {
                    FormSpec::U => ComparisonForm::U,
                    FormSpec::UAndX => ComparisonForm::UAndX { state_dim: n },
                };
                let mut c = ComparisonSystem::new(&spec.rhs, form).map_err(|e| match e {
                    crate::comparison::ComparisonError::Expr { context, source } => {
                        let idx = context.trim_start_matches("comparison rhs");
                        ConfigError::new(format!("$.comparison.rhs{idx}"), source)
                    }
                    other => ConfigError::new("$.comparison.rhs", other),
                })?;
                if let Some(a) = &spec.affine {
                    c = c
                        .with_affine(AffinePart {
                            matrix: a.matrix.clone(),
                            offset: a.offset.clone(),
                        })
                        .map_err(|e| ConfigError::new("$.comparison.affine", e))?;
                }
                if c.dim() != n {
                    return Err(ConfigError::new(
                        "$.comparison.rhs",
                        format!("{} comparison components for {n} states", c.dim()),
                    ));
                }
                if gain.rows() != n {
                    return Err(ConfigError::new(
                        "$.gain",
                        format!(
                            "comparison needs a square {n}x{n} gain, got {} rows",
                            gain.rows()
                        ),
                    ));
                }
                Some(c)
            }
        };

        let check_len = |path: &str, v: &[f64], expected: usize| {
            if v.len() != expected {
                return Err(ConfigError::new(
                    path,
                    format!("expected {expected} entries, found {}", v.len()),
                ));
            }
            if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                return Err(ConfigError::new(
                    format!("{path}[{i}]"),
                    "value is not finite",
                ));
            }
            Ok(())
        };
        if let Some(init) = &self.initial {
            check_len("$.initial.x0", &init.x0, n)?;
            if let Some(dx0) = &init.dx0 {
                check_len("$.initial.dx0", dx0, n)?;
            }
            if let Some(u0) = &init.u0 {
                let m = comparison
                    .as_ref()
                    .map_or(gain.rows(), ComparisonSystem::dim);
                check_len("$.initial.u0", u0, m)?;
                if let Some(i) = u0.iter().position(|&v| v < 0.0) {
                    return Err(ConfigError::new(
                        format!("$.initial.u0[{i}]"),
                        "comparison initial state must be non-negative",
                    ));
                }
            }
        }

        self.integrator
            .validate()
            .map_err(|e| ConfigError::new("$.integrator", e))?;

        let ordering = match &self.ordering {
            OrderingSpec::Componentwise => OrderMode::Componentwise,
            OrderingSpec::Cone { g } => {
                let k = PolyhedralCone::new(g).map_err(|e| ConfigError::new("$.ordering.g", e))?;
                if k.dim() != gain.rows() {
                    return Err(ConfigError::new(
                        "$.ordering.g",
                        format!(
                            "cone lives in dimension {}, norm has {} components",
                            k.dim(),
                            gain.rows()
                        ),
                    ));
                }
                OrderMode::Cone(k)
            }
        };

        let region = match &self.region {
            None => None,
            Some(src) => Some(Region::new(src, n).map_err(|e| ConfigError::new("$.region", e))?),
        };

        let qm = SamplingConfig::new(self.qm.samples, self.qm.bound, self.seed.unwrap_or(0));
        qm.validate().map_err(|m| ConfigError::new("$.qm", m))?;
        if let Some(x) = &self.qm.frozen_state {
            check_len("$.qm.frozen_state", x, n)?;
        }
        if let Some(x) = &self.equilibrium {
            check_len("$.equilibrium", x, n)?;
        }

        Ok(Prepared {
            scenario: self.clone(),
            system,
            gain,
            comparison,
            ordering,
            region,
        })
    }
}

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub scenario: Scenario,
    pub system: DynamicalSystem,
    pub gain: GainMatrix,
    pub comparison: Option<ComparisonSystem>,
    pub ordering: OrderMode,
    pub region: Option<Region>,
}

impl Prepared {
    pub fn initial(&self) -> Result<&InitialSpec, ConfigError> {
        self.scenario
            .initial
            .as_ref()
            .ok_or_else(|| ConfigError::new("$.initial", "missing initial data"))
    }

    pub fn x0(&self) -> Result<&[f64], ConfigError> {
        Ok(&self.initial()?.x0)
    }

    pub fn dx0(&self) -> Result<&[f64], ConfigError> {
        self.initial()?
            .dx0
            .as_deref()
            .ok_or_else(|| ConfigError::new("$.initial.dx0", "missing initial displacement"))
    }

    pub fn u0(&self) -> Result<&[f64], ConfigError> {
        self.initial()?
            .u0
            .as_deref()
            .ok_or_else(|| ConfigError::new("$.initial.u0", "missing comparison initial state"))
    }

    pub fn comparison(&self) -> Result<&ComparisonSystem, ConfigError> {
        self.comparison
            .as_ref()
            .ok_or_else(|| ConfigError::new("$.comparison", "missing comparison system"))
    }

    /// The state at which an `x`-dependent comparison map is frozen.
    pub fn frozen_state(&self) -> Result<Option<Vec<f64>>, ConfigError> {
        let cmp = self.comparison()?;
        if cmp.form() == ComparisonForm::U {
            return Ok(None);
        }
        if let Some(x) = &self.scenario.qm.frozen_state {
            return Ok(Some(x.clone()));
        }
        match &self.scenario.initial {
            Some(init) => Ok(Some(init.x0.clone())),
            None => Err(ConfigError::new(
                "$.qm.frozen_state",
                "the comparison map depends on x; give qm.frozen_state or initial.x0",
            )),
        }
    }

    pub fn sampling(&self, seed: u64) -> SamplingConfig {
        SamplingConfig::new(self.scenario.qm.samples, self.scenario.qm.bound, seed)
    }

    /// The cone for the cone falsifier: the configured cone, else the orthant.
    pub fn cone(&self) -> PolyhedralCone {
        match &self.ordering {
            OrderMode::Cone(k) => k.clone(),
            OrderMode::Componentwise => PolyhedralCone::orthant(self.gain.rows()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX2: &str = r#"{
        "system": {"rhs": ["-x1^2 + x2", "x1 - 2*x2^2"]},
        "comparison": {"rhs": ["(1 - 4*x1)*u1 + u2", "(1 - 8*x2)*u2 + u1"], "form": "u-and-x"},
        "initial": {"x0": [1, 1], "dx0": [1, 1], "u0": [5, 5]},
        "integrator": {"dt": 0.001, "t_end": 5},
        "region": ["x1 - 0.25", "x2 - 0.125"]
    }"#;

    #[test]
    fn parses_and_prepares() {
        let s = Scenario::from_json(EX2).unwrap();
        assert_eq!(s.integrator.t_end, 5.0);
        assert_eq!(s.ordering, OrderingSpec::Componentwise);
        let p = s.prepare().unwrap();
        assert_eq!(p.system.dim(), 2);
        assert!(p.gain.is_definite());
        assert_eq!(p.frozen_state().unwrap(), Some(vec![1.0, 1.0]));
        let again = Scenario::from_json(&s.to_json()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn schema_errors_carry_paths() {
        let e = Scenario::from_json(
            r#"{"system": {"rhs": ["x1"]}, "integrator": {"dt": "fast", "t_end": 1}}"#,
        )
        .unwrap_err();
        assert_eq!(e.path, "$.integrator.dt");
        let e = Scenario::from_json(r#"{"system": {"rhs": ["x1"], "bogus": 1}}"#).unwrap_err();
        assert_eq!(e.path, "$.system.bogus");
        let e = Scenario::from_json(r#"{"system": {"rhs": ["x1"]}, "ordering": {"kind": "ball"}}"#)
            .unwrap_err();
        assert_eq!(e.path, "$.ordering.kind");
    }

    #[test]
    fn consistency_errors_carry_paths() {
        let mut s = Scenario::from_json(EX2).unwrap();
        s.initial.as_mut().unwrap().u0 = Some(vec![5.0]);
        assert_eq!(s.prepare().unwrap_err().path, "$.initial.u0");
        let mut s = Scenario::from_json(EX2).unwrap();
        s.system.rhs[1] = "x1 - y".into();
        assert_eq!(s.prepare().unwrap_err().path, "$.system.rhs[1]");
        let mut s = Scenario::from_json(EX2).unwrap();
        s.comparison.as_mut().unwrap().rhs[0] = "u1 +".into();
        assert_eq!(s.prepare().unwrap_err().path, "$.comparison.rhs[0]");
        let mut s = Scenario::from_json(EX2).unwrap();
        s.gain = Some(vec![vec![1.0, -1.0], vec![0.0, 1.0]]);
        assert_eq!(s.prepare().unwrap_err().path, "$.gain");
        let mut s = Scenario::from_json(EX2).unwrap();
        s.ordering = OrderingSpec::Cone {
            g: vec![vec![1.0, 0.0], vec![-1.0, 0.0]],
        };
        assert_eq!(s.prepare().unwrap_err().path, "$.ordering.g");
        let mut s = Scenario::from_json(EX2).unwrap();
        s.initial.as_mut().unwrap().u0 = Some(vec![5.0, -1.0]);
        assert_eq!(s.prepare().unwrap_err().path, "$.initial.u0[1]");
    }
}
