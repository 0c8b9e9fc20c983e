use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::campanato::{CalibrationSuite, IterationConfig, Mode, Solution};
use crate::elliptic::{DiskGrid, SolverConfig, VALIDATION_PROBLEMS};
use crate::error::{Error, Result};
use crate::fields::{field_from_ids, manufactured_from_id, nonlinearity_from_id, ProblemSpec};
use crate::modulus::{DiniClass, BUILTIN_FAMILIES};
use crate::semilinear::PicardConfig;
use crate::Point;

pub const SCENARIO_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioMode {
    C1,
    C11,
    Lemma25Sweep,
    SolverValidation,
    ModulusCheck,
}

impl ScenarioMode {
    pub fn probe_mode(self) -> Option<Mode> {
        match self {
            ScenarioMode::C1 => Some(Mode::C1),
            ScenarioMode::C11 => Some(Mode::C11),
            _ => None,
        }
    }
}

/// Problem data: either a manufactured id, or field ids solved numerically.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldsBlock {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manufactured: Option<String>,
    /// Joint scale factor applied to a manufactured problem.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub leading: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nonlinearity: Option<String>,
    /// `zero`, `const:c`, `shape:i` or `manufactured:<id>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boundary: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridBlock {
    /// Spacing of the numeric solution grid on the unit disk.
    pub spacing: f64,
}

impl Default for GridBlock {
    fn default() -> Self {
        Self { spacing: 1.0 / 128.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ValidationBlock {
    pub problems: Vec<String>,
    pub spacings: Vec<f64>,
    pub order_tol: f64,
    pub dmp_operators: usize,
    pub dmp_max_kappa: f64,
    pub dmp_spacings: [f64; 2],
}

impl Default for ValidationBlock {
    fn default() -> Self {
        Self {
            problems: VALIDATION_PROBLEMS.iter().map(|s| s.to_string()).collect(),
            spacings: vec![1.0 / 32.0, 1.0 / 64.0, 1.0 / 128.0],
            order_tol: 0.2,
            dmp_operators: 20,
            dmp_max_kappa: 5.0,
            dmp_spacings: [1.0 / 32.0, 1.0 / 64.0],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyExpectation {
    pub id: String,
    pub dini: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModulusBlock {
    pub families: Vec<FamilyExpectation>,
    pub lambdas: Vec<f64>,
    pub k0: Vec<usize>,
}

impl Default for ModulusBlock {
    fn default() -> Self {
        Self {
            families: BUILTIN_FAMILIES
                .iter()
                .map(|(id, c)| FamilyExpectation {
                    id: id.to_string(),
                    dini: *c == DiniClass::Dini,
                })
                .collect(),
            lambdas: vec![0.125, 0.2, 0.25],
            k0: (1..=6).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub v: u32,
    pub id: String,
    pub mode: ScenarioMode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub fields: FieldsBlock,
    #[serde(default)]
    pub grid: GridBlock,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub picard: PicardConfig,
    #[serde(default)]
    pub iteration: IterationConfig,
    #[serde(default)]
    pub calibration: CalibrationSuite,
    #[serde(default)]
    pub validation: ValidationBlock,
    #[serde(default)]
    pub modulus: ModulusBlock,
    /// Output directory; the command line `--out` takes precedence.
    #[serde(default)]
    pub output: Option<PathBuf>,
}

/// A probe problem resolved against the registries.
pub struct Resolved {
    pub spec: ProblemSpec,
    pub solution: Source,
}

pub enum Source {
    Closed(Solution),
    /// Boundary data for a Picard solve on the unit disk.
    Numeric(Box<dyn Fn(Point) -> f64 + Send + Sync>),
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| {
            let key = e.to_string().split('`').nth(1).unwrap_or("scenario").to_string();
            Error::config(key, e.to_string())
        })?;
        if s.v != SCENARIO_VERSION {
            return Err(Error::config("v", format!("scenario schema version {} (expected {SCENARIO_VERSION})", s.v)));
        }
        if s.id.is_empty() || !s.id.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
            return Err(Error::config("id", "scenario ids use [A-Za-z0-9_-] only"));
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("scenario", format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Checks the config blocks and resolves every registry id, without
    /// running anything.
    pub fn validate(&self) -> Result<Option<Resolved>> {
        self.solver_checks()?;
        match self.mode {
            ScenarioMode::C1 | ScenarioMode::C11 => {
                self.iteration.validate()?;
                self.resolve().map(Some)
            }
            ScenarioMode::Lemma25Sweep => {
                let c = &self.calibration;
                if c.eps.len() < 4 || c.train_shapes.len() < 3 {
                    return Err(Error::config(
                        "calibration",
                        "the sweep needs ≥ 4 perturbation sizes and ≥ 3 training shapes",
                    ));
                }
                Ok(None)
            }
            ScenarioMode::SolverValidation => {
                let v = &self.validation;
                for id in &v.problems {
                    crate::elliptic::validation_problem(id)?;
                }
                if v.spacings.len() < 3 {
                    return Err(Error::config("validation.spacings", "at least three spacings required"));
                }
                Ok(None)
            }
            ScenarioMode::ModulusCheck => {
                for f in &self.modulus.families {
                    crate::modulus::Modulus::from_id(&f.id)?;
                }
                if self.modulus.lambdas.iter().any(|l| !(*l > 0.0 && *l < 1.0)) || self.modulus.k0.contains(&0) {
                    return Err(Error::config("modulus", "need 0 < λ < 1 and k0 ≥ 1"));
                }
                Ok(None)
            }
        }
    }

    fn solver_checks(&self) -> Result<()> {
        if !(self.solver.rtol >= 0.0 && self.solver.rtol < 1.0) || self.solver.max_iter == 0 {
            return Err(Error::config("solver", "rtol in [0, 1) and max_iter ≥ 1 required"));
        }
        if !(self.grid.spacing > 0.0 && self.grid.spacing <= 1.0 / 16.0) {
            return Err(Error::config("grid.spacing", "spacing must lie in (0, 1/16]"));
        }
        Ok(())
    }

    fn resolve(&self) -> Result<Resolved> {
        let f = &self.fields;
        if let Some(id) = &f.manufactured {
            if f.leading.is_some() || f.drift.is_some() || f.nonlinearity.is_some() || f.boundary.is_some() {
                return Err(Error::config("fields", "a manufactured problem takes no other field ids"));
            }
            let mut m = manufactured_from_id(id)?;
            if let Some(s) = f.scale {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::config("fields.scale", "scale must be positive"));
                }
                m = m.scaled(s);
            }
            return Ok(Resolved {
                solution: Source::Closed(Solution::Closed(m.u.clone())),
                spec: m.spec,
            });
        }
        if f.scale.is_some() {
            return Err(Error::config("fields.scale", "scale applies to manufactured problems only"));
        }
        let need = |v: &Option<String>, key: &str| -> Result<String> {
            v.clone().ok_or_else(|| Error::config(format!("fields.{key}"), "missing field id"))
        };
        let field = field_from_ids(&need(&f.leading, "leading")?, &need(&f.drift, "drift")?)?;
        let (nonlinearity, potential) = nonlinearity_from_id(&need(&f.nonlinearity, "nonlinearity")?, &field)?;
        let boundary = boundary_from_id(&need(&f.boundary, "boundary")?)?;
        // the grid itself is validated here so that failures surface before any output
        DiskGrid::new([0.0, 0.0], 1.0, self.grid.spacing)?;
        Ok(Resolved {
            spec: ProblemSpec {
                field,
                nonlinearity,
                potential,
            },
            solution: Source::Numeric(boundary),
        })
    }
}

/// Boundary data by id.
pub fn boundary_from_id(id: &str) -> Result<Box<dyn Fn(Point) -> f64 + Send + Sync>> {
    let (head, arg) = match id.split_once(':') {
        Some((h, a)) => (h, Some(a)),
        None => (id, None),
    };
    let bad = || Error::Registry(id.to_string());
    match (head, arg) {
        ("zero", None) => Ok(Box::new(|_| 0.0)),
        ("const", Some(c)) => {
            let c: f64 = c.parse().map_err(|_| bad())?;
            Ok(Box::new(move |_| c))
        }
        ("shape", Some(i)) => {
            let i: usize = i.parse().map_err(|_| bad())?;
            if i >= crate::campanato::SHAPES.len() {
                return Err(bad());
            }
            Ok(Box::new(crate::campanato::shape(i)))
        }
        ("manufactured", Some(m)) => {
            let u = manufactured_from_id(m)?.u;
            Ok(Box::new(move |x| u(x)))
        }
        _ => Err(bad()),
    }
}
