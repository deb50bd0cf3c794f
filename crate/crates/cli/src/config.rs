//! JSON run configuration.

use std::collections::BTreeMap;
use std::path::Path;

use freesd::density::{Domain, GridSpec, DEFAULT_MASS_TOL};
use freesd::levy::{self, make_family, FamilySpec, FreeTriplet, LevyDensity};
use freesd::mollify;
use freesd::vcurve::DEFAULT_SOLVE_TOL;
use freesd::{QuadSpec, TransformContext};
use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevySection {
    pub family: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    #[serde(default)]
    pub table: Option<TableSection>,
    #[serde(default)]
    pub components: Vec<LevySection>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSection {
    pub t: Vec<f64>,
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum EtaChoice {
    Value(f64),
    Named(String),
}

impl Default for EtaChoice {
    fn default() -> Self {
        EtaChoice::Named("lemma".into())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MollifySection {
    pub n: Option<u32>,
    pub epsilon_floor: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
    pub n_points: Option<usize>,
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    pub solve_v: Option<f64>,
    pub quad_abs: Option<f64>,
    pub quad_rel: Option<f64>,
    pub mass: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub levy: LevySection,
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub eta: EtaChoice,
    pub epsilon_floor: Option<f64>,
    pub mollify: Option<MollifySection>,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
}

/// A configuration resolved into numerical objects.
#[derive(Debug, Clone)]
pub struct Problem {
    /// The density whose law is computed; for mollified runs it already
    /// carries the semicircular part.
    pub k: LevyDensity,
    pub triplet: FreeTriplet,
    /// Translation from the lemma drift to the requested one.
    pub shift: f64,
    pub quad: QuadSpec,
    pub grid: GridSpec,
}

impl Problem {
    pub fn context(&self) -> Result<TransformContext, CliError> {
        Ok(TransformContext::new(self.k.clone(), self.quad.clone())?)
    }
}

pub fn load(path: &Path) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn positive(name: &str, value: Option<f64>, default: f64) -> Result<f64, CliError> {
    match value {
        None => Ok(default),
        Some(v) if v > 0.0 && v.is_finite() => Ok(v),
        Some(v) => Err(CliError::Config(format!("{name} must be positive, got {v}"))),
    }
}

fn family_spec(section: &LevySection, floor: Option<f64>) -> FamilySpec {
    let mut spec = FamilySpec::new(&section.family);
    spec.params = section.params.clone();
    if section.family == "half-exp" && !spec.params.contains_key("epsilon") {
        if let Some(floor) = floor {
            spec.params.insert("epsilon".into(), floor);
        }
    }
    spec.table = section.table.as_ref().map(|t| (t.t.clone(), t.k.clone()));
    spec.components = section.components.iter().map(|c| family_spec(c, floor)).collect();
    spec
}

impl RunConfig {
    fn check_scalars(&self) -> Result<(), CliError> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(CliError::Config(format!("a must be a finite number >= 0, got {}", self.a)));
        }
        if let Some(floor) = self.epsilon_floor {
            if !(floor >= 0.0 && floor.is_finite()) {
                return Err(CliError::Config(format!("epsilon_floor must be >= 0, got {floor}")));
            }
        }
        match &self.eta {
            EtaChoice::Named(name) if name != "lemma" => Err(CliError::Config(format!(
                "eta must be a number or \"lemma\", got \"{name}\""
            ))),
            EtaChoice::Value(v) if !v.is_finite() => Err(CliError::Config(format!("eta must be finite, got {v}"))),
            _ => Ok(()),
        }
    }

    /// The Levy density named by the `levy` section, without mollification.
    pub fn base_density(&self) -> Result<LevyDensity, CliError> {
        Ok(make_family(&family_spec(&self.levy, self.epsilon_floor))?)
    }

    /// Floor for mollified densities: the `mollify` section wins over the
    /// top-level value, which wins over the default.
    pub fn mollify_floor(&self) -> f64 {
        self.mollify
            .as_ref()
            .and_then(|m| m.epsilon_floor)
            .or(self.epsilon_floor)
            .unwrap_or_else(|| mollify::default_floor(self.a))
    }

    pub fn quad_spec(&self) -> Result<QuadSpec, CliError> {
        let defaults = QuadSpec::default();
        let spec = QuadSpec {
            abs_tol: positive("tolerances.quad_abs", self.tolerances.quad_abs, defaults.abs_tol)?,
            rel_tol: positive("tolerances.quad_rel", self.tolerances.quad_rel, defaults.rel_tol)?,
            ..defaults
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn grid_spec(&self) -> Result<GridSpec, CliError> {
        let g = &self.grid;
        let domain = match (g.x_min, g.x_max) {
            (None, None) => GridSpec::default().domain,
            (lo, hi) => {
                let x_max = hi.unwrap_or_else(|| -lo.unwrap_or(0.0));
                let x_min = lo.unwrap_or(-x_max);
                if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
                    return Err(CliError::Config(format!(
                        "grid needs finite x_min < x_max, got [{x_min}, {x_max}]"
                    )));
                }
                Domain::Fixed { x_min, x_max }
            }
        };
        let n_points = g.n_points.unwrap_or(512);
        if n_points < 2 {
            return Err(CliError::Config(format!("grid.n_points must be at least 2, got {n_points}")));
        }
        Ok(GridSpec {
            domain,
            n_points,
            refine: g.refine.unwrap_or(true),
            solve_tol: positive("tolerances.solve_v", self.tolerances.solve_v, DEFAULT_SOLVE_TOL)?,
            mass_tol: positive("tolerances.mass", self.tolerances.mass, DEFAULT_MASS_TOL)?,
        })
    }

    /// Builds the law described by the file, using `n` in place of the
    /// configured mollification level when given.
    pub fn problem(&self, n_override: Option<u32>) -> Result<Problem, CliError> {
        self.check_scalars()?;
        let base = self.base_density()?;
        let n = n_override.or(self.mollify.as_ref().and_then(|m| m.n));
        let (k, a) = match n {
            Some(n) => (mollify::mollify_k(&base, self.a, n, self.mollify_floor())?, 0.0),
            None => (base, self.a),
        };
        let lemma = levy::lemma_eta(&k)?;
        let eta = match self.eta {
            EtaChoice::Value(v) => v,
            EtaChoice::Named(_) => lemma,
        };
        Ok(Problem {
            triplet: FreeTriplet::new(a, k.clone(), eta)?,
            k,
            shift: eta - lemma,
            quad: self.quad_spec()?,
            grid: self.grid_spec()?,
        })
    }

    /// Like [`RunConfig::problem`], but rejects a semicircular part that is
    /// not carried by a mollified density, since the boundary curve needs it
    /// inside `k`.
    pub fn curve_problem(&self, n_override: Option<u32>) -> Result<Problem, CliError> {
        let problem = self.problem(n_override)?;
        if problem.triplet.a > 0.0 {
            return Err(CliError::Config(
                "a > 0 needs a `mollify` section (the semicircular part enters through k_n)".into(),
            ));
        }
        Ok(problem)
    }
}
