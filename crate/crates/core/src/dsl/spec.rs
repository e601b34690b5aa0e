use std::fmt;

use serde::{Deserialize, Serialize};

use crate::fem::{BoundaryCondition, EdgeLabel, GeometrySpec, Kinematics, MaterialModel, NewtonParams, StressComponent};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub geometry: GeometrySpec,
    pub mesh: MeshSize,
    /// Left optional at parse time so that a missing block surfaces as a
    /// `MISSING_MATERIAL` violation rather than a parse error.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub material: Option<MaterialRef>,
    pub kinematics: KinematicsSpec,
    pub bcs: Vec<BoundaryCondition>,
    pub outputs: Vec<OutputRequest>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSize {
    pub nx: usize,
    pub ny: usize,
}

/// Material block: a database name, an `E`/`nu` pair or a `mu`/`lambda`
/// pair. Which form is meant is decided during validation so that partial
/// blocks can be reported precisely.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialRef {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<MaterialModel>,
    #[serde(rename = "E", default, skip_serializing_if = "Option::is_none")]
    pub youngs_modulus: Option<f64>,
    #[serde(rename = "nu", default, skip_serializing_if = "Option::is_none")]
    pub poisson_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl MaterialRef {
    pub fn named(name: &str) -> Self {
        MaterialRef { name: Some(name.to_string()), ..Default::default() }
    }

    pub fn youngs(e: f64, nu: f64, model: MaterialModel) -> Self {
        MaterialRef { model: Some(model), youngs_modulus: Some(e), poisson_ratio: Some(nu), ..Default::default() }
    }

    pub fn lame(mu: f64, lambda: f64, model: MaterialModel) -> Self {
        MaterialRef { model: Some(model), mu: Some(mu), lambda: Some(lambda), ..Default::default() }
    }
}

/// `"small_strain"`, `"finite_strain"`, or `{"mode": ..., "newton": {...}}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum KinematicsSpec {
    Mode(Kinematics),
    Detailed(KinematicsDetail),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KinematicsDetail {
    pub mode: Kinematics,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonSettings>,
}

/// Newton overrides as written in a document; unset fields take the solver
/// defaults. Validation rejects out-of-range values instead of clamping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewtonSettings {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load_stepping: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_bisections: Option<usize>,
}

impl NewtonSettings {
    pub fn resolve(&self) -> NewtonParams {
        let d = NewtonParams::default();
        NewtonParams {
            rel_tol: self.rel_tol.unwrap_or(d.rel_tol),
            abs_tol: self.abs_tol.unwrap_or(d.abs_tol),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            load_stepping: self.load_stepping.unwrap_or(d.load_stepping),
            max_bisections: self.max_bisections.unwrap_or(d.max_bisections),
        }
    }
}

impl KinematicsSpec {
    pub fn mode(&self) -> Kinematics {
        match self {
            KinematicsSpec::Mode(k) => *k,
            KinematicsSpec::Detailed(d) => d.mode,
        }
    }

    pub fn newton(&self) -> NewtonSettings {
        match self {
            KinematicsSpec::Detailed(KinematicsDetail { newton: Some(n), .. }) => *n,
            _ => NewtonSettings::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputKind {
    DisplacementPng,
    StressComponent,
    VonMises,
    TractionForce,
}

impl OutputKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutputKind::DisplacementPng => "displacement_png",
            OutputKind::StressComponent => "stress_component",
            OutputKind::VonMises => "von_mises",
            OutputKind::TractionForce => "traction_force",
        }
    }
}

impl fmt::Display for OutputKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputRequest {
    pub kind: OutputKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub component: Option<StressComponent>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edge: Option<EdgeLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

impl OutputRequest {
    pub fn new(kind: OutputKind) -> Self {
        OutputRequest { kind, component: None, edge: None, path: None }
    }

    pub fn stress(component: StressComponent) -> Self {
        OutputRequest { component: Some(component), ..Self::new(OutputKind::StressComponent) }
    }

    pub fn traction(edge: EdgeLabel) -> Self {
        OutputRequest { edge: Some(edge), ..Self::new(OutputKind::TractionForce) }
    }

    pub fn with_path(mut self, path: &str) -> Self {
        self.path = Some(path.to_string());
        self
    }

    /// Name of the artifact file for raster outputs, `None` for scalars.
    pub fn artifact_path(&self) -> Option<String> {
        if let Some(p) = &self.path {
            return Some(p.clone());
        }
        match self.kind {
            OutputKind::DisplacementPng => Some("displacement.png".into()),
            OutputKind::StressComponent => self.component.map(|c| format!("sigma_{}.png", c.as_str())),
            OutputKind::VonMises => Some("von_mises.png".into()),
            OutputKind::TractionForce => None,
        }
    }

    /// Quantity name as recorded in artifact descriptors.
    pub fn quantity(&self) -> String {
        match self.kind {
            OutputKind::DisplacementPng => "displacement".into(),
            OutputKind::StressComponent => {
                format!("sigma_{}", self.component.map(|c| c.as_str()).unwrap_or("?"))
            }
            OutputKind::VonMises => "von_mises".into(),
            OutputKind::TractionForce => {
                format!("traction_force_{}", self.edge.map(|e| e.as_str()).unwrap_or("?"))
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParseErrorKind {
    SyntaxError,
    UnknownKey,
    TypeMismatch,
}

impl ParseErrorKind {
    pub fn code(&self) -> &'static str {
        match self {
            ParseErrorKind::SyntaxError => "SYNTAX_ERROR",
            ParseErrorKind::UnknownKey => "UNKNOWN_KEY",
            ParseErrorKind::TypeMismatch => "TYPE_MISMATCH",
        }
    }
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
#[error("{}: {message} at line {line} column {column}", kind.code())]
pub struct ParseError {
    pub kind: ParseErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

/// Strict parse of a problem document.
pub fn parse_problem(text: &str) -> Result<ProblemSpec, ParseError> {
    serde_json::from_str(text).map_err(|e| {
        use serde_json::error::Category;
        let raw = e.to_string();
        // serde_json appends " at line L column C"; keep the bare message.
        let message = match raw.rfind(" at line ") {
            Some(i) => raw[..i].to_string(),
            None => raw,
        };
        let kind = match e.classify() {
            Category::Data if message.starts_with("unknown field") => ParseErrorKind::UnknownKey,
            Category::Data => ParseErrorKind::TypeMismatch,
            _ => ParseErrorKind::SyntaxError,
        };
        ParseError { kind, line: e.line().max(1), column: e.column(), message }
    })
}

/// Canonical pretty-printed document; `parse_problem(&print_problem(s)) == s`.
pub fn print_problem(spec: &ProblemSpec) -> String {
    serde_json::to_string_pretty(spec).expect("problem specs always serialize")
}
