use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::materials::MaterialDb;
use super::spec::{parse_problem, OutputKind, ParseError, ProblemSpec};
use super::validate::{resolve_material, validate_with};
use crate::fem::{
    edge_traction_force, export_field, extract_component, generate_mesh, nodal_average, solve_hyperelastic,
    solve_linear, stress_field, von_mises, DisplacementField, FemError, FieldData, Kinematics, MaterialModel,
    MaterialProps, Mesh, NewtonReport, StressField,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeStatus {
    Success,
    ValidationError,
    SolverError,
}

impl OutcomeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutcomeStatus::Success => "success",
            OutcomeStatus::ValidationError => "validation_error",
            OutcomeStatus::SolverError => "solver_error",
        }
    }
}

/// One error line of an outcome: `CODE: subject`, followed by detail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutcomeError {
    pub code: String,
    pub subject: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub quantity: String,
    /// PNG path relative to the work directory.
    pub path: String,
    /// Portable field file path relative to the work directory.
    pub field: String,
    pub min: f64,
    pub max: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecutionOutcome {
    pub status: OutcomeStatus,
    pub message: String,
    #[serde(default)]
    pub errors: Vec<OutcomeError>,
    #[serde(default)]
    pub warnings: Vec<String>,
    #[serde(default)]
    pub artifacts: Vec<Artifact>,
    #[serde(default)]
    pub scalars: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub newton: Option<NewtonReport>,
}

impl ExecutionOutcome {
    fn failure(status: OutcomeStatus, errors: Vec<OutcomeError>, warnings: Vec<String>) -> Self {
        let message = errors
            .iter()
            .map(|e| format!("{}: {}", e.code, e.detail))
            .collect::<Vec<_>>()
            .join("; ");
        ExecutionOutcome {
            status,
            message,
            errors,
            warnings,
            artifacts: Vec::new(),
            scalars: BTreeMap::new(),
            newton: None,
        }
    }

    pub fn is_success(&self) -> bool {
        self.status == OutcomeStatus::Success
    }

    pub fn codes(&self) -> Vec<&str> {
        self.errors.iter().map(|e| e.code.as_str()).collect()
    }

    pub fn artifact(&self, path: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.path == path)
    }

    pub fn from_parse_error(err: &ParseError) -> Self {
        Self::failure(
            OutcomeStatus::ValidationError,
            vec![OutcomeError {
                code: err.kind.code().to_string(),
                subject: format!("line {} column {}", err.line, err.column),
                detail: err.message.clone(),
            }],
            Vec::new(),
        )
    }

    /// Stable text rendering fed back into the conversation.
    pub fn render(&self) -> String {
        let mut out = format!("status: {}\n", self.status.as_str());
        for e in &self.errors {
            let _ = writeln!(out, "{}: {}", e.code, e.subject);
            for line in e.detail.lines() {
                let _ = writeln!(out, "  {line}");
            }
        }
        for w in &self.warnings {
            let _ = writeln!(out, "warning: {w}");
        }
        for (name, v) in &self.scalars {
            let _ = writeln!(out, "{name}: {}", sig6(*v));
        }
        for a in &self.artifacts {
            let _ = writeln!(
                out,
                "artifact: {} ({}, field {}, min {}, max {})",
                a.path,
                a.quantity,
                a.field,
                sig6(a.min),
                sig6(a.max)
            );
        }
        if self.is_success() && !self.message.is_empty() {
            let _ = writeln!(out, "{}", self.message);
        }
        out
    }
}

/// Six significant digits in scientific notation.
pub fn sig6(v: f64) -> String {
    format!("{v:.5e}")
}

/// Solver state kept next to an outcome so that checks can recompute
/// quantities from the solution.
#[derive(Clone, Debug)]
pub struct SolvedState {
    pub mesh: Arc<Mesh>,
    pub field: DisplacementField,
    /// Material as solved (model normalized to the kinematics used).
    pub material: MaterialProps,
}

#[derive(Clone, Debug)]
pub struct Execution {
    pub outcome: ExecutionOutcome,
    pub state: Option<SolvedState>,
}

fn solver_error(code: &str, subject: impl Into<String>, detail: impl Into<String>, warnings: Vec<String>) -> Execution {
    Execution {
        outcome: ExecutionOutcome::failure(
            OutcomeStatus::SolverError,
            vec![OutcomeError { code: code.into(), subject: subject.into(), detail: detail.into() }],
            warnings,
        ),
        state: None,
    }
}

fn fem_failure(err: FemError, warnings: Vec<String>) -> Execution {
    match &err {
        FemError::Divergence { load_factor, residual_history, .. } => {
            let history = residual_history.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>().join(", ");
            solver_error(
                "DIVERGENCE",
                format!("load factor {load_factor}"),
                format!("{err}\nresidual history: [{history}]"),
                warnings,
            )
        }
        FemError::InvertedElement { element, .. } => solver_error(
            "INVERTED_ELEMENT",
            element.map(|e| format!("element {e}")).unwrap_or_else(|| "element".into()),
            err.to_string(),
            warnings,
        ),
        FemError::RigidMode(_) => solver_error("RIGID_MODE", "bcs", err.to_string(), warnings),
        FemError::Resolution(_) => solver_error("MESH_RESOLUTION", "mesh", err.to_string(), warnings),
        FemError::Io(_) => solver_error("IO_ERROR", "artifact", err.to_string(), warnings),
        _ => solver_error("NUMERICAL", "solve", err.to_string(), warnings),
    }
}

pub fn execute_problem(spec: &ProblemSpec, workdir: &Path) -> ExecutionOutcome {
    execute_detailed(spec, workdir, &MaterialDb::bundled()).outcome
}

/// Parses then executes; parse failures become validation outcomes.
pub fn execute_document(text: &str, workdir: &Path) -> (Option<ProblemSpec>, Execution) {
    match parse_problem(text) {
        Ok(spec) => {
            let exec = execute_detailed(&spec, workdir, &MaterialDb::bundled());
            (Some(spec), exec)
        }
        Err(e) => (None, Execution { outcome: ExecutionOutcome::from_parse_error(&e), state: None }),
    }
}

pub fn execute_detailed(spec: &ProblemSpec, workdir: &Path, db: &MaterialDb) -> Execution {
    let report = validate_with(spec, db);
    let warnings = report.warnings.clone();
    if !report.is_valid() {
        let errors = report
            .violations
            .iter()
            .map(|v| OutcomeError { code: v.code.as_str().into(), subject: v.subject.clone(), detail: v.message.clone() })
            .collect();
        return Execution {
            outcome: ExecutionOutcome::failure(OutcomeStatus::ValidationError, errors, warnings),
            state: None,
        };
    }
    let material = match resolve_material(spec.material.as_ref(), db) {
        Ok(m) => m,
        Err(v) => {
            return Execution {
                outcome: ExecutionOutcome::failure(
                    OutcomeStatus::ValidationError,
                    vec![OutcomeError { code: v.code.as_str().into(), subject: v.subject, detail: v.message }],
                    warnings,
                ),
                state: None,
            }
        }
    };
    let mesh = match generate_mesh(&spec.geometry, spec.mesh.nx, spec.mesh.ny) {
        Ok(m) => Arc::new(m),
        Err(e) => return fem_failure(e, warnings),
    };

    let finite = spec.kinematics.mode() == Kinematics::FiniteStrain && material.model == MaterialModel::NeoHookean;
    let (field, material, newton) = if finite {
        match solve_hyperelastic(mesh.clone(), &material, &spec.bcs, &spec.kinematics.newton().resolve()) {
            Ok(sol) => (sol.field, material, Some(sol.report)),
            Err(e) => return fem_failure(e, warnings),
        }
    } else {
        let material = material.with_model(MaterialModel::LinearElastic);
        match solve_linear(mesh.clone(), &material, &spec.bcs) {
            Ok(u) => (u, material, None),
            Err(e) => return fem_failure(e, warnings),
        }
    };

    let mut outcome = ExecutionOutcome {
        status: OutcomeStatus::Success,
        message: format!(
            "solved {} problem on {} nodes and {} triangles",
            field.kinematics,
            mesh.num_nodes(),
            mesh.num_triangles()
        ),
        errors: Vec::new(),
        warnings,
        artifacts: Vec::new(),
        scalars: BTreeMap::new(),
        newton: newton.clone(),
    };
    if let Some(n) = &newton {
        outcome.scalars.insert("newton_iterations".into(), n.total_iterations as f64);
    }

    let mut stress: Option<StressField> = None;
    let mut first_traction = true;
    for out in &spec.outputs {
        let data = match out.kind {
            OutputKind::TractionForce => {
                let edge = out.edge.expect("validated traction output has an edge");
                let f = match edge_traction_force(&field, &material, edge) {
                    Ok(f) => f,
                    Err(e) => return fem_failure(e, outcome.warnings),
                };
                if f.fallback {
                    outcome.warnings.push(format!(
                        "edge `{edge}` has no prescribed ux; traction_force_x_{edge} is the boundary integral"
                    ));
                }
                let ry = f.reaction.map(|r| r[1]).unwrap_or(f.integral[1]);
                if first_traction {
                    outcome.scalars.insert("traction_force_x".into(), f.reported_x);
                    outcome.scalars.insert("traction_force_y".into(), ry);
                    first_traction = false;
                }
                outcome.scalars.insert(format!("traction_force_x_{edge}"), f.reported_x);
                outcome.scalars.insert(format!("traction_integral_x_{edge}"), f.integral[0]);
                continue;
            }
            OutputKind::DisplacementPng => FieldData::nodal(
                "displacement",
                vec![field.values.iter().map(|v| v[0]).collect(), field.values.iter().map(|v| v[1]).collect()],
            ),
            OutputKind::StressComponent | OutputKind::VonMises => {
                if stress.is_none() {
                    match stress_field(&field, &material) {
                        Ok(s) => stress = Some(s),
                        Err(e) => return fem_failure(e, outcome.warnings),
                    }
                }
                let s = stress.as_ref().expect("stress computed above");
                let cells = match out.component {
                    Some(c) if out.kind == OutputKind::StressComponent => extract_component(s, c),
                    _ => von_mises(s),
                };
                FieldData::nodal(out.quantity(), vec![nodal_average(&mesh, &cells)])
            }
        };
        let rel = out.artifact_path().expect("raster outputs have a path");
        match export_field(&data, &mesh, &workdir.join(&rel)) {
            Ok(desc) => {
                let field_rel = Path::new(&rel).with_extension("field").to_string_lossy().into_owned();
                outcome.artifacts.push(Artifact {
                    quantity: desc.quantity,
                    path: rel,
                    field: field_rel,
                    min: desc.min,
                    max: desc.max,
                });
            }
            Err(e) => return fem_failure(e, outcome.warnings),
        }
    }
    Execution { outcome, state: Some(SolvedState { mesh, field, material }) }
}
