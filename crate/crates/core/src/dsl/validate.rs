use std::collections::BTreeSet;
use std::fmt;
use std::path::{Component, Path};

use serde::{Deserialize, Serialize};

use super::materials::{MaterialDb, MaterialDbError};
use super::spec::{MaterialRef, OutputKind, ProblemSpec};
use crate::fem::{generate_mesh, EdgeLabel, FemError, GeometryKind, Kinematics, MaterialModel, MaterialProps};

pub const MAX_CELLS_PER_SIDE: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ViolationCode {
    MissingMaterial,
    BadEdge,
    HoleOutOfBounds,
    OutputUnderspecified,
    NoConstraint,
    InvalidParameter,
}

impl ViolationCode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ViolationCode::MissingMaterial => "MISSING_MATERIAL",
            ViolationCode::BadEdge => "BAD_EDGE",
            ViolationCode::HoleOutOfBounds => "HOLE_OUT_OF_BOUNDS",
            ViolationCode::OutputUnderspecified => "OUTPUT_UNDERSPECIFIED",
            ViolationCode::NoConstraint => "NO_CONSTRAINT",
            ViolationCode::InvalidParameter => "INVALID_PARAMETER",
        }
    }
}

impl fmt::Display for ViolationCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub code: ViolationCode,
    /// The offending identifier(s), e.g. `mu, lambda` or `steel`.
    pub subject: String,
    pub message: String,
}

impl Violation {
    fn new(code: ViolationCode, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Violation { code, subject: subject.into(), message: message.into() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn codes(&self) -> Vec<ViolationCode> {
        let set: BTreeSet<ViolationCode> = self.violations.iter().map(|v| v.code).collect();
        set.into_iter().collect()
    }

    fn push(&mut self, v: Violation) {
        self.violations.push(v);
    }
}

/// Resolves the material block against `db`. The returned properties carry
/// the model the problem will actually be solved with.
pub fn resolve_material(material: Option<&MaterialRef>, db: &MaterialDb) -> Result<MaterialProps, Violation> {
    let missing = |names: &str| {
        Violation::new(
            ViolationCode::MissingMaterial,
            names,
            format!("material properties not defined: {names}"),
        )
    };
    let Some(m) = material else {
        return Err(missing("mu, lambda"));
    };
    let has_young = m.youngs_modulus.is_some() || m.poisson_ratio.is_some();
    let has_lame = m.mu.is_some() || m.lambda.is_some();
    if let Some(name) = &m.name {
        if has_young || has_lame {
            return Err(Violation::new(
                ViolationCode::InvalidParameter,
                "material",
                format!("material `{name}` is named and also given inline constants; use one form"),
            ));
        }
        return match db.lookup(name) {
            Ok(p) => Ok(match m.model {
                Some(model) => p.with_model(model),
                None => p,
            }),
            Err(MaterialDbError::Unknown(_)) => Err(Violation::new(
                ViolationCode::MissingMaterial,
                name.clone(),
                format!(
                    "material `{name}` not found in the material database (known: {})",
                    db.names().collect::<Vec<_>>().join(", ")
                ),
            )),
            Err(e) => Err(Violation::new(ViolationCode::MissingMaterial, name.clone(), e.to_string())),
        };
    }
    let model = m.model.unwrap_or(MaterialModel::LinearElastic);
    let invalid = |e: FemError| Violation::new(ViolationCode::InvalidParameter, "material", e.to_string());
    match (has_young, has_lame) {
        (true, true) => Err(Violation::new(
            ViolationCode::InvalidParameter,
            "material",
            "give either E and nu or mu and lambda, not both",
        )),
        (true, false) => match (m.youngs_modulus, m.poisson_ratio) {
            (Some(e), Some(nu)) => MaterialProps::from_youngs(e, nu, model).map_err(invalid),
            (None, _) => Err(missing("E")),
            (_, None) => Err(missing("nu")),
        },
        (false, true) => match (m.mu, m.lambda) {
            (Some(mu), Some(lambda)) => MaterialProps::from_lame(mu, lambda, model).map_err(invalid),
            (None, _) => Err(missing("mu")),
            (_, None) => Err(missing("lambda")),
        },
        (false, false) => Err(missing("mu, lambda")),
    }
}

/// Rank of the rigid-motion constraints `u = (a − θy, b + θx)` implied by the
/// boundary conditions. Straight edges pin one relation per component unless
/// the component varies along them; a circle pins both.
fn rigid_constraint_rank(spec: &ProblemSpec) -> usize {
    let (w, h) = (spec.geometry.width, spec.geometry.height);
    let mut rows: Vec<[f64; 3]> = Vec::new();
    for bc in &spec.bcs {
        let (along_y, fixed_coord) = match bc.edge {
            EdgeLabel::Left => (true, 0.0),
            EdgeLabel::Right => (true, w),
            EdgeLabel::Bottom => (false, 0.0),
            EdgeLabel::Top => (false, h),
            EdgeLabel::Hole => {
                // Two distinct points on the circle per component.
                if bc.ux.is_some() {
                    rows.extend([[1.0, 0.0, 0.0], [1.0, 0.0, -1.0]]);
                }
                if bc.uy.is_some() {
                    rows.extend([[0.0, 1.0, 0.0], [0.0, 1.0, 1.0]]);
                }
                continue;
            }
        };
        // Unknowns (a, b, θ).
        if bc.ux.is_some() {
            if along_y {
                rows.extend([[1.0, 0.0, 0.0], [1.0, 0.0, -h]]);
            } else {
                rows.push([1.0, 0.0, -fixed_coord]);
            }
        }
        if bc.uy.is_some() {
            if along_y {
                rows.push([0.0, 1.0, fixed_coord]);
            } else {
                rows.extend([[0.0, 1.0, 0.0], [0.0, 1.0, w]]);
            }
        }
    }
    rank3(&rows)
}

fn rank3(rows: &[[f64; 3]]) -> usize {
    let mut m: Vec<[f64; 3]> = rows.to_vec();
    let mut rank = 0;
    for col in 0..3 {
        let Some(piv) = (rank..m.len()).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs())) else {
            break;
        };
        if m[piv][col].abs() < 1e-12 {
            continue;
        }
        m.swap(rank, piv);
        for i in 0..m.len() {
            if i != rank {
                let f = m[i][col] / m[rank][col];
                for c in 0..3 {
                    m[i][c] -= f * m[rank][c];
                }
            }
        }
        rank += 1;
    }
    rank
}

fn adjacent(a: EdgeLabel, b: EdgeLabel) -> bool {
    use EdgeLabel::*;
    matches!(
        (a, b),
        (Left, Bottom) | (Bottom, Left) | (Left, Top) | (Top, Left) | (Right, Bottom) | (Bottom, Right) | (Right, Top) | (Top, Right)
    )
}

fn check_output_path(path: &str) -> Result<(), String> {
    let p = Path::new(path);
    if path.is_empty() || p.is_absolute() || !p.components().all(|c| matches!(c, Component::Normal(_))) {
        return Err(format!("output path `{path}` must be a relative path inside the work directory"));
    }
    if p.extension().and_then(|e| e.to_str()) != Some("png") {
        return Err(format!("output path `{path}` must end in .png"));
    }
    Ok(())
}

pub fn validate(spec: &ProblemSpec) -> ValidationReport {
    validate_with(spec, &MaterialDb::bundled())
}

pub fn validate_with(spec: &ProblemSpec, db: &MaterialDb) -> ValidationReport {
    use ViolationCode::*;
    let mut report = ValidationReport::default();
    let g = &spec.geometry;

    let material = match resolve_material(spec.material.as_ref(), db) {
        Ok(m) => Some(m),
        Err(v) => {
            report.push(v);
            None
        }
    };

    let mut geometry_ok = true;
    if !(g.width.is_finite() && g.width > 0.0 && g.height.is_finite() && g.height > 0.0) {
        geometry_ok = false;
        report.push(Violation::new(
            InvalidParameter,
            "geometry",
            format!("width and height must be positive, got {} x {}", g.width, g.height),
        ));
    }
    match g.kind {
        GeometryKind::Rectangle => {
            if g.hole_radius.is_some() || g.hole_center.is_some() {
                report.push(Violation::new(
                    InvalidParameter,
                    "hole_radius",
                    "hole parameters given for kind `rectangle`; use kind `rectangle_with_hole`",
                ));
            }
        }
        GeometryKind::RectangleWithHole => match g.hole_radius {
            None => {
                geometry_ok = false;
                report.push(Violation::new(InvalidParameter, "hole_radius", "kind `rectangle_with_hole` needs hole_radius"));
            }
            Some(r) if !(r > 0.0) => {
                geometry_ok = false;
                report.push(Violation::new(InvalidParameter, "hole_radius", format!("hole_radius must be positive, got {r}")));
            }
            Some(_) if geometry_ok => {
                if let Err(e) = g.check() {
                    geometry_ok = false;
                    report.push(Violation::new(HoleOutOfBounds, "hole", e.to_string()));
                }
            }
            Some(_) => {}
        },
    }

    let (nx, ny) = (spec.mesh.nx, spec.mesh.ny);
    let mesh_ok = (1..=MAX_CELLS_PER_SIDE).contains(&nx) && (1..=MAX_CELLS_PER_SIDE).contains(&ny);
    if !mesh_ok {
        report.push(Violation::new(
            InvalidParameter,
            "mesh",
            format!("mesh nx and ny must lie in 1..={MAX_CELLS_PER_SIDE}, got {nx} x {ny}"),
        ));
    } else if geometry_ok && g.kind == GeometryKind::RectangleWithHole {
        if let Err(e) = generate_mesh(g, nx, ny) {
            report.push(Violation::new(InvalidParameter, "mesh", e.to_string()));
        }
    }

    let newton = spec.kinematics.newton();
    if let Some(0) = newton.max_iters {
        report.push(Violation::new(InvalidParameter, "max_iters", "newton max_iters must be at least 1, got 0"));
    }
    if let Some(t) = newton.rel_tol {
        if !(t > 0.0 && t < 1.0) {
            report.push(Violation::new(InvalidParameter, "rel_tol", format!("newton rel_tol must lie in (0, 1), got {t}")));
        }
    }
    if let Some(t) = newton.abs_tol {
        if !(t >= 0.0) {
            report.push(Violation::new(InvalidParameter, "abs_tol", format!("newton abs_tol must be non-negative, got {t}")));
        }
    }
    if let Some(b) = newton.max_bisections {
        if b > 30 {
            report.push(Violation::new(InvalidParameter, "max_bisections", format!("newton max_bisections must be at most 30, got {b}")));
        }
    }

    if spec.bcs.is_empty() {
        report.push(Violation::new(NoConstraint, "bcs", "no boundary conditions given; the plate is free to translate and rotate"));
    }
    for bc in &spec.bcs {
        if !g.has_edge(bc.edge) {
            report.push(Violation::new(
                BadEdge,
                bc.edge.as_str(),
                format!("boundary condition references edge `{}`, which a plain rectangle does not have", bc.edge),
            ));
        }
        if bc.ux.is_none() && bc.uy.is_none() {
            report.push(Violation::new(
                NoConstraint,
                bc.edge.as_str(),
                format!("boundary condition on edge `{}` constrains neither ux nor uy", bc.edge),
            ));
        }
    }
    for (i, a) in spec.bcs.iter().enumerate() {
        for b in &spec.bcs[i + 1..] {
            if a.edge != b.edge && !adjacent(a.edge, b.edge) {
                continue;
            }
            for (c, va, vb) in [("ux", a.ux, b.ux), ("uy", a.uy, b.uy)] {
                if let (Some(x), Some(y)) = (va, vb) {
                    if x != y {
                        report.push(Violation::new(
                            InvalidParameter,
                            format!("{}/{}", a.edge, b.edge),
                            format!("edges `{}` and `{}` prescribe different {c} ({x} vs {y}) at a shared node", a.edge, b.edge),
                        ));
                    }
                }
            }
        }
    }
    let edges_ok = spec.bcs.iter().all(|bc| g.has_edge(bc.edge));
    if !spec.bcs.is_empty() && edges_ok && geometry_ok && rigid_constraint_rank(spec) < 3 {
        report.push(Violation::new(
            NoConstraint,
            "bcs",
            "boundary conditions leave a rigid-body translation or rotation unconstrained",
        ));
    }

    let mut paths = BTreeSet::new();
    for out in &spec.outputs {
        match out.kind {
            OutputKind::StressComponent if out.component.is_none() => report.push(Violation::new(
                OutputUnderspecified,
                out.kind.as_str(),
                "stress_component output needs `component` (xx, yy or xy)",
            )),
            OutputKind::TractionForce => match out.edge {
                None => report.push(Violation::new(
                    OutputUnderspecified,
                    out.kind.as_str(),
                    "traction_force output needs `edge`",
                )),
                Some(e) if !g.has_edge(e) => report.push(Violation::new(
                    BadEdge,
                    e.as_str(),
                    format!("traction_force output references edge `{e}`, which a plain rectangle does not have"),
                )),
                _ => {}
            },
            _ => {}
        }
        if out.component.is_some() && out.kind != OutputKind::StressComponent {
            report.push(Violation::new(
                InvalidParameter,
                "component",
                format!("`component` only applies to stress_component outputs, not {}", out.kind),
            ));
        }
        if out.edge.is_some() && out.kind != OutputKind::TractionForce {
            report.push(Violation::new(
                InvalidParameter,
                "edge",
                format!("`edge` only applies to traction_force outputs, not {}", out.kind),
            ));
        }
        if out.kind == OutputKind::TractionForce {
            if out.path.is_some() {
                report.push(Violation::new(InvalidParameter, "path", "traction_force outputs are scalars and take no path"));
            }
            if let Some(e) = out.edge {
                if !paths.insert(format!("traction:{e}")) {
                    report.push(Violation::new(InvalidParameter, e.as_str(), format!("traction_force on edge `{e}` requested twice")));
                }
            }
            continue;
        }
        if let Some(p) = &out.path {
            if let Err(msg) = check_output_path(p) {
                report.push(Violation::new(InvalidParameter, p.clone(), msg));
                continue;
            }
        }
        if let Some(p) = out.artifact_path() {
            if !paths.insert(p.clone()) {
                report.push(Violation::new(InvalidParameter, p.clone(), format!("output path `{p}` is used twice")));
            }
        }
    }

    if let Some(m) = material {
        match (spec.kinematics.mode(), m.model) {
            (Kinematics::FiniteStrain, MaterialModel::LinearElastic) => report.warnings.push(
                "finite_strain requested with a linear_elastic material; solving with small-strain kinematics".into(),
            ),
            (Kinematics::SmallStrain, MaterialModel::NeoHookean) => report.warnings.push(
                "small_strain requested with a neo_hookean material; solving its linearization".into(),
            ),
            _ => {}
        }
    }
    report
}
