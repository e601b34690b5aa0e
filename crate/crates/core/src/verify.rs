//! Deterministic checks over an execution outcome and its solution state.
//!
//! Checks compare what was executed against a reference problem (the task
//! as posed). When no separate reference exists the executed problem is its
//! own reference.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dsl::{
    resolve_material, ExecutionOutcome, MaterialDb, OutcomeStatus, OutputKind, OutputRequest, ProblemSpec,
    SolvedState,
};
use crate::fem::{
    edge_traction_force, internal_force, extract_component, generate_mesh, nodal_average, stress_field, von_mises, EdgeLabel,
    FieldFile, GeometryKind, MaterialProps, Mesh,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub check_id: String,
    pub verdict: Verdict,
    pub detail: String,
    #[serde(default)]
    pub evidence: BTreeMap<String, f64>,
}

impl CheckResult {
    fn new(id: &str, verdict: Verdict, detail: impl Into<String>) -> Self {
        CheckResult { check_id: id.to_string(), verdict, detail: detail.into(), evidence: BTreeMap::new() }
    }

    fn with(mut self, name: &str, value: f64) -> Self {
        if value.is_finite() {
            self.evidence.insert(name.to_string(), value);
        }
        self
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub results: Vec<CheckResult>,
    /// `pass` iff no result failed.
    pub overall: Verdict,
}

impl CheckReport {
    pub fn new(results: Vec<CheckResult>) -> Self {
        let overall = if results.iter().any(|r| r.verdict == Verdict::Fail) { Verdict::Fail } else { Verdict::Pass };
        CheckReport { results, overall }
    }

    pub fn passed(&self) -> bool {
        self.overall == Verdict::Pass
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckResult> {
        self.results.iter().filter(|r| r.verdict == Verdict::Fail)
    }

    pub fn get(&self, id: &str) -> Option<&CheckResult> {
        self.results.iter().find(|r| r.check_id == id)
    }

    pub fn render(&self) -> String {
        let mut out = format!("check report: {}\n", self.overall);
        for r in &self.results {
            out.push_str(&format!("[{}] {}: {}\n", r.verdict, r.check_id, r.detail));
        }
        out
    }
}

pub mod ids {
    pub const EXECUTION_STATUS: &str = "execution_status";
    pub const GEOMETRY_HOLE: &str = "geometry_hole";
    pub const DIRICHLET: &str = "dirichlet";
    pub const OUTPUT_IDENTITY: &str = "output_identity";
    pub const TRACTION_NONZERO: &str = "traction_nonzero";
    pub const REACTION_BALANCE: &str = "reaction_balance";
}

pub fn check_execution_status(outcome: Option<&ExecutionOutcome>) -> CheckResult {
    match outcome {
        None => CheckResult::new(ids::EXECUTION_STATUS, Verdict::Inconclusive, "nothing has been executed yet"),
        Some(o) if o.is_success() => CheckResult::new(ids::EXECUTION_STATUS, Verdict::Pass, "execution succeeded"),
        Some(o) => CheckResult::new(
            ids::EXECUTION_STATUS,
            Verdict::Fail,
            format!("execution ended with {}: {}", o.status.as_str(), o.codes().join(", ")),
        )
        .with("errors", o.errors.len() as f64),
    }
}

/// Max deviation of the solution from the prescribed values at every
/// constrained node; exact imposition is expected.
pub fn check_dirichlet(state: &SolvedState, bcs: &[crate::fem::BoundaryCondition]) -> CheckResult {
    let mesh = &state.mesh;
    if let Some(bc) = bcs.iter().find(|bc| !mesh.has_label(bc.edge)) {
        return CheckResult::new(
            ids::DIRICHLET,
            Verdict::Inconclusive,
            format!("boundary condition references edge `{}`, which the mesh does not have", bc.edge),
        );
    }
    let mut worst = 0.0f64;
    let mut worst_node = None;
    for bc in bcs {
        for n in mesh.edge_nodes(bc.edge) {
            for (c, g) in [bc.ux, bc.uy].into_iter().enumerate() {
                if let Some(g) = g {
                    let d = (state.field.values[n][c] - g).abs();
                    if !(d <= worst) {
                        worst = if d.is_nan() { f64::INFINITY } else { d };
                        worst_node = Some((n, c, bc.edge));
                    }
                }
            }
        }
    }
    if worst <= 1e-12 {
        CheckResult::new(ids::DIRICHLET, Verdict::Pass, "all prescribed displacements are met exactly").with("max_violation", worst)
    } else {
        let (n, c, edge) = worst_node.expect("a violation has a node");
        let comp = if c == 0 { "ux" } else { "uy" };
        CheckResult::new(
            ids::DIRICHLET,
            Verdict::Fail,
            format!("node {n} on edge `{edge}` misses its prescribed {comp} by {worst:e}"),
        )
        .with("max_violation", worst)
        .with("node", n as f64)
    }
}

/// The reference problem asks for a hole; the mesh must have one.
pub fn check_geometry_hole(mesh: &Mesh, reference: &ProblemSpec) -> CheckResult {
    let Some((c, r)) = reference.geometry.hole() else {
        return CheckResult::new(ids::GEOMETRY_HOLE, Verdict::Inconclusive, "the problem does not ask for a hole");
    };
    if !(r > 0.0) {
        return CheckResult::new(ids::GEOMETRY_HOLE, Verdict::Inconclusive, format!("degenerate hole radius {r}"));
    }
    let inside = mesh
        .nodes
        .iter()
        .filter(|p| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt() < r * (1.0 - 1e-9))
        .count();
    let labeled = mesh.has_label(EdgeLabel::Hole);
    let res = if inside == 0 && labeled {
        CheckResult::new(ids::GEOMETRY_HOLE, Verdict::Pass, format!("hole of radius {r} is present in the mesh"))
    } else {
        let mut why = Vec::new();
        if !labeled {
            why.push("no boundary is labeled `hole`".to_string());
        }
        if inside > 0 {
            why.push(format!("{inside} mesh nodes lie inside the requested hole"));
        }
        CheckResult::new(
            ids::GEOMETRY_HOLE,
            Verdict::Fail,
            format!(
                "the circular hole of radius {r} at ({}, {}) is missing from the geometry: {}",
                c[0],
                c[1],
                why.join("; ")
            ),
        )
    };
    res.with("nodes_inside_hole", inside as f64).with("hole_radius", r)
}

fn recompute(request: &OutputRequest, state: &SolvedState) -> Result<Vec<Vec<f64>>, String> {
    let mesh = &state.mesh;
    match request.kind {
        OutputKind::DisplacementPng => Ok(vec![
            state.field.values.iter().map(|v| v[0]).collect(),
            state.field.values.iter().map(|v| v[1]).collect(),
        ]),
        OutputKind::StressComponent | OutputKind::VonMises => {
            let s = stress_field(&state.field, &state.material).map_err(|e| e.to_string())?;
            let cells = match (request.kind, request.component) {
                (OutputKind::StressComponent, Some(c)) => extract_component(&s, c),
                (OutputKind::StressComponent, None) => return Err("stress request without component".into()),
                _ => von_mises(&s),
            };
            Ok(vec![nodal_average(mesh, &cells)])
        }
        OutputKind::TractionForce => Err("traction is a scalar output".into()),
    }
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Recomputes the requested field from the solution and compares it with
/// the delivered field file.
pub fn check_output_identity(
    outcome: &ExecutionOutcome,
    request: &OutputRequest,
    state: &SolvedState,
    workdir: &Path,
) -> CheckResult {
    let id = ids::OUTPUT_IDENTITY;
    let Some(path) = request.artifact_path() else {
        return CheckResult::new(id, Verdict::Inconclusive, "scalar outputs have no artifact");
    };
    let wanted = request.quantity();
    let Some(artifact) = outcome.artifact(&path) else {
        return CheckResult::new(id, Verdict::Fail, format!("requested {wanted} output `{path}` was not produced"));
    };
    let file = match FieldFile::read(&workdir.join(&artifact.field)) {
        Ok(f) => f,
        Err(e) => return CheckResult::new(id, Verdict::Inconclusive, format!("cannot read `{}`: {e}", artifact.field)),
    };
    let expected = match recompute(request, state) {
        Ok(v) => v,
        Err(e) => return CheckResult::new(id, Verdict::Inconclusive, e),
    };
    if file.num_components() != expected.len() || file.nodes.len() != state.mesh.num_nodes() {
        return CheckResult::new(
            id,
            Verdict::Fail,
            format!(
                "`{path}` holds {} component(s) on {} nodes; {wanted} needs {} on {}",
                file.num_components(),
                file.nodes.len(),
                expected.len(),
                state.mesh.num_nodes()
            ),
        );
    }
    let mut diff = 0.0;
    let mut norm = 0.0;
    for (c, exp) in expected.iter().enumerate() {
        let got = file.component(c);
        diff += got.iter().zip(exp).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        norm += exp.iter().map(|b| b * b).sum::<f64>();
    }
    let rel = if norm > 0.0 { (diff / norm).sqrt() } else { diff.sqrt() };
    let delivered = file.component(0);
    let dmin = delivered.iter().copied().fold(f64::INFINITY, f64::min);
    let emin = expected[0].iter().copied().fold(f64::INFINITY, f64::min);
    let emax = expected[0].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let res = if rel <= 1e-9 {
        CheckResult::new(id, Verdict::Pass, format!("`{path}` matches the recomputed {wanted}"))
    } else {
        let mut detail = format!("`{path}` does not contain {wanted}: relative L2 mismatch {rel:.3e}");
        if dmin >= 0.0 && emin < 0.0 && emax > 0.0 {
            detail.push_str(&format!(
                "; the delivered field is everywhere >= 0 (min {dmin:.3e}) while {wanted} is sign-indefinite \
                 (min {emin:.3e}, max {emax:.3e}), which is what a von Mises field looks like"
            ));
        }
        CheckResult::new(id, Verdict::Fail, detail)
    };
    res.with("relative_mismatch", rel)
        .with("delivered_min", dmin)
        .with("expected_min", emin)
        .with("expected_max", emax)
        .with("expected_norm", l2(&expected[0]))
}

/// A pulled edge must carry a force of the order of `μ · L · g / W`.
pub fn check_traction_nonzero(outcome: &ExecutionOutcome, reference: &ProblemSpec, mat: &MaterialProps, edge: EdgeLabel) -> CheckResult {
    let id = ids::TRACTION_NONZERO;
    let pull = reference
        .bcs
        .iter()
        .filter(|bc| bc.edge == edge)
        .filter_map(|bc| bc.ux)
        .fold(0.0f64, |m, g| if g.abs() > m.abs() { g } else { m });
    let name = format!("traction_force_x_{edge}");
    if pull == 0.0 {
        return CheckResult::new(id, Verdict::Pass, format!("no displacement is prescribed on edge `{edge}`; zero force is legitimate"));
    }
    let Some(&fx) = outcome.scalars.get(&name) else {
        return CheckResult::new(id, Verdict::Inconclusive, format!("outcome reports no {name}"));
    };
    let (w, h) = (reference.geometry.width, reference.geometry.height);
    let length = match edge {
        EdgeLabel::Left | EdgeLabel::Right => h,
        EdgeLabel::Top | EdgeLabel::Bottom => w,
        EdgeLabel::Hole => 2.0 * std::f64::consts::PI * reference.geometry.hole().map(|(_, r)| r).unwrap_or(0.0),
    };
    let threshold = 1e-6 * mat.mu * length * (pull.abs() / w);
    let res = if fx.abs() >= threshold {
        CheckResult::new(id, Verdict::Pass, format!("force on edge `{edge}` is {fx:.5e} N"))
    } else {
        CheckResult::new(
            id,
            Verdict::Fail,
            format!(
                "the total force on the {edge} edge is reported as {fx:e} N, which is implausible when the edge is \
                 displaced by {pull} m. Candidate causes: the stress definition, the force integration over the edge, \
                 or the edge marking (the load or the integral may not act on the {edge} edge)"
            ),
        )
    };
    res.with("force_x", fx).with("threshold", threshold).with("prescribed_ux", pull)
}

/// Equilibrium: left and right reactions cancel when nothing else is loaded.
pub fn check_reaction_balance(state: &SolvedState) -> CheckResult {
    let id = ids::REACTION_BALANCE;
    let force = |e| edge_traction_force(&state.field, &state.material, e);
    let (l, r) = match (force(EdgeLabel::Left), force(EdgeLabel::Right)) {
        (Ok(l), Ok(r)) => (l, r),
        (Err(e), _) | (_, Err(e)) => return CheckResult::new(id, Verdict::Inconclusive, e.to_string()),
    };
    if l.fallback || r.fallback {
        return CheckResult::new(id, Verdict::Inconclusive, "left and right edges are not both displacement-controlled in x");
    }
    let others_loaded = state.field.dirichlet.dofs().iter().enumerate().any(|(dof, p)| {
        let node = dof / 2;
        dof % 2 == 0
            && p.is_some()
            && !state.mesh.edge_nodes(EdgeLabel::Left).contains(&node)
            && !state.mesh.edge_nodes(EdgeLabel::Right).contains(&node)
    });
    if others_loaded {
        return CheckResult::new(id, Verdict::Inconclusive, "other edges carry x constraints; left/right balance does not apply");
    }
    let (fl, fr) = (l.reported_x, r.reported_x);
    let imbalance = (fl + fr).abs();
    let scale = fl.abs().max(fr.abs()).max(1.0);
    // With ux prescribed on both edges the x reactions cancel identically
    // (the internal force sums to zero), so also demand equilibrium at the
    // free dofs. A truncated Newton iterate balances but fails here.
    let free_residual = match internal_force(&state.field, &state.material) {
        Ok(f) => {
            let dofs = state.field.dirichlet.dofs();
            f.iter().zip(dofs).filter(|(_, p)| p.is_none()).map(|(v, _)| v * v).sum::<f64>().sqrt()
        }
        Err(e) => return CheckResult::new(id, Verdict::Inconclusive, e.to_string()),
    };
    let res = if imbalance > 1e-8 * scale {
        CheckResult::new(
            id,
            Verdict::Fail,
            format!("left ({fl:.5e} N) and right ({fr:.5e} N) reactions do not balance; the solution is not in equilibrium"),
        )
    } else if !(free_residual <= 1e-6 * scale) {
        CheckResult::new(
            id,
            Verdict::Fail,
            format!("unbalanced force {free_residual:.3e} N remains at free nodes; the solution is not in equilibrium"),
        )
    } else {
        CheckResult::new(id, Verdict::Pass, "left and right reactions balance and free nodes are in equilibrium")
    };
    res.with("left_x", fl).with("right_x", fr).with("imbalance", imbalance).with("free_residual", free_residual)
}

pub struct CheckInput<'a> {
    /// The problem that was (or would be) executed.
    pub executed: Option<&'a ProblemSpec>,
    /// The task as posed; defaults to `executed`.
    pub reference: Option<&'a ProblemSpec>,
    pub outcome: Option<&'a ExecutionOutcome>,
    pub state: Option<&'a SolvedState>,
    pub workdir: &'a Path,
}

/// Runs every applicable check in a fixed order.
pub fn run_all_checks(input: &CheckInput<'_>) -> CheckReport {
    let mut results = vec![check_execution_status(input.outcome)];
    let Some(reference) = input.reference.or(input.executed) else {
        return CheckReport::new(results);
    };
    let solved = input.outcome.is_some_and(|o| o.status == OutcomeStatus::Success);
    let state = input.state.filter(|_| solved);

    if reference.geometry.kind == GeometryKind::RectangleWithHole {
        let generated;
        let mesh = match (state, input.executed) {
            (Some(s), _) => Some(&*s.mesh),
            (None, Some(exec)) => {
                generated = generate_mesh(&exec.geometry, exec.mesh.nx.clamp(1, 256), exec.mesh.ny.clamp(1, 256)).ok();
                generated.as_ref()
            }
            (None, None) => None,
        };
        results.push(match mesh {
            Some(m) => check_geometry_hole(m, reference),
            None => CheckResult::new(ids::GEOMETRY_HOLE, Verdict::Inconclusive, "no mesh could be built from the submitted geometry"),
        });
    }

    let bcs = input.executed.map(|e| e.bcs.as_slice()).unwrap_or(&reference.bcs);
    results.push(match state {
        Some(s) => check_dirichlet(s, bcs),
        None => CheckResult::new(ids::DIRICHLET, Verdict::Inconclusive, "no solution to check"),
    });

    for request in reference.outputs.iter().filter(|o| o.kind != OutputKind::TractionForce) {
        results.push(match (state, input.outcome) {
            (Some(s), Some(o)) => check_output_identity(o, request, s, input.workdir),
            _ => CheckResult::new(
                ids::OUTPUT_IDENTITY,
                Verdict::Inconclusive,
                format!("no solution to compare `{}` against", request.artifact_path().unwrap_or_default()),
            ),
        });
    }

    for request in reference.outputs.iter().filter(|o| o.kind == OutputKind::TractionForce) {
        let Some(edge) = request.edge else { continue };
        let mat = resolve_material(reference.material.as_ref(), &MaterialDb::bundled())
            .ok()
            .or_else(|| state.map(|s| s.material));
        results.push(match (input.outcome.filter(|_| solved), mat) {
            (Some(o), Some(m)) => check_traction_nonzero(o, reference, &m, edge),
            _ => CheckResult::new(ids::TRACTION_NONZERO, Verdict::Inconclusive, "no force has been computed yet"),
        });
    }

    results.push(match state {
        Some(s) => check_reaction_balance(s),
        None => CheckResult::new(ids::REACTION_BALANCE, Verdict::Inconclusive, "no solution to check"),
    });
    CheckReport::new(results)
}
