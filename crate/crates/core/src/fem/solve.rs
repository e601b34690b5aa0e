use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::constitutive::Law;
use super::material::{MaterialModel, MaterialProps};
use super::mesh::{EdgeLabel, Mesh};
use super::sparse::{conjugate_gradient, CsrMatrix};
use super::tensor::Mat2;
use super::FemError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kinematics {
    SmallStrain,
    FiniteStrain,
}

impl std::fmt::Display for Kinematics {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Kinematics::SmallStrain => "small_strain",
            Kinematics::FiniteStrain => "finite_strain",
        })
    }
}

/// Prescribed displacement components on one labeled edge.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryCondition {
    pub edge: EdgeLabel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ux: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uy: Option<f64>,
}

impl BoundaryCondition {
    pub fn fixed(edge: EdgeLabel) -> Self {
        BoundaryCondition { edge, ux: Some(0.0), uy: Some(0.0) }
    }

    pub fn new(edge: EdgeLabel, ux: Option<f64>, uy: Option<f64>) -> Self {
        BoundaryCondition { edge, ux, uy }
    }
}

/// Per-dof prescribed values (`2 * node + component`).
#[derive(Clone, Debug, PartialEq)]
pub struct Dirichlet {
    values: Vec<Option<f64>>,
}

impl Dirichlet {
    pub fn empty(num_nodes: usize) -> Self {
        Dirichlet { values: vec![None; 2 * num_nodes] }
    }

    pub fn from_bcs(mesh: &Mesh, bcs: &[BoundaryCondition]) -> Result<Self, FemError> {
        let mut d = Dirichlet::empty(mesh.num_nodes());
        for bc in bcs {
            if bc.ux.is_none() && bc.uy.is_none() {
                return Err(FemError::Config(format!(
                    "boundary condition on edge `{}` constrains no component",
                    bc.edge
                )));
            }
            let nodes = mesh.edge_nodes(bc.edge);
            if nodes.is_empty() {
                return Err(FemError::Config(format!("edge `{}` does not exist in the mesh", bc.edge)));
            }
            for n in nodes {
                for (c, v) in [bc.ux, bc.uy].into_iter().enumerate() {
                    if let Some(v) = v {
                        d.set(n, c, v)?;
                    }
                }
            }
        }
        Ok(d)
    }

    /// Prescribes `f(x)` on every node in `nodes`.
    pub fn from_fn(mesh: &Mesh, nodes: &[usize], f: impl Fn([f64; 2]) -> [f64; 2]) -> Self {
        let mut d = Dirichlet::empty(mesh.num_nodes());
        for &n in nodes {
            let v = f(mesh.nodes[n]);
            d.values[2 * n] = Some(v[0]);
            d.values[2 * n + 1] = Some(v[1]);
        }
        d
    }

    pub fn set(&mut self, node: usize, comp: usize, v: f64) -> Result<(), FemError> {
        let slot = &mut self.values[2 * node + comp];
        match *slot {
            Some(old) if old != v => Err(FemError::Config(format!(
                "conflicting prescribed values {old} and {v} for component {} of node {node}",
                if comp == 0 { "x" } else { "y" }
            ))),
            _ => {
                *slot = Some(v);
                Ok(())
            }
        }
    }

    pub fn get(&self, node: usize, comp: usize) -> Option<f64> {
        self.values[2 * node + comp]
    }

    pub fn dofs(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn is_empty(&self) -> bool {
        self.values.iter().all(Option::is_none)
    }

    pub fn scaled(&self, s: f64) -> Vec<Option<f64>> {
        self.values.iter().map(|v| v.map(|g| g * s)).collect()
    }

    /// Fails when the constraints leave a rigid translation or rotation free.
    pub fn check_rigid_modes(&self, mesh: &Mesh) -> Result<(), FemError> {
        // Rigid motion u = (a - θy, b + θx); each constrained dof is a row of
        // a linear system in (a, b, θ) that must have full rank.
        let mut gram = [[0.0f64; 3]; 3];
        let scale = mesh.width.max(mesh.height);
        for (dof, v) in self.values.iter().enumerate() {
            if v.is_none() {
                continue;
            }
            let p = mesh.nodes[dof / 2];
            let row = if dof % 2 == 0 {
                [1.0, 0.0, -p[1] / scale]
            } else {
                [0.0, 1.0, p[0] / scale]
            };
            for i in 0..3 {
                for j in 0..3 {
                    gram[i][j] += row[i] * row[j];
                }
            }
        }
        let det = gram[0][0] * (gram[1][1] * gram[2][2] - gram[1][2] * gram[2][1])
            - gram[0][1] * (gram[1][0] * gram[2][2] - gram[1][2] * gram[2][0])
            + gram[0][2] * (gram[1][0] * gram[2][1] - gram[1][1] * gram[2][0]);
        let trace = gram[0][0] + gram[1][1] + gram[2][2];
        if trace == 0.0 || det <= 1e-12 * trace.powi(3) {
            return Err(FemError::RigidMode(
                "boundary conditions leave a rigid-body translation or rotation unconstrained".into(),
            ));
        }
        Ok(())
    }
}

/// Nodal displacement solution on a mesh.
#[derive(Clone, Debug, PartialEq)]
pub struct DisplacementField {
    pub mesh: Arc<Mesh>,
    pub values: Vec<[f64; 2]>,
    pub kinematics: Kinematics,
    pub dirichlet: Dirichlet,
}

impl DisplacementField {
    pub fn zeros(mesh: Arc<Mesh>, kinematics: Kinematics) -> Self {
        let n = mesh.num_nodes();
        DisplacementField {
            mesh,
            values: vec![[0.0; 2]; n],
            kinematics,
            dirichlet: Dirichlet::empty(n),
        }
    }

    pub fn flat(&self) -> Vec<f64> {
        self.values.iter().flat_map(|v| *v).collect()
    }

    pub fn grad(&self, tri: usize) -> Mat2 {
        element_grad(&self.mesh, tri, &self.values)
    }

    /// Discrete L2 norm `sqrt(Σ |u_i|²)` over nodes.
    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v[0] * v[0] + v[1] * v[1]).sum::<f64>().sqrt()
    }

    pub fn l2_distance(&self, other: &DisplacementField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().flatten().all(|v| v.is_finite())
    }

    pub fn law(&self, mat: &MaterialProps) -> Result<Law, FemError> {
        match (self.kinematics, mat.model) {
            (Kinematics::SmallStrain, MaterialModel::LinearElastic) => Ok(Law::for_material(mat)),
            (Kinematics::FiniteStrain, MaterialModel::NeoHookean) => Ok(Law::for_material(mat)),
            (k, m) => Err(FemError::Config(format!(
                "{k} displacement field cannot be evaluated with a {m} material"
            ))),
        }
    }
}

pub(crate) fn element_grad(mesh: &Mesh, tri: usize, u: &[[f64; 2]]) -> Mat2 {
    let (g, _) = mesh.shape_gradients(tri);
    let t = mesh.triangles[tri];
    let mut m = Mat2::ZERO;
    for (a, &node) in t.iter().enumerate() {
        for i in 0..2 {
            for j in 0..2 {
                m.0[i][j] += u[node][i] * g[a][j];
            }
        }
    }
    m
}

fn with_element(e: FemError, tri: usize) -> FemError {
    match e {
        FemError::InvertedElement { det, .. } => FemError::InvertedElement { element: Some(tri), det },
        other => other,
    }
}

/// Internal nodal force vector `∫ P : ∇N` and optionally the tangent.
pub fn assemble(
    mesh: &Mesh,
    law: &Law,
    u: &[[f64; 2]],
    mut tangent: Option<&mut CsrMatrix>,
) -> Result<Vec<f64>, FemError> {
    let mut r = vec![0.0; 2 * mesh.num_nodes()];
    if let Some(k) = tangent.as_deref_mut() {
        k.clear();
    }
    for tri in 0..mesh.num_triangles() {
        let (g, area) = mesh.shape_gradients(tri);
        let t = mesh.triangles[tri];
        let grad = element_grad(mesh, tri, u);
        let p = law.first_piola(&grad).map_err(|e| with_element(e, tri))?;
        for a in 0..3 {
            for i in 0..2 {
                r[2 * t[a] + i] += area * (p.get(i, 0) * g[a][0] + p.get(i, 1) * g[a][1]);
            }
        }
        if let Some(k) = tangent.as_deref_mut() {
            let c = law.tangent(&grad).map_err(|e| with_element(e, tri))?;
            for a in 0..3 {
                for i in 0..2 {
                    for b in 0..3 {
                        for kk in 0..2 {
                            let mut v = 0.0;
                            for jj in 0..2 {
                                for l in 0..2 {
                                    v += c[i][jj][kk][l] * g[a][jj] * g[b][l];
                                }
                            }
                            k.add(2 * t[a] + i, 2 * t[b] + kk, area * v);
                        }
                    }
                }
            }
        }
    }
    Ok(r)
}

/// Total stored energy `Σ_e |e| ψ(∇u_e)`.
pub fn total_energy(mesh: &Mesh, law: &Law, u: &[[f64; 2]]) -> Result<f64, FemError> {
    (0..mesh.num_triangles()).try_fold(0.0, |acc, tri| {
        let (_, area) = mesh.shape_gradients(tri);
        let psi = law.energy(&element_grad(mesh, tri, u)).map_err(|e| with_element(e, tri))?;
        Ok(acc + area * psi)
    })
}

/// Relative residual bound every linear solve must meet.
pub const LINEAR_RESIDUAL_BOUND: f64 = 1e-10;
const CG_TOLERANCE: f64 = 1e-12;

fn cg_budget(n: usize) -> usize {
    4 * n + 200
}

fn solve_eliminated(
    k: &mut CsrMatrix,
    mut rhs: Vec<f64>,
    prescribed: &[Option<f64>],
) -> Result<Vec<f64>, FemError> {
    k.eliminate(prescribed, &mut rhs);
    let mut x: Vec<f64> = prescribed.iter().map(|p| p.unwrap_or(0.0)).collect();
    let stats = conjugate_gradient(k, &rhs, &mut x, CG_TOLERANCE, cg_budget(k.n))?;
    if stats.relative_residual > LINEAR_RESIDUAL_BOUND {
        return Err(FemError::Numerical(format!(
            "linear solve stalled at relative residual {:e}",
            stats.relative_residual
        )));
    }
    for (xi, p) in x.iter_mut().zip(prescribed) {
        if let Some(g) = p {
            *xi = *g;
        }
    }
    Ok(x)
}

fn unflatten(x: &[f64]) -> Vec<[f64; 2]> {
    x.chunks_exact(2).map(|c| [c[0], c[1]]).collect()
}

/// Small-strain linear elasticity with edge boundary conditions.
pub fn solve_linear(
    mesh: Arc<Mesh>,
    mat: &MaterialProps,
    bcs: &[BoundaryCondition],
) -> Result<DisplacementField, FemError> {
    let dirichlet = Dirichlet::from_bcs(&mesh, bcs)?;
    solve_linear_with(mesh, mat, dirichlet)
}

/// Small-strain linear elasticity with arbitrary per-dof Dirichlet data.
/// A Neo-Hookean material is solved with its linearization (same Lamé pair).
pub fn solve_linear_with(
    mesh: Arc<Mesh>,
    mat: &MaterialProps,
    dirichlet: Dirichlet,
) -> Result<DisplacementField, FemError> {
    dirichlet.check_rigid_modes(&mesh)?;
    let law = Law::Linear { mu: mat.mu, lambda: mat.lambda };
    let mut k = CsrMatrix::for_mesh(&mesh);
    let zeros = vec![[0.0; 2]; mesh.num_nodes()];
    assemble(&mesh, &law, &zeros, Some(&mut k))?;
    let rhs = vec![0.0; k.n];
    let x = solve_eliminated(&mut k, rhs, dirichlet.dofs())?;
    Ok(DisplacementField {
        values: unflatten(&x),
        mesh,
        kinematics: Kinematics::SmallStrain,
        dirichlet,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NewtonParams {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_iters: usize,
    pub load_stepping: bool,
    pub max_bisections: usize,
}

impl Default for NewtonParams {
    fn default() -> Self {
        NewtonParams {
            rel_tol: 1e-8,
            abs_tol: 1e-10,
            max_iters: 25,
            load_stepping: true,
            max_bisections: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NewtonReport {
    /// Load factors at which Newton converged, ending at 1.
    pub load_steps: Vec<f64>,
    pub total_iterations: usize,
    pub bisections: usize,
    /// Residual norms of the final load step, starting with the reference
    /// residual of the step.
    pub residual_history: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HyperelasticSolution {
    pub field: DisplacementField,
    pub report: NewtonReport,
}

struct StepOutcome {
    u: Vec<f64>,
    iterations: usize,
    history: Vec<f64>,
}

fn free_norm(r: &[f64], prescribed: &[Option<f64>]) -> f64 {
    r.iter()
        .zip(prescribed)
        .filter(|(_, p)| p.is_none())
        .map(|(v, _)| v * v)
        .sum::<f64>()
        .sqrt()
}

fn newton_step(
    mesh: &Mesh,
    law: &Law,
    start: &[f64],
    target: &[Option<f64>],
    params: &NewtonParams,
    load: f64,
) -> Result<StepOutcome, FemError> {
    let mut u = start.to_vec();
    let mut k = CsrMatrix::for_mesh(mesh);
    let mut history = Vec::new();
    let mut r_ref = 0.0;
    for it in 0..=params.max_iters {
        let r = assemble(mesh, law, &unflatten(&u), Some(&mut k))?;
        let delta_d: Vec<Option<f64>> = target
            .iter()
            .zip(&u)
            .map(|(t, ui)| t.map(|g| if it == 0 { g - ui } else { 0.0 }))
            .collect();
        let mut rhs: Vec<f64> = r.iter().map(|v| -v).collect();
        if it == 0 {
            let moves = delta_d.iter().any(|d| matches!(d, Some(v) if *v != 0.0));
            let mut probe = rhs.clone();
            let mut k_probe = k.clone();
            k_probe.eliminate(&delta_d, &mut probe);
            r_ref = free_norm(&probe, target);
            history.push(r_ref);
            if !moves && r_ref <= params.abs_tol {
                return Ok(StepOutcome { u, iterations: 0, history });
            }
            if r_ref == 0.0 {
                r_ref = f64::MIN_POSITIVE;
            }
        } else {
            let norm = free_norm(&r, target);
            history.push(norm);
            if norm <= params.rel_tol * r_ref || norm <= params.abs_tol {
                return Ok(StepOutcome { u, iterations: it, history });
            }
            if !norm.is_finite() || norm > 1e8 * r_ref {
                return Err(divergence(load, history, "residual blew up"));
            }
        }
        if it == params.max_iters {
            break;
        }
        let delta = solve_eliminated(&mut k, std::mem::take(&mut rhs), &delta_d)
            .map_err(|e| match e {
                FemError::Numerical(msg) => divergence(load, history.clone(), &msg),
                other => other,
            })?;
        for (ui, di) in u.iter_mut().zip(&delta) {
            *ui += di;
        }
    }
    Err(divergence(
        load,
        history,
        &format!("no convergence within {} Newton iterations", params.max_iters),
    ))
}

fn divergence(load: f64, history: Vec<f64>, reason: &str) -> FemError {
    FemError::Divergence { load_factor: load, residual_history: history, reason: reason.to_string() }
}

/// Finite-strain compressible Neo-Hookean solve by Newton iteration with
/// bisection load stepping on failure.
pub fn solve_hyperelastic(
    mesh: Arc<Mesh>,
    mat: &MaterialProps,
    bcs: &[BoundaryCondition],
    params: &NewtonParams,
) -> Result<HyperelasticSolution, FemError> {
    let dirichlet = Dirichlet::from_bcs(&mesh, bcs)?;
    solve_hyperelastic_with(mesh, mat, dirichlet, params)
}

pub fn solve_hyperelastic_with(
    mesh: Arc<Mesh>,
    mat: &MaterialProps,
    dirichlet: Dirichlet,
    params: &NewtonParams,
) -> Result<HyperelasticSolution, FemError> {
    if mat.model != MaterialModel::NeoHookean {
        return Err(FemError::Config(format!(
            "finite-strain solve needs a neo_hookean material, got {}",
            mat.model
        )));
    }
    if params.max_iters == 0 {
        return Err(FemError::Config("Newton max_iters must be at least 1".into()));
    }
    dirichlet.check_rigid_modes(&mesh)?;
    let law = Law::for_material(mat);
    let mut u = vec![0.0; 2 * mesh.num_nodes()];
    let mut report = NewtonReport::default();
    let mut done = 0.0f64;
    let mut step = 1.0f64;
    while done < 1.0 {
        let load = (done + step).min(1.0);
        let target = dirichlet.scaled(load);
        match newton_step(&mesh, &law, &u, &target, params, load) {
            Ok(out) => {
                u = out.u;
                done = load;
                report.total_iterations += out.iterations;
                report.load_steps.push(load);
                report.residual_history = out.history;
            }
            Err(e @ (FemError::Divergence { .. } | FemError::InvertedElement { .. })) => {
                if !params.load_stepping || report.bisections >= params.max_bisections {
                    return Err(e);
                }
                report.bisections += 1;
                step *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
    let mut values = unflatten(&u);
    for (n, v) in values.iter_mut().enumerate() {
        for (c, slot) in v.iter_mut().enumerate() {
            if let Some(g) = dirichlet.get(n, c) {
                *slot = g;
            }
        }
    }
    Ok(HyperelasticSolution {
        field: DisplacementField { mesh, values, kinematics: Kinematics::FiniteStrain, dirichlet },
        report,
    })
}

/// Assembled internal force of a solved field (reactions at constrained dofs).
pub fn internal_force(u: &DisplacementField, mat: &MaterialProps) -> Result<Vec<f64>, FemError> {
    let law = u.law(mat)?;
    assemble(&u.mesh, &law, &u.values, None)
}

/// Nodes of `label` carrying at least one prescribed component.
pub fn constrained_edge_nodes(u: &DisplacementField, label: EdgeLabel) -> Vec<usize> {
    u.mesh
        .edge_nodes(label)
        .into_iter()
        .filter(|&n| u.dirichlet.get(n, 0).is_some() || u.dirichlet.get(n, 1).is_some())
        .collect()
}
