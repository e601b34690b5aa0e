use serde::{Deserialize, Serialize};

use super::material::MaterialProps;
use super::mesh::{EdgeLabel, Mesh};
use super::solve::{internal_force, DisplacementField, Kinematics};
use super::tensor::Mat2;
use super::FemError;

/// Element-constant Cauchy stress with the plane-strain `σ_zz`.
#[derive(Clone, Debug, PartialEq)]
pub struct StressField {
    pub tensors: Vec<Mat2>,
    pub sigma_zz: Vec<f64>,
    pub kinematics: Kinematics,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StressComponent {
    Xx,
    Yy,
    Xy,
}

impl StressComponent {
    pub fn as_str(&self) -> &'static str {
        match self {
            StressComponent::Xx => "xx",
            StressComponent::Yy => "yy",
            StressComponent::Xy => "xy",
        }
    }
}

pub fn stress_field(u: &DisplacementField, mat: &MaterialProps) -> Result<StressField, FemError> {
    let law = u.law(mat)?;
    let n = u.mesh.num_triangles();
    let mut tensors = Vec::with_capacity(n);
    let mut sigma_zz = Vec::with_capacity(n);
    for tri in 0..n {
        let grad = u.grad(tri);
        let wrap = |e: FemError| match e {
            FemError::InvertedElement { det, .. } => FemError::InvertedElement { element: Some(tri), det },
            other => other,
        };
        tensors.push(law.cauchy(&grad).map_err(wrap)?.sym());
        sigma_zz.push(law.sigma_zz(&grad).map_err(wrap)?);
    }
    Ok(StressField { tensors, sigma_zz, kinematics: u.kinematics })
}

pub fn extract_component(s: &StressField, component: StressComponent) -> Vec<f64> {
    let (i, j) = match component {
        StressComponent::Xx => (0, 0),
        StressComponent::Yy => (1, 1),
        StressComponent::Xy => (0, 1),
    };
    s.tensors.iter().map(|t| t.get(i, j)).collect()
}

/// `sqrt(3/2 s:s)` of the full 3×3 plane-strain stress.
pub fn von_mises_point(sigma: &Mat2, sigma_zz: f64) -> f64 {
    let (sxx, syy, sxy) = (sigma.get(0, 0), sigma.get(1, 1), 0.5 * (sigma.get(0, 1) + sigma.get(1, 0)));
    let mean = (sxx + syy + sigma_zz) / 3.0;
    let (dx, dy, dz) = (sxx - mean, syy - mean, sigma_zz - mean);
    let ss = dx * dx + dy * dy + dz * dz + 2.0 * sxy * sxy;
    (1.5 * ss).max(0.0).sqrt()
}

pub fn von_mises(s: &StressField) -> Vec<f64> {
    s.tensors
        .iter()
        .zip(&s.sigma_zz)
        .map(|(t, zz)| von_mises_point(t, *zz))
        .collect()
}

/// Area-weighted average of element values onto nodes.
pub fn nodal_average(mesh: &Mesh, cell_values: &[f64]) -> Vec<f64> {
    let mut acc = vec![0.0; mesh.num_nodes()];
    let mut weight = vec![0.0; mesh.num_nodes()];
    for (tri, t) in mesh.triangles.iter().enumerate() {
        let a = mesh.signed_area(tri);
        for &n in t {
            acc[n] += a * cell_values[tri];
            weight[n] += a;
        }
    }
    acc.iter().zip(&weight).map(|(v, w)| if *w > 0.0 { v / w } else { 0.0 }).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EdgeForce {
    pub edge: EdgeLabel,
    /// Sum of assembled internal forces over the edge nodes, per constrained
    /// component (zero for an unconstrained component).
    pub reaction: Option<[f64; 2]>,
    /// `∫ σ·n ds` from element stresses (reference configuration, first
    /// Piola stress, for finite strain).
    pub integral: [f64; 2],
    /// Reported force: x-component of the reaction, or of the integral when
    /// the edge carries no prescribed x-displacement.
    pub reported_x: f64,
    pub fallback: bool,
}

pub fn edge_traction_force(
    u: &DisplacementField,
    mat: &MaterialProps,
    edge: EdgeLabel,
) -> Result<EdgeForce, FemError> {
    let mesh = &u.mesh;
    if !mesh.has_label(edge) {
        return Err(FemError::Config(format!("edge `{edge}` does not exist in the mesh")));
    }
    let law = u.law(mat)?;
    let mut integral = [0.0; 2];
    for e in mesh.boundary_edges.iter().filter(|e| e.label == edge) {
        let [a, b] = e.nodes.map(|n| mesh.nodes[n]);
        // Outward normal scaled by the edge length.
        let n_len = [b[1] - a[1], a[0] - b[0]];
        let p = law.first_piola(&u.grad(e.triangle))?;
        let t = p.mul_vec(n_len);
        integral[0] += t[0];
        integral[1] += t[1];
    }

    // An edge carries Dirichlet data in a component when every one of its
    // nodes is constrained in it; corner nodes alone do not count.
    let nodes = mesh.edge_nodes(edge);
    let constrained = |c: usize| nodes.iter().all(|&n| u.dirichlet.get(n, c).is_some());
    let (cx, cy) = (constrained(0), constrained(1));
    let reaction = if !cx && !cy {
        None
    } else {
        let r = internal_force(u, mat)?;
        let sum = |c: usize| if constrained(c) { nodes.iter().map(|&n| r[2 * n + c]).sum() } else { 0.0 };
        Some([sum(0), sum(1)])
    };
    let fallback = !cx;
    let reported_x = match reaction {
        Some(r) if !fallback => r[0],
        _ => integral[0],
    };
    Ok(EdgeForce { edge, reaction, integral, reported_x, fallback })
}
