//! Plane-strain finite-element kernel on linear triangles.

pub mod constitutive;
pub mod export;
pub mod material;
pub mod mesh;
pub mod post;
pub mod solve;
pub mod sparse;
pub mod tensor;

pub use constitutive::{linear_stress, neo_hookean_energy_density, small_strain, Law};
pub use export::{export_field, render_png, ArtifactDescriptor, FieldData, FieldFile};
pub use material::{lame_from_e_nu, youngs_from_lame, MaterialModel, MaterialProps};
pub use mesh::{generate_mesh, BoundaryEdge, EdgeLabel, GeometryKind, GeometrySpec, Mesh};
pub use post::{
    edge_traction_force, extract_component, nodal_average, stress_field, von_mises, von_mises_point,
    EdgeForce, StressComponent, StressField,
};
pub use solve::{
    assemble, internal_force, solve_hyperelastic, solve_hyperelastic_with, solve_linear,
    solve_linear_with, total_energy, BoundaryCondition, Dirichlet, DisplacementField,
    HyperelasticSolution, Kinematics, NewtonParams, NewtonReport,
};
pub use tensor::Mat2;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FemError {
    #[error("invalid material: {0}")]
    InvalidMaterial(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("mesh resolution error: {0}")]
    Resolution(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("rigid-body mode: {0}")]
    RigidMode(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("inverted element{}: det F = {det:e}", element.map(|e| format!(" {e}")).unwrap_or_default())]
    InvertedElement { element: Option<usize>, det: f64 },
    #[error("Newton iteration diverged at load factor {load_factor}: {reason}")]
    Divergence { load_factor: f64, residual_history: Vec<f64>, reason: String },
    #[error("malformed field file: {0}")]
    FieldFormat(String),
    #[error("i/o error: {0}")]
    Io(String),
}
