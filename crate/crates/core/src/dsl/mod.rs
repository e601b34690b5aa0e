//! Declarative problem documents: parsing, validation, the material
//! database and execution through the FEM kernel.

pub mod execute;
pub mod materials;
pub mod spec;
pub mod validate;

pub use execute::{
    execute_detailed, execute_document, execute_problem, sig6, Artifact, Execution, ExecutionOutcome, OutcomeError,
    OutcomeStatus, SolvedState,
};
pub use materials::{lookup_material, MaterialDb, MaterialDbError};
pub use spec::{
    parse_problem, print_problem, KinematicsDetail, KinematicsSpec, MaterialRef, MeshSize, NewtonSettings,
    OutputKind, OutputRequest, ParseError, ParseErrorKind, ProblemSpec,
};
pub use validate::{resolve_material, validate, validate_with, ValidationReport, Violation, ViolationCode};
