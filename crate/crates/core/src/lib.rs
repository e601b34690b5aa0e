pub mod agents;
pub mod dsl;
pub mod fem;
pub mod orchestrator;
pub mod service;
pub mod verify;
