use std::collections::BTreeMap;

use serde::Deserialize;

use crate::fem::{MaterialModel, MaterialProps};

/// Contents of the bundled `materials.v1` file.
pub const BUNDLED: &str = include_str!("../../data/materials.v1");

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbFile {
    format: String,
    version: u32,
    materials: BTreeMap<String, DbEntry>,
}

#[derive(Clone, Copy, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
struct DbEntry {
    lambda: f64,
    mu: f64,
    model: MaterialModel,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaterialDb {
    entries: BTreeMap<String, MaterialProps>,
}

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum MaterialDbError {
    #[error("material database: {0}")]
    Malformed(String),
    #[error("unknown material `{0}`")]
    Unknown(String),
}

impl MaterialDb {
    pub fn parse(text: &str) -> Result<Self, MaterialDbError> {
        let file: DbFile = serde_json::from_str(text).map_err(|e| MaterialDbError::Malformed(e.to_string()))?;
        if file.format != "mechagents-materials" || file.version != 1 {
            return Err(MaterialDbError::Malformed(format!(
                "expected mechagents-materials version 1, found {} version {}",
                file.format, file.version
            )));
        }
        let mut entries = BTreeMap::new();
        for (name, e) in file.materials {
            let props = MaterialProps::from_lame(e.mu, e.lambda, e.model)
                .map_err(|err| MaterialDbError::Malformed(format!("{name}: {err}")))?;
            entries.insert(name.to_lowercase(), props);
        }
        Ok(MaterialDb { entries })
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED).expect("bundled material database is valid")
    }

    /// Case-insensitive lookup; surrounding whitespace is ignored.
    pub fn lookup(&self, name: &str) -> Result<MaterialProps, MaterialDbError> {
        self.entries
            .get(&name.trim().to_lowercase())
            .copied()
            .ok_or_else(|| MaterialDbError::Unknown(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

pub fn lookup_material(name: &str) -> Result<MaterialProps, MaterialDbError> {
    MaterialDb::bundled().lookup(name)
}
