use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::ServiceError;
use crate::agents::{bundled_scenario, ScenarioScript, Topology};
use crate::orchestrator::{AdminMode, ConversationLimits};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendChoice {
    Scripted,
    Llm,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LlmSettings {
    pub base_url: String,
    pub model: String,
    pub temperature: f64,
}

/// Everything `run` needs. Loadable from JSON; command-line flags
/// override file values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub backend: BackendChoice,
    /// Scenario file, or the name of a bundled scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// Task text for the llm backend.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<String>,
    /// Required for the llm backend; checked against the scenario otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub topology: Option<Topology>,
    pub out_dir: PathBuf,
    #[serde(default)]
    pub llm: LlmSettings,
    #[serde(default)]
    pub limits: ConversationLimits,
    #[serde(default = "default_admin_mode")]
    pub admin_mode: AdminMode,
}

fn default_admin_mode() -> AdminMode {
    AdminMode::AutoSkip
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ServiceError> {
        let text = std::fs::read_to_string(path).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| ServiceError::Config(format!("{}: {e}", path.display())))
    }

    /// Scripted runs: the scenario, resolved from a path or a bundled name.
    pub fn script(&self) -> Result<ScenarioScript, ServiceError> {
        let Some(name) = self.scenario.as_deref() else {
            return Err(ServiceError::Config("the scripted backend needs --scenario".into()));
        };
        let path = Path::new(name);
        let script = if path.exists() {
            ScenarioScript::load(path).map_err(ServiceError::Config)?
        } else if let Some(s) = bundled_scenario(name) {
            s
        } else {
            return Err(ServiceError::Config(format!("scenario `{name}` is neither a file nor a bundled scenario")));
        };
        if let Some(t) = self.topology.filter(|t| *t != script.topology) {
            return Err(ServiceError::Config(format!("scenario `{}` is a {} chat, not {t}", script.name, script.topology)));
        }
        Ok(script)
    }

    pub fn validate(&self) -> Result<(), ServiceError> {
        self.limits.validate().map_err(ServiceError::Config)?;
        match self.backend {
            BackendChoice::Scripted => self.script().map(|_| ()),
            BackendChoice::Llm => {
                if self.llm.base_url.is_empty() || self.llm.model.is_empty() {
                    return Err(ServiceError::Config("the llm backend needs a base url and a model".into()));
                }
                if self.task.as_deref().is_none_or(|t| t.trim().is_empty()) {
                    return Err(ServiceError::Config("the llm backend needs --task".into()));
                }
                if self.topology.is_none() {
                    return Err(ServiceError::Config("the llm backend needs --topology".into()));
                }
                Ok(())
            }
        }
    }
}
