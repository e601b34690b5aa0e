//! Command implementations behind the `mechagents` binary, plus the HTTP
//! service used by the chat console.

mod config;
mod serve;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{AgentProfile, BackendKind, ChatClient, LlmConfig, ScenarioRound, ScenarioScript, Topology};
use crate::dsl::execute_document;
use crate::fem::{render_png, ArtifactDescriptor};
use crate::orchestrator::{
    run_group_chat, run_scenario_as, run_two_agent, AdminHook, Backends, ConversationLimits, ConversationSetup, SetupError,
    SpeakerPolicy, Termination, Transcript, TranscriptStore,
};
use crate::verify::{run_all_checks, CheckInput, CheckReport};

pub use config::{BackendChoice, LlmSettings, RunConfig};
pub use serve::{bind, router, serve, ServeConfig, ServerState, StartRequest};

pub const TRANSCRIPT_FILE: &str = "transcript.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("cannot bind {0}")]
    Bind(String),
    #[error("{0}")]
    Runtime(String),
}

impl ServiceError {
    /// 2 for configuration problems, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Config(_) | ServiceError::Bind(_) => 2,
            ServiceError::Runtime(_) => 1,
        }
    }
}

/// Machine-readable result of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub conversation_id: String,
    pub topology: Topology,
    pub termination: Termination,
    pub messages: usize,
    pub final_scalars: BTreeMap<String, f64>,
    pub final_checks: Option<CheckReport>,
    /// Artifact PNG paths relative to the output directory.
    pub artifacts: Vec<String>,
}

impl Summary {
    pub fn of(t: &Transcript) -> Self {
        Summary {
            conversation_id: t.conversation_id.clone(),
            topology: t.topology,
            termination: t.termination,
            messages: t.messages.len(),
            final_scalars: t.final_scalars(),
            final_checks: t.final_checks.clone(),
            artifacts: t.final_outcome.iter().flat_map(|o| o.artifacts.iter().map(|a| a.path.clone())).collect(),
        }
    }
}

pub struct RunResult {
    pub transcript: Transcript,
    pub summary: Summary,
}

impl RunResult {
    pub fn exit_code(&self) -> i32 {
        if self.transcript.termination == Termination::Solved {
            0
        } else {
            1
        }
    }
}

fn llm_config(settings: &LlmSettings, limits_timeout: Duration) -> LlmConfig {
    LlmConfig {
        base_url: settings.base_url.clone(),
        model: settings.model.clone(),
        temperature: settings.temperature,
        timeout: limits_timeout,
        ..LlmConfig::default()
    }
}

/// A validated conversation, ready to run on any thread.
pub type Job = Box<dyn FnOnce(&AdminHook, &TranscriptStore) -> Result<Transcript, SetupError> + Send>;

/// What to converse about: a script, or a task for live agents.
#[derive(Clone, Debug)]
pub enum Source {
    Script(ScenarioScript),
    Task { text: String, topology: Topology, llm: LlmSettings, api_key: Option<String> },
}

/// Checks the source and builds the job; errors here are configuration
/// errors.
pub fn prepare(conversation_id: &str, source: Source, limits: ConversationLimits, workdir: &Path) -> Result<Job, ServiceError> {
    limits.validate().map_err(ServiceError::Config)?;
    let id = conversation_id.to_string();
    let workdir = workdir.to_path_buf();
    match source {
        Source::Script(script) => Ok(Box::new(move |admin: &AdminHook, store: &TranscriptStore| {
            run_scenario_as(&id, &script, limits, &workdir, admin, store)
        })),
        Source::Task { text, topology, llm, api_key } => {
            if text.trim().is_empty() {
                return Err(ServiceError::Config("empty task".into()));
            }
            let client = ChatClient::new(llm_config(&llm, limits.per_turn_timeout()), api_key)
                .map_err(|e| ServiceError::Config(e.to_string()))?;
            let setup = ConversationSetup {
                conversation_id: id,
                rounds: vec![ScenarioRound { task: text, reference: None }],
                profiles: match topology {
                    Topology::TwoAgent => AgentProfile::two_agent(BackendKind::Llm),
                    Topology::GroupChat => AgentProfile::group(BackendKind::Llm),
                },
                limits,
                workdir,
            };
            Ok(Box::new(move |admin: &AdminHook, store: &TranscriptStore| {
                let mut backends = Backends::llm(client);
                match topology {
                    Topology::TwoAgent => run_two_agent(setup, &mut backends, admin, store),
                    Topology::GroupChat => run_group_chat(setup, SpeakerPolicy::llm_selected(), &mut backends, admin, store),
                }
            }))
        }
    }
}

/// Runs one conversation and writes the transcript, artifacts and summary
/// to `out_dir`. `api_key` is only used by the llm backend.
pub fn cmd_run(config: &RunConfig, api_key: Option<String>) -> Result<RunResult, ServiceError> {
    config.validate()?;
    let (id, source) = match config.backend {
        BackendChoice::Scripted => {
            let script = config.script()?;
            (format!("scenario-{}", script.name), Source::Script(script))
        }
        BackendChoice::Llm => (
            format!("run-{}", uuid::Uuid::new_v4().simple()),
            Source::Task {
                text: config.task.clone().expect("validated"),
                topology: config.topology.expect("validated"),
                llm: config.llm.clone(),
                api_key,
            },
        ),
    };
    let job = prepare(&id, source, config.limits.clone(), &config.out_dir)?;
    fs::create_dir_all(&config.out_dir)
        .map_err(|e| ServiceError::Config(format!("cannot create {}: {e}", config.out_dir.display())))?;
    let store = TranscriptStore::create(&config.out_dir.join(TRANSCRIPT_FILE))
        .map_err(|e| ServiceError::Runtime(format!("cannot open transcript: {e}")))?;
    let admin = AdminHook::new(config.admin_mode, config.limits.per_turn_timeout());
    let transcript = job(&admin, &store).map_err(|e| ServiceError::Config(e.to_string()))?;
    let summary = Summary::of(&transcript);
    write_summary(&config.out_dir, &summary)?;
    Ok(RunResult { transcript, summary })
}

pub fn write_summary(dir: &Path, summary: &Summary) -> Result<(), ServiceError> {
    let text = serde_json::to_string_pretty(summary).expect("summary serializes");
    fs::write(dir.join(SUMMARY_FILE), text + "\n").map_err(|e| ServiceError::Runtime(format!("cannot write summary: {e}")))
}

pub struct SolveResult {
    /// Outcome text, followed by the check report when requested.
    pub text: String,
    pub exit_code: i32,
}

/// Executes a problem document directly, without agents.
pub fn cmd_solve(spec_path: &Path, out_dir: &Path, check: bool) -> Result<SolveResult, ServiceError> {
    let text = fs::read_to_string(spec_path).map_err(|e| ServiceError::Config(format!("{}: {e}", spec_path.display())))?;
    fs::create_dir_all(out_dir).map_err(|e| ServiceError::Config(format!("cannot create {}: {e}", out_dir.display())))?;
    let (spec, exec) = execute_document(&text, out_dir);
    let mut out = exec.outcome.render();
    let mut ok = exec.outcome.is_success();
    if check {
        let report = run_all_checks(&CheckInput {
            executed: spec.as_ref(),
            reference: None,
            outcome: Some(&exec.outcome),
            state: exec.state.as_ref(),
            workdir: out_dir,
        });
        out.push_str(&report.render());
        ok = ok && report.passed();
    }
    Ok(SolveResult { text: out, exit_code: if ok { 0 } else { 1 } })
}

/// Re-renders a field file to PNG.
pub fn cmd_render(field: &Path, png: &Path) -> Result<ArtifactDescriptor, ServiceError> {
    render_png(field, png).map_err(|e| ServiceError::Runtime(e.to_string()))
}

/// Resolves `rel` inside `root`, refusing absolute paths and `..`.
pub fn safe_join(root: &Path, rel: &str) -> Option<PathBuf> {
    let rel = Path::new(rel);
    let plain = rel.components().all(|c| matches!(c, std::path::Component::Normal(_)));
    (plain && rel.components().next().is_some()).then(|| root.join(rel))
}
