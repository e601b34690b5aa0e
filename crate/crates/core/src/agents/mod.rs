//! Agents: role profiles, the message model and the two response backends
//! (scripted rules and a chat-completion client).

mod fence;
mod llm;
mod profiles;
mod script;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::dsl::{Artifact, ExecutionOutcome};
use crate::verify::CheckReport;

pub use fence::{detect_termination, extract_dsl_blocks, scan_fences, FenceScan, DSL_FENCE_TAG};
pub use llm::{
    build_request, estimate_tokens, llm_respond, BackendError, ChatClient, LlmConfig, LlmReply, WireMessage,
    WireRequest, API_KEY_ENV, DSL_PRIMER,
};
pub use profiles::default_prompt;
pub use script::{bundled_scenario, render_dsl_block, scripted_respond, BUNDLED_SCENARIOS, Rule, ScenarioRound, ScenarioScript, ScriptState, Trigger};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Admin,
    Assistant,
    UserProxy,
    Planner,
    Scientist,
    Engineer,
    Executor,
    Critic,
    Manager,
}

impl Role {
    pub const ALL: [Role; 9] = [
        Role::Admin,
        Role::Assistant,
        Role::UserProxy,
        Role::Planner,
        Role::Scientist,
        Role::Engineer,
        Role::Executor,
        Role::Critic,
        Role::Manager,
    ];

    /// The seven members of the group chat.
    pub const GROUP: [Role; 7] =
        [Role::Admin, Role::Planner, Role::Scientist, Role::Engineer, Role::Executor, Role::Critic, Role::Manager];

    pub fn as_str(&self) -> &'static str {
        match self {
            Role::Admin => "admin",
            Role::Assistant => "assistant",
            Role::UserProxy => "user_proxy",
            Role::Planner => "planner",
            Role::Scientist => "scientist",
            Role::Engineer => "engineer",
            Role::Executor => "executor",
            Role::Critic => "critic",
            Role::Manager => "manager",
        }
    }

    /// Roles whose replies may carry a problem document.
    pub fn writes_dsl(&self) -> bool {
        matches!(self, Role::Assistant | Role::Engineer)
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim().to_ascii_lowercase();
        Role::ALL.into_iter().find(|r| r.as_str() == s).ok_or_else(|| format!("unknown role `{s}`"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    TwoAgent,
    GroupChat,
}

impl fmt::Display for Topology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Topology::TwoAgent => "two_agent",
            Topology::GroupChat => "group_chat",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload", rename_all = "snake_case")]
pub enum Attachment {
    DslDocument(String),
    ExecutionOutcome(ExecutionOutcome),
    CheckReport(CheckReport),
    ArtifactRef(Artifact),
    /// Diagnostics about the message itself, e.g. an unterminated fence.
    LintNote(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Message {
    pub id: String,
    pub seq: u64,
    pub conversation_id: String,
    pub sender: Role,
    pub content: String,
    #[serde(default)]
    pub attachments: Vec<Attachment>,
    /// Logical clock; equal to `seq` so transcripts stay reproducible.
    pub ts: u64,
}

impl Message {
    pub fn outcome(&self) -> Option<&ExecutionOutcome> {
        self.attachments.iter().find_map(|a| match a {
            Attachment::ExecutionOutcome(o) => Some(o),
            _ => None,
        })
    }

    pub fn check_report(&self) -> Option<&CheckReport> {
        self.attachments.iter().find_map(|a| match a {
            Attachment::CheckReport(r) => Some(r),
            _ => None,
        })
    }

    pub fn has_dsl(&self) -> bool {
        !extract_dsl_blocks(self).is_empty()
    }

    pub fn lint_notes(&self) -> impl Iterator<Item = &str> {
        self.attachments.iter().filter_map(|a| match a {
            Attachment::LintNote(n) => Some(n.as_str()),
            _ => None,
        })
    }
}

/// What a backend produced for one turn, before the orchestrator stamps
/// sequence numbers on it.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Reply {
    pub content: String,
    pub attachments: Vec<Attachment>,
}

impl Reply {
    pub fn text(content: impl Into<String>) -> Self {
        Reply { content: content.into(), attachments: Vec::new() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    Scripted,
    Llm,
    /// Human input through the admin hook.
    Human,
    /// Runs documents; never generates text.
    Executor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub role: Role,
    pub system_prompt: String,
    pub backend: BackendKind,
    pub can_execute: bool,
    pub is_human_proxy: bool,
}

impl AgentProfile {
    /// Profile with the default prompt. `agent` is the backend used by
    /// roles that generate text.
    pub fn new(role: Role, agent: BackendKind) -> Self {
        let (backend, can_execute, is_human_proxy) = match role {
            Role::Executor => (BackendKind::Executor, true, false),
            Role::UserProxy => (BackendKind::Executor, true, true),
            Role::Admin => (BackendKind::Human, false, true),
            _ => (agent, false, false),
        };
        AgentProfile { role, system_prompt: default_prompt(role).to_string(), backend, can_execute, is_human_proxy }
    }

    pub fn group(agent: BackendKind) -> Vec<AgentProfile> {
        Role::GROUP.into_iter().map(|r| AgentProfile::new(r, agent)).collect()
    }

    pub fn two_agent(agent: BackendKind) -> Vec<AgentProfile> {
        vec![AgentProfile::new(Role::Assistant, agent), AgentProfile::new(Role::UserProxy, agent)]
    }
}

/// What an agent sees when asked to speak.
#[derive(Clone, Copy, Debug)]
pub struct ConversationView<'a> {
    pub task: &'a str,
    /// Every message after the opening task, oldest first.
    pub history: &'a [Message],
    pub participants: &'a [AgentProfile],
    /// Checks computed for this turn (critic turns only).
    pub checks: Option<&'a CheckReport>,
    /// 1-based task round.
    pub round: usize,
}

impl<'a> ConversationView<'a> {
    pub fn last(&self) -> Option<&'a Message> {
        self.history.last()
    }

    /// Most recent execution outcome in the history.
    pub fn latest_outcome(&self) -> Option<&'a ExecutionOutcome> {
        self.history.iter().rev().find_map(|m| m.outcome())
    }
}
