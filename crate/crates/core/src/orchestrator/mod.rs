//! Conversation engines: the two-agent self-correction loop and the
//! manager-led group chat.

mod admin;
mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{
    build_request, detect_termination, extract_dsl_blocks, llm_respond, scan_fences, scripted_respond, AgentProfile,
    Attachment, BackendError, BackendKind, ChatClient, ConversationView, Message, Reply, Role, ScenarioRound,
    ScenarioScript, ScriptState, Topology, WireMessage,
};
use crate::dsl::{execute_document, Execution, ExecutionOutcome, ProblemSpec};
use crate::verify::{run_all_checks, CheckInput, CheckReport};

pub use admin::{AdminAction, AdminHook, AdminMode};
pub use store::{replay, transcript_from_lines, Record, ReplayError, TerminationRecord, TranscriptStore};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConversationLimits {
    /// Turns after the opening task.
    pub max_rounds: usize,
    pub max_consecutive_auto_replies: usize,
    pub per_turn_timeout_secs: f64,
}

impl Default for ConversationLimits {
    fn default() -> Self {
        ConversationLimits { max_rounds: 40, max_consecutive_auto_replies: 10, per_turn_timeout_secs: 300.0 }
    }
}

impl ConversationLimits {
    pub fn validate(&self) -> Result<(), String> {
        if self.max_rounds == 0 || self.max_consecutive_auto_replies == 0 || !(self.per_turn_timeout_secs > 0.0) {
            return Err("conversation limits must all be positive".into());
        }
        Ok(())
    }

    pub fn per_turn_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.per_turn_timeout_secs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Solved,
    MaxRounds,
    HumanAbort,
    BackendFailure,
    ScriptExhausted,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Solved => "solved",
            Termination::MaxRounds => "max_rounds",
            Termination::HumanAbort => "human_abort",
            Termination::BackendFailure => "backend_failure",
            Termination::ScriptExhausted => "script_exhausted",
        })
    }
}

/// A speaker choice that the policy constraints changed.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyEvent {
    /// Seq of the message after which the choice was made.
    pub after_seq: u64,
    pub requested: Option<Role>,
    pub selected: Role,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transcript {
    pub conversation_id: String,
    pub topology: Topology,
    pub messages: Vec<Message>,
    pub termination: Termination,
    pub final_outcome: Option<ExecutionOutcome>,
    pub final_checks: Option<CheckReport>,
    #[serde(default)]
    pub policy_events: Vec<PolicyEvent>,
}

impl Transcript {
    pub fn final_scalars(&self) -> BTreeMap<String, f64> {
        self.final_outcome.as_ref().map(|o| o.scalars.clone()).unwrap_or_default()
    }

    pub fn by(&self, role: Role) -> impl Iterator<Item = &Message> {
        self.messages.iter().filter(move |m| m.sender == role)
    }

    /// Messages carrying an execution outcome, in order.
    pub fn outcomes(&self) -> impl Iterator<Item = (&Message, &ExecutionOutcome)> {
        self.messages.iter().filter_map(|m| m.outcome().map(|o| (m, o)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyMode {
    ScriptedOrder,
    RuleBased,
    LlmSelected,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpeakerPolicy {
    pub mode: PolicyMode,
    /// Speaker list for `scripted_order`.
    pub order: Vec<Role>,
}

impl SpeakerPolicy {
    pub fn rule_based() -> Self {
        SpeakerPolicy { mode: PolicyMode::RuleBased, order: Vec::new() }
    }

    pub fn scripted(order: Vec<Role>) -> Self {
        SpeakerPolicy { mode: PolicyMode::ScriptedOrder, order }
    }

    pub fn llm_selected() -> Self {
        SpeakerPolicy { mode: PolicyMode::LlmSelected, order: Vec::new() }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SetupError {
    #[error("invalid conversation setup: {0}")]
    Invalid(String),
}

/// Text-generating backends available to a conversation.
#[derive(Debug, Default)]
pub struct Backends {
    pub script: Option<ScriptState>,
    pub llm: Option<ChatClient>,
}

impl Backends {
    pub fn scripted(script: ScenarioScript) -> Self {
        Backends { script: Some(ScriptState::new(script)), llm: None }
    }

    pub fn llm(client: ChatClient) -> Self {
        Backends { script: None, llm: Some(client) }
    }

    fn respond(&mut self, profile: &AgentProfile, view: &ConversationView<'_>) -> Result<Reply, BackendError> {
        match profile.backend {
            BackendKind::Scripted => match self.script.as_mut() {
                Some(s) => scripted_respond(s, profile, view),
                None => Err(BackendError::NotConfigured(format!("{} is scripted but no script is loaded", profile.role))),
            },
            BackendKind::Llm => match self.llm.as_ref() {
                Some(c) => llm_respond(c, profile, view).map(|(reply, _)| reply),
                None => Err(BackendError::NotConfigured(format!("{} needs an llm endpoint", profile.role))),
            },
            BackendKind::Human | BackendKind::Executor => {
                Err(BackendError::NotConfigured(format!("{} does not generate replies", profile.role)))
            }
        }
    }

    /// Asks the manager to name the next speaker.
    fn ask_manager(&mut self, manager: &AgentProfile, view: &ConversationView<'_>, candidates: &[Role]) -> Result<String, BackendError> {
        match manager.backend {
            BackendKind::Llm => {
                let client = self.llm.as_ref().ok_or_else(|| BackendError::NotConfigured("manager needs an llm endpoint".into()))?;
                let mut request = build_request(manager, view, client.config())?;
                let names = candidates.iter().map(|r| r.as_str()).collect::<Vec<_>>().join(", ");
                request.messages.push(WireMessage {
                    role: "user".into(),
                    content: format!("Read the conversation above and select the next speaker from [{names}]. Reply with the role name only."),
                });
                client.complete(&request).map(|r| r.content)
            }
            _ => self.respond(manager, view).map(|r| r.content),
        }
    }
}

/// First candidate role named in the manager's reply.
pub fn parse_manager_choice(reply: &str, candidates: &[Role]) -> Option<Role> {
    reply
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter_map(|t| t.parse::<Role>().ok())
        .find(|r| candidates.contains(r))
}

/// Fixed transition rules following the usual group-chat flow.
pub fn rule_based_speaker(history: &[Message], participants: &[AgentProfile]) -> Role {
    let has = |r: Role| participants.iter().any(|p| p.role == r);
    let prefer = |roles: &[Role]| roles.iter().copied().find(|r| has(*r)).unwrap_or(Role::Engineer);
    let Some(last) = history.last() else {
        return prefer(&[Role::Planner, Role::Engineer]);
    };
    match last.sender {
        Role::Admin => {
            let content = last.content.trim();
            if history.len() == 1 || content.starts_with("revise") {
                prefer(&[Role::Planner, Role::Engineer])
            } else if content.is_empty() || content == "approve" {
                let before = history.iter().rev().skip(1).find(|m| m.sender != Role::Admin).map(|m| m.sender);
                if before == Some(Role::Planner) {
                    prefer(&[Role::Scientist, Role::Engineer])
                } else {
                    prefer(&[Role::Engineer])
                }
            } else {
                prefer(&[Role::Engineer])
            }
        }
        Role::Planner => prefer(&[Role::Admin, Role::Scientist, Role::Engineer]),
        Role::Engineer | Role::Assistant if last.has_dsl() => Role::Executor,
        Role::Engineer | Role::Assistant | Role::Executor => prefer(&[Role::Critic, Role::Engineer]),
        Role::Critic => match last.check_report() {
            Some(r) if r.passed() => prefer(&[Role::Admin, Role::Critic]),
            _ => prefer(&[Role::Engineer]),
        },
        Role::Scientist | Role::Manager | Role::UserProxy => prefer(&[Role::Engineer]),
    }
}

/// Applies the executor guard and the consecutive-reply cap.
pub fn enforce_policy(candidate: Role, history: &[Message], limits: &ConversationLimits) -> (Role, Option<String>) {
    let mut chosen = candidate;
    let mut reason = None;
    if chosen == Role::Executor && !history.last().is_some_and(|m| m.has_dsl()) {
        chosen = Role::Critic;
        reason = Some("executor selected without a pending document".to_string());
    }
    let run = history.iter().rev().take_while(|m| m.sender == chosen).count();
    if chosen != Role::Executor && run >= limits.max_consecutive_auto_replies {
        let alt = if chosen == Role::Critic { Role::Engineer } else { Role::Critic };
        reason = Some(format!("{chosen} already spoke {run} times in a row"));
        chosen = alt;
    }
    (chosen, reason)
}

/// Result of running one document.
#[derive(Debug)]
pub struct ExecutorResult {
    pub reply: Reply,
    /// Parsed document, when parsing succeeded.
    pub spec: Option<ProblemSpec>,
    pub execution: Option<Execution>,
}

/// Executes the first document in `m` and renders the outcome as text.
pub fn executor_turn(m: &Message, workdir: &Path) -> ExecutorResult {
    let blocks = extract_dsl_blocks(m);
    let Some(doc) = blocks.first() else {
        return ExecutorResult {
            reply: Reply::text("No problem document found in the last message; nothing was executed."),
            spec: None,
            execution: None,
        };
    };
    let (spec, execution) = execute_document(doc, workdir);
    let mut attachments = vec![Attachment::ExecutionOutcome(execution.outcome.clone())];
    attachments.extend(execution.outcome.artifacts.iter().cloned().map(Attachment::ArtifactRef));
    if blocks.len() > 1 {
        attachments.push(Attachment::LintNote(format!("{} documents found; only the first was executed", blocks.len())));
    }
    ExecutorResult { reply: Reply { content: execution.outcome.render(), attachments }, spec, execution: Some(execution) }
}

/// Everything a conversation needs besides its backends.
#[derive(Clone, Debug)]
pub struct ConversationSetup {
    pub conversation_id: String,
    /// One task per round; the first opens the conversation.
    pub rounds: Vec<ScenarioRound>,
    pub profiles: Vec<AgentProfile>,
    pub limits: ConversationLimits,
    pub workdir: PathBuf,
}

impl ConversationSetup {
    fn profile(&self, role: Role) -> Option<&AgentProfile> {
        self.profiles.iter().find(|p| p.role == role)
    }

    fn check(&self, topology: Topology) -> Result<(), SetupError> {
        let bad = |m: &str| Err(SetupError::Invalid(m.to_string()));
        if self.rounds.is_empty() {
            return bad("no task");
        }
        self.limits.validate().map_err(SetupError::Invalid)?;
        let executors = self.profiles.iter().filter(|p| p.can_execute).count();
        if executors != 1 {
            return bad("exactly one participant must be able to execute documents");
        }
        let count = |r: Role| self.profiles.iter().filter(|p| p.role == r).count();
        if self.profiles.iter().enumerate().any(|(i, p)| self.profiles[..i].iter().any(|q| q.role == p.role)) {
            return bad("duplicate role");
        }
        match topology {
            Topology::TwoAgent => {
                if count(Role::Assistant) != 1 || self.profile(Role::UserProxy).is_none_or(|p| !p.can_execute) {
                    return bad("two-agent chat needs an assistant and an executing user_proxy");
                }
            }
            Topology::GroupChat => {
                if count(Role::Manager) != 1 || self.profile(Role::Executor).is_none_or(|p| !p.can_execute) {
                    return bad("group chat needs one manager and one executor");
                }
                if count(Role::Admin) != 1 {
                    return bad("group chat needs an admin to post the task");
                }
            }
        }
        Ok(())
    }
}

fn view_of<'v>(
    setup: &'v ConversationSetup,
    messages: &'v [Message],
    round: usize,
    checks: Option<&'v CheckReport>,
) -> ConversationView<'v> {
    ConversationView {
        task: &setup.rounds[0].task,
        history: messages.get(1..).unwrap_or(&[]),
        participants: &setup.profiles,
        checks,
        round,
    }
}

struct LastRun {
    doc_seq: u64,
    round: usize,
    spec: Option<ProblemSpec>,
    execution: Option<Execution>,
}

struct Engine<'a> {
    setup: ConversationSetup,
    topology: Topology,
    backends: &'a mut Backends,
    admin: &'a AdminHook,
    store: &'a TranscriptStore,
    messages: Vec<Message>,
    round: usize,
    /// Latest document: seq and parse result.
    last_doc: Option<(u64, Option<ProblemSpec>)>,
    last_run: Option<LastRun>,
    events: Vec<PolicyEvent>,
    io_failed: bool,
}

enum Step {
    Continue,
    Stop(Termination),
}

impl<'a> Engine<'a> {
    fn new(
        setup: ConversationSetup,
        topology: Topology,
        backends: &'a mut Backends,
        admin: &'a AdminHook,
        store: &'a TranscriptStore,
    ) -> Self {
        Engine {
            setup,
            topology,
            backends,
            admin,
            store,
            messages: Vec::new(),
            round: 1,
            last_doc: None,
            last_run: None,
            events: Vec::new(),
            io_failed: false,
        }
    }

    fn post(&mut self, sender: Role, reply: Reply) -> &Message {
        let seq = self.messages.len() as u64;
        let mut attachments = reply.attachments;
        let scan = scan_fences(&reply.content);
        if sender != Role::Executor && sender != Role::UserProxy {
            attachments.extend(scan.blocks.iter().cloned().map(Attachment::DslDocument));
            if let Some(lint) = scan.lint {
                attachments.push(Attachment::LintNote(lint));
            }
        }
        let m = Message {
            id: format!("{}:{seq}", self.setup.conversation_id),
            seq,
            conversation_id: self.setup.conversation_id.clone(),
            sender,
            content: reply.content,
            attachments,
            ts: seq,
        };
        if let Some(doc) = scan.blocks.first().filter(|_| sender.writes_dsl()) {
            let spec = crate::dsl::parse_problem(doc).ok();
            self.last_doc = Some((seq, spec));
        }
        if let Err(e) = self.store.append(&Record::Message(m.clone())) {
            log::error!("transcript append failed: {e}");
            self.io_failed = true;
        }
        self.messages.push(m);
        self.messages.last().expect("just pushed")
    }

    fn turns(&self) -> usize {
        self.messages.len().saturating_sub(1)
    }

    fn reference(&self) -> Option<&ProblemSpec> {
        self.setup.rounds.get(self.round - 1).and_then(|r| r.reference.as_ref())
    }

    /// Checks on the latest document: with its execution when it ran,
    /// before execution otherwise.
    fn current_checks(&self) -> CheckReport {
        let reference = self.reference();
        let run = self.last_run.as_ref().filter(|r| self.last_doc.as_ref().is_none_or(|(s, _)| *s == r.doc_seq));
        let (executed, outcome, state) = match run {
            Some(r) => (
                r.spec.as_ref(),
                r.execution.as_ref().map(|e| &e.outcome),
                r.execution.as_ref().and_then(|e| e.state.as_ref()),
            ),
            None => (self.last_doc.as_ref().and_then(|(_, s)| s.as_ref()), None, None),
        };
        run_all_checks(&CheckInput { executed, reference, outcome, state, workdir: &self.setup.workdir })
    }

    fn latest_outcome(&self) -> Option<&ExecutionOutcome> {
        self.last_run.as_ref().and_then(|r| r.execution.as_ref()).map(|e| &e.outcome)
    }

    fn execute(&mut self, sender: Role) {
        let last = self.messages.last().expect("executor follows a message");
        let doc_seq = last.seq;
        let result = executor_turn(last, &self.setup.workdir);
        if result.execution.is_some() {
            self.last_run = Some(LastRun { doc_seq, round: self.round, spec: result.spec, execution: result.execution });
        }
        self.post(sender, result.reply);
    }

    /// Posts the backend failure and decides whether the run ends.
    fn backend_failed(&mut self, role: Role, err: BackendError) -> Termination {
        let reason = match err {
            BackendError::ScriptExhausted(_) => Termination::ScriptExhausted,
            _ => Termination::BackendFailure,
        };
        self.post(role, Reply::text(format!("@manager {err}")));
        reason
    }

    fn finish(self, termination: Termination, checks: Option<CheckReport>) -> Transcript {
        let final_outcome = self.latest_outcome().cloned();
        let termination = if self.io_failed { Termination::BackendFailure } else { termination };
        let record = TerminationRecord {
            conversation_id: self.setup.conversation_id.clone(),
            topology: self.topology,
            termination,
            final_scalars: final_outcome.as_ref().map(|o| o.scalars.clone()).unwrap_or_default(),
            final_outcome: final_outcome.clone(),
            final_checks: checks.clone(),
            policy_events: self.events.clone(),
        };
        if let Err(e) = self.store.append(&Record::Termination(record)) {
            log::error!("transcript append failed: {e}");
        }
        Transcript {
            conversation_id: self.setup.conversation_id,
            topology: self.topology,
            messages: self.messages,
            termination,
            final_outcome,
            final_checks: checks,
            policy_events: self.events,
        }
    }

    // Two-agent loop.

    fn two_agent_step(&mut self) -> Step {
        let assistant = self.setup.profile(Role::Assistant).expect("checked").clone();
        let reply = match self.backends.respond(&assistant, &view_of(&self.setup, &self.messages, self.round, None)) {
            Ok(r) => r,
            Err(e) => return Step::Stop(self.backend_failed(Role::Assistant, e)),
        };
        let said = self.post(Role::Assistant, reply);
        let terminate = detect_termination(said);
        let has_doc = said.has_dsl();
        if self.io_failed {
            return Step::Stop(Termination::BackendFailure);
        }
        if has_doc {
            self.execute(Role::UserProxy);
            return Step::Continue;
        }
        if terminate {
            let round_ok = self
                .last_run
                .as_ref()
                .filter(|r| r.round == self.round)
                .and_then(|r| r.execution.as_ref())
                .is_some_and(|e| e.outcome.is_success());
            if !round_ok {
                self.post(Role::UserProxy, Reply::text("The task is not solved yet: there is no successful execution for it."));
                return Step::Continue;
            }
            if self.round == self.setup.rounds.len() {
                return Step::Stop(Termination::Solved);
            }
            self.round += 1;
            let task = self.setup.rounds[self.round - 1].task.clone();
            self.post(Role::UserProxy, Reply::text(task));
            return Step::Continue;
        }
        self.post(Role::UserProxy, Reply::text("No problem document to execute. Continue, or reply TERMINATE if the task is solved."));
        Step::Continue
    }

    fn run_two_agent(mut self) -> Transcript {
        let task = self.setup.rounds[0].task.clone();
        self.post(Role::UserProxy, Reply::text(task));
        let termination = loop {
            if self.io_failed {
                break Termination::BackendFailure;
            }
            if self.turns() >= self.setup.limits.max_rounds {
                break Termination::MaxRounds;
            }
            if let Step::Stop(t) = self.two_agent_step() {
                break t;
            }
        };
        self.finish(termination, None)
    }

    // Group chat.

    fn select(&mut self, policy: &SpeakerPolicy, cursor: &mut usize) -> Result<Role, Termination> {
        let after_seq = self.messages.last().map(|m| m.seq).unwrap_or(0);
        let history = self.messages.as_slice();
        let candidate = match policy.mode {
            PolicyMode::ScriptedOrder => {
                let Some(r) = policy.order.get(*cursor).copied() else {
                    self.post(Role::Manager, Reply::text("@manager script exhausted: speaker order has no more entries"));
                    return Err(Termination::ScriptExhausted);
                };
                *cursor += 1;
                r
            }
            PolicyMode::RuleBased => rule_based_speaker(history, &self.setup.profiles),
            PolicyMode::LlmSelected => {
                let manager = self.setup.profile(Role::Manager).expect("checked").clone();
                let candidates: Vec<Role> =
                    self.setup.profiles.iter().map(|p| p.role).filter(|r| *r != Role::Manager).collect();
                let reply = self.backends.ask_manager(&manager, &view_of(&self.setup, &self.messages, self.round, None), &candidates);
                let history = self.messages.as_slice();
                match reply.as_deref().ok().and_then(|t| parse_manager_choice(t, &candidates)) {
                    Some(r) => r,
                    None => {
                        let fallback = rule_based_speaker(history, &self.setup.profiles);
                        let why = match reply {
                            Ok(t) => format!("unparseable manager reply `{}`; rule-based fallback", t.trim()),
                            Err(e) => format!("manager failed ({e}); rule-based fallback"),
                        };
                        self.events.push(PolicyEvent { after_seq, requested: None, selected: fallback, reason: why });
                        fallback
                    }
                }
            }
        };
        let (chosen, reason) = enforce_policy(candidate, &self.messages, &self.setup.limits);
        let chosen = if self.setup.profile(chosen).is_some() { chosen } else { Role::Engineer };
        if let Some(reason) = reason {
            log::warn!("speaker policy: {reason}; selecting {chosen} instead of {candidate}");
            self.events.push(PolicyEvent { after_seq, requested: Some(candidate), selected: chosen, reason });
        }
        Ok(chosen)
    }

    /// Accepts a termination signal only when the latest execution
    /// succeeded and the checks pass.
    fn try_terminate(&mut self) -> Option<CheckReport> {
        let checks = self.current_checks();
        let ok = self.latest_outcome().is_some_and(|o| o.is_success()) && checks.passed();
        if ok {
            return Some(checks);
        }
        let why = if checks.passed() {
            "there is no successful execution".to_string()
        } else {
            let failed: Vec<&str> = checks.failures().map(|c| c.check_id.as_str()).collect();
            format!("failing checks: {}", failed.join(", "))
        };
        self.post(Role::Manager, Reply { content: format!("Termination rejected: {why}."), attachments: vec![Attachment::CheckReport(checks)] });
        None
    }

    fn run_group_chat(mut self, policy: SpeakerPolicy) -> Transcript {
        let task = self.setup.rounds[0].task.clone();
        self.post(Role::Admin, Reply::text(task));
        let mut cursor = 0;
        let mut failures = 0;
        let (termination, checks) = loop {
            if self.io_failed {
                break (Termination::BackendFailure, None);
            }
            if self.turns() >= self.setup.limits.max_rounds {
                break (Termination::MaxRounds, None);
            }
            let speaker = match self.select(&policy, &mut cursor) {
                Ok(r) => r,
                Err(t) => break (t, None),
            };
            match speaker {
                Role::Executor => {
                    self.execute(Role::Executor);
                    failures = 0;
                }
                Role::Admin => {
                    let prompt = if self.messages.last().is_some_and(|m| m.sender == Role::Planner) {
                        "approve plan?"
                    } else {
                        "provide feedback, or skip"
                    };
                    let after_pass = self
                        .messages
                        .last()
                        .is_some_and(|m| m.sender == Role::Critic && m.check_report().is_some_and(|r| r.passed()));
                    let action = self.admin.admin_input(prompt);
                    let content = action.as_ref().map(|a| a.content()).unwrap_or_default();
                    self.post(Role::Admin, Reply::text(content));
                    match action {
                        Some(AdminAction::Abort) => break (Termination::HumanAbort, None),
                        None | Some(AdminAction::Approve) if after_pass => {
                            if let Some(c) = self.try_terminate() {
                                break (Termination::Solved, Some(c));
                            }
                        }
                        _ => {
                            if detect_termination(self.messages.last().expect("posted")) {
                                if let Some(c) = self.try_terminate() {
                                    break (Termination::Solved, Some(c));
                                }
                            }
                        }
                    }
                }
                role => {
                    let profile = self.setup.profile(role).expect("selected from participants").clone();
                    let checks = (role == Role::Critic).then(|| self.current_checks());
                    match self.backends.respond(&profile, &view_of(&self.setup, &self.messages, self.round, checks.as_ref())) {
                        Ok(mut reply) => {
                            failures = 0;
                            if let Some(c) = checks {
                                reply.attachments.push(Attachment::CheckReport(c));
                            }
                            let m = self.post(role, reply);
                            if role == Role::Critic && detect_termination(m) {
                                if let Some(c) = self.try_terminate() {
                                    break (Termination::Solved, Some(c));
                                }
                            }
                        }
                        Err(e @ BackendError::ScriptExhausted(_)) => break (self.backend_failed(role, e), None),
                        Err(e) => {
                            self.backend_failed(role, e);
                            failures += 1;
                            if failures >= 3 {
                                break (Termination::BackendFailure, None);
                            }
                        }
                    }
                }
            }
        };
        let checks = checks.or_else(|| self.last_doc.is_some().then(|| self.current_checks()));
        self.finish(termination, checks)
    }
}

pub fn run_two_agent(
    setup: ConversationSetup,
    backends: &mut Backends,
    admin: &AdminHook,
    store: &TranscriptStore,
) -> Result<Transcript, SetupError> {
    setup.check(Topology::TwoAgent)?;
    Ok(Engine::new(setup, Topology::TwoAgent, backends, admin, store).run_two_agent())
}

pub fn run_group_chat(
    setup: ConversationSetup,
    policy: SpeakerPolicy,
    backends: &mut Backends,
    admin: &AdminHook,
    store: &TranscriptStore,
) -> Result<Transcript, SetupError> {
    setup.check(Topology::GroupChat)?;
    if policy.mode == PolicyMode::ScriptedOrder && policy.order.is_empty() {
        return Err(SetupError::Invalid("scripted_order needs a speaker order".into()));
    }
    Ok(Engine::new(setup, Topology::GroupChat, backends, admin, store).run_group_chat(policy))
}

/// Replays a scripted scenario. Group chats use the script's speaker order
/// when it has one, rule-based selection otherwise.
pub fn run_scenario(
    script: &ScenarioScript,
    limits: ConversationLimits,
    workdir: &Path,
    admin: &AdminHook,
    store: &TranscriptStore,
) -> Result<Transcript, SetupError> {
    run_scenario_as(&format!("scenario-{}", script.name), script, limits, workdir, admin, store)
}

/// [`run_scenario`] under a caller-chosen conversation id.
pub fn run_scenario_as(
    conversation_id: &str,
    script: &ScenarioScript,
    limits: ConversationLimits,
    workdir: &Path,
    admin: &AdminHook,
    store: &TranscriptStore,
) -> Result<Transcript, SetupError> {
    let setup = ConversationSetup {
        conversation_id: conversation_id.to_string(),
        rounds: script.rounds.clone(),
        profiles: match script.topology {
            Topology::TwoAgent => AgentProfile::two_agent(BackendKind::Scripted),
            Topology::GroupChat => AgentProfile::group(BackendKind::Scripted),
        },
        limits,
        workdir: workdir.to_path_buf(),
    };
    let mut backends = Backends::scripted(script.clone());
    match script.topology {
        Topology::TwoAgent => run_two_agent(setup, &mut backends, admin, store),
        Topology::GroupChat => {
            let policy = if script.speaker_order.is_empty() {
                SpeakerPolicy::rule_based()
            } else {
                SpeakerPolicy::scripted(script.speaker_order.clone())
            };
            run_group_chat(setup, policy, &mut backends, admin, store)
        }
    }
}
