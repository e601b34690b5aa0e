//! Deterministic rule-table agents used to replay scenarios.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AgentProfile, BackendError, ConversationView, Reply, Role, Topology, DSL_FENCE_TAG};
use crate::dsl::{sig6, OutcomeStatus, ProblemSpec};
use crate::verify::{CheckReport, Verdict};

/// Predicate over the last message (and, for critic turns, the checks
/// computed for the turn). Every field that is set must match.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Trigger {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub round: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sender: Option<Role>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<OutcomeStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_check: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contains: Option<String>,
}

impl Trigger {
    pub fn fires(&self, view: &ConversationView<'_>) -> bool {
        let last = view.last();
        let outcome = last.and_then(|m| m.outcome());
        let report: Option<&CheckReport> = view.checks.or_else(|| last.and_then(|m| m.check_report()));
        self.round.is_none_or(|r| r == view.round)
            && self.sender.is_none_or(|s| last.map(|m| m.sender) == Some(s))
            && self.status.is_none_or(|s| outcome.map(|o| o.status) == Some(s))
            && self.code.as_deref().is_none_or(|c| outcome.is_some_and(|o| o.codes().contains(&c)))
            && self.verdict.is_none_or(|v| report.map(|r| r.overall) == Some(v))
            && self.failed_check.as_deref().is_none_or(|id| report.is_some_and(|r| r.failures().any(|c| c.check_id == id)))
            && self.contains.as_deref().is_none_or(|t| last.is_some_and(|m| m.content.contains(t)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rule {
    pub role: Role,
    #[serde(default)]
    pub when: Trigger,
    /// Reply text. Placeholders: `{dsl}`, `{failures}`, `{report}`,
    /// `{scalar:NAME}`.
    pub say: String,
    /// Problem document, pretty-printed into one fenced block.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsl: Option<serde_json::Value>,
    /// Raw document text, for documents that are not valid JSON.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsl_text: Option<String>,
    /// Reusable rules are never consumed.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub repeat: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRound {
    pub task: String,
    /// Ground-truth problem for the checks; absent means the executed
    /// document is its own reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<ProblemSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioScript {
    pub name: String,
    pub topology: Topology,
    /// Speaker order for `scripted_order` group chats.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub speaker_order: Vec<Role>,
    pub rounds: Vec<ScenarioRound>,
    pub rules: Vec<Rule>,
}

impl ScenarioScript {
    pub fn parse(text: &str) -> Result<Self, String> {
        let script: ScenarioScript = serde_json::from_str(text).map_err(|e| e.to_string())?;
        script.lint()?;
        Ok(script)
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    /// Structural checks: at least one round, one document per rule and no
    /// hand-written fences in the reply text.
    pub fn lint(&self) -> Result<(), String> {
        if self.rounds.is_empty() {
            return Err("scenario has no rounds".into());
        }
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.dsl.is_some() && rule.dsl_text.is_some() {
                return Err(format!("rule {i} sets both `dsl` and `dsl_text`"));
            }
            if rule.say.contains("```") {
                return Err(format!("rule {i}: documents go in `dsl`, not in the reply text"));
            }
            if rule.say.contains("{dsl}") && rule.dsl.is_none() && rule.dsl_text.is_none() {
                return Err(format!("rule {i} uses {{dsl}} without a document"));
            }
        }
        Ok(())
    }
}

/// Consumption state of a script within one conversation.
#[derive(Clone, Debug)]
pub struct ScriptState {
    pub script: ScenarioScript,
    used: Vec<bool>,
}

impl ScriptState {
    pub fn new(script: ScenarioScript) -> Self {
        let used = vec![false; script.rules.len()];
        ScriptState { script, used }
    }
}

pub fn render_dsl_block(doc: &str) -> String {
    format!("```{DSL_FENCE_TAG}\n{}\n```", doc.trim_end())
}

fn fill(template: &str, view: &ConversationView<'_>) -> String {
    let mut out = template.to_string();
    let report = view.checks.or_else(|| view.last().and_then(|m| m.check_report()));
    if out.contains("{failures}") {
        let lines = report
            .map(|r| r.failures().map(|c| format!("- {}: {}", c.check_id, c.detail)).collect::<Vec<_>>().join("\n"))
            .unwrap_or_default();
        out = out.replace("{failures}", &lines);
    }
    if out.contains("{report}") {
        out = out.replace("{report}", report.map(|r| r.render()).unwrap_or_default().trim_end());
    }
    while let Some(start) = out.find("{scalar:") {
        let Some(len) = out[start..].find('}') else { break };
        let name = &out[start + 8..start + len];
        let value = view
            .latest_outcome()
            .and_then(|o| o.scalars.get(name))
            .map(|v| sig6(*v))
            .unwrap_or_else(|| "n/a".into());
        out.replace_range(start..start + len + 1, &value);
    }
    out
}

/// First unconsumed rule for the profile's role whose trigger fires.
pub fn scripted_respond(
    state: &mut ScriptState,
    profile: &AgentProfile,
    view: &ConversationView<'_>,
) -> Result<Reply, BackendError> {
    let found = state
        .script
        .rules
        .iter()
        .enumerate()
        .find(|(i, r)| r.role == profile.role && !state.used[*i] && r.when.fires(view));
    let Some((i, rule)) = found else {
        return Err(BackendError::ScriptExhausted(format!(
            "no rule for {} matches after message {}",
            profile.role,
            view.last().map(|m| m.seq).unwrap_or(0)
        )));
    };
    if !rule.repeat {
        state.used[i] = true;
    }
    let doc = match (&rule.dsl, &rule.dsl_text) {
        (Some(v), _) => Some(serde_json::to_string_pretty(v).expect("json values serialize")),
        (None, Some(t)) => Some(t.clone()),
        (None, None) => None,
    };
    let mut content = fill(&rule.say, view);
    if let Some(doc) = doc {
        let block = render_dsl_block(&doc);
        if content.contains("{dsl}") {
            content = content.replace("{dsl}", &block);
        } else if content.is_empty() {
            content = block;
        } else {
            content = format!("{content}\n\n{block}");
        }
    }
    Ok(Reply::text(content))
}

/// Scenarios shipped with the crate, by name.
pub const BUNDLED_SCENARIOS: [(&str, &str); 5] = [
    ("conv1_round1", include_str!("../../data/scenarios/conv1_round1.json")),
    ("conv1", include_str!("../../data/scenarios/conv1.json")),
    ("conv2", include_str!("../../data/scenarios/conv2.json")),
    ("groupchat1", include_str!("../../data/scenarios/groupchat1.json")),
    ("groupchat2", include_str!("../../data/scenarios/groupchat2.json")),
];

pub fn bundled_scenario(name: &str) -> Option<ScenarioScript> {
    BUNDLED_SCENARIOS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| ScenarioScript::parse(text).expect("bundled scenarios are valid"))
}
