//! Append-only JSONL transcript store with prefix-consistent readers.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::watch;

use super::{PolicyEvent, Termination, Transcript};
use crate::agents::{Message, Topology};
use crate::dsl::ExecutionOutcome;
use crate::verify::CheckReport;

/// Last line of a finished transcript.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminationRecord {
    pub conversation_id: String,
    pub topology: Topology,
    pub termination: Termination,
    pub final_scalars: BTreeMap<String, f64>,
    #[serde(default)]
    pub final_outcome: Option<ExecutionOutcome>,
    #[serde(default)]
    pub final_checks: Option<CheckReport>,
    #[serde(default)]
    pub policy_events: Vec<PolicyEvent>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Record {
    Message(Message),
    Termination(TerminationRecord),
}

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("transcript has no termination record")]
    Unterminated,
    #[error("line {0}: record after the termination record")]
    Trailing(usize),
}

/// Records are serialized once; readers get shared line strings, so a
/// reader sees either a whole record or none of it.
#[derive(Debug)]
pub struct TranscriptStore {
    file: Mutex<Option<File>>,
    lines: RwLock<Vec<Arc<str>>>,
    len: watch::Sender<usize>,
}

impl Default for TranscriptStore {
    fn default() -> Self {
        Self::memory()
    }
}

impl TranscriptStore {
    pub fn memory() -> Self {
        TranscriptStore { file: Mutex::new(None), lines: RwLock::new(Vec::new()), len: watch::Sender::new(0) }
    }

    /// Creates (truncating) the JSONL file at `path`.
    pub fn create(path: &Path) -> io::Result<Self> {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).write(true).truncate(true).open(path)?;
        let store = Self::memory();
        *store.file.lock().expect("store poisoned") = Some(file);
        Ok(store)
    }

    /// Writes and flushes the record before it becomes visible to readers.
    pub fn append(&self, record: &Record) -> io::Result<()> {
        let line: Arc<str> = serde_json::to_string(record).map_err(io::Error::other)?.into();
        let mut file = self.file.lock().expect("store poisoned");
        if let Some(f) = file.as_mut() {
            f.write_all(line.as_bytes())?;
            f.write_all(b"\n")?;
            f.flush()?;
        }
        let mut lines = self.lines.write().expect("store poisoned");
        lines.push(line);
        let n = lines.len();
        drop(lines);
        self.len.send_replace(n);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lines.read().expect("store poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lines `from..` as they are now.
    pub fn snapshot(&self, from: usize) -> Vec<Arc<str>> {
        let lines = self.lines.read().expect("store poisoned");
        lines.get(from..).map(|s| s.to_vec()).unwrap_or_default()
    }

    /// Notified with the new length after every append.
    pub fn subscribe(&self) -> watch::Receiver<usize> {
        self.len.subscribe()
    }

    /// True once the termination record has been appended.
    pub fn is_closed(&self) -> bool {
        let lines = self.lines.read().expect("store poisoned");
        lines.last().is_some_and(|l| matches!(serde_json::from_str::<Record>(l), Ok(Record::Termination(_))))
    }

    pub fn transcript(&self) -> Result<Transcript, ReplayError> {
        transcript_from_lines(self.snapshot(0).iter().map(|l| &**l))
    }
}

pub fn transcript_from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Result<Transcript, ReplayError> {
    let mut messages = Vec::new();
    let mut end: Option<TerminationRecord> = None;
    for (i, line) in lines.into_iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        if end.is_some() {
            return Err(ReplayError::Trailing(i + 1));
        }
        match serde_json::from_str::<Record>(line).map_err(|source| ReplayError::Json { line: i + 1, source })? {
            Record::Message(m) => messages.push(m),
            Record::Termination(t) => end = Some(t),
        }
    }
    let end = end.ok_or(ReplayError::Unterminated)?;
    Ok(Transcript {
        conversation_id: end.conversation_id,
        topology: end.topology,
        messages,
        termination: end.termination,
        final_outcome: end.final_outcome,
        final_checks: end.final_checks,
        policy_events: end.policy_events,
    })
}

pub fn replay(path: &Path) -> Result<Transcript, ReplayError> {
    let reader = BufReader::new(File::open(path)?);
    let lines = reader.lines().collect::<Result<Vec<_>, _>>()?;
    transcript_from_lines(lines.iter().map(String::as_str))
}
