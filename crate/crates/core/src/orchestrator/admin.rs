use std::collections::VecDeque;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdminMode {
    /// Never wait; deliver queued input if any, else skip.
    AutoSkip,
    /// Block for input up to the hook's timeout, then skip.
    Interactive,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdminAction {
    Text(String),
    Approve,
    Revise(String),
    Abort,
}

impl AdminAction {
    /// Text posted to the conversation for this action.
    pub fn content(&self) -> String {
        match self {
            AdminAction::Text(t) => t.clone(),
            AdminAction::Approve => "approve".into(),
            AdminAction::Revise(t) => format!("revise: {t}"),
            AdminAction::Abort => "abort".into(),
        }
    }
}

/// Input source for admin turns. Injections made while the admin is not
/// the speaker are queued and delivered at its next turn.
#[derive(Debug)]
pub struct AdminHook {
    mode: AdminMode,
    timeout: Duration,
    queue: Mutex<VecDeque<AdminAction>>,
    ready: Condvar,
    waiting: AtomicBool,
}

impl AdminHook {
    pub fn new(mode: AdminMode, timeout: Duration) -> Self {
        AdminHook { mode, timeout, queue: Mutex::new(VecDeque::new()), ready: Condvar::new(), waiting: AtomicBool::new(false) }
    }

    pub fn auto_skip() -> Self {
        Self::new(AdminMode::AutoSkip, Duration::ZERO)
    }

    pub fn mode(&self) -> AdminMode {
        self.mode
    }

    pub fn submit(&self, action: AdminAction) {
        self.queue.lock().expect("admin queue poisoned").push_back(action);
        self.ready.notify_all();
    }

    /// True while an interactive admin turn is blocked on input.
    pub fn awaiting_input(&self) -> bool {
        self.waiting.load(Ordering::SeqCst)
    }

    pub fn pending(&self) -> usize {
        self.queue.lock().expect("admin queue poisoned").len()
    }

    /// `None` means skip.
    pub fn admin_input(&self, prompt: &str) -> Option<AdminAction> {
        let mut queue = self.queue.lock().expect("admin queue poisoned");
        if let Some(a) = queue.pop_front() {
            return Some(a);
        }
        if self.mode == AdminMode::AutoSkip {
            return None;
        }
        log::info!("waiting for admin input: {prompt}");
        self.waiting.store(true, Ordering::SeqCst);
        let deadline = Instant::now() + self.timeout;
        let action = loop {
            if let Some(a) = queue.pop_front() {
                break Some(a);
            }
            let now = Instant::now();
            if now >= deadline {
                log::info!("admin input timed out after {:?}; skipping", self.timeout);
                break None;
            }
            queue = self.ready.wait_timeout(queue, deadline - now).expect("admin queue poisoned").0;
        };
        self.waiting.store(false, Ordering::SeqCst);
        action
    }
}
