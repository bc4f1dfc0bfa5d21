//! Subprocess adapter: one JSON request line out, one action line back.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::Policy;
use crate::action::{Action, Observation, Proposal};
use crate::error::{Error, Result};
use crate::ledger::StepEntry;
use crate::task::{Family, PublicTaskView};

pub const DEFAULT_TIMEOUT_MS: u64 = 30_000;

/// Raw text recorded for a response that did not arrive in time.
pub const TIMEOUT_RAW: &str = "<adapter timeout>";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdapterRequest {
    pub task_id: String,
    pub family: Family,
    pub objective: String,
    pub target_count: u32,
    pub budget_remaining: u32,
    pub step: u32,
    pub last_observation: Option<Observation>,
}

impl AdapterRequest {
    pub fn new(view: &PublicTaskView, history: &[StepEntry]) -> Self {
        let used = history.len() as u32;
        AdapterRequest {
            task_id: view.task_id.clone(),
            family: view.family,
            objective: view.objective.clone(),
            target_count: view.target_count,
            budget_remaining: view.budget.saturating_sub(used),
            step: used + 1,
            last_observation: history.last().map(|e| e.observation.clone()),
        }
    }
}

/// Runs `sh -c <command>` for the lifetime of one run.
pub struct ExternalPolicy {
    command: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
}

impl ExternalPolicy {
    pub fn spawn(command: &str, timeout_ms: u64) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Adapter(format!("cannot launch `{command}`: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(ExternalPolicy {
            command: command.to_owned(),
            child,
            stdin,
            lines: rx,
            timeout: Duration::from_millis(timeout_ms),
        })
    }
}

impl Policy for ExternalPolicy {
    fn label(&self) -> String {
        "external".into()
    }

    fn decide(&mut self, view: &PublicTaskView, history: &[StepEntry]) -> Result<Proposal> {
        let request = serde_json::to_string(&AdapterRequest::new(view, history))?;
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Adapter("adapter input already closed".into()))?;
        writeln!(stdin, "{request}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Adapter(format!("`{}` stopped reading: {e}", self.command)))?;
        match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => Ok(match Action::parse_line(&line) {
                Ok(action) => Proposal::from(action),
                Err(_) => Proposal::Malformed { raw: line },
            }),
            Ok(Err(e)) => Err(Error::Adapter(format!("reading from `{}`: {e}", self.command))),
            Err(RecvTimeoutError::Timeout) => Ok(Proposal::Malformed {
                raw: TIMEOUT_RAW.into(),
            }),
            Err(RecvTimeoutError::Disconnected) => {
                Err(Error::Adapter(format!("`{}` exited", self.command)))
            }
        }
    }

    fn finish(&mut self) {
        // Closing stdin is the end-of-run signal.
        self.stdin.take();
        let deadline = std::time::Instant::now() + Duration::from_millis(500);
        while std::time::Instant::now() < deadline {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        if self.stdin.is_some() {
            self.finish();
        }
    }
}
