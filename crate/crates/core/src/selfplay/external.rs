//! Policies living in another process, spoken to over newline-delimited JSON.
//!
//! Each request is one line on the child's stdin:
//! `{"id", "kind": "propose"|"solve", "mode", "image_id", "payload", "seed"}`.
//! The child answers with one line `{"text": "..."}` on stdout; echoing
//! `"id"` is optional but lets late replies to timed-out calls be skipped.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::Deserialize;
use serde_json::json;

use super::policy::{Policy, PolicyError, ProposeRequest, SolverView};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

struct Channel {
    stdin: ChildStdin,
    lines: Receiver<String>,
    next_id: u64,
}

pub struct ExternalPolicy {
    command: String,
    timeout: Duration,
    child: Mutex<Child>,
    chan: Mutex<Channel>,
}

#[derive(Deserialize)]
struct Reply {
    text: String,
    #[serde(default)]
    id: Option<u64>,
}

impl ExternalPolicy {
    /// Starts `command` through the shell.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self, PolicyError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PolicyError::Process(format!("{command}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Self {
            command: command.to_string(),
            timeout,
            child: Mutex::new(child),
            chan: Mutex::new(Channel {
                stdin,
                lines: rx,
                next_id: 0,
            }),
        })
    }

    fn call(&self, mut request: serde_json::Value) -> Result<String, PolicyError> {
        let mut chan = self.chan.lock().expect("channel lock");
        let id = chan.next_id;
        chan.next_id += 1;
        request["id"] = json!(id);
        let line = request.to_string();
        writeln!(chan.stdin, "{line}")
            .and_then(|_| chan.stdin.flush())
            .map_err(|e| PolicyError::Process(e.to_string()))?;
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            match chan.lines.recv_timeout(left) {
                Ok(text) => {
                    let reply: Reply = serde_json::from_str(&text)
                        .map_err(|e| PolicyError::Protocol(e.to_string()))?;
                    match reply.id {
                        Some(got) if got != id => continue,
                        _ => return Ok(reply.text),
                    }
                }
                Err(RecvTimeoutError::Timeout) => {
                    return Err(PolicyError::Timeout(self.timeout.as_secs()))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(PolicyError::Process("policy process exited".into()))
                }
            }
        }
    }
}

impl Drop for ExternalPolicy {
    fn drop(&mut self) {
        if let Ok(child) = self.child.get_mut() {
            let _ = child.kill();
            let _ = child.wait();
        }
    }
}

impl Policy for ExternalPolicy {
    fn name(&self) -> String {
        format!("exec:{}", self.command)
    }

    fn propose(&self, req: &ProposeRequest, seed: u64) -> Result<String, PolicyError> {
        self.call(json!({
            "kind": "propose",
            "mode": req.mode,
            "image_id": req.image.id,
            "payload": req,
            "seed": seed,
        }))
    }

    fn solve(&self, view: &SolverView, seed: u64) -> Result<String, PolicyError> {
        self.call(json!({
            "kind": "solve",
            "mode": view.mode(),
            "image_id": view.image().id,
            "payload": view,
            "seed": seed,
        }))
    }

    fn parallel_safe(&self) -> bool {
        false
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::Value;
    use crate::raster::ImageRef;

    fn view() -> SolverView {
        SolverView::Deduction {
            image: ImageRef::new("i", 4, 4).unwrap(),
            p: "(+ 1 2)".into(),
            a: Value::Int(0),
        }
    }

    #[test]
    fn round_trip_through_shell() {
        let p = ExternalPolicy::spawn(
            r#"while read -r line; do echo '{"text":"3"}'; done"#,
            Duration::from_secs(10),
        )
        .unwrap();
        assert_eq!(p.solve(&view(), 0).unwrap(), "3");
        assert_eq!(p.solve(&view(), 1).unwrap(), "3");
    }

    #[test]
    fn timeout_is_reported() {
        let p = ExternalPolicy::spawn("sleep 5", Duration::from_millis(200)).unwrap();
        assert!(matches!(p.solve(&view(), 0), Err(PolicyError::Timeout(_))));
    }

    #[test]
    fn exit_is_reported() {
        let p = ExternalPolicy::spawn("true", Duration::from_secs(5)).unwrap();
        assert!(p.solve(&view(), 0).is_err());
    }
}
