use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use super::protocol::{Request, Response};
use super::{check_dim, Model};
use crate::error::{Error, Result};

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

/// A model served by a child process speaking the JSON-lines protocol of
/// [`super::protocol`]. Requests are serialized through one process and
/// answers are memoized per input, so repeated queries within a session are
/// bit-identical even if the server is not.
pub struct ExternalModel {
    command: String,
    timeout: Duration,
    dim: Option<usize>,
    session: Mutex<Session>,
}

struct Session {
    process: Option<Process>,
    next_id: u64,
    memo: HashMap<Vec<u64>, f64>,
    /// Whether the server understands batch requests; unknown until probed.
    batch: Option<bool>,
}

struct Process {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

enum Failure {
    /// The process is gone or its pipes broke; respawn before retrying.
    Dead(String),
    Other(String),
}

impl Failure {
    fn message(&self) -> &str {
        match self {
            Failure::Dead(m) | Failure::Other(m) => m,
        }
    }
}

impl Process {
    fn spawn(command: &str) -> Result<Self> {
        let mut child = shell(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::ExternalModelFailure(format!("cannot start `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Process {
            child,
            stdin,
            lines: rx,
        })
    }

    fn exchange(
        &mut self,
        req: &Request,
        timeout: Duration,
    ) -> std::result::Result<Response, Failure> {
        let mut line = serde_json::to_string(req).expect("request serializes");
        line.push('\n');
        self.stdin
            .write_all(line.as_bytes())
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Failure::Dead(format!("write failed: {e}")))?;
        let deadline = Instant::now() + timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let raw = match self.lines.recv_timeout(left) {
                Ok(Ok(raw)) => raw,
                Ok(Err(e)) => return Err(Failure::Dead(format!("read failed: {e}"))),
                Err(RecvTimeoutError::Timeout) => {
                    return Err(Failure::Other(format!(
                        "no response to request {} within {timeout:?}",
                        req.id
                    )))
                }
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Failure::Dead("model process closed its output".into()))
                }
            };
            if raw.trim().is_empty() {
                continue;
            }
            let resp: Response = serde_json::from_str(&raw)
                .map_err(|e| Failure::Other(format!("malformed reply `{raw}`: {e}")))?;
            match resp.id {
                // stale answer to an earlier, timed-out request
                Some(id) if id != req.id => continue,
                _ => {}
            }
            if let Some(msg) = resp.error {
                return Err(Failure::Other(format!("model reported error: {msg}")));
            }
            return Ok(resp);
        }
    }
}

impl Drop for Process {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn shell(command: &str) -> Command {
    if cfg!(windows) {
        let mut c = Command::new("cmd");
        c.arg("/C").arg(command);
        c
    } else {
        let mut c = Command::new("sh");
        c.arg("-c").arg(command);
        c
    }
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

impl ExternalModel {
    /// Starts `command` through the platform shell.
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let process = Process::spawn(command)?;
        Ok(ExternalModel {
            command: command.to_string(),
            timeout,
            dim: None,
            session: Mutex::new(Session {
                process: Some(process),
                next_id: 1,
                memo: HashMap::new(),
                batch: None,
            }),
        })
    }

    /// Declares the expected input dimension so mismatches fail locally.
    pub fn with_dim(mut self, m: usize) -> Self {
        self.dim = Some(m);
        self
    }

    pub fn command(&self) -> &str {
        &self.command
    }

    /// A fresh child process running the same command, with its own memo.
    pub fn fork(&self) -> Result<Self> {
        let mut m = ExternalModel::spawn(&self.command, self.timeout)?;
        m.dim = self.dim;
        Ok(m)
    }

    /// Number of distinct inputs answered so far in this session.
    pub fn memo_len(&self) -> usize {
        self.session.lock().expect("session lock").memo.len()
    }

    /// Sends a request, retrying once on failure.
    fn request(&self, session: &mut Session, make: impl Fn(u64) -> Request) -> Result<Response> {
        let mut last = String::new();
        for attempt in 0..2 {
            if session.process.is_none() {
                session.process = Some(Process::spawn(&self.command)?);
            }
            let id = session.next_id;
            session.next_id += 1;
            let req = make(id);
            let process = session.process.as_mut().expect("process present");
            match process.exchange(&req, self.timeout) {
                Ok(resp) => return Ok(resp),
                Err(failure) => {
                    log::warn!(
                        "external model `{}` request {id} failed (attempt {}): {}",
                        self.command,
                        attempt + 1,
                        failure.message()
                    );
                    last = failure.message().to_string();
                    if let Failure::Dead(_) = failure {
                        session.process = None;
                    }
                }
            }
        }
        Err(Error::ExternalModelFailure(last))
    }
}

impl ExternalModel {
    /// One batch attempt without retry. `Ok(false)` means the server did not
    /// give a usable batch answer and rows should be sent individually.
    fn probe_batch(&self, session: &mut Session, pending: &[Vec<f64>]) -> Result<bool> {
        if session.process.is_none() {
            session.process = Some(Process::spawn(&self.command)?);
        }
        let id = session.next_id;
        session.next_id += 1;
        let req = Request::batch(id, pending);
        let process = session.process.as_mut().expect("process present");
        match process.exchange(&req, self.timeout) {
            Ok(resp)
                if resp
                    .batch
                    .as_ref()
                    .is_some_and(|f| f.len() == pending.len()) =>
            {
                store_batch(session, pending, resp)?;
                Ok(true)
            }
            Ok(_) => Ok(false),
            Err(Failure::Dead(msg)) => {
                log::debug!("batch probe killed the model process: {msg}");
                session.process = None;
                Ok(false)
            }
            Err(Failure::Other(msg)) => {
                log::debug!("batch probe failed: {msg}");
                Ok(false)
            }
        }
    }

    fn query_each(&self, session: &mut Session, pending: &[Vec<f64>]) -> Result<()> {
        for x in pending {
            let resp = self.request(session, |id| Request::single(id, x))?;
            let value = resp
                .f
                .ok_or_else(|| Error::ExternalModelFailure("reply lacks `f`".into()))?;
            let value = finite(value, x)?;
            session.memo.insert(key(x), value);
        }
        Ok(())
    }
}

fn store_batch(session: &mut Session, pending: &[Vec<f64>], resp: Response) -> Result<()> {
    let values = resp
        .batch
        .ok_or_else(|| Error::ExternalModelFailure("reply lacks `F`".into()))?;
    if values.len() != pending.len() {
        return Err(Error::ExternalModelFailure(format!(
            "batch of {} rows answered with {} values",
            pending.len(),
            values.len()
        )));
    }
    for (x, v) in pending.iter().zip(values) {
        finite(v, x)?;
        session.memo.insert(key(x), v);
    }
    Ok(())
}

fn finite(value: f64, x: &[f64]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::ExternalModelFailure(format!(
            "non-finite value {value} for x = {x:?}"
        )))
    }
}

impl Model for ExternalModel {
    fn dim(&self) -> Option<usize> {
        self.dim
    }

    fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let mut session = self.session.lock().expect("session lock");
        let k = key(x);
        if let Some(&v) = session.memo.get(&k) {
            return Ok(v);
        }
        let resp = self.request(&mut session, |id| Request::single(id, x))?;
        let value = resp
            .f
            .ok_or_else(|| Error::ExternalModelFailure("reply lacks `f`".into()))?;
        let value = finite(value, x)?;
        session.memo.insert(k, value);
        Ok(value)
    }

    fn query_batch(&self, xs: &[Vec<f64>]) -> Result<Vec<f64>> {
        for (row, x) in xs.iter().enumerate() {
            check_dim(self.dim, x).map_err(|e| Error::AtRow {
                row,
                source: Box::new(e),
            })?;
        }
        let mut session = self.session.lock().expect("session lock");
        let mut pending: Vec<Vec<f64>> = Vec::new();
        let mut seen = std::collections::HashSet::new();
        for x in xs {
            let k = key(x);
            if !session.memo.contains_key(&k) && seen.insert(k) {
                pending.push(x.clone());
            }
        }
        if !pending.is_empty() {
            match session.batch {
                Some(true) => {
                    let resp = self.request(&mut session, |id| Request::batch(id, &pending))?;
                    store_batch(&mut session, &pending, resp)?;
                }
                Some(false) => self.query_each(&mut session, &pending)?,
                None => {
                    if self.probe_batch(&mut session, &pending)? {
                        session.batch = Some(true);
                    } else {
                        log::info!(
                            "external model `{}` does not answer batch requests; querying rows one at a time",
                            self.command
                        );
                        session.batch = Some(false);
                        self.query_each(&mut session, &pending)?;
                    }
                }
            }
        }
        Ok(xs.iter().map(|x| session.memo[&key(x)]).collect())
    }
}
