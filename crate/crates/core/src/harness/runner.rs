//! Runner handles: an external process speaking the protocol, or the
//! in-process toy subject.

use std::ffi::OsString;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use base64::Engine;
use thiserror::Error;

use super::protocol::{InitRequest, Outcome, Request, Response};
use crate::toy::{ExecReplyOrTimeout, ToySession, VirtualClock};

/// How long a (re)started runner may take to acknowledge `init`.
pub const DEFAULT_INIT_TIMEOUT: Duration = Duration::from_secs(30);

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("cannot start runner {program}: {source}")]
    Spawn {
        program: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("runner rejected init: {0}")]
    InitRejected(String),
    #[error("runner crashed: {0}")]
    Crashed(String),
}

/// Both sides' outcomes for one input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionResult {
    pub a: Outcome,
    pub b: Outcome,
}

impl ExecutionResult {
    pub fn timeout() -> Self {
        ExecutionResult {
            a: Outcome::Timeout,
            b: Outcome::Timeout,
        }
    }

    pub fn excluded(&self) -> bool {
        self.a.excluded() || self.b.excluded()
    }
}

pub trait Runner: Send {
    /// Loads a pair; replaces any previous session.
    fn init(&mut self, request: &InitRequest) -> Result<(), RunnerError>;
    /// Runs both sides on `buf`. Exceeding `timeout` yields [`ExecutionResult::timeout`].
    fn exec(&mut self, buf: &[u8], timeout: Duration) -> Result<ExecutionResult, RunnerError>;
}

impl<R: Runner + ?Sized> Runner for Box<R> {
    fn init(&mut self, request: &InitRequest) -> Result<(), RunnerError> {
        (**self).init(request)
    }

    fn exec(&mut self, buf: &[u8], timeout: Duration) -> Result<ExecutionResult, RunnerError> {
        (**self).exec(buf, timeout)
    }
}

struct Live {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<std::io::Result<String>>,
}

impl Live {
    fn send(&mut self, request: &Request) -> Result<(), RunnerError> {
        let mut line = serde_json::to_vec(request).expect("requests serialize");
        line.push(b'\n');
        self.stdin
            .write_all(&line)
            .and_then(|_| self.stdin.flush())
            .map_err(|e| RunnerError::Crashed(format!("write failed: {e}")))
    }

    /// `Ok(None)` when nothing arrived within `timeout`.
    fn receive(&mut self, timeout: Duration) -> Result<Option<Response>, RunnerError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => serde_json::from_str(&line)
                .map(Some)
                .map_err(|e| RunnerError::Crashed(format!("malformed reply {line:?}: {e}"))),
            Ok(Err(e)) => Err(RunnerError::Crashed(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Ok(None),
            Err(RecvTimeoutError::Disconnected) => Err(RunnerError::Crashed("runner closed its output".into())),
        }
    }

    fn kill(mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn shutdown(mut self) {
        if self.send(&Request::Shutdown).is_ok() {
            let deadline = Instant::now() + Duration::from_secs(1);
            while Instant::now() < deadline {
                if let Ok(Some(_)) = self.child.try_wait() {
                    return;
                }
                thread::sleep(Duration::from_millis(10));
            }
        }
        self.kill();
    }
}

/// A runner in a child process. Timeouts kill the process; the next request
/// starts a fresh one and replays the last `init`.
pub struct ProcessRunner {
    program: PathBuf,
    args: Vec<OsString>,
    init_timeout: Duration,
    live: Option<Live>,
    session: Option<InitRequest>,
    restarts: usize,
}

impl ProcessRunner {
    pub fn new(program: impl AsRef<Path>, args: impl IntoIterator<Item = impl Into<OsString>>) -> Self {
        ProcessRunner {
            program: program.as_ref().to_path_buf(),
            args: args.into_iter().map(Into::into).collect(),
            init_timeout: DEFAULT_INIT_TIMEOUT,
            live: None,
            session: None,
            restarts: 0,
        }
    }

    pub fn with_init_timeout(mut self, timeout: Duration) -> Self {
        self.init_timeout = timeout;
        self
    }

    /// Number of processes killed so far.
    pub fn restarts(&self) -> usize {
        self.restarts
    }

    /// Starts the process now rather than on first use, surfacing spawn errors.
    pub fn start(&mut self) -> Result<(), RunnerError> {
        if self.live.is_none() {
            self.live = Some(self.spawn()?);
        }
        Ok(())
    }

    fn spawn(&self) -> Result<Live, RunnerError> {
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|source| RunnerError::Spawn {
                program: self.program.clone(),
                source,
            })?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        log::debug!("started runner {}", self.program.display());
        Ok(Live {
            child,
            stdin,
            lines: rx,
        })
    }

    fn live_session(&mut self) -> Result<&mut Live, RunnerError> {
        if self.live.is_none() {
            let mut live = self.spawn()?;
            if let Some(init) = &self.session {
                Self::handshake(&mut live, init, self.init_timeout)?;
            }
            self.live = Some(live);
        }
        Ok(self.live.as_mut().expect("just started"))
    }

    fn handshake(live: &mut Live, init: &InitRequest, timeout: Duration) -> Result<(), RunnerError> {
        live.send(&Request::Init(init.clone()))?;
        match live.receive(timeout)? {
            Some(r) if r.ok => Ok(()),
            Some(r) => Err(RunnerError::InitRejected(r.err.unwrap_or_default())),
            None => Err(RunnerError::Crashed("init not acknowledged in time".into())),
        }
    }

    fn discard(&mut self) {
        if let Some(live) = self.live.take() {
            live.kill();
            self.restarts += 1;
        }
    }
}

impl Runner for ProcessRunner {
    fn init(&mut self, request: &InitRequest) -> Result<(), RunnerError> {
        self.session = None;
        let timeout = self.init_timeout;
        let result = Self::handshake(self.live_session()?, request, timeout);
        match &result {
            Ok(()) => self.session = Some(request.clone()),
            Err(RunnerError::InitRejected(_)) => {}
            Err(_) => self.discard(),
        }
        result
    }

    fn exec(&mut self, buf: &[u8], timeout: Duration) -> Result<ExecutionResult, RunnerError> {
        if self.session.is_none() {
            return Err(RunnerError::Crashed("exec before a successful init".into()));
        }
        let encoded = base64::engine::general_purpose::STANDARD.encode(buf);
        let live = self.live_session()?;
        let reply = live
            .send(&Request::Exec { buf: encoded })
            .and_then(|_| live.receive(timeout));
        match reply {
            Ok(Some(response)) => {
                let reply = response.into_exec().map_err(RunnerError::Crashed)?;
                let a = Outcome::parse(&reply.out_a).map_err(RunnerError::Crashed)?;
                let b = Outcome::parse(&reply.out_b).map_err(RunnerError::Crashed)?;
                Ok(ExecutionResult { a, b })
            }
            Ok(None) => {
                self.discard();
                Ok(ExecutionResult::timeout())
            }
            Err(e) => {
                self.discard();
                Err(e)
            }
        }
    }
}

impl Drop for ProcessRunner {
    fn drop(&mut self) {
        if let Some(live) = self.live.take() {
            live.shutdown();
        }
    }
}

/// Runs the toy subject language in-process on a simulated clock: time passes
/// only through `time.sleep`, and unbounded loops hit a step budget. Fast and
/// fully deterministic, for tests and smoke runs.
#[derive(Default)]
pub struct ToyRunner {
    session: Option<ToySession>,
}

impl ToyRunner {
    pub fn new() -> Self {
        ToyRunner::default()
    }
}

impl Runner for ToyRunner {
    fn init(&mut self, request: &InitRequest) -> Result<(), RunnerError> {
        self.session = None;
        let session = ToySession::load(
            request.mode.as_str(),
            &request.code_a,
            &request.code_b,
            &request.binding,
            request.entry.as_deref(),
        )
        .map_err(RunnerError::InitRejected)?;
        self.session = Some(session);
        Ok(())
    }

    fn exec(&mut self, buf: &[u8], timeout: Duration) -> Result<ExecutionResult, RunnerError> {
        let session = self
            .session
            .as_ref()
            .ok_or_else(|| RunnerError::Crashed("exec before a successful init".into()))?;
        match session.exec(buf, || Box::new(VirtualClock::new(timeout))) {
            ExecReplyOrTimeout::Timeout => Ok(ExecutionResult::timeout()),
            ExecReplyOrTimeout::Reply(reply) => Ok(ExecutionResult {
                a: Outcome::parse(&reply.out_a).map_err(RunnerError::Crashed)?,
                b: Outcome::parse(&reply.out_b).map_err(RunnerError::Crashed)?,
            }),
        }
    }
}
