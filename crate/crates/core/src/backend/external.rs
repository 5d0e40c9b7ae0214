//! External detector sessions over the v1 wire protocol.
//!
//! The transport is either a spawned child process (stdio) or a TCP
//! connection. Requests are pipelined up to a configured window; responses
//! may arrive out of order and are matched by frame id. A dedicated reader
//! thread turns raw lines into events so the submit path can enforce
//! per-request deadlines with plain channel timeouts.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpStream;
use std::path::PathBuf;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use super::wire::{self, WireRequest};
use super::{
    BackendError, BatchResult, DetectRequest, Detector, FrameOutcome, ImagePayload, SessionError,
};
use crate::raster::write_raster;

/// Where the inference process lives.
#[derive(Debug, Clone)]
pub enum BackendEndpoint {
    /// Spawn `program args...` and talk over its stdin/stdout.
    Command { program: String, args: Vec<String> },
    /// Connect to `host:port`.
    Tcp(String),
}

#[derive(Debug, Clone, Copy)]
pub struct ExternalConfig {
    /// Per-request deadline; an overdue frame is marked failed and the
    /// pipeline continues.
    pub timeout: Duration,
    /// Maximum in-flight requests.
    pub window: usize,
}

impl Default for ExternalConfig {
    fn default() -> Self {
        Self {
            timeout: Duration::from_millis(5000),
            window: 32,
        }
    }
}

enum ReaderEvent {
    Line(String, Instant),
    Eof,
}

pub struct ExternalBackend {
    writer: Box<dyn Write + Send>,
    events: Receiver<ReaderEvent>,
    reader: Option<JoinHandle<()>>,
    child: Option<Child>,
    /// Extra handle for unblocking the reader thread on shutdown: closing a
    /// cloned TcpStream does not close the connection, shutdown(2) does.
    tcp: Option<TcpStream>,
    config: ExternalConfig,
    /// Frames that timed out locally; a late response for one of these is
    /// discarded rather than treated as unknown.
    timed_out: std::collections::HashSet<u64>,
    late_responses: u64,
    highest_frame_id: Option<u64>,
    spool: Option<tempfile::TempDir>,
    aborted: bool,
}

impl ExternalBackend {
    pub fn connect(
        endpoint: &BackendEndpoint,
        config: ExternalConfig,
    ) -> Result<Self, BackendError> {
        type Transport = (
            Box<dyn Write + Send>,
            Box<dyn Read + Send>,
            Option<Child>,
            Option<TcpStream>,
        );
        let (writer, reader, child, tcp): Transport = match endpoint {
            BackendEndpoint::Command { program, args } => {
                let mut child = Command::new(program)
                    .args(args)
                    .stdin(Stdio::piped())
                    .stdout(Stdio::piped())
                    .spawn()
                    .map_err(|source| BackendError::Spawn {
                        command: format!("{program} {}", args.join(" ")),
                        source,
                    })?;
                let stdin = child.stdin.take().expect("stdin was piped");
                let stdout = child.stdout.take().expect("stdout was piped");
                (Box::new(stdin), Box::new(stdout), Some(child), None)
            }
            BackendEndpoint::Tcp(address) => {
                let stream =
                    TcpStream::connect(address).map_err(|source| BackendError::Connect {
                        address: address.clone(),
                        source,
                    })?;
                let read_half = stream.try_clone()?;
                let shutdown_handle = stream.try_clone()?;
                (
                    Box::new(stream),
                    Box::new(read_half),
                    None,
                    Some(shutdown_handle),
                )
            }
        };

        let (tx, events) = mpsc::channel();
        let handle = std::thread::spawn(move || {
            let mut lines = BufReader::new(reader);
            loop {
                let mut line = String::new();
                match lines.read_line(&mut line) {
                    Ok(0) | Err(_) => {
                        let _ = tx.send(ReaderEvent::Eof);
                        return;
                    }
                    Ok(_) => {
                        if tx.send(ReaderEvent::Line(line, Instant::now())).is_err() {
                            return;
                        }
                    }
                }
            }
        });

        Ok(Self {
            writer,
            events,
            reader: Some(handle),
            child,
            tcp,
            config,
            timed_out: Default::default(),
            late_responses: 0,
            highest_frame_id: None,
            spool: None,
            aborted: false,
        })
    }

    /// Late responses for frames that had already timed out locally.
    pub fn late_response_count(&self) -> u64 {
        self.late_responses
    }

    fn abort<T>(&mut self, error: SessionError) -> Result<T, SessionError> {
        self.aborted = true;
        if let Some(child) = &mut self.child {
            let _ = child.kill();
        }
        if let Some(stream) = &self.tcp {
            let _ = stream.shutdown(std::net::Shutdown::Both);
        }
        Err(error)
    }

    fn wire_path(&mut self, request: &DetectRequest) -> Result<String, SessionError> {
        match &request.payload {
            ImagePayload::Path(path) => Ok(path.display().to_string()),
            // Protocol v1 carries paths, so in-memory rasters are spooled to
            // a session-owned temp directory first.
            ImagePayload::Raster(raster) => {
                let spool = match &self.spool {
                    Some(dir) => dir,
                    None => {
                        let dir = tempfile::TempDir::new()?;
                        self.spool.insert(dir)
                    }
                };
                let file = spool
                    .path()
                    .join(format!("{}.ppm", sanitize(&request.image_id)));
                write_raster(&file, raster)
                    .map_err(|e| SessionError::Io(std::io::Error::other(e.to_string())))?;
                Ok(file.display().to_string())
            }
        }
    }

    /// Blocks until one pending frame resolves (response or deadline) or the
    /// session dies.
    fn settle_one(
        &mut self,
        pending: &mut HashMap<u64, Pending>,
        results: &mut [Option<FrameOutcome>],
    ) -> Result<(), SessionError> {
        loop {
            let now = Instant::now();
            let (&expiring_id, deadline) = pending
                .iter()
                .map(|(id, p)| (id, p.deadline))
                .min_by_key(|(_, deadline)| *deadline)
                .expect("settle_one requires a pending frame");
            if deadline <= now {
                let p = pending.remove(&expiring_id).expect("frame is pending");
                self.timed_out.insert(expiring_id);
                results[p.slot] = Some(FrameOutcome::TimedOut);
                return Ok(());
            }
            match self.events.recv_timeout(deadline - now) {
                Ok(ReaderEvent::Line(line, arrived)) => {
                    let response = match wire::decode_response(&line) {
                        Ok(response) => response,
                        Err(e) => return self.abort(e),
                    };
                    match pending.remove(&response.frame_id) {
                        Some(p) => {
                            let wall_ms =
                                arrived.duration_since(p.submitted).as_secs_f64() * 1000.0;
                            results[p.slot] = Some(FrameOutcome::Ok { response, wall_ms });
                            return Ok(());
                        }
                        None if self.timed_out.contains(&response.frame_id) => {
                            // Arrived after we gave up on it; drop and keep
                            // waiting for someone else.
                            self.late_responses += 1;
                        }
                        None => {
                            return self.abort(SessionError::Protocol(format!(
                                "response for unknown frame id {}",
                                response.frame_id
                            )));
                        }
                    }
                }
                Ok(ReaderEvent::Eof) | Err(RecvTimeoutError::Disconnected) => {
                    return self.abort(SessionError::ConnectionLost);
                }
                Err(RecvTimeoutError::Timeout) => {
                    // Deadline hit; the next loop iteration expires the frame.
                }
            }
        }
    }
}

struct Pending {
    slot: usize,
    submitted: Instant,
    deadline: Instant,
}

impl Detector for ExternalBackend {
    fn detect_batch(
        &mut self,
        requests: &[DetectRequest],
    ) -> Result<Vec<BatchResult>, SessionError> {
        if self.aborted {
            return Err(SessionError::Aborted);
        }
        let mut results: Vec<Option<FrameOutcome>> = vec![None; requests.len()];
        let mut pending: HashMap<u64, Pending> = HashMap::new();

        for (slot, request) in requests.iter().enumerate() {
            if self.highest_frame_id.is_some_and(|h| request.frame_id <= h) {
                return self.abort(SessionError::NonMonotonicFrameId(request.frame_id));
            }
            self.highest_frame_id = Some(request.frame_id);

            while pending.len() >= self.config.window {
                self.settle_one(&mut pending, &mut results)?;
            }

            let path = self.wire_path(request)?;
            let line = wire::encode_request(&WireRequest {
                frame_id: request.frame_id,
                path,
                width: request.dims.width(),
                height: request.dims.height(),
            });
            let submitted = Instant::now();
            if let Err(e) = self
                .writer
                .write_all(line.as_bytes())
                .and_then(|()| self.writer.flush())
            {
                return self.abort(SessionError::Io(e));
            }
            pending.insert(
                request.frame_id,
                Pending {
                    slot,
                    submitted,
                    deadline: submitted + self.config.timeout,
                },
            );
        }

        while !pending.is_empty() {
            self.settle_one(&mut pending, &mut results)?;
        }

        Ok(requests
            .iter()
            .zip(results)
            .map(|(request, outcome)| BatchResult {
                frame_id: request.frame_id,
                outcome: outcome.expect("every slot settles"),
            })
            .collect())
    }
}

impl Drop for ExternalBackend {
    fn drop(&mut self) {
        // Closing stdin tells a well-behaved child to exit; kill covers the
        // rest. Either way the reader thread sees EOF and unblocks.
        if let Some(mut child) = self.child.take() {
            let _ = child.kill();
            let _ = child.wait();
        }
        if let Some(stream) = &self.tcp {
            let _ = stream.shutdown(std::net::Shutdown::Both);
        }
        if let Some(handle) = self.reader.take() {
            let _ = handle.join();
        }
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Parses a backend spec string:
/// `replay:FILE[:DELAY_MS]`, `exec:PROGRAM [ARGS...]`, or `tcp:HOST:PORT`.
pub fn parse_endpoint(spec: &str) -> Result<ParsedEndpoint, String> {
    if let Some(rest) = spec.strip_prefix("replay:") {
        let (file, delay) = match rest.rsplit_once(':') {
            Some((file, delay)) if delay.parse::<f64>().is_ok() => {
                (file, delay.parse::<f64>().expect("checked"))
            }
            _ => (rest, 0.0),
        };
        if file.is_empty() {
            return Err("replay backend needs a detection file".into());
        }
        Ok(ParsedEndpoint::Replay {
            file: PathBuf::from(file),
            delay_ms: delay,
        })
    } else if let Some(rest) = spec.strip_prefix("exec:") {
        let mut parts = rest.split_whitespace().map(String::from);
        let program = parts.next().ok_or("exec backend needs a command")?;
        Ok(ParsedEndpoint::External(BackendEndpoint::Command {
            program,
            args: parts.collect(),
        }))
    } else if let Some(rest) = spec.strip_prefix("tcp:") {
        if rest.is_empty() {
            return Err("tcp backend needs host:port".into());
        }
        Ok(ParsedEndpoint::External(BackendEndpoint::Tcp(rest.into())))
    } else {
        Err(format!(
            "unknown backend spec \"{spec}\" (expected replay:, exec:, or tcp:)"
        ))
    }
}

/// A parsed `--backend` argument.
#[derive(Debug, Clone)]
pub enum ParsedEndpoint {
    Replay { file: PathBuf, delay_ms: f64 },
    External(BackendEndpoint),
}
