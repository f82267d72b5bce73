//! Line-delimited JSON protocol for scorers that live outside this process.
//!
//! A subprocess scorer prints a handshake line on startup, then answers one
//! response line per request line read from stdin. An HTTP scorer exposes the
//! same handshake at `GET /hello` and scores at `POST /score`.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ScoreItem, Scorer, ScorerKind, ScorerSpec, Transport};
use crate::error::{Error, Result};

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Handshake {
    pub hello: serde_json::Value,
    pub name: String,
    pub kind: ScorerKind,
    pub protocol_version: u32,
}

impl Handshake {
    pub fn new(name: impl Into<String>, kind: ScorerKind) -> Self {
        Handshake {
            hello: serde_json::Value::Bool(true),
            name: name.into(),
            kind,
            protocol_version: PROTOCOL_VERSION,
        }
    }

    fn check(&self) -> Result<()> {
        if self.protocol_version != PROTOCOL_VERSION {
            return Err(Error::Protocol(format!(
                "scorer `{}` speaks protocol version {}, expected {PROTOCOL_VERSION}",
                self.name, self.protocol_version
            )));
        }
        if self.name.trim().is_empty() {
            return Err(Error::Protocol("scorer handshake has an empty name".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireItem {
    pub candidate: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lf: Option<String>,
}

impl From<&ScoreItem<'_>> for WireItem {
    fn from(item: &ScoreItem<'_>) -> Self {
        WireItem {
            candidate: item.candidate.to_string(),
            reference: item.reference.map(str::to_string),
            lf: item.lf.map(str::to_string),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub protocol_version: u32,
    pub kind: ScorerKind,
    pub items: Vec<WireItem>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ScoreResponse {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

pub fn parse_handshake(line: &str) -> Result<Handshake> {
    let hs: Handshake = serde_json::from_str(line.trim())
        .map_err(|e| Error::Protocol(format!("malformed handshake `{}`: {e}", clip(line))))?;
    hs.check()?;
    Ok(hs)
}

/// Decode a response line and check it answers `expected` items.
pub fn parse_response(line: &str, expected: usize) -> Result<Vec<f64>> {
    let resp: ScoreResponse = serde_json::from_str(line.trim())
        .map_err(|e| Error::Protocol(format!("malformed response `{}`: {e}", clip(line))))?;
    if let Some(err) = resp.error {
        return Err(Error::Protocol(format!("scorer reported an error: {err}")));
    }
    let scores = resp
        .scores
        .ok_or_else(|| Error::Protocol("response has neither `scores` nor `error`".into()))?;
    if scores.len() != expected {
        return Err(Error::Protocol(format!(
            "scorer returned {} scores for {expected} items",
            scores.len()
        )));
    }
    Ok(scores)
}

fn clip(s: &str) -> String {
    let s = s.trim();
    if s.chars().count() > 120 {
        format!("{}...", s.chars().take(120).collect::<String>())
    } else {
        s.to_string()
    }
}

fn request_for(kind: ScorerKind, items: &[ScoreItem<'_>]) -> ScoreRequest {
    ScoreRequest {
        protocol_version: PROTOCOL_VERSION,
        kind,
        items: items.iter().map(WireItem::from).collect(),
    }
}

/// Serve `scorer` over the line protocol until `input` is exhausted.
/// Malformed requests get an error response; the loop keeps going.
pub fn serve_lines<S: Scorer + ?Sized, R: BufRead, W: Write>(
    scorer: &S,
    input: R,
    mut output: W,
) -> Result<()> {
    let hs = Handshake::new(scorer.name(), scorer.kind());
    writeln!(output, "{}", serde_json::to_string(&hs)?).map_err(|e| Error::io("writing handshake", e))?;
    output.flush().map_err(|e| Error::io("writing handshake", e))?;
    for line in input.lines() {
        let line = line.map_err(|e| Error::io("reading request", e))?;
        if line.trim().is_empty() {
            continue;
        }
        let resp = match serde_json::from_str::<ScoreRequest>(&line) {
            Err(e) => ScoreResponse { scores: None, error: Some(format!("bad request: {e}")) },
            Ok(req) if req.protocol_version != PROTOCOL_VERSION => ScoreResponse {
                scores: None,
                error: Some(format!("unsupported protocol version {}", req.protocol_version)),
            },
            Ok(req) => {
                let items: Vec<ScoreItem<'_>> = req
                    .items
                    .iter()
                    .map(|w| ScoreItem {
                        candidate: &w.candidate,
                        reference: w.reference.as_deref(),
                        lf: w.lf.as_deref(),
                    })
                    .collect();
                match scorer.score_batch(&items) {
                    Ok(s) => ScoreResponse { scores: Some(s), error: None },
                    Err(e) => ScoreResponse { scores: None, error: Some(e.to_string()) },
                }
            }
        };
        writeln!(output, "{}", serde_json::to_string(&resp)?).map_err(|e| Error::io("writing response", e))?;
        output.flush().map_err(|e| Error::io("writing response", e))?;
    }
    Ok(())
}

struct Conn {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl Conn {
    fn read_line(&self, timeout: Duration) -> Result<String> {
        loop {
            match self.lines.recv_timeout(timeout) {
                Ok(Ok(line)) if line.trim().is_empty() => continue,
                Ok(Ok(line)) => return Ok(line),
                Ok(Err(e)) => return Err(Error::io("reading scorer output", e)),
                Err(RecvTimeoutError::Timeout) => return Err(Error::Timeout(timeout)),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Protocol("scorer process closed its output".into()))
                }
            }
        }
    }
}

/// A scorer running as a child process. Requests are serialized over its
/// stdin; a reader thread feeds stdout lines through a channel so each read
/// can time out.
pub struct SubprocessScorer {
    command: String,
    handshake: Handshake,
    timeout: Duration,
    conn: Mutex<Conn>,
}

impl SubprocessScorer {
    pub fn spawn(command: &str, timeout: Duration) -> Result<Self> {
        let mut parts = command.split_whitespace();
        let program = parts
            .next()
            .ok_or_else(|| Error::InvalidArgument("empty scorer command".into()))?;
        let mut child = Command::new(program)
            .args(parts)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Transport(format!("starting scorer `{command}`: {e}")))?;
        let stdout = child.stdout.take().expect("stdout is piped");
        let stdin = child.stdin.take();
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        let conn = Conn { child, stdin, lines: rx };
        let handshake = match conn.read_line(timeout).and_then(|l| parse_handshake(&l)) {
            Ok(h) => h,
            Err(e) => {
                let mut conn = conn;
                let _ = conn.child.kill();
                let _ = conn.child.wait();
                return Err(e);
            }
        };
        Ok(SubprocessScorer {
            command: command.to_string(),
            handshake,
            timeout,
            conn: Mutex::new(conn),
        })
    }

    pub fn handshake(&self) -> &Handshake {
        &self.handshake
    }
}

impl Scorer for SubprocessScorer {
    fn name(&self) -> &str {
        &self.handshake.name
    }

    fn kind(&self) -> ScorerKind {
        self.handshake.kind
    }

    fn spec(&self) -> ScorerSpec {
        ScorerSpec {
            name: self.handshake.name.clone(),
            kind: self.handshake.kind,
            transport: Transport::Subprocess(self.command.clone()),
        }
    }

    fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let line = serde_json::to_string(&request_for(self.kind(), items))?;
        let mut conn = self.conn.lock().unwrap_or_else(|p| p.into_inner());
        let stdin = conn
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Protocol("scorer stdin already closed".into()))?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Transport(format!("writing to scorer: {e}")))?;
        let reply = conn.read_line(self.timeout)?;
        parse_response(&reply, items.len())
    }
}

impl Drop for SubprocessScorer {
    fn drop(&mut self) {
        let conn = self.conn.get_mut().unwrap_or_else(|p| p.into_inner());
        // closing stdin asks a well-behaved scorer to exit
        conn.stdin.take();
        for _ in 0..20 {
            if let Ok(Some(_)) = conn.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = conn.child.kill();
        let _ = conn.child.wait();
    }
}

/// A scorer behind an HTTP endpoint. Batches may be sent concurrently.
pub struct HttpScorer {
    base: String,
    handshake: Handshake,
    agent: ureq::Agent,
    in_flight: usize,
}

impl HttpScorer {
    pub fn connect(url: &str, timeout: Duration) -> Result<Self> {
        let base = url.trim_end_matches('/').to_string();
        let agent = ureq::AgentBuilder::new().timeout(timeout).build();
        let body = agent
            .get(&format!("{base}/hello"))
            .call()
            .map_err(|e| Error::Transport(format!("GET {base}/hello: {e}")))?
            .into_string()
            .map_err(|e| Error::Transport(format!("reading handshake: {e}")))?;
        let handshake = parse_handshake(&body)?;
        Ok(HttpScorer { base, handshake, agent, in_flight: 4 })
    }

    pub fn with_in_flight(mut self, n: usize) -> Self {
        self.in_flight = n.max(1);
        self
    }
}

impl Scorer for HttpScorer {
    fn name(&self) -> &str {
        &self.handshake.name
    }

    fn kind(&self) -> ScorerKind {
        self.handshake.kind
    }

    fn spec(&self) -> ScorerSpec {
        ScorerSpec {
            name: self.handshake.name.clone(),
            kind: self.handshake.kind,
            transport: Transport::Http(self.base.clone()),
        }
    }

    fn max_in_flight(&self) -> usize {
        self.in_flight
    }

    fn score_batch(&self, items: &[ScoreItem<'_>]) -> Result<Vec<f64>> {
        if items.is_empty() {
            return Ok(Vec::new());
        }
        let body = serde_json::to_string(&request_for(self.kind(), items))?;
        let url = format!("{}/score", self.base);
        let text = match self
            .agent
            .post(&url)
            .set("Content-Type", "application/json")
            .send_string(&body)
        {
            Ok(resp) => resp
                .into_string()
                .map_err(|e| Error::Transport(format!("reading score response: {e}")))?,
            // an error status may still carry a protocol error body
            Err(ureq::Error::Status(code, resp)) => {
                let text = resp.into_string().unwrap_or_default();
                return match parse_response(&text, items.len()) {
                    Err(e @ Error::Protocol(_)) if text.contains("\"error\"") => Err(e),
                    _ => Err(Error::Transport(format!("POST {url}: HTTP {code}"))),
                };
            }
            Err(e) => return Err(Error::Transport(format!("POST {url}: {e}"))),
        };
        parse_response(&text, items.len())
    }
}
