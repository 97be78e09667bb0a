//! JSON-Lines run logs and bit-exact replay.
//!
//! Line 1 is a [`LogHeader`]; every following line is one [`Frame`]. Replay
//! re-executes the scenario, feeding back the live inputs recorded in each
//! frame, and compares the re-encoded frame to the logged line byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, Frame, LiveInput};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogHeader {
    pub schema_version: u32,
    /// FNV-1a of the canonical scenario JSON, as 16 hex digits.
    pub scenario_hash: String,
}

impl LogHeader {
    pub fn for_scenario(scenario: &Scenario) -> Self {
        LogHeader {
            schema_version: SCHEMA_VERSION,
            scenario_hash: format!("{:016x}", scenario.hash()),
        }
    }

    pub fn hash(&self) -> Result<u64> {
        u64::from_str_radix(&self.scenario_hash, 16)
            .map_err(|_| Error::MalformedLog(format!("bad scenario_hash {:?}", self.scenario_hash)))
    }
}

/// Encodes one frame the way it appears on a log line.
pub fn encode_frame(frame: &Frame) -> String {
    serde_json::to_string(frame).expect("frames contain only finite numbers")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Log {
    pub header: LogHeader,
    pub frames: Vec<Frame>,
}

impl Log {
    pub fn new(scenario: &Scenario) -> Self {
        Log {
            header: LogHeader::for_scenario(scenario),
            frames: Vec::new(),
        }
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.header).expect("header serializes");
        out.push('\n');
        for f in &self.frames {
            out.push_str(&encode_frame(f));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = parse_header(lines.next())?;
        let frames = lines
            .enumerate()
            .map(|(i, line)| {
                serde_json::from_str(line)
                    .map_err(|e| Error::MalformedLog(format!("frame line {}: {e}", i + 2)))
            })
            .collect::<Result<Vec<Frame>>>()?;
        Ok(Log { header, frames })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_jsonl())?;
        Ok(())
    }
}

fn parse_header(line: Option<&str>) -> Result<LogHeader> {
    let line = line.ok_or_else(|| Error::MalformedLog("empty log".into()))?;
    serde_json::from_str(line).map_err(|e| Error::MalformedLog(format!("header: {e}")))
}

/// Headless run of a whole scenario.
pub fn run(scenario: &Scenario) -> Result<Log> {
    let mut engine = Engine::new(scenario.clone())?;
    let mut log = Log::new(scenario);
    log.frames.reserve(scenario.tick_count() as usize);
    while !engine.finished() {
        log.frames.push(engine.step(LiveInput::default())?);
    }
    Ok(log)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReplayReport {
    /// Every logged frame was reproduced exactly. `complete` is false when the
    /// log stops before the scenario's end (a live session closed early).
    ExactMatch { frames: u64, complete: bool },
    Diverged { tick: u64, reason: String },
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        matches!(self, ReplayReport::ExactMatch { .. })
    }
}

impl std::fmt::Display for ReplayReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ReplayReport::ExactMatch { .. } => f.write_str("exact match"),
            ReplayReport::Diverged { tick, reason } => write!(f, "divergence at tick {tick}: {reason}"),
        }
    }
}

/// Re-executes `scenario` against the text of a log.
pub fn replay(log_text: &str, scenario: &Scenario) -> Result<ReplayReport> {
    let mut lines = log_text.lines();
    let header = parse_header(lines.next())?;
    let expected = scenario.hash();
    let logged = header.hash()?;
    if logged != expected {
        return Err(Error::HashMismatch {
            log: logged,
            scenario: expected,
        });
    }

    let mut engine = Engine::new(scenario.clone())?;
    let mut count = 0u64;
    for (i, line) in lines.enumerate() {
        let tick = i as u64;
        if engine.finished() {
            return Ok(ReplayReport::Diverged {
                tick,
                reason: "log runs past the end of the scenario".into(),
            });
        }
        let logged: Frame = match serde_json::from_str(line) {
            Ok(f) => f,
            Err(e) => {
                return Ok(ReplayReport::Diverged {
                    tick,
                    reason: format!("unreadable frame: {e}"),
                })
            }
        };
        let frame = match engine.step(logged.live_input()) {
            Ok(f) => f,
            Err(e) => {
                return Ok(ReplayReport::Diverged {
                    tick,
                    reason: format!("re-execution failed: {e}"),
                })
            }
        };
        let encoded = encode_frame(&frame);
        if encoded != line {
            let mut reason = String::from("frame differs");
            if let Some(col) = encoded.bytes().zip(line.bytes()).position(|(a, b)| a != b) {
                let _ = write!(reason, " at byte {col}");
            }
            return Ok(ReplayReport::Diverged { tick, reason });
        }
        count += 1;
    }
    Ok(ReplayReport::ExactMatch {
        frames: count,
        complete: engine.finished(),
    })
}
