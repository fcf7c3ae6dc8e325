//! JSON-lines traces and their replay against a publication backend.

use std::fmt;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::{Engine, EngineError, EngineOptions, PublicationDecision};
use crate::model::{PrivacyPreference, Resource, StateDump, UserId};
use crate::oracle::{check_conditions, check_semantic_privacy, default_horizon, SemanticParams, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceCommand {
    pub seq: u64,
    #[serde(flatten)]
    pub op: Op,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", content = "payload", rename_all = "snake_case")]
pub enum Op {
    AddUser { user: UserId },
    AddFriend { a: UserId, b: UserId },
    AddPref(PrivacyPreference),
    Publish(Resource),
    Verify(VerifyRequest),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VerifyRequest {
    /// Also run the adversary's envelope check.
    #[serde(default)]
    pub semantic: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct TraceError {
    pub line: usize,
    pub message: String,
}

/// Parse a trace; blank lines are skipped, `seq` must strictly increase.
pub fn parse_trace(text: &str) -> Result<Vec<TraceCommand>, TraceError> {
    let mut out: Vec<TraceCommand> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let cmd: TraceCommand = serde_json::from_str(raw).map_err(|e| TraceError {
            line,
            message: e.to_string(),
        })?;
        if let Some(prev) = out.last() {
            if cmd.seq <= prev.seq {
                return Err(TraceError {
                    line,
                    message: format!("seq {} does not follow {}", cmd.seq, prev.seq),
                });
            }
        }
        out.push(cmd);
    }
    Ok(out)
}

pub fn write_trace(commands: &[TraceCommand]) -> String {
    let mut s = String::new();
    for c in commands {
        s.push_str(&serde_json::to_string(c).expect("trace commands serialize"));
        s.push('\n');
    }
    s
}

/// Something that accepts publication traffic: an in-process engine or a
/// remote service.
pub trait Backend: Sync {
    type Error: fmt::Display + Send;

    fn add_user(&self, u: &UserId) -> Result<bool, Self::Error>;
    fn add_friend(&self, a: &UserId, b: &UserId) -> Result<bool, Self::Error>;
    fn add_preference(&self, p: &PrivacyPreference) -> Result<(), Self::Error>;
    fn publish(&self, r: &Resource) -> Result<PublicationDecision, Self::Error>;
    fn dump(&self) -> Result<StateDump, Self::Error>;
}

impl Backend for Engine {
    type Error = EngineError;

    fn add_user(&self, u: &UserId) -> Result<bool, EngineError> {
        Engine::add_user(self, u.clone())
    }

    fn add_friend(&self, a: &UserId, b: &UserId) -> Result<bool, EngineError> {
        Engine::add_friend(self, a.clone(), b.clone())
    }

    fn add_preference(&self, p: &PrivacyPreference) -> Result<(), EngineError> {
        Engine::add_preference(self, p.clone())
    }

    fn publish(&self, r: &Resource) -> Result<PublicationDecision, EngineError> {
        Ok(Engine::publish(self, r))
    }

    fn dump(&self) -> Result<StateDump, EngineError> {
        Ok(Engine::dump(self))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReplaySettings {
    pub options: EngineOptions,
    pub semantic: SemanticParams,
    /// Submit consecutive publishes two at a time and check the result
    /// against both sequential orders.
    pub concurrent: bool,
}

/// One line of replay output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum LogEntry {
    AddUser { seq: u64, user: UserId, created: bool },
    AddFriend { seq: u64, a: UserId, b: UserId, created: bool },
    AddPref { seq: u64, pid: crate::model::Pid },
    Publish { seq: u64, decision: PublicationDecision },
    Verify { seq: u64, clean: bool, violations: Vec<Violation> },
    Serializability { seqs: [u64; 2], serializable: bool },
    FinalStore { store: StateDump },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Clean = 0,
    InputError = 2,
    Violations = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub log: Vec<LogEntry>,
    pub status: ExitStatus,
    /// Diagnostic for an input error, with the offending seq.
    pub error: Option<String>,
}

impl ReplayReport {
    pub fn to_json_lines(&self) -> String {
        let mut s = String::new();
        for e in &self.log {
            s.push_str(&serde_json::to_string(e).expect("log entries serialize"));
            s.push('\n');
        }
        s
    }

    pub fn decisions(&self) -> impl Iterator<Item = (u64, &PublicationDecision)> {
        self.log.iter().filter_map(|e| match e {
            LogEntry::Publish { seq, decision } => Some((*seq, decision)),
            _ => None,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> std::io::Result<()> {
        w.write_all(self.to_json_lines().as_bytes())
    }
}

/// Verify a dumped state with the oracle.
pub fn verify_dump(dump: &StateDump, settings: &ReplaySettings, semantic: bool) -> Vec<Violation> {
    let config = &settings.options.config;
    let Ok(engine) = Engine::from_dump(settings.options, dump) else {
        return Vec::new();
    };
    let store = engine.store();
    let prefs = engine.preferences();
    let Some(horizon) = default_horizon(&store, config) else {
        return Vec::new();
    };
    let mut v = check_conditions(&store, &prefs, config, settings.options.overlap, &horizon);
    if semantic {
        v.extend(check_semantic_privacy(&store, &prefs, config, &horizon, &settings.semantic));
    }
    v
}

/// Whether publishing `a` and `b` in some order from `before` yields `after`.
pub fn serializable(
    before: &StateDump,
    a: &Resource,
    b: &Resource,
    after: &StateDump,
    options: EngineOptions,
) -> bool {
    let expected = after.to_json();
    [(a, b), (b, a)].iter().any(|(x, y)| {
        let Ok(engine) = Engine::from_dump(options, before) else {
            return false;
        };
        engine.publish(x);
        engine.publish(y);
        engine.dump().to_json() == expected
    })
}

/// Apply `commands` in order. Stops at the first input error.
pub fn replay<B: Backend>(commands: &[TraceCommand], backend: &B, settings: &ReplaySettings) -> ReplayReport {
    let mut log = Vec::new();
    let mut violations = false;
    let fail = |log: Vec<LogEntry>, seq: u64, msg: String| ReplayReport {
        log,
        status: ExitStatus::InputError,
        error: Some(format!("seq {seq}: {msg}")),
    };
    let mut i = 0;
    while i < commands.len() {
        let TraceCommand { seq, op } = &commands[i];
        let seq = *seq;
        match op {
            Op::AddUser { user } => match backend.add_user(user) {
                Ok(created) => log.push(LogEntry::AddUser { seq, user: user.clone(), created }),
                Err(e) => return fail(log, seq, e.to_string()),
            },
            Op::AddFriend { a, b } => match backend.add_friend(a, b) {
                Ok(created) => log.push(LogEntry::AddFriend {
                    seq,
                    a: a.clone(),
                    b: b.clone(),
                    created,
                }),
                Err(e) => return fail(log, seq, e.to_string()),
            },
            Op::AddPref(p) => match backend.add_preference(p) {
                Ok(()) => log.push(LogEntry::AddPref { seq, pid: p.pid.clone() }),
                Err(e) => return fail(log, seq, e.to_string()),
            },
            Op::Publish(r) => {
                let partner = match commands.get(i + 1) {
                    Some(TraceCommand { seq: s2, op: Op::Publish(r2) }) if settings.concurrent => Some((*s2, r2)),
                    _ => None,
                };
                match partner {
                    None => match backend.publish(r) {
                        Ok(decision) => log.push(LogEntry::Publish { seq, decision }),
                        Err(e) => return fail(log, seq, e.to_string()),
                    },
                    Some((seq2, r2)) => {
                        let before = match backend.dump() {
                            Ok(d) => d,
                            Err(e) => return fail(log, seq, e.to_string()),
                        };
                        let (d1, d2) = std::thread::scope(|s| {
                            let h1 = s.spawn(|| backend.publish(r));
                            let h2 = s.spawn(|| backend.publish(r2));
                            (h1.join().expect("publisher"), h2.join().expect("publisher"))
                        });
                        let (d1, d2) = match (d1, d2) {
                            (Ok(a), Ok(b)) => (a, b),
                            (Err(e), _) | (_, Err(e)) => return fail(log, seq, e.to_string()),
                        };
                        let after = match backend.dump() {
                            Ok(d) => d,
                            Err(e) => return fail(log, seq2, e.to_string()),
                        };
                        let ok = serializable(&before, r, r2, &after, settings.options);
                        violations |= !ok;
                        log.push(LogEntry::Publish { seq, decision: d1 });
                        log.push(LogEntry::Publish { seq: seq2, decision: d2 });
                        log.push(LogEntry::Serializability {
                            seqs: [seq, seq2],
                            serializable: ok,
                        });
                        i += 1;
                    }
                }
            }
            Op::Verify(req) => {
                let dump = match backend.dump() {
                    Ok(d) => d,
                    Err(e) => return fail(log, seq, e.to_string()),
                };
                let found = verify_dump(&dump, settings, req.semantic);
                violations |= !found.is_empty();
                log.push(LogEntry::Verify {
                    seq,
                    clean: found.is_empty(),
                    violations: found,
                });
            }
        }
        i += 1;
    }
    if !commands.is_empty() {
        match backend.dump() {
            Ok(store) => log.push(LogEntry::FinalStore { store }),
            Err(e) => return fail(log, commands[commands.len() - 1].seq, e.to_string()),
        }
    }
    ReplayReport {
        log,
        status: if violations { ExitStatus::Violations } else { ExitStatus::Clean },
        error: None,
    }
}
