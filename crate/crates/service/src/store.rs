//! Screening sessions and their append-only decision log.
//!
//! Every mutation is one JSON line, written and synced before the in-memory
//! state changes. Replaying the log from the top rebuilds the same state.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use trialink_core::{MethodConfig, NctId, Pmid};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("decision log I/O: {0}")]
    Io(#[from] io::Error),

    #[error("decision log line {line}: {message}")]
    Corrupt { line: usize, message: String },

    #[error("no screening session for {0}")]
    NotFound(String),

    #[error("{0}")]
    Conflict(String),

    #[error("{0}")]
    InvalidArgument(String),
}

pub type StoreResult<T> = Result<T, StoreError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Confirmed,
    Rejected,
    Unsure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Open,
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub decision: Decision,
    pub decided_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// A confirmation that was replaced by a later one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub at: DateTime<Utc>,
    pub pmid: Pmid,
    pub from: Decision,
    pub to: Decision,
    pub superseded_by: Pmid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub nct_id: NctId,
    pub config: MethodConfig,
    pub k: usize,
    /// Candidate pmids in rank order, fixed when the session opens.
    pub candidates: Vec<Pmid>,
    pub decisions: BTreeMap<Pmid, DecisionRecord>,
    pub status: SessionStatus,
    pub opened_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
    #[serde(default)]
    pub audit: Vec<AuditEntry>,
    #[serde(default)]
    pub decision_ids: BTreeSet<String>,
}

impl Session {
    pub fn confirmed(&self) -> Option<(Pmid, &DecisionRecord)> {
        self.decisions
            .iter()
            .find(|(_, d)| d.decision == Decision::Confirmed)
            .map(|(p, d)| (*p, d))
    }

    /// 1-based rank of a candidate.
    pub fn rank_of(&self, pmid: Pmid) -> Option<usize> {
        self.candidates
            .iter()
            .position(|&p| p == pmid)
            .map(|i| i + 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
enum Event {
    SessionOpened {
        nct_id: NctId,
        config: MethodConfig,
        k: usize,
        candidates: Vec<Pmid>,
        at: DateTime<Utc>,
    },
    Decided {
        nct_id: NctId,
        pmid: Pmid,
        decision: Decision,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        decision_id: Option<String>,
        /// Earlier confirmation this one replaces, demoted to rejected.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        demoted: Option<Pmid>,
        at: DateTime<Utc>,
    },
    Reopened {
        nct_id: NctId,
        at: DateTime<Utc>,
    },
    Snapshot {
        session: Box<Session>,
    },
}

#[derive(Debug, Serialize, Deserialize)]
struct LogLine {
    seq: u64,
    #[serde(flatten)]
    event: Event,
}

/// A new decision as submitted by a reviewer.
#[derive(Debug, Clone, Deserialize)]
pub struct DecisionRequest {
    pub pmid: Pmid,
    pub decision: Decision,
    #[serde(default)]
    pub note: Option<String>,
    #[serde(default)]
    pub decision_id: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SessionCounts {
    pub open: usize,
    pub closed: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DecisionCounts {
    pub confirmed: usize,
    pub rejected: usize,
    pub unsure: usize,
    pub total: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScreeningPoint {
    pub inspected: usize,
    pub found: usize,
    pub recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Progress {
    pub sessions: SessionCounts,
    pub decisions: DecisionCounts,
    pub candidates_offered: usize,
    pub candidates_decided: usize,
    pub sessions_with_confirmed_link: usize,
    /// For each screening depth, how many confirmed links sit at or above it.
    pub screening_curve: Vec<ScreeningPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfirmedLink {
    pub nct_id: NctId,
    pub pmid: Pmid,
    pub decided_at: DateTime<Utc>,
    pub rank: usize,
    pub config: MethodConfig,
    pub session: String,
}

pub const CONFIRMED_TSV_HEADER: &str = "nct_id\tpmid\tdecided_at\trank\tconfig";

pub fn write_confirmed_tsv<W: Write>(links: &[ConfirmedLink], mut out: W) -> io::Result<()> {
    writeln!(out, "{CONFIRMED_TSV_HEADER}")?;
    for l in links {
        writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            l.nct_id,
            l.pmid,
            l.decided_at.to_rfc3339(),
            l.rank,
            l.config
        )?;
    }
    Ok(())
}

pub struct Store {
    path: PathBuf,
    file: File,
    seq: u64,
    since_compaction: u64,
    compact_every: Option<u64>,
    sessions: BTreeMap<NctId, Session>,
}

impl Store {
    /// Opens or creates the log at `path` and replays it. A final line cut
    /// short by a crash is dropped; any other unreadable line is an error.
    pub fn open(path: impl AsRef<Path>) -> StoreResult<Store> {
        let path = path.as_ref().to_path_buf();
        let mut sessions = BTreeMap::new();
        let mut seq = 0;
        let mut lines = 0;
        if path.exists() {
            let raw = fs::read(&path)?;
            let complete = raw.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
            if complete < raw.len() {
                log::warn!(
                    "{}: dropping {} bytes of an unfinished final entry",
                    path.display(),
                    raw.len() - complete
                );
                OpenOptions::new()
                    .write(true)
                    .open(&path)?
                    .set_len(complete as u64)?;
            }
            for (i, line) in raw[..complete].split(|&b| b == b'\n').enumerate() {
                if line.iter().all(u8::is_ascii_whitespace) {
                    continue;
                }
                let corrupt = |message: String| StoreError::Corrupt {
                    line: i + 1,
                    message,
                };
                let entry: LogLine =
                    serde_json::from_slice(line).map_err(|e| corrupt(e.to_string()))?;
                if entry.seq <= seq {
                    return Err(corrupt(format!(
                        "sequence {} does not follow {seq}",
                        entry.seq
                    )));
                }
                seq = entry.seq;
                apply(&mut sessions, entry.event).map_err(corrupt)?;
                lines += 1;
            }
        }
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent)?;
        }
        let file = OpenOptions::new().create(true).append(true).open(&path)?;
        Ok(Store {
            path,
            file,
            seq,
            since_compaction: lines,
            compact_every: None,
            sessions,
        })
    }

    /// Compacts automatically once this many entries were appended since the
    /// last compaction.
    pub fn with_compaction_every(mut self, n: u64) -> Store {
        self.compact_every = Some(n.max(1));
        self
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn sessions(&self) -> &BTreeMap<NctId, Session> {
        &self.sessions
    }

    pub fn session(&self, nct_id: &NctId) -> Option<&Session> {
        self.sessions.get(nct_id)
    }

    fn append(&mut self, event: Event) -> StoreResult<()> {
        let mut line = serde_json::to_vec(&LogLine {
            seq: self.seq + 1,
            event: event.clone(),
        })
        .map_err(io::Error::other)?;
        line.push(b'\n');
        self.file.write_all(&line)?;
        self.file.sync_data()?;
        self.seq += 1;
        self.since_compaction += 1;
        apply(&mut self.sessions, event).map_err(StoreError::Conflict)?;
        if self
            .compact_every
            .is_some_and(|n| self.since_compaction >= n)
        {
            self.compact()?;
        }
        Ok(())
    }

    /// Opens a session unless one exists; returns the session either way.
    pub fn open_session(
        &mut self,
        nct_id: &NctId,
        config: MethodConfig,
        k: usize,
        candidates: Vec<Pmid>,
    ) -> StoreResult<&Session> {
        if !self.sessions.contains_key(nct_id) {
            self.append(Event::SessionOpened {
                nct_id: nct_id.clone(),
                config,
                k,
                candidates,
                at: Utc::now(),
            })?;
        }
        Ok(&self.sessions[nct_id])
    }

    /// Records a decision. A repeated `decision_id` returns the session
    /// unchanged. Confirming closes the session; confirming a second article
    /// after a reopen demotes the first confirmation to rejected.
    pub fn decide(&mut self, nct_id: &NctId, req: DecisionRequest) -> StoreResult<&Session> {
        let session = self
            .sessions
            .get(nct_id)
            .ok_or_else(|| StoreError::NotFound(nct_id.to_string()))?;
        if req
            .decision_id
            .as_ref()
            .is_some_and(|id| session.decision_ids.contains(id))
        {
            return Ok(&self.sessions[nct_id]);
        }
        if session.status == SessionStatus::Closed {
            return Err(StoreError::Conflict(format!(
                "session {nct_id} is closed; reopen it first"
            )));
        }
        if session.rank_of(req.pmid).is_none() {
            return Err(StoreError::InvalidArgument(format!(
                "{} is not a candidate for {nct_id}",
                req.pmid
            )));
        }
        let demoted = match (req.decision, session.confirmed()) {
            (Decision::Confirmed, Some((prev, _))) if prev != req.pmid => Some(prev),
            _ => None,
        };
        self.append(Event::Decided {
            nct_id: nct_id.clone(),
            pmid: req.pmid,
            decision: req.decision,
            note: req.note,
            decision_id: req.decision_id,
            demoted,
            at: Utc::now(),
        })?;
        Ok(&self.sessions[nct_id])
    }

    /// Reopens a closed session. Reopening an open one is a no-op.
    pub fn reopen(&mut self, nct_id: &NctId) -> StoreResult<&Session> {
        let session = self
            .sessions
            .get(nct_id)
            .ok_or_else(|| StoreError::NotFound(nct_id.to_string()))?;
        if session.status == SessionStatus::Closed {
            self.append(Event::Reopened {
                nct_id: nct_id.clone(),
                at: Utc::now(),
            })?;
        }
        Ok(&self.sessions[nct_id])
    }

    /// Rewrites the log as one snapshot per session. The new log is synced
    /// and renamed over the old one, so a crash leaves one of the two intact.
    pub fn compact(&mut self) -> StoreResult<()> {
        let tmp = self.path.with_extension("compacting");
        let mut out = File::create(&tmp)?;
        let mut seq = 0;
        for session in self.sessions.values() {
            seq += 1;
            let line = LogLine {
                seq,
                event: Event::Snapshot {
                    session: Box::new(session.clone()),
                },
            };
            serde_json::to_writer(&mut out, &line).map_err(io::Error::other)?;
            out.write_all(b"\n")?;
        }
        out.sync_all()?;
        drop(out);
        fs::rename(&tmp, &self.path)?;
        if let Some(dir) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            File::open(dir)?.sync_all()?;
        }
        self.file = OpenOptions::new().append(true).open(&self.path)?;
        self.seq = seq;
        self.since_compaction = 0;
        log::info!("compacted {} to {seq} sessions", self.path.display());
        Ok(())
    }

    pub fn progress(&self) -> Progress {
        let mut sessions = SessionCounts::default();
        let mut decisions = DecisionCounts::default();
        let (mut offered, mut decided, mut depth) = (0, 0, 0);
        let mut confirmed_ranks = Vec::new();
        for s in self.sessions.values() {
            match s.status {
                SessionStatus::Open => sessions.open += 1,
                SessionStatus::Closed => sessions.closed += 1,
            }
            offered += s.candidates.len();
            decided += s.decisions.len();
            depth = depth.max(s.k);
            for d in s.decisions.values() {
                match d.decision {
                    Decision::Confirmed => decisions.confirmed += 1,
                    Decision::Rejected => decisions.rejected += 1,
                    Decision::Unsure => decisions.unsure += 1,
                }
            }
            if let Some(rank) = s.confirmed().and_then(|(p, _)| s.rank_of(p)) {
                confirmed_ranks.push(rank);
            }
        }
        sessions.total = sessions.open + sessions.closed;
        decisions.total = decisions.confirmed + decisions.rejected + decisions.unsure;
        let n_found = confirmed_ranks.len();
        let screening_curve = if n_found == 0 {
            Vec::new()
        } else {
            (1..=depth)
                .map(|inspected| {
                    let found = confirmed_ranks.iter().filter(|&&r| r <= inspected).count();
                    ScreeningPoint {
                        inspected,
                        found,
                        recall: found as f64 / n_found as f64,
                    }
                })
                .collect()
        };
        Progress {
            sessions,
            decisions,
            candidates_offered: offered,
            candidates_decided: decided,
            sessions_with_confirmed_link: n_found,
            screening_curve,
        }
    }

    /// Current confirmations, sorted by registration.
    pub fn confirmed_links(&self) -> Vec<ConfirmedLink> {
        self.sessions
            .values()
            .filter_map(|s| {
                let (pmid, d) = s.confirmed()?;
                Some(ConfirmedLink {
                    nct_id: s.nct_id.clone(),
                    pmid,
                    decided_at: d.decided_at,
                    rank: s.rank_of(pmid)?,
                    config: s.config,
                    session: format!("/api/sessions/{}", s.nct_id),
                })
            })
            .collect()
    }
}

fn apply(sessions: &mut BTreeMap<NctId, Session>, event: Event) -> Result<(), String> {
    match event {
        Event::SessionOpened {
            nct_id,
            config,
            k,
            candidates,
            at,
        } => {
            if sessions.contains_key(&nct_id) {
                return Err(format!("session {nct_id} opened twice"));
            }
            let session = Session {
                nct_id: nct_id.clone(),
                config,
                k,
                candidates,
                decisions: BTreeMap::new(),
                status: SessionStatus::Open,
                opened_at: at,
                updated_at: at,
                audit: Vec::new(),
                decision_ids: BTreeSet::new(),
            };
            sessions.insert(nct_id, session);
        }
        Event::Decided {
            nct_id,
            pmid,
            decision,
            note,
            decision_id,
            demoted,
            at,
        } => {
            let s = sessions
                .get_mut(&nct_id)
                .ok_or_else(|| format!("decision for unopened session {nct_id}"))?;
            if let Some(prev) = demoted {
                let from = s
                    .decisions
                    .get(&prev)
                    .map(|d| d.decision)
                    .ok_or_else(|| format!("demoted {prev} was never decided"))?;
                s.decisions.insert(
                    prev,
                    DecisionRecord {
                        decision: Decision::Rejected,
                        decided_at: at,
                        note: None,
                    },
                );
                s.audit.push(AuditEntry {
                    at,
                    pmid: prev,
                    from,
                    to: Decision::Rejected,
                    superseded_by: pmid,
                });
            }
            s.decisions.insert(
                pmid,
                DecisionRecord {
                    decision,
                    decided_at: at,
                    note,
                },
            );
            s.decision_ids.extend(decision_id);
            if decision == Decision::Confirmed {
                s.status = SessionStatus::Closed;
            }
            s.updated_at = at;
        }
        Event::Reopened { nct_id, at } => {
            let s = sessions
                .get_mut(&nct_id)
                .ok_or_else(|| format!("reopen of unopened session {nct_id}"))?;
            s.status = SessionStatus::Open;
            s.updated_at = at;
        }
        Event::Snapshot { session } => {
            sessions.insert(session.nct_id.clone(), *session);
        }
    }
    Ok(())
}
