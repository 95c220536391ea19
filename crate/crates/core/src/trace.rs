//! Episode trace: timestamped events on an integer-microsecond clock plus
//! totals that can be recomputed from the events.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const US_PER_S: u64 = 1_000_000;

/// Rounds a non-negative duration in seconds to whole microseconds.
pub fn secs_to_us(s: f64) -> u64 {
    debug_assert!(s >= 0.0 && s.is_finite(), "bad duration {s}");
    (s.max(0.0) * US_PER_S as f64).round() as u64
}

pub fn us_to_secs(us: u64) -> f64 {
    us as f64 / US_PER_S as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Reflection,
    InfoGathering,
    SubtaskProposal,
    ActionPlanning,
}

impl Stage {
    pub const ORDER: [Stage; 4] = [Stage::Reflection, Stage::InfoGathering, Stage::SubtaskProposal, Stage::ActionPlanning];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Reflection => "reflection",
            Stage::InfoGathering => "info_gathering",
            Stage::SubtaskProposal => "subtask_proposal",
            Stage::ActionPlanning => "action_planning",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillSource {
    Fm,
    Connector,
    Setup,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventKind {
    Skill {
        call: String,
        source: SkillSource,
        duration_us: u64,
        distance: f64,
        walking: bool,
        status: String,
    },
    Detection {
        labels: Vec<String>,
        target: Option<String>,
        depth: Option<f64>,
    },
    FmQuery {
        stage: Stage,
        prompt_sha256: String,
        response: String,
        latency_us: u64,
        parsed: serde_json::Value,
    },
    ConnectorDecision {
        behavior: String,
        reason: String,
        latency_us: u64,
    },
    SubprocessDone {
        index: usize,
        description: String,
    },
    Collision {
        obstacle: String,
        x: f64,
        y: f64,
    },
    Terminate {
        outcome: Outcome,
        reason: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    /// Clock reading when the event started, in microseconds.
    pub t_us: u64,
    /// Index of the planner decision point the event belongs to.
    pub decision: u32,
    /// Whether that decision point worked on a navigation subprocess.
    pub nav: bool,
    #[serde(flatten)]
    pub event: EventKind,
}

impl TraceEvent {
    /// Simulated time the event consumes.
    pub fn cost_us(&self) -> u64 {
        match &self.event {
            EventKind::Skill { duration_us, .. } => *duration_us,
            EventKind::FmQuery { latency_us, .. } | EventKind::ConnectorDecision { latency_us, .. } => *latency_us,
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    BudgetExhausted,
    Aborted,
    /// Planner declared success while subprocesses were still open.
    FalseSuccess,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub distance_m: f64,
    pub sim_us: u64,
    pub sim_seconds: f64,
    pub skill_us: u64,
    pub fm_us: u64,
    pub connector_us: u64,
    pub fm_queries: u64,
    pub connector_decisions: u64,
    pub decisions: u32,
    pub outcome: Option<Outcome>,
    pub subprocesses: Vec<bool>,
}

/// Labels identifying the run a trace came from.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub task: String,
    pub config: String,
    pub seed: u64,
    pub subprocesses: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
    clock_us: u64,
    decision: u32,
    nav: bool,
    distance_m: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("inconsistent trace: {0}")]
    Inconsistent(String),
    #[error("trace i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

#[derive(Serialize, Deserialize)]
struct TotalsLine {
    totals: Totals,
    #[serde(flatten)]
    header: TraceHeader,
}

impl EpisodeTrace {
    pub fn new(header: TraceHeader) -> Self {
        EpisodeTrace { header, ..Default::default() }
    }

    pub fn now_us(&self) -> u64 {
        self.clock_us
    }

    pub fn now(&self) -> f64 {
        us_to_secs(self.clock_us)
    }

    /// Path length walked so far.
    pub fn distance(&self) -> f64 {
        self.distance_m
    }

    pub fn decision(&self) -> u32 {
        self.decision
    }

    /// Opens a new decision point.
    pub fn begin_decision(&mut self, nav: bool) {
        self.decision += 1;
        self.nav = nav;
    }

    /// Appends an event stamped with the current clock, then advances the
    /// clock by the event's cost.
    pub fn push(&mut self, event: EventKind) {
        let ev = TraceEvent { t_us: self.clock_us, decision: self.decision, nav: self.nav, event };
        self.clock_us += ev.cost_us();
        if let EventKind::Skill { distance, .. } = &ev.event {
            self.distance_m += distance;
        }
        self.events.push(ev);
    }

    pub fn outcome(&self) -> Option<Outcome> {
        self.events.iter().rev().find_map(|e| match &e.event {
            EventKind::Terminate { outcome, .. } => Some(*outcome),
            _ => None,
        })
    }

    /// Totals recomputed from the events.
    pub fn totals(&self) -> Totals {
        let mut t = Totals {
            distance_m: 0.0,
            sim_us: 0,
            sim_seconds: 0.0,
            skill_us: 0,
            fm_us: 0,
            connector_us: 0,
            fm_queries: 0,
            connector_decisions: 0,
            decisions: 0,
            outcome: self.outcome(),
            subprocesses: vec![false; self.header.subprocesses.len()],
        };
        for e in &self.events {
            t.decisions = t.decisions.max(e.decision);
            match &e.event {
                EventKind::Skill { duration_us, distance, .. } => {
                    t.skill_us += duration_us;
                    t.distance_m += distance;
                }
                EventKind::FmQuery { latency_us, .. } => {
                    t.fm_us += latency_us;
                    t.fm_queries += 1;
                }
                EventKind::ConnectorDecision { latency_us, .. } => {
                    t.connector_us += latency_us;
                    t.connector_decisions += 1;
                }
                EventKind::SubprocessDone { index, .. } => {
                    if let Some(s) = t.subprocesses.get_mut(*index) {
                        *s = true;
                    }
                }
                _ => {}
            }
        }
        t.sim_us = t.skill_us + t.fm_us + t.connector_us;
        t.sim_seconds = us_to_secs(t.sim_us);
        t
    }

    /// Checks ordering, ledger closure and the final clock reading.
    pub fn check(&self) -> Result<Totals, TraceError> {
        let mut clock = 0u64;
        for (i, e) in self.events.iter().enumerate() {
            if e.t_us != clock {
                return Err(TraceError::Inconsistent(format!("event {i} stamped {} but clock reads {clock}", e.t_us)));
            }
            clock += e.cost_us();
        }
        let t = self.totals();
        if t.sim_us != clock || (self.clock_us != 0 && self.clock_us != clock) {
            return Err(TraceError::Inconsistent(format!("ledger sums to {} us, clock reads {clock} us", t.sim_us)));
        }
        Ok(t)
    }

    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), TraceError> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e).map_err(|source| TraceError::Json { line: 0, source })?;
            w.write_all(b"\n")?;
        }
        let line = TotalsLine { totals: self.totals(), header: self.header.clone() };
        serde_json::to_writer(&mut w, &line).map_err(|source| TraceError::Json { line: 0, source })?;
        w.write_all(b"\n")?;
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    /// Parses a trace file and verifies the stored totals against the events.
    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self, TraceError> {
        let mut lines: Vec<(usize, String)> = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if !line.trim().is_empty() {
                lines.push((i + 1, line));
            }
        }
        let (last_no, last) = lines.pop().ok_or_else(|| TraceError::Inconsistent("empty trace".into()))?;
        let totals: TotalsLine = serde_json::from_str(&last).map_err(|source| TraceError::Json { line: last_no, source })?;
        let mut trace = EpisodeTrace::new(totals.header);
        for (no, line) in lines {
            let ev: TraceEvent = serde_json::from_str(&line).map_err(|source| TraceError::Json { line: no, source })?;
            trace.clock_us = ev.t_us + ev.cost_us();
            trace.decision = ev.decision;
            if let EventKind::Skill { distance, .. } = &ev.event {
                trace.distance_m += distance;
            }
            trace.events.push(ev);
        }
        let recomputed = trace.check()?;
        if recomputed != totals.totals {
            return Err(TraceError::Inconsistent("stored totals differ from recomputed totals".into()));
        }
        Ok(trace)
    }

    /// SHA-256 of the JSONL serialisation, hex encoded.
    pub fn hash(&self) -> String {
        hex_digest(self.to_jsonl().as_bytes())
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> EpisodeTrace {
        let mut t = EpisodeTrace::new(TraceHeader { task: "t".into(), config: "c".into(), seed: 1, subprocesses: vec!["a".into()] });
        t.begin_decision(true);
        t.push(EventKind::FmQuery {
            stage: Stage::Reflection,
            prompt_sha256: "x".into(),
            response: "r".into(),
            latency_us: 8 * US_PER_S,
            parsed: serde_json::Value::Null,
        });
        t.push(EventKind::ConnectorDecision { behavior: "navigate".into(), reason: String::new(), latency_us: US_PER_S });
        t.push(EventKind::Skill {
            call: "go_straight(\"large\")".into(),
            source: SkillSource::Connector,
            duration_us: 3 * US_PER_S,
            distance: 0.9,
            walking: true,
            status: "ok".into(),
        });
        t.push(EventKind::SubprocessDone { index: 0, description: "a".into() });
        t.push(EventKind::Terminate { outcome: Outcome::Success, reason: String::new() });
        t
    }

    #[test]
    fn ledger_closes() {
        let t = sample();
        let tot = t.check().unwrap();
        assert_eq!(tot.sim_us, 12 * US_PER_S);
        assert_eq!(tot.fm_queries, 1);
        assert_eq!(tot.subprocesses, vec![true]);
        assert_eq!(t.now_us(), tot.sim_us);
    }

    #[test]
    fn jsonl_round_trip() {
        let t = sample();
        let text = t.to_jsonl();
        assert_eq!(text.lines().count(), t.events.len() + 1);
        let back = EpisodeTrace::read_jsonl(text.as_bytes()).unwrap();
        assert_eq!(back.events, t.events);
        assert_eq!(back.hash(), t.hash());
    }

    #[test]
    fn tampered_stamp_detected() {
        let mut t = sample();
        t.events[2].t_us += 1;
        assert!(matches!(t.check(), Err(TraceError::Inconsistent(_))));
    }

    #[test]
    fn microsecond_rounding() {
        assert_eq!(secs_to_us(0.2), 200_000);
        assert_eq!(secs_to_us(3.0), 3_000_000);
        assert_eq!(secs_to_us(0.4), 400_000);
    }
}
