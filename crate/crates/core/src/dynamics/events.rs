//! Simulation events and their newline-delimited serialization.

use std::collections::BTreeMap;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    FeederHandoverStart,
    FeederHandoverComplete,
    E2Reassignment,
    ClusterReformed,
    LeaderChanged,
    BudgetViolation,
    GroupUeHandover,
}

impl EventKind {
    pub const ALL: [EventKind; 7] = [
        EventKind::FeederHandoverStart,
        EventKind::FeederHandoverComplete,
        EventKind::E2Reassignment,
        EventKind::ClusterReformed,
        EventKind::LeaderChanged,
        EventKind::BudgetViolation,
        EventKind::GroupUeHandover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::FeederHandoverStart => "feeder_handover_start",
            EventKind::FeederHandoverComplete => "feeder_handover_complete",
            EventKind::E2Reassignment => "e2_reassignment",
            EventKind::ClusterReformed => "cluster_reformed",
            EventKind::LeaderChanged => "leader_changed",
            EventKind::BudgetViolation => "budget_violation",
            EventKind::GroupUeHandover => "group_ue_handover",
        }
    }
}

pub type Payload = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimEvent {
    pub time_s: f64,
    pub kind: EventKind,
    pub subject: String,
    #[serde(flatten)]
    pub payload: Payload,
}

impl SimEvent {
    pub fn new(time_s: f64, kind: EventKind, subject: impl Into<String>) -> Self {
        Self {
            time_s,
            kind,
            subject: subject.into(),
            payload: Payload::new(),
        }
    }

    pub fn with(mut self, key: &str, value: impl Into<Value>) -> Self {
        self.payload.insert(key.to_string(), value.into());
        self
    }

    pub fn str_field(&self, key: &str) -> Option<&str> {
        self.payload.get(key).and_then(Value::as_str)
    }

    pub fn f64_field(&self, key: &str) -> Option<f64> {
        self.payload.get(key).and_then(Value::as_f64)
    }
}

/// Events in (time, kind, subject, insertion) order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EventLog {
    pub events: Vec<SimEvent>,
}

impl EventLog {
    pub fn push(&mut self, e: SimEvent) {
        self.events.push(e);
    }

    /// Stable sort, so equal keys keep insertion order.
    pub fn finalize(&mut self) {
        self.events.sort_by(|a, b| {
            a.time_s
                .total_cmp(&b.time_s)
                .then(a.kind.cmp(&b.kind))
                .then_with(|| a.subject.cmp(&b.subject))
        });
    }

    pub fn is_ordered(&self) -> bool {
        self.events.windows(2).all(|w| {
            (w[0].time_s, w[0].kind, &w[0].subject) <= (w[1].time_s, w[1].kind, &w[1].subject)
        })
    }

    pub fn of_kind(&self, kind: EventKind) -> impl Iterator<Item = &SimEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }

    pub fn counts(&self) -> BTreeMap<EventKind, u64> {
        let mut out: BTreeMap<EventKind, u64> = EventKind::ALL.iter().map(|k| (*k, 0)).collect();
        for e in &self.events {
            *out.entry(e.kind).or_default() += 1;
        }
        out
    }

    pub fn write_ndjson<W: Write>(&self, mut w: W) -> io::Result<()> {
        for e in &self.events {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn read_ndjson<R: BufRead>(r: R) -> io::Result<Self> {
        let mut events = Vec::new();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            events.push(serde_json::from_str(&line)?);
        }
        Ok(Self { events })
    }

    /// `kind,count` rows for every kind, zero counts included.
    pub fn write_counts_csv<W: Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["kind", "count"])?;
        for (k, n) in self.counts() {
            wr.write_record([k.as_str(), &n.to_string()])?;
        }
        wr.flush()?;
        Ok(())
    }
}
