use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::phase;
use super::Endpoint;
use crate::numeric::ELEMENT_BYTES;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub phase: String,
    pub from: Endpoint,
    pub to: Endpoint,
    pub elements: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub messages: u64,
    pub elements: u64,
    pub bytes: u64,
}

impl std::ops::Add for Totals {
    type Output = Totals;
    fn add(self, o: Totals) -> Totals {
        Totals {
            messages: self.messages + o.messages,
            elements: self.elements + o.elements,
            bytes: self.bytes + o.bytes,
        }
    }
}

impl std::ops::AddAssign for Totals {
    fn add_assign(&mut self, o: Totals) {
        *self = *self + o;
    }
}

impl Totals {
    pub fn of_elements(messages: u64, elements: u64) -> Self {
        Totals {
            messages,
            elements,
            bytes: elements * ELEMENT_BYTES,
        }
    }
}

/// Totals with and without coordinator traffic, plus a per-phase breakdown.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub total: Totals,
    pub without_triples: Totals,
    pub by_phase: BTreeMap<String, Totals>,
}

impl LedgerSummary {
    /// Adds another run's traffic to this one.
    pub fn absorb(&mut self, other: &LedgerSummary) {
        self.total += other.total;
        self.without_triples += other.without_triples;
        for (phase, t) in &other.by_phase {
            *self.by_phase.entry(phase.clone()).or_default() += *t;
        }
    }
}

impl From<&CommLedger> for LedgerSummary {
    fn from(l: &CommLedger) -> Self {
        LedgerSummary {
            total: l.total(None),
            without_triples: l.total_without_triples(),
            by_phase: l.by_phase(),
        }
    }
}

/// Append-only record of every message sent in a session.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommLedger {
    entries: Vec<LedgerEntry>,
}

impl CommLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, phase: &str, from: Endpoint, to: Endpoint, elements: u64) {
        self.entries.push(LedgerEntry {
            phase: phase.to_string(),
            from,
            to,
            elements,
            bytes: elements * ELEMENT_BYTES,
        });
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Totals over all entries, or over one phase when `phase` is given.
    pub fn total(&self, phase: Option<&str>) -> Totals {
        self.total_where(|p| phase.is_none_or(|want| p == want))
    }

    pub fn total_where(&self, mut keep: impl FnMut(&str) -> bool) -> Totals {
        self.entries
            .iter()
            .filter(|e| keep(&e.phase))
            .fold(Totals::default(), |acc, e| {
                acc + Totals {
                    messages: 1,
                    elements: e.elements,
                    bytes: e.bytes,
                }
            })
    }

    /// Totals without the coordinator's correlated-randomness deliveries.
    pub fn total_without_triples(&self) -> Totals {
        self.total_where(|p| p != phase::TRIPLES)
    }

    pub fn by_phase(&self) -> BTreeMap<String, Totals> {
        let mut out: BTreeMap<String, Totals> = BTreeMap::new();
        for e in &self.entries {
            *out.entry(e.phase.clone()).or_default() += Totals {
                messages: 1,
                elements: e.elements,
                bytes: e.bytes,
            };
        }
        out
    }

    pub fn extend(&mut self, other: &CommLedger) {
        self.entries.extend(other.entries.iter().cloned());
    }

    /// One JSON object per line: `{"phase","from","to","elements","bytes"}`.
    pub fn write_json_lines<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for e in &self.entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn to_json_lines(&self) -> String {
        let mut buf = Vec::new();
        self.write_json_lines(&mut buf).expect("in-memory write");
        String::from_utf8(buf).expect("serde_json emits utf-8")
    }
}
