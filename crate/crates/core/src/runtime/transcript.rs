use serde::{Deserialize, Serialize};

/// Classes of plaintext a party can end up holding during a protocol run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PlainKind {
    /// e = x - a or f = y - b reconstructed by the active party.
    BeaverMasked,
    /// e or f received from the active party's broadcast.
    BeaverBroadcast,
    /// U·P opened at the inversion aggregator.
    AggregatedUp,
    /// Masks or matrices the party sampled itself.
    OwnRandomness,
    /// z + r opened by the active party during fixed-point truncation.
    TruncationMasked,
    /// Per-candidate gradient sums opened to the active party for split selection.
    SplitStatistics,
    /// Public split decision or leaf marker broadcast by the active party.
    SplitDecision,
    /// Public routing bit for one split node at inference.
    RoutingBit,
    /// Aggregated training predictions at the active party.
    TrainingPrediction,
    /// Aggregated forecast at the requester, or routed to the active party.
    Forecast,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub kind: PlainKind,
    pub phase: String,
    pub rows: usize,
    pub cols: usize,
}

/// Everything one party materialized in plaintext, in order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    entries: Vec<TranscriptEntry>,
}

impl Transcript {
    pub fn record(&mut self, kind: PlainKind, phase: &str, rows: usize, cols: usize) {
        self.entries.push(TranscriptEntry {
            kind,
            phase: phase.to_string(),
            rows,
            cols,
        });
    }

    pub fn entries(&self) -> &[TranscriptEntry] {
        &self.entries
    }

    pub fn kinds(&self) -> impl Iterator<Item = PlainKind> + '_ {
        self.entries.iter().map(|e| e.kind)
    }

    /// Entries whose kind is not in `allowed`.
    pub fn violations<'a>(&'a self, allowed: &'a [PlainKind]) -> Vec<&'a TranscriptEntry> {
        self.entries
            .iter()
            .filter(|e| !allowed.contains(&e.kind))
            .collect()
    }
}
