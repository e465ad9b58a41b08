//! Simulated multi-party execution.
//!
//! A [`Session`] owns K party contexts and the coordinator. Parties talk only
//! through ordered per-channel queues; every send is billed to the
//! [`CommLedger`] and every plaintext a party reconstructs is logged in its
//! [`Transcript`]. Protocols run in lock-step in one thread: a protocol step
//! performs each party's local work, sends, then receives in a fixed order.

pub mod cost;
mod ledger;
mod transcript;

use std::collections::{BTreeMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

pub use cost::CostModel;
pub use ledger::{CommLedger, LedgerEntry, LedgerSummary, Totals};
pub use transcript::{PlainKind, Transcript, TranscriptEntry};

use crate::error::{Error, Result};
use crate::numeric::Backend;
use crate::sharing::ShareData;

/// Protocol phase labels used on messages and ledger entries.
pub mod phase {
    pub const TRIPLES: &str = "triples";
    pub const SHARE_INPUT: &str = "share.input";
    pub const BEAVER_EF: &str = "beaver.ef";
    pub const BEAVER_BCAST: &str = "beaver.ef.bcast";
    pub const TRUNC_MASK: &str = "trunc.mask";
    pub const ALG5_SHARE_P: &str = "alg5.share-P";
    pub const ALG5_AGGREGATE_UP: &str = "alg5.aggregate-UP";
    pub const ALG5_SHARE_INV: &str = "alg5.share-inv";
    pub const TREE_GH: &str = "tree.gh";
    pub const TREE_DECISION: &str = "tree.decision";
    pub const TREE_PRED: &str = "tree.pred";
    pub const TREE_ROUTE: &str = "tree.route";
    pub const FORECAST_AGGREGATE: &str = "forecast.aggregate";
    pub const FORECAST_LAG_ROUTE: &str = "forecast.lag-route";
}

/// 1-based party index; party 1 is the active (label-owning) party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PartyId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Active,
    Passive,
}

impl PartyId {
    pub const ACTIVE: PartyId = PartyId(1);

    pub fn role(self) -> Role {
        if self.0 == 1 {
            Role::Active
        } else {
            Role::Passive
        }
    }

    pub fn is_active(self) -> bool {
        self.role() == Role::Active
    }

    pub fn index(self) -> usize {
        self.0 - 1
    }

    pub fn all(parties: usize) -> impl Iterator<Item = PartyId> {
        (1..=parties).map(PartyId)
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", self.0)
    }
}

impl FromStr for PartyId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let digits = s
            .strip_prefix('C')
            .or_else(|| s.strip_prefix('c'))
            .unwrap_or(s);
        match digits.parse::<usize>() {
            Ok(i) if i >= 1 => Ok(PartyId(i)),
            _ => Err(Error::config(format!("invalid party id `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Endpoint {
    Party(PartyId),
    Coordinator,
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Party(p) => p.fmt(f),
            Endpoint::Coordinator => f.write_str("coordinator"),
        }
    }
}

impl Serialize for Endpoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Endpoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == "coordinator" {
            return Ok(Endpoint::Coordinator);
        }
        s.parse::<PartyId>()
            .map(Endpoint::Party)
            .map_err(serde::de::Error::custom)
    }
}

impl From<PartyId> for Endpoint {
    fn from(p: PartyId) -> Self {
        Endpoint::Party(p)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Message {
    pub from: Endpoint,
    pub to: Endpoint,
    pub phase: String,
    pub round: u64,
    pub rows: usize,
    pub cols: usize,
    pub payload: ShareData,
}

impl Message {
    pub fn new(
        from: impl Into<Endpoint>,
        to: impl Into<Endpoint>,
        phase: &str,
        rows: usize,
        cols: usize,
        payload: ShareData,
    ) -> Self {
        Message {
            from: from.into(),
            to: to.into(),
            phase: phase.to_string(),
            round: 0,
            rows,
            cols,
            payload,
        }
    }
}

/// Per-session settings beyond party count, backend and seed.
#[derive(Debug, Clone, Copy, Default)]
pub struct SessionOptions {
    /// Lets the harness (never a party) reconstruct intermediates.
    pub audit: bool,
}

pub struct Session {
    parties: usize,
    backend: Backend,
    seed: u64,
    party_rngs: Vec<ChaCha20Rng>,
    coordinator_rng: ChaCha20Rng,
    channels: BTreeMap<(Endpoint, Endpoint), VecDeque<Message>>,
    last_round: BTreeMap<(Endpoint, Endpoint), u64>,
    ledger: CommLedger,
    transcripts: Vec<Transcript>,
    round: u64,
    next_triple_id: u64,
    consumed_triples: HashSet<u64>,
    audit: bool,
    aborted: Option<String>,
}

fn derive_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over (seed, stream)
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl fmt::Debug for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Session")
            .field("parties", &self.parties)
            .field("backend", &self.backend)
            .field("seed", &self.seed)
            .field("round", &self.round)
            .field("ledger_entries", &self.ledger.len())
            .finish()
    }
}

/// K parties plus a coordinator, fully connected, fresh ledger.
pub fn spawn_session(parties: usize, backend: Backend, seed: u64) -> Result<Session> {
    Session::new(parties, backend, seed, SessionOptions::default())
}

impl Session {
    pub fn new(parties: usize, backend: Backend, seed: u64, opts: SessionOptions) -> Result<Self> {
        if parties < 2 {
            return Err(Error::ProtocolArity(parties));
        }
        let mut endpoints: Vec<Endpoint> = PartyId::all(parties).map(Endpoint::Party).collect();
        endpoints.push(Endpoint::Coordinator);
        let mut channels = BTreeMap::new();
        for &a in &endpoints {
            for &b in &endpoints {
                if a != b {
                    channels.insert((a, b), VecDeque::new());
                }
            }
        }
        Ok(Session {
            parties,
            backend,
            seed,
            party_rngs: (1..=parties as u64)
                .map(|k| ChaCha20Rng::seed_from_u64(derive_seed(seed, k)))
                .collect(),
            coordinator_rng: ChaCha20Rng::seed_from_u64(derive_seed(seed, 0)),
            channels,
            last_round: BTreeMap::new(),
            ledger: CommLedger::new(),
            transcripts: vec![Transcript::default(); parties],
            round: 0,
            next_triple_id: 0,
            consumed_triples: HashSet::new(),
            audit: opts.audit,
            aborted: None,
        })
    }

    pub fn parties(&self) -> usize {
        self.parties
    }

    pub fn party_ids(&self) -> impl Iterator<Item = PartyId> {
        PartyId::all(self.parties)
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn audit_enabled(&self) -> bool {
        self.audit
    }

    pub fn channel_count(&self) -> usize {
        self.channels.len()
    }

    pub fn ledger(&self) -> &CommLedger {
        &self.ledger
    }

    pub fn ledger_total(&self, phase: Option<&str>) -> Totals {
        self.ledger.total(phase)
    }

    pub fn transcript(&self, party: PartyId) -> &Transcript {
        &self.transcripts[party.index()]
    }

    pub fn record_plain(
        &mut self,
        party: PartyId,
        kind: PlainKind,
        phase: &str,
        rows: usize,
        cols: usize,
    ) {
        self.transcripts[party.index()].record(kind, phase, rows, cols);
    }

    pub fn party_rng(&mut self, party: PartyId) -> &mut ChaCha20Rng {
        &mut self.party_rngs[party.index()]
    }

    pub(crate) fn coordinator_rng(&mut self) -> &mut ChaCha20Rng {
        &mut self.coordinator_rng
    }

    /// The designated inversion aggregator: the lowest-index passive party.
    pub fn aggregator(&self) -> PartyId {
        PartyId(2)
    }

    pub fn check_party(&self, p: PartyId) -> Result<()> {
        if p.0 == 0 || p.0 > self.parties {
            return Err(Error::config(format!(
                "party {p} does not exist in a {}-party session",
                self.parties
            )));
        }
        Ok(())
    }

    fn ensure_live(&self) -> Result<()> {
        match &self.aborted {
            Some(why) => Err(Error::Desync(format!("session aborted earlier: {why}"))),
            None => Ok(()),
        }
    }

    fn abort(&mut self, why: String) -> Error {
        self.aborted = Some(why.clone());
        Error::Desync(why)
    }

    pub fn send(&mut self, mut msg: Message) -> Result<()> {
        self.ensure_live()?;
        if msg.payload.len() != msg.rows * msg.cols {
            return Err(self.abort(format!(
                "payload of {} elements does not match {}x{}",
                msg.payload.len(),
                msg.rows,
                msg.cols
            )));
        }
        let key = (msg.from, msg.to);
        if !self.channels.contains_key(&key) {
            return Err(self.abort(format!("no channel {} -> {}", msg.from, msg.to)));
        }
        self.round += 1;
        msg.round = self.round;
        if let Some(prev) = self.last_round.insert(key, msg.round) {
            debug_assert!(prev < msg.round);
        }
        self.ledger
            .record(&msg.phase, msg.from, msg.to, (msg.rows * msg.cols) as u64);
        self.channels
            .get_mut(&key)
            .expect("channel checked above")
            .push_back(msg);
        Ok(())
    }

    /// FIFO receive on the `from -> to` channel. A missing message or a phase
    /// other than `phase` aborts the session.
    pub fn recv(
        &mut self,
        to: impl Into<Endpoint>,
        from: impl Into<Endpoint>,
        phase: &str,
    ) -> Result<Message> {
        self.ensure_live()?;
        let (to, from) = (to.into(), from.into());
        let queue = self
            .channels
            .get_mut(&(from, to))
            .ok_or_else(|| Error::Desync(format!("no channel {from} -> {to}")))?;
        match queue.front() {
            None => Err(self.abort(format!(
                "{to} expected `{phase}` from {from}, channel empty"
            ))),
            Some(m) if m.phase != phase => {
                let got = m.phase.clone();
                Err(self.abort(format!("{to} expected `{phase}` from {from}, got `{got}`")))
            }
            Some(_) => Ok(queue.pop_front().expect("front exists")),
        }
    }

    /// Send then immediately receive on the same channel (lock-step delivery).
    pub fn transfer(
        &mut self,
        from: impl Into<Endpoint>,
        to: impl Into<Endpoint>,
        phase: &str,
        rows: usize,
        cols: usize,
        payload: ShareData,
    ) -> Result<ShareData> {
        let (from, to) = (from.into(), to.into());
        self.send(Message::new(from, to, phase, rows, cols, payload))?;
        Ok(self.recv(to, from, phase)?.payload)
    }

    pub(crate) fn fresh_triple_id(&mut self) -> u64 {
        self.next_triple_id += 1;
        self.next_triple_id
    }

    /// Marks a triple as used; using it a second time is a protocol-safety error.
    pub(crate) fn consume_triple(&mut self, id: u64) -> Result<()> {
        if !self.consumed_triples.insert(id) {
            return Err(Error::TripleReuse(id));
        }
        Ok(())
    }

    pub fn pending_messages(&self) -> usize {
        self.channels.values().map(VecDeque::len).sum()
    }
}
