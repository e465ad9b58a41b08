//! Additive secret sharing across K parties and the primitives built on it:
//! reconstruction, local addition/subtraction, and Beaver-triple products.
//!
//! A [`SharedMatrix`] is the simulation's handle on one secret: it carries
//! every party's [`ShareMatrix`], but protocol code only ever combines a
//! party's own share with values that party received over the session.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::numeric::{Backend, Dd, Scalar};
use crate::runtime::{phase, Endpoint, PartyId, PlainKind, Session};

/// Flat row-major share payload in one backend's encoding.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ShareData {
    Real(Vec<Dd>),
    Ring(Vec<u64>),
}

fn kind_mismatch() -> Error {
    Error::ShareMismatch("operands use different backends".into())
}

macro_rules! zip_data {
    ($a:expr, $b:expr, |$x:ident, $y:ident| real: $real:expr, ring: $ring:expr) => {
        match ($a, $b) {
            (ShareData::Real(u), ShareData::Real(v)) if u.len() == v.len() => Ok(ShareData::Real(
                u.iter().zip(v).map(|(&$x, &$y)| $real).collect(),
            )),
            (ShareData::Ring(u), ShareData::Ring(v)) if u.len() == v.len() => Ok(ShareData::Ring(
                u.iter().zip(v).map(|(&$x, &$y)| $ring).collect(),
            )),
            (ShareData::Real(u), ShareData::Real(v)) => Err(Error::DimensionMismatch {
                op: "share zip",
                lhs: (u.len(), 1),
                rhs: (v.len(), 1),
            }),
            (ShareData::Ring(u), ShareData::Ring(v)) => Err(Error::DimensionMismatch {
                op: "share zip",
                lhs: (u.len(), 1),
                rhs: (v.len(), 1),
            }),
            _ => Err(kind_mismatch()),
        }
    };
}

impl ShareData {
    pub fn zeros(backend: &Backend, len: usize) -> Self {
        match backend {
            Backend::Real { .. } => ShareData::Real(vec![Dd::ZERO; len]),
            Backend::Ring { .. } => ShareData::Ring(vec![0; len]),
        }
    }

    pub fn encode(values: &[f64], backend: &Backend) -> Result<Self> {
        Ok(match *backend {
            Backend::Real { .. } => ShareData::Real(values.iter().map(|&v| Dd::from(v)).collect()),
            Backend::Ring { frac_bits } => ShareData::Ring(
                values
                    .iter()
                    .map(|&v| crate::numeric::ring_encode(v, frac_bits))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    /// Integer values without fixed-point scaling (identical to
    /// [`ShareData::encode`] on the real backend).
    pub fn encode_int(values: &[f64], backend: &Backend) -> Result<Self> {
        match backend {
            Backend::Real { .. } => ShareData::encode(values, backend),
            Backend::Ring { .. } => values
                .iter()
                .map(|&v| {
                    if v.fract() != 0.0 || v.abs() >= 9.0e15 {
                        Err(Error::config(format!("{v} is not an integer")))
                    } else {
                        Ok(v as i64 as u64)
                    }
                })
                .collect::<Result<Vec<_>>>()
                .map(ShareData::Ring),
        }
    }

    /// Inverse of [`ShareData::encode_int`].
    pub fn decode_int(&self) -> Vec<f64> {
        match self {
            ShareData::Real(v) => v.iter().map(|x| x.to_f64()).collect(),
            ShareData::Ring(v) => v.iter().map(|&x| x as i64 as f64).collect(),
        }
    }

    pub fn decode(&self, backend: &Backend) -> Vec<f64> {
        match self {
            ShareData::Real(v) => v.iter().map(|x| x.to_f64()).collect(),
            ShareData::Ring(v) => v.iter().map(|&x| backend.decode(Scalar::Ring(x))).collect(),
        }
    }

    pub fn random<R: Rng + ?Sized>(backend: &Backend, len: usize, rng: &mut R) -> Self {
        match *backend {
            Backend::Real { mask_bound } => ShareData::Real(
                (0..len)
                    .map(|_| Dd::from(rng.gen_range(-mask_bound..=mask_bound)))
                    .collect(),
            ),
            Backend::Ring { .. } => ShareData::Ring((0..len).map(|_| rng.gen::<u64>()).collect()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            ShareData::Real(v) => v.len(),
            ShareData::Ring(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Scalar {
        match self {
            ShareData::Real(v) => Scalar::Real(v[i]),
            ShareData::Ring(v) => Scalar::Ring(v[i]),
        }
    }

    pub fn from_scalars(values: &[Scalar], backend: &Backend) -> Result<Self> {
        let mut out = ShareData::zeros(backend, 0);
        for &s in values {
            match (&mut out, s) {
                (ShareData::Real(v), Scalar::Real(x)) => v.push(x),
                (ShareData::Ring(v), Scalar::Ring(x)) => v.push(x),
                _ => return Err(kind_mismatch()),
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &ShareData) -> Result<ShareData> {
        zip_data!(self, other, |x, y| real: x + y, ring: x.wrapping_add(y))
    }

    pub fn sub(&self, other: &ShareData) -> Result<ShareData> {
        zip_data!(self, other, |x, y| real: x - y, ring: x.wrapping_sub(y))
    }

    /// Element-wise product without fixed-point rescaling.
    pub fn mul_raw(&self, other: &ShareData) -> Result<ShareData> {
        zip_data!(self, other, |x, y| real: x * y, ring: x.wrapping_mul(y))
    }

    pub fn neg(&self) -> ShareData {
        match self {
            ShareData::Real(v) => ShareData::Real(v.iter().map(|&x| -x).collect()),
            ShareData::Ring(v) => ShareData::Ring(v.iter().map(|&x| x.wrapping_neg()).collect()),
        }
    }

    /// Multiplication by a public integer; exact in both encodings.
    pub fn scale_int(&self, c: i64) -> ShareData {
        match self {
            ShareData::Real(v) => ShareData::Real(v.iter().map(|&x| x.mul_f64(c as f64)).collect()),
            ShareData::Ring(v) => {
                ShareData::Ring(v.iter().map(|&x| x.wrapping_mul(c as u64)).collect())
            }
        }
    }

    /// Reindex: `out[i] = self[idx[i]]`, or zero where `idx[i]` is `None`.
    pub fn gather(&self, idx: &[Option<usize>]) -> ShareData {
        match self {
            ShareData::Real(v) => {
                ShareData::Real(idx.iter().map(|i| i.map_or(Dd::ZERO, |i| v[i])).collect())
            }
            ShareData::Ring(v) => {
                ShareData::Ring(idx.iter().map(|i| i.map_or(0, |i| v[i])).collect())
            }
        }
    }

    /// Sums consecutive runs of `chunk` elements.
    pub fn sum_chunks(&self, chunk: usize) -> ShareData {
        match self {
            ShareData::Real(v) => ShareData::Real(
                v.chunks(chunk)
                    .map(|c| c.iter().fold(Dd::ZERO, |a, &b| a + b))
                    .collect(),
            ),
            ShareData::Ring(v) => ShareData::Ring(
                v.chunks(chunk)
                    .map(|c| c.iter().fold(0u64, |a, &b| a.wrapping_add(b)))
                    .collect(),
            ),
        }
    }

    pub fn concat(parts: &[&ShareData]) -> Result<ShareData> {
        let mut iter = parts.iter();
        let mut out = match iter.next() {
            Some(first) => (*first).clone(),
            None => return Ok(ShareData::Real(Vec::new())),
        };
        for p in iter {
            match (&mut out, p) {
                (ShareData::Real(a), ShareData::Real(b)) => a.extend_from_slice(b),
                (ShareData::Ring(a), ShareData::Ring(b)) => a.extend_from_slice(b),
                _ => return Err(kind_mismatch()),
            }
        }
        Ok(out)
    }

    pub fn slice(&self, start: usize, len: usize) -> ShareData {
        match self {
            ShareData::Real(v) => ShareData::Real(v[start..start + len].to_vec()),
            ShareData::Ring(v) => ShareData::Ring(v[start..start + len].to_vec()),
        }
    }
}

/// Links the K shares of one secret. Derived deterministically from the
/// operation and its inputs so every party computes the same tag locally.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SecretTag(pub u64);

impl SecretTag {
    pub fn derive(op: &str, inputs: &[SecretTag]) -> SecretTag {
        // FNV-1a over the op name and input tags
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        };
        op.bytes().for_each(&mut eat);
        for t in inputs {
            t.0.to_le_bytes().into_iter().for_each(&mut eat);
        }
        SecretTag(h)
    }
}

/// One party's additive share of a secret matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareMatrix {
    pub owner: PartyId,
    pub rows: usize,
    pub cols: usize,
    pub data: ShareData,
    pub tag: SecretTag,
}

impl ShareMatrix {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    fn check_pair(&self, other: &ShareMatrix, op: &'static str) -> Result<()> {
        if self.owner != other.owner {
            return Err(Error::ShareMismatch(format!(
                "{op}: shares held by {} and {}",
                self.owner, other.owner
            )));
        }
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        Ok(())
    }

    pub fn add_local(&self, other: &ShareMatrix) -> Result<ShareMatrix> {
        self.check_pair(other, "add_local")?;
        Ok(ShareMatrix {
            data: self.data.add(&other.data)?,
            tag: SecretTag::derive("add", &[self.tag, other.tag]),
            ..self.clone()
        })
    }

    pub fn sub_local(&self, other: &ShareMatrix) -> Result<ShareMatrix> {
        self.check_pair(other, "sub_local")?;
        Ok(ShareMatrix {
            data: self.data.sub(&other.data)?,
            tag: SecretTag::derive("sub", &[self.tag, other.tag]),
            ..self.clone()
        })
    }

    pub fn transpose(&self) -> ShareMatrix {
        let idx: Vec<Option<usize>> = (0..self.cols)
            .flat_map(|j| (0..self.rows).map(move |i| Some(i * self.cols + j)))
            .collect();
        ShareMatrix {
            owner: self.owner,
            rows: self.cols,
            cols: self.rows,
            data: self.data.gather(&idx),
            tag: SecretTag::derive("transpose", &[self.tag]),
        }
    }
}

/// Splits `secret` into `parties` additive shares. Every share except the
/// owner's is a fresh uniform mask; the owner keeps `secret - sum(masks)`.
pub fn share_secret<R: Rng + ?Sized>(
    secret: &Matrix,
    owner: PartyId,
    parties: usize,
    backend: &Backend,
    tag: SecretTag,
    rng: &mut R,
) -> Result<Vec<ShareMatrix>> {
    if parties < 2 {
        return Err(Error::ProtocolArity(parties));
    }
    let encoded = ShareData::encode(secret.as_slice(), backend)?;
    share_encoded(
        &encoded,
        secret.rows(),
        secret.cols(),
        owner,
        parties,
        backend,
        tag,
        rng,
    )
}

#[allow(clippy::too_many_arguments)]
fn share_encoded<R: Rng + ?Sized>(
    encoded: &ShareData,
    rows: usize,
    cols: usize,
    owner: PartyId,
    parties: usize,
    backend: &Backend,
    tag: SecretTag,
    rng: &mut R,
) -> Result<Vec<ShareMatrix>> {
    let len = rows * cols;
    let mut own = encoded.clone();
    let mut datas = Vec::with_capacity(parties);
    for p in PartyId::all(parties) {
        if p == owner {
            datas.push(None);
        } else {
            let mask = ShareData::random(backend, len, rng);
            own = own.sub(&mask)?;
            datas.push(Some(mask));
        }
    }
    Ok(PartyId::all(parties)
        .zip(datas)
        .map(|(p, d)| ShareMatrix {
            owner: p,
            rows,
            cols,
            data: d.unwrap_or_else(|| own.clone()),
            tag,
        })
        .collect())
}

/// Sums all K shares in party order and decodes.
pub fn reconstruct(shares: &[ShareMatrix], backend: &Backend) -> Result<Matrix> {
    let first = shares
        .first()
        .ok_or_else(|| Error::ShareMismatch("no shares to reconstruct".into()))?;
    for s in &shares[1..] {
        if s.tag != first.tag {
            return Err(Error::ShareMismatch(format!(
                "tags differ: {:?} vs {:?}",
                first.tag, s.tag
            )));
        }
        if s.shape() != first.shape() {
            return Err(Error::ShareMismatch(format!(
                "shapes differ: {:?} vs {:?}",
                first.shape(),
                s.shape()
            )));
        }
    }
    let mut ordered: Vec<&ShareMatrix> = shares.iter().collect();
    ordered.sort_by_key(|s| s.owner);
    let mut acc = ordered[0].data.clone();
    for s in &ordered[1..] {
        acc = acc.add(&s.data)?;
    }
    Matrix::from_vec(first.rows, first.cols, acc.decode(backend))
}

fn sum_in_party_order(parts: &[ShareData]) -> Result<ShareData> {
    let mut acc = parts[0].clone();
    for p in &parts[1..] {
        acc = acc.add(p)?;
    }
    Ok(acc)
}

/// The simulation's view of one secret: all K parties' shares, in party order.
#[derive(Debug, Clone, PartialEq)]
pub struct SharedMatrix {
    shares: Vec<ShareMatrix>,
}

impl SharedMatrix {
    pub fn from_shares(mut shares: Vec<ShareMatrix>) -> Result<Self> {
        if shares.len() < 2 {
            return Err(Error::ProtocolArity(shares.len()));
        }
        shares.sort_by_key(|s| s.owner);
        let (shape, tag) = (shares[0].shape(), shares[0].tag);
        for (i, s) in shares.iter().enumerate() {
            if s.owner != PartyId(i + 1) || s.shape() != shape || s.tag != tag {
                return Err(Error::ShareMismatch(format!(
                    "share {} is inconsistent with the rest",
                    s.owner
                )));
            }
        }
        Ok(SharedMatrix { shares })
    }

    pub(crate) fn from_parts(
        rows: usize,
        cols: usize,
        tag: SecretTag,
        parts: Vec<ShareData>,
    ) -> Self {
        SharedMatrix {
            shares: parts
                .into_iter()
                .enumerate()
                .map(|(i, data)| ShareMatrix {
                    owner: PartyId(i + 1),
                    rows,
                    cols,
                    data,
                    tag,
                })
                .collect(),
        }
    }

    /// Public zero: every party holds an all-zero share.
    pub fn zeros(parties: usize, rows: usize, cols: usize, backend: &Backend) -> Self {
        let tag = SecretTag::derive(&format!("zeros:{rows}x{cols}"), &[]);
        SharedMatrix::from_parts(
            rows,
            cols,
            tag,
            vec![ShareData::zeros(backend, rows * cols); parties],
        )
    }

    /// A public value held as a trivial sharing: the active party's share is
    /// the value, all other shares are zero.
    /// Column sums as a 1×cols sharing; local.
    pub fn col_sums(&self) -> SharedMatrix {
        let rows = self.rows();
        let t = self.transpose();
        t.map_local("col_sums", 1, self.cols(), |d| d.sum_chunks(rows.max(1)))
    }

    /// Trivial sharing of public integers (see [`ShareData::encode_int`]).
    pub fn public_int(parties: usize, value: &Matrix, backend: &Backend) -> Result<Self> {
        let mut parts = vec![ShareData::zeros(backend, value.rows() * value.cols()); parties];
        parts[0] = ShareData::encode_int(value.as_slice(), backend)?;
        Ok(SharedMatrix::from_parts(
            value.rows(),
            value.cols(),
            SecretTag::derive("public_int", &[]),
            parts,
        ))
    }

    pub fn public(parties: usize, value: &Matrix, backend: &Backend) -> Result<Self> {
        let mut parts = vec![ShareData::zeros(backend, value.rows() * value.cols()); parties];
        parts[0] = ShareData::encode(value.as_slice(), backend)?;
        Ok(SharedMatrix::from_parts(
            value.rows(),
            value.cols(),
            SecretTag::derive("public", &[]),
            parts,
        ))
    }

    pub fn shares(&self) -> &[ShareMatrix] {
        &self.shares
    }

    pub fn share(&self, p: PartyId) -> &ShareMatrix {
        &self.shares[p.index()]
    }

    pub fn parties(&self) -> usize {
        self.shares.len()
    }

    pub fn rows(&self) -> usize {
        self.shares[0].rows
    }

    pub fn cols(&self) -> usize {
        self.shares[0].cols
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shares[0].shape()
    }

    pub fn tag(&self) -> SecretTag {
        self.shares[0].tag
    }

    fn datas(&self) -> impl Iterator<Item = &ShareData> {
        self.shares.iter().map(|s| &s.data)
    }

    fn check_same(&self, other: &SharedMatrix, op: &'static str) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                op,
                lhs: self.shape(),
                rhs: other.shape(),
            });
        }
        if self.parties() != other.parties() {
            return Err(Error::ShareMismatch(format!("{op}: party counts differ")));
        }
        Ok(())
    }

    pub fn add(&self, other: &SharedMatrix) -> Result<SharedMatrix> {
        self.check_same(other, "add")?;
        let shares = self
            .shares
            .iter()
            .zip(&other.shares)
            .map(|(a, b)| a.add_local(b))
            .collect::<Result<_>>()?;
        Ok(SharedMatrix { shares })
    }

    pub fn sub(&self, other: &SharedMatrix) -> Result<SharedMatrix> {
        self.check_same(other, "sub")?;
        let shares = self
            .shares
            .iter()
            .zip(&other.shares)
            .map(|(a, b)| a.sub_local(b))
            .collect::<Result<_>>()?;
        Ok(SharedMatrix { shares })
    }

    pub fn neg(&self) -> SharedMatrix {
        self.map_local("neg", self.rows(), self.cols(), |d| d.neg())
    }

    pub fn scale_int(&self, c: i64) -> SharedMatrix {
        self.map_local(&format!("scale_int:{c}"), self.rows(), self.cols(), |d| {
            d.scale_int(c)
        })
    }

    /// Adds a public matrix: only the active party touches its share.
    pub fn add_public(&self, value: &Matrix, backend: &Backend) -> Result<SharedMatrix> {
        if value.shape() != self.shape() {
            return Err(Error::DimensionMismatch {
                op: "add_public",
                lhs: self.shape(),
                rhs: value.shape(),
            });
        }
        let enc = ShareData::encode(value.as_slice(), backend)?;
        let mut out = self.clone();
        out.shares[0].data = out.shares[0].data.add(&enc)?;
        let tag = SecretTag::derive("add_public", &[self.tag()]);
        out.shares.iter_mut().for_each(|s| s.tag = tag);
        Ok(out)
    }

    /// Local reindexing; `idx[i]` selects the source element of output `i`.
    pub fn gather(
        &self,
        rows: usize,
        cols: usize,
        idx: &[Option<usize>],
        label: &str,
    ) -> SharedMatrix {
        debug_assert_eq!(idx.len(), rows * cols);
        self.map_local(label, rows, cols, |d| d.gather(idx))
    }

    pub fn transpose(&self) -> SharedMatrix {
        SharedMatrix {
            shares: self.shares.iter().map(ShareMatrix::transpose).collect(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> SharedMatrix {
        let c = self.cols();
        let idx: Vec<Option<usize>> = rows
            .iter()
            .flat_map(|&r| (0..c).map(move |j| Some(r * c + j)))
            .collect();
        let label = format!("rows:{rows:?}");
        self.gather(rows.len(), c, &idx, &label)
    }

    pub fn column(&self, j: usize) -> SharedMatrix {
        let c = self.cols();
        let idx: Vec<Option<usize>> = (0..self.rows()).map(|i| Some(i * c + j)).collect();
        self.gather(self.rows(), 1, &idx, &format!("col:{j}"))
    }

    pub fn hstack(blocks: &[&SharedMatrix]) -> Result<SharedMatrix> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::ShareMismatch("hstack of nothing".into()))?;
        let rows = first.rows();
        let parties = first.parties();
        let cols: usize = blocks.iter().map(|b| b.cols()).sum();
        for b in blocks {
            if b.rows() != rows || b.parties() != parties {
                return Err(Error::DimensionMismatch {
                    op: "hstack",
                    lhs: first.shape(),
                    rhs: b.shape(),
                });
            }
        }
        let tags: Vec<SecretTag> = blocks.iter().map(|b| b.tag()).collect();
        let tag = SecretTag::derive("hstack", &tags);
        let mut parts = Vec::with_capacity(parties);
        for p in 0..parties {
            let mut idx_parts = Vec::new();
            for i in 0..rows {
                for b in blocks {
                    idx_parts.push(b.shares[p].data.slice(i * b.cols(), b.cols()));
                }
            }
            let refs: Vec<&ShareData> = idx_parts.iter().collect();
            parts.push(ShareData::concat(&refs)?);
        }
        Ok(SharedMatrix::from_parts(rows, cols, tag, parts))
    }

    pub fn vstack(blocks: &[&SharedMatrix]) -> Result<SharedMatrix> {
        let first = blocks
            .first()
            .ok_or_else(|| Error::ShareMismatch("vstack of nothing".into()))?;
        let cols = first.cols();
        for b in blocks {
            if b.cols() != cols || b.parties() != first.parties() {
                return Err(Error::DimensionMismatch {
                    op: "vstack",
                    lhs: first.shape(),
                    rhs: b.shape(),
                });
            }
        }
        let rows = blocks.iter().map(|b| b.rows()).sum();
        let tags: Vec<SecretTag> = blocks.iter().map(|b| b.tag()).collect();
        let tag = SecretTag::derive("vstack", &tags);
        let parts = (0..first.parties())
            .map(|p| {
                let refs: Vec<&ShareData> = blocks.iter().map(|b| &b.shares[p].data).collect();
                ShareData::concat(&refs)
            })
            .collect::<Result<_>>()?;
        Ok(SharedMatrix::from_parts(rows, cols, tag, parts))
    }

    fn map_local(
        &self,
        label: &str,
        rows: usize,
        cols: usize,
        f: impl Fn(&ShareData) -> ShareData,
    ) -> SharedMatrix {
        let tag = SecretTag::derive(label, &[self.tag()]);
        SharedMatrix::from_parts(rows, cols, tag, self.datas().map(f).collect())
    }

    pub fn reconstruct(&self, backend: &Backend) -> Result<Matrix> {
        reconstruct(&self.shares, backend)
    }
}

/// Correlated randomness from the coordinator: shares of `a`, `b` and
/// `c = a ∘ b`, all of the same shape. Usable exactly once.
#[derive(Debug, Clone)]
pub struct BeaverTriple {
    id: u64,
    pub a: SharedMatrix,
    pub b: SharedMatrix,
    pub c: SharedMatrix,
}

impl BeaverTriple {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn shape(&self) -> (usize, usize) {
        self.a.shape()
    }
}

/// Shares of a random `r`, its logical right shift by `frac_bits`, and its top bit.
#[derive(Debug, Clone)]
pub struct TruncationPairs {
    pub r: SharedMatrix,
    pub r_shifted: SharedMatrix,
    pub r_msb: SharedMatrix,
}

fn deliver_from_coordinator(session: &mut Session, secret: &SharedMatrix) -> Result<SharedMatrix> {
    let (rows, cols) = secret.shape();
    let mut parts = Vec::with_capacity(secret.parties());
    for s in secret.shares() {
        parts.push(session.transfer(
            Endpoint::Coordinator,
            s.owner,
            phase::TRIPLES,
            rows,
            cols,
            s.data.clone(),
        )?);
    }
    Ok(SharedMatrix::from_parts(rows, cols, secret.tag(), parts))
}

fn coordinator_share(
    session: &mut Session,
    data: ShareData,
    rows: usize,
    cols: usize,
    tag: SecretTag,
) -> Result<SharedMatrix> {
    let backend = session.backend();
    let parties = session.parties();
    // The coordinator plays the owner of the last share.
    let shares = share_encoded(
        &data,
        rows,
        cols,
        PartyId(parties),
        parties,
        &backend,
        tag,
        session.coordinator_rng(),
    )?;
    SharedMatrix::from_shares(shares)
}

/// Coordinator samples a batch of element-wise triples of the given shape
/// and delivers each party's shares over the session.
pub fn coordinator_issue_triples(
    session: &mut Session,
    rows: usize,
    cols: usize,
) -> Result<BeaverTriple> {
    let backend = session.backend();
    let len = rows * cols;
    let id = session.fresh_triple_id();
    let rng = session.coordinator_rng();
    let a = ShareData::random(&backend, len, rng);
    let b = ShareData::random(&backend, len, rng);
    let c = a.mul_raw(&b)?;
    let tag = |what: &str| SecretTag::derive(&format!("triple:{id}:{what}"), &[]);
    let a = coordinator_share(session, a, rows, cols, tag("a"))?;
    let b = coordinator_share(session, b, rows, cols, tag("b"))?;
    let c = coordinator_share(session, c, rows, cols, tag("c"))?;
    Ok(BeaverTriple {
        id,
        a: deliver_from_coordinator(session, &a)?,
        b: deliver_from_coordinator(session, &b)?,
        c: deliver_from_coordinator(session, &c)?,
    })
}

fn coordinator_issue_truncation(
    session: &mut Session,
    rows: usize,
    cols: usize,
) -> Result<TruncationPairs> {
    let backend = session.backend();
    let frac_bits = match backend {
        Backend::Ring { frac_bits } => frac_bits,
        Backend::Real { .. } => {
            return Err(Error::config(
                "truncation is only defined for the ring backend",
            ))
        }
    };
    let len = rows * cols;
    let id = session.fresh_triple_id();
    let r: Vec<u64> = (0..len).map(|_| session.coordinator_rng().gen()).collect();
    let shifted: Vec<u64> = r.iter().map(|x| x >> frac_bits).collect();
    let msb: Vec<u64> = r.iter().map(|x| x >> 63).collect();
    let tag = |what: &str| SecretTag::derive(&format!("trunc:{id}:{what}"), &[]);
    let r = coordinator_share(session, ShareData::Ring(r), rows, cols, tag("r"))?;
    let r_shifted = coordinator_share(session, ShareData::Ring(shifted), rows, cols, tag("shift"))?;
    let r_msb = coordinator_share(session, ShareData::Ring(msb), rows, cols, tag("msb"))?;
    Ok(TruncationPairs {
        r: deliver_from_coordinator(session, &r)?,
        r_shifted: deliver_from_coordinator(session, &r_shifted)?,
        r_msb: deliver_from_coordinator(session, &r_msb)?,
    })
}

/// `owner` secret-shares a plaintext matrix it holds.
pub fn share_input(
    session: &mut Session,
    owner: PartyId,
    secret: &Matrix,
    label: &str,
) -> Result<SharedMatrix> {
    share_input_as(session, owner, secret, label, phase::SHARE_INPUT)
}

/// [`share_input`] billed under a specific phase label.
pub fn share_input_as(
    session: &mut Session,
    owner: PartyId,
    secret: &Matrix,
    label: &str,
    phase: &str,
) -> Result<SharedMatrix> {
    let encoded = ShareData::encode(secret.as_slice(), &session.backend())?;
    share_encoded_input(
        session,
        owner,
        encoded,
        secret.rows(),
        secret.cols(),
        label,
        phase,
    )
}

/// Shares a matrix of small integers (e.g. 0/1 indicators) without the
/// fixed-point scale, so products with fixed-point values need no truncation.
pub fn share_integers(
    session: &mut Session,
    owner: PartyId,
    values: &Matrix,
    label: &str,
) -> Result<SharedMatrix> {
    let encoded = ShareData::encode_int(values.as_slice(), &session.backend())?;
    share_encoded_input(
        session,
        owner,
        encoded,
        values.rows(),
        values.cols(),
        label,
        phase::SHARE_INPUT,
    )
}

fn share_encoded_input(
    session: &mut Session,
    owner: PartyId,
    encoded: ShareData,
    rows: usize,
    cols: usize,
    label: &str,
    phase: &str,
) -> Result<SharedMatrix> {
    session.check_party(owner)?;
    let backend = session.backend();
    let parties = session.parties();
    let tag = SecretTag::derive(&format!("input:{owner}:{label}"), &[]);
    let shares = share_encoded(
        &encoded,
        rows,
        cols,
        owner,
        parties,
        &backend,
        tag,
        session.party_rng(owner),
    )?;
    session.record_plain(
        owner,
        PlainKind::OwnRandomness,
        phase,
        rows,
        cols * (parties - 1),
    );
    let mut delivered = Vec::with_capacity(parties);
    for s in shares {
        if s.owner == owner {
            delivered.push(s);
        } else {
            let data = session.transfer(owner, s.owner, phase, rows, cols, s.data)?;
            delivered.push(ShareMatrix { data, ..s });
        }
    }
    SharedMatrix::from_shares(delivered)
}

/// Every other party sends its share to `target`, which sums them in party
/// order. The opened value is logged in `target`'s transcript as `kind`.
pub fn open_to(
    session: &mut Session,
    x: &SharedMatrix,
    target: PartyId,
    phase: &str,
    kind: PlainKind,
) -> Result<Matrix> {
    session.check_party(target)?;
    let (rows, cols) = x.shape();
    let mut parts = Vec::with_capacity(x.parties());
    for s in x.shares() {
        if s.owner == target {
            parts.push(s.data.clone());
        } else {
            parts.push(session.transfer(s.owner, target, phase, rows, cols, s.data.clone())?);
        }
    }
    let sum = sum_in_party_order(&parts)?;
    session.record_plain(target, kind, phase, rows, cols);
    Matrix::from_vec(rows, cols, sum.decode(&session.backend()))
}

/// Audit reconstruction of integer-encoded shares.
pub fn audit_reconstruct_int(session: &Session, x: &SharedMatrix) -> Result<Matrix> {
    if !session.audit_enabled() {
        return Err(Error::AuditDisabled);
    }
    let parts: Vec<ShareData> = x.shares().iter().map(|s| s.data.clone()).collect();
    Matrix::from_vec(x.rows(), x.cols(), sum_in_party_order(&parts)?.decode_int())
}

/// Harness-only reconstruction, gated on the session's audit flag.
pub fn audit_reconstruct(session: &Session, x: &SharedMatrix) -> Result<Matrix> {
    if !session.audit_enabled() {
        return Err(Error::AuditDisabled);
    }
    x.reconstruct(&session.backend())
}

/// Element-wise Beaver products without fixed-point rescaling. Each party's
/// masked differences go to the active party, which opens and broadcasts
/// `e` and `f`; output shares are `f∘a_k + e∘b_k + c_k`, plus `e∘f` on C1.
pub(crate) fn beaver_products_raw(
    session: &mut Session,
    x: &SharedMatrix,
    y: &SharedMatrix,
    triple: &BeaverTriple,
) -> Result<Vec<ShareData>> {
    if x.shape() != y.shape() || x.shape() != triple.shape() {
        return Err(Error::DimensionMismatch {
            op: "beaver_mul",
            lhs: x.shape(),
            rhs: if x.shape() != y.shape() {
                y.shape()
            } else {
                triple.shape()
            },
        });
    }
    session.consume_triple(triple.id)?;
    let (rows, cols) = x.shape();
    let len = rows * cols;
    let active = PartyId::ACTIVE;

    let mut masked = Vec::with_capacity(x.parties());
    for p in session.party_ids().collect::<Vec<_>>() {
        let e = x.share(p).data.sub(&triple.a.share(p).data)?;
        let f = y.share(p).data.sub(&triple.b.share(p).data)?;
        let ef = ShareData::concat(&[&e, &f])?;
        if p == active {
            masked.push(ef);
        } else {
            masked.push(session.transfer(p, active, phase::BEAVER_EF, 2 * rows, cols, ef)?);
        }
    }
    let opened = sum_in_party_order(&masked)?;
    session.record_plain(
        active,
        PlainKind::BeaverMasked,
        phase::BEAVER_EF,
        2 * rows,
        cols,
    );

    let mut out = Vec::with_capacity(x.parties());
    for p in session.party_ids().collect::<Vec<_>>() {
        let ef = if p == active {
            opened.clone()
        } else {
            let got = session.transfer(
                active,
                p,
                phase::BEAVER_BCAST,
                2 * rows,
                cols,
                opened.clone(),
            )?;
            session.record_plain(
                p,
                PlainKind::BeaverBroadcast,
                phase::BEAVER_BCAST,
                2 * rows,
                cols,
            );
            got
        };
        let (e, f) = (ef.slice(0, len), ef.slice(len, len));
        let mut z = f
            .mul_raw(&triple.a.share(p).data)?
            .add(&e.mul_raw(&triple.b.share(p).data)?)?
            .add(&triple.c.share(p).data)?;
        if p == active {
            z = z.add(&e.mul_raw(&f)?)?;
        }
        out.push(z);
    }
    Ok(out)
}

/// Rescales raw fixed-point products (2·frac_bits fractional bits) back to
/// frac_bits. A no-op on the real backend.
///
/// Ring protocol: with a dealer-provided random `r`, the active party opens
/// `c = z + 2^62 + r` and everyone derives shares of `floor(z / 2^f)` (off by
/// at most one ulp) from `c`, `r >> f` and the top bit of `r`. Requires
/// `|z| < 2^62` in the raw encoding.
pub fn truncate(session: &mut Session, raw: &SharedMatrix) -> Result<SharedMatrix> {
    let frac_bits = match session.backend() {
        Backend::Real { .. } => return Ok(raw.clone()),
        Backend::Ring { frac_bits } => frac_bits,
    };
    let (rows, cols) = raw.shape();
    let pairs = coordinator_issue_truncation(session, rows, cols)?;
    let active = PartyId::ACTIVE;
    const BIAS: u64 = 1 << 62;

    let mut masked = Vec::with_capacity(raw.parties());
    for p in session.party_ids().collect::<Vec<_>>() {
        let mut m = raw.share(p).data.add(&pairs.r.share(p).data)?;
        if p == active {
            if let ShareData::Ring(v) = &mut m {
                v.iter_mut().for_each(|x| *x = x.wrapping_add(BIAS));
            }
            masked.push(m);
        } else {
            masked.push(session.transfer(p, active, phase::TRUNC_MASK, rows, cols, m)?);
        }
    }
    let opened = match sum_in_party_order(&masked)? {
        ShareData::Ring(v) => v,
        ShareData::Real(_) => unreachable!("ring backend"),
    };
    session.record_plain(
        active,
        PlainKind::TruncationMasked,
        phase::TRUNC_MASK,
        rows,
        cols,
    );

    let wrap_weight = 1u64 << (64 - frac_bits);
    let mut parts = Vec::with_capacity(raw.parties());
    for p in session.party_ids().collect::<Vec<_>>() {
        let (ShareData::Ring(rs), ShareData::Ring(rm)) =
            (&pairs.r_shifted.share(p).data, &pairs.r_msb.share(p).data)
        else {
            unreachable!("ring backend")
        };
        let v: Vec<u64> = opened
            .iter()
            .zip(rs.iter().zip(rm))
            .map(|(&c, (&shift, &msb))| {
                let no_top = 1 - (c >> 63);
                let mut out = (no_top.wrapping_mul(wrap_weight))
                    .wrapping_mul(msb)
                    .wrapping_sub(shift);
                if p == active {
                    out = out
                        .wrapping_add(c >> frac_bits)
                        .wrapping_sub(BIAS >> frac_bits);
                }
                out
            })
            .collect();
        parts.push(ShareData::Ring(v));
    }
    let tag = SecretTag::derive("truncate", &[raw.tag()]);
    Ok(SharedMatrix::from_parts(rows, cols, tag, parts))
}

/// Element-wise product `x ∘ y` of two shared matrices using one triple.
pub fn beaver_mul(
    session: &mut Session,
    x: &SharedMatrix,
    y: &SharedMatrix,
    triple: &BeaverTriple,
) -> Result<SharedMatrix> {
    let parts = beaver_products_raw(session, x, y, triple)?;
    let tag = SecretTag::derive("beaver", &[x.tag(), y.tag()]);
    let raw = SharedMatrix::from_parts(x.rows(), x.cols(), tag, parts);
    truncate(session, &raw)
}

/// Element-wise product without truncation. Exact when one operand is
/// integer-encoded; the result carries the other operand's encoding.
pub fn beaver_mul_int(
    session: &mut Session,
    x: &SharedMatrix,
    y: &SharedMatrix,
) -> Result<SharedMatrix> {
    let triple = coordinator_issue_triples(session, x.rows(), x.cols())?;
    let parts = beaver_products_raw(session, x, y, &triple)?;
    let tag = SecretTag::derive("beaver_int", &[x.tag(), y.tag()]);
    Ok(SharedMatrix::from_parts(x.rows(), x.cols(), tag, parts))
}

/// Convenience: request a fresh triple batch for this product and use it.
pub fn secure_mul(
    session: &mut Session,
    x: &SharedMatrix,
    y: &SharedMatrix,
) -> Result<SharedMatrix> {
    let triple = coordinator_issue_triples(session, x.rows(), x.cols())?;
    beaver_mul(session, x, y, &triple)
}

/// Multiplication by a public real. Local on the real backend; on the ring
/// the product needs a truncation round.
pub fn scale_public(session: &mut Session, x: &SharedMatrix, c: f64) -> Result<SharedMatrix> {
    let backend = session.backend();
    match backend {
        Backend::Real { .. } => Ok(
            x.map_local(&format!("scale:{c:e}"), x.rows(), x.cols(), |d| match d {
                ShareData::Real(v) => ShareData::Real(v.iter().map(|&z| z.mul_f64(c)).collect()),
                ShareData::Ring(_) => unreachable!("real backend"),
            }),
        ),
        Backend::Ring { frac_bits } => {
            let k = crate::numeric::ring_encode(c, frac_bits)?;
            let raw = x.map_local(&format!("scale:{c:e}"), x.rows(), x.cols(), |d| match d {
                ShareData::Ring(v) => {
                    ShareData::Ring(v.iter().map(|&z| z.wrapping_mul(k)).collect())
                }
                ShareData::Real(_) => unreachable!("ring backend"),
            });
            truncate(session, &raw)
        }
    }
}
