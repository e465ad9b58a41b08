//! Matrix protocols over shares: product, transpose and perturbed inversion.

use rand::Rng;

use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::runtime::{phase, PartyId, PlainKind, Session};
use crate::sharing::{
    beaver_products_raw, coordinator_issue_triples, open_to, share_input_as, truncate, SecretTag,
    SharedMatrix,
};

pub const MAX_PERTURBATION_RETRIES: usize = 16;
pub const MAX_PERTURBATION_COND: f64 = 1e6;
pub const MIN_RCOND: f64 = 1e-12;

/// `A · B` with one length-n vector triple per output entry. Each entry is
/// the sum of an element-wise Beaver product of a row of A and a column of B.
pub fn secure_matmul(
    session: &mut Session,
    a: &SharedMatrix,
    b: &SharedMatrix,
) -> Result<SharedMatrix> {
    let raw = secure_matmul_int(session, a, b)?;
    truncate(session, &raw)
}

/// [`secure_matmul`] without fixed-point rescaling; exact when one operand
/// is integer-encoded.
pub fn secure_matmul_int(
    session: &mut Session,
    a: &SharedMatrix,
    b: &SharedMatrix,
) -> Result<SharedMatrix> {
    let (m, n) = a.shape();
    let (n2, p) = b.shape();
    if n != n2 {
        return Err(Error::DimensionMismatch {
            op: "secure_matmul",
            lhs: a.shape(),
            rhs: b.shape(),
        });
    }
    let lhs_idx: Vec<Option<usize>> = (0..m)
        .flat_map(|i| (0..p).flat_map(move |_| (0..n).map(move |k| Some(i * n + k))))
        .collect();
    let rhs_idx: Vec<Option<usize>> = (0..m)
        .flat_map(|_| (0..p).flat_map(move |j| (0..n).map(move |k| Some(k * p + j))))
        .collect();
    let rows = a.gather(m * p, n, &lhs_idx, "matmul.rows");
    let cols = b.gather(m * p, n, &rhs_idx, "matmul.cols");
    let triple = coordinator_issue_triples(session, m * p, n)?;
    let products = beaver_products_raw(session, &rows, &cols, &triple)?;
    let tag = SecretTag::derive("matmul", &[a.tag(), b.tag()]);
    SharedMatrix::from_shares(
        products
            .into_iter()
            .enumerate()
            .map(|(i, d)| crate::sharing::ShareMatrix {
                owner: PartyId(i + 1),
                rows: m,
                cols: p,
                data: d.sum_chunks(n),
                tag,
            })
            .collect(),
    )
}

/// Local: each party transposes its own share.
pub fn secure_transpose(a: &SharedMatrix) -> SharedMatrix {
    a.transpose()
}

/// `U⁻¹` via a random perturbation: C1 samples a well-conditioned P and
/// shares it, `UP` is opened only at C2, which inverts it locally and
/// re-shares; the result is `P · (UP)⁻¹`.
pub fn secure_inverse(session: &mut Session, u: &SharedMatrix) -> Result<SharedMatrix> {
    let (n, n2) = u.shape();
    if n != n2 {
        return Err(Error::DimensionMismatch {
            op: "secure_inverse",
            lhs: u.shape(),
            rhs: u.shape(),
        });
    }
    let aggregator = session.aggregator();
    let p = sample_perturbation(session, n)?;
    let p_shared = share_input_as(session, PartyId::ACTIVE, &p, "alg5.P", phase::ALG5_SHARE_P)?;
    let up = secure_matmul(session, u, &p_shared)?;
    let up_plain = open_to(
        session,
        &up,
        aggregator,
        phase::ALG5_AGGREGATE_UP,
        PlainKind::AggregatedUp,
    )?;
    let inv = match up_plain.inverse_with_rcond() {
        Ok((inv, rcond)) if rcond >= MIN_RCOND && inv.is_finite() => inv,
        Ok((_, rcond)) => return Err(Error::Singular { rcond }),
        Err(e) => return Err(e),
    };
    let inv_shared = share_input_as(session, aggregator, &inv, "alg5.inv", phase::ALG5_SHARE_INV)?;
    secure_matmul(session, &p_shared, &inv_shared)
}

fn sample_perturbation(session: &mut Session, n: usize) -> Result<Matrix> {
    for _ in 0..MAX_PERTURBATION_RETRIES {
        let rng = session.party_rng(PartyId::ACTIVE);
        let p = Matrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..=1.0));
        if let Ok((_, rcond)) = p.inverse_with_rcond() {
            if rcond > 0.0 && 1.0 / rcond < MAX_PERTURBATION_COND {
                return Ok(p);
            }
        }
    }
    Err(Error::PerturbationRejected(MAX_PERTURBATION_RETRIES))
}
