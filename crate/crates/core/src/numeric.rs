//! Share encodings.
//!
//! Two backends are supported. `Real` keeps shares as double-double reals,
//! which makes share arithmetic exact enough that protocol outputs can be
//! compared against plaintext oracles at 1e-9. Masks are uniform on a bounded
//! interval, so this backend is only statistically hiding. `Ring` encodes
//! values as fixed point in Z/2^64 with two's complement sign; masks are
//! uniform over the whole ring.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FRAC_BITS: u32 = 20;
pub const DEFAULT_MASK_BOUND: f64 = 1e6;

/// Wire width of one share element, identical for both backends.
pub const ELEMENT_BYTES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Backend {
    Real { mask_bound: f64 },
    Ring { frac_bits: u32 },
}

impl Default for Backend {
    fn default() -> Self {
        Backend::Real {
            mask_bound: DEFAULT_MASK_BOUND,
        }
    }
}

impl Backend {
    pub fn real(mask_bound: f64) -> Result<Self> {
        if !(mask_bound > 0.0 && mask_bound.is_finite()) {
            return Err(Error::config(format!(
                "mask_bound must be positive, got {mask_bound}"
            )));
        }
        Ok(Backend::Real { mask_bound })
    }

    pub fn ring(frac_bits: u32) -> Result<Self> {
        if !(8..=40).contains(&frac_bits) {
            return Err(Error::config(format!(
                "frac_bits must be in [8, 40], got {frac_bits}"
            )));
        }
        Ok(Backend::Ring { frac_bits })
    }

    pub fn is_ring(&self) -> bool {
        matches!(self, Backend::Ring { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Backend::Real { .. } => "real",
            Backend::Ring { .. } => "ring",
        }
    }

    /// Decoding resolution: one ulp of the fixed-point grid, or 0 for reals.
    pub fn resolution(&self) -> f64 {
        match *self {
            Backend::Real { .. } => 0.0,
            Backend::Ring { frac_bits } => (-(frac_bits as f64)).exp2(),
        }
    }

    pub fn encode(&self, v: f64) -> Result<Scalar> {
        match *self {
            Backend::Real { .. } => Ok(Scalar::Real(Dd::from(v))),
            Backend::Ring { frac_bits } => ring_encode(v, frac_bits).map(Scalar::Ring),
        }
    }

    pub fn decode(&self, s: Scalar) -> f64 {
        match (*self, s) {
            (Backend::Ring { frac_bits }, Scalar::Ring(x)) => ring_decode(x, frac_bits),
            (_, Scalar::Real(x)) => x.to_f64(),
            (Backend::Real { .. }, Scalar::Ring(x)) => x as i64 as f64,
        }
    }

    /// Product of two encoded scalars, rescaled back to the backend's grid.
    pub fn mul_truncate(&self, x: Scalar, y: Scalar) -> Result<Scalar> {
        match (*self, x, y) {
            (Backend::Real { .. }, Scalar::Real(a), Scalar::Real(b)) => Ok(Scalar::Real(a * b)),
            (Backend::Ring { frac_bits }, Scalar::Ring(a), Scalar::Ring(b)) => {
                ring_mul_truncate(a, b, frac_bits).map(Scalar::Ring)
            }
            _ => Err(Error::ShareMismatch(
                "operands encoded under different backends".into(),
            )),
        }
    }

    /// A fresh mask: uniform on the ring, or uniform on `[-mask_bound, mask_bound]`.
    pub fn uniform_mask<R: Rng + ?Sized>(&self, rng: &mut R) -> Scalar {
        match *self {
            Backend::Real { mask_bound } => {
                Scalar::Real(Dd::from(rng.gen_range(-mask_bound..=mask_bound)))
            }
            Backend::Ring { .. } => Scalar::Ring(rng.gen::<u64>()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Scalar {
    Real(Dd),
    Ring(u64),
}

fn ring_bound(frac_bits: u32) -> f64 {
    (63.0 - frac_bits as f64).exp2()
}

pub fn ring_encode(v: f64, frac_bits: u32) -> Result<u64> {
    let bound = ring_bound(frac_bits);
    if !v.is_finite() || v.abs() >= bound {
        return Err(Error::Overflow { value: v, bound });
    }
    let scaled = (v * (frac_bits as f64).exp2()).round();
    Ok(scaled as i64 as u64)
}

pub fn ring_decode(x: u64, frac_bits: u32) -> f64 {
    x as i64 as f64 / (frac_bits as f64).exp2()
}

/// Fixed-point product of two plaintext ring elements, rounded to nearest.
pub fn ring_mul_truncate(x: u64, y: u64, frac_bits: u32) -> Result<u64> {
    let wide = (x as i64 as i128) * (y as i64 as i128);
    let half = 1i128 << (frac_bits - 1);
    let shifted = (wide + half) >> frac_bits;
    if shifted > i64::MAX as i128 || shifted < i64::MIN as i128 {
        return Err(Error::Overflow {
            value: wide as f64 / (2.0 * frac_bits as f64).exp2(),
            bound: ring_bound(frac_bits),
        });
    }
    Ok(shifted as i64 as u64)
}

/// Double-double real: an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`.
#[derive(Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

impl fmt::Debug for Dd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", self.hi + self.lo)
    }
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn mul_f64(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Self {
        Dd { hi: v, lo: 0.0 }
    }
}

impl std::ops::Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, o: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl std::ops::Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl std::ops::Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, o: Dd) -> Dd {
        self + (-o)
    }
}

impl std::ops::Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, o: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, o.hi);
        let (hi, lo) = quick_two_sum(p, e + (self.hi * o.lo + self.lo * o.hi));
        Dd { hi, lo }
    }
}
