//! Analytic communication model.
//!
//! Mirrors the message schedule of each protocol so that ledger totals can
//! be predicted for shapes too large to execute. Validated against executed
//! ledgers in the tests below.

use std::collections::BTreeMap;

use super::ledger::{LedgerSummary, Totals};
use super::phase;
use crate::linear::{GdInit, Method};
use crate::numeric::Backend;

/// Accumulates predicted traffic per phase.
#[derive(Debug, Clone)]
pub struct CostModel {
    k: u64,
    ring: bool,
    by_phase: BTreeMap<String, Totals>,
}

impl CostModel {
    pub fn new(parties: usize, backend: &Backend) -> Self {
        CostModel {
            k: parties as u64,
            ring: matches!(backend, Backend::Ring { .. }),
            by_phase: BTreeMap::new(),
        }
    }

    fn add(&mut self, phase: &str, messages: u64, elements_each: u64) {
        *self.by_phase.entry(phase.to_string()).or_default() +=
            Totals::of_elements(messages, messages * elements_each);
    }

    /// One party sends a share of an r×c matrix to every other party.
    pub fn share_input(&mut self, rows: usize, cols: usize) -> &mut Self {
        self.share_input_as(phase::SHARE_INPUT, rows, cols)
    }

    pub fn share_input_as(&mut self, phase: &str, rows: usize, cols: usize) -> &mut Self {
        self.add(phase, self.k - 1, (rows * cols) as u64);
        self
    }

    pub fn open(&mut self, phase: &str, rows: usize, cols: usize) -> &mut Self {
        self.add(phase, self.k - 1, (rows * cols) as u64);
        self
    }

    /// `len` element-wise products without rescaling.
    pub fn beaver_raw(&mut self, len: usize) -> &mut Self {
        let len = len as u64;
        self.add(phase::TRIPLES, 3 * self.k, len);
        self.add(phase::BEAVER_EF, self.k - 1, 2 * len);
        self.add(phase::BEAVER_BCAST, self.k - 1, 2 * len);
        self
    }

    /// Fixed-point rescaling of `len` entries; free on the real backend.
    pub fn truncate(&mut self, len: usize) -> &mut Self {
        if self.ring {
            self.add(phase::TRIPLES, 3 * self.k, len as u64);
            self.add(phase::TRUNC_MASK, self.k - 1, len as u64);
        }
        self
    }

    pub fn beaver_mul(&mut self, len: usize) -> &mut Self {
        self.beaver_raw(len).truncate(len)
    }

    pub fn scale_public(&mut self, len: usize) -> &mut Self {
        self.truncate(len)
    }

    /// (m×n)·(n×p).
    pub fn matmul(&mut self, m: usize, n: usize, p: usize) -> &mut Self {
        self.beaver_raw(m * n * p).truncate(m * p)
    }

    /// Perturbed inversion of an n×n matrix, assuming the first attempt is
    /// accepted.
    pub fn inverse(&mut self, n: usize) -> &mut Self {
        self.share_input_as(phase::ALG5_SHARE_P, n, n)
            .matmul(n, n, n)
            .open(phase::ALG5_AGGREGATE_UP, n, n)
            .share_input_as(phase::ALG5_SHARE_INV, n, n)
            .matmul(n, n, n)
    }

    /// Direct fit on an already shared N×m design.
    pub fn normal_equation(&mut self, n: usize, m: usize) -> &mut Self {
        self.matmul(m, n, m)
            .matmul(m, n, 1)
            .inverse(m)
            .matmul(m, m, 1)
    }

    pub fn gradient_descent(
        &mut self,
        n: usize,
        m: usize,
        iters: usize,
        init: GdInit,
    ) -> &mut Self {
        if matches!(init, GdInit::Uniform { .. }) {
            self.share_input(m, 1);
        }
        for _ in 0..iters {
            self.matmul(n, m, 1).matmul(m, n, 1).scale_public(m);
        }
        self
    }

    pub fn fit(
        &mut self,
        method: Method,
        n: usize,
        m: usize,
        iters: usize,
        init: GdInit,
    ) -> &mut Self {
        match method {
            Method::NormalEquation => self.normal_equation(n, m),
            Method::GradientDescent => self.gradient_descent(n, m, iters, init),
        }
    }

    pub fn summary(&self) -> LedgerSummary {
        let total = self
            .by_phase
            .values()
            .fold(Totals::default(), |a, &b| a + b);
        let triples = self
            .by_phase
            .get(phase::TRIPLES)
            .copied()
            .unwrap_or_default();
        LedgerSummary {
            total,
            without_triples: Totals {
                messages: total.messages - triples.messages,
                elements: total.elements - triples.elements,
                bytes: total.bytes - triples.bytes,
            },
            by_phase: self.by_phase.clone(),
        }
    }
}
