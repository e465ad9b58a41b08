//! Communication cost of direct versus iterative fitting across parties,
//! features and samples. Costs depend only on shapes, so cells are priced
//! with the analytic model; [`execute_cell`] runs the real protocol for
//! shapes small enough to execute.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{fit, share_features, FitConfig};
use crate::matrix::Matrix;
use crate::numeric::Backend;
use crate::runtime::{CostModel, LedgerSummary, PartyId, Session, SessionOptions, Totals};
use crate::sharing::share_input;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleGrid {
    pub parties: Vec<usize>,
    /// Per party.
    pub features: Vec<usize>,
    pub samples: Vec<usize>,
    pub iters: Vec<usize>,
    pub backend: Backend,
}

impl Default for ScaleGrid {
    fn default() -> Self {
        ScaleGrid {
            parties: vec![2, 4, 8],
            features: vec![10, 100],
            samples: vec![10, 100, 1000],
            iters: vec![10, 100, 1000],
            backend: Backend::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleCell {
    pub parties: usize,
    pub features: usize,
    pub samples: usize,
    /// `NE` or `GD@iters`.
    pub method: String,
    pub total: Totals,
    pub without_triples: Totals,
}

/// Mean cost of one method over every valid cell with `axis = value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleAverage {
    pub axis: String,
    pub value: usize,
    pub method: String,
    pub mean_elements: f64,
    pub mean_bytes: f64,
    pub mean_elements_without_triples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub backend: String,
    pub cells: Vec<ScaleCell>,
    pub averages: Vec<ScaleAverage>,
}

impl ScaleReport {
    pub fn average(&self, axis: &str, value: usize, method: &str) -> Option<&ScaleAverage> {
        self.averages
            .iter()
            .find(|a| a.axis == axis && a.value == value && a.method == method)
    }

    pub fn table(&self) -> String {
        let methods = self.methods();
        let mut out = String::new();
        for axis in ["parties", "features", "samples"] {
            out.push_str(&format!("{axis:>10}"));
            for m in &methods {
                out.push_str(&format!(" {m:>14}"));
            }
            out.push('\n');
            let mut values: Vec<usize> = self
                .averages
                .iter()
                .filter(|a| a.axis == axis)
                .map(|a| a.value)
                .collect();
            values.dedup();
            for v in values {
                out.push_str(&format!("{v:>10}"));
                for m in &methods {
                    let e = self
                        .average(axis, v, m)
                        .map_or(f64::NAN, |a| a.mean_elements);
                    out.push_str(&format!(" {e:>14.4e}"));
                }
                out.push('\n');
            }
            out.push('\n');
        }
        out
    }

    fn methods(&self) -> Vec<String> {
        let mut m: Vec<String> = Vec::new();
        for c in &self.cells {
            if !m.contains(&c.method) {
                m.push(c.method.clone());
            }
        }
        m
    }
}

fn method_config(iters: Option<usize>) -> FitConfig {
    match iters {
        None => FitConfig::ne(),
        Some(n) => FitConfig::gd(0.01, n),
    }
}

/// Predicted ledger for one cell: every party shares its N×f block, the
/// active party shares the labels, then one fit (`iters = None` for NE).
pub fn cell_cost(
    parties: usize,
    features: usize,
    samples: usize,
    iters: Option<usize>,
    backend: &Backend,
) -> LedgerSummary {
    let cfg = method_config(iters);
    let mut model = CostModel::new(parties, backend);
    for _ in 0..parties {
        model.share_input(samples, features);
    }
    model
        .share_input(samples, 1)
        .fit(cfg.method, samples, parties * features, cfg.iters, cfg.init);
    model.summary()
}

/// Executes the protocol for one cell on random data and returns its ledger.
/// NE needs a full-rank design, so `parties * features <= samples`.
pub fn execute_cell(
    parties: usize,
    features: usize,
    samples: usize,
    iters: Option<usize>,
    backend: &Backend,
    seed: u64,
) -> Result<LedgerSummary> {
    let cfg = method_config(iters);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut session = Session::new(parties, *backend, seed, SessionOptions { audit: false })?;
    let blocks: Vec<Matrix> = (0..parties)
        .map(|_| Matrix::from_fn(samples, features, |_, _| rng.gen_range(-1.0..1.0)))
        .collect();
    let y = Matrix::from_fn(samples, 1, |_, _| rng.gen_range(-1.0..1.0));
    let owned: Vec<(PartyId, &Matrix)> = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| (PartyId(i + 1), b))
        .collect();
    let x = share_features(&mut session, &owned)?;
    let ys = share_input(&mut session, PartyId::ACTIVE, &y, "labels")?;
    fit(&mut session, &x, &ys, &cfg)?;
    Ok(LedgerSummary::from(session.ledger()))
}

fn label(iters: Option<usize>) -> String {
    iters.map_or_else(|| "NE".to_string(), |n| format!("GD@{n}"))
}

/// Prices every valid cell (`features <= samples`) of the grid and averages
/// each method along each axis over the other two.
pub fn run_scalability(grid: &ScaleGrid) -> Result<ScaleReport> {
    if grid.parties.iter().any(|&k| k < 2) {
        return Err(Error::ProtocolArity(
            grid.parties.iter().copied().min().unwrap_or(0),
        ));
    }
    let mut runs: Vec<Option<usize>> = vec![None];
    runs.extend(grid.iters.iter().map(|&n| Some(n)));
    let mut cells = Vec::new();
    for &k in &grid.parties {
        for &f in &grid.features {
            for &n in &grid.samples {
                if f > n {
                    continue;
                }
                for &it in &runs {
                    let s = cell_cost(k, f, n, it, &grid.backend);
                    cells.push(ScaleCell {
                        parties: k,
                        features: f,
                        samples: n,
                        method: label(it),
                        total: s.total,
                        without_triples: s.without_triples,
                    });
                }
            }
        }
    }
    let mut averages = Vec::new();
    let axes: [(&str, &[usize], fn(&ScaleCell) -> usize); 3] = [
        ("parties", &grid.parties, |c| c.parties),
        ("features", &grid.features, |c| c.features),
        ("samples", &grid.samples, |c| c.samples),
    ];
    for (axis, values, get) in axes {
        for &v in values {
            for &it in &runs {
                let method = label(it);
                let sel: Vec<&ScaleCell> = cells
                    .iter()
                    .filter(|c| get(c) == v && c.method == method)
                    .collect();
                if sel.is_empty() {
                    continue;
                }
                let mean = |f: &dyn Fn(&ScaleCell) -> u64| {
                    sel.iter().map(|c| f(c) as f64).sum::<f64>() / sel.len() as f64
                };
                averages.push(ScaleAverage {
                    axis: axis.to_string(),
                    value: v,
                    method,
                    mean_elements: mean(&|c| c.total.elements),
                    mean_bytes: mean(&|c| c.total.bytes),
                    mean_elements_without_triples: mean(&|c| c.without_triples.elements),
                });
            }
        }
    }
    Ok(ScaleReport {
        backend: grid.backend.name().to_string(),
        cells,
        averages,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_matches_execution_on_small_cells() {
        for k in [2, 4] {
            for it in [None, Some(3)] {
                let backend = Backend::default();
                assert_eq!(
                    cell_cost(k, 2, 12, it, &backend),
                    execute_cell(k, 2, 12, it, &backend, 5).unwrap()
                );
            }
        }
    }

    #[test]
    fn costs_increase_along_every_axis() {
        let b = Backend::default();
        let base = cell_cost(2, 10, 100, Some(10), &b).total.elements;
        assert!(cell_cost(4, 10, 100, Some(10), &b).total.elements > base);
        assert!(cell_cost(2, 20, 100, Some(10), &b).total.elements > base);
        assert!(cell_cost(2, 10, 200, Some(10), &b).total.elements > base);
        assert!(cell_cost(2, 10, 100, Some(20), &b).total.elements > base);
    }
}
