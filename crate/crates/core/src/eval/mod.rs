//! Prequential evaluation, dataset presets and the communication benchmark.

mod config;
mod dataset;
mod scale;

pub use config::parse_key_values;
pub use dataset::{Dataset, Recipe};
pub use scale::{
    cell_cost, execute_cell, run_scalability, ScaleAverage, ScaleCell, ScaleGrid, ScaleReport,
};

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linear::{forecast_linear, two_step_fit, FitConfig, FitReport};
use crate::numeric::Backend;
use crate::oracle;
use crate::runtime::{LedgerSummary, PartyId, Session, SessionOptions};
use crate::timeseries::{
    build_design, design_row, inverse_transform, suggest_orders, transform, ExoBinding, MinMax,
    PolynomialSpec,
};
use crate::tree::{fit_art_series, forecast_art, PartyEnsembleExport, TreeParams};

/// Windows need at least this many rows beyond the largest lag.
pub const MIN_WINDOW_SLACK: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Tree,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(ModelKind::Linear),
            "tree" => Ok(ModelKind::Tree),
            other => Err(Error::config(format!(
                "unknown model `{other}` (expected linear or tree)"
            ))),
        }
    }
}

/// Consecutive windows of one size, each split into train and test parts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrequentialPlan {
    pub window_size: usize,
    pub split_ratio: f64,
    pub windows: Vec<(std::ops::Range<usize>, std::ops::Range<usize>)>,
}

impl PrequentialPlan {
    /// Only complete windows are kept; a trailing remainder is ignored.
    pub fn new(len: usize, window_size: usize, split_ratio: f64) -> Result<Self> {
        if !(split_ratio > 0.0 && split_ratio < 1.0) {
            return Err(Error::config(format!(
                "split ratio must be in (0, 1), got {split_ratio}"
            )));
        }
        let train = (window_size as f64 * split_ratio).floor() as usize;
        if train == 0 || train >= window_size {
            return Err(Error::config(format!(
                "window of {window_size} leaves an empty train or test part"
            )));
        }
        let windows = (0..len / window_size)
            .map(|w| {
                let start = w * window_size;
                (start..start + train, start + train..start + window_size)
            })
            .collect();
        Ok(PrequentialPlan {
            window_size,
            split_ratio,
            windows,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub parties: usize,
    pub backend: Backend,
    pub seed: u64,
    pub audit: bool,
    pub model: ModelKind,
    pub fit: FitConfig,
    pub tree: TreeParams,
    /// Fixed orders for every window; suggested per window when absent.
    /// Exogenous bindings are assigned automatically.
    pub orders: Option<PolynomialSpec>,
    /// Seasonal period offered to order suggestion.
    pub period: Option<usize>,
    pub window_sizes: Vec<usize>,
    pub split_ratio: f64,
    pub requester: PartyId,
    pub use_exo: bool,
    /// Also run the plaintext counterpart on every window.
    pub oracle: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            parties: 3,
            backend: Backend::default(),
            seed: 0,
            audit: false,
            model: ModelKind::Linear,
            fit: FitConfig::ne(),
            tree: TreeParams::default(),
            orders: None,
            period: None,
            window_sizes: vec![50, 100, 200, 400],
            split_ratio: 0.8,
            requester: PartyId::ACTIVE,
            use_exo: true,
            oracle: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResult {
    pub window_size: usize,
    pub index: usize,
    pub train: std::ops::Range<usize>,
    pub test: std::ops::Range<usize>,
    pub spec: PolynomialSpec,
    pub mse: f64,
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle_mse: Option<f64>,
    /// Largest absolute forecast difference to the plaintext counterpart.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub oracle_gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeSummary {
    pub window_size: usize,
    pub windows: usize,
    pub mean_mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub dataset: String,
    pub model: ModelKind,
    pub backend: String,
    pub parties: usize,
    pub windows: Vec<WindowResult>,
    pub per_size: Vec<SizeSummary>,
    /// Mean of the per-size averages.
    pub overall: f64,
    pub ledger: LedgerSummary,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl MetricsReport {
    /// Plain-text table of the per-size averages.
    pub fn table(&self) -> String {
        let mut out = format!("{:>8} {:>8} {:>12}\n", "window", "count", "n-MSE");
        for s in &self.per_size {
            out.push_str(&format!(
                "{:>8} {:>8} {:>12.6}\n",
                s.window_size, s.windows, s.mean_mse
            ));
        }
        out.push_str(&format!(
            "{:>8} {:>8} {:>12.6}\n",
            "overall",
            self.windows.len(),
            self.overall
        ));
        out.push_str(&format!(
            "communication: {} elements ({} without triples)\n",
            self.ledger.total.elements, self.ledger.without_triples.elements
        ));
        out
    }
}

/// Exogenous column `j` lives with party `(j + 1) mod K + 1`, starting at C2.
pub fn exo_owner(j: usize, parties: usize) -> PartyId {
    PartyId((j + 1) % parties + 1)
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// Dataset-level [0, 1] scaling; constant exogenous columns are dropped.
fn scale_dataset(ds: &Dataset, use_exo: bool) -> Result<(Vec<f64>, Vec<(String, Vec<f64>)>)> {
    let target = MinMax::fit(&ds.target, &ds.target_name)?.apply_all(&ds.target);
    let exo = if use_exo {
        ds.exo
            .iter()
            .filter_map(|(name, v)| {
                MinMax::fit(v, name)
                    .ok()
                    .map(|s| (name.clone(), s.apply_all(v)))
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok((target, exo))
}

struct Prepared {
    spec: PolynomialSpec,
    z: Vec<f64>,
    meta: crate::timeseries::TransformMeta,
    exo_train: Vec<Vec<f64>>,
    exo_future: Vec<Vec<f64>>,
}

fn prepare_window(
    cfg: &EvalConfig,
    y: &[f64],
    exo: &[(String, Vec<f64>)],
    train: &std::ops::Range<usize>,
    test: &std::ops::Range<usize>,
    window_size: usize,
) -> Result<Prepared> {
    let y_train = &y[train.clone()];
    let orders = match &cfg.orders {
        Some(o) => o.clone(),
        None => suggest_orders(y_train, cfg.period)?,
    };
    let orders = match cfg.model {
        ModelKind::Linear => orders,
        ModelKind::Tree => orders.without_ma(),
    };
    orders.validate()?;
    if window_size < orders.maxlag() + MIN_WINDOW_SLACK {
        return Err(Error::config(format!(
            "window size {window_size} is smaller than maxlag {} + {MIN_WINDOW_SLACK}",
            orders.maxlag()
        )));
    }
    let (z, meta) = transform(y_train, orders.d, orders.sd, orders.s)?;
    let consumed = meta.consumed();

    // Each owner rescales its column on the training part only.
    let mut bindings = Vec::new();
    let mut exo_train = Vec::new();
    let mut exo_future = Vec::new();
    for (j, (name, col)) in exo.iter().enumerate() {
        let Ok(scaler) = MinMax::fit(&col[train.clone()], name) else {
            continue;
        };
        bindings.push(ExoBinding {
            party: exo_owner(j, cfg.parties),
            column: name.clone(),
        });
        exo_train.push(scaler.apply_all(&col[train.start + consumed..train.end]));
        exo_future.push(scaler.apply_all(&col[test.clone()]));
    }
    Ok(Prepared {
        spec: orders.with_exo(bindings),
        z,
        meta,
        exo_train,
        exo_future,
    })
}

/// Maps forecasts of the transformed series back to the dataset scale.
fn restore(prep: &Prepared, forecast: &[f64]) -> Vec<f64> {
    let mut z = prep.z.clone();
    z.extend_from_slice(forecast);
    let full = inverse_transform(&z, &prep.meta);
    full[full.len() - forecast.len()..].to_vec()
}

fn window_seed(seed: u64, size: usize, index: usize) -> u64 {
    seed ^ ((size as u64) << 32) ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn distributed_forecast(
    cfg: &EvalConfig,
    prep: &Prepared,
    horizon: usize,
    seed: u64,
) -> Result<(Vec<f64>, LedgerSummary)> {
    let mut session = Session::new(
        cfg.parties,
        cfg.backend,
        seed,
        SessionOptions { audit: cfg.audit },
    )?;
    let fc = match cfg.model {
        ModelKind::Linear => {
            let model = two_step_fit(&mut session, &prep.z, &prep.exo_train, &prep.spec, &cfg.fit)?;
            forecast_linear(
                &mut session,
                &model,
                &prep.z,
                &prep.exo_future,
                horizon,
                cfg.requester,
            )?
        }
        ModelKind::Tree => {
            let model = fit_art_series(
                &mut session,
                &prep.z,
                &prep.exo_train,
                &prep.spec,
                &cfg.tree,
            )?;
            forecast_art(
                &mut session,
                &model,
                &prep.z,
                &prep.exo_future,
                horizon,
                cfg.requester,
            )?
        }
    };
    Ok((fc, LedgerSummary::from(session.ledger())))
}

fn plaintext_forecast(cfg: &EvalConfig, prep: &Prepared, horizon: usize) -> Result<Vec<f64>> {
    match cfg.model {
        ModelKind::Linear => {
            let model = oracle::two_step(&prep.z, &prep.exo_train, &prep.spec, &cfg.fit)?;
            oracle::forecast(&model, &prep.z, &prep.exo_future, horizon)
        }
        ModelKind::Tree => {
            let design = build_design(&prep.z, &prep.exo_train, &prep.spec, None)?;
            let columns: Vec<Vec<f64>> = (0..design.phi_x.cols())
                .map(|c| design.phi_x.col(c))
                .collect();
            let ens = oracle::PlainEnsemble::fit(&columns, &design.phi_y, &cfg.tree)?;
            let mut series = prep.z.clone();
            let mut out = Vec::with_capacity(horizon);
            for h in 0..horizon {
                let exo_t: Vec<f64> = prep.exo_future.iter().map(|c| c[h]).collect();
                let row = design_row(&series, &exo_t, &[], &prep.spec, series.len());
                let v = ens.predict(&row);
                series.push(v);
                out.push(v);
            }
            Ok(out)
        }
    }
}

/// Runs every window of every size: preprocess, share, train, forecast the
/// test part, undo the transforms and score on the [0, 1]-scaled data.
pub fn run_eval(ds: &Dataset, cfg: &EvalConfig) -> Result<MetricsReport> {
    if cfg.window_sizes.is_empty() {
        return Err(Error::config("no window sizes given"));
    }
    let (y, exo) = scale_dataset(ds, cfg.use_exo)?;
    let mut windows = Vec::new();
    let mut per_size = Vec::new();
    let mut ledger = LedgerSummary::default();
    let mut warnings = Vec::new();
    for &size in &cfg.window_sizes {
        let plan = PrequentialPlan::new(y.len(), size, cfg.split_ratio)?;
        if plan.windows.is_empty() {
            warnings.push(format!(
                "window size {size} exceeds the {} available rows; skipped",
                y.len()
            ));
            continue;
        }
        let mut sum = 0.0;
        for (index, (train, test)) in plan.windows.iter().enumerate() {
            let prep = prepare_window(cfg, &y, &exo, train, test, size)?;
            let horizon = test.len();
            let (fc, used) =
                distributed_forecast(cfg, &prep, horizon, window_seed(cfg.seed, size, index))?;
            ledger.absorb(&used);
            let forecast = restore(&prep, &fc);
            let actual = y[test.clone()].to_vec();
            let (oracle_mse, oracle_gap) = if cfg.oracle {
                let plain = restore(&prep, &plaintext_forecast(cfg, &prep, horizon)?);
                let gap = plain
                    .iter()
                    .zip(&forecast)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                (Some(mse(&plain, &actual)), Some(gap))
            } else {
                (None, None)
            };
            let m = mse(&forecast, &actual);
            sum += m;
            windows.push(WindowResult {
                window_size: size,
                index,
                train: train.clone(),
                test: test.clone(),
                spec: prep.spec,
                mse: m,
                forecast,
                actual,
                oracle_mse,
                oracle_gap,
            });
        }
        per_size.push(SizeSummary {
            window_size: size,
            windows: plan.windows.len(),
            mean_mse: sum / plan.windows.len() as f64,
        });
    }
    if per_size.is_empty() {
        return Err(Error::config("no window size fits the dataset"));
    }
    let overall = per_size.iter().map(|s| s.mean_mse).sum::<f64>() / per_size.len() as f64;
    Ok(MetricsReport {
        dataset: ds.name.clone(),
        model: cfg.model,
        backend: cfg.backend.name().to_string(),
        parties: cfg.parties,
        windows,
        per_size,
        overall,
        ledger,
        warnings,
    })
}

/// Trained tree ensemble as each party would store it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TreeFitReport {
    pub spec: PolynomialSpec,
    pub trees: usize,
    pub max_depth: usize,
    pub ledger: LedgerSummary,
    pub parties: Vec<PartyEnsembleExport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum FitOutput {
    Linear(FitReport),
    Tree(TreeFitReport),
}

/// Trains one model on the whole dataset.
pub fn fit_series(ds: &Dataset, cfg: &EvalConfig) -> Result<FitOutput> {
    let (y, exo) = scale_dataset(ds, cfg.use_exo)?;
    let n = y.len();
    let prep = prepare_window(cfg, &y, &exo, &(0..n), &(n..n), n)?;
    let mut session = Session::new(
        cfg.parties,
        cfg.backend,
        cfg.seed,
        SessionOptions { audit: cfg.audit },
    )?;
    match cfg.model {
        ModelKind::Linear => {
            let model = two_step_fit(&mut session, &prep.z, &prep.exo_train, &prep.spec, &cfg.fit)?;
            Ok(FitOutput::Linear(FitReport::new(
                &session, &model, &cfg.fit,
            )?))
        }
        ModelKind::Tree => {
            let model = fit_art_series(
                &mut session,
                &prep.z,
                &prep.exo_train,
                &prep.spec,
                &cfg.tree,
            )?;
            let parties = session
                .party_ids()
                .map(|p| model.ensemble.export_party(p))
                .collect();
            Ok(FitOutput::Tree(TreeFitReport {
                spec: prep.spec,
                trees: model.ensemble.trees.len(),
                max_depth: model
                    .ensemble
                    .trees
                    .iter()
                    .map(|t| t.depth())
                    .max()
                    .unwrap_or(0),
                ledger: LedgerSummary::from(session.ledger()),
                parties,
            }))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastReport {
    pub spec: PolynomialSpec,
    pub requester: PartyId,
    pub timestamps: Vec<String>,
    /// In the dataset's original units.
    pub forecast: Vec<f64>,
    pub actual: Vec<f64>,
    /// On [0, 1]-scaled values.
    pub mse: f64,
    pub ledger: LedgerSummary,
}

/// Trains on all but the last `horizon` rows and forecasts them. The held
/// out rows supply the future exogenous values.
pub fn forecast_tail(ds: &Dataset, cfg: &EvalConfig, horizon: usize) -> Result<ForecastReport> {
    if horizon == 0 {
        return Err(Error::InvalidHorizon);
    }
    let n = ds.len();
    if horizon >= n {
        return Err(Error::config(format!(
            "horizon {horizon} leaves no training data out of {n} rows"
        )));
    }
    let (y, exo) = scale_dataset(ds, cfg.use_exo)?;
    let (train, test) = (0..n - horizon, n - horizon..n);
    let prep = prepare_window(cfg, &y, &exo, &train, &test, n)?;
    let (fc, ledger) = distributed_forecast(cfg, &prep, horizon, cfg.seed)?;
    let scaled = restore(&prep, &fc);
    let scaler = MinMax::fit(&ds.target, &ds.target_name)?;
    Ok(ForecastReport {
        spec: prep.spec,
        requester: cfg.requester,
        timestamps: ds.timestamps[test.clone()].to_vec(),
        forecast: scaler.invert_all(&scaled),
        actual: ds.target[test.clone()].to_vec(),
        mse: mse(&scaled, &y[test]),
        ledger,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_tiles_full_windows() {
        let plan = PrequentialPlan::new(145, 60, 0.8).unwrap();
        assert_eq!(plan.windows, vec![(0..48, 48..60), (60..108, 108..120)]);
        assert!(PrequentialPlan::new(10, 200, 0.8)
            .unwrap()
            .windows
            .is_empty());
    }

    #[test]
    fn exo_owners_start_at_c2() {
        assert_eq!(exo_owner(0, 3), PartyId(2));
        assert_eq!(exo_owner(1, 3), PartyId(3));
        assert_eq!(exo_owner(2, 3), PartyId(1));
    }

    #[test]
    fn perfect_forecast_scores_zero() {
        assert_eq!(mse(&[0.1, 0.2], &[0.1, 0.2]), 0.0);
    }

    #[test]
    fn window_too_small_for_lags() {
        let ds = Dataset::airline().unwrap();
        let cfg = EvalConfig {
            orders: Some(PolynomialSpec::new(2, 0, 0).seasonal(1, 0, 0, 12)),
            window_sizes: vec![15],
            ..EvalConfig::default()
        };
        assert_eq!(run_eval(&ds, &cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn linear_matches_plaintext_on_airline() {
        let ds = Dataset::airline().unwrap();
        let cfg = EvalConfig {
            orders: Some(PolynomialSpec::new(1, 1, 1)),
            window_sizes: vec![70],
            oracle: true,
            ..EvalConfig::default()
        };
        let report = run_eval(&ds, &cfg).unwrap();
        assert_eq!(report.windows.len(), 2);
        for w in &report.windows {
            assert!(w.oracle_gap.unwrap() < 1e-6, "{w:?}");
        }
    }
}
