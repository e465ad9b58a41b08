//! Secret-shared SARIMAX training and serverless forecasting.
//!
//! Coefficients are fitted by the normal equation or by full-batch gradient
//! descent on a design matrix that no party sees in plaintext. Moving-average
//! terms use the two-step scheme: fit with MA columns zeroed, estimate
//! residuals on shares, substitute them as MA columns, refit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{secure_inverse, secure_matmul, secure_transpose};
use crate::matrix::Matrix;
use crate::numeric::Backend;
use crate::runtime::{phase, LedgerSummary, PartyId, PlainKind, Session};
use crate::sharing::{audit_reconstruct, open_to, scale_public, share_input, SharedMatrix};
use crate::timeseries::{ColumnRole, PolynomialSpec};

pub const DEFAULT_RIDGE: f64 = 1e-6;
pub const DEFAULT_PASSES: usize = 2;
pub const AUDIT_EVERY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[serde(rename = "ne")]
    NormalEquation,
    #[serde(rename = "gd")]
    GradientDescent,
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ne" | "normal" | "normal-equation" => Ok(Method::NormalEquation),
            "gd" | "gradient" | "gradient-descent" => Ok(Method::GradientDescent),
            other => Err(Error::config(format!(
                "unknown method `{other}` (expected ne or gd)"
            ))),
        }
    }
}

/// Starting coefficients for gradient descent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GdInit {
    Zeros,
    /// Uniform in `[-scale, scale]` from a seeded generator, sampled and
    /// shared by the active party.
    Uniform {
        seed: u64,
        scale: f64,
    },
}

impl GdInit {
    pub fn values(&self, m: usize) -> Matrix {
        match *self {
            GdInit::Zeros => Matrix::zeros(m, 1),
            GdInit::Uniform { seed, scale } => {
                let mut rng = ChaCha20Rng::seed_from_u64(seed);
                Matrix::from_fn(m, 1, |_, _| rng.gen_range(-scale..=scale))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub method: Method,
    pub lr: f64,
    pub iters: usize,
    /// Added to the Gram diagonal when it is found singular; 0 disables.
    pub ridge: f64,
    /// Total fits in the two-step scheme (2 = one residual refinement).
    pub passes: usize,
    pub init: GdInit,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            method: Method::NormalEquation,
            lr: 0.1,
            iters: 100,
            ridge: DEFAULT_RIDGE,
            passes: DEFAULT_PASSES,
            init: GdInit::Zeros,
        }
    }
}

impl FitConfig {
    pub fn ne() -> Self {
        FitConfig::default()
    }

    pub fn gd(lr: f64, iters: usize) -> Self {
        FitConfig {
            method: Method::GradientDescent,
            lr,
            iters,
            ..FitConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.method == Method::GradientDescent {
            if !(self.lr >= 0.0 && self.lr.is_finite()) {
                return Err(Error::config(format!(
                    "learning rate must be non-negative, got {}",
                    self.lr
                )));
            }
            if self.iters == 0 {
                return Err(Error::config(
                    "gradient descent needs at least one iteration",
                ));
            }
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::config("ridge must be non-negative"));
        }
        if self.passes == 0 {
            return Err(Error::config("passes must be at least 1"));
        }
        Ok(())
    }

    /// With features bounded by 1 in magnitude, the largest eigenvalue of
    /// XᵀX/N is at most M; step sizes past 2/M may diverge.
    pub fn stability_warning(&self, m: usize) -> Option<String> {
        (self.method == Method::GradientDescent && self.lr * m as f64 >= 2.0).then(|| {
            format!(
                "learning rate {} times {m} features is at least 2; gradient descent may diverge",
                self.lr
            )
        })
    }
}

/// Normal-equation fit, `A = (XᵀX)⁻¹ XᵀY`, entirely on shares. If the
/// Gram matrix turns out singular, `ridge·I` is added (active party's
/// diagonal shares) and the inversion retried once.
pub fn fit_direct(
    session: &mut Session,
    x: &SharedMatrix,
    y: &SharedMatrix,
    ridge: f64,
) -> Result<SharedMatrix> {
    check_xy(x, y)?;
    let xt = secure_transpose(x);
    let gram = secure_matmul(session, &xt, x)?;
    let xty = secure_matmul(session, &xt, y)?;
    let inv = match secure_inverse(session, &gram) {
        Ok(inv) => inv,
        Err(Error::Singular { .. }) if ridge > 0.0 => {
            let m = gram.rows();
            let damped = gram.add_public(&Matrix::identity(m).scale(ridge), &session.backend())?;
            secure_inverse(session, &damped)?
        }
        Err(e) => return Err(e),
    };
    secure_matmul(session, &inv, &xty)
}

fn check_xy(x: &SharedMatrix, y: &SharedMatrix) -> Result<()> {
    if y.cols() != 1 || y.rows() != x.rows() {
        return Err(Error::DimensionMismatch {
            op: "fit",
            lhs: x.shape(),
            rhs: y.shape(),
        });
    }
    if x.cols() == 0 || x.cols() > x.rows() {
        return Err(Error::config(format!(
            "need 1 <= features <= samples, got {} features and {} samples",
            x.cols(),
            x.rows()
        )));
    }
    Ok(())
}

fn initial_shares(session: &mut Session, m: usize, init: GdInit) -> Result<SharedMatrix> {
    match init {
        GdInit::Zeros => Ok(SharedMatrix::zeros(
            session.parties(),
            m,
            1,
            &session.backend(),
        )),
        GdInit::Uniform { .. } => share_input(session, PartyId::ACTIVE, &init.values(m), "gd.init"),
    }
}

/// Full-batch gradient descent, `A ← A − (lr/N)·Xᵀ(XA − Y)`. `observe` is
/// called after every iteration with the 0-based iteration index.
pub fn fit_iterative_with(
    session: &mut Session,
    x: &SharedMatrix,
    y: &SharedMatrix,
    cfg: &FitConfig,
    mut observe: impl FnMut(usize, &Session, &SharedMatrix) -> Result<()>,
) -> Result<SharedMatrix> {
    check_xy(x, y)?;
    cfg.validate()?;
    let n = x.rows() as f64;
    let xt = secure_transpose(x);
    let mut a = initial_shares(session, x.cols(), cfg.init)?;
    for it in 0..cfg.iters {
        let pred = secure_matmul(session, x, &a)?;
        let err = pred.sub(y)?;
        let grad = secure_matmul(session, &xt, &err)?;
        let step = scale_public(session, &grad, cfg.lr / n)?;
        a = a.sub(&step)?;
        observe(it, session, &a)?;
    }
    Ok(a)
}

/// [`fit_iterative_with`] that, in audit mode, checks the coefficients
/// every [`AUDIT_EVERY`] iterations and stops on non-finite values.
pub fn fit_iterative(
    session: &mut Session,
    x: &SharedMatrix,
    y: &SharedMatrix,
    cfg: &FitConfig,
) -> Result<SharedMatrix> {
    fit_iterative_with(session, x, y, cfg, |it, s, a| {
        if s.audit_enabled() && ((it + 1) % AUDIT_EVERY == 0 || it + 1 == cfg.iters) {
            let plain = audit_reconstruct(s, a)?;
            if !plain.is_finite() || plain.norm_inf() > 1e12 {
                return Err(Error::Divergence(it + 1));
            }
        }
        Ok(())
    })
}

pub fn fit(
    session: &mut Session,
    x: &SharedMatrix,
    y: &SharedMatrix,
    cfg: &FitConfig,
) -> Result<SharedMatrix> {
    match cfg.method {
        Method::NormalEquation => fit_direct(session, x, y, cfg.ridge),
        Method::GradientDescent => fit_iterative(session, x, y, cfg),
    }
}

/// Each party secret-shares its own feature block; blocks are concatenated
/// column-wise in the given order.
pub fn share_features(
    session: &mut Session,
    blocks: &[(PartyId, &Matrix)],
) -> Result<SharedMatrix> {
    let shared = blocks
        .iter()
        .enumerate()
        .map(|(i, (p, m))| share_input(session, *p, m, &format!("features.{i}")))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&SharedMatrix> = shared.iter().collect();
    SharedMatrix::hstack(&refs)
}

/// Fitted secret-shared linear model for one transformed series.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub spec: PolynomialSpec,
    pub coef: SharedMatrix,
    /// Residual shares for rows `t = maxlag..n` from the final fit, kept for
    /// MA terms at forecast time. `None` without MA terms.
    pub residuals: Option<SharedMatrix>,
    pub n_train: usize,
    pub maxlag: usize,
}

/// Reindexing of the shared series into lag columns: row `r` is time
/// `t = maxlag + r`, column `c` holds `series[t - lags[c] - offset]`, or zero
/// when that falls before the start.
fn lag_block(
    series: &SharedMatrix,
    rows: usize,
    maxlag: usize,
    offset: usize,
    lags: &[usize],
    label: &str,
) -> SharedMatrix {
    let idx: Vec<Option<usize>> = (0..rows)
        .flat_map(|r| {
            lags.iter()
                .map(move |&l| (maxlag + r).checked_sub(l + offset))
        })
        .collect();
    series.gather(rows, lags.len(), &idx, label)
}

struct SharedSeriesDesign {
    ar: SharedMatrix,
    exo: Vec<SharedMatrix>,
    target: SharedMatrix,
    ma_lags: Vec<usize>,
}

impl SharedSeriesDesign {
    fn new(
        session: &mut Session,
        y: &[f64],
        exo: &[Vec<f64>],
        spec: &PolynomialSpec,
    ) -> Result<Self> {
        spec.validate()?;
        let n = y.len();
        let maxlag = spec.maxlag();
        if n <= maxlag {
            return Err(Error::InsufficientHistory { len: n, maxlag });
        }
        if exo.len() != spec.exo.len() || exo.iter().any(|c| c.len() != n) {
            return Err(Error::config(
                "exogenous columns do not match the polynomial bindings or series length",
            ));
        }
        let rows = n - maxlag;
        let roles = spec.roles();
        let ar_lags: Vec<usize> = roles.iter().filter_map(|r| r.target_lag(spec.s)).collect();
        let ma_lags: Vec<usize> = roles
            .iter()
            .filter_map(|r| r.residual_lag(spec.s))
            .collect();
        let series = share_input(session, PartyId::ACTIVE, &Matrix::column(y), "series.y")?;
        let ar = lag_block(&series, rows, maxlag, 0, &ar_lags, "design.ar");
        let target = lag_block(&series, rows, maxlag, 0, &[0], "design.y");
        let mut exo_shared = Vec::with_capacity(exo.len());
        for (binding, col) in spec.exo.iter().zip(exo) {
            let m = Matrix::column(&col[maxlag..]);
            exo_shared.push(share_input(
                session,
                binding.party,
                &m,
                &format!("design.exo.{}", binding.column),
            )?);
        }
        Ok(SharedSeriesDesign {
            ar,
            exo: exo_shared,
            target,
            ma_lags,
        })
    }

    fn rows(&self) -> usize {
        self.target.rows()
    }

    /// MA columns from residual shares aligned with the design rows.
    fn ma_block(
        &self,
        parties: usize,
        backend: &Backend,
        residuals: Option<&SharedMatrix>,
    ) -> SharedMatrix {
        match residuals {
            None => SharedMatrix::zeros(parties, self.rows(), self.ma_lags.len(), backend),
            Some(e) => lag_block(e, self.rows(), 0, 0, &self.ma_lags, "design.ma"),
        }
    }

    fn assemble(&self, ma: Option<&SharedMatrix>) -> Result<SharedMatrix> {
        let mut blocks: Vec<&SharedMatrix> = vec![&self.ar];
        blocks.extend(ma);
        blocks.extend(self.exo.iter());
        SharedMatrix::hstack(&blocks)
    }

    /// Coefficients of a fit without MA columns, padded with zeros at the
    /// MA positions.
    fn pad_ma(&self, a: &SharedMatrix) -> SharedMatrix {
        let (ar, ma) = (self.ar.cols(), self.ma_lags.len());
        let idx: Vec<Option<usize>> = (0..a.rows() + ma)
            .map(|i| match i {
                i if i < ar => Some(i),
                i if i < ar + ma => None,
                i => Some(i - ma),
            })
            .collect();
        a.gather(idx.len(), 1, &idx, "coef.pad-ma")
    }
}

/// Two-step SARIMAX fit on the active party's transformed series `y` and
/// exogenous columns aligned with it (held by the parties named in
/// `spec.exo`). Without MA terms this is a single fit.
pub fn two_step_fit(
    session: &mut Session,
    y: &[f64],
    exo: &[Vec<f64>],
    spec: &PolynomialSpec,
    cfg: &FitConfig,
) -> Result<LinearModel> {
    cfg.validate()?;
    let design = SharedSeriesDesign::new(session, y, exo, spec)?;
    let backend = session.backend();
    let passes = if spec.has_ma() { cfg.passes } else { 1 };
    let mut residuals: Option<SharedMatrix> = None;
    let mut coef = None;
    for _ in 0..passes {
        // With MA columns still zero, the first pass fits the other columns
        // only; the zeroed MA coefficients stay zero.
        let ma = residuals
            .as_ref()
            .map(|e| design.ma_block(session.parties(), &backend, Some(e)));
        let x = design.assemble(ma.as_ref())?;
        let a = fit(session, &x, &design.target, cfg)?;
        if spec.has_ma() {
            let fitted = secure_matmul(session, &x, &a)?;
            residuals = Some(design.target.sub(&fitted)?);
        }
        coef = Some(if ma.is_none() { design.pad_ma(&a) } else { a });
    }
    Ok(LinearModel {
        spec: spec.clone(),
        coef: coef.expect("at least one pass"),
        residuals,
        n_train: y.len(),
        maxlag: spec.maxlag(),
    })
}

/// Recursive multi-step forecast. Each step's feature row is shared by its
/// owners (AR lags by the active party, exogenous values by their holders,
/// MA terms from residual shares, zero past the training data), multiplied
/// with the coefficient shares, and opened only at `requester`. The opened
/// value is routed to the active party when further steps need it as a lag.
///
/// `history` is the active party's transformed training series; `exo_future`
/// holds `horizon` future values per exogenous binding.
pub fn forecast_linear(
    session: &mut Session,
    model: &LinearModel,
    history: &[f64],
    exo_future: &[Vec<f64>],
    horizon: usize,
    requester: PartyId,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidHorizon);
    }
    session.check_party(requester)?;
    let spec = &model.spec;
    if exo_future.len() != spec.exo.len() || exo_future.iter().any(|c| c.len() < horizon) {
        return Err(Error::config(
            "future exogenous values must cover the horizon for every binding",
        ));
    }
    if history.len() != model.n_train {
        return Err(Error::config(
            "forecast history must be the training series",
        ));
    }
    let roles = spec.roles();
    let ar_lags: Vec<usize> = roles.iter().filter_map(|r| r.target_lag(spec.s)).collect();
    let ma_lags: Vec<usize> = roles
        .iter()
        .filter_map(|r| r.residual_lag(spec.s))
        .collect();
    let backend = session.backend();
    let mut series = history.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let t = series.len();
        let ar_row: Vec<f64> = ar_lags.iter().map(|&l| series[t - l]).collect();
        let ar = share_input(
            session,
            PartyId::ACTIVE,
            &Matrix::from_vec(1, ar_row.len(), ar_row)?,
            "forecast.ar",
        )?;
        let ma = match &model.residuals {
            Some(e) => {
                let idx: Vec<Option<usize>> = ma_lags
                    .iter()
                    .map(|&l| (t - l).checked_sub(model.maxlag).filter(|&i| i < e.rows()))
                    .collect();
                e.gather(1, ma_lags.len(), &idx, "forecast.ma")
            }
            None => SharedMatrix::zeros(session.parties(), 1, ma_lags.len(), &backend),
        };
        let mut exo = Vec::with_capacity(spec.exo.len());
        for (binding, col) in spec.exo.iter().zip(exo_future) {
            exo.push(share_input(
                session,
                binding.party,
                &Matrix::from_vec(1, 1, vec![col[h]])?,
                &format!("forecast.exo.{}", binding.column),
            )?);
        }
        let mut blocks: Vec<&SharedMatrix> = vec![&ar, &ma];
        blocks.extend(exo.iter());
        let row = SharedMatrix::hstack(&blocks)?;
        let pred = secure_matmul(session, &row, &model.coef)?;
        let value = open_to(
            session,
            &pred,
            requester,
            phase::FORECAST_AGGREGATE,
            PlainKind::Forecast,
        )?[(0, 0)];
        if h + 1 < horizon && requester != PartyId::ACTIVE {
            let routed = session.transfer(
                requester,
                PartyId::ACTIVE,
                phase::FORECAST_LAG_ROUTE,
                1,
                1,
                crate::sharing::ShareData::encode(&[value], &backend)?,
            )?;
            session.record_plain(
                PartyId::ACTIVE,
                PlainKind::Forecast,
                phase::FORECAST_LAG_ROUTE,
                1,
                1,
            );
            series.push(routed.decode(&backend)[0]);
        } else {
            series.push(value);
        }
        out.push(value);
    }
    Ok(out)
}

/// Summary of one training run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub method: Method,
    pub iterations: Option<usize>,
    pub passes: usize,
    pub parties: usize,
    pub backend: String,
    pub spec: PolynomialSpec,
    pub columns: Vec<ColumnRole>,
    pub ledger: LedgerSummary,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
    /// Audit mode only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub coefficients: Option<Vec<f64>>,
    /// Audit mode only; mean squared residual of the final fit.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub training_mse: Option<f64>,
}

impl FitReport {
    pub fn new(session: &Session, model: &LinearModel, cfg: &FitConfig) -> Result<Self> {
        let spec = &model.spec;
        let mut warnings = Vec::new();
        warnings.extend(cfg.stability_warning(spec.coefficient_count()));
        let (coefficients, training_mse) = if session.audit_enabled() {
            let coef = audit_reconstruct(session, &model.coef)?.into_vec();
            let mse = match &model.residuals {
                Some(e) => {
                    let e = audit_reconstruct(session, e)?;
                    Some(e.as_slice().iter().map(|v| v * v).sum::<f64>() / e.rows() as f64)
                }
                None => None,
            };
            (Some(coef), mse)
        } else {
            (None, None)
        };
        Ok(FitReport {
            method: cfg.method,
            iterations: (cfg.method == Method::GradientDescent).then_some(cfg.iters),
            passes: if spec.has_ma() { cfg.passes } else { 1 },
            parties: session.parties(),
            backend: session.backend().name().to_string(),
            spec: spec.clone(),
            columns: spec.roles(),
            ledger: LedgerSummary::from(session.ledger()),
            warnings,
            coefficients,
            training_mse,
        })
    }
}
