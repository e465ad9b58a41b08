//! Centralized plaintext counterparts of the secure protocols, used as
//! ground truth in tests and reports.

use crate::error::{Error, Result};
use crate::linalg::MIN_RCOND;
use crate::linear::{FitConfig, Method};
use crate::matrix::Matrix;
use crate::timeseries::{build_design, design_row, PolynomialSpec};
use crate::tree::{candidate_thresholds, decide, leaf_weight, TreeParams};

/// `(XᵀX)⁻¹ XᵀY`, with the same ridge fallback as the secure fit.
pub fn normal_equation(x: &Matrix, y: &Matrix, ridge: f64) -> Result<Matrix> {
    let xt = x.transpose();
    let gram = xt.matmul(x)?;
    let xty = xt.matmul(y)?;
    let inv = match gram.inverse_with_rcond() {
        Ok((inv, rcond)) if rcond >= MIN_RCOND => inv,
        Ok((_, rcond)) if ridge <= 0.0 => return Err(Error::Singular { rcond }),
        Err(e) if ridge <= 0.0 => return Err(e),
        _ => {
            let damped = gram.add(&Matrix::identity(gram.rows()).scale(ridge))?;
            damped.inverse_with_rcond()?.0
        }
    };
    inv.matmul(&xty)
}

/// Coefficients after each full-batch gradient step.
pub fn gradient_descent_trace(x: &Matrix, y: &Matrix, cfg: &FitConfig) -> Result<Vec<Matrix>> {
    let n = x.rows() as f64;
    let xt = x.transpose();
    let mut a = cfg.init.values(x.cols());
    let mut trace = Vec::with_capacity(cfg.iters);
    for _ in 0..cfg.iters {
        let err = x.matmul(&a)?.sub(y)?;
        let grad = xt.matmul(&err)?;
        a = a.sub(&grad.scale(cfg.lr / n))?;
        trace.push(a.clone());
    }
    Ok(trace)
}

pub fn fit(x: &Matrix, y: &Matrix, cfg: &FitConfig) -> Result<Matrix> {
    match cfg.method {
        Method::NormalEquation => normal_equation(x, y, cfg.ridge),
        Method::GradientDescent => Ok(gradient_descent_trace(x, y, cfg)?
            .pop()
            .unwrap_or_else(|| cfg.init.values(x.cols()))),
    }
}

#[derive(Debug, Clone)]
pub struct PlainLinearModel {
    pub spec: PolynomialSpec,
    pub coef: Matrix,
    /// Residuals of the final fit for rows `t = maxlag..n`.
    pub residuals: Option<Vec<f64>>,
    /// Residuals after each pass (first entry: MA columns zeroed).
    pub pass_residuals: Vec<Vec<f64>>,
    pub n_train: usize,
}

/// Two-step regression: fit with MA columns zeroed, estimate residuals,
/// substitute them and refit.
pub fn two_step(
    y: &[f64],
    exo: &[Vec<f64>],
    spec: &PolynomialSpec,
    cfg: &FitConfig,
) -> Result<PlainLinearModel> {
    let maxlag = spec.maxlag();
    let passes = if spec.has_ma() { cfg.passes } else { 1 };
    let mut full_resid: Option<Vec<f64>> = None;
    let mut coef = None;
    let mut pass_residuals = Vec::new();
    let ma_cols: Vec<bool> = spec
        .roles()
        .iter()
        .map(|r| r.residual_lag(spec.s).is_some())
        .collect();
    for _ in 0..passes {
        let design = build_design(y, exo, spec, full_resid.as_deref())?;
        let (x, a, padded) = if full_resid.is_none() && spec.has_ma() {
            // MA columns are all zero: fit the rest and keep MA coefficients at zero.
            let keep: Vec<usize> = (0..ma_cols.len()).filter(|&c| !ma_cols[c]).collect();
            let x = Matrix::from_fn(design.rows(), keep.len(), |i, j| design.phi_x[(i, keep[j])]);
            let a = fit(&x, &design.target(), cfg)?;
            let mut it = a.as_slice().iter();
            let padded: Vec<f64> = ma_cols
                .iter()
                .map(|&ma| if ma { 0.0 } else { *it.next().expect("sized") })
                .collect();
            (x, a, Matrix::column(&padded))
        } else {
            let a = fit(&design.phi_x, &design.target(), cfg)?;
            (design.phi_x.clone(), a.clone(), a)
        };
        let resid = design.target().sub(&x.matmul(&a)?)?.into_vec();
        let mut full = vec![0.0; maxlag];
        full.extend_from_slice(&resid);
        full_resid = Some(full);
        pass_residuals.push(resid);
        coef = Some(padded);
    }
    Ok(PlainLinearModel {
        spec: spec.clone(),
        coef: coef.expect("at least one pass"),
        residuals: spec
            .has_ma()
            .then(|| pass_residuals.last().cloned())
            .flatten(),
        pass_residuals,
        n_train: y.len(),
    })
}

/// Recursive multi-step forecast; future residuals are zero.
pub fn forecast(
    model: &PlainLinearModel,
    history: &[f64],
    exo_future: &[Vec<f64>],
    horizon: usize,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidHorizon);
    }
    let maxlag = model.spec.maxlag();
    let mut resid = vec![0.0; maxlag];
    if let Some(e) = &model.residuals {
        resid.extend_from_slice(e);
    }
    let mut series = history.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let t = series.len();
        let exo_t: Vec<f64> = exo_future.iter().map(|c| c[h]).collect();
        let row = design_row(&series, &exo_t, &resid, &model.spec, t);
        let v: f64 = row
            .iter()
            .zip(model.coef.as_slice())
            .map(|(a, b)| a * b)
            .sum();
        series.push(v);
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub enum PlainNode {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf(f64),
}

/// Centralized gradient-boosted trees with squared loss, using the same
/// candidates and split rule as the secure builder.
#[derive(Debug, Clone)]
pub struct PlainEnsemble {
    pub trees: Vec<Vec<PlainNode>>,
    pub base_score: f64,
}

impl PlainEnsemble {
    /// `columns[j]` holds feature `j` for every sample.
    pub fn fit(columns: &[Vec<f64>], y: &[f64], params: &TreeParams) -> Result<Self> {
        params.validate()?;
        let n = y.len();
        let mut candidates = Vec::new();
        for (j, c) in columns.iter().enumerate() {
            if c.len() != n {
                return Err(Error::config("feature columns and target differ in length"));
            }
            candidates.extend(
                candidate_thresholds(c, params.max_candidates)
                    .into_iter()
                    .map(|t| (j, t)),
            );
        }
        let mut f = vec![0.0; n];
        let mut trees = Vec::with_capacity(params.trees);
        for _ in 0..params.trees {
            let g: Vec<f64> = f.iter().zip(y).map(|(f, y)| f - y).collect();
            let mut nodes = Vec::new();
            let all: Vec<usize> = (0..n).collect();
            grow(columns, &candidates, &g, params, &all, 0, &mut nodes);
            for (i, fi) in f.iter_mut().enumerate() {
                let row: Vec<f64> = columns.iter().map(|c| c[i]).collect();
                *fi += eval_tree(&nodes, &row);
            }
            trees.push(nodes);
        }
        Ok(PlainEnsemble {
            trees,
            base_score: 0.0,
        })
    }

    pub fn predict(&self, row: &[f64]) -> f64 {
        self.base_score + self.trees.iter().map(|t| eval_tree(t, row)).sum::<f64>()
    }
}

fn grow(
    columns: &[Vec<f64>],
    candidates: &[(usize, f64)],
    g: &[f64],
    params: &TreeParams,
    idx: &[usize],
    depth: usize,
    nodes: &mut Vec<PlainNode>,
) -> usize {
    let gs: f64 = idx.iter().map(|&i| g[i]).sum();
    let hs = idx.len() as f64;
    let left: Vec<(f64, f64)> = if depth < params.max_depth {
        candidates
            .iter()
            .map(|&(j, t)| {
                let l = idx.iter().filter(|&&i| columns[j][i] <= t);
                l.fold((0.0, 0.0), |(a, b), &i| (a + g[i], b + 1.0))
            })
            .collect()
    } else {
        Vec::new()
    };
    let id = nodes.len();
    match decide(depth, gs, hs, &left, params) {
        None => nodes.push(PlainNode::Leaf(
            params.eta * leaf_weight(gs, hs, params.lambda),
        )),
        Some(c) => {
            let (j, t) = candidates[c];
            let (l, r): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| columns[j][i] <= t);
            nodes.push(PlainNode::Split {
                feature: j,
                threshold: t,
                left: 0,
                right: 0,
            });
            let li = grow(columns, candidates, g, params, &l, depth + 1, nodes);
            let ri = grow(columns, candidates, g, params, &r, depth + 1, nodes);
            nodes[id] = PlainNode::Split {
                feature: j,
                threshold: t,
                left: li,
                right: ri,
            };
        }
    }
    id
}

fn eval_tree(nodes: &[PlainNode], row: &[f64]) -> f64 {
    let mut i = 0;
    loop {
        match nodes[i] {
            PlainNode::Leaf(w) => return w,
            PlainNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                i = if row[feature] <= threshold {
                    left
                } else {
                    right
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gd_with_zero_lr_keeps_init() {
        let x = Matrix::column(&[1.0, 2.0]);
        let y = Matrix::column(&[1.0, 1.0]);
        let trace = gradient_descent_trace(&x, &y, &FitConfig::gd(0.0, 5)).unwrap();
        assert!(trace.iter().all(|a| a[(0, 0)] == 0.0));
    }

    #[test]
    fn ne_exact_line() {
        let a = normal_equation(
            &Matrix::column(&[1.0, 2.0, 3.0]),
            &Matrix::column(&[2.0, 4.0, 6.0]),
            0.0,
        )
        .unwrap();
        assert!((a[(0, 0)] - 2.0).abs() < 1e-12);
    }
}
