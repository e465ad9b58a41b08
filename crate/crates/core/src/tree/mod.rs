//! Secret-shared autoregressive gradient-boosted trees.
//!
//! Feature owners share 0/1 indicator vectors for their candidate splits.
//! Per node, the parties compute the candidates' gradient sums on shares and
//! open them to the active party, which scores the candidates and announces
//! the chosen split. Leaf weights are secret-shared by the active party, so
//! every party ends up with a share of each leaf.
//!
//! Indicators are integer-encoded, so every product in the protocol is a bit
//! times a fixed-point value and needs no truncation.

mod split;

pub use split::{
    candidate_thresholds, choose_split, decide, leaf_weight, split_gain, TreeParams, GAIN_FLOOR,
    TIE_TOLERANCE,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::secure_matmul_int;
use crate::matrix::Matrix;
use crate::runtime::{phase, PartyId, PlainKind, Session};
use crate::sharing::{
    beaver_mul_int, open_to, share_input, share_integers, ShareData, SharedMatrix,
};
use crate::timeseries::{build_design, design_row, ColumnRole, PolynomialSpec};

/// One plaintext feature column, known only to `owner`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureColumn {
    pub owner: PartyId,
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    /// `x[feature] <= threshold` goes left. Only the owner knows the threshold.
    Split {
        owner: PartyId,
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

/// One tree: public topology plus a shared weight per leaf.
#[derive(Debug, Clone)]
pub struct DistributedTree {
    pub nodes: Vec<TreeNode>,
    pub leaves: Vec<SharedMatrix>,
}

impl DistributedTree {
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, left).max(walk(nodes, right))
                }
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone)]
pub struct ArtEnsemble {
    pub trees: Vec<DistributedTree>,
    pub features: Vec<(PartyId, String)>,
    pub params: TreeParams,
    pub base_score: f64,
}

struct Candidate {
    feature: usize,
    threshold: f64,
}

struct BuildCtx<'a> {
    indicators: Option<SharedMatrix>,
    candidates: &'a [Candidate],
    features: &'a [FeatureColumn],
    params: &'a TreeParams,
    g: SharedMatrix,
    h: SharedMatrix,
}

/// Trains `params.trees` boosted trees with squared loss on the shared
/// features. `y` is the active party's plaintext target.
pub fn fit_art_ensemble(
    session: &mut Session,
    features: &[FeatureColumn],
    y: &[f64],
    params: &TreeParams,
) -> Result<ArtEnsemble> {
    params.validate()?;
    let n = y.len();
    if features.iter().any(|f| f.values.len() != n) {
        return Err(Error::config("feature columns and target differ in length"));
    }
    for f in features {
        session.check_party(f.owner)?;
    }

    // Owners derive their candidates and share the indicator rows once.
    let mut candidates = Vec::new();
    let mut blocks = Vec::new();
    for (j, f) in features.iter().enumerate() {
        let thresholds = candidate_thresholds(&f.values, params.max_candidates);
        if thresholds.is_empty() {
            continue;
        }
        let bits = Matrix::from_fn(thresholds.len(), n, |c, i| {
            f64::from(u8::from(f.values[i] <= thresholds[c]))
        });
        blocks.push(share_integers(
            session,
            f.owner,
            &bits,
            &format!("tree.indicators.{j}"),
        )?);
        candidates.extend(thresholds.into_iter().map(|threshold| Candidate {
            feature: j,
            threshold,
        }));
    }
    let indicators = if blocks.is_empty() {
        None
    } else {
        let refs: Vec<&SharedMatrix> = blocks.iter().collect();
        Some(SharedMatrix::vstack(&refs)?)
    };

    let backend = session.backend();
    let parties = session.parties();
    let base_score = 0.0;
    let mut f_pred = vec![base_score; n];
    let mut trees = Vec::with_capacity(params.trees);
    for t in 0..params.trees {
        let g: Vec<f64> = f_pred.iter().zip(y).map(|(f, y)| f - y).collect();
        let g = share_input(
            session,
            PartyId::ACTIVE,
            &Matrix::column(&g),
            &format!("tree.{t}.g"),
        )?;
        let h = share_input(
            session,
            PartyId::ACTIVE,
            &Matrix::from_fn(n, 1, |_, _| 1.0),
            &format!("tree.{t}.h"),
        )?;
        let mut ctx = BuildCtx {
            indicators: indicators.clone(),
            candidates: &candidates,
            features,
            params,
            g,
            h,
        };
        let root = SharedMatrix::public_int(parties, &Matrix::from_fn(n, 1, |_, _| 1.0), &backend)?;
        let mut tree = DistributedTree {
            nodes: Vec::new(),
            leaves: Vec::new(),
        };
        let mut leaf_sets = Vec::new();
        build_node(session, &mut ctx, &mut tree, &mut leaf_sets, root, 0)?;
        let pred = training_prediction(session, &tree, &leaf_sets)?;
        for (f, p) in f_pred.iter_mut().zip(pred.as_slice()) {
            *f += p;
        }
        trees.push(tree);
    }
    Ok(ArtEnsemble {
        trees,
        features: features.iter().map(|f| (f.owner, f.name.clone())).collect(),
        params: params.clone(),
        base_score,
    })
}

fn build_node(
    session: &mut Session,
    ctx: &mut BuildCtx<'_>,
    tree: &mut DistributedTree,
    leaf_sets: &mut Vec<SharedMatrix>,
    s: SharedMatrix,
    depth: usize,
) -> Result<usize> {
    let ss = SharedMatrix::hstack(&[&s, &s])?;
    let gh = SharedMatrix::hstack(&[&ctx.g, &ctx.h])?;
    let sgh = beaver_mul_int(session, &ss, &gh)?;
    let totals = sgh.col_sums();
    let stats = match (&ctx.indicators, depth < ctx.params.max_depth) {
        (Some(t), true) => {
            let cand = secure_matmul_int(session, t, &sgh)?;
            SharedMatrix::vstack(&[&totals, &cand])?
        }
        _ => totals,
    };
    let opened = open_to(
        session,
        &stats,
        PartyId::ACTIVE,
        phase::TREE_GH,
        PlainKind::SplitStatistics,
    )?;
    let (g_sum, h_sum) = (opened[(0, 0)], opened[(0, 1)]);
    let left: Vec<(f64, f64)> = (1..opened.rows())
        .map(|r| (opened[(r, 0)], opened[(r, 1)]))
        .collect();
    let choice = decide(depth, g_sum, h_sum, &left, ctx.params);
    broadcast_decision(session, choice)?;

    let id = tree.nodes.len();
    match choice {
        None => {
            let w = ctx.params.eta * leaf_weight(g_sum, h_sum, ctx.params.lambda);
            let share = share_input(
                session,
                PartyId::ACTIVE,
                &Matrix::from_vec(1, 1, vec![w])?,
                "tree.leaf",
            )?;
            tree.nodes.push(TreeNode::Leaf {
                leaf: tree.leaves.len(),
            });
            tree.leaves.push(share);
            leaf_sets.push(s);
        }
        Some(c) => {
            let cand = &ctx.candidates[c];
            let t = ctx.indicators.as_ref().expect("split implies candidates");
            let bits = t.select_rows(&[c]).transpose();
            let s_left = beaver_mul_int(session, &s, &bits)?;
            let s_right = s.sub(&s_left)?;
            tree.nodes.push(TreeNode::Split {
                owner: ctx.features[cand.feature].owner,
                feature: cand.feature,
                threshold: cand.threshold,
                left: 0,
                right: 0,
            });
            let l = build_node(session, ctx, tree, leaf_sets, s_left, depth + 1)?;
            let r = build_node(session, ctx, tree, leaf_sets, s_right, depth + 1)?;
            if let TreeNode::Split { left, right, .. } = &mut tree.nodes[id] {
                *left = l;
                *right = r;
            }
        }
    }
    Ok(id)
}

/// The active party announces the chosen candidate index, or -1 for a leaf.
fn broadcast_decision(session: &mut Session, choice: Option<usize>) -> Result<()> {
    let code = choice.map_or(-1.0, |c| c as f64);
    let payload = ShareData::encode_int(&[code], &session.backend())?;
    for p in session
        .party_ids()
        .filter(|p| !p.is_active())
        .collect::<Vec<_>>()
    {
        session.transfer(
            PartyId::ACTIVE,
            p,
            phase::TREE_DECISION,
            1,
            1,
            payload.clone(),
        )?;
        session.record_plain(p, PlainKind::SplitDecision, phase::TREE_DECISION, 1, 1);
    }
    Ok(())
}

/// `Σ_leaf w_leaf · s_leaf` on shares, opened at the active party.
fn training_prediction(
    session: &mut Session,
    tree: &DistributedTree,
    leaf_sets: &[SharedMatrix],
) -> Result<Matrix> {
    let n = leaf_sets[0].rows();
    let l = leaf_sets.len();
    let weights: Vec<SharedMatrix> = tree
        .leaves
        .iter()
        .map(|w| w.gather(n, 1, &vec![Some(0); n], "tree.leaf.broadcast"))
        .collect();
    let s_refs: Vec<&SharedMatrix> = leaf_sets.iter().collect();
    let w_refs: Vec<&SharedMatrix> = weights.iter().collect();
    let products = beaver_mul_int(
        session,
        &SharedMatrix::vstack(&s_refs)?,
        &SharedMatrix::vstack(&w_refs)?,
    )?;
    let identity: Vec<Option<usize>> = (0..l * n).map(Some).collect();
    let pred = products
        .gather(l, n, &identity, "tree.pred.blocks")
        .col_sums()
        .transpose();
    open_to(
        session,
        &pred,
        PartyId::ACTIVE,
        phase::TREE_PRED,
        PlainKind::TrainingPrediction,
    )
}

/// Serverless prediction for one sample. Each split's owner evaluates its
/// threshold on its own feature value and broadcasts the routing bit; every
/// party sums its leaf shares along the routed paths; the sum is opened at
/// `requester` only.
pub fn predict_art(
    session: &mut Session,
    ens: &ArtEnsemble,
    row: &[f64],
    requester: PartyId,
) -> Result<f64> {
    session.check_party(requester)?;
    if row.len() != ens.features.len() {
        return Err(Error::DimensionMismatch {
            op: "predict_art",
            lhs: (1, ens.features.len()),
            rhs: (1, row.len()),
        });
    }
    let backend = session.backend();
    let parties = session.parties();
    let mut acc = SharedMatrix::public(
        parties,
        &Matrix::from_vec(1, 1, vec![ens.base_score])?,
        &backend,
    )?;
    for tree in &ens.trees {
        let mut node = 0;
        loop {
            match tree.nodes[node] {
                TreeNode::Leaf { leaf } => {
                    acc = acc.add(&tree.leaves[leaf])?;
                    break;
                }
                TreeNode::Split {
                    owner,
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let bit = u8::from(row[feature] <= threshold);
                    let payload = ShareData::encode_int(&[f64::from(bit)], &backend)?;
                    let mut seen = bit;
                    for p in session
                        .party_ids()
                        .filter(|&p| p != owner)
                        .collect::<Vec<_>>()
                    {
                        let got =
                            session.transfer(owner, p, phase::TREE_ROUTE, 1, 1, payload.clone())?;
                        session.record_plain(p, PlainKind::RoutingBit, phase::TREE_ROUTE, 1, 1);
                        seen = got.decode_int()[0] as u8;
                    }
                    node = if seen == 1 { left } else { right };
                }
            }
        }
    }
    Ok(open_to(
        session,
        &acc,
        requester,
        phase::FORECAST_AGGREGATE,
        PlainKind::Forecast,
    )?[(0, 0)])
}

/// ART fitted on a transformed series.
#[derive(Debug, Clone)]
pub struct ArtModel {
    pub spec: PolynomialSpec,
    pub ensemble: ArtEnsemble,
    pub n_train: usize,
}

/// Splits a design's columns by owner: lag columns belong to the active
/// party, exogenous columns to their binding.
pub fn feature_columns(design: &Matrix, roles: &[ColumnRole]) -> Vec<FeatureColumn> {
    roles
        .iter()
        .enumerate()
        .map(|(c, role)| {
            let (owner, name) = match *role {
                ColumnRole::Exo { index, party } => (party, format!("exo{index}")),
                ColumnRole::Ar(l) => (PartyId::ACTIVE, format!("ar{l}")),
                ColumnRole::SeasonalAr(l) => (PartyId::ACTIVE, format!("sar{l}")),
                ColumnRole::Ma(l) => (PartyId::ACTIVE, format!("ma{l}")),
                ColumnRole::SeasonalMa(l) => (PartyId::ACTIVE, format!("sma{l}")),
            };
            FeatureColumn {
                owner,
                name,
                values: design.col(c),
            }
        })
        .collect()
}

/// Fits an ART on the active party's transformed series and exogenous
/// columns aligned with it. The polynomial must have no MA terms.
pub fn fit_art_series(
    session: &mut Session,
    y: &[f64],
    exo: &[Vec<f64>],
    spec: &PolynomialSpec,
    params: &TreeParams,
) -> Result<ArtModel> {
    if spec.has_ma() {
        return Err(Error::config(
            "autoregressive trees take no moving-average terms",
        ));
    }
    let design = build_design(y, exo, spec, None)?;
    let features = feature_columns(&design.phi_x, &design.roles);
    let ensemble = fit_art_ensemble(session, &features, &design.phi_y, params)?;
    Ok(ArtModel {
        spec: spec.clone(),
        ensemble,
        n_train: y.len(),
    })
}

/// Recursive multi-step ART forecast, aggregated at `requester`; values are
/// routed back to the active party when later steps need them as lags.
pub fn forecast_art(
    session: &mut Session,
    model: &ArtModel,
    history: &[f64],
    exo_future: &[Vec<f64>],
    horizon: usize,
    requester: PartyId,
) -> Result<Vec<f64>> {
    if horizon == 0 {
        return Err(Error::InvalidHorizon);
    }
    if exo_future.len() != model.spec.exo.len() || exo_future.iter().any(|c| c.len() < horizon) {
        return Err(Error::config(
            "future exogenous values must cover the horizon for every binding",
        ));
    }
    let backend = session.backend();
    let mut series = history.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for h in 0..horizon {
        let t = series.len();
        let exo_t: Vec<f64> = exo_future.iter().map(|c| c[h]).collect();
        let row = design_row(&series, &exo_t, &[], &model.spec, t);
        let value = predict_art(session, &model.ensemble, &row, requester)?;
        if h + 1 < horizon && requester != PartyId::ACTIVE {
            let routed = session.transfer(
                requester,
                PartyId::ACTIVE,
                phase::FORECAST_LAG_ROUTE,
                1,
                1,
                ShareData::encode(&[value], &backend)?,
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

/// What one party stores of an ensemble: the public topology, thresholds of
/// its own splits, and its share of every leaf weight.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartyEnsembleExport {
    pub party: PartyId,
    pub base_score: f64,
    pub features: Vec<(PartyId, String)>,
    pub trees: Vec<PartyTreeExport>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartyTreeExport {
    pub nodes: Vec<ExportNode>,
    pub leaf_shares: Vec<ShareData>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum ExportNode {
    Split {
        owner: PartyId,
        feature: usize,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        threshold: Option<f64>,
        left: usize,
        right: usize,
    },
    Leaf {
        leaf: usize,
    },
}

impl ArtEnsemble {
    pub fn export_party(&self, party: PartyId) -> PartyEnsembleExport {
        let trees = self
            .trees
            .iter()
            .map(|t| PartyTreeExport {
                nodes: t
                    .nodes
                    .iter()
                    .map(|n| match *n {
                        TreeNode::Split {
                            owner,
                            feature,
                            threshold,
                            left,
                            right,
                        } => ExportNode::Split {
                            owner,
                            feature,
                            threshold: (owner == party).then_some(threshold),
                            left,
                            right,
                        },
                        TreeNode::Leaf { leaf } => ExportNode::Leaf { leaf },
                    })
                    .collect(),
                leaf_shares: t
                    .leaves
                    .iter()
                    .map(|w| w.share(party).data.clone())
                    .collect(),
            })
            .collect();
        PartyEnsembleExport {
            party,
            base_score: self.base_score,
            features: self.features.clone(),
            trees,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::Backend;
    use crate::runtime::SessionOptions;
    use crate::sharing::{audit_reconstruct, audit_reconstruct_int};

    fn session(k: usize, b: Backend) -> Session {
        Session::new(k, b, 11, SessionOptions { audit: true }).unwrap()
    }

    #[test]
    fn empty_ensemble_predicts_base_score() {
        let mut s = session(2, Backend::default());
        let f = vec![FeatureColumn {
            owner: PartyId(2),
            name: "x".into(),
            values: vec![1.0, 2.0, 3.0],
        }];
        let params = TreeParams {
            trees: 0,
            ..TreeParams::default()
        };
        let ens = fit_art_ensemble(&mut s, &f, &[1.0, 2.0, 3.0], &params).unwrap();
        assert_eq!(predict_art(&mut s, &ens, &[2.0], PartyId(2)).unwrap(), 0.0);
    }

    #[test]
    fn constant_target_single_leaf() {
        let mut s = session(2, Backend::default());
        let f = vec![FeatureColumn {
            owner: PartyId(2),
            name: "x".into(),
            values: vec![1.0, 2.0, 3.0, 4.0],
        }];
        let params = TreeParams {
            trees: 1,
            lambda: 0.0,
            eta: 1.0,
            ..TreeParams::default()
        };
        let ens = fit_art_ensemble(&mut s, &f, &[2.0; 4], &params).unwrap();
        assert_eq!(ens.trees[0].nodes.len(), 1);
        let w = audit_reconstruct(&s, &ens.trees[0].leaves[0]).unwrap()[(0, 0)];
        // g = 0 - 2 per sample, H = 4, λ = 0: w = 8 / 4
        assert!((w - 2.0).abs() < 1e-12);
    }

    #[test]
    fn ring_indicators_stay_binary_and_partition() {
        let mut s = session(3, Backend::ring(20).unwrap());
        let parties = s.parties();
        let backend = s.backend();
        let root = SharedMatrix::public_int(parties, &Matrix::from_fn(4, 1, |_, _| 1.0), &backend)
            .unwrap();
        let t = share_integers(
            &mut s,
            PartyId(2),
            &Matrix::column(&[0.0, 1.0, 0.0, 1.0]),
            "t",
        )
        .unwrap();
        let left = beaver_mul_int(&mut s, &root, &t).unwrap();
        let right = root.sub(&left).unwrap();
        let l = audit_reconstruct_int(&s, &left).unwrap();
        let r = audit_reconstruct_int(&s, &right).unwrap();
        assert_eq!(l.as_slice(), &[0.0, 1.0, 0.0, 1.0]);
        assert_eq!(r.as_slice(), &[1.0, 0.0, 1.0, 0.0]);
        // sᵀg with s = [0,1,0,1] picks g2 + g4
        let g = share_input(
            &mut s,
            PartyId(1),
            &Matrix::column(&[0.5, -1.25, 2.0, 0.75]),
            "g",
        )
        .unwrap();
        let sg = beaver_mul_int(&mut s, &left, &g).unwrap().col_sums();
        assert_eq!(audit_reconstruct(&s, &sg).unwrap()[(0, 0)], -0.5);
    }

    #[test]
    fn serverless_single_leaf() {
        let mut s = session(3, Backend::default());
        let leaf = share_input(&mut s, PartyId(1), &Matrix::column(&[1.5]), "w").unwrap();
        let ens = ArtEnsemble {
            trees: vec![DistributedTree {
                nodes: vec![TreeNode::Leaf { leaf: 0 }],
                leaves: vec![leaf],
            }],
            features: vec![],
            params: TreeParams::default(),
            base_score: 0.0,
        };
        for r in 1..=3 {
            assert_eq!(predict_art(&mut s, &ens, &[], PartyId(r)).unwrap(), 1.5);
        }
    }

    #[test]
    fn export_hides_foreign_thresholds() {
        let mut s = session(2, Backend::default());
        let f = vec![FeatureColumn {
            owner: PartyId(2),
            name: "x".into(),
            values: (0..20).map(|v| v as f64).collect(),
        }];
        let y: Vec<f64> = (0..20).map(|v| if v < 10 { 0.0 } else { 1.0 }).collect();
        let ens = fit_art_ensemble(
            &mut s,
            &f,
            &y,
            &TreeParams {
                trees: 1,
                ..TreeParams::default()
            },
        )
        .unwrap();
        let has_threshold = |p: usize| {
            ens.export_party(PartyId(p)).trees[0].nodes.iter().any(|n| {
                matches!(
                    n,
                    ExportNode::Split {
                        threshold: Some(_),
                        ..
                    }
                )
            })
        };
        assert!(has_threshold(2));
        assert!(!has_threshold(1));
        let json = serde_json::to_string(&ens.export_party(PartyId(1))).unwrap();
        assert!(json.contains("leaf_shares"));
    }

    #[test]
    fn matches_plaintext_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let n = 40;
        let cols: Vec<Vec<f64>> = (0..3)
            .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let y: Vec<f64> = (0..n)
            .map(|i| (3.0 * cols[0][i]).sin() + cols[1][i] * cols[2][i])
            .collect();
        let params = TreeParams {
            trees: 3,
            ..TreeParams::default()
        };
        let plain = crate::oracle::PlainEnsemble::fit(&cols, &y, &params).unwrap();
        for backend in [Backend::default(), Backend::ring(20).unwrap()] {
            let tol = if matches!(backend, Backend::Real { .. }) {
                1e-9
            } else {
                1e-3
            };
            let mut s = session(3, backend);
            let feats: Vec<FeatureColumn> = cols
                .iter()
                .enumerate()
                .map(|(j, v)| FeatureColumn {
                    owner: PartyId(j % 3 + 1),
                    name: format!("f{j}"),
                    values: v.clone(),
                })
                .collect();
            let ens = fit_art_ensemble(&mut s, &feats, &y, &params).unwrap();
            for i in 0..n {
                let row: Vec<f64> = cols.iter().map(|c| c[i]).collect();
                let got = predict_art(&mut s, &ens, &row, PartyId(2)).unwrap();
                assert!((got - plain.predict(&row)).abs() < tol, "sample {i}");
            }
        }
    }
}
