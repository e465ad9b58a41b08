//! End-to-end acceptance checks. Each test prints one PASS/FAIL line with
//! its measured error and runtime against the budget.

use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};

use stv_core::eval::{
    cell_cost, execute_cell, run_eval, run_scalability, Dataset, EvalConfig, ScaleGrid,
};
use stv_core::linalg::{secure_inverse, secure_matmul};
use stv_core::linear::{
    fit_direct, fit_iterative_with, forecast_linear, share_features, two_step_fit, FitConfig,
};
use stv_core::oracle::{PlainEnsemble, PlainNode};
use stv_core::runtime::{PartyId, PlainKind, Session, SessionOptions};
use stv_core::sharing::{audit_reconstruct, secure_mul, share_input};
use stv_core::timeseries::{build_design, transform, ExoBinding, PolynomialSpec};
use stv_core::tree::{
    fit_art_ensemble, fit_art_series, forecast_art, predict_art, FeatureColumn, TreeNode,
    TreeParams,
};
use stv_core::{Backend, Matrix};

fn report(id: u32, name: &str, ok: bool, detail: String, start: Instant, budget: Duration) {
    let elapsed = start.elapsed();
    let pass = ok && elapsed <= budget;
    println!(
        "criterion {id} {}: {name}: {detail} ({:.2}s, budget {}s)",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    assert!(pass, "criterion {id} failed: {detail}");
}

fn session(k: usize, backend: Backend, seed: u64) -> Session {
    Session::new(k, backend, seed, SessionOptions { audit: true }).unwrap()
}

fn ring() -> Backend {
    Backend::ring(20).unwrap()
}

fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

fn max_diff_na(a: &Matrix, b: &DMatrix<f64>) -> f64 {
    let mut d: f64 = 0.0;
    for i in 0..a.rows() {
        for j in 0..a.cols() {
            d = d.max((a[(i, j)] - b[(i, j)]).abs());
        }
    }
    d
}

fn uniform(rng: &mut ChaCha20Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.gen_range(lo..hi))
}

#[test]
fn c1_smpc_correctness() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    let mut worst = [0.0f64; 2];
    let mut failures = 0;
    for i in 0..500 {
        let k = [2, 4, 8][i % 3];
        let (bi, backend, tol) = if i % 2 == 0 {
            (0, Backend::default(), 1e-9)
        } else {
            (1, ring(), 1e-4)
        };
        let (r, c) = (rng.gen_range(1..=4), rng.gen_range(1..=4));
        let x = uniform(&mut rng, r, c, -10.0, 10.0);
        let y = uniform(&mut rng, r, c, -10.0, 10.0);
        let mut s = session(k, backend, i as u64);
        let xs = share_input(&mut s, PartyId(1 + i % k), &x, "x").unwrap();
        let ys = share_input(&mut s, PartyId(k - i % k), &y, "y").unwrap();
        let prod = secure_mul(&mut s, &xs, &ys).unwrap();
        let checks = [
            (audit_reconstruct(&s, &xs).unwrap(), x.clone()),
            (
                audit_reconstruct(&s, &xs.add(&ys).unwrap()).unwrap(),
                x.add(&y).unwrap(),
            ),
            (
                audit_reconstruct(&s, &xs.sub(&ys).unwrap()).unwrap(),
                x.sub(&y).unwrap(),
            ),
            (
                audit_reconstruct(&s, &prod).unwrap(),
                x.hadamard(&y).unwrap(),
            ),
        ];
        for (got, want) in checks {
            let d = got.max_abs_diff(&want);
            worst[bi] = worst[bi].max(d);
            if d >= tol {
                failures += 1;
            }
        }
    }
    report(
        1,
        "share/add/sub/beaver on 500 instances",
        failures == 0,
        format!(
            "max error real {:.2e} (tol 1e-9), ring {:.2e} (tol 1e-4), {failures} failures",
            worst[0], worst[1]
        ),
        start,
        Duration::from_secs(30),
    );
}

#[test]
fn c2_secure_linear_algebra() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let (mut mm_real, mut mm_ring, mut inv_gap, mut residual) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for i in 0..200 {
        let k = [2, 4, 8][i % 3];
        let (m, n, p) = (
            rng.gen_range(1..=32),
            rng.gen_range(1..=32),
            rng.gen_range(1..=32),
        );
        let a = uniform(&mut rng, m, n, -1.0, 1.0);
        let b = uniform(&mut rng, n, p, -1.0, 1.0);
        let want = to_na(&a) * to_na(&b);
        for backend in [Backend::default(), ring()] {
            let mut s = session(k, backend, i as u64);
            let sa = share_input(&mut s, PartyId(1), &a, "a").unwrap();
            let sb = share_input(&mut s, PartyId(k), &b, "b").unwrap();
            let prod = secure_matmul(&mut s, &sa, &sb).unwrap();
            let d = max_diff_na(&audit_reconstruct(&s, &prod).unwrap(), &want);
            match backend {
                Backend::Real { .. } => mm_real = mm_real.max(d),
                Backend::Ring { .. } => mm_ring = mm_ring.max(d),
            }
        }

        // Symmetric positive definite, like a Gram matrix.
        let q = rng.gen_range(1..=32);
        let g = uniform(&mut rng, q, q, -1.0, 1.0);
        let u = g
            .transpose()
            .matmul(&g)
            .unwrap()
            .add(&Matrix::identity(q).scale(0.5))
            .unwrap();
        let mut s = session(k, Backend::default(), 1000 + i as u64);
        let su = share_input(&mut s, PartyId(1), &u, "u").unwrap();
        let inv = secure_inverse(&mut s, &su).unwrap();
        let inv = audit_reconstruct(&s, &inv).unwrap();
        let oracle = to_na(&u).try_inverse().unwrap();
        inv_gap = inv_gap.max(max_diff_na(&inv, &oracle) / oracle.amax().max(1.0));
        let r = inv.matmul(&u).unwrap().sub(&Matrix::identity(q)).unwrap();
        residual = residual.max(r.norm_inf());
    }
    report(
        2,
        "secure matmul and inverse on 200 shapes",
        mm_real < 1e-9 && mm_ring < 1e-4 && inv_gap < 1e-6 && residual < 1e-6,
        format!(
            "matmul real {mm_real:.2e}, ring {mm_ring:.2e}; inverse rel. gap {inv_gap:.2e}; residual {residual:.2e} (tol 1e-6)"
        ),
        start,
        Duration::from_secs(120),
    );
}

/// Seasonal ARMA with two exogenous drivers.
fn simulated_sarimax(n: usize, seed: u64) -> (Vec<f64>, Vec<Vec<f64>>) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let burn = 100;
    let e: Vec<f64> = (0..n + burn)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            0.3 * z
        })
        .collect();
    let mut x1: Vec<f64> = (0..n + burn)
        .map(|t| (t as f64 * 0.3).sin() + 0.2 * rng.gen::<f64>())
        .collect();
    let mut x2: Vec<f64> = (0..n + burn).map(|_| rng.gen_range(0.0..1.0)).collect();
    let mut y = vec![0.0; n + burn];
    for t in 13..n + burn {
        y[t] = 0.5 * y[t - 1] - 0.2 * y[t - 2]
            + 0.3 * y[t - 12]
            + e[t]
            + 0.4 * e[t - 1]
            + 0.2 * e[t - 12]
            + 0.8 * x1[t]
            - 0.5 * x2[t];
    }
    (
        y.split_off(burn),
        vec![x1.split_off(burn), x2.split_off(burn)],
    )
}

/// Two-step fit computed independently with nalgebra's LU solver.
fn nalgebra_two_step(y: &[f64], exo: &[Vec<f64>], spec: &PolynomialSpec) -> DMatrix<f64> {
    let maxlag = spec.maxlag();
    let mut resid: Option<Vec<f64>> = None;
    let mut coef = DMatrix::zeros(0, 0);
    let ma: Vec<usize> = spec
        .roles()
        .iter()
        .enumerate()
        .filter(|(_, r)| r.residual_lag(spec.s).is_some())
        .map(|(i, _)| i)
        .collect();
    for _ in 0..2 {
        let d = build_design(y, exo, spec, resid.as_deref()).unwrap();
        let mut x = to_na(&d.phi_x);
        if resid.is_none() {
            // First pass: the MA columns are zero, so leave them out.
            x = x.remove_columns_at(&ma);
        }
        let t = DMatrix::from_column_slice(d.phi_y.len(), 1, &d.phi_y);
        coef = (x.transpose() * &x)
            .lu()
            .solve(&(x.transpose() * &t))
            .unwrap();
        let r = &t - &x * &coef;
        let mut full = vec![0.0; maxlag];
        full.extend(r.iter());
        resid = Some(full);
    }
    coef
}

fn lag_design(y: &[f64], exo: &[Vec<f64>], spec: &PolynomialSpec) -> (Matrix, Matrix) {
    let d = build_design(y, exo, spec, None).unwrap();
    let t = d.target();
    (d.phi_x, t)
}

/// Plain batch gradient descent written out directly.
fn plain_gd(x: &DMatrix<f64>, y: &DMatrix<f64>, lr: f64, iters: usize) -> Vec<DMatrix<f64>> {
    let n = x.nrows() as f64;
    let mut a = DMatrix::zeros(x.ncols(), 1);
    let mut out = Vec::with_capacity(iters);
    for _ in 0..iters {
        let grad = x.transpose() * (x * &a - y);
        a -= grad * (lr / n);
        out.push(a.clone());
    }
    out
}

fn gd_checks(x: &Matrix, y: &Matrix, owners: &[usize], k: usize, seed: u64) -> (f64, f64, usize) {
    let xn = to_na(x);
    let yn = to_na(y);
    let gram = xn.transpose() * &xn / x.rows() as f64;
    let eig = gram.clone().symmetric_eigen().eigenvalues;
    let (lmax, lmin) = (eig.max(), eig.min());
    let lr = 1.0 / lmax;
    // Enough steps for the slowest mode to shrink by 1e-7.
    let iters = ((1e-7f64).ln() / (1.0 - lmin / lmax).ln()).ceil() as usize;
    let plain = plain_gd(&xn, &yn, lr, iters);
    let ne = gram
        .lu()
        .solve(&(xn.transpose() * &yn / x.rows() as f64))
        .unwrap();

    let mut s = session(k, Backend::default(), seed);
    let cols: Vec<Matrix> = (0..x.cols()).map(|c| Matrix::column(&x.col(c))).collect();
    let blocks: Vec<(PartyId, &Matrix)> = cols
        .iter()
        .zip(owners)
        .map(|(m, &o)| (PartyId(o), m))
        .collect();
    let xs = share_features(&mut s, &blocks).unwrap();
    let ys = share_input(&mut s, PartyId(1), y, "y").unwrap();
    let mut per_iter: f64 = 0.0;
    let a = fit_iterative_with(&mut s, &xs, &ys, &FitConfig::gd(lr, iters), |it, s, a| {
        if it < 200 || it + 1 == iters {
            per_iter = per_iter.max(max_diff_na(&audit_reconstruct(s, a)?, &plain[it]));
        }
        Ok(())
    })
    .unwrap();
    let conv = max_diff_na(&audit_reconstruct(&s, &a).unwrap(), &ne);
    (per_iter, conv, iters)
}

#[test]
fn c3_linear_oracle_equivalence() {
    let start = Instant::now();
    let k = 3;
    let spec = PolynomialSpec::new(2, 0, 1).seasonal(1, 0, 1, 12);
    let bind = |names: &[&str]| {
        names
            .iter()
            .enumerate()
            .map(|(j, n)| ExoBinding {
                party: PartyId(j + 2),
                column: n.to_string(),
            })
            .collect::<Vec<_>>()
    };

    let (y, exo) = simulated_sarimax(300, 3);
    let sim_spec = spec.clone().with_exo(bind(&["x1", "x2"]));

    let airline = Dataset::airline().unwrap();
    let (z, _) = transform(&airline.target, 0, 0, 12).unwrap();
    let air_exo: Vec<Vec<f64>> = airline
        .exo
        .iter()
        .map(|(_, v)| {
            stv_core::timeseries::MinMax::fit(v, "exo")
                .unwrap()
                .apply_all(v)
        })
        .collect();
    let air_spec = spec.clone().with_exo(bind(&["year", "month"]));

    let mut ne_gap: f64 = 0.0;
    for (i, (series, ex, sp)) in [(&y, &exo, &sim_spec), (&z, &air_exo, &air_spec)]
        .into_iter()
        .enumerate()
    {
        let mut s = session(k, Backend::default(), 30 + i as u64);
        let model = two_step_fit(&mut s, series, ex, sp, &FitConfig::ne()).unwrap();
        let got = audit_reconstruct(&s, &model.coef).unwrap();
        ne_gap = ne_gap.max(max_diff_na(&got, &nalgebra_two_step(series, ex, sp)));

        // Direct fit on a shared design, no MA columns.
        let (x, t) = lag_design(series, ex, &sp.without_ma());
        let mut s = session(k, Backend::default(), 40 + i as u64);
        let xs = share_input(&mut s, PartyId(2), &x, "x").unwrap();
        let ts = share_input(&mut s, PartyId(1), &t, "t").unwrap();
        let a = fit_direct(&mut s, &xs, &ts, 0.0).unwrap();
        let xn = to_na(&x);
        let want = (xn.transpose() * &xn)
            .lu()
            .solve(&(xn.transpose() * to_na(&t)))
            .unwrap();
        ne_gap = ne_gap.max(max_diff_na(&audit_reconstruct(&s, &a).unwrap(), &want));
    }

    // Gradient descent: simulated ARX and the airline AR design.
    let arx = PolynomialSpec::new(2, 0, 0).with_exo(bind(&["x1", "x2"]));
    let (x, t) = lag_design(&y, &exo, &arx);
    let (sim_iter, sim_conv, sim_n) = gd_checks(&x, &t, &[1, 1, 2, 3], k, 50);
    let air_ar = PolynomialSpec::new(1, 0, 0)
        .seasonal(1, 0, 0, 12)
        .with_exo(bind(&["year", "month"]));
    let (x, t) = lag_design(&z, &air_exo, &air_ar);
    let (air_iter, air_conv, air_n) = gd_checks(&x, &t, &[1, 1, 2, 3], k, 51);

    let per_iter = sim_iter.max(air_iter);
    let conv = sim_conv.max(air_conv);
    report(
        3,
        "linear fits against plaintext oracles",
        ne_gap < 1e-6 && per_iter < 1e-9 && conv < 1e-3,
        format!(
            "NE gap {ne_gap:.2e} (tol 1e-6); GD per-iteration {per_iter:.2e} (tol 1e-9); GD vs NE {conv:.2e} after {sim_n}/{air_n} iterations (tol 1e-3)"
        ),
        start,
        Duration::from_secs(120),
    );
}

fn tree_dataset(rng: &mut ChaCha20Rng, n: usize, f: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let cols: Vec<Vec<f64>> = (0..f)
        .map(|j| {
            if j % 3 == 2 {
                (0..n).map(|_| rng.gen_range(0..4) as f64).collect()
            } else {
                (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
            }
        })
        .collect();
    let y = (0..n)
        .map(|i| {
            let mut v = (2.0 * cols[0][i]).sin() + 0.1 * rng.gen::<f64>();
            if f > 1 {
                v += if cols[1][i] > 0.2 { 0.7 } else { -0.3 };
            }
            if f > 2 {
                v += 0.25 * cols[2][i];
            }
            v
        })
        .collect();
    (cols, y)
}

#[test]
fn c4_tree_oracle_equivalence() {
    let start = Instant::now();
    let mut rng = ChaCha20Rng::seed_from_u64(4);
    let (mut pred_gap, mut weight_gap) = (0.0f64, 0.0f64);
    let mut structure_mismatch = 0;
    let datasets = 20;
    for d in 0..datasets {
        let n = rng.gen_range(30..=200);
        let f = rng.gen_range(1..=4);
        let k = [2, 3, 4][d % 3];
        let params = TreeParams {
            trees: rng.gen_range(1..=10),
            max_depth: rng.gen_range(1..=3),
            lambda: [0.0, 1.0, 2.0][d % 3],
            gamma: [0.0, 0.01][d % 2],
            ..TreeParams::default()
        };
        let (cols, y) = tree_dataset(&mut rng, n, f);
        let plain = PlainEnsemble::fit(&cols, &y, &params).unwrap();

        let mut s = session(k, Backend::default(), 400 + d as u64);
        let features: Vec<FeatureColumn> = cols
            .iter()
            .enumerate()
            .map(|(j, v)| FeatureColumn {
                owner: PartyId(j % k + 1),
                name: format!("f{j}"),
                values: v.clone(),
            })
            .collect();
        let ens = fit_art_ensemble(&mut s, &features, &y, &params).unwrap();

        for (tree, ptree) in ens.trees.iter().zip(&plain.trees) {
            if tree.nodes.len() != ptree.len() {
                structure_mismatch += 1;
                continue;
            }
            for (node, pnode) in tree.nodes.iter().zip(ptree) {
                match (node, pnode) {
                    (TreeNode::Leaf { leaf }, PlainNode::Leaf(w)) => {
                        let got = audit_reconstruct(&s, &tree.leaves[*leaf]).unwrap()[(0, 0)];
                        weight_gap = weight_gap.max((got - w).abs());
                    }
                    (
                        TreeNode::Split {
                            feature, threshold, ..
                        },
                        PlainNode::Split {
                            feature: pf,
                            threshold: pt,
                            ..
                        },
                    ) if feature == pf && threshold == pt => {}
                    _ => structure_mismatch += 1,
                }
            }
        }
        for i in (0..n).step_by(7) {
            let row: Vec<f64> = cols.iter().map(|c| c[i]).collect();
            let got = predict_art(&mut s, &ens, &row, PartyId(1 + i % k)).unwrap();
            pred_gap = pred_gap.max((got - plain.predict(&row)).abs());
        }
    }
    report(
        4,
        "distributed trees against the plaintext ensemble",
        pred_gap < 1e-6 && weight_gap < 1e-6 && structure_mismatch == 0,
        format!(
            "{datasets} datasets; prediction gap {pred_gap:.2e}, leaf weight gap {weight_gap:.2e} (tol 1e-6); {structure_mismatch} structural mismatches"
        ),
        start,
        Duration::from_secs(180),
    );
}

#[test]
fn c5_scalability_crossover() {
    let start = Instant::now();
    let report_ = run_scalability(&ScaleGrid::default()).unwrap();
    let avg = |k: usize, m: &str| report_.average("parties", k, m).unwrap().mean_elements;
    let k2 = avg(2, "NE") / avg(2, "GD@100");
    let k8 = avg(8, "NE") / avg(8, "GD@100");
    let growth: Vec<f64> = [2, 4, 8]
        .iter()
        .map(|&k| avg(k, "GD@1000") / avg(k, "GD@100"))
        .collect();

    // The analytic totals must agree with executed protocol runs.
    let mut model_ok = true;
    for k in [2, 4, 8] {
        for it in [None, Some(10)] {
            let b = Backend::default();
            model_ok &=
                cell_cost(k, 10, 100, it, &b) == execute_cell(k, 10, 100, it, &b, 5).unwrap();
        }
    }
    let ok = (0.1..=10.0).contains(&k2)
        && k8 > 1.0
        && growth.iter().all(|g| (8.0..=12.0).contains(g))
        && model_ok;
    report(
        5,
        "NE versus GD communication across the grid",
        ok,
        format!(
            "K=2 NE/GD@100 {k2:.2}; K=8 NE/GD@100 {k8:.2}; GD@1000/GD@100 {:.3?}; model matches execution: {model_ok}",
            growth
        ),
        start,
        Duration::from_secs(300),
    );
}

#[test]
fn c6_airline_accuracy() {
    let start = Instant::now();
    let ds = Dataset::airline().unwrap();
    let cfg = EvalConfig {
        orders: Some(PolynomialSpec::new(2, 0, 1).seasonal(1, 0, 1, 12)),
        window_sizes: vec![60, 80, 100, 120, 140],
        oracle: true,
        ..EvalConfig::default()
    };
    let r = run_eval(&ds, &cfg).unwrap();
    let gap = r
        .windows
        .iter()
        .map(|w| (w.mse - w.oracle_mse.unwrap()).abs())
        .fold(0.0, f64::max);
    report(
        6,
        "airline prequential n-MSE",
        (0.001..=0.01).contains(&r.overall) && gap < 1e-6,
        format!(
            "overall n-MSE {:.5} (range [0.001, 0.01]); per-window gap to plaintext {gap:.2e}",
            r.overall
        ),
        start,
        Duration::from_secs(120),
    );
}

#[test]
fn c7_serverless_invariance() {
    let start = Instant::now();
    let k = 4;
    let (y, exo) = simulated_sarimax(120, 7);
    let (train, future) = (
        &y[..100],
        exo.iter().map(|c| c[100..110].to_vec()).collect::<Vec<_>>(),
    );
    let exo_train: Vec<Vec<f64>> = exo.iter().map(|c| c[..100].to_vec()).collect();
    let bindings = vec![
        ExoBinding {
            party: PartyId(2),
            column: "x1".into(),
        },
        ExoBinding {
            party: PartyId(4),
            column: "x2".into(),
        },
    ];
    let lin_spec = PolynomialSpec::new(2, 0, 1).with_exo(bindings.clone());
    let tree_spec = PolynomialSpec::new(3, 0, 0).with_exo(bindings);

    let mut linear = Vec::new();
    let mut tree = Vec::new();
    for r in 1..=k {
        let mut s = session(k, Backend::default(), 70);
        let m = two_step_fit(&mut s, train, &exo_train, &lin_spec, &FitConfig::ne()).unwrap();
        let f = forecast_linear(&mut s, &m, train, &future, 10, PartyId(r)).unwrap();
        linear.push(f.iter().map(|v| v.to_bits()).collect::<Vec<_>>());

        let mut s = session(k, Backend::default(), 71);
        let params = TreeParams {
            trees: 3,
            ..TreeParams::default()
        };
        let m = fit_art_series(&mut s, train, &exo_train, &tree_spec, &params).unwrap();
        let f = forecast_art(&mut s, &m, train, &future, 10, PartyId(r)).unwrap();
        tree.push(f.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
    }
    let same = |v: &[Vec<u64>]| v.windows(2).all(|w| w[0] == w[1]);
    report(
        7,
        "forecasts independent of the aggregating party",
        same(&linear) && same(&tree),
        format!(
            "linear identical: {}; tree identical: {} across {k} requesters",
            same(&linear),
            same(&tree)
        ),
        start,
        Duration::from_secs(60),
    );
}

#[test]
fn c8_transcript_audit() {
    let start = Instant::now();
    let k = 4;
    let (y, exo) = simulated_sarimax(150, 8);
    let spec = PolynomialSpec::new(2, 0, 1)
        .seasonal(1, 0, 1, 12)
        .with_exo(vec![
            ExoBinding {
                party: PartyId(3),
                column: "x1".into(),
            },
            ExoBinding {
                party: PartyId(4),
                column: "x2".into(),
            },
        ]);
    let mut violations = Vec::new();
    let mut passive_entries = 0;
    for (backend, cfg) in [
        (Backend::default(), FitConfig::ne()),
        (ring(), FitConfig::ne()),
        (Backend::default(), FitConfig::gd(0.05, 30)),
    ] {
        let mut s = session(k, backend, 80);
        two_step_fit(&mut s, &y, &exo, &spec, &cfg).unwrap();
        let aggregator = s.aggregator();
        for p in 2..=k {
            let p = PartyId(p);
            let mut allowed = vec![PlainKind::BeaverBroadcast, PlainKind::OwnRandomness];
            if p == aggregator {
                allowed.push(PlainKind::AggregatedUp);
            }
            passive_entries += s.transcript(p).entries().len();
            violations.extend(
                s.transcript(p)
                    .violations(&allowed)
                    .into_iter()
                    .map(|e| format!("{p:?} {e:?}")),
            );
        }
    }
    report(
        8,
        "passive transcripts hold only whitelisted plaintext",
        violations.is_empty() && passive_entries > 0,
        format!(
            "{passive_entries} passive entries checked, {} violations {:?}",
            violations.len(),
            violations.first()
        ),
        start,
        Duration::from_secs(60),
    );
}
