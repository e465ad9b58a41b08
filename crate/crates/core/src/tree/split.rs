//! Split scoring shared by the secure builder and the plaintext oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gains at or below this are treated as no improvement.
pub const GAIN_FLOOR: f64 = 1e-12;
/// Candidates whose gains agree to this relative tolerance count as tied;
/// the lowest index wins.
pub const TIE_TOLERANCE: f64 = 1e-10;
const WEIGHT_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub trees: usize,
    pub max_depth: usize,
    /// Shrinkage applied to every leaf weight.
    pub eta: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub min_child_weight: f64,
    /// Per feature column.
    pub max_candidates: usize,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            trees: 10,
            max_depth: 3,
            eta: 0.3,
            lambda: 1.0,
            gamma: 0.0,
            min_child_weight: 1.0,
            max_candidates: 16,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0
            && self.gamma >= 0.0
            && self.eta > 0.0
            && self.min_child_weight >= 0.0)
        {
            return Err(Error::config(
                "tree parameters need lambda, gamma, min_child_weight >= 0 and eta > 0",
            ));
        }
        if self.max_candidates == 0 {
            return Err(Error::config("max_candidates must be at least 1"));
        }
        Ok(())
    }
}

/// `w = -G / (H + λ)`.
pub fn leaf_weight(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        0.0
    } else {
        -g / denom
    }
}

/// Structure score `G² / (H + λ)` of one node.
fn score(g: f64, h: f64, lambda: f64) -> f64 {
    let denom = h + lambda;
    if denom <= 0.0 {
        0.0
    } else {
        g * g / denom
    }
}

/// Objective reduction from splitting a node into (left, right).
pub fn split_gain(g: f64, h: f64, gl: f64, hl: f64, lambda: f64, gamma: f64) -> f64 {
    let (gr, hr) = (g - gl, h - hl);
    0.5 * (score(gl, hl, lambda) + score(gr, hr, lambda) - score(g, h, lambda)) - gamma
}

/// Picks the best admissible candidate given the node totals and each
/// candidate's left-child sums, or `None` if no split improves the objective.
pub fn choose_split(g: f64, h: f64, left: &[(f64, f64)], params: &TreeParams) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &(gl, hl)) in left.iter().enumerate() {
        let hr = h - hl;
        if hl < params.min_child_weight - WEIGHT_SLACK
            || hr < params.min_child_weight - WEIGHT_SLACK
        {
            continue;
        }
        let gain = split_gain(g, h, gl, hl, params.lambda, params.gamma);
        if !(gain > GAIN_FLOOR) {
            continue;
        }
        match best {
            Some((_, b)) if gain <= b + TIE_TOLERANCE * b.abs().max(gain.abs()) => {}
            _ => best = Some((i, gain)),
        }
    }
    best.map(|(i, _)| i)
}

/// Node decision: `None` makes a leaf. Nodes at maximum depth or without
/// instances (H below one half with unit hessians) are always leaves.
pub fn decide(
    depth: usize,
    g: f64,
    h: f64,
    left: &[(f64, f64)],
    params: &TreeParams,
) -> Option<usize> {
    if depth >= params.max_depth || h < 0.5 {
        return None;
    }
    choose_split(g, h, left, params)
}

/// Up to `max` thresholds for `x <= θ` splits: every distinct value except
/// the largest when few, otherwise evenly spaced order statistics.
pub fn candidate_thresholds(values: &[f64], max: usize) -> Vec<f64> {
    let mut u: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
    u.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    u.dedup();
    if u.len() < 2 {
        return Vec::new();
    }
    let distinct = &u[..u.len() - 1];
    if distinct.len() <= max {
        return distinct.to_vec();
    }
    let mut out: Vec<f64> = (1..=max)
        .map(|k| distinct[(k * distinct.len()) / (max + 1)])
        .collect();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weight_formula() {
        assert_eq!(leaf_weight(2.0, 3.0, 1.0), -0.5);
    }

    #[test]
    fn zero_gradients_do_not_split() {
        let left = vec![(0.0, 1.0), (0.0, 2.0), (0.0, 3.0)];
        assert_eq!(choose_split(0.0, 4.0, &left, &TreeParams::default()), None);
    }

    #[test]
    fn tie_goes_to_lowest_index() {
        let left = vec![(1.0, 2.0), (-3.0, 2.0), (-3.0, 2.0)];
        assert_eq!(
            choose_split(0.0, 4.0, &left, &TreeParams::default()),
            Some(1)
        );
    }

    #[test]
    fn min_child_weight_blocks_empty_children() {
        let left = vec![(5.0, 0.0), (5.0, 4.0)];
        assert_eq!(choose_split(5.0, 4.0, &left, &TreeParams::default()), None);
    }

    #[test]
    fn gain_matches_brute_force_objective() {
        // objective of a set of leaves: -0.5 Σ G²/(H+λ) + γ·leaves
        let g = [
            0.3, -1.2, 0.7, 2.0, -0.4, 0.1, -0.9, 1.5, 0.0, -2.2, 0.6, 0.8,
        ];
        let (lambda, gamma) = (1.0, 0.1);
        let obj = |idx: &[usize]| {
            let gs: f64 = idx.iter().map(|&i| g[i]).sum();
            -0.5 * gs * gs / (idx.len() as f64 + lambda) + gamma
        };
        let all: Vec<usize> = (0..g.len()).collect();
        for cut in 1..g.len() {
            let (l, r) = all.split_at(cut);
            let brute = obj(&all) - (obj(l) + obj(r));
            let gl: f64 = l.iter().map(|&i| g[i]).sum();
            let fast = split_gain(
                g.iter().sum(),
                g.len() as f64,
                gl,
                l.len() as f64,
                lambda,
                gamma,
            );
            assert!((brute - fast).abs() < 1e-12, "cut {cut}: {brute} vs {fast}");
        }
    }

    #[test]
    fn thresholds_are_bounded_and_exclude_max() {
        assert_eq!(
            candidate_thresholds(&[3.0, 1.0, 2.0, 2.0], 16),
            vec![1.0, 2.0]
        );
        assert!(candidate_thresholds(&[1.0; 5], 16).is_empty());
        let many: Vec<f64> = (0..200).map(|v| v as f64).collect();
        let t = candidate_thresholds(&many, 16);
        assert_eq!(t.len(), 16);
        assert!(t.windows(2).all(|w| w[0] < w[1]));
        assert!(*t.last().unwrap() < 199.0);
    }
}
