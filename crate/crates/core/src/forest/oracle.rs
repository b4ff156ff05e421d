//! Independently coded exhaustive CART used as a structural oracle by the
//! verification suites: naive O(n²) SSE evaluation per node, explicit
//! recursion over index vectors, no incremental sums, no in-place
//! partitioning. Kept outside `cfg(test)` so integration tests can compare
//! production trees against it node for node.

use crate::types::NUM_FEATURES;

use super::tree::Node;
use super::ForestHyperparams;

#[derive(Debug, PartialEq)]
pub enum OracleNode {
    Leaf {
        value: [f64; 3],
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<OracleNode>,
        right: Box<OracleNode>,
    },
}

pub fn naive_mean(targets: &[[f64; 3]], idx: &[usize]) -> [f64; 3] {
    let mut m = [0.0; 3];
    for &i in idx {
        for c in 0..3 {
            m[c] += targets[i][c];
        }
    }
    for v in m.iter_mut() {
        *v /= idx.len() as f64;
    }
    m
}

pub fn naive_sse(targets: &[[f64; 3]], idx: &[usize]) -> f64 {
    let m = naive_mean(targets, idx);
    idx.iter()
        .map(|&i| {
            (0..3)
                .map(|c| (targets[i][c] - m[c]).powi(2))
                .sum::<f64>()
        })
        .sum()
}

pub fn oracle_cart(
    rows: &[[f64; NUM_FEATURES]],
    targets: &[[f64; 3]],
    idx: &[usize],
    depth: usize,
    h: &ForestHyperparams,
) -> OracleNode {
    let node_sse = naive_sse(targets, idx);
    let leaf = || OracleNode::Leaf {
        value: naive_mean(targets, idx),
        n: idx.len(),
    };
    if depth >= h.max_depth || idx.len() < h.min_samples_split || node_sse <= 0.0 {
        return leaf();
    }
    // Candidate scores must reproduce the frozen scoring arithmetic
    // (prefix sums over the (value, index)-sorted walk) bit-for-bit,
    // otherwise mathematically tied splits resolve differently.
    let mut best: Option<(usize, f64, f64)> = None;
    for f in 0..NUM_FEATURES {
        let mut order: Vec<usize> = idx.to_vec();
        order.sort_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
        let (mut t1, mut t2) = ([0.0; 3], [0.0; 3]);
        for &i in &order {
            for c in 0..3 {
                t1[c] += targets[i][c];
                t2[c] += targets[i][c] * targets[i][c];
            }
        }
        let (mut s1, mut s2) = ([0.0; 3], [0.0; 3]);
        for k in 0..order.len() - 1 {
            let i = order[k];
            for c in 0..3 {
                s1[c] += targets[i][c];
                s2[c] += targets[i][c] * targets[i][c];
            }
            let (n_l, n_r) = (k + 1, order.len() - k - 1);
            if n_l < h.min_samples_leaf || n_r < h.min_samples_leaf {
                continue;
            }
            let (v, next) = (rows[i][f], rows[order[k + 1]][f]);
            if next <= v {
                continue;
            }
            let mut score = 0.0;
            for c in 0..3 {
                let l = (s2[c] - s1[c] * s1[c] / n_l as f64).max(0.0);
                let r1 = t1[c] - s1[c];
                let r2 = t2[c] - s2[c];
                score += l + (r2 - r1 * r1 / n_r as f64).max(0.0);
            }
            if best.is_none_or(|(_, _, s)| score < s) {
                best = Some((f, v + (next - v) / 2.0, score));
            }
        }
    }
    let Some((f, thr, score)) = best else {
        return leaf();
    };
    if node_sse - score <= 0.0 {
        return leaf();
    }
    let left: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][f] <= thr).collect();
    let right: Vec<usize> = idx.iter().copied().filter(|&i| rows[i][f] > thr).collect();
    OracleNode::Split {
        feature: f,
        threshold: thr,
        left: Box::new(oracle_cart(rows, targets, &left, depth + 1, h)),
        right: Box::new(oracle_cart(rows, targets, &right, depth + 1, h)),
    }
}

/// Structural equality with exact features/thresholds/counts; leaf
/// means may differ in the last ulp because summation order differs.
pub fn same_tree(a: &OracleNode, b: &OracleNode) -> bool {
    match (a, b) {
        (OracleNode::Leaf { value: va, n: na }, OracleNode::Leaf { value: vb, n: nb }) => {
            na == nb
                && va
                    .iter()
                    .zip(vb)
                    .all(|(x, y)| (x - y).abs() <= 1e-12 * x.abs().max(1.0))
        }
        (
            OracleNode::Split {
                feature: fa,
                threshold: ta,
                left: la,
                right: ra,
            },
            OracleNode::Split {
                feature: fb,
                threshold: tb,
                left: lb,
                right: rb,
            },
        ) => fa == fb && ta == tb && same_tree(la, lb) && same_tree(ra, rb),
        _ => false,
    }
}

/// View a flattened production tree as an [`OracleNode`] for comparison.
pub fn to_oracle(nodes: &[Node], i: usize) -> OracleNode {
    let n = &nodes[i];
    if n.is_leaf() {
        OracleNode::Leaf {
            value: n.value,
            n: n.n_samples as usize,
        }
    } else {
        OracleNode::Split {
            feature: n.feature as usize,
            threshold: n.threshold,
            left: Box::new(to_oracle(nodes, n.left as usize)),
            right: Box::new(to_oracle(nodes, n.right as usize)),
        }
    }
}
