//! Greedy CART regression tree with multi-output (3-component) targets.
//!
//! Split quality is the total output SSE of the induced partition, summed
//! over the three components. Threshold candidates are midpoints between
//! consecutive distinct sorted feature values; ties on impurity decrease
//! break toward the lowest feature index, then the lowest threshold.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::types::{NUM_FEATURES};

use super::ForestHyperparams;

/// Flattened tree node. `feature < 0` marks a leaf; internal nodes index
/// their children into the owning tree's node array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub feature: i16,
    pub threshold: f64,
    pub left: u32,
    pub right: u32,
    pub value: [f64; 3],
    pub n_samples: u32,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.feature < 0
    }

    fn leaf(value: [f64; 3], n: usize) -> Node {
        Node {
            feature: -1,
            threshold: 0.0,
            left: 0,
            right: 0,
            value,
            n_samples: n as u32,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64; NUM_FEATURES]) -> [f64; 3] {
        let mut node = &self.nodes[0];
        while !node.is_leaf() {
            node = if x[node.feature as usize] <= node.threshold {
                &self.nodes[node.left as usize]
            } else {
                &self.nodes[node.right as usize]
            };
        }
        node.value
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() {
                0
            } else {
                1 + walk(nodes, n.left as usize).max(walk(nodes, n.right as usize))
            }
        }
        walk(&self.nodes, 0)
    }
}

/// Training data in column-major feature layout.
pub struct TrainData {
    pub columns: Vec<Vec<f64>>,
    pub targets: Vec<[f64; 3]>,
}

impl TrainData {
    pub fn new(rows: &[[f64; NUM_FEATURES]], targets: Vec<[f64; 3]>) -> TrainData {
        let mut columns = vec![Vec::with_capacity(rows.len()); NUM_FEATURES];
        for row in rows {
            for (c, v) in row.iter().enumerate() {
                columns[c].push(*v);
            }
        }
        TrainData { columns, targets }
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }
}

/// Per-component sums and squared sums over a sample set; SSE about the
/// mean is computed two-pass for exact zeros on constant targets.
fn mean_and_sse(data: &TrainData, indices: &[u32]) -> ([f64; 3], f64) {
    let n = indices.len() as f64;
    let mut mean = [0.0; 3];
    for &i in indices {
        let t = data.targets[i as usize];
        for c in 0..3 {
            mean[c] += t[c];
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut sse = 0.0;
    for &i in indices {
        let t = data.targets[i as usize];
        for c in 0..3 {
            let d = t[c] - mean[c];
            sse += d * d;
        }
    }
    (mean, sse)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    score: f64,
}

/// Grow one tree over `indices` (typically a bootstrap resample).
/// `importance` accumulates the SSE decrease per split feature.
pub fn grow_tree<R: Rng>(
    data: &TrainData,
    indices: &mut [u32],
    hp: &ForestHyperparams,
    rng: &mut R,
    importance: &mut [f64; NUM_FEATURES],
) -> Tree {
    let mut nodes = Vec::new();
    // Reserve slot 0 for the root.
    nodes.push(Node::leaf([0.0; 3], 0));
    let root = grow(data, indices, 0, hp, rng, importance, &mut nodes).expect("non-empty node");
    nodes[0] = root;
    Tree { nodes }
}

// Returns the node for this subtree; children are appended to `nodes` and
// the returned node references them.
fn grow<R: Rng>(
    data: &TrainData,
    indices: &mut [u32],
    depth: usize,
    hp: &ForestHyperparams,
    rng: &mut R,
    importance: &mut [f64; NUM_FEATURES],
    nodes: &mut Vec<Node>,
) -> Option<Node> {
    let n = indices.len();
    let (mean, node_sse) = mean_and_sse(data, indices);

    if depth >= hp.max_depth || n < hp.min_samples_split || node_sse <= 0.0 {
        return Some(Node::leaf(mean, n));
    }

    let features = sample_features(hp.max_features, rng);
    let mut best: Option<BestSplit> = None;
    let mut pairs: Vec<(f64, u32)> = Vec::with_capacity(n);
    for &f in &features {
        let col = &data.columns[f];
        pairs.clear();
        pairs.extend(indices.iter().map(|&i| (col[i as usize], i)));
        pairs.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut s1 = [0.0; 3];
        let mut s2 = [0.0; 3];
        let (mut t1, mut t2) = ([0.0; 3], [0.0; 3]);
        for &(_, i) in pairs.iter() {
            let t = data.targets[i as usize];
            for c in 0..3 {
                t1[c] += t[c];
                t2[c] += t[c] * t[c];
            }
        }
        for (k, &(v, i)) in pairs.iter().enumerate().take(n - 1) {
            let t = data.targets[i as usize];
            for c in 0..3 {
                s1[c] += t[c];
                s2[c] += t[c] * t[c];
            }
            let n_left = k + 1;
            let n_right = n - n_left;
            if n_left < hp.min_samples_leaf || n_right < hp.min_samples_leaf {
                continue;
            }
            let next = pairs[k + 1].0;
            if next <= v {
                continue; // not a boundary between distinct values
            }
            let mut score = 0.0;
            for c in 0..3 {
                let l = (s2[c] - s1[c] * s1[c] / n_left as f64).max(0.0);
                let r1 = t1[c] - s1[c];
                let r2 = t2[c] - s2[c];
                let r = (r2 - r1 * r1 / n_right as f64).max(0.0);
                score += l + r;
            }
            if best.as_ref().is_none_or(|b| score < b.score) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: v + (next - v) / 2.0,
                    score,
                });
            }
        }
    }

    let Some(best) = best else {
        return Some(Node::leaf(mean, n));
    };
    let decrease = node_sse - best.score;
    if decrease <= 0.0 {
        return Some(Node::leaf(mean, n));
    }
    importance[best.feature] += decrease;

    // In-place partition: left block holds x <= threshold.
    let col = &data.columns[best.feature];
    let mut lo = 0usize;
    let mut hi = n;
    while lo < hi {
        if col[indices[lo] as usize] <= best.threshold {
            lo += 1;
        } else {
            hi -= 1;
            indices.swap(lo, hi);
        }
    }
    debug_assert!(lo > 0 && lo < n);

    let (left_idx, right_idx) = indices.split_at_mut(lo);
    let left = grow(data, left_idx, depth + 1, hp, rng, importance, nodes).unwrap();
    let left_pos = nodes.len() as u32;
    nodes.push(left);
    let right = grow(data, right_idx, depth + 1, hp, rng, importance, nodes).unwrap();
    let right_pos = nodes.len() as u32;
    nodes.push(right);

    Some(Node {
        feature: best.feature as i16,
        threshold: best.threshold,
        left: left_pos,
        right: right_pos,
        value: mean,
        n_samples: n as u32,
    })
}

/// Draw `mtry` distinct feature indices, returned in ascending order so the
/// tie-break toward the lowest feature index is deterministic.
fn sample_features<R: Rng>(mtry: usize, rng: &mut R) -> Vec<usize> {
    let mut all: [usize; NUM_FEATURES] = std::array::from_fn(|i| i);
    for k in 0..mtry.min(NUM_FEATURES) {
        let j = rng.random_range(k..NUM_FEATURES);
        all.swap(k, j);
    }
    let mut chosen = all[..mtry.min(NUM_FEATURES)].to_vec();
    chosen.sort_unstable();
    chosen
}
