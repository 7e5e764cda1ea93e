//! Binary regression trees shared by every tree-based classifier.
//!
//! A row goes left when `x[feature] <= threshold`. Splits are chosen by the
//! reduction in weighted sum of squared errors of the target. For 0/1 labels
//! the Gini impurity of a node is exactly twice its target variance, so the
//! same criterion yields Gini splits for classification trees.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Node {
    Leaf { value: f64 },
    Split { feature: usize, threshold: f64, left: usize, right: usize },
}

/// Nodes in creation order; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf(value: f64) -> Self {
        Tree { nodes: vec![Node::Leaf { value }] }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf { value } => return value,
                Node::Split { feature, threshold, left, right } => {
                    at = if x[feature] <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, left).max(walk(t, right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    pub fn features_used(&self) -> Vec<usize> {
        let mut f: Vec<usize> = self
            .nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .collect();
        f.sort_unstable();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features drawn per split; `None` scans all of them.
    pub max_features: Option<usize>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    pub gain: f64,
}

/// Best SSE-reducing split of `idx`, or `None` when no admissible split
/// improves by more than round-off.
pub(crate) fn best_split(
    x: &[Vec<f64>],
    target: &[f64],
    idx: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = idx.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = idx.iter().map(|&i| target[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<SplitChoice> = None;
    let mut order = idx.to_vec();
    for &f in features {
        order.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for pos in 0..n - 1 {
            left_sum += target[order[pos]];
            let n_left = pos + 1;
            let (lo, hi) = (x[order[pos]][f], x[order[pos + 1]][f]);
            if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / n_left as f64 + right_sum * right_sum / (n - n_left) as f64 - parent;
            if gain > best.map_or(1e-12, |b| b.gain) {
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                best = Some(SplitChoice { feature: f, threshold, gain });
            }
        }
    }
    best
}

/// Grows a depth-limited tree depth-first. `leaf_value` maps the row
/// indices of a leaf to its output.
pub(crate) fn grow<R: Rng>(
    x: &[Vec<f64>],
    target: &[f64],
    idx: Vec<usize>,
    params: GrowParams,
    leaf_value: &dyn Fn(&[usize]) -> f64,
    rng: &mut R,
) -> Tree {
    let d = x.first().map_or(0, Vec::len);
    let mut tree = Tree { nodes: Vec::new() };
    let mut stack = vec![(idx, 0usize, usize::MAX, false)];
    while let Some((rows, depth, parent, is_right)) = stack.pop() {
        let split = if depth < params.max_depth && !is_constant(target, &rows) {
            let features: Vec<usize> = match params.max_features {
                Some(m) if m < d => {
                    let mut f = sample(rng, d, m).into_vec();
                    f.sort_unstable();
                    f
                }
                _ => (0..d).collect(),
            };
            best_split(x, target, &rows, &features, params.min_leaf)
        } else {
            None
        };
        let at = tree.nodes.len();
        if parent != usize::MAX {
            if let Node::Split { left, right, .. } = &mut tree.nodes[parent] {
                *(if is_right { right } else { left }) = at;
            }
        }
        match split {
            None => tree.nodes.push(Node::Leaf { value: leaf_value(&rows) }),
            Some(s) => {
                tree.nodes.push(Node::Split { feature: s.feature, threshold: s.threshold, left: 0, right: 0 });
                let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&i| x[i][s.feature] <= s.threshold);
                // right pushed first so the left subtree is numbered first
                stack.push((r, depth + 1, at, true));
                stack.push((l, depth + 1, at, false));
            }
        }
    }
    tree
}

fn is_constant(target: &[f64], rows: &[usize]) -> bool {
    rows.windows(2).all(|w| target[w[0]] == target[w[1]])
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn mean_of(target: &[f64]) -> impl Fn(&[usize]) -> f64 + '_ {
        move |rows: &[usize]| rows.iter().map(|&i| target[i]).sum::<f64>() / rows.len() as f64
    }

    #[test]
    fn stump_on_step_function() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, (i * 7 % 10) as f64]).collect();
        let y: Vec<f64> = (0..10).map(|i| if i < 4 { 0.0 } else { 1.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GrowParams { max_depth: 1, min_leaf: 1, max_features: None };
        let t = grow(&x, &y, (0..10).collect(), p, &mean_of(&y), &mut rng);
        assert_eq!(t.nodes[0], Node::Split { feature: 0, threshold: 3.5, left: 1, right: 2 });
        assert_eq!(t.predict(&[2.0, 0.0]), 0.0);
        assert_eq!(t.predict(&[8.0, 0.0]), 1.0);
        assert_eq!(t.depth(), 1);
    }

    #[test]
    fn min_leaf_blocks_small_children() {
        let x: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64]).collect();
        let y = vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GrowParams { max_depth: 4, min_leaf: 2, max_features: None };
        let t = grow(&x, &y, (0..6).collect(), p, &mean_of(&y), &mut rng);
        // isolating row 0 would need a leaf of size one
        let leaves: Vec<f64> = t.nodes.iter().filter_map(|n| if let Node::Leaf { value } = n { Some(*value) } else { None }).collect();
        assert!(leaves.iter().all(|&v| v < 1.0));
    }

    #[test]
    fn pure_node_is_a_leaf() {
        let x = vec![vec![0.0], vec![1.0]];
        let y = vec![1.0, 1.0];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let p = GrowParams { max_depth: 3, min_leaf: 1, max_features: None };
        let t = grow(&x, &y, vec![0, 1], p, &mean_of(&y), &mut rng);
        assert_eq!(t, Tree::leaf(1.0));
    }
}
