//! Interventional Shapley values for tree models, computed exactly per
//! (explained row, background row) pair by walking each tree once.
//!
//! For a fixed pair (x, b) the tree output as a function of the coalition S
//! is a sum over leaves of `value * [X ⊆ S] * [B ∩ S = ∅]`, where X holds
//! the features whose split sends x (and not b) toward the leaf and B the
//! features whose split sends b (and not x). Such a term gives each member
//! of X the share `(|X|-1)! |B|! / (|X|+|B|)!` of the value and takes
//! `|X|! (|B|-1)! / (|X|+|B|)!` from each member of B. A leaf needing one
//! feature from both rows is unreachable and skipped.

use super::{check_inputs, Estimator, ExplainError, Explanation};
use crate::learn::{sigmoid, Node, TrainedModel, Tree, TreeEnsemble};

#[derive(Clone, Copy, PartialEq)]
enum Side {
    Free,
    X,
    B,
}

struct Walk<'a> {
    tree: &'a Tree,
    x: &'a [f64],
    b: &'a [f64],
    side: Vec<Side>,
    in_x: Vec<usize>,
    in_b: Vec<usize>,
    fact: &'a [f64],
}

impl Walk<'_> {
    fn visit(&mut self, at: usize, phis: &mut [f64]) {
        match self.tree.nodes[at] {
            Node::Leaf { value } => {
                let (nx, nb) = (self.in_x.len(), self.in_b.len());
                if nx + nb == 0 || value == 0.0 {
                    return;
                }
                let total = self.fact[nx + nb];
                if nx > 0 {
                    let w = value * self.fact[nx - 1] * self.fact[nb] / total;
                    for &j in &self.in_x {
                        phis[j] += w;
                    }
                }
                if nb > 0 {
                    let w = value * self.fact[nx] * self.fact[nb - 1] / total;
                    for &j in &self.in_b {
                        phis[j] -= w;
                    }
                }
            }
            Node::Split { feature, threshold, left, right } => {
                let go_x = if self.x[feature] <= threshold { left } else { right };
                let go_b = if self.b[feature] <= threshold { left } else { right };
                if go_x == go_b {
                    self.visit(go_x, phis);
                    return;
                }
                match self.side[feature] {
                    Side::X => self.visit(go_x, phis),
                    Side::B => self.visit(go_b, phis),
                    Side::Free => {
                        self.side[feature] = Side::X;
                        self.in_x.push(feature);
                        self.visit(go_x, phis);
                        self.in_x.pop();
                        self.side[feature] = Side::B;
                        self.in_b.push(feature);
                        self.visit(go_b, phis);
                        self.in_b.pop();
                        self.side[feature] = Side::Free;
                    }
                }
            }
        }
    }
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for i in 1..=n {
        f[i] = f[i - 1] * i as f64;
    }
    f
}

/// Shapley values of one tree's output for the single-reference game
/// between `x` and `b`; they sum to `tree(x) - tree(b)`.
pub(crate) fn tree_pair_shap(tree: &Tree, x: &[f64], b: &[f64], fact: &[f64], phis: &mut [f64]) {
    let mut walk = Walk { tree, x, b, side: vec![Side::Free; x.len()], in_x: Vec::new(), in_b: Vec::new(), fact };
    walk.visit(0, phis);
}

/// Largest number of diverging features for which a boosted model's pair
/// game is enumerated outright (at most 1024 ensemble evaluations).
pub const PAIR_EXACT_MAX: usize = 10;

/// Features with a split that sends `x` and `b` different ways in some tree.
fn diverging(trees: &[Tree], x: &[f64], b: &[f64]) -> Vec<usize> {
    let mut d: Vec<usize> = trees
        .iter()
        .flat_map(|t| t.nodes.iter())
        .filter_map(|n| match *n {
            Node::Split { feature, threshold, .. } if (x[feature] <= threshold) != (b[feature] <= threshold) => {
                Some(feature)
            }
            _ => None,
        })
        .collect();
    d.sort_unstable();
    d.dedup();
    d
}

/// Shapley values of the single-reference game `S -> f(x on S, b elsewhere)`
/// by enumerating coalitions of `players`; everything else is the same for
/// both rows as far as `f` can tell.
fn pair_game_exact(f: impl Fn(&[f64]) -> f64, x: &[f64], b: &[f64], players: &[usize], fact: &[f64], out: &mut [f64]) {
    let k = players.len();
    let mut z = b.to_vec();
    let v: Vec<f64> = (0..1usize << k)
        .map(|mask| {
            for (i, &j) in players.iter().enumerate() {
                z[j] = if mask & (1 << i) != 0 { x[j] } else { b[j] };
            }
            f(&z)
        })
        .collect();
    for (i, &j) in players.iter().enumerate() {
        let bit = 1usize << i;
        let mut phi = 0.0;
        for mask in (0..1usize << k).filter(|m| m & bit == 0) {
            let s = mask.count_ones() as usize;
            phi += fact[s] * fact[k - s - 1] / fact[k] * (v[mask | bit] - v[mask]);
        }
        out[j] += phi;
    }
}

/// Tree-path Shapley values for a tree-based model.
///
/// Averaged ensembles (a decision tree or a forest) give exactly the
/// interventional values of the probability score. For a boosted model the
/// score is a sigmoid of the summed trees, so per-tree values do not add up.
/// Each background row's game is then enumerated exactly when at most
/// [`PAIR_EXACT_MAX`] features separate it from `x`; otherwise the per-tree
/// margin values are rescaled by `(p(x) - p(b)) / (m(x) - m(b))`, which keeps
/// the sum equal to `p(x) - p(b)` but only approximates each share.
pub fn shapley_tree(model: &TrainedModel, x: &[f64], background: &[Vec<f64>]) -> Result<Explanation, ExplainError> {
    check_inputs(model, x, background)?;
    let ensemble = model.trees().ok_or(ExplainError::NotATreeModel(model.kind()))?;
    let d = x.len();
    let fact = factorials(d);
    let mut phis = vec![0.0; d];
    let mut pair = vec![0.0; d];
    let nb = background.len() as f64;
    match ensemble {
        TreeEnsemble::Averaged(trees) => {
            for t in trees {
                for b in background {
                    tree_pair_shap(t, x, b, &fact, &mut phis);
                }
            }
            let scale = 1.0 / (trees.len() as f64 * nb);
            phis.iter_mut().for_each(|p| *p *= scale);
        }
        TreeEnsemble::Boosted { base, trees } => {
            let margin = |row: &[f64]| base + trees.iter().map(|t| t.predict(row)).sum::<f64>();
            let mx = margin(x);
            let px = sigmoid(mx);
            for b in background {
                pair.iter_mut().for_each(|p| *p = 0.0);
                let players = diverging(trees, x, b);
                if players.len() <= PAIR_EXACT_MAX {
                    pair_game_exact(|z| sigmoid(margin(z)), x, b, &players, &fact, &mut pair);
                    for (p, q) in phis.iter_mut().zip(&pair) {
                        *p += q / nb;
                    }
                    continue;
                }
                for t in trees {
                    tree_pair_shap(t, x, b, &fact, &mut pair);
                }
                let mb = margin(b);
                let scale = if (mx - mb).abs() > 1e-12 { (px - sigmoid(mb)) / (mx - mb) } else { px * (1.0 - px) };
                for (p, q) in phis.iter_mut().zip(&pair) {
                    *p += scale * q / nb;
                }
            }
        }
    }
    let base_value = background.iter().map(|b| model.score(b)).sum::<f64>() / nb;
    Ok(Explanation {
        phis,
        base_value,
        prediction: model.score(x),
        estimator: Estimator::TreePath,
        n_samples: background.len(),
        seed: None,
    })
}
