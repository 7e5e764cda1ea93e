//! Equal-frequency feature binning and best-first (leaf-wise) tree growth
//! over the binned data.

use super::tree::{Node, Tree};

/// Per-feature cut points. A value `v` falls in bin `b` when it is above
/// `cuts[b - 1]` and at most `cuts[b]`.
#[derive(Debug, Clone)]
pub(crate) struct Binner {
    cuts: Vec<Vec<f64>>,
}

impl Binner {
    pub fn fit(x: &[Vec<f64>], n_bins: usize) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let cuts = (0..d)
            .map(|f| {
                let mut col: Vec<f64> = x.iter().map(|r| r[f]).collect();
                col.sort_by(f64::total_cmp);
                let n = col.len();
                let mut cuts: Vec<f64> = Vec::new();
                for b in 1..n_bins {
                    let pos = b * n / n_bins;
                    if pos == 0 || pos >= n {
                        continue;
                    }
                    let (lo, hi) = (col[pos - 1], col[pos]);
                    if lo == hi {
                        continue;
                    }
                    let mid = lo + (hi - lo) / 2.0;
                    let cut = if mid < hi { mid } else { lo };
                    if cuts.last().map_or(true, |&c| cut > c) {
                        cuts.push(cut);
                    }
                }
                cuts
            })
            .collect();
        Binner { cuts }
    }

    pub fn n_bins(&self, f: usize) -> usize {
        self.cuts[f].len() + 1
    }

    pub fn bin(&self, f: usize, v: f64) -> usize {
        self.cuts[f].partition_point(|&c| c < v)
    }

    /// Upper edge of bin `b`, used as the split threshold.
    pub fn cut(&self, f: usize, b: usize) -> f64 {
        self.cuts[f][b]
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<u16>> {
        x.iter().map(|r| r.iter().enumerate().map(|(f, &v)| self.bin(f, v) as u16).collect()).collect()
    }
}

struct Candidate {
    node: usize,
    rows: Vec<usize>,
    depth: usize,
    split: Option<(usize, usize, f64)>,
}

/// Leaf-wise growth: repeatedly splits the leaf whose best split has the
/// largest SSE reduction until `max_leaves` leaves exist or no leaf can
/// improve.
pub(crate) fn grow_leafwise(
    binned: &[Vec<u16>],
    binner: &Binner,
    target: &[f64],
    rows: Vec<usize>,
    max_leaves: usize,
    max_depth: usize,
    min_leaf: usize,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let mut tree = Tree { nodes: vec![Node::Leaf { value: 0.0 }] };
    let root_split = hist_split(binned, binner, target, &rows, min_leaf);
    let mut open = vec![Candidate { node: 0, rows, depth: 0, split: root_split }];
    let mut leaves = 1;
    while leaves < max_leaves {
        let pick = open
            .iter()
            .enumerate()
            .filter(|(_, c)| c.split.is_some() && c.depth < max_depth)
            .max_by(|a, b| {
                let (ga, gb) = (a.1.split.unwrap().2, b.1.split.unwrap().2);
                // on equal gain the earlier leaf wins
                ga.total_cmp(&gb).then(b.0.cmp(&a.0))
            })
            .map(|(i, _)| i);
        let Some(i) = pick else { break };
        let c = open.swap_remove(i);
        let (f, b, _) = c.split.unwrap();
        let threshold = binner.cut(f, b);
        let (l, r): (Vec<usize>, Vec<usize>) = c.rows.iter().partition(|&&row| binned[row][f] as usize <= b);
        let (li, ri) = (tree.nodes.len(), tree.nodes.len() + 1);
        tree.nodes[c.node] = Node::Split { feature: f, threshold, left: li, right: ri };
        tree.nodes.push(Node::Leaf { value: 0.0 });
        tree.nodes.push(Node::Leaf { value: 0.0 });
        for (node, part) in [(li, l), (ri, r)] {
            let split = hist_split(binned, binner, target, &part, min_leaf);
            open.push(Candidate { node, rows: part, depth: c.depth + 1, split });
        }
        leaves += 1;
    }
    for c in open {
        tree.nodes[c.node] = Node::Leaf { value: leaf_value(&c.rows) };
    }
    tree
}

fn hist_split(
    binned: &[Vec<u16>],
    binner: &Binner,
    target: &[f64],
    rows: &[usize],
    min_leaf: usize,
) -> Option<(usize, usize, f64)> {
    let n = rows.len();
    if n < 2 * min_leaf.max(1) {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| target[i]).sum();
    let parent = total * total / n as f64;
    let d = binned.first().map_or(0, Vec::len);
    let mut best: Option<(usize, usize, f64)> = None;
    for f in 0..d {
        let nb = binner.n_bins(f);
        if nb < 2 {
            continue;
        }
        let mut sum = vec![0.0; nb];
        let mut cnt = vec![0usize; nb];
        for &i in rows {
            let b = binned[i][f] as usize;
            sum[b] += target[i];
            cnt[b] += 1;
        }
        let (mut ls, mut lc) = (0.0, 0usize);
        for b in 0..nb - 1 {
            ls += sum[b];
            lc += cnt[b];
            if cnt[b] == 0 || lc < min_leaf || n - lc < min_leaf {
                continue;
            }
            let rs = total - ls;
            let gain = ls * ls / lc as f64 + rs * rs / (n - lc) as f64 - parent;
            if gain > best.map_or(1e-12, |s| s.2) {
                best = Some((f, b, gain));
            }
        }
    }
    best
}
