//! Exact-split binary trees shared by CART classification and the GBT
//! regression learners.
//!
//! Both criteria reduce to the same sufficient statistics per node:
//! `W = Σw`, `S = Σw·y`, `Q = Σw·y²`, with impurity mass `Q − S²/W`. For
//! 0/1 targets that is exactly half the weighted Gini impurity, so CART on
//! binary labels and variance reduction pick identical splits.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        /// Weighted impurity decrease achieved by this split.
        gain: f64,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    /// Index of the leaf `x` lands in; `x[feature] <= threshold` goes left.
    pub fn leaf_of(&self, x: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split { feature, threshold, left, right, .. } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn predict(&self, x: &[f64]) -> f64 {
        match self.nodes[self.leaf_of(x)] {
            Node::Leaf { value } => value,
            Node::Split { .. } => unreachable!("leaf_of returns leaves"),
        }
    }

    pub fn add_importance(&self, into: &mut [f64]) {
        for n in &self.nodes {
            if let Node::Split { feature, gain, .. } = n {
                into[*feature] += gain;
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub(crate) fn is_valid(&self, p: usize) -> bool {
        self.nodes.iter().all(|n| match n {
            Node::Leaf { value } => value.is_finite(),
            Node::Split { feature, threshold, left, right, gain } => {
                *feature < p && threshold.is_finite() && gain.is_finite() && *left < self.nodes.len() && *right < self.nodes.len()
            }
        })
    }
}

pub(crate) struct GrowParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Multiplier applied to recorded gains (2 turns the criterion into Gini).
    pub gain_scale: f64,
}

#[derive(Clone, Copy, Default)]
struct Stats {
    w: f64,
    s: f64,
    q: f64,
}

impl Stats {
    fn add(&mut self, w: f64, y: f64) {
        self.w += w;
        self.s += w * y;
        self.q += w * y * y;
    }

    fn minus(self, o: Stats) -> Stats {
        Stats { w: self.w - o.w, s: self.s - o.s, q: self.q - o.q }
    }

    fn impurity(self) -> f64 {
        if self.w <= 0.0 {
            0.0
        } else {
            (self.q - self.s * self.s / self.w).max(0.0)
        }
    }
}

struct Best {
    feature: usize,
    n_left: usize,
    threshold: f64,
    gain: f64,
}

/// Grow a tree on column-major `cols`; leaf values come from `leaf_value`
/// applied to each leaf's sample indices.
pub(crate) fn grow(
    cols: &[Vec<f64>],
    target: &[f64],
    weight: &[f64],
    params: &GrowParams,
    leaf_value: &dyn Fn(&[usize]) -> f64,
) -> Tree {
    let n = target.len();
    let sorted: Vec<Vec<usize>> = cols
        .iter()
        .map(|col| {
            let mut idx: Vec<usize> = (0..n).collect();
            idx.sort_by(|&a, &b| col[a].total_cmp(&col[b]).then(a.cmp(&b)));
            idx
        })
        .collect();
    let mut nodes = Vec::new();
    let all: Vec<usize> = (0..n).collect();
    grow_node(cols, target, weight, params, leaf_value, &all, sorted, 0, &mut nodes);
    Tree { nodes }
}

#[allow(clippy::too_many_arguments)]
fn grow_node(
    cols: &[Vec<f64>],
    target: &[f64],
    weight: &[f64],
    params: &GrowParams,
    leaf_value: &dyn Fn(&[usize]) -> f64,
    samples: &[usize],
    sorted: Vec<Vec<usize>>,
    depth: usize,
    nodes: &mut Vec<Node>,
) -> usize {
    let id = nodes.len();
    nodes.push(Node::Leaf { value: 0.0 });
    let best = if depth < params.max_depth && samples.len() >= 2 * params.min_leaf.max(1) {
        best_split(cols, target, weight, params.min_leaf.max(1), samples, &sorted)
    } else {
        None
    };
    let Some(best) = best else {
        nodes[id] = Node::Leaf { value: leaf_value(samples) };
        return id;
    };
    let mut goes_left = vec![false; target.len()];
    let left_samples: Vec<usize> = sorted[best.feature][..best.n_left].to_vec();
    for &i in &left_samples {
        goes_left[i] = true;
    }
    let (mut ls, mut rs) = (Vec::with_capacity(sorted.len()), Vec::with_capacity(sorted.len()));
    for list in sorted {
        let (l, r): (Vec<usize>, Vec<usize>) = list.into_iter().partition(|&i| goes_left[i]);
        ls.push(l);
        rs.push(r);
    }
    let right_samples: Vec<usize> = samples.iter().copied().filter(|&i| !goes_left[i]).collect();
    drop(goes_left);
    let left = grow_node(cols, target, weight, params, leaf_value, &left_samples, ls, depth + 1, nodes);
    let right = grow_node(cols, target, weight, params, leaf_value, &right_samples, rs, depth + 1, nodes);
    nodes[id] = Node::Split {
        feature: best.feature,
        threshold: best.threshold,
        left,
        right,
        gain: best.gain * params.gain_scale,
    };
    id
}

/// Best (feature, threshold) by impurity decrease. Ties keep the lowest
/// feature index, then the lowest threshold.
fn best_split(
    cols: &[Vec<f64>],
    target: &[f64],
    weight: &[f64],
    min_leaf: usize,
    samples: &[usize],
    sorted: &[Vec<usize>],
) -> Option<Best> {
    let mut total = Stats::default();
    for &i in samples {
        total.add(weight[i], target[i]);
    }
    let parent = total.impurity();
    if parent <= 0.0 {
        return None;
    }
    let tol = parent * 1e-12;
    let mut best: Option<Best> = None;
    for (f, list) in sorted.iter().enumerate() {
        let col = &cols[f];
        let mut left = Stats::default();
        for pos in 0..list.len() - 1 {
            let i = list[pos];
            left.add(weight[i], target[i]);
            let (a, b) = (col[i], col[list[pos + 1]]);
            if a == b {
                continue;
            }
            let n_left = pos + 1;
            if n_left < min_leaf || list.len() - n_left < min_leaf {
                continue;
            }
            let right = total.minus(left);
            if left.w <= 0.0 || right.w <= 0.0 {
                continue;
            }
            let gain = parent - left.impurity() - right.impurity();
            if gain > best.as_ref().map_or(tol, |b| b.gain + tol) {
                let mid = a + (b - a) / 2.0;
                let threshold = if mid < b { mid } else { a };
                best = Some(Best { feature: f, n_left, threshold, gain });
            }
        }
    }
    best
}
