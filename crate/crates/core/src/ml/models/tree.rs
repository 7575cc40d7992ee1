//! CART trees shared by DTC, RF and boosting.

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::ml::Matrix;
use crate::rng::StreamRng;

/// `feature < 0` marks a leaf. Rows with `x[feature] <= threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: i64,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    pub leaf_value: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(&self, row: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            let n = &self.nodes[i];
            if n.feature < 0 {
                return &n.leaf_value;
            }
            i = if row[n.feature as usize] <= n.threshold {
                n.left
            } else {
                n.right
            };
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.feature < 0 {
                0
            } else {
                1 + go(t, n.left).max(go(t, n.right))
            }
        }
        go(self, 0)
    }
}

/// Split point between two sorted distinct values, kept strictly below `b`.
pub(crate) fn midpoint(a: f64, b: f64) -> f64 {
    let m = a + (b - a) / 2.0;
    if m < b {
        m
    } else {
        a
    }
}

/// Candidate features for one node: all, or a seeded sample without replacement.
/// Candidate features for one node: all, or a seeded sample without replacement.
pub(crate) fn candidate_features(d: usize, max_features: Option<usize>, rng: &mut Option<&mut StreamRng>) -> Vec<usize> {
    match (max_features, rng) {
        (Some(m), Some(r)) if m < d => {
            let mut f = sample(*r, d, m).into_vec();
            f.sort_unstable();
            f
        }
        _ => (0..d).collect(),
    }
}

/// Row indices sorted by each feature (ties by index), computed once per fit.
#[derive(Debug, Clone)]
pub(crate) struct Presorted {
    pub order: Vec<Vec<usize>>,
}

impl Presorted {
    pub fn new(x: &Matrix) -> Self {
        let order = (0..x.n_cols())
            .map(|f| {
                let mut idx: Vec<usize> = (0..x.n_rows()).collect();
                idx.sort_by(|&a, &b| x.get(a, f).total_cmp(&x.get(b, f)).then(a.cmp(&b)));
                idx
            })
            .collect();
        Self { order }
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct CartParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    pub max_features: Option<usize>,
}

fn gini(counts: &[f64], n: f64) -> f64 {
    1.0 - counts.iter().map(|c| (c / n) * (c / n)).sum::<f64>()
}

pub(crate) const NONE: usize = usize::MAX;

/// Node statistics a level-wise builder needs to score candidate splits.
pub(crate) trait SplitCriterion {
    type Stats: Clone;
    fn empty(&self) -> Self::Stats;
    fn add(&self, s: &mut Self::Stats, row: usize);
    /// Score of splitting `parent` into `left` and the rest; higher is better.
    fn gain(&self, parent: &Self::Stats, left: &Self::Stats) -> f64;
    fn can_split(&self, s: &Self::Stats) -> bool;
    fn child_ok(&self, parent: &Self::Stats, left: &Self::Stats) -> bool;
    fn leaf_value(&self, s: &Self::Stats) -> Vec<f64>;
    /// Importance credited to a split with this gain.
    fn credit(&self, parent: &Self::Stats, gain: f64) -> f64;
}

struct Frontier<S> {
    node: usize,
    stats: S,
    features: Vec<usize>,
}

/// Grow a tree level by level. Rows with zero `weight` are absent; a
/// weight above one counts a row several times, as in a bootstrap sample.
pub(crate) fn grow_levelwise<C: SplitCriterion>(
    x: &Matrix,
    sorted: &Presorted,
    weight: &[u32],
    crit: &C,
    max_depth: usize,
    max_features: Option<usize>,
    mut rng: Option<&mut StreamRng>,
    importance: &mut [f64],
) -> Tree {
    let (n, d) = (x.n_rows(), x.n_cols());
    let mut node_of = vec![NONE; n];
    let mut root = crit.empty();
    for i in 0..n {
        if weight[i] > 0 {
            node_of[i] = 0;
            for _ in 0..weight[i] {
                crit.add(&mut root, i);
            }
        }
    }
    let mut nodes = vec![placeholder()];
    let mut frontier = vec![Frontier {
        node: 0,
        stats: root,
        features: candidate_features(d, max_features, &mut rng),
    }];
    let mut depth = 0;
    let mut local = vec![NONE; 1];
    while !frontier.is_empty() {
        // frontier slot of each tree node, NONE when not splittable
        local.resize(nodes.len(), NONE);
        local.iter_mut().for_each(|v| *v = NONE);
        let mut allowed = vec![false; frontier.len() * d];
        for (li, fr) in frontier.iter().enumerate() {
            if depth < max_depth && crit.can_split(&fr.stats) {
                local[fr.node] = li;
                for &f in &fr.features {
                    allowed[li * d + f] = true;
                }
            }
        }
        let mut best: Vec<Option<(f64, usize, f64)>> = vec![None; frontier.len()];
        let mut left: Vec<C::Stats> = vec![crit.empty(); frontier.len()];
        let mut prev: Vec<f64> = vec![f64::NAN; frontier.len()];
        for f in 0..d {
            if !frontier.iter().enumerate().any(|(li, _)| allowed[li * d + f]) {
                continue;
            }
            for (li, l) in left.iter_mut().enumerate() {
                if allowed[li * d + f] {
                    *l = crit.empty();
                    prev[li] = f64::NAN;
                }
            }
            for &i in &sorted.order[f] {
                let nd = node_of[i];
                if nd == NONE || local[nd] == NONE {
                    continue;
                }
                let li = local[nd];
                if !allowed[li * d + f] {
                    continue;
                }
                let v = x.get(i, f);
                if prev[li] < v && crit.child_ok(&frontier[li].stats, &left[li]) {
                    let g = crit.gain(&frontier[li].stats, &left[li]);
                    if best[li].map_or(true, |(bg, _, _)| g > bg) {
                        best[li] = Some((g, f, midpoint(prev[li], v)));
                    }
                }
                for _ in 0..weight[i] {
                    crit.add(&mut left[li], i);
                }
                prev[li] = v;
            }
        }
        let mut next = Vec::new();
        let mut split_of: Vec<Option<(usize, f64, usize, usize)>> = vec![None; nodes.len()];
        for (li, fr) in frontier.into_iter().enumerate() {
            let leaf_value = crit.leaf_value(&fr.stats);
            match best[li] {
                Some((g, f, thr)) if g > 1e-12 => {
                    importance[f] += crit.credit(&fr.stats, g);
                    let li_node = nodes.len();
                    nodes.push(placeholder());
                    let ri_node = nodes.len();
                    nodes.push(placeholder());
                    nodes[fr.node] = TreeNode {
                        feature: f as i64,
                        threshold: thr,
                        left: li_node,
                        right: ri_node,
                        leaf_value,
                    };
                    split_of[fr.node] = Some((f, thr, li_node, ri_node));
                }
                _ => {
                    nodes[fr.node] = TreeNode {
                        feature: -1,
                        threshold: 0.0,
                        left: 0,
                        right: 0,
                        leaf_value,
                    };
                }
            }
        }
        let mut child_stats: Vec<Option<C::Stats>> = vec![None; nodes.len()];
        for i in 0..n {
            let nd = node_of[i];
            if nd == NONE {
                continue;
            }
            match split_of[nd] {
                Some((f, thr, l, r)) => {
                    let c = if x.get(i, f) <= thr { l } else { r };
                    node_of[i] = c;
                    let s = child_stats[c].get_or_insert_with(|| crit.empty());
                    for _ in 0..weight[i] {
                        crit.add(s, i);
                    }
                }
                None => node_of[i] = NONE,
            }
        }
        for (c, s) in child_stats.into_iter().enumerate() {
            if let Some(stats) = s {
                next.push(Frontier {
                    node: c,
                    stats,
                    features: candidate_features(d, max_features, &mut rng),
                });
            }
        }
        frontier = next;
        depth += 1;
    }
    Tree { nodes }
}

/// Gini impurity on class counts.
pub(crate) struct Gini<'a> {
    pub y: &'a [usize],
    pub n_classes: usize,
    pub min_leaf: usize,
    pub total: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct ClassCounts {
    counts: Vec<f64>,
    n: f64,
}

impl SplitCriterion for Gini<'_> {
    type Stats = ClassCounts;

    fn empty(&self) -> ClassCounts {
        ClassCounts {
            counts: vec![0.0; self.n_classes],
            n: 0.0,
        }
    }

    fn add(&self, s: &mut ClassCounts, row: usize) {
        s.counts[self.y[row]] += 1.0;
        s.n += 1.0;
    }

    fn gain(&self, p: &ClassCounts, l: &ClassCounts) -> f64 {
        let r: Vec<f64> = p.counts.iter().zip(&l.counts).map(|(a, b)| a - b).collect();
        let nr = p.n - l.n;
        let w = (l.n * gini(&l.counts, l.n) + nr * gini(&r, nr)) / p.n;
        gini(&p.counts, p.n) - w
    }

    fn can_split(&self, s: &ClassCounts) -> bool {
        s.n >= 2.0 * self.min_leaf as f64 && gini(&s.counts, s.n) > 0.0
    }

    fn child_ok(&self, p: &ClassCounts, l: &ClassCounts) -> bool {
        l.n >= self.min_leaf as f64 && p.n - l.n >= self.min_leaf as f64
    }

    fn leaf_value(&self, s: &ClassCounts) -> Vec<f64> {
        s.counts.iter().map(|c| c / s.n).collect()
    }

    fn credit(&self, p: &ClassCounts, gain: f64) -> f64 {
        p.n / self.total * gain
    }
}

/// Grow a Gini classification tree. `weight[i]` is how often row `i` is in
/// the sample. Weighted impurity decrease is added to `importance`.
pub(crate) fn grow_classifier(
    x: &Matrix,
    sorted: &Presorted,
    y: &[usize],
    n_classes: usize,
    weight: &[u32],
    params: CartParams,
    rng: Option<&mut StreamRng>,
    importance: &mut [f64],
) -> Tree {
    let total: f64 = weight.iter().map(|&w| f64::from(w)).sum();
    let crit = Gini {
        y,
        n_classes,
        min_leaf: params.min_leaf.max(1),
        total,
    };
    grow_levelwise(x, sorted, weight, &crit, params.max_depth, params.max_features, rng, importance)
}

pub(crate) fn placeholder() -> TreeNode {
    TreeNode {
        feature: -1,
        threshold: 0.0,
        left: 0,
        right: 0,
        leaf_value: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stump_on_threshold_data() {
        let x = Matrix::from_rows(&(0..10).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<usize> = (0..10).map(|i| usize::from(i >= 6)).collect();
        let mut imp = vec![0.0];
        let params = CartParams {
            max_depth: 5,
            min_leaf: 1,
            max_features: None,
        };
        let t = grow_classifier(&x, &Presorted::new(&x), &y, 2, &[1; 10], params, None, &mut imp);
        assert_eq!(t.nodes.len(), 3);
        assert_eq!(t.nodes[0].threshold, 5.5);
        assert_eq!(t.depth(), 1);
        assert!((imp[0] - 0.48).abs() < 1e-12);
        assert_eq!(t.leaf(&[2.0]), &[1.0, 0.0]);
        assert_eq!(t.leaf(&[7.0]), &[0.0, 1.0]);
    }

    #[test]
    fn min_leaf_respected() {
        let x = Matrix::from_rows(&(0..10).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap();
        let y: Vec<usize> = (0..10).map(|i| usize::from(i == 0)).collect();
        let params = CartParams {
            max_depth: 5,
            min_leaf: 3,
            max_features: None,
        };
        let t = grow_classifier(&x, &Presorted::new(&x), &y, 2, &[1; 10], params, None, &mut [0.0]);
        for n in &t.nodes {
            if n.feature >= 0 {
                assert!(n.threshold >= 2.0);
            }
        }
    }

    #[test]
    fn midpoint_stays_below_upper() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        assert!(midpoint(a, b) < b);
        assert_eq!(midpoint(1.0, 2.0), 1.5);
    }
}
