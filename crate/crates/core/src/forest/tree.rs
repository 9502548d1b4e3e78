use rand::seq::index;

use super::split::best_split;
use super::TrainConfig;
use crate::dataset::LabeledDataset;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Class counts of the training rows (bootstrap duplicates included)
    /// that reached this leaf.
    Leaf { counts: Vec<u32> },
}

/// A CART classification tree stored as an arena; the root is node 0 and
/// children always have larger indices than their parent.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<Node>,
}

impl DecisionTree {
    pub(crate) fn from_nodes(nodes: Vec<Node>) -> Self {
        DecisionTree { nodes }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Class counts of the leaf `x` falls into.
    pub fn leaf_counts(&self, x: &[f64]) -> &[u32] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
                Node::Leaf { counts } => return counts,
            }
        }
    }

    /// Majority class of the leaf `x` falls into; ties go to the lower
    /// class index.
    pub fn predict(&self, x: &[f64]) -> usize {
        majority(self.leaf_counts(x))
    }
}

pub(crate) fn majority(counts: &[u32]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Grow one tree on the rows listed in `bootstrap` (duplicates allowed).
/// Each internal node considers a fresh random subset of `m_try` features
/// drawn from `tree_seed`'s stream; nodes are expanded depth-first, left
/// child first, so the draw order is fixed.
pub fn grow_tree(
    ds: &LabeledDataset,
    bootstrap: &[usize],
    cfg: &TrainConfig,
    tree_seed: u64,
) -> DecisionTree {
    assert!(!bootstrap.is_empty(), "cannot grow a tree on zero rows");
    let n_features = ds.n_features();
    let m_try = cfg.resolved_m_try(n_features);
    let min_leaf = cfg.min_leaf.max(1);
    let mut rng = seed::rng(tree_seed);
    let mut rows = bootstrap.to_vec();
    let mut nodes = vec![Node::Leaf { counts: Vec::new() }];
    // (node, start, end, depth)
    let mut stack = vec![(0usize, 0usize, rows.len(), 0usize)];

    while let Some((node, start, end, depth)) = stack.pop() {
        let slice = &mut rows[start..end];
        let mut counts = vec![0u32; ds.n_classes()];
        for &r in slice.iter() {
            counts[ds.label(r)] += 1;
        }
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = cfg.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_capped || slice.len() < 2 * min_leaf {
            nodes[node] = Node::Leaf { counts };
            continue;
        }
        let mut features = index::sample(&mut rng, n_features, m_try).into_vec();
        features.sort_unstable();
        let Some(split) = best_split(ds, slice, &features, min_leaf) else {
            nodes[node] = Node::Leaf { counts };
            continue;
        };

        // Partition in place: rows going left first, order otherwise kept.
        let mut goes_left: Vec<usize> = Vec::with_capacity(slice.len());
        let mut goes_right: Vec<usize> = Vec::with_capacity(slice.len());
        for &r in slice.iter() {
            if ds.row(r)[split.feature] <= split.threshold {
                goes_left.push(r);
            } else {
                goes_right.push(r);
            }
        }
        let mid = start + goes_left.len();
        slice[..goes_left.len()].copy_from_slice(&goes_left);
        slice[goes_left.len()..].copy_from_slice(&goes_right);

        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes.push(Node::Leaf { counts: Vec::new() });
        nodes[node] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        // Right pushed first so the left subtree is expanded first.
        stack.push((right, mid, end, depth + 1));
        stack.push((left, start, mid, depth + 1));
    }
    DecisionTree { nodes }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg_all_features() -> TrainConfig {
        TrainConfig {
            m_try: Some(2),
            ..TrainConfig::default()
        }
    }

    fn toy() -> LabeledDataset {
        // Class 1 iff x0 > 2 and x1 > 0.5.
        let pts = [
            (1.0, 0.0, 0),
            (1.5, 1.0, 0),
            (2.0, 0.2, 0),
            (3.0, 0.1, 0),
            (3.5, 0.9, 1),
            (4.0, 0.8, 1),
            (2.5, 0.7, 1),
            (0.5, 0.6, 0),
        ];
        let rows: Vec<Vec<f64>> = pts.iter().map(|p| vec![p.0, p.1]).collect();
        let labels = pts.iter().map(|p| p.2).collect();
        LabeledDataset::from_rows(&rows, labels, vec!["A".into(), "B".into()]).unwrap()
    }

    #[test]
    fn single_class_is_one_leaf() {
        let d = LabeledDataset::from_rows(
            &[vec![1.0], vec![2.0]],
            vec![1, 1],
            vec!["A".into(), "B".into()],
        )
        .unwrap();
        let t = grow_tree(&d, &[0, 1, 1], &TrainConfig::default(), 3);
        assert_eq!(t.nodes().len(), 1);
        assert_eq!(t.root(), &Node::Leaf { counts: vec![0, 3] });
    }

    #[test]
    fn fits_separable_training_set() {
        let d = toy();
        let all: Vec<usize> = (0..d.len()).collect();
        let t = grow_tree(&d, &all, &cfg_all_features(), 11);
        for i in 0..d.len() {
            assert_eq!(t.predict(d.row(i)), d.label(i));
        }
        for (i, n) in t.nodes().iter().enumerate() {
            if let Node::Split { left, right, .. } = n {
                assert!(*left > i && *right > i);
            }
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let d = toy();
        let rows = [0, 0, 1, 3, 4, 4, 6, 7];
        let cfg = TrainConfig {
            m_try: Some(1),
            ..TrainConfig::default()
        };
        assert_eq!(grow_tree(&d, &rows, &cfg, 5), grow_tree(&d, &rows, &cfg, 5));
    }

    #[test]
    fn max_depth_caps_growth() {
        let d = toy();
        let all: Vec<usize> = (0..d.len()).collect();
        let cfg = TrainConfig {
            max_depth: Some(1),
            ..cfg_all_features()
        };
        let t = grow_tree(&d, &all, &cfg, 1);
        assert!(t.depth() <= 1);
        let stump = TrainConfig {
            max_depth: Some(0),
            ..cfg_all_features()
        };
        assert_eq!(grow_tree(&d, &all, &stump, 1).nodes().len(), 1);
    }

    #[test]
    fn leaves_respect_min_leaf() {
        let d = toy();
        let all: Vec<usize> = (0..d.len()).collect();
        let cfg = TrainConfig {
            min_leaf: 3,
            ..cfg_all_features()
        };
        let t = grow_tree(&d, &all, &cfg, 1);
        for n in t.nodes() {
            if let Node::Leaf { counts } = n {
                assert!(counts.iter().sum::<u32>() >= 3);
            }
        }
    }

    #[test]
    fn majority_tie_goes_low() {
        assert_eq!(majority(&[2, 2]), 0);
        assert_eq!(majority(&[1, 3, 3]), 1);
    }
}
