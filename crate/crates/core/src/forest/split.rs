//! Gini split search.
//!
//! Split quality is compared exactly. Minimizing the weighted child Gini
//! impurity is the same as maximizing `S_L / n_L + S_R / n_R`, where `S` is
//! the sum of squared class counts of a child; that fraction is compared by
//! cross-multiplication in `u128`, so equal-quality candidates really tie
//! and the tie-break (lower feature, then lower threshold) is exact.

use std::cmp::Ordering;

use crate::dataset::LabeledDataset;

/// Gini impurity `1 - sum p_c^2` of a class-count vector. 0 for no rows.
pub fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
}

/// Midpoint between two consecutive distinct sorted values, guaranteed to
/// satisfy `lo <= mid < hi` so that `x <= mid` separates them.
pub fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo + (hi - lo) / 2.0;
    if mid < hi {
        mid
    } else {
        lo
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    /// Rows with `x[feature] <= threshold` go left.
    pub threshold: f64,
    /// Parent Gini minus weighted child Gini.
    pub gini_gain: f64,
}

/// `S_L * n_R + S_R * n_L` over `n_L * n_R`: the split score as an exact
/// fraction. Larger is better.
#[derive(Debug, Clone, Copy)]
struct Score {
    num: u128,
    den: u128,
}

impl Score {
    fn new(sq_left: u128, n_left: u128, sq_right: u128, n_right: u128) -> Score {
        Score {
            num: sq_left * n_right + sq_right * n_left,
            den: n_left * n_right,
        }
    }

    fn cmp(&self, other: &Score) -> Ordering {
        (self.num * other.den).cmp(&(other.num * self.den))
    }

    /// Weighted child Gini `1 - score / n`.
    fn weighted_gini(&self, n: usize) -> f64 {
        1.0 - (self.num as f64 / self.den as f64) / n as f64
    }
}

fn sum_sq(counts: &[usize]) -> u128 {
    counts.iter().map(|&c| (c as u128) * (c as u128)).sum()
}

/// Best Gini split of `rows` (indices into `ds`, duplicates allowed) over
/// the candidate `features`, or `None` when the node is pure or no
/// candidate threshold leaves at least `min_leaf` rows on each side.
pub fn best_split(
    ds: &LabeledDataset,
    rows: &[usize],
    features: &[usize],
    min_leaf: usize,
) -> Option<Split> {
    let n_classes = ds.n_classes();
    let mut parent = vec![0usize; n_classes];
    for &r in rows {
        parent[ds.label(r)] += 1;
    }
    if parent.iter().filter(|&&c| c > 0).count() <= 1 {
        return None;
    }
    let n = rows.len();
    let min_leaf = min_leaf.max(1);

    let mut features = features.to_vec();
    features.sort_unstable();
    features.dedup();

    let mut best: Option<(Score, usize, f64)> = None;
    let mut column: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut left = vec![0usize; n_classes];
    for &f in &features {
        column.clear();
        column.extend(rows.iter().map(|&r| (ds.row(r)[f], ds.label(r))));
        column.sort_by(|a, b| a.0.total_cmp(&b.0));
        left.iter_mut().for_each(|c| *c = 0);
        for i in 0..n - 1 {
            left[column[i].1] += 1;
            let (lo, hi) = (column[i].0, column[i + 1].0);
            if lo == hi {
                continue;
            }
            let n_left = i + 1;
            let n_right = n - n_left;
            if n_left < min_leaf || n_right < min_leaf {
                continue;
            }
            let sq_left = sum_sq(&left);
            let sq_right: u128 = parent
                .iter()
                .zip(&left)
                .map(|(&p, &l)| ((p - l) as u128).pow(2))
                .sum();
            let score = Score::new(sq_left, n_left as u128, sq_right, n_right as u128);
            let better = match &best {
                None => true,
                Some((b, _, _)) => score.cmp(b) == Ordering::Greater,
            };
            if better {
                best = Some((score, f, midpoint(lo, hi)));
            }
        }
    }
    best.map(|(score, feature, threshold)| Split {
        feature,
        threshold,
        gini_gain: gini(&parent) - score.weighted_gini(n),
    })
}
