//! Random forest of Gini-split classification trees.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::SeedPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ForestParams {
    pub trees: usize,
    /// Features sampled at each split.
    pub mtry: usize,
    pub min_leaf: usize,
}

impl ForestParams {
    pub fn default_for(p: usize) -> Self {
        ForestParams {
            trees: 500,
            mtry: default_mtry(p),
            min_leaf: 1,
        }
    }
}

pub fn default_mtry(p: usize) -> usize {
    ((p as f64).sqrt().ceil() as usize).clamp(1, p.max(1))
}

/// Flat binary tree. `feature[k] < 0` marks a leaf whose `value` is the
/// fraction of positive training rows that reached it.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Tree {
    pub feature: Vec<i32>,
    pub threshold: Vec<f64>,
    pub left: Vec<u32>,
    pub right: Vec<u32>,
    pub value: Vec<f64>,
}

impl Tree {
    fn push_leaf(&mut self, value: f64) -> usize {
        self.feature.push(-1);
        self.threshold.push(0.0);
        self.left.push(0);
        self.right.push(0);
        self.value.push(value);
        self.feature.len() - 1
    }

    pub fn leaf_value(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        while self.feature[k] >= 0 {
            k = if row[self.feature[k] as usize] <= self.threshold[k] {
                self.left[k] as usize
            } else {
                self.right[k] as usize
            };
        }
        self.value[k]
    }

    /// Majority vote of the reached leaf; a split leaf casts half a vote.
    pub fn vote(&self, row: &[f64]) -> f64 {
        let v = self.leaf_value(row);
        if v > 0.5 {
            1.0
        } else if v == 0.5 {
            0.5
        } else {
            0.0
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.feature.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    /// Out-of-bag vote fraction per training row (NaN if never out of bag).
    pub oob_scores: Vec<f64>,
}

impl RandomForest {
    /// Fraction of trees voting injury.
    pub fn score_row(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.vote(row)).sum::<f64>() / self.trees.len() as f64
    }
}

struct Split {
    feature: usize,
    /// Rows with value rank at or below this go left.
    rank: u32,
    threshold: f64,
    impurity: f64,
}

fn gini_sum(pos: f64, n: f64) -> f64 {
    // n · gini
    if n == 0.0 {
        0.0
    } else {
        let p = pos / n;
        n * 2.0 * p * (1.0 - p)
    }
}

/// Training matrix recoded per feature as dense ranks of the distinct values,
/// so node-level sorting works on integers and large nodes can be scanned by
/// counting.
struct RankedColumns {
    ranks: Vec<Vec<u32>>,
    values: Vec<Vec<f64>>,
}

impl RankedColumns {
    fn new(x: &Array2<f64>) -> Self {
        let (ranks, values) = x
            .columns()
            .into_iter()
            .map(|col| {
                let mut values: Vec<f64> = col.to_vec();
                values.sort_unstable_by(f64::total_cmp);
                values.dedup();
                let ranks = col
                    .iter()
                    .map(|v| values.partition_point(|u| u.total_cmp(v).is_lt()) as u32)
                    .collect();
                (ranks, values)
            })
            .unzip();
        RankedColumns { ranks, values }
    }
}

struct Grower<'a> {
    cols: RankedColumns,
    y: &'a [u8],
    params: ForestParams,
    keys: Vec<u64>,
    hist: Vec<(u32, u32)>,
    /// Distinct ranks present in the node with their row and positive counts.
    runs: Vec<(u32, u32, u32)>,
}

impl Grower<'_> {
    fn node_runs(&mut self, rows: &[usize], f: usize) {
        let ranks = &self.cols.ranks[f];
        let distinct = self.cols.values[f].len();
        let n = rows.len();
        self.runs.clear();
        if n * (usize::BITS - n.leading_zeros()) as usize > 2 * distinct {
            self.hist.clear();
            self.hist.resize(distinct, (0, 0));
            for &i in rows {
                let h = &mut self.hist[ranks[i] as usize];
                h.0 += 1;
                h.1 += u32::from(self.y[i]);
            }
            self.runs.extend(
                self.hist
                    .iter()
                    .enumerate()
                    .filter(|(_, h)| h.0 > 0)
                    .map(|(r, h)| (r as u32, h.0, h.1)),
            );
        } else {
            self.keys.clear();
            self.keys
                .extend(rows.iter().map(|&i| (u64::from(ranks[i]) << 1) | u64::from(self.y[i])));
            self.keys.sort_unstable();
            for &k in &self.keys {
                let r = (k >> 1) as u32;
                let pos = (k & 1) as u32;
                match self.runs.last_mut() {
                    Some(last) if last.0 == r => {
                        last.1 += 1;
                        last.2 += pos;
                    }
                    _ => self.runs.push((r, 1, pos)),
                }
            }
        }
    }

    fn best_split<R: Rng>(&mut self, rows: &[usize], rng: &mut R) -> Option<Split> {
        let n = rows.len();
        let total_pos = rows.iter().filter(|&&i| self.y[i] == 1).count() as f64;
        let parent = gini_sum(total_pos, n as f64);
        let p = self.cols.ranks.len();
        let mut best: Option<Split> = None;
        for f in sample(rng, p, self.params.mtry.min(p)) {
            self.node_runs(rows, f);
            let mut nl = 0usize;
            let mut left_pos = 0.0;
            for w in self.runs.windows(2) {
                let (r, cnt, pos) = w[0];
                nl += cnt as usize;
                left_pos += f64::from(pos);
                if nl < self.params.min_leaf || n - nl < self.params.min_leaf {
                    continue;
                }
                let imp = gini_sum(left_pos, nl as f64) + gini_sum(total_pos - left_pos, (n - nl) as f64);
                if imp < parent - 1e-12 && best.as_ref().is_none_or(|b| imp < b.impurity) {
                    let values = &self.cols.values[f];
                    let (lo, hi) = (values[r as usize], values[w[1].0 as usize]);
                    let mid = lo + (hi - lo) / 2.0;
                    best = Some(Split {
                        feature: f,
                        rank: r,
                        threshold: if mid < hi { mid } else { lo },
                        impurity: imp,
                    });
                }
            }
        }
        best
    }

    fn grow<R: Rng>(&mut self, mut rows: Vec<usize>, rng: &mut R) -> Tree {
        let mut tree = Tree::default();
        // (node slot, lo, hi) over `rows`
        let mut stack: Vec<(Option<(usize, bool)>, usize, usize)> = vec![(None, 0, rows.len())];
        while let Some((parent, lo, hi)) = stack.pop() {
            let slice = &rows[lo..hi];
            let n = slice.len();
            let pos = slice.iter().filter(|&&i| self.y[i] == 1).count();
            let value = pos as f64 / n as f64;
            let split = if pos == 0 || pos == n || n < 2 * self.params.min_leaf {
                None
            } else {
                self.best_split(slice, rng)
            };
            let node = tree.push_leaf(value);
            if let Some((p, is_left)) = parent {
                if is_left {
                    tree.left[p] = node as u32;
                } else {
                    tree.right[p] = node as u32;
                }
            }
            if let Some(s) = split {
                tree.feature[node] = s.feature as i32;
                tree.threshold[node] = s.threshold;
                let part = &mut rows[lo..hi];
                let ranks = &self.cols.ranks[s.feature];
                let mut mid = 0;
                for k in 0..part.len() {
                    if ranks[part[k]] <= s.rank {
                        part.swap(k, mid);
                        mid += 1;
                    }
                }
                stack.push((Some((node, false)), lo + mid, hi));
                stack.push((Some((node, true)), lo, lo + mid));
            }
        }
        tree
    }
}

pub fn fit_random_forest(
    x: &Array2<f64>,
    y: &[u8],
    params: ForestParams,
    seed: SeedPath,
) -> Result<RandomForest> {
    let n = y.len();
    if x.nrows() != n || n == 0 {
        return Err(Error::InvalidInput("forest needs matching, nonempty inputs".into()));
    }
    if params.trees == 0 || params.mtry == 0 || params.min_leaf == 0 {
        return Err(Error::Config(format!("invalid forest parameters {params:?}")));
    }
    let mut grower = Grower {
        cols: RankedColumns::new(x),
        y,
        params,
        keys: Vec::with_capacity(n),
        hist: Vec::new(),
        runs: Vec::new(),
    };
    let mut trees = Vec::with_capacity(params.trees);
    let mut oob_sum = vec![0.0; n];
    let mut oob_count = vec![0u32; n];
    let mut in_bag = vec![false; n];
    for t in 0..params.trees {
        let mut rng = seed.index(t as u64).rng();
        in_bag.iter_mut().for_each(|b| *b = false);
        let rows: Vec<usize> = (0..n)
            .map(|_| {
                let i = rng.random_range(0..n);
                in_bag[i] = true;
                i
            })
            .collect();
        let tree = grower.grow(rows, &mut rng);
        for i in (0..n).filter(|&i| !in_bag[i]) {
            oob_sum[i] += tree.vote(x.row(i).as_slice().expect("standard layout"));
            oob_count[i] += 1;
        }
        trees.push(tree);
    }
    let oob_scores = oob_sum
        .iter()
        .zip(&oob_count)
        .map(|(&s, &c)| if c == 0 { f64::NAN } else { s / f64::from(c) })
        .collect();
    Ok(RandomForest { trees, oob_scores })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step_fixture(n: usize, seed: u64) -> (Array2<f64>, Vec<u8>) {
        let mut rng = SeedPath::new(seed).rng();
        let x = Array2::from_shape_fn((n, 3), |_| rng.random::<f64>());
        let y = x.rows().into_iter().map(|r| u8::from(r[1] > 0.4)).collect();
        (x, y)
    }

    #[test]
    fn memorises_axis_aligned_rule() {
        let (x, y) = step_fixture(120, 1);
        let f = fit_random_forest(&x, &y, ForestParams { trees: 50, mtry: 2, min_leaf: 1 }, SeedPath::new(2))
            .unwrap();
        let correct = x
            .rows()
            .into_iter()
            .zip(&y)
            .filter(|(r, &l)| u8::from(f.score_row(r.as_slice().unwrap()) > 0.5) == l)
            .count();
        assert_eq!(correct, y.len());
    }

    #[test]
    fn same_seed_same_forest() {
        let (x, y) = step_fixture(60, 3);
        let p = ForestParams { trees: 10, mtry: 1, min_leaf: 2 };
        let a = fit_random_forest(&x, &y, p, SeedPath::new(5)).unwrap();
        let b = fit_random_forest(&x, &y, p, SeedPath::new(5)).unwrap();
        assert_eq!(a.trees, b.trees);
        assert_eq!(format!("{:?}", a.oob_scores), format!("{:?}", b.oob_scores));
        let c = fit_random_forest(&x, &y, p, SeedPath::new(6)).unwrap();
        assert_ne!(a.trees, c.trees);
    }

    #[test]
    fn min_leaf_is_respected() {
        let (x, y) = step_fixture(80, 4);
        let f = fit_random_forest(&x, &y, ForestParams { trees: 3, mtry: 3, min_leaf: 20 }, SeedPath::new(1))
            .unwrap();
        for t in &f.trees {
            // with 80 bootstrap rows and leaves of at least 20 rows
            let leaves = t.feature.iter().filter(|&&v| v < 0).count();
            assert!(leaves <= 4);
        }
    }

    #[test]
    fn default_mtry_is_ceil_sqrt() {
        assert_eq!(default_mtry(60), 8);
        assert_eq!(default_mtry(9), 3);
        assert_eq!(default_mtry(1), 1);
    }
}
