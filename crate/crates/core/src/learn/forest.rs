//! Random forest of Gini-impurity classification trees on bootstrap
//! samples. Trees are grown in parallel, each from its own seed stream,
//! so the forest does not depend on the thread count.

use nalgebra::DMatrix;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub n_trees: usize,
    /// Features tried per node; `None` means `ceil(sqrt(m))`.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub bootstrap: bool,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 500,
            mtry: None,
            max_depth: None,
            min_leaf: 1,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        fraction: f64,
    },
}

/// Nodes in an arena; index 0 is the root. Rows with `x[feature] <=
/// threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn leaf_fraction(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { fraction } => return *fraction,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match &t.nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(t, *left).max(go(t, *right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfModel {
    pub trees: Vec<Tree>,
    pub n_trees: usize,
    pub mtry: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl RfModel {
    /// Mean leaf positive-fraction across trees.
    pub fn score(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.leaf_fraction(x)).sum::<f64>() / self.trees.len() as f64
    }
}

fn gini(pos: f64, total: f64) -> f64 {
    if total <= 0.0 {
        return 0.0;
    }
    let p = pos / total;
    2.0 * p * (1.0 - p)
}

struct Grower<'a> {
    x: &'a DMatrix<f64>,
    y: &'a [bool],
    mtry: usize,
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
    split_at: usize,
}

impl Grower<'_> {
    fn best_split_on(&self, rows: &mut [usize], feature: usize) -> Option<BestSplit> {
        let x = self.x;
        rows.sort_by(|&a, &b| x[(a, feature)].total_cmp(&x[(b, feature)]).then(a.cmp(&b)));
        let n = rows.len();
        let total_pos = rows.iter().filter(|&&r| self.y[r]).count() as f64;
        let mut left_pos = 0.0;
        let mut best: Option<BestSplit> = None;
        for k in 1..n {
            left_pos += f64::from(u8::from(self.y[rows[k - 1]]));
            let (lo, hi) = (x[(rows[k - 1], feature)], x[(rows[k], feature)]);
            if lo == hi || k < self.min_leaf || n - k < self.min_leaf {
                continue;
            }
            let (nl, nr) = (k as f64, (n - k) as f64);
            let impurity = (nl * gini(left_pos, nl) + nr * gini(total_pos - left_pos, nr)) / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity - 1e-15) {
                let mut threshold = lo + (hi - lo) / 2.0;
                if threshold >= hi {
                    threshold = lo;
                }
                best = Some(BestSplit {
                    feature,
                    threshold,
                    impurity,
                    split_at: k,
                });
            }
        }
        best
    }

    fn grow(&mut self, rows: &mut [usize], depth: usize, rng: &mut Rng) -> usize {
        let n = rows.len();
        let pos = rows.iter().filter(|&&r| self.y[r]).count();
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf {
            fraction: pos as f64 / n as f64,
        });
        if pos == 0 || pos == n || depth >= self.max_depth || n < 2 * self.min_leaf {
            return id;
        }
        let parent = gini(pos as f64, n as f64);
        let m = self.x.ncols();
        let mut features: Vec<usize> = (0..m).collect();
        features.shuffle(rng);
        let mut best: Option<BestSplit> = None;
        let mut tried = 0;
        // keep drawing past mtry only while every tried feature is constant
        for &f in &features {
            if tried >= self.mtry && best.is_some() {
                break;
            }
            tried += 1;
            if let Some(s) = self.best_split_on(rows, f) {
                if best.as_ref().is_none_or(|b| s.impurity < b.impurity - 1e-15) {
                    best = Some(s);
                }
            }
        }
        let Some(split) = best else { return id };
        if split.impurity >= parent {
            return id;
        }
        let x = self.x;
        rows.sort_by(|&a, &b| x[(a, split.feature)].total_cmp(&x[(b, split.feature)]).then(a.cmp(&b)));
        let (left_rows, right_rows) = rows.split_at_mut(split.split_at);
        let left = self.grow(left_rows, depth + 1, rng);
        let right = self.grow(right_rows, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        id
    }
}

/// Grows one tree on the given row multiset.
pub fn fit_tree(x: &DMatrix<f64>, y: &[bool], rows: &mut [usize], mtry: usize, max_depth: Option<usize>, min_leaf: usize, rng: &mut Rng) -> Tree {
    let mut g = Grower {
        x,
        y,
        mtry: mtry.max(1),
        max_depth: max_depth.unwrap_or(usize::MAX),
        min_leaf: min_leaf.max(1),
        nodes: Vec::new(),
    };
    g.grow(rows, 0, rng);
    Tree { nodes: g.nodes }
}

pub fn fit_random_forest(
    x: &DMatrix<f64>,
    y: &[bool],
    sample_weights: Option<&[f64]>,
    config: &ForestConfig,
    seed_value: u64,
) -> Result<RfModel> {
    let (n, m) = x.shape();
    if y.len() != n {
        return Err(Error::Shape(format!("{n} rows but {} labels", y.len())));
    }
    let pos = y.iter().filter(|v| **v).count();
    if pos == 0 || pos == n {
        return Err(Error::DegenerateLabels(format!("{pos} of {n} rows positive")));
    }
    if config.n_trees == 0 {
        return Err(Error::Parameter("forest needs at least one tree".into()));
    }
    let mtry = config.mtry.unwrap_or_else(|| (m as f64).sqrt().ceil() as usize).clamp(1, m.max(1));
    let sampler = match sample_weights {
        Some(w) => Some(WeightedIndex::new(w).map_err(|e| Error::Parameter(format!("sample weights: {e}")))?),
        None => None,
    };
    let trees = (0..config.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng_for(seed_value, &format!("tree/{t}"));
            let mut rows: Vec<usize> = if config.bootstrap {
                match &sampler {
                    Some(s) => (0..n).map(|_| s.sample(&mut rng)).collect(),
                    None => (0..n).map(|_| rng.random_range(0..n)).collect(),
                }
            } else {
                (0..n).collect()
            };
            fit_tree(x, y, &mut rows, mtry, config.max_depth, config.min_leaf, &mut rng)
        })
        .collect();
    Ok(RfModel {
        trees,
        n_trees: config.n_trees,
        mtry,
        max_depth: config.max_depth,
        min_leaf: config.min_leaf,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows_of(x: &DMatrix<f64>) -> Vec<Vec<f64>> {
        (0..x.nrows()).map(|i| x.row(i).iter().copied().collect()).collect()
    }

    #[test]
    fn memorizes_distinct_points() {
        let x = DMatrix::from_fn(40, 3, |i, j| ((i * 31 + j * 17) % 23) as f64 + i as f64 * 0.01);
        let y: Vec<bool> = (0..40).map(|i| (i * 7) % 3 == 0).collect();
        let cfg = ForestConfig { n_trees: 60, ..Default::default() };
        let f = fit_random_forest(&x, &y, None, &cfg, 4).unwrap();
        for (r, &label) in rows_of(&x).iter().zip(&y) {
            assert_eq!(f.score(r) > 0.5, label);
        }
    }

    /// Enumerates every midpoint threshold on 1-D data and returns the set of
    /// thresholds minimizing weighted child Gini.
    fn gini_oracle(xs: &[f64], ys: &[bool]) -> Vec<f64> {
        let mut sorted: Vec<f64> = xs.to_vec();
        sorted.sort_by(f64::total_cmp);
        sorted.dedup();
        let mut best = (f64::INFINITY, Vec::new());
        for w in sorted.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut l, mut lp, mut r, mut rp) = (0.0, 0.0, 0.0, 0.0);
            for (x, y) in xs.iter().zip(ys) {
                if *x <= t {
                    l += 1.0;
                    lp += f64::from(u8::from(*y));
                } else {
                    r += 1.0;
                    rp += f64::from(u8::from(*y));
                }
            }
            let imp = l * gini(lp, l) + r * gini(rp, r);
            if imp < best.0 - 1e-12 {
                best = (imp, vec![t]);
            } else if (imp - best.0).abs() <= 1e-12 {
                best.1.push(t);
            }
        }
        best.1
    }

    #[test]
    fn single_split_between_classes() {
        let xs = [0.5, 1.0, 1.7, 2.2, 4.0, 4.5, 6.0];
        let ys = [false, false, false, false, true, true, true];
        let x = DMatrix::from_column_slice(7, 1, &xs);
        let cfg = ForestConfig {
            n_trees: 1,
            max_depth: Some(1),
            bootstrap: false,
            ..Default::default()
        };
        let f = fit_random_forest(&x, &ys, None, &cfg, 0).unwrap();
        let Node::Split { threshold, .. } = f.trees[0].nodes[0] else { panic!("no split") };
        assert!(threshold > 2.2 && threshold < 4.0);
        assert_eq!(gini_oracle(&xs, &ys), vec![threshold]);
        // with bootstrap the split still separates the class extremes
        let f = fit_random_forest(&x, &ys, None, &ForestConfig { n_trees: 1, max_depth: Some(1), ..Default::default() }, 9).unwrap();
        if let Node::Split { threshold, .. } = f.trees[0].nodes[0] {
            assert!(threshold >= 2.2 && threshold < 4.0);
        }
    }

    #[test]
    fn seeded_and_bounded() {
        let x = DMatrix::from_fn(30, 4, |i, j| ((i * 13 + j * 5) % 17) as f64);
        let y: Vec<bool> = (0..30).map(|i| i % 3 == 0).collect();
        let cfg = ForestConfig { n_trees: 20, max_depth: Some(3), ..Default::default() };
        let a = fit_random_forest(&x, &y, None, &cfg, 12).unwrap();
        let b = fit_random_forest(&x, &y, None, &cfg, 12).unwrap();
        assert_eq!(a, b);
        assert!(a.trees.iter().all(|t| t.depth() <= 3));
        for r in rows_of(&x) {
            let s = a.score(&r);
            assert!((0.0..=1.0).contains(&s));
        }
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| fit_random_forest(&x, &y, None, &cfg, 12).unwrap());
        assert_eq!(a, c);
    }

    #[test]
    fn degenerate_labels() {
        let x = DMatrix::zeros(3, 1);
        assert!(matches!(
            fit_random_forest(&x, &[false; 3], None, &ForestConfig::default(), 0),
            Err(Error::DegenerateLabels(_))
        ));
    }
}
