use log::debug;
use serde::{Deserialize, Serialize};

use super::{mean_metric, LtrError, Query, Result, TrainConfig, TreeEnsemble};
use crate::features::NUM_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MartParams {
    pub trees: usize,
    pub shrinkage: f64,
    pub max_leaves: usize,
    pub min_leaf_size: usize,
    /// stop after this many trees without a validation improvement;
    /// written as 0 when early stopping is off
    #[serde(with = "patience_serde")]
    pub patience: Option<usize>,
}

mod patience_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(p: &Option<usize>, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u64(p.unwrap_or(0) as u64)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<usize>, D::Error> {
        let n = Option::<usize>::deserialize(d)?.unwrap_or(0);
        Ok((n > 0).then_some(n))
    }
}

impl Default for MartParams {
    fn default() -> Self {
        MartParams {
            trees: 100,
            shrinkage: 0.1,
            max_leaves: 7,
            min_leaf_size: 1,
            patience: Some(20),
        }
    }
}

impl MartParams {
    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(LtrError::Config("trees must be at least 1".into()));
        }
        if !(self.shrinkage > 0.0 && self.shrinkage <= 1.0) {
            return Err(LtrError::Config(format!(
                "shrinkage {} must lie in (0, 1]",
                self.shrinkage
            )));
        }
        if self.max_leaves < 2 {
            return Err(LtrError::Config("max_leaves must be at least 2".into()));
        }
        if self.min_leaf_size == 0 {
            return Err(LtrError::Config("min_leaf_size must be at least 1".into()));
        }
        if self.patience == Some(0) {
            return Err(LtrError::Config("patience must be at least 1".into()));
        }
        Ok(())
    }
}

/// `feature` is 1-based; rows with `value < threshold` go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict(&self, x: &[f64; NUM_FEATURES]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[feature - 1] < *threshold { *left } else { *right };
                }
            }
        }
    }

    pub fn leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }

    /// Structural validity: indices in range, children after their parent.
    pub(crate) fn check(&self) -> std::result::Result<(), String> {
        if self.nodes.is_empty() {
            return Err("no nodes".into());
        }
        for (i, n) in self.nodes.iter().enumerate() {
            match n {
                Node::Leaf { value } if !value.is_finite() => {
                    return Err(format!("node {i}: non-finite leaf value"))
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    if !(1..=NUM_FEATURES).contains(feature) {
                        return Err(format!("node {i}: feature {feature} out of range"));
                    }
                    if threshold.is_nan() {
                        return Err(format!("node {i}: NaN threshold"));
                    }
                    for c in [left, right] {
                        if *c <= i || *c >= self.nodes.len() {
                            return Err(format!("node {i}: child {c} out of range"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MartTrace {
    /// training mean squared error after each tree
    pub train_mse: Vec<f64>,
    pub valid_metric: Vec<f64>,
    /// number of trees kept
    pub kept: usize,
}

struct SplitChoice {
    gain: f64,
    feature: usize,
    threshold: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

fn best_split(
    rows: &[usize],
    x: &[[f64; NUM_FEATURES]],
    r: &[f64],
    min_leaf: usize,
) -> Option<SplitChoice> {
    let n = rows.len();
    if n < 2 * min_leaf {
        return None;
    }
    let total: f64 = rows.iter().map(|&i| r[i]).sum();
    let parent = total * total / n as f64;
    let mut best: Option<(f64, usize, f64, usize)> = None;
    let mut sorted = rows.to_vec();
    for f in 0..NUM_FEATURES {
        sorted.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
        let mut left_sum = 0.0;
        for i in 1..n {
            left_sum += r[sorted[i - 1]];
            let lo = x[sorted[i - 1]][f];
            let hi = x[sorted[i]][f];
            if i < min_leaf || n - i < min_leaf || lo >= hi {
                continue;
            }
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / i as f64 + right_sum * right_sum / (n - i) as f64 - parent;
            if gain > 0.0 && best.is_none_or(|b| gain > b.0) {
                let mut t = lo + (hi - lo) / 2.0;
                if t <= lo {
                    t = hi;
                }
                best = Some((gain, f, t, i));
            }
        }
    }
    let (gain, feature, threshold, _) = best?;
    let (left, right) = rows.iter().partition(|&&i| x[i][feature] < threshold);
    Some(SplitChoice {
        gain,
        feature,
        threshold,
        left,
        right,
    })
}

/// Least-squares regression tree grown best-first up to `max_leaves`.
pub(crate) fn fit_tree(
    x: &[[f64; NUM_FEATURES]],
    r: &[f64],
    max_leaves: usize,
    min_leaf: usize,
) -> RegressionTree {
    let mean = |rows: &[usize]| rows.iter().map(|&i| r[i]).sum::<f64>() / rows.len().max(1) as f64;
    let all: Vec<usize> = (0..x.len()).collect();
    let mut nodes = vec![Node::Leaf { value: mean(&all) }];
    // open leaves with their best split, if any
    let mut open: Vec<(usize, Option<SplitChoice>)> = vec![(0, best_split(&all, x, r, min_leaf))];
    let mut leaves = 1;
    while leaves < max_leaves {
        let pick = open
            .iter()
            .enumerate()
            .filter_map(|(k, (node, s))| s.as_ref().map(|s| (k, *node, s.gain)))
            .max_by(|a, b| a.2.total_cmp(&b.2).then(b.1.cmp(&a.1)));
        let Some((k, node, _)) = pick else { break };
        let (_, split) = open.swap_remove(k);
        let s = split.expect("picked a splittable leaf");
        let left = nodes.len();
        let right = left + 1;
        nodes.push(Node::Leaf { value: mean(&s.left) });
        nodes.push(Node::Leaf { value: mean(&s.right) });
        nodes[node] = Node::Split {
            feature: s.feature + 1,
            threshold: s.threshold,
            left,
            right,
        };
        open.push((left, best_split(&s.left, x, r, min_leaf)));
        open.push((right, best_split(&s.right, x, r, min_leaf)));
        leaves += 1;
    }
    RegressionTree { nodes }
}

pub fn train_mart(train: &[Query], valid: &[Query], cfg: &TrainConfig) -> Result<TreeEnsemble> {
    train_mart_traced(train, valid, cfg).map(|(m, _)| m)
}

pub fn train_mart_traced(
    train: &[Query],
    valid: &[Query],
    cfg: &TrainConfig,
) -> Result<(TreeEnsemble, MartTrace)> {
    let p = &cfg.mart;
    p.validate()?;
    let x: Vec<[f64; NUM_FEATURES]> = train.iter().flat_map(|q| q.features.iter().copied()).collect();
    if x.is_empty() {
        return Err(LtrError::EmptySet("training"));
    }
    let y: Vec<f64> = train.iter().flat_map(|q| q.labels.iter().map(|&l| l as f64)).collect();
    let mut pred = vec![0.0; x.len()];
    let mut valid_pred: Vec<Vec<f64>> = valid.iter().map(|q| vec![0.0; q.len()]).collect();

    let mut trees = Vec::new();
    let mut trace = MartTrace::default();
    let mut best_metric = f64::NEG_INFINITY;
    let mut best_len = 1;
    for stage in 0..p.trees {
        let residual: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let tree = fit_tree(&x, &residual, p.max_leaves, p.min_leaf_size);
        for (pv, xi) in pred.iter_mut().zip(&x) {
            *pv += p.shrinkage * tree.predict(xi);
        }
        let mse = y.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64;
        trace.train_mse.push(mse);

        let metric = if valid.is_empty() {
            -mse
        } else {
            for (q, vp) in valid.iter().zip(valid_pred.iter_mut()) {
                for (s, xi) in vp.iter_mut().zip(&q.features) {
                    *s += p.shrinkage * tree.predict(xi);
                }
            }
            mean_metric(valid, cfg.metric, cfg.relevance_cutoff, |i, _| valid_pred[i].clone())
        };
        trace.valid_metric.push(metric);
        trees.push(tree);
        if metric > best_metric {
            best_metric = metric;
            best_len = stage + 1;
        }
        debug!("tree {}: mse={mse:.5} valid {}={metric:.4}", stage + 1, cfg.metric);
        if let Some(patience) = p.patience {
            if stage + 1 - best_len >= patience {
                break;
            }
        }
    }
    if p.patience.is_some() {
        trees.truncate(best_len);
    }
    trace.kept = trees.len();
    Ok((
        TreeEnsemble {
            trees,
            shrinkage: p.shrinkage,
            seed: cfg.seed,
            hyperparameters: *p,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ltr::Learner;
    use proptest::prelude::*;

    fn row(vals: &[(usize, f64)]) -> [f64; NUM_FEATURES] {
        let mut x = [0.0; NUM_FEATURES];
        for &(f, v) in vals {
            x[f] = v;
        }
        x
    }

    fn query(topic: &str, rows: &[([f64; NUM_FEATURES], i64)]) -> Query {
        Query {
            topic_id: topic.into(),
            venue_ids: (0..rows.len()).map(|i| format!("v{i}")).collect(),
            labels: rows.iter().map(|r| r.1).collect(),
            features: rows.iter().map(|r| r.0).collect(),
        }
    }

    fn cfg(trees: usize, leaves: usize) -> TrainConfig {
        TrainConfig {
            learner: Learner::Mart,
            mart: MartParams {
                trees,
                max_leaves: leaves,
                patience: None,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn single_stump_separates_labels() {
        let q = query(
            "t",
            &[
                (row(&[(3, 0.1)]), 0),
                (row(&[(3, 0.3)]), 0),
                (row(&[(3, 0.7)]), 1),
                (row(&[(3, 0.9)]), 1),
            ],
        );
        let (m, _) = train_mart_traced(&[q], &[], &cfg(1, 2)).unwrap();
        let tree = &m.trees[0];
        assert_eq!(tree.leaves(), 2);
        match &tree.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 4);
                assert!(*threshold > 0.3 && *threshold <= 0.7);
                assert!((threshold - 0.5).abs() < 1e-12);
            }
            other => panic!("expected split, got {other:?}"),
        }
        assert!((m.predict(&row(&[(3, 0.8)])) - 0.1).abs() < 1e-12);
        assert_eq!(m.predict(&row(&[(3, 0.2)])), 0.0);
    }

    #[test]
    fn split_ties_prefer_lower_feature() {
        // features 2 and 5 carry identical information
        let q = query(
            "t",
            &[(row(&[(1, 0.0), (4, 0.0)]), 0), (row(&[(1, 1.0), (4, 1.0)]), 1)],
        );
        let (m, _) = train_mart_traced(&[q], &[], &cfg(1, 2)).unwrap();
        assert!(matches!(m.trees[0].nodes[0], Node::Split { feature: 2, .. }));
    }

    #[test]
    fn constant_features_give_single_leaf() {
        let q = query("t", &[(row(&[]), 0), (row(&[]), 1), (row(&[]), 2)]);
        let (m, _) = train_mart_traced(&[q], &[], &cfg(2, 7)).unwrap();
        assert_eq!(m.trees[0].nodes, vec![Node::Leaf { value: 1.0 }]);
    }

    #[test]
    fn min_leaf_size_respected() {
        let q = query(
            "t",
            &[(row(&[(0, 0.0)]), 5), (row(&[(0, 1.0)]), 0), (row(&[(0, 2.0)]), 0)],
        );
        let mut c = cfg(1, 7);
        c.mart.min_leaf_size = 2;
        let (m, _) = train_mart_traced(&[q], &[], &c).unwrap();
        assert_eq!(m.trees[0].leaves(), 1);
    }

    #[test]
    fn early_stopping_keeps_best_prefix() {
        let train = query("a", &[(row(&[(0, 0.0)]), 0), (row(&[(0, 1.0)]), 1)]);
        let valid = query("b", &[(row(&[(0, 0.0)]), 0), (row(&[(0, 1.0)]), 1)]);
        let mut c = cfg(50, 2);
        c.mart.patience = Some(3);
        c.metric = crate::evaluation::Metric::Mrr;
        let (m, trace) = train_mart_traced(&[train], &[valid], &c).unwrap();
        assert_eq!(trace.valid_metric[0], 1.0);
        assert_eq!(m.trees.len(), 1);
        assert_eq!(trace.valid_metric.len(), 4);
    }

    proptest! {
        #[test]
        fn training_mse_never_increases(
            data in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0, 0i64..3), 4..40)
        ) {
            let rows: Vec<_> = data.iter().map(|&(a, b, l)| (row(&[(0, a), (5, b)]), l)).collect();
            let q = query("t", &rows);
            let (_, trace) = train_mart_traced(&[q], &[], &cfg(15, 4)).unwrap();
            for w in trace.train_mse.windows(2) {
                prop_assert!(w[1] <= w[0] + 1e-12, "{} > {}", w[1], w[0]);
            }
        }
    }
}
