//! Learning to rank over the 13-feature rows: a metric-optimizing linear
//! Coordinate Ascent ranker and pointwise MART (least-squares boosted trees).

mod coordinate_ascent;
mod mart;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::Metric;
use crate::features::{FeatureVector, NUM_FEATURES};

pub use coordinate_ascent::{train_coordinate_ascent, train_coordinate_ascent_traced, CaParams, CaTrace};
pub use mart::{train_mart, train_mart_traced, MartParams, MartTrace, Node, RegressionTree};

pub const MODEL_FORMAT: &str = "venuerec-ranker";
pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LtrError {
    #[error("need at least 2 topics to split, got {0}")]
    TooFewTopics(usize),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("empty {0} set")]
    EmptySet(&'static str),
    #[error("model file: {0}")]
    ModelFile(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, LtrError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Learner {
    #[serde(alias = "ca")]
    CoordinateAscent,
    #[default]
    Mart,
}

impl std::str::FromStr for Learner {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "ca" | "coordinate_ascent" => Ok(Learner::CoordinateAscent),
            "mart" => Ok(Learner::Mart),
            other => Err(format!("unknown learner '{other}' (expected ca|mart)")),
        }
    }
}

impl std::fmt::Display for Learner {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Learner::CoordinateAscent => "ca",
            Learner::Mart => "mart",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learner: Learner,
    /// fraction of topics used for training; the rest validate
    pub split_fraction: f64,
    pub seed: u64,
    pub metric: Metric,
    pub relevance_cutoff: i64,
    pub ca: CaParams,
    pub mart: MartParams,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learner: Learner::Mart,
            split_fraction: 0.67,
            seed: 42,
            metric: Metric::P5,
            relevance_cutoff: 1,
            ca: CaParams::default(),
            mart: MartParams::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.split_fraction > 0.0 && self.split_fraction < 1.0) {
            return Err(LtrError::Config(format!(
                "split fraction {} must lie strictly between 0 and 1",
                self.split_fraction
            )));
        }
        self.ca.validate()?;
        self.mart.validate()
    }
}

/// Candidates of one topic in feature-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Query {
    pub topic_id: String,
    pub venue_ids: Vec<String>,
    pub labels: Vec<i64>,
    pub features: Vec<[f64; NUM_FEATURES]>,
}

impl Query {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn has_relevant(&self, cutoff: i64) -> bool {
        self.labels.iter().any(|&l| l >= cutoff)
    }

    /// Grades in ranked order for the given scores (ties by venue id).
    pub fn ranked_labels(&self, scores: &[f64]) -> Vec<i64> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| {
            scores[b]
                .partial_cmp(&scores[a])
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.venue_ids[a].cmp(&self.venue_ids[b]))
        });
        order.into_iter().map(|i| self.labels[i]).collect()
    }
}

/// Group rows by topic, topics in lexicographic order, rows in venue order.
pub fn group_by_topic(rows: &[FeatureVector]) -> Vec<Query> {
    let mut groups: BTreeMap<&str, Vec<&FeatureVector>> = BTreeMap::new();
    for r in rows {
        groups.entry(r.topic_id.as_str()).or_default().push(r);
    }
    groups
        .into_iter()
        .map(|(topic, mut rs)| {
            rs.sort_by(|a, b| a.venue_id.cmp(&b.venue_id));
            Query {
                topic_id: topic.to_string(),
                venue_ids: rs.iter().map(|r| r.venue_id.clone()).collect(),
                labels: rs.iter().map(|r| r.label).collect(),
                features: rs.iter().map(|r| r.features).collect(),
            }
        })
        .collect()
}

/// Mean metric over queries with at least one relevant candidate.
pub fn mean_metric<F>(queries: &[Query], metric: Metric, cutoff: i64, mut score: F) -> f64
where
    F: FnMut(usize, &Query) -> Vec<f64>,
{
    let mut sum = 0.0;
    let mut n = 0usize;
    for (i, q) in queries.iter().enumerate().filter(|(_, q)| q.has_relevant(cutoff)) {
        let s = score(i, q);
        sum += metric.score(&q.ranked_labels(&s), cutoff);
        n += 1;
    }
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Seeded topic-level split. The training side gets `round(fraction * n)`
/// topics, clamped so both sides are non-empty.
pub fn split_train_validation(
    queries: &[Query],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<Query>, Vec<Query>)> {
    let n = queries.len();
    if n < 2 {
        return Err(LtrError::TooFewTopics(n));
    }
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(LtrError::Config(format!("split fraction {fraction} outside (0, 1)")));
    }
    let mut sorted: Vec<&Query> = queries.iter().collect();
    sorted.sort_by(|a, b| a.topic_id.cmp(&b.topic_id));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sorted.shuffle(&mut rng);
    let n_train = ((fraction * n as f64).round() as usize).clamp(1, n - 1);
    let train = sorted[..n_train].iter().map(|q| (*q).clone()).collect();
    let valid = sorted[n_train..].iter().map(|q| (*q).clone()).collect();
    Ok((train, valid))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub training_metric: Metric,
    pub seed: u64,
    pub hyperparameters: CaParams,
}

impl LinearModel {
    pub fn predict(&self, features: &[f64; NUM_FEATURES]) -> f64 {
        self.weights.iter().zip(features).map(|(w, x)| w * x).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeEnsemble {
    pub trees: Vec<RegressionTree>,
    pub shrinkage: f64,
    pub seed: u64,
    pub hyperparameters: MartParams,
}

impl TreeEnsemble {
    pub fn predict(&self, features: &[f64; NUM_FEATURES]) -> f64 {
        self.trees
            .iter()
            .map(|t| self.shrinkage * t.predict(features))
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "snake_case")]
pub enum Model {
    CoordinateAscent(LinearModel),
    Mart(TreeEnsemble),
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: Model,
}

impl Model {
    pub fn predict(&self, features: &[f64; NUM_FEATURES]) -> f64 {
        match self {
            Model::CoordinateAscent(m) => m.predict(features),
            Model::Mart(m) => m.predict(features),
        }
    }

    pub fn predict_row(&self, row: &FeatureVector) -> f64 {
        self.predict(&row.features)
    }

    pub fn learner(&self) -> Learner {
        match self {
            Model::CoordinateAscent(_) => Learner::CoordinateAscent,
            Model::Mart(_) => Learner::Mart,
        }
    }

    pub fn to_json(&self) -> String {
        let file = ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        };
        let mut s = serde_json::to_string_pretty(&file).expect("model serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Model> {
        let head: serde_json::Value =
            serde_json::from_str(text).map_err(|e| LtrError::ModelFile(e.to_string()))?;
        match head.get("format").and_then(|f| f.as_str()) {
            Some(MODEL_FORMAT) => {}
            other => {
                return Err(LtrError::ModelFile(format!(
                    "format tag {other:?}, expected \"{MODEL_FORMAT}\""
                )))
            }
        }
        match head.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == MODEL_VERSION as u64 => {}
            other => {
                return Err(LtrError::ModelFile(format!(
                    "version {other:?}, expected {MODEL_VERSION}"
                )))
            }
        }
        let file: ModelFile =
            serde_json::from_value(head).map_err(|e| LtrError::ModelFile(e.to_string()))?;
        file.model.check()?;
        Ok(file.model)
    }

    fn check(&self) -> Result<()> {
        match self {
            Model::CoordinateAscent(m) => {
                if m.weights.len() != NUM_FEATURES || m.weights.iter().any(|w| !w.is_finite()) {
                    return Err(LtrError::ModelFile(format!(
                        "expected {NUM_FEATURES} finite weights"
                    )));
                }
            }
            Model::Mart(m) => {
                if m.trees.is_empty() {
                    return Err(LtrError::ModelFile("ensemble has no trees".into()));
                }
                for (i, t) in m.trees.iter().enumerate() {
                    t.check().map_err(|e| LtrError::ModelFile(format!("tree {i}: {e}")))?;
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Model> {
        Model::from_json(&fs::read_to_string(path)?)
    }
}

/// Group, split and train with the configured learner.
pub fn train(rows: &[FeatureVector], cfg: &TrainConfig) -> Result<Model> {
    cfg.validate()?;
    let queries = group_by_topic(rows);
    let (train_set, valid_set) = split_train_validation(&queries, cfg.split_fraction, cfg.seed)?;
    Ok(match cfg.learner {
        Learner::CoordinateAscent => {
            Model::CoordinateAscent(train_coordinate_ascent(&train_set, &valid_set, cfg)?)
        }
        Learner::Mart => Model::Mart(train_mart(&train_set, &valid_set, cfg)?),
    })
}
