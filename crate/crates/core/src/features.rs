//! The 13-feature ranking vector and its LETOR/SVMlight-style file format.
//!
//! | idx | name          | source                                   |
//! |-----|---------------|------------------------------------------|
//! | 1   | checkins      | venue statistics                         |
//! | 2   | likes         | venue statistics                         |
//! | 3   | comment_count | venue statistics                         |
//! | 4   | photos        | venue statistics                         |
//! | 5   | rating_avg    | venue statistics                         |
//! | 6   | unique_users  | venue statistics                         |
//! | 7   | uv_pos        | cos(venue, positive user profile)        |
//! | 8   | uv_neg        | cos(venue, negative user profile)        |
//! | 9   | cv_duration   | cos(venue, chosen Duration dimension)    |
//! | 10  | cv_season     | cos(venue, chosen Season dimension)      |
//! | 11  | cv_group      | cos(venue, chosen Group dimension)       |
//! | 12  | cv_type       | cos(venue, chosen Type dimension)        |
//! | 13  | gv            | cos(venue, user's gender vector)         |
//!
//! Missing statistics and absent aspects are encoded as 0.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Aspect, ContextPair, Corpus, Gender, Qrels, VenueStats};
use crate::embedding::{cosine, Vector};
use crate::preference::{ContextModels, UserVenueProfile};

pub const NUM_FEATURES: usize = 13;

pub const FEATURE_NAMES: [&str; NUM_FEATURES] = [
    "checkins",
    "likes",
    "comment_count",
    "photos",
    "rating_avg",
    "unique_users",
    "uv_pos",
    "uv_neg",
    "cv_duration",
    "cv_season",
    "cv_group",
    "cv_type",
    "gv",
];

/// Zero-based slot of the context feature for `aspect`.
pub fn aspect_slot(aspect: Aspect) -> usize {
    match aspect {
        Aspect::Duration => 8,
        Aspect::Season => 9,
        Aspect::Group => 10,
        Aspect::Type => 11,
    }
}

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub topic_id: String,
    pub venue_id: String,
    pub label: i64,
    pub features: [f64; NUM_FEATURES],
}

/// Everything extraction needs besides the corpus itself.
#[derive(Debug, Clone, Default)]
pub struct FeatureModels {
    pub dim: usize,
    pub venue_vectors: BTreeMap<String, Vector>,
    pub users: BTreeMap<String, UserVenueProfile>,
    pub contexts: ContextModels,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ExtractOptions {
    /// drop candidates with no judgment instead of labelling them 0
    pub exclude_unjudged: bool,
    /// per-topic min-max scaling of every feature into [0, 1]
    pub minmax_per_topic: bool,
}

fn stat(v: Option<u64>) -> f64 {
    v.map(|x| x as f64).unwrap_or(0.0)
}

fn cos(a: &[f64], b: Option<&Vector>) -> f64 {
    match b {
        Some(b) => cosine(a, b).unwrap_or(0.0),
        None => 0.0,
    }
}

/// Features for one (topic, candidate). `stats` is `None` for venues missing
/// from the corpus; such venues also have no vector and score 0 throughout.
pub fn extract_features(
    pair: &ContextPair,
    venue_id: &str,
    stats: Option<&VenueStats>,
    gender: Gender,
    models: &FeatureModels,
    qrels: Option<&Qrels>,
) -> FeatureVector {
    let mut f = [0.0; NUM_FEATURES];
    if let Some(s) = stats {
        f[0] = stat(s.checkins);
        f[1] = stat(s.likes);
        f[2] = stat(s.comment_count);
        f[3] = stat(s.photos);
        f[4] = s.rating_avg.unwrap_or(0.0);
        f[5] = stat(s.unique_users);
    }
    let zero = Vector::zeros(models.dim);
    let venue = models.venue_vectors.get(venue_id).unwrap_or(&zero);
    if let Some(user) = models.users.get(&pair.user_id) {
        f[6] = cos(venue, Some(&user.positive));
        f[7] = cos(venue, Some(&user.negative));
    }
    for (aspect, dim) in &pair.context {
        f[aspect_slot(*aspect)] = cos(venue, models.contexts.context(*aspect, dim));
    }
    f[12] = cos(venue, models.contexts.gender(gender));
    let label = qrels
        .and_then(|q| q.grade(&pair.topic_id, venue_id))
        .unwrap_or(0);
    FeatureVector {
        topic_id: pair.topic_id.clone(),
        venue_id: venue_id.to_string(),
        label,
        features: f,
    }
}

/// Rows for every (topic, candidate) of the corpus, in (topic, venue) order.
pub fn extract_all(
    corpus: &Corpus,
    models: &FeatureModels,
    qrels: Option<&Qrels>,
    opts: ExtractOptions,
) -> Vec<FeatureVector> {
    let mut rows: Vec<FeatureVector> = corpus
        .contexts
        .par_iter()
        .flat_map_iter(|pair| {
            let gender = corpus
                .profile(&pair.user_id)
                .map(|p| p.gender)
                .unwrap_or(Gender::Male);
            let mut seen = std::collections::HashSet::new();
            pair.candidates
                .iter()
                .filter(move |v| seen.insert(v.as_str()))
                .filter(move |v| {
                    !opts.exclude_unjudged
                        || qrels.is_some_and(|q| q.grade(&pair.topic_id, v).is_some())
                })
                .map(move |v| {
                    let stats = corpus.venue(v).map(|x| &x.stats);
                    extract_features(pair, v, stats, gender, models, qrels)
                })
                .collect::<Vec<_>>()
        })
        .collect();
    sort_rows(&mut rows);
    if opts.minmax_per_topic {
        minmax_per_topic(&mut rows);
    }
    rows
}

pub fn sort_rows(rows: &mut [FeatureVector]) {
    rows.sort_by(|a, b| {
        a.topic_id
            .cmp(&b.topic_id)
            .then_with(|| a.venue_id.cmp(&b.venue_id))
    });
}

/// Scale each feature to [0, 1] within each topic; constant columns become 0.
pub fn minmax_per_topic(rows: &mut [FeatureVector]) {
    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, r) in rows.iter().enumerate() {
        groups.entry(r.topic_id.clone()).or_default().push(i);
    }
    for idx in groups.values() {
        for j in 0..NUM_FEATURES {
            let (lo, hi) = idx.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| {
                let x = rows[i].features[j];
                (lo.min(x), hi.max(x))
            });
            for &i in idx {
                let x = &mut rows[i].features[j];
                *x = if hi > lo { (*x - lo) / (hi - lo) } else { 0.0 };
            }
        }
    }
}

pub fn format_row(r: &FeatureVector) -> String {
    let mut s = format!("{} qid:{}", r.label, r.topic_id);
    for (i, x) in r.features.iter().enumerate() {
        s.push_str(&format!(" {}:{}", i + 1, x));
    }
    s.push_str(" # ");
    s.push_str(&r.venue_id);
    s
}

/// Rows are written in (topic, venue) order regardless of input order.
pub fn write_features<W: Write>(w: &mut W, rows: &[FeatureVector]) -> io::Result<()> {
    let mut sorted: Vec<&FeatureVector> = rows.iter().collect();
    sorted.sort_by(|a, b| {
        a.topic_id
            .cmp(&b.topic_id)
            .then_with(|| a.venue_id.cmp(&b.venue_id))
    });
    for r in sorted {
        writeln!(w, "{}", format_row(r))?;
    }
    Ok(())
}

pub fn save_features(path: impl AsRef<Path>, rows: &[FeatureVector]) -> Result<(), FeatureError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_features(&mut w, rows)?;
    w.flush()?;
    Ok(())
}

pub fn parse_row(line_no: usize, line: &str) -> Result<FeatureVector, FeatureError> {
    let err = |message: String| FeatureError::Parse {
        line: line_no,
        message,
    };
    let (body, comment) = match line.split_once('#') {
        Some((b, c)) => (b, c.trim()),
        None => (line, ""),
    };
    if comment.is_empty() {
        return Err(err("missing '# <venue_id>' comment".into()));
    }
    let mut fields = body.split_whitespace();
    let label = fields
        .next()
        .ok_or_else(|| err("empty line".into()))?
        .parse::<i64>()
        .map_err(|_| err("label is not an integer".into()))?;
    let topic = fields
        .next()
        .and_then(|q| q.strip_prefix("qid:"))
        .filter(|q| !q.is_empty())
        .ok_or_else(|| err("missing qid:<topic_id>".into()))?;
    let mut features = [f64::NAN; NUM_FEATURES];
    for f in fields {
        let (idx, val) = f
            .split_once(':')
            .ok_or_else(|| err(format!("malformed feature '{f}'")))?;
        let idx: usize = idx
            .parse()
            .ok()
            .filter(|i| (1..=NUM_FEATURES).contains(i))
            .ok_or_else(|| err(format!("feature index '{idx}' outside 1..={NUM_FEATURES}")))?;
        let val: f64 = val
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| err(format!("feature {idx} value '{val}' is not a finite number")))?;
        if !features[idx - 1].is_nan() {
            return Err(err(format!("feature {idx} given twice")));
        }
        features[idx - 1] = val;
    }
    if let Some(missing) = features.iter().position(|x| x.is_nan()) {
        return Err(err(format!("missing feature {}", missing + 1)));
    }
    Ok(FeatureVector {
        topic_id: topic.to_string(),
        venue_id: comment.to_string(),
        label,
        features,
    })
}

pub fn read_features<R: BufRead>(r: R) -> Result<Vec<FeatureVector>, FeatureError> {
    let mut rows = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(parse_row(i + 1, &line)?);
    }
    Ok(rows)
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Vec<FeatureVector>, FeatureError> {
    read_features(BufReader::new(File::open(path)?))
}
