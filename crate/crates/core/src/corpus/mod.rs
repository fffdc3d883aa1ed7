//! Venues, comments, user profiles, context topics and relevance judgments.

mod io;
pub mod porter;
mod preprocess;
mod schema;

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use io::{
    load_contexts, load_profiles, load_qrels, load_venues, parse_contexts, parse_profiles,
    parse_qrels, parse_venues, write_contexts, write_profiles, write_qrels, write_venues,
};
pub use preprocess::{PreprocessConfig, Preprocessor};
pub use schema::{Aspect, ContextSchema};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("line {line}: field '{field}': {message}")]
    Record {
        line: usize,
        field: String,
        message: String,
    },
    #[error("duplicate {kind} id '{id}'")]
    Duplicate { kind: &'static str, id: String },
    #[error("illegal dimension '{dimension}' for aspect '{aspect}'")]
    IllegalDimension { aspect: String, dimension: String },
    #[error("unknown aspect '{0}'")]
    UnknownAspect(String),
    #[error("topic '{topic}' refers to unknown user '{user}'")]
    UnknownUser { topic: String, user: String },
    #[error("rating scale invalid: {0}")]
    Scale(String),
}

impl CorpusError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CorpusError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn record(line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        CorpusError::Record {
            line,
            field: field.into(),
            message: message.into(),
        }
    }
}

/// LBSN statistics. `None` marks a value missing from the source.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VenueStats {
    pub checkins: Option<u64>,
    pub likes: Option<u64>,
    pub comment_count: Option<u64>,
    pub photos: Option<u64>,
    pub rating_avg: Option<f64>,
    pub unique_users: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comment {
    pub raw: String,
    pub tokens: Vec<String>,
}

impl Comment {
    pub fn new(raw: impl Into<String>, pre: &Preprocessor) -> Self {
        let raw = raw.into();
        let tokens = pre.preprocess(&raw);
        Comment { raw, tokens }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Venue {
    pub id: String,
    pub name: String,
    pub stats: VenueStats,
    pub comments: Vec<Comment>,
}

impl Venue {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.comments
            .iter()
            .flat_map(|c| c.tokens.iter().map(String::as_str))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }

    pub fn other(self) -> Gender {
        match self {
            Gender::Male => Gender::Female,
            Gender::Female => Gender::Male,
        }
    }
}

/// Inclusive integer rating range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingScale {
    pub min: i64,
    pub max: i64,
}

impl Default for RatingScale {
    fn default() -> Self {
        RatingScale { min: 0, max: 4 }
    }
}

impl RatingScale {
    pub fn contains(&self, r: i64) -> bool {
        (self.min..=self.max).contains(&r)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rating {
    pub venue_id: String,
    pub rating: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserProfile {
    pub user_id: String,
    pub gender: Gender,
    pub ratings: Vec<Rating>,
}

/// One evaluation topic: a user, the chosen dimension per aspect, and candidates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextPair {
    pub topic_id: String,
    pub user_id: String,
    pub context: BTreeMap<Aspect, String>,
    pub candidates: Vec<String>,
}

impl ContextPair {
    pub fn dimension(&self, aspect: Aspect) -> Option<&str> {
        self.context.get(&aspect).map(String::as_str)
    }
}

/// Graded relevance judgments keyed by (topic, venue).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Qrels {
    judgments: BTreeMap<String, BTreeMap<String, i64>>,
}

impl Qrels {
    pub fn new() -> Self {
        Qrels::default()
    }

    /// Returns false if the (topic, venue) key is already present.
    pub fn insert(&mut self, topic: &str, venue: &str, grade: i64) -> bool {
        let t = self.judgments.entry(topic.to_string()).or_default();
        if t.contains_key(venue) {
            return false;
        }
        t.insert(venue.to_string(), grade);
        true
    }

    pub fn grade(&self, topic: &str, venue: &str) -> Option<i64> {
        self.judgments.get(topic).and_then(|t| t.get(venue)).copied()
    }

    pub fn topic(&self, topic: &str) -> Option<&BTreeMap<String, i64>> {
        self.judgments.get(topic)
    }

    pub fn topics(&self) -> impl Iterator<Item = &str> {
        self.judgments.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, i64)> {
        self.judgments
            .iter()
            .flat_map(|(t, m)| m.iter().map(move |(v, g)| (t.as_str(), v.as_str(), *g)))
    }

    pub fn len(&self) -> usize {
        self.judgments.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Counts of dangling references found while assembling a corpus.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReferenceReport {
    pub unknown_candidates: usize,
    pub unknown_qrels_venues: usize,
    pub unknown_rated_venues: usize,
}

/// A validated, cross-referenced collection.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub venues: Vec<Venue>,
    pub profiles: Vec<UserProfile>,
    pub contexts: Vec<ContextPair>,
    pub qrels: Qrels,
    venue_index: HashMap<String, usize>,
    profile_index: HashMap<String, usize>,
}

impl Corpus {
    pub fn new(
        venues: Vec<Venue>,
        profiles: Vec<UserProfile>,
        contexts: Vec<ContextPair>,
        qrels: Qrels,
    ) -> Result<(Self, ReferenceReport), CorpusError> {
        let mut venue_index = HashMap::new();
        for (i, v) in venues.iter().enumerate() {
            if venue_index.insert(v.id.clone(), i).is_some() {
                return Err(CorpusError::Duplicate {
                    kind: "venue",
                    id: v.id.clone(),
                });
            }
        }
        let mut profile_index = HashMap::new();
        for (i, p) in profiles.iter().enumerate() {
            if profile_index.insert(p.user_id.clone(), i).is_some() {
                return Err(CorpusError::Duplicate {
                    kind: "user",
                    id: p.user_id.clone(),
                });
            }
        }
        let mut report = ReferenceReport::default();
        let mut topics = std::collections::HashSet::new();
        for c in &contexts {
            if !topics.insert(c.topic_id.as_str()) {
                return Err(CorpusError::Duplicate {
                    kind: "topic",
                    id: c.topic_id.clone(),
                });
            }
            if !profile_index.contains_key(&c.user_id) {
                return Err(CorpusError::UnknownUser {
                    topic: c.topic_id.clone(),
                    user: c.user_id.clone(),
                });
            }
            for v in &c.candidates {
                if !venue_index.contains_key(v) {
                    warn!("topic {}: candidate venue '{}' not in venue corpus", c.topic_id, v);
                    report.unknown_candidates += 1;
                }
            }
        }
        for (t, v, _) in qrels.iter() {
            if !venue_index.contains_key(v) {
                warn!("qrels topic {t}: venue '{v}' not in venue corpus");
                report.unknown_qrels_venues += 1;
            }
        }
        for p in &profiles {
            for r in &p.ratings {
                if !venue_index.contains_key(&r.venue_id) {
                    report.unknown_rated_venues += 1;
                }
            }
        }
        Ok((
            Corpus {
                venues,
                profiles,
                contexts,
                qrels,
                venue_index,
                profile_index,
            },
            report,
        ))
    }

    pub fn venue(&self, id: &str) -> Option<&Venue> {
        self.venue_index.get(id).map(|&i| &self.venues[i])
    }

    pub fn profile(&self, user_id: &str) -> Option<&UserProfile> {
        self.profile_index.get(user_id).map(|&i| &self.profiles[i])
    }
}
