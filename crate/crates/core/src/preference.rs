//! Venue vectors, rating-weighted user preference vectors, subtraction-expanded
//! context term sets and the context/gender vectors built from them.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::corpus::{Aspect, ContextSchema, Gender, Preprocessor, UserProfile, Venue};
use crate::embedding::{EmbeddingError, EmbeddingStore, Vector};

#[derive(Debug, Error)]
pub enum PreferenceError {
    #[error("seed token '{token}' of dimension '{dimension}' is not in the embedding vocabulary")]
    SeedOutOfVocabulary { dimension: String, token: String },
    #[error("dimension name '{0}' has no indexable tokens after preprocessing")]
    EmptySeed(String),
    #[error("dimension '{dimension}' is not legal for aspect '{aspect}'")]
    IllegalDimension { aspect: String, dimension: String },
    #[error("thresholds inconsistent: negative {neg} must be below positive {pos}")]
    Thresholds { pos: i64, neg: i64 },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

pub type Result<T> = std::result::Result<T, PreferenceError>;

#[derive(Debug, Clone, PartialEq)]
pub struct VenueVector {
    pub venue_id: String,
    pub vector: Vector,
}

/// Sum of the embedding of every in-vocabulary comment token, once per occurrence.
pub fn venue_vector(store: &EmbeddingStore, venue: &Venue) -> VenueVector {
    let mut v = Vector::zeros(store.dim());
    for t in venue.tokens() {
        if let Some(e) = store.vector_of(t) {
            v.add_scaled(e, 1.0).expect("store vectors share the store dimension");
        }
    }
    VenueVector {
        venue_id: venue.id.clone(),
        vector: v,
    }
}

/// Number of comment tokens missing from the vocabulary.
pub fn oov_tokens(store: &EmbeddingStore, venue: &Venue) -> usize {
    venue.tokens().filter(|t| !store.contains(t)).count()
}

/// Venue vectors for a whole corpus, computed in parallel, keyed by venue id.
pub fn venue_vectors(store: &EmbeddingStore, venues: &[Venue]) -> BTreeMap<String, Vector> {
    venues
        .par_iter()
        .map(|v| {
            let vv = venue_vector(store, v);
            (vv.venue_id, vv.vector)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NegativeWeighting {
    /// weight = rating
    #[default]
    Literal,
    /// weight = rating + 1, so rating-0 venues still count
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ProfileConfig {
    /// ratings >= this are positive
    pub pos_threshold: i64,
    /// ratings <= this are negative
    pub neg_threshold: i64,
    pub negative_weighting: NegativeWeighting,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig {
            pos_threshold: 4,
            neg_threshold: 3,
            negative_weighting: NegativeWeighting::Literal,
        }
    }
}

impl ProfileConfig {
    pub fn validate(&self) -> Result<()> {
        if self.neg_threshold >= self.pos_threshold {
            return Err(PreferenceError::Thresholds {
                pos: self.pos_threshold,
                neg: self.neg_threshold,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserVenueProfile {
    pub user_id: String,
    pub gender: Gender,
    pub positive: Vector,
    pub negative: Vector,
    pub pos_threshold: i64,
    pub neg_threshold: i64,
    /// rated venues with no venue vector
    pub skipped: usize,
}

/// Rating-weighted sums of rated venue vectors, split into positive and negative sides.
pub fn user_profile_vectors(
    dim: usize,
    venue_vectors: &BTreeMap<String, Vector>,
    profile: &UserProfile,
    config: &ProfileConfig,
) -> Result<UserVenueProfile> {
    config.validate()?;
    let mut positive = Vector::zeros(dim);
    let mut negative = Vector::zeros(dim);
    let mut skipped = 0;
    for r in &profile.ratings {
        let Some(v) = venue_vectors.get(&r.venue_id) else {
            skipped += 1;
            continue;
        };
        if r.rating >= config.pos_threshold {
            positive.add_scaled(v, r.rating as f64)?;
        } else if r.rating <= config.neg_threshold {
            let w = match config.negative_weighting {
                NegativeWeighting::Literal => r.rating as f64,
                NegativeWeighting::Shifted => (r.rating + 1) as f64,
            };
            negative.add_scaled(v, w)?;
        }
    }
    if skipped > 0 {
        warn!("user {}: {} rated venues not found", profile.user_id, skipped);
    }
    Ok(UserVenueProfile {
        user_id: profile.user_id.clone(),
        gender: profile.gender,
        positive,
        negative,
        pos_threshold: config.pos_threshold,
        neg_threshold: config.neg_threshold,
        skipped,
    })
}

/// Expanded term set of one dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct ContextTermSet {
    pub aspect: String,
    pub dimension: String,
    pub terms: BTreeSet<String>,
    pub k: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContextVector {
    pub aspect: String,
    pub dimension: String,
    pub vector: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenderVector {
    pub gender: Gender,
    pub vector: Vector,
}

/// Seed tokens and vector of a dimension name. Multi-word names use the mean
/// of their token vectors.
pub fn seed(store: &EmbeddingStore, pre: &Preprocessor, dimension: &str) -> Result<(Vec<String>, Vector)> {
    let tokens = pre.preprocess(dimension);
    if tokens.is_empty() {
        return Err(PreferenceError::EmptySeed(dimension.to_string()));
    }
    let mut v = Vector::zeros(store.dim());
    for t in &tokens {
        let e = store
            .vector_of(t)
            .ok_or_else(|| PreferenceError::SeedOutOfVocabulary {
                dimension: dimension.to_string(),
                token: t.clone(),
            })?;
        v.add_scaled(e, 1.0)?;
    }
    let v = v.scaled(1.0 / tokens.len() as f64);
    Ok((tokens, v))
}

/// Union over sibling dimensions of the `k` terms nearest to
/// `seed(dimension) - seed(sibling)`, never returning any seed token of the group.
pub fn expand_terms(
    store: &EmbeddingStore,
    pre: &Preprocessor,
    group: &str,
    dimensions: &[String],
    dimension: &str,
    k: usize,
) -> Result<ContextTermSet> {
    let mut seeds = Vec::with_capacity(dimensions.len());
    let mut exclude = HashSet::new();
    for d in dimensions {
        let (tokens, v) = seed(store, pre, d)?;
        exclude.extend(tokens);
        seeds.push((d.as_str(), v));
    }
    let own = seeds
        .iter()
        .find(|(d, _)| *d == dimension)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| PreferenceError::IllegalDimension {
            aspect: group.to_string(),
            dimension: dimension.to_string(),
        })?;
    let mut terms = BTreeSet::new();
    for (d, sib) in &seeds {
        if *d == dimension {
            continue;
        }
        let direction = crate::embedding::vec_sub(&own, sib)?;
        for s in store.similar_k(&direction, k, &exclude)? {
            terms.insert(s.term);
        }
    }
    if terms.is_empty() {
        warn!("{group}/{dimension}: expansion produced no terms");
    }
    Ok(ContextTermSet {
        aspect: group.to_string(),
        dimension: dimension.to_string(),
        terms,
        k,
    })
}

pub fn context_terms(
    store: &EmbeddingStore,
    pre: &Preprocessor,
    schema: &ContextSchema,
    aspect: Aspect,
    dimension: &str,
    k: usize,
) -> Result<ContextTermSet> {
    expand_terms(store, pre, aspect.as_str(), schema.dimensions(aspect), dimension, k)
}

/// Sum of the term vectors, each distinct term counted once.
pub fn sum_terms<'a, I>(store: &EmbeddingStore, terms: I) -> Vector
where
    I: IntoIterator<Item = &'a str>,
{
    let distinct: BTreeSet<&str> = terms.into_iter().collect();
    let mut v = Vector::zeros(store.dim());
    for t in distinct {
        if let Some(e) = store.vector_of(t) {
            v.add_scaled(e, 1.0).expect("store vectors share the store dimension");
        }
    }
    v
}

pub fn context_vector(store: &EmbeddingStore, terms: &ContextTermSet) -> ContextVector {
    if terms.terms.is_empty() {
        warn!("{}/{}: empty term set, zero context vector", terms.aspect, terms.dimension);
    }
    ContextVector {
        aspect: terms.aspect.clone(),
        dimension: terms.dimension.clone(),
        vector: sum_terms(store, terms.terms.iter().map(String::as_str)),
    }
}

pub const GENDER_GROUP: &str = "gender";

pub fn gender_terms(
    store: &EmbeddingStore,
    pre: &Preprocessor,
    gender: Gender,
    k: usize,
) -> Result<ContextTermSet> {
    let dims = [Gender::Male.as_str().to_string(), Gender::Female.as_str().to_string()];
    expand_terms(store, pre, GENDER_GROUP, &dims, gender.as_str(), k)
}

pub fn gender_vector(
    store: &EmbeddingStore,
    pre: &Preprocessor,
    gender: Gender,
    k: usize,
) -> Result<(ContextTermSet, GenderVector)> {
    let terms = gender_terms(store, pre, gender, k)?;
    let cv = context_vector(store, &terms);
    Ok((
        terms,
        GenderVector {
            gender,
            vector: cv.vector,
        },
    ))
}

/// Context vectors for every dimension of a schema plus both gender vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContextModels {
    pub term_sets: Vec<ContextTermSet>,
    pub contexts: BTreeMap<(Aspect, String), Vector>,
    pub genders: BTreeMap<Gender, Vector>,
}

impl ContextModels {
    pub fn build(
        store: &EmbeddingStore,
        pre: &Preprocessor,
        schema: &ContextSchema,
        k: usize,
    ) -> Result<Self> {
        let mut out = ContextModels::default();
        for (aspect, dims) in schema.aspects() {
            for d in dims {
                let ts = context_terms(store, pre, schema, aspect, d, k)?;
                let cv = context_vector(store, &ts);
                out.contexts.insert((aspect, d.clone()), cv.vector);
                out.term_sets.push(ts);
            }
        }
        for g in [Gender::Male, Gender::Female] {
            let (ts, gv) = gender_vector(store, pre, g, k)?;
            out.genders.insert(g, gv.vector);
            out.term_sets.push(ts);
        }
        Ok(out)
    }

    pub fn context(&self, aspect: Aspect, dimension: &str) -> Option<&Vector> {
        self.contexts.get(&(aspect, dimension.to_string()))
    }

    pub fn gender(&self, g: Gender) -> Option<&Vector> {
        self.genders.get(&g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Comment, Rating, VenueStats};
    use crate::embedding::vec_combine;

    fn store(entries: &[(&str, &[f64])]) -> EmbeddingStore {
        let dim = entries[0].1.len();
        EmbeddingStore::from_entries(dim, entries.iter().map(|(t, v)| (*t, v.to_vec()))).unwrap()
    }

    fn venue_with(id: &str, comments: &[&[&str]]) -> Venue {
        Venue {
            id: id.into(),
            name: String::new(),
            stats: VenueStats::default(),
            comments: comments
                .iter()
                .map(|toks| Comment {
                    raw: toks.join(" "),
                    tokens: toks.iter().map(|s| s.to_string()).collect(),
                })
                .collect(),
        }
    }

    #[test]
    fn venue_vector_examples() {
        let s = store(&[("a", &[1.0, 0.0]), ("b", &[0.0, 2.0])]);
        let v = venue_with("v", &[&["a", "b"], &["a"]]);
        assert_eq!(venue_vector(&s, &v).vector.values(), &[2.0, 2.0]);
        assert!(venue_vector(&s, &venue_with("e", &[])).vector.is_zero());
        let oov = venue_with("o", &[&["zz", "qq"]]);
        assert!(venue_vector(&s, &oov).vector.is_zero());
        assert_eq!(oov_tokens(&s, &oov), 2);
    }

    #[test]
    fn user_profile_examples() {
        let mut vv = BTreeMap::new();
        vv.insert("A".to_string(), Vector::new(vec![1.0, 0.0]));
        vv.insert("B".to_string(), Vector::new(vec![0.0, 1.0]));
        let profile = UserProfile {
            user_id: "u".into(),
            gender: Gender::Male,
            ratings: vec![
                Rating { venue_id: "A".into(), rating: 4 },
                Rating { venue_id: "B".into(), rating: 1 },
            ],
        };
        let cfg = ProfileConfig {
            pos_threshold: 4,
            neg_threshold: 2,
            ..Default::default()
        };
        let p = user_profile_vectors(2, &vv, &profile, &cfg).unwrap();
        assert_eq!(p.positive.values(), &[4.0, 0.0]);
        assert_eq!(p.negative.values(), &[0.0, 1.0]);

        let empty = UserProfile { ratings: vec![], ..profile.clone() };
        let p = user_profile_vectors(2, &vv, &empty, &cfg).unwrap();
        assert!(p.positive.is_zero() && p.negative.is_zero());

        let zero = UserProfile {
            ratings: vec![Rating { venue_id: "B".into(), rating: 0 }],
            ..profile.clone()
        };
        let p = user_profile_vectors(2, &vv, &zero, &cfg).unwrap();
        assert!(p.negative.is_zero());
        let shifted = ProfileConfig {
            negative_weighting: NegativeWeighting::Shifted,
            ..cfg
        };
        let p = user_profile_vectors(2, &vv, &zero, &shifted).unwrap();
        assert_eq!(p.negative.values(), &[0.0, 1.0]);

        let ghost = UserProfile {
            ratings: vec![Rating { venue_id: "nope".into(), rating: 4 }],
            ..profile.clone()
        };
        assert_eq!(user_profile_vectors(2, &vv, &ghost, &cfg).unwrap().skipped, 1);

        let bad = ProfileConfig { pos_threshold: 2, neg_threshold: 2, ..cfg };
        assert!(user_profile_vectors(2, &vv, &profile, &bad).is_err());
    }

    #[test]
    fn two_dimension_aspect_is_single_subtraction() {
        let s = store(&[
            ("alpha", &[1.0, 0.0, 0.0]),
            ("omega", &[0.0, 1.0, 0.0]),
            ("p", &[0.8, -0.7, 0.1]),
            ("q", &[0.0, 0.0, 1.0]),
            ("r", &[-1.0, 1.0, 0.0]),
        ]);
        let pre = Preprocessor::default();
        let dims = vec!["alpha".to_string(), "omega".to_string()];
        let ts = expand_terms(&s, &pre, "g", &dims, "alpha", 2).unwrap();
        let exclude: HashSet<String> = ["alpha".to_string(), "omega".to_string()].into();
        let direct: BTreeSet<String> = s
            .similar_k(&[1.0, -1.0, 0.0], 2, &exclude)
            .unwrap()
            .into_iter()
            .map(|t| t.term)
            .collect();
        assert_eq!(ts.terms, direct);
        assert!(!ts.terms.contains("alpha") && !ts.terms.contains("omega"));
    }

    #[test]
    fn season_toy_expansion() {
        let s = store(&[
            ("spring", &[1.0, 0.0, 0.0]),
            ("summer", &[0.0, 1.0, 0.0]),
            ("autumn", &[0.0, 0.0, 1.0]),
            ("winter", &[0.0, -1.0, 0.0]),
            ("w", &[0.9, -0.9, 0.0]),
            ("other", &[0.0, 0.2, 0.9]),
        ]);
        let pre = Preprocessor::default();
        let schema = ContextSchema::empty().with_dimensions(Aspect::Season, ["spring", "summer"]);
        let ts = context_terms(&s, &pre, &schema, Aspect::Season, "spring", 1).unwrap();
        assert_eq!(ts.terms.iter().collect::<Vec<_>>(), ["w"]);
    }

    #[test]
    fn seed_errors() {
        let s = store(&[("spring", &[1.0, 0.0])]);
        let pre = Preprocessor::default();
        let dims = vec!["spring".to_string(), "summer".to_string()];
        match expand_terms(&s, &pre, "season", &dims, "spring", 3) {
            Err(PreferenceError::SeedOutOfVocabulary { token, .. }) => assert_eq!(token, "summer"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(seed(&s, &pre, "the"), Err(PreferenceError::EmptySeed(_))));
    }

    #[test]
    fn multi_word_seed_is_mean() {
        let s = store(&[("night", &[2.0, 0.0]), ("time", &[0.0, 4.0])]);
        let pre = Preprocessor::default();
        let (tokens, v) = seed(&s, &pre, "night time").unwrap();
        assert_eq!(tokens, ["night", "time"]);
        assert_eq!(v.values(), &[1.0, 2.0]);
    }

    #[test]
    fn context_vector_examples() {
        let s = store(&[("a", &[1.0, 0.0]), ("b", &[0.0, 1.0])]);
        let set = |terms: &[&str]| ContextTermSet {
            aspect: "season".into(),
            dimension: "summer".into(),
            terms: terms.iter().map(|t| t.to_string()).collect(),
            k: 1,
        };
        assert_eq!(context_vector(&s, &set(&["a", "b"])).vector.values(), &[1.0, 1.0]);
        assert!(context_vector(&s, &set(&[])).vector.is_zero());
        assert_eq!(sum_terms(&s, ["a", "a"]).values(), &[1.0, 0.0]);

        let ts = set(&["a", "b"]);
        let combined = vec_combine(
            2,
            ts.terms.iter().map(|t| (s.vector_of(t).unwrap(), 1.0)),
        )
        .unwrap();
        assert_eq!(context_vector(&s, &ts).vector, combined);
    }

    #[test]
    fn gender_vector_examples() {
        let s = store(&[("male", &[1.0, 0.0]), ("femal", &[0.0, 1.0]), ("w", &[1.0, -1.0])]);
        let pre = Preprocessor::default();
        let (ts, gv) = gender_vector(&s, &pre, Gender::Male, 1).unwrap();
        assert_eq!(ts.terms.iter().collect::<Vec<_>>(), ["w"]);
        assert_eq!(gv.vector.values(), &[1.0, -1.0]);
        // female direction is (-1, 1); w is anti-aligned but still the only candidate
        let (ts, _) = gender_vector(&s, &pre, Gender::Female, 1).unwrap();
        assert_eq!(ts.terms.iter().collect::<Vec<_>>(), ["w"]);
        assert_eq!(ts.dimension, "female");
    }
}
