//! Stage orchestration behind the command-line tool. Each stage reads its
//! declared inputs from the configured paths or the output directory and
//! writes its artifacts under fixed file names.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{self, Aspect, ContextSchema, Corpus, CorpusError, Gender, Preprocessor, Qrels, RatingScale};
use crate::embedding::{EmbeddingError, EmbeddingFormat, EmbeddingStore, Vector};
use crate::evaluation::{self, EvalConfig, EvalError, Metric, RankedRun, RUN_DEPTH};
use crate::features::{self, ExtractOptions, FeatureError, FeatureModels, FeatureVector};
use crate::ltr::{self, CaParams, Learner, LtrError, MartParams, Model, TrainConfig};
use crate::preference::{self, ContextModels, ContextTermSet, NegativeWeighting, PreferenceError, ProfileConfig, UserVenueProfile};

pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";
pub const VENUE_VECTORS: &str = "venue_vectors.txt";
pub const USER_VECTORS: &str = "user_vectors.txt";
pub const CONTEXT_VECTORS: &str = "context_vectors.txt";
pub const TERM_SETS: &str = "term_sets.tsv";
pub const PROFILE_SUMMARY: &str = "profile_summary.txt";
pub const FEATURES: &str = "features.txt";
pub const MODEL: &str = "model.json";
pub const RUN: &str = "run.txt";
pub const METRICS: &str = "metrics.txt";
pub const ABLATION: &str = "ablation.tsv";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),
    #[error("missing input {what}: expected {}", path.display())]
    Missing { what: String, path: PathBuf },
    #[error("no overlapping topics between run and qrels")]
    NoOverlap,
    #[error("io error at {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Preference(#[from] PreferenceError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Ltr(#[from] LtrError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// Short stable identifier for machine-readable error lines.
    pub fn kind(&self) -> &'static str {
        match self {
            PipelineError::Config(_) => "config",
            PipelineError::Missing { .. } => "missing_input",
            PipelineError::NoOverlap => "no_overlap",
            PipelineError::Io { .. } => "io",
            PipelineError::Embedding(_) => "embedding",
            PipelineError::Corpus(_) => "corpus",
            PipelineError::Preference(_) => "preference",
            PipelineError::Features(_) => "features",
            PipelineError::Ltr(_) => "ltr",
            PipelineError::Eval(_) => "eval",
        }
    }
}

pub type Result<T> = std::result::Result<T, PipelineError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub embeddings: Option<PathBuf>,
    pub venues: Option<PathBuf>,
    pub profiles: Option<PathBuf>,
    pub contexts: Option<PathBuf>,
    pub qrels: Option<PathBuf>,
    pub stopwords: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub embedding_format: EmbeddingFormat,
    pub k: usize,
    pub pos_threshold: i64,
    pub neg_threshold: i64,
    pub negative_weighting: NegativeWeighting,
    pub rating_min: i64,
    pub rating_max: i64,
    pub learner: Learner,
    pub metric: Metric,
    pub seed: u64,
    pub split_fraction: f64,
    pub run_tag: String,
    pub threads: Option<usize>,
    pub exclude_unjudged: bool,
    pub minmax_per_topic: bool,
    pub include_zero_relevant: bool,
    pub ca: CaParams,
    pub mart: MartParams,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let profile = ProfileConfig::default();
        let train = TrainConfig::default();
        let scale = RatingScale::default();
        PipelineConfig {
            embeddings: None,
            venues: None,
            profiles: None,
            contexts: None,
            qrels: None,
            stopwords: None,
            out_dir: PathBuf::from("out"),
            embedding_format: EmbeddingFormat::Text,
            k: 10,
            pos_threshold: profile.pos_threshold,
            neg_threshold: profile.neg_threshold,
            negative_weighting: profile.negative_weighting,
            rating_min: scale.min,
            rating_max: scale.max,
            learner: train.learner,
            metric: train.metric,
            seed: train.seed,
            split_fraction: train.split_fraction,
            run_tag: "venuerec".into(),
            threads: None,
            exclude_unjudged: false,
            minmax_per_topic: false,
            include_zero_relevant: false,
            ca: train.ca,
            mart: train.mart,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| PipelineError::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(io_err(path))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn profile_config(&self) -> ProfileConfig {
        ProfileConfig {
            pos_threshold: self.pos_threshold,
            neg_threshold: self.neg_threshold,
            negative_weighting: self.negative_weighting,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learner: self.learner,
            split_fraction: self.split_fraction,
            seed: self.seed,
            metric: self.metric,
            relevance_cutoff: 1,
            ca: self.ca,
            mart: self.mart,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            include_zero_relevant: self.include_zero_relevant,
            ..EvalConfig::default()
        }
    }

    pub fn rating_scale(&self) -> RatingScale {
        RatingScale {
            min: self.rating_min,
            max: self.rating_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(PipelineError::Config("k must be at least 1".into()));
        }
        if self.rating_min > self.rating_max {
            return Err(PipelineError::Config("rating_min exceeds rating_max".into()));
        }
        if self.run_tag.is_empty() || self.run_tag.contains(char::is_whitespace) {
            return Err(PipelineError::Config("run_tag must be a non-empty word".into()));
        }
        if self.threads == Some(0) {
            return Err(PipelineError::Config("threads must be at least 1".into()));
        }
        self.profile_config().validate()?;
        self.train_config().validate()?;
        Ok(())
    }

    pub fn out(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    fn input(&self, what: &str, path: &Option<PathBuf>) -> Result<PathBuf> {
        match path {
            None => Err(PipelineError::Config(format!("no {what} path configured"))),
            Some(p) if !p.exists() => Err(PipelineError::Missing {
                what: what.into(),
                path: p.clone(),
            }),
            Some(p) => Ok(p.clone()),
        }
    }

    fn artifact(&self, name: &str, producer: &str) -> Result<PathBuf> {
        let p = self.out(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(PipelineError::Missing {
                what: format!("artifact (run `{producer}` first)"),
                path: p,
            })
        }
    }

    /// Create the output directory and write the effective configuration into it.
    pub fn prepare_out_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.out_dir).map_err(io_err(&self.out_dir))?;
        let p = self.out(EFFECTIVE_CONFIG);
        fs::write(&p, self.to_toml()).map_err(io_err(&p))
    }

    fn preprocessor(&self) -> Result<Preprocessor> {
        match &self.stopwords {
            None => Ok(Preprocessor::default()),
            Some(_) => Ok(Preprocessor::from_stopword_file(
                &self.input("stopwords", &self.stopwords)?,
            )?),
        }
    }

    fn load_qrels(&self) -> Result<Qrels> {
        match &self.qrels {
            None => Ok(Qrels::new()),
            Some(_) => Ok(corpus::load_qrels(self.input("qrels", &self.qrels)?)?),
        }
    }

    fn load_corpus(&self, pre: &Preprocessor) -> Result<Corpus> {
        let venues_path = self.input("venues", &self.venues)?;
        let venues = corpus::load_venues(&venues_path, pre)?;
        if venues.is_empty() {
            return Err(PipelineError::Config(format!(
                "venue file {} contains no venues",
                venues_path.display()
            )));
        }
        let profiles = corpus::load_profiles(self.input("profiles", &self.profiles)?, &self.rating_scale())?;
        let contexts = corpus::load_contexts(self.input("contexts", &self.contexts)?, &ContextSchema::default())?;
        let (corpus, report) = Corpus::new(venues, profiles, contexts, self.load_qrels()?)?;
        if report != Default::default() {
            info!("dangling references: {report:?}");
        }
        Ok(corpus)
    }
}

/// Counts reported by the profile-building stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BuildSummary {
    pub venues: usize,
    pub zero_vector_venues: usize,
    pub tokens: usize,
    pub oov_tokens: usize,
    pub users: usize,
    pub skipped_ratings: usize,
    pub term_sets: Vec<(String, String, usize)>,
}

impl BuildSummary {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "venues\t{}", self.venues);
        let _ = writeln!(s, "zero_vector_venues\t{}", self.zero_vector_venues);
        let _ = writeln!(s, "comment_tokens\t{}", self.tokens);
        let _ = writeln!(s, "oov_tokens\t{}", self.oov_tokens);
        let _ = writeln!(s, "users\t{}", self.users);
        let _ = writeln!(s, "skipped_ratings\t{}", self.skipped_ratings);
        for (group, dim, n) in &self.term_sets {
            let _ = writeln!(s, "terms\t{group}/{dim}\t{n}");
        }
        s
    }
}

/// Cache identifier for a dimension, e.g. "duration/day_time".
pub fn dimension_id(group: &str, dimension: &str) -> String {
    format!("{group}/{}", dimension.replace(' ', "_"))
}

/// Venue, user and context/gender models built from an embedding store.
pub fn build_models(
    store: &EmbeddingStore,
    pre: &Preprocessor,
    corpus: &Corpus,
    cfg: &PipelineConfig,
) -> Result<(FeatureModels, BuildSummary)> {
    let venue_vectors = preference::venue_vectors(store, &corpus.venues);
    let mut summary = BuildSummary {
        venues: corpus.venues.len(),
        zero_vector_venues: venue_vectors.values().filter(|v| v.is_zero()).count(),
        tokens: corpus.venues.iter().map(|v| v.tokens().count()).sum(),
        oov_tokens: corpus.venues.iter().map(|v| preference::oov_tokens(store, v)).sum(),
        users: corpus.profiles.len(),
        ..Default::default()
    };
    let profile_cfg = cfg.profile_config();
    let mut users = BTreeMap::new();
    for p in &corpus.profiles {
        let u = preference::user_profile_vectors(store.dim(), &venue_vectors, p, &profile_cfg)?;
        summary.skipped_ratings += u.skipped;
        users.insert(p.user_id.clone(), u);
    }
    let contexts = ContextModels::build(store, pre, &ContextSchema::default(), cfg.k)?;
    summary.term_sets = contexts
        .term_sets
        .iter()
        .map(|t| (t.aspect.clone(), t.dimension.clone(), t.terms.len()))
        .collect();
    Ok((
        FeatureModels {
            dim: store.dim(),
            venue_vectors,
            users,
            contexts,
        },
        summary,
    ))
}

fn write_store(path: &Path, dim: usize, entries: Vec<(String, Vec<f64>)>) -> Result<()> {
    let store = EmbeddingStore::from_entries(dim, entries)?;
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    store.write_text(&mut w, true)?;
    w.flush().map_err(io_err(path))
}

/// Persist models as text embedding files plus the expanded term sets.
pub fn save_models(models: &FeatureModels, out_dir: &Path) -> Result<()> {
    let dim = models.dim;
    write_store(
        &out_dir.join(VENUE_VECTORS),
        dim,
        models
            .venue_vectors
            .iter()
            .map(|(id, v)| (id.clone(), v.values().to_vec()))
            .collect(),
    )?;
    write_store(
        &out_dir.join(USER_VECTORS),
        dim,
        models
            .users
            .iter()
            .flat_map(|(id, u)| {
                [
                    (format!("{id}/pos"), u.positive.values().to_vec()),
                    (format!("{id}/neg"), u.negative.values().to_vec()),
                ]
            })
            .collect(),
    )?;
    let mut ctx: Vec<(String, Vec<f64>)> = models
        .contexts
        .contexts
        .iter()
        .map(|((a, d), v)| (dimension_id(a.as_str(), d), v.values().to_vec()))
        .collect();
    for (g, v) in &models.contexts.genders {
        ctx.push((dimension_id(preference::GENDER_GROUP, g.as_str()), v.values().to_vec()));
    }
    write_store(&out_dir.join(CONTEXT_VECTORS), dim, ctx)?;

    let path = out_dir.join(TERM_SETS);
    let mut s = String::from("group\tdimension\tk\tterms\n");
    for t in &models.contexts.term_sets {
        let terms: Vec<&str> = t.terms.iter().map(String::as_str).collect();
        let _ = writeln!(s, "{}\t{}\t{}\t{}", t.aspect, t.dimension, t.k, terms.join(" "));
    }
    fs::write(&path, s).map_err(io_err(&path))
}

fn parse_term_sets(path: &Path) -> Result<Vec<ContextTermSet>> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let bad = || PipelineError::Config(format!("{} line {}: malformed term set", path.display(), i + 1));
        let [aspect, dimension, k, terms] = f.as_slice() else {
            return Err(bad());
        };
        out.push(ContextTermSet {
            aspect: aspect.to_string(),
            dimension: dimension.to_string(),
            k: k.parse().map_err(|_| bad())?,
            terms: terms.split_whitespace().map(String::from).collect(),
        });
    }
    Ok(out)
}

/// Inverse of [`save_models`]. User gender and thresholds come from `corpus`
/// and `cfg`, which the caches do not store.
pub fn load_models(out_dir: &Path, corpus: &Corpus, cfg: &PipelineConfig) -> Result<FeatureModels> {
    let need = |name: &str| {
        let p = out_dir.join(name);
        if p.exists() {
            Ok(p)
        } else {
            Err(PipelineError::Missing {
                what: "artifact (run `build-profiles` first)".into(),
                path: p,
            })
        }
    };
    let venues = EmbeddingStore::load(need(VENUE_VECTORS)?, EmbeddingFormat::Text)?;
    let users_store = EmbeddingStore::load(need(USER_VECTORS)?, EmbeddingFormat::Text)?;
    let ctx_store = EmbeddingStore::load(need(CONTEXT_VECTORS)?, EmbeddingFormat::Text)?;
    let dim = venues.dim();
    for s in [&users_store, &ctx_store] {
        if !s.is_empty() && s.dim() != dim {
            return Err(EmbeddingError::DimensionMismatch {
                left: dim,
                right: s.dim(),
            }
            .into());
        }
    }
    let venue_vectors = venues
        .iter()
        .map(|(t, v)| (t.to_string(), Vector::new(v.to_vec())))
        .collect();

    let mut users = BTreeMap::new();
    for p in &corpus.profiles {
        let get = |side: &str| {
            users_store
                .vector_of(&format!("{}/{side}", p.user_id))
                .map(|v| Vector::new(v.to_vec()))
                .ok_or_else(|| PipelineError::Config(format!("user '{}' missing from {USER_VECTORS}; rebuild profiles", p.user_id)))
        };
        users.insert(
            p.user_id.clone(),
            UserVenueProfile {
                user_id: p.user_id.clone(),
                gender: p.gender,
                positive: get("pos")?,
                negative: get("neg")?,
                pos_threshold: cfg.pos_threshold,
                neg_threshold: cfg.neg_threshold,
                skipped: 0,
            },
        );
    }

    let mut contexts = ContextModels {
        term_sets: parse_term_sets(&need(TERM_SETS)?)?,
        ..Default::default()
    };
    let schema = ContextSchema::default();
    for (aspect, dims) in schema.aspects() {
        for d in dims {
            if let Some(v) = ctx_store.vector_of(&dimension_id(aspect.as_str(), d)) {
                contexts.contexts.insert((aspect, d.clone()), Vector::new(v.to_vec()));
            }
        }
    }
    for g in [Gender::Male, Gender::Female] {
        if let Some(v) = ctx_store.vector_of(&dimension_id(preference::GENDER_GROUP, g.as_str())) {
            contexts.genders.insert(g, Vector::new(v.to_vec()));
        }
    }
    Ok(FeatureModels {
        dim,
        venue_vectors,
        users,
        contexts,
    })
}

pub fn cmd_build_profiles(cfg: &PipelineConfig) -> Result<BuildSummary> {
    cfg.validate()?;
    let pre = cfg.preprocessor()?;
    let corpus = cfg.load_corpus(&pre)?;
    let store = EmbeddingStore::load(cfg.input("embeddings", &cfg.embeddings)?, cfg.embedding_format)?;
    cfg.prepare_out_dir()?;
    let (models, summary) = build_models(&store, &pre, &corpus, cfg)?;
    save_models(&models, &cfg.out_dir)?;
    let p = cfg.out(PROFILE_SUMMARY);
    fs::write(&p, summary.to_text()).map_err(io_err(&p))?;
    Ok(summary)
}

fn extract_options(cfg: &PipelineConfig) -> ExtractOptions {
    ExtractOptions {
        exclude_unjudged: cfg.exclude_unjudged,
        minmax_per_topic: cfg.minmax_per_topic,
    }
}

pub fn cmd_extract(cfg: &PipelineConfig) -> Result<Vec<FeatureVector>> {
    cfg.validate()?;
    let pre = cfg.preprocessor()?;
    let corpus = cfg.load_corpus(&pre)?;
    let models = load_models(&cfg.out_dir, &corpus, cfg)?;
    cfg.prepare_out_dir()?;
    let rows = features::extract_all(&corpus, &models, Some(&corpus.qrels), extract_options(cfg));
    features::save_features(cfg.out(FEATURES), &rows)?;
    Ok(rows)
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<Model> {
    cfg.validate()?;
    let rows = features::load_features(cfg.artifact(FEATURES, "extract")?)?;
    cfg.prepare_out_dir()?;
    let model = ltr::train(&rows, &cfg.train_config())?;
    model.save(cfg.out(MODEL))?;
    Ok(model)
}

pub fn cmd_rank(cfg: &PipelineConfig) -> Result<RankedRun> {
    cfg.validate()?;
    let rows = features::load_features(cfg.artifact(FEATURES, "extract")?)?;
    let model = Model::load(cfg.artifact(MODEL, "train")?)?;
    cfg.prepare_out_dir()?;
    let run = evaluation::build_run(&rows, &model, RUN_DEPTH, &cfg.run_tag);
    evaluation::save_run(cfg.out(RUN), &run)?;
    Ok(run)
}

pub fn cmd_eval(cfg: &PipelineConfig) -> Result<evaluation::MetricReport> {
    cfg.validate()?;
    let run = evaluation::load_run(cfg.artifact(RUN, "rank")?)?;
    let qrels = corpus::load_qrels(cfg.input("qrels", &cfg.qrels)?)?;
    if !run.topics.keys().any(|t| qrels.topic(t).is_some()) {
        return Err(PipelineError::NoOverlap);
    }
    cfg.prepare_out_dir()?;
    let report = evaluation::evaluate(&run, &qrels, &cfg.eval_config())?;
    let p = cfg.out(METRICS);
    fs::write(&p, report.to_text(cfg.eval_config().k)).map_err(io_err(&p))?;
    Ok(report)
}

pub fn cmd_ablate(cfg: &PipelineConfig) -> Result<evaluation::AblationReport> {
    cfg.validate()?;
    let rows = features::load_features(cfg.artifact(FEATURES, "extract")?)?;
    let qrels = corpus::load_qrels(cfg.input("qrels", &cfg.qrels)?)?;
    cfg.prepare_out_dir()?;
    let report = evaluation::ablation(&rows, &qrels, &cfg.train_config(), &cfg.eval_config(), cfg.metric)?;
    let p = cfg.out(ABLATION);
    let mut w = BufWriter::new(File::create(&p).map_err(io_err(&p))?);
    report.write_tsv(&mut w).map_err(io_err(&p))?;
    w.flush().map_err(io_err(&p))?;
    Ok(report)
}

/// Outcome of a full run.
#[derive(Debug, Clone)]
pub struct PipelineOutcome {
    pub build: BuildSummary,
    pub rows: usize,
    pub metrics: evaluation::MetricReport,
    pub ablation: evaluation::AblationReport,
}

pub fn cmd_pipeline(cfg: &PipelineConfig) -> Result<PipelineOutcome> {
    let build = cmd_build_profiles(cfg)?;
    let rows = cmd_extract(cfg)?.len();
    cmd_train(cfg)?;
    cmd_rank(cfg)?;
    let metrics = cmd_eval(cfg)?;
    let ablation = cmd_ablate(cfg)?;
    Ok(PipelineOutcome {
        build,
        rows,
        metrics,
        ablation,
    })
}

/// Parse a dimension cache id back into its aspect and schema dimension.
pub fn parse_dimension_id(id: &str) -> Option<(Aspect, String)> {
    let (a, d) = id.split_once('/')?;
    let aspect: Aspect = a.parse().ok()?;
    Some((aspect, d.replace('_', " ")))
}
