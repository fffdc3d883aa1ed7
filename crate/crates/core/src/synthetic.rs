//! Seeded synthetic corpus with a planted signal, used for smoke tests and
//! end-to-end checks.
//!
//! Every seed token gets its own basis direction. Each contextual dimension
//! owns a cluster of `cluster_size` terms around the normalized difference
//! between its seed vector and the mean of its siblings' seeds, so the
//! nearest neighbours of any seed subtraction are exactly that cluster. Users
//! like venues from one "interest" cluster. Per topic the candidates are
//!
//! * relevant: the user's interest and every chosen context dimension,
//! * interest decoys: every chosen dimension but another interest,
//! * aspect decoys: the user's interest but a sibling dimension in one aspect,
//! * random venues.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    self, Aspect, Comment, ContextPair, ContextSchema, Gender, Preprocessor, Qrels, Rating, UserProfile, Venue,
    VenueStats,
};
use crate::embedding::{EmbeddingFormat, EmbeddingStore};
use crate::pipeline::{PipelineConfig, PipelineError};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticConfig {
    pub topics: usize,
    pub seed: u64,
    pub interests: usize,
    pub cluster_size: usize,
    pub filler_terms: usize,
    /// half-width of the uniform per-component noise added to every term
    pub noise: f64,
    pub relevant: usize,
    pub interest_decoys: usize,
    pub aspect_decoys: usize,
    pub random_venues: usize,
    pub liked_history: usize,
    pub disliked_history: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            topics: 20,
            seed: 42,
            interests: 8,
            cluster_size: 10,
            filler_terms: 40,
            noise: 0.03,
            relevant: 5,
            interest_decoys: 10,
            aspect_decoys: 2,
            random_venues: 5,
            liked_history: 4,
            disliked_history: 3,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub store: EmbeddingStore,
    pub venues: Vec<Venue>,
    pub profiles: Vec<UserProfile>,
    pub contexts: Vec<ContextPair>,
    pub qrels: Qrels,
    /// planted term cluster of every contextual dimension
    pub context_clusters: BTreeMap<(Aspect, String), Vec<String>>,
}

struct Vocab {
    interest: Vec<Vec<String>>,
    context: BTreeMap<(Aspect, String), Vec<String>>,
    filler: Vec<String>,
}

/// Pronounceable words that pass through preprocessing unchanged.
fn word_source(pre: &Preprocessor, rng: &mut ChaCha8Rng) -> impl FnMut(&mut BTreeSet<String>) -> String {
    let pre = pre.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(rng.gen());
    move |taken: &mut BTreeSet<String>| loop {
        const C: &[u8] = b"bdfgklmnprtvz";
        const V: &[u8] = b"aiou";
        let mut w = String::new();
        for _ in 0..3 {
            w.push(char::from(*C.choose(&mut rng).unwrap()));
            w.push(char::from(*V.choose(&mut rng).unwrap()));
        }
        w.push(char::from(*C.choose(&mut rng).unwrap()));
        if !taken.contains(&w) && pre.preprocess(&w) == [w.clone()] {
            taken.insert(w.clone());
            return w;
        }
    }
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
}

fn jitter(center: &[f64], noise: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    center
        .iter()
        .map(|c| c + if noise > 0.0 { rng.gen_range(-noise..noise) } else { 0.0 })
        .collect()
}

pub fn generate(cfg: &SyntheticConfig, pre: &Preprocessor) -> SyntheticData {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let schema = ContextSchema::default();

    // seed tokens of every dimension and of the gender pseudo-aspect
    let mut groups: Vec<(Option<Aspect>, Vec<String>)> = schema
        .aspects()
        .map(|(a, dims)| (Some(a), dims.to_vec()))
        .collect();
    groups.push((None, vec![Gender::Male.as_str().into(), Gender::Female.as_str().into()]));
    let mut basis: BTreeMap<String, usize> = BTreeMap::new();
    for (_, dims) in &groups {
        for d in dims {
            for t in pre.preprocess(d) {
                let n = basis.len();
                basis.entry(t).or_insert(n);
            }
        }
    }
    let interest_base = basis.len();
    let filler_base = interest_base + cfg.interests;
    let dim = filler_base + 8;
    let unit = |i: usize| {
        let mut v = vec![0.0; dim];
        v[i] = 1.0;
        v
    };
    let seed_vec = |d: &str| {
        let toks = pre.preprocess(d);
        let mut v = vec![0.0; dim];
        for t in &toks {
            v[basis[t]] += 1.0 / toks.len() as f64;
        }
        v
    };

    let mut entries: Vec<(String, Vec<f64>)> = basis.iter().map(|(t, &i)| (t.clone(), unit(i))).collect();
    let mut taken: BTreeSet<String> = basis.keys().cloned().collect();
    let mut next_word = word_source(pre, &mut rng);
    let mut vocab = Vocab {
        interest: Vec::new(),
        context: BTreeMap::new(),
        filler: Vec::new(),
    };
    let mut cluster = |center: &[f64], rng: &mut ChaCha8Rng, taken: &mut BTreeSet<String>| {
        (0..cfg.cluster_size)
            .map(|_| {
                let w = next_word(taken);
                entries.push((w.clone(), jitter(center, cfg.noise, rng)));
                w
            })
            .collect::<Vec<_>>()
    };
    for (aspect, dims) in &groups {
        for d in dims {
            let mut c = seed_vec(d);
            let siblings: Vec<&String> = dims.iter().filter(|s| *s != d).collect();
            for s in &siblings {
                for (ci, si) in c.iter_mut().zip(seed_vec(s)) {
                    *ci -= si / siblings.len() as f64;
                }
            }
            normalize(&mut c);
            let words = cluster(&c, &mut rng, &mut taken);
            if let Some(a) = aspect {
                vocab.context.insert((*a, d.clone()), words);
            }
        }
    }
    for i in 0..cfg.interests {
        let words = cluster(&unit(interest_base + i), &mut rng, &mut taken);
        vocab.interest.push(words);
    }
    for _ in 0..cfg.filler_terms {
        let mut v: Vec<f64> = vec![0.0; dim];
        for x in &mut v[filler_base..] {
            *x = rng.gen_range(-1.0..1.0);
        }
        normalize(&mut v);
        let w = next_word(&mut taken);
        entries.push((w.clone(), jitter(&v, cfg.noise, &mut rng)));
        vocab.filler.push(w);
    }
    let store = EmbeddingStore::from_entries(dim, entries).expect("synthetic store is well formed");

    let mut venues = Vec::new();
    let mut profiles = Vec::new();
    let mut contexts = Vec::new();
    let mut qrels = Qrels::new();
    let aspect_dims: Vec<(Aspect, Vec<String>)> = schema.aspects().map(|(a, d)| (a, d.to_vec())).collect();

    for t in 0..cfg.topics {
        let topic_id = format!("t{t:02}");
        let user_id = format!("u{t:02}");
        let interest = t % cfg.interests;
        let disliked: Vec<usize> = (1..=2).map(|k| (interest + k) % cfg.interests).collect();
        let others: Vec<usize> = (0..cfg.interests)
            .filter(|i| *i != interest && !disliked.contains(i))
            .collect();

        let mut ratings = Vec::new();
        for h in 0..cfg.liked_history {
            let id = format!("{user_id}_h{h}");
            venues.push(make_venue(&id, Some(interest), &[], &vocab, pre, &mut rng));
            ratings.push(Rating {
                venue_id: id,
                rating: 4,
            });
        }
        for h in 0..cfg.disliked_history {
            let id = format!("{user_id}_n{h}");
            let i = disliked[h % disliked.len()];
            venues.push(make_venue(&id, Some(i), &[], &vocab, pre, &mut rng));
            ratings.push(Rating {
                venue_id: id,
                rating: rng.gen_range(1..=3),
            });
        }
        profiles.push(UserProfile {
            user_id: user_id.clone(),
            gender: if rng.gen_bool(0.5) { Gender::Male } else { Gender::Female },
            ratings,
        });

        let chosen: BTreeMap<Aspect, String> = aspect_dims
            .iter()
            .map(|(a, dims)| (*a, dims.choose(&mut rng).unwrap().clone()))
            .collect();
        let matching: Vec<(Aspect, String)> = chosen.iter().map(|(a, d)| (*a, d.clone())).collect();
        let mut specs: Vec<(Option<usize>, Vec<(Aspect, String)>, i64)> = Vec::new();
        for _ in 0..cfg.relevant {
            specs.push((Some(interest), matching.clone(), 1));
        }
        for _ in 0..cfg.interest_decoys {
            specs.push((Some(*others.choose(&mut rng).unwrap()), matching.clone(), 0));
        }
        for (a, dims) in &aspect_dims {
            for _ in 0..cfg.aspect_decoys {
                let sibling = dims.iter().filter(|d| **d != chosen[a]).collect::<Vec<_>>();
                let mut ctx = matching.clone();
                for c in ctx.iter_mut().filter(|c| c.0 == *a) {
                    c.1 = (*sibling.choose(&mut rng).unwrap()).clone();
                }
                specs.push((Some(interest), ctx, 0));
            }
        }
        for _ in 0..cfg.random_venues {
            let ctx = aspect_dims
                .iter()
                .map(|(a, dims)| (*a, dims.choose(&mut rng).unwrap().clone()))
                .collect();
            specs.push((Some(*others.choose(&mut rng).unwrap()), ctx, 0));
        }
        specs.shuffle(&mut rng);
        let mut candidates = Vec::new();
        for (j, (i, ctx, grade)) in specs.into_iter().enumerate() {
            let id = format!("{topic_id}_v{j:02}");
            venues.push(make_venue(&id, i, &ctx, &vocab, pre, &mut rng));
            qrels.insert(&topic_id, &id, grade);
            candidates.push(id);
        }
        contexts.push(ContextPair {
            topic_id,
            user_id,
            context: chosen,
            candidates,
        });
    }
    SyntheticData {
        store,
        venues,
        profiles,
        contexts,
        qrels,
        context_clusters: vocab.context,
    }
}

fn make_venue(
    id: &str,
    interest: Option<usize>,
    ctx: &[(Aspect, String)],
    vocab: &Vocab,
    pre: &Preprocessor,
    rng: &mut ChaCha8Rng,
) -> Venue {
    let mut words: Vec<&str> = Vec::new();
    if let Some(i) = interest {
        for _ in 0..4 {
            words.push(vocab.interest[i].choose(rng).unwrap());
        }
    }
    for key in ctx {
        for _ in 0..2 {
            words.push(vocab.context[key].choose(rng).unwrap());
        }
    }
    for _ in 0..2 {
        words.push(vocab.filler.choose(rng).unwrap());
    }
    words.shuffle(rng);
    let comments = words
        .chunks(words.len().div_ceil(3))
        .map(|c| Comment::new(format!("The {}!", c.join(" and ")), pre))
        .collect();
    Venue {
        id: id.to_string(),
        name: format!("Venue {id}"),
        stats: VenueStats {
            checkins: Some(rng.gen_range(0..5000)),
            likes: Some(rng.gen_range(0..500)),
            comment_count: Some(rng.gen_range(1..200)),
            photos: Some(rng.gen_range(0..300)),
            rating_avg: Some((rng.gen_range(40..100) as f64) / 10.0),
            unique_users: Some(rng.gen_range(1..3000)),
        },
        comments,
    }
}

fn write_with<F>(path: &Path, f: F) -> Result<(), PipelineError>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let err = |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(err)?);
    f(&mut w).map_err(err)?;
    w.flush().map_err(err)
}

impl SyntheticData {
    /// Write all inputs into `dir` and return a default configuration pointing
    /// at them, with outputs under `dir/out`.
    pub fn write_to_dir(&self, dir: &Path, format: EmbeddingFormat) -> Result<PipelineConfig, PipelineError> {
        std::fs::create_dir_all(dir).map_err(|source| PipelineError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let emb = dir.join(match format {
            EmbeddingFormat::Text => "embeddings.txt",
            EmbeddingFormat::Binary => "embeddings.bin",
        });
        self.store.save(&emb, format)?;
        let venues = dir.join("venues.jsonl");
        write_with(&venues, |w| corpus::write_venues(w, &self.venues))?;
        let profiles = dir.join("profiles.jsonl");
        write_with(&profiles, |w| corpus::write_profiles(w, &self.profiles))?;
        let contexts = dir.join("contexts.jsonl");
        write_with(&contexts, |w| corpus::write_contexts(w, &self.contexts))?;
        let qrels = dir.join("qrels.txt");
        write_with(&qrels, |w| corpus::write_qrels(w, &self.qrels))?;
        Ok(PipelineConfig {
            embeddings: Some(emb),
            venues: Some(venues),
            profiles: Some(profiles),
            contexts: Some(contexts),
            qrels: Some(qrels),
            embedding_format: format,
            out_dir: dir.join("out"),
            ..Default::default()
        })
    }
}
