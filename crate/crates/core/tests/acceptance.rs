//! Acceptance criteria 1-10. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use venuerec::corpus::{Aspect, Comment, ContextSchema, Gender, Preprocessor, Qrels, Rating, UserProfile, Venue};
use venuerec::embedding::{EmbeddingFormat, EmbeddingStore};
use venuerec::evaluation::{self, paired_t_test, rank_topic, EvalConfig, RankedRun};
use venuerec::features::{self, NUM_FEATURES};
use venuerec::ltr::{self, Learner, MartParams, Query, TrainConfig};
use venuerec::pipeline::{self, PipelineConfig};
use venuerec::preference::{self, NegativeWeighting, ProfileConfig};
use venuerec::synthetic::{self, SyntheticConfig};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn data_dir() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data"))
}

fn within(limit: Duration, elapsed: Duration) -> Outcome {
    if elapsed <= limit {
        Ok(String::new())
    } else {
        Err(format!("took {elapsed:?}, limit {limit:?}"))
    }
}

// 1 ------------------------------------------------------------------------

const FIXTURE_TERMS: [&str; 5] = ["coffe", "beach", "museum", "pub", "park"];

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let bits: [[u32; 4]; 5] = [
        [0x3e000000, 0xbf000000, 0x3f400000, 0x3f800000],
        [0x3eaaaa9f, 0x3dcccccd, 0xbe4ccccd, 0x0],
        [0xbfc00000, 0x40100000, 0x3d800000, 0xbd000000],
        [0x3a83126f, 0xc0e00000, 0x40600000, 0x3e4ccccd],
        [0, 0, 0, 0],
    ];
    let decimals: [[f64; 4]; 5] = [
        [0.125, -0.5, 0.75, 1.0],
        [0.333333, 0.1, -0.2, 0.0],
        [-1.5, 2.25, 0.0625, -0.03125],
        [0.001, -7.0, 3.5, 0.2],
        [0.0; 4],
    ];
    let bin_path = data_dir().join("emb5.bin");
    let bin = EmbeddingStore::load(&bin_path, EmbeddingFormat::Binary).map_err(|e| e.to_string())?;
    let text = EmbeddingStore::load(data_dir().join("emb5.txt"), EmbeddingFormat::Text).map_err(|e| e.to_string())?;
    ensure!(bin.len() == 5 && text.len() == 5 && bin.dim() == 4, "wrong shape");
    for (i, term) in FIXTURE_TERMS.iter().enumerate() {
        let b = bin.vector_of(term).ok_or(format!("{term} missing from binary"))?;
        for (j, &x) in b.iter().enumerate() {
            ensure!(
                (x as f32).to_bits() == bits[i][j] && x == f32::from_bits(bits[i][j]) as f64,
                "binary {term}[{j}] = {x} not bit-exact"
            );
        }
        let t = text.vector_of(term).ok_or(format!("{term} missing from text"))?;
        for (j, &x) in t.iter().enumerate() {
            ensure!((x - decimals[i][j]).abs() <= 1e-6, "text {term}[{j}] = {x}");
        }
    }
    let mut out = Vec::new();
    bin.write_binary(&mut out).map_err(|e| e.to_string())?;
    ensure!(out == fs::read(&bin_path).unwrap(), "binary re-serialization differs");
    within(Duration::from_secs(1), start.elapsed())?;
    Ok("5 terms bit-exact, text within 1e-6, binary bytes identical".into())
}

// 2 ------------------------------------------------------------------------

fn cos(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        (dot / (na * nb)).clamp(-1.0, 1.0)
    }
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Brute-force term expansion over an explicit term -> vector table.
fn brute_expand(table: &BTreeMap<String, Vec<f64>>, seeds: &[(&str, Vec<&str>)], dim_index: usize, k: usize) -> BTreeSet<String> {
    let seed_vec = |toks: &[&str]| {
        let mut v = [0.0; 4];
        for t in toks {
            for (a, b) in v.iter_mut().zip(&table[*t]) {
                *a += b;
            }
        }
        v.iter().map(|x| x / toks.len() as f64).collect::<Vec<f64>>()
    };
    let exclude: HashSet<&str> = seeds.iter().flat_map(|(_, t)| t.iter().copied()).collect();
    let own = seed_vec(&seeds[dim_index].1);
    let mut out = BTreeSet::new();
    for (i, (_, toks)) in seeds.iter().enumerate() {
        if i == dim_index {
            continue;
        }
        let sib = seed_vec(toks);
        let q: Vec<f64> = own.iter().zip(&sib).map(|(a, b)| a - b).collect();
        let mut scored: Vec<(f64, &String)> = table
            .iter()
            .filter(|(t, _)| !exclude.contains(t.as_str()))
            .map(|(t, v)| (cos(&q, v), t))
            .collect();
        scored.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        out.extend(scored.into_iter().take(k).map(|(_, t)| t.clone()));
    }
    out
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let pre = Preprocessor::default();
    let schema = ContextSchema::default();
    let names = ["dai", "time", "night", "weekend", "male", "femal", "bar", "hike", "tour", "cafe"];
    let duration_seeds: Vec<(&str, Vec<&str>)> = vec![
        ("day time", vec!["dai", "time"]),
        ("night time", vec!["night", "time"]),
        ("weekend", vec!["weekend"]),
    ];
    let gender_seeds: Vec<(&str, Vec<&str>)> = vec![("male", vec!["male"]), ("female", vec!["femal"])];
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for fixture in 0..200 {
        let table: BTreeMap<String, Vec<f64>> = names
            .iter()
            .map(|n| (n.to_string(), (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect()))
            .collect();
        let store = EmbeddingStore::from_entries(4, table.iter().map(|(t, v)| (t.clone(), v.clone()))).unwrap();
        let vec_of = |t: &str| table.get(t).cloned();

        // venue vector
        let words: Vec<&str> = (0..rng.gen_range(1..12)).map(|_| names[rng.gen_range(0..names.len())]).collect();
        let raw = format!("{} unknownword", words.join(" "));
        let venue = Venue {
            id: "v".into(),
            name: "v".into(),
            stats: Default::default(),
            comments: vec![Comment::new(raw, &pre)],
        };
        let mut expect = vec![0.0; 4];
        for t in venue.tokens() {
            if let Some(v) = vec_of(t) {
                for (a, b) in expect.iter_mut().zip(v) {
                    *a += b;
                }
            }
        }
        let got = preference::venue_vector(&store, &venue);
        ensure!(close(got.vector.values(), &expect, 1e-9), "fixture {fixture}: venue vector");

        // user profile vectors over three rated venues
        let mut vv = BTreeMap::new();
        let mut ratings = Vec::new();
        let mut pos = vec![0.0; 4];
        let mut neg = vec![0.0; 4];
        for j in 0..3 {
            let v: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let r: i64 = rng.gen_range(0..=4);
            let target = if r >= 4 { Some(&mut pos) } else if r <= 3 { Some(&mut neg) } else { None };
            if let Some(t) = target {
                for (a, b) in t.iter_mut().zip(&v) {
                    *a += r as f64 * b;
                }
            }
            vv.insert(format!("r{j}"), venuerec::embedding::Vector::new(v));
            ratings.push(Rating {
                venue_id: format!("r{j}"),
                rating: r,
            });
        }
        let profile = UserProfile {
            user_id: "u".into(),
            gender: Gender::Female,
            ratings,
        };
        let cfg = ProfileConfig {
            negative_weighting: NegativeWeighting::Literal,
            ..Default::default()
        };
        let up = preference::user_profile_vectors(4, &vv, &profile, &cfg).map_err(|e| e.to_string())?;
        ensure!(close(up.positive.values(), &pos, 1e-9), "fixture {fixture}: positive profile");
        ensure!(close(up.negative.values(), &neg, 1e-9), "fixture {fixture}: negative profile");

        // context terms and vector
        let k = rng.gen_range(1..=5);
        let d = rng.gen_range(0..3);
        let ts = preference::context_terms(&store, &pre, &schema, Aspect::Duration, duration_seeds[d].0, k)
            .map_err(|e| e.to_string())?;
        let expect_terms = brute_expand(&table, &duration_seeds, d, k);
        ensure!(ts.terms == expect_terms, "fixture {fixture}: context terms {:?} vs {:?}", ts.terms, expect_terms);
        let mut cv = vec![0.0; 4];
        for t in &expect_terms {
            for (a, b) in cv.iter_mut().zip(&table[t]) {
                *a += b;
            }
        }
        let got = preference::context_vector(&store, &ts);
        ensure!(close(got.vector.values(), &cv, 1e-9), "fixture {fixture}: context vector");

        // gender vector
        let g = if fixture % 2 == 0 { Gender::Male } else { Gender::Female };
        let (gts, gv) = preference::gender_vector(&store, &pre, g, k).map_err(|e| e.to_string())?;
        let gi = if g == Gender::Male { 0 } else { 1 };
        let expect_terms = brute_expand(&table, &gender_seeds, gi, k);
        ensure!(gts.terms == expect_terms, "fixture {fixture}: gender terms");
        let mut gexp = vec![0.0; 4];
        for t in &expect_terms {
            for (a, b) in gexp.iter_mut().zip(&table[t]) {
                *a += b;
            }
        }
        ensure!(close(gv.vector.values(), &gexp, 1e-9), "fixture {fixture}: gender vector");
    }
    within(Duration::from_secs(5), start.elapsed())?;
    Ok("200 fixtures agree with brute force within 1e-9".into())
}

// 3 ------------------------------------------------------------------------

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut entries: Vec<(String, Vec<f64>)> = Vec::new();
    for i in 0..1000 {
        let v: Vec<f64> = if i % 10 == 9 {
            // exact duplicates of an earlier vector to force ties
            entries[i - 5].1.clone()
        } else if i % 10 == 8 {
            entries[i - 3].1.iter().map(|x| x * 2.0).collect()
        } else {
            (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        entries.push((format!("w{:04}", (i * 7919) % 1000), v));
    }
    let store = EmbeddingStore::from_entries(16, entries.clone()).unwrap();
    let mut ties_seen = 0;
    for q in 0..100 {
        let query: Vec<f64> = if q % 4 == 0 {
            entries[rng.gen_range(0..1000)].1.clone()
        } else {
            (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        let k = rng.gen_range(1..=25);
        let exclude: HashSet<String> = if q % 3 == 0 {
            (0..5).map(|_| entries[rng.gen_range(0..1000)].0.clone()).collect()
        } else {
            HashSet::new()
        };
        let got = store.similar_k(&query, k, &exclude).map_err(|e| e.to_string())?;
        let mut all: Vec<(f64, &str)> = entries
            .iter()
            .filter(|(t, _)| !exclude.contains(t))
            .map(|(t, v)| (cos(&query, v), t.as_str()))
            .collect();
        all.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(b.1)));
        let expect: Vec<&str> = all.iter().take(k).map(|x| x.1).collect();
        let got_terms: Vec<&str> = got.iter().map(|s| s.term.as_str()).collect();
        ensure!(got_terms == expect, "query {q}: {got_terms:?} vs {expect:?}");
        ties_seen += all.windows(2).take(k).filter(|w| w[0].0 == w[1].0).count();
    }
    ensure!(ties_seen > 0, "fixture produced no ties");
    within(Duration::from_secs(5), start.elapsed())?;
    Ok(format!("100 queries identical to exhaustive scan ({ties_seen} ties in top-k)"))
}

// 4 ------------------------------------------------------------------------

fn run_through_rank(cfg: &PipelineConfig) -> Result<(), String> {
    pipeline::cmd_build_profiles(cfg).map_err(|e| e.to_string())?;
    pipeline::cmd_extract(cfg).map_err(|e| e.to_string())?;
    pipeline::cmd_train(cfg).map_err(|e| e.to_string())?;
    pipeline::cmd_rank(cfg).map_err(|e| e.to_string())?;
    Ok(())
}

fn criterion_4() -> Outcome {
    let pre = Preprocessor::default();
    let data = synthetic::generate(&SyntheticConfig::default(), &pre);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let base_cfg = data.write_to_dir(&tmp.path().join("base"), EmbeddingFormat::Text).map_err(|e| e.to_string())?;
    run_through_rank(&base_cfg)?;
    let base_rows = features::load_features(base_cfg.out(pipeline::FEATURES)).map_err(|e| e.to_string())?;
    let base_run = fs::read(base_cfg.out(pipeline::RUN)).unwrap();
    let mut worst: f64 = 0.0;
    for c in [0.01, 3.0, 1e4] {
        let mut scaled = data.clone();
        scaled.store = data.store.scaled(c);
        let cfg = scaled
            .write_to_dir(&tmp.path().join(format!("c{c}")), EmbeddingFormat::Text)
            .map_err(|e| e.to_string())?;
        run_through_rank(&cfg)?;
        let rows = features::load_features(cfg.out(pipeline::FEATURES)).map_err(|e| e.to_string())?;
        ensure!(rows.len() == base_rows.len(), "c={c}: row count differs");
        for (a, b) in base_rows.iter().zip(&rows) {
            for f in 6..NUM_FEATURES {
                let d = (a.features[f] - b.features[f]).abs();
                worst = worst.max(d);
                ensure!(d <= 1e-12, "c={c}: {}/{} f{} differs by {d}", a.topic_id, a.venue_id, f + 1);
            }
        }
        ensure!(fs::read(cfg.out(pipeline::RUN)).unwrap() == base_run, "c={c}: run file differs");
    }
    Ok(format!("max |delta f7..f13| = {worst:e}; run files byte-identical"))
}

// 5 ------------------------------------------------------------------------

fn criterion_5() -> Outcome {
    let cfg = EvalConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut fixtures: Vec<(Vec<i64>, f64, f64)> = vec![
        (vec![0, 0, 1], 1.0 / 5.0, 1.0 / 3.0),
        (vec![1, 1, 0, 0, 0], 0.4, 1.0),
        (vec![0, 0, 0, 0, 0, 1], 0.0, 1.0 / 6.0),
        (vec![2, 1, 3, 1, 1, 0], 1.0, 1.0),
        (vec![1, 0, 1], 0.4, 1.0),
    ];
    while fixtures.len() < 50 {
        let n = rng.gen_range(1..15);
        let grades: Vec<i64> = (0..n).map(|_| if rng.gen_bool(0.3) { rng.gen_range(1..4) } else { 0 }).collect();
        if !grades.iter().any(|&g| g > 0) {
            continue;
        }
        // hand rule: hits in the first five over five, one over the first hit's rank
        let hits = grades.iter().take(5).filter(|&&g| g > 0).count();
        let first = grades.iter().position(|&g| g > 0).unwrap() + 1;
        fixtures.push((grades, hits as f64 / 5.0, 1.0 / first as f64));
    }
    for (i, (grades, p5, rr)) in fixtures.iter().enumerate() {
        let scored: Vec<(String, f64)> = grades
            .iter()
            .enumerate()
            .map(|(j, _)| (format!("v{j:02}"), (grades.len() - j) as f64))
            .collect();
        let mut run = RankedRun::new("fixture");
        run.topics.insert("t".into(), rank_topic(&scored, 50));
        let mut qrels = Qrels::new();
        for (j, g) in grades.iter().enumerate() {
            // leave some non-relevant venues unjudged
            if *g > 0 || j % 2 == 0 {
                qrels.insert("t", &format!("v{j:02}"), *g);
            }
        }
        let r = evaluation::evaluate(&run, &qrels, &cfg).map_err(|e| e.to_string())?;
        ensure!(r.mean_p5 == *p5, "fixture {i}: P@5 {} vs {p5}", r.mean_p5);
        ensure!(r.mrr == *rr, "fixture {i}: RR {} vs {rr}", r.mrr);
    }
    Ok("50 fixtures exact, including RR=1/3 and P@5=0.4".into())
}

// 6 ------------------------------------------------------------------------

fn criterion_6() -> Outcome {
    let r = paired_t_test(&[1.0, 2.0, 3.0], &[0.0, 0.0, 0.0]).map_err(|e| e.to_string())?;
    ensure!((r.t_statistic - 3.4641).abs() <= 1e-4, "t = {}", r.t_statistic);
    ensure!((r.p_value - 0.0742).abs() <= 1e-3, "p = {}", r.p_value);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..500 {
        let n = rng.gen_range(2..30);
        let a: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let ab = paired_t_test(&a, &b).map_err(|e| e.to_string())?;
        let ba = paired_t_test(&b, &a).map_err(|e| e.to_string())?;
        ensure!(ab.t_statistic == -ba.t_statistic && ab.p_value == ba.p_value, "antisymmetry broken");
    }
    Ok(format!("t = {:.4}, p = {:.4}; antisymmetric on 500 samples", r.t_statistic, r.p_value))
}

// 7 ------------------------------------------------------------------------

fn separable_queries(topics: usize, seed: u64) -> Vec<Query> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..topics)
        .map(|t| {
            let mut q = Query {
                topic_id: format!("t{t:02}"),
                venue_ids: vec![],
                labels: vec![],
                features: vec![],
            };
            for v in 0..12 {
                let rel = v < 5;
                let mut x: [f64; NUM_FEATURES] = std::array::from_fn(|_| rng.gen_range(0.0..1.0));
                x[6] = if rel { rng.gen_range(0.6..1.0) } else { rng.gen_range(0.0..0.4) };
                q.venue_ids.push(format!("v{v:02}"));
                q.labels.push(rel as i64);
                q.features.push(x);
            }
            q
        })
        .collect()
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let queries = separable_queries(20, 7);
    let cfg = TrainConfig {
        learner: Learner::CoordinateAscent,
        ..Default::default()
    };
    let (train, valid) = ltr::split_train_validation(&queries, cfg.split_fraction, cfg.seed).map_err(|e| e.to_string())?;
    let (model, trace) = ltr::train_coordinate_ascent_traced(&train, &valid, &cfg).map_err(|e| e.to_string())?;
    let train_p5 = trace.train_metric[trace.chosen];
    ensure!(train_p5 == 1.0, "training P@5 = {train_p5}");
    let w7 = model.weights[6].abs();
    let next = model
        .weights
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != 6)
        .map(|(_, w)| w.abs())
        .fold(0.0, f64::max);
    ensure!(w7 > next, "|w7| = {w7} not dominant (next {next})");
    within(Duration::from_secs(10), start.elapsed())?;
    Ok(format!("training P@5 = 1.0, |w7| = {w7:.3} vs next {next:.3}"))
}

// 8 ------------------------------------------------------------------------

fn mart_config(trees: usize) -> TrainConfig {
    TrainConfig {
        learner: Learner::Mart,
        mart: MartParams {
            trees,
            patience: None,
            ..Default::default()
        },
        ..Default::default()
    }
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let q = Query {
        topic_id: "r".into(),
        venue_ids: (0..200).map(|i| format!("v{i:03}")).collect(),
        labels: (0..200).map(|_| rng.gen_range(0..3)).collect(),
        features: (0..200).map(|_| std::array::from_fn(|_| rng.gen_range(0.0..1.0))).collect(),
    };
    let (_, trace) = ltr::train_mart_traced(&[q], &[], &mart_config(200)).map_err(|e| e.to_string())?;
    ensure!(trace.train_mse.len() == 200, "{} stages", trace.train_mse.len());
    for (i, w) in trace.train_mse.windows(2).enumerate() {
        ensure!(w[1] <= w[0], "MSE rose at stage {}: {} -> {}", i + 2, w[0], w[1]);
    }

    let toy = Query {
        topic_id: "toy".into(),
        venue_ids: (0..8).map(|i| format!("v{i}")).collect(),
        labels: vec![0, 1, 2, 3, 0, 1, 2, 3],
        features: (0..8)
            .map(|i| {
                let mut x = [0.0; NUM_FEATURES];
                x[0] = i as f64;
                x[1] = (i % 3) as f64;
                x
            })
            .collect(),
    };
    let (model, trace) = ltr::train_mart_traced(std::slice::from_ref(&toy), &[], &mart_config(100)).map_err(|e| e.to_string())?;
    let mse: f64 = toy
        .features
        .iter()
        .zip(&toy.labels)
        .map(|(x, &y)| (model.predict(x) - y as f64).powi(2))
        .sum::<f64>()
        / 8.0;
    let rmse = mse.sqrt();
    ensure!(rmse < 0.01, "toy RMSE {rmse}");
    ensure!((trace.train_mse.last().unwrap() - mse).abs() < 1e-12, "trace disagrees with predictions");
    within(Duration::from_secs(10), start.elapsed())?;
    Ok(format!("MSE non-increasing over 200 stages, toy RMSE = {rmse:.2e}"))
}

// 9 ------------------------------------------------------------------------

fn criterion_9() -> Outcome {
    let start = Instant::now();
    let pre = Preprocessor::default();
    let data = synthetic::generate(&SyntheticConfig::default(), &pre);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = data.write_to_dir(tmp.path(), EmbeddingFormat::Text).map_err(|e| e.to_string())?;
    ensure!(cfg.seed == 42, "default seed is {}", cfg.seed);
    let out = pipeline::cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
    let p5 = out.metrics.mean_p5;
    ensure!(out.metrics.per_topic.len() == 20, "{} topics evaluated", out.metrics.per_topic.len());
    ensure!(p5 >= 0.9, "mean P@5 = {p5}");
    let rows = &out.ablation.rows;
    let uv_pos = rows[6].delta_percent;
    for r in rows.iter().filter(|r| r.feature != 7) {
        ensure!(r.delta_percent > uv_pos, "{} drop {:.2}% >= uv_pos {uv_pos:.2}%", r.feature_name, r.delta_percent);
    }
    for r in &rows[8..12] {
        ensure!(r.delta_percent < 0.0, "{} delta {:.2}% is not a drop", r.feature_name, r.delta_percent);
    }
    within(Duration::from_secs(60), start.elapsed())?;
    let cv: Vec<String> = rows[8..12].iter().map(|r| format!("{:.1}", r.delta_percent)).collect();
    Ok(format!("P@5 = {p5:.4}; uv_pos {uv_pos:.1}%; cv {}", cv.join("/")))
}

// 10 -----------------------------------------------------------------------

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn criterion_10() -> Outcome {
    let pre = Preprocessor::default();
    let data = synthetic::generate(&SyntheticConfig::default(), &pre);
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = data.write_to_dir(tmp.path(), EmbeddingFormat::Binary).map_err(|e| e.to_string())?;
    pipeline::cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
    let first = snapshot(&cfg.out_dir);
    fs::remove_dir_all(&cfg.out_dir).unwrap();
    pipeline::cmd_pipeline(&cfg).map_err(|e| e.to_string())?;
    let second = snapshot(&cfg.out_dir);
    for name in [pipeline::FEATURES, pipeline::MODEL, pipeline::RUN, pipeline::METRICS, pipeline::ABLATION] {
        ensure!(first.contains_key(name), "{name} not produced");
    }
    ensure!(first.keys().eq(second.keys()), "different file sets");
    for (name, bytes) in &first {
        ensure!(second[name] == *bytes, "{name} differs between runs");
    }
    Ok(format!("{} output files byte-identical", first.len()))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("embedding parser fixtures", criterion_1),
        ("preference model oracles", criterion_2),
        ("similar_k exactness", criterion_3),
        ("scale invariance", criterion_4),
        ("P@5 / MRR fixtures", criterion_5),
        ("paired t-test", criterion_6),
        ("coordinate ascent planted f7", criterion_7),
        ("MART convergence", criterion_8),
        ("end-to-end planted signal", criterion_9),
        ("determinism", criterion_10),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{secs:.2}s]", i + 1),
            Err(reason) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {reason} [{secs:.2}s]", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
