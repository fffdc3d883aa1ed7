//! TREC runs, P@5 / MRR, paired t-tests and single-feature ablation.

mod ablation;
mod metrics;
mod ttest;

use std::collections::{BTreeMap, HashSet};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use thiserror::Error;

use crate::features::FeatureVector;
use crate::ltr::Model;

pub use ablation::{ablation, score_with_mask, AblationReport, AblationRow};
pub use metrics::{
    evaluate, mrr, precision_at, precision_at_k, reciprocal_rank, EvalConfig, Metric,
    MetricReport, TopicMetrics,
};
pub use ttest::{paired_t_test, student_t_sf, TTestResult};

/// Maximum number of ranked venues written per topic.
pub const RUN_DEPTH: usize = 50;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error: {0}")]
    Io(#[from] io::Error),
    #[error("run line {line}: {message}")]
    Run { line: usize, message: String },
    #[error("run topic '{topic}' line {line}: {message}")]
    RunTopic {
        topic: String,
        line: usize,
        message: String,
    },
    #[error("paired samples differ in length: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("paired t-test needs at least 2 pairs, got {0}")]
    TooFewPairs(usize),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Ltr(#[from] crate::ltr::LtrError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunEntry {
    pub venue_id: String,
    pub rank: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RankedRun {
    pub tag: String,
    pub topics: BTreeMap<String, Vec<RunEntry>>,
}

impl RankedRun {
    pub fn new(tag: impl Into<String>) -> Self {
        RankedRun {
            tag: tag.into(),
            topics: BTreeMap::new(),
        }
    }
}

/// Sort by score descending, ties by venue id ascending, keep at most `depth`.
pub fn rank_topic(scored: &[(String, f64)], depth: usize) -> Vec<RunEntry> {
    if scored.is_empty() {
        warn!("ranking an empty candidate list");
    }
    let mut v: Vec<&(String, f64)> = scored.iter().collect();
    v.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.0.cmp(&b.0))
    });
    v.into_iter()
        .take(depth)
        .enumerate()
        .map(|(i, (id, s))| RunEntry {
            venue_id: id.clone(),
            rank: i + 1,
            score: *s,
        })
        .collect()
}

/// Score every row with `model` and rank each topic.
pub fn build_run(rows: &[FeatureVector], model: &Model, depth: usize, tag: &str) -> RankedRun {
    let scores: Vec<f64> = rows.par_iter().map(|r| model.predict_row(r)).collect();
    let mut by_topic: BTreeMap<&str, Vec<(String, f64)>> = BTreeMap::new();
    for (r, s) in rows.iter().zip(scores) {
        by_topic
            .entry(r.topic_id.as_str())
            .or_default()
            .push((r.venue_id.clone(), s));
    }
    let mut run = RankedRun::new(tag);
    for (topic, scored) in by_topic {
        run.topics.insert(topic.to_string(), rank_topic(&scored, depth));
    }
    run
}

/// "<topic> Q0 <venue> <rank> <score> <tag>", score with 6 decimals.
pub fn write_run<W: Write>(w: &mut W, run: &RankedRun) -> io::Result<()> {
    for (topic, entries) in &run.topics {
        for e in entries {
            writeln!(
                w,
                "{topic} Q0 {} {} {:.6} {}",
                e.venue_id, e.rank, e.score, run.tag
            )?;
        }
    }
    Ok(())
}

pub fn save_run(path: impl AsRef<Path>, run: &RankedRun) -> Result<(), EvalError> {
    let mut w = BufWriter::new(File::create(path)?);
    write_run(&mut w, run)?;
    w.flush()?;
    Ok(())
}

pub fn read_run<R: BufRead>(r: R) -> Result<RankedRun, EvalError> {
    let mut run = RankedRun::default();
    let mut seen: BTreeMap<String, HashSet<String>> = BTreeMap::new();
    for (i, line) in r.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let [topic, _q0, venue, rank, score, tag] = f.as_slice() else {
            return Err(EvalError::Run {
                line: line_no,
                message: format!("expected 6 fields, got {}", f.len()),
            });
        };
        let topic_err = |message: String| EvalError::RunTopic {
            topic: topic.to_string(),
            line: line_no,
            message,
        };
        let rank: usize = rank
            .parse()
            .map_err(|_| topic_err(format!("rank '{rank}' is not a positive integer")))?;
        let score: f64 = score
            .parse()
            .ok()
            .filter(|s: &f64| s.is_finite())
            .ok_or_else(|| topic_err(format!("score '{score}' is not a finite number")))?;
        if run.topics.is_empty() {
            run.tag = tag.to_string();
        }
        let entries = run.topics.entry(topic.to_string()).or_default();
        if rank != entries.len() + 1 {
            return Err(topic_err(format!(
                "rank {rank} not contiguous (expected {})",
                entries.len() + 1
            )));
        }
        if let Some(prev) = entries.last() {
            if score > prev.score {
                return Err(topic_err(format!(
                    "score {score} at rank {rank} exceeds score {} at rank {}",
                    prev.score, prev.rank
                )));
            }
        }
        if !seen.entry(topic.to_string()).or_default().insert(venue.to_string()) {
            return Err(topic_err(format!("duplicate venue '{venue}'")));
        }
        entries.push(RunEntry {
            venue_id: venue.to_string(),
            rank,
            score,
        });
    }
    Ok(run)
}

pub fn load_run(path: impl AsRef<Path>) -> Result<RankedRun, EvalError> {
    read_run(BufReader::new(File::open(path)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scored(v: &[(&str, f64)]) -> Vec<(String, f64)> {
        v.iter().map(|(id, s)| (id.to_string(), *s)).collect()
    }

    #[test]
    fn rank_topic_examples() {
        let r = rank_topic(&scored(&[("v2", 0.9), ("v3", 0.1), ("v1", 0.9)]), 50);
        let ids: Vec<_> = r.iter().map(|e| e.venue_id.as_str()).collect();
        assert_eq!(ids, ["v1", "v2", "v3"]);
        assert_eq!(r.iter().map(|e| e.rank).collect::<Vec<_>>(), [1, 2, 3]);

        let single = rank_topic(&scored(&[("only", -3.0)]), 50);
        assert_eq!(single[0].rank, 1);

        let dec = rank_topic(&scored(&[("c", 3.0), ("a", 2.0), ("b", 1.0)]), 50);
        let ids: Vec<_> = dec.iter().map(|e| e.venue_id.as_str()).collect();
        assert_eq!(ids, ["c", "a", "b"]);

        assert_eq!(rank_topic(&scored(&[("a", 1.0), ("b", 2.0)]), 1).len(), 1);
        assert!(rank_topic(&[], 50).is_empty());
    }

    #[test]
    fn run_round_trip() {
        let mut run = RankedRun::new("mart");
        run.topics.insert(
            "t1".into(),
            rank_topic(&scored(&[("a", 0.5), ("b", 0.25)]), 50),
        );
        let mut buf = Vec::new();
        write_run(&mut buf, &run).unwrap();
        assert_eq!(
            std::str::from_utf8(&buf).unwrap(),
            "t1 Q0 a 1 0.500000 mart\nt1 Q0 b 2 0.250000 mart\n"
        );
        let back = read_run(&buf[..]).unwrap();
        assert_eq!(back, run);
    }

    #[test]
    fn run_validation_errors() {
        let gap = "t Q0 a 1 1.0 x\nt Q0 b 3 0.5 x\n";
        assert!(matches!(read_run(gap.as_bytes()), Err(EvalError::RunTopic { line: 2, .. })));
        let dup = "t Q0 a 1 1.0 x\nt Q0 a 2 0.5 x\n";
        assert!(matches!(read_run(dup.as_bytes()), Err(EvalError::RunTopic { .. })));
        let inverted = "t Q0 a 1 0.1 x\nt Q0 b 2 0.5 x\n";
        match read_run(inverted.as_bytes()) {
            Err(EvalError::RunTopic { topic, line, .. }) => {
                assert_eq!(topic, "t");
                assert_eq!(line, 2);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(read_run("t Q0 a 1".as_bytes()), Err(EvalError::Run { .. })));
    }
}
