use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EvalError, RankedRun};
use crate::corpus::Qrels;

/// Effectiveness measure used for training, early stopping and ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    P5,
    Mrr,
}

impl Metric {
    /// Score one ranked list of grades.
    pub fn score(self, grades: &[i64], cutoff: i64) -> f64 {
        match self {
            Metric::P5 => precision_at(grades, 5, cutoff),
            Metric::Mrr => reciprocal_rank(grades, cutoff),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::P5 => "p5",
            Metric::Mrr => "mrr",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_lowercase().as_str() {
            "p5" | "p@5" => Ok(Metric::P5),
            "mrr" | "rr" => Ok(Metric::Mrr),
            other => Err(format!("unknown metric '{other}' (expected p5|mrr)")),
        }
    }
}

/// Relevant documents in the top `k` divided by `k`, even if fewer were retrieved.
pub fn precision_at(grades: &[i64], k: usize, cutoff: i64) -> f64 {
    let hits = grades.iter().take(k).filter(|&&g| g >= cutoff).count();
    hits as f64 / k as f64
}

/// 1 / rank of the first relevant document, 0 when none is retrieved.
pub fn reciprocal_rank(grades: &[i64], cutoff: i64) -> f64 {
    grades
        .iter()
        .position(|&g| g >= cutoff)
        .map(|i| 1.0 / (i + 1) as f64)
        .unwrap_or(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub k: usize,
    pub relevance_cutoff: i64,
    /// score topics without any relevant judgment as 0 instead of skipping them
    pub include_zero_relevant: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 5,
            relevance_cutoff: 1,
            include_zero_relevant: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TopicMetrics {
    pub p5: f64,
    pub rr: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricReport {
    pub per_topic: BTreeMap<String, TopicMetrics>,
    pub mean_p5: f64,
    pub mrr: f64,
    /// run topics with no judgments at all
    pub missing_from_qrels: Vec<String>,
    /// run topics whose judgments contain no relevant venue
    pub no_relevant: Vec<String>,
}

impl MetricReport {
    pub fn values(&self, metric: Metric) -> Vec<f64> {
        self.per_topic
            .values()
            .map(|m| match metric {
                Metric::P5 => m.p5,
                Metric::Mrr => m.rr,
            })
            .collect()
    }

    pub fn mean(&self, metric: Metric) -> f64 {
        match metric {
            Metric::P5 => self.mean_p5,
            Metric::Mrr => self.mrr,
        }
    }

    /// Plain-text report: header, one row per topic, then summary lines.
    pub fn to_text(&self, k: usize) -> String {
        let mut s = format!("topic\tP@{k}\tRR\n");
        for (t, m) in &self.per_topic {
            s.push_str(&format!("{t}\t{:.4}\t{:.4}\n", m.p5, m.rr));
        }
        s.push_str(&format!("all\tP@{k}\t{:.4}\n", self.mean_p5));
        s.push_str(&format!("all\tMRR\t{:.4}\n", self.mrr));
        s.push_str(&format!("all\tnum_topics\t{}\n", self.per_topic.len()));
        s.push_str(&format!("all\tmissing_from_qrels\t{}\n", self.missing_from_qrels.len()));
        s.push_str(&format!("all\tno_relevant\t{}\n", self.no_relevant.len()));
        s
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// Per-topic P@k and RR with the topic-inclusion rules of `cfg`.
pub fn evaluate(run: &RankedRun, qrels: &Qrels, cfg: &EvalConfig) -> Result<MetricReport, EvalError> {
    if cfg.k == 0 {
        return Err(EvalError::Config("k must be at least 1".into()));
    }
    let mut report = MetricReport::default();
    for (topic, entries) in &run.topics {
        let Some(judged) = qrels.topic(topic) else {
            report.missing_from_qrels.push(topic.clone());
            continue;
        };
        let has_relevant = judged.values().any(|&g| g >= cfg.relevance_cutoff);
        if !has_relevant {
            report.no_relevant.push(topic.clone());
            if !cfg.include_zero_relevant {
                continue;
            }
        }
        let grades: Vec<i64> = entries
            .iter()
            .map(|e| judged.get(&e.venue_id).copied().unwrap_or(0))
            .collect();
        report.per_topic.insert(
            topic.clone(),
            TopicMetrics {
                p5: precision_at(&grades, cfg.k, cfg.relevance_cutoff),
                rr: reciprocal_rank(&grades, cfg.relevance_cutoff),
            },
        );
    }
    report.mean_p5 = mean(report.per_topic.values().map(|m| m.p5));
    report.mrr = mean(report.per_topic.values().map(|m| m.rr));
    Ok(report)
}

/// Mean P@k over included topics together with the per-topic values.
pub fn precision_at_k(
    run: &RankedRun,
    qrels: &Qrels,
    cfg: &EvalConfig,
) -> Result<(BTreeMap<String, f64>, f64), EvalError> {
    let r = evaluate(run, qrels, cfg)?;
    Ok((r.per_topic.iter().map(|(t, m)| (t.clone(), m.p5)).collect(), r.mean_p5))
}

pub fn mrr(
    run: &RankedRun,
    qrels: &Qrels,
    cfg: &EvalConfig,
) -> Result<(BTreeMap<String, f64>, f64), EvalError> {
    let r = evaluate(run, qrels, cfg)?;
    Ok((r.per_topic.iter().map(|(t, m)| (t.clone(), m.rr)).collect(), r.mrr))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evaluation::{rank_topic, RankedRun};

    fn run_of(topics: &[(&str, &[&str])]) -> RankedRun {
        let mut run = RankedRun::new("t");
        for (t, venues) in topics {
            let n = venues.len();
            let scored: Vec<(String, f64)> = venues
                .iter()
                .enumerate()
                .map(|(i, v)| (v.to_string(), (n - i) as f64))
                .collect();
            run.topics.insert(t.to_string(), rank_topic(&scored, usize::MAX));
        }
        run
    }

    #[test]
    fn kernels() {
        assert_eq!(precision_at(&[1, 1, 0, 0, 0], 5, 1), 0.4);
        assert_eq!(precision_at(&[1, 0, 1], 5, 1), 0.4);
        assert_eq!(precision_at(&[2, 1, 3, 1, 1, 0], 5, 1), 1.0);
        assert_eq!(reciprocal_rank(&[0, 0, 1], 1), 1.0 / 3.0);
        assert_eq!(reciprocal_rank(&[0, 0, 0], 1), 0.0);
        assert_eq!(reciprocal_rank(&[1, 2], 2), 0.5);
    }

    #[test]
    fn two_topic_mrr() {
        let run = run_of(&[("a", &["x", "y"]), ("b", &["p", "q", "r", "s"])]);
        let mut q = Qrels::new();
        q.insert("a", "x", 1);
        q.insert("b", "s", 3);
        let r = evaluate(&run, &q, &EvalConfig::default()).unwrap();
        assert_eq!(r.per_topic["a"].rr, 1.0);
        assert_eq!(r.per_topic["b"].rr, 0.25);
        assert_eq!(r.mrr, 0.625);
    }

    #[test]
    fn topic_inclusion_rules() {
        let run = run_of(&[("a", &["x"]), ("b", &["y"]), ("c", &["z"])]);
        let mut q = Qrels::new();
        q.insert("a", "x", 1);
        q.insert("b", "y", 0);
        let r = evaluate(&run, &q, &EvalConfig::default()).unwrap();
        assert_eq!(r.per_topic.len(), 1);
        assert_eq!(r.missing_from_qrels, ["c"]);
        assert_eq!(r.no_relevant, ["b"]);
        assert_eq!(r.mean_p5, 0.2);

        let cfg = EvalConfig {
            include_zero_relevant: true,
            ..Default::default()
        };
        let r = evaluate(&run, &q, &cfg).unwrap();
        assert_eq!(r.per_topic.len(), 2);
        assert_eq!(r.mean_p5, 0.1);
        assert!(evaluate(&run, &q, &EvalConfig { k: 0, ..cfg }).is_err());
    }
}
