use std::io::{self, Write};

use rayon::prelude::*;

use super::{build_run, evaluate, EvalConfig, EvalError, Metric, RUN_DEPTH};
use crate::corpus::Qrels;
use crate::features::{FeatureVector, FEATURE_NAMES, NUM_FEATURES};
use crate::ltr::{self, TrainConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct AblationRow {
    /// 1-based
    pub feature: usize,
    pub feature_name: &'static str,
    pub metric: f64,
    /// (ablated - full) / full * 100
    pub delta_percent: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationReport {
    pub metric: Metric,
    pub baseline: f64,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn write_tsv<W: Write>(&self, w: &mut W) -> io::Result<()> {
        writeln!(w, "feature_name\tdelta_percent")?;
        for r in &self.rows {
            writeln!(w, "{}\t{:.4}", r.feature_name, r.delta_percent)?;
        }
        Ok(())
    }

    pub fn largest_drop(&self) -> Option<&AblationRow> {
        self.rows
            .iter()
            .min_by(|a, b| a.delta_percent.total_cmp(&b.delta_percent))
    }
}

/// Train with `cfg` on `rows` (optionally with one zero-based column zeroed),
/// rank every topic and return the mean of `metric`.
pub fn score_with_mask(
    rows: &[FeatureVector],
    qrels: &Qrels,
    cfg: &TrainConfig,
    eval: &EvalConfig,
    metric: Metric,
    zeroed: Option<usize>,
) -> Result<f64, EvalError> {
    let masked: Vec<FeatureVector>;
    let rows = match zeroed {
        Some(f) => {
            masked = rows
                .iter()
                .map(|r| {
                    let mut r = r.clone();
                    r.features[f] = 0.0;
                    r
                })
                .collect();
            &masked[..]
        }
        None => rows,
    };
    let model = ltr::train(rows, cfg)?;
    let run = build_run(rows, &model, RUN_DEPTH, "ablation");
    Ok(evaluate(&run, qrels, eval)?.mean(metric))
}

/// Remove each feature in turn, retrain with the same seed and report the
/// relative change of `metric`.
pub fn ablation(
    rows: &[FeatureVector],
    qrels: &Qrels,
    cfg: &TrainConfig,
    eval: &EvalConfig,
    metric: Metric,
) -> Result<AblationReport, EvalError> {
    let baseline = score_with_mask(rows, qrels, cfg, eval, metric, None)?;
    let scores: Vec<f64> = (0..NUM_FEATURES)
        .into_par_iter()
        .map(|f| score_with_mask(rows, qrels, cfg, eval, metric, Some(f)))
        .collect::<Result<_, _>>()?;
    let rows = scores
        .into_iter()
        .enumerate()
        .map(|(f, m)| AblationRow {
            feature: f + 1,
            feature_name: FEATURE_NAMES[f],
            metric: m,
            delta_percent: if baseline == 0.0 {
                0.0
            } else {
                (m - baseline) / baseline * 100.0
            },
        })
        .collect();
    Ok(AblationReport {
        metric,
        baseline,
        rows,
    })
}
