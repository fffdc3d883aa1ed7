use log::{debug, warn};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mean_metric, LinearModel, LtrError, Query, Result, TrainConfig};
use crate::features::NUM_FEATURES;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaParams {
    pub restarts: usize,
    pub step_base: f64,
    /// step sizes are `step_base * 2^i` for i in 0..step_doublings, both signs
    pub step_doublings: u32,
    pub max_sweeps: usize,
    /// stop when a sweep improves the training metric by less than this
    pub tolerance: f64,
}

impl Default for CaParams {
    fn default() -> Self {
        CaParams {
            restarts: 5,
            step_base: 0.05,
            step_doublings: 10,
            max_sweeps: 25,
            tolerance: 0.001,
        }
    }
}

impl CaParams {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(LtrError::Config("restarts must be at least 1".into()));
        }
        if !(self.step_base > 0.0 && self.step_base.is_finite()) || self.step_doublings == 0 {
            return Err(LtrError::Config("step sizes must be positive".into()));
        }
        if self.max_sweeps == 0 {
            return Err(LtrError::Config("max_sweeps must be at least 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(LtrError::Config("tolerance must be non-negative".into()));
        }
        Ok(())
    }

    fn steps(&self) -> Vec<f64> {
        (0..self.step_doublings)
            .flat_map(|i| {
                let s = self.step_base * f64::powi(2.0, i as i32);
                [s, -s]
            })
            .collect()
    }
}

/// Accepted training-metric values, one list per restart.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CaTrace {
    pub accepted: Vec<Vec<f64>>,
    pub train_metric: Vec<f64>,
    pub valid_metric: Vec<f64>,
    pub chosen: usize,
}

fn score_all(q: &Query, w: &[f64]) -> Vec<f64> {
    q.features
        .iter()
        .map(|x| w.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn l1_normalize(w: &mut [f64]) {
    let n: f64 = w.iter().map(|x| x.abs()).sum();
    if n > 0.0 {
        for x in w.iter_mut() {
            *x /= n;
        }
    }
}

fn varies_within_some_query(queries: &[Query], f: usize) -> bool {
    queries.iter().any(|q| {
        q.features
            .first()
            .is_some_and(|first| q.features.iter().any(|x| x[f] != first[f]))
    })
}

pub fn train_coordinate_ascent(
    train: &[Query],
    valid: &[Query],
    cfg: &TrainConfig,
) -> Result<LinearModel> {
    train_coordinate_ascent_traced(train, valid, cfg).map(|(m, _)| m)
}

pub fn train_coordinate_ascent_traced(
    train: &[Query],
    valid: &[Query],
    cfg: &TrainConfig,
) -> Result<(LinearModel, CaTrace)> {
    let p = &cfg.ca;
    p.validate()?;
    if train.is_empty() {
        return Err(LtrError::EmptySet("training"));
    }
    let uniform = vec![1.0 / NUM_FEATURES as f64; NUM_FEATURES];
    let model = |weights: Vec<f64>| LinearModel {
        weights,
        training_metric: cfg.metric,
        seed: cfg.seed,
        hyperparameters: *p,
    };
    let cutoff = cfg.relevance_cutoff;
    let eval = |qs: &[Query], w: &[f64]| mean_metric(qs, cfg.metric, cutoff, |_, q| score_all(q, w));

    let active: Vec<usize> = (0..NUM_FEATURES)
        .filter(|&f| varies_within_some_query(train, f))
        .collect();
    let mut trace = CaTrace::default();
    if active.is_empty() {
        warn!("every feature is constant within each training topic; using uniform weights");
        return Ok((model(uniform), trace));
    }

    let steps = p.steps();
    let baseline = eval(train, &uniform);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut results: Vec<(Vec<f64>, f64, f64)> = Vec::with_capacity(p.restarts);

    for restart in 0..p.restarts {
        let mut w = if restart == 0 {
            uniform.clone()
        } else {
            let mut w: Vec<f64> = (0..NUM_FEATURES).map(|_| rng.gen_range(-1.0..1.0)).collect();
            l1_normalize(&mut w);
            w
        };
        let mut current = eval(train, &w);
        let mut accepted = Vec::new();
        let mut order = active.clone();
        for sweep in 0..p.max_sweeps {
            let start = current;
            order.shuffle(&mut rng);
            for &f in &order {
                let original = w[f];
                let mut best: Option<(f64, f64)> = None;
                for &s in &steps {
                    w[f] = original + s;
                    let m = eval(train, &w);
                    if m > current && best.is_none_or(|(_, bm)| m > bm) {
                        best = Some((w[f], m));
                    }
                }
                match best {
                    Some((value, m)) => {
                        w[f] = value;
                        current = m;
                        accepted.push(m);
                    }
                    None => w[f] = original,
                }
            }
            let before = w.clone();
            l1_normalize(&mut w);
            let renormed = eval(train, &w);
            if renormed < current {
                w = before;
            } else {
                current = renormed;
            }
            debug!("restart {restart} sweep {sweep}: {}={current:.4}", cfg.metric);
            if current - start < p.tolerance {
                break;
            }
        }
        l1_normalize(&mut w);
        let train_m = eval(train, &w);
        let valid_m = if valid.is_empty() { train_m } else { eval(valid, &w) };
        trace.accepted.push(accepted);
        trace.train_metric.push(train_m);
        trace.valid_metric.push(valid_m);
        results.push((w, train_m, valid_m));
    }

    // highest validation metric among restarts at least as good as uniform on training
    let mut chosen = 0;
    for (i, r) in results.iter().enumerate() {
        let ok = r.1 >= baseline;
        let best = &results[chosen];
        let best_ok = best.1 >= baseline;
        if (ok && !best_ok) || (ok == best_ok && r.2 > best.2) {
            chosen = i;
        }
    }
    trace.chosen = chosen;
    let mut weights = results.swap_remove(chosen).0;
    if weights.iter().all(|&x| x == 0.0) {
        weights = uniform;
    }
    Ok((model(weights), trace))
}
