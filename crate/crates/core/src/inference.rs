//! Prototype ranking and the pairwise confidence cascade.
//!
//! Prototypes are ordered by their training impurity and walked as
//! overlapping pairs `(1,2), (2,3), ...`. For each pair the more similar
//! prototype wins; the first winner whose similarity reaches the threshold
//! decides the label. If no pair fires, the flat nearest-prototype decision
//! is used.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::density::{cauchy, similarity};
use crate::error::{DmrError, Result};
use crate::learner::DataCloud;
use crate::model::DmrModel;
use crate::vectors::{sq_dist, FeatureVector};

/// Default confidence threshold.
pub const DEFAULT_THRESHOLD: f64 = 0.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedPrototypes {
    pub order: Vec<usize>,
    pub per_cloud_error: BTreeMap<usize, f64>,
}

/// How a prediction was reached.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionPath {
    /// 1-based index of the ranked pair that fired.
    Pair(usize),
    Fallback,
}

impl fmt::Display for DecisionPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DecisionPath::Pair(i) => write!(f, "pair:{i}"),
            DecisionPath::Fallback => f.write_str("fallback"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub winning_cloud: usize,
    pub score: f64,
    pub path: DecisionPath,
}

/// Ranks clouds by the fraction of training samples they attract (under the
/// flat decision) whose label differs from theirs. Ties break on larger
/// support, then smaller id.
pub fn rank_prototypes(model: &DmrModel, samples: &[FeatureVector], labels: &[String]) -> Result<RankedPrototypes> {
    if samples.len() != labels.len() {
        return Err(DmrError::LengthMismatch {
            left: samples.len(),
            right: labels.len(),
        });
    }
    if samples.is_empty() {
        return Err(DmrError::NoSamples);
    }
    let clouds: Vec<&DataCloud> = model.clouds().collect();
    if clouds.is_empty() {
        return Err(DmrError::EmptyModel);
    }
    let mut attracted: BTreeMap<usize, (usize, usize)> = clouds.iter().map(|c| (c.id, (0, 0))).collect();
    for (x, y) in samples.iter().zip(labels) {
        x.check_dim(model.dimensionality)?;
        let i = flat_index(x, &clouds);
        let entry = attracted.get_mut(&clouds[i].id).expect("cloud listed");
        entry.0 += 1;
        if clouds[i].class_label != *y {
            entry.1 += 1;
        }
    }
    let per_cloud_error: BTreeMap<usize, f64> = attracted
        .into_iter()
        .map(|(id, (n, wrong))| (id, if n == 0 { 0.0 } else { wrong as f64 / n as f64 }))
        .collect();
    Ok(rank_by_error(&clouds, per_cloud_error))
}

pub(crate) fn rank_by_error(clouds: &[&DataCloud], per_cloud_error: BTreeMap<usize, f64>) -> RankedPrototypes {
    let mut order: Vec<(usize, usize, f64)> = clouds
        .iter()
        .map(|c| (c.id, c.support, per_cloud_error.get(&c.id).copied().unwrap_or(0.0)))
        .collect();
    order.sort_by(|a, b| a.2.total_cmp(&b.2).then(b.1.cmp(&a.1)).then(a.0.cmp(&b.0)));
    RankedPrototypes {
        order: order.into_iter().map(|(id, _, _)| id).collect(),
        per_cloud_error,
    }
}

// Highest similarity, ties to the lowest id.
fn flat_index(x: &[f64], clouds: &[&DataCloud]) -> usize {
    let mut best = 0;
    let mut best_s = f64::NEG_INFINITY;
    for (i, c) in clouds.iter().enumerate() {
        let s = cauchy(sq_dist(x, &c.center), c.variance);
        if s > best_s || (s == best_s && c.id < clouds[best].id) {
            best = i;
            best_s = s;
        }
    }
    best
}

/// Single-stage decision: the label of the most similar prototype.
pub fn flat_predict(x: &FeatureVector, model: &DmrModel) -> Result<Prediction> {
    x.check_dim(model.dimensionality)?;
    let clouds: Vec<&DataCloud> = model.clouds().collect();
    if clouds.is_empty() {
        return Err(DmrError::EmptyModel);
    }
    let c = clouds[flat_index(x, &clouds)];
    Ok(Prediction {
        label: c.class_label.clone(),
        winning_cloud: c.id,
        score: cauchy(sq_dist(x, &c.center), c.variance),
        path: DecisionPath::Fallback,
    })
}

/// The more similar of `a` and `b`; `a` wins ties.
pub fn pairwise_max(x: &FeatureVector, a: &DataCloud, b: &DataCloud) -> Result<(usize, f64)> {
    let sa = similarity(x, a)?;
    let sb = similarity(x, b)?;
    Ok(if sb > sa { (b.id, sb) } else { (a.id, sa) })
}

pub fn cascade_predict(x: &FeatureVector, model: &DmrModel) -> Result<Prediction> {
    cascade_predict_with(x, model, model.threshold)
}

/// Cascade with an explicit threshold. Thresholds above 1 are accepted here
/// and only let exact prototype hits fire.
pub fn cascade_predict_with(x: &FeatureVector, model: &DmrModel, threshold: f64) -> Result<Prediction> {
    x.check_dim(model.dimensionality)?;
    let ranking = model.ranking.as_ref().ok_or(DmrError::NotRanked)?;
    let index = model.cloud_index();
    let ranked: Vec<&DataCloud> = ranking.order.iter().map(|id| index[id]).collect();
    if ranked.is_empty() {
        return Err(DmrError::EmptyModel);
    }
    for (k, pair) in ranked.windows(2).enumerate() {
        let (a, b) = (pair[0], pair[1]);
        let sa = cauchy(sq_dist(x, &a.center), a.variance);
        let sb = cauchy(sq_dist(x, &b.center), b.variance);
        let (winner, score) = if sb > sa { (b, sb) } else { (a, sa) };
        if score >= threshold {
            return Ok(Prediction {
                label: winner.class_label.clone(),
                winning_cloud: winner.id,
                score,
                path: DecisionPath::Pair(k + 1),
            });
        }
    }
    flat_predict(x, model)
}
