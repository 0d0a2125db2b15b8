//! Cauchy data density, prototype similarity and empirical class typicality.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{DmrError, Result};
use crate::learner::DataCloud;
use crate::model::DmrModel;
use crate::vectors::{sq_dist, FeatureVector};

/// Smallest scale a cloud or class may carry. Degenerate variances are
/// replaced by this floor before any density is evaluated.
pub const VARIANCE_FLOOR: f64 = 1e-6;

/// Cauchy density of `x` around `center`: `1 / (1 + ||x - center||^2 / variance)`.
///
/// The result lies in `(0, 1]` and equals 1 only when `x == center`.
pub fn density(x: &FeatureVector, center: &FeatureVector, variance: f64) -> Result<f64> {
    center.check_dim(x.dim())?;
    if !(variance > 0.0) {
        return Err(DmrError::DegenerateScale(variance));
    }
    Ok(cauchy(sq_dist(x, center), variance))
}

#[inline]
pub(crate) fn cauchy(sq_distance: f64, variance: f64) -> f64 {
    1.0 / (1.0 + sq_distance / variance)
}

/// Similarity of `x` to a cloud, using the cloud's own scale.
pub fn similarity(x: &FeatureVector, cloud: &DataCloud) -> Result<f64> {
    density(x, &cloud.center, cloud.variance)
}

/// `variance` with the degenerate floor substituted.
pub fn floored(variance: f64) -> f64 {
    if variance.is_finite() && variance > VARIANCE_FLOOR {
        variance
    } else {
        VARIANCE_FLOOR
    }
}

/// Normalized support-weighted similarity per class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassTypicality {
    pub per_class: BTreeMap<String, f64>,
}

impl ClassTypicality {
    /// Class with the highest typicality; ties go to the lexicographically
    /// smallest label.
    pub fn argmax(&self) -> Option<&str> {
        let mut best: Option<(&str, f64)> = None;
        for (label, &v) in &self.per_class {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((label, v));
            }
        }
        best.map(|(l, _)| l)
    }
}

pub fn class_typicality(x: &FeatureVector, model: &DmrModel) -> Result<ClassTypicality> {
    typicality_over(x, model.clouds())
}

pub(crate) fn typicality_over<'a, I>(x: &FeatureVector, clouds: I) -> Result<ClassTypicality>
where
    I: IntoIterator<Item = &'a DataCloud>,
{
    let mut per_class: BTreeMap<String, f64> = BTreeMap::new();
    for cloud in clouds {
        let s = similarity(x, cloud)?;
        *per_class.entry(cloud.class_label.clone()).or_insert(0.0) += cloud.support as f64 * s;
    }
    if per_class.is_empty() {
        return Err(DmrError::EmptyModel);
    }
    let total: f64 = per_class.values().sum();
    for v in per_class.values_mut() {
        *v /= total;
    }
    Ok(ClassTypicality { per_class })
}
