//! Per-class streaming prototype identification.
//!
//! Each class is learned independently from an ordered stream of
//! standardized samples. The first sample seeds a data cloud; every later
//! sample first updates the class statistics and is then either promoted to
//! a new prototype (when its density is at or above the densest prototype, or
//! at or below the sparsest one) or absorbed by the nearest existing cloud.

use serde::{Deserialize, Serialize};

use crate::density::{cauchy, floored, VARIANCE_FLOOR};
use crate::error::{DmrError, Result};
use crate::vectors::{sq_dist, FeatureVector, RunningStats};

/// A prototype together with the statistics of the samples it absorbed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataCloud {
    pub id: usize,
    pub class_label: String,
    pub center: FeatureVector,
    pub support: usize,
    /// Running mean of the squared norms of absorbed samples.
    pub local_sq_stats: f64,
    /// Scale used for similarity. Singleton and zero-spread clouds carry the
    /// class's global variance (floored) instead of their own.
    pub variance: f64,
    pub source_sample_id: Option<usize>,
    pub synthetic: bool,
}

impl DataCloud {
    pub fn seed(
        id: usize,
        class_label: &str,
        center: FeatureVector,
        source_sample_id: Option<usize>,
        synthetic: bool,
        fallback_variance: f64,
    ) -> Self {
        DataCloud {
            id,
            class_label: class_label.to_owned(),
            local_sq_stats: center.sq_norm(),
            center,
            support: 1,
            variance: floored(fallback_variance),
            source_sample_id,
            synthetic,
        }
    }

    /// Spread of the absorbed samples around the center.
    pub fn local_variance(&self) -> f64 {
        (self.local_sq_stats - self.center.sq_norm()).max(0.0)
    }

    pub fn sigma(&self) -> f64 {
        self.variance.sqrt()
    }

    fn is_degenerate(&self) -> bool {
        self.support < 2 || self.local_variance() < VARIANCE_FLOOR
    }

    fn refresh_scale(&mut self, class_variance: f64) {
        self.variance = if self.is_degenerate() {
            floored(class_variance)
        } else {
            self.local_variance()
        };
    }

    fn absorb(&mut self, x: &FeatureVector) {
        let n = self.support as f64;
        let center = self
            .center
            .iter()
            .zip(x.iter())
            .map(|(c, v)| (n * c + v) / (n + 1.0))
            .collect();
        self.center = FeatureVector::from_raw(center);
        self.local_sq_stats = (n * self.local_sq_stats + x.sq_norm()) / (n + 1.0);
        self.support += 1;
        if !self.is_degenerate() {
            self.variance = self.local_variance();
        }
    }
}

/// Moves the cloud's prototype towards `x` as a running mean and bumps its
/// support.
pub fn update_prototype(cloud: &DataCloud, x: &FeatureVector) -> Result<DataCloud> {
    x.check_dim(cloud.center.dim())?;
    let mut next = cloud.clone();
    next.absorb(x);
    Ok(next)
}

/// Id of the cloud whose center is closest to `x`; ties go to the lowest id.
pub fn assign_nearest(x: &FeatureVector, clouds: &[DataCloud]) -> Result<usize> {
    let first = clouds.first().ok_or(DmrError::EmptyModel)?;
    x.check_dim(first.center.dim())?;
    Ok(clouds[nearest_index(x, clouds)].id)
}

pub(crate) fn nearest_index(x: &[f64], clouds: &[DataCloud]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in clouds.iter().enumerate() {
        let d = sq_dist(x, &c.center);
        if d < best_d || (d == best_d && c.id < clouds[best].id) {
            best = i;
            best_d = d;
        }
    }
    best
}

/// The density comparison behind prototype creation: at or above the
/// densest prototype, or at or below the sparsest.
pub fn is_novel(sample_density: f64, prototype_densities: &[f64]) -> bool {
    let max = prototype_densities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = prototype_densities.iter().copied().fold(f64::INFINITY, f64::min);
    sample_density >= max || sample_density <= min
}

/// Whether `x` should found a new cloud. Densities are taken against the
/// class's current global mean and variance, which must already include `x`.
/// A sample that coincides with an existing prototype never founds a cloud.
pub fn novelty_check(x: &FeatureVector, class_model: &ClassModel) -> bool {
    if class_model.clouds.is_empty() {
        return true;
    }
    if class_model.clouds.iter().any(|c| c.center.as_slice() == x.as_slice()) {
        return false;
    }
    let mean = &class_model.stats.mean;
    let var = floored(class_model.stats.variance);
    let dx = cauchy(sq_dist(x, mean), var);
    let protos: Vec<f64> = class_model
        .clouds
        .iter()
        .map(|c| cauchy(sq_dist(&c.center, mean), var))
        .collect();
    is_novel(dx, &protos)
}

/// What happened to a sample fed into a class.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Absorption {
    NewCloud(usize),
    Updated(usize),
}

impl Absorption {
    pub fn cloud_id(self) -> usize {
        match self {
            Absorption::NewCloud(id) | Absorption::Updated(id) => id,
        }
    }
}

/// Running statistics and data clouds of one class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassModel {
    pub class_label: String,
    pub stats: RunningStats,
    pub clouds: Vec<DataCloud>,
}

impl ClassModel {
    pub fn new(class_label: &str, dim: usize) -> Self {
        ClassModel {
            class_label: class_label.to_owned(),
            stats: RunningStats::empty(dim),
            clouds: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.stats.dim()
    }

    /// Feeds one sample through the learner. `next_id` supplies the id of a
    /// newly created cloud and is advanced when one is created.
    pub fn absorb(
        &mut self,
        x: &FeatureVector,
        source_sample_id: Option<usize>,
        synthetic: bool,
        next_id: &mut usize,
    ) -> Result<Absorption> {
        self.stats.update(x)?;
        let outcome = if novelty_check(x, self) {
            let id = *next_id;
            *next_id += 1;
            self.clouds.push(DataCloud::seed(
                id,
                &self.class_label,
                x.clone(),
                source_sample_id,
                synthetic,
                self.stats.variance,
            ));
            Absorption::NewCloud(id)
        } else {
            let i = nearest_index(x, &self.clouds);
            self.clouds[i].absorb(x);
            Absorption::Updated(self.clouds[i].id)
        };
        self.refresh_scales();
        Ok(outcome)
    }

    /// Adds `x` as a new cloud without consulting the novelty condition.
    pub(crate) fn promote(&mut self, x: &FeatureVector, source_sample_id: Option<usize>, synthetic: bool, id: usize) {
        self.clouds.push(DataCloud::seed(
            id,
            &self.class_label,
            x.clone(),
            source_sample_id,
            synthetic,
            self.stats.variance,
        ));
        self.refresh_scales();
    }

    fn refresh_scales(&mut self) {
        let v = self.stats.variance;
        for c in &mut self.clouds {
            c.refresh_scale(v);
        }
    }

    pub fn cloud_position(&self, id: usize) -> Option<usize> {
        self.clouds.iter().position(|c| c.id == id)
    }

    /// Splits `samples` into the Voronoi cells of this class's clouds,
    /// returning sample indices per cloud (in cloud order).
    pub fn partition(&self, samples: &[FeatureVector]) -> Vec<Vec<usize>> {
        let mut cells = vec![Vec::new(); self.clouds.len()];
        if self.clouds.is_empty() {
            return cells;
        }
        for (i, x) in samples.iter().enumerate() {
            cells[nearest_index(x, &self.clouds)].push(i);
        }
        cells
    }
}

/// Learns one class from an ordered stream, with cloud ids starting at 0 and
/// the stream position as each prototype's source sample id.
pub fn learn_class(samples: &[FeatureVector], label: &str) -> Result<ClassModel> {
    let sources: Vec<usize> = (0..samples.len()).collect();
    learn_class_with_sources(samples, &sources, label, 0)
}

pub fn learn_class_with_sources(
    samples: &[FeatureVector],
    source_ids: &[usize],
    label: &str,
    first_id: usize,
) -> Result<ClassModel> {
    let first = samples.first().ok_or_else(|| DmrError::EmptyStream(label.to_owned()))?;
    if source_ids.len() != samples.len() {
        return Err(DmrError::LengthMismatch {
            left: samples.len(),
            right: source_ids.len(),
        });
    }
    let mut model = ClassModel::new(label, first.dim());
    let mut next_id = first_id;
    for (x, &src) in samples.iter().zip(source_ids) {
        x.check_dim(model.dim())?;
        model.absorb(x, Some(src), false, &mut next_id)?;
    }
    Ok(model)
}
