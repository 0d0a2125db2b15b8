//! Feature-vector arithmetic, z-score standardization and the recursive
//! global statistics consumed by the density layer.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{DmrError, Result};

/// Floor applied to per-feature standard deviations.
pub const STD_FLOOR: f64 = 1e-9;

/// A point in feature space. Entries are always finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(DmrError::NonFinite { index });
        }
        Ok(FeatureVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        FeatureVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn sq_norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    // Callers guarantee finiteness of the result.
    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite()));
        FeatureVector(values)
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(DmrError::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

impl Deref for FeatureVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Squared Euclidean distance.
pub fn squared_distance(a: &FeatureVector, b: &FeatureVector) -> Result<f64> {
    b.check_dim(a.dim())?;
    Ok(sq_dist(a, b))
}

// Unchecked variant for hot loops where dimensions were validated upstream.
#[inline]
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// Running mean and scalar variance of a stream of vectors.
///
/// The variance is the mean squared norm minus the squared norm of the mean,
/// i.e. the average squared distance of the absorbed samples to their mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub count: usize,
    pub mean: FeatureVector,
    pub mean_sq_norm: f64,
    pub variance: f64,
}

impl RunningStats {
    pub fn empty(dim: usize) -> Self {
        RunningStats {
            count: 0,
            mean: FeatureVector::zeros(dim),
            mean_sq_norm: 0.0,
            variance: 0.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.dim()
    }

    /// Absorbs one sample in place.
    pub fn update(&mut self, x: &FeatureVector) -> Result<()> {
        x.check_dim(self.dim())?;
        if let Some(index) = x.iter().position(|v| !v.is_finite()) {
            return Err(DmrError::NonFinite { index });
        }
        let n = (self.count + 1) as f64;
        for (m, v) in self.mean.0.iter_mut().zip(x.iter()) {
            *m += (v - *m) / n;
        }
        self.mean_sq_norm += (x.sq_norm() - self.mean_sq_norm) / n;
        self.count += 1;
        self.variance = (self.mean_sq_norm - self.mean.sq_norm()).max(0.0);
        Ok(())
    }

    pub fn from_samples<'a, I>(dim: usize, samples: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a FeatureVector>,
    {
        let mut stats = RunningStats::empty(dim);
        for x in samples {
            stats.update(x)?;
        }
        Ok(stats)
    }
}

/// Value-returning form of [`RunningStats::update`].
pub fn update_running_stats(stats: &RunningStats, x: &FeatureVector) -> Result<RunningStats> {
    let mut next = stats.clone();
    next.update(x)?;
    Ok(next)
}

/// Per-feature z-score parameters frozen at training time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub per_feature_mean: FeatureVector,
    pub per_feature_std: FeatureVector,
}

impl StandardizationParams {
    pub fn dim(&self) -> usize {
        self.per_feature_mean.dim()
    }

    pub fn apply(&self, x: &FeatureVector) -> Result<FeatureVector> {
        standardize_apply(x, self)
    }
}

/// Population mean and standard deviation per feature. Features whose
/// standard deviation falls below [`STD_FLOOR`] get a std of 1.
pub fn standardize_fit(samples: &[FeatureVector]) -> Result<StandardizationParams> {
    let first = samples.first().ok_or(DmrError::NoSamples)?;
    let dim = first.dim();
    let n = samples.len() as f64;
    let mut mean = vec![0.0; dim];
    for x in samples {
        x.check_dim(dim)?;
        for (m, v) in mean.iter_mut().zip(x.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    let mut var = vec![0.0; dim];
    for x in samples {
        for ((s, v), m) in var.iter_mut().zip(x.iter()).zip(mean.iter()) {
            let d = v - m;
            *s += d * d;
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd < STD_FLOOR {
                1.0
            } else {
                sd
            }
        })
        .collect();

    Ok(StandardizationParams {
        per_feature_mean: FeatureVector::from_raw(mean),
        per_feature_std: FeatureVector::from_raw(std),
    })
}

pub fn standardize_apply(x: &FeatureVector, p: &StandardizationParams) -> Result<FeatureVector> {
    x.check_dim(p.dim())?;
    let out = x
        .iter()
        .zip(p.per_feature_mean.iter())
        .zip(p.per_feature_std.iter())
        .map(|((v, m), s)| (v - m) / s)
        .collect();
    Ok(FeatureVector::from_raw(out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn fv(v: &[f64]) -> FeatureVector {
        FeatureVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            FeatureVector::new(vec![1.0, f64::NAN]),
            Err(DmrError::NonFinite { index: 1 })
        ));
        assert!(FeatureVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn fit_examples() {
        let p = standardize_fit(&[fv(&[0.0]), fv(&[2.0])]).unwrap();
        assert_eq!(p.per_feature_mean, fv(&[1.0]));
        assert_eq!(p.per_feature_std, fv(&[1.0]));

        let p = standardize_fit(&[fv(&[5.0]), fv(&[5.0])]).unwrap();
        assert_eq!(p.per_feature_mean, fv(&[5.0]));
        assert_eq!(p.per_feature_std, fv(&[1.0]));

        let p = standardize_fit(&[fv(&[0.0, 0.0]), fv(&[2.0, 4.0])]).unwrap();
        assert_eq!(p.per_feature_mean, fv(&[1.0, 2.0]));
        assert_eq!(p.per_feature_std, fv(&[1.0, 2.0]));
    }

    #[test]
    fn fit_errors() {
        assert!(matches!(standardize_fit(&[]), Err(DmrError::NoSamples)));
        assert!(matches!(
            standardize_fit(&[fv(&[1.0]), fv(&[1.0, 2.0])]),
            Err(DmrError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn apply_examples() {
        let p = StandardizationParams {
            per_feature_mean: fv(&[1.0]),
            per_feature_std: fv(&[1.0]),
        };
        assert_eq!(standardize_apply(&fv(&[0.0]), &p).unwrap(), fv(&[-1.0]));

        let p = StandardizationParams {
            per_feature_mean: fv(&[1.0, 2.0]),
            per_feature_std: fv(&[1.0, 2.0]),
        };
        assert_eq!(standardize_apply(&fv(&[3.0, 6.0]), &p).unwrap(), fv(&[2.0, 2.0]));
        assert_eq!(standardize_apply(&fv(&[1.0, 2.0]), &p).unwrap(), fv(&[0.0, 0.0]));
        assert!(standardize_apply(&fv(&[1.0]), &p).is_err());
    }

    #[test]
    fn running_stats_examples() {
        let s = RunningStats::empty(1);
        let s = update_running_stats(&s, &fv(&[2.0])).unwrap();
        assert_eq!(s.count, 1);
        assert_eq!(s.mean, fv(&[2.0]));
        assert_eq!(s.variance, 0.0);

        let s = update_running_stats(&s, &fv(&[4.0])).unwrap();
        assert_eq!(s.count, 2);
        assert_eq!(s.mean, fv(&[3.0]));
        assert_eq!(s.mean_sq_norm, 10.0);
        assert_eq!(s.variance, 1.0);
    }

    #[test]
    fn identical_samples_have_zero_variance() {
        let x = fv(&[0.3, -1.7, 2.2]);
        let s = RunningStats::from_samples(3, std::iter::repeat_n(&x, 25)).unwrap();
        assert_eq!(s.variance, 0.0);
    }

    #[test]
    fn squared_distance_examples() {
        assert_eq!(squared_distance(&fv(&[0.0, 0.0]), &fv(&[3.0, 4.0])).unwrap(), 25.0);
        assert_eq!(squared_distance(&fv(&[1.5]), &fv(&[1.5])).unwrap(), 0.0);
        assert!(squared_distance(&fv(&[1.0]), &fv(&[1.0, 2.0])).is_err());
    }

    fn batch_oracle(samples: &[Vec<f64>]) -> (Vec<f64>, f64) {
        let n = samples.len() as f64;
        let dim = samples[0].len();
        let mut mean = vec![0.0; dim];
        for s in samples {
            for (m, v) in mean.iter_mut().zip(s) {
                *m += v / n;
            }
        }
        let var = samples
            .iter()
            .map(|s| s.iter().zip(&mean).map(|(v, m)| (v - m).powi(2)).sum::<f64>())
            .sum::<f64>()
            / n;
        (mean, var)
    }

    fn stream() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..8).prop_flat_map(|dim| prop::collection::vec(prop::collection::vec(-10.0f64..10.0, dim), 1..50))
    }

    proptest! {
        #[test]
        fn streaming_matches_batch(samples in stream()) {
            let vs: Vec<_> = samples.iter().map(|s| fv(s)).collect();
            let stats = RunningStats::from_samples(vs[0].dim(), &vs).unwrap();
            let (mean, var) = batch_oracle(&samples);
            for (a, b) in stats.mean.iter().zip(&mean) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert!((stats.variance - var).abs() < 1e-9);
            prop_assert!(stats.variance >= 0.0);
            let direct = (stats.mean_sq_norm - stats.mean.sq_norm()).max(0.0);
            prop_assert!((stats.variance - direct).abs() < 1e-9);
        }

        #[test]
        fn order_does_not_change_final_mean(samples in stream(), seed in any::<u64>()) {
            let vs: Vec<_> = samples.iter().map(|s| fv(s)).collect();
            let mut shuffled = vs.clone();
            let k = (seed as usize) % shuffled.len();
            shuffled.rotate_left(k);
            shuffled.reverse();
            let a = RunningStats::from_samples(vs[0].dim(), &vs).unwrap();
            let b = RunningStats::from_samples(vs[0].dim(), &shuffled).unwrap();
            for (x, y) in a.mean.iter().zip(b.mean.iter()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn standardizing_the_mean_gives_zero(samples in stream()) {
            let vs: Vec<_> = samples.iter().map(|s| fv(s)).collect();
            let p = standardize_fit(&vs).unwrap();
            let z = p.apply(&p.per_feature_mean).unwrap();
            prop_assert!(z.iter().all(|v| *v == 0.0));
            prop_assert!(p.per_feature_std.iter().all(|s| *s >= STD_FLOOR));
        }

        #[test]
        fn distance_is_symmetric(a in prop::collection::vec(-5.0f64..5.0, 4),
                                 b in prop::collection::vec(-5.0f64..5.0, 4)) {
            let (a, b) = (fv(&a), fv(&b));
            prop_assert_eq!(squared_distance(&a, &b).unwrap(), squared_distance(&b, &a).unwrap());
        }
    }
}
