//! Synthetic augmentation that equalizes per-class prototype counts.
//!
//! Minority classes are fed synthetic samples generated around their own
//! prototypes: a pair of members close to a prototype is disturbed with
//! Gaussian noise at the cloud's scale and a random per-coordinate
//! interpolation of the two disturbed points is streamed through the class's
//! learner. Generation stops once the class owns as many clouds as the
//! largest class.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{cauchy, floored};
use crate::error::{DmrError, Result};
use crate::learner::{Absorption, DataCloud};
use crate::model::DmrModel;
use crate::vectors::{sq_dist, FeatureVector};

/// Fraction of the cloud's standard deviation that bounds the seed zone.
pub const ZONE_FRACTION: f64 = 0.3;

/// Default generated-samples budget per unit of initial deficit.
pub const DEFAULT_BALANCE_CAP: usize = 1000;

#[derive(Clone, Debug, PartialEq)]
pub struct SeedPair {
    pub p: FeatureVector,
    pub q: FeatureVector,
    pub cloud_id: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSample {
    pub features: FeatureVector,
    pub class_label: String,
    /// Cloud the sample was generated around.
    pub provenance: usize,
    /// The two disturbed endpoints the sample was interpolated between.
    pub endpoints: (FeatureVector, FeatureVector),
    pub outcome: SyntheticOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticOutcome {
    NewCloud,
    Reinforced,
    Promoted,
}

/// Per-class gap to the largest cloud count.
pub fn compute_deficits(model: &DmrModel) -> BTreeMap<String, usize> {
    let target = model.classes.iter().map(|c| c.clouds.len()).max().unwrap_or(0);
    model
        .classes
        .iter()
        .map(|c| (c.class_label.clone(), target - c.clouds.len()))
        .collect()
}

/// Picks two distinct members inside the seed zone of `cloud`. With fewer
/// than two in-zone members the pair is (center, nearest member not equal to
/// the center), and without such a member it is (center, center).
pub fn select_seed_pair<R: Rng + ?Sized>(cloud: &DataCloud, members: &[FeatureVector], rng: &mut R) -> SeedPair {
    let radius = ZONE_FRACTION * cloud.sigma();
    let r2 = radius * radius;
    let in_zone: Vec<usize> = members
        .iter()
        .enumerate()
        .filter(|(_, m)| sq_dist(m, &cloud.center) <= r2)
        .map(|(i, _)| i)
        .collect();

    let (p, q) = if in_zone.len() >= 2 {
        let picked = sample(rng, in_zone.len(), 2);
        (
            members[in_zone[picked.index(0)]].clone(),
            members[in_zone[picked.index(1)]].clone(),
        )
    } else if let Some(nearest) = members
        .iter()
        .filter(|m| m.as_slice() != cloud.center.as_slice())
        .min_by(|a, b| sq_dist(a, &cloud.center).total_cmp(&sq_dist(b, &cloud.center)))
    {
        (cloud.center.clone(), nearest.clone())
    } else {
        (cloud.center.clone(), cloud.center.clone())
    };
    SeedPair {
        p,
        q,
        cloud_id: cloud.id,
    }
}

/// Adds independent zero-mean Gaussian noise of standard deviation `sigma`
/// to every coordinate of both points.
pub fn perturb_pair<R: Rng + ?Sized>(pair: &SeedPair, sigma: f64, rng: &mut R) -> (FeatureVector, FeatureVector) {
    let mut jitter = |v: &FeatureVector| {
        let out = v
            .iter()
            .map(|x| {
                let g: f64 = rng.sample(StandardNormal);
                x + sigma * g
            })
            .collect();
        FeatureVector::from_raw(out)
    };
    let p = jitter(&pair.p);
    let q = jitter(&pair.q);
    (p, q)
}

/// Random per-coordinate interpolation with weights uniform on `[0, 1]`.
pub fn interpolate<R: Rng + ?Sized>(
    p_hat: &FeatureVector,
    q_hat: &FeatureVector,
    rng: &mut R,
) -> Result<FeatureVector> {
    q_hat.check_dim(p_hat.dim())?;
    let alpha: Vec<f64> = (0..p_hat.dim()).map(|_| rng.random::<f64>()).collect();
    interpolate_with(p_hat, q_hat, &alpha)
}

/// `alpha_i * p_i + (1 - alpha_i) * q_i` per coordinate.
pub fn interpolate_with(p_hat: &FeatureVector, q_hat: &FeatureVector, alpha: &[f64]) -> Result<FeatureVector> {
    q_hat.check_dim(p_hat.dim())?;
    if alpha.len() != p_hat.dim() {
        return Err(DmrError::DimensionMismatch {
            expected: p_hat.dim(),
            found: alpha.len(),
        });
    }
    let out = p_hat
        .iter()
        .zip(q_hat.iter())
        .zip(alpha)
        .map(|((p, q), a)| {
            let v = a * p + (1.0 - a) * q;
            // rounding must not leave the segment
            v.clamp(p.min(*q), p.max(*q))
        })
        .collect();
    Ok(FeatureVector::from_raw(out))
}

/// Per-coordinate noise scale for a cloud, from the spread of its own
/// members: the disturbance vector then has an expected squared norm equal to
/// the cloud's local variance. Singleton clouds get no disturbance.
pub fn coordinate_sigma(cloud: &DataCloud) -> f64 {
    (cloud.local_variance() / cloud.center.dim().max(1) as f64).sqrt()
}

// Scale for a pair with nothing to interpolate across: noise whose expected
// norm is the seed-zone radius, so a lone prototype can still spawn
// distinct samples.
fn degenerate_sigma(cloud: &DataCloud) -> f64 {
    ZONE_FRACTION * (cloud.variance / cloud.center.dim().max(1) as f64).sqrt()
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassBalance {
    pub initial_deficit: usize,
    pub generated: usize,
    pub cap_fired: bool,
    /// Deficit left when the cap fired, before promotion.
    pub residual_deficit: usize,
    pub promoted: usize,
}

#[derive(Clone, Debug)]
pub struct BalanceOutcome {
    pub model: DmrModel,
    pub synthetic: Vec<SyntheticSample>,
    pub per_class: BTreeMap<String, ClassBalance>,
}

impl BalanceOutcome {
    pub fn cap_fired(&self) -> bool {
        self.per_class.values().any(|c| c.cap_fired)
    }
}

/// Brings every class up to the largest per-class cloud count.
///
/// `training_members` maps each cloud id to the standardized training samples
/// in its cell. `cap` bounds generated samples per class at
/// `cap * initial_deficit`; when it fires, the densest reinforcing synthetic
/// samples are promoted to clouds and the residual deficit is reported.
///
/// Each class draws from its own stream derived from one value of `rng`, so
/// the outcome does not depend on class processing order.
pub fn balance_classes<R: Rng + ?Sized>(
    model: &DmrModel,
    training_members: &BTreeMap<usize, Vec<FeatureVector>>,
    cap: usize,
    rng: &mut R,
) -> Result<BalanceOutcome> {
    let deficits = compute_deficits(model);
    let base_seed: u64 = rng.random();
    let mut out = model.clone();
    let mut synthetic = Vec::new();
    let mut per_class = BTreeMap::new();

    if deficits.values().all(|&d| d == 0) {
        return Ok(BalanceOutcome {
            model: out,
            synthetic,
            per_class,
        });
    }

    let target = model.classes.iter().map(|c| c.clouds.len()).max().unwrap_or(0);
    let mut next_id = model.next_cloud_id();

    for (class_index, class) in out.classes.iter_mut().enumerate() {
        let deficit = deficits[&class.class_label];
        if deficit == 0 {
            continue;
        }
        let mut class_rng = ChaCha8Rng::seed_from_u64(base_seed);
        class_rng.set_stream(class_index as u64);

        let mut members: BTreeMap<usize, Vec<FeatureVector>> = class
            .clouds
            .iter()
            .map(|c| (c.id, training_members.get(&c.id).cloned().unwrap_or_default()))
            .collect();
        let budget = cap.saturating_mul(deficit);
        let mut report = ClassBalance {
            initial_deficit: deficit,
            ..ClassBalance::default()
        };
        let first_synthetic = synthetic.len();
        let mut cursor = 0usize;

        while class.clouds.len() < target && report.generated < budget {
            let cloud = &class.clouds[cursor % class.clouds.len()];
            cursor += 1;
            let pair = select_seed_pair(cloud, &members[&cloud.id], &mut class_rng);
            let sigma = match coordinate_sigma(cloud) {
                s if s == 0.0 && pair.p == pair.q => degenerate_sigma(cloud),
                s => s,
            };
            let (p_hat, q_hat) = perturb_pair(&pair, sigma, &mut class_rng);
            let rho = interpolate(&p_hat, &q_hat, &mut class_rng)?;
            let absorbed = class.absorb(&rho, None, true, &mut next_id)?;
            members.entry(absorbed.cloud_id()).or_default().push(rho.clone());
            synthetic.push(SyntheticSample {
                features: rho,
                class_label: class.class_label.clone(),
                provenance: pair.cloud_id,
                endpoints: (p_hat, q_hat),
                outcome: match absorbed {
                    Absorption::NewCloud(_) => SyntheticOutcome::NewCloud,
                    Absorption::Updated(_) => SyntheticOutcome::Reinforced,
                },
            });
            report.generated += 1;
        }

        if class.clouds.len() < target {
            report.cap_fired = true;
            report.residual_deficit = target - class.clouds.len();
            warn!(
                "class {:?}: balance cap of {} samples reached with {} cloud(s) missing",
                class.class_label, budget, report.residual_deficit
            );
            let mean = class.stats.mean.clone();
            let var = floored(class.stats.variance);
            let mut candidates: Vec<(usize, f64)> = synthetic[first_synthetic..]
                .iter()
                .enumerate()
                .filter(|(_, s)| s.outcome == SyntheticOutcome::Reinforced)
                .map(|(i, s)| (first_synthetic + i, cauchy(sq_dist(&s.features, &mean), var)))
                .collect();
            candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (idx, _) in candidates.into_iter().take(report.residual_deficit) {
                class.promote(&synthetic[idx].features, None, true, next_id);
                next_id += 1;
                synthetic[idx].outcome = SyntheticOutcome::Promoted;
                report.promoted += 1;
            }
        }
        per_class.insert(class.class_label.clone(), report);
    }

    out.megaclouds = None;
    out.ranking = None;
    out.provenance.residual_deficits = per_class
        .iter()
        .filter(|(_, r)| r.cap_fired)
        .map(|(l, r)| (l.clone(), r.residual_deficit))
        .collect();
    Ok(BalanceOutcome {
        model: out,
        synthetic,
        per_class,
    })
}
