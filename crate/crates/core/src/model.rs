//! The trained model and the training pipeline that produces it.

use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancer::{balance_classes, ClassBalance, SyntheticSample, DEFAULT_BALANCE_CAP};
use crate::error::{DmrError, Result};
use crate::inference::{rank_prototypes, RankedPrototypes, DEFAULT_THRESHOLD};
use crate::io::Dataset;
use crate::learner::{learn_class_with_sources, ClassModel, DataCloud};
use crate::megaclouds::{merge_megaclouds, MegaCloud};
use crate::vectors::{standardize_fit, FeatureVector, StandardizationParams};

pub const FORMAT_VERSION: u32 = 1;

/// Settings a model was built with.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub balanced: bool,
    pub balance_cap: usize,
    /// Classes whose balancing budget ran out, with the deficit left at that
    /// point. Empty when balancing completed normally.
    pub residual_deficits: BTreeMap<String, usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DmrModel {
    pub format_version: u32,
    pub dimensionality: usize,
    pub standardization: StandardizationParams,
    pub classes: Vec<ClassModel>,
    pub megaclouds: Option<Vec<MegaCloud>>,
    pub ranking: Option<RankedPrototypes>,
    pub threshold: f64,
    pub provenance: Provenance,
}

/// Standardization that leaves vectors unchanged.
pub fn identity_standardization(dim: usize) -> StandardizationParams {
    StandardizationParams {
        per_feature_mean: FeatureVector::zeros(dim),
        per_feature_std: FeatureVector::from_raw(vec![1.0; dim]),
    }
}

impl DmrModel {
    pub fn from_parts(
        dimensionality: usize,
        standardization: StandardizationParams,
        classes: Vec<ClassModel>,
        threshold: f64,
    ) -> Self {
        DmrModel {
            format_version: FORMAT_VERSION,
            dimensionality,
            standardization,
            classes,
            megaclouds: None,
            ranking: None,
            threshold,
            provenance: Provenance::default(),
        }
    }

    pub fn clouds(&self) -> impl Iterator<Item = &DataCloud> {
        self.classes.iter().flat_map(|c| c.clouds.iter())
    }

    pub fn n_clouds(&self) -> usize {
        self.classes.iter().map(|c| c.clouds.len()).sum()
    }

    pub fn cloud_index(&self) -> BTreeMap<usize, &DataCloud> {
        self.clouds().map(|c| (c.id, c)).collect()
    }

    pub fn cloud(&self, id: usize) -> Option<&DataCloud> {
        self.clouds().find(|c| c.id == id)
    }

    pub fn class(&self, label: &str) -> Option<&ClassModel> {
        self.classes.iter().find(|c| c.class_label == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.class_label.clone()).collect()
    }

    pub fn next_cloud_id(&self) -> usize {
        self.clouds().map(|c| c.id + 1).max().unwrap_or(0)
    }

    pub fn standardize(&self, x: &FeatureVector) -> Result<FeatureVector> {
        self.standardization.apply(x)
    }

    pub fn set_threshold(&mut self, threshold: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&threshold) {
            return Err(DmrError::InvalidThreshold(threshold));
        }
        self.threshold = threshold;
        Ok(())
    }

    /// Recomputes mega-clouds and the prototype ranking from standardized
    /// training data.
    pub fn finalize(&mut self, samples: &[FeatureVector], labels: &[String]) -> Result<()> {
        self.megaclouds = Some(merge_megaclouds(self));
        self.ranking = Some(rank_prototypes(self, samples, labels)?);
        Ok(())
    }

    /// Checks structural consistency, naming the offending field on failure.
    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(DmrError::UnsupportedVersion {
                found: self.format_version as u64,
                supported: FORMAT_VERSION,
            });
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(DmrError::integrity(
                "threshold",
                format!("{} is outside [0, 1]", self.threshold),
            ));
        }
        let dim = self.dimensionality;
        let check_dim = |path: String, v: &FeatureVector| {
            if v.dim() == dim {
                Ok(())
            } else {
                Err(DmrError::integrity(
                    path,
                    format!("expected {dim} values, found {}", v.dim()),
                ))
            }
        };
        check_dim(
            "standardization.per_feature_mean".into(),
            &self.standardization.per_feature_mean,
        )?;
        check_dim(
            "standardization.per_feature_std".into(),
            &self.standardization.per_feature_std,
        )?;
        if let Some(s) = self.standardization.per_feature_std.iter().position(|s| !(*s > 0.0)) {
            return Err(DmrError::integrity(
                format!("standardization.per_feature_std[{s}]"),
                "must be positive",
            ));
        }

        let mut ids: BTreeMap<usize, &str> = BTreeMap::new();
        let mut labels = BTreeSet::new();
        for (ci, class) in self.classes.iter().enumerate() {
            if !labels.insert(class.class_label.as_str()) {
                return Err(DmrError::integrity(
                    format!("classes[{ci}].class_label"),
                    format!("duplicate class {:?}", class.class_label),
                ));
            }
            check_dim(format!("classes[{ci}].stats.mean"), &class.stats.mean)?;
            if class.clouds.is_empty() {
                return Err(DmrError::integrity(format!("classes[{ci}].clouds"), "no data clouds"));
            }
            for (k, c) in class.clouds.iter().enumerate() {
                let path = format!("classes[{ci}].clouds[{k}]");
                check_dim(format!("{path}.center"), &c.center)?;
                if ids.insert(c.id, &c.class_label).is_some() {
                    return Err(DmrError::integrity(
                        format!("{path}.id"),
                        format!("duplicate cloud id {}", c.id),
                    ));
                }
                if c.class_label != class.class_label {
                    return Err(DmrError::integrity(
                        format!("{path}.class_label"),
                        format!("{:?} inside class {:?}", c.class_label, class.class_label),
                    ));
                }
                if c.support == 0 {
                    return Err(DmrError::integrity(format!("{path}.support"), "must be at least 1"));
                }
                if !(c.variance > 0.0 && c.variance.is_finite()) {
                    return Err(DmrError::integrity(format!("{path}.variance"), "must be positive"));
                }
            }
        }

        if let Some(megaclouds) = &self.megaclouds {
            let mut covered = BTreeSet::new();
            for (k, mg) in megaclouds.iter().enumerate() {
                if mg.member_cloud_ids.is_empty() {
                    return Err(DmrError::integrity(
                        format!("megaclouds[{k}].member_cloud_ids"),
                        "empty",
                    ));
                }
                for id in &mg.member_cloud_ids {
                    let path = format!("megaclouds[{k}].member_cloud_ids");
                    match ids.get(id) {
                        None => return Err(DmrError::integrity(path, format!("unknown cloud id {id}"))),
                        Some(l) if *l != mg.class_label => {
                            return Err(DmrError::integrity(
                                path,
                                format!("cloud id {id} belongs to class {l:?}"),
                            ))
                        }
                        _ => {}
                    }
                    if !covered.insert(*id) {
                        return Err(DmrError::integrity(
                            path,
                            format!("cloud id {id} appears in more than one mega-cloud"),
                        ));
                    }
                }
            }
            if let Some(missing) = ids.keys().find(|id| !covered.contains(id)) {
                return Err(DmrError::integrity(
                    "megaclouds",
                    format!("cloud id {missing} is not in any mega-cloud"),
                ));
            }
        }

        if let Some(ranking) = &self.ranking {
            let mut seen = BTreeSet::new();
            for (k, id) in ranking.order.iter().enumerate() {
                if !ids.contains_key(id) {
                    return Err(DmrError::integrity(
                        format!("ranking.order[{k}]"),
                        format!("unknown cloud id {id}"),
                    ));
                }
                if !seen.insert(*id) {
                    return Err(DmrError::integrity(
                        format!("ranking.order[{k}]"),
                        format!("duplicate cloud id {id}"),
                    ));
                }
            }
            if let Some(missing) = ids.keys().find(|id| !seen.contains(id)) {
                return Err(DmrError::integrity(
                    "ranking.order",
                    format!("cloud id {missing} is not ranked"),
                ));
            }
            for (id, e) in &ranking.per_cloud_error {
                if !ids.contains_key(id) {
                    return Err(DmrError::integrity(
                        "ranking.per_cloud_error",
                        format!("unknown cloud id {id}"),
                    ));
                }
                if !(0.0..=1.0).contains(e) {
                    return Err(DmrError::integrity(
                        format!("ranking.per_cloud_error.{id}"),
                        "outside [0, 1]",
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub threshold: f64,
    pub balance: bool,
    /// Generated-sample budget per unit of initial deficit.
    pub balance_cap: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            threshold: DEFAULT_THRESHOLD,
            balance: false,
            balance_cap: DEFAULT_BALANCE_CAP,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutput {
    pub model: DmrModel,
    pub synthetic: Vec<SyntheticSample>,
    pub balance: BTreeMap<String, ClassBalance>,
}

struct ClassStream<'a> {
    label: &'a str,
    samples: Vec<FeatureVector>,
    sources: Vec<usize>,
}

fn group_by_class<'a>(samples: &[FeatureVector], labels: &'a [String], sources: &[usize]) -> Vec<ClassStream<'a>> {
    let mut groups: BTreeMap<&str, ClassStream<'a>> = BTreeMap::new();
    for ((x, y), s) in samples.iter().zip(labels).zip(sources) {
        let g = groups.entry(y.as_str()).or_insert_with(|| ClassStream {
            label: y,
            samples: Vec::new(),
            sources: Vec::new(),
        });
        g.samples.push(x.clone());
        g.sources.push(*s);
    }
    groups.into_values().collect()
}

/// Full training: standardize, learn each class, optionally balance, then
/// merge mega-clouds and rank prototypes.
pub fn train(dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    if !(0.0..=1.0).contains(&cfg.threshold) {
        return Err(DmrError::InvalidThreshold(cfg.threshold));
    }
    let params = standardize_fit(&dataset.samples)?;
    let z: Vec<FeatureVector> = dataset.samples.iter().map(|x| params.apply(x)).collect::<Result<_>>()?;

    let streams = group_by_class(&z, &dataset.labels, &dataset.source_ids);
    let mut classes: Vec<ClassModel> = streams
        .par_iter()
        .map(|s| learn_class_with_sources(&s.samples, &s.sources, s.label, 0))
        .collect::<Result<_>>()?;
    let mut offset = 0;
    for class in &mut classes {
        for c in &mut class.clouds {
            c.id += offset;
        }
        offset += class.clouds.len();
    }

    let mut model = DmrModel::from_parts(dataset.dim(), params, classes, cfg.threshold);
    model.provenance.seed = cfg.seed;
    model.provenance.balance_cap = cfg.balance_cap;

    let (mut model, synthetic, balance) = if cfg.balance {
        rebalance(model, &z, &dataset.labels, cfg)?
    } else {
        (model, Vec::new(), BTreeMap::new())
    };
    model.finalize(&z, &dataset.labels)?;
    Ok(TrainOutput {
        model,
        synthetic,
        balance,
    })
}

/// Balances an already trained model using its (raw) training data.
pub fn augment(model: &DmrModel, dataset: &Dataset, cfg: &TrainConfig) -> Result<TrainOutput> {
    let z: Vec<FeatureVector> = dataset
        .samples
        .iter()
        .map(|x| model.standardize(x))
        .collect::<Result<_>>()?;
    let mut base = model.clone();
    base.provenance.seed = cfg.seed;
    base.provenance.balance_cap = cfg.balance_cap;
    let (mut out, synthetic, balance) = rebalance(base, &z, &dataset.labels, cfg)?;
    out.finalize(&z, &dataset.labels)?;
    Ok(TrainOutput {
        model: out,
        synthetic,
        balance,
    })
}

fn rebalance(
    model: DmrModel,
    z: &[FeatureVector],
    labels: &[String],
    cfg: &TrainConfig,
) -> Result<(DmrModel, Vec<SyntheticSample>, BTreeMap<String, ClassBalance>)> {
    let members = cloud_members(&model, z, labels);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let outcome = balance_classes(&model, &members, cfg.balance_cap, &mut rng)?;
    let mut balanced = outcome.model;
    balanced.provenance.balanced = true;
    Ok((balanced, outcome.synthetic, outcome.per_class))
}

/// Standardized training samples grouped by the cloud of their own class
/// whose center is nearest.
pub fn cloud_members(
    model: &DmrModel,
    samples: &[FeatureVector],
    labels: &[String],
) -> BTreeMap<usize, Vec<FeatureVector>> {
    let mut out: BTreeMap<usize, Vec<FeatureVector>> = BTreeMap::new();
    for class in &model.classes {
        let own: Vec<FeatureVector> = samples
            .iter()
            .zip(labels)
            .filter(|(_, y)| **y == class.class_label)
            .map(|(x, _)| x.clone())
            .collect();
        for (cloud, cell) in class.clouds.iter().zip(class.partition(&own)) {
            out.insert(cloud.id, cell.into_iter().map(|i| own[i].clone()).collect());
        }
    }
    out
}
