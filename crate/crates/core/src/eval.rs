//! Accuracy and the repeated stratified hold-out protocol.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::balancer::DEFAULT_BALANCE_CAP;
use crate::error::{DmrError, Result};
use crate::inference::{cascade_predict, flat_predict, DEFAULT_THRESHOLD};
use crate::io::Dataset;
use crate::model::{train, DmrModel, TrainConfig};

/// Exact-match rate.
pub fn accuracy(predictions: &[String], truth: &[String]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(DmrError::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if truth.is_empty() {
        return Err(DmrError::NoSamples);
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// `repeats` independent stratified splits. Each class contributes
/// `round(train_fraction * n)` rows to training, kept within `1..n`.
pub fn stratified_splits(labels: &[String], repeats: usize, train_fraction: f64, seed: u64) -> Result<Vec<Split>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DmrError::InvalidConfig(format!(
            "train fraction {train_fraction} must lie strictly between 0 and 1"
        )));
    }
    let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, y) in labels.iter().enumerate() {
        by_class.entry(y).or_default().push(i);
    }
    for (label, rows) in &by_class {
        if rows.len() < 2 {
            return Err(DmrError::InsufficientClassSamples {
                label: label.to_string(),
                count: rows.len(),
            });
        }
    }
    Ok((0..repeats)
        .map(|rep| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(rep as u64);
            let mut split = Split {
                train: Vec::new(),
                test: Vec::new(),
            };
            for rows in by_class.values() {
                let mut rows = rows.clone();
                rows.shuffle(&mut rng);
                let n = rows.len();
                let k = ((train_fraction * n as f64).round() as usize).clamp(1, n - 1);
                split.train.extend_from_slice(&rows[..k]);
                split.test.extend_from_slice(&rows[k..]);
            }
            split.train.sort_unstable();
            split.test.sort_unstable();
            split
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalConfig {
    pub repeats: usize,
    pub train_fraction: f64,
    pub seed: u64,
    pub balance: bool,
    pub balance_cap: usize,
    pub threshold: f64,
    /// Use the flat nearest-prototype decision instead of the cascade.
    pub flat: bool,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            repeats: 10,
            train_fraction: 0.8,
            seed: 0,
            balance: false,
            balance_cap: DEFAULT_BALANCE_CAP,
            threshold: DEFAULT_THRESHOLD,
            flat: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FoldOutcome {
    pub model: DmrModel,
    pub predictions: Vec<String>,
    pub truth: Vec<String>,
}

/// Trains on `split.train` and predicts `split.test`. Nothing from the test
/// rows reaches standardization or training.
pub fn run_split(dataset: &Dataset, split: &Split, cfg: &EvalConfig, fold: usize) -> Result<FoldOutcome> {
    let train_set = dataset.subset(&split.train);
    let test_set = dataset.subset(&split.test);
    let tcfg = TrainConfig {
        threshold: cfg.threshold,
        balance: cfg.balance,
        balance_cap: cfg.balance_cap,
        seed: cfg.seed.wrapping_add(fold as u64),
    };
    let model = train(&train_set, &tcfg)?.model;
    let predictions = test_set
        .samples
        .iter()
        .map(|x| {
            let z = model.standardize(x)?;
            let p = if cfg.flat {
                flat_predict(&z, &model)?
            } else {
                cascade_predict(&z, &model)?
            };
            Ok(p.label)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FoldOutcome {
        model,
        predictions,
        truth: test_set.labels,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub accuracy: f64,
    pub n_prototypes: usize,
    pub n_megaclouds: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Pooled exact-match rate over all folds.
    pub accuracy: f64,
    /// Recall per class from the pooled confusion matrix.
    pub per_class_accuracy: BTreeMap<String, f64>,
    pub labels: Vec<String>,
    /// Rows are true classes, columns predicted classes, both in `labels` order.
    pub confusion: Vec<Vec<usize>>,
    /// Mean over folds, rounded.
    pub n_prototypes: usize,
    pub n_megaclouds: usize,
    pub fold_accuracies: Vec<f64>,
    pub folds: Vec<FoldSummary>,
    pub config: EvalConfig,
}

impl EvalReport {
    pub fn mean_fold_accuracy(&self) -> f64 {
        self.fold_accuracies.iter().sum::<f64>() / self.fold_accuracies.len() as f64
    }
}

pub fn evaluate(dataset: &Dataset, cfg: &EvalConfig) -> Result<EvalReport> {
    if cfg.repeats == 0 {
        return Err(DmrError::InvalidConfig("at least one repetition is required".into()));
    }
    let splits = stratified_splits(&dataset.labels, cfg.repeats, cfg.train_fraction, cfg.seed)?;
    let outcomes: Vec<FoldOutcome> = splits
        .par_iter()
        .enumerate()
        .map(|(k, s)| run_split(dataset, s, cfg, k))
        .collect::<Result<_>>()?;

    let mut labels: Vec<String> = dataset.labels.clone();
    labels.sort();
    labels.dedup();
    let pos: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut confusion = vec![vec![0usize; labels.len()]; labels.len()];
    let mut folds = Vec::with_capacity(outcomes.len());
    for o in &outcomes {
        for (p, t) in o.predictions.iter().zip(&o.truth) {
            confusion[pos[t.as_str()]][pos[p.as_str()]] += 1;
        }
        folds.push(FoldSummary {
            accuracy: accuracy(&o.predictions, &o.truth)?,
            n_prototypes: o.model.n_clouds(),
            n_megaclouds: o.model.megaclouds.as_ref().map_or(0, Vec::len),
        });
    }
    let total: usize = confusion.iter().flatten().sum();
    let trace: usize = (0..labels.len()).map(|i| confusion[i][i]).sum();
    let per_class_accuracy = labels
        .iter()
        .enumerate()
        .map(|(i, l)| {
            let row: usize = confusion[i].iter().sum();
            (
                l.clone(),
                if row == 0 {
                    0.0
                } else {
                    confusion[i][i] as f64 / row as f64
                },
            )
        })
        .collect();
    let mean_of = |f: fn(&FoldSummary) -> usize| {
        (folds.iter().map(f).sum::<usize>() as f64 / folds.len() as f64).round() as usize
    };
    Ok(EvalReport {
        accuracy: trace as f64 / total as f64,
        per_class_accuracy,
        n_prototypes: mean_of(|f| f.n_prototypes),
        n_megaclouds: mean_of(|f| f.n_megaclouds),
        fold_accuracies: folds.iter().map(|f| f.accuracy).collect(),
        labels,
        confusion,
        folds,
        config: cfg.clone(),
    })
}

impl fmt::Display for EvalReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "accuracy: {:.4}", self.accuracy)?;
        writeln!(f, "repeats: {}", self.fold_accuracies.len())?;
        let folds: Vec<String> = self.fold_accuracies.iter().map(|a| format!("{a:.4}")).collect();
        writeln!(f, "fold_accuracies: {}", folds.join(" "))?;
        writeln!(f, "prototypes (mean): {}", self.n_prototypes)?;
        writeln!(f, "megaclouds (mean): {}", self.n_megaclouds)?;
        writeln!(f, "per_class_accuracy:")?;
        for (l, a) in &self.per_class_accuracy {
            writeln!(f, "  {l}: {a:.4}")?;
        }
        writeln!(f, "confusion (rows = truth, columns = predicted):")?;
        writeln!(f, "  labels: {}", self.labels.join(" "))?;
        for (l, row) in self.labels.iter().zip(&self.confusion) {
            let cells: Vec<String> = row.iter().map(usize::to_string).collect();
            writeln!(f, "  {l}: {}", cells.join(" "))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn accuracy_examples() {
        let truth = s(&["a"; 10]);
        let mut pred = truth.clone();
        pred[0] = "b".into();
        pred[1] = "b".into();
        assert_eq!(accuracy(&pred, &truth).unwrap(), 0.8);
        assert_eq!(accuracy(&truth, &truth).unwrap(), 1.0);
        assert_eq!(accuracy(&s(&["x", "y"]), &s(&["a", "b"])).unwrap(), 0.0);
        assert!(accuracy(&s(&["a"]), &s(&[])).is_err());
        assert!(accuracy(&[], &[]).is_err());
    }

    #[test]
    fn splits_are_stratified() {
        let mut labels = s(&["a"; 10]);
        labels.extend(s(&["b"; 5]));
        labels.extend(s(&["c"; 2]));
        let splits = stratified_splits(&labels, 10, 0.8, 3).unwrap();
        assert_eq!(splits.len(), 10);
        for sp in &splits {
            let count = |set: &[usize], l: &str| set.iter().filter(|&&i| labels[i] == l).count();
            assert_eq!((count(&sp.train, "a"), count(&sp.test, "a")), (8, 2));
            assert_eq!((count(&sp.train, "b"), count(&sp.test, "b")), (4, 1));
            assert_eq!((count(&sp.train, "c"), count(&sp.test, "c")), (1, 1));
            let mut all: Vec<usize> = sp.train.iter().chain(&sp.test).copied().collect();
            all.sort();
            assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
        }
        assert_ne!(splits[0], splits[1]);
        assert_eq!(splits, stratified_splits(&labels, 10, 0.8, 3).unwrap());
    }

    #[test]
    fn singleton_class_cannot_be_split() {
        let labels = s(&["a", "a", "lonely"]);
        match stratified_splits(&labels, 1, 0.8, 0) {
            Err(DmrError::InsufficientClassSamples { label, count }) => {
                assert_eq!((label.as_str(), count), ("lonely", 1));
            }
            other => panic!("{other:?}"),
        }
    }
}
