//! Explainable prototype-based classification.
//!
//! Training streams each class's samples through an online prototype
//! learner built on the Cauchy data density. Classes with fewer prototypes
//! can be topped up with synthetic samples generated around their own
//! prototypes, after which adjacent same-class clouds are merged into
//! mega-clouds. Inference walks prototypes ranked by training impurity in
//! overlapping pairs and accepts the first pairwise winner whose similarity
//! clears a confidence threshold, falling back to the nearest prototype.
//! Every mega-cloud exports as one IF-THEN rule.
//!
//! ```
//! use dmr_core::{cascade_predict, train, Dataset, FeatureVector, TrainConfig};
//!
//! let fv = |v: &[f64]| FeatureVector::new(v.to_vec()).unwrap();
//! let data = Dataset::new(
//!     vec![fv(&[0.0, 0.1]), fv(&[0.2, 0.0]), fv(&[5.0, 5.1]), fv(&[5.2, 4.9])],
//!     vec!["a".into(), "a".into(), "b".into(), "b".into()],
//! )
//! .unwrap();
//! let model = train(&data, &TrainConfig::default()).unwrap().model;
//! let query = model.standardize(&fv(&[5.1, 5.0])).unwrap();
//! assert_eq!(cascade_predict(&query, &model).unwrap().label, "b");
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balancer;
pub mod density;
pub mod error;
pub mod eval;
pub mod inference;
pub mod io;
pub mod learner;
pub mod megaclouds;
pub mod model;
pub mod rules;
pub mod vectors;

pub use balancer::{
    balance_classes, compute_deficits, interpolate, interpolate_with, perturb_pair, select_seed_pair, BalanceOutcome,
    ClassBalance, SeedPair, SyntheticOutcome, SyntheticSample, DEFAULT_BALANCE_CAP,
};
pub use density::{class_typicality, density, similarity, ClassTypicality, VARIANCE_FLOOR};
pub use error::{DmrError, Result};
pub use eval::{accuracy, evaluate, run_split, stratified_splits, EvalConfig, EvalReport, Split};
pub use inference::{
    cascade_predict, cascade_predict_with, flat_predict, pairwise_max, rank_prototypes, DecisionPath, Prediction,
    RankedPrototypes, DEFAULT_THRESHOLD,
};
pub use io::{load_csv, load_model, load_queries, model_from_json, model_to_json, save_model, Dataset};
pub use learner::{
    assign_nearest, learn_class, learn_class_with_sources, novelty_check, update_prototype, Absorption, ClassModel,
    DataCloud,
};
pub use megaclouds::{adjacency_test, merge_clouds, merge_megaclouds, MegaCloud};
pub use model::{augment, cloud_members, train, DmrModel, Provenance, TrainConfig, TrainOutput, FORMAT_VERSION};
pub use rules::{export_rules, Antecedent, Rule};
pub use vectors::{
    squared_distance, standardize_apply, standardize_fit, update_running_stats, FeatureVector, RunningStats,
    StandardizationParams,
};
