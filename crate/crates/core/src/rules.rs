//! IF-THEN rules: one disjunctive rule per mega-cloud.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{DmrError, Result};
use crate::model::DmrModel;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Antecedent {
    pub cloud_id: usize,
    pub source_sample_id: Option<usize>,
    pub synthetic: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rule {
    pub mega_cloud_id: usize,
    pub class_label: String,
    pub antecedents: Vec<Antecedent>,
}

impl Rule {
    pub fn mentions(&self, cloud_id: usize) -> bool {
        self.antecedents.iter().any(|a| a.cloud_id == cloud_id)
    }
}

impl fmt::Display for Antecedent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(x ~ prototype {}", self.cloud_id)?;
        match (self.synthetic, self.source_sample_id) {
            (true, _) => f.write_str(" [synthetic])"),
            (false, Some(row)) => write!(f, " [row {row}])"),
            (false, None) => f.write_str(")"),
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("IF ")?;
        for (i, a) in self.antecedents.iter().enumerate() {
            if i > 0 {
                f.write_str(" OR ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, " THEN {:?}", self.class_label)
    }
}

/// Rules ordered by mega-cloud id, antecedents by cloud id.
pub fn export_rules(model: &DmrModel) -> Result<Vec<Rule>> {
    let megaclouds = model.megaclouds.as_ref().ok_or(DmrError::MergeFirst)?;
    let index = model.cloud_index();
    megaclouds
        .iter()
        .map(|mg| {
            let antecedents = mg
                .member_cloud_ids
                .iter()
                .map(|id| {
                    let c = index
                        .get(id)
                        .ok_or_else(|| DmrError::integrity("megaclouds", format!("unknown cloud id {id}")))?;
                    Ok(Antecedent {
                        cloud_id: *id,
                        source_sample_id: c.source_sample_id,
                        synthetic: c.synthetic,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(Rule {
                mega_cloud_id: mg.id,
                class_label: mg.class_label.clone(),
                antecedents,
            })
        })
        .collect()
}
