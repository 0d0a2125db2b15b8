//! Cross-class merging of adjacent same-class data clouds.
//!
//! Two clouds are adjacent when the midpoint of their centers has exactly
//! those two centers as its nearest neighbours among all clouds of all
//! classes. Mega-clouds are the connected components of the same-class
//! adjacency graph.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::learner::DataCloud;
use crate::model::DmrModel;
use crate::vectors::sq_dist;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MegaCloud {
    pub id: usize,
    pub class_label: String,
    pub member_cloud_ids: BTreeSet<usize>,
}

pub fn adjacency_test(a: &DataCloud, b: &DataCloud, all_clouds: &[DataCloud]) -> bool {
    let mid: Vec<f64> = a
        .center
        .iter()
        .zip(b.center.iter())
        .map(|(x, y)| 0.5 * (x + y))
        .collect();
    let reach = sq_dist(&mid, &a.center).max(sq_dist(&mid, &b.center));
    all_clouds
        .iter()
        .filter(|c| c.id != a.id && c.id != b.id)
        .all(|c| sq_dist(&mid, &c.center) > reach)
}

struct DisjointSet {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        DisjointSet {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

pub fn merge_megaclouds(model: &DmrModel) -> Vec<MegaCloud> {
    let clouds: Vec<DataCloud> = model.clouds().cloned().collect();
    merge_clouds(&clouds)
}

/// Mega-clouds over an arbitrary cloud collection. Ids are assigned in order
/// of each component's lowest member cloud id.
pub fn merge_clouds(clouds: &[DataCloud]) -> Vec<MegaCloud> {
    let n = clouds.len();
    let edges: Vec<(usize, usize)> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            ((i + 1)..n)
                .filter(move |&j| clouds[i].class_label == clouds[j].class_label)
                .filter(move |&j| adjacency_test(&clouds[i], &clouds[j], clouds))
                .map(move |j| (i, j))
        })
        .collect();

    let mut dsu = DisjointSet::new(n);
    for (i, j) in edges {
        dsu.union(i, j);
    }

    let mut groups: std::collections::BTreeMap<usize, BTreeSet<usize>> = Default::default();
    for i in 0..n {
        let root = dsu.find(i);
        groups.entry(root).or_default().insert(i);
    }
    let mut comps: Vec<(usize, String, BTreeSet<usize>)> = groups
        .into_values()
        .map(|members| {
            let label = clouds[*members.iter().next().unwrap()].class_label.clone();
            let ids: BTreeSet<usize> = members.iter().map(|&i| clouds[i].id).collect();
            (*ids.iter().next().unwrap(), label, ids)
        })
        .collect();
    comps.sort_by_key(|c| c.0);
    comps
        .into_iter()
        .enumerate()
        .map(|(id, (_, class_label, member_cloud_ids))| MegaCloud {
            id,
            class_label,
            member_cloud_ids,
        })
        .collect()
}
