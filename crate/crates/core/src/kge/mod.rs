//! TransE knowledge graph embeddings.
//!
//! Triplets are scored as `gamma - ||h + r - t||_2` and trained with the
//! logistic loss `log(1 + exp(-y * score))` over positives (`y = +1`) and
//! filtered head/tail corruptions (`y = -1`).

mod io;
mod train;
mod validate;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityKind, PropertyGraph, Relation};

pub use io::{read_model, write_model, ModelHeader};
pub use train::{sample_negatives, train, train_graph, TrainOutput};
pub use validate::{
    kfold_validate, link_prediction, score_histogram, FoldScore, KfoldResult, LinkPredictionReport,
    RelationScoreSummary,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgeConfig {
    pub dim: usize,
    pub gamma: f64,
    pub negatives_per_positive: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub include_relations: BTreeSet<Relation>,
    /// Rescale touched entity rows to unit norm after every update.
    pub unit_norm_entities: bool,
    /// Threads used to compute per-term gradients. Results do not depend on
    /// this value.
    pub workers: usize,
}

impl Default for KgeConfig {
    fn default() -> Self {
        Self {
            dim: 400,
            gamma: 12.0,
            negatives_per_positive: 16,
            batch_size: 1024,
            learning_rate: 0.01,
            epochs: 100,
            seed: 0,
            include_relations: Relation::ALL.into_iter().collect(),
            unit_norm_entities: false,
            workers: 1,
        }
    }
}

impl KgeConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(m.to_string()));
        if self.dim == 0 {
            return fail("dim must be at least 1");
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return fail("gamma must be a positive finite number");
        }
        if self.negatives_per_positive == 0 {
            return fail("negatives_per_positive must be at least 1");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return fail("learning_rate must be a non-negative finite number");
        }
        if self.workers == 0 {
            return fail("workers must be at least 1");
        }
        Ok(())
    }
}

/// Triplet over dense entity and relation indexes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct IdTriplet {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl IdTriplet {
    pub fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// Training data: entity and relation counts plus positive triplets.
#[derive(Debug, Clone, PartialEq)]
pub struct KgeDataset {
    pub num_entities: usize,
    pub num_relations: usize,
    pub triplets: Vec<IdTriplet>,
}

impl KgeDataset {
    /// All graph triplets whose relation is included. Relation indexes follow
    /// [`Relation::index`], so the relation table always has five rows.
    pub fn from_graph(graph: &PropertyGraph, include: &BTreeSet<Relation>) -> Self {
        Self {
            num_entities: graph.num_entities(),
            num_relations: Relation::ALL.len(),
            triplets: graph
                .triplets()
                .iter()
                .filter(|t| include.contains(&t.relation))
                .map(|t| IdTriplet::new(t.head.0, t.relation.index() as u32, t.tail.0))
                .collect(),
        }
    }

    pub fn relations_present(&self) -> BTreeSet<u32> {
        self.triplets.iter().map(|t| t.relation).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KgeModel {
    pub dim: usize,
    pub gamma: f64,
    pub num_entities: usize,
    pub num_relations: usize,
    /// Row-major `num_entities x dim`.
    pub entity_embeddings: Vec<f64>,
    /// Row-major `num_relations x dim`.
    pub relation_embeddings: Vec<f64>,
}

impl KgeModel {
    pub fn entity(&self, i: usize) -> &[f64] {
        &self.entity_embeddings[i * self.dim..(i + 1) * self.dim]
    }

    pub fn relation(&self, r: usize) -> &[f64] {
        &self.relation_embeddings[r * self.dim..(r + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.entity_embeddings
            .iter()
            .chain(&self.relation_embeddings)
            .all(|v| v.is_finite())
    }

    fn check(&self, t: IdTriplet) -> Result<()> {
        if t.head as usize >= self.num_entities || t.tail as usize >= self.num_entities {
            return Err(Error::OutOfBounds {
                what: "entity",
                index: t.head.max(t.tail) as usize,
                size: self.num_entities,
            });
        }
        if t.relation as usize >= self.num_relations {
            return Err(Error::OutOfBounds {
                what: "relation",
                index: t.relation as usize,
                size: self.num_relations,
            });
        }
        Ok(())
    }

    /// Score without bounds checks; callers validate ids.
    pub(crate) fn score_unchecked(&self, t: IdTriplet) -> f64 {
        score_vectors(
            self.entity(t.head as usize),
            self.relation(t.relation as usize),
            self.entity(t.tail as usize),
            self.gamma,
        )
    }
}

/// Embedding rows of the paper entities, keyed by paper id.
pub fn paper_vectors(graph: &PropertyGraph, model: &KgeModel) -> Result<BTreeMap<String, Vec<f64>>> {
    if model.num_entities != graph.num_entities() {
        return Err(Error::DimensionMismatch {
            expected: graph.num_entities(),
            actual: model.num_entities,
        });
    }
    Ok(graph
        .entities_of_kind(EntityKind::Paper)
        .map(|e| (e.key.clone(), model.entity(e.id.index()).to_vec()))
        .collect())
}

/// `gamma - ||h + r - t||_2`
pub fn score_vectors(h: &[f64], r: &[f64], t: &[f64], gamma: f64) -> f64 {
    let sq: f64 = h
        .iter()
        .zip(r)
        .zip(t)
        .map(|((h, r), t)| {
            let d = h + r - t;
            d * d
        })
        .sum();
    gamma - sq.sqrt()
}

pub fn score_triplet(model: &KgeModel, triplet: IdTriplet) -> Result<f64> {
    model.check(triplet)?;
    Ok(model.score_unchecked(triplet))
}

/// `log(1 + exp(-y * score))` in a form that neither overflows nor loses
/// precision for large |score|.
pub fn loss_term(score: f64, label: f64) -> f64 {
    let x = -label * score;
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Loss of one term and its gradient with respect to `h`. The gradient with
/// respect to `r` is identical and the one with respect to `t` is its
/// negation, since the score depends on `h + r - t` only.
///
/// At `h + r = t` the norm is not differentiable; the zero subgradient is
/// returned.
pub fn loss_and_gradient(h: &[f64], r: &[f64], t: &[f64], gamma: f64, label: f64) -> (f64, Vec<f64>) {
    let residual: Vec<f64> = h.iter().zip(r).zip(t).map(|((h, r), t)| h + r - t).collect();
    let norm = residual.iter().map(|v| v * v).sum::<f64>().sqrt();
    let score = gamma - norm;
    let loss = loss_term(score, label);
    if norm == 0.0 {
        return (loss, vec![0.0; h.len()]);
    }
    // dL/dscore = -y * sigmoid(-y * score); dscore/dh = -residual / norm
    let coeff = label * sigmoid(-label * score) / norm;
    (loss, residual.into_iter().map(|v| coeff * v).collect())
}
