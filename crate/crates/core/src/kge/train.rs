use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{loss_and_gradient, IdTriplet, KgeConfig, KgeDataset, KgeModel};
use crate::error::{Error, Result};
use crate::graph::PropertyGraph;

/// Resampling budget per negative before accepting a corruption that is a
/// known positive (but still differs from the source).
const MAX_RESAMPLES: usize = 1000;

/// Draws `n` corruptions of `triplet`. A fair coin picks head or tail, which
/// is replaced by a uniformly random entity; draws that reproduce a triplet in
/// `positives` are redrawn.
pub fn sample_negatives<R: Rng>(
    triplet: IdTriplet,
    n: usize,
    num_entities: usize,
    positives: &HashSet<IdTriplet>,
    rng: &mut R,
) -> Vec<IdTriplet> {
    assert!(num_entities >= 2, "corruption needs at least two entities");
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut attempts = 0;
        loop {
            let corrupt_head = rng.gen_bool(0.5);
            let entity = rng.gen_range(0..num_entities) as u32;
            let candidate = if corrupt_head {
                IdTriplet { head: entity, ..triplet }
            } else {
                IdTriplet { tail: entity, ..triplet }
            };
            attempts += 1;
            if candidate == triplet {
                continue;
            }
            if !positives.contains(&candidate) || attempts >= MAX_RESAMPLES {
                out.push(candidate);
                break;
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub model: KgeModel,
    /// Mean loss term per epoch.
    pub loss_trace: Vec<f64>,
}

/// Uniform initialization in `[-6/sqrt(d), 6/sqrt(d)]`.
fn initialize(n_rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bound = 6.0 / (dim as f64).sqrt();
    (0..n_rows * dim)
        .map(|_| rng.gen_range(-bound..=bound))
        .collect()
}

/// Sparse gradient accumulator keyed by row, applied in first-touch order so
/// updates are deterministic.
struct RowGradients {
    dim: usize,
    slots: HashMap<u32, usize>,
    rows: Vec<u32>,
    values: Vec<f64>,
}

impl RowGradients {
    fn new(dim: usize) -> Self {
        Self {
            dim,
            slots: HashMap::new(),
            rows: Vec::new(),
            values: Vec::new(),
        }
    }

    fn add(&mut self, row: u32, sign: f64, grad: &[f64]) {
        let slot = *self.slots.entry(row).or_insert_with(|| {
            self.rows.push(row);
            self.values.resize(self.values.len() + self.dim, 0.0);
            self.rows.len() - 1
        });
        let dst = &mut self.values[slot * self.dim..(slot + 1) * self.dim];
        for (d, g) in dst.iter_mut().zip(grad) {
            *d += sign * g;
        }
    }

    fn apply(&self, params: &mut [f64], step: f64) {
        for (slot, &row) in self.rows.iter().enumerate() {
            let src = &self.values[slot * self.dim..(slot + 1) * self.dim];
            let dst = &mut params[row as usize * self.dim..(row as usize + 1) * self.dim];
            for (p, g) in dst.iter_mut().zip(src) {
                *p -= step * g;
            }
        }
    }

    fn clear(&mut self) {
        self.slots.clear();
        self.rows.clear();
        self.values.clear();
    }
}

/// Minibatch SGD on the mean logistic loss over positives and their filtered
/// corruptions.
///
/// Negatives are drawn serially from the seeded generator and every batch
/// gradient is evaluated against a fixed parameter snapshot and merged in a
/// fixed order, so the result is bitwise reproducible for any `workers`.
pub fn train(dataset: &KgeDataset, config: &KgeConfig) -> Result<TrainOutput> {
    config.validate()?;
    if dataset.triplets.is_empty() {
        return Err(Error::EmptyInput("no training triplets".to_string()));
    }
    if dataset.num_entities < 2 {
        return Err(Error::EmptyInput("need at least two entities".to_string()));
    }
    for t in &dataset.triplets {
        if t.head as usize >= dataset.num_entities || t.tail as usize >= dataset.num_entities {
            return Err(Error::OutOfBounds {
                what: "entity",
                index: t.head.max(t.tail) as usize,
                size: dataset.num_entities,
            });
        }
        if t.relation as usize >= dataset.num_relations {
            return Err(Error::OutOfBounds {
                what: "relation",
                index: t.relation as usize,
                size: dataset.num_relations,
            });
        }
    }

    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut model = KgeModel {
        dim,
        gamma: config.gamma,
        num_entities: dataset.num_entities,
        num_relations: dataset.num_relations,
        entity_embeddings: initialize(dataset.num_entities, dim, &mut rng),
        relation_embeddings: initialize(dataset.num_relations, dim, &mut rng),
    };
    let positives: HashSet<IdTriplet> = dataset.triplets.iter().copied().collect();
    let mut order = dataset.triplets.clone();
    let mut entity_grads = RowGradients::new(dim);
    let mut relation_grads = RowGradients::new(dim);
    let mut loss_trace = Vec::with_capacity(config.epochs);

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_losses = Vec::with_capacity(order.len() * (1 + config.negatives_per_positive));
        for (batch_index, batch) in order.chunks(config.batch_size).enumerate() {
            let mut terms = Vec::with_capacity(batch.len() * (1 + config.negatives_per_positive));
            for &pos in batch {
                terms.push((pos, 1.0));
                for neg in sample_negatives(
                    pos,
                    config.negatives_per_positive,
                    dataset.num_entities,
                    &positives,
                    &mut rng,
                ) {
                    terms.push((neg, -1.0));
                }
            }

            let snapshot = &model;
            let evaluate = |&(t, y): &(IdTriplet, f64)| {
                loss_and_gradient(
                    snapshot.entity(t.head as usize),
                    snapshot.relation(t.relation as usize),
                    snapshot.entity(t.tail as usize),
                    snapshot.gamma,
                    y,
                )
            };
            let results: Vec<(f64, Vec<f64>)> = if config.workers > 1 {
                pool.install(|| terms.par_iter().map(evaluate).collect())
            } else {
                terms.iter().map(evaluate).collect()
            };

            entity_grads.clear();
            relation_grads.clear();
            let mut batch_loss = 0.0;
            for (&(t, _), (loss, grad)) in terms.iter().zip(&results) {
                batch_loss += loss;
                epoch_losses.push(*loss);
                entity_grads.add(t.head, 1.0, grad);
                relation_grads.add(t.relation, 1.0, grad);
                entity_grads.add(t.tail, -1.0, grad);
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: batch_index,
                    value: batch_loss,
                });
            }
            let step = config.learning_rate / terms.len() as f64;
            entity_grads.apply(&mut model.entity_embeddings, step);
            relation_grads.apply(&mut model.relation_embeddings, step);
            if config.unit_norm_entities {
                for &row in &entity_grads.rows {
                    let v = &mut model.entity_embeddings
                        [row as usize * dim..(row as usize + 1) * dim];
                    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    if n > 0.0 {
                        v.iter_mut().for_each(|x| *x /= n);
                    }
                }
            }
        }
        let mean = crate::numeric::mean(&epoch_losses).unwrap_or(0.0);
        if !mean.is_finite() || !model.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: 0,
                value: mean,
            });
        }
        loss_trace.push(mean);
    }
    Ok(TrainOutput { model, loss_trace })
}

/// Trains on the graph's triplets of the configured relation types. Every
/// included relation type must have at least one triplet.
pub fn train_graph(graph: &PropertyGraph, config: &KgeConfig) -> Result<TrainOutput> {
    let dataset = KgeDataset::from_graph(graph, &config.include_relations);
    let present = dataset.relations_present();
    for r in &config.include_relations {
        if !present.contains(&(r.index() as u32)) {
            return Err(Error::EmptyInput(format!(
                "no {r} triplets to train on; exclude the relation or add data"
            )));
        }
    }
    train(&dataset, config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: u32) -> KgeDataset {
        KgeDataset {
            num_entities: n as usize,
            num_relations: 1,
            triplets: (0..n - 1).map(|i| IdTriplet::new(i, 0, i + 1)).collect(),
        }
    }

    fn small_config() -> KgeConfig {
        KgeConfig {
            dim: 8,
            negatives_per_positive: 4,
            batch_size: 4,
            learning_rate: 0.5,
            epochs: 5,
            seed: 3,
            ..KgeConfig::default()
        }
    }

    #[test]
    fn negatives_are_deterministic_and_never_the_source() {
        let data = chain(10);
        let positives: HashSet<_> = data.triplets.iter().copied().collect();
        let t = data.triplets[3];
        let a = sample_negatives(t, 50, 10, &positives, &mut ChaCha8Rng::seed_from_u64(1));
        let b = sample_negatives(t, 50, 10, &positives, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(a, b);
        for n in &a {
            assert_ne!(*n, t);
            assert!(!positives.contains(n));
            assert!(n.head == t.head || n.tail == t.tail);
        }
    }

    #[test]
    fn head_corruption_rate_is_about_half() {
        let positives = HashSet::from([IdTriplet::new(0, 0, 1)]);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let t = IdTriplet::new(0, 0, 1);
        let negs = sample_negatives(t, 10_000, 1000, &positives, &mut rng);
        let heads = negs.iter().filter(|n| n.head != t.head).count();
        let frac = heads as f64 / negs.len() as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn zero_learning_rate_keeps_initialization() {
        let config = KgeConfig {
            learning_rate: 0.0,
            epochs: 1,
            ..small_config()
        };
        let trained = train(&chain(6), &config).unwrap().model;
        let zero_epochs = train(&chain(6), &KgeConfig { epochs: 0, ..config }).unwrap().model;
        assert_eq!(trained, zero_epochs);
        let bound = 6.0 / (8f64).sqrt();
        assert!(trained.entity_embeddings.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn training_is_bitwise_deterministic_across_workers() {
        let a = train(&chain(12), &small_config()).unwrap();
        let b = train(&chain(12), &small_config()).unwrap();
        let c = train(&chain(12), &KgeConfig { workers: 3, ..small_config() }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let config = KgeConfig {
            learning_rate: 1e308,
            epochs: 3,
            ..small_config()
        };
        assert!(matches!(
            train(&chain(6), &config),
            Err(Error::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn unit_norm_projection() {
        let config = KgeConfig {
            unit_norm_entities: true,
            ..small_config()
        };
        let m = train(&chain(6), &config).unwrap().model;
        for i in 0..6 {
            let n = crate::numeric::norm(m.entity(i));
            assert!((n - 1.0).abs() < 1e-12);
        }
    }
}
