use std::collections::{BTreeMap, HashSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{sample_negatives, train, IdTriplet, KgeConfig, KgeDataset, KgeModel};
use crate::error::{Error, Result};
use crate::numeric::{derive_seed, mean};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FoldScore {
    pub triplet: IdTriplet,
    pub fold: usize,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationScoreSummary {
    pub relation: u32,
    pub count: usize,
    pub mean_positive: f64,
    pub mean_corrupted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KfoldResult {
    pub folds: usize,
    /// Every triplet scored once, by the model that did not see it.
    pub scores: Vec<FoldScore>,
    /// One filtered corruption per held-out triplet, scored by the same
    /// model; the baseline a consistent positive should beat.
    pub corrupted: Vec<FoldScore>,
    pub warnings: Vec<String>,
}

impl KfoldResult {
    pub fn relation_summaries(&self) -> Vec<RelationScoreSummary> {
        let mut pos: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut neg: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for s in &self.scores {
            pos.entry(s.triplet.relation).or_default().push(s.score);
        }
        for s in &self.corrupted {
            neg.entry(s.triplet.relation).or_default().push(s.score);
        }
        pos.into_iter()
            .map(|(relation, scores)| RelationScoreSummary {
                relation,
                count: scores.len(),
                mean_positive: mean(&scores).unwrap_or(f64::NAN),
                mean_corrupted: neg
                    .get(&relation)
                    .and_then(|v| mean(v))
                    .unwrap_or(f64::NAN),
            })
            .collect()
    }
}

/// Splits the triplets into `folds` seeded random parts; each part is scored
/// by a model trained on the remaining parts.
pub fn kfold_validate(dataset: &KgeDataset, config: &KgeConfig, folds: usize) -> Result<KfoldResult> {
    if folds < 2 {
        return Err(Error::Config("folds must be at least 2".to_string()));
    }
    if dataset.triplets.len() < folds {
        return Err(Error::EmptyInput(format!(
            "{} triplets cannot fill {folds} folds",
            dataset.triplets.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.triplets.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "kfold-split")));
    let mut assignment = vec![0usize; order.len()];
    for (pos, &i) in order.iter().enumerate() {
        assignment[i] = pos % folds;
    }

    let all_positives: HashSet<IdTriplet> = dataset.triplets.iter().copied().collect();
    let all_relations = dataset.relations_present();
    let mut result = KfoldResult {
        folds,
        scores: Vec::with_capacity(dataset.triplets.len()),
        corrupted: Vec::with_capacity(dataset.triplets.len()),
        warnings: Vec::new(),
    };

    for fold in 0..folds {
        let (test, train_triplets): (Vec<_>, Vec<_>) = dataset
            .triplets
            .iter()
            .zip(&assignment)
            .partition(|(_, &f)| f == fold);
        let test: Vec<IdTriplet> = test.into_iter().map(|(t, _)| *t).collect();
        let train_set = KgeDataset {
            num_entities: dataset.num_entities,
            num_relations: dataset.num_relations,
            triplets: train_triplets.into_iter().map(|(t, _)| *t).collect(),
        };
        let present = train_set.relations_present();
        for r in all_relations.difference(&present) {
            result
                .warnings
                .push(format!("fold {fold}: relation {r} has no training triplets"));
        }
        let fold_config = KgeConfig {
            seed: derive_seed(config.seed, &format!("kfold-train-{fold}")),
            ..config.clone()
        };
        let model = train(&train_set, &fold_config)?.model;

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, &format!("kfold-neg-{fold}")));
        for t in test {
            result.scores.push(FoldScore {
                triplet: t,
                fold,
                score: model.score_unchecked(t),
            });
            let neg = sample_negatives(t, 1, dataset.num_entities, &all_positives, &mut rng)[0];
            result.corrupted.push(FoldScore {
                triplet: neg,
                fold,
                score: model.score_unchecked(neg),
            });
        }
    }
    Ok(result)
}

/// Histogram of scores with bins `[lo, lo + width)` aligned to multiples of
/// `width`. Returns `(bin lower edge, count)` in ascending order.
pub fn score_histogram(scores: impl IntoIterator<Item = f64>, width: f64) -> Vec<(f64, usize)> {
    let mut bins: BTreeMap<i64, usize> = BTreeMap::new();
    for s in scores {
        *bins.entry((s / width).floor() as i64).or_default() += 1;
    }
    bins.into_iter()
        .map(|(b, c)| (b as f64 * width, c))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkPredictionReport {
    pub queries: usize,
    pub mrr: f64,
    pub hits_at_1: f64,
    pub hits_at_10: f64,
    /// Expected MRR of a uniformly random ranking over the same filtered
    /// candidate sets.
    pub random_mrr: f64,
}

fn harmonic(n: usize) -> f64 {
    (1..=n).map(|k| 1.0 / k as f64).sum()
}

/// Filtered head and tail prediction over `test`. Candidates forming a known
/// triplet (other than the query itself) are skipped; ties share the mean
/// rank.
pub fn link_prediction(
    model: &KgeModel,
    test: &[IdTriplet],
    known: &HashSet<IdTriplet>,
) -> LinkPredictionReport {
    let n = model.num_entities;
    let per_query: Vec<(f64, f64)> = test
        .par_iter()
        .flat_map_iter(|&t| {
            let true_score = model.score_unchecked(t);
            [true, false].into_iter().map(move |replace_head| {
                let mut greater = 0usize;
                let mut equal = 0usize;
                let mut candidates = 1usize;
                for e in 0..n as u32 {
                    let c = if replace_head {
                        IdTriplet { head: e, ..t }
                    } else {
                        IdTriplet { tail: e, ..t }
                    };
                    if c == t || known.contains(&c) {
                        continue;
                    }
                    candidates += 1;
                    let s = model.score_unchecked(c);
                    if s > true_score {
                        greater += 1;
                    } else if s == true_score {
                        equal += 1;
                    }
                }
                let rank = 1.0 + greater as f64 + equal as f64 / 2.0;
                (rank, harmonic(candidates) / candidates as f64)
            })
        })
        .collect();
    let ranks: Vec<f64> = per_query.iter().map(|p| p.0).collect();
    let reciprocal: Vec<f64> = ranks.iter().map(|r| 1.0 / r).collect();
    let random: Vec<f64> = per_query.iter().map(|p| p.1).collect();
    let hits = |k: f64| ranks.iter().filter(|&&r| r <= k).count() as f64 / ranks.len().max(1) as f64;
    LinkPredictionReport {
        queries: ranks.len(),
        mrr: mean(&reciprocal).unwrap_or(0.0),
        hits_at_1: hits(1.0),
        hits_at_10: hits(10.0),
        random_mrr: mean(&random).unwrap_or(0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dataset() -> KgeDataset {
        KgeDataset {
            num_entities: 8,
            num_relations: 2,
            triplets: (0..5)
                .map(|i| IdTriplet::new(i, i % 2, i + 1))
                .chain(std::iter::once(IdTriplet::new(7, 1, 0)))
                .chain(std::iter::once(IdTriplet::new(6, 0, 2)))
                .chain(std::iter::once(IdTriplet::new(5, 1, 7)))
                .chain(std::iter::once(IdTriplet::new(3, 0, 0)))
                .chain(std::iter::once(IdTriplet::new(2, 1, 6)))
                .collect(),
        }
    }

    fn config() -> KgeConfig {
        KgeConfig {
            dim: 4,
            negatives_per_positive: 2,
            batch_size: 4,
            epochs: 2,
            seed: 11,
            ..KgeConfig::default()
        }
    }

    #[test]
    fn folds_partition_the_triplets() {
        let data = dataset();
        assert_eq!(data.triplets.len(), 10);
        let r = kfold_validate(&data, &config(), 2).unwrap();
        assert_eq!(r.scores.len(), 10);
        let mut seen: Vec<IdTriplet> = r.scores.iter().map(|s| s.triplet).collect();
        seen.sort();
        let mut expected = data.triplets.clone();
        expected.sort();
        assert_eq!(seen, expected);
        for f in 0..2 {
            assert_eq!(r.scores.iter().filter(|s| s.fold == f).count(), 5);
        }
        assert!(r.scores.iter().all(|s| s.score <= 12.0));
    }

    #[test]
    fn kfold_rejects_single_fold() {
        assert!(kfold_validate(&dataset(), &config(), 1).is_err());
    }

    #[test]
    fn histogram_bins() {
        let h = score_histogram([0.2, 0.7, -0.1, 1.0, 1.5], 1.0);
        assert_eq!(h, vec![(-1.0, 1), (0.0, 2), (1.0, 2)]);
    }

    #[test]
    fn random_mrr_reference() {
        // 4 candidates, uniform rank: (1 + 1/2 + 1/3 + 1/4) / 4
        assert!((harmonic(4) / 4.0 - 25.0 / 48.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_model_ranks_first() {
        // Entities on a line, relation = +1 step.
        let model = KgeModel {
            dim: 1,
            gamma: 12.0,
            num_entities: 5,
            num_relations: 1,
            entity_embeddings: vec![0.0, 1.0, 2.0, 3.0, 4.0],
            relation_embeddings: vec![1.0],
        };
        let test: Vec<_> = (0..4).map(|i| IdTriplet::new(i, 0, i + 1)).collect();
        let report = link_prediction(&model, &test, &test.iter().copied().collect());
        assert_eq!(report.mrr, 1.0);
        assert_eq!(report.hits_at_1, 1.0);
        assert!(report.random_mrr < 1.0);
    }
}
