//! Fused paper vectors and brute-force top-k retrieval by cosine distance.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{read_csv_maps, write_csv};
use crate::numeric::{derive_seed, dot, norm};

pub const RECOMMENDATIONS_FILE: &str = "recommendations.csv";
pub const COMBINED_FILE: &str = "combined_embeddings.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub semantic: f64,
    pub kge: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            semantic: 1.0,
            kge: 1.0,
        }
    }
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.semantic) || !ok(self.kge) {
            return Err(Error::Config("weights must be finite and non-negative".to_string()));
        }
        if self.semantic == 0.0 && self.kge == 0.0 {
            return Err(Error::Config("at least one weight must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedEmbedding {
    pub paper_id: String,
    pub vector: Vec<f64>,
    pub weights: Weights,
    /// A part was absent or had zero norm and was replaced by zeros.
    pub partial: bool,
}

fn scaled_unit(part: Option<&[f64]>, dim: usize, weight: f64) -> (Vec<f64>, bool) {
    match part {
        Some(v) => {
            let n = norm(v);
            if n > 0.0 && n.is_finite() {
                (v.iter().map(|x| weight * x / n).collect(), false)
            } else {
                (vec![0.0; dim], true)
            }
        }
        None => (vec![0.0; dim], true),
    }
}

/// `concat(w_sem * sem / |sem|, w_kge * kge / |kge|)`. Block sizes are fixed
/// by `sem_dim` and `kge_dim` so absent parts still occupy their block.
pub fn combine(
    paper_id: &str,
    sem: Option<&[f64]>,
    kge: Option<&[f64]>,
    sem_dim: usize,
    kge_dim: usize,
    weights: Weights,
) -> Result<CombinedEmbedding> {
    weights.validate()?;
    if sem.is_none() && kge.is_none() {
        return Err(Error::EmptyInput(format!(
            "paper {paper_id:?} has neither a semantic nor a KGE vector"
        )));
    }
    for (part, expected) in [(sem, sem_dim), (kge, kge_dim)] {
        if let Some(v) = part {
            if v.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: v.len(),
                });
            }
        }
    }
    let (mut vector, sem_partial) = scaled_unit(sem, sem_dim, weights.semantic);
    let (k, kge_partial) = scaled_unit(kge, kge_dim, weights.kge);
    vector.extend(k);
    Ok(CombinedEmbedding {
        paper_id: paper_id.to_string(),
        vector,
        weights,
        partial: sem_partial || kge_partial,
    })
}

/// Combines every paper that has at least one part.
pub fn combine_all(
    sem: &BTreeMap<String, Vec<f64>>,
    kge: &BTreeMap<String, Vec<f64>>,
    weights: Weights,
) -> Result<Vec<CombinedEmbedding>> {
    let sem_dim = sem.values().next().map_or(0, Vec::len);
    let kge_dim = kge.values().next().map_or(0, Vec::len);
    let mut ids: Vec<&String> = sem.keys().chain(kge.keys()).collect();
    ids.sort();
    ids.dedup();
    ids.into_iter()
        .map(|id| {
            combine(
                id,
                sem.get(id).map(Vec::as_slice),
                kge.get(id).map(Vec::as_slice),
                sem_dim,
                kge_dim,
                weights,
            )
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub paper_id: String,
    /// `1 - cos`; absent for the random baseline.
    pub distance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecommendationList {
    pub source: String,
    pub k: usize,
    pub entries: Vec<Recommendation>,
}

impl RecommendationList {
    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.paper_id.as_str())
    }
}

/// Immutable index of unit vectors sorted by paper id.
#[derive(Debug, Clone)]
pub struct SimilarityIndex {
    ids: Vec<String>,
    units: Vec<Vec<f64>>,
    position: HashMap<String, usize>,
}

impl SimilarityIndex {
    pub fn new(items: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Self> {
        let mut items: Vec<(String, Vec<f64>)> = items.into_iter().collect();
        items.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = items.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::GraphInput(format!("duplicate paper id {:?} in index", w[0].0)));
        }
        let dim = items.first().map_or(0, |i| i.1.len());
        let mut ids = Vec::with_capacity(items.len());
        let mut units = Vec::with_capacity(items.len());
        for (id, v) in items {
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    actual: v.len(),
                });
            }
            let n = norm(&v);
            units.push(if n > 0.0 { v.iter().map(|x| x / n).collect() } else { v });
            ids.push(id);
        }
        let position = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self {
            ids,
            units,
            position,
        })
    }

    pub fn from_combined(items: &[CombinedEmbedding]) -> Result<Self> {
        Self::new(items.iter().map(|c| (c.paper_id.clone(), c.vector.clone())))
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    /// Cosine distance; a zero vector has cosine 0 with everything.
    pub fn distance(&self, a: usize, b: usize) -> f64 {
        1.0 - dot(&self.units[a], &self.units[b]).clamp(-1.0, 1.0)
    }

    fn top_k_at(&self, source: usize, k: usize) -> RecommendationList {
        let mut scored: Vec<(f64, usize)> = (0..self.ids.len())
            .filter(|&i| i != source)
            .map(|i| (self.distance(source, i), i))
            .collect();
        // ids are sorted, so index order is paper_id order
        let cmp = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if scored.len() > k {
            scored.select_nth_unstable_by(k, cmp);
            scored.truncate(k);
        }
        scored.sort_by(cmp);
        RecommendationList {
            source: self.ids[source].clone(),
            k,
            entries: scored
                .into_iter()
                .map(|(d, i)| Recommendation {
                    paper_id: self.ids[i].clone(),
                    distance: Some(d),
                })
                .collect(),
        }
    }

    pub fn top_k(&self, source: &str, k: usize) -> Result<RecommendationList> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".to_string()));
        }
        let &i = self
            .position
            .get(source)
            .ok_or_else(|| Error::UnknownPaper(source.to_string()))?;
        Ok(self.top_k_at(i, k))
    }

    pub fn batch_top_k(&self, k: usize) -> Result<BTreeMap<String, RecommendationList>> {
        if k == 0 {
            return Err(Error::Config("k must be at least 1".to_string()));
        }
        if self.is_empty() {
            return Err(Error::EmptyInput("similarity index is empty".to_string()));
        }
        let lists: Vec<RecommendationList> = (0..self.ids.len())
            .into_par_iter()
            .map(|i| self.top_k_at(i, k))
            .collect();
        Ok(lists.into_iter().map(|l| (l.source.clone(), l)).collect())
    }
}

/// Seeded baseline: `k` distinct papers per source, sampled uniformly
/// without replacement from the others. Each source draws from its own
/// stream so the lists do not depend on iteration order.
pub fn random_recommendations(
    ids: &[String],
    k: usize,
    seed: u64,
) -> Result<BTreeMap<String, RecommendationList>> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".to_string()));
    }
    let mut ids = ids.to_vec();
    ids.sort();
    ids.dedup();
    let n = ids.len();
    Ok(ids
        .iter()
        .enumerate()
        .map(|(s, source)| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, source));
            let take = k.min(n.saturating_sub(1));
            let entries = sample(&mut rng, n.saturating_sub(1), take)
                .into_iter()
                .map(|j| {
                    let j = if j >= s { j + 1 } else { j };
                    Recommendation {
                        paper_id: ids[j].clone(),
                        distance: None,
                    }
                })
                .collect();
            (
                source.clone(),
                RecommendationList {
                    source: source.clone(),
                    k,
                    entries,
                },
            )
        })
        .collect())
}

pub fn write_recommendations(
    lists: &BTreeMap<String, RecommendationList>,
    dir: &Path,
    file: &str,
    header: &[String],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_csv(
        dir,
        file,
        header,
        &["source_paper_id", "rank", "target_paper_id", "cosine_distance"],
        lists.values().flat_map(|l| {
            l.entries.iter().enumerate().map(move |(r, e)| {
                vec![
                    l.source.clone(),
                    (r + 1).to_string(),
                    e.paper_id.clone(),
                    e.distance.map(|d| d.to_string()).unwrap_or_default(),
                ]
            })
        }),
    )
}

pub fn read_recommendations(path: &Path) -> Result<BTreeMap<String, RecommendationList>> {
    let file = path.display().to_string();
    let mut rows: BTreeMap<String, Vec<(usize, Recommendation)>> = BTreeMap::new();
    for (i, row) in read_csv_maps(path)?.into_iter().enumerate() {
        let line = i as u64 + 2;
        let get = |c: &str| row.get(c).cloned().unwrap_or_default();
        let rank: usize = get("rank")
            .parse()
            .map_err(|_| Error::malformed(file.clone(), line, "bad rank"))?;
        let distance = match get("cosine_distance").as_str() {
            "" => None,
            d => Some(
                d.parse()
                    .map_err(|_| Error::malformed(file.clone(), line, "bad cosine_distance"))?,
            ),
        };
        rows.entry(get("source_paper_id")).or_default().push((
            rank,
            Recommendation {
                paper_id: get("target_paper_id"),
                distance,
            },
        ));
    }
    Ok(rows
        .into_iter()
        .map(|(source, mut entries)| {
            entries.sort_by_key(|e| e.0);
            let k = entries.len();
            (
                source.clone(),
                RecommendationList {
                    source,
                    k,
                    entries: entries.into_iter().map(|e| e.1).collect(),
                },
            )
        })
        .collect())
}

pub fn write_combined(items: &[CombinedEmbedding], dir: &Path, header: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dim = items.first().map_or(0, |c| c.vector.len());
    let mut columns = vec!["paper_id".to_string(), "partial".to_string()];
    columns.extend((0..dim).map(|i| format!("v{i}")));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    write_csv(
        dir,
        COMBINED_FILE,
        header,
        &columns,
        items.iter().map(|c| {
            let mut row = vec![c.paper_id.clone(), c.partial.to_string()];
            row.extend(c.vector.iter().map(|v| v.to_string()));
            row
        }),
    )
}

/// Reads `paper_id, v0..` style vector tables; other columns are ignored.
pub fn read_vector_table(path: &Path) -> Result<BTreeMap<String, Vec<f64>>> {
    let file = path.display().to_string();
    let mut out = BTreeMap::new();
    for (i, row) in read_csv_maps(path)?.into_iter().enumerate() {
        let line = i as u64 + 2;
        let id = row.get("paper_id").cloned().unwrap_or_default();
        let mut v = Vec::new();
        while let Some(raw) = row.get(&format!("v{}", v.len())) {
            v.push(
                raw.parse::<f64>()
                    .map_err(|_| Error::malformed(file.clone(), line, format!("bad v{}", v.len())))?,
            );
        }
        if out.insert(id.clone(), v).is_some() {
            return Err(Error::malformed(file.clone(), line, format!("duplicate paper_id {id:?}")));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::cosine;

    #[test]
    fn equal_weights_average_cosines() {
        let s1 = [0.6, 0.8];
        let s2 = [1.0, 0.0];
        let k1 = [0.0, 0.0, 1.0];
        let k2 = [0.0, 1.0, 0.0];
        let a = combine("a", Some(&s1), Some(&k1), 2, 3, Weights::default()).unwrap();
        let b = combine("b", Some(&s2), Some(&k2), 2, 3, Weights::default()).unwrap();
        let expected = (cosine(&s1, &s2) + cosine(&k1, &k2)) / 2.0;
        assert!((cosine(&a.vector, &b.vector) - expected).abs() < 1e-12);
        assert!((norm(&a.vector) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn combine_errors_and_partials() {
        assert!(combine("a", None, None, 2, 2, Weights::default()).is_err());
        let c = combine("a", Some(&[1.0, 1.0]), None, 2, 3, Weights::default()).unwrap();
        assert!(c.partial);
        assert_eq!(&c.vector[2..], &[0.0, 0.0, 0.0]);
        let z = combine("a", Some(&[0.0, 0.0]), Some(&[1.0]), 2, 1, Weights::default()).unwrap();
        assert!(z.partial);
        assert_eq!(z.vector, vec![0.0, 0.0, 1.0]);
        let w = Weights { semantic: 0.0, kge: 0.0 };
        assert!(combine("a", Some(&[1.0]), None, 1, 1, w).is_err());
        assert!(combine("a", Some(&[1.0, 2.0]), None, 3, 1, Weights::default()).is_err());
    }

    #[test]
    fn duplicate_vector_is_nearest() {
        let idx = SimilarityIndex::new([
            ("p1".to_string(), vec![1.0, 0.0]),
            ("p2".to_string(), vec![1.0, 0.0]),
            ("p3".to_string(), vec![0.0, 1.0]),
        ])
        .unwrap();
        let l = idx.top_k("p1", 5).unwrap();
        assert_eq!(l.entries.len(), 2);
        assert_eq!(l.entries[0].paper_id, "p2");
        assert_eq!(l.entries[0].distance, Some(0.0));
        assert!(matches!(idx.top_k("zz", 1), Err(Error::UnknownPaper(_))));
        assert!(idx.top_k("p1", 0).is_err());
    }

    #[test]
    fn ties_break_by_paper_id() {
        let idx = SimilarityIndex::new([
            ("c".to_string(), vec![0.0, 1.0]),
            ("s".to_string(), vec![1.0, 0.0]),
            ("b".to_string(), vec![0.0, 1.0]),
            ("a".to_string(), vec![0.0, 1.0]),
        ])
        .unwrap();
        let ids: Vec<_> = idx.top_k("s", 2).unwrap().ids().map(str::to_string).collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn two_paper_corpus_recommends_each_other() {
        let idx = SimilarityIndex::new([
            ("x".to_string(), vec![1.0, 2.0]),
            ("y".to_string(), vec![2.0, 1.0]),
        ])
        .unwrap();
        let all = idx.batch_top_k(5).unwrap();
        assert_eq!(all["x"].entries[0].paper_id, "y");
        assert_eq!(all["y"].entries[0].paper_id, "x");
    }

    #[test]
    fn random_baseline_is_seeded_and_distinct() {
        let ids: Vec<String> = (0..20).map(|i| format!("p{i:02}")).collect();
        let a = random_recommendations(&ids, 5, 7).unwrap();
        assert_eq!(a, random_recommendations(&ids, 5, 7).unwrap());
        assert_ne!(a, random_recommendations(&ids, 5, 8).unwrap());
        for (source, l) in &a {
            let mut got: Vec<&str> = l.ids().collect();
            assert_eq!(got.len(), 5);
            assert!(!got.contains(&source.as_str()));
            got.sort();
            got.dedup();
            assert_eq!(got.len(), 5);
        }
        let small = random_recommendations(&ids[..3], 5, 1).unwrap();
        assert!(small.values().all(|l| l.entries.len() == 2));
    }

    #[test]
    fn recommendations_round_trip() {
        let ids: Vec<String> = (0..6).map(|i| format!("p{i}")).collect();
        let idx = SimilarityIndex::new(ids.iter().enumerate().map(|(i, id)| {
            (id.clone(), vec![i as f64, 1.0])
        }))
        .unwrap();
        let lists = idx.batch_top_k(3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_recommendations(&lists, dir.path(), RECOMMENDATIONS_FILE, &[]).unwrap();
        let back = read_recommendations(&dir.path().join(RECOMMENDATIONS_FILE)).unwrap();
        assert_eq!(back, lists);
        let random = random_recommendations(&ids, 2, 3).unwrap();
        write_recommendations(&random, dir.path(), "r.csv", &[]).unwrap();
        assert_eq!(read_recommendations(&dir.path().join("r.csv")).unwrap(), random);
    }
}
