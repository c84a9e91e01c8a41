//! Recommendation quality metrics: topic Jaccard distance, citation overlap,
//! cross-method IoU, popularity, topic-by-journal tables and 2D projections.

mod svd;

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityAttributes, EntityKind, PropertyGraph, Relation};
use crate::ingest::write_csv;
use crate::numeric::pairwise_sum;
use crate::similarity::RecommendationList;

pub use svd::{truncated_svd_2d, truncated_svd_2d_with, SvdProjection, SVD_MAX_ITERATIONS, SVD_TOLERANCE};

pub const REPORT_FILE: &str = "evaluation_report.json";
pub const IOU_FILE: &str = "iou_matrix.csv";
pub const POPULARITY_FILE: &str = "popularity.csv";
pub const TOPIC_BY_JOURNAL_FILE: &str = "topic_by_journal.csv";
pub const SVD_FILE: &str = "svd_projection.csv";
pub const UNKNOWN_JOURNAL: &str = "(unknown)";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicVector {
    pub paper_id: String,
    pub bits: Vec<bool>,
}

impl TopicVector {
    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub metric: String,
    pub value: f64,
    pub support: usize,
}

/// Denominator variant for [`jaccard_distance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum JaccardForm {
    /// `(c_TF + c_FT) / (c_TT + c_TF + c_FT)`
    #[default]
    Standard,
    /// `(c_TF + c_FT) / (c_TT + 2 c_TF)`, kept for audits against the
    /// literal printed formula. Not symmetric; may exceed 1.
    Printed,
}

/// Jaccard distance between one-hot topic vectors. Two all-false vectors
/// are at distance 0.
pub fn jaccard_distance_with(u: &[bool], v: &[bool], form: JaccardForm) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    let (mut tt, mut tf, mut ft) = (0usize, 0usize, 0usize);
    for (&a, &b) in u.iter().zip(v) {
        match (a, b) {
            (true, true) => tt += 1,
            (true, false) => tf += 1,
            (false, true) => ft += 1,
            _ => {}
        }
    }
    let denominator = match form {
        JaccardForm::Standard => tt + tf + ft,
        JaccardForm::Printed => tt + 2 * tf,
    };
    if tt + tf + ft == 0 {
        return Ok(0.0);
    }
    if denominator == 0 {
        // printed form with c_TT = c_TF = 0 and c_FT > 0
        return Ok(f64::INFINITY);
    }
    Ok((tf + ft) as f64 / denominator as f64)
}

pub fn jaccard_distance(u: &[bool], v: &[bool]) -> Result<f64> {
    jaccard_distance_with(u, v, JaccardForm::Standard)
}

/// Topic vectors for every paper entity, over `vocabulary` in order. Topics
/// outside the vocabulary are ignored.
pub fn topic_vectors(graph: &PropertyGraph, vocabulary: &[String]) -> BTreeMap<String, TopicVector> {
    let position: BTreeMap<&str, usize> = vocabulary
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    graph
        .entities_of_kind(EntityKind::Paper)
        .map(|p| {
            let mut bits = vec![false; vocabulary.len()];
            for &t in graph.out_neighbors(p.id, Relation::AssociatedTopic) {
                if let Some(&i) = position.get(graph.entity(t).key.as_str()) {
                    bits[i] = true;
                }
            }
            (
                p.key.clone(),
                TopicVector {
                    paper_id: p.key.clone(),
                    bits,
                },
            )
        })
        .collect()
}

fn lookup<'a>(topics: &'a BTreeMap<String, TopicVector>, id: &str) -> Result<&'a TopicVector> {
    topics.get(id).ok_or_else(|| Error::UnknownPaper(id.to_string()))
}

/// Mean Jaccard distance between a source and each recommended paper.
pub fn topic_similarity(
    list: &RecommendationList,
    topics: &BTreeMap<String, TopicVector>,
    form: JaccardForm,
) -> Result<f64> {
    if list.entries.is_empty() {
        return Err(Error::EmptyInput(format!(
            "empty recommendation list for {:?}",
            list.source
        )));
    }
    let source = lookup(topics, &list.source)?;
    let distances = list
        .ids()
        .map(|id| jaccard_distance_with(&source.bits, &lookup(topics, id)?.bits, form))
        .collect::<Result<Vec<f64>>>()?;
    Ok(pairwise_sum(&distances) / distances.len() as f64)
}

fn report(method: &str, metric: &str, values: &[f64]) -> Result<MetricReport> {
    if values.is_empty() {
        return Err(Error::EmptyInput(format!("no papers contribute to {metric} for {method}")));
    }
    Ok(MetricReport {
        method: method.to_string(),
        metric: metric.to_string(),
        value: pairwise_sum(values) / values.len() as f64,
        support: values.len(),
    })
}

/// Mean per-source topic similarity. Sources without topics are excluded.
pub fn corpus_topic_similarity(
    method: &str,
    lists: &BTreeMap<String, RecommendationList>,
    topics: &BTreeMap<String, TopicVector>,
    form: JaccardForm,
) -> Result<MetricReport> {
    let included: Vec<&RecommendationList> = lists
        .values()
        .filter(|l| !l.entries.is_empty())
        .filter(|l| topics.get(&l.source).is_some_and(|t| !t.is_empty()))
        .collect();
    let values = included
        .par_iter()
        .map(|l| topic_similarity(l, topics, form))
        .collect::<Result<Vec<f64>>>()?;
    report(method, "topic_similarity", &values)
}

/// `|cites ∩ top_k| / min(k, |cites|)` for one source.
pub fn paper_citation_overlap(cites: &BTreeSet<String>, list: &RecommendationList, k: usize) -> f64 {
    let top: HashSet<&str> = list.ids().take(k).collect();
    let hit = cites.iter().filter(|c| top.contains(c.as_str())).count();
    hit as f64 / k.min(cites.len()) as f64
}

/// Mean overlap in percent over sources that cite at least one paper.
pub fn citation_overlap(
    method: &str,
    lists: &BTreeMap<String, RecommendationList>,
    cites: &BTreeMap<String, BTreeSet<String>>,
    k: usize,
) -> Result<MetricReport> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".to_string()));
    }
    let values: Vec<f64> = lists
        .values()
        .filter_map(|l| {
            let c = cites.get(&l.source).filter(|c| !c.is_empty())?;
            Some(100.0 * paper_citation_overlap(c, l, k))
        })
        .collect();
    report(method, "citation_overlap_percent", &values)
}

/// Outgoing citations between paper keys.
pub fn citation_map(graph: &PropertyGraph) -> BTreeMap<String, BTreeSet<String>> {
    let mut out: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for t in graph.triplets().iter().filter(|t| t.relation == Relation::Cites) {
        out.entry(graph.entity(t.head).key.clone())
            .or_default()
            .insert(graph.entity(t.tail).key.clone());
    }
    out
}

pub fn set_iou(a: &RecommendationList, b: &RecommendationList) -> f64 {
    let a: BTreeSet<&str> = a.ids().collect();
    let b: BTreeSet<&str> = b.ids().collect();
    let union = a.union(&b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(&b).count() as f64 / union as f64
}

/// Mean per-source IoU of two methods' recommendation sets.
pub fn recommendation_iou(
    a_name: &str,
    a: &BTreeMap<String, RecommendationList>,
    b_name: &str,
    b: &BTreeMap<String, RecommendationList>,
) -> Result<MetricReport> {
    if !a.keys().eq(b.keys()) {
        return Err(Error::GraphInput(format!(
            "{a_name} and {b_name} cover different source papers"
        )));
    }
    let values: Vec<f64> = a.iter().map(|(s, l)| set_iou(l, &b[s])).collect();
    report(&format!("{a_name}|{b_name}"), "iou", &values)
}

/// One histogram bin over occurrence counts, `min..=max` (`max` absent for
/// the open overflow bin).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PopularityBin {
    pub min: usize,
    pub max: Option<usize>,
    pub papers: usize,
}

impl PopularityBin {
    pub fn label(&self) -> String {
        match self.max {
            None => format!(">{}", self.min - 1),
            Some(m) if m == self.min => m.to_string(),
            Some(m) => format!("{}-{m}", self.min),
        }
    }
}

/// Per-paper occurrence counts across all lists, including zero for corpus
/// papers never recommended.
pub fn occurrence_counts(
    lists: &BTreeMap<String, RecommendationList>,
) -> BTreeMap<String, usize> {
    let mut counts: BTreeMap<String, usize> = lists.keys().map(|k| (k.clone(), 0)).collect();
    for l in lists.values() {
        for id in l.ids() {
            *counts.entry(id.to_string()).or_default() += 1;
        }
    }
    counts
}

/// Bins of `width` starting at 0 up to `cap`, then one open bin for counts
/// above `cap`. Empty bins are omitted.
pub fn popularity_histogram(
    lists: &BTreeMap<String, RecommendationList>,
    width: usize,
    cap: usize,
) -> Result<Vec<PopularityBin>> {
    if width == 0 {
        return Err(Error::Config("bin width must be at least 1".to_string()));
    }
    let mut bins: BTreeMap<usize, usize> = BTreeMap::new();
    for &c in occurrence_counts(lists).values() {
        let lower = if c > cap { cap + 1 } else { c / width * width };
        *bins.entry(lower).or_default() += 1;
    }
    Ok(bins
        .into_iter()
        .map(|(min, papers)| PopularityBin {
            min,
            max: if min > cap { None } else { Some((min + width - 1).min(cap)) },
            papers,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JournalTopics {
    pub journal: String,
    pub papers: usize,
    /// Fraction of the journal's papers carrying each vocabulary topic.
    pub fractions: Vec<f64>,
}

pub fn topic_by_journal(graph: &PropertyGraph, vocabulary: &[String]) -> Vec<JournalTopics> {
    let topics = topic_vectors(graph, vocabulary);
    let mut groups: BTreeMap<String, Vec<&TopicVector>> = BTreeMap::new();
    for p in graph.entities_of_kind(EntityKind::Paper) {
        let journal = match &p.attributes {
            EntityAttributes::Paper {
                journal: Some(j), ..
            } if !j.trim().is_empty() => j.clone(),
            _ => UNKNOWN_JOURNAL.to_string(),
        };
        groups.entry(journal).or_default().push(&topics[&p.key]);
    }
    groups
        .into_iter()
        .map(|(journal, papers)| JournalTopics {
            fractions: (0..vocabulary.len())
                .map(|i| papers.iter().filter(|t| t.bits[i]).count() as f64 / papers.len() as f64)
                .collect(),
            papers: papers.len(),
            journal,
        })
        .collect()
}

/// IoU for every ordered pair of methods, as rows of a square table.
pub fn iou_matrix(
    methods: &[(String, BTreeMap<String, RecommendationList>)],
) -> Result<Vec<Vec<f64>>> {
    methods
        .iter()
        .map(|(a_name, a)| {
            methods
                .iter()
                .map(|(b_name, b)| Ok(recommendation_iou(a_name, a, b_name, b)?.value))
                .collect()
        })
        .collect()
}

pub fn write_iou_matrix(
    names: &[String],
    matrix: &[Vec<f64>],
    dir: &Path,
    header: &[String],
) -> Result<()> {
    let mut columns = vec!["method"];
    columns.extend(names.iter().map(String::as_str));
    write_csv(
        dir,
        IOU_FILE,
        header,
        &columns,
        names.iter().zip(matrix).map(|(n, row)| {
            std::iter::once(n.clone())
                .chain(row.iter().map(|v| format!("{v:.6}")))
                .collect::<Vec<String>>()
        }),
    )
}

pub fn write_popularity(
    per_method: &[(String, Vec<PopularityBin>)],
    dir: &Path,
    header: &[String],
) -> Result<()> {
    write_csv(
        dir,
        POPULARITY_FILE,
        header,
        &["method", "occurrences", "papers"],
        per_method.iter().flat_map(|(m, bins)| {
            bins.iter()
                .map(move |b| vec![m.clone(), b.label(), b.papers.to_string()])
        }),
    )
}

pub fn write_topic_by_journal(
    rows: &[JournalTopics],
    vocabulary: &[String],
    dir: &Path,
    header: &[String],
) -> Result<()> {
    let mut columns = vec!["journal", "papers"];
    columns.extend(vocabulary.iter().map(String::as_str));
    write_csv(
        dir,
        TOPIC_BY_JOURNAL_FILE,
        header,
        &columns,
        rows.iter().map(|r| {
            [r.journal.clone(), r.papers.to_string()]
                .into_iter()
                .chain(r.fractions.iter().map(|f| format!("{f:.6}")))
                .collect::<Vec<String>>()
        }),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectedPoint {
    pub paper_id: String,
    pub x: f64,
    pub y: f64,
    pub source_group: String,
}

pub fn write_svd_projection(points: &[ProjectedPoint], dir: &Path, header: &[String]) -> Result<()> {
    write_csv(
        dir,
        SVD_FILE,
        header,
        &["paper_id", "x", "y", "source_group"],
        points.iter().map(|p| {
            vec![
                p.paper_id.clone(),
                format!("{:.10}", p.x),
                format!("{:.10}", p.y),
                p.source_group.clone(),
            ]
        }),
    )
}
