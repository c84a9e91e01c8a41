//! The two parameterized traversal queries: concept+topic "research leader"
//! lookup and concept-filtered citation ranking.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{EntityId, EntityKind, PropertyGraph, Relation};
use crate::curation::{normalize_concept, NormalizationMode};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankedEntity {
    pub id: EntityId,
    pub key: String,
    pub label: String,
    pub matched_papers: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptTopicResult {
    /// Matching papers in id order.
    pub papers: Vec<EntityId>,
    /// Authors of matching papers, by matched-paper count desc then id.
    pub authors: Vec<RankedEntity>,
    /// Institutions of those authors, ranked the same way.
    pub institutions: Vec<RankedEntity>,
    pub unknown_concepts: Vec<String>,
    pub unknown_topics: Vec<String>,
}

/// Resolves a user-supplied concept name against concept entity keys: the
/// name as given, then its stripped form, then its lemmatized form.
fn resolve_concept(graph: &PropertyGraph, name: &str) -> Option<EntityId> {
    if let Some(id) = graph.lookup(EntityKind::Concept, name) {
        return Some(id);
    }
    [NormalizationMode::LowercaseStrip, NormalizationMode::LowercaseStripLemma]
        .into_iter()
        .filter_map(|mode| normalize_concept(name, mode).ok())
        .find_map(|key| graph.lookup(EntityKind::Concept, &key))
}

/// Topic labels match case-insensitively.
fn resolve_topic(graph: &PropertyGraph, label: &str) -> Option<EntityId> {
    let wanted = label.trim().to_lowercase();
    graph
        .entities_of_kind(EntityKind::Topic)
        .find(|e| e.key.to_lowercase() == wanted)
        .map(|e| e.id)
}

fn resolve_all(
    names: &BTreeSet<String>,
    resolve: impl Fn(&str) -> Option<EntityId>,
) -> (BTreeSet<EntityId>, Vec<String>) {
    let mut found = BTreeSet::new();
    let mut unknown = Vec::new();
    for name in names {
        match resolve(name) {
            Some(id) => {
                found.insert(id);
            }
            None => unknown.push(name.clone()),
        }
    }
    (found, unknown)
}

fn papers_linked_to(
    graph: &PropertyGraph,
    targets: &BTreeSet<EntityId>,
    relation: Relation,
) -> BTreeSet<EntityId> {
    targets
        .iter()
        .flat_map(|&t| graph.in_neighbors(t, relation).iter().copied())
        .collect()
}

fn ranked(graph: &PropertyGraph, counts: BTreeMap<EntityId, usize>) -> Vec<RankedEntity> {
    let mut out: Vec<RankedEntity> = counts
        .into_iter()
        .map(|(id, matched_papers)| {
            let e = graph.entity(id);
            RankedEntity {
                id,
                key: e.key.clone(),
                label: e.label().to_string(),
                matched_papers,
            }
        })
        .collect();
    out.sort_by(|a, b| b.matched_papers.cmp(&a.matched_papers).then(a.id.cmp(&b.id)));
    out
}

/// Papers linked to at least one named concept AND at least one named topic,
/// their authors (one hop) and those authors' institutions (two hops).
///
/// Unknown names are reported and match nothing.
pub fn query_concept_topic(
    graph: &PropertyGraph,
    concept_names: &BTreeSet<String>,
    topic_labels: &BTreeSet<String>,
) -> ConceptTopicResult {
    let (concepts, unknown_concepts) = resolve_all(concept_names, |n| resolve_concept(graph, n));
    let (topics, unknown_topics) = resolve_all(topic_labels, |n| resolve_topic(graph, n));

    let by_concept = papers_linked_to(graph, &concepts, Relation::AssociatedConcept);
    let by_topic = papers_linked_to(graph, &topics, Relation::AssociatedTopic);
    let papers: Vec<EntityId> = by_concept.intersection(&by_topic).copied().collect();

    let mut author_papers: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
    for &p in &papers {
        for &a in graph.out_neighbors(p, Relation::AuthoredBy) {
            author_papers.entry(a).or_default().insert(p);
        }
    }
    let mut institution_papers: BTreeMap<EntityId, BTreeSet<EntityId>> = BTreeMap::new();
    for (&a, ps) in &author_papers {
        for &i in graph.out_neighbors(a, Relation::AffiliatedWith) {
            institution_papers.entry(i).or_default().extend(ps);
        }
    }

    let count = |m: BTreeMap<EntityId, BTreeSet<EntityId>>| {
        m.into_iter().map(|(k, v)| (k, v.len())).collect()
    };
    ConceptTopicResult {
        papers,
        authors: ranked(graph, count(author_papers)),
        institutions: ranked(graph, count(institution_papers)),
        unknown_concepts,
        unknown_topics,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationRankRow {
    pub id: EntityId,
    pub paper_id: String,
    pub title: String,
    pub cited_by: usize,
}

/// Papers linked to any named concept, ranked by in-corpus citation count
/// (desc, ties by paper id) and truncated to `limit`.
pub fn query_concept_citation_rank(
    graph: &PropertyGraph,
    concept_names: &BTreeSet<String>,
    limit: usize,
) -> Result<(Vec<CitationRankRow>, Vec<String>)> {
    if limit == 0 {
        return Err(Error::Config("limit must be at least 1".to_string()));
    }
    let (concepts, unknown) = resolve_all(concept_names, |n| resolve_concept(graph, n));
    let papers = papers_linked_to(graph, &concepts, Relation::AssociatedConcept);
    let mut rows: Vec<CitationRankRow> = papers
        .into_iter()
        .map(|p| {
            let e = graph.entity(p);
            CitationRankRow {
                id: p,
                paper_id: e.key.clone(),
                title: e.label().to_string(),
                cited_by: graph.in_neighbors(p, Relation::Cites).len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| b.cited_by.cmp(&a.cited_by).then(a.paper_id.cmp(&b.paper_id)));
    rows.truncate(limit);
    Ok((rows, unknown))
}
