//! Turns raw mentions into deduplicated graph entities and triplets:
//! concept confidence thresholding and frequency pruning, author and
//! institution normalization, and exact-match citation linking.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{
    EntityAttributes, EntityKind, EntityRecord, EntityRef, GraphInput, Relation, TripletRecord,
};
use crate::ingest::{
    read_csv_maps, write_csv, AuthorMention, BibliographyEntry, ConceptMention, Corpus,
    IngestConfig, PaperRecord, PersonName,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    LowercaseStrip,
    LowercaseStripLemma,
}

impl std::str::FromStr for NormalizationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lowercase_strip" => Ok(Self::LowercaseStrip),
            "lowercase_strip_lemma" => Ok(Self::LowercaseStripLemma),
            other => Err(Error::Config(format!("unknown normalization mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationConfig {
    /// Mentions with confidence below this are dropped.
    pub concept_confidence_threshold: f64,
    /// Concepts in fewer than `ceil(fraction * n_papers)` papers are pruned.
    pub concept_min_fraction: f64,
    /// Concepts in more than `fraction * n_papers` papers are flagged.
    pub concept_flag_fraction: f64,
    pub normalization_mode: NormalizationMode,
}

impl Default for CurationConfig {
    fn default() -> Self {
        Self {
            concept_confidence_threshold: 0.5,
            concept_min_fraction: 1e-4,
            concept_flag_fraction: 0.5,
            normalization_mode: NormalizationMode::LowercaseStripLemma,
        }
    }
}

impl CurationConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.concept_confidence_threshold) {
            return Err(Error::Config(format!(
                "concept_confidence_threshold {} outside [0, 1]",
                self.concept_confidence_threshold
            )));
        }
        let ok = 0.0 <= self.concept_min_fraction
            && self.concept_min_fraction < self.concept_flag_fraction
            && self.concept_flag_fraction <= 1.0;
        if !ok {
            return Err(Error::Config(format!(
                "need 0 <= concept_min_fraction ({}) < concept_flag_fraction ({}) <= 1",
                self.concept_min_fraction, self.concept_flag_fraction
            )));
        }
        Ok(())
    }
}

/// Normalized full author name: lowercase, punctuation removed, single
/// spaces.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NormalizedAuthorKey(String);

impl NormalizedAuthorKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for NormalizedAuthorKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

/// Lowercases, maps `-`, `/`, `_` and whitespace to a single space, drops
/// every other non-alphanumeric character.
fn strip_text(text: &str) -> String {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        if c.is_alphanumeric() {
            cleaned.extend(c.to_lowercase());
        } else if c.is_whitespace() || matches!(c, '-' | '/' | '_') {
            cleaned.push(' ');
        }
    }
    cleaned.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn normalize_author(
    first: Option<&str>,
    middle: Option<&str>,
    last: &str,
) -> Result<NormalizedAuthorKey> {
    let last = strip_text(last);
    if last.is_empty() {
        return Err(Error::InvalidName("empty last name".to_string()));
    }
    let parts: Vec<String> = [first, middle]
        .into_iter()
        .flatten()
        .map(strip_text)
        .filter(|p| !p.is_empty())
        .chain(std::iter::once(last))
        .collect();
    Ok(NormalizedAuthorKey(parts.join(" ")))
}

pub fn normalize_person(name: &PersonName) -> Result<NormalizedAuthorKey> {
    normalize_author(name.first.as_deref(), name.middle.as_deref(), &name.last)
}

/// Words ending in `s` that are not plurals.
const LEMMA_EXCEPTIONS: &[&str] = &[
    "aids", "always", "diabetes", "gas", "herpes", "lens", "measles", "mers", "mumps", "news",
    "rabies", "sars", "series", "species", "tuberculosis",
];

/// Rule-based plural stripping: `-ies` -> `-y`, `-sses|-shes|-ches|-xes|-zes`
/// lose `es`, other `-s` endings (not `-ss`, `-us`, `-is`) lose `s`.
fn lemmatize_token(token: &str) -> String {
    if LEMMA_EXCEPTIONS.contains(&token) || token.chars().any(|c| c.is_ascii_digit()) {
        return token.to_string();
    }
    let n = token.len();
    if n > 4 && token.ends_with("ies") {
        return format!("{}y", &token[..n - 3]);
    }
    for suffix in ["sses", "shes", "ches", "xes", "zes"] {
        if n > suffix.len() + 1 && token.ends_with(suffix) {
            return token[..n - 2].to_string();
        }
    }
    if n > 3
        && token.ends_with('s')
        && !token.ends_with("ss")
        && !token.ends_with("us")
        && !token.ends_with("is")
    {
        return token[..n - 1].to_string();
    }
    token.to_string()
}

pub fn normalize_concept(surface_text: &str, mode: NormalizationMode) -> Result<String> {
    let stripped = strip_text(surface_text);
    if stripped.is_empty() {
        return Err(Error::InvalidName(format!(
            "concept {surface_text:?} is empty after normalization"
        )));
    }
    Ok(match mode {
        NormalizationMode::LowercaseStrip => stripped,
        NormalizationMode::LowercaseStripLemma => stripped
            .split(' ')
            .map(lemmatize_token)
            .collect::<Vec<_>>()
            .join(" "),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedConcept {
    pub name: String,
    /// Most frequent category among kept mentions (lexicographic on ties).
    pub category: String,
    pub paper_count: usize,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConceptLink {
    pub paper_id: String,
    pub concept: String,
    /// Maximum confidence over the paper's mentions of the concept.
    pub confidence: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConceptCuration {
    pub concepts: Vec<CuratedConcept>,
    pub links: Vec<ConceptLink>,
    pub flagged: Vec<String>,
    pub dropped_low_confidence: usize,
    pub pruned_rare: usize,
    pub unnormalizable: usize,
}

/// Minimum distinct-paper count a concept needs to survive pruning.
pub fn min_paper_count(min_fraction: f64, n_papers: usize) -> usize {
    // The small slack keeps products like 1e-4 * 10_000 from rounding up.
    (min_fraction * n_papers as f64 - 1e-9).ceil().max(0.0) as usize
}

pub fn curate_concepts(
    mentions: &[ConceptMention],
    n_papers: usize,
    config: &CurationConfig,
) -> ConceptCuration {
    let mut out = ConceptCuration::default();
    // concept -> paper -> max confidence
    let mut links: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut categories: HashMap<String, BTreeMap<String, usize>> = HashMap::new();
    for m in mentions {
        if m.confidence < config.concept_confidence_threshold {
            out.dropped_low_confidence += 1;
            continue;
        }
        let Ok(name) = normalize_concept(&m.surface_text, config.normalization_mode) else {
            out.unnormalizable += 1;
            continue;
        };
        let best = links
            .entry(name.clone())
            .or_default()
            .entry(m.paper_id.clone())
            .or_insert(m.confidence);
        *best = best.max(m.confidence);
        *categories
            .entry(name)
            .or_default()
            .entry(m.category.clone())
            .or_default() += 1;
    }

    let min_papers = min_paper_count(config.concept_min_fraction, n_papers);
    let flag_above = config.concept_flag_fraction * n_papers as f64;
    for (name, papers) in links {
        let paper_count = papers.len();
        if paper_count < min_papers {
            out.pruned_rare += 1;
            continue;
        }
        let flagged = paper_count as f64 > flag_above;
        if flagged {
            out.flagged.push(name.clone());
        }
        let category = categories[&name]
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
            .map(|(c, _)| c.clone())
            .unwrap_or_default();
        for (paper_id, confidence) in papers {
            out.links.push(ConceptLink {
                paper_id,
                concept: name.clone(),
                confidence,
            });
        }
        out.concepts.push(CuratedConcept {
            name,
            category,
            paper_count,
            flagged,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedAuthor {
    pub key: NormalizedAuthorKey,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CuratedInstitution {
    pub key: String,
    pub name: String,
    pub country: Option<String>,
    pub city: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AuthorCuration {
    pub authors: Vec<CuratedAuthor>,
    pub institutions: Vec<CuratedInstitution>,
    /// (paper_id, author key)
    pub authored_by: Vec<(String, NormalizedAuthorKey)>,
    /// (author key, institution key)
    pub affiliated_with: Vec<(NormalizedAuthorKey, String)>,
    /// Distinct raw name spellings folded into an existing author.
    pub authors_merged: usize,
    pub invalid_names: usize,
}

fn institution_key(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn raw_full_name(m: &AuthorMention) -> String {
    [m.first.as_deref(), m.middle.as_deref(), Some(m.last.as_str())]
        .into_iter()
        .flatten()
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn curate_authors(mentions: &[AuthorMention]) -> AuthorCuration {
    let mut out = AuthorCuration::default();
    let mut spellings: BTreeMap<NormalizedAuthorKey, BTreeSet<String>> = BTreeMap::new();
    let mut institutions: BTreeMap<String, CuratedInstitution> = BTreeMap::new();
    let mut authored_by = BTreeSet::new();
    let mut affiliated_with = BTreeSet::new();

    for m in mentions {
        let Ok(key) = normalize_author(m.first.as_deref(), m.middle.as_deref(), &m.last) else {
            out.invalid_names += 1;
            continue;
        };
        spellings
            .entry(key.clone())
            .or_default()
            .insert(raw_full_name(m));
        authored_by.insert((m.paper_id.clone(), key.clone()));

        let Some(inst_name) = m.inst_name.as_deref().filter(|n| !n.trim().is_empty()) else {
            continue;
        };
        let inst_key = institution_key(inst_name);
        let inst = institutions
            .entry(inst_key.clone())
            .or_insert_with(|| CuratedInstitution {
                key: inst_key.clone(),
                name: inst_name.trim().to_string(),
                country: None,
                city: None,
            });
        if inst.country.is_none() {
            inst.country = m.inst_country.clone();
        }
        if inst.city.is_none() {
            inst.city = m.inst_city.clone();
        }
        affiliated_with.insert((key, inst_key));
    }

    for (key, names) in spellings {
        out.authors_merged += names.len() - 1;
        // Longest spelling is the most informative; lexicographic on ties.
        let display_name = names
            .iter()
            .max_by(|a, b| a.chars().count().cmp(&b.chars().count()).then(b.cmp(a)))
            .cloned()
            .unwrap_or_default();
        out.authors.push(CuratedAuthor { key, display_name });
    }
    out.institutions = institutions.into_values().collect();
    out.authored_by = authored_by.into_iter().collect();
    out.affiliated_with = affiliated_with.into_iter().collect();
    out
}

/// Title normalization used for citation matching.
pub fn normalize_title(title: &str) -> Option<String> {
    let t = strip_text(title);
    (!t.is_empty()).then_some(t)
}

fn author_multiset<'a>(
    names: impl Iterator<Item = Result<NormalizedAuthorKey>> + 'a,
) -> Option<Vec<NormalizedAuthorKey>> {
    let mut keys = names.collect::<Result<Vec<_>>>().ok()?;
    keys.sort();
    Some(keys)
}

/// Emits `(citing, cited)` when a bibliography entry's normalized title and
/// normalized author multiset both equal those of a corpus paper. Self
/// citations are dropped; output is sorted and unique.
pub fn link_citations(
    bibliography: &[BibliographyEntry],
    papers: &[PaperRecord],
    authors: &[AuthorMention],
) -> Vec<(String, String)> {
    let mut paper_authors: HashMap<&str, Vec<&AuthorMention>> = HashMap::new();
    for a in authors {
        paper_authors.entry(a.paper_id.as_str()).or_default().push(a);
    }
    let mut index: HashMap<(String, Vec<NormalizedAuthorKey>), Vec<&str>> = HashMap::new();
    for p in papers {
        let Some(title) = normalize_title(&p.title) else {
            continue;
        };
        let mentions = paper_authors.get(p.paper_id.as_str()).map_or(&[][..], |v| v);
        let Some(keys) = author_multiset(mentions.iter().map(|m| {
            normalize_author(m.first.as_deref(), m.middle.as_deref(), &m.last)
        })) else {
            continue;
        };
        index.entry((title, keys)).or_default().push(&p.paper_id);
    }

    let mut out = BTreeSet::new();
    for entry in bibliography {
        let Some(title) = normalize_title(&entry.ref_title) else {
            continue;
        };
        let Some(keys) = author_multiset(entry.ref_authors.iter().map(normalize_person)) else {
            continue;
        };
        if let Some(cited) = index.get(&(title, keys)) {
            for &c in cited {
                if c != entry.citing_paper_id {
                    out.insert((entry.citing_paper_id.clone(), c.to_string()));
                }
            }
        }
    }
    out.into_iter().collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CurationReport {
    pub mentions_in: usize,
    pub dropped_low_confidence: usize,
    pub pruned_rare: usize,
    pub flagged_frequent: usize,
    pub authors_merged: usize,
    pub citations_linked: usize,
    pub dropped_dangling: usize,
    pub dropped_out_of_vocabulary_topics: usize,
    pub invalid_author_names: usize,
    pub unnormalizable_concepts: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CuratedGraphInput {
    pub graph: GraphInput,
    pub flagged_concepts: Vec<String>,
    pub report: CurationReport,
}

/// Runs every curation step over a loaded corpus.
pub fn curate(
    corpus: &Corpus,
    ingest: &IngestConfig,
    config: &CurationConfig,
) -> Result<CuratedGraphInput> {
    config.validate()?;
    if corpus.papers.is_empty() {
        return Err(Error::EmptyInput("corpus has no papers".to_string()));
    }
    let known: HashSet<&str> = corpus.paper_ids();
    let mut report = CurationReport::default();

    let concept_mentions: Vec<ConceptMention> = corpus
        .concept_mentions
        .iter()
        .filter(|m| known.contains(m.paper_id.as_str()))
        .cloned()
        .collect();
    let author_mentions: Vec<AuthorMention> = corpus
        .author_mentions
        .iter()
        .filter(|m| known.contains(m.paper_id.as_str()))
        .cloned()
        .collect();
    let bibliography: Vec<BibliographyEntry> = corpus
        .bibliography
        .iter()
        .filter(|b| known.contains(b.citing_paper_id.as_str()))
        .cloned()
        .collect();
    let vocabulary: HashSet<&str> = ingest.topic_vocabulary.iter().map(String::as_str).collect();
    let mut topic_links: BTreeMap<(String, String), f64> = BTreeMap::new();
    let mut topic_dangling = 0;
    for t in &corpus.topic_assignments {
        if !known.contains(t.paper_id.as_str()) {
            topic_dangling += 1;
        } else if !vocabulary.contains(t.topic_label.as_str()) {
            report.dropped_out_of_vocabulary_topics += 1;
        } else {
            let best = topic_links
                .entry((t.paper_id.clone(), t.topic_label.clone()))
                .or_insert(t.score);
            *best = best.max(t.score);
        }
    }
    report.dropped_dangling = (corpus.concept_mentions.len() - concept_mentions.len())
        + (corpus.author_mentions.len() - author_mentions.len())
        + (corpus.bibliography.len() - bibliography.len())
        + topic_dangling;

    let concepts = curate_concepts(&concept_mentions, corpus.papers.len(), config);
    let authors = curate_authors(&author_mentions);
    let citations = link_citations(&bibliography, &corpus.papers, &author_mentions);

    report.mentions_in = corpus.concept_mentions.len();
    report.dropped_low_confidence = concepts.dropped_low_confidence;
    report.pruned_rare = concepts.pruned_rare;
    report.flagged_frequent = concepts.flagged.len();
    report.unnormalizable_concepts = concepts.unnormalizable;
    report.authors_merged = authors.authors_merged;
    report.invalid_author_names = authors.invalid_names;
    report.citations_linked = citations.len();

    let mut entities = Vec::new();
    for p in &corpus.papers {
        entities.push(EntityRecord {
            key: p.paper_id.clone(),
            attributes: EntityAttributes::Paper {
                title: p.title.clone(),
                pub_date: p.pub_date.clone(),
                journal: p.journal.clone(),
                doi: p.doi.clone(),
            },
        });
    }
    for a in &authors.authors {
        entities.push(EntityRecord {
            key: a.key.to_string(),
            attributes: EntityAttributes::Author {
                display_name: a.display_name.clone(),
            },
        });
    }
    for i in &authors.institutions {
        entities.push(EntityRecord {
            key: i.key.clone(),
            attributes: EntityAttributes::Institution {
                name: i.name.clone(),
                country: i.country.clone(),
                city: i.city.clone(),
            },
        });
    }
    for c in &concepts.concepts {
        entities.push(EntityRecord {
            key: c.name.clone(),
            attributes: EntityAttributes::Concept {
                category: c.category.clone(),
                paper_count: c.paper_count,
                flagged: c.flagged,
            },
        });
    }
    let used_topics: BTreeSet<&String> = topic_links.keys().map(|(_, t)| t).collect();
    for t in used_topics {
        entities.push(EntityRecord {
            key: t.clone(),
            attributes: EntityAttributes::Topic,
        });
    }

    let link = |relation: Relation, head: &str, tail: &str, weight: Option<f64>| {
        let (hk, tk) = relation.signature();
        TripletRecord {
            head: EntityRef::new(hk, head),
            relation,
            tail: EntityRef::new(tk, tail),
            weight,
        }
    };
    let mut triplets = Vec::new();
    for (paper, author) in &authors.authored_by {
        triplets.push(link(Relation::AuthoredBy, paper, author.as_str(), None));
    }
    for (author, inst) in &authors.affiliated_with {
        triplets.push(link(Relation::AffiliatedWith, author.as_str(), inst, None));
    }
    for l in &concepts.links {
        triplets.push(link(
            Relation::AssociatedConcept,
            &l.paper_id,
            &l.concept,
            Some(l.confidence),
        ));
    }
    for ((paper, topic), score) in &topic_links {
        triplets.push(link(Relation::AssociatedTopic, paper, topic, Some(*score)));
    }
    for (citing, cited) in &citations {
        triplets.push(link(Relation::Cites, citing, cited, None));
    }

    Ok(CuratedGraphInput {
        graph: GraphInput { entities, triplets },
        flagged_concepts: concepts.flagged,
        report,
    })
}

pub const CURATED_TRIPLETS_FILE: &str = "triplets.csv";

fn entity_file(kind: EntityKind) -> &'static str {
    match kind {
        EntityKind::Paper => "papers.csv",
        EntityKind::Author => "authors.csv",
        EntityKind::Institution => "institutions.csv",
        EntityKind::Concept => "concepts.csv",
        EntityKind::Topic => "topics.csv",
    }
}

fn entity_columns(kind: EntityKind) -> &'static [&'static str] {
    match kind {
        EntityKind::Paper => &["key", "title", "pub_date", "journal", "doi"],
        EntityKind::Author => &["key", "display_name"],
        EntityKind::Institution => &["key", "name", "country", "city"],
        EntityKind::Concept => &["key", "category", "paper_count", "flagged"],
        EntityKind::Topic => &["key"],
    }
}

fn entity_row(e: &EntityRecord) -> Vec<String> {
    let opt = |v: &Option<String>| v.clone().unwrap_or_default();
    let mut row = vec![e.key.clone()];
    match &e.attributes {
        EntityAttributes::Paper {
            title,
            pub_date,
            journal,
            doi,
        } => row.extend([title.clone(), opt(pub_date), opt(journal), opt(doi)]),
        EntityAttributes::Author { display_name } => row.push(display_name.clone()),
        EntityAttributes::Institution {
            name,
            country,
            city,
        } => row.extend([name.clone(), opt(country), opt(city)]),
        EntityAttributes::Concept {
            category,
            paper_count,
            flagged,
        } => row.extend([category.clone(), paper_count.to_string(), flagged.to_string()]),
        EntityAttributes::Topic => {}
    }
    row
}

/// Writes curated entities (one CSV per kind, sorted by key) and triplets.
pub fn write_graph_input(input: &GraphInput, dir: &Path, header: &[String]) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for kind in EntityKind::ALL {
        let mut rows: Vec<&EntityRecord> =
            input.entities.iter().filter(|e| e.kind() == kind).collect();
        rows.sort_by(|a, b| a.key.cmp(&b.key));
        write_csv(
            dir,
            entity_file(kind),
            header,
            entity_columns(kind),
            rows.into_iter().map(entity_row),
        )?;
    }
    let mut triplets: Vec<&TripletRecord> = input.triplets.iter().collect();
    triplets.sort_by(|a, b| {
        (a.relation, &a.head, &a.tail).cmp(&(b.relation, &b.head, &b.tail))
    });
    write_csv(
        dir,
        CURATED_TRIPLETS_FILE,
        header,
        &["relation", "head_kind", "head", "tail_kind", "tail", "weight"],
        triplets.into_iter().map(|t| {
            vec![
                t.relation.to_string(),
                t.head.kind.to_string(),
                t.head.key.clone(),
                t.tail.kind.to_string(),
                t.tail.key.clone(),
                t.weight.map(|w| w.to_string()).unwrap_or_default(),
            ]
        }),
    )
}

/// Reads back what [`write_graph_input`] wrote.
pub fn read_graph_input(dir: &Path) -> Result<GraphInput> {
    let mut entities = Vec::new();
    for kind in EntityKind::ALL {
        let file = entity_file(kind);
        for (i, row) in read_csv_maps(&dir.join(file))?.into_iter().enumerate() {
            let bad = |m: String| Error::malformed(file, i as u64 + 2, m);
            let get = |c: &str| row.get(c).cloned().unwrap_or_default();
            let opt = |c: &str| Some(get(c)).filter(|v| !v.is_empty());
            let attributes = match kind {
                EntityKind::Paper => EntityAttributes::Paper {
                    title: get("title"),
                    pub_date: opt("pub_date"),
                    journal: opt("journal"),
                    doi: opt("doi"),
                },
                EntityKind::Author => EntityAttributes::Author {
                    display_name: get("display_name"),
                },
                EntityKind::Institution => EntityAttributes::Institution {
                    name: get("name"),
                    country: opt("country"),
                    city: opt("city"),
                },
                EntityKind::Concept => EntityAttributes::Concept {
                    category: get("category"),
                    paper_count: get("paper_count")
                        .parse()
                        .map_err(|_| bad("bad paper_count".into()))?,
                    flagged: get("flagged").parse().map_err(|_| bad("bad flagged".into()))?,
                },
                EntityKind::Topic => EntityAttributes::Topic,
            };
            let key = get("key");
            if key.is_empty() {
                return Err(bad("empty key".into()));
            }
            entities.push(EntityRecord { key, attributes });
        }
    }
    let mut triplets = Vec::new();
    for (i, row) in read_csv_maps(&dir.join(CURATED_TRIPLETS_FILE))?
        .into_iter()
        .enumerate()
    {
        let get = |c: &str| row.get(c).cloned().unwrap_or_default();
        let at = |e: Error| match e {
            Error::GraphInput(m) => Error::malformed(CURATED_TRIPLETS_FILE, i as u64 + 2, m),
            other => other,
        };
        let weight = match get("weight").as_str() {
            "" => None,
            w => Some(w.parse::<f64>().map_err(|_| {
                Error::malformed(CURATED_TRIPLETS_FILE, i as u64 + 2, format!("bad weight {w:?}"))
            })?),
        };
        triplets.push(TripletRecord {
            relation: get("relation").parse().map_err(at)?,
            head: EntityRef::new(get("head_kind").parse().map_err(at)?, get("head")),
            tail: EntityRef::new(get("tail_kind").parse().map_err(at)?, get("tail")),
            weight,
        });
    }
    Ok(GraphInput { entities, triplets })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::TopicAssignment;
    use crate::graph::build_graph;

    fn key(first: Option<&str>, middle: Option<&str>, last: &str) -> String {
        normalize_author(first, middle, last).unwrap().to_string()
    }

    #[test]
    fn author_normalization_examples() {
        assert_eq!(key(Some("John"), Some("Q."), "Smith"), "john q smith");
        assert_eq!(key(Some("JOHN"), None, "SMITH"), "john smith");
        assert_eq!(key(Some("j"), Some("q"), "smith"), key(Some("j"), Some("q"), "smith"));
        assert_eq!(key(Some("Jean-Pierre"), None, "O'Neil"), "jean pierre oneil");
        assert!(normalize_author(Some("A"), None, " .").is_err());
    }

    #[test]
    fn concept_normalization_examples() {
        use NormalizationMode::*;
        assert_eq!(normalize_concept("Acute Appendicitis", LowercaseStrip).unwrap(), "acute appendicitis");
        assert_eq!(normalize_concept("Acute Appendicitis", LowercaseStripLemma).unwrap(), "acute appendicitis");
        assert_eq!(normalize_concept("antibodies", LowercaseStripLemma).unwrap(), "antibody");
        assert_eq!(normalize_concept("ultrasound,", LowercaseStrip).unwrap(), "ultrasound");
        assert_eq!(normalize_concept("Boxes", LowercaseStripLemma).unwrap(), "box");
        assert_eq!(normalize_concept("lungs", LowercaseStripLemma).unwrap(), "lung");
        assert_eq!(normalize_concept("SARS", LowercaseStripLemma).unwrap(), "sars");
        assert_eq!(normalize_concept("virus", LowercaseStripLemma).unwrap(), "virus");
        assert!(normalize_concept("?!", LowercaseStrip).is_err());
    }

    fn mention(paper: &str, text: &str, confidence: f64) -> ConceptMention {
        ConceptMention {
            paper_id: paper.to_string(),
            surface_text: text.to_string(),
            category: "Medical Condition".to_string(),
            confidence,
        }
    }

    #[test]
    fn low_confidence_mentions_are_dropped() {
        let out = curate_concepts(&[mention("p1", "fever", 0.4)], 1, &CurationConfig::default());
        assert_eq!(out.dropped_low_confidence, 1);
        assert!(out.concepts.is_empty());
    }

    #[test]
    fn min_paper_count_rule() {
        assert_eq!(min_paper_count(1e-4, 10_000), 1);
        assert_eq!(min_paper_count(1e-4, 10_001), 2);
        assert_eq!(min_paper_count(1e-4, 42_220), 5);
        assert_eq!(min_paper_count(0.0, 100), 0);
        let out = curate_concepts(&[mention("p1", "fever", 0.9)], 10_000, &CurationConfig::default());
        assert_eq!(out.concepts.len(), 1);
        assert_eq!(out.pruned_rare, 0);
    }

    #[test]
    fn frequent_concepts_are_flagged_and_kept() {
        let mentions: Vec<_> = (0..6000).map(|i| mention(&format!("p{i}"), "Covid", 0.9)).collect();
        let out = curate_concepts(&mentions, 10_000, &CurationConfig::default());
        assert_eq!(out.flagged, vec!["covid".to_string()]);
        assert_eq!(out.links.len(), 6000);
        assert!(out.concepts[0].flagged);
    }

    #[test]
    fn pair_confidence_is_max_and_rare_concepts_pruned() {
        let mentions = vec![
            mention("p1", "Fever", 0.6),
            mention("p1", "fever.", 0.95),
            mention("p2", "fever", 0.7),
            mention("p1", "rash", 0.8),
        ];
        let config = CurationConfig {
            concept_min_fraction: 0.5,
            concept_flag_fraction: 0.9,
            ..CurationConfig::default()
        };
        let out = curate_concepts(&mentions, 3, &config);
        assert_eq!(out.pruned_rare, 1);
        assert_eq!(out.links.len(), 2);
        assert_eq!(out.links[0].confidence, 0.95);
    }

    fn author(paper: &str, first: &str, last: &str, inst: Option<&str>) -> AuthorMention {
        AuthorMention {
            paper_id: paper.to_string(),
            first: Some(first.to_string()),
            middle: None,
            last: last.to_string(),
            inst_name: inst.map(str::to_string),
            inst_country: None,
            inst_city: None,
        }
    }

    #[test]
    fn authors_and_institutions_merge() {
        let out = curate_authors(&[
            author("A", "J.", "Smith", Some("MIT")),
            author("B", "j", "smith", Some("mit")),
            author("B", "Ana", "Lopez", None),
        ]);
        assert_eq!(out.authors.len(), 2);
        assert_eq!(out.authored_by.len(), 3);
        assert_eq!(out.institutions.len(), 1);
        assert_eq!(out.affiliated_with.len(), 1);
        assert_eq!(out.authors_merged, 1);
        let lopez = NormalizedAuthorKey("ana lopez".into());
        assert!(!out.affiliated_with.iter().any(|(a, _)| *a == lopez));
    }

    fn paper(id: &str, title: &str) -> PaperRecord {
        PaperRecord {
            paper_id: id.to_string(),
            title: title.to_string(),
            pub_date: None,
            journal: None,
            doi: None,
        }
    }

    fn bib(citing: &str, title: &str, authors: &[(&str, &str)]) -> BibliographyEntry {
        BibliographyEntry {
            citing_paper_id: citing.to_string(),
            ref_title: title.to_string(),
            ref_authors: authors
                .iter()
                .map(|(f, l)| PersonName {
                    first: Some(f.to_string()),
                    middle: None,
                    last: l.to_string(),
                })
                .collect(),
        }
    }

    #[test]
    fn citations_need_exact_title_and_authors() {
        let papers = vec![paper("p1", "Coronavirus Biology"), paper("p2", "Other")];
        let authors = vec![author("p1", "John", "Smith", None), author("p1", "Ana", "Lopez", None)];
        let hit = bib("p2", "coronavirus biology.", &[("ana", "lopez"), ("JOHN", "SMITH")]);
        let miss = bib("p2", "Coronavirus Biology", &[("Ana", "Lopez"), ("Jon", "Smith")]);
        let own = bib("p1", "Coronavirus Biology", &[("Ana", "Lopez"), ("John", "Smith")]);
        assert_eq!(
            link_citations(std::slice::from_ref(&hit), &papers, &authors),
            vec![("p2".to_string(), "p1".to_string())]
        );
        assert!(link_citations(&[miss], &papers, &authors).is_empty());
        assert!(link_citations(&[own], &papers, &authors).is_empty());
        assert_eq!(link_citations(&[hit.clone(), hit], &papers, &authors).len(), 1);
    }

    fn corpus() -> Corpus {
        let mut c = Corpus {
            papers: vec![paper("p1", "Coronavirus Biology"), paper("p2", "Second")],
            author_mentions: vec![
                author("p1", "John", "Smith", Some("MIT")),
                author("p2", "J", "Smith", Some("mit")),
                author("zz", "X", "Dangling", None),
            ],
            concept_mentions: vec![
                mention("p1", "Acute Appendicitis", 0.9),
                mention("p2", "ultrasound", 0.4),
            ],
            topic_assignments: vec![
                TopicAssignment {
                    paper_id: "p1".into(),
                    topic_label: "Virology".into(),
                    score: 0.7,
                },
                TopicAssignment {
                    paper_id: "p2".into(),
                    topic_label: "Astrology".into(),
                    score: 0.7,
                },
            ],
            bibliography: vec![bib("p2", "Coronavirus biology", &[("John", "Smith")])],
            ..Corpus::default()
        };
        c.normalize();
        c
    }

    #[test]
    fn curate_builds_a_consistent_graph() {
        let curated = curate(&corpus(), &IngestConfig::default(), &CurationConfig::default()).unwrap();
        let r = &curated.report;
        assert_eq!(r.dropped_low_confidence, 1);
        assert_eq!(r.citations_linked, 1);
        assert_eq!(r.dropped_dangling, 1);
        assert_eq!(r.dropped_out_of_vocabulary_topics, 1);
        let g = build_graph(&curated.graph).unwrap();
        assert_eq!(g.entity_counts()[&EntityKind::Author], 2);
        assert_eq!(g.entity_counts()[&EntityKind::Institution], 1);
        assert_eq!(g.entity_counts()[&EntityKind::Topic], 1);
        assert_eq!(g.relation_counts()[&Relation::Cites], 1);
    }

    #[test]
    fn curated_files_round_trip() {
        let curated = curate(&corpus(), &IngestConfig::default(), &CurationConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_graph_input(&curated.graph, dir.path(), &["h".into()]).unwrap();
        let back = read_graph_input(dir.path()).unwrap();
        let a = build_graph(&curated.graph).unwrap();
        let b = build_graph(&back).unwrap();
        assert_eq!(a.entities(), b.entities());
        assert_eq!(a.triplets(), b.triplets());
    }

    #[test]
    fn config_validation() {
        let bad = CurationConfig {
            concept_min_fraction: 0.6,
            ..CurationConfig::default()
        };
        assert!(bad.validate().is_err());
        assert!(CurationConfig::default().validate().is_ok());
    }
}
