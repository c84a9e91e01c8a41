//! Immutable directed property graph over five entity kinds and five typed
//! relations, with per-relation forward and reverse adjacency.

mod query;
mod stats;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use query::{
    query_concept_citation_rank, query_concept_topic, CitationRankRow, ConceptTopicResult,
    RankedEntity,
};
pub use stats::{
    connected_components, degree_distribution, graph_stats, largest_cc_diameter,
    largest_cc_diameter_with, Components, Diameter, GraphStats, DEFAULT_EXACT_DIAMETER_LIMIT,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityKind {
    Paper,
    Author,
    Institution,
    Concept,
    Topic,
}

impl EntityKind {
    pub const ALL: [EntityKind; 5] = [
        EntityKind::Paper,
        EntityKind::Author,
        EntityKind::Institution,
        EntityKind::Concept,
        EntityKind::Topic,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::Paper => "paper",
            EntityKind::Author => "author",
            EntityKind::Institution => "institution",
            EntityKind::Concept => "concept",
            EntityKind::Topic => "topic",
        }
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EntityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::GraphInput(format!("unknown entity kind {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    AuthoredBy,
    AffiliatedWith,
    AssociatedConcept,
    AssociatedTopic,
    Cites,
}

impl Relation {
    pub const ALL: [Relation; 5] = [
        Relation::AuthoredBy,
        Relation::AffiliatedWith,
        Relation::AssociatedConcept,
        Relation::AssociatedTopic,
        Relation::Cites,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Relation> {
        Relation::ALL.get(i).copied()
    }

    /// Fixed (head kind, tail kind) signature.
    pub fn signature(self) -> (EntityKind, EntityKind) {
        use EntityKind::*;
        match self {
            Relation::AuthoredBy => (Paper, Author),
            Relation::AffiliatedWith => (Author, Institution),
            Relation::AssociatedConcept => (Paper, Concept),
            Relation::AssociatedTopic => (Paper, Topic),
            Relation::Cites => (Paper, Paper),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Relation::AuthoredBy => "authored_by",
            Relation::AffiliatedWith => "affiliated_with",
            Relation::AssociatedConcept => "associated_concept",
            Relation::AssociatedTopic => "associated_topic",
            Relation::Cites => "cites",
        }
    }
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Relation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Relation::ALL
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| Error::GraphInput(format!("unknown relation {s:?}")))
    }
}

/// Dense entity handle in `[0, |V|)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntityAttributes {
    Paper {
        title: String,
        pub_date: Option<String>,
        journal: Option<String>,
        doi: Option<String>,
    },
    Author {
        display_name: String,
    },
    Institution {
        name: String,
        country: Option<String>,
        city: Option<String>,
    },
    Concept {
        category: String,
        paper_count: usize,
        flagged: bool,
    },
    Topic,
}

impl EntityAttributes {
    pub fn kind(&self) -> EntityKind {
        match self {
            EntityAttributes::Paper { .. } => EntityKind::Paper,
            EntityAttributes::Author { .. } => EntityKind::Author,
            EntityAttributes::Institution { .. } => EntityKind::Institution,
            EntityAttributes::Concept { .. } => EntityKind::Concept,
            EntityAttributes::Topic => EntityKind::Topic,
        }
    }
}

/// Natural key of an entity: its kind plus a kind-specific string key
/// (paper id, normalized author name, normalized concept name, ...).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EntityRef {
    pub kind: EntityKind,
    pub key: String,
}

impl EntityRef {
    pub fn new(kind: EntityKind, key: impl Into<String>) -> Self {
        Self {
            kind,
            key: key.into(),
        }
    }
}

/// Entity as produced by curation, before id assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntityRecord {
    pub key: String,
    pub attributes: EntityAttributes,
}

impl EntityRecord {
    pub fn kind(&self) -> EntityKind {
        self.attributes.kind()
    }

    pub fn entity_ref(&self) -> EntityRef {
        EntityRef::new(self.kind(), self.key.clone())
    }
}

/// Triplet as produced by curation, endpoints given by natural key.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletRecord {
    pub head: EntityRef,
    pub relation: Relation,
    pub tail: EntityRef,
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub key: String,
    pub attributes: EntityAttributes,
}

impl Entity {
    pub fn kind(&self) -> EntityKind {
        self.attributes.kind()
    }

    /// Human-readable name: title for papers, key otherwise.
    pub fn label(&self) -> &str {
        match &self.attributes {
            EntityAttributes::Paper { title, .. } => title,
            EntityAttributes::Author { display_name } => display_name,
            EntityAttributes::Institution { name, .. } => name,
            _ => &self.key,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triplet {
    pub head: EntityId,
    pub relation: Relation,
    pub tail: EntityId,
    pub weight: Option<f64>,
}

/// Compressed adjacency for one relation and one direction.
#[derive(Debug, Clone, Default)]
struct Adjacency {
    offsets: Vec<usize>,
    targets: Vec<EntityId>,
}

impl Adjacency {
    fn build(n: usize, pairs: impl Iterator<Item = (EntityId, EntityId)> + Clone) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for (from, _) in pairs.clone() {
            offsets[from.index() + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![EntityId(0); offsets[n]];
        for (from, to) in pairs {
            targets[cursor[from.index()]] = to;
            cursor[from.index()] += 1;
        }
        // Triplets are sorted, so each row is already ascending for the
        // forward direction; sort to make the reverse direction match.
        for i in 0..n {
            targets[offsets[i]..offsets[i + 1]].sort_unstable();
        }
        Self { offsets, targets }
    }

    fn neighbors(&self, id: EntityId) -> &[EntityId] {
        let i = id.index();
        &self.targets[self.offsets[i]..self.offsets[i + 1]]
    }
}

#[derive(Debug, Clone)]
pub struct PropertyGraph {
    entities: Vec<Entity>,
    triplets: Vec<Triplet>,
    index: HashMap<EntityRef, EntityId>,
    forward: Vec<Adjacency>,
    reverse: Vec<Adjacency>,
}

/// Curated entities and triplets, ready for [`build_graph`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GraphInput {
    pub entities: Vec<EntityRecord>,
    pub triplets: Vec<TripletRecord>,
}

/// Assigns dense ids in (kind, key) order and builds all adjacency indexes.
///
/// Rejects duplicate entities, unknown endpoints, relation signature
/// violations and duplicate (head, relation, tail) triplets.
pub fn build_graph(input: &GraphInput) -> Result<PropertyGraph> {
    let mut records: Vec<&EntityRecord> = input.entities.iter().collect();
    records.sort_by(|a, b| (a.kind(), &a.key).cmp(&(b.kind(), &b.key)));

    let mut index = HashMap::with_capacity(records.len());
    let mut entities = Vec::with_capacity(records.len());
    for (i, rec) in records.into_iter().enumerate() {
        let id = EntityId(u32::try_from(i).map_err(|_| {
            Error::GraphInput("more than u32::MAX entities".to_string())
        })?);
        if index.insert(rec.entity_ref(), id).is_some() {
            return Err(Error::GraphInput(format!(
                "duplicate {} entity {:?}",
                rec.kind(),
                rec.key
            )));
        }
        entities.push(Entity {
            id,
            key: rec.key.clone(),
            attributes: rec.attributes.clone(),
        });
    }

    let resolve = |r: &EntityRef| {
        index.get(r).copied().ok_or_else(|| {
            Error::GraphInput(format!("triplet endpoint {} {:?} is not an entity", r.kind, r.key))
        })
    };
    let mut triplets = Vec::with_capacity(input.triplets.len());
    let mut seen = HashSet::with_capacity(input.triplets.len());
    for t in &input.triplets {
        let (head_kind, tail_kind) = t.relation.signature();
        if t.head.kind != head_kind || t.tail.kind != tail_kind {
            return Err(Error::Signature {
                relation: t.relation.to_string(),
                head: t.head.kind.to_string(),
                tail: t.tail.kind.to_string(),
            });
        }
        let head = resolve(&t.head)?;
        let tail = resolve(&t.tail)?;
        if !seen.insert((head, t.relation, tail)) {
            return Err(Error::GraphInput(format!(
                "duplicate triplet ({:?}, {}, {:?})",
                t.head.key, t.relation, t.tail.key
            )));
        }
        if let Some(w) = t.weight {
            if !w.is_finite() {
                return Err(Error::GraphInput(format!(
                    "non-finite weight on ({:?}, {}, {:?})",
                    t.head.key, t.relation, t.tail.key
                )));
            }
        }
        triplets.push(Triplet {
            head,
            relation: t.relation,
            tail,
            weight: t.weight,
        });
    }
    triplets.sort_by_key(|t| (t.relation, t.head, t.tail));

    let n = entities.len();
    let mut forward = Vec::with_capacity(Relation::ALL.len());
    let mut reverse = Vec::with_capacity(Relation::ALL.len());
    for rel in Relation::ALL {
        let of_rel = triplets.iter().filter(move |t| t.relation == rel);
        forward.push(Adjacency::build(n, of_rel.clone().map(|t| (t.head, t.tail))));
        reverse.push(Adjacency::build(n, of_rel.map(|t| (t.tail, t.head))));
    }

    Ok(PropertyGraph {
        entities,
        triplets,
        index,
        forward,
        reverse,
    })
}

impl PropertyGraph {
    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_triplets(&self) -> usize {
        self.triplets.len()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    /// Triplets sorted by (relation, head, tail).
    pub fn triplets(&self) -> &[Triplet] {
        &self.triplets
    }

    pub fn entity(&self, id: EntityId) -> &Entity {
        &self.entities[id.index()]
    }

    pub fn lookup(&self, kind: EntityKind, key: &str) -> Option<EntityId> {
        self.index.get(&EntityRef::new(kind, key)).copied()
    }

    pub fn entities_of_kind(&self, kind: EntityKind) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(move |e| e.kind() == kind)
    }

    pub fn out_neighbors(&self, id: EntityId, relation: Relation) -> &[EntityId] {
        self.forward[relation.index()].neighbors(id)
    }

    pub fn in_neighbors(&self, id: EntityId, relation: Relation) -> &[EntityId] {
        self.reverse[relation.index()].neighbors(id)
    }

    pub fn entity_counts(&self) -> BTreeMap<EntityKind, usize> {
        let mut out: BTreeMap<EntityKind, usize> =
            EntityKind::ALL.iter().map(|&k| (k, 0)).collect();
        for e in &self.entities {
            *out.entry(e.kind()).or_default() += 1;
        }
        out
    }

    pub fn relation_counts(&self) -> BTreeMap<Relation, usize> {
        let mut out: BTreeMap<Relation, usize> = Relation::ALL.iter().map(|&r| (r, 0)).collect();
        for t in &self.triplets {
            *out.entry(t.relation).or_default() += 1;
        }
        out
    }
}
