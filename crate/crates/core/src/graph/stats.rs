use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{PropertyGraph, Relation};

/// Above this many nodes in the largest component the diameter falls back to
/// a double-sweep lower bound.
pub const DEFAULT_EXACT_DIAMETER_LIMIT: usize = 200_000;

/// Undirected CSR view over the triplets whose relation is not excluded.
struct UndirectedView {
    offsets: Vec<usize>,
    targets: Vec<u32>,
}

impl UndirectedView {
    fn new(graph: &PropertyGraph, excluded: &BTreeSet<Relation>) -> Self {
        let n = graph.num_entities();
        let included = || {
            graph
                .triplets()
                .iter()
                .filter(|t| !excluded.contains(&t.relation))
        };
        let mut offsets = vec![0usize; n + 1];
        for t in included() {
            offsets[t.head.index() + 1] += 1;
            offsets[t.tail.index() + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let mut cursor = offsets.clone();
        let mut targets = vec![0u32; offsets[n]];
        for t in included() {
            targets[cursor[t.head.index()]] = t.tail.0;
            cursor[t.head.index()] += 1;
            targets[cursor[t.tail.index()]] = t.head.0;
            cursor[t.tail.index()] += 1;
        }
        Self { offsets, targets }
    }

    fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    fn degree(&self, v: usize) -> usize {
        self.offsets[v + 1] - self.offsets[v]
    }

    fn neighbors(&self, v: usize) -> &[u32] {
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }

    /// BFS distances from `source`; `u32::MAX` marks unreachable nodes.
    fn bfs(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.len()];
        let mut queue = VecDeque::new();
        dist[source] = 0;
        queue.push_back(source);
        while let Some(v) = queue.pop_front() {
            let d = dist[v] + 1;
            for &w in self.neighbors(v) {
                let w = w as usize;
                if dist[w] == u32::MAX {
                    dist[w] = d;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// (farthest node, eccentricity) of `source` within its component.
    fn farthest(&self, source: usize) -> (usize, u32) {
        let dist = self.bfs(source);
        let mut best = (source, 0);
        for (v, &d) in dist.iter().enumerate() {
            if d != u32::MAX && d > best.1 {
                best = (v, d);
            }
        }
        best
    }
}

/// Histogram (degree -> number of entities) of undirected degree counted
/// over triplets whose relation is not in `excluded`. Isolated entities are
/// counted at degree 0.
pub fn degree_distribution(
    graph: &PropertyGraph,
    excluded: &BTreeSet<Relation>,
) -> BTreeMap<usize, usize> {
    let mut degree = vec![0usize; graph.num_entities()];
    for t in graph.triplets() {
        if !excluded.contains(&t.relation) {
            degree[t.head.index()] += 1;
            degree[t.tail.index()] += 1;
        }
    }
    let mut hist = BTreeMap::new();
    for d in degree {
        *hist.entry(d).or_insert(0) += 1;
    }
    hist
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Components {
    /// Component label per entity; labels are numbered in order of each
    /// component's smallest entity id.
    pub labels: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }

    /// Label of the largest component (smallest label on ties).
    pub fn largest(&self) -> Option<usize> {
        self.sizes
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(label, _)| label)
    }
}

fn components_of(view: &UndirectedView) -> Components {
    let n = view.len();
    let mut labels = vec![usize::MAX; n];
    let mut sizes = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if labels[start] != usize::MAX {
            continue;
        }
        let label = sizes.len();
        let mut size = 0;
        labels[start] = label;
        queue.push_back(start);
        while let Some(v) = queue.pop_front() {
            size += 1;
            for &w in view.neighbors(v) {
                let w = w as usize;
                if labels[w] == usize::MAX {
                    labels[w] = label;
                    queue.push_back(w);
                }
            }
        }
        sizes.push(size);
    }
    Components { labels, sizes }
}

/// Connected components of the undirected view over all relations.
pub fn connected_components(graph: &PropertyGraph) -> Components {
    components_of(&UndirectedView::new(graph, &BTreeSet::new()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diameter {
    pub value: usize,
    /// False when the double-sweep lower bound was used.
    pub exact: bool,
    pub component_size: usize,
}

/// Exact diameter of the largest connected component.
pub fn largest_cc_diameter(graph: &PropertyGraph) -> usize {
    largest_cc_diameter_with(graph, DEFAULT_EXACT_DIAMETER_LIMIT).value
}

/// Diameter of the largest component: all-sources BFS when the component has
/// at most `exact_limit` nodes, otherwise a repeated double-sweep lower bound.
pub fn largest_cc_diameter_with(graph: &PropertyGraph, exact_limit: usize) -> Diameter {
    let view = UndirectedView::new(graph, &BTreeSet::new());
    let components = components_of(&view);
    let Some(largest) = components.largest() else {
        return Diameter {
            value: 0,
            exact: true,
            component_size: 0,
        };
    };
    let members: Vec<usize> = (0..view.len())
        .filter(|&v| components.labels[v] == largest)
        .collect();
    let component_size = members.len();

    if component_size <= exact_limit {
        let value = members
            .par_iter()
            .map(|&s| view.farthest(s).1)
            .max()
            .unwrap_or(0) as usize;
        return Diameter {
            value,
            exact: true,
            component_size,
        };
    }

    // Start from the highest-degree member, then sweep from the far end.
    let mut start = members
        .iter()
        .copied()
        .max_by(|&a, &b| view.degree(a).cmp(&view.degree(b)).then(b.cmp(&a)))
        .unwrap_or(members[0]);
    let mut best = 0;
    for _ in 0..4 {
        let (far, _) = view.farthest(start);
        let (next, ecc) = view.farthest(far);
        if ecc <= best {
            break;
        }
        best = ecc;
        start = next;
    }
    Diameter {
        value: best as usize,
        exact: false,
        component_size,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphStats {
    pub entity_counts: BTreeMap<String, usize>,
    pub relation_counts: BTreeMap<String, usize>,
    pub total_entities: usize,
    pub total_relations: usize,
    /// Mean out-degree per relation over every entity of the relation's head
    /// kind, entities without such a relation included as zeros.
    pub mean_out_degree: BTreeMap<String, f64>,
    pub component_count: usize,
    pub largest_component_size: usize,
    pub largest_component_diameter: usize,
    pub diameter_exact: bool,
}

pub fn graph_stats(graph: &PropertyGraph, exact_limit: usize) -> GraphStats {
    let entity_counts = graph.entity_counts();
    let relation_counts = graph.relation_counts();
    let mean_out_degree = Relation::ALL
        .iter()
        .map(|&r| {
            let heads = entity_counts[&r.signature().0];
            let mean = if heads == 0 {
                0.0
            } else {
                relation_counts[&r] as f64 / heads as f64
            };
            (r.to_string(), mean)
        })
        .collect();
    let components = connected_components(graph);
    let diameter = largest_cc_diameter_with(graph, exact_limit);
    GraphStats {
        entity_counts: entity_counts
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
        relation_counts: relation_counts
            .iter()
            .map(|(k, v)| (k.to_string(), *v))
            .collect(),
        total_entities: graph.num_entities(),
        total_relations: graph.num_triplets(),
        mean_out_degree,
        component_count: components.count(),
        largest_component_size: diameter.component_size,
        largest_component_diameter: diameter.value,
        diameter_exact: diameter.exact,
    }
}
