//! Seeded synthetic fixtures with planted structure: a small knowledge graph
//! with translational relations and a topic-clustered paper corpus.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    AuthorMention, BibliographyEntry, ConceptMention, Corpus, PaperRecord, PersonName, Section,
    SectionText, TopicAssignment, DEFAULT_TOPICS,
};
use crate::kge::{IdTriplet, KgeDataset};

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticKgConfig {
    pub entities: usize,
    pub relations: usize,
    pub triplets: usize,
    pub latent_dim: usize,
    /// Tails are drawn among this many nearest latent points to `x_h + o_r`.
    pub nearest: usize,
    pub holdout_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticKgConfig {
    fn default() -> Self {
        Self {
            entities: 200,
            relations: 4,
            triplets: 2000,
            latent_dim: 4,
            nearest: 3,
            holdout_fraction: 0.1,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticKg {
    pub dataset: KgeDataset,
    pub train: Vec<IdTriplet>,
    pub test: Vec<IdTriplet>,
}

impl SyntheticKg {
    pub fn train_dataset(&self) -> KgeDataset {
        KgeDataset {
            triplets: self.train.clone(),
            ..self.dataset.clone()
        }
    }
}

/// Entities get random latent points, relations random offsets; a triplet
/// `(h, r, t)` picks `t` among the latent points nearest to `x_h + o_r`.
pub fn synthetic_kg(config: &SyntheticKgConfig) -> SyntheticKg {
    let n = config.entities;
    assert!(config.nearest < n, "nearest must be below the entity count");
    assert!(
        config.triplets <= n * config.relations * config.nearest,
        "not enough distinct triplets available"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let d = config.latent_dim;
    let points: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    let offsets: Vec<Vec<f64>> = (0..config.relations)
        .map(|_| (0..d).map(|_| rng.gen_range(-0.5..0.5)).collect())
        .collect();
    let candidates: Vec<Vec<Vec<u32>>> = (0..n)
        .map(|h| {
            offsets
                .iter()
                .map(|o| {
                    let target: Vec<f64> = points[h].iter().zip(o).map(|(x, o)| x + o).collect();
                    let mut by_distance: Vec<(f64, u32)> = (0..n)
                        .filter(|&t| t != h)
                        .map(|t| {
                            let dist: f64 =
                                points[t].iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum();
                            (dist, t as u32)
                        })
                        .collect();
                    by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                    by_distance.iter().take(config.nearest).map(|p| p.1).collect()
                })
                .collect()
        })
        .collect();

    let mut seen = HashSet::new();
    let mut triplets = Vec::with_capacity(config.triplets);
    while triplets.len() < config.triplets {
        let h = rng.gen_range(0..n);
        let r = rng.gen_range(0..config.relations);
        let t = *candidates[h][r].choose(&mut rng).expect("nearest >= 1");
        let triplet = IdTriplet::new(h as u32, r as u32, t);
        if seen.insert(triplet) {
            triplets.push(triplet);
        }
    }
    let mut shuffled = triplets.clone();
    shuffled.shuffle(&mut rng);
    let held = (config.triplets as f64 * config.holdout_fraction).round() as usize;
    let test = shuffled[..held].to_vec();
    let train = shuffled[held..].to_vec();
    SyntheticKg {
        dataset: KgeDataset {
            num_entities: n,
            num_relations: config.relations,
            triplets,
        },
        train,
        test,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpusConfig {
    pub papers: usize,
    pub clusters: usize,
    pub words_per_topic: usize,
    pub authors_per_cluster: usize,
    pub concepts_per_cluster: usize,
    /// Probability that a paper also carries its cluster's second topic.
    pub secondary_topic_rate: f64,
    /// Probability that an author, concept or citation is drawn from another
    /// cluster.
    pub cross_cluster_rate: f64,
    pub seed: u64,
}

impl Default for SyntheticCorpusConfig {
    fn default() -> Self {
        Self {
            papers: 500,
            clusters: 5,
            words_per_topic: 30,
            authors_per_cluster: 40,
            concepts_per_cluster: 25,
            secondary_topic_rate: 0.4,
            cross_cluster_rate: 0.1,
            seed: 7,
        }
    }
}

/// Lowercase alphabetic token for `n` (a, b, ..., z, ba, bb, ...).
fn alpha(mut n: usize) -> String {
    let mut out = Vec::new();
    loop {
        out.push(b'a' + (n % 26) as u8);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    out.reverse();
    String::from_utf8(out).expect("ascii")
}

fn capitalized(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

fn topic_word(topic: usize, j: usize) -> String {
    format!("{}{}", alpha(topic + 1), alpha(j + 100))
}

fn sentence(rng: &mut ChaCha8Rng, topics: &[usize], words_per_topic: usize, len: usize) -> String {
    let words: Vec<String> = (0..len)
        .map(|_| {
            if rng.gen_bool(0.15) {
                // shared filler vocabulary
                format!("common{}", alpha(rng.gen_range(0..40)))
            } else {
                let t = topics[rng.gen_range(0..topics.len())];
                topic_word(t, rng.gen_range(0..words_per_topic))
            }
        })
        .collect();
    capitalized(&words.join(" ")) + "."
}

/// Papers in `clusters` planted groups. Cluster `c` owns topics `2c` and
/// `2c + 1` of the default vocabulary; text words, authors, concepts and
/// citations are drawn mostly from the paper's own cluster.
pub fn synthetic_corpus(config: &SyntheticCorpusConfig) -> Corpus {
    assert!(config.clusters >= 1 && 2 * config.clusters <= DEFAULT_TOPICS.len());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut corpus = Corpus::default();
    let mut paper_authors: Vec<Vec<PersonName>> = Vec::with_capacity(config.papers);
    let mut titles = Vec::with_capacity(config.papers);

    for i in 0..config.papers {
        let cluster = i % config.clusters;
        let id = format!("P{i:04}");
        let mut topics = vec![2 * cluster];
        if rng.gen_bool(config.secondary_topic_rate) {
            topics.push(2 * cluster + 1);
        }
        let other_cluster = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(config.cross_cluster_rate) {
                rng.gen_range(0..config.clusters)
            } else {
                cluster
            }
        };

        let title = format!(
            "{} study{}",
            sentence(&mut rng, &topics, config.words_per_topic, 6).trim_end_matches('.'),
            alpha(i)
        );
        corpus.papers.push(PaperRecord {
            paper_id: id.clone(),
            title: title.clone(),
            pub_date: Some(format!("2020-{:02}-{:02}", 1 + i % 12, 1 + i % 28)),
            journal: Some(format!("Journal {}", capitalized(&alpha(cluster + rng.gen_range(0..2))))),
            doi: Some(format!("10.5555/{id}")),
        });
        titles.push(title);
        let abstract_text: Vec<String> = (0..4)
            .map(|_| sentence(&mut rng, &topics, config.words_per_topic, 10))
            .collect();
        corpus.sections.push(SectionText {
            paper_id: id.clone(),
            section: Section::Abstract,
            text: abstract_text.join(" "),
        });
        let body: Vec<String> = (0..6)
            .map(|_| sentence(&mut rng, &topics, config.words_per_topic, 12))
            .collect();
        corpus.sections.push(SectionText {
            paper_id: id.clone(),
            section: Section::Body,
            text: body.join(" "),
        });

        for &t in &topics {
            corpus.topic_assignments.push(TopicAssignment {
                paper_id: id.clone(),
                topic_label: DEFAULT_TOPICS[t].to_string(),
                score: rng.gen_range(0.5..1.0),
            });
        }

        let mut names = BTreeSet::new();
        while names.len() < 3 {
            let c = other_cluster(&mut rng);
            names.insert((c, rng.gen_range(0..config.authors_per_cluster)));
        }
        let mut persons = Vec::new();
        for (c, a) in names {
            let person = PersonName {
                first: Some(capitalized(&alpha(a + 30))),
                middle: None,
                last: format!("{}son", capitalized(&alpha(c * 1000 + a + 700))),
            };
            corpus.author_mentions.push(AuthorMention {
                paper_id: id.clone(),
                first: person.first.clone(),
                middle: None,
                last: person.last.clone(),
                inst_name: Some(format!("Institute {}", capitalized(&alpha(c + 10)))),
                inst_country: Some("Testland".to_string()),
                inst_city: None,
            });
            persons.push(person);
        }
        paper_authors.push(persons);

        let mut concepts = BTreeSet::new();
        while concepts.len() < 4 {
            let c = other_cluster(&mut rng);
            concepts.insert((c, rng.gen_range(0..config.concepts_per_cluster)));
        }
        for (c, k) in concepts {
            corpus.concept_mentions.push(ConceptMention {
                paper_id: id.clone(),
                surface_text: format!("marker {}", alpha(c * 100 + k + 500)),
                category: "Disease".to_string(),
                confidence: rng.gen_range(0.6..1.0),
            });
        }

        if i >= config.clusters {
            let mut cited = BTreeSet::new();
            let wanted = rng.gen_range(2..=5).min(i / config.clusters);
            let mut attempts = 0;
            while cited.len() < wanted && attempts < 100 {
                attempts += 1;
                let c = other_cluster(&mut rng);
                let slots = (i - c).div_ceil(config.clusters);
                if slots == 0 {
                    continue;
                }
                let j = c + config.clusters * rng.gen_range(0..slots);
                if j < i {
                    cited.insert(j);
                }
            }
            for j in cited {
                corpus.bibliography.push(BibliographyEntry {
                    citing_paper_id: id.clone(),
                    ref_title: titles[j].clone(),
                    ref_authors: paper_authors[j].clone(),
                });
            }
        }
    }
    corpus.normalize();
    corpus
}
