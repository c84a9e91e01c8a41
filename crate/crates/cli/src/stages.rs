use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use ckg_core::curation::{curate, read_graph_input, write_graph_input};
use ckg_core::evaluation::{
    citation_map, citation_overlap, corpus_topic_similarity, iou_matrix, popularity_histogram,
    topic_by_journal, topic_vectors, truncated_svd_2d, write_iou_matrix, write_popularity,
    write_svd_projection, write_topic_by_journal, JaccardForm, MetricReport, ProjectedPoint,
    REPORT_FILE,
};
use ckg_core::graph::{
    build_graph, degree_distribution, graph_stats, query_concept_citation_rank,
    query_concept_topic, EntityKind, PropertyGraph, Relation, DEFAULT_EXACT_DIAMETER_LIMIT,
};
use ckg_core::ingest::{load_corpus, validate_corpus, write_corpus, write_csv, IngestConfig};
use ckg_core::kge::{
    kfold_validate, paper_vectors, score_histogram, train_graph, write_model, KgeDataset,
};
use ckg_core::semantic::{
    corpus_semantics_report, embed_corpus_fallback, embed_from_sentence_vectors,
    read_document_vectors, write_document_embeddings, SemanticSource, DOCUMENT_EMBEDDINGS_FILE,
    DOCUMENT_VECTORS_FILE, SENTENCE_VECTORS_FILE,
};
use ckg_core::similarity::{
    combine_all, random_recommendations, read_recommendations, read_vector_table,
    write_combined, write_recommendations, RecommendationList, SimilarityIndex, COMBINED_FILE,
};
use ckg_core::Error;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Method, PipelineConfig};
use crate::{CliError, Command};

type Result<T> = std::result::Result<T, CliError>;

const PAPER_VECTORS_FILE: &str = "paper_vectors.csv";
const SVD_SOURCES: usize = 5;

/// Output header context: subcommand name plus effective config.
struct Stage<'a> {
    name: String,
    config: &'a PipelineConfig,
}

impl<'a> Stage<'a> {
    fn new(name: impl Into<String>, config: &'a PipelineConfig) -> Self {
        Self {
            name: name.into(),
            config,
        }
    }

    fn config_json(&self) -> Value {
        serde_json::to_value(self.config).expect("config serializes")
    }

    fn lines(&self) -> Vec<String> {
        vec![
            format!("ckg {}", env!("CARGO_PKG_VERSION")),
            format!("subcommand: {}", self.name),
            format!("config: {}", self.config_json()),
        ]
    }

    fn header_json(&self) -> Value {
        json!({
            "tool": "ckg",
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": self.name,
            "config": self.config_json(),
        })
    }

    fn dir(&self, stage: &str) -> Result<PathBuf> {
        let dir = self.config.dir(stage);
        fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        Ok(dir)
    }

    /// JSON document with a `header` field followed by the fields of `body`.
    fn write_json(&self, dir: &Path, file: &str, body: impl Serialize) -> Result<()> {
        let path = dir.join(file);
        let mut doc = serde_json::Map::new();
        doc.insert("header".to_string(), self.header_json());
        match serde_json::to_value(body).expect("report serializes") {
            Value::Object(map) => doc.extend(map),
            other => {
                doc.insert("report".to_string(), other);
            }
        }
        let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json");
        fs::write(&path, text + "\n").map_err(|e| Error::Io { path, source: e })?;
        Ok(())
    }
}

pub fn run(command: &Command, config: &PipelineConfig) -> Result<()> {
    let name = command.name();
    match command {
        Command::Ingest => ingest(&Stage::new(name, config)),
        Command::Curate => curate_stage(&Stage::new(name, config)),
        Command::Build => build(&Stage::new(name, config)),
        Command::Stats => stats(&Stage::new(name, config)),
        Command::QueryConceptTopic { concepts, topics } => {
            query_topic(&Stage::new(name, config), concepts, topics)
        }
        Command::QueryCitationRank { concepts, limit } => {
            query_citations(&Stage::new(name, config), concepts, *limit)
        }
        Command::TrainKge => train_kge(&Stage::new(name, config)),
        Command::ValidateKge => validate_kge(&Stage::new(name, config)),
        Command::EmbedSemantic => embed_semantic(&Stage::new(name, config)),
        Command::Combine => combine(&Stage::new(name, config)),
        Command::Recommend => recommend(&Stage::new(name, config)),
        Command::Evaluate => evaluate(&Stage::new(name, config)),
        Command::Svd => svd(&Stage::new(name, config)),
        Command::Pipeline => pipeline(config),
    }
}

fn ingest_config(config: &PipelineConfig) -> Result<IngestConfig> {
    Ok(match &config.topics_file {
        Some(path) => IngestConfig::from_vocabulary_file(path)?,
        None => IngestConfig::default(),
    })
}

fn ingest(stage: &Stage) -> Result<()> {
    let ingest = ingest_config(stage.config)?;
    let corpus = load_corpus(&stage.config.corpus_dir, &ingest)?;
    let validation = validate_corpus(&corpus, &ingest);
    for w in &validation.dangling_references {
        eprintln!("warning: {} references unknown paper {:?}", w.file, w.paper_id);
    }
    let dir = stage.dir("ingest")?;
    write_corpus(&corpus, &dir, &stage.lines())?;
    let counts = corpus.counts();
    println!(
        "ingest: {} papers, {} author mentions, {} concept mentions, {} topic assignments, {} bibliography entries, {} sections",
        counts.papers,
        counts.author_mentions,
        counts.concept_mentions,
        counts.topic_assignments,
        counts.bibliography_entries,
        counts.sections
    );
    stage.write_json(
        &dir,
        "ingest_report.json",
        json!({ "counts": counts, "validation": validation }),
    )
}

fn curate_stage(stage: &Stage) -> Result<()> {
    let ingest = ingest_config(stage.config)?;
    let corpus = load_corpus(&stage.config.dir("ingest"), &ingest)?;
    let curated = curate(&corpus, &ingest, &stage.config.curation)?;
    let dir = stage.dir("curate")?;
    write_graph_input(&curated.graph, &dir, &stage.lines())?;
    let r = &curated.report;
    println!(
        "curate: {} concept mentions, {} below threshold, {} pruned, {} flagged, {} author spellings merged, {} citations linked",
        r.mentions_in,
        r.dropped_low_confidence,
        r.pruned_rare,
        r.flagged_frequent,
        r.authors_merged,
        r.citations_linked
    );
    let mut body = serde_json::to_value(r).expect("report");
    body["flagged_concepts"] = json!(curated.flagged_concepts);
    stage.write_json(&dir, "curation_report.json", body)
}

fn load_graph(config: &PipelineConfig) -> Result<PropertyGraph> {
    Ok(build_graph(&read_graph_input(&config.dir("graph"))?)?)
}

fn build(stage: &Stage) -> Result<()> {
    let input = read_graph_input(&stage.config.dir("curate"))?;
    let graph = build_graph(&input)?;
    let dir = stage.dir("graph")?;
    write_graph_input(&input, &dir, &stage.lines())?;
    write_csv(
        &dir,
        "entity_ids.csv",
        &stage.lines(),
        &["entity_id", "kind", "key", "label"],
        graph.entities().iter().map(|e| {
            vec![
                e.id.0.to_string(),
                e.kind().as_str().to_string(),
                e.key.clone(),
                e.label().to_string(),
            ]
        }),
    )?;
    println!(
        "build: {} entities, {} triplets",
        graph.num_entities(),
        graph.num_triplets()
    );
    let entities: BTreeMap<&str, usize> = graph
        .entity_counts()
        .into_iter()
        .map(|(k, v)| (k.as_str(), v))
        .collect();
    let relations: BTreeMap<&str, usize> = graph
        .relation_counts()
        .into_iter()
        .map(|(k, v)| (k.as_str(), v))
        .collect();
    stage.write_json(
        &dir,
        "graph_summary.json",
        json!({ "entities": entities, "relations": relations }),
    )
}

fn stats(stage: &Stage) -> Result<()> {
    let graph = load_graph(stage.config)?;
    let s = graph_stats(&graph, DEFAULT_EXACT_DIAMETER_LIMIT);
    let dir = stage.dir("stats")?;
    let mut rows = Vec::new();
    for (degree, count) in degree_distribution(&graph, &BTreeSet::new()) {
        rows.push(vec!["none".to_string(), degree.to_string(), count.to_string()]);
    }
    for r in Relation::ALL {
        for (degree, count) in degree_distribution(&graph, &BTreeSet::from([r])) {
            rows.push(vec![r.as_str().to_string(), degree.to_string(), count.to_string()]);
        }
    }
    write_csv(
        &dir,
        "degree_distribution.csv",
        &stage.lines(),
        &["excluded_relation", "degree", "count"],
        rows,
    )?;
    println!("{:<20} {:>10}", "entity kind", "count");
    for (k, v) in &s.entity_counts {
        println!("{k:<20} {v:>10}");
    }
    println!("{:<20} {:>10} {:>16}", "relation", "count", "mean out-degree");
    for (k, v) in &s.relation_counts {
        println!("{k:<20} {v:>10} {:>16.3}", s.mean_out_degree.get(k).copied().unwrap_or(0.0));
    }
    println!(
        "components: {}, largest: {}, diameter: {}{}",
        s.component_count,
        s.largest_component_size,
        s.largest_component_diameter,
        if s.diameter_exact { "" } else { " (lower bound)" }
    );
    stage.write_json(&dir, "stats.json", &s)
}

fn names(raw: &str) -> BTreeSet<String> {
    raw.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

fn query_topic(stage: &Stage, concepts: &str, topics: &str) -> Result<()> {
    let graph = load_graph(stage.config)?;
    let result = query_concept_topic(&graph, &names(concepts), &names(topics));
    for c in &result.unknown_concepts {
        eprintln!("warning: unknown concept {c:?}");
    }
    for t in &result.unknown_topics {
        eprintln!("warning: unknown topic {t:?}");
    }
    let mut rows = Vec::new();
    for (i, &p) in result.papers.iter().enumerate() {
        let e = graph.entity(p);
        rows.push(vec![
            "paper".to_string(),
            (i + 1).to_string(),
            e.key.clone(),
            e.label().to_string(),
            String::new(),
        ]);
    }
    for (kind, list) in [("author", &result.authors), ("institution", &result.institutions)] {
        for (i, r) in list.iter().enumerate() {
            rows.push(vec![
                kind.to_string(),
                (i + 1).to_string(),
                r.key.clone(),
                r.label.clone(),
                r.matched_papers.to_string(),
            ]);
        }
    }
    for row in &rows {
        println!("{}", row.join("\t"));
    }
    let dir = stage.dir("query")?;
    write_csv(
        &dir,
        "concept_topic.csv",
        &stage.lines(),
        &["kind", "rank", "key", "label", "matched_papers"],
        rows,
    )?;
    Ok(())
}

fn query_citations(stage: &Stage, concepts: &str, limit: usize) -> Result<()> {
    let graph = load_graph(stage.config)?;
    let (rows, unknown) = query_concept_citation_rank(&graph, &names(concepts), limit)?;
    for c in &unknown {
        eprintln!("warning: unknown concept {c:?}");
    }
    let rows: Vec<Vec<String>> = rows
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                (i + 1).to_string(),
                r.paper_id.clone(),
                r.title.clone(),
                r.cited_by.to_string(),
            ]
        })
        .collect();
    for row in &rows {
        println!("{}", row.join("\t"));
    }
    let dir = stage.dir("query")?;
    write_csv(
        &dir,
        "citation_rank.csv",
        &stage.lines(),
        &["rank", "paper_id", "title", "cited_by"],
        rows,
    )?;
    Ok(())
}

fn write_vectors(
    dir: &Path,
    file: &str,
    header: &[String],
    vectors: &BTreeMap<String, Vec<f64>>,
) -> Result<()> {
    let dim = vectors.values().next().map_or(0, Vec::len);
    let mut columns = vec!["paper_id".to_string()];
    columns.extend((0..dim).map(|i| format!("v{i}")));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    write_csv(
        dir,
        file,
        header,
        &columns,
        vectors.iter().map(|(id, v)| {
            std::iter::once(id.clone())
                .chain(v.iter().map(|x| x.to_string()))
                .collect::<Vec<String>>()
        }),
    )?;
    Ok(())
}

fn train_kge(stage: &Stage) -> Result<()> {
    let graph = load_graph(stage.config)?;
    let out = train_graph(&graph, &stage.config.kge)?;
    let dir = stage.dir(&stage.config.kge_label())?;
    write_model(
        &out.model,
        &stage.config.kge,
        &dir,
        &stage.lines(),
        stage.header_json(),
    )?;
    write_csv(
        &dir,
        "loss_trace.csv",
        &stage.lines(),
        &["epoch", "mean_loss"],
        out.loss_trace
            .iter()
            .enumerate()
            .map(|(e, l)| vec![(e + 1).to_string(), l.to_string()]),
    )?;
    write_vectors(
        &dir,
        PAPER_VECTORS_FILE,
        &stage.lines(),
        &paper_vectors(&graph, &out.model)?,
    )?;
    println!(
        "train-kge: {} entities, {} epochs, final mean loss {}",
        out.model.num_entities,
        out.loss_trace.len(),
        out.loss_trace.last().map_or("n/a".to_string(), |l| format!("{l:.6}"))
    );
    Ok(())
}

fn validate_kge(stage: &Stage) -> Result<()> {
    let graph = load_graph(stage.config)?;
    let dataset = KgeDataset::from_graph(&graph, &stage.config.kge.include_relations);
    let result = kfold_validate(&dataset, &stage.config.kge, stage.config.folds)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    let dir = stage.dir(&stage.config.kge_label())?;
    let relation_name = |r: u32| {
        Relation::from_index(r as usize).map_or_else(|| r.to_string(), |r| r.as_str().to_string())
    };
    let score_rows = |scores: &[ckg_core::kge::FoldScore]| -> Vec<Vec<String>> {
        scores
            .iter()
            .map(|s| {
                vec![
                    s.triplet.head.to_string(),
                    relation_name(s.triplet.relation),
                    s.triplet.tail.to_string(),
                    s.fold.to_string(),
                    s.score.to_string(),
                ]
            })
            .collect()
    };
    let columns = ["head", "relation", "tail", "fold", "score"];
    write_csv(&dir, "scores.csv", &stage.lines(), &columns, score_rows(&result.scores))?;
    write_csv(
        &dir,
        "corrupted_scores.csv",
        &stage.lines(),
        &columns,
        score_rows(&result.corrupted),
    )?;

    let mut histogram = Vec::new();
    for (label, scores) in [("positive", &result.scores), ("corrupted", &result.corrupted)] {
        let mut by_relation: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for s in scores {
            by_relation.entry(s.triplet.relation).or_default().push(s.score);
        }
        for (r, values) in by_relation {
            for (lower, count) in score_histogram(values, 1.0) {
                histogram.push(vec![
                    relation_name(r),
                    label.to_string(),
                    lower.to_string(),
                    count.to_string(),
                ]);
            }
        }
    }
    write_csv(
        &dir,
        "score_histogram.csv",
        &stage.lines(),
        &["relation", "sample", "bin_lower", "count"],
        histogram,
    )?;

    let summaries = result.relation_summaries();
    println!("{:<20} {:>8} {:>14} {:>15}", "relation", "count", "mean positive", "mean corrupted");
    let mut named = Vec::new();
    for s in &summaries {
        println!(
            "{:<20} {:>8} {:>14.4} {:>15.4}",
            relation_name(s.relation),
            s.count,
            s.mean_positive,
            s.mean_corrupted
        );
        named.push(json!({
            "relation": relation_name(s.relation),
            "count": s.count,
            "mean_positive": s.mean_positive,
            "mean_corrupted": s.mean_corrupted,
        }));
    }
    stage.write_json(
        &dir,
        "validation_summary.json",
        json!({ "folds": result.folds, "relations": named, "warnings": result.warnings }),
    )
}

fn embed_semantic(stage: &Stage) -> Result<()> {
    let ingest = ingest_config(stage.config)?;
    let corpus = load_corpus(&stage.config.dir("ingest"), &ingest)?;
    let semantic = &stage.config.semantic;
    let (embeddings, skipped) = match semantic.source {
        SemanticSource::FallbackHashing => embed_corpus_fallback(&corpus, semantic)?,
        SemanticSource::ExternalVectors => {
            let sentences = stage.config.corpus_dir.join(SENTENCE_VECTORS_FILE);
            let documents = stage.config.corpus_dir.join(DOCUMENT_VECTORS_FILE);
            let embeddings = if sentences.is_file() {
                embed_from_sentence_vectors(&sentences, semantic)?
            } else {
                read_document_vectors(&documents, &corpus)?
            };
            let have: BTreeSet<&str> = embeddings.iter().map(|e| e.paper_id.as_str()).collect();
            let skipped = corpus
                .papers
                .iter()
                .filter(|p| !have.contains(p.paper_id.as_str()))
                .map(|p| p.paper_id.clone())
                .collect();
            (embeddings, skipped)
        }
    };
    for id in &skipped {
        eprintln!("warning: no semantic vector for paper {id:?}");
    }
    let dir = stage.dir("semantic")?;
    write_document_embeddings(&embeddings, &dir, &stage.lines())?;
    let rows = corpus_semantics_report(
        corpus.papers.len(),
        &embeddings,
        stage.config.stage_seed("semantic-report"),
    );
    println!("{:<10} {:>9} {:>12}", "portion", "coverage", "mean cosine");
    for r in &rows {
        println!(
            "{:<10} {:>9.3} {:>12}",
            r.portion,
            r.coverage,
            r.mean_cosine.map_or("n/a".to_string(), |c| format!("{c:.4}"))
        );
    }
    stage.write_json(
        &dir,
        "semantics_report.json",
        json!({ "portions": rows, "papers_without_vectors": skipped }),
    )
}

fn semantic_vectors(config: &PipelineConfig) -> Result<BTreeMap<String, Vec<f64>>> {
    Ok(read_vector_table(&config.dir("semantic").join(DOCUMENT_EMBEDDINGS_FILE))?)
}

fn kge_vectors(config: &PipelineConfig) -> Result<BTreeMap<String, Vec<f64>>> {
    Ok(read_vector_table(&config.dir(&config.kge_label()).join(PAPER_VECTORS_FILE))?)
}

fn combine(stage: &Stage) -> Result<()> {
    let combined = combine_all(
        &semantic_vectors(stage.config)?,
        &kge_vectors(stage.config)?,
        stage.config.weights,
    )?;
    let partial = combined.iter().filter(|c| c.partial).count();
    if partial > 0 {
        eprintln!("warning: {partial} papers have only one embedding part");
    }
    let dir = stage.dir("combined")?;
    write_combined(&combined, &dir, &stage.lines())?;
    println!("combine: {} papers ({partial} partial)", combined.len());
    Ok(())
}

fn method_label(config: &PipelineConfig) -> String {
    match config.method {
        Method::Kge => config.kge_label(),
        m => m.as_str().to_string(),
    }
}

fn method_vectors(config: &PipelineConfig) -> Result<BTreeMap<String, Vec<f64>>> {
    match config.method {
        Method::Semantic => semantic_vectors(config),
        Method::Kge => kge_vectors(config),
        Method::Combined => Ok(read_vector_table(&config.dir("combined").join(COMBINED_FILE))?),
        Method::Random => Err(CliError::Usage(
            "the random method has no embeddings".to_string(),
        )),
    }
}

fn recommend(stage: &Stage) -> Result<()> {
    let config = stage.config;
    let lists = match config.method {
        Method::Random => {
            let seed = config.require_seed("--method random")?;
            let graph = load_graph(config)?;
            let ids: Vec<String> = graph
                .entities_of_kind(EntityKind::Paper)
                .map(|e| e.key.clone())
                .collect();
            random_recommendations(&ids, config.k, ckg_core::numeric::derive_seed(seed, "random"))?
        }
        _ => SimilarityIndex::new(method_vectors(config)?)?.batch_top_k(config.k)?,
    };
    let label = method_label(config);
    let dir = stage.dir("recommend")?;
    write_recommendations(&lists, &dir, &format!("recommendations_{label}.csv"), &stage.lines())?;
    println!("recommend: {} lists for method {label}", lists.len());
    Ok(())
}

fn recommendation_files(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry
            .map_err(|e| Error::Io {
                path: dir.to_path_buf(),
                source: e,
            })?
            .path();
        let Some(name) = path.file_name().and_then(|n| n.to_str()) else {
            continue;
        };
        if let Some(method) = name
            .strip_prefix("recommendations_")
            .and_then(|n| n.strip_suffix(".csv"))
        {
            out.push((method.to_string(), path.clone()));
        }
    }
    out.sort();
    Ok(out)
}

/// Metrics with no contributing papers are skipped with a warning.
fn optional_metric(
    result: ckg_core::Result<MetricReport>,
    warnings: &mut Vec<String>,
) -> Result<Option<MetricReport>> {
    match result {
        Ok(r) => Ok(Some(r)),
        Err(Error::EmptyInput(m)) => {
            eprintln!("warning: {m}");
            warnings.push(m);
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

fn evaluate(stage: &Stage) -> Result<()> {
    let config = stage.config;
    let graph = load_graph(config)?;
    let vocabulary = ingest_config(config)?.topic_vocabulary;
    let topics = topic_vectors(&graph, &vocabulary);
    let cites = citation_map(&graph);
    let files = recommendation_files(&config.dir("recommend"))?;
    if files.is_empty() {
        return Err(CliError::Usage(
            "no recommendation files found; run `recommend` first".to_string(),
        ));
    }
    let mut methods: Vec<(String, BTreeMap<String, RecommendationList>)> = Vec::new();
    for (name, path) in &files {
        methods.push((name.clone(), read_recommendations(path)?));
    }

    let mut metrics = Vec::new();
    let mut warnings = Vec::new();
    let mut popularity = Vec::new();
    for (name, lists) in &methods {
        let ts = corpus_topic_similarity(name, lists, &topics, JaccardForm::Standard);
        metrics.extend(optional_metric(ts, &mut warnings)?);
        let co = citation_overlap(name, lists, &cites, config.k);
        metrics.extend(optional_metric(co, &mut warnings)?);
        popularity.push((name.clone(), popularity_histogram(lists, 1, 20)?));
    }
    let names: Vec<String> = methods.iter().map(|m| m.0.clone()).collect();
    let matrix = iou_matrix(&methods)?;
    for (a, row) in names.iter().zip(&matrix) {
        for (b, v) in names.iter().zip(row) {
            metrics.push(MetricReport {
                method: format!("{a}|{b}"),
                metric: "iou".to_string(),
                value: *v,
                support: methods[0].1.len(),
            });
        }
    }

    let dir = stage.dir("eval")?;
    let header = stage.lines();
    write_iou_matrix(&names, &matrix, &dir, &header)?;
    write_popularity(&popularity, &dir, &header)?;
    write_topic_by_journal(&topic_by_journal(&graph, &vocabulary), &vocabulary, &dir, &header)?;

    println!("{:<24} {:<26} {:>10} {:>8}", "method", "metric", "value", "support");
    for m in metrics.iter().filter(|m| m.metric != "iou") {
        println!("{:<24} {:<26} {:>10.4} {:>8}", m.method, m.metric, m.value, m.support);
    }
    println!("iou matrix: {}", names.join(", "));
    for (a, row) in names.iter().zip(&matrix) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.3}")).collect();
        println!("{a:<24} {}", cells.join(" "));
    }
    stage.write_json(&dir, REPORT_FILE, json!({ "metrics": metrics, "warnings": warnings }))
}

/// Up to five sources with distinct first topics (paper id order), topped
/// up with the lowest remaining ids.
fn svd_sources(graph: &PropertyGraph, vocabulary: &[String], available: &BTreeSet<&str>) -> Vec<String> {
    let topics = topic_vectors(graph, vocabulary);
    let mut chosen = Vec::new();
    let mut used = BTreeSet::new();
    for (id, t) in &topics {
        if chosen.len() == SVD_SOURCES {
            break;
        }
        if !available.contains(id.as_str()) {
            continue;
        }
        if let Some(first) = t.bits.iter().position(|&b| b) {
            if used.insert(first) {
                chosen.push(id.clone());
            }
        }
    }
    for id in available {
        if chosen.len() == SVD_SOURCES {
            break;
        }
        if !chosen.iter().any(|c| c == id) {
            chosen.push(id.to_string());
        }
    }
    chosen
}

fn svd(stage: &Stage) -> Result<()> {
    let config = stage.config;
    if config.method == Method::Random {
        return Err(CliError::Usage("svd needs an embedding method, not random".to_string()));
    }
    let vectors = method_vectors(config)?;
    let graph = load_graph(config)?;
    let vocabulary = ingest_config(config)?.topic_vocabulary;
    let available: BTreeSet<&str> = vectors.keys().map(String::as_str).collect();
    let sources = svd_sources(&graph, &vocabulary, &available);
    let index = SimilarityIndex::new(vectors.clone())?;
    let mut members: Vec<(String, String)> = Vec::new();
    for s in &sources {
        members.push((s.clone(), s.clone()));
        for id in index.top_k(s, config.k)?.ids() {
            members.push((id.to_string(), s.clone()));
        }
    }
    let rows: Vec<Vec<f64>> = members.iter().map(|(id, _)| vectors[id].clone()).collect();
    let projection = truncated_svd_2d(&rows, config.stage_seed("svd"))?;
    let points: Vec<ProjectedPoint> = members
        .into_iter()
        .zip(&projection.coords)
        .map(|((paper_id, source_group), c)| ProjectedPoint {
            paper_id,
            x: c[0],
            y: c[1],
            source_group,
        })
        .collect();
    let dir = stage.dir(&format!("svd/{}", method_label(config)))?;
    write_svd_projection(&points, &dir, &stage.lines())?;
    println!(
        "svd: {} points, singular values {:.4} {:.4}",
        points.len(),
        projection.singular_values[0],
        projection.singular_values[1]
    );
    Ok(())
}

fn pipeline(config: &PipelineConfig) -> Result<()> {
    config.require_seed("pipeline (it includes the random baseline)")?;
    let stage = |name: &str, c: &PipelineConfig, f: fn(&Stage) -> Result<()>| {
        f(&Stage::new(format!("pipeline:{name}"), c))
    };
    stage("ingest", config, ingest)?;
    stage("curate", config, curate_stage)?;
    stage("build", config, build)?;
    stage("stats", config, stats)?;
    stage("train-kge", config, train_kge)?;
    stage("validate-kge", config, validate_kge)?;

    let mut without_cites = config.clone();
    without_cites.kge.include_relations.remove(&Relation::Cites);
    let ablation = without_cites.kge.include_relations != config.kge.include_relations;
    if ablation {
        stage("train-kge", &without_cites, train_kge)?;
    }
    stage("embed-semantic", config, embed_semantic)?;
    stage("combine", config, combine)?;

    let with_method = |c: &PipelineConfig, m: Method| PipelineConfig {
        method: m,
        ..c.clone()
    };
    for m in Method::ALL {
        stage("recommend", &with_method(config, m), recommend)?;
    }
    if ablation {
        stage("recommend", &with_method(&without_cites, Method::Kge), recommend)?;
    }
    stage("evaluate", config, evaluate)?;
    for m in [Method::Semantic, Method::Kge, Method::Combined] {
        stage("svd", &with_method(config, m), svd)?;
    }
    Ok(())
}
