//! Acceptance suite. Runs without the libtest harness so every criterion
//! prints exactly one PASS/FAIL line; exits non-zero if any criterion fails.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use ckg_core::curation::{curate, CurationConfig};
use ckg_core::evaluation::{
    citation_map, citation_overlap, corpus_topic_similarity, iou_matrix, jaccard_distance,
    recommendation_iou, topic_similarity, topic_vectors, truncated_svd_2d, JaccardForm,
    TopicVector,
};
use ckg_core::graph::{
    build_graph, connected_components, degree_distribution, largest_cc_diameter, EntityAttributes,
    EntityRecord, EntityRef, GraphInput, PropertyGraph, Relation, TripletRecord,
};
use ckg_core::ingest::{Corpus, IngestConfig};
use ckg_core::kge::{
    kfold_validate, link_prediction, loss_and_gradient, loss_term, paper_vectors, score_triplet,
    score_vectors, train, train_graph, IdTriplet, KgeConfig,
};
use ckg_core::numeric::derive_seed;
use ckg_core::semantic::{embed_corpus_fallback, SemanticConfig};
use ckg_core::similarity::{
    combine, combine_all, random_recommendations, Recommendation, RecommendationList,
    SimilarityIndex, Weights,
};
use ckg_core::synthetic::{synthetic_corpus, synthetic_kg, SyntheticCorpusConfig, SyntheticKgConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Lists = BTreeMap<String, RecommendationList>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------- shared fixtures ----------

fn random_lists(rng: &mut ChaCha8Rng, sources: &[String], pool: &[String], max_k: usize) -> Lists {
    sources
        .iter()
        .map(|s| {
            let k = rng.gen_range(1..=max_k);
            let candidates: Vec<&String> = pool.iter().filter(|p| *p != s).collect();
            let entries = candidates
                .choose_multiple(rng, k.min(candidates.len()))
                .map(|id| Recommendation {
                    paper_id: (*id).clone(),
                    distance: None,
                })
                .collect::<Vec<_>>();
            (
                s.clone(),
                RecommendationList {
                    source: s.clone(),
                    k: entries.len(),
                    entries,
                },
            )
        })
        .collect()
}

fn ids(prefix: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i:03}")).collect()
}

fn bit_set(bits: &[bool]) -> HashSet<usize> {
    bits.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

fn oracle_jaccard(u: &[bool], v: &[bool]) -> f64 {
    let (a, b) = (bit_set(u), bit_set(v));
    let union = a.union(&b).count();
    if union == 0 {
        0.0
    } else {
        (union - a.intersection(&b).count()) as f64 / union as f64
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

// ---------- criterion 1 ----------

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let fixtures = 1000;

    for i in 0..fixtures {
        let n = rng.gen_range(1..=24);
        let u: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let v: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.4)).collect();
        let got = jaccard_distance(&u, &v).map_err(|e| e.to_string())?;
        if !close(got, oracle_jaccard(&u, &v), 1e-12) {
            return Err(format!("jaccard fixture {i}: {got} vs oracle {}", oracle_jaccard(&u, &v)));
        }
    }

    for i in 0..fixtures {
        let n = rng.gen_range(2..30);
        let papers = ids("p", n);
        let a = random_lists(&mut rng, &papers, &papers, 6);
        let b = random_lists(&mut rng, &papers, &papers, 6);
        let got = recommendation_iou("a", &a, "b", &b).map_err(|e| e.to_string())?.value;
        let per: Vec<f64> = papers
            .iter()
            .map(|s| {
                let x: HashSet<&str> = a[s].ids().collect();
                let y: HashSet<&str> = b[s].ids().collect();
                x.intersection(&y).count() as f64 / x.union(&y).count() as f64
            })
            .collect();
        if !close(got, mean(&per), 1e-12) {
            return Err(format!("iou fixture {i}: {got} vs oracle {}", mean(&per)));
        }
    }

    let mut co_checked = 0;
    let mut i = 0;
    while co_checked < fixtures {
        i += 1;
        let n = rng.gen_range(2..30);
        let papers = ids("p", n);
        let k = rng.gen_range(1..=6);
        let lists = random_lists(&mut rng, &papers, &papers, k);
        let mut cites: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for s in &papers {
            if rng.gen_bool(0.7) {
                let c = papers.iter().filter(|p| *p != s && rng.gen_bool(0.3)).cloned().collect();
                cites.insert(s.clone(), c);
            }
        }
        let mut per = Vec::new();
        for (s, list) in &lists {
            let Some(c) = cites.get(s).filter(|c| !c.is_empty()) else {
                continue;
            };
            let top: Vec<&str> = list.ids().take(k).collect();
            let hits = c.iter().filter(|p| top.contains(&p.as_str())).count();
            per.push(100.0 * hits as f64 / k.min(c.len()) as f64);
        }
        match citation_overlap("m", &lists, &cites, k) {
            Ok(r) => {
                if per.is_empty() || !close(r.value, mean(&per), 1e-12) || r.support != per.len() {
                    return Err(format!("citation overlap fixture {i}: {} vs oracle {:?}", r.value, per));
                }
                co_checked += 1;
            }
            Err(_) if per.is_empty() => {}
            Err(e) => return Err(format!("citation overlap fixture {i}: {e}")),
        }
    }

    let mut ts_checked = 0;
    let mut i = 0;
    while ts_checked < fixtures {
        i += 1;
        let n = rng.gen_range(2..30);
        let papers = ids("p", n);
        let width = rng.gen_range(1..=10);
        let topics: BTreeMap<String, TopicVector> = papers
            .iter()
            .map(|p| {
                let bits = (0..width).map(|_| rng.gen_bool(0.3)).collect();
                (
                    p.clone(),
                    TopicVector {
                        paper_id: p.clone(),
                        bits,
                    },
                )
            })
            .collect();
        let lists = random_lists(&mut rng, &papers, &papers, 6);
        let mut per = Vec::new();
        for (s, list) in &lists {
            let src = &topics[s].bits;
            if !src.iter().any(|&b| b) {
                continue;
            }
            let d: Vec<f64> = list.ids().map(|id| oracle_jaccard(src, &topics[id].bits)).collect();
            let one = mean(&d);
            let got_one = topic_similarity(list, &topics, JaccardForm::Standard).map_err(|e| e.to_string())?;
            if !close(got_one, one, 1e-12) {
                return Err(format!("topic similarity fixture {i} source {s}: {got_one} vs {one}"));
            }
            per.push(one);
        }
        match corpus_topic_similarity("m", &lists, &topics, JaccardForm::Standard) {
            Ok(r) => {
                if per.is_empty() || !close(r.value, mean(&per), 1e-12) {
                    return Err(format!("topic similarity fixture {i}: {} vs {}", r.value, mean(&per)));
                }
                ts_checked += 1;
            }
            Err(_) if per.is_empty() => {}
            Err(e) => return Err(format!("topic similarity fixture {i}: {e}")),
        }
    }

    let elapsed = start.elapsed();
    check(
        elapsed < Duration::from_secs(10),
        format!(
            "metric oracles: {fixtures} fixtures each for jaccard, iou, citation overlap ({co_checked}) and topic similarity ({ts_checked}) at 1e-12 in {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

// ---------- criteria 2, 6, 7, 10 share the synthetic corpus ----------

struct CorpusRun {
    semantic: BTreeMap<String, Vec<f64>>,
    kge: BTreeMap<String, Vec<f64>>,
    kge_no_cites: BTreeMap<String, Vec<f64>>,
    topics: BTreeMap<String, TopicVector>,
    cites: BTreeMap<String, BTreeSet<String>>,
    paper_ids: Vec<String>,
}

fn corpus_kge_config(include: BTreeSet<Relation>) -> KgeConfig {
    KgeConfig {
        dim: 32,
        learning_rate: 50.0,
        batch_size: 128,
        negatives_per_positive: 8,
        epochs: 100,
        seed: 3,
        include_relations: include,
        ..KgeConfig::default()
    }
}

fn corpus_run() -> Result<CorpusRun, String> {
    let corpus: Corpus = synthetic_corpus(&SyntheticCorpusConfig::default());
    let ingest = IngestConfig::default();
    let curated = curate(&corpus, &ingest, &CurationConfig::default()).map_err(|e| e.to_string())?;
    let graph = build_graph(&curated.graph).map_err(|e| e.to_string())?;
    let all: BTreeSet<Relation> = Relation::ALL.into_iter().collect();
    let no_cites: BTreeSet<Relation> = all.iter().copied().filter(|&r| r != Relation::Cites).collect();
    let kge_vectors = |include| -> Result<BTreeMap<String, Vec<f64>>, String> {
        let out = train_graph(&graph, &corpus_kge_config(include)).map_err(|e| e.to_string())?;
        paper_vectors(&graph, &out.model).map_err(|e| e.to_string())
    };
    let (embeddings, _) =
        embed_corpus_fallback(&corpus, &SemanticConfig::default()).map_err(|e| e.to_string())?;
    Ok(CorpusRun {
        semantic: embeddings.into_iter().map(|e| (e.paper_id, e.vector)).collect(),
        kge: kge_vectors(all)?,
        kge_no_cites: kge_vectors(no_cites)?,
        topics: topic_vectors(&graph, &ingest.topic_vocabulary),
        cites: citation_map(&graph),
        paper_ids: corpus.papers.iter().map(|p| p.paper_id.clone()).collect(),
    })
}

fn top5(vectors: &BTreeMap<String, Vec<f64>>) -> Result<Lists, String> {
    SimilarityIndex::new(vectors.clone())
        .and_then(|i| i.batch_top_k(5))
        .map_err(|e| e.to_string())
}

fn combined_vectors(run: &CorpusRun, weights: Weights) -> Result<BTreeMap<String, Vec<f64>>, String> {
    Ok(combine_all(&run.semantic, &run.kge, weights)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|c| (c.paper_id, c.vector))
        .collect())
}

fn method_lists(run: &CorpusRun) -> Result<Vec<(String, Lists)>, String> {
    let random = random_recommendations(&run.paper_ids, 5, derive_seed(7, "random"))
        .map_err(|e| e.to_string())?;
    Ok(vec![
        ("random".to_string(), random),
        ("semantic".to_string(), top5(&run.semantic)?),
        ("kge".to_string(), top5(&run.kge)?),
        ("combined".to_string(), top5(&combined_vectors(run, Weights::default())?)?),
        ("kge_excl_cites".to_string(), top5(&run.kge_no_cites)?),
    ])
}

fn criterion_2(methods: &[(String, Lists)]) -> Outcome {
    let matrix = iou_matrix(methods).map_err(|e| e.to_string())?;
    let diagonal: Vec<f64> = (0..methods.len()).map(|i| matrix[i][i]).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut random_ok = true;
    for _ in 0..200 {
        let papers = ids("q", rng.gen_range(2..40));
        let lists = random_lists(&mut rng, &papers, &papers, 8);
        random_ok &= recommendation_iou("x", &lists, "x", &lists).map(|r| r.value).ok() == Some(1.0);
    }
    check(
        diagonal.iter().all(|&d| d == 1.0) && random_ok,
        format!("IoU diagonal {diagonal:?} over {} methods plus 200 random list sets", methods.len()),
    )
}

fn criterion_6(run: &CorpusRun, methods: &[(String, Lists)]) -> Outcome {
    let ts = |name: &str| -> Result<f64, String> {
        let lists = &methods.iter().find(|m| m.0 == name).expect("method").1;
        corpus_topic_similarity(name, lists, &run.topics, JaccardForm::Standard)
            .map(|r| r.value)
            .map_err(|e| e.to_string())
    };
    let (random, semantic, kge, combined) = (ts("random")?, ts("semantic")?, ts("kge")?, ts("combined")?);
    check(
        random > semantic && random > kge && combined <= semantic.min(kge) + 0.02,
        format!("TS random {random:.3}, semantic {semantic:.3}, kge {kge:.3}, combined {combined:.3}"),
    )
}

fn criterion_7(run: &CorpusRun, methods: &[(String, Lists)]) -> Outcome {
    let co = |name: &str| -> Result<f64, String> {
        let lists = &methods.iter().find(|m| m.0 == name).expect("method").1;
        citation_overlap(name, lists, &run.cites, 5)
            .map(|r| r.value)
            .map_err(|e| e.to_string())
    };
    let (with, without) = (co("kge")?, co("kge_excl_cites")?);
    check(
        with > without,
        format!("top-5 citation overlap: KGE with cites {with:.2}%, without cites {without:.2}%"),
    )
}

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (a.iter().map(|x| x * x).sum::<f64>().sqrt() * b.iter().map(|x| x * x).sum::<f64>().sqrt())
}

fn criterion_10(run: &CorpusRun) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let (ds, dk) = (rng.gen_range(2..20), rng.gen_range(2..20));
        let draw = |rng: &mut ChaCha8Rng, d: usize| -> Vec<f64> { (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect() };
        let (s1, s2, k1, k2) = (draw(&mut rng, ds), draw(&mut rng, ds), draw(&mut rng, dk), draw(&mut rng, dk));
        let w = Weights {
            semantic: rng.gen_range(0.0..3.0),
            kge: rng.gen_range(0.01..3.0),
        };
        let c1 = combine("a", Some(&s1), Some(&k1), ds, dk, w).map_err(|e| e.to_string())?;
        let c2 = combine("b", Some(&s2), Some(&k2), ds, dk, w).map_err(|e| e.to_string())?;
        let (a2, b2) = (w.semantic * w.semantic, w.kge * w.kge);
        let expected = (a2 * cosine(&unit(&s1), &unit(&s2)) + b2 * cosine(&unit(&k1), &unit(&k2))) / (a2 + b2);
        worst = worst.max((cosine(&c1.vector, &c2.vector) - expected).abs());
    }
    if worst > 1e-12 {
        return Err(format!("combined cosine off by {worst:e}"));
    }
    let ranking = |lists: &Lists| -> Vec<(String, Vec<String>)> {
        lists.iter().map(|(s, l)| (s.clone(), l.ids().map(str::to_string).collect())).collect()
    };
    let sem_only = top5(&combined_vectors(run, Weights { semantic: 1.0, kge: 0.0 })?)?;
    let kge_only = top5(&combined_vectors(run, Weights { semantic: 0.0, kge: 1.0 })?)?;
    check(
        ranking(&sem_only) == ranking(&top5(&run.semantic)?) && ranking(&kge_only) == ranking(&top5(&run.kge)?),
        format!("combination identity over 1000 pairs (max error {worst:.1e}); weights (1,0) and (0,1) reproduce semantic and KGE top-5 for {} papers", run.paper_ids.len()),
    )
}

// ---------- criterion 3 ----------

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let gamma = 12.0;
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let d = rng.gen_range(1..=16);
        let mut draw = || -> Vec<f64> { (0..d).map(|_| rng.gen_range(-3.0..3.0)).collect() };
        let (h, r, t) = (draw(), draw(), draw());
        let y = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let (_, grad_h) = loss_and_gradient(&h, &r, &t, gamma, y);
        let loss = |h: &[f64], r: &[f64], t: &[f64]| loss_term(score_vectors(h, r, t, gamma), y);
        for arg in 0..3 {
            for i in 0..d {
                let mut plus = [h.clone(), r.clone(), t.clone()];
                let mut minus = plus.clone();
                plus[arg][i] += eps;
                minus[arg][i] -= eps;
                let numeric = (loss(&plus[0], &plus[1], &plus[2]) - loss(&minus[0], &minus[1], &minus[2])) / (2.0 * eps);
                // gradient wrt t is the negated gradient wrt h (and r)
                let analytic = if arg == 2 { -grad_h[i] } else { grad_h[i] };
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-8);
                worst = worst.max(rel);
            }
        }
    }
    let mut exact = true;
    for _ in 0..100 {
        let h: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let r: Vec<f64> = (0..8).map(|_| rng.gen_range(-3.0..3.0)).collect();
        let t: Vec<f64> = h.iter().zip(&r).map(|(a, b)| a + b).collect();
        exact &= score_vectors(&h, &r, &t, gamma) == gamma;
    }
    check(
        worst <= 1e-4 && exact,
        format!("gradient vs central differences over 100 draws, max relative error {worst:.2e}; score(h, r, h+r) = gamma: {exact}"),
    )
}

// ---------- criteria 4, 5 ----------

fn kg_config(epochs: usize) -> KgeConfig {
    KgeConfig {
        dim: 32,
        learning_rate: 50.0,
        batch_size: 128,
        negatives_per_positive: 8,
        epochs,
        seed: 1,
        workers: 1,
        ..KgeConfig::default()
    }
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let kg = synthetic_kg(&SyntheticKgConfig::default());
    let out = train(&kg.train_dataset(), &kg_config(200)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let n = kg.dataset.num_entities as u32;
    let mut pos = Vec::new();
    let mut neg = Vec::new();
    for &t in &kg.test {
        pos.push(score_triplet(&out.model, t).map_err(|e| e.to_string())?);
        let e = rng.gen_range(0..n);
        let c = if rng.gen_bool(0.5) { IdTriplet { head: e, ..t } } else { IdTriplet { tail: e, ..t } };
        neg.push(score_triplet(&out.model, c).map_err(|e| e.to_string())?);
    }
    let gap = mean(&pos) - mean(&neg);
    let known: HashSet<IdTriplet> = kg.dataset.triplets.iter().copied().collect();
    let lp = link_prediction(&out.model, &kg.test, &known);
    let elapsed = start.elapsed();
    check(
        gap >= 2.0 && lp.mrr >= 5.0 * lp.random_mrr && elapsed < Duration::from_secs(120),
        format!(
            "synthetic KG, 200 epochs: score gap {gap:.2}, filtered MRR {:.4} vs random {:.4} ({:.1}x) in {:.1}s",
            lp.mrr,
            lp.random_mrr,
            lp.mrr / lp.random_mrr,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_5() -> Outcome {
    let kg = synthetic_kg(&SyntheticKgConfig::default());
    let result = kfold_validate(&kg.dataset, &kg_config(200), 10).map_err(|e| e.to_string())?;
    let mut seen: BTreeMap<IdTriplet, Vec<usize>> = BTreeMap::new();
    for s in &result.scores {
        seen.entry(s.triplet).or_default().push(s.fold);
    }
    let all: BTreeSet<IdTriplet> = kg.dataset.triplets.iter().copied().collect();
    let partition = seen.len() == all.len()
        && seen.keys().all(|t| all.contains(t))
        && seen.values().all(|f| f.len() == 1 && f[0] < 10)
        && result.scores.len() == all.len();
    let summaries = result.relation_summaries();
    let separated = summaries.len() == kg.dataset.num_relations
        && summaries.iter().all(|s| s.mean_positive > s.mean_corrupted);
    let detail: Vec<String> = summaries
        .iter()
        .map(|s| format!("r{} {:.2}>{:.2}", s.relation, s.mean_positive, s.mean_corrupted))
        .collect();
    check(
        partition && separated,
        format!("10 folds partition {} triplets: {partition}; per-relation means {}", all.len(), detail.join(", ")),
    )
}

// ---------- criterion 8 ----------

fn random_graph(rng: &mut ChaCha8Rng) -> PropertyGraph {
    let papers = rng.gen_range(1..=350);
    let authors = rng.gen_range(0..=150);
    let density = rng.gen_range(0.2..2.0);
    let paper = |i: usize| EntityRecord {
        key: format!("p{i}"),
        attributes: EntityAttributes::Paper {
            title: format!("paper {i}"),
            pub_date: None,
            journal: None,
            doi: None,
        },
    };
    let author = |i: usize| EntityRecord {
        key: format!("a{i}"),
        attributes: EntityAttributes::Author {
            display_name: format!("author {i}"),
        },
    };
    let mut edges = BTreeSet::new();
    for _ in 0..(density * papers as f64) as usize {
        let (a, b) = (rng.gen_range(0..papers), rng.gen_range(0..papers));
        if a != b {
            edges.insert((Relation::Cites, format!("p{a}"), format!("p{b}")));
        }
    }
    if authors > 0 {
        for _ in 0..(density * authors as f64) as usize {
            let (p, a) = (rng.gen_range(0..papers), rng.gen_range(0..authors));
            edges.insert((Relation::AuthoredBy, format!("p{p}"), format!("a{a}")));
        }
    }
    let triplets = edges
        .into_iter()
        .map(|(relation, h, t)| {
            let (hk, tk) = relation.signature();
            TripletRecord {
                head: EntityRef::new(hk, h),
                relation,
                tail: EntityRef::new(tk, t),
                weight: None,
            }
        })
        .collect();
    build_graph(&GraphInput {
        entities: (0..papers).map(paper).chain((0..authors).map(author)).collect(),
        triplets,
    })
    .expect("valid random graph")
}

fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; adj.len()];
    dist[s] = Some(0);
    let mut queue = VecDeque::from([s]);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(dist[u].unwrap() + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    for g in 0..50 {
        let graph = random_graph(&mut rng);
        let n = graph.num_entities();
        let mut adj = vec![Vec::new(); n];
        for t in graph.triplets() {
            adj[t.head.index()].push(t.tail.index());
            adj[t.tail.index()].push(t.head.index());
        }
        let mut component = vec![usize::MAX; n];
        let mut members: Vec<Vec<usize>> = Vec::new();
        for s in 0..n {
            if component[s] == usize::MAX {
                let reach: Vec<usize> = bfs(&adj, s).iter().enumerate().filter(|(_, d)| d.is_some()).map(|(i, _)| i).collect();
                for &v in &reach {
                    component[v] = members.len();
                }
                members.push(reach);
            }
        }
        let largest = members
            .iter()
            .max_by(|a, b| a.len().cmp(&b.len()).then(b[0].cmp(&a[0])))
            .expect("non-empty graph");
        let diameter = largest
            .iter()
            .map(|&s| bfs(&adj, s).into_iter().flatten().max().unwrap_or(0))
            .max()
            .unwrap_or(0);
        let components = connected_components(&graph).count();
        let got_diameter = largest_cc_diameter(&graph);
        if components != members.len() || got_diameter != diameter {
            return Err(format!(
                "graph {g} ({n} nodes): components {components} vs {}, diameter {got_diameter} vs {diameter}",
                members.len()
            ));
        }
        let hist = degree_distribution(&graph, &BTreeSet::new());
        let mass: usize = hist.iter().map(|(d, c)| d * c).sum();
        if mass != 2 * graph.num_triplets() || hist.values().sum::<usize>() != n {
            return Err(format!("graph {g}: degree mass {mass} vs 2|E| = {}", 2 * graph.num_triplets()));
        }
    }
    Ok("50 random graphs up to 500 nodes: components, largest-component diameter and degree mass match the BFS oracle".to_string())
}

// ---------- criterion 9 ----------

fn criterion_9() -> Outcome {
    let (n, d) = (200, 50);
    let mut rng = ChaCha8Rng::seed_from_u64(909);
    let basis: Vec<Vec<f64>> = (0..2).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
    let offset: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let (a, b) = (rng.gen_range(-3.0..3.0), rng.gen_range(-1.0..1.0));
            (0..d).map(|j| offset[j] + a * basis[0][j] + b * basis[1][j]).collect()
        })
        .collect();
    let p = truncated_svd_2d(&rows, 9).map_err(|e| e.to_string())?;
    let recon = p.reconstruct();
    let error = rows
        .iter()
        .zip(&recon)
        .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)))
        .sum::<f64>()
        .sqrt();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let ortho = [
        (dot(&p.axes[0], &p.axes[0]) - 1.0).abs(),
        (dot(&p.axes[1], &p.axes[1]) - 1.0).abs(),
        dot(&p.axes[0], &p.axes[1]).abs(),
    ]
    .into_iter()
    .fold(0.0f64, f64::max);
    check(
        error < 1e-8 && ortho <= 1e-10,
        format!("SVD n={n} d={d}: Frobenius reconstruction error {error:.2e}, axis orthonormality error {ortho:.2e}"),
    )
}

// ---------- criterion 11 ----------

fn fixture_corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).expect("readable work dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let bytes = fs::read(&path).expect("readable output");
                out.insert(path.strip_prefix(dir).expect("inside").to_path_buf(), bytes);
            }
        }
    }
    out
}

fn criterion_11() -> Outcome {
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let run = || -> Result<BTreeMap<PathBuf, Vec<u8>>, String> {
        let status = Command::new(env!("CARGO_BIN_EXE_ckg"))
            .args(["pipeline", "--seed", "7", "--workers", "1", "--corpus-dir"])
            .arg(fixture_corpus())
            .arg("--work-dir")
            .arg(work.path())
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("pipeline failed: {}", String::from_utf8_lossy(&status.stderr)));
        }
        Ok(snapshot(work.path()))
    };
    let first = run()?;
    let second = run()?;
    let differing: Vec<String> = first
        .keys()
        .chain(second.keys())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .filter(|k| first.get(*k) != second.get(*k))
        .map(|k| k.display().to_string())
        .collect();
    check(
        differing.is_empty() && !first.is_empty(),
        format!("pipeline --seed 7 --workers 1 twice: {} files, differing: {differing:?}", first.len()),
    )
}

fn main() {
    let started = Instant::now();
    let mut results: Vec<(u32, Outcome)> = Vec::new();
    let mut record = |n: u32, f: &mut dyn FnMut() -> Outcome| {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".to_string()))
        });
        match &outcome {
            Ok(m) => println!("PASS criterion {n}: {m}"),
            Err(m) => println!("FAIL criterion {n}: {m}"),
        }
        results.push((n, outcome));
    };

    record(1, &mut criterion_1);
    let run = corpus_run();
    let methods = run.as_ref().map_err(Clone::clone).and_then(method_lists);
    record(2, &mut || criterion_2(methods.as_ref().map_err(Clone::clone)?));
    record(3, &mut criterion_3);
    record(4, &mut criterion_4);
    record(5, &mut criterion_5);
    record(6, &mut || {
        criterion_6(run.as_ref().map_err(Clone::clone)?, methods.as_ref().map_err(Clone::clone)?)
    });
    record(7, &mut || {
        criterion_7(run.as_ref().map_err(Clone::clone)?, methods.as_ref().map_err(Clone::clone)?)
    });
    record(8, &mut criterion_8);
    record(9, &mut criterion_9);
    record(10, &mut || criterion_10(run.as_ref().map_err(Clone::clone)?));
    record(11, &mut criterion_11);

    let failed: Vec<u32> = results.iter().filter(|r| r.1.is_err()).map(|r| r.0).collect();
    println!(
        "acceptance: {} passed, {} failed in {:.1}s",
        results.len() - failed.len(),
        failed.len(),
        started.elapsed().as_secs_f64()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
