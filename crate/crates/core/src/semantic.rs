//! Semantic document vectors: sentence vectors are averaged per section and
//! the available section means are averaged into one document vector.
//!
//! Sentence vectors come from an external encoder (CSV input) or from the
//! built-in signed feature-hashing encoder.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{read_csv_maps, write_csv, Corpus, Section};
use crate::numeric::{fnv1a64, l2_normalized, dot, pairwise_sum};

pub const DOCUMENT_VECTORS_FILE: &str = "semantic_vectors.csv";
pub const SENTENCE_VECTORS_FILE: &str = "sentence_vectors.csv";
pub const DOCUMENT_EMBEDDINGS_FILE: &str = "document_embeddings.csv";

/// Above this many vectors the mean pairwise cosine is estimated from a
/// seeded sample of pairs.
pub const EXACT_PAIRWISE_LIMIT: usize = 5_000;
pub const SAMPLED_PAIRS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SemanticSource {
    ExternalVectors,
    FallbackHashing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticConfig {
    pub dim: usize,
    pub source: SemanticSource,
    pub sections_used: BTreeSet<Section>,
}

impl Default for SemanticConfig {
    fn default() -> Self {
        Self {
            dim: 768,
            source: SemanticSource::FallbackHashing,
            sections_used: Section::ALL.into_iter().collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentEmbedding {
    pub paper_id: String,
    pub vector: Vec<f64>,
    pub sections_present: BTreeSet<Section>,
    /// Per-section mean sentence vectors, when sentence-level input was used.
    #[serde(skip)]
    pub section_means: BTreeMap<Section, Vec<f64>>,
}

/// Splits after `.`, `!` or `?` when followed by whitespace and then an
/// uppercase letter or a digit.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if matches!(c, '.' | '!' | '?') {
            let mut j = i + 1;
            while j < chars.len() && chars[j].1.is_whitespace() {
                j += 1;
            }
            let has_space = j > i + 1;
            if has_space && j < chars.len() && (chars[j].1.is_uppercase() || chars[j].1.is_ascii_digit()) {
                let end = pos + c.len_utf8();
                let s = text[start..end].trim();
                if !s.is_empty() {
                    out.push(s.to_string());
                }
                start = chars[j].0;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let rest = text[start..].trim();
    if !rest.is_empty() {
        out.push(rest.to_string());
    }
    out
}

/// Signed feature hashing: each lowercase alphanumeric token adds `+-1` at
/// `fnv1a64(token) mod dim` (sign from bit 63); the sum is L2-normalized.
pub fn fallback_encode(sentence: &str, dim: usize) -> Vec<f64> {
    assert!(dim >= 1, "dim must be at least 1");
    let mut v = vec![0.0; dim];
    for token in sentence
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        let token = token.to_lowercase();
        let h = fnv1a64(token.as_bytes());
        let sign = if h >> 63 == 1 { -1.0 } else { 1.0 };
        v[(h % dim as u64) as usize] += sign;
    }
    l2_normalized(&v).unwrap_or(v)
}

fn mean_vector(vectors: &[Vec<f64>]) -> Vec<f64> {
    let dim = vectors[0].len();
    let n = vectors.len() as f64;
    (0..dim)
        .map(|d| {
            let column: Vec<f64> = vectors.iter().map(|v| v[d]).collect();
            pairwise_sum(&column) / n
        })
        .collect()
}

/// Mean of the per-section means of the sections that have sentences.
pub fn document_vector(
    paper_id: &str,
    sections: &BTreeMap<Section, Vec<Vec<f64>>>,
) -> Result<DocumentEmbedding> {
    let mut section_means = BTreeMap::new();
    let mut dim = None;
    for (&section, vectors) in sections {
        if vectors.is_empty() {
            continue;
        }
        for v in vectors {
            let expected = *dim.get_or_insert(v.len());
            if v.len() != expected {
                return Err(Error::DimensionMismatch {
                    expected,
                    actual: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::EmptyInput(format!(
                    "paper {paper_id:?}: non-finite sentence vector"
                )));
            }
        }
        section_means.insert(section, mean_vector(vectors));
    }
    if section_means.is_empty() {
        return Err(Error::EmptyInput(format!(
            "paper {paper_id:?} has no sentence vectors in any section"
        )));
    }
    let means: Vec<Vec<f64>> = section_means.values().cloned().collect();
    Ok(DocumentEmbedding {
        paper_id: paper_id.to_string(),
        vector: mean_vector(&means),
        sections_present: section_means.keys().copied().collect(),
        section_means,
    })
}

/// Section texts per paper: title from `sections.jsonl` when present,
/// otherwise the paper record title; abstract and body from
/// `sections.jsonl`. Blank texts are skipped.
fn section_texts(corpus: &Corpus) -> BTreeMap<&str, BTreeMap<Section, &str>> {
    let mut out: BTreeMap<&str, BTreeMap<Section, &str>> = BTreeMap::new();
    for p in &corpus.papers {
        out.entry(&p.paper_id).or_default().insert(Section::Title, &p.title);
    }
    for s in &corpus.sections {
        if let Some(entry) = out.get_mut(s.paper_id.as_str()) {
            if !s.text.trim().is_empty() {
                entry.insert(s.section, &s.text);
            }
        }
    }
    out
}

/// Document embeddings for every paper using the hashing encoder. Papers with
/// no usable section under `config.sections_used` are returned in the second
/// list.
pub fn embed_corpus_fallback(
    corpus: &Corpus,
    config: &SemanticConfig,
) -> Result<(Vec<DocumentEmbedding>, Vec<String>)> {
    if config.dim == 0 {
        return Err(Error::Config("semantic dim must be at least 1".to_string()));
    }
    let texts = section_texts(corpus);
    let results: Vec<(String, Option<DocumentEmbedding>)> = texts
        .par_iter()
        .map(|(&paper_id, sections)| {
            let encoded: BTreeMap<Section, Vec<Vec<f64>>> = sections
                .iter()
                .filter(|(s, _)| config.sections_used.contains(s))
                .map(|(&s, text)| {
                    let vectors = split_sentences(text)
                        .iter()
                        .map(|sentence| fallback_encode(sentence, config.dim))
                        .collect();
                    (s, vectors)
                })
                .collect();
            (paper_id.to_string(), document_vector(paper_id, &encoded).ok())
        })
        .collect();
    let mut embeddings = Vec::new();
    let mut skipped = Vec::new();
    for (id, e) in results {
        match e {
            Some(e) => embeddings.push(e),
            None => skipped.push(id),
        }
    }
    Ok((embeddings, skipped))
}

fn parse_vector(
    row: &BTreeMap<String, String>,
    file: &str,
    line: u64,
) -> Result<Vec<f64>> {
    let mut v = Vec::new();
    for d in 0.. {
        let Some(raw) = row.get(&format!("v{d}")) else {
            break;
        };
        let x: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Error::malformed(file, line, format!("v{d}: {raw:?} is not a number")))?;
        if !x.is_finite() {
            return Err(Error::malformed(file, line, format!("v{d} is not finite")));
        }
        v.push(x);
    }
    if v.is_empty() {
        return Err(Error::malformed(file, line, "no v0.. columns"));
    }
    Ok(v)
}

/// Reads `semantic_vectors.csv` (paper_id, v0..). Sections present are taken
/// from the corpus.
pub fn read_document_vectors(path: &Path, corpus: &Corpus) -> Result<Vec<DocumentEmbedding>> {
    let file = DOCUMENT_VECTORS_FILE;
    let texts = section_texts(corpus);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (i, row) in read_csv_maps(path)?.into_iter().enumerate() {
        let line = i as u64 + 2;
        let paper_id = row.get("paper_id").cloned().unwrap_or_default();
        if paper_id.is_empty() {
            return Err(Error::malformed(file, line, "empty paper_id"));
        }
        if !seen.insert(paper_id.clone()) {
            return Err(Error::malformed(file, line, format!("duplicate paper_id {paper_id:?}")));
        }
        let vector = parse_vector(&row, file, line)?;
        if let Some(first) = out.first().map(|e: &DocumentEmbedding| e.vector.len()) {
            if first != vector.len() {
                return Err(Error::DimensionMismatch {
                    expected: first,
                    actual: vector.len(),
                });
            }
        }
        let sections_present = texts
            .get(paper_id.as_str())
            .map(|s| s.keys().copied().collect())
            .unwrap_or_else(|| BTreeSet::from([Section::Title]));
        out.push(DocumentEmbedding {
            paper_id,
            vector,
            sections_present,
            section_means: BTreeMap::new(),
        });
    }
    out.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
    Ok(out)
}

/// Reads `sentence_vectors.csv` (paper_id, section, sentence_index, v0..) and
/// averages it into document embeddings.
pub fn embed_from_sentence_vectors(
    path: &Path,
    config: &SemanticConfig,
) -> Result<Vec<DocumentEmbedding>> {
    let file = SENTENCE_VECTORS_FILE;
    let mut grouped: BTreeMap<String, BTreeMap<Section, BTreeMap<u64, Vec<f64>>>> = BTreeMap::new();
    for (i, row) in read_csv_maps(path)?.into_iter().enumerate() {
        let line = i as u64 + 2;
        let paper_id = row.get("paper_id").cloned().unwrap_or_default();
        let section = row
            .get("section")
            .and_then(|s| Section::parse(s))
            .ok_or_else(|| Error::malformed(file, line, "bad section"))?;
        let index: u64 = row
            .get("sentence_index")
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::malformed(file, line, "bad sentence_index"))?;
        let vector = parse_vector(&row, file, line)?;
        let slot = grouped.entry(paper_id.clone()).or_default().entry(section).or_default();
        if slot.insert(index, vector).is_some() {
            return Err(Error::malformed(
                file,
                line,
                format!("duplicate sentence {index} in {section} of {paper_id:?}"),
            ));
        }
    }
    grouped
        .into_iter()
        .map(|(paper_id, sections)| {
            let sections: BTreeMap<Section, Vec<Vec<f64>>> = sections
                .into_iter()
                .filter(|(s, _)| config.sections_used.contains(s))
                .map(|(s, v)| (s, v.into_values().collect()))
                .collect();
            document_vector(&paper_id, &sections)
        })
        .collect()
}

fn flags(sections: &BTreeSet<Section>) -> String {
    sections
        .iter()
        .map(|s| s.flag().to_string())
        .collect::<Vec<_>>()
        .join("|")
}

fn parse_flags(s: &str) -> Option<BTreeSet<Section>> {
    s.split('|')
        .filter(|f| !f.is_empty())
        .map(|f| Section::ALL.into_iter().find(|s| s.flag().to_string() == f))
        .collect()
}

pub fn write_document_embeddings(
    embeddings: &[DocumentEmbedding],
    dir: &Path,
    header: &[String],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let dim = embeddings.first().map_or(0, |e| e.vector.len());
    let mut columns = vec!["paper_id".to_string(), "sections_present".to_string()];
    columns.extend((0..dim).map(|i| format!("v{i}")));
    let columns: Vec<&str> = columns.iter().map(String::as_str).collect();
    write_csv(
        dir,
        DOCUMENT_EMBEDDINGS_FILE,
        header,
        &columns,
        embeddings.iter().map(|e| {
            let mut row = vec![e.paper_id.clone(), flags(&e.sections_present)];
            row.extend(e.vector.iter().map(|v| v.to_string()));
            row
        }),
    )
}

pub fn read_document_embeddings(path: &Path) -> Result<Vec<DocumentEmbedding>> {
    let file = DOCUMENT_EMBEDDINGS_FILE;
    read_csv_maps(path)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| {
            let line = i as u64 + 2;
            Ok(DocumentEmbedding {
                paper_id: row.get("paper_id").cloned().unwrap_or_default(),
                sections_present: row
                    .get("sections_present")
                    .and_then(|s| parse_flags(s))
                    .ok_or_else(|| Error::malformed(file, line, "bad sections_present"))?,
                vector: parse_vector(&row, file, line)?,
                section_means: BTreeMap::new(),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticsRow {
    /// `title`, `abstract`, `body` or `combined`.
    pub portion: String,
    /// Mean pairwise cosine similarity; absent with fewer than two vectors.
    pub mean_cosine: Option<f64>,
    /// Fraction of corpus papers with this portion present.
    pub coverage: f64,
    pub papers: usize,
    pub exact: bool,
}

/// Mean cosine similarity over all unordered pairs (exact up to
/// [`EXACT_PAIRWISE_LIMIT`] vectors, otherwise over [`SAMPLED_PAIRS`] seeded
/// random pairs). Zero vectors have cosine 0 with everything.
pub fn mean_pairwise_cosine(vectors: &[&[f64]], seed: u64) -> Option<(f64, bool)> {
    let n = vectors.len();
    if n < 2 {
        return None;
    }
    let units: Vec<Vec<f64>> = vectors
        .iter()
        .map(|v| l2_normalized(v).unwrap_or_else(|| vec![0.0; v.len()]))
        .collect();
    if n <= EXACT_PAIRWISE_LIMIT {
        let row_sums: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let sims: Vec<f64> = ((i + 1)..n).map(|j| dot(&units[i], &units[j])).collect();
                pairwise_sum(&sims)
            })
            .collect();
        let pairs = (n * (n - 1) / 2) as f64;
        Some((pairwise_sum(&row_sums) / pairs, true))
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pairs: Vec<(usize, usize)> = (0..SAMPLED_PAIRS)
            .map(|_| {
                let i = rng.gen_range(0..n);
                let mut j = rng.gen_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect();
        let sims: Vec<f64> = pairs.par_iter().map(|&(i, j)| dot(&units[i], &units[j])).collect();
        Some((pairwise_sum(&sims) / sims.len() as f64, false))
    }
}

/// Coverage and mean pairwise cosine per section and for the combined
/// document vectors, over a corpus of `n_papers` papers.
pub fn corpus_semantics_report(
    n_papers: usize,
    embeddings: &[DocumentEmbedding],
    seed: u64,
) -> Vec<SemanticsRow> {
    let total = n_papers.max(1) as f64;
    let mut rows = Vec::new();
    for section in Section::ALL {
        let present = embeddings
            .iter()
            .filter(|e| e.sections_present.contains(&section))
            .count();
        let vectors: Vec<&[f64]> = embeddings
            .iter()
            .filter_map(|e| e.section_means.get(&section).map(Vec::as_slice))
            .collect();
        let cos = mean_pairwise_cosine(&vectors, seed);
        rows.push(SemanticsRow {
            portion: section.to_string(),
            mean_cosine: cos.map(|c| c.0),
            coverage: present as f64 / total,
            papers: present,
            exact: cos.is_none_or(|c| c.1),
        });
    }
    let vectors: Vec<&[f64]> = embeddings.iter().map(|e| e.vector.as_slice()).collect();
    let cos = mean_pairwise_cosine(&vectors, seed);
    rows.push(SemanticsRow {
        portion: "combined".to_string(),
        mean_cosine: cos.map(|c| c.0),
        coverage: embeddings.len() as f64 / total,
        papers: embeddings.len(),
        exact: cos.is_none_or(|c| c.1),
    });
    rows
}

/// Lookup by paper id.
pub fn by_paper(embeddings: &[DocumentEmbedding]) -> HashMap<&str, &DocumentEmbedding> {
    embeddings.iter().map(|e| (e.paper_id.as_str(), e)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::cosine;

    #[test]
    fn sentence_split_examples() {
        assert_eq!(split_sentences("A b. C d."), vec!["A b.", "C d."]);
        assert_eq!(split_sentences("no terminator"), vec!["no terminator"]);
        assert!(split_sentences("").is_empty());
        assert_eq!(split_sentences("e.g. this stays. 2 items!  Ok?"), vec!["e.g. this stays.", "2 items!", "Ok?"]);
        assert_eq!(split_sentences("Dose was 2.5 mg. Next"), vec!["Dose was 2.5 mg.", "Next"]);
    }

    #[test]
    fn fallback_encoder_properties() {
        let a = fallback_encode("Viral load in ICU patients", 64);
        assert_eq!(a, fallback_encode("Viral load in ICU patients", 64));
        assert!((crate::numeric::norm(&a) - 1.0).abs() < 1e-12);
        assert!(fallback_encode("", 16).iter().all(|&v| v == 0.0));
        assert!(fallback_encode("... ,,", 16).iter().all(|&v| v == 0.0));
        assert_eq!(fallback_encode("Viral LOAD", 64), fallback_encode("viral load", 64));
    }

    #[test]
    fn disjoint_sentences_are_near_orthogonal() {
        let dim = 1 << 16;
        let a = fallback_encode("remdesivir trial outcomes hospitalized adults", dim);
        let b = fallback_encode("influenza vaccine coverage among children", dim);
        assert!(cosine(&a, &b).abs() < 0.05);
    }

    #[test]
    fn document_vector_examples() {
        let single = BTreeMap::from([(Section::Title, vec![vec![0.3, 0.4]])]);
        assert_eq!(document_vector("p", &single).unwrap().vector, vec![0.3, 0.4]);

        let two = BTreeMap::from([
            (Section::Title, vec![vec![1.0, 0.0]]),
            (Section::Body, vec![vec![0.0, 2.0], vec![0.0, 0.0]]),
            (Section::Abstract, vec![]),
        ]);
        let d = document_vector("p", &two).unwrap();
        assert_eq!(d.vector, vec![0.5, 0.5]);
        assert_eq!(d.sections_present, BTreeSet::from([Section::Title, Section::Body]));

        let three = BTreeMap::from([
            (Section::Title, vec![vec![3.0]]),
            (Section::Abstract, vec![vec![6.0]]),
            (Section::Body, vec![vec![9.0]]),
        ]);
        assert_eq!(document_vector("p", &three).unwrap().vector, vec![6.0]);

        let empty: BTreeMap<Section, Vec<Vec<f64>>> = BTreeMap::from([(Section::Title, vec![])]);
        assert!(document_vector("p", &empty).is_err());
        let ragged = BTreeMap::from([(Section::Title, vec![vec![1.0], vec![1.0, 2.0]])]);
        assert!(document_vector("p", &ragged).is_err());
    }

    fn emb(id: &str, v: Vec<f64>, sections: &[Section]) -> DocumentEmbedding {
        DocumentEmbedding {
            paper_id: id.to_string(),
            section_means: sections.iter().map(|&s| (s, v.clone())).collect(),
            vector: v,
            sections_present: sections.iter().copied().collect(),
        }
    }

    #[test]
    fn report_coverage_and_identical_docs() {
        let docs = vec![
            emb("a", vec![1.0, 2.0], &[Section::Title, Section::Abstract]),
            emb("b", vec![1.0, 2.0], &[Section::Title, Section::Abstract]),
            emb("c", vec![1.0, 2.0], &[Section::Title]),
        ];
        let rows = corpus_semantics_report(3, &docs[..2], 1);
        assert!((rows[3].mean_cosine.unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(rows[3].coverage * 3.0, 2.0);
        let rows = corpus_semantics_report(3, &docs, 1);
        assert!((rows[1].coverage - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(rows[0].coverage, 1.0);
        assert_eq!(rows[2].mean_cosine, None);
    }

    #[test]
    fn sampled_mean_is_close_to_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let vs: Vec<Vec<f64>> = (0..EXACT_PAIRWISE_LIMIT + 1)
            .map(|_| (0..4).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let refs: Vec<&[f64]> = vs.iter().map(Vec::as_slice).collect();
        let (sampled, exact) = mean_pairwise_cosine(&refs, 9).unwrap();
        assert!(!exact);
        let (full, _) = mean_pairwise_cosine(&refs[..EXACT_PAIRWISE_LIMIT], 9).unwrap();
        assert!((sampled - full).abs() < 0.01);
    }

    #[test]
    fn embeddings_file_round_trip() {
        let docs = vec![emb("a", vec![0.1, -2.5], &[Section::Title, Section::Body])];
        let dir = tempfile::tempdir().unwrap();
        write_document_embeddings(&docs, dir.path(), &[]).unwrap();
        let back = read_document_embeddings(&dir.path().join(DOCUMENT_EMBEDDINGS_FILE)).unwrap();
        assert_eq!(back[0].vector, docs[0].vector);
        assert_eq!(back[0].sections_present, docs[0].sections_present);
    }
}
