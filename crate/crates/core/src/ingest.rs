//! Corpus loading from flat CSV / JSONL exports.
//!
//! A corpus directory holds one CSV file per record type (header row, UTF-8,
//! RFC 4180 quoting) plus an optional `sections.jsonl`. Empty CSV cells mean
//! "absent". Lines starting with `#` are comments, which lets stage outputs
//! carry a provenance header and still be read back.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PAPERS_FILE: &str = "papers.csv";
pub const AUTHORS_FILE: &str = "author_mentions.csv";
pub const CONCEPTS_FILE: &str = "concept_mentions.csv";
pub const TOPICS_FILE: &str = "topic_assignments.csv";
pub const BIBLIOGRAPHY_FILE: &str = "bibliography.csv";
pub const SECTIONS_FILE: &str = "sections.jsonl";

const PAPER_COLUMNS: [&str; 5] = ["paper_id", "title", "pub_date", "journal", "doi"];
const AUTHOR_COLUMNS: [&str; 7] = [
    "paper_id",
    "first",
    "middle",
    "last",
    "inst_name",
    "inst_country",
    "inst_city",
];
const CONCEPT_COLUMNS: [&str; 4] = ["paper_id", "surface_text", "category", "confidence"];
const TOPIC_COLUMNS: [&str; 3] = ["paper_id", "topic_label", "score"];
const BIBLIOGRAPHY_COLUMNS: [&str; 3] = ["citing_paper_id", "ref_title", "ref_authors"];

/// The ten topic labels of the default vocabulary.
pub const DEFAULT_TOPICS: [&str; 10] = [
    "Vaccines/Immunology",
    "Genomics",
    "Public Health Policies",
    "Epidemiology",
    "Clinical Treatment",
    "Virology",
    "Influenza",
    "Healthcare Industry",
    "Lab Trials (human)",
    "Pulmonary infections",
];

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct PaperRecord {
    pub paper_id: String,
    pub title: String,
    pub pub_date: Option<String>,
    pub journal: Option<String>,
    pub doi: Option<String>,
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct AuthorMention {
    pub paper_id: String,
    pub first: Option<String>,
    pub middle: Option<String>,
    pub last: String,
    pub inst_name: Option<String>,
    pub inst_country: Option<String>,
    pub inst_city: Option<String>,
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct ConceptMention {
    pub paper_id: String,
    pub surface_text: String,
    pub category: String,
    pub confidence: f64,
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct TopicAssignment {
    pub paper_id: String,
    pub topic_label: String,
    pub score: f64,
}

/// One (first, middle, last) name in a bibliography entry.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PersonName {
    pub first: Option<String>,
    pub middle: Option<String>,
    pub last: String,
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct BibliographyEntry {
    pub citing_paper_id: String,
    pub ref_title: String,
    pub ref_authors: Vec<PersonName>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Section {
    Title,
    Abstract,
    Body,
}

impl Section {
    pub const ALL: [Section; 3] = [Section::Title, Section::Abstract, Section::Body];

    pub fn as_str(self) -> &'static str {
        match self {
            Section::Title => "title",
            Section::Abstract => "abstract",
            Section::Body => "body",
        }
    }

    /// Single-letter flag used in `sections_present` columns.
    pub fn flag(self) -> char {
        match self {
            Section::Title => 't',
            Section::Abstract => 'a',
            Section::Body => 'b',
        }
    }

    pub fn parse(s: &str) -> Option<Section> {
        match s {
            "title" => Some(Section::Title),
            "abstract" => Some(Section::Abstract),
            "body" => Some(Section::Body),
            _ => None,
        }
    }
}

impl fmt::Display for Section {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SectionText {
    pub paper_id: String,
    pub section: Section,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestConfig {
    pub topic_vocabulary: Vec<String>,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            topic_vocabulary: DEFAULT_TOPICS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl IngestConfig {
    /// Reads a topic vocabulary with one label per non-empty line.
    pub fn from_vocabulary_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let topic_vocabulary: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_string)
            .collect();
        if topic_vocabulary.is_empty() {
            return Err(Error::Config(format!(
                "{}: topic vocabulary is empty",
                path.display()
            )));
        }
        Ok(Self { topic_vocabulary })
    }
}

/// A cross-reference to a paper that does not exist in `papers.csv`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DanglingReference {
    pub file: String,
    pub paper_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusCounts {
    pub papers: usize,
    pub author_mentions: usize,
    pub concept_mentions: usize,
    pub topic_assignments: usize,
    pub bibliography_entries: usize,
    pub sections: usize,
}

/// All record collections of one corpus, each sorted on its natural key.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub papers: Vec<PaperRecord>,
    pub author_mentions: Vec<AuthorMention>,
    pub concept_mentions: Vec<ConceptMention>,
    pub topic_assignments: Vec<TopicAssignment>,
    pub bibliography: Vec<BibliographyEntry>,
    pub sections: Vec<SectionText>,
    /// Referential-integrity warnings collected while loading.
    pub warnings: Vec<DanglingReference>,
}

impl Corpus {
    pub fn counts(&self) -> CorpusCounts {
        CorpusCounts {
            papers: self.papers.len(),
            author_mentions: self.author_mentions.len(),
            concept_mentions: self.concept_mentions.len(),
            topic_assignments: self.topic_assignments.len(),
            bibliography_entries: self.bibliography.len(),
            sections: self.sections.len(),
        }
    }

    pub fn paper_ids(&self) -> HashSet<&str> {
        self.papers.iter().map(|p| p.paper_id.as_str()).collect()
    }

    /// Sorts every collection on its natural key and recomputes the
    /// integrity warnings. Loading always returns a normalized corpus; this is
    /// for corpora assembled in memory.
    pub fn normalize(&mut self) {
        sort_records(&mut self.papers);
        sort_records(&mut self.author_mentions);
        sort_records(&mut self.concept_mentions);
        sort_records(&mut self.topic_assignments);
        sort_records(&mut self.bibliography);
        sort_records(&mut self.sections);
        self.warnings = dangling_references(self);
    }
}

fn sort_records<T: PartialOrd>(records: &mut [T]) {
    // Float fields are validated finite, so the order is total.
    records.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
}

/// Findings of [`validate_corpus`]. Empty when the corpus is clean.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub dangling_references: Vec<DanglingReference>,
    pub empty_sections: Vec<(String, Section)>,
    pub out_of_vocabulary_topics: Vec<(String, String)>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.dangling_references.is_empty()
            && self.empty_sections.is_empty()
            && self.out_of_vocabulary_topics.is_empty()
    }
}

pub fn validate_corpus(corpus: &Corpus, config: &IngestConfig) -> ValidationReport {
    let vocabulary: HashSet<&str> = config.topic_vocabulary.iter().map(String::as_str).collect();
    ValidationReport {
        dangling_references: dangling_references(corpus),
        empty_sections: corpus
            .sections
            .iter()
            .filter(|s| s.text.trim().is_empty())
            .map(|s| (s.paper_id.clone(), s.section))
            .collect(),
        out_of_vocabulary_topics: corpus
            .topic_assignments
            .iter()
            .filter(|t| !vocabulary.contains(t.topic_label.as_str()))
            .map(|t| (t.paper_id.clone(), t.topic_label.clone()))
            .collect(),
    }
}

fn dangling_references(corpus: &Corpus) -> Vec<DanglingReference> {
    let known = corpus.paper_ids();
    let mut out = BTreeSet::new();
    let mut check = |file: &str, id: &str| {
        if !known.contains(id) {
            out.insert(DanglingReference {
                file: file.to_string(),
                paper_id: id.to_string(),
            });
        }
    };
    for m in &corpus.author_mentions {
        check(AUTHORS_FILE, &m.paper_id);
    }
    for m in &corpus.concept_mentions {
        check(CONCEPTS_FILE, &m.paper_id);
    }
    for t in &corpus.topic_assignments {
        check(TOPICS_FILE, &t.paper_id);
    }
    for b in &corpus.bibliography {
        check(BIBLIOGRAPHY_FILE, &b.citing_paper_id);
    }
    for s in &corpus.sections {
        check(SECTIONS_FILE, &s.paper_id);
    }
    out.into_iter().collect()
}

/// Loads and validates every record file in `dir`.
///
/// Fatal: a missing mandatory file, a malformed row (reported with file and
/// line), a duplicate `paper_id`, or a duplicate (paper, section) text.
/// Dangling paper references are collected in [`Corpus::warnings`].
pub fn load_corpus(dir: &Path, _config: &IngestConfig) -> Result<Corpus> {
    let mut corpus = Corpus {
        papers: read_table(dir, PAPERS_FILE, &PAPER_COLUMNS, parse_paper)?,
        author_mentions: read_table(dir, AUTHORS_FILE, &AUTHOR_COLUMNS, parse_author)?,
        concept_mentions: read_table(dir, CONCEPTS_FILE, &CONCEPT_COLUMNS, parse_concept)?,
        topic_assignments: read_table(dir, TOPICS_FILE, &TOPIC_COLUMNS, parse_topic)?,
        bibliography: read_table(dir, BIBLIOGRAPHY_FILE, &BIBLIOGRAPHY_COLUMNS, parse_bibliography)?,
        sections: read_sections(&dir.join(SECTIONS_FILE))?,
        warnings: Vec::new(),
    };

    let mut seen = HashSet::new();
    for p in &corpus.papers {
        if !seen.insert(p.paper_id.as_str()) {
            return Err(Error::DuplicatePaper(p.paper_id.clone()));
        }
    }
    corpus.normalize();
    Ok(corpus)
}

/// Column lookup for one CSV file: maps each expected column to its index.
struct Columns<'a> {
    file: &'a str,
    index: HashMap<&'a str, usize>,
}

struct Row<'a> {
    columns: &'a Columns<'a>,
    record: &'a csv::StringRecord,
    line: u64,
}

impl Row<'_> {
    fn raw(&self, column: &str) -> &str {
        self.record
            .get(self.columns.index[column])
            .unwrap_or_default()
    }

    fn optional(&self, column: &str) -> Option<String> {
        let v = self.raw(column);
        (!v.is_empty()).then(|| v.to_string())
    }

    fn required(&self, column: &str) -> Result<String> {
        let v = self.raw(column);
        if v.trim().is_empty() {
            Err(self.error(format!("column {column} must not be empty")))
        } else {
            Ok(v.to_string())
        }
    }

    fn unit_interval(&self, column: &str) -> Result<f64> {
        let raw = self.raw(column);
        let value: f64 = raw
            .trim()
            .parse()
            .map_err(|_| self.error(format!("column {column}: {raw:?} is not a number")))?;
        if !(0.0..=1.0).contains(&value) {
            return Err(self.error(format!("column {column}: {value} outside [0, 1]")));
        }
        Ok(value)
    }

    fn error(&self, message: String) -> Error {
        Error::malformed(self.columns.file, self.line, message)
    }
}

fn read_table<T>(
    dir: &Path,
    file: &str,
    expected: &[&'static str],
    parse: impl Fn(&Row<'_>) -> Result<T>,
) -> Result<Vec<T>> {
    let path = dir.join(file);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(&path)
        .map_err(|e| csv_error(file, e))?;
    let headers = reader.headers().map_err(|e| csv_error(file, e))?.clone();
    let header_line = reader.position().line().max(1);
    let mut index = HashMap::new();
    for &column in expected {
        match headers.iter().position(|h| h.trim() == column) {
            Some(i) => {
                index.insert(column, i);
            }
            None => {
                return Err(Error::malformed(
                    file,
                    header_line,
                    format!("missing column {column}"),
                ))
            }
        }
    }
    let columns = Columns { file, index };
    let mut out = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        match reader.read_record(&mut record) {
            Ok(true) => {}
            Ok(false) => break,
            Err(e) => return Err(csv_error(file, e)),
        }
        let line = record.position().map_or(0, |p| p.line());
        let row = Row {
            columns: &columns,
            record: &record,
            line,
        };
        out.push(parse(&row)?);
    }
    Ok(out)
}

fn csv_error(file: &str, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(file, source),
        other => Error::malformed(file, line, format!("{other:?}")),
    }
}

fn parse_paper(row: &Row<'_>) -> Result<PaperRecord> {
    let pub_date = row.optional("pub_date");
    if let Some(date) = &pub_date {
        if !is_iso_date(date) {
            return Err(row.error(format!("pub_date {date:?} is not an ISO-8601 date")));
        }
    }
    Ok(PaperRecord {
        paper_id: row.required("paper_id")?,
        title: row.required("title")?,
        pub_date,
        journal: row.optional("journal"),
        doi: row.optional("doi"),
    })
}

fn parse_author(row: &Row<'_>) -> Result<AuthorMention> {
    Ok(AuthorMention {
        paper_id: row.required("paper_id")?,
        first: row.optional("first"),
        middle: row.optional("middle"),
        last: row.required("last")?,
        inst_name: row.optional("inst_name"),
        inst_country: row.optional("inst_country"),
        inst_city: row.optional("inst_city"),
    })
}

fn parse_concept(row: &Row<'_>) -> Result<ConceptMention> {
    Ok(ConceptMention {
        paper_id: row.required("paper_id")?,
        surface_text: row.required("surface_text")?,
        category: row.raw("category").to_string(),
        confidence: row.unit_interval("confidence")?,
    })
}

fn parse_topic(row: &Row<'_>) -> Result<TopicAssignment> {
    Ok(TopicAssignment {
        paper_id: row.required("paper_id")?,
        topic_label: row.required("topic_label")?,
        score: row.unit_interval("score")?,
    })
}

fn parse_bibliography(row: &Row<'_>) -> Result<BibliographyEntry> {
    let ref_authors = parse_ref_authors(row.raw("ref_authors")).map_err(|m| row.error(m))?;
    Ok(BibliographyEntry {
        citing_paper_id: row.required("citing_paper_id")?,
        ref_title: row.required("ref_title")?,
        ref_authors,
    })
}

/// Parses `first|middle|last;first|middle|last;...`.
pub fn parse_ref_authors(raw: &str) -> std::result::Result<Vec<PersonName>, String> {
    if raw.trim().is_empty() {
        return Ok(Vec::new());
    }
    raw.split(';')
        .map(|entry| {
            let parts: Vec<&str> = entry.split('|').collect();
            if parts.len() != 3 {
                return Err(format!(
                    "ref_authors entry {entry:?} must have the form first|middle|last"
                ));
            }
            if parts[2].trim().is_empty() {
                return Err(format!("ref_authors entry {entry:?} has an empty last name"));
            }
            let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
            Ok(PersonName {
                first: opt(parts[0]),
                middle: opt(parts[1]),
                last: parts[2].to_string(),
            })
        })
        .collect()
}

pub fn format_ref_authors(names: &[PersonName]) -> String {
    names
        .iter()
        .map(|n| {
            format!(
                "{}|{}|{}",
                n.first.as_deref().unwrap_or(""),
                n.middle.as_deref().unwrap_or(""),
                n.last
            )
        })
        .collect::<Vec<_>>()
        .join(";")
}

/// Accepts `YYYY`, `YYYY-MM` and `YYYY-MM-DD`.
fn is_iso_date(s: &str) -> bool {
    let parts: Vec<&str> = s.split('-').collect();
    let digits = |p: &str, n: usize| p.len() == n && p.bytes().all(|b| b.is_ascii_digit());
    let in_range = |p: &str, hi: u32| p.parse::<u32>().is_ok_and(|v| (1..=hi).contains(&v));
    match parts.as_slice() {
        [y] => digits(y, 4),
        [y, m] => digits(y, 4) && digits(m, 2) && in_range(m, 12),
        [y, m, d] => {
            digits(y, 4) && digits(m, 2) && digits(d, 2) && in_range(m, 12) && in_range(d, 31)
        }
        _ => false,
    }
}

#[derive(Deserialize)]
struct SectionLine {
    paper_id: String,
    section: String,
    text: String,
}

fn read_sections(path: &Path) -> Result<Vec<SectionText>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let lineno = i as u64 + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let parsed: SectionLine = serde_json::from_str(trimmed)
            .map_err(|e| Error::malformed(SECTIONS_FILE, lineno, e.to_string()))?;
        let section = Section::parse(&parsed.section).ok_or_else(|| {
            Error::malformed(
                SECTIONS_FILE,
                lineno,
                format!("unknown section {:?}", parsed.section),
            )
        })?;
        if parsed.paper_id.is_empty() {
            return Err(Error::malformed(SECTIONS_FILE, lineno, "empty paper_id"));
        }
        if !seen.insert((parsed.paper_id.clone(), section)) {
            return Err(Error::DuplicateSection {
                paper_id: parsed.paper_id,
                section: section.to_string(),
            });
        }
        out.push(SectionText {
            paper_id: parsed.paper_id,
            section,
            text: parsed.text,
        });
    }
    Ok(out)
}

/// Writes the corpus back in the input format. `header` lines (if any) are
/// emitted as `#` comments at the top of every file.
pub fn write_corpus(corpus: &Corpus, dir: &Path, header: &[String]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let opt = |v: &Option<String>| v.clone().unwrap_or_default();

    write_csv(dir, PAPERS_FILE, header, &PAPER_COLUMNS, corpus.papers.iter().map(|p| {
        vec![p.paper_id.clone(), p.title.clone(), opt(&p.pub_date), opt(&p.journal), opt(&p.doi)]
    }))?;
    write_csv(dir, AUTHORS_FILE, header, &AUTHOR_COLUMNS, corpus.author_mentions.iter().map(|a| {
        vec![
            a.paper_id.clone(),
            opt(&a.first),
            opt(&a.middle),
            a.last.clone(),
            opt(&a.inst_name),
            opt(&a.inst_country),
            opt(&a.inst_city),
        ]
    }))?;
    write_csv(dir, CONCEPTS_FILE, header, &CONCEPT_COLUMNS, corpus.concept_mentions.iter().map(|c| {
        vec![c.paper_id.clone(), c.surface_text.clone(), c.category.clone(), c.confidence.to_string()]
    }))?;
    write_csv(dir, TOPICS_FILE, header, &TOPIC_COLUMNS, corpus.topic_assignments.iter().map(|t| {
        vec![t.paper_id.clone(), t.topic_label.clone(), t.score.to_string()]
    }))?;
    write_csv(dir, BIBLIOGRAPHY_FILE, header, &BIBLIOGRAPHY_COLUMNS, corpus.bibliography.iter().map(|b| {
        vec![b.citing_paper_id.clone(), b.ref_title.clone(), format_ref_authors(&b.ref_authors)]
    }))?;

    if !corpus.sections.is_empty() {
        let path = dir.join(SECTIONS_FILE);
        let mut buf = Vec::new();
        write_comment_header(&mut buf, header);
        for s in &corpus.sections {
            let line = serde_json::json!({
                "paper_id": s.paper_id,
                "section": s.section.as_str(),
                "text": s.text,
            });
            buf.extend_from_slice(line.to_string().as_bytes());
            buf.push(b'\n');
        }
        fs::write(&path, buf).map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}

/// Appends `# line` comments to `buf`.
pub fn write_comment_header(buf: &mut Vec<u8>, header: &[String]) {
    for line in header {
        buf.extend_from_slice(b"# ");
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
    }
}

/// Writes a CSV file with an optional comment header.
pub fn write_csv<I, R>(
    dir: &Path,
    file: &str,
    header: &[String],
    columns: &[&str],
    rows: I,
) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let path = dir.join(file);
    let mut buf = Vec::new();
    write_comment_header(&mut buf, header);
    {
        let mut writer = csv::Writer::from_writer(&mut buf);
        let map = |e: csv::Error| Error::malformed(file, 0, e.to_string());
        writer.write_record(columns).map_err(map)?;
        for row in rows {
            writer.write_record(row).map_err(map)?;
        }
        writer.flush().map_err(|e| Error::io(&path, e))?;
    }
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(&buf).map_err(|e| Error::io(&path, e))
}

/// Reads a headered CSV file (skipping `#` comments) into string maps keyed
/// by column name. Used for reading stage outputs back.
pub fn read_csv_maps(path: &Path) -> Result<Vec<BTreeMap<String, String>>> {
    let file = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) if source.kind() == std::io::ErrorKind::NotFound => {
                Error::MissingFile(path.to_path_buf())
            }
            csv::ErrorKind::Io(source) => Error::io(path, source),
            other => Error::malformed(file.clone(), 0, format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| csv_error(&file, e))?.clone();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(&file, e))?;
        out.push(
            headers
                .iter()
                .zip(record.iter())
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect(),
        );
    }
    Ok(out)
}
