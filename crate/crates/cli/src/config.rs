use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ckg_core::curation::{CurationConfig, NormalizationMode};
use ckg_core::graph::Relation;
use ckg_core::ingest::Section;
use ckg_core::kge::KgeConfig;
use ckg_core::numeric::derive_seed;
use ckg_core::semantic::{SemanticConfig, SemanticSource};
use ckg_core::similarity::Weights;
use serde::Serialize;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Semantic,
    Kge,
    Combined,
    Random,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Semantic, Method::Kge, Method::Combined, Method::Random];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Semantic => "semantic",
            Method::Kge => "kge",
            Method::Combined => "combined",
            Method::Random => "random",
        }
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method {s:?} (expected semantic|kge|combined|random)"))
    }
}

/// Effective configuration of one invocation. Serialized into every output
/// header.
#[derive(Debug, Clone, Serialize)]
pub struct PipelineConfig {
    pub corpus_dir: PathBuf,
    pub work_dir: PathBuf,
    /// `None` when no seed was given; random methods refuse to run then.
    pub seed: Option<u64>,
    pub workers: usize,
    pub topics_file: Option<PathBuf>,
    pub curation: CurationConfig,
    pub kge: KgeConfig,
    pub folds: usize,
    pub semantic: SemanticConfig,
    pub weights: Weights,
    pub k: usize,
    pub method: Method,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_dir: PathBuf::from("corpus"),
            work_dir: PathBuf::from("work"),
            seed: None,
            workers: 1,
            topics_file: None,
            curation: CurationConfig::default(),
            kge: KgeConfig::default(),
            folds: 10,
            semantic: SemanticConfig::default(),
            weights: Weights::default(),
            k: 5,
            method: Method::Combined,
        }
    }
}

pub const KEYS: &[&str] = &[
    "corpus-dir",
    "work-dir",
    "seed",
    "workers",
    "topics-file",
    "threshold",
    "min-fraction",
    "flag-fraction",
    "normalization",
    "dim",
    "gamma",
    "epochs",
    "lr",
    "negatives",
    "batch-size",
    "exclude-relations",
    "unit-norm",
    "folds",
    "semantic-dim",
    "semantic-source",
    "sections",
    "w-sem",
    "w-kge",
    "k",
    "method",
];

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--{key}: cannot parse {value:?}")))
}

fn list(value: &str) -> impl Iterator<Item = &str> {
    value
        .split([',', ';'])
        .map(str::trim)
        .filter(|s| !s.is_empty())
}

impl PipelineConfig {
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match key {
            "corpus-dir" => self.corpus_dir = PathBuf::from(value),
            "work-dir" => self.work_dir = PathBuf::from(value),
            "seed" => self.seed = Some(parse(key, value)?),
            "workers" => self.workers = parse(key, value)?,
            "topics-file" => self.topics_file = Some(PathBuf::from(value)),
            "threshold" => self.curation.concept_confidence_threshold = parse(key, value)?,
            "min-fraction" => self.curation.concept_min_fraction = parse(key, value)?,
            "flag-fraction" => self.curation.concept_flag_fraction = parse(key, value)?,
            "normalization" => {
                self.curation.normalization_mode = NormalizationMode::from_str(value.trim())
                    .map_err(|e| CliError::Usage(e.to_string()))?
            }
            "dim" => self.kge.dim = parse(key, value)?,
            "gamma" => self.kge.gamma = parse(key, value)?,
            "epochs" => self.kge.epochs = parse(key, value)?,
            "lr" => self.kge.learning_rate = parse(key, value)?,
            "negatives" => self.kge.negatives_per_positive = parse(key, value)?,
            "batch-size" => self.kge.batch_size = parse(key, value)?,
            "exclude-relations" => {
                let mut include: BTreeSet<Relation> = Relation::ALL.into_iter().collect();
                for name in list(value) {
                    let r = Relation::from_str(name).map_err(|e| CliError::Usage(e.to_string()))?;
                    include.remove(&r);
                }
                self.kge.include_relations = include;
            }
            "unit-norm" => self.kge.unit_norm_entities = parse(key, value)?,
            "folds" => self.folds = parse(key, value)?,
            "semantic-dim" => self.semantic.dim = parse(key, value)?,
            "semantic-source" => {
                self.semantic.source = match value.trim() {
                    "fallback" => SemanticSource::FallbackHashing,
                    "external" => SemanticSource::ExternalVectors,
                    other => {
                        return Err(CliError::Usage(format!(
                            "--semantic-source: expected fallback|external, got {other:?}"
                        )))
                    }
                }
            }
            "sections" => {
                self.semantic.sections_used = list(value)
                    .map(|s| {
                        Section::parse(s)
                            .ok_or_else(|| CliError::Usage(format!("--sections: unknown section {s:?}")))
                    })
                    .collect::<Result<_, _>>()?
            }
            "w-sem" => self.weights.semantic = parse(key, value)?,
            "w-kge" => self.weights.kge = parse(key, value)?,
            "k" => self.k = parse(key, value)?,
            "method" => self.method = value.trim().parse().map_err(CliError::Usage)?,
            other => return Err(CliError::Usage(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Defaults, then `key=value` lines from the config file, then command
    /// line values.
    pub fn resolve(
        file: Option<&Path>,
        overrides: &BTreeMap<&'static str, String>,
    ) -> Result<Self, CliError> {
        let mut config = Self::default();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            for (n, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let (key, value) = line.split_once('=').ok_or_else(|| {
                    CliError::Usage(format!("{}:{}: expected key=value", path.display(), n + 1))
                })?;
                config.set(key.trim().trim_start_matches("--"), value.trim())?;
            }
        }
        for (key, value) in overrides {
            config.set(key, value)?;
        }
        config.finish()?;
        Ok(config)
    }

    fn finish(&mut self) -> Result<(), CliError> {
        if self.workers == 0 {
            return Err(CliError::Usage("--workers must be at least 1".to_string()));
        }
        if self.k == 0 {
            return Err(CliError::Usage("--k must be at least 1".to_string()));
        }
        if self.folds < 2 {
            return Err(CliError::Usage("--folds must be at least 2".to_string()));
        }
        self.kge.workers = self.workers;
        self.kge.seed = derive_seed(self.seed.unwrap_or(0), "kge");
        self.kge.validate()?;
        self.curation.validate()?;
        self.weights.validate()?;
        Ok(())
    }

    pub fn require_seed(&self, what: &str) -> Result<u64, CliError> {
        self.seed
            .ok_or_else(|| CliError::Usage(format!("{what} requires an explicit --seed")))
    }

    pub fn stage_seed(&self, label: &str) -> u64 {
        derive_seed(self.seed.unwrap_or(0), label)
    }

    /// Work subdirectory of KGE outputs for the included relation set.
    pub fn kge_label(&self) -> String {
        let excluded: Vec<&str> = Relation::ALL
            .into_iter()
            .filter(|r| !self.kge.include_relations.contains(r))
            .map(|r| r.as_str())
            .collect();
        if excluded.is_empty() {
            "kge".to_string()
        } else {
            format!("kge_excl_{}", excluded.join("+"))
        }
    }

    pub fn dir(&self, stage: &str) -> PathBuf {
        self.work_dir.join(stage)
    }
}
