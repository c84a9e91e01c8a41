use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{KgeConfig, KgeModel};
use crate::error::{Error, Result};
use crate::ingest::{read_csv_maps, write_csv};

pub const HEADER_FILE: &str = "model_header.json";
pub const ENTITY_FILE: &str = "entity_embeddings.csv";
pub const RELATION_FILE: &str = "relation_embeddings.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub dim: usize,
    pub gamma: f64,
    pub num_entities: usize,
    pub num_relations: usize,
    pub seed: u64,
    pub config: KgeConfig,
}

fn vector_columns(first: &str, dim: usize) -> Vec<String> {
    std::iter::once(first.to_string())
        .chain((0..dim).map(|i| format!("v{i}")))
        .collect()
}

fn rows(table: &[f64], dim: usize) -> impl Iterator<Item = Vec<String>> + '_ {
    table.chunks(dim).enumerate().map(|(i, row)| {
        std::iter::once(i.to_string())
            .chain(row.iter().map(|v| v.to_string()))
            .collect()
    })
}

/// Writes `model_header.json`, `entity_embeddings.csv` and
/// `relation_embeddings.csv`. `header_json` is embedded as the `header`
/// field of the JSON file; `header` lines prefix the CSVs as comments.
pub fn write_model(
    model: &KgeModel,
    config: &KgeConfig,
    dir: &Path,
    header: &[String],
    header_json: serde_json::Value,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = ModelHeader {
        dim: model.dim,
        gamma: model.gamma,
        num_entities: model.num_entities,
        num_relations: model.num_relations,
        seed: config.seed,
        config: config.clone(),
    };
    let doc = serde_json::json!({ "header": header_json, "model": meta });
    let path = dir.join(HEADER_FILE);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;

    let ecols = vector_columns("entity_id", model.dim);
    let ecols: Vec<&str> = ecols.iter().map(String::as_str).collect();
    write_csv(dir, ENTITY_FILE, header, &ecols, rows(&model.entity_embeddings, model.dim))?;
    let rcols = vector_columns("relation_id", model.dim);
    let rcols: Vec<&str> = rcols.iter().map(String::as_str).collect();
    write_csv(dir, RELATION_FILE, header, &rcols, rows(&model.relation_embeddings, model.dim))
}

fn read_table(path: &Path, id_column: &str, dim: usize, expected_rows: usize) -> Result<Vec<f64>> {
    let file = path.display().to_string();
    let maps = read_csv_maps(path)?;
    if maps.len() != expected_rows {
        return Err(Error::malformed(
            file,
            0,
            format!("expected {expected_rows} rows, found {}", maps.len()),
        ));
    }
    let mut out = Vec::with_capacity(expected_rows * dim);
    for (i, row) in maps.iter().enumerate() {
        let line = i as u64 + 2;
        let id: usize = row
            .get(id_column)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| Error::malformed(file.clone(), line, format!("bad {id_column}")))?;
        if id != i {
            return Err(Error::malformed(file.clone(), line, format!("{id_column} {id} out of order")));
        }
        for d in 0..dim {
            let v: f64 = row
                .get(&format!("v{d}"))
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| Error::malformed(file.clone(), line, format!("bad value v{d}")))?;
            out.push(v);
        }
    }
    Ok(out)
}

pub fn read_model(dir: &Path) -> Result<(KgeModel, ModelHeader)> {
    let path = dir.join(HEADER_FILE);
    if !path.is_file() {
        return Err(Error::MissingFile(path));
    }
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let doc: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    let meta: ModelHeader = serde_json::from_value(doc["model"].clone()).map_err(|e| Error::Json {
        path: path.clone(),
        source: e,
    })?;
    let model = KgeModel {
        dim: meta.dim,
        gamma: meta.gamma,
        num_entities: meta.num_entities,
        num_relations: meta.num_relations,
        entity_embeddings: read_table(&dir.join(ENTITY_FILE), "entity_id", meta.dim, meta.num_entities)?,
        relation_embeddings: read_table(
            &dir.join(RELATION_FILE),
            "relation_id",
            meta.dim,
            meta.num_relations,
        )?,
    };
    Ok((model, meta))
}
