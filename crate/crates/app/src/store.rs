//! Uploaded tables, optionally mirrored to a directory as one JSON file each.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use vizkg_core::corpus::{self, Table};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub id: String,
    pub name: String,
    pub table: Table,
}

#[derive(Debug, Clone, Serialize)]
pub struct DatasetSummary {
    pub id: String,
    pub name: String,
    pub n_columns: usize,
    pub n_rows: usize,
}

impl Dataset {
    pub fn summary(&self) -> DatasetSummary {
        DatasetSummary {
            id: self.id.clone(),
            name: self.name.clone(),
            n_columns: self.table.columns.len(),
            n_rows: self.table.n_rows(),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct StoredDataset {
    id: String,
    name: String,
    table: Value,
}

#[derive(Debug, Default)]
pub struct DatasetStore {
    datasets: BTreeMap<String, Dataset>,
    dir: Option<PathBuf>,
}

impl DatasetStore {
    pub fn in_memory() -> Self {
        DatasetStore::default()
    }

    /// Opens (creating if needed) a persistence directory and loads every
    /// dataset file in it. Unreadable files are logged and skipped.
    pub fn open(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut store = DatasetStore {
            datasets: BTreeMap::new(),
            dir: Some(dir.to_path_buf()),
        };
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            match load_file(&path) {
                Ok(d) => {
                    store.datasets.insert(d.id.clone(), d);
                }
                Err(e) => log::warn!("skipping {}: {e:#}", path.display()),
            }
        }
        log::info!("loaded {} datasets from {}", store.datasets.len(), dir.display());
        Ok(store)
    }

    pub fn get(&self, id: &str) -> Option<&Dataset> {
        self.datasets.get(id)
    }

    /// Summaries ordered by name, then id.
    pub fn list(&self) -> Vec<DatasetSummary> {
        let mut out: Vec<DatasetSummary> = self.datasets.values().map(Dataset::summary).collect();
        out.sort_by(|a, b| a.name.cmp(&b.name).then_with(|| a.id.cmp(&b.id)));
        out
    }

    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    /// Stores `table` under a fresh id, writing it to disk first when the
    /// store is persistent.
    pub fn insert(&mut self, name: String, mut table: Table) -> Result<String> {
        let id = loop {
            let id = uuid::Uuid::new_v4().simple().to_string();
            if !self.datasets.contains_key(&id) {
                break id;
            }
        };
        table.id = id.clone();
        let dataset = Dataset { id: id.clone(), name, table };
        if let Some(dir) = &self.dir {
            let stored = StoredDataset {
                id: dataset.id.clone(),
                name: dataset.name.clone(),
                table: corpus::table_to_json(&dataset.table),
            };
            let path = dir.join(format!("{id}.json"));
            std::fs::write(&path, serde_json::to_vec(&stored)?).with_context(|| format!("writing {}", path.display()))?;
        }
        self.datasets.insert(id.clone(), dataset);
        Ok(id)
    }
}

fn load_file(path: &Path) -> Result<Dataset> {
    let stored: StoredDataset = serde_json::from_slice(&std::fs::read(path)?)?;
    let table = corpus::parse_table_json(&stored.table.to_string(), &stored.id)?;
    Ok(Dataset {
        id: stored.id,
        name: stored.name,
        table,
    })
}
