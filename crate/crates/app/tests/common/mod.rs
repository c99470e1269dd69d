#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use vizkg_core::corpus;
use vizkg_core::embed::TrainConfig;
use vizkg_core::model::{self, PipelineConfig, VisModel};
use vizkg_core::synthetic;

pub fn small_config() -> PipelineConfig {
    PipelineConfig {
        train: TrainConfig {
            dim: 16,
            batch_size: 64,
            steps: 300,
            negatives: 8,
            learning_rate: 0.01,
            seed: 3,
            log_every: 0,
            ..Default::default()
        },
        ..Default::default()
    }
}

pub fn scratch_dir(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

/// A model trained once per test binary on a small synthetic corpus.
pub fn model() -> &'static VisModel {
    static MODEL: OnceLock<VisModel> = OnceLock::new();
    MODEL.get_or_init(|| model::fit(&synthetic::separable_corpus(30, 8), &small_config()).unwrap().model)
}

/// Line-chart style CSV: increasing dates and unordered decimals.
pub fn line_csv() -> String {
    let table = &synthetic::separable_corpus(1, 5)[0].table;
    let mut out = String::from("date,value\n");
    for r in 0..table.n_rows() {
        let cells: Vec<String> = table
            .columns
            .iter()
            .map(|c| match c.values[r].to_json() {
                serde_json::Value::String(s) => s,
                v => v.to_string(),
            })
            .collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_corpus(dir: &std::path::Path, tables: usize) -> PathBuf {
    let path = dir.join("corpus.jsonl");
    corpus::write_corpus(&path, &synthetic::separable_corpus(tables, 8)).unwrap();
    path
}
