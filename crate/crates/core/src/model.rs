//! End-to-end fitting and the self-contained model file.
//!
//! Layout (little-endian): magic `KG4M`, u32 format, registry version string,
//! a JSON header block (config, discretizer, bounds, vocabulary, histograms),
//! then the entity and relation matrices as counted `f32` arrays.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::container;
use crate::corpus::{CorpusRecord, VisLabel};
use crate::discretize::{Discretizer, MdlpConfig};
use crate::embed::{self, EmbeddingModel, Norm, Scorer, TrainConfig, TrainReport};
use crate::error::{Error, Result};
use crate::features::{self, Bounds, ContinuousFeature, FeatureVector, N_CONTINUOUS, REGISTRY_VERSION};
use crate::kg::{self, Histogram, KnowledgeGraph, Vocabulary};

const MODEL_MAGIC: &[u8; 4] = b"KG4M";
const MODEL_FORMAT: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub train: TrainConfig,
    pub mdlp: MdlpConfig,
}

/// A trained recommender: embeddings plus everything needed to featurize
/// and discretize a new column the way the training data was.
#[derive(Debug, Clone, PartialEq)]
pub struct VisModel {
    pub embedding: EmbeddingModel,
    pub vocab: Vocabulary,
    /// Indexed by [`ContinuousFeature::index`].
    pub histograms: Vec<Histogram>,
    pub discretizer: Discretizer,
    /// Winsorization bounds, indexed by [`ContinuousFeature::index`].
    pub bounds: Vec<Bounds>,
    pub config: PipelineConfig,
}

/// Extracts features for every labeled column, in record then column order.
pub fn labeled_columns(records: &[CorpusRecord]) -> Vec<(FeatureVector, VisLabel)> {
    records
        .par_iter()
        .flat_map_iter(|r| {
            r.labels
                .iter()
                .map(|(&i, &label)| (features::extract(&r.table, i), label))
                .collect::<Vec<_>>()
        })
        .collect()
}

pub struct Fitted {
    pub model: VisModel,
    pub graph: KnowledgeGraph,
    pub report: TrainReport,
}

/// Winsorizes, discretizes, builds the graph and trains the embedding.
pub fn fit(records: &[CorpusRecord], cfg: &PipelineConfig) -> Result<Fitted> {
    cfg.mdlp.validate()?;
    cfg.train.validate()?;
    let mut columns = labeled_columns(records);
    if columns.is_empty() {
        return Err(Error::InvalidInput("no labeled columns to train on".into()));
    }
    let vectors: Vec<FeatureVector> = columns.iter().map(|(fv, _)| fv.clone()).collect();
    let (clipped, bounds) = features::winsorize_matrix(&features::to_matrix(&vectors))?;
    for (c, (fv, _)) in columns.iter_mut().enumerate() {
        for f in 0..N_CONTINUOUS {
            fv.continuous[f] = clipped[f][c];
        }
    }
    let labels: Vec<_> = columns.iter().map(|(_, l)| l.vis_type).collect();
    let ids: Vec<&str> = ContinuousFeature::ALL.iter().map(|f| f.id()).collect();
    let discretizer = Discretizer::fit(&ids, &clipped, &labels, &cfg.mdlp)?;
    let graph = kg::build_graph(&columns, &discretizer)?;
    let (embedding, report) = embed::train(&graph, &cfg.train)?;
    let model = VisModel {
        embedding,
        vocab: graph.vocab.clone(),
        histograms: graph.histograms.clone(),
        discretizer,
        bounds,
        config: cfg.clone(),
    };
    Ok(Fitted { model, graph, report })
}

#[derive(Serialize, Deserialize)]
struct Header {
    scorer: Scorer,
    norm: Norm,
    dim: usize,
    config: PipelineConfig,
    discretizer: Discretizer,
    bounds: Vec<Bounds>,
    entities: Vec<String>,
    relations: Vec<String>,
    histograms: std::collections::BTreeMap<String, Histogram>,
}

impl VisModel {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = container::Writer::new(MODEL_MAGIC, MODEL_FORMAT);
        w.short_str(REGISTRY_VERSION);
        let header = Header {
            scorer: self.embedding.scorer,
            norm: self.embedding.norm,
            dim: self.embedding.dim,
            config: self.config.clone(),
            discretizer: self.discretizer.clone(),
            bounds: self.bounds.clone(),
            entities: self.vocab.entities().iter().map(|e| e.key.clone()).collect(),
            relations: self.vocab.relations().iter().map(|r| r.key.clone()).collect(),
            histograms: kg::histograms_to_map(&self.histograms),
        };
        w.block(&serde_json::to_vec(&header)?);
        w.f32s(&self.embedding.entities);
        w.f32s(&self.embedding.relations);
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<VisModel> {
        let (mut r, format) = container::Reader::open(bytes, MODEL_MAGIC)?;
        if format != MODEL_FORMAT {
            return Err(Error::Malformed(format!("unsupported model format {format}")));
        }
        let version = r.short_str()?;
        if version != REGISTRY_VERSION {
            return Err(Error::VersionMismatch {
                expected: REGISTRY_VERSION.to_string(),
                found: version,
            });
        }
        let h: Header = serde_json::from_slice(r.block()?)?;
        let entities = r.f32s()?;
        let relations = r.f32s()?;
        r.finish()?;

        let vocab = Vocabulary::from_keys(&h.entities, &h.relations)?;
        let embedding = EmbeddingModel::new(h.scorer, h.norm, h.dim, entities, relations)?;
        if embedding.n_entities() != vocab.n_entities() || embedding.n_relations() != vocab.n_relations() {
            return Err(Error::Malformed("embedding rows do not match the vocabulary".into()));
        }
        if h.bounds.len() != N_CONTINUOUS {
            return Err(Error::Malformed(format!("expected {N_CONTINUOUS} bounds, found {}", h.bounds.len())));
        }
        for f in ContinuousFeature::ALL {
            h.discretizer.cuts(f.id())?;
        }
        Ok(VisModel {
            embedding,
            vocab,
            histograms: kg::histograms_from_map(h.histograms)?,
            discretizer: h.discretizer,
            bounds: h.bounds,
            config: h.config,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<VisModel> {
        VisModel::from_bytes(&std::fs::read(path)?)
    }

    /// SHA-256 of the serialized model, hex encoded.
    pub fn fingerprint(&self) -> Result<String> {
        Ok(sha256_hex(&self.to_bytes()?))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic;

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            train: TrainConfig {
                dim: 8,
                batch_size: 32,
                steps: 20,
                negatives: 4,
                log_every: 0,
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn fit_save_load_round_trip() {
        let records = synthetic::separable_corpus(30, 5);
        let fitted = fit(&records, &small_config()).unwrap();
        let m = &fitted.model;
        assert_eq!(m.bounds.len(), N_CONTINUOUS);
        assert_eq!(m.discretizer.len(), N_CONTINUOUS);
        assert_eq!(m.embedding.n_entities(), m.vocab.n_entities());

        let bytes = m.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"KG4M");
        let back = VisModel::from_bytes(&bytes).unwrap();
        assert_eq!(&back, m);
        assert_eq!(back.to_bytes().unwrap(), bytes);
        assert!(VisModel::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        assert!(VisModel::from_bytes(b"KG4V\x01\0\0\0").is_err());
    }

    #[test]
    fn fit_is_deterministic() {
        let records = synthetic::separable_corpus(20, 9);
        let a = fit(&records, &small_config()).unwrap().model.to_bytes().unwrap();
        let b = fit(&records, &small_config()).unwrap().model.to_bytes().unwrap();
        assert_eq!(sha256_hex(&a), sha256_hex(&b));
    }

    #[test]
    fn fingerprint_format() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
