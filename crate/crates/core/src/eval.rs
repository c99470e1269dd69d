//! Record-level k-fold cross-validation with rank metrics.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::CorpusRecord;
use crate::error::{Error, Result};
use crate::features;
use crate::infer;
use crate::model::{self, PipelineConfig};

/// 1-based rank of `scores[truth]` under descending order; a tied block
/// shares the mean of the ranks it spans.
pub fn rank_of_truth(scores: &[f64], truth: usize) -> Result<f64> {
    let t = *scores
        .get(truth)
        .ok_or_else(|| Error::InvalidInput(format!("truth index {truth} outside {} scores", scores.len())))?;
    let greater = scores.iter().filter(|s| **s > t).count();
    let ties = scores.iter().filter(|s| **s == t).count() - 1;
    Ok(1.0 + greater as f64 + ties as f64 / 2.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub mr: f64,
    pub hits_at_2: f64,
    pub axis_accuracy: f64,
}

pub fn metrics(ranks: &[f64], axis_hits: &[bool]) -> Result<Metrics> {
    if ranks.is_empty() || axis_hits.is_empty() {
        return Err(Error::InvalidInput("metrics need at least one column".into()));
    }
    let n = ranks.len() as f64;
    Ok(Metrics {
        mr: ranks.iter().sum::<f64>() / n,
        hits_at_2: ranks.iter().filter(|r| **r <= 2.0).count() as f64 / n,
        axis_accuracy: axis_hits.iter().filter(|h| **h).count() as f64 / axis_hits.len() as f64,
    })
}

/// Test fold of each record: shuffle positions with `seed`, then deal them
/// round-robin.
pub fn fold_assignment(n_records: usize, folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_records).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut fold = vec![0; n_records];
    for (pos, &rec) in order.iter().enumerate() {
        fold[rec] = pos % folds;
    }
    fold
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FoldReport {
    pub fold: usize,
    pub train_records: usize,
    pub test_columns: usize,
    pub skipped_columns: usize,
    #[serde(flatten)]
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    /// Pooled over all held-out columns.
    #[serde(flatten)]
    pub pooled: Metrics,
    /// Unweighted mean of the per-fold metrics.
    pub fold_averaged: Metrics,
    pub folds: Vec<FoldReport>,
    pub columns: usize,
    pub config_fingerprint: String,
}

impl EvalReport {
    pub fn write_fold_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["fold", "mr", "hits2", "axis_acc"])?;
        for f in &self.folds {
            w.write_record([
                f.fold.to_string(),
                f.metrics.mr.to_string(),
                f.metrics.hits_at_2.to_string(),
                f.metrics.axis_accuracy.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

struct FoldOutcome {
    report: FoldReport,
    ranks: Vec<f64>,
    axis_hits: Vec<bool>,
}

fn run_fold(records: &[CorpusRecord], assignment: &[usize], fold: usize, cfg: &PipelineConfig) -> Result<FoldOutcome> {
    let (test, train): (Vec<_>, Vec<_>) = records
        .iter()
        .zip(assignment)
        .partition(|(_, f)| **f == fold);
    let train: Vec<CorpusRecord> = train.into_iter().map(|(r, _)| r.clone()).collect();
    let fitted = model::fit(&train, cfg)?;

    let mut ranks = Vec::new();
    let mut axis_hits = Vec::new();
    let mut skipped = 0;
    for (record, _) in test {
        for (&col, label) in &record.labels {
            let fv = features::extract(&record.table, col);
            match infer::infer_column(&fitted.model, &fv) {
                Ok(ci) => {
                    ranks.push(rank_of_truth(&ci.type_scores, label.vis_type.index())?);
                    axis_hits.push(ci.axis == label.axis);
                }
                Err(Error::NoFeaturesMatched) => skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    if ranks.is_empty() {
        return Err(Error::InvalidInput(format!("fold {fold} has no evaluable columns")));
    }
    let m = metrics(&ranks, &axis_hits)?;
    log::info!(
        "fold {fold}: MR {:.4}, Hits@2 {:.4}, axis {:.4} over {} columns",
        m.mr,
        m.hits_at_2,
        m.axis_accuracy,
        ranks.len()
    );
    Ok(FoldOutcome {
        report: FoldReport {
            fold,
            train_records: train.len(),
            test_columns: ranks.len(),
            skipped_columns: skipped,
            metrics: m,
        },
        ranks,
        axis_hits,
    })
}

/// Trains one model per fold on the other folds' records and scores every
/// labeled column of the held-out records.
pub fn cross_validate(records: &[CorpusRecord], cfg: &PipelineConfig, folds: usize, seed: u64) -> Result<EvalReport> {
    if folds < 2 {
        return Err(Error::InvalidInput("need at least two folds".into()));
    }
    if records.len() < folds {
        return Err(Error::InvalidInput(format!(
            "{} records cannot fill {folds} folds",
            records.len()
        )));
    }
    let assignment = fold_assignment(records.len(), folds, seed);
    let outcomes = (0..folds)
        .into_par_iter()
        .map(|f| run_fold(records, &assignment, f, cfg))
        .collect::<Result<Vec<_>>>()?;

    let ranks: Vec<f64> = outcomes.iter().flat_map(|o| o.ranks.iter().copied()).collect();
    let hits: Vec<bool> = outcomes.iter().flat_map(|o| o.axis_hits.iter().copied()).collect();
    let pooled = metrics(&ranks, &hits)?;
    let k = folds as f64;
    let avg = |get: fn(&Metrics) -> f64| outcomes.iter().map(|o| get(&o.report.metrics)).sum::<f64>() / k;
    let fold_averaged = Metrics {
        mr: avg(|m| m.mr),
        hits_at_2: avg(|m| m.hits_at_2),
        axis_accuracy: avg(|m| m.axis_accuracy),
    };
    let fingerprint_src = serde_json::to_vec(&serde_json::json!({"config": cfg, "folds": folds, "seed": seed}))?;
    Ok(EvalReport {
        pooled,
        fold_averaged,
        columns: ranks.len(),
        folds: outcomes.into_iter().map(|o| o.report).collect(),
        config_fingerprint: model::sha256_hex(&fingerprint_src),
    })
}
