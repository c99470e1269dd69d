//! Independent reference implementations used as test oracles. They share
//! no code with the library beyond plain data types.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use vizkg_core::corpus::VisType;
use vizkg_core::discretize::MdlpConfig;
use vizkg_core::embed::{EmbeddingModel, LossKind, Norm, Scorer, TrainBatch, TrainConfig};
use vizkg_core::infer::Rule;
use vizkg_core::kg::{DesignChoice, Triple};

// ---------------------------------------------------------------- scoring

fn row(data: &[f64], id: u32, width: usize) -> &[f64] {
    &data[id as usize * width..(id as usize + 1) * width]
}

/// Plausibility of `(h, r, t)` written out from the definitions: negative
/// distance between the transformed head and the tail.
pub fn score(model: &EmbeddingModel, t: &Triple) -> f64 {
    let d = model.dim;
    let h = row(&model.entities, t.head, d);
    let tl = row(&model.entities, t.tail, d);
    match model.scorer {
        Scorer::TransE => {
            let r = row(&model.relations, t.relation, d);
            let diffs: Vec<f64> = (0..d).map(|i| h[i] + r[i] - tl[i]).collect();
            match model.norm {
                Norm::L1 => -diffs.iter().map(|x| x.abs()).sum::<f64>(),
                Norm::L2 => -diffs.iter().map(|x| x * x).sum::<f64>().sqrt(),
            }
        }
        Scorer::RotatE => {
            let k = d / 2;
            let phase = row(&model.relations, t.relation, k);
            // modulus of each complex coordinate of h * e^{iθ} - t
            let moduli: Vec<f64> = (0..k)
                .map(|j| {
                    let (re, im) = (h[j], h[k + j]);
                    let (c, s) = (phase[j].cos(), phase[j].sin());
                    let dr = re * c - im * s - tl[j];
                    let di = re * s + im * c - tl[k + j];
                    dr.hypot(di)
                })
                .collect();
            match model.norm {
                Norm::L1 => -moduli.iter().sum::<f64>(),
                Norm::L2 => -moduli.iter().map(|m| m * m).sum::<f64>().sqrt(),
            }
        }
    }
}

fn softplus_neg(x: f64) -> f64 {
    // -ln σ(x) for moderate x
    (-x).exp().ln_1p()
}

/// Per-positive negative weights `softmax(α g)` computed naively.
pub fn negative_weights(model: &EmbeddingModel, batch: &TrainBatch, alpha: f64) -> Vec<Vec<f64>> {
    batch
        .negatives
        .iter()
        .map(|negs| {
            let e: Vec<f64> = negs.iter().map(|t| (alpha * score(model, t)).exp()).collect();
            let z: f64 = e.iter().sum();
            e.iter().map(|x| x / z).collect()
        })
        .collect()
}

/// Batch loss with the negative weights supplied (held constant), as the
/// analytic gradient assumes.
pub fn loss(model: &EmbeddingModel, batch: &TrainBatch, cfg: &TrainConfig, weights: &[Vec<f64>]) -> f64 {
    let gamma = cfg.margin;
    let mut total = 0.0;
    for (i, (p, negs)) in batch.positives.iter().zip(&batch.negatives).enumerate() {
        let gp = score(model, p);
        total += match cfg.loss {
            LossKind::SelfAdversarial => {
                let neg: f64 = negs
                    .iter()
                    .zip(&weights[i])
                    .map(|(t, w)| w * softplus_neg(-score(model, t) - gamma))
                    .sum();
                softplus_neg(gamma + gp) + neg
            }
            LossKind::MarginRanking => negs.iter().map(|t| (gamma - gp + score(model, t)).max(0.0)).sum(),
        };
    }
    total / batch.positives.len() as f64
}

/// Central finite-difference gradient of [`loss`] over every parameter,
/// entities first then relations.
pub fn numeric_gradient(model: &EmbeddingModel, batch: &TrainBatch, cfg: &TrainConfig, eps: f64) -> Vec<f64> {
    let weights = negative_weights(model, batch, cfg.temperature);
    let n = model.entities.len() + model.relations.len();
    let mut out = Vec::with_capacity(n);
    let mut m = model.clone();
    for p in 0..n {
        let orig = *param(&mut m, p);
        *param(&mut m, p) = orig + eps;
        let up = loss(&m, batch, cfg, &weights);
        *param(&mut m, p) = orig - eps;
        let down = loss(&m, batch, cfg, &weights);
        *param(&mut m, p) = orig;
        out.push((up - down) / (2.0 * eps));
    }
    out
}

fn param(m: &mut EmbeddingModel, p: usize) -> &mut f64 {
    let n_ent = m.entities.len();
    if p < n_ent {
        &mut m.entities[p]
    } else {
        &mut m.relations[p - n_ent]
    }
}

/// `‖a - b‖ / max(‖a‖, ‖b‖)`, zero when both vanish.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut a.iter().zip(b).map(|(x, y)| x - y));
    let scale = norm(&mut a.iter().copied()).max(norm(&mut b.iter().copied()));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

// ---------------------------------------------------------------- MDLP

fn entropy2(labels: &[usize]) -> f64 {
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for l in labels {
        *counts.entry(*l).or_default() += 1;
    }
    let n = labels.len() as f64;
    counts.values().map(|&c| c as f64 / n).map(|p| -p * p.log2()).sum()
}

fn distinct(labels: &[usize]) -> f64 {
    labels.iter().collect::<BTreeSet<_>>().len() as f64
}

/// Recursive MDLP by exhaustive search: every boundary candidate of every
/// interval is evaluated from raw labels, the lowest weighted entropy wins
/// (smallest cut among ties), then the stopping rules are applied.
pub fn mdlp_oracle(values: &[f64], labels: &[usize], cfg: &MdlpConfig) -> Vec<f64> {
    let mut pairs: Vec<(f64, usize)> = values.iter().copied().zip(labels.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut cuts = Vec::new();
    split_oracle(&pairs, pairs.len(), cfg, &mut cuts);
    cuts.sort_by(f64::total_cmp);
    cuts
}

fn split_oracle(s: &[(f64, usize)], total: usize, cfg: &MdlpConfig, cuts: &mut Vec<f64>) {
    let n = s.len();
    if (n as f64) < cfg.min_split_fraction * total as f64 || n < 2 {
        return;
    }
    let labels_at = |v: f64| -> BTreeSet<usize> { s.iter().filter(|p| p.0 == v).map(|p| p.1).collect() };
    let mut candidates = Vec::new();
    for i in 1..n {
        if s[i].0 == s[i - 1].0 {
            continue;
        }
        let union: BTreeSet<usize> = labels_at(s[i - 1].0).union(&labels_at(s[i].0)).copied().collect();
        if union.len() < 2 {
            continue;
        }
        let left: Vec<usize> = s[..i].iter().map(|p| p.1).collect();
        let right: Vec<usize> = s[i..].iter().map(|p| p.1).collect();
        let e = (left.len() as f64 * entropy2(&left) + right.len() as f64 * entropy2(&right)) / n as f64;
        candidates.push((i, e));
    }
    let Some(min) = candidates.iter().map(|c| c.1).min_by(f64::total_cmp) else {
        return;
    };
    let (i, e) = *candidates.iter().find(|c| c.1 <= min + 1e-12).unwrap();

    let all: Vec<usize> = s.iter().map(|p| p.1).collect();
    let (left, right) = (&all[..i], &all[i..]);
    let gain = entropy2(&all) - e;
    let k = distinct(&all);
    let delta = (3f64.powf(k) - 2.0).log2()
        - (k * entropy2(&all) - distinct(left) * entropy2(left) - distinct(right) * entropy2(right));
    let accepted = gain > (((n - 1) as f64).log2() + delta) / n as f64;
    let floor = cfg.min_interval_fraction * total as f64;
    if !accepted || (i as f64) < floor || ((n - i) as f64) < floor {
        return;
    }
    cuts.push((s[i - 1].0 + s[i].0) / 2.0);
    split_oracle(&s[..i], total, cfg, cuts);
    split_oracle(&s[i..], total, cfg, cuts);
}

// ---------------------------------------------------------------- inference

/// Mean accumulated back to front.
pub fn mean(values: &[f64]) -> f64 {
    values.iter().rev().fold(0.0, |acc, v| acc + v) / values.len() as f64
}

/// Rank by explicit sorting: positions of the tied block, averaged.
pub fn rank_by_sorting(scores: &[f64], truth: usize) -> f64 {
    let mut sorted: Vec<f64> = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let positions: Vec<f64> = sorted
        .iter()
        .enumerate()
        .filter(|(_, s)| **s == scores[truth])
        .map(|(i, _)| i as f64 + 1.0)
        .collect();
    positions.iter().sum::<f64>() / positions.len() as f64
}

/// Displayed-rule selection in two explicit passes: best type per feature,
/// then the top `per_type` of each type by score (id breaks ties).
pub fn top_rules_oracle(rules: &[Rule], per_type: usize) -> BTreeMap<VisType, Vec<String>> {
    let type_rules: Vec<&Rule> = rules
        .iter()
        .filter(|r| matches!(r.design_choice, DesignChoice::VisType(_)))
        .collect();
    let features: BTreeSet<u32> = type_rules.iter().map(|r| r.feature_id).collect();
    let mut winners: Vec<(&Rule, VisType)> = Vec::new();
    for f in features {
        let mut mine: Vec<(&Rule, VisType)> = type_rules
            .iter()
            .filter(|r| r.feature_id == f)
            .map(|r| match r.design_choice {
                DesignChoice::VisType(v) => (*r, v),
                _ => unreachable!(),
            })
            .collect();
        mine.sort_by(|a, b| b.0.score.total_cmp(&a.0.score).then(a.1.cmp(&b.1)));
        winners.push(mine[0]);
    }
    VisType::ALL
        .into_iter()
        .map(|v| {
            let mut group: Vec<&Rule> = winners.iter().filter(|w| w.1 == v).map(|w| w.0).collect();
            group.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.id.cmp(&b.id)));
            (v, group.into_iter().take(per_type).map(|r| r.id.clone()).collect())
        })
        .collect()
}

fn interpolated_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let (lo, hi) = (pos.floor() as usize, pos.ceil() as usize);
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Which values an outlier criterion flags: Tukey fences for "1.5IQR" and
/// "3IQR", population mean ± 3σ for "3Std".
pub fn outlier_mask(values: &[f64], criterion: &str) -> Vec<bool> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = match criterion {
        "1.5IQR" | "3IQR" => {
            let k = if criterion == "3IQR" { 3.0 } else { 1.5 };
            let q1 = interpolated_quantile(&sorted, 0.25);
            let q3 = interpolated_quantile(&sorted, 0.75);
            (q1 - k * (q3 - q1), q3 + k * (q3 - q1))
        }
        "3Std" => {
            let n = values.len() as f64;
            let m = values.iter().sum::<f64>() / n;
            let sd = (values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
            (m - 3.0 * sd, m + 3.0 * sd)
        }
        other => panic!("no oracle for {other}"),
    };
    values.iter().map(|&v| v < lo || v > hi).collect()
}
