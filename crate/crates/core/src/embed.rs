//! Translational and rotational graph embeddings trained with Adam.
//!
//! Scores follow "larger is more plausible": `g = -‖h + r - t‖` for TransE
//! and `g = -‖h ∘ r - t‖` for RotatE, so `g ≤ 0` with equality at an exact
//! fit. Both losses are written against that sign: a positive triple is
//! pushed towards `g > -γ` and a negative towards `g < -γ`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{KnowledgeGraph, Triple};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scorer {
    TransE,
    RotatE,
}

impl FromStr for Scorer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(Scorer::TransE),
            "rotate" => Ok(Scorer::RotatE),
            _ => Err(Error::InvalidInput(format!("unknown scorer \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Norm {
    L1,
    L2,
}

impl FromStr for Norm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "L1" => Ok(Norm::L1),
            "L2" => Ok(Norm::L2),
            _ => Err(Error::InvalidInput(format!("unknown norm \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    SelfAdversarial,
    MarginRanking,
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "self_adversarial" => Ok(LossKind::SelfAdversarial),
            "margin_ranking" => Ok(LossKind::MarginRanking),
            _ => Err(Error::InvalidInput(format!("unknown loss \"{s}\""))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub dim: usize,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub temperature: f64,
    pub negatives: usize,
    pub norm: Norm,
    pub seed: u64,
    pub loss: LossKind,
    pub scorer: Scorer,
    /// Project entity vectors to unit L2 norm after every update (TransE only).
    pub normalize_entities: bool,
    /// Steps between loss log lines; 0 disables logging.
    pub log_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 1000,
            batch_size: 1024,
            steps: 30000,
            learning_rate: 0.001,
            margin: 12.0,
            temperature: 1.0,
            negatives: 64,
            norm: Norm::L2,
            seed: 0,
            loss: LossKind::SelfAdversarial,
            scorer: Scorer::TransE,
            normalize_entities: false,
            log_every: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.to_string()));
        if self.dim == 0 || self.batch_size == 0 || self.steps == 0 || self.negatives == 0 {
            return bad("dim, batch_size, steps and negatives must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.margin > 0.0 && self.margin.is_finite()) {
            return bad("margin must be positive");
        }
        if !(self.temperature >= 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be non-negative");
        }
        if self.scorer == Scorer::RotatE && self.dim % 2 != 0 {
            return bad("rotate needs an even dimension");
        }
        if self.scorer == Scorer::RotatE && self.normalize_entities {
            return bad("entity normalization applies to transe only");
        }
        Ok(())
    }
}

/// Entity and relation parameters, stored row-major.
///
/// For RotatE an entity row holds real parts in `[0, d/2)` and imaginary
/// parts in `[d/2, d)`; a relation row holds `d/2` phases.
#[derive(Clone, PartialEq)]
pub struct EmbeddingModel {
    pub scorer: Scorer,
    pub norm: Norm,
    pub dim: usize,
    pub entities: Vec<f64>,
    pub relations: Vec<f64>,
}

impl fmt::Debug for EmbeddingModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("EmbeddingModel")
            .field("scorer", &self.scorer)
            .field("norm", &self.norm)
            .field("dim", &self.dim)
            .field("n_entities", &self.n_entities())
            .field("n_relations", &self.n_relations())
            .finish()
    }
}

fn norm_of(residual: impl Iterator<Item = f64>, norm: Norm) -> f64 {
    match norm {
        Norm::L1 => residual.map(f64::abs).sum(),
        Norm::L2 => residual.map(|e| e * e).sum::<f64>().sqrt(),
    }
}

impl EmbeddingModel {
    pub fn new(scorer: Scorer, norm: Norm, dim: usize, entities: Vec<f64>, relations: Vec<f64>) -> Result<Self> {
        let m = EmbeddingModel {
            scorer,
            norm,
            dim,
            entities,
            relations,
        };
        if dim == 0 || (scorer == Scorer::RotatE && dim % 2 != 0) {
            return Err(Error::InvalidInput(format!("invalid dimension {dim} for {scorer:?}")));
        }
        if m.entities.len() % dim != 0 || m.relations.len() % m.relation_dim() != 0 {
            return Err(Error::InvalidInput("parameter length is not a multiple of the row width".into()));
        }
        if m.entities.iter().chain(&m.relations).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite parameter".into()));
        }
        Ok(m)
    }

    pub fn relation_dim(&self) -> usize {
        match self.scorer {
            Scorer::TransE => self.dim,
            Scorer::RotatE => self.dim / 2,
        }
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len() / self.dim
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len() / self.relation_dim()
    }

    pub fn entity(&self, id: u32) -> Result<&[f64]> {
        let d = self.dim;
        self.entities
            .get(id as usize * d..(id as usize + 1) * d)
            .ok_or_else(|| Error::UnknownEntity(format!("#{id}")))
    }

    pub fn relation(&self, id: u32) -> Result<&[f64]> {
        let d = self.relation_dim();
        self.relations
            .get(id as usize * d..(id as usize + 1) * d)
            .ok_or_else(|| Error::UnknownRelation(format!("#{id}")))
    }

    pub fn score(&self, h: u32, r: u32, t: u32) -> Result<f64> {
        Ok(self.score_vectors(self.entity(h)?, self.relation(r)?, self.entity(t)?))
    }

    pub fn score_triple(&self, t: &Triple) -> Result<f64> {
        self.score(t.head, t.relation, t.tail)
    }

    /// Score of raw vectors laid out like this model's rows.
    pub fn score_vectors(&self, h: &[f64], r: &[f64], t: &[f64]) -> f64 {
        match self.scorer {
            Scorer::TransE => -norm_of(h.iter().zip(r).zip(t).map(|((h, r), t)| (h + r) - t), self.norm),
            Scorer::RotatE => {
                let k = self.dim / 2;
                let mut l2 = 0.0;
                let mut l1 = 0.0;
                for j in 0..k {
                    let (s, c) = r[j].sin_cos();
                    let u = (h[j] * c - h[k + j] * s) - t[j];
                    let w = (h[j] * s + h[k + j] * c) - t[k + j];
                    l2 += u * u + w * w;
                    l1 += (u * u + w * w).sqrt();
                }
                match self.norm {
                    Norm::L1 => -l1,
                    Norm::L2 => -l2.sqrt(),
                }
            }
        }
    }

    /// Applies relation `r` to `e`: `e + r` or `e ∘ r`.
    pub fn translate(&self, e: &[f64], r: &[f64]) -> Vec<f64> {
        match self.scorer {
            Scorer::TransE => e.iter().zip(r).map(|(e, r)| e + r).collect(),
            Scorer::RotatE => {
                let k = self.dim / 2;
                let mut out = vec![0.0; self.dim];
                for j in 0..k {
                    let (s, c) = r[j].sin_cos();
                    out[j] = e[j] * c - e[k + j] * s;
                    out[k + j] = e[j] * s + e[k + j] * c;
                }
                out
            }
        }
    }

    /// Rounds every parameter through `f32`, the on-disk precision.
    pub fn round_to_f32(&mut self) {
        for v in self.entities.iter_mut().chain(self.relations.iter_mut()) {
            *v = *v as f32 as f64;
        }
    }

    fn zero_gradients(&self) -> Gradients {
        Gradients {
            entities: vec![0.0; self.entities.len()],
            relations: vec![0.0; self.relations.len()],
        }
    }

    /// Writes `∂g/∂h`, `∂g/∂r`, `∂g/∂t` of one triple and returns `g`,
    /// computed exactly as [`Self::score_vectors`] does.
    fn score_grad(&self, t: &Triple, gh: &mut [f64], gr: &mut [f64], gt: &mut [f64]) -> f64 {
        let h = self.entity(t.head).expect("validated id");
        let r = self.relation(t.relation).expect("validated id");
        let tl = self.entity(t.tail).expect("validated id");
        match self.scorer {
            Scorer::TransE => {
                // residual first, into gt
                for (((e, h), r), t) in gt.iter_mut().zip(h).zip(r).zip(tl) {
                    *e = (h + r) - t;
                }
                let dist = norm_of(gt.iter().copied(), self.norm);
                // gt becomes ∂‖e‖/∂e
                match self.norm {
                    Norm::L1 => gt.iter_mut().for_each(|e| *e = sign(*e)),
                    Norm::L2 if dist > 0.0 => gt.iter_mut().for_each(|e| *e /= dist),
                    Norm::L2 => gt.fill(0.0),
                }
                // g = -‖h + r - t‖
                for ((gh, gr), gt) in gh.iter_mut().zip(gr.iter_mut()).zip(gt.iter()) {
                    *gh = -gt;
                    *gr = -gt;
                }
                -dist
            }
            Scorer::RotatE => {
                let k = self.dim / 2;
                let mut l2 = 0.0;
                let mut l1 = 0.0;
                // stash u in gt[j], w in gt[k + j]
                for j in 0..k {
                    let (s, c) = r[j].sin_cos();
                    let u = (h[j] * c - h[k + j] * s) - tl[j];
                    let w = (h[j] * s + h[k + j] * c) - tl[k + j];
                    gt[j] = u;
                    gt[k + j] = w;
                    l2 += u * u + w * w;
                    l1 += (u * u + w * w).sqrt();
                }
                let l2 = l2.sqrt();
                for j in 0..k {
                    let (s, c) = r[j].sin_cos();
                    let (u, w) = (gt[j], gt[k + j]);
                    let scale = match self.norm {
                        Norm::L2 => l2,
                        Norm::L1 => (u * u + w * w).sqrt(),
                    };
                    let (du, dw) = if scale > 0.0 { (u / scale, w / scale) } else { (0.0, 0.0) };
                    let (a, b) = (h[j], h[k + j]);
                    gh[j] = -(du * c + dw * s);
                    gh[k + j] = -(-du * s + dw * c);
                    gr[j] = -(du * (-a * s - b * c) + dw * (a * c - b * s));
                    gt[j] = du;
                    gt[k + j] = dw;
                }
                match self.norm {
                    Norm::L1 => -l1,
                    Norm::L2 => -l2,
                }
            }
        }
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Dense gradients laid out like [`EmbeddingModel`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub entities: Vec<f64>,
    pub relations: Vec<f64>,
}

impl Gradients {
    fn all_finite(&self) -> bool {
        self.entities.iter().chain(&self.relations).all(|v| v.is_finite())
    }
}

fn span(id: u32, width: usize) -> std::ops::Range<usize> {
    id as usize * width..(id as usize + 1) * width
}

fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    for (d, x) in dst.iter_mut().zip(x) {
        *d += a * x;
    }
}

/// Gradient rows produced by one positive and its negatives. Rows of the
/// positive's own head, relation and tail are accumulated in place; rows of
/// entities introduced by corruption are kept separately.
struct Contribution {
    loss: f64,
    positive: Triple,
    head: Vec<f64>,
    relation: Vec<f64>,
    tail: Vec<f64>,
    extra_rows: Vec<u32>,
    extra_data: Vec<f64>,
}

/// Per-thread buffers for the partials of one positive's triples.
struct Scratch {
    width: usize,
    partials: Vec<f64>,
}

impl Scratch {
    fn new(model: &EmbeddingModel) -> Self {
        Scratch {
            width: 2 * model.dim + model.relation_dim(),
            partials: Vec::new(),
        }
    }

    /// Scores `t` and stores its partials in slot `i`.
    fn score(&mut self, model: &EmbeddingModel, i: usize, t: &Triple) -> f64 {
        let (d, w) = (model.dim, self.width);
        if self.partials.len() < (i + 1) * w {
            self.partials.resize((i + 1) * w, 0.0);
        }
        let slot = &mut self.partials[i * w..(i + 1) * w];
        let (gh, rest) = slot.split_at_mut(d);
        let (gr, gt) = rest.split_at_mut(w - 2 * d);
        model.score_grad(t, gh, gr, gt)
    }

    fn slot(&self, model: &EmbeddingModel, i: usize) -> (&[f64], &[f64], &[f64]) {
        let (d, w) = (model.dim, self.width);
        let slot = &self.partials[i * w..(i + 1) * w];
        (&slot[..d], &slot[d..w - d], &slot[w - d..])
    }
}

impl Contribution {
    fn new(model: &EmbeddingModel, positive: Triple, n_extra: usize) -> Self {
        let (d, rd) = (model.dim, model.relation_dim());
        Contribution {
            loss: 0.0,
            positive,
            head: vec![0.0; d],
            relation: vec![0.0; rd],
            tail: vec![0.0; d],
            extra_rows: Vec::with_capacity(n_extra),
            extra_data: Vec::with_capacity(n_extra * d),
        }
    }

    /// Adds `coef` times the partials `(gh, gr, gt)` taken at triple `t`.
    fn add(&mut self, t: &Triple, coef: f64, (gh, gr, gt): (&[f64], &[f64], &[f64])) {
        axpy(&mut self.relation, coef, gr);
        for (id, part) in [(t.head, gh), (t.tail, gt)] {
            if id == self.positive.head {
                axpy(&mut self.head, coef, part);
            } else if id == self.positive.tail {
                axpy(&mut self.tail, coef, part);
            } else {
                self.extra_rows.push(id);
                self.extra_data.extend(part.iter().map(|x| coef * x));
            }
        }
    }

    fn add_into(&self, model: &EmbeddingModel, grads: &mut Gradients) {
        let d = model.dim;
        let rd = model.relation_dim();
        let p = self.positive;
        axpy(&mut grads.relations[span(p.relation, rd)], 1.0, &self.relation);
        axpy(&mut grads.entities[span(p.head, d)], 1.0, &self.head);
        if p.tail != p.head {
            axpy(&mut grads.entities[span(p.tail, d)], 1.0, &self.tail);
        }
        for (i, &id) in self.extra_rows.iter().enumerate() {
            axpy(&mut grads.entities[span(id, d)], 1.0, &self.extra_data[i * d..(i + 1) * d]);
        }
    }
}

/// Positives with their corrupted counterparts.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainBatch {
    pub positives: Vec<Triple>,
    pub negatives: Vec<Vec<Triple>>,
}

impl TrainBatch {
    fn validate(&self, model: &EmbeddingModel) -> Result<()> {
        if self.positives.is_empty() || self.positives.len() != self.negatives.len() {
            return Err(Error::InvalidInput("batch needs one negative list per positive".into()));
        }
        for (p, negs) in self.positives.iter().zip(&self.negatives) {
            if negs.is_empty() {
                return Err(Error::InvalidInput("positive without negatives".into()));
            }
            for t in std::iter::once(p).chain(negs) {
                model.entity(t.head)?;
                model.relation(t.relation)?;
                model.entity(t.tail)?;
            }
        }
        Ok(())
    }
}

/// Corrupts `triple` `n_neg` times, replacing the head or the tail (fair coin)
/// with a different entity drawn uniformly from `0..n_entities`.
pub fn sample_negatives<R: Rng>(triple: &Triple, n_entities: usize, n_neg: usize, rng: &mut R) -> Result<Vec<Triple>> {
    if n_neg == 0 {
        return Err(Error::InvalidInput("n_neg must be at least 1".into()));
    }
    if n_entities < 2 {
        return Err(Error::InvalidInput("negative sampling needs at least two entities".into()));
    }
    let n = n_entities as u32;
    let mut out = Vec::with_capacity(n_neg);
    for _ in 0..n_neg {
        let corrupt_head = rng.random_bool(0.5);
        let original = if corrupt_head { triple.head } else { triple.tail };
        let mut e = rng.random_range(0..n);
        while e == original {
            e = rng.random_range(0..n);
        }
        let mut neg = *triple;
        if corrupt_head {
            neg.head = e;
        } else {
            neg.tail = e;
        }
        out.push(neg);
    }
    Ok(out)
}

/// `softmax(α · scores)` with max subtraction.
pub fn softmax_scaled(scores: &[f64], alpha: f64) -> Vec<f64> {
    let scaled: Vec<f64> = scores.iter().map(|s| alpha * s).collect();
    let max = scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scaled.iter().map(|s| (s - max).exp()).collect();
    let z: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / z).collect()
}

/// Sampling weights of negatives: more plausible corruptions weigh more.
pub fn adversarial_weights(model: &EmbeddingModel, negatives: &[Triple], alpha: f64) -> Result<Vec<f64>> {
    if negatives.is_empty() {
        return Err(Error::InvalidInput("no negatives".into()));
    }
    let scores = negatives.iter().map(|t| model.score_triple(t)).collect::<Result<Vec<_>>>()?;
    Ok(softmax_scaled(&scores, alpha))
}

/// `-ln σ(x)`, stable for large |x|.
pub fn neg_log_sigmoid(x: f64) -> f64 {
    (-x).max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn selfadv_positive(
    model: &EmbeddingModel,
    pos: &Triple,
    negs: &[Triple],
    cfg: &TrainConfig,
    scale: f64,
    scratch: &mut Scratch,
) -> Contribution {
    let gamma = cfg.margin;
    let mut c = Contribution::new(model, *pos, negs.len());
    // slot 0 is the positive, then the negatives
    let gp = scratch.score(model, 0, pos);
    let gn: Vec<f64> = negs.iter().enumerate().map(|(i, t)| scratch.score(model, i + 1, t)).collect();
    let w = softmax_scaled(&gn, cfg.temperature);

    c.loss = neg_log_sigmoid(gamma + gp);
    c.add(pos, -scale * sigmoid(-gamma - gp), scratch.slot(model, 0));
    for (i, ((t, g), wi)) in negs.iter().zip(&gn).zip(&w).enumerate() {
        c.loss += wi * neg_log_sigmoid(-g - gamma);
        c.add(t, scale * wi * sigmoid(g + gamma), scratch.slot(model, i + 1));
    }
    c.loss *= scale;
    c
}

fn margin_positive(
    model: &EmbeddingModel,
    pos: &Triple,
    negs: &[Triple],
    cfg: &TrainConfig,
    scale: f64,
    scratch: &mut Scratch,
) -> Contribution {
    let mut c = Contribution::new(model, *pos, negs.len());
    let gp = scratch.score(model, 0, pos);
    let mut active = 0usize;
    let mut loss = 0.0;
    for t in negs {
        let gn = scratch.score(model, 1, t);
        let l = cfg.margin - gp + gn;
        if l > 0.0 {
            loss += l;
            active += 1;
            c.add(t, scale, scratch.slot(model, 1));
        }
    }
    if active > 0 {
        c.add(pos, -scale * active as f64, scratch.slot(model, 0));
    }
    c.loss = loss * scale;
    c
}

fn batch_loss(model: &EmbeddingModel, batch: &TrainBatch, cfg: &TrainConfig) -> Result<(f64, Gradients)> {
    batch.validate(model)?;
    let scale = 1.0 / batch.positives.len() as f64;
    let per_positive = |scratch: &mut Scratch, (p, negs): (&Triple, &Vec<Triple>)| match cfg.loss {
        LossKind::SelfAdversarial => selfadv_positive(model, p, negs, cfg, scale, scratch),
        LossKind::MarginRanking => margin_positive(model, p, negs, cfg, scale, scratch),
    };
    let contributions: Vec<Contribution> = batch
        .positives
        .par_iter()
        .zip(batch.negatives.par_iter())
        .map_init(|| Scratch::new(model), per_positive)
        .collect();

    // fixed-order reduction keeps training bitwise reproducible
    let mut grads = model.zero_gradients();
    let mut loss = 0.0;
    for c in &contributions {
        loss += c.loss;
        c.add_into(model, &mut grads);
    }
    if !loss.is_finite() || !grads.all_finite() {
        return Err(Error::Diverged {
            step: 0,
            detail: format!("non-finite loss or gradient (loss = {loss})"),
            checkpoint: None,
        });
    }
    Ok((loss, grads))
}

/// Self-adversarial negative-sampling loss, mean over positives:
/// `-ln σ(γ + g) - Σ wᵢ ln σ(-gᵢ - γ)` with `w = softmax(α gᵢ)` held constant.
pub fn selfadv_loss(model: &EmbeddingModel, batch: &TrainBatch, cfg: &TrainConfig) -> Result<(f64, Gradients)> {
    let cfg = TrainConfig {
        loss: LossKind::SelfAdversarial,
        ..cfg.clone()
    };
    batch_loss(model, batch, &cfg)
}

/// Margin ranking loss, mean over positives of `Σᵢ max(0, γ - g + gᵢ)`.
pub fn margin_loss(model: &EmbeddingModel, batch: &TrainBatch, cfg: &TrainConfig) -> Result<(f64, Gradients)> {
    let cfg = TrainConfig {
        loss: LossKind::MarginRanking,
        ..cfg.clone()
    };
    batch_loss(model, batch, &cfg)
}

/// Uniform `[-6/√d, 6/√d]` entities; TransE relations share that range,
/// RotatE phases are uniform in `[-π, π]`.
pub fn init_model<R: Rng>(n_entities: usize, n_relations: usize, cfg: &TrainConfig, rng: &mut R) -> Result<EmbeddingModel> {
    cfg.validate()?;
    let bound = 6.0 / (cfg.dim as f64).sqrt();
    let entities: Vec<f64> = (0..n_entities * cfg.dim).map(|_| rng.random_range(-bound..=bound)).collect();
    let relations: Vec<f64> = match cfg.scorer {
        Scorer::TransE => (0..n_relations * cfg.dim).map(|_| rng.random_range(-bound..=bound)).collect(),
        Scorer::RotatE => (0..n_relations * cfg.dim / 2)
            .map(|_| rng.random_range(-std::f64::consts::PI..=std::f64::consts::PI))
            .collect(),
    };
    EmbeddingModel::new(cfg.scorer, cfg.norm, cfg.dim, entities, relations)
}

struct Adam {
    lr: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    const BETA1: f64 = 0.9;
    const BETA2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize, lr: f64) -> Self {
        Adam {
            lr,
            t: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// One dense update of `params` (entities then relations).
    fn step(&mut self, model: &mut EmbeddingModel, grads: &Gradients) {
        self.t += 1;
        let c1 = 1.0 - Self::BETA1.powi(self.t);
        let c2 = 1.0 - Self::BETA2.powi(self.t);
        let params = model.entities.iter_mut().chain(model.relations.iter_mut());
        let gs = grads.entities.iter().chain(&grads.relations);
        for (((p, g), m), v) in params.zip(gs).zip(&mut self.m).zip(&mut self.v) {
            *m = Self::BETA1 * *m + (1.0 - Self::BETA1) * g;
            *v = Self::BETA2 * *v + (1.0 - Self::BETA2) * g * g;
            *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + Self::EPS);
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainReport {
    /// Batch loss before each update.
    pub losses: Vec<f64>,
}

impl TrainReport {
    /// CSV telemetry `step,loss`, one row every `every` steps plus the last.
    pub fn write_csv<W: Write>(&self, out: W, every: usize) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "loss"])?;
        let every = every.max(1);
        for (i, l) in self.losses.iter().enumerate() {
            if i % every == 0 || i + 1 == self.losses.len() {
                w.write_record([i.to_string(), l.to_string()])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

pub fn sample_batch<R: Rng>(kg: &KnowledgeGraph, cfg: &TrainConfig, rng: &mut R) -> Result<TrainBatch> {
    let n = kg.triples.len();
    let mut positives = Vec::with_capacity(cfg.batch_size);
    let mut negatives = Vec::with_capacity(cfg.batch_size);
    for _ in 0..cfg.batch_size {
        let p = kg.triples[rng.random_range(0..n)];
        negatives.push(sample_negatives(&p, kg.vocab.n_entities(), cfg.negatives, rng)?);
        positives.push(p);
    }
    Ok(TrainBatch { positives, negatives })
}

/// Trains on `kg` for `cfg.steps` Adam updates. The returned parameters are
/// rounded to `f32`, so they match what a saved model file holds.
pub fn train(kg: &KnowledgeGraph, cfg: &TrainConfig) -> Result<(EmbeddingModel, TrainReport)> {
    cfg.validate()?;
    if kg.triples.is_empty() {
        return Err(Error::InvalidInput("graph has no triples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut model = init_model(kg.vocab.n_entities(), kg.vocab.n_relations(), cfg, &mut rng)?;
    let mut adam = Adam::new(model.entities.len() + model.relations.len(), cfg.learning_rate);
    let mut report = TrainReport::default();

    for step in 0..cfg.steps {
        let batch = sample_batch(kg, cfg, &mut rng)?;
        let (loss, grads) = match batch_loss(&model, &batch, cfg) {
            Ok(v) => v,
            Err(Error::Diverged { detail, .. }) => {
                return Err(Error::Diverged {
                    step,
                    detail,
                    checkpoint: Some(Box::new(model)),
                })
            }
            Err(e) => return Err(e),
        };
        report.losses.push(loss);
        if cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps) {
            log::info!("step {step}: loss {loss:.6}");
        }
        adam.step(&mut model, &grads);
        if cfg.normalize_entities {
            for row in model.entities.chunks_mut(cfg.dim) {
                let n = norm_of(row.iter().copied(), Norm::L2);
                if n > 0.0 {
                    row.iter_mut().for_each(|v| *v /= n);
                }
            }
        }
    }
    model.round_to_f32();
    Ok((model, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Vocabulary;
    use std::f64::consts::{FRAC_PI_2, LN_2};

    fn transe(norm: Norm, entities: Vec<f64>, relations: Vec<f64>, dim: usize) -> EmbeddingModel {
        EmbeddingModel::new(Scorer::TransE, norm, dim, entities, relations).unwrap()
    }

    fn tr(h: u32, r: u32, t: u32) -> Triple {
        Triple { head: h, relation: r, tail: t }
    }

    #[test]
    fn transe_scores() {
        let m = transe(Norm::L2, vec![1.0, 2.0, 1.5, 2.5], vec![0.5, 0.5], 2);
        assert_eq!(m.score(0, 0, 1).unwrap(), 0.0);
        let m = transe(Norm::L2, vec![1.0, 1.0, 0.0, 0.0], vec![1.0, 1.0], 2);
        assert!((m.score(0, 0, 1).unwrap() + 8f64.sqrt()).abs() < 1e-12);
        let m1 = transe(Norm::L1, vec![1.0, 1.0, 0.0, 0.0], vec![1.0, 1.0], 2);
        assert_eq!(m1.score(0, 0, 1).unwrap(), -4.0);
        assert!(m.score(2, 0, 0).is_err());
        assert!(m.score(0, 1, 0).is_err());
    }

    #[test]
    fn rotate_scores() {
        let m = EmbeddingModel::new(Scorer::RotatE, Norm::L2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![FRAC_PI_2]).unwrap();
        // cos(π/2) is not exactly zero in floating point
        assert!(m.score(0, 0, 1).unwrap().abs() <= 1e-15);
        let m = EmbeddingModel::new(Scorer::RotatE, Norm::L2, 2, vec![0.3, -0.7, 0.3, -0.7], vec![0.0]).unwrap();
        assert_eq!(m.score(0, 0, 1).unwrap(), 0.0);
        assert!(EmbeddingModel::new(Scorer::RotatE, Norm::L2, 3, vec![0.0; 3], vec![0.0]).is_err());
    }

    #[test]
    fn weights_closed_form() {
        let w = softmax_scaled(&[0.0, -(3f64.ln())], 1.0);
        assert!((w[0] - 0.75).abs() < 1e-12 && (w[1] - 0.25).abs() < 1e-12);
        assert_eq!(softmax_scaled(&[5.0, 1.0, -2.0], 0.0), vec![1.0 / 3.0; 3]);
        let w = softmax_scaled(&[-2.0; 4], 7.0);
        assert!(w.iter().all(|x| (x - 0.25).abs() < 1e-15));
        let w = softmax_scaled(&[-1e6, 0.0], 1.0);
        assert_eq!(w, vec![0.0, 1.0]);
    }

    /// Model where the positive (0,0,1) has score `gp` and the negative
    /// (0,0,2) has score `gn`, along one axis.
    fn two_score_model(gp: f64, gn: f64) -> (EmbeddingModel, TrainBatch) {
        let m = transe(Norm::L2, vec![0.0, -gp, -gn], vec![0.0], 1);
        let batch = TrainBatch {
            positives: vec![tr(0, 0, 1)],
            negatives: vec![vec![tr(0, 0, 2)]],
        };
        (m, batch)
    }

    #[test]
    fn selfadv_loss_values() {
        let cfg = TrainConfig::default();
        let (m, b) = two_score_model(-12.0, -12.0);
        let (l, _) = selfadv_loss(&m, &b, &cfg).unwrap();
        assert!((l - 2.0 * LN_2).abs() < 1e-12);

        // frozen from 2 * log1p(exp(-12)) evaluated independently
        let (m, b) = two_score_model(0.0, -24.0);
        let (l, _) = selfadv_loss(&m, &b, &cfg).unwrap();
        assert!((l - 1.2288386955465612e-5).abs() < 1e-15, "{l}");
    }

    #[test]
    fn margin_loss_values() {
        let cfg = TrainConfig::default();
        let (m, b) = two_score_model(-3.0, -3.0);
        let (l, _) = margin_loss(&m, &b, &cfg).unwrap();
        assert_eq!(l, 12.0);
        let (m, b) = two_score_model(-1.0, -14.0);
        let (l, g) = margin_loss(&m, &b, &cfg).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.entities.iter().chain(&g.relations).all(|x| *x == 0.0));
    }

    #[test]
    fn negatives_differ_in_one_slot() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = tr(3, 0, 5);
        let negs = sample_negatives(&p, 10, 4, &mut rng).unwrap();
        assert_eq!(negs.len(), 4);
        for n in &negs {
            assert_eq!(n.relation, 0);
            assert!((n.head != p.head) ^ (n.tail != p.tail));
        }
        let again = sample_negatives(&p, 10, 4, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(negs, again);
        assert!(sample_negatives(&p, 1, 4, &mut rng).is_err());
        assert!(sample_negatives(&p, 10, 0, &mut rng).is_err());
    }

    #[test]
    fn head_tail_balance() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = tr(0, 0, 1);
        let negs = sample_negatives(&p, 50, 100_000, &mut rng).unwrap();
        let heads = negs.iter().filter(|n| n.head != p.head).count();
        let frac = heads as f64 / negs.len() as f64;
        assert!((frac - 0.5).abs() < 0.01, "{frac}");
    }

    #[test]
    fn diverged_batch_reports() {
        let (mut m, b) = two_score_model(0.0, -1.0);
        m.entities[1] = f64::MAX;
        m.entities[2] = -f64::MAX;
        match selfadv_loss(&m, &b, &TrainConfig::default()) {
            Err(Error::Diverged { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    fn toy_graph() -> KnowledgeGraph {
        let mut vocab = Vocabulary::new();
        let mut triples = Vec::new();
        let rel = vocab.intern_relation("rel:cf:sorted").unwrap();
        let f = vocab.intern_entity("CF:sorted=true").unwrap();
        for i in 0..5 {
            let d = vocab.intern_entity(&format!("D:t#{i}")).unwrap();
            triples.push(tr(f, rel, d));
            let v = vocab.choice_id(crate::kg::DesignChoice::VisType(crate::corpus::VisType::ALL[i % 6]));
            triples.push(tr(d, vocab.relation_id(crate::kg::REL_VIS_TYPE).unwrap(), v));
        }
        KnowledgeGraph {
            vocab,
            triples,
            histograms: Vec::new(),
        }
    }

    #[test]
    fn training_descends_and_is_deterministic() {
        let kg = toy_graph();
        assert_eq!(kg.triples.len(), 10);
        for (scorer, loss) in [
            (Scorer::TransE, LossKind::SelfAdversarial),
            (Scorer::RotatE, LossKind::SelfAdversarial),
            (Scorer::TransE, LossKind::MarginRanking),
        ] {
            let cfg = TrainConfig {
                dim: 8,
                batch_size: 10,
                steps: 500,
                learning_rate: 0.01,
                negatives: 4,
                margin: 2.0,
                scorer,
                loss,
                log_every: 0,
                ..Default::default()
            };
            let (m, rep) = train(&kg, &cfg).unwrap();
            let head: f64 = rep.losses[..50].iter().sum::<f64>() / 50.0;
            let tail: f64 = rep.losses[450..].iter().sum::<f64>() / 50.0;
            assert!(tail < head, "{scorer:?} {loss:?}: {head} -> {tail}");
            let (m2, _) = train(&kg, &cfg).unwrap();
            assert_eq!(m, m2);
            assert!(m.entities.iter().all(|v| *v as f32 as f64 == *v));
        }
    }

    #[test]
    fn unit_norm_projection() {
        let cfg = TrainConfig {
            dim: 4,
            batch_size: 4,
            steps: 5,
            negatives: 2,
            normalize_entities: true,
            log_every: 0,
            ..Default::default()
        };
        let (m, _) = train(&toy_graph(), &cfg).unwrap();
        for row in m.entities.chunks(4) {
            let n: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn telemetry_csv() {
        let rep = TrainReport {
            losses: vec![3.0, 2.0, 1.5, 1.0],
        };
        let mut out = Vec::new();
        rep.write_csv(&mut out, 2).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "step,loss\n0,3\n2,1.5\n3,1\n");
    }
}
