//! Rule extraction and chart assembly.
//!
//! A rule `f → v` is scored by translating the feature entity twice, first
//! through its own relation and then through the target relation, and
//! measuring how close it lands to the design choice `v`. A column's score
//! for `v` is the mean over the rules whose feature the column exhibits.

use std::collections::BTreeMap;
use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::corpus::{Axis, Table, VisType};
use crate::embed::softmax_scaled;
use crate::error::{Error, Result};
use crate::features::{self, CfGroup, CfToken, ContinuousFeature, FeatureVector};
use crate::kg::{self, DesignChoice, EntityClass, Histogram, REL_AXIS, REL_VIS_TYPE};
use crate::model::VisModel;

/// Relation that links a column to a design choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    VisType,
    Axis,
}

impl Target {
    pub fn relation_key(self) -> &'static str {
        match self {
            Target::VisType => REL_VIS_TYPE,
            Target::Axis => REL_AXIS,
        }
    }

    pub fn choices(self) -> Vec<DesignChoice> {
        match self {
            Target::VisType => VisType::ALL.into_iter().map(DesignChoice::VisType).collect(),
            Target::Axis => Axis::ALL.into_iter().map(DesignChoice::Axis).collect(),
        }
    }

    fn of(c: DesignChoice) -> Target {
        match c {
            DesignChoice::VisType(_) => Target::VisType,
            DesignChoice::Axis(_) => Target::Axis,
        }
    }
}

fn choice_label(c: DesignChoice) -> String {
    match c {
        DesignChoice::VisType(v) => v.to_string(),
        DesignChoice::Axis(a) => format!("{a}-axis"),
    }
}

/// Score of the rule `f → v` for feature entity `feature`.
pub fn rule_score(model: &VisModel, feature: u32, choice: DesignChoice) -> Result<f64> {
    let entity = model
        .vocab
        .entity(feature)
        .ok_or_else(|| Error::UnknownEntity(format!("#{feature}")))?;
    if !entity.class.is_feature() {
        return Err(Error::NotFeatureEntity(entity.key.clone()));
    }
    let rj = model
        .vocab
        .feature_relation(feature)
        .ok_or_else(|| Error::NotFeatureEntity(entity.key.clone()))?;
    let emb = &model.embedding;
    let imaginary = emb.translate(emb.entity(feature)?, emb.relation(rj)?);
    let rt = emb.relation(model.vocab.choice_relation_id(choice))?;
    let v = emb.entity(model.vocab.choice_id(choice))?;
    Ok(emb.score_vectors(&imaginary, rt, v))
}

/// Scores of one feature against all eight design choices, in
/// [`DesignChoice::all`] order.
pub fn choice_scores(model: &VisModel, feature: u32) -> Result<[f64; 8]> {
    let mut out = [0.0; 8];
    for (slot, c) in out.iter_mut().zip(DesignChoice::all()) {
        *slot = rule_score(model, feature, c)?;
    }
    Ok(out)
}

/// Display payload of a rule's condition.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Condition {
    Interval {
        feature: String,
        description: String,
        interval: usize,
        /// `None` is an open end.
        lo: Option<f64>,
        hi: Option<f64>,
        histogram: Option<HistogramView>,
    },
    Categorical {
        group: String,
        value: String,
        description: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistogramView {
    pub edges: Vec<f64>,
    pub counts: Vec<u32>,
}

impl From<&Histogram> for HistogramView {
    fn from(h: &Histogram) -> Self {
        HistogramView {
            edges: h.edges(),
            counts: h.counts.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Rule {
    pub id: String,
    pub feature: String,
    pub feature_relation: String,
    pub target: Target,
    pub choice: String,
    pub score: f64,
    /// Softmax of this feature's scores over the target's choices.
    pub confidence: BTreeMap<String, f64>,
    pub semantic_text: String,
    pub condition: Condition,
    #[serde(skip)]
    pub feature_id: u32,
    #[serde(skip)]
    pub design_choice: DesignChoice,
}

pub fn rule_id(feature_key: &str, choice: DesignChoice) -> String {
    format!("{feature_key}=>{}", choice.key())
}

fn cf_text(tok: &CfToken) -> String {
    let v = tok.value;
    let not = if v == "true" { "" } else { "not " };
    match tok.group {
        CfGroup::GeneralType => format!("the general data type of the column is {v}"),
        CfGroup::SpecificType => format!("the specific data type of the column is {v}"),
        CfGroup::NameContains => match v {
            "digit" => "the column name contains a digit".into(),
            "whitespace" => "the column name contains whitespace".into(),
            _ => format!("the column name contains \"{v}\""),
        },
        CfGroup::OutlierBy => format!("outliers exist in the column by the {v} rule"),
        CfGroup::NormalAt => format!("values in the column are normal at {v}"),
        CfGroup::Sorted => format!("values in the column are {not}sorted"),
        CfGroup::Monotonic => format!("values in the column are {not}monotonic"),
        CfGroup::LinearSpace => format!("values in the column are {not}in linear space"),
        CfGroup::LogSpace => format!("values in the column are {not}in log space"),
        CfGroup::Unique => format!("values in the column are {not}unique"),
        CfGroup::HasMissing if v == "true" => "the column has missing values".into(),
        CfGroup::HasMissing => "the column has no missing values".into(),
        CfGroup::OnlyColumn => format!("the column is {not}the only column in the dataset"),
        CfGroup::StartsWith => format!("the column name starts with {v} case"),
    }
}

fn fmt_bound(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn interval_text(desc: &str, lo: Option<f64>, hi: Option<f64>) -> String {
    match (lo, hi) {
        (None, None) => format!("{desc} takes any value"),
        (None, Some(h)) => format!("{desc} is below {}", fmt_bound(h)),
        (Some(l), None) => format!("{desc} is at least {}", fmt_bound(l)),
        (Some(l), Some(h)) => format!("{desc} is in [{}, {})", fmt_bound(l), fmt_bound(h)),
    }
}

/// Condition payload and sentence for a feature entity key.
pub fn describe_feature(model: &VisModel, key: &str) -> Result<(Condition, String)> {
    match EntityClass::of_key(key) {
        Some(EntityClass::CF) => {
            let tok: CfToken = key.parse()?;
            let text = cf_text(&tok);
            let cond = Condition::Categorical {
                group: tok.group.id().to_string(),
                value: tok.value.to_string(),
                description: text.clone(),
            };
            Ok((cond, text))
        }
        Some(EntityClass::DF) => {
            let (f, interval) = kg::parse_df_key(key).ok_or_else(|| Error::UnknownEntity(key.to_string()))?;
            let (lo, hi) = model.discretizer.interval_bounds(f.id(), interval)?;
            let text = interval_text(f.description(), lo, hi);
            let cond = Condition::Interval {
                feature: f.id().to_string(),
                description: f.description().to_string(),
                interval,
                lo,
                hi,
                histogram: model.histograms.get(f.index()).map(HistogramView::from),
            };
            Ok((cond, text))
        }
        _ => Err(Error::NotFeatureEntity(key.to_string())),
    }
}

fn confidence_map(scores: &[f64; 8], target: Target) -> BTreeMap<String, f64> {
    let (lo, hi) = match target {
        Target::VisType => (0, 6),
        Target::Axis => (6, 8),
    };
    let probs = softmax_scaled(&scores[lo..hi], 1.0);
    DesignChoice::all()
        .skip(lo)
        .zip(probs)
        .map(|(c, p)| (choice_name(c), p))
        .collect()
}

fn choice_name(c: DesignChoice) -> String {
    match c {
        DesignChoice::VisType(v) => v.to_string(),
        DesignChoice::Axis(a) => a.to_string(),
    }
}

/// Every feature entity crossed with every compatible design choice.
pub fn generate_rules(model: &VisModel) -> Result<Vec<Rule>> {
    let features: Vec<u32> = model.vocab.feature_entities().collect();
    let per_feature: Vec<Vec<Rule>> = features
        .par_iter()
        .map(|&f| {
            let entity = model.vocab.entity(f).expect("listed entity");
            let relation = model.vocab.relation(model.vocab.feature_relation(f).ok_or_else(|| {
                Error::Malformed(format!("{} has no relation in the graph", entity.key))
            })?);
            let scores = choice_scores(model, f)?;
            let (condition, text) = describe_feature(model, &entity.key)?;
            Ok(DesignChoice::all()
                .zip(scores)
                .map(|(c, score)| Rule {
                    id: rule_id(&entity.key, c),
                    feature: entity.key.clone(),
                    feature_relation: relation.map(|r| r.key.clone()).unwrap_or_default(),
                    target: Target::of(c),
                    choice: choice_name(c),
                    score,
                    confidence: confidence_map(&scores, Target::of(c)),
                    semantic_text: format!("{text} → {}", choice_label(c)),
                    condition: condition.clone(),
                    feature_id: f,
                    design_choice: c,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_feature.into_iter().flatten().collect())
}

/// Softmax of `feature`'s rule scores over the choices of `target`.
pub fn rule_confidence(model: &VisModel, feature: u32, target: Target) -> Result<BTreeMap<String, f64>> {
    Ok(confidence_map(&choice_scores(model, feature)?, target))
}

/// Mean of the matched rules' scores.
pub fn aggregate_score(scores: &[f64]) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::NoFeaturesMatched);
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// Index of the largest value; the first wins ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ColumnInference {
    pub column: usize,
    /// Feature entities the column exhibits (the rules that apply to it).
    pub matched: Vec<u32>,
    /// Indexed by [`VisType::index`].
    pub type_scores: [f64; 6],
    /// Indexed by [`Axis::index`].
    pub axis_scores: [f64; 2],
    pub vis_type: VisType,
    pub axis: Axis,
    pub diagnostics: Vec<String>,
}

impl ColumnInference {
    /// Lead of the chosen axis over the other one.
    pub fn axis_margin(&self) -> f64 {
        (self.axis_scores[1] - self.axis_scores[0]).abs()
    }
}

/// Feature entity keys a raw feature vector maps to, after clipping with the
/// training bounds.
pub fn feature_keys(model: &VisModel, fv: &FeatureVector) -> Result<Vec<String>> {
    let mut fv = fv.clone();
    features::apply_bounds(&mut fv, &model.bounds);
    let mut keys: Vec<String> = fv.categoricals.iter().map(CfToken::key).collect();
    for f in ContinuousFeature::ALL {
        let interval = model.discretizer.assign(fv.value(*f), f.id())?;
        keys.push(kg::df_key(*f, interval));
    }
    Ok(keys)
}

/// Scores every design choice for one column of a new table.
pub fn infer_column(model: &VisModel, fv: &FeatureVector) -> Result<ColumnInference> {
    let mut matched = Vec::new();
    let mut diagnostics = Vec::new();
    for key in feature_keys(model, fv)? {
        match model.vocab.entity_id(&key) {
            Some(id) if model.vocab.feature_relation(id).is_some() => matched.push(id),
            _ => diagnostics.push(format!("feature {key} not seen in training; skipped")),
        }
    }
    if matched.is_empty() {
        return Err(Error::NoFeaturesMatched);
    }
    let per_feature = matched.iter().map(|&f| choice_scores(model, f)).collect::<Result<Vec<_>>>()?;
    let mut all = [0.0; 8];
    for (c, slot) in all.iter_mut().enumerate() {
        let column: Vec<f64> = per_feature.iter().map(|s| s[c]).collect();
        *slot = aggregate_score(&column)?;
    }
    let type_scores: [f64; 6] = all[..6].try_into().unwrap();
    let axis_scores: [f64; 2] = all[6..].try_into().unwrap();
    Ok(ColumnInference {
        column: fv.column_index,
        matched,
        vis_type: VisType::ALL[argmax(&type_scores)],
        axis: Axis::ALL[argmax(&axis_scores)],
        type_scores,
        axis_scores,
        diagnostics,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Encoding {
    pub column: usize,
    pub axis: Axis,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchTag {
    None,
    X,
    Y,
    Both,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AppliedRule {
    pub rule_id: String,
    #[serde(rename = "match")]
    pub tag: MatchTag,
    pub columns: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChartRecommendation {
    pub rank: usize,
    pub vis_type: VisType,
    pub score: f64,
    pub encodings: Vec<Encoding>,
    pub applied_rules: Vec<AppliedRule>,
}

/// Ranks chart types for the whole table and places columns on axes.
pub fn assemble(inferences: &[ColumnInference], k: usize) -> Result<Vec<ChartRecommendation>> {
    if inferences.is_empty() {
        return Err(Error::InvalidInput("no column inferences to assemble".into()));
    }
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    let k = if k > VisType::ALL.len() {
        log::warn!("k = {k} exceeds the number of chart types; using {}", VisType::ALL.len());
        VisType::ALL.len()
    } else {
        k
    };
    let n = inferences.len() as f64;
    let dataset_scores: Vec<f64> = (0..6)
        .map(|v| inferences.iter().map(|c| c.type_scores[v]).sum::<f64>() / n)
        .collect();
    let mut order: Vec<usize> = (0..6).collect();
    // stable sort keeps enum order among ties
    order.sort_by(|a, b| dataset_scores[*b].total_cmp(&dataset_scores[*a]));

    Ok(order
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(rank, v)| {
            let vis_type = VisType::ALL[v];
            ChartRecommendation {
                rank: rank + 1,
                vis_type,
                score: dataset_scores[v],
                encodings: place_columns(inferences, vis_type),
                applied_rules: Vec::new(),
            }
        })
        .collect())
}

fn place_columns(inferences: &[ColumnInference], vis_type: VisType) -> Vec<Encoding> {
    if vis_type.is_single_axis() {
        let n = inferences.len() as f64;
        let mean: Vec<f64> = (0..2)
            .map(|a| inferences.iter().map(|c| c.axis_scores[a]).sum::<f64>() / n)
            .collect();
        let axis = Axis::ALL[argmax(&mean)];
        return inferences.iter().map(|c| Encoding { column: c.column, axis }).collect();
    }
    let mut out: Vec<Encoding> = inferences
        .iter()
        .map(|c| Encoding {
            column: c.column,
            axis: c.axis,
        })
        .collect();
    if out.len() > 1 && out.iter().all(|e| e.axis == out[0].axis) {
        let weakest = (0..inferences.len())
            .min_by(|&a, &b| inferences[a].axis_margin().total_cmp(&inferences[b].axis_margin()))
            .unwrap();
        out[weakest].axis = out[weakest].axis.flipped();
    }
    out
}

/// Displayed rules: each feature keeps only its best chart-type rule, then the
/// `per_type` best survivors are kept per chart type. All six types are keys.
pub fn top_rules(rules: &[Rule], per_type: usize) -> Result<BTreeMap<VisType, Vec<Rule>>> {
    if per_type == 0 {
        return Err(Error::InvalidInput("per_type must be at least 1".into()));
    }
    let mut best: BTreeMap<u32, &Rule> = BTreeMap::new();
    for r in rules {
        let DesignChoice::VisType(v) = r.design_choice else {
            continue;
        };
        match best.get(&r.feature_id) {
            Some(b) => {
                let DesignChoice::VisType(bv) = b.design_choice else { unreachable!() };
                if r.score > b.score || (r.score == b.score && v < bv) {
                    best.insert(r.feature_id, r);
                }
            }
            None => {
                best.insert(r.feature_id, r);
            }
        }
    }
    let mut groups: BTreeMap<VisType, Vec<Rule>> = VisType::ALL.into_iter().map(|v| (v, Vec::new())).collect();
    for r in best.into_values() {
        if let DesignChoice::VisType(v) = r.design_choice {
            groups.get_mut(&v).unwrap().push(r.clone());
        }
    }
    for g in groups.values_mut() {
        g.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
        g.truncate(per_type);
    }
    Ok(groups)
}

/// Tags each displayed rule of the recommendation's chart type by the axes of
/// the columns it applies to.
pub fn match_rules(
    rec: &ChartRecommendation,
    inferences: &[ColumnInference],
    displayed: &BTreeMap<VisType, Vec<Rule>>,
) -> Vec<(String, MatchTag, Vec<usize>)> {
    let axis_of: BTreeMap<usize, Axis> = rec.encodings.iter().map(|e| (e.column, e.axis)).collect();
    displayed
        .get(&rec.vis_type)
        .map(|rules| {
            rules
                .iter()
                .map(|r| {
                    let columns: Vec<usize> = inferences
                        .iter()
                        .filter(|c| c.matched.contains(&r.feature_id))
                        .map(|c| c.column)
                        .collect();
                    let on = |a: Axis| columns.iter().any(|c| axis_of.get(c) == Some(&a));
                    let tag = match (on(Axis::X), on(Axis::Y)) {
                        (true, true) => MatchTag::Both,
                        (true, false) => MatchTag::X,
                        (false, true) => MatchTag::Y,
                        (false, false) => MatchTag::None,
                    };
                    (r.id.clone(), tag, columns)
                })
                .collect()
        })
        .unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecommendationOutput {
    pub recommendations: Vec<ChartRecommendation>,
    pub columns: Vec<ColumnInference>,
    pub diagnostics: Vec<String>,
}

/// Full recommendation for a table: infers every column, assembles the top
/// `k` charts and attaches the displayed rules that apply.
pub fn recommend(
    model: &VisModel,
    table: &Table,
    k: usize,
    displayed: &BTreeMap<VisType, Vec<Rule>>,
) -> Result<RecommendationOutput> {
    if table.columns.is_empty() {
        return Err(Error::InvalidInput(format!("table {} has no columns", table.id)));
    }
    let mut diagnostics = Vec::new();
    let mut inferences = Vec::new();
    for i in 0..table.columns.len() {
        let fv = features::extract(table, i);
        match infer_column(model, &fv) {
            Ok(ci) => {
                diagnostics.extend(ci.diagnostics.iter().map(|d| format!("column {i}: {d}")));
                inferences.push(ci);
            }
            Err(Error::NoFeaturesMatched) => diagnostics.push(format!("column {i}: no features matched; skipped")),
            Err(e) => return Err(e),
        }
    }
    let mut recommendations = assemble(&inferences, k)?;
    for rec in &mut recommendations {
        rec.applied_rules = match_rules(rec, &inferences, displayed)
            .into_iter()
            .filter(|(_, tag, _)| *tag != MatchTag::None)
            .map(|(rule_id, tag, columns)| AppliedRule { rule_id, tag, columns })
            .collect();
    }
    Ok(RecommendationOutput {
        recommendations,
        columns: inferences,
        diagnostics,
    })
}

/// CSV of chart-type confidences per feature entity, one row per feature.
pub fn write_rule_matrix<W: Write>(out: W, rules: &[Rule]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["feature".to_string()];
    header.extend(VisType::ALL.iter().map(|v| v.to_string()));
    w.write_record(&header)?;
    let mut seen = std::collections::BTreeSet::new();
    for r in rules {
        if r.target != Target::VisType || !seen.insert(r.feature_id) {
            continue;
        }
        let mut row = vec![r.feature.clone()];
        row.extend(VisType::ALL.iter().map(|v| r.confidence[v.as_str()].to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
