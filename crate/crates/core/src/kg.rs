//! Knowledge graph over data features, data columns and design choices.
//!
//! Entity keys carry their class as a prefix:
//!
//! | class | example key            | meaning                                   |
//! |-------|------------------------|-------------------------------------------|
//! | V     | `V:vis_type=line`      | a design choice (6 chart types, 2 axes)   |
//! | DF    | `DF:entropy#3`         | interval 3 of a discretized feature       |
//! | CF    | `CF:sorted=true`       | a categorical feature token               |
//! | D     | `D:tbl17#2`            | column 2 of table `tbl17`                 |
//!
//! Triples are `(CF, rel:cf:<group>, D)`, `(DF, rel:df:<feature>, D)` and
//! `(D, rel:vis_type | rel:axis, V)`. Every feature entity owns exactly one
//! relation, which is derivable from its key.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::container;
use crate::corpus::{Axis, VisLabel, VisType};
use crate::discretize::Discretizer;
use crate::error::{Error, Result};
use crate::features::{CfGroup, CfToken, ContinuousFeature, FeatureVector, N_CONTINUOUS, REGISTRY_VERSION};

pub const REL_VIS_TYPE: &str = "rel:vis_type";
pub const REL_AXIS: &str = "rel:axis";
/// Relation slots defined by the schema: 2 design-choice, 13 categorical, 50 continuous.
pub const RELATION_SLOTS: usize = 2 + 13 + N_CONTINUOUS;
pub const HISTOGRAM_BINS: usize = 30;

const GRAPH_MAGIC: &[u8; 4] = b"KG4V";
const GRAPH_FORMAT: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EntityClass {
    V,
    DF,
    CF,
    D,
}

impl EntityClass {
    pub fn of_key(key: &str) -> Option<EntityClass> {
        let (prefix, _) = key.split_once(':')?;
        match prefix {
            "V" => Some(EntityClass::V),
            "DF" => Some(EntityClass::DF),
            "CF" => Some(EntityClass::CF),
            "D" => Some(EntityClass::D),
            _ => None,
        }
    }

    pub fn is_feature(self) -> bool {
        matches!(self, EntityClass::DF | EntityClass::CF)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelationClass {
    DToV,
    CfToD,
    DfToD,
}

impl RelationClass {
    pub fn of_key(key: &str) -> Option<RelationClass> {
        if key == REL_VIS_TYPE || key == REL_AXIS {
            Some(RelationClass::DToV)
        } else if key.strip_prefix("rel:cf:").and_then(CfGroup::from_id).is_some() {
            Some(RelationClass::CfToD)
        } else if key.strip_prefix("rel:df:").and_then(ContinuousFeature::from_id).is_some() {
            Some(RelationClass::DfToD)
        } else {
            None
        }
    }
}

pub fn vis_type_key(v: VisType) -> String {
    format!("V:vis_type={v}")
}

pub fn axis_key(a: Axis) -> String {
    format!("V:axis={a}")
}

pub fn df_key(f: ContinuousFeature, interval: usize) -> String {
    format!("DF:{}#{interval}", f.id())
}

pub fn column_key(table_id: &str, column_index: usize) -> String {
    format!("D:{table_id}#{column_index}")
}

pub fn cf_relation_key(g: CfGroup) -> String {
    format!("rel:cf:{}", g.id())
}

pub fn df_relation_key(f: ContinuousFeature) -> String {
    format!("rel:df:{}", f.id())
}

/// Splits a DF key into its feature and interval index.
pub fn parse_df_key(key: &str) -> Option<(ContinuousFeature, usize)> {
    let rest = key.strip_prefix("DF:")?;
    let (id, idx) = rest.rsplit_once('#')?;
    Some((ContinuousFeature::from_id(id)?, idx.parse().ok()?))
}

/// The relation a feature entity connects through, derived from its key.
pub fn feature_relation_key(entity_key: &str) -> Option<String> {
    match EntityClass::of_key(entity_key)? {
        EntityClass::CF => {
            let tok: CfToken = entity_key.parse().ok()?;
            Some(cf_relation_key(tok.group))
        }
        EntityClass::DF => parse_df_key(entity_key).map(|(f, _)| df_relation_key(f)),
        _ => None,
    }
}

/// The design choice a V entity stands for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DesignChoice {
    VisType(VisType),
    Axis(Axis),
}

impl DesignChoice {
    pub fn key(self) -> String {
        match self {
            DesignChoice::VisType(v) => vis_type_key(v),
            DesignChoice::Axis(a) => axis_key(a),
        }
    }

    pub fn relation_key(self) -> &'static str {
        match self {
            DesignChoice::VisType(_) => REL_VIS_TYPE,
            DesignChoice::Axis(_) => REL_AXIS,
        }
    }

    pub fn all() -> impl Iterator<Item = DesignChoice> {
        VisType::ALL
            .into_iter()
            .map(DesignChoice::VisType)
            .chain(Axis::ALL.into_iter().map(DesignChoice::Axis))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entity {
    pub key: String,
    pub class: EntityClass,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Relation {
    pub key: String,
    pub class: RelationClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

/// Entity and relation registries with id lookup.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocabulary {
    entities: Vec<Entity>,
    relations: Vec<Relation>,
    entity_index: HashMap<String, u32>,
    relation_index: HashMap<String, u32>,
    /// Associated relation of each feature entity.
    feature_relation: Vec<Option<u32>>,
}

impl Vocabulary {
    /// Registry seeded with the eight design-choice entities and the two
    /// design-choice relations, so their ids are stable across graphs.
    pub fn new() -> Self {
        let mut v = Vocabulary::default();
        for c in DesignChoice::all() {
            v.intern_entity(&c.key()).unwrap();
        }
        v.intern_relation(REL_VIS_TYPE).unwrap();
        v.intern_relation(REL_AXIS).unwrap();
        v
    }

    pub fn from_keys(entities: &[String], relations: &[String]) -> Result<Self> {
        let mut v = Vocabulary::default();
        for r in relations {
            if v.relation_index.contains_key(r) {
                return Err(Error::Malformed(format!("duplicate relation {r}")));
            }
            v.intern_relation(r)?;
        }
        for e in entities {
            if v.entity_index.contains_key(e) {
                return Err(Error::Malformed(format!("duplicate entity {e}")));
            }
            v.intern_entity(e)?;
        }
        Ok(v)
    }

    pub fn intern_relation(&mut self, key: &str) -> Result<u32> {
        if let Some(&id) = self.relation_index.get(key) {
            return Ok(id);
        }
        let class = RelationClass::of_key(key).ok_or_else(|| Error::UnknownRelation(key.to_string()))?;
        let id = self.relations.len() as u32;
        self.relations.push(Relation {
            key: key.to_string(),
            class,
        });
        self.relation_index.insert(key.to_string(), id);
        // link feature entities interned before their relation
        for (e, slot) in self.entities.iter().zip(self.feature_relation.iter_mut()) {
            if slot.is_none() && feature_relation_key(&e.key).as_deref() == Some(key) {
                *slot = Some(id);
            }
        }
        Ok(id)
    }

    pub fn intern_entity(&mut self, key: &str) -> Result<u32> {
        if let Some(&id) = self.entity_index.get(key) {
            return Ok(id);
        }
        let class = EntityClass::of_key(key).ok_or_else(|| Error::UnknownEntity(key.to_string()))?;
        let rel = match class {
            EntityClass::CF | EntityClass::DF => {
                let rk = feature_relation_key(key).ok_or_else(|| Error::UnknownEntity(key.to_string()))?;
                self.relation_index.get(&rk).copied()
            }
            _ => None,
        };
        if class == EntityClass::V && !DesignChoice::all().any(|c| c.key() == key) {
            return Err(Error::UnknownEntity(key.to_string()));
        }
        let id = self.entities.len() as u32;
        self.entities.push(Entity {
            key: key.to_string(),
            class,
        });
        self.feature_relation.push(rel);
        self.entity_index.insert(key.to_string(), id);
        Ok(id)
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn n_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn n_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity_id(&self, key: &str) -> Option<u32> {
        self.entity_index.get(key).copied()
    }

    pub fn relation_id(&self, key: &str) -> Option<u32> {
        self.relation_index.get(key).copied()
    }

    pub fn entity(&self, id: u32) -> Option<&Entity> {
        self.entities.get(id as usize)
    }

    pub fn relation(&self, id: u32) -> Option<&Relation> {
        self.relations.get(id as usize)
    }

    pub fn choice_id(&self, c: DesignChoice) -> u32 {
        self.entity_index[&c.key()]
    }

    pub fn choice_relation_id(&self, c: DesignChoice) -> u32 {
        self.relation_index[c.relation_key()]
    }

    /// The unique relation of a feature entity.
    pub fn feature_relation(&self, entity: u32) -> Option<u32> {
        self.feature_relation.get(entity as usize).copied().flatten()
    }

    /// Ids of all DF and CF entities, ascending.
    pub fn feature_entities(&self) -> impl Iterator<Item = u32> + '_ {
        self.entities
            .iter()
            .enumerate()
            .filter(|(_, e)| e.class.is_feature())
            .map(|(i, _)| i as u32)
    }

    /// Checks that a triple has one of the three legal shapes and that a
    /// feature head uses its own relation.
    pub fn check_triple(&self, t: &Triple) -> Result<()> {
        let (h, r, tl) = match (self.entity(t.head), self.relation(t.relation), self.entity(t.tail)) {
            (Some(h), Some(r), Some(tl)) => (h, r, tl),
            _ => return Err(Error::Malformed(format!("triple {t:?} references unknown ids"))),
        };
        let legal = matches!(
            (h.class, r.class, tl.class),
            (EntityClass::CF, RelationClass::CfToD, EntityClass::D)
                | (EntityClass::DF, RelationClass::DfToD, EntityClass::D)
                | (EntityClass::D, RelationClass::DToV, EntityClass::V)
        );
        if !legal {
            return Err(Error::Malformed(format!(
                "illegal triple shape ({}, {}, {})",
                h.key, r.key, tl.key
            )));
        }
        if h.class.is_feature() && self.feature_relation(t.head) != Some(t.relation) {
            return Err(Error::Malformed(format!("{} is not linked through {}", h.key, r.key)));
        }
        if r.class == RelationClass::DToV {
            let want = if r.key == REL_VIS_TYPE { "V:vis_type=" } else { "V:axis=" };
            if !tl.key.starts_with(want) {
                return Err(Error::Malformed(format!("{} cannot take tail {}", r.key, tl.key)));
            }
        }
        Ok(())
    }
}

/// Training distribution of one continuous feature over its winsorized range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u32>,
}

impl Histogram {
    pub fn from_values(values: &[f64]) -> Histogram {
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if lo.is_finite() { (lo, hi) } else { (0.0, 0.0) };
        let mut counts = vec![0u32; HISTOGRAM_BINS];
        let width = (hi - lo) / HISTOGRAM_BINS as f64;
        for &v in values {
            let bin = if width > 0.0 {
                (((v - lo) / width) as usize).min(HISTOGRAM_BINS - 1)
            } else {
                0
            };
            counts[bin] += 1;
        }
        Histogram { lo, hi, counts }
    }

    pub fn edges(&self) -> Vec<f64> {
        let width = (self.hi - self.lo) / HISTOGRAM_BINS as f64;
        (0..=HISTOGRAM_BINS).map(|i| self.lo + width * i as f64).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnowledgeGraph {
    pub vocab: Vocabulary,
    pub triples: Vec<Triple>,
    /// Indexed by [`ContinuousFeature::index`].
    pub histograms: Vec<Histogram>,
}

/// Triples of one labeled column as `(head, relation, tail)` keys.
///
/// `fv` must already be winsorized with the training bounds.
pub fn column_triple_keys(
    fv: &FeatureVector,
    label: VisLabel,
    disc: &Discretizer,
) -> Result<Vec<(String, String, String)>> {
    let column = column_key(&fv.table_id, fv.column_index);
    let mut out = Vec::with_capacity(fv.categoricals.len() + N_CONTINUOUS + 2);
    for tok in &fv.categoricals {
        out.push((tok.key(), cf_relation_key(tok.group), column.clone()));
    }
    for f in ContinuousFeature::ALL {
        let interval = disc.assign(fv.value(*f), f.id())?;
        out.push((df_key(*f, interval), df_relation_key(*f), column.clone()));
    }
    out.push((column.clone(), REL_VIS_TYPE.to_string(), vis_type_key(label.vis_type)));
    out.push((column, REL_AXIS.to_string(), axis_key(label.axis)));
    Ok(out)
}

/// Accumulates triples column by column, collapsing duplicates.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    vocab: Vocabulary,
    triples: Vec<Triple>,
    seen: HashSet<Triple>,
}

impl GraphBuilder {
    pub fn new() -> Self {
        GraphBuilder {
            vocab: Vocabulary::new(),
            ..Default::default()
        }
    }

    /// Interns the column's triples and returns them (duplicates included).
    pub fn column_triples(&mut self, fv: &FeatureVector, label: VisLabel, disc: &Discretizer) -> Result<Vec<Triple>> {
        let keys = column_triple_keys(fv, label, disc)?;
        let mut out = Vec::with_capacity(keys.len());
        for (h, r, t) in keys {
            let relation = self.vocab.intern_relation(&r)?;
            let triple = Triple {
                head: self.vocab.intern_entity(&h)?,
                relation,
                tail: self.vocab.intern_entity(&t)?,
            };
            if self.seen.insert(triple) {
                self.triples.push(triple);
            }
            out.push(triple);
        }
        Ok(out)
    }

    pub fn finish(self, histograms: Vec<Histogram>) -> KnowledgeGraph {
        KnowledgeGraph {
            vocab: self.vocab,
            triples: self.triples,
            histograms,
        }
    }
}

/// Builds the graph from winsorized training vectors and their labels.
pub fn build_graph(columns: &[(FeatureVector, VisLabel)], disc: &Discretizer) -> Result<KnowledgeGraph> {
    if columns.is_empty() {
        return Err(Error::InvalidInput("empty training split".into()));
    }
    let mut builder = GraphBuilder::new();
    for (fv, label) in columns {
        builder.column_triples(fv, *label, disc)?;
    }
    let histograms = (0..N_CONTINUOUS)
        .map(|f| {
            let values: Vec<f64> = columns.iter().map(|(fv, _)| fv.continuous[f]).collect();
            Histogram::from_values(&values)
        })
        .collect();
    let kg = builder.finish(histograms);
    log::info!(
        "graph: {} entities, {} triples, {} of {} relation slots instantiated",
        kg.vocab.n_entities(),
        kg.triples.len(),
        kg.vocab.n_relations(),
        RELATION_SLOTS
    );
    Ok(kg)
}

#[derive(Serialize, Deserialize)]
struct GraphMeta {
    entities: Vec<String>,
    relations: Vec<String>,
    histograms: BTreeMap<String, Histogram>,
}

pub(crate) fn histograms_to_map(h: &[Histogram]) -> BTreeMap<String, Histogram> {
    ContinuousFeature::ALL
        .iter()
        .zip(h)
        .map(|(f, h)| (f.id().to_string(), h.clone()))
        .collect()
}

pub(crate) fn histograms_from_map(mut m: BTreeMap<String, Histogram>) -> Result<Vec<Histogram>> {
    if m.is_empty() {
        return Ok(Vec::new());
    }
    ContinuousFeature::ALL
        .iter()
        .map(|f| {
            m.remove(f.id())
                .ok_or_else(|| Error::Malformed(format!("missing histogram for {}", f.id())))
        })
        .collect()
}

impl KnowledgeGraph {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = container::Writer::new(GRAPH_MAGIC, GRAPH_FORMAT);
        w.short_str(REGISTRY_VERSION);
        let meta = GraphMeta {
            entities: self.vocab.entities().iter().map(|e| e.key.clone()).collect(),
            relations: self.vocab.relations().iter().map(|r| r.key.clone()).collect(),
            histograms: histograms_to_map(&self.histograms),
        };
        w.block(&serde_json::to_vec(&meta)?);
        w.u64(self.triples.len() as u64);
        for t in &self.triples {
            w.u32(t.head);
            w.u32(t.relation);
            w.u32(t.tail);
        }
        Ok(w.buf)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<KnowledgeGraph> {
        let (mut r, format) = container::Reader::open(bytes, GRAPH_MAGIC)?;
        if format != GRAPH_FORMAT {
            return Err(Error::Malformed(format!("unsupported graph format {format}")));
        }
        let version = r.short_str()?;
        if version != REGISTRY_VERSION {
            return Err(Error::VersionMismatch {
                expected: REGISTRY_VERSION.to_string(),
                found: version,
            });
        }
        let meta: GraphMeta = serde_json::from_slice(r.block()?)?;
        let n = usize::try_from(r.u64()?).map_err(|_| Error::Malformed("triple count overflow".into()))?;
        let flat = r.u32s(n.checked_mul(3).ok_or_else(|| Error::Malformed("triple count overflow".into()))?)?;
        r.finish()?;

        let vocab = Vocabulary::from_keys(&meta.entities, &meta.relations)?;
        let mut seen = HashSet::with_capacity(n);
        let mut triples = Vec::with_capacity(n);
        for c in flat.chunks_exact(3) {
            let t = Triple {
                head: c[0],
                relation: c[1],
                tail: c[2],
            };
            vocab.check_triple(&t)?;
            if !seen.insert(t) {
                return Err(Error::Malformed(format!("duplicate triple {t:?}")));
            }
            triples.push(t);
        }
        Ok(KnowledgeGraph {
            vocab,
            triples,
            histograms: histograms_from_map(meta.histograms)?,
        })
    }
}

pub fn save_graph(kg: &KnowledgeGraph, path: &Path) -> Result<()> {
    std::fs::write(path, kg.to_bytes()?)?;
    Ok(())
}

pub fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    KnowledgeGraph::from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{infer_column_types, Table};
    use crate::features;

    fn labeled(table_id: &str, cells: &[&str], vis: VisType, axis: Axis) -> (FeatureVector, VisLabel) {
        let raw: Vec<Option<&str>> = cells.iter().map(|c| Some(*c)).collect();
        let table = Table {
            id: table_id.into(),
            columns: vec![infer_column_types(&raw, "value").unwrap()],
        };
        (features::extract(&table, 0), VisLabel { vis_type: vis, axis })
    }

    fn all_single_interval() -> Discretizer {
        Discretizer::from_cuts(ContinuousFeature::ALL.iter().map(|f| (f.id().to_string(), vec![]))).unwrap()
    }

    #[test]
    fn triple_count_per_column() {
        let (fv, label) = labeled("t", &["3", "1", "2"], VisType::Line, Axis::Y);
        let keys = column_triple_keys(&fv, label, &all_single_interval()).unwrap();
        assert_eq!(keys.len(), fv.categoricals.len() + N_CONTINUOUS + 2);
        assert!(keys.contains(&(
            "CF:sorted=false".into(),
            "rel:cf:sorted".into(),
            "D:t#0".into()
        )));
        assert!(keys.contains(&("D:t#0".into(), REL_AXIS.into(), "V:axis=y".into())));
    }

    #[test]
    fn df_entity_from_assign() {
        let (fv, label) = labeled("t", &["1", "2", "3", "4"], VisType::Bar, Axis::X);
        let e = fv.value(ContinuousFeature::Entropy);
        let mut cuts: Vec<(String, Vec<f64>)> =
            ContinuousFeature::ALL.iter().map(|f| (f.id().to_string(), vec![])).collect();
        cuts[ContinuousFeature::Entropy.index()].1 = vec![e - 3.0, e - 2.0, e - 1.0, e + 1.0];
        let disc = Discretizer::from_cuts(cuts).unwrap();
        let keys = column_triple_keys(&fv, label, &disc).unwrap();
        assert!(keys.iter().any(|(h, r, _)| h == "DF:entropy#3" && r == "rel:df:entropy"));
    }

    #[test]
    fn shared_features_union() {
        let a = labeled("a", &["1", "2", "3"], VisType::Bar, Axis::X);
        let b = labeled("b", &["1", "2", "3"], VisType::Bar, Axis::X);
        let kg = build_graph(&[a.clone(), b], &all_single_interval()).unwrap();
        let n_features = a.0.categoricals.len() + N_CONTINUOUS;
        assert_eq!(kg.vocab.n_entities(), n_features + 2 + 8);
        assert_eq!(kg.triples.len(), 2 * (n_features + 2));
        for e in kg.vocab.feature_entities() {
            let rel = kg.vocab.feature_relation(e).unwrap();
            let want = feature_relation_key(&kg.vocab.entity(e).unwrap().key).unwrap();
            assert_eq!(kg.vocab.relation(rel).unwrap().key, want);
        }
        assert!(build_graph(&[], &all_single_interval()).is_err());
    }

    #[test]
    fn boolean_entities_are_relation_scoped() {
        let mut v = Vocabulary::new();
        let a = v.intern_entity("CF:sorted=true").unwrap();
        let b = v.intern_entity("CF:unique=true").unwrap();
        assert_ne!(a, b);
        let r = v.intern_relation("rel:cf:sorted").unwrap();
        assert_eq!(v.feature_relation(a), Some(r));
        assert_eq!(v.feature_relation(b), None);
        assert!(v.intern_entity("V:vis_type=pie").is_err());
        assert!(v.intern_entity("Q:thing").is_err());
        assert!(v.intern_relation("rel:cf:colour").is_err());
    }

    #[test]
    fn illegal_shapes_rejected() {
        let mut v = Vocabulary::new();
        let d = v.intern_entity("D:t#0").unwrap();
        let cf = v.intern_entity("CF:sorted=true").unwrap();
        let rs = v.intern_relation("rel:cf:sorted").unwrap();
        let ru = v.intern_relation("rel:cf:unique").unwrap();
        let bar = v.choice_id(DesignChoice::VisType(VisType::Bar));
        let rv = v.relation_id(REL_VIS_TYPE).unwrap();
        let ra = v.relation_id(REL_AXIS).unwrap();
        let ok = |h, r, t| v.check_triple(&Triple { head: h, relation: r, tail: t }).is_ok();
        assert!(ok(cf, rs, d));
        assert!(ok(d, rv, bar));
        assert!(!ok(cf, ru, d));
        assert!(!ok(d, rs, cf));
        assert!(!ok(cf, rv, bar));
        assert!(!ok(d, ra, bar));
    }

    #[test]
    fn histogram_bins() {
        let h = Histogram::from_values(&[0.0, 1.0, 2.0, 3.0]);
        assert_eq!(h.counts.len(), HISTOGRAM_BINS);
        assert_eq!(h.counts.iter().sum::<u32>(), 4);
        assert_eq!(h.counts[0], 1);
        assert_eq!(h.counts[HISTOGRAM_BINS - 1], 1);
        assert_eq!(h.edges().len(), HISTOGRAM_BINS + 1);
        let flat = Histogram::from_values(&[2.0, 2.0]);
        assert_eq!(flat.counts[0], 2);
    }

    #[test]
    fn file_round_trip_and_errors() {
        let a = labeled("a", &["1", "5", "3"], VisType::Scatter, Axis::X);
        let b = labeled("b", &["x", "y"], VisType::Bar, Axis::Y);
        let kg = build_graph(&[a, b], &all_single_interval()).unwrap();
        let bytes = kg.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"KG4V");
        assert_eq!(KnowledgeGraph::from_bytes(&bytes).unwrap(), kg);

        for cut in [3, 10, bytes.len() / 2, bytes.len() - 1] {
            assert!(KnowledgeGraph::from_bytes(&bytes[..cut]).is_err(), "truncated at {cut}");
        }

        // rewrite the registry version to an older one of the same length
        let mut old = bytes.clone();
        let at = 12;
        assert_eq!(&old[at..at + 6], b"reg-v1");
        old[at + 5] = b'0';
        match KnowledgeGraph::from_bytes(&old) {
            Err(Error::VersionMismatch { expected, found }) => {
                assert_eq!(expected, "reg-v1");
                assert_eq!(found, "reg-v0");
            }
            other => panic!("expected version mismatch, got {other:?}"),
        }
        let msg = KnowledgeGraph::from_bytes(&old).unwrap_err().to_string();
        assert!(msg.contains("registry version mismatch"));
    }
}
