//! Supervised MDLP discretization of continuous features.
//!
//! Each feature is split recursively (Fayyad–Irani) using the chart type of
//! the training columns as the class label, with two proportion constraints:
//! an interval is only split when it holds at least `min_split_fraction` of
//! the full sample, and both children must hold at least
//! `min_interval_fraction` of it.
//!
//! Intervals are half-open and lower-inclusive: `(-inf, c1), [c1, c2), ..., [c_m-1, +inf)`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::VisType;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MdlpConfig {
    pub min_split_fraction: f64,
    pub min_interval_fraction: f64,
}

impl Default for MdlpConfig {
    fn default() -> Self {
        MdlpConfig {
            min_split_fraction: 0.1,
            min_interval_fraction: 0.05,
        }
    }
}

impl MdlpConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.min_interval_fraction > 0.0
            && self.min_interval_fraction <= self.min_split_fraction
            && self.min_split_fraction < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "MDLP fractions must satisfy 0 < min_interval ({}) <= min_split ({}) < 1",
                self.min_interval_fraction, self.min_split_fraction
            )))
        }
    }
}

/// Equal-gain candidates closer than this are ties.
const TIE_EPS: f64 = 1e-12;

fn entropy_bits(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

fn n_present(counts: &[usize]) -> usize {
    counts.iter().filter(|&&c| c > 0).count()
}

/// A run of equal values and its per-class counts.
struct Block {
    value: f64,
    counts: Vec<usize>,
}

struct Splitter<'a> {
    blocks: &'a [Block],
    n_classes: usize,
    n_total: usize,
    cfg: MdlpConfig,
}

impl Splitter<'_> {
    fn range_counts(&self, a: usize, b: usize) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes];
        for block in &self.blocks[a..b] {
            for (c, n) in counts.iter_mut().zip(&block.counts) {
                *c += n;
            }
        }
        counts
    }

    fn is_boundary(&self, i: usize) -> bool {
        let (l, r) = (&self.blocks[i - 1].counts, &self.blocks[i].counts);
        let union = l.iter().zip(r).filter(|(a, b)| **a + **b > 0).count();
        union > 1
    }

    fn split(&self, a: usize, b: usize, cuts: &mut Vec<f64>) {
        let parent = self.range_counts(a, b);
        let n: usize = parent.iter().sum();
        if (n as f64) < self.cfg.min_split_fraction * self.n_total as f64 {
            return;
        }

        // sweep boundary candidates, keep the one with the smallest weighted entropy
        let mut left = vec![0; self.n_classes];
        let mut best: Option<(usize, f64, Vec<usize>)> = None;
        for i in a + 1..b {
            for (c, k) in left.iter_mut().zip(&self.blocks[i - 1].counts) {
                *c += k;
            }
            if !self.is_boundary(i) {
                continue;
            }
            let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
            let n1: usize = left.iter().sum();
            let e = (n1 as f64 / n as f64) * entropy_bits(&left)
                + ((n - n1) as f64 / n as f64) * entropy_bits(&right);
            if best.as_ref().is_none_or(|(_, be, _)| e < be - TIE_EPS) {
                best = Some((i, e, left.clone()));
            }
        }
        let Some((i, weighted, left)) = best else {
            return;
        };
        let right: Vec<usize> = parent.iter().zip(&left).map(|(p, l)| p - l).collect();
        let n1: usize = left.iter().sum();
        let n2 = n - n1;

        let ent = entropy_bits(&parent);
        let (e1, e2) = (entropy_bits(&left), entropy_bits(&right));
        let gain = ent - weighted;
        let k = n_present(&parent) as f64;
        let (k1, k2) = (n_present(&left) as f64, n_present(&right) as f64);
        let delta = (3f64.powf(k) - 2.0).log2() - (k * ent - k1 * e1 - k2 * e2);
        let threshold = (((n - 1) as f64).log2() + delta) / n as f64;

        let min_child = self.cfg.min_interval_fraction * self.n_total as f64;
        if gain <= threshold || (n1 as f64) < min_child || (n2 as f64) < min_child {
            return;
        }
        self.split(a, i, cuts);
        cuts.push((self.blocks[i - 1].value + self.blocks[i].value) / 2.0);
        self.split(i, b, cuts);
    }
}

/// MDLP cut points for integer class labels in `0..n_classes`.
pub fn mdlp_cuts_by_class(
    values: &[f64],
    classes: &[usize],
    n_classes: usize,
    cfg: &MdlpConfig,
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if values.len() != classes.len() {
        return Err(Error::InvalidInput(format!(
            "{} values but {} labels",
            values.len(),
            classes.len()
        )));
    }
    if values.is_empty() {
        return Err(Error::InvalidInput("cannot discretize an empty sample".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite value {v}")));
    }
    if let Some(c) = classes.iter().find(|&&c| c >= n_classes) {
        return Err(Error::InvalidInput(format!("class {c} out of range")));
    }

    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut blocks: Vec<Block> = Vec::new();
    for i in order {
        match blocks.last_mut() {
            Some(b) if b.value == values[i] => b.counts[classes[i]] += 1,
            _ => {
                let mut counts = vec![0; n_classes];
                counts[classes[i]] = 1;
                blocks.push(Block {
                    value: values[i],
                    counts,
                });
            }
        }
    }

    let splitter = Splitter {
        blocks: &blocks,
        n_classes,
        n_total: values.len(),
        cfg: *cfg,
    };
    let mut cuts = Vec::new();
    splitter.split(0, blocks.len(), &mut cuts);
    Ok(cuts)
}

/// MDLP cut points of one feature labeled by chart type.
pub fn mdlp_cuts(values: &[f64], labels: &[VisType], cfg: &MdlpConfig) -> Result<Vec<f64>> {
    let classes: Vec<usize> = labels.iter().map(|l| l.index()).collect();
    mdlp_cuts_by_class(values, &classes, VisType::ALL.len(), cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureCuts {
    pub cuts: Vec<f64>,
}

/// Fitted cut points per feature id. Serializes as `{feature_id: {"cuts": [..]}}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Discretizer {
    features: BTreeMap<String, FeatureCuts>,
}

impl Discretizer {
    /// Fits every feature independently. `matrix[f]` are the (winsorized)
    /// values of feature `ids[f]`, aligned with `labels`.
    pub fn fit(ids: &[&str], matrix: &[Vec<f64>], labels: &[VisType], cfg: &MdlpConfig) -> Result<Discretizer> {
        if ids.len() != matrix.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature ids but {} feature rows",
                ids.len(),
                matrix.len()
            )));
        }
        let fitted: Vec<(String, FeatureCuts)> = ids
            .par_iter()
            .zip(matrix.par_iter())
            .map(|(id, values)| Ok((id.to_string(), FeatureCuts { cuts: mdlp_cuts(values, labels, cfg)? })))
            .collect::<Result<_>>()?;
        Ok(Discretizer {
            features: fitted.into_iter().collect(),
        })
    }

    pub fn from_cuts(cuts: impl IntoIterator<Item = (String, Vec<f64>)>) -> Result<Discretizer> {
        let mut features = BTreeMap::new();
        for (id, c) in cuts {
            if c.windows(2).any(|w| w[0] >= w[1]) || c.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!("cuts of {id} are not strictly increasing")));
            }
            features.insert(id, FeatureCuts { cuts: c });
        }
        Ok(Discretizer { features })
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn cuts(&self, feature_id: &str) -> Result<&[f64]> {
        self.features
            .get(feature_id)
            .map(|f| f.cuts.as_slice())
            .ok_or_else(|| Error::UnknownFeature(feature_id.to_string()))
    }

    pub fn interval_count(&self, feature_id: &str) -> Result<usize> {
        Ok(self.cuts(feature_id)?.len() + 1)
    }

    /// Interval index of `value`; total over all reals.
    pub fn assign(&self, value: f64, feature_id: &str) -> Result<usize> {
        Ok(self.cuts(feature_id)?.partition_point(|&c| c <= value))
    }

    /// `[lo, hi)` of an interval; `None` stands for an infinite end.
    pub fn interval_bounds(&self, feature_id: &str, index: usize) -> Result<(Option<f64>, Option<f64>)> {
        let cuts = self.cuts(feature_id)?;
        if index > cuts.len() {
            return Err(Error::InvalidInput(format!("{feature_id} has no interval {index}")));
        }
        let lo = index.checked_sub(1).map(|i| cuts[i]);
        Ok((lo, cuts.get(index).copied()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use VisType::*;

    const PERMISSIVE: MdlpConfig = MdlpConfig {
        min_split_fraction: 0.01,
        min_interval_fraction: 0.01,
    };

    #[test]
    fn separable_single_cut() {
        let values = [1.0, 2.0, 3.0, 101.0, 102.0, 103.0];
        let labels = [Bar, Bar, Bar, Line, Line, Line];
        assert_eq!(mdlp_cuts(&values, &labels, &PERMISSIVE).unwrap(), vec![52.0]);
        assert_eq!(mdlp_cuts(&values, &labels, &MdlpConfig::default()).unwrap(), vec![52.0]);
    }

    #[test]
    fn identical_labels_no_cut() {
        let values = [1.0, 5.0, 2.0, 8.0];
        assert!(mdlp_cuts(&values, &[Box; 4], &PERMISSIVE).unwrap().is_empty());
    }

    #[test]
    fn minimum_interval_constraint() {
        let half = MdlpConfig {
            min_split_fraction: 0.5,
            min_interval_fraction: 0.5,
        };
        let values = [1.0, 2.0, 3.0, 101.0, 102.0, 103.0];
        // 3/3 split is exactly at the bound and allowed
        let labels = [Bar, Bar, Bar, Line, Line, Line];
        assert_eq!(mdlp_cuts(&values, &labels, &half).unwrap(), vec![52.0]);
        // 2/4 split leaves 2 < 3 samples on one side
        let labels = [Bar, Bar, Line, Line, Line, Line];
        assert!(mdlp_cuts(&values, &labels, &half).unwrap().is_empty());
        assert_eq!(mdlp_cuts(&values, &labels, &PERMISSIVE).unwrap(), vec![2.5]);
    }

    #[test]
    fn input_errors() {
        assert!(mdlp_cuts(&[1.0], &[Bar, Line], &PERMISSIVE).is_err());
        assert!(mdlp_cuts(&[], &[], &PERMISSIVE).is_err());
        let bad = MdlpConfig {
            min_split_fraction: 0.05,
            min_interval_fraction: 0.1,
        };
        assert!(bad.validate().is_err());
        assert!(MdlpConfig::default().validate().is_ok());
    }

    #[test]
    fn fit_separable_and_constant() {
        let sep = vec![1.0, 2.0, 3.0, 101.0, 102.0, 103.0];
        let constant = vec![7.0; 6];
        let labels = [Bar, Bar, Bar, Line, Line, Line];
        let d = Discretizer::fit(&["sep", "const"], &[sep, constant], &labels, &PERMISSIVE).unwrap();
        assert_eq!(d.interval_count("sep").unwrap(), 2);
        assert_eq!(d.interval_count("const").unwrap(), 1);
        assert!(Discretizer::fit(&[], &[], &labels, &PERMISSIVE).unwrap().is_empty());
    }

    #[test]
    fn interval_cap_from_min_fraction() {
        // 40 label blocks of 10 samples, alternating classes
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for b in 0..40 {
            for i in 0..10 {
                values.push((b * 100 + i) as f64);
                labels.push(if b % 2 == 0 { Bar } else { Scatter });
            }
        }
        let cfg = MdlpConfig {
            min_split_fraction: 0.05,
            min_interval_fraction: 0.05,
        };
        let cuts = mdlp_cuts(&values, &labels, &cfg).unwrap();
        assert!(cuts.len() + 1 <= 20, "{} intervals", cuts.len() + 1);
    }

    #[test]
    fn assign_half_open() {
        let d = Discretizer::from_cuts([("a".to_string(), vec![52.0]), ("b".to_string(), vec![10.0, 20.0])]).unwrap();
        assert_eq!(d.assign(3.0, "a").unwrap(), 0);
        assert_eq!(d.assign(52.0, "a").unwrap(), 1);
        assert_eq!(d.assign(1e9, "b").unwrap(), 2);
        assert_eq!(d.assign(f64::NEG_INFINITY, "b").unwrap(), 0);
        assert!(matches!(d.assign(1.0, "zz"), Err(Error::UnknownFeature(_))));
        assert_eq!(d.interval_bounds("b", 0).unwrap(), (None, Some(10.0)));
        assert_eq!(d.interval_bounds("b", 1).unwrap(), (Some(10.0), Some(20.0)));
        assert_eq!(d.interval_bounds("b", 2).unwrap(), (Some(20.0), None));
    }

    #[test]
    fn json_shape() {
        let d = Discretizer::from_cuts([("entropy".to_string(), vec![0.5, 2.0])]).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        assert_eq!(json, r#"{"entropy":{"cuts":[0.5,2.0]}}"#);
        let back: Discretizer = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
    }
}
