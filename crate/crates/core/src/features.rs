//! Per-column data features.
//!
//! Categorical features are closed token sets grouped into 13 groups; each
//! group later owns one relation in the knowledge graph. Continuous features
//! are 50 real-valued statistics which are winsorized across the training
//! set and discretized before entering the graph.
//!
//! Registry version `reg-v1`. Changing ids, order or token sets requires a
//! new version string since stored graphs and models key on them.

use std::collections::HashMap;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::corpus::{CellValue, DataColumn, GeneralType, SpecificType, Table};
use crate::error::{Error, Result};
use crate::stats;

pub const REGISTRY_VERSION: &str = "reg-v1";

// ---------------------------------------------------------------------------
// Categorical registry

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CfGroup {
    GeneralType,
    SpecificType,
    NameContains,
    OutlierBy,
    NormalAt,
    Sorted,
    Monotonic,
    LinearSpace,
    LogSpace,
    Unique,
    HasMissing,
    OnlyColumn,
    StartsWith,
}

const BOOL_TOKENS: &[&str] = &["true", "false"];

impl CfGroup {
    pub const ALL: [CfGroup; 13] = [
        Self::GeneralType,
        Self::SpecificType,
        Self::NameContains,
        Self::OutlierBy,
        Self::NormalAt,
        Self::Sorted,
        Self::Monotonic,
        Self::LinearSpace,
        Self::LogSpace,
        Self::Unique,
        Self::HasMissing,
        Self::OnlyColumn,
        Self::StartsWith,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::GeneralType => "general_type",
            Self::SpecificType => "specific_type",
            Self::NameContains => "name_contains",
            Self::OutlierBy => "outlier_by",
            Self::NormalAt => "normal_at",
            Self::Sorted => "sorted",
            Self::Monotonic => "monotonic",
            Self::LinearSpace => "linear_space",
            Self::LogSpace => "log_space",
            Self::Unique => "unique",
            Self::HasMissing => "has_missing",
            Self::OnlyColumn => "only_column",
            Self::StartsWith => "starts_with",
        }
    }

    pub fn tokens(self) -> &'static [&'static str] {
        match self {
            Self::GeneralType => &["categorical", "quantitative", "temporal"],
            Self::SpecificType => &["string", "integer", "decimal", "datetime"],
            Self::NameContains => &["x", "y", "time", "digit", "whitespace", "$", "€", "£", "¥"],
            Self::OutlierBy => &["1.5IQR", "3IQR", "3Std", "(1%,99%)"],
            Self::NormalAt => &["p<0.01", "p<0.05"],
            Self::StartsWith => &["upper", "lower"],
            _ => BOOL_TOKENS,
        }
    }

    /// Groups emitting exactly one `true`/`false` token per column.
    pub fn is_boolean(self) -> bool {
        matches!(
            self,
            Self::Sorted
                | Self::Monotonic
                | Self::LinearSpace
                | Self::LogSpace
                | Self::Unique
                | Self::HasMissing
                | Self::OnlyColumn
        )
    }

    /// Groups emitting zero or more tokens; absence produces nothing.
    pub fn is_presence(self) -> bool {
        matches!(self, Self::NameContains | Self::OutlierBy | Self::NormalAt)
    }

    pub fn from_id(id: &str) -> Option<CfGroup> {
        Self::ALL.into_iter().find(|g| g.id() == id)
    }
}

/// One categorical feature value, e.g. `sorted=true`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CfToken {
    pub group: CfGroup,
    pub value: &'static str,
}

impl CfToken {
    pub fn new(group: CfGroup, value: &str) -> Result<CfToken> {
        group
            .tokens()
            .iter()
            .find(|t| **t == value)
            .map(|t| CfToken { group, value: t })
            .ok_or_else(|| Error::UnknownFeature(format!("{}={value}", group.id())))
    }

    fn of(group: CfGroup, value: &'static str) -> CfToken {
        debug_assert!(group.tokens().contains(&value));
        CfToken { group, value }
    }

    fn flag(group: CfGroup, on: bool) -> CfToken {
        CfToken::of(group, if on { "true" } else { "false" })
    }

    /// Entity key, e.g. `CF:sorted=true`.
    pub fn key(&self) -> String {
        format!("CF:{self}")
    }
}

impl fmt::Display for CfToken {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}", self.group.id(), self.value)
    }
}

impl FromStr for CfToken {
    type Err = Error;

    fn from_str(s: &str) -> Result<CfToken> {
        let s = s.strip_prefix("CF:").unwrap_or(s);
        let (group, value) = s
            .split_once('=')
            .ok_or_else(|| Error::UnknownFeature(s.to_string()))?;
        let group = CfGroup::from_id(group).ok_or_else(|| Error::UnknownFeature(s.to_string()))?;
        CfToken::new(group, value)
    }
}

impl Serialize for CfToken {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for CfToken {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Continuous registry

macro_rules! continuous_features {
    ($($variant:ident => $id:literal, $desc:literal;)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum ContinuousFeature {
            $($variant,)*
        }

        impl ContinuousFeature {
            pub const ALL: &'static [ContinuousFeature] = &[$(Self::$variant,)*];

            pub fn id(self) -> &'static str {
                match self {
                    $(Self::$variant => $id,)*
                }
            }

            /// Human-readable subject used in rule sentences.
            pub fn description(self) -> &'static str {
                match self {
                    $(Self::$variant => $desc,)*
                }
            }
        }
    };
}

continuous_features! {
    Length => "length", "the length of the column";
    NumValues => "n_values", "the number of values in the column";
    NumUnique => "n_unique", "the number of unique values in the column";
    PctUnique => "pct_unique", "the fraction of unique values in the column";
    PctMissing => "pct_missing", "the fraction of missing values in the column";
    Mean => "mean", "the mean of values in the column";
    Median => "median", "the median of values in the column";
    Min => "min", "the minimum of values in the column";
    Max => "max", "the maximum of values in the column";
    Range => "range", "the range of values in the column";
    Variance => "variance", "the variance of values in the column";
    Std => "std", "the standard deviation of values in the column";
    Skewness => "skewness", "the skewness of values in the column";
    Kurtosis => "kurtosis", "the kurtosis of values in the column";
    Moment5 => "moment_5", "the 5th standardized moment of values in the column";
    Moment6 => "moment_6", "the 6th standardized moment of values in the column";
    Moment7 => "moment_7", "the 7th standardized moment of values in the column";
    Moment8 => "moment_8", "the 8th standardized moment of values in the column";
    Moment9 => "moment_9", "the 9th standardized moment of values in the column";
    Moment10 => "moment_10", "the 10th standardized moment of values in the column";
    P10 => "p10", "the 10th percentile of values in the column";
    P25 => "p25", "the 25th percentile of values in the column";
    P75 => "p75", "the 75th percentile of values in the column";
    P90 => "p90", "the 90th percentile of values in the column";
    Iqr => "iqr", "the interquartile range of values in the column";
    Entropy => "entropy", "the entropy of values in the column";
    Gini => "gini", "the Gini impurity of values in the column";
    NormalityStat => "normality_stat", "the normality test statistic of the column";
    PctOutliers15Iqr => "pct_outliers_1_5iqr", "the fraction of 1.5IQR outliers in the column";
    PctOutliers3Iqr => "pct_outliers_3iqr", "the fraction of 3IQR outliers in the column";
    PctOutliers3Std => "pct_outliers_3std", "the fraction of 3Std outliers in the column";
    PctOutliers1To99 => "pct_outliers_1_99", "the fraction of values outside the (1%, 99%) quantiles";
    Sortedness => "sortedness", "the fraction of sorted neighbouring values in the column";
    LinearSpaceError => "linear_space_error", "the linear-space fit error of the column";
    LogSpaceError => "log_space_error", "the log-space fit error of the column";
    MeanAbsDev => "mean_abs_dev", "the mean absolute deviation of values in the column";
    MedianAbsDev => "median_abs_dev", "the median absolute deviation of values in the column";
    CoeffVariation => "coeff_variation", "the coefficient of variation of the column";
    ValueLenMin => "value_len_min", "the minimum value length in the column";
    ValueLenMax => "value_len_max", "the maximum value length in the column";
    ValueLenMean => "value_len_mean", "the mean value length in the column";
    ValueLenStd => "value_len_std", "the standard deviation of value lengths in the column";
    NameLength => "name_length", "the length of the column name";
    NameWords => "name_words", "the number of words in the column name";
    NameDigits => "name_digits", "the number of digits in the column name";
    NameUpperRatio => "name_upper_ratio", "the uppercase ratio of the column name";
    MeanEditDistance => "mean_edit_distance", "the mean edit distance between neighbouring unique values";
    PctMode => "pct_mode", "the fraction of values equal to the mode";
    ModeFrequency => "mode_frequency", "the frequency of the mode";
    NumValueLengths => "n_value_lengths", "the number of distinct value lengths in the column";
}

pub const N_CONTINUOUS: usize = 50;

impl ContinuousFeature {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_id(id: &str) -> Option<ContinuousFeature> {
        Self::ALL.iter().copied().find(|f| f.id() == id)
    }
}

// ---------------------------------------------------------------------------
// Feature vectors

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub table_id: String,
    pub column_index: usize,
    pub categoricals: Vec<CfToken>,
    /// Indexed by [`ContinuousFeature::index`].
    pub continuous: Vec<f64>,
    /// Marks continuous entries that are undefined for the column and were set to 0.
    pub undefined: Vec<bool>,
}

impl FeatureVector {
    pub fn value(&self, f: ContinuousFeature) -> f64 {
        self.continuous[f.index()]
    }

    pub fn has(&self, token: &CfToken) -> bool {
        self.categoricals.contains(token)
    }
}

/// Cached per-column quantities shared by the categorical and continuous extractors.
struct Profile<'a> {
    col: &'a DataColumn,
    present: Vec<&'a CellValue>,
    /// Numeric view in column order for quantitative and temporal columns.
    numeric: Option<Vec<f64>>,
    sorted_numeric: Vec<f64>,
}

impl<'a> Profile<'a> {
    fn new(col: &'a DataColumn) -> Self {
        let present: Vec<&CellValue> = col.non_missing().collect();
        let numeric = match col.general_type {
            GeneralType::Categorical => None,
            _ => Some(present.iter().filter_map(|v| v.as_f64()).collect::<Vec<f64>>()),
        };
        let sorted_numeric = numeric.as_deref().map(stats::sorted_copy).unwrap_or_default();
        Profile {
            col,
            present,
            numeric,
            sorted_numeric,
        }
    }

    fn is_quantitative(&self) -> bool {
        self.col.general_type == GeneralType::Quantitative
    }

    /// Ordering of neighbouring values: numeric for numbers/datetimes, lexicographic for text.
    fn pair_orders(&self) -> Vec<std::cmp::Ordering> {
        match &self.numeric {
            Some(v) => v.windows(2).map(|w| w[0].total_cmp(&w[1])).collect(),
            None => {
                let texts: Vec<String> = self.present.iter().map(|v| v.to_string()).collect();
                texts.windows(2).map(|w| w[0].cmp(&w[1])).collect()
            }
        }
    }

    fn is_sorted(&self) -> bool {
        self.pair_orders().iter().all(|o| o.is_le())
    }

    fn is_monotonic(&self) -> bool {
        let orders = self.pair_orders();
        orders.iter().all(|o| o.is_le()) || orders.iter().all(|o| o.is_ge())
    }

    fn sortedness(&self) -> f64 {
        let orders = self.pair_orders();
        if orders.is_empty() {
            return 1.0;
        }
        orders.iter().filter(|o| o.is_le()).count() as f64 / orders.len() as f64
    }

    fn value_counts(&self) -> Vec<usize> {
        let mut counts: HashMap<String, usize> = HashMap::new();
        for v in &self.present {
            let key = match v {
                // -0.0 and 0.0 are one value
                CellValue::Decimal(x) if *x == 0.0 => "0".to_string(),
                other => other.to_string(),
            };
            *counts.entry(key).or_default() += 1;
        }
        let mut c: Vec<usize> = counts.into_values().collect();
        c.sort_unstable();
        c
    }

    fn tukey_outliers(&self, k: f64) -> Option<usize> {
        let s = &self.sorted_numeric;
        if !self.is_quantitative() || s.is_empty() {
            return None;
        }
        let q1 = stats::quantile_sorted(s, 0.25);
        let q3 = stats::quantile_sorted(s, 0.75);
        let iqr = q3 - q1;
        let (lo, hi) = (q1 - k * iqr, q3 + k * iqr);
        Some(s.iter().filter(|&&x| x < lo || x > hi).count())
    }

    fn std_outliers(&self) -> Option<usize> {
        let s = &self.sorted_numeric;
        if !self.is_quantitative() || s.is_empty() {
            return None;
        }
        let m = stats::mean(s);
        let sd = stats::central_moment(s, m, 2).sqrt();
        Some(s.iter().filter(|&&x| (x - m).abs() > 3.0 * sd).count())
    }

    fn quantile_outliers(&self) -> Option<usize> {
        let s = &self.sorted_numeric;
        if !self.is_quantitative() || s.is_empty() {
            return None;
        }
        let lo = stats::quantile_sorted(s, 0.01);
        let hi = stats::quantile_sorted(s, 0.99);
        Some(s.iter().filter(|&&x| x < lo || x > hi).count())
    }

    fn normality(&self) -> Option<(f64, f64)> {
        if !self.is_quantitative() {
            return None;
        }
        stats::dagostino_pearson(self.numeric.as_deref()?)
    }

    /// Spread of successive differences relative to their mean; `None` when
    /// fewer than three values or the mean difference is zero.
    fn spacing_error(values: &[f64]) -> Option<f64> {
        if values.len() < 3 {
            return None;
        }
        let diffs: Vec<f64> = values.windows(2).map(|w| w[1] - w[0]).collect();
        let m = stats::mean(&diffs);
        if m == 0.0 || !m.is_finite() {
            return None;
        }
        let sd = stats::central_moment(&diffs, m, 2).sqrt();
        let err = sd / m.abs();
        err.is_finite().then_some(err)
    }

    fn linear_space_error(&self) -> Option<f64> {
        Self::spacing_error(self.numeric.as_deref()?)
    }

    fn log_space_error(&self) -> Option<f64> {
        let v = self.numeric.as_deref()?;
        if v.iter().any(|&x| x <= 0.0) {
            return None;
        }
        let logs: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        Self::spacing_error(&logs)
    }
}

const SPACING_TOLERANCE: f64 = 1e-3;

fn name_tokens(name: &str) -> Vec<CfToken> {
    let lower = name.to_lowercase();
    let mut out = Vec::new();
    for tok in CfGroup::NameContains.tokens() {
        let hit = match *tok {
            "digit" => name.chars().any(|c| c.is_ascii_digit()),
            "whitespace" => name.chars().any(char::is_whitespace),
            t => lower.contains(t),
        };
        if hit {
            out.push(CfToken::of(CfGroup::NameContains, tok));
        }
    }
    out
}

fn general_token(t: GeneralType) -> &'static str {
    match t {
        GeneralType::Categorical => "categorical",
        GeneralType::Quantitative => "quantitative",
        GeneralType::Temporal => "temporal",
    }
}

fn specific_token(t: SpecificType) -> &'static str {
    match t {
        SpecificType::String => "string",
        SpecificType::Integer => "integer",
        SpecificType::Decimal => "decimal",
        SpecificType::DateTime => "datetime",
    }
}

fn categorical_from_profile(p: &Profile<'_>, table_ctx: &Table) -> Vec<CfToken> {
    use CfGroup::*;
    let col = p.col;
    let mut out = vec![
        CfToken::of(GeneralType, general_token(col.general_type)),
        CfToken::of(SpecificType, specific_token(col.specific_type)),
    ];
    out.extend(name_tokens(&col.name));

    let outliers = [
        ("1.5IQR", p.tukey_outliers(1.5)),
        ("3IQR", p.tukey_outliers(3.0)),
        ("3Std", p.std_outliers()),
        ("(1%,99%)", p.quantile_outliers()),
    ];
    for (tok, count) in outliers {
        if count.unwrap_or(0) > 0 {
            out.push(CfToken::of(OutlierBy, tok));
        }
    }
    // "normal at p<a": the test does not reject normality at level a
    if let Some((_, pval)) = p.normality() {
        if pval >= 0.01 {
            out.push(CfToken::of(NormalAt, "p<0.01"));
        }
        if pval >= 0.05 {
            out.push(CfToken::of(NormalAt, "p<0.05"));
        }
    }

    let n_unique = p.value_counts().len();
    out.push(CfToken::flag(Sorted, p.is_sorted()));
    out.push(CfToken::flag(Monotonic, p.is_monotonic()));
    out.push(CfToken::flag(
        LinearSpace,
        p.linear_space_error().is_some_and(|e| e <= SPACING_TOLERANCE),
    ));
    out.push(CfToken::flag(
        LogSpace,
        p.log_space_error().is_some_and(|e| e <= SPACING_TOLERANCE),
    ));
    out.push(CfToken::flag(Unique, n_unique == p.present.len()));
    out.push(CfToken::flag(HasMissing, col.missing_count() > 0));
    out.push(CfToken::flag(OnlyColumn, table_ctx.columns.len() == 1));

    let upper = col.name.chars().next().is_some_and(char::is_uppercase);
    out.push(CfToken::of(StartsWith, if upper { "upper" } else { "lower" }));
    out
}

/// Categorical tokens of a column. `table_ctx` is the table the column belongs to.
pub fn extract_categorical(col: &DataColumn, table_ctx: &Table) -> Vec<CfToken> {
    categorical_from_profile(&Profile::new(col), table_ctx)
}

fn continuous_from_profile(p: &Profile<'_>) -> (Vec<f64>, Vec<bool>) {
    use ContinuousFeature as F;
    let col = p.col;
    let mut values = vec![0.0; N_CONTINUOUS];
    let mut defined = vec![false; N_CONTINUOUS];
    let mut set = |f: F, v: Option<f64>| {
        if let Some(v) = v.filter(|v| v.is_finite()) {
            values[f.index()] = v;
            defined[f.index()] = true;
        }
    };

    let length = col.values.len();
    let n = p.present.len();
    let counts = p.value_counts();
    set(F::Length, Some(length as f64));
    set(F::NumValues, Some(n as f64));
    set(F::NumUnique, Some(counts.len() as f64));
    set(F::PctUnique, (n > 0).then(|| counts.len() as f64 / n as f64));
    set(F::PctMissing, (length > 0).then(|| (length - n) as f64 / length as f64));
    set(F::Entropy, Some(stats::entropy_nats(counts.iter().copied())));
    set(F::Gini, Some(stats::gini_impurity(counts.iter().copied())));
    let mode = counts.last().copied().unwrap_or(0);
    set(F::PctMode, (n > 0).then(|| mode as f64 / n as f64));
    set(F::ModeFrequency, Some(mode as f64));
    set(F::Sortedness, Some(p.sortedness()));

    let s = &p.sorted_numeric;
    if !s.is_empty() {
        let m = stats::mean(s);
        let var = stats::central_moment(s, m, 2);
        let sd = var.sqrt();
        let median = stats::quantile_sorted(s, 0.5);
        set(F::Mean, Some(m));
        set(F::Median, Some(median));
        set(F::Min, Some(s[0]));
        set(F::Max, Some(s[s.len() - 1]));
        set(F::Range, Some(s[s.len() - 1] - s[0]));
        set(F::Variance, Some(var));
        set(F::Std, Some(sd));
        if var > 0.0 {
            set(F::Skewness, Some(stats::central_moment(s, m, 3) / var.powf(1.5)));
            set(F::Kurtosis, Some(stats::central_moment(s, m, 4) / (var * var) - 3.0));
            let moments = [F::Moment5, F::Moment6, F::Moment7, F::Moment8, F::Moment9, F::Moment10];
            for (k, f) in (5..=10).zip(moments) {
                // standardize first so high powers stay finite
                let z: f64 = s.iter().map(|x| ((x - m) / sd).powi(k)).sum::<f64>() / s.len() as f64;
                set(f, Some(z));
            }
        }
        set(F::P10, Some(stats::quantile_sorted(s, 0.10)));
        set(F::P25, Some(stats::quantile_sorted(s, 0.25)));
        set(F::P75, Some(stats::quantile_sorted(s, 0.75)));
        set(F::P90, Some(stats::quantile_sorted(s, 0.90)));
        set(F::Iqr, Some(stats::quantile_sorted(s, 0.75) - stats::quantile_sorted(s, 0.25)));
        set(F::MeanAbsDev, Some(s.iter().map(|x| (x - m).abs()).sum::<f64>() / s.len() as f64));
        let abs_dev = stats::sorted_copy(&s.iter().map(|x| (x - median).abs()).collect::<Vec<_>>());
        set(F::MedianAbsDev, Some(stats::quantile_sorted(&abs_dev, 0.5)));
        set(F::CoeffVariation, (m != 0.0).then(|| sd / m.abs()));
    }
    set(F::LinearSpaceError, p.linear_space_error());
    set(F::LogSpaceError, p.log_space_error());
    set(F::NormalityStat, p.normality().map(|(k2, _)| k2));
    let pct = |c: Option<usize>| c.map(|c| c as f64 / s.len() as f64);
    set(F::PctOutliers15Iqr, pct(p.tukey_outliers(1.5)));
    set(F::PctOutliers3Iqr, pct(p.tukey_outliers(3.0)));
    set(F::PctOutliers3Std, pct(p.std_outliers()));
    set(F::PctOutliers1To99, pct(p.quantile_outliers()));

    let texts: Vec<String> = p.present.iter().map(|v| v.to_string()).collect();
    if !texts.is_empty() {
        let lens: Vec<f64> = texts.iter().map(|t| t.chars().count() as f64).collect();
        let lm = stats::mean(&lens);
        set(F::ValueLenMin, lens.iter().copied().reduce(f64::min));
        set(F::ValueLenMax, lens.iter().copied().reduce(f64::max));
        set(F::ValueLenMean, Some(lm));
        set(F::ValueLenStd, Some(stats::central_moment(&lens, lm, 2).sqrt()));
        let mut distinct_lens: Vec<usize> = lens.iter().map(|&l| l as usize).collect();
        distinct_lens.sort_unstable();
        distinct_lens.dedup();
        set(F::NumValueLengths, Some(distinct_lens.len() as f64));
        set(F::MeanEditDistance, Some(mean_neighbour_edit_distance(&texts)));
    }

    let name = &col.name;
    let n_chars = name.chars().count();
    set(F::NameLength, Some(n_chars as f64));
    set(
        F::NameWords,
        Some(name.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).count() as f64),
    );
    set(F::NameDigits, Some(name.chars().filter(char::is_ascii_digit).count() as f64));
    set(
        F::NameUpperRatio,
        Some(if n_chars == 0 {
            0.0
        } else {
            name.chars().filter(|c| c.is_uppercase()).count() as f64 / n_chars as f64
        }),
    );

    (values, defined.into_iter().map(|d| !d).collect())
}

const EDIT_MAX_VALUES: usize = 1000;
const EDIT_MAX_CHARS: usize = 64;

/// Mean Levenshtein distance between neighbours of the sorted unique values
/// (first 1000 values, each truncated to 64 chars).
fn mean_neighbour_edit_distance(texts: &[String]) -> f64 {
    let mut unique: Vec<&str> = texts.iter().map(String::as_str).collect();
    unique.sort_unstable();
    unique.dedup();
    unique.truncate(EDIT_MAX_VALUES);
    if unique.len() < 2 {
        return 0.0;
    }
    let cut = |s: &str| s.chars().take(EDIT_MAX_CHARS).collect::<String>();
    let total: usize = unique
        .windows(2)
        .map(|w| stats::levenshtein(&cut(w[0]), &cut(w[1])))
        .sum();
    total as f64 / (unique.len() - 1) as f64
}

/// All 50 continuous features, in registry order. Undefined entries are 0.
pub fn extract_continuous(col: &DataColumn) -> Vec<f64> {
    continuous_from_profile(&Profile::new(col)).0
}

/// Full feature vector of `table.columns[column_index]`.
pub fn extract(table: &Table, column_index: usize) -> FeatureVector {
    let col = &table.columns[column_index];
    let profile = Profile::new(col);
    let categoricals = categorical_from_profile(&profile, table);
    let (continuous, undefined) = continuous_from_profile(&profile);
    FeatureVector {
        table_id: table.id.clone(),
        column_index,
        categoricals,
        continuous,
        undefined,
    }
}

// ---------------------------------------------------------------------------
// Winsorization

pub type Bounds = (f64, f64);

/// Clips each feature's values to its own 5%/95% quantiles (linear
/// interpolation). `matrix[f]` holds feature `f` over all training columns.
pub fn winsorize_matrix(matrix: &[Vec<f64>]) -> Result<(Vec<Vec<f64>>, Vec<Bounds>)> {
    let mut clipped = Vec::with_capacity(matrix.len());
    let mut bounds = Vec::with_capacity(matrix.len());
    for (f, values) in matrix.iter().enumerate() {
        if values.is_empty() {
            return Err(Error::InvalidInput(format!("feature {f} has no values")));
        }
        let sorted = stats::sorted_copy(values);
        let b = (stats::quantile_sorted(&sorted, 0.05), stats::quantile_sorted(&sorted, 0.95));
        clipped.push(values.iter().map(|&v| clip(v, b)).collect());
        bounds.push(b);
    }
    Ok((clipped, bounds))
}

pub fn clip(v: f64, (lo, hi): Bounds) -> f64 {
    v.max(lo).min(hi)
}

/// Clips a feature vector's continuous values with stored training bounds.
pub fn apply_bounds(fv: &mut FeatureVector, bounds: &[Bounds]) {
    for (v, b) in fv.continuous.iter_mut().zip(bounds) {
        *v = clip(*v, *b);
    }
}

/// Transposes feature vectors into per-feature value lists.
pub fn to_matrix(vectors: &[FeatureVector]) -> Vec<Vec<f64>> {
    (0..N_CONTINUOUS)
        .map(|f| vectors.iter().map(|fv| fv.continuous[f]).collect())
        .collect()
}

// ---------------------------------------------------------------------------
// Export

/// CSV with header `table_id,column_index,feature_id,value`.
pub fn write_continuous_csv<W: Write>(out: W, vectors: &[FeatureVector]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["table_id", "column_index", "feature_id", "value"])?;
    for fv in vectors {
        for f in ContinuousFeature::ALL {
            w.write_record([
                fv.table_id.as_str(),
                &fv.column_index.to_string(),
                f.id(),
                &fv.value(*f).to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// One JSON object per column: `{"table_id", "column_index", "tokens": [..]}`.
pub fn write_categorical_jsonl<W: Write>(mut out: W, vectors: &[FeatureVector]) -> Result<()> {
    for fv in vectors {
        let line = serde_json::json!({
            "table_id": fv.table_id,
            "column_index": fv.column_index,
            "tokens": fv.categoricals,
        });
        writeln!(out, "{line}")?;
    }
    Ok(())
}
