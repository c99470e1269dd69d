//! Deterministic two-column corpus whose labels follow directly from column
//! features. Used by the acceptance suite and as a smoke-test dataset.
//!
//! Tables cycle through three shapes:
//! - line: increasing dates on x, unordered decimals in [100, 500] on y
//! - bar: unique lowercase labels on x, unordered integers on y
//! - scatter: decimals in [0, 10] on x and [1000, 5000] on y, both with
//!   injected outliers beyond 1.5 IQR

use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{infer_column_types, Axis, CorpusRecord, Table, VisLabel, VisType};

const SYLLABLES: [&str; 12] = ["ka", "lo", "mi", "ne", "pu", "ra", "si", "to", "ve", "da", "go", "hu"];

fn column(name: &str, cells: &[String]) -> crate::corpus::DataColumn {
    let raw: Vec<Option<&str>> = cells.iter().map(|c| Some(c.as_str())).collect();
    infer_column_types(&raw, name).expect("generated cells are never all missing")
}

fn shuffled_decimals<R: Rng>(rng: &mut R, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(lo..hi)).collect()
}

fn with_outliers<R: Rng>(rng: &mut R, mut v: Vec<f64>, lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    let at = rng.random_range(1..v.len() - 1);
    v[at] = hi + span * rng.random_range(2.0..3.0);
    let at = rng.random_range(1..v.len() - 1);
    v[at] = lo - span * rng.random_range(2.0..3.0);
    v
}

fn fmt2(v: &[f64]) -> Vec<String> {
    v.iter().map(|x| format!("{x:.2}")).collect()
}

fn unique_labels<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.random_range(2..5);
        let word: String = (0..len).map(|_| SYLLABLES[rng.random_range(0..SYLLABLES.len())]).collect();
        if seen.insert(word.clone()) {
            out.push(word);
        }
    }
    out
}

fn unordered_integers<R: Rng>(rng: &mut R, n: usize) -> Vec<String> {
    let mut v: Vec<i64> = (0..n).map(|_| rng.random_range(1..1000)).collect();
    // guarantee neither sorted nor monotonic
    v.shuffle(rng);
    if v.windows(2).all(|w| w[0] <= w[1]) || v.windows(2).all(|w| w[0] >= w[1]) {
        v.swap(0, n - 1);
        v[1] = v[0] + 7;
    }
    v.iter().map(i64::to_string).collect()
}

fn record(id: String, columns: Vec<crate::corpus::DataColumn>, vis_type: VisType) -> CorpusRecord {
    let labels = BTreeMap::from([
        (0, VisLabel { vis_type, axis: Axis::X }),
        (1, VisLabel { vis_type, axis: Axis::Y }),
    ]);
    CorpusRecord {
        table: Table { id, columns },
        labels,
    }
}

/// `n_tables` labeled tables (two labeled columns each), reproducible from `seed`.
pub fn separable_corpus(n_tables: usize, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2015, 1, 1).unwrap();
    (0..n_tables)
        .map(|i| {
            let n = rng.random_range(20..60);
            let id = format!("syn{i}");
            match i % 3 {
                0 => {
                    let mut day = start + Duration::days(rng.random_range(0..2000));
                    let dates: Vec<String> = (0..n)
                        .map(|_| {
                            day += Duration::days(rng.random_range(1..4));
                            day.format("%Y-%m-%d").to_string()
                        })
                        .collect();
                    let values = fmt2(&shuffled_decimals(&mut rng, n, 100.0, 500.0));
                    record(id, vec![column("date", &dates), column("value", &values)], VisType::Line)
                }
                1 => {
                    let labels = unique_labels(&mut rng, n);
                    let counts = unordered_integers(&mut rng, n);
                    record(id, vec![column("label", &labels), column("count", &counts)], VisType::Bar)
                }
                _ => {
                    let xs = shuffled_decimals(&mut rng, n, 0.0, 10.0);
                    let xs = with_outliers(&mut rng, xs, 0.0, 10.0);
                    let ys = shuffled_decimals(&mut rng, n, 1000.0, 5000.0);
                    let ys = with_outliers(&mut rng, ys, 1000.0, 5000.0);
                    record(
                        id,
                        vec![column("x_pos", &fmt2(&xs)), column("y_pos", &fmt2(&ys))],
                        VisType::Scatter,
                    )
                }
            }
        })
        .collect()
}
