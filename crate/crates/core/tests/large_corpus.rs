//! Long cross-validation on a real labeled corpus with the default training
//! configuration. Runs only when `VIZKG_LARGE_CORPUS` names a JSONL corpus;
//! expect hours of CPU time.

use std::path::PathBuf;

use vizkg_core::corpus;
use vizkg_core::eval::cross_validate;
use vizkg_core::model::PipelineConfig;

#[test]
fn large_corpus_cross_validation() {
    let Some(path) = std::env::var_os("VIZKG_LARGE_CORPUS").map(PathBuf::from) else {
        eprintln!("VIZKG_LARGE_CORPUS not set; skipping");
        return;
    };
    let (records, report) = corpus::parse_corpus(&path).unwrap();
    eprintln!("{} records, {} parse diagnostics", records.len(), report.diagnostics.len());
    let records = corpus::clean_records(records);
    let r = cross_validate(&records, &PipelineConfig::default(), 5, 0).unwrap();
    eprintln!(
        "MR {:.4}, Hits@2 {:.4}, axis {:.4} over {} columns",
        r.pooled.mr, r.pooled.hits_at_2, r.pooled.axis_accuracy, r.columns
    );
    assert!(r.pooled.mr <= 2.1, "MR {}", r.pooled.mr);
    assert!(r.pooled.hits_at_2 >= 0.72, "Hits@2 {}", r.pooled.hits_at_2);
    assert!(r.pooled.axis_accuracy >= 0.70, "axis accuracy {}", r.pooled.axis_accuracy);
}
