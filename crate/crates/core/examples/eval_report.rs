//! Computes the evaluation table from a labels file (CSV or JSON).
//! Defaults to the bundled test fixture.

use std::path::PathBuf;

use shortscribe::eval::{build_report, group_labels, load_labels, SigmaConvention};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| {
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/study_labels.csv")
        });
    let labels = group_labels(&load_labels(&path)?)?;
    for conv in [SigmaConvention::Population, SigmaConvention::Sample] {
        print!("{}", build_report(&labels, conv)?.to_table());
        println!();
    }
    Ok(())
}
