//! Certify a bundled case and print the report.
//!
//! Run: cargo run --example certify_case -- crates/core/cases/hvdc_p2p.case

use hybridstab::case::Case;
use hybridstab::stability::certify_with;

fn main() -> hybridstab::Result<()> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/cases/hvdc_p2p.case").to_string());
    let case = Case::load(&path)?;
    let report = certify_with(&case.network, &case.file.analysis.grid()?)?;
    println!("{report}");
    Ok(())
}
