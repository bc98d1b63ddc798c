//! Loads a JSON chain specification and prints the full analysis report.
//!
//! ```text
//! cargo run --example chain_report -- crates/core/chains/e2.json
//! ```

use std::path::PathBuf;

use bandchain::analysis::{analyze, AnalysisConfig};
use bandchain::chain_spec::load_kernel;
use bandchain::format::to_json17;

fn main() {
    let path = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/chains/e1.json")));
    let kernel = match load_kernel(&path) {
        Ok(k) => k,
        Err(e) => {
            eprintln!("{}: {e}", path.display());
            std::process::exit(1);
        }
    };
    match analyze(&kernel, &AnalysisConfig::default()) {
        Ok(a) => println!("{}", to_json17(&a.report).expect("serialisable")),
        Err(e) => {
            eprintln!("analysis failed: {e}");
            std::process::exit(1);
        }
    }
}
