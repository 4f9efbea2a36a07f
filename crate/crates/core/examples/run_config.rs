//! Loads a TOML run configuration (one of the bundled presets by default),
//! prints the resolved settings and runs a short simulation from it.
//!
//! ```text
//! cargo run --release --example run_config -- presets/table6.toml 50
//! ```

use std::path::PathBuf;

use blrm::config::RunConfig;
use blrm::report::{render_comparison, render_random_summary, TableFormat};
use blrm::simulator::compare_designs;

fn main() -> blrm::Result<()> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("presets/table5.toml")
    });
    let mut cfg = RunConfig::load(&path)?;
    cfg.simulation.n_reps = args.next().and_then(|s| s.parse().ok()).unwrap_or(50);

    print!("{}", cfg.to_toml()?);
    println!();

    let source = cfg.scenario_source()?;
    let ocs = compare_designs(&source, &cfg.designs()?, &cfg.engine(), &cfg.simulation.batch_settings())?;
    let table = if source.is_random() {
        render_random_summary(&ocs, TableFormat::Markdown)?
    } else {
        render_comparison(&ocs, &cfg.model, TableFormat::Markdown)?
    };
    print!("{table}");
    Ok(())
}
