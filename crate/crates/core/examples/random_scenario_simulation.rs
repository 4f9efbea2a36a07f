//! Correct-MTD frequency when every simulated trial draws a fresh random
//! scenario.
//!
//! ```text
//! cargo run --release --example random_scenario_simulation -- [reps]
//! ```

use blrm::decision::{DesignConfig, Variant};
use blrm::posterior::{BivariatePrior, ModelSpec, PosteriorEngine, ToxicityIntervals};
use blrm::report::{render_random_summary, TableFormat};
use blrm::scenarios::{PaolettiParams, ScenarioSource};
use blrm::simulator::{run_batch, BatchSettings};

fn main() -> blrm::Result<()> {
    let n_reps = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(200);
    let engine = PosteriorEngine::new(ModelSpec::standard(), BivariatePrior::default());
    let settings = BatchSettings {
        n_reps,
        master_seed: 1,
        parallelism: 0,
    };
    let sources = [
        ScenarioSource::Clertant { phi: 0.25 },
        ScenarioSource::Paoletti {
            phi: 0.25,
            params: PaolettiParams::default(),
        },
    ];

    let mut ocs = Vec::new();
    for source in &sources {
        for intervals in [ToxicityIntervals::narrow(), ToxicityIntervals::wide()] {
            for variant in Variant::ALL {
                let design = DesignConfig::new(variant, intervals);
                ocs.push(run_batch(source, &design, &engine, &settings)?);
            }
        }
    }
    print!("{}", render_random_summary(&ocs, TableFormat::Markdown)?);
    Ok(())
}
