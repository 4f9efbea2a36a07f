//! One simulated trial, cohort by cohort: dose, DLTs and the decision taken.
//!
//! ```text
//! cargo run --example trial_replay -- [d1|d2|d3|d4|original] [seed]
//! ```

use blrm::decision::{DesignConfig, Variant};
use blrm::posterior::{BivariatePrior, ModelSpec, PosteriorEngine, ToxicityIntervals};
use blrm::scenarios::{fixed_scenario, FixedShape};
use blrm::simulator::run_trial;

fn main() -> blrm::Result<()> {
    let mut args = std::env::args().skip(1);
    let variant: Variant = args.next().map_or(Ok(Variant::Design4), |s| s.parse())?;
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(2019);

    let model = ModelSpec::standard();
    let engine = PosteriorEngine::new(model.clone(), BivariatePrior::default());
    let intervals = ToxicityIntervals::wide();
    let scenario = fixed_scenario(FixedShape::SShaped, &model, &intervals)?;
    let design = DesignConfig::new(variant, intervals);

    let outcome = run_trial(&scenario, &design, &engine, seed)?;
    println!("{} on the S-shaped curve, seed {seed}", variant.title());
    for (k, c) in outcome.trace.iter().enumerate() {
        let dose = model.doses()[c.dose_index];
        let addon = if c.decision.addon_triggered { "  [add-on]" } else { "" };
        println!(
            "cohort {:>2}: {dose:>5} mg, {} DLT -> {:?}{addon}",
            k + 1,
            c.dlts,
            c.decision.action
        );
    }
    println!(
        "result: {:?} after {} patients ({} DLTs)",
        outcome.terminal, outcome.total_n, outcome.total_dlt
    );
    Ok(())
}
