//! Operating characteristics of all five designs under a fixed curve.
//!
//! ```text
//! cargo run --release --example fixed_scenario_simulation -- [shape] [reps] [a,b]
//! cargo run --release --example fixed_scenario_simulation -- sshaped 1000 0.16,0.33
//! ```

use blrm::decision::{DesignConfig, Variant};
use blrm::posterior::{BivariatePrior, ModelSpec, PosteriorEngine, ToxicityIntervals};
use blrm::report::{render_comparison, TableFormat};
use blrm::scenarios::{fixed_scenario, FixedShape, ScenarioSource};
use blrm::simulator::{compare_designs, BatchSettings};

fn main() -> blrm::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let shape: FixedShape = args.first().map_or(Ok(FixedShape::SShaped), |s| s.parse())?;
    let n_reps = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let intervals = match args.get(2).and_then(|s| s.split_once(',')) {
        Some((a, b)) => ToxicityIntervals::new(
            0.25,
            a.parse().expect("numeric a"),
            b.parse().expect("numeric b"),
        )?,
        None => ToxicityIntervals::wide(),
    };

    let model = ModelSpec::standard();
    let engine = PosteriorEngine::new(model.clone(), BivariatePrior::default());
    let scenario = fixed_scenario(shape, &model, &intervals)?;
    let rates: Vec<String> = scenario.rates.iter().map(|r| format!("{r:.3}")).collect();
    println!("true DLT rates ({shape}): {}\n", rates.join(" "));

    let designs: Vec<DesignConfig> = Variant::ALL
        .iter()
        .map(|&v| DesignConfig::new(v, intervals))
        .collect();
    let settings = BatchSettings {
        n_reps,
        master_seed: 1,
        parallelism: 0,
    };
    let ocs = compare_designs(&ScenarioSource::Fixed(scenario), &designs, &engine, &settings)?;
    print!("{}", render_comparison(&ocs, &model, TableFormat::Markdown)?);
    Ok(())
}
