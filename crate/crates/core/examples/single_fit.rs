//! Posterior interval probabilities for the hypothetical data scenario
//! (0/3 DLTs at each of the four lowest doses) and the original recommendation.
//!
//! ```text
//! cargo run --example single_fit
//! ```

use blrm::decision::{next_action, DesignConfig, TrialState, Variant};
use blrm::posterior::{BivariatePrior, ModelSpec, PosteriorEngine, ToxicityIntervals, TrialData};
use blrm::report::{render_single_fit, TableFormat};

fn main() -> blrm::Result<()> {
    let model = ModelSpec::standard();
    let engine = PosteriorEngine::new(model.clone(), BivariatePrior::default());
    let data = TrialData::new(vec![3, 3, 3, 3, 0, 0, 0], vec![0; 7])?;

    let mut design = DesignConfig::new(Variant::Original, ToxicityIntervals::wide());
    design.overdose_bound = 0.25;

    let probs = engine.interval_probs(&data, &design.intervals)?;
    print!("{}", render_single_fit(&probs, &data, &model, TableFormat::Markdown)?);

    let mode = engine.mode(&data)?;
    println!(
        "\nposterior mode: log_alpha = {:.3}, log_beta = {:.3} ({} Newton steps)",
        mode.theta[0], mode.theta[1], mode.iterations
    );

    let state = TrialState {
        current_index: 3,
        patients_at_current: 3,
        total_enrolled: 12,
    };
    let decision = next_action(&probs, &state, &design, &model)?;
    println!(
        "original rule at 100 mg with c = {}: {:?}",
        design.overdose_bound, decision.action
    );
    Ok(())
}
