//! The four add-on rules on the hypothetical data scenario: each side of every
//! inequality, and the decision each design reaches at 100 mg.
//!
//! ```text
//! cargo run --example addon_rules
//! ```

use blrm::decision::{addon_terms, next_action, DesignConfig, TrialState, Variant};
use blrm::posterior::{BivariatePrior, ModelSpec, PosteriorEngine, ToxicityIntervals, TrialData};

fn main() -> blrm::Result<()> {
    let model = ModelSpec::standard();
    let engine = PosteriorEngine::new(model.clone(), BivariatePrior::default());
    let data = TrialData::new(vec![3, 3, 3, 3, 0, 0, 0], vec![0; 7])?;
    let intervals = ToxicityIntervals::wide();
    let probs = engine.interval_probs(&data, &intervals)?;
    let current = 3;
    let state = TrialState {
        current_index: current,
        patients_at_current: 3,
        total_enrolled: 12,
    };

    let here = probs.get(current);
    let next = probs.get(current + 1);
    println!(
        "100 mg: P(Under) = {:.3}, P(Over) = {:.3}; 200 mg: P(Over) = {:.3}\n",
        here.under, here.over, next.over
    );

    println!("{:<14} {:>8} {:>8}  decision", "design", "lhs", "rhs");
    for variant in Variant::ALL {
        let mut design = DesignConfig::new(variant, intervals);
        design.overdose_bound = 0.25;
        let decision = next_action(&probs, &state, &design, &model)?;
        let (lhs, rhs) = match variant {
            Variant::Original => ("-".to_string(), "-".to_string()),
            v => {
                let t = addon_terms(v, &probs, current, &model, &design)?;
                (format!("{:.3}", t.lhs), format!("{:.3}", t.rhs))
            }
        };
        let flag = if decision.addon_triggered { " (add-on)" } else { "" };
        println!(
            "{:<14} {lhs:>8} {rhs:>8}  {:?}{flag}",
            variant.title(),
            decision.action
        );
    }
    Ok(())
}
