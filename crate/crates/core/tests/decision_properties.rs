//! Decision-rule properties over random dose-monotone interval probabilities.

use blrm::decision::{
    addon_rule, addon_terms, next_action, Action, DesignConfig, TrialState, Variant,
};
use blrm::posterior::{
    dlt_prob, BivariatePrior, DoseProbs, IntervalProbs, ModelSpec, PosteriorEngine, ToxicityIntervals,
    TrialData,
};
use proptest::prelude::*;

/// Interval probabilities of a discrete mixture of logistic curves, so that
/// P(Over) rises and P(Under) falls with dose as for any real posterior.
fn probs_strategy() -> impl Strategy<Value = IntervalProbs> {
    prop::collection::vec((-6.0..4.0f64, -2.5..1.5f64, 0.01..1.0f64), 1..6).prop_map(|atoms| {
        let model = ModelSpec::standard();
        let iv = ToxicityIntervals::wide();
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        let rows = model
            .doses()
            .iter()
            .map(|&d| {
                let mut row = DoseProbs {
                    under: 0.0,
                    target: 0.0,
                    over: 0.0,
                };
                for &(la, lb, w) in &atoms {
                    let p = dlt_prob([la, lb], d, model.reference_dose()).unwrap();
                    let w = w / total;
                    if p < iv.lower() {
                        row.under += w;
                    } else if p <= iv.upper() {
                        row.target += w;
                    } else {
                        row.over += w;
                    }
                }
                row
            })
            .collect();
        IntervalProbs::new(rows)
    })
}

fn state_strategy() -> impl Strategy<Value = TrialState> {
    (0usize..7, 0u32..=45).prop_flat_map(|(current, at)| {
        (at..=45).prop_map(move |total| TrialState {
            current_index: current,
            patients_at_current: at,
            total_enrolled: total,
        })
    })
}

fn design(variant: Variant) -> DesignConfig {
    DesignConfig::new(variant, ToxicityIntervals::wide())
}

proptest! {
    #![proptest_config(ProptestConfig {
        cases: 512,
        failure_persistence: None,
        ..ProptestConfig::default()
    })]

    #[test]
    fn never_skips_a_dose(probs in probs_strategy(), state in state_strategy()) {
        let model = ModelSpec::standard();
        for v in Variant::ALL {
            let d = next_action(&probs, &state, &design(v), &model).unwrap();
            if let Action::Escalate(i) = d.action {
                prop_assert_eq!(i, state.current_index + 1);
            }
            if let Some(i) = d.action.target_index() {
                prop_assert!(i <= state.current_index + 1);
            }
        }
    }

    #[test]
    fn addon_designs_never_recommend_below_original(
        probs in probs_strategy(),
        state in state_strategy(),
    ) {
        let model = ModelSpec::standard();
        let base = next_action(&probs, &state, &design(Variant::Original), &model).unwrap();
        for v in &Variant::ALL[1..] {
            let d = next_action(&probs, &state, &design(*v), &model).unwrap();
            match base.action {
                Action::StopAllToxic | Action::DeclareMtd(_) => prop_assert_eq!(d.action, base.action),
                Action::StopMaxN => prop_assert_eq!(d.action, Action::StopMaxN),
                a => {
                    let i = a.target_index().unwrap();
                    if state.total_enrolled < 45 {
                        prop_assert!(d.action.target_index().unwrap() >= i, "{v:?}: {d:?} vs {base:?}");
                    }
                }
            }
            if d.addon_triggered {
                prop_assert!(state.current_index + 1 < 7);
            }
        }
    }

    #[test]
    fn design1_at_half_feasibility_compares_under_to_over(probs in probs_strategy(), current in 0usize..6) {
        let model = ModelSpec::standard();
        let mut cfg = design(Variant::Design1);
        cfg.feasibility_bound = 0.5;
        let row = probs.get(current);
        let fires = addon_rule(Variant::Design1, &probs, current, &model, &cfg).unwrap();
        prop_assert_eq!(fires, row.under > row.over);

        let mut cfg3 = design(Variant::Design3);
        cfg3.feasibility_bound = 0.5;
        let fires3 = addon_rule(Variant::Design3, &probs, current, &model, &cfg3).unwrap();
        prop_assert_eq!(fires3, row.under / 0.16 > row.over / (1.0 - 0.33));
    }

    #[test]
    fn larger_g_exponent_never_makes_escalation_easier(
        probs in probs_strategy(),
        current in 0usize..6,
        g_lo in 0.0..3.0f64,
        bump in 0.0..3.0f64,
    ) {
        let model = ModelSpec::standard();
        for v in [Variant::Design2, Variant::Design4] {
            let mut lo = design(v);
            lo.g_exponent = g_lo;
            let mut hi = design(v);
            hi.g_exponent = g_lo + bump;
            if addon_rule(v, &probs, current, &model, &hi).unwrap() {
                prop_assert!(addon_rule(v, &probs, current, &model, &lo).unwrap());
            }
        }
    }

    #[test]
    fn larger_feasibility_bound_never_makes_escalation_harder(
        probs in probs_strategy(),
        current in 0usize..6,
        af in 0.01..0.98f64,
        bump in 0.0..0.01f64,
    ) {
        let model = ModelSpec::standard();
        for v in [Variant::Design1, Variant::Design3] {
            let mut lo = design(v);
            lo.feasibility_bound = af;
            let mut hi = design(v);
            hi.feasibility_bound = af + bump;
            if addon_rule(v, &probs, current, &model, &lo).unwrap() {
                prop_assert!(addon_rule(v, &probs, current, &model, &hi).unwrap());
            }
        }
    }

    #[test]
    fn mtd_declared_only_after_enough_patients(probs in probs_strategy(), state in state_strategy()) {
        let model = ModelSpec::standard();
        for v in Variant::ALL {
            let cfg = design(v);
            let d = next_action(&probs, &state, &cfg, &model).unwrap();
            if let Action::DeclareMtd(i) = d.action {
                prop_assert_eq!(i, state.current_index);
                prop_assert!(state.patients_at_current >= cfg.mtd_min_patients);
                prop_assert!(probs.target(i) >= cfg.mtd_target_prob_threshold);
                prop_assert!(probs.over(i) <= cfg.overdose_bound);
            }
        }
    }

    #[test]
    fn all_toxic_exactly_when_every_dose_is_overdosing(probs in probs_strategy(), state in state_strategy()) {
        let model = ModelSpec::standard();
        let all = probs.rows().iter().all(|r| r.over > 0.3);
        for v in Variant::ALL {
            let d = next_action(&probs, &state, &design(v), &model).unwrap();
            prop_assert_eq!(d.action == Action::StopAllToxic, all);
        }
    }
}

#[test]
fn overdose_bound_straddles_the_hypothetical_fit() {
    let model = ModelSpec::standard();
    let engine = PosteriorEngine::new(model.clone(), BivariatePrior::default());
    let data = TrialData::new(vec![3, 3, 3, 3, 0, 0, 0], vec![0; 7]).unwrap();
    let probs = engine
        .interval_probs(&data, &ToxicityIntervals::wide())
        .unwrap();
    let state = TrialState {
        current_index: 3,
        patients_at_current: 3,
        total_enrolled: 12,
    };
    let with_bound = |c: f64| {
        let mut cfg = design(Variant::Original);
        cfg.overdose_bound = c;
        next_action(&probs, &state, &cfg, &model).unwrap().action
    };
    assert_eq!(with_bound(0.25), Action::Stay(3));
    assert_eq!(with_bound(0.30), Action::Stay(3));
    assert_eq!(with_bound(0.31), Action::Escalate(4));
}

#[test]
fn addon_terms_refuse_the_top_dose_and_the_original_design() {
    let model = ModelSpec::standard();
    let probs = IntervalProbs::new(vec![
        DoseProbs {
            under: 0.5,
            target: 0.3,
            over: 0.2
        };
        7
    ]);
    let cfg = design(Variant::Design1);
    assert!(addon_terms(Variant::Design1, &probs, 6, &model, &cfg).is_err());
    assert!(addon_terms(Variant::Original, &probs, 2, &model, &cfg).is_err());
}
