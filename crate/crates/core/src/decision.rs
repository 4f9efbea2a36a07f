//! Dose recommendation under the original overdose-control rule and the four
//! add-on designs that also control underdosing.
//!
//! Every design shares the same base rule: among doses whose overdosing
//! probability is at most the bound `c`, recommend the one most likely to be
//! on target, never more than one level above the current dose. Unless the
//! trial has just stopped, Designs 1-4 then evaluate an add-on escalation rule
//! at the current dose; when it fires, the trial escalates by exactly one
//! level regardless of overdose control.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::posterior::{IntervalProbs, ModelSpec, ToxicityIntervals};

/// Which add-on rule (if any) supplements overdose control.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "original")]
    Original,
    /// `alpha_f * P(Under)_i > (1 - alpha_f) * P(Over)_i`
    #[serde(rename = "d1")]
    Design1,
    /// `P(Under)_i > g(r_i) * P(Over)_{i+1}`
    #[serde(rename = "d2")]
    Design2,
    /// Design 1 on unit probability masses.
    #[serde(rename = "d3")]
    Design3,
    /// Design 2 on unit probability masses.
    #[serde(rename = "d4")]
    Design4,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Original,
        Variant::Design1,
        Variant::Design2,
        Variant::Design3,
        Variant::Design4,
    ];

    /// Short name used on the command line and in config files.
    pub fn key(self) -> &'static str {
        match self {
            Variant::Original => "original",
            Variant::Design1 => "d1",
            Variant::Design2 => "d2",
            Variant::Design3 => "d3",
            Variant::Design4 => "d4",
        }
    }

    /// Column title used in report tables.
    pub fn title(self) -> &'static str {
        match self {
            Variant::Original => "Original BLRM",
            Variant::Design1 => "Design 1",
            Variant::Design2 => "Design 2",
            Variant::Design3 => "Design 3",
            Variant::Design4 => "Design 4",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "original" | "blrm" => Ok(Variant::Original),
            "d1" | "design1" => Ok(Variant::Design1),
            "d2" | "design2" => Ok(Variant::Design2),
            "d3" | "design3" => Ok(Variant::Design3),
            "d4" | "design4" => Ok(Variant::Design4),
            other => Err(Error::InvalidInput(format!("unknown design variant '{other}'"))),
        }
    }
}

/// Everything a design needs besides the posterior.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DesignConfig {
    pub intervals: ToxicityIntervals,
    pub variant: Variant,
    /// Overdose control bound `c` on P(Over).
    pub overdose_bound: f64,
    /// Feasibility bound `alpha_f` (Designs 1 and 3).
    pub feasibility_bound: f64,
    /// Exponent of `g(r) = r^exponent` (Designs 2 and 4).
    pub g_exponent: f64,
    pub mtd_min_patients: u32,
    pub mtd_target_prob_threshold: f64,
    pub max_sample_size: u32,
    pub cohort_size: u32,
    pub start_dose_index: usize,
}

impl DesignConfig {
    /// Simulation defaults: c = 0.3, alpha_f = 0.25, g(r) = r, 6 patients for
    /// MTD declaration, at most 45 patients in cohorts of 3 from the lowest
    /// dose. The P(Target) threshold is 0.5, or 0.4 for intervals narrower
    /// than 0.15.
    pub fn new(variant: Variant, intervals: ToxicityIntervals) -> Self {
        let width = intervals.upper() - intervals.lower();
        Self {
            intervals,
            variant,
            overdose_bound: 0.3,
            feasibility_bound: 0.25,
            g_exponent: 1.0,
            mtd_min_patients: 6,
            mtd_target_prob_threshold: if width < 0.15 { 0.4 } else { 0.5 },
            max_sample_size: 45,
            cohort_size: 3,
            start_dose_index: 0,
        }
    }

    pub fn with_variant(&self, variant: Variant) -> Self {
        Self {
            variant,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidInput(msg));
        if !(self.overdose_bound > 0.0 && self.overdose_bound < 1.0) {
            return bad(format!("overdose bound must lie in (0, 1), got {}", self.overdose_bound));
        }
        if !(self.feasibility_bound > 0.0 && self.feasibility_bound < 0.5) {
            return bad(format!(
                "feasibility bound must lie in (0, 0.5), got {}",
                self.feasibility_bound
            ));
        }
        if !(self.g_exponent > 0.0 && self.g_exponent.is_finite()) {
            return bad(format!("g exponent must be positive, got {}", self.g_exponent));
        }
        if !(self.mtd_target_prob_threshold >= 0.0 && self.mtd_target_prob_threshold <= 1.0) {
            return bad("MTD target-probability threshold must be a probability".into());
        }
        if self.cohort_size == 0 || self.mtd_min_patients == 0 {
            return bad("cohort size and MTD patient minimum must be at least 1".into());
        }
        if self.max_sample_size < self.cohort_size {
            return bad("maximum sample size is smaller than one cohort".into());
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate), plus checks against the dose grid.
    pub fn validate_for(&self, model: &ModelSpec) -> Result<()> {
        self.validate()?;
        if self.start_dose_index >= model.len() {
            return Err(Error::InvalidInput(format!(
                "start dose index {} outside a grid of {} doses",
                self.start_dose_index,
                model.len()
            )));
        }
        Ok(())
    }

    /// `g(r) = r^exponent`.
    pub fn g(&self, ratio: f64) -> f64 {
        ratio.powf(self.g_exponent)
    }
}

/// What to do after the latest cohort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Escalate(usize),
    Stay(usize),
    Deescalate(usize),
    StopAllToxic,
    DeclareMtd(usize),
    StopMaxN,
}

impl Action {
    /// Dose the action points at, if any.
    pub fn target_index(self) -> Option<usize> {
        match self {
            Action::Escalate(i) | Action::Stay(i) | Action::Deescalate(i) | Action::DeclareMtd(i) => {
                Some(i)
            }
            Action::StopAllToxic | Action::StopMaxN => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Action::Escalate(_) => "escalate",
            Action::Stay(_) => "stay",
            Action::Deescalate(_) => "deescalate",
            Action::StopAllToxic => "stop_all_toxic",
            Action::DeclareMtd(_) => "declare_mtd",
            Action::StopMaxN => "stop_max_n",
        }
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, Action::StopAllToxic | Action::DeclareMtd(_) | Action::StopMaxN)
    }
}

/// A recommendation and whether an add-on rule produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    pub action: Action,
    pub addon_triggered: bool,
}

impl Decision {
    fn plain(action: Action) -> Self {
        Self {
            action,
            addon_triggered: false,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct DecisionWire {
    action: String,
    target_index: Option<usize>,
    addon_triggered: bool,
}

impl Serialize for Decision {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        DecisionWire {
            action: self.action.name().to_string(),
            target_index: self.action.target_index(),
            addon_triggered: self.addon_triggered,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Decision {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let w = DecisionWire::deserialize(d)?;
        let need = |idx: Option<usize>| {
            idx.ok_or_else(|| D::Error::custom(format!("action '{}' needs target_index", w.action)))
        };
        let action = match w.action.as_str() {
            "escalate" => Action::Escalate(need(w.target_index)?),
            "stay" => Action::Stay(need(w.target_index)?),
            "deescalate" => Action::Deescalate(need(w.target_index)?),
            "declare_mtd" => Action::DeclareMtd(need(w.target_index)?),
            "stop_all_toxic" => Action::StopAllToxic,
            "stop_max_n" => Action::StopMaxN,
            other => return Err(D::Error::custom(format!("unknown action '{other}'"))),
        };
        Ok(Decision {
            action,
            addon_triggered: w.addon_triggered,
        })
    }
}

/// Where the trial stands when a decision is made.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialState {
    pub current_index: usize,
    /// Patients treated so far at the current dose.
    pub patients_at_current: u32,
    /// Patients enrolled so far across all doses.
    pub total_enrolled: u32,
}

/// Unit probability mass of underdosing, `P(Under) / a`.
pub fn upm_under(p_under: f64, a: f64) -> Result<f64> {
    if !(a > 0.0 && a < 1.0) {
        return Err(Error::Domain(format!("interval edge a = {a} outside (0, 1)")));
    }
    Ok(p_under / a)
}

/// Unit probability mass of overdosing, `P(Over) / (1 - b)`.
pub fn upm_over(p_over: f64, b: f64) -> Result<f64> {
    if !(b > 0.0 && b < 1.0) {
        return Err(Error::Domain(format!("interval edge b = {b} outside (0, 1)")));
    }
    Ok(p_over / (1.0 - b))
}

/// Both sides of an add-on inequality; the rule fires when `lhs > rhs`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AddonTerms {
    pub lhs: f64,
    pub rhs: f64,
}

impl AddonTerms {
    pub fn fires(&self) -> bool {
        self.lhs > self.rhs
    }
}

/// Evaluates the add-on inequality of `variant` at `current` without deciding.
pub fn addon_terms(
    variant: Variant,
    probs: &IntervalProbs,
    current: usize,
    model: &ModelSpec,
    config: &DesignConfig,
) -> Result<AddonTerms> {
    let k = probs.len();
    if current + 1 >= k {
        return Err(Error::Contract(
            "add-on rules are not assessed at the highest dose".into(),
        ));
    }
    let a = config.intervals.lower();
    let b = config.intervals.upper();
    let af = config.feasibility_bound;
    let here = probs.get(current);
    let next = probs.get(current + 1);
    let g = || {
        model
            .step_ratio(current)
            .map(|r| config.g(r))
            .ok_or_else(|| Error::InvalidInput("dose grid shorter than the probabilities".into()))
    };
    let terms = match variant {
        Variant::Original => {
            return Err(Error::Contract("the original design has no add-on rule".into()))
        }
        Variant::Design1 => AddonTerms {
            lhs: af * here.under,
            rhs: (1.0 - af) * here.over,
        },
        Variant::Design2 => AddonTerms {
            lhs: here.under,
            rhs: g()? * next.over,
        },
        Variant::Design3 => AddonTerms {
            lhs: af * upm_under(here.under, a)?,
            rhs: (1.0 - af) * upm_over(here.over, b)?,
        },
        Variant::Design4 => AddonTerms {
            lhs: upm_under(here.under, a)?,
            rhs: g()? * upm_over(next.over, b)?,
        },
    };
    Ok(terms)
}

/// Whether the add-on rule of `variant` calls for escalating from `current`.
pub fn addon_rule(
    variant: Variant,
    probs: &IntervalProbs,
    current: usize,
    model: &ModelSpec,
    config: &DesignConfig,
) -> Result<bool> {
    addon_terms(variant, probs, current, model, config).map(|t| t.fires())
}

/// Base recommendation: the admissible dose with the highest P(Target).
///
/// Admissible doses have `P(Over) <= c` and sit at most one level above
/// `current`. Ties go to the lowest dose. An empty admissible set stops the
/// trial as all-toxic.
pub fn recommend_original(probs: &IntervalProbs, current: usize, config: &DesignConfig) -> Decision {
    let ceiling = (current + 1).min(probs.len().saturating_sub(1));
    let c = config.overdose_bound;
    let mut best: Option<(usize, f64)> = None;
    for i in 0..=ceiling {
        let row = probs.get(i);
        if row.over > c {
            continue;
        }
        if best.is_none_or(|(_, t)| row.target > t) {
            best = Some((i, row.target));
        }
    }
    let action = match best {
        None => Action::StopAllToxic,
        Some((i, _)) if i > current => Action::Escalate(i),
        Some((i, _)) if i == current => Action::Stay(i),
        Some((i, _)) => Action::Deescalate(i),
    };
    Decision::plain(action)
}

/// MTD declaration test for a proposed stay.
pub fn check_mtd_declaration(
    probs: &IntervalProbs,
    stay_index: usize,
    patients_at_dose: u32,
    config: &DesignConfig,
) -> bool {
    patients_at_dose >= config.mtd_min_patients
        && probs.target(stay_index) >= config.mtd_target_prob_threshold
}

/// Full decision after a cohort, including stopping rules.
///
/// Order of evaluation:
/// 1. stop when every dose has `P(Over) > c`;
/// 2. declare the MTD when the original rule stays at a dose that meets the
///    patient minimum and the target-probability threshold;
/// 3. escalate one level if the design's add-on rule fires (never at the top dose);
/// 4. otherwise follow the original rule;
/// 5. stop once the sample size is exhausted without a declaration.
pub fn next_action(
    probs: &IntervalProbs,
    state: &TrialState,
    config: &DesignConfig,
    model: &ModelSpec,
) -> Result<Decision> {
    let current = state.current_index;
    if current >= probs.len() {
        return Err(Error::InvalidInput(format!(
            "current dose index {current} outside {} doses",
            probs.len()
        )));
    }
    let c = config.overdose_bound;
    if probs.rows().iter().all(|r| r.over > c) {
        return Ok(Decision::plain(Action::StopAllToxic));
    }

    let original = recommend_original(probs, current, config);
    let mut decision = match original.action {
        Action::Stay(i) if check_mtd_declaration(probs, i, state.patients_at_current, config) => {
            Decision::plain(Action::DeclareMtd(i))
        }
        _ if config.variant != Variant::Original
            && current + 1 < probs.len()
            && addon_rule(config.variant, probs, current, model, config)? =>
        {
            Decision {
                action: Action::Escalate(current + 1),
                addon_triggered: true,
            }
        }
        _ => original,
    };
    if !decision.action.is_terminal() && state.total_enrolled >= config.max_sample_size {
        decision.action = Action::StopMaxN;
    }
    Ok(decision)
}
