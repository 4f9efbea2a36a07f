//! Simulated trials and operating characteristics over many replicates.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decision::{next_action, Action, Decision, DesignConfig, TrialState, Variant};
use crate::error::{Error, Result};
use crate::posterior::{PosteriorEngine, TrialData};
use crate::rng::stream_rng;
use crate::scenarios::{true_mtd, ScenarioSource, ScenarioSpec};

/// How a trial ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "index")]
pub enum Terminal {
    DeclaredMtd(usize),
    AllToxic,
    NotFound,
}

/// One enrolled cohort and the decision that followed it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortRecord {
    pub dose_index: usize,
    pub dlts: u32,
    pub decision: Decision,
}

/// Full record of a single simulated trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub terminal: Terminal,
    pub data: TrialData,
    pub total_n: u32,
    pub total_dlt: u32,
    pub trace: Vec<CohortRecord>,
}

/// Runs one trial with draws taken from `rng`.
pub fn run_trial_with<R: Rng + ?Sized>(
    scenario: &ScenarioSpec,
    design: &DesignConfig,
    engine: &PosteriorEngine,
    rng: &mut R,
) -> Result<TrialOutcome> {
    let model = engine.model();
    design.validate_for(model)?;
    if scenario.len() != model.len() {
        return Err(Error::InvalidInput(format!(
            "scenario has {} doses, model has {}",
            scenario.len(),
            model.len()
        )));
    }

    let mut data = TrialData::empty(model.len());
    let mut trace = Vec::new();
    let mut current = design.start_dose_index;
    let terminal = loop {
        let rate = scenario.rates[current];
        let dlts = (0..design.cohort_size)
            .filter(|_| rng.random::<f64>() < rate)
            .count() as u32;
        data.record(current, design.cohort_size, dlts)?;

        let step = engine
            .interval_probs(&data, &design.intervals)
            .and_then(|probs| {
                let state = TrialState {
                    current_index: current,
                    patients_at_current: data.patients()[current],
                    total_enrolled: data.total_patients(),
                };
                next_action(&probs, &state, design, model)
            });
        let decision = match step {
            Ok(d) => d,
            Err(source) => {
                return Err(Error::Simulation {
                    context: format!(
                        "trial failed after cohort {} at dose {current} (n = {:?}, y = {:?})",
                        trace.len() + 1,
                        data.patients(),
                        data.dlts()
                    ),
                    source: Box::new(source),
                })
            }
        };
        trace.push(CohortRecord {
            dose_index: current,
            dlts,
            decision,
        });

        match decision.action {
            Action::DeclareMtd(i) => break Terminal::DeclaredMtd(i),
            Action::StopAllToxic => break Terminal::AllToxic,
            Action::StopMaxN => break Terminal::NotFound,
            Action::Escalate(i) | Action::Stay(i) | Action::Deescalate(i) => current = i,
        }
    };

    Ok(TrialOutcome {
        terminal,
        total_n: data.total_patients(),
        total_dlt: data.total_dlts(),
        data,
        trace,
    })
}

/// Runs one trial on stream 0 of `seed`.
pub fn run_trial(
    scenario: &ScenarioSpec,
    design: &DesignConfig,
    engine: &PosteriorEngine,
    seed: u64,
) -> Result<TrialOutcome> {
    run_trial_with(scenario, design, engine, &mut stream_rng(seed, 0))
}

/// Per-replicate summary kept for aggregation.
#[derive(Debug, Clone)]
struct ReplicateResult {
    terminal: Terminal,
    truth: Option<usize>,
    /// Declared dose has its true rate inside the target interval.
    in_target: bool,
    patients: Vec<u32>,
    dlts: Vec<u32>,
}

impl ReplicateResult {
    fn correct(&self) -> bool {
        match (self.terminal, self.truth) {
            (Terminal::DeclaredMtd(i), Some(j)) => i == j,
            (Terminal::AllToxic, None) => true,
            _ => false,
        }
    }
}

/// Batch-level settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchSettings {
    pub n_reps: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses every available core.
    #[serde(default)]
    pub parallelism: usize,
}

impl Default for BatchSettings {
    fn default() -> Self {
        Self {
            n_reps: 1000,
            master_seed: 20190101,
            parallelism: 0,
        }
    }
}

/// Aggregated operating characteristics of a design under one scenario source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingCharacteristics {
    pub design: Variant,
    pub scenario: String,
    /// `[a, b]` of the design's target interval.
    pub target_interval: [f64; 2],
    pub n_replicates: usize,
    /// Fraction of trials declaring each dose the MTD.
    pub selection_frequency: Vec<f64>,
    pub all_toxic: f64,
    pub not_found: f64,
    /// Mean patients treated at each dose.
    pub mean_patients: Vec<f64>,
    pub mean_n: f64,
    /// DLTs over patients, pooled across all trials.
    pub dlt_rate: f64,
    /// Fraction of trials whose declared MTD matches their own true MTD.
    pub correct_frequency: f64,
    /// Fraction of trials declaring a dose whose true rate lies in the target interval.
    pub target_interval_frequency: f64,
    /// Mean patients treated at each trial's true MTD.
    pub mean_patients_at_mtd: f64,
    /// True MTD of a fixed source; `None` for random sources.
    pub mtd_index: Option<usize>,
}

impl OperatingCharacteristics {
    fn aggregate(
        results: &[ReplicateResult],
        k: usize,
        design: &DesignConfig,
        source: &ScenarioSource,
    ) -> Self {
        let mut selected = vec![0u64; k];
        let mut patients = vec![0u64; k];
        let (mut all_toxic, mut not_found, mut correct, mut in_target) = (0u64, 0u64, 0u64, 0u64);
        let (mut total_n, mut total_dlt, mut at_mtd) = (0u64, 0u64, 0u64);
        for r in results {
            match r.terminal {
                Terminal::DeclaredMtd(i) => selected[i] += 1,
                Terminal::AllToxic => all_toxic += 1,
                Terminal::NotFound => not_found += 1,
            }
            correct += u64::from(r.correct());
            in_target += u64::from(r.in_target);
            for (acc, &n) in patients.iter_mut().zip(&r.patients) {
                *acc += u64::from(n);
            }
            total_n += r.patients.iter().map(|&n| u64::from(n)).sum::<u64>();
            total_dlt += r.dlts.iter().map(|&y| u64::from(y)).sum::<u64>();
            if let Some(j) = r.truth {
                at_mtd += u64::from(r.patients[j]);
            }
        }
        let reps = results.len() as f64;
        let frac = |c: u64| c as f64 / reps;
        let mtd_index = match source {
            ScenarioSource::Fixed(s) => true_mtd(&s.rates, design.intervals.ttl(), &design.intervals),
            _ => None,
        };
        Self {
            design: design.variant,
            scenario: source.label(),
            target_interval: [design.intervals.lower(), design.intervals.upper()],
            n_replicates: results.len(),
            selection_frequency: selected.into_iter().map(frac).collect(),
            all_toxic: frac(all_toxic),
            not_found: frac(not_found),
            mean_patients: patients.into_iter().map(frac).collect(),
            mean_n: frac(total_n),
            dlt_rate: if total_n == 0 {
                0.0
            } else {
                total_dlt as f64 / total_n as f64
            },
            correct_frequency: frac(correct),
            target_interval_frequency: frac(in_target),
            mean_patients_at_mtd: frac(at_mtd),
            mtd_index,
        }
    }
}

fn run_replicate(
    source: &ScenarioSource,
    design: &DesignConfig,
    engine: &PosteriorEngine,
    master_seed: u64,
    replicate: usize,
) -> Result<ReplicateResult> {
    let mut rng = stream_rng(master_seed, replicate as u64);
    let k = engine.model().len();
    let run = source
        .draw(k, &mut rng)
        .and_then(|scenario| {
            let outcome = run_trial_with(&scenario, design, engine, &mut rng)?;
            Ok((scenario, outcome))
        });
    let (scenario, outcome) = run.map_err(|source| Error::Simulation {
        context: format!("replicate {replicate} (master seed {master_seed}, stream {replicate})"),
        source: Box::new(source),
    })?;
    let iv = &design.intervals;
    let in_target = match outcome.terminal {
        Terminal::DeclaredMtd(i) => (iv.lower()..=iv.upper()).contains(&scenario.rates[i]),
        _ => false,
    };
    Ok(ReplicateResult {
        terminal: outcome.terminal,
        in_target,
        truth: true_mtd(&scenario.rates, design.intervals.ttl(), &design.intervals),
        patients: outcome.data.patients().to_vec(),
        dlts: outcome.data.dlts().to_vec(),
    })
}

/// Runs `settings.n_reps` independent trials and aggregates them.
///
/// Replicate `i` draws its scenario (for random sources) and then its cohort
/// outcomes from stream `i` of `master_seed`, so the result does not depend on
/// the number of worker threads.
pub fn run_batch(
    source: &ScenarioSource,
    design: &DesignConfig,
    engine: &PosteriorEngine,
    settings: &BatchSettings,
) -> Result<OperatingCharacteristics> {
    if settings.n_reps == 0 {
        return Err(Error::InvalidInput("n_reps must be at least 1".into()));
    }
    design.validate_for(engine.model())?;
    if let ScenarioSource::Fixed(s) = source {
        if s.len() != engine.model().len() {
            return Err(Error::InvalidInput(format!(
                "scenario has {} doses, model has {}",
                s.len(),
                engine.model().len()
            )));
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(settings.parallelism)
        .build()
        .map_err(|e| Error::InvalidInput(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<ReplicateResult>> = pool.install(|| {
        (0..settings.n_reps)
            .into_par_iter()
            .map(|i| run_replicate(source, design, engine, settings.master_seed, i))
            .collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(OperatingCharacteristics::aggregate(
        &results,
        engine.model().len(),
        design,
        source,
    ))
}

/// Runs the same source and settings for each design.
pub fn compare_designs(
    source: &ScenarioSource,
    designs: &[DesignConfig],
    engine: &PosteriorEngine,
    settings: &BatchSettings,
) -> Result<Vec<OperatingCharacteristics>> {
    designs
        .iter()
        .map(|d| run_batch(source, d, engine, settings))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{BivariatePrior, ModelSpec, ToxicityIntervals};

    fn engine() -> PosteriorEngine {
        PosteriorEngine::new(ModelSpec::standard(), BivariatePrior::default())
    }

    fn flat(rate: f64) -> ScenarioSpec {
        ScenarioSpec::new(vec![rate; 7], None, "flat-rate").unwrap()
    }

    #[test]
    fn zero_rates_never_stop_for_toxicity() {
        let design = DesignConfig::new(Variant::Original, ToxicityIntervals::wide());
        let out = run_trial(&flat(0.0), &design, &engine(), 3).unwrap();
        assert_eq!(out.total_dlt, 0);
        assert_ne!(out.terminal, Terminal::AllToxic);
        assert_eq!(out.total_n % design.cohort_size, 0);
        assert!(out.total_n <= design.max_sample_size);
    }

    #[test]
    fn trial_is_reproducible() {
        let design = DesignConfig::new(Variant::Design1, ToxicityIntervals::wide());
        let s = ScenarioSpec::new(vec![0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7], Some(4), "t").unwrap();
        let a = run_trial(&s, &design, &engine(), 42).unwrap();
        let b = run_trial(&s, &design, &engine(), 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.trace.len() as u32 * design.cohort_size, a.total_n);
        if let Terminal::DeclaredMtd(i) = a.terminal {
            assert!(a.data.patients()[i] >= design.mtd_min_patients);
        }
    }

    #[test]
    fn single_replicate_batch_matches_outcome() {
        let design = DesignConfig::new(Variant::Original, ToxicityIntervals::wide());
        let source = ScenarioSource::Fixed(flat(0.9));
        let settings = BatchSettings {
            n_reps: 1,
            master_seed: 9,
            parallelism: 1,
        };
        let oc = run_batch(&source, &design, &engine(), &settings).unwrap();
        let total: f64 = oc.selection_frequency.iter().sum::<f64>() + oc.all_toxic + oc.not_found;
        assert_eq!(total, 1.0);
        assert!(oc.selection_frequency.iter().all(|&f| f == 0.0 || f == 1.0));
        assert_eq!(oc.mtd_index, None);
    }

    #[test]
    fn rejects_mismatched_scenario() {
        let design = DesignConfig::new(Variant::Original, ToxicityIntervals::wide());
        let s = ScenarioSpec::new(vec![0.1, 0.2], Some(0), "short").unwrap();
        assert!(run_trial(&s, &design, &engine(), 1).is_err());
    }
}
