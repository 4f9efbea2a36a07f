//! Run configuration files (TOML) and per-cohort data files.
//!
//! Every section is optional and falls back to the simulation defaults; unknown
//! keys are rejected. [`RunConfig::to_toml`] writes the fully resolved file, so
//! a dumped config reloads to the same run.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::decision::{DesignConfig, Variant};
use crate::error::{Error, Result};
use crate::posterior::{
    BivariatePrior, ModelSpec, PosteriorEngine, QuadratureSettings, ToxicityIntervals, TrialData,
};
use crate::scenarios::{fixed_scenario, FixedShape, PaolettiParams, ScenarioSource, ScenarioSpec};
use crate::simulator::BatchSettings;

/// Complete description of a fit, a design and a simulation study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "ModelSpec::standard")]
    pub model: ModelSpec,
    #[serde(default)]
    pub prior: BivariatePrior,
    #[serde(default)]
    pub design: DesignSection,
    #[serde(default)]
    pub simulation: SimulationSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub quadrature: QuadratureSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelSpec::standard(),
            prior: BivariatePrior::default(),
            design: DesignSection::default(),
            simulation: SimulationSection::default(),
            scenario: ScenarioSection::default(),
            quadrature: QuadratureSettings::default(),
        }
    }
}

/// Design parameters; `tti` is `[a, b]` and `phi` the target toxicity level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignSection {
    pub variant: Variant,
    pub phi: f64,
    pub tti: [f64; 2],
    pub overdose_bound: f64,
    pub feasibility_bound: f64,
    pub g_exponent: f64,
    pub mtd_min_patients: u32,
    /// Defaults to 0.5, or 0.4 when the interval is narrower than 0.15.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mtd_target_prob_threshold: Option<f64>,
    pub max_sample_size: u32,
    pub cohort_size: u32,
    pub start_dose_index: usize,
}

impl Default for DesignSection {
    fn default() -> Self {
        let d = DesignConfig::new(Variant::Original, ToxicityIntervals::wide());
        Self {
            variant: d.variant,
            phi: d.intervals.ttl(),
            tti: [d.intervals.lower(), d.intervals.upper()],
            overdose_bound: d.overdose_bound,
            feasibility_bound: d.feasibility_bound,
            g_exponent: d.g_exponent,
            mtd_min_patients: d.mtd_min_patients,
            mtd_target_prob_threshold: None,
            max_sample_size: d.max_sample_size,
            cohort_size: d.cohort_size,
            start_dose_index: d.start_dose_index,
        }
    }
}

impl DesignSection {
    pub fn intervals(&self) -> Result<ToxicityIntervals> {
        ToxicityIntervals::new(self.phi, self.tti[0], self.tti[1])
    }

    /// Design for `variant` with every other field taken from this section.
    pub fn to_design(&self, variant: Variant) -> Result<DesignConfig> {
        let mut d = DesignConfig::new(variant, self.intervals()?);
        d.overdose_bound = self.overdose_bound;
        d.feasibility_bound = self.feasibility_bound;
        d.g_exponent = self.g_exponent;
        d.mtd_min_patients = self.mtd_min_patients;
        if let Some(t) = self.mtd_target_prob_threshold {
            d.mtd_target_prob_threshold = t;
        }
        d.max_sample_size = self.max_sample_size;
        d.cohort_size = self.cohort_size;
        d.start_dose_index = self.start_dose_index;
        d.validate()?;
        Ok(d)
    }
}

/// Batch size, seeding and the designs to compare.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSection {
    pub n_reps: usize,
    pub master_seed: u64,
    /// Worker threads; 0 uses every available core.
    pub parallelism: usize,
    pub variants: Vec<Variant>,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let b = BatchSettings::default();
        Self {
            n_reps: b.n_reps,
            master_seed: b.master_seed,
            parallelism: b.parallelism,
            variants: Variant::ALL.to_vec(),
        }
    }
}

impl SimulationSection {
    pub fn batch_settings(&self) -> BatchSettings {
        BatchSettings {
            n_reps: self.n_reps,
            master_seed: self.master_seed,
            parallelism: self.parallelism,
        }
    }
}

/// Scenario classes accepted in config files and on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScenarioClass {
    Fixed,
    Clertant,
    Paoletti,
}

impl std::str::FromStr for ScenarioClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "fixed" => Ok(ScenarioClass::Fixed),
            "clertant" | "pseudo-uniform" => Ok(ScenarioClass::Clertant),
            "paoletti" => Ok(ScenarioClass::Paoletti),
            other => Err(Error::InvalidInput(format!(
                "unknown scenario class '{other}' (expected fixed, clertant or paoletti)"
            ))),
        }
    }
}

/// True dose-toxicity scenario(s) for simulation and generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioSection {
    pub class: ScenarioClass,
    pub shape: FixedShape,
    /// Explicit true rates; overrides `shape` for the fixed class.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rates: Option<Vec<f64>>,
    /// Number of scenarios written by `scenario-gen`.
    pub n_scenarios: usize,
    pub paoletti: PaolettiParams,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self {
            class: ScenarioClass::Fixed,
            shape: FixedShape::SShaped,
            rates: None,
            n_scenarios: 20,
            paoletti: PaolettiParams::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::InvalidInput(format!("bad config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    /// The resolved configuration, including defaults that were not written.
    pub fn to_toml(&self) -> Result<String> {
        let mut resolved = self.clone();
        let d = self.design.to_design(self.design.variant)?;
        resolved.design.mtd_target_prob_threshold = Some(d.mtd_target_prob_threshold);
        toml::to_string(&resolved).map_err(|e| Error::InvalidInput(format!("cannot write config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        for &v in &self.simulation.variants {
            self.design.to_design(v)?.validate_for(&self.model)?;
        }
        self.design.to_design(self.design.variant)?.validate_for(&self.model)?;
        if self.simulation.n_reps == 0 {
            return Err(Error::InvalidInput("simulation.n_reps must be at least 1".into()));
        }
        if self.quadrature.outer_nodes == 0 || self.quadrature.inner_nodes < 3 {
            return Err(Error::InvalidInput(
                "quadrature needs at least 1 outer node and 3 inner points".into(),
            ));
        }
        self.scenario.paoletti.validate()?;
        if let Some(rates) = &self.scenario.rates {
            if rates.len() != self.model.len() {
                return Err(Error::InvalidInput(format!(
                    "scenario.rates has {} entries for {} doses",
                    rates.len(),
                    self.model.len()
                )));
            }
        }
        Ok(())
    }

    pub fn engine(&self) -> PosteriorEngine {
        PosteriorEngine::with_settings(self.model.clone(), self.prior.clone(), self.quadrature)
    }

    /// The configured design for each simulated variant.
    pub fn designs(&self) -> Result<Vec<DesignConfig>> {
        self.simulation
            .variants
            .iter()
            .map(|&v| self.design.to_design(v))
            .collect()
    }

    /// Fixed scenario from explicit rates or the configured shape.
    pub fn fixed_scenario(&self) -> Result<ScenarioSpec> {
        let intervals = self.design.intervals()?;
        match &self.scenario.rates {
            Some(rates) => {
                let mtd = crate::scenarios::true_mtd(rates, intervals.ttl(), &intervals);
                ScenarioSpec::new(rates.clone(), mtd, "custom")
            }
            None => fixed_scenario(self.scenario.shape, &self.model, &intervals),
        }
    }

    pub fn scenario_source(&self) -> Result<ScenarioSource> {
        let phi = self.design.phi;
        Ok(match self.scenario.class {
            ScenarioClass::Fixed => ScenarioSource::Fixed(self.fixed_scenario()?),
            ScenarioClass::Clertant => ScenarioSource::Clertant { phi },
            ScenarioClass::Paoletti => ScenarioSource::Paoletti {
                phi,
                params: self.scenario.paoletti,
            },
        })
    }
}

/// Cumulative trial data plus the dose the latest cohort received.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataFile {
    /// 0-based index of the current dose.
    pub current_index: usize,
    /// Patients per dose.
    pub n: Vec<u32>,
    /// DLTs per dose.
    pub y: Vec<u32>,
}

impl DataFile {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidInput(format!("bad data file: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read(path)?)
    }

    /// Validated data for `model`.
    pub fn trial_data(&self, model: &ModelSpec) -> Result<TrialData> {
        let data = TrialData::new(self.n.clone(), self.y.clone())?;
        if data.len() != model.len() {
            return Err(Error::InvalidInput(format!(
                "data covers {} doses, model has {}",
                data.len(),
                model.len()
            )));
        }
        if self.current_index >= model.len() {
            return Err(Error::InvalidInput(format!(
                "current_index {} outside {} doses",
                self.current_index,
                model.len()
            )));
        }
        Ok(data)
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_the_default_run() {
        assert_eq!(RunConfig::from_toml("").unwrap(), RunConfig::default());
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(RunConfig::from_toml("[design]\nalpha = 0.2\n").is_err());
        assert!(RunConfig::from_toml("[extra]\n").is_err());
    }

    #[test]
    fn dump_round_trips() {
        let text = "[design]\nvariant = \"d3\"\ntti = [0.2, 0.3]\n[simulation]\nn_reps = 10\n";
        let cfg = RunConfig::from_toml(text).unwrap();
        let dumped = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&dumped).unwrap();
        assert_eq!(back.design.mtd_target_prob_threshold, Some(0.4));
        assert_eq!(back.designs().unwrap(), cfg.designs().unwrap());
        assert_eq!(back.to_toml().unwrap(), dumped);
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(RunConfig::from_toml("[design]\nfeasibility_bound = 0.6\n").is_err());
        assert!(RunConfig::from_toml("[design]\ntti = [0.3, 0.2]\n").is_err());
        assert!(RunConfig::from_toml("[scenario]\nrates = [0.1]\n").is_err());
    }

    #[test]
    fn data_file_checks() {
        let model = ModelSpec::standard();
        let ok = DataFile::from_toml("current_index = 3\nn = [3,3,3,3,0,0,0]\ny = [0,0,0,0,0,0,0]\n")
            .unwrap();
        assert!(ok.trial_data(&model).is_ok());
        let bad = DataFile::from_toml("current_index = 0\nn = [3,0,0,0,0,0,0]\ny = [4,0,0,0,0,0,0]\n")
            .unwrap();
        assert!(bad.trial_data(&model).is_err());
    }
}
