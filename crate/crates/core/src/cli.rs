//! Command-line front end: recommendations from trial data, batch simulation,
//! scenario generation and posterior-grid dumps.
//!
//! Exit codes: 0 success, 2 input error, 3 numerical error.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::config::{DataFile, RunConfig, ScenarioClass};
use crate::decision::{next_action, TrialState, Variant};
use crate::error::{Error, Result};
use crate::report::{self, TableFormat};
use crate::rng::stream_rng;
use crate::scenarios::{generate_clertant, generate_paoletti, FixedShape, PaolettiParams, ScenarioSpec};
use crate::simulator::{compare_designs, OperatingCharacteristics};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "blrm", version, about = "BLRM dose finding with overdose and underdose control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the posterior to cumulative data and recommend the next dose.
    Recommend {
        /// TOML data file with `current_index`, `n` and `y`.
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Simulate trials and tabulate operating characteristics.
    Simulate {
        /// Scenario class: fixed, clertant or paoletti.
        #[arg(long)]
        class: Option<ScenarioClass>,
        /// Fixed curve: steep, sshaped or flat.
        #[arg(long)]
        shape: Option<FixedShape>,
        #[command(flatten)]
        common: Common,
    },
    /// Write true dose-toxicity scenarios as CSV.
    ScenarioGen {
        #[arg(long)]
        class: Option<ScenarioClass>,
        #[arg(long)]
        shape: Option<FixedShape>,
        #[arg(long)]
        n_scenarios: Option<usize>,
        /// sigma0,mu1,sigma1,mu2,sigma2
        #[arg(long)]
        paoletti_params: Option<PaolettiParams>,
        #[command(flatten)]
        common: Common,
    },
    /// Dump the posterior quadrature grid for a data file as CSV.
    Grid {
        #[arg(long)]
        data: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[command(flatten)]
        common: Common,
    },
}

/// Options shared by every subcommand; flags override the config file.
#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Design variant(s): original, d1, d2, d3, d4 (repeat or comma-separate).
    #[arg(long, value_delimiter = ',')]
    design: Vec<Variant>,
    /// Target toxicity interval as `a,b`.
    #[arg(long, value_parser = parse_pair)]
    tti: Option<[f64; 2]>,
    /// Target toxicity level.
    #[arg(long)]
    phi: Option<f64>,
    #[arg(long)]
    overdose_bound: Option<f64>,
    /// Feasibility bound for Designs 1 and 3.
    #[arg(long)]
    alpha_f: Option<f64>,
    #[arg(long)]
    g_exponent: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// csv, markdown or json.
    #[arg(long, default_value = "csv")]
    format: TableFormat,
    /// Write output here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn parse_pair(s: &str) -> std::result::Result<[f64; 2], String> {
    let parts: Vec<&str> = s.split(',').collect();
    let [a, b] = parts[..] else {
        return Err(format!("expected two comma-separated numbers, got '{s}'"));
    };
    let num = |t: &str| t.trim().parse::<f64>().map_err(|e| format!("'{t}': {e}"));
    Ok([num(a)?, num(b)?])
}

impl Common {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let d = &mut cfg.design;
        if let Some(&v) = self.design.first() {
            d.variant = v;
        }
        if !self.design.is_empty() {
            cfg.simulation.variants = self.design.clone();
        }
        if let Some(t) = self.tti {
            if t != d.tti {
                // a new interval resets a threshold that was derived from the old one
                d.mtd_target_prob_threshold = None;
            }
            d.tti = t;
        }
        if let Some(p) = self.phi {
            d.phi = p;
        }
        if let Some(c) = self.overdose_bound {
            d.overdose_bound = c;
        }
        if let Some(a) = self.alpha_f {
            d.feasibility_bound = a;
        }
        if let Some(g) = self.g_exponent {
            d.g_exponent = g;
        }
        let s = &mut cfg.simulation;
        if let Some(seed) = self.seed {
            s.master_seed = seed;
        }
        if let Some(r) = self.reps {
            s.n_reps = r;
        }
        if let Some(t) = self.threads {
            s.parallelism = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(path) => std::fs::write(path, text)
                .map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display()))),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|e| Error::InvalidInput(format!("cannot write output: {e}")))
            }
        }
    }
}

fn recommend(data: &Path, common: &Common) -> Result<String> {
    let cfg = common.resolve()?;
    let file = DataFile::load(data)?;
    let trial = file.trial_data(&cfg.model)?;
    let design = cfg.design.to_design(cfg.design.variant)?;
    let engine = cfg.engine();
    let probs = engine.interval_probs(&trial, &design.intervals)?;
    let state = TrialState {
        current_index: file.current_index,
        patients_at_current: trial.patients()[file.current_index],
        total_enrolled: trial.total_patients(),
    };
    let decision = next_action(&probs, &state, &design, &cfg.model)?;
    let table = report::render_single_fit(&probs, &trial, &cfg.model, common.format)?;
    Ok(match common.format {
        TableFormat::Json => {
            let fit: serde_json::Value = serde_json::from_str(&table).expect("rendered JSON parses");
            let doc = json!({ "design": design.variant, "fit": fit, "decision": decision });
            serde_json::to_string_pretty(&doc).expect("JSON values serialize") + "\n"
        }
        _ => {
            let decision = serde_json::to_string(&decision).expect("decisions serialize");
            format!("{table}\n{decision}\n")
        }
    })
}

fn simulate(class: Option<ScenarioClass>, shape: Option<FixedShape>, common: &Common) -> Result<String> {
    let mut cfg = common.resolve()?;
    if let Some(c) = class {
        cfg.scenario.class = c;
    }
    if let Some(s) = shape {
        cfg.scenario.shape = s;
        cfg.scenario.rates = None;
    }
    let engine = cfg.engine();
    let source = cfg.scenario_source()?;
    let designs = cfg.designs()?;
    let ocs: Vec<OperatingCharacteristics> =
        compare_designs(&source, &designs, &engine, &cfg.simulation.batch_settings())?;
    if source.is_random() {
        report::render_random_summary(&ocs, common.format)
    } else {
        report::render_comparison(&ocs, &cfg.model, common.format)
    }
}

fn scenario_gen(
    class: Option<ScenarioClass>,
    shape: Option<FixedShape>,
    n_scenarios: Option<usize>,
    params: Option<PaolettiParams>,
    common: &Common,
) -> Result<String> {
    let mut cfg = common.resolve()?;
    let class = class.unwrap_or(cfg.scenario.class);
    if let Some(s) = shape {
        cfg.scenario.shape = s;
        cfg.scenario.rates = None;
    }
    if let Some(p) = params {
        cfg.scenario.paoletti = p;
    }
    let n = n_scenarios.unwrap_or(cfg.scenario.n_scenarios);
    let phi = cfg.design.phi;
    let k = cfg.model.len();
    let seed = cfg.simulation.master_seed;

    let mut preamble = vec![format!("class = {}", class_name(class)), format!("phi = {phi}")];
    let scenarios: Vec<ScenarioSpec> = match class {
        ScenarioClass::Fixed => {
            let s = cfg.fixed_scenario()?;
            preamble.push(format!("shape = {}", s.label));
            vec![s]
        }
        ScenarioClass::Clertant => {
            preamble.push(format!("seed = {seed}"));
            (0..n)
                .map(|i| generate_clertant(k, phi, &mut stream_rng(seed, i as u64)))
                .collect::<Result<_>>()?
        }
        ScenarioClass::Paoletti => {
            let p = cfg.scenario.paoletti;
            preamble.push(format!("seed = {seed}"));
            preamble.push(format!(
                "paoletti_params = {},{},{},{},{} (sigma0,mu1,sigma1,mu2,sigma2)",
                p.sigma0, p.mu1, p.sigma1, p.mu2, p.sigma2
            ));
            (0..n)
                .map(|i| generate_paoletti(k, phi, &p, &mut stream_rng(seed, i as u64)))
                .collect::<Result<_>>()?
        }
    };
    Ok(report::render_scenarios_csv(&scenarios, Some(&cfg.model), &preamble))
}

fn class_name(c: ScenarioClass) -> &'static str {
    match c {
        ScenarioClass::Fixed => "fixed",
        ScenarioClass::Clertant => "clertant",
        ScenarioClass::Paoletti => "paoletti",
    }
}

fn grid(data: &Path, common: &Common) -> Result<String> {
    let cfg = common.resolve()?;
    let trial = DataFile::load(data)?.trial_data(&cfg.model)?;
    let points = cfg.engine().grid(&trial)?;
    let mut out = String::from("log_alpha,log_beta,weight,log_post\n");
    for p in points {
        out.push_str(&format!(
            "{:.10},{:.10},{:.6e},{:.10}\n",
            p.log_alpha, p.log_beta, p.weight, p.log_post
        ));
    }
    Ok(out)
}

fn dispatch(cli: Cli) -> Result<()> {
    let (text, common) = match &cli.command {
        Command::Recommend { data, common } => (recommend(data, common)?, common),
        Command::Simulate { class, shape, common } => (simulate(*class, *shape, common)?, common),
        Command::ScenarioGen {
            class,
            shape,
            n_scenarios,
            paoletti_params,
            common,
        } => (
            scenario_gen(*class, *shape, *n_scenarios, *paoletti_params, common)?,
            common,
        ),
        Command::Grid { data, common } => (grid(data, common)?, common),
        Command::Config { common } => (common.resolve()?.to_toml()?, common),
    };
    common.emit(&text)
}

/// Exit code for an engine error.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INPUT
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code. Errors go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return if code == 0 { EXIT_OK } else { EXIT_INPUT };
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pair_parser() {
        assert_eq!(parse_pair("0.2,0.3").unwrap(), [0.2, 0.3]);
        assert!(parse_pair("0.2").is_err());
        assert!(parse_pair("a,b").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }

    #[test]
    fn bad_flags_are_input_errors() {
        assert_eq!(run(["blrm", "simulate", "--design", "d9"]), EXIT_INPUT);
        assert_eq!(run(["blrm", "config", "--tti", "0.3,0.2"]), EXIT_INPUT);
    }
}
