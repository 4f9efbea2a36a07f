//! Table rendering for single fits, operating characteristics and generated
//! scenarios, in CSV, Markdown or JSON.
//!
//! Every printed number is a field of the input, rounded half away from zero.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};
use crate::posterior::{IntervalProbs, ModelSpec, TrialData};
use crate::scenarios::ScenarioSpec;
use crate::simulator::OperatingCharacteristics;

/// Output encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TableFormat {
    #[default]
    Csv,
    Markdown,
    Json,
}

impl FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(TableFormat::Csv),
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "json" => Ok(TableFormat::Json),
            other => Err(Error::InvalidInput(format!(
                "unknown format '{other}' (expected csv, markdown or json)"
            ))),
        }
    }
}

/// Rounds half away from zero to `decimals` places and prints exactly that many.
pub fn fixed(x: f64, decimals: usize) -> String {
    let scale = 10f64.powi(decimals as i32);
    let r = (x * scale).round() / scale;
    // avoid "-0.000"
    let r = if r == 0.0 { 0.0 } else { r };
    format!("{r:.decimals$}")
}

fn dose_label(d: f64) -> String {
    if d.fract() == 0.0 && d.abs() < 1e15 {
        format!("{}", d as i64)
    } else {
        format!("{d}")
    }
}

/// A plain grid of cells that knows how to print itself.
struct Grid {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Grid {
    fn csv(&self) -> String {
        let mut out = String::new();
        for row in std::iter::once(&self.header).chain(&self.rows) {
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    fn markdown(&self) -> String {
        let mut out = String::new();
        let line = |cells: &[String]| format!("| {} |\n", cells.join(" | "));
        out.push_str(&line(&self.header));
        let rule: Vec<String> = self.header.iter().map(|_| "---".to_string()).collect();
        out.push_str(&line(&rule));
        for row in &self.rows {
            out.push_str(&line(row));
        }
        out
    }

    fn render(&self, format: TableFormat, json: impl FnOnce() -> serde_json::Value) -> String {
        match format {
            TableFormat::Csv => self.csv(),
            TableFormat::Markdown => self.markdown(),
            TableFormat::Json => {
                let mut s = serde_json::to_string_pretty(&json()).expect("JSON values serialize");
                s.push('\n');
                s
            }
        }
    }
}

/// One dose of a single fit, as written to JSON.
#[derive(Debug, Clone, Serialize)]
struct FitRow {
    dose: f64,
    dlts: u32,
    patients: u32,
    p_under: f64,
    p_target: f64,
    p_over: f64,
}

/// Per-dose interval probabilities next to the data they came from.
pub fn render_single_fit(
    probs: &IntervalProbs,
    data: &TrialData,
    model: &ModelSpec,
    format: TableFormat,
) -> Result<String> {
    if probs.len() != model.len() || data.len() != model.len() {
        return Err(Error::InvalidInput(format!(
            "length mismatch: {} doses, {} probability rows, {} data rows",
            model.len(),
            probs.len(),
            data.len()
        )));
    }
    let rows: Vec<FitRow> = (0..model.len())
        .map(|i| FitRow {
            dose: model.doses()[i],
            dlts: data.dlts()[i],
            patients: data.patients()[i],
            p_under: probs.under(i),
            p_target: probs.target(i),
            p_over: probs.over(i),
        })
        .collect();
    let grid = Grid {
        header: ["Dose", "#DLT", "#Patient", "P(Under)", "P(Target)", "P(Over)"]
            .map(String::from)
            .to_vec(),
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    dose_label(r.dose),
                    r.dlts.to_string(),
                    r.patients.to_string(),
                    fixed(r.p_under, 3),
                    fixed(r.p_target, 3),
                    fixed(r.p_over, 3),
                ]
            })
            .collect(),
    };
    Ok(grid.render(format, || json!(rows)))
}

fn dose_row_label(model: &ModelSpec, i: usize, mtd: Option<usize>, format: TableFormat) -> String {
    let label = dose_label(model.doses()[i]);
    match (mtd == Some(i), format) {
        (false, _) => label,
        (true, TableFormat::Markdown) => format!("**{label}**"),
        (true, _) => format!("{label}*"),
    }
}

fn check_oc(oc: &OperatingCharacteristics, model: &ModelSpec) -> Result<()> {
    if oc.selection_frequency.len() != model.len() || oc.mean_patients.len() != model.len() {
        return Err(Error::InvalidInput(format!(
            "operating characteristics cover {} doses, model has {}",
            oc.selection_frequency.len(),
            model.len()
        )));
    }
    Ok(())
}

/// Row labels shared by the single-design and comparison layouts.
fn oc_row_labels(model: &ModelSpec, mtd: Option<usize>, format: TableFormat) -> Vec<String> {
    let mut labels = vec!["AllToxic".to_string()];
    labels.extend((0..model.len()).map(|i| dose_row_label(model, i, mtd, format)));
    labels.extend(["NotFound", "Overall", "%DLT"].map(String::from));
    labels
}

/// `(frequency, N)` cells of one design, one pair per row of [`oc_row_labels`].
fn oc_cells(oc: &OperatingCharacteristics) -> Vec<[String; 2]> {
    let dash = || "-".to_string();
    let mut cells = vec![[fixed(oc.all_toxic, 3), dash()]];
    cells.extend(
        oc.selection_frequency
            .iter()
            .zip(&oc.mean_patients)
            .map(|(&f, &n)| [fixed(f, 3), fixed(n, 2)]),
    );
    cells.push([fixed(oc.not_found, 3), dash()]);
    cells.push([String::new(), fixed(oc.mean_n, 2)]);
    cells.push([fixed(100.0 * oc.dlt_rate, 1), String::new()]);
    cells
}

/// One design's operating characteristics: AllToxic, one row per dose (the
/// true MTD flagged), NotFound, Overall and %DLT.
pub fn render_oc(
    oc: &OperatingCharacteristics,
    model: &ModelSpec,
    format: TableFormat,
) -> Result<String> {
    check_oc(oc, model)?;
    let labels = oc_row_labels(model, oc.mtd_index, format);
    let grid = Grid {
        header: ["MTD", "Frequency", "N"].map(String::from).to_vec(),
        rows: labels
            .into_iter()
            .zip(oc_cells(oc))
            .map(|(l, [f, n])| vec![l, f, n])
            .collect(),
    };
    Ok(grid.render(format, || json!(oc)))
}

/// Side-by-side designs under the same scenario, two columns per design.
pub fn render_comparison(
    ocs: &[OperatingCharacteristics],
    model: &ModelSpec,
    format: TableFormat,
) -> Result<String> {
    let first = ocs
        .first()
        .ok_or_else(|| Error::InvalidInput("nothing to compare".into()))?;
    for oc in ocs {
        check_oc(oc, model)?;
    }
    let mut header = vec!["MTD".to_string()];
    for oc in ocs {
        let key = oc.design.key();
        match format {
            TableFormat::Markdown => {
                header.push(format!("{} Frequency", oc.design.title()));
                header.push(format!("{} N", oc.design.title()));
            }
            _ => {
                header.push(format!("{key}_frequency"));
                header.push(format!("{key}_n"));
            }
        }
    }
    let columns: Vec<Vec<[String; 2]>> = ocs.iter().map(oc_cells).collect();
    let rows = oc_row_labels(model, first.mtd_index, format)
        .into_iter()
        .enumerate()
        .map(|(r, label)| {
            let mut row = vec![label];
            for col in &columns {
                row.extend(col[r].iter().cloned());
            }
            row
        })
        .collect();
    let grid = Grid { header, rows };
    Ok(grid.render(format, || json!(ocs)))
}

/// Correct-MTD frequency per design (rows) and per scenario class and target
/// interval (columns), in first-seen order.
pub fn render_random_summary(ocs: &[OperatingCharacteristics], format: TableFormat) -> Result<String> {
    if ocs.is_empty() {
        return Err(Error::InvalidInput("no results to summarize".into()));
    }
    let column_key = |oc: &OperatingCharacteristics| {
        format!(
            "{} ({}, {})",
            oc.scenario, oc.target_interval[0], oc.target_interval[1]
        )
    };
    let mut columns: Vec<String> = Vec::new();
    let mut designs = Vec::new();
    for oc in ocs {
        let c = column_key(oc);
        if !columns.contains(&c) {
            columns.push(c);
        }
        if !designs.contains(&oc.design) {
            designs.push(oc.design);
        }
    }
    let mut header = vec!["Design".to_string()];
    header.extend(columns.iter().cloned());
    let rows = designs
        .iter()
        .map(|&d| {
            let mut row = vec![d.title().to_string()];
            for c in &columns {
                let cell = ocs
                    .iter()
                    .find(|oc| oc.design == d && &column_key(oc) == c)
                    .map(|oc| fixed(oc.correct_frequency, 3))
                    .unwrap_or_else(|| "-".into());
                row.push(cell);
            }
            row
        })
        .collect();
    let grid = Grid { header, rows };
    let summary: Vec<_> = ocs
        .iter()
        .map(|oc| {
            json!({
                "design": oc.design,
                "scenario": oc.scenario,
                "target_interval": oc.target_interval,
                "correct_frequency": oc.correct_frequency,
                "n_replicates": oc.n_replicates,
            })
        })
        .collect();
    Ok(grid.render(format, || json!(summary)))
}

/// Long-format scenario listing: `scenario_id,dose_index,dose_mg_or_blank,rate,is_mtd`.
///
/// Doses are printed when `model` is given and has as many levels as the scenario.
pub fn render_scenarios_csv(
    scenarios: &[ScenarioSpec],
    model: Option<&ModelSpec>,
    preamble: &[String],
) -> String {
    let mut out = String::new();
    for line in preamble {
        let _ = writeln!(out, "# {line}");
    }
    out.push_str("scenario_id,dose_index,dose_mg_or_blank,rate,is_mtd\n");
    for (id, s) in scenarios.iter().enumerate() {
        let doses = model.filter(|m| m.len() == s.len()).map(|m| m.doses());
        for (i, rate) in s.rates.iter().enumerate() {
            let dose = doses.map(|d| dose_label(d[i])).unwrap_or_default();
            let is_mtd = u8::from(s.mtd_index == Some(i));
            let _ = writeln!(out, "{id},{i},{dose},{rate:.6},{is_mtd}");
        }
    }
    out
}
