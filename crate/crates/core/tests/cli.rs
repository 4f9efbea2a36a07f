//! End-to-end runs of the `blrm` binary and round-trips of its file formats.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use blrm::config::RunConfig;
use blrm::decision::{DesignConfig, Variant};
use blrm::posterior::{BivariatePrior, ModelSpec, PosteriorEngine, ToxicityIntervals};
use blrm::report::{render_comparison, render_oc, TableFormat};
use blrm::scenarios::{fixed_scenario, FixedShape, ScenarioSource};
use blrm::simulator::{compare_designs, BatchSettings};

fn preset(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("presets").join(name)
}

fn blrm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_blrm"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn decision_of(args: &[&str]) -> serde_json::Value {
    let text = stdout(&blrm(args));
    let doc: serde_json::Value = serde_json::from_str(&text).unwrap();
    doc["decision"].clone()
}

#[test]
fn recommend_reproduces_the_hypothetical_scenario() {
    let cfg = preset("table1.toml");
    let data = preset("table1-data.toml");
    let base = [
        "recommend",
        "--config",
        cfg.to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--format",
        "json",
    ];
    let original = decision_of(&base);
    assert_eq!(original["action"], "stay");
    assert_eq!(original["target_index"], 3);

    let mut d1 = base.to_vec();
    d1.extend(["--design", "d1"]);
    let d1 = decision_of(&d1);
    assert_eq!(d1["action"], "escalate");
    assert_eq!(d1["target_index"], 4);
    assert_eq!(d1["addon_triggered"], true);

    let mut c31 = base.to_vec();
    c31.extend(["--overdose-bound", "0.31"]);
    assert_eq!(decision_of(&c31)["action"], "escalate");
}

#[test]
fn recommend_csv_lists_every_dose() {
    let data = preset("table1-data.toml");
    let text = stdout(&blrm(&["recommend", "--data", data.to_str().unwrap()]));
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .from_reader(text.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["Dose", "#DLT", "#Patient", "P(Under)", "P(Target)", "P(Over)"]
    );
    let rows: Vec<csv::StringRecord> = rdr
        .records()
        .map(|r| r.unwrap())
        .take_while(|r| r.len() == 6)
        .collect();
    assert_eq!(rows.len(), 7);
    for r in &rows {
        let s: f64 = (3..6).map(|i| r[i].parse::<f64>().unwrap()).sum();
        assert!((s - 1.0).abs() <= 0.002, "{r:?}");
    }
}

#[test]
fn invalid_data_exits_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "current_index = 0\nn = [3, 0, 0, 0, 0, 0, 0]\ny = [4, 0, 0, 0, 0, 0, 0]\n")
        .unwrap();
    let out = blrm(&["recommend", "--data", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));

    let missing = blrm(&["recommend", "--data", "/nonexistent/data.toml"]);
    assert_eq!(missing.status.code(), Some(2));

    let bad_tti = blrm(&["config", "--tti", "0.5,0.2"]);
    assert_eq!(bad_tti.status.code(), Some(2));
}

#[test]
fn scenario_gen_writes_one_row_per_dose() {
    let text = stdout(&blrm(&[
        "scenario-gen",
        "--class",
        "clertant",
        "--n-scenarios",
        "20",
        "--phi",
        "0.25",
        "--seed",
        "1",
    ]));
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    assert_eq!(
        rdr.headers().unwrap().iter().collect::<Vec<_>>(),
        ["scenario_id", "dose_index", "dose_mg_or_blank", "rate", "is_mtd"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 140);
    for id in 0..20 {
        let mtds = rows
            .iter()
            .filter(|r| r[0] == *id.to_string() && &r[4] == "1")
            .count();
        assert_eq!(mtds, 1);
    }
}

#[test]
fn scenario_gen_echoes_generator_parameters() {
    let text = stdout(&blrm(&["scenario-gen", "--class", "paoletti", "--n-scenarios", "3"]));
    assert!(text
        .lines()
        .any(|l| l.starts_with('#') && l.contains("0.1,0.2,0.3,0.2,0.4")));

    let custom = stdout(&blrm(&[
        "scenario-gen",
        "--class",
        "paoletti",
        "--n-scenarios",
        "1",
        "--paoletti-params",
        "0.2,0.2,0.3,0.2,0.4",
    ]));
    assert!(custom.contains("0.2,0.2,0.3,0.2,0.4"));
}

#[test]
fn fixed_steep_scenario_matches_reference_rates() {
    let text = stdout(&blrm(&["scenario-gen", "--class", "fixed", "--shape", "steep"]));
    let expected = [0.025, 0.070, 0.148, 0.286, 0.479, 0.679, 0.829];
    let rows: Vec<Vec<String>> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(String::from).collect())
        .collect();
    assert_eq!(rows.len(), 7);
    for (row, want) in rows.iter().zip(expected) {
        let got: f64 = row[3].parse().unwrap();
        assert!((got - want).abs() <= 0.001, "{got} vs {want}");
    }
    assert_eq!(rows[3][2], "100");
    assert_eq!(rows[3][4], "1");
}

#[test]
fn dumped_config_reloads_to_the_same_run() {
    let dir = tempfile::tempdir().unwrap();
    let dumped = dir.path().join("effective.toml");
    let t6 = preset("table6.toml");
    stdout(&blrm(&[
        "config",
        "--config",
        t6.to_str().unwrap(),
        "--alpha-f",
        "0.3",
        "--out",
        dumped.to_str().unwrap(),
    ]));
    let reloaded = RunConfig::load(&dumped).unwrap();
    assert_eq!(reloaded.design.feasibility_bound, 0.3);
    assert_eq!(reloaded.design.tti, [0.2, 0.3]);
    let again = stdout(&blrm(&["config", "--config", dumped.to_str().unwrap()]));
    assert_eq!(again, std::fs::read_to_string(&dumped).unwrap());

    let sim = |cfg: &Path| {
        stdout(&blrm(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--reps",
            "6",
            "--design",
            "original,d3",
        ]))
    };
    let t6_with_af = dir.path().join("t6-af.toml");
    std::fs::write(
        &t6_with_af,
        std::fs::read_to_string(&t6)
            .unwrap()
            .replace("feasibility_bound = 0.25", "feasibility_bound = 0.3"),
    )
    .unwrap();
    assert_eq!(sim(&dumped), sim(&t6_with_af));
}

#[test]
fn simulate_is_identical_across_thread_counts() {
    let run = |threads: &str| {
        stdout(&blrm(&[
            "simulate", "--class", "fixed", "--shape", "flat", "--reps", "16", "--seed", "4",
            "--threads", threads, "--format", "json",
        ]))
    };
    assert_eq!(run("1"), run("8"));
}

#[test]
fn random_class_simulation_prints_a_summary() {
    let text = stdout(&blrm(&[
        "simulate", "--class", "clertant", "--reps", "8", "--design", "original,d1",
    ]));
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "Design,clertant (0.16, 0.33)");
    assert_eq!(lines.len(), 3);
}

#[test]
fn grid_weights_sum_to_one() {
    let data = preset("table1-data.toml");
    let text = stdout(&blrm(&["grid", "--data", data.to_str().unwrap()]));
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let total: f64 = rdr
        .records()
        .map(|r| r.unwrap()[2].parse::<f64>().unwrap())
        .sum();
    assert!((total - 1.0).abs() < 1e-4, "{total}");
}

#[test]
fn operating_characteristics_csv_round_trips() {
    let model = ModelSpec::standard();
    let engine = PosteriorEngine::new(model.clone(), BivariatePrior::default());
    let wide = ToxicityIntervals::wide();
    let source = ScenarioSource::Fixed(fixed_scenario(FixedShape::Steep, &model, &wide).unwrap());
    let designs = [
        DesignConfig::new(Variant::Original, wide),
        DesignConfig::new(Variant::Design2, wide),
    ];
    let settings = BatchSettings {
        n_reps: 20,
        master_seed: 3,
        parallelism: 0,
    };
    let ocs = compare_designs(&source, &designs, &engine, &settings).unwrap();

    let single = render_oc(&ocs[0], &model, TableFormat::Csv).unwrap();
    let mut rdr = csv::Reader::from_reader(single.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), model.len() + 4);
    assert_eq!(&rows[4][0], "100*");
    for (i, row) in rows[1..=model.len()].iter().enumerate() {
        let f: f64 = row[1].parse().unwrap();
        let n: f64 = row[2].parse().unwrap();
        assert!((f - ocs[0].selection_frequency[i]).abs() <= 0.0005);
        assert!((n - ocs[0].mean_patients[i]).abs() <= 0.005);
    }

    let table = render_comparison(&ocs, &model, TableFormat::Csv).unwrap();
    let mut rdr = csv::Reader::from_reader(table.as_bytes());
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(headers.len(), 5);
    assert_eq!(&headers[3], "d2_frequency");
    let overall = rdr
        .records()
        .map(|r| r.unwrap())
        .find(|r| &r[0] == "Overall")
        .unwrap();
    let n: f64 = overall[4].parse().unwrap();
    assert!((n - ocs[1].mean_n).abs() <= 0.005);

    let json = render_comparison(&ocs, &model, TableFormat::Json).unwrap();
    let parsed: Vec<blrm::simulator::OperatingCharacteristics> = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed, ocs);
}
