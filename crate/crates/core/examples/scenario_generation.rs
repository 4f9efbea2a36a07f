//! Random monotone dose-toxicity scenarios from both generator classes, with a
//! check of how often each dose position is drawn as the MTD.
//!
//! ```text
//! cargo run --example scenario_generation
//! ```

use blrm::rng::stream_rng;
use blrm::scenarios::{generate_clertant, generate_paoletti, PaolettiParams};

fn main() -> blrm::Result<()> {
    let phi = 0.25;
    let k = 7;
    let params = PaolettiParams::default();

    println!("pseudo-uniform (Clertant):");
    let mut rng = stream_rng(7, 0);
    for _ in 0..5 {
        let s = generate_clertant(k, phi, &mut rng)?;
        println!("  MTD {:?}: {}", s.mtd_index, fmt_rates(&s.rates));
    }

    println!("probit perturbation (Paoletti):");
    let mut rng = stream_rng(7, 1);
    for _ in 0..5 {
        let s = generate_paoletti(k, phi, &params, &mut rng)?;
        println!("  MTD {:?}: {}", s.mtd_index, fmt_rates(&s.rates));
    }

    let draws = 10_000;
    let mut counts = vec![0usize; k];
    let mut rng = stream_rng(7, 2);
    for _ in 0..draws {
        let s = generate_clertant(k, phi, &mut rng)?;
        counts[s.mtd_index.expect("generated scenarios carry an MTD")] += 1;
    }
    println!("\nMTD position counts over {draws} pseudo-uniform draws: {counts:?}");
    Ok(())
}

fn fmt_rates(rates: &[f64]) -> String {
    rates
        .iter()
        .map(|r| format!("{r:.3}"))
        .collect::<Vec<_>>()
        .join(" ")
}
