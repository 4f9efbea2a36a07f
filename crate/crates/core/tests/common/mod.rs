//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use blrm::posterior::{dlt_prob, BivariatePrior, IntervalProbs, ModelSpec, ToxicityIntervals, TrialData};
use blrm::rng::stream_rng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Cohorts of three walked up and down the grid without skipping, at most
/// five cohorts so the prior stays a usable importance proposal.
pub fn random_dataset(seed: u64) -> TrialData {
    let mut rng = stream_rng(seed, 99);
    let k = 7;
    let mut n = vec![0u32; k];
    let mut y = vec![0u32; k];
    let mut current = 0usize;
    for _ in 0..rng.random_range(1..=5) {
        let dlts = rng.random_range(0..=3u32).min(rng.random_range(0..=3u32));
        n[current] += 3;
        y[current] += dlts;
        current = match dlts {
            0 => (current + 1).min(k - 1),
            1 => current,
            _ => current.saturating_sub(1),
        };
    }
    TrialData::new(n, y).unwrap()
}

pub fn log_lik(theta: [f64; 2], data: &TrialData, model: &ModelSpec) -> f64 {
    let mut ll = 0.0;
    for (i, &dose) in model.doses().iter().enumerate() {
        let n = data.patients()[i] as f64;
        if n == 0.0 {
            continue;
        }
        let y = data.dlts()[i] as f64;
        let p = dlt_prob(theta, dose, model.reference_dose()).unwrap();
        ll += y * p.max(1e-300).ln() + (n - y) * (1.0 - p).max(1e-300).ln();
    }
    ll
}

/// Per-dose (under, target, over) from weighted parameter draws.
pub fn tally<I: Iterator<Item = ([f64; 2], f64)>>(
    points: I,
    model: &ModelSpec,
    iv: &ToxicityIntervals,
) -> Vec<[f64; 3]> {
    let k = model.len();
    let mut acc = vec![[0.0; 3]; k];
    let mut total = 0.0;
    for (theta, w) in points {
        total += w;
        for (i, &dose) in model.doses().iter().enumerate() {
            let p = dlt_prob(theta, dose, model.reference_dose()).unwrap();
            let slot = if p < iv.lower() {
                0
            } else if p <= iv.upper() {
                1
            } else {
                2
            };
            acc[i][slot] += w;
        }
    }
    acc.iter().map(|r| r.map(|v| v / total)).collect()
}

/// Rectangle rule on a 600 x 450 grid covering more than 6 prior standard
/// deviations in each direction.
pub fn grid_oracle(data: &TrialData, model: &ModelSpec, iv: &ToxicityIntervals) -> Vec<[f64; 3]> {
    let prior = BivariatePrior::default();
    let (na, nb) = (600, 450);
    let (a0, a1) = (-13.5, 12.0);
    let (b0, b1) = (-6.5, 6.5);
    let mut pts = Vec::with_capacity(na * nb);
    let mut max_lp = f64::NEG_INFINITY;
    for i in 0..na {
        let la = a0 + (a1 - a0) * (i as f64 + 0.5) / na as f64;
        for j in 0..nb {
            let lb = b0 + (b1 - b0) * (j as f64 + 0.5) / nb as f64;
            let theta = [la, lb];
            let lp = prior.log_density(theta) + log_lik(theta, data, model);
            max_lp = max_lp.max(lp);
            pts.push((theta, lp));
        }
    }
    tally(
        pts.into_iter().map(|(t, lp)| (t, (lp - max_lp).exp())),
        model,
        iv,
    )
}

/// Self-normalized importance sampling with the prior as proposal.
pub fn prior_is_oracle(
    data: &TrialData,
    model: &ModelSpec,
    iv: &ToxicityIntervals,
    draws: usize,
    seed: u64,
) -> Vec<[f64; 3]> {
    let prior = BivariatePrior::default();
    let mean = prior.mean();
    let cov = prior.covariance();
    // diagonal prior covariance, so independent draws suffice
    assert_eq!(cov[0][1], 0.0);
    let mut rng = stream_rng(seed, 7);
    let points = (0..draws).map(move |_| {
        let z0: f64 = StandardNormal.sample(&mut rng);
        let z1: f64 = StandardNormal.sample(&mut rng);
        let theta = [mean[0] + cov[0][0].sqrt() * z0, mean[1] + cov[1][1].sqrt() * z1];
        (theta, log_lik(theta, data, model).exp())
    });
    tally(points, model, iv)
}

pub fn max_abs_diff(probs: &IntervalProbs, oracle: &[[f64; 3]]) -> f64 {
    probs
        .rows()
        .iter()
        .zip(oracle)
        .flat_map(|(r, o)| {
            [
                (r.under - o[0]).abs(),
                (r.target - o[1]).abs(),
                (r.over - o[2]).abs(),
            ]
        })
        .fold(0.0, f64::max)
}

/// Upper-tail p-value of Pearson's chi-square test against equal cell counts.
pub fn chi_square_p(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}
