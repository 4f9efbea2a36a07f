//! True dose-toxicity scenarios: three fixed parametric shapes and two
//! classes of randomly generated monotone curves.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Beta, Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::error::{Error, Result};
use crate::posterior::{ModelSpec, ToxicityIntervals};
use crate::rng::stream_rng;

/// Rejection attempts allowed per pseudo-uniform scenario.
pub const CLERTANT_MAX_ATTEMPTS: usize = 1_000_000;

/// True per-dose DLT rates and the index of the true MTD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub rates: Vec<f64>,
    /// `None` when the MTD lies below the lowest dose.
    pub mtd_index: Option<usize>,
    pub label: String,
}

impl ScenarioSpec {
    pub fn new(rates: Vec<f64>, mtd_index: Option<usize>, label: impl Into<String>) -> Result<Self> {
        if rates.is_empty() {
            return Err(Error::InvalidInput("scenario has no doses".into()));
        }
        if rates.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(Error::InvalidInput("scenario rates must lie in [0, 1]".into()));
        }
        if rates.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidInput("scenario rates must be nondecreasing".into()));
        }
        if mtd_index.is_some_and(|j| j >= rates.len()) {
            return Err(Error::InvalidInput("MTD index outside the dose grid".into()));
        }
        Ok(Self {
            rates,
            mtd_index,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }
}

/// Fixed dose-toxicity shapes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedShape {
    Steep,
    #[serde(alias = "s-shaped", alias = "s_shaped")]
    SShaped,
    Flat,
}

impl FixedShape {
    pub const ALL: [FixedShape; 3] = [FixedShape::Steep, FixedShape::SShaped, FixedShape::Flat];

    pub fn name(self) -> &'static str {
        match self {
            FixedShape::Steep => "steep",
            FixedShape::SShaped => "sshaped",
            FixedShape::Flat => "flat",
        }
    }
}

impl fmt::Display for FixedShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FixedShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "steep" => Ok(FixedShape::Steep),
            "sshaped" => Ok(FixedShape::SShaped),
            "flat" => Ok(FixedShape::Flat),
            other => Err(Error::InvalidInput(format!("unknown curve shape '{other}'"))),
        }
    }
}

/// True DLT rate of a fixed shape at `dose` (mg).
pub fn fixed_curve(shape: FixedShape, dose: f64) -> Result<f64> {
    if !(dose > 0.0) {
        return Err(Error::Domain(format!("dose must be positive, got {dose}")));
    }
    let p = match shape {
        // logit p = -0.916 + 1.2 ln(d / 100): 0.286 at 100 mg, increasing
        FixedShape::Steep => 1.0 / (1.0 + (0.916 - 1.2 * (dose / 100.0).ln()).exp()),
        FixedShape::SShaped => 0.6 / (1.0 + (-0.02 * (dose - 225.0)).exp()),
        FixedShape::Flat => 1.0 / (1.0 + (-2.0 * (dose / 700.0).ln()).exp()),
    };
    Ok(p)
}

/// Fixed scenario evaluated on a dose grid, with the MTD located by [`true_mtd`].
pub fn fixed_scenario(
    shape: FixedShape,
    model: &ModelSpec,
    intervals: &ToxicityIntervals,
) -> Result<ScenarioSpec> {
    let rates = model
        .doses()
        .iter()
        .map(|&d| fixed_curve(shape, d))
        .collect::<Result<Vec<_>>>()?;
    let mtd = true_mtd(&rates, intervals.ttl(), intervals);
    ScenarioSpec::new(rates, mtd, shape.name())
}

/// Index of the rate closest to `phi` (lowest on ties); `None` when every
/// rate is at or above the overdosing edge `b`.
pub fn true_mtd(rates: &[f64], phi: f64, intervals: &ToxicityIntervals) -> Option<usize> {
    if rates.iter().all(|&r| r >= intervals.upper()) {
        return None;
    }
    closest_to(rates, phi)
}

fn closest_to(rates: &[f64], phi: f64) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (i, &r) in rates.iter().enumerate() {
        let d = (r - phi).abs();
        if best.is_none_or(|(_, bd)| d < bd) {
            best = Some((i, d));
        }
    }
    best.map(|(i, _)| i)
}

fn check_common(j: usize, phi: f64) -> Result<()> {
    if j < 2 {
        return Err(Error::InvalidInput(format!("need at least 2 doses, got {j}")));
    }
    if !(phi > 0.0 && phi < 1.0) {
        return Err(Error::InvalidInput(format!("target level must lie in (0, 1), got {phi}")));
    }
    Ok(())
}

/// Pseudo-uniform scenario drawn from `rng`.
///
/// 1. Pick the MTD position uniformly.
/// 2. Draw `M ~ Beta(max(J - j, 0.5), 1)` (1-based `j`) and set
///    `B = phi + (1 - phi) M`.
/// 3. Draw `J` sorted uniforms on `(0, B)` until the `j`-th is strictly the
///    unique rate closest to `phi`.
pub fn generate_clertant<R: Rng + ?Sized>(j_doses: usize, phi: f64, rng: &mut R) -> Result<ScenarioSpec> {
    check_common(j_doses, phi)?;
    let mtd = rng.random_range(0..j_doses);
    let shape = ((j_doses - (mtd + 1)) as f64).max(0.5);
    let beta = Beta::new(shape, 1.0).map_err(|e| Error::Generation(e.to_string()))?;
    let upper = phi + (1.0 - phi) * beta.sample(rng);

    let mut rates = vec![0.0; j_doses];
    for _ in 0..CLERTANT_MAX_ATTEMPTS {
        for r in rates.iter_mut() {
            *r = upper * rng.random::<f64>();
        }
        rates.sort_by(f64::total_cmp);
        let gap = (rates[mtd] - phi).abs();
        let unique = rates
            .iter()
            .enumerate()
            .all(|(i, r)| i == mtd || (r - phi).abs() > gap);
        if unique {
            return ScenarioSpec::new(rates, Some(mtd), "clertant");
        }
    }
    Err(Error::Generation(format!(
        "no pseudo-uniform scenario accepted after {CLERTANT_MAX_ATTEMPTS} attempts"
    )))
}

/// Pseudo-uniform scenario from a seed.
pub fn gen_clertant(j_doses: usize, phi: f64, seed: u64) -> Result<ScenarioSpec> {
    generate_clertant(j_doses, phi, &mut stream_rng(seed, 0))
}

/// Tuning parameters of the probit-perturbation generator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaolettiParams {
    pub sigma0: f64,
    pub mu1: f64,
    pub sigma1: f64,
    pub mu2: f64,
    pub sigma2: f64,
}

impl Default for PaolettiParams {
    fn default() -> Self {
        Self {
            sigma0: 0.1,
            mu1: 0.2,
            sigma1: 0.3,
            mu2: 0.2,
            sigma2: 0.4,
        }
    }
}

impl PaolettiParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [self.sigma0, self.mu1, self.sigma1, self.mu2, self.sigma2]
            .iter()
            .all(|v| v.is_finite());
        if !finite || self.sigma0 <= 0.0 || self.sigma1 <= 0.0 || self.sigma2 <= 0.0 {
            return Err(Error::InvalidInput(
                "generator standard deviations must be positive and finite".into(),
            ));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.sigma0, self.mu1, self.sigma1, self.mu2, self.sigma2]
    }
}

impl FromStr for PaolettiParams {
    type Err = Error;

    /// Parses `sigma0,mu1,sigma1,mu2,sigma2`.
    fn from_str(s: &str) -> Result<Self> {
        let v: Vec<f64> = s
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::InvalidInput(format!("bad generator parameters '{s}': {e}")))?;
        let [sigma0, mu1, sigma1, mu2, sigma2] = v[..] else {
            return Err(Error::InvalidInput(format!(
                "expected 5 comma-separated generator parameters, got {}",
                v.len()
            )));
        };
        let p = Self {
            sigma0,
            mu1,
            sigma1,
            mu2,
            sigma2,
        };
        p.validate()?;
        Ok(p)
    }
}

fn std_normal() -> StdNormal {
    StdNormal::standard()
}

/// Probit with the open-interval edges mapped to infinities.
fn probit(p: f64) -> f64 {
    if p <= 0.0 {
        f64::NEG_INFINITY
    } else if p >= 1.0 {
        f64::INFINITY
    } else {
        std_normal().inverse_cdf(p)
    }
}

fn normal_cdf(z: f64) -> f64 {
    if z == f64::NEG_INFINITY {
        0.0
    } else if z == f64::INFINITY {
        1.0
    } else {
        std_normal().cdf(z)
    }
}

/// Probit-perturbation scenario drawn from `rng`.
///
/// The MTD rate is `Phi(eps)` with `eps ~ N(z(phi), sigma0^2)`. Its neighbours
/// are pushed far enough out on the probit scale that the MTD stays closest
/// to `phi`, and the remaining doses move away by squared normal increments:
/// upward above the MTD, downward below it.
pub fn generate_paoletti<R: Rng + ?Sized>(
    j_doses: usize,
    phi: f64,
    params: &PaolettiParams,
    rng: &mut R,
) -> Result<ScenarioSpec> {
    check_common(j_doses, phi)?;
    params.validate()?;
    let mtd = rng.random_range(0..j_doses);
    let dist = |mu: f64, sd: f64| Normal::new(mu, sd).map_err(|e| Error::Generation(e.to_string()));
    let mtd_noise = dist(probit(phi), params.sigma0)?;
    let below = dist(params.mu1, params.sigma1)?;
    let above = dist(params.mu2, params.sigma2)?;

    let mut z = vec![0.0; j_doses];
    z[mtd] = mtd_noise.sample(rng);
    let p_mtd = normal_cdf(z[mtd]);
    let z_phi = probit(phi);
    let z_mirror = probit(2.0 * phi - p_mtd);

    if mtd > 0 {
        let e: f64 = below.sample(rng);
        let shift = if z[mtd] > z_phi { z[mtd] - z_mirror } else { 0.0 };
        z[mtd - 1] = z[mtd] - shift - e * e;
    }
    if mtd + 1 < j_doses {
        let e: f64 = above.sample(rng);
        let shift = if z[mtd] < z_phi { z_mirror - z[mtd] } else { 0.0 };
        z[mtd + 1] = z[mtd] + shift + e * e;
    }
    for k in 2..=mtd {
        let e: f64 = below.sample(rng);
        z[mtd - k] = z[mtd - k + 1] - e * e;
    }
    for i in mtd + 2..j_doses {
        let e: f64 = above.sample(rng);
        z[i] = z[i - 1] + e * e;
    }

    let rates = z.into_iter().map(normal_cdf).collect();
    ScenarioSpec::new(rates, Some(mtd), "paoletti")
}

/// Probit-perturbation scenario from a seed.
pub fn gen_paoletti(j_doses: usize, phi: f64, params: &PaolettiParams, seed: u64) -> Result<ScenarioSpec> {
    generate_paoletti(j_doses, phi, params, &mut stream_rng(seed, 0))
}

/// Where a batch takes its true scenario from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "lowercase")]
pub enum ScenarioSource {
    Fixed(ScenarioSpec),
    Clertant { phi: f64 },
    Paoletti { phi: f64, params: PaolettiParams },
}

impl ScenarioSource {
    /// Scenario for one replicate; fixed sources ignore `rng`.
    pub fn draw<R: Rng + ?Sized>(&self, j_doses: usize, rng: &mut R) -> Result<ScenarioSpec> {
        match self {
            ScenarioSource::Fixed(s) => Ok(s.clone()),
            ScenarioSource::Clertant { phi } => generate_clertant(j_doses, *phi, rng),
            ScenarioSource::Paoletti { phi, params } => generate_paoletti(j_doses, *phi, params, rng),
        }
    }

    pub fn is_random(&self) -> bool {
        !matches!(self, ScenarioSource::Fixed(_))
    }

    pub fn label(&self) -> String {
        match self {
            ScenarioSource::Fixed(s) => s.label.clone(),
            ScenarioSource::Clertant { .. } => "clertant".into(),
            ScenarioSource::Paoletti { .. } => "paoletti".into(),
        }
    }
}
