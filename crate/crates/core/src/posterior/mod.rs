//! Two-parameter logistic dose-toxicity model, its bivariate normal prior, and
//! posterior toxicity-interval probabilities.
//!
//! The DLT probability at dose `d` is
//!
//! ```text
//! logit p(d) = log_alpha + exp(log_beta) * ln(d / d_ref)
//! ```
//!
//! and `(log_alpha, log_beta)` carries a bivariate normal prior. Interval
//! probabilities are integrals of indicator functions over the joint
//! posterior; they are computed deterministically (see [`PosteriorEngine`]).

mod intervals;
pub mod linalg;
mod mode;
pub mod quadrature;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use linalg::Sym2;

pub use intervals::{GridPoint, QuadratureSettings};
pub use mode::PosteriorMode;

/// Parameter vector `[log_alpha, log_beta]`.
pub type Theta = [f64; 2];

/// Provisional dose grid and reference dose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ModelSpecRaw", into = "ModelSpecRaw")]
pub struct ModelSpec {
    doses: Vec<f64>,
    reference_dose: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSpecRaw {
    doses: Vec<f64>,
    reference_dose: f64,
}

impl TryFrom<ModelSpecRaw> for ModelSpec {
    type Error = Error;

    fn try_from(raw: ModelSpecRaw) -> Result<Self> {
        ModelSpec::new(raw.doses, raw.reference_dose)
    }
}

impl From<ModelSpec> for ModelSpecRaw {
    fn from(m: ModelSpec) -> Self {
        ModelSpecRaw {
            doses: m.doses,
            reference_dose: m.reference_dose,
        }
    }
}

impl ModelSpec {
    pub fn new(doses: Vec<f64>, reference_dose: f64) -> Result<Self> {
        if doses.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "dose grid needs at least 2 doses, got {}",
                doses.len()
            )));
        }
        if doses.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidInput(
                "doses must be positive and finite".into(),
            ));
        }
        if doses.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput(
                "doses must be strictly increasing".into(),
            ));
        }
        if !(reference_dose > 0.0 && reference_dose.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "reference dose must be positive, got {reference_dose}"
            )));
        }
        Ok(Self {
            doses,
            reference_dose,
        })
    }

    /// Doses 10, 25, 50, 100, 200, 400, 800 mg with reference 100 mg.
    pub fn standard() -> Self {
        Self::new(vec![10.0, 25.0, 50.0, 100.0, 200.0, 400.0, 800.0], 100.0)
            .expect("standard grid is valid")
    }

    pub fn doses(&self) -> &[f64] {
        &self.doses
    }

    pub fn reference_dose(&self) -> f64 {
        self.reference_dose
    }

    /// Number of provisional doses.
    pub fn len(&self) -> usize {
        self.doses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doses.is_empty()
    }

    /// `ln(d_i / d_ref)` for each dose.
    pub fn log_dose_ratios(&self) -> Vec<f64> {
        self.doses
            .iter()
            .map(|d| (d / self.reference_dose).ln())
            .collect()
    }

    /// Relative strength `d_{i+1} / d_i`; `None` at the top dose.
    pub fn step_ratio(&self, i: usize) -> Option<f64> {
        (i + 1 < self.doses.len()).then(|| self.doses[i + 1] / self.doses[i])
    }
}

/// Bivariate normal prior on `(log_alpha, log_beta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PriorRaw", into = "PriorRaw")]
pub struct BivariatePrior {
    mean: Theta,
    covariance: Sym2,
    precision: Sym2,
    log_norm: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PriorRaw {
    mean: [f64; 2],
    covariance: [[f64; 2]; 2],
}

impl TryFrom<PriorRaw> for BivariatePrior {
    type Error = Error;

    fn try_from(raw: PriorRaw) -> Result<Self> {
        BivariatePrior::new(raw.mean, raw.covariance)
    }
}

impl From<BivariatePrior> for PriorRaw {
    fn from(p: BivariatePrior) -> Self {
        PriorRaw {
            mean: p.mean,
            covariance: p.covariance.to_rows(),
        }
    }
}

impl Default for BivariatePrior {
    /// Weakly informative prior: mean (-0.693, 0), covariance diag(4, 1).
    fn default() -> Self {
        Self::new([-0.693, 0.0], [[4.0, 0.0], [0.0, 1.0]]).expect("default prior is valid")
    }
}

impl BivariatePrior {
    pub fn new(mean: Theta, covariance: [[f64; 2]; 2]) -> Result<Self> {
        if mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidInput("prior mean must be finite".into()));
        }
        if covariance[0][1] != covariance[1][0] {
            return Err(Error::InvalidInput(
                "prior covariance must be symmetric".into(),
            ));
        }
        let cov = Sym2::from_rows(covariance);
        if cov.eigenvalues()[0] <= 0.0 || !cov.det().is_finite() {
            return Err(Error::InvalidInput(
                "prior covariance must be positive definite".into(),
            ));
        }
        let precision = cov.inverse().expect("positive definite matrix is invertible");
        let log_norm = -(2.0 * std::f64::consts::PI).ln() - 0.5 * cov.det().ln();
        Ok(Self {
            mean,
            covariance: cov,
            precision,
            log_norm,
        })
    }

    pub fn mean(&self) -> Theta {
        self.mean
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        self.covariance.to_rows()
    }

    pub fn precision(&self) -> Sym2 {
        self.precision
    }

    pub fn log_density(&self, theta: Theta) -> f64 {
        let d = [theta[0] - self.mean[0], theta[1] - self.mean[1]];
        self.log_norm - 0.5 * self.precision.quad_form(d)
    }
}

/// Cumulative per-dose patient and DLT counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TrialDataRaw", into = "TrialDataRaw")]
pub struct TrialData {
    n: Vec<u32>,
    y: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrialDataRaw {
    n: Vec<u32>,
    y: Vec<u32>,
}

impl TryFrom<TrialDataRaw> for TrialData {
    type Error = Error;

    fn try_from(raw: TrialDataRaw) -> Result<Self> {
        TrialData::new(raw.n, raw.y)
    }
}

impl From<TrialData> for TrialDataRaw {
    fn from(d: TrialData) -> Self {
        TrialDataRaw { n: d.n, y: d.y }
    }
}

impl TrialData {
    pub fn new(n: Vec<u32>, y: Vec<u32>) -> Result<Self> {
        if n.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "patient counts ({}) and DLT counts ({}) differ in length",
                n.len(),
                y.len()
            )));
        }
        if let Some(i) = (0..n.len()).find(|&i| y[i] > n[i]) {
            return Err(Error::InvalidInput(format!(
                "dose {i}: {} DLTs exceed {} patients",
                y[i], n[i]
            )));
        }
        Ok(Self { n, y })
    }

    /// No patients at any of `k` doses.
    pub fn empty(k: usize) -> Self {
        Self {
            n: vec![0; k],
            y: vec![0; k],
        }
    }

    pub fn len(&self) -> usize {
        self.n.len()
    }

    pub fn is_empty(&self) -> bool {
        self.n.is_empty()
    }

    pub fn patients(&self) -> &[u32] {
        &self.n
    }

    pub fn dlts(&self) -> &[u32] {
        &self.y
    }

    pub fn total_patients(&self) -> u32 {
        self.n.iter().sum()
    }

    pub fn total_dlts(&self) -> u32 {
        self.y.iter().sum()
    }

    /// Adds a cohort of `patients` with `dlts` events at dose `index`.
    pub fn record(&mut self, index: usize, patients: u32, dlts: u32) -> Result<()> {
        if index >= self.n.len() {
            return Err(Error::InvalidInput(format!("dose index {index} out of range")));
        }
        if dlts > patients {
            return Err(Error::InvalidInput(
                "cohort DLTs exceed cohort size".into(),
            ));
        }
        self.n[index] += patients;
        self.y[index] += dlts;
        Ok(())
    }

    pub(crate) fn check_against(&self, model: &ModelSpec) -> Result<()> {
        if self.len() != model.len() {
            return Err(Error::InvalidInput(format!(
                "trial data covers {} doses but the model has {}",
                self.len(),
                model.len()
            )));
        }
        Ok(())
    }
}

/// Target toxicity level with the target interval `(lower, upper)` around it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntervalsRaw", into = "IntervalsRaw")]
pub struct ToxicityIntervals {
    ttl: f64,
    lower: f64,
    upper: f64,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct IntervalsRaw {
    ttl: f64,
    lower: f64,
    upper: f64,
}

impl TryFrom<IntervalsRaw> for ToxicityIntervals {
    type Error = Error;

    fn try_from(raw: IntervalsRaw) -> Result<Self> {
        ToxicityIntervals::new(raw.ttl, raw.lower, raw.upper)
    }
}

impl From<ToxicityIntervals> for IntervalsRaw {
    fn from(t: ToxicityIntervals) -> Self {
        IntervalsRaw {
            ttl: t.ttl,
            lower: t.lower,
            upper: t.upper,
        }
    }
}

impl ToxicityIntervals {
    /// Requires `0 < lower < ttl < upper < 1`.
    pub fn new(ttl: f64, lower: f64, upper: f64) -> Result<Self> {
        if !(0.0 < lower && lower < ttl && ttl < upper && upper < 1.0) {
            return Err(Error::InvalidInput(format!(
                "need 0 < a < ttl < b < 1, got a = {lower}, ttl = {ttl}, b = {upper}"
            )));
        }
        Ok(Self { ttl, lower, upper })
    }

    /// TTL 0.25 with target interval (0.16, 0.33).
    pub fn wide() -> Self {
        Self::new(0.25, 0.16, 0.33).expect("valid")
    }

    /// TTL 0.25 with target interval (0.20, 0.30).
    pub fn narrow() -> Self {
        Self::new(0.25, 0.20, 0.30).expect("valid")
    }

    pub fn ttl(&self) -> f64 {
        self.ttl
    }

    /// Upper edge `a` of the underdosing interval `[0, a]`.
    pub fn lower(&self) -> f64 {
        self.lower
    }

    /// Lower edge `b` of the overdosing interval `[b, 1]`.
    pub fn upper(&self) -> f64 {
        self.upper
    }
}

/// Posterior interval probabilities at one dose.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DoseProbs {
    pub under: f64,
    pub target: f64,
    pub over: f64,
}

/// Per-dose posterior probabilities of underdosing, target toxicity and overdosing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct IntervalProbs {
    rows: Vec<DoseProbs>,
}

impl IntervalProbs {
    pub fn new(rows: Vec<DoseProbs>) -> Self {
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[DoseProbs] {
        &self.rows
    }

    pub fn get(&self, i: usize) -> DoseProbs {
        self.rows[i]
    }

    pub fn under(&self, i: usize) -> f64 {
        self.rows[i].under
    }

    pub fn target(&self, i: usize) -> f64 {
        self.rows[i].target
    }

    pub fn over(&self, i: usize) -> f64 {
        self.rows[i].over
    }
}

#[inline]
pub(crate) fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub(crate) fn inv_logit(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// DLT probability at `dose` for parameters `theta = [log_alpha, log_beta]`.
pub fn dlt_prob(theta: Theta, dose: f64, reference_dose: f64) -> Result<f64> {
    if !(dose > 0.0) || !(reference_dose > 0.0) {
        return Err(Error::Domain(format!(
            "dose ({dose}) and reference dose ({reference_dose}) must be positive"
        )));
    }
    Ok(inv_logit(theta[0] + theta[1].exp() * (dose / reference_dose).ln()))
}

/// Binomial log-likelihood terms for the doses that have patients.
#[derive(Debug, Clone)]
pub(crate) struct Likelihood {
    // (ln(d/d_ref), n, y)
    terms: Vec<(f64, f64, f64)>,
}

impl Likelihood {
    pub(crate) fn new(data: &TrialData, model: &ModelSpec) -> Self {
        let x = model.log_dose_ratios();
        let terms = data
            .patients()
            .iter()
            .zip(data.dlts())
            .zip(x)
            .filter(|((&n, _), _)| n > 0)
            .map(|((&n, &y), x)| (x, n as f64, y as f64))
            .collect();
        Self { terms }
    }

    /// `sum_i y_i ln p_i + (n_i - y_i) ln(1 - p_i)`.
    #[inline]
    pub(crate) fn log_lik(&self, theta: Theta) -> f64 {
        let beta = theta[1].exp();
        self.terms
            .iter()
            .map(|&(x, n, y)| {
                let eta = theta[0] + beta * x;
                y * eta - n * softplus(eta)
            })
            .sum()
    }

    /// Gradient and Hessian of the log-likelihood in `(log_alpha, log_beta)`.
    pub(crate) fn derivatives(&self, theta: Theta) -> (f64, [f64; 2], Sym2) {
        let beta = theta[1].exp();
        let mut ll = 0.0;
        let mut g = [0.0; 2];
        let mut h = Sym2::new(0.0, 0.0, 0.0);
        for &(x, n, y) in &self.terms {
            let eta = theta[0] + beta * x;
            let p = inv_logit(eta);
            let resid = y - n * p;
            let info = n * p * (1.0 - p);
            let bx = beta * x;
            ll += y * eta - n * softplus(eta);
            g[0] += resid;
            g[1] += resid * bx;
            h.xx -= info;
            h.xy -= info * bx;
            h.yy += resid * bx - info * bx * bx;
        }
        (ll, g, h)
    }

    /// Value, first and second derivative in `log_alpha` at fixed `log_beta`.
    #[inline]
    pub(crate) fn alpha_derivatives(&self, log_alpha: f64, beta: f64) -> (f64, f64, f64) {
        let mut v = 0.0;
        let mut d1 = 0.0;
        let mut d2 = 0.0;
        for &(x, n, y) in &self.terms {
            let eta = log_alpha + beta * x;
            let p = inv_logit(eta);
            v += y * eta - n * softplus(eta);
            d1 += y - n * p;
            d2 -= n * p * (1.0 - p);
        }
        (v, d1, d2)
    }

    #[inline]
    pub(crate) fn log_lik_at(&self, log_alpha: f64, beta: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(x, n, y)| {
                let eta = log_alpha + beta * x;
                y * eta - n * softplus(eta)
            })
            .sum()
    }
}

/// Log prior density plus binomial log-likelihood (no binomial coefficients).
pub fn log_posterior_unnormalized(
    theta: Theta,
    data: &TrialData,
    model: &ModelSpec,
    prior: &BivariatePrior,
) -> Result<f64> {
    data.check_against(model)?;
    Ok(prior.log_density(theta) + Likelihood::new(data, model).log_lik(theta))
}

/// Posterior computations for a fixed model, prior and quadrature setting.
///
/// The engine is immutable and holds no caches beyond the quadrature rule
/// built at construction, so one instance can be shared across threads.
///
/// Interval probabilities use a nested rule centred at the posterior mode.
/// The outer dimension is `log_beta`, integrated by Gauss-Hermite quadrature
/// scaled by the Laplace marginal standard deviation. For each outer node the
/// conditional posterior of `log_alpha` is tabulated on a uniform grid around
/// its conditional mode. Because `logit p_i` is linear in `log_alpha` at fixed
/// `log_beta`, each interval boundary is a single threshold on that grid and
/// the conditional CDF there is evaluated exactly for a log-linear interpolant.
#[derive(Debug, Clone)]
pub struct PosteriorEngine {
    model: ModelSpec,
    prior: BivariatePrior,
    settings: QuadratureSettings,
    outer_rule: quadrature::GaussHermite,
}

impl PosteriorEngine {
    pub fn new(model: ModelSpec, prior: BivariatePrior) -> Self {
        Self::with_settings(model, prior, QuadratureSettings::default())
    }

    pub fn with_settings(
        model: ModelSpec,
        prior: BivariatePrior,
        settings: QuadratureSettings,
    ) -> Self {
        let outer_rule = quadrature::GaussHermite::new(settings.outer_nodes.max(1));
        Self {
            model,
            prior,
            settings,
            outer_rule,
        }
    }

    pub fn model(&self) -> &ModelSpec {
        &self.model
    }

    pub fn prior(&self) -> &BivariatePrior {
        &self.prior
    }

    pub fn settings(&self) -> QuadratureSettings {
        self.settings
    }

    pub fn log_posterior(&self, theta: Theta, data: &TrialData) -> Result<f64> {
        log_posterior_unnormalized(theta, data, &self.model, &self.prior)
    }

    pub fn mode(&self, data: &TrialData) -> Result<PosteriorMode> {
        data.check_against(&self.model)?;
        mode::find_mode(&Likelihood::new(data, &self.model), &self.prior)
    }

    pub fn interval_probs(
        &self,
        data: &TrialData,
        intervals: &ToxicityIntervals,
    ) -> Result<IntervalProbs> {
        data.check_against(&self.model)?;
        intervals::interval_probs(self, data, intervals)
    }

    /// Quadrature points with normalized weights, for inspection.
    pub fn grid(&self, data: &TrialData) -> Result<Vec<GridPoint>> {
        data.check_against(&self.model)?;
        intervals::grid(self, data)
    }
}

/// Posterior mode and the Hessian of the negative log posterior there.
pub fn posterior_mode(
    data: &TrialData,
    model: &ModelSpec,
    prior: &BivariatePrior,
) -> Result<PosteriorMode> {
    data.check_against(model)?;
    mode::find_mode(&Likelihood::new(data, model), prior)
}

/// Interval probabilities with the default quadrature settings.
pub fn interval_probs(
    data: &TrialData,
    model: &ModelSpec,
    prior: &BivariatePrior,
    intervals: &ToxicityIntervals,
) -> Result<IntervalProbs> {
    PosteriorEngine::new(model.clone(), prior.clone()).interval_probs(data, intervals)
}
