use serde::{Deserialize, Serialize};

use super::{logit, mode, DoseProbs, IntervalProbs, Likelihood, PosteriorEngine, TrialData};
use super::{BivariatePrior, ToxicityIntervals};
use crate::error::{Error, Result};

/// Node counts for the nested posterior quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QuadratureSettings {
    /// Gauss-Hermite nodes along `log_beta`.
    pub outer_nodes: usize,
    /// Uniform grid points along `log_alpha` per outer node.
    pub inner_nodes: usize,
}

impl Default for QuadratureSettings {
    fn default() -> Self {
        Self {
            outer_nodes: 64,
            inner_nodes: 64,
        }
    }
}

/// One quadrature point of the posterior grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridPoint {
    pub log_alpha: f64,
    pub log_beta: f64,
    /// Normalized posterior mass attributed to this point.
    pub weight: f64,
    /// Unnormalized log posterior at this point.
    pub log_post: f64,
}

// Conditional density below this many log-units from its peak is treated as zero.
const TAIL_DROP: f64 = 30.0;
const INITIAL_HALF_WIDTH_SD: f64 = 8.0;

/// Tabulated conditional posterior of `log_alpha` at one `log_beta` node.
///
/// Between grid points the log density is the chord plus a parabola whose
/// curvature comes from second differences, so cell integrals are fourth
/// order in the spacing.
struct Slice {
    start: f64,
    step: f64,
    // log of (outer weight x unnormalized conditional density), per grid point
    log_f: Vec<f64>,
    // half the negated curvature of log_f, per cell
    bend: Vec<f64>,
    // cumulative mass up to each grid point
    cum: Vec<f64>,
}

impl Slice {
    fn new(start: f64, step: f64, log_f: Vec<f64>) -> Self {
        let n = log_f.len();
        let h2 = step * step;
        let curvature: Vec<f64> = (0..n)
            .map(|j| {
                let c = j.clamp(1, n - 2);
                (log_f[c + 1] - 2.0 * log_f[c] + log_f[c - 1]) / h2
            })
            .collect();
        // log-concave conditionals keep this non-negative; clamp rounding noise
        let bend: Vec<f64> = curvature
            .windows(2)
            .map(|w| (-0.25 * (w[0] + w[1])).max(0.0))
            .collect();
        let mut cum = Vec::with_capacity(n);
        let mut acc = 0.0;
        cum.push(0.0);
        for j in 0..n - 1 {
            acc += cell_integral(log_f[j], log_f[j + 1], bend[j], step, step);
            cum.push(acc);
        }
        Self {
            start,
            step,
            log_f,
            bend,
            cum,
        }
    }

    fn total(&self) -> f64 {
        *self.cum.last().expect("non-empty grid")
    }

    /// Mass below `t` under the interpolated density.
    fn cdf(&self, t: f64) -> f64 {
        if t <= self.start {
            return 0.0;
        }
        let pos = (t - self.start) / self.step;
        let last = self.log_f.len() - 1;
        if pos >= last as f64 {
            return self.total();
        }
        let j = (pos.floor() as usize).min(last - 1);
        let within = t - (self.start + j as f64 * self.step);
        self.cum[j]
            + cell_integral(self.log_f[j], self.log_f[j + 1], self.bend[j], self.step, within)
    }
}

/// Integral over `[0, t]` of `exp(l0 + (l1 - l0) s / h) * (1 + bend * s * (h - s))`.
#[inline]
fn cell_integral(l0: f64, l1: f64, bend: f64, h: f64, t: f64) -> f64 {
    let lambda = (l1 - l0) / h;
    let x = lambda * t;
    // moments E_k = int_0^t s^k exp(lambda s) ds
    let (e0, e1, e2) = if x.abs() < 0.5 {
        let mut term = 1.0;
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for m in 0..30 {
            let mf = m as f64;
            s0 += term / (mf + 1.0);
            s1 += term / (mf + 2.0);
            s2 += term / (mf + 3.0);
            term *= x / (mf + 1.0);
            if term.abs() < 1e-18 {
                break;
            }
        }
        (t * s0, t * t * s1, t * t * t * s2)
    } else {
        let e = x.exp();
        let e0 = (e - 1.0) / lambda;
        let e1 = (t * e - e0) / lambda;
        let e2 = (t * t * e - 2.0 * e1) / lambda;
        (e0, e1, e2)
    };
    l0.exp() * (e0 + bend * (h * e1 - e2))
}

struct Conditional<'a> {
    lik: &'a Likelihood,
    prior: &'a BivariatePrior,
    log_beta: f64,
    beta: f64,
}

impl Conditional<'_> {
    fn log_density(&self, u: f64) -> f64 {
        self.prior.log_density([u, self.log_beta]) + self.lik.log_lik_at(u, self.beta)
    }

    /// Value, slope and curvature of the conditional log density.
    fn derivatives(&self, u: f64) -> (f64, f64, f64) {
        let p = self.prior.precision();
        let m = self.prior.mean();
        let (v, d1, d2) = self.lik.alpha_derivatives(u, self.beta);
        let prior_slope = -(p.xx * (u - m[0]) + p.xy * (self.log_beta - m[1]));
        (
            self.prior.log_density([u, self.log_beta]) + v,
            prior_slope + d1,
            d2 - p.xx,
        )
    }

    /// Newton ascent on a strictly concave function of one variable.
    fn peak(&self, mut u: f64) -> (f64, f64, f64) {
        let (mut val, mut slope, mut curv) = self.derivatives(u);
        for _ in 0..60 {
            let step = -slope / curv;
            let mut t = 1.0;
            let mut moved = false;
            for _ in 0..40 {
                let cand = u + t * step;
                let (cv, cs, cc) = self.derivatives(cand);
                if cv >= val {
                    u = cand;
                    val = cv;
                    slope = cs;
                    curv = cc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if !moved || (t * step).abs() <= 1e-10 * (1.0 + u.abs()) {
                break;
            }
        }
        (u, val, curv)
    }

    fn tail_extent(&self, peak: f64, peak_val: f64, initial: f64, direction: f64) -> f64 {
        let mut width = initial;
        for _ in 0..60 {
            if self.log_density(peak + direction * width) - peak_val <= -TAIL_DROP {
                break;
            }
            width *= 1.5;
        }
        width
    }
}

struct Layout {
    mode_theta: [f64; 2],
    marginal_sd: f64,
    slope: f64,
    log_post_ref: f64,
}

fn layout(lik: &Likelihood, prior: &BivariatePrior) -> Result<Layout> {
    let m = mode::find_mode(lik, prior)?;
    let cov = m.hessian.inverse().ok_or_else(|| {
        Error::Numerical("Hessian at the posterior mode is singular".into())
    })?;
    if !(cov.yy > 0.0) {
        return Err(Error::Numerical(
            "non-positive marginal variance at the posterior mode".into(),
        ));
    }
    Ok(Layout {
        mode_theta: m.theta,
        marginal_sd: cov.yy.sqrt(),
        slope: cov.xy / cov.yy,
        log_post_ref: m.log_post,
    })
}

fn build_slice(
    cond: &Conditional<'_>,
    start_guess: f64,
    log_outer_weight: f64,
    log_post_ref: f64,
    points: usize,
) -> Slice {
    let (peak, peak_val, curv) = cond.peak(start_guess);
    let sd = 1.0 / (-curv).sqrt();
    let left = cond.tail_extent(peak, peak_val, INITIAL_HALF_WIDTH_SD * sd, -1.0);
    let right = cond.tail_extent(peak, peak_val, INITIAL_HALF_WIDTH_SD * sd, 1.0);
    let start = peak - left;
    let step = (left + right) / (points - 1) as f64;

    let log_f: Vec<f64> = (0..points)
        .map(|j| {
            let u = start + j as f64 * step;
            log_outer_weight + cond.log_density(u) - log_post_ref
        })
        .collect();
    Slice::new(start, step, log_f)
}

fn for_each_slice<F: FnMut(f64, f64, &Slice)>(
    engine: &PosteriorEngine,
    lik: &Likelihood,
    mut visit: F,
) -> Result<()> {
    let prior = &engine.prior;
    let lay = layout(lik, prior)?;
    let inner = engine.settings.inner_nodes.max(3);
    let scale = std::f64::consts::SQRT_2 * lay.marginal_sd;
    let rule = &engine.outer_rule;

    for (&z, &w) in rule.nodes().iter().zip(rule.weights()) {
        let log_beta = lay.mode_theta[1] + scale * z;
        let cond = Conditional {
            lik,
            prior,
            log_beta,
            beta: log_beta.exp(),
        };
        let guess = lay.mode_theta[0] + lay.slope * (log_beta - lay.mode_theta[1]);
        let slice = build_slice(&cond, guess, w.ln() + z * z, lay.log_post_ref, inner);
        visit(log_beta, cond.beta, &slice);
    }
    Ok(())
}

pub(super) fn interval_probs(
    engine: &PosteriorEngine,
    data: &TrialData,
    intervals: &ToxicityIntervals,
) -> Result<IntervalProbs> {
    let lik = Likelihood::new(data, &engine.model);
    let x = engine.model.log_dose_ratios();
    let k = x.len();
    let logit_a = logit(intervals.lower());
    let logit_b = logit(intervals.upper());

    let mut total = 0.0;
    let mut below_a = vec![0.0; k];
    let mut below_b = vec![0.0; k];
    for_each_slice(engine, &lik, |_, beta, slice| {
        total += slice.total();
        for i in 0..k {
            // p_i <= a  <=>  log_alpha <= logit(a) - beta * x_i
            below_a[i] += slice.cdf(logit_a - beta * x[i]);
            below_b[i] += slice.cdf(logit_b - beta * x[i]);
        }
    })?;

    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numerical(format!(
            "posterior normalizing mass is {total}"
        )));
    }
    let rows = (0..k)
        .map(|i| {
            let under = below_a[i] / total;
            let over = (total - below_b[i]) / total;
            let target = ((below_b[i] - below_a[i]) / total).max(0.0);
            DoseProbs {
                under,
                target,
                over,
            }
        })
        .collect();
    Ok(IntervalProbs::new(rows))
}

pub(super) fn grid(engine: &PosteriorEngine, data: &TrialData) -> Result<Vec<GridPoint>> {
    let lik = Likelihood::new(data, &engine.model);
    let mut points = Vec::new();
    let mut total = 0.0;
    for_each_slice(engine, &lik, |log_beta, beta, slice| {
        let n = slice.log_f.len();
        for j in 0..n {
            let below = if j > 0 { slice.cum[j] - slice.cum[j - 1] } else { 0.0 };
            let above = if j + 1 < n { slice.cum[j + 1] - slice.cum[j] } else { 0.0 };
            let log_alpha = slice.start + j as f64 * slice.step;
            points.push(GridPoint {
                log_alpha,
                log_beta,
                weight: 0.5 * (below + above),
                log_post: engine.prior.log_density([log_alpha, log_beta])
                    + lik.log_lik_at(log_alpha, beta),
            });
        }
        total += slice.total();
    })?;
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numerical(format!(
            "posterior normalizing mass is {total}"
        )));
    }
    for p in &mut points {
        p.weight /= total;
    }
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::posterior::{BivariatePrior, ModelSpec};

    #[test]
    fn cell_integral_matches_closed_form() {
        // exp(-x) on [0, 1]: integral 1 - e^-1
        let v = cell_integral(0.0, -1.0, 0.0, 1.0, 1.0);
        assert!((v - (1.0 - (-1f64).exp())).abs() < 1e-15);
        assert!((cell_integral(0.3, 0.3, 0.0, 2.0, 0.5) - 0.5 * 0.3f64.exp()).abs() < 1e-15);
        // zero slope, bend 1 on [0, 2]: int 1 + s(2 - s) = 2 + 4/3
        assert!((cell_integral(0.0, 0.0, 1.0, 2.0, 2.0) - 10.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn cell_integral_branches_agree() {
        // just inside and outside the series branch
        for &l1 in &[0.499, 0.501, -0.499, -0.501] {
            let a = cell_integral(0.0, l1, 0.7, 1.0, 1.0);
            let b = cell_integral(0.0, l1 * (1.0 + 1e-9), 0.7, 1.0, 1.0);
            assert!((a - b).abs() < 1e-8, "{a} {b}");
        }
        // midpoint rule oracle
        let (l0, l1, bend, h, t) = (-0.2, 1.7, 0.4, 0.8, 0.55);
        let m = 200_000;
        let ds = t / m as f64;
        let oracle: f64 = (0..m)
            .map(|i| {
                let s = (i as f64 + 0.5) * ds;
                (l0 + (l1 - l0) * s / h).exp() * (1.0 + bend * s * (h - s)) * ds
            })
            .sum();
        assert!((cell_integral(l0, l1, bend, h, t) - oracle).abs() < 1e-9);
    }

    #[test]
    fn grid_weights_sum_to_one() {
        let engine = PosteriorEngine::new(ModelSpec::standard(), BivariatePrior::default());
        let data = TrialData::new(vec![3, 3, 3, 3, 0, 0, 0], vec![0; 7]).unwrap();
        let g = engine.grid(&data).unwrap();
        assert_eq!(g.len(), 64 * 64);
        let s: f64 = g.iter().map(|p| p.weight).sum();
        assert!((s - 1.0).abs() < 1e-12);
    }
}
