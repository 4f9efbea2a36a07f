use serde::Serialize;

use super::linalg::Sym2;
use super::{BivariatePrior, Likelihood, Theta};
use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100;
const MAX_HALVINGS: usize = 60;
const GRAD_TOL: f64 = 1e-8;

/// Posterior mode with the Hessian of the negative log posterior at it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PosteriorMode {
    pub theta: Theta,
    pub hessian: Sym2,
    /// Log posterior (unnormalized) at the mode.
    pub log_post: f64,
    pub iterations: usize,
}

impl PosteriorMode {
    /// Laplace covariance, the inverse of [`Self::hessian`].
    pub fn covariance(&self) -> Sym2 {
        self.hessian
            .inverse()
            .expect("mode Hessian is positive definite")
    }
}

impl Serialize for Sym2 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(s)
    }
}

struct Eval {
    neg_log_post: f64,
    grad: [f64; 2],
    hess: Sym2,
}

fn evaluate(lik: &Likelihood, prior: &BivariatePrior, theta: Theta) -> Eval {
    let (ll, g, h) = lik.derivatives(theta);
    let m = prior.mean();
    let p = prior.precision();
    let pd = p.mul_vec([theta[0] - m[0], theta[1] - m[1]]);
    Eval {
        neg_log_post: -(prior.log_density(theta) + ll),
        grad: [pd[0] - g[0], pd[1] - g[1]],
        hess: Sym2::new(p.xx - h.xx, p.xy - h.xy, p.yy - h.yy),
    }
}

fn neg_log_post(lik: &Likelihood, prior: &BivariatePrior, theta: Theta) -> f64 {
    -(prior.log_density(theta) + lik.log_lik(theta))
}

fn sup_norm(v: [f64; 2]) -> f64 {
    v[0].abs().max(v[1].abs())
}

/// Damped Newton from the prior mean with step halving on non-decrease.
pub(crate) fn find_mode(lik: &Likelihood, prior: &BivariatePrior) -> Result<PosteriorMode> {
    let mut theta = prior.mean();
    let mut ev = evaluate(lik, prior, theta);

    for iteration in 0..=MAX_ITERATIONS {
        let gnorm = sup_norm(ev.grad);
        if !gnorm.is_finite() || !ev.neg_log_post.is_finite() {
            return Err(Error::NonConvergence {
                iterations: iteration,
                theta,
                grad_norm: gnorm,
                reason: "non-finite log posterior".into(),
            });
        }
        if gnorm <= GRAD_TOL && ev.hess.is_positive_definite() {
            return Ok(PosteriorMode {
                theta,
                hessian: ev.hess,
                log_post: -ev.neg_log_post,
                iterations: iteration,
            });
        }
        if iteration == MAX_ITERATIONS {
            break;
        }

        // Levenberg shift when the Hessian is not positive definite.
        let min_eig = ev.hess.eigenvalues()[0];
        let metric = if min_eig > 1e-10 {
            ev.hess
        } else {
            ev.hess.add_diagonal(-min_eig + 1e-3 * (1.0 + ev.hess.trace().abs()))
        };
        let dir = metric.solve(ev.grad).ok_or_else(|| Error::NonConvergence {
            iterations: iteration,
            theta,
            grad_norm: gnorm,
            reason: "singular Newton system".into(),
        })?;
        let step = [-dir[0], -dir[1]];

        // Differences below the rounding level of the objective count as no increase.
        let slack = 64.0 * f64::EPSILON * ev.neg_log_post.abs().max(1.0);
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let cand = [theta[0] + t * step[0], theta[1] + t * step[1]];
            let f = neg_log_post(lik, prior, cand);
            if f <= ev.neg_log_post + slack {
                accepted = Some(cand);
                break;
            }
            t *= 0.5;
        }
        let next = match accepted {
            Some(c) => c,
            // At the rounding floor the objective cannot decrease any further;
            // a full Newton step is still safe once the gradient is tiny.
            None if gnorm < 1e-5 => [theta[0] + step[0], theta[1] + step[1]],
            None => {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    theta,
                    grad_norm: gnorm,
                    reason: "line search failed".into(),
                })
            }
        };
        theta = next;
        ev = evaluate(lik, prior, theta);
    }

    Err(Error::NonConvergence {
        iterations: MAX_ITERATIONS,
        theta,
        grad_norm: sup_norm(ev.grad),
        reason: "iteration limit reached".into(),
    })
}
