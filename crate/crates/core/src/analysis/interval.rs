//! Gaussian interval regression: observations are either exact values or
//! known only to lie in `[lo, hi]`. Fitted by maximum likelihood with a
//! cluster-robust score sandwich.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use super::ols::{clustered_meat, decompose, normal_p_value, ols, Covariance, FitResult};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Observation {
    Exact(f64),
    Interval { lo: f64, hi: f64 },
}

const MAX_ITER: usize = 200;
const GRAD_TOL: f64 = 1e-9;

struct Problem<'a> {
    x: &'a DMatrix<f64>,
    obs: &'a [Observation],
    normal: Normal,
}

impl Problem<'_> {
    fn k(&self) -> usize {
        self.x.ncols()
    }

    /// Log-likelihood and per-observation scores (`n x (k+1)`).
    fn evaluate(&self, theta: &DVector<f64>) -> (f64, DMatrix<f64>) {
        let k = self.k();
        let beta = theta.rows(0, k);
        let sigma = theta[k].exp();
        let mut ll = 0.0;
        let mut scores = DMatrix::zeros(self.obs.len(), k + 1);
        for (i, o) in self.obs.iter().enumerate() {
            let xi = self.x.row(i);
            let mu = (xi * beta)[(0, 0)];
            let (li, dmu, dls) = match *o {
                Observation::Exact(y) => {
                    let z = (y - mu) / sigma;
                    let li = -sigma.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln() - 0.5 * z * z;
                    (li, z / sigma, z * z - 1.0)
                }
                Observation::Interval { lo, hi } => {
                    let a = (lo - mu) / sigma;
                    let b = (hi - mu) / sigma;
                    let p = (self.normal.cdf(b) - self.normal.cdf(a)).max(1e-300);
                    let (pa, pb) = (self.normal.pdf(a), self.normal.pdf(b));
                    let (apa, bpb) = (if a.is_finite() { a * pa } else { 0.0 }, if b.is_finite() { b * pb } else { 0.0 });
                    (p.ln(), -(pb - pa) / (sigma * p), -(bpb - apa) / p)
                }
            };
            ll += li;
            for j in 0..k {
                scores[(i, j)] = dmu * xi[j];
            }
            scores[(i, k)] = dls;
        }
        (ll, scores)
    }

    fn gradient(&self, theta: &DVector<f64>) -> DVector<f64> {
        let (_, s) = self.evaluate(theta);
        s.row_sum().transpose()
    }

    fn hessian(&self, theta: &DVector<f64>) -> DMatrix<f64> {
        let m = theta.len();
        let mut h = DMatrix::zeros(m, m);
        for j in 0..m {
            let step = 1e-5 * theta[j].abs().max(1.0);
            let mut up = theta.clone();
            let mut down = theta.clone();
            up[j] += step;
            down[j] -= step;
            let col = (self.gradient(&up) - self.gradient(&down)) / (2.0 * step);
            h.set_column(j, &col);
        }
        (&h + h.transpose()) * 0.5
    }
}

/// Fits the interval model. Exact rows alone give back the least-squares
/// coefficients with the maximum-likelihood variance.
pub fn interval_regression(
    names: &[String],
    x: &DMatrix<f64>,
    obs: &[Observation],
    clusters: &[u64],
) -> Result<FitResult> {
    let (n, k) = x.shape();
    if obs.len() != n || clusters.len() != n {
        return Err(Error::Domain("interval regression inputs differ in length".into()));
    }
    for o in obs {
        if let Observation::Interval { lo, hi } = o {
            if lo.partial_cmp(hi) != Some(std::cmp::Ordering::Less) {
                return Err(Error::Domain(format!("empty interval [{lo}, {hi}]")));
            }
        }
    }
    decompose(names, x)?;

    // Start from least squares with intervals replaced by their midpoints.
    let mid = DVector::from_iterator(
        n,
        obs.iter().map(|o| match *o {
            Observation::Exact(y) => y,
            Observation::Interval { lo, hi } => {
                if lo.is_finite() && hi.is_finite() {
                    0.5 * (lo + hi)
                } else if lo.is_finite() {
                    lo
                } else {
                    hi
                }
            }
        }),
    );
    let start = ols(names, x, &mid, None, None, Covariance::Hc0)?;
    let mut theta = DVector::zeros(k + 1);
    for j in 0..k {
        theta[j] = start.coef[j];
    }
    theta[k] = (start.rss / n as f64).sqrt().max(1e-3).ln();

    let problem = Problem { x, obs, normal: Normal::standard() };
    let (mut ll, _) = problem.evaluate(&theta);
    let mut converged = false;
    for _ in 0..MAX_ITER {
        let g = problem.gradient(&theta);
        if g.amax() < GRAD_TOL * (n as f64) {
            converged = true;
            break;
        }
        let h = problem.hessian(&theta);
        let newton = (-&h).clone().cholesky().map(|c| c.solve(&g));
        let direction = match newton {
            Some(d) => d,
            None => g.clone() / g.norm().max(1.0),
        };
        let mut step = 1.0;
        let mut improved = false;
        while step > 1e-12 {
            let candidate = &theta + &direction * step;
            let (cand_ll, _) = problem.evaluate(&candidate);
            if cand_ll.is_finite() && cand_ll >= ll - 1e-12 {
                theta = candidate;
                ll = cand_ll;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            converged = problem.gradient(&theta).amax() < 1e-6 * (n as f64);
            break;
        }
    }
    if !converged {
        return Err(Error::Domain("interval regression did not converge".into()));
    }

    let (ll, scores) = problem.evaluate(&theta);
    let h = problem.hessian(&theta);
    let h_inv = (-&h)
        .try_inverse()
        .ok_or_else(|| Error::Domain("singular information matrix in interval regression".into()))?;
    let (meat, g) = clustered_meat(&scores, Some(clusters));
    if g < 2 {
        return Err(Error::Insufficient(format!("{g} cluster(s); at least 2 are needed")));
    }
    let gf = g as f64;
    let full = (&h_inv * meat * &h_inv) * (gf / (gf - 1.0));
    let cov = full.view((0, 0), (k, k)).into_owned();
    let coef: Vec<f64> = theta.rows(0, k).iter().copied().collect();
    let se: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let p = coef.iter().zip(&se).map(|(c, s)| normal_p_value(c / s)).collect();
    let fitted = x * theta.rows(0, k);
    let rss = obs
        .iter()
        .zip(fitted.iter())
        .filter_map(|(o, f)| match o {
            Observation::Exact(y) => Some((y - f).powi(2)),
            _ => None,
        })
        .sum();
    Ok(FitResult {
        names: names.to_vec(),
        coef,
        se,
        p,
        n_obs: n,
        n_clusters: g,
        r2: None,
        log_likelihood: ll,
        rss,
        covariance: cov,
    })
}
