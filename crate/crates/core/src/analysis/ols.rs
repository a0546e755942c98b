//! Ordinary least squares with cluster-robust (sandwich) covariance.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};

/// A column whose pivot satisfies `|R_jj| <= RANK_TOLERANCE * max_i |R_ii|`
/// in the orthogonal decomposition of the design is treated as collinear.
pub const RANK_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Covariance {
    /// Sandwich over clusters with factor `G/(G-1) * (N-1)/(N-K)`.
    Cluster,
    /// One cluster per observation, no small-sample factor.
    Hc0,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub names: Vec<String>,
    pub coef: Vec<f64>,
    pub se: Vec<f64>,
    pub p: Vec<f64>,
    pub n_obs: usize,
    pub n_clusters: usize,
    /// `None` when the dependent variable has no variation.
    pub r2: Option<f64>,
    pub log_likelihood: f64,
    pub rss: f64,
    pub covariance: DMatrix<f64>,
}

impl FitResult {
    pub fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn coef_of(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.coef[i])
    }

    pub fn se_of(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.se[i])
    }

    pub fn p_of(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.p[i])
    }
}

/// Two-sided p-value of `z` under the standard normal.
pub fn normal_p_value(z: f64) -> f64 {
    if !z.is_finite() {
        return if z.is_nan() { f64::NAN } else { 0.0 };
    }
    let n = Normal::standard();
    (2.0 * n.sf(z.abs())).min(1.0)
}

/// Gaussian log-likelihood at the maximum-likelihood variance `rss / n`.
pub fn gaussian_log_likelihood(rss: f64, n: usize) -> f64 {
    let n = n as f64;
    -0.5 * n * ((2.0 * std::f64::consts::PI).ln() + (rss / n).ln() + 1.0)
}

pub(crate) struct Decomposition {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
}

/// Thin QR of `x`, failing with the names of collinear columns.
pub(crate) fn decompose(names: &[String], x: &DMatrix<f64>) -> Result<Decomposition> {
    let (n, k) = x.shape();
    if names.len() != k {
        return Err(Error::Domain(format!("{} names for {k} columns", names.len())));
    }
    if n < k {
        return Err(Error::Insufficient(format!("{n} observations for {k} coefficients")));
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let q = qr.q();
    let scale = (0..k).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
    let collinear: Vec<String> = (0..k)
        .filter(|&j| r[(j, j)].abs() <= RANK_TOLERANCE * scale || scale == 0.0)
        .map(|j| names[j].clone())
        .collect();
    if !collinear.is_empty() {
        return Err(Error::RankDeficient(collinear));
    }
    Ok(Decomposition { q, r })
}

/// `(X'X)^{-1}` from the triangular factor.
pub(crate) fn bread(r: &DMatrix<f64>) -> DMatrix<f64> {
    let k = r.nrows();
    let r_inv = r.solve_upper_triangular(&DMatrix::identity(k, k)).expect("non-singular after rank check");
    &r_inv * r_inv.transpose()
}

/// Sums `s_i` within clusters and returns `sum_g s_g s_g'`, plus the
/// number of clusters. `scores` is `n x k`.
pub(crate) fn clustered_meat(scores: &DMatrix<f64>, clusters: Option<&[u64]>) -> (DMatrix<f64>, usize) {
    let k = scores.ncols();
    let mut meat = DMatrix::zeros(k, k);
    match clusters {
        None => {
            for row in scores.row_iter() {
                let s = row.transpose();
                meat += &s * s.transpose();
            }
            (meat, scores.nrows())
        }
        Some(ids) => {
            let mut sums: std::collections::BTreeMap<u64, DVector<f64>> = std::collections::BTreeMap::new();
            for (i, id) in ids.iter().enumerate() {
                let s = scores.row(i).transpose();
                *sums.entry(*id).or_insert_with(|| DVector::zeros(k)) += s;
            }
            for s in sums.values() {
                meat += s * s.transpose();
            }
            (meat, sums.len())
        }
    }
}

/// Fits `y = X b + u`. `intercept` is the index of the constant column,
/// if any; `clusters` holds one id per row and is required for
/// [`Covariance::Cluster`].
pub fn ols(
    names: &[String],
    x: &DMatrix<f64>,
    y: &DVector<f64>,
    intercept: Option<usize>,
    clusters: Option<&[u64]>,
    covariance: Covariance,
) -> Result<FitResult> {
    let (n, k) = x.shape();
    if y.len() != n {
        return Err(Error::Domain(format!("{} responses for {n} rows", y.len())));
    }
    if let Some(c) = clusters {
        if c.len() != n {
            return Err(Error::Domain(format!("{} cluster ids for {n} rows", c.len())));
        }
    }
    let dec = decompose(names, x)?;

    // Centering the response when a constant is present makes a constant
    // response give slopes that are exactly zero.
    let mean = y.mean();
    let centered = match intercept {
        Some(_) => y.map(|v| v - mean),
        None => y.clone(),
    };
    let qty = dec.q.transpose() * &centered;
    let mut beta = dec.r.solve_upper_triangular(&qty).expect("non-singular after rank check");
    if let Some(j) = intercept {
        beta[j] += mean;
    }
    let resid = y - x * &beta;
    let rss = resid.norm_squared();

    let b = bread(&dec.r);
    let mut scores = x.clone();
    for (mut row, u) in scores.row_iter_mut().zip(resid.iter()) {
        row *= *u;
    }
    let (meat, g, factor) = match covariance {
        Covariance::Hc0 => {
            let (m, g) = clustered_meat(&scores, None);
            (m, g, 1.0)
        }
        Covariance::Cluster => {
            let ids = clusters.ok_or_else(|| Error::Domain("cluster covariance needs cluster ids".into()))?;
            let (m, g) = clustered_meat(&scores, Some(ids));
            if g < 2 {
                return Err(Error::Insufficient(format!("{g} cluster(s); at least 2 are needed")));
            }
            if n <= k {
                return Err(Error::Insufficient(format!("{n} observations leave no residual degrees of freedom")));
            }
            let (gf, nf, kf) = (g as f64, n as f64, k as f64);
            (m, g, gf / (gf - 1.0) * (nf - 1.0) / (nf - kf))
        }
    };
    let cov = (&b * meat * &b) * factor;
    let se: Vec<f64> = (0..k).map(|j| cov[(j, j)].max(0.0).sqrt()).collect();
    let coef: Vec<f64> = beta.iter().copied().collect();
    let p = coef.iter().zip(&se).map(|(c, s)| normal_p_value(c / s)).collect();

    let tss = match intercept {
        Some(_) => centered.norm_squared(),
        None => y.norm_squared(),
    };
    let r2 = (tss > 0.0).then(|| 1.0 - rss / tss);
    Ok(FitResult {
        names: names.to_vec(),
        coef,
        se,
        p,
        n_obs: n,
        n_clusters: g,
        r2,
        log_likelihood: gaussian_log_likelihood(rss, n),
        rss,
        covariance: cov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn fixture() -> (DMatrix<f64>, DVector<f64>, Vec<u64>) {
        let obs = [(1, 0.0, 1.0), (1, 0.0, 0.0), (1, 1.0, 1.0), (1, 1.0, 1.0), (2, 0.0, 0.0), (2, 1.0, 0.0)];
        let x = DMatrix::from_row_iterator(6, 2, obs.iter().flat_map(|&(_, d, _)| [1.0, d]));
        let y = DVector::from_iterator(6, obs.iter().map(|o| o.2));
        (x, y, obs.iter().map(|o| o.0).collect())
    }

    #[test]
    fn hand_computed_fixture() {
        let (x, y, c) = fixture();
        let fit = ols(&names(&["const", "d"]), &x, &y, Some(0), Some(&c), Covariance::Cluster).unwrap();
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-8 * b.abs().max(1e-300);
        assert!(close(fit.coef[0], 1.0 / 3.0) && close(fit.coef[1], 1.0 / 3.0));
        let se = 5f64.sqrt() / 9.0;
        assert!(close(fit.se[0], se) && close(fit.se[1], se), "{:?}", fit.se);
        assert!(close(fit.rss, 4.0 / 3.0));
        assert!(close(fit.r2.unwrap(), 1.0 / 9.0));
        assert_eq!(fit.n_clusters, 2);
    }

    #[test]
    fn hc0_matches_one_cluster_per_observation_without_factor() {
        let (x, y, _) = fixture();
        let hc0 = ols(&names(&["const", "d"]), &x, &y, Some(0), None, Covariance::Hc0).unwrap();
        assert!((hc0.covariance[(0, 0)] - 2.0 / 27.0).abs() < 1e-12);
        assert!((hc0.covariance[(0, 1)] + 2.0 / 27.0).abs() < 1e-12);
        assert!((hc0.covariance[(1, 1)] - 4.0 / 27.0).abs() < 1e-12);
        let ids: Vec<u64> = (0..6).collect();
        let per_obs = ols(&names(&["const", "d"]), &x, &y, Some(0), Some(&ids), Covariance::Cluster).unwrap();
        let factor = 6.0 / 5.0 * 5.0 / 4.0;
        for (a, b) in hc0.covariance.iter().zip(per_obs.covariance.iter()) {
            assert!((a * factor - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_response_gives_exact_zero_slopes() {
        let (x, _, c) = fixture();
        let y = DVector::from_element(6, 1.0);
        let fit = ols(&names(&["const", "d"]), &x, &y, Some(0), Some(&c), Covariance::Cluster).unwrap();
        assert_eq!(fit.coef[1], 0.0);
        assert_eq!(fit.coef[0], 1.0);
        assert_eq!(fit.r2, None);
    }

    #[test]
    fn collinear_column_is_named() {
        let (x, y, c) = fixture();
        let mut wide = x.clone().insert_column(2, 0.0);
        for i in 0..6 {
            wide[(i, 2)] = 1.0 - x[(i, 1)];
        }
        let err = ols(&names(&["const", "d", "not_d"]), &wide, &y, Some(0), Some(&c), Covariance::Cluster)
            .unwrap_err();
        match err {
            Error::RankDeficient(cols) => assert_eq!(cols, vec!["not_d".to_string()]),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn single_cluster_is_rejected() {
        let (x, y, _) = fixture();
        let err = ols(&names(&["const", "d"]), &x, &y, Some(0), Some(&[7; 6]), Covariance::Cluster).unwrap_err();
        assert!(matches!(err, Error::Insufficient(_)));
    }

    #[test]
    fn normal_p_values() {
        assert!((normal_p_value(1.959963984540054) - 0.05).abs() < 1e-9, "{}", normal_p_value(1.959963984540054));
        assert_eq!(normal_p_value(0.0), 1.0);
    }

    proptest! {
        #[test]
        fn residuals_are_orthogonal_to_regressors(
            rows in proptest::collection::vec((0u8..2, 0u8..2, -5.0f64..5.0, 0u64..4), 12..40)
        ) {
            let n = rows.len();
            let x = DMatrix::from_row_iterator(n, 3, rows.iter().flat_map(|r| [1.0, r.0 as f64, r.1 as f64]));
            let y = DVector::from_iterator(n, rows.iter().map(|r| r.2));
            let c: Vec<u64> = rows.iter().map(|r| r.3).collect();
            match ols(&names(&["const", "a", "b"]), &x, &y, Some(0), Some(&c), Covariance::Cluster) {
                Ok(fit) => {
                    let beta = DVector::from_vec(fit.coef.clone());
                    let resid = &y - &x * beta;
                    let g = x.transpose() * resid;
                    let scale = y.norm().max(1.0) * (n as f64);
                    for v in g.iter() {
                        prop_assert!(v.abs() <= 1e-10 * scale);
                    }
                }
                Err(Error::RankDeficient(_)) | Err(Error::Insufficient(_)) => {}
                Err(e) => prop_assert!(false, "{}", e),
            }
        }
    }
}
