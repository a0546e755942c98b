//! Kruskal-Wallis and two-sided Mann-Whitney tests with midranks. Exact
//! permutation p-values are used when the pooled sample is small.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use super::ols::normal_p_value;
use crate::error::{Error, Result};

/// Pooled sample sizes up to this use exact permutation distributions.
pub const EXACT_LIMIT: usize = 14;

const STAT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: Method,
}

/// Midranks (1-based) of `values`.
pub fn midranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

fn tie_term(ranks: &[f64]) -> f64 {
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut total = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        total += t * t * t - t;
        i = j + 1;
    }
    total
}

/// Kruskal-Wallis H (tie-corrected) from group rank sums.
fn kw_statistic(rank_sums: &[f64], sizes: &[usize], n: usize, correction: f64) -> f64 {
    let n = n as f64;
    let s: f64 = rank_sums.iter().zip(sizes).map(|(r, &m)| r * r / m as f64).sum();
    let h = 12.0 / (n * (n + 1.0)) * s - 3.0 * (n + 1.0);
    if correction > 0.0 {
        h / correction
    } else {
        0.0
    }
}

fn check_groups(groups: &[Vec<f64>], min_groups: usize) -> Result<()> {
    if groups.len() < min_groups {
        return Err(Error::Insufficient(format!("{} groups; at least {min_groups} are needed", groups.len())));
    }
    if let Some(g) = groups.iter().find(|g| g.len() < 2) {
        return Err(Error::Insufficient(format!("a group has {} session(s); at least 2 are needed", g.len())));
    }
    if groups.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Domain("rank tests need finite values".into()));
    }
    Ok(())
}

/// Kruskal-Wallis test across `groups`.
pub fn kruskal_wallis(groups: &[Vec<f64>]) -> Result<TestResult> {
    check_groups(groups, 2)?;
    let pooled: Vec<f64> = groups.iter().flatten().copied().collect();
    let n = pooled.len();
    let ranks = midranks(&pooled);
    let nf = n as f64;
    let correction = 1.0 - tie_term(&ranks) / (nf * nf * nf - nf);
    let sizes: Vec<usize> = groups.iter().map(Vec::len).collect();
    let mut observed_sums = Vec::with_capacity(groups.len());
    let mut offset = 0;
    for &m in &sizes {
        observed_sums.push(ranks[offset..offset + m].iter().sum());
        offset += m;
    }
    let h = kw_statistic(&observed_sums, &sizes, n, correction);
    if correction <= 0.0 {
        return Ok(TestResult { statistic: 0.0, p_value: 1.0, method: Method::Exact });
    }
    if n <= EXACT_LIMIT {
        let (hits, total) = kw_exact_count(&ranks, &sizes, h, correction);
        return Ok(TestResult { statistic: h, p_value: hits as f64 / total as f64, method: Method::Exact });
    }
    let chi = ChiSquared::new((groups.len() - 1) as f64).expect("positive degrees of freedom");
    Ok(TestResult { statistic: h, p_value: chi.sf(h), method: Method::Normal })
}

/// Counts assignments of the pooled ranks to groups of the given sizes
/// whose statistic is at least `h`, over all such assignments.
fn kw_exact_count(ranks: &[f64], sizes: &[usize], h: f64, correction: f64) -> (u64, u64) {
    struct State<'a> {
        ranks: &'a [f64],
        sizes: &'a [usize],
        fill: Vec<usize>,
        sums: Vec<f64>,
        h: f64,
        correction: f64,
        hits: u64,
        total: u64,
    }
    fn go(s: &mut State, i: usize) {
        if i == s.ranks.len() {
            s.total += 1;
            if kw_statistic(&s.sums, s.sizes, s.ranks.len(), s.correction) >= s.h - STAT_TOL {
                s.hits += 1;
            }
            return;
        }
        for g in 0..s.sizes.len() {
            if s.fill[g] < s.sizes[g] {
                s.fill[g] += 1;
                s.sums[g] += s.ranks[i];
                go(s, i + 1);
                s.sums[g] -= s.ranks[i];
                s.fill[g] -= 1;
            }
        }
    }
    let mut state = State {
        ranks,
        sizes,
        fill: vec![0; sizes.len()],
        sums: vec![0.0; sizes.len()],
        h,
        correction,
        hits: 0,
        total: 0,
    };
    go(&mut state, 0);
    (state.hits, state.total)
}

/// Two-sided Mann-Whitney test of `a` against `b`; the statistic is U for `a`.
pub fn mann_whitney(a: &[f64], b: &[f64]) -> Result<TestResult> {
    check_groups(&[a.to_vec(), b.to_vec()], 2)?;
    let pooled: Vec<f64> = a.iter().chain(b).copied().collect();
    let ranks = midranks(&pooled);
    let (n1, n2) = (a.len(), b.len());
    let n = n1 + n2;
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let centre = (n1 * n2) as f64 / 2.0;
    let observed = (u - centre).abs();
    if n <= EXACT_LIMIT {
        let mut hits = 0u64;
        let mut total = 0u64;
        let mut chosen = Vec::with_capacity(n1);
        fn go(
            ranks: &[f64],
            start: usize,
            need: usize,
            chosen: &mut Vec<usize>,
            visit: &mut dyn FnMut(&[usize]),
        ) {
            if need == 0 {
                visit(chosen);
                return;
            }
            for i in start..=ranks.len() - need {
                chosen.push(i);
                go(ranks, i + 1, need - 1, chosen, visit);
                chosen.pop();
            }
        }
        let base = (n1 * (n1 + 1)) as f64 / 2.0;
        go(&ranks, 0, n1, &mut chosen, &mut |idx: &[usize]| {
            total += 1;
            let r: f64 = idx.iter().map(|&i| ranks[i]).sum();
            if ((r - base) - centre).abs() >= observed - STAT_TOL {
                hits += 1;
            }
        });
        return Ok(TestResult { statistic: u, p_value: hits as f64 / total as f64, method: Method::Exact });
    }
    let nf = n as f64;
    let var = (n1 * n2) as f64 / 12.0 * ((nf + 1.0) - tie_term(&ranks) / (nf * (nf - 1.0)));
    if var <= 0.0 {
        return Ok(TestResult { statistic: u, p_value: 1.0, method: Method::Normal });
    }
    Ok(TestResult { statistic: u, p_value: normal_p_value((u - centre) / var.sqrt()), method: Method::Normal })
}
