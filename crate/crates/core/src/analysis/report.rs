//! Text and CSV renderings of analysis results.

use super::models::{Model, RankTestRow, CONSTANT};
use super::ols::FitResult;
use super::outcomes::{ClaimHistogram, RateRow, TypePair};
use super::rank::Method;
use crate::error::Result;

pub fn stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::error::Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

/// Row order for the regression table: mechanisms, type pairs, constant.
fn term_order(fits: &[(Model, FitResult)]) -> Vec<String> {
    let preferred = [
        "2x2-I",
        "2x2-E",
        "3x3-I",
        "3x3-E",
        TypePair::TwoBeginners.dummy_name(),
        TypePair::Mixed.dummy_name(),
        TypePair::TwoExperts.dummy_name(),
        CONSTANT,
    ];
    let mut terms: Vec<String> = Vec::new();
    for p in preferred {
        if fits.iter().any(|(_, f)| f.index(p).is_some()) {
            terms.push(p.to_string());
        }
    }
    for (_, f) in fits {
        for n in &f.names {
            if !terms.contains(n) {
                terms.push(n.clone());
            }
        }
    }
    terms
}

/// Coefficients with stars over standard errors in parentheses, one
/// column per model, then observations, R-squared and log-likelihood.
pub fn regression_table(fits: &[(Model, FitResult)]) -> String {
    let mut grid: Vec<Vec<String>> = Vec::new();
    let mut header = vec![String::new()];
    header.extend((1..=fits.len()).map(|i| format!("({i})")));
    grid.push(header);
    let mut vars = vec!["VARIABLES".to_string()];
    vars.extend(fits.iter().map(|(m, _)| m.key().to_string()));
    grid.push(vars);
    for term in term_order(fits) {
        let mut coef_row = vec![term.clone()];
        let mut se_row = vec![String::new()];
        for (_, f) in fits {
            match f.index(&term) {
                Some(i) => {
                    coef_row.push(format!("{:.3}{}", f.coef[i], stars(f.p[i])));
                    se_row.push(format!("({:.3})", f.se[i]));
                }
                None => {
                    coef_row.push(String::new());
                    se_row.push(String::new());
                }
            }
        }
        grid.push(coef_row);
        grid.push(se_row);
    }
    let mut obs = vec!["Observations".to_string()];
    obs.extend(fits.iter().map(|(_, f)| f.n_obs.to_string()));
    grid.push(obs);
    let mut r2 = vec!["R-squared".to_string()];
    r2.extend(fits.iter().map(|(_, f)| f.r2.map_or_else(String::new, |v| format!("{v:.3}"))));
    grid.push(r2);
    let mut ll = vec!["log likelihood".to_string()];
    ll.extend(fits.iter().map(|(_, f)| format!("{:.1}", f.log_likelihood)));
    grid.push(ll);

    let widths: Vec<usize> =
        (0..grid[0].len()).map(|c| grid.iter().map(|r| r[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    let rule = "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1));
    for (i, row) in grid.iter().enumerate() {
        let cells: Vec<String> = row
            .iter()
            .enumerate()
            .map(|(c, s)| if c == 0 { format!("{s:<w$}", w = widths[c]) } else { format!("{s:>w$}", w = widths[c]) })
            .collect();
        out.push_str(cells.join("  ").trim_end());
        out.push('\n');
        if i == 1 || i == grid.len() - 4 {
            out.push_str(&rule);
            out.push('\n');
        }
    }
    out.push_str(&rule);
    out.push('\n');
    out.push_str("*** p<0.01, ** p<0.05, * p<0.1; cluster-robust standard errors by session in parentheses\n");
    for (i, (m, _)) in fits.iter().enumerate() {
        out.push_str(&format!("({}) {}\n", i + 1, m.title()));
    }
    out
}

pub fn regression_csv(fits: &[(Model, FitResult)]) -> Result<String> {
    let rows = fits.iter().flat_map(|(m, f)| {
        (0..f.names.len()).map(move |i| {
            vec![
                m.key().to_string(),
                f.names[i].clone(),
                f.coef[i].to_string(),
                f.se[i].to_string(),
                f.p[i].to_string(),
                f.n_obs.to_string(),
                f.n_clusters.to_string(),
                opt(f.r2),
                f.log_likelihood.to_string(),
            ]
        })
    });
    csv_string(&["model", "term", "coef", "se", "p", "n_obs", "n_clusters", "r2", "log_likelihood"], rows)
}

pub fn rates_csv(rows: &[RateRow]) -> Result<String> {
    csv_string(
        &[
            "mechanism",
            "type_pair",
            "n_groups",
            "both_expert_claims",
            "both_truthful",
            "n_beginners",
            "beginner_truthful",
            "beginner_deceptive",
            "beginner_unanswered",
        ],
        rows.iter().map(|r| {
            vec![
                r.mechanism.name().to_string(),
                r.type_pair.map_or("all", TypePair::label).to_string(),
                r.n_groups.to_string(),
                opt(r.both_expert_claims),
                opt(r.both_truthful),
                r.n_beginners.to_string(),
                opt(r.beginner_truthful),
                opt(r.beginner_deceptive),
                opt(r.beginner_unanswered),
            ]
        }),
    )
}

pub fn rates_table(rows: &[RateRow]) -> String {
    let pct = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| format!("{:.1}%", 100.0 * x));
    let mut out = format!(
        "{:<6} {:<4} {:>6} {:>9} {:>9} {:>6} {:>9} {:>9} {:>9}\n",
        "mech", "pair", "groups", "(E,E)", "truthful", "begin", "b-truth", "b-decept", "b-unans"
    );
    for r in rows {
        out.push_str(&format!(
            "{:<6} {:<4} {:>6} {:>9} {:>9} {:>6} {:>9} {:>9} {:>9}\n",
            r.mechanism.name(),
            r.type_pair.map_or("all", TypePair::label),
            r.n_groups,
            pct(r.both_expert_claims),
            pct(r.both_truthful),
            r.n_beginners,
            pct(r.beginner_truthful),
            pct(r.beginner_deceptive),
            pct(r.beginner_unanswered),
        ));
    }
    out
}

pub fn histogram_csv(h: &ClaimHistogram) -> Result<String> {
    let rows = h.bins.iter().flat_map(|(m, bins)| {
        bins.iter().enumerate().map(move |(k, c)| vec![m.name().to_string(), k.to_string(), c.to_string()])
    });
    csv_string(&["mechanism", "expert_claims", "subjects"], rows)
}

pub fn rank_tests_csv(rows: &[RankTestRow]) -> Result<String> {
    csv_string(
        &["metric", "comparison", "statistic", "p_value", "method", "note"],
        rows.iter().map(|r| match &r.result {
            Ok(t) => vec![
                r.metric.label().to_string(),
                r.comparison.label().to_string(),
                t.statistic.to_string(),
                t.p_value.to_string(),
                match t.method {
                    Method::Exact => "exact".to_string(),
                    Method::Normal => "normal".to_string(),
                },
                String::new(),
            ],
            Err(e) => vec![
                r.metric.label().to_string(),
                r.comparison.label().to_string(),
                "NA".into(),
                "NA".into(),
                "NA".into(),
                e.clone(),
            ],
        }),
    )
}

pub fn rank_tests_table(rows: &[RankTestRow]) -> String {
    let mut out = String::new();
    for r in rows {
        let right = match &r.result {
            Ok(t) => format!(
                "p = {:.4} ({})",
                t.p_value,
                if t.method == Method::Exact { "exact" } else { "normal approximation" }
            ),
            Err(e) => format!("not computed: {e}"),
        };
        out.push_str(&format!("{:<32} {:<38} {}\n", r.metric.label(), r.comparison.label(), right));
    }
    out
}
