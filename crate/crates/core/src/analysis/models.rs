//! Linear probability and payoff regressions on mechanism dummies, and
//! rank tests on session-level averages.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector};

use super::interval::{interval_regression, Observation};
use super::ols::{ols, Covariance, FitResult};
use super::outcomes::{classify_record, OutcomeClass, TypePair};
use super::rank::{kruskal_wallis, mann_whitney, TestResult};
use crate::env::WorkerType;
use crate::error::{Error, Result};
use crate::mechanism::BuiltinMechanism;
use crate::rational::to_f64;
use crate::sim::{PeriodRecord, SessionDataset};

pub const CONSTANT: &str = "Constant";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Model {
    /// Indicator of the worker-optimal equilibrium, per group-period.
    EqWorkerOptimal,
    /// Indicator of the truthful equilibrium, per group-period.
    EqTruthful,
    /// Beginner claims expert, per beginner worker-period.
    DeceptiveAction,
    /// Beginner claims beginner, per beginner worker-period.
    TruthfulAction,
    /// Staffer payoff, per group-period.
    StafferProfit,
    /// Sum of the two workers' payoffs, per group-period.
    WorkersProfit,
}

impl Model {
    pub const ALL: [Model; 6] = [
        Model::EqWorkerOptimal,
        Model::EqTruthful,
        Model::DeceptiveAction,
        Model::TruthfulAction,
        Model::StafferProfit,
        Model::WorkersProfit,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Model::EqWorkerOptimal => "eq-wo",
            Model::EqTruthful => "eq-truth",
            Model::DeceptiveAction => "deceptive",
            Model::TruthfulAction => "truthful-action",
            Model::StafferProfit => "staffer-profit",
            Model::WorkersProfit => "workers-profit",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Model::EqWorkerOptimal => "worker-optimal equilibrium observed",
            Model::EqTruthful => "truthful equilibrium observed",
            Model::DeceptiveAction => "deceptive action played",
            Model::TruthfulAction => "truthful action played",
            Model::StafferProfit => "staffer profit",
            Model::WorkersProfit => "workers' combined profit",
        }
    }

    pub fn from_key(key: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.key() == key)
    }

    /// Models selected by a command-line group name.
    pub fn group(name: &str) -> Option<Vec<Model>> {
        match name {
            "all" => Some(Self::ALL.to_vec()),
            "action" => Some(vec![Model::DeceptiveAction, Model::TruthfulAction]),
            "profit" => Some(vec![Model::StafferProfit, Model::WorkersProfit]),
            other => Self::from_key(other).map(|m| vec![m]),
        }
    }

    pub fn is_equilibrium(self) -> bool {
        matches!(self, Model::EqWorkerOptimal | Model::EqTruthful)
    }

    pub fn is_action(self) -> bool {
        matches!(self, Model::DeceptiveAction | Model::TruthfulAction)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Censoring {
    /// Drop group-periods consistent with both equilibria.
    #[default]
    Drop,
    /// Keep them as known only to lie in `[0, 1]` and fit by maximum
    /// likelihood.
    Interval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionSpec {
    pub model: Model,
    pub type_dummies: bool,
    pub censoring: Censoring,
    /// Keep only these type pairs (group-level models).
    pub type_pairs: Option<Vec<TypePair>>,
    pub covariance: Covariance,
}

impl RegressionSpec {
    /// Type-pair dummies for group-level models, none for the action models.
    pub fn standard(model: Model) -> Self {
        Self {
            model,
            type_dummies: !model.is_action(),
            censoring: Censoring::Drop,
            type_pairs: None,
            covariance: Covariance::Cluster,
        }
    }
}

struct Row {
    mechanism: BuiltinMechanism,
    pair: TypePair,
    session: usize,
    y: Observation,
}

fn rows(ds: &SessionDataset, spec: &RegressionSpec) -> Vec<Row> {
    let keep_pair = |r: &PeriodRecord| {
        spec.type_pairs.as_ref().is_none_or(|ps| ps.contains(&TypePair::of(r.types())))
    };
    let mut out = Vec::new();
    for r in ds.non_practice().filter(|r| keep_pair(r)) {
        let base = |y| Row { mechanism: r.mechanism, pair: TypePair::of(r.types()), session: r.session, y };
        match spec.model {
            Model::EqWorkerOptimal | Model::EqTruthful => {
                let class = classify_record(r);
                if class == OutcomeClass::Both {
                    if spec.censoring == Censoring::Interval {
                        out.push(base(Observation::Interval { lo: 0.0, hi: 1.0 }));
                    }
                    continue;
                }
                let target = match spec.model {
                    Model::EqWorkerOptimal => OutcomeClass::WorkerOptimalEq,
                    _ => OutcomeClass::TruthfulEq,
                };
                out.push(base(Observation::Exact(f64::from(u8::from(class == target)))));
            }
            Model::DeceptiveAction | Model::TruthfulAction => {
                for w in r.workers.iter().filter(|w| w.true_type == WorkerType::Beginner) {
                    let hit = match spec.model {
                        Model::DeceptiveAction => w.claim == Some(WorkerType::Expert),
                        _ => w.claim == Some(WorkerType::Beginner),
                    };
                    out.push(base(Observation::Exact(f64::from(u8::from(hit)))));
                }
            }
            Model::StafferProfit => out.push(base(Observation::Exact(r.staffer.payoff as f64))),
            Model::WorkersProfit => out.push(base(Observation::Exact(to_f64(r.workers_payoff())))),
        }
    }
    out
}

/// Fits the model of `spec` on non-practice records. Mechanism dummies
/// are relative to 2x2-I (or to the first mechanism present when 2x2-I is
/// absent); type-pair dummies are relative to two beginners (or the first
/// pair present). Levels absent from the filtered rows get no dummy.
pub fn fit_lpm(ds: &SessionDataset, spec: &RegressionSpec) -> Result<FitResult> {
    let rows = rows(ds, spec);
    if rows.is_empty() {
        return Err(Error::Insufficient(format!("no observations for {}", spec.model.key())));
    }
    let mechs: BTreeSet<BuiltinMechanism> = rows.iter().map(|r| r.mechanism).collect();
    let mech_dummies: Vec<BuiltinMechanism> = mechs.iter().skip(1).copied().collect();
    let pairs: BTreeSet<TypePair> = rows.iter().map(|r| r.pair).collect();
    let pair_dummies: Vec<TypePair> =
        if spec.type_dummies { pairs.iter().skip(1).copied().collect() } else { Vec::new() };

    let mut names: Vec<String> = mech_dummies.iter().map(|m| m.name().to_string()).collect();
    names.extend(pair_dummies.iter().map(|p| p.dummy_name().to_string()));
    names.push(CONSTANT.into());
    let k = names.len();
    let n = rows.len();
    let x = DMatrix::from_row_iterator(
        n,
        k,
        rows.iter().flat_map(|r| {
            let mut v: Vec<f64> = mech_dummies.iter().map(|m| f64::from(u8::from(*m == r.mechanism))).collect();
            v.extend(pair_dummies.iter().map(|p| f64::from(u8::from(*p == r.pair))));
            v.push(1.0);
            v
        }),
    );
    let clusters: Vec<u64> = rows.iter().map(|r| r.session as u64).collect();
    let has_intervals = rows.iter().any(|r| matches!(r.y, Observation::Interval { .. }));
    if has_intervals {
        let obs: Vec<Observation> = rows.iter().map(|r| r.y).collect();
        return interval_regression(&names, &x, &obs, &clusters);
    }
    let y = DVector::from_iterator(
        n,
        rows.iter().map(|r| match r.y {
            Observation::Exact(v) => v,
            Observation::Interval { .. } => unreachable!("handled above"),
        }),
    );
    let cl = match spec.covariance {
        Covariance::Cluster => Some(clusters.as_slice()),
        Covariance::Hc0 => None,
    };
    ols(&names, &x, &y, Some(k - 1), cl, spec.covariance)
}

/// Session-level outcome averaged for the rank tests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SessionMetric {
    WorkerOptimalRate,
    TruthfulRate,
    BeginnerTruthful,
    BeginnerDeceptive,
}

impl SessionMetric {
    pub const ALL: [SessionMetric; 4] = [
        SessionMetric::WorkerOptimalRate,
        SessionMetric::TruthfulRate,
        SessionMetric::BeginnerTruthful,
        SessionMetric::BeginnerDeceptive,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SessionMetric::WorkerOptimalRate => "worker-optimal equilibrium rate",
            SessionMetric::TruthfulRate => "truthful equilibrium rate",
            SessionMetric::BeginnerTruthful => "beginner truthful action rate",
            SessionMetric::BeginnerDeceptive => "beginner deceptive action rate",
        }
    }
}

/// Per-session averages of `metric` (censored group-periods excluded from
/// the equilibrium rates). Sessions without observations are omitted.
pub fn session_averages(ds: &SessionDataset, metric: SessionMetric) -> BTreeMap<usize, (BuiltinMechanism, f64)> {
    let mut acc: BTreeMap<usize, (BuiltinMechanism, usize, usize)> = BTreeMap::new();
    for r in ds.non_practice() {
        let e = acc.entry(r.session).or_insert((r.mechanism, 0, 0));
        match metric {
            SessionMetric::WorkerOptimalRate | SessionMetric::TruthfulRate => {
                let class = classify_record(r);
                if class == OutcomeClass::Both {
                    continue;
                }
                let target = if metric == SessionMetric::WorkerOptimalRate {
                    OutcomeClass::WorkerOptimalEq
                } else {
                    OutcomeClass::TruthfulEq
                };
                e.1 += usize::from(class == target);
                e.2 += 1;
            }
            SessionMetric::BeginnerTruthful | SessionMetric::BeginnerDeceptive => {
                let want = if metric == SessionMetric::BeginnerTruthful { WorkerType::Beginner } else { WorkerType::Expert };
                for w in r.workers.iter().filter(|w| w.true_type == WorkerType::Beginner) {
                    e.1 += usize::from(w.claim == Some(want));
                    e.2 += 1;
                }
            }
        }
    }
    acc.into_iter()
        .filter(|(_, (_, _, n))| *n > 0)
        .map(|(s, (m, hits, n))| (s, (m, hits as f64 / n as f64)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Comparison {
    /// Kruskal-Wallis across every mechanism present.
    AllMechanisms,
    /// Mann-Whitney, 2x2 against 3x3 mechanisms.
    DirectVsExtended,
    /// Mann-Whitney, implicit against explicit mechanisms.
    ImplicitVsExplicit,
}

impl Comparison {
    pub const ALL: [Comparison; 3] =
        [Comparison::AllMechanisms, Comparison::DirectVsExtended, Comparison::ImplicitVsExplicit];

    pub fn label(self) -> &'static str {
        match self {
            Comparison::AllMechanisms => "all mechanisms (Kruskal-Wallis)",
            Comparison::DirectVsExtended => "direct vs extended (Mann-Whitney)",
            Comparison::ImplicitVsExplicit => "implicit vs explicit (Mann-Whitney)",
        }
    }
}

pub fn rank_test(ds: &SessionDataset, metric: SessionMetric, comparison: Comparison) -> Result<TestResult> {
    let avgs = session_averages(ds, metric);
    match comparison {
        Comparison::AllMechanisms => {
            let mut groups: BTreeMap<BuiltinMechanism, Vec<f64>> = BTreeMap::new();
            for (m, v) in avgs.values() {
                groups.entry(*m).or_default().push(*v);
            }
            kruskal_wallis(&groups.into_values().collect::<Vec<_>>())
        }
        Comparison::DirectVsExtended | Comparison::ImplicitVsExplicit => {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for (m, v) in avgs.values() {
                let second = match comparison {
                    Comparison::DirectVsExtended => m.is_extended(),
                    _ => m.is_explicit(),
                };
                if second {
                    b.push(*v);
                } else {
                    a.push(*v);
                }
            }
            mann_whitney(&a, &b)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankTestRow {
    pub metric: SessionMetric,
    pub comparison: Comparison,
    pub result: std::result::Result<TestResult, String>,
}

/// Every metric under every comparison; comparisons without enough
/// sessions carry the error text.
pub fn rank_tests(ds: &SessionDataset) -> Vec<RankTestRow> {
    let mut out = Vec::new();
    for metric in SessionMetric::ALL {
        for comparison in Comparison::ALL {
            out.push(RankTestRow {
                metric,
                comparison,
                result: rank_test(ds, metric, comparison).map_err(|e| e.to_string()),
            });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{run_session, BehaviorRule, SessionConfig};

    fn dataset(rule: BehaviorRule) -> SessionDataset {
        let mut ds = SessionDataset::default();
        let mechs = [
            BuiltinMechanism::DirectImplicit,
            BuiltinMechanism::DirectExplicit,
            BuiltinMechanism::ExtendedImplicit,
            BuiltinMechanism::ExtendedExplicit,
        ];
        let mut id = 0;
        for m in mechs {
            for _ in 0..2 {
                id += 1;
                let cfg = SessionConfig::new(id, m, 9, 100 + id as u64);
                ds.records.extend(run_session(&cfg, &vec![rule.clone(); 9]).unwrap().records);
            }
        }
        ds
    }

    #[test]
    fn truthful_population_gives_zero_mechanism_effects() {
        let ds = dataset(BehaviorRule::Truthteller);
        let fit = fit_lpm(&ds, &RegressionSpec::standard(Model::EqTruthful)).unwrap();
        for m in ["2x2-E", "3x3-I", "3x3-E"] {
            assert_eq!(fit.coef_of(m), Some(0.0));
        }
        assert_eq!(fit.coef_of(CONSTANT), Some(1.0));
        let staffer = fit_lpm(&ds, &RegressionSpec::standard(Model::StafferProfit)).unwrap();
        assert_eq!(staffer.coef_of(CONSTANT), Some(5.0));
    }

    #[test]
    fn coordinators_two_beginners_staffer_earns_one() {
        let ds = dataset(BehaviorRule::Coordinator);
        let spec = RegressionSpec {
            type_pairs: Some(vec![TypePair::TwoBeginners]),
            ..RegressionSpec::standard(Model::StafferProfit)
        };
        let fit = fit_lpm(&ds, &spec).unwrap();
        assert_eq!(fit.coef_of(CONSTANT), Some(1.0));
        assert!(fit.names.iter().all(|n| !n.contains("expert")));
    }

    #[test]
    fn censoring_modes() {
        let ds = dataset(BehaviorRule::LieAverse { cost: crate::env::Payoff::new(1, 2) }.noisy(0.2));
        let dropped = fit_lpm(&ds, &RegressionSpec::standard(Model::EqWorkerOptimal)).unwrap();
        let kept = fit_lpm(
            &ds,
            &RegressionSpec { censoring: Censoring::Interval, ..RegressionSpec::standard(Model::EqWorkerOptimal) },
        )
        .unwrap();
        assert!(kept.n_obs > dropped.n_obs);
        assert_eq!(kept.names, dropped.names);
    }

    #[test]
    fn action_models_use_beginners_only() {
        let ds = dataset(BehaviorRule::Coordinator);
        let fit = fit_lpm(&ds, &RegressionSpec::standard(Model::DeceptiveAction)).unwrap();
        let beginners: usize = ds
            .non_practice()
            .map(|r| r.workers.iter().filter(|w| w.true_type == WorkerType::Beginner).count())
            .sum();
        assert_eq!(fit.n_obs, beginners);
        assert_eq!(fit.names, vec!["2x2-E", "3x3-I", "3x3-E", CONSTANT]);
    }

    #[test]
    fn rank_tests_on_constant_data() {
        let ds = dataset(BehaviorRule::Truthteller);
        let r = rank_test(&ds, SessionMetric::BeginnerTruthful, Comparison::AllMechanisms).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(rank_tests(&ds).len(), 12);
    }

    #[test]
    fn rank_tests_need_two_sessions_per_group() {
        let mut ds = dataset(BehaviorRule::Truthteller);
        ds.records.retain(|r| r.session <= 3);
        assert!(matches!(
            rank_test(&ds, SessionMetric::TruthfulRate, Comparison::AllMechanisms),
            Err(Error::Insufficient(_))
        ));
    }

    #[test]
    fn model_groups() {
        assert_eq!(Model::group("all").unwrap().len(), 6);
        assert_eq!(Model::group("action").unwrap().len(), 2);
        assert_eq!(Model::group("eq-wo").unwrap(), vec![Model::EqWorkerOptimal]);
        assert!(Model::group("bogus").is_none());
    }
}
