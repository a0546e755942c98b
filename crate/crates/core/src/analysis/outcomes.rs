//! Equilibrium classification of group-periods, summary rates and the
//! per-subject count of expert claims.

use std::collections::BTreeMap;

use crate::env::WorkerType;
use crate::error::{Error, Result};
use crate::mechanism::BuiltinMechanism;
use crate::sim::{PeriodRecord, SessionDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OutcomeClass {
    TruthfulEq,
    WorkerOptimalEq,
    /// Two experts both claiming expert: consistent with both equilibria.
    Both,
    Neither,
}

/// `claims[i]` is `None` for an unanswered message.
pub fn classify(types: [WorkerType; 2], claims: [Option<WorkerType>; 2]) -> OutcomeClass {
    use WorkerType::*;
    let all_expert_claims = claims == [Some(Expert), Some(Expert)];
    if all_expert_claims && types == [Expert, Expert] {
        OutcomeClass::Both
    } else if all_expert_claims {
        OutcomeClass::WorkerOptimalEq
    } else if claims == [Some(types[0]), Some(types[1])] {
        OutcomeClass::TruthfulEq
    } else {
        OutcomeClass::Neither
    }
}

pub fn classify_record(r: &PeriodRecord) -> OutcomeClass {
    classify(r.types(), r.claims())
}

/// Unordered type pair of a group.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypePair {
    TwoBeginners,
    Mixed,
    TwoExperts,
}

impl TypePair {
    pub const ALL: [TypePair; 3] = [TypePair::TwoBeginners, TypePair::Mixed, TypePair::TwoExperts];

    pub fn of(types: [WorkerType; 2]) -> Self {
        match types.iter().filter(|t| **t == WorkerType::Expert).count() {
            0 => TypePair::TwoBeginners,
            1 => TypePair::Mixed,
            _ => TypePair::TwoExperts,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            TypePair::TwoBeginners => "BB",
            TypePair::Mixed => "BE",
            TypePair::TwoExperts => "EE",
        }
    }

    /// Regressor name used for the dummy of this pair.
    pub fn dummy_name(self) -> &'static str {
        match self {
            TypePair::TwoBeginners => "2 beginners",
            TypePair::Mixed => "1 expert, 1 beginner",
            TypePair::TwoExperts => "2 experts",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label().eq_ignore_ascii_case(s))
    }
}

/// Share of `hits` in `n`, undefined for an empty cell.
fn rate(hits: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| hits as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub mechanism: BuiltinMechanism,
    /// `None` pools all type pairs.
    pub type_pair: Option<TypePair>,
    pub n_groups: usize,
    pub both_expert_claims: Option<f64>,
    pub both_truthful: Option<f64>,
    pub n_beginners: usize,
    pub beginner_truthful: Option<f64>,
    pub beginner_deceptive: Option<f64>,
    pub beginner_unanswered: Option<f64>,
}

#[derive(Default)]
struct Tally {
    groups: usize,
    ee: usize,
    truthful: usize,
    beginners: usize,
    b_truth: usize,
    b_dec: usize,
    b_unans: usize,
}

impl Tally {
    fn add(&mut self, r: &PeriodRecord) {
        self.groups += 1;
        if r.workers.iter().all(|w| w.claims_expert()) {
            self.ee += 1;
        }
        if r.workers.iter().all(|w| w.is_truthful()) {
            self.truthful += 1;
        }
        for w in r.workers.iter().filter(|w| w.true_type == WorkerType::Beginner) {
            self.beginners += 1;
            match w.claim {
                Some(WorkerType::Beginner) => self.b_truth += 1,
                Some(WorkerType::Expert) => self.b_dec += 1,
                None => self.b_unans += 1,
            }
        }
    }

    fn row(&self, mechanism: BuiltinMechanism, type_pair: Option<TypePair>) -> RateRow {
        RateRow {
            mechanism,
            type_pair,
            n_groups: self.groups,
            both_expert_claims: rate(self.ee, self.groups),
            both_truthful: rate(self.truthful, self.groups),
            n_beginners: self.beginners,
            beginner_truthful: rate(self.b_truth, self.beginners),
            beginner_deceptive: rate(self.b_dec, self.beginners),
            beginner_unanswered: rate(self.b_unans, self.beginners),
        }
    }
}

/// Rates over non-practice group-periods for every mechanism present,
/// by type pair and pooled. Cells with no observations are undefined.
pub fn summary_rates(ds: &SessionDataset) -> Vec<RateRow> {
    let mut cells: BTreeMap<(BuiltinMechanism, Option<TypePair>), Tally> = BTreeMap::new();
    let mechanisms: std::collections::BTreeSet<BuiltinMechanism> = ds.non_practice().map(|r| r.mechanism).collect();
    for &m in &mechanisms {
        for p in TypePair::ALL {
            cells.entry((m, Some(p))).or_default();
        }
        cells.entry((m, None)).or_default();
    }
    for r in ds.non_practice() {
        let pair = TypePair::of(r.types());
        cells.get_mut(&(r.mechanism, Some(pair))).expect("cell exists").add(r);
        cells.get_mut(&(r.mechanism, None)).expect("cell exists").add(r);
    }
    let mut rows: Vec<RateRow> = cells.iter().map(|(&(m, p), t)| t.row(m, p)).collect();
    // Pooled row after the per-pair rows of each mechanism.
    rows.sort_by_key(|r| (r.mechanism, r.type_pair.is_none(), r.type_pair));
    rows
}

/// Number of non-practice periods each worker subject must have.
pub const EXPECTED_PERIODS: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubjectClaims {
    pub session: usize,
    pub subject: usize,
    pub mechanism: BuiltinMechanism,
    pub expert_claims: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ClaimHistogram {
    pub subjects: Vec<SubjectClaims>,
    /// `bins[m][k]` counts subjects under `m` with exactly `k` expert claims.
    pub bins: BTreeMap<BuiltinMechanism, [usize; EXPECTED_PERIODS + 1]>,
}

impl ClaimHistogram {
    pub fn total_subjects(&self) -> usize {
        self.bins.values().flat_map(|b| b.iter()).sum()
    }
}

pub fn expert_claim_histogram(ds: &SessionDataset) -> Result<ClaimHistogram> {
    let mut per: BTreeMap<(usize, usize), (BuiltinMechanism, usize, usize)> = BTreeMap::new();
    for r in ds.non_practice() {
        for w in &r.workers {
            let e = per.entry((r.session, w.subject)).or_insert((r.mechanism, 0, 0));
            e.1 += 1;
            e.2 += usize::from(w.claims_expert());
        }
    }
    let mut hist = ClaimHistogram::default();
    for ((session, subject), (mechanism, periods, claims)) in per {
        if periods != EXPECTED_PERIODS {
            return Err(Error::DataIntegrity(format!(
                "session {session}, subject {subject}: {periods} non-practice worker records, expected {EXPECTED_PERIODS}"
            )));
        }
        hist.bins.entry(mechanism).or_insert([0; EXPECTED_PERIODS + 1])[claims] += 1;
        hist.subjects.push(SubjectClaims { session, subject, mechanism, expert_claims: claims });
    }
    Ok(hist)
}
