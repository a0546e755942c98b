//! Experimental sessions: fixed roles, per-period type draws, random
//! matching into two-worker-plus-staffer groups, and a paid-period draw.

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::behavior::{choose_message, BehaviorRule, Belief, Seat};
use super::population::PopulationSpec;
use crate::env::{principal_scf, staffer_payoff, Environment, Payoff, WorkerType, PRINCIPAL_WORKER_OUTCOMES};
use crate::error::{domain, Result};
use crate::mechanism::{BuiltinMechanism, Mechanism};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum BeliefMode {
    /// Opponent sends the worker-optimal action with probability
    /// `1 - noise`, any other message uniformly otherwise.
    Static {
        #[serde(with = "crate::rational", default = "Payoff::zero")]
        noise: Payoff,
    },
    /// Fictitious play: observed opponent messages, seeded with
    /// `prior_weight` pseudo-observations of the static belief.
    Empirical {
        #[serde(with = "crate::rational", default = "Payoff::zero")]
        noise: Payoff,
        #[serde(default = "default_prior_weight")]
        prior_weight: u32,
    },
}

fn default_prior_weight() -> u32 {
    3
}

impl Default for BeliefMode {
    fn default() -> Self {
        BeliefMode::Static { noise: Payoff::zero() }
    }
}

impl BeliefMode {
    fn noise(&self) -> Payoff {
        match self {
            BeliefMode::Static { noise } | BeliefMode::Empirical { noise, .. } => *noise,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.noise();
        if n < Payoff::zero() || n > Payoff::from_integer(1) {
            return Err(domain("belief noise must lie in [0, 1]"));
        }
        Ok(())
    }

    fn static_belief(&self, mech: &Mechanism, opponent: usize) -> Belief {
        let n = mech.messages(opponent).len();
        let target = mech
            .canonical_message(opponent, WorkerType::Expert.index())
            .expect("builtin mechanisms have an expert claim");
        let noise = self.noise();
        let rest = if n > 1 { noise / Payoff::from_integer(n as i64 - 1) } else { Payoff::zero() };
        (0..n)
            .map(|m| if m == target { Payoff::from_integer(1) - noise } else { rest })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub session_id: usize,
    pub mechanism: String,
    pub n_subjects: usize,
    pub n_periods: u32,
    pub n_practice: u32,
    /// The paid period is drawn uniformly from the last `paid_window` periods.
    pub paid_window: u32,
    pub seed: u64,
    #[serde(default)]
    pub belief: BeliefMode,
}

impl SessionConfig {
    pub fn new(session_id: usize, mechanism: BuiltinMechanism, n_subjects: usize, seed: u64) -> Self {
        Self {
            session_id,
            mechanism: mechanism.name().into(),
            n_subjects,
            n_periods: 13,
            n_practice: 3,
            paid_window: 10,
            seed,
            belief: BeliefMode::default(),
        }
    }

    pub fn validate(&self) -> Result<BuiltinMechanism> {
        let mech = BuiltinMechanism::from_name(&self.mechanism)
            .ok_or_else(|| domain(format!("unknown mechanism {:?}", self.mechanism)))?;
        if self.n_subjects == 0 || !self.n_subjects.is_multiple_of(3) {
            return Err(domain(format!(
                "session {}: {} subjects is not a positive multiple of 3",
                self.session_id, self.n_subjects
            )));
        }
        if self.n_practice >= self.n_periods {
            return Err(domain("practice periods must leave at least one paid period"));
        }
        if self.paid_window == 0 || self.paid_window > self.n_periods - self.n_practice {
            return Err(domain("paid window must fit inside the non-practice periods"));
        }
        self.belief.validate()?;
        Ok(mech)
    }

    pub fn n_workers(&self) -> usize {
        self.n_subjects * 2 / 3
    }

    pub fn n_groups(&self) -> usize {
        self.n_subjects / 3
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorkerObs {
    pub subject: usize,
    pub true_type: WorkerType,
    pub message: usize,
    pub message_id: String,
    /// Canonical claim, `None` for an unanswered message.
    pub claim: Option<WorkerType>,
    pub payoff: Payoff,
    pub lie: bool,
}

impl WorkerObs {
    pub fn is_truthful(&self) -> bool {
        self.claim == Some(self.true_type)
    }

    pub fn is_deceptive(&self) -> bool {
        self.claim == Some(self.true_type.opposite())
    }

    pub fn claims_expert(&self) -> bool {
        self.claim == Some(WorkerType::Expert)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StafferObs {
    pub subject: usize,
    pub payoff: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    pub session: usize,
    pub mechanism: BuiltinMechanism,
    pub period: u32,
    pub group: usize,
    pub workers: [WorkerObs; 2],
    pub staffer: StafferObs,
    pub practice: bool,
    pub paid: bool,
}

/// Position of a record within a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RecordKey {
    pub session: usize,
    pub period: u32,
    pub group: usize,
}

impl PeriodRecord {
    /// Plays `msgs` in `mech` and records payoffs, lies and the staffer's
    /// payoff from the identified types. `subjects` lists seat 1, seat 2
    /// and the staffer.
    #[allow(clippy::too_many_arguments)]
    pub fn evaluate(
        env: &Environment,
        mech: &Mechanism,
        builtin: BuiltinMechanism,
        key: RecordKey,
        subjects: [usize; 3],
        types: [WorkerType; 2],
        msgs: [usize; 2],
        practice: bool,
        paid: bool,
    ) -> Result<Self> {
        let outcome = mech.outcome(&msgs)?;
        let inferred = mech.inferred_types(&msgs)?;
        let identified = [0, 1].map(|i| WorkerType::from_index(inferred[i]).expect("binary types"));
        debug_assert_eq!(PRINCIPAL_WORKER_OUTCOMES[outcome], principal_scf(identified));
        let make = |seat: usize| -> Result<WorkerObs> {
            let m = &mech.messages(seat)[msgs[seat]];
            Ok(WorkerObs {
                subject: subjects[seat],
                true_type: types[seat],
                message: msgs[seat],
                message_id: m.id.clone(),
                claim: m.canonical.and_then(WorkerType::from_index),
                payoff: env.payoff(seat, outcome, types[seat].index())?,
                lie: mech.message_is_lie(seat, types[seat].index(), msgs[seat])?,
            })
        };
        Ok(PeriodRecord {
            session: key.session,
            mechanism: builtin,
            period: key.period,
            group: key.group,
            workers: [make(0)?, make(1)?],
            staffer: StafferObs { subject: subjects[2], payoff: staffer_payoff(types, identified) },
            practice,
            paid,
        })
    }

    pub fn types(&self) -> [WorkerType; 2] {
        [self.workers[0].true_type, self.workers[1].true_type]
    }

    pub fn claims(&self) -> [Option<WorkerType>; 2] {
        [self.workers[0].claim, self.workers[1].claim]
    }

    pub fn workers_payoff(&self) -> Payoff {
        self.workers[0].payoff + self.workers[1].payoff
    }
}

/// Combined payoff of both workers and the staffer when a group with true
/// `types` sends `msgs` in a built-in mechanism.
pub fn group_total(builtin: BuiltinMechanism, types: [WorkerType; 2], msgs: [usize; 2]) -> Result<Payoff> {
    let env = Environment::principal_worker();
    let mech = builtin.build();
    let key = RecordKey { session: 0, period: 0, group: 0 };
    let r = PeriodRecord::evaluate(&env, &mech, builtin, key, [1, 2, 3], types, msgs, false, false)?;
    Ok(r.workers_payoff() + Payoff::from_integer(r.staffer.payoff))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionMeta {
    pub session_id: usize,
    pub mechanism: String,
    pub n_subjects: usize,
    pub seed: u64,
    pub paid_period: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub belief: BeliefMode,
    #[serde(default)]
    pub sessions: Vec<SessionMeta>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SessionDataset {
    pub records: Vec<PeriodRecord>,
    pub meta: DatasetMeta,
}

impl SessionDataset {
    pub fn non_practice(&self) -> impl Iterator<Item = &PeriodRecord> {
        self.records.iter().filter(|r| !r.practice)
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

fn observe(counts: &mut [u32], msg: usize) {
    counts[msg] += 1;
}

fn empirical_belief(static_belief: &Belief, counts: &[u32], prior_weight: u32) -> Belief {
    let total: u32 = counts.iter().sum::<u32>() + prior_weight;
    if total == 0 {
        return static_belief.clone();
    }
    let w = Payoff::from_integer(prior_weight as i64);
    static_belief
        .iter()
        .zip(counts)
        .map(|(p, &c)| (w * p + Payoff::from_integer(c as i64)) / Payoff::from_integer(total as i64))
        .collect()
}

/// Runs one session. `population[k]` is the rule of subject `k + 1`;
/// staffers' rules are unused.
pub fn run_session(config: &SessionConfig, population: &[BehaviorRule]) -> Result<SessionDataset> {
    let builtin = config.validate()?;
    if population.len() != config.n_subjects {
        return Err(domain(format!(
            "population has {} rules for {} subjects",
            population.len(),
            config.n_subjects
        )));
    }
    for rule in population {
        rule.validate()?;
    }
    let env = Environment::principal_worker();
    let mech = builtin.build();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut subjects: Vec<usize> = (1..=config.n_subjects).collect();
    subjects.shuffle(&mut rng);
    let mut workers = subjects[..config.n_workers()].to_vec();
    let mut staffers = subjects[config.n_workers()..].to_vec();
    workers.sort_unstable();
    staffers.sort_unstable();

    let first_paid = config.n_periods - config.paid_window + 1;
    let paid_period = rng.gen_range(first_paid..=config.n_periods);

    let n_msgs = mech.messages(0).len();
    let mut observed: Vec<Vec<u32>> = vec![vec![0; n_msgs]; config.n_subjects + 1];
    let statics = [config.belief.static_belief(&mech, 1), config.belief.static_belief(&mech, 0)];

    let mut records = Vec::with_capacity(config.n_periods as usize * config.n_groups());
    for period in 1..=config.n_periods {
        workers.shuffle(&mut rng);
        staffers.shuffle(&mut rng);
        let mut seen = Vec::with_capacity(config.n_workers());
        for group in 0..config.n_groups() {
            let pair = [workers[2 * group], workers[2 * group + 1]];
            let types = [0, 1].map(|_| if rng.gen_bool(0.5) { WorkerType::Expert } else { WorkerType::Beginner });
            let mut msgs = [0usize; 2];
            for seat in 0..2 {
                let belief = match config.belief {
                    BeliefMode::Static { .. } => statics[seat].clone(),
                    BeliefMode::Empirical { prior_weight, .. } => {
                        empirical_belief(&statics[seat], &observed[pair[seat]], prior_weight)
                    }
                };
                msgs[seat] = choose_message(
                    &population[pair[seat] - 1],
                    &env,
                    &mech,
                    Seat(seat),
                    types[seat],
                    &belief,
                    &mut rng,
                )?;
            }
            records.push(PeriodRecord::evaluate(
                &env,
                &mech,
                builtin,
                RecordKey { session: config.session_id, period, group: group + 1 },
                [pair[0], pair[1], staffers[group]],
                types,
                msgs,
                period <= config.n_practice,
                period == paid_period,
            )?);
            seen.push((pair[0], msgs[1]));
            seen.push((pair[1], msgs[0]));
        }
        for (subject, msg) in seen {
            observe(&mut observed[subject], msg);
        }
    }
    records.sort_by_key(|r| (r.period, r.group));
    Ok(SessionDataset {
        records,
        meta: DatasetMeta {
            master_seed: None,
            belief: config.belief.clone(),
            sessions: vec![SessionMeta {
                session_id: config.session_id,
                mechanism: config.mechanism.clone(),
                n_subjects: config.n_subjects,
                seed: config.seed,
                paid_period,
            }],
        },
    })
}

/// Sessions to run for one mechanism, one entry per session size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub mechanism: String,
    pub session_sizes: Vec<usize>,
}

impl GridCell {
    pub fn new(mechanism: BuiltinMechanism, session_sizes: &[usize]) -> Self {
        Self { mechanism: mechanism.name().into(), session_sizes: session_sizes.to_vec() }
    }
}

/// Fourteen sessions, 159 subjects.
pub fn reference_grid() -> Vec<GridCell> {
    use BuiltinMechanism::*;
    vec![
        GridCell::new(DirectImplicit, &[12, 12, 12]),
        GridCell::new(DirectExplicit, &[12, 12, 12]),
        GridCell::new(ExtendedImplicit, &[12, 12, 12, 9]),
        GridCell::new(ExtendedExplicit, &[12, 12, 9, 9]),
    ]
}

/// Independent child seed for `(session, purpose)` under `master`.
pub fn derive_seed(master: u64, session: usize, purpose: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((session as u64) << 8) | purpose);
    rng.next_u64()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub grid: Vec<GridCell>,
    pub population: PopulationSpec,
    pub belief: BeliefMode,
    pub master_seed: u64,
}

impl ExperimentPlan {
    /// Reference session layout, calibrated population, and a static belief
    /// that the opponent coordinates with probability 9/10.
    pub fn calibrated(master_seed: u64) -> Self {
        Self {
            grid: reference_grid(),
            population: PopulationSpec::calibrated(),
            belief: BeliefMode::Static { noise: Payoff::new(1, 10) },
            master_seed,
        }
    }

    pub fn sessions(&self) -> Result<Vec<(SessionConfig, Vec<BehaviorRule>)>> {
        self.population.validate()?;
        let mut out = Vec::new();
        let mut id = 0;
        for cell in &self.grid {
            for &size in &cell.session_sizes {
                id += 1;
                let mut cfg = SessionConfig {
                    belief: self.belief.clone(),
                    ..SessionConfig::new(id, BuiltinMechanism::DirectImplicit, size, derive_seed(self.master_seed, id, 0))
                };
                cfg.mechanism = cell.mechanism.clone();
                cfg.validate()?;
                let mut pop_rng = ChaCha8Rng::seed_from_u64(derive_seed(self.master_seed, id, 1));
                let population = self.population.sample(size, &mut pop_rng);
                out.push((cfg, population));
            }
        }
        Ok(out)
    }
}

/// Runs every session of the plan (in parallel) and pools the records,
/// ordered by session id then period then group.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<SessionDataset> {
    let sessions = plan.sessions()?;
    let results: Vec<SessionDataset> = sessions
        .par_iter()
        .map(|(cfg, pop)| run_session(cfg, pop))
        .collect::<Result<_>>()?;
    let mut pooled = SessionDataset {
        records: Vec::new(),
        meta: DatasetMeta { master_seed: Some(plan.master_seed), belief: plan.belief.clone(), sessions: Vec::new() },
    };
    for ds in results {
        pooled.records.extend(ds.records);
        pooled.meta.sessions.extend(ds.meta.sessions);
    }
    Ok(pooled)
}
