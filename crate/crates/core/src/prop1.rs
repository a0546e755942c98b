//! Brute-force verification of the composition result: if `sigma` is an
//! ex-post equilibrium of `(M, phi)` with `phi . sigma = f`, then for every
//! ex-post equilibrium `delta` of the direct mechanism of `f`,
//! `sigma . delta` is an ex-post equilibrium of `(M, phi)` inducing `f . delta`.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::env::{Environment, Payoff, SocialChoiceFunction};
use crate::equilibrium::{is_strategy_proof, Game, StrategyProfile, DEFAULT_PROFILE_CAP};
use crate::error::{Error, Result};
use crate::mechanism::{InferenceRule, Mechanism, Message};
use crate::space::MixedRadix;

/// Largest `|X|^|Theta|` the random SCF generator will enumerate.
pub const SCF_ENUMERATION_CAP: usize = 65_536;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionCheck {
    pub delta: StrategyProfile,
    pub composite: StrategyProfile,
    pub composite_is_ex_post: bool,
    pub induced_matches: bool,
}

impl CompositionCheck {
    pub fn passed(&self) -> bool {
        self.composite_is_ex_post && self.induced_matches
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prop1Report {
    pub checks: Vec<CompositionCheck>,
}

impl Prop1Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(CompositionCheck::passed)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.passed()).count()
    }
}

/// `theta -> f(delta(theta))`, computed straight from the tables.
fn compose_scf(env: &Environment, f: &SocialChoiceFunction, delta: &StrategyProfile) -> Result<SocialChoiceFunction> {
    let mut out = Vec::new();
    for types in env.type_profile_space().iter() {
        out.push(f.outcome(&delta.messages_for(&types))?);
    }
    SocialChoiceFunction::new(env.type_counts(), out)
}

/// Returns `Err(Precondition)` when `sigma` is not an ex-post equilibrium of
/// `mech` or does not implement `f`; theorem failures show up as failed
/// checks in the report.
pub fn verify_composition(
    env: &Environment,
    f: &SocialChoiceFunction,
    mech: &Mechanism,
    sigma: &StrategyProfile,
) -> Result<Prop1Report> {
    f.validate_for(env)?;
    let game = Game::new(env, mech)?;
    if !game.is_ex_post_equilibrium(sigma)? {
        return Err(Error::Precondition(format!("sigma is not an ex-post equilibrium of {}", mech.name)));
    }
    if game.induced_scf(sigma)? != *f {
        return Err(Error::Precondition(format!("sigma does not implement f in {}", mech.name)));
    }

    let direct = Mechanism::build_direct(env, f, false);
    let direct_game = Game::new(env, &direct)?;
    let deltas = direct_game.enumerate_ex_post_equilibria(DEFAULT_PROFILE_CAP)?;

    let checks = deltas
        .into_iter()
        .map(|report| {
            let delta = report.profile;
            let composite = StrategyProfile::compose(sigma, &delta)?;
            let composite_is_ex_post = game.is_ex_post_equilibrium(&composite)?;
            let induced_matches = game.induced_scf(&composite)? == compose_scf(env, f, &delta)?;
            Ok(CompositionCheck { delta, composite, composite_is_ex_post, induced_matches })
        })
        .collect::<Result<_>>()?;
    Ok(Prop1Report { checks })
}

/// One instance of the randomized suite.
#[derive(Debug, Clone)]
pub struct Trial {
    pub env: Environment,
    pub f: SocialChoiceFunction,
    pub mech: Mechanism,
    pub sigma: StrategyProfile,
}

impl Trial {
    pub fn principal_worker_instance() -> Self {
        let env = Environment::principal_worker();
        let mech = Mechanism::builtin("3x3-E").expect("builtin");
        let sigma = StrategyProfile::truthful(&env, &mech).expect("canonical messages exist");
        Trial { env, f: SocialChoiceFunction::principal(), mech, sigma }
    }

    pub fn verify(&self) -> Result<Prop1Report> {
        verify_composition(&self.env, &self.f, &self.mech, &self.sigma)
    }
}

/// All strategy-proof SCFs of `env`, by exhaustive filtering.
pub fn strategy_proof_scfs(env: &Environment) -> Result<Vec<SocialChoiceFunction>> {
    let n_profiles = env.type_profile_space().len();
    let scf_space = MixedRadix::new(vec![env.n_outcomes(); n_profiles]);
    match scf_space.checked_len() {
        Some(n) if n <= SCF_ENUMERATION_CAP as u128 => {}
        _ => {
            return Err(Error::Domain(format!(
                "{}^{} scfs exceeds the enumeration cap of {SCF_ENUMERATION_CAP}",
                env.n_outcomes(),
                n_profiles
            )))
        }
    }
    let mut out = Vec::new();
    for table in scf_space.iter() {
        let f = SocialChoiceFunction::new(env.type_counts(), table)?;
        if is_strategy_proof(env, &f)? {
            out.push(f);
        }
    }
    Ok(out)
}

/// Two agents, at most three types each, at most four outcomes, integer
/// payoffs in `[0, 9]`.
pub fn random_environment(rng: &mut impl Rng) -> Environment {
    loop {
        let types = [rng.gen_range(1..=3usize), rng.gen_range(1..=3usize)];
        let n_out = rng.gen_range(2..=4usize);
        let n_profiles = types[0] * types[1];
        if (n_out as u128).pow(n_profiles as u32) > SCF_ENUMERATION_CAP as u128 {
            continue;
        }
        let payoffs = types
            .iter()
            .map(|&nt| {
                (0..n_out)
                    .map(|_| (0..nt).map(|_| Payoff::from_integer(rng.gen_range(0..=9))).collect())
                    .collect()
            })
            .collect();
        return Environment::new(
            vec!["agent1".into(), "agent2".into()],
            types.iter().map(|&n| (0..n).map(|t| format!("t{t}")).collect()).collect(),
            (0..n_out).map(|x| format!("x{x}")).collect(),
            payoffs,
        )
        .expect("generated environment is well formed");
    }
}

/// Direct mechanism of `f` with some messages duplicated, plus an
/// equilibrium `sigma` that sends each type to a random copy of its report.
pub fn duplicated_direct(env: &Environment, f: &SocialChoiceFunction, rng: &mut impl Rng) -> (Mechanism, StrategyProfile) {
    let mut spaces = Vec::new();
    let mut meaning = Vec::new();
    let mut strategies = Vec::new();
    for agent in 0..env.n_agents() {
        let n = env.type_space(agent).len();
        let mut owners: Vec<usize> = (0..n).collect();
        for t in 0..n {
            if rng.gen_bool(0.5) {
                owners.push(t);
            }
        }
        owners.shuffle(rng);
        let msgs: Vec<Message> = owners
            .iter()
            .enumerate()
            .map(|(k, &t)| Message::neutral(format!("m{k}"), format!("Option {k}"), Some(t)))
            .collect();
        let sigma: Vec<usize> = (0..n)
            .map(|t| {
                let copies: Vec<usize> = (0..owners.len()).filter(|&k| owners[k] == t).collect();
                *copies.choose(rng).unwrap()
            })
            .collect();
        spaces.push(msgs);
        meaning.push(owners);
        strategies.push(sigma);
    }
    let space = MixedRadix::new(spaces.iter().map(Vec::len).collect());
    let table = space
        .iter()
        .map(|msgs| {
            let types: Vec<usize> = msgs.iter().enumerate().map(|(i, &m)| meaning[i][m]).collect();
            f.outcome(&types).expect("types in range")
        })
        .collect();
    let mech = Mechanism::new("duplicated-direct", spaces, env.outcomes().to_vec(), table, InferenceRule::None)
        .expect("well-formed mechanism");
    (mech, StrategyProfile::new(strategies))
}

pub fn random_trial(rng: &mut impl Rng) -> Result<Trial> {
    let env = random_environment(rng);
    let candidates = strategy_proof_scfs(&env)?;
    let f = candidates.choose(rng).cloned().ok_or_else(|| {
        Error::Domain("no strategy-proof scf (constant scfs always qualify)".into())
    })?;
    let (mech, sigma) = duplicated_direct(&env, &f, rng);
    Ok(Trial { env, f, mech, sigma })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialOutcome {
    pub index: usize,
    pub description: String,
    pub deltas_checked: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteReport {
    pub seed: u64,
    pub principal_worker: TrialOutcome,
    pub random: Vec<TrialOutcome>,
}

impl SuiteReport {
    pub fn random_passed(&self) -> usize {
        self.random.iter().filter(|t| t.failures == 0).count()
    }

    pub fn passed(&self) -> bool {
        self.principal_worker.failures == 0 && self.random.iter().all(|t| t.failures == 0)
    }
}

fn outcome_of(index: usize, trial: &Trial, description: String) -> Result<TrialOutcome> {
    let report = trial.verify()?;
    Ok(TrialOutcome { index, description, deltas_checked: report.checks.len(), failures: report.failures() })
}

/// Trial 0 is the principal-worker instance (3x3-E, truthful sigma);
/// trials `1..=n` are random.
pub fn run_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let principal_worker = outcome_of(0, &Trial::principal_worker_instance(), "principal-worker, 3x3-E".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = Vec::with_capacity(trials);
    for index in 1..=trials {
        let trial = random_trial(&mut rng)?;
        let desc = format!(
            "types {:?}, {} outcomes, messages {:?}",
            trial.env.type_counts(),
            trial.env.n_outcomes(),
            trial.mech.message_counts()
        );
        random.push(outcome_of(index, &trial, desc)?);
    }
    Ok(SuiteReport { seed, principal_worker, random })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::PRINCIPAL_WORKER_OUTCOMES;

    #[test]
    fn principal_worker_instance_passes_and_yields_worker_optimal() {
        let trial = Trial::principal_worker_instance();
        let report = trial.verify().unwrap();
        assert!(report.passed());
        assert_eq!(report.checks.len(), 4);
        let game = Game::new(&trial.env, &trial.mech).unwrap();
        let all_e = report
            .checks
            .iter()
            .find(|c| c.delta == StrategyProfile::new(vec![vec![1, 1], vec![1, 1]]))
            .unwrap();
        assert_eq!(game.induced_scf(&all_e.composite).unwrap(), SocialChoiceFunction::worker_optimal());
        assert_eq!(PRINCIPAL_WORKER_OUTCOMES.len(), trial.env.n_outcomes());
    }

    #[test]
    fn direct_mechanism_itself_passes() {
        let env = Environment::principal_worker();
        let mech = Mechanism::builtin("2x2-I").unwrap();
        let sigma = StrategyProfile::truthful(&env, &mech).unwrap();
        assert!(verify_composition(&env, &SocialChoiceFunction::principal(), &mech, &sigma).unwrap().passed());
    }

    #[test]
    fn precondition_failures_are_distinct() {
        let env = Environment::principal_worker();
        let mech = Mechanism::builtin("3x3-E").unwrap();
        let u = mech.message_index(0, "U").unwrap();
        let all_u = StrategyProfile::new(vec![vec![u, u], vec![u, u]]);
        let r = verify_composition(&env, &SocialChoiceFunction::principal(), &mech, &all_u);
        assert!(matches!(r, Err(Error::Precondition(_))));
        // Equilibrium, but implements the worker-optimal scf, not f.
        let all_e = StrategyProfile::constant_report(&env, &mech, 1).unwrap();
        let r = verify_composition(&env, &SocialChoiceFunction::principal(), &mech, &all_e);
        assert!(matches!(r, Err(Error::Precondition(_))));
    }

    #[test]
    fn duplicated_mechanism_implements_f() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let trial = random_trial(&mut rng).unwrap();
            let game = Game::new(&trial.env, &trial.mech).unwrap();
            assert_eq!(game.induced_scf(&trial.sigma).unwrap(), trial.f);
            assert!(game.is_ex_post_equilibrium(&trial.sigma).unwrap());
        }
    }

    #[test]
    fn small_suite_passes() {
        let report = run_suite(10, 11).unwrap();
        assert!(report.passed());
        assert_eq!(report.random_passed(), 10);
    }
}
