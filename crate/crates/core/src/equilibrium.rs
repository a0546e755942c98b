//! Pure-strategy equilibrium analysis for finite mechanisms.
//!
//! All comparisons are exact ([`Payoff`] is rational) and weak, as in the
//! ex-post incentive inequality: no tolerance exists anywhere in this module.

use rayon::prelude::*;

use crate::env::{Environment, Payoff, SocialChoiceFunction};
use crate::error::{domain, Error, Result};
use crate::mechanism::Mechanism;
use crate::space::MixedRadix;

/// Default cap on the number of pure strategy profiles enumerated.
pub const DEFAULT_PROFILE_CAP: u128 = 10_000_000;

/// `strategies[agent][own type] = message`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StrategyProfile {
    strategies: Vec<Vec<usize>>,
}

impl StrategyProfile {
    pub fn new(strategies: Vec<Vec<usize>>) -> Self {
        Self { strategies }
    }

    /// Every type sends its canonical message.
    pub fn truthful(env: &Environment, mech: &Mechanism) -> Result<Self> {
        Self::reporting(env, mech, |_, t| t)
    }

    /// Every type of every agent sends the canonical message for `ty`.
    pub fn constant_report(env: &Environment, mech: &Mechanism, ty: usize) -> Result<Self> {
        Self::reporting(env, mech, |_, _| ty)
    }

    /// Each type sends the canonical message for `report(agent, type)`.
    pub fn reporting(
        env: &Environment,
        mech: &Mechanism,
        report: impl Fn(usize, usize) -> usize,
    ) -> Result<Self> {
        let strategies = (0..env.n_agents())
            .map(|agent| {
                (0..env.type_space(agent).len())
                    .map(|t| {
                        let r = report(agent, t);
                        mech.canonical_message(agent, r).ok_or_else(|| {
                            domain(format!("{}: agent {agent} has no message for type {r}", mech.name))
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(Self { strategies })
    }

    /// The identity report profile of a direct mechanism.
    pub fn identity(env: &Environment) -> Self {
        Self {
            strategies: env.type_counts().into_iter().map(|n| (0..n).collect()).collect(),
        }
    }

    pub fn strategies(&self) -> &[Vec<usize>] {
        &self.strategies
    }

    pub fn message(&self, agent: usize, own_type: usize) -> usize {
        self.strategies[agent][own_type]
    }

    pub fn n_agents(&self) -> usize {
        self.strategies.len()
    }

    pub fn messages_for(&self, types: &[usize]) -> Vec<usize> {
        types.iter().enumerate().map(|(i, &t)| self.strategies[i][t]).collect()
    }

    pub fn flattened(&self) -> Vec<usize> {
        self.strategies.iter().flatten().copied().collect()
    }

    /// `(outer . inner)_i(t) = outer_i(inner_i(t))`. `inner` must map
    /// types to types of the same agent.
    pub fn compose(outer: &StrategyProfile, inner: &StrategyProfile) -> Result<StrategyProfile> {
        if outer.n_agents() != inner.n_agents() {
            return Err(Error::Composition(format!(
                "outer profile has {} agents, inner has {}",
                outer.n_agents(),
                inner.n_agents()
            )));
        }
        let strategies = outer
            .strategies
            .iter()
            .zip(&inner.strategies)
            .enumerate()
            .map(|(agent, (o, i))| {
                i.iter()
                    .map(|&r| {
                        o.get(r).copied().ok_or_else(|| {
                            Error::Composition(format!(
                                "agent {agent}: inner report {r} outside the outer strategy's domain of {} types",
                                o.len()
                            ))
                        })
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        Ok(StrategyProfile { strategies })
    }

    /// Render as `agent: type->message, ...` using ids.
    pub fn describe(&self, env: &Environment, mech: &Mechanism) -> String {
        self.strategies
            .iter()
            .enumerate()
            .map(|(agent, s)| {
                let parts: Vec<String> = s
                    .iter()
                    .enumerate()
                    .map(|(t, &m)| format!("{}->{}", env.type_space(agent)[t], mech.messages(agent)[m].id))
                    .collect();
                format!("{}[{}]", env.agents()[agent], parts.join(" "))
            })
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EquilibriumReport {
    pub profile: StrategyProfile,
    pub ex_post: bool,
    pub dominant_strategy: bool,
    /// `(agent, type)` pairs whose message is weakly dominated.
    pub weakly_dominated_components: Vec<(usize, usize)>,
    pub induced_scf: SocialChoiceFunction,
}

/// An environment paired with a compatible mechanism.
#[derive(Debug, Clone, Copy)]
pub struct Game<'a> {
    env: &'a Environment,
    mech: &'a Mechanism,
}

impl<'a> Game<'a> {
    pub fn new(env: &'a Environment, mech: &'a Mechanism) -> Result<Self> {
        mech.check_compatible(env)?;
        Ok(Self { env, mech })
    }

    pub fn env(&self) -> &'a Environment {
        self.env
    }

    pub fn mechanism(&self) -> &'a Mechanism {
        self.mech
    }

    #[inline]
    fn utility(&self, agent: usize, msgs: &[usize], own_type: usize) -> Payoff {
        let x = self.mech.outcome(msgs).expect("message profile validated");
        self.env.payoff_at(agent, x, own_type)
    }

    pub fn validate_profile(&self, profile: &StrategyProfile) -> Result<()> {
        if profile.n_agents() != self.env.n_agents() {
            return Err(domain(format!(
                "profile has {} agents, environment has {}",
                profile.n_agents(),
                self.env.n_agents()
            )));
        }
        for (agent, s) in profile.strategies.iter().enumerate() {
            if s.len() != self.env.type_space(agent).len() {
                return Err(domain(format!(
                    "agent {agent}: strategy covers {} types, expected {}",
                    s.len(),
                    self.env.type_space(agent).len()
                )));
            }
            let n = self.mech.messages(agent).len();
            if let Some(&m) = s.iter().find(|&&m| m >= n) {
                return Err(domain(format!("agent {agent}: message {m} outside its message space")));
            }
        }
        Ok(())
    }

    pub fn is_ex_post_equilibrium(&self, profile: &StrategyProfile) -> Result<bool> {
        self.validate_profile(profile)?;
        Ok(self.ex_post_unchecked(profile))
    }

    fn ex_post_unchecked(&self, profile: &StrategyProfile) -> bool {
        let counts = self.mech.message_counts();
        self.env.type_profile_space().iter().all(|types| {
            let mut msgs = profile.messages_for(&types);
            (0..self.env.n_agents()).all(|i| {
                let chosen = msgs[i];
                let base = self.utility(i, &msgs, types[i]);
                let ok = (0..counts[i]).all(|m| {
                    msgs[i] = m;
                    base >= self.utility(i, &msgs, types[i])
                });
                msgs[i] = chosen;
                ok
            })
        })
    }

    fn opponent_profiles(&self, agent: usize) -> MixedRadix {
        let mut counts = self.mech.message_counts();
        counts[agent] = 1;
        MixedRadix::new(counts)
    }

    fn check_message(&self, agent: usize, own_type: usize, msg: usize) -> Result<()> {
        if agent >= self.env.n_agents() {
            return Err(domain(format!("unknown agent {agent}")));
        }
        if own_type >= self.env.type_space(agent).len() {
            return Err(domain(format!("agent {agent} has no type {own_type}")));
        }
        if msg >= self.mech.messages(agent).len() {
            return Err(domain(format!("agent {agent} has no message {msg}")));
        }
        Ok(())
    }

    /// `msg` does at least as well as every alternative against every
    /// opposing message profile.
    pub fn is_weakly_dominant_message(&self, agent: usize, own_type: usize, msg: usize) -> Result<bool> {
        self.check_message(agent, own_type, msg)?;
        let n = self.mech.messages(agent).len();
        Ok(self.opponent_profiles(agent).iter().all(|mut msgs| {
            msgs[agent] = msg;
            let base = self.utility(agent, &msgs, own_type);
            (0..n).all(|m| {
                msgs[agent] = m;
                base >= self.utility(agent, &msgs, own_type)
            })
        }))
    }

    /// Some other message does weakly better everywhere and strictly better
    /// somewhere.
    pub fn is_weakly_dominated_message(&self, agent: usize, own_type: usize, msg: usize) -> Result<bool> {
        self.check_message(agent, own_type, msg)?;
        let opponents: Vec<Vec<usize>> = self.opponent_profiles(agent).iter().collect();
        let n = self.mech.messages(agent).len();
        Ok((0..n).filter(|&alt| alt != msg).any(|alt| {
            let mut strict = false;
            let weak = opponents.iter().all(|opp| {
                let mut msgs = opp.clone();
                msgs[agent] = msg;
                let here = self.utility(agent, &msgs, own_type);
                msgs[agent] = alt;
                let there = self.utility(agent, &msgs, own_type);
                strict |= there > here;
                there >= here
            });
            weak && strict
        }))
    }

    pub fn is_dominant_strategy_profile(&self, profile: &StrategyProfile) -> Result<bool> {
        self.validate_profile(profile)?;
        for (agent, s) in profile.strategies.iter().enumerate() {
            for (t, &m) in s.iter().enumerate() {
                if !self.is_weakly_dominant_message(agent, t, m)? {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    pub fn weakly_dominated_components(&self, profile: &StrategyProfile) -> Result<Vec<(usize, usize)>> {
        self.validate_profile(profile)?;
        let mut out = Vec::new();
        for (agent, s) in profile.strategies.iter().enumerate() {
            for (t, &m) in s.iter().enumerate() {
                if self.is_weakly_dominated_message(agent, t, m)? {
                    out.push((agent, t));
                }
            }
        }
        Ok(out)
    }

    /// `theta -> phi(sigma(theta))`.
    pub fn induced_scf(&self, profile: &StrategyProfile) -> Result<SocialChoiceFunction> {
        self.validate_profile(profile)?;
        Ok(SocialChoiceFunction::from_fn(self.env, |types| {
            self.mech.outcome(&profile.messages_for(types)).expect("validated")
        }))
    }

    pub fn report(&self, profile: StrategyProfile) -> Result<EquilibriumReport> {
        let ex_post = self.is_ex_post_equilibrium(&profile)?;
        let dominant_strategy = self.is_dominant_strategy_profile(&profile)?;
        let weakly_dominated_components = self.weakly_dominated_components(&profile)?;
        let induced_scf = self.induced_scf(&profile)?;
        Ok(EquilibriumReport { profile, ex_post, dominant_strategy, weakly_dominated_components, induced_scf })
    }

    fn strategy_space(&self) -> MixedRadix {
        let counts = self.mech.message_counts();
        MixedRadix::new(
            (0..self.env.n_agents())
                .flat_map(|i| std::iter::repeat_n(counts[i], self.env.type_space(i).len()))
                .collect(),
        )
    }

    fn profile_from_digits(&self, digits: &[usize]) -> StrategyProfile {
        let mut rest = digits;
        let strategies = (0..self.env.n_agents())
            .map(|i| {
                let (head, tail) = rest.split_at(self.env.type_space(i).len());
                rest = tail;
                head.to_vec()
            })
            .collect();
        StrategyProfile { strategies }
    }

    /// Number of pure strategy profiles; `None` on overflow.
    pub fn profile_count(&self) -> Option<u128> {
        self.strategy_space().checked_len()
    }

    /// All pure ex-post equilibria, ordered lexicographically by the
    /// flattened profile. Output does not depend on the thread count.
    pub fn enumerate_ex_post_equilibria(&self, cap: u128) -> Result<Vec<EquilibriumReport>> {
        let space = self.strategy_space();
        let product = space.checked_len().unwrap_or(u128::MAX);
        if product > cap {
            return Err(Error::TooLarge { product, cap });
        }
        let mut found: Vec<StrategyProfile> = (0..product as u64)
            .into_par_iter()
            .filter_map(|idx| {
                let mut digits = vec![0; space.digits()];
                space.decode_into(idx as u128, &mut digits);
                let profile = self.profile_from_digits(&digits);
                self.ex_post_unchecked(&profile).then_some(profile)
            })
            .collect();
        found.sort_by_key(StrategyProfile::flattened);
        found.into_iter().map(|p| self.report(p)).collect()
    }

    /// Each type's message maximizes its expected payoff against the others'
    /// strategies under `prior` (a distribution over type profiles in
    /// row-major order). Types with zero marginal probability pass.
    pub fn interim_best_response_check(&self, profile: &StrategyProfile, prior: &[Payoff]) -> Result<bool> {
        self.validate_profile(profile)?;
        let types_space = self.env.type_profile_space();
        if prior.len() != types_space.len() {
            return Err(domain(format!(
                "prior has {} entries, type space has {} profiles",
                prior.len(),
                types_space.len()
            )));
        }
        if prior.iter().any(|p| *p < Payoff::from_integer(0)) {
            return Err(domain("prior has a negative probability"));
        }
        if prior.iter().sum::<Payoff>() != Payoff::from_integer(1) {
            return Err(domain("prior does not sum to one"));
        }
        let profiles: Vec<Vec<usize>> = types_space.iter().collect();
        for agent in 0..self.env.n_agents() {
            let n_msgs = self.mech.messages(agent).len();
            for own in 0..self.env.type_space(agent).len() {
                // Joint weights: same argmax as the conditional expectation.
                let mut value = vec![Payoff::from_integer(0); n_msgs];
                let mut mass = Payoff::from_integer(0);
                for (types, &p) in profiles.iter().zip(prior) {
                    if types[agent] != own || p == Payoff::from_integer(0) {
                        continue;
                    }
                    mass += p;
                    let mut msgs = profile.messages_for(types);
                    for (m, v) in value.iter_mut().enumerate() {
                        msgs[agent] = m;
                        *v += p * self.utility(agent, &msgs, own);
                    }
                }
                if mass == Payoff::from_integer(0) {
                    continue;
                }
                let chosen = value[profile.message(agent, own)];
                if value.iter().any(|v| *v > chosen) {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }
}

/// Truthful reporting is weakly dominant for every agent and type in the
/// direct mechanism of `f`.
pub fn is_strategy_proof(env: &Environment, f: &SocialChoiceFunction) -> Result<bool> {
    f.validate_for(env)?;
    let direct = Mechanism::build_direct(env, f, true);
    let game = Game::new(env, &direct)?;
    for agent in 0..env.n_agents() {
        for t in 0..env.type_space(agent).len() {
            if !game.is_weakly_dominant_message(agent, t, t)? {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::WorkerType;

    fn pw_env() -> Environment {
        Environment::principal_worker()
    }

    const B: usize = 0;
    const E: usize = 1;

    #[test]
    fn truthful_is_ex_post_in_direct_implicit() {
        let env = pw_env();
        let m = Mechanism::builtin("2x2-I").unwrap();
        let g = Game::new(&env, &m).unwrap();
        assert!(g.is_ex_post_equilibrium(&StrategyProfile::truthful(&env, &m).unwrap()).unwrap());
    }

    #[test]
    fn extended_all_expert_and_all_unanswered() {
        let env = pw_env();
        let m = Mechanism::builtin("3x3-E").unwrap();
        let g = Game::new(&env, &m).unwrap();
        let all_e = StrategyProfile::constant_report(&env, &m, E).unwrap();
        assert!(g.is_ex_post_equilibrium(&all_e).unwrap());
        let u = m.message_index(0, "U").unwrap();
        let all_u = StrategyProfile::new(vec![vec![u, u], vec![u, u]]);
        assert!(!g.is_ex_post_equilibrium(&all_u).unwrap());
    }

    #[test]
    fn arity_mismatch_is_error() {
        let env = pw_env();
        let m = Mechanism::builtin("2x2-E").unwrap();
        let g = Game::new(&env, &m).unwrap();
        assert!(g.is_ex_post_equilibrium(&StrategyProfile::new(vec![vec![0, 1]])).is_err());
    }

    #[test]
    fn dominance_examples() {
        let env = pw_env();
        let i2 = Mechanism::builtin("2x2-I").unwrap();
        let g = Game::new(&env, &i2).unwrap();
        let deceptive = i2.canonical_message(0, E).unwrap();
        assert!(g.is_weakly_dominant_message(0, B, deceptive).unwrap());

        let e3 = Mechanism::builtin("3x3-E").unwrap();
        let g = Game::new(&env, &e3).unwrap();
        assert!(!g.is_weakly_dominant_message(0, B, e3.canonical_message(0, E).unwrap()).unwrap());
        assert!(g.is_weakly_dominant_message(0, E, e3.canonical_message(0, E).unwrap()).unwrap());
        assert!(g.is_weakly_dominated_message(0, B, e3.canonical_message(0, E).unwrap()).unwrap());
    }

    #[test]
    fn strategy_proofness() {
        let env = pw_env();
        assert!(is_strategy_proof(&env, &SocialChoiceFunction::principal()).unwrap());
        assert!(is_strategy_proof(&env, &SocialChoiceFunction::worker_optimal()).unwrap());
    }

    #[test]
    fn compose_identity_and_relabel() {
        let env = pw_env();
        let m = Mechanism::builtin("3x3-E").unwrap();
        let sigma = StrategyProfile::truthful(&env, &m).unwrap();
        let id = StrategyProfile::identity(&env);
        assert_eq!(StrategyProfile::compose(&sigma, &id).unwrap(), sigma);
        let delta = StrategyProfile::new(vec![vec![E, E], vec![E, E]]);
        let all_e = StrategyProfile::compose(&sigma, &delta).unwrap();
        assert_eq!(all_e, StrategyProfile::constant_report(&env, &m, E).unwrap());
    }

    #[test]
    fn compose_rejects_mismatch() {
        let sigma = StrategyProfile::new(vec![vec![0, 1], vec![0, 1]]);
        assert!(matches!(
            StrategyProfile::compose(&sigma, &StrategyProfile::new(vec![vec![0, 2], vec![0, 1]])),
            Err(Error::Composition(_))
        ));
        assert!(StrategyProfile::compose(&sigma, &StrategyProfile::new(vec![vec![0, 1]])).is_err());
    }

    #[test]
    fn induced_scfs() {
        let env = pw_env();
        let m = Mechanism::builtin("2x2-I").unwrap();
        let g = Game::new(&env, &m).unwrap();
        let truthful = StrategyProfile::truthful(&env, &m).unwrap();
        assert_eq!(g.induced_scf(&truthful).unwrap(), SocialChoiceFunction::principal());
        let all_e = StrategyProfile::constant_report(&env, &m, E).unwrap();
        assert_eq!(g.induced_scf(&all_e).unwrap(), SocialChoiceFunction::worker_optimal());
    }

    #[test]
    fn interim_examples() {
        let env = pw_env();
        let uniform = vec![Payoff::new(1, 4); 4];
        let i2 = Mechanism::builtin("2x2-I").unwrap();
        let g = Game::new(&env, &i2).unwrap();
        let truthful = i2.canonical_message(0, B).unwrap();
        let expert = i2.canonical_message(0, E).unwrap();
        let mixed = StrategyProfile::new(vec![vec![truthful, expert], vec![expert, expert]]);
        assert!(g.interim_best_response_check(&mixed, &uniform).unwrap());

        let i3 = Mechanism::builtin("3x3-I").unwrap();
        let g = Game::new(&env, &i3).unwrap();
        let c = i3.message_index(0, "C").unwrap();
        let all_u = StrategyProfile::new(vec![vec![c, c], vec![c, c]]);
        assert!(!g.interim_best_response_check(&all_u, &uniform).unwrap());
    }

    #[test]
    fn interim_rejects_bad_priors_and_skips_null_types() {
        let env = pw_env();
        let m = Mechanism::builtin("3x3-I").unwrap();
        let g = Game::new(&env, &m).unwrap();
        let truthful = StrategyProfile::truthful(&env, &m).unwrap();
        assert!(g.interim_best_response_check(&truthful, &[Payoff::new(1, 3); 4]).is_err());
        // All mass on (E, E): beginners are never checked.
        let c = m.message_index(0, "C").unwrap();
        let beginners_silent = StrategyProfile::new(vec![vec![c, 1], vec![c, 1]]);
        let point = vec![0.into(), 0.into(), 0.into(), 1.into()];
        assert!(g.interim_best_response_check(&beginners_silent, &point).unwrap());
    }

    #[test]
    fn enumeration_cap() {
        let env = pw_env();
        let m = Mechanism::builtin("3x3-E").unwrap();
        let g = Game::new(&env, &m).unwrap();
        assert_eq!(g.profile_count(), Some(81));
        assert!(matches!(g.enumerate_ex_post_equilibria(80), Err(Error::TooLarge { product: 81, .. })));
    }

    #[test]
    fn worker_type_indices_match_constants() {
        assert_eq!(WorkerType::Beginner.index(), B);
        assert_eq!(WorkerType::Expert.index(), E);
    }
}
