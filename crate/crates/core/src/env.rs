//! Finite private-value environments and the principal-worker instance.
//!
//! An [`Environment`] holds agents, finite type spaces, a finite outcome set
//! and an exact payoff table `payoff[agent][outcome][own type]`. Payoffs
//! depend only on the agent's own type.

use std::fmt;

use num_rational::Ratio;

use crate::error::{domain, Result};
use crate::space::MixedRadix;

/// Exact payoff value. All equilibrium comparisons use this type.
pub type Payoff = Ratio<i64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Salary {
    High,
    Low,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Task {
    Delicate,
    Mixed,
    Perfunctory,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Contract {
    pub salary: Salary,
    pub task: Task,
}

impl Contract {
    pub const HM: Contract = Contract { salary: Salary::High, task: Task::Mixed };
    pub const HD: Contract = Contract { salary: Salary::High, task: Task::Delicate };
    pub const LM: Contract = Contract { salary: Salary::Low, task: Task::Mixed };
    pub const LP: Contract = Contract { salary: Salary::Low, task: Task::Perfunctory };
}

impl fmt::Display for Contract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self.salary {
            Salary::High => 'H',
            Salary::Low => 'L',
        };
        let t = match self.task {
            Task::Delicate => 'D',
            Task::Mixed => 'M',
            Task::Perfunctory => 'P',
        };
        write!(f, "({s},{t})")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum WorkerType {
    Beginner,
    Expert,
}

impl WorkerType {
    pub const ALL: [WorkerType; 2] = [WorkerType::Beginner, WorkerType::Expert];

    pub fn index(self) -> usize {
        match self {
            WorkerType::Beginner => 0,
            WorkerType::Expert => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn opposite(self) -> Self {
        match self {
            WorkerType::Beginner => WorkerType::Expert,
            WorkerType::Expert => WorkerType::Beginner,
        }
    }

    pub fn code(self) -> &'static str {
        match self {
            WorkerType::Beginner => "B",
            WorkerType::Expert => "E",
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "B" => Some(WorkerType::Beginner),
            "E" => Some(WorkerType::Expert),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            WorkerType::Beginner => "Beginner",
            WorkerType::Expert => "Expert",
        }
    }
}

impl fmt::Display for WorkerType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

/// One contract per worker; worker 1 first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Allocation(pub [Contract; 2]);

impl Allocation {
    pub const fn new(first: Contract, second: Contract) -> Self {
        Allocation([first, second])
    }

    pub fn swapped(self) -> Self {
        Allocation([self.0[1], self.0[0]])
    }
}

impl fmt::Display for Allocation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{}", self.0[0], self.0[1])
    }
}

/// The four allocations reachable by the principal's mechanisms, in the
/// outcome order used by [`Environment::principal_worker`].
pub const PRINCIPAL_WORKER_OUTCOMES: [Allocation; 4] = [
    Allocation::new(Contract::LM, Contract::LM),
    Allocation::new(Contract::LP, Contract::HD),
    Allocation::new(Contract::HD, Contract::LP),
    Allocation::new(Contract::HM, Contract::HM),
];

/// Worker payoff table. `None` for contracts the mechanisms never assign.
pub fn contract_payoff(contract: Contract, own_type: WorkerType) -> Option<i64> {
    use WorkerType::*;
    let v = match (contract, own_type) {
        (Contract::HM, Expert) => 4,
        (Contract::HD, Expert) => 2,
        (Contract::LM, Expert) => 1,
        (Contract::LP, Expert) => 0,
        (Contract::LP, Beginner) => 4,
        (Contract::HM, Beginner) => 4,
        (Contract::LM, Beginner) => 2,
        (Contract::HD, Beginner) => 2,
        _ => return None,
    };
    Some(v)
}

/// High salary to experts, low to beginners; delicate task to the expert
/// when there is exactly one; equal split otherwise.
pub fn principal_scf(types: [WorkerType; 2]) -> Allocation {
    use WorkerType::*;
    match types {
        [Beginner, Beginner] => Allocation::new(Contract::LM, Contract::LM),
        [Expert, Expert] => Allocation::new(Contract::HM, Contract::HM),
        [Beginner, Expert] => Allocation::new(Contract::LP, Contract::HD),
        [Expert, Beginner] => Allocation::new(Contract::HD, Contract::LP),
    }
}

/// The outcome of everyone reporting expert: constant `(H,M),(H,M)`.
pub fn worker_optimal_scf(_types: [WorkerType; 2]) -> Allocation {
    principal_scf([WorkerType::Expert, WorkerType::Expert])
}

/// 5 if both types identified correctly, 3 if exactly one, 1 otherwise.
pub fn staffer_payoff(true_types: [WorkerType; 2], identified: [WorkerType; 2]) -> i64 {
    let hits = true_types.iter().zip(&identified).filter(|(a, b)| a == b).count();
    match hits {
        2 => 5,
        1 => 3,
        _ => 1,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Environment {
    agents: Vec<String>,
    type_spaces: Vec<Vec<String>>,
    outcomes: Vec<String>,
    /// `payoffs[agent][outcome][type]`
    payoffs: Vec<Vec<Vec<Payoff>>>,
}

impl Environment {
    pub fn new(
        agents: Vec<String>,
        type_spaces: Vec<Vec<String>>,
        outcomes: Vec<String>,
        payoffs: Vec<Vec<Vec<Payoff>>>,
    ) -> Result<Self> {
        if agents.is_empty() {
            return Err(domain("environment needs at least one agent"));
        }
        if type_spaces.len() != agents.len() {
            return Err(domain(format!(
                "{} type spaces given for {} agents",
                type_spaces.len(),
                agents.len()
            )));
        }
        if let Some(i) = type_spaces.iter().position(Vec::is_empty) {
            return Err(domain(format!("agent {} has an empty type space", agents[i])));
        }
        if outcomes.is_empty() {
            return Err(domain("outcome set is empty"));
        }
        if payoffs.len() != agents.len() {
            return Err(domain("payoff table must have one block per agent"));
        }
        for (i, block) in payoffs.iter().enumerate() {
            if block.len() != outcomes.len() {
                return Err(domain(format!(
                    "agent {}: payoff table has {} outcome rows, expected {}",
                    agents[i],
                    block.len(),
                    outcomes.len()
                )));
            }
            for (x, row) in block.iter().enumerate() {
                if row.len() != type_spaces[i].len() {
                    return Err(domain(format!(
                        "agent {}: outcome {} has {} type entries, expected {}",
                        agents[i],
                        outcomes[x],
                        row.len(),
                        type_spaces[i].len()
                    )));
                }
            }
        }
        Ok(Self { agents, type_spaces, outcomes, payoffs })
    }

    /// Two workers with types {B, E}; outcomes are [`PRINCIPAL_WORKER_OUTCOMES`].
    pub fn principal_worker() -> Self {
        let types: Vec<String> = WorkerType::ALL.iter().map(|t| t.code().to_string()).collect();
        let payoffs = (0..2)
            .map(|agent| {
                PRINCIPAL_WORKER_OUTCOMES
                    .iter()
                    .map(|alloc| {
                        WorkerType::ALL
                            .iter()
                            .map(|&t| {
                                Payoff::from_integer(
                                    contract_payoff(alloc.0[agent], t)
                                        .expect("principal-worker outcomes use tabulated contracts"),
                                )
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            agents: vec!["worker1".into(), "worker2".into()],
            type_spaces: vec![types.clone(), types],
            outcomes: PRINCIPAL_WORKER_OUTCOMES.iter().map(ToString::to_string).collect(),
            payoffs,
        }
    }

    pub fn agents(&self) -> &[String] {
        &self.agents
    }

    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn type_space(&self, agent: usize) -> &[String] {
        &self.type_spaces[agent]
    }

    pub fn type_counts(&self) -> Vec<usize> {
        self.type_spaces.iter().map(Vec::len).collect()
    }

    pub fn outcomes(&self) -> &[String] {
        &self.outcomes
    }

    pub fn n_outcomes(&self) -> usize {
        self.outcomes.len()
    }

    pub fn outcome_index(&self, label: &str) -> Option<usize> {
        self.outcomes.iter().position(|o| o == label)
    }

    pub fn payoff_table(&self) -> &[Vec<Vec<Payoff>>] {
        &self.payoffs
    }

    pub fn payoff(&self, agent: usize, outcome: usize, own_type: usize) -> Result<Payoff> {
        let block = self
            .payoffs
            .get(agent)
            .ok_or_else(|| domain(format!("unknown agent {agent}")))?;
        let row = block
            .get(outcome)
            .ok_or_else(|| domain(format!("unknown outcome {outcome}")))?;
        row.get(own_type)
            .copied()
            .ok_or_else(|| domain(format!("unknown type {own_type} for agent {agent}")))
    }

    /// Unchecked lookup for hot loops; indices must be valid.
    #[inline]
    pub(crate) fn payoff_at(&self, agent: usize, outcome: usize, own_type: usize) -> Payoff {
        self.payoffs[agent][outcome][own_type]
    }

    pub fn type_profile_space(&self) -> MixedRadix {
        MixedRadix::new(self.type_counts())
    }

    pub fn type_profiles(&self) -> Vec<Vec<usize>> {
        self.type_profile_space().iter().collect()
    }

    pub fn principal_worker_outcome_index(alloc: Allocation) -> Option<usize> {
        PRINCIPAL_WORKER_OUTCOMES.iter().position(|&a| a == alloc)
    }
}

/// Total map from type profiles (row-major, agent 0 most significant) to
/// outcome indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SocialChoiceFunction {
    space: MixedRadix,
    table: Vec<usize>,
}

impl SocialChoiceFunction {
    pub fn new(type_counts: Vec<usize>, table: Vec<usize>) -> Result<Self> {
        let space = MixedRadix::new(type_counts);
        if table.len() != space.len() {
            return Err(domain(format!(
                "scf table has {} entries, type space has {} profiles",
                table.len(),
                space.len()
            )));
        }
        Ok(Self { space, table })
    }

    pub fn from_fn(env: &Environment, mut f: impl FnMut(&[usize]) -> usize) -> Self {
        let space = env.type_profile_space();
        let table = space.iter().map(|p| f(&p)).collect();
        Self { space, table }
    }

    pub fn constant(env: &Environment, outcome: usize) -> Self {
        Self::from_fn(env, |_| outcome)
    }

    /// `principal_scf` on [`Environment::principal_worker`].
    pub fn principal() -> Self {
        Self::from_allocation_rule(principal_scf)
    }

    /// `worker_optimal_scf` on [`Environment::principal_worker`].
    pub fn worker_optimal() -> Self {
        Self::from_allocation_rule(worker_optimal_scf)
    }

    fn from_allocation_rule(rule: fn([WorkerType; 2]) -> Allocation) -> Self {
        let env = Environment::principal_worker();
        Self::from_fn(&env, |p| {
            let types = [
                WorkerType::from_index(p[0]).unwrap(),
                WorkerType::from_index(p[1]).unwrap(),
            ];
            Environment::principal_worker_outcome_index(rule(types)).unwrap()
        })
    }

    pub fn type_counts(&self) -> &[usize] {
        self.space.radices()
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn outcome(&self, types: &[usize]) -> Result<usize> {
        if !self.space.contains(types) {
            return Err(domain(format!("type profile {types:?} outside the scf domain")));
        }
        Ok(self.table[self.space.encode(types)])
    }

    pub fn validate_for(&self, env: &Environment) -> Result<()> {
        if self.space.radices() != env.type_counts().as_slice() {
            return Err(domain("scf domain does not match the environment's type space"));
        }
        if let Some(&bad) = self.table.iter().find(|&&x| x >= env.n_outcomes()) {
            return Err(domain(format!("scf maps to unknown outcome {bad}")));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use WorkerType::*;

    fn p(v: i64) -> Payoff {
        Payoff::from_integer(v)
    }

    fn outcome_of(a: Contract, b: Contract) -> usize {
        Environment::principal_worker_outcome_index(Allocation::new(a, b)).unwrap()
    }

    #[test]
    fn tabulated_payoffs() {
        let env = Environment::principal_worker();
        assert_eq!(env.payoff(0, outcome_of(Contract::HM, Contract::HM), Expert.index()).unwrap(), p(4));
        assert_eq!(env.payoff(0, outcome_of(Contract::LP, Contract::HD), Beginner.index()).unwrap(), p(4));
        assert_eq!(env.payoff(1, outcome_of(Contract::HD, Contract::LP), Expert.index()).unwrap(), p(0));
    }

    #[test]
    fn payoff_errors_on_unknown_indices() {
        let env = Environment::principal_worker();
        assert!(env.payoff(2, 0, 0).is_err());
        assert!(env.payoff(0, 4, 0).is_err());
        assert!(env.payoff(0, 0, 2).is_err());
    }

    #[test]
    fn expert_and_beginner_orderings() {
        let e = |c| contract_payoff(c, Expert).unwrap();
        let b = |c| contract_payoff(c, Beginner).unwrap();
        assert!(e(Contract::HM) > e(Contract::HD));
        assert!(e(Contract::HD) > e(Contract::LM));
        assert!(e(Contract::LM) > e(Contract::LP));
        assert_eq!(b(Contract::LP), b(Contract::HM));
        assert!(b(Contract::HM) > b(Contract::LM));
        assert_eq!(b(Contract::LM), b(Contract::HD));
    }

    #[test]
    fn unused_contracts_have_no_payoff() {
        let hp = Contract { salary: Salary::High, task: Task::Perfunctory };
        let ld = Contract { salary: Salary::Low, task: Task::Delicate };
        for t in WorkerType::ALL {
            assert_eq!(contract_payoff(hp, t), None);
            assert_eq!(contract_payoff(ld, t), None);
        }
    }

    #[test]
    fn principal_rule() {
        assert_eq!(principal_scf([Beginner, Expert]), Allocation::new(Contract::LP, Contract::HD));
        assert_eq!(principal_scf([Expert, Expert]), Allocation::new(Contract::HM, Contract::HM));
        assert_eq!(principal_scf([Beginner, Beginner]), Allocation::new(Contract::LM, Contract::LM));
        assert_eq!(principal_scf([Expert, Beginner]), principal_scf([Beginner, Expert]).swapped());
    }

    #[test]
    fn worker_optimal_is_constant() {
        let hm = Allocation::new(Contract::HM, Contract::HM);
        for a in WorkerType::ALL {
            for b in WorkerType::ALL {
                assert_eq!(worker_optimal_scf([a, b]), hm);
            }
        }
        assert_eq!(worker_optimal_scf([Expert, Expert]), principal_scf([Expert, Expert]));
    }

    #[test]
    fn staffer_payoffs() {
        assert_eq!(staffer_payoff([Beginner, Expert], [Beginner, Expert]), 5);
        assert_eq!(staffer_payoff([Beginner, Expert], [Expert, Expert]), 3);
        assert_eq!(staffer_payoff([Beginner, Beginner], [Expert, Expert]), 1);
    }

    #[test]
    fn builtin_outputs_avoid_unused_contracts() {
        for alloc in PRINCIPAL_WORKER_OUTCOMES {
            for c in alloc.0 {
                assert!(contract_payoff(c, Beginner).is_some());
            }
        }
    }

    #[test]
    fn scf_tables() {
        let f = SocialChoiceFunction::principal();
        let env = Environment::principal_worker();
        f.validate_for(&env).unwrap();
        assert_eq!(f.outcome(&[0, 1]).unwrap(), outcome_of(Contract::LP, Contract::HD));
        assert!(f.outcome(&[2, 0]).is_err());
        let g = SocialChoiceFunction::worker_optimal();
        assert!(g.table().iter().all(|&x| x == 3));
    }

    #[test]
    fn rejects_ragged_payoffs() {
        let r = Environment::new(
            vec!["a".into()],
            vec![vec!["t".into()]],
            vec!["x".into(), "y".into()],
            vec![vec![vec![p(1)]]],
        );
        assert!(r.is_err());
    }
}
