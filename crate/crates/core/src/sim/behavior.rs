//! Behavioral decision rules for simulated workers.

use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Environment, Payoff, WorkerType};
use crate::equilibrium::Game;
use crate::error::{domain, Result};
use crate::mechanism::Mechanism;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BehaviorRule {
    /// Always sends the truthful action.
    Truthteller,
    /// Always sends the worker-optimal action (claim expert).
    Coordinator,
    /// Maximizes expected payoff minus `cost` for an explicit lie; ties go
    /// to the truthful action.
    LieAverse {
        #[serde(with = "crate::rational")]
        cost: Payoff,
    },
    /// Lie-averse agent that also values coordinating on the worker-optimal
    /// action by `bonus`.
    CoordinatingLieAverse {
        #[serde(with = "crate::rational")]
        bonus: Payoff,
        #[serde(with = "crate::rational")]
        cost: Payoff,
    },
    /// `base` with probability `1 - epsilon`, otherwise a uniform draw from
    /// the other messages.
    Noisy { base: Box<BehaviorRule>, epsilon: f64 },
}

impl BehaviorRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            BehaviorRule::LieAverse { cost } | BehaviorRule::CoordinatingLieAverse { cost, .. }
                if *cost < Payoff::zero() =>
            {
                Err(domain("lying cost must be non-negative"))
            }
            BehaviorRule::CoordinatingLieAverse { bonus, .. } if *bonus < Payoff::zero() => {
                Err(domain("coordination bonus must be non-negative"))
            }
            BehaviorRule::Noisy { epsilon, .. } if !(0.0..=1.0).contains(epsilon) => {
                Err(domain(format!("noise probability {epsilon} outside [0, 1]")))
            }
            BehaviorRule::Noisy { base, .. } => base.validate(),
            _ => Ok(()),
        }
    }

    pub fn noisy(self, epsilon: f64) -> Self {
        if epsilon == 0.0 {
            self
        } else {
            BehaviorRule::Noisy { base: Box::new(self), epsilon }
        }
    }
}

/// `pecuniary - cost * [is_lie]` for lie-averse rules, `pecuniary` otherwise.
pub fn behavioral_utility(rule: &BehaviorRule, pecuniary: Payoff, is_lie: bool) -> Payoff {
    match rule {
        BehaviorRule::LieAverse { cost } | BehaviorRule::CoordinatingLieAverse { cost, .. } if is_lie => {
            pecuniary - cost
        }
        BehaviorRule::Noisy { base, .. } => behavioral_utility(base, pecuniary, is_lie),
        _ => pecuniary,
    }
}

/// Distribution over the opponent's messages.
pub type Belief = Vec<Payoff>;

/// Where a worker sits in a two-worker mechanism.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seat(pub usize);

fn message_for(mech: &Mechanism, seat: Seat, ty: WorkerType) -> Result<usize> {
    mech.canonical_message(seat.0, ty.index())
        .ok_or_else(|| domain(format!("{} has no message for {}", mech.name, ty.name())))
}

pub fn truthful_action(mech: &Mechanism, seat: Seat, own_type: WorkerType) -> Result<usize> {
    message_for(mech, seat, own_type)
}

/// Truthful for experts, deceptive for beginners.
pub fn worker_optimal_action(mech: &Mechanism, seat: Seat) -> Result<usize> {
    message_for(mech, seat, WorkerType::Expert)
}

/// Expected payoff of each own message against `belief`.
pub fn expected_pecuniary(
    env: &Environment,
    mech: &Mechanism,
    seat: Seat,
    own_type: WorkerType,
    belief: &[Payoff],
) -> Result<Vec<Payoff>> {
    let game = Game::new(env, mech)?;
    if mech.n_agents() != 2 {
        return Err(domain("behavior rules need a two-worker mechanism"));
    }
    let me = seat.0;
    if me > 1 {
        return Err(domain(format!("seat {me} outside a two-worker mechanism")));
    }
    let other = 1 - me;
    let n_other = mech.messages(other).len();
    if belief.len() != n_other {
        return Err(domain(format!("belief has {} entries, opponent has {n_other} messages", belief.len())));
    }
    if belief.iter().any(|p| *p < Payoff::zero()) || belief.iter().sum::<Payoff>() != Payoff::from_integer(1) {
        return Err(domain("belief must be a probability distribution"));
    }
    let env = game.env();
    (0..mech.messages(me).len())
        .map(|m| {
            let mut total = Payoff::zero();
            for (o, p) in belief.iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                let mut msgs = [0usize; 2];
                msgs[me] = m;
                msgs[other] = o;
                let x = mech.outcome(&msgs)?;
                total += *p * env.payoff(me, x, own_type.index())?;
            }
            Ok(total)
        })
        .collect()
}

/// Picks a message for a worker of `own_type` in `seat`.
pub fn choose_message(
    rule: &BehaviorRule,
    env: &Environment,
    mech: &Mechanism,
    seat: Seat,
    own_type: WorkerType,
    belief: &[Payoff],
    rng: &mut impl Rng,
) -> Result<usize> {
    match rule {
        BehaviorRule::Truthteller => truthful_action(mech, seat, own_type),
        BehaviorRule::Coordinator => worker_optimal_action(mech, seat),
        BehaviorRule::LieAverse { .. } | BehaviorRule::CoordinatingLieAverse { .. } => {
            let pecuniary = expected_pecuniary(env, mech, seat, own_type, belief)?;
            let truthful = truthful_action(mech, seat, own_type)?;
            let optimal = worker_optimal_action(mech, seat)?;
            let bonus = match rule {
                BehaviorRule::CoordinatingLieAverse { bonus, .. } => *bonus,
                _ => Payoff::zero(),
            };
            let mut scores = Vec::with_capacity(pecuniary.len());
            for (m, p) in pecuniary.into_iter().enumerate() {
                let lie = mech.message_is_lie(seat.0, own_type.index(), m)?;
                let extra = if m == optimal { bonus } else { Payoff::zero() };
                scores.push(behavioral_utility(rule, p, lie) + extra);
            }
            let best = scores.iter().max().copied().expect("non-empty message space");
            if scores[truthful] == best {
                Ok(truthful)
            } else {
                Ok(scores.iter().position(|s| *s == best).unwrap())
            }
        }
        BehaviorRule::Noisy { base, epsilon } => {
            let chosen = choose_message(base, env, mech, seat, own_type, belief, rng)?;
            let n = mech.messages(seat.0).len();
            if n > 1 && rng.gen_bool(*epsilon) {
                let k = rng.gen_range(0..n - 1);
                Ok(if k >= chosen { k + 1 } else { k })
            } else {
                Ok(chosen)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn int(v: i64) -> Payoff {
        Payoff::from_integer(v)
    }

    fn point(n: usize, at: usize) -> Belief {
        (0..n).map(|i| if i == at { int(1) } else { int(0) }).collect()
    }

    #[test]
    fn utilities() {
        let la = BehaviorRule::LieAverse { cost: int(3) };
        assert_eq!(behavioral_utility(&la, int(4), true), int(1));
        assert_eq!(behavioral_utility(&la, int(4), false), int(4));
        assert_eq!(behavioral_utility(&BehaviorRule::Truthteller, int(2), true), int(2));
        assert_eq!(behavioral_utility(&la.clone().noisy(0.1), int(4), true), int(1));
    }

    #[test]
    fn coordinator_beginner_sends_deceptive_action() {
        let env = Environment::principal_worker();
        let m = Mechanism::builtin("2x2-I").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let msg = choose_message(&BehaviorRule::Coordinator, &env, &m, Seat(0), WorkerType::Beginner, &point(2, 1), &mut rng)
            .unwrap();
        assert_eq!(m.messages(0)[msg].canonical, Some(WorkerType::Expert.index()));
    }

    #[test]
    fn costly_liar_stays_truthful_for_any_point_belief() {
        let env = Environment::principal_worker();
        let m = Mechanism::builtin("2x2-E").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rule = BehaviorRule::LieAverse { cost: int(5) };
        for at in 0..2 {
            let msg = choose_message(&rule, &env, &m, Seat(1), WorkerType::Beginner, &point(2, at), &mut rng).unwrap();
            assert_eq!(m.messages(1)[msg].id, "B");
        }
    }

    #[test]
    fn free_liar_breaks_pecuniary_ties_toward_truth() {
        // Beginners earn the same from B and E against either opponent
        // message in the direct mechanism, so only the tie rule decides.
        let env = Environment::principal_worker();
        let m = Mechanism::builtin("2x2-E").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let rule = BehaviorRule::LieAverse { cost: int(0) };
        let pec = expected_pecuniary(&env, &m, Seat(0), WorkerType::Beginner, &point(2, 1)).unwrap();
        assert_eq!(pec, vec![int(4), int(4)]);
        let msg = choose_message(&rule, &env, &m, Seat(0), WorkerType::Beginner, &point(2, 1), &mut rng).unwrap();
        assert_eq!(m.messages(0)[msg].id, "B");
    }

    #[test]
    fn coordination_bonus_against_lying_cost() {
        let env = Environment::principal_worker();
        let m = Mechanism::builtin("2x2-E").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let belief = point(2, 1);
        let keen = BehaviorRule::CoordinatingLieAverse { bonus: int(2), cost: int(1) };
        let shy = BehaviorRule::CoordinatingLieAverse { bonus: int(1), cost: int(2) };
        let pick = |r: &BehaviorRule, rng: &mut ChaCha8Rng| {
            let i = choose_message(r, &env, &m, Seat(0), WorkerType::Beginner, &belief, rng).unwrap();
            m.messages(0)[i].id.clone()
        };
        assert_eq!(pick(&keen, &mut rng), "E");
        assert_eq!(pick(&shy, &mut rng), "B");
        // No lie in the implicit form, so any positive bonus coordinates.
        let i2 = Mechanism::builtin("2x2-I").unwrap();
        let i = choose_message(&shy, &env, &i2, Seat(0), WorkerType::Beginner, &belief, &mut rng).unwrap();
        assert_eq!(i2.messages(0)[i].canonical, Some(1));
    }

    #[test]
    fn lie_averse_may_pick_unanswered_when_it_pays() {
        let env = Environment::principal_worker();
        let m = Mechanism::builtin("3x3-E").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // An expert facing an opponent who declines: E -> (H,D) = 2, U -> (L,M) = 1.
        let rule = BehaviorRule::LieAverse { cost: int(1) };
        let msg = choose_message(&rule, &env, &m, Seat(0), WorkerType::Expert, &point(3, 2), &mut rng).unwrap();
        assert_eq!(m.messages(0)[msg].id, "E");
    }

    #[test]
    fn noise_moves_to_other_messages_only() {
        let env = Environment::principal_worker();
        let m = Mechanism::builtin("3x3-I").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rule = BehaviorRule::Truthteller.noisy(1.0);
        for _ in 0..50 {
            let msg = choose_message(&rule, &env, &m, Seat(0), WorkerType::Beginner, &point(3, 1), &mut rng).unwrap();
            assert_ne!(m.messages(0)[msg].canonical, Some(0));
        }
    }

    #[test]
    fn invalid_beliefs_and_rules() {
        let env = Environment::principal_worker();
        let m = Mechanism::builtin("2x2-E").unwrap();
        assert!(expected_pecuniary(&env, &m, Seat(0), WorkerType::Beginner, &[int(1)]).is_err());
        assert!(expected_pecuniary(&env, &m, Seat(0), WorkerType::Beginner, &[int(1), int(1)]).is_err());
        assert!(BehaviorRule::LieAverse { cost: int(-1) }.validate().is_err());
        assert!(BehaviorRule::Truthteller.noisy(1.5).validate().is_err());
    }
}
