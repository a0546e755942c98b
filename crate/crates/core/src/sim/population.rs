//! Population samplers: mixtures of behavior rules with drawn parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::behavior::BehaviorRule;
use crate::env::Payoff;
use crate::error::{domain, Result};

/// Distribution of a non-negative rational parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dist", rename_all = "kebab-case")]
pub enum Draw {
    Fixed {
        #[serde(with = "crate::rational")]
        value: Payoff,
    },
    /// `high` with probability `p_high`, else `low`.
    TwoPoint {
        #[serde(with = "crate::rational")]
        low: Payoff,
        #[serde(with = "crate::rational")]
        high: Payoff,
        p_high: f64,
    },
    /// Uniform on the grid `low + k (high - low) / steps`, `k = 0..=steps`.
    Uniform {
        #[serde(with = "crate::rational")]
        low: Payoff,
        #[serde(with = "crate::rational")]
        high: Payoff,
        #[serde(default = "default_steps")]
        steps: u32,
    },
}

fn default_steps() -> u32 {
    100
}

impl Draw {
    pub fn fixed(v: i64) -> Self {
        Draw::Fixed { value: Payoff::from_integer(v) }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Payoff {
        match self {
            Draw::Fixed { value } => *value,
            Draw::TwoPoint { low, high, p_high } => {
                if rng.gen_bool(*p_high) {
                    *high
                } else {
                    *low
                }
            }
            Draw::Uniform { low, high, steps } => {
                let k = rng.gen_range(0..=*steps) as i64;
                *low + (*high - *low) * Payoff::new(k, (*steps).max(1) as i64)
            }
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Draw::TwoPoint { p_high, .. } if !(0.0..=1.0).contains(p_high) => {
                Err(domain(format!("probability {p_high} outside [0, 1]")))
            }
            Draw::Uniform { low, high, steps } if high < low || *steps == 0 => {
                Err(domain("uniform draw needs low <= high and at least one step"))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum RuleTemplate {
    Truthteller,
    Coordinator,
    LieAverse { cost: Draw },
    CoordinatingLieAverse { bonus: Draw, cost: Draw },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    #[serde(flatten)]
    pub rule: RuleTemplate,
    #[serde(default)]
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSpec {
    pub components: Vec<Component>,
}

impl PopulationSpec {
    pub fn uniform(rule: RuleTemplate) -> Self {
        Self { components: vec![Component { weight: 1.0, rule, epsilon: 0.0 }] }
    }

    pub fn truthtellers() -> Self {
        Self::uniform(RuleTemplate::Truthteller)
    }

    pub fn coordinators() -> Self {
        Self::uniform(RuleTemplate::Coordinator)
    }

    /// Mixture used for the sign-agreement experiments: some pure
    /// truthtellers and coordinators, a majority who would coordinate but
    /// mostly balk at an explicit lie, and plain lie-averse agents. Every
    /// rule trembles with probability 0.05.
    pub fn calibrated() -> Self {
        let eps = 0.05;
        let r = |n, d| Payoff::new(n, d);
        Self {
            components: vec![
                Component { weight: 0.10, rule: RuleTemplate::Truthteller, epsilon: eps },
                Component { weight: 0.10, rule: RuleTemplate::Coordinator, epsilon: eps },
                Component {
                    weight: 0.70,
                    rule: RuleTemplate::CoordinatingLieAverse {
                        bonus: Draw::Uniform { low: r(0, 1), high: r(1, 1), steps: 100 },
                        cost: Draw::TwoPoint { low: r(0, 1), high: r(4, 1), p_high: 0.85 },
                    },
                    epsilon: eps,
                },
                Component {
                    weight: 0.10,
                    rule: RuleTemplate::LieAverse { cost: Draw::Uniform { low: r(0, 1), high: r(3, 1), steps: 100 } },
                    epsilon: eps,
                },
            ],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(domain("population has no components"));
        }
        let mut total = 0.0;
        for c in &self.components {
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(domain("component weights must be finite and non-negative"));
            }
            if !(0.0..=1.0).contains(&c.epsilon) {
                return Err(domain(format!("noise probability {} outside [0, 1]", c.epsilon)));
            }
            match &c.rule {
                RuleTemplate::LieAverse { cost } => cost.validate()?,
                RuleTemplate::CoordinatingLieAverse { bonus, cost } => {
                    bonus.validate()?;
                    cost.validate()?;
                }
                _ => {}
            }
            total += c.weight;
        }
        if total <= 0.0 {
            return Err(domain("population weights sum to zero"));
        }
        Ok(())
    }

    fn pick(&self, rng: &mut impl Rng) -> &Component {
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        let mut u = rng.gen::<f64>() * total;
        for c in &self.components {
            if u < c.weight {
                return c;
            }
            u -= c.weight;
        }
        self.components.iter().rev().find(|c| c.weight > 0.0).expect("validated weights")
    }

    pub fn sample_rule(&self, rng: &mut impl Rng) -> BehaviorRule {
        let c = self.pick(rng);
        let base = match &c.rule {
            RuleTemplate::Truthteller => BehaviorRule::Truthteller,
            RuleTemplate::Coordinator => BehaviorRule::Coordinator,
            RuleTemplate::LieAverse { cost } => BehaviorRule::LieAverse { cost: cost.sample(rng) },
            RuleTemplate::CoordinatingLieAverse { bonus, cost } => {
                BehaviorRule::CoordinatingLieAverse { bonus: bonus.sample(rng), cost: cost.sample(rng) }
            }
        };
        base.noisy(c.epsilon)
    }

    pub fn sample(&self, n: usize, rng: &mut impl Rng) -> Vec<BehaviorRule> {
        (0..n).map(|_| self.sample_rule(rng)).collect()
    }
}
