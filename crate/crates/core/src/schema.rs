//! TOML file formats for environments, mechanisms and simulation runs.
//! See `docs/schema.md` for the documented layout.

use serde::{Deserialize, Serialize};

use crate::env::{Environment, Payoff, SocialChoiceFunction};
use crate::error::{domain, Error, Result};
use crate::mechanism::{InferenceRule, Mechanism, Message, MessageLabel};
use crate::sim::session::{reference_grid, BeliefMode, ExperimentPlan, GridCell};
use crate::sim::PopulationSpec;

/// Converts a TOML error into a parse error with 1-based line and column.
fn toml_error(text: &str, err: &toml::de::Error) -> Error {
    let message = err.message().to_string();
    match err.span() {
        Some(span) => {
            let before = &text[..span.start.min(text.len())];
            let line = before.matches('\n').count() + 1;
            let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Error::Parse(format!("line {line}, column {column}: {message}"))
        }
        None => Error::Parse(message),
    }
}

fn parse_toml<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| toml_error(text, &e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Rational(#[serde(with = "crate::rational")] pub Payoff);

/// Environment with an optional social choice function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentFile {
    pub agents: Vec<String>,
    /// Type labels per agent.
    pub types: Vec<Vec<String>>,
    pub outcomes: Vec<String>,
    /// `payoffs[agent][outcome][type]`.
    pub payoffs: Vec<Vec<Vec<Rational>>>,
    /// Outcome label for every type profile in row-major order (agent 1's
    /// type varies slowest).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scf: Option<Vec<String>>,
}

impl EnvironmentFile {
    pub fn from_environment(env: &Environment, scf: Option<&SocialChoiceFunction>) -> Self {
        Self {
            agents: env.agents().to_vec(),
            types: (0..env.n_agents()).map(|i| env.type_space(i).to_vec()).collect(),
            outcomes: env.outcomes().to_vec(),
            payoffs: env
                .payoff_table()
                .iter()
                .map(|a| a.iter().map(|o| o.iter().map(|p| Rational(*p)).collect()).collect())
                .collect(),
            scf: scf.map(|f| f.table().iter().map(|&x| env.outcomes()[x].clone()).collect()),
        }
    }

    pub fn build(&self) -> Result<(Environment, Option<SocialChoiceFunction>)> {
        let payoffs = self
            .payoffs
            .iter()
            .map(|a| a.iter().map(|o| o.iter().map(|p| p.0).collect()).collect())
            .collect();
        let env = Environment::new(self.agents.clone(), self.types.clone(), self.outcomes.clone(), payoffs)?;
        let scf = match &self.scf {
            None => None,
            Some(labels) => {
                let table = labels
                    .iter()
                    .map(|l| env.outcome_index(l).ok_or_else(|| domain(format!("scf names unknown outcome {l:?}"))))
                    .collect::<Result<Vec<_>>>()?;
                let f = SocialChoiceFunction::new(env.type_counts(), table)?;
                f.validate_for(&env)?;
                Some(f)
            }
        };
        Ok((env, scf))
    }
}

pub fn parse_environment(text: &str) -> Result<(Environment, Option<SocialChoiceFunction>)> {
    parse_toml::<EnvironmentFile>(text)?.build()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InferenceName {
    #[default]
    None,
    CanonicalClaims,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MessageKind {
    Claim,
    Neutral,
    Unanswered,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MessageSpec {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display: Option<String>,
    pub kind: MessageKind,
    /// Claimed type index, required for `claim` messages.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claims: Option<usize>,
    /// Type report a `neutral` message stands for, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub canonical: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentMessages {
    pub messages: Vec<MessageSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismFile {
    pub name: String,
    pub outcomes: Vec<String>,
    #[serde(default)]
    pub inference: InferenceName,
    pub agents: Vec<AgentMessages>,
    /// Outcome label for every message profile in row-major order.
    pub table: Vec<String>,
    /// Environment the mechanism is played in; the principal-worker
    /// environment when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub environment: Option<EnvironmentFile>,
}

impl MechanismFile {
    pub fn from_mechanism(mech: &Mechanism) -> Self {
        let agents = (0..mech.n_agents())
            .map(|i| AgentMessages {
                messages: mech
                    .messages(i)
                    .iter()
                    .map(|m| {
                        let (kind, claims, canonical) = match &m.label {
                            MessageLabel::ClaimType(t) => (MessageKind::Claim, Some(*t), None),
                            MessageLabel::Neutral(_) => (MessageKind::Neutral, None, m.canonical),
                            MessageLabel::Unanswered => (MessageKind::Unanswered, None, None),
                        };
                        MessageSpec { id: m.id.clone(), display: Some(m.display.clone()), kind, claims, canonical }
                    })
                    .collect(),
            })
            .collect();
        Self {
            name: mech.name.clone(),
            outcomes: mech.outcome_labels().to_vec(),
            inference: match mech.inference() {
                InferenceRule::None => InferenceName::None,
                InferenceRule::CanonicalClaims => InferenceName::CanonicalClaims,
            },
            agents,
            table: mech.table().iter().map(|&x| mech.outcome_labels()[x].clone()).collect(),
            environment: None,
        }
    }

    pub fn build(&self) -> Result<(Mechanism, Environment)> {
        let spaces = self
            .agents
            .iter()
            .enumerate()
            .map(|(i, a)| {
                a.messages
                    .iter()
                    .map(|m| {
                        let display = m.display.clone().unwrap_or_else(|| m.id.clone());
                        match m.kind {
                            MessageKind::Claim => {
                                let t = m.claims.ok_or_else(|| {
                                    domain(format!("agent {}: claim message {} lacks `claims`", i + 1, m.id))
                                })?;
                                Ok(Message::claim(m.id.clone(), display, t))
                            }
                            MessageKind::Neutral => Ok(Message::neutral(m.id.clone(), display, m.canonical)),
                            MessageKind::Unanswered => Ok(Message::unanswered(m.id.clone(), display)),
                        }
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let table = self
            .table
            .iter()
            .map(|l| {
                self.outcomes
                    .iter()
                    .position(|o| o == l)
                    .ok_or_else(|| domain(format!("table names unknown outcome {l:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let inference = match self.inference {
            InferenceName::None => InferenceRule::None,
            InferenceName::CanonicalClaims => InferenceRule::CanonicalClaims,
        };
        let mech = Mechanism::new(self.name.clone(), spaces, self.outcomes.clone(), table, inference)?;
        let env = match &self.environment {
            Some(e) => e.build()?.0,
            None => Environment::principal_worker(),
        };
        if env.outcomes() != self.outcomes.as_slice() {
            return Err(domain("mechanism outcomes must match the environment's outcome list"));
        }
        mech.check_compatible(&env)?;
        Ok((mech, env))
    }
}

pub fn parse_mechanism(text: &str) -> Result<(Mechanism, Environment)> {
    parse_toml::<MechanismFile>(text)?.build()
}

pub fn mechanism_to_toml(mech: &Mechanism) -> String {
    toml::to_string(&MechanismFile::from_mechanism(mech)).expect("mechanism file serializes")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct PopulationSection {
    /// `calibrated`, `truthtellers` or `coordinators`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<crate::sim::Component>,
}

impl PopulationSection {
    pub fn build(&self) -> Result<PopulationSpec> {
        match (&self.preset, self.components.is_empty()) {
            (Some(_), false) => Err(domain("population: give either `preset` or `components`, not both")),
            (Some(p), true) => match p.as_str() {
                "calibrated" => Ok(PopulationSpec::calibrated()),
                "truthtellers" => Ok(PopulationSpec::truthtellers()),
                "coordinators" => Ok(PopulationSpec::coordinators()),
                other => Err(domain(format!("unknown population preset {other:?}"))),
            },
            (None, false) => {
                let spec = PopulationSpec { components: self.components.clone() };
                spec.validate()?;
                Ok(spec)
            }
            (None, true) => Ok(PopulationSpec::calibrated()),
        }
    }
}

/// Simulation run description for `mechlab simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulationFile {
    /// Master seed; the command-line seed takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `reference` for the fourteen-session layout; ignored when `sessions`
    /// is given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sessions: Vec<GridCell>,
    #[serde(default)]
    pub population: PopulationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief: Option<BeliefMode>,
}

impl SimulationFile {
    /// Resolves the file into a plan; `seed` overrides the file's seed and
    /// the default seed is 0.
    pub fn plan(&self, seed: Option<u64>) -> Result<ExperimentPlan> {
        let grid = if !self.sessions.is_empty() {
            self.sessions.clone()
        } else {
            match self.preset.as_deref() {
                Some("reference") | None => reference_grid(),
                Some(other) => return Err(domain(format!("unknown session preset {other:?}"))),
            }
        };
        for cell in &grid {
            if crate::mechanism::BuiltinMechanism::from_name(&cell.mechanism).is_none() {
                return Err(domain(format!("unknown mechanism {:?}", cell.mechanism)));
            }
            if let Some(&bad) = cell.session_sizes.iter().find(|&&s| s == 0 || s % 3 != 0) {
                return Err(domain(format!(
                    "{}: n_subjects={bad} is not a positive multiple of 3",
                    cell.mechanism
                )));
            }
        }
        let calibrated = ExperimentPlan::calibrated(0);
        Ok(ExperimentPlan {
            grid,
            population: self.population.build()?,
            belief: self.belief.clone().unwrap_or(calibrated.belief),
            master_seed: seed.or(self.seed).unwrap_or(0),
        })
    }
}

pub fn parse_simulation(text: &str) -> Result<SimulationFile> {
    parse_toml(text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mechanism::BuiltinMechanism;

    #[test]
    fn builtin_mechanisms_round_trip() {
        for m in [
            BuiltinMechanism::DirectImplicit,
            BuiltinMechanism::DirectExplicit,
            BuiltinMechanism::ExtendedImplicit,
            BuiltinMechanism::ExtendedExplicit,
        ] {
            let mech = m.build();
            let text = mechanism_to_toml(&mech);
            let (back, env) = parse_mechanism(&text).unwrap();
            assert_eq!(back.render().unwrap(), mech.render().unwrap());
            assert_eq!(back.table(), mech.table());
            assert_eq!(env, Environment::principal_worker());
            for agent in 0..2 {
                for (a, b) in back.messages(agent).iter().zip(mech.messages(agent)) {
                    assert_eq!(a.canonical, b.canonical);
                    assert_eq!(a.display, b.display);
                }
            }
        }
    }

    #[test]
    fn environment_round_trip() {
        let env = Environment::principal_worker();
        let f = SocialChoiceFunction::principal();
        let text = toml::to_string(&EnvironmentFile::from_environment(&env, Some(&f))).unwrap();
        let (back, scf) = parse_environment(&text).unwrap();
        assert_eq!(back, env);
        assert_eq!(scf.unwrap(), f);
    }

    #[test]
    fn parse_errors_carry_line_and_column() {
        let err = parse_mechanism("name = \"x\"\noutcomes = [1, \n").unwrap_err().to_string();
        assert!(err.contains("line"), "{err}");
        let err = parse_mechanism("name = \"x\"\nbogus = 3\n").unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn table_must_use_known_outcomes() {
        let mut file = MechanismFile::from_mechanism(&BuiltinMechanism::DirectExplicit.build());
        file.table[0] = "nowhere".into();
        assert!(file.build().is_err());
    }

    #[test]
    fn simulation_file_defaults_and_validation() {
        let plan = parse_simulation("").unwrap().plan(Some(5)).unwrap();
        assert_eq!(plan, ExperimentPlan::calibrated(5));
        let text = r#"
            seed = 9
            [[sessions]]
            mechanism = "2x2-I"
            session_sizes = [10]
        "#;
        let err = parse_simulation(text).unwrap().plan(None).unwrap_err().to_string();
        assert!(err.contains("n_subjects=10"), "{err}");
        let text = r#"
            seed = 9
            [population]
            preset = "truthtellers"
            [belief]
            mode = "empirical"
            noise = "1/20"
            prior_weight = 4
        "#;
        let plan = parse_simulation(text).unwrap().plan(None).unwrap();
        assert_eq!(plan.master_seed, 9);
        assert_eq!(plan.population, PopulationSpec::truthtellers());
        assert_eq!(plan.belief, BeliefMode::Empirical { noise: Payoff::new(1, 20), prior_weight: 4 });
    }
}
