//! Finite mechanisms `(M, phi)` with labeled messages.
//!
//! Each message carries a [`MessageLabel`] (what the subject is asked to say)
//! and an optional canonical type (which type report it corresponds to in the
//! explicit form). Lies are a property of labels: only a `ClaimType` message
//! can be a lie. Two mechanisms are label-isomorphic when they share the
//! outcome table and canonical message mapping.

use std::fmt::Write as _;

use crate::env::{Environment, SocialChoiceFunction, WorkerType};
use crate::error::{domain, Error, Result};
use crate::space::MixedRadix;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MessageLabel {
    /// Asserts the sender's type.
    ClaimType(usize),
    /// A neutral tag such as "Option A".
    Neutral(String),
    /// Declines to make a claim.
    Unanswered,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Message {
    pub id: String,
    pub display: String,
    pub label: MessageLabel,
    /// Type report this message stands for under the canonical bijection;
    /// `None` for non-claims.
    pub canonical: Option<usize>,
}

impl Message {
    pub fn claim(id: impl Into<String>, display: impl Into<String>, ty: usize) -> Self {
        Self {
            id: id.into(),
            display: display.into(),
            label: MessageLabel::ClaimType(ty),
            canonical: Some(ty),
        }
    }

    pub fn neutral(id: impl Into<String>, tag: impl Into<String>, canonical: Option<usize>) -> Self {
        let tag = tag.into();
        Self { id: id.into(), display: tag.clone(), label: MessageLabel::Neutral(tag), canonical }
    }

    pub fn unanswered(id: impl Into<String>, display: impl Into<String>) -> Self {
        Self { id: id.into(), display: display.into(), label: MessageLabel::Unanswered, canonical: None }
    }
}

/// How a staffer reads types off a message profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum InferenceRule {
    #[default]
    None,
    /// Canonical claims at face value; a lone non-claim is assigned the type
    /// opposite to the other worker's claim; two non-claims read as
    /// beginners. Two agents with two types only.
    CanonicalClaims,
}

/// The four experimental mechanisms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BuiltinMechanism {
    DirectImplicit,
    DirectExplicit,
    ExtendedImplicit,
    ExtendedExplicit,
}

impl BuiltinMechanism {
    pub const ALL: [BuiltinMechanism; 4] = [
        BuiltinMechanism::DirectImplicit,
        BuiltinMechanism::DirectExplicit,
        BuiltinMechanism::ExtendedImplicit,
        BuiltinMechanism::ExtendedExplicit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinMechanism::DirectImplicit => "2x2-I",
            BuiltinMechanism::DirectExplicit => "2x2-E",
            BuiltinMechanism::ExtendedImplicit => "3x3-I",
            BuiltinMechanism::ExtendedExplicit => "3x3-E",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name().eq_ignore_ascii_case(name))
    }

    pub fn is_explicit(self) -> bool {
        matches!(self, BuiltinMechanism::DirectExplicit | BuiltinMechanism::ExtendedExplicit)
    }

    pub fn is_extended(self) -> bool {
        matches!(self, BuiltinMechanism::ExtendedImplicit | BuiltinMechanism::ExtendedExplicit)
    }

    pub fn build(self) -> Mechanism {
        let env = Environment::principal_worker();
        let f = SocialChoiceFunction::principal();
        match self {
            BuiltinMechanism::DirectImplicit => {
                let mut m = Mechanism::build_direct(&env, &f, false);
                m.name = self.name().into();
                m
            }
            BuiltinMechanism::DirectExplicit => {
                let mut m = Mechanism::build_direct(&env, &f, true);
                m.name = self.name().into();
                m
            }
            BuiltinMechanism::ExtendedImplicit => Mechanism::extended(false),
            BuiltinMechanism::ExtendedExplicit => Mechanism::extended(true),
        }
        .with_inference(InferenceRule::CanonicalClaims)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mechanism {
    pub name: String,
    message_spaces: Vec<Vec<Message>>,
    outcome_labels: Vec<String>,
    /// Row-major over message profiles, agent 0 most significant.
    table: Vec<usize>,
    inference: InferenceRule,
}

fn option_tag(i: usize) -> String {
    let letter = (b'A' + (i % 26) as u8) as char;
    if i < 26 {
        letter.to_string()
    } else {
        format!("{letter}{}", i / 26)
    }
}

impl Mechanism {
    pub fn new(
        name: impl Into<String>,
        message_spaces: Vec<Vec<Message>>,
        outcome_labels: Vec<String>,
        table: Vec<usize>,
        inference: InferenceRule,
    ) -> Result<Self> {
        let name = name.into();
        if message_spaces.is_empty() {
            return Err(domain("mechanism needs at least one agent"));
        }
        for (i, space) in message_spaces.iter().enumerate() {
            if space.is_empty() {
                return Err(domain(format!("agent {i} has no messages")));
            }
            for (a, m) in space.iter().enumerate() {
                if space[..a].iter().any(|o| o.id == m.id) {
                    return Err(domain(format!("agent {i}: duplicate message id {}", m.id)));
                }
                if space[..a].iter().any(|o| o.label == m.label) {
                    return Err(domain(format!("agent {i}: duplicate label on message {}", m.id)));
                }
                match m.label {
                    MessageLabel::ClaimType(t) if m.canonical != Some(t) => {
                        return Err(domain(format!(
                            "agent {i}: claim message {} must be canonical for the type it claims",
                            m.id
                        )))
                    }
                    MessageLabel::Unanswered if m.canonical.is_some() => {
                        return Err(domain(format!(
                            "agent {i}: unanswered message {} cannot stand for a type",
                            m.id
                        )))
                    }
                    _ => {}
                }
            }
        }
        let space = MixedRadix::new(message_spaces.iter().map(Vec::len).collect());
        if table.len() != space.len() {
            return Err(domain(format!(
                "outcome table has {} cells, message space has {} profiles",
                table.len(),
                space.len()
            )));
        }
        if let Some(&bad) = table.iter().find(|&&x| x >= outcome_labels.len()) {
            return Err(domain(format!("outcome table refers to unknown outcome {bad}")));
        }
        Ok(Self { name, message_spaces, outcome_labels, table, inference })
    }

    pub fn with_inference(mut self, rule: InferenceRule) -> Self {
        self.inference = rule;
        self
    }

    /// Direct mechanism: `M_i = Theta_i` and `phi = f`.
    pub fn build_direct(env: &Environment, f: &SocialChoiceFunction, explicit: bool) -> Self {
        let message_spaces = (0..env.n_agents())
            .map(|agent| {
                env.type_space(agent)
                    .iter()
                    .enumerate()
                    .map(|(t, label)| {
                        if explicit {
                            let display = WorkerType::from_code(label)
                                .filter(|_| env.type_space(agent).len() == 2)
                                .map(|w| w.name().to_string())
                                .unwrap_or_else(|| label.clone());
                            Message::claim(label.clone(), display, t)
                        } else {
                            let tag = option_tag(t);
                            Message::neutral(tag.clone(), format!("Option {tag}"), Some(t))
                        }
                    })
                    .collect()
            })
            .collect();
        let name = if explicit { "direct-E" } else { "direct-I" };
        Self {
            name: name.into(),
            message_spaces,
            outcome_labels: env.outcomes().to_vec(),
            table: f.table().to_vec(),
            inference: InferenceRule::None,
        }
    }

    /// The 3x3 mechanism: claims plus a non-answer, outcome by the
    /// principal's rule applied to the inferred types.
    fn extended(explicit: bool) -> Self {
        let messages: Vec<Message> = if explicit {
            vec![
                Message::claim("B", "Beginner", 0),
                Message::claim("E", "Expert", 1),
                Message::unanswered("U", "Decline to State"),
            ]
        } else {
            vec![
                Message::neutral("A", "Option A", Some(0)),
                Message::neutral("B", "Option B", Some(1)),
                Message::neutral("C", "Option C", None),
            ]
        };
        let f = SocialChoiceFunction::principal();
        let space = MixedRadix::new(vec![3, 3]);
        let table = space
            .iter()
            .map(|p| {
                let claims = [messages[p[0]].canonical, messages[p[1]].canonical];
                let types = canonical_inference(claims);
                f.outcome(&[types[0].index(), types[1].index()]).unwrap()
            })
            .collect();
        let name = if explicit { "3x3-E" } else { "3x3-I" };
        Self {
            name: name.into(),
            message_spaces: vec![messages.clone(), messages],
            outcome_labels: Environment::principal_worker().outcomes().to_vec(),
            table,
            inference: InferenceRule::CanonicalClaims,
        }
    }

    /// One of `2x2-I`, `2x2-E`, `3x3-I`, `3x3-E`.
    pub fn builtin(name: &str) -> Result<Self> {
        BuiltinMechanism::from_name(name)
            .map(BuiltinMechanism::build)
            .ok_or_else(|| domain(format!("unknown mechanism {name:?}; expected 2x2-I, 2x2-E, 3x3-I or 3x3-E")))
    }

    pub fn n_agents(&self) -> usize {
        self.message_spaces.len()
    }

    pub fn messages(&self, agent: usize) -> &[Message] {
        &self.message_spaces[agent]
    }

    pub fn message_counts(&self) -> Vec<usize> {
        self.message_spaces.iter().map(Vec::len).collect()
    }

    pub fn message_profile_space(&self) -> MixedRadix {
        MixedRadix::new(self.message_counts())
    }

    pub fn outcome_labels(&self) -> &[String] {
        &self.outcome_labels
    }

    pub fn table(&self) -> &[usize] {
        &self.table
    }

    pub fn inference(&self) -> InferenceRule {
        self.inference
    }

    pub fn message_index(&self, agent: usize, id: &str) -> Option<usize> {
        self.message_spaces.get(agent)?.iter().position(|m| m.id == id)
    }

    /// First message standing for `ty` under the canonical mapping.
    pub fn canonical_message(&self, agent: usize, ty: usize) -> Option<usize> {
        self.message_spaces.get(agent)?.iter().position(|m| m.canonical == Some(ty))
    }

    pub fn outcome(&self, msgs: &[usize]) -> Result<usize> {
        let space = self.message_profile_space();
        if !space.contains(msgs) {
            return Err(domain(format!("invalid message profile {msgs:?} for {}", self.name)));
        }
        Ok(self.table[space.encode(msgs)])
    }

    pub fn outcome_by_ids(&self, ids: &[&str]) -> Result<usize> {
        let msgs = self.resolve_ids(ids)?;
        self.outcome(&msgs)
    }

    pub fn resolve_ids(&self, ids: &[&str]) -> Result<Vec<usize>> {
        if ids.len() != self.n_agents() {
            return Err(domain(format!("{} messages for {} agents", ids.len(), self.n_agents())));
        }
        ids.iter()
            .enumerate()
            .map(|(agent, id)| {
                self.message_index(agent, id)
                    .ok_or_else(|| domain(format!("agent {agent} has no message {id:?}")))
            })
            .collect()
    }

    pub fn message_is_lie(&self, agent: usize, own_type: usize, msg: usize) -> Result<bool> {
        let m = self
            .message_spaces
            .get(agent)
            .and_then(|s| s.get(msg))
            .ok_or_else(|| domain(format!("agent {agent} has no message {msg}")))?;
        Ok(matches!(m.label, MessageLabel::ClaimType(t) if t != own_type))
    }

    pub fn inferred_types(&self, msgs: &[usize]) -> Result<Vec<usize>> {
        if !self.message_profile_space().contains(msgs) {
            return Err(domain(format!("invalid message profile {msgs:?} for {}", self.name)));
        }
        match self.inference {
            InferenceRule::None => Err(Error::Unsupported(format!(
                "mechanism {} has no type-inference rule",
                self.name
            ))),
            InferenceRule::CanonicalClaims => {
                if self.n_agents() != 2 {
                    return Err(Error::Unsupported("canonical inference needs exactly two agents".into()));
                }
                let claims = [
                    self.message_spaces[0][msgs[0]].canonical,
                    self.message_spaces[1][msgs[1]].canonical,
                ];
                if claims.iter().flatten().any(|&t| t > 1) {
                    return Err(Error::Unsupported("canonical inference needs binary types".into()));
                }
                Ok(canonical_inference(claims).iter().map(|t| t.index()).collect())
            }
        }
    }

    /// Outcome labels must line up with the environment's outcome set.
    pub fn check_compatible(&self, env: &Environment) -> Result<()> {
        if self.n_agents() != env.n_agents() {
            return Err(domain(format!(
                "mechanism {} has {} agents, environment has {}",
                self.name,
                self.n_agents(),
                env.n_agents()
            )));
        }
        if self.outcome_labels.len() != env.n_outcomes() {
            return Err(domain(format!(
                "mechanism {} uses {} outcomes, environment has {}",
                self.name,
                self.outcome_labels.len(),
                env.n_outcomes()
            )));
        }
        Ok(())
    }

    /// Aligned text matrix: worker 1 on rows, worker 2 on columns.
    pub fn render(&self) -> Result<String> {
        if self.n_agents() != 2 {
            return Err(Error::Unsupported(format!(
                "matrix rendering needs two agents, {} has {}",
                self.name,
                self.n_agents()
            )));
        }
        let rows = &self.message_spaces[0];
        let cols = &self.message_spaces[1];
        let corner = "Worker 1 reports";
        let first_w = rows.iter().map(|m| m.display.len()).chain([corner.len()]).max().unwrap();
        let cell = |r: usize, c: usize| self.outcome_labels[self.table[r * cols.len() + c]].clone();
        let col_w: Vec<usize> = (0..cols.len())
            .map(|c| {
                (0..rows.len())
                    .map(|r| cell(r, c).len())
                    .chain([cols[c].display.len()])
                    .max()
                    .unwrap()
            })
            .collect();

        let mut out = String::new();
        writeln!(out, "{}", self.name).unwrap();
        writeln!(out, "{:first_w$} | Worker 2 reports", "").unwrap();
        let mut header = format!("{corner:first_w$}");
        for (c, m) in cols.iter().enumerate() {
            write!(header, " | {:w$}", m.display, w = col_w[c]).unwrap();
        }
        writeln!(out, "{}", header.trim_end()).unwrap();
        let mut rule = "-".repeat(first_w);
        for w in &col_w {
            rule.push_str("-+-");
            rule.push_str(&"-".repeat(*w));
        }
        writeln!(out, "{rule}").unwrap();
        for (r, m) in rows.iter().enumerate() {
            let mut line = format!("{:first_w$}", m.display);
            for (c, w) in col_w.iter().enumerate() {
                write!(line, " | {:w$}", cell(r, c), w = *w).unwrap();
            }
            writeln!(out, "{}", line.trim_end()).unwrap();
        }
        Ok(out)
    }
}

/// Face-value claims; one non-claim gets the opposite of the other claim;
/// two non-claims are read as beginners.
fn canonical_inference(claims: [Option<usize>; 2]) -> [WorkerType; 2] {
    let ty = |i: usize| WorkerType::from_index(i).unwrap_or(WorkerType::Expert);
    match claims {
        [Some(a), Some(b)] => [ty(a), ty(b)],
        [None, Some(b)] => [ty(b).opposite(), ty(b)],
        [Some(a), None] => [ty(a), ty(a).opposite()],
        [None, None] => [WorkerType::Beginner, WorkerType::Beginner],
    }
}
