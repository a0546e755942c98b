//! Finite private-value mechanism design workbench.
//!
//! * [`env`]: the principal-worker environment, contracts, payoffs and
//!   social choice functions.
//! * [`mechanism`]: finite message spaces with outcome tables, including
//!   the four built-in experimental mechanisms.
//! * [`equilibrium`]: pure-strategy ex-post and dominant-strategy
//!   equilibria, strategy-proofness.
//! * [`prop1`]: the composition verifier for robust implementation of
//!   strategy-proof functions and its randomized suite.
//! * [`sim`]: behavioral agents and experiment simulation.
//! * [`analysis`]: outcome classification, summary rates, linear
//!   probability models with clustered errors, and rank tests.
//! * [`schema`]: TOML files for environments, mechanisms and simulation
//!   runs.

pub mod analysis;
pub mod env;
pub mod equilibrium;
pub mod error;
pub mod mechanism;
pub mod prop1;
pub mod rational;
pub mod schema;
pub mod sim;
pub mod space;

pub use env::{Environment, Payoff, SocialChoiceFunction, WorkerType};
pub use equilibrium::{is_strategy_proof, EquilibriumReport, Game, StrategyProfile};
pub use error::{Error, Result};
pub use mechanism::{BuiltinMechanism, Mechanism};
