//! Behavioral simulation of the experiment.

pub mod behavior;
pub mod dataset;
pub mod population;
pub mod session;

pub use behavior::{behavioral_utility, choose_message, BehaviorRule, Belief, Seat};
pub use population::{Component, Draw, PopulationSpec, RuleTemplate};
pub use session::{
    group_total, reference_grid, run_experiment, run_session, BeliefMode, DatasetMeta, ExperimentPlan, GridCell, PeriodRecord,
    RecordKey, SessionConfig, SessionDataset, StafferObs, WorkerObs,
};
