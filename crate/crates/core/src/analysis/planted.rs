//! Synthetic group-level data with known mechanism effects on the
//! incidence of the worker-optimal equilibrium.

use rand::{Rng, SeedableRng};
use rayon::prelude::*;
use rand_chacha::ChaCha8Rng;

use super::models::{fit_lpm, Model, RegressionSpec};
use crate::env::{Environment, WorkerType};
use crate::error::{domain, Result};
use crate::mechanism::BuiltinMechanism;
use crate::sim::session::{derive_seed, reference_grid, GridCell, RecordKey};
use crate::sim::{PeriodRecord, SessionDataset};

/// Outside two-expert groups (always (E,E), hence censored), both workers
/// claim expert with probability
/// `constant + effect[mechanism] + mixed_effect * [one expert] + shock[session]`
/// and report truthfully otherwise. Session shocks are uniform on
/// `[-session_shock, session_shock]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedDesign {
    pub constant: f64,
    /// Effects relative to 2x2-I, in the order 2x2-E, 3x3-I, 3x3-E.
    pub effects: [f64; 3],
    pub mixed_effect: f64,
    pub session_shock: f64,
    pub grid: Vec<GridCell>,
    pub n_periods: u32,
    pub n_practice: u32,
}

impl Default for PlantedDesign {
    fn default() -> Self {
        Self {
            constant: 0.586,
            effects: [-0.390, -0.109, -0.383],
            mixed_effect: 0.177,
            session_shock: 0.05,
            grid: reference_grid(),
            n_periods: 13,
            n_practice: 3,
        }
    }
}

impl PlantedDesign {
    pub const EFFECT_NAMES: [&'static str; 3] = ["2x2-E", "3x3-I", "3x3-E"];

    fn effect(&self, m: BuiltinMechanism) -> f64 {
        match m {
            BuiltinMechanism::DirectImplicit => 0.0,
            BuiltinMechanism::DirectExplicit => self.effects[0],
            BuiltinMechanism::ExtendedImplicit => self.effects[1],
            BuiltinMechanism::ExtendedExplicit => self.effects[2],
        }
    }

    fn validate(&self) -> Result<()> {
        for m in [
            BuiltinMechanism::DirectImplicit,
            BuiltinMechanism::DirectExplicit,
            BuiltinMechanism::ExtendedImplicit,
            BuiltinMechanism::ExtendedExplicit,
        ] {
            for mixed in [0.0, self.mixed_effect] {
                for s in [-self.session_shock, self.session_shock] {
                    let p = self.constant + self.effect(m) + mixed + s;
                    if !(0.0..=1.0).contains(&p) {
                        return Err(domain(format!("planted probability {p} for {} leaves [0, 1]", m.name())));
                    }
                }
            }
        }
        if self.n_practice >= self.n_periods {
            return Err(domain("practice periods must leave at least one period"));
        }
        Ok(())
    }
}

pub fn planted_dataset(design: &PlantedDesign, seed: u64) -> Result<SessionDataset> {
    design.validate()?;
    let env = Environment::principal_worker();
    let mut records = Vec::new();
    let mut session = 0;
    for cell in &design.grid {
        let builtin = BuiltinMechanism::from_name(&cell.mechanism)
            .ok_or_else(|| domain(format!("unknown mechanism {:?}", cell.mechanism)))?;
        let mech = builtin.build();
        let claim = |seat: usize, t: WorkerType| mech.canonical_message(seat, t.index()).expect("builtin claims");
        for &size in &cell.session_sizes {
            session += 1;
            if size == 0 || size % 3 != 0 {
                return Err(domain(format!("session size {size} is not a positive multiple of 3")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, session, 2));
            let shock = rng.gen_range(-design.session_shock..=design.session_shock);
            for period in 1..=design.n_periods {
                for group in 0..size / 3 {
                    let types = [0, 1].map(|_| if rng.gen_bool(0.5) { WorkerType::Expert } else { WorkerType::Beginner });
                    let n_experts = types.iter().filter(|t| **t == WorkerType::Expert).count();
                    let coordinate = n_experts == 2 || {
                        let mixed = if n_experts == 1 { design.mixed_effect } else { 0.0 };
                        let p = design.constant + design.effect(builtin) + mixed + shock;
                        rng.gen_bool(p.clamp(0.0, 1.0))
                    };
                    let msgs = if coordinate {
                        [claim(0, WorkerType::Expert), claim(1, WorkerType::Expert)]
                    } else {
                        [claim(0, types[0]), claim(1, types[1])]
                    };
                    let base = 3 * group;
                    records.push(PeriodRecord::evaluate(
                        &env,
                        &mech,
                        builtin,
                        RecordKey { session, period, group: group + 1 },
                        [base + 1, base + 2, base + 3],
                        types,
                        msgs,
                        period <= design.n_practice,
                        false,
                    )?);
                }
            }
        }
    }
    Ok(SessionDataset { records, meta: Default::default() })
}

/// Estimated mechanism effects on worker-optimal incidence, in the order
/// of [`PlantedDesign::EFFECT_NAMES`].
pub fn estimate_effects(ds: &SessionDataset) -> Result<[f64; 3]> {
    let fit = fit_lpm(ds, &RegressionSpec::standard(Model::EqWorkerOptimal))?;
    let mut out = [0.0; 3];
    for (slot, name) in out.iter_mut().zip(PlantedDesign::EFFECT_NAMES) {
        *slot = fit.coef_of(name).ok_or_else(|| domain(format!("no {name} coefficient in the fit")))?;
    }
    Ok(out)
}

/// Joint Monte Carlo band around the plants: per-coefficient standard
/// deviations of the estimates and the `level` quantile of the largest
/// standardized deviation across the three coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloBand {
    pub plants: [f64; 3],
    pub sd: [f64; 3],
    pub critical: f64,
    pub replications: usize,
}

impl MonteCarloBand {
    /// Largest `|estimate - plant| / sd` over the coefficients.
    pub fn statistic(&self, estimates: &[f64; 3]) -> f64 {
        (0..3).map(|k| (estimates[k] - self.plants[k]).abs() / self.sd[k]).fold(0.0, f64::max)
    }

    pub fn contains(&self, estimates: &[f64; 3]) -> bool {
        self.statistic(estimates) <= self.critical
    }

    /// Half-widths of the band per coefficient.
    pub fn half_widths(&self) -> [f64; 3] {
        self.sd.map(|s| s * self.critical)
    }
}

/// Simulates `replications` planted datasets with seeds derived from
/// `seed` (in parallel; the result does not depend on thread count).
pub fn monte_carlo_band(design: &PlantedDesign, replications: usize, seed: u64, level: f64) -> Result<MonteCarloBand> {
    if replications < 10 {
        return Err(domain("the Monte Carlo band needs at least 10 replications"));
    }
    if !(0.0 < level && level < 1.0) {
        return Err(domain("band level must lie in (0, 1)"));
    }
    let estimates: Vec<[f64; 3]> = (0..replications)
        .into_par_iter()
        .map(|r| planted_dataset(design, derive_seed(seed, r, 3)).and_then(|ds| estimate_effects(&ds)))
        .collect::<Result<_>>()?;
    let n = replications as f64;
    let mut sd = [0.0; 3];
    for (k, slot) in sd.iter_mut().enumerate() {
        let mean = estimates.iter().map(|e| e[k]).sum::<f64>() / n;
        *slot = (estimates.iter().map(|e| (e[k] - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    }
    let partial = MonteCarloBand { plants: design.effects, sd, critical: 0.0, replications };
    let mut stats: Vec<f64> = estimates.iter().map(|e| partial.statistic(e)).collect();
    stats.sort_by(f64::total_cmp);
    let idx = ((level * n).ceil() as usize).clamp(1, replications) - 1;
    Ok(MonteCarloBand { critical: stats[idx], ..partial })
}
