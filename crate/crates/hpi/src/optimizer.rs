//! Hyperparameter optimizers restricted to coalitions.
//!
//! An optimizer searches only the coordinates inside a coalition; everything
//! else stays pinned at the baseline, so any returned configuration is
//! feasible for the coalition by construction. All randomness is derived
//! from the [`OptimizerSpec`] seed and the coalition mask, never from global
//! state.

use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::Error;
use crate::game::EXACT_ENUMERATION_CAP;
use crate::oracle::{finite_eval, PerformanceOracle};
use crate::rng::{stream, SALT_OPTIMIZER};
use crate::space::{
    impute, restricted_cardinality, sample_atom, sample_configuration, Configuration,
    RestrictedEnumeration,
};

/// Description of an optimizer run. Serializable so runs can be named in
/// manifests and on the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerSpec {
    /// Uniform random candidates; ties keep the earliest candidate.
    RandomSearch { budget: usize, seed: u64 },
    /// One ascending pass over the coalition's players, tuning one
    /// coordinate at a time and committing only strict improvements. Cheap
    /// and deliberately blind to interactions.
    IndependentTuner { per_player_budget: usize, seed: u64 },
    /// Runs `inner` with the frozen players removed from the coalition, so
    /// they stay at baseline no matter what the coalition allows.
    Blinded {
        inner: Box<OptimizerSpec>,
        frozen_players: Vec<usize>,
    },
    /// Runs every member and keeps the best result; ties keep the earliest
    /// member.
    VirtualBest { members: Vec<OptimizerSpec> },
    /// Exhausts the coalition's sub-grid. Requires discrete domains on the
    /// coalition and a restricted product within the enumeration cap.
    ExactMaximizer,
}

impl OptimizerSpec {
    pub fn validate(&self, n: usize) -> Result<(), Error> {
        match self {
            OptimizerSpec::RandomSearch { budget, .. } => {
                if *budget == 0 {
                    return Err(Error::InvalidOptimizer("random search budget is 0".into()));
                }
            }
            OptimizerSpec::IndependentTuner {
                per_player_budget, ..
            } => {
                if *per_player_budget == 0 {
                    return Err(Error::InvalidOptimizer("per-player budget is 0".into()));
                }
            }
            OptimizerSpec::Blinded {
                inner,
                frozen_players,
            } => {
                for &i in frozen_players {
                    if i >= n {
                        return Err(Error::PlayerOutOfRange { index: i, n });
                    }
                }
                inner.validate(n)?;
            }
            OptimizerSpec::VirtualBest { members } => {
                if members.is_empty() {
                    return Err(Error::InvalidOptimizer("virtual best has no members".into()));
                }
                for m in members {
                    m.validate(n)?;
                }
            }
            OptimizerSpec::ExactMaximizer => {}
        }
        Ok(())
    }

    /// The outermost seed involved in this spec, for run metadata.
    pub fn seed(&self) -> Option<u64> {
        match self {
            OptimizerSpec::RandomSearch { seed, .. }
            | OptimizerSpec::IndependentTuner { seed, .. } => Some(*seed),
            OptimizerSpec::Blinded { inner, .. } => inner.seed(),
            OptimizerSpec::VirtualBest { members } => members.iter().find_map(|m| m.seed()),
            OptimizerSpec::ExactMaximizer => None,
        }
    }
}

/// Runs `spec` on the coordinates in `coalition`, pinning the rest to
/// `baseline`, and returns the best configuration found with its value.
pub fn run_optimizer(
    spec: &OptimizerSpec,
    oracle: &dyn PerformanceOracle,
    coalition: Coalition,
    baseline: &Configuration,
) -> Result<(Configuration, f64), Error> {
    let space = oracle.space();
    if coalition.n() != space.n() {
        return Err(Error::CoalitionMismatch {
            left: coalition.n(),
            right: space.n(),
        });
    }
    space.check_member(baseline)?;
    spec.validate(space.n())?;
    run_validated(spec, oracle, coalition, baseline)
}

fn run_validated(
    spec: &OptimizerSpec,
    oracle: &dyn PerformanceOracle,
    coalition: Coalition,
    baseline: &Configuration,
) -> Result<(Configuration, f64), Error> {
    let space = oracle.space();
    match spec {
        OptimizerSpec::RandomSearch { budget, seed } => {
            let mut rng = stream(*seed, &[SALT_OPTIMIZER, coalition.mask() as u64]);
            let mut best: Option<(Configuration, f64)> = None;
            for _ in 0..*budget {
                let candidate = impute(&sample_configuration(space, &mut rng), baseline, coalition)?;
                let value = finite_eval(oracle, &candidate)?;
                if best.as_ref().is_none_or(|(_, b)| value > *b) {
                    best = Some((candidate, value));
                }
            }
            Ok(best.expect("budget >= 1"))
        }
        OptimizerSpec::IndependentTuner {
            per_player_budget,
            seed,
        } => {
            let mut rng = stream(*seed, &[SALT_OPTIMIZER, coalition.mask() as u64]);
            let mut current = baseline.clone();
            let mut current_value = finite_eval(oracle, &current)?;
            for player in coalition.members() {
                let domain = &space.players()[player].domain;
                for _ in 0..*per_player_budget {
                    let atom = sample_atom(domain, &mut rng);
                    let mut values = current.values().to_vec();
                    values[player] = atom;
                    let candidate = Configuration::new(values);
                    let value = finite_eval(oracle, &candidate)?;
                    // Strict improvement only: on ties the incumbent stays,
                    // so an oracle that rewards nothing leaves the baseline
                    // untouched.
                    if value > current_value {
                        current = candidate;
                        current_value = value;
                    }
                }
            }
            Ok((current, current_value))
        }
        OptimizerSpec::Blinded {
            inner,
            frozen_players,
        } => {
            let effective = Coalition::from_members(
                coalition
                    .members()
                    .filter(|i| !frozen_players.contains(i)),
                coalition.n(),
            )?;
            run_validated(inner, oracle, effective, baseline)
        }
        OptimizerSpec::VirtualBest { members } => {
            let mut best: Option<(Configuration, f64)> = None;
            for member in members {
                let (config, value) = run_validated(member, oracle, coalition, baseline)?;
                if best.as_ref().is_none_or(|(_, b)| value > *b) {
                    best = Some((config, value));
                }
            }
            Ok(best.expect("members are non-empty"))
        }
        OptimizerSpec::ExactMaximizer => exact_maximum(oracle, coalition, baseline),
    }
}

/// Exhaustive maximum of the oracle over the coalition's sub-grid. Ties keep
/// the earliest configuration in enumeration order.
pub fn exact_maximum(
    oracle: &dyn PerformanceOracle,
    coalition: Coalition,
    baseline: &Configuration,
) -> Result<(Configuration, f64), Error> {
    let space = oracle.space();
    match restricted_cardinality(space, coalition)? {
        Some(count) if count <= EXACT_ENUMERATION_CAP => {}
        Some(count) => {
            return Err(Error::ExactUnavailable(format!(
                "coalition grid has {count} configurations, cap is {EXACT_ENUMERATION_CAP}"
            )))
        }
        None => {
            return Err(Error::ExactUnavailable(
                "coalition contains a continuous player".into(),
            ))
        }
    }
    let mut best: Option<(Configuration, f64)> = None;
    for candidate in RestrictedEnumeration::new(space, coalition, baseline)? {
        let value = finite_eval(oracle, &candidate)?;
        if best.as_ref().is_none_or(|(_, b)| value > *b) {
            best = Some((candidate, value));
        }
    }
    Ok(best.expect("grids are non-empty"))
}
