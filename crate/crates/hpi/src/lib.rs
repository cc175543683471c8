//! Hyperparameter importance via cooperative games.
//!
//! The central move: fix a baseline configuration, pick a set of tunable
//! hyperparameters, and ask how well a tuner can do when exactly that set
//! is free while everything else stays at the baseline. Scoring every
//! subset this way yields a cooperative game over the hyperparameters, and
//! game-theoretic indices (Shapley values, Möbius coefficients,
//! least-squares interaction scores) turn the table into attributions:
//! how much each hyperparameter, and each interaction among them, matters.
//!
//! The pieces:
//!
//! - [`space`]: configuration spaces, domains, configurations, imputation.
//! - [`oracle`]: performance oracles, from synthetic test functions to
//!   tables of recorded benchmark results.
//! - [`game`]: ablation, sensitivity, tunability, and optimizer-bias
//!   games, with exact and sampled evaluation plans, plus aggregation
//!   across datasets.
//! - [`optimizer`]: the tuners the games consult, all deterministic given
//!   a seed.
//! - [`index`]: the Möbius transform, Shapley values, and faithful
//!   interaction scores of bounded order, with faithfulness diagnostics.
//! - [`io`]: file formats for spaces, recorded evaluations, cached game
//!   tables, and exports (JSON, CSV, Graphviz).
//!
//! Everything downstream of a seed is reproducible: the same seed gives
//! bit-identical game tables regardless of thread count.
//!
//! ```
//! use hpi::{config, Coalition, GameSpec, IndicatorSumOracle, shapley_values, binary_switch_space};
//!
//! let space = binary_switch_space(3)?;
//! let oracle = IndicatorSumOracle::new(space.clone(), config![1, 1, 1])?;
//! let game = GameSpec::ablation(space, config![0, 0, 0], config![1, 1, 1])?
//!     .evaluate(&oracle)?;
//! let sv = shapley_values(&game);
//! // Each switch contributes one unit, and the attributions add up to
//! // the full ablation gap.
//! assert_eq!(sv.get(Coalition::from_members([0], 3)?)?, 1.0);
//! # Ok::<(), hpi::Error>(())
//! ```

pub mod atom;
pub mod coalition;
mod error;
pub mod game;
pub mod index;
pub mod io;
pub mod optimizer;
pub mod oracle;
pub mod rng;
mod solve;
pub mod space;
mod transform;

#[cfg(doctest)]
mod guide;

pub use atom::Atom;
pub use coalition::{enumerate_coalitions, Coalition, MAX_PLAYERS};
pub use error::Error;
pub use game::{
    monotonicity_violations, multi_dataset_game, normalize_game, Aggregator, GameKind, GameSpec,
    GameValues, SamplingPlan, SearchPlan, EXACT_ENUMERATION_CAP,
};
pub use index::{
    discrete_derivative, faithfulness, fsii, moebius_strata, moebius_transform, reconstruct,
    reconstruct_table, shapley_values, shapley_values_marginal, Faithfulness, IndexKind,
    InteractionValues, OrderStratum,
};
pub use optimizer::{exact_maximum, run_optimizer, OptimizerSpec};
pub use oracle::{
    binary_switch_space, DatasetCollection, IndicatorSumOracle, MissingPolicy,
    PerformanceOracle, PerturbedOracle, ProductIndicatorOracle, RandomKAdditiveOracle,
    TabularOracle,
};
pub use space::{ConfigSpace, Configuration, HyperparameterDomain, Player};
