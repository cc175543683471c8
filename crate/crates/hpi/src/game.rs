//! Explanation games over coalitions of hyperparameters.
//!
//! A game assigns every coalition `S` a value derived from oracle
//! evaluations in which only the coordinates in `S` may deviate from the
//! baseline. Tables are dense (`2^n` entries, indexed by coalition mask) and
//! evaluated coalition-parallel; all sampling happens up front from derived
//! streams, so results are bit-identical for a given seed regardless of
//! thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coalition::Coalition;
use crate::error::Error;
use crate::oracle::{finite_eval, DatasetCollection, PerformanceOracle};
use crate::optimizer::{exact_maximum, run_optimizer, OptimizerSpec};
use crate::rng::{mix, stream, SALT_BASELINE_BATCH, SALT_ENSEMBLE, SALT_SEARCH_BATCH};
use crate::space::{impute, sample_configuration, ConfigSpace, Configuration, RestrictedEnumeration};

/// Largest discrete grid exact modes will enumerate.
pub const EXACT_ENUMERATION_CAP: u128 = 1_000_000;

/// Number of derived random searches in the reference ensemble of an
/// optimizer-bias game with a sampled reference.
pub const REFERENCE_ENSEMBLE_SIZE: u64 = 5;

/// How expectation-style games integrate over the space: exhaustively, or
/// with a shared Monte Carlo batch drawn once per game from the plan seed.
/// The sampling distribution is uniform over the space (log-uniform on
/// log-scaled continuous domains).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SamplingPlan {
    ExactEnumeration,
    MonteCarlo { samples: usize, seed: u64 },
}

/// How maximum-style games search the space: exhaustively, or by scoring a
/// shared batch of random candidates blinded to each coalition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SearchPlan {
    ExactEnumeration,
    RandomSearch { budget: usize, seed: u64 },
}

/// The game family plus its family-specific inputs.
#[derive(Debug, Clone, PartialEq)]
pub enum GameKind {
    /// `v(S) = Val(target ⊕ baseline on S)`: walks single evaluations from
    /// the baseline toward a target configuration.
    Ablation { target: Configuration },
    /// Ablation averaged over baselines drawn uniformly from the space.
    MarginalAblation {
        target: Configuration,
        plan: SamplingPlan,
    },
    /// Variance of the blinded score under uniform sampling: how much the
    /// coordinates in `S` move performance at all.
    Sensitivity { plan: SamplingPlan },
    /// Best reachable score when only `S` may be tuned.
    Tunability { plan: SearchPlan },
    /// Worst reachable score when only `S` may be tuned (risk view).
    WorstCase { plan: SearchPlan },
    /// Gap between a tested optimizer and a reference on every coalition;
    /// non-positive when the reference dominates the tested optimizer.
    OptimizerBias {
        optimizer: OptimizerSpec,
        reference: SearchPlan,
    },
}

impl GameKind {
    pub fn name(&self) -> &'static str {
        match self {
            GameKind::Ablation { .. } => "ablation",
            GameKind::MarginalAblation { .. } => "marginal-ablation",
            GameKind::Sensitivity { .. } => "sensitivity",
            GameKind::Tunability { .. } => "tunability",
            GameKind::WorstCase { .. } => "worst-case",
            GameKind::OptimizerBias { .. } => "optimizer-bias",
        }
    }

    /// The seed recorded in the resulting table's metadata: the plan seed
    /// for sampled plans, the tested optimizer's seed for optimizer-bias
    /// games with an exact reference, `None` for fully exact games.
    pub fn primary_seed(&self) -> Option<u64> {
        match self {
            GameKind::Ablation { .. } => None,
            GameKind::MarginalAblation { plan, .. } | GameKind::Sensitivity { plan } => match plan
            {
                SamplingPlan::ExactEnumeration => None,
                SamplingPlan::MonteCarlo { seed, .. } => Some(*seed),
            },
            GameKind::Tunability { plan } | GameKind::WorstCase { plan } => match plan {
                SearchPlan::ExactEnumeration => None,
                SearchPlan::RandomSearch { seed, .. } => Some(*seed),
            },
            GameKind::OptimizerBias {
                optimizer,
                reference,
            } => match reference {
                SearchPlan::RandomSearch { seed, .. } => Some(*seed),
                SearchPlan::ExactEnumeration => optimizer.seed(),
            },
        }
    }
}

/// A fully validated game description: space, baseline and family.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    space: ConfigSpace,
    baseline: Configuration,
    kind: GameKind,
}

impl GameSpec {
    pub fn new(space: ConfigSpace, baseline: Configuration, kind: GameKind) -> Result<Self, Error> {
        space.check_member(&baseline)?;
        match &kind {
            GameKind::Ablation { target } => space.check_member(target)?,
            GameKind::MarginalAblation { target, plan } => {
                space.check_member(target)?;
                validate_sampling(plan, &space, 1)?;
            }
            GameKind::Sensitivity { plan } => {
                // Monte Carlo variance uses the unbiased M-1 denominator.
                validate_sampling(plan, &space, 2)?;
            }
            GameKind::Tunability { plan } | GameKind::WorstCase { plan } => {
                validate_search(plan, &space)?;
            }
            GameKind::OptimizerBias {
                optimizer,
                reference,
            } => {
                optimizer.validate(space.n())?;
                validate_search(reference, &space)?;
            }
        }
        Ok(GameSpec {
            space,
            baseline,
            kind,
        })
    }

    pub fn ablation(
        space: ConfigSpace,
        baseline: Configuration,
        target: Configuration,
    ) -> Result<Self, Error> {
        Self::new(space, baseline, GameKind::Ablation { target })
    }

    pub fn marginal_ablation(
        space: ConfigSpace,
        baseline: Configuration,
        target: Configuration,
        plan: SamplingPlan,
    ) -> Result<Self, Error> {
        Self::new(space, baseline, GameKind::MarginalAblation { target, plan })
    }

    pub fn sensitivity(
        space: ConfigSpace,
        baseline: Configuration,
        plan: SamplingPlan,
    ) -> Result<Self, Error> {
        Self::new(space, baseline, GameKind::Sensitivity { plan })
    }

    pub fn tunability(
        space: ConfigSpace,
        baseline: Configuration,
        plan: SearchPlan,
    ) -> Result<Self, Error> {
        Self::new(space, baseline, GameKind::Tunability { plan })
    }

    pub fn worst_case(
        space: ConfigSpace,
        baseline: Configuration,
        plan: SearchPlan,
    ) -> Result<Self, Error> {
        Self::new(space, baseline, GameKind::WorstCase { plan })
    }

    pub fn optimizer_bias(
        space: ConfigSpace,
        baseline: Configuration,
        optimizer: OptimizerSpec,
        reference: SearchPlan,
    ) -> Result<Self, Error> {
        Self::new(
            space,
            baseline,
            GameKind::OptimizerBias {
                optimizer,
                reference,
            },
        )
    }

    pub fn space(&self) -> &ConfigSpace {
        &self.space
    }

    pub fn baseline(&self) -> &Configuration {
        &self.baseline
    }

    pub fn kind(&self) -> &GameKind {
        &self.kind
    }

    /// Evaluates the full table over all `2^n` coalitions.
    pub fn evaluate(&self, oracle: &dyn PerformanceOracle) -> Result<GameValues, Error> {
        if oracle.space() != &self.space {
            return Err(Error::GameMismatch(
                "oracle and game use different configuration spaces".into(),
            ));
        }
        let n = self.space.n();
        let baseline = &self.baseline;
        let values = match &self.kind {
            GameKind::Ablation { target } => build_table(n, |s| {
                finite_eval(oracle, &impute(target, baseline, s)?)
            })?,
            GameKind::MarginalAblation { target, plan } => match plan {
                SamplingPlan::ExactEnumeration => build_table(n, |s| {
                    let mut sum = 0.0;
                    let mut count = 0u64;
                    for cfg in RestrictedEnumeration::new(&self.space, s.complement(), target)? {
                        sum += finite_eval(oracle, &cfg)?;
                        count += 1;
                    }
                    Ok(sum / count as f64)
                })?,
                SamplingPlan::MonteCarlo { samples, seed } => {
                    let batch = draw_batch(&self.space, *samples, *seed, SALT_BASELINE_BATCH);
                    build_table(n, |s| {
                        let mut sum = 0.0;
                        for b in &batch {
                            sum += finite_eval(oracle, &impute(target, b, s)?)?;
                        }
                        Ok(sum / batch.len() as f64)
                    })?
                }
            },
            GameKind::Sensitivity { plan } => match plan {
                SamplingPlan::ExactEnumeration => build_table(n, |s| {
                    if s.is_empty() {
                        return Ok(0.0);
                    }
                    let scores: Vec<f64> =
                        RestrictedEnumeration::new(&self.space, s, baseline)?
                            .map(|cfg| finite_eval(oracle, &cfg))
                            .collect::<Result<_, _>>()?;
                    Ok(population_variance(&scores))
                })?,
                SamplingPlan::MonteCarlo { samples, seed } => {
                    let batch = draw_batch(&self.space, *samples, *seed, SALT_BASELINE_BATCH);
                    build_table(n, |s| {
                        if s.is_empty() {
                            // Every draw collapses to the baseline, so the
                            // variance is 0 with no Monte Carlo noise.
                            return Ok(0.0);
                        }
                        let scores: Vec<f64> = batch
                            .iter()
                            .map(|cand| finite_eval(oracle, &impute(cand, baseline, s)?))
                            .collect::<Result<_, _>>()?;
                        Ok(sample_variance(&scores))
                    })?
                }
            },
            GameKind::Tunability { plan } => match plan {
                SearchPlan::ExactEnumeration => {
                    build_table(n, |s| Ok(exact_maximum(oracle, s, baseline)?.1))?
                }
                SearchPlan::RandomSearch { budget, seed } => {
                    let batch = draw_batch(&self.space, *budget, *seed, SALT_SEARCH_BATCH);
                    build_table(n, |s| batch_extremum(oracle, &batch, baseline, s, true))?
                }
            },
            GameKind::WorstCase { plan } => match plan {
                SearchPlan::ExactEnumeration => build_table(n, |s| {
                    let mut best: Option<f64> = None;
                    for cfg in RestrictedEnumeration::new(&self.space, s, baseline)? {
                        let v = finite_eval(oracle, &cfg)?;
                        if best.is_none_or(|b| v < b) {
                            best = Some(v);
                        }
                    }
                    Ok(best.expect("grids are non-empty"))
                })?,
                SearchPlan::RandomSearch { budget, seed } => {
                    let batch = draw_batch(&self.space, *budget, *seed, SALT_SEARCH_BATCH);
                    build_table(n, |s| batch_extremum(oracle, &batch, baseline, s, false))?
                }
            },
            GameKind::OptimizerBias {
                optimizer,
                reference,
            } => build_table(n, |s| {
                let (_, tested) = run_optimizer(optimizer, oracle, s, baseline)?;
                let reference_value = match reference {
                    SearchPlan::ExactEnumeration => exact_maximum(oracle, s, baseline)?.1,
                    SearchPlan::RandomSearch { budget, seed } => {
                        let mut best = tested;
                        for i in 1..=REFERENCE_ENSEMBLE_SIZE {
                            let member = OptimizerSpec::RandomSearch {
                                budget: *budget,
                                seed: mix(*seed, &[SALT_ENSEMBLE, i]),
                            };
                            let (_, v) = run_optimizer(&member, oracle, s, baseline)?;
                            if v > best {
                                best = v;
                            }
                        }
                        best
                    }
                };
                Ok(tested - reference_value)
            })?,
        };
        GameValues::from_parts(
            self.kind.name(),
            self.baseline.clone(),
            self.kind.primary_seed(),
            false,
            oracle.label().map(str::to_owned),
            self.space.names().map(str::to_owned).collect(),
            values,
        )
    }
}

fn validate_sampling(
    plan: &SamplingPlan,
    space: &ConfigSpace,
    min_samples: usize,
) -> Result<(), Error> {
    match plan {
        SamplingPlan::ExactEnumeration => require_exact_enumerable(space),
        SamplingPlan::MonteCarlo { samples, .. } => {
            if *samples < min_samples {
                return Err(Error::InvalidPlan(format!(
                    "monte carlo needs at least {min_samples} samples, got {samples}"
                )));
            }
            Ok(())
        }
    }
}

fn validate_search(plan: &SearchPlan, space: &ConfigSpace) -> Result<(), Error> {
    match plan {
        SearchPlan::ExactEnumeration => require_exact_enumerable(space),
        SearchPlan::RandomSearch { budget, .. } => {
            if *budget == 0 {
                return Err(Error::InvalidPlan("random search budget is 0".into()));
            }
            Ok(())
        }
    }
}

fn require_exact_enumerable(space: &ConfigSpace) -> Result<(), Error> {
    match space.discrete_cardinality() {
        Some(count) if count <= EXACT_ENUMERATION_CAP => Ok(()),
        Some(count) => Err(Error::ExactUnavailable(format!(
            "space has {count} configurations, cap is {EXACT_ENUMERATION_CAP}"
        ))),
        None => Err(Error::ExactUnavailable(
            "space contains a continuous domain".into(),
        )),
    }
}

fn draw_batch(space: &ConfigSpace, count: usize, seed: u64, salt: u64) -> Vec<Configuration> {
    let mut rng = stream(seed, &[salt]);
    (0..count)
        .map(|_| sample_configuration(space, &mut rng))
        .collect()
}

fn build_table<F>(n: usize, per_coalition: F) -> Result<Vec<f64>, Error>
where
    F: Fn(Coalition) -> Result<f64, Error> + Sync,
{
    let values: Vec<f64> = (0..1usize << n)
        .into_par_iter()
        .map(|mask| per_coalition(Coalition::from_mask_unchecked(mask as u32, n)))
        .collect::<Result<_, _>>()?;
    for (mask, v) in values.iter().enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteValue {
                value: *v,
                config: format!(
                    "coalition {}",
                    Coalition::from_mask_unchecked(mask as u32, n)
                ),
            });
        }
    }
    Ok(values)
}

fn batch_extremum(
    oracle: &dyn PerformanceOracle,
    batch: &[Configuration],
    baseline: &Configuration,
    s: Coalition,
    take_max: bool,
) -> Result<f64, Error> {
    let mut best: Option<f64> = None;
    for cand in batch {
        let v = finite_eval(oracle, &impute(cand, baseline, s)?)?;
        let better = match best {
            None => true,
            Some(b) => {
                if take_max {
                    v > b
                } else {
                    v < b
                }
            }
        };
        if better {
            best = Some(v);
        }
    }
    Ok(best.expect("plans require at least one candidate"))
}

fn population_variance(scores: &[f64]) -> f64 {
    let m = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / m;
    scores.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / m
}

fn sample_variance(scores: &[f64]) -> f64 {
    let m = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / m;
    scores.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GameValuesRepr {
    n: usize,
    kind: String,
    baseline: Configuration,
    seed: Option<u64>,
    normalized: bool,
    dataset: Option<String>,
    values: Vec<f64>,
    player_names: Vec<String>,
}

/// A dense game table with the metadata identifying how it was produced.
///
/// Entry `values[m]` is the value of the coalition with mask `m`; entry 0 is
/// the empty coalition, the last entry the grand coalition. Serializes to
/// the cache JSON format and re-parses losslessly (floats are written with
/// shortest round-trip precision).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GameValuesRepr")]
pub struct GameValues {
    n: usize,
    kind: String,
    baseline: Configuration,
    seed: Option<u64>,
    normalized: bool,
    dataset: Option<String>,
    values: Vec<f64>,
    player_names: Vec<String>,
}

impl GameValues {
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        kind: impl Into<String>,
        baseline: Configuration,
        seed: Option<u64>,
        normalized: bool,
        dataset: Option<String>,
        player_names: Vec<String>,
        values: Vec<f64>,
    ) -> Result<Self, Error> {
        let n = player_names.len();
        if n == 0 || n > crate::coalition::MAX_PLAYERS {
            return Err(Error::InvalidSpace(format!(
                "player count must be in 1..={}, got {n}",
                crate::coalition::MAX_PLAYERS
            )));
        }
        if values.len() != 1 << n {
            return Err(Error::GameMismatch(format!(
                "expected {} values for {n} players, got {}",
                1usize << n,
                values.len()
            )));
        }
        if baseline.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: baseline.len(),
            });
        }
        for (mask, v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    value: *v,
                    config: format!("coalition mask {mask:#x}"),
                });
            }
        }
        Ok(GameValues {
            n,
            kind: kind.into(),
            baseline,
            seed,
            normalized,
            dataset,
            values,
            player_names,
        })
    }

    /// Bare table with placeholder metadata, for synthetic games.
    pub fn from_table(values: Vec<f64>) -> Result<Self, Error> {
        if !values.len().is_power_of_two() || values.len() < 2 {
            return Err(Error::GameMismatch(format!(
                "table length must be a power of two >= 2, got {}",
                values.len()
            )));
        }
        let n = values.len().trailing_zeros() as usize;
        GameValues::from_parts(
            "table",
            (0..n).map(|_| crate::atom::Atom::Int(0)).collect(),
            None,
            false,
            None,
            (0..n).map(|i| format!("x{i}")).collect(),
            values,
        )
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn baseline(&self) -> &Configuration {
        &self.baseline
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn normalized(&self) -> bool {
        self.normalized
    }

    pub fn dataset(&self) -> Option<&str> {
        self.dataset.as_deref()
    }

    pub fn player_names(&self) -> &[String] {
        &self.player_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, s: Coalition) -> Result<f64, Error> {
        if s.n() != self.n {
            return Err(Error::CoalitionMismatch {
                left: s.n(),
                right: self.n,
            });
        }
        Ok(self.values[s.mask() as usize])
    }

    pub fn empty_value(&self) -> f64 {
        self.values[0]
    }

    pub fn grand_value(&self) -> f64 {
        self.values[self.values.len() - 1]
    }

    pub(crate) fn with_dataset(mut self, label: impl Into<String>) -> Self {
        self.dataset = Some(label.into());
        self
    }

    /// True when the identifying metadata (everything except the values)
    /// matches: same kind, baseline, seed, normalization, dataset and
    /// players. Caches use this to decide whether a stored table answers the
    /// requested computation.
    pub fn meta_matches(&self, other: &GameValues) -> bool {
        self.n == other.n
            && self.kind == other.kind
            && self.baseline == other.baseline
            && self.seed == other.seed
            && self.normalized == other.normalized
            && self.dataset == other.dataset
            && self.player_names == other.player_names
    }
}

impl TryFrom<GameValuesRepr> for GameValues {
    type Error = Error;

    fn try_from(repr: GameValuesRepr) -> Result<Self, Error> {
        if repr.n != repr.player_names.len() {
            return Err(Error::GameMismatch(format!(
                "n is {} but there are {} player names",
                repr.n,
                repr.player_names.len()
            )));
        }
        GameValues::from_parts(
            repr.kind,
            repr.baseline,
            repr.seed,
            repr.normalized,
            repr.dataset,
            repr.player_names,
            repr.values,
        )
    }
}

/// Shifts the table so the empty coalition sits at exactly 0.
pub fn normalize_game(game: &GameValues) -> GameValues {
    let offset = game.values[0];
    let mut out = game.clone();
    out.values = game.values.iter().map(|v| v - offset).collect();
    out.normalized = true;
    out
}

/// How a multi-dataset family collapses into one game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Aggregator {
    Mean,
    /// Lower-interpolation quantile: with M sorted values the aggregate is
    /// the entry at floor(q * (M - 1)).
    Quantile(f64),
}

impl Aggregator {
    /// Dataset label stamped on aggregated games.
    pub fn label(&self) -> String {
        match self {
            Aggregator::Mean => "multi(mean)".into(),
            Aggregator::Quantile(q) => format!("multi(q={q})"),
        }
    }
}

/// Aggregates per-dataset tables of one spec into a single game,
/// coalition-wise.
pub fn multi_dataset_game(games: &[GameValues], aggregator: Aggregator) -> Result<GameValues, Error> {
    let Some(first) = games.first() else {
        return Err(Error::GameMismatch("no games to aggregate".into()));
    };
    if let Aggregator::Quantile(q) = aggregator {
        if !(0.0..=1.0).contains(&q) || q.is_nan() {
            return Err(Error::InvalidQuantile(q));
        }
    }
    for (i, g) in games.iter().enumerate().skip(1) {
        if g.n != first.n
            || g.kind != first.kind
            || g.player_names != first.player_names
            || g.baseline != first.baseline
            || g.normalized != first.normalized
        {
            return Err(Error::GameMismatch(format!(
                "game {i} disagrees with game 0 on kind, players, baseline or normalization"
            )));
        }
    }
    let m = games.len();
    let values: Vec<f64> = (0..first.values.len())
        .map(|mask| {
            let mut column: Vec<f64> = games.iter().map(|g| g.values[mask]).collect();
            match aggregator {
                Aggregator::Mean => column.iter().sum::<f64>() / m as f64,
                Aggregator::Quantile(q) => {
                    column.sort_by(f64::total_cmp);
                    column[(q * (m - 1) as f64).floor() as usize]
                }
            }
        })
        .collect();
    GameValues::from_parts(
        first.kind.clone(),
        first.baseline.clone(),
        first.seed,
        first.normalized,
        Some(aggregator.label()),
        first.player_names.clone(),
        values,
    )
}

/// Evaluates one spec across every dataset in the collection, labeling each
/// resulting table with its dataset.
pub fn evaluate_on_collection(
    spec: &GameSpec,
    datasets: &DatasetCollection,
) -> Result<Vec<GameValues>, Error> {
    datasets
        .iter()
        .zip(datasets.labels())
        .map(|(oracle, label)| Ok(spec.evaluate(oracle)?.with_dataset(label.clone())))
        .collect()
}

/// All covering pairs `v(S) > v(S + {i})`, i.e. witnesses that the game is
/// not monotone. Empty for monotone games; sensitivity games can trigger it.
pub fn monotonicity_violations(game: &GameValues) -> Vec<(Coalition, Coalition)> {
    let n = game.n;
    let mut out = Vec::new();
    for mask in 0..game.values.len() {
        for i in 0..n {
            if mask & (1 << i) != 0 {
                continue;
            }
            let sup = mask | (1 << i);
            if game.values[mask] > game.values[sup] {
                out.push((
                    Coalition::from_mask_unchecked(mask as u32, n),
                    Coalition::from_mask_unchecked(sup as u32, n),
                ));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config;
    use crate::oracle::{
        binary_switch_space, IndicatorSumOracle, ProductIndicatorOracle, TabularOracle,
    };
    use crate::oracle::MissingPolicy;
    use crate::space::{HyperparameterDomain, Player};
    use approx::assert_abs_diff_eq;

    /// Two players: a binary switch and a ten-valued knob. The score counts
    /// coordinates matching (1, 9).
    fn two_knob_space() -> ConfigSpace {
        ConfigSpace::new(
            vec![
                Player::new("a", HyperparameterDomain::discrete([0, 1])),
                Player::new("b", HyperparameterDomain::discrete(0..10)),
            ],
            config![0, 0],
        )
        .unwrap()
    }

    fn two_knob_oracle() -> IndicatorSumOracle {
        IndicatorSumOracle::new(two_knob_space(), config![1, 9]).unwrap()
    }

    #[test]
    fn ablation_counts_moved_coordinates() {
        let spec = GameSpec::ablation(two_knob_space(), config![0, 0], config![1, 9]).unwrap();
        let game = spec.evaluate(&two_knob_oracle()).unwrap();
        assert_eq!(game.values(), [0.0, 1.0, 1.0, 2.0]);
        assert_eq!(game.kind(), "ablation");
        assert_eq!(game.seed(), None);
    }

    #[test]
    fn tunability_from_the_poor_baseline() {
        let spec = GameSpec::tunability(
            two_knob_space(),
            config![0, 0],
            SearchPlan::ExactEnumeration,
        )
        .unwrap();
        let game = spec.evaluate(&two_knob_oracle()).unwrap();
        assert_eq!(game.values(), [0.0, 1.0, 1.0, 2.0]);
        assert!(monotonicity_violations(&game).is_empty());
    }

    #[test]
    fn tunability_from_the_tuned_baseline_is_flat() {
        let spec = GameSpec::tunability(
            two_knob_space(),
            config![1, 9],
            SearchPlan::ExactEnumeration,
        )
        .unwrap();
        let game = spec.evaluate(&two_knob_oracle()).unwrap();
        assert_eq!(game.values(), [2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn sensitivity_is_baseline_independent_here() {
        // Bernoulli variances: 1/4 for the binary switch, 9/100 for the
        // ten-valued knob, additive under independence.
        for baseline in [config![0, 0], config![1, 9]] {
            let spec = GameSpec::sensitivity(
                two_knob_space(),
                baseline,
                SamplingPlan::ExactEnumeration,
            )
            .unwrap();
            let game = spec.evaluate(&two_knob_oracle()).unwrap();
            assert_eq!(game.values()[0], 0.0);
            assert_abs_diff_eq!(game.values()[1], 0.25, epsilon = 1e-12);
            assert_abs_diff_eq!(game.values()[2], 0.09, epsilon = 1e-12);
            assert_abs_diff_eq!(game.values()[3], 0.34, epsilon = 1e-12);
        }
    }

    #[test]
    fn sensitivity_can_break_monotonicity() {
        // Product indicator at (0, 0) with baseline (0, 0): a singleton
        // flips a Bernoulli(1/2), variance 1/4; the pair flips a
        // Bernoulli(1/4), variance 3/16 < 1/4.
        let space = binary_switch_space(2).unwrap();
        let oracle = ProductIndicatorOracle::new(space.clone(), config![0, 0]).unwrap();
        let spec =
            GameSpec::sensitivity(space, config![0, 0], SamplingPlan::ExactEnumeration).unwrap();
        let game = spec.evaluate(&oracle).unwrap();
        assert_eq!(game.values()[0], 0.0);
        assert_abs_diff_eq!(game.values()[1], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(game.values()[2], 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(game.values()[3], 0.1875, epsilon = 1e-12);
        let violations = monotonicity_violations(&game);
        assert_eq!(violations.len(), 2, "both singletons exceed the pair");
    }

    #[test]
    fn monte_carlo_sensitivity_pins_the_empty_coalition() {
        let spec = GameSpec::sensitivity(
            two_knob_space(),
            config![0, 3],
            SamplingPlan::MonteCarlo {
                samples: 33,
                seed: 11,
            },
        )
        .unwrap();
        let game = spec.evaluate(&two_knob_oracle()).unwrap();
        assert_eq!(game.values()[0].to_bits(), 0.0f64.to_bits());
        // Unbiased estimates land near the exact variances.
        assert!((game.values()[3] - 0.34).abs() < 0.15);
    }

    #[test]
    fn monte_carlo_marginal_ablation_converges() {
        let exact = GameSpec::marginal_ablation(
            two_knob_space(),
            config![0, 0],
            config![1, 9],
            SamplingPlan::ExactEnumeration,
        )
        .unwrap()
        .evaluate(&two_knob_oracle())
        .unwrap();
        // Exact means: v({}) = E[hits] = 1/2 + 1/10 = 0.6, adding a player
        // pins its coordinate to the target.
        assert_abs_diff_eq!(exact.values()[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.values()[1], 1.1, epsilon = 1e-12);
        assert_abs_diff_eq!(exact.values()[2], 1.5, epsilon = 1e-12);
        assert_eq!(exact.values()[3], 2.0);

        let mc = GameSpec::marginal_ablation(
            two_knob_space(),
            config![0, 0],
            config![1, 9],
            SamplingPlan::MonteCarlo {
                samples: 4096,
                seed: 5,
            },
        )
        .unwrap()
        .evaluate(&two_knob_oracle())
        .unwrap();
        for mask in 0..4 {
            assert!((mc.values()[mask] - exact.values()[mask]).abs() < 0.05);
        }
        assert_eq!(
            mc.values()[3],
            2.0,
            "grand coalition ignores the sampled baselines entirely"
        );
    }

    #[test]
    fn random_search_tunability_is_dominated_by_exact() {
        let space = two_knob_space();
        let oracle = two_knob_oracle();
        let exact = GameSpec::tunability(space.clone(), config![0, 0], SearchPlan::ExactEnumeration)
            .unwrap()
            .evaluate(&oracle)
            .unwrap();
        let sampled = GameSpec::tunability(
            space,
            config![0, 0],
            SearchPlan::RandomSearch { budget: 64, seed: 2 },
        )
        .unwrap()
        .evaluate(&oracle)
        .unwrap();
        for mask in 0..4 {
            assert!(sampled.values()[mask] <= exact.values()[mask]);
        }
        assert_eq!(sampled.values()[0], 0.0, "empty coalition stays at baseline");
        assert_eq!(sampled.seed(), Some(2));
    }

    #[test]
    fn worst_case_is_the_mirror_of_tunability() {
        let spec = GameSpec::worst_case(
            two_knob_space(),
            config![1, 9],
            SearchPlan::ExactEnumeration,
        )
        .unwrap();
        let game = spec.evaluate(&two_knob_oracle()).unwrap();
        // From the tuned baseline, freeing players can only lose score.
        assert_eq!(game.values(), [2.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn evaluation_is_thread_count_invariant() {
        let spec = GameSpec::sensitivity(
            two_knob_space(),
            config![0, 0],
            SamplingPlan::MonteCarlo {
                samples: 64,
                seed: 9,
            },
        )
        .unwrap();
        let oracle = two_knob_oracle();
        let single = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| spec.evaluate(&oracle))
            .unwrap();
        let many = rayon::ThreadPoolBuilder::new()
            .num_threads(8)
            .build()
            .unwrap()
            .install(|| spec.evaluate(&oracle))
            .unwrap();
        let bits = |g: &GameValues| -> Vec<u64> { g.values().iter().map(|v| v.to_bits()).collect() };
        assert_eq!(bits(&single), bits(&many));
    }

    #[test]
    fn optimizer_bias_is_zero_for_the_reference_itself() {
        let spec = GameSpec::optimizer_bias(
            two_knob_space(),
            config![0, 0],
            OptimizerSpec::ExactMaximizer,
            SearchPlan::ExactEnumeration,
        )
        .unwrap();
        let game = spec.evaluate(&two_knob_oracle()).unwrap();
        assert_eq!(game.values(), [0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn optimizer_bias_exposes_the_tuner_on_interactions() {
        let space = binary_switch_space(2).unwrap();
        let oracle = ProductIndicatorOracle::new(space.clone(), config![1, 1]).unwrap();
        let spec = GameSpec::optimizer_bias(
            space,
            config![0, 0],
            OptimizerSpec::IndependentTuner {
                per_player_budget: 32,
                seed: 1,
            },
            SearchPlan::ExactEnumeration,
        )
        .unwrap();
        let game = spec.evaluate(&oracle).unwrap();
        // Singletons cannot reach the optimum either way; only the grand
        // coalition shows the gap the single-pass tuner cannot close.
        assert_eq!(game.values(), [0.0, 0.0, 0.0, -1.0]);
    }

    #[test]
    fn optimizer_bias_is_non_positive_against_the_ensemble() {
        let space = two_knob_space();
        let oracle = two_knob_oracle();
        for seed in 0..8 {
            let spec = GameSpec::optimizer_bias(
                space.clone(),
                config![0, 0],
                OptimizerSpec::RandomSearch { budget: 4, seed },
                SearchPlan::RandomSearch {
                    budget: 4,
                    seed: seed + 100,
                },
            )
            .unwrap();
            let game = spec.evaluate(&oracle).unwrap();
            assert_eq!(game.values()[0], 0.0);
            assert!(game.values().iter().all(|v| *v <= 0.0));
        }
    }

    #[test]
    fn exact_plans_require_small_discrete_spaces() {
        let continuous = ConfigSpace::new(
            vec![Player::new("lr", HyperparameterDomain::continuous(0.0, 1.0))],
            config![0.5],
        )
        .unwrap();
        assert!(matches!(
            GameSpec::sensitivity(continuous, config![0.5], SamplingPlan::ExactEnumeration),
            Err(Error::ExactUnavailable(_))
        ));

        assert!(matches!(
            GameSpec::sensitivity(
                two_knob_space(),
                config![0, 0],
                SamplingPlan::MonteCarlo { samples: 1, seed: 0 },
            ),
            Err(Error::InvalidPlan(_))
        ));
    }

    #[test]
    fn normalization_shifts_to_zero() {
        let spec = GameSpec::tunability(
            two_knob_space(),
            config![1, 9],
            SearchPlan::ExactEnumeration,
        )
        .unwrap();
        let game = spec.evaluate(&two_knob_oracle()).unwrap();
        let normalized = normalize_game(&game);
        assert_eq!(normalized.values(), [0.0, 0.0, 0.0, 0.0]);
        assert!(normalized.normalized());
        assert!(!game.normalized());
    }

    #[test]
    fn cache_json_round_trips_bit_for_bit() {
        let spec = GameSpec::sensitivity(
            two_knob_space(),
            config![0, 0],
            SamplingPlan::MonteCarlo {
                samples: 16,
                seed: 3,
            },
        )
        .unwrap();
        let game = spec.evaluate(&two_knob_oracle()).unwrap();
        let json = serde_json::to_string_pretty(&game).unwrap();
        let back: GameValues = serde_json::from_str(&json).unwrap();
        assert!(back.meta_matches(&game));
        for (a, b) in back.values().iter().zip(game.values()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_tables_are_rejected() {
        assert!(GameValues::from_table(vec![0.0, 1.0, 2.0]).is_err());
        let wrong_n = serde_json::json!({
            "n": 2,
            "kind": "table",
            "baseline": [0, 0],
            "seed": null,
            "normalized": false,
            "dataset": null,
            "values": [0.0, 1.0],
            "player_names": ["a", "b"],
        });
        assert!(serde_json::from_value::<GameValues>(wrong_n).is_err());
    }

    fn tabular_game(values: [f64; 4], label: &str) -> GameValues {
        let space = binary_switch_space(2).unwrap();
        let rows = vec![
            (config![0, 0], values[0]),
            (config![1, 0], values[1]),
            (config![0, 1], values[2]),
            (config![1, 1], values[3]),
        ];
        let oracle = TabularOracle::from_rows(
            space.clone(),
            rows,
            MissingPolicy::Error,
            Some(label.to_owned()),
        )
        .unwrap();
        GameSpec::ablation(space, config![0, 0], config![1, 1])
            .unwrap()
            .evaluate(&oracle)
            .unwrap()
    }

    #[test]
    fn multi_dataset_mean_and_quantiles() {
        let games = vec![
            tabular_game([0.0, 1.0, 2.0, 3.0], "d0"),
            tabular_game([0.0, 3.0, 4.0, 5.0], "d1"),
            tabular_game([0.0, 2.0, 0.0, 1.0], "d2"),
        ];
        let mean = multi_dataset_game(&games, Aggregator::Mean).unwrap();
        assert_eq!(mean.values(), [0.0, 2.0, 2.0, 3.0]);
        assert_eq!(mean.dataset(), Some("multi(mean)"));

        let min = multi_dataset_game(&games, Aggregator::Quantile(0.0)).unwrap();
        assert_eq!(min.values(), [0.0, 1.0, 0.0, 1.0]);
        let max = multi_dataset_game(&games, Aggregator::Quantile(1.0)).unwrap();
        assert_eq!(max.values(), [0.0, 3.0, 4.0, 5.0]);
        // Lower interpolation: the median of three is the middle entry, of
        // two it is the smaller one.
        let med = multi_dataset_game(&games, Aggregator::Quantile(0.5)).unwrap();
        assert_eq!(med.values(), [0.0, 2.0, 2.0, 3.0]);
        let two = multi_dataset_game(&games[..2], Aggregator::Quantile(0.5)).unwrap();
        assert_eq!(two.values(), [0.0, 1.0, 2.0, 3.0]);

        assert!(multi_dataset_game(&games, Aggregator::Quantile(1.5)).is_err());
        assert!(multi_dataset_game(&[], Aggregator::Mean).is_err());
    }

    #[test]
    fn mean_aggregation_commutes_with_normalization() {
        let games = vec![
            tabular_game([0.5, 1.0, 2.0, 3.0], "d0"),
            tabular_game([0.25, 3.0, 4.0, 5.0], "d1"),
        ];
        let normalized_then_mean = multi_dataset_game(
            &games.iter().map(normalize_game).collect::<Vec<_>>(),
            Aggregator::Mean,
        )
        .unwrap();
        let mean_then_normalized = normalize_game(&multi_dataset_game(&games, Aggregator::Mean).unwrap());
        for mask in 0..4 {
            assert_abs_diff_eq!(
                normalized_then_mean.values()[mask],
                mean_then_normalized.values()[mask],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn aggregation_rejects_mismatched_games() {
        let a = tabular_game([0.0, 1.0, 2.0, 3.0], "d0");
        let mut spec_b = tabular_game([0.0, 1.0, 2.0, 3.0], "d1");
        spec_b = normalize_game(&spec_b);
        assert!(matches!(
            multi_dataset_game(&[a, spec_b], Aggregator::Mean),
            Err(Error::GameMismatch(_))
        ));
    }

    #[test]
    fn collection_evaluation_labels_every_game() {
        let space = binary_switch_space(2).unwrap();
        let make = |optimum: Configuration| -> Box<dyn PerformanceOracle> {
            Box::new(IndicatorSumOracle::new(space.clone(), optimum).unwrap())
        };
        let collection = DatasetCollection::new(vec![make(config![1, 1]), make(config![0, 1])]).unwrap();
        let spec = GameSpec::tunability(space, config![0, 0], SearchPlan::ExactEnumeration).unwrap();
        let games = evaluate_on_collection(&spec, &collection).unwrap();
        assert_eq!(games.len(), 2);
        assert_eq!(games[0].dataset(), Some("dataset-0"));
        assert_eq!(games[1].dataset(), Some("dataset-1"));
        assert_eq!(games[0].values(), [0.0, 1.0, 1.0, 2.0]);
        assert_eq!(games[1].values(), [1.0, 1.0, 2.0, 2.0]);
    }
}
