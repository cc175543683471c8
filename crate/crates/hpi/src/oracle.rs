//! Performance oracles: deterministic maps from configurations to scores.
//!
//! An oracle stands in for "train and validate with this configuration".
//! Every oracle here is a pure function of its inputs and construction-time
//! state, so repeated calls agree bit for bit and games built on top are
//! reproducible.

use std::collections::HashMap;

use rand::Rng;

use crate::atom::Atom;
use crate::error::Error;
use crate::rng::{stable_hash64, stream, SALT_PERTURB};
use crate::space::{ConfigSpace, Configuration, HyperparameterDomain};
use crate::transform::zeta_in_place;

/// A deterministic performance measure over one configuration space.
///
/// `evaluate` assumes the configuration is a member of [`space`](Self::space);
/// game constructors validate their inputs once and imputation stays inside
/// the space, so the hot path skips membership checks.
pub trait PerformanceOracle: Send + Sync {
    fn space(&self) -> &ConfigSpace;

    /// Dataset label, if this oracle represents a concrete dataset.
    fn label(&self) -> Option<&str> {
        None
    }

    fn evaluate(&self, config: &Configuration) -> Result<f64, Error>;

    fn batch_evaluate(&self, configs: &[Configuration]) -> Result<Vec<f64>, Error> {
        configs.iter().map(|c| self.evaluate(c)).collect()
    }
}

impl<T: PerformanceOracle + ?Sized> PerformanceOracle for Box<T> {
    fn space(&self) -> &ConfigSpace {
        (**self).space()
    }

    fn label(&self) -> Option<&str> {
        (**self).label()
    }

    fn evaluate(&self, config: &Configuration) -> Result<f64, Error> {
        (**self).evaluate(config)
    }

    fn batch_evaluate(&self, configs: &[Configuration]) -> Result<Vec<f64>, Error> {
        (**self).batch_evaluate(configs)
    }
}

/// Counts coordinates that match a designated optimum, so the best value is
/// `n` at the optimum and every player contributes independently.
#[derive(Debug, Clone)]
pub struct IndicatorSumOracle {
    space: ConfigSpace,
    optimum: Configuration,
}

impl IndicatorSumOracle {
    pub fn new(space: ConfigSpace, optimum: Configuration) -> Result<Self, Error> {
        space.check_member(&optimum)?;
        Ok(IndicatorSumOracle { space, optimum })
    }

    pub fn optimum(&self) -> &Configuration {
        &self.optimum
    }
}

impl PerformanceOracle for IndicatorSumOracle {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn evaluate(&self, config: &Configuration) -> Result<f64, Error> {
        debug_assert_eq!(config.len(), self.space.n());
        let hits = self
            .space
            .players()
            .iter()
            .zip(config.iter().zip(self.optimum.iter()))
            .filter(|(p, (a, o))| p.domain.atoms_equal(a, o))
            .count();
        Ok(hits as f64)
    }
}

/// Product of per-coordinate indicators against an anchor: 1 when every
/// coordinate matches, 0 otherwise. All players interact; no strict subset
/// reaches the optimum on its own.
#[derive(Debug, Clone)]
pub struct ProductIndicatorOracle {
    space: ConfigSpace,
    anchor: Configuration,
}

impl ProductIndicatorOracle {
    pub fn new(space: ConfigSpace, anchor: Configuration) -> Result<Self, Error> {
        space.check_member(&anchor)?;
        Ok(ProductIndicatorOracle { space, anchor })
    }

    pub fn anchor(&self) -> &Configuration {
        &self.anchor
    }
}

impl PerformanceOracle for ProductIndicatorOracle {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn evaluate(&self, config: &Configuration) -> Result<f64, Error> {
        debug_assert_eq!(config.len(), self.space.n());
        let all = self
            .space
            .players()
            .iter()
            .zip(config.iter().zip(self.anchor.iter()))
            .all(|(p, (a, o))| p.domain.atoms_equal(a, o));
        Ok(if all { 1.0 } else { 0.0 })
    }
}

/// What a tabular oracle does when asked for a configuration it has no row
/// for.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Fail the evaluation.
    Error,
    /// Substitute a fixed value.
    DefaultValue(f64),
}

/// Recorded (configuration, performance) pairs, e.g. from a benchmark dump.
///
/// Rows are keyed up to domain equality: in continuous coordinates `1` and
/// `1.0` address the same row, in discrete coordinates they stay distinct.
#[derive(Debug, Clone)]
pub struct TabularOracle {
    space: ConfigSpace,
    rows: HashMap<Vec<u8>, f64>,
    missing: MissingPolicy,
    label: Option<String>,
}

impl TabularOracle {
    pub fn from_rows<I>(
        space: ConfigSpace,
        rows: I,
        missing: MissingPolicy,
        label: Option<String>,
    ) -> Result<Self, Error>
    where
        I: IntoIterator<Item = (Configuration, f64)>,
    {
        let mut map = HashMap::new();
        for (i, (config, value)) in rows.into_iter().enumerate() {
            space.check_member(&config)?;
            if !value.is_finite() {
                return Err(Error::NonFiniteValue {
                    value,
                    config: config.to_string(),
                });
            }
            let key = space.canonical_key(&config)?;
            if map.insert(key, value).is_some() {
                return Err(Error::InvalidSpace(format!(
                    "duplicate row {i} for configuration {config}"
                )));
            }
        }
        Ok(TabularOracle {
            space,
            rows: map,
            missing,
            label,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn missing_policy(&self) -> MissingPolicy {
        self.missing
    }
}

impl PerformanceOracle for TabularOracle {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    fn evaluate(&self, config: &Configuration) -> Result<f64, Error> {
        let key = self.space.canonical_key(config)?;
        match (self.rows.get(&key), self.missing) {
            (Some(&v), _) => Ok(v),
            (None, MissingPolicy::DefaultValue(v)) => Ok(v),
            (None, MissingPolicy::Error) => Err(Error::MissingRow {
                config: config.to_string(),
            }),
        }
    }
}

/// Synthetic game family with known ground truth: every player is a binary
/// switch and the score is a sum of random interaction coefficients over the
/// switched-on subsets of size at most `k`.
///
/// By construction the interaction decomposition of the induced game is the
/// coefficient table itself, which makes this the reference oracle for
/// testing interaction indices.
#[derive(Debug, Clone)]
pub struct RandomKAdditiveOracle {
    space: ConfigSpace,
    k: usize,
    coefficients: Vec<f64>,
    table: Vec<f64>,
}

impl RandomKAdditiveOracle {
    /// Coefficients for subsets of size `<= k` are drawn i.i.d. uniform on
    /// `[-1, 1]` from `rng`, in ascending mask order; larger subsets get 0.
    pub fn new<R: Rng + ?Sized>(space: ConfigSpace, k: usize, rng: &mut R) -> Result<Self, Error> {
        let n = space.n();
        if k == 0 || k > n {
            return Err(Error::OrderOutOfRange { order: k, n });
        }
        for p in space.players() {
            match &p.domain {
                HyperparameterDomain::Discrete { values } if values.len() == 2 => {}
                _ => {
                    return Err(Error::InvalidSpace(format!(
                        "player `{}` is not a binary switch",
                        p.name
                    )))
                }
            }
        }
        let mut coefficients = vec![0.0; 1 << n];
        for (mask, c) in coefficients.iter_mut().enumerate() {
            if (mask as u32).count_ones() as usize <= k {
                *c = rng.random_range(-1.0..1.0);
            }
        }
        let mut table = coefficients.clone();
        zeta_in_place(&mut table);
        Ok(RandomKAdditiveOracle {
            space,
            k,
            coefficients,
            table,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// The ground-truth interaction coefficients, indexed by subset mask.
    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    /// Scores by switched-on mask: `table[m] = sum of coefficients over
    /// submasks of m`.
    pub fn table(&self) -> &[f64] {
        &self.table
    }

    /// Mask of coordinates set to the second ("on") atom of their domain.
    pub fn on_mask(&self, config: &Configuration) -> Result<u32, Error> {
        if config.len() != self.space.n() {
            return Err(Error::DimensionMismatch {
                expected: self.space.n(),
                got: config.len(),
            });
        }
        let mut mask = 0u32;
        for (i, (p, a)) in self.space.players().iter().zip(config.iter()).enumerate() {
            let HyperparameterDomain::Discrete { values } = &p.domain else {
                unreachable!("validated binary")
            };
            if a == &values[1] {
                mask |= 1 << i;
            } else if a != &values[0] {
                return Err(Error::NotAMember {
                    index: i,
                    player: p.name.clone(),
                    value: a.to_string(),
                });
            }
        }
        Ok(mask)
    }
}

impl PerformanceOracle for RandomKAdditiveOracle {
    fn space(&self) -> &ConfigSpace {
        &self.space
    }

    fn evaluate(&self, config: &Configuration) -> Result<f64, Error> {
        Ok(self.table[self.on_mask(config)? as usize])
    }
}

/// Wraps an oracle with bounded noise: each distinct configuration gets one
/// fixed offset, uniform on `[-epsilon, epsilon]`, derived from the seed and
/// the configuration key. Evaluation order and thread count do not matter.
#[derive(Debug, Clone)]
pub struct PerturbedOracle<O> {
    base: O,
    epsilon: f64,
    seed: u64,
}

impl<O: PerformanceOracle> PerturbedOracle<O> {
    pub fn new(base: O, epsilon: f64, seed: u64) -> Result<Self, Error> {
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidPlan(format!(
                "perturbation bound must be finite and non-negative, got {epsilon}"
            )));
        }
        Ok(PerturbedOracle {
            base,
            epsilon,
            seed,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn base(&self) -> &O {
        &self.base
    }
}

impl<O: PerformanceOracle> PerformanceOracle for PerturbedOracle<O> {
    fn space(&self) -> &ConfigSpace {
        self.base.space()
    }

    fn label(&self) -> Option<&str> {
        self.base.label()
    }

    fn evaluate(&self, config: &Configuration) -> Result<f64, Error> {
        let value = self.base.evaluate(config)?;
        if self.epsilon == 0.0 {
            return Ok(value);
        }
        let key = self.space().canonical_key(config)?;
        let mut rng = stream(self.seed, &[SALT_PERTURB, stable_hash64(&key)]);
        Ok(value + rng.random_range(-self.epsilon..=self.epsilon))
    }
}

/// Several oracles over one shared configuration space, one per dataset.
pub struct DatasetCollection {
    oracles: Vec<Box<dyn PerformanceOracle>>,
    labels: Vec<String>,
}

impl DatasetCollection {
    /// Oracles must agree on the space. Unlabeled members get `dataset-{i}`.
    pub fn new(oracles: Vec<Box<dyn PerformanceOracle>>) -> Result<Self, Error> {
        let Some(first) = oracles.first() else {
            return Err(Error::InvalidSpace("dataset collection is empty".into()));
        };
        for (i, o) in oracles.iter().enumerate().skip(1) {
            if o.space() != first.space() {
                return Err(Error::GameMismatch(format!(
                    "dataset {i} uses a different configuration space"
                )));
            }
        }
        let labels = oracles
            .iter()
            .enumerate()
            .map(|(i, o)| o.label().map(str::to_owned).unwrap_or(format!("dataset-{i}")))
            .collect();
        Ok(DatasetCollection { oracles, labels })
    }

    pub fn len(&self) -> usize {
        self.oracles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.oracles.is_empty()
    }

    pub fn space(&self) -> &ConfigSpace {
        self.oracles[0].space()
    }

    pub fn get(&self, i: usize) -> &dyn PerformanceOracle {
        &*self.oracles[i]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn iter(&self) -> impl Iterator<Item = &dyn PerformanceOracle> {
        self.oracles.iter().map(|o| &**o)
    }
}

/// Evaluates and rejects non-finite scores at the oracle boundary, naming
/// the offending configuration.
pub(crate) fn finite_eval(
    oracle: &dyn PerformanceOracle,
    config: &Configuration,
) -> Result<f64, Error> {
    let value = oracle.evaluate(config)?;
    if !value.is_finite() {
        return Err(Error::NonFiniteValue {
            value,
            config: config.to_string(),
        });
    }
    Ok(value)
}

/// Binary switch space (`{0, 1}` per player) used by synthetic games.
pub fn binary_switch_space(n: usize) -> Result<ConfigSpace, Error> {
    let players = (0..n)
        .map(|i| {
            crate::space::Player::new(
                format!("x{i}"),
                HyperparameterDomain::discrete([0, 1]),
            )
        })
        .collect();
    let default = (0..n).map(|_| Atom::Int(0)).collect();
    ConfigSpace::new(players, default)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coalition::submasks;
    use crate::config;
    use crate::space::Player;

    fn grid_space() -> ConfigSpace {
        ConfigSpace::new(
            vec![
                Player::new("a", HyperparameterDomain::discrete([0, 1])),
                Player::new("b", HyperparameterDomain::discrete([0, 1])),
            ],
            config![0, 0],
        )
        .unwrap()
    }

    #[test]
    fn indicator_sum_counts_matches() {
        let space = grid_space();
        let oracle = IndicatorSumOracle::new(space, config![1, 1]).unwrap();
        assert_eq!(oracle.evaluate(&config![0, 0]).unwrap(), 0.0);
        assert_eq!(oracle.evaluate(&config![1, 0]).unwrap(), 1.0);
        assert_eq!(oracle.evaluate(&config![0, 1]).unwrap(), 1.0);
        assert_eq!(oracle.evaluate(&config![1, 1]).unwrap(), 2.0);
    }

    #[test]
    fn product_indicator_is_all_or_nothing() {
        let space = grid_space();
        let oracle = ProductIndicatorOracle::new(space, config![0, 0]).unwrap();
        assert_eq!(oracle.evaluate(&config![0, 0]).unwrap(), 1.0);
        assert_eq!(oracle.evaluate(&config![1, 0]).unwrap(), 0.0);
        assert_eq!(oracle.evaluate(&config![0, 1]).unwrap(), 0.0);
        assert_eq!(oracle.evaluate(&config![1, 1]).unwrap(), 0.0);
    }

    #[test]
    fn oracles_reject_non_member_references() {
        let space = grid_space();
        assert!(IndicatorSumOracle::new(space.clone(), config![7, 0]).is_err());
        assert!(ProductIndicatorOracle::new(space, config![0]).is_err());
    }

    #[test]
    fn tabular_lookup_and_missing_policies() {
        let space = grid_space();
        let rows = vec![(config![0, 0], 0.25), (config![1, 1], 0.75)];
        let strict =
            TabularOracle::from_rows(space.clone(), rows.clone(), MissingPolicy::Error, None)
                .unwrap();
        assert_eq!(strict.evaluate(&config![1, 1]).unwrap(), 0.75);
        assert!(matches!(
            strict.evaluate(&config![0, 1]),
            Err(Error::MissingRow { .. })
        ));

        let lenient =
            TabularOracle::from_rows(space, rows, MissingPolicy::DefaultValue(-1.0), None).unwrap();
        assert_eq!(lenient.evaluate(&config![0, 1]).unwrap(), -1.0);
    }

    #[test]
    fn tabular_rejects_bad_rows() {
        let space = grid_space();
        let dup = TabularOracle::from_rows(
            space.clone(),
            vec![(config![0, 0], 0.1), (config![0, 0], 0.2)],
            MissingPolicy::Error,
            None,
        );
        assert!(dup.is_err());

        let non_member = TabularOracle::from_rows(
            space.clone(),
            vec![(config![5, 0], 0.1)],
            MissingPolicy::Error,
            None,
        );
        assert!(matches!(non_member, Err(Error::NotAMember { .. })));

        let non_finite = TabularOracle::from_rows(
            space,
            vec![(config![0, 0], f64::NAN)],
            MissingPolicy::Error,
            None,
        );
        assert!(matches!(non_finite, Err(Error::NonFiniteValue { .. })));
    }

    #[test]
    fn tabular_keys_continuous_coordinates_numerically() {
        let space = ConfigSpace::new(
            vec![Player::new("lr", HyperparameterDomain::continuous(0.0, 2.0))],
            config![1.0],
        )
        .unwrap();
        let oracle = TabularOracle::from_rows(
            space,
            vec![(config![1], 0.5)],
            MissingPolicy::Error,
            None,
        )
        .unwrap();
        // Row was stored with Int(1); numeric keying finds it via Real(1.0).
        assert_eq!(oracle.evaluate(&config![1.0]).unwrap(), 0.5);
    }

    #[test]
    fn k_additive_matches_naive_coefficient_sums() {
        let space = binary_switch_space(5).unwrap();
        let mut rng = crate::rng::stream(9, &[]);
        let oracle = RandomKAdditiveOracle::new(space, 2, &mut rng).unwrap();

        for (mask, c) in oracle.coefficients().iter().enumerate() {
            if (mask as u32).count_ones() > 2 {
                assert_eq!(*c, 0.0, "coefficients above order k must vanish");
            }
        }
        for mask in 0u32..32 {
            let cfg: Configuration = (0..5)
                .map(|i| Atom::Int(((mask >> i) & 1) as i64))
                .collect();
            let naive: f64 = submasks(mask)
                .map(|s| oracle.coefficients()[s as usize])
                .sum();
            let got = oracle.evaluate(&cfg).unwrap();
            assert!((got - naive).abs() < 1e-12, "mask {mask}: {got} vs {naive}");
        }
    }

    #[test]
    fn k_additive_requires_binary_switches() {
        let space = ConfigSpace::new(
            vec![Player::new("a", HyperparameterDomain::discrete([0, 1, 2]))],
            config![0],
        )
        .unwrap();
        let mut rng = crate::rng::stream(0, &[]);
        assert!(RandomKAdditiveOracle::new(space, 1, &mut rng).is_err());
    }

    #[test]
    fn perturbation_is_bounded_and_stable() {
        let space = grid_space();
        let base = IndicatorSumOracle::new(space, config![1, 1]).unwrap();
        let noisy = PerturbedOracle::new(base, 0.125, 7).unwrap();

        let mut seen_nonzero = false;
        for mask in 0u32..4 {
            let cfg = config![(mask & 1) as i64, ((mask >> 1) & 1) as i64];
            let clean = (mask.count_ones()) as f64;
            let a = noisy.evaluate(&cfg).unwrap();
            let b = noisy.evaluate(&cfg).unwrap();
            assert_eq!(a.to_bits(), b.to_bits(), "same configuration, same value");
            assert!((a - clean).abs() <= 0.125);
            seen_nonzero |= a != clean;
        }
        assert!(seen_nonzero, "noise with epsilon > 0 should show up somewhere");

        let again = PerturbedOracle::new(
            IndicatorSumOracle::new(grid_space(), config![1, 1]).unwrap(),
            0.125,
            7,
        )
        .unwrap();
        assert_eq!(
            again.evaluate(&config![0, 1]).unwrap().to_bits(),
            noisy.evaluate(&config![0, 1]).unwrap().to_bits(),
            "noise depends only on seed and configuration"
        );
    }

    #[test]
    fn collection_requires_one_shared_space() {
        let a: Box<dyn PerformanceOracle> =
            Box::new(IndicatorSumOracle::new(grid_space(), config![1, 1]).unwrap());
        let b: Box<dyn PerformanceOracle> =
            Box::new(ProductIndicatorOracle::new(grid_space(), config![0, 0]).unwrap());
        let c = DatasetCollection::new(vec![a, b]).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.labels(), ["dataset-0", "dataset-1"]);

        let other_space = ConfigSpace::new(
            vec![Player::new("z", HyperparameterDomain::discrete([0, 1]))],
            config![0],
        )
        .unwrap();
        let d: Box<dyn PerformanceOracle> =
            Box::new(IndicatorSumOracle::new(grid_space(), config![1, 1]).unwrap());
        let e: Box<dyn PerformanceOracle> =
            Box::new(IndicatorSumOracle::new(other_space, config![1]).unwrap());
        assert!(DatasetCollection::new(vec![d, e]).is_err());
        assert!(DatasetCollection::new(vec![]).is_err());
    }
}
