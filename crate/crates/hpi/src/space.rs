//! Configuration spaces: named players with discrete or continuous domains.

use std::fmt;
use std::ops::Index;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::atom::Atom;
use crate::coalition::{Coalition, MAX_PLAYERS};
use crate::error::Error;

/// Domain of one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HyperparameterDomain {
    /// Finite set of atoms; membership is exact structural equality.
    Discrete { values: Vec<Atom> },
    /// Closed interval of reals; membership is numeric, so `Int(1)` lies in
    /// `[0, 2]`. With `log_scale` the uniform distribution is uniform in
    /// `ln(value)`.
    Continuous {
        lower: f64,
        upper: f64,
        #[serde(default)]
        log_scale: bool,
    },
}

impl HyperparameterDomain {
    pub fn discrete<I, A>(values: I) -> Self
    where
        I: IntoIterator<Item = A>,
        A: Into<Atom>,
    {
        HyperparameterDomain::Discrete {
            values: values.into_iter().map(Into::into).collect(),
        }
    }

    pub fn continuous(lower: f64, upper: f64) -> Self {
        HyperparameterDomain::Continuous {
            lower,
            upper,
            log_scale: false,
        }
    }

    pub fn continuous_log(lower: f64, upper: f64) -> Self {
        HyperparameterDomain::Continuous {
            lower,
            upper,
            log_scale: true,
        }
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, HyperparameterDomain::Discrete { .. })
    }

    pub fn contains(&self, atom: &Atom) -> bool {
        match self {
            HyperparameterDomain::Discrete { values } => values.iter().any(|v| v == atom),
            HyperparameterDomain::Continuous { lower, upper, .. } => match atom.as_f64() {
                Some(x) => x.is_finite() && *lower <= x && x <= *upper,
                None => false,
            },
        }
    }

    /// Equality of two atoms as values of this domain: structural for
    /// discrete domains, numeric for continuous ones.
    pub fn atoms_equal(&self, a: &Atom, b: &Atom) -> bool {
        match self {
            HyperparameterDomain::Discrete { .. } => a == b,
            HyperparameterDomain::Continuous { .. } => match (a.as_f64(), b.as_f64()) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            },
        }
    }

    fn validate(&self, player: &str) -> Result<(), Error> {
        match self {
            HyperparameterDomain::Discrete { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidDomain {
                        player: player.to_owned(),
                        reason: "discrete domain has no values".into(),
                    });
                }
                for (i, v) in values.iter().enumerate() {
                    if let Atom::Real(x) = v {
                        if !x.is_finite() {
                            return Err(Error::InvalidDomain {
                                player: player.to_owned(),
                                reason: format!("value {x} is not finite"),
                            });
                        }
                    }
                    if values[..i].contains(v) {
                        return Err(Error::InvalidDomain {
                            player: player.to_owned(),
                            reason: format!("duplicate value {v}"),
                        });
                    }
                }
                Ok(())
            }
            HyperparameterDomain::Continuous {
                lower,
                upper,
                log_scale,
            } => {
                if !lower.is_finite() || !upper.is_finite() || lower >= upper {
                    return Err(Error::InvalidDomain {
                        player: player.to_owned(),
                        reason: format!("invalid interval [{lower}, {upper}]"),
                    });
                }
                if *log_scale && *lower <= 0.0 {
                    return Err(Error::InvalidDomain {
                        player: player.to_owned(),
                        reason: format!("log scale requires a positive lower bound, got {lower}"),
                    });
                }
                Ok(())
            }
        }
    }
}

/// One named hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Player {
    pub name: String,
    pub domain: HyperparameterDomain,
}

impl Player {
    pub fn new(name: impl Into<String>, domain: HyperparameterDomain) -> Self {
        Player {
            name: name.into(),
            domain,
        }
    }
}

/// A full assignment, one atom per player, in player order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration(Vec<Atom>);

impl Configuration {
    pub fn new(values: Vec<Atom>) -> Self {
        Configuration(values)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn values(&self) -> &[Atom] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Atom> {
        self.0.iter()
    }
}

impl Index<usize> for Configuration {
    type Output = Atom;

    fn index(&self, i: usize) -> &Atom {
        &self.0[i]
    }
}

impl From<Vec<Atom>> for Configuration {
    fn from(values: Vec<Atom>) -> Self {
        Configuration(values)
    }
}

impl FromIterator<Atom> for Configuration {
    fn from_iter<I: IntoIterator<Item = Atom>>(iter: I) -> Self {
        Configuration(iter.into_iter().collect())
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Builds a [`Configuration`] from mixed scalar literals:
/// `config![1, 0.5, "adam", true]`.
#[macro_export]
macro_rules! config {
    ($($x:expr),* $(,)?) => {
        $crate::Configuration::from(vec![$($crate::Atom::from($x)),*])
    };
}

#[derive(Serialize, Deserialize, Clone)]
struct SpaceRepr {
    players: Vec<Player>,
    default: Configuration,
}

/// A product space of hyperparameter domains with a designated default
/// configuration. Player count is limited to [`MAX_PLAYERS`] because game
/// tables are dense over all `2^n` coalitions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SpaceRepr", into = "SpaceRepr")]
pub struct ConfigSpace {
    players: Vec<Player>,
    default: Configuration,
}

impl ConfigSpace {
    pub fn new(players: Vec<Player>, default: Configuration) -> Result<Self, Error> {
        if players.is_empty() || players.len() > MAX_PLAYERS {
            return Err(Error::InvalidSpace(format!(
                "player count must be in 1..={MAX_PLAYERS}, got {}",
                players.len()
            )));
        }
        for (i, p) in players.iter().enumerate() {
            if p.name.is_empty() {
                return Err(Error::InvalidSpace(format!("player {i} has an empty name")));
            }
            if players[..i].iter().any(|q| q.name == p.name) {
                return Err(Error::InvalidSpace(format!(
                    "duplicate player name `{}`",
                    p.name
                )));
            }
            p.domain.validate(&p.name)?;
        }
        let space = ConfigSpace { players, default };
        space.check_member(&space.default)?;
        Ok(space)
    }

    pub fn n(&self) -> usize {
        self.players.len()
    }

    pub fn players(&self) -> &[Player] {
        &self.players
    }

    pub fn player(&self, i: usize) -> Result<&Player, Error> {
        self.players.get(i).ok_or(Error::PlayerOutOfRange {
            index: i,
            n: self.players.len(),
        })
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.players.iter().map(|p| p.name.as_str())
    }

    pub fn default_configuration(&self) -> &Configuration {
        &self.default
    }

    /// Checks coordinate-wise membership, naming the first offending
    /// coordinate on failure.
    pub fn check_member(&self, config: &Configuration) -> Result<(), Error> {
        if config.len() != self.players.len() {
            return Err(Error::DimensionMismatch {
                expected: self.players.len(),
                got: config.len(),
            });
        }
        for (i, (p, a)) in self.players.iter().zip(config.iter()).enumerate() {
            if !p.domain.contains(a) {
                return Err(Error::NotAMember {
                    index: i,
                    player: p.name.clone(),
                    value: a.to_string(),
                });
            }
        }
        Ok(())
    }

    pub fn is_member(&self, config: &Configuration) -> bool {
        self.check_member(config).is_ok()
    }

    /// Stable byte key identifying a configuration up to domain equality:
    /// numeric values in continuous coordinates are normalized to their
    /// `f64` bits, discrete coordinates keep structural identity.
    pub(crate) fn canonical_key(&self, config: &Configuration) -> Result<Vec<u8>, Error> {
        if config.len() != self.players.len() {
            return Err(Error::DimensionMismatch {
                expected: self.players.len(),
                got: config.len(),
            });
        }
        let mut buf = Vec::with_capacity(config.len() * 9);
        for (p, a) in self.players.iter().zip(config.iter()) {
            match (&p.domain, a.as_f64()) {
                (HyperparameterDomain::Continuous { .. }, Some(x)) => {
                    Atom::Real(x).write_canonical(&mut buf)
                }
                _ => a.write_canonical(&mut buf),
            }
        }
        Ok(buf)
    }

    /// Number of configurations if every domain is discrete.
    pub fn discrete_cardinality(&self) -> Option<u128> {
        let mut total: u128 = 1;
        for p in &self.players {
            match &p.domain {
                HyperparameterDomain::Discrete { values } => total *= values.len() as u128,
                HyperparameterDomain::Continuous { .. } => return None,
            }
        }
        Some(total)
    }
}

impl TryFrom<SpaceRepr> for ConfigSpace {
    type Error = Error;

    fn try_from(repr: SpaceRepr) -> Result<Self, Error> {
        ConfigSpace::new(repr.players, repr.default)
    }
}

impl From<ConfigSpace> for SpaceRepr {
    fn from(space: ConfigSpace) -> Self {
        SpaceRepr {
            players: space.players,
            default: space.default,
        }
    }
}

/// `target ⊕ baseline` on `s`: coordinates in `s` come from `target`, the
/// rest from `baseline`. Both configurations must have `s.n()` coordinates
/// and are assumed to be members of the same space.
pub fn impute(
    target: &Configuration,
    baseline: &Configuration,
    s: Coalition,
) -> Result<Configuration, Error> {
    for cfg in [target, baseline] {
        if cfg.len() != s.n() {
            return Err(Error::DimensionMismatch {
                expected: s.n(),
                got: cfg.len(),
            });
        }
    }
    Ok((0..s.n())
        .map(|i| {
            if s.contains(i) {
                target[i].clone()
            } else {
                baseline[i].clone()
            }
        })
        .collect())
}

/// Draws one uniform member of the space: discrete coordinates uniform over
/// their values, continuous ones uniform over the interval (in log space
/// when the domain says so).
pub fn sample_configuration<R: Rng + ?Sized>(space: &ConfigSpace, rng: &mut R) -> Configuration {
    space
        .players()
        .iter()
        .map(|p| sample_atom(&p.domain, rng))
        .collect()
}

pub(crate) fn sample_atom<R: Rng + ?Sized>(domain: &HyperparameterDomain, rng: &mut R) -> Atom {
    match domain {
        HyperparameterDomain::Discrete { values } => {
            values[rng.random_range(0..values.len())].clone()
        }
        HyperparameterDomain::Continuous {
            lower,
            upper,
            log_scale,
        } => {
            let x = if *log_scale {
                rng.random_range(lower.ln()..upper.ln()).exp()
            } else {
                rng.random_range(*lower..*upper)
            };
            Atom::Real(x.clamp(*lower, *upper))
        }
    }
}

/// Number of configurations in the sub-grid where only `free` coordinates
/// vary; `None` if a free coordinate is continuous.
pub(crate) fn restricted_cardinality(
    space: &ConfigSpace,
    free: Coalition,
) -> Result<Option<u128>, Error> {
    if free.n() != space.n() {
        return Err(Error::CoalitionMismatch {
            left: free.n(),
            right: space.n(),
        });
    }
    let mut total: u128 = 1;
    for i in free.members() {
        match &space.players()[i].domain {
            HyperparameterDomain::Discrete { values } => total *= values.len() as u128,
            HyperparameterDomain::Continuous { .. } => return Ok(None),
        }
    }
    Ok(Some(total))
}

/// Iterator over all configurations whose coordinates outside `free` are
/// pinned to `fill`. Free coordinates run through their discrete values in
/// odometer order, lowest player index cycling fastest.
pub(crate) struct RestrictedEnumeration<'a> {
    space: &'a ConfigSpace,
    fill: &'a Configuration,
    free: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl<'a> RestrictedEnumeration<'a> {
    pub(crate) fn new(
        space: &'a ConfigSpace,
        free: Coalition,
        fill: &'a Configuration,
    ) -> Result<Self, Error> {
        if fill.len() != space.n() || free.n() != space.n() {
            return Err(Error::DimensionMismatch {
                expected: space.n(),
                got: fill.len().min(free.n()),
            });
        }
        for i in free.members() {
            if !space.players()[i].domain.is_discrete() {
                return Err(Error::ExactUnavailable(format!(
                    "player `{}` has a continuous domain",
                    space.players()[i].name
                )));
            }
        }
        let free: Vec<usize> = free.members().collect();
        Ok(RestrictedEnumeration {
            space,
            fill,
            digits: vec![0; free.len()],
            free,
            done: false,
        })
    }

    fn domain_len(&self, player: usize) -> usize {
        match &self.space.players()[player].domain {
            HyperparameterDomain::Discrete { values } => values.len(),
            HyperparameterDomain::Continuous { .. } => unreachable!("validated discrete"),
        }
    }
}

impl Iterator for RestrictedEnumeration<'_> {
    type Item = Configuration;

    fn next(&mut self) -> Option<Configuration> {
        if self.done {
            return None;
        }
        let mut values: Vec<Atom> = self.fill.values().to_vec();
        for (k, &player) in self.free.iter().enumerate() {
            let HyperparameterDomain::Discrete { values: dom } = &self.space.players()[player].domain
            else {
                unreachable!("validated discrete")
            };
            values[player] = dom[self.digits[k]].clone();
        }
        // Odometer step.
        let mut k = 0;
        loop {
            if k == self.free.len() {
                self.done = true;
                break;
            }
            self.digits[k] += 1;
            if self.digits[k] < self.domain_len(self.free[k]) {
                break;
            }
            self.digits[k] = 0;
            k += 1;
        }
        Some(Configuration::new(values))
    }
}
