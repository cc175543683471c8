//! Interaction indices: decompositions of a game into per-coalition scores.
//!
//! Three families share one container:
//!
//! * the interaction decomposition (exact, order `n`): the unique additive
//!   decomposition `v(S) = sum over L subset of S of m(L)`;
//! * Shapley values (order 1): per-player attributions, computed both from
//!   the decomposition and from weighted marginal contributions so the two
//!   routes can cross-check each other;
//! * faithful interaction scores of order `k`: the weighted least-squares
//!   projection of the game onto coalitions of size at most `k`, with the
//!   empty and grand coalition reproduced exactly as hard constraints.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use crate::coalition::{submasks, Coalition};
use crate::error::Error;
use crate::game::GameValues;
use crate::solve::solve_constrained_normal_equations;
use crate::transform::{moebius_in_place, zeta_in_place};

/// Reconstructing a game from its full decomposition is exact to this bound.
pub const ROUND_TRIP_TOLERANCE: f64 = 1e-12;

/// The two Shapley routes agree to this bound.
pub const ROUTE_AGREEMENT_TOLERANCE: f64 = 1e-10;

/// Least-squares identities (order-1 vs Shapley, order-n vs decomposition)
/// hold to this bound.
pub const SOLVER_TOLERANCE: f64 = 1e-9;

/// Largest basis (number of unknowns) the least-squares index will solve.
const FSII_BASIS_CAP: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IndexKind {
    Moebius,
    ShapleyValue,
    Fsii,
}

impl IndexKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            IndexKind::Moebius => "moebius",
            IndexKind::ShapleyValue => "sv",
            IndexKind::Fsii => "fsii",
        }
    }

    pub fn parse(s: &str) -> Option<IndexKind> {
        match s {
            "moebius" => Some(IndexKind::Moebius),
            "sv" => Some(IndexKind::ShapleyValue),
            "fsii" => Some(IndexKind::Fsii),
            _ => None,
        }
    }
}

/// Scores for every non-empty coalition up to a maximum order, plus the
/// empty coalition's score kept separately as `baseline_value`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionValues {
    kind: IndexKind,
    order: usize,
    n: usize,
    baseline_value: f64,
    player_names: Vec<String>,
    scores: BTreeMap<u32, f64>,
}

impl InteractionValues {
    pub(crate) fn from_raw(
        kind: IndexKind,
        order: usize,
        baseline_value: f64,
        player_names: Vec<String>,
        scores: BTreeMap<u32, f64>,
    ) -> Result<Self, Error> {
        let n = player_names.len();
        if n == 0 || n > crate::coalition::MAX_PLAYERS {
            return Err(Error::InvalidSpace(format!(
                "player count must be in 1..={}, got {n}",
                crate::coalition::MAX_PLAYERS
            )));
        }
        if order == 0 || order > n {
            return Err(Error::OrderOutOfRange { order, n });
        }
        for &mask in scores.keys() {
            if mask == 0 || mask >= (1 << n) as u32 {
                return Err(Error::MaskOutOfRange { mask, n });
            }
            if mask.count_ones() as usize > order {
                return Err(Error::OrderOutOfRange {
                    order: mask.count_ones() as usize,
                    n: order,
                });
            }
        }
        Ok(InteractionValues {
            kind,
            order,
            n,
            baseline_value,
            player_names,
            scores,
        })
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    /// Maximum coalition size carrying a score.
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Score of the empty coalition (the reconstruction offset).
    pub fn baseline_value(&self) -> f64 {
        self.baseline_value
    }

    pub fn player_names(&self) -> &[String] {
        &self.player_names
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Score of `s`; the empty coalition returns `baseline_value`,
    /// coalitions above the order return 0.
    pub fn get(&self, s: Coalition) -> Result<f64, Error> {
        if s.n() != self.n {
            return Err(Error::CoalitionMismatch {
                left: s.n(),
                right: self.n,
            });
        }
        if s.is_empty() {
            return Ok(self.baseline_value);
        }
        Ok(self.scores.get(&s.mask()).copied().unwrap_or(0.0))
    }

    /// Non-empty coalitions in ascending mask order.
    pub fn iter(&self) -> impl Iterator<Item = (Coalition, f64)> + '_ {
        self.scores
            .iter()
            .map(|(&mask, &v)| (Coalition::from_mask_unchecked(mask, self.n), v))
    }

    /// Per-player view of the singleton scores.
    pub fn singleton_scores(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.scores.get(&(1u32 << i)).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Binomial coefficient as `f64`; exact for every `n <= 20` this crate
/// allows, because all intermediates stay below `2^53`.
pub(crate) fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut r = 1.0;
    for i in 0..k.min(n - k) {
        r = r * (n - i) as f64 / (i + 1) as f64;
    }
    r
}

/// The interaction decomposition of the game: alternating subset sums,
/// computed by the in-place transform in `n * 2^n` additions. Reconstructing
/// the game from the result is exact to [`ROUND_TRIP_TOLERANCE`].
pub fn moebius_transform(game: &GameValues) -> InteractionValues {
    let mut m = game.values().to_vec();
    moebius_in_place(&mut m);
    let scores = m
        .iter()
        .enumerate()
        .skip(1)
        .map(|(mask, &v)| (mask as u32, v))
        .collect();
    InteractionValues {
        kind: IndexKind::Moebius,
        order: game.n(),
        n: game.n(),
        baseline_value: m[0],
        player_names: game.player_names().to_vec(),
        scores,
    }
}

/// Shapley values through the decomposition: each coalition's interaction
/// mass is split equally among its members.
pub fn shapley_values(game: &GameValues) -> InteractionValues {
    let n = game.n();
    let mut m = game.values().to_vec();
    moebius_in_place(&mut m);
    let mut phi = vec![0.0; n];
    for (mask, &value) in m.iter().enumerate().skip(1) {
        let share = value / mask.count_ones() as f64;
        let mut bits = mask;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            phi[i] += share;
            bits &= bits - 1;
        }
    }
    singleton_index(game, phi)
}

/// Shapley values through weighted marginal contributions, the independent
/// second route: `phi(i) = sum over T without i of
/// (v(T + i) - v(T)) / (n * C(n-1, |T|))`. Agrees with [`shapley_values`]
/// to [`ROUTE_AGREEMENT_TOLERANCE`].
pub fn shapley_values_marginal(game: &GameValues) -> InteractionValues {
    let n = game.n();
    let v = game.values();
    let weights: Vec<f64> = (0..n)
        .map(|t| 1.0 / (n as f64 * binomial(n - 1, t)))
        .collect();
    let mut phi = vec![0.0; n];
    for (i, item) in phi.iter_mut().enumerate() {
        let bit = 1usize << i;
        let mut acc = 0.0;
        for mask in 0..v.len() {
            if mask & bit == 0 {
                acc += weights[mask.count_ones() as usize] * (v[mask | bit] - v[mask]);
            }
        }
        *item = acc;
    }
    singleton_index(game, phi)
}

fn singleton_index(game: &GameValues, phi: Vec<f64>) -> InteractionValues {
    let scores = phi
        .into_iter()
        .enumerate()
        .map(|(i, v)| (1u32 << i, v))
        .collect();
    InteractionValues {
        kind: IndexKind::ShapleyValue,
        order: 1,
        n: game.n(),
        baseline_value: game.values()[0],
        player_names: game.player_names().to_vec(),
        scores,
    }
}

fn interior_weight(n: usize, t: usize) -> f64 {
    debug_assert!(n >= 2 && t >= 1 && t < n);
    1.0 / binomial(n - 2, t - 1)
}

/// Faithful interaction scores of order `k`: minimizes the weighted squared
/// reconstruction error over the interior coalitions (`1 <= |T| <= n-1`,
/// weight `1 / C(n-2, |T|-1)`), subject to reproducing the empty and grand
/// coalition exactly. Order 1 recovers the Shapley values and order `n` the
/// full decomposition, both to [`SOLVER_TOLERANCE`].
pub fn fsii(game: &GameValues, k: usize) -> Result<InteractionValues, Error> {
    let n = game.n();
    if k == 0 || k > n {
        return Err(Error::OrderOutOfRange { order: k, n });
    }
    if k == n {
        // Full order interpolates the game with zero residual, and the
        // grand-coalition constraint pins down the one leftover degree of
        // freedom, so the unique optimum is the interaction decomposition
        // itself. Computing it directly avoids a needlessly ill-conditioned
        // solve.
        let mut iv = moebius_transform(game);
        iv.kind = IndexKind::Fsii;
        return Ok(iv);
    }
    let v = game.values();
    let full = v.len() - 1;
    let v0 = v[0];

    let mut basis: Vec<u32> = (1..=full as u32)
        .filter(|m| m.count_ones() as usize <= k)
        .collect();
    basis.sort_by_key(|m| (m.count_ones(), *m));
    let p = basis.len();
    if p > FSII_BASIS_CAP {
        return Err(Error::InvalidPlan(format!(
            "order {k} over {n} players needs {p} unknowns, cap is {FSII_BASIS_CAP}"
        )));
    }
    // Gram entries depend only on the size of the union of the two basis
    // coalitions: G[a][b] = sum over interior supersets T of (a union b) of
    // the interior weight, which collapses to a one-dimensional table.
    let max_union = (2 * k).min(n);
    let mut h = vec![0.0; max_union + 1];
    for (u, item) in h.iter_mut().enumerate() {
        let mut acc = 0.0;
        for t in u.max(1)..n {
            acc += binomial(n - u, t - u) * interior_weight(n, t);
        }
        *item = acc;
    }
    let gram = DMatrix::from_fn(p, p, |a, b| {
        h[(basis[a] | basis[b]).count_ones() as usize]
    });

    let mut rhs = DVector::zeros(p);
    for (t_mask, &vt) in v.iter().enumerate().take(full).skip(1) {
        let wt = interior_weight(n, t_mask.count_ones() as usize);
        let y = vt - v0;
        // Scatter into every basis coalition contained in T.
        for (c, &s) in basis.iter().enumerate() {
            if s as usize & !t_mask == 0 {
                rhs[c] += wt * y;
            }
        }
    }
    let constraint = DVector::from_element(p, 1.0);
    let x = solve_constrained_normal_equations(&gram, &rhs, &constraint, v[full] - v0)?;

    let scores = basis.iter().enumerate().map(|(c, &m)| (m, x[c])).collect();
    Ok(InteractionValues {
        kind: IndexKind::Fsii,
        order: k,
        n,
        baseline_value: v0,
        player_names: game.player_names().to_vec(),
        scores,
    })
}

/// Value the index assigns to coalition `s`: the sum of scores over stored
/// subsets of `s`, plus the baseline.
pub fn reconstruct(iv: &InteractionValues, s: Coalition) -> Result<f64, Error> {
    if s.n() != iv.n {
        return Err(Error::CoalitionMismatch {
            left: s.n(),
            right: iv.n,
        });
    }
    let mut acc = iv.baseline_value;
    for (&mask, &value) in &iv.scores {
        if mask & !s.mask() == 0 {
            acc += value;
        }
    }
    Ok(acc)
}

/// Dense reconstruction over all `2^n` coalitions via the subset-sum
/// transform.
pub fn reconstruct_table(iv: &InteractionValues) -> Vec<f64> {
    let mut table = vec![0.0; 1 << iv.n];
    table[0] = iv.baseline_value;
    for (&mask, &value) in &iv.scores {
        table[mask as usize] = value;
    }
    zeta_in_place(&mut table);
    table
}

/// Weighted reconstruction error of an index against its game.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Faithfulness {
    /// Weighted sum of squared interior residuals.
    pub residual: f64,
    /// 1 minus residual over total interior variation; 1 for a perfect fit.
    pub r_squared: f64,
}

/// Measures how well `iv` reconstructs `game` on the interior coalitions
/// (`1 <= |T| <= n-1`), with the same weights the least-squares index
/// minimizes. The empty and grand coalition are excluded: indices reproduce
/// them by construction, so they carry no information about fit quality.
pub fn faithfulness(game: &GameValues, iv: &InteractionValues) -> Result<Faithfulness, Error> {
    if iv.n != game.n() {
        return Err(Error::CoalitionMismatch {
            left: iv.n,
            right: game.n(),
        });
    }
    let v = game.values();
    let recon = reconstruct_table(iv);
    let full = v.len() - 1;
    let n = game.n();

    let mut residual = 0.0;
    let mut weight_sum = 0.0;
    let mut weighted_value_sum = 0.0;
    for mask in 1..full {
        let w = interior_weight(n, mask.count_ones() as usize);
        let d = v[mask] - recon[mask];
        residual += w * d * d;
        weight_sum += w;
        weighted_value_sum += w * v[mask];
    }
    let total = if weight_sum > 0.0 {
        let mean = weighted_value_sum / weight_sum;
        (1..full)
            .map(|mask| {
                let w = interior_weight(n, mask.count_ones() as usize);
                let d = v[mask] - mean;
                w * d * d
            })
            .sum::<f64>()
    } else {
        0.0
    };
    let r_squared = if total > 0.0 {
        1.0 - residual / total
    } else if residual == 0.0 {
        // No interior variation to explain: a perfect reconstruction counts
        // as a perfect fit, anything else as no fit.
        1.0
    } else {
        0.0
    };
    Ok(Faithfulness {
        residual,
        r_squared,
    })
}

/// Per-order summary of an interaction decomposition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStratum {
    pub order: usize,
    pub count: usize,
    pub max_abs: f64,
    pub mean_abs: f64,
}

/// Groups the decomposition's scores by coalition size, reporting how much
/// interaction mass lives at each order. Requires a full decomposition.
pub fn moebius_strata(iv: &InteractionValues) -> Result<Vec<OrderStratum>, Error> {
    if iv.kind != IndexKind::Moebius {
        return Err(Error::IndexKindMismatch {
            expected: "moebius".into(),
            got: iv.kind.as_str().into(),
        });
    }
    let mut strata = Vec::with_capacity(iv.n);
    for order in 1..=iv.n {
        let mut count = 0usize;
        let mut max_abs = 0.0f64;
        let mut sum_abs = 0.0f64;
        for (&mask, &value) in &iv.scores {
            if mask.count_ones() as usize == order {
                count += 1;
                max_abs = max_abs.max(value.abs());
                sum_abs += value.abs();
            }
        }
        strata.push(OrderStratum {
            order,
            count,
            max_abs,
            mean_abs: if count == 0 { 0.0 } else { sum_abs / count as f64 },
        });
    }
    Ok(strata)
}

/// Discrete derivative of the game along `s`, evaluated at a disjoint base
/// coalition `t`: the alternating sum `sum over L subset of s of
/// (-1)^(|s| - |L|) v(t + L)`. For `s = {i}` this is the marginal
/// contribution of `i` at `t`.
pub fn discrete_derivative(game: &GameValues, s: Coalition, t: Coalition) -> Result<f64, Error> {
    for c in [&s, &t] {
        if c.n() != game.n() {
            return Err(Error::CoalitionMismatch {
                left: c.n(),
                right: game.n(),
            });
        }
    }
    if !s.is_disjoint_from(&t)? {
        return Err(Error::NotDisjoint(format!("s = {s}, t = {t}")));
    }
    let v = game.values();
    let s_size = s.len() as u32;
    let mut acc = 0.0;
    for sub in submasks(s.mask()) {
        let sign = if (s_size - sub.count_ones()).is_multiple_of(2) {
            1.0
        } else {
            -1.0
        };
        acc += sign * v[(t.mask() | sub) as usize];
    }
    Ok(acc)
}
