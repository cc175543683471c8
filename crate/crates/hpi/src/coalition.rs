//! Player subsets as bitmasks.

use std::fmt;

use crate::error::Error;

/// Maximum number of players a space may have. Game tables are dense with
/// `2^n` entries, so this caps a table at ~8 MiB of `f64`s.
pub const MAX_PLAYERS: usize = 20;

/// A subset of the players `{0, .., n-1}`, stored as a bitmask.
///
/// A coalition remembers the size of the player set it came from, so
/// complements and full-set checks are well defined and mixing coalitions
/// from different spaces is an error.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Coalition {
    mask: u32,
    n: u8,
}

impl Coalition {
    pub fn empty(n: usize) -> Result<Self, Error> {
        Self::from_mask(0, n)
    }

    pub fn full(n: usize) -> Result<Self, Error> {
        check_n(n)?;
        Ok(Coalition {
            mask: full_mask(n),
            n: n as u8,
        })
    }

    /// Builds a coalition from a raw bitmask over `n` players. Bits at or
    /// above position `n` are rejected.
    pub fn from_mask(mask: u32, n: usize) -> Result<Self, Error> {
        check_n(n)?;
        if mask & !full_mask(n) != 0 {
            return Err(Error::MaskOutOfRange { mask, n });
        }
        Ok(Coalition { mask, n: n as u8 })
    }

    pub fn from_members<I: IntoIterator<Item = usize>>(members: I, n: usize) -> Result<Self, Error> {
        check_n(n)?;
        let mut mask = 0u32;
        for i in members {
            if i >= n {
                return Err(Error::PlayerOutOfRange { index: i, n });
            }
            mask |= 1 << i;
        }
        Ok(Coalition { mask, n: n as u8 })
    }

    pub(crate) fn from_mask_unchecked(mask: u32, n: usize) -> Self {
        debug_assert!((1..=MAX_PLAYERS).contains(&n) && mask & !full_mask(n) == 0);
        Coalition { mask, n: n as u8 }
    }

    pub fn mask(&self) -> u32 {
        self.mask
    }

    /// Size of the player set this coalition lives in.
    pub fn n(&self) -> usize {
        self.n as usize
    }

    /// Number of members.
    pub fn len(&self) -> usize {
        self.mask.count_ones() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn is_full(&self) -> bool {
        self.mask == full_mask(self.n as usize)
    }

    pub fn contains(&self, player: usize) -> bool {
        player < self.n as usize && self.mask & (1 << player) != 0
    }

    /// Members in ascending order.
    pub fn members(&self) -> impl Iterator<Item = usize> + '_ {
        let mask = self.mask;
        (0..self.n as usize).filter(move |i| mask & (1 << i) != 0)
    }

    pub fn insert(&self, player: usize) -> Result<Self, Error> {
        if player >= self.n as usize {
            return Err(Error::PlayerOutOfRange {
                index: player,
                n: self.n as usize,
            });
        }
        Ok(Coalition {
            mask: self.mask | (1 << player),
            n: self.n,
        })
    }

    pub fn remove(&self, player: usize) -> Result<Self, Error> {
        if player >= self.n as usize {
            return Err(Error::PlayerOutOfRange {
                index: player,
                n: self.n as usize,
            });
        }
        Ok(Coalition {
            mask: self.mask & !(1 << player),
            n: self.n,
        })
    }

    pub fn union(&self, other: &Coalition) -> Result<Self, Error> {
        self.check_same(other)?;
        Ok(Coalition {
            mask: self.mask | other.mask,
            n: self.n,
        })
    }

    pub fn intersection(&self, other: &Coalition) -> Result<Self, Error> {
        self.check_same(other)?;
        Ok(Coalition {
            mask: self.mask & other.mask,
            n: self.n,
        })
    }

    pub fn difference(&self, other: &Coalition) -> Result<Self, Error> {
        self.check_same(other)?;
        Ok(Coalition {
            mask: self.mask & !other.mask,
            n: self.n,
        })
    }

    pub fn complement(&self) -> Self {
        Coalition {
            mask: full_mask(self.n as usize) & !self.mask,
            n: self.n,
        }
    }

    pub fn is_subset_of(&self, other: &Coalition) -> Result<bool, Error> {
        self.check_same(other)?;
        Ok(self.mask & !other.mask == 0)
    }

    pub fn is_disjoint_from(&self, other: &Coalition) -> Result<bool, Error> {
        self.check_same(other)?;
        Ok(self.mask & other.mask == 0)
    }

    fn check_same(&self, other: &Coalition) -> Result<(), Error> {
        if self.n != other.n {
            return Err(Error::CoalitionMismatch {
                left: self.n as usize,
                right: other.n as usize,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Coalition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

fn check_n(n: usize) -> Result<(), Error> {
    if n == 0 || n > MAX_PLAYERS {
        return Err(Error::InvalidSpace(format!(
            "player count must be in 1..={MAX_PLAYERS}, got {n}"
        )));
    }
    Ok(())
}

fn full_mask(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// All `2^n` coalitions of `n` players in ascending mask order, so the
/// `i`-th item has mask `i`. Game tables are indexed the same way.
pub fn enumerate_coalitions(n: usize) -> Result<impl Iterator<Item = Coalition>, Error> {
    check_n(n)?;
    Ok((0..1u64 << n).map(move |mask| Coalition::from_mask_unchecked(mask as u32, n)))
}

/// All submasks of `mask`, including `0` and `mask` itself.
pub(crate) fn submasks(mask: u32) -> impl Iterator<Item = u32> {
    let mut sub = mask;
    let mut done = false;
    std::iter::from_fn(move || {
        if done {
            return None;
        }
        let cur = sub;
        if sub == 0 {
            done = true;
        } else {
            sub = (sub - 1) & mask;
        }
        Some(cur)
    })
}
