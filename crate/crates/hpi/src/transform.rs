//! In-place subset transforms on dense coalition tables.
//!
//! Tables are indexed by coalition mask (length `2^n`). Both transforms run
//! in `n * 2^n` additions, one bit layer at a time.

/// Subset sums: `out[m] = sum over submasks s of m of values[s]`.
pub(crate) fn zeta_in_place(values: &mut [f64]) {
    let n = log2_len(values.len());
    for bit in 0..n {
        let step = 1usize << bit;
        for mask in 0..values.len() {
            if mask & step != 0 {
                values[mask] += values[mask ^ step];
            }
        }
    }
}

/// Inverse of [`zeta_in_place`]: alternating subset sums
/// `out[m] = sum over submasks s of m of (-1)^(|m|-|s|) values[s]`.
pub(crate) fn moebius_in_place(values: &mut [f64]) {
    let n = log2_len(values.len());
    for bit in 0..n {
        let step = 1usize << bit;
        for mask in 0..values.len() {
            if mask & step != 0 {
                values[mask] -= values[mask ^ step];
            }
        }
    }
}

fn log2_len(len: usize) -> usize {
    assert!(len.is_power_of_two(), "table length must be a power of two");
    len.trailing_zeros() as usize
}
