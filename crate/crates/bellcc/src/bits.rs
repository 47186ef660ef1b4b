//! Index conventions shared across the crate.
//!
//! Both state indices and setting indices pack one bit per party with
//! party 0 in the most significant position. All modules must go through
//! these helpers so the convention lives in exactly one place.

/// Bit of `index` belonging to `party` (0-based, most significant first).
#[inline]
pub(crate) fn party_bit(index: usize, party: usize, n: usize) -> usize {
    debug_assert!(party < n);
    (index >> (n - 1 - party)) & 1
}

/// Sign of the product of the ±1 outcomes encoded by `index`
/// (bit 0 encodes +1, bit 1 encodes −1).
#[inline]
pub(crate) fn parity_sign(index: usize) -> i8 {
    if index.count_ones() % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Decode `index` into a ±1 vector, party 0 first.
pub(crate) fn outcome_vector(index: usize, n: usize) -> Vec<i8> {
    (0..n)
        .map(|p| if party_bit(index, p, n) == 0 { 1 } else { -1 })
        .collect()
}
