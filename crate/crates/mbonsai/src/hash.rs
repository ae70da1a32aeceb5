//! The multiplicative hash family `h(x) = (a*x mod p) mod M` with
//! quotienting.
//!
//! For a table of capacity `M` over keys `0..u`, the prime `p` is the
//! smallest prime above `u` (always at most `2u`), and the multiplier `a` is
//! drawn uniformly from `1..p`. A key splits into an initial address
//! `h(x) = (a*x mod p) mod M` and a quotient `q(x) = (a*x mod p) / M`;
//! together they determine `a*x mod p` and hence `x`, so the pair can stand
//! in for the key in a table cell. The family is 2-universal, not fully
//! random, but behaves close to random in practice.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

/// Largest supported universe; keeps `2u` and `p` inside u64.
pub const MAX_UNIVERSE: u64 = 1 << 62;

#[inline]
fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// Deterministic Miller-Rabin, valid for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let s = (n - 1).trailing_zeros();
    let d = (n - 1) >> s;
    // This witness set decides primality for every n < 3.3 * 10^24.
    'witness: for &a in &[2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Smallest prime strictly above `u`. By Bertrand's postulate it is at most
/// `2u` for `u >= 2` (and 2 for `u = 1`).
pub fn find_prime_above(u: u64) -> Result<u64> {
    if u >= MAX_UNIVERSE {
        return Err(Error::capacity(format!(
            "universe {u} exceeds the supported width ({MAX_UNIVERSE})"
        )));
    }
    let mut p = u + 1;
    if p <= 2 {
        return Ok(2);
    }
    if p.is_multiple_of(2) {
        p += 1;
    }
    while !is_prime(p) {
        p += 2;
    }
    Ok(p)
}

/// A sampled member of the quotienting hash family.
///
/// Immutable after creation; freely shareable across readers.
#[derive(Clone, Debug)]
pub struct QuotientHash {
    a: u64,
    a_inv: u64,
    p: u64,
    m: u64,
    u: u64,
}

impl QuotientHash {
    /// Sample a hash for keys `0..u` into a table of `m` slots. Deterministic
    /// for a fixed seed.
    pub fn new(u: u64, m: u64, seed: u64) -> Result<Self> {
        assert!(m >= 1, "table capacity must be at least 1");
        assert!(u >= m, "universe {u} smaller than capacity {m}");
        let p = find_prime_above(u)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = rng.gen_range(1..p);
        Ok(Self::from_parts(a, p, m, u))
    }

    /// Build from explicit parameters (`p` prime, `p > u`, `1 <= a < p`).
    pub fn from_parts(a: u64, p: u64, m: u64, u: u64) -> Self {
        assert!(is_prime(p) && p > u && 1 <= a && a < p && m >= 1 && u >= m);
        // a^(p-2) = a^-1 mod p, used to reconstruct keys from (address, quotient)
        let a_inv = pow_mod(a, p - 2, p);
        QuotientHash { a, a_inv, p, m, u }
    }

    pub fn multiplier(&self) -> u64 {
        self.a
    }

    pub fn prime(&self) -> u64 {
        self.p
    }

    pub fn table_size(&self) -> u64 {
        self.m
    }

    pub fn universe(&self) -> u64 {
        self.u
    }

    /// Upper bound on any quotient: `(p-1) / m`.
    pub fn max_quotient(&self) -> u64 {
        (self.p - 1) / self.m
    }

    /// Split a key into (initial address, quotient).
    #[inline]
    pub fn split(&self, x: u64) -> (u64, u64) {
        assert!(x < self.u, "key {x} outside universe {}", self.u);
        let ax = mul_mod(self.a, x, self.p);
        (ax % self.m, ax / self.m)
    }

    /// Initial address `h(x)`.
    #[inline]
    pub fn initial_address(&self, x: u64) -> u64 {
        self.split(x).0
    }

    /// Does key `x` hash to exactly this (address, quotient) pair?
    #[inline]
    pub fn matches(&self, x: u64, slot: u64, quotient: u64) -> bool {
        self.split(x) == (slot, quotient)
    }

    /// Recover the unique key with the given (address, quotient) pair.
    /// Only valid for pairs produced by [`Self::split`] on a stored key.
    #[inline]
    pub fn reconstruct(&self, slot: u64, quotient: u64) -> u64 {
        debug_assert!(slot < self.m);
        let ax = quotient * self.m + slot;
        debug_assert!(ax < self.p);
        let x = mul_mod(ax, self.a_inv, self.p);
        debug_assert!(x < self.u);
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prime_search() {
        assert_eq!(find_prime_above(10).unwrap(), 11);
        assert_eq!(find_prime_above(2).unwrap(), 3);
        assert_eq!(find_prime_above(100).unwrap(), 101);
        assert_eq!(find_prime_above(1).unwrap(), 2);
        assert!(find_prime_above(MAX_UNIVERSE).is_err());
    }

    #[test]
    fn prime_search_stays_below_double() {
        for u in 2..2000u64 {
            let p = find_prime_above(u).unwrap();
            assert!(p > u && p <= 2 * u, "u={u} p={p}");
            assert!(is_prime(p));
        }
    }

    #[test]
    fn miller_rabin_against_trial_division() {
        fn trial(n: u64) -> bool {
            if n < 2 {
                return false;
            }
            let mut d = 2;
            while d * d <= n {
                if n.is_multiple_of(d) {
                    return false;
                }
                d += 1;
            }
            true
        }
        for n in 0..5000u64 {
            assert_eq!(is_prime(n), trial(n), "n={n}");
        }
        // a few larger known values
        assert!(is_prime(2_147_483_647)); // 2^31 - 1
        assert!(is_prime(67_280_421_310_721));
        assert!(!is_prime((1u64 << 61) - 3));
    }

    #[test]
    fn seeded_draws_are_deterministic() {
        let h1 = QuotientHash::new(100, 10, 99).unwrap();
        let h2 = QuotientHash::new(100, 10, 99).unwrap();
        assert_eq!(h1.multiplier(), h2.multiplier());
        assert_eq!(h1.prime(), h2.prime());

        let h = QuotientHash::new(10, 5, 7).unwrap();
        assert_eq!(h.prime(), 11);
        assert!((1..11).contains(&h.multiplier()));
    }

    #[test]
    fn quotient_bound_at_universe_equal_capacity() {
        for seed in 0..5 {
            let h = QuotientHash::new(64, 64, seed).unwrap();
            assert!(h.max_quotient() <= 1);
            for x in 0..64 {
                assert!(h.split(x).1 <= h.max_quotient());
            }
        }
    }

    #[test]
    fn split_examples() {
        let h = QuotientHash::from_parts(1, 11, 5, 10);
        assert_eq!(h.split(7), (2, 1));
        let h = QuotientHash::from_parts(3, 11, 5, 10);
        assert_eq!(h.split(4), (1, 0));
        assert_eq!(h.split(0), (0, 0));
    }

    #[test]
    fn matches_examples() {
        let h = QuotientHash::from_parts(1, 11, 5, 10);
        let (s, q) = h.split(7);
        assert!(h.matches(7, s, q));
        assert!(!h.matches(7, s, q + 1));
    }

    #[test]
    fn exhaustive_injectivity_small() {
        let h = QuotientHash::new(200, 16, 3).unwrap();
        let mut seen = std::collections::HashSet::new();
        for x in 0..200 {
            let (s, q) = h.split(x);
            assert!(h.matches(x, s, q));
            assert!(seen.insert(q * 16 + s), "collision at x={x}");
            assert_eq!(h.reconstruct(s, q), x);
        }
    }

    #[test]
    fn exhaustive_injectivity_u16_universe() {
        // acceptance criterion 8: exhaustive for u <= 2^16
        for (u, m, seed) in [
            (1u64 << 16, 4096u64, 1u64),
            (40_000, 1000, 2),
            (65_521, 777, 3),
        ] {
            let h = QuotientHash::new(u, m, seed).unwrap();
            let mut seen = vec![false; h.prime() as usize];
            let bound = h.max_quotient();
            for x in 0..u {
                let (s, q) = h.split(x);
                assert!(q <= bound);
                let ax = (q * m + s) as usize;
                assert!(!seen[ax], "collision at x={x}");
                seen[ax] = true;
                assert_eq!(h.reconstruct(s, q), x);
            }
        }
    }
}
