//! Prime enumeration, trial-division factorisation and p-adic valuations.
//!
//! Everything here is exact. Factorisation is plain trial division, which is
//! all the rest of the crate needs: positive membership queries find their
//! small prime witness early, and the test inputs stay well inside the range
//! where trial division is instant.

use num_bigint::{BigInt, BigUint};
use num_traits::{One, Signed, Zero};

/// Sieve of Eratosthenes: all primes `<= bound`.
pub fn primes_up_to(bound: u64) -> Vec<u64> {
    if bound < 2 {
        return Vec::new();
    }
    let n = bound as usize;
    let mut composite = vec![false; n + 1];
    let mut out = Vec::new();
    for p in 2..=n {
        if !composite[p] {
            out.push(p as u64);
            let mut q = p * p;
            while q <= n {
                composite[q] = true;
                q += p;
            }
        }
    }
    out
}

/// The first `count` primes.
pub fn first_primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while out.len() < count {
        if is_prime(candidate) {
            out.push(candidate);
        }
        candidate += 1;
    }
    out
}

/// The `index`-th prime, 0-based: `nth_prime(0) == 2`.
pub fn nth_prime(index: usize) -> u64 {
    let mut seen = 0usize;
    let mut candidate = 2u64;
    loop {
        if is_prime(candidate) {
            if seen == index {
                return candidate;
            }
            seen += 1;
        }
        candidate += 1;
    }
}

/// 0-based position of `p` in the increasing enumeration of primes, or None
/// if `p` is not prime.
pub fn prime_index(p: u64) -> Option<usize> {
    if !is_prime(p) {
        return None;
    }
    let mut idx = 0usize;
    let mut candidate = 2u64;
    while candidate < p {
        if is_prime(candidate) {
            idx += 1;
        }
        candidate += 1;
    }
    Some(idx)
}

/// Deterministic primality by trial division; fine for the u64 primes this
/// crate handles (context primes, exception keys, factor candidates).
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    if n.is_multiple_of(3) {
        return n == 3;
    }
    let mut d = 5u64;
    while d.checked_mul(d).is_some_and(|sq| sq <= n) {
        if n.is_multiple_of(d) || n.is_multiple_of(d + 2) {
            return false;
        }
        d += 6;
    }
    true
}

/// Unbounded prime stream backed by trial division against earlier primes.
pub struct PrimeStream {
    found: Vec<u64>,
    next_candidate: u64,
}

impl PrimeStream {
    pub fn new() -> Self {
        PrimeStream { found: Vec::new(), next_candidate: 2 }
    }
}

impl Default for PrimeStream {
    fn default() -> Self {
        Self::new()
    }
}

impl Iterator for PrimeStream {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        loop {
            let c = self.next_candidate;
            self.next_candidate += 1;
            let mut composite = false;
            for &p in &self.found {
                if p * p > c {
                    break;
                }
                if c.is_multiple_of(p) {
                    composite = true;
                    break;
                }
            }
            if !composite && c >= 2 {
                self.found.push(c);
                return Some(c);
            }
        }
    }
}

/// Complete factorisation of `|n|` by trial division, smallest prime first.
/// `n` must be nonzero. Factors beyond u64 range come back as the big
/// remaining cofactor, which at that point is itself prime.
pub fn factorize(n: &BigInt) -> Vec<(BigUint, u32)> {
    assert!(!n.is_zero(), "factorize: zero has no factorisation");
    let mut remaining = n.abs().to_biguint().expect("abs is non-negative");
    let mut out: Vec<(BigUint, u32)> = Vec::new();
    if remaining.is_one() {
        return out;
    }
    for p in PrimeStream::new() {
        let pb = BigUint::from(p);
        if &pb * &pb > remaining {
            break;
        }
        let mut mult = 0u32;
        while (&remaining % &pb).is_zero() {
            remaining /= &pb;
            mult += 1;
        }
        if mult > 0 {
            out.push((pb, mult));
        }
        if remaining.is_one() {
            break;
        }
    }
    if !remaining.is_one() {
        out.push((remaining, 1));
    }
    out
}

/// p-adic valuation of a nonzero integer.
pub fn valuation(n: &BigInt, p: u64) -> u32 {
    assert!(!n.is_zero(), "valuation of zero is unbounded");
    let pb = BigInt::from(p);
    let mut remaining = n.abs();
    let mut v = 0u32;
    while (&remaining % &pb).is_zero() {
        remaining /= &pb;
        v += 1;
    }
    v
}

/// `base^exp` as a BigUint.
pub fn pow_biguint(base: u64, exp: u32) -> BigUint {
    BigUint::from(base).pow(exp)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sieve_matches_stream() {
        let sieved = primes_up_to(500);
        let streamed: Vec<u64> = PrimeStream::new().take(sieved.len()).collect();
        assert_eq!(sieved, streamed);
    }

    #[test]
    fn first_primes_start() {
        assert_eq!(first_primes(10), vec![2, 3, 5, 7, 11, 13, 17, 19, 23, 29]);
    }

    #[test]
    fn prime_index_roundtrip() {
        for idx in 0..50 {
            assert_eq!(prime_index(nth_prime(idx)), Some(idx));
        }
        assert_eq!(prime_index(4), None);
        assert_eq!(prime_index(1), None);
    }

    #[test]
    fn factorize_small() {
        let f = factorize(&BigInt::from(12));
        assert_eq!(f, vec![(BigUint::from(2u32), 2), (BigUint::from(3u32), 1)]);
        assert!(factorize(&BigInt::from(1)).is_empty());
        assert_eq!(factorize(&BigInt::from(-97)), vec![(BigUint::from(97u32), 1)]);
    }

    #[test]
    fn valuation_examples() {
        assert_eq!(valuation(&BigInt::from(12), 2), 2);
        assert_eq!(valuation(&BigInt::from(12), 3), 1);
        assert_eq!(valuation(&BigInt::from(12), 5), 0);
        assert_eq!(valuation(&BigInt::from(-8), 2), 3);
    }
}
