//! Supernatural numbers: total maps from the primes into `{0, 1, 2, ...} ∪ {ω}`,
//! represented as finitely many exceptions over a default rule.
//!
//! A supernatural number records, for every prime `p`, an exponent that may be
//! the symbol omega. The representable functions are exactly those that agree
//! with a constant (or a prime-index-parity split) outside a finite set of
//! primes; this covers every profile used elsewhere in the crate. Values are
//! canonicalised on construction, so structural equality coincides with
//! equality as functions.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use thiserror::Error;

use crate::primes;

/// An exponent in `{0, 1, 2, ...} ∪ {ω}`; `Omega` is the unique maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Exponent {
    Finite(u32),
    Omega,
}

impl Exponent {
    pub const ZERO: Exponent = Exponent::Finite(0);

    pub fn is_omega(self) -> bool {
        matches!(self, Exponent::Omega)
    }

    pub fn is_zero(self) -> bool {
        self == Exponent::ZERO
    }

    /// `self + 1`, with `ω + 1 = ω`.
    pub fn successor(self) -> Exponent {
        match self {
            Exponent::Finite(k) => Exponent::Finite(k + 1),
            Exponent::Omega => Exponent::Omega,
        }
    }

    pub fn min(self, other: Exponent) -> Exponent {
        std::cmp::min(self, other)
    }

    pub fn max(self, other: Exponent) -> Exponent {
        std::cmp::max(self, other)
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exponent::Finite(k) => write!(f, "{k}"),
            Exponent::Omega => write!(f, "omega"),
        }
    }
}

/// The value assigned to every prime not listed as an exception.
///
/// `Parity` assigns by the 0-based position of the prime in the increasing
/// enumeration (2 has even index, 3 odd, 5 even, ...), which is how the
/// disjoint-prime-support profiles are expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DefaultRule {
    Const(Exponent),
    Parity { even: Exponent, odd: Exponent },
}

impl DefaultRule {
    fn normalize(self) -> DefaultRule {
        match self {
            DefaultRule::Parity { even, odd } if even == odd => DefaultRule::Const(even),
            other => other,
        }
    }

    pub fn value_for(self, prime: u64) -> Exponent {
        match self {
            DefaultRule::Const(e) => e,
            DefaultRule::Parity { even, odd } => {
                let idx = primes::prime_index(prime).expect("default evaluated at a prime");
                if idx.is_multiple_of(2) {
                    even
                } else {
                    odd
                }
            }
        }
    }

    /// The (at most two) exponent values the rule takes on infinite sets.
    pub fn arms(self) -> Vec<Exponent> {
        match self {
            DefaultRule::Const(e) => vec![e],
            DefaultRule::Parity { even, odd } => vec![even, odd],
        }
    }

    fn combine(self, other: DefaultRule, f: impl Fn(Exponent, Exponent) -> Exponent) -> DefaultRule {
        let arm = |rule: DefaultRule, even: bool| match rule {
            DefaultRule::Const(e) => e,
            DefaultRule::Parity { even: e, odd: o } => {
                if even {
                    e
                } else {
                    o
                }
            }
        };
        DefaultRule::Parity {
            even: f(arm(self, true), arm(other, true)),
            odd: f(arm(self, false), arm(other, false)),
        }
        .normalize()
    }
}

impl fmt::Display for DefaultRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DefaultRule::Const(e) => write!(f, "{e}"),
            DefaultRule::Parity { even, odd } => write!(f, "parity({even},{odd})"),
        }
    }
}

/// Classification of a supernatural number by the shape of its fibers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SnClass {
    /// No omega value and only finitely many nonzero values.
    Finite,
    /// All but finitely many values are omega.
    Cofinite,
    /// Neither of the above.
    Intermediate,
}

impl fmt::Display for SnClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SnClass::Finite => write!(f, "finite"),
            SnClass::Cofinite => write!(f, "cofinite"),
            SnClass::Intermediate => write!(f, "intermediate"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SnError {
    #[error("exception key {0} is not prime")]
    NotPrime(u64),
    #[error("the zero integer lies in every p^k Z; divisor-set membership is undefined for it")]
    ZeroInput,
    #[error("prime factor {0} too large to locate in the prime enumeration")]
    ParityIndexOverflow(String),
    #[error("cannot parse supernatural literal: {0}")]
    Parse(String),
}

/// A supernatural number in canonical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SupernaturalNumber {
    default: DefaultRule,
    exceptions: BTreeMap<u64, Exponent>,
}

impl SupernaturalNumber {
    /// Build a canonical supernatural number. Exception keys must be prime;
    /// exceptions equal to the default at their key are dropped.
    pub fn new(
        default: DefaultRule,
        exceptions: impl IntoIterator<Item = (u64, Exponent)>,
    ) -> Result<Self, SnError> {
        let default = default.normalize();
        let mut map = BTreeMap::new();
        for (p, e) in exceptions {
            if !primes::is_prime(p) {
                return Err(SnError::NotPrime(p));
            }
            if default.value_for(p) != e {
                map.insert(p, e);
            }
        }
        Ok(SupernaturalNumber { default, exceptions: map })
    }

    pub fn constant(e: Exponent) -> Self {
        SupernaturalNumber { default: DefaultRule::Const(e), exceptions: BTreeMap::new() }
    }

    pub fn all_zero() -> Self {
        Self::constant(Exponent::ZERO)
    }

    pub fn all_omega() -> Self {
        Self::constant(Exponent::Omega)
    }

    /// The profile of an integer: p-adic valuations for nonzero `n`, the
    /// all-omega profile for `n = 0` (every `nZ` contains 0).
    pub fn from_integer(n: &BigInt) -> Self {
        if n.is_zero() {
            return Self::all_omega();
        }
        let exceptions = primes::factorize(n)
            .into_iter()
            .map(|(p, k)| {
                let p = p.to_u64().expect("from_integer: prime factor fits u64 in practice");
                (p, Exponent::Finite(k))
            })
            .collect::<Vec<_>>();
        Self::new(DefaultRule::Const(Exponent::ZERO), exceptions)
            .expect("factorisation yields prime keys")
    }

    pub fn default_rule(&self) -> DefaultRule {
        self.default
    }

    pub fn exceptions(&self) -> &BTreeMap<u64, Exponent> {
        &self.exceptions
    }

    /// The value at a prime.
    pub fn value_at(&self, prime: u64) -> Exponent {
        match self.exceptions.get(&prime) {
            Some(&e) => e,
            None => self.default.value_for(prime),
        }
    }

    /// Value at a possibly huge prime factor; only constant defaults can be
    /// evaluated beyond u64 range.
    fn value_at_big(&self, prime: &num_bigint::BigUint) -> Result<Exponent, SnError> {
        match prime.to_u64() {
            Some(p) => Ok(self.value_at(p)),
            None => match self.default {
                DefaultRule::Const(e) => Ok(e),
                DefaultRule::Parity { .. } => Err(SnError::ParityIndexOverflow(prime.to_string())),
            },
        }
    }

    pub fn is_all_omega(&self) -> bool {
        self.default == DefaultRule::Const(Exponent::Omega) && self.exceptions.is_empty()
    }

    pub fn is_all_zero(&self) -> bool {
        self.default == DefaultRule::Const(Exponent::ZERO) && self.exceptions.is_empty()
    }

    /// Pointwise comparison `self(p) <= other(p)` for every prime.
    pub fn le(&self, other: &Self) -> bool {
        for p in self.exceptions.keys().chain(other.exceptions.keys()) {
            if self.value_at(*p) > other.value_at(*p) {
                return false;
            }
        }
        // Beyond all exceptions the defaults rule; both parity classes occur
        // infinitely often there, so compare arm against arm.
        let (a_even, a_odd) = arm_pair(self.default);
        let (b_even, b_odd) = arm_pair(other.default);
        a_even <= b_even && a_odd <= b_odd
    }

    /// Pointwise minimum; the profile of the gcd.
    pub fn gcd(&self, other: &Self) -> Self {
        self.combine(other, Exponent::min)
    }

    /// Pointwise maximum; the profile of the lcm.
    pub fn lcm(&self, other: &Self) -> Self {
        self.combine(other, Exponent::max)
    }

    fn combine(&self, other: &Self, f: impl Fn(Exponent, Exponent) -> Exponent + Copy) -> Self {
        let default = self.default.combine(other.default, f);
        let exceptions: Vec<(u64, Exponent)> = self
            .exceptions
            .keys()
            .chain(other.exceptions.keys())
            .map(|&p| (p, f(self.value_at(p), other.value_at(p))))
            .collect();
        Self::new(default, exceptions).expect("keys already validated")
    }

    /// `p -> self(p) + 1` with `ω + 1 = ω`; the exponent map of the
    /// complement union `∪ p^{φ(p)+1} Z`.
    pub fn successor(&self) -> Self {
        let default = match self.default {
            DefaultRule::Const(e) => DefaultRule::Const(e.successor()),
            DefaultRule::Parity { even, odd } => {
                DefaultRule::Parity { even: even.successor(), odd: odd.successor() }
            }
        };
        let exceptions: Vec<(u64, Exponent)> =
            self.exceptions.iter().map(|(&p, &e)| (p, e.successor())).collect();
        Self::new(default, exceptions).expect("keys already validated")
    }

    /// Finite / Cofinite / Intermediate, decided from the canonical form.
    pub fn classify(&self) -> SnClass {
        match self.default {
            DefaultRule::Const(Exponent::Omega) => SnClass::Cofinite,
            DefaultRule::Const(Exponent::Finite(0)) => {
                if self.exceptions.values().any(|e| e.is_omega()) {
                    SnClass::Intermediate
                } else {
                    SnClass::Finite
                }
            }
            // A nonzero constant or a genuine parity split puts some value
            // other than omega on infinitely many primes (not cofinite) and a
            // nonzero-or-omega value on infinitely many primes (not finite).
            DefaultRule::Const(Exponent::Finite(_)) | DefaultRule::Parity { .. } => {
                SnClass::Intermediate
            }
        }
    }

    /// Does `m` avoid every `p^{φ(p)+1} Z`? Equivalently: is `m` a member of
    /// the divisor set described by this profile? `m = 0` is rejected.
    pub fn d_member(&self, m: &BigInt) -> Result<bool, SnError> {
        if m.is_zero() {
            return Err(SnError::ZeroInput);
        }
        for (p, mult) in primes::factorize(m) {
            if Exponent::Finite(mult) > self.value_at_big(&p)? {
                return Ok(false);
            }
        }
        Ok(true)
    }

    /// All nonzero `m` with `|m| <= bound` in the divisor set, ascending.
    pub fn d_enumerate(&self, bound: u64) -> Vec<BigInt> {
        let mut positives = Vec::new();
        for m in 1..=bound {
            let m = BigInt::from(m);
            if self.d_member(&m).expect("m nonzero") {
                positives.push(m);
            }
        }
        let mut out: Vec<BigInt> = positives.iter().rev().map(|m| -m).collect();
        out.extend(positives);
        out
    }

    /// Primes (ascending) whose value satisfies `pred`, up to `count` of them.
    /// Only terminates early when the default rule makes further hits
    /// impossible, so call it with predicates the defaults can answer.
    pub fn primes_where(&self, pred: impl Fn(Exponent) -> bool, count: usize) -> Vec<u64> {
        let mut out = Vec::new();
        let default_can_hit = self.default.arms().into_iter().any(&pred);
        let last_exception = self.exceptions.keys().next_back().copied().unwrap_or(0);
        for p in primes::PrimeStream::new() {
            if out.len() == count {
                break;
            }
            if !default_can_hit && p > last_exception {
                break;
            }
            if pred(self.value_at(p)) {
                out.push(p);
            }
        }
        out
    }

    /// Whether infinitely many primes satisfy `pred`, decided from the rule.
    pub fn infinitely_many(&self, pred: impl Fn(Exponent) -> bool) -> bool {
        self.default.arms().into_iter().any(pred)
    }
}

fn arm_pair(rule: DefaultRule) -> (Exponent, Exponent) {
    match rule {
        DefaultRule::Const(e) => (e, e),
        DefaultRule::Parity { even, odd } => (even, odd),
    }
}

impl PartialOrd for SupernaturalNumber {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        match (self.le(other), other.le(self)) {
            (true, true) => Some(std::cmp::Ordering::Equal),
            (true, false) => Some(std::cmp::Ordering::Less),
            (false, true) => Some(std::cmp::Ordering::Greater),
            (false, false) => None,
        }
    }
}

impl fmt::Display for SupernaturalNumber {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "default={}", self.default)?;
        if !self.exceptions.is_empty() {
            write!(f, ";")?;
            for (i, (p, e)) in self.exceptions.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{p}:{e}")?;
            }
        }
        Ok(())
    }
}

fn parse_exponent(s: &str) -> Result<Exponent, SnError> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("omega") {
        Ok(Exponent::Omega)
    } else {
        s.parse::<u32>().map(Exponent::Finite).map_err(|_| SnError::Parse(format!("bad exponent `{s}`")))
    }
}

impl FromStr for SupernaturalNumber {
    type Err = SnError;

    /// Text record: `default=<int|omega|parity(e,o)>; p1:e1, p2:e2, ...`
    fn from_str(s: &str) -> Result<Self, SnError> {
        let s = s.trim();
        let rest = s
            .strip_prefix("default=")
            .ok_or_else(|| SnError::Parse(format!("expected `default=...` in `{s}`")))?;
        let (default_str, exceptions_str) = match rest.split_once(';') {
            Some((d, e)) => (d.trim(), e.trim()),
            None => (rest.trim(), ""),
        };
        let default = if let Some(args) = default_str.strip_prefix("parity(") {
            let inner = args
                .strip_suffix(')')
                .ok_or_else(|| SnError::Parse(format!("unclosed parity in `{default_str}`")))?;
            let (e, o) = inner
                .split_once(',')
                .ok_or_else(|| SnError::Parse(format!("parity needs two arms in `{default_str}`")))?;
            DefaultRule::Parity { even: parse_exponent(e)?, odd: parse_exponent(o)? }
        } else {
            DefaultRule::Const(parse_exponent(default_str)?)
        };
        let mut exceptions = Vec::new();
        if !exceptions_str.is_empty() {
            for item in exceptions_str.split(',') {
                let (p, e) = item
                    .split_once(':')
                    .ok_or_else(|| SnError::Parse(format!("expected `p:e`, got `{item}`")))?;
                let p: u64 = p
                    .trim()
                    .parse()
                    .map_err(|_| SnError::Parse(format!("bad prime `{}`", p.trim())))?;
                exceptions.push((p, parse_exponent(e)?));
            }
        }
        SupernaturalNumber::new(default, exceptions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sn(s: &str) -> SupernaturalNumber {
        s.parse().unwrap()
    }

    #[test]
    fn from_integer_examples() {
        assert_eq!(SupernaturalNumber::from_integer(&BigInt::from(12)), sn("default=0;2:2,3:1"));
        assert_eq!(SupernaturalNumber::from_integer(&BigInt::from(1)), sn("default=0"));
        assert_eq!(SupernaturalNumber::from_integer(&BigInt::from(0)), sn("default=omega"));
    }

    #[test]
    fn le_examples() {
        let zero = SupernaturalNumber::all_zero();
        assert!(zero.le(&sn("default=0;2:3")));
        assert!(zero.le(&sn("default=omega")));
        assert!(sn("default=0;2:3").le(&sn("default=0;2:3,3:omega")));
        assert!(!sn("default=0;2:3").le(&sn("default=0;2:2")));
    }

    #[test]
    fn le_parity_tails() {
        let u = sn("default=parity(0,1)");
        let v = sn("default=parity(0,omega)");
        assert!(u.le(&v));
        assert!(!v.le(&u));
        assert!(!u.le(&SupernaturalNumber::all_zero()));
        assert!(u.le(&SupernaturalNumber::all_omega()));
    }

    #[test]
    fn classify_examples() {
        assert_eq!(sn("default=0;2:3").classify(), SnClass::Finite);
        assert_eq!(sn("default=omega;5:0").classify(), SnClass::Cofinite);
        assert_eq!(sn("default=2").classify(), SnClass::Intermediate);
        assert_eq!(sn("default=0;2:omega").classify(), SnClass::Intermediate);
        assert_eq!(sn("default=parity(1,0)").classify(), SnClass::Intermediate);
    }

    #[test]
    fn classify_of_integers() {
        for n in [-10i64, -1, 1, 2, 36, 97] {
            let phi = SupernaturalNumber::from_integer(&BigInt::from(n));
            assert_eq!(phi.classify(), SnClass::Finite);
        }
        assert_eq!(SupernaturalNumber::from_integer(&BigInt::from(0)).classify(), SnClass::Cofinite);
    }

    #[test]
    fn d_member_examples() {
        let phi = sn("default=0;2:2");
        assert!(phi.d_member(&BigInt::from(4)).unwrap());
        assert!(!phi.d_member(&BigInt::from(8)).unwrap());
        assert!(!phi.d_member(&BigInt::from(6)).unwrap());
        assert_eq!(phi.d_member(&BigInt::from(0)), Err(SnError::ZeroInput));
    }

    #[test]
    fn d_member_sieve_oracle() {
        // Independent sieve of D ∩ [1, 20] for the {2 -> 2} profile: an m
        // qualifies iff it is a power of two dividing 4.
        let phi = sn("default=0;2:2");
        let expected: Vec<u64> = (1..=20u64)
            .filter(|&m| {
                let mut m = m;
                let mut k = 0;
                while m % 2 == 0 {
                    m /= 2;
                    k += 1;
                }
                m == 1 && k <= 2
            })
            .collect();
        assert_eq!(expected, vec![1, 2, 4]);
        let got: Vec<u64> = (1..=20u64)
            .filter(|&m| phi.d_member(&BigInt::from(m)).unwrap())
            .collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn d_enumerate_examples() {
        let ints = |v: &[i64]| v.iter().map(|&x| BigInt::from(x)).collect::<Vec<_>>();
        assert_eq!(SupernaturalNumber::all_zero().d_enumerate(5), ints(&[-1, 1]));
        assert_eq!(SupernaturalNumber::all_omega().d_enumerate(3), ints(&[-3, -2, -1, 1, 2, 3]));
        assert_eq!(sn("default=0;2:2").d_enumerate(8), ints(&[-4, -2, -1, 1, 2, 4]));
    }

    #[test]
    fn duality_with_integer_divisibility() {
        for n in [1i64, 2, 6, 12, 30, -18] {
            let phi = SupernaturalNumber::from_integer(&BigInt::from(n));
            for m in 1..=40i64 {
                for m in [m, -m] {
                    let member = phi.d_member(&BigInt::from(m)).unwrap();
                    assert_eq!(member, n % m == 0, "duality failed at n={n}, m={m}");
                }
            }
        }
    }

    #[test]
    fn canonical_form_equality() {
        // An exception equal to the default is dropped.
        let a = SupernaturalNumber::new(
            DefaultRule::Const(Exponent::Finite(2)),
            [(3, Exponent::Finite(2)), (2, Exponent::Finite(5))],
        )
        .unwrap();
        let b = SupernaturalNumber::new(
            DefaultRule::Const(Exponent::Finite(2)),
            [(2, Exponent::Finite(5))],
        )
        .unwrap();
        assert_eq!(a, b);
        // Parity with equal arms collapses to a constant.
        let c = SupernaturalNumber::new(
            DefaultRule::Parity { even: Exponent::Omega, odd: Exponent::Omega },
            [],
        )
        .unwrap();
        assert_eq!(c, SupernaturalNumber::all_omega());
    }

    #[test]
    fn rejects_composite_exception_keys() {
        assert_eq!(
            SupernaturalNumber::new(DefaultRule::Const(Exponent::ZERO), [(4, Exponent::Omega)]),
            Err(SnError::NotPrime(4)),
        );
    }

    #[test]
    fn gcd_lcm_respect_order() {
        let a = sn("default=0;2:3,5:1");
        let b = sn("default=0;2:1,3:omega");
        let g = a.gcd(&b);
        let l = a.lcm(&b);
        assert_eq!(g, sn("default=0;2:1"));
        assert_eq!(l, sn("default=0;2:3,3:omega,5:1"));
        assert!(g.le(&a) && g.le(&b));
        assert!(a.le(&l) && b.le(&l));
    }

    #[test]
    fn text_roundtrip() {
        for s in [
            "default=0",
            "default=omega",
            "default=2",
            "default=0;2:3,3:omega",
            "default=parity(0,1)",
            "default=parity(omega,0);2:1",
        ] {
            let v = sn(s);
            assert_eq!(v, v.to_string().parse::<SupernaturalNumber>().unwrap());
            assert_eq!(v.to_string(), s);
        }
        // Whitespace-tolerant parsing.
        assert_eq!(sn("default=0; 2:3, 3:omega"), sn("default=0;2:3,3:omega"));
    }

    #[test]
    fn successor_map() {
        assert_eq!(sn("default=2").successor(), sn("default=3"));
        assert_eq!(sn("default=0;2:omega,3:1").successor(), sn("default=1;2:omega,3:2"));
    }

    #[test]
    fn primes_where_fibers() {
        let phi = sn("default=2;2:0,3:omega");
        assert_eq!(phi.primes_where(|e| e == Exponent::Finite(2), 3), vec![5, 7, 11]);
        assert_eq!(phi.primes_where(|e| e.is_omega(), 3), vec![3]);
        assert_eq!(phi.primes_where(|e| e.is_zero(), 2), vec![2]);
    }
}
