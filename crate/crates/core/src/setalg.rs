//! Symbolic subsets of the integers with exact decision procedures.
//!
//! A `SetExpr` is a tree over four atoms (residue classes, intervals, finite
//! sets, prime-power unions) closed under complement, union and intersection.
//! Membership, densities, thickness witnesses, divisibility chains and
//! finite-intersection certificates are all computed exactly; densities are
//! rationals, never floats, and every search bound that can be exhausted
//! reports `NotFoundWithinBudget` rather than guessing.
//!
//! Window counts are exact counts over one finite window, which bound the
//! upper Banach density from below; the true density as a supremum over all
//! interval sequences is not computed. Piecewise-syndeticity and finite-sums
//! structure are out of scope.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

use crate::primes;
use crate::supernatural::{DefaultRule, Exponent, SnClass, SupernaturalNumber};

/// Windows longer than this are refused rather than silently truncated.
pub const WINDOW_BUDGET: u64 = 10_000_000;
/// Default bound for brute-force base searches.
pub const DEFAULT_SEARCH_BOUND: u64 = 1_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SetError {
    #[error("residue class needs modulus >= 1")]
    BadModulus,
    #[error("prime-power union needs every exponent >= 1")]
    BadUnionExponent,
    #[error("set is not eventually periodic; supply a window")]
    NonPeriodic,
    #[error("operation undefined for the zero integer")]
    ZeroInput,
    #[error("no witness found within search bound {bound}")]
    NotFoundWithinBudget { bound: u64 },
    #[error("window of length {len} exceeds the budget {budget}")]
    WindowTooLarge { len: String, budget: u64 },
    #[error("period {period} exceeds the enumeration budget {budget}")]
    PeriodTooLarge { period: String, budget: u64 },
    #[error("profile class is {0}, expected intermediate")]
    NotIntermediate(SnClass),
    #[error("invalid family selection: {0}")]
    InvalidSelection(String),
    #[error("exponent at prime {prime} is omega; no consecutive-run witness exists")]
    UnsupportedExponent { prime: u64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("cannot parse set expression: {0}")]
    Parse(String),
}

/// A symbolic subset of the integers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SetExpr {
    /// `rem + modulus Z` with `0 <= rem < modulus`.
    ResidueClass { rem: BigInt, modulus: BigInt },
    /// Inclusive interval `[lo, hi]`.
    Interval { lo: BigInt, hi: BigInt },
    FiniteSet(BTreeSet<BigInt>),
    /// `∪_p p^{alpha(p)} Z`, where every exponent is at least 1 (omega means
    /// the contribution `{0}`).
    PrimePowerUnion(SupernaturalNumber),
    Complement(Box<SetExpr>),
    Union(Box<SetExpr>, Box<SetExpr>),
    Intersection(Box<SetExpr>, Box<SetExpr>),
}

/// Exact density information for a set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DensityReport {
    /// Fraction of residues in one (eventual) period.
    ExactPeriodic(BigRational),
    /// Fraction of members in a finite window.
    WindowEstimate { value: BigRational, lo: BigInt, hi: BigInt },
}

impl DensityReport {
    pub fn value(&self) -> &BigRational {
        match self {
            DensityReport::ExactPeriodic(v) => v,
            DensityReport::WindowEstimate { value, .. } => value,
        }
    }
}

impl SetExpr {
    pub fn residue_class(rem: impl Into<BigInt>, modulus: impl Into<BigInt>) -> Result<SetExpr, SetError> {
        let modulus = modulus.into();
        if modulus < BigInt::one() {
            return Err(SetError::BadModulus);
        }
        let rem = rem.into().mod_floor(&modulus);
        Ok(SetExpr::ResidueClass { rem, modulus })
    }

    pub fn interval(lo: impl Into<BigInt>, hi: impl Into<BigInt>) -> SetExpr {
        SetExpr::Interval { lo: lo.into(), hi: hi.into() }
    }

    pub fn finite(elems: impl IntoIterator<Item = BigInt>) -> SetExpr {
        SetExpr::FiniteSet(elems.into_iter().collect())
    }

    pub fn prime_power_union(alpha: SupernaturalNumber) -> Result<SetExpr, SetError> {
        let positive = |e: Exponent| !e.is_zero();
        if !alpha.default_rule().arms().into_iter().all(positive)
            || !alpha.exceptions().values().all(|&e| positive(e))
        {
            return Err(SetError::BadUnionExponent);
        }
        Ok(SetExpr::PrimePowerUnion(alpha))
    }

    /// The set of squarefree-style members: complement of `∪ p^{alpha} Z`
    /// with constant exponent `alpha`.
    pub fn power_free(alpha: u32) -> SetExpr {
        let sn = SupernaturalNumber::constant(Exponent::Finite(alpha));
        SetExpr::Complement(Box::new(SetExpr::prime_power_union(sn).expect("alpha >= 1")))
    }

    pub fn complement(self) -> SetExpr {
        SetExpr::Complement(Box::new(self))
    }

    pub fn union(self, other: SetExpr) -> SetExpr {
        SetExpr::Union(Box::new(self), Box::new(other))
    }

    pub fn intersection(self, other: SetExpr) -> SetExpr {
        SetExpr::Intersection(Box::new(self), Box::new(other))
    }

    /// The whole line, written in the grammar as `!(fin{})`.
    pub fn everything() -> SetExpr {
        SetExpr::FiniteSet(BTreeSet::new()).complement()
    }

    /// Exact membership test.
    pub fn member(&self, m: &BigInt) -> bool {
        match self {
            SetExpr::ResidueClass { rem, modulus } => (m - rem).mod_floor(modulus).is_zero(),
            SetExpr::Interval { lo, hi } => lo <= m && m <= hi,
            SetExpr::FiniteSet(set) => set.contains(m),
            SetExpr::PrimePowerUnion(alpha) => ppu_member(alpha, m),
            SetExpr::Complement(inner) => !inner.member(m),
            SetExpr::Union(a, b) => a.member(m) || b.member(m),
            SetExpr::Intersection(a, b) => a.member(m) && b.member(m),
        }
    }

    /// Syntactic test: every prime-power union has only finitely many finite
    /// exponents (default omega), which makes the tree periodic outside a
    /// bounded region.
    pub fn eventually_periodic(&self) -> bool {
        match self {
            SetExpr::PrimePowerUnion(alpha) => {
                alpha.default_rule() == DefaultRule::Const(Exponent::Omega)
            }
            SetExpr::ResidueClass { .. } | SetExpr::Interval { .. } | SetExpr::FiniteSet(_) => true,
            SetExpr::Complement(inner) => inner.eventually_periodic(),
            SetExpr::Union(a, b) | SetExpr::Intersection(a, b) => {
                a.eventually_periodic() && b.eventually_periodic()
            }
        }
    }

    /// Periodic with no bounded exceptional region at all (the one integer a
    /// prime-power union treats specially is 0, which stays exceptional).
    fn strictly_periodic(&self) -> bool {
        match self {
            SetExpr::ResidueClass { .. } => true,
            SetExpr::Interval { .. } => false,
            SetExpr::FiniteSet(set) => set.is_empty(),
            SetExpr::PrimePowerUnion(alpha) => {
                alpha.default_rule() == DefaultRule::Const(Exponent::Omega)
            }
            SetExpr::Complement(inner) => inner.strictly_periodic(),
            SetExpr::Union(a, b) | SetExpr::Intersection(a, b) => {
                a.strictly_periodic() && b.strictly_periodic()
            }
        }
    }

    /// A common period of all periodic atoms.
    fn period(&self) -> BigUint {
        match self {
            SetExpr::ResidueClass { modulus, .. } => {
                modulus.to_biguint().expect("modulus positive")
            }
            SetExpr::Interval { .. } | SetExpr::FiniteSet(_) => BigUint::one(),
            SetExpr::PrimePowerUnion(alpha) => alpha
                .exceptions()
                .iter()
                .filter_map(|(&p, &e)| match e {
                    Exponent::Finite(k) => Some(primes::pow_biguint(p, k)),
                    Exponent::Omega => None,
                })
                .product(),
            SetExpr::Complement(inner) => inner.period(),
            SetExpr::Union(a, b) | SetExpr::Intersection(a, b) => a.period().lcm(&b.period()),
        }
    }

    /// Membership of the residue `r` far away from the bounded exceptional
    /// region, with `period` a multiple of every atom modulus.
    fn tail_member(&self, r: &BigUint, period: &BigUint) -> bool {
        match self {
            SetExpr::ResidueClass { rem, modulus } => {
                let r = BigInt::from(r.clone());
                (r - rem).mod_floor(modulus).is_zero()
            }
            SetExpr::Interval { .. } | SetExpr::FiniteSet(_) => false,
            SetExpr::PrimePowerUnion(alpha) => alpha.exceptions().iter().any(|(&p, &e)| match e {
                Exponent::Finite(k) => {
                    let pk = primes::pow_biguint(p, k);
                    debug_assert!((period % &pk).is_zero());
                    (r % pk).is_zero()
                }
                Exponent::Omega => false,
            }),
            SetExpr::Complement(inner) => !inner.tail_member(r, period),
            SetExpr::Union(a, b) => a.tail_member(r, period) || b.tail_member(r, period),
            SetExpr::Intersection(a, b) => a.tail_member(r, period) && b.tail_member(r, period),
        }
    }

    /// Exact density. Without a window the set must be eventually periodic
    /// and the density of its periodic tail is counted over one period; with
    /// a window, members are counted exactly in `[lo, hi]`.
    pub fn density(&self, window: Option<(&BigInt, &BigInt)>) -> Result<DensityReport, SetError> {
        match window {
            None => {
                if !self.eventually_periodic() {
                    return Err(SetError::NonPeriodic);
                }
                let period = self.period();
                let budget = BigUint::from(WINDOW_BUDGET);
                if period > budget {
                    return Err(SetError::PeriodTooLarge {
                        period: period.to_string(),
                        budget: WINDOW_BUDGET,
                    });
                }
                let n = period.to_u64().expect("period within budget");
                let mut count = 0u64;
                for r in 0..n {
                    if self.tail_member(&BigUint::from(r), &period) {
                        count += 1;
                    }
                }
                Ok(DensityReport::ExactPeriodic(BigRational::new(
                    BigInt::from(count),
                    BigInt::from(n),
                )))
            }
            Some((lo, hi)) => {
                let marks = self.eval_window(lo, hi)?;
                let count = marks.iter().filter(|&&b| b).count();
                let len = marks.len();
                Ok(DensityReport::WindowEstimate {
                    value: BigRational::new(BigInt::from(count), BigInt::from(len)),
                    lo: lo.clone(),
                    hi: hi.clone(),
                })
            }
        }
    }

    /// Count members in `[lo, hi]`.
    pub fn count_window(&self, lo: &BigInt, hi: &BigInt) -> Result<u64, SetError> {
        let marks = self.eval_window(lo, hi)?;
        Ok(marks.iter().filter(|&&b| b).count() as u64)
    }

    /// Membership bitmap over `[lo, hi]`, computed by sieving rather than by
    /// per-element factorisation.
    fn eval_window(&self, lo: &BigInt, hi: &BigInt) -> Result<Vec<bool>, SetError> {
        if lo > hi {
            return Err(SetError::Invalid("window is empty".into()));
        }
        let len_big: BigInt = hi - lo + BigInt::one();
        if len_big > BigInt::from(WINDOW_BUDGET) {
            return Err(SetError::WindowTooLarge {
                len: len_big.to_string(),
                budget: WINDOW_BUDGET,
            });
        }
        let len = len_big.to_u64().expect("within budget") as usize;
        Ok(self.eval_window_inner(lo, hi, len))
    }

    fn eval_window_inner(&self, lo: &BigInt, hi: &BigInt, len: usize) -> Vec<bool> {
        match self {
            SetExpr::ResidueClass { rem, modulus } => {
                let mut marks = vec![false; len];
                let offset = (rem - lo).mod_floor(modulus);
                if let Some(start) = offset.to_u64().filter(|&s| (s as usize) < len) {
                    let step = modulus.to_u64().map(|m| m as usize);
                    match step {
                        Some(step) => {
                            let mut i = start as usize;
                            while i < len {
                                marks[i] = true;
                                i += step;
                            }
                        }
                        None => marks[start as usize] = true,
                    }
                }
                marks
            }
            SetExpr::Interval { lo: a, hi: b } => {
                let mut marks = vec![false; len];
                let from = a.max(lo);
                let to = b.min(hi);
                if from <= to {
                    let i = (from - lo).to_u64().expect("within window") as usize;
                    let j = (to - lo).to_u64().expect("within window") as usize;
                    for m in marks.iter_mut().take(j + 1).skip(i) {
                        *m = true;
                    }
                }
                marks
            }
            SetExpr::FiniteSet(set) => {
                let mut marks = vec![false; len];
                for e in set {
                    if e >= lo && e <= hi {
                        let i = (e - lo).to_u64().expect("within window") as usize;
                        marks[i] = true;
                    }
                }
                marks
            }
            SetExpr::PrimePowerUnion(alpha) => ppu_window(alpha, lo, hi, len),
            SetExpr::Complement(inner) => {
                let mut marks = inner.eval_window_inner(lo, hi, len);
                for m in &mut marks {
                    *m = !*m;
                }
                marks
            }
            SetExpr::Union(a, b) => {
                let mut marks = a.eval_window_inner(lo, hi, len);
                let other = b.eval_window_inner(lo, hi, len);
                for (m, o) in marks.iter_mut().zip(other) {
                    *m |= o;
                }
                marks
            }
            SetExpr::Intersection(a, b) => {
                let mut marks = a.eval_window_inner(lo, hi, len);
                let other = b.eval_window_inner(lo, hi, len);
                for (m, o) in marks.iter_mut().zip(other) {
                    *m &= o;
                }
                marks
            }
        }
    }

    /// Whether the whole class `r + period Z` lies inside the set; exact for
    /// strictly periodic trees. The class is constant through every atom, so
    /// the verdict is the periodic membership of `r` plus a separate check of
    /// the exceptional integer 0 when the class contains it.
    fn class_contained(&self, r: &BigUint, period: &BigUint) -> Result<bool, SetError> {
        if !self.strictly_periodic() {
            return Err(SetError::NonPeriodic);
        }
        if !self.tail_member(r, period) {
            return Ok(false);
        }
        if r.is_zero() && !self.member(&BigInt::zero()) {
            return Ok(false);
        }
        Ok(true)
    }
}

fn ppu_member(alpha: &SupernaturalNumber, m: &BigInt) -> bool {
    if m.is_zero() {
        // 0 lies in p^k Z for every k and in p^omega Z = {0}.
        return true;
    }
    // Since every exponent is >= 1, a witnessing prime must divide m. Stream
    // the trial division and return on the first qualifying prime, so large
    // members are recognised without factorising their full cofactor.
    let mut remaining = m.abs().to_biguint().expect("abs is non-negative");
    let qualifies = |value: Exponent, mult: u32| matches!(value, Exponent::Finite(k) if mult >= k);
    for p in primes::PrimeStream::new() {
        let pb = BigUint::from(p);
        if &pb * &pb > remaining {
            break;
        }
        let mut mult = 0u32;
        while (&remaining % &pb).is_zero() {
            remaining /= &pb;
            mult += 1;
        }
        if mult > 0 && qualifies(alpha.value_at(p), mult) {
            return true;
        }
        if remaining.is_one() {
            return false;
        }
    }
    if remaining.is_one() {
        return false;
    }
    // The remaining cofactor is prime with multiplicity 1.
    let value = match remaining.to_u64() {
        Some(q) => alpha.value_at(q),
        None => match alpha.default_rule() {
            DefaultRule::Const(e) => e,
            // A parity default cannot be evaluated at a prime too large to
            // index; such factors only arise far outside test ranges.
            DefaultRule::Parity { .. } => return false,
        },
    };
    qualifies(value, 1)
}

fn ppu_window(alpha: &SupernaturalNumber, lo: &BigInt, hi: &BigInt, len: usize) -> Vec<bool> {
    let mut marks = vec![false; len];
    let zero = BigInt::zero();
    if lo <= &zero && &zero <= hi {
        let i = (-lo).to_u64().expect("within window") as usize;
        marks[i] = true;
    }
    let max_abs = lo.abs().max(hi.abs());
    let max_abs_u = match max_abs.to_u64() {
        Some(v) => v,
        None => {
            // Window far from the origin with huge bounds: fall back to
            // per-element membership (windows are budget-bounded anyway).
            for (i, mark) in marks.iter_mut().enumerate() {
                *mark = ppu_member(alpha, &(lo + BigInt::from(i)));
            }
            return marks;
        }
    };
    let min_exp = min_finite_exponent(alpha);
    let Some(min_exp) = min_exp else {
        return marks; // only omega exponents: the union is {0}
    };
    // Bounds fit in i128 whenever their absolute value fits u64.
    let lo_i = lo.to_i128().expect("bounded by max_abs");
    let hi_i = hi.to_i128().expect("bounded by max_abs");
    let prime_bound = integer_root(max_abs_u, min_exp);
    for p in primes::primes_up_to(prime_bound) {
        let Exponent::Finite(k) = alpha.value_at(p) else { continue };
        let Some(m) = checked_pow_u64(p, k).filter(|&m| m <= max_abs_u) else { continue };
        let m = m as i128;
        let mut x = lo_i.div_euclid(m) * m;
        if x < lo_i {
            x += m;
        }
        while x <= hi_i {
            marks[(x - lo_i) as usize] = true;
            x += m;
        }
    }
    marks
}

fn min_finite_exponent(alpha: &SupernaturalNumber) -> Option<u32> {
    let mut min: Option<u32> = None;
    let mut feed = |e: Exponent| {
        if let Exponent::Finite(k) = e {
            min = Some(min.map_or(k, |m| m.min(k)));
        }
    };
    for arm in alpha.default_rule().arms() {
        feed(arm);
    }
    for &e in alpha.exceptions().values() {
        feed(e);
    }
    min
}

fn checked_pow_u64(base: u64, exp: u32) -> Option<u64> {
    let mut acc = 1u64;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Largest `r` with `r^exp <= n`.
fn integer_root(n: u64, exp: u32) -> u64 {
    if exp <= 1 {
        return n;
    }
    let mut r = (n as f64).powf(1.0 / exp as f64) as u64 + 2;
    while r > 0 && checked_pow_u64(r, exp).is_none_or(|v| v > n) {
        r -= 1;
    }
    r
}

/// Least non-negative `n` such that `p_k^{alpha(p_k)}` divides `n + k` for
/// `k = 1..=run_length`, so `[n+1, n+run_length]` sits inside the union
/// `∪ p^{alpha(p)} Z`. Found by the Chinese Remainder Theorem over the
/// pairwise coprime prime-power moduli.
pub fn thickness_witness(alpha: &SupernaturalNumber, run_length: u32) -> Result<BigInt, SetError> {
    if run_length == 0 {
        return Err(SetError::Invalid("run length must be positive".into()));
    }
    let mut residue = BigInt::zero();
    let mut modulus = BigInt::one();
    for k in 1..=run_length {
        let p = primes::nth_prime((k - 1) as usize);
        let e = match alpha.value_at(p) {
            Exponent::Finite(e) if e >= 1 => e,
            Exponent::Finite(_) => {
                return Err(SetError::InvalidSelection(format!(
                    "alpha({p}) must be at least 1"
                )))
            }
            Exponent::Omega => return Err(SetError::UnsupportedExponent { prime: p }),
        };
        let m = BigInt::from(primes::pow_biguint(p, e));
        let r = (-BigInt::from(k)).mod_floor(&m);
        let (new_residue, new_modulus) = crt_pair(&residue, &modulus, &r, &m);
        residue = new_residue;
        modulus = new_modulus;
    }
    Ok(residue)
}

/// Combine `x ≡ r1 (mod m1)` and `x ≡ r2 (mod m2)` for coprime moduli.
fn crt_pair(r1: &BigInt, m1: &BigInt, r2: &BigInt, m2: &BigInt) -> (BigInt, BigInt) {
    let gcd = m1.extended_gcd(m2);
    debug_assert!(gcd.gcd.is_one(), "moduli must be coprime");
    let m = m1 * m2;
    // x = r1 + m1 * t with t ≡ (r2 - r1) * m1^{-1} (mod m2)
    let inv = gcd.x.mod_floor(m2);
    let t = ((r2 - r1) * inv).mod_floor(m2);
    ((r1 + m1 * t).mod_floor(&m), m)
}

/// Does the list, sorted by absolute value, form a divisibility chain?
pub fn is_divisibility_chain(xs: &[BigInt]) -> bool {
    let mut sorted: Vec<&BigInt> = xs.iter().collect();
    sorted.sort_by(|a, b| (a.abs(), *a).cmp(&(b.abs(), *b)));
    sorted.windows(2).all(|w| divides(w[0], w[1]))
}

fn divides(a: &BigInt, b: &BigInt) -> bool {
    if a.is_zero() {
        b.is_zero()
    } else {
        (b % a).is_zero()
    }
}

/// Search for an arithmetic progression `(a, a+b, a+2b)` with `b != 0`
/// inside the set, by exhaustive pair scan.
pub fn find_3ap(xs: &BTreeSet<BigInt>) -> Option<(BigInt, BigInt, BigInt)> {
    let elems: Vec<&BigInt> = xs.iter().collect();
    for i in 0..elems.len() {
        for j in (i + 1)..elems.len() {
            let third = elems[j] * 2 - elems[i];
            if xs.contains(&third) {
                return Some((elems[i].clone(), elems[j].clone(), third));
            }
        }
    }
    None
}

/// `{n q_1, ..., n q_size}` for the first `size` primes not dividing `n`:
/// pairwise incomparable under divisibility and all inside `n Z`.
pub fn antichain_in_multiples(n: &BigInt, size: usize) -> Result<Vec<BigInt>, SetError> {
    if n.is_zero() {
        return Err(SetError::ZeroInput);
    }
    let mut out = Vec::with_capacity(size);
    for q in primes::PrimeStream::new() {
        if out.len() == size {
            break;
        }
        if !(n % BigInt::from(q)).is_zero() {
            out.push(n * BigInt::from(q));
        }
    }
    Ok(out)
}

/// A divisibility chain of the requested length inside a strictly periodic
/// set: find a nonzero base `a` whose whole class `a + period Z` lies in the
/// set, then take `a, a(1+period), a(1+period)^2, ...` (every term is
/// congruent to `a` modulo the period, hence stays inside).
pub fn chain_in_periodic(expr: &SetExpr, len: usize) -> Result<Vec<BigInt>, SetError> {
    chain_in_periodic_bounded(expr, len, DEFAULT_SEARCH_BOUND)
}

pub fn chain_in_periodic_bounded(
    expr: &SetExpr,
    len: usize,
    bound: u64,
) -> Result<Vec<BigInt>, SetError> {
    if len == 0 {
        return Err(SetError::Invalid("chain length must be positive".into()));
    }
    if !expr.strictly_periodic() {
        return Err(SetError::NonPeriodic);
    }
    let period = expr.period();
    for a in 1..=bound {
        // Classes repeat with the period; scanning past it cannot find a new
        // base.
        if BigUint::from(a) > period {
            break;
        }
        let r = BigUint::from(a) % &period;
        if expr.class_contained(&r, &period)? {
            let a = BigInt::from(a);
            let ratio = BigInt::from(period.clone()) + 1;
            let mut chain = Vec::with_capacity(len);
            let mut x = a;
            for _ in 0..len {
                chain.push(x.clone());
                x *= &ratio;
            }
            return Ok(chain);
        }
    }
    Err(SetError::NotFoundWithinBudget { bound })
}

/// Prefix products `x_0, x_0 x_1, ..., x_0 ... x_k`: a divisibility chain
/// inside the finite-products set of the sequence.
pub fn fp_prefix_chain(xs: &[BigInt], k: usize) -> Result<Vec<BigInt>, SetError> {
    if xs.len() < k + 1 {
        return Err(SetError::Invalid(format!(
            "need at least {} elements, got {}",
            k + 1,
            xs.len()
        )));
    }
    if !xs.windows(2).all(|w| w[0] < w[1]) {
        return Err(SetError::Invalid("sequence must be strictly increasing".into()));
    }
    if xs[0] <= BigInt::one() {
        return Err(SetError::Invalid("all elements must exceed 1".into()));
    }
    let mut out = Vec::with_capacity(k + 1);
    let mut acc = BigInt::one();
    for x in xs.iter().take(k + 1) {
        acc *= x;
        out.push(acc.clone());
    }
    Ok(out)
}

/// Which side of the union `∪ p^{phi(p)+1} Z` a finite-intersection witness
/// should land on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FipSide {
    InUnion,
    InComplement,
}

/// A finite selection from the canonical filter family of an intermediate
/// profile: exact-exponent sets `p^{phi(p)} Z ∩ (p^{phi(p)+1} Z)^c` for
/// finite positive fibers, coprimality sets `(q Z)^c` for zero fibers, and
/// power sets `r^n Z` for omega fibers.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FamilySelection {
    pub exact: Vec<u64>,
    pub coprime: Vec<u64>,
    pub powers: Vec<(u64, u32)>,
}

impl FamilySelection {
    pub fn is_empty(&self) -> bool {
        self.exact.is_empty() && self.coprime.is_empty() && self.powers.is_empty()
    }

    fn validate(&self, phi: &SupernaturalNumber) -> Result<(), SetError> {
        for &p in &self.exact {
            match phi.value_at(p) {
                Exponent::Finite(k) if k >= 1 => {}
                other => {
                    return Err(SetError::InvalidSelection(format!(
                        "exact set at {p} needs finite positive exponent, found {other}"
                    )))
                }
            }
        }
        for &q in &self.coprime {
            if phi.value_at(q) != Exponent::ZERO {
                return Err(SetError::InvalidSelection(format!(
                    "coprimality set at {q} needs exponent 0"
                )));
            }
        }
        for &(r, n) in &self.powers {
            if phi.value_at(r) != Exponent::Omega {
                return Err(SetError::InvalidSelection(format!(
                    "power set at {r} needs exponent omega"
                )));
            }
            if n == 0 {
                return Err(SetError::InvalidSelection(format!(
                    "power set at {r} needs a positive power"
                )));
            }
        }
        Ok(())
    }

    /// The selected family members as set expressions, for re-verification.
    pub fn sets(&self, phi: &SupernaturalNumber) -> Vec<SetExpr> {
        let mut out = Vec::new();
        for &p in &self.exact {
            let Exponent::Finite(k) = phi.value_at(p) else { unreachable!("validated") };
            let inside = SetExpr::residue_class(0, BigInt::from(primes::pow_biguint(p, k)))
                .expect("power positive");
            let outside = SetExpr::residue_class(0, BigInt::from(primes::pow_biguint(p, k + 1)))
                .expect("power positive")
                .complement();
            out.push(inside.intersection(outside));
        }
        for &q in &self.coprime {
            out.push(
                SetExpr::residue_class(0, BigInt::from(q)).expect("prime positive").complement(),
            );
        }
        for &(r, n) in &self.powers {
            out.push(
                SetExpr::residue_class(0, BigInt::from(primes::pow_biguint(r, n)))
                    .expect("power positive"),
            );
        }
        out
    }
}

/// The union `∪ p^{phi(p)+1} Z` determined by a profile.
pub fn profile_union_set(phi: &SupernaturalNumber) -> SetExpr {
    SetExpr::prime_power_union(phi.successor()).expect("successor exponents are >= 1")
}

/// A finite-intersection witness for an intermediate profile: an integer in
/// every selected family set and, per `side`, in the union
/// `∪ p^{phi(p)+1} Z` or in its complement. The construction multiplies the
/// canonical base element of the selection by one extra prime drawn from
/// whichever fiber of `phi` is infinite.
pub fn phidf_witness(
    phi: &SupernaturalNumber,
    selection: &FamilySelection,
    side: FipSide,
) -> Result<BigInt, SetError> {
    if phi.classify() != SnClass::Intermediate {
        return Err(SetError::NotIntermediate(phi.classify()));
    }
    selection.validate(phi)?;
    if selection.is_empty() && side == FipSide::InComplement {
        // 1 avoids every p^{phi(p)+1} Z.
        return Ok(BigInt::one());
    }
    let mut base = BigInt::one();
    for &p in &selection.exact {
        let Exponent::Finite(k) = phi.value_at(p) else { unreachable!("validated") };
        base *= BigInt::from(primes::pow_biguint(p, k));
    }
    for &(r, n) in &selection.powers {
        base *= BigInt::from(primes::pow_biguint(r, n));
    }
    let positive_finite =
        |e: Exponent| matches!(e, Exponent::Finite(k) if k >= 1);
    if phi.infinitely_many(positive_finite) {
        let fresh = phi
            .primes_where(positive_finite, selection.exact.len() + 1)
            .into_iter()
            .find(|p| !selection.exact.contains(p))
            .ok_or_else(|| SetError::InvalidSelection("no fresh finite-fiber prime".into()))?;
        let Exponent::Finite(k) = phi.value_at(fresh) else { unreachable!("finite fiber") };
        Ok(match side {
            FipSide::InUnion => base * BigInt::from(primes::pow_biguint(fresh, k + 1)),
            FipSide::InComplement => base * BigInt::from(fresh),
        })
    } else {
        // Intermediate with finite positive fiber finite: the zero fiber is
        // infinite.
        let fresh = phi
            .primes_where(|e| e.is_zero(), selection.coprime.len() + 1)
            .into_iter()
            .find(|q| !selection.coprime.contains(q))
            .ok_or_else(|| SetError::InvalidSelection("no fresh zero-fiber prime".into()))?;
        Ok(match side {
            FipSide::InUnion => base * BigInt::from(fresh),
            FipSide::InComplement => base,
        })
    }
}

impl fmt::Display for SetExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SetExpr::ResidueClass { rem, modulus } => write!(f, "res({rem},{modulus})"),
            SetExpr::Interval { lo, hi } => write!(f, "int({lo},{hi})"),
            SetExpr::FiniteSet(set) => {
                write!(f, "fin{{")?;
                for (i, e) in set.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{e}")?;
                }
                write!(f, "}}")
            }
            SetExpr::PrimePowerUnion(alpha) => write!(f, "ppu({alpha})"),
            SetExpr::Complement(inner) => write!(f, "!({inner})"),
            SetExpr::Union(a, b) => write!(f, "({a} | {b})"),
            SetExpr::Intersection(a, b) => write!(f, "({a} & {b})"),
        }
    }
}

struct Parser<'a> {
    input: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn new(input: &'a str) -> Self {
        Parser { input: input.as_bytes(), pos: 0 }
    }

    fn error(&self, msg: impl Into<String>) -> SetError {
        SetError::Parse(format!("{} at byte {}", msg.into(), self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.input.get(self.pos).copied()
    }

    fn eat(&mut self, expected: u8) -> Result<(), SetError> {
        if self.peek() == Some(expected) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{}`", expected as char)))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        self.skip_ws();
        if self.input[self.pos..].starts_with(kw.as_bytes()) {
            self.pos += kw.len();
            true
        } else {
            false
        }
    }

    fn parse_int(&mut self) -> Result<BigInt, SetError> {
        self.skip_ws();
        let start = self.pos;
        if self.input.get(self.pos) == Some(&b'-') {
            self.pos += 1;
        }
        while self.pos < self.input.len() && self.input[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        let text = std::str::from_utf8(&self.input[start..self.pos]).expect("ascii");
        text.parse().map_err(|_| self.error("expected integer"))
    }

    fn parse_expr(&mut self) -> Result<SetExpr, SetError> {
        match self.peek() {
            Some(b'!') => {
                self.pos += 1;
                self.eat(b'(')?;
                let inner = self.parse_expr()?;
                self.eat(b')')?;
                Ok(inner.complement())
            }
            Some(b'(') => {
                self.pos += 1;
                let left = self.parse_expr()?;
                let op = self.peek().ok_or_else(|| self.error("expected `&` or `|`"))?;
                if op != b'&' && op != b'|' {
                    return Err(self.error("expected `&` or `|`"));
                }
                self.pos += 1;
                let right = self.parse_expr()?;
                self.eat(b')')?;
                Ok(if op == b'&' { left.intersection(right) } else { left.union(right) })
            }
            Some(_) if self.eat_keyword("res") => {
                self.eat(b'(')?;
                let rem = self.parse_int()?;
                self.eat(b',')?;
                let modulus = self.parse_int()?;
                self.eat(b')')?;
                SetExpr::residue_class(rem, modulus)
            }
            Some(_) if self.eat_keyword("int") => {
                self.eat(b'(')?;
                let lo = self.parse_int()?;
                self.eat(b',')?;
                let hi = self.parse_int()?;
                self.eat(b')')?;
                Ok(SetExpr::interval(lo, hi))
            }
            Some(_) if self.eat_keyword("fin") => {
                self.eat(b'{')?;
                let mut elems = Vec::new();
                if self.peek() != Some(b'}') {
                    loop {
                        elems.push(self.parse_int()?);
                        match self.peek() {
                            Some(b',') => self.pos += 1,
                            _ => break,
                        }
                    }
                }
                self.eat(b'}')?;
                Ok(SetExpr::finite(elems))
            }
            Some(_) if self.eat_keyword("ppu") => {
                self.eat(b'(')?;
                // The supernatural literal may itself contain parentheses
                // (parity defaults); take the balanced span.
                let start = self.pos;
                let mut depth = 1usize;
                while self.pos < self.input.len() {
                    match self.input[self.pos] {
                        b'(' => depth += 1,
                        b')' => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    self.pos += 1;
                }
                if depth != 0 {
                    return Err(self.error("unclosed ppu("));
                }
                let literal = std::str::from_utf8(&self.input[start..self.pos]).expect("ascii");
                self.pos += 1; // closing paren
                let alpha: SupernaturalNumber =
                    literal.parse().map_err(|e: crate::supernatural::SnError| {
                        SetError::Parse(e.to_string())
                    })?;
                SetExpr::prime_power_union(alpha)
            }
            _ => Err(self.error("expected a set expression")),
        }
    }
}

impl FromStr for SetExpr {
    type Err = SetError;

    /// Grammar: `res(a,n) | int(lo,hi) | fin{...} | ppu(<supernatural>) |
    /// !(S) | (S & S) | (S | S)`.
    fn from_str(s: &str) -> Result<Self, SetError> {
        let mut parser = Parser::new(s);
        let expr = parser.parse_expr()?;
        parser.skip_ws();
        if parser.pos != parser.input.len() {
            return Err(parser.error("trailing input"));
        }
        Ok(expr)
    }
}
