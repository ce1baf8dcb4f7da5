//! Truncated profinite-integer arithmetic.
//!
//! A `PrecisionContext` is a finite window onto the profinite completion of
//! the integers: finitely many primes, each with a positive exponent cap. A
//! `ProfiniteInt` is either the diagonal image of a known integer (`Shadow`)
//! or a tuple of residues modulo `p^cap(p)` (`Window`). Shadows keep the
//! exact integer around, so valuations above the cap stay exact whenever the
//! integer is known; windows honestly report `AtLeast(cap)` where truncation
//! hides the answer.
//!
//! Only the additive group structure feeds the quotient machinery here. The
//! window is also a commutative ring under coordinatewise multiplication and
//! a multiplicative variant of the quotient story exists (closed ideals in
//! place of closed subgroups); it is not materialised in this crate. The
//! identification of these quotients with ultraproducts of cyclic rings
//! needs a genuine ultrafilter and is likewise out of scope: only the
//! completion side is computed.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_traits::{One, Zero};
use thiserror::Error;

use crate::primes;
use crate::supernatural::{DefaultRule, Exponent, SupernaturalNumber};
use crate::tri::TriBool;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PfError {
    #[error("operands live in different precision contexts")]
    ContextMismatch,
    #[error("prime {0} is not part of the precision context")]
    UnknownPrime(u64),
    #[error("residue at prime {prime} out of range for cap {cap}")]
    ResidueOutOfRange { prime: u64, cap: u32 },
    #[error("value out of range: {0}")]
    ValueOutOfRange(String),
    #[error("invalid precision context: {0}")]
    InvalidContext(String),
    #[error("context too small: prime {prime} needs exponent {needed}, cap is {cap}")]
    ContextTooSmall { prime: u64, needed: u32, cap: u32 },
}

/// Finitely many primes with positive exponent caps; the window modulus is
/// the product of the prime powers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrecisionContext {
    primes: Vec<u64>,
    caps: BTreeMap<u64, u32>,
    modulus: BigUint,
}

pub type Ctx = Arc<PrecisionContext>;

impl PrecisionContext {
    pub fn new(caps: impl IntoIterator<Item = (u64, u32)>) -> Result<Ctx, PfError> {
        let mut map = BTreeMap::new();
        for (p, cap) in caps {
            if !primes::is_prime(p) {
                return Err(PfError::InvalidContext(format!("{p} is not prime")));
            }
            if cap == 0 {
                return Err(PfError::InvalidContext(format!("cap at {p} must be positive")));
            }
            if map.insert(p, cap).is_some() {
                return Err(PfError::InvalidContext(format!("duplicate prime {p}")));
            }
        }
        if map.is_empty() {
            return Err(PfError::InvalidContext("context needs at least one prime".into()));
        }
        let primes: Vec<u64> = map.keys().copied().collect();
        let modulus = map.iter().map(|(&p, &c)| primes::pow_biguint(p, c)).product();
        Ok(Arc::new(PrecisionContext { primes, caps: map, modulus }))
    }

    /// The first `count` primes, all with the same cap.
    pub fn uniform(count: usize, cap: u32) -> Ctx {
        let caps: Vec<(u64, u32)> = primes::first_primes(count).into_iter().map(|p| (p, cap)).collect();
        Self::new(caps).expect("uniform context is valid")
    }

    /// The CLI default: first 10 primes, cap 6 each.
    pub fn default_context() -> Ctx {
        Self::uniform(10, 6)
    }

    pub fn primes(&self) -> &[u64] {
        &self.primes
    }

    pub fn contains(&self, p: u64) -> bool {
        self.caps.contains_key(&p)
    }

    pub fn cap(&self, p: u64) -> Result<u32, PfError> {
        self.caps.get(&p).copied().ok_or(PfError::UnknownPrime(p))
    }

    /// `p^cap(p)`.
    pub fn prime_power(&self, p: u64) -> Result<BigUint, PfError> {
        Ok(primes::pow_biguint(p, self.cap(p)?))
    }

    pub fn modulus(&self) -> &BigUint {
        &self.modulus
    }

    pub fn to_json(&self) -> serde_json::Value {
        let caps: serde_json::Map<String, serde_json::Value> = self
            .caps
            .iter()
            .map(|(p, c)| (p.to_string(), serde_json::Value::from(*c)))
            .collect();
        serde_json::json!({ "primes": self.primes, "cap": caps })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Ctx, PfError> {
        let caps = value
            .get("cap")
            .and_then(|c| c.as_object())
            .ok_or_else(|| PfError::InvalidContext("missing cap map".into()))?;
        let mut pairs = Vec::new();
        for (p, c) in caps {
            let p: u64 = p
                .parse()
                .map_err(|_| PfError::InvalidContext(format!("bad prime key {p}")))?;
            let c = c
                .as_u64()
                .and_then(|c| u32::try_from(c).ok())
                .ok_or_else(|| PfError::InvalidContext(format!("bad cap at {p}")))?;
            pairs.push((p, c));
        }
        Self::new(pairs)
    }
}

/// Exact or truncated knowledge of a p-adic valuation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Valuation {
    Exact(u32),
    AtLeast(u32),
}

impl Valuation {
    /// Is the valuation provably `>= k`?
    pub fn provably_at_least(self, k: u32) -> bool {
        match self {
            Valuation::Exact(v) | Valuation::AtLeast(v) => v >= k,
        }
    }

    /// Is the valuation provably `< k`?
    pub fn provably_below(self, k: u32) -> bool {
        match self {
            Valuation::Exact(v) => v < k,
            Valuation::AtLeast(_) => false,
        }
    }
}

impl fmt::Display for Valuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Valuation::Exact(k) => write!(f, "={k}"),
            Valuation::AtLeast(k) => write!(f, ">={k}"),
        }
    }
}

/// Ultrametric rule for the valuation of a sum: the minimum is exact when the
/// two summands provably differ, otherwise only a lower bound survives.
pub fn val_of_sum(a: Valuation, b: Valuation) -> Valuation {
    use Valuation::*;
    match (a, b) {
        (Exact(x), Exact(y)) => {
            if x == y {
                AtLeast(x)
            } else {
                Exact(x.min(y))
            }
        }
        (Exact(x), AtLeast(y)) | (AtLeast(y), Exact(x)) => {
            if x < y {
                Exact(x)
            } else {
                AtLeast(y)
            }
        }
        (AtLeast(x), AtLeast(y)) => AtLeast(x.min(y)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingOp {
    Add,
    Sub,
    Mul,
    Neg,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PfForm {
    /// The diagonal image of a known integer.
    Shadow(BigInt),
    /// Residues `0 <= r < p^cap(p)`, one per context prime.
    Window(BTreeMap<u64, BigUint>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProfiniteInt {
    ctx: Ctx,
    form: PfForm,
}

impl ProfiniteInt {
    pub fn shadow(ctx: &Ctx, n: BigInt) -> ProfiniteInt {
        ProfiniteInt { ctx: Arc::clone(ctx), form: PfForm::Shadow(n) }
    }

    /// A window with a residue for every context prime.
    pub fn window(ctx: &Ctx, residues: BTreeMap<u64, BigUint>) -> Result<ProfiniteInt, PfError> {
        for &p in ctx.primes() {
            let r = residues.get(&p).ok_or(PfError::UnknownPrime(p))?;
            if *r >= ctx.prime_power(p)? {
                return Err(PfError::ResidueOutOfRange { prime: p, cap: ctx.cap(p)? });
            }
        }
        if residues.len() != ctx.primes().len() {
            let stray = residues.keys().find(|p| !ctx.contains(**p)).copied().unwrap_or(0);
            return Err(PfError::UnknownPrime(stray));
        }
        Ok(ProfiniteInt { ctx: Arc::clone(ctx), form: PfForm::Window(residues) })
    }

    /// A window from a partial residue map; missing primes get residue 0.
    pub fn window_sparse(
        ctx: &Ctx,
        residues: impl IntoIterator<Item = (u64, BigUint)>,
    ) -> Result<ProfiniteInt, PfError> {
        let mut full: BTreeMap<u64, BigUint> =
            ctx.primes().iter().map(|&p| (p, BigUint::zero())).collect();
        for (p, r) in residues {
            if !ctx.contains(p) {
                return Err(PfError::UnknownPrime(p));
            }
            full.insert(p, r);
        }
        Self::window(ctx, full)
    }

    pub fn context(&self) -> &Ctx {
        &self.ctx
    }

    pub fn form(&self) -> &PfForm {
        &self.form
    }

    pub fn is_shadow(&self) -> bool {
        matches!(self.form, PfForm::Shadow(_))
    }

    pub fn shadow_value(&self) -> Option<&BigInt> {
        match &self.form {
            PfForm::Shadow(n) => Some(n),
            PfForm::Window(_) => None,
        }
    }

    /// The residue modulo `p^cap(p)`.
    pub fn residue(&self, p: u64) -> Result<BigUint, PfError> {
        let pk = self.ctx.prime_power(p)?;
        match &self.form {
            PfForm::Shadow(n) => {
                let m = n.mod_floor(&BigInt::from(pk.clone()));
                Ok(m.to_biguint().expect("mod_floor of positive modulus is non-negative"))
            }
            PfForm::Window(rs) => Ok(rs[&p].clone()),
        }
    }

    /// All residues, keyed by context prime.
    pub fn residues(&self) -> BTreeMap<u64, BigUint> {
        self.ctx
            .primes()
            .iter()
            .map(|&p| (p, self.residue(p).expect("context prime")))
            .collect()
    }

    /// Exactly the integer zero (not merely zero at this precision).
    pub fn is_exact_zero(&self) -> bool {
        matches!(&self.form, PfForm::Shadow(n) if n.is_zero())
    }

    /// Zero in every coordinate of the window.
    pub fn is_zero_at_precision(&self) -> bool {
        match &self.form {
            PfForm::Shadow(n) => n.mod_floor(&BigInt::from(self.ctx.modulus().clone())).is_zero(),
            PfForm::Window(rs) => rs.values().all(|r| r.is_zero()),
        }
    }

    fn expand(&self) -> BTreeMap<u64, BigUint> {
        self.residues()
    }

    pub fn add(&self, other: &ProfiniteInt) -> Result<ProfiniteInt, PfError> {
        pf_ring(RingOp::Add, self, Some(other))
    }

    pub fn sub(&self, other: &ProfiniteInt) -> Result<ProfiniteInt, PfError> {
        pf_ring(RingOp::Sub, self, Some(other))
    }

    pub fn mul(&self, other: &ProfiniteInt) -> Result<ProfiniteInt, PfError> {
        pf_ring(RingOp::Mul, self, Some(other))
    }

    pub fn neg(&self) -> ProfiniteInt {
        pf_ring(RingOp::Neg, self, None).expect("negation cannot mismatch contexts")
    }

    /// Valuation at a context prime. Shadows of nonzero integers report the
    /// exact integer valuation even above the cap; the shadow of zero and
    /// zero window residues report `AtLeast(cap)`.
    pub fn valuation(&self, p: u64) -> Result<Valuation, PfError> {
        let cap = self.ctx.cap(p)?;
        match &self.form {
            PfForm::Shadow(n) => {
                if n.is_zero() {
                    Ok(Valuation::AtLeast(cap))
                } else {
                    Ok(Valuation::Exact(primes::valuation(n, p)))
                }
            }
            PfForm::Window(rs) => {
                let r = &rs[&p];
                if r.is_zero() {
                    Ok(Valuation::AtLeast(cap))
                } else {
                    Ok(Valuation::Exact(primes::valuation(&BigInt::from(r.clone()), p)))
                }
            }
        }
    }

    /// Collapse to the residue modulo the full context modulus.
    pub fn crt_pack(&self) -> BigUint {
        let modulus = BigInt::from(self.ctx.modulus().clone());
        match &self.form {
            PfForm::Shadow(n) => n
                .mod_floor(&modulus)
                .to_biguint()
                .expect("mod_floor of positive modulus is non-negative"),
            PfForm::Window(rs) => {
                let big_n = BigInt::from(self.ctx.modulus().clone());
                let mut acc = BigInt::zero();
                for (&p, r) in rs {
                    let pk = BigInt::from(self.ctx.prime_power(p).expect("context prime"));
                    let np = &big_n / &pk;
                    let gcd = np.extended_gcd(&pk);
                    debug_assert!(gcd.gcd.is_one());
                    let inv = gcd.x.mod_floor(&pk);
                    acc += BigInt::from(r.clone()) * &np * inv;
                }
                acc.mod_floor(&big_n).to_biguint().expect("non-negative")
            }
        }
    }

    /// Inverse of `crt_pack` on window forms: split `r` into residues.
    pub fn crt_unpack(ctx: &Ctx, r: &BigUint) -> Result<ProfiniteInt, PfError> {
        if r >= ctx.modulus() {
            return Err(PfError::ValueOutOfRange(format!(
                "{r} is not below the context modulus {}",
                ctx.modulus()
            )));
        }
        let residues: BTreeMap<u64, BigUint> = ctx
            .primes()
            .iter()
            .map(|&p| (p, r % ctx.prime_power(p).expect("context prime")))
            .collect();
        Self::window(ctx, residues)
    }

    pub fn to_json(&self) -> serde_json::Value {
        match &self.form {
            PfForm::Shadow(n) => serde_json::json!({
                "ctx": self.ctx.to_json(),
                "form": "shadow",
                "value": n.to_string(),
            }),
            PfForm::Window(rs) => {
                let residues: serde_json::Map<String, serde_json::Value> = rs
                    .iter()
                    .map(|(p, r)| (p.to_string(), serde_json::Value::from(r.to_string())))
                    .collect();
                serde_json::json!({
                    "ctx": self.ctx.to_json(),
                    "form": "window",
                    "residues": residues,
                })
            }
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Result<ProfiniteInt, PfError> {
        let ctx = PrecisionContext::from_json(
            value.get("ctx").ok_or_else(|| PfError::InvalidContext("missing ctx".into()))?,
        )?;
        match value.get("form").and_then(|f| f.as_str()) {
            Some("shadow") => {
                let n = value
                    .get("value")
                    .and_then(|v| v.as_str())
                    .and_then(|s| s.parse::<BigInt>().ok())
                    .ok_or_else(|| PfError::ValueOutOfRange("bad shadow value".into()))?;
                Ok(ProfiniteInt::shadow(&ctx, n))
            }
            Some("window") => {
                let residues = value
                    .get("residues")
                    .and_then(|r| r.as_object())
                    .ok_or_else(|| PfError::ValueOutOfRange("missing residues".into()))?;
                let mut map = BTreeMap::new();
                for (p, r) in residues {
                    let p: u64 = p
                        .parse()
                        .map_err(|_| PfError::ValueOutOfRange(format!("bad prime key {p}")))?;
                    let r = r
                        .as_str()
                        .and_then(|s| s.parse::<BigUint>().ok())
                        .ok_or_else(|| PfError::ValueOutOfRange(format!("bad residue at {p}")))?;
                    map.insert(p, r);
                }
                Self::window(&ctx, map)
            }
            _ => Err(PfError::ValueOutOfRange("form must be shadow or window".into())),
        }
    }
}

/// Coordinatewise ring arithmetic. Shadows combine exactly to shadows; any
/// window operand degrades the result to a window.
pub fn pf_ring(
    op: RingOp,
    a: &ProfiniteInt,
    b: Option<&ProfiniteInt>,
) -> Result<ProfiniteInt, PfError> {
    if let Some(b) = b {
        if a.ctx.as_ref() != b.ctx.as_ref() {
            return Err(PfError::ContextMismatch);
        }
    }
    match op {
        RingOp::Neg => match &a.form {
            PfForm::Shadow(n) => Ok(ProfiniteInt::shadow(&a.ctx, -n)),
            PfForm::Window(_) => {
                let residues: BTreeMap<u64, BigUint> = a
                    .expand()
                    .into_iter()
                    .map(|(p, r)| {
                        let pk = a.ctx.prime_power(p).expect("context prime");
                        let neg = if r.is_zero() { r } else { pk - r };
                        (p, neg)
                    })
                    .collect();
                ProfiniteInt::window(&a.ctx, residues)
            }
        },
        RingOp::Add | RingOp::Sub | RingOp::Mul => {
            let b = b.expect("binary op needs two operands");
            match (&a.form, &b.form) {
                (PfForm::Shadow(x), PfForm::Shadow(y)) => {
                    let n = match op {
                        RingOp::Add => x + y,
                        RingOp::Sub => x - y,
                        RingOp::Mul => x * y,
                        RingOp::Neg => unreachable!(),
                    };
                    Ok(ProfiniteInt::shadow(&a.ctx, n))
                }
                _ => {
                    let xs = a.expand();
                    let ys = b.expand();
                    let residues: BTreeMap<u64, BigUint> = xs
                        .into_iter()
                        .map(|(p, x)| {
                            let pk = BigInt::from(a.ctx.prime_power(p).expect("context prime"));
                            let x = BigInt::from(x);
                            let y = BigInt::from(ys[&p].clone());
                            let z = match op {
                                RingOp::Add => x + y,
                                RingOp::Sub => x - y,
                                RingOp::Mul => x * y,
                                RingOp::Neg => unreachable!(),
                            };
                            (p, z.mod_floor(&pk).to_biguint().expect("non-negative"))
                        })
                        .collect();
                    ProfiniteInt::window(&a.ctx, residues)
                }
            }
        }
    }
}

/// Membership of `x` in the closed subgroup with exponent map `phi`
/// (the subgroup of profinite integers divisible by `p^{phi(p)}` for all `p`).
///
/// Exact for shadows. For windows, truncation can leave the verdict open:
/// `phi(p) > cap(p)` with a zero residue, or `phi(p) = omega`, only ever
/// witnesses divisibility up to the cap.
pub fn subgroup_member(phi: &SupernaturalNumber, x: &ProfiniteInt) -> TriBool {
    match &x.form {
        PfForm::Shadow(n) => {
            if n.is_zero() {
                return TriBool::True;
            }
            // A nonzero default arm demands positive valuation at infinitely
            // many primes, which a nonzero integer cannot supply.
            if phi.default_rule().arms().iter().any(|e| !e.is_zero()) {
                return TriBool::False;
            }
            for (&p, &e) in phi.exceptions() {
                match e {
                    Exponent::Finite(0) => {}
                    Exponent::Finite(k) => {
                        if primes::valuation(n, p) < k {
                            return TriBool::False;
                        }
                    }
                    Exponent::Omega => return TriBool::False,
                }
            }
            TriBool::True
        }
        PfForm::Window(_) => {
            let mut undetermined = false;
            for &p in x.ctx.primes() {
                let val = x.valuation(p).expect("context prime");
                match phi.value_at(p) {
                    Exponent::Finite(0) => {}
                    Exponent::Finite(k) => {
                        if val.provably_at_least(k) {
                            continue;
                        }
                        if val.provably_below(k) {
                            return TriBool::False;
                        }
                        undetermined = true;
                    }
                    Exponent::Omega => match val {
                        Valuation::Exact(_) => return TriBool::False,
                        Valuation::AtLeast(_) => undetermined = true,
                    },
                }
            }
            // Outside the context the window carries no information at all.
            let outside_demands = phi.default_rule().arms().iter().any(|e| !e.is_zero())
                || phi
                    .exceptions()
                    .iter()
                    .any(|(p, e)| !x.ctx.contains(*p) && !e.is_zero());
            if outside_demands {
                undetermined = true;
            }
            if undetermined {
                TriBool::Undetermined
            } else {
                TriBool::True
            }
        }
    }
}

/// One factor of a procyclic quotient group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Component {
    /// The cyclic group of order `p^exponent`.
    Cyclic { exponent: u32 },
    /// The additive p-adic integers, materialised only up to `cap` digits.
    FullPadic { cap: u32 },
}

/// Product over the context primes of cyclic or truncated p-adic components,
/// with the behaviour outside the context kept as metadata.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProcyclicQuotient {
    ctx: Ctx,
    components: BTreeMap<u64, Component>,
    tail_default: DefaultRule,
    outside_exceptions: BTreeMap<u64, Exponent>,
}

/// The quotient group determined by an exponent profile: a cyclic factor of
/// order `p^{phi(p)}` where the exponent is finite, the full (truncated)
/// p-adic factor where it is omega.
pub fn quotient_from_profile(phi: &SupernaturalNumber, ctx: &Ctx) -> ProcyclicQuotient {
    let components: BTreeMap<u64, Component> = ctx
        .primes()
        .iter()
        .map(|&p| {
            let comp = match phi.value_at(p) {
                Exponent::Finite(k) => Component::Cyclic { exponent: k },
                Exponent::Omega => Component::FullPadic { cap: ctx.cap(p).expect("context prime") },
            };
            (p, comp)
        })
        .collect();
    let outside_exceptions: BTreeMap<u64, Exponent> = phi
        .exceptions()
        .iter()
        .filter(|(p, _)| !ctx.contains(**p))
        .map(|(&p, &e)| (p, e))
        .collect();
    ProcyclicQuotient {
        ctx: Arc::clone(ctx),
        components,
        tail_default: phi.default_rule(),
        outside_exceptions,
    }
}

impl ProcyclicQuotient {
    pub fn context(&self) -> &Ctx {
        &self.ctx
    }

    pub fn components(&self) -> &BTreeMap<u64, Component> {
        &self.components
    }

    pub fn component(&self, p: u64) -> Option<&Component> {
        self.components.get(&p)
    }

    /// Default rule summarising the components at primes outside the context.
    pub fn tail_default(&self) -> DefaultRule {
        self.tail_default
    }

    pub fn outside_exceptions(&self) -> &BTreeMap<u64, Exponent> {
        &self.outside_exceptions
    }

    /// Group modulus of the component at `p` as materialised: `p^exponent`
    /// for cyclic parts, `p^cap` for truncated p-adic parts.
    pub fn component_modulus(&self, p: u64) -> Option<BigUint> {
        self.components.get(&p).map(|c| match c {
            Component::Cyclic { exponent } => primes::pow_biguint(p, *exponent),
            Component::FullPadic { cap } => primes::pow_biguint(p, *cap),
        })
    }

    pub fn is_trivial(&self) -> bool {
        self.components.values().all(|c| matches!(c, Component::Cyclic { exponent: 0 }))
            && self.tail_default == DefaultRule::Const(Exponent::ZERO)
            && self.outside_exceptions.values().all(|e| e.is_zero())
    }

    pub fn identity(self: &Arc<Self>) -> QuotientElement {
        let coords = self.components.keys().map(|&p| (p, BigUint::zero())).collect();
        QuotientElement { quotient: Arc::clone(self), coords }
    }

    fn component_label(&self, p: u64) -> String {
        match &self.components[&p] {
            Component::Cyclic { exponent } => format!("Z/{}", primes::pow_biguint(p, *exponent)),
            Component::FullPadic { .. } => format!("Z{p}(truncated)"),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let comps: serde_json::Map<String, serde_json::Value> = self
            .components
            .keys()
            .map(|&p| (p.to_string(), serde_json::Value::from(self.component_label(p))))
            .collect();
        serde_json::json!({
            "components": comps,
            "tail_default": self.tail_default.to_string(),
            "outside_exceptions": self
                .outside_exceptions
                .iter()
                .map(|(p, e)| (p.to_string(), serde_json::Value::from(e.to_string())))
                .collect::<serde_json::Map<_, _>>(),
        })
    }

    /// Human-readable product, nontrivial components only.
    pub fn display_product(&self) -> String {
        let parts: Vec<String> = self
            .components
            .iter()
            .filter(|(_, c)| !matches!(c, Component::Cyclic { exponent: 0 }))
            .map(|(&p, _)| self.component_label(p))
            .collect();
        if parts.is_empty() {
            "trivial".to_string()
        } else {
            parts.join(" x ")
        }
    }
}

/// An element of a procyclic quotient, with each coordinate reduced modulo
/// its component's modulus.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QuotientElement {
    quotient: Arc<ProcyclicQuotient>,
    coords: BTreeMap<u64, BigUint>,
}

/// Order of an element as far as the precision window can tell.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ElementOrder {
    Finite(BigUint),
    /// Some truncated p-adic coordinate is nonzero; p-adic integers are
    /// torsion-free, so no finite order exists.
    InfiniteAtPrecision,
}

impl QuotientElement {
    pub fn quotient(&self) -> &Arc<ProcyclicQuotient> {
        &self.quotient
    }

    pub fn coords(&self) -> &BTreeMap<u64, BigUint> {
        &self.coords
    }

    pub fn coord(&self, p: u64) -> Option<&BigUint> {
        self.coords.get(&p)
    }

    pub fn is_identity(&self) -> bool {
        self.coords.values().all(|c| c.is_zero())
    }

    pub fn add(&self, other: &QuotientElement) -> Result<QuotientElement, PfError> {
        if self.quotient.as_ref() != other.quotient.as_ref() {
            return Err(PfError::ContextMismatch);
        }
        let coords: BTreeMap<u64, BigUint> = self
            .coords
            .iter()
            .map(|(&p, a)| {
                let m = self.quotient.component_modulus(p).expect("component prime");
                (p, (a + &other.coords[&p]) % m)
            })
            .collect();
        Ok(QuotientElement { quotient: Arc::clone(&self.quotient), coords })
    }

    /// lcm of the coordinate orders in the cyclic components; coordinates in
    /// truncated p-adic components must vanish at precision or the element
    /// has no finite order.
    pub fn order(&self) -> ElementOrder {
        let mut lcm = BigUint::one();
        for (&p, coord) in &self.coords {
            match &self.quotient.components[&p] {
                Component::Cyclic { exponent } => {
                    let m = primes::pow_biguint(p, *exponent);
                    let ord = if m.is_one() { BigUint::one() } else { &m / coord.gcd(&m) };
                    lcm = lcm.lcm(&ord);
                }
                Component::FullPadic { .. } => {
                    if !coord.is_zero() {
                        return ElementOrder::InfiniteAtPrecision;
                    }
                }
            }
        }
        ElementOrder::Finite(lcm)
    }

    /// lcm of the coordinate orders over the cyclic components alone.
    pub fn torsion_order(&self) -> BigUint {
        let mut lcm = BigUint::one();
        for (&p, coord) in &self.coords {
            if let Component::Cyclic { exponent } = &self.quotient.components[&p] {
                let m = primes::pow_biguint(p, *exponent);
                let ord = if m.is_one() { BigUint::one() } else { &m / coord.gcd(&m) };
                lcm = lcm.lcm(&ord);
            }
        }
        lcm
    }
}

/// Project a profinite integer into a quotient: reduce modulo `p^{phi(p)}`
/// into cyclic components, pass through (at precision) into p-adic ones.
/// Window inputs need `cap(p) >= exponent` at every cyclic component.
pub fn sigma_w(x: &ProfiniteInt, quotient: &Arc<ProcyclicQuotient>) -> Result<QuotientElement, PfError> {
    if x.context().as_ref() != quotient.ctx.as_ref() {
        return Err(PfError::ContextMismatch);
    }
    let mut coords = BTreeMap::new();
    for (&p, comp) in &quotient.components {
        let coord = match comp {
            Component::Cyclic { exponent } => {
                let m = primes::pow_biguint(p, *exponent);
                match &x.form {
                    PfForm::Shadow(n) => n
                        .mod_floor(&BigInt::from(m))
                        .to_biguint()
                        .expect("non-negative"),
                    PfForm::Window(_) => {
                        let cap = x.context().cap(p)?;
                        if *exponent > cap {
                            return Err(PfError::ContextTooSmall {
                                prime: p,
                                needed: *exponent,
                                cap,
                            });
                        }
                        x.residue(p)? % m
                    }
                }
            }
            Component::FullPadic { .. } => x.residue(p)?,
        };
        coords.insert(p, coord);
    }
    Ok(QuotientElement { quotient: Arc::clone(quotient), coords })
}
