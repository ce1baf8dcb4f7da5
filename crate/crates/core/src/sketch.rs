//! Finitely represented ultrafilter proxies and the decision engine for the
//! divisibility and congruence relations between them.
//!
//! A sketch is either a principal sketch (an integer) or a profile: an exact
//! exponent map, a truncated remainder tuple, a principality tag and a
//! self-divisibility status. The engine answers queries with three-valued
//! verdicts carrying replayable rule traces. `Undetermined` always means
//! "this finite representation does not decide", never a guess.
//!
//! Exponent maps of derived sketches (sums) can be widened: where the
//! ultrametric rule cannot pin the valuation of a sum, the map stores a lower
//! bound and the prime is flagged. Widened positions never participate in a
//! decisive comparison.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use thiserror::Error;

use crate::profinite::{
    quotient_from_profile, sigma_w, Ctx, PfError, ProfiniteInt, QuotientElement, Valuation,
};
use crate::primes;
use crate::setalg::{phidf_witness, profile_union_set, FamilySelection, FipSide, SetError};
use crate::supernatural::{DefaultRule, Exponent, SnClass, SnError, SupernaturalNumber};
use crate::tri::TriBool;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SketchError {
    #[error("the relations are undefined modulo the zero sketch")]
    ZeroModulus,
    #[error("sketch is inconsistent: {0}")]
    Inconsistent(String),
    #[error("self-divisibility forcing violated: {0}")]
    ForcingViolation(String),
    #[error("powers must be distinct positive integers")]
    BadPowers,
    #[error("no context prime carries a finite exponent to build the witness from")]
    NoFinitePrimeInContext,
    #[error(transparent)]
    Profinite(#[from] PfError),
    #[error(transparent)]
    Supernatural(#[from] SnError),
    #[error(transparent)]
    Set(#[from] SetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Principality {
    NonPrincipal,
    Unknown,
}

impl Principality {
    pub fn as_str(self) -> &'static str {
        match self {
            Principality::NonPrincipal => "nonprincipal",
            Principality::Unknown => "unknown",
        }
    }
}

/// Primes at which a profile's exponent is only a lower bound.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WidenMask {
    even: bool,
    odd: bool,
    exceptions: BTreeMap<u64, bool>,
}

impl WidenMask {
    pub fn none() -> WidenMask {
        WidenMask::default()
    }

    fn new(even: bool, odd: bool, exceptions: impl IntoIterator<Item = (u64, bool)>) -> WidenMask {
        let mut mask = WidenMask { even, odd, exceptions: BTreeMap::new() };
        for (p, w) in exceptions {
            if mask.arm_at(p) != w {
                mask.exceptions.insert(p, w);
            }
        }
        mask
    }

    fn arm_at(&self, p: u64) -> bool {
        if self.even == self.odd {
            return self.even;
        }
        let idx = primes::prime_index(p).expect("mask evaluated at a prime");
        if idx.is_multiple_of(2) {
            self.even
        } else {
            self.odd
        }
    }

    pub fn at(&self, p: u64) -> bool {
        match self.exceptions.get(&p) {
            Some(&w) => w,
            None => self.arm_at(p),
        }
    }

    pub fn any(&self) -> bool {
        self.even || self.odd || self.exceptions.values().any(|&w| w)
    }

    fn arms(&self) -> (bool, bool) {
        (self.even, self.odd)
    }

    fn unwiden(&mut self, p: u64) {
        if self.arm_at(p) {
            self.exceptions.insert(p, false);
        } else {
            self.exceptions.remove(&p);
        }
    }
}

/// A non-principal (or principality-unknown) ultrafilter proxy.
#[derive(Debug, Clone)]
pub struct Profile {
    phi: SupernaturalNumber,
    widened: WidenMask,
    pi: ProfiniteInt,
    principality: Principality,
    selfdiv: TriBool,
    label: String,
}

impl Profile {
    pub fn phi(&self) -> &SupernaturalNumber {
        &self.phi
    }

    pub fn widened(&self) -> &WidenMask {
        &self.widened
    }

    pub fn pi(&self) -> &ProfiniteInt {
        &self.pi
    }

    pub fn principality(&self) -> Principality {
        self.principality
    }

    pub fn selfdiv(&self) -> TriBool {
        self.selfdiv
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

// Labels are presentation metadata; equality of sketches is structural
// equality of the mathematical content.
impl PartialEq for Profile {
    fn eq(&self, other: &Self) -> bool {
        self.phi == other.phi
            && self.widened == other.widened
            && self.pi == other.pi
            && self.principality == other.principality
            && self.selfdiv == other.selfdiv
    }
}

impl Eq for Profile {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum UltraSketch {
    Principal(BigInt),
    Profile(Box<Profile>),
}

impl fmt::Display for UltraSketch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UltraSketch::Principal(n) => write!(f, "principal({n})"),
            UltraSketch::Profile(p) => write!(f, "profile({})", p.label),
        }
    }
}

impl UltraSketch {
    pub fn principal(n: impl Into<BigInt>) -> UltraSketch {
        UltraSketch::Principal(n.into())
    }

    /// The canonical maximally divisible profile: all exponents omega, the
    /// remainder tuple exactly zero.
    pub fn max_profile(ctx: &Ctx) -> UltraSketch {
        make_profile(
            SupernaturalNumber::all_omega(),
            WidenMask::none(),
            ProfiniteInt::shadow(ctx, BigInt::zero()),
            Principality::NonPrincipal,
            TriBool::Undetermined,
            "MAX".to_string(),
        )
        .expect("the MAX profile is consistent")
    }

    /// Build a profile sketch with an exact exponent map, checking the map
    /// against the remainder tuple and applying the classification forcing.
    pub fn profile(
        phi: SupernaturalNumber,
        pi: ProfiniteInt,
        principality: Principality,
        selfdiv: TriBool,
        label: impl Into<String>,
    ) -> Result<UltraSketch, SketchError> {
        make_profile(phi, WidenMask::none(), pi, principality, selfdiv, label.into())
    }

    pub fn is_principal(&self) -> bool {
        matches!(self, UltraSketch::Principal(_))
    }

    pub fn principal_value(&self) -> Option<&BigInt> {
        match self {
            UltraSketch::Principal(n) => Some(n),
            UltraSketch::Profile(_) => None,
        }
    }

    pub fn as_profile(&self) -> Option<&Profile> {
        match self {
            UltraSketch::Profile(p) => Some(p),
            UltraSketch::Principal(_) => None,
        }
    }

    pub fn label(&self) -> String {
        match self {
            UltraSketch::Principal(n) => n.to_string(),
            UltraSketch::Profile(p) => p.label.clone(),
        }
    }

    /// The exponent map (exact for principal sketches).
    pub fn phi(&self) -> SupernaturalNumber {
        match self {
            UltraSketch::Principal(n) => SupernaturalNumber::from_integer(n),
            UltraSketch::Profile(p) => p.phi.clone(),
        }
    }

    /// Whether the sketch is certainly nonprincipal.
    pub fn certainly_nonprincipal(&self) -> bool {
        matches!(self, UltraSketch::Profile(p) if p.principality == Principality::NonPrincipal)
    }

    /// The self-divisibility status the engine may rely on.
    pub fn selfdiv(&self) -> TriBool {
        match self {
            // A nonzero integer divides itself; the zero sketch never enters
            // the relations as a modulus.
            UltraSketch::Principal(_) => TriBool::True,
            UltraSketch::Profile(p) => p.selfdiv,
        }
    }

    /// Is this sketch divisible by every positive integer?
    pub fn is_max(&self) -> TriBool {
        match self {
            UltraSketch::Principal(n) => TriBool::from_bool(n.is_zero()),
            UltraSketch::Profile(_) => is_max_view(&view(self)),
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        match self {
            UltraSketch::Principal(n) => serde_json::json!({
                "kind": "principal",
                "value": n.to_string(),
            }),
            UltraSketch::Profile(p) => {
                let mut obj = serde_json::json!({
                    "kind": "profile",
                    "label": p.label,
                    "phi": p.phi.to_string(),
                    "pi": p.pi.to_json(),
                    "principality": p.principality.as_str(),
                    "selfdiv": p.selfdiv.as_str(),
                });
                if p.widened.any() {
                    let (even, odd) = p.widened.arms();
                    obj["widened"] = serde_json::json!({
                        "even": even,
                        "odd": odd,
                        "exceptions": p
                            .widened
                            .exceptions
                            .iter()
                            .map(|(p, w)| (p.to_string(), serde_json::Value::from(*w)))
                            .collect::<serde_json::Map<_, _>>(),
                    });
                }
                obj
            }
        }
    }

    pub fn from_json(value: &serde_json::Value) -> Result<UltraSketch, SketchError> {
        let kind = value.get("kind").and_then(|k| k.as_str());
        match kind {
            Some("principal") => {
                let n = value
                    .get("value")
                    .and_then(|v| v.as_str())
                    .and_then(|s| s.parse::<BigInt>().ok())
                    .ok_or_else(|| SketchError::Inconsistent("bad principal value".into()))?;
                Ok(UltraSketch::Principal(n))
            }
            Some("profile") => {
                let phi: SupernaturalNumber = value
                    .get("phi")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| SketchError::Inconsistent("missing phi".into()))?
                    .parse()?;
                let pi = ProfiniteInt::from_json(
                    value
                        .get("pi")
                        .ok_or_else(|| SketchError::Inconsistent("missing pi".into()))?,
                )?;
                let principality = match value.get("principality").and_then(|v| v.as_str()) {
                    Some("nonprincipal") => Principality::NonPrincipal,
                    _ => Principality::Unknown,
                };
                let selfdiv = value
                    .get("selfdiv")
                    .and_then(|v| v.as_str())
                    .and_then(TriBool::parse)
                    .unwrap_or(TriBool::Undetermined);
                let label = value
                    .get("label")
                    .and_then(|v| v.as_str())
                    .unwrap_or("profile")
                    .to_string();
                let widened = match value.get("widened") {
                    None => WidenMask::none(),
                    Some(w) => {
                        let even = w.get("even").and_then(|v| v.as_bool()).unwrap_or(false);
                        let odd = w.get("odd").and_then(|v| v.as_bool()).unwrap_or(false);
                        let mut exceptions = Vec::new();
                        if let Some(map) = w.get("exceptions").and_then(|v| v.as_object()) {
                            for (p, flag) in map {
                                let p: u64 = p.parse().map_err(|_| {
                                    SketchError::Inconsistent(format!("bad widened prime {p}"))
                                })?;
                                exceptions.push((p, flag.as_bool().unwrap_or(false)));
                            }
                        }
                        WidenMask::new(even, odd, exceptions)
                    }
                };
                make_profile(phi, widened, pi, principality, selfdiv, label)
            }
            _ => Err(SketchError::Inconsistent("sketch kind must be principal or profile".into())),
        }
    }
}

/// Exponent knowledge about one sketch: the stored map plus its widening.
struct PhiView {
    phi: SupernaturalNumber,
    mask: WidenMask,
}

fn view(sketch: &UltraSketch) -> PhiView {
    match sketch {
        UltraSketch::Principal(n) => {
            PhiView { phi: SupernaturalNumber::from_integer(n), mask: WidenMask::none() }
        }
        UltraSketch::Profile(p) => PhiView { phi: p.phi.clone(), mask: p.widened.clone() },
    }
}

impl PhiView {
    /// (value, widened) at a prime; widened means the true exponent lies in
    /// `[value, omega]`.
    fn at(&self, p: u64) -> (Exponent, bool) {
        (self.phi.value_at(p), self.mask.at(p))
    }

    fn arm(&self, even: bool) -> (Exponent, bool) {
        let value = match self.phi.default_rule() {
            DefaultRule::Const(e) => e,
            DefaultRule::Parity { even: e, odd: o } => {
                if even {
                    e
                } else {
                    o
                }
            }
        };
        let (we, wo) = self.mask.arms();
        (value, if even { we } else { wo })
    }

    fn exception_primes(&self) -> impl Iterator<Item = u64> + '_ {
        self.phi
            .exceptions()
            .keys()
            .copied()
            .chain(self.mask.exceptions.keys().copied())
    }
}

/// Three-valued pointwise comparison `phi_a(p) <= phi_b(p)` for all primes,
/// honest about widened positions.
fn phi_le_tri(a: &PhiView, b: &PhiView) -> TriBool {
    let mut all_certain = true;
    let step = |(va, wa): (Exponent, bool), (vb, wb): (Exponent, bool)| -> TriBool {
        match (wa, wb) {
            (false, false) => {
                if va <= vb {
                    TriBool::True
                } else {
                    TriBool::False
                }
            }
            (false, true) => {
                // b is at least vb.
                if va <= vb {
                    TriBool::True
                } else {
                    TriBool::Undetermined
                }
            }
            (true, false) => {
                if vb == Exponent::Omega {
                    TriBool::True
                } else if va > vb {
                    // a is at least va, already beyond b.
                    TriBool::False
                } else {
                    TriBool::Undetermined
                }
            }
            (true, true) => TriBool::Undetermined,
        }
    };
    let primes: BTreeSet<u64> = a.exception_primes().chain(b.exception_primes()).collect();
    for p in primes {
        match step(a.at(p), b.at(p)) {
            TriBool::False => return TriBool::False,
            TriBool::Undetermined => all_certain = false,
            TriBool::True => {}
        }
    }
    for even in [true, false] {
        match step(a.arm(even), b.arm(even)) {
            TriBool::False => return TriBool::False,
            TriBool::Undetermined => all_certain = false,
            TriBool::True => {}
        }
    }
    if all_certain {
        TriBool::True
    } else {
        TriBool::Undetermined
    }
}

/// Classification that survives the widening, or None when the unknown
/// positions could change the class.
fn classify_certain(v: &PhiView) -> Option<SnClass> {
    if !v.mask.any() {
        return Some(v.phi.classify());
    }
    let arms = [v.arm(true), v.arm(false)];
    let exception_primes: BTreeSet<u64> = v.exception_primes().collect();
    let exceptions: Vec<(Exponent, bool)> =
        exception_primes.iter().map(|&p| v.at(p)).collect();

    let certainly_finite = arms
        .iter()
        .all(|&(value, widened)| value == Exponent::ZERO && !widened)
        && exceptions
            .iter()
            .all(|&(value, widened)| !widened && !value.is_omega());
    if certainly_finite {
        return Some(SnClass::Finite);
    }
    // Widened omega lower bounds are normalised to exact, so an arm that is
    // omega is exact; finitely many exceptions never affect cofiniteness.
    let certainly_cofinite = arms.iter().all(|&(value, _)| value == Exponent::Omega);
    if certainly_cofinite {
        return Some(SnClass::Cofinite);
    }
    let certainly_not_finite = arms.iter().any(|&(value, widened)| {
        if widened {
            value >= Exponent::Finite(1)
        } else {
            value != Exponent::ZERO
        }
    }) || exceptions.iter().any(|&(value, widened)| !widened && value.is_omega());
    let certainly_not_cofinite =
        arms.iter().any(|&(value, widened)| !widened && !value.is_omega());
    if certainly_not_finite && certainly_not_cofinite {
        return Some(SnClass::Intermediate);
    }
    None
}

fn is_max_view(v: &PhiView) -> TriBool {
    if v.phi.is_all_omega() && !v.mask.any() {
        return TriBool::True;
    }
    // Any certainly finite exponent rules MAX out.
    let arms = [v.arm(true), v.arm(false)];
    if arms.iter().any(|&(value, widened)| !widened && !value.is_omega()) {
        return TriBool::False;
    }
    let exception_primes: BTreeSet<u64> = v.exception_primes().collect();
    if exception_primes
        .iter()
        .any(|&p| matches!(v.at(p), (value, false) if !value.is_omega()))
    {
        return TriBool::False;
    }
    TriBool::Undetermined
}

/// Exact-or-lower-bound valuation used when summing exponent maps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PhiVal {
    Exact(Exponent),
    AtLeast(Exponent),
}

impl PhiVal {
    fn of(value: Exponent, widened: bool) -> PhiVal {
        if widened {
            PhiVal::AtLeast(value).normalize()
        } else {
            PhiVal::Exact(value)
        }
    }

    fn normalize(self) -> PhiVal {
        match self {
            // At least omega is exactly omega.
            PhiVal::AtLeast(Exponent::Omega) => PhiVal::Exact(Exponent::Omega),
            other => other,
        }
    }

    fn into_parts(self) -> (Exponent, bool) {
        match self.normalize() {
            PhiVal::Exact(e) => (e, false),
            PhiVal::AtLeast(e) => (e, true),
        }
    }
}

/// Ultrametric valuation of a sum: exact minimum when the operands provably
/// differ, a lower bound otherwise. Two exact omegas stay omega (both
/// coordinates vanish, so does the sum).
fn phi_val_sum(a: PhiVal, b: PhiVal) -> PhiVal {
    use PhiVal::*;
    match (a.normalize(), b.normalize()) {
        (Exact(x), Exact(y)) => {
            if x == y {
                if x == Exponent::Omega {
                    Exact(Exponent::Omega)
                } else {
                    AtLeast(x)
                }
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

fn make_profile(
    mut phi: SupernaturalNumber,
    mut widened: WidenMask,
    pi: ProfiniteInt,
    principality: Principality,
    selfdiv_claim: TriBool,
    label: String,
) -> Result<UltraSketch, SketchError> {
    // Omega lower bounds are exact values.
    let widened_omega: Vec<u64> = widened
        .exceptions
        .iter()
        .filter(|&(&p, &w)| w && phi.value_at(p).is_omega())
        .map(|(&p, _)| p)
        .collect();
    for p in widened_omega {
        widened.unwiden(p);
    }

    // The remainder tuple is authoritative: a shadow determines the whole
    // exponent map, a window pins it at every context prime it can see.
    if let Some(n) = pi.shadow_value() {
        let derived = SupernaturalNumber::from_integer(n);
        // Exact positions must match the shadow's valuations; widened ones
        // are lower bounds for them.
        let view = PhiView { phi: phi.clone(), mask: widened.clone() };
        let position_ok = |(value, is_lower): (Exponent, bool), actual: Exponent| {
            if is_lower {
                value <= actual
            } else {
                value == actual
            }
        };
        let primes: BTreeSet<u64> = view
            .exception_primes()
            .chain(derived.exceptions().keys().copied())
            .collect();
        let mut consistent = primes
            .into_iter()
            .all(|p| position_ok(view.at(p), derived.value_at(p)));
        let derived_arms = derived.default_rule().arms();
        let derived_arm = |even: bool| {
            if derived_arms.len() == 1 {
                derived_arms[0]
            } else if even {
                derived_arms[0]
            } else {
                derived_arms[1]
            }
        };
        for even in [true, false] {
            consistent &= position_ok(view.arm(even), derived_arm(even));
        }
        if !consistent {
            return Err(SketchError::Inconsistent(format!(
                "exponent map {phi} disagrees with the valuations of the shadow {n}"
            )));
        }
        phi = derived;
        widened = WidenMask::none();
    } else {
        for &p in pi.context().primes() {
            let val = pi.valuation(p).expect("context prime");
            let declared = phi.value_at(p);
            match val {
                Valuation::Exact(j) => {
                    if widened.at(p) {
                        if declared > Exponent::Finite(j) {
                            return Err(SketchError::Inconsistent(format!(
                                "lower bound at {p} exceeds the window valuation {j}"
                            )));
                        }
                        let mut exceptions: Vec<(u64, Exponent)> =
                            phi.exceptions().iter().map(|(&q, &e)| (q, e)).collect();
                        exceptions.retain(|(q, _)| *q != p);
                        exceptions.push((p, Exponent::Finite(j)));
                        phi = SupernaturalNumber::new(phi.default_rule(), exceptions)?;
                        widened.unwiden(p);
                    } else if declared != Exponent::Finite(j) {
                        return Err(SketchError::Inconsistent(format!(
                            "exponent {declared} at {p} disagrees with window valuation {j}"
                        )));
                    }
                }
                Valuation::AtLeast(c) => {
                    if !widened.at(p) {
                        if declared < Exponent::Finite(c) {
                            return Err(SketchError::Inconsistent(format!(
                                "exponent {declared} at {p} is below the witnessed valuation >= {c}"
                            )));
                        }
                    } else if declared < Exponent::Finite(c) {
                        // Raise the lower bound to the witnessed valuation;
                        // the position stays widened.
                        let mut exceptions: Vec<(u64, Exponent)> =
                            phi.exceptions().iter().map(|(&q, &e)| (q, e)).collect();
                        exceptions.retain(|(q, _)| *q != p);
                        exceptions.push((p, Exponent::Finite(c)));
                        phi = SupernaturalNumber::new(phi.default_rule(), exceptions)?;
                    }
                }
            }
        }
        // An exact all-omega map is the MAX profile, whose remainder tuple is
        // exactly zero; a window cannot certify that.
        if phi.is_all_omega() && !widened.any() {
            return Err(SketchError::Inconsistent(
                "an all-omega exponent map requires the exact zero shadow as remainder tuple"
                    .into(),
            ));
        }
    }

    // Classification forcing, applied to whatever classification survives the
    // widening.
    let view = PhiView { phi: phi.clone(), mask: widened.clone() };
    let selfdiv = match classify_certain(&view) {
        Some(SnClass::Finite) if principality == Principality::NonPrincipal => {
            if selfdiv_claim == TriBool::True {
                return Err(SketchError::ForcingViolation(
                    "a nonprincipal sketch with a finite exponent map has a finite divisor set \
                     and cannot be self-divisible"
                        .into(),
                ));
            }
            TriBool::False
        }
        Some(SnClass::Cofinite) => {
            if selfdiv_claim == TriBool::False {
                return Err(SketchError::ForcingViolation(
                    "a cofinite exponent map forces self-divisibility: the complement of the \
                     divisor set is a finite union of classes outside the ultrafilter"
                        .into(),
                ));
            }
            TriBool::True
        }
        _ => selfdiv_claim,
    };

    Ok(UltraSketch::Profile(Box::new(Profile {
        phi,
        widened,
        pi,
        principality,
        selfdiv,
        label,
    })))
}

/// One applied rule in a verdict trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceStep {
    pub rule: &'static str,
    pub anchor: &'static str,
}

/// A three-valued answer together with the rules that produced it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Verdict {
    pub value: TriBool,
    pub trace: Vec<TraceStep>,
}

impl Verdict {
    fn decided(value: TriBool, mut prefix: Vec<TraceStep>, step: TraceStep) -> Verdict {
        debug_assert!(value.is_decisive());
        prefix.push(step);
        Verdict { value, trace: prefix }
    }

    fn undetermined(trace: Vec<TraceStep>) -> Verdict {
        Verdict { value: TriBool::Undetermined, trace }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "value": self.value.as_str(),
            "trace": self
                .trace
                .iter()
                .map(|s| serde_json::json!({ "rule": s.rule, "anchor": s.anchor }))
                .collect::<Vec<_>>(),
        })
    }
}

const R1_PRINCIPAL: TraceStep = TraceStep {
    rule: "principal-divisibility",
    anchor: "for integers the relation is ordinary divisibility",
};
const R2_TARGET_MAX: TraceStep = TraceStep {
    rule: "target-is-max",
    anchor: "a sketch divisible by every positive integer is divisible by every nonzero sketch",
};
const R3_SELF_OR_NEG: TraceStep = TraceStep {
    rule: "identity-or-negation",
    anchor: "any realisation divides itself and its negation",
};
const R4_NONPRINCIPAL_OVER_PRINCIPAL: TraceStep = TraceStep {
    rule: "nonprincipal-over-principal",
    anchor: "a nonzero integer has finitely many divisors, none of them nonprincipal",
};
const R5_SELFDIV_ORDER: TraceStep = TraceStep {
    rule: "selfdiv-exponent-order",
    anchor: "for a self-divisible modulus, divisibility is the pointwise exponent order",
};
const R6_ORDER_NECESSARY: TraceStep = TraceStep {
    rule: "exponent-order-necessary",
    anchor: "divisibility always entails the pointwise exponent order",
};
const S1_PRINCIPAL_MEMBER: TraceStep = TraceStep {
    rule: "principal-in-divisor-set",
    anchor: "an integer strongly divides a sketch exactly when its multiples lie in it",
};
const S2_TARGET_MAX: TraceStep = TraceStep {
    rule: "strong-target-is-max",
    anchor: "a sketch divisible by every positive integer is strongly divided by every nonzero sketch",
};
const S3_FINITE_DIVISORS: TraceStep = TraceStep {
    rule: "finite-divisor-set",
    anchor: "a finite divisor set belongs to no nonprincipal sketch",
};
const S4_SELFDIV_ORDER: TraceStep = TraceStep {
    rule: "selfdiv-exponent-order",
    anchor: "for a self-divisible modulus, strong divisibility is the pointwise exponent order",
};
const S5_TRANSFER: TraceStep = TraceStep {
    rule: "tilde-strong-transfer",
    anchor: "divisibility into a strongly dividing middle sketch transfers strong divisibility",
};
const COINCIDENCE: TraceStep = TraceStep {
    rule: "selfdiv-coincidence",
    anchor: "weak and strong congruence coincide modulo a self-divisible sketch",
};
const DELTA_SELF: TraceStep = TraceStep {
    rule: "delta-self-difference",
    anchor: "the difference of a sketch with itself is maximally divisible",
};
const DELTA_ZERO_SUBTRAHEND: TraceStep = TraceStep {
    rule: "delta-zero-subtrahend",
    anchor: "subtracting the zero sketch leaves the minuend",
};
const DELTA_NEGATED_MODULUS: TraceStep = TraceStep {
    rule: "delta-negated-modulus",
    anchor: "zero minus the modulus is its negation",
};
const DELTA_PRINCIPAL: TraceStep = TraceStep {
    rule: "delta-principal",
    anchor: "principal sketches subtract exactly",
};
const DELTA_SUM: TraceStep = TraceStep {
    rule: "delta-profile-sum",
    anchor: "the difference is the sum with the negated subtrahend",
};

/// Outcome of the principal quotient family construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum QuotientFamily {
    Principal(BigInt),
    EmptyFamily,
    Undetermined,
}

/// Classification of all possible self-divisibility statuses over a profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelfDivClass {
    ForcedNonSelfDivisibleUnlessPrincipal,
    ForcedSelfDivisible,
    BothPossible,
}

impl SelfDivClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SelfDivClass::ForcedNonSelfDivisibleUnlessPrincipal => {
                "forced-non-self-divisible-unless-principal"
            }
            SelfDivClass::ForcedSelfDivisible => "forced-self-divisible",
            SelfDivClass::BothPossible => "both-possible",
        }
    }
}

/// Finite-intersection certificates witnessing both extensions of an
/// intermediate profile.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FipCertificates {
    pub selection: FamilySelection,
    pub in_union: BigInt,
    pub in_complement: BigInt,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelfDivReport {
    pub class: SelfDivClass,
    pub certificates: Option<FipCertificates>,
}

/// Map a profile classification to the statuses it permits; intermediate
/// profiles come with machine-checked witnesses for both extensions.
pub fn selfdiv_classify(phi: &SupernaturalNumber) -> Result<SelfDivReport, SketchError> {
    match phi.classify() {
        SnClass::Finite => Ok(SelfDivReport {
            class: SelfDivClass::ForcedNonSelfDivisibleUnlessPrincipal,
            certificates: None,
        }),
        SnClass::Cofinite => {
            Ok(SelfDivReport { class: SelfDivClass::ForcedSelfDivisible, certificates: None })
        }
        SnClass::Intermediate => {
            let positive_finite = |e: Exponent| matches!(e, Exponent::Finite(k) if k >= 1);
            let selection = FamilySelection {
                exact: phi.primes_where(positive_finite, 2),
                coprime: phi.primes_where(|e| e.is_zero(), 2),
                powers: phi
                    .primes_where(|e| e.is_omega(), 2)
                    .into_iter()
                    .map(|p| (p, 2))
                    .collect(),
            };
            let in_union = phidf_witness(phi, &selection, FipSide::InUnion)?;
            let in_complement = phidf_witness(phi, &selection, FipSide::InComplement)?;
            let union = profile_union_set(phi);
            for (witness, expected) in [(&in_union, true), (&in_complement, false)] {
                if union.member(witness) != expected {
                    return Err(SketchError::Inconsistent(format!(
                        "finite-intersection witness {witness} failed its membership check"
                    )));
                }
                for fam in selection.sets(phi) {
                    if !fam.member(witness) {
                        return Err(SketchError::Inconsistent(format!(
                            "finite-intersection witness {witness} escaped a family set"
                        )));
                    }
                }
            }
            Ok(SelfDivReport {
                class: SelfDivClass::BothPossible,
                certificates: Some(FipCertificates { selection, in_union, in_complement }),
            })
        }
    }
}

/// Report of the injectivity probe for the quotient projection.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectivityReport {
    /// Whether the modulus is maximally divisible.
    pub max_status: TriBool,
    /// For a MAX modulus: how many nonzero samples were all mapped away from
    /// the identity (injective at this precision).
    pub samples_tested: usize,
    pub injective_at_precision: bool,
    /// For a non-MAX modulus: the constructed kernel witness.
    pub kernel_witness: Option<KernelWitness>,
}

/// A nonzero remainder tuple that the quotient projection sends to the
/// identity.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelWitness {
    pub phi: SupernaturalNumber,
    pub pi: ProfiniteInt,
    pub pi_nonzero: bool,
    pub sigma_is_identity: bool,
}

/// The decision engine: a precision context plus a bounded session cache of
/// established tilde-divisibility facts feeding the transfer rule.
pub struct Engine {
    ctx: Ctx,
    tilde_cache: Vec<(UltraSketch, UltraSketch)>,
    cache_limit: usize,
}

impl Engine {
    pub fn new(ctx: &Ctx) -> Engine {
        Engine { ctx: Arc::clone(ctx), tilde_cache: Vec::new(), cache_limit: 64 }
    }

    pub fn context(&self) -> &Ctx {
        &self.ctx
    }

    /// Record an externally established tilde-divisibility fact for the
    /// transfer rule. The cache is bounded and deterministic.
    pub fn assume_divides_tilde(&mut self, w: &UltraSketch, t: &UltraSketch) {
        self.note_tilde(w, t);
    }

    fn note_tilde(&mut self, w: &UltraSketch, t: &UltraSketch) {
        let entry = (w.clone(), t.clone());
        if self.tilde_cache.contains(&entry) {
            return;
        }
        if self.tilde_cache.len() >= self.cache_limit {
            self.tilde_cache.remove(0);
        }
        self.tilde_cache.push(entry);
    }

    /// The remainder tuple of a sketch at the engine context.
    pub fn pi_of(&self, sketch: &UltraSketch) -> ProfiniteInt {
        match sketch {
            UltraSketch::Principal(n) => ProfiniteInt::shadow(&self.ctx, n.clone()),
            UltraSketch::Profile(p) => p.pi.clone(),
        }
    }

    /// Negation: exponents unchanged, remainder tuple negated.
    pub fn neg(&self, sketch: &UltraSketch) -> UltraSketch {
        match sketch {
            UltraSketch::Principal(n) => UltraSketch::Principal(-n),
            UltraSketch::Profile(p) => make_profile(
                p.phi.clone(),
                p.widened.clone(),
                p.pi.neg(),
                p.principality,
                p.selfdiv,
                format!("-({})", p.label),
            )
            .expect("negation preserves consistency"),
        }
    }

    /// Sum of sketches: remainder tuples add exactly; exponents are derived
    /// per prime by the ultrametric rule, widened where it cannot decide and
    /// sharpened wherever the summed remainder tuple pins the valuation.
    pub fn sum(&self, u: &UltraSketch, v: &UltraSketch) -> Result<UltraSketch, SketchError> {
        if let (UltraSketch::Principal(a), UltraSketch::Principal(b)) = (u, v) {
            return Ok(UltraSketch::Principal(a + b));
        }
        let pi = self.pi_of(u).add(&self.pi_of(v))?;
        let (phi, mask) = derive_sum_phi(&view(u), &view(v), &pi);
        let principality = if u.certainly_nonprincipal() || v.certainly_nonprincipal() {
            Principality::NonPrincipal
        } else {
            Principality::Unknown
        };
        let label = format!("{}+{}", u.label(), v.label());
        make_profile(phi, mask, pi, principality, TriBool::Undetermined, label)
    }

    /// `w` summed with itself `k` times, `k >= 1`.
    pub fn power_sum(&self, w: &UltraSketch, k: u32) -> Result<UltraSketch, SketchError> {
        if k == 0 {
            return Err(SketchError::BadPowers);
        }
        let mut acc = w.clone();
        for _ in 1..k {
            acc = self.sum(&acc, w)?;
        }
        Ok(acc)
    }

    /// Does `w` divide `u` in the tilde sense? Fixed rule cascade, first
    /// decisive rule wins.
    pub fn divides_tilde(
        &mut self,
        w: &UltraSketch,
        u: &UltraSketch,
    ) -> Result<Verdict, SketchError> {
        let verdict = self.divides_tilde_inner(w, u, Vec::new())?;
        if verdict.value == TriBool::True {
            self.note_tilde(w, u);
        }
        Ok(verdict)
    }

    fn divides_tilde_inner(
        &self,
        w: &UltraSketch,
        u: &UltraSketch,
        prefix: Vec<TraceStep>,
    ) -> Result<Verdict, SketchError> {
        if matches!(w, UltraSketch::Principal(n) if n.is_zero()) {
            return Err(SketchError::ZeroModulus);
        }
        // R1: two integers.
        if let (UltraSketch::Principal(n), UltraSketch::Principal(m)) = (w, u) {
            return Ok(Verdict::decided(
                TriBool::from_bool(divides_int(n, m)),
                prefix,
                R1_PRINCIPAL,
            ));
        }
        // R2: a maximally divisible target absorbs everything.
        if u.is_max() == TriBool::True {
            return Ok(Verdict::decided(TriBool::True, prefix, R2_TARGET_MAX));
        }
        // R3: the target is the modulus itself or its negation.
        if u == w || *u == self.neg(w) {
            return Ok(Verdict::decided(TriBool::True, prefix, R3_SELF_OR_NEG));
        }
        // R4: nothing nonprincipal divides a nonzero integer.
        if w.certainly_nonprincipal() {
            if let UltraSketch::Principal(m) = u {
                if !m.is_zero() {
                    return Ok(Verdict::decided(
                        TriBool::False,
                        prefix,
                        R4_NONPRINCIPAL_OVER_PRINCIPAL,
                    ));
                }
            }
        }
        let vw = view(w);
        let vu = view(u);
        // R5: for a self-divisible modulus the exponent order decides.
        if w.selfdiv() == TriBool::True {
            match phi_le_tri(&vw, &vu) {
                TriBool::True => {
                    return Ok(Verdict::decided(TriBool::True, prefix, R5_SELFDIV_ORDER))
                }
                TriBool::False => {
                    return Ok(Verdict::decided(TriBool::False, prefix, R5_SELFDIV_ORDER))
                }
                TriBool::Undetermined => {}
            }
        }
        // R6: the exponent order is necessary regardless.
        if phi_le_tri(&vw, &vu) == TriBool::False {
            return Ok(Verdict::decided(TriBool::False, prefix, R6_ORDER_NECESSARY));
        }
        Ok(Verdict::undetermined(prefix))
    }

    /// Does `w` divide `u` in the strong sense?
    pub fn divides_strong(
        &mut self,
        w: &UltraSketch,
        u: &UltraSketch,
    ) -> Result<Verdict, SketchError> {
        self.divides_strong_inner(w, u, Vec::new(), true)
    }

    fn divides_strong_inner(
        &mut self,
        w: &UltraSketch,
        u: &UltraSketch,
        prefix: Vec<TraceStep>,
        allow_transfer: bool,
    ) -> Result<Verdict, SketchError> {
        if matches!(w, UltraSketch::Principal(n) if n.is_zero()) {
            return Err(SketchError::ZeroModulus);
        }
        let vu = view(u);
        // S1: an integer strongly divides u exactly when u's profile puts
        // its multiples inside u.
        if let UltraSketch::Principal(n) = w {
            let vn = view(w);
            debug_assert!(!n.is_zero());
            match phi_le_tri(&vn, &vu) {
                TriBool::True => {
                    return Ok(Verdict::decided(TriBool::True, prefix, S1_PRINCIPAL_MEMBER))
                }
                TriBool::False => {
                    return Ok(Verdict::decided(TriBool::False, prefix, S1_PRINCIPAL_MEMBER))
                }
                TriBool::Undetermined => {}
            }
        }
        // S2: maximally divisible targets.
        if u.is_max() == TriBool::True {
            return Ok(Verdict::decided(TriBool::True, prefix, S2_TARGET_MAX));
        }
        // S3: a finite divisor set lies in no nonprincipal sketch.
        if w.certainly_nonprincipal() && classify_certain(&vu) == Some(SnClass::Finite) {
            return Ok(Verdict::decided(TriBool::False, prefix, S3_FINITE_DIVISORS));
        }
        // S4: self-divisible modulus, exponent order decides.
        if w.selfdiv() == TriBool::True {
            let vw = view(w);
            match phi_le_tri(&vw, &vu) {
                TriBool::True => {
                    return Ok(Verdict::decided(TriBool::True, prefix, S4_SELFDIV_ORDER))
                }
                TriBool::False => {
                    return Ok(Verdict::decided(TriBool::False, prefix, S4_SELFDIV_ORDER))
                }
                TriBool::Undetermined => {}
            }
        }
        // S5: transfer through a cached tilde fact.
        if allow_transfer {
            let middles: Vec<UltraSketch> = self
                .tilde_cache
                .iter()
                .filter(|(cw, _)| cw == w)
                .map(|(_, t)| t.clone())
                .collect();
            for t in middles {
                let sub = self.divides_strong_inner(&t, u, Vec::new(), false)?;
                if sub.value == TriBool::True {
                    return Ok(Verdict::decided(TriBool::True, prefix, S5_TRANSFER));
                }
            }
        }
        Ok(Verdict::undetermined(prefix))
    }

    /// Symbolic difference `u - v`, simplified before any profile widening
    /// can lose exact identities.
    fn delta(&self, u: &UltraSketch, v: &UltraSketch) -> Result<(UltraSketch, TraceStep), SketchError> {
        if u == v {
            let delta = if u.is_principal() {
                UltraSketch::Principal(BigInt::zero())
            } else {
                UltraSketch::max_profile(&self.ctx)
            };
            return Ok((delta, DELTA_SELF));
        }
        if matches!(v, UltraSketch::Principal(n) if n.is_zero()) {
            return Ok((u.clone(), DELTA_ZERO_SUBTRAHEND));
        }
        if let (UltraSketch::Principal(a), UltraSketch::Principal(b)) = (u, v) {
            return Ok((UltraSketch::Principal(a - b), DELTA_PRINCIPAL));
        }
        Ok((self.sum(u, &self.neg(v))?, DELTA_SUM))
    }

    fn delta_for_modulus(
        &self,
        u: &UltraSketch,
        v: &UltraSketch,
        w: &UltraSketch,
    ) -> Result<(UltraSketch, TraceStep), SketchError> {
        if matches!(u, UltraSketch::Principal(n) if n.is_zero()) && v == w {
            return Ok((self.neg(w), DELTA_NEGATED_MODULUS));
        }
        self.delta(u, v)
    }

    /// `u` congruent to `v` modulo `w`, via tilde divisibility of the
    /// difference.
    pub fn weak_congruent(
        &mut self,
        u: &UltraSketch,
        v: &UltraSketch,
        w: &UltraSketch,
    ) -> Result<Verdict, SketchError> {
        if matches!(w, UltraSketch::Principal(n) if n.is_zero()) {
            return Err(SketchError::ZeroModulus);
        }
        let (delta, step) = self.delta_for_modulus(u, v, w)?;
        let verdict = self.divides_tilde_inner(w, &delta, vec![step])?;
        if verdict.value == TriBool::True {
            self.note_tilde(w, &delta);
        }
        Ok(verdict)
    }

    /// `u` strongly congruent to `v` modulo `w`. Modulo a self-divisible
    /// sketch this coincides with weak congruence.
    pub fn strong_congruent(
        &mut self,
        u: &UltraSketch,
        v: &UltraSketch,
        w: &UltraSketch,
    ) -> Result<Verdict, SketchError> {
        if matches!(w, UltraSketch::Principal(n) if n.is_zero()) {
            return Err(SketchError::ZeroModulus);
        }
        if w.selfdiv() == TriBool::True {
            let mut verdict = self.weak_congruent(u, v, w)?;
            verdict.trace.insert(0, COINCIDENCE);
            return Ok(verdict);
        }
        let (delta, step) = self.delta_for_modulus(u, v, w)?;
        self.divides_strong_inner(w, &delta, vec![step], true)
    }

    /// Strong congruence of the `n`-fold and `m`-fold sums of `w` with
    /// itself, modulo `w`.
    pub fn powers_congruent(
        &mut self,
        w: &UltraSketch,
        n: u32,
        m: u32,
    ) -> Result<Verdict, SketchError> {
        if n == m || n == 0 || m == 0 {
            return Err(SketchError::BadPowers);
        }
        let wn = self.power_sum(w, n)?;
        let wm = self.power_sum(w, m)?;
        self.strong_congruent(&wn, &wm, w)
    }

    /// The quotient family construction, decided on the principal fragment.
    pub fn ultra_quotient(&self, u: &UltraSketch, v: &UltraSketch) -> QuotientFamily {
        match (u, v) {
            (UltraSketch::Principal(a), UltraSketch::Principal(b)) if !a.is_zero() => {
                if (b % a).is_zero() {
                    QuotientFamily::Principal(b / a)
                } else {
                    QuotientFamily::EmptyFamily
                }
            }
            _ => QuotientFamily::Undetermined,
        }
    }

    /// Probe injectivity of the projection onto the quotient determined by
    /// `w`. A MAX modulus is tested on deterministic pseudo-random nonzero
    /// tuples; any other modulus yields an explicit kernel witness.
    pub fn sigma_injectivity_probe(
        &self,
        w: &UltraSketch,
        samples: usize,
    ) -> Result<InjectivityReport, SketchError> {
        if matches!(w, UltraSketch::Principal(n) if n.is_zero()) {
            return Err(SketchError::ZeroModulus);
        }
        let phi_w = w.phi();
        let quotient = Arc::new(quotient_from_profile(&phi_w, &self.ctx));
        let max_status = w.is_max();

        if let UltraSketch::Principal(n) = w {
            // The shadow of the modulus itself is a nonzero kernel element.
            let pi = ProfiniteInt::shadow(&self.ctx, n.clone());
            let image = sigma_w(&pi, &quotient)?;
            let witness = KernelWitness {
                phi: phi_w,
                pi: pi.clone(),
                pi_nonzero: !n.is_zero(),
                sigma_is_identity: image.is_identity(),
            };
            return Ok(InjectivityReport {
                max_status,
                samples_tested: 0,
                injective_at_precision: false,
                kernel_witness: Some(witness),
            });
        }

        if max_status == TriBool::True {
            let modulus = self.ctx.modulus().clone();
            let mut rng = SplitMix64::new(0x5eed_cafe_f00d_2026);
            let mut all_moved = true;
            for _ in 0..samples {
                let r = rng.below(&modulus);
                let r = if r.is_zero() { BigUint::one() } else { r };
                let x = ProfiniteInt::crt_unpack(&self.ctx, &r)?;
                let image = sigma_w(&x, &quotient)?;
                if image.is_identity() {
                    all_moved = false;
                }
            }
            return Ok(InjectivityReport {
                max_status,
                samples_tested: samples,
                injective_at_precision: all_moved,
                kernel_witness: None,
            });
        }

        // Non-MAX: take the least context prime with a finite exponent and
        // build the tuple with residue p^{phi(p)} there and zero elsewhere.
        let p0 = self
            .ctx
            .primes()
            .iter()
            .copied()
            .find(|&p| matches!(phi_w.value_at(p), Exponent::Finite(_)))
            .ok_or(SketchError::NoFinitePrimeInContext)?;
        let Exponent::Finite(k) = phi_w.value_at(p0) else { unreachable!("just matched") };
        let cap = self.ctx.cap(p0)?;
        if k >= cap {
            return Err(SketchError::Profinite(PfError::ContextTooSmall {
                prime: p0,
                needed: k + 1,
                cap,
            }));
        }
        let pi = ProfiniteInt::window_sparse(&self.ctx, [(p0, primes::pow_biguint(p0, k))])?;
        let image = sigma_w(&pi, &quotient)?;
        let phi_v = SupernaturalNumber::new(
            DefaultRule::Const(Exponent::Omega),
            [(p0, Exponent::Finite(k))],
        )?;
        Ok(InjectivityReport {
            max_status,
            samples_tested: 0,
            injective_at_precision: false,
            kernel_witness: Some(KernelWitness {
                phi: phi_v,
                pi: pi.clone(),
                pi_nonzero: !pi.is_zero_at_precision(),
                sigma_is_identity: image.is_identity(),
            }),
        })
    }

    /// Image of a sketch in the quotient determined by `w`.
    pub fn project(
        &self,
        w: &UltraSketch,
        x: &UltraSketch,
    ) -> Result<QuotientElement, SketchError> {
        let quotient = Arc::new(quotient_from_profile(&w.phi(), &self.ctx));
        Ok(sigma_w(&self.pi_of(x), &quotient)?)
    }
}

fn divides_int(a: &BigInt, b: &BigInt) -> bool {
    if a.is_zero() {
        return b.is_zero();
    }
    // Fast path for machine-sized values; the exhaustive principal suites
    // live here.
    if let (Some(a), Some(b)) = (a.to_i64(), b.to_i64()) {
        return b % a == 0;
    }
    (b % a).is_zero()
}

fn derive_sum_phi(a: &PhiView, b: &PhiView, pi_sum: &ProfiniteInt) -> (SupernaturalNumber, WidenMask) {
    if let Some(n) = pi_sum.shadow_value() {
        // A shadow determines every valuation exactly.
        return (SupernaturalNumber::from_integer(n), WidenMask::none());
    }
    let arm_parts: Vec<(Exponent, bool)> = [true, false]
        .into_iter()
        .map(|even| {
            let (va, wa) = a.arm(even);
            let (vb, wb) = b.arm(even);
            phi_val_sum(PhiVal::of(va, wa), PhiVal::of(vb, wb)).into_parts()
        })
        .collect();
    let default = DefaultRule::Parity { even: arm_parts[0].0, odd: arm_parts[1].0 };

    let mut exception_primes: BTreeSet<u64> =
        a.exception_primes().chain(b.exception_primes()).collect();
    exception_primes.extend(pi_sum.context().primes().iter().copied());

    let mut exceptions = Vec::new();
    let mut mask_exceptions = Vec::new();
    for p in exception_primes {
        let (va, wa) = a.at(p);
        let (vb, wb) = b.at(p);
        let mut val = phi_val_sum(PhiVal::of(va, wa), PhiVal::of(vb, wb));
        if pi_sum.context().contains(p) {
            // The summed remainder tuple pins or bounds the valuation.
            match pi_sum.valuation(p).expect("context prime") {
                Valuation::Exact(j) => val = PhiVal::Exact(Exponent::Finite(j)),
                Valuation::AtLeast(c) => {
                    if let PhiVal::AtLeast(l) = val {
                        val = PhiVal::AtLeast(l.max(Exponent::Finite(c))).normalize();
                    }
                }
            }
        }
        let (value, widened) = val.into_parts();
        exceptions.push((p, value));
        mask_exceptions.push((p, widened));
    }
    let phi = SupernaturalNumber::new(default, exceptions).expect("primes validated upstream");
    let mask = WidenMask::new(arm_parts[0].1, arm_parts[1].1, mask_exceptions);
    (phi, mask)
}

/// Deterministic 64-bit generator for the probe sampling; no external
/// randomness enters any verdict.
struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    fn new(seed: u64) -> SplitMix64 {
        SplitMix64 { state: seed }
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform-ish value below `bound` (bias is irrelevant for probing).
    fn below(&mut self, bound: &BigUint) -> BigUint {
        let bits = bound.bits() as usize;
        let words = bits / 64 + 1;
        let mut digits = Vec::with_capacity(words);
        for _ in 0..words {
            digits.push(self.next_u64());
        }
        BigUint::new(digits.iter().flat_map(|w| [(*w & 0xffff_ffff) as u32, (*w >> 32) as u32]).collect())
            % bound
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profinite::PrecisionContext;

    fn ctx() -> Ctx {
        PrecisionContext::uniform(6, 6)
    }

    fn sn(s: &str) -> SupernaturalNumber {
        s.parse().unwrap()
    }

    fn pow2_sketch(ctx: &Ctx) -> UltraSketch {
        // The sketch of a power of 2 with unbounded exponent: omega at 2,
        // exponent 0 (residue 1) at every other context prime.
        let residues: Vec<(u64, BigUint)> = ctx
            .primes()
            .iter()
            .map(|&p| (p, if p == 2 { BigUint::zero() } else { BigUint::one() }))
            .collect();
        let pi = ProfiniteInt::window_sparse(ctx, residues).unwrap();
        UltraSketch::profile(
            sn("default=0;2:omega"),
            pi,
            Principality::NonPrincipal,
            TriBool::True,
            "2^a",
        )
        .unwrap()
    }

    fn max_plus_one(engine: &Engine) -> UltraSketch {
        engine
            .sum(&UltraSketch::max_profile(engine.context()), &UltraSketch::principal(1))
            .unwrap()
    }

    #[test]
    fn principal_sketch_accessors() {
        let six = UltraSketch::principal(6);
        assert_eq!(six.phi(), sn("default=0;2:1,3:1"));
        assert_eq!(six.selfdiv(), TriBool::True);
        assert_eq!(six.is_max(), TriBool::False);
        assert_eq!(UltraSketch::principal(0).is_max(), TriBool::True);
    }

    #[test]
    fn max_plus_one_profile() {
        let ctx = ctx();
        let engine = Engine::new(&ctx);
        let w = max_plus_one(&engine);
        let p = w.as_profile().unwrap();
        assert!(p.phi().is_all_zero());
        assert!(!p.widened().any());
        assert_eq!(p.pi().shadow_value(), Some(&BigInt::from(1)));
        assert_eq!(p.principality(), Principality::NonPrincipal);
        // Forced by the finite classification.
        assert_eq!(p.selfdiv(), TriBool::False);
    }

    #[test]
    fn forcing_rejects_contradictions() {
        let ctx = ctx();
        // Finite profile claimed self-divisible and nonprincipal.
        let err = UltraSketch::profile(
            sn("default=0;2:3"),
            ProfiniteInt::shadow(&ctx, BigInt::from(8)),
            Principality::NonPrincipal,
            TriBool::True,
            "bad",
        );
        assert!(matches!(err, Err(SketchError::ForcingViolation(_))));
        // Cofinite profile claimed non-self-divisible.
        let err = UltraSketch::profile(
            sn("default=omega;2:1"),
            ProfiniteInt::window_sparse(&ctx, [(2u64, BigUint::from(2u32))]).unwrap(),
            Principality::NonPrincipal,
            TriBool::False,
            "bad",
        );
        assert!(matches!(err, Err(SketchError::ForcingViolation(_))));
    }

    #[test]
    fn constructor_checks_pi_against_phi() {
        let ctx = ctx();
        // Shadow 12 has exponent 2 at the prime 2; claiming 3 is inconsistent.
        let err = UltraSketch::profile(
            sn("default=0;2:3,3:1"),
            ProfiniteInt::shadow(&ctx, BigInt::from(12)),
            Principality::Unknown,
            TriBool::Undetermined,
            "bad",
        );
        assert!(matches!(err, Err(SketchError::Inconsistent(_))));
        // A crafted widened sketch may lower-bound the shadow's valuations
        // but its exact positions must still match: phi(3) = 0 contradicts
        // the valuation 1 of 12 at 3 even when some other prime is widened.
        let json = serde_json::json!({
            "kind": "profile",
            "label": "crafted",
            "phi": "default=0;2:1",
            "pi": ProfiniteInt::shadow(&ctx, BigInt::from(12)).to_json(),
            "principality": "unknown",
            "selfdiv": "undetermined",
            "widened": { "even": false, "odd": false,
                         "exceptions": { "2": true } },
        });
        assert!(matches!(
            UltraSketch::from_json(&json),
            Err(SketchError::Inconsistent(_))
        ));
        // An all-omega map needs the exact zero shadow.
        let err = UltraSketch::profile(
            SupernaturalNumber::all_omega(),
            ProfiniteInt::window_sparse(&ctx, []).unwrap(),
            Principality::NonPrincipal,
            TriBool::True,
            "bad",
        );
        assert!(matches!(err, Err(SketchError::Inconsistent(_))));
    }

    #[test]
    fn tilde_principal_examples() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        let v = engine
            .divides_tilde(&UltraSketch::principal(3), &UltraSketch::principal(12))
            .unwrap();
        assert_eq!(v.value, TriBool::True);
        assert_eq!(v.trace.last().unwrap().rule, "principal-divisibility");
        let v = engine
            .divides_tilde(&UltraSketch::principal(5), &UltraSketch::principal(12))
            .unwrap();
        assert_eq!(v.value, TriBool::False);
        assert!(engine
            .divides_tilde(&UltraSketch::principal(0), &UltraSketch::principal(3))
            .is_err());
    }

    #[test]
    fn tilde_rule_cascade() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        let w = max_plus_one(&engine);
        // R4: nonprincipal never divides a nonzero integer.
        let v = engine.divides_tilde(&w, &UltraSketch::principal(-1)).unwrap();
        assert_eq!(v.value, TriBool::False);
        assert_eq!(v.trace.last().unwrap().rule, "nonprincipal-over-principal");
        // R2: everything divides MAX.
        let v = engine.divides_tilde(&w, &UltraSketch::max_profile(&ctx)).unwrap();
        assert_eq!(v.value, TriBool::True);
        assert_eq!(v.trace.last().unwrap().rule, "target-is-max");
        // R5: self-divisible modulus compares exponent maps.
        let pow2 = pow2_sketch(&ctx);
        let v = engine.divides_tilde(&pow2, &UltraSketch::max_profile(&ctx)).unwrap();
        assert_eq!(v.value, TriBool::True);
        // R3: negation.
        let neg = engine.neg(&w);
        let v = engine.divides_tilde(&w, &neg).unwrap();
        assert_eq!(v.value, TriBool::True);
        assert_eq!(v.trace.last().unwrap().rule, "identity-or-negation");
        // R6: exponent order is necessary.
        let v = engine.divides_tilde(&pow2, &UltraSketch::principal(9)).unwrap();
        assert_eq!(v.value, TriBool::False);
    }

    #[test]
    fn strong_rule_cascade() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        let w = max_plus_one(&engine);
        // S3: the divisor set of this sketch is finite.
        let v = engine.divides_strong(&w, &w).unwrap();
        assert_eq!(v.value, TriBool::False);
        assert_eq!(v.trace.last().unwrap().rule, "finite-divisor-set");
        // S4 via self-divisibility.
        let pow2 = pow2_sketch(&ctx);
        let v = engine.divides_strong(&pow2, &pow2).unwrap();
        assert_eq!(v.value, TriBool::True);
        assert_eq!(v.trace.last().unwrap().rule, "selfdiv-exponent-order");
        // S1: a principal modulus tests membership of its multiples.
        let v = engine.divides_strong(&UltraSketch::principal(4), &pow2).unwrap();
        assert_eq!(v.value, TriBool::True);
        assert_eq!(v.trace.last().unwrap().rule, "principal-in-divisor-set");
        let v = engine.divides_strong(&UltraSketch::principal(3), &pow2).unwrap();
        assert_eq!(v.value, TriBool::False);
    }

    #[test]
    fn strong_transfer_rule() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        // A modulus the direct rules cannot decide for this target: exponent
        // 1 at the prime 2, units elsewhere, self-divisibility unknown.
        let residues: Vec<(u64, BigUint)> = ctx
            .primes()
            .iter()
            .map(|&p| (p, if p == 2 { BigUint::from(2u32) } else { BigUint::one() }))
            .collect();
        let w = UltraSketch::profile(
            sn("default=0;2:1"),
            ProfiniteInt::window_sparse(&ctx, residues).unwrap(),
            Principality::Unknown,
            TriBool::Undetermined,
            "opaque",
        )
        .unwrap();
        let pow2 = pow2_sketch(&ctx);
        let direct = engine.divides_strong(&w, &pow2).unwrap();
        assert_eq!(direct.value, TriBool::Undetermined);
        // With an established tilde fact through the power sketch, transfer
        // decides.
        engine.assume_divides_tilde(&w, &pow2);
        let v = engine.divides_strong(&w, &pow2).unwrap();
        assert_eq!(v.value, TriBool::True);
        assert_eq!(v.trace.last().unwrap().rule, "tilde-strong-transfer");
    }

    #[test]
    fn example_triple_is_intransitive() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        let w = max_plus_one(&engine);
        let zero = UltraSketch::principal(0);
        let one = UltraSketch::principal(1);

        let a = engine.weak_congruent(&zero, &w, &w).unwrap();
        assert_eq!(a.value, TriBool::True);
        assert_eq!(a.trace.last().unwrap().rule, "identity-or-negation");

        let b = engine.weak_congruent(&w, &one, &w).unwrap();
        assert_eq!(b.value, TriBool::True);
        assert_eq!(b.trace.last().unwrap().rule, "target-is-max");

        let c = engine.weak_congruent(&zero, &one, &w).unwrap();
        assert_eq!(c.value, TriBool::False);
        assert_eq!(c.trace.last().unwrap().rule, "nonprincipal-over-principal");

        let d = engine.strong_congruent(&w, &zero, &w).unwrap();
        assert_eq!(d.value, TriBool::False);
        assert_eq!(d.trace.last().unwrap().rule, "finite-divisor-set");
    }

    #[test]
    fn reflexivity_via_self_difference() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        let sketches = [
            UltraSketch::principal(7),
            UltraSketch::max_profile(&ctx),
            pow2_sketch(&ctx),
            max_plus_one(&engine),
        ];
        for u in &sketches {
            for w in &sketches {
                if matches!(w, UltraSketch::Principal(n) if n.is_zero()) {
                    continue;
                }
                let v = engine.weak_congruent(u, u, w).unwrap();
                assert_eq!(v.value, TriBool::True, "reflexivity failed for {u} mod {w}");
            }
        }
    }

    #[test]
    fn principal_congruence_is_integer_congruence() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        for n in [-6i64, 2, 5] {
            let w = UltraSketch::principal(n);
            for a in -8..=8i64 {
                for b in -8..=8i64 {
                    let u = UltraSketch::principal(a);
                    let v = UltraSketch::principal(b);
                    let expected = TriBool::from_bool((a - b).rem_euclid(n.abs()) == 0);
                    assert_eq!(engine.weak_congruent(&u, &v, &w).unwrap().value, expected);
                    assert_eq!(engine.strong_congruent(&u, &v, &w).unwrap().value, expected);
                }
            }
        }
    }

    #[test]
    fn disjoint_support_sum_has_unit_divisors() {
        let ctx = ctx();
        let engine = Engine::new(&ctx);
        let mk = |phi: &str, label: &str| {
            let phi: SupernaturalNumber = phi.parse().unwrap();
            let residues: Vec<(u64, BigUint)> = ctx
                .primes()
                .iter()
                .map(|&p| {
                    let r = match phi.value_at(p) {
                        Exponent::Finite(1) => BigUint::from(p),
                        Exponent::Finite(0) => BigUint::one(),
                        _ => unreachable!(),
                    };
                    (p, r)
                })
                .collect();
            let pi = ProfiniteInt::window_sparse(&ctx, residues).unwrap();
            UltraSketch::profile(phi, pi, Principality::NonPrincipal, TriBool::True, label)
                .unwrap()
        };
        let u = mk("default=parity(0,1)", "odd-index-primes");
        let v = mk("default=parity(1,0)", "even-index-primes");
        let sum = engine.sum(&u, &v).unwrap();
        let p = sum.as_profile().unwrap();
        assert!(p.phi().is_all_zero(), "sum profile should be all zero, got {}", p.phi());
        assert!(!p.widened().any());
        assert_eq!(p.selfdiv(), TriBool::False);
        assert_eq!(
            p.phi().d_enumerate(10),
            vec![BigInt::from(-1), BigInt::from(1)]
        );
    }

    #[test]
    fn sum_widens_equal_finite_valuations() {
        let ctx = ctx();
        let engine = Engine::new(&ctx);
        let pow2 = pow2_sketch(&ctx);
        let sum = engine.sum(&pow2, &pow2).unwrap();
        let p = sum.as_profile().unwrap();
        // At 2 both are omega: stays omega. At the other primes both have
        // exponent 0 but the residues (1+1=2, p+...) pin most of them; at 3
        // the residue is 2, exactly valuation 0.
        assert_eq!(p.phi().value_at(2), Exponent::Omega);
        assert_eq!(p.phi().value_at(3), Exponent::ZERO);
        assert!(!p.widened().at(3));
        // Beyond the context nothing pins the tail: widened lower bound 0.
        assert!(p.widened().at(31));
    }

    #[test]
    fn powers_congruent_examples() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        let v = engine.powers_congruent(&UltraSketch::principal(3), 1, 2).unwrap();
        assert_eq!(v.value, TriBool::True);

        let pow2 = pow2_sketch(&ctx);
        let v = engine.powers_congruent(&pow2, 1, 2).unwrap();
        assert_eq!(v.value, TriBool::True);

        let w = max_plus_one(&engine);
        let v = engine.powers_congruent(&w, 1, 2).unwrap();
        assert_eq!(v.value, TriBool::False);
        assert_eq!(v.trace.last().unwrap().rule, "finite-divisor-set");

        assert!(engine.powers_congruent(&pow2, 2, 2).is_err());
    }

    #[test]
    fn self_divisible_sketches_collapse_some_power_pair() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        let sketches = [
            UltraSketch::principal(6),
            UltraSketch::max_profile(&ctx),
            pow2_sketch(&ctx),
        ];
        for w in &sketches {
            assert_eq!(w.selfdiv(), TriBool::True);
            let found = (1..=3u32)
                .flat_map(|n| (n + 1..=4u32).map(move |m| (n, m)))
                .any(|(n, m)| {
                    engine.powers_congruent(w, n, m).unwrap().value == TriBool::True
                });
            assert!(found, "no congruent power pair for {w}");
        }
    }

    #[test]
    fn project_into_modulus_quotient() {
        let ctx = ctx();
        let engine = Engine::new(&ctx);
        let w = pow2_sketch(&ctx);
        let image = engine.project(&w, &UltraSketch::principal(13)).unwrap();
        // Only the p-adic component at 2 is nontrivial for this modulus.
        assert_eq!(image.coord(2), Some(&BigUint::from(13u32)));
        assert!(image.coords().iter().all(|(&p, r)| p == 2 || r.is_zero()));
        let id = engine.project(&w, &UltraSketch::principal(0)).unwrap();
        assert!(id.is_identity());
    }

    #[test]
    fn ultra_quotient_examples() {
        let ctx = ctx();
        let engine = Engine::new(&ctx);
        assert_eq!(
            engine.ultra_quotient(&UltraSketch::principal(3), &UltraSketch::principal(12)),
            QuotientFamily::Principal(BigInt::from(4))
        );
        assert_eq!(
            engine.ultra_quotient(&UltraSketch::principal(7), &UltraSketch::principal(7)),
            QuotientFamily::Principal(BigInt::from(1))
        );
        assert_eq!(
            engine.ultra_quotient(&UltraSketch::principal(2), &UltraSketch::principal(3)),
            QuotientFamily::EmptyFamily
        );
        assert_eq!(
            engine.ultra_quotient(&UltraSketch::max_profile(&ctx), &UltraSketch::principal(3)),
            QuotientFamily::Undetermined
        );
    }

    #[test]
    fn ultra_quotient_membership_oracle() {
        // The defining condition on sampled sets A: A belongs to the family
        // iff b/a lies in A.
        let ctx = ctx();
        let engine = Engine::new(&ctx);
        let (a, b) = (3i64, 12i64);
        let result = engine.ultra_quotient(&UltraSketch::principal(a), &UltraSketch::principal(b));
        let QuotientFamily::Principal(q) = result else { panic!("expected principal") };
        let mut lcg = 0x2468_ace0u64;
        for _ in 0..200 {
            // Random subset of [-30, 30].
            let mut set = std::collections::BTreeSet::new();
            for m in -30..=30i64 {
                lcg = lcg.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                if lcg >> 63 == 1 {
                    set.insert(m);
                }
            }
            // Membership of A in the family: {n : b in n*A} contains a,
            // i.e. b/a in A (integer division only when exact).
            let family_has = set.iter().any(|&x| a * x == b);
            let oracle = set.contains(&q.to_i64().unwrap());
            assert_eq!(family_has, oracle);
        }
    }

    #[test]
    fn selfdiv_classify_examples() {
        let r = selfdiv_classify(&sn("default=0;2:3")).unwrap();
        assert_eq!(r.class, SelfDivClass::ForcedNonSelfDivisibleUnlessPrincipal);
        let r = selfdiv_classify(&sn("default=omega")).unwrap();
        assert_eq!(r.class, SelfDivClass::ForcedSelfDivisible);
        let r = selfdiv_classify(&sn("default=2")).unwrap();
        assert_eq!(r.class, SelfDivClass::BothPossible);
        let certs = r.certificates.unwrap();
        // Base 2^2 * 3^2 from the selection, times the fresh prime 5 cubed.
        assert_eq!(certs.in_union, BigInt::from(36 * 125));
        assert_eq!(certs.in_complement, BigInt::from(36 * 5));
        assert!(profile_union_set(&sn("default=2")).member(&certs.in_union));
        assert!(!profile_union_set(&sn("default=2")).member(&certs.in_complement));
    }

    #[test]
    fn injectivity_probe_examples() {
        let ctx = ctx();
        let engine = Engine::new(&ctx);
        // MAX: no kernel hits among the samples.
        let report = engine
            .sigma_injectivity_probe(&UltraSketch::max_profile(&ctx), 64)
            .unwrap();
        assert_eq!(report.max_status, TriBool::True);
        assert!(report.injective_at_precision);

        // Non-MAX with exponent 2 at the prime 2: residue 4 is a nonzero
        // kernel element.
        let w = UltraSketch::profile(
            sn("default=omega;2:2"),
            ProfiniteInt::window_sparse(
                &ctx,
                [(2u64, BigUint::from(4u32) * BigUint::from(3u32))],
            )
            .unwrap(),
            Principality::NonPrincipal,
            TriBool::True,
            "two-squared",
        )
        .unwrap();
        let report = engine.sigma_injectivity_probe(&w, 0).unwrap();
        let witness = report.kernel_witness.unwrap();
        assert!(witness.pi_nonzero);
        assert!(witness.sigma_is_identity);
        assert_eq!(witness.pi.residue(2).unwrap(), BigUint::from(4u32));

        // Principal modulus: its own shadow is in the kernel.
        let report = engine
            .sigma_injectivity_probe(&UltraSketch::principal(6), 0)
            .unwrap();
        let witness = report.kernel_witness.unwrap();
        assert!(witness.pi_nonzero);
        assert!(witness.sigma_is_identity);
    }

    #[test]
    fn verdict_json_shape() {
        let ctx = ctx();
        let mut engine = Engine::new(&ctx);
        let v = engine
            .divides_tilde(&UltraSketch::principal(3), &UltraSketch::principal(12))
            .unwrap();
        let json = v.to_json();
        assert_eq!(json["value"], "true");
        assert_eq!(json["trace"][0]["rule"], "principal-divisibility");
        assert!(json["trace"][0]["anchor"].is_string());
    }
}
