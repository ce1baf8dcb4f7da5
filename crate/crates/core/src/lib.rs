//! Exact arithmetic for the computable skeleton of divisibility and
//! congruence of ultrafilter sketches on the integers.
//!
//! The crate is organised around five layers:
//!
//! - [`supernatural`]: exponent maps `primes -> {0,1,...} ∪ {omega}` with a
//!   finite-exceptions-over-default representation, their lattice order and
//!   the divisor sets they describe.
//! - [`profinite`]: truncated profinite integers, Chinese-remainder packing,
//!   closed-subgroup membership and procyclic quotient groups.
//! - [`setalg`]: symbolic subsets of the integers with exact membership,
//!   densities, thickness witnesses, divisibility chains and
//!   finite-intersection certificates.
//! - [`sketch`]: finitely represented ultrafilter proxies and the
//!   three-valued decision engine for the divisibility and congruence
//!   relations, with auditable verdict traces.
//! - [`scenario`]: named, replayable bundles of claims and certificates.
//!
//! All values are immutable after construction and every operation is pure;
//! results carry explicit `Undetermined` verdicts where a finite window
//! cannot decide, and are never approximated.

pub mod primes;
pub mod profinite;
pub mod scenario;
pub mod setalg;
pub mod sketch;
pub mod supernatural;
pub mod tri;

pub use profinite::{
    quotient_from_profile, sigma_w, subgroup_member, val_of_sum, Component, Ctx, ElementOrder,
    PfError, PfForm, PrecisionContext, ProcyclicQuotient, ProfiniteInt, QuotientElement, RingOp,
    Valuation,
};
pub use setalg::{DensityReport, SetError, SetExpr};
pub use sketch::{
    Engine, Principality, Profile, QuotientFamily, SelfDivClass, SketchError, TraceStep,
    UltraSketch, Verdict,
};
pub use supernatural::{DefaultRule, Exponent, SnClass, SnError, SupernaturalNumber};
pub use tri::TriBool;
