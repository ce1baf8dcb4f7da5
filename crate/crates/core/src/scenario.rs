//! Named, replayable bundles of sketches, relation claims and checkable
//! certificates.
//!
//! Scenarios are data: they serialise to JSON, reload, and replay through a
//! fresh engine. Every claim is re-evaluated and every certificate is
//! re-verified from scratch on replay; nothing stored is trusted.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::Zero;
use thiserror::Error;

use crate::profinite::{Ctx, PfError, PrecisionContext, ProfiniteInt};
use crate::setalg::{
    self, FamilySelection, FipSide, SetError, SetExpr,
};
use crate::sketch::{
    selfdiv_classify, Engine, Principality, SelfDivClass, SketchError, UltraSketch, Verdict,
};
use crate::supernatural::{Exponent, SnError, SupernaturalNumber};
use crate::tri::TriBool;

pub const SCHEMA_VERSION: u64 = 1;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown sketch label `{0}`")]
    UnknownLabel(String),
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("unknown builtin scenario `{0}`")]
    UnknownBuiltin(String),
    #[error(transparent)]
    Sketch(#[from] SketchError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Profinite(#[from] PfError),
    #[error(transparent)]
    Supernatural(#[from] SnError),
}

/// A relation query over labelled sketches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Query {
    WeakCongruent { u: String, v: String, w: String },
    StrongCongruent { u: String, v: String, w: String },
    DividesTilde { w: String, u: String },
    DividesStrong { w: String, u: String },
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Query::WeakCongruent { u, v, w } => write!(f, "{u} =({w})= {v}"),
            Query::StrongCongruent { u, v, w } => write!(f, "{u} =s({w})= {v}"),
            Query::DividesTilde { w, u } => write!(f, "{w} ~| {u}"),
            Query::DividesStrong { w, u } => write!(f, "{w} |s {u}"),
        }
    }
}

/// A claim: a query with its expected verdict and a short justification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Claim {
    pub query: Query,
    pub expected: TriBool,
    pub anchor: String,
}

/// A checkable artifact carried by a scenario.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Certificate {
    /// The least non-negative integer opening a run of `run_length`
    /// consecutive members of the prime-power union of `alpha`.
    ThicknessWitness { alpha: SupernaturalNumber, run_length: u32, witness: BigInt },
    /// Exact member count of `set` over `[lo, hi]`.
    WindowCount { set: SetExpr, lo: BigInt, hi: BigInt, count: u64 },
    /// A divisibility chain, optionally required to lie inside a set.
    Chain { elements: Vec<BigInt>, inside: Option<SetExpr> },
    /// The elements contain no three-term arithmetic progression.
    NoThreeTermProgression { elements: Vec<BigInt> },
    /// Pairwise divisibility-incomparable multiples of `base`.
    Antichain { base: BigInt, elements: Vec<BigInt> },
    /// A finite-intersection witness for an intermediate profile.
    FipWitness {
        phi: SupernaturalNumber,
        selection: FamilySelection,
        side: FipSide,
        witness: BigInt,
    },
    /// The divisor-set enumeration of a profile up to a bound.
    DivisorEnumeration { phi: SupernaturalNumber, bound: u64, expected: Vec<BigInt> },
}

impl Certificate {
    pub fn describe(&self) -> String {
        match self {
            Certificate::ThicknessWitness { alpha, run_length, witness } => {
                format!("thickness witness {witness} for run {run_length} of ppu({alpha})")
            }
            Certificate::WindowCount { set, lo, hi, count } => {
                format!("{count} members of {set} in [{lo}, {hi}]")
            }
            Certificate::Chain { elements, .. } => format!("divisibility chain {elements:?}"),
            Certificate::NoThreeTermProgression { elements } => {
                format!("no 3-term progression in {elements:?}")
            }
            Certificate::Antichain { base, elements } => {
                format!("antichain {elements:?} in {base}Z")
            }
            Certificate::FipWitness { witness, side, .. } => {
                let side = match side {
                    FipSide::InUnion => "in the union",
                    FipSide::InComplement => "in the complement",
                };
                format!("finite-intersection witness {witness} {side}")
            }
            Certificate::DivisorEnumeration { phi, bound, .. } => {
                format!("divisor enumeration of {phi} up to {bound}")
            }
        }
    }

    /// Re-verify from scratch.
    pub fn verify(&self) -> Result<bool, ScenarioError> {
        match self {
            Certificate::ThicknessWitness { alpha, run_length, witness } => {
                let recomputed = setalg::thickness_witness(alpha, *run_length)?;
                if &recomputed != witness {
                    return Ok(false);
                }
                let union = SetExpr::prime_power_union(alpha.clone())?;
                for k in 1..=*run_length {
                    if !union.member(&(witness + BigInt::from(k))) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Certificate::WindowCount { set, lo, hi, count } => {
                Ok(set.count_window(lo, hi)? == *count)
            }
            Certificate::Chain { elements, inside } => {
                if !setalg::is_divisibility_chain(elements) {
                    return Ok(false);
                }
                if let Some(set) = inside {
                    if !elements.iter().all(|x| set.member(x)) {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
            Certificate::NoThreeTermProgression { elements } => {
                let set: BTreeSet<BigInt> = elements.iter().cloned().collect();
                Ok(setalg::find_3ap(&set).is_none())
            }
            Certificate::Antichain { base, elements } => {
                if base.is_zero() {
                    return Ok(false);
                }
                let all_multiples = elements.iter().all(|x| (x % base).is_zero());
                let incomparable = elements.iter().enumerate().all(|(i, x)| {
                    elements
                        .iter()
                        .enumerate()
                        .all(|(j, y)| i == j || x.is_zero() || !(y % x).is_zero())
                });
                Ok(all_multiples && incomparable)
            }
            Certificate::FipWitness { phi, selection, side, witness } => {
                let in_family = selection.sets(phi).iter().all(|s| s.member(witness));
                let union = setalg::profile_union_set(phi);
                let on_side = match side {
                    FipSide::InUnion => union.member(witness),
                    FipSide::InComplement => !union.member(witness),
                };
                Ok(in_family && on_side)
            }
            Certificate::DivisorEnumeration { phi, bound, expected } => {
                Ok(&phi.d_enumerate(*bound) == expected)
            }
        }
    }
}

/// A named bundle: sketches, claims, certificates, free-form notes.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub ctx: Ctx,
    pub sketches: Vec<(String, UltraSketch)>,
    pub claims: Vec<Claim>,
    pub certificates: Vec<Certificate>,
    pub notes: Vec<String>,
    /// How many weak-congruence transitivity violations the claim set is
    /// expected to exhibit (the intransitivity scenarios exist to show one).
    pub expected_transitivity_violations: usize,
}

#[derive(Debug, Clone)]
pub struct ClaimOutcome {
    pub query: String,
    pub expected: TriBool,
    pub got: Verdict,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct CertificateOutcome {
    pub description: String,
    pub pass: bool,
}

#[derive(Debug, Clone)]
pub struct ReplayReport {
    pub name: String,
    pub claims: Vec<ClaimOutcome>,
    pub certificates: Vec<CertificateOutcome>,
    pub undetermined_claims: usize,
    pub transitivity_violations: Vec<String>,
    pub expected_transitivity_violations: usize,
}

impl ReplayReport {
    pub fn all_passed(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
            && self.certificates.iter().all(|c| c.pass)
            && self.undetermined_claims == 0
            && self.transitivity_violations.len() == self.expected_transitivity_violations
    }
}

impl Scenario {
    fn lookup(&self, label: &str) -> Result<&UltraSketch, ScenarioError> {
        self.sketches
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, s)| s)
            .ok_or_else(|| ScenarioError::UnknownLabel(label.to_string()))
    }

    /// Replay every claim through a fresh engine and re-verify every
    /// certificate.
    pub fn replay(&self) -> Result<ReplayReport, ScenarioError> {
        let mut engine = Engine::new(&self.ctx);
        let mut claims = Vec::new();
        let mut weak_facts: Vec<(String, String, String, TriBool)> = Vec::new();
        for claim in &self.claims {
            let got = match &claim.query {
                Query::WeakCongruent { u, v, w } => {
                    let verdict = engine.weak_congruent(
                        self.lookup(u)?,
                        self.lookup(v)?,
                        self.lookup(w)?,
                    )?;
                    weak_facts.push((u.clone(), v.clone(), w.clone(), verdict.value));
                    verdict
                }
                Query::StrongCongruent { u, v, w } => engine.strong_congruent(
                    self.lookup(u)?,
                    self.lookup(v)?,
                    self.lookup(w)?,
                )?,
                Query::DividesTilde { w, u } => {
                    engine.divides_tilde(self.lookup(w)?, self.lookup(u)?)?
                }
                Query::DividesStrong { w, u } => {
                    engine.divides_strong(self.lookup(w)?, self.lookup(u)?)?
                }
            };
            claims.push(ClaimOutcome {
                query: claim.query.to_string(),
                expected: claim.expected,
                pass: got.value == claim.expected,
                got,
            });
        }
        let undetermined_claims =
            claims.iter().filter(|c| c.got.value == TriBool::Undetermined).count();

        // Audit the replayed weak-congruence verdicts for transitivity
        // violations: u = v and v = t decided true while u = t decided false.
        let mut violations = Vec::new();
        for (u1, v1, w1, r1) in &weak_facts {
            if *r1 != TriBool::True {
                continue;
            }
            for (u2, v2, w2, r2) in &weak_facts {
                if *r2 != TriBool::True || w1 != w2 || v1 != u2 {
                    continue;
                }
                for (u3, v3, w3, r3) in &weak_facts {
                    if w3 == w1 && u3 == u1 && v3 == v2 && *r3 == TriBool::False {
                        violations.push(format!(
                            "{u1} = {v1} and {u2} = {v2} hold modulo {w1}, yet {u3} = {v3} fails"
                        ));
                    }
                }
            }
        }

        let mut certificates = Vec::new();
        for cert in &self.certificates {
            certificates.push(CertificateOutcome {
                description: cert.describe(),
                pass: cert.verify()?,
            });
        }
        Ok(ReplayReport {
            name: self.name.clone(),
            claims,
            certificates,
            undetermined_claims,
            transitivity_violations: violations,
            expected_transitivity_violations: self.expected_transitivity_violations,
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "schema_version": SCHEMA_VERSION,
            "name": self.name,
            "context": self.ctx.to_json(),
            "sketches": self
                .sketches
                .iter()
                .map(|(label, sketch)| serde_json::json!({ "label": label, "sketch": sketch.to_json() }))
                .collect::<Vec<_>>(),
            "claims": self.claims.iter().map(claim_to_json).collect::<Vec<_>>(),
            "certificates": self.certificates.iter().map(certificate_to_json).collect::<Vec<_>>(),
            "notes": self.notes,
            "expected_transitivity_violations": self.expected_transitivity_violations,
        })
    }

    pub fn from_json(value: &serde_json::Value) -> Result<Scenario, ScenarioError> {
        let version = value.get("schema_version").and_then(|v| v.as_u64());
        if version != Some(SCHEMA_VERSION) {
            return Err(ScenarioError::Parse(format!(
                "unsupported schema version {version:?}, expected {SCHEMA_VERSION}"
            )));
        }
        let name = value
            .get("name")
            .and_then(|v| v.as_str())
            .ok_or_else(|| ScenarioError::Parse("missing name".into()))?
            .to_string();
        let ctx = PrecisionContext::from_json(
            value.get("context").ok_or_else(|| ScenarioError::Parse("missing context".into()))?,
        )?;
        let mut sketches = Vec::new();
        for entry in value.get("sketches").and_then(|v| v.as_array()).unwrap_or(&Vec::new()) {
            let label = entry
                .get("label")
                .and_then(|v| v.as_str())
                .ok_or_else(|| ScenarioError::Parse("sketch entry missing label".into()))?;
            let sketch = UltraSketch::from_json(
                entry
                    .get("sketch")
                    .ok_or_else(|| ScenarioError::Parse("sketch entry missing body".into()))?,
            )?;
            sketches.push((label.to_string(), sketch));
        }
        let mut claims = Vec::new();
        for entry in value.get("claims").and_then(|v| v.as_array()).unwrap_or(&Vec::new()) {
            claims.push(claim_from_json(entry)?);
        }
        let mut certificates = Vec::new();
        for entry in value.get("certificates").and_then(|v| v.as_array()).unwrap_or(&Vec::new()) {
            certificates.push(certificate_from_json(entry)?);
        }
        let notes = value
            .get("notes")
            .and_then(|v| v.as_array())
            .map(|a| a.iter().filter_map(|n| n.as_str().map(String::from)).collect())
            .unwrap_or_default();
        let expected_transitivity_violations = value
            .get("expected_transitivity_violations")
            .and_then(|v| v.as_u64())
            .unwrap_or(0) as usize;
        Ok(Scenario {
            name,
            ctx,
            sketches,
            claims,
            certificates,
            notes,
            expected_transitivity_violations,
        })
    }
}

fn claim_to_json(claim: &Claim) -> serde_json::Value {
    let query = match &claim.query {
        Query::WeakCongruent { u, v, w } => {
            serde_json::json!({ "relation": "weak-congruent", "u": u, "v": v, "w": w })
        }
        Query::StrongCongruent { u, v, w } => {
            serde_json::json!({ "relation": "strong-congruent", "u": u, "v": v, "w": w })
        }
        Query::DividesTilde { w, u } => {
            serde_json::json!({ "relation": "divides-tilde", "w": w, "u": u })
        }
        Query::DividesStrong { w, u } => {
            serde_json::json!({ "relation": "divides-strong", "w": w, "u": u })
        }
    };
    serde_json::json!({ "query": query, "expected": claim.expected.as_str(), "anchor": claim.anchor })
}

fn claim_from_json(value: &serde_json::Value) -> Result<Claim, ScenarioError> {
    let query = value.get("query").ok_or_else(|| ScenarioError::Parse("claim missing query".into()))?;
    let field = |name: &str| -> Result<String, ScenarioError> {
        query
            .get(name)
            .and_then(|v| v.as_str())
            .map(String::from)
            .ok_or_else(|| ScenarioError::Parse(format!("query missing `{name}`")))
    };
    let relation = query
        .get("relation")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ScenarioError::Parse("query missing relation".into()))?;
    let query = match relation {
        "weak-congruent" => Query::WeakCongruent { u: field("u")?, v: field("v")?, w: field("w")? },
        "strong-congruent" => {
            Query::StrongCongruent { u: field("u")?, v: field("v")?, w: field("w")? }
        }
        "divides-tilde" => Query::DividesTilde { w: field("w")?, u: field("u")? },
        "divides-strong" => Query::DividesStrong { w: field("w")?, u: field("u")? },
        other => return Err(ScenarioError::Parse(format!("unknown relation `{other}`"))),
    };
    let expected = value
        .get("expected")
        .and_then(|v| v.as_str())
        .and_then(TriBool::parse)
        .ok_or_else(|| ScenarioError::Parse("claim missing expected verdict".into()))?;
    let anchor = value.get("anchor").and_then(|v| v.as_str()).unwrap_or("").to_string();
    Ok(Claim { query, expected, anchor })
}

fn big_list_json(xs: &[BigInt]) -> serde_json::Value {
    serde_json::Value::Array(xs.iter().map(|x| serde_json::Value::from(x.to_string())).collect())
}

fn big_list_from_json(value: &serde_json::Value) -> Result<Vec<BigInt>, ScenarioError> {
    value
        .as_array()
        .ok_or_else(|| ScenarioError::Parse("expected array of integers".into()))?
        .iter()
        .map(|v| {
            v.as_str()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| ScenarioError::Parse("bad integer literal".into()))
        })
        .collect()
}

fn certificate_to_json(cert: &Certificate) -> serde_json::Value {
    match cert {
        Certificate::ThicknessWitness { alpha, run_length, witness } => serde_json::json!({
            "kind": "thickness-witness",
            "alpha": alpha.to_string(),
            "run_length": run_length,
            "witness": witness.to_string(),
        }),
        Certificate::WindowCount { set, lo, hi, count } => serde_json::json!({
            "kind": "window-count",
            "set": set.to_string(),
            "lo": lo.to_string(),
            "hi": hi.to_string(),
            "count": count,
        }),
        Certificate::Chain { elements, inside } => serde_json::json!({
            "kind": "chain",
            "elements": big_list_json(elements),
            "inside": inside.as_ref().map(|s| s.to_string()),
        }),
        Certificate::NoThreeTermProgression { elements } => serde_json::json!({
            "kind": "no-3ap",
            "elements": big_list_json(elements),
        }),
        Certificate::Antichain { base, elements } => serde_json::json!({
            "kind": "antichain",
            "base": base.to_string(),
            "elements": big_list_json(elements),
        }),
        Certificate::FipWitness { phi, selection, side, witness } => serde_json::json!({
            "kind": "fip-witness",
            "phi": phi.to_string(),
            "exact": selection.exact,
            "coprime": selection.coprime,
            "powers": selection.powers.iter().map(|(p, n)| serde_json::json!([p, n])).collect::<Vec<_>>(),
            "side": match side { FipSide::InUnion => "union", FipSide::InComplement => "complement" },
            "witness": witness.to_string(),
        }),
        Certificate::DivisorEnumeration { phi, bound, expected } => serde_json::json!({
            "kind": "divisor-enumeration",
            "phi": phi.to_string(),
            "bound": bound,
            "expected": big_list_json(expected),
        }),
    }
}

fn certificate_from_json(value: &serde_json::Value) -> Result<Certificate, ScenarioError> {
    let kind = value
        .get("kind")
        .and_then(|v| v.as_str())
        .ok_or_else(|| ScenarioError::Parse("certificate missing kind".into()))?;
    let phi_field = |name: &str| -> Result<SupernaturalNumber, ScenarioError> {
        Ok(value
            .get(name)
            .and_then(|v| v.as_str())
            .ok_or_else(|| ScenarioError::Parse(format!("certificate missing `{name}`")))?
            .parse()?)
    };
    let big_field = |name: &str| -> Result<BigInt, ScenarioError> {
        value
            .get(name)
            .and_then(|v| v.as_str())
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| ScenarioError::Parse(format!("certificate missing `{name}`")))
    };
    match kind {
        "thickness-witness" => Ok(Certificate::ThicknessWitness {
            alpha: phi_field("alpha")?,
            run_length: value.get("run_length").and_then(|v| v.as_u64()).unwrap_or(0) as u32,
            witness: big_field("witness")?,
        }),
        "window-count" => Ok(Certificate::WindowCount {
            set: value
                .get("set")
                .and_then(|v| v.as_str())
                .ok_or_else(|| ScenarioError::Parse("missing set".into()))?
                .parse()?,
            lo: big_field("lo")?,
            hi: big_field("hi")?,
            count: value.get("count").and_then(|v| v.as_u64()).unwrap_or(0),
        }),
        "chain" => Ok(Certificate::Chain {
            elements: big_list_from_json(
                value.get("elements").ok_or_else(|| ScenarioError::Parse("missing elements".into()))?,
            )?,
            inside: match value.get("inside") {
                None | Some(serde_json::Value::Null) => None,
                Some(v) => Some(
                    v.as_str()
                        .ok_or_else(|| ScenarioError::Parse("bad inside set".into()))?
                        .parse()?,
                ),
            },
        }),
        "no-3ap" => Ok(Certificate::NoThreeTermProgression {
            elements: big_list_from_json(
                value.get("elements").ok_or_else(|| ScenarioError::Parse("missing elements".into()))?,
            )?,
        }),
        "antichain" => Ok(Certificate::Antichain {
            base: big_field("base")?,
            elements: big_list_from_json(
                value.get("elements").ok_or_else(|| ScenarioError::Parse("missing elements".into()))?,
            )?,
        }),
        "fip-witness" => {
            let u64_list = |name: &str| -> Vec<u64> {
                value
                    .get(name)
                    .and_then(|v| v.as_array())
                    .map(|a| a.iter().filter_map(|x| x.as_u64()).collect())
                    .unwrap_or_default()
            };
            let powers = value
                .get("powers")
                .and_then(|v| v.as_array())
                .map(|a| {
                    a.iter()
                        .filter_map(|pair| {
                            let pair = pair.as_array()?;
                            Some((pair.first()?.as_u64()?, pair.get(1)?.as_u64()? as u32))
                        })
                        .collect()
                })
                .unwrap_or_default();
            Ok(Certificate::FipWitness {
                phi: phi_field("phi")?,
                selection: FamilySelection {
                    exact: u64_list("exact"),
                    coprime: u64_list("coprime"),
                    powers,
                },
                side: match value.get("side").and_then(|v| v.as_str()) {
                    Some("union") => FipSide::InUnion,
                    _ => FipSide::InComplement,
                },
                witness: big_field("witness")?,
            })
        }
        "divisor-enumeration" => Ok(Certificate::DivisorEnumeration {
            phi: phi_field("phi")?,
            bound: value.get("bound").and_then(|v| v.as_u64()).unwrap_or(0),
            expected: big_list_from_json(
                value.get("expected").ok_or_else(|| ScenarioError::Parse("missing expected".into()))?,
            )?,
        }),
        other => Err(ScenarioError::Parse(format!("unknown certificate kind `{other}`"))),
    }
}

/// The intransitivity scenario: congruence modulo the sketch of MAX shifted
/// by one is reflexive-looking but not transitive.
pub fn scenario_ex1(ctx: &Ctx) -> Result<Scenario, ScenarioError> {
    let engine = Engine::new(ctx);
    let max = UltraSketch::max_profile(ctx);
    let w = engine.sum(&max, &UltraSketch::principal(1))?;
    let sketches = vec![
        ("0".to_string(), UltraSketch::principal(0)),
        ("1".to_string(), UltraSketch::principal(1)),
        ("w".to_string(), w),
    ];
    let claims = vec![
        Claim {
            query: Query::WeakCongruent { u: "0".into(), v: "w".into(), w: "w".into() },
            expected: TriBool::True,
            anchor: "the difference is the negated modulus, which shares a realisation".into(),
        },
        Claim {
            query: Query::WeakCongruent { u: "w".into(), v: "1".into(), w: "w".into() },
            expected: TriBool::True,
            anchor: "the difference has remainder zero at every modulus, hence is maximally divisible".into(),
        },
        Claim {
            query: Query::WeakCongruent { u: "0".into(), v: "1".into(), w: "w".into() },
            expected: TriBool::False,
            anchor: "a nonprincipal modulus divides no nonzero integer".into(),
        },
        Claim {
            query: Query::StrongCongruent { u: "w".into(), v: "0".into(), w: "w".into() },
            expected: TriBool::False,
            anchor: "the modulus has divisor set {1,-1}, which no nonprincipal sketch contains".into(),
        },
    ];
    Ok(Scenario {
        name: "ex1".into(),
        ctx: Arc::clone(ctx),
        sketches,
        claims,
        certificates: Vec::new(),
        notes: vec![
            "The weak congruence modulo w is reflexive yet intransitive: the first two claims \
             chain to the negation of the third."
                .into(),
        ],
        expected_transitivity_violations: 1,
    })
}

/// Square-free combinatorics: the density of the square-free integers over a
/// window, plus consecutive runs of non-square-free integers built by the
/// Chinese Remainder Theorem.
pub fn scenario_squarefree(
    ctx: &Ctx,
    run_length: u32,
    lo: &BigInt,
    hi: &BigInt,
) -> Result<Scenario, ScenarioError> {
    let squarefree = SetExpr::power_free(2);
    let count = squarefree.count_window(lo, hi)?;
    let alpha2 = SupernaturalNumber::constant(Exponent::Finite(2));
    let witness = setalg::thickness_witness(&alpha2, run_length)?;
    let mut certificates = vec![
        Certificate::WindowCount { set: squarefree, lo: lo.clone(), hi: hi.clone(), count },
        Certificate::ThicknessWitness { alpha: alpha2, run_length, witness },
    ];
    // The cube variant of the same construction.
    let alpha3 = SupernaturalNumber::constant(Exponent::Finite(3));
    let cube_run = run_length.min(3);
    let cube_witness = setalg::thickness_witness(&alpha3, cube_run)?;
    certificates.push(Certificate::ThicknessWitness {
        alpha: alpha3,
        run_length: cube_run,
        witness: cube_witness,
    });
    Ok(Scenario {
        name: "squarefree".into(),
        ctx: Arc::clone(ctx),
        sketches: Vec::new(),
        claims: Vec::new(),
        certificates,
        notes: vec![
            "The square-free integers have positive density while their complement is thick; \
             the run witnesses are the least non-negative solutions of the underlying \
             congruence systems."
                .into(),
            "Extending these combinatorial facts to an actual asymmetric congruence modulus \
             uses a non-constructive ultrafilter existence argument and is out of scope for \
             replay; only the finite inputs are certified."
                .into(),
        ],
        expected_transitivity_violations: 0,
    })
}

/// Classification scenario for a profile: forced statuses come with notes,
/// the intermediate case with machine-checked certificates for both
/// extensions.
pub fn scenario_phidf(ctx: &Ctx, phi: &SupernaturalNumber) -> Result<Scenario, ScenarioError> {
    let report = selfdiv_classify(phi)?;
    let mut certificates = Vec::new();
    let note = match report.class {
        SelfDivClass::ForcedNonSelfDivisibleUnlessPrincipal => {
            "finite exponent map: every sketch with this profile is principal or not self-divisible"
        }
        SelfDivClass::ForcedSelfDivisible => {
            "cofinite exponent map: every sketch with this profile is self-divisible"
        }
        SelfDivClass::BothPossible => {
            "intermediate exponent map: both extensions are realisable, witnessed by the \
             finite-intersection certificates"
        }
    };
    if let Some(certs) = report.certificates {
        certificates.push(Certificate::FipWitness {
            phi: phi.clone(),
            selection: certs.selection.clone(),
            side: FipSide::InUnion,
            witness: certs.in_union,
        });
        certificates.push(Certificate::FipWitness {
            phi: phi.clone(),
            selection: certs.selection,
            side: FipSide::InComplement,
            witness: certs.in_complement,
        });
    }
    Ok(Scenario {
        name: format!("phidf[{phi}]"),
        ctx: Arc::clone(ctx),
        sketches: Vec::new(),
        claims: Vec::new(),
        certificates,
        notes: vec![note.to_string()],
        expected_transitivity_violations: 0,
    })
}

fn parity_profile(ctx: &Ctx, even_arm: bool, label: &str) -> Result<UltraSketch, SketchError> {
    use num_bigint::BigUint;
    let phi: SupernaturalNumber = if even_arm {
        "default=parity(1,0)".parse().expect("literal")
    } else {
        "default=parity(0,1)".parse().expect("literal")
    };
    let residues: Vec<(u64, BigUint)> = ctx
        .primes()
        .iter()
        .map(|&p| {
            let r = match phi.value_at(p) {
                Exponent::Finite(1) => BigUint::from(p),
                _ => BigUint::from(1u32),
            };
            (p, r)
        })
        .collect();
    let pi = ProfiniteInt::window_sparse(ctx, residues)?;
    UltraSketch::profile(phi, pi, Principality::NonPrincipal, TriBool::True, label)
}

/// Two division-linear profiles supported on disjoint sets of primes whose
/// sum has divisor set `{1, -1}` and is forced non-self-divisible.
pub fn scenario_disjoint_primes(ctx: &Ctx) -> Result<Scenario, ScenarioError> {
    let engine = Engine::new(ctx);
    let u = parity_profile(ctx, true, "even-index-primes")?;
    let v = parity_profile(ctx, false, "odd-index-primes")?;
    let sum = engine.sum(&u, &v)?;
    let phi_sum = sum.phi();
    let sketches = vec![
        ("u".to_string(), u),
        ("v".to_string(), v),
        ("u+v".to_string(), sum),
    ];
    let claims = vec![
        Claim {
            query: Query::DividesStrong { w: "u".into(), u: "u".into() },
            expected: TriBool::True,
            anchor: "a division-linear sketch strongly divides itself".into(),
        },
        Claim {
            query: Query::DividesStrong { w: "v".into(), u: "v".into() },
            expected: TriBool::True,
            anchor: "a division-linear sketch strongly divides itself".into(),
        },
        Claim {
            query: Query::DividesStrong { w: "u+v".into(), u: "u+v".into() },
            expected: TriBool::False,
            anchor: "each prime divides exactly one summand, so the sum has divisor set {1,-1}"
                .into(),
        },
    ];
    let certificates = vec![Certificate::DivisorEnumeration {
        phi: phi_sum,
        bound: 10,
        expected: vec![BigInt::from(-1), BigInt::from(1)],
    }];
    Ok(Scenario {
        name: "disjoint-primes".into(),
        ctx: Arc::clone(ctx),
        sketches,
        claims,
        certificates,
        notes: vec![
            "Self-divisibility is not preserved by sums: both summands are division-linear \
             yet the nonprincipal sum has a finite divisor set."
                .into(),
        ],
        expected_transitivity_violations: 0,
    })
}

/// Chain scenarios: the factorial-style maximally divisible sketch and the
/// power-of-two sketch, with chain and progression-freeness certificates.
pub fn scenario_chains(ctx: &Ctx) -> Result<Scenario, ScenarioError> {
    use num_bigint::BigUint;
    // Every prime power eventually divides every factorial: the sketch has
    // the all-omega profile and exact remainder zero.
    let factorial = UltraSketch::profile(
        SupernaturalNumber::all_omega(),
        ProfiniteInt::shadow(ctx, BigInt::zero()),
        Principality::NonPrincipal,
        TriBool::True,
        "factorial-type",
    )?;
    let pow2 = {
        let phi: SupernaturalNumber = "default=0;2:omega".parse().expect("literal");
        let residues: Vec<(u64, BigUint)> = ctx
            .primes()
            .iter()
            .map(|&p| (p, if p == 2 { BigUint::from(0u32) } else { BigUint::from(1u32) }))
            .collect();
        let pi = ProfiniteInt::window_sparse(ctx, residues)?;
        UltraSketch::profile(phi, pi, Principality::NonPrincipal, TriBool::True, "pow2-type")?
    };
    let sketches = vec![
        ("factorial".to_string(), factorial),
        ("pow2".to_string(), pow2),
    ];
    let claims = vec![
        Claim {
            query: Query::DividesStrong { w: "factorial".into(), u: "factorial".into() },
            expected: TriBool::True,
            anchor: "a maximally divisible sketch is strongly divided by everything".into(),
        },
        Claim {
            query: Query::DividesStrong { w: "pow2".into(), u: "pow2".into() },
            expected: TriBool::True,
            anchor: "a division-linear sketch strongly divides itself".into(),
        },
        Claim {
            query: Query::DividesTilde { w: "pow2".into(), u: "factorial".into() },
            expected: TriBool::True,
            anchor: "everything divides a maximally divisible sketch".into(),
        },
    ];
    let factorials: Vec<BigInt> =
        [1i64, 2, 6, 24, 120].iter().map(|&x| BigInt::from(x)).collect();
    let powers: Vec<BigInt> = [2i64, 4, 8, 16, 32].iter().map(|&x| BigInt::from(x)).collect();
    let prefix = setalg::fp_prefix_chain(
        &[BigInt::from(2), BigInt::from(3), BigInt::from(5)],
        2,
    )?;
    let periodic_chain = setalg::chain_in_periodic(&SetExpr::residue_class(0, 5)?, 4)?;
    let certificates = vec![
        Certificate::Chain { elements: factorials.clone(), inside: None },
        Certificate::NoThreeTermProgression { elements: factorials },
        Certificate::Chain { elements: powers.clone(), inside: None },
        Certificate::NoThreeTermProgression { elements: powers },
        Certificate::Chain { elements: prefix.clone(), inside: None },
        Certificate::NoThreeTermProgression { elements: prefix },
        Certificate::Chain {
            elements: periodic_chain,
            inside: Some(SetExpr::residue_class(0, 5)?),
        },
    ];
    Ok(Scenario {
        name: "chains".into(),
        ctx: Arc::clone(ctx),
        sketches,
        claims,
        certificates,
        notes: vec![
            "Sets linearly ordered by divisibility contain no three-term arithmetic \
             progression, so division-linear sketches avoid the progression-rich ideals."
                .into(),
        ],
        expected_transitivity_violations: 0,
    })
}

pub const BUILTIN_NAMES: [&str; 5] =
    ["ex1", "squarefree", "phidf", "disjoint-primes", "chains"];

/// Construct a builtin scenario by name with default parameters.
pub fn builtin(name: &str, ctx: &Ctx) -> Result<Scenario, ScenarioError> {
    match name {
        "ex1" => scenario_ex1(ctx),
        "squarefree" => {
            scenario_squarefree(ctx, 12, &BigInt::from(1), &BigInt::from(1_000_000))
        }
        "phidf" => scenario_phidf(ctx, &SupernaturalNumber::constant(Exponent::Finite(2))),
        "disjoint-primes" => scenario_disjoint_primes(ctx),
        "chains" => scenario_chains(ctx),
        other => Err(ScenarioError::UnknownBuiltin(other.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx() -> Ctx {
        PrecisionContext::uniform(6, 4)
    }

    #[test]
    fn ex1_replays_clean() {
        let s = scenario_ex1(&ctx()).unwrap();
        let report = s.replay().unwrap();
        assert!(report.all_passed(), "{report:?}");
        assert_eq!(report.undetermined_claims, 0);
        assert_eq!(report.transitivity_violations.len(), 1);
    }

    #[test]
    fn squarefree_scenario_small_window() {
        let s = scenario_squarefree(&ctx(), 3, &BigInt::from(1), &BigInt::from(1000)).unwrap();
        let report = s.replay().unwrap();
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn phidf_scenarios() {
        let c = ctx();
        for (phi, expect_certs) in [
            ("default=0;2:3", false),
            ("default=omega", false),
            ("default=2", true),
        ] {
            let phi: SupernaturalNumber = phi.parse().unwrap();
            let s = scenario_phidf(&c, &phi).unwrap();
            assert_eq!(!s.certificates.is_empty(), expect_certs);
            assert!(s.replay().unwrap().all_passed());
        }
    }

    #[test]
    fn disjoint_primes_replays_clean() {
        let s = scenario_disjoint_primes(&ctx()).unwrap();
        let report = s.replay().unwrap();
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn chains_replays_clean() {
        let s = scenario_chains(&ctx()).unwrap();
        let report = s.replay().unwrap();
        assert!(report.all_passed(), "{report:?}");
    }

    #[test]
    fn scenario_json_roundtrip() {
        for name in BUILTIN_NAMES {
            let c = ctx();
            let s = builtin(name, &c).unwrap();
            let json = s.to_json();
            let back = Scenario::from_json(&json).unwrap();
            assert_eq!(json, back.to_json(), "roundtrip drift for {name}");
            assert!(back.replay().unwrap().all_passed(), "replay after reload failed for {name}");
        }
    }
}
