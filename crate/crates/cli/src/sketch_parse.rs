//! Text grammar for sketches on the command line.
//!
//! ```text
//! sketch := <integer>                        principal sketch
//!         | max                              the maximally divisible profile
//!         | max+<integer> | max-<integer>    MAX shifted by an integer
//!         | @<path>                          JSON sketch file
//!         | profile(<phi> [| key=value]*)    explicit profile
//! ```
//!
//! Profile keys: `pi=shadow:<int>` or `pi=window:p=r,p=r,...` (missing primes
//! get residue 0), `selfdiv=true|false|undetermined`, `nonprincipal`,
//! `label=<text>`. When `pi` is omitted the canonical representative is used:
//! residue `p^phi(p)` where the exponent fits below the cap, residue 0 where
//! it does not.

use std::collections::BTreeMap;

use num_bigint::{BigInt, BigUint};

use betaz::sketch::{Engine, Principality, UltraSketch};
use betaz::supernatural::{Exponent, SupernaturalNumber};
use betaz::{Ctx, ProfiniteInt, TriBool};

pub fn parse_sketch(input: &str, ctx: &Ctx) -> Result<UltraSketch, String> {
    let s = input.trim();
    if let Ok(n) = s.parse::<BigInt>() {
        return Ok(UltraSketch::principal(n));
    }
    if s == "max" {
        return Ok(UltraSketch::max_profile(ctx));
    }
    if let Some(rest) = s.strip_prefix("max+").or_else(|| s.strip_prefix("max-")) {
        let n: BigInt = rest.parse().map_err(|_| format!("bad shift `{rest}`"))?;
        let n = if s.starts_with("max-") { -n } else { n };
        let engine = Engine::new(ctx);
        return engine
            .sum(&UltraSketch::max_profile(ctx), &UltraSketch::principal(n))
            .map_err(|e| e.to_string());
    }
    if let Some(path) = s.strip_prefix('@') {
        let text =
            std::fs::read_to_string(path).map_err(|e| format!("cannot read `{path}`: {e}"))?;
        let value: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| format!("bad sketch JSON: {e}"))?;
        return UltraSketch::from_json(&value).map_err(|e| e.to_string());
    }
    let inner = s
        .strip_prefix("profile(")
        .and_then(|rest| rest.strip_suffix(')'))
        .ok_or_else(|| format!("cannot parse sketch `{s}`"))?;
    let mut segments = inner.split('|').map(str::trim);
    let phi: SupernaturalNumber = segments
        .next()
        .filter(|seg| !seg.is_empty())
        .ok_or_else(|| "profile needs an exponent map".to_string())?
        .parse()
        .map_err(|e: betaz::SnError| e.to_string())?;
    let mut pi: Option<ProfiniteInt> = None;
    let mut selfdiv = TriBool::Undetermined;
    let mut principality = Principality::Unknown;
    let mut label = "profile".to_string();
    for segment in segments {
        if segment == "nonprincipal" {
            principality = Principality::NonPrincipal;
            continue;
        }
        let (key, value) = segment
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got `{segment}`"))?;
        match key.trim() {
            "pi" => pi = Some(parse_pi(value.trim(), ctx)?),
            "selfdiv" => {
                selfdiv = TriBool::parse(value.trim())
                    .ok_or_else(|| format!("bad selfdiv `{value}`"))?;
            }
            "principality" => {
                principality = match value.trim() {
                    "nonprincipal" => Principality::NonPrincipal,
                    "unknown" => Principality::Unknown,
                    other => return Err(format!("bad principality `{other}`")),
                };
            }
            "label" => label = value.trim().to_string(),
            other => return Err(format!("unknown profile key `{other}`")),
        }
    }
    let pi = match pi {
        Some(pi) => pi,
        None => canonical_pi(&phi, ctx)?,
    };
    UltraSketch::profile(phi, pi, principality, selfdiv, label).map_err(|e| e.to_string())
}

fn parse_pi(spec: &str, ctx: &Ctx) -> Result<ProfiniteInt, String> {
    if let Some(n) = spec.strip_prefix("shadow:") {
        let n: BigInt = n.trim().parse().map_err(|_| format!("bad shadow value `{n}`"))?;
        return Ok(ProfiniteInt::shadow(ctx, n));
    }
    if let Some(pairs) = spec.strip_prefix("window:") {
        let mut residues: BTreeMap<u64, BigUint> = BTreeMap::new();
        for pair in pairs.split(',').filter(|p| !p.trim().is_empty()) {
            let (p, r) = pair
                .split_once('=')
                .ok_or_else(|| format!("bad residue entry `{pair}`"))?;
            let p: u64 = p.trim().parse().map_err(|_| format!("bad prime `{p}`"))?;
            let r: BigUint = r.trim().parse().map_err(|_| format!("bad residue `{r}`"))?;
            residues.insert(p, r);
        }
        return ProfiniteInt::window_sparse(ctx, residues).map_err(|e| e.to_string());
    }
    Err(format!("pi must be shadow:<int> or window:p=r,..., got `{spec}`"))
}

/// The canonical remainder tuple of an exponent map: residue `p^phi(p)`
/// where that lies below the cap, residue 0 (valuation at least the cap)
/// otherwise. Consistent with the map by construction.
fn canonical_pi(phi: &SupernaturalNumber, ctx: &Ctx) -> Result<ProfiniteInt, String> {
    if phi.is_all_omega() {
        return Ok(ProfiniteInt::shadow(ctx, BigInt::from(0)));
    }
    let mut residues: BTreeMap<u64, BigUint> = BTreeMap::new();
    for &p in ctx.primes() {
        let cap = ctx.cap(p).map_err(|e| e.to_string())?;
        let residue = match phi.value_at(p) {
            Exponent::Finite(k) if k < cap => betaz::primes::pow_biguint(p, k),
            _ => BigUint::from(0u32),
        };
        residues.insert(p, residue);
    }
    ProfiniteInt::window_sparse(ctx, residues).map_err(|e| e.to_string())
}
