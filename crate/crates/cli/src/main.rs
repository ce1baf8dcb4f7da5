//! Command-line front end: parse the documented text grammars, run the
//! library operations, print human-readable or JSON reports.
//!
//! Exit codes: 0 for decisive success, 2 when the verdict is undetermined,
//! 1 for usage or validation errors (and for failed scenario replays).

use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;

use betaz::scenario::{self, Scenario};
use betaz::setalg::{self, FamilySelection, FipSide, SetExpr};
use betaz::sketch::{selfdiv_classify, Engine, SelfDivClass};
use betaz::supernatural::{Exponent, SupernaturalNumber};
use betaz::{quotient_from_profile, Ctx, PrecisionContext, TriBool};

mod sketch_parse;

#[derive(Parser)]
#[command(
    name = "betaz",
    version,
    about = "Exact arithmetic for divisibility and congruence of ultrafilter sketches"
)]
struct Cli {
    /// Emit machine-readable JSON instead of text
    #[arg(long, global = true)]
    json: bool,
    /// Context primes, comma separated (default: the first 10 primes)
    #[arg(long, global = true, value_delimiter = ',')]
    primes: Option<Vec<u64>>,
    /// Exponent caps: one value for all primes, or per-prime `p:c` pairs
    /// (default: 6)
    #[arg(long, global = true)]
    cap: Option<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Relation {
    /// Weak congruence of u and v modulo w
    Weak,
    /// Strong congruence of u and v modulo w
    Strong,
    /// w tilde-divides u
    Tilde,
    /// w strongly divides u
    StrongDiv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Side {
    Union,
    Complement,
}

#[derive(Subcommand)]
enum Command {
    /// Classify a supernatural profile and its self-divisibility forcing
    Classify {
        /// Supernatural literal, e.g. `default=0;2:3` or `const:2`
        literal: String,
    },
    /// The procyclic quotient group determined by a profile
    Quotient {
        /// Supernatural literal
        literal: String,
    },
    /// Evaluate a congruence or divisibility relation between sketches
    Congruence {
        #[arg(long, value_enum)]
        relation: Relation,
        /// The modulus / divisor sketch
        #[arg(long)]
        w: String,
        /// Left operand (weak/strong) or target (tilde/strong-div)
        #[arg(long)]
        u: String,
        /// Right operand (weak/strong only)
        #[arg(long)]
        v: Option<String>,
    },
    /// Least witness opening a run of consecutive members of a prime-power
    /// union
    Thickness {
        /// Exponent map, e.g. `const:2` or `default=2;3:4`
        #[arg(long)]
        alpha: String,
        /// Run length
        #[arg(long)]
        len: u32,
    },
    /// Exact density of a symbolic set
    Density {
        /// Set expression, e.g. `!(ppu(const:2))` or `res(0,3)`
        #[arg(long)]
        set: String,
        /// Count over `lo:hi` instead of one period
        #[arg(long)]
        window: Option<String>,
    },
    /// Divisibility chains and antichains
    Chain {
        /// Build a chain inside this (periodic) set
        #[arg(long)]
        in_set: Option<String>,
        /// Chain length for --in-set
        #[arg(long)]
        len: Option<usize>,
        /// Search bound for the chain base
        #[arg(long)]
        bound: Option<u64>,
        /// Check a comma-separated list for the chain property and 3-term
        /// progressions
        #[arg(long, value_delimiter = ',')]
        check: Option<Vec<String>>,
        /// Build an antichain inside the multiples of this integer
        #[arg(long)]
        antichain_base: Option<String>,
        /// Antichain size
        #[arg(long)]
        size: Option<usize>,
        /// Strictly increasing seed list for prefix products
        #[arg(long, value_delimiter = ',')]
        prefix: Option<Vec<String>>,
        /// Number of prefix products to take (k yields k+1 terms)
        #[arg(long)]
        take: Option<usize>,
    },
    /// Finite-intersection witness for an intermediate profile
    Fip {
        #[arg(long)]
        phi: String,
        /// Primes whose exact-exponent set joins the subfamily
        #[arg(long, value_delimiter = ',')]
        exact: Vec<u64>,
        /// Primes whose coprimality set joins the subfamily
        #[arg(long, value_delimiter = ',')]
        coprime: Vec<u64>,
        /// `p:n` power sets joining the subfamily
        #[arg(long, value_delimiter = ',')]
        power: Vec<String>,
        #[arg(long, value_enum)]
        side: Side,
    },
    /// Replayable bundles of claims and certificates
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// List builtin scenarios
    List,
    /// Replay a builtin scenario or a JSON scenario file
    Run { name_or_file: String },
    /// Print a builtin scenario as JSON
    Export { name: String },
}

struct Failure(String);

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Failure {
        Failure(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

fn build_context(cli: &Cli) -> Result<Ctx, Failure> {
    let primes = match &cli.primes {
        Some(ps) => ps.clone(),
        None => betaz::primes::first_primes(10),
    };
    let caps: Vec<(u64, u32)> = match &cli.cap {
        None => primes.iter().map(|&p| (p, 6)).collect(),
        Some(spec) if !spec.contains(':') => {
            let cap: u32 = spec.parse().map_err(|_| Failure(format!("bad cap `{spec}`")))?;
            primes.iter().map(|&p| (p, cap)).collect()
        }
        Some(spec) => {
            let mut caps: Vec<(u64, u32)> = primes.iter().map(|&p| (p, 6)).collect();
            for pair in spec.split(',') {
                let (p, c) = pair
                    .split_once(':')
                    .ok_or_else(|| Failure(format!("bad cap entry `{pair}`")))?;
                let p: u64 = p.parse().map_err(|_| Failure(format!("bad prime `{p}`")))?;
                let c: u32 = c.parse().map_err(|_| Failure(format!("bad cap `{c}`")))?;
                match caps.iter_mut().find(|(q, _)| *q == p) {
                    Some(entry) => entry.1 = c,
                    None => caps.push((p, c)),
                }
            }
            caps
        }
    };
    Ok(PrecisionContext::new(caps)?)
}

/// Supernatural literals, with a `const:<e>` shorthand for constant maps.
fn parse_supernatural(s: &str) -> Result<SupernaturalNumber, Failure> {
    if let Some(rest) = s.trim().strip_prefix("const:") {
        let e = if rest.eq_ignore_ascii_case("omega") {
            Exponent::Omega
        } else {
            Exponent::Finite(rest.parse().map_err(|_| Failure(format!("bad exponent `{rest}`")))?)
        };
        return Ok(SupernaturalNumber::constant(e));
    }
    Ok(SupernaturalNumber::from_str(s)?)
}

/// Set expressions, allowing the `const:` shorthand inside `ppu(...)`.
fn parse_set(s: &str) -> Result<SetExpr, Failure> {
    if let Some(inner) = s.trim().strip_prefix("ppu(const:") {
        if let Some(inner) = inner.strip_suffix(')') {
            let alpha = parse_supernatural(&format!("const:{inner}"))?;
            return Ok(SetExpr::prime_power_union(alpha)?);
        }
    }
    let rewritten = s.replace("ppu(const:", "ppu(default=");
    Ok(SetExpr::from_str(&rewritten)?)
}

fn print_output(json: bool, value: serde_json::Value, human: &[String]) {
    if json {
        println!("{}", serde_json::to_string_pretty(&value).expect("serialisable"));
    } else {
        for line in human {
            println!("{line}");
        }
    }
}

fn run(cli: &Cli) -> Result<u8, Failure> {
    let ctx = build_context(cli)?;
    match &cli.command {
        Command::Classify { literal } => {
            let phi = parse_supernatural(literal)?;
            let report = selfdiv_classify(&phi)?;
            let class = phi.classify();
            let human_class = match report.class {
                SelfDivClass::ForcedNonSelfDivisibleUnlessPrincipal => {
                    "not self-divisible unless principal"
                }
                SelfDivClass::ForcedSelfDivisible => "self-divisible",
                SelfDivClass::BothPossible => {
                    "both self-divisible and non-self-divisible extensions exist"
                }
            };
            let mut human = vec![format!("{class}; {human_class}")];
            let mut json = serde_json::json!({
                "phi": phi.to_string(),
                "class": class.to_string(),
                "selfdiv": report.class.as_str(),
            });
            if let Some(certs) = &report.certificates {
                human.push(format!(
                    "witness in union: {} / witness in complement: {} (both re-verified)",
                    certs.in_union, certs.in_complement
                ));
                json["certificates"] = serde_json::json!({
                    "exact": certs.selection.exact,
                    "coprime": certs.selection.coprime,
                    "powers": certs.selection.powers,
                    "in_union": certs.in_union.to_string(),
                    "in_complement": certs.in_complement.to_string(),
                });
            }
            print_output(cli.json, json, &human);
            Ok(0)
        }
        Command::Quotient { literal } => {
            let phi = parse_supernatural(literal)?;
            let quotient = quotient_from_profile(&phi, &ctx);
            let human = vec![format!("{}", quotient.display_product())];
            let json = serde_json::json!({
                "phi": phi.to_string(),
                "quotient": quotient.to_json(),
                "display": quotient.display_product(),
            });
            print_output(cli.json, json, &human);
            Ok(0)
        }
        Command::Congruence { relation, w, u, v } => {
            let mut engine = Engine::new(&ctx);
            let w = sketch_parse::parse_sketch(w, &ctx)?;
            let u = sketch_parse::parse_sketch(u, &ctx)?;
            let verdict = match relation {
                Relation::Weak | Relation::Strong => {
                    let v = v
                        .as_ref()
                        .ok_or_else(|| Failure("--v is required for congruences".into()))?;
                    let v = sketch_parse::parse_sketch(v, &ctx)?;
                    match relation {
                        Relation::Weak => engine.weak_congruent(&u, &v, &w)?,
                        _ => engine.strong_congruent(&u, &v, &w)?,
                    }
                }
                Relation::Tilde => engine.divides_tilde(&w, &u)?,
                Relation::StrongDiv => engine.divides_strong(&w, &u)?,
            };
            let mut human = vec![format!("verdict: {}", verdict.value)];
            for step in &verdict.trace {
                human.push(format!("  via {}: {}", step.rule, step.anchor));
            }
            print_output(cli.json, verdict.to_json(), &human);
            Ok(if verdict.value == TriBool::Undetermined { 2 } else { 0 })
        }
        Command::Thickness { alpha, len } => {
            let alpha = parse_supernatural(alpha)?;
            let witness = setalg::thickness_witness(&alpha, *len)?;
            let union = SetExpr::prime_power_union(alpha.clone())?;
            let mut human = vec![witness.to_string()];
            let mut checks = Vec::new();
            for k in 1..=*len {
                let term = &witness + BigInt::from(k);
                let p = betaz::primes::nth_prime((k - 1) as usize);
                let Exponent::Finite(e) = alpha.value_at(p) else { unreachable!("validated") };
                let divisor = BigInt::from(betaz::primes::pow_biguint(p, e));
                let member = union.member(&term);
                human.push(format!(
                    "  n+{k} = {term} divisible by {p}^{e} = {divisor}: {member}"
                ));
                checks.push(serde_json::json!({
                    "k": k,
                    "term": term.to_string(),
                    "divisor": divisor.to_string(),
                    "member": member,
                }));
            }
            let json = serde_json::json!({
                "alpha": alpha.to_string(),
                "run_length": len,
                "witness": witness.to_string(),
                "checks": checks,
            });
            print_output(cli.json, json, &human);
            Ok(0)
        }
        Command::Density { set, window } => {
            let set = parse_set(set)?;
            let window = match window {
                None => None,
                Some(w) => {
                    let (lo, hi) = w
                        .split_once(':')
                        .ok_or_else(|| Failure(format!("window must be lo:hi, got `{w}`")))?;
                    let lo: BigInt =
                        lo.parse().map_err(|_| Failure(format!("bad bound `{lo}`")))?;
                    let hi: BigInt =
                        hi.parse().map_err(|_| Failure(format!("bad bound `{hi}`")))?;
                    Some((lo, hi))
                }
            };
            let report = match &window {
                None => set.density(None)?,
                Some((lo, hi)) => set.density(Some((lo, hi)))?,
            };
            let value = report.value();
            let (kind, human) = match &report {
                betaz::DensityReport::ExactPeriodic(_) => {
                    ("exact-periodic", format!("exact density {value} per period"))
                }
                betaz::DensityReport::WindowEstimate { lo, hi, .. } => (
                    "window-estimate",
                    format!("density {value} over [{lo}, {hi}]"),
                ),
            };
            let json = serde_json::json!({
                "set": set.to_string(),
                "kind": kind,
                "value": value.to_string(),
            });
            print_output(cli.json, json, &[human]);
            Ok(0)
        }
        Command::Chain { in_set, len, bound, check, antichain_base, size, prefix, take } => {
            let mut human = Vec::new();
            let mut json = serde_json::Map::new();
            let mut did_something = false;
            if let Some(set) = in_set {
                let set = parse_set(set)?;
                let len = len.ok_or_else(|| Failure("--len is required with --in-set".into()))?;
                let chain = match bound {
                    Some(b) => setalg::chain_in_periodic_bounded(&set, len, *b)?,
                    None => setalg::chain_in_periodic(&set, len)?,
                };
                human.push(format!(
                    "chain in {set}: {}",
                    chain.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" | ")
                ));
                json.insert(
                    "chain".into(),
                    serde_json::Value::Array(
                        chain.iter().map(|x| serde_json::Value::from(x.to_string())).collect(),
                    ),
                );
                did_something = true;
            }
            if let Some(elems) = check {
                let elems: Vec<BigInt> = elems
                    .iter()
                    .map(|s| s.parse().map_err(|_| Failure(format!("bad integer `{s}`"))))
                    .collect::<Result<_, _>>()?;
                let is_chain = setalg::is_divisibility_chain(&elems);
                let ap = setalg::find_3ap(&elems.iter().cloned().collect());
                human.push(format!("divisibility chain: {is_chain}"));
                human.push(match &ap {
                    Some((a, b, c)) => format!("3-term progression: ({a}, {b}, {c})"),
                    None => "3-term progression: none".to_string(),
                });
                json.insert("is_chain".into(), serde_json::Value::from(is_chain));
                json.insert(
                    "three_ap".into(),
                    match ap {
                        Some((a, b, c)) => serde_json::json!([
                            a.to_string(),
                            b.to_string(),
                            c.to_string()
                        ]),
                        None => serde_json::Value::Null,
                    },
                );
                did_something = true;
            }
            if let Some(base) = antichain_base {
                let base: BigInt =
                    base.parse().map_err(|_| Failure(format!("bad integer `{base}`")))?;
                let size =
                    size.ok_or_else(|| Failure("--size is required with --antichain-base".into()))?;
                let antichain = setalg::antichain_in_multiples(&base, size)?;
                human.push(format!(
                    "antichain in {base}Z: {}",
                    antichain.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
                ));
                json.insert(
                    "antichain".into(),
                    serde_json::Value::Array(
                        antichain.iter().map(|x| serde_json::Value::from(x.to_string())).collect(),
                    ),
                );
                did_something = true;
            }
            if let Some(seed) = prefix {
                let seed: Vec<BigInt> = seed
                    .iter()
                    .map(|s| s.parse().map_err(|_| Failure(format!("bad integer `{s}`"))))
                    .collect::<Result<_, _>>()?;
                let take =
                    take.ok_or_else(|| Failure("--take is required with --prefix".into()))?;
                let chain = setalg::fp_prefix_chain(&seed, take)?;
                human.push(format!(
                    "prefix products: {}",
                    chain.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" | ")
                ));
                json.insert(
                    "prefix_products".into(),
                    serde_json::Value::Array(
                        chain.iter().map(|x| serde_json::Value::from(x.to_string())).collect(),
                    ),
                );
                did_something = true;
            }
            if !did_something {
                return Err(Failure(
                    "chain needs one of --in-set, --check, --antichain-base, --prefix".into(),
                ));
            }
            print_output(cli.json, serde_json::Value::Object(json), &human);
            Ok(0)
        }
        Command::Fip { phi, exact, coprime, power, side } => {
            let phi = parse_supernatural(phi)?;
            let powers: Vec<(u64, u32)> = power
                .iter()
                .map(|pair| {
                    let (p, n) = pair
                        .split_once(':')
                        .ok_or_else(|| Failure(format!("bad power entry `{pair}`")))?;
                    Ok((
                        p.parse().map_err(|_| Failure(format!("bad prime `{p}`")))?,
                        n.parse().map_err(|_| Failure(format!("bad power `{n}`")))?,
                    ))
                })
                .collect::<Result<_, Failure>>()?;
            let selection =
                FamilySelection { exact: exact.clone(), coprime: coprime.clone(), powers };
            let fip_side = match side {
                Side::Union => FipSide::InUnion,
                Side::Complement => FipSide::InComplement,
            };
            let witness = setalg::phidf_witness(&phi, &selection, fip_side)?;
            let union = setalg::profile_union_set(&phi);
            let in_union = union.member(&witness);
            let in_family = selection.sets(&phi).iter().all(|s| s.member(&witness));
            let verified = in_family
                && match fip_side {
                    FipSide::InUnion => in_union,
                    FipSide::InComplement => !in_union,
                };
            let human = vec![
                format!("witness: {witness}"),
                format!("in every selected family set: {in_family}"),
                format!("in the union of (phi+1)-power classes: {in_union}"),
                format!("verified: {verified}"),
            ];
            let json = serde_json::json!({
                "phi": phi.to_string(),
                "side": match fip_side { FipSide::InUnion => "union", FipSide::InComplement => "complement" },
                "witness": witness.to_string(),
                "verified": verified,
            });
            print_output(cli.json, json, &human);
            if verified {
                Ok(0)
            } else {
                Err(Failure("finite-intersection witness failed re-verification".into()))
            }
        }
        Command::Scenario { action } => match action {
            ScenarioAction::List => {
                let human: Vec<String> =
                    scenario::BUILTIN_NAMES.iter().map(|n| n.to_string()).collect();
                let json = serde_json::json!({ "builtins": scenario::BUILTIN_NAMES });
                print_output(cli.json, json, &human);
                Ok(0)
            }
            ScenarioAction::Run { name_or_file } => {
                let s = load_scenario(name_or_file, &ctx)?;
                let report = s.replay()?;
                let mut human = vec![format!("scenario {}", report.name)];
                let mut claims_json = Vec::new();
                for claim in &report.claims {
                    let status = if claim.pass { "pass" } else { "FAIL" };
                    human.push(format!(
                        "  [{status}] {} expected {} got {}",
                        claim.query, claim.expected, claim.got.value
                    ));
                    claims_json.push(serde_json::json!({
                        "query": claim.query,
                        "expected": claim.expected.as_str(),
                        "got": claim.got.to_json(),
                        "pass": claim.pass,
                    }));
                }
                let mut certs_json = Vec::new();
                for cert in &report.certificates {
                    let status = if cert.pass { "pass" } else { "FAIL" };
                    human.push(format!("  [{status}] certificate: {}", cert.description));
                    certs_json.push(serde_json::json!({
                        "description": cert.description,
                        "pass": cert.pass,
                    }));
                }
                for violation in &report.transitivity_violations {
                    human.push(format!("  transitivity violation: {violation}"));
                }
                let passed = report.all_passed();
                human.push(format!(
                    "result: {}",
                    if passed { "all claims and certificates verified" } else { "FAILED" }
                ));
                let json = serde_json::json!({
                    "name": report.name,
                    "claims": claims_json,
                    "certificates": certs_json,
                    "transitivity_violations": report.transitivity_violations,
                    "undetermined_claims": report.undetermined_claims,
                    "passed": passed,
                });
                print_output(cli.json, json, &human);
                Ok(if passed { 0 } else { 1 })
            }
            ScenarioAction::Export { name } => {
                let s = load_scenario(name, &ctx)?;
                println!("{}", serde_json::to_string_pretty(&s.to_json()).expect("serialisable"));
                Ok(0)
            }
        },
    }
}

fn load_scenario(name_or_file: &str, ctx: &Ctx) -> Result<Scenario, Failure> {
    if scenario::BUILTIN_NAMES.contains(&name_or_file) {
        return Ok(scenario::builtin(name_or_file, ctx)?);
    }
    let text = std::fs::read_to_string(name_or_file)
        .map_err(|e| Failure(format!("cannot read scenario `{name_or_file}`: {e}")))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| Failure(format!("bad scenario JSON: {e}")))?;
    Ok(Scenario::from_json(&value)?)
}
