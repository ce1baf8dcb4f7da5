//! Acceptance suite: one test per criterion, each printing a pass/fail line.
//!
//! Run with `cargo test -p betaz --test acceptance -- --nocapture` to see the
//! per-criterion lines. Every tolerance is pinned in this file.

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Instant;

use num_bigint::{BigInt, BigUint};
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use betaz::scenario::scenario_ex1;
use betaz::setalg::{self, SetExpr};
use betaz::sketch::{selfdiv_classify, Engine, Principality, SelfDivClass, UltraSketch};
use betaz::supernatural::{Exponent, SupernaturalNumber};
use betaz::{
    quotient_from_profile, sigma_w, Ctx, ElementOrder, PrecisionContext, ProfiniteInt, TriBool,
};

fn report(criterion: u32, name: &str, pass: bool) {
    println!(
        "criterion {criterion:2} [{}] {name}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {name}");
}

fn sn(s: &str) -> SupernaturalNumber {
    s.parse().unwrap()
}

fn default_ctx() -> Ctx {
    PrecisionContext::default_context()
}

/// Elapsed-time budget: as stated in release builds, with a 30x allowance
/// for unoptimised debug codegen (the bound is about the algorithm, not the
/// compiler profile).
fn time_budget(release_secs: f64) -> f64 {
    if cfg!(debug_assertions) {
        release_secs * 30.0
    } else {
        release_secs
    }
}

#[test]
fn acceptance_01_principal_oracle_equivalence() {
    let ctx = default_ctx();
    let mut engine = Engine::new(&ctx);
    let moduli: Vec<UltraSketch> = (-20i64..=20)
        .filter(|&n| n != 0)
        .map(UltraSketch::principal)
        .collect();
    let operands: Vec<UltraSketch> = (-50i64..=50).map(UltraSketch::principal).collect();

    let start = Instant::now();
    let mut pass = true;
    for (ni, n) in (-20i64..=20).filter(|&n| n != 0).zip(&moduli) {
        for (ai, a) in (-50i64..=50).zip(&operands) {
            for (bi, b) in (-50i64..=50).zip(&operands) {
                let expected = TriBool::from_bool((ai - bi).rem_euclid(ni.abs()) == 0);
                let weak = engine.weak_congruent(a, b, n).unwrap().value;
                let strong = engine.strong_congruent(a, b, n).unwrap().value;
                if weak != expected || strong != expected {
                    pass = false;
                }
            }
        }
    }
    let elapsed = start.elapsed().as_secs_f64();
    let in_time = elapsed < time_budget(1.0);
    report(
        1,
        &format!("principal congruences match integer congruence exhaustively ({elapsed:.2}s)"),
        pass && in_time,
    );
}

#[test]
fn acceptance_02_intransitivity_replay() {
    let ctx = default_ctx();
    let scenario = scenario_ex1(&ctx).unwrap();
    let replay = scenario.replay().unwrap();
    let verdicts: Vec<TriBool> = replay.claims.iter().map(|c| c.got.value).collect();
    let expected = [TriBool::True, TriBool::True, TriBool::False, TriBool::False];
    let rules: Vec<&str> = replay
        .claims
        .iter()
        .map(|c| c.got.trace.last().map(|s| s.rule).unwrap_or(""))
        .collect();
    let expected_rules = [
        "identity-or-negation",
        "target-is-max",
        "nonprincipal-over-principal",
        "finite-divisor-set",
    ];
    let pass = verdicts == expected
        && rules == expected_rules
        && replay.undetermined_claims == 0
        && replay.transitivity_violations.len() == 1
        && replay.all_passed();
    report(2, "shifted-MAX modulus replays the intransitive verdict triple", pass);
}

#[test]
fn acceptance_03_classification_suite() {
    let finite: Vec<SupernaturalNumber> = vec![
        SupernaturalNumber::from_integer(&BigInt::from(1)),
        SupernaturalNumber::from_integer(&BigInt::from(2)),
        SupernaturalNumber::from_integer(&BigInt::from(6)),
        SupernaturalNumber::from_integer(&BigInt::from(-12)),
        SupernaturalNumber::from_integer(&BigInt::from(97)),
        SupernaturalNumber::from_integer(&BigInt::from(1024)),
        sn("default=0;2:3"),
        sn("default=0;2:1,3:1,5:2"),
        sn("default=0;19:7"),
        sn("default=0;2:2,7:1"),
    ];
    let cofinite: Vec<SupernaturalNumber> = vec![
        sn("default=omega"),
        sn("default=omega;2:0"),
        sn("default=omega;2:3"),
        sn("default=omega;3:0,5:1"),
        sn("default=omega;2:1,3:2"),
        sn("default=omega;7:0"),
        sn("default=omega;11:4"),
        sn("default=omega;2:0,3:0"),
        sn("default=omega;5:2,13:0"),
        SupernaturalNumber::from_integer(&BigInt::zero()),
    ];
    let intermediate: Vec<SupernaturalNumber> = vec![
        sn("default=1"),
        sn("default=2"),
        sn("default=3"),
        sn("default=2;2:0"),
        sn("default=0;2:omega"),
        sn("default=0;2:omega,3:omega"),
        sn("default=1;5:omega"),
        sn("default=parity(1,0)"),
        sn("default=parity(0,omega)"),
        sn("default=parity(2,3);2:omega"),
    ];

    let mut pass = true;
    for phi in &finite {
        pass &= selfdiv_classify(phi).unwrap().class
            == SelfDivClass::ForcedNonSelfDivisibleUnlessPrincipal;
    }
    for phi in &cofinite {
        pass &= selfdiv_classify(phi).unwrap().class == SelfDivClass::ForcedSelfDivisible;
    }
    for phi in &intermediate {
        let reportd = selfdiv_classify(phi).unwrap();
        pass &= reportd.class == SelfDivClass::BothPossible;
        // Both finite-intersection certificate suites, re-verified here by
        // membership, independently of the checks inside selfdiv_classify.
        match reportd.certificates {
            None => pass = false,
            Some(certs) => {
                let union = setalg::profile_union_set(phi);
                pass &= union.member(&certs.in_union);
                pass &= !union.member(&certs.in_complement);
                for set in certs.selection.sets(phi) {
                    pass &= set.member(&certs.in_union);
                    pass &= set.member(&certs.in_complement);
                }
            }
        }
    }
    report(3, "10+10+10 profiles classify; intermediate ones carry verified certificates", pass);
}

#[test]
fn acceptance_04_quotient_structure() {
    let ctx = default_ctx();
    let phi = sn("default=0;2:3,3:omega");
    let quotient = Arc::new(quotient_from_profile(&phi, &ctx));
    let mut pass = quotient.display_product() == "Z/8 x Z3(truncated)";

    let one = ProfiniteInt::shadow(&ctx, BigInt::one());
    let image = sigma_w(&one, &quotient).unwrap();
    pass &= image.torsion_order() == BigUint::from(8u32);
    pass &= !image.coord(3).unwrap().is_zero();
    pass &= image.order() == ElementOrder::InfiniteAtPrecision;

    // Homomorphism on 1000 random pairs, exact.
    let mut rng = ChaCha8Rng::seed_from_u64(0x0401);
    let modulus = ctx.modulus().clone();
    for _ in 0..1000 {
        let x = random_below(&mut rng, &modulus);
        let y = random_below(&mut rng, &modulus);
        let x = ProfiniteInt::crt_unpack(&ctx, &x).unwrap();
        let y = ProfiniteInt::crt_unpack(&ctx, &y).unwrap();
        let lhs = sigma_w(&x.add(&y).unwrap(), &quotient).unwrap();
        let rhs = sigma_w(&x, &quotient).unwrap().add(&sigma_w(&y, &quotient).unwrap()).unwrap();
        if lhs != rhs {
            pass = false;
        }
    }
    report(4, "quotient components, torsion order 8, homomorphism on 1000 pairs", pass);
}

fn random_below(rng: &mut ChaCha8Rng, bound: &BigUint) -> BigUint {
    let bytes: Vec<u8> = (0..bound.to_bytes_be().len() + 8).map(|_| rng.gen()).collect();
    BigUint::from_bytes_be(&bytes) % bound
}

#[test]
fn acceptance_05_projection_dichotomy() {
    let ctx = default_ctx();
    let engine = Engine::new(&ctx);

    // MAX side: no nonzero tuple among 1000 samples lands on the identity.
    let max = UltraSketch::max_profile(&ctx);
    let probe = engine.sigma_injectivity_probe(&max, 1000).unwrap();
    let mut pass = probe.max_status == TriBool::True
        && probe.samples_tested == 1000
        && probe.injective_at_precision;

    // Non-MAX side with (p0, k0) = (2, 3): exponent 2 at the prime 2, omega
    // elsewhere. The witness has residue 2^2 = 4 at 2, zero elsewhere.
    let w = UltraSketch::profile(
        sn("default=omega;2:2"),
        ProfiniteInt::window_sparse(&ctx, [(2u64, BigUint::from(12u32))]).unwrap(),
        Principality::NonPrincipal,
        TriBool::True,
        "exponent-two-at-two",
    )
    .unwrap();
    let probe = engine.sigma_injectivity_probe(&w, 0).unwrap();
    match probe.kernel_witness {
        None => pass = false,
        Some(witness) => {
            pass &= witness.pi_nonzero;
            pass &= witness.sigma_is_identity;
            pass &= witness.pi.residue(2).unwrap() == BigUint::from(4u32);
            pass &= witness.pi.residues().iter().all(|(&p, r)| p == 2 || r.is_zero());
        }
    }
    report(5, "projection injective on MAX samples, explicit kernel witness otherwise", pass);
}

#[test]
fn acceptance_06_squarefree_combinatorics() {
    let start = Instant::now();

    // Ground truth: an independent sieve marking multiples of p^2.
    let n = 1_000_000usize;
    let mut squarefree = vec![true; n + 1];
    let mut p = 2usize;
    while p * p <= n {
        let mut q = p * p;
        while q <= n {
            squarefree[q] = false;
            q += p * p;
        }
        p += 1;
    }
    let oracle_count = (1..=n).filter(|&m| squarefree[m]).count() as u64;

    let set = SetExpr::power_free(2);
    let count = set.count_window(&BigInt::one(), &BigInt::from(n as u64)).unwrap();
    let mut pass = count == oracle_count;

    // The count is the ground truth; 0.607927 is a sanity anchor within
    // 0.005: |count/10^6 - 607927/10^6| <= 5000/10^6.
    let anchor = 607_927i64;
    pass &= (count as i64 - anchor).abs() <= 5_000;

    // Run witnesses for lengths 1, 2, 3, 12, each verified by dividing out
    // the prescribed prime squares; the length-3 witness is the least
    // solution, 547.
    let alpha = SupernaturalNumber::constant(Exponent::Finite(2));
    let union = SetExpr::prime_power_union(alpha.clone()).unwrap();
    for run in [1u32, 2, 3, 12] {
        let witness = setalg::thickness_witness(&alpha, run).unwrap();
        for k in 1..=run {
            let term = &witness + BigInt::from(k);
            let p = BigInt::from(betaz::primes::nth_prime((k - 1) as usize));
            pass &= (&term % (&p * &p)).is_zero();
            pass &= union.member(&term);
        }
        if run == 3 {
            pass &= witness == BigInt::from(547);
        }
    }

    let elapsed = start.elapsed().as_secs_f64();
    let in_time = elapsed < time_budget(5.0);
    report(
        6,
        &format!("squarefree density and verified run witnesses ({elapsed:.2}s)"),
        pass && in_time,
    );
}

#[test]
fn acceptance_07_chain_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0701);
    let mut chains: Vec<Vec<BigInt>> = Vec::new();

    // Factorial prefixes with shifted starts.
    for start in 1..=20u64 {
        for len in 2..=18usize {
            let mut chain = Vec::with_capacity(len);
            let mut acc = BigInt::one();
            for i in 0..len as u64 {
                acc *= BigInt::from(start + i);
                chain.push(acc.clone());
            }
            chains.push(chain);
        }
    }
    // Geometric chains.
    for a in 1..=17u64 {
        for r in 2..=11u64 {
            let len = 3 + ((a + r) % 8) as usize;
            let mut chain = Vec::with_capacity(len);
            let mut acc = BigInt::from(a);
            for _ in 0..len {
                chain.push(acc.clone());
                acc *= BigInt::from(r);
            }
            chains.push(chain);
        }
    }
    // Random multiplicative chains.
    while chains.len() < 1000 {
        let mut acc = BigInt::from(rng.gen_range(1..50u64));
        let len = rng.gen_range(3..12usize);
        let mut chain = Vec::with_capacity(len);
        for _ in 0..len {
            chain.push(acc.clone());
            acc *= BigInt::from(rng.gen_range(2..13u64));
        }
        chains.push(chain);
    }

    let mut pass = chains.len() >= 1000;
    for chain in &chains {
        pass &= setalg::is_divisibility_chain(chain);
        let set: BTreeSet<BigInt> = chain.iter().cloned().collect();
        pass &= setalg::find_3ap(&set).is_none();
    }
    report(7, &format!("{} generated chains, no 3-term progressions", chains.len()), pass);
}

#[test]
fn acceptance_08_coincidence_law() {
    let ctx = default_ctx();
    let mut engine = Engine::new(&ctx);

    // Self-divisible moduli.
    let mut moduli: Vec<UltraSketch> = [2i64, 3, 4, 6, 12, 30, -5, 7, 9, 10]
        .iter()
        .map(|&n| UltraSketch::principal(n))
        .collect();
    moduli.push(UltraSketch::max_profile(&ctx));
    moduli.push(window_profile(&ctx, "default=0;2:omega", "pow2-type"));
    moduli.push(window_profile(&ctx, "default=omega;2:2", "almost-max"));
    moduli.push(window_profile(&ctx, "default=omega;3:1", "almost-max-3"));
    for m in &moduli {
        assert_eq!(m.selfdiv(), TriBool::True, "modulus {m} must be self-divisible");
    }

    // Targets: principal and shadow-backed sketches, plus one windowed one.
    let mut targets: Vec<UltraSketch> = [0i64, 1, -1, 2, 3, 6, 24, 100]
        .iter()
        .map(|&n| UltraSketch::principal(n))
        .collect();
    targets.push(UltraSketch::max_profile(&ctx));
    targets
        .push(engine.sum(&UltraSketch::max_profile(&ctx), &UltraSketch::principal(1)).unwrap());
    targets
        .push(engine.sum(&UltraSketch::max_profile(&ctx), &UltraSketch::principal(5)).unwrap());
    targets.push(window_profile(&ctx, "default=0;2:omega", "pow2-type"));

    let mut total = 0u64;
    let mut decisive = 0u64;
    let mut agree = true;
    for w in &moduli {
        for u in &targets {
            for v in &targets {
                // Weak side through the engine's congruence path.
                let weak = engine.weak_congruent(u, v, w).unwrap().value;
                // Strong side evaluated directly on the difference, without
                // the coincidence shortcut.
                let delta = if u == v {
                    UltraSketch::max_profile(&ctx)
                } else {
                    engine.sum(u, &engine.neg(v)).unwrap()
                };
                let strong = engine.divides_strong(w, &delta).unwrap().value;
                total += 1;
                if weak.is_decisive() && strong.is_decisive() {
                    decisive += 1;
                    if weak != strong {
                        agree = false;
                    }
                }
            }
        }
    }
    let ratio = decisive as f64 / total as f64;
    report(
        8,
        &format!(
            "decisive weak/strong verdicts agree on {decisive}/{total} queries ({:.1}% decisive)",
            100.0 * ratio
        ),
        agree && ratio >= 0.95,
    );
}

fn window_profile(ctx: &Ctx, phi: &str, label: &str) -> UltraSketch {
    let phi: SupernaturalNumber = phi.parse().unwrap();
    let residues: Vec<(u64, BigUint)> = ctx
        .primes()
        .iter()
        .map(|&p| {
            let r = match phi.value_at(p) {
                Exponent::Finite(k) if k < ctx.cap(p).unwrap() => betaz::primes::pow_biguint(p, k),
                _ => BigUint::zero(),
            };
            (p, r)
        })
        .collect();
    let pi = ProfiniteInt::window_sparse(ctx, residues).unwrap();
    UltraSketch::profile(phi, pi, Principality::NonPrincipal, TriBool::True, label).unwrap()
}

#[test]
fn acceptance_09_crt_roundtrip() {
    // Exhaustive below 10^4.
    for caps in [vec![(2u64, 2u32), (3, 2)], vec![(2, 4), (5, 4)], vec![(2, 1), (3, 1), (5, 1), (7, 1)]] {
        let ctx = PrecisionContext::new(caps).unwrap();
        let modulus = ctx.modulus().to_u64().unwrap();
        assert!(modulus <= 10_000);
        for r in 0..modulus {
            let r = BigUint::from(r);
            let x = ProfiniteInt::crt_unpack(&ctx, &r).unwrap();
            if x.crt_pack() != r {
                report(9, "exhaustive roundtrip", false);
                return;
            }
        }
    }
    // Randomised 10^4 cases on the large default modulus.
    let ctx = PrecisionContext::default_context();
    let mut rng = ChaCha8Rng::seed_from_u64(0x0901);
    let mut pass = true;
    for _ in 0..10_000 {
        let r = random_below(&mut rng, ctx.modulus());
        let x = ProfiniteInt::crt_unpack(&ctx, &r).unwrap();
        pass &= x.crt_pack() == r;
    }
    report(9, "remainder packing is a bijection (exhaustive small, random large)", pass);
}

#[test]
fn acceptance_10_precision_monotonicity() {
    // 100 random queries evaluated at caps 2, 4, 6: no decisive verdict ever
    // flips and the number of undetermined verdicts never grows.
    let mut rng = ChaCha8Rng::seed_from_u64(0x1001);
    let caps = [2u32, 4, 6];
    let contexts: Vec<Ctx> = caps.iter().map(|&c| PrecisionContext::uniform(6, c)).collect();

    // A query is a recipe instantiated per context.
    #[derive(Clone)]
    enum Recipe {
        Principal(i64),
        Max,
        MaxShift(i64),
        Window(String),
        Sum(Box<Recipe>, Box<Recipe>),
    }

    fn build(recipe: &Recipe, ctx: &Ctx) -> UltraSketch {
        match recipe {
            Recipe::Principal(n) => UltraSketch::principal(*n),
            Recipe::Max => UltraSketch::max_profile(ctx),
            Recipe::MaxShift(n) => Engine::new(ctx)
                .sum(&UltraSketch::max_profile(ctx), &UltraSketch::principal(*n))
                .unwrap(),
            Recipe::Window(phi) => {
                let phi: SupernaturalNumber = phi.parse().unwrap();
                let residues: Vec<(u64, BigUint)> = ctx
                    .primes()
                    .iter()
                    .map(|&p| {
                        let r = match phi.value_at(p) {
                            Exponent::Finite(k) if k < ctx.cap(p).unwrap() => {
                                betaz::primes::pow_biguint(p, k)
                            }
                            _ => BigUint::zero(),
                        };
                        (p, r)
                    })
                    .collect();
                let pi = ProfiniteInt::window_sparse(ctx, residues).unwrap();
                UltraSketch::profile(
                    phi,
                    pi,
                    Principality::Unknown,
                    TriBool::Undetermined,
                    "recipe",
                )
                .unwrap()
            }
            Recipe::Sum(a, b) => {
                let engine = Engine::new(ctx);
                engine.sum(&build(a, ctx), &build(b, ctx)).unwrap()
            }
        }
    }

    let phis = [
        "default=0;2:1",
        "default=0;2:2,3:1",
        "default=0;2:omega",
        "default=0;3:omega,5:1",
        "default=omega;2:2",
        "default=0;2:1,5:2",
    ];
    let mut base_recipes: Vec<Recipe> = vec![
        Recipe::Max,
        Recipe::MaxShift(1),
        Recipe::MaxShift(-3),
        Recipe::Principal(4),
        Recipe::Principal(-9),
        Recipe::Principal(12),
    ];
    for phi in phis {
        base_recipes.push(Recipe::Window(phi.to_string()));
    }

    let mut queries = Vec::new();
    for _ in 0..100 {
        let pick = |rng: &mut ChaCha8Rng| -> Recipe {
            let r = base_recipes[rng.gen_range(0..base_recipes.len())].clone();
            if rng.gen_bool(0.25) {
                let s = base_recipes[rng.gen_range(0..base_recipes.len())].clone();
                Recipe::Sum(Box::new(r), Box::new(s))
            } else {
                r
            }
        };
        let w = loop {
            let r = pick(&mut rng);
            // The modulus must not be the zero sketch.
            if !matches!(r, Recipe::Principal(0)) {
                break r;
            }
        };
        let u = pick(&mut rng);
        let kind = rng.gen_range(0..3u8);
        queries.push((kind, w, u));
    }

    let mut pass = true;
    let mut prev_undetermined: Option<usize> = None;
    let mut prev_verdicts: Vec<Option<TriBool>> = vec![None; queries.len()];
    for ctx in &contexts {
        let mut engine = Engine::new(ctx);
        let mut undetermined = 0usize;
        for (i, (kind, w, u)) in queries.iter().enumerate() {
            let w = build(w, ctx);
            let u = build(u, ctx);
            let verdict = match kind {
                0 => engine.divides_tilde(&w, &u).unwrap().value,
                1 => engine.divides_strong(&w, &u).unwrap().value,
                _ => engine.weak_congruent(&u, &w, &w).unwrap().value,
            };
            if verdict == TriBool::Undetermined {
                undetermined += 1;
            }
            if let Some(prev) = prev_verdicts[i] {
                // A decisive verdict never flips to the opposite one.
                if prev.is_decisive() && verdict.is_decisive() && prev != verdict {
                    pass = false;
                }
            }
            prev_verdicts[i] = Some(verdict);
        }
        if let Some(prev) = prev_undetermined {
            if undetermined > prev {
                pass = false;
            }
        }
        prev_undetermined = Some(undetermined);
    }
    report(10, "no verdict flips across caps 2/4/6, undetermined count non-increasing", pass);
}
