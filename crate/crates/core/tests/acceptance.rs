//! Acceptance criteria; each prints one PASS/FAIL line.

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_traits::{Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ivfalsify::feasibility::{LinearSystem, Row, Sense};
use ivfalsify::fosd::{classify, enumerate_part1, enumerate_part2, BinaryRelation, Case, FosdCaps, Part};
use ivfalsify::psi::{pointwise_min, psi_mass, psi_table, PsiCaps};
use ivfalsify::selfcheck::{equivalence, oracle_suite, random_binary_law, random_restriction};
use ivfalsify::simulate::{appendix_b_break_dgp, appendix_b_dgp, generate_observed, random_valid_dgp};
use ivfalsify::submono::{lemma_harness, lemma_harness_sampled};
use ivfalsify::typespace::{build_full_system, Preset, RestrictionSpec, TypeSpace, DEFAULT_TYPE_CAP};
use ivfalsify::{solve_feasibility, Rational, Subset};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn q(n: i64, d: i64) -> Rational {
    Rational::new(n.into(), d.into())
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn dot(row: &Row<Rational>, p: &[Rational]) -> Rational {
    row.coeffs.iter().zip(p).fold(Rational::zero(), |acc, (a, b)| acc + a * b)
}

/// Row-by-row evaluation, written here rather than borrowed from the solver.
fn satisfies(sys: &LinearSystem<Rational>, p: &[Rational]) -> bool {
    p.iter().all(|v| !v.is_negative())
        && sys.rows.iter().all(|r| {
            let lhs = dot(r, p);
            match r.sense {
                Sense::Eq => lhs == r.rhs,
                Sense::Le => lhs <= r.rhs,
            }
        })
}

/// Farkas alternative for `{Ap (=,≤) b, p ≥ 0}`: `yᵀA ≥ 0`, `y_≤ ≥ 0`, `yᵀb < 0`.
fn farkas_holds(sys: &LinearSystem<Rational>, y: &[Rational]) -> bool {
    let signs = sys.rows.iter().zip(y).all(|(r, w)| r.sense == Sense::Eq || !w.is_negative());
    let cols = (0..sys.n_vars).all(|j| {
        let c = sys.rows.iter().zip(y).fold(Rational::zero(), |acc, (r, w)| acc + w * &r.coeffs[j]);
        !c.is_negative()
    });
    let yb = sys.rows.iter().zip(y).fold(Rational::zero(), |acc, (r, w)| acc + w * &r.rhs);
    signs && cols && yb.is_negative()
}

fn criterion1() -> Outcome {
    let start = Instant::now();
    let dgp = appendix_b_dgp::<Rational>();
    let d = generate_observed(&dgp).map_err(|e| e.to_string())?;
    let bin = d.binarize("x2").map_err(|e| e.to_string())?;
    let hi = bin.support.bin_index("y1").unwrap();
    // P[Y = 1, X_bin = 0 | z] at z0 and z1.
    let lhs = bin.subdensity[0][0][hi].clone();
    let rhs = bin.subdensity[1][0][hi].clone();
    ensure(lhs == q(1, 4) && rhs == q(1, 2), || format!("binarized quantities {lhs} vs {rhs}"))?;

    let ts2 = TypeSpace::for_support(&bin.support, DEFAULT_TYPE_CAP).unwrap();
    let psi2 = psi_table(&bin, 2, PsiCaps::default()).unwrap();
    let sys2 = build_full_system(&bin, &RestrictionSpec::preset(Preset::NoDefiers), &ts2, Some(&psi2)).unwrap();
    let r2 = solve_feasibility(&sys2).map_err(|e| e.to_string())?;
    let y = r2.certificate.clone().ok_or("binarized system reported feasible")?;
    ensure(farkas_holds(&sys2, &y), || "certificate fails the Farkas check".into())?;
    ensure(
        r2.violated_labels.iter().any(|t| t.name == "always-Bin0"),
        || format!("certificate rows {:?} miss the Bin0 always-taker row", r2.violated_labels),
    )?;

    let ts3 = TypeSpace::for_support(&d.support, DEFAULT_TYPE_CAP).unwrap();
    let psi3 = psi_table(&d, 2, PsiCaps::default()).unwrap();
    let sys3 = build_full_system(&d, &RestrictionSpec::preset(Preset::OrderedMonotone), &ts3, Some(&psi3)).unwrap();
    let r3 = solve_feasibility(&sys3).map_err(|e| e.to_string())?;
    ensure(r3.is_feasible(), || "3-treatment ordered-monotone system infeasible".into())?;
    let mut truth = vec![Rational::zero(); ts3.len()];
    for e in &dgp.type_table {
        truth[ts3.index(&e.tz).unwrap()] += e.weight.clone();
    }
    ensure(satisfies(&sys3, &truth), || "true population is not a witness".into())?;
    let expected = [(vec![0, 1], q(1, 2)), (vec![1, 2], q(1, 4)), (vec![2, 2], q(1, 4))];
    ensure(expected.iter().all(|(v, w)| truth[ts3.index(v).unwrap()] == *w), || "true weights differ".into())?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(1), || format!("took {took:?}"))?;
    Ok(format!("1/4 vs 1/2; certificate verified; witness verified; {took:.2?}"))
}

fn criterion2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0002);
    let trials = 1200;
    let mut tally: BTreeMap<(bool, bool), usize> = BTreeMap::new();
    for t in 0..trials {
        let l = 1 + t % 4;
        let bins = rng.gen_range(1..=5);
        let caps = t % 2 == 0;
        let spec = random_restriction(&mut rng, l);
        let d = if rng.gen_bool(0.5) {
            random_binary_law(&mut rng, l, bins)
        } else {
            let mut g = random_valid_dgp::<Rational>(rng.gen(), l, 2, bins, &RestrictionSpec::default(), DEFAULT_TYPE_CAP)
                .map_err(|e| e.to_string())?;
            if rng.gen_bool(0.7) {
                g = g.with_break(rng.gen_range(0..l), rng.gen_range(0..2), rng.gen_range(0..bins));
            }
            generate_observed(&g).map_err(|e| e.to_string())?
        };
        let e = equivalence(&d, &spec, caps).map_err(|e| e.to_string())?;
        ensure(e.agree(), || format!("trial {t} (L={l}, caps={caps}, ruled out {:?}): {e:?}", spec.ruled_out))?;
        *tally.entry((caps, e.lp)).or_insert(0) += 1;
    }
    ensure(tally.len() == 4, || format!("outcome mix too thin: {tally:?}"))?;
    let took = start.elapsed();
    ensure(took < Duration::from_secs(120), || format!("took {took:?}"))?;
    Ok(format!("{trials} instances agree; (caps, feasible) counts {tally:?}; {took:.2?}"))
}

fn criterion3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0003);
    let trials = 600;
    for t in 0..trials {
        let l = rng.gen_range(1..=3);
        let k = rng.gen_range(2..=3);
        let bins = rng.gen_range(1..=4);
        let spec = match t % 3 {
            0 => RestrictionSpec::preset(Preset::OrderedMonotone),
            1 if l == 2 => RestrictionSpec::preset(Preset::NoDefiers),
            _ => RestrictionSpec::default(),
        };
        let g = random_valid_dgp::<Rational>(rng.gen(), l, k, bins, &spec, DEFAULT_TYPE_CAP).map_err(|e| e.to_string())?;
        let d = generate_observed(&g).map_err(|e| e.to_string())?;
        let ts = TypeSpace::for_support(&d.support, DEFAULT_TYPE_CAP).unwrap();
        let psi = psi_table(&d, k, PsiCaps::default()).unwrap();
        let sys = build_full_system(&d, &spec, &ts, Some(&psi)).unwrap();
        let mut truth = vec![Rational::zero(); ts.len()];
        for e in &g.type_table {
            truth[ts.index(&e.tz).unwrap()] += e.weight.clone();
        }
        ensure(satisfies(&sys, &truth), || format!("trial {t}: true population violates its own system"))?;
        let r = solve_feasibility(&sys).map_err(|e| e.to_string())?;
        ensure(r.is_feasible(), || format!("trial {t}: valid population judged infeasible (L={l}, K={k})"))?;
    }
    Ok(format!("{trials} valid populations feasible"))
}

fn criterion4() -> Outcome {
    let (res, indefinite) = oracle_suite(0xacce_0004, 320, 9).map_err(|e| e.to_string())?;
    ensure(res.ok(), || format!("{:?}", res.failures))?;
    ensure(res.trials >= 200, || format!("only {} definite comparisons", res.trials))?;
    Ok(format!("{} definite comparisons agree ({indefinite} indefinite skipped)", res.trials))
}

fn criterion5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0005);
    let trials = 240;
    for t in 0..trials {
        let l = rng.gen_range(1..=3);
        let bins = rng.gen_range(1..=10);
        let d = random_binary_law(&mut rng, l, bins);
        for x in 0..l {
            let sup = (0u32..1 << bins)
                .map(|mask| {
                    (0..bins)
                        .filter(|b| mask >> b & 1 == 1)
                        .fold(Rational::zero(), |acc, b| acc + &d.subdensity[0][x][b] - &d.subdensity[1][x][b])
                })
                .max()
                .unwrap();
            let psi = psi_mass(&d, x, Subset::full(2)).map_err(|e| e.to_string())?;
            let want = d.cond_treatment[0][x].clone() - psi;
            ensure(sup == want, || format!("trial {t} x{x}: sup {sup} vs {want}"))?;
        }
    }
    Ok(format!("{trials} laws: subset supremum equals P[x|z0] - Psi_x"))
}

fn criterion6() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0006);
    let trials = 240;
    let spec = RestrictionSpec::preset(Preset::OrderedMonotone);
    let mut checked = 0;
    for t in 0..trials {
        let l = rng.gen_range(1..=4);
        let bins = rng.gen_range(1..=5);
        let g = random_valid_dgp::<Rational>(rng.gen(), l, 2, bins, &spec, DEFAULT_TYPE_CAP).map_err(|e| e.to_string())?;
        let d = generate_observed(&g).map_err(|e| e.to_string())?;
        for x in 0..l {
            // Adoption of x weakly increases: no one who takes x at z0 leaves it at z1.
            let leaves = g.type_table.iter().any(|e| e.tz[0] == x && e.tz[1] != x && !e.weight.is_zero());
            if leaves {
                continue;
            }
            let psi = pointwise_min(&d, x, Subset::full(2)).map_err(|e| e.to_string())?;
            ensure(psi == d.subdensity[0][x], || format!("trial {t} x{x}: {psi:?} vs {:?}", d.subdensity[0][x]))?;
            checked += 1;
        }
    }
    Ok(format!("{trials} populations, {checked} treatment checks: psi equals the z0 sub-density"))
}

fn criterion7() -> Outcome {
    let mut lines = Vec::new();
    for l in [2usize, 3] {
        let h = lemma_harness(l).map_err(|e| e.to_string())?;
        ensure(h.passed(), || format!("L={l}: {:?}", h.failures))?;
        ensure(h.relations == 1 << (l * l), || format!("L={l}: {} relations", h.relations))?;
        ensure(h.checks.iter().all(|&c| c > 0), || format!("L={l}: a part ran no checks: {:?}", h.checks))?;
        // One minimality witness per proper subset of each relation: Σ_R (2^|R| - 1) = 3^(L²) - 2^(L²).
        let want = 3usize.pow((l * l) as u32) - (1 << (l * l));
        ensure(h.minimality_checks == want, || format!("L={l}: {} minimality checks, want {want}", h.minimality_checks))?;
        lines.push(format!("L={l}: {} relations, {} minimality witnesses", h.relations, want));
    }
    let h4 = lemma_harness_sampled(4, 50, 0x5eed).map_err(|e| e.to_string())?;
    ensure(h4.passed() && h4.relations == 50, || format!("L=4: {:?}", h4.failures))?;
    lines.push("L=4: 50 sampled relations".into());
    Ok(lines.join("; "))
}

fn detection_case(d: &ivfalsify::ObservedDistribution, spec: &RestrictionSpec<Rational>, x: usize) -> Result<Option<Case>, String> {
    let ts = TypeSpace::for_support(&d.support, DEFAULT_TYPE_CAP).unwrap();
    let rel = BinaryRelation::from_forbidden(&ts, &spec.forbidden(&d.support, &ts).unwrap());
    let psi = psi_table(d, 2, PsiCaps::default()).unwrap();
    let p1 = enumerate_part1(d, &rel, FosdCaps::default()).map_err(|e| e.to_string())?;
    let p2 = enumerate_part2(d, &rel, &psi, FosdCaps::default()).map_err(|e| e.to_string())?;
    let c = classify(&p1, &p2).map_err(|e| e.to_string())?;
    let any = p1.iter().chain(&p2).any(|r| r.violated);
    if !any {
        return Ok(None);
    }
    ensure(matches!(c.case, Case::Case2 | Case::Case3), || format!("violations classified {:?}", c.case))?;
    if p2.iter().any(|r| r.violated && r.kind == Part::Part2) {
        ensure(c.part2_sets.iter().any(|s| s.contains(x)), || format!("no attributed set contains x{x}: {:?}", c.part2_sets))?;
    }
    Ok(Some(c.case))
}

fn criterion8() -> Outcome {
    let d = generate_observed(&appendix_b_break_dgp::<Rational>()).map_err(|e| e.to_string())?;
    let c = detection_case(&d, &RestrictionSpec::preset(Preset::OrderedMonotone), 2)?;
    ensure(c == Some(Case::Case2), || format!("worked-example break classified {c:?}"))?;

    let mut rng = ChaCha8Rng::seed_from_u64(0xacce_0008);
    let (mut detected, mut undetected) = (0, 0);
    for t in 0..100 {
        let l = rng.gen_range(2..=4);
        let bins = rng.gen_range(2..=4);
        let spec = if t % 2 == 0 { RestrictionSpec::preset(Preset::OrderedMonotone) } else { RestrictionSpec::default() };
        let g = random_valid_dgp::<Rational>(rng.gen(), l, 2, bins, &spec, DEFAULT_TYPE_CAP).map_err(|e| e.to_string())?;
        let x = g.type_table[rng.gen_range(0..g.type_table.len())].tz[1];
        let b = rng.gen_range(0..bins);
        let d = generate_observed(&g.with_break(x, 1, b)).map_err(|e| e.to_string())?;
        match detection_case(&d, &spec, x).map_err(|e| format!("draw {t}: {e}"))? {
            Some(_) => detected += 1,
            None => undetected += 1,
        }
    }
    ensure(detected > 0, || "no injection was ever detected".into())?;
    Ok(format!("worked-example break: case 2; random: {detected} detected, {undetected} undetected (logged)"))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 8] = [
        ("worked example reproduction", criterion1),
        ("lp / flow / cut / inequality equivalence", criterion2),
        ("soundness over valid populations", criterion3),
        ("solver vs brute-force oracle", criterion4),
        ("subset-supremum duality", criterion5),
        ("monotone dominance", criterion6),
        ("submonotonicity harness", criterion7),
        ("exclusion-break detection", criterion8),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(msg) => println!("PASS criterion {} ({name}): {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {} ({name}): {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {}/8 passed", 8 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
