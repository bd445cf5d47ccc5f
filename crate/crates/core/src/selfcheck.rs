//! Seeded cross-validation suites: solver vs flow vs inequalities, solver vs
//! brute force, and soundness over simulated valid populations.

use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::feasibility::{brute_force_oracle, solve_feasibility, LinearSystem, Row, RowKind, Sense};
use crate::flownet::{build_network, max_flow, min_cut};
use crate::fosd::{classify, enumerate_part1, enumerate_part2, BinaryRelation, Case, FosdCaps};
use crate::obs::{ObservedDistribution, Support};
use crate::psi::{psi_table, PsiCaps};
use crate::scalar::Scalar;
use crate::simulate::{appendix_b_break_dgp, appendix_b_dgp, generate_observed, random_valid_dgp};
use crate::typespace::{build_full_system, Preset, RestrictionSpec, TypeSpace, DEFAULT_TYPE_CAP};
use crate::Rational;

#[derive(Clone, Debug, Default, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub trials: usize,
    pub passed: usize,
    pub failures: Vec<String>,
}

impl SuiteResult {
    fn new(name: &str) -> Self {
        SuiteResult { name: name.into(), ..Default::default() }
    }

    fn record(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.trials += 1;
        if ok {
            self.passed += 1;
        } else {
            self.failures.push(what());
        }
    }

    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SelfcheckReport {
    pub seed: u64,
    pub trials: usize,
    pub suites: Vec<SuiteResult>,
    pub warnings: Vec<String>,
}

impl SelfcheckReport {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::ok)
    }

    pub fn summary(&self) -> String {
        let mut out = String::new();
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        for s in &self.suites {
            let tag = if s.ok() { "PASS" } else { "FAIL" };
            out.push_str(&format!("{tag} {}: {}/{}\n", s.name, s.passed, s.trials));
            for f in s.failures.iter().take(5) {
                out.push_str(&format!("  {f}\n"));
            }
        }
        out.push_str(if self.passed() { "selfcheck passed\n" } else { "selfcheck FAILED\n" });
        out
    }
}

fn labels(p: &str, n: usize) -> Vec<String> {
    (0..n).map(|i| format!("{p}{i}")).collect()
}

/// A binary-instrument law with small-integer cell weights; each instrument
/// row is drawn independently, so both feasible and infeasible laws occur.
pub fn random_binary_law(rng: &mut ChaCha8Rng, l: usize, bins: usize) -> ObservedDistribution<Rational> {
    random_law(rng, l, 2, bins)
}

pub fn random_law(rng: &mut ChaCha8Rng, l: usize, k: usize, bins: usize) -> ObservedDistribution<Rational> {
    let names = |p, n| labels(p, n);
    let support = Support::new(
        names("b", bins).into_iter().map(crate::obs::Bin::label).collect(),
        names("x", l),
        names("z", k),
        Some((0..l).collect()),
    )
    .expect("generated support is valid");
    let sparsity = rng.gen_range(0.0..0.7);
    let phi = (0..k)
        .map(|_| loop {
            let raw: Vec<Vec<i64>> = (0..l)
                .map(|_| (0..bins).map(|_| if rng.gen_bool(sparsity) { 0 } else { rng.gen_range(1..=4) }).collect())
                .collect();
            let total: i64 = raw.iter().flatten().sum();
            if total > 0 {
                break raw.iter().map(|r| r.iter().map(|&v| Rational::from_ratio(v, total)).collect()).collect::<Vec<Vec<_>>>();
            }
        })
        .collect();
    ObservedDistribution::from_subdensity(support, phi, None).expect("generated law is valid")
}

/// Random per-type restriction for a binary instrument; diagonal types are
/// ruled out less often so that the overlap caps stay relevant.
pub fn random_restriction(rng: &mut ChaCha8Rng, l: usize) -> RestrictionSpec<Rational> {
    let dens = rng.gen_range(0.0..0.6);
    let mut out = Vec::new();
    for a in 0..l {
        for b in 0..l {
            let p = if a == b { dens / 4.0 } else { dens };
            if rng.gen_bool(p) {
                out.push(vec![a, b]);
            }
        }
    }
    RestrictionSpec::ruled_out(out)
}

/// The four answers that must coincide on a binary-instrument instance.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equivalence {
    pub lp: bool,
    pub flow: bool,
    pub cut: bool,
    pub fosd: bool,
    pub case: Case,
}

impl Equivalence {
    pub fn agree(&self) -> bool {
        self.lp == self.flow && self.flow == self.cut && self.cut == self.fosd
    }
}

/// With `caps`, the always-taker rows, the diagonal capacities and the part-2
/// inequalities are in play; without, only switch restrictions are.
pub fn equivalence(d: &ObservedDistribution<Rational>, spec: &RestrictionSpec<Rational>, caps: bool) -> Result<Equivalence> {
    let ts = TypeSpace::for_support(&d.support, DEFAULT_TYPE_CAP)?;
    let psi = psi_table(d, 2, PsiCaps::default())?;
    let sys = build_full_system(d, spec, &ts, caps.then_some(&psi))?;
    let lp = solve_feasibility(&sys)?.is_feasible();
    let net = build_network(d, spec, &psi, caps)?;
    let one = Rational::one();
    let flow = max_flow(&net).value == one;
    let cut = min_cut(&net).capacity == one;
    let rel = BinaryRelation::from_forbidden(&ts, &spec.forbidden(&d.support, &ts)?);
    let p1 = enumerate_part1(d, &rel, FosdCaps::default())?;
    let p2 = if caps { enumerate_part2(d, &rel, &psi, FosdCaps::default())? } else { Vec::new() };
    let case = classify(&p1, &p2)?.case;
    Ok(Equivalence { lp, flow, cut, fosd: case == Case::Case1, case })
}

pub fn equivalence_suite(seed: u64, trials: usize, max_l: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = SuiteResult::new("lp = flow = cut = inequalities");
    for t in 0..trials {
        let l = rng.gen_range(1..=max_l);
        let bins = rng.gen_range(1..=5);
        let spec = random_restriction(&mut rng, l);
        let d = if rng.gen_bool(0.5) {
            random_binary_law(&mut rng, l, bins)
        } else {
            // Near-valid laws: simulated populations, sometimes with one outcome flipped.
            match random_valid_dgp::<Rational>(rng.gen(), l, 2, bins, &spec, DEFAULT_TYPE_CAP) {
                Ok(mut g) => {
                    if rng.gen_bool(0.6) {
                        g = g.with_break(rng.gen_range(0..l), rng.gen_range(0..2), rng.gen_range(0..bins));
                    }
                    generate_observed(&g)?
                }
                Err(_) => random_binary_law(&mut rng, l, bins),
            }
        };
        let caps = rng.gen_bool(0.5);
        let e = equivalence(&d, &spec, caps)?;
        res.record(e.agree(), || format!("trial {t}: L={l} bins={bins} caps={caps} ruled out {:?}: {e:?}", spec.ruled_out));
    }
    Ok(res)
}

/// Valid populations must always pass the system built from their own law.
pub fn soundness_suite(seed: u64, trials: usize, max_l: usize, max_k: usize) -> Result<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = SuiteResult::new("soundness over valid populations");
    for t in 0..trials {
        let l = rng.gen_range(1..=max_l);
        let k = rng.gen_range(2..=max_k);
        let bins = rng.gen_range(1..=4);
        let spec = match rng.gen_range(0..4) {
            0 => RestrictionSpec::default(),
            1 => RestrictionSpec::preset(Preset::OrderedMonotone),
            2 if l == 2 => RestrictionSpec::preset(Preset::NoDefiers),
            _ => {
                let ts = TypeSpace::new(l, k, DEFAULT_TYPE_CAP)?;
                let n = ts.len();
                RestrictionSpec::ruled_out((0..n).filter(|_| rng.gen_bool(0.3)).map(|j| ts.vector(j)).take(n - 1).collect::<Vec<_>>())
            }
        };
        let g = match random_valid_dgp::<Rational>(rng.gen(), l, k, bins, &spec, DEFAULT_TYPE_CAP) {
            Ok(g) => g,
            Err(e) => {
                res.record(false, || format!("trial {t}: generator failed: {e}"));
                continue;
            }
        };
        let d = generate_observed(&g)?;
        let ts = TypeSpace::for_support(&d.support, DEFAULT_TYPE_CAP)?;
        let psi = psi_table(&d, k, PsiCaps::default())?;
        let ok = solve_feasibility(&build_full_system(&d, &spec, &ts, Some(&psi))?)?.is_feasible();
        res.record(ok, || format!("trial {t}: L={l} K={k} population {:?}", g.type_table));
    }
    Ok(res)
}

fn small_int(rng: &mut ChaCha8Rng) -> Rational {
    Rational::from_int(rng.gen_range(-3..=3))
}

/// Random system over the simplex, planted at a grid point half of the time.
pub fn random_small_system(rng: &mut ChaCha8Rng, n: usize, res: u32) -> LinearSystem<Rational> {
    let planted: Option<Vec<Rational>> = rng.gen_bool(0.5).then(|| {
        let mut v = vec![0i64; n];
        for _ in 0..res {
            v[rng.gen_range(0..n)] += 1;
        }
        v.into_iter().map(|c| Rational::from_ratio(c, res as i64)).collect()
    });
    let mut rows = vec![Row::new(vec![Rational::one(); n], Rational::one(), Sense::Eq, RowKind::Consistency, "adding-up".into())];
    let n_eq = rng.gen_range(0..=2);
    let n_le = rng.gen_range(0..=4);
    for i in 0..n_eq + n_le {
        let coeffs: Vec<Rational> = (0..n).map(|_| small_int(rng)).collect();
        let sense = if i < n_eq { Sense::Eq } else { Sense::Le };
        let rhs = match &planted {
            Some(p) => {
                let at = coeffs.iter().zip(p).fold(Rational::zero(), |a, (c, v)| a + c * v);
                if sense == Sense::Le {
                    at + Rational::from_ratio(rng.gen_range(0..3), 4)
                } else {
                    at
                }
            }
            None => Rational::from_ratio(rng.gen_range(-4..=4), rng.gen_range(1..=4)),
        };
        let kind = if sense == Sense::Eq { RowKind::Consistency } else { RowKind::Restriction };
        rows.push(Row::new(coeffs, rhs, sense, kind, format!("r{i}")));
    }
    LinearSystem::new(n, rows).expect("well-formed")
}

pub fn oracle_suite(seed: u64, trials: usize, max_vars: usize) -> Result<(SuiteResult, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut res = SuiteResult::new("solver = brute force");
    let mut indefinite = 0;
    for t in 0..trials {
        let n = rng.gen_range(1..=max_vars);
        let resolution = if n <= 5 { 12 } else { 8 };
        let sys = if t % 3 == 2 && max_vars >= 4 {
            // Real IV systems on 2 or 3 treatments.
            let l = if max_vars >= 9 && rng.gen_bool(0.5) { 3 } else { 2 };
            let bins = rng.gen_range(1..=3);
            let d = random_binary_law(&mut rng, l, bins);
            let ts = TypeSpace::for_support(&d.support, DEFAULT_TYPE_CAP)?;
            let spec = random_restriction(&mut rng, l);
            let psi = psi_table(&d, 2, PsiCaps::default())?;
            build_full_system(&d, &spec, &ts, rng.gen_bool(0.5).then_some(&psi))?
        } else {
            random_small_system(&mut rng, n, resolution)
        };
        let lp = solve_feasibility(&sys)?.is_feasible();
        match brute_force_oracle(&sys, resolution)?.definite() {
            Some(o) => res.record(o == lp, || format!("trial {t}: {} vars, solver {lp}, oracle {o}", sys.n_vars)),
            None => indefinite += 1,
        }
    }
    Ok((res, indefinite))
}

/// Hand-built instances with known answers.
pub fn curated_bank() -> Vec<(&'static str, ObservedDistribution<Rational>, RestrictionSpec<Rational>, Case)> {
    let q = Rational::from_ratio;
    let binary = |phi0: [[i64; 2]; 2], phi1: [[i64; 2]; 2], den: i64| {
        let s = Support::simple(&["y0", "y1"], &["x0", "x1"], &["z0", "z1"], true).expect("static");
        let m = |p: [[i64; 2]; 2]| p.iter().map(|r| r.iter().map(|&v| q(v, den)).collect()).collect();
        ObservedDistribution::from_subdensity(s, vec![m(phi0), m(phi1)], None).expect("static")
    };
    let example = generate_observed(&appendix_b_dgp::<Rational>()).expect("static");
    let broken = generate_observed(&appendix_b_break_dgp::<Rational>()).expect("static");
    vec![
        ("worked example ordered-monotone", example.clone(), RestrictionSpec::preset(Preset::OrderedMonotone), Case::Case1),
        ("worked example unrestricted", example.clone(), RestrictionSpec::default(), Case::Case1),
        (
            "worked example binarized no-defiers",
            example.binarize("x2").expect("static"),
            RestrictionSpec::preset(Preset::NoDefiers),
            Case::Case2,
        ),
        ("worked example break ordered-monotone", broken, RestrictionSpec::preset(Preset::OrderedMonotone), Case::Case2),
        // Take-up falls with the instrument: defiers are required.
        ("defiers needed", binary([[1, 2], [4, 3]], [[3, 4], [1, 2]], 10), RestrictionSpec::preset(Preset::NoDefiers), Case::Case3),
        // Nobody switches, yet outcomes move with the instrument.
        ("exclusion only", binary([[4, 0], [0, 0]], [[0, 4], [0, 0]], 4), RestrictionSpec::default(), Case::Case2),
        ("identical rows", binary([[1, 2], [3, 4]], [[1, 2], [3, 4]], 10), RestrictionSpec::ruled_out([vec![0, 1], vec![1, 0]]), Case::Case1),
    ]
}

pub fn bank_suite() -> Result<SuiteResult> {
    let mut res = SuiteResult::new("curated bank");
    for (name, d, spec, want) in curated_bank() {
        let e = equivalence(&d, &spec, true)?;
        res.record(e.agree() && e.case == want, || format!("{name}: expected {want:?}, got {e:?}"));
    }
    Ok(res)
}

/// All suites at `trials` draws each (the oracle suite at a fifth of that).
pub fn run_selfcheck(seed: u64, trials: usize) -> Result<SelfcheckReport> {
    let mut warnings = Vec::new();
    let mut suites = Vec::new();
    if trials == 0 {
        warnings.push("zero trials requested: random suites skipped".to_string());
    } else {
        suites.push(equivalence_suite(seed, trials, 3)?);
        suites.push(soundness_suite(seed ^ 1, trials, 3, 3)?);
        let (o, indefinite) = oracle_suite(seed ^ 2, trials.div_ceil(5), 6)?;
        if indefinite > 0 {
            warnings.push(format!("{indefinite} oracle draws were indefinite and skipped"));
        }
        suites.push(o);
        suites.push(bank_suite()?);
    }
    Ok(SelfcheckReport { seed, trials, suites, warnings })
}
