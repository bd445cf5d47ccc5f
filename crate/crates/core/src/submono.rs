//! Random-utility grounding of switch restrictions.
//!
//! A latent type holds a strict ranking at each of `z0` and `z1`; its
//! response type is the pair of top-ranked treatments. Submonotonicity
//! with respect to `R` forbids reversals `a ≻ b` at `z0`, `b ≻ a` at `z1`
//! for `(a, b) ∈ R`. The harness checks by enumeration that this is exactly
//! the restriction "types in `R` have probability zero": no weaker and no
//! stronger.

use std::collections::BTreeMap;

use num_traits::Zero;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fosd::BinaryRelation;
use crate::scalar::Scalar;
use crate::typespace::{TypeDistribution, TypeSpace};

pub const HARNESS_MAX_TREATMENTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PreferenceProfile {
    /// Best first.
    pub ranking: Vec<usize>,
}

impl PreferenceProfile {
    pub fn new(ranking: Vec<usize>) -> Result<Self> {
        let mut sorted = ranking.clone();
        sorted.sort_unstable();
        if sorted != (0..ranking.len()).collect::<Vec<_>>() || ranking.is_empty() {
            return Err(Error::Input(format!("{ranking:?} is not a permutation")));
        }
        Ok(PreferenceProfile { ranking })
    }

    pub fn best(&self) -> usize {
        self.ranking[0]
    }

    pub fn prefers(&self, a: usize, b: usize) -> bool {
        let pos = |x| self.ranking.iter().position(|&y| y == x);
        matches!((pos(a), pos(b)), (Some(i), Some(j)) if i < j)
    }

    /// `first`, then `second` (if distinct), then the rest by index.
    fn leading(l: usize, first: usize, second: usize) -> Self {
        let mut ranking = vec![first];
        if second != first {
            ranking.push(second);
        }
        ranking.extend((0..l).filter(|&x| x != first && x != second));
        PreferenceProfile { ranking }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct LatentPreferenceType {
    pub at_z0: PreferenceProfile,
    pub at_z1: PreferenceProfile,
}

impl LatentPreferenceType {
    /// z0 ranks `a, b, …`, z1 ranks `b, a, …`: a unit of response type `(a, b)`
    /// whose only reversal is the pair `(a, b)`. With `a = b` both profiles coincide.
    pub fn witness(l: usize, a: usize, b: usize) -> Self {
        LatentPreferenceType { at_z0: PreferenceProfile::leading(l, a, b), at_z1: PreferenceProfile::leading(l, b, a) }
    }

    pub fn response(&self) -> (usize, usize) {
        (self.at_z0.best(), self.at_z1.best())
    }

    pub fn reverses(&self, a: usize, b: usize) -> bool {
        self.at_z0.prefers(a, b) && self.at_z1.prefers(b, a)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatentDistribution<T> {
    pub l: usize,
    pub weights: BTreeMap<LatentPreferenceType, T>,
}

impl<T: Scalar> LatentDistribution<T> {
    pub fn new(l: usize, weights: BTreeMap<LatentPreferenceType, T>) -> Result<Self> {
        let total = weights.values().fold(T::zero(), |a, w| a + w.clone());
        if weights.values().any(|w| w.is_negative()) || !total.is_one() {
            return Err(Error::Input("latent weights must be nonnegative and sum to one".into()));
        }
        if weights.keys().any(|t| t.at_z0.ranking.len() != l || t.at_z1.ranking.len() != l) {
            return Err(Error::Dimension(format!("latent types must rank {l} treatments")));
        }
        Ok(LatentDistribution { l, weights })
    }

    pub fn point(l: usize, t: LatentPreferenceType) -> Self {
        LatentDistribution { l, weights: BTreeMap::from([(t, T::one())]) }
    }

    pub fn support(&self) -> impl Iterator<Item = &LatentPreferenceType> {
        self.weights.iter().filter(|(_, w)| !w.is_zero()).map(|(t, _)| t)
    }

    /// No positive weight on a type reversing a pair of `rel`.
    pub fn is_submonotone(&self, rel: &BinaryRelation) -> bool {
        self.support().all(|t| !reversal_violates(t, rel))
    }
}

pub fn reversal_violates(t: &LatentPreferenceType, rel: &BinaryRelation) -> bool {
    rel.irreflexive().pairs.iter().any(|&(a, b)| t.reverses(a, b))
}

pub fn split_relation(rel: &BinaryRelation) -> (BinaryRelation, BinaryRelation) {
    (rel.irreflexive(), rel.reflexive())
}

/// `p_h(a, b)`: weight of latent types whose top choices are `a` at `z0`, `b` at `z1`.
pub fn induced_type_distribution<T: Scalar>(h: &LatentDistribution<T>) -> TypeDistribution<T> {
    let ts = TypeSpace::new(h.l, 2, usize::MAX).expect("L² types");
    let mut probs = vec![T::zero(); ts.len()];
    for (t, w) in &h.weights {
        let (a, b) = t.response();
        let j = a * h.l + b;
        probs[j] = probs[j].clone() + w.clone();
    }
    TypeDistribution { probs }
}

/// Puts `p(a, b)` on the witness latent type of `(a, b)`.
pub fn latent_from_types<T: Scalar>(l: usize, p: &TypeDistribution<T>) -> LatentDistribution<T> {
    let mut weights = BTreeMap::new();
    for (j, w) in p.probs.iter().enumerate() {
        if !w.is_zero() {
            weights.insert(LatentPreferenceType::witness(l, j / l, j % l), w.clone());
        }
    }
    LatentDistribution { l, weights }
}

pub fn all_profiles(l: usize) -> Vec<PreferenceProfile> {
    fn rec(cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<PreferenceProfile>) {
        if cur.len() == used.len() {
            out.push(PreferenceProfile { ranking: cur.clone() });
            return;
        }
        for x in 0..used.len() {
            if !used[x] {
                used[x] = true;
                cur.push(x);
                rec(cur, used, out);
                cur.pop();
                used[x] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(l), &mut vec![false; l], &mut out);
    out
}

pub fn all_latent_types(l: usize) -> Vec<LatentPreferenceType> {
    let profiles = all_profiles(l);
    profiles
        .iter()
        .flat_map(|a| profiles.iter().map(move |b| LatentPreferenceType { at_z0: a.clone(), at_z1: b.clone() }))
        .collect()
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct HarnessReport {
    pub l: usize,
    pub relations: usize,
    /// Checks performed for each of the six parts.
    pub checks: [usize; 6],
    pub minimality_checks: usize,
    pub failures: Vec<String>,
}

impl HarnessReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn require(&mut self, part: usize, ok: bool, what: impl FnOnce() -> String) {
        self.checks[part - 1] += 1;
        if !ok && self.failures.len() < 32 {
            self.failures.push(format!("part {part}: {}", what()));
        }
    }
}

/// Exhaustive over every relation for `L ≤ 3`; 50 seeded relations for `L = 4`.
pub fn lemma_harness(l: usize) -> Result<HarnessReport> {
    if l == 0 || l > HARNESS_MAX_TREATMENTS {
        return Err(Error::CapExceeded { what: "harness treatments", size: l, cap: HARNESS_MAX_TREATMENTS });
    }
    if l <= 3 {
        let rels: Vec<_> = (0..1u64 << (l * l)).map(|bits| BinaryRelation::from_bits(l, bits)).collect();
        lemma_harness_on(l, &rels, true, 0)
    } else {
        lemma_harness_sampled(l, 50, 0x5eed)
    }
}

pub fn lemma_harness_sampled(l: usize, count: usize, seed: u64) -> Result<HarnessReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rels: Vec<_> = (0..count).map(|_| BinaryRelation::from_bits(l, rng.gen::<u64>() & ((1u64 << (l * l)) - 1))).collect();
    lemma_harness_on(l, &rels, false, seed)
}

/// Runs all six parts plus minimality on the given relations. With
/// `all_subsets`, minimality is checked against every proper subset of each
/// relation; otherwise only against the maximal ones.
pub fn lemma_harness_on(l: usize, relations: &[BinaryRelation], all_subsets: bool, seed: u64) -> Result<HarnessReport> {
    if l == 0 || l > HARNESS_MAX_TREATMENTS {
        return Err(Error::CapExceeded { what: "harness treatments", size: l, cap: HARNESS_MAX_TREATMENTS });
    }
    let latent = all_latent_types(l);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0b5e_55ed);
    let mut rep = HarnessReport { l, relations: relations.len(), ..Default::default() };
    for rel in relations {
        if rel.n != l {
            return Err(Error::Dimension(format!("relation over {} treatments", rel.n)));
        }
        check_relation(l, rel, &latent, &mut rng, &mut rep);
        check_minimality(l, rel, all_subsets, &mut rep);
    }
    Ok(rep)
}

fn check_relation(l: usize, rel: &BinaryRelation, latent: &[LatentPreferenceType], rng: &mut ChaCha8Rng, rep: &mut HarnessReport) {
    let (irr, refl) = split_relation(rel);
    let allowed = |a: usize, b: usize| !rel.contains(a, b);

    // 1. Reflexive pairs never matter for reversals.
    for t in latent {
        let raw = rel.pairs.iter().any(|&(a, b)| t.reverses(a, b));
        rep.require(1, raw == reversal_violates(t, &irr), || format!("{rel:?} at {t:?}"));
    }

    for a in 0..l {
        for b in 0..l {
            let w = LatentPreferenceType::witness(l, a, b);
            let h = LatentDistribution::<num_rational::BigRational>::point(l, w.clone());
            let p_h = induced_type_distribution(&h);
            let on_ab = !p_h.probs[a * l + b].is_zero();
            if a != b && !rel.contains(a, b) {
                // 2. Pairs outside R: R-submonotone, allowed p_h, yet the pair is reversed.
                let ok = h.is_submonotone(rel) && allowed(a, b) && on_ab && w.reverses(a, b);
                rep.require(2, ok, || format!("{rel:?}, pair ({a},{b})"));
            } else if a != b {
                // 3. Pairs in R: submonotone for everything else, yet p_h hits the forbidden type.
                let mut rest = BinaryRelation::from_pairs(l, (0..l).flat_map(|x| (0..l).map(move |y| (x, y))));
                rest.pairs.remove(&(a, b));
                rep.require(3, h.is_submonotone(&rest) && on_ab, || format!("{rel:?}, pair ({a},{b})"));
            } else if refl.contains(a, a) {
                // 4. Reflexive pairs: no reversal rules out (a, a); only the auxiliary condition does.
                let full = BinaryRelation::from_pairs(l, (0..l).flat_map(|x| (0..l).map(move |y| (x, y))));
                rep.require(4, h.is_submonotone(&full) && on_ab, || format!("{rel:?}, reflexive ({a},{a})"));
            }
        }
    }

    // 5. Non-reversing latent types induce allowed response types, up to forbidden constants.
    for t in latent {
        let (a, b) = t.response();
        if reversal_violates(t, rel) || (a == b && refl.contains(a, a)) {
            continue;
        }
        rep.require(5, allowed(a, b), || format!("{rel:?} at {t:?}"));
    }

    // 6. Every allowed type distribution is induced by an R-submonotone h.
    let ts = TypeSpace::new(l, 2, usize::MAX).expect("L² types");
    let allowed_types: Vec<usize> = (0..ts.len()).filter(|&j| allowed(j / l, j % l)).collect();
    for &j in &allowed_types {
        let mut probs = vec![num_rational::BigRational::from_int(0); ts.len()];
        probs[j] = num_rational::BigRational::from_int(1);
        round_trip(l, rel, TypeDistribution { probs }, rep);
    }
    if !allowed_types.is_empty() {
        let raw: Vec<i64> = allowed_types.iter().map(|_| rng.gen_range(0..6)).collect();
        let total: i64 = raw.iter().sum::<i64>().max(1);
        let mut probs = vec![num_rational::BigRational::from_int(0); ts.len()];
        for (&j, &r) in allowed_types.iter().zip(&raw) {
            probs[j] = num_rational::BigRational::from_ratio(r, total);
        }
        if raw.iter().all(|&r| r == 0) {
            let j = *allowed_types.choose(rng).expect("nonempty");
            probs[j] = num_rational::BigRational::from_int(1);
        }
        round_trip(l, rel, TypeDistribution { probs }, rep);
    }
}

fn round_trip<T: Scalar>(l: usize, rel: &BinaryRelation, p: TypeDistribution<T>, rep: &mut HarnessReport) {
    let h = latent_from_types(l, &p);
    let refl_ok = h.support().all(|t| {
        let (a, b) = t.response();
        !(a == b && rel.contains(a, a))
    });
    let ok = induced_type_distribution(&h) == p && h.is_submonotone(rel) && refl_ok;
    rep.require(6, ok, || format!("{rel:?}, p = {:?}", p.probs));
}

/// Every proper subset `R′` of `R` admits a submonotone h with mass on `R \ R′`.
fn check_minimality(l: usize, rel: &BinaryRelation, all_subsets: bool, rep: &mut HarnessReport) {
    let pairs: Vec<(usize, usize)> = rel.pairs.iter().copied().collect();
    let n = pairs.len();
    let subsets: Vec<u64> = if all_subsets {
        (0..(1u64 << n).saturating_sub(1)).collect()
    } else {
        (0..n).map(|i| ((1u64 << n) - 1) & !(1u64 << i)).collect()
    };
    for mask in subsets {
        let sub = BinaryRelation::from_pairs(l, (0..n).filter(|i| mask >> i & 1 == 1).map(|i| pairs[i]));
        let exhibited = (0..n).filter(|i| mask >> i & 1 == 0).any(|i| {
            let (a, b) = pairs[i];
            let h = LatentDistribution::<num_rational::BigRational>::point(l, LatentPreferenceType::witness(l, a, b));
            let p_h = induced_type_distribution(&h);
            let no_forbidden_constant = !(a == b && sub.contains(a, a));
            h.is_submonotone(&sub) && no_forbidden_constant && !p_h.probs[a * l + b].is_zero()
        });
        rep.minimality_checks += 1;
        if !exhibited && rep.failures.len() < 32 {
            rep.failures.push(format!("minimality: {rel:?} vs {sub:?}"));
        }
    }
}
