//! Generalized first-order stochastic dominance for binary instruments.
//!
//! With a relation `R` of ruled-out switches, units taking a treatment in `S`
//! at `z0` can only move to treatments outside the common lower contour of
//! `S` at `z1`. The part-2 family sharpens this with the overlap masses `Ψ`,
//! which bound how many units stay put.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::obs::ObservedDistribution;
use crate::psi::PsiTable;
use crate::scalar::{sum, Scalar};
use crate::subset::Subset;
use crate::typespace::{RestrictionSpec, TypeSpace};

/// Pairs `(a, b)`: the switch `a` at `z0` → `b` at `z1` is ruled out.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BinaryRelation {
    pub n: usize,
    pub pairs: BTreeSet<(usize, usize)>,
}

impl BinaryRelation {
    pub fn empty(n: usize) -> Self {
        BinaryRelation { n, pairs: BTreeSet::new() }
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, usize)>) -> Self {
        let pairs: BTreeSet<_> = pairs.into_iter().collect();
        assert!(pairs.iter().all(|&(a, b)| a < n && b < n), "pair outside 0..{n}");
        BinaryRelation { n, pairs }
    }

    /// Decodes a relation from the `n²`-bit mask `bits`, pair `(a, b)` at bit `a·n + b`.
    pub fn from_bits(n: usize, bits: u64) -> Self {
        Self::from_pairs(n, (0..n * n).filter(|i| bits >> i & 1 == 1).map(|i| (i / n, i % n)))
    }

    /// Ruled-out types of a binary-instrument type space read as switches.
    pub fn from_forbidden(ts: &TypeSpace, forbidden: &BTreeSet<usize>) -> Self {
        assert_eq!(ts.k, 2, "switch relations describe binary instruments");
        Self::from_pairs(ts.l, forbidden.iter().map(|&j| (ts.digit(j, 0), ts.digit(j, 1))))
    }

    pub fn from_restriction<T: Scalar>(spec: &RestrictionSpec<T>, d: &ObservedDistribution<T>, ts: &TypeSpace) -> Result<Self> {
        if ts.k != 2 {
            return Err(Error::NeedsBinaryInstrument(ts.k));
        }
        Ok(Self::from_forbidden(ts, &spec.forbidden(&d.support, ts)?))
    }

    pub fn insert(&mut self, a: usize, b: usize) {
        self.pairs.insert((a, b));
    }

    pub fn contains(&self, a: usize, b: usize) -> bool {
        self.pairs.contains(&(a, b))
    }

    pub fn irreflexive(&self) -> Self {
        Self::from_pairs(self.n, self.pairs.iter().copied().filter(|(a, b)| a != b))
    }

    pub fn reflexive(&self) -> Self {
        Self::from_pairs(self.n, self.pairs.iter().copied().filter(|(a, b)| a == b))
    }

    pub fn is_subset_of(&self, other: &BinaryRelation) -> bool {
        self.pairs.is_subset(&other.pairs)
    }

    /// `{x : (s, x) ∈ R for every s ∈ S}`; all of `X` when `S` is empty.
    pub fn lower_contour(&self, s: Subset) -> Subset {
        Subset::from_indices((0..self.n).filter(|&x| s.iter().all(|a| self.contains(a, x))))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Part {
    Part1,
    Part2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct InequalityRecord<T> {
    pub kind: Part,
    pub s: Subset,
    pub lambda: Subset,
    pub lambda_prime: Option<Subset>,
    /// `P[X ∈ S | z0]`
    pub lhs: T,
    pub rhs: T,
    pub slack: T,
    pub violated: bool,
}

impl<T: Scalar> InequalityRecord<T> {
    fn new(kind: Part, s: Subset, lambda: Subset, lambda_prime: Option<Subset>, lhs: T, rhs: T) -> Self {
        let slack = rhs.clone() - lhs.clone();
        let violated = slack.is_negative();
        InequalityRecord { kind, s, lambda, lambda_prime, lhs, rhs, slack, violated }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FosdCaps {
    pub part1_max_treatments: usize,
    pub part2_max_treatments: usize,
}

impl Default for FosdCaps {
    fn default() -> Self {
        FosdCaps { part1_max_treatments: 12, part2_max_treatments: 8 }
    }
}

fn check<T: Scalar>(d: &ObservedDistribution<T>, rel: &BinaryRelation, cap: usize) -> Result<()> {
    if d.k() != 2 {
        return Err(Error::NeedsBinaryInstrument(d.k()));
    }
    if rel.n != d.l() {
        return Err(Error::Dimension(format!("relation over {} treatments, law over {}", rel.n, d.l())));
    }
    if d.l() > cap {
        return Err(Error::CapExceeded { what: "treatments for inequality enumeration", size: d.l(), cap });
    }
    Ok(())
}

/// `P[X ∈ S | z0] ≤ P[X ∈ L(S)ᶜ | z1]` for every nonempty `S`.
pub fn enumerate_part1<T: Scalar>(d: &ObservedDistribution<T>, rel: &BinaryRelation, caps: FosdCaps) -> Result<Vec<InequalityRecord<T>>> {
    check(d, rel, caps.part1_max_treatments)?;
    let l = d.l();
    Ok(Subset::all(l)
        .skip(1)
        .map(|s| {
            let lambda = rel.lower_contour(s).complement(l);
            InequalityRecord::new(Part::Part1, s, lambda, None, d.prob_in(0, s), d.prob_in(1, lambda))
        })
        .collect())
}

/// Partitions `(Λ, Λ′)` of `L(S)ᶜ` satisfying the three admissibility conditions.
pub fn part2_partitions(rel: &BinaryRelation, s: Subset) -> Vec<(Subset, Subset)> {
    let l = rel.n;
    let c = rel.lower_contour(s).complement(l);
    let mut out = Vec::new();
    for lp in c.intersect(s).subsets().skip(1) {
        let lambda = c.minus(lp);
        let cond_ii = lp
            .iter()
            .all(|x| rel.lower_contour(Subset::singleton(x)).complement(l).minus(Subset::singleton(x)).is_subset_of(lambda));
        let cond_iii = rel.lower_contour(s.minus(lp)).complement(l).is_subset_of(lambda);
        if cond_ii && cond_iii {
            out.push((lambda, lp));
        }
    }
    out
}

/// `P[X ∈ S | z0] ≤ P[X ∈ Λ | z1] + Σ_{x ∈ Λ′} Ψ_x` over admissible partitions.
pub fn enumerate_part2<T: Scalar>(
    d: &ObservedDistribution<T>,
    rel: &BinaryRelation,
    psi: &PsiTable<T>,
    caps: FosdCaps,
) -> Result<Vec<InequalityRecord<T>>> {
    check(d, rel, caps.part2_max_treatments)?;
    let both = Subset::full(2);
    let mut out = Vec::new();
    for s in Subset::all(d.l()).skip(1) {
        let lhs = d.prob_in(0, s);
        for (lambda, lp) in part2_partitions(rel, s) {
            let overlap = lp.iter().map(|x| psi.mass(x, both).cloned()).collect::<Result<Vec<T>>>()?;
            let rhs = d.prob_in(1, lambda) + sum(&overlap);
            out.push(InequalityRecord::new(Part::Part2, s, lambda, Some(lp), lhs.clone(), rhs));
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Case {
    /// No enumerated inequality is violated.
    Case1,
    /// Only overlap-sharpened inequalities fail: the exclusion restriction is implicated jointly.
    Case2,
    /// Some switch-only inequality fails: the response-type restriction is refuted on its own.
    Case3,
}

impl Case {
    pub fn number(self) -> u8 {
        match self {
            Case::Case1 => 1,
            Case::Case2 => 2,
            Case::Case3 => 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classification {
    pub case: Case,
    /// Sets `S` of violated part-1 records.
    pub part1_sets: Vec<Subset>,
    /// Sets `S` of violated part-2 records.
    pub part2_sets: Vec<Subset>,
}

pub fn classify<T: Scalar>(part1: &[InequalityRecord<T>], part2: &[InequalityRecord<T>]) -> Result<Classification> {
    if part1.iter().any(|r| r.kind != Part::Part1) || part2.iter().any(|r| r.kind != Part::Part2) {
        return Err(Error::Input("record lists are mixed up".into()));
    }
    let sets = |rs: &[InequalityRecord<T>]| {
        let v: BTreeSet<Subset> = rs.iter().filter(|r| r.violated).map(|r| r.s).collect();
        v.into_iter().collect::<Vec<_>>()
    };
    let part1_sets = sets(part1);
    let part2_sets = sets(part2);
    let case = if !part1_sets.is_empty() {
        Case::Case3
    } else if !part2_sets.is_empty() {
        Case::Case2
    } else {
        Case::Case1
    };
    Ok(Classification { case, part1_sets, part2_sets })
}

/// `P[X ≥ x_l | z0] ≤ Ψ_{x_l} + P[X > x_l | z1]` for each treatment, in order.
pub fn corollary1_report<T: Scalar>(d: &ObservedDistribution<T>, psi: &PsiTable<T>) -> Result<Vec<InequalityRecord<T>>> {
    if d.k() != 2 {
        return Err(Error::NeedsBinaryInstrument(d.k()));
    }
    let ranks = d.support.ranks().ok_or(Error::NoOrder)?;
    let order = d.support.treatment_order.clone().ok_or(Error::NoOrder)?;
    let l = d.l();
    order
        .iter()
        .map(|&x| {
            let s = Subset::from_indices((0..l).filter(|&y| ranks[y] >= ranks[x]));
            let lambda = s.minus(Subset::singleton(x));
            let rhs = psi.mass(x, Subset::full(2))?.clone() + d.prob_in(1, lambda);
            Ok(InequalityRecord::new(Part::Part2, s, lambda, Some(Subset::singleton(x)), d.prob_in(0, s), rhs))
        })
        .collect()
}

/// Drops records repeating an earlier `(kind, S, lhs, rhs)`.
pub fn dedup_records<T: Scalar>(records: &[InequalityRecord<T>]) -> Vec<InequalityRecord<T>> {
    let mut seen = BTreeSet::new();
    records.iter().filter(|r| seen.insert((r.kind, r.s, r.lhs.clone(), r.rhs.clone()))).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::Support;
    use crate::psi::{psi_table, PsiCaps};
    use num_rational::BigRational as Q;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn ordered(l: usize) -> BinaryRelation {
        BinaryRelation::from_pairs(l, (0..l).flat_map(|a| (0..a).map(move |b| (a, b))))
    }

    fn example() -> ObservedDistribution<Q> {
        let s = Support::simple(&["y0", "y1"], &["x0", "x1", "x2"], &["z0", "z1"], true).unwrap();
        let phi = vec![
            vec![vec![q(1, 2), q(0, 1)], vec![q(0, 1), q(1, 4)], vec![q(0, 1), q(1, 4)]],
            vec![vec![q(0, 1), q(0, 1)], vec![q(0, 1), q(1, 2)], vec![q(0, 1), q(1, 2)]],
        ];
        ObservedDistribution::from_subdensity(s, phi, None).unwrap()
    }

    #[test]
    fn contours() {
        let rel = ordered(3);
        assert_eq!(rel.lower_contour(Subset::from_indices([1, 2])), Subset::singleton(0));
        assert_eq!(BinaryRelation::empty(3).lower_contour(Subset::singleton(1)), Subset::EMPTY);
        assert_eq!(rel.lower_contour(Subset::EMPTY), Subset::full(3));
    }

    #[test]
    fn split_views() {
        let rel = BinaryRelation::from_pairs(2, [(0, 0), (1, 0)]);
        assert_eq!(rel.irreflexive(), BinaryRelation::from_pairs(2, [(1, 0)]));
        assert_eq!(rel.reflexive(), BinaryRelation::from_pairs(2, [(0, 0)]));
        assert_eq!(BinaryRelation::from_bits(2, 0b0100), BinaryRelation::from_pairs(2, [(1, 0)]));
    }

    #[test]
    fn part1_records() {
        let d = example();
        let caps = FosdCaps::default();
        let recs = enumerate_part1(&d, &ordered(3), caps).unwrap();
        assert_eq!(recs.len(), 7);
        let r = recs.iter().find(|r| r.s == Subset::from_indices([1, 2])).unwrap();
        assert_eq!((r.lhs.clone(), r.rhs.clone()), (q(1, 2), q(1, 1)));
        assert!(!r.violated);
        for r in enumerate_part1(&d, &BinaryRelation::empty(3), caps).unwrap() {
            assert_eq!(r.rhs, q(1, 1));
        }
    }

    #[test]
    fn part2_example_record() {
        let d = example();
        let psi = psi_table(&d, 2, PsiCaps::default()).unwrap();
        let recs = enumerate_part2(&d, &ordered(3), &psi, FosdCaps::default()).unwrap();
        let r = recs
            .iter()
            .find(|r| r.s == Subset::from_indices([1, 2]) && r.lambda_prime == Some(Subset::singleton(1)))
            .unwrap();
        assert_eq!(r.lambda, Subset::singleton(2));
        assert_eq!((r.lhs.clone(), r.rhs.clone()), (q(1, 2), q(3, 4)));
        assert!(recs.iter().all(|r| !r.violated));
    }

    #[test]
    fn empty_relation_part2_is_one_record_per_treatment() {
        for l in 2..=4 {
            let rel = BinaryRelation::empty(l);
            let mut found = Vec::new();
            for s in Subset::all(l).skip(1) {
                for (lambda, lp) in part2_partitions(&rel, s) {
                    found.push((s, lambda, lp));
                }
            }
            let expect: Vec<_> = (0..l)
                .map(|x| (Subset::singleton(x), Subset::full(l).minus(Subset::singleton(x)), Subset::singleton(x)))
                .collect();
            found.sort();
            let mut expect = expect;
            expect.sort();
            assert_eq!(found, expect);
        }
    }

    #[test]
    fn classification_cases() {
        let d = example();
        let psi = psi_table(&d, 2, PsiCaps::default()).unwrap();
        let rel = ordered(3);
        let p1 = enumerate_part1(&d, &rel, FosdCaps::default()).unwrap();
        let p2 = enumerate_part2(&d, &rel, &psi, FosdCaps::default()).unwrap();
        assert_eq!(classify(&p1, &p2).unwrap().case, Case::Case1);
        assert!(classify(&p2, &p1).is_err());

        let b = d.binarize("x2").unwrap();
        let psi = psi_table(&b, 2, PsiCaps::default()).unwrap();
        let nd = ordered(2);
        let p1 = enumerate_part1(&b, &nd, FosdCaps::default()).unwrap();
        let p2 = enumerate_part2(&b, &nd, &psi, FosdCaps::default()).unwrap();
        let both = p1.iter().find(|r| r.s == Subset::full(2)).unwrap();
        assert_eq!((both.lhs.clone(), both.rhs.clone()), (q(1, 1), q(1, 1)));
        let top = p1.iter().find(|r| r.s == Subset::singleton(1)).unwrap();
        assert_eq!((top.lhs.clone(), top.rhs.clone()), (q(1, 4), q(1, 2)));
        let bad = p2
            .iter()
            .find(|r| r.s == Subset::full(2) && r.lambda_prime == Some(Subset::singleton(0)))
            .unwrap();
        assert_eq!(bad.rhs, q(3, 4));
        assert!(bad.violated);
        let c = classify(&p1, &p2).unwrap();
        assert_eq!(c.case, Case::Case2);
        assert!(c.part2_sets.contains(&Subset::full(2)));

        // P[x1|z0] > P[x1|z1] under no defiers.
        let s = Support::simple(&["y"], &["x0", "x1"], &["z0", "z1"], true).unwrap();
        let phi = vec![vec![vec![q(1, 4)], vec![q(3, 4)]], vec![vec![q(3, 4)], vec![q(1, 4)]]];
        let flip = ObservedDistribution::from_subdensity(s, phi, None).unwrap();
        let psi = psi_table(&flip, 2, PsiCaps::default()).unwrap();
        let p1 = enumerate_part1(&flip, &nd, FosdCaps::default()).unwrap();
        let p2 = enumerate_part2(&flip, &nd, &psi, FosdCaps::default()).unwrap();
        assert_eq!(classify(&p1, &p2).unwrap().case, Case::Case3);
    }

    #[test]
    fn ordered_bound_records() {
        let d = example();
        let psi = psi_table(&d, 2, PsiCaps::default()).unwrap();
        let recs = corollary1_report(&d, &psi).unwrap();
        assert_eq!((recs[1].lhs.clone(), recs[1].rhs.clone()), (q(1, 2), q(3, 4)));
        assert_eq!((recs[0].lhs.clone(), recs[0].rhs.clone()), (q(1, 1), q(1, 1)));
        assert_eq!(recs[2].lambda, Subset::EMPTY);
        assert_eq!((recs[2].lhs.clone(), recs[2].rhs.clone()), (q(1, 4), q(1, 4)));
        assert!(recs.iter().all(|r| !r.violated));

        let s = Support::simple(&["y"], &["a", "b"], &["z0", "z1"], false).unwrap();
        let un = ObservedDistribution::from_subdensity(s, vec![vec![vec![q(1, 2)], vec![q(1, 2)]]; 2], None).unwrap();
        let psi = psi_table(&un, 2, PsiCaps::default()).unwrap();
        assert_eq!(corollary1_report(&un, &psi), Err(Error::NoOrder));
    }

    #[test]
    fn caps_apply() {
        let d = example();
        let tiny = FosdCaps { part1_max_treatments: 2, part2_max_treatments: 2 };
        assert!(matches!(enumerate_part1(&d, &ordered(3), tiny), Err(Error::CapExceeded { .. })));
    }
}
