//! Instrument-response types and the linear blocks built over them.
//!
//! A type is a vector `(t(z_0), …, t(z_{K-1}))` of treatment indices. Types
//! are enumerated lexicographically with `z_0` as the most significant digit.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::feasibility::{LinearSystem, Row, RowKind, Sense};
use crate::fosd::BinaryRelation;
use crate::obs::{ObservedDistribution, Support};
use crate::psi::PsiTable;
use crate::scalar::{is_probability, sum, Scalar};
use crate::subset::Subset;

pub const DEFAULT_TYPE_CAP: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TypeSpace {
    pub l: usize,
    pub k: usize,
    n: usize,
}

impl TypeSpace {
    pub fn new(l: usize, k: usize, cap: usize) -> Result<Self> {
        if l == 0 || k == 0 {
            return Err(Error::Dimension("type space needs L ≥ 1 and K ≥ 1".into()));
        }
        let n = (l as u64)
            .checked_pow(k as u32)
            .filter(|&n| n <= cap as u64)
            .ok_or(Error::CapExceeded { what: "type count", size: l.saturating_pow(k as u32), cap })?;
        Ok(TypeSpace { l, k, n: n as usize })
    }

    pub fn for_support<T: Scalar>(s: &Support<T>, cap: usize) -> Result<Self> {
        TypeSpace::new(s.l(), s.k(), cap)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Treatment taken at instrument `z_k` by type `j`.
    pub fn digit(&self, j: usize, k: usize) -> usize {
        let shift = self.l.pow((self.k - 1 - k) as u32);
        (j / shift) % self.l
    }

    pub fn vector(&self, j: usize) -> Vec<usize> {
        (0..self.k).map(|k| self.digit(j, k)).collect()
    }

    pub fn index(&self, v: &[usize]) -> Result<usize> {
        if v.len() != self.k || v.iter().any(|&d| d >= self.l) {
            return Err(Error::Dimension(format!("{v:?} is not a type over L={}, K={}", self.l, self.k)));
        }
        Ok(v.iter().fold(0, |acc, &d| acc * self.l + d))
    }

    pub fn is_constant(&self, j: usize) -> bool {
        let first = self.digit(j, 0);
        (1..self.k).all(|k| self.digit(j, k) == first)
    }

    pub fn label<T>(&self, j: usize, s: &Support<T>) -> String {
        let parts: Vec<&str> = self.vector(j).into_iter().map(|d| s.treatments[d].as_str()).collect();
        format!("({})", parts.join(","))
    }

    pub fn check_support<T: Scalar>(&self, s: &Support<T>) -> Result<()> {
        if s.l() != self.l || s.k() != self.k {
            return Err(Error::Dimension(format!(
                "type space is L={}, K={} but support is L={}, K={}",
                self.l,
                self.k,
                s.l(),
                s.k()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDistribution<T> {
    pub probs: Vec<T>,
}

impl<T: Scalar> TypeDistribution<T> {
    pub fn new(probs: Vec<T>) -> Result<Self> {
        if probs.iter().any(|p| !is_probability(p)) || !sum(&probs).is_one() {
            return Err(Error::Input("type probabilities must be nonnegative and sum to one".into()));
        }
        Ok(TypeDistribution { probs })
    }

    /// Independent coupling `p(t) = Π_k P[x_{t_k} | z_k]`.
    pub fn product_coupling(d: &ObservedDistribution<T>, ts: &TypeSpace) -> Self {
        let probs = (0..ts.len())
            .map(|j| (0..ts.k).fold(T::one(), |acc, k| acc * d.cond_treatment[k][ts.digit(j, k)].clone()))
            .collect();
        TypeDistribution { probs }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Preset {
    None,
    NoDefiers,
    OrderedMonotone,
    /// Units may only move from outside the promoted set into it.
    UnorderedMonotone { promoted: Subset },
    Custom,
}

impl Preset {
    pub const NAMES: [&'static str; 5] = ["none", "no-defiers", "ordered-monotone", "unordered-monotone", "custom"];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::None => "none",
            Preset::NoDefiers => "no-defiers",
            Preset::OrderedMonotone => "ordered-monotone",
            Preset::UnorderedMonotone { .. } => "unordered-monotone",
            Preset::Custom => "custom",
        }
    }

    pub fn describe(name: &str) -> &'static str {
        match name {
            "none" => "no response-type restriction",
            "no-defiers" => "binary treatment: nobody leaves the higher treatment when the instrument moves z0 -> z1",
            "ordered-monotone" => "declared treatment order: every type is weakly increasing across instrument values",
            "unordered-monotone" => "promoted set S: the only switches allowed go from outside S into S",
            "custom" => "only the explicitly listed ruled-out types and rows",
            _ => "unknown preset",
        }
    }

    /// Ruled-out switches `a → b` between two instrument values.
    pub fn switches<T: Scalar>(&self, s: &Support<T>) -> Result<BinaryRelation> {
        let l = s.l();
        let mut rel = BinaryRelation::empty(l);
        match self {
            Preset::None | Preset::Custom => {}
            Preset::NoDefiers => {
                if l != 2 {
                    return Err(Error::Input(format!("no-defiers needs exactly two treatments, found {l}")));
                }
                let rank = s.ranks().unwrap_or_else(|| vec![0, 1]);
                let (lo, hi) = if rank[0] < rank[1] { (0, 1) } else { (1, 0) };
                rel.insert(hi, lo);
            }
            Preset::OrderedMonotone => {
                let rank = s.ranks().ok_or(Error::NoOrder)?;
                for a in 0..l {
                    for b in 0..l {
                        if rank[a] > rank[b] {
                            rel.insert(a, b);
                        }
                    }
                }
            }
            Preset::UnorderedMonotone { promoted } => {
                if !promoted.is_subset_of(Subset::full(l)) {
                    return Err(Error::Input("promoted set names an unknown treatment".into()));
                }
                for a in 0..l {
                    for b in (0..l).filter(|&b| b != a) {
                        let (ia, ib) = (promoted.contains(a), promoted.contains(b));
                        if ia == ib || (ia && !ib) {
                            rel.insert(a, b);
                        }
                    }
                }
            }
        }
        Ok(rel)
    }
}

/// Types realizing a ruled-out switch between some pair of instrument values `z_k, z_{k'}`, `k < k'`.
pub fn forbidden_by_switches(rel: &BinaryRelation, ts: &TypeSpace) -> BTreeSet<usize> {
    (0..ts.len())
        .filter(|&j| {
            (0..ts.k).any(|k| ((k + 1)..ts.k).any(|k2| rel.contains(ts.digit(j, k), ts.digit(j, k2))))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExtraRow<T> {
    pub coeffs: Vec<T>,
    pub rhs: T,
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RestrictionSpec<T> {
    /// Forbidden type vectors.
    pub ruled_out: BTreeSet<Vec<usize>>,
    /// Appended verbatim as `coeffs · p ≤ rhs`.
    pub extra_rows: Vec<ExtraRow<T>>,
    pub preset: Option<Preset>,
}

impl<T: Scalar> Default for RestrictionSpec<T> {
    fn default() -> Self {
        RestrictionSpec { ruled_out: BTreeSet::new(), extra_rows: Vec::new(), preset: None }
    }
}

impl<T: Scalar> RestrictionSpec<T> {
    pub fn preset(p: Preset) -> Self {
        RestrictionSpec { preset: Some(p), ..Default::default() }
    }

    pub fn ruled_out(types: impl IntoIterator<Item = Vec<usize>>) -> Self {
        RestrictionSpec { ruled_out: types.into_iter().collect(), preset: Some(Preset::Custom), ..Default::default() }
    }

    /// Union of the preset's forbidden types and the explicit list, as type indices.
    pub fn forbidden(&self, s: &Support<T>, ts: &TypeSpace) -> Result<BTreeSet<usize>> {
        ts.check_support(s)?;
        let mut out = match &self.preset {
            Some(p) => forbidden_by_switches(&p.switches(s)?, ts),
            None => BTreeSet::new(),
        };
        for v in &self.ruled_out {
            out.insert(ts.index(v)?);
        }
        Ok(out)
    }

    /// Folds the preset into `ruled_out`; applying it again changes nothing.
    pub fn expanded(&self, s: &Support<T>, ts: &TypeSpace) -> Result<Self> {
        let ruled_out = self.forbidden(s, ts)?.into_iter().map(|j| ts.vector(j)).collect();
        Ok(RestrictionSpec { ruled_out, extra_rows: self.extra_rows.clone(), preset: self.preset.clone() })
    }

    pub fn validate(&self, s: &Support<T>, ts: &TypeSpace) -> Result<()> {
        self.forbidden(s, ts)?;
        for r in &self.extra_rows {
            if r.coeffs.len() != ts.len() {
                return Err(Error::Dimension(format!(
                    "row `{}` has {} coefficients, expected {}",
                    r.label,
                    r.coeffs.len(),
                    ts.len()
                )));
            }
        }
        Ok(())
    }

    /// `true` when every restriction is a per-type exclusion.
    pub fn is_per_type(&self) -> bool {
        self.extra_rows.is_empty()
    }
}

/// `p(x1,x0) − p(x0,x1) ≤ 0` for a binary treatment and instrument.
pub fn compliers_exceed_defiers_row<T: Scalar>(ts: &TypeSpace) -> Result<ExtraRow<T>> {
    if ts.l != 2 || ts.k != 2 {
        return Err(Error::Dimension("needs L = K = 2".into()));
    }
    let mut coeffs = vec![T::zero(); ts.len()];
    coeffs[ts.index(&[1, 0])?] = T::one();
    coeffs[ts.index(&[0, 1])?] = -T::one();
    Ok(ExtraRow { coeffs, rhs: T::zero(), label: "compliers-exceed-defiers".into() })
}

fn indicator<T: Scalar>(n: usize, pick: impl Fn(usize) -> bool) -> Vec<T> {
    (0..n).map(|j| if pick(j) { T::one() } else { T::zero() }).collect()
}

/// `K·L` rows `Σ_{j: t_k = x_l} p_j = P[x_l | z_k]` followed by `Σ p = 1`.
pub fn build_consistency_system<T: Scalar>(d: &ObservedDistribution<T>, ts: &TypeSpace) -> Result<Vec<Row<T>>> {
    ts.check_support(&d.support)?;
    let s = &d.support;
    let mut rows = Vec::with_capacity(ts.k * ts.l + 1);
    for k in 0..ts.k {
        for l in 0..ts.l {
            rows.push(Row::new(
                indicator(ts.len(), |j| ts.digit(j, k) == l),
                d.cond_treatment[k][l].clone(),
                Sense::Eq,
                RowKind::Consistency,
                format!("P[{}|{}]", s.treatments[l], s.instruments[k]),
            ));
        }
    }
    rows.push(Row::new(vec![T::one(); ts.len()], T::one(), Sense::Eq, RowKind::Consistency, "adding-up".into()));
    Ok(rows)
}

pub fn build_restriction_rows<T: Scalar>(spec: &RestrictionSpec<T>, s: &Support<T>, ts: &TypeSpace) -> Result<Vec<Row<T>>> {
    spec.validate(s, ts)?;
    let mut rows = Vec::new();
    for j in spec.forbidden(s, ts)? {
        let name = format!("ruled-out {}", ts.label(j, s));
        rows.push(Row::new(indicator(ts.len(), |i| i == j), T::zero(), Sense::Le, RowKind::Restriction, name.clone()));
        let neg = (0..ts.len()).map(|i| if i == j { -T::one() } else { T::zero() }).collect();
        rows.push(Row::new(neg, T::zero(), Sense::Le, RowKind::Restriction, format!("{name} (lower)")));
    }
    for (i, r) in spec.extra_rows.iter().enumerate() {
        let name = if r.label.is_empty() { format!("row {i}") } else { r.label.clone() };
        rows.push(Row::new(r.coeffs.clone(), r.rhs.clone(), Sense::Le, RowKind::Restriction, name));
    }
    Ok(rows)
}

/// `p(x_l, x_l) ≤ Ψ_{x_l}` for each treatment, binary instrument only.
pub fn build_always_taker_rows<T: Scalar>(ts: &TypeSpace, psi: &PsiTable<T>, s: &Support<T>) -> Result<Vec<Row<T>>> {
    if ts.k != 2 {
        return Err(Error::NeedsBinaryInstrument(ts.k));
    }
    let both = Subset::full(2);
    (0..ts.l)
        .map(|l| {
            let diag = ts.index(&[l, l])?;
            Ok(Row::new(
                indicator(ts.len(), |j| j == diag),
                psi.mass(l, both)?.clone(),
                Sense::Le,
                RowKind::AlwaysTaker,
                format!("always-{}", s.treatments[l]),
            ))
        })
        .collect()
}

/// One row per `(x_l, Z̃)` in the table: types taking `x_l` at every `z ∈ Z̃`.
pub fn build_sufficient_taker_rows<T: Scalar>(ts: &TypeSpace, psi: &PsiTable<T>, s: &Support<T>) -> Result<Vec<Row<T>>> {
    let mut rows = Vec::with_capacity(psi.len());
    // Ordered by subset, then treatment, so K = 2 matches the always-taker block.
    let mut keys: Vec<&(usize, Subset)> = psi.entries.keys().collect();
    keys.sort_by_key(|(l, z)| (*z, *l));
    for &(l, zsub) in keys {
        if l >= ts.l || !zsub.is_subset_of(Subset::full(ts.k)) {
            return Err(Error::Dimension(format!("psi entry ({l}, {zsub:?}) outside the type space")));
        }
        let zs: Vec<&str> = zsub.iter().map(|k| s.instruments[k].as_str()).collect();
        rows.push(Row::new(
            indicator(ts.len(), |j| zsub.iter().all(|k| ts.digit(j, k) == l)),
            psi.mass(l, zsub)?.clone(),
            Sense::Le,
            RowKind::SufficientTaker,
            format!("sufficient-{}@{{{}}}", s.treatments[l], zs.join(",")),
        ));
    }
    Ok(rows)
}

/// Consistency, restriction and (optionally) overlap rows stacked together.
///
/// For a binary instrument the overlap block is the always-taker block; for
/// more instrument values it is the sufficient-taker block over `psi`.
pub fn build_full_system<T: Scalar>(
    d: &ObservedDistribution<T>,
    spec: &RestrictionSpec<T>,
    ts: &TypeSpace,
    psi: Option<&PsiTable<T>>,
) -> Result<LinearSystem<T>> {
    let mut rows = build_consistency_system(d, ts)?;
    rows.extend(build_restriction_rows(spec, &d.support, ts)?);
    if let Some(psi) = psi {
        if ts.k == 2 {
            rows.extend(build_always_taker_rows(ts, psi, &d.support)?);
        } else {
            rows.extend(build_sufficient_taker_rows(ts, psi, &d.support)?);
        }
    }
    LinearSystem::new(ts.len(), rows)
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::psi::{psi_table, PsiCaps};
    use num_rational::BigRational as Q;
    use num_traits::One;

    fn ts(l: usize, k: usize) -> TypeSpace {
        TypeSpace::new(l, k, DEFAULT_TYPE_CAP).unwrap()
    }

    fn forbidden_vectors(p: Preset, s: &Support<Q>) -> BTreeSet<Vec<usize>> {
        let t = TypeSpace::for_support(s, DEFAULT_TYPE_CAP).unwrap();
        RestrictionSpec::preset(p).expanded(s, &t).unwrap().ruled_out
    }

    #[test]
    fn enumeration_order() {
        let t = ts(2, 2);
        let all: Vec<_> = (0..t.len()).map(|j| t.vector(j)).collect();
        assert_eq!(all, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert_eq!(ts(3, 2).index(&[1, 2]).unwrap(), 5);
        let t = ts(4, 3);
        assert!((0..t.len()).all(|j| t.index(&t.vector(j)).unwrap() == j));
        assert!(TypeSpace::new(5, 6, DEFAULT_TYPE_CAP).is_err());
        assert!(t.index(&[4, 0, 0]).is_err());
    }

    #[test]
    fn preset_expansions() {
        let s2 = Support::<Q>::simple(&["y"], &["x0", "x1"], &["z0", "z1"], false).unwrap();
        assert_eq!(forbidden_vectors(Preset::NoDefiers, &s2), BTreeSet::from([vec![1, 0]]));

        let s3 = Support::<Q>::simple(&["y"], &["x0", "x1", "x2"], &["z0", "z1"], true).unwrap();
        assert_eq!(
            forbidden_vectors(Preset::OrderedMonotone, &s3),
            BTreeSet::from([vec![1, 0], vec![2, 0], vec![2, 1]])
        );
        let promoted = Preset::UnorderedMonotone { promoted: Subset::from_indices([2]) };
        // Allowed switches: x0 -> x2, x1 -> x2.
        assert_eq!(
            forbidden_vectors(promoted, &s3),
            BTreeSet::from([vec![0, 1], vec![1, 0], vec![2, 0], vec![2, 1]])
        );
        let unordered = Support::<Q>::simple(&["y"], &["x0", "x1", "x2"], &["z0", "z1"], false).unwrap();
        assert!(RestrictionSpec::preset(Preset::OrderedMonotone)
            .forbidden(&unordered, &ts(3, 2))
            .is_err());
        let s3d = Support::<Q>::simple(&["y"], &["x0", "x1", "x2"], &["z0", "z1"], true).unwrap();
        assert!(RestrictionSpec::preset(Preset::NoDefiers).forbidden(&s3d, &ts(3, 2)).is_err());
    }

    #[test]
    fn expansion_is_idempotent() {
        let s = Support::<Q>::simple(&["y"], &["x0", "x1", "x2"], &["z0", "z1", "z2"], true).unwrap();
        let t = TypeSpace::for_support(&s, DEFAULT_TYPE_CAP).unwrap();
        let once = RestrictionSpec::preset(Preset::OrderedMonotone).expanded(&s, &t).unwrap();
        let twice = once.expanded(&s, &t).unwrap();
        assert_eq!(once, twice);
        // Weakly increasing vectors over three values from three treatments: C(5,3) = 10 survive.
        assert_eq!(t.len() - once.ruled_out.len(), 10);
    }

    fn example() -> ObservedDistribution<Q> {
        let s = Support::simple(&["y0", "y1"], &["x0", "x1", "x2"], &["z0", "z1"], true).unwrap();
        let q = Q::from_ratio;
        let phi = vec![
            vec![vec![q(1, 2), q(0, 1)], vec![q(0, 1), q(1, 4)], vec![q(0, 1), q(1, 4)]],
            vec![vec![q(0, 1), q(0, 1)], vec![q(0, 1), q(1, 2)], vec![q(0, 1), q(1, 2)]],
        ];
        ObservedDistribution::from_subdensity(s, phi, None).unwrap()
    }

    #[test]
    fn consistency_rows() {
        let d = example();
        let t = ts(3, 2);
        let rows = build_consistency_system(&d, &t).unwrap();
        assert_eq!(rows.len(), 7);
        let q = Q::from_ratio;
        let rhs: Vec<Q> = rows[..6].iter().map(|r| r.rhs.clone()).collect();
        assert_eq!(rhs, vec![q(1, 2), q(1, 4), q(1, 4), q(0, 1), q(1, 2), q(1, 2)]);
        for k in 0..2 {
            let mut acc = vec![Q::from_int(0); t.len()];
            for r in &rows[k * 3..k * 3 + 3] {
                for (a, c) in acc.iter_mut().zip(&r.coeffs) {
                    *a = a.clone() + c.clone();
                }
            }
            assert_eq!(acc, rows[6].coeffs);
        }

        let t2 = ts(2, 2);
        let s2 = Support::<Q>::simple(&["y"], &["x0", "x1"], &["z0", "z1"], false).unwrap();
        let d2 = ObservedDistribution::from_subdensity(s2, vec![vec![vec![q(1, 2)], vec![q(1, 2)]]; 2], None).unwrap();
        let r = &build_consistency_system(&d2, &t2).unwrap()[1];
        let picked: Vec<_> = (0..4).filter(|&j| r.coeffs[j].is_one()).map(|j| t2.vector(j)).collect();
        assert_eq!(picked, vec![vec![1, 0], vec![1, 1]]);
    }

    #[test]
    fn restriction_rows_force_zero() {
        let s = Support::<Q>::simple(&["y"], &["x0", "x1"], &["z0", "z1"], false).unwrap();
        let t = ts(2, 2);
        let mut spec = RestrictionSpec::preset(Preset::NoDefiers);
        spec.extra_rows.push(compliers_exceed_defiers_row(&t).unwrap());
        let rows = build_restriction_rows(&spec, &s, &t).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[0].coeffs[2], Q::from_int(1));
        assert_eq!(rows[1].coeffs[2], Q::from_int(-1));
        assert_eq!(rows[2].coeffs, vec![Q::from_int(0), Q::from_int(-1), Q::from_int(1), Q::from_int(0)]);

        spec.extra_rows[0].coeffs.pop();
        assert!(matches!(build_restriction_rows(&spec, &s, &t), Err(Error::Dimension(_))));
    }

    #[test]
    fn overlap_rows() {
        let d = example();
        let t = ts(3, 2);
        let psi = psi_table(&d, 2, PsiCaps::default()).unwrap();
        let at = build_always_taker_rows(&t, &psi, &d.support).unwrap();
        let q = Q::from_ratio;
        assert_eq!(at.iter().map(|r| r.rhs.clone()).collect::<Vec<_>>(), vec![q(0, 1), q(1, 4), q(1, 4)]);
        let st = build_sufficient_taker_rows(&t, &psi, &d.support).unwrap();
        assert_eq!(
            at.iter().map(|r| (&r.coeffs, &r.rhs)).collect::<Vec<_>>(),
            st.iter().map(|r| (&r.coeffs, &r.rhs)).collect::<Vec<_>>()
        );
    }

    #[test]
    fn sufficient_taker_selection_k3() {
        let t = ts(2, 3);
        let s = Support::<Q>::simple(&["y"], &["x0", "x1"], &["z0", "z1", "z2"], false).unwrap();
        let phi = vec![vec![vec![Q::from_ratio(1, 2)], vec![Q::from_ratio(1, 2)]]; 3];
        let d = ObservedDistribution::from_subdensity(s, phi, None).unwrap();
        let psi = psi_table(&d, 3, PsiCaps::default()).unwrap();
        let rows = build_sufficient_taker_rows(&t, &psi, &d.support).unwrap();
        assert_eq!(rows.len(), 8);
        let row = rows.iter().find(|r| r.tag.name == "sufficient-x1@{z0,z1}").unwrap();
        let picked: Vec<_> = (0..t.len()).filter(|&j| row.coeffs[j].is_one()).map(|j| t.vector(j)).collect();
        assert_eq!(picked, vec![vec![1, 1, 0], vec![1, 1, 1]]);
        assert!(build_always_taker_rows(&t, &psi, &d.support).is_err());

        let t33 = ts(3, 3);
        let s = Support::<Q>::simple(&["y"], &["x0", "x1", "x2"], &["z0", "z1", "z2"], false).unwrap();
        let phi = vec![vec![vec![Q::from_ratio(1, 3)]; 3]; 3];
        let d = ObservedDistribution::from_subdensity(s, phi, None).unwrap();
        let psi = psi_table(&d, 3, PsiCaps::default()).unwrap();
        assert_eq!(build_sufficient_taker_rows(&t33, &psi, &d.support).unwrap().len(), 12);
    }
}
