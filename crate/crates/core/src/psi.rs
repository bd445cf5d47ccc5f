//! Overlap of sub-densities across instrument values.
//!
//! `ψ(x, Z̃)` is the binwise minimum of `φ[z][x]` over `z ∈ Z̃`; its mass `Ψ`
//! bounds the share of units that take `x` at every instrument value in `Z̃`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::obs::ObservedDistribution;
use crate::scalar::{min, sum, Scalar};
use crate::subset::Subset;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PsiCaps {
    pub max_instruments: usize,
    pub max_subsets: usize,
}

impl Default for PsiCaps {
    fn default() -> Self {
        PsiCaps { max_instruments: 12, max_subsets: 1 << 12 }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiEntry<T> {
    pub vector: Vec<T>,
    pub mass: T,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PsiTable<T> {
    /// Keyed by (treatment index, instrument subset).
    pub entries: BTreeMap<(usize, Subset), PsiEntry<T>>,
}

impl<T: Scalar> PsiTable<T> {
    pub fn get(&self, l: usize, zsub: Subset) -> Option<&PsiEntry<T>> {
        self.entries.get(&(l, zsub))
    }

    pub fn mass(&self, l: usize, zsub: Subset) -> Result<&T> {
        self.get(l, zsub)
            .map(|e| &e.mass)
            .ok_or_else(|| Error::Missing(format!("psi entry for treatment {l}, subset {zsub:?}")))
    }

    /// `Ψ_x` over the binary instrument set `{z0, z1}`.
    pub fn binary_masses(&self, l: usize) -> Result<Vec<T>> {
        (0..l).map(|x| self.mass(x, Subset::full(2)).cloned()).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn check_subset<T: Scalar>(d: &ObservedDistribution<T>, x: usize, zsub: Subset) -> Result<()> {
    if zsub.len() < 2 {
        return Err(Error::SubsetTooSmall);
    }
    if x >= d.l() {
        return Err(Error::UnknownLabel { kind: "treatment", label: format!("#{x}") });
    }
    if !zsub.is_subset_of(Subset::full(d.k())) {
        return Err(Error::UnknownLabel { kind: "instrument", label: format!("{zsub:?}") });
    }
    Ok(())
}

pub fn pointwise_min<T: Scalar>(d: &ObservedDistribution<T>, x: usize, zsub: Subset) -> Result<Vec<T>> {
    check_subset(d, x, zsub)?;
    let mut zs = zsub.iter();
    let first = zs.next().expect("subset has at least two members");
    let mut out = d.subdensity[first][x].clone();
    for z in zs {
        for (o, v) in out.iter_mut().zip(&d.subdensity[z][x]) {
            *o = min(o, v);
        }
    }
    Ok(out)
}

pub fn psi_mass<T: Scalar>(d: &ObservedDistribution<T>, x: usize, zsub: Subset) -> Result<T> {
    Ok(sum(&pointwise_min(d, x, zsub)?))
}

/// Label-addressed variant of [`pointwise_min`].
pub fn pointwise_min_by_label<T: Scalar>(d: &ObservedDistribution<T>, x: &str, zs: &[&str]) -> Result<Vec<T>> {
    let xi = d.support.treatment_index(x)?;
    let mut sub = Subset::EMPTY;
    for z in zs {
        sub.insert(d.support.instrument_index(z)?);
    }
    pointwise_min(d, xi, sub)
}

/// Number of instrument subsets with size in `[2, max_size]`.
pub fn subset_count(k: usize, max_size: usize) -> usize {
    let mut c = 0usize;
    let mut binom = 1usize; // C(k, s)
    for s in 0..=max_size.min(k) {
        if s >= 2 {
            c = c.saturating_add(binom);
        }
        binom = binom.saturating_mul(k - s) / (s + 1);
    }
    c
}

pub fn psi_table<T: Scalar>(d: &ObservedDistribution<T>, max_size: usize, caps: PsiCaps) -> Result<PsiTable<T>> {
    let k = d.k();
    if max_size < 2 || max_size > k {
        return Err(Error::Input(format!("subset size bound must lie in [2, {k}], got {max_size}")));
    }
    if k > caps.max_instruments {
        return Err(Error::CapExceeded { what: "instrument count", size: k, cap: caps.max_instruments });
    }
    let n = subset_count(k, max_size);
    if n > caps.max_subsets {
        return Err(Error::CapExceeded { what: "instrument subsets per treatment", size: n, cap: caps.max_subsets });
    }
    let mut entries = BTreeMap::new();
    for zsub in Subset::all(k).filter(|s| (2..=max_size).contains(&s.len())) {
        for x in 0..d.l() {
            let vector = pointwise_min(d, x, zsub)?;
            let mass = sum(&vector);
            entries.insert((x, zsub), PsiEntry { vector, mass });
        }
    }
    Ok(PsiTable { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::{Cell, Support};
    use num_rational::BigRational as Q;

    fn q(n: i64, d: i64) -> Q {
        Q::from_ratio(n, d)
    }

    fn example() -> ObservedDistribution<Q> {
        let s = Support::simple(&["y0", "y1"], &["x0", "x1", "x2"], &["z0", "z1"], true).unwrap();
        let c = |z: &str, x: &str, b: &str, p| Cell { z: z.into(), x: x.into(), bin: b.into(), prob: p };
        ObservedDistribution::from_joint_table(
            s,
            &[
                c("z0", "x0", "y0", q(1, 2)),
                c("z0", "x1", "y1", q(1, 4)),
                c("z0", "x2", "y1", q(1, 4)),
                c("z1", "x1", "y1", q(1, 2)),
                c("z1", "x2", "y1", q(1, 2)),
            ],
        )
        .unwrap()
    }

    #[test]
    fn example_minima() {
        let d = example();
        let both = Subset::full(2);
        assert_eq!(pointwise_min(&d, 1, both).unwrap(), vec![q(0, 1), q(1, 4)]);
        let masses: Vec<Q> = (0..3).map(|x| psi_mass(&d, x, both).unwrap()).collect();
        assert_eq!(masses, vec![q(0, 1), q(1, 4), q(1, 4)]);

        let b = d.binarize("x2").unwrap();
        assert_eq!(pointwise_min_by_label(&b, "Bin0", &["z0", "z1"]).unwrap(), vec![q(0, 1), q(1, 4)]);
        assert_eq!(psi_mass(&b, 0, both).unwrap(), q(1, 4));
        assert_eq!(psi_mass(&b, 1, both).unwrap(), q(1, 4));
    }

    #[test]
    fn identical_subdensities_overlap_fully() {
        let s = Support::simple(&["a", "b"], &["x"], &["z0", "z1", "z2"], false).unwrap();
        let row = vec![vec![q(1, 3), q(2, 3)]];
        let d = ObservedDistribution::from_subdensity(s, vec![row.clone(), row.clone(), row], None).unwrap();
        let all = Subset::full(3);
        assert_eq!(pointwise_min(&d, 0, all).unwrap(), vec![q(1, 3), q(2, 3)]);
        assert_eq!(psi_mass(&d, 0, all).unwrap(), d.cond_treatment[0][0]);
    }

    #[test]
    fn rejects_small_subsets() {
        let d = example();
        assert_eq!(pointwise_min(&d, 0, Subset::singleton(0)), Err(Error::SubsetTooSmall));
        assert!(pointwise_min_by_label(&d, "x7", &["z0", "z1"]).is_err());
        assert!(pointwise_min_by_label(&d, "x0", &["z0", "z4"]).is_err());
    }

    #[test]
    fn table_sizes() {
        let d = example();
        assert_eq!(psi_table(&d, 2, PsiCaps::default()).unwrap().len(), 3);

        let s = Support::simple(&["a"], &["x0", "x1"], &["z0", "z1", "z2"], false).unwrap();
        let phi = vec![vec![vec![q(1, 2)], vec![q(1, 2)]]; 3];
        let d3 = ObservedDistribution::from_subdensity(s, phi, None).unwrap();
        let t = psi_table(&d3, 3, PsiCaps::default()).unwrap();
        assert_eq!(t.entries.keys().filter(|(l, _)| *l == 0).count(), 4);
        assert!(psi_table(&d3, 1, PsiCaps::default()).is_err());
        let tight = PsiCaps { max_instruments: 12, max_subsets: 3 };
        assert!(matches!(psi_table(&d3, 3, tight), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn subset_counts() {
        assert_eq!(subset_count(2, 2), 1);
        assert_eq!(subset_count(3, 3), 4);
        assert_eq!(subset_count(12, 12), 4096 - 13);
    }
}
