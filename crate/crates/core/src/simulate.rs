//! Forward maps from explicit response-type populations to observed laws.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, ToPrimitive};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::obs::{ObservedDistribution, Record, Support};
use crate::scalar::{is_probability, sum, Scalar};
use crate::typespace::{RestrictionSpec, TypeSpace};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeEntry<T> {
    /// Treatment taken at each instrument value.
    pub tz: Vec<usize>,
    /// Outcome bin under each treatment.
    pub outcomes: Vec<usize>,
    pub weight: T,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DgpSpec<T> {
    pub support: Support<T>,
    pub type_table: Vec<TypeEntry<T>>,
    /// `(treatment, instrument) ↦ bin`: outcome override breaking exclusion.
    pub exclusion_break: BTreeMap<(usize, usize), usize>,
    pub instrument_law: Vec<T>,
    /// Per-instrument populations; breaks independence when they differ.
    pub per_instrument: Option<Vec<Vec<TypeEntry<T>>>>,
}

fn check_table<T: Scalar>(s: &Support<T>, table: &[TypeEntry<T>]) -> Result<()> {
    for e in table {
        if e.tz.len() != s.k() || e.tz.iter().any(|&x| x >= s.l()) {
            return Err(Error::Dimension(format!("type {:?} does not fit the support", e.tz)));
        }
        if e.outcomes.len() != s.l() || e.outcomes.iter().any(|&b| b >= s.n_bins()) {
            return Err(Error::Dimension(format!("outcomes {:?} do not fit the support", e.outcomes)));
        }
        if !is_probability(&e.weight) {
            return Err(Error::Probability(e.weight.to_fraction()));
        }
    }
    if !sum(table.iter().map(|e| &e.weight)).is_one() {
        return Err(Error::Input("type weights must sum to one".into()));
    }
    Ok(())
}

impl<T: Scalar> DgpSpec<T> {
    pub fn validate(&self) -> Result<()> {
        self.support.validate()?;
        check_table(&self.support, &self.type_table)?;
        if let Some(per) = &self.per_instrument {
            if per.len() != self.support.k() {
                return Err(Error::Dimension("one population per instrument value".into()));
            }
            for t in per {
                check_table(&self.support, t)?;
            }
        }
        for (&(x, z), &b) in &self.exclusion_break {
            if x >= self.support.l() || z >= self.support.k() || b >= self.support.n_bins() {
                return Err(Error::Dimension(format!("exclusion break ({x}, {z}) -> {b} outside the support")));
            }
        }
        if self.instrument_law.len() != self.support.k()
            || self.instrument_law.iter().any(|w| !is_probability(w))
            || !sum(&self.instrument_law).is_one()
        {
            return Err(Error::Input("instrument law must be a probability vector over instrument values".into()));
        }
        Ok(())
    }

    pub fn with_break(mut self, treatment: usize, instrument: usize, bin: usize) -> Self {
        self.exclusion_break.insert((treatment, instrument), bin);
        self
    }
}

pub fn generate_observed<T: Scalar>(dgp: &DgpSpec<T>) -> Result<ObservedDistribution<T>> {
    dgp.validate()?;
    let s = &dgp.support;
    let mut phi = vec![vec![vec![T::zero(); s.n_bins()]; s.l()]; s.k()];
    for (k, cell) in phi.iter_mut().enumerate() {
        let table = dgp.per_instrument.as_ref().map_or(&dgp.type_table, |p| &p[k]);
        for e in table {
            let x = e.tz[k];
            let b = dgp.exclusion_break.get(&(x, k)).copied().unwrap_or(e.outcomes[x]);
            cell[x][b] = cell[x][b].clone() + e.weight.clone();
        }
    }
    ObservedDistribution::from_subdensity(s.clone(), phi, Some(dgp.instrument_law.clone()))
}

/// Three ordered treatments, a binary outcome and a binary instrument:
/// half the population has type `(x0, x1)`, a quarter `(x1, x2)`, a quarter
/// `(x2, x2)`; outcomes are 0 under `x0` and 1 otherwise.
pub fn appendix_b_dgp<T: Scalar>() -> DgpSpec<T> {
    let support = Support::simple(&["y0", "y1"], &["x0", "x1", "x2"], &["z0", "z1"], true).expect("static support");
    let outcomes = vec![0, 1, 1];
    let entry = |tz: [usize; 2], n, d| TypeEntry { tz: tz.to_vec(), outcomes: outcomes.clone(), weight: T::from_ratio(n, d) };
    DgpSpec {
        support,
        type_table: vec![entry([0, 1], 1, 2), entry([1, 2], 1, 4), entry([2, 2], 1, 4)],
        exclusion_break: BTreeMap::new(),
        instrument_law: vec![T::from_ratio(1, 2), T::from_ratio(1, 2)],
        per_instrument: None,
    }
}

/// The same population with the outcome of `x2` at `z1` flipped to 0.
pub fn appendix_b_break_dgp<T: Scalar>() -> DgpSpec<T> {
    appendix_b_dgp().with_break(2, 1, 0)
}

/// A population supported on allowed types only, deterministic in `seed`.
pub fn random_valid_dgp<T: Scalar>(
    seed: u64,
    l: usize,
    k: usize,
    n_bins: usize,
    restriction: &RestrictionSpec<T>,
    type_cap: usize,
) -> Result<DgpSpec<T>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let names = |p: &str, n: usize| (0..n).map(|i| format!("{p}{i}")).collect::<Vec<_>>();
    let support = Support::new(
        names("b", n_bins).into_iter().map(crate::obs::Bin::label).collect(),
        names("x", l),
        names("z", k),
        Some((0..l).collect()),
    )?;
    let ts = TypeSpace::for_support(&support, type_cap)?;
    let forbidden = restriction.forbidden(&support, &ts)?;
    let mut allowed: Vec<usize> = (0..ts.len()).filter(|j| !forbidden.contains(j)).collect();
    if allowed.is_empty() {
        return Err(Error::Input("restriction rules out every type".into()));
    }
    allowed.shuffle(&mut rng);
    let m = rng.gen_range(1..=allowed.len().min(5));
    let raw: Vec<i64> = (0..m).map(|_| rng.gen_range(1..=6)).collect();
    let total: i64 = raw.iter().sum();
    let mut chosen: Vec<(usize, i64)> = allowed[..m].iter().copied().zip(raw).collect();
    chosen.sort_unstable();
    let type_table = chosen
        .into_iter()
        .map(|(j, w)| TypeEntry {
            tz: ts.vector(j),
            outcomes: (0..l).map(|_| rng.gen_range(0..n_bins)).collect(),
            weight: T::from_ratio(w, total),
        })
        .collect();
    Ok(DgpSpec {
        support,
        type_table,
        exclusion_break: BTreeMap::new(),
        instrument_law: vec![T::from_ratio(1, k as i64); k],
        per_instrument: None,
    })
}

/// The smallest record multiset whose empirical law is exactly `d` (uniform
/// instrument law when none is recorded).
pub fn exact_records<T: Scalar>(d: &ObservedDistribution<T>) -> Result<Vec<Record>> {
    let k = d.k();
    let mass: Vec<T> = d.instrument_mass.clone().unwrap_or_else(|| vec![T::from_ratio(1, k as i64); k]);
    let mut n = BigInt::one();
    for (kk, row) in d.subdensity.iter().enumerate() {
        n = n.lcm(mass[kk].to_big_rational().denom());
        for v in row.iter().flatten() {
            n = n.lcm((mass[kk].clone() * v.clone()).to_big_rational().denom());
        }
    }
    let n = n.to_i64().filter(|&n| n <= 1_000_000).ok_or(Error::CapExceeded {
        what: "record count",
        size: usize::MAX,
        cap: 1_000_000,
    })?;
    let s = &d.support;
    let mut out = Vec::new();
    for (kk, row) in d.subdensity.iter().enumerate() {
        for (l, cell) in row.iter().enumerate() {
            for (b, v) in cell.iter().enumerate() {
                let count = (T::from_int(n) * mass[kk].clone() * v.clone()).to_big_rational();
                let count = count.to_integer().to_i64().expect("count fits");
                let y = match &s.outcome_bins[b].interval {
                    Some((lo, _)) => lo.to_fraction(),
                    None => s.outcome_bins[b].label.clone(),
                };
                for _ in 0..count {
                    out.push(Record { y: y.clone(), x: s.treatments[l].clone(), z: s.instruments[kk].clone() });
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::obs::Cell;
    use crate::typespace::{Preset, DEFAULT_TYPE_CAP};
    use num_rational::BigRational as Q;

    #[test]
    fn example_forward_map() {
        let d = generate_observed(&appendix_b_dgp::<Q>()).unwrap();
        let q = Q::from_ratio;
        assert_eq!(d.cond_treatment[0], vec![q(1, 2), q(1, 4), q(1, 4)]);
        assert_eq!(d.cond_treatment[1], vec![q(0, 1), q(1, 2), q(1, 2)]);
        let c = |z: &str, x: &str, b: &str, p| Cell { z: z.into(), x: x.into(), bin: b.into(), prob: p };
        let table = ObservedDistribution::from_joint_table(
            d.support.clone(),
            &[
                c("z0", "x0", "y0", q(1, 2)),
                c("z0", "x1", "y1", q(1, 4)),
                c("z0", "x2", "y1", q(1, 4)),
                c("z1", "x1", "y1", q(1, 2)),
                c("z1", "x2", "y1", q(1, 2)),
            ],
        )
        .unwrap();
        assert_eq!(d.subdensity, table.subdensity);
    }

    #[test]
    fn records_realize_the_law() {
        let d = generate_observed(&appendix_b_dgp::<Q>()).unwrap();
        let recs = exact_records(&d).unwrap();
        assert_eq!(recs.len(), 8);
        let back = ObservedDistribution::ingest_records(d.support.clone(), &recs).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn degenerate_single_type() {
        let s = Support::simple(&["b0", "b1"], &["x0", "x1"], &["z0", "z1"], true).unwrap();
        let dgp = DgpSpec {
            support: s,
            type_table: vec![TypeEntry { tz: vec![0, 0], outcomes: vec![1, 0], weight: Q::from_int(1) }],
            exclusion_break: BTreeMap::new(),
            instrument_law: vec![Q::from_ratio(1, 2); 2],
            per_instrument: None,
        };
        let d = generate_observed(&dgp).unwrap();
        assert!(d.subdensity.iter().all(|r| r[0][1].is_one()));
    }

    #[test]
    fn random_dgps() {
        let spec = RestrictionSpec::<Q>::preset(Preset::OrderedMonotone);
        let a = random_valid_dgp(7, 3, 3, 2, &spec, DEFAULT_TYPE_CAP).unwrap();
        let b = random_valid_dgp(7, 3, 3, 2, &spec, DEFAULT_TYPE_CAP).unwrap();
        assert_eq!(a, b);
        for seed in 0..50 {
            let g = random_valid_dgp(seed, 3, 3, 2, &spec, DEFAULT_TYPE_CAP).unwrap();
            assert!(g.type_table.iter().all(|e| e.tz.windows(2).all(|w| w[0] <= w[1])));
            generate_observed(&g).unwrap();
        }
    }

    #[test]
    fn break_changes_only_the_targeted_cell() {
        let d = generate_observed(&appendix_b_break_dgp::<Q>()).unwrap();
        assert_eq!(d.subdensity[1][2], vec![Q::from_ratio(1, 2), Q::from_int(0)]);
        assert_eq!(d.subdensity[0][2], vec![Q::from_int(0), Q::from_ratio(1, 4)]);
    }
}
