//! Binned joint laws of (outcome, treatment, instrument).

use std::collections::BTreeSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{is_probability, sum, Scalar};
use crate::subset::Subset;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bin<T> {
    pub label: String,
    /// `[lo, hi)`; the last bin of a numeric binning is closed on the right.
    pub interval: Option<(T, T)>,
}

impl<T> Bin<T> {
    pub fn label(label: impl Into<String>) -> Self {
        Bin { label: label.into(), interval: None }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Support<T> {
    pub outcome_bins: Vec<Bin<T>>,
    pub treatments: Vec<String>,
    pub instruments: Vec<String>,
    /// Treatment indices from lowest to highest, when a total order is declared.
    pub treatment_order: Option<Vec<usize>>,
}

fn check_distinct(kind: &str, labels: &[String]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for l in labels {
        if !seen.insert(l.as_str()) {
            return Err(Error::Support(format!("duplicate {kind} label `{l}`")));
        }
    }
    Ok(())
}

fn find(kind: &'static str, labels: &[String], label: &str) -> Result<usize> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| Error::UnknownLabel { kind, label: label.to_string() })
}

impl<T: Scalar> Support<T> {
    pub fn new(
        outcome_bins: Vec<Bin<T>>,
        treatments: Vec<String>,
        instruments: Vec<String>,
        treatment_order: Option<Vec<usize>>,
    ) -> Result<Self> {
        let s = Support { outcome_bins, treatments, instruments, treatment_order };
        s.validate()?;
        Ok(s)
    }

    /// Labels-only support; convenient in tests and generators.
    pub fn simple(bins: &[&str], treatments: &[&str], instruments: &[&str], ordered: bool) -> Result<Self> {
        let order = ordered.then(|| (0..treatments.len()).collect());
        Support::new(
            bins.iter().map(|b| Bin::label(*b)).collect(),
            treatments.iter().map(|s| s.to_string()).collect(),
            instruments.iter().map(|s| s.to_string()).collect(),
            order,
        )
    }

    pub fn validate(&self) -> Result<()> {
        if self.treatments.is_empty() {
            return Err(Error::Support("at least one treatment is required".into()));
        }
        if self.instruments.len() < 2 {
            return Err(Error::Support("at least two instrument values are required".into()));
        }
        if self.outcome_bins.is_empty() {
            return Err(Error::Support("at least one outcome bin is required".into()));
        }
        if self.treatments.len() > 64 || self.instruments.len() > 64 {
            return Err(Error::Support("at most 64 treatments and 64 instrument values".into()));
        }
        check_distinct("treatment", &self.treatments)?;
        check_distinct("instrument", &self.instruments)?;
        let bin_labels: Vec<String> = self.outcome_bins.iter().map(|b| b.label.clone()).collect();
        check_distinct("bin", &bin_labels)?;

        let numeric = self.outcome_bins.iter().filter(|b| b.interval.is_some()).count();
        if numeric != 0 && numeric != self.outcome_bins.len() {
            return Err(Error::Support("either every bin carries an interval or none does".into()));
        }
        let mut prev_hi: Option<&T> = None;
        for b in &self.outcome_bins {
            if let Some((lo, hi)) = &b.interval {
                if lo >= hi {
                    return Err(Error::Support(format!("bin `{}` has an empty interval", b.label)));
                }
                if prev_hi.is_some_and(|p| p > lo) {
                    return Err(Error::Support(format!("bin `{}` overlaps or precedes its predecessor", b.label)));
                }
                prev_hi = Some(hi);
            }
        }
        if let Some(order) = &self.treatment_order {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != (0..self.treatments.len()).collect::<Vec<_>>() {
                return Err(Error::Support("treatment order must list every treatment exactly once".into()));
            }
        }
        Ok(())
    }

    pub fn l(&self) -> usize {
        self.treatments.len()
    }

    pub fn k(&self) -> usize {
        self.instruments.len()
    }

    pub fn n_bins(&self) -> usize {
        self.outcome_bins.len()
    }

    pub fn treatment_index(&self, label: &str) -> Result<usize> {
        find("treatment", &self.treatments, label)
    }

    pub fn instrument_index(&self, label: &str) -> Result<usize> {
        find("instrument", &self.instruments, label)
    }

    pub fn bin_index(&self, label: &str) -> Result<usize> {
        self.outcome_bins
            .iter()
            .position(|b| b.label == label)
            .ok_or_else(|| Error::UnknownLabel { kind: "bin", label: label.to_string() })
    }

    /// Rank of each treatment under the declared order (`rank[l]`).
    pub fn ranks(&self) -> Option<Vec<usize>> {
        let order = self.treatment_order.as_ref()?;
        let mut rank = vec![0; order.len()];
        for (r, &l) in order.iter().enumerate() {
            rank[l] = r;
        }
        Some(rank)
    }

    pub fn has_numeric_bins(&self) -> bool {
        self.outcome_bins.first().is_some_and(|b| b.interval.is_some())
    }

    /// Left-closed bins, the last one closed on both ends.
    pub fn locate(&self, y: &T) -> Option<usize> {
        let last = self.outcome_bins.len() - 1;
        self.outcome_bins.iter().enumerate().find_map(|(i, b)| {
            let (lo, hi) = b.interval.as_ref()?;
            let inside = y >= lo && (y < hi || (i == last && y == hi));
            inside.then_some(i)
        })
    }

    pub fn treatment_labels(&self, s: Subset) -> Vec<String> {
        s.iter().map(|l| self.treatments[l].clone()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Cell<T> {
    pub z: String,
    pub x: String,
    pub bin: String,
    pub prob: T,
}

#[derive(Clone, Debug, PartialEq, Eq, Deserialize, Serialize)]
pub struct Record {
    pub y: String,
    pub x: String,
    pub z: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ObservedDistribution<T> {
    pub support: Support<T>,
    pub instrument_mass: Option<Vec<T>>,
    /// `cond_treatment[k][l] = P[X = x_l | Z = z_k]`
    pub cond_treatment: Vec<Vec<T>>,
    /// `subdensity[k][l][b] = P[X = x_l, Y ∈ b | Z = z_k]`
    pub subdensity: Vec<Vec<Vec<T>>>,
}

impl<T: Scalar> ObservedDistribution<T> {
    /// Builds from a full sub-density array, deriving treatment probabilities.
    pub fn from_subdensity(support: Support<T>, subdensity: Vec<Vec<Vec<T>>>, instrument_mass: Option<Vec<T>>) -> Result<Self> {
        support.validate()?;
        let (k, l, nb) = (support.k(), support.l(), support.n_bins());
        if subdensity.len() != k || subdensity.iter().any(|r| r.len() != l || r.iter().any(|c| c.len() != nb)) {
            return Err(Error::Dimension(format!("sub-density table must be {k}x{l}x{nb}")));
        }
        let cond_treatment = subdensity.iter().map(|row| row.iter().map(|c| sum(c)).collect()).collect();
        let d = ObservedDistribution { support, instrument_mass, cond_treatment, subdensity };
        d.validate()?;
        Ok(d)
    }

    pub fn from_joint_table(support: Support<T>, cells: &[Cell<T>]) -> Result<Self> {
        support.validate()?;
        let (k, l, nb) = (support.k(), support.l(), support.n_bins());
        let mut phi = vec![vec![vec![T::zero(); nb]; l]; k];
        let mut seen = BTreeSet::new();
        for c in cells {
            let zi = support.instrument_index(&c.z)?;
            let xi = support.treatment_index(&c.x)?;
            let bi = support.bin_index(&c.bin)?;
            if !seen.insert((zi, xi, bi)) {
                return Err(Error::DuplicateCell { z: c.z.clone(), x: c.x.clone(), bin: c.bin.clone() });
            }
            if !is_probability(&c.prob) {
                return Err(Error::Probability(c.prob.to_fraction()));
            }
            phi[zi][xi][bi] = c.prob.clone();
        }
        Self::from_subdensity(support, phi, None)
    }

    pub fn validate(&self) -> Result<()> {
        for (k, row) in self.subdensity.iter().enumerate() {
            let mut mass = T::zero();
            for (l, cell) in row.iter().enumerate() {
                if let Some(v) = cell.iter().find(|v| v.is_negative()) {
                    return Err(Error::Probability(v.to_fraction()));
                }
                let s = sum(cell);
                if s != self.cond_treatment[k][l] {
                    return Err(Error::Internal(format!("marginal mismatch at ({k},{l})")));
                }
                mass = mass + s;
            }
            if !mass.is_one() {
                return Err(Error::InstrumentMass { z: self.support.instruments[k].clone(), mass: mass.to_fraction() });
            }
        }
        if let Some(m) = &self.instrument_mass {
            if m.len() != self.k() || m.iter().any(|v| !is_probability(v)) || !sum(m).is_one() {
                return Err(Error::Input("instrument masses must be probabilities summing to one".into()));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.support.k()
    }

    pub fn l(&self) -> usize {
        self.support.l()
    }

    pub fn n_bins(&self) -> usize {
        self.support.n_bins()
    }

    /// `P[X ∈ set | Z = z_k]`
    pub fn prob_in(&self, k: usize, set: Subset) -> T {
        sum(set.iter().map(|l| &self.cond_treatment[k][l]))
    }

    /// Every nonzero cell, ordered by (z, x, bin).
    pub fn to_cells(&self) -> Vec<Cell<T>> {
        let s = &self.support;
        let mut out = Vec::new();
        for (k, row) in self.subdensity.iter().enumerate() {
            for (l, cell) in row.iter().enumerate() {
                for (b, v) in cell.iter().enumerate() {
                    if !v.is_zero() {
                        out.push(Cell {
                            z: s.instruments[k].clone(),
                            x: s.treatments[l].clone(),
                            bin: s.outcome_bins[b].label.clone(),
                            prob: v.clone(),
                        });
                    }
                }
            }
        }
        out
    }

    /// Empirical frequencies `count / total` within each instrument stratum.
    pub fn ingest_records(support: Support<T>, records: &[Record]) -> Result<Self> {
        support.validate()?;
        if records.is_empty() {
            return Err(Error::Input("no records".into()));
        }
        let (k, l, nb) = (support.k(), support.l(), support.n_bins());
        let mut counts = vec![vec![vec![0i64; nb]; l]; k];
        let mut per_z = vec![0i64; k];
        for r in records {
            let zi = support.instrument_index(r.z.trim())?;
            let xi = support.treatment_index(r.x.trim())?;
            let y = r.y.trim();
            let bi = if support.has_numeric_bins() {
                let v = T::parse_exact(y).ok_or_else(|| Error::Input(format!("outcome `{y}` is not a number")))?;
                support.locate(&v).ok_or_else(|| Error::OutsideBins(y.to_string()))?
            } else {
                support.bin_index(y).map_err(|_| Error::OutsideBins(y.to_string()))?
            };
            counts[zi][xi][bi] += 1;
            per_z[zi] += 1;
        }
        if let Some(z) = per_z.iter().position(|&n| n == 0) {
            return Err(Error::EmptyStratum(support.instruments[z].clone()));
        }
        let total: i64 = per_z.iter().sum();
        let phi = counts
            .iter()
            .zip(&per_z)
            .map(|(row, &n)| row.iter().map(|c| c.iter().map(|&m| T::from_ratio(m, n)).collect()).collect())
            .collect();
        let mass = per_z.iter().map(|&n| T::from_ratio(n, total)).collect();
        Self::from_subdensity(support, phi, Some(mass))
    }

    /// Delimited text with a `y,x,z` header.
    pub fn ingest_csv<R: Read>(support: Support<T>, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let records = rdr
            .deserialize::<Record>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Input(format!("record file: {e}")))?;
        Self::ingest_records(support, &records)
    }

    /// Collapses treatments to `1{X ≥ threshold}` under the declared order.
    pub fn binarize(&self, threshold: &str) -> Result<Self> {
        let ranks = self.support.ranks().ok_or(Error::NoOrder)?;
        let t = self.support.treatment_index(threshold)?;
        let upper: Vec<bool> = ranks.iter().map(|&r| r >= ranks[t]).collect();
        let nb = self.n_bins();
        let phi = self
            .subdensity
            .iter()
            .map(|row| {
                let mut merged = vec![vec![T::zero(); nb]; 2];
                for (l, cell) in row.iter().enumerate() {
                    let side = usize::from(upper[l]);
                    for (b, v) in cell.iter().enumerate() {
                        merged[side][b] = merged[side][b].clone() + v.clone();
                    }
                }
                merged
            })
            .collect();
        let support = Support::new(
            self.support.outcome_bins.clone(),
            vec!["Bin0".to_string(), "Bin1".to_string()],
            self.support.instruments.clone(),
            Some(vec![0, 1]),
        )?;
        Self::from_subdensity(support, phi, self.instrument_mass.clone())
    }

    /// Total mass per instrument, `Σ_l Σ_b φ`.
    pub fn mass_per_instrument(&self) -> Vec<T> {
        self.subdensity.iter().map(|row| sum(row.iter().flatten())).collect()
    }
}
