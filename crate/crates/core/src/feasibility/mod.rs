//! Exact feasibility of `{p ≥ 0 : A_eq p = b_eq, A_le p ≤ b_le}`.
//!
//! Every answer carries evidence: a witness that satisfies each row exactly,
//! or a Farkas vector `y` with `yᵀA ≥ 0`, `y_le ≥ 0` and `yᵀb < 0`.

mod oracle;
mod simplex;

use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::typespace::TypeDistribution;

pub use oracle::{brute_force_oracle, OracleAnswer, ORACLE_MAX_VARS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sense {
    Eq,
    Le,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RowKind {
    Consistency,
    Restriction,
    AlwaysTaker,
    SufficientTaker,
}

impl fmt::Display for RowKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RowKind::Consistency => "consistency",
            RowKind::Restriction => "restriction",
            RowKind::AlwaysTaker => "always-taker",
            RowKind::SufficientTaker => "sufficient-taker",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct RowTag {
    pub kind: RowKind,
    pub name: String,
}

impl fmt::Display for RowTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row<T> {
    pub coeffs: Vec<T>,
    pub rhs: T,
    pub sense: Sense,
    pub tag: RowTag,
}

impl<T: Scalar> Row<T> {
    pub fn new(coeffs: Vec<T>, rhs: T, sense: Sense, kind: RowKind, name: String) -> Self {
        Row { coeffs, rhs, sense, tag: RowTag { kind, name } }
    }

    pub fn dot(&self, p: &[T]) -> T {
        self.coeffs.iter().zip(p).fold(T::zero(), |acc, (a, x)| acc + a.clone() * x.clone())
    }

    pub fn holds(&self, p: &[T]) -> bool {
        let lhs = self.dot(p);
        match self.sense {
            Sense::Eq => lhs == self.rhs,
            Sense::Le => lhs <= self.rhs,
        }
    }
}

/// Rows over nonnegative variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LinearSystem<T> {
    pub n_vars: usize,
    pub rows: Vec<Row<T>>,
}

impl<T: Scalar> LinearSystem<T> {
    pub fn new(n_vars: usize, rows: Vec<Row<T>>) -> Result<Self> {
        let sys = LinearSystem { n_vars, rows };
        sys.validate()?;
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some((i, r)) = self.rows.iter().enumerate().find(|(_, r)| r.coeffs.len() != self.n_vars) {
            return Err(Error::Dimension(format!(
                "row {i} (`{}`) has {} coefficients, expected {}",
                r.tag.name,
                r.coeffs.len(),
                self.n_vars
            )));
        }
        Ok(())
    }

    pub fn push(&mut self, row: Row<T>) -> Result<()> {
        if row.coeffs.len() != self.n_vars {
            return Err(Error::Dimension(format!("row `{}` has the wrong length", row.tag.name)));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn eq_rows(&self) -> impl Iterator<Item = &Row<T>> {
        self.rows.iter().filter(|r| r.sense == Sense::Eq)
    }

    pub fn ineq_rows(&self) -> impl Iterator<Item = &Row<T>> {
        self.rows.iter().filter(|r| r.sense == Sense::Le)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Feasible,
    Infeasible,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeasibilityResult<T> {
    pub status: Status,
    pub witness: Option<Vec<T>>,
    /// One multiplier per row, in row order.
    pub certificate: Option<Vec<T>>,
    /// Tags of rows carrying nonzero certificate weight.
    pub violated_labels: Vec<RowTag>,
}

impl<T: Scalar> FeasibilityResult<T> {
    pub fn is_feasible(&self) -> bool {
        self.status == Status::Feasible
    }

    /// The witness as a type distribution, when it sums to one.
    pub fn distribution(&self) -> Option<TypeDistribution<T>> {
        TypeDistribution::new(self.witness.clone()?).ok()
    }
}

pub fn solve_feasibility<T: Scalar>(sys: &LinearSystem<T>) -> Result<FeasibilityResult<T>> {
    sys.validate()?;
    let result = match simplex::phase_one(sys) {
        simplex::Outcome::Feasible(p) => {
            if !verify_witness(sys, &p) {
                return Err(Error::Internal("simplex witness failed re-validation".into()));
            }
            FeasibilityResult { status: Status::Feasible, witness: Some(p), certificate: None, violated_labels: vec![] }
        }
        simplex::Outcome::Infeasible(y) => {
            let violated_labels = sys
                .rows
                .iter()
                .zip(&y)
                .filter(|(_, w)| !w.is_zero())
                .map(|(r, _)| r.tag.clone())
                .collect();
            FeasibilityResult { status: Status::Infeasible, witness: None, certificate: Some(y), violated_labels }
        }
    };
    if result.status == Status::Infeasible && !verify_certificate(sys, &result) {
        return Err(Error::Internal("Farkas certificate failed re-validation".into()));
    }
    Ok(result)
}

pub fn verify_witness<T: Scalar>(sys: &LinearSystem<T>, p: &[T]) -> bool {
    p.len() == sys.n_vars && p.iter().all(|v| !v.is_negative()) && sys.rows.iter().all(|r| r.holds(p))
}

/// Recomputes `yᵀA` and `yᵀb`; `false` for anything short of a valid proof.
pub fn verify_certificate<T: Scalar>(sys: &LinearSystem<T>, result: &FeasibilityResult<T>) -> bool {
    let Some(y) = result.certificate.as_ref() else {
        return false;
    };
    if result.status != Status::Infeasible || y.len() != sys.rows.len() {
        return false;
    }
    if sys.rows.iter().zip(y).any(|(r, w)| r.sense == Sense::Le && w.is_negative()) {
        return false;
    }
    let columns_ok = (0..sys.n_vars).all(|j| {
        let col = sys.rows.iter().zip(y).fold(T::zero(), |acc, (r, w)| acc + w.clone() * r.coeffs[j].clone());
        !col.is_negative()
    });
    let yb = sys.rows.iter().zip(y).fold(T::zero(), |acc, (r, w)| acc + w.clone() * r.rhs.clone());
    columns_ok && yb.is_negative()
}
