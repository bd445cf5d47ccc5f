//! Independent brute-force check for small systems restricted to the simplex.
//!
//! A grid search over `p = c / resolution` finds feasible points; an
//! exhaustive vertex enumeration of `{rows, p ≥ 0, Σp = 1}` proves
//! emptiness. Shares no code with the simplex.

use super::{LinearSystem, Row, Sense};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const ORACLE_MAX_VARS: usize = 12;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleAnswer<T> {
    Feasible(Vec<T>),
    Infeasible,
    Unknown,
}

impl<T> OracleAnswer<T> {
    pub fn definite(&self) -> Option<bool> {
        match self {
            OracleAnswer::Feasible(_) => Some(true),
            OracleAnswer::Infeasible => Some(false),
            OracleAnswer::Unknown => None,
        }
    }
}

pub fn brute_force_oracle<T: Scalar>(sys: &LinearSystem<T>, resolution: u32) -> Result<OracleAnswer<T>> {
    sys.validate()?;
    let n = sys.n_vars;
    if n == 0 || n > ORACLE_MAX_VARS {
        return Err(Error::CapExceeded { what: "oracle variable count", size: n, cap: ORACLE_MAX_VARS });
    }
    if resolution == 0 {
        return Err(Error::Input("grid resolution must be positive".into()));
    }
    if let Some(p) = grid_search(sys, resolution) {
        return Ok(OracleAnswer::Feasible(p));
    }
    if has_vertex(sys) {
        Ok(OracleAnswer::Unknown)
    } else {
        Ok(OracleAnswer::Infeasible)
    }
}

struct Grid<'a, T> {
    rows: &'a [Row<T>],
    /// `bounds[r][i]` = (min, max) of row `r`'s coefficients over variables `i..`.
    bounds: Vec<Vec<(T, T)>>,
    res: T,
    n: usize,
}

impl<T: Scalar> Grid<'_, T> {
    /// `partial[r]` is row `r` evaluated over the variables fixed so far.
    fn viable(&self, i: usize, left: u32, partial: &[T]) -> bool {
        let mass = T::from_int(left as i64) / self.res.clone();
        self.rows.iter().zip(partial).enumerate().all(|(r, (row, acc))| {
            let (lo, hi) = if i < self.n {
                let (a, b) = &self.bounds[r][i];
                (acc.clone() + a.clone() * mass.clone(), acc.clone() + b.clone() * mass.clone())
            } else {
                (acc.clone(), acc.clone())
            };
            match row.sense {
                Sense::Eq => lo <= row.rhs && row.rhs <= hi,
                Sense::Le => lo <= row.rhs,
            }
        })
    }

    fn search(&self, i: usize, left: u32, partial: &mut Vec<T>, counts: &mut Vec<u32>) -> bool {
        if !self.viable(i, left, partial) {
            return false;
        }
        if i == self.n {
            return left == 0;
        }
        let range: Vec<u32> = if i + 1 == self.n { vec![left] } else { (0..=left).collect() };
        for c in range {
            let v = T::from_int(c as i64) / self.res.clone();
            let saved = partial.clone();
            for (acc, row) in partial.iter_mut().zip(self.rows) {
                *acc = acc.clone() + row.coeffs[i].clone() * v.clone();
            }
            counts.push(c);
            if self.search(i + 1, left - c, partial, counts) {
                return true;
            }
            counts.pop();
            *partial = saved;
        }
        false
    }
}

fn grid_search<T: Scalar>(sys: &LinearSystem<T>, res: u32) -> Option<Vec<T>> {
    let n = sys.n_vars;
    let bounds = sys
        .rows
        .iter()
        .map(|r| {
            let mut b = vec![(T::zero(), T::zero()); n];
            let mut lo = r.coeffs[n - 1].clone();
            let mut hi = lo.clone();
            for i in (0..n).rev() {
                if r.coeffs[i] < lo {
                    lo = r.coeffs[i].clone();
                }
                if r.coeffs[i] > hi {
                    hi = r.coeffs[i].clone();
                }
                b[i] = (lo.clone(), hi.clone());
            }
            b
        })
        .collect();
    let grid = Grid { rows: &sys.rows, bounds, res: T::from_int(res as i64), n };
    let mut partial = vec![T::zero(); sys.rows.len()];
    let mut counts = Vec::with_capacity(n);
    if grid.search(0, res, &mut partial, &mut counts) {
        Some(counts.iter().map(|&c| T::from_int(c as i64) / grid.res.clone()).collect())
    } else {
        None
    }
}

/// Solves a square system by Gauss–Jordan elimination; `None` when singular.
fn solve_square<T: Scalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let p = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v = v.clone() / p.clone();
        }
        b[col] = b[col].clone() / p;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                let pivot_row = a[col].clone();
                for (v, pv) in a[r].iter_mut().zip(&pivot_row) {
                    *v = v.clone() - f.clone() * pv.clone();
                }
                b[r] = b[r].clone() - f * b[col].clone();
            }
        }
    }
    Some(b)
}

/// Greedy row basis: returns the indices of a maximal independent subset,
/// or `None` if the equalities are inconsistent.
fn independent_rows<T: Scalar>(rows: &[(Vec<T>, T)]) -> Option<Vec<usize>> {
    let mut reduced: Vec<(Vec<T>, T, usize)> = Vec::new(); // echelon rows with pivot column
    let mut keep = Vec::new();
    for (idx, (c, rhs)) in rows.iter().enumerate() {
        let mut v = c.clone();
        let mut r = rhs.clone();
        for (pv, pr, pc) in &reduced {
            if !v[*pc].is_zero() {
                let f = v[*pc].clone() / pv[*pc].clone();
                for (x, y) in v.iter_mut().zip(pv) {
                    *x = x.clone() - f.clone() * y.clone();
                }
                r = r - f * pr.clone();
            }
        }
        match v.iter().position(|x| !x.is_zero()) {
            Some(pc) => {
                reduced.push((v, r, pc));
                keep.push(idx);
            }
            None if !r.is_zero() => return None,
            None => {}
        }
    }
    Some(keep)
}

fn for_each_combination(n: usize, k: usize, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize]) -> bool) -> bool {
        if cur.len() == k {
            return f(cur);
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            if rec(i + 1, n, k, cur, f) {
                return true;
            }
            cur.pop();
        }
        false
    }
    rec(0, n, k, &mut Vec::with_capacity(k), f)
}

/// `true` iff `{rows, p ≥ 0, Σp = 1}` has a vertex, i.e. is nonempty.
fn has_vertex<T: Scalar>(sys: &LinearSystem<T>) -> bool {
    let n = sys.n_vars;
    let mut eqs: Vec<(Vec<T>, T)> = vec![(vec![T::one(); n], T::one())];
    eqs.extend(sys.eq_rows().map(|r| (r.coeffs.clone(), r.rhs.clone())));
    let Some(basis) = independent_rows(&eqs) else {
        return false;
    };
    let eqs: Vec<(Vec<T>, T)> = basis.into_iter().map(|i| eqs[i].clone()).collect();

    let mut planes: Vec<(Vec<T>, T)> = Vec::new();
    for r in sys.ineq_rows() {
        let p = (r.coeffs.clone(), r.rhs.clone());
        if !planes.contains(&p) && r.coeffs.iter().any(|c| !c.is_zero()) {
            planes.push(p);
        }
    }
    for j in 0..n {
        let mut e = vec![T::zero(); n];
        e[j] = T::one();
        let p = (e, T::zero());
        if !planes.contains(&p) {
            planes.push(p);
        }
    }
    let need = n - eqs.len();
    let feasible = |p: &[T]| p.iter().all(|v| !v.is_negative()) && sys.rows.iter().all(|r| r.holds(p));
    for_each_combination(planes.len(), need, &mut |pick| {
        let mut a: Vec<Vec<T>> = eqs.iter().map(|(c, _)| c.clone()).collect();
        let mut b: Vec<T> = eqs.iter().map(|(_, r)| r.clone()).collect();
        for &i in pick {
            a.push(planes[i].0.clone());
            b.push(planes[i].1.clone());
        }
        solve_square(a, b).is_some_and(|p| feasible(&p))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feasibility::RowKind;
    use num_rational::BigRational as Q;

    fn row(c: &[i64], rhs: Q, sense: Sense) -> Row<Q> {
        Row::new(c.iter().map(|&v| Q::from_int(v)).collect(), rhs, sense, RowKind::Consistency, String::new())
    }

    #[test]
    fn grid_finds_feasible_points() {
        let sys = LinearSystem::new(3, vec![row(&[1, 0, 0], Q::from_ratio(1, 2), Sense::Eq)]).unwrap();
        let ans = brute_force_oracle(&sys, 2).unwrap();
        assert_eq!(ans.definite(), Some(true));
    }

    #[test]
    fn coarse_grid_is_unknown() {
        let sys = LinearSystem::new(2, vec![row(&[1, 0], Q::from_ratio(1, 2), Sense::Eq)]).unwrap();
        assert_eq!(brute_force_oracle(&sys, 1).unwrap(), OracleAnswer::Unknown);
    }

    #[test]
    fn empty_polytope_is_infeasible() {
        let sys = LinearSystem::new(
            2,
            vec![row(&[1, 0], Q::from_ratio(1, 4), Sense::Le), row(&[0, 1], Q::from_ratio(1, 2), Sense::Le)],
        )
        .unwrap();
        assert_eq!(brute_force_oracle(&sys, 12).unwrap(), OracleAnswer::Infeasible);
        let contradictory = LinearSystem::new(
            2,
            vec![row(&[1, 0], Q::from_ratio(1, 4), Sense::Eq), row(&[1, 0], Q::from_ratio(1, 3), Sense::Eq)],
        )
        .unwrap();
        assert_eq!(brute_force_oracle(&contradictory, 12).unwrap(), OracleAnswer::Infeasible);
    }

    #[test]
    fn too_many_variables() {
        let sys = LinearSystem::<Q>::new(13, vec![]).unwrap();
        assert!(brute_force_oracle(&sys, 2).is_err());
    }
}
