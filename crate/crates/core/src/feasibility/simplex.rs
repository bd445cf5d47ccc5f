//! Phase-one simplex over exact scalars with Bland's rule.

use super::{LinearSystem, Sense};
use crate::scalar::Scalar;

pub(super) enum Outcome<T> {
    Feasible(Vec<T>),
    /// Farkas multipliers, one per row of the original system.
    Infeasible(Vec<T>),
}

struct Tableau<T> {
    /// `m` constraint rows, each `ncols + 1` wide (last entry is the rhs).
    rows: Vec<Vec<T>>,
    /// Reduced costs, with `-objective` in the last slot.
    cost: Vec<T>,
    basis: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        let eliminate = |row: &mut Vec<T>| {
            let f = row[c].clone();
            if f.is_zero() {
                return;
            }
            for (v, pr) in row.iter_mut().zip(&pivot_row) {
                if !pr.is_zero() {
                    *v = v.clone() - f.clone() * pr.clone();
                }
            }
        };
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i != r {
                eliminate(row);
            }
        }
        eliminate(&mut self.cost);
        self.basis[r] = c;
    }
}

/// Minimizes the sum of one artificial per row.
///
/// Columns: the `n` structural variables, one slack per `≤` row, then the
/// `m` artificials. Rows are multiplied by `σ_i = ±1` so that every rhs is
/// nonnegative and the artificials form a feasible starting basis.
pub(super) fn phase_one<T: Scalar>(sys: &LinearSystem<T>) -> Outcome<T> {
    let n = sys.n_vars;
    let m = sys.rows.len();
    if m == 0 {
        return Outcome::Feasible(vec![T::zero(); n]);
    }
    let n_slack = sys.rows.iter().filter(|r| r.sense == Sense::Le).count();
    let art0 = n + n_slack;
    let ncols = art0 + m;

    let sigma: Vec<T> = sys.rows.iter().map(|r| if r.rhs.is_negative() { -T::one() } else { T::one() }).collect();
    let mut rows = Vec::with_capacity(m);
    let mut slack = n;
    for (i, r) in sys.rows.iter().enumerate() {
        let mut t = vec![T::zero(); ncols + 1];
        for (j, a) in r.coeffs.iter().enumerate() {
            t[j] = sigma[i].clone() * a.clone();
        }
        if r.sense == Sense::Le {
            t[slack] = sigma[i].clone();
            slack += 1;
        }
        t[art0 + i] = T::one();
        t[ncols] = sigma[i].clone() * r.rhs.clone();
        rows.push(t);
    }
    // Reduced costs of the starting basis: c_j − Σ_r T[r][j].
    let mut cost = vec![T::zero(); ncols + 1];
    for row in &rows {
        for (c, v) in cost.iter_mut().zip(row) {
            *c = c.clone() - v.clone();
        }
    }
    for c in cost.iter_mut().take(ncols).skip(art0) {
        *c = c.clone() + T::one();
    }
    let mut tab = Tableau { rows, cost, basis: (art0..ncols).collect() };

    while let Some(enter) = (0..ncols).find(|&j| tab.cost[j].is_negative()) {
        let mut leave: Option<(usize, T)> = None;
        for (r, row) in tab.rows.iter().enumerate() {
            if !row[enter].is_positive() {
                continue;
            }
            let ratio = row[ncols].clone() / row[enter].clone();
            let better = match &leave {
                None => true,
                Some((lr, best)) => ratio < *best || (ratio == *best && tab.basis[r] < tab.basis[*lr]),
            };
            if better {
                leave = Some((r, ratio));
            }
        }
        // Phase one is bounded below by zero, so some row always limits the step.
        let (r, _) = leave.expect("phase-one objective is bounded");
        tab.pivot(r, enter);
    }

    let objective = -tab.cost[ncols].clone();
    if objective.is_zero() {
        let mut p = vec![T::zero(); n];
        for (r, &b) in tab.basis.iter().enumerate() {
            if b < n {
                p[b] = tab.rows[r][ncols].clone();
            }
        }
        Outcome::Feasible(p)
    } else {
        // Dual of the normalized system: w_i = 1 − reduced cost of artificial i.
        let y = (0..m)
            .map(|i| {
                let w = T::one() - tab.cost[art0 + i].clone();
                -(sigma[i].clone() * w)
            })
            .collect();
        Outcome::Infeasible(y)
    }
}
