//! Dense two-phase primal simplex with dual values.
//!
//! Solves `minimize c·x subject to A x (≤ | = | ≥) b, x ≥ 0`. Meant for the
//! small reduced programs of cost synthesis, where the number of columns is
//! the number of controllable parameters plus one. Pivoting follows Bland's
//! rule, so the method terminates on degenerate programs.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("the LP is infeasible")]
    Infeasible,
    #[error("the LP is unbounded")]
    Unbounded,
    #[error("the simplex method exceeded {0} pivots")]
    IterationLimit(usize),
}

#[derive(Debug, Clone, Default)]
pub struct Lp {
    pub objective: Vec<f64>,
    pub rows: Vec<(Vec<f64>, Cmp, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    /// One multiplier per row; `objective = b·duals` at the optimum.
    pub duals: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

impl LpSolution {
    /// `|c·x − b·y|`, the gap between the primal and dual objectives.
    pub fn duality_gap(&self, lp: &Lp) -> f64 {
        let dual: f64 = lp.rows.iter().zip(&self.duals).map(|(r, y)| r.2 * y).sum();
        (self.objective - dual).abs()
    }
}

const TOL: f64 = 1e-10;

impl Lp {
    pub fn new(objective: Vec<f64>) -> Self {
        Lp {
            objective,
            rows: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_row(&mut self, coefs: Vec<f64>, cmp: Cmp, rhs: f64) {
        assert_eq!(coefs.len(), self.num_vars(), "row width");
        self.rows.push((coefs, cmp, rhs));
    }

    pub fn solve(&self) -> Result<LpSolution, LpError> {
        let n = self.num_vars();
        let m = self.rows.len();
        // column layout: structural | one slack per inequality | one artificial per row
        let mut sign = vec![1.0; m];
        let mut cmp = Vec::with_capacity(m);
        for (i, (_, c, b)) in self.rows.iter().enumerate() {
            let flip = *b < 0.0;
            if flip {
                sign[i] = -1.0;
            }
            cmp.push(match (c, flip) {
                (Cmp::Le, false) | (Cmp::Ge, true) => Cmp::Le,
                (Cmp::Ge, false) | (Cmp::Le, true) => Cmp::Ge,
                (Cmp::Eq, _) => Cmp::Eq,
            });
        }
        let slack_of: Vec<Option<usize>> = {
            let mut next = n;
            cmp.iter()
                .map(|c| match c {
                    Cmp::Eq => None,
                    _ => {
                        next += 1;
                        Some(next - 1)
                    }
                })
                .collect()
        };
        let first_art = n + slack_of.iter().flatten().count();
        let width = first_art + m;
        let mut t = vec![vec![0.0; width + 1]; m + 1];
        let mut basis = vec![0; m];
        // unit column that started out basic in each row
        let mut unit = vec![0; m];
        for i in 0..m {
            let (a, _, b) = &self.rows[i];
            for j in 0..n {
                t[i][j] = sign[i] * a[j];
            }
            t[i][width] = sign[i] * b;
            let art = first_art + i;
            match (cmp[i], slack_of[i]) {
                (Cmp::Le, Some(sl)) => {
                    t[i][sl] = 1.0;
                    basis[i] = sl;
                }
                (Cmp::Ge, Some(sl)) => {
                    t[i][sl] = -1.0;
                    t[i][art] = 1.0;
                    basis[i] = art;
                }
                _ => {
                    t[i][art] = 1.0;
                    basis[i] = art;
                }
            }
            unit[i] = basis[i];
        }

        let limit = 50 * (m + width) + 1000;
        let mut pivots = 0;
        // phase 1: minimize the sum of artificials
        let mut cost1 = vec![0.0; width];
        for c in cost1.iter_mut().skip(first_art) {
            *c = 1.0;
        }
        set_objective(&mut t, &basis, &cost1);
        run(&mut t, &mut basis, width, &mut pivots, limit)?;
        if -t[m][width] > 1e-9 * (1.0 + self.rows.iter().map(|r| r.2.abs()).sum::<f64>()) {
            return Err(LpError::Infeasible);
        }
        // move artificials out of the basis where possible
        for i in 0..m {
            if basis[i] >= first_art {
                if let Some(j) = (0..first_art).find(|&j| t[i][j].abs() > 1e-9) {
                    pivot(&mut t, &mut basis, i, j);
                    pivots += 1;
                }
            }
        }
        // phase 2 over the structural and slack columns
        let mut cost2 = vec![0.0; width];
        cost2[..n].copy_from_slice(&self.objective);
        set_objective(&mut t, &basis, &cost2);
        run(&mut t, &mut basis, first_art, &mut pivots, limit)?;

        let mut x = vec![0.0; n];
        for i in 0..m {
            if basis[i] < n {
                x[basis[i]] = t[i][width];
            }
        }
        // reduced cost of an initial unit column is its cost minus the dual
        let duals = (0..m)
            .map(|i| sign[i] * (cost2[unit[i]] - t[m][unit[i]]))
            .collect();
        let objective = self.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
        Ok(LpSolution {
            x,
            duals,
            objective,
            pivots,
        })
    }
}

fn set_objective(t: &mut [Vec<f64>], basis: &[usize], cost: &[f64]) {
    let m = basis.len();
    let width = cost.len();
    let mut z = vec![0.0; width + 1];
    z[..width].copy_from_slice(cost);
    for i in 0..m {
        let cb = cost[basis[i]];
        if cb != 0.0 {
            for j in 0..=width {
                z[j] -= cb * t[i][j];
            }
        }
    }
    t[m] = z;
}

fn run(
    t: &mut [Vec<f64>],
    basis: &mut [usize],
    eligible: usize,
    pivots: &mut usize,
    limit: usize,
) -> Result<(), LpError> {
    let m = basis.len();
    let rhs = t[0].len() - 1;
    loop {
        let Some(enter) = (0..eligible).find(|&j| t[m][j] < -TOL) else {
            return Ok(());
        };
        let mut leave = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            if t[i][enter] > TOL {
                let ratio = t[i][rhs] / t[i][enter];
                let take = match leave {
                    None => true,
                    Some(l) => {
                        ratio < best - 1e-12 || (ratio <= best + 1e-12 && basis[i] < basis[l])
                    }
                };
                if take {
                    leave = Some(i);
                    best = ratio;
                }
            }
        }
        let Some(row) = leave else {
            return Err(LpError::Unbounded);
        };
        pivot(t, basis, row, enter);
        *pivots += 1;
        if *pivots > limit {
            return Err(LpError::IterationLimit(limit));
        }
    }
}

fn pivot(t: &mut [Vec<f64>], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col];
    for v in t[row].iter_mut() {
        *v /= p;
    }
    let prow = t[row].clone();
    for (i, r) in t.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let f = r[col];
        if f != 0.0 {
            for (v, pv) in r.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
            r[col] = 0.0;
        }
    }
    basis[row] = col;
}

/// Builds a constraint for the external solver, summing repeated variables.
#[derive(Debug, Default)]
pub(crate) struct RowBuilder(std::collections::BTreeMap<microlp::Variable, f64>);

impl RowBuilder {
    pub(crate) fn add(&mut self, v: microlp::Variable, coef: f64) {
        *self.0.entry(v).or_insert(0.0) += coef;
    }

    pub(crate) fn finish(self) -> microlp::LinearExpr {
        let mut e = microlp::LinearExpr::empty();
        for (v, c) in self.0 {
            if c != 0.0 {
                e.add(v, c);
            }
        }
        e
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn textbook_example() {
        // max 3x + 5y st x ≤ 4, 2y ≤ 12, 3x + 2y ≤ 18 -> (2, 6), 36
        let mut lp = Lp::new(vec![-3.0, -5.0]);
        lp.add_row(vec![1.0, 0.0], Cmp::Le, 4.0);
        lp.add_row(vec![0.0, 2.0], Cmp::Le, 12.0);
        lp.add_row(vec![3.0, 2.0], Cmp::Le, 18.0);
        let s = lp.solve().unwrap();
        assert!((s.x[0] - 2.0).abs() < 1e-12 && (s.x[1] - 6.0).abs() < 1e-12);
        assert!((s.objective + 36.0).abs() < 1e-12);
        assert!(s.duality_gap(&lp) < 1e-12);
        assert!((s.duals[1] + 1.5).abs() < 1e-12 && (s.duals[2] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn equality_and_lower_bounds() {
        // min x + y st x + y = 3, x ≥ 1, y ≥ 1.5
        let mut lp = Lp::new(vec![1.0, 1.0]);
        lp.add_row(vec![1.0, 1.0], Cmp::Eq, 3.0);
        lp.add_row(vec![1.0, 0.0], Cmp::Ge, 1.0);
        lp.add_row(vec![0.0, 1.0], Cmp::Ge, 1.5);
        let s = lp.solve().unwrap();
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!(s.duality_gap(&lp) < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let mut lp = Lp::new(vec![1.0]);
        lp.add_row(vec![1.0], Cmp::Le, 1.0);
        lp.add_row(vec![1.0], Cmp::Ge, 2.0);
        assert_eq!(lp.solve(), Err(LpError::Infeasible));
        let mut lp = Lp::new(vec![-1.0]);
        lp.add_row(vec![1.0], Cmp::Ge, 2.0);
        assert_eq!(lp.solve(), Err(LpError::Unbounded));
    }

    proptest! {
        #[test]
        fn agrees_with_microlp(
            rows in proptest::collection::vec((proptest::collection::vec(-3.0f64..3.0, 3), 0u8..3, -5.0f64..5.0), 1..8),
            c in proptest::collection::vec(-2.0f64..2.0, 3),
        ) {
            use microlp::{ComparisonOp, OptimizationDirection, Problem};
            let mut lp = Lp::new(c.clone());
            let mut reference = Problem::new(OptimizationDirection::Minimize);
            let vars: Vec<_> = c.iter().map(|&ci| reference.add_var(ci, (0.0, 10.0))).collect();
            for j in 0..3 {
                let mut e = vec![0.0; 3];
                e[j] = 1.0;
                lp.add_row(e, Cmp::Le, 10.0);
            }
            for (a, k, b) in &rows {
                let (cmp, op) = match k {
                    0 => (Cmp::Le, ComparisonOp::Le),
                    1 => (Cmp::Ge, ComparisonOp::Ge),
                    _ => (Cmp::Eq, ComparisonOp::Eq),
                };
                lp.add_row(a.clone(), cmp, *b);
                let expr: Vec<_> = vars.iter().copied().zip(a.iter().copied()).collect();
                reference.add_constraint(&expr[..], op, *b);
            }
            match (lp.solve(), reference.solve().map(|o| o.into_solution())) {
                (Ok(s), Ok(Ok(r))) => {
                    prop_assert!((s.objective - r.objective()).abs() < 1e-7, "{} vs {}", s.objective, r.objective());
                    prop_assert!(s.duality_gap(&lp) < 1e-7);
                }
                (Err(LpError::Infeasible), Err(microlp::Error::Infeasible)) => {}
                (a, b) => prop_assert!(false, "{a:?} vs {b:?}"),
            }
        }
    }
}
