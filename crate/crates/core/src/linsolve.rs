//! Sparse Gaussian elimination with partial pivoting.
//!
//! Used to solve the linear systems `(I - P) x = b` of Markov chains exactly
//! (up to floating-point rounding) when an iterative bound is too close to a
//! threshold to decide a verdict. Fill-in stays small on the sparse, mostly
//! banded systems produced by the models this crate handles.

use std::collections::BTreeSet;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("matrix is singular at column {0}")]
pub struct Singular(pub usize);

/// Solves `A x = b` for a square sparse `A` given as (row, col, value)
/// triplets; duplicate triplets are summed.
pub fn solve(n: usize, triplets: &[(usize, usize, f64)], b: &[f64]) -> Result<Vec<f64>, Singular> {
    assert_eq!(b.len(), n);
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for &(r, c, v) in triplets {
        rows[r].push((c, v));
    }
    for row in &mut rows {
        row.sort_by_key(|e| e.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.len());
        for &(c, v) in row.iter() {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|e| e.1 != 0.0);
        *row = merged;
    }
    let mut cols: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &(c, _) in row {
            cols[c].insert(r);
        }
    }
    let mut rhs = b.to_vec();
    let mut pivot_row = vec![usize::MAX; n];
    let mut used = vec![false; n];
    let get = |row: &[(usize, f64)], c: usize| {
        row.binary_search_by_key(&c, |e| e.0)
            .map(|i| row[i].1)
            .unwrap_or(0.0)
    };

    for k in 0..n {
        let mut best = usize::MAX;
        let mut best_abs = 0.0;
        for &r in &cols[k] {
            let a = get(&rows[r], k).abs();
            if !used[r] && a > best_abs {
                best = r;
                best_abs = a;
            }
        }
        if best == usize::MAX || best_abs < 1e-300 {
            return Err(Singular(k));
        }
        used[best] = true;
        pivot_row[k] = best;
        let prow = std::mem::take(&mut rows[best]);
        let pval = get(&prow, k);
        let others: Vec<usize> = cols[k].iter().copied().filter(|&r| !used[r]).collect();
        for r in others {
            let factor = get(&rows[r], k) / pval;
            let old = std::mem::take(&mut rows[r]);
            let mut new = Vec::with_capacity(old.len() + prow.len());
            let (mut i, mut j) = (0, 0);
            while i < old.len() || j < prow.len() {
                let ci = old.get(i).map_or(usize::MAX, |e| e.0);
                let cj = prow.get(j).map_or(usize::MAX, |e| e.0);
                if ci < cj {
                    new.push(old[i]);
                    i += 1;
                } else if cj < ci {
                    let v = -factor * prow[j].1;
                    if v != 0.0 {
                        new.push((cj, v));
                        cols[cj].insert(r);
                    }
                    j += 1;
                } else {
                    let v = if ci == k {
                        0.0
                    } else {
                        old[i].1 - factor * prow[j].1
                    };
                    if v != 0.0 {
                        new.push((ci, v));
                    } else {
                        cols[ci].remove(&r);
                    }
                    i += 1;
                    j += 1;
                }
            }
            rows[r] = new;
            rhs[r] -= factor * rhs[best];
        }
        rows[best] = prow;
    }

    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let r = pivot_row[k];
        let mut acc = rhs[r];
        let mut diag = 0.0;
        for &(c, v) in &rows[r] {
            if c == k {
                diag = v;
            } else {
                acc -= v * x[c];
            }
        }
        x[k] = acc / diag;
    }
    Ok(x)
}
