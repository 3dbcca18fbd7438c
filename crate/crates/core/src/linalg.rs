//! Exact row reduction over the rationals.

use num_traits::Zero;

use crate::scalar::Q;
use crate::vector::{VecQ, Vector};

/// Reduced row echelon form of the given rows.
///
/// Returns the nonzero rows of the reduced matrix and the pivot column of each.
pub fn rref(rows: &[VecQ], ncols: usize) -> (Vec<VecQ>, Vec<usize>) {
    let mut m: Vec<VecQ> = rows.iter().filter(|r| !r.is_zero()).cloned().collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let inv = m[r][col].recip();
        m[r] = m[r].scale(&inv);
        let pivot_row = m[r].clone();
        for (i, row) in m.iter_mut().enumerate() {
            if i != r && !row[col].is_zero() {
                let f = -row[col].clone();
                row.axpy(&f, &pivot_row);
            }
        }
        pivots.push(col);
        r += 1;
    }
    m.truncate(r);
    (m, pivots)
}

pub fn rank(rows: &[VecQ], ncols: usize) -> usize {
    rref(rows, ncols).1.len()
}

/// Basis of `{x : M x = 0}` where `M` has the given rows.
pub fn nullspace(rows: &[VecQ], ncols: usize) -> Vec<VecQ> {
    let (red, pivots) = rref(rows, ncols);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = VecQ::zeros(ncols);
            x[f] = crate::scalar::qi(1);
            for (row, &p) in red.iter().zip(&pivots) {
                x[p] = -row[f].clone();
            }
            x
        })
        .collect()
}

/// Coefficients `a` with `sum_k a_k us[k] = v`, if any exist.
pub fn solve_combination(us: &[VecQ], v: &VecQ) -> Option<Vec<Q>> {
    let n = v.dim();
    let m = us.len();
    // Augmented system: one equation per coordinate, unknowns a_0..a_{m-1}, then rhs.
    let rows: Vec<VecQ> = (0..n)
        .map(|i| {
            let mut row: Vec<Q> = us.iter().map(|u| u[i].clone()).collect();
            row.push(v[i].clone());
            Vector(row)
        })
        .collect();
    let (red, pivots) = rref(&rows, m + 1);
    if pivots.contains(&m) {
        return None;
    }
    let mut a = vec![Q::zero(); m];
    for (row, &p) in red.iter().zip(&pivots) {
        a[p] = row[m].clone();
    }
    Some(a)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qi;

    fn v(x: &[i64]) -> VecQ {
        Vector(x.iter().map(|&a| qi(a)).collect())
    }

    #[test]
    fn rref_and_rank() {
        let rows = vec![v(&[1, 2, 3]), v(&[2, 4, 6]), v(&[0, 1, 1])];
        let (red, piv) = rref(&rows, 3);
        assert_eq!(piv, vec![0, 1]);
        assert_eq!(red[0], v(&[1, 0, 1]));
        assert_eq!(red[1], v(&[0, 1, 1]));
    }

    #[test]
    fn nullspace_is_annihilated() {
        let rows = vec![v(&[1, 2, 3]), v(&[0, 1, 1])];
        let ns = nullspace(&rows, 3);
        assert_eq!(ns.len(), 1);
        for r in &rows {
            assert!(r.dot(&ns[0]).is_zero());
        }
    }

    #[test]
    fn combination_solving() {
        let us = vec![v(&[1, 0, 1]), v(&[0, 1, 1])];
        let a = solve_combination(&us, &v(&[2, 3, 5])).unwrap();
        assert_eq!(a, vec![qi(2), qi(3)]);
        assert!(solve_combination(&us, &v(&[0, 0, 1])).is_none());
    }
}
