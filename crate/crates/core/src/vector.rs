//! Dense coordinate vectors and matrices over a [`Scalar`].

use std::fmt;
use std::ops::{Add, Deref, DerefMut, Index, IndexMut, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::{Scalar, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct Vector<S>(pub Vec<S>);

pub type VecQ = Vector<Q>;
pub type VecF = Vector<f64>;

impl<S: Scalar> Vector<S> {
    pub fn zeros(n: usize) -> Self {
        Vector(vec![S::zero(); n])
    }

    pub fn basis(n: usize, i: usize) -> Self {
        let mut v = Self::zeros(n);
        v.0[i] = S::one();
        v
    }

    pub fn from_slice(x: &[S]) -> Self {
        Vector(x.to_vec())
    }

    pub fn from_q(x: &[Q]) -> Self {
        Vector(x.iter().map(S::from_q).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|x| x.is_zero())
    }

    pub fn scale(&self, s: &S) -> Self {
        Vector(self.0.iter().map(|x| x.clone() * s.clone()).collect())
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: &S, other: &Self) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            if !b.is_zero() {
                *a = a.clone() + s.clone() * b.clone();
            }
        }
    }

    pub fn dot(&self, other: &Self) -> S {
        self.0
            .iter()
            .zip(&other.0)
            .fold(S::zero(), |acc, (a, b)| acc + a.clone() * b.clone())
    }

    pub fn to_f64(&self) -> VecF {
        Vector(self.0.iter().map(|x| x.to_f64()).collect())
    }

    /// Euclidean norm, evaluated in `f64`.
    pub fn norm(&self) -> f64 {
        self.0
            .iter()
            .map(|x| {
                let f = x.to_f64();
                f * f
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|x| x.magnitude()).fold(0.0, f64::max)
    }

    pub fn check_dim(&self, n: usize) -> Result<()> {
        if self.dim() == n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: n,
                got: self.dim(),
            })
        }
    }
}

impl VecF {
    pub fn to_q(&self) -> VecQ {
        Vector(self.0.iter().map(|&x| crate::scalar::q_from_f64(x)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl<S> Deref for Vector<S> {
    type Target = [S];
    fn deref(&self) -> &[S] {
        &self.0
    }
}

impl<S> DerefMut for Vector<S> {
    fn deref_mut(&mut self) -> &mut [S] {
        &mut self.0
    }
}

impl<S: Scalar> Add for &Vector<S> {
    type Output = Vector<S>;
    fn add(self, rhs: &Vector<S>) -> Vector<S> {
        Vector(
            self.0
                .iter()
                .zip(&rhs.0)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        )
    }
}

impl<S: Scalar> Sub for &Vector<S> {
    type Output = Vector<S>;
    fn sub(self, rhs: &Vector<S>) -> Vector<S> {
        Vector(
            self.0
                .iter()
                .zip(&rhs.0)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        )
    }
}

impl<S: Scalar> Add for Vector<S> {
    type Output = Vector<S>;
    fn add(self, rhs: Vector<S>) -> Vector<S> {
        &self + &rhs
    }
}

impl<S: Scalar> Sub for Vector<S> {
    type Output = Vector<S>;
    fn sub(self, rhs: Vector<S>) -> Vector<S> {
        &self - &rhs
    }
}

impl<S: Scalar> Neg for &Vector<S> {
    type Output = Vector<S>;
    fn neg(self) -> Vector<S> {
        Vector(self.0.iter().map(|a| -a.clone()).collect())
    }
}

impl<S: Scalar> Neg for Vector<S> {
    type Output = Vector<S>;
    fn neg(self) -> Vector<S> {
        -&self
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

pub type MatQ = Matrix<Q>;
pub type MatF = Matrix<f64>;

impl<S: Scalar> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn diagonal(d: &[S]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m[(i, i)] = x.clone();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Parse("matrix rows have unequal lengths".into()));
        }
        Ok(Matrix {
            rows: r,
            cols: c,
            data: rows.iter().flatten().cloned().collect(),
        })
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vector<S>], rows: usize) -> Self {
        let mut m = Self::zeros(rows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            for i in 0..rows {
                m[(i, j)] = c[i].clone();
            }
        }
        m
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> Vector<S> {
        Vector(self.data[i * self.cols..(i + 1) * self.cols].to_vec())
    }

    pub fn column(&self, j: usize) -> Vector<S> {
        Vector((0..self.rows).map(|i| self[(i, j)].clone()).collect())
    }

    pub fn mul_vec(&self, v: &[S]) -> Vector<S> {
        assert_eq!(v.len(), self.cols, "matrix/vector dimension mismatch");
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut acc = S::zero();
            for (j, x) in v.iter().enumerate() {
                let a = &self.data[i * self.cols + j];
                if !a.is_zero() && !x.is_zero() {
                    acc = acc + a.clone() * x.clone();
                }
            }
            out.push(acc);
        }
        Vector(out)
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix dimension mismatch");
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self.data[i * self.cols + k];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let b = &other.data[k * other.cols + j];
                    if !b.is_zero() {
                        let cur = m.data[i * other.cols + j].clone();
                        m.data[i * other.cols + j] = cur + a.clone() * b.clone();
                    }
                }
            }
        }
        m
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].clone();
            }
        }
        m
    }

    pub fn scale(&self, s: &S) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.clone() * s.clone()).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| a.clone() - b.clone())
                .collect(),
        }
    }

    /// Sub-matrix with the given row and column indices.
    pub fn select(&self, rows: &[usize], cols: &[usize]) -> Self {
        let mut m = Self::zeros(rows.len(), cols.len());
        for (a, &i) in rows.iter().enumerate() {
            for (b, &j) in cols.iter().enumerate() {
                m[(a, b)] = self[(i, j)].clone();
            }
        }
        m
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn is_identity(&self) -> bool {
        self.is_square()
            && (0..self.rows).all(|i| {
                (0..self.cols).all(|j| {
                    let x = &self[(i, j)];
                    if i == j {
                        x.is_one()
                    } else {
                        x.is_zero()
                    }
                })
            })
    }

    /// Gauss-Jordan inverse with partial pivoting; `None` when singular.
    /// Float pivots below `1e-13` times the largest entry count as zero.
    pub fn inverse(&self) -> Option<Self> {
        if !self.is_square() {
            return None;
        }
        let n = self.rows;
        let scale = self.data.iter().map(|x| x.magnitude()).fold(0.0, f64::max);
        let tol = 1e-13 * scale.max(f64::MIN_POSITIVE);
        let mut a = self.clone();
        let mut inv = Self::identity(n);
        for col in 0..n {
            let piv = (col..n)
                .filter(|&r| !a[(r, col)].is_negligible(tol))
                .max_by(|&x, &y| {
                    a[(x, col)]
                        .magnitude()
                        .partial_cmp(&a[(y, col)].magnitude())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })?;
            a.swap_rows(piv, col);
            inv.swap_rows(piv, col);
            let p = a[(col, col)].clone();
            for j in 0..n {
                a[(col, j)] = a[(col, j)].clone() / p.clone();
                inv[(col, j)] = inv[(col, j)].clone() / p.clone();
            }
            for r in 0..n {
                if r == col || a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone();
                for j in 0..n {
                    a[(r, j)] = a[(r, j)].clone() - f.clone() * a[(col, j)].clone();
                    inv[(r, j)] = inv[(r, j)].clone() - f.clone() * inv[(col, j)].clone();
                }
            }
        }
        Some(inv)
    }

    /// Determinant by elimination.
    pub fn determinant(&self) -> S {
        assert!(self.is_square(), "determinant of a non-square matrix");
        let n = self.rows;
        let mut a = self.clone();
        let mut det = S::one();
        for col in 0..n {
            let piv = (col..n)
                .filter(|&r| !a[(r, col)].is_zero())
                .max_by(|&x, &y| {
                    a[(x, col)]
                        .magnitude()
                        .partial_cmp(&a[(y, col)].magnitude())
                        .unwrap_or(std::cmp::Ordering::Equal)
                });
            let Some(piv) = piv else {
                return S::zero();
            };
            if piv != col {
                a.swap_rows(piv, col);
                det = -det;
            }
            let p = a[(col, col)].clone();
            det = det * p.clone();
            for r in col + 1..n {
                if a[(r, col)].is_zero() {
                    continue;
                }
                let f = a[(r, col)].clone() / p.clone();
                for j in col..n {
                    a[(r, j)] = a[(r, j)].clone() - f.clone() * a[(col, j)].clone();
                }
            }
        }
        det
    }

    fn swap_rows(&mut self, a: usize, b: usize) {
        if a == b {
            return;
        }
        for j in 0..self.cols {
            self.data.swap(a * self.cols + j, b * self.cols + j);
        }
    }

    pub fn to_f64(&self) -> MatF {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|x| x.to_f64()).collect(),
        }
    }

    pub fn from_q(m: &MatQ) -> Self {
        Matrix {
            rows: m.rows,
            cols: m.cols,
            data: m.data.iter().map(S::from_q).collect(),
        }
    }

    pub fn rows_vec(&self) -> Vec<Vec<S>> {
        (0..self.rows).map(|i| self.row(i).0).collect()
    }
}

impl MatF {
    /// Spectral norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        if self.rows == 0 || self.cols == 0 {
            return 0.0;
        }
        let m = nalgebra::DMatrix::from_row_slice(self.rows, self.cols, &self.data);
        m.singular_values().max()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// `(a, b, c)`.
impl<S: fmt::Display> fmt::Display for Vector<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, x) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            x.fmt(f)?;
        }
        write!(f, ")")
    }
}

/// One bracketed row per line.
impl<S: fmt::Display> fmt::Display for Matrix<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.rows {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ", ")?;
                }
                self.data[i * self.cols + j].fmt(f)?;
            }
            write!(f, "]")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};

    #[test]
    fn exact_inverse() {
        let m = MatQ::from_rows(&[vec![qi(2), qi(1)], vec![qi(1), qi(1)]]).unwrap();
        let inv = m.inverse().unwrap();
        assert!(m.mul(&inv).is_identity());
        assert_eq!(m.determinant(), qi(1));
    }

    #[test]
    fn singular_has_no_inverse() {
        let m = MatQ::from_rows(&[vec![qi(1), qi(2)], vec![q(1, 2), qi(1)]]).unwrap();
        assert!(m.inverse().is_none());
        assert_eq!(m.determinant(), qi(0));
    }

    #[test]
    fn operator_norm_of_diagonal() {
        let m = MatF::diagonal(&[3.0, -5.0, 1.0]);
        assert!((m.operator_norm() - 5.0).abs() < 1e-12);
    }
}
