//! Graded nilpotent Lie algebras given by rational structure constants,
//! together with a diagonal derivation `D e_i = lambda_i e_i`.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::{rank, rref};
use crate::scalar::{Scalar, Q};
use crate::vector::{VecF, VecQ, Vector};

/// One structure constant: `[e_i, e_j]` has coefficient `coeff` on `e_k`, with `i < j`.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketEntry {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub coeff: Q,
}

/// Coordinates sharing one derivation weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Layer {
    pub weight: Q,
    pub indices: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct GradedAlgebra {
    labels: Vec<String>,
    weights: Vec<Q>,
    entries: Vec<BracketEntry>,
    coeffs_q: Vec<Q>,
    coeffs_f64: Vec<f64>,
    layers: Vec<Layer>,
    step: Option<usize>,
}

impl GradedAlgebra {
    /// Builds an algebra from raw data. Only syntactic checks happen here;
    /// see [`GradedAlgebra::validate`] for Jacobi, grading and nilpotency.
    pub fn new(labels: Vec<String>, weights: Vec<Q>, entries: Vec<BracketEntry>) -> Result<Self> {
        let n = weights.len();
        if labels.len() != n {
            return Err(Error::InvalidAlgebra(format!(
                "{} labels for {} basis vectors",
                labels.len(),
                n
            )));
        }
        if n == 0 {
            return Err(Error::InvalidAlgebra("empty basis".into()));
        }
        if let Some(i) = weights.iter().position(Zero::is_zero) {
            return Err(Error::InvalidAlgebra(format!("weight of `{}` is zero", labels[i])));
        }
        let mut names = std::collections::BTreeSet::new();
        if let Some(dup) = labels.iter().find(|l| !names.insert(l.as_str())) {
            return Err(Error::InvalidAlgebra(format!("duplicate label `{dup}`")));
        }
        let mut seen = std::collections::BTreeSet::new();
        let mut kept = Vec::with_capacity(entries.len());
        for e in entries {
            if e.i >= n || e.j >= n || e.k >= n {
                return Err(Error::InvalidAlgebra(format!(
                    "bracket index out of range in ({}, {}, {})",
                    e.i, e.j, e.k
                )));
            }
            if e.i >= e.j {
                return Err(Error::InvalidAlgebra(format!(
                    "bracket ({}, {}) must have i < j",
                    e.i, e.j
                )));
            }
            if !seen.insert((e.i, e.j, e.k)) {
                return Err(Error::InvalidAlgebra(format!(
                    "duplicate bracket entry ({}, {}, {})",
                    e.i, e.j, e.k
                )));
            }
            if !e.coeff.is_zero() {
                kept.push(e);
            }
        }
        let mut by_weight: BTreeMap<Q, Vec<usize>> = BTreeMap::new();
        for (i, w) in weights.iter().enumerate() {
            by_weight.entry(w.clone()).or_default().push(i);
        }
        let layers = by_weight
            .into_iter()
            .map(|(weight, indices)| Layer { weight, indices })
            .collect();
        let coeffs_q: Vec<Q> = kept.iter().map(|e| e.coeff.clone()).collect();
        let coeffs_f64 = coeffs_q.iter().map(f64::from_q).collect();
        let mut alg = GradedAlgebra {
            labels,
            weights,
            entries: kept,
            coeffs_q,
            coeffs_f64,
            layers,
            step: None,
        };
        alg.step = alg.compute_step();
        Ok(alg)
    }

    pub fn builder() -> AlgebraBuilder {
        AlgebraBuilder::default()
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &Q {
        &self.weights[i]
    }

    pub fn entries(&self) -> &[BracketEntry] {
        &self.entries
    }

    /// Distinct weights in increasing order with their coordinates.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layer(&self, weight: &Q) -> Option<&Layer> {
        self.layers.iter().find(|l| &l.weight == weight)
    }

    /// Nilpotency step, `None` if the algebra is not nilpotent.
    pub fn step(&self) -> Option<usize> {
        self.step
    }

    pub fn min_weight(&self) -> &Q {
        &self.layers[0].weight
    }

    pub fn has_positive_weights(&self) -> bool {
        self.weights.iter().all(Signed::is_positive)
    }

    /// Lie bracket in coordinates.
    pub fn bracket<S: Scalar>(&self, x: &[S], y: &[S]) -> Result<Vector<S>> {
        let n = self.dim();
        for v in [x, y] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: v.len(),
                });
            }
        }
        Ok(self.br(x, y))
    }

    pub(crate) fn br<S: Scalar>(&self, x: &[S], y: &[S]) -> Vector<S> {
        let coeffs = S::pick(&self.coeffs_q, &self.coeffs_f64);
        let mut out = Vector::<S>::zeros(self.dim());
        for (e, c) in self.entries.iter().zip(coeffs) {
            let a = if x[e.i].is_zero() || y[e.j].is_zero() {
                None
            } else {
                Some(x[e.i].clone() * y[e.j].clone())
            };
            let b = if x[e.j].is_zero() || y[e.i].is_zero() {
                None
            } else {
                Some(x[e.j].clone() * y[e.i].clone())
            };
            let t = match (a, b) {
                (None, None) => continue,
                (Some(a), None) => a,
                (None, Some(b)) => -b,
                (Some(a), Some(b)) => a - b,
            };
            out[e.k] = out[e.k].clone() + c.clone() * t;
        }
        out
    }

    pub fn basis_vector<S: Scalar>(&self, i: usize) -> Vector<S> {
        Vector::basis(self.dim(), i)
    }

    /// Component of `x` in the weight-`w` eigenspace.
    pub fn layer_project<S: Scalar>(&self, x: &[S], w: &Q) -> Vector<S> {
        let mut out = Vector::<S>::zeros(self.dim());
        if let Some(l) = self.layer(w) {
            for &i in &l.indices {
                out[i] = x[i].clone();
            }
        }
        out
    }

    fn compute_step(&self) -> Option<usize> {
        let n = self.dim();
        let mut current: Vec<VecQ> = (0..n).map(|i| self.basis_vector(i)).collect();
        let mut current_rank = n;
        let mut step = 0;
        while current_rank > 0 {
            step += 1;
            let mut next = Vec::new();
            for i in 0..n {
                let ei: VecQ = self.basis_vector(i);
                for v in &current {
                    let b = self.br(&ei, v);
                    if !b.is_zero() {
                        next.push(b);
                    }
                }
            }
            let (red, _) = rref(&next, n);
            if red.len() == current_rank {
                return None;
            }
            current_rank = red.len();
            current = red;
        }
        Some(step)
    }

    pub fn validate(&self) -> ValidationReport {
        validate_algebra(self)
    }

    /// Smallest subalgebra containing the given vectors.
    pub fn subalgebra_generated(&self, seeds: &[VecQ]) -> Subspace {
        let n = self.dim();
        let mut space = Subspace::span(n, seeds);
        loop {
            let basis = space.basis().to_vec();
            let mut all = basis.clone();
            for (a, x) in basis.iter().enumerate() {
                for y in &basis[a + 1..] {
                    let b = self.br(x, y);
                    if !space.contains(&b) {
                        all.push(b);
                    }
                }
            }
            let next = Subspace::span(n, &all);
            if next.dim() == space.dim() {
                return space;
            }
            space = next;
        }
    }

    pub fn is_subalgebra(&self, s: &Subspace) -> bool {
        let b = s.basis();
        b.iter()
            .enumerate()
            .all(|(a, x)| b[a + 1..].iter().all(|y| s.contains(&self.br(x, y))))
    }

    pub fn is_ideal(&self, s: &Subspace) -> bool {
        (0..self.dim()).all(|i| {
            let ei: VecQ = self.basis_vector(i);
            s.basis().iter().all(|v| s.contains(&self.br(&ei, v)))
        })
    }

    /// Centre of a subalgebra, with its slices by derivation weight.
    pub fn center_of(&self, s: &Subspace) -> Result<Center> {
        if !self.is_subalgebra(s) {
            return Err(Error::NotSubalgebra);
        }
        let n = self.dim();
        let basis = s.basis();
        let m = basis.len();
        // Unknown a in Q^m; sum_k a_k [b_k, b_l] = 0 for every l and coordinate.
        let brackets: Vec<Vec<VecQ>> = basis
            .iter()
            .map(|bk| basis.iter().map(|bl| self.br(bk, bl)).collect())
            .collect();
        let mut rows = Vec::new();
        for l in 0..m {
            for c in 0..n {
                let row: Vec<Q> = (0..m).map(|k| brackets[k][l][c].clone()).collect();
                if row.iter().any(|x| !x.is_zero()) {
                    rows.push(Vector(row));
                }
            }
        }
        let coeffs = crate::linalg::nullspace(&rows, m);
        let vecs: Vec<VecQ> = coeffs
            .iter()
            .map(|a| {
                let mut v = VecQ::zeros(n);
                for (ak, bk) in a.iter().zip(basis) {
                    v.axpy(ak, bk);
                }
                v
            })
            .collect();
        let space = Subspace::span(n, &vecs);
        let slices = self
            .layers
            .iter()
            .filter_map(|l| {
                let slice = space.weight_slice(self, &l.weight);
                (slice.dim() > 0).then(|| (l.weight.clone(), slice))
            })
            .collect();
        Ok(Center { space, slices })
    }

    /// Quotient by a graded ideal, realised on the coordinates that are not
    /// pivots of the ideal's reduced basis.
    pub fn quotient(&self, ideal: &Subspace) -> Result<Quotient> {
        if !self.is_ideal(ideal) {
            return Err(Error::NotIdeal);
        }
        if !ideal.is_graded(self) {
            return Err(Error::NotGraded);
        }
        let n = self.dim();
        let kept = ideal.complement_indices();
        let dq = kept.len();
        if dq == 0 {
            return Err(Error::InvalidAlgebra("quotient is trivial".into()));
        }
        let mut proj_q = vec![Q::zero(); dq * n];
        for i in 0..n {
            let r = ideal.reduce(&self.basis_vector(i));
            for (a, &c) in kept.iter().enumerate() {
                proj_q[a * n + i] = r[c].clone();
            }
        }
        let proj_f64 = proj_q.iter().map(f64::from_q).collect();
        let mut entries = Vec::new();
        for a in 0..dq {
            for b in a + 1..dq {
                let br = self.br(
                    &self.basis_vector::<Q>(kept[a]),
                    &self.basis_vector::<Q>(kept[b]),
                );
                for c in 0..dq {
                    let coeff = (0..n).fold(Q::zero(), |acc, i| {
                        if br[i].is_zero() {
                            acc
                        } else {
                            acc + proj_q[c * n + i].clone() * br[i].clone()
                        }
                    });
                    if !coeff.is_zero() {
                        entries.push(BracketEntry { i: a, j: b, k: c, coeff });
                    }
                }
            }
        }
        let algebra = GradedAlgebra::new(
            kept.iter().map(|&i| self.labels[i].clone()).collect(),
            kept.iter().map(|&i| self.weights[i].clone()).collect(),
            entries,
        )?;
        Ok(Quotient {
            algebra,
            ideal: ideal.clone(),
            kept,
            ambient: n,
            proj_q,
            proj_f64,
        })
    }

    /// Same structure constants with every weight multiplied by `factor`.
    pub fn rescaled(&self, factor: &Q) -> Result<GradedAlgebra> {
        GradedAlgebra::new(
            self.labels.clone(),
            self.weights.iter().map(|w| w.clone() * factor.clone()).collect(),
            self.entries.clone(),
        )
    }
}

#[derive(Clone, Debug, Default)]
pub struct AlgebraBuilder {
    labels: Vec<String>,
    weights: Vec<Q>,
    brackets: Vec<(String, String, String, Q)>,
}

impl AlgebraBuilder {
    pub fn basis(mut self, label: &str, weight: Q) -> Self {
        self.labels.push(label.to_string());
        self.weights.push(weight);
        self
    }

    /// Adds `coeff * c` to `[a, b]`; the order of `a` and `b` is free.
    pub fn bracket(mut self, a: &str, b: &str, c: &str, coeff: Q) -> Self {
        self.brackets
            .push((a.to_string(), b.to_string(), c.to_string(), coeff));
        self
    }

    pub fn build(self) -> Result<GradedAlgebra> {
        let find = |l: &str| {
            self.labels
                .iter()
                .position(|x| x == l)
                .ok_or_else(|| Error::InvalidAlgebra(format!("unknown label `{l}`")))
        };
        let mut acc: BTreeMap<(usize, usize, usize), Q> = BTreeMap::new();
        for (a, b, c, coeff) in &self.brackets {
            let (i, j, k) = (find(a)?, find(b)?, find(c)?);
            if i == j {
                return Err(Error::InvalidAlgebra(format!("bracket of `{a}` with itself")));
            }
            let (key, val) = if i < j {
                ((i, j, k), coeff.clone())
            } else {
                ((j, i, k), -coeff.clone())
            };
            let e = acc.entry(key).or_insert_with(Q::zero);
            *e = e.clone() + val;
        }
        let entries = acc
            .into_iter()
            .map(|((i, j, k), coeff)| BracketEntry { i, j, k, coeff })
            .collect();
        GradedAlgebra::new(self.labels, self.weights, entries)
    }
}

/// A linear subspace of `Q^n`, stored as its reduced row echelon basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    ambient: usize,
    rows: Vec<VecQ>,
    rows_f64: Vec<VecF>,
    pivots: Vec<usize>,
}

impl Subspace {
    pub fn span(ambient: usize, vecs: &[VecQ]) -> Self {
        let (rows, pivots) = rref(vecs, ambient);
        let rows_f64 = rows.iter().map(|r| r.to_f64()).collect();
        Subspace {
            ambient,
            rows,
            rows_f64,
            pivots,
        }
    }

    pub fn zero(ambient: usize) -> Self {
        Subspace {
            ambient,
            rows: Vec::new(),
            rows_f64: Vec::new(),
            pivots: Vec::new(),
        }
    }

    pub fn full(ambient: usize) -> Self {
        Self::coordinate(ambient, &(0..ambient).collect::<Vec<_>>())
    }

    pub fn coordinate(ambient: usize, indices: &[usize]) -> Self {
        let vecs: Vec<VecQ> = indices.iter().map(|&i| Vector::basis(ambient, i)).collect();
        Self::span(ambient, &vecs)
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn ambient(&self) -> usize {
        self.ambient
    }

    pub fn basis(&self) -> &[VecQ] {
        &self.rows
    }

    pub fn basis_f64(&self) -> &[VecF] {
        &self.rows_f64
    }

    pub fn pivots(&self) -> &[usize] {
        &self.pivots
    }

    /// Coordinates that are not pivots; they span a complement.
    pub fn complement_indices(&self) -> Vec<usize> {
        (0..self.ambient)
            .filter(|c| !self.pivots.contains(c))
            .collect()
    }

    /// `v` minus its component along the pivot coordinates.
    pub fn reduce(&self, v: &VecQ) -> VecQ {
        let mut r = v.clone();
        for (row, &p) in self.rows.iter().zip(&self.pivots) {
            if !r[p].is_zero() {
                let f = -r[p].clone();
                r.axpy(&f, row);
            }
        }
        r
    }

    /// Float analogue of [`Subspace::reduce`]; zero exactly when `v` lies in the span.
    pub fn residual_f64(&self, v: &[f64]) -> VecF {
        let mut r = Vector(v.to_vec());
        for (row, &p) in self.rows_f64.iter().zip(&self.pivots) {
            let f = -r[p];
            if f != 0.0 {
                r.axpy(&f, row);
            }
        }
        r
    }

    pub fn contains(&self, v: &VecQ) -> bool {
        self.reduce(v).is_zero()
    }

    pub fn contains_subspace(&self, other: &Subspace) -> bool {
        other.rows.iter().all(|v| self.contains(v))
    }

    /// Coefficients of `v` in the reduced basis; meaningful when `v` lies in the span.
    pub fn coords<S: Scalar>(&self, v: &[S]) -> Vec<S> {
        self.pivots.iter().map(|&p| v[p].clone()).collect()
    }

    /// `sum_k a_k b_k` for the reduced basis `b`.
    pub fn combine<S: Scalar>(&self, a: &[S]) -> Vector<S> {
        let mut v = Vector::<S>::zeros(self.ambient);
        for (ak, row) in a.iter().zip(&self.rows) {
            if !ak.is_zero() {
                v.axpy(ak, &Vector::from_q(row));
            }
        }
        v
    }

    pub fn sum(&self, other: &Subspace) -> Subspace {
        let mut all = self.rows.clone();
        all.extend(other.rows.iter().cloned());
        Subspace::span(self.ambient, &all)
    }

    /// True when the subspace is the direct sum of its weight components.
    pub fn is_graded(&self, alg: &GradedAlgebra) -> bool {
        let parts: Vec<VecQ> = alg
            .layers()
            .iter()
            .flat_map(|l| self.rows.iter().map(|v| alg.layer_project(v, &l.weight)))
            .collect();
        rank(&parts, self.ambient) == self.dim() && parts.iter().all(|p| self.contains(p))
    }

    /// Weight-`w` component of a graded subspace.
    pub fn weight_slice(&self, alg: &GradedAlgebra, w: &Q) -> Subspace {
        let parts: Vec<VecQ> = self.rows.iter().map(|v| alg.layer_project(v, w)).collect();
        Subspace::span(self.ambient, &parts)
    }

    pub fn is_full(&self) -> bool {
        self.dim() == self.ambient
    }
}

#[derive(Clone, Debug)]
pub struct Center {
    pub space: Subspace,
    /// Nonzero weight components, in increasing weight order.
    pub slices: Vec<(Q, Subspace)>,
}

impl Center {
    pub fn slice(&self, w: &Q) -> Option<&Subspace> {
        self.slices.iter().find(|(x, _)| x == w).map(|(_, s)| s)
    }
}

/// A quotient algebra together with the projection from the ambient algebra.
#[derive(Clone, Debug)]
pub struct Quotient {
    pub algebra: GradedAlgebra,
    pub ideal: Subspace,
    /// Ambient coordinates that survive as the quotient basis.
    pub kept: Vec<usize>,
    ambient: usize,
    proj_q: Vec<Q>,
    proj_f64: Vec<f64>,
}

impl Quotient {
    pub fn project<S: Scalar>(&self, x: &[S]) -> Vector<S> {
        let p = S::pick(&self.proj_q, &self.proj_f64);
        let n = self.ambient;
        Vector(
            (0..self.kept.len())
                .map(|a| {
                    let mut acc = S::zero();
                    for i in 0..n {
                        let c = &p[a * n + i];
                        if !c.is_zero() && !x[i].is_zero() {
                            acc = acc + c.clone() * x[i].clone();
                        }
                    }
                    acc
                })
                .collect(),
        )
    }

    /// Coordinate section of the projection: places quotient coordinates on `kept`.
    pub fn include<S: Scalar>(&self, xbar: &[S]) -> Vector<S> {
        let mut v = Vector::<S>::zeros(self.ambient);
        for (a, &i) in self.kept.iter().enumerate() {
            v[i] = xbar[a].clone();
        }
        v
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub jacobi: bool,
    /// First basis triple violating Jacobi.
    pub jacobi_failure: Option<(usize, usize, usize)>,
    pub graded: bool,
    /// First bracket entry `(i, j, k)` whose weights do not add up.
    pub grading_failure: Option<(usize, usize, usize)>,
    pub nilpotent: bool,
    pub step: Option<usize>,
    pub positive_weights: bool,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.jacobi && self.graded && self.nilpotent
    }
}

pub fn validate_algebra(alg: &GradedAlgebra) -> ValidationReport {
    let n = alg.dim();
    let mut jacobi_failure = None;
    'outer: for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                let (ei, ej, ek): (VecQ, VecQ, VecQ) = (
                    alg.basis_vector(i),
                    alg.basis_vector(j),
                    alg.basis_vector(k),
                );
                let s = alg.br(&ei, &alg.br(&ej, &ek))
                    + alg.br(&ej, &alg.br(&ek, &ei))
                    + alg.br(&ek, &alg.br(&ei, &ej));
                if !s.is_zero() {
                    jacobi_failure = Some((i, j, k));
                    break 'outer;
                }
            }
        }
    }
    let grading_failure = alg
        .entries()
        .iter()
        .find(|e| alg.weight(e.i).clone() + alg.weight(e.j).clone() != *alg.weight(e.k))
        .map(|e| (e.i, e.j, e.k));
    let positive_weights = alg.has_positive_weights();
    let mut warnings = Vec::new();
    if !positive_weights {
        warnings.push("some derivation weights are negative".to_string());
    } else if !alg.min_weight().is_one() {
        warnings.push(format!(
            "smallest weight is {}, not 1; weights are not normalised",
            alg.min_weight()
        ));
    }
    ValidationReport {
        jacobi: jacobi_failure.is_none(),
        jacobi_failure,
        graded: grading_failure.is_none(),
        grading_failure,
        nilpotent: alg.step().is_some(),
        step: alg.step(),
        positive_weights,
        warnings,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};

    fn heisenberg() -> GradedAlgebra {
        GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("y", qi(1))
            .basis("z", qi(2))
            .bracket("x", "y", "z", qi(1))
            .build()
            .unwrap()
    }

    #[test]
    fn heisenberg_is_valid_step_two() {
        let h = heisenberg();
        let r = h.validate();
        assert!(r.is_valid());
        assert_eq!(r.step, Some(2));
        assert!(r.warnings.is_empty());
    }

    #[test]
    fn antisymmetric_builder() {
        let h = GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("y", qi(1))
            .basis("z", qi(2))
            .bracket("y", "x", "z", qi(-1))
            .build()
            .unwrap();
        let x: VecQ = h.basis_vector(0);
        let y: VecQ = h.basis_vector(1);
        assert_eq!(h.bracket(&x, &y).unwrap(), h.basis_vector(2));
    }

    #[test]
    fn rejects_bad_entries() {
        let e = |i, j, k| BracketEntry { i, j, k, coeff: qi(1) };
        let l = |n: usize| (0..n).map(|i| format!("e{i}")).collect::<Vec<_>>();
        assert!(GradedAlgebra::new(l(2), vec![qi(1); 2], vec![e(0, 1, 5)]).is_err());
        assert!(GradedAlgebra::new(l(3), vec![qi(1); 3], vec![e(1, 0, 2)]).is_err());
        assert!(GradedAlgebra::new(l(3), vec![qi(1); 3], vec![e(0, 1, 2), e(0, 1, 2)]).is_err());
        assert!(GradedAlgebra::new(l(2), vec![qi(1), qi(0)], vec![]).is_err());
    }

    #[test]
    fn detects_grading_and_jacobi_failures() {
        let bad = GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("y", qi(1))
            .basis("z", qi(3))
            .bracket("x", "y", "z", qi(1))
            .build()
            .unwrap();
        let r = bad.validate();
        assert!(!r.graded);
        assert_eq!(r.grading_failure, Some((0, 1, 2)));

        // [a,b]=c, [b,c]=a, [c,a]=b is so(3): not nilpotent, and it fails grading.
        let so3 = GradedAlgebra::builder()
            .basis("a", qi(1))
            .basis("b", qi(1))
            .basis("c", qi(1))
            .bracket("a", "b", "c", qi(1))
            .bracket("b", "c", "a", qi(1))
            .bracket("c", "a", "b", qi(1))
            .build()
            .unwrap();
        let r = so3.validate();
        assert!(!r.nilpotent);
        assert!(r.jacobi);

        let nj = GradedAlgebra::builder()
            .basis("a", qi(1))
            .basis("b", qi(1))
            .basis("c", qi(1))
            .basis("d", qi(2))
            .basis("e", qi(3))
            .bracket("a", "b", "d", qi(1))
            .bracket("c", "d", "e", qi(1))
            .build()
            .unwrap();
        let r = nj.validate();
        assert!(!r.jacobi);
    }

    #[test]
    fn unnormalised_weights_warn() {
        let h = heisenberg().rescaled(&q(1, 2)).unwrap();
        let r = h.validate();
        assert!(r.is_valid());
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn center_and_quotient_of_heisenberg() {
        let h = heisenberg();
        let c = h.center_of(&Subspace::full(3)).unwrap();
        assert_eq!(c.space, Subspace::coordinate(3, &[2]));
        assert_eq!(c.slices.len(), 1);
        assert_eq!(c.slices[0].0, qi(2));
        let quot = h.quotient(&c.space).unwrap();
        assert_eq!(quot.kept, vec![0, 1]);
        assert_eq!(quot.algebra.step(), Some(1));
        let x = Vector(vec![qi(3), qi(4), qi(5)]);
        assert_eq!(quot.project(&x), Vector(vec![qi(3), qi(4)]));
    }

    #[test]
    fn non_ideal_quotient_fails() {
        let h = heisenberg();
        let s = Subspace::coordinate(3, &[0]);
        assert!(matches!(h.quotient(&s), Err(Error::NotIdeal)));
    }

    #[test]
    fn subalgebra_generation() {
        let h = heisenberg();
        let s = h.subalgebra_generated(&[h.basis_vector(0), h.basis_vector(1)]);
        assert!(s.is_full());
        let t = h.subalgebra_generated(&[h.basis_vector(0)]);
        assert_eq!(t.dim(), 1);
    }

    #[test]
    fn graded_subspace_detection() {
        let h = heisenberg();
        let mixed = Subspace::span(3, &[Vector(vec![qi(1), qi(0), qi(1)])]);
        assert!(!mixed.is_graded(&h));
        assert!(Subspace::coordinate(3, &[0, 2]).is_graded(&h));
    }
}
