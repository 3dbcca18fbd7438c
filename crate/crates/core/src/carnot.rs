//! Carnot groups and the decomposition of a non-Carnot graded group into the
//! subgroup generated by its lowest layer and a Carnot quotient.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::algebra::{Center, GradedAlgebra, Quotient, Subspace};
use crate::error::{Error, Result};
use crate::linalg::{rref, solve_combination};
use crate::scalar::{q_as_integer, Scalar, Q};
use crate::vector::{VecQ, Vector};

/// A nested bracket `[x_{l0},[x_{l1},[...,x_{lm}]]]` of first-layer basis vectors,
/// listed by their coordinate indices.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketWord(pub Vec<usize>);

/// `e_coord = sum_k coeff_k * word_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BracketExpression {
    pub coord: usize,
    pub terms: Vec<(Q, BracketWord)>,
}

/// A graded algebra whose weights are `1..=r` and whose first layer generates.
#[derive(Clone, Debug)]
pub struct CarnotGroup {
    algebra: GradedAlgebra,
    first_layer: Vec<usize>,
    /// Indexed by layer; entry `m - 1` covers the coordinates of weight `m`.
    expressions: Vec<Vec<BracketExpression>>,
}

impl CarnotGroup {
    pub fn new(algebra: GradedAlgebra) -> Result<Self> {
        if !algebra.validate().is_valid() {
            return Err(Error::NotCarnot("invalid graded algebra".into()));
        }
        let mut expected = 1;
        for l in algebra.layers() {
            match q_as_integer(&l.weight) {
                Some(w) if w == expected => expected += 1,
                _ => {
                    return Err(Error::NotCarnot(format!(
                        "weights must be consecutive integers from 1, found {}",
                        l.weight
                    )))
                }
            }
        }
        let first_layer = algebra.layers()[0].indices.clone();
        let seeds: Vec<VecQ> = first_layer.iter().map(|&i| algebra.basis_vector(i)).collect();
        if !algebra.subalgebra_generated(&seeds).is_full() {
            return Err(Error::NotCarnot("first layer does not generate".into()));
        }
        let expressions = bracket_expressions(&algebra, &first_layer)?;
        Ok(CarnotGroup {
            algebra,
            first_layer,
            expressions,
        })
    }

    pub fn algebra(&self) -> &GradedAlgebra {
        &self.algebra
    }

    pub fn step(&self) -> usize {
        self.algebra.layers().len()
    }

    pub fn first_layer(&self) -> &[usize] {
        &self.first_layer
    }

    /// Coordinates of weight `m`.
    pub fn layer_indices(&self, m: usize) -> &[usize] {
        &self.algebra.layers()[m - 1].indices
    }

    /// Nested-bracket expressions for every coordinate of weight `m >= 1`.
    pub fn expressions(&self, m: usize) -> &[BracketExpression] {
        &self.expressions[m - 1]
    }

    pub fn is_horizontal(&self, v: &[f64]) -> bool {
        (0..v.len()).all(|i| self.first_layer.contains(&i) || v[i] == 0.0)
    }
}

fn bracket_expressions(
    alg: &GradedAlgebra,
    first: &[usize],
) -> Result<Vec<Vec<BracketExpression>>> {
    let n = alg.dim();
    let mut out = Vec::new();
    let mut words: Vec<(BracketWord, VecQ)> = first
        .iter()
        .map(|&l| (BracketWord(vec![l]), alg.basis_vector(l)))
        .collect();
    for (m, layer) in alg.layers().iter().enumerate() {
        if m > 0 {
            let mut next: Vec<(BracketWord, VecQ)> = Vec::new();
            let mut span: Vec<VecQ> = Vec::new();
            for &l in first {
                for (w, v) in &words {
                    let b = alg.br(&alg.basis_vector(l), v);
                    if b.is_zero() {
                        continue;
                    }
                    let mut trial = span.clone();
                    trial.push(b.clone());
                    if rref(&trial, n).0.len() > span.len() {
                        span.push(b.clone());
                        let mut letters = vec![l];
                        letters.extend(&w.0);
                        next.push((BracketWord(letters), b));
                    }
                }
            }
            words = next;
        }
        let values: Vec<VecQ> = words.iter().map(|(_, v)| v.clone()).collect();
        let mut exprs = Vec::new();
        for &c in &layer.indices {
            let a = solve_combination(&values, &alg.basis_vector(c)).ok_or_else(|| {
                Error::NotCarnot(format!("coordinate {c} is not a bracket of the first layer"))
            })?;
            let terms = a
                .into_iter()
                .zip(&words)
                .filter(|(x, _)| !x.is_zero())
                .map(|(x, (w, _))| (x, w.clone()))
                .collect();
            exprs.push(BracketExpression { coord: c, terms });
        }
        out.push(exprs);
    }
    Ok(out)
}

/// Decomposition `n = w ⊕ h` with `w` generated by the lowest layer and
/// `n / w` Carnot up to the factor `alpha`.
#[derive(Clone, Debug)]
pub struct CbCDecomposition {
    algebra: GradedAlgebra,
    lambda1: Q,
    alpha: Q,
    w: Subspace,
    w_layers: BTreeMap<usize, Subspace>,
    quotient: Quotient,
    carnot: CarnotGroup,
    center: Center,
    z_layers: BTreeMap<usize, Subspace>,
    h_layers: BTreeMap<usize, Vec<usize>>,
    central_product: Option<bool>,
}

pub fn decompose(algebra: &GradedAlgebra) -> Result<CbCDecomposition> {
    let report = algebra.validate();
    if !report.positive_weights {
        return Err(Error::NonPositiveWeights);
    }
    if !report.is_valid() {
        return Err(Error::InvalidAlgebra(format!("{report:?}")));
    }
    let n = algebra.dim();
    let lambda1 = algebra.min_weight().clone();
    let seeds: Vec<VecQ> = algebra.layers()[0]
        .indices
        .iter()
        .map(|&i| algebra.basis_vector(i))
        .collect();
    let w = algebra.subalgebra_generated(&seeds);
    if w.is_full() {
        return Err(Error::CarnotType);
    }
    if !algebra.is_ideal(&w) {
        return Err(Error::FirstLayerNotIdeal);
    }
    let quotient = algebra.quotient(&w)?;
    let mu = quotient.algebra.min_weight().clone();
    let alpha = mu.clone() / lambda1.clone();
    for l in quotient.algebra.layers() {
        let r = l.weight.clone() / mu.clone();
        if !r.is_integer() {
            return Err(Error::NotCarnotMultiple(format!(
                "quotient weight {} is not an integer multiple of {}",
                l.weight, mu
            )));
        }
    }
    let carnot_alg = quotient.algebra.rescaled(&mu.recip())?;
    let carnot = CarnotGroup::new(carnot_alg).map_err(|e| match e {
        Error::NotCarnot(msg) if msg.starts_with("weights") => Error::NotCarnotMultiple(msg),
        Error::NotCarnot(msg) => Error::QuotientNotCarnot(msg),
        other => other,
    })?;

    let layer_index = |weight: &Q, unit: &Q| -> usize {
        q_as_integer(&(weight.clone() / unit.clone())).unwrap_or(0) as usize
    };
    let mut w_layers = BTreeMap::new();
    for l in algebra.layers() {
        let s = w.weight_slice(algebra, &l.weight);
        if s.dim() > 0 {
            w_layers.insert(layer_index(&l.weight, &lambda1), s);
        }
    }
    let center = algebra.center_of(&w)?;
    let z_layers = center
        .slices
        .iter()
        .map(|(wt, s)| (layer_index(wt, &lambda1), s.clone()))
        .collect();
    for z in center.space.basis() {
        for i in 0..n {
            let b = algebra.br(z, &algebra.basis_vector::<Q>(i));
            if !center.space.contains(&b) {
                return Err(Error::InvalidAlgebra(
                    "centre of the first-layer subalgebra is not an ideal".into(),
                ));
            }
        }
    }
    let mut h_layers: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &i in &quotient.kept {
        h_layers
            .entry(layer_index(algebra.weight(i), &mu))
            .or_default()
            .push(i);
    }
    let central_product = if alpha.is_integer() {
        None
    } else {
        Some(w.basis().iter().all(|x| {
            quotient
                .kept
                .iter()
                .all(|&i| algebra.br(x, &algebra.basis_vector::<Q>(i)).is_zero())
        }))
    };
    Ok(CbCDecomposition {
        algebra: algebra.clone(),
        lambda1,
        alpha,
        w,
        w_layers,
        quotient,
        carnot,
        center,
        z_layers,
        h_layers,
        central_product,
    })
}

impl CbCDecomposition {
    pub fn algebra(&self) -> &GradedAlgebra {
        &self.algebra
    }

    pub fn dim(&self) -> usize {
        self.algebra.dim()
    }

    pub fn lambda1(&self) -> &Q {
        &self.lambda1
    }

    pub fn alpha(&self) -> &Q {
        &self.alpha
    }

    pub fn alpha_integer(&self) -> Option<usize> {
        q_as_integer(&self.alpha).and_then(|a| usize::try_from(a).ok())
    }

    pub fn alpha_f64(&self) -> f64 {
        self.alpha.to_f64()
    }

    pub fn w(&self) -> &Subspace {
        &self.w
    }

    /// `W_j`, the weight `j * lambda1` part of `w`.
    pub fn w_layer(&self, j: usize) -> Option<&Subspace> {
        self.w_layers.get(&j)
    }

    pub fn w_layers(&self) -> &BTreeMap<usize, Subspace> {
        &self.w_layers
    }

    pub fn quotient(&self) -> &Quotient {
        &self.quotient
    }

    pub fn quotient_dim(&self) -> usize {
        self.quotient.kept.len()
    }

    /// The quotient with weights normalised to `1..=m`.
    pub fn carnot(&self) -> &CarnotGroup {
        &self.carnot
    }

    pub fn center(&self) -> &Center {
        &self.center
    }

    /// `Z_j`, the weight `j * lambda1` part of the centre of `w`; `None` when trivial.
    pub fn z(&self, j: usize) -> Option<&Subspace> {
        self.z_layers.get(&j)
    }

    pub fn z_layers(&self) -> &BTreeMap<usize, Subspace> {
        &self.z_layers
    }

    /// Coordinates spanning `H_j`, the weight `j * alpha * lambda1` part of the complement.
    pub fn h_layer(&self, j: usize) -> &[usize] {
        self.h_layers.get(&j).map_or(&[], Vec::as_slice)
    }

    pub fn h_indices(&self) -> &[usize] {
        &self.quotient.kept
    }

    /// `Some([w, h] = 0)` when alpha is not an integer.
    pub fn central_product(&self) -> Option<bool> {
        self.central_product
    }

    pub fn project<S: Scalar>(&self, g: &[S]) -> Vector<S> {
        self.quotient.project(g)
    }

    /// Inclusion of quotient coordinates onto the complement `H`.
    pub fn include_h<S: Scalar>(&self, xbar: &[S]) -> Vector<S> {
        self.quotient.include(xbar)
    }

    /// Writes `g = h * w` with `h` in `H` and `w` in `w`.
    pub fn split<S: Scalar>(&self, g: &[S]) -> (Vector<S>, Vector<S>) {
        let h = self.include_h(&self.project(g));
        let w = self.algebra.left_diff(&h, g);
        (h, w)
    }

    /// Weight `j * lambda1` component.
    pub fn w_part<S: Scalar>(&self, v: &[S], j: usize) -> Vector<S> {
        self.algebra
            .layer_project(v, &(self.lambda1.clone() * crate::scalar::qi(j as i64)))
    }

    /// Quotient coordinates of weight `j` in the normalised Carnot grading.
    pub fn quotient_layer(&self, j: usize) -> Vec<usize> {
        let a = self.carnot.algebra();
        a.layers()
            .get(j.wrapping_sub(1))
            .map(|l| l.indices.clone())
            .unwrap_or_default()
    }

    /// Exact residual test for membership of a float vector in `Z_j`.
    pub fn z_residual(&self, j: usize, v: &[f64]) -> f64 {
        match self.z(j) {
            Some(z) => z.residual_f64(v).max_abs(),
            None => Vector(v.to_vec()).max_abs(),
        }
    }

    /// Quotient of `n` by every weight strictly above `alpha * lambda1`.
    pub fn p_alpha(&self) -> Result<Quotient> {
        let cut = self.alpha.clone() * self.lambda1.clone();
        let idx: Vec<usize> = (0..self.dim())
            .filter(|&i| self.algebra.weight(i) > &cut)
            .collect();
        if idx.is_empty() {
            return Err(Error::InvalidAlgebra(
                "no weights above alpha; projection is the identity".into(),
            ));
        }
        self.algebra.quotient(&Subspace::coordinate(self.dim(), &idx))
    }

    /// Coordinates of weight exactly `alpha * lambda1`.
    pub fn v_alpha_indices(&self) -> Vec<usize> {
        let w = self.alpha.clone() * self.lambda1.clone();
        self.algebra
            .layer(&w)
            .map(|l| l.indices.clone())
            .unwrap_or_default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};

    fn ladder5() -> GradedAlgebra {
        GradedAlgebra::builder()
            .basis("a", qi(1))
            .basis("b", qi(1))
            .basis("z1", qi(1))
            .basis("w2", qi(2))
            .basis("h", qi(2))
            .basis("z3", qi(3))
            .bracket("a", "b", "w2", qi(1))
            .bracket("a", "w2", "z3", qi(1))
            .bracket("h", "z1", "z3", qi(1))
            .build()
            .unwrap()
    }

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
    fn ladder_decomposition() {
        let d = decompose(&ladder5()).unwrap();
        assert_eq!(d.w().dim(), 5);
        assert_eq!(d.alpha(), &qi(2));
        assert_eq!(d.h_indices(), &[4]);
        assert_eq!(d.z(1).unwrap(), &Subspace::coordinate(6, &[2]));
        assert_eq!(d.z(3).unwrap(), &Subspace::coordinate(6, &[5]));
        assert!(d.z(2).is_none());
        assert_eq!(d.central_product(), None);
        let p = d.p_alpha().unwrap();
        assert_eq!(p.algebra.dim(), 5);
        assert_eq!(p.kept, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn heisenberg_is_carnot_type() {
        assert!(matches!(decompose(&heisenberg()), Err(Error::CarnotType)));
        let c = CarnotGroup::new(heisenberg()).unwrap();
        let e = c.expressions(2);
        assert_eq!(e.len(), 1);
        assert_eq!(e[0].terms, vec![(qi(1), BracketWord(vec![0, 1]))]);
    }

    #[test]
    fn non_integer_alpha_flags_central_product() {
        let a = GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("y", qi(1))
            .basis("z", qi(2))
            .basis("u", q(3, 2))
            .bracket("x", "y", "z", qi(1))
            .build()
            .unwrap();
        let d = decompose(&a).unwrap();
        assert_eq!(d.alpha(), &q(3, 2));
        assert_eq!(d.central_product(), Some(true));
        assert_eq!(d.alpha_integer(), None);
    }

    #[test]
    fn quotient_weights_must_be_multiples() {
        let a = GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("u", qi(2))
            .basis("v", qi(3))
            .build()
            .unwrap();
        assert!(matches!(decompose(&a), Err(Error::NotCarnotMultiple(_))));
    }

    #[test]
    fn quotient_must_be_generated() {
        // Quotient spanned by u, v (weight 2) and t (weight 4) with no brackets.
        let a = GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("u", qi(2))
            .basis("t", qi(4))
            .build()
            .unwrap();
        assert!(matches!(decompose(&a), Err(Error::QuotientNotCarnot(_))));
    }

    #[test]
    fn negative_weights_rejected() {
        let a = GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("y", qi(-1))
            .build()
            .unwrap();
        assert!(matches!(decompose(&a), Err(Error::NonPositiveWeights)));
    }

    #[test]
    fn split_recovers_point() {
        let d = decompose(&ladder5()).unwrap();
        let g: VecQ = Vector(vec![qi(1), qi(2), qi(3), qi(4), qi(5), qi(6)]);
        let (h, w) = d.split(&g);
        assert_eq!(d.algebra().mul(&h, &w), g);
        assert!(d.w().contains(&w));
    }
}
