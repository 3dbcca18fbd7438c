//! The simply connected group of a graded nilpotent algebra in exponential
//! coordinates: group law via the Dynkin series, dilations, the homogeneous
//! quasi-norm and graded automorphisms.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex, OnceLock};

use num_traits::{One, Zero};

use crate::algebra::GradedAlgebra;
use crate::error::{Error, Result};
use crate::scalar::{bernoulli_plus, factorial, Scalar, Q};
use crate::vector::{MatQ, Matrix, VecF, Vector};

/// Largest nilpotency step accepted by [`bch`].
pub const DYNKIN_CEILING: usize = 6;

const X: u8 = 0;
const Y: u8 = 1;

#[derive(Debug)]
struct Node {
    letter: u8,
    parent: Option<usize>,
}

/// Right-nested bracket words `[w0,[w1,[...,w_{m-1}]]]` stored as a trie on the
/// reversed word, so that every node's value is one bracket away from its parent.
#[derive(Debug)]
struct DynkinTable {
    nodes: Vec<Node>,
    coeff_q: Vec<Q>,
    coeff_f: Vec<f64>,
}

fn dynkin_words(max_deg: usize) -> BTreeMap<Vec<u8>, Q> {
    fn record(pairs: &[(usize, usize)], acc: &mut BTreeMap<Vec<u8>, Q>) {
        let mut word = Vec::new();
        let mut denom = Q::one();
        for &(p, q) in pairs {
            word.extend(std::iter::repeat(X).take(p));
            word.extend(std::iter::repeat(Y).take(q));
            denom = denom * factorial(p) * factorial(q);
        }
        let m = word.len();
        if m >= 2 && word[m - 1] == word[m - 2] {
            return;
        }
        let n = pairs.len() as i64;
        let sign = if n % 2 == 1 { 1 } else { -1 };
        let coeff = crate::scalar::q(sign, n) / (crate::scalar::qi(m as i64) * denom);
        let e = acc.entry(word).or_insert_with(Q::zero);
        *e = e.clone() + coeff;
    }
    fn rec(
        pairs: &mut Vec<(usize, usize)>,
        deg: usize,
        max: usize,
        acc: &mut BTreeMap<Vec<u8>, Q>,
    ) {
        if !pairs.is_empty() {
            record(pairs, acc);
        }
        for s in 1..=max - deg {
            for p in 0..=s {
                pairs.push((p, s - p));
                rec(pairs, deg + s, max, acc);
                pairs.pop();
            }
        }
    }
    let mut acc = BTreeMap::new();
    rec(&mut Vec::new(), 0, max_deg, &mut acc);
    acc.retain(|_, c| !c.is_zero());
    acc
}

impl DynkinTable {
    fn build(max_deg: usize) -> Self {
        let words = dynkin_words(max_deg);
        let mut nodes: Vec<Node> = Vec::new();
        let mut coeff_q: Vec<Q> = Vec::new();
        let mut index: HashMap<Vec<u8>, usize> = HashMap::new();
        // Shorter words first so parents precede children.
        let mut sorted: Vec<(&Vec<u8>, &Q)> = words.iter().collect();
        sorted.sort_by_key(|(w, _)| w.len());
        for (word, c) in sorted {
            let rev: Vec<u8> = word.iter().rev().copied().collect();
            for len in 1..=rev.len() {
                let key = rev[..len].to_vec();
                if index.contains_key(&key) {
                    continue;
                }
                let parent = (len > 1).then(|| index[&rev[..len - 1]]);
                index.insert(key, nodes.len());
                nodes.push(Node {
                    letter: rev[len - 1],
                    parent,
                });
                coeff_q.push(Q::zero());
            }
            coeff_q[index[&rev]] = c.clone();
        }
        let coeff_f = coeff_q.iter().map(f64::from_q).collect();
        DynkinTable {
            nodes,
            coeff_q,
            coeff_f,
        }
    }

    fn get(max_deg: usize) -> Arc<DynkinTable> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<DynkinTable>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        guard
            .entry(max_deg)
            .or_insert_with(|| Arc::new(DynkinTable::build(max_deg)))
            .clone()
    }

    fn eval<S: Scalar>(&self, alg: &GradedAlgebra, x: &[S], y: &[S]) -> Vector<S> {
        let coeffs = S::pick(&self.coeff_q, &self.coeff_f);
        let n = alg.dim();
        let mut out = Vector::<S>::zeros(n);
        let mut vals: Vec<Option<Vector<S>>> = Vec::with_capacity(self.nodes.len());
        for (node, c) in self.nodes.iter().zip(coeffs) {
            let letter = if node.letter == X { x } else { y };
            let val = match node.parent {
                None => Some(Vector::from_slice(letter)),
                Some(p) => vals[p].as_ref().and_then(|pv| {
                    let b = alg.br(letter, pv);
                    (!b.is_zero()).then_some(b)
                }),
            };
            if let Some(v) = &val {
                if !c.is_zero() {
                    out.axpy(c, v);
                }
            }
            vals.push(val);
        }
        out
    }
}

impl GradedAlgebra {
    /// Group product `x * y = log(exp x exp y)`.
    ///
    /// # Panics
    /// If the algebra is not nilpotent or the dimensions do not match.
    pub fn mul<S: Scalar>(&self, x: &[S], y: &[S]) -> Vector<S> {
        let step = self.step().expect("group law needs a nilpotent algebra");
        assert!(x.len() == self.dim() && y.len() == self.dim(), "dimension mismatch");
        if step == 1 {
            return &Vector::from_slice(x) + &Vector::from_slice(y);
        }
        DynkinTable::get(step).eval(self, x, y)
    }

    /// `x^{-1} * y`.
    pub fn left_diff<S: Scalar>(&self, x: &[S], y: &[S]) -> Vector<S> {
        self.mul(&-Vector::from_slice(x), y)
    }
}

/// Group product with the step checked against [`DYNKIN_CEILING`].
pub fn bch<S: Scalar>(alg: &GradedAlgebra, x: &[S], y: &[S]) -> Result<Vector<S>> {
    bch_with_ceiling(alg, x, y, DYNKIN_CEILING)
}

pub fn bch_with_ceiling<S: Scalar>(
    alg: &GradedAlgebra,
    x: &[S],
    y: &[S],
    ceiling: usize,
) -> Result<Vector<S>> {
    let step = alg.step().ok_or(Error::NotNilpotent)?;
    if step > ceiling {
        return Err(Error::StepTooLarge { step, ceiling });
    }
    for v in [x, y] {
        if v.len() != alg.dim() {
            return Err(Error::DimensionMismatch {
                expected: alg.dim(),
                got: v.len(),
            });
        }
    }
    Ok(alg.mul(x, y))
}

/// `y * x * y^{-1} = sum_k ad_y^k x / k!`.
pub fn conjugate<S: Scalar>(alg: &GradedAlgebra, y: &[S], x: &[S]) -> Vector<S> {
    let step = alg.step().unwrap_or(alg.dim());
    let mut out = Vector::from_slice(x);
    let mut term = Vector::from_slice(x);
    for k in 1..=step {
        term = alg.br(y, &term);
        if term.is_zero() {
            break;
        }
        out.axpy(&S::from_q(&factorial(k).recip()), &term);
    }
    out
}

/// `d/dt (q * t v)` at `t = 0`, that is `sum_k B_k^+ / k! ad_q^k v`.
pub fn right_derivative(alg: &GradedAlgebra, q: &[f64], v: &[f64]) -> VecF {
    let step = alg.step().unwrap_or(alg.dim());
    let b = bernoulli_plus(step);
    let mut out = Vector(v.to_vec());
    let mut term = Vector(v.to_vec());
    for (k, bk) in b.iter().enumerate().skip(1) {
        term = alg.br(q, &term);
        if term.is_zero() {
            break;
        }
        out.axpy(&(bk.clone() / factorial(k)).to_f64(), &term);
    }
    out
}

/// Dilation `delta_r` scaling coordinate `i` by `r^{lambda_i}`.
pub fn dilate<S: Scalar>(alg: &GradedAlgebra, r: &S, x: &[S]) -> Result<Vector<S>> {
    let mut out = Vector::<S>::zeros(alg.dim());
    for l in alg.layers() {
        let f = r
            .pow_weight(&l.weight)
            .ok_or_else(|| Error::InexactDilation(format!("{r:?}^{}", l.weight)))?;
        for &i in &l.indices {
            out[i] = x[i].clone() * f.clone();
        }
    }
    Ok(out)
}

pub fn dilation_matrix<S: Scalar>(alg: &GradedAlgebra, r: &S) -> Result<Matrix<S>> {
    let mut d = vec![S::zero(); alg.dim()];
    for l in alg.layers() {
        let f = r
            .pow_weight(&l.weight)
            .ok_or_else(|| Error::InexactDilation(format!("{r:?}^{}", l.weight)))?;
        for &i in &l.indices {
            d[i] = f.clone();
        }
    }
    Ok(Matrix::diagonal(&d))
}

/// Homogeneous quasi-norm `sum_lambda |x_lambda|^{1/lambda}`.
pub fn quasi_norm(alg: &GradedAlgebra, x: &[f64]) -> f64 {
    alg.layers()
        .iter()
        .map(|l| {
            let s: f64 = l.indices.iter().map(|&i| x[i] * x[i]).sum();
            s.sqrt().powf(1.0 / l.weight.to_f64())
        })
        .sum()
}

/// Left-invariant quasi-distance `||x^{-1} * y||`.
pub fn quasi_dist(alg: &GradedAlgebra, x: &[f64], y: &[f64]) -> f64 {
    quasi_norm(alg, &alg.left_diff(x, y))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AutomorphismVerdict {
    pub invertible: bool,
    pub homomorphism: bool,
    pub graded: bool,
    /// First basis pair on which `M[e_i,e_j] != [Me_i, Me_j]`.
    pub failure: Option<(usize, usize)>,
}

impl AutomorphismVerdict {
    pub fn is_automorphism(&self) -> bool {
        self.invertible && self.homomorphism
    }

    pub fn is_graded_automorphism(&self) -> bool {
        self.is_automorphism() && self.graded
    }
}

/// Exact check of the homomorphism identity on basis pairs, invertibility and
/// commutation with the derivation.
pub fn is_graded_automorphism(alg: &GradedAlgebra, m: &MatQ) -> AutomorphismVerdict {
    check_automorphism(alg, m, 0.0)
}

/// Same checks with an absolute tolerance, for float matrices.
pub fn check_automorphism<S: Scalar>(
    alg: &GradedAlgebra,
    m: &Matrix<S>,
    tol: f64,
) -> AutomorphismVerdict {
    let n = alg.dim();
    if m.nrows() != n || m.ncols() != n {
        return AutomorphismVerdict {
            invertible: false,
            homomorphism: false,
            graded: false,
            failure: None,
        };
    }
    let cols: Vec<Vector<S>> = (0..n).map(|j| m.column(j)).collect();
    let mut failure = None;
    'outer: for i in 0..n {
        for j in i + 1..n {
            let lhs = m.mul_vec(&alg.br(&alg.basis_vector::<S>(i), &alg.basis_vector(j)));
            let rhs = alg.br(&cols[i], &cols[j]);
            if (&lhs - &rhs).iter().any(|d| !d.is_negligible(tol)) {
                failure = Some((i, j));
                break 'outer;
            }
        }
    }
    let graded = (0..n).all(|j| {
        (0..n).all(|i| alg.weight(i) == alg.weight(j) || m[(i, j)].is_negligible(tol))
    });
    AutomorphismVerdict {
        invertible: m.inverse().is_some(),
        homomorphism: failure.is_none(),
        graded,
        failure,
    }
}

/// `g -> translation * linear(g)` with `linear` a graded automorphism.
#[derive(Clone, Debug, PartialEq)]
pub struct AffineMap<S> {
    pub translation: Vector<S>,
    pub linear: Matrix<S>,
}

impl<S: Scalar> AffineMap<S> {
    pub fn new(alg: &GradedAlgebra, translation: Vector<S>, linear: Matrix<S>) -> Result<Self> {
        translation.check_dim(alg.dim())?;
        let verdict = check_automorphism(alg, &linear, if S::EXACT { 0.0 } else { 1e-12 });
        if !verdict.is_graded_automorphism() {
            return Err(Error::NotAutomorphism(format!("{verdict:?}")));
        }
        Ok(AffineMap {
            translation,
            linear,
        })
    }

    pub fn identity(n: usize) -> Self {
        AffineMap {
            translation: Vector::zeros(n),
            linear: Matrix::identity(n),
        }
    }

    pub fn apply(&self, alg: &GradedAlgebra, g: &[S]) -> Vector<S> {
        alg.mul(&self.translation, &self.linear.mul_vec(g))
    }

    /// `self ∘ other`.
    pub fn compose(&self, alg: &GradedAlgebra, other: &Self) -> Self {
        AffineMap {
            translation: alg.mul(&self.translation, &self.linear.mul_vec(&other.translation)),
            linear: self.linear.mul(&other.linear),
        }
    }

    pub fn invert(&self) -> Option<Self> {
        let inv = self.linear.inverse()?;
        Some(AffineMap {
            translation: inv.mul_vec(&-&self.translation),
            linear: inv,
        })
    }
}

impl AffineMap<Q> {
    pub fn to_f64(&self) -> AffineMap<f64> {
        AffineMap {
            translation: self.translation.to_f64(),
            linear: self.linear.to_f64(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{q, qi};
    use crate::vector::{VecF, VecQ};

    fn heisenberg() -> GradedAlgebra {
        GradedAlgebra::builder()
            .basis("x", qi(1))
            .basis("y", qi(1))
            .basis("z", qi(2))
            .bracket("x", "y", "z", qi(1))
            .build()
            .unwrap()
    }

    fn engel() -> GradedAlgebra {
        GradedAlgebra::builder()
            .basis("e0", qi(1))
            .basis("e1", qi(1))
            .basis("e2", qi(2))
            .basis("e3", qi(3))
            .bracket("e0", "e1", "e2", qi(1))
            .bracket("e0", "e2", "e3", qi(1))
            .build()
            .unwrap()
    }

    fn qv(x: &[i64]) -> VecQ {
        Vector(x.iter().map(|&a| qi(a)).collect())
    }

    #[test]
    fn low_order_dynkin_coefficients() {
        let w = dynkin_words(3);
        assert_eq!(w[&vec![X]], qi(1));
        assert_eq!(w[&vec![Y]], qi(1));
        let yx = w.get(&vec![Y, X]).cloned().unwrap_or_else(Q::zero);
        assert_eq!(w[&vec![X, Y]].clone() - yx, q(1, 2));
        // 1/12 [X,[X,Y]] - 1/12 [Y,[X,Y]]; the word form splits [Y,[X,Y]] = -[Y,[Y,X]].
        let xxy = w[&vec![X, X, Y]].clone();
        let yxy = w.get(&vec![Y, X, Y]).cloned().unwrap_or_else(Q::zero);
        let yyx = w.get(&vec![Y, Y, X]).cloned().unwrap_or_else(Q::zero);
        let xyx = w.get(&vec![X, Y, X]).cloned().unwrap_or_else(Q::zero);
        // Evaluate on the free step-3 relations: [X,[Y,X]] = -[X,[X,Y]].
        assert_eq!(xxy - xyx, q(1, 12));
        assert_eq!(yyx - yxy, q(1, 12));
    }

    #[test]
    fn heisenberg_product_closed_form() {
        let h = heisenberg();
        let x = qv(&[1, 2, 3]);
        let y = qv(&[4, 5, 6]);
        let p = h.mul(&x, &y);
        // z + z' + (x y' - y x')/2 = 9 + (5 - 8)/2
        assert_eq!(p, Vector(vec![qi(5), qi(7), q(15, 2)]));
    }

    #[test]
    fn engel_product_matches_truncated_series() {
        let g = engel();
        let x = qv(&[1, 2, 0, 0]);
        let y = qv(&[3, -1, 1, 0]);
        let p = g.mul(&x, &y);
        let b = |a: &VecQ, c: &VecQ| g.br(a, c);
        let xy = b(&x, &y);
        let mut expect = &x + &y;
        expect.axpy(&q(1, 2), &xy);
        expect.axpy(&q(1, 12), &b(&x, &xy));
        expect.axpy(&q(-1, 12), &b(&y, &xy));
        assert_eq!(p, expect);
    }

    #[test]
    fn inverse_and_identity() {
        let g = engel();
        let x = qv(&[1, -2, 3, 5]);
        assert!(g.mul(&x, &-&x).is_zero());
        assert_eq!(g.mul(&x, &VecQ::zeros(4)), x);
    }

    #[test]
    fn step_ceiling_is_enforced() {
        let g = engel();
        let x = qv(&[1, 0, 0, 0]);
        assert!(matches!(
            bch_with_ceiling(&g, &x, &x, 2),
            Err(Error::StepTooLarge { step: 3, ceiling: 2 })
        ));
        assert!(bch(&g, &x, &x).is_ok());
    }

    #[test]
    fn conjugation_matches_products() {
        let g = engel();
        let x = qv(&[1, 2, 3, 4]);
        let y = qv(&[-1, 3, 0, 2]);
        let direct = g.mul(&g.mul(&y, &x), &-&y);
        assert_eq!(conjugate(&g, &y, &x), direct);
    }

    #[test]
    fn dilation_is_automorphism() {
        let g = engel();
        let d = dilation_matrix(&g, &qi(3)).unwrap();
        assert!(is_graded_automorphism(&g, &d).is_graded_automorphism());
        assert!(dilate(&g, &q(1, 2), &qv(&[1, 1, 1, 1])).is_ok());
        let half = g.rescaled(&q(1, 2)).unwrap();
        assert!(matches!(
            dilate(&half, &qi(2), &qv(&[1, 1, 1, 1])),
            Err(Error::InexactDilation(_))
        ));
    }

    #[test]
    fn non_automorphism_detected() {
        let h = heisenberg();
        let m = MatQ::diagonal(&[qi(1), qi(1), qi(2)]);
        let v = is_graded_automorphism(&h, &m);
        assert!(!v.homomorphism);
        assert_eq!(v.failure, Some((0, 1)));
    }

    #[test]
    fn quasi_norm_homogeneous() {
        let g = engel();
        let x: VecF = Vector(vec![0.3, -0.2, 0.7, 1.1]);
        let dx = dilate(&g, &2.5, &x).unwrap();
        assert!((quasi_norm(&g, &dx) - 2.5 * quasi_norm(&g, &x)).abs() < 1e-12);
    }

    #[test]
    fn affine_inverse_roundtrip() {
        let h = heisenberg();
        let a = AffineMap::new(&h, qv(&[1, 2, 3]), dilation_matrix(&h, &qi(2)).unwrap()).unwrap();
        let inv = a.invert().unwrap();
        let g = qv(&[5, -1, 2]);
        assert_eq!(inv.apply(&h, &a.apply(&h, &g)), g);
        let id = a.compose(&h, &inv);
        assert!(id.translation.is_zero() && id.linear.is_identity());
    }
}
