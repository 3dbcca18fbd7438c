//! Piecewise horizontal paths in Carnot groups and line integrals of the
//! bracket pairing against the horizontal tautological form.

use num_traits::Zero;

use crate::carnot::{CarnotGroup, CbCDecomposition};
use crate::error::{Error, Result};
use crate::group::quasi_norm;
use crate::algebra::GradedAlgebra;
use crate::quadrature::adaptive_simpson;
use crate::scalar::{q_from_f64, Scalar};
use crate::shear::ShearComponent;
use crate::vector::{VecF, VecQ, Vector};

/// Maximum cleanup passes per layer in [`horizontal_connect`].
pub const MAX_PASSES: usize = 6;

/// Default per-segment absolute tolerance for [`integrate_bracket_form`].
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// The flow `t -> exp(t * direction)` for `t` in `[0, duration]`.
#[derive(Clone, Debug, PartialEq)]
pub struct Segment {
    pub direction: VecF,
    pub duration: f64,
}

impl Segment {
    pub fn new(direction: VecF, duration: f64) -> Self {
        Segment {
            direction,
            duration,
        }
    }

    /// `duration * direction` as an exact rational vector.
    pub fn displacement_exact(&self) -> VecQ {
        let d = q_from_f64(self.duration);
        Vector(self.direction.iter().map(|&x| q_from_f64(x) * d.clone()).collect())
    }

    pub fn length(&self) -> f64 {
        self.duration * self.direction.norm()
    }

    pub fn reversed(&self) -> Self {
        Segment {
            direction: -&self.direction,
            duration: self.duration,
        }
    }
}

/// A concatenation of horizontal segments. Knots and the endpoint are computed
/// with exact rational group products, so they carry no accumulated rounding.
#[derive(Clone, Debug)]
pub struct HorizontalPath {
    start: VecF,
    segments: Vec<Segment>,
    knots: Vec<VecF>,
    endpoint: VecQ,
}

impl HorizontalPath {
    pub fn new(alg: &GradedAlgebra, start: &[f64], segments: Vec<Segment>) -> Self {
        let mut cur = Vector(start.to_vec()).to_q();
        let mut knots = Vec::with_capacity(segments.len());
        for s in &segments {
            knots.push(cur.to_f64());
            cur = alg.mul(&cur, &s.displacement_exact());
        }
        HorizontalPath {
            start: Vector(start.to_vec()),
            segments,
            knots,
            endpoint: cur,
        }
    }

    pub fn start(&self) -> &VecF {
        &self.start
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    /// Starting point of each segment.
    pub fn knots(&self) -> &[VecF] {
        &self.knots
    }

    pub fn endpoint(&self) -> VecF {
        self.endpoint.to_f64()
    }

    pub fn endpoint_exact(&self) -> &VecQ {
        &self.endpoint
    }

    pub fn segment_count(&self) -> usize {
        self.segments.len()
    }

    /// Total length `sum duration * |direction|`.
    pub fn length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    /// Point at time `t` of segment `i`.
    pub fn point(&self, alg: &GradedAlgebra, i: usize, t: f64) -> VecF {
        alg.mul(&self.knots[i], &self.segments[i].direction.scale(&t))
    }

    /// The same curve traversed backwards.
    pub fn reversed(&self, alg: &GradedAlgebra) -> Self {
        let segs = self.segments.iter().rev().map(Segment::reversed).collect();
        HorizontalPath::new(alg, &self.endpoint.to_f64(), segs)
    }

    /// Follows `self`, then the segments of `other` from wherever `self` ends.
    pub fn then(&self, alg: &GradedAlgebra, other: &HorizontalPath) -> Self {
        let mut segs = self.segments.clone();
        segs.extend(other.segments.iter().cloned());
        HorizontalPath::new(alg, &self.start, segs)
    }

    /// Left translate by `a`.
    pub fn translated(&self, alg: &GradedAlgebra, a: &[f64]) -> Self {
        let start = alg.mul(a, &self.start);
        HorizontalPath::new(alg, &start, self.segments.clone())
    }
}

/// Segments realising `exp(t^m * sign * [x_{l0},[...,x_{lm}]])` up to higher layers.
fn commutator_word(word: &[usize], t: f64, negative: bool, n: usize) -> Vec<VecF> {
    if word.len() == 1 {
        let mut d = VecF::zeros(n);
        d[word[0]] = if negative { -t } else { t };
        return vec![d];
    }
    let a = commutator_word(&word[..1], t, false, n);
    let b = commutator_word(&word[1..], t, false, n);
    let (x, y) = if negative { (b, a) } else { (a, b) };
    let inv = |v: &[VecF]| v.iter().rev().map(|d| -d).collect::<Vec<_>>();
    let mut out = x.clone();
    out.extend(y.iter().cloned());
    out.extend(inv(&x));
    out.extend(inv(&y));
    out
}

/// Segments in the commutator word of a depth-`m` bracket.
pub fn word_length(m: usize) -> usize {
    if m <= 1 {
        1
    } else {
        2 + 2 * word_length(m - 1)
    }
}

/// Upper bound on the segment count produced by [`horizontal_connect`].
pub fn segment_bound(carnot: &CarnotGroup) -> usize {
    1 + (2..=carnot.step())
        .map(|m| {
            let terms: usize = carnot.expressions(m).iter().map(|e| e.terms.len()).sum();
            MAX_PASSES * terms * word_length(m)
        })
        .sum::<usize>()
}

/// Horizontal path from the identity to `g`, ending within
/// `tol * max(1, rho(0, g))` of `g` in the quasi-distance.
///
/// A straight segment fixes the first layer; each higher layer is then
/// cancelled by commutator words built from nested bracket expressions, with
/// the residual tracked in exact arithmetic. Repeated passes per layer absorb
/// the rounding of the `|c|^{1/m}` durations.
pub fn horizontal_connect(carnot: &CarnotGroup, g: &[f64], tol: f64) -> Result<HorizontalPath> {
    let alg = carnot.algebra();
    let n = alg.dim();
    Vector(g.to_vec()).check_dim(n)?;
    let gq = Vector(g.to_vec()).to_q();
    let target = tol * quasi_norm(alg, g).max(1.0);

    let mut segments: Vec<Segment> = Vec::new();
    let mut knots: Vec<VecF> = Vec::new();
    let mut end = VecQ::zeros(n);
    let mut emit = |dir: VecF, end: &mut VecQ| {
        if dir.iter().all(|x| *x == 0.0) {
            return;
        }
        knots.push(end.to_f64());
        *end = alg.mul(end, &dir.to_q());
        segments.push(Segment::new(dir, 1.0));
    };

    let mut first = VecF::zeros(n);
    for &i in carnot.first_layer() {
        first[i] = g[i];
    }
    emit(first, &mut end);

    for m in 2..=carnot.step() {
        for _ in 0..MAX_PASSES {
            let e = alg.left_diff(&end, &gq);
            let idx = carnot.layer_indices(m);
            let size = idx
                .iter()
                .map(|&i| e[i].to_f64().powi(2))
                .sum::<f64>()
                .sqrt()
                .powf(1.0 / m as f64);
            if idx.iter().all(|&i| e[i].is_zero()) || size <= 1e-3 * target {
                break;
            }
            for expr in carnot.expressions(m) {
                let c = &e[expr.coord];
                if c.is_zero() {
                    continue;
                }
                for (a, word) in &expr.terms {
                    let coef = (c.clone() * a.clone()).to_f64();
                    let t = coef.abs().powf(1.0 / m as f64);
                    if t == 0.0 || !t.is_finite() {
                        continue;
                    }
                    for dir in commutator_word(&word.0, t, coef < 0.0, n) {
                        emit(dir, &mut end);
                    }
                }
            }
        }
    }
    let residual = quasi_norm(alg, &alg.left_diff(&end, &gq).to_f64());
    if residual > target {
        return Err(Error::PathTolerance {
            residual,
            tol: target,
        });
    }
    Ok(HorizontalPath {
        start: VecF::zeros(n),
        segments,
        knots,
        endpoint: end,
    })
}

/// Horizontal path from `a` to `b`.
pub fn horizontal_connect_between(
    carnot: &CarnotGroup,
    a: &[f64],
    b: &[f64],
    tol: f64,
) -> Result<HorizontalPath> {
    let alg = carnot.algebra();
    let rel = horizontal_connect(carnot, &alg.left_diff(a, b), tol)?;
    Ok(rel.translated(alg, a))
}

/// Length of the constructed path: an upper bound for the Carnot-Carathéodory
/// distance from the identity to `g`.
pub fn cc_upper_bound(carnot: &CarnotGroup, g: &[f64]) -> Result<f64> {
    Ok(horizontal_connect(carnot, g, 1e-9)?.length())
}

/// `sum over segments of [ integral of c along the segment, X ]` where `X` is
/// the segment direction lifted to the complement `H`.
pub fn integrate_bracket_form(
    dec: &CbCDecomposition,
    c: &ShearComponent,
    path: &HorizontalPath,
    tol: f64,
) -> Result<VecF> {
    let n = dec.dim();
    let mut total = VecF::zeros(n);
    if c.is_zero() {
        return Ok(total);
    }
    let qalg = dec.carnot().algebra();
    let layer = c.layer();
    for (knot, seg) in path.knots().iter().zip(path.segments()) {
        let mut f = |t: f64| -> Result<VecF> {
            let p = qalg.mul(knot, &seg.direction.scale(&t));
            let v = c.eval(&p)?;
            let residual = dec.z_residual(layer, &v);
            if residual > 1e-9 * v.max_abs().max(1.0) {
                return Err(Error::EscapesCenter { layer, residual });
            }
            Ok(v)
        };
        let integral = adaptive_simpson(&mut f, 0.0, seg.duration, tol)?;
        let x = dec.include_h(&seg.direction);
        total = &total + &dec.algebra().br(&integral, &x);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::qi;

    fn heisenberg() -> CarnotGroup {
        CarnotGroup::new(
            GradedAlgebra::builder()
                .basis("x", qi(1))
                .basis("y", qi(1))
                .basis("z", qi(2))
                .bracket("x", "y", "z", qi(1))
                .build()
                .unwrap(),
        )
        .unwrap()
    }

    fn engel() -> CarnotGroup {
        CarnotGroup::new(
            GradedAlgebra::builder()
                .basis("e0", qi(1))
                .basis("e1", qi(1))
                .basis("e2", qi(2))
                .basis("e3", qi(3))
                .bracket("e0", "e1", "e2", qi(1))
                .bracket("e0", "e2", "e3", qi(1))
                .build()
                .unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn heisenberg_rectangle() {
        let h = heisenberg();
        let p = horizontal_connect(&h, &[0.0, 0.0, 1.0], 1e-12).unwrap();
        assert_eq!(p.segment_count(), 4);
        assert_eq!(p.endpoint_exact(), &Vector(vec![qi(0), qi(0), qi(1)]));
        assert!((p.length() - 4.0).abs() < 1e-15);
        let dirs: Vec<VecF> = p.segments().iter().map(|s| s.direction.clone()).collect();
        assert_eq!(dirs[0], Vector(vec![1.0, 0.0, 0.0]));
        assert_eq!(dirs[1], Vector(vec![0.0, 1.0, 0.0]));
        assert_eq!(dirs[2], Vector(vec![-1.0, 0.0, 0.0]));
        assert_eq!(dirs[3], Vector(vec![0.0, -1.0, 0.0]));
    }

    #[test]
    fn horizontal_target_is_one_segment() {
        let h = heisenberg();
        let p = horizontal_connect(&h, &[3.0, 0.0, 0.0], 1e-12).unwrap();
        assert_eq!(p.segment_count(), 1);
        assert_eq!(p.length(), 3.0);
        assert_eq!(cc_upper_bound(&h, &[3.0, 0.0, 0.0]).unwrap(), 3.0);
    }

    #[test]
    fn engel_top_layer_target() {
        let e = engel();
        let g = [0.0, 0.0, 0.0, 1.0];
        let p = horizontal_connect(&e, &g, 1e-9).unwrap();
        let res = quasi_norm(e.algebra(), &e.algebra().left_diff(p.endpoint_exact(), &Vector(g.to_vec()).to_q()).to_f64());
        assert!(res <= 1e-9);
        assert!(p.segment_count() <= segment_bound(&e));
        assert_eq!(word_length(3), 10);
    }

    #[test]
    fn negative_coefficients_swap_operands() {
        let h = heisenberg();
        let p = horizontal_connect(&h, &[0.0, 0.0, -2.0], 1e-12).unwrap();
        let z = p.endpoint_exact()[2].clone();
        assert!((z.to_f64() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn reversed_and_translated_paths() {
        let h = heisenberg();
        let a = h.algebra();
        let p = horizontal_connect(&h, &[1.0, -2.0, 0.5], 1e-12).unwrap();
        let back = p.reversed(a);
        let loop_ = p.then(a, &back);
        assert!(loop_.endpoint().max_abs() < 1e-12);
        let t = p.translated(a, &[0.5, 0.5, 0.5]);
        let expect = a.mul(&[0.5, 0.5, 0.5], &p.endpoint());
        assert!((&t.endpoint() - &expect).max_abs() < 1e-12);
    }
}
