use std::sync::Arc;

use super::{Factor, FiberMap};
use crate::carnot::CbCDecomposition;
use crate::error::{Error, Result};
use crate::group::{conjugate, dilation_matrix, right_derivative};
use crate::sampling::{sample_ball, sample_quotient_ball, Sampler};
use crate::scalar::{factorial, Scalar, Q};
use crate::shear::{ComponentFn, ShearComponent, ShearMap};
use crate::vector::{MatF, MatQ, Matrix, VecF, Vector};

/// Normal form `F(h * w) = F(0) * Bh * Aw * A s(h̄)`.
#[derive(Clone)]
pub struct CompatibleExpression {
    dec: Arc<CbCDecomposition>,
    base: VecF,
    phi: MatQ,
    b: MatQ,
    a: MatQ,
    s: Option<Arc<dyn ComponentFn>>,
}

impl std::fmt::Debug for CompatibleExpression {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CompatibleExpression")
            .field("base", &self.base)
            .field("b", &self.b)
            .field("a", &self.a)
            .field("s_is_zero", &self.s.is_none())
            .finish()
    }
}

/// Quotient action `P Φ ι` of an automorphism preserving `w`, in quotient coordinates.
pub(crate) fn quotient_linear(dec: &CbCDecomposition, phi: &MatQ) -> MatQ {
    let m = dec.quotient_dim();
    let cols: Vec<Vector<Q>> = (0..m)
        .map(|i| dec.project(&phi.mul_vec(&dec.include_h(&Vector::<Q>::basis(m, i)))))
        .collect();
    MatQ::from_columns(&cols, m)
}

impl CompatibleExpression {
    pub fn dec(&self) -> &Arc<CbCDecomposition> {
        &self.dec
    }

    /// `F(0)`.
    pub fn base(&self) -> &VecF {
        &self.base
    }

    /// Columns are `B e_i` for the coordinate basis of `H`, in the order of `h_indices`.
    pub fn b(&self) -> &MatQ {
        &self.b
    }

    /// Matrix of `A` in the reduced basis of `w`.
    pub fn a(&self) -> &MatQ {
        &self.a
    }

    /// The ambient automorphism whose restrictions give `B` and `A`.
    pub fn phi(&self) -> &MatQ {
        &self.phi
    }

    pub fn s_is_zero(&self) -> bool {
        self.s.is_none()
    }

    /// Same expression with `A` replaced; used to probe the checks.
    pub fn with_a(&self, a: MatQ) -> Self {
        CompatibleExpression { a, ..self.clone() }
    }

    pub fn with_b(&self, b: MatQ) -> Self {
        CompatibleExpression { b, ..self.clone() }
    }

    pub fn s(&self, hbar: &[f64]) -> Result<VecF> {
        match &self.s {
            None => Ok(VecF::zeros(self.dec.dim())),
            Some(f) => f.eval(hbar),
        }
    }

    pub fn s_derivative(&self, hbar: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        match &self.s {
            None => Some(Ok(VecF::zeros(self.dec.dim()))),
            Some(f) => f.horizontal_derivative(hbar, v),
        }
    }

    /// The layer-`j` part `s_j` as a shear component.
    pub fn s_layer(&self, j: usize) -> ShearComponent {
        let n = self.dec.dim();
        match &self.s {
            None => ShearComponent::zero(j, n),
            Some(f) => ShearComponent::from_fn(
                j,
                n,
                Arc::new(LayerFn {
                    dec: self.dec.clone(),
                    inner: f.clone(),
                    j,
                }),
                &format!("s_{j}"),
            ),
        }
    }

    /// `Bh` for `h` in `H`, given in ambient coordinates.
    pub fn apply_b<S: Scalar>(&self, h: &[S]) -> Vector<S> {
        let coords = self.dec.project(h);
        Matrix::<S>::from_q(&self.b).mul_vec(&coords)
    }

    /// `Aw` for `w` in `w`, given in ambient coordinates.
    pub fn apply_a<S: Scalar>(&self, w: &[S]) -> Vector<S> {
        let sub = self.dec.w();
        let coords = sub.coords(w);
        sub.combine(&Matrix::<S>::from_q(&self.a).mul_vec(&coords))
    }

    /// Right-hand side `F(0) * Bh * Aw * A s(h̄)` at `g = h * w`.
    pub fn reconstruct(&self, g: &[f64]) -> Result<VecF> {
        let alg = self.dec.algebra();
        let (h, w) = self.dec.split(g);
        let s = self.s(&self.dec.project(g))?;
        let x = alg.mul(&self.base, &self.apply_b(&h));
        let x = alg.mul(&x, &self.apply_a(&w));
        Ok(alg.mul(&x, &self.apply_a(&s)))
    }

    /// Translation part of the induced quotient map.
    pub fn quotient_translation(&self) -> VecF {
        self.dec.project(&self.base)
    }

    /// Linear part of the induced quotient map, in quotient coordinates.
    pub fn quotient_linear(&self) -> MatQ {
        quotient_linear(&self.dec, &self.phi)
    }
}

struct LayerFn {
    dec: Arc<CbCDecomposition>,
    inner: Arc<dyn ComponentFn>,
    j: usize,
}

impl ComponentFn for LayerFn {
    fn eval(&self, q: &[f64]) -> Result<VecF> {
        Ok(self.dec.w_part(&self.inner.eval(q)?, self.j))
    }

    fn horizontal_derivative(&self, q: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        self.inner
            .horizontal_derivative(q, v)
            .map(|r| r.map(|d| self.dec.w_part(&d, self.j)))
    }
}

/// `S(h̄) + Φ⁻¹σ(c̄ * Φ̄h̄) - conj_{-h}(T0)` for a shear `σ` met after the
/// state `(c, Φ, S)`, where `T0 = Φ⁻¹σ(c̄)`.
struct ShearStepFn {
    dec: Arc<CbCDecomposition>,
    prev: Option<Arc<dyn ComponentFn>>,
    shear: Arc<ShearMap>,
    phi_inv: MatF,
    qlin: MatF,
    cbar: VecF,
    t0: VecF,
}

impl ShearStepFn {
    fn shifted(&self, hbar: &[f64]) -> VecF {
        let qalg = self.dec.carnot().algebra();
        qalg.mul(&self.cbar, &self.qlin.mul_vec(hbar))
    }
}

impl ComponentFn for ShearStepFn {
    fn eval(&self, hbar: &[f64]) -> Result<VecF> {
        let alg = self.dec.algebra();
        let mut t = self.phi_inv.mul_vec(&self.shear.s(&self.shifted(hbar))?);
        if let Some(p) = &self.prev {
            t = &t + &p.eval(hbar)?;
        }
        let h = self.dec.include_h(hbar);
        Ok(&t - &conjugate(alg, &-&h, &self.t0))
    }

    fn horizontal_derivative(&self, hbar: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        let alg = self.dec.algebra();
        let qalg = self.dec.carnot().algebra();
        let mut out = match &self.prev {
            None => VecF::zeros(self.dec.dim()),
            Some(p) => match p.horizontal_derivative(hbar, v)? {
                Ok(d) => d,
                Err(e) => return Some(Err(e)),
            },
        };
        match self
            .shear
            .horizontal_derivative(&self.shifted(hbar), &self.qlin.mul_vec(v))?
        {
            Ok(d) => out = &out + &self.phi_inv.mul_vec(&d),
            Err(e) => return Some(Err(e)),
        }
        // d/dt of sum_k ad_Y^k T0 / k! with Y = -ι(h̄ * t v).
        let y = -&self.dec.include_h(hbar);
        let dy = -&self.dec.include_h(&right_derivative(qalg, hbar, v));
        let step = alg.step().unwrap_or(alg.dim());
        let mut p = self.t0.clone();
        let mut dp = VecF::zeros(self.dec.dim());
        for k in 1..=step {
            let next_dp = &alg.br(&dy, &p) + &alg.br(&y, &dp);
            p = alg.br(&y, &p);
            dp = next_dp;
            if p.is_zero() && dp.is_zero() {
                break;
            }
            out.axpy(&-(1.0 / factorial(k).to_f64()), &dp);
        }
        Some(Ok(out))
    }
}

/// Closed-form compatible expression of a factor chain, by normal ordering.
///
/// The chain is tracked as `F(g) = c * Φ(g * S(ḡ))`. Translations and
/// automorphisms act on `(c, Φ)`; a shear `σ` turns `S` into
/// `T = S + Φ⁻¹σ(c̄ * Φ̄ ·)`, which is renormalised so that `S(0) = 0` by moving
/// `T(0)` into `c` and subtracting its conjugate by `h`.
pub fn extract_compatible(f: &FiberMap) -> Result<CompatibleExpression> {
    let dec = f.dec().clone();
    let alg = dec.algebra();
    let n = dec.dim();
    let mut c = VecF::zeros(n);
    let mut phi = MatQ::identity(n);
    let mut s: Option<Arc<dyn ComponentFn>> = None;
    for factor in f.factors() {
        match factor {
            Factor::Translate(a) => c = alg.mul(a, &c),
            Factor::Automorphism(m) => {
                c = m.to_f64().mul_vec(&c);
                phi = m.mul(&phi);
            }
            Factor::Dilate(r) => {
                let d = dilation_matrix::<Q>(alg, r).map_err(|_| {
                    Error::UnsupportedFactor(format!(
                        "dilation by {r} has no exact matrix for these weights"
                    ))
                })?;
                c = d.to_f64().mul_vec(&c);
                phi = d.mul(&phi);
            }
            Factor::Shear(map) => {
                if map.is_identity() {
                    continue;
                }
                let phi_inv = phi
                    .inverse()
                    .ok_or_else(|| Error::NotAutomorphism("singular factor".into()))?
                    .to_f64();
                let cbar = dec.project(&c);
                let t0 = phi_inv.mul_vec(&map.s(&cbar)?);
                let step = ShearStepFn {
                    dec: dec.clone(),
                    prev: s.take(),
                    shear: map.clone(),
                    phi_inv,
                    qlin: quotient_linear(&dec, &phi).to_f64(),
                    cbar,
                    t0: t0.clone(),
                };
                c = alg.mul(&c, &phi.to_f64().mul_vec(&t0));
                s = Some(Arc::new(step));
            }
        }
    }
    let h_idx = dec.h_indices().to_vec();
    let b = phi.select(&(0..n).collect::<Vec<_>>(), &h_idx);
    let w = dec.w();
    let a_cols: Vec<Vector<Q>> = w
        .basis()
        .iter()
        .map(|bl| Vector(w.coords(&phi.mul_vec(bl))))
        .collect();
    let a = MatQ::from_columns(&a_cols, w.dim());
    Ok(CompatibleExpression {
        dec,
        base: c,
        phi,
        b,
        a,
        s,
    })
}

/// Outcome of [`verify_compatible`].
#[derive(Clone, Debug, PartialEq)]
pub struct CompatibleReport {
    /// `B(H_λ) ⊆ V_λ`, exactly.
    pub graded_b: bool,
    /// Largest `|π B h - dB̄ π h|` over the basis of `H`, with `dB̄` read off `F`.
    pub quotient_defect: f64,
    /// First basis pair `(h, w)` with `[Bh, Aw] != A[h, w]`, exactly.
    pub bracket_failure: Option<(usize, usize)>,
    /// Largest relative distance of sampled `s(h̄)` from `Z(w)`.
    pub centrality_defect: f64,
    /// Largest relative gap between `F(g)` and the normal form.
    pub reconstruction_defect: f64,
    /// Extraction at `F_p` gave identical `B` and `A` for every sampled `p`.
    pub same_b: bool,
    pub samples: usize,
    pub tolerance: f64,
}

impl CompatibleReport {
    pub fn passed(&self) -> bool {
        self.graded_b
            && self.quotient_defect <= self.tolerance
            && self.bracket_failure.is_none()
            && self.centrality_defect <= self.tolerance
            && self.reconstruction_defect <= self.tolerance
            && self.same_b
    }
}

pub const COMPATIBLE_TOL: f64 = 1e-10;

fn bracket_failure(expr: &CompatibleExpression) -> Option<(usize, usize)> {
    let dec = expr.dec();
    let alg = dec.algebra();
    let n = dec.dim();
    for &i in dec.h_indices() {
        let h = Vector::<Q>::basis(n, i);
        let bh = expr.apply_b(&h);
        for (l, wl) in dec.w().basis().iter().enumerate() {
            let lhs = alg.br(&bh, &expr.apply_a(wl));
            let rhs = expr.apply_a(&alg.br(&h, wl));
            if lhs != rhs {
                return Some((i, l));
            }
        }
    }
    None
}

/// Identity `Bh * Aw * (Bh)⁻¹ = A(h * w * h⁻¹)` in exact arithmetic on every
/// pair of basis vectors; returns the first failing pair.
pub fn cc_identity_check(expr: &CompatibleExpression) -> Option<(usize, usize)> {
    let dec = expr.dec();
    let alg = dec.algebra();
    let n = dec.dim();
    for &i in dec.h_indices() {
        let h = Vector::<Q>::basis(n, i);
        let bh = expr.apply_b(&h);
        for (l, wl) in dec.w().basis().iter().enumerate() {
            let lhs = conjugate(alg, &bh, &expr.apply_a(wl));
            let rhs = expr.apply_a(&conjugate(alg, &h, wl));
            if lhs != rhs {
                return Some((i, l));
            }
        }
    }
    None
}

/// Checks the defining conditions of a compatible expression for `f`, plus
/// the same-`B` property at sampled base points.
pub fn verify_compatible(
    f: &FiberMap,
    expr: &CompatibleExpression,
    sampler: &Sampler,
) -> Result<CompatibleReport> {
    let dec = f.dec();
    let alg = dec.algebra();
    let qalg = dec.carnot().algebra();
    let n = dec.dim();
    let m = dec.quotient_dim();

    let graded_b = dec.h_indices().iter().enumerate().all(|(col, &i)| {
        (0..n).all(|r| alg.weight(r) == alg.weight(i) || expr.b()[(r, col)] == Q::from_i64(0))
    });

    let b0 = f.quotient_eval(&VecF::zeros(m))?;
    let mut quotient_defect: f64 = 0.0;
    for (k, &i) in dec.h_indices().iter().enumerate() {
        let e = Vector::<f64>::basis(n, i);
        let lhs = dec.project(&expr.apply_b(&e));
        let rhs = qalg.left_diff(&b0, &f.quotient_eval(&Vector::<f64>::basis(m, k))?);
        quotient_defect = quotient_defect.max((&lhs - &rhs).max_abs());
    }

    let bracket_failure = bracket_failure(expr);

    let mut sq = sampler.stream(11);
    let mut centrality_defect: f64 = 0.0;
    for _ in 0..sampler.count {
        let hbar = sample_quotient_ball(dec, &mut sq, sampler.radius);
        let s = expr.s(&hbar)?;
        let r = dec.center().space.residual_f64(&s).max_abs();
        centrality_defect = centrality_defect.max(r / s.max_abs().max(1.0));
    }

    let mut sg = sampler.stream(12);
    let mut reconstruction_defect: f64 = 0.0;
    for _ in 0..sampler.count {
        let g = sample_ball(alg, &mut sg, sampler.radius);
        let lhs = f.eval(&g)?;
        let rhs = expr.reconstruct(&g)?;
        reconstruction_defect =
            reconstruction_defect.max((&lhs - &rhs).max_abs() / lhs.max_abs().max(1.0));
    }
    let base_gap = (&f.eval(&VecF::zeros(n))? - expr.base()).max_abs();
    reconstruction_defect = reconstruction_defect.max(base_gap);

    let own = extract_compatible(f)?;
    let mut sp = sampler.stream(13);
    let mut same_b = true;
    for _ in 0..sampler.count.min(16) {
        let p = sample_ball(alg, &mut sp, sampler.radius);
        let other = extract_compatible(&f.conjugated_at(&p)?)?;
        same_b &= other.b() == own.b() && other.a() == own.a();
    }

    Ok(CompatibleReport {
        graded_b,
        quotient_defect,
        bracket_failure,
        centrality_defect,
        reconstruction_defect,
        same_b,
        samples: sampler.count,
        tolerance: COMPATIBLE_TOL,
    })
}
