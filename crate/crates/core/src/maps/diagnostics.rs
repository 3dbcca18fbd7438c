use super::compatible::extract_compatible;
use super::FiberMap;
use crate::algebra::GradedAlgebra;
use crate::error::{Error, Result};
use crate::group::{check_automorphism, dilate, quasi_norm};
use crate::sampling::{sample_ball, Sampler};
use crate::scalar::{q_from_f64, q_powi, q_to_f64, Scalar, Q};
use crate::vector::{MatQ, Matrix, VecF, Vector};

/// Scale schedule for [`pansu_check`].
pub const PANSU_SCALES: [f64; 4] = [1e-1, 1e-2, 1e-3, 1e-4];

#[derive(Clone, Debug, PartialEq)]
pub struct AutomorphismReport {
    /// Largest relative gap `|G(x*y) - G(x)*G(y)|` with `G = L_{F(0)⁻¹} ∘ F`.
    pub defect: f64,
    /// Whether `F(0) != 0`, so that `G` differs from `F`.
    pub normalized: bool,
    pub samples: usize,
    pub tolerance: f64,
}

impl AutomorphismReport {
    pub fn passed(&self) -> bool {
        self.defect <= self.tolerance
    }
}

pub const AUTOMORPHISM_TOL: f64 = 1e-10;

pub fn automorphism_check(f: &FiberMap, sampler: &Sampler) -> Result<AutomorphismReport> {
    let dec = f.dec();
    let alg = dec.algebra();
    let f0 = f.eval(&VecF::zeros(dec.dim()))?;
    let normalized = !f0.is_zero();
    let g = |x: &[f64]| -> Result<VecF> { Ok(alg.left_diff(&f0, &f.eval(x)?)) };
    let mut s = sampler.stream(21);
    let mut defect: f64 = 0.0;
    for _ in 0..sampler.count {
        let x = sample_ball(alg, &mut s, sampler.radius);
        let y = sample_ball(alg, &mut s, sampler.radius);
        let lhs = g(&alg.mul(&x, &y))?;
        let rhs = alg.mul(&g(&x)?, &g(&y)?);
        defect = defect.max((&lhs - &rhs).max_abs() / lhs.max_abs().max(1.0));
    }
    Ok(AutomorphismReport {
        defect,
        normalized,
        samples: sampler.count,
        tolerance: AUTOMORPHISM_TOL,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExponentReport {
    pub lambda_a: f64,
    pub lambda_b: f64,
    /// `λ_B̄ - λ_A^α`; exactly zero when the squared ratios match in rationals.
    pub defect: f64,
    /// Exact comparison `λ_B̄² = (λ_A²)^α`, available for integer alpha.
    pub exact: Option<bool>,
}

/// `λ²` with `M^T M = λ² I` exactly.
fn exact_ratio_sq(m: &MatQ) -> Option<Q> {
    let g = m.transpose().mul(m);
    let n = g.nrows();
    if n == 0 {
        return Some(Q::from_i64(1));
    }
    let l2 = g[(0, 0)].clone();
    let ok = (0..n).all(|i| {
        (0..n).all(|j| {
            if i == j {
                g[(i, j)] == l2
            } else {
                g[(i, j)] == Q::from_i64(0)
            }
        })
    });
    ok.then_some(l2)
}

/// Reads `λ_A` from `A` on `W_1` and `λ_B̄` from the quotient map on its
/// first layer, and compares `λ_B̄` with `λ_A^α`.
pub fn similarity_exponent_check(gamma: &FiberMap) -> Result<ExponentReport> {
    let dec = gamma.dec();
    let expr = extract_compatible(gamma)?;
    let w = dec.w();
    let first: Vec<usize> = (0..w.dim())
        .filter(|&k| dec.algebra().weight(w.pivots()[k]) == dec.lambda1())
        .collect();
    let qfirst = dec.quotient_layer(1);
    let la2 = exact_ratio_sq(&expr.a().select(&first, &first))
        .ok_or_else(|| Error::NotSimilarity("A is not a similarity on W_1".into()))?;
    let lb2 = exact_ratio_sq(&expr.quotient_linear().select(&qfirst, &qfirst))
        .ok_or_else(|| Error::NotSimilarity("the quotient map is not a similarity".into()))?;
    let lambda_a = q_to_f64(&la2).sqrt();
    let lambda_b = q_to_f64(&lb2).sqrt();
    let exact = dec
        .alpha_integer()
        .map(|a| lb2 == q_powi(&la2, a as i64));
    let defect = if exact == Some(true) {
        0.0
    } else {
        lambda_b - lambda_a.powf(dec.alpha_f64())
    };
    Ok(ExponentReport {
        lambda_a,
        lambda_b,
        defect,
        exact,
    })
}

/// For each scale `t`, the largest `ρ(F(x)⁻¹ F(y), L(x⁻¹ y)) / ρ(x, y)` over
/// `y = x * δ_t u` with `ρ(u) = 1`. Works in exact arithmetic when `S = Q`.
pub fn pansu_check<S, F>(
    alg: &GradedAlgebra,
    f: F,
    x: &[S],
    l: &Matrix<S>,
    scales: &[f64],
    sampler: &Sampler,
) -> Result<Vec<f64>>
where
    S: Scalar,
    F: Fn(&[S]) -> Result<Vector<S>>,
{
    let verdict = check_automorphism(alg, l, if S::EXACT { 0.0 } else { 1e-12 });
    if !(verdict.homomorphism && verdict.graded) {
        return Err(Error::NotAutomorphism(format!(
            "candidate differential is not a graded homomorphism: {verdict:?}"
        )));
    }
    let fx = f(x)?;
    let mut units = Vec::with_capacity(sampler.count);
    let mut s = sampler.stream(31);
    while units.len() < sampler.count {
        let u = sample_ball(alg, &mut s, 1.0);
        let r = quasi_norm(alg, &u);
        if r > 0.0 {
            let u = dilate(alg, &(1.0 / r), &u)?;
            units.push(Vector(u.iter().map(|&c| S::from_q(&q_from_f64(c))).collect::<Vec<S>>()));
        }
    }
    let mut out = Vec::with_capacity(scales.len());
    for &t in scales {
        let ts = S::from_q(&q_from_f64(t));
        let mut worst: f64 = 0.0;
        for u in &units {
            let step = dilate(alg, &ts, u)?;
            let y = alg.mul(x, &step);
            let lhs = alg.left_diff(&fx, &f(&y)?);
            let rhs = l.mul_vec(&step);
            let num = quasi_norm(alg, &alg.left_diff(&lhs, &rhs).to_f64());
            let den = quasi_norm(alg, &step.to_f64());
            worst = worst.max(num / den);
        }
        out.push(worst);
    }
    Ok(out)
}
