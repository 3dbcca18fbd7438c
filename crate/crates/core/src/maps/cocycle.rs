use std::collections::BTreeMap;
use std::sync::Arc;

use super::compatible::extract_compatible;
use super::{Factor, FiberMap};
use crate::carnot::CbCDecomposition;
use crate::error::{Error, Result};
use crate::scalar::qi;
use crate::shear::{ComponentFn, ShearComponent, ShearMap};
use crate::vector::{MatF, VecF};

/// `Ψ(γ) = (A_γ, γ̄)`: an automorphism of `w` and an affine similarity of the quotient.
#[derive(Clone, Debug)]
pub struct SimilarityPair {
    dec: Arc<CbCDecomposition>,
    a: MatF,
    a_inv: MatF,
    b_translation: VecF,
    b_linear: MatF,
    lambda_a: f64,
    lambda_b: f64,
}

/// Ratio `λ` with `M^T M = λ² I`, within a relative tolerance.
fn similarity_ratio(m: &MatF) -> Option<f64> {
    let g = m.transpose().mul(m);
    let n = g.nrows();
    if n == 0 {
        return Some(1.0);
    }
    let l2 = (0..n).map(|i| g[(i, i)]).sum::<f64>() / n as f64;
    let ok = (0..n).all(|i| (0..n).all(|j| {
        let target = if i == j { l2 } else { 0.0 };
        (g[(i, j)] - target).abs() <= 1e-12 * l2.max(1.0)
    }));
    (ok && l2 > 0.0).then(|| l2.sqrt())
}

impl SimilarityPair {
    /// `a` in the reduced basis of `w`; `b` acts on quotient coordinates as
    /// `x -> b_translation * b_linear x`.
    pub fn new(
        dec: Arc<CbCDecomposition>,
        a: MatF,
        b_translation: VecF,
        b_linear: MatF,
    ) -> Result<Self> {
        let w = dec.w();
        let first: Vec<usize> = (0..w.dim())
            .filter(|&k| dec.algebra().weight(w.pivots()[k]) == dec.lambda1())
            .collect();
        let lambda_a = similarity_ratio(&a.select(&first, &first))
            .ok_or_else(|| Error::NotSimilarity("A is not a similarity on W_1".into()))?;
        let qfirst: Vec<usize> = dec.quotient_layer(1);
        let lambda_b = similarity_ratio(&b_linear.select(&qfirst, &qfirst))
            .ok_or_else(|| Error::NotSimilarity("the quotient map is not a similarity".into()))?;
        let a_inv = a
            .inverse()
            .ok_or_else(|| Error::NotSimilarity("A is singular".into()))?;
        Ok(SimilarityPair {
            dec,
            a,
            a_inv,
            b_translation,
            b_linear,
            lambda_a,
            lambda_b,
        })
    }

    pub fn identity(dec: Arc<CbCDecomposition>) -> Self {
        let (k, m) = (dec.w().dim(), dec.quotient_dim());
        SimilarityPair {
            dec,
            a: MatF::identity(k),
            a_inv: MatF::identity(k),
            b_translation: VecF::zeros(m),
            b_linear: MatF::identity(m),
            lambda_a: 1.0,
            lambda_b: 1.0,
        }
    }

    /// `Ψ(γ)` read off the compatible expression of `γ`.
    pub fn from_map(f: &FiberMap) -> Result<Self> {
        let expr = extract_compatible(f)?;
        Self::new(
            f.dec().clone(),
            expr.a().to_f64(),
            expr.quotient_translation(),
            expr.quotient_linear().to_f64(),
        )
    }

    pub fn lambda_a(&self) -> f64 {
        self.lambda_a
    }

    pub fn lambda_b(&self) -> f64 {
        self.lambda_b
    }

    /// `λ_B̄ - λ_A^α`.
    pub fn exponent_defect(&self) -> f64 {
        self.lambda_b - self.lambda_a.powf(self.dec.alpha_f64())
    }

    pub fn apply_b(&self, hbar: &[f64]) -> VecF {
        self.dec
            .carnot()
            .algebra()
            .mul(&self.b_translation, &self.b_linear.mul_vec(hbar))
    }

    /// `A⁻¹ v` for `v` in `w`, ambient coordinates.
    pub fn apply_a_inv(&self, v: &[f64]) -> VecF {
        let w = self.dec.w();
        w.combine(&self.a_inv.mul_vec(&w.coords(v)))
    }

    /// `self ∘ other = (A_self A_other, B_self ∘ B_other)`.
    pub fn compose(&self, other: &SimilarityPair) -> SimilarityPair {
        SimilarityPair {
            dec: self.dec.clone(),
            a: self.a.mul(&other.a),
            a_inv: other.a_inv.mul(&self.a_inv),
            b_translation: self.apply_b(&other.b_translation),
            b_linear: self.b_linear.mul(&other.b_linear),
            lambda_a: self.lambda_a * other.lambda_a,
            lambda_b: self.lambda_b * other.lambda_b,
        }
    }

    pub fn inverse(&self) -> Result<SimilarityPair> {
        let l_inv = self
            .b_linear
            .inverse()
            .ok_or_else(|| Error::NotSimilarity("quotient map is singular".into()))?;
        Ok(SimilarityPair {
            dec: self.dec.clone(),
            a: self.a_inv.clone(),
            a_inv: self.a.clone(),
            b_translation: l_inv.mul_vec(&-&self.b_translation),
            b_linear: l_inv,
            lambda_a: 1.0 / self.lambda_a,
            lambda_b: 1.0 / self.lambda_b,
        })
    }

    /// `ψ^k` for any integer `k`.
    pub fn power(&self, k: i64) -> Result<SimilarityPair> {
        let base = if k < 0 { self.inverse()? } else { self.clone() };
        let mut out = SimilarityPair::identity(self.dec.clone());
        for _ in 0..k.unsigned_abs() {
            out = out.compose(&base);
        }
        Ok(out)
    }
}

struct ActionFn {
    pair: SimilarityPair,
    inner: ShearComponent,
    at_origin: VecF,
}

impl ComponentFn for ActionFn {
    fn eval(&self, hbar: &[f64]) -> Result<VecF> {
        let v = self.pair.apply_a_inv(&self.inner.eval(&self.pair.apply_b(hbar))?);
        Ok(&v - &self.at_origin)
    }

    fn horizontal_derivative(&self, hbar: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        let x = self.pair.apply_b(hbar);
        let lv = self.pair.b_linear.mul_vec(v);
        self.inner
            .horizontal_derivative(&x, &lv)
            .map(|r| r.map(|d| self.pair.apply_a_inv(&d)))
    }
}

/// `(π_{(A,B)} c)(h̄) = A⁻¹c(B h̄) - A⁻¹c(B 0)`.
pub fn cocycle_action(psi: &SimilarityPair, c: &ShearComponent) -> Result<ShearComponent> {
    let defect = psi.exponent_defect();
    if defect.abs() > 1e-12 * psi.lambda_b.max(1.0) {
        return Err(Error::NotSimilarity(format!(
            "lambda_B - lambda_A^alpha = {defect:e}"
        )));
    }
    if c.is_zero() {
        return Ok(c.clone());
    }
    let zero = VecF::zeros(psi.dec.quotient_dim());
    let at_origin = psi.apply_a_inv(&c.eval(&psi.apply_b(&zero))?);
    let label = format!("pi({})", c.label());
    Ok(ShearComponent::from_fn(
        c.layer(),
        c.dim(),
        Arc::new(ActionFn {
            pair: psi.clone(),
            inner: c.clone(),
            at_origin,
        }),
        &label,
    ))
}

/// `b_j(γ) = s_{γ,j}` for every layer `j < alpha` carrying a centre slice.
pub fn cocycle_of(gamma: &FiberMap) -> Result<BTreeMap<usize, ShearComponent>> {
    let dec = gamma.dec();
    let expr = extract_compatible(gamma)?;
    Ok(dec
        .z_layers()
        .keys()
        .copied()
        .filter(|&j| qi(j as i64) < *dec.alpha())
        .map(|j| (j, expr.s_layer(j)))
        .collect())
}

/// Largest gap in `b_j(γ₂γ₁) = b_j(γ₁) + π_{Ψ(γ₁)} b_j(γ₂)` over the grid and
/// all layers `j < alpha`; `γ₂γ₁` applies `γ₁` first.
pub fn cocycle_identity_check(g1: &FiberMap, g2: &FiberMap, grid: &[VecF]) -> Result<f64> {
    let b21 = cocycle_of(&g1.then(g2))?;
    let b1 = cocycle_of(g1)?;
    let b2 = cocycle_of(g2)?;
    let psi1 = SimilarityPair::from_map(g1)?;
    let mut worst: f64 = 0.0;
    for (j, lhs) in &b21 {
        let moved = cocycle_action(&psi1, &b2[j])?;
        for p in grid {
            let rhs = &b1[j].eval(p)? + &moved.eval(p)?;
            worst = worst.max((&lhs.eval(p)? - &rhs).max_abs());
        }
    }
    Ok(worst)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConjugationReport {
    pub layer: usize,
    /// Largest gap between `s̃_j` and `s_{γ,j} - c + π_{Ψ(γ)} c` on the grid.
    pub formula_defect: f64,
    /// Largest `|s̃_j|` on the grid.
    pub sup_residual: f64,
    pub grid_points: usize,
}

/// `γ̃ = F₀ ∘ γ ∘ F₀⁻¹` for a shear `F₀` generated by one base component on a
/// layer `j < alpha`.
pub fn conjugate_by_shear(
    f0: &ShearMap,
    gamma: &FiberMap,
    grid: &[VecF],
) -> Result<(FiberMap, ConjugationReport)> {
    let dec = gamma.dec();
    let &[j] = f0.base_layers() else {
        return Err(Error::UnsupportedFactor(format!(
            "conjugating shear must have exactly one base layer, found {:?}",
            f0.base_layers()
        )));
    };
    if qi(j as i64) >= *dec.alpha() {
        return Err(Error::LayerAboveAlpha {
            layer: j,
            alpha: dec.alpha().to_string(),
        });
    }
    let c = f0
        .component(j)
        .cloned()
        .unwrap_or_else(|| ShearComponent::zero(j, dec.dim()));
    let psi = SimilarityPair::from_map(gamma)?;
    let mut factors = vec![Factor::Shear(Arc::new(f0.inverse()))];
    factors.extend(gamma.factors().iter().cloned());
    factors.push(Factor::Shear(Arc::new(f0.clone())));
    let tilde = FiberMap::new(dec.clone(), factors)?;
    let s_tilde = extract_compatible(&tilde)?.s_layer(j);
    let s_gamma = extract_compatible(gamma)?.s_layer(j);
    let moved = cocycle_action(&psi, &c)?;
    let mut formula_defect: f64 = 0.0;
    let mut sup_residual: f64 = 0.0;
    for p in grid {
        let st = s_tilde.eval(p)?;
        let predicted = &(&s_gamma.eval(p)? - &c.eval(p)?) + &moved.eval(p)?;
        formula_defect = formula_defect.max((&st - &predicted).max_abs());
        sup_residual = sup_residual.max(st.max_abs());
    }
    Ok((
        tilde,
        ConjugationReport {
            layer: j,
            formula_defect,
            sup_residual,
            grid_points: grid.len(),
        },
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FixedPointMode {
    /// `c = sum_{k >= 0} π^k s`.
    Forward,
    /// `c = -sum_{k >= 1} π^{-k} s`, used when `π` expands.
    Inverse,
}

#[derive(Clone, Debug)]
pub struct FixedPointResult {
    pub component: ShearComponent,
    pub iterations: usize,
    /// Measured ratio `sup|π s| / sup|s|` (or of `π⁻¹`) on the grid.
    pub factor: f64,
    pub mode: FixedPointMode,
    /// `sup |c - s - π c|` on the grid.
    pub residual: f64,
}

fn grid_sup(c: &ShearComponent, grid: &[VecF]) -> Result<f64> {
    let mut m: f64 = 0.0;
    for p in grid {
        m = m.max(c.eval(p)?.max_abs());
    }
    Ok(m)
}

/// Solves `c = s_{γ,j} + π_{Ψ(γ)} c` by summing the Neumann series of the
/// affine map, or of its inverse when `π` expands on the grid. Terms are added
/// until the grid sup of the next term falls below `tol`.
pub fn solve_single_generator_fixed_point(
    gamma: &FiberMap,
    j: usize,
    max_iter: usize,
    tol: f64,
    grid: &[VecF],
) -> Result<FixedPointResult> {
    let dec = gamma.dec();
    if qi(j as i64) >= *dec.alpha() {
        return Err(Error::LayerAboveAlpha {
            layer: j,
            alpha: dec.alpha().to_string(),
        });
    }
    let psi = SimilarityPair::from_map(gamma)?;
    let s = extract_compatible(gamma)?.s_layer(j);
    let n = dec.dim();
    let s_sup = grid_sup(&s, grid)?;
    if s.is_zero() || s_sup == 0.0 {
        return Ok(FixedPointResult {
            component: ShearComponent::zero(j, n),
            iterations: 0,
            factor: 0.0,
            mode: FixedPointMode::Forward,
            residual: 0.0,
        });
    }
    let forward = grid_sup(&cocycle_action(&psi, &s)?, grid)? / s_sup;
    let inv = psi.inverse()?;
    let backward = grid_sup(&cocycle_action(&inv, &s)?, grid)? / s_sup;
    let (mode, factor, step) = if forward < 1.0 {
        (FixedPointMode::Forward, forward, psi.clone())
    } else if backward < 1.0 {
        (FixedPointMode::Inverse, backward, inv)
    } else {
        return Err(Error::NonContraction(forward.min(backward)));
    };
    let mut terms = Vec::new();
    let mut power = match mode {
        FixedPointMode::Forward => SimilarityPair::identity(dec.clone()),
        FixedPointMode::Inverse => step.clone(),
    };
    let sign = match mode {
        FixedPointMode::Forward => 1.0,
        FixedPointMode::Inverse => -1.0,
    };
    let mut iterations = 0;
    loop {
        if iterations >= max_iter {
            return Err(Error::MaxIterations(max_iter));
        }
        let term = cocycle_action(&power, &s)?.scaled(sign);
        let size = grid_sup(&term, grid)?;
        terms.push(term);
        iterations += 1;
        if size < tol {
            break;
        }
        power = step.compose(&power);
    }
    let component = ShearComponent::sum_all(j, n, &terms).with_label(format!("fixed_point({})", s.label()));
    let image = cocycle_action(&psi, &component)?;
    let mut residual: f64 = 0.0;
    for p in grid {
        let r = &(&component.eval(p)? - &s.eval(p)?) - &image.eval(p)?;
        residual = residual.max(r.max_abs());
    }
    Ok(FixedPointResult {
        component,
        iterations,
        factor,
        mode,
        residual,
    })
}
