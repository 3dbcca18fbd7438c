use super::compatible::extract_compatible;
use super::FiberMap;
use crate::carnot::CbCDecomposition;
use crate::error::{Error, Result};
use crate::vector::{MatF, VecF, Vector};

/// Scales `e^{αt}` of the finite-difference quotient, coarsest first.
pub const FD_SCALES: [f64; 3] = [1e-2, 1e-3, 1e-4];

/// Relative agreement required between the two Richardson estimates.
const FD_SPREAD_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DalphaMode {
    /// Closed form when `s_α` has a symbolic derivative, finite differences otherwise.
    Auto,
    ClosedForm,
    FiniteDifference,
}

/// `D_αF(p)` on `V_α`, in the coordinate basis listed by `indices`.
#[derive(Clone, Debug, PartialEq)]
pub struct DalphaMatrix {
    pub indices: Vec<usize>,
    pub matrix: MatF,
    /// The mode actually used.
    pub mode: DalphaMode,
}

fn v_alpha(dec: &CbCDecomposition) -> Result<(usize, Vec<usize>)> {
    let a = dec
        .alpha_integer()
        .ok_or_else(|| Error::AlphaNotInteger(dec.alpha().to_string()))?;
    Ok((a, dec.v_alpha_indices()))
}

/// `D_αF(p)(h + w) = Bh + Aw + A Ds_α(p̄)(h̄)`.
fn closed_form(f: &FiberMap, p: &[f64]) -> Result<Option<MatF>> {
    let dec = f.dec();
    let (alpha, idx) = v_alpha(dec)?;
    let expr = extract_compatible(f)?;
    let n = dec.dim();
    let pbar = dec.project(p);
    let mut m = MatF::zeros(idx.len(), idx.len());
    for (col, &i) in idx.iter().enumerate() {
        let v = Vector::<f64>::basis(n, i);
        let h = dec.include_h(&dec.project(&v));
        let w = &v - &h;
        let ds = match expr.s_derivative(&pbar, &dec.project(&v)) {
            None => return Ok(None),
            Some(r) => dec.w_part(&r?, alpha),
        };
        let out = &(&expr.apply_b(&h) + &expr.apply_a(&w)) + &expr.apply_a(&ds);
        for (row, &r) in idx.iter().enumerate() {
            m[(row, col)] = out[r];
        }
    }
    Ok(Some(m))
}

/// `π_α F_p(τ v) / τ` at the scales of [`FD_SCALES`], extrapolated twice
/// assuming first-order error; the two extrapolants must agree.
fn finite_difference(f: &FiberMap, p: &[f64]) -> Result<MatF> {
    let dec = f.dec();
    let alg = dec.algebra();
    let (_, idx) = v_alpha(dec)?;
    let n = dec.dim();
    let fp = f.eval(p)?;
    let mut m = MatF::zeros(idx.len(), idx.len());
    let mut spread: f64 = 0.0;
    for (col, &i) in idx.iter().enumerate() {
        let mut est = Vec::with_capacity(FD_SCALES.len());
        for &tau in &FD_SCALES {
            let mut v = VecF::zeros(n);
            v[i] = tau;
            let y = f.eval(&alg.mul(p, &v))?;
            let d = alg.left_diff(&fp, &y);
            est.push(idx.iter().map(|&r| d[r] / tau).collect::<Vec<f64>>());
        }
        let rich = |a: usize, b: usize| -> Vec<f64> {
            let (ta, tb) = (FD_SCALES[a], FD_SCALES[b]);
            est[a]
                .iter()
                .zip(&est[b])
                .map(|(da, db)| (ta * db - tb * da) / (ta - tb))
                .collect()
        };
        let r1 = rich(0, 1);
        let r2 = rich(1, 2);
        let scale = r2.iter().fold(1.0f64, |acc, x| acc.max(x.abs()));
        let gap = r1
            .iter()
            .zip(&r2)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        spread = spread.max(gap / scale);
        for (row, x) in r2.into_iter().enumerate() {
            m[(row, col)] = x;
        }
    }
    if !(spread <= FD_SPREAD_TOL) {
        return Err(Error::NonConvergent { spread });
    }
    Ok(m)
}

pub fn d_alpha_matrix(f: &FiberMap, p: &[f64], mode: DalphaMode) -> Result<DalphaMatrix> {
    let (_, indices) = v_alpha(f.dec())?;
    Vector(p.to_vec()).check_dim(f.dec().dim())?;
    let (matrix, used) = match mode {
        DalphaMode::FiniteDifference => (finite_difference(f, p)?, mode),
        DalphaMode::ClosedForm => match closed_form(f, p)? {
            Some(m) => (m, mode),
            None => {
                return Err(Error::UnsupportedFactor(
                    "s_alpha has no closed-form derivative".into(),
                ))
            }
        },
        DalphaMode::Auto => match closed_form(f, p) {
            Ok(Some(m)) => (m, DalphaMode::ClosedForm),
            Ok(None) | Err(Error::UnsupportedFactor(_)) => {
                (finite_difference(f, p)?, DalphaMode::FiniteDifference)
            }
            Err(e) => return Err(e),
        },
    };
    Ok(DalphaMatrix {
        indices,
        matrix,
        mode: used,
    })
}

/// `D_αF(p) v` for `v` given in the coordinates of `V_α`.
pub fn d_alpha(f: &FiberMap, p: &[f64], v: &[f64], mode: DalphaMode) -> Result<VecF> {
    let d = d_alpha_matrix(f, p, mode)?;
    Vector(v.to_vec()).check_dim(d.indices.len())?;
    Ok(d.matrix.mul_vec(v))
}

/// Largest entry of the difference between the two evaluation modes.
pub fn d_alpha_agreement(f: &FiberMap, p: &[f64]) -> Result<f64> {
    let c = d_alpha_matrix(f, p, DalphaMode::ClosedForm)?;
    let d = d_alpha_matrix(f, p, DalphaMode::FiniteDifference)?;
    Ok(c.matrix.sub(&d.matrix).max_abs())
}

/// Operator-norm gap in `D_α(F ∘ G)(p) = D_αF(G(p)) ∘ D_αG(p)`.
pub fn chain_rule_check(f: &FiberMap, g: &FiberMap, p: &[f64], mode: DalphaMode) -> Result<f64> {
    let fg = f.after(g);
    let lhs = d_alpha_matrix(&fg, p, mode)?;
    let df = d_alpha_matrix(f, &g.eval(p)?, mode)?;
    let dg = d_alpha_matrix(g, p, mode)?;
    Ok(lhs.matrix.sub(&df.matrix.mul(&dg.matrix)).operator_norm())
}
