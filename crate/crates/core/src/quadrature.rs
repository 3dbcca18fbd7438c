//! Adaptive Simpson quadrature for vector-valued integrands.

use crate::error::Result;
use crate::vector::VecF;

pub const MAX_DEPTH: usize = 30;

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` (max-norm).
///
/// Intervals that reach [`MAX_DEPTH`] are accepted as they stand, which keeps
/// integrable singularities at endpoints cheap.
pub fn adaptive_simpson<F>(f: &mut F, a: f64, b: f64, tol: f64) -> Result<VecF>
where
    F: FnMut(f64) -> Result<VecF>,
{
    let fa = f(a)?;
    let fb = f(b)?;
    if a == b {
        return Ok(fa.scale(&0.0));
    }
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = simpson(a, b, &fa, &fm, &fb);
    recurse(f, a, b, &fa, &fm, &fb, whole, tol, MAX_DEPTH)
}

fn simpson(a: f64, b: f64, fa: &VecF, fm: &VecF, fb: &VecF) -> VecF {
    let h = (b - a) / 6.0;
    let mut s = fa + fb;
    s.axpy(&4.0, fm);
    s.scale(&h)
}

#[allow(clippy::too_many_arguments)]
fn recurse<F>(
    f: &mut F,
    a: f64,
    b: f64,
    fa: &VecF,
    fm: &VecF,
    fb: &VecF,
    whole: VecF,
    tol: f64,
    depth: usize,
) -> Result<VecF>
where
    F: FnMut(f64) -> Result<VecF>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = simpson(a, m, fa, &flm, fm);
    let right = simpson(m, b, fm, &frm, fb);
    let both = &left + &right;
    let diff = &both - &whole;
    if depth == 0 || diff.max_abs() <= 15.0 * tol {
        let mut out = both;
        out.axpy(&(1.0 / 15.0), &diff);
        return Ok(out);
    }
    let l = recurse(f, a, m, fa, &flm, fm, left, 0.5 * tol, depth - 1)?;
    let r = recurse(f, m, b, fm, &frm, fb, right, 0.5 * tol, depth - 1)?;
    Ok(&l + &r)
}
