//! Fiber-preserving maps built from translations, graded automorphisms,
//! dilations and shears, with their compatible expressions, differentials
//! and cocycles.

mod cocycle;
mod compatible;
mod diagnostics;
mod differential;

use std::fmt;
use std::sync::Arc;

pub use cocycle::{
    cocycle_action, cocycle_identity_check, cocycle_of, conjugate_by_shear,
    solve_single_generator_fixed_point, ConjugationReport, FixedPointMode, FixedPointResult,
    SimilarityPair,
};
pub use compatible::{
    cc_identity_check, extract_compatible, verify_compatible, CompatibleExpression,
    CompatibleReport,
};
pub use diagnostics::{
    automorphism_check, pansu_check, similarity_exponent_check, AutomorphismReport,
    ExponentReport, PANSU_SCALES,
};
pub use differential::{
    chain_rule_check, d_alpha, d_alpha_agreement, d_alpha_matrix, DalphaMatrix, DalphaMode,
    FD_SCALES,
};

use num_traits::Zero;

use crate::carnot::CbCDecomposition;
use crate::error::{Error, Result};
use crate::group::{dilate, is_graded_automorphism};
use crate::scalar::{Scalar, Q};
use crate::shear::ShearMap;
use crate::vector::{MatQ, VecF, Vector};

/// One primitive factor of a [`FiberMap`].
#[derive(Clone)]
pub enum Factor {
    /// Left translation `g -> a * g`.
    Translate(VecF),
    /// Graded automorphism preserving `w`.
    Automorphism(MatQ),
    /// Dilation `delta_r`, `r > 0`.
    Dilate(Q),
    Shear(Arc<ShearMap>),
}

impl fmt::Debug for Factor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Factor::Translate(a) => write!(f, "translate{:?}", a.0),
            Factor::Automorphism(m) => write!(f, "auto{:?}", m.rows_vec()),
            Factor::Dilate(r) => write!(f, "dilate({r})"),
            Factor::Shear(s) => {
                let parts: Vec<String> = s
                    .components()
                    .iter()
                    .map(|(j, c)| format!("{j}={}", c.label()))
                    .collect();
                write!(f, "shear({})", parts.join(", "))
            }
        }
    }
}

/// A chain of factors applied in list order: the first factor acts first.
#[derive(Clone, Debug)]
pub struct FiberMap {
    dec: Arc<CbCDecomposition>,
    factors: Vec<Factor>,
}

impl FiberMap {
    pub fn new(dec: Arc<CbCDecomposition>, factors: Vec<Factor>) -> Result<Self> {
        let n = dec.dim();
        for f in &factors {
            match f {
                Factor::Translate(a) => a.check_dim(n)?,
                Factor::Automorphism(m) => {
                    let verdict = is_graded_automorphism(dec.algebra(), m);
                    if !verdict.is_graded_automorphism() {
                        return Err(Error::NotAutomorphism(format!("{verdict:?}")));
                    }
                    let w = dec.w();
                    if !w.basis().iter().all(|b| w.contains(&m.mul_vec(b))) {
                        return Err(Error::NotAutomorphism(
                            "the automorphism does not preserve w".into(),
                        ));
                    }
                }
                Factor::Dilate(r) => {
                    if *r <= Q::zero() {
                        return Err(Error::UnsupportedFactor(format!(
                            "dilation ratio {r} must be positive"
                        )));
                    }
                }
                Factor::Shear(s) => {
                    let other = s.dec().algebra();
                    if other.dim() != n
                        || other.weights() != dec.algebra().weights()
                        || other.entries() != dec.algebra().entries()
                    {
                        return Err(Error::UnsupportedFactor(
                            "shear built over a different algebra".into(),
                        ));
                    }
                }
            }
        }
        Ok(FiberMap { dec, factors })
    }

    pub fn identity(dec: Arc<CbCDecomposition>) -> Self {
        FiberMap {
            dec,
            factors: Vec::new(),
        }
    }

    pub fn from_shear(map: ShearMap) -> Self {
        FiberMap {
            dec: map.dec().clone(),
            factors: vec![Factor::Shear(Arc::new(map))],
        }
    }

    pub fn dec(&self) -> &Arc<CbCDecomposition> {
        &self.dec
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    /// The map that applies `self` and then `next`, i.e. `next ∘ self`.
    pub fn then(&self, next: &FiberMap) -> FiberMap {
        let mut factors = self.factors.clone();
        factors.extend(next.factors.iter().cloned());
        FiberMap {
            dec: self.dec.clone(),
            factors,
        }
    }

    /// `self ∘ inner`.
    pub fn after(&self, inner: &FiberMap) -> FiberMap {
        inner.then(self)
    }

    pub fn eval(&self, g: &[f64]) -> Result<VecF> {
        let alg = self.dec.algebra();
        let mut x = Vector(g.to_vec());
        x.check_dim(self.dec.dim())?;
        for f in &self.factors {
            x = match f {
                Factor::Translate(a) => alg.mul(a, &x),
                Factor::Automorphism(m) => m.to_f64().mul_vec(&x),
                Factor::Dilate(r) => dilate(alg, &r.to_f64(), &x)?,
                Factor::Shear(s) => s.apply(&x)?,
            };
        }
        Ok(x)
    }

    pub fn inverse(&self) -> Result<FiberMap> {
        let mut factors = Vec::with_capacity(self.factors.len());
        for f in self.factors.iter().rev() {
            factors.push(match f {
                Factor::Translate(a) => Factor::Translate(-a),
                Factor::Automorphism(m) => Factor::Automorphism(
                    m.inverse()
                        .ok_or_else(|| Error::NotAutomorphism("singular matrix".into()))?,
                ),
                Factor::Dilate(r) => Factor::Dilate(r.recip()),
                Factor::Shear(s) => Factor::Shear(Arc::new(s.inverse())),
            });
        }
        Ok(FiberMap {
            dec: self.dec.clone(),
            factors,
        })
    }

    /// `F_p = L_{F(p)^{-1}} ∘ F ∘ L_p`, which fixes the identity.
    pub fn conjugated_at(&self, p: &[f64]) -> Result<FiberMap> {
        let fp = self.eval(p)?;
        let mut factors = vec![Factor::Translate(Vector(p.to_vec()))];
        factors.extend(self.factors.iter().cloned());
        factors.push(Factor::Translate(-&fp));
        Ok(FiberMap {
            dec: self.dec.clone(),
            factors,
        })
    }

    /// Induced map on quotient coordinates.
    pub fn quotient_eval(&self, qbar: &[f64]) -> Result<VecF> {
        let g = self.eval(&self.dec.include_h(qbar))?;
        Ok(self.dec.project(&g))
    }
}

#[cfg(test)]
mod tests;
