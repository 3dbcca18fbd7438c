//! Shear maps `F(g) = g * s(π g)` with `s` valued in the centre of `w`,
//! their recursive lifts, and sampling estimators for the constants involved.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use crate::carnot::CbCDecomposition;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::group::{quasi_dist, quasi_norm, right_derivative};
use crate::path::{horizontal_connect, horizontal_connect_between, integrate_bracket_form, HorizontalPath, Segment, DEFAULT_QUAD_TOL};
use crate::sampling::{sample_ball, sample_quotient_ball, Sampler};
use crate::vector::{VecF, Vector};
use crate::algebra::GradedAlgebra;

/// Evaluator behind a [`ShearComponent`]: quotient coordinates in, ambient
/// coordinates out.
pub trait ComponentFn: Send + Sync {
    fn eval(&self, q: &[f64]) -> Result<VecF>;

    /// `d/dt s(q * t v)` at `t = 0` for a first-layer quotient vector `v`,
    /// when a closed form is available.
    fn horizontal_derivative(&self, _q: &[f64], _v: &[f64]) -> Option<Result<VecF>> {
        None
    }

    /// `s(q) - s(p)`.
    fn difference(&self, p: &[f64], q: &[f64]) -> Result<VecF> {
        Ok(&self.eval(q)? - &self.eval(p)?)
    }
}

/// One layer `s_j` of a shear, a map from the quotient to `Z_j`.
#[derive(Clone)]
pub struct ShearComponent {
    layer: usize,
    dim: usize,
    func: Option<Arc<dyn ComponentFn>>,
    holder_hint: Option<f64>,
    label: String,
}

impl fmt::Debug for ShearComponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ShearComponent")
            .field("layer", &self.layer)
            .field("label", &self.label)
            .finish()
    }
}

struct ExprFn {
    exprs: Vec<Expr>,
    basis: Vec<VecF>,
    quotient: GradedAlgebra,
    dim: usize,
}

impl ComponentFn for ExprFn {
    fn eval(&self, q: &[f64]) -> Result<VecF> {
        let mut out = VecF::zeros(self.dim);
        for (e, b) in self.exprs.iter().zip(&self.basis) {
            let v = e.eval(q)?;
            if !v.is_finite() {
                return Err(Error::Evaluation(format!("`{e}` is not finite at {q:?}")));
            }
            out.axpy(&v, b);
        }
        Ok(out)
    }

    fn horizontal_derivative(&self, q: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        let w = right_derivative(&self.quotient, q, v);
        let mut out = VecF::zeros(self.dim);
        for (e, b) in self.exprs.iter().zip(&self.basis) {
            match e.eval_grad(q) {
                Ok((_, g)) => {
                    let d: f64 = g.iter().zip(w.iter()).map(|(a, b)| a * b).sum();
                    if !d.is_finite() {
                        return Some(Err(Error::Evaluation(format!(
                            "derivative of `{e}` is not finite at {q:?}"
                        ))));
                    }
                    out.axpy(&d, b);
                }
                Err(err) => return Some(Err(err)),
            }
        }
        Some(Ok(out))
    }
}

struct OpaqueFn<F>(F);

impl<F> ComponentFn for OpaqueFn<F>
where
    F: Fn(&[f64]) -> VecF + Send + Sync,
{
    fn eval(&self, q: &[f64]) -> Result<VecF> {
        Ok((self.0)(q))
    }
}

struct ScaledFn {
    inner: Arc<dyn ComponentFn>,
    factor: f64,
}

impl ComponentFn for ScaledFn {
    fn eval(&self, q: &[f64]) -> Result<VecF> {
        Ok(self.inner.eval(q)?.scale(&self.factor))
    }

    fn horizontal_derivative(&self, q: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        self.inner
            .horizontal_derivative(q, v)
            .map(|r| r.map(|d| d.scale(&self.factor)))
    }

    fn difference(&self, p: &[f64], q: &[f64]) -> Result<VecF> {
        Ok(self.inner.difference(p, q)?.scale(&self.factor))
    }
}

struct SumFn(Vec<Arc<dyn ComponentFn>>);

impl ComponentFn for SumFn {
    fn eval(&self, q: &[f64]) -> Result<VecF> {
        let mut it = self.0.iter();
        let mut acc = it.next().map_or_else(|| Ok(VecF::zeros(0)), |f| f.eval(q))?;
        for f in it {
            acc = &acc + &f.eval(q)?;
        }
        Ok(acc)
    }

    fn horizontal_derivative(&self, q: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        let mut acc: Option<VecF> = None;
        for f in &self.0 {
            let d = match f.horizontal_derivative(q, v)? {
                Ok(d) => d,
                Err(e) => return Some(Err(e)),
            };
            acc = Some(match acc {
                None => d,
                Some(a) => &a + &d,
            });
        }
        acc.map(Ok)
    }

    fn difference(&self, p: &[f64], q: &[f64]) -> Result<VecF> {
        let mut it = self.0.iter();
        let mut acc = it.next().map_or_else(|| Ok(VecF::zeros(0)), |f| f.difference(p, q))?;
        for f in it {
            acc = &acc + &f.difference(p, q)?;
        }
        Ok(acc)
    }
}

/// Tolerances for lifted components.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LiftOptions {
    /// Absolute quadrature tolerance per segment.
    pub quad_tol: f64,
    /// Relative endpoint tolerance for horizontal paths.
    pub path_tol: f64,
    /// Compare two different paths at every evaluation.
    pub check_path_independence: bool,
}

impl Default for LiftOptions {
    fn default() -> Self {
        LiftOptions {
            quad_tol: DEFAULT_QUAD_TOL,
            path_tol: 1e-12,
            check_path_independence: false,
        }
    }
}

struct LiftFn {
    dec: Arc<CbCDecomposition>,
    inner: ShearComponent,
    target: usize,
    opts: LiftOptions,
    memo: Mutex<HashMap<Vec<u64>, VecF>>,
}

impl LiftFn {
    fn compute(&self, q: &[f64]) -> Result<VecF> {
        let carnot = self.dec.carnot();
        let path = horizontal_connect(carnot, q, self.opts.path_tol)?;
        let v = integrate_bracket_form(&self.dec, &self.inner, &path, self.opts.quad_tol)?;
        if self.opts.check_path_independence {
            let other = detour_path(&self.dec, q, self.opts.path_tol)?;
            let w = integrate_bracket_form(&self.dec, &self.inner, &other, self.opts.quad_tol)?;
            let discrepancy = (&v - &w).max_abs();
            let allowed =
                10.0 * self.opts.quad_tol * (path.segment_count() + other.segment_count()) as f64;
            if discrepancy > allowed.max(10.0 * self.opts.quad_tol) {
                return Err(Error::PathDependence {
                    layer: self.target,
                    discrepancy,
                });
            }
        }
        Ok(v)
    }
}

/// A second path from the identity to `q`, through `q * e` for a unit first-layer `e`.
fn detour_path(dec: &CbCDecomposition, q: &[f64], tol: f64) -> Result<HorizontalPath> {
    let carnot = dec.carnot();
    let alg = carnot.algebra();
    let mut e = VecF::zeros(q.len());
    e[carnot.first_layer()[0]] = 1.0;
    let mid = alg.mul(q, &e);
    let first = horizontal_connect(carnot, &mid, tol)?;
    let back = HorizontalPath::new(alg, &mid, vec![Segment::new(-&e, 1.0)]);
    Ok(first.then(alg, &back))
}

impl ComponentFn for LiftFn {
    fn eval(&self, q: &[f64]) -> Result<VecF> {
        let key: Vec<u64> = q.iter().map(|x| x.to_bits()).collect();
        if let Some(v) = self.memo.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(v.clone());
        }
        let v = self.compute(q)?;
        self.memo
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .entry(key)
            .or_insert_with(|| v.clone());
        Ok(v)
    }

    fn horizontal_derivative(&self, q: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        // The integrand at the end of the path: [c(q), v].
        let x = self.dec.include_h(v);
        Some(
            self.inner
                .eval(q)
                .map(|c| self.dec.algebra().br(&c, &x)),
        )
    }

    /// Integrates along a path from `p` to `q` instead of subtracting two
    /// integrals from the identity, which loses digits far from the origin.
    fn difference(&self, p: &[f64], q: &[f64]) -> Result<VecF> {
        let path = horizontal_connect_between(self.dec.carnot(), p, q, self.opts.path_tol)?;
        integrate_bracket_form(&self.dec, &self.inner, &path, self.opts.quad_tol)
    }
}

impl ShearComponent {
    pub fn zero(layer: usize, dim: usize) -> Self {
        ShearComponent {
            layer,
            dim,
            func: None,
            holder_hint: None,
            label: "0".into(),
        }
    }

    pub fn from_fn(layer: usize, dim: usize, func: Arc<dyn ComponentFn>, label: &str) -> Self {
        ShearComponent {
            layer,
            dim,
            func: Some(func),
            holder_hint: None,
            label: label.into(),
        }
    }

    /// Component `sum_k expr_k(q) z_k` over the reduced basis `z_k` of `Z_layer`.
    /// All-zero expressions give the zero component on any layer.
    pub fn expression(dec: &CbCDecomposition, layer: usize, sources: &[&str]) -> Result<Self> {
        let exprs = sources
            .iter()
            .map(|s| Expr::parse(s))
            .collect::<Result<Vec<_>>>()?;
        Self::from_exprs(dec, layer, exprs)
    }

    pub fn from_exprs(dec: &CbCDecomposition, layer: usize, exprs: Vec<Expr>) -> Result<Self> {
        let n = dec.dim();
        if exprs.iter().all(Expr::is_zero_constant) {
            return Ok(Self::zero(layer, n));
        }
        let z = dec.z(layer).ok_or(Error::EmptyCenterLayer(layer))?;
        if exprs.len() != z.dim() {
            return Err(Error::Parse(format!(
                "layer {layer} needs {} expression(s), one per basis vector of Z_{layer}; got {}",
                z.dim(),
                exprs.len()
            )));
        }
        let qd = dec.quotient_dim();
        if let Some(e) = exprs.iter().find(|e| e.arity() > qd) {
            return Err(Error::Parse(format!(
                "`{e}` uses coordinates beyond q{qd}"
            )));
        }
        let label = exprs
            .iter()
            .map(|e| e.to_string())
            .collect::<Vec<_>>()
            .join(";");
        let func = ExprFn {
            exprs,
            basis: z.basis_f64().to_vec(),
            quotient: dec.carnot().algebra().clone(),
            dim: n,
        };
        Ok(Self::from_fn(layer, n, Arc::new(func), &label))
    }

    /// Library-only evaluator returning ambient coordinates.
    pub fn opaque<F>(layer: usize, dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> VecF + Send + Sync + 'static,
    {
        Self::from_fn(layer, dim, Arc::new(OpaqueFn(f)), "opaque")
    }

    pub fn layer(&self) -> usize {
        self.layer
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn is_zero(&self) -> bool {
        self.func.is_none()
    }

    pub fn holder_hint(&self) -> Option<f64> {
        self.holder_hint
    }

    pub fn with_holder_hint(mut self, hint: f64) -> Self {
        self.holder_hint = Some(hint);
        self
    }

    pub fn eval(&self, q: &[f64]) -> Result<VecF> {
        match &self.func {
            None => Ok(VecF::zeros(self.dim)),
            Some(f) => f.eval(q),
        }
    }

    /// `s(q) - s(p)`, computed without forming the two values when the
    /// component is a lift.
    pub fn difference(&self, p: &[f64], q: &[f64]) -> Result<VecF> {
        match &self.func {
            None => Ok(VecF::zeros(self.dim)),
            Some(f) => f.difference(p, q),
        }
    }

    pub fn horizontal_derivative(&self, q: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        match &self.func {
            None => Some(Ok(VecF::zeros(self.dim))),
            Some(f) => f.horizontal_derivative(q, v),
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        match &self.func {
            None => self.clone(),
            Some(f) => ShearComponent {
                layer: self.layer,
                dim: self.dim,
                func: Some(Arc::new(ScaledFn {
                    inner: f.clone(),
                    factor,
                })),
                holder_hint: self.holder_hint.map(|h| h * factor.abs()),
                label: format!("{factor}*({})", self.label),
            },
        }
    }

    pub fn negated(&self) -> Self {
        self.scaled(-1.0)
    }

    /// Pointwise sum of two components on the same layer.
    pub fn plus(&self, other: &ShearComponent) -> Self {
        match (&self.func, &other.func) {
            (None, _) => other.clone(),
            (_, None) => self.clone(),
            (Some(a), Some(b)) => ShearComponent {
                layer: self.layer,
                dim: self.dim,
                func: Some(Arc::new(SumFn(vec![a.clone(), b.clone()]))),
                holder_hint: None,
                label: format!("({})+({})", self.label, other.label),
            },
        }
    }

    /// Pointwise sum of several components on one layer.
    pub fn sum_all(layer: usize, dim: usize, parts: &[ShearComponent]) -> Self {
        let funcs: Vec<Arc<dyn ComponentFn>> = parts.iter().filter_map(|c| c.func.clone()).collect();
        if funcs.is_empty() {
            return Self::zero(layer, dim);
        }
        Self::from_fn(layer, dim, Arc::new(SumFn(funcs)), "sum")
    }

    pub(crate) fn with_label(mut self, label: String) -> Self {
        self.label = label;
        self
    }
}

/// The lift `c^(1)(p) = ∫_γ [c, θ_H]` along horizontal paths from the identity
/// to `p`, valued in `Z_{j + alpha}`.
pub fn lift(dec: &Arc<CbCDecomposition>, c: &ShearComponent, opts: LiftOptions) -> Result<ShearComponent> {
    let alpha = dec
        .alpha_integer()
        .ok_or_else(|| Error::AlphaNotInteger(dec.alpha().to_string()))?;
    let target = c.layer() + alpha;
    if c.is_zero() || dec.z(target).is_none() || lift_vanishes(dec, c.layer()) {
        return Ok(ShearComponent::zero(target, dec.dim()));
    }
    let func = LiftFn {
        dec: dec.clone(),
        inner: c.clone(),
        target,
        opts,
        memo: Mutex::new(HashMap::new()),
    };
    Ok(ShearComponent::from_fn(
        target,
        dec.dim(),
        Arc::new(func),
        &format!("lift({})", c.label()),
    ))
}

/// True when `[Z_j, H_1] = 0`, so every lift from layer `j` is identically zero.
fn lift_vanishes(dec: &CbCDecomposition, j: usize) -> bool {
    let Some(z) = dec.z(j) else { return true };
    let alg = dec.algebra();
    z.basis().iter().all(|v| {
        dec.h_layer(1)
            .iter()
            .all(|&i| alg.br(v, &alg.basis_vector::<crate::scalar::Q>(i)).is_zero())
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LoopVerdict {
    pub passed: bool,
    pub loops: usize,
    /// Largest `|integral| / (length * max(1, hint))` seen.
    pub worst_ratio: f64,
    pub tolerance: f64,
}

/// Relative tolerance of the loop test.
pub const LOOP_TOL_FACTOR: f64 = 1e-6;

/// Falsification test for closedness of `c`: integrates `[c, θ_H]` over
/// commutator rectangles (closed up by a horizontal path) at random base
/// points and scales. With a one-dimensional first layer only backtracking
/// loops exist.
pub fn loop_test_membership(
    dec: &CbCDecomposition,
    c: &ShearComponent,
    sampler: &Sampler,
) -> Result<LoopVerdict> {
    let carnot = dec.carnot();
    let qalg = carnot.algebra();
    let first = carnot.first_layer();
    let m = qalg.dim();
    let pairs: Vec<(usize, usize)> = first
        .iter()
        .enumerate()
        .flat_map(|(a, &i)| first[a + 1..].iter().map(move |&j| (i, j)))
        .collect();
    let hint = c.holder_hint().unwrap_or(1.0).max(1.0);
    let mut s = sampler.stream(0x6c6f_6f70);
    let mut worst: f64 = 0.0;
    if !c.is_zero() {
        for k in 0..sampler.count {
            let base = sample_quotient_ball(dec, &mut s, sampler.radius);
            let scale = sampler.radius.max(1e-3) * s.uniform_in(0.05, 1.0);
            let unit = |i: usize| {
                let mut v = VecF::zeros(m);
                v[i] = scale;
                v
            };
            let path = if pairs.is_empty() {
                let x = unit(first[0]);
                HorizontalPath::new(qalg, &base, vec![Segment::new(x.clone(), 1.0), Segment::new(-&x, 1.0)])
            } else {
                let (i, j) = pairs[k % pairs.len()];
                let (x, y) = (unit(i), unit(j));
                let rect = HorizontalPath::new(
                    qalg,
                    &base,
                    vec![
                        Segment::new(x.clone(), 1.0),
                        Segment::new(y.clone(), 1.0),
                        Segment::new(-&x, 1.0),
                        Segment::new(-&y, 1.0),
                    ],
                );
                let end = rect.endpoint();
                let close = horizontal_connect(carnot, &qalg.left_diff(&end, &base), 1e-12)?;
                rect.then(qalg, &close)
            };
            let v = integrate_bracket_form(dec, c, &path, DEFAULT_QUAD_TOL)?;
            worst = worst.max(v.norm() / (path.length() * hint));
        }
    }
    Ok(LoopVerdict {
        passed: worst <= LOOP_TOL_FACTOR,
        loops: if c.is_zero() { 0 } else { sampler.count },
        worst_ratio: worst,
        tolerance: LOOP_TOL_FACTOR,
    })
}

/// A map `g -> g * s(π g)`.
#[derive(Clone, Debug)]
pub struct ShearMap {
    dec: Arc<CbCDecomposition>,
    components: BTreeMap<usize, ShearComponent>,
    base_layers: Vec<usize>,
}

impl ShearMap {
    /// Shear with exactly the given components; no lifting happens here.
    pub fn new(dec: Arc<CbCDecomposition>, components: Vec<ShearComponent>) -> Result<Self> {
        let mut map: BTreeMap<usize, ShearComponent> = BTreeMap::new();
        for c in components {
            if c.is_zero() {
                continue;
            }
            if dec.z(c.layer()).is_none() {
                return Err(Error::EmptyCenterLayer(c.layer()));
            }
            let merged = match map.remove(&c.layer()) {
                Some(prev) => prev.plus(&c),
                None => c,
            };
            map.insert(merged.layer(), merged);
        }
        let base_layers = map.keys().copied().collect();
        Ok(ShearMap {
            dec,
            components: map,
            base_layers,
        })
    }

    pub fn identity(dec: Arc<CbCDecomposition>) -> Self {
        ShearMap {
            dec,
            components: BTreeMap::new(),
            base_layers: Vec::new(),
        }
    }

    pub fn dec(&self) -> &Arc<CbCDecomposition> {
        &self.dec
    }

    pub fn components(&self) -> &BTreeMap<usize, ShearComponent> {
        &self.components
    }

    pub fn component(&self, j: usize) -> Option<&ShearComponent> {
        self.components.get(&j)
    }

    /// Layers supplied directly rather than obtained by lifting.
    pub fn base_layers(&self) -> &[usize] {
        &self.base_layers
    }

    pub fn is_identity(&self) -> bool {
        self.components.is_empty()
    }

    /// `s(qbar)` in ambient coordinates.
    pub fn s(&self, qbar: &[f64]) -> Result<VecF> {
        self.s_below(qbar, usize::MAX)
    }

    /// `s(q) - s(p)`.
    pub fn s_difference(&self, p: &[f64], q: &[f64]) -> Result<VecF> {
        let mut out = VecF::zeros(self.dec.dim());
        for c in self.components.values() {
            out = &out + &c.difference(p, q)?;
        }
        Ok(out)
    }

    /// Sum of the components on layers `<= max_layer`.
    pub fn s_below(&self, qbar: &[f64], max_layer: usize) -> Result<VecF> {
        let mut out = VecF::zeros(self.dec.dim());
        for (_, c) in self.components.range(..=max_layer) {
            out = &out + &c.eval(qbar)?;
        }
        Ok(out)
    }

    /// `d/dt s(qbar * t v)` at `t = 0`, when every component has a closed form.
    pub fn horizontal_derivative(&self, qbar: &[f64], v: &[f64]) -> Option<Result<VecF>> {
        let mut out = VecF::zeros(self.dec.dim());
        for c in self.components.values() {
            match c.horizontal_derivative(qbar, v)? {
                Ok(d) => out = &out + &d,
                Err(e) => return Some(Err(e)),
            }
        }
        Some(Ok(out))
    }

    pub fn apply(&self, g: &[f64]) -> Result<VecF> {
        Vector(g.to_vec()).check_dim(self.dec.dim())?;
        let s = self.s(&self.dec.project(g))?;
        Ok(self.dec.algebra().mul(g, &s))
    }

    /// The shear of `-s`, which inverts this one.
    pub fn inverse(&self) -> ShearMap {
        ShearMap {
            dec: self.dec.clone(),
            components: self
                .components
                .iter()
                .map(|(&j, c)| (j, c.negated()))
                .collect(),
            base_layers: self.base_layers.clone(),
        }
    }

    /// Copy with the component on `layer` replaced.
    pub fn with_component(&self, c: ShearComponent) -> ShearMap {
        let mut m = self.clone();
        if c.is_zero() {
            m.components.remove(&c.layer());
        } else {
            m.components.insert(c.layer(), c);
        }
        m
    }
}

pub fn apply_shear(map: &ShearMap, g: &[f64]) -> Result<VecF> {
    map.apply(g)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Membership {
    /// Run the loop test before every lift.
    Test(Sampler),
    /// Skip it; lifts then compare two paths at each evaluation.
    Waive,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildOptions {
    pub membership: Membership,
    pub lift: LiftOptions,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            membership: Membership::Test(Sampler::new(0, 8, 2.0)),
            lift: LiftOptions::default(),
        }
    }
}

/// Assembles `s = sum_j s_j` from base components on layers `j <= alpha`,
/// populating layers `j + k alpha` by iterated lifts when alpha is an integer.
pub fn build_shear(
    dec: &Arc<CbCDecomposition>,
    base: Vec<ShearComponent>,
    opts: &BuildOptions,
) -> Result<ShearMap> {
    let alpha = dec.alpha().clone();
    for c in &base {
        if c.is_zero() {
            continue;
        }
        if dec.z(c.layer()).is_none() {
            return Err(Error::EmptyCenterLayer(c.layer()));
        }
        if crate::scalar::qi(c.layer() as i64) > alpha {
            return Err(Error::LayerAboveAlpha {
                layer: c.layer(),
                alpha: alpha.to_string(),
            });
        }
    }
    let mut map = ShearMap::new(dec.clone(), base)?;
    let Some(a) = dec.alpha_integer() else {
        return Ok(map);
    };
    let mut lift_opts = opts.lift;
    if opts.membership == Membership::Waive {
        lift_opts.check_path_independence = true;
    }
    let bases: Vec<ShearComponent> = map.components.values().cloned().collect();
    for c in bases {
        let mut cur = c;
        loop {
            let target = cur.layer() + a;
            if dec.z(target).is_none() || lift_vanishes(dec, cur.layer()) {
                break;
            }
            if let Membership::Test(sampler) = opts.membership {
                let verdict = loop_test_membership(dec, &cur, &sampler)?;
                if !verdict.passed {
                    return Err(Error::MembershipFailed {
                        layer: cur.layer(),
                        value: verdict.worst_ratio,
                    });
                }
            }
            let next = lift(dec, &cur, lift_opts)?;
            if next.is_zero() {
                break;
            }
            let merged = match map.components.remove(&target) {
                Some(prev) => prev.plus(&next),
                None => next.clone(),
            };
            map.components.insert(target, merged);
            cur = next;
        }
    }
    Ok(map)
}

/// `K(g1, g2) = s(ḡ2) * (g1⁻¹ g2)⁻¹ * (-s(ḡ1)) * (g1⁻¹ g2)`.
///
/// Both factors lie in the abelian ideal `Z(w)`, so with `x = g1⁻¹ g2` this is
/// `(s(ḡ2) - s(ḡ1)) - sum_{k>=1} ad_{-x}^k s(ḡ1) / k!`, which is how it is
/// evaluated.
pub fn k_function(map: &ShearMap, g1: &[f64], g2: &[f64]) -> Result<VecF> {
    let dec = map.dec();
    let alg = dec.algebra();
    let x = -&alg.left_diff(g1, g2);
    let (p1, p2) = (dec.project(g1), dec.project(g2));
    let mut k = map.s_difference(&p1, &p2)?;
    let mut term = map.s(&p1)?;
    let step = alg.step().unwrap_or(1);
    for i in 1..step {
        term = alg.br(&x, &term).scale(&(1.0 / i as f64));
        if term.is_zero() {
            break;
        }
        k = &k - &term;
    }
    Ok(k)
}

/// How pairs are drawn for ratio estimators.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairMode {
    /// Both points independently in the ball.
    Independent,
    /// First point in the ball, second `g1 * u` with `u` in the ball of radius `scale`.
    Local { scale: f64 },
}

fn sample_pair(alg: &GradedAlgebra, s_base: &mut crate::sampling::Stream, s_inc: &mut crate::sampling::Stream, radius: f64, mode: PairMode) -> (VecF, VecF) {
    let g1 = sample_ball(alg, s_base, radius);
    let g2 = match mode {
        PairMode::Independent => sample_ball(alg, s_inc, radius),
        PairMode::Local { scale } => alg.mul(&g1, &sample_ball(alg, s_inc, scale)),
    };
    (g1, g2)
}

pub const CC_SURROGATE: &str =
    "quotient quasi-norm distance with Carnot weights, standing in for the Carnot-Caratheodory distance";

#[derive(Clone, Debug, PartialEq)]
pub struct NecessityReport {
    /// Largest `|π_i K|^{1/i} / d̄^{1/alpha}` per layer `i` of `w`.
    pub per_layer_max: BTreeMap<usize, f64>,
    pub samples: usize,
    pub radius: f64,
    pub distance: &'static str,
}

impl NecessityReport {
    pub fn max_ratio(&self) -> f64 {
        self.per_layer_max.values().copied().fold(0.0, f64::max)
    }
}

/// Samples `g1` in the ball of radius `sampler.radius` and `g2 = g1 * u` with
/// `u` in the unit ball, then records the per-layer ratios of `K(g1, g2)`.
pub fn necessity_check(map: &ShearMap, sampler: &Sampler) -> Result<NecessityReport> {
    let dec = map.dec();
    let alg = dec.algebra();
    let qalg = dec.carnot().algebra();
    let alpha = dec.alpha_f64();
    let mut per_layer: BTreeMap<usize, f64> = dec.w_layers().keys().map(|&j| (j, 0.0)).collect();
    let mut s_base = sampler.stream(1);
    let mut s_inc = sampler.stream(2);
    let mut used = 0;
    for _ in 0..sampler.count {
        let (g1, g2) = sample_pair(alg, &mut s_base, &mut s_inc, sampler.radius, PairMode::Local { scale: 1.0 });
        let d = quasi_dist(qalg, &dec.project(&g1), &dec.project(&g2));
        if d == 0.0 {
            continue;
        }
        used += 1;
        let k = k_function(map, &g1, &g2)?;
        for (&j, best) in per_layer.iter_mut() {
            let part = dec.w_part(&k, j).norm();
            let r = part.powf(1.0 / j as f64) / d.powf(1.0 / alpha);
            if r > *best {
                *best = r;
            }
        }
    }
    Ok(NecessityReport {
        per_layer_max: per_layer,
        samples: used,
        radius: sampler.radius,
        distance: CC_SURROGATE,
    })
}

/// Empirical `sup |c(p) - c(q)| / d̄(p,q)^{j/alpha}` over independent pairs in
/// the quotient ball.
pub fn holder_norm_estimate(dec: &CbCDecomposition, c: &ShearComponent, sampler: &Sampler) -> Result<f64> {
    if c.is_zero() {
        return Ok(0.0);
    }
    let qalg = dec.carnot().algebra();
    let e = c.layer() as f64 / dec.alpha_f64();
    let mut s = sampler.stream(3);
    let mut best: f64 = 0.0;
    for _ in 0..sampler.count {
        let p = sample_quotient_ball(dec, &mut s, sampler.radius);
        let q = sample_quotient_ball(dec, &mut s, sampler.radius);
        let d = quasi_dist(qalg, &p, &q);
        if d == 0.0 {
            continue;
        }
        let diff = (&c.eval(&p)? - &c.eval(&q)?).norm();
        best = best.max(diff / d.powf(e));
    }
    Ok(best)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BilipEstimate {
    pub sup_ratio: f64,
    pub inf_ratio: f64,
    pub samples: usize,
}

impl BilipEstimate {
    pub fn distortion(&self) -> f64 {
        self.sup_ratio / self.inf_ratio
    }
}

/// Extremes of `rho(F g1, F g2) / rho(g1, g2)` over sampled pairs.
pub fn bilip_estimate<F>(alg: &GradedAlgebra, f: F, sampler: &Sampler, mode: PairMode) -> Result<BilipEstimate>
where
    F: Fn(&[f64]) -> Result<VecF>,
{
    let mut s_base = sampler.stream(4);
    let mut s_inc = sampler.stream(5);
    let mut sup: f64 = 0.0;
    let mut inf = f64::INFINITY;
    let mut used = 0;
    for _ in 0..sampler.count {
        let (g1, g2) = sample_pair(alg, &mut s_base, &mut s_inc, sampler.radius, mode);
        let d = quasi_dist(alg, &g1, &g2);
        if d == 0.0 {
            continue;
        }
        let r = quasi_dist(alg, &f(&g1)?, &f(&g2)?) / d;
        sup = sup.max(r);
        inf = inf.min(r);
        used += 1;
    }
    Ok(BilipEstimate {
        sup_ratio: sup,
        inf_ratio: inf,
        samples: used,
    })
}

/// Largest deviation between `k_function` and `(g1⁻¹ g2)⁻¹ F(g1)⁻¹ F(g2)`.
pub fn k_identity_defect(map: &ShearMap, sampler: &Sampler) -> Result<f64> {
    let dec = map.dec();
    let alg = dec.algebra();
    let mut s = sampler.stream(6);
    let mut worst: f64 = 0.0;
    for _ in 0..sampler.count {
        let g1 = sample_ball(alg, &mut s, sampler.radius);
        let g2 = sample_ball(alg, &mut s, sampler.radius);
        let k = k_function(map, &g1, &g2)?;
        let x = alg.left_diff(&g1, &g2);
        let f1 = map.apply(&g1)?;
        let f2 = map.apply(&g2)?;
        let rhs = alg.mul(&-&x, &alg.left_diff(&f1, &f2));
        let scale = k.max_abs().max(1.0);
        worst = worst.max((&k - &rhs).max_abs() / scale);
    }
    Ok(worst)
}

/// Largest difference between each derived component and a freshly computed
/// chain of lifts of its base component, over the given quotient points.
pub fn lift_coherence_defect(map: &ShearMap, points: &[VecF], opts: LiftOptions) -> Result<f64> {
    let dec = map.dec();
    let Some(a) = dec.alpha_integer() else {
        let above: Vec<usize> = map
            .components()
            .keys()
            .copied()
            .filter(|&j| crate::scalar::qi(j as i64) > *dec.alpha())
            .collect();
        return Ok(if above.is_empty() { 0.0 } else { f64::INFINITY });
    };
    let mut worst: f64 = 0.0;
    for &j in map.base_layers() {
        let Some(base) = map.component(j) else { continue };
        let mut cur = base.clone();
        loop {
            let next = lift(dec, &cur, opts)?;
            let target = cur.layer() + a;
            if next.is_zero() {
                if let Some(c) = map.component(target) {
                    for p in points {
                        worst = worst.max(c.eval(p)?.max_abs());
                    }
                }
                break;
            }
            let stored = map
                .component(target)
                .cloned()
                .unwrap_or_else(|| ShearComponent::zero(target, dec.dim()));
            for p in points {
                worst = worst.max((&stored.eval(p)? - &next.eval(p)?).max_abs());
            }
            cur = next;
        }
    }
    Ok(worst)
}

/// `rho`-norm of `s(qbar)`; handy for reports.
pub fn shear_size(map: &ShearMap, qbar: &[f64]) -> Result<f64> {
    Ok(quasi_norm(map.dec().algebra(), &map.s(qbar)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carnot::decompose;
    use crate::scalar::qi;

    fn ladder5() -> Arc<CbCDecomposition> {
        let a = GradedAlgebra::builder()
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
            .unwrap();
        Arc::new(decompose(&a).unwrap())
    }

    fn sigma(dec: &CbCDecomposition) -> ShearComponent {
        ShearComponent::expression(dec, 1, &["sign(q1)*sqrt(abs(q1))"]).unwrap()
    }

    #[test]
    fn lift_of_square_root() {
        let dec = ladder5();
        let l = lift(&dec, &sigma(&dec), LiftOptions::default()).unwrap();
        assert_eq!(l.layer(), 3);
        for p in [-8.0, -2.5, 0.0, 1.0, 4.0, 7.3] {
            let v = l.eval(&[p]).unwrap();
            let expect = -(2.0 / 3.0) * f64::abs(p).powf(1.5);
            assert!((v[5] - expect).abs() < 1e-8, "{p}: {} vs {expect}", v[5]);
            assert_eq!(v[2], 0.0);
        }
    }

    #[test]
    fn straight_path_integral() {
        let dec = ladder5();
        let c = sigma(&dec);
        let path = horizontal_connect(dec.carnot(), &[4.0], 1e-12).unwrap();
        let v = integrate_bracket_form(&dec, &c, &path, 1e-10).unwrap();
        assert!((v[5] + 16.0 / 3.0).abs() < 1e-9);
        let back = path.then(dec.carnot().algebra(), &path.reversed(dec.carnot().algebra()));
        let z = integrate_bracket_form(&dec, &c, &back, 1e-10).unwrap();
        assert!(z.max_abs() < 1e-12);
    }

    #[test]
    fn build_and_k_function() {
        let dec = ladder5();
        let map = build_shear(&dec, vec![sigma(&dec)], &BuildOptions::default()).unwrap();
        assert_eq!(map.components().keys().copied().collect::<Vec<_>>(), vec![1, 3]);
        let g2 = [0.0, 0.0, 0.0, 0.0, 4.0, 0.0];
        let k = k_function(&map, &[0.0; 6], &g2).unwrap();
        assert!((k[2] - 2.0).abs() < 1e-12);
        assert!((k[5] + 16.0 / 3.0).abs() < 1e-8);
        let g = [0.3, -1.0, 0.2, 0.5, -2.0, 1.0];
        let back = map.inverse().apply(&map.apply(&g).unwrap()).unwrap();
        assert!((&back - &Vector(g.to_vec())).max_abs() < 1e-10);
        assert_eq!(dec.project(&map.apply(&g).unwrap()), dec.project(&Vector(g.to_vec())));
    }

    #[test]
    fn empty_center_layer_rejected() {
        let dec = ladder5();
        let err = ShearComponent::expression(&dec, 2, &["q1"]).unwrap_err();
        assert!(matches!(err, Error::EmptyCenterLayer(2)));
        assert!(ShearComponent::expression(&dec, 2, &["0"]).unwrap().is_zero());
    }

    #[test]
    fn holder_estimate_of_square_root() {
        let dec = ladder5();
        let est = holder_norm_estimate(&dec, &sigma(&dec), &Sampler::new(42, 4000, 5.0)).unwrap();
        assert!((1.0..=2f64.sqrt() + 1e-12).contains(&est), "{est}");
    }

    #[test]
    fn identity_ratios_are_one() {
        let dec = ladder5();
        let id = ShearMap::identity(dec.clone());
        let est = bilip_estimate(dec.algebra(), |g| id.apply(g), &Sampler::new(1, 200, 3.0), PairMode::Independent).unwrap();
        assert!((est.sup_ratio - 1.0).abs() < 1e-12);
        assert!((est.inf_ratio - 1.0).abs() < 1e-12);
    }
}
