//! Command-line front end. Every command prints one JSON report to stdout.
//!
//! Exit codes: 0 when every check passed, 1 when a check failed, 2 on usage
//! or input errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::algebra::{validate_algebra, GradedAlgebra};
use crate::carnot::{decompose, CbCDecomposition};
use crate::catalog::{fixture, load_algebra, FixtureName};
use crate::error::{Error, Result};
use crate::group::dilate;
use crate::maps::{
    automorphism_check, chain_rule_check, conjugate_by_shear, cc_identity_check,
    cocycle_identity_check, d_alpha_agreement, d_alpha_matrix, extract_compatible, pansu_check,
    similarity_exponent_check, solve_single_generator_fixed_point, verify_compatible, DalphaMode,
    Factor, FiberMap, SimilarityPair, PANSU_SCALES,
};
use crate::sampling::{quotient_grid, Sampler};
use crate::scalar::{q_from_f64, Scalar, Q};
use crate::shear::{
    bilip_estimate, build_shear, k_identity_defect, lift_coherence_defect, necessity_check,
    BuildOptions, LiftOptions, Membership, PairMode, ShearComponent, ShearMap,
};
use crate::vector::{MatQ, Matrix, VecF, Vector};

/// Default seed when neither `--seed` nor `NILCARNOT_SEED` is given.
pub const DEFAULT_SEED: u64 = 42;

const LIFT_TOL: f64 = 1e-8;
const K_IDENTITY_TOL: f64 = 1e-9;
const COMPAT_TOL: f64 = 1e-10;
const DALPHA_TOL: f64 = 1e-6;
const CHAIN_TOL: f64 = 1e-6;
const COCYCLE_TOL: f64 = 1e-9;
const CONJUGATE_TOL: f64 = 1e-9;
const PANSU_TOL: f64 = 1e-12;

#[derive(Parser, Debug)]
#[command(name = "nilcarnot", version, about = "Graded nilpotent groups, shear maps and fiber-map diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Validate an algebra and report its Carnot-by-Carnot structure.
    Classify(AlgebraArgs),
    /// Build a shear map from base components and optionally verify it.
    Shear(ShearArgs),
    /// Diagnostics for fiber maps given as factor chains.
    #[command(subcommand)]
    Maps(MapsCommand),
}

#[derive(Args, Debug, Clone)]
#[group(required = true, multiple = false)]
pub struct AlgebraArgs {
    /// JSON algebra file.
    #[arg(long)]
    pub algebra: Option<PathBuf>,
    /// Built-in fixture name.
    #[arg(long)]
    pub fixture: Option<String>,
}

#[derive(Args, Debug, Clone)]
pub struct SamplingArgs {
    #[arg(long, env = "NILCARNOT_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, default_value_t = 1000)]
    pub samples: usize,
    #[arg(long, default_value_t = 4.0)]
    pub radius: f64,
}

impl SamplingArgs {
    fn sampler(&self) -> Sampler {
        Sampler::new(self.seed, self.samples, self.radius)
    }
}

#[derive(Args, Debug)]
pub struct ShearArgs {
    #[command(flatten)]
    pub source: AlgebraArgs,
    /// Base component `J=EXPR`, with one `;`-separated expression per basis
    /// vector of the centre slice on layer J.
    #[arg(long = "component")]
    pub components: Vec<String>,
    /// Run the necessity, biLipschitz, lift and K-identity checks.
    #[arg(long)]
    pub verify: bool,
    #[command(flatten)]
    pub sampling: SamplingArgs,
}

#[derive(Subcommand, Debug)]
pub enum MapsCommand {
    /// Extract a compatible expression and verify it.
    Compatible {
        #[command(flatten)]
        source: AlgebraArgs,
        #[arg(long = "map")]
        map: Vec<String>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// The differential on V_alpha at a point.
    Dalpha {
        #[command(flatten)]
        source: AlgebraArgs,
        #[arg(long = "map")]
        map: Vec<String>,
        /// Comma-separated coordinates; the identity when omitted.
        #[arg(long)]
        point: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Chain rule for `outer ∘ inner`.
    Chain {
        #[command(flatten)]
        source: AlgebraArgs,
        #[arg(long = "outer")]
        outer: Vec<String>,
        #[arg(long = "inner")]
        inner: Vec<String>,
        #[arg(long)]
        point: Option<String>,
        #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
        mode: ModeArg,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Cocycle identity for the map applying `first` and then `second`.
    Cocycle {
        #[command(flatten)]
        source: AlgebraArgs,
        #[arg(long = "first")]
        first: Vec<String>,
        #[arg(long = "second")]
        second: Vec<String>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Conjugate a map by a one-component shear.
    Conjugate {
        #[command(flatten)]
        source: AlgebraArgs,
        #[arg(long = "map")]
        map: Vec<String>,
        #[arg(long)]
        layer: usize,
        /// Expressions of the conjugating component.
        #[arg(long, conflicts_with = "solve")]
        component: Option<String>,
        /// Use the fixed point of the single-generator affine action instead.
        #[arg(long)]
        solve: bool,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-13)]
        tol: f64,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Pansu difference quotients at a point.
    Pansu {
        #[command(flatten)]
        source: AlgebraArgs,
        #[arg(long = "map")]
        map: Vec<String>,
        #[arg(long)]
        point: Option<String>,
        /// Candidate differential, rows separated by `;`; the identity when omitted.
        #[arg(long)]
        differential: Option<String>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
    /// Sampled homomorphism test and similarity exponent.
    Automorphism {
        #[command(flatten)]
        source: AlgebraArgs,
        #[arg(long = "map")]
        map: Vec<String>,
        #[command(flatten)]
        sampling: SamplingArgs,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    ClosedForm,
    FiniteDifference,
}

impl From<ModeArg> for DalphaMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => DalphaMode::Auto,
            ModeArg::ClosedForm => DalphaMode::ClosedForm,
            ModeArg::FiniteDifference => DalphaMode::FiniteDifference,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Estimate,
}

#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub status: Status,
    pub value: Value,
    pub tolerance: Option<f64>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
}

impl Check {
    fn bound(name: &str, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            status: if value <= tolerance { Status::Pass } else { Status::Fail },
            value: json!(value),
            tolerance: Some(tolerance),
            samples: None,
            seed: None,
        }
    }

    fn verdict(name: &str, ok: bool, value: Value) -> Self {
        Check {
            name: name.into(),
            status: if ok { Status::Pass } else { Status::Fail },
            value,
            tolerance: None,
            samples: None,
            seed: None,
        }
    }

    fn estimate(name: &str, value: Value) -> Self {
        Check {
            name: name.into(),
            status: Status::Estimate,
            value,
            tolerance: None,
            samples: None,
            seed: None,
        }
    }

    fn sampled(mut self, samples: usize, seed: u64) -> Self {
        self.samples = Some(samples);
        self.seed = Some(seed);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AlgebraDigest {
    pub dim: usize,
    pub step: Option<usize>,
    pub weights: Vec<String>,
}

impl AlgebraDigest {
    fn of(alg: &GradedAlgebra) -> Self {
        AlgebraDigest {
            dim: alg.dim(),
            step: alg.step(),
            weights: alg.weights().iter().map(|w| w.to_string()).collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub command: Vec<String>,
    pub algebra: AlgebraDigest,
    pub checks: Vec<Check>,
    pub data: Value,
    pub wall_clock_ms: f64,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().any(|c| c.status == Status::Fail) {
            1
        } else {
            0
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

/// Parses `num`, `num/den` or a plain decimal into an exact rational.
pub fn parse_rational(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || Error::Parse(format!("`{s}` is not a rational number"));
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| bad())?;
        let d: i64 = d.trim().parse().map_err(|_| bad())?;
        if d == 0 {
            return Err(bad());
        }
        return Ok(crate::scalar::q(n, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty()
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let digits: num_bigint::BigInt = format!("{int}{frac}0").parse().map_err(|_| bad())?;
    let den = num_bigint::BigInt::from(10u32).pow(frac.len() as u32 + 1);
    let x = Q::new(digits, den);
    Ok(if neg { -x } else { x })
}

fn parse_coords(s: &str, n: usize) -> Result<VecF> {
    let v = s
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("`{t}` is not a number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    let v = Vector(v);
    v.check_dim(n)?;
    Ok(v)
}

fn parse_point(s: Option<&str>, n: usize) -> Result<VecF> {
    match s {
        Some(s) => parse_coords(s, n),
        None => Ok(VecF::zeros(n)),
    }
}

/// Rows separated by `;`, entries by `,`.
pub fn parse_matrix(s: &str, n: usize) -> Result<MatQ> {
    let rows = s
        .split(';')
        .map(|r| r.split(',').map(parse_rational).collect::<Result<Vec<Q>>>())
        .collect::<Result<Vec<_>>>()?;
    let m = Matrix::from_rows(&rows)?;
    if m.nrows() != n || m.ncols() != n {
        return Err(Error::Parse(format!(
            "matrix is {}x{}, expected {n}x{n}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(m)
}

/// `J=EXPR[;EXPR...]` into a component on layer `J`.
pub fn parse_component(dec: &CbCDecomposition, spec: &str) -> Result<ShearComponent> {
    let (j, exprs) = spec
        .split_once('=')
        .ok_or_else(|| Error::Parse(format!("`{spec}` should read LAYER=EXPR")))?;
    let j: usize = j
        .trim()
        .parse()
        .map_err(|_| Error::Parse(format!("`{j}` is not a layer index")))?;
    let exprs: Vec<&str> = exprs.split(';').collect();
    ShearComponent::expression(dec, j, &exprs)
}

fn build_options(seed: u64) -> BuildOptions {
    BuildOptions {
        membership: Membership::Test(Sampler::new(seed, 8, 2.0)),
        lift: LiftOptions::default(),
    }
}

/// One factor of the chain grammar:
/// `translate:COORDS`, `dilate:R`, `auto:MATRIX` or `shear:J=EXPR[&J=EXPR...]`.
pub fn parse_factor(dec: &Arc<CbCDecomposition>, spec: &str, seed: u64) -> Result<Factor> {
    let n = dec.dim();
    let (kind, arg) = spec
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("`{spec}` should read KIND:ARGUMENT")))?;
    match kind {
        "translate" => Ok(Factor::Translate(parse_coords(arg, n)?)),
        "dilate" => Ok(Factor::Dilate(parse_rational(arg)?)),
        "auto" => Ok(Factor::Automorphism(parse_matrix(arg, n)?)),
        "shear" => {
            let base = arg
                .split('&')
                .map(|c| parse_component(dec, c))
                .collect::<Result<Vec<_>>>()?;
            Ok(Factor::Shear(Arc::new(build_shear(dec, base, &build_options(seed))?)))
        }
        other => Err(Error::Parse(format!("unknown factor kind `{other}`"))),
    }
}

pub fn parse_chain(dec: &Arc<CbCDecomposition>, specs: &[String], seed: u64) -> Result<FiberMap> {
    let factors = specs
        .iter()
        .map(|s| parse_factor(dec, s, seed))
        .collect::<Result<Vec<_>>>()?;
    FiberMap::new(dec.clone(), factors)
}

fn load_source(a: &AlgebraArgs) -> Result<GradedAlgebra> {
    match (&a.algebra, &a.fixture) {
        (Some(p), _) => load_algebra(p),
        (None, Some(name)) => Ok(fixture(name.parse::<FixtureName>()?)),
        (None, None) => Err(Error::Parse("either --algebra or --fixture is required".into())),
    }
}

fn load_dec(a: &AlgebraArgs) -> Result<(GradedAlgebra, Arc<CbCDecomposition>)> {
    let alg = load_source(a)?;
    let dec = Arc::new(decompose(&alg)?);
    Ok((alg, dec))
}

fn qstrings(m: &MatQ) -> Value {
    json!(m
        .rows_vec()
        .iter()
        .map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn fmatrix(m: &Matrix<f64>) -> Value {
    json!(m.rows_vec())
}

fn labels_of(alg: &GradedAlgebra, idx: &[usize]) -> Vec<String> {
    idx.iter().map(|&i| alg.labels()[i].clone()).collect()
}

struct Outcome {
    algebra: GradedAlgebra,
    checks: Vec<Check>,
    data: Value,
}

fn classify(a: &AlgebraArgs) -> Result<Outcome> {
    let alg = load_source(a)?;
    let v = validate_algebra(&alg);
    let mut checks = vec![
        Check::verdict("jacobi", v.jacobi, json!(v.jacobi_failure)),
        Check::verdict("graded", v.graded, json!(v.grading_failure)),
        Check::verdict("nilpotent", v.nilpotent, json!(v.step)),
    ];
    let mut data = json!({
        "step": v.step,
        "positive_weights": v.positive_weights,
        "warnings": v.warnings,
    });
    let classification = match decompose(&alg) {
        Ok(dec) => {
            let w = dec.w();
            let z: BTreeMap<String, usize> = dec
                .z_layers()
                .iter()
                .map(|(j, s)| (j.to_string(), s.dim()))
                .collect();
            data["decomposition"] = json!({
                "lambda1": dec.lambda1().to_string(),
                "alpha": dec.alpha().to_string(),
                "w_dim": w.dim(),
                "w_basis_indices": w.pivots(),
                "w_basis_labels": labels_of(&alg, w.pivots()),
                "quotient_dim": dec.quotient_dim(),
                "h_indices": dec.h_indices(),
                "z_dims": z,
                "central_product": dec.central_product(),
            });
            "carnot-by-carnot".to_string()
        }
        Err(Error::CarnotType) => "carnot".to_string(),
        Err(e) if v.is_valid() => format!("graded nilpotent, not carnot-by-carnot: {e}"),
        Err(e) => format!("invalid: {e}"),
    };
    checks.push(Check::estimate("classification", json!(classification)));
    Ok(Outcome {
        algebra: alg,
        checks,
        data,
    })
}

fn shear_cmd(args: &ShearArgs) -> Result<Outcome> {
    let (alg, dec) = load_dec(&args.source)?;
    let seed = args.sampling.seed;
    let base = args
        .components
        .iter()
        .map(|c| parse_component(&dec, c))
        .collect::<Result<Vec<_>>>()?;
    let map = build_shear(&dec, base, &build_options(seed))?;
    let grid = quotient_grid(&dec, 20, args.sampling.radius, seed);
    let mut values = Vec::with_capacity(grid.len());
    for p in &grid {
        let mut per: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (j, c) in map.components() {
            per.insert(j.to_string(), c.eval(p)?.0);
        }
        values.push(json!({ "point": p.0, "s": per }));
    }
    let components: BTreeMap<String, String> = map
        .components()
        .iter()
        .map(|(j, c)| (j.to_string(), c.label().to_string()))
        .collect();
    let data = json!({
        "alpha": dec.alpha().to_string(),
        "base_layers": map.base_layers(),
        "components": components,
        "identity": map.is_identity(),
        "values": values,
    });
    let mut checks = Vec::new();
    if args.verify {
        let sampler = args.sampling.sampler();
        let nec = necessity_check(&map, &sampler)?;
        let per: BTreeMap<String, f64> = nec
            .per_layer_max
            .iter()
            .map(|(j, r)| (j.to_string(), *r))
            .collect();
        checks.push(
            Check::estimate("necessity_ratios", json!({ "per_layer": per, "distance": nec.distance }))
                .sampled(nec.samples, seed),
        );
        let b = bilip_estimate(&alg, |g| map.apply(g), &sampler, PairMode::Independent)?;
        checks.push(
            Check::estimate(
                "bilipschitz_ratios",
                json!({ "sup": b.sup_ratio, "inf": b.inf_ratio, "distortion": b.distortion() }),
            )
            .sampled(b.samples, seed),
        );
        let lift = lift_coherence_defect(&map, &grid, LiftOptions::default())?;
        checks.push(Check::bound("lift_coherence", lift, LIFT_TOL).sampled(grid.len(), seed));
        let k = k_identity_defect(&map, &sampler)?;
        checks.push(Check::bound("k_identity", k, K_IDENTITY_TOL).sampled(sampler.count, seed));
    }
    Ok(Outcome {
        algebra: alg,
        checks,
        data,
    })
}

fn compatible_cmd(source: &AlgebraArgs, map: &[String], s: &SamplingArgs) -> Result<Outcome> {
    let (alg, dec) = load_dec(source)?;
    let f = parse_chain(&dec, map, s.seed)?;
    let expr = extract_compatible(&f)?;
    let r = verify_compatible(&f, &expr, &s.sampler())?;
    let cc = cc_identity_check(&expr);
    let checks = vec![
        Check::verdict("graded_b", r.graded_b, json!(r.graded_b)),
        Check::bound("quotient_defect", r.quotient_defect, r.tolerance),
        Check::verdict("bracket_condition", r.bracket_failure.is_none(), json!(r.bracket_failure)),
        Check::verdict("cc_identity", cc.is_none(), json!(cc)),
        Check::bound("centrality", r.centrality_defect, r.tolerance).sampled(r.samples, s.seed),
        Check::bound("reconstruction", r.reconstruction_defect, r.tolerance.max(COMPAT_TOL))
            .sampled(r.samples, s.seed),
        Check::verdict("same_b", r.same_b, json!(r.same_b)).sampled(r.samples, s.seed),
    ];
    let data = json!({
        "base": expr.base().0,
        "b": qstrings(expr.b()),
        "a": qstrings(expr.a()),
        "quotient_translation": expr.quotient_translation().0,
        "quotient_linear": qstrings(&expr.quotient_linear()),
        "s_is_zero": expr.s_is_zero(),
    });
    Ok(Outcome {
        algebra: alg,
        checks,
        data,
    })
}

fn dalpha_cmd(source: &AlgebraArgs, map: &[String], point: Option<&str>, mode: ModeArg, s: &SamplingArgs) -> Result<Outcome> {
    let (alg, dec) = load_dec(source)?;
    let f = parse_chain(&dec, map, s.seed)?;
    let p = parse_point(point, dec.dim())?;
    let d = d_alpha_matrix(&f, &p, mode.into())?;
    let mut checks = Vec::new();
    if d.mode == DalphaMode::ClosedForm {
        match d_alpha_agreement(&f, &p) {
            Ok(gap) => checks.push(Check::bound("mode_agreement", gap, DALPHA_TOL)),
            Err(e) => checks.push(Check::verdict("mode_agreement", false, json!(e.to_string()))),
        }
    }
    let data = json!({
        "indices": d.indices,
        "labels": labels_of(&alg, &d.indices),
        "matrix": fmatrix(&d.matrix),
        "mode": format!("{:?}", d.mode),
        "point": p.0,
    });
    Ok(Outcome {
        algebra: alg,
        checks,
        data,
    })
}

fn chain_cmd(
    source: &AlgebraArgs,
    outer: &[String],
    inner: &[String],
    point: Option<&str>,
    mode: ModeArg,
    s: &SamplingArgs,
) -> Result<Outcome> {
    let (alg, dec) = load_dec(source)?;
    let f = parse_chain(&dec, outer, s.seed)?;
    let g = parse_chain(&dec, inner, s.seed)?;
    let p = parse_point(point, dec.dim())?;
    let defect = chain_rule_check(&f, &g, &p, mode.into())?;
    let composite = d_alpha_matrix(&f.after(&g), &p, mode.into())?;
    let data = json!({
        "indices": composite.indices,
        "composite": fmatrix(&composite.matrix),
        "point": p.0,
    });
    Ok(Outcome {
        algebra: alg,
        checks: vec![Check::bound("chain_rule", defect, CHAIN_TOL)],
        data,
    })
}

fn cocycle_cmd(source: &AlgebraArgs, first: &[String], second: &[String], s: &SamplingArgs) -> Result<Outcome> {
    let (alg, dec) = load_dec(source)?;
    let g1 = parse_chain(&dec, first, s.seed)?;
    let g2 = parse_chain(&dec, second, s.seed)?;
    let grid = quotient_grid(&dec, s.samples, s.radius, s.seed);
    let defect = cocycle_identity_check(&g1, &g2, &grid)?;
    let mut lambdas = Vec::new();
    for g in [&g1, &g2] {
        let p = SimilarityPair::from_map(g)?;
        lambdas.push(json!({ "lambda_a": p.lambda_a(), "lambda_b": p.lambda_b() }));
    }
    Ok(Outcome {
        algebra: alg,
        checks: vec![Check::bound("cocycle_identity", defect, COCYCLE_TOL).sampled(grid.len(), s.seed)],
        data: json!({ "similarities": lambdas }),
    })
}

#[allow(clippy::too_many_arguments)]
fn conjugate_cmd(
    source: &AlgebraArgs,
    map: &[String],
    layer: usize,
    component: Option<&str>,
    solve: bool,
    max_iter: usize,
    tol: f64,
    s: &SamplingArgs,
) -> Result<Outcome> {
    let (alg, dec) = load_dec(source)?;
    let gamma = parse_chain(&dec, map, s.seed)?;
    let grid = quotient_grid(&dec, s.samples, s.radius, s.seed);
    let mut data = json!({});
    let c = if solve {
        let fp = solve_single_generator_fixed_point(&gamma, layer, max_iter, tol, &grid)?;
        data["fixed_point"] = json!({
            "iterations": fp.iterations,
            "factor": fp.factor,
            "mode": format!("{:?}", fp.mode),
            "residual": fp.residual,
        });
        fp.component
    } else {
        let src = component.unwrap_or("0");
        parse_component(&dec, &format!("{layer}={src}"))?
    };
    let f0 = if c.is_zero() {
        ShearMap::new(dec.clone(), vec![c.clone()])?
    } else {
        build_shear(&dec, vec![c], &build_options(s.seed))?
    };
    let (_, r) = conjugate_by_shear(&f0, &gamma, &grid)?;
    data["layer"] = json!(r.layer);
    let mut checks = vec![Check::bound("conjugation_formula", r.formula_defect, CONJUGATE_TOL)
        .sampled(r.grid_points, s.seed)];
    let residual = if solve {
        Check::bound("residual_sup", r.sup_residual, CONJUGATE_TOL)
    } else {
        Check::estimate("residual_sup", json!(r.sup_residual))
    };
    checks.push(residual.sampled(r.grid_points, s.seed));
    Ok(Outcome {
        algebra: alg,
        checks,
        data,
    })
}

/// Factors evaluated directly on an algebra, without a decomposition.
enum PlainFactor {
    Translate(VecF),
    Automorphism(MatQ),
    Dilate(Q),
    Shear(Arc<ShearMap>),
}

fn plain_chain(alg: &GradedAlgebra, specs: &[String], seed: u64) -> Result<Vec<PlainFactor>> {
    let dec = decompose(alg).ok().map(Arc::new);
    specs
        .iter()
        .map(|spec| {
            let (kind, arg) = spec
                .split_once(':')
                .ok_or_else(|| Error::Parse(format!("`{spec}` should read KIND:ARGUMENT")))?;
            Ok(match kind {
                "translate" => PlainFactor::Translate(parse_coords(arg, alg.dim())?),
                "dilate" => PlainFactor::Dilate(parse_rational(arg)?),
                "auto" => PlainFactor::Automorphism(parse_matrix(arg, alg.dim())?),
                "shear" => {
                    let dec = dec.as_ref().ok_or_else(|| {
                        Error::UnsupportedFactor("shear factors need a Carnot-by-Carnot algebra".into())
                    })?;
                    match parse_factor(dec, spec, seed)? {
                        Factor::Shear(s) => PlainFactor::Shear(s),
                        _ => unreachable!(),
                    }
                }
                other => return Err(Error::Parse(format!("unknown factor kind `{other}`"))),
            })
        })
        .collect()
}

fn plain_eval<S: Scalar>(alg: &GradedAlgebra, chain: &[PlainFactor], x: &[S]) -> Result<Vector<S>> {
    let mut x = Vector(x.to_vec());
    for f in chain {
        x = match f {
            PlainFactor::Translate(a) => {
                let a: Vec<S> = a.iter().map(|&c| S::from_q(&q_from_f64(c))).collect();
                alg.mul(&a, &x)
            }
            PlainFactor::Automorphism(m) => Matrix::<S>::from_q(m).mul_vec(&x),
            PlainFactor::Dilate(r) => dilate(alg, &S::from_q(r), &x)?,
            PlainFactor::Shear(s) => {
                if S::EXACT {
                    return Err(Error::UnsupportedFactor("shears are evaluated in floating point".into()));
                }
                let y = s.apply(&x.to_f64())?;
                Vector(y.iter().map(|&c| S::from_q(&q_from_f64(c))).collect())
            }
        };
    }
    Ok(x)
}

fn pansu_cmd(
    source: &AlgebraArgs,
    map: &[String],
    point: Option<&str>,
    differential: Option<&str>,
    s: &SamplingArgs,
) -> Result<Outcome> {
    let alg = load_source(source)?;
    let n = alg.dim();
    let chain = plain_chain(&alg, map, s.seed)?;
    let x = parse_point(point, n)?;
    let l = match differential {
        Some(m) => parse_matrix(m, n)?,
        None => MatQ::identity(n),
    };
    let sampler = s.sampler();
    let exact = !chain.iter().any(|f| matches!(f, PlainFactor::Shear(_)));
    let defects = if exact {
        let xq: Vec<Q> = x.iter().map(|&c| q_from_f64(c)).collect();
        pansu_check(&alg, |y: &[Q]| plain_eval(&alg, &chain, y), &xq, &l, &PANSU_SCALES, &sampler)?
    } else {
        let lf = l.to_f64();
        pansu_check(&alg, |y: &[f64]| plain_eval(&alg, &chain, y), &x, &lf, &PANSU_SCALES, &sampler)?
    };
    let small = defects.iter().all(|&d| d <= PANSU_TOL);
    let decreasing = defects.windows(2).all(|w| w[1] < w[0]);
    let mut check = Check::verdict(
        "pansu_defects",
        small || decreasing,
        json!({ "scales": PANSU_SCALES, "defects": defects }),
    )
    .sampled(sampler.count, s.seed);
    check.tolerance = Some(PANSU_TOL);
    let data = json!({
        "arithmetic": if exact { "exact" } else { "float" },
        "point": x.0,
        "within_tolerance": small,
        "decreasing": decreasing,
    });
    Ok(Outcome {
        algebra: alg,
        checks: vec![check],
        data,
    })
}

fn automorphism_cmd(source: &AlgebraArgs, map: &[String], s: &SamplingArgs) -> Result<Outcome> {
    let (alg, dec) = load_dec(source)?;
    let f = parse_chain(&dec, map, s.seed)?;
    let r = automorphism_check(&f, &s.sampler())?;
    let mut checks = vec![Check::bound("homomorphism", r.defect, r.tolerance).sampled(r.samples, s.seed)];
    let mut data = json!({ "normalized": r.normalized });
    match similarity_exponent_check(&f) {
        Ok(e) => {
            let name = "similarity_exponent";
            checks.push(match e.exact {
                Some(ok) => Check::verdict(name, ok, json!(e.defect)),
                None => Check::estimate(name, json!(e.defect)),
            });
            data["lambda_a"] = json!(e.lambda_a);
            data["lambda_b"] = json!(e.lambda_b);
        }
        Err(e) => data["similarity_exponent"] = json!(e.to_string()),
    }
    Ok(Outcome {
        algebra: alg,
        checks,
        data,
    })
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Classify(a) => classify(a),
        Command::Shear(a) => shear_cmd(a),
        Command::Maps(m) => match m {
            MapsCommand::Compatible { source, map, sampling } => compatible_cmd(source, map, sampling),
            MapsCommand::Dalpha { source, map, point, mode, sampling } => {
                dalpha_cmd(source, map, point.as_deref(), *mode, sampling)
            }
            MapsCommand::Chain { source, outer, inner, point, mode, sampling } => {
                chain_cmd(source, outer, inner, point.as_deref(), *mode, sampling)
            }
            MapsCommand::Cocycle { source, first, second, sampling } => {
                cocycle_cmd(source, first, second, sampling)
            }
            MapsCommand::Conjugate { source, map, layer, component, solve, max_iter, tol, sampling } => {
                conjugate_cmd(source, map, *layer, component.as_deref(), *solve, *max_iter, *tol, sampling)
            }
            MapsCommand::Pansu { source, map, point, differential, sampling } => {
                pansu_cmd(source, map, point.as_deref(), differential.as_deref(), sampling)
            }
            MapsCommand::Automorphism { source, map, sampling } => automorphism_cmd(source, map, sampling),
        },
    }
}

/// Runs a parsed command and assembles its report.
pub fn execute(cli: &Cli, command: Vec<String>) -> Result<Report> {
    let start = Instant::now();
    let out = dispatch(cli)?;
    Ok(Report {
        schema: "1",
        command,
        algebra: AlgebraDigest::of(&out.algebra),
        checks: out.checks,
        data: out.data,
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Parses `args` (program name first), prints the report and returns the exit code.
pub fn run<I, T>(args: I, out: &mut impl Write, err: &mut impl Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args: Vec<OsString> = args.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    let command = args
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli, command) {
        Ok(report) => {
            let _ = writeln!(out, "{}", report.to_json());
            report.exit_code()
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn call(args: &[&str]) -> (i32, Value) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let mut full = vec!["nilcarnot"];
        full.extend_from_slice(args);
        let code = run(full, &mut out, &mut err);
        let v = serde_json::from_slice(&out).unwrap_or(Value::Null);
        (code, v)
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3/2").unwrap(), crate::scalar::q(3, 2));
        assert_eq!(parse_rational("-0.25").unwrap(), crate::scalar::q(-1, 4));
        assert_eq!(parse_rational("7").unwrap(), crate::scalar::qi(7));
        assert!(parse_rational("1e3").is_err());
        assert!(parse_rational(".").is_err());
        assert_eq!(parse_rational("1.0").unwrap(), crate::scalar::qi(1));
    }

    #[test]
    fn classify_engel_heis() {
        let (code, v) = call(&["classify", "--fixture", "engel_heis7"]);
        assert_eq!(code, 0);
        assert_eq!(v["schema"], "1");
        assert_eq!(v["data"]["decomposition"]["alpha"], "2");
        assert_eq!(v["data"]["decomposition"]["w_dim"], 4);
        let (_, v) = call(&["classify", "--fixture", "heisenberg3"]);
        assert_eq!(v["checks"][3]["value"], "carnot");
        let (code, _) = call(&["classify", "--fixture", "nope"]);
        assert_eq!(code, 2);
    }

    #[test]
    fn dalpha_and_chain() {
        let (code, v) = call(&["maps", "dalpha", "--fixture", "heisprod4", "--map", "shear:2=0.5*q1"]);
        assert_eq!(code, 0);
        assert_eq!(v["data"]["matrix"][0][1], 0.5);
        let (code, v) = call(&[
            "maps", "chain", "--fixture", "heisprod4", "--outer", "shear:2=0.2*q1", "--inner", "shear:2=0.3*q1",
        ]);
        assert_eq!(code, 0);
        assert!((v["data"]["composite"][0][1].as_f64().unwrap() - 0.5).abs() < 1e-12);
        let (code, v) = call(&["maps", "cocycle", "--fixture", "ladder5", "--samples", "20"]);
        assert_eq!(code, 0);
        assert_eq!(v["checks"][0]["value"], 0.0);
    }

    #[test]
    fn shear_reports() {
        let (code, _) = call(&["shear", "--fixture", "ladder5", "--component", "2=q1"]);
        assert_eq!(code, 2);
        let (code, v) = call(&["shear", "--fixture", "ladder5", "--component", "1=0", "--verify", "--samples", "50"]);
        assert_eq!(code, 0);
        assert_eq!(v["data"]["identity"], true);
        assert_eq!(v["checks"][1]["value"]["distortion"], 1.0);
    }

    #[test]
    fn reports_are_reproducible() {
        let args = ["shear", "--fixture", "ladder5", "--component", "1=sign(q1)*sqrt(abs(q1))", "--verify", "--samples", "40", "--seed", "7"];
        let (_, mut a) = call(&args);
        let (_, mut b) = call(&args);
        a["wall_clock_ms"] = Value::Null;
        b["wall_clock_ms"] = Value::Null;
        assert_eq!(a.to_string(), b.to_string());
    }
}
