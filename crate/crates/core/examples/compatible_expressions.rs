//! Normal form `g -> B(h) * A(w) * s(h)` of a factor chain.

use std::sync::Arc;

use nilcarnot::carnot::decompose;
use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::maps::{extract_compatible, verify_compatible, Factor, FiberMap};
use nilcarnot::sampling::Sampler;
use nilcarnot::shear::{build_shear, BuildOptions, ShearComponent};
use nilcarnot::{q, Vector};

fn main() -> nilcarnot::Result<()> {
    let d = Arc::new(decompose(&fixture(FixtureName::Heisprod4))?);
    let c = ShearComponent::expression(&d, 2, &["q1^2"])?;
    let shear = Arc::new(build_shear(&d, vec![c], &BuildOptions::default())?);
    let f = FiberMap::new(
        d.clone(),
        vec![
            Factor::Translate(Vector(vec![0.5, -0.2, 0.3, 1.0])),
            Factor::Shear(shear),
            Factor::Dilate(q(3, 2)),
        ],
    )?;
    let expr = extract_compatible(&f)?;
    println!("A =\n{}", expr.a());
    println!("B =\n{}", expr.b());
    println!("s(0.4) = {:.6}", expr.s(&[0.4])?);
    let report = verify_compatible(&f, &expr, &Sampler::new(1, 100, 3.0))?;
    println!("verified: {}", report.passed());
    Ok(())
}
