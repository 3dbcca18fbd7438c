//! Distortion and growth diagnostics for a good and a broken shear.

use std::sync::Arc;

use nilcarnot::carnot::decompose;
use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::sampling::Sampler;
use nilcarnot::shear::{
    bilip_estimate, build_shear, necessity_check, BuildOptions, PairMode, ShearComponent, ShearMap,
};

fn main() -> nilcarnot::Result<()> {
    let d = Arc::new(decompose(&fixture(FixtureName::Ladder5))?);
    let sigma = ShearComponent::expression(&d, 1, &["sign(q1)*sqrt(abs(q1))"])?;
    let good = build_shear(&d, vec![sigma.clone()], &BuildOptions::default())?;
    let s3 = good.component(3).expect("lifted layer").clone();
    let broken = ShearMap::new(d.clone(), vec![sigma, s3.negated()])?;

    let b = bilip_estimate(d.algebra(), |g| good.apply(g), &Sampler::new(42, 2000, 10.0), PairMode::Independent)?;
    println!("distortion over 2000 pairs: {:.3}", b.distortion());

    for r in [1.0, 10.0, 100.0] {
        let sampler = Sampler::new(42, 500, r);
        let ok = necessity_check(&good, &sampler)?.max_ratio();
        let bad = necessity_check(&broken, &sampler)?.max_ratio();
        println!("radius {r:>5}: good {ok:.3}  broken {bad:.3}");
    }
    Ok(())
}
