//! The square-root shear on ladder5 and its lifted third layer.

use std::sync::Arc;

use nilcarnot::carnot::decompose;
use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::shear::{build_shear, BuildOptions, ShearComponent};

fn main() -> nilcarnot::Result<()> {
    let d = Arc::new(decompose(&fixture(FixtureName::Ladder5))?);
    let sigma = ShearComponent::expression(&d, 1, &["sign(q1)*sqrt(abs(q1))"])?;
    let map = build_shear(&d, vec![sigma], &BuildOptions::default())?;
    println!("layers carrying s: {:?}", map.components().keys().collect::<Vec<_>>());
    let s3 = map.component(3).expect("lifted layer");
    for p in [-4.0, -1.0, 0.5, 2.0, 8.0] {
        let v = s3.eval(&[p])?;
        let closed = -(2.0 / 3.0) * f64::abs(p).powf(1.5);
        println!("p = {p:>5}: s3 = {:>12.9}  closed form {closed:>12.9}", v[5]);
    }
    let g = [0.3, -1.0, 0.2, 0.7, 2.5, -0.4];
    println!("F(g) = {:.6}", map.apply(&g)?);
    Ok(())
}
