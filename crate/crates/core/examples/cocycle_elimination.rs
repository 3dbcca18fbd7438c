//! Cocycle identity, and removal of a shear cocycle by conjugation.

use std::sync::Arc;

use nilcarnot::carnot::decompose;
use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::maps::{
    cocycle_identity_check, conjugate_by_shear, solve_single_generator_fixed_point, Factor, FiberMap,
};
use nilcarnot::sampling::quotient_grid;
use nilcarnot::shear::{build_shear, BuildOptions, ShearComponent};
use nilcarnot::{q, qi, Vector};

fn main() -> nilcarnot::Result<()> {
    let d = Arc::new(decompose(&fixture(FixtureName::Ladder5))?);
    let grid = quotient_grid(&d, 100, 6.0, 9);
    let c = ShearComponent::expression(&d, 1, &["q1"])?;
    let shear = Arc::new(build_shear(&d, vec![c], &BuildOptions::default())?);

    let gamma = FiberMap::new(d.clone(), vec![Factor::Shear(shear), Factor::Dilate(q(1, 2))])?;
    let other = FiberMap::new(
        d.clone(),
        vec![Factor::Translate(Vector(vec![0.0, 0.0, 0.0, 0.0, 1.5, 0.0])), Factor::Dilate(qi(2))],
    )?;
    println!("cocycle identity defect {:e}", cocycle_identity_check(&gamma, &other, &grid)?);

    let fp = solve_single_generator_fixed_point(&gamma, 1, 200, 1e-13, &grid)?;
    println!("fixed point: {:?} after {} terms, residual {:e}", fp.mode, fp.iterations, fp.residual);
    let f0 = build_shear(&d, vec![fp.component], &BuildOptions::default())?;
    let (_, report) = conjugate_by_shear(&f0, &gamma, &grid)?;
    println!("conjugated cocycle sup {:e}", report.sup_residual);
    Ok(())
}
