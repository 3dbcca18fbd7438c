//! The differential along the `V_alpha` directions, closed form against finite differences.

use std::sync::Arc;

use nilcarnot::carnot::decompose;
use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::maps::{chain_rule_check, d_alpha_matrix, DalphaMode, FiberMap};
use nilcarnot::shear::{build_shear, BuildOptions, ShearComponent};

fn shear(d: &Arc<nilcarnot::carnot::CbCDecomposition>, src: &str) -> nilcarnot::Result<FiberMap> {
    let c = ShearComponent::expression(d, 2, &[src])?;
    Ok(FiberMap::from_shear(build_shear(d, vec![c], &BuildOptions::default())?))
}

fn main() -> nilcarnot::Result<()> {
    let d = Arc::new(decompose(&fixture(FixtureName::Heisprod4))?);
    let f = shear(&d, "q1^2")?;
    let g = shear(&d, "0.7*q1")?;
    let p = [0.3, -0.2, 1.0, 0.4];
    for mode in [DalphaMode::ClosedForm, DalphaMode::FiniteDifference] {
        let m = d_alpha_matrix(&f, &p, mode)?;
        println!("{mode:?}:\n{:.9}", m.matrix);
    }
    println!("chain-rule defect {:e}", chain_rule_check(&f, &g, &p, DalphaMode::Auto)?);
    Ok(())
}
