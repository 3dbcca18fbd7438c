//! Exact group law on the Engel group.

use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::group::{bch, conjugate, dilate, quasi_dist};
use nilcarnot::{q, qi, Vector};

fn main() -> nilcarnot::Result<()> {
    let alg = fixture(FixtureName::Engel4);
    let x = Vector(vec![qi(1), q(1, 2), qi(0), q(-1, 3)]);
    let y = Vector(vec![q(2, 3), qi(-1), qi(1), qi(0)]);
    let z = Vector(vec![qi(0), qi(2), q(1, 5), qi(1)]);

    let xy = bch(&alg, &x, &y)?;
    println!("x*y        = {xy}");
    let left = bch(&alg, &xy, &z)?;
    let right = bch(&alg, &x, &bch(&alg, &y, &z)?)?;
    println!("associative: {}", left == right);
    println!("y x y^-1   = {}", conjugate(&alg, &y, &x));
    println!("delta_2 x  = {}", dilate(&alg, &qi(2), &x)?);

    let xf = x.to_f64();
    let yf = y.to_f64();
    let d = quasi_dist(&alg, &xf, &yf);
    let d3 = quasi_dist(&alg, &dilate(&alg, &3.0, &xf)?, &dilate(&alg, &3.0, &yf)?);
    println!("rho(x, y) = {d:.6}, rho(3x, 3y) / 3 = {:.6}", d3 / 3.0);
    Ok(())
}
