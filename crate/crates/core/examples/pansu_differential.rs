//! Blow-up defects `rho(delta_1/t (f(x)^-1 f(x delta_t y)), L y)` in exact arithmetic.

use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::maps::{pansu_check, PANSU_SCALES};
use nilcarnot::sampling::Sampler;
use nilcarnot::{q, qi, MatQ, Vector, Q};

fn main() -> nilcarnot::Result<()> {
    let heis = fixture(FixtureName::Heisenberg3);
    let sampler = Sampler::new(10, 100, 1.0);
    let m = MatQ::diagonal(&[qi(2), qi(-2), qi(-4)]);
    let x = vec![q(1, 3), qi(0), q(-1, 2)];
    let defects = pansu_check(&heis, |y: &[Q]| Ok(m.mul_vec(y)), &x, &m, &PANSU_SCALES, &sampler)?;
    println!("automorphism: {defects:?}");

    let contact = |y: &[Q]| -> nilcarnot::Result<Vector<Q>> {
        let sq = y[0].clone() * y[0].clone();
        Ok(Vector(vec![y[0].clone(), y[1].clone() + sq.clone(), y[2].clone() + sq * y[0].clone() / qi(6)]))
    };
    let defects = pansu_check(&heis, contact, &[qi(0), qi(0), qi(0)], &MatQ::identity(3), &PANSU_SCALES, &sampler)?;
    println!("contact map at 0: {defects:?}");
    Ok(())
}
