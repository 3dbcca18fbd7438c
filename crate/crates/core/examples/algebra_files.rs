//! Builds product algebras and writes them as JSON.

use nilcarnot::catalog::{
    algebra_to_json, central_product, direct_product, fixture, parse_algebra, sol_like, FixtureName,
};
use nilcarnot::qi;

fn main() -> nilcarnot::Result<()> {
    let heis = fixture(FixtureName::Heisenberg3);
    let engel = fixture(FixtureName::Engel4);

    let prod = direct_product(&heis, &engel, &qi(2))?;
    println!("direct product labels {:?}", prod.labels());
    let text = algebra_to_json(&prod)?;
    println!("{text}");
    let back = parse_algebra(&text)?;
    println!("round trip keeps dim {} and step {:?}", back.dim(), back.step());

    let central = central_product(&heis, &heis, &[(2, 2)])?;
    println!("Heisenberg central square: dim {}", central.dim());
    let sol = sol_like(&heis, &heis)?;
    println!("sol-like signed weights {:?}", sol.signed_weights());
    Ok(())
}
