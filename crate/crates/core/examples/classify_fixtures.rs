//! Validates every shipped algebra and prints its Carnot-by-Carnot data.

use nilcarnot::carnot::decompose;
use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::validate_algebra;

fn main() {
    for name in FixtureName::ALL {
        let alg = fixture(name);
        let report = validate_algebra(&alg);
        print!("{name:<14} dim {} step {:?} valid {}", alg.dim(), alg.step(), report.is_valid());
        match decompose(&alg) {
            Ok(d) => println!(
                "  alpha {}  dim w {}  quotient dim {}  centre layers {:?}",
                d.alpha(),
                d.w().dim(),
                d.quotient_dim(),
                d.z_layers().keys().collect::<Vec<_>>()
            ),
            Err(e) => println!("  ({e})"),
        }
    }
}
