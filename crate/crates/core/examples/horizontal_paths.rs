//! Zigzag horizontal paths to points of several Carnot groups.

use nilcarnot::carnot::CarnotGroup;
use nilcarnot::catalog::{fixture, FixtureName};
use nilcarnot::path::{horizontal_connect, segment_bound};
use nilcarnot::sampling::{sample_ball, Stream};

fn main() -> nilcarnot::Result<()> {
    for name in [FixtureName::Heisenberg3, FixtureName::Engel4, FixtureName::FreeStep2(3)] {
        let c = CarnotGroup::new(fixture(name))?;
        let mut s = Stream::new(42, 0x7a69);
        let mut most = 0;
        for _ in 0..100 {
            let g = sample_ball(c.algebra(), &mut s, 5.0);
            most = most.max(horizontal_connect(&c, &g, 1e-9)?.segment_count());
        }
        println!("{name:<14} longest path {most:>3} segments, bound {}", segment_bound(&c));
    }

    let heis = CarnotGroup::new(fixture(FixtureName::Heisenberg3))?;
    let path = horizontal_connect(&heis, &[0.0, 0.0, 1.0], 1e-12)?;
    for seg in path.segments() {
        println!("  {:?} for {}", seg.direction.0, seg.duration);
    }
    println!("  ends at {}", path.endpoint_exact());
    Ok(())
}
