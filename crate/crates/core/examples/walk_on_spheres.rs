//! Walk-on-spheres on the unit square: harmonic measure of a half plane.

use stable_potential::sampler::{harmonic_measure, walk_on_spheres, TestFunction, WosOptions};
use stable_potential::{Domain, Point, RngStream, StableIndex};

fn main() -> stable_potential::Result<()> {
    let idx = StableIndex::new(2, 1.5)?;
    let square = Domain::unit_cube(2);
    let x = Point::from([0.25, 0.5]);
    let opts = WosOptions::default();

    let mut rng = RngStream::new(1, 0).rng();
    let one = walk_on_spheres(&square, &idx, &x, &opts, &mut rng)?;
    println!("one walk: {} steps, exit at {:?}", one.steps, one.exit_point);

    let right = TestFunction::bounded(|w: &Point| if w[0] > 0.5 { 1.0 } else { 0.0 });
    for n in [1_000, 10_000, 100_000] {
        let e = harmonic_measure(&square, &idx, &x, &right, n, &RngStream::new(1, 1), &opts)?;
        println!("P_x(exit into x1 > 1/2) with {n:>6} walks: {:.4} +- {:.4}", e.value, e.std_error);
    }
    Ok(())
}
