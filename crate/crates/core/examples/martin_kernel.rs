//! Martin kernel as a limit of Green-function ratios, against the ball closed form.

use stable_potential::kernels::martin_ball;
use stable_potential::martin::{martin_estimate, MartinMethod, MartinOptions};
use stable_potential::{BallSpec, Domain, Point, RngStream, StableIndex};

fn main() -> stable_potential::Result<()> {
    let idx = StableIndex::new(2, 1.0)?;
    let disk = Domain::unit_ball(2);
    let z = Point::from([1.0, 0.0]);
    let x = Point::from([0.2, 0.3]);
    let exact = martin_ball(&idx, &BallSpec::unit(2), &x, &z)?;

    for method in [MartinMethod::Auto, MartinMethod::MonteCarlo] {
        let opts = MartinOptions { method, t0: Some(0.25), ..Default::default() };
        let m = martin_estimate(&disk, &idx, &Point::zeros(2), &x, &z, &opts, &RngStream::new(3, 0))?;
        println!("{method:?}: {:.5} (bound {:.1e}, {} levels), closed form {exact:.5}", m.value, m.error_bound, m.levels);
        for (k, v) in m.sequence_values.iter().enumerate() {
            println!("  level {k}: ratio {v:.5}");
        }
    }
    Ok(())
}
