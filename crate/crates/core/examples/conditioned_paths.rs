//! Paths of the process conditioned to exit at a boundary point, and the
//! conditional lifetime.

use stable_potential::conditioned::{conditional_lifetime, simulate_paths, HFunction, PathOptions, StopReason};
use stable_potential::{Domain, Point, RngStream, StableIndex};

fn main() -> stable_potential::Result<()> {
    let idx = StableIndex::new(2, 1.3)?;
    let disk = Domain::unit_ball(2);
    let z = Point::from([0.0, 1.0]);
    let x = Point::from([0.1, -0.5]);
    let h = HFunction::martin_pole(&disk, &idx, &z)?;
    let opts = PathOptions { eps_stop: Some(1e-3), ..Default::default() };

    let paths = simulate_paths(&h, &x, 2_000, &opts, &RngStream::new(5, 0))?;
    let reached = paths.iter().filter(|p| p.stopped_reason == StopReason::ReachedPole).count();
    let mean_steps = paths.iter().map(|p| p.steps as f64).sum::<f64>() / paths.len() as f64;
    println!("{reached}/{} paths reached z, {mean_steps:.1} steps on average", paths.len());
    for p in paths[0].points.iter().take(8) {
        println!("  {:+.4} {:+.4}", p[0], p[1]);
    }

    let t = conditional_lifetime(&disk, &idx, &x, &z, 8)?;
    println!("E_x^z[tau_D] = {:.6} (+- {:.1e})", t.value, t.error);
    Ok(())
}
