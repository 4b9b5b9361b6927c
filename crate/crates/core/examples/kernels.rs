//! Closed-form ball kernels and their basic identities.

use stable_potential::kernels::{green_ball, martin_ball, mean_exit_time_ball, poisson_ball};
use stable_potential::quad::{integrate_exterior_tail, ExteriorOptions};
use stable_potential::{BallSpec, Domain, Point, StableIndex};

fn main() -> stable_potential::Result<()> {
    let idx = StableIndex::new(2, 1.2)?;
    let ball = BallSpec::unit(2);
    let x = Point::from([0.3, -0.1]);
    let y = Point::from([-0.2, 0.4]);
    let z = Point::from([0.0, 1.0]);

    println!("G_B(x, y)       = {:.10}", green_ball(&idx, &ball, &x, &y)?);
    println!("G_B(y, x)       = {:.10}", green_ball(&idx, &ball, &y, &x)?);
    println!("M_B(x, z)       = {:.10}", martin_ball(&idx, &ball, &x, &z)?);
    println!("M_B(0, z)       = {:.10}", martin_ball(&idx, &ball, &Point::zeros(2), &z)?);
    println!("E_x[tau_B]      = {:.10}", mean_exit_time_ball(&idx, &ball, &x)?);

    // The Poisson kernel is a probability density on the complement of the ball.
    let mass = integrate_exterior_tail(
        &Domain::unit_ball(2),
        |w: &Point| poisson_ball(&idx, &ball, &x, w).unwrap_or(0.0),
        &ExteriorOptions { boundary_exponent: idx.alpha() / 2.0, ..ExteriorOptions::new(2.0 + idx.alpha()) },
    )?;
    println!("int K_B(x, .)   = {:.12} (error {:.1e})", mass.value, mass.error);
    Ok(())
}
