//! Gauge function and conditional gauge for constant potentials on the disk.

use stable_potential::quad::{green_operator, OperatorOptions};
use stable_potential::schrodinger::{conditional_gauge, gauge, Potential, PsiRule};
use stable_potential::martin::BallKernels;
use stable_potential::{BallSpec, Domain, Point, StableIndex};

fn main() -> stable_potential::Result<()> {
    let idx = StableIndex::new(2, 1.0)?;
    let disk = Domain::unit_ball(2);
    let op = green_operator(&disk, &idx, &OperatorOptions::new(6))?;
    let src = BallKernels::new(idx.clone(), BallSpec::unit(2));
    let x = Point::from([0.2, 0.1]);
    let z = Point::from([0.0, 1.0]);

    for c in [-1.0, 0.5, 1.0, 1.5, 2.0, 3.0] {
        let q = Potential::constant(c);
        let g = gauge(&idx, &q, &op, 1e-10)?;
        let center = g.values.as_ref().map(|v| v[op.mesh.nearest(&Point::zeros(2))]);
        print!("c = {c:+.1}: rho = {:.3}, gaugeable {}, g(0) ~ {center:?}", g.spectral_radius_estimate, g.gaugeable);
        if g.gaugeable {
            let cg = conditional_gauge(&disk, &idx, &q, &op, &x, &z, &src, PsiRule::Mesh)?;
            print!(", E_x^z[e_q] = {cg:.5}");
        }
        println!();
    }
    Ok(())
}
