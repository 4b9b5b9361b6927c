//! Splits a function into its exterior part and a Martin-kernel measure.

use stable_potential::kernels::martin_ball;
use stable_potential::martin::BallKernels;
use stable_potential::representation::{decompose, harmonic_extension, probe_points, DecomposeOptions, ExtensionMethod};
use stable_potential::sampler::TestFunction;
use stable_potential::{BallSpec, Domain, Point, RngStream, StableIndex};

fn main() -> stable_potential::Result<()> {
    let idx = StableIndex::new(2, 1.0)?;
    let disk = Domain::unit_ball(2);
    let ball = BallSpec::unit(2);
    let src = BallKernels::new(idx.clone(), ball.clone());
    let mesh = disk.boundary_mesh(12)?;
    let probes = probe_points(&disk, 36)?;
    let stream = RngStream::new(9, 0);

    let outside = TestFunction::bounded(|w: &Point| 1.0 / (1.0 + w.norm_sq()));
    let z = mesh.nodes[3].clone();
    let f = TestFunction::bounded(|w: &Point| {
        if disk.dist_to_boundary(w) > 0.0 {
            let ext = harmonic_extension(&disk, &idx, &outside, w, ExtensionMethod::BallQuadrature, &stream).unwrap().value;
            ext + 0.5 * martin_ball(&idx, &ball, w, &z).unwrap()
        } else {
            outside.eval(w)
        }
    });

    let dec = decompose(&disk, &idx, &f, &probes, &mesh, &src, &DecomposeOptions::default(), &stream)?;
    println!("fit residual {:.2e}, total mu mass {:.4} (planted 0.5 at {z:?})", dec.fit_residual, dec.martin_measure.total_mass());
    for (p, w) in dec.martin_measure.mesh.nodes.iter().zip(&dec.martin_measure.weights) {
        if *w > 1e-4 {
            println!("  {:+.3} {:+.3}: {w:.4}", p[0], p[1]);
        }
    }
    Ok(())
}
