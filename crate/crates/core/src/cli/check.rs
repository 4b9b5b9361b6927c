//! Quick property suite behind the `check` subcommand.

use serde::Deserialize;
use serde_json::json;

use super::{Artifacts, Cell, RunConfig, Table};
use crate::conditioned::{conditional_lifetime, HFunction};
use crate::error::{Error, Result};
use crate::geometry::{BallSpec, Domain, Point, StableIndex};
use crate::kernels::{green_ball, martin_ball, poisson_ball};
use crate::quad::{green_operator, integrate_exterior_tail, ExteriorOptions, OperatorOptions};
use crate::representation::poisson_from_green;
use crate::sampler::{harmonic_measure, mean_value_residual_xd, RngStream, TestFunction, WosOptions};
use crate::schrodinger::{gauge, Potential};

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CheckParams {
    /// Monte Carlo sample size of the stochastic checks.
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_samples() -> usize {
    20_000
}

struct Outcome {
    name: &'static str,
    value: f64,
    tolerance: f64,
    pass: bool,
}

fn within(name: &'static str, err: f64, tolerance: f64) -> Outcome {
    Outcome { name, value: err, tolerance, pass: err <= tolerance }
}

pub(super) fn check(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let p: CheckParams = cfg.params()?;
    if p.samples == 0 {
        return Err(Error::Config("`samples` must be positive".into()));
    }
    let stream = RngStream::new(seed, 0);
    let mut out = Vec::new();
    for (n, a) in [(1, 0.5), (2, 1.0), (3, 1.5)] {
        let idx = StableIndex::new(n, a)?;
        let d = Domain::unit_ball(n);
        let b = BallSpec::unit(n);
        let mut x = Point::zeros(n);
        x[0] = 0.5;
        let tx = x.clone();
        let mass = integrate_exterior_tail(
            &d,
            |z: &Point| poisson_ball(&idx, &b, &tx, z).unwrap_or(0.0),
            &ExteriorOptions { boundary_exponent: a / 2.0, ..ExteriorOptions::new(n as f64 + a) },
        )?;
        out.push(within("poisson_normalization", (mass.value - 1.0).abs(), 1e-3));
        let mut w = Point::zeros(n);
        w[n - 1] = 1.0;
        out.push(within("martin_center_is_one", (martin_ball(&idx, &b, &Point::zeros(n), &w)? - 1.0).abs(), 1e-14));
        let mut y = Point::zeros(n);
        y[0] = -0.3;
        let g = (green_ball(&idx, &b, &x, &y)? - green_ball(&idx, &b, &y, &x)?).abs();
        out.push(within("green_symmetry", g, 1e-12 * green_ball(&idx, &b, &x, &y)?));
    }
    let idx = StableIndex::new(2, 1.2)?;
    let d = Domain::unit_cube(2);
    let one = harmonic_measure(&d, &idx, &Point::new(&[0.3, 0.7]), &TestFunction::bounded(|_: &Point| 1.0), p.samples, &stream.substream(1), &WosOptions::default())?;
    out.push(within("harmonic_measure_of_one", (one.value - 1.0).abs(), 0.0));

    let disk = Domain::unit_ball(2);
    let z = Point::new(&[0.0, 1.0]);
    let h = HFunction::martin_pole(&disk, &idx, &z)?;
    let ball = BallSpec::new(Point::new(&[0.2, -0.1]), 0.4)?;
    let r = mean_value_residual_xd(&disk, &ball, &idx, |w: &Point| h.eval(w), p.samples, &stream.substream(2))?;
    out.push(Outcome { name: "martin_harmonicity_z_score", value: r.z_score(0.0), tolerance: 3.0, pass: r.z_score(0.0) <= 3.0 });

    let x = Point::new(&[0.2, 0.1]);
    let ze = Point::new(&[1.5, 0.3]);
    let k = poisson_ball(&idx, &BallSpec::unit(2), &x, &ze)?;
    let kg = poisson_from_green(&disk, &idx, &x, &ze, 8)?;
    out.push(within("green_to_poisson_relative", (kg / k - 1.0).abs(), 0.02));

    let op = green_operator(&disk, &idx, &OperatorOptions { use_cache: false, ..OperatorOptions::new(4) })?;
    let g0 = gauge(&idx, &Potential::zero(), &op, 1e-12)?;
    let dev = g0.values.map_or(f64::INFINITY, |v| v.iter().map(|g| (g - 1.0).abs()).fold(0.0, f64::max));
    out.push(within("zero_potential_gauge", dev, 0.0));

    let l1 = conditional_lifetime(&disk, &idx, &x, &z, 8)?.value;
    let l2 = conditional_lifetime(&disk.dilate(2.0)?, &idx, &x.scale(2.0), &z.scale(2.0), 8)?.value;
    out.push(within("lifetime_scaling_relative", (l2 / l1 / 2f64.powf(1.2) - 1.0).abs(), 1e-2));

    let mut t = Table::new(&["invariant", "value", "tolerance", "pass"]);
    for o in &out {
        t.push(vec![Cell::from(o.name), o.value.into(), o.tolerance.into(), Cell::from(if o.pass { "PASS" } else { "FAIL" })]);
    }
    let failed: Vec<&str> = out.iter().filter(|o| !o.pass).map(|o| o.name).collect();
    let summary = json!({
        "checks": out.iter().map(|o| json!({ "name": o.name, "value": o.value, "tolerance": o.tolerance, "pass": o.pass })).collect::<Vec<_>>(),
        "failed": failed,
        "all_passed": failed.is_empty(),
    });
    let failed = !failed.is_empty();
    Ok(Artifacts { summary, table: Some(t), failed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn property_suite_passes() {
        let cfg = RunConfig::from_json(r#"{"seed": 11, "samples": 4000}"#).unwrap();
        let a = check(&cfg, 11).unwrap();
        assert_eq!(a.summary["all_passed"], true, "{}", a.summary);
    }
}
