use rand::Rng;
use serde::Deserialize;
use serde_json::json;

use super::{coord_cells, coord_header, Artifacts, Cell, RunConfig, Table};
use crate::conditioned::{chi_square_test, simulate_conditioned_path, HFunction, PathOptions, StopReason};
use crate::error::{Error, Result};
use crate::geometry::{BallSpec, BoundaryMesh, Domain, Point, StableIndex};
use crate::kernels::{green_ball, green_whole, martin_ball, mean_exit_time_ball, poisson_ball};
use crate::martin::{martin_estimate, BallKernels, KernelSource, MartinOptions, McKernels};
use crate::quad::{green_operator, MeshGreenOperator, OperatorOptions};
use crate::representation::{decompose, harmonic_extension, probe_points, DecomposeOptions, ExtensionMethod};
use crate::sampler::{harmonic_measure, mc_collect, RngStream, TestFunction, WosOptions};
use crate::schrodinger::{conditional_gauges, gauge as solve_gauge, Potential, PsiRule};

fn point(domain: &Domain, v: &[f64], what: &str) -> Result<Point> {
    if v.len() != domain.dim() {
        return Err(Error::Config(format!("`{what}` has {} coordinates, the domain has {}", v.len(), domain.dim())));
    }
    Ok(Point::new(v))
}

fn ball(domain: &Domain, what: &str) -> Result<BallSpec> {
    domain
        .as_ball()
        .cloned()
        .ok_or_else(|| Error::Unsupported(format!("{what} needs closed-form kernels, i.e. a ball domain")))
}

fn source(domain: &Domain, idx: &StableIndex, seed: u64) -> Box<dyn KernelSource> {
    match domain.as_ball() {
        Some(b) => Box::new(BallKernels::new(idx.clone(), b.clone())),
        None => Box::new(McKernels {
            domain: domain.clone(),
            idx: idx.clone(),
            x0: domain.center().clone(),
            green_samples: 20_000,
            martin: MartinOptions { method: crate::martin::MartinMethod::MonteCarlo, ..Default::default() },
            stream: RngStream::new(seed, 0x6b65),
        }),
    }
}

#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Query {
    Green,
    GreenWhole,
    Poisson,
    Martin,
    ExitTime,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelParams {
    query: Query,
    #[serde(default)]
    x: Option<Vec<f64>>,
    #[serde(default)]
    w: Option<Vec<f64>>,
    /// Alternative to `x`/`w`: a list of [x, w] pairs.
    #[serde(default)]
    pairs: Vec<(Vec<f64>, Vec<f64>)>,
}

pub(super) fn kernel(cfg: &RunConfig) -> Result<Artifacts> {
    let p: KernelParams = cfg.params()?;
    let domain = cfg.domain()?;
    let n = domain.dim();
    let idx = cfg.index(n)?;
    let mut pairs = p.pairs.clone();
    match (&p.x, &p.w, p.query) {
        (Some(x), Some(w), _) => pairs.push((x.clone(), w.clone())),
        (Some(x), None, Query::ExitTime) => pairs.push((x.clone(), vec![0.0; n])),
        (None, None, _) => {}
        _ => return Err(Error::Config("give both `x` and `w`, or `pairs`".into())),
    }
    if pairs.is_empty() {
        return Err(Error::Config("no evaluation points".into()));
    }
    let mut header = coord_header("x", n);
    header.extend(coord_header("w", n));
    header.push("value".into());
    let mut t = Table::new(&header);
    for (xv, wv) in &pairs {
        let x = point(&domain, xv, "x")?;
        let w = point(&domain, wv, "w")?;
        let v = match p.query {
            Query::GreenWhole => green_whole(&idx, &x, &w)?,
            Query::Green => green_ball(&idx, &ball(&domain, "green")?, &x, &w)?,
            Query::Poisson => poisson_ball(&idx, &ball(&domain, "poisson")?, &x, &w)?,
            Query::Martin => martin_ball(&idx, &ball(&domain, "martin")?, &x, &w)?,
            Query::ExitTime => mean_exit_time_ball(&idx, &ball(&domain, "exit_time")?, &x)?,
        };
        let mut row = coord_cells(&x);
        row.extend(coord_cells(&w));
        row.push(v.into());
        t.push(row);
    }
    Ok(Artifacts { summary: json!({ "rows": t.rows.len() }), table: Some(t), failed: false })
}

/// Exterior data: a builtin name or a table looked up at the nearest node.
#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
enum Phi {
    Builtin(String),
    Table { nodes: Vec<Vec<f64>>, values: Vec<f64> },
}

impl Phi {
    fn build(&self, domain: &Domain) -> Result<Box<dyn Fn(&Point) -> f64 + Send + Sync>> {
        let c = domain.center().clone();
        match self {
            Phi::Builtin(name) => match name.as_str() {
                "zero" => Ok(Box::new(|_: &Point| 0.0)),
                "one" => Ok(Box::new(|_: &Point| 1.0)),
                "half_space" => Ok(Box::new(move |z: &Point| if z[0] > c[0] { 1.0 } else { 0.0 })),
                "inverse_square" => Ok(Box::new(move |z: &Point| 1.0f64.min(1.0 / z.dist_sq(&c)))),
                other => Err(Error::Config(format!(
                    "unknown builtin `{other}`; expected zero, one, half_space or inverse_square"
                ))),
            },
            Phi::Table { nodes, values } => {
                if nodes.len() != values.len() || nodes.is_empty() {
                    return Err(Error::Config("table needs one value per node".into()));
                }
                let pts = nodes.iter().map(|v| point(domain, v, "nodes")).collect::<Result<Vec<_>>>()?;
                let mesh = BoundaryMesh { patch_areas: vec![1.0; pts.len()], nodes: pts };
                let vals = values.clone();
                Ok(Box::new(move |z: &Point| vals[mesh.nearest(z)]))
            }
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct WosParams {
    x: Vec<f64>,
    phi: Phi,
    samples: usize,
    #[serde(default)]
    shrink: Option<f64>,
}

pub(super) fn wos(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let p: WosParams = cfg.params()?;
    let domain = cfg.domain()?;
    let idx = cfg.index(domain.dim())?;
    let x = point(&domain, &p.x, "x")?;
    let phi = p.phi.build(&domain)?;
    let mut opts = WosOptions::default();
    if let Some(s) = p.shrink {
        if !(s > 0.0 && s <= 1.0) {
            return Err(Error::Config("`shrink` must lie in (0, 1]".into()));
        }
        opts.shrink = s;
    }
    let est = harmonic_measure(&domain, &idx, &x, &TestFunction::bounded(&*phi), p.samples, &RngStream::new(seed, 0), &opts)?;
    let mut t = Table::new(&["value", "std_error", "n", "seed"]);
    t.push(vec![est.value.into(), est.std_error.into(), est.n_samples.into(), seed.into()]);
    Ok(Artifacts { summary: json!({ "estimate": est.value, "std_error": est.std_error, "heavy_tail": est.heavy_tail }), table: Some(t), failed: false })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MartinParams {
    x0: Vec<f64>,
    x: Vec<f64>,
    z: Vec<Vec<f64>>,
    #[serde(default)]
    options: MartinOptions,
}

pub(super) fn martin(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let p: MartinParams = cfg.params()?;
    let domain = cfg.domain()?;
    let n = domain.dim();
    let idx = cfg.index(n)?;
    let x0 = point(&domain, &p.x0, "x0")?;
    let x = point(&domain, &p.x, "x")?;
    let mut header = coord_header("z", n);
    header.extend(["value", "error_bound", "levels"].map(String::from));
    let mut t = Table::new(&header);
    let stream = RngStream::new(seed, 0);
    for (k, zv) in p.z.iter().enumerate() {
        let z = point(&domain, zv, "z")?;
        let e = martin_estimate(&domain, &idx, &x0, &x, &z, &p.options, &stream.substream(k as u64))?;
        let mut row = coord_cells(&z);
        row.extend([e.value.into(), e.error_bound.into(), e.levels.into()]);
        t.push(row);
    }
    Ok(Artifacts { summary: json!({ "rows": t.rows.len(), "options": p.options }), table: Some(t), failed: false })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MeasureSpec {
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CondParams {
    x: Vec<f64>,
    #[serde(default)]
    pole: Option<Vec<f64>>,
    #[serde(default)]
    measure: Option<MeasureSpec>,
    paths: usize,
    #[serde(default = "default_patches")]
    patches: usize,
    #[serde(default)]
    options: PathOptions,
}

fn default_patches() -> usize {
    16
}

pub(super) fn cond(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let p: CondParams = cfg.params()?;
    let domain = cfg.domain()?;
    let n = domain.dim();
    let idx = cfg.index(n)?;
    let b = ball(&domain, "cond")?;
    let x = point(&domain, &p.x, "x")?;
    let (poles, weights) = match (&p.pole, &p.measure) {
        (Some(z), None) => (vec![point(&domain, z, "pole")?], vec![1.0]),
        (None, Some(m)) => {
            if m.points.len() != m.weights.len() || m.points.is_empty() {
                return Err(Error::Config("measure needs one weight per point".into()));
            }
            if m.weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || m.weights.iter().sum::<f64>() <= 0.0 {
                return Err(Error::Config("measure weights must be nonnegative with positive total".into()));
            }
            let pts = m.points.iter().map(|v| point(&domain, v, "measure.points")).collect::<Result<Vec<_>>>()?;
            (pts, m.weights.clone())
        }
        _ => return Err(Error::Config("give exactly one of `pole` and `measure`".into())),
    };
    let hs = poles.iter().map(|z| HFunction::martin_pole(&domain, &idx, z)).collect::<Result<Vec<_>>>()?;
    let mut pole_w = Vec::with_capacity(poles.len());
    for (z, m) in poles.iter().zip(&weights) {
        pole_w.push(m * martin_ball(&idx, &b, &x, z)?);
    }
    let total: f64 = pole_w.iter().sum();
    let patches = domain.boundary_mesh(p.patches)?;
    let mut analytic = vec![0.0; patches.len()];
    for (z, w) in poles.iter().zip(&pole_w) {
        analytic[patches.nearest(z)] += w / total;
    }
    let paths = mc_collect(p.paths, &RngStream::new(seed, 0), |rng| {
        let mut u = rng.random::<f64>() * total;
        let mut j = 0;
        while j + 1 < pole_w.len() && u >= pole_w[j] {
            u -= pole_w[j];
            j += 1;
        }
        Ok((j, simulate_conditioned_path(&hs[j], &x, &p.options, rng)?))
    })?;
    let mut header = coord_header("terminal", n);
    header.extend(["pole", "steps", "reached"].map(String::from));
    let mut t = Table::new(&header);
    let mut counts = vec![0usize; patches.len()];
    let (mut reached, mut steps, mut confinement) = (0usize, 0usize, 0usize);
    for (j, path) in &paths {
        let ok = path.stopped_reason == StopReason::ReachedPole;
        reached += ok as usize;
        steps += path.steps;
        counts[patches.nearest(&path.terminal)] += 1;
        confinement += path.points.iter().filter(|q| domain.dist_to_boundary(q) <= 0.0).count();
        let mut row = coord_cells(&path.terminal);
        row.extend([(*j).into(), path.steps.into(), (ok as usize).into()]);
        t.push(row);
    }
    let (chi2, p_value, stray) = chi_square_test(&counts, &analytic);
    let summary = json!({
        "paths": p.paths,
        "success_rate": reached as f64 / p.paths.max(1) as f64,
        "mean_steps": steps as f64 / p.paths.max(1) as f64,
        "confinement_violations": confinement,
        "histogram": { "patches": patches.nodes, "counts": counts, "analytic": analytic,
                       "chi_square": chi2, "p_value": p_value, "stray": stray },
    });
    Ok(Artifacts { summary, table: Some(t), failed: false })
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
enum QSpec {
    Constant { c: f64 },
    RadialPower { center: Vec<f64>, c: f64, beta: f64 },
    /// Values at the interior mesh nodes, in mesh order.
    Mesh { values: Vec<f64> },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ConditionalSpec {
    x: Vec<Vec<f64>>,
    z: Vec<Vec<f64>>,
    #[serde(default)]
    rule: Option<PsiRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GaugeParams {
    q: QSpec,
    resolution: usize,
    #[serde(default = "default_tol")]
    tol: f64,
    /// When false a non-gaugeable pair is reported instead of failing.
    #[serde(default = "default_true")]
    values: bool,
    #[serde(default)]
    conditional: Option<ConditionalSpec>,
    #[serde(default)]
    mc_samples: Option<usize>,
}

fn default_tol() -> f64 {
    1e-10
}

fn default_true() -> bool {
    true
}

fn potential(spec: &QSpec, domain: &Domain, op: &MeshGreenOperator) -> Result<Potential> {
    Ok(match spec {
        QSpec::Constant { c } => Potential::constant(*c),
        QSpec::RadialPower { center, c, beta } => Potential::radial_power(point(domain, center, "q.center")?, *c, *beta),
        QSpec::Mesh { values } => {
            if values.len() != op.len() {
                return Err(Error::Config(format!("{} potential values for {} mesh nodes", values.len(), op.len())));
            }
            let nodes = op.mesh.nodes.clone();
            let vals = values.clone();
            let mesh = BoundaryMesh { patch_areas: vec![1.0; nodes.len()], nodes };
            Potential::new(move |y: &Point| vals[mesh.nearest(y)])
        }
    })
}

pub(super) fn gauge(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let p: GaugeParams = cfg.params()?;
    let domain = cfg.domain()?;
    let n = domain.dim();
    let idx = cfg.index(n)?;
    let mut oo = OperatorOptions::new(p.resolution);
    oo.seed = seed;
    if let Some(m) = p.mc_samples {
        oo.mc_samples = m;
    }
    let op = green_operator(&domain, &idx, &oo)?;
    let q = potential(&p.q, &domain, &op)?;
    let g = solve_gauge(&idx, &q, &op, p.tol)?;
    if p.values && g.values.is_none() {
        return Err(Error::NotGaugeable { spectral_radius: g.spectral_radius_estimate });
    }
    let mut table = None;
    if let Some(c) = &p.conditional {
        if g.values.is_none() {
            return Err(Error::NotGaugeable { spectral_radius: g.spectral_radius_estimate });
        }
        let src = source(&domain, &idx, seed);
        let mut header = coord_header("x", n);
        header.extend(coord_header("z", n));
        header.push("value".into());
        let mut t = Table::new(&header);
        let rule = c.rule.unwrap_or_default();
        let xs = c.x.iter().map(|v| point(&domain, v, "conditional.x")).collect::<Result<Vec<_>>>()?;
        for zv in &c.z {
            let z = point(&domain, zv, "conditional.z")?;
            let vals = conditional_gauges(&domain, &idx, &q, &op, &xs, &z, src.as_ref(), rule)?;
            for (x, v) in xs.iter().zip(vals) {
                let mut row = coord_cells(x);
                row.extend(coord_cells(&z));
                row.push(v.into());
                t.push(row);
            }
        }
        table = Some(t);
    }
    let summary = json!({
        "gaugeable": g.gaugeable,
        "marginal": g.marginal,
        "spectral_radius": g.spectral_radius_estimate,
        "series_terms_used": g.series_terms_used,
        "residual": g.residual,
        "nodes": op.mesh.nodes,
        "g": g.values,
    });
    Ok(Artifacts { summary, table, failed: false })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Atom {
    at: Vec<f64>,
    mass: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct Recipe {
    #[serde(default = "default_exterior")]
    exterior: Phi,
    #[serde(default)]
    martin_atoms: Vec<Atom>,
    #[serde(default)]
    green_atoms: Vec<Atom>,
}

fn default_exterior() -> Phi {
    Phi::Builtin("zero".into())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RepresentParams {
    f: Recipe,
    boundary_resolution: usize,
    #[serde(default)]
    probes: Option<usize>,
    #[serde(default)]
    allow_interior_charge: bool,
    #[serde(default)]
    interior_resolution: Option<usize>,
    #[serde(default)]
    extension: Option<ExtensionMethod>,
}

pub(super) fn represent(cfg: &RunConfig, seed: u64) -> Result<Artifacts> {
    let p: RepresentParams = cfg.params()?;
    let domain = cfg.domain()?;
    let n = domain.dim();
    let idx = cfg.index(n)?;
    let b = ball(&domain, "represent with a synthetic recipe")?;
    let src = BallKernels::new(idx.clone(), b.clone());
    let ext = p.f.exterior.build(&domain)?;
    let mut opts = DecomposeOptions { allow_interior_charge: p.allow_interior_charge, ..Default::default() };
    if let Some(r) = p.interior_resolution {
        opts.interior_resolution = r;
    }
    if let Some(e) = p.extension {
        opts.extension = e;
    }
    let stream = RngStream::new(seed, 0);
    let matoms = p.f.martin_atoms.iter().map(|a| Ok((point(&domain, &a.at, "martin_atoms.at")?, a.mass))).collect::<Result<Vec<_>>>()?;
    let gatoms = p.f.green_atoms.iter().map(|a| Ok((point(&domain, &a.at, "green_atoms.at")?, a.mass))).collect::<Result<Vec<_>>>()?;
    let ext_fn = TestFunction::bounded(&*ext);
    let f = |x: &Point| -> f64 {
        if domain.dist_to_boundary(x) <= 0.0 {
            return ext(x);
        }
        let mut v = harmonic_extension(&domain, &idx, &ext_fn, x, ExtensionMethod::BallQuadrature, &stream)
            .map(|e| e.value)
            .unwrap_or(f64::NAN);
        for (z, a) in &matoms {
            v += a * src.martin(x, z).unwrap_or(f64::NAN);
        }
        for (y, a) in &gatoms {
            v += a * src.green(x, y).unwrap_or(f64::NAN);
        }
        v
    };
    let mesh = domain.boundary_mesh(p.boundary_resolution)?;
    let probes = probe_points(&domain, p.probes.unwrap_or(3 * mesh.len()))?;
    let d = decompose(&domain, &idx, &TestFunction::bounded(f), &probes, &mesh, &src, &opts, &stream)?;
    let mut header = coord_header("node", n);
    header.extend(["kind", "weight"].map(String::from));
    let mut t = Table::new(&header);
    for (z, w) in d.martin_measure.mesh.nodes.iter().zip(&d.martin_measure.weights) {
        let mut row = coord_cells(z);
        row.extend([Cell::from("mu"), (*w).into()]);
        t.push(row);
    }
    if let Some(c) = &d.interior_charge {
        for (y, w) in c.nodes.iter().zip(&c.weights) {
            let mut row = coord_cells(y);
            row.extend([Cell::from("nu"), (*w).into()]);
            t.push(row);
        }
    }
    let summary = json!({
        "mu": { "nodes": d.martin_measure.mesh.nodes, "weights": d.martin_measure.weights, "total_mass": d.martin_measure.total_mass() },
        "nu": d.interior_charge.as_ref().map(|c| json!({ "nodes": c.nodes, "weights": c.weights, "total_mass": c.total_mass() })),
        "fit_residual": d.fit_residual,
        "probes": d.probes.len(),
        "singular_part": d.singular_part,
        "exterior_part": d.exterior_part,
    });
    Ok(Artifacts { summary, table: Some(t), failed: false })
}
