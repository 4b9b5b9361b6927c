//! Discretized Green operator G_D on an interior mesh.
//!
//! Balls use the closed-form kernel. Boxes and polytopes use
//! G_D(x_i, x_j) = G(x_i, x_j) − E_{x_i}[G(X_τ, x_j)], one batch of exits per row.
//! Diagonal entries are averages of G_D(x_i, ·) over the ball B(x_i, ρ_i) ∩ D with
//! the same volume as cell i.

use std::io::{Read, Write};
use std::path::PathBuf;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::cone::star_integral;
use super::mesh::InteriorMesh;
use crate::error::{Error, Result};
use crate::geometry::{Domain, Point, StableIndex};
use crate::kernels::{green_ball_unchecked, green_whole_unchecked};
use crate::sampler::{sample_exits, RngStream, WosOptions};

/// Environment variable naming the directory for cached operators.
pub const CACHE_ENV: &str = "STABLEPOT_CACHE_DIR";
const MAGIC: &[u8; 4] = b"SPGO";
const VERSION: u32 = 1;

#[derive(Clone, Debug)]
pub struct OperatorOptions {
    pub resolution: usize,
    /// Exit samples per row for Monte Carlo entries.
    pub mc_samples: usize,
    pub seed: u64,
    /// Radial/angular order of the diagonal cell averages.
    pub diagonal_order: usize,
    pub use_cache: bool,
}

impl OperatorOptions {
    pub fn new(resolution: usize) -> Self {
        OperatorOptions { resolution, mc_samples: 4000, seed: 0, diagonal_order: 8, use_cache: true }
    }
}

#[derive(Clone, Debug)]
pub struct MeshGreenOperator {
    pub mesh: InteriorMesh,
    /// G_D(x_i, x_j), symmetrized for Monte Carlo assemblies.
    pub matrix: DMatrix<f64>,
    /// Standard errors of Monte Carlo entries.
    pub std_errors: Option<DMatrix<f64>>,
    /// Entries whose standard error exceeds 10% of their magnitude.
    pub flagged: Vec<(usize, usize)>,
    /// max |G_ij − G_ji| / max |G| before symmetrization.
    pub symmetry_defect: f64,
}

impl MeshGreenOperator {
    pub fn len(&self) -> usize {
        self.mesh.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mesh.is_empty()
    }

    pub fn weights(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.mesh.weights)
    }

    /// Σ_j G_ij w_j v_j.
    pub fn apply(&self, v: &DVector<f64>) -> DVector<f64> {
        let wv = v.component_mul(&self.weights());
        &self.matrix * wv
    }

    /// Row sums Σ_j G_ij w_j, the mesh approximation of E_{x_i}[τ_D].
    pub fn exit_times(&self) -> DVector<f64> {
        &self.matrix * self.weights()
    }
}

/// Assembles (or loads from cache) the mesh Green operator.
pub fn green_operator(domain: &Domain, idx: &StableIndex, opts: &OperatorOptions) -> Result<MeshGreenOperator> {
    if domain.dim() != idx.n() {
        return Err(Error::DimensionMismatch { expected: idx.n(), got: domain.dim() });
    }
    let key = cache_key(domain, idx, opts);
    let path = if opts.use_cache { cache_path(&key) } else { None };
    if let Some(p) = &path {
        if let Ok(op) = load(p, &key) {
            return Ok(op);
        }
    }
    let mesh = InteriorMesh::new(domain, opts.resolution)?;
    let op = match domain.as_ball() {
        Some(_) => ball_operator(domain, idx, mesh, opts)?,
        None => mc_operator(domain, idx, mesh, opts)?,
    };
    if let Some(p) = &path {
        save(p, &key, &op)?;
    }
    Ok(op)
}

/// Apex exponent used for the diagonal cell averages.
fn diagonal_sigma(idx: &StableIndex) -> f64 {
    let s = idx.n() as f64 - idx.alpha();
    if s > 0.0 {
        s
    } else if s == 0.0 {
        0.5
    } else {
        0.0
    }
}

fn cell_average<F: Fn(&Point) -> f64 + Sync>(
    domain: &Domain,
    idx: &StableIndex,
    x: &Point,
    rho: f64,
    f: &F,
    order: usize,
) -> Result<f64> {
    let sigma = diagonal_sigma(idx);
    let num = star_integral(domain, x, rho, f, sigma, order, 3.0)?;
    let vol = star_integral(domain, x, rho, &|_: &Point| 1.0, 0.0, order, 3.0)?;
    Ok(num / vol)
}

fn ball_operator(domain: &Domain, idx: &StableIndex, mesh: InteriorMesh, opts: &OperatorOptions) -> Result<MeshGreenOperator> {
    let ball = domain.as_ball().expect("ball domain").clone();
    let m = mesh.len();
    let tilde: Vec<f64> = mesh.nodes.iter().map(|p| ball.tilde(p).norm()).collect();
    let rows: Vec<Result<Vec<f64>>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = &mesh.nodes[i];
            let mut row = vec![0.0; m];
            for j in 0..m {
                if j != i {
                    row[j] = green_ball_unchecked(idx, &ball, xi, &mesh.nodes[j], tilde[i], tilde[j]);
                }
            }
            let f = |y: &Point| {
                let ty = ball.tilde(y).norm().min(1.0);
                green_ball_unchecked(idx, &ball, xi, y, tilde[i], ty)
            };
            row[i] = cell_average(domain, idx, xi, mesh.cell_radius(i), &f, opts.diagonal_order)?;
            Ok(row)
        })
        .collect();
    let mut matrix = DMatrix::zeros(m, m);
    for (i, row) in rows.into_iter().enumerate() {
        for (j, v) in row?.into_iter().enumerate() {
            matrix[(i, j)] = v;
        }
    }
    // Closed-form entries are symmetric up to round-off; enforce it exactly.
    let defect = symmetrize(&mut matrix);
    Ok(MeshGreenOperator { mesh, matrix, std_errors: None, flagged: Vec::new(), symmetry_defect: defect })
}

fn symmetrize(a: &mut DMatrix<f64>) -> f64 {
    let m = a.nrows();
    let max = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let mut defect: f64 = 0.0;
    for i in 0..m {
        for j in i + 1..m {
            let (u, v) = (a[(i, j)], a[(j, i)]);
            defect = defect.max((u - v).abs());
            let s = 0.5 * (u + v);
            a[(i, j)] = s;
            a[(j, i)] = s;
        }
    }
    if max > 0.0 {
        defect / max
    } else {
        0.0
    }
}

fn mc_operator(domain: &Domain, idx: &StableIndex, mesh: InteriorMesh, opts: &OperatorOptions) -> Result<MeshGreenOperator> {
    let c = idx.consts().green_const.ok_or(Error::Recurrent { n: idx.n(), alpha: idx.alpha() })?;
    let m = mesh.len();
    let wos = WosOptions::default();
    let ns = opts.mc_samples.max(2);
    type Row = (Vec<f64>, Vec<f64>);
    let rows: Vec<Result<Row>> = (0..m)
        .into_par_iter()
        .map(|i| {
            let xi = &mesh.nodes[i];
            let stream = RngStream::new(opts.seed, i as u64);
            let exits = sample_exits(domain, idx, xi, ns, &stream, &wos)?;
            let mut row = vec![0.0; m];
            let mut se = vec![0.0; m];
            for j in 0..m {
                let xj = &mesh.nodes[j];
                let (mut mean, mut m2) = (0.0, 0.0);
                for (k, e) in exits.iter().enumerate() {
                    let v = green_whole_unchecked(idx, c, e.dist(xj));
                    let d = v - mean;
                    mean += d / (k + 1) as f64;
                    m2 += d * (v - mean);
                }
                let var = m2 / (ns - 1) as f64;
                se[j] = (var / ns as f64).sqrt();
                let head = if j == i {
                    let f = |y: &Point| green_whole_unchecked(idx, c, y.dist(xi));
                    cell_average(domain, idx, xi, mesh.cell_radius(i), &f, opts.diagonal_order)?
                } else {
                    green_whole_unchecked(idx, c, xi.dist(xj))
                };
                row[j] = head - mean;
            }
            Ok((row, se))
        })
        .collect();
    let mut matrix = DMatrix::zeros(m, m);
    let mut errs = DMatrix::zeros(m, m);
    for (i, r) in rows.into_iter().enumerate() {
        let (row, se) = r?;
        for j in 0..m {
            matrix[(i, j)] = row[j];
            errs[(i, j)] = se[j];
        }
    }
    let mut flagged = Vec::new();
    for i in 0..m {
        for j in 0..m {
            if errs[(i, j)] > 0.1 * matrix[(i, j)].abs() {
                flagged.push((i, j));
            }
        }
    }
    let defect = symmetrize(&mut matrix);
    // Small negative values are Monte Carlo noise around a nonnegative kernel.
    matrix.iter_mut().for_each(|v| *v = v.max(0.0));
    Ok(MeshGreenOperator { mesh, matrix, std_errors: Some(errs), flagged, symmetry_defect: defect })
}

fn cache_key(domain: &Domain, idx: &StableIndex, opts: &OperatorOptions) -> String {
    let mut h = Sha256::new();
    h.update(serde_json::to_string(domain.spec()).unwrap_or_default().as_bytes());
    h.update(idx.n().to_le_bytes());
    h.update(idx.alpha().to_bits().to_le_bytes());
    h.update(opts.resolution.to_le_bytes());
    h.update(opts.diagonal_order.to_le_bytes());
    if domain.as_ball().is_none() {
        h.update(opts.mc_samples.to_le_bytes());
        h.update(opts.seed.to_le_bytes());
    }
    h.update(VERSION.to_le_bytes());
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

fn cache_path(key: &str) -> Option<PathBuf> {
    let dir = std::env::var_os(CACHE_ENV)?;
    Some(PathBuf::from(dir).join(format!("{key}.spgo")))
}

fn write_f64s(out: &mut Vec<u8>, xs: impl Iterator<Item = f64>) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn save(path: &PathBuf, key: &str, op: &MeshGreenOperator) -> Result<()> {
    let m = op.len();
    let n = op.mesh.dim();
    let mut buf = Vec::with_capacity(16 + 8 * m * (m + n + 1));
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    buf.extend_from_slice(key.as_bytes());
    buf.extend_from_slice(&(m as u64).to_le_bytes());
    buf.extend_from_slice(&(n as u64).to_le_bytes());
    buf.push(op.std_errors.is_some() as u8);
    write_f64s(&mut buf, op.mesh.nodes.iter().flat_map(|p| p.coords().to_vec()));
    write_f64s(&mut buf, op.mesh.weights.iter().copied());
    write_f64s(&mut buf, op.matrix.iter().copied());
    if let Some(e) = &op.std_errors {
        write_f64s(&mut buf, e.iter().copied());
    }
    write_f64s(&mut buf, std::iter::once(op.symmetry_defect));
    let dir = path.parent().ok_or_else(|| Error::Cache("cache path has no parent".into()))?;
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(&buf)?;
    tmp.persist(path).map_err(|e| Error::Cache(e.to_string()))?;
    Ok(())
}

fn load(path: &PathBuf, key: &str) -> Result<MeshGreenOperator> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || Error::Cache(format!("corrupt cache file {}", path.display()));
    let mut pos = 0usize;
    let mut take = |len: usize| -> Result<&[u8]> {
        let s = bytes.get(pos..pos + len).ok_or_else(bad)?;
        pos += len;
        Ok(s)
    };
    if take(4)? != MAGIC {
        return Err(bad());
    }
    if u32::from_le_bytes(take(4)?.try_into().unwrap()) != VERSION {
        return Err(Error::Cache("cache version mismatch".into()));
    }
    if take(key.len())? != key.as_bytes() {
        return Err(Error::Cache("cache key mismatch".into()));
    }
    let m = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let n = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
    let has_err = take(1)?[0] == 1;
    let mut floats = |count: usize| -> Result<Vec<f64>> {
        let raw = take(8 * count)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
    };
    let coords = floats(m * n)?;
    let weights = floats(m)?;
    let matrix = DMatrix::from_vec(m, m, floats(m * m)?);
    let std_errors = if has_err { Some(DMatrix::from_vec(m, m, floats(m * m)?)) } else { None };
    let symmetry_defect = floats(1)?[0];
    let nodes = coords.chunks_exact(n).map(Point::new).collect();
    let mut flagged = Vec::new();
    if let Some(e) = &std_errors {
        for i in 0..m {
            for j in 0..m {
                if e[(i, j)] > 0.1 * matrix[(i, j)].abs() {
                    flagged.push((i, j));
                }
            }
        }
    }
    Ok(MeshGreenOperator { mesh: InteriorMesh { nodes, weights }, matrix, std_errors, flagged, symmetry_defect })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{green_ball, mean_exit_time_ball};

    fn no_cache(res: usize) -> OperatorOptions {
        OperatorOptions { use_cache: false, ..OperatorOptions::new(res) }
    }

    #[test]
    fn ball_entries_are_closed_form() {
        let idx = StableIndex::new(2, 1.0).unwrap();
        let d = Domain::unit_ball(2);
        let op = green_operator(&d, &idx, &no_cache(5)).unwrap();
        let b = d.as_ball().unwrap();
        for (i, j) in [(1, 7), (3, 20), (10, 2)] {
            let want = green_ball(&idx, b, &op.mesh.nodes[i], &op.mesh.nodes[j]).unwrap();
            assert!((op.matrix[(i, j)] - want).abs() < 1e-14 * want);
        }
        assert!(op.matrix.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn row_sums_approximate_exit_times() {
        let idx = StableIndex::new(2, 1.0).unwrap();
        let d = Domain::unit_ball(2);
        let op = green_operator(&d, &idx, &no_cache(12)).unwrap();
        let et = op.exit_times();
        let b = d.as_ball().unwrap();
        for &i in &[0usize, 40, 120] {
            let want = mean_exit_time_ball(&idx, b, &op.mesh.nodes[i]).unwrap();
            assert!((et[i] / want - 1.0).abs() < 0.03, "node {i}: {} vs {want}", et[i]);
        }
    }

    #[test]
    fn mc_operator_on_square_is_nearly_symmetric() {
        let idx = StableIndex::new(2, 1.0).unwrap();
        let d = Domain::unit_cube(2);
        let opts = OperatorOptions { mc_samples: 3000, seed: 7, ..no_cache(3) };
        let op = green_operator(&d, &idx, &opts).unwrap();
        assert!(op.symmetry_defect < 0.02, "{}", op.symmetry_defect);
        assert!(op.matrix.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn cache_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let idx = StableIndex::new(2, 1.5).unwrap();
        let d = Domain::unit_ball(2);
        let op = green_operator(&d, &idx, &no_cache(4)).unwrap();
        let key = cache_key(&d, &idx, &no_cache(4));
        let path = dir.path().join("op.spgo");
        save(&path, &key, &op).unwrap();
        let back = load(&path, &key).unwrap();
        assert_eq!(back.matrix, op.matrix);
        assert_eq!(back.mesh.weights, op.mesh.weights);
        assert!(load(&path, "other").is_err());
    }
}
