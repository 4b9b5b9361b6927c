//! One-dimensional rules: Gauss–Legendre (cached), Gauss–Jacobi via Golub–Welsch,
//! and global adaptive Gauss–Kronrod (7/15).

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use once_cell::sync::Lazy;

/// Nodes and weights of a rule on a reference interval.
#[derive(Clone, Debug)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// Applies the rule, mapped affinely from [−1, 1] to [a, b].
    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        let h = 0.5 * (b - a);
        let m = 0.5 * (a + b);
        self.nodes.iter().zip(&self.weights).map(|(x, w)| w * f(m + h * x)).sum::<f64>() * h
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

static GL_CACHE: Lazy<Mutex<HashMap<usize, Arc<Rule>>>> = Lazy::new(|| Mutex::new(HashMap::new()));

/// Gauss–Legendre rule with `m` points on [−1, 1].
pub fn gauss_legendre(m: usize) -> Arc<Rule> {
    assert!(m >= 1);
    if let Some(r) = GL_CACHE.lock().unwrap().get(&m) {
        return r.clone();
    }
    let rule = Arc::new(compute_gauss_legendre(m));
    GL_CACHE.lock().unwrap().insert(m, rule.clone());
    rule
}

fn compute_gauss_legendre(m: usize) -> Rule {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    let mf = m as f64;
    for i in 0..m.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (mf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let p = if m == 1 { x } else { p1 };
            let pm1 = if m == 1 { 1.0 } else { p0 };
            dp = mf * (x * p - pm1) / (x * x - 1.0);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        if m == 1 {
            dp = 1.0;
            x = 0.0;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[m - 1 - i] = x;
        weights[i] = w;
        weights[m - 1 - i] = w;
    }
    if m == 1 {
        weights[0] = 2.0;
    }
    Rule { nodes, weights }
}

/// Gauss rule on [0, 1] for the weight `t^{a−1}(1−t)^{b−1}`, a, b > 0.
/// The weights sum to B(a, b).
pub fn gauss_jacobi01(m: usize, a: f64, b: f64) -> Rule {
    assert!(m >= 1 && a > 0.0 && b > 0.0);
    // Jacobi weight (1−x)^A (1+x)^B on [−1, 1] with t = (1+x)/2.
    let (ja, jb) = (b - 1.0, a - 1.0);
    let s = ja + jb;
    let mut t = DMatrix::<f64>::zeros(m, m);
    for k in 0..m {
        let kf = k as f64;
        t[(k, k)] = if k == 0 {
            (jb - ja) / (s + 2.0)
        } else {
            (jb * jb - ja * ja) / ((2.0 * kf + s) * (2.0 * kf + s + 2.0))
        };
        if k + 1 < m {
            let j = kf + 1.0;
            let num = 4.0 * j * (j + ja) * (j + jb) * (j + s);
            let c = 2.0 * j + s;
            let off2 = if k == 0 {
                4.0 * (1.0 + ja) * (1.0 + jb) / ((2.0 + s) * (2.0 + s) * (3.0 + s))
            } else {
                num / (c * c * (c + 1.0) * (c - 1.0))
            };
            let off = off2.sqrt();
            t[(k, k + 1)] = off;
            t[(k + 1, k)] = off;
        }
    }
    let eig = SymmetricEigen::new(t);
    let total = statrs::function::beta::beta(a, b);
    let mut pairs: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (0.5 * (1.0 + eig.eigenvalues[i]), total * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Rule { nodes: pairs.iter().map(|p| p.0).collect(), weights: pairs.iter().map(|p| p.1).collect() }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_0,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

/// Result of an adaptive one-dimensional integration.
#[derive(Clone, Copy, Debug)]
pub struct Adaptive {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
}

/// Global adaptive Gauss–Kronrod on [a, b]: bisects the panel with the largest
/// error estimate until the total estimate meets `max(abs_tol, rel_tol·|I|)`.
pub fn adaptive<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Adaptive {
    if a == b {
        return Adaptive { value: 0.0, error: 0.0, converged: true };
    }
    let mut panels = vec![{
        let (v, e) = gk15(&mut f, a, b);
        (a, b, v, e)
    }];
    for _ in 0..2000 {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let error: f64 = panels.iter().map(|p| p.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) {
            return Adaptive { value, error, converged: true };
        }
        let (i, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, _) = panels.swap_remove(i);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let (v1, e1) = gk15(&mut f, lo, mid);
        let (v2, e2) = gk15(&mut f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    let value: f64 = panels.iter().map(|p| p.2).sum();
    let error: f64 = panels.iter().map(|p| p.3).sum();
    Adaptive { value, error, converged: error <= abs_tol.max(rel_tol * value.abs()) }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_is_exact_for_polynomials() {
        for m in 1..12 {
            let r = gauss_legendre(m);
            assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-13);
            for deg in 0..2 * m {
                let got = r.integrate(0.0, 1.0, |x| x.powi(deg as i32));
                assert!((got - 1.0 / (deg as f64 + 1.0)).abs() < 1e-13, "m={m} deg={deg}");
            }
        }
    }

    #[test]
    fn gauss_legendre_high_order() {
        let r = gauss_legendre(64);
        let got = r.integrate(0.0, std::f64::consts::PI, f64::sin);
        assert!((got - 2.0).abs() < 1e-14);
    }

    #[test]
    fn gauss_jacobi_moments() {
        for &(a, b) in &[(0.25, 0.75), (0.5, 0.5), (0.75, 0.25), (1.0, 1.0), (0.3, 2.5), (2.0, 0.6)] {
            let r = gauss_jacobi01(10, a, b);
            for k in 0..12 {
                let got: f64 = r.nodes.iter().zip(&r.weights).map(|(t, w)| w * t.powi(k)).sum();
                let want = statrs::function::beta::beta(a + k as f64, b);
                assert!((got - want).abs() < 1e-12 * want.max(1.0), "a={a} b={b} k={k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn adaptive_handles_endpoint_singularity() {
        let r = adaptive(|x: f64| x.powf(-0.5), 0.0, 1.0, 1e-10, 1e-12);
        assert!((r.value - 2.0).abs() < 1e-8, "{:?}", r);
        let r = adaptive(|x: f64| x.exp(), 0.0, 1.0, 1e-14, 1e-14);
        assert!(r.converged && (r.value - (1f64.exp() - 1.0)).abs() < 1e-14);
    }
}
