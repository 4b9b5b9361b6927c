//! Lawson–Hanson active-set nonnegative least squares.

use nalgebra::{DMatrix, DVector};

/// argmin ‖A x − b‖ subject to x ≥ 0.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs())) * b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = 1e-12 * scale.max(f64::MIN_POSITIVE) * (a.nrows().max(n) as f64);
    for _ in 0..3 * n + 10 {
        let w = a.tr_mul(&(b - a * &x));
        let next = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = next else { break };
        passive[j] = true;
        for _ in 0..3 * n + 10 {
            let cols: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
            let z = solve_subset(a, b, &cols);
            if cols.iter().zip(z.iter()).all(|(_, v)| *v > 0.0) {
                for (k, &c) in cols.iter().enumerate() {
                    x[c] = z[k];
                }
                break;
            }
            let mut step = f64::INFINITY;
            for (k, &c) in cols.iter().enumerate() {
                if z[k] <= 0.0 {
                    let t = x[c] / (x[c] - z[k]);
                    step = step.min(t);
                }
            }
            for (k, &c) in cols.iter().enumerate() {
                x[c] += step * (z[k] - x[c]);
                if x[c] <= 1e-15 * (1.0 + z[k].abs()) {
                    x[c] = 0.0;
                    passive[c] = false;
                }
            }
            if !passive.iter().any(|p| *p) {
                break;
            }
        }
    }
    x
}

fn solve_subset(a: &DMatrix<f64>, b: &DVector<f64>, cols: &[usize]) -> DVector<f64> {
    let sub = a.select_columns(cols);
    let svd = sub.svd(true, true);
    let eps = 1e-14 * svd.singular_values.max();
    svd.solve(b, eps).unwrap_or_else(|_| DVector::zeros(cols.len()))
}
