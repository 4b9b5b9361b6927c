//! Closed-form kernels of the symmetric α-stable process: the Riesz Green
//! function, and the Green, Poisson and Martin kernels of a ball.

use std::f64::consts::PI;

use statrs::function::beta::{beta, beta_reg};
use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::{BallSpec, Domain, Point, StableIndex};
use crate::quad::{self, rules::adaptive, InteriorOptions, Singularity};

/// Normalizing constants determined by (n, α).
#[derive(Clone, Debug, PartialEq)]
pub struct KernelConstants {
    /// 2^{−α} π^{−n/2} Γ((n−α)/2) / Γ(α/2); `None` in the recurrent case n ≤ α.
    pub green_const: Option<f64>,
    /// Γ(n/2) π^{−(n/2+1)} sin(πα/2).
    pub poisson_const: f64,
    /// A(n, α) = α 2^{α−1} Γ((n+α)/2) / (π^{n/2} Γ(1−α/2)), the Lévy density constant.
    pub levy_const: f64,
    /// Γ(n/2) / (2^α π^{n/2} Γ(α/2)²), the prefactor of the ball Green function.
    pub ball_green_const: f64,
}

impl KernelConstants {
    pub fn new(n: usize, alpha: f64) -> Self {
        let nf = n as f64;
        let h = nf / 2.0;
        let green_const = (nf > alpha).then(|| {
            2f64.powf(-alpha) * PI.powf(-h) * gamma((nf - alpha) / 2.0) / gamma(alpha / 2.0)
        });
        let poisson_const = gamma(h) * PI.powf(-(h + 1.0)) * (PI * alpha / 2.0).sin();
        let levy_const =
            alpha * 2f64.powf(alpha - 1.0) * gamma((nf + alpha) / 2.0) / (PI.powf(h) * gamma(1.0 - alpha / 2.0));
        let ga = gamma(alpha / 2.0);
        let ball_green_const = gamma(h) / (2f64.powf(alpha) * PI.powf(h) * ga * ga);
        KernelConstants { green_const, poisson_const, levy_const, ball_green_const }
    }
}

fn check_dims(idx: &StableIndex, pts: &[&Point]) -> Result<()> {
    for p in pts {
        if p.dim() != idx.n() {
            return Err(Error::DimensionMismatch { expected: idx.n(), got: p.dim() });
        }
    }
    Ok(())
}

/// Riesz potential kernel c·|x−y|^{α−n} of the whole-space process.
pub fn green_whole(idx: &StableIndex, x: &Point, y: &Point) -> Result<f64> {
    check_dims(idx, &[x, y])?;
    let c = idx
        .consts()
        .green_const
        .ok_or(Error::Recurrent { n: idx.n(), alpha: idx.alpha() })?;
    Ok(green_whole_unchecked(idx, c, x.dist(y)))
}

#[inline]
pub(crate) fn green_whole_unchecked(idx: &StableIndex, c: f64, r: f64) -> f64 {
    if r == 0.0 {
        f64::INFINITY
    } else {
        c * r.powf(idx.alpha() - idx.n() as f64)
    }
}

/// ∫₀^w s^{α/2−1}(1+s)^{−n/2} ds.
pub(crate) fn bgr_integral(n: usize, alpha: f64, w: f64) -> f64 {
    if w <= 0.0 {
        return 0.0;
    }
    if w.is_infinite() {
        return if (n as f64) > alpha { beta(alpha / 2.0, (n as f64 - alpha) / 2.0) } else { f64::INFINITY };
    }
    let a = alpha / 2.0;
    let b = (n as f64 - alpha) / 2.0;
    if b > 0.0 {
        let t = w / (1.0 + w);
        // Near t = 1 use the complementary tail for accuracy.
        return if t > 0.5 {
            beta(a, b) * (1.0 - beta_reg(b, a, 1.0 / (1.0 + w)))
        } else {
            beta(a, b) * beta_reg(a, b, t)
        };
    }
    // n = 1, α ≥ 1.
    if alpha == 1.0 {
        return 2.0 * w.sqrt().asinh();
    }
    bgr_integral_quadrature(alpha, w)
}

/// The n = 1 integral by quadrature with the substitution s = u^{2/α} on [0, 1]
/// and s = e^t beyond 1.
pub(crate) fn bgr_integral_quadrature(alpha: f64, w: f64) -> f64 {
    let a = alpha / 2.0;
    let upper = w.min(1.0).powf(a);
    let head = adaptive(|u: f64| (1.0 / a) * (1.0 + u.powf(1.0 / a)).powf(-0.5), 0.0, upper, 1e-15, 1e-13).value;
    if w <= 1.0 {
        return head;
    }
    let tail =
        adaptive(|t: f64| (a * t).exp() / (1.0 + t.exp()).sqrt(), 0.0, w.ln(), 1e-15, 1e-13).value;
    head + tail
}

fn check_in_closed_ball(ball: &BallSpec, p: &Point) -> Result<f64> {
    let t = ball.tilde(p).norm();
    if t > 1.0 + 1e-12 {
        return Err(Error::NotInterior(p.clone()));
    }
    Ok(t.min(1.0))
}

/// Ball Green function in the Blumenthal–Getoor–Ray form.
pub fn green_ball(idx: &StableIndex, ball: &BallSpec, x: &Point, y: &Point) -> Result<f64> {
    check_dims(idx, &[x, y, &ball.center])?;
    let tx = check_in_closed_ball(ball, x)?;
    let ty = check_in_closed_ball(ball, y)?;
    Ok(green_ball_unchecked(idx, ball, x, y, tx, ty))
}

pub(crate) fn green_ball_unchecked(idx: &StableIndex, ball: &BallSpec, x: &Point, y: &Point, tx: f64, ty: f64) -> f64 {
    let n = idx.n();
    let alpha = idx.alpha();
    let r = ball.radius;
    let sx = (1.0 - tx) * (1.0 + tx);
    let sy = (1.0 - ty) * (1.0 + ty);
    if sx <= 0.0 || sy <= 0.0 {
        return 0.0;
    }
    let k = idx.consts().ball_green_const;
    let d = x.dist(y) / r;
    let scale = r.powf(alpha - n as f64);
    if d == 0.0 {
        return scale * ball_green_diagonal(n, alpha, k, sx);
    }
    let w = sx * sy / (d * d);
    scale * k * d.powf(alpha - n as f64) * bgr_integral(n, alpha, w)
}

/// Value at x = y for the unit ball: finite only when n = 1 < α.
fn ball_green_diagonal(n: usize, alpha: f64, k: f64, sx: f64) -> f64 {
    if n == 1 && alpha > 1.0 {
        k * 2.0 / (alpha - 1.0) * sx.powf(alpha - 1.0)
    } else {
        f64::INFINITY
    }
}

/// lim_{y→x} [G_B(x,y) − c|x−y|^{α−n}] for n > α: the regular part of the ball Green function.
pub fn green_ball_regular_part(idx: &StableIndex, ball: &BallSpec, x: &Point) -> Result<f64> {
    check_dims(idx, &[x, &ball.center])?;
    if !idx.is_transient() {
        return Err(Error::Recurrent { n: idx.n(), alpha: idx.alpha() });
    }
    let t = check_in_closed_ball(ball, x)?;
    let nf = idx.n() as f64;
    let alpha = idx.alpha();
    let sx = (1.0 - t) * (1.0 + t);
    // B(a,b)·I_t(a,b) = B(a,b) − ∫_t^1 …, and the tail is (2/(n−α)) w^{(α−n)/2}(1 + O(1/w)).
    let k = idx.consts().ball_green_const;
    Ok(-k * (2.0 / (nf - alpha)) * sx.powf(alpha - nf) * ball.radius.powf(alpha - nf))
}

fn ball_exterior_check(ball: &BallSpec, x: &Point, z: &Point) -> Result<(f64, f64)> {
    let tx = ball.tilde(x).norm();
    if !(tx < 1.0) {
        return Err(Error::NotInterior(x.clone()));
    }
    let tz = ball.tilde(z).norm();
    if !(tz > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Poisson kernel needs z strictly outside the closed ball, got {z:?}"
        )));
    }
    Ok((tx, tz))
}

/// Density in z of the exit position from the ball started at x.
pub fn poisson_ball(idx: &StableIndex, ball: &BallSpec, x: &Point, z: &Point) -> Result<f64> {
    check_dims(idx, &[x, z, &ball.center])?;
    let (tx, tz) = ball_exterior_check(ball, x, z)?;
    Ok(poisson_ball_unchecked(idx, ball, x, z, tx, tz))
}

pub(crate) fn poisson_ball_unchecked(idx: &StableIndex, ball: &BallSpec, x: &Point, z: &Point, tx: f64, tz: f64) -> f64 {
    let n = idx.n() as i32;
    let r = ball.radius;
    let num = (1.0 - tx) * (1.0 + tx);
    let den = (tz - 1.0) * (tz + 1.0);
    let d = x.dist(z) / r;
    idx.consts().poisson_const * r.powi(-n) * (num / den).powf(idx.alpha() / 2.0) * d.powi(-n)
}

/// Center-normalized Martin kernel (1−|x̃|²)^{α/2} / |x̃−w̃|ⁿ; equals 1 at the center.
pub fn martin_ball(idx: &StableIndex, ball: &BallSpec, x: &Point, w: &Point) -> Result<f64> {
    check_dims(idx, &[x, w, &ball.center])?;
    let tx = ball.tilde(x).norm();
    if !(tx < 1.0) {
        return Err(Error::NotInterior(x.clone()));
    }
    let tw = ball.tilde(w).norm();
    if (tw - 1.0).abs() > 1e-8 {
        return Err(Error::NotOnBoundary { point: w.clone(), distance: ball.radius * (1.0 - tw) });
    }
    Ok(martin_ball_unchecked(idx, ball, x, w))
}

#[inline]
pub(crate) fn martin_ball_unchecked(idx: &StableIndex, ball: &BallSpec, x: &Point, w: &Point) -> f64 {
    let tx = ball.tilde(x).norm();
    let s = (1.0 - tx) * (1.0 + tx);
    if s <= 0.0 {
        return 0.0;
    }
    let d = x.dist(w) / ball.radius;
    s.powf(idx.alpha() / 2.0) * d.powi(-(idx.n() as i32))
}

/// E_x[τ_B] computed as ∫_B G_B(x, y) dy by singular quadrature.
pub fn mean_exit_time_ball(idx: &StableIndex, ball: &BallSpec, x: &Point) -> Result<f64> {
    check_dims(idx, &[x, &ball.center])?;
    let domain = Domain::ball(ball.center.clone(), ball.radius)?;
    if !domain.contains(x)? {
        return Err(Error::NotInterior(x.clone()));
    }
    let sigma = idx.n() as f64 - idx.alpha();
    let res = quad::integrate_interior(
        &domain,
        |y: &Point| {
            let ty = ball.tilde(y).norm().min(1.0);
            let tx = ball.tilde(x).norm();
            green_ball_unchecked(idx, ball, x, y, tx, ty)
        },
        &[Singularity::new(x.clone(), sigma)],
        &InteriorOptions { rel_tol: 1e-7, ..Default::default() },
    )?;
    Ok(res.value)
}
