//! Scalar proximal kernels.
//!
//! The two nontrivial pieces are an overflow-safe Lambert W evaluation working
//! on the exponent of its argument, and a Newton solve for the proximal
//! operator of logsumexp in dimension 2. Both stay in the log domain wherever
//! the direct formulation would overflow or underflow in double precision.
//! The remaining per-pixel proxes reduce to these or to closed forms.
//!
//! All kernels are pure and constant-memory; callers map them over pixel
//! arrays in parallel freely.

use crate::error::{Error, Result};

/// Iteration count and final residual of a Newton/Halley solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProxStats {
    pub iterations: u32,
    pub residual: f64,
}

/// Hard cap on Newton/Halley iterations; exceeding it is a numerical error.
const ITER_CAP: u32 = 100;

/// Step tolerance of the logsumexp prox Newton loop.
const STEP_EPS: f64 = 1e-16;

/// ln(1e-16); saturation threshold of the logsumexp prox.
const LOG_EPS: f64 = -36.841_361_487_904_734;

/// W(exp(0.12)), the root at the branch point between the Halley and Newton
/// regimes of [`lambert_w_exp`].
const W_AT_BRANCH: f64 = 0.611_629_147_796_003;

/// Solve `w * exp(w) = exp(z)` for w > 0, i.e. evaluate W(e^z) without ever
/// forming e^z when it would overflow.
///
/// For z > 0.12 the root of `log(w) + w = z` is found by Newton's method
/// started from the asymptotic guess `z - log(z)` (for z >= 1; a secant of
/// the root curve covers the short stretch below, where the asymptotic guess
/// is poor). For z <= 0.12 the equation `w e^w = e^z` is solved by Halley's
/// method from the branch-point approximation `sqrt(5.43 e^z + 2) - 1`.
///
/// The residual satisfies `|log w + w - z| <= 1e-12 max(1, |z|)` on the large
/// branch and `|w e^w - e^z| <= 1e-12 e^z` on the small branch.
pub fn lambert_w_exp(z: f64) -> Result<(f64, ProxStats)> {
    if !z.is_finite() {
        return Err(Error::validation(format!("lambert_w_exp needs finite z, got {z}")));
    }
    if z > 0.12 {
        let mut w = if z >= 1.0 {
            z - z.ln()
        } else {
            W_AT_BRANCH + (z - 0.12) * (1.0 - W_AT_BRANCH) / 0.88
        };
        let tol = (4.0 * f64::EPSILON * w.max(1.0)).max(1e-13 * z.max(1.0));
        let mut it = 0u32;
        loop {
            let d = (w.ln() + w - z) / (1.0 / w + 1.0);
            if d.abs() <= tol {
                break;
            }
            let wn = w - d;
            if wn == w {
                break;
            }
            w = wn;
            it += 1;
            if it >= ITER_CAP {
                return Err(Error::numerical(format!(
                    "lambert_w_exp Newton did not converge for z = {z}"
                )));
            }
        }
        let residual = (w.ln() + w - z).abs();
        Ok((w, ProxStats { iterations: it, residual }))
    } else {
        let t = z.exp();
        if t == 0.0 {
            return Ok((0.0, ProxStats { iterations: 0, residual: 0.0 }));
        }
        let mut w = (5.43 * t + 2.0).sqrt() - 1.0;
        let mut it = 0u32;
        loop {
            let ew = w.exp();
            let f = w * ew - t;
            let denom = ew * (w + 1.0) - (w + 2.0) * f / (2.0 * w + 2.0);
            let d = f / denom;
            if d.abs() <= 2.5e-13 * w.abs() {
                break;
            }
            let wn = w - d;
            if wn == w {
                break;
            }
            w = wn;
            it += 1;
            if it >= ITER_CAP {
                return Err(Error::numerical(format!(
                    "lambert_w_exp Halley did not converge for z = {z}"
                )));
            }
        }
        let residual = (w * w.exp() - t).abs();
        Ok((w, ProxStats { iterations: it, residual }))
    }
}

/// Proximal operator of `a * lse` at (y1, y2), where
/// `lse(x1, x2) = log(e^{x1} + e^{x2})`.
///
/// Reduces to the scalar root of
/// `f(l) = y2 - y1 - a + 2 a l - log(1 - l) + log(l)` on the branch
/// y1 >= y2 (the other branch is handled by symmetry), solved by Newton from
/// `l0 = 1/(1 + exp(y2 - y1)) - 1e-16`. When `y2 - y1 + a < log(1e-16)` the
/// root equals 1 to machine precision and the limit point
/// `(y1 - a, y2)` is returned directly.
pub fn prox_lse2(y1: f64, y2: f64, a: f64) -> Result<(f64, f64, ProxStats)> {
    if !(y1.is_finite() && y2.is_finite()) {
        return Err(Error::validation("prox_lse2 needs finite y".to_string()));
    }
    if !a.is_finite() || a < 0.0 {
        return Err(Error::validation(format!("prox_lse2 needs a >= 0, got {a}")));
    }
    if a == 0.0 {
        return Ok((y1, y2, ProxStats { iterations: 0, residual: 0.0 }));
    }
    if y1 == y2 {
        // symmetry pins the root at 1/2 exactly
        let x = y1 - 0.5 * a;
        return Ok((x, x, ProxStats { iterations: 0, residual: 0.0 }));
    }
    let swapped = y2 > y1;
    let (hi, lo) = if swapped { (y2, y1) } else { (y1, y2) };
    let dyy = lo - hi;
    let (lam, stats) = if dyy + a < LOG_EPS {
        (1.0, ProxStats { iterations: 0, residual: 0.0 })
    } else {
        // |d| cannot drop below the rounding noise of f / f'; the terms of f
        // are bounded by |dyy|, 2a and |logit| <= 37, so widen the paper's
        // step threshold to that floor.
        let noise = dyy.abs().max(2.0 * a).max(37.0);
        let mut lam = 1.0 / (1.0 + dyy.exp()) - 1e-16;
        let mut it = 0u32;
        let mut step;
        loop {
            let f = dyy - a + 2.0 * a * lam + (lam / (1.0 - lam)).ln();
            let fp = 2.0 * a + 1.0 / (lam * (1.0 - lam));
            let d = f / fp;
            step = d.abs();
            if step <= STEP_EPS.max(2.0 * f64::EPSILON * noise / fp) {
                break;
            }
            let mut ln = lam - d;
            if ln <= 0.0 || ln >= 1.0 {
                ln = ln.clamp(f64::MIN_POSITIVE, 1.0 - 0.5 * f64::EPSILON);
            }
            if ln == lam {
                break;
            }
            lam = ln;
            it += 1;
            if it >= ITER_CAP {
                return Err(Error::numerical(format!(
                    "prox_lse2 Newton did not converge for y1={y1}, y2={y2}, a={a}"
                )));
            }
        }
        (lam, ProxStats { iterations: it, residual: step })
    };
    let x_hi = hi - a * lam;
    let x_lo = lo - a * (1.0 - lam);
    let (x1, x2) = if swapped { (x_lo, x_hi) } else { (x_hi, x_lo) };
    Ok((x1, x2, stats))
}

/// Per-pixel prox of the warm-start data term: the minimizer of
/// `gamma * sum_j u_j [x_j/c1 + lse(-x1/c1, -x2/c1)-share] + 1/2 ||x - z||^2`.
///
/// For c1 = 1 this is `-prox_{a lse}(gamma u1 - z1, gamma u2 - z2)` with
/// `a = gamma (u1 + u2)`; general c1 goes through the exact scaling identity
/// `prox_{g(./c)}(z) = c prox_{g/c^2}(z/c)`.
pub fn prox_g1_pixel(
    z1: f64,
    z2: f64,
    u1: f64,
    u2: f64,
    gamma: f64,
    c1: f64,
) -> Result<(f64, f64)> {
    check_weight(u1, "u1")?;
    check_weight(u2, "u2")?;
    check_positive(gamma, "gamma")?;
    check_positive(c1, "c1")?;
    let ge = gamma / (c1 * c1);
    let a = ge * (u1 + u2);
    let y1 = ge * u1 - z1 / c1;
    let y2 = ge * u2 - z2 / c1;
    let (p1, p2, _) = prox_lse2(y1, y2, a)?;
    Ok((-c1 * p1, -c1 * p2))
}

/// Per-pixel prox of the attenuation data term: the minimizer of
/// `gamma [u z/c1 + beta exp(-z/c1)] + 1/2 (z - z0)^2`.
///
/// With c1 = 1 the solution is `a + W(beta gamma e^{-a})`, `a = z0 - gamma u`;
/// the Lambert argument is passed in the log domain
/// (`log(gamma beta) - a`), never exponentiated first, so the evaluation
/// survives arbitrarily negative `a`. `beta = 0` short-circuits to `z = a`.
pub fn prox_h1_pixel(z0: f64, u: f64, beta: f64, gamma: f64, c1: f64) -> Result<f64> {
    check_weight(u, "u")?;
    check_weight(beta, "beta")?;
    check_positive(gamma, "gamma")?;
    check_positive(c1, "c1")?;
    if !z0.is_finite() {
        return Err(Error::validation("prox_h1_pixel needs finite z0".to_string()));
    }
    let ge = gamma / (c1 * c1);
    let w0 = z0 / c1;
    let a = w0 - ge * u;
    if beta == 0.0 {
        return Ok(c1 * a);
    }
    let (w, _) = lambert_w_exp((ge * beta).ln() - a)?;
    Ok(c1 * (a + w))
}

/// Per-pixel prox of the density data term: the nonnegative minimizer of
/// `1/2 (z - z0)^2 + gamma [a z / c1 - u log(z / c1)]`.
///
/// The positive root of the optimality quadratic, evaluated without
/// cancellation; `u = 0` reduces to `max(z0 - gamma a / c1, 0)`.
pub fn prox_j1_pixel(z0: f64, a: f64, u: f64, gamma: f64, c1: f64) -> Result<f64> {
    check_weight(a, "a")?;
    check_weight(u, "u")?;
    check_positive(gamma, "gamma")?;
    check_positive(c1, "c1")?;
    if !z0.is_finite() {
        return Err(Error::validation("prox_j1_pixel needs finite z0".to_string()));
    }
    let q = gamma * a / c1 - z0;
    if u == 0.0 {
        return Ok((-q).max(0.0));
    }
    let disc = (q * q + 4.0 * gamma * u).sqrt();
    Ok(if q > 0.0 { 2.0 * gamma * u / (q + disc) } else { (disc - q) / 2.0 })
}

/// Shrink factor of the grouped soft threshold: `max(0, 1 - t/norm)`,
/// zero when the norm vanishes.
#[inline]
pub fn group_shrink_factor(norm: f64, t: f64) -> f64 {
    if norm <= t {
        0.0
    } else {
        1.0 - t / norm
    }
}

/// Grouped soft threshold: `v * max(0, 1 - t/||v||_2)`.
pub fn group_soft_threshold(v: &[f64], t: f64) -> Result<Vec<f64>> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::validation(format!("threshold must be >= 0, got {t}")));
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let s = group_shrink_factor(norm, t);
    Ok(v.iter().map(|x| x * s).collect())
}

/// Projection onto the nonnegative half-line.
#[inline]
pub fn project_nonneg(z: f64) -> f64 {
    z.max(0.0)
}

fn check_weight(v: f64, name: &str) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::validation(format!("{name} must be finite and >= 0, got {v}")));
    }
    Ok(())
}

fn check_positive(v: f64, name: &str) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::validation(format!("{name} must be finite and > 0, got {v}")));
    }
    Ok(())
}
