//! Simultaneous Direction Method of Multipliers over a list of split terms,
//! with a warm-started conjugate-gradient solve for the normal matrix
//! `Q = sum_i L_i^T L_i`.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::parallel;

/// Matrix-free linear map on flat vectors.
pub type LinearMap = Box<dyn Fn(&[f64]) -> Vec<f64> + Sync + Send>;

/// In-place prox of `gamma * g_i` on the term's range space.
pub type ProxMap = Box<dyn Fn(&mut [f64], f64) -> Result<()> + Sync + Send>;

/// One `(L_i, g_i)` unit of the splitting. Balance constants are folded into
/// `apply`/`adjoint`/`prox` by the caller.
pub struct SplitTerm {
    pub apply: LinearMap,
    pub adjoint: LinearMap,
    pub prox: ProxMap,
}

impl SplitTerm {
    pub fn new(apply: LinearMap, adjoint: LinearMap, prox: ProxMap) -> Self {
        SplitTerm { apply, adjoint, prox }
    }
}

/// Solver options. `residual_tol` enables the optional early exit on the
/// primal residual; `warm_start_terms` initializes `y_i = L_i x0` instead of
/// zero so the first x-update reproduces x0 exactly.
#[derive(Debug, Clone)]
pub struct SdmmOptions {
    pub gamma: f64,
    pub iters: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    pub residual_tol: f64,
    pub warm_start_terms: bool,
}

impl Default for SdmmOptions {
    fn default() -> Self {
        SdmmOptions {
            gamma: 1.0,
            iters: 500,
            cg_tol: 1e-10,
            cg_max_iters: 200,
            residual_tol: 1e-9,
            warm_start_terms: false,
        }
    }
}

/// Per-iteration record of an SDMM run.
#[derive(Debug, Clone, Default)]
pub struct SdmmTrace {
    /// `max_i ||L_i x - y_i|| / (1 + ||y_i||)` after each iteration.
    pub primal_residuals: Vec<f64>,
    /// Objective values, present only when the caller supplied an objective.
    pub objectives: Vec<f64>,
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone, Copy)]
pub struct CgInfo {
    pub iterations: usize,
    pub converged: bool,
    pub rel_residual: f64,
}

/// Solve `q(x) = rhs` for symmetric positive definite `q` by conjugate
/// gradients from `x0`, stopping at `||q(x) - rhs|| <= tol ||rhs||` or after
/// `max_iters` iterations (then `converged` is false).
pub fn cg_solve(
    q: &(dyn Fn(&[f64]) -> Vec<f64> + Sync),
    rhs: &[f64],
    x0: &[f64],
    tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, CgInfo)> {
    if tol <= 0.0 {
        return Err(Error::validation(format!("cg tolerance must be > 0, got {tol}")));
    }
    let n = rhs.len();
    let rhs_norm = parallel::norm2_sq(rhs).sqrt();
    if rhs_norm == 0.0 {
        return Ok((
            vec![0.0; n],
            CgInfo { iterations: 0, converged: true, rel_residual: 0.0 },
        ));
    }
    let mut x = x0.to_vec();
    let qx = q(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&qx).map(|(b, v)| b - v).collect();
    let mut rs = parallel::norm2_sq(&r);
    let mut p = r.clone();
    let mut iterations = 0;
    let mut converged = rs.sqrt() <= tol * rhs_norm;
    while !converged && iterations < max_iters {
        let qp = q(&p);
        let pqp = parallel::dot(&p, &qp);
        if !pqp.is_finite() || pqp <= 0.0 {
            return Err(Error::numerical(format!(
                "cg breakdown: p^T Q p = {pqp} (operator not SPD?)"
            )));
        }
        let alpha = rs / pqp;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * qp[i];
        }
        let rs_new = parallel::norm2_sq(&r);
        if !rs_new.is_finite() {
            return Err(Error::numerical("cg produced non-finite residual".to_string()));
        }
        let beta = rs_new / rs;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs = rs_new;
        iterations += 1;
        converged = rs.sqrt() <= tol * rhs_norm;
    }
    let rel_residual = rs.sqrt() / rhs_norm;
    Ok((x, CgInfo { iterations, converged, rel_residual }))
}

/// Run SDMM on `min_x sum_i g_i(L_i x)`.
///
/// Each iteration performs, in order,
/// `x = Q^{-1} sum_i L_i^T (y_i - z_i)` (by warm-started CG), then per term
/// `s_i = L_i x`, `y_i = prox_{gamma g_i}(s_i + z_i)`, `z_i = z_i + s_i - y_i`.
/// Stops after `opts.iters` iterations or when the primal residual drops to
/// `opts.residual_tol`.
pub fn sdmm_solve(
    terms: &[SplitTerm],
    x0: &[f64],
    opts: &SdmmOptions,
    objective: Option<&(dyn Fn(&[f64]) -> f64 + Sync)>,
) -> Result<(Vec<f64>, SdmmTrace)> {
    if terms.is_empty() {
        return Err(Error::validation("sdmm needs at least one split term".to_string()));
    }
    if !(opts.gamma.is_finite() && opts.gamma > 0.0) {
        return Err(Error::validation(format!("gamma must be > 0, got {}", opts.gamma)));
    }
    let n = x0.len();
    let q = |v: &[f64]| -> Vec<f64> {
        let mut acc = vec![0.0; n];
        for t in terms {
            let w = (t.adjoint)(&(t.apply)(v));
            for i in 0..n {
                acc[i] += w[i];
            }
        }
        acc
    };

    let mut x = x0.to_vec();
    let mut y: Vec<Vec<f64>> = terms
        .iter()
        .map(|t| {
            let s = (t.apply)(&x);
            if opts.warm_start_terms {
                s
            } else {
                vec![0.0; s.len()]
            }
        })
        .collect();
    let mut z: Vec<Vec<f64>> = y.iter().map(|yi| vec![0.0; yi.len()]).collect();
    let mut trace = SdmmTrace::default();

    for _ in 0..opts.iters {
        let mut rhs = vec![0.0; n];
        for (t, (yi, zi)) in terms.iter().zip(y.iter().zip(&z)) {
            let diff: Vec<f64> = yi.iter().zip(zi).map(|(a, b)| a - b).collect();
            let back = (t.adjoint)(&diff);
            for i in 0..n {
                rhs[i] += back[i];
            }
        }
        let (xn, _info) = cg_solve(&q, &rhs, &x, opts.cg_tol, opts.cg_max_iters)?;
        x = xn;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::numerical("sdmm iterate became non-finite".to_string()));
        }

        let mut primal = 0.0f64;
        for (t, (yi, zi)) in terms.iter().zip(y.iter_mut().zip(z.iter_mut())) {
            let s = (t.apply)(&x);
            let mut buf: Vec<f64> = s.iter().zip(zi.iter()).map(|(a, b)| a + b).collect();
            (t.prox)(&mut buf, opts.gamma)?;
            // buf now holds the new y_i
            let mut gap = vec![0.0; s.len()];
            for i in 0..s.len() {
                gap[i] = s[i] - buf[i];
                zi[i] += gap[i];
            }
            let res = parallel::norm2_sq(&gap).sqrt()
                / (1.0 + parallel::norm2_sq(&buf).sqrt());
            primal = primal.max(res);
            *yi = buf;
        }
        trace.primal_residuals.push(primal);
        if let Some(f) = objective {
            trace.objectives.push(f(&x));
        }
        if primal <= opts.residual_tol {
            break;
        }
    }
    Ok((x, trace))
}

/// Write a trace as CSV (`iteration,primal_residual,objective`); the
/// objective column is empty when no objective was recorded.
pub fn write_trace_csv(trace: &SdmmTrace, path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path.as_ref())?);
    writeln!(w, "iteration,primal_residual,objective")?;
    for (i, r) in trace.primal_residuals.iter().enumerate() {
        if let Some(obj) = trace.objectives.get(i) {
            writeln!(w, "{i},{r},{obj}")?;
        } else {
            writeln!(w, "{i},{r},")?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity_term(n: usize, prox: ProxMap) -> SplitTerm {
        SplitTerm::new(
            Box::new(move |x: &[f64]| x.to_vec()),
            Box::new(move |x: &[f64]| x.to_vec()),
            prox,
        )
    }

    fn quadratic_prox(b: Vec<f64>) -> ProxMap {
        // prox of gamma/2 ||. - b||^2 is (v + gamma b) / (1 + gamma)
        Box::new(move |v: &mut [f64], gamma: f64| {
            for (vi, bi) in v.iter_mut().zip(&b) {
                *vi = (*vi + gamma * bi) / (1.0 + gamma);
            }
            Ok(())
        })
    }

    #[test]
    fn cg_identity_returns_rhs() {
        let id = |v: &[f64]| v.to_vec();
        let rhs = vec![1.0, -2.0, 3.0];
        let (x, info) = cg_solve(&id, &rhs, &[0.0; 3], 1e-12, 10).unwrap();
        assert!(info.converged);
        for (a, b) in x.iter().zip(&rhs) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_diagonal_solve() {
        let q = |v: &[f64]| -> Vec<f64> {
            v.iter().enumerate().map(|(i, x)| (i as f64 + 1.0) * x).collect()
        };
        let rhs = vec![1.0; 5];
        let (x, info) = cg_solve(&q, &rhs, &[0.0; 5], 1e-14, 50).unwrap();
        assert!(info.converged);
        for (i, xi) in x.iter().enumerate() {
            assert!((xi - 1.0 / (i as f64 + 1.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn cg_zero_rhs_short_circuits() {
        let id = |v: &[f64]| v.to_vec();
        let (x, info) = cg_solve(&id, &[0.0; 4], &[1.0; 4], 1e-12, 10).unwrap();
        assert!(info.converged);
        assert!(x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_quadratic_term_converges_to_b() {
        let b = vec![0.5, -1.5, 2.0, 0.0, 3.25, -0.125, 1.0, 9.0, -4.0, 0.75, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let terms = [identity_term(16, quadratic_prox(b.clone()))];
        let opts = SdmmOptions { iters: 200, residual_tol: 0.0, ..Default::default() };
        let (x, _) = sdmm_solve(&terms, &vec![0.0; 16], &opts, None).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-8, "{xi} vs {bi}");
        }
    }

    #[test]
    fn one_sweep_encodes_exact_minimizer_for_gamma_one() {
        // single quadratic term, gamma = 1, warm-started y: after the first
        // sweep y - z = b exactly, so the second x-update lands on b.
        let b = vec![2.0, -3.0, 0.5];
        let terms = [identity_term(3, quadratic_prox(b.clone()))];
        let opts = SdmmOptions {
            iters: 2,
            residual_tol: 0.0,
            warm_start_terms: true,
            cg_tol: 1e-14,
            ..Default::default()
        };
        let x0 = vec![10.0, 20.0, 30.0];
        let (x, _) = sdmm_solve(&terms, &x0, &opts, None).unwrap();
        for (xi, bi) in x.iter().zip(&b) {
            assert!((xi - bi).abs() < 1e-10, "{xi} vs {bi}");
        }
    }

    #[test]
    fn projected_quadratic_two_terms() {
        // min iota_{>=0}(x) + 1/2 ||x - (-1, 2)||^2  ->  (0, 2)
        let target = vec![-1.0, 2.0];
        let terms = [
            identity_term(
                2,
                Box::new(|v: &mut [f64], _| {
                    v.iter_mut().for_each(|x| *x = x.max(0.0));
                    Ok(())
                }),
            ),
            identity_term(2, quadratic_prox(target)),
        ];
        let opts = SdmmOptions { iters: 400, residual_tol: 0.0, ..Default::default() };
        let (x, trace) = sdmm_solve(&terms, &[0.0; 2], &opts, None).unwrap();
        assert!((x[0] - 0.0).abs() < 1e-6 && (x[1] - 2.0).abs() < 1e-6, "{x:?}");
        assert_eq!(trace.primal_residuals.len(), 400);
    }

    #[test]
    fn traces_are_bitwise_reproducible() {
        let b = vec![1.0, 2.0, 3.0, 4.0];
        let run = || {
            let terms = [identity_term(4, quadratic_prox(b.clone()))];
            let opts = SdmmOptions { iters: 50, residual_tol: 0.0, ..Default::default() };
            sdmm_solve(&terms, &[0.0; 4], &opts, Some(&|x: &[f64]| x.iter().sum()))
                .unwrap()
        };
        let (x1, t1) = run();
        let (x2, t2) = run();
        assert_eq!(x1, x2);
        assert_eq!(t1.primal_residuals, t2.primal_residuals);
        assert_eq!(t1.objectives, t2.objectives);
    }
}
