//! MAP objective, closed-form density estimate, warm-start convex program,
//! alternating minimization and the direct-inversion baseline.
//!
//! The joint objective couples a Poisson negative log-likelihood over the
//! views with total-variation priors on both maps. The recommended pipeline
//! is the two-step recipe: solve the convex warm-start program in the
//! attenuation, then run one regularized density correction. Further
//! alternating rounds are available through `nit`.

use crate::error::{Error, Result};
use crate::fields::{self, ScalarField};
use crate::kernels::{group_shrink_factor, prox_g1_pixel, prox_h1_pixel, prox_j1_pixel};
use crate::operators::{self, total_variation, PathOperator};
use crate::parallel::{self, CHUNK};
use crate::sdmm::{sdmm_solve, SdmmOptions, SdmmTrace, SplitTerm};
use crate::simulate::ForwardModel;

/// Tuning knobs of the estimation pipeline. `None` fields resolve from the
/// data: `c2` to `n^(1/d)` (balancing the path-operator norm against the
/// gradient) and `lambda_beta` to `0.2 * mean(u)`.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// TV weight on the attenuation.
    pub lambda_alpha: f64,
    /// TV weight on the density; `None` resolves to `0.2 * mean(u)`.
    pub lambda_beta: Option<f64>,
    pub gamma: f64,
    /// Balance constant on the gradient term; `None` resolves to `n^(1/d)`.
    pub c2: Option<f64>,
    /// Balance constant on the identity (nonnegativity) term.
    pub c3: f64,
    /// Outer alternating rounds after the warm start; 0 is the two-step
    /// recipe (warm start + one density correction).
    pub nit: usize,
    /// SDMM iterations for attenuation subproblems.
    pub sdmm_iters: usize,
    /// SDMM iterations for density subproblems.
    pub sdmm_iters_beta: usize,
    pub cg_tol: f64,
    /// Early exit threshold on the SDMM primal residual.
    pub residual_tol: f64,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda_alpha: 1.0,
            lambda_beta: None,
            gamma: 1.0,
            c2: None,
            c3: 1.0,
            nit: 0,
            sdmm_iters: 500,
            sdmm_iters_beta: 300,
            cg_tol: 1e-10,
            residual_tol: 1e-9,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn resolved_c2(&self, dims: &[usize]) -> f64 {
        self.c2.unwrap_or_else(|| side_length(dims))
    }

    pub fn resolved_lambda_beta(&self, views: &[ScalarField]) -> f64 {
        self.lambda_beta.unwrap_or_else(|| {
            let total: f64 = views.iter().map(|v| parallel::sum(v.data())).sum();
            let count: usize = views.iter().map(|v| v.len()).sum();
            0.2 * total / count.max(1) as f64
        })
    }

    fn sdmm_options(&self, dims: &[usize], iters: usize, warm_start_terms: bool) -> SdmmOptions {
        SdmmOptions {
            gamma: self.gamma,
            iters,
            cg_tol: self.cg_tol,
            cg_max_iters: (10.0 * side_length(dims)).ceil() as usize,
            residual_tol: self.residual_tol,
            warm_start_terms,
        }
    }
}

fn side_length(dims: &[usize]) -> f64 {
    let n: usize = dims.iter().product();
    (n as f64).powf(1.0 / dims.len() as f64)
}

/// SNR of the recovered maps against a known ground truth.
#[derive(Debug, Clone, Copy)]
pub struct Metrics {
    pub snr_alpha_db: f64,
    pub snr_beta_db: f64,
}

/// Output of [`estimate`].
#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub alpha_hat: ScalarField,
    pub beta_hat: ScalarField,
    /// Minimizer of the warm-start convex program.
    pub warm_start_alpha: ScalarField,
    /// Objective value after each half-step (nonincreasing up to subproblem
    /// inexactness).
    pub objective_trace: Vec<f64>,
    pub metrics: Option<Metrics>,
}

impl EstimationResult {
    pub fn compute_metrics(
        &mut self,
        truth_alpha: &ScalarField,
        truth_beta: &ScalarField,
    ) -> Result<()> {
        self.metrics = Some(Metrics {
            snr_alpha_db: fields::snr_db(&self.alpha_hat, truth_alpha)?,
            snr_beta_db: fields::snr_db(&self.beta_hat, truth_beta)?,
        });
        Ok(())
    }
}

fn check_views(views: &[ScalarField]) -> Result<&[usize]> {
    if views.is_empty() {
        return Err(Error::validation("at least one view is required".to_string()));
    }
    let dims = views[0].dims();
    for v in views {
        if v.dims() != dims {
            return Err(Error::dim_mismatch(dims, v.dims()));
        }
        v.require_nonnegative("view counts")?;
    }
    Ok(dims)
}

/// Joint MAP objective:
/// `sum_ij [w beta e^{-A_j alpha} + u_j ((A_j alpha) - log(w beta))]
///  + lambda_alpha TV(alpha) + lambda_beta TV(beta)`,
/// where `w` is the model's pixel weight (1 for the plain two-view model).
///
/// Returns +inf outside the nonnegative orthant (the indicator priors), with
/// the convention `u log(w beta) = 0` when `u = 0` and `beta = 0`, and +inf
/// when `u > 0` but `beta = 0`.
pub fn objective_f(
    alpha: &ScalarField,
    beta: &ScalarField,
    views: &[ScalarField],
    model: &ForwardModel,
    lambda_alpha: f64,
    lambda_beta: f64,
) -> Result<f64> {
    let dims = check_views(views)?;
    if alpha.dims() != dims || beta.dims() != dims {
        return Err(Error::dim_mismatch(dims, alpha.dims()));
    }
    if views.len() != model.views() {
        return Err(Error::validation(format!(
            "{} views supplied to a {}-view model",
            views.len(),
            model.views()
        )));
    }
    if !alpha.is_nonnegative() || !beta.is_nonnegative() {
        return Ok(f64::INFINITY);
    }
    let w = model.pixel_weights(dims)?;
    let n = beta.len();
    let mut total = 0.0;
    for (op, u) in model.operators.iter().zip(views) {
        let s = op.apply(alpha)?;
        let mut terms = vec![0.0; n];
        let s = s.data();
        let u = u.data();
        let b = beta.data();
        parallel::for_each_chunk_mut(&mut terms, |ci, chunk| {
            let base = ci * CHUNK;
            for (k, t) in chunk.iter_mut().enumerate() {
                let i = base + k;
                let lam0 = w[i] * b[i];
                let mut v = lam0 * (-s[i]).exp();
                if u[i] > 0.0 {
                    if lam0 == 0.0 {
                        v = f64::INFINITY;
                    } else {
                        v += u[i] * (s[i] - lam0.ln());
                    }
                }
                *t = v;
            }
        });
        total += parallel::sum(&terms);
    }
    total += lambda_alpha * total_variation(alpha) + lambda_beta * total_variation(beta);
    Ok(total)
}

/// Unconstrained stationary point of the objective in the density:
/// `beta = sum_j u_j / (w sum_j exp(-A_j alpha))` elementwise.
pub fn beta_closed_form(
    views: &[ScalarField],
    alpha: &ScalarField,
    model: &ForwardModel,
) -> Result<ScalarField> {
    let dims = check_views(views)?;
    if alpha.dims() != dims {
        return Err(Error::dim_mismatch(dims, alpha.dims()));
    }
    alpha.require_nonnegative("alpha")?;
    let w = model.pixel_weights(dims)?;
    let n = alpha.len();
    let mut denom = vec![0.0; n];
    for op in &model.operators {
        let s = op.apply(alpha)?;
        let s = s.data();
        parallel::for_each_chunk_mut(&mut denom, |ci, chunk| {
            let base = ci * CHUNK;
            for (k, d) in chunk.iter_mut().enumerate() {
                *d += (-s[base + k]).exp();
            }
        });
    }
    let mut out = vec![0.0; n];
    let views_data: Vec<&[f64]> = views.iter().map(|v| v.data()).collect();
    parallel::for_each_chunk_mut(&mut out, |ci, chunk| {
        let base = ci * CHUNK;
        for (k, o) in chunk.iter_mut().enumerate() {
            let i = base + k;
            let u: f64 = views_data.iter().map(|v| v[i]).sum();
            *o = u / (w[i] * denom[i]);
        }
    });
    ScalarField::new(dims.to_vec(), out)
}

/// Stacked path-operator term `x -> [A_1 x; ...; A_m x]` (c1 = 1).
fn stacked_path_term(dims: &[usize], ops: Vec<PathOperator>, prox: crate::sdmm::ProxMap) -> SplitTerm {
    let dims_a = dims.to_vec();
    let dims_b = dims.to_vec();
    let ops_a = ops.clone();
    let n: usize = dims.iter().product();
    SplitTerm::new(
        Box::new(move |x: &[f64]| {
            let mut out = vec![0.0; n * ops_a.len()];
            for (j, op) in ops_a.iter().enumerate() {
                let blk = &mut out[j * n..(j + 1) * n];
                blk.copy_from_slice(x);
                op.apply_in_place(&dims_a, blk).expect("axis checked at construction");
            }
            out
        }),
        Box::new(move |v: &[f64]| {
            let mut out = vec![0.0; n];
            for (j, op) in ops.iter().enumerate() {
                let mut blk = v[j * n..(j + 1) * n].to_vec();
                op.adjoint_in_place(&dims_b, &mut blk).expect("axis checked at construction");
                for i in 0..n {
                    out[i] += blk[i];
                }
            }
            out
        }),
        prox,
    )
}

/// TV term `x -> c2 * grad x` with the grouped soft-threshold prox at
/// threshold `gamma * lambda / c2`.
fn tv_term(dims: &[usize], c2: f64, lambda: f64) -> SplitTerm {
    let dims_a = dims.to_vec();
    let dims_b = dims.to_vec();
    let n: usize = dims.iter().product();
    let d = dims.len();
    let lambda_over_c2 = lambda / c2;
    SplitTerm::new(
        Box::new(move |x: &[f64]| {
            let mut out = vec![0.0; d * n];
            for (axis, blk) in out.chunks_mut(n).enumerate() {
                operators::grad_axis_into(&dims_a, axis, x, blk);
            }
            if c2 != 1.0 {
                for v in &mut out {
                    *v *= c2;
                }
            }
            out
        }),
        Box::new(move |v: &[f64]| {
            // adjoint of grad is -div, accumulated per axis
            let mut acc = vec![0.0; n];
            for axis in 0..d {
                operators::div_axis_accumulate(&dims_b, axis, &v[axis * n..(axis + 1) * n], &mut acc);
            }
            for x in &mut acc {
                *x *= -c2;
            }
            acc
        }),
        Box::new(move |buf: &mut [f64], gamma: f64| {
            let t = gamma * lambda_over_c2;
            let n = buf.len() / d;
            match d {
                1 => parallel::for_each_chunk_mut(buf, |_, c| {
                    for v in c {
                        *v *= group_shrink_factor(v.abs(), t);
                    }
                }),
                2 => {
                    let (c0, c1) = buf.split_at_mut(n);
                    parallel::for_each_chunk_pair_mut(c0, c1, |_, a, b| {
                        for (x, y) in a.iter_mut().zip(b.iter_mut()) {
                            let s = group_shrink_factor((*x * *x + *y * *y).sqrt(), t);
                            *x *= s;
                            *y *= s;
                        }
                    });
                }
                _ => {
                    let (c0, rest) = buf.split_at_mut(n);
                    let (c1, c2c) = rest.split_at_mut(n);
                    parallel::for_each_chunk_triple_mut(c0, c1, c2c, |_, a, b, c| {
                        for ((x, y), z) in a.iter_mut().zip(b.iter_mut()).zip(c.iter_mut()) {
                            let s = group_shrink_factor(
                                (*x * *x + *y * *y + *z * *z).sqrt(),
                                t,
                            );
                            *x *= s;
                            *y *= s;
                            *z *= s;
                        }
                    });
                }
            }
            Ok(())
        }),
    )
}

/// Identity term `x -> c3 x` whose prox projects onto the nonnegative orthant.
fn nonneg_term(c3: f64) -> SplitTerm {
    SplitTerm::new(
        Box::new(move |x: &[f64]| x.iter().map(|v| c3 * v).collect()),
        Box::new(move |v: &[f64]| v.iter().map(|x| c3 * x).collect()),
        Box::new(|buf: &mut [f64], _gamma: f64| {
            parallel::for_each_chunk_mut(buf, |_, c| {
                for v in c {
                    *v = v.max(0.0);
                }
            });
            Ok(())
        }),
    )
}

/// Objective of the warm-start convex program:
/// `sum_ij u_j [(A_j alpha) + log sum_k e^{-(A_k alpha)}] + lambda TV(alpha)`.
pub fn warm_start_objective(
    alpha: &ScalarField,
    views: &[ScalarField],
    model: &ForwardModel,
    lambda_alpha: f64,
) -> Result<f64> {
    let dims = check_views(views)?;
    if alpha.dims() != dims {
        return Err(Error::dim_mismatch(dims, alpha.dims()));
    }
    let n = alpha.len();
    let sums: Vec<ScalarField> = model
        .operators
        .iter()
        .map(|op| op.apply(alpha))
        .collect::<Result<_>>()?;
    let mut terms = vec![0.0; n];
    let s: Vec<&[f64]> = sums.iter().map(|f| f.data()).collect();
    let u: Vec<&[f64]> = views.iter().map(|f| f.data()).collect();
    parallel::for_each_chunk_mut(&mut terms, |ci, chunk| {
        let base = ci * CHUNK;
        for (k, t) in chunk.iter_mut().enumerate() {
            let i = base + k;
            let m = s.iter().map(|sj| -sj[i]).fold(f64::NEG_INFINITY, f64::max);
            let lse = m + s.iter().map(|sj| (-sj[i] - m).exp()).sum::<f64>().ln();
            *t = u
                .iter()
                .zip(&s)
                .map(|(uj, sj)| uj[i] * (sj[i] + lse))
                .sum::<f64>();
        }
    });
    Ok(parallel::sum(&terms) + lambda_alpha * total_variation(alpha))
}

/// Minimize the warm-start convex program over nonnegative attenuations.
///
/// Splitting: the stacked path term with the logsumexp-prox data kernel, the
/// scaled gradient with grouped shrinkage, and a scaled identity enforcing
/// nonnegativity. Returns the minimizer and the SDMM trace.
pub fn warm_start_alpha(
    views: &[ScalarField],
    model: &ForwardModel,
    lambda_alpha: f64,
    cfg: &SolverConfig,
) -> Result<(ScalarField, SdmmTrace)> {
    let dims = check_views(views)?.to_vec();
    if views.len() != 2 || model.views() != 2 {
        return Err(Error::validation(
            "the warm-start program needs exactly two views".to_string(),
        ));
    }
    let n: usize = dims.iter().product();
    let u1 = views[0].data().to_vec();
    let u2 = views[1].data().to_vec();
    let data_prox: crate::sdmm::ProxMap = Box::new(move |buf: &mut [f64], gamma: f64| {
        let n = buf.len() / 2;
        let (b1, b2) = buf.split_at_mut(n);
        parallel::try_for_each_chunk_pair_mut(b1, b2, |ci, ca, cb| {
            let base = ci * CHUNK;
            for k in 0..ca.len() {
                let i = base + k;
                let (x1, x2) = prox_g1_pixel(ca[k], cb[k], u1[i], u2[i], gamma, 1.0)?;
                ca[k] = x1;
                cb[k] = x2;
            }
            Ok(())
        })
    });
    let c2 = cfg.resolved_c2(&dims);
    let terms = [
        stacked_path_term(&dims, model.operators.clone(), data_prox),
        tv_term(&dims, c2, lambda_alpha),
        nonneg_term(cfg.c3),
    ];
    let opts = cfg.sdmm_options(&dims, cfg.sdmm_iters, false);
    let (mut x, trace) = sdmm_solve(&terms, &vec![0.0; n], &opts, None)?;
    for v in &mut x {
        *v = v.max(0.0);
    }
    Ok((ScalarField::new(dims, x)?, trace))
}

/// Minimize the objective over the attenuation for a fixed density.
///
/// Supports one view (the classical range-profile inversion with known
/// density) or two. `init` warm-starts the SDMM at a previous attenuation.
pub fn alpha_step(
    views: &[ScalarField],
    beta: &ScalarField,
    model: &ForwardModel,
    lambda_alpha: f64,
    cfg: &SolverConfig,
    init: Option<&ScalarField>,
) -> Result<ScalarField> {
    let dims = check_views(views)?.to_vec();
    if beta.dims() != dims {
        return Err(Error::dim_mismatch(&dims, beta.dims()));
    }
    beta.require_nonnegative("beta")?;
    let m = views.len();
    if m != model.views() {
        return Err(Error::validation(format!(
            "{m} views supplied to a {}-view model",
            model.views()
        )));
    }
    let n: usize = dims.iter().product();
    let w = model.pixel_weights(&dims)?;

    // stacked per-coordinate parameters: view counts and effective density
    let mut u_stack = Vec::with_capacity(m * n);
    for v in views {
        u_stack.extend_from_slice(v.data());
    }
    let mut beta_stack = Vec::with_capacity(m * n);
    for _ in 0..m {
        beta_stack.extend(beta.data().iter().zip(&w).map(|(b, wi)| b * wi));
    }
    let data_prox: crate::sdmm::ProxMap = Box::new(move |buf: &mut [f64], gamma: f64| {
        parallel::try_for_each_chunk_mut(buf, |ci, chunk| {
            let base = ci * CHUNK;
            for (k, v) in chunk.iter_mut().enumerate() {
                let g = base + k;
                *v = prox_h1_pixel(*v, u_stack[g], beta_stack[g], gamma, 1.0)?;
            }
            Ok(())
        })
    });
    let c2 = cfg.resolved_c2(&dims);
    let terms = [
        stacked_path_term(&dims, model.operators.clone(), data_prox),
        tv_term(&dims, c2, lambda_alpha),
        nonneg_term(cfg.c3),
    ];
    let x0 = match init {
        Some(f) => {
            if f.dims() != dims {
                return Err(Error::dim_mismatch(&dims, f.dims()));
            }
            f.data().to_vec()
        }
        None => vec![0.0; n],
    };
    let opts = cfg.sdmm_options(&dims, cfg.sdmm_iters, init.is_some());
    let (mut x, _trace) = sdmm_solve(&terms, &x0, &opts, None)?;
    for v in &mut x {
        *v = v.max(0.0);
    }
    ScalarField::new(dims, x)
}

/// Minimize the objective over the density for a fixed attenuation
/// (attenuation correction plus TV denoising under Poisson statistics).
pub fn beta_step(
    views: &[ScalarField],
    alpha: &ScalarField,
    model: &ForwardModel,
    lambda_beta: f64,
    cfg: &SolverConfig,
) -> Result<ScalarField> {
    let dims = check_views(views)?.to_vec();
    if alpha.dims() != dims {
        return Err(Error::dim_mismatch(&dims, alpha.dims()));
    }
    alpha.require_nonnegative("alpha")?;
    let n: usize = dims.iter().product();
    let w = model.pixel_weights(&dims)?;

    // a[i] = sum_j w[i] e^{-(A_j alpha)[i]},  u[i] = sum_j u_j[i]
    let mut a_vec = vec![0.0; n];
    for op in &model.operators {
        let s = op.apply(alpha)?;
        let s = s.data();
        parallel::for_each_chunk_mut(&mut a_vec, |ci, chunk| {
            let base = ci * CHUNK;
            for (k, t) in chunk.iter_mut().enumerate() {
                *t += (-s[base + k]).exp();
            }
        });
    }
    for (ai, wi) in a_vec.iter_mut().zip(&w) {
        *ai *= wi;
    }
    let mut u_sum = vec![0.0; n];
    for v in views {
        for (t, vi) in u_sum.iter_mut().zip(v.data()) {
            *t += vi;
        }
    }

    let x0 = beta_closed_form(views, alpha, model)?;
    let data_prox: crate::sdmm::ProxMap = Box::new(move |buf: &mut [f64], gamma: f64| {
        parallel::try_for_each_chunk_mut(buf, |ci, chunk| {
            let base = ci * CHUNK;
            for (k, v) in chunk.iter_mut().enumerate() {
                let i = base + k;
                *v = prox_j1_pixel(*v, a_vec[i], u_sum[i], gamma, 1.0)?;
            }
            Ok(())
        })
    });
    let c2 = cfg.resolved_c2(&dims);
    let terms = [
        SplitTerm::new(
            Box::new(|x: &[f64]| x.to_vec()),
            Box::new(|v: &[f64]| v.to_vec()),
            data_prox,
        ),
        tv_term(&dims, c2, lambda_beta),
    ];
    let opts = cfg.sdmm_options(&dims, cfg.sdmm_iters_beta, true);
    let (mut x, _trace) = sdmm_solve(&terms, x0.data(), &opts, None)?;
    for v in &mut x {
        *v = v.max(0.0);
    }
    ScalarField::new(dims, x)
}

/// Full pipeline: warm start, density correction, then `nit` further
/// alternating rounds. The objective is recorded after every half-step.
pub fn estimate(
    views: &[ScalarField],
    model: &ForwardModel,
    cfg: &SolverConfig,
) -> Result<EstimationResult> {
    if views.len() != 2 {
        return Err(Error::validation("estimate needs exactly two views".to_string()));
    }
    let lambda_beta = cfg.resolved_lambda_beta(views);
    let (alpha0, _warm_trace) = warm_start_alpha(views, model, cfg.lambda_alpha, cfg)?;
    let beta0 = beta_step(views, &alpha0, model, lambda_beta, cfg)?;
    let mut trace = vec![objective_f(
        &alpha0,
        &beta0,
        views,
        model,
        cfg.lambda_alpha,
        lambda_beta,
    )?];
    let mut alpha = alpha0.clone();
    let mut beta = beta0;
    for _ in 0..cfg.nit {
        alpha = alpha_step(views, &beta, model, cfg.lambda_alpha, cfg, Some(&alpha))?;
        trace.push(objective_f(&alpha, &beta, views, model, cfg.lambda_alpha, lambda_beta)?);
        beta = beta_step(views, &alpha, model, lambda_beta, cfg)?;
        trace.push(objective_f(&alpha, &beta, views, model, cfg.lambda_alpha, lambda_beta)?);
    }
    Ok(EstimationResult {
        alpha_hat: alpha,
        beta_hat: beta,
        warm_start_alpha: alpha0,
        objective_trace: trace,
        metrics: None,
    })
}

/// Log-ratio direct inversion of two opposite views.
///
/// `v = log((u2 + floor)/(u1 + floor))`; the attenuation is half the forward
/// difference of `v` along the path axis (last sample replicated, clamped at
/// zero) and the density follows by unwinding the first view's attenuation:
/// `beta = u1 exp(A_1 alpha)`. Unstable under noise by construction; serves
/// as the baseline the regularized pipeline is compared against.
pub fn direct_inversion(
    u1: &ScalarField,
    u2: &ScalarField,
    model: &ForwardModel,
    floor: f64,
) -> Result<(ScalarField, ScalarField)> {
    if !u1.same_dims(u2) {
        return Err(Error::dim_mismatch(u1.dims(), u2.dims()));
    }
    if model.views() != 2 {
        return Err(Error::validation("direct inversion needs a two-view model".to_string()));
    }
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::validation(format!("floor must be > 0, got {floor}")));
    }
    let dims = u1.dims().to_vec();
    let n = u1.len();
    let mut v = vec![0.0; n];
    let d1 = u1.data();
    let d2 = u2.data();
    parallel::for_each_chunk_mut(&mut v, |ci, chunk| {
        let base = ci * CHUNK;
        for (k, t) in chunk.iter_mut().enumerate() {
            let i = base + k;
            *t = ((d2[i] + floor) / (d1[i] + floor)).ln();
        }
    });

    let axis = model.path_axis();
    let extent = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    let block = extent * stride;
    let mut alpha = vec![0.0; n];
    parallel::for_each_block_mut(&mut alpha, block, |bi, ob| {
        let vb = &v[bi * block..bi * block + ob.len()];
        for t in 0..extent {
            let src = if t + 1 < extent { t } else { extent.saturating_sub(2) };
            for k in 0..stride {
                let d = if extent == 1 {
                    0.0
                } else {
                    (vb[(src + 1) * stride + k] - vb[src * stride + k]) / 2.0
                };
                ob[t * stride + k] = d.max(0.0);
            }
        }
    });
    let alpha = ScalarField::new(dims.clone(), alpha)?;
    let s = model.operators[0].apply(&alpha)?;
    let mut beta = vec![0.0; n];
    let s = s.data();
    parallel::for_each_chunk_mut(&mut beta, |ci, chunk| {
        let base = ci * CHUNK;
        for (k, t) in chunk.iter_mut().enumerate() {
            let i = base + k;
            *t = d1[i] * s[i].exp();
        }
    });
    Ok((alpha, ScalarField::new(dims, beta)?))
}
