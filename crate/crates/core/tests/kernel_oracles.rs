//! Independent oracles for the scalar kernels: bisection for Lambert W and
//! brute-force minimization (golden section plus a finite-difference slope
//! refinement) for the proximal operators.

use maec::kernels::{lambert_w_exp, prox_h1_pixel, prox_j1_pixel, prox_lse2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bisection on log(x) + x = z (monotone increasing).
fn bisect_log_form(z: f64) -> f64 {
    let (mut lo, mut hi) = (1e-12, z.abs().max(2.0) + 2.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid.ln() + mid - z > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Bisection on x e^x = t for t > 0.
fn bisect_product_form(t: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, t.max(1.0) + 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid.exp() - t > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// Golden-section localization of the minimum of a unimodal function.
fn golden_min(f: &dyn Fn(f64) -> f64, mut lo: f64, mut hi: f64, iters: usize) -> f64 {
    let mut m1 = hi - GOLDEN * (hi - lo);
    let mut m2 = lo + GOLDEN * (hi - lo);
    let mut f1 = f(m1);
    let mut f2 = f(m2);
    for _ in 0..iters {
        if f1 < f2 {
            hi = m2;
            m2 = m1;
            f2 = f1;
            m1 = hi - GOLDEN * (hi - lo);
            f1 = f(m1);
        } else {
            lo = m1;
            m1 = m2;
            f1 = f2;
            m2 = lo + GOLDEN * (hi - lo);
            f2 = f(m2);
        }
    }
    0.5 * (lo + hi)
}

/// Refine a localized minimizer by bisecting the sign change of the central
/// finite-difference slope (pure objective evaluations; golden section alone
/// cannot resolve an argmin below ~sqrt(eps)).
fn refine_min(f: &dyn Fn(f64) -> f64, x0: f64) -> f64 {
    let h = 1e-5 * x0.abs().max(1.0);
    let slope = |x: f64| (f(x + h) - f(x - h)) / (2.0 * h);
    let mut radius = 16.0 * h;
    let (mut lo, mut hi) = (x0 - radius, x0 + radius);
    for _ in 0..40 {
        if slope(lo) < 0.0 && slope(hi) > 0.0 {
            break;
        }
        radius *= 2.0;
        lo = x0 - radius;
        hi = x0 + radius;
    }
    if !(slope(lo) < 0.0 && slope(hi) > 0.0) {
        return x0;
    }
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if slope(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

fn minimize_1d(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64) -> f64 {
    refine_min(f, golden_min(f, lo, hi, 60))
}

fn lse(x1: f64, x2: f64) -> f64 {
    let m = x1.max(x2);
    m + ((x1 - m).exp() + (x2 - m).exp()).ln()
}

/// Brute-force minimizer of the 2D prox objective a lse(x) + 1/2 ||x - y||^2:
/// nested golden-section localization followed by coordinate-wise slope
/// refinement.
fn lse_prox_oracle(y1: f64, y2: f64, a: f64) -> (f64, f64) {
    let obj = |x1: f64, x2: f64| a * lse(x1, x2) + 0.5 * ((x1 - y1).powi(2) + (x2 - y2).powi(2));
    let inner = |x1: f64| {
        let g = |x2: f64| obj(x1, x2);
        let x2 = golden_min(&g, y2 - a - 2.0, y2 + 2.0, 60);
        (x2, g(x2))
    };
    let mut x1 = golden_min(&|x1: f64| inner(x1).1, y1 - a - 2.0, y1 + 2.0, 60);
    let mut x2 = inner(x1).0;
    for _ in 0..60 {
        x1 = refine_min(&|t: f64| obj(t, x2), x1);
        x2 = refine_min(&|t: f64| obj(x1, t), x2);
    }
    (x1, x2)
}

#[test]
fn lambert_matches_bisection_at_omega() {
    let (w, _) = lambert_w_exp(0.0).unwrap();
    let oracle = bisect_product_form(1.0);
    assert!((w - oracle).abs() <= 1e-12, "{w} vs {oracle}");
}

#[test]
fn lambert_matches_bisection_at_z_1000() {
    let (w, stats) = lambert_w_exp(1000.0).unwrap();
    let oracle = bisect_log_form(1000.0);
    assert!((w - oracle).abs() <= 1e-9 * oracle, "{w} vs {oracle}");
    assert!(stats.residual <= 1e-12 * 1000.0);
}

#[test]
fn lambert_matches_bisection_across_magnitudes() {
    for &z in &[0.2, 0.5, 2.0, 20.0, 200.0, 2e4, 2e5] {
        let (w, _) = lambert_w_exp(z).unwrap();
        let oracle = bisect_log_form(z);
        assert!(
            (w - oracle).abs() <= 1e-11 * oracle.max(1.0),
            "z={z}: {w} vs {oracle}"
        );
    }
    for &z in &[-8.0, -2.0, -0.5, 0.05] {
        let (w, _) = lambert_w_exp(z).unwrap();
        let oracle = bisect_product_form(z.exp());
        assert!(
            (w - oracle).abs() <= 1e-11 * oracle.max(1e-6),
            "z={z}: {w} vs {oracle}"
        );
    }
}

#[test]
fn prox_lse2_matches_nested_golden_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..150 {
        let y1 = 10.0 * (rng.gen::<f64>() - 0.5);
        let y2 = 10.0 * (rng.gen::<f64>() - 0.5);
        let a = 4.0 * rng.gen::<f64>();
        let (x1, x2, _) = prox_lse2(y1, y2, a).unwrap();
        let (o1, o2) = lse_prox_oracle(y1, y2, a);
        assert!(
            (x1 - o1).abs() <= 1e-7 && (x2 - o2).abs() <= 1e-7,
            "y=({y1},{y2}) a={a}: got ({x1},{x2}) oracle ({o1},{o2})"
        );
    }
}

#[test]
fn prox_lse2_spec_example_y20() {
    let (x1, x2, _) = prox_lse2(2.0, 0.0, 1.0).unwrap();
    let (o1, o2) = lse_prox_oracle(2.0, 0.0, 1.0);
    assert!(
        (x1 - o1).abs() <= 1e-8 && (x2 - o2).abs() <= 1e-8,
        "got ({x1},{x2}) oracle ({o1},{o2})"
    );
}

#[test]
fn prox_h1_matches_golden_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    for _ in 0..150 {
        let z0 = 10.0 * (rng.gen::<f64>() - 0.5);
        let u = 5.0 * rng.gen::<f64>();
        let beta = 5.0 * rng.gen::<f64>();
        let gamma = 0.1 + 2.9 * rng.gen::<f64>();
        let z = prox_h1_pixel(z0, u, beta, gamma, 1.0).unwrap();
        let f = move |x: f64| {
            gamma * u * x + gamma * beta * (-x).exp() + 0.5 * (x - z0) * (x - z0)
        };
        let oracle = minimize_1d(&f, -25.0, 30.0);
        assert!(
            (z - oracle).abs() <= 1e-7,
            "z0={z0} u={u} beta={beta} gamma={gamma}: {z} vs {oracle}"
        );
    }
}

#[test]
fn prox_h1_log_domain_stress() {
    // far-negative shift: the Lambert argument only exists in log form
    let z0 = -800.0;
    let z = prox_h1_pixel(z0, 0.0, 1.0, 1.0, 1.0).unwrap();
    let f = |x: f64| (-x).exp() + 0.5 * (x - z0) * (x - z0);
    let oracle = minimize_1d(&f, -30.0, 10.0);
    assert!(
        (z - oracle).abs() <= 1e-8 * oracle.abs().max(1.0),
        "{z} vs {oracle}"
    );
}

#[test]
fn prox_j1_matches_golden_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..150 {
        let z0 = 10.0 * (rng.gen::<f64>() - 0.5);
        let a = 5.0 * rng.gen::<f64>();
        let u = 0.1 + 5.0 * rng.gen::<f64>();
        let gamma = 0.1 + 2.9 * rng.gen::<f64>();
        let z = prox_j1_pixel(z0, a, u, gamma, 1.0).unwrap();
        let f = move |x: f64| 0.5 * (x - z0) * (x - z0) + gamma * (a * x - u * x.ln());
        // search over log x so the positivity constraint is implicit
        let t = minimize_1d(&|t: f64| f(t.exp()), -40.0, 5.0);
        let oracle = t.exp();
        assert!(
            (z - oracle).abs() <= 1e-7 * oracle.max(1.0),
            "z0={z0} a={a} u={u} gamma={gamma}: {z} vs {oracle}"
        );
    }
}

#[test]
fn prox_j1_spec_example() {
    let z = prox_j1_pixel(-2.0, 0.5, 3.0, 2.0, 1.0).unwrap();
    let f = |x: f64| 0.5 * (x + 2.0) * (x + 2.0) + 2.0 * (0.5 * x - 3.0 * x.ln());
    let oracle = minimize_1d(&|t: f64| f(t.exp()), -20.0, 4.0).exp();
    assert!((z - oracle).abs() <= 1e-8, "{z} vs {oracle}");
}

#[test]
fn prox_kernels_satisfy_finite_difference_stationarity() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let h = 1e-6;
    for _ in 0..200 {
        let z0 = 6.0 * (rng.gen::<f64>() - 0.5);
        let u = 3.0 * rng.gen::<f64>();
        let beta = 3.0 * rng.gen::<f64>();
        let gamma = 0.2 + 2.0 * rng.gen::<f64>();
        let z = prox_h1_pixel(z0, u, beta, gamma, 1.0).unwrap();
        let f = |x: f64| gamma * u * x + gamma * beta * (-x).exp() + 0.5 * (x - z0) * (x - z0);
        let g = (f(z + h) - f(z - h)) / (2.0 * h);
        let curvature = 1.0 + gamma * beta * (-z).exp();
        assert!(g.abs() <= 1e-5 * (1.0 + curvature), "gradient {g}");
    }
}

#[test]
fn prox_lse2_iteration_bounds_on_dyadic_grid() {
    // dyadic benchmark grid, both signs of y1 - y2
    let mut max_it = 0u32;
    let mut total: u64 = 0;
    let mut count: u64 = 0;
    let mut max_residual = 0.0f64;
    for sign in [1.0, -1.0] {
        for i in -10..=20 {
            for j in -10..=20 {
                let dy = sign * (2.0f64).powi(i);
                let a = (2.0f64).powi(j);
                let (_, _, stats) = prox_lse2(dy, 0.0, a).unwrap();
                max_it = max_it.max(stats.iterations);
                total += stats.iterations as u64;
                count += 1;
                max_residual = max_residual.max(stats.residual);
            }
        }
    }
    assert!(max_it <= 18, "max iterations {max_it}");
    assert!((total as f64 / count as f64) <= 4.0, "mean {}", total as f64 / count as f64);
    assert!(max_residual <= 1e-12, "max residual {max_residual}");
}

#[test]
fn lambert_iteration_bound_on_log_uniform_sample() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut max_it = 0u32;
    for _ in 0..20_000 {
        let z = if rng.gen::<bool>() {
            -(10.0f64.powf(rng.gen::<f64>() * (700f64.log10() + 10.0) - 10.0))
        } else {
            10.0f64.powf(rng.gen::<f64>() * 16.0 - 10.0)
        };
        let (_, stats) = lambert_w_exp(z).unwrap();
        max_it = max_it.max(stats.iterations);
    }
    assert!(max_it <= 5, "max iterations {max_it}");
}
