//! Beer-Lambert forward model, reproducible Poisson sampling and synthetic
//! phantoms.

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::ScalarField;
use crate::operators::PathOperator;
use crate::parallel::{self, CHUNK};

/// Multiview intensity model: per view j,
/// `lambda_j = C * w * beta * exp(-A_j alpha)` where `w` is the optional
/// squared-range attenuation `1/(i + 1/2)^2` along the path axis.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    pub operators: Vec<PathOperator>,
    /// Global intensity constant C.
    pub scale: f64,
    /// Apply the 1/x^2 range weighting of time-of-flight acquisition.
    pub range_squared: bool,
}

impl ForwardModel {
    /// Two opposite views along `axis` (forward and reverse cumulative sums).
    pub fn two_view(axis: usize) -> Self {
        ForwardModel {
            operators: vec![PathOperator::forward(axis), PathOperator::reverse(axis)],
            scale: 1.0,
            range_squared: false,
        }
    }

    /// Mono-view model along `axis`.
    pub fn single_view(axis: usize) -> Self {
        ForwardModel {
            operators: vec![PathOperator::forward(axis)],
            scale: 1.0,
            range_squared: false,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_range_squared(mut self, on: bool) -> Self {
        self.range_squared = on;
        self
    }

    pub fn views(&self) -> usize {
        self.operators.len()
    }

    /// Axis shared by the path operators.
    pub fn path_axis(&self) -> usize {
        self.operators[0].axis
    }

    fn validate(&self, dims: &[usize]) -> Result<()> {
        if self.operators.is_empty() {
            return Err(Error::validation("forward model needs at least one view".to_string()));
        }
        if !(self.scale.is_finite() && self.scale > 0.0) {
            return Err(Error::validation(format!("scale must be > 0, got {}", self.scale)));
        }
        for op in &self.operators {
            if op.axis >= dims.len() {
                return Err(Error::validation(format!(
                    "operator axis {} out of range for dims {dims:?}",
                    op.axis
                )));
            }
        }
        Ok(())
    }

    /// Per-pixel factor `C * w[i]`; `w[i] = 1/(i_axis + 1/2)^2` when range
    /// weighting is on (the half-pixel offset avoids the singular origin).
    pub fn pixel_weights(&self, dims: &[usize]) -> Result<Vec<f64>> {
        self.validate(dims)?;
        let n: usize = dims.iter().product();
        let mut w = vec![self.scale; n];
        if self.range_squared {
            let axis = self.path_axis();
            let extent = dims[axis];
            let stride: usize = dims[axis + 1..].iter().product();
            let block = extent * stride;
            parallel::for_each_block_mut(&mut w, block, |_, b| {
                for t in 0..extent {
                    let r = t as f64 + 0.5;
                    let f = 1.0 / (r * r);
                    for v in &mut b[t * stride..(t + 1) * stride] {
                        *v *= f;
                    }
                }
            });
        }
        Ok(w)
    }
}

/// Noiseless view intensities `lambda_j = C w beta exp(-A_j alpha)`.
pub fn intensity(
    model: &ForwardModel,
    beta: &ScalarField,
    alpha: &ScalarField,
) -> Result<Vec<ScalarField>> {
    if !beta.same_dims(alpha) {
        return Err(Error::dim_mismatch(beta.dims(), alpha.dims()));
    }
    beta.require_nonnegative("beta")?;
    alpha.require_nonnegative("alpha")?;
    let w = model.pixel_weights(beta.dims())?;
    let mut out = Vec::with_capacity(model.views());
    for op in &model.operators {
        let mut lam = op.apply(alpha)?;
        let beta_data = beta.data();
        parallel::for_each_chunk_mut(lam.data_mut(), |ci, chunk| {
            let base = ci * CHUNK;
            for (k, v) in chunk.iter_mut().enumerate() {
                let i = base + k;
                *v = w[i] * beta_data[i] * (-*v).exp();
            }
        });
        out.push(lam);
    }
    Ok(out)
}

/// Independent Poisson draws per pixel, deterministic in `seed`.
///
/// The pixel index space is split into fixed chunks; each chunk samples from
/// its own counter-based stream derived from `(seed, chunk index)`, so
/// parallel and sequential execution produce identical counts.
pub fn poisson_sample(lam: &ScalarField, seed: u64) -> Result<ScalarField> {
    lam.require_nonnegative("intensity")?;
    let mut out = lam.clone();
    let result = parallel::try_for_each_chunk_mut(out.data_mut(), |ci, chunk| {
        let mut rng = stream_rng(seed, ci as u64);
        for v in chunk.iter_mut() {
            *v = poisson_draw(&mut rng, *v)?;
        }
        Ok(())
    });
    result?;
    Ok(out)
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Switch point between inversion-by-search and transformed rejection.
const POISSON_SMALL: f64 = 30.0;

fn poisson_draw(rng: &mut ChaCha8Rng, lam: f64) -> Result<f64> {
    if lam == 0.0 {
        return Ok(0.0);
    }
    if lam < POISSON_SMALL {
        // inversion by sequential search over the pmf
        let u: f64 = rng.gen();
        let mut k = 0u64;
        let mut p = (-lam).exp();
        let mut cum = p;
        while u > cum {
            k += 1;
            p *= lam / k as f64;
            cum += p;
            if k > 400 {
                break; // cumulative tail below representable mass
            }
        }
        Ok(k as f64)
    } else {
        poisson_ptrs(rng, lam)
    }
}

/// Transformed-rejection Poisson sampler for lam >= 30 (Hoermann's PTRS).
fn poisson_ptrs(rng: &mut ChaCha8Rng, lam: f64) -> Result<f64> {
    let slam = lam.sqrt();
    let loglam = lam.ln();
    let b = 0.931 + 2.53 * slam;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    for _ in 0..10_000 {
        let u: f64 = rng.gen::<f64>() - 0.5;
        let v: f64 = rng.gen();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + lam + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return Ok(k);
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let ik = k as u64;
        if (v * inv_alpha / (a / (us * us) + b)).ln()
            <= k * loglam - lam - ln_factorial(ik)
        {
            return Ok(k);
        }
    }
    Err(Error::numerical(format!("poisson sampler failed to accept for lambda = {lam}")))
}

/// ln(k!) with an exact table for small k and a Stirling series above.
fn ln_factorial(k: u64) -> f64 {
    const TABLE: [f64; 21] = [
        1.0,
        1.0,
        2.0,
        6.0,
        24.0,
        120.0,
        720.0,
        5040.0,
        40320.0,
        362880.0,
        3628800.0,
        39916800.0,
        479001600.0,
        6227020800.0,
        87178291200.0,
        1307674368000.0,
        20922789888000.0,
        355687428096000.0,
        6402373705728000.0,
        121645100408832000.0,
        2432902008176640000.0,
    ];
    if k <= 20 {
        return TABLE[k as usize].ln();
    }
    let x = k as f64;
    let x2 = x * x;
    (x + 0.5) * x.ln() - x + 0.5 * (2.0 * std::f64::consts::PI).ln()
        + 1.0 / (12.0 * x)
        - 1.0 / (360.0 * x * x2)
        + 1.0 / (1260.0 * x * x2 * x2)
}

/// Piecewise-constant phantom families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    Blocks,
    Disks,
    Stripes,
}

impl FromStr for PhantomKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "blocks" => Ok(PhantomKind::Blocks),
            "disks" => Ok(PhantomKind::Disks),
            "stripes" => Ok(PhantomKind::Stripes),
            other => Err(Error::validation(format!(
                "unknown phantom kind '{other}' (expected blocks, disks or stripes)"
            ))),
        }
    }
}

/// Generate a density/attenuation pair: the density follows `kind`, the
/// attenuation is an independent coarse block pattern. Both fields span
/// exactly [0, beta_max] and [0, alpha_max].
pub fn make_phantom(
    kind: PhantomKind,
    dims: &[usize],
    beta_max: f64,
    alpha_max: f64,
    seed: u64,
) -> Result<(ScalarField, ScalarField)> {
    if !(beta_max.is_finite() && beta_max > 0.0 && alpha_max.is_finite() && alpha_max > 0.0) {
        return Err(Error::validation(
            "beta_max and alpha_max must be positive and finite".to_string(),
        ));
    }
    let mut beta = ScalarField::zeros(dims)?;
    let mut rng_beta = stream_rng(seed, (1u64 << 32) | 0);
    match kind {
        PhantomKind::Blocks => fill_blocks(&mut beta, &mut rng_beta, 4),
        PhantomKind::Disks => fill_disks(&mut beta, &mut rng_beta),
        PhantomKind::Stripes => fill_stripes(&mut beta, &mut rng_beta),
    }
    normalize_to_range(&mut beta, beta_max);

    let mut alpha = ScalarField::zeros(dims)?;
    let mut rng_alpha = stream_rng(seed, (1u64 << 32) | 1);
    fill_blocks(&mut alpha, &mut rng_alpha, 8);
    normalize_to_range(&mut alpha, alpha_max);
    Ok((beta, alpha))
}

/// Per-axis block count: extent/`divisor`, clamped to [2, 8].
fn block_counts(dims: &[usize], divisor: usize) -> Vec<usize> {
    dims.iter()
        .map(|&e| (e / divisor).clamp(2, 8).min(e))
        .collect()
}

fn fill_blocks(field: &mut ScalarField, rng: &mut ChaCha8Rng, divisor: usize) {
    let dims = field.dims().to_vec();
    let counts = block_counts(&dims, divisor);
    let total_blocks: usize = counts.iter().product();
    let values: Vec<f64> = (0..total_blocks).map(|_| rng.gen::<f64>()).collect();
    for (i, v) in field.data_mut().iter_mut().enumerate() {
        let mut rem = i;
        let mut block = 0usize;
        for (k, &e) in dims.iter().enumerate() {
            let stride: usize = dims[k + 1..].iter().product();
            let idx = rem / stride;
            rem %= stride;
            block = block * counts[k] + (idx * counts[k]) / e;
        }
        *v = values[block];
    }
}

fn fill_disks(field: &mut ScalarField, rng: &mut ChaCha8Rng) {
    let dims = field.dims().to_vec();
    let min_extent = *dims.iter().min().unwrap() as f64;
    let n_disks = 2 + dims.len() * 2;
    let disks: Vec<(Vec<f64>, f64, f64)> = (0..n_disks)
        .map(|_| {
            let center: Vec<f64> = dims.iter().map(|&e| rng.gen::<f64>() * e as f64).collect();
            let radius = (0.1 + 0.2 * rng.gen::<f64>()) * min_extent;
            let value = 0.25 + 0.75 * rng.gen::<f64>();
            (center, radius, value)
        })
        .collect();
    for (i, v) in field.data_mut().iter_mut().enumerate() {
        let mut rem = i;
        let mut acc = 0.0;
        let mut coords = Vec::with_capacity(dims.len());
        for (k, _) in dims.iter().enumerate() {
            let stride: usize = dims[k + 1..].iter().product();
            coords.push((rem / stride) as f64 + 0.5);
            rem %= stride;
        }
        for (center, radius, value) in &disks {
            let d2: f64 = coords
                .iter()
                .zip(center)
                .map(|(c, m)| (c - m) * (c - m))
                .sum();
            if d2 <= radius * radius {
                acc += value;
            }
        }
        *v = acc;
    }
}

fn fill_stripes(field: &mut ScalarField, rng: &mut ChaCha8Rng) {
    let dims = field.dims().to_vec();
    let axis = dims.len() - 1;
    let extent = dims[axis];
    // alternating wide and fine bands; band values are random
    let mut band_of = Vec::with_capacity(extent);
    let mut values = Vec::new();
    let mut pos = 0usize;
    let mut fine = false;
    while pos < extent {
        let width = if fine {
            1 + (rng.gen::<f64>() * 2.0) as usize
        } else {
            4 + (rng.gen::<f64>() * 4.0) as usize
        };
        values.push(rng.gen::<f64>());
        for _ in 0..width.min(extent - pos) {
            band_of.push(values.len() - 1);
        }
        pos += width;
        fine = !fine;
    }
    let stride: usize = dims[axis + 1..].iter().product();
    for (i, v) in field.data_mut().iter_mut().enumerate() {
        let idx = (i / stride) % extent;
        *v = values[band_of[idx]];
    }
}

/// Affinely rescale so the minimum is exactly 0 and the maximum exactly
/// `max_value`.
fn normalize_to_range(field: &mut ScalarField, max_value: f64) {
    let lo = field.min();
    let hi = field.max();
    let span = hi - lo;
    if span <= 0.0 {
        // degenerate draw: keep a flat field at half amplitude
        field.data_mut().fill(0.5 * max_value);
        return;
    }
    for v in field.data_mut() {
        *v = (*v - lo) / span * max_value;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn intensity_without_attenuation_is_scaled_density() {
        let beta = ScalarField::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let alpha = ScalarField::zeros(&[3]).unwrap();
        let model = ForwardModel::two_view(0).with_scale(2.0);
        let lam = intensity(&model, &beta, &alpha).unwrap();
        for l in &lam {
            assert_eq!(l.data(), &[2.0, 4.0, 6.0]);
        }
    }

    #[test]
    fn intensity_1d_forward_example() {
        let beta = ScalarField::new(vec![3], vec![1.0, 2.0, 3.0]).unwrap();
        let alpha = ScalarField::new(vec![3], vec![2f64.ln(), 0.0, 0.0]).unwrap();
        let model = ForwardModel::single_view(0);
        let lam = intensity(&model, &beta, &alpha).unwrap();
        let got = lam[0].data();
        for (g, e) in got.iter().zip(&[0.5, 1.0, 1.5]) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn intensity_rejects_negative_input() {
        let beta = ScalarField::new(vec![2], vec![-1.0, 1.0]).unwrap();
        let alpha = ScalarField::zeros(&[2]).unwrap();
        assert!(intensity(&ForwardModel::two_view(0), &beta, &alpha).is_err());
    }

    #[test]
    fn log_ratio_identity_on_noiseless_views() {
        // log lam2 - log lam1 = (A1 - A2) alpha for positive beta
        let mut rng = stream_rng(3, 0);
        let dims = [6usize, 5];
        let n = 30;
        let beta = ScalarField::new(
            dims.to_vec(),
            (0..n).map(|_| 0.5 + rng.gen::<f64>()).collect(),
        )
        .unwrap();
        let alpha = ScalarField::new(
            dims.to_vec(),
            (0..n).map(|_| 0.1 * rng.gen::<f64>()).collect(),
        )
        .unwrap();
        let model = ForwardModel::two_view(0);
        let lam = intensity(&model, &beta, &alpha).unwrap();
        let a1 = model.operators[0].apply(&alpha).unwrap();
        let a2 = model.operators[1].apply(&alpha).unwrap();
        for i in 0..n {
            let lhs = lam[1].data()[i].ln() - lam[0].data()[i].ln();
            let rhs = a1.data()[i] - a2.data()[i];
            assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0), "pixel {i}");
        }
    }

    #[test]
    fn range_weights_use_half_offset() {
        let model = ForwardModel::single_view(0).with_range_squared(true);
        let w = model.pixel_weights(&[3]).unwrap();
        assert!((w[0] - 4.0).abs() < 1e-15);
        assert!((w[1] - 1.0 / 2.25).abs() < 1e-15);
        assert!((w[2] - 1.0 / 6.25).abs() < 1e-15);
    }

    #[test]
    fn poisson_zero_intensity_gives_zero_counts() {
        let lam = ScalarField::zeros(&[64]).unwrap();
        let s = poisson_sample(&lam, 9).unwrap();
        assert!(s.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn poisson_is_deterministic_in_seed() {
        let lam = ScalarField::constant(&[100, 10], 17.0).unwrap();
        let a = poisson_sample(&lam, 123).unwrap();
        let b = poisson_sample(&lam, 123).unwrap();
        let c = poisson_sample(&lam, 124).unwrap();
        assert_eq!(a.data(), b.data());
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn poisson_counts_are_integral() {
        let lam = ScalarField::constant(&[1000], 250.0).unwrap();
        let s = poisson_sample(&lam, 5).unwrap();
        assert!(s.data().iter().all(|&v| v >= 0.0 && v.fract() == 0.0));
    }

    #[test]
    fn poisson_moments_small_and_large_regime() {
        // 5-sigma statistical bounds on mean and variance
        for (lam0, n) in [(4.0, 100_000usize), (100.0, 100_000)] {
            let lam = ScalarField::constant(&[n], lam0).unwrap();
            let s = poisson_sample(&lam, 77).unwrap();
            let mean = s.mean();
            let var = s
                .data()
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
                / (n as f64 - 1.0);
            let mean_tol = 5.0 * (lam0 / n as f64).sqrt();
            assert!((mean - lam0).abs() < mean_tol, "mean {mean} vs {lam0}");
            let var_tol = 5.0 * lam0 * (2.0 / n as f64).sqrt() + 0.05 * lam0;
            assert!((var - lam0).abs() < var_tol, "var {var} vs {lam0}");
        }
    }

    #[test]
    fn ln_factorial_matches_direct_sum() {
        for k in [0u64, 1, 2, 5, 20, 21, 35, 100, 1000] {
            let direct: f64 = (1..=k).map(|i| (i as f64).ln()).sum();
            let got = ln_factorial(k);
            assert!(
                (got - direct).abs() <= 1e-10 * direct.max(1.0),
                "k={k}: {got} vs {direct}"
            );
        }
    }

    #[test]
    fn phantom_blocks_hits_exact_range() {
        let (beta, alpha) = make_phantom(PhantomKind::Blocks, &[8, 8], 100.0, 0.03, 1).unwrap();
        assert_eq!(beta.min(), 0.0);
        assert_eq!(beta.max(), 100.0);
        assert_eq!(alpha.min(), 0.0);
        assert_eq!(alpha.max(), 0.03);
        // piecewise constant on a 2x2 block grid: 4x4 blocks are uniform
        for bi in 0..2 {
            for bj in 0..2 {
                let v0 = beta.data()[bi * 4 * 8 + bj * 4];
                for r in 0..4 {
                    for c in 0..4 {
                        assert_eq!(beta.data()[(bi * 4 + r) * 8 + bj * 4 + c], v0);
                    }
                }
            }
        }
    }

    #[test]
    fn phantom_is_deterministic() {
        for kind in [PhantomKind::Blocks, PhantomKind::Disks, PhantomKind::Stripes] {
            let a = make_phantom(kind, &[16, 16], 10.0, 0.1, 42).unwrap();
            let b = make_phantom(kind, &[16, 16], 10.0, 0.1, 42).unwrap();
            assert_eq!(a.0.data(), b.0.data());
            assert_eq!(a.1.data(), b.1.data());
        }
    }

    #[test]
    fn phantom_kinds_are_nonnegative_with_finite_tv() {
        for kind in [PhantomKind::Blocks, PhantomKind::Disks, PhantomKind::Stripes] {
            let (beta, alpha) = make_phantom(kind, &[12, 12], 50.0, 0.5, 3).unwrap();
            assert!(beta.is_nonnegative() && alpha.is_nonnegative());
            assert!(crate::operators::total_variation(&beta).is_finite());
        }
    }

    #[test]
    fn unknown_phantom_kind_is_rejected() {
        assert!("nope".parse::<PhantomKind>().is_err());
    }
}
