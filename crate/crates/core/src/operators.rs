//! Discrete integral and differential operators.
//!
//! Path operators realize inclusive cumulative sums along one axis, in either
//! direction, scaled by a constant: the 1D forward operator is the lower
//! triangular all-ones matrix with unit diagonal. Gradient and divergence use
//! forward differences with a zero last difference (Neumann boundary) and the
//! matching negative-adjoint divergence.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{ScalarField, VectorField};
use crate::parallel;

/// Direction of the cumulative sum along the axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Inclusive sum from index 0 up to the pixel.
    Forward,
    /// Inclusive sum from the far end down to the pixel.
    Reverse,
}

/// Descriptor of a scaled cumulative-sum operator along one axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOperator {
    pub axis: usize,
    pub direction: Direction,
    pub scale: f64,
}

impl PathOperator {
    pub fn forward(axis: usize) -> Self {
        PathOperator {
            axis,
            direction: Direction::Forward,
            scale: 1.0,
        }
    }

    pub fn reverse(axis: usize) -> Self {
        PathOperator {
            axis,
            direction: Direction::Reverse,
            scale: 1.0,
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    fn check_axis(&self, dims: &[usize]) -> Result<()> {
        if self.axis >= dims.len() {
            return Err(Error::validation(format!(
                "axis {} out of range for {}-dimensional field",
                self.axis,
                dims.len()
            )));
        }
        Ok(())
    }

    /// y[i] = scale * inclusive sum of x along the axis up to i (forward)
    /// or from the far end down to i (reverse).
    pub fn apply(&self, x: &ScalarField) -> Result<ScalarField> {
        self.check_axis(x.dims())?;
        let mut out = x.clone();
        cumsum_in_place(x.dims(), out.data_mut(), self.axis, self.direction, self.scale);
        Ok(out)
    }

    /// Adjoint of [`apply`](Self::apply): the opposite-direction cumulative
    /// sum with the same scale.
    pub fn adjoint(&self, y: &ScalarField) -> Result<ScalarField> {
        self.check_axis(y.dims())?;
        let mut out = y.clone();
        cumsum_in_place(y.dims(), out.data_mut(), self.axis, flip(self.direction), self.scale);
        Ok(out)
    }

    /// In-place slice form of [`apply`](Self::apply).
    pub fn apply_in_place(&self, dims: &[usize], data: &mut [f64]) -> Result<()> {
        self.check_axis(dims)?;
        cumsum_in_place(dims, data, self.axis, self.direction, self.scale);
        Ok(())
    }

    /// In-place slice form of [`adjoint`](Self::adjoint).
    pub fn adjoint_in_place(&self, dims: &[usize], data: &mut [f64]) -> Result<()> {
        self.check_axis(dims)?;
        cumsum_in_place(dims, data, self.axis, flip(self.direction), self.scale);
        Ok(())
    }
}

fn flip(d: Direction) -> Direction {
    match d {
        Direction::Forward => Direction::Reverse,
        Direction::Reverse => Direction::Forward,
    }
}

/// Extent of `axis` and the contiguous stride below it. A block of
/// `extent * stride` consecutive samples holds `stride` interleaved lines.
fn axis_layout(dims: &[usize], axis: usize) -> (usize, usize) {
    let extent = dims[axis];
    let stride: usize = dims[axis + 1..].iter().product();
    (extent, stride)
}

fn cumsum_in_place(dims: &[usize], data: &mut [f64], axis: usize, dir: Direction, scale: f64) {
    let (extent, stride) = axis_layout(dims, axis);
    let block = extent * stride;
    parallel::for_each_block_mut(data, block, |_, b| {
        match dir {
            Direction::Forward => {
                for t in 1..extent {
                    let (prev, cur) = b.split_at_mut(t * stride);
                    let prev = &prev[(t - 1) * stride..];
                    for k in 0..stride {
                        cur[k] += prev[k];
                    }
                }
            }
            Direction::Reverse => {
                for t in (0..extent.saturating_sub(1)).rev() {
                    let (cur, next) = b.split_at_mut((t + 1) * stride);
                    let cur = &mut cur[t * stride..];
                    for k in 0..stride {
                        cur[k] += next[k];
                    }
                }
            }
        }
        if scale != 1.0 {
            for v in b.iter_mut() {
                *v *= scale;
            }
        }
    });
}

/// Forward-difference gradient with zero last difference along each axis.
pub fn grad(x: &ScalarField) -> VectorField {
    let dims = x.dims().to_vec();
    let n = x.len();
    let mut components = Vec::with_capacity(dims.len());
    for axis in 0..dims.len() {
        let mut out = vec![0.0; n];
        grad_axis_into(&dims, axis, x.data(), &mut out);
        components.push(ScalarField::new(dims.clone(), out).expect("same dims"));
    }
    VectorField::new(components).expect("components share dims")
}

/// Negative adjoint of [`grad`]: `<grad x, v> = -<x, div v>` for all x, v.
pub fn div(v: &VectorField) -> Result<ScalarField> {
    if v.components().len() != v.dims().len() {
        return Err(Error::validation(format!(
            "divergence needs one component per axis: {} components for {} dims",
            v.components().len(),
            v.dims().len()
        )));
    }
    let dims = v.dims().to_vec();
    let mut out = vec![0.0; v.components()[0].len()];
    for (axis, comp) in v.components().iter().enumerate() {
        div_axis_accumulate(&dims, axis, comp.data(), &mut out);
    }
    ScalarField::new(dims, out)
}

/// Per-axis forward difference of `x` into `out` (out is fully overwritten).
pub(crate) fn grad_axis_into(dims: &[usize], axis: usize, x: &[f64], out: &mut [f64]) {
    let (extent, stride) = axis_layout(dims, axis);
    let block = extent * stride;
    parallel::for_each_block_mut(out, block, |bi, ob| {
        let xb = &x[bi * block..bi * block + ob.len()];
        for t in 0..extent {
            let row = &mut ob[t * stride..(t + 1) * stride];
            if t + 1 < extent {
                let cur = &xb[t * stride..(t + 1) * stride];
                let next = &xb[(t + 1) * stride..(t + 2) * stride];
                for k in 0..stride {
                    row[k] = next[k] - cur[k];
                }
            } else {
                row.fill(0.0);
            }
        }
    });
}

/// Accumulate the axis contribution of the divergence into `out`
/// (`out[0] += v[0]`, interior `v[t] - v[t-1]`, last `-v[last-1]`).
pub(crate) fn div_axis_accumulate(dims: &[usize], axis: usize, v: &[f64], out: &mut [f64]) {
    let (extent, stride) = axis_layout(dims, axis);
    let block = extent * stride;
    if extent == 1 {
        return;
    }
    parallel::for_each_block_mut(out, block, |bi, ob| {
        let vb = &v[bi * block..bi * block + ob.len()];
        for t in 0..extent {
            let row = &mut ob[t * stride..(t + 1) * stride];
            if t == 0 {
                let cur = &vb[..stride];
                for k in 0..stride {
                    row[k] += cur[k];
                }
            } else if t + 1 < extent {
                let cur = &vb[t * stride..(t + 1) * stride];
                let prev = &vb[(t - 1) * stride..t * stride];
                for k in 0..stride {
                    row[k] += cur[k] - prev[k];
                }
            } else {
                let prev = &vb[(t - 1) * stride..t * stride];
                for k in 0..stride {
                    row[k] -= prev[k];
                }
            }
        }
    });
}

/// Isotropic total variation: the sum over pixels of the Euclidean norm of
/// the discrete gradient.
pub fn total_variation(x: &ScalarField) -> f64 {
    let g = grad(x);
    let n = x.len();
    let comps: Vec<&[f64]> = g.components().iter().map(|c| c.data()).collect();
    let mut mags = vec![0.0; n];
    parallel::for_each_chunk_mut(&mut mags, |ci, chunk| {
        let base = ci * parallel::CHUNK;
        for (k, m) in chunk.iter_mut().enumerate() {
            let i = base + k;
            let mut s = 0.0;
            for c in &comps {
                s += c[i] * c[i];
            }
            *m = s.sqrt();
        }
    });
    parallel::sum(&mags)
}

/// Lower estimate of the operator 2-norm of a linear map given by
/// `apply`/`adjoint` on length-`n` vectors, via power iteration on A^T A.
///
/// The returned Rayleigh-quotient estimates are nondecreasing in the
/// iteration count; the result is deterministic for a fixed seed.
pub fn power_iteration(
    apply: &dyn Fn(&[f64]) -> Vec<f64>,
    adjoint: &dyn Fn(&[f64]) -> Vec<f64>,
    n: usize,
    iters: usize,
    seed: u64,
) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() - 0.5).collect();
    let nv = parallel::norm2_sq(&v).sqrt();
    if nv == 0.0 {
        return 0.0;
    }
    v.iter_mut().for_each(|x| *x /= nv);
    let mut sigma = 0.0;
    for _ in 0..iters.max(1) {
        let av = apply(&v);
        sigma = parallel::norm2_sq(&av).sqrt();
        let mut w = adjoint(&av);
        let nw = parallel::norm2_sq(&w).sqrt();
        if nw == 0.0 {
            return 0.0;
        }
        w.iter_mut().for_each(|x| *x /= nw);
        v = w;
    }
    sigma
}
