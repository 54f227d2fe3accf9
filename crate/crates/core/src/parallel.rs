//! Thin execution layer: data-parallel sweeps on rayon when the `parallel`
//! feature is enabled, plain loops otherwise.
//!
//! Every reduction goes through fixed-size chunk partial sums combined in
//! chunk order, so parallel and sequential builds (and any thread count)
//! produce bitwise-identical results.

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::Result;

/// Fixed chunk length for sweeps and reductions. Part of the determinism
/// contract: changing it changes summation order and RNG stream assignment.
pub(crate) const CHUNK: usize = 4096;

/// Apply `f` to fixed-size chunks of `data`; `f` receives the chunk index.
pub(crate) fn for_each_chunk_mut<F>(data: &mut [f64], f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(CHUNK)
        .enumerate()
        .for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(CHUNK).enumerate().for_each(|(i, c)| f(i, c));
}

/// Fallible variant of [`for_each_chunk_mut`].
pub(crate) fn try_for_each_chunk_mut<F>(data: &mut [f64], f: F) -> Result<()>
where
    F: Fn(usize, &mut [f64]) -> Result<()> + Sync + Send,
{
    #[cfg(feature = "parallel")]
    return data
        .par_chunks_mut(CHUNK)
        .enumerate()
        .try_for_each(|(i, c)| f(i, c));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(CHUNK).enumerate().try_for_each(|(i, c)| f(i, c))
}

/// Apply `f` to contiguous blocks of length `block_len` (the last block may
/// be shorter only if `data.len()` is not a multiple, which callers avoid).
pub(crate) fn for_each_block_mut<F>(data: &mut [f64], block_len: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    debug_assert!(block_len > 0);
    #[cfg(feature = "parallel")]
    data.par_chunks_mut(block_len)
        .enumerate()
        .for_each(|(i, b)| f(i, b));
    #[cfg(not(feature = "parallel"))]
    data.chunks_mut(block_len).enumerate().for_each(|(i, b)| f(i, b));
}

/// Fallible sweep over aligned chunk pairs of two equal-length slices.
pub(crate) fn try_for_each_chunk_pair_mut<F>(a: &mut [f64], b: &mut [f64], f: F) -> Result<()>
where
    F: Fn(usize, &mut [f64], &mut [f64]) -> Result<()> + Sync + Send,
{
    debug_assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    return a
        .par_chunks_mut(CHUNK)
        .zip(b.par_chunks_mut(CHUNK))
        .enumerate()
        .try_for_each(|(i, (ca, cb))| f(i, ca, cb));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(CHUNK)
        .zip(b.chunks_mut(CHUNK))
        .enumerate()
        .try_for_each(|(i, (ca, cb))| f(i, ca, cb))
}

/// Sweep over aligned chunk pairs of two equal-length slices.
pub(crate) fn for_each_chunk_pair_mut<F>(a: &mut [f64], b: &mut [f64], f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64]) + Sync + Send,
{
    debug_assert_eq!(a.len(), b.len());
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(CHUNK)
        .zip(b.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(i, (ca, cb))| f(i, ca, cb));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(CHUNK)
        .zip(b.chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(i, (ca, cb))| f(i, ca, cb));
}

/// Sweep over aligned chunk triples of three equal-length slices.
pub(crate) fn for_each_chunk_triple_mut<F>(a: &mut [f64], b: &mut [f64], c: &mut [f64], f: F)
where
    F: Fn(usize, &mut [f64], &mut [f64], &mut [f64]) + Sync + Send,
{
    debug_assert!(a.len() == b.len() && b.len() == c.len());
    #[cfg(feature = "parallel")]
    a.par_chunks_mut(CHUNK)
        .zip(b.par_chunks_mut(CHUNK))
        .zip(c.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(i, ((ca, cb), cc))| f(i, ca, cb, cc));
    #[cfg(not(feature = "parallel"))]
    a.chunks_mut(CHUNK)
        .zip(b.chunks_mut(CHUNK))
        .zip(c.chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(i, ((ca, cb), cc))| f(i, ca, cb, cc));
}

#[derive(Clone, Copy)]
enum Reduce<'a> {
    Dot(&'a [f64]),
    SumSquares,
    Sum,
}

fn chunk_sums(a: &[f64], kind: Reduce<'_>) -> Vec<f64> {
    let body = |(i, ca): (usize, &[f64])| -> f64 {
        let mut s = 0.0;
        match kind {
            Reduce::Dot(b) => {
                let cb = &b[i * CHUNK..i * CHUNK + ca.len()];
                for (x, y) in ca.iter().zip(cb) {
                    s += x * y;
                }
            }
            Reduce::SumSquares => {
                for x in ca {
                    s += x * x;
                }
            }
            Reduce::Sum => {
                for x in ca {
                    s += x;
                }
            }
        }
        s
    };
    #[cfg(feature = "parallel")]
    return a.par_chunks(CHUNK).enumerate().map(body).collect();
    #[cfg(not(feature = "parallel"))]
    a.chunks(CHUNK).enumerate().map(body).collect()
}

/// Deterministic dot product (fixed-chunk partial sums, in-order combine).
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    chunk_sums(a, Reduce::Dot(b)).iter().sum()
}

/// Deterministic squared Euclidean norm.
pub(crate) fn norm2_sq(a: &[f64]) -> f64 {
    chunk_sums(a, Reduce::SumSquares).iter().sum()
}

/// Deterministic sum.
pub(crate) fn sum(a: &[f64]) -> f64 {
    chunk_sums(a, Reduce::Sum).iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dot_matches_naive_on_small_input() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 * 0.25).collect();
        let b: Vec<f64> = (0..100).map(|i| 1.0 - i as f64).collect();
        let naive: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        assert_eq!(dot(&a, &b), naive);
    }

    #[test]
    fn chunked_sum_is_stable_across_calls() {
        let a: Vec<f64> = (0..3 * CHUNK + 17).map(|i| (i as f64).sin()).collect();
        assert_eq!(norm2_sq(&a), norm2_sq(&a));
        assert!((norm2_sq(&a) - dot(&a, &a)).abs() == 0.0);
    }
}
