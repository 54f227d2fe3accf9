//! Core raster type, binary field IO, PGM export and quality metrics.
//!
//! Fields are dense row-major rasters of `f64` in 1, 2 or 3 dimensions.
//! Axis 0 is the first listed extent; the stride of the last axis is 1.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::parallel;

const MAGIC: &[u8; 4] = b"MAEC";
const FORMAT_VERSION: u32 = 1;
const MAX_DIMS: usize = 3;

/// Dense d-dimensional raster (d in {1, 2, 3}), row-major storage.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl ScalarField {
    /// Build a field from explicit extents and row-major data.
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(Error::validation(format!(
                "data length {} does not match dims {:?} (n = {})",
                data.len(),
                dims,
                n
            )));
        }
        Ok(ScalarField { dims, data })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        Self::constant(dims, 0.0)
    }

    pub fn constant(dims: &[usize], value: f64) -> Result<Self> {
        validate_dims(dims)?;
        let n: usize = dims.iter().product();
        Ok(ScalarField {
            dims: dims.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Number of axes.
    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    /// Total number of samples.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Same extents, data replaced by `data`.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Self> {
        Self::new(self.dims.clone(), data)
    }

    pub fn same_dims(&self, other: &ScalarField) -> bool {
        self.dims == other.dims
    }

    /// Elementwise map into a new field.
    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync + Send) -> Self {
        let mut out = self.clone();
        parallel::for_each_chunk_mut(&mut out.data, |_, c| {
            for v in c {
                *v = f(*v);
            }
        });
        out
    }

    pub fn min(&self) -> f64 {
        self.data.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        parallel::sum(&self.data) / self.data.len() as f64
    }

    /// All entries finite and >= 0.
    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|v| v.is_finite() && *v >= 0.0)
    }

    /// Errs unless every entry is finite and nonnegative.
    pub fn require_nonnegative(&self, what: &str) -> Result<()> {
        if self.is_nonnegative() {
            Ok(())
        } else {
            Err(Error::validation(format!(
                "{what} must be elementwise finite and nonnegative"
            )))
        }
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() || dims.len() > MAX_DIMS {
        return Err(Error::validation(format!(
            "dimension count must be in 1..={MAX_DIMS}, got {}",
            dims.len()
        )));
    }
    if dims.iter().any(|&e| e == 0) {
        return Err(Error::validation(format!("extents must be positive, got {dims:?}")));
    }
    Ok(())
}

/// d-component vector field (one component per axis), all sharing dims.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    dims: Vec<usize>,
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::validation("vector field needs at least one component"));
        }
        let dims = components[0].dims().to_vec();
        for c in &components {
            if c.dims() != dims {
                return Err(Error::dim_mismatch(&dims, c.dims()));
            }
        }
        Ok(VectorField { dims, components })
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        let comps = (0..dims.len())
            .map(|_| ScalarField::zeros(dims))
            .collect::<Result<Vec<_>>>()?;
        Self::new(comps)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn components_mut(&mut self) -> &mut [ScalarField] {
        &mut self.components
    }
}

/// Read a field from the MAEC binary format.
///
/// Layout, all little-endian: magic `MAEC`, u32 version (= 1), u32 d,
/// d x u32 extents, then n = prod(extents) f64 samples in row-major order.
pub fn read_field(path: impl AsRef<Path>) -> Result<ScalarField> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::format(format!(
            "bad magic {:?} (expected {:?})",
            String::from_utf8_lossy(&magic),
            String::from_utf8_lossy(MAGIC)
        )));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::format(format!(
            "unsupported version {version} (expected {FORMAT_VERSION})"
        )));
    }
    let d = read_u32(&mut r)? as usize;
    if d == 0 || d > MAX_DIMS {
        return Err(Error::format(format!("dimension count {d} out of range 1..={MAX_DIMS}")));
    }
    let mut dims = Vec::with_capacity(d);
    for _ in 0..d {
        let e = read_u32(&mut r)? as usize;
        if e == 0 {
            return Err(Error::format("zero extent".to_string()));
        }
        dims.push(e);
    }
    let n: usize = dims.iter().product();
    let mut data = vec![0.0f64; n];
    let mut buf = [0u8; 8];
    for v in &mut data {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    ScalarField::new(dims, data)
}

/// Write a field in the MAEC binary format; `read_field` restores it bitwise.
pub fn write_field(field: &ScalarField, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&(field.ndim() as u32).to_le_bytes())?;
    for &e in field.dims() {
        w.write_all(&(e as u32).to_le_bytes())?;
    }
    for v in field.data() {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

/// Export a 2D field as a 16-bit binary PGM, mapping [lo, hi] to [0, 65535].
///
/// Values clamp to the range; rounding is half-up so output is identical
/// across platforms. Samples are big-endian per the PGM standard.
pub fn export_pgm(field: &ScalarField, path: impl AsRef<Path>, lo: f64, hi: f64) -> Result<()> {
    if field.ndim() != 2 {
        return Err(Error::validation(format!(
            "PGM export requires a 2D field, got {} dims",
            field.ndim()
        )));
    }
    if !(lo < hi) {
        return Err(Error::validation(format!("need lo < hi, got lo={lo}, hi={hi}")));
    }
    let (h, w) = (field.dims()[0], field.dims()[1]);
    let mut out = BufWriter::new(File::create(path.as_ref())?);
    write!(out, "P5\n{w} {h}\n65535\n")?;
    for &v in field.data() {
        let t = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
        let q = (t * 65535.0 + 0.5).floor() as u16;
        out.write_all(&q.to_be_bytes())?;
    }
    out.flush()?;
    Ok(())
}

/// Signal-to-noise ratio in decibels:
/// `10 log10(||reference||^2 / ||estimate - reference||^2)`.
///
/// Returns +inf when the estimate equals the reference exactly.
pub fn snr_db(estimate: &ScalarField, reference: &ScalarField) -> Result<f64> {
    if !estimate.same_dims(reference) {
        return Err(Error::dim_mismatch(reference.dims(), estimate.dims()));
    }
    let ref_power = parallel::norm2_sq(reference.data());
    if ref_power == 0.0 {
        return Err(Error::validation("reference is identically zero"));
    }
    let err: Vec<f64> = estimate
        .data()
        .iter()
        .zip(reference.data())
        .map(|(e, r)| e - r)
        .collect();
    let err_power = parallel::norm2_sq(&err);
    if err_power == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (ref_power / err_power).log10())
}
