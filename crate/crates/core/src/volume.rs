//! Dense 3-D scalar volumes with world-coordinate access.
//!
//! Data is stored x-fastest with anisotropic spacing in millimetres. All
//! public operations take positions in world coordinates (mm); voxel indices
//! never leak past this module. Volumes are immutable after construction, so
//! concurrent reads are safe.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// 3-D scalar grid with spacing and origin in millimetres.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    dims: [usize; 3],
    spacing: [f64; 3],
    origin: [f64; 3],
    data: Vec<f64>,
}

/// The six unique entries of a symmetric 3x3 matrix of second derivatives,
/// in units of response per mm^2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMat3 {
    pub xx: f64,
    pub yy: f64,
    pub zz: f64,
    pub xy: f64,
    pub xz: f64,
    pub yz: f64,
}

impl SymMat3 {
    pub fn zero() -> Self {
        SymMat3 { xx: 0.0, yy: 0.0, zz: 0.0, xy: 0.0, xz: 0.0, yz: 0.0 }
    }

    pub fn matrix(&self) -> Matrix3<f64> {
        Matrix3::new(
            self.xx, self.xy, self.xz,
            self.xy, self.yy, self.yz,
            self.xz, self.yz, self.zz,
        )
    }
}

impl Volume {
    /// Builds a volume, validating dimensions, spacing and data finiteness.
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3], data: Vec<f64>) -> Result<Self> {
        let n = dims[0] * dims[1] * dims[2];
        if data.len() != n {
            return Err(Error::InvalidArgument(format!(
                "data length {} does not match dims {:?} ({} voxels)",
                data.len(),
                dims,
                n
            )));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "spacing must be strictly positive, got {spacing:?}"
            )));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteData);
        }
        Ok(Volume { dims, spacing, origin, data })
    }

    pub fn zeros(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self> {
        Volume::new(dims, spacing, origin, vec![0.0; dims[0] * dims[1] * dims[2]])
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i < self.dims[0] && j < self.dims[1] && k < self.dims[2]);
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    /// World position of a voxel center.
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Vector3<f64> {
        Vector3::new(
            self.origin[0] + i as f64 * self.spacing[0],
            self.origin[1] + j as f64 * self.spacing[1],
            self.origin[2] + k as f64 * self.spacing[2],
        )
    }

    /// Continuous voxel coordinates of a world point.
    pub fn world_to_voxel(&self, p: &Vector3<f64>) -> Vector3<f64> {
        Vector3::new(
            (p.x - self.origin[0]) / self.spacing[0],
            (p.y - self.origin[1]) / self.spacing[1],
            (p.z - self.origin[2]) / self.spacing[2],
        )
    }

    /// Replaces the voxel data, keeping grid geometry. Lengths must match.
    pub fn with_data(&self, data: Vec<f64>) -> Result<Volume> {
        Volume::new(self.dims, self.spacing, self.origin, data)
    }

    /// Reads a volume from a MetaImage-subset header and its raw file.
    ///
    /// Required keys: `ObjectType=Image`, `NDims=3`, `DimSize`,
    /// `ElementSpacing`, `ElementType` (MET_FLOAT | MET_SHORT | MET_UCHAR),
    /// `ElementDataFile` (path relative to the header). `Offset` is optional
    /// and defaults to the world origin. Raw data is little-endian, x-fastest.
    pub fn load(path: &Path) -> Result<Volume> {
        let text = fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let header = parse_header(path, &text)?;

        let raw_path = path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(&header.data_file);
        let raw = fs::read(&raw_path).map_err(|source| Error::Io {
            path: raw_path.clone(),
            source,
        })?;

        let n = header.dims[0] * header.dims[1] * header.dims[2];
        let expected = n as u64 * header.element_type.size() as u64;
        if raw.len() as u64 != expected {
            return Err(Error::SizeMismatch { expected, actual: raw.len() as u64 });
        }

        let data: Vec<f64> = match header.element_type {
            ElementType::Float => raw
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
                .collect(),
            ElementType::Short => raw
                .chunks_exact(2)
                .map(|b| i16::from_le_bytes([b[0], b[1]]) as f64)
                .collect(),
            ElementType::Uchar => raw.iter().map(|&b| b as f64).collect(),
        };

        Volume::new(header.dims, header.spacing, header.offset, data)
    }

    /// Writes `<prefix>.mhd` and `<prefix>.raw` (MET_FLOAT, little-endian).
    pub fn save(&self, prefix: &Path) -> Result<()> {
        let mhd_path = prefix.with_extension("mhd");
        let raw_path = prefix.with_extension("raw");
        let raw_name = raw_path
            .file_name()
            .ok_or_else(|| Error::InvalidArgument(format!("bad output prefix {prefix:?}")))?
            .to_string_lossy()
            .into_owned();

        let header = format!(
            "ObjectType = Image\n\
             NDims = 3\n\
             DimSize = {} {} {}\n\
             ElementSpacing = {} {} {}\n\
             Offset = {} {} {}\n\
             ElementType = MET_FLOAT\n\
             ElementDataFile = {}\n",
            self.dims[0], self.dims[1], self.dims[2],
            self.spacing[0], self.spacing[1], self.spacing[2],
            self.origin[0], self.origin[1], self.origin[2],
            raw_name,
        );
        fs::write(&mhd_path, header).map_err(|source| Error::Io { path: mhd_path, source })?;

        let mut bytes = Vec::with_capacity(self.data.len() * 4);
        for &v in &self.data {
            bytes.write_all(&(v as f32).to_le_bytes()).expect("vec write");
        }
        fs::write(&raw_path, bytes).map_err(|source| Error::Io { path: raw_path, source })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ElementType {
    Float,
    Short,
    Uchar,
}

impl ElementType {
    fn size(self) -> usize {
        match self {
            ElementType::Float => 4,
            ElementType::Short => 2,
            ElementType::Uchar => 1,
        }
    }
}

struct MhdHeader {
    dims: [usize; 3],
    spacing: [f64; 3],
    offset: [f64; 3],
    element_type: ElementType,
    data_file: PathBuf,
}

fn parse_header(path: &Path, text: &str) -> Result<MhdHeader> {
    let err = |reason: String| Error::Header { path: path.to_path_buf(), reason };

    let mut fields = std::collections::HashMap::new();
    for line in text.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("line without '=': {line:?}")))?;
        fields.insert(key.trim().to_string(), value.trim().to_string());
    }

    let get = |key: &str| {
        fields
            .get(key)
            .cloned()
            .ok_or_else(|| err(format!("missing required key {key}")))
    };

    let object_type = get("ObjectType")?;
    if object_type != "Image" {
        return Err(err(format!("unsupported ObjectType {object_type}")));
    }
    let ndims = get("NDims")?;
    if ndims != "3" {
        return Err(err(format!("unsupported NDims {ndims}")));
    }

    let dims_v = parse_triple::<usize>(&get("DimSize")?)
        .ok_or_else(|| err("DimSize must be three positive integers".into()))?;
    if dims_v.iter().any(|&d| d == 0) {
        return Err(err("DimSize components must be positive".into()));
    }

    let spacing = parse_triple::<f64>(&get("ElementSpacing")?)
        .ok_or_else(|| err("ElementSpacing must be three floats".into()))?;
    if spacing.iter().any(|&s| !(s > 0.0)) {
        return Err(err("ElementSpacing components must be positive".into()));
    }

    let offset = match fields.get("Offset") {
        Some(v) => {
            parse_triple::<f64>(v).ok_or_else(|| err("Offset must be three floats".into()))?
        }
        None => [0.0, 0.0, 0.0],
    };

    let element_type = match get("ElementType")?.as_str() {
        "MET_FLOAT" => ElementType::Float,
        "MET_SHORT" => ElementType::Short,
        "MET_UCHAR" => ElementType::Uchar,
        other => return Err(err(format!("unsupported ElementType {other}"))),
    };

    let data_file = PathBuf::from(get("ElementDataFile")?);

    Ok(MhdHeader { dims: dims_v, spacing, offset, element_type, data_file })
}

fn parse_triple<T: std::str::FromStr>(s: &str) -> Option<[T; 3]> {
    let mut it = s.split_whitespace().map(|t| t.parse::<T>().ok());
    let a = it.next()??;
    let b = it.next()??;
    let c = it.next()??;
    if it.next().is_some() {
        return None;
    }
    Some([a, b, c])
}

/// Normalized 1-D Gaussian taps truncated at four standard deviations.
fn gaussian_kernel(sigma_vox: f64) -> Vec<f64> {
    let radius = (4.0 * sigma_vox).ceil() as i64;
    let mut taps: Vec<f64> = (-radius..=radius)
        .map(|k| (-0.5 * (k as f64 / sigma_vox).powi(2)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    for t in &mut taps {
        *t /= sum;
    }
    taps
}

/// Separable Gaussian smoothing with per-axis kernel widths.
///
/// The per-axis standard deviation in voxels is `sigma_mm / spacing_axis`, so
/// anisotropic grids are smoothed isotropically in world units. Borders are
/// handled by edge replication.
pub fn gaussian_smooth(vol: &Volume, sigma_mm: f64) -> Result<Volume> {
    if !(sigma_mm > 0.0) || !sigma_mm.is_finite() {
        return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma_mm}")));
    }
    let dims = vol.dims;
    let mut data = vol.data.clone();
    for axis in 0..3 {
        let taps = gaussian_kernel(sigma_mm / vol.spacing[axis]);
        data = convolve_axis(&data, dims, axis, &taps);
    }
    vol.with_data(data)
}

/// 1-D convolution along one axis with clamped (edge-replicated) indices.
fn convolve_axis(src: &[f64], dims: [usize; 3], axis: usize, taps: &[f64]) -> Vec<f64> {
    let [nx, ny, _nz] = dims;
    let n_axis = dims[axis] as i64;
    let stride = match axis {
        0 => 1usize,
        1 => nx,
        _ => nx * ny,
    };
    let radius = (taps.len() / 2) as i64;

    (0..src.len())
        .into_par_iter()
        .map(|idx| {
            let i = (idx % nx) as i64;
            let j = ((idx / nx) % ny) as i64;
            let k = (idx / (nx * ny)) as i64;
            let along = [i, j, k][axis];
            let base = idx - along as usize * stride;
            let mut acc = 0.0;
            for (t, &w) in taps.iter().enumerate() {
                let pos = (along + t as i64 - radius).clamp(0, n_axis - 1) as usize;
                acc += w * src[base + pos * stride];
            }
            acc
        })
        .collect()
}

/// Trilinear interpolation in world coordinates.
///
/// The point must lie within the bounding box of voxel centers.
pub fn trilinear_sample(vol: &Volume, p: &Vector3<f64>) -> Result<f64> {
    let u = vol.world_to_voxel(p);
    let dims = vol.dims;
    for a in 0..3 {
        if u[a] < 0.0 || u[a] > (dims[a] - 1) as f64 {
            return Err(Error::OutOfBounds { point: [p.x, p.y, p.z] });
        }
    }
    let cell = |a: usize| -> (usize, f64) {
        let i0 = (u[a].floor() as usize).min(dims[a].saturating_sub(2));
        (i0, u[a] - i0 as f64)
    };
    let (i0, fx) = cell(0);
    let (j0, fy) = cell(1);
    let (k0, fz) = cell(2);
    // degenerate axes (single-voxel dimension) interpolate trivially
    let (i1, j1, k1) = (
        (i0 + 1).min(dims[0] - 1),
        (j0 + 1).min(dims[1] - 1),
        (k0 + 1).min(dims[2] - 1),
    );

    let v = |i, j, k| vol.get(i, j, k);
    let c00 = v(i0, j0, k0) * (1.0 - fx) + v(i1, j0, k0) * fx;
    let c10 = v(i0, j1, k0) * (1.0 - fx) + v(i1, j1, k0) * fx;
    let c01 = v(i0, j0, k1) * (1.0 - fx) + v(i1, j0, k1) * fx;
    let c11 = v(i0, j1, k1) * (1.0 - fx) + v(i1, j1, k1) * fx;
    let c0 = c00 * (1.0 - fy) + c10 * fy;
    let c1 = c01 * (1.0 - fy) + c11 * fy;
    Ok(c0 * (1.0 - fz) + c1 * fz)
}

/// Hessian of the sigma-smoothed volume at a world point.
///
/// Smooths the whole volume at `sigma_mm` first; use [`hessian_on_smoothed`]
/// when the smoothed volume is already available.
pub fn hessian_at(vol: &Volume, p: &Vector3<f64>, sigma_mm: f64) -> Result<SymMat3> {
    let smoothed = gaussian_smooth(vol, sigma_mm)?;
    hessian_on_smoothed(&smoothed, p)
}

/// Hessian of an already-smoothed volume at a world point.
///
/// Second derivatives are central differences on the grid, trilinearly
/// interpolated to the query point. The point needs a one-voxel margin.
pub fn hessian_on_smoothed(sm: &Volume, p: &Vector3<f64>) -> Result<SymMat3> {
    let u = sm.world_to_voxel(p);
    let dims = sm.dims;
    for a in 0..3 {
        if dims[a] < 3 || u[a] < 1.0 || u[a] > (dims[a] - 2) as f64 {
            return Err(Error::OutOfBounds { point: [p.x, p.y, p.z] });
        }
    }
    let cell = |a: usize| -> (usize, f64) {
        let i0 = (u[a].floor() as usize).min(dims[a] - 3).max(1);
        (i0, u[a] - i0 as f64)
    };
    let (i0, fx) = cell(0);
    let (j0, fy) = cell(1);
    let (k0, fz) = cell(2);

    let [sx, sy, sz] = sm.spacing;
    let v = |i: usize, j: usize, k: usize| sm.get(i, j, k);
    let node = |i: usize, j: usize, k: usize| -> SymMat3 {
        let c = v(i, j, k);
        SymMat3 {
            xx: (v(i + 1, j, k) - 2.0 * c + v(i - 1, j, k)) / (sx * sx),
            yy: (v(i, j + 1, k) - 2.0 * c + v(i, j - 1, k)) / (sy * sy),
            zz: (v(i, j, k + 1) - 2.0 * c + v(i, j, k - 1)) / (sz * sz),
            xy: (v(i + 1, j + 1, k) - v(i + 1, j - 1, k) - v(i - 1, j + 1, k)
                + v(i - 1, j - 1, k))
                / (4.0 * sx * sy),
            xz: (v(i + 1, j, k + 1) - v(i + 1, j, k - 1) - v(i - 1, j, k + 1)
                + v(i - 1, j, k - 1))
                / (4.0 * sx * sz),
            yz: (v(i, j + 1, k + 1) - v(i, j + 1, k - 1) - v(i, j - 1, k + 1)
                + v(i, j - 1, k - 1))
                / (4.0 * sy * sz),
        }
    };

    let mut acc = SymMat3::zero();
    for (di, wi) in [(0usize, 1.0 - fx), (1, fx)] {
        for (dj, wj) in [(0usize, 1.0 - fy), (1, fy)] {
            for (dk, wk) in [(0usize, 1.0 - fz), (1, fz)] {
                let w = wi * wj * wk;
                if w == 0.0 {
                    continue;
                }
                let h = node(i0 + di, j0 + dj, k0 + dk);
                acc.xx += w * h.xx;
                acc.yy += w * h.yy;
                acc.zz += w * h.zz;
                acc.xy += w * h.xy;
                acc.xz += w * h.xz;
                acc.yz += w * h.yz;
            }
        }
    }
    Ok(acc)
}
