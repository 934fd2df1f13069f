//! Multi-scale blob detection on scalar volumes.
//!
//! Converts a volume into a sparse sequence of 4-D measurements (position and
//! radius) by locating extrema of the scale-normalized Laplacian response
//! across a configured set of scales. Each retained blob also carries the
//! selected scale and the signed response at that scale.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::volume::{self, Volume};

/// One blob measurement: position and radius in millimetres, plus detection
/// metadata. `consumed` is managed by the tracker.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub position: Vector3<f64>,
    pub radius: f64,
    pub scale: f64,
    pub response: f64,
    pub consumed: bool,
}

/// Blob polarity relative to the background.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Structures brighter than their surroundings (negative Laplacian).
    Bright,
    /// Structures darker than their surroundings (positive Laplacian).
    Dark,
    Both,
}

#[derive(Debug, Clone)]
pub struct BlobConfig {
    /// Ascending detection scales in millimetres.
    pub scales: Vec<f64>,
    /// Minimum |response| for a blob to be kept.
    pub response_threshold: f64,
    pub polarity: Polarity,
}

impl Default for BlobConfig {
    fn default() -> Self {
        BlobConfig {
            scales: vec![1.0, 2.0, 4.0, 8.0, 12.0],
            response_threshold: 0.02,
            polarity: Polarity::Bright,
        }
    }
}

impl BlobConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scales.is_empty() {
            return Err(Error::InvalidArgument("scale list is empty".into()));
        }
        if !self.scales.windows(2).all(|w| w[0] < w[1]) || self.scales[0] <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "scales must be positive and strictly ascending, got {:?}",
                self.scales
            )));
        }
        if self.response_threshold < 0.0 {
            return Err(Error::InvalidArgument("response threshold must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Scale-normalized Laplacian response at a single scale.
///
/// Returns `sigma^2 * (d2/dx2 + d2/dy2 + d2/dz2)` of the sigma-smoothed
/// volume, computed with central second differences in world units. Border
/// voxels reuse the edge-replicated neighbor.
pub fn log_response(vol: &Volume, sigma_mm: f64) -> Result<Volume> {
    let sm = volume::gaussian_smooth(vol, sigma_mm)?;
    let [nx, ny, nz] = sm.dims();
    let [sx, sy, sz] = sm.spacing();
    let s2 = sigma_mm * sigma_mm;
    let data = sm.data();

    let out: Vec<f64> = (0..data.len())
        .into_par_iter()
        .map(|idx| {
            let i = idx % nx;
            let j = (idx / nx) % ny;
            let k = idx / (nx * ny);
            let c = data[idx];
            let at = |i: usize, j: usize, k: usize| data[i + nx * (j + ny * k)];
            let xm = at(i.saturating_sub(1), j, k);
            let xp = at((i + 1).min(nx - 1), j, k);
            let ym = at(i, j.saturating_sub(1), k);
            let yp = at(i, (j + 1).min(ny - 1), k);
            let zm = at(i, j, k.saturating_sub(1));
            let zp = at(i, j, (k + 1).min(nz - 1));
            s2 * ((xp - 2.0 * c + xm) / (sx * sx)
                + (yp - 2.0 * c + ym) / (sy * sy)
                + (zp - 2.0 * c + zm) / (sz * sz))
        })
        .collect();

    sm.with_data(out)
}

/// Detects blobs across all configured scales.
///
/// A voxel is a candidate when its |response| is a strict local maximum over
/// the 3x3x3 spatial neighborhood and over adjacent scales at the same voxel,
/// with the response sign matching the configured polarity. Candidates below
/// the response threshold are dropped. The blob radius is `sqrt(3) * scale`.
///
/// The returned list is sorted by scale descending, then |response|
/// descending, then (z, y, x) position ascending, so reruns on identical
/// input produce identical output.
pub fn detect_blobs(vol: &Volume, cfg: &BlobConfig) -> Result<Vec<Measurement>> {
    cfg.validate()?;
    let [nx, ny, nz] = vol.dims();
    if nx < 3 || ny < 3 || nz < 3 {
        return Err(Error::InvalidArgument(format!(
            "volume {:?} too small for blob detection",
            vol.dims()
        )));
    }

    let responses: Vec<Volume> = cfg
        .scales
        .par_iter()
        .map(|&s| log_response(vol, s))
        .collect::<Result<_>>()?;

    let mut blobs = Vec::new();
    for (si, resp) in responses.iter().enumerate() {
        let data = resp.data();
        let at = |i: usize, j: usize, k: usize| data[i + nx * (j + ny * k)];
        for k in 1..nz - 1 {
            for j in 1..ny - 1 {
                for i in 1..nx - 1 {
                    let r = at(i, j, k);
                    let a = r.abs();
                    if a < cfg.response_threshold {
                        continue;
                    }
                    let sign_ok = match cfg.polarity {
                        Polarity::Bright => r < 0.0,
                        Polarity::Dark => r > 0.0,
                        Polarity::Both => true,
                    };
                    if !sign_ok {
                        continue;
                    }
                    let idx = i + nx * (j + ny * k);
                    if si > 0 && a <= responses[si - 1].data()[idx].abs() {
                        continue;
                    }
                    if si + 1 < responses.len() && a <= responses[si + 1].data()[idx].abs() {
                        continue;
                    }
                    let mut strict_max = true;
                    'nb: for dk in -1i64..=1 {
                        for dj in -1i64..=1 {
                            for di in -1i64..=1 {
                                if di == 0 && dj == 0 && dk == 0 {
                                    continue;
                                }
                                let n = at(
                                    (i as i64 + di) as usize,
                                    (j as i64 + dj) as usize,
                                    (k as i64 + dk) as usize,
                                )
                                .abs();
                                if a <= n {
                                    strict_max = false;
                                    break 'nb;
                                }
                            }
                        }
                    }
                    if !strict_max {
                        continue;
                    }
                    let scale = cfg.scales[si];
                    blobs.push(Measurement {
                        position: vol.voxel_center(i, j, k),
                        radius: 3f64.sqrt() * scale,
                        scale,
                        response: r,
                        consumed: false,
                    });
                }
            }
        }
    }

    blobs.sort_by(|a, b| {
        b.scale
            .partial_cmp(&a.scale)
            .unwrap()
            .then(b.response.abs().partial_cmp(&a.response.abs()).unwrap())
            .then(a.position.z.partial_cmp(&b.position.z).unwrap())
            .then(a.position.y.partial_cmp(&b.position.y).unwrap())
            .then(a.position.x.partial_cmp(&b.position.x).unwrap())
    });
    Ok(blobs)
}

/// Tube axis at a measurement: the Hessian eigenvector with the smallest
/// absolute eigenvalue, canonically signed (first nonzero component positive).
///
/// Smooths the volume at the measurement's scale; use
/// [`principal_axis_on_smoothed`] when that volume is already cached.
pub fn principal_axis(vol: &Volume, m: &Measurement) -> Result<Vector3<f64>> {
    let h = volume::hessian_at(vol, &m.position, m.scale)?;
    axis_from_hessian(&h)
}

/// As [`principal_axis`], but on a pre-smoothed volume at the blob's scale.
pub fn principal_axis_on_smoothed(smoothed: &Volume, m: &Measurement) -> Result<Vector3<f64>> {
    let h = volume::hessian_on_smoothed(smoothed, &m.position)?;
    axis_from_hessian(&h)
}

fn axis_from_hessian(h: &crate::volume::SymMat3) -> Result<Vector3<f64>> {
    let eig = h.matrix().symmetric_eigen();
    let mut best = 0;
    for i in 1..3 {
        if eig.eigenvalues[i].abs() < eig.eigenvalues[best].abs() {
            best = i;
        }
    }
    if eig.eigenvalues.iter().all(|l| l.abs() < 1e-12) {
        return Err(Error::IsotropicHessian);
    }
    let mut axis: Vector3<f64> = eig.eigenvectors.column(best).into();
    axis /= axis.norm();
    for c in [axis.x, axis.y, axis.z] {
        if c.abs() > 1e-12 {
            if c < 0.0 {
                axis = -axis;
            }
            break;
        }
    }
    Ok(axis)
}
