//! Centerline distance metrics and a region-growing baseline.
//!
//! Distances are exact nearest neighbors computed through a uniform spatial
//! hash grid; the grid only accelerates the search and never changes the
//! answer.

use std::collections::HashMap;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::phantom::PhantomTree;
use crate::tracker::Branch;
use crate::volume::Volume;

/// Directed centerline distances in millimetres.
///
/// `d_fp` is the mean distance from segmentation points to their nearest
/// reference point, `d_fn` the reverse, and `d_err` their average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenterlineMetrics {
    pub d_fp: f64,
    pub d_fn: f64,
    pub d_err: f64,
}

/// Exact nearest-neighbor index over a fixed point set.
pub struct PointGrid {
    cell: f64,
    inv_cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
    cell_min: (i64, i64, i64),
    cell_max: (i64, i64, i64),
    points: Vec<Vector3<f64>>,
}

impl PointGrid {
    /// Builds the grid with a cell size near the median nearest-point spacing
    /// (estimated from a coarse sample) so typical queries touch few cells.
    pub fn build(points: &[Vector3<f64>]) -> Result<PointGrid> {
        if points.is_empty() {
            return Err(Error::EmptyPointSet("cannot index an empty point set".into()));
        }
        let cell = estimate_cell(points).max(1e-6);
        let inv_cell = 1.0 / cell;
        let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        let mut cell_min = (i64::MAX, i64::MAX, i64::MAX);
        let mut cell_max = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let key = key_of(p, inv_cell);
            cell_min = (cell_min.0.min(key.0), cell_min.1.min(key.1), cell_min.2.min(key.2));
            cell_max = (cell_max.0.max(key.0), cell_max.1.max(key.1), cell_max.2.max(key.2));
            cells.entry(key).or_default().push(i as u32);
        }
        Ok(PointGrid { cell, inv_cell, cells, cell_min, cell_max, points: points.to_vec() })
    }

    /// Distance from `q` to the nearest indexed point (exact).
    ///
    /// Scans cells in expanding Chebyshev rings. A cell at ring `r` cannot
    /// hold a point closer than `(r - 1) * cell`, so once that floor reaches
    /// the best distance found the answer is certified. The ring that covers
    /// the whole populated bounding box is always sufficient.
    pub fn nearest_distance(&self, q: &Vector3<f64>) -> f64 {
        let (cx, cy, cz) = key_of(q, self.inv_cell);
        let last_ring = [
            (cx - self.cell_min.0).abs(),
            (self.cell_max.0 - cx).abs(),
            (cy - self.cell_min.1).abs(),
            (self.cell_max.1 - cy).abs(),
            (cz - self.cell_min.2).abs(),
            (self.cell_max.2 - cz).abs(),
        ]
        .into_iter()
        .max()
        .unwrap();

        let mut best = f64::INFINITY;
        for ring in 0..=last_ring {
            if best <= (ring - 1).max(0) as f64 * self.cell {
                break;
            }
            let mut visit = |dx: i64, dy: i64, dz: i64| {
                if let Some(indices) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                    for &i in indices {
                        let d = (self.points[i as usize] - q).norm();
                        if d < best {
                            best = d;
                        }
                    }
                }
            };
            if ring == 0 {
                visit(0, 0, 0);
                continue;
            }
            for dz in -ring..=ring {
                if dz.abs() == ring {
                    for dy in -ring..=ring {
                        for dx in -ring..=ring {
                            visit(dx, dy, dz);
                        }
                    }
                } else {
                    for dy in -ring..=ring {
                        if dy.abs() == ring {
                            for dx in -ring..=ring {
                                visit(dx, dy, dz);
                            }
                        } else {
                            visit(-ring, dy, dz);
                            visit(ring, dy, dz);
                        }
                    }
                }
            }
        }
        best
    }
}

fn key_of(p: &Vector3<f64>, inv_cell: f64) -> (i64, i64, i64) {
    (
        (p.x * inv_cell).floor() as i64,
        (p.y * inv_cell).floor() as i64,
        (p.z * inv_cell).floor() as i64,
    )
}

/// Median nearest-neighbor spacing over a deterministic subsample.
fn estimate_cell(points: &[Vector3<f64>]) -> f64 {
    let n = points.len();
    if n == 1 {
        return 1.0;
    }
    let stride = (n / 256).max(1);
    let sample: Vec<&Vector3<f64>> = points.iter().step_by(stride).collect();
    let mut nearest: Vec<f64> = sample
        .iter()
        .map(|p| {
            let mut best = f64::INFINITY;
            for q in &sample {
                let d = (*q - *p).norm();
                if d > 0.0 && d < best {
                    best = d;
                }
            }
            if best.is_finite() {
                best
            } else {
                1.0
            }
        })
        .collect();
    nearest.sort_by(|a, b| a.partial_cmp(b).unwrap());
    nearest[nearest.len() / 2]
}

/// Mean nearest-neighbor distances between two point sets.
pub fn centerline_distance(seg: &[Vector3<f64>], reference: &[Vector3<f64>]) -> Result<CenterlineMetrics> {
    if seg.is_empty() {
        return Err(Error::EmptyPointSet("segmentation point set is empty".into()));
    }
    if reference.is_empty() {
        return Err(Error::EmptyPointSet("reference point set is empty".into()));
    }
    let ref_grid = PointGrid::build(reference)?;
    let seg_grid = PointGrid::build(seg)?;
    let d_fp = seg.iter().map(|p| ref_grid.nearest_distance(p)).sum::<f64>() / seg.len() as f64;
    let d_fn =
        reference.iter().map(|p| seg_grid.nearest_distance(p)).sum::<f64>() / reference.len() as f64;
    Ok(CenterlineMetrics { d_fp, d_fn, d_err: 0.5 * (d_fp + d_fn) })
}

/// 26-connected flood fill of voxels with value >= `threshold`, starting from
/// the voxel containing `seed_point`. Returns linear voxel indices.
pub fn region_grow(vol: &Volume, threshold: f64, seed_point: &Vector3<f64>) -> Result<Vec<usize>> {
    let dims = vol.dims();
    let u = vol.world_to_voxel(seed_point);
    let mut seed = [0usize; 3];
    for a in 0..3 {
        let r = u[a].round();
        if r < 0.0 || r > (dims[a] - 1) as f64 {
            return Err(Error::OutOfBounds { point: [seed_point.x, seed_point.y, seed_point.z] });
        }
        seed[a] = r as usize;
    }
    let seed_idx = seed[0] + dims[0] * (seed[1] + dims[1] * seed[2]);
    if vol.data()[seed_idx] < threshold {
        return Err(Error::InvalidArgument(format!(
            "seed value {} below threshold {threshold}",
            vol.data()[seed_idx]
        )));
    }

    let mut visited = vec![false; vol.len()];
    let mut stack = vec![seed_idx];
    visited[seed_idx] = true;
    let mut region = Vec::new();
    while let Some(idx) = stack.pop() {
        region.push(idx);
        let i = (idx % dims[0]) as i64;
        let j = ((idx / dims[0]) % dims[1]) as i64;
        let k = (idx / (dims[0] * dims[1])) as i64;
        for dk in -1..=1i64 {
            for dj in -1..=1i64 {
                for di in -1..=1i64 {
                    if di == 0 && dj == 0 && dk == 0 {
                        continue;
                    }
                    let (ni, nj, nk) = (i + di, j + dj, k + dk);
                    if ni < 0
                        || nj < 0
                        || nk < 0
                        || ni >= dims[0] as i64
                        || nj >= dims[1] as i64
                        || nk >= dims[2] as i64
                    {
                        continue;
                    }
                    let nidx = ni as usize + dims[0] * (nj as usize + dims[1] * nk as usize);
                    if !visited[nidx] && vol.data()[nidx] >= threshold {
                        visited[nidx] = true;
                        stack.push(nidx);
                    }
                }
            }
        }
    }
    region.sort_unstable();
    Ok(region)
}

/// World positions of the voxel centers in a region.
pub fn region_points(vol: &Volume, region: &[usize]) -> Vec<Vector3<f64>> {
    let dims = vol.dims();
    region
        .iter()
        .map(|&idx| {
            let i = idx % dims[0];
            let j = (idx / dims[0]) % dims[1];
            let k = idx / (dims[0] * dims[1]);
            vol.voxel_center(i, j, k)
        })
        .collect()
}

/// Fraction of ground-truth centerline samples within `tol_mm` of any
/// accepted-branch smoothed position.
pub fn branch_recall(accepted: &[Branch], tree: &PhantomTree, tol_mm: f64) -> Result<f64> {
    let truth = tree.all_points();
    if truth.is_empty() {
        return Err(Error::EmptyPointSet("phantom tree has no centerline samples".into()));
    }
    let mut points = Vec::new();
    for b in accepted {
        points.extend(b.smoothed_positions());
    }
    if points.is_empty() {
        return Ok(0.0);
    }
    let grid = PointGrid::build(&points)?;
    let hits = truth.iter().filter(|p| grid.nearest_distance(p) <= tol_mm).count();
    Ok(hits as f64 / truth.len() as f64)
}
