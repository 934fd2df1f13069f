//! Synthetic tube-tree phantoms with exact centerline ground truth.
//!
//! A phantom is a binary tree of straight tubular branches with tapering
//! radii. Trees rasterize into soft-profile volumes resembling probability
//! images, and can be corrupted with seeded Gaussian noise and axis-aligned
//! occlusion boxes. All randomness is counter-based: every random draw is
//! keyed on the spec seed plus a branch id, so trees are bit-identical across
//! runs and platforms.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::volume::Volume;

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomSpec {
    /// Root start position (mm).
    pub root: Vector3<f64>,
    /// Unit direction of the root branch.
    pub root_direction: Vector3<f64>,
    /// Root radius (mm).
    pub root_radius: f64,
    /// Branching generations below the root (0 = single branch).
    pub depth: usize,
    /// Mean bifurcation half-angle (degrees).
    pub branch_angle_deg: f64,
    /// Child radius as a fraction of the parent radius, in (0, 1).
    pub radius_taper: f64,
    /// Straight length of every branch (mm).
    pub segment_length: f64,
    pub rng_seed: u64,
}

impl Default for PhantomSpec {
    fn default() -> Self {
        PhantomSpec {
            root: Vector3::new(10.0, 30.0, 42.0),
            root_direction: Vector3::new(1.0, 0.42, 0.23).normalize(),
            root_radius: 5.0,
            depth: 3,
            branch_angle_deg: 25.0,
            radius_taper: 0.72,
            segment_length: 30.0,
            rng_seed: 42,
        }
    }
}

/// One branch of the ground truth: centerline samples at <= 0.5 mm spacing
/// with per-sample radii, and the index of the parent branch.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeBranch {
    pub points: Vec<Vector3<f64>>,
    pub radii: Vec<f64>,
    /// Parent branch index; -1 for the root.
    pub parent: i64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhantomTree {
    pub branches: Vec<TreeBranch>,
}

impl PhantomTree {
    /// All centerline samples of all branches.
    pub fn all_points(&self) -> Vec<Vector3<f64>> {
        self.branches.iter().flat_map(|b| b.points.iter().copied()).collect()
    }
}

const SAMPLE_SPACING: f64 = 0.5;

fn validate_spec(spec: &PhantomSpec) -> Result<()> {
    if !(spec.radius_taper > 0.0 && spec.radius_taper < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "radius taper must be in (0,1), got {}",
            spec.radius_taper
        )));
    }
    let leaf_radius = spec.root_radius * spec.radius_taper.powi(spec.depth as i32);
    if leaf_radius < 0.5 {
        return Err(Error::InvalidArgument(format!(
            "leaf radius {leaf_radius:.3} mm below the 0.5 mm floor"
        )));
    }
    if !(spec.segment_length > 0.0) || !(spec.root_radius > 0.0) {
        return Err(Error::InvalidArgument("lengths and radii must be positive".into()));
    }
    if spec.root_direction.norm() < 1e-9 {
        return Err(Error::InvalidArgument("root direction must be nonzero".into()));
    }
    Ok(())
}

/// Deterministic per-branch random stream.
fn branch_rng(seed: u64, branch_id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ branch_id.wrapping_mul(0x9e3779b97f4a7c15))
}

/// Any unit vector orthogonal to `d`.
fn orthonormal_to(d: &Vector3<f64>) -> Vector3<f64> {
    let pick = if d.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    d.cross(&pick).normalize()
}

/// Rodrigues rotation of `v` about unit `axis` by `angle` radians.
fn rotate_about(v: &Vector3<f64>, axis: &Vector3<f64>, angle: f64) -> Vector3<f64> {
    let (s, c) = angle.sin_cos();
    v * c + axis.cross(v) * s + axis * (axis.dot(v)) * (1.0 - c)
}

/// Random unit vector orthogonal to `d`, drawn from the branch stream.
fn random_perpendicular(rng: &mut ChaCha8Rng, d: &Vector3<f64>) -> Vector3<f64> {
    let u = orthonormal_to(d);
    let w = d.cross(&u);
    let phi = rng.gen::<f64>() * std::f64::consts::TAU;
    u * phi.cos() + w * phi.sin()
}

/// Generates the ground-truth tree by recursive bifurcation.
///
/// Each branch runs straight for `segment_length` along its (jittered)
/// direction, then splits into two children rotated by the branch angle about
/// a random perpendicular axis, with tapered radii, until `depth` generations
/// exist. Same seed, same tree, bit for bit.
pub fn generate_tree(spec: &PhantomSpec) -> Result<PhantomTree> {
    validate_spec(spec)?;
    let mut branches = Vec::new();
    let root_dir = spec.root_direction.normalize();
    grow(spec, &mut branches, spec.root, root_dir, spec.root_radius, 0, -1, 0);
    Ok(PhantomTree { branches })
}

#[allow(clippy::too_many_arguments)]
fn grow(
    spec: &PhantomSpec,
    branches: &mut Vec<TreeBranch>,
    start: Vector3<f64>,
    nominal_direction: Vector3<f64>,
    radius: f64,
    generation: usize,
    parent: i64,
    branch_id: u64,
) {
    let mut rng = branch_rng(spec.rng_seed, branch_id);

    // small angular jitter, up to 5 degrees about a random perpendicular
    let jitter_axis = random_perpendicular(&mut rng, &nominal_direction);
    let jitter_angle = rng.gen::<f64>() * 5f64.to_radians();
    let direction = rotate_about(&nominal_direction, &jitter_axis, jitter_angle).normalize();

    let n_samples = (spec.segment_length / SAMPLE_SPACING).ceil() as usize;
    let step = spec.segment_length / n_samples as f64;
    let points: Vec<Vector3<f64>> =
        (0..=n_samples).map(|k| start + direction * (k as f64 * step)).collect();
    let radii = vec![radius; points.len()];
    let end = *points.last().expect("at least one sample");

    let own_index = branches.len() as i64;
    branches.push(TreeBranch { points, radii, parent });

    if generation < spec.depth {
        let split_axis = random_perpendicular(&mut rng, &direction);
        let angle = spec.branch_angle_deg.to_radians();
        let child_radius = radius * spec.radius_taper;
        for (side, sign) in [(1u64, 1.0), (2u64, -1.0)] {
            let child_dir = rotate_about(&direction, &split_axis, sign * angle).normalize();
            grow(
                spec,
                branches,
                end,
                child_dir,
                child_radius,
                generation + 1,
                own_index,
                branch_id * 2 + side,
            );
        }
    }
}

/// Rasterizes a tree into a soft-profile volume.
///
/// Every voxel takes the maximum over branches of `exp(-d^2 / (2 (r/2)^2))`
/// where `d` is the distance from the voxel center to the branch centerline;
/// contributions vanish beyond `2 r`. The whole tree must fit inside the
/// volume with a two-voxel margin.
pub fn rasterize(tree: &PhantomTree, dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Volume> {
    let lo = [
        origin[0] + 2.0 * spacing[0],
        origin[1] + 2.0 * spacing[1],
        origin[2] + 2.0 * spacing[2],
    ];
    let hi = [
        origin[0] + (dims[0] as f64 - 3.0) * spacing[0],
        origin[1] + (dims[1] as f64 - 3.0) * spacing[1],
        origin[2] + (dims[2] as f64 - 3.0) * spacing[2],
    ];
    for b in &tree.branches {
        for p in &b.points {
            for a in 0..3 {
                if p[a] < lo[a] || p[a] > hi[a] {
                    return Err(Error::OutOfBounds { point: [p.x, p.y, p.z] });
                }
            }
        }
    }

    let mut data = vec![0.0; dims[0] * dims[1] * dims[2]];
    for b in &tree.branches {
        if b.points.len() < 2 {
            continue;
        }
        let radius = b.radii[0];
        let reach = 2.0 * radius;
        let first = b.points[0];
        let last = *b.points.last().unwrap();
        let axis = last - first;
        let axis_len2 = axis.norm_squared();
        // dilated bounding box of the straight segment, in voxel indices
        let mut imin = [0usize; 3];
        let mut imax = [0usize; 3];
        for a in 0..3 {
            let min_w = first[a].min(last[a]) - reach;
            let max_w = first[a].max(last[a]) + reach;
            imin[a] = (((min_w - origin[a]) / spacing[a]).floor().max(0.0)) as usize;
            imax[a] = (((max_w - origin[a]) / spacing[a]).ceil() as usize).min(dims[a] - 1);
        }
        let two_sigma2 = 2.0 * (radius / 2.0) * (radius / 2.0);
        for k in imin[2]..=imax[2] {
            for j in imin[1]..=imax[1] {
                for i in imin[0]..=imax[0] {
                    let p = Vector3::new(
                        origin[0] + i as f64 * spacing[0],
                        origin[1] + j as f64 * spacing[1],
                        origin[2] + k as f64 * spacing[2],
                    );
                    let t = ((p - first).dot(&axis) / axis_len2).clamp(0.0, 1.0);
                    let nearest = first + axis * t;
                    let d2 = (p - nearest).norm_squared();
                    if d2 > reach * reach {
                        continue;
                    }
                    let v = (-d2 / two_sigma2).exp();
                    let idx = i + dims[0] * (j + dims[1] * k);
                    if v > data[idx] {
                        data[idx] = v;
                    }
                }
            }
        }
    }
    Volume::new(dims, spacing, origin, data)
}

/// An axis-aligned occlusion box: voxels within `half_width` of `center` on
/// every axis are zeroed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Occlusion {
    pub center: Vector3<f64>,
    pub half_width: f64,
}

/// Adds seeded Gaussian noise (clamped to [0, 1]) and applies occlusions.
pub fn corrupt(vol: &Volume, noise_sigma: f64, occlusions: &[Occlusion], rng_seed: u64) -> Result<Volume> {
    let dims = vol.dims();
    let spacing = vol.spacing();
    let origin = vol.origin();
    let mut data = vol.data().to_vec();

    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed ^ 0xc0ffee);
        for v in &mut data {
            // Box-Muller from two uniform draws keeps the stream portable
            let u1: f64 = rng.gen::<f64>().max(1e-300);
            let u2: f64 = rng.gen();
            let z = (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
            *v = (*v + noise_sigma * z).clamp(0.0, 1.0);
        }
    }

    for occ in occlusions {
        let mut imin = [0usize; 3];
        let mut imax = [0usize; 3];
        for a in 0..3 {
            let min_w = occ.center[a] - occ.half_width;
            let max_w = occ.center[a] + occ.half_width;
            imin[a] = (((min_w - origin[a]) / spacing[a]).ceil().max(0.0)) as usize;
            let hi = ((max_w - origin[a]) / spacing[a]).floor();
            if hi < 0.0 {
                imin[a] = 1;
                imax[a] = 0; // empty range
            } else {
                imax[a] = (hi as usize).min(dims[a] - 1);
            }
        }
        if imin.iter().zip(&imax).any(|(lo, hi)| lo > hi) {
            continue;
        }
        for k in imin[2]..=imax[2] {
            for j in imin[1]..=imax[1] {
                for i in imin[0]..=imax[0] {
                    data[i + dims[0] * (j + dims[1] * k)] = 0.0;
                }
            }
        }
    }

    vol.with_data(data)
}
