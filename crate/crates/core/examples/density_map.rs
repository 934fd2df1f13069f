//! Temporary: blob density vs tube direction (removed before release).

use nalgebra::Vector3;
use tubetrack_core::blobs::{detect_blobs, BlobConfig};
use tubetrack_core::phantom::{rasterize, PhantomTree, TreeBranch};

fn main() {
    let radius: f64 = std::env::args()
        .nth(1)
        .map(|s| s.parse().unwrap())
        .unwrap_or(1.8);
    println!("radius {radius}; rows: ty tz count max_gap(mm)");
    let n = 64usize;
    for ty10 in 0..=10 {
        for tz10 in 0..=10 {
            let ty = ty10 as f64 / 10.0;
            let tz = tz10 as f64 / 10.0;
            let dir = Vector3::new(1.0, ty, tz).normalize();
            let center = Vector3::new(32.0, 32.0, 32.0);
            let half = 27.0;
            let p0 = center - dir * half;
            let p1 = center + dir * half;
            let pts: Vec<Vector3<f64>> =
                (0..=108).map(|k| p0 + (p1 - p0) * (k as f64 / 108.0)).collect();
            let tree = PhantomTree {
                branches: vec![TreeBranch { points: pts, radii: vec![radius; 109], parent: -1 }],
            };
            let vol = match rasterize(&tree, [n, n, n], [1.0; 3], [0.0; 3]) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let blobs = detect_blobs(&vol, &BlobConfig::default()).unwrap();
            // keep blobs near the axis, project to arc length
            let mut ts: Vec<f64> = blobs
                .iter()
                .filter_map(|m| {
                    let rel = m.position - p0;
                    let t = rel.dot(&dir);
                    let off = (rel - dir * t).norm();
                    (off <= 2.0 && t >= 3.0 && t <= 2.0 * half - 3.0).then_some(t)
                })
                .collect();
            ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let max_gap = if ts.len() >= 2 {
                ts.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max)
            } else {
                999.0
            };
            println!("{ty:.1} {tz:.1} {:3} {max_gap:6.2}", ts.len());
        }
    }
}
