//! Temporary tuning harness for phantom defaults (removed before release).

use nalgebra::Vector3;
use tubetrack_core::blobs::{detect_blobs, BlobConfig};
use tubetrack_core::evaluation::{branch_recall, centerline_distance};
use tubetrack_core::phantom::{generate_tree, rasterize, PhantomSpec};
use tubetrack_core::tracker::{track_all, validate, TrackerConfig};

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(42);
    let seg: f64 = args.get(2).map(|s| s.parse().unwrap()).unwrap_or(30.0);
    let angle: f64 = args.get(3).map(|s| s.parse().unwrap()).unwrap_or(25.0);
    let dirx: f64 = args.get(4).map(|s| s.parse().unwrap()).unwrap_or(1.0);
    let diry: f64 = args.get(5).map(|s| s.parse().unwrap()).unwrap_or(0.42);
    let dirz: f64 = args.get(6).map(|s| s.parse().unwrap()).unwrap_or(0.23);
    let rootx: f64 = args.get(7).map(|s| s.parse().unwrap()).unwrap_or(10.0);
    let rooty: f64 = args.get(8).map(|s| s.parse().unwrap()).unwrap_or(30.0);
    let rootz: f64 = args.get(9).map(|s| s.parse().unwrap()).unwrap_or(42.0);
    let root_radius: f64 = args.get(10).map(|s| s.parse().unwrap()).unwrap_or(5.0);
    let taper: f64 = args.get(11).map(|s| s.parse().unwrap()).unwrap_or(0.72);
    let coast: usize = args.get(12).map(|s| s.parse().unwrap()).unwrap_or(3);
    let delta: f64 = args.get(13).map(|s| s.parse().unwrap()).unwrap_or(0.4);
    let quiet = args.get(14).map(|s| s == "quiet").unwrap_or(false);

    let spec = PhantomSpec {
        root: Vector3::new(rootx, rooty, rootz),
        root_direction: Vector3::new(dirx, diry, dirz).normalize(),
        root_radius,
        depth: 3,
        branch_angle_deg: angle,
        radius_taper: taper,
        segment_length: seg,
        rng_seed: seed,
    };
    let tree = match generate_tree(&spec) {
        Ok(t) => t,
        Err(e) => {
            println!("seed {seed}: generate failed: {e}");
            return;
        }
    };
    // bounds check
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for p in tree.all_points() {
        for a in 0..3 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    if !quiet {
        println!("seed {seed}: bbox {lo:?} .. {hi:?}");
    }
    let in_bounds = lo.iter().all(|&v| v >= 2.0) && hi.iter().all(|&v| v <= 125.0);
    let vol = match rasterize(&tree, [128, 128, 128], [1.0; 3], [0.0; 3]) {
        Ok(v) => v,
        Err(e) => {
            println!("  rasterize failed: {e}");
            return;
        }
    };

    let t0 = std::time::Instant::now();
    let blobs = detect_blobs(&vol, &BlobConfig::default()).unwrap();
    if !quiet {
        println!("  {} blobs in {:?}", blobs.len(), t0.elapsed());
    }

    // per-branch blob statistics: assign each blob to nearest branch within 2mm
    let mut min_branch_blobs = usize::MAX;
    for (bi, br) in tree.branches.iter().enumerate() {
        let mut count = 0;
        let mut ts: Vec<f64> = Vec::new();
        let first = br.points[0];
        let dir = (br.points.last().unwrap() - first).normalize();
        let len = (br.points.last().unwrap() - first).norm();
        for m in &blobs {
            let rel = m.position - first;
            let t = rel.dot(&dir);
            let off = (rel - dir * t).norm();
            if t >= -1.0 && t <= len + 1.0 && off <= 2.0 {
                count += 1;
                ts.push(t);
            }
        }
        ts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let max_gap = ts.windows(2).map(|w| w[1] - w[0]).fold(0.0f64, f64::max);
        min_branch_blobs = min_branch_blobs.min(count);
        if !quiet {
            println!("  branch {bi:2} (r={:.2}): {count:3} blobs, max gap {max_gap:.2}", br.radii[0]);
        }
    }

    let t1 = std::time::Instant::now();
    let mut pool = blobs;
    let cfg = TrackerConfig { max_coast_steps: coast, delta, ..TrackerConfig::default() };
    let branches = track_all(&mut pool, &vol, &cfg).unwrap();
    if !quiet {
        println!("  tracked {} branches in {:?}", branches.len(), t1.elapsed());
        // which truth branch does each measurement belong to?
        let assign = |p: &Vector3<f64>| -> i64 {
            let mut best = (-1i64, f64::INFINITY);
            for (bi, br) in tree.branches.iter().enumerate() {
                let first = br.points[0];
                let dir = (br.points.last().unwrap() - first).normalize();
                let len = (br.points.last().unwrap() - first).norm();
                let rel = p - first;
                let t = rel.dot(&dir).clamp(0.0, len);
                let d = (rel - dir * t).norm();
                if d < best.1 {
                    best = (bi as i64, d);
                }
            }
            if best.1 <= 2.5 { best.0 } else { -1 }
        };
        for (ti, b) in branches.iter().enumerate() {
            let mut path: Vec<i64> = Vec::new();
            let mut coasts = 0;
            for s in &b.states_filtered {
                match s.measurement_index {
                    Some(mi) => {
                        let a = assign(&pool[mi].position);
                        if path.last() != Some(&a) {
                            path.push(a);
                        }
                    }
                    None => coasts += 1,
                }
            }
            println!(
                "  track {ti:2}: len {:3} mu {:.3} coasts {coasts:2} path {:?}",
                b.len(),
                b.score_mu,
                path
            );
        }
    }
    let (accepted, rejected) = validate(branches, &cfg);
    if !quiet {
        println!("  accepted {} rejected {}", accepted.len(), rejected.len());
        for b in &accepted {
            println!("    acc: len {:3} mu {:.3}", b.len(), b.score_mu);
        }
        let mut mus: Vec<f64> = rejected.iter().map(|b| b.score_mu).collect();
        mus.sort_by(|a, b| a.partial_cmp(b).unwrap());
        println!("    rejected mus (lowest 10): {:?}", &mus[..mus.len().min(10)]);
    }

    let recall = branch_recall(&accepted, &tree, 2.0).unwrap();
    let mut pts = Vec::new();
    for b in &accepted {
        pts.extend(b.smoothed_positions());
    }
    if !quiet && !pts.is_empty() {
        // per-truth-branch coverage of the accepted set at tol 2mm
        for (bi, br) in tree.branches.iter().enumerate() {
            let hits = br
                .points
                .iter()
                .filter(|p| pts.iter().any(|q| (*q - **p).norm() <= 2.0))
                .count();
            println!(
                "  coverage branch {bi:2}: {:.2}",
                hits as f64 / br.points.len() as f64
            );
        }
    }
    if let Ok(m) = centerline_distance(&pts, &tree.all_points()) {
        println!(
            "SUMMARY seed={seed} seg={seg} ang={angle} coast={coast} delta={delta} fit={in_bounds} minblobs={min_branch_blobs} acc={}/{} recall={recall:.3} d_fp={:.3} d_fn={:.3} d_err={:.3}",
            accepted.len(), accepted.len() + rejected.len(), m.d_fp, m.d_fn, m.d_err
        );
    } else {
        println!("SUMMARY seed={seed} seg={seg} fit={in_bounds} minblobs={min_branch_blobs} acc=0 recall=0");
    }
}
