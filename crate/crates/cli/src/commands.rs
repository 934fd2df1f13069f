//! Pipeline subcommand implementations.
//!
//! Every command is a pure function of (config, input files) to output files,
//! so reruns with the same inputs produce byte-identical artifacts.

use std::path::Path;

use nalgebra::Vector3;

use tubetrack_core::blobs::detect_blobs;
use tubetrack_core::evaluation::{branch_recall, centerline_distance, region_grow, region_points, CenterlineMetrics};
use tubetrack_core::phantom::{corrupt, generate_tree, rasterize};
use tubetrack_core::tracker::{track_all, validate};
use tubetrack_core::volume::Volume;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::formats;

/// Generates the phantom, writes `<prefix>.mhd/.raw` and `<prefix>.truth.json`.
pub fn run_phantom(cfg: &PipelineConfig, out_prefix: &Path) -> Result<()> {
    let tree = generate_tree(&cfg.phantom_spec())?;
    let clean = rasterize(&tree, cfg.volume_dims, cfg.volume_spacing, cfg.volume_origin)?;
    let vol = corrupt(&clean, cfg.noise_sigma, &cfg.occlusions, cfg.rng_seed)?;
    vol.save(out_prefix)?;
    let truth_path = truth_path_for(out_prefix);
    formats::write_text(&truth_path, &formats::tree_to_json(&tree))?;
    Ok(())
}

pub fn truth_path_for(prefix: &Path) -> std::path::PathBuf {
    let mut name = prefix
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(".truth.json");
    prefix.with_file_name(name)
}

/// Detects blobs in a volume and writes the measurement file.
pub fn run_blobs(cfg: &PipelineConfig, volume_path: &Path, out_path: &Path) -> Result<()> {
    let vol = Volume::load(volume_path)?;
    let blobs = detect_blobs(&vol, &cfg.blob_config())?;
    formats::write_text(out_path, &formats::measurements_to_json(&blobs))
}

/// Tracks all branches from a measurement file and writes the branch file.
pub fn run_track(
    cfg: &PipelineConfig,
    volume_path: &Path,
    measurements_path: &Path,
    out_path: &Path,
) -> Result<()> {
    let vol = Volume::load(volume_path)?;
    let mut pool = formats::load_measurements(measurements_path)?;
    let tracker_cfg = cfg.tracker_config();
    let branches = track_all(&mut pool, &vol, &tracker_cfg)?;
    let (mut accepted, rejected) = validate(branches, &tracker_cfg);
    accepted.extend(rejected);
    accepted.sort_by_key(|b| b.seed_index);
    formats::write_text(out_path, &formats::branches_to_json(&accepted, cfg))
}

/// Evaluates accepted branches against a ground-truth tree.
pub fn run_eval(
    cfg: &PipelineConfig,
    branches_path: &Path,
    truth_path: &Path,
    out_path: &Path,
) -> Result<CenterlineMetrics> {
    let branches = formats::load_branches(branches_path)?;
    let tree = formats::load_tree(truth_path)?;
    let seg = branches.accepted_points();
    let truth = tree.all_points();
    let metrics = centerline_distance(&seg, &truth)?;
    let _ = cfg;
    formats::write_text(out_path, &formats::metrics_to_json(&metrics))?;
    Ok(metrics)
}

/// Full pipeline results, one row per method.
pub struct PipelineSummary {
    pub rg: CenterlineMetrics,
    pub rts: CenterlineMetrics,
    pub merged: CenterlineMetrics,
    pub recall: f64,
    pub accepted_branches: usize,
    pub total_branches: usize,
}

/// Runs phantom, blobs, track and the three evaluations in one working
/// directory, writing a summary table alongside the stage artifacts.
pub fn run_pipeline(cfg: &PipelineConfig, workdir: &Path, quiet: bool) -> Result<PipelineSummary> {
    std::fs::create_dir_all(workdir)
        .map_err(|e| CliError::Io(format!("cannot create {}: {e}", workdir.display())))?;
    let say = |msg: &str| {
        if !quiet {
            println!("{msg}");
        }
    };

    // stage 1: phantom
    let tree = generate_tree(&cfg.phantom_spec())?;
    let clean = rasterize(&tree, cfg.volume_dims, cfg.volume_spacing, cfg.volume_origin)?;
    let vol = corrupt(&clean, cfg.noise_sigma, &cfg.occlusions, cfg.rng_seed)?;
    let prefix = workdir.join("phantom");
    vol.save(&prefix)?;
    formats::write_text(&workdir.join("phantom.truth.json"), &formats::tree_to_json(&tree))?;
    say("phantom: volume and ground truth written");

    // stage 2: blobs
    let blobs = detect_blobs(&vol, &cfg.blob_config())?;
    formats::write_text(&workdir.join("measurements.json"), &formats::measurements_to_json(&blobs))?;
    say(&format!("blobs: {} measurements", blobs.len()));

    // stage 3: tracking
    let tracker_cfg = cfg.tracker_config();
    let mut pool = blobs;
    let branches = track_all(&mut pool, &vol, &tracker_cfg)?;
    let total_branches = branches.len();
    let (accepted, rejected) = validate(branches, &tracker_cfg);
    let mut all: Vec<_> = accepted.iter().cloned().chain(rejected.iter().cloned()).collect();
    all.sort_by_key(|b| b.seed_index);
    formats::write_text(&workdir.join("branches.json"), &formats::branches_to_json(&all, cfg))?;
    say(&format!("track: {} branches, {} accepted", total_branches, accepted.len()));

    // stage 4: evaluations against the truth samples
    let truth = tree.all_points();
    let rts_points: Vec<Vector3<f64>> =
        accepted.iter().flat_map(|b| b.smoothed_positions()).collect();

    let rg_seed = brightest_voxel(&vol);
    let region = region_grow(&vol, cfg.rg_threshold, &rg_seed)?;
    let rg_points = region_points(&vol, &region);

    let rg = centerline_distance(&rg_points, &truth)?;
    let rts = centerline_distance(&rts_points, &truth)?;
    let mut merged_points = rts_points.clone();
    merged_points.extend(rg_points.iter().copied());
    let merged = centerline_distance(&merged_points, &truth)?;
    let recall = branch_recall(&accepted, &tree, cfg.recall_tolerance)?;

    formats::write_text(&workdir.join("metrics_rg.json"), &formats::metrics_to_json(&rg))?;
    formats::write_text(&workdir.join("metrics_rts.json"), &formats::metrics_to_json(&rts))?;
    formats::write_text(&workdir.join("metrics_merged.json"), &formats::metrics_to_json(&merged))?;

    let table = formats::metrics_table(&[("RG", rg), ("RTS", rts), ("RTS+RG", merged)]);
    let summary = format!(
        "{table}\nbranch recall (tol {} mm): {:.4}\naccepted branches: {} of {}\n",
        cfg.recall_tolerance,
        recall,
        accepted.len(),
        total_branches
    );
    formats::write_text(&workdir.join("summary.txt"), &summary)?;
    say(&summary);

    Ok(PipelineSummary {
        rg,
        rts,
        merged,
        recall,
        accepted_branches: accepted.len(),
        total_branches,
    })
}

/// Deterministic region-growing seed: the brightest voxel, earliest linear
/// index on ties.
fn brightest_voxel(vol: &Volume) -> Vector3<f64> {
    let mut best = (0usize, f64::NEG_INFINITY);
    for (i, &v) in vol.data().iter().enumerate() {
        if v > best.1 {
            best = (i, v);
        }
    }
    let dims = vol.dims();
    let i = best.0 % dims[0];
    let j = (best.0 / dims[0]) % dims[1];
    let k = best.0 / (dims[0] * dims[1]);
    vol.voxel_center(i, j, k)
}
