//! On-disk JSON formats for measurements, branches, ground truth and metrics.
//!
//! Writers are hand-rolled so output is byte-deterministic: object keys in a
//! fixed order and every float printed with nine significant digits in
//! scientific notation. Readers go through serde and accept exactly what the
//! writers produce.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;
use serde::Deserialize;

use tubetrack_core::blobs::Measurement;
use tubetrack_core::evaluation::CenterlineMetrics;
use tubetrack_core::phantom::{PhantomTree, TreeBranch};
use tubetrack_core::tracker::Branch;

use crate::config::{PipelineConfig, CONFIG_KEYS};
use crate::error::{CliError, Result};

/// Nine significant digits, scientific notation; the fixed wire format for
/// every floating-point value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.8e}")
}

fn fmt_vec3(v: &Vector3<f64>) -> String {
    format!("[{},{},{}]", fmt_f64(v.x), fmt_f64(v.y), fmt_f64(v.z))
}

fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// measurements
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct MeasurementRecord {
    pos: [f64; 3],
    r: f64,
    scale: f64,
    response: f64,
}

pub fn measurements_to_json(measurements: &[Measurement]) -> String {
    let mut out = String::from("[\n");
    for (i, m) in measurements.iter().enumerate() {
        let _ = write!(
            out,
            "  {{\"pos\":{},\"r\":{},\"scale\":{},\"response\":{}}}",
            fmt_vec3(&m.position),
            fmt_f64(m.radius),
            fmt_f64(m.scale),
            fmt_f64(m.response),
        );
        out.push_str(if i + 1 < measurements.len() { ",\n" } else { "\n" });
    }
    out.push_str("]\n");
    out
}

pub fn measurements_from_json(text: &str) -> Result<Vec<Measurement>> {
    let records: Vec<MeasurementRecord> = serde_json::from_str(text)
        .map_err(|e| CliError::Io(format!("bad measurements file: {e}")))?;
    Ok(records
        .into_iter()
        .map(|r| Measurement {
            position: Vector3::new(r.pos[0], r.pos[1], r.pos[2]),
            radius: r.r,
            scale: r.scale,
            response: r.response,
            consumed: false,
        })
        .collect())
}

pub fn load_measurements(path: &Path) -> Result<Vec<Measurement>> {
    measurements_from_json(&read_text(path)?)
}

// ---------------------------------------------------------------------------
// ground-truth trees
// ---------------------------------------------------------------------------

#[derive(Debug, Deserialize)]
struct TruthBranchRecord {
    points: Vec<[f64; 3]>,
    radii: Vec<f64>,
    parent: i64,
}

#[derive(Debug, Deserialize)]
struct TruthFileRecord {
    branches: Vec<TruthBranchRecord>,
}

pub fn tree_to_json(tree: &PhantomTree) -> String {
    let mut out = String::from("{\"branches\":[\n");
    for (i, b) in tree.branches.iter().enumerate() {
        out.push_str("  {\"points\":[");
        for (j, p) in b.points.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_vec3(p));
        }
        out.push_str("],\"radii\":[");
        for (j, r) in b.radii.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            out.push_str(&fmt_f64(*r));
        }
        let _ = write!(out, "],\"parent\":{}}}", b.parent);
        out.push_str(if i + 1 < tree.branches.len() { ",\n" } else { "\n" });
    }
    out.push_str("]}\n");
    out
}

pub fn tree_from_json(text: &str) -> Result<PhantomTree> {
    let record: TruthFileRecord =
        serde_json::from_str(text).map_err(|e| CliError::Io(format!("bad truth file: {e}")))?;
    Ok(PhantomTree {
        branches: record
            .branches
            .into_iter()
            .map(|b| TreeBranch {
                points: b.points.iter().map(|p| Vector3::new(p[0], p[1], p[2])).collect(),
                radii: b.radii,
                parent: b.parent,
            })
            .collect(),
    })
}

pub fn load_tree(path: &Path) -> Result<PhantomTree> {
    tree_from_json(&read_text(path)?)
}

// ---------------------------------------------------------------------------
// branches
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct StateRecord {
    pub pos: [f64; 3],
    pub r: f64,
    pub dir: [f64; 3],
    pub trace_filtered: f64,
    pub trace_smoothed: f64,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct BranchRecord {
    pub seed: usize,
    pub accepted: bool,
    pub mu: f64,
    pub states: Vec<StateRecord>,
}

#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct BranchesFile {
    pub branches: Vec<BranchRecord>,
    pub config: BTreeMap<String, String>,
}

impl BranchesFile {
    /// Smoothed positions of all accepted branches.
    pub fn accepted_points(&self) -> Vec<Vector3<f64>> {
        self.branches
            .iter()
            .filter(|b| b.accepted)
            .flat_map(|b| b.states.iter().map(|s| Vector3::new(s.pos[0], s.pos[1], s.pos[2])))
            .collect()
    }
}

pub fn branches_to_json(branches: &[Branch], cfg: &PipelineConfig) -> String {
    let mut out = String::from("{\"branches\":[\n");
    for (i, b) in branches.iter().enumerate() {
        let _ = write!(
            out,
            "  {{\"seed\":{},\"accepted\":{},\"mu\":{},\"states\":[",
            b.seed_index,
            b.accepted,
            fmt_f64(b.score_mu),
        );
        for (k, (f, s)) in b.states_filtered.iter().zip(&b.states_smoothed).enumerate() {
            if k > 0 {
                out.push(',');
            }
            let sm = &s.state;
            let _ = write!(
                out,
                "{{\"pos\":{},\"r\":{},\"dir\":{},\"trace_filtered\":{},\"trace_smoothed\":{}}}",
                fmt_vec3(&sm.position()),
                fmt_f64(sm.radius()),
                fmt_vec3(&sm.direction()),
                fmt_f64(f.posterior.trace()),
                fmt_f64(sm.trace()),
            );
        }
        out.push_str("]}");
        out.push_str(if i + 1 < branches.len() { ",\n" } else { "\n" });
    }
    out.push_str("],\"config\":{\n");
    let resolved = cfg.resolved_lines();
    let mut first = true;
    for line in resolved.lines() {
        let (key, value) = line.split_once(" = ").expect("resolved line format");
        if !first {
            out.push_str(",\n");
        }
        let _ = write!(out, "  \"{key}\":{}", serde_json::to_string(value).expect("string"));
        first = false;
    }
    out.push_str("\n}}\n");
    out
}

pub fn branches_from_json(text: &str) -> Result<BranchesFile> {
    serde_json::from_str(text).map_err(|e| CliError::Io(format!("bad branches file: {e}")))
}

pub fn load_branches(path: &Path) -> Result<BranchesFile> {
    branches_from_json(&read_text(path)?)
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, Deserialize)]
pub struct MetricsRecord {
    pub d_fp: f64,
    pub d_fn: f64,
    pub d_err: f64,
}

pub fn metrics_to_json(m: &CenterlineMetrics) -> String {
    format!(
        "{{\"d_fp\":{},\"d_fn\":{},\"d_err\":{}}}\n",
        fmt_f64(m.d_fp),
        fmt_f64(m.d_fn),
        fmt_f64(m.d_err)
    )
}

pub fn metrics_from_json(text: &str) -> Result<MetricsRecord> {
    serde_json::from_str(text).map_err(|e| CliError::Io(format!("bad metrics file: {e}")))
}

/// Plain-text comparison table over (method, metrics) rows.
pub fn metrics_table(rows: &[(&str, CenterlineMetrics)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<10} {:>10} {:>10} {:>10}", "Method", "d_FP(mm)", "d_FN(mm)", "d_err(mm)");
    for (name, m) in rows {
        let _ = writeln!(out, "{:<10} {:>10.3} {:>10.3} {:>10.3}", name, m.d_fp, m.d_fn, m.d_err);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmt_f64_is_nine_significant_digits() {
        assert_eq!(fmt_f64(1.0), "1.00000000e0");
        assert_eq!(fmt_f64(0.135), "1.35000000e-1");
        assert_eq!(fmt_f64(-250.5), "-2.50500000e2");
    }

    #[test]
    fn measurements_round_trip_through_json() {
        let ms = vec![
            Measurement {
                position: Vector3::new(1.5, -2.0, 3.25),
                radius: 1.732,
                scale: 1.0,
                response: -0.42,
                consumed: true, // not serialized; resets on load
            },
            Measurement {
                position: Vector3::new(0.0, 0.0, 0.0),
                radius: 3.4,
                scale: 2.0,
                response: -0.1,
                consumed: false,
            },
        ];
        let text = measurements_to_json(&ms);
        let back = measurements_from_json(&text).unwrap();
        assert_eq!(back.len(), 2);
        assert!(!back[0].consumed);
        assert_eq!(back[0].position, ms[0].position);
        assert_eq!(back[1].radius, 3.4);
        // fixed point: serialize(parse(serialize(x))) == serialize(x)
        let again = measurements_to_json(&back);
        assert_eq!(text, again);
    }

    #[test]
    fn tree_round_trips() {
        let tree = PhantomTree {
            branches: vec![TreeBranch {
                points: vec![Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.5, 0.0, 0.0)],
                radii: vec![2.0, 2.0],
                parent: -1,
            }],
        };
        let text = tree_to_json(&tree);
        let back = tree_from_json(&text).unwrap();
        assert_eq!(back.branches.len(), 1);
        assert_eq!(back.branches[0].parent, -1);
        assert_eq!(tree_to_json(&back), text);
    }

    #[test]
    fn metrics_json_has_exactly_three_keys() {
        let m = CenterlineMetrics { d_fp: 1.0, d_fn: 2.0, d_err: 1.5 };
        let text = metrics_to_json(&m);
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        let obj = value.as_object().unwrap();
        assert_eq!(obj.len(), 3);
        for key in ["d_fp", "d_fn", "d_err"] {
            assert!(obj.contains_key(key), "missing {key}");
        }
        let back = metrics_from_json(&text).unwrap();
        assert_eq!(back.d_err, 1.5);
    }
}
