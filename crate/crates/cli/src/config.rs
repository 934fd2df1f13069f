//! Flat key/value pipeline configuration.
//!
//! The file format is one `key = value` per line with `#` comments. Every
//! tunable of the pipeline lives here; unknown keys are hard errors so typos
//! cannot silently fall back to defaults.

use std::fmt::Write as _;

use nalgebra::Vector3;
use tubetrack_core::blobs::{BlobConfig, Polarity};
use tubetrack_core::phantom::{Occlusion, PhantomSpec};
use tubetrack_core::tracker::{CovarianceSource, TrackerConfig};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub rng_seed: u64,
    // blob detection
    pub scales: Vec<f64>,
    pub response_threshold: f64,
    pub polarity: Polarity,
    // state space and gating
    pub delta: f64,
    pub sigma_q: f64,
    pub sigma_m_pos: f64,
    pub sigma_m_r: f64,
    pub p0_scale: f64,
    pub renormalize_direction: bool,
    pub min_radius: f64,
    pub kappa: f64,
    pub p_g: f64,
    pub rect_gate_use_stddev: bool,
    // branch validation
    pub mu_c: f64,
    pub min_branch_length: usize,
    pub max_branch_length: usize,
    pub covariance_source: CovarianceSource,
    pub max_coast_steps: usize,
    // phantom
    pub phantom_root: [f64; 3],
    pub phantom_root_direction: [f64; 3],
    pub phantom_root_radius: f64,
    pub phantom_depth: usize,
    pub phantom_branch_angle_deg: f64,
    pub phantom_radius_taper: f64,
    pub phantom_segment_length: f64,
    pub volume_dims: [usize; 3],
    pub volume_spacing: [f64; 3],
    pub volume_origin: [f64; 3],
    pub noise_sigma: f64,
    pub occlusions: Vec<Occlusion>,
    // evaluation
    pub rg_threshold: f64,
    pub recall_tolerance: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            rng_seed: 2,
            scales: vec![1.0, 2.0, 4.0, 8.0, 12.0],
            response_threshold: 0.02,
            polarity: Polarity::Bright,
            delta: 0.4,
            sigma_q: 0.3,
            sigma_m_pos: 2.0,
            sigma_m_r: 1.0,
            p0_scale: 1.0,
            renormalize_direction: false,
            min_radius: 0.1,
            kappa: 3.0,
            p_g: 0.99,
            rect_gate_use_stddev: false,
            mu_c: 2.0,
            min_branch_length: 3,
            max_branch_length: 500,
            covariance_source: CovarianceSource::Smoothed,
            max_coast_steps: 6,
            phantom_root: [3.0, 18.0, 8.0],
            phantom_root_direction: [1.0, 0.5, 0.65],
            phantom_root_radius: 2.4,
            phantom_depth: 3,
            phantom_branch_angle_deg: 6.0,
            phantom_radius_taper: 0.8,
            phantom_segment_length: 36.0,
            volume_dims: [128, 128, 128],
            volume_spacing: [1.0, 1.0, 1.0],
            volume_origin: [0.0, 0.0, 0.0],
            noise_sigma: 0.0,
            occlusions: Vec::new(),
            rg_threshold: 0.5,
            recall_tolerance: 2.0,
        }
    }
}

/// One row of the configuration schema: key, unit, description.
pub struct ConfigKey {
    pub name: &'static str,
    pub unit: &'static str,
    pub help: &'static str,
}

pub const CONFIG_KEYS: &[ConfigKey] = &[
    ConfigKey { name: "rng_seed", unit: "-", help: "seed for all randomness (phantom and noise)" },
    ConfigKey { name: "scales", unit: "mm", help: "ascending blob detection scales, comma separated" },
    ConfigKey { name: "response_threshold", unit: "-", help: "minimum |normalized response| for a blob" },
    ConfigKey { name: "polarity", unit: "-", help: "blob polarity: bright, dark or both" },
    ConfigKey { name: "delta", unit: "mm", help: "tracking step size" },
    ConfigKey { name: "sigma_q", unit: "-", help: "process noise standard deviation" },
    ConfigKey { name: "sigma_m_pos", unit: "mm", help: "measurement noise on position" },
    ConfigKey { name: "sigma_m_r", unit: "mm", help: "measurement noise on radius" },
    ConfigKey { name: "p0_scale", unit: "-", help: "initial covariance scale (P0 = p0_scale * I)" },
    ConfigKey { name: "renormalize_direction", unit: "-", help: "rescale state direction to unit norm after updates" },
    ConfigKey { name: "min_radius", unit: "mm", help: "radius clamp floor for the state mean" },
    ConfigKey { name: "kappa", unit: "-", help: "rectangular gate coefficient" },
    ConfigKey { name: "p_g", unit: "-", help: "ellipsoidal gate probability in (0,1)" },
    ConfigKey { name: "rect_gate_use_stddev", unit: "-", help: "rectangular gate in stddev units instead of variances" },
    ConfigKey { name: "mu_c", unit: "-", help: "branch validation cutoff on mean covariance trace" },
    ConfigKey { name: "min_branch_length", unit: "steps", help: "minimum accepted branch length" },
    ConfigKey { name: "max_branch_length", unit: "steps", help: "step cap per tracking direction" },
    ConfigKey { name: "covariance_source", unit: "-", help: "branch score source: smoothed or filtered" },
    ConfigKey { name: "max_coast_steps", unit: "steps", help: "consecutive prediction-only steps before termination" },
    ConfigKey { name: "phantom_root", unit: "mm", help: "phantom root position x,y,z" },
    ConfigKey { name: "phantom_root_direction", unit: "-", help: "phantom root direction x,y,z (normalized internally)" },
    ConfigKey { name: "phantom_root_radius", unit: "mm", help: "phantom root tube radius" },
    ConfigKey { name: "phantom_depth", unit: "-", help: "phantom branching generations" },
    ConfigKey { name: "phantom_branch_angle_deg", unit: "deg", help: "phantom bifurcation half-angle" },
    ConfigKey { name: "phantom_radius_taper", unit: "-", help: "child/parent radius ratio in (0,1)" },
    ConfigKey { name: "phantom_segment_length", unit: "mm", help: "straight length of every phantom branch" },
    ConfigKey { name: "volume_dims", unit: "voxels", help: "phantom volume dimensions nx,ny,nz" },
    ConfigKey { name: "volume_spacing", unit: "mm", help: "phantom voxel spacing sx,sy,sz" },
    ConfigKey { name: "volume_origin", unit: "mm", help: "phantom volume origin ox,oy,oz" },
    ConfigKey { name: "noise_sigma", unit: "-", help: "additive Gaussian noise level on the phantom" },
    ConfigKey { name: "occlusions", unit: "mm", help: "occlusion boxes 'x,y,z,halfwidth' separated by ';'" },
    ConfigKey { name: "rg_threshold", unit: "-", help: "region growing intensity threshold" },
    ConfigKey { name: "recall_tolerance", unit: "mm", help: "distance tolerance for branch recall" },
];

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("key {key}: cannot parse {v:?} as number")))
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.trim()
        .parse()
        .map_err(|_| CliError::Config(format!("key {key}: cannot parse {v:?} as integer")))
}

fn parse_bool(key: &str, v: &str) -> Result<bool> {
    match v.trim() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(CliError::Config(format!("key {key}: expected true/false, got {other:?}"))),
    }
}

fn parse_f64_list(key: &str, v: &str) -> Result<Vec<f64>> {
    v.split(',').map(|t| parse_f64(key, t)).collect()
}

fn parse_triple_f64(key: &str, v: &str) -> Result<[f64; 3]> {
    let items = parse_f64_list(key, v)?;
    if items.len() != 3 {
        return Err(CliError::Config(format!("key {key}: expected three values, got {}", items.len())));
    }
    Ok([items[0], items[1], items[2]])
}

fn parse_triple_usize(key: &str, v: &str) -> Result<[usize; 3]> {
    let items: Result<Vec<usize>> = v.split(',').map(|t| parse_usize(key, t)).collect();
    let items = items?;
    if items.len() != 3 {
        return Err(CliError::Config(format!("key {key}: expected three values, got {}", items.len())));
    }
    Ok([items[0], items[1], items[2]])
}

fn parse_occlusions(key: &str, v: &str) -> Result<Vec<Occlusion>> {
    let v = v.trim();
    if v.is_empty() {
        return Ok(Vec::new());
    }
    v.split(';')
        .map(|group| {
            let nums = parse_f64_list(key, group)?;
            if nums.len() != 4 {
                return Err(CliError::Config(format!(
                    "key {key}: each occlusion needs x,y,z,halfwidth (got {} values)",
                    nums.len()
                )));
            }
            Ok(Occlusion {
                center: Vector3::new(nums[0], nums[1], nums[2]),
                half_width: nums[3],
            })
        })
        .collect()
}

impl PipelineConfig {
    /// Parses a config file's text over the defaults. Unknown keys are
    /// errors.
    pub fn from_text(text: &str) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!("line {}: expected 'key = value', got {raw:?}", lineno + 1))
            })?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "rng_seed" => {
                self.rng_seed = value
                    .parse()
                    .map_err(|_| CliError::Config(format!("key rng_seed: bad integer {value:?}")))?
            }
            "scales" => self.scales = parse_f64_list(key, value)?,
            "response_threshold" => self.response_threshold = parse_f64(key, value)?,
            "polarity" => {
                self.polarity = match value {
                    "bright" => Polarity::Bright,
                    "dark" => Polarity::Dark,
                    "both" => Polarity::Both,
                    other => {
                        return Err(CliError::Config(format!(
                            "key polarity: expected bright|dark|both, got {other:?}"
                        )))
                    }
                }
            }
            "delta" => self.delta = parse_f64(key, value)?,
            "sigma_q" => self.sigma_q = parse_f64(key, value)?,
            "sigma_m_pos" => self.sigma_m_pos = parse_f64(key, value)?,
            "sigma_m_r" => self.sigma_m_r = parse_f64(key, value)?,
            "p0_scale" => self.p0_scale = parse_f64(key, value)?,
            "renormalize_direction" => self.renormalize_direction = parse_bool(key, value)?,
            "min_radius" => self.min_radius = parse_f64(key, value)?,
            "kappa" => self.kappa = parse_f64(key, value)?,
            "p_g" => self.p_g = parse_f64(key, value)?,
            "rect_gate_use_stddev" => self.rect_gate_use_stddev = parse_bool(key, value)?,
            "mu_c" => self.mu_c = parse_f64(key, value)?,
            "min_branch_length" => self.min_branch_length = parse_usize(key, value)?,
            "max_branch_length" => self.max_branch_length = parse_usize(key, value)?,
            "covariance_source" => {
                self.covariance_source = match value {
                    "smoothed" => CovarianceSource::Smoothed,
                    "filtered" => CovarianceSource::Filtered,
                    other => {
                        return Err(CliError::Config(format!(
                            "key covariance_source: expected smoothed|filtered, got {other:?}"
                        )))
                    }
                }
            }
            "max_coast_steps" => self.max_coast_steps = parse_usize(key, value)?,
            "phantom_root" => self.phantom_root = parse_triple_f64(key, value)?,
            "phantom_root_direction" => self.phantom_root_direction = parse_triple_f64(key, value)?,
            "phantom_root_radius" => self.phantom_root_radius = parse_f64(key, value)?,
            "phantom_depth" => self.phantom_depth = parse_usize(key, value)?,
            "phantom_branch_angle_deg" => self.phantom_branch_angle_deg = parse_f64(key, value)?,
            "phantom_radius_taper" => self.phantom_radius_taper = parse_f64(key, value)?,
            "phantom_segment_length" => self.phantom_segment_length = parse_f64(key, value)?,
            "volume_dims" => self.volume_dims = parse_triple_usize(key, value)?,
            "volume_spacing" => self.volume_spacing = parse_triple_f64(key, value)?,
            "volume_origin" => self.volume_origin = parse_triple_f64(key, value)?,
            "noise_sigma" => self.noise_sigma = parse_f64(key, value)?,
            "occlusions" => self.occlusions = parse_occlusions(key, value)?,
            "rg_threshold" => self.rg_threshold = parse_f64(key, value)?,
            "recall_tolerance" => self.recall_tolerance = parse_f64(key, value)?,
            other => return Err(CliError::Config(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.blob_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        self.tracker_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.volume_dims.iter().any(|&d| d == 0) {
            return Err(CliError::Config("volume_dims must be positive".into()));
        }
        if self.volume_spacing.iter().any(|&s| !(s > 0.0)) {
            return Err(CliError::Config("volume_spacing must be positive".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(CliError::Config("noise_sigma must be nonnegative".into()));
        }
        if !(self.recall_tolerance > 0.0) {
            return Err(CliError::Config("recall_tolerance must be positive".into()));
        }
        Ok(())
    }

    pub fn blob_config(&self) -> BlobConfig {
        BlobConfig {
            scales: self.scales.clone(),
            response_threshold: self.response_threshold,
            polarity: self.polarity,
        }
    }

    pub fn tracker_config(&self) -> TrackerConfig {
        TrackerConfig {
            delta: self.delta,
            sigma_q: self.sigma_q,
            sigma_m_pos: self.sigma_m_pos,
            sigma_m_r: self.sigma_m_r,
            p0_scale: self.p0_scale,
            renormalize_direction: self.renormalize_direction,
            min_radius: self.min_radius,
            kappa: self.kappa,
            p_g: self.p_g,
            rect_gate_use_stddev: self.rect_gate_use_stddev,
            mu_c: self.mu_c,
            min_branch_length: self.min_branch_length,
            max_branch_length: self.max_branch_length,
            covariance_source: self.covariance_source,
            max_coast_steps: self.max_coast_steps,
        }
    }

    pub fn phantom_spec(&self) -> PhantomSpec {
        PhantomSpec {
            root: Vector3::new(self.phantom_root[0], self.phantom_root[1], self.phantom_root[2]),
            root_direction: Vector3::new(
                self.phantom_root_direction[0],
                self.phantom_root_direction[1],
                self.phantom_root_direction[2],
            )
            .normalize(),
            root_radius: self.phantom_root_radius,
            depth: self.phantom_depth,
            branch_angle_deg: self.phantom_branch_angle_deg,
            radius_taper: self.phantom_radius_taper,
            segment_length: self.phantom_segment_length,
            rng_seed: self.rng_seed,
        }
    }

    fn value_string(&self, key: &str) -> String {
        let list = |v: &[f64]| {
            v.iter().map(|x| format!("{x}")).collect::<Vec<_>>().join(",")
        };
        match key {
            "rng_seed" => self.rng_seed.to_string(),
            "scales" => list(&self.scales),
            "response_threshold" => format!("{}", self.response_threshold),
            "polarity" => match self.polarity {
                Polarity::Bright => "bright".into(),
                Polarity::Dark => "dark".into(),
                Polarity::Both => "both".into(),
            },
            "delta" => format!("{}", self.delta),
            "sigma_q" => format!("{}", self.sigma_q),
            "sigma_m_pos" => format!("{}", self.sigma_m_pos),
            "sigma_m_r" => format!("{}", self.sigma_m_r),
            "p0_scale" => format!("{}", self.p0_scale),
            "renormalize_direction" => self.renormalize_direction.to_string(),
            "min_radius" => format!("{}", self.min_radius),
            "kappa" => format!("{}", self.kappa),
            "p_g" => format!("{}", self.p_g),
            "rect_gate_use_stddev" => self.rect_gate_use_stddev.to_string(),
            "mu_c" => format!("{}", self.mu_c),
            "min_branch_length" => self.min_branch_length.to_string(),
            "max_branch_length" => self.max_branch_length.to_string(),
            "covariance_source" => match self.covariance_source {
                CovarianceSource::Smoothed => "smoothed".into(),
                CovarianceSource::Filtered => "filtered".into(),
            },
            "max_coast_steps" => self.max_coast_steps.to_string(),
            "phantom_root" => list(&self.phantom_root),
            "phantom_root_direction" => list(&self.phantom_root_direction),
            "phantom_root_radius" => format!("{}", self.phantom_root_radius),
            "phantom_depth" => self.phantom_depth.to_string(),
            "phantom_branch_angle_deg" => format!("{}", self.phantom_branch_angle_deg),
            "phantom_radius_taper" => format!("{}", self.phantom_radius_taper),
            "phantom_segment_length" => format!("{}", self.phantom_segment_length),
            "volume_dims" => self
                .volume_dims
                .iter()
                .map(|d| d.to_string())
                .collect::<Vec<_>>()
                .join(","),
            "volume_spacing" => list(&self.volume_spacing),
            "volume_origin" => list(&self.volume_origin),
            "noise_sigma" => format!("{}", self.noise_sigma),
            "occlusions" => self
                .occlusions
                .iter()
                .map(|o| format!("{},{},{},{}", o.center.x, o.center.y, o.center.z, o.half_width))
                .collect::<Vec<_>>()
                .join(";"),
            "rg_threshold" => format!("{}", self.rg_threshold),
            "recall_tolerance" => format!("{}", self.recall_tolerance),
            _ => unreachable!("value_string covers every schema key"),
        }
    }

    /// Resolved configuration as `key = value` lines in schema order.
    pub fn resolved_lines(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{} = {}", key.name, self.value_string(key.name));
        }
        out
    }
}

/// Help text listing every config key with its default and unit.
pub fn config_help() -> String {
    let defaults = PipelineConfig::default();
    let mut out = String::from("Configuration keys (key = value per line, '#' comments):\n");
    for key in CONFIG_KEYS {
        let _ = writeln!(
            out,
            "  {:26} [{}] default: {}\n      {}",
            key.name,
            key.unit,
            defaults.value_string(key.name),
            key.help
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reported_tuning() {
        let c = PipelineConfig::default();
        assert_eq!(c.sigma_q, 0.3);
        assert_eq!(c.sigma_m_r, 1.0);
        assert_eq!(c.sigma_m_pos, 2.0);
        assert_eq!(c.p0_scale, 1.0);
        assert_eq!(c.mu_c, 2.0);
        assert_eq!(c.p_g, 0.99);
        assert_eq!(c.scales, vec![1.0, 2.0, 4.0, 8.0, 12.0]);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = PipelineConfig::from_text("sigma_qq = 0.4\n").unwrap_err();
        assert!(matches!(err, CliError::Config(_)), "{err:?}");
    }

    #[test]
    fn parses_overrides_comments_and_lists() {
        let text = "# comment\nsigma_q = 0.5\nscales = 1,3,9\n\nocclusions = 1,2,3,4; 5,6,7,8\npolarity = both\n";
        let c = PipelineConfig::from_text(text).unwrap();
        assert_eq!(c.sigma_q, 0.5);
        assert_eq!(c.scales, vec![1.0, 3.0, 9.0]);
        assert_eq!(c.occlusions.len(), 2);
        assert_eq!(c.occlusions[1].half_width, 8.0);
        assert_eq!(c.polarity, Polarity::Both);
    }

    #[test]
    fn invalid_values_are_rejected() {
        assert!(PipelineConfig::from_text("p_g = 1.5\n").is_err());
        assert!(PipelineConfig::from_text("scales = 3,2,1\n").is_err());
        assert!(PipelineConfig::from_text("delta = -1\n").is_err());
        assert!(PipelineConfig::from_text("polarity = shiny\n").is_err());
        assert!(PipelineConfig::from_text("just a line\n").is_err());
    }

    #[test]
    fn resolved_lines_round_trip() {
        let mut c = PipelineConfig::default();
        c.sigma_q = 0.7;
        c.occlusions = vec![Occlusion { center: Vector3::new(1.0, 2.0, 3.0), half_width: 4.0 }];
        let text = c.resolved_lines();
        let back = PipelineConfig::from_text(&text).unwrap();
        assert_eq!(c, back);
    }

    #[test]
    fn help_mentions_every_key_with_unit() {
        let help = config_help();
        for key in CONFIG_KEYS {
            assert!(help.contains(key.name), "help must list {}", key.name);
            assert!(help.contains(&format!("[{}]", key.unit)));
        }
    }
}
