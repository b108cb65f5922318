//! Versioned TOML configuration for the whole pipeline.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::damage::DamageOptions;
use crate::error::{Error, Result};
use crate::eval::EvalOptions;
use crate::rectify::DEFAULT_PIXELS_PER_METER;
use crate::scene::{PoolConfig, SceneConfig};

pub const CONFIG_VERSION: u32 = 1;

/// The shipped defaults, with comments on where each constant comes from.
pub const DEFAULT_CONFIG_TOML: &str = include_str!("../config/default.toml");

/// Size of the built-in procedural model collection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub parcels: usize,
    pub distractors: usize,
    pub groups: usize,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            parcels: 12,
            distractors: 12,
            groups: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RectifyConfig {
    pub pixels_per_meter: f64,
}

impl Default for RectifyConfig {
    fn default() -> Self {
        Self {
            pixels_per_meter: DEFAULT_PIXELS_PER_METER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineConfig {
    pub version: u32,
    pub seed: u64,
    /// Scenes produced by `generate`.
    pub scenes: usize,
    pub synthetic: SyntheticConfig,
    pub pool: PoolConfig,
    pub scene: SceneConfig,
    pub eval: EvalOptions,
    pub damage: DamageOptions,
    pub rectify: RectifyConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            version: CONFIG_VERSION,
            seed: 0,
            scenes: 50,
            synthetic: SyntheticConfig::default(),
            pool: PoolConfig::default(),
            scene: SceneConfig::default(),
            eval: EvalOptions::default(),
            damage: DamageOptions::default(),
            rectify: RectifyConfig::default(),
        }
    }
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

/// Prefixes the field path of a config error.
fn within(prefix: &str, r: Result<()>) -> Result<()> {
    r.map_err(|e| match e {
        Error::Config { field, reason } => Error::Config {
            field: format!("{prefix}.{field}"),
            reason,
        },
        other => other,
    })
}

fn check_range(field: &str, r: [f64; 2], positive: bool) -> Result<()> {
    let ok = r[0].is_finite() && r[1].is_finite() && r[0] <= r[1] && (!positive || r[0] > 0.0);
    if ok {
        Ok(())
    } else {
        Err(config_err(
            field,
            format!("needs {}min <= max, got {:?}", if positive { "0 < " } else { "" }, r),
        ))
    }
}

impl PipelineConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(s).map_err(|e| {
            let field = e
                .span()
                .map_or_else(|| "config".to_string(), |sp| locate_key(s, sp.start));
            config_err(&field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err("config", e.to_string()))
    }

    /// Checks every field; the error names the offending field by its TOML
    /// path.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(config_err(
                "version",
                format!("unsupported version {} (expected {CONFIG_VERSION})", self.version),
            ));
        }
        if self.synthetic.groups == 0 {
            return Err(config_err("synthetic.groups", "must be at least 1"));
        }
        let p = &self.pool;
        if p.similarity_samples == 0 {
            return Err(config_err("pool.similarity_samples", "must be at least 1"));
        }
        if p.variants_per_model == 0 {
            return Err(config_err("pool.variants_per_model", "must be at least 1"));
        }
        let t = &p.thresholds;
        if !(t.pick_max_chamfer <= t.rem_max_chamfer && t.pick_min_normal >= t.rem_min_normal) {
            return Err(config_err(
                "pool.thresholds",
                "pick thresholds must be at least as strict as rem",
            ));
        }
        let s = &p.scale;
        if !(s.lower > 0.0 && s.lower <= s.mode && s.mode <= s.upper && s.lower < s.upper) {
            return Err(config_err(
                "pool.scale",
                "needs 0 < lower <= mode <= upper with lower < upper",
            ));
        }
        let b = &p.volume_band;
        if !(b.min > 0.0 && b.min < b.max && b.max <= 1.0) {
            return Err(config_err("pool.volume_band", "needs 0 < min < max <= 1"));
        }
        within("pool.sim", p.sim.validate())?;
        let r = &p.sim_ranges;
        check_range("pool.sim_ranges.drop_height", r.drop_height, false)?;
        check_range("pool.sim_ranges.stiffness", r.stiffness, true)?;
        check_range("pool.sim_ranges.damping", r.damping, false)?;
        check_range("pool.sim_ranges.friction", r.friction, false)?;
        if r.friction[0] < 0.0 || r.friction[1] > 1.0 {
            return Err(config_err("pool.sim_ranges.friction", "must lie in [0, 1]"));
        }
        if !(p.smoothing.lambda > 0.0 && p.smoothing.lambda <= 1.0) {
            return Err(config_err("pool.smoothing.lambda", "must lie in (0, 1]"));
        }
        within("scene", self.scene.validate())?;
        if let Some(g) = self.eval.mesh_gate {
            if !(0.0..=1.0).contains(&g) {
                return Err(config_err("eval.mesh_gate", "must lie in [0, 1]"));
            }
        }
        if self.eval.mesh.samples == 0 {
            return Err(config_err("eval.mesh.samples", "must be at least 1"));
        }
        if !(self.eval.mesh.tau > 0.0) {
            return Err(config_err("eval.mesh.tau", "must be positive"));
        }
        if self.damage.samples == 0 || self.damage.voxel_resolution == 0 {
            return Err(config_err("damage", "samples and voxel_resolution must be at least 1"));
        }
        if !(self.rectify.pixels_per_meter > 0.0) {
            return Err(config_err("rectify.pixels_per_meter", "must be positive"));
        }
        Ok(())
    }
}

/// Dotted path of the key whose value spans byte `offset` of a TOML
/// document, from the enclosing `[table]` header and the key on that line.
fn locate_key(doc: &str, offset: usize) -> String {
    let mut table = String::new();
    let mut pos = 0;
    for line in doc.lines() {
        let end = pos + line.len();
        let t = line.trim();
        if t.starts_with('[') && !t.starts_with("[[") {
            table = t.trim_matches(|c| c == '[' || c == ']').trim().to_string();
        }
        if offset <= end {
            let key = t.split('=').next().unwrap_or("").trim();
            return match (table.is_empty(), key.is_empty() || t.starts_with('[')) {
                (true, true) => "config".into(),
                (true, false) => key.into(),
                (false, true) => table,
                (false, false) => format!("{table}.{key}"),
            };
        }
        pos = end + 1;
    }
    "config".into()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_defaults_match_code() {
        let cfg = PipelineConfig::from_toml_str(DEFAULT_CONFIG_TOML).unwrap();
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn serialized_defaults_reload() {
        let s = PipelineConfig::default().to_toml_string().unwrap();
        assert_eq!(PipelineConfig::from_toml_str(&s).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn empty_document_is_default() {
        assert_eq!(PipelineConfig::from_toml_str("").unwrap(), PipelineConfig::default());
    }

    #[test]
    fn bad_split_names_field() {
        let e = PipelineConfig::from_toml_str("[scene.split]\ntrain = 0.8\nval = 0.15\ntest = 0.15\n").unwrap_err();
        match e {
            Error::Config { field, .. } => assert_eq!(field, "scene.split"),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bad_probability_names_field() {
        let e = PipelineConfig::from_toml_str("[scene.labels]\nfragile_probability = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("scene.labels.fragile_probability"), "{e}");
        let e = PipelineConfig::from_toml_str("[pool.sim]\ndt = -1.0\n").unwrap_err();
        assert!(e.to_string().contains("pool.sim.dt"), "{e}");
    }

    #[test]
    fn unknown_key_and_version() {
        let e = PipelineConfig::from_toml_str("[scene]\nbogus = 1\n").unwrap_err();
        assert!(e.to_string().contains("scene"), "{e}");
        let e = PipelineConfig::from_toml_str("version = 7\n").unwrap_err();
        assert!(e.to_string().contains("version"), "{e}");
    }
}
