//! Model-architecture and hardware constants.
//!
//! A [`ModelConfig`] carries the three quantities the cost calculus needs from
//! a model: active parameter count `P`, KV elements stored per token `D`
//! (K plus V, summed over every layer and KV head) and the GQA ratio `r`.
//! A [`HardwareProfile`] carries peak compute and memory bandwidth; its
//! arithmetic intensity is always derived from the two rates.
//!
//! Preset KV sizes come from measured "GB per 32K tokens" figures. Head
//! counts, and therefore `r`, come from the public model cards of each
//! family and are external data.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{loglog_fit, FitError};

#[derive(Debug, Error, PartialEq)]
pub enum ArchError {
    #[error("arch: unknown preset `{0}`")]
    UnknownPreset(String),
    #[error("arch: invalid field `{field}`: {reason}")]
    InvalidField { field: &'static str, reason: String },
    #[error("arch: failed to read `{path}`: {reason}")]
    Io { path: String, reason: String },
    #[error("arch: failed to parse `{path}`: {reason}")]
    Parse { path: String, reason: String },
    #[error("arch: family fit needs at least 2 members with distinct parameter counts")]
    DegenerateFamily,
    #[error("arch: {0}")]
    Fit(#[from] FitError),
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ArchError {
    ArchError::InvalidField {
        field,
        reason: reason.into(),
    }
}

/// Converts a "gigabytes per 32K tokens" KV figure to elements per token.
///
/// Gigabytes are binary (2^30 bytes).
pub fn kv_per_token(gb_per_32k: f64, bytes_per_elem: u32) -> Result<f64, ArchError> {
    if !(gb_per_32k.is_finite() && gb_per_32k > 0.0) {
        return Err(invalid("kv_gb_per_32k", format!("must be > 0, got {gb_per_32k}")));
    }
    check_bytes(bytes_per_elem)?;
    Ok(gb_per_32k * (1u64 << 30) as f64 / 32768.0 / f64::from(bytes_per_elem))
}

fn check_bytes(bytes_per_elem: u32) -> Result<(), ArchError> {
    match bytes_per_elem {
        1 | 2 | 4 => Ok(()),
        other => Err(invalid("bytes_per_elem", format!("must be 1, 2 or 4, got {other}"))),
    }
}

fn check_positive(field: &'static str, value: f64) -> Result<(), ArchError> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a finite value > 0, got {value}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConfig {
    name: String,
    active_params: f64,
    kv_elems_per_token: f64,
    gqa_ratio: f64,
    bytes_per_elem: u32,
}

impl ModelConfig {
    pub fn new(
        name: impl Into<String>,
        active_params: f64,
        kv_elems_per_token: f64,
        gqa_ratio: f64,
        bytes_per_elem: u32,
    ) -> Result<Self, ArchError> {
        check_positive("active_params", active_params)?;
        check_positive("kv_elems_per_token", kv_elems_per_token)?;
        if !(gqa_ratio.is_finite() && gqa_ratio >= 1.0) {
            return Err(invalid("gqa_ratio", format!("must be >= 1, got {gqa_ratio}")));
        }
        check_bytes(bytes_per_elem)?;
        Ok(Self {
            name: name.into(),
            active_params,
            kv_elems_per_token,
            gqa_ratio,
            bytes_per_elem,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Active parameter count `P` (for MoE models, the activated subset only).
    pub fn active_params(&self) -> f64 {
        self.active_params
    }

    /// KV elements stored per token across all layers (`D`).
    pub fn kv_elems_per_token(&self) -> f64 {
        self.kv_elems_per_token
    }

    /// Query heads per KV head (`r`).
    pub fn gqa_ratio(&self) -> f64 {
        self.gqa_ratio
    }

    pub fn bytes_per_elem(&self) -> u32 {
        self.bytes_per_elem
    }

    /// Bytes of KV cache needed for `tokens` tokens.
    pub fn kv_bytes(&self, tokens: f64) -> f64 {
        tokens * self.kv_elems_per_token * f64::from(self.bytes_per_elem)
    }

    /// Returns a copy with a different parameter count; used by the iso-cost sweeps.
    pub fn with_params(&self, active_params: f64) -> Result<Self, ArchError> {
        Self::new(
            self.name.clone(),
            active_params,
            self.kv_elems_per_token,
            self.gqa_ratio,
            self.bytes_per_elem,
        )
    }

    /// Reads a model config from a TOML document.
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ArchError> {
        let raw: ModelFile = toml::from_str(text).map_err(|e| ArchError::Parse {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        raw.into_config()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    name: String,
    active_params: f64,
    kv_elems_per_token: Option<f64>,
    kv_gb_per_32k: Option<f64>,
    #[serde(default = "default_bytes")]
    bytes_per_elem: u32,
    gqa_ratio: f64,
}

fn default_bytes() -> u32 {
    2
}

impl ModelFile {
    fn into_config(self) -> Result<ModelConfig, ArchError> {
        let kv = match (self.kv_elems_per_token, self.kv_gb_per_32k) {
            (Some(d), None) => d,
            (None, Some(gb)) => kv_per_token(gb, self.bytes_per_elem)?,
            (Some(_), Some(_)) => {
                return Err(invalid(
                    "kv_elems_per_token",
                    "give either kv_elems_per_token or kv_gb_per_32k, not both",
                ))
            }
            (None, None) => {
                return Err(invalid(
                    "kv_elems_per_token",
                    "missing; give kv_elems_per_token or kv_gb_per_32k",
                ))
            }
        };
        ModelConfig::new(self.name, self.active_params, kv, self.gqa_ratio, self.bytes_per_elem)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HardwareProfile {
    name: String,
    peak_flops: f64,
    mem_bw_elems: f64,
}

impl HardwareProfile {
    pub fn new(name: impl Into<String>, peak_flops: f64, mem_bw_elems: f64) -> Result<Self, ArchError> {
        check_positive("peak_flops", peak_flops)?;
        check_positive("mem_bw_elems", mem_bw_elems)?;
        Ok(Self {
            name: name.into(),
            peak_flops,
            mem_bw_elems,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn peak_flops(&self) -> f64 {
        self.peak_flops
    }

    pub fn mem_bw_elems(&self) -> f64 {
        self.mem_bw_elems
    }

    /// FLOPs the device can perform per element loaded from memory.
    pub fn intensity(&self) -> f64 {
        self.peak_flops / self.mem_bw_elems
    }

    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self, ArchError> {
        let raw: HardwareFile = toml::from_str(text).map_err(|e| ArchError::Parse {
            path: origin.to_string(),
            reason: e.to_string(),
        })?;
        Self::new(raw.name, raw.peak_flops, raw.mem_bw_elems)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HardwareFile {
    name: String,
    peak_flops: f64,
    mem_bw_elems: f64,
}

/// Version tag of the built-in preset tables, echoed into run manifests.
pub const PRESET_VERSION: &str = "presets-2025.1";

struct ModelPreset {
    name: &'static str,
    params: f64,
    kv_gb_per_32k: f64,
    q_heads: u32,
    kv_heads: u32,
}

// KV sizes: measured GB per 32K tokens at 16-bit precision. Qwen3-0.6B shares
// the 1.7B figure (both 28 layers x 8 KV heads x 128). Qwen3-4B and
// Qwen3-30B-A3B are not in the measured table and are derived from their
// model-card layer/head counts (36x8x128 and 48x4x128).
const MODEL_PRESETS: &[ModelPreset] = &[
    ModelPreset { name: "Qwen3-0.6B", params: 0.6e9, kv_gb_per_32k: 3.5, q_heads: 16, kv_heads: 8 },
    ModelPreset { name: "Qwen3-1.7B", params: 1.7e9, kv_gb_per_32k: 3.5, q_heads: 16, kv_heads: 8 },
    ModelPreset { name: "Qwen3-4B", params: 4.0e9, kv_gb_per_32k: 4.5, q_heads: 32, kv_heads: 8 },
    ModelPreset { name: "Qwen3-8B", params: 8.0e9, kv_gb_per_32k: 4.5, q_heads: 32, kv_heads: 8 },
    ModelPreset { name: "Qwen3-14B", params: 14.0e9, kv_gb_per_32k: 6.0, q_heads: 40, kv_heads: 8 },
    ModelPreset { name: "Qwen3-32B", params: 32.0e9, kv_gb_per_32k: 8.0, q_heads: 64, kv_heads: 8 },
    ModelPreset { name: "Qwen3-30B-A3B", params: 3.3e9, kv_gb_per_32k: 3.0, q_heads: 32, kv_heads: 4 },
    ModelPreset { name: "DS-1.5B", params: 1.5e9, kv_gb_per_32k: 0.875, q_heads: 12, kv_heads: 2 },
    ModelPreset { name: "DS-7B", params: 7.0e9, kv_gb_per_32k: 1.75, q_heads: 28, kv_heads: 4 },
    ModelPreset { name: "DS-14B", params: 14.0e9, kv_gb_per_32k: 6.0, q_heads: 40, kv_heads: 8 },
    ModelPreset { name: "DS-32B", params: 32.0e9, kv_gb_per_32k: 8.0, q_heads: 40, kv_heads: 8 },
];

/// Names of all built-in model presets.
pub fn model_preset_names() -> impl Iterator<Item = &'static str> {
    MODEL_PRESETS.iter().map(|p| p.name)
}

pub fn model_preset(name: &str) -> Result<ModelConfig, ArchError> {
    let preset = MODEL_PRESETS
        .iter()
        .find(|p| p.name.eq_ignore_ascii_case(name))
        .ok_or_else(|| ArchError::UnknownPreset(name.to_string()))?;
    ModelConfig::new(
        preset.name,
        preset.params,
        kv_per_token(preset.kv_gb_per_32k, 2)?,
        f64::from(preset.q_heads) / f64::from(preset.kv_heads),
        2,
    )
}

/// Dense 16-bit throughput and HBM bandwidth (2 bytes per element).
pub fn hardware_preset(name: &str) -> Result<HardwareProfile, ArchError> {
    match name.to_ascii_lowercase().as_str() {
        "b200" => HardwareProfile::new("b200", 2.25e15, 8.0e12 / 2.0),
        "h200" => HardwareProfile::new("h200", 989.0e12, 4.8e12 / 2.0),
        "h100" => HardwareProfile::new("h100", 989.0e12, 3.35e12 / 2.0),
        _ => Err(ArchError::UnknownPreset(name.to_string())),
    }
}

/// Extra cost of running the first layer densely, as a fraction of the
/// sparse total, for presets where it has been measured.
pub fn first_layer_surcharge(model_name: &str) -> Option<f64> {
    match model_name {
        "Qwen3-0.6B" => Some(0.0357),
        "Qwen3-32B" => Some(0.0156),
        _ => None,
    }
}

fn read_file(path: &Path) -> Result<String, ArchError> {
    std::fs::read_to_string(path).map_err(|e| ArchError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

fn looks_like_path(source: &str) -> bool {
    source.ends_with(".toml") || source.contains('/') || source.contains(std::path::MAIN_SEPARATOR)
}

/// Resolves a preset name or a config-file path.
///
/// With `preset_dir` set, `<dir>/<name>.toml` shadows the built-in preset of
/// the same name.
pub fn load_model_config(source: &str, preset_dir: Option<&Path>) -> Result<ModelConfig, ArchError> {
    if looks_like_path(source) {
        let path = Path::new(source);
        return ModelConfig::from_toml_str(&read_file(path)?, source);
    }
    if let Some(dir) = preset_dir {
        let candidate = dir.join(format!("{source}.toml"));
        if candidate.is_file() {
            let text = read_file(&candidate)?;
            return ModelConfig::from_toml_str(&text, &candidate.display().to_string());
        }
    }
    model_preset(source)
}

pub fn load_hardware_profile(source: &str, preset_dir: Option<&Path>) -> Result<HardwareProfile, ArchError> {
    if looks_like_path(source) {
        let path = Path::new(source);
        return HardwareProfile::from_toml_str(&read_file(path)?, source);
    }
    if let Some(dir) = preset_dir {
        let candidate = dir.join(format!("{source}.toml"));
        if candidate.is_file() {
            let text = read_file(&candidate)?;
            return HardwareProfile::from_toml_str(&text, &candidate.display().to_string());
        }
    }
    hardware_preset(source)
}

/// A series of models from one family, sorted ascending by parameter count.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFamily {
    name: String,
    members: Vec<ModelConfig>,
}

impl ModelFamily {
    pub fn new(name: impl Into<String>, mut members: Vec<ModelConfig>) -> Self {
        members.sort_by(|a, b| a.active_params.total_cmp(&b.active_params));
        Self {
            name: name.into(),
            members,
        }
    }

    /// The four dense Qwen3 models that have measured KV sizes.
    pub fn qwen3_measured() -> Self {
        let members = ["Qwen3-1.7B", "Qwen3-8B", "Qwen3-14B", "Qwen3-32B"]
            .iter()
            .map(|n| model_preset(n).expect("built-in preset"))
            .collect();
        Self::new("Qwen3", members)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn members(&self) -> &[ModelConfig] {
        &self.members
    }

    /// Builds a config at `active_params` by interpolating between the two
    /// bracketing members: `D` log-log in `P`, `r` linearly in `log P`.
    /// Outside the member range the nearest pair is extrapolated.
    pub fn interpolate(&self, name: impl Into<String>, active_params: f64) -> Result<ModelConfig, ArchError> {
        check_positive("active_params", active_params)?;
        let mut distinct: Vec<&ModelConfig> = Vec::with_capacity(self.members.len());
        for m in &self.members {
            if distinct.last().is_none_or(|l| l.active_params != m.active_params) {
                distinct.push(m);
            }
        }
        if distinct.len() < 2 {
            return Err(ArchError::DegenerateFamily);
        }
        let hi_idx = distinct
            .iter()
            .position(|m| m.active_params >= active_params)
            .unwrap_or(distinct.len() - 1)
            .clamp(1, distinct.len() - 1);
        let (lo, hi) = (distinct[hi_idx - 1], distinct[hi_idx]);
        let t = (active_params / lo.active_params).ln() / (hi.active_params / lo.active_params).ln();
        let kv = lo.kv_elems_per_token * (hi.kv_elems_per_token / lo.kv_elems_per_token).powf(t);
        let r = (lo.gqa_ratio + t * (hi.gqa_ratio - lo.gqa_ratio)).max(1.0);
        ModelConfig::new(name, active_params, kv, r, lo.bytes_per_elem)
    }
}

/// Result of regressing log2 `D` on log2 `P` across a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KvGrowthFit {
    /// Slope of log2 D against log2 P.
    pub slope: f64,
    pub intercept: f64,
    /// KV growth per doubling of parameters, `2^slope`.
    pub factor: f64,
    /// Residuals in log2 space, in member order.
    pub residuals: Vec<f64>,
}

impl KvGrowthFit {
    /// `D(P)` on the fitted power law.
    pub fn predict(&self, active_params: f64) -> f64 {
        (self.intercept + self.slope * active_params.log2()).exp2()
    }
}

pub fn kv_growth_fit(family: &ModelFamily) -> Result<KvGrowthFit, ArchError> {
    let mut distinct: Vec<f64> = family.members.iter().map(|m| m.active_params).collect();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(ArchError::DegenerateFamily);
    }
    let xs: Vec<f64> = family.members.iter().map(|m| m.active_params).collect();
    let ys: Vec<f64> = family.members.iter().map(|m| m.kv_elems_per_token).collect();
    let fit = loglog_fit(&xs, &ys)?;
    Ok(KvGrowthFit {
        slope: fit.slope,
        intercept: fit.intercept,
        factor: fit.slope.exp2(),
        residuals: fit.residuals,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn member(p: f64, d: f64) -> ModelConfig {
        ModelConfig::new(format!("m{p}"), p, d, 1.0, 2).unwrap()
    }

    #[test]
    fn table_conversions() {
        assert_eq!(kv_per_token(4.5, 2).unwrap(), 73_728.0);
        assert_eq!(kv_per_token(8.0, 2).unwrap(), 131_072.0);
        assert_eq!(kv_per_token(0.875, 2).unwrap(), 14_336.0);
        assert!(kv_per_token(0.0, 2).is_err());
        assert!(kv_per_token(-1.0, 2).is_err());
        assert!(kv_per_token(1.0, 3).is_err());
    }

    #[test]
    fn kv_per_token_is_linear() {
        for x in [0.125, 0.875, 3.5, 6.0, 11.3] {
            assert_eq!(kv_per_token(2.0 * x, 2).unwrap(), 2.0 * kv_per_token(x, 2).unwrap());
        }
    }

    #[test]
    fn presets_match_head_arithmetic() {
        let m = model_preset("Qwen3-8B").unwrap();
        assert_eq!(m.kv_elems_per_token(), 73_728.0);
        // 36 layers x 8 KV heads x 128 dims x (K + V)
        assert_eq!(m.kv_elems_per_token(), (36 * 8 * 128 * 2) as f64);
        assert_eq!(m.gqa_ratio(), 4.0);
        assert_eq!(model_preset("Qwen3-32B").unwrap().kv_elems_per_token(), 131_072.0);
        assert_eq!(model_preset("Qwen3-14B").unwrap().gqa_ratio(), 5.0);
        assert_eq!(model_preset("DS-1.5B").unwrap().kv_elems_per_token(), 14_336.0);
        for name in model_preset_names() {
            model_preset(name).unwrap();
        }
        assert_eq!(
            model_preset("qwen3-8b").unwrap().name(),
            "Qwen3-8B",
            "lookup is case-insensitive"
        );
        assert!(matches!(model_preset("Qwen3-9000B"), Err(ArchError::UnknownPreset(_))));
    }

    #[test]
    fn b200_intensity() {
        let hw = hardware_preset("b200").unwrap();
        assert_eq!(hw.intensity(), 562.5);
        let unit = HardwareProfile::new("unit", 3.0e12, 3.0e12).unwrap();
        assert_eq!(unit.intensity(), 1.0);
        assert!(HardwareProfile::new("bad", 0.0, 1.0).is_err());
    }

    #[test]
    fn config_file_validation() {
        let ok = "name = \"toy\"\nactive_params = 1000\nkv_elems_per_token = 10\ngqa_ratio = 2\n";
        let m = ModelConfig::from_toml_str(ok, "toy.toml").unwrap();
        assert_eq!(m.bytes_per_elem(), 2);

        let gb = "name = \"x\"\nactive_params = 8e9\nkv_gb_per_32k = 4.5\nbytes_per_elem = 2\ngqa_ratio = 4\n";
        assert_eq!(ModelConfig::from_toml_str(gb, "x").unwrap().kv_elems_per_token(), 73_728.0);

        let zero_r = "name = \"toy\"\nactive_params = 1000\nkv_elems_per_token = 10\ngqa_ratio = 0\n";
        match ModelConfig::from_toml_str(zero_r, "toy.toml") {
            Err(ArchError::InvalidField { field, .. }) => assert_eq!(field, "gqa_ratio"),
            other => panic!("expected gqa_ratio error, got {other:?}"),
        }

        let unknown = "name = \"toy\"\nactive_params = 1\nkv_elems_per_token = 1\ngqa_ratio = 1\nlayers = 3\n";
        assert!(matches!(
            ModelConfig::from_toml_str(unknown, "u"),
            Err(ArchError::Parse { .. })
        ));
        let neither = "name = \"toy\"\nactive_params = 1\ngqa_ratio = 1\n";
        assert!(ModelConfig::from_toml_str(neither, "n").is_err());
    }

    #[test]
    fn growth_fit_trivial_families() {
        let p = 1.0e9;
        let doubling = ModelFamily::new("a", vec![member(p, 100.0), member(2.0 * p, 200.0)]);
        assert!((kv_growth_fit(&doubling).unwrap().factor - 2.0).abs() < 1e-12);
        let flat = ModelFamily::new("b", vec![member(p, 100.0), member(2.0 * p, 100.0)]);
        assert!((kv_growth_fit(&flat).unwrap().factor - 1.0).abs() < 1e-12);
        let single = ModelFamily::new("c", vec![member(p, 100.0), member(p, 300.0)]);
        assert_eq!(kv_growth_fit(&single), Err(ArchError::DegenerateFamily));
    }

    #[test]
    fn qwen3_growth_factor() {
        let fit = kv_growth_fit(&ModelFamily::qwen3_measured()).unwrap();
        assert!((fit.factor - 1.21).abs() < 0.02, "factor {}", fit.factor);
        assert_eq!(fit.residuals.len(), 4);
    }

    #[test]
    fn interpolation_hits_members_and_brackets() {
        let fam = ModelFamily::qwen3_measured();
        let at8 = fam.interpolate("x", 8.0e9).unwrap();
        assert!((at8.kv_elems_per_token() - 73_728.0).abs() < 1e-6);
        assert!((at8.gqa_ratio() - 4.0).abs() < 1e-12);
        let at4 = fam.interpolate("q4", 4.0e9).unwrap();
        assert!(at4.kv_elems_per_token() > 57_344.0 && at4.kv_elems_per_token() < 73_728.0);
        assert!(at4.gqa_ratio() > 2.0 && at4.gqa_ratio() < 4.0);
    }

    #[test]
    fn family_sorted_by_params() {
        let fam = ModelFamily::new("s", vec![member(3.0, 1.0), member(1.0, 1.0), member(2.0, 1.0)]);
        let ps: Vec<f64> = fam.members().iter().map(|m| m.active_params()).collect();
        assert_eq!(ps, vec![1.0, 2.0, 3.0]);
    }
}
