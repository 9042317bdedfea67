//! Run configuration: a single TOML document with strict unknown-key
//! rejection, so every experiment is fully described by its config file.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::imp::{EmptyMaskPolicy, MeanSourceMask, PropagationOptions, WarpMode, WarpSource};
use crate::scfc::{CalibrationParams, CorruptionParams};
use crate::synth::{Motion, ObjectSpec, SceneKind, SceneSpec, Shape};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Input sequence root. Optional when a [scene] block is present and
    /// the pipeline generates its own input.
    pub input_root: Option<PathBuf>,
    pub output_root: PathBuf,
    #[serde(default)]
    pub seed: u64,
    /// SCFC is applied only when IoU(edited mask, original first mask)
    /// falls below this threshold.
    #[serde(default = "default_iou_threshold")]
    pub scfc_iou_threshold: f64,
    #[serde(default)]
    pub scene: Option<SceneConfig>,
    #[serde(default)]
    pub propagation: PropagationConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub corruption: CorruptionConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
}

fn default_iou_threshold() -> f64 {
    0.7
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidParams(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidParams(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.output_root.as_os_str().is_empty() {
            return Err(Error::InvalidParams("output_root is empty".into()));
        }
        if self.input_root.is_none() && self.scene.is_none() {
            return Err(Error::InvalidParams(
                "either input_root or a [scene] block is required".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.scfc_iou_threshold) {
            return Err(Error::InvalidParams(
                "scfc_iou_threshold must lie in [0,1]".into(),
            ));
        }
        self.calibration.to_params().validate()?;
        self.corruption.to_params(self.seed).validate()?;
        if let Some(scene) = &self.scene {
            scene.to_spec(self.seed)?.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum WarpSourceConfig {
    OriginalFlow,
    #[default]
    PseudoFlow,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum WarpModeConfig {
    #[default]
    ForwardSplat,
    BackwardSample,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum MeanSourceConfig {
    #[default]
    OriginalPerFrame,
    PropagatedEdited,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum EmptyMaskPolicyConfig {
    #[default]
    Error,
    CarryPreviousMean,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationConfig {
    pub warp_source: WarpSourceConfig,
    pub warp_mode: WarpModeConfig,
    pub mean_source_mask: MeanSourceConfig,
    pub empty_mask_policy: EmptyMaskPolicyConfig,
}

impl PropagationConfig {
    pub fn to_options(&self) -> PropagationOptions {
        PropagationOptions {
            warp_source: match self.warp_source {
                WarpSourceConfig::OriginalFlow => WarpSource::OriginalFlow,
                WarpSourceConfig::PseudoFlow => WarpSource::PseudoFlow,
            },
            warp_mode: match self.warp_mode {
                WarpModeConfig::ForwardSplat => WarpMode::ForwardSplat,
                WarpModeConfig::BackwardSample => WarpMode::BackwardSample,
            },
            mean_source: match self.mean_source_mask {
                MeanSourceConfig::OriginalPerFrame => MeanSourceMask::OriginalPerFrame,
                MeanSourceConfig::PropagatedEdited => MeanSourceMask::PropagatedEdited,
            },
            empty_mask_policy: match self.empty_mask_policy {
                EmptyMaskPolicyConfig::Error => EmptyMaskPolicy::Error,
                EmptyMaskPolicyConfig::CarryPreviousMean => EmptyMaskPolicy::CarryPreviousMean,
            },
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationConfig {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub pyramid_levels: usize,
    pub boundary_weight: f64,
    /// When true, cmd_calibrate corrupts the input flows with seeded random
    /// masks and reports recovery EPE instead of running the IoU gate.
    pub benchmark: bool,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let p = CalibrationParams::default();
        Self {
            max_iterations: p.max_iterations,
            tolerance: p.tolerance,
            pyramid_levels: p.pyramid_levels,
            boundary_weight: p.boundary_weight,
            benchmark: false,
        }
    }
}

impl CalibrationConfig {
    pub fn to_params(&self) -> CalibrationParams {
        CalibrationParams {
            max_iterations: self.max_iterations,
            tolerance: self.tolerance,
            pyramid_levels: self.pyramid_levels,
            boundary_weight: self.boundary_weight,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorruptionConfig {
    pub stroke_count_range: (usize, usize),
    pub rectangle_count_range: (usize, usize),
    pub stroke_width_range: (usize, usize),
    pub target_corruption_fraction: (f64, f64),
}

impl Default for CorruptionConfig {
    fn default() -> Self {
        let p = CorruptionParams::default();
        Self {
            stroke_count_range: p.stroke_count_range,
            rectangle_count_range: p.rectangle_count_range,
            stroke_width_range: p.stroke_width_range,
            target_corruption_fraction: p.target_corruption_fraction,
        }
    }
}

impl CorruptionConfig {
    /// The corruption stage derives its own sub-seed from the global seed.
    pub fn to_params(&self, seed: u64) -> CorruptionParams {
        CorruptionParams {
            seed: seed.wrapping_add(1),
            stroke_count_range: self.stroke_count_range,
            rectangle_count_range: self.rectangle_count_range,
            stroke_width_range: self.stroke_width_range,
            target_corruption_fraction: self.target_corruption_fraction,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsConfig {
    pub warping_error: bool,
    pub endpoint_error: bool,
    pub mask_iou: bool,
    pub flow_source: FlowSourceConfig,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            warping_error: true,
            endpoint_error: true,
            mask_iou: true,
            flow_source: FlowSourceConfig::default(),
        }
    }
}

/// Which flow sequence the metrics stage evaluates.
#[derive(Debug, Clone, Copy, Deserialize, Default, PartialEq, Eq)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum FlowSourceConfig {
    /// Calibrated flows if present, then pseudo flows, then the input flows.
    #[default]
    Auto,
    Original,
    Pseudo,
    Calibrated,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub enum SceneKindConfig {
    TranslatingDisk,
    RotatingSquare,
    TwoObject,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectConfig {
    /// "disk" or "square".
    pub shape: String,
    pub center: (f64, f64),
    pub size: f64,
    #[serde(default)]
    pub velocity: (f64, f64),
    /// Radians per frame; a nonzero value selects rotation.
    #[serde(default)]
    pub angular_velocity: f64,
    #[serde(default = "default_intensity")]
    pub intensity: [u8; 3],
}

fn default_intensity() -> [u8; 3] {
    [200, 60, 60]
}

impl ObjectConfig {
    fn to_spec(&self) -> Result<ObjectSpec> {
        let shape = match self.shape.as_str() {
            "disk" => Shape::Disk,
            "square" => Shape::Square,
            other => {
                return Err(Error::InvalidSpec(format!("unknown shape {other:?}")));
            }
        };
        let motion = if self.angular_velocity != 0.0 {
            Motion::Rotate { omega: self.angular_velocity }
        } else {
            Motion::Translate { vx: self.velocity.0, vy: self.velocity.1 }
        };
        Ok(ObjectSpec { shape, center: self.center, size: self.size, motion, intensity: self.intensity })
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub kind: SceneKindConfig,
    pub width: usize,
    pub height: usize,
    pub frames: usize,
    pub object: ObjectConfig,
    #[serde(default)]
    pub second_object: Option<ObjectConfig>,
    /// Scale factor simulating the edited first-frame mask.
    #[serde(default = "default_edit_scale")]
    pub edit_scale: f64,
    #[serde(default = "default_background")]
    pub background: [u8; 3],
    #[serde(default = "default_speckle")]
    pub speckle_amplitude: u8,
}

fn default_edit_scale() -> f64 {
    1.5
}

fn default_background() -> [u8; 3] {
    [40, 40, 80]
}

fn default_speckle() -> u8 {
    8
}

impl SceneConfig {
    pub fn to_spec(&self, seed: u64) -> Result<SceneSpec> {
        let kind = match self.kind {
            SceneKindConfig::TranslatingDisk => SceneKind::TranslatingDisk,
            SceneKindConfig::RotatingSquare => SceneKind::RotatingSquare,
            SceneKindConfig::TwoObject => SceneKind::TwoObject,
        };
        let mut objects = vec![self.object.to_spec()?];
        if let Some(second) = &self.second_object {
            objects.push(second.to_spec()?);
        }
        Ok(SceneSpec {
            kind,
            width: self.width,
            height: self.height,
            frame_count: self.frames,
            objects,
            background: self.background,
            speckle_amplitude: self.speckle_amplitude,
            seed,
        })
    }
}
