//! Stage drivers behind the command-line front end: synth, propagate,
//! calibrate, metrics, and the end-to-end pipeline. Each stage reads only
//! its declared inputs and writes only under the output root, so repeated
//! runs with the same config produce byte-identical trees.

use std::path::{Path, PathBuf};

use crate::config::{FlowSourceConfig, RunConfig};
use crate::error::Error;
use crate::field::{BinaryMask, FlowDirection, FlowSequence, Frame, MaskSequence};
use crate::imp::propagate_sequence;
use crate::io::{
    convergence_report_doc, fmt_sig, read_flo, read_frame, read_mask, write_flo, write_frame,
    write_mask, write_report, IoError, ReportDoc, SequenceLayout,
};
use crate::metrics::{endpoint_error, mask_iou, valid_fraction, warping_error, FrameRecord, MetricsReport};
use crate::scfc::{calibrate, corrupt_flow, generate_corruption_masks, ConvergenceReport, KeepMask};
use crate::synth::{generate, scale_mask, SceneSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_PIPELINE: i32 = 4;

/// Stage failure, carrying the exit code discipline: 2 config/usage,
/// 3 I/O, 4 pipeline/numeric.
#[derive(Debug)]
pub enum StageError {
    Config(String),
    Io(String),
    Pipeline(String),
}

impl StageError {
    pub fn exit_code(&self) -> i32 {
        match self {
            StageError::Config(_) => EXIT_CONFIG,
            StageError::Io(_) => EXIT_IO,
            StageError::Pipeline(_) => EXIT_PIPELINE,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            StageError::Config(m) | StageError::Io(m) | StageError::Pipeline(m) => m,
        }
    }
}

impl From<IoError> for StageError {
    fn from(e: IoError) -> Self {
        StageError::Io(e.to_string())
    }
}

impl From<Error> for StageError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_) | Error::InvalidSpec(_) => StageError::Config(e.to_string()),
            other => StageError::Pipeline(other.to_string()),
        }
    }
}

pub type StageResult = Result<(), StageError>;

fn ensure_dir(path: &Path) -> StageResult {
    std::fs::create_dir_all(path)
        .map_err(|e| StageError::Io(format!("cannot create {}: {e}", path.display())))
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

/// Generates a scene and writes the full sequence layout, plus an edited
/// first-frame mask scaled about the first object's center.
pub fn run_synth(spec: &SceneSpec, edit_scale: f64, output: &Path) -> StageResult {
    let scene = generate(spec).map_err(StageError::from)?;
    ensure_dir(output)?;
    let layout = SequenceLayout::new(output);
    for (i, frame) in scene.frames.iter().enumerate() {
        write_frame(frame, &layout.frame_path(i))?;
    }
    for (i, flow) in scene.flows.fields().iter().enumerate() {
        write_flo(flow, &layout.flow_fwd_path(i))?;
    }
    for (i, flow) in scene.backward_flows.fields().iter().enumerate() {
        write_flo(flow, &layout.flow_bwd_path(i))?;
    }
    for (i, mask) in scene.masks.masks().iter().enumerate() {
        write_mask(mask, &layout.mask_path(i))?;
    }
    let edited = scale_mask(&scene.masks.masks()[0], edit_scale, spec.objects[0].center)
        .map_err(StageError::from)?;
    write_mask(&edited, &layout.edited_mask_path())?;
    Ok(())
}

// ---------------------------------------------------------------------------
// shared input loading
// ---------------------------------------------------------------------------

fn input_layout(cfg: &RunConfig) -> Result<SequenceLayout, StageError> {
    match &cfg.input_root {
        Some(root) => Ok(SequenceLayout::new(root)),
        None => Err(StageError::Config(
            "input_root is required for this command".into(),
        )),
    }
}

fn load_masks(layout: &SequenceLayout) -> Result<MaskSequence, StageError> {
    let n = layout.count_contiguous(SequenceLayout::mask_path);
    if n == 0 {
        return Err(StageError::Config(format!(
            "no mask files (mask_00000.pgm ...) under {}",
            layout.root.display()
        )));
    }
    let mut masks = Vec::with_capacity(n);
    for i in 0..n {
        masks.push(read_mask(&layout.mask_path(i))?);
    }
    MaskSequence::new(masks).map_err(StageError::from)
}

fn load_flows(
    layout: &SequenceLayout,
    path_of: impl Fn(&SequenceLayout, usize) -> PathBuf,
    what: &str,
) -> Result<Option<FlowSequence<f32>>, StageError> {
    let n = layout.count_contiguous(&path_of);
    if n == 0 {
        return Ok(None);
    }
    let mut fields = Vec::with_capacity(n);
    for i in 0..n {
        fields.push(read_flo(&path_of(layout, i))?);
    }
    Ok(Some(
        FlowSequence::new(fields, FlowDirection::Forward)
            .map_err(|e| StageError::Pipeline(format!("{what}: {e}")))?,
    ))
}

fn load_edited_mask(layout: &SequenceLayout) -> Result<BinaryMask, StageError> {
    let path = layout.edited_mask_path();
    if !path.exists() {
        return Err(StageError::Config(format!(
            "missing edited first-frame mask: {}",
            path.display()
        )));
    }
    Ok(read_mask(&path)?)
}

fn load_frames(layout: &SequenceLayout) -> Result<Vec<Frame>, StageError> {
    let n = layout.count_contiguous(SequenceLayout::frame_path);
    if n == 0 {
        return Err(StageError::Config(format!(
            "no frame files (frame_00000.ppm ...) under {}",
            layout.root.display()
        )));
    }
    let mut frames = Vec::with_capacity(n);
    for i in 0..n {
        frames.push(read_frame(&layout.frame_path(i))?);
    }
    Ok(frames)
}

// ---------------------------------------------------------------------------
// propagate
// ---------------------------------------------------------------------------

pub fn run_propagate(cfg: &RunConfig) -> StageResult {
    let input = input_layout(cfg)?;
    let masks = load_masks(&input)?;
    let flows = load_flows(&input, SequenceLayout::flow_fwd_path, "forward flows")?
        .ok_or_else(|| {
            StageError::Config(format!(
                "no forward flow files (flow_fwd_00000.flo ...) under {}",
                input.root.display()
            ))
        })?;
    if flows.len() + 1 != masks.len() {
        return Err(StageError::Config(format!(
            "expected {} forward flows for {} masks, found {}",
            masks.len() - 1,
            masks.len(),
            flows.len()
        )));
    }
    let edited = load_edited_mask(&input)?;

    let result = propagate_sequence(&flows, &masks, &edited, cfg.propagation.to_options())
        .map_err(StageError::from)?;

    ensure_dir(&cfg.output_root)?;
    let out = SequenceLayout::new(&cfg.output_root);
    for (i, flow) in result.pseudo_flows.fields().iter().enumerate() {
        write_flo(flow, &out.pseudo_flow_path(i))?;
    }
    for (i, mask) in result.edited_masks.masks().iter().enumerate() {
        write_mask(mask, &out.pseudo_mask_path(i))?;
    }

    let mut per_frame = Vec::new();
    let mut primary = Vec::new();
    for (i, m) in result.mean_flows.iter().enumerate() {
        per_frame.push(vec![
            ("frame".to_string(), i.to_string()),
            ("u_mean".to_string(), fmt_sig(m.u_mean as f64)),
            ("v_mean".to_string(), fmt_sig(m.v_mean as f64)),
            ("support_count".to_string(), m.support_count.to_string()),
        ]);
        primary.push(((m.u_mean as f64).powi(2) + (m.v_mean as f64).powi(2)).sqrt());
    }
    let doc = ReportDoc { kind: "propagation", per_frame, primary, extra: Vec::new() };
    write_report(&doc, &cfg.output_root.join("report_propagation.txt"))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

pub fn run_calibrate(cfg: &RunConfig) -> StageResult {
    if cfg.calibration.benchmark {
        return run_calibrate_benchmark(cfg);
    }
    let input = input_layout(cfg)?;
    let out = SequenceLayout::new(&cfg.output_root);
    let pseudo_flows = load_flows(&out, SequenceLayout::pseudo_flow_path, "pseudo flows")?
        .ok_or_else(|| {
            StageError::Config(format!(
                "no pseudo flows under {}; run propagate first",
                out.root.display()
            ))
        })?;
    let masks = load_masks(&input)?;
    let edited = load_edited_mask(&input)?;
    let params = cfg.calibration.to_params();

    let iou = mask_iou(&edited, &masks.masks()[0]).map_err(StageError::from)?;
    let apply = iou < cfg.scfc_iou_threshold;

    let mut reports: Vec<ConvergenceReport> = Vec::new();
    let mut diverged = false;
    if apply {
        for i in 0..pseudo_flows.len() {
            let pseudo_mask = read_mask(&out.pseudo_mask_path(i))?;
            let original = &masks.masks()[i];
            // Unknown region: symmetric difference between the propagated
            // edited mask and the original object mask.
            let keep_bits: Vec<bool> = pseudo_mask
                .bits()
                .iter()
                .zip(original.bits())
                .map(|(&e, &o)| e == o)
                .collect();
            let keep = KeepMask::new(
                BinaryMask::new(pseudo_mask.width(), pseudo_mask.height(), keep_bits)
                    .map_err(StageError::from)?,
            )
            .map_err(|e| StageError::Pipeline(format!("frame {i}: {e}")))?;
            let corrupted = corrupt_flow(&pseudo_flows.fields()[i], &keep)
                .map_err(|e| StageError::Pipeline(format!("frame {i}: {e}")))?;
            let outcome = calibrate(&corrupted, &keep, &edited, &params)
                .map_err(|e| StageError::Pipeline(format!("frame {i}: {e}")))?;
            diverged |= !outcome.report.converged;
            write_flo(&outcome.flow, &out.calibrated_flow_path(i))?;
            reports.push(outcome.report);
        }
    } else {
        // Gate skipped: calibrated flows are the pseudo flows, bit for bit.
        for (i, flow) in pseudo_flows.fields().iter().enumerate() {
            write_flo(flow, &out.calibrated_flow_path(i))?;
            reports.push(ConvergenceReport {
                iterations: 0,
                final_update: 0.0,
                residual_energy: 0.0,
                energy_samples: Vec::new(),
                converged: true,
            });
        }
    }

    let mut doc = convergence_report_doc(&reports);
    doc.extra.push((
        "gate".to_string(),
        if apply { "applied" } else { "skipped" }.to_string(),
    ));
    doc.extra.push(("gate_iou".to_string(), fmt_sig(iou)));
    write_report(&doc, &cfg.output_root.join("report_calibration.txt"))?;
    if diverged {
        return Err(StageError::Pipeline(
            "calibration did not converge on at least one frame (best iterate written)".into(),
        ));
    }
    Ok(())
}

/// Benchmark mode: corrupt the input flows with seeded random masks,
/// recover them, and report per-frame recovery EPE.
fn run_calibrate_benchmark(cfg: &RunConfig) -> StageResult {
    let input = input_layout(cfg)?;
    let flows = load_flows(&input, SequenceLayout::flow_fwd_path, "forward flows")?
        .ok_or_else(|| {
            StageError::Config(format!(
                "no forward flow files under {}",
                input.root.display()
            ))
        })?;
    let (w, h) = (flows.width(), flows.height());
    let shape = if input.edited_mask_path().exists() {
        read_mask(&input.edited_mask_path())?
    } else {
        BinaryMask::filled(w, h, false).map_err(StageError::from)?
    };
    let params = cfg.calibration.to_params();
    let keeps = generate_corruption_masks(w, h, flows.len(), &cfg.corruption.to_params(cfg.seed))
        .map_err(StageError::from)?;

    ensure_dir(&cfg.output_root)?;
    let out = SequenceLayout::new(&cfg.output_root);
    let mut per_frame = Vec::new();
    let mut primary = Vec::new();
    let mut diverged = false;
    for (i, (flow, keep)) in flows.fields().iter().zip(&keeps).enumerate() {
        let corrupted = corrupt_flow(flow, keep).map_err(StageError::from)?;
        let outcome = calibrate(&corrupted, keep, &shape, &params)
            .map_err(|e| StageError::Pipeline(format!("frame {i}: {e}")))?;
        diverged |= !outcome.report.converged;
        let epe = endpoint_error(&outcome.flow, flow, None).map_err(StageError::from)?;
        write_flo(&outcome.flow, &out.calibrated_flow_path(i))?;
        per_frame.push(vec![
            ("frame".to_string(), i.to_string()),
            ("iterations".to_string(), outcome.report.iterations.to_string()),
            ("final_update".to_string(), fmt_sig(outcome.report.final_update)),
            ("epe".to_string(), fmt_sig(epe)),
            ("corrupted_fraction".to_string(), fmt_sig(keep.corrupted_fraction())),
        ]);
        primary.push(epe);
    }
    let doc = ReportDoc {
        kind: "calibration_benchmark",
        per_frame,
        primary,
        extra: vec![("gate".to_string(), "benchmark".to_string())],
    };
    write_report(&doc, &cfg.output_root.join("report_calibration.txt"))?;
    if diverged {
        return Err(StageError::Pipeline(
            "calibration did not converge on at least one frame (best iterate written)".into(),
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// metrics
// ---------------------------------------------------------------------------

fn pick_flow_source(
    cfg: &RunConfig,
    input: &SequenceLayout,
    out: &SequenceLayout,
) -> Result<(FlowSequence<f32>, &'static str), StageError> {
    let original = || load_flows(input, SequenceLayout::flow_fwd_path, "forward flows");
    let pseudo = || load_flows(out, SequenceLayout::pseudo_flow_path, "pseudo flows");
    let calibrated = || load_flows(out, SequenceLayout::calibrated_flow_path, "calibrated flows");
    let missing = |what: &str| StageError::Config(format!("no {what} flows available"));
    match cfg.metrics.flow_source {
        FlowSourceConfig::Original => Ok((original()?.ok_or_else(|| missing("original"))?, "original")),
        FlowSourceConfig::Pseudo => Ok((pseudo()?.ok_or_else(|| missing("pseudo"))?, "pseudo")),
        FlowSourceConfig::Calibrated => {
            Ok((calibrated()?.ok_or_else(|| missing("calibrated"))?, "calibrated"))
        }
        FlowSourceConfig::Auto => {
            if let Some(f) = calibrated()? {
                Ok((f, "calibrated"))
            } else if let Some(f) = pseudo()? {
                Ok((f, "pseudo"))
            } else {
                Ok((original()?.ok_or_else(|| missing("original"))?, "original"))
            }
        }
    }
}

pub fn run_metrics(cfg: &RunConfig) -> StageResult {
    let input = input_layout(cfg)?;
    let out = SequenceLayout::new(&cfg.output_root);
    let frames = load_frames(&input)?;
    let (flows, source_name) = pick_flow_source(cfg, &input, &out)?;
    if frames.len() != flows.len() + 1 {
        return Err(StageError::Config(format!(
            "{} frames need {} flows, found {}",
            frames.len(),
            frames.len() - 1,
            flows.len()
        )));
    }

    let (per_we, _) = warping_error(&frames, &flows, None).map_err(StageError::from)?;

    // EPE against the input flows, which are ground truth on synthetic
    // scenes; only meaningful when evaluating a different flow set.
    let gt_flows = if cfg.metrics.endpoint_error && source_name != "original" {
        load_flows(&input, SequenceLayout::flow_fwd_path, "forward flows")?
    } else {
        None
    };
    let original_masks = if cfg.metrics.mask_iou {
        let n = input.count_contiguous(SequenceLayout::mask_path);
        if n == frames.len() {
            Some(load_masks(&input)?)
        } else {
            None
        }
    } else {
        None
    };

    let mut records = Vec::with_capacity(flows.len());
    for (i, &we) in per_we.iter().enumerate() {
        let epe = match &gt_flows {
            Some(gt) if gt.len() == flows.len() => Some(
                endpoint_error(&flows.fields()[i], &gt.fields()[i], None)
                    .map_err(StageError::from)?,
            ),
            _ => None,
        };
        let iou = match &original_masks {
            Some(masks) => {
                let pseudo_path = out.pseudo_mask_path(i);
                if pseudo_path.exists() {
                    let pm = read_mask(&pseudo_path)?;
                    mask_iou(&pm, &masks.masks()[i]).ok()
                } else {
                    None
                }
            }
            None => None,
        };
        records.push(FrameRecord {
            frame: i,
            warping_error: we,
            valid_fraction: valid_fraction(&flows.fields()[i]),
            epe,
            mask_iou: iou,
        });
    }
    let report = MetricsReport::from_records(records).map_err(StageError::from)?;
    ensure_dir(&cfg.output_root)?;
    let mut doc = crate::io::metrics_report_doc(&report);
    doc.extra.push(("flow_source".to_string(), source_name.to_string()));
    write_report(&doc, &cfg.output_root.join("report_metrics.txt"))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// pipeline
// ---------------------------------------------------------------------------

pub fn run_pipeline(cfg: &RunConfig) -> StageResult {
    let mut effective = cfg.clone();
    if let Some(scene) = &cfg.scene {
        let spec = scene.to_spec(cfg.seed).map_err(StageError::from)?;
        let syn_root = cfg.output_root.join("input");
        run_synth(&spec, scene.edit_scale, &syn_root)?;
        effective.input_root = Some(syn_root);
    }
    run_propagate(&effective)?;
    run_calibrate(&effective)?;
    run_metrics(&effective)?;
    Ok(())
}

// re-exported for the binary
pub fn generate_scene_checked(spec: &SceneSpec) -> Result<(), StageError> {
    spec.validate().map_err(StageError::from)
}
