//! Evaluation metrics: inter-frame warping error, endpoint error, mask IoU.

use crate::error::{Error, Result};
use crate::field::{BinaryMask, FlowDirection, FlowField, FlowSequence, Frame, MaskSequence};
use crate::kernel::backward_warp_channel;
use crate::scalar::Scalar;

/// Per-frame metric record. Flow-indexed values cover frame pairs, so a
/// report over N frames holds N-1 records.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameRecord {
    pub frame: usize,
    pub warping_error: f64,
    pub valid_fraction: f64,
    pub epe: Option<f64>,
    pub mask_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub per_frame: Vec<FrameRecord>,
    pub mean_warping_error: f64,
    pub max_warping_error: f64,
}

impl MetricsReport {
    pub fn from_records(per_frame: Vec<FrameRecord>) -> Result<Self> {
        if per_frame.is_empty() {
            return Err(Error::LengthMismatch {
                what: "metric records",
                expected: 1,
                got: 0,
            });
        }
        let mut sum = 0.0;
        let mut max = f64::NEG_INFINITY;
        for r in &per_frame {
            sum += r.warping_error;
            max = max.max(r.warping_error);
        }
        let mean = sum / per_frame.len() as f64;
        Ok(Self { per_frame, mean_warping_error: mean, max_warping_error: max })
    }
}

/// Inter-frame warping error: frame i+1 is warped back to frame i by the
/// forward flow, and the mean absolute intensity difference over valid
/// (and non-occluded, when provided) pixels is reported on a x100 scale.
/// Intensities are normalized to [0, 1] and averaged over the three
/// channels; accumulation is f64 in row-major order.
pub fn warping_error<T: Scalar>(
    frames: &[Frame],
    flows: &FlowSequence<T>,
    occlusion: Option<&MaskSequence>,
) -> Result<(Vec<f64>, f64)> {
    if frames.len() != flows.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "frames",
            expected: flows.len() + 1,
            got: frames.len(),
        });
    }
    if flows.direction() != FlowDirection::Forward {
        return Err(Error::InvalidParams(
            "warping error requires forward flows".into(),
        ));
    }
    let (w, h) = (flows.width(), flows.height());
    for f in frames {
        f.check_dims_match(w, h)?;
    }
    if let Some(occ) = occlusion {
        if occ.len() != flows.len() {
            return Err(Error::LengthMismatch {
                what: "occlusion masks",
                expected: flows.len(),
                got: occ.len(),
            });
        }
        occ.masks()[0].check_dims_match(w, h)?;
    }

    let mut per_frame = Vec::with_capacity(flows.len());
    for (i, flow) in flows.fields().iter().enumerate() {
        let target = &frames[i];
        let source = &frames[i + 1];
        let mut warped = Vec::with_capacity(3);
        let mut validity = None;
        for c in 0..3 {
            // Channels stay on the integer [0, 255] scale through warping
            // and differencing; normalization happens once at the end, so
            // intensity shifts common to both frames cancel exactly.
            let chan = source.channel::<f64>(c);
            let (out, valid) = backward_warp_channel(&chan, &flow.cast::<f64>())?;
            warped.push(out);
            validity.get_or_insert(valid);
        }
        let validity = validity.unwrap();
        let mut sum = 0.0f64;
        let mut count = 0usize;
        for y in 0..h {
            for x in 0..w {
                if !validity.get(x, y) {
                    continue;
                }
                if let Some(occ) = occlusion {
                    if occ.masks()[i].get(x, y) {
                        continue;
                    }
                }
                let px = target.get(x, y);
                for c in 0..3 {
                    sum += (warped[c][y * w + x] - px[c] as f64).abs();
                }
                count += 1;
            }
        }
        if count == 0 {
            return Err(Error::NoValidPixels { frame: Some(i) });
        }
        per_frame.push(100.0 * sum / 255.0 / (3 * count) as f64);
    }
    let mut mean = 0.0;
    for v in &per_frame {
        mean += v;
    }
    mean /= per_frame.len() as f64;
    Ok((per_frame, mean))
}

/// Valid-pixel fraction of the backward warp for frame pair i.
pub fn valid_fraction<T: Scalar>(flow: &FlowField<T>) -> f64 {
    let (w, h) = (flow.width(), flow.height());
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.get(x, y);
            let sx = x as f64 + u.widen();
            let sy = y as f64 + v.widen();
            if sx >= 0.0 && sx <= (w - 1) as f64 && sy >= 0.0 && sy <= (h - 1) as f64 {
                count += 1;
            }
        }
    }
    count as f64 / (w * h) as f64
}

/// Mean Euclidean norm of the flow difference over a region (whole frame
/// when absent). Accumulates in f64 in row-major order.
pub fn endpoint_error<T: Scalar>(
    estimated: &FlowField<T>,
    ground_truth: &FlowField<T>,
    region: Option<&BinaryMask>,
) -> Result<f64> {
    ground_truth.check_dims_match(estimated.width(), estimated.height())?;
    if let Some(r) = region {
        r.check_dims_match(estimated.width(), estimated.height())?;
        if r.is_all_false() {
            return Err(Error::EmptyMask { frame: None });
        }
    }
    let mut sum = 0.0f64;
    let mut count = 0usize;
    for y in 0..estimated.height() {
        for x in 0..estimated.width() {
            if let Some(r) = region {
                if !r.get(x, y) {
                    continue;
                }
            }
            let (eu, ev) = estimated.get(x, y);
            let (gu, gv) = ground_truth.get(x, y);
            let du = eu.widen() - gu.widen();
            let dv = ev.widen() - gv.widen();
            sum += (du * du + dv * dv).sqrt();
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

/// Intersection over union of two masks; errors when the union is empty.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64> {
    b.check_dims_match(a.width(), a.height())?;
    let mut inter = 0usize;
    let mut union = 0usize;
    for (x, y) in a.bits().iter().zip(b.bits()) {
        if *x && *y {
            inter += 1;
        }
        if *x || *y {
            union += 1;
        }
    }
    if union == 0 {
        return Err(Error::EmptyUnion);
    }
    Ok(inter as f64 / union as f64)
}
