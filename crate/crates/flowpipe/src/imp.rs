//! Iterative motion propagation: builds the shape-aligned pseudo flow
//! sequence and carries the edited object mask through the video frame by
//! frame. Each step averages the object motion over a source mask, stamps
//! that mean into the edited region of the flow, and advances the edited
//! mask by warping it with the chosen flow.

use crate::error::{Error, Result};
use crate::field::{BinaryMask, FlowDirection, FlowField, FlowSequence, MaskSequence, MeanFlow};
use crate::kernel::{
    backward_sample_mask, composite_flow, forward_splat_mask, mean_flow_over_mask, FillPolicy,
};
use crate::scalar::Scalar;

/// Which flow advances the edited mask to the next frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarpSource {
    /// The input flow, as written in the mask-transport equation.
    OriginalFlow,
    /// The just-composited pseudo flow, so shape extensions outside the
    /// original object travel with the object's mean motion.
    #[default]
    PseudoFlow,
}

/// Mask transport primitive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WarpMode {
    #[default]
    ForwardSplat,
    BackwardSample,
}

/// Which mask the per-frame mean flow is averaged over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanSourceMask {
    /// The provided per-frame segmentation of the source video.
    #[default]
    OriginalPerFrame,
    /// The propagated edited mask, for pipelines lacking full source masks.
    PropagatedEdited,
}

/// What to do when the mean-source mask has no set pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EmptyMaskPolicy {
    #[default]
    Error,
    CarryPreviousMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PropagationOptions {
    pub warp_source: WarpSource,
    pub warp_mode: WarpMode,
    pub mean_source: MeanSourceMask,
    pub empty_mask_policy: EmptyMaskPolicy,
}

/// Output of a full propagation run over an N-frame video.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult<T: Scalar> {
    /// Pseudo flows, length N-1.
    pub pseudo_flows: FlowSequence<T>,
    /// Edited masks, length N; index 0 is the input edited first mask.
    pub edited_masks: MaskSequence,
    /// Mean object flow per step, length N-1.
    pub mean_flows: Vec<MeanFlow<T>>,
}

/// One propagation step: composite the mean into the edited region and
/// advance the edited mask. `prev_mean` feeds the carry-previous-mean
/// policy when the mean-source mask is empty.
pub fn propagate_step<T: Scalar>(
    flow: &FlowField<T>,
    original_mask: &BinaryMask,
    edited_mask: &BinaryMask,
    opts: PropagationOptions,
    prev_mean: Option<MeanFlow<T>>,
) -> Result<(FlowField<T>, BinaryMask, MeanFlow<T>)> {
    original_mask.check_dims_match(flow.width(), flow.height())?;
    edited_mask.check_dims_match(flow.width(), flow.height())?;

    let mean_mask = match opts.mean_source {
        MeanSourceMask::OriginalPerFrame => original_mask,
        MeanSourceMask::PropagatedEdited => edited_mask,
    };
    let mean = match mean_flow_over_mask(flow, mean_mask) {
        Ok(m) => m,
        Err(Error::EmptyMask { .. }) => match (opts.empty_mask_policy, prev_mean) {
            (EmptyMaskPolicy::CarryPreviousMean, Some(m)) => m,
            _ => return Err(Error::EmptyMask { frame: None }),
        },
        Err(e) => return Err(e),
    };

    let pseudo = composite_flow(flow, edited_mask, mean)?;
    let warp_flow = match opts.warp_source {
        WarpSource::OriginalFlow => flow,
        WarpSource::PseudoFlow => &pseudo,
    };
    let next_mask = match opts.warp_mode {
        WarpMode::ForwardSplat => forward_splat_mask(edited_mask, warp_flow, FillPolicy::Closing)?,
        WarpMode::BackwardSample => backward_sample_mask(edited_mask, warp_flow, 0.5)?,
    };
    Ok((pseudo, next_mask, mean))
}

/// Runs propagation over the whole sequence, starting from the edited
/// first-frame mask. Errors are tagged with the offending frame index.
pub fn propagate_sequence<T: Scalar>(
    flows: &FlowSequence<T>,
    original_masks: &MaskSequence,
    edited_first_mask: &BinaryMask,
    opts: PropagationOptions,
) -> Result<PropagationResult<T>> {
    if flows.direction() != FlowDirection::Forward {
        return Err(Error::InvalidParams(
            "propagation requires a forward flow sequence".into(),
        ));
    }
    if original_masks.len() != flows.len() + 1 {
        return Err(Error::LengthMismatch {
            what: "original masks",
            expected: flows.len() + 1,
            got: original_masks.len(),
        });
    }
    let (w, h) = (flows.width(), flows.height());
    original_masks.masks()[0].check_dims_match(w, h)?;
    edited_first_mask.check_dims_match(w, h)?;

    let mut pseudo_flows = Vec::with_capacity(flows.len());
    let mut edited_masks = Vec::with_capacity(flows.len() + 1);
    let mut mean_flows = Vec::with_capacity(flows.len());
    edited_masks.push(edited_first_mask.clone());

    let mut prev_mean: Option<MeanFlow<T>> = None;
    for (i, flow) in flows.fields().iter().enumerate() {
        let (pseudo, next_mask, mean) = propagate_step(
            flow,
            &original_masks.masks()[i],
            &edited_masks[i],
            opts,
            prev_mean,
        )
        .map_err(|e| match e {
            Error::EmptyMask { .. } => Error::EmptyMask { frame: Some(i) },
            other => other.at_frame(i),
        })?;
        pseudo_flows.push(pseudo);
        edited_masks.push(next_mask);
        mean_flows.push(mean);
        prev_mean = Some(mean);
    }

    Ok(PropagationResult {
        pseudo_flows: FlowSequence::new(pseudo_flows, FlowDirection::Forward)?,
        edited_masks: MaskSequence::new(edited_masks)?,
        mean_flows,
    })
}
