//! Warping, averaging, compositing, and smoothness kernels on dense fields.

use crate::error::{Error, Result};
use crate::field::{BinaryMask, FlowField, MeanFlow};
use crate::scalar::Scalar;

/// How holes left by an expanding forward splat are treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FillPolicy {
    /// Leave the raw splat result untouched.
    None,
    /// Close splat holes with a 3x3 structuring element, filling only
    /// pixels whose inferred source location lies inside the input mask.
    #[default]
    Closing,
}

/// Nearest-integer rounding with ties toward +inf, shared by all splat paths.
#[inline]
pub(crate) fn round_half_up(v: f64) -> i64 {
    (v + 0.5).floor() as i64
}

/// Bilinear interpolation of a row-major scalar grid at real coordinates.
///
/// Returns the interpolated value and a validity flag. Coordinates outside
/// [0, W-1] x [0, H-1] are clamped to the border and flagged invalid.
pub fn bilinear_sample<T: Scalar>(data: &[T], width: usize, height: usize, x: f64, y: f64) -> (T, bool) {
    debug_assert_eq!(data.len(), width * height);
    let max_x = (width - 1) as f64;
    let max_y = (height - 1) as f64;
    let valid = x >= 0.0 && x <= max_x && y >= 0.0 && y <= max_y;
    let cx = x.clamp(0.0, max_x);
    let cy = y.clamp(0.0, max_y);
    let x0 = cx.floor() as usize;
    let y0 = cy.floor() as usize;
    let x1 = (x0 + 1).min(width - 1);
    let y1 = (y0 + 1).min(height - 1);
    let fx = cx - x0 as f64;
    let fy = cy - y0 as f64;
    let p00 = data[y0 * width + x0].widen();
    let p10 = data[y0 * width + x1].widen();
    let p01 = data[y1 * width + x0].widen();
    let p11 = data[y1 * width + x1].widen();
    let top = p00 + fx * (p10 - p00);
    let bot = p01 + fx * (p11 - p01);
    (T::narrow(top + fy * (bot - top)), valid)
}

/// Backward-warps one scalar channel: out(x,y) = src(x + u(x,y), y + v(x,y)).
pub fn backward_warp_channel<T: Scalar>(
    channel: &[T],
    flow: &FlowField<T>,
) -> Result<(Vec<T>, BinaryMask)> {
    let (w, h) = (flow.width(), flow.height());
    if channel.len() != w * h {
        return Err(Error::LengthMismatch {
            what: "warp channel",
            expected: w * h,
            got: channel.len(),
        });
    }
    let mut out = Vec::with_capacity(w * h);
    let mut valid = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = flow.get(x, y);
            let (val, ok) =
                bilinear_sample(channel, w, h, x as f64 + u.widen(), y as f64 + v.widen());
            out.push(val);
            valid.push(ok);
        }
    }
    Ok((out, BinaryMask::new(w, h, valid)?))
}

/// Backward-warps a flow field (both components) by another flow field.
pub fn backward_warp_flow<T: Scalar>(
    source: &FlowField<T>,
    flow: &FlowField<T>,
) -> Result<(FlowField<T>, BinaryMask)> {
    source.check_dims_match(flow.width(), flow.height())?;
    let (u, validity) = backward_warp_channel(source.u(), flow)?;
    let (v, _) = backward_warp_channel(source.v(), flow)?;
    Ok((FlowField::from_components(flow.width(), flow.height(), u, v)?, validity))
}

/// Forward-splats a binary mask along a flow field.
///
/// Every set pixel (x, y) lands at round(x + u, y + v); splats outside the
/// frame are dropped. With `FillPolicy::Closing`, a hole pixel produced by
/// the splat is filled only when it is covered by the 3x3 morphological
/// closing of the splat and the hole's inferred source pixel (displaced back
/// by the mean motion of its set neighbors) is set in the input mask. Zero
/// flow therefore reproduces the input exactly under either policy.
pub fn forward_splat_mask<T: Scalar>(
    mask: &BinaryMask,
    flow: &FlowField<T>,
    fill: FillPolicy,
) -> Result<BinaryMask> {
    mask.check_dims_match(flow.width(), flow.height())?;
    let (w, h) = (mask.width(), mask.height());
    let n = w * h;
    let mut bits = vec![false; n];
    let mut du_sum = vec![0.0f64; n];
    let mut dv_sum = vec![0.0f64; n];
    let mut hits = vec![0u32; n];
    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let (u, v) = flow.get(x, y);
            let (du, dv) = (u.widen(), v.widen());
            let tx = round_half_up(x as f64 + du);
            let ty = round_half_up(y as f64 + dv);
            if tx < 0 || ty < 0 || tx >= w as i64 || ty >= h as i64 {
                continue;
            }
            let i = ty as usize * w + tx as usize;
            bits[i] = true;
            du_sum[i] += du;
            dv_sum[i] += dv;
            hits[i] += 1;
        }
    }
    let splat = BinaryMask::new(w, h, bits)?;
    if fill == FillPolicy::None {
        return Ok(splat);
    }

    let closed = erode3x3(&dilate3x3(&splat));
    let mut out: Vec<bool> = splat.bits().to_vec();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if out[i] || !closed.get(x, y) {
                continue;
            }
            // Mean displacement over set 8-neighbors tells us where this
            // hole came from; fill only if that source pixel was set.
            let mut du = 0.0;
            let mut dv = 0.0;
            let mut cnt = 0u32;
            for (nx, ny) in neighbors8(x, y, w, h) {
                let j = ny * w + nx;
                if splat.bits()[j] && hits[j] > 0 {
                    du += du_sum[j] / hits[j] as f64;
                    dv += dv_sum[j] / hits[j] as f64;
                    cnt += 1;
                }
            }
            if cnt == 0 {
                continue;
            }
            du /= cnt as f64;
            dv /= cnt as f64;
            let sx = round_half_up(x as f64 - du);
            let sy = round_half_up(y as f64 - dv);
            if sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h {
                out[i] = mask.get(sx as usize, sy as usize);
            }
        }
    }
    BinaryMask::new(w, h, out)
}

fn neighbors8(x: usize, y: usize, w: usize, h: usize) -> impl Iterator<Item = (usize, usize)> {
    let (xi, yi) = (x as i64, y as i64);
    (-1i64..=1)
        .flat_map(move |dy| (-1i64..=1).map(move |dx| (xi + dx, yi + dy)))
        .filter(move |&(nx, ny)| {
            (nx, ny) != (xi, yi) && nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64
        })
        .map(|(nx, ny)| (nx as usize, ny as usize))
}

pub(crate) fn dilate3x3(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(w, h, |x, y| {
        mask.get(x, y) || neighbors8(x, y, w, h).any(|(nx, ny)| mask.get(nx, ny))
    })
    .expect("same dims")
}

pub(crate) fn erode3x3(mask: &BinaryMask) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(w, h, |x, y| {
        // Border pixels keep their value: out-of-frame neighbors are not
        // treated as unset, so erosion never eats the frame edge.
        mask.get(x, y) && neighbors8(x, y, w, h).all(|(nx, ny)| mask.get(nx, ny))
    })
    .expect("same dims")
}

/// Backward mask transport: samples the mask as 0/1 reals at the displaced
/// coordinates and thresholds. Out-of-bounds samples count as unset.
pub fn backward_sample_mask<T: Scalar>(
    mask: &BinaryMask,
    flow: &FlowField<T>,
    threshold: f64,
) -> Result<BinaryMask> {
    mask.check_dims_match(flow.width(), flow.height())?;
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParams(format!(
            "threshold must lie in (0,1), got {threshold}"
        )));
    }
    let (w, h) = (mask.width(), mask.height());
    let gray: Vec<f64> = mask.bits().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    BinaryMask::from_fn(w, h, |x, y| {
        let (u, v) = flow.get(x, y);
        let (val, ok) = bilinear_sample(&gray, w, h, x as f64 + u.widen(), y as f64 + v.widen());
        ok && val >= threshold
    })
}

/// Component-wise arithmetic mean of the flow over the set pixels of a mask.
/// Accumulates in f64 in row-major order.
pub fn mean_flow_over_mask<T: Scalar>(flow: &FlowField<T>, mask: &BinaryMask) -> Result<MeanFlow<T>> {
    mask.check_dims_match(flow.width(), flow.height())?;
    let mut su = 0.0f64;
    let mut sv = 0.0f64;
    let mut count = 0usize;
    for y in 0..flow.height() {
        for x in 0..flow.width() {
            if mask.get(x, y) {
                let (u, v) = flow.get(x, y);
                su += u.widen();
                sv += v.widen();
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(Error::EmptyMask { frame: None });
    }
    Ok(MeanFlow {
        u_mean: T::narrow(su / count as f64),
        v_mean: T::narrow(sv / count as f64),
        support_count: count,
    })
}

/// Per pixel: the mean flow inside the edited mask, the input flow outside.
pub fn composite_flow<T: Scalar>(
    flow: &FlowField<T>,
    edited_mask: &BinaryMask,
    mean: MeanFlow<T>,
) -> Result<FlowField<T>> {
    edited_mask.check_dims_match(flow.width(), flow.height())?;
    FlowField::from_fn(flow.width(), flow.height(), |x, y| {
        if edited_mask.get(x, y) {
            (mean.u_mean, mean.v_mean)
        } else {
            flow.get(x, y)
        }
    })
}

/// Second-order smoothness energy: sum of squared second differences of
/// both components along x (stencil centers 1..w-2, every row) and along y
/// (stencil centers 1..h-2, every column). Affine fields score exactly zero.
///
/// Returns the total energy and a per-pixel map of the terms centered at
/// each pixel; both accumulate in f64 in row-major order.
pub fn second_order_smoothness<T: Scalar>(flow: &FlowField<T>) -> Result<(f64, Vec<f64>)> {
    let (w, h) = (flow.width(), flow.height());
    if w < 3 || h < 3 {
        return Err(Error::FieldTooSmall { w, h });
    }
    let mut map = vec![0.0f64; w * h];
    for comp in [flow.u(), flow.v()] {
        for y in 0..h {
            for x in 1..w - 1 {
                let i = y * w + x;
                let d = comp[i - 1].widen() - 2.0 * comp[i].widen() + comp[i + 1].widen();
                map[i] += d * d;
            }
        }
        for y in 1..h - 1 {
            for x in 0..w {
                let i = y * w + x;
                let d = comp[i - w].widen() - 2.0 * comp[i].widen() + comp[i + w].widen();
                map[i] += d * d;
            }
        }
    }
    let mut energy = 0.0f64;
    for v in &map {
        energy += v;
    }
    Ok((energy, map))
}

/// Analytic gradient of `second_order_smoothness` with respect to every
/// flow value, as f64 buffers (d/du, d/dv) in row-major order.
pub fn second_order_smoothness_gradient<T: Scalar>(flow: &FlowField<T>) -> Result<(Vec<f64>, Vec<f64>)> {
    let (w, h) = (flow.width(), flow.height());
    if w < 3 || h < 3 {
        return Err(Error::FieldTooSmall { w, h });
    }
    let mut grads = [vec![0.0f64; w * h], vec![0.0f64; w * h]];
    for (comp, grad) in [flow.u(), flow.v()].into_iter().zip(grads.iter_mut()) {
        for y in 0..h {
            for x in 1..w - 1 {
                let i = y * w + x;
                let d = comp[i - 1].widen() - 2.0 * comp[i].widen() + comp[i + 1].widen();
                grad[i - 1] += 2.0 * d;
                grad[i] += -4.0 * d;
                grad[i + 1] += 2.0 * d;
            }
        }
        for y in 1..h - 1 {
            for x in 0..w {
                let i = y * w + x;
                let d = comp[i - w].widen() - 2.0 * comp[i].widen() + comp[i + w].widen();
                grad[i - w] += 2.0 * d;
                grad[i] += -4.0 * d;
                grad[i + w] += 2.0 * d;
            }
        }
    }
    let [du, dv] = grads;
    Ok((du, dv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_x(w: usize, h: usize) -> Vec<f32> {
        let mut v = Vec::new();
        for _y in 0..h {
            for x in 0..w {
                v.push(x as f32);
            }
        }
        v
    }

    #[test]
    fn bilinear_constant_field() {
        let data = vec![7.0f32; 64];
        let (val, ok) = bilinear_sample(&data, 8, 8, 2.3, 4.8);
        assert!(ok);
        assert!((val - 7.0).abs() < 1e-6);
    }

    #[test]
    fn bilinear_linear_ramp_exact() {
        let data = ramp_x(8, 8);
        let (val, ok) = bilinear_sample(&data, 8, 8, 2.5, 3.0);
        assert!(ok);
        assert_eq!(val, 2.5);
    }

    #[test]
    fn bilinear_out_of_bounds_clamps_and_flags() {
        let data = ramp_x(8, 8);
        let (val, ok) = bilinear_sample(&data, 8, 8, -1.0, 0.0);
        assert!(!ok);
        assert_eq!(val, 0.0); // clamped to column 0
    }

    #[test]
    fn backward_warp_zero_flow_is_identity() {
        let src = ramp_x(8, 8);
        let flow = FlowField::<f32>::zeros(8, 8).unwrap();
        let (out, valid) = backward_warp_channel(&src, &flow).unwrap();
        assert_eq!(out, src);
        assert_eq!(valid.count(), 64);
    }

    #[test]
    fn backward_warp_shift_matches_oracle() {
        let src = ramp_x(8, 8);
        let flow = FlowField::<f32>::constant(8, 8, 1.0, 0.0).unwrap();
        let (out, valid) = backward_warp_channel(&src, &flow).unwrap();
        for y in 0..8 {
            for x in 0..8 {
                if x <= 6 {
                    assert_eq!(out[y * 8 + x], (x + 1) as f32);
                    assert!(valid.get(x, y));
                } else {
                    assert!(!valid.get(x, y));
                }
            }
        }
    }

    #[test]
    fn backward_warp_dimension_mismatch() {
        let src = FlowField::<f32>::zeros(4, 4).unwrap();
        let flow = FlowField::<f32>::zeros(5, 5).unwrap();
        assert!(matches!(
            backward_warp_flow(&src, &flow),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn splat_zero_flow_identity_both_policies() {
        // Mask with a single-pixel hole: plain closing would fill it.
        let mask = BinaryMask::from_fn(8, 8, |x, y| {
            (2..=5).contains(&x) && (2..=5).contains(&y) && !(x == 3 && y == 3)
        })
        .unwrap();
        let flow = FlowField::<f32>::zeros(8, 8).unwrap();
        for fill in [FillPolicy::None, FillPolicy::Closing] {
            let out = forward_splat_mask(&mask, &flow, fill).unwrap();
            assert_eq!(out, mask, "fill={fill:?}");
        }
    }

    #[test]
    fn splat_single_pixel_translation() {
        let mask = BinaryMask::from_fn(8, 8, |x, y| x == 3 && y == 3).unwrap();
        let flow = FlowField::<f32>::constant(8, 8, 2.0, 0.0).unwrap();
        let out = forward_splat_mask(&mask, &flow, FillPolicy::None).unwrap();
        assert_eq!(out.count(), 1);
        assert!(out.get(5, 3));
    }

    #[test]
    fn splat_drops_out_of_bounds() {
        let mask = BinaryMask::from_fn(8, 8, |x, y| x == 7 && y == 3).unwrap();
        let flow = FlowField::<f32>::constant(8, 8, 2.0, 0.0).unwrap();
        let out = forward_splat_mask(&mask, &flow, FillPolicy::Closing).unwrap();
        assert_eq!(out.count(), 0);
    }

    #[test]
    fn splat_closing_fills_expansion_holes() {
        // Radial expansion about (8,8) at 1.5x leaves holes under raw splat.
        let mask = BinaryMask::from_fn(16, 16, |x, y| {
            let dx = x as f64 - 8.0;
            let dy = y as f64 - 8.0;
            dx * dx + dy * dy <= 16.0
        })
        .unwrap();
        let flow = FlowField::<f32>::from_fn(16, 16, |x, y| {
            ((x as f32 - 8.0) * 0.5, (y as f32 - 8.0) * 0.5)
        })
        .unwrap();
        let raw = forward_splat_mask(&mask, &flow, FillPolicy::None).unwrap();
        let closed = forward_splat_mask(&mask, &flow, FillPolicy::Closing).unwrap();
        assert!(closed.count() > raw.count());
        // Every raw splat pixel survives closing.
        for (a, b) in raw.bits().iter().zip(closed.bits()) {
            assert!(!a || *b);
        }
    }

    #[test]
    fn backward_sample_half_plane() {
        let mask = BinaryMask::from_fn(8, 8, |x, _| x >= 4).unwrap();
        let flow = FlowField::<f32>::constant(8, 8, 1.0, 0.0).unwrap();
        let out = backward_sample_mask(&mask, &flow, 0.5).unwrap();
        // x = 7 samples column 8, which is out of bounds and therefore unset.
        let want = BinaryMask::from_fn(8, 8, |x, _| (3..7).contains(&x)).unwrap();
        assert_eq!(out, want);
    }

    #[test]
    fn backward_sample_full_mask_stays_full() {
        let mask = BinaryMask::filled(8, 8, true).unwrap();
        let flow = FlowField::<f32>::constant(8, 8, 0.4, -0.3).unwrap();
        let out = backward_sample_mask(&mask, &flow, 0.5).unwrap();
        // Samples that stay in bounds read 1.0 exactly.
        for y in 1..7 {
            for x in 0..7 {
                assert!(out.get(x, y));
            }
        }
    }

    #[test]
    fn mean_flow_examples() {
        let flow = FlowField::from_components(2, 2, vec![0.0f32, 1.0, 2.0, 3.0], vec![0.0; 4]).unwrap();
        let mask = BinaryMask::filled(2, 2, true).unwrap();
        let m = mean_flow_over_mask(&flow, &mask).unwrap();
        assert_eq!(m.u_mean, 1.5);
        assert_eq!(m.v_mean, 0.0);
        assert_eq!(m.support_count, 4);

        let empty = BinaryMask::filled(2, 2, false).unwrap();
        assert!(matches!(
            mean_flow_over_mask(&flow, &empty),
            Err(Error::EmptyMask { .. })
        ));
    }

    #[test]
    fn composite_diagonal() {
        let flow = FlowField::<f32>::zeros(2, 2).unwrap();
        let mask = BinaryMask::from_fn(2, 2, |x, y| x == y).unwrap();
        let mean = MeanFlow { u_mean: 5.0f32, v_mean: 5.0, support_count: 1 };
        let out = composite_flow(&flow, &mask, mean).unwrap();
        assert_eq!(out.u(), &[5.0, 0.0, 0.0, 5.0]);
        assert_eq!(out.v(), &[5.0, 0.0, 0.0, 5.0]);
    }

    #[test]
    fn smoothness_zero_for_affine() {
        let flow = FlowField::<f32>::from_fn(8, 8, |x, y| {
            (1.0 + 2.0 * x as f32 - y as f32, 3.0 * x as f32)
        })
        .unwrap();
        let (e, _) = second_order_smoothness(&flow).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn smoothness_quadratic_exact_value() {
        let flow = FlowField::<f32>::from_fn(8, 8, |x, _| ((x * x) as f32, 0.0)).unwrap();
        let (e, _) = second_order_smoothness(&flow).unwrap();
        assert_eq!(e, 192.0); // 4 per x-stencil, 6 centers x 8 rows
    }

    #[test]
    fn smoothness_rejects_small_fields() {
        let flow = FlowField::<f32>::zeros(2, 5).unwrap();
        assert!(matches!(
            second_order_smoothness(&flow),
            Err(Error::FieldTooSmall { .. })
        ));
    }
}
