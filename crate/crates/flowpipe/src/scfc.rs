//! Shape-consistent flow calibration.
//!
//! Unknown flow regions are filled by constrained minimization of the
//! second-order smoothness energy (biharmonic interpolation): known pixels
//! are hard equality constraints, and smoothness stencils straddling the
//! shape-guidance boundary are down-weighted by `boundary_weight` so the
//! motion discontinuity at the object silhouette survives calibration.
//!
//! The solve runs coarse-to-fine over a power-of-two pyramid; each level is
//! minimized with diagonally preconditioned conjugate gradients in f64 with
//! fixed-order reductions, so results are bit-reproducible.

use crate::error::{Error, Result};
use crate::field::{BinaryMask, FlowField, FlowSequence};
use crate::kernel::bilinear_sample;
use crate::rng::SplitMix64;
use crate::scalar::Scalar;

/// Protocol for generating random corruption (keep) masks: polyline strokes
/// plus axis-aligned rectangles, resampled until the corrupted fraction
/// lands in the target interval.
#[derive(Debug, Clone, PartialEq)]
pub struct CorruptionParams {
    pub seed: u64,
    pub stroke_count_range: (usize, usize),
    pub rectangle_count_range: (usize, usize),
    pub stroke_width_range: (usize, usize),
    pub target_corruption_fraction: (f64, f64),
}

impl Default for CorruptionParams {
    fn default() -> Self {
        Self {
            seed: 0,
            stroke_count_range: (2, 5),
            rectangle_count_range: (1, 3),
            stroke_width_range: (4, 12),
            target_corruption_fraction: (0.2, 0.5),
        }
    }
}

impl CorruptionParams {
    pub fn validate(&self) -> Result<()> {
        let (s0, s1) = self.stroke_count_range;
        let (r0, r1) = self.rectangle_count_range;
        let (w0, w1) = self.stroke_width_range;
        let (f0, f1) = self.target_corruption_fraction;
        if s0 > s1 || r0 > r1 || w0 > w1 || w0 == 0 {
            return Err(Error::InvalidParams("empty count or width range".into()));
        }
        if !(f0 > 0.0 && f1 < 1.0 && f0 <= f1) {
            return Err(Error::InvalidParams(
                "corruption fraction interval must lie within (0,1)".into(),
            ));
        }
        Ok(())
    }
}

/// Binary mask where true marks a known (kept) flow pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeepMask(BinaryMask);

impl KeepMask {
    pub fn new(mask: BinaryMask) -> Result<Self> {
        if mask.is_all_false() {
            return Err(Error::NoKnownPixels);
        }
        Ok(Self(mask))
    }

    #[inline]
    pub fn mask(&self) -> &BinaryMask {
        &self.0
    }

    /// Fraction of corrupted (unknown) pixels.
    pub fn corrupted_fraction(&self) -> f64 {
        let n = self.0.width() * self.0.height();
        (n - self.0.count()) as f64 / n as f64
    }
}

/// Solver parameters for calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationParams {
    pub max_iterations: usize,
    /// Max per-pixel update (pixels) below which a level is converged.
    pub tolerance: f64,
    pub pyramid_levels: usize,
    /// Weight applied to smoothness stencils crossing the shape boundary;
    /// 0 keeps the motion discontinuity hard.
    pub boundary_weight: f64,
}

impl Default for CalibrationParams {
    fn default() -> Self {
        Self {
            max_iterations: 10_000,
            tolerance: 1e-6,
            pyramid_levels: 4,
            boundary_weight: 0.0,
        }
    }
}

impl CalibrationParams {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::InvalidParams("max_iterations must be >= 1".into()));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail validation
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParams("tolerance must be > 0".into()));
        }
        if self.pyramid_levels < 1 {
            return Err(Error::InvalidParams("pyramid_levels must be >= 1".into()));
        }
        if self.boundary_weight < 0.0 {
            return Err(Error::InvalidParams("boundary_weight must be >= 0".into()));
        }
        Ok(())
    }
}

/// Convergence record for one calibrated field.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub iterations: usize,
    pub final_update: f64,
    pub residual_energy: f64,
    /// Total smoothness energy sampled every 100 finest-level iterations.
    pub energy_samples: Vec<f64>,
    pub converged: bool,
}

/// Calibrated field plus its convergence report. A non-converged solve
/// still carries the best iterate; callers decide whether that is fatal.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationOutcome<T: Scalar> {
    pub flow: FlowField<T>,
    pub report: ConvergenceReport,
}

/// Generates one keep-mask per frame. Deterministic in the seed; each
/// frame draws from its own derived stream. Fails with InvalidParams when
/// 100 resampling attempts cannot hit the target corruption fraction.
pub fn generate_corruption_masks(
    width: usize,
    height: usize,
    frame_count: usize,
    params: &CorruptionParams,
) -> Result<Vec<KeepMask>> {
    params.validate()?;
    if width < 8 || height < 8 {
        return Err(Error::InvalidParams(format!(
            "corruption masks need at least 8x8, got {width}x{height}"
        )));
    }
    if frame_count < 1 {
        return Err(Error::InvalidParams("frame_count must be >= 1".into()));
    }
    let no_corruption =
        params.stroke_count_range.1 == 0 && params.rectangle_count_range.1 == 0;
    let mut out = Vec::with_capacity(frame_count);
    for frame in 0..frame_count {
        if no_corruption {
            out.push(KeepMask::new(BinaryMask::filled(width, height, true)?)?);
            continue;
        }
        let mut rng = SplitMix64::derive(params.seed, frame as u64);
        let mut accepted = None;
        for _attempt in 0..100 {
            let corrupted = draw_corruption(width, height, params, &mut rng);
            let n = (width * height) as f64;
            let frac = corrupted.iter().filter(|&&b| b).count() as f64 / n;
            let (f0, f1) = params.target_corruption_fraction;
            if frac >= f0 && frac <= f1 {
                // keep = complement of corrupted
                let bits = corrupted.iter().map(|&b| !b).collect();
                accepted = Some(KeepMask::new(BinaryMask::new(width, height, bits)?)?);
                break;
            }
        }
        match accepted {
            Some(k) => out.push(k),
            None => {
                return Err(Error::InvalidParams(format!(
                    "failed to hit corruption fraction {:?} after 100 attempts (frame {frame})",
                    params.target_corruption_fraction
                )))
            }
        }
    }
    Ok(out)
}

fn draw_corruption(
    width: usize,
    height: usize,
    params: &CorruptionParams,
    rng: &mut SplitMix64,
) -> Vec<bool> {
    let mut corrupted = vec![false; width * height];
    let strokes = rng.range_usize(params.stroke_count_range.0, params.stroke_count_range.1);
    let rects = rng.range_usize(
        params.rectangle_count_range.0,
        params.rectangle_count_range.1,
    );
    let max_dim = width.max(height) as f64;
    for _ in 0..strokes {
        let vertices = rng.range_usize(5, 12);
        let half_w = rng.range_usize(params.stroke_width_range.0, params.stroke_width_range.1) as f64 / 2.0;
        let mut x = rng.range_f64(0.0, width as f64);
        let mut y = rng.range_f64(0.0, height as f64);
        let mut angle = rng.range_f64(0.0, std::f64::consts::TAU);
        for _ in 0..vertices {
            let step = rng.range_f64(max_dim / 8.0, max_dim / 4.0);
            let nx = x + step * angle.cos();
            let ny = y + step * angle.sin();
            paint_segment(&mut corrupted, width, height, (x, y), (nx, ny), half_w);
            x = nx;
            y = ny;
            angle += rng.range_f64(-1.2, 1.2);
        }
    }
    for _ in 0..rects {
        let rw = rng.range_usize(width / 8, width / 3);
        let rh = rng.range_usize(height / 8, height / 3);
        let x0 = rng.range_usize(0, width - 1);
        let y0 = rng.range_usize(0, height - 1);
        for y in y0..(y0 + rh).min(height) {
            for x in x0..(x0 + rw).min(width) {
                corrupted[y * width + x] = true;
            }
        }
    }
    corrupted
}

/// Paints a thick line segment by distance-to-segment test over its
/// bounding box.
fn paint_segment(
    bits: &mut [bool],
    width: usize,
    height: usize,
    a: (f64, f64),
    b: (f64, f64),
    half_w: f64,
) {
    let x_lo = (a.0.min(b.0) - half_w).floor().max(0.0) as usize;
    let x_hi = ((a.0.max(b.0) + half_w).ceil() as usize).min(width.saturating_sub(1));
    let y_lo = (a.1.min(b.1) - half_w).floor().max(0.0) as usize;
    let y_hi = ((a.1.max(b.1) + half_w).ceil() as usize).min(height.saturating_sub(1));
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    for y in y_lo..=y_hi.min(height - 1) {
        for x in x_lo..=x_hi {
            let (px, py) = (x as f64 - a.0, y as f64 - a.1);
            let t = if len2 > 0.0 {
                ((px * dx + py * dy) / len2).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (ex, ey) = (px - t * dx, py - t * dy);
            if ex * ex + ey * ey <= half_w * half_w {
                bits[y * width + x] = true;
            }
        }
    }
}

/// Zeroes the unknown region: known pixels copy through bit-identically.
pub fn corrupt_flow<T: Scalar>(flow: &FlowField<T>, keep: &KeepMask) -> Result<FlowField<T>> {
    keep.mask().check_dims_match(flow.width(), flow.height())?;
    FlowField::from_fn(flow.width(), flow.height(), |x, y| {
        if keep.mask().get(x, y) {
            flow.get(x, y)
        } else {
            (T::zero(), T::zero())
        }
    })
}

/// Flags pixels whose forward flow is not cancelled by the backward flow
/// sampled at the displaced position, or whose sample falls out of bounds.
pub fn forward_backward_consistency<T: Scalar>(
    forward: &FlowField<T>,
    backward: &FlowField<T>,
    tau: f64,
) -> Result<BinaryMask> {
    backward.check_dims_match(forward.width(), forward.height())?;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail validation
    if !(tau > 0.0) {
        return Err(Error::InvalidParams("tau must be > 0".into()));
    }
    let (w, h) = (forward.width(), forward.height());
    BinaryMask::from_fn(w, h, |x, y| {
        let (uf, vf) = forward.get(x, y);
        let (uf, vf) = (uf.widen(), vf.widen());
        let sx = x as f64 + uf;
        let sy = y as f64 + vf;
        let (ub, ok_u) = bilinear_sample(backward.u(), w, h, sx, sy);
        let (vb, _) = bilinear_sample(backward.v(), w, h, sx, sy);
        if !ok_u {
            return true;
        }
        let ru = uf + ub.widen();
        let rv = vf + vb.widen();
        (ru * ru + rv * rv).sqrt() > tau
    })
}

// ---------------------------------------------------------------------------
// Variational solver
// ---------------------------------------------------------------------------

/// One pyramid level of the constrained smoothness problem.
struct Level {
    w: usize,
    h: usize,
    known: Vec<bool>,
    known_u: Vec<f64>,
    known_v: Vec<f64>,
    shape: Vec<bool>,
    /// Per-stencil weights, indexed by stencil center.
    wx: Vec<f64>,
    wy: Vec<f64>,
    /// Diagonal of the (half-)Hessian; 0 marks pixels no stencil touches.
    diag: Vec<f64>,
    boundary_weight: f64,
}

impl Level {
    fn build(
        w: usize,
        h: usize,
        known: Vec<bool>,
        known_u: Vec<f64>,
        known_v: Vec<f64>,
        shape: Vec<bool>,
        boundary_weight: f64,
    ) -> Level {
        let mut wx = vec![0.0; w * h];
        let mut wy = vec![0.0; w * h];
        for y in 0..h {
            for x in 1..w - 1 {
                let i = y * w + x;
                let uniform = shape[i - 1] == shape[i] && shape[i] == shape[i + 1];
                wx[i] = if uniform { 1.0 } else { boundary_weight };
            }
        }
        for y in 1..h - 1 {
            for x in 0..w {
                let i = y * w + x;
                let uniform = shape[i - w] == shape[i] && shape[i] == shape[i + w];
                wy[i] = if uniform { 1.0 } else { boundary_weight };
            }
        }
        let mut diag = vec![0.0; w * h];
        for y in 0..h {
            for x in 1..w - 1 {
                let i = y * w + x;
                diag[i - 1] += wx[i];
                diag[i] += 4.0 * wx[i];
                diag[i + 1] += wx[i];
            }
        }
        for y in 1..h - 1 {
            for x in 0..w {
                let i = y * w + x;
                diag[i - w] += wy[i];
                diag[i] += 4.0 * wy[i];
                diag[i + w] += wy[i];
            }
        }
        Level { w, h, known, known_u, known_v, shape, wx, wy, diag, boundary_weight }
    }

    /// out = A g, where A f = 1/2 dE/df for the weighted energy.
    fn apply(&self, g: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let (w, h) = (self.w, self.h);
        for y in 0..h {
            let row = y * w;
            let gr = &g[row..row + w];
            let or = &mut out[row..row + w];
            let wr = &self.wx[row..row + w];
            for x in 1..w - 1 {
                let wgt = wr[x];
                if wgt == 0.0 {
                    continue;
                }
                let d = wgt * (gr[x - 1] - 2.0 * gr[x] + gr[x + 1]);
                or[x - 1] += d;
                or[x] -= 2.0 * d;
                or[x + 1] += d;
            }
        }
        for y in 1..h - 1 {
            let row = y * w;
            let (above, rest) = out.split_at_mut(row);
            let (center, below) = rest.split_at_mut(w);
            let above = &mut above[row - w..];
            let g0 = &g[row - w..row];
            let g1 = &g[row..row + w];
            let g2 = &g[row + w..row + 2 * w];
            let wr = &self.wy[row..row + w];
            for x in 0..w {
                let wgt = wr[x];
                if wgt == 0.0 {
                    continue;
                }
                let d = wgt * (g0[x] - 2.0 * g1[x] + g2[x]);
                above[x] += d;
                center[x] -= 2.0 * d;
                below[x] += d;
            }
        }
    }

    /// Weighted smoothness energy of both components.
    fn energy(&self, fu: &[f64], fv: &[f64]) -> f64 {
        let (w, h) = (self.w, self.h);
        let mut e = 0.0;
        for comp in [fu, fv] {
            for y in 0..h {
                for x in 1..w - 1 {
                    let i = y * w + x;
                    let d = comp[i - 1] - 2.0 * comp[i] + comp[i + 1];
                    e += self.wx[i] * d * d;
                }
            }
            for y in 1..h - 1 {
                for x in 0..w {
                    let i = y * w + x;
                    let d = comp[i - w] - 2.0 * comp[i] + comp[i + w];
                    e += self.wy[i] * d * d;
                }
            }
        }
        e
    }

    /// Free pixels participate in the solve: unknown and touched by at
    /// least one stencil. Unknown pixels with zero diagonal keep their
    /// initialization.
    fn free(&self) -> Vec<bool> {
        self.known
            .iter()
            .zip(&self.diag)
            .map(|(&k, &d)| !k && d > 0.0)
            .collect()
    }
}

struct CgResult {
    iterations: usize,
    final_update: f64,
    converged: bool,
    energy_samples: Vec<f64>,
}

/// Diagonally preconditioned CG over the free pixels of one component.
/// `f` holds the full grid and is updated in place; known pixels never move.
fn solve_component(
    level: &Level,
    f: &mut [f64],
    free: &[bool],
    max_iterations: usize,
    tolerance: f64,
    sample_energy: Option<(&[f64], bool)>, // (other component, self-is-u)
) -> CgResult {
    let n = f.len();
    let mut r = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    level.apply(f, &mut tmp);
    for i in 0..n {
        r[i] = if free[i] { -tmp[i] } else { 0.0 };
    }
    let inv_diag: Vec<f64> = level
        .diag
        .iter()
        .zip(free)
        .map(|(&d, &fr)| if fr { 1.0 / d } else { 0.0 })
        .collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(&a, &b)| a * b).collect();
    let mut p = z.clone();
    let mut rz: f64 = dot(&r, &z);
    let mut energy_samples = Vec::new();
    let mut final_update = 0.0;
    let mut converged = rz == 0.0;
    let mut it = 0;
    while it < max_iterations && !converged {
        level.apply(&p, &mut tmp);
        let mut pq = 0.0f64;
        for i in 0..n {
            if free[i] {
                pq += p[i] * tmp[i];
            } else {
                tmp[i] = 0.0;
            }
        }
        if pq <= 0.0 {
            converged = true;
            break;
        }
        let alpha = rz / pq;
        let mut max_step = 0.0f64;
        let mut rz_new = 0.0f64;
        for i in 0..n {
            if free[i] {
                let step = alpha * p[i];
                f[i] += step;
                max_step = max_step.max(step.abs());
                r[i] -= alpha * tmp[i];
                z[i] = r[i] * inv_diag[i];
                rz_new += r[i] * z[i];
            }
        }
        let beta = if rz > 0.0 { rz_new / rz } else { 0.0 };
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_new;
        it += 1;
        final_update = max_step;
        if let Some((other, self_is_u)) = sample_energy {
            if it % 100 == 0 {
                let e = if self_is_u {
                    level.energy(f, other)
                } else {
                    level.energy(other, f)
                };
                energy_samples.push(e);
            }
        }
        if max_step < tolerance || rz == 0.0 {
            converged = true;
        }
    }
    CgResult { iterations: it, final_update, converged, energy_samples }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

/// Half-resolution restriction of the level inputs. A coarse pixel is known
/// if any covered fine pixel is known, with the mean of the known values.
fn restrict(level: &Level) -> Level {
    let (w, h) = (level.w, level.h);
    let cw = w.div_ceil(2);
    let ch = h.div_ceil(2);
    let mut known = vec![false; cw * ch];
    let mut ku = vec![0.0; cw * ch];
    let mut kv = vec![0.0; cw * ch];
    let mut shape = vec![false; cw * ch];
    for cy in 0..ch {
        for cx in 0..cw {
            let mut su = 0.0;
            let mut sv = 0.0;
            let mut kn = 0u32;
            let mut sh = 0u32;
            let mut total = 0u32;
            for dy in 0..2 {
                for dx in 0..2 {
                    let x = cx * 2 + dx;
                    let y = cy * 2 + dy;
                    if x >= w || y >= h {
                        continue;
                    }
                    let i = y * w + x;
                    total += 1;
                    if level.shape[i] {
                        sh += 1;
                    }
                    if level.known[i] {
                        kn += 1;
                        su += level.known_u[i];
                        sv += level.known_v[i];
                    }
                }
            }
            let ci = cy * cw + cx;
            shape[ci] = sh * 2 >= total;
            if kn > 0 {
                known[ci] = true;
                ku[ci] = su / kn as f64;
                kv[ci] = sv / kn as f64;
            }
        }
    }
    Level::build(cw, ch, known, ku, kv, shape, level.boundary_weight)
}

/// Bilinear prolongation aligned on 2x2 block centers. Border bands are
/// linearly extrapolated rather than clamped, so affine fields prolong
/// exactly and the fine level starts from an already-smooth iterate.
fn prolong(coarse: &[f64], cw: usize, ch: usize, fw: usize, fh: usize) -> Vec<f64> {
    let mut fine = vec![0.0; fw * fh];
    for y in 0..fh {
        for x in 0..fw {
            let cx = (x as f64 - 0.5) / 2.0;
            let cy = (y as f64 - 0.5) / 2.0;
            let x0 = (cx.floor() as i64).clamp(0, cw as i64 - 2) as usize;
            let y0 = (cy.floor() as i64).clamp(0, ch as i64 - 2) as usize;
            let fx = cx - x0 as f64;
            let fy = cy - y0 as f64;
            let p00 = coarse[y0 * cw + x0];
            let p10 = coarse[y0 * cw + x0 + 1];
            let p01 = coarse[(y0 + 1) * cw + x0];
            let p11 = coarse[(y0 + 1) * cw + x0 + 1];
            let top = p00 + fx * (p10 - p00);
            let bot = p01 + fx * (p11 - p01);
            fine[y * fw + x] = top + fy * (bot - top);
        }
    }
    fine
}

/// Fills the unknown region of a corrupted flow field by minimizing the
/// shape-weighted second-order smoothness energy with the known pixels as
/// hard constraints. Known pixels pass through bit-identically.
pub fn calibrate<T: Scalar>(
    corrupted: &FlowField<T>,
    keep: &KeepMask,
    shape_guidance: &BinaryMask,
    params: &CalibrationParams,
) -> Result<CalibrationOutcome<T>> {
    params.validate()?;
    let (w, h) = (corrupted.width(), corrupted.height());
    keep.mask().check_dims_match(w, h)?;
    shape_guidance.check_dims_match(w, h)?;

    if keep.mask().bits().iter().all(|&b| b) {
        return Ok(CalibrationOutcome {
            flow: corrupted.clone(),
            report: ConvergenceReport {
                iterations: 0,
                final_update: 0.0,
                residual_energy: second_order_energy_or_zero(corrupted),
                energy_samples: Vec::new(),
                converged: true,
            },
        });
    }

    // Pyramid, finest first. Coarsest stays at least 8 pixels on a side.
    let finest = Level::build(
        w,
        h,
        keep.mask().bits().to_vec(),
        corrupted.u().iter().map(|v| v.widen()).collect(),
        corrupted.v().iter().map(|v| v.widen()).collect(),
        shape_guidance.bits().to_vec(),
        params.boundary_weight,
    );
    let mut levels = vec![finest];
    while levels.len() < params.pyramid_levels {
        let last = levels.last().unwrap();
        if last.w / 2 < 8 || last.h / 2 < 8 {
            break;
        }
        let coarse = restrict(last);
        levels.push(coarse);
    }

    // Coarsest initialization: unknowns start at the mean of known values,
    // accumulated in row-major order.
    let coarsest = levels.last().unwrap();
    let (mut fu, mut fv) = {
        let mut su = 0.0;
        let mut sv = 0.0;
        let mut cnt = 0usize;
        for i in 0..coarsest.known.len() {
            if coarsest.known[i] {
                su += coarsest.known_u[i];
                sv += coarsest.known_v[i];
                cnt += 1;
            }
        }
        let mu = su / cnt as f64;
        let mv = sv / cnt as f64;
        let fu: Vec<f64> = coarsest
            .known
            .iter()
            .zip(&coarsest.known_u)
            .map(|(&k, &v)| if k { v } else { mu })
            .collect();
        let fv: Vec<f64> = coarsest
            .known
            .iter()
            .zip(&coarsest.known_v)
            .map(|(&k, &v)| if k { v } else { mv })
            .collect();
        (fu, fv)
    };

    let mut iterations = 0usize;
    let mut final_update = 0.0f64;
    let mut converged = true;
    let mut energy_samples = Vec::new();

    for (li, level) in levels.iter().enumerate().rev() {
        if (fu.len(), fv.len()) != (level.w * level.h, level.w * level.h) {
            // Prolong the previous (coarser) solution onto this level.
            let coarser = &levels[li + 1];
            fu = prolong(&fu, coarser.w, coarser.h, level.w, level.h);
            fv = prolong(&fv, coarser.w, coarser.h, level.w, level.h);
            for i in 0..level.known.len() {
                if level.known[i] {
                    fu[i] = level.known_u[i];
                    fv[i] = level.known_v[i];
                }
            }
        }
        let free = level.free();
        let is_finest = li == 0;
        let ru = solve_component(
            level,
            &mut fu,
            &free,
            params.max_iterations,
            params.tolerance,
            if is_finest { Some((&fv, true)) } else { None },
        );
        let rv = solve_component(
            level,
            &mut fv,
            &free,
            params.max_iterations,
            params.tolerance,
            if is_finest { Some((&fu, false)) } else { None },
        );
        if is_finest {
            iterations = ru.iterations + rv.iterations;
            final_update = ru.final_update.max(rv.final_update);
            converged = ru.converged && rv.converged;
            energy_samples = ru.energy_samples;
            energy_samples.extend(rv.energy_samples);
        }
    }

    // Known pixels are copied bit-identically from the input.
    let flow = FlowField::from_fn(w, h, |x, y| {
        if keep.mask().get(x, y) {
            corrupted.get(x, y)
        } else {
            let i = y * w + x;
            (T::narrow(fu[i]), T::narrow(fv[i]))
        }
    })?;
    let residual_energy = levels[0].energy(
        &flow.u().iter().map(|v| v.widen()).collect::<Vec<_>>(),
        &flow.v().iter().map(|v| v.widen()).collect::<Vec<_>>(),
    );

    Ok(CalibrationOutcome {
        flow,
        report: ConvergenceReport {
            iterations,
            final_update,
            residual_energy,
            energy_samples,
            converged,
        },
    })
}

fn second_order_energy_or_zero<T: Scalar>(flow: &FlowField<T>) -> f64 {
    crate::kernel::second_order_smoothness(flow)
        .map(|(e, _)| e)
        .unwrap_or(0.0)
}

/// Calibrates each frame of a sequence; errors carry the frame index.
pub fn sequence_calibrate<T: Scalar>(
    flows: &FlowSequence<T>,
    keeps: &[KeepMask],
    shape_guidance: &BinaryMask,
    params: &CalibrationParams,
) -> Result<(FlowSequence<T>, Vec<ConvergenceReport>)> {
    if keeps.len() != flows.len() {
        return Err(Error::LengthMismatch {
            what: "keep masks",
            expected: flows.len(),
            got: keeps.len(),
        });
    }
    let mut fields = Vec::with_capacity(flows.len());
    let mut reports = Vec::with_capacity(flows.len());
    for (i, (flow, keep)) in flows.fields().iter().zip(keeps).enumerate() {
        let outcome =
            calibrate(flow, keep, shape_guidance, params).map_err(|e| e.at_frame(i))?;
        fields.push(outcome.flow);
        reports.push(outcome.report);
    }
    Ok((FlowSequence::new(fields, flows.direction())?, reports))
}
