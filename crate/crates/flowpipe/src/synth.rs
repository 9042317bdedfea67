//! Synthetic rigid-motion scenes with exact analytic ground truth: frames,
//! forward/backward flows, and object masks. Object texture is a seeded
//! speckle defined in object coordinates, so it travels with the motion and
//! keeps the warping error a meaningful signal on piecewise-constant scenes.

use crate::error::{Error, Result};
use crate::field::{BinaryMask, FlowDirection, FlowField, FlowSequence, Frame, MaskSequence};
use crate::kernel::round_half_up;
use crate::rng::hash2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    TranslatingDisk,
    RotatingSquare,
    TwoObject,
}

/// Rigid motion of one object, per frame step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Motion {
    /// Pixels per frame.
    Translate { vx: f64, vy: f64 },
    /// Radians per frame, about the object center.
    Rotate { omega: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// Disk of the given radius.
    Disk,
    /// Axis-aligned square (at t=0) with the given half-width.
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectSpec {
    pub shape: Shape,
    pub center: (f64, f64),
    pub size: f64,
    pub motion: Motion,
    pub intensity: [u8; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    pub kind: SceneKind,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub objects: Vec<ObjectSpec>,
    pub background: [u8; 3],
    /// Speckle amplitude in 8-bit counts, applied to every channel.
    pub speckle_amplitude: u8,
    pub seed: u64,
}

impl SceneSpec {
    pub fn translating_disk(
        width: usize,
        height: usize,
        frame_count: usize,
        center: (f64, f64),
        radius: f64,
        velocity: (f64, f64),
        seed: u64,
    ) -> Self {
        Self {
            kind: SceneKind::TranslatingDisk,
            width,
            height,
            frame_count,
            objects: vec![ObjectSpec {
                shape: Shape::Disk,
                center,
                size: radius,
                motion: Motion::Translate { vx: velocity.0, vy: velocity.1 },
                intensity: [200, 60, 60],
            }],
            background: [40, 40, 80],
            speckle_amplitude: 8,
            seed,
        }
    }

    pub fn rotating_square(
        width: usize,
        height: usize,
        frame_count: usize,
        center: (f64, f64),
        half_width: f64,
        omega: f64,
        seed: u64,
    ) -> Self {
        Self {
            kind: SceneKind::RotatingSquare,
            width,
            height,
            frame_count,
            objects: vec![ObjectSpec {
                shape: Shape::Square,
                center,
                size: half_width,
                motion: Motion::Rotate { omega },
                intensity: [60, 200, 60],
            }],
            background: [40, 40, 80],
            speckle_amplitude: 8,
            seed,
        }
    }

    pub fn two_object(
        width: usize,
        height: usize,
        frame_count: usize,
        first: ObjectSpec,
        second: ObjectSpec,
        seed: u64,
    ) -> Self {
        Self {
            kind: SceneKind::TwoObject,
            width,
            height,
            frame_count,
            objects: vec![first, second],
            background: [40, 40, 80],
            speckle_amplitude: 8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidSpec(format!(
                "dimensions {}x{}",
                self.width, self.height
            )));
        }
        if self.frame_count < 2 {
            return Err(Error::InvalidSpec(format!(
                "frame_count must be >= 2, got {}",
                self.frame_count
            )));
        }
        let expected_objects = match self.kind {
            SceneKind::TwoObject => 2,
            _ => 1,
        };
        if self.objects.len() != expected_objects {
            return Err(Error::InvalidSpec(format!(
                "{:?} expects {} object(s), got {}",
                self.kind,
                expected_objects,
                self.objects.len()
            )));
        }
        for obj in &self.objects {
            if obj.size <= 0.0 {
                return Err(Error::InvalidSpec("object size must be > 0".into()));
            }
            let (cx, cy) = obj.center;
            if cx < 0.0 || cy < 0.0 || cx >= self.width as f64 || cy >= self.height as f64 {
                return Err(Error::InvalidSpec(format!(
                    "object center ({cx},{cy}) outside {}x{} frame",
                    self.width, self.height
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub frames: Vec<Frame>,
    pub flows: FlowSequence<f32>,
    pub backward_flows: FlowSequence<f32>,
    pub masks: MaskSequence,
}

impl ObjectSpec {
    /// Object-local coordinates of pixel p at time t (frames since start).
    fn to_object(self, px: f64, py: f64, t: f64) -> (f64, f64) {
        let (cx, cy) = self.center;
        match self.motion {
            Motion::Translate { vx, vy } => (px - cx - t * vx, py - cy - t * vy),
            Motion::Rotate { omega } => {
                let a = -omega * t;
                let (dx, dy) = (px - cx, py - cy);
                (dx * a.cos() - dy * a.sin(), dx * a.sin() + dy * a.cos())
            }
        }
    }

    fn contains(&self, px: f64, py: f64, t: f64) -> bool {
        let (qx, qy) = self.to_object(px, py, t);
        match self.shape {
            Shape::Disk => qx * qx + qy * qy <= self.size * self.size,
            Shape::Square => qx.abs() <= self.size && qy.abs() <= self.size,
        }
    }

    /// Displacement of pixel p from frame t to frame t + dir (dir = +-1).
    fn displacement(&self, px: f64, py: f64, _t: f64, dir: f64) -> (f64, f64) {
        let (cx, cy) = self.center;
        match self.motion {
            Motion::Translate { vx, vy } => (dir * vx, dir * vy),
            Motion::Rotate { omega } => {
                let a = dir * omega;
                let (dx, dy) = (px - cx, py - cy);
                (
                    dx * a.cos() - dy * a.sin() - dx,
                    dx * a.sin() + dy * a.cos() - dy,
                )
            }
        }
    }
}

/// Generates the full scene: N frames, N-1 forward and backward flows,
/// N analytic masks. Deterministic in the spec (including the seed).
pub fn generate(spec: &SceneSpec) -> Result<SyntheticScene> {
    spec.validate()?;
    let (w, h, n) = (spec.width, spec.height, spec.frame_count);
    let amp = spec.speckle_amplitude as i64;

    let mut frames = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for t in 0..n {
        let tf = t as f64;
        let mut frame = Frame::filled(w, h, spec.background)?;
        let mut bits = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                let (pxf, pyf) = (x as f64, y as f64);
                // First listed object is in front.
                let owner = spec.objects.iter().enumerate().find(|(_, o)| o.contains(pxf, pyf, tf));
                let (base, speckle) = match owner {
                    Some((oi, obj)) => {
                        bits[y * w + x] = true;
                        let (qx, qy) = obj.to_object(pxf, pyf, tf);
                        let s = hash2(
                            spec.seed ^ (oi as u64 + 1),
                            round_half_up(qx),
                            round_half_up(qy),
                        );
                        (obj.intensity, s)
                    }
                    None => (spec.background, hash2(spec.seed, x as i64, y as i64)),
                };
                if amp > 0 {
                    let noise = (speckle % (2 * amp as u64 + 1)) as i64 - amp;
                    let mut px = [0u8; 3];
                    for c in 0..3 {
                        px[c] = (base[c] as i64 + noise).clamp(0, 255) as u8;
                    }
                    frame.set(x, y, px);
                } else {
                    frame.set(x, y, base);
                }
            }
        }
        frames.push(frame);
        masks.push(BinaryMask::new(w, h, bits)?);
    }

    let mut fwd = Vec::with_capacity(n - 1);
    let mut bwd = Vec::with_capacity(n - 1);
    for t in 0..n - 1 {
        let tf = t as f64;
        let fwd_field = FlowField::from_fn(w, h, |x, y| {
            let (pxf, pyf) = (x as f64, y as f64);
            match spec.objects.iter().find(|o| o.contains(pxf, pyf, tf)) {
                Some(obj) => {
                    let (u, v) = obj.displacement(pxf, pyf, tf, 1.0);
                    (u as f32, v as f32)
                }
                None => (0.0, 0.0),
            }
        })?;
        let bwd_field = FlowField::from_fn(w, h, |x, y| {
            let (pxf, pyf) = (x as f64, y as f64);
            match spec.objects.iter().find(|o| o.contains(pxf, pyf, tf + 1.0)) {
                Some(obj) => {
                    let (u, v) = obj.displacement(pxf, pyf, tf + 1.0, -1.0);
                    (u as f32, v as f32)
                }
                None => (0.0, 0.0),
            }
        })?;
        fwd.push(fwd_field);
        bwd.push(bwd_field);
    }

    Ok(SyntheticScene {
        frames,
        flows: FlowSequence::new(fwd, FlowDirection::Forward)?,
        backward_flows: FlowSequence::new(bwd, FlowDirection::Backward)?,
        masks: MaskSequence::new(masks)?,
    })
}

/// Nearest-neighbor scaling of a mask about a center point, clipped to the
/// frame. Simulates an edited first-frame mask with a shape change.
pub fn scale_mask(mask: &BinaryMask, factor: f64, about: (f64, f64)) -> Result<BinaryMask> {
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail validation
    if !(factor > 0.0) {
        return Err(Error::InvalidParams(format!(
            "scale factor must be > 0, got {factor}"
        )));
    }
    let (w, h) = (mask.width(), mask.height());
    BinaryMask::from_fn(w, h, |x, y| {
        let sx = round_half_up(about.0 + (x as f64 - about.0) / factor);
        let sy = round_half_up(about.1 + (y as f64 - about.1) / factor);
        sx >= 0 && sy >= 0 && (sx as usize) < w && (sy as usize) < h
            && mask.get(sx as usize, sy as usize)
    })
}
