//! Acceptance gate: one test per criterion, each printing a PASS/FAIL line.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use flowpipe::cli;
use flowpipe::config::RunConfig;
use flowpipe::field::{BinaryMask, FlowDirection, FlowField, FlowSequence, Frame};
use flowpipe::imp::{propagate_sequence, PropagationOptions, WarpSource};
use flowpipe::io::{read_flo, read_frame, read_mask, write_flo, write_frame, write_mask, IoError};
use flowpipe::kernel::{
    backward_sample_mask, composite_flow, forward_splat_mask, mean_flow_over_mask,
    second_order_smoothness, second_order_smoothness_gradient, FillPolicy,
};
use flowpipe::metrics::{endpoint_error, mask_iou, warping_error};
use flowpipe::scfc::{calibrate, corrupt_flow, generate_corruption_masks, CalibrationParams, CorruptionParams};
use flowpipe::synth::{generate, scale_mask, SceneSpec};

fn report(name: &str, result: Result<(), String>) {
    match result {
        Ok(()) => println!("acceptance {name}: PASS"),
        Err(msg) => {
            println!("acceptance {name}: FAIL ({msg})");
            panic!("{name}: {msg}");
        }
    }
}

fn random_flow(rng: &mut ChaCha8Rng, w: usize, h: usize, amp: f32) -> FlowField<f32> {
    FlowField::from_fn(w, h, |_, _| {
        (rng.gen_range(-amp..amp), rng.gen_range(-amp..amp))
    })
    .unwrap()
}

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(w, h, |_, _| rng.gen_bool(density)).unwrap()
}

fn nonempty_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, density: f64) -> BinaryMask {
    loop {
        let m = random_mask(rng, w, h, density);
        if m.count() > 0 {
            return m;
        }
    }
}

// 1. Pseudo-flow partition: output differs from the input flow only inside
//    the edited mask and equals the mean flow there, pixel-exact.
#[test]
fn criterion_1_pseudo_flow_partition() {
    report("1 pseudo-flow partition", (|| {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(101);
        for case in 0..200 {
            let w = rng.gen_range(8..=64);
            let h = rng.gen_range(8..=64);
            let flow = random_flow(&mut rng, w, h, 5.0);
            let mask = nonempty_mask(&mut rng, w, h, 0.3);
            let mean = mean_flow_over_mask(&flow, &mask).unwrap();
            let pseudo = composite_flow(&flow, &mask, mean).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let (pu, pv) = pseudo.get(x, y);
                    let (fu, fv) = flow.get(x, y);
                    let want = if mask.get(x, y) {
                        (mean.u_mean, mean.v_mean)
                    } else {
                        (fu, fv)
                    };
                    if pu.to_bits() != want.0.to_bits() || pv.to_bits() != want.1.to_bits() {
                        return Err(format!("case {case}: mismatch at ({x},{y})"));
                    }
                }
            }
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() >= 5.0 {
            return Err(format!("took {elapsed:?}, budget 5 s"));
        }
        Ok(())
    })());
}

// 2. Mask-propagation oracle: translating disk, 16 frames, velocity (2,0),
//    edited mask scaled x1.5. Per-frame IoU vs the analytically translated
//    edited mask >= 0.95; mean flows within 1e-5 of (2,0).
#[test]
fn criterion_2_translation_oracle() {
    report("2 translation oracle", (|| {
        let start = Instant::now();
        let spec = SceneSpec::translating_disk(96, 64, 16, (24.0, 32.0), 8.0, (2.0, 0.0), 3);
        let scene = generate(&spec).map_err(|e| e.to_string())?;
        let edited = scale_mask(&scene.masks.masks()[0], 1.5, (24.0, 32.0)).unwrap();
        let result = propagate_sequence(
            &scene.flows,
            &scene.masks,
            &edited,
            PropagationOptions::default(),
        )
        .map_err(|e| e.to_string())?;
        for (k, m) in result.mean_flows.iter().enumerate() {
            if (m.u_mean - 2.0).abs() > 1e-5 || m.v_mean.abs() > 1e-5 {
                return Err(format!("frame {k}: mean ({}, {})", m.u_mean, m.v_mean));
            }
        }
        for k in 0..16 {
            let expected = BinaryMask::from_fn(96, 64, |x, y| {
                x >= 2 * k && edited.get(x - 2 * k, y)
            })
            .unwrap();
            let iou = mask_iou(&result.edited_masks.masks()[k], &expected).unwrap();
            if iou < 0.95 {
                return Err(format!("frame {k}: IoU {iou:.4} < 0.95"));
            }
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() >= 2.0 {
            return Err(format!("took {elapsed:?}, budget 2 s"));
        }
        Ok(())
    })());
}

// 3. Rotation oracle: square rotating 5 deg/frame over 12 frames; the
//    propagated mask tracks the analytic rotated mask with IoU >= 0.90.
//    Uses warp_source = original-flow: rotation
//    about the center has near-zero mean flow, so only the per-pixel flow
//    carries the turning motion.
#[test]
fn criterion_3_rotation_oracle() {
    report("3 rotation oracle", (|| {
        let omega = 5f64.to_radians();
        let spec = SceneSpec::rotating_square(160, 160, 12, (80.0, 80.0), 40.0, omega, 5);
        let scene = generate(&spec).map_err(|e| e.to_string())?;
        let edited = scene.masks.masks()[0].clone();
        let opts = PropagationOptions {
            warp_source: WarpSource::OriginalFlow,
            ..PropagationOptions::default()
        };
        let result = propagate_sequence(&scene.flows, &scene.masks, &edited, opts)
            .map_err(|e| e.to_string())?;
        for k in 0..12 {
            let iou = mask_iou(&result.edited_masks.masks()[k], &scene.masks.masks()[k])
                .unwrap();
            if iou < 0.90 {
                return Err(format!("frame {k}: IoU {iou:.4} < 0.90"));
            }
        }
        Ok(())
    })());
}

// 4. Calibration exactness: corrupted constant and affine fields at 256x256
//    are recovered to <= 1e-4 / 1e-3 px max error; known pixels bit-exact.
#[test]
fn criterion_4_calibration_exactness() {
    report("4 calibration exactness", (|| {
        let start = Instant::now();
        let (w, h) = (256usize, 256usize);
        let constant = FlowField::<f32>::constant(w, h, 3.25, -1.5).unwrap();
        let affine = FlowField::<f32>::from_fn(w, h, |x, y| {
            (
                1.0 + 0.01 * x as f32 + 0.02 * y as f32,
                2.0 - 0.015 * x as f32 + 0.01 * y as f32,
            )
        })
        .unwrap();
        let params = CalibrationParams {
            pyramid_levels: 6,
            ..CalibrationParams::default()
        };
        let shape = BinaryMask::filled(w, h, false).unwrap();
        for (name, field, tol) in [("constant", &constant, 1e-4), ("affine", &affine, 1e-3)] {
            let corruption = CorruptionParams {
                seed: 42,
                ..CorruptionParams::default()
            };
            let keep = generate_corruption_masks(w, h, 1, &corruption)
                .map_err(|e| e.to_string())?
                .remove(0);
            let frac = keep.corrupted_fraction();
            if !(0.2..=0.5).contains(&frac) {
                return Err(format!("{name}: corrupted fraction {frac:.3} out of range"));
            }
            let corrupted = corrupt_flow(field, &keep).unwrap();
            let outcome = calibrate(&corrupted, &keep, &shape, &params)
                .map_err(|e| e.to_string())?;
            let mut max_err = 0f64;
            for i in 0..w * h {
                if keep.mask().bits()[i] {
                    if outcome.flow.u()[i].to_bits() != field.u()[i].to_bits()
                        || outcome.flow.v()[i].to_bits() != field.v()[i].to_bits()
                    {
                        return Err(format!("{name}: known pixel {i} not bit-exact"));
                    }
                } else {
                    let du = (outcome.flow.u()[i] - field.u()[i]).abs() as f64;
                    let dv = (outcome.flow.v()[i] - field.v()[i]).abs() as f64;
                    max_err = max_err.max(du).max(dv);
                }
            }
            if max_err > tol {
                return Err(format!("{name}: max error {max_err:.2e} > {tol:.0e}"));
            }
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() >= 5.0 {
            return Err(format!("took {elapsed:?}, budget 5 s"));
        }
        Ok(())
    })());
}

// 5. Analytic smoothness gradient vs central finite differences.
#[test]
fn criterion_5_smoothness_gradient() {
    report("5 smoothness gradient", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(505);
        let step = 1e-3;
        for case in 0..20 {
            let flow = FlowField::<f64>::from_fn(16, 16, |_, _| {
                (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
            })
            .unwrap();
            let (gu, gv) = second_order_smoothness_gradient(&flow).unwrap();
            let mut num = 0.0f64;
            let mut den = 0.0f64;
            for i in 0..flow.len() {
                for (comp, analytic) in [(0usize, gu[i]), (1, gv[i])] {
                    let perturbed = |delta: f64| {
                        let mut u = flow.u().to_vec();
                        let mut v = flow.v().to_vec();
                        if comp == 0 {
                            u[i] += delta;
                        } else {
                            v[i] += delta;
                        }
                        let f = FlowField::from_components(16, 16, u, v).unwrap();
                        second_order_smoothness(&f).unwrap().0
                    };
                    let fd = (perturbed(step) - perturbed(-step)) / (2.0 * step);
                    num += (analytic - fd) * (analytic - fd);
                    den += fd * fd;
                }
            }
            let rel = (num / den.max(1.0)).sqrt();
            if rel > 1e-4 {
                return Err(format!("case {case}: relative error {rel:.2e} > 1e-4"));
            }
        }
        Ok(())
    })());
}

// 6. Warping-error sanity on every synthetic scene kind.
#[test]
fn criterion_6_warping_error_sanity() {
    report("6 warping-error sanity", (|| {
        let specs = [SceneSpec::translating_disk(64, 64, 6, (16.0, 32.0), 8.0, (2.0, 0.0), 1),
            SceneSpec::rotating_square(64, 64, 6, (32.0, 32.0), 10.0, 5f64.to_radians(), 2),
            flowpipe::synth::SceneSpec::two_object(
                96,
                64,
                6,
                flowpipe::synth::ObjectSpec {
                    shape: flowpipe::synth::Shape::Disk,
                    center: (20.0, 32.0),
                    size: 7.0,
                    motion: flowpipe::synth::Motion::Translate { vx: 2.0, vy: 1.0 },
                    intensity: [200, 60, 60],
                },
                flowpipe::synth::ObjectSpec {
                    shape: flowpipe::synth::Shape::Square,
                    center: (70.0, 32.0),
                    size: 9.0,
                    motion: flowpipe::synth::Motion::Rotate { omega: 5f64.to_radians() },
                    intensity: [60, 200, 60],
                },
                3,
            )];
        for (i, spec) in specs.iter().enumerate() {
            let scene = generate(spec).map_err(|e| e.to_string())?;
            let (_, we_gt) = warping_error(&scene.frames, &scene.flows, None).unwrap();
            if we_gt > 1.0 {
                return Err(format!("scene {i}: WE(gt) = {we_gt:.4} > 1.0"));
            }
            let zeros = FlowSequence::new(
                (0..scene.flows.len())
                    .map(|_| FlowField::<f32>::zeros(spec.width, spec.height).unwrap())
                    .collect(),
                FlowDirection::Forward,
            )
            .unwrap();
            let (_, we_zero) = warping_error(&scene.frames, &zeros, None).unwrap();
            if we_zero <= we_gt {
                return Err(format!(
                    "scene {i}: WE(zero) = {we_zero:.4} <= WE(gt) = {we_gt:.4}"
                ));
            }
        }
        // Static scene with zero flow: exactly zero.
        let static_spec = SceneSpec::translating_disk(48, 48, 5, (24.0, 24.0), 8.0, (0.0, 0.0), 9);
        let scene = generate(&static_spec).map_err(|e| e.to_string())?;
        let (_, we) = warping_error(&scene.frames, &scene.flows, None).unwrap();
        if we != 0.0 {
            return Err(format!("static scene WE = {we:e}, expected exactly 0"));
        }
        Ok(())
    })());
}

// 7. Brute-force equivalence against independently written double-loop
//    oracles on 200 random 8x8 instances.
#[test]
fn criterion_7_brute_force_equivalence() {
    report("7 brute-force equivalence", (|| {
        let mut rng = ChaCha8Rng::seed_from_u64(707);
        for case in 0..200 {
            let (w, h) = (8usize, 8usize);
            let flow = random_flow(&mut rng, w, h, 4.0);
            let mask = nonempty_mask(&mut rng, w, h, 0.4);
            let other = nonempty_mask(&mut rng, w, h, 0.4);

            // mean
            let mean = mean_flow_over_mask(&flow, &mask).unwrap();
            let (mut su, mut sv, mut cnt) = (0.0f64, 0.0f64, 0usize);
            for y in 0..h {
                for x in 0..w {
                    if mask.get(x, y) {
                        let (u, v) = flow.get(x, y);
                        su += u as f64;
                        sv += v as f64;
                        cnt += 1;
                    }
                }
            }
            let (mu, mv) = ((su / cnt as f64) as f32, (sv / cnt as f64) as f32);
            if mean.u_mean.to_bits() != mu.to_bits()
                || mean.v_mean.to_bits() != mv.to_bits()
                || mean.support_count != cnt
            {
                return Err(format!("case {case}: mean mismatch"));
            }

            // composite
            let pseudo = composite_flow(&flow, &mask, mean).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let got = pseudo.get(x, y);
                    let want = if mask.get(x, y) { (mu, mv) } else { flow.get(x, y) };
                    if got.0.to_bits() != want.0.to_bits() || got.1.to_bits() != want.1.to_bits() {
                        return Err(format!("case {case}: composite mismatch at ({x},{y})"));
                    }
                }
            }

            // forward splat, raw
            let splat = forward_splat_mask(&mask, &flow, FillPolicy::None).unwrap();
            let mut want = vec![false; w * h];
            for y in 0..h {
                for x in 0..w {
                    if !mask.get(x, y) {
                        continue;
                    }
                    let (u, v) = flow.get(x, y);
                    let tx = (x as f64 + u as f64 + 0.5).floor() as i64;
                    let ty = (y as f64 + v as f64 + 0.5).floor() as i64;
                    if tx >= 0 && ty >= 0 && tx < w as i64 && ty < h as i64 {
                        want[ty as usize * w + tx as usize] = true;
                    }
                }
            }
            if splat.bits() != want.as_slice() {
                return Err(format!("case {case}: splat mismatch"));
            }

            // backward sample
            let sampled = backward_sample_mask(&mask, &flow, 0.5).unwrap();
            for y in 0..h {
                for x in 0..w {
                    let (u, v) = flow.get(x, y);
                    let (sx, sy) = (x as f64 + u as f64, y as f64 + v as f64);
                    let inside =
                        sx >= 0.0 && sx <= (w - 1) as f64 && sy >= 0.0 && sy <= (h - 1) as f64;
                    let want = if inside {
                        let x0 = sx.floor() as usize;
                        let y0 = sy.floor() as usize;
                        let x1 = (x0 + 1).min(w - 1);
                        let y1 = (y0 + 1).min(h - 1);
                        let (fx, fy) = (sx - x0 as f64, sy - y0 as f64);
                        let g = |xx: usize, yy: usize| if mask.get(xx, yy) { 1.0 } else { 0.0 };
                        let top = g(x0, y0) + fx * (g(x1, y0) - g(x0, y0));
                        let bot = g(x0, y1) + fx * (g(x1, y1) - g(x0, y1));
                        top + fy * (bot - top) >= 0.5
                    } else {
                        false
                    };
                    if sampled.get(x, y) != want {
                        return Err(format!("case {case}: sample mismatch at ({x},{y})"));
                    }
                }
            }

            // EPE
            let gt = random_flow(&mut rng, w, h, 4.0);
            let epe = endpoint_error(&flow, &gt, None).unwrap();
            let mut sum = 0.0f64;
            for y in 0..h {
                for x in 0..w {
                    let (eu, ev) = flow.get(x, y);
                    let (gu, gv) = gt.get(x, y);
                    let (du, dv) = (eu as f64 - gu as f64, ev as f64 - gv as f64);
                    sum += (du * du + dv * dv).sqrt();
                }
            }
            if epe != sum / (w * h) as f64 {
                return Err(format!("case {case}: epe mismatch"));
            }

            // IoU
            let iou = mask_iou(&mask, &other).unwrap();
            let (mut inter, mut union) = (0usize, 0usize);
            for y in 0..h {
                for x in 0..w {
                    let (a, b) = (mask.get(x, y), other.get(x, y));
                    inter += (a && b) as usize;
                    union += (a || b) as usize;
                }
            }
            if iou != inter as f64 / union as f64 {
                return Err(format!("case {case}: iou mismatch"));
            }
        }
        Ok(())
    })());
}

// 8. Serialization: round-trip bit-exactness, the 268-byte size law, and
//    malformed-input rejection.
#[test]
fn criterion_8_serialization() {
    report("8 serialization", (|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let mut rng = ChaCha8Rng::seed_from_u64(808);
        for case in 0..100 {
            let w = rng.gen_range(1..=24);
            let h = rng.gen_range(1..=24);
            let flow = random_flow(&mut rng, w, h, 100.0);
            let p = dir.path().join(format!("f{case}.flo"));
            write_flo(&flow, &p).map_err(|e| e.to_string())?;
            let back = read_flo(&p).map_err(|e| e.to_string())?;
            let bits = |f: &FlowField<f32>| -> Vec<u32> {
                f.u().iter().chain(f.v()).map(|v| v.to_bits()).collect()
            };
            if bits(&back) != bits(&flow) {
                return Err(format!("case {case}: .flo round trip not bit-exact"));
            }

            let mask = random_mask(&mut rng, w, h, 0.5);
            let p = dir.path().join(format!("m{case}.pgm"));
            write_mask(&mask, &p).map_err(|e| e.to_string())?;
            if read_mask(&p).map_err(|e| e.to_string())? != mask {
                return Err(format!("case {case}: PGM round trip mismatch"));
            }

            let mut frame = Frame::filled(w, h, [0, 0, 0]).unwrap();
            for y in 0..h {
                for x in 0..w {
                    frame.set(x, y, [rng.gen(), rng.gen(), rng.gen()]);
                }
            }
            let p = dir.path().join(format!("i{case}.ppm"));
            write_frame(&frame, &p).map_err(|e| e.to_string())?;
            if read_frame(&p).map_err(|e| e.to_string())? != frame {
                return Err(format!("case {case}: PPM round trip mismatch"));
            }
        }

        // Size law: 12-byte header + 8x4x2 f32 = 268 bytes.
        let flow = FlowField::<f32>::zeros(8, 4).unwrap();
        let p = dir.path().join("law.flo");
        write_flo(&flow, &p).map_err(|e| e.to_string())?;
        let size = std::fs::metadata(&p).map_err(|e| e.to_string())?.len();
        if size != 268 {
            return Err(format!("8x4 .flo is {size} bytes, expected 268"));
        }

        // Malformed inputs.
        let bad_magic = dir.path().join("bad_magic.flo");
        std::fs::write(&bad_magic, [0u8; 268]).map_err(|e| e.to_string())?;
        if !matches!(read_flo(&bad_magic), Err(IoError::BadMagic { .. })) {
            return Err("bad magic accepted".into());
        }
        let truncated = dir.path().join("trunc.flo");
        let full = std::fs::read(&p).map_err(|e| e.to_string())?;
        std::fs::write(&truncated, &full[..full.len() - 5]).map_err(|e| e.to_string())?;
        if !matches!(read_flo(&truncated), Err(IoError::TruncatedFile { .. })) {
            return Err("truncated .flo accepted".into());
        }
        // Non-finite payload: a .flo with a NaN component must be rejected
        // on read (FlowField cannot even be constructed from one).
        let nan_flo = dir.path().join("nan.flo");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&202021.25f32.to_le_bytes());
        bytes.extend_from_slice(&2i32.to_le_bytes());
        bytes.extend_from_slice(&1i32.to_le_bytes());
        bytes.extend_from_slice(&f32::NAN.to_le_bytes());
        bytes.extend_from_slice(&[0u8; 12]);
        std::fs::write(&nan_flo, &bytes).map_err(|e| e.to_string())?;
        if read_flo(&nan_flo).is_ok() {
            return Err("NaN .flo accepted".into());
        }
        if FlowField::from_components(2, 2, vec![f32::NAN; 4], vec![0.0; 4]).is_ok() {
            return Err("FlowField accepted NaN components".into());
        }
        let p2 = dir.path().join("ascii.pgm");
        std::fs::write(&p2, b"P2\n2 2\n255\n0 0 0 0\n").map_err(|e| e.to_string())?;
        if read_mask(&p2).is_ok() {
            return Err("ASCII PGM accepted".into());
        }
        let deep = dir.path().join("deep.pgm");
        std::fs::write(&deep, b"P5\n2 2\n65535\n\0\0\0\0\0\0\0\0").map_err(|e| e.to_string())?;
        if read_mask(&deep).is_ok() {
            return Err("16-bit PGM accepted".into());
        }
        let short_ppm = dir.path().join("short.ppm");
        std::fs::write(&short_ppm, b"P6\n4 4\n255\n\0\0\0").map_err(|e| e.to_string())?;
        if read_frame(&short_ppm).is_ok() {
            return Err("truncated PPM accepted".into());
        }
        Ok(())
    })());
}

// 9. End-to-end determinism: two pipeline runs from the same config give
//    byte-identical output trees.
#[test]
fn criterion_9_pipeline_determinism() {
    report("9 pipeline determinism", (|| {
        let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
        let config_text = |out: &Path| {
            format!(
                r#"
output_root = "{}"
seed = 17

[scene]
kind = "translating-disk"
width = 64
height = 48
frames = 6

[scene.object]
shape = "disk"
center = [16.0, 24.0]
size = 7.0
velocity = [2.0, 0.0]
"#,
                out.display()
            )
        };
        let mut trees = Vec::new();
        for run in 0..2 {
            let out = dir.path().join(format!("run{run}"));
            let cfg_path = dir.path().join(format!("run{run}.toml"));
            std::fs::write(&cfg_path, config_text(&out)).map_err(|e| e.to_string())?;
            let cfg = RunConfig::load(&cfg_path).map_err(|e| e.to_string())?;
            cli::run_pipeline(&cfg).map_err(|e| e.message().to_string())?;
            trees.push(collect_tree(&out)?);
        }
        if trees[0].len() != trees[1].len() {
            return Err(format!(
                "file counts differ: {} vs {}",
                trees[0].len(),
                trees[1].len()
            ));
        }
        for ((name_a, bytes_a), (name_b, bytes_b)) in trees[0].iter().zip(&trees[1]) {
            if name_a != name_b {
                return Err(format!("file set differs: {name_a} vs {name_b}"));
            }
            if bytes_a != bytes_b {
                return Err(format!("{name_a} differs between runs"));
            }
        }
        Ok(())
    })());
}

/// Relative paths and contents of every file under `root`, sorted.
fn collect_tree(root: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) -> Result<(), String> {
        for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
            let entry = entry.map_err(|e| e.to_string())?;
            let path = entry.path();
            if path.is_dir() {
                walk(&path, root, out)?;
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).map_err(|e| e.to_string())?));
            }
        }
        Ok(())
    }
    let mut out = Vec::new();
    walk(root, root, &mut out)?;
    out.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(out)
}
