//! Bit-exact serialization: Middlebury .flo flows, binary PGM masks,
//! binary PPM frames, structured-text reports, and the on-disk sequence
//! layout shared with external flow/segmentation tools.

use std::fs;
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use thiserror::Error;

use crate::field::{BinaryMask, FlowField, Frame};
use crate::metrics::MetricsReport;
use crate::scfc::ConvergenceReport;

pub const FLO_MAGIC: f32 = 202021.25;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("bad .flo magic in {path}")]
    BadMagic { path: PathBuf },
    #[error("bad header in {path}: {reason}")]
    BadHeader { path: PathBuf, reason: String },
    #[error("unsupported maxval {maxval} in {path} (only 255)")]
    UnsupportedMaxval { path: PathBuf, maxval: u32 },
    #[error("truncated file {path}")]
    TruncatedFile { path: PathBuf },
    #[error("non-finite flow value in {path}")]
    NonFiniteValue { path: PathBuf },
    #[error("empty report")]
    EmptyReport,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Field(#[from] crate::error::Error),
}

pub type IoResult<T> = std::result::Result<T, IoError>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io { path: path.to_path_buf(), source }
}

// ---------------------------------------------------------------------------
// Middlebury .flo
// ---------------------------------------------------------------------------

/// Little-endian .flo: f32 magic, i32 width, i32 height, then row-major
/// interleaved (u, v) f32 pairs. Round-trips bit-exactly.
pub fn write_flo(field: &FlowField<f32>, path: &Path) -> IoResult<()> {
    let mut buf =
        Vec::with_capacity(12 + field.width() * field.height() * 8);
    buf.write_f32::<LittleEndian>(FLO_MAGIC).unwrap();
    buf.write_i32::<LittleEndian>(field.width() as i32).unwrap();
    buf.write_i32::<LittleEndian>(field.height() as i32).unwrap();
    for i in 0..field.width() * field.height() {
        buf.write_f32::<LittleEndian>(field.u()[i]).unwrap();
        buf.write_f32::<LittleEndian>(field.v()[i]).unwrap();
    }
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_flo(path: &Path) -> IoResult<FlowField<f32>> {
    let data = fs::read(path).map_err(io_err(path))?;
    let mut cur = std::io::Cursor::new(&data);
    let magic = cur
        .read_f32::<LittleEndian>()
        .map_err(|_| IoError::TruncatedFile { path: path.into() })?;
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(IoError::BadMagic { path: path.into() });
    }
    let w = cur
        .read_i32::<LittleEndian>()
        .map_err(|_| IoError::TruncatedFile { path: path.into() })?;
    let h = cur
        .read_i32::<LittleEndian>()
        .map_err(|_| IoError::TruncatedFile { path: path.into() })?;
    if w < 1 || h < 1 {
        return Err(IoError::BadHeader {
            path: path.into(),
            reason: format!("dimensions {w}x{h}"),
        });
    }
    let (w, h) = (w as usize, h as usize);
    let mut u = Vec::with_capacity(w * h);
    let mut v = Vec::with_capacity(w * h);
    for _ in 0..w * h {
        let uu = cur
            .read_f32::<LittleEndian>()
            .map_err(|_| IoError::TruncatedFile { path: path.into() })?;
        let vv = cur
            .read_f32::<LittleEndian>()
            .map_err(|_| IoError::TruncatedFile { path: path.into() })?;
        if !uu.is_finite() || !vv.is_finite() {
            return Err(IoError::NonFiniteValue { path: path.into() });
        }
        u.push(uu);
        v.push(vv);
    }
    Ok(FlowField::from_components(w, h, u, v)?)
}

// ---------------------------------------------------------------------------
// PGM (P5) masks and PPM (P6) frames
// ---------------------------------------------------------------------------

/// Reads one PNM header token, skipping whitespace and '#' comments.
fn read_token(data: &[u8], pos: &mut usize, path: &Path) -> IoResult<String> {
    while *pos < data.len() {
        let b = data[*pos];
        if b == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
        } else if b.is_ascii_whitespace() {
            *pos += 1;
        } else {
            break;
        }
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(IoError::TruncatedFile { path: path.into() });
    }
    Ok(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

fn read_pnm_header(data: &[u8], magic: &str, path: &Path) -> IoResult<(usize, usize, usize)> {
    let mut pos = 0usize;
    let got = read_token(data, &mut pos, path)?;
    if got != magic {
        return Err(IoError::BadHeader {
            path: path.into(),
            reason: format!("expected {magic}, got {got}"),
        });
    }
    let parse = |tok: String| -> IoResult<usize> {
        tok.parse().map_err(|_| IoError::BadHeader {
            path: path.into(),
            reason: format!("bad integer {tok}"),
        })
    };
    let w = parse(read_token(data, &mut pos, path)?)?;
    let h = parse(read_token(data, &mut pos, path)?)?;
    let maxval = parse(read_token(data, &mut pos, path)?)?;
    if maxval != 255 {
        return Err(IoError::UnsupportedMaxval { path: path.into(), maxval: maxval as u32 });
    }
    if w == 0 || h == 0 {
        return Err(IoError::BadHeader {
            path: path.into(),
            reason: format!("dimensions {w}x{h}"),
        });
    }
    // exactly one whitespace byte separates header and payload
    pos += 1;
    Ok((w, h, pos))
}

/// Binary PGM, maxval 255: set pixels write 255, clear write 0; on read,
/// values >= 128 map to true.
pub fn write_mask(mask: &BinaryMask, path: &Path) -> IoResult<()> {
    let mut buf = format!("P5\n{} {}\n255\n", mask.width(), mask.height()).into_bytes();
    buf.extend(mask.bits().iter().map(|&b| if b { 255u8 } else { 0 }));
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_mask(path: &Path) -> IoResult<BinaryMask> {
    let data = fs::read(path).map_err(io_err(path))?;
    let (w, h, offset) = read_pnm_header(&data, "P5", path)?;
    let payload = &data[offset.min(data.len())..];
    if payload.len() < w * h {
        return Err(IoError::TruncatedFile { path: path.into() });
    }
    Ok(BinaryMask::new(w, h, payload[..w * h].iter().map(|&v| v >= 128).collect())?)
}

/// Binary PPM, maxval 255.
pub fn write_frame(frame: &Frame, path: &Path) -> IoResult<()> {
    let mut buf = format!("P6\n{} {}\n255\n", frame.width(), frame.height()).into_bytes();
    buf.extend_from_slice(frame.data());
    fs::write(path, buf).map_err(io_err(path))
}

pub fn read_frame(path: &Path) -> IoResult<Frame> {
    let data = fs::read(path).map_err(io_err(path))?;
    let (w, h, offset) = read_pnm_header(&data, "P6", path)?;
    let payload = &data[offset.min(data.len())..];
    if payload.len() < w * h * 3 {
        return Err(IoError::TruncatedFile { path: path.into() });
    }
    Ok(Frame::new(w, h, payload[..w * h * 3].to_vec())?)
}

// ---------------------------------------------------------------------------
// Structured-text reports
// ---------------------------------------------------------------------------

/// Six significant digits, deterministic across platforms.
pub fn fmt_sig(v: f64) -> String {
    if v == 0.0 {
        "0.00000e0".into()
    } else {
        format!("{v:.5e}")
    }
}

fn aggregates(values: &[f64]) -> (f64, f64) {
    let mut sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        sum += v;
        max = max.max(v);
    }
    (sum / values.len() as f64, max)
}

/// Key-value report with a per-frame array and mean/max aggregates over the
/// primary per-frame value. Serialization is byte-deterministic.
pub struct ReportDoc {
    pub kind: &'static str,
    pub per_frame: Vec<Vec<(String, String)>>,
    /// Primary value per frame, aggregated as mean/max.
    pub primary: Vec<f64>,
    /// Extra top-level entries appended after aggregates, in order.
    pub extra: Vec<(String, String)>,
}

impl ReportDoc {
    pub fn render(&self) -> IoResult<String> {
        if self.per_frame.is_empty() || self.primary.len() != self.per_frame.len() {
            return Err(IoError::EmptyReport);
        }
        let mut out = String::new();
        out.push_str("schema_version: 1\n");
        out.push_str(&format!("kind: {}\n", self.kind));
        out.push_str("per_frame:\n");
        for entries in &self.per_frame {
            for (i, (k, v)) in entries.iter().enumerate() {
                let lead = if i == 0 { "- " } else { "  " };
                out.push_str(&format!("{lead}{k}: {v}\n"));
            }
        }
        let (mean, max) = aggregates(&self.primary);
        out.push_str("aggregates:\n");
        out.push_str(&format!("  mean: {}\n", fmt_sig(mean)));
        out.push_str(&format!("  max: {}\n", fmt_sig(max)));
        for (k, v) in &self.extra {
            out.push_str(&format!("{k}: {v}\n"));
        }
        Ok(out)
    }
}

pub fn metrics_report_doc(report: &MetricsReport) -> ReportDoc {
    let mut per_frame = Vec::new();
    let mut primary = Vec::new();
    for r in &report.per_frame {
        let mut entries = vec![
            ("frame".to_string(), r.frame.to_string()),
            ("warping_error".to_string(), fmt_sig(r.warping_error)),
            ("valid_fraction".to_string(), fmt_sig(r.valid_fraction)),
        ];
        if let Some(epe) = r.epe {
            entries.push(("epe".to_string(), fmt_sig(epe)));
        }
        if let Some(iou) = r.mask_iou {
            entries.push(("mask_iou".to_string(), fmt_sig(iou)));
        }
        per_frame.push(entries);
        primary.push(r.warping_error);
    }
    ReportDoc { kind: "metrics", per_frame, primary, extra: Vec::new() }
}

pub fn convergence_report_doc(reports: &[ConvergenceReport]) -> ReportDoc {
    let mut per_frame = Vec::new();
    let mut primary = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        per_frame.push(vec![
            ("frame".to_string(), i.to_string()),
            ("iterations".to_string(), r.iterations.to_string()),
            ("final_update".to_string(), fmt_sig(r.final_update)),
            ("residual_energy".to_string(), fmt_sig(r.residual_energy)),
            ("converged".to_string(), r.converged.to_string()),
        ]);
        primary.push(r.final_update);
    }
    ReportDoc { kind: "calibration", per_frame, primary, extra: Vec::new() }
}

pub fn write_report(doc: &ReportDoc, path: &Path) -> IoResult<()> {
    let text = doc.render()?;
    fs::write(path, text).map_err(io_err(path))
}

// ---------------------------------------------------------------------------
// Sequence layout
// ---------------------------------------------------------------------------

/// Directory conventions for a video sequence: zero-based contiguous
/// indices, frames as PPM, flows as .flo, masks as PGM.
#[derive(Debug, Clone)]
pub struct SequenceLayout {
    pub root: PathBuf,
}

impl SequenceLayout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn frame_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("frame_{i:05}.ppm"))
    }

    pub fn flow_fwd_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("flow_fwd_{i:05}.flo"))
    }

    pub fn flow_bwd_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("flow_bwd_{i:05}.flo"))
    }

    pub fn mask_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("mask_{i:05}.pgm"))
    }

    pub fn edited_mask_path(&self) -> PathBuf {
        self.root.join("edited_mask_00000.pgm")
    }

    pub fn pseudo_flow_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("pseudo_flow_fwd_{i:05}.flo"))
    }

    pub fn pseudo_mask_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("pseudo_mask_{i:05}.pgm"))
    }

    pub fn calibrated_flow_path(&self, i: usize) -> PathBuf {
        self.root.join(format!("calib_flow_fwd_{i:05}.flo"))
    }

    /// Number of contiguous files from index 0 matching `path_of`.
    pub fn count_contiguous(&self, path_of: impl Fn(&Self, usize) -> PathBuf) -> usize {
        let mut i = 0;
        while path_of(self, i).exists() {
            i += 1;
        }
        i
    }
}
