use thiserror::Error;

/// Errors produced by the in-memory pipeline operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected_w}x{expected_h}, got {got_w}x{got_h}")]
    DimensionMismatch {
        expected_w: usize,
        expected_h: usize,
        got_w: usize,
        got_h: usize,
    },

    #[error("mask is empty{}", frame_context(.frame))]
    EmptyMask { frame: Option<usize> },

    #[error("field too small: {w}x{h}, need at least 3x3")]
    FieldTooSmall { w: usize, h: usize },

    #[error("length mismatch: {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("invalid dimensions {w}x{h}")]
    InvalidDimensions { w: usize, h: usize },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("keep mask has no known pixels")]
    NoKnownPixels,

    #[error("solver did not converge after {iterations} sweeps (final update {final_update})")]
    NonConvergence {
        iterations: usize,
        final_update: f64,
    },

    #[error("mask union is empty")]
    EmptyUnion,

    #[error("no valid pixels to average{}", frame_context(.frame))]
    NoValidPixels { frame: Option<usize> },

    #[error("invalid scene spec: {0}")]
    InvalidSpec(String),

    #[error("at frame {frame}: {source}")]
    AtFrame { frame: usize, source: Box<Error> },
}

fn frame_context(frame: &Option<usize>) -> String {
    match frame {
        Some(i) => format!(" at frame {i}"),
        None => String::new(),
    }
}

impl Error {
    pub fn at_frame(self, frame: usize) -> Error {
        Error::AtFrame {
            frame,
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks that two fields share dimensions; all cross-type operations call this.
pub fn check_dims(
    expected_w: usize,
    expected_h: usize,
    got_w: usize,
    got_h: usize,
) -> Result<()> {
    if expected_w != got_w || expected_h != got_h {
        return Err(Error::DimensionMismatch {
            expected_w,
            expected_h,
            got_w,
            got_h,
        });
    }
    Ok(())
}
