/// Floating point scalar the dense-field math is generic over: f32 or f64.
///
/// Storage in the pipeline is f32; reductions and the calibration solver
/// run in f64 regardless of the storage type.
pub trait Scalar:
    num_traits::Float + num_traits::NumCast + std::fmt::Debug + 'static
{
    fn widen(self) -> f64;
    fn narrow(v: f64) -> Self;
}

impl Scalar for f32 {
    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
    #[inline]
    fn narrow(v: f64) -> Self {
        v as f32
    }
}

impl Scalar for f64 {
    #[inline]
    fn widen(self) -> f64 {
        self
    }
    #[inline]
    fn narrow(v: f64) -> Self {
        v
    }
}
