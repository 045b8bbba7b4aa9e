use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real scalar the design machinery is generic over: `f64` for production
/// runs, `f32` where memory matters more than the last digits.
pub trait Scalar: RealField + Copy + FromPrimitive + ToPrimitive + Default {
    /// Relative eigenvalue threshold below which a matrix is treated as singular.
    const SINGULAR_TOL: f64;
    /// Relative eigenvalue threshold used when truncating PSD factorizations.
    const FACTOR_TOL: f64;

    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    #[inline]
    fn infinity() -> Self {
        Self::lit(f64::INFINITY)
    }

    #[inline]
    fn neg_infinity() -> Self {
        Self::lit(f64::NEG_INFINITY)
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar")
    }
}

impl Scalar for f64 {
    const SINGULAR_TOL: f64 = 1e-12;
    const FACTOR_TOL: f64 = 1e-10;
}

impl Scalar for f32 {
    const SINGULAR_TOL: f64 = 1e-6;
    const FACTOR_TOL: f64 = 1e-5;
}
