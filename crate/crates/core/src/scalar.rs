//! Floating-point abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar type the accumulators and solvers are generic over.
///
/// Implemented for `f32` and `f64`. The dense batch kernels dispatch to the
/// matching `matrixmultiply` GEMM.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
    + 'static
{
    /// `c += aᵀ·b` where `a` is `m×p`, `b` is `m×q` and `c` is `p×q`, all
    /// row-major and contiguous.
    fn gemm_tn_acc(m: usize, p: usize, q: usize, a: &[Self], b: &[Self], c: &mut [Self]);

    /// Lossy conversion from `f64` used for literal constants.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable")
    }

    /// Widening conversion used when serializing or comparing against `f64` oracles.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_scalar {
    ($t:ty, $gemm:path) => {
        impl Scalar for $t {
            fn gemm_tn_acc(m: usize, p: usize, q: usize, a: &[Self], b: &[Self], c: &mut [Self]) {
                assert!(a.len() >= m * p && b.len() >= m * q && c.len() >= p * q);
                if m == 0 || p == 0 || q == 0 {
                    return;
                }
                // SAFETY: slice lengths checked above; strides describe aᵀ (p×m),
                // b (m×q) and c (p×q) inside their buffers.
                unsafe {
                    $gemm(
                        p,
                        m,
                        q,
                        1.0,
                        a.as_ptr(),
                        1,
                        p as isize,
                        b.as_ptr(),
                        q as isize,
                        1,
                        1.0,
                        c.as_mut_ptr(),
                        q as isize,
                        1,
                    );
                }
            }
        }
    };
}

impl_scalar!(f64, matrixmultiply::dgemm);
impl_scalar!(f32, matrixmultiply::sgemm);

pub(crate) fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}
