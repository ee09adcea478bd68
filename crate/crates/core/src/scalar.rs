//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable by the dense kernels: `f32` or `f64`.
pub trait Real:
    RealField + Copy + FromPrimitive + ToPrimitive + Debug + Display + Send + Sync + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Lossy conversion back to `f64` for reports.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().expect("scalar converts to f64")
}

/// Machine epsilon of `T` as a `T`.
#[inline]
pub fn eps<T: Real>() -> T {
    T::default_epsilon()
}

/// Tolerance used when checking that a vector lies on the unit sphere.
pub fn unit_tolerance<T: Real>() -> T {
    let floor = lit::<T>(1e-10);
    let scaled = eps::<T>() * lit(64.0);
    if scaled > floor {
        scaled
    } else {
        floor
    }
}

/// `|z|` without overflow in the intermediate squares.
#[inline]
pub fn modulus<T: Real>(z: nalgebra::Complex<T>) -> T {
    z.re.hypot(z.im)
}
