//! Scalar abstraction shared by every numerical module.
//!
//! The physics is written once against [`Real`]; `f64` is the production
//! scalar and `f32` builds for quick exploratory sweeps.

use std::cell::RefCell;
use std::fmt::Debug;

use nalgebra::{Complex, RealField};
use rustfft::FftPlanner;

/// Floating point type usable by the simulator: `f32` or `f64`.
pub trait Real: RealField + Copy + Debug + Send + Sync + 'static {
    /// In-place unnormalized DFT with kernel `exp(+2πi·m·n/len)`.
    fn dft_inverse(buf: &mut [Complex<Self>]);
    /// In-place unnormalized DFT with kernel `exp(-2πi·m·n/len)`.
    fn dft_forward(buf: &mut [Complex<Self>]);
}

macro_rules! impl_real {
    ($t:ty, $planner:ident) => {
        thread_local! {
            static $planner: RefCell<FftPlanner<$t>> = RefCell::new(FftPlanner::new());
        }

        impl Real for $t {
            fn dft_inverse(buf: &mut [Complex<$t>]) {
                $planner.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
            }

            fn dft_forward(buf: &mut [Complex<$t>]) {
                $planner.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
            }
        }
    };
}

impl_real!(f32, PLANNER_F32);
impl_real!(f64, PLANNER_F64);

/// Converts an `f64` literal into the working scalar.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    nalgebra::convert(x)
}

/// Converts a working scalar to `f64` (lossless for both supported types).
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    nalgebra::try_convert(x).expect("f32/f64 always convert to f64")
}

#[inline]
pub fn from_usize<T: Real>(n: usize) -> T {
    lit(n as f64)
}

/// `1/(exp(x)+1)` without overflow for large `|x|`.
#[inline]
pub fn fermi_factor<T: Real>(x: T) -> T {
    if x > T::zero() {
        let e = (-x).exp();
        e / (T::one() + e)
    } else {
        T::one() / (T::one() + x.exp())
    }
}

/// `ln(1 + exp(x))` without overflow.
#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `exp(iθ)`.
#[inline]
pub fn cis<T: Real>(theta: T) -> Complex<T> {
    Complex::new(theta.cos(), theta.sin())
}

/// `|z|` for the generic scalar.
#[inline]
pub fn cabs<T: Real>(z: Complex<T>) -> T {
    z.re.hypot(z.im)
}
