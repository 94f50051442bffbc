//! Scalar abstraction shared by the numeric modules.
//!
//! Every model, rate and solver routine is written against [`Real`], so the
//! same code runs in `f64` (the default used by the experiment harness) and in
//! `f32` for quick low-precision studies.

use nalgebra::RealField;
use num_complex::Complex;
use num_traits::{FromPrimitive, ToPrimitive};

/// Real floating-point scalar usable throughout the crate.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Default + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal must be representable")
    }

    /// Lossy conversion to `f64` for reporting and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("real scalar converts to f64")
    }

    /// Smallest positive difference that is meaningful for tolerance checks.
    #[inline]
    fn eps() -> Self {
        Self::default_epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex scalar over a [`Real`] type.
pub type Cplx<T> = Complex<T>;

#[cfg(test)]
#[inline]
pub(crate) fn cplx<T: Real>(re: T, im: T) -> Cplx<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn real<T: Real>(x: T) -> Cplx<T> {
    Complex::new(x, T::zero())
}

/// `exp(j·phase)`.
#[inline]
pub(crate) fn unit_phasor<T: Real>(phase: T) -> Cplx<T> {
    Complex::new(phase.cos(), phase.sin())
}

pub(crate) fn deg_to_rad<T: Real>(deg: T) -> T {
    deg * T::pi() / T::lit(180.0)
}

pub(crate) fn rad_to_deg<T: Real>(rad: T) -> T {
    rad * T::lit(180.0) / T::pi()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literals_round_trip() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!(f32::lit(0.25), 0.25f32);
        assert_eq!(1.5f32.as_f64(), 1.5);
    }

    #[test]
    fn phasor_is_unit_modulus() {
        let z = unit_phasor(0.7f64);
        assert!((z.norm() - 1.0).abs() < 1e-15);
        assert!((rad_to_deg(deg_to_rad(37.0f64)) - 37.0).abs() < 1e-12);
    }
}
