//! Number backends shared by the numerical and exact code paths.

use core::fmt::Debug;
use core::ops::Neg;

use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, Signed, ToPrimitive, Zero};

/// Real field used for propagator tables: `f64` or exact `BigRational`.
pub trait Real: Clone + Debug + PartialOrd + Num + Neg<Output = Self> + Signed + Send + Sync {
    /// Converts a configuration parameter. The exact backend snaps to the
    /// nearest rational with a small denominator.
    fn from_param(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    fn from_int(n: i64) -> Self;
}

impl Real for f64 {
    fn from_param(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_int(n: i64) -> Self {
        n as f64
    }
}

impl Real for BigRational {
    fn from_param(x: f64) -> Self {
        let r = Ratio::<i64>::approximate_float(x).unwrap_or_else(|| Ratio::from_integer(0));
        BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
}

/// Complex coefficient ring over a [`Real`] field.
pub trait Coeff: Clone + Debug + PartialEq + Num + Neg<Output = Self> + Send + Sync {
    type Re: Real;
    fn from_re(r: Self::Re) -> Self;
    fn from_parts(re: Self::Re, im: Self::Re) -> Self;
    fn re(&self) -> Self::Re;
    fn im(&self) -> Self::Re;
    fn conjugate(&self) -> Self;
    /// Imaginary unit.
    fn imag_unit() -> Self {
        Self::from_parts(Self::Re::zero(), num_traits::One::one())
    }
    /// Modulus as a float, for residual reporting.
    fn modulus(&self) -> f64 {
        let (a, b) = (self.re().to_f64(), self.im().to_f64());
        num_traits::Float::hypot(a, b)
    }
    fn to_c64(&self) -> C64 {
        C64::new(self.re().to_f64(), self.im().to_f64())
    }
}

impl<R: Real> Coeff for Complex<R> {
    type Re = R;
    fn from_re(r: R) -> Self {
        Complex::new(r, R::zero())
    }
    fn from_parts(re: R, im: R) -> Self {
        Complex::new(re, im)
    }
    fn re(&self) -> R {
        self.re.clone()
    }
    fn im(&self) -> R {
        self.im.clone()
    }
    fn conjugate(&self) -> Self {
        Complex::new(self.re.clone(), -self.im.clone())
    }
}

pub type C64 = Complex<f64>;
pub type CRat = Complex<BigRational>;

/// Largest modulus over a slice, zero when empty.
pub fn max_modulus<'a, C: Coeff + 'a>(it: impl IntoIterator<Item = &'a C>) -> f64 {
    it.into_iter().map(Coeff::modulus).fold(0.0, f64::max)
}
