//! Exact rational scalars.
//!
//! Every attribute, query input and score is a normalized arbitrary-precision
//! rational, so the side tests that route queries through the intersection
//! tree never depend on a rounding mode.

use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::{BigInt, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

/// A normalized exact rational number (denominator > 0, gcd = 1).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Scalar(BigRational);

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScalarParseError {
    #[error("empty scalar literal")]
    Empty,
    #[error("invalid scalar literal `{0}`")]
    Invalid(String),
    #[error("zero denominator in `{0}`")]
    ZeroDenominator(String),
}

impl Scalar {
    pub fn zero() -> Self {
        Scalar(BigRational::zero())
    }

    pub fn one() -> Self {
        Scalar(BigRational::one())
    }

    pub fn from_int(v: i64) -> Self {
        Scalar(BigRational::from_integer(BigInt::from(v)))
    }

    /// `num / den`; returns `None` when `den == 0`.
    pub fn ratio(num: i64, den: i64) -> Option<Self> {
        if den == 0 {
            return None;
        }
        Some(Scalar(BigRational::new(
            BigInt::from(num),
            BigInt::from(den),
        )))
    }

    pub fn from_big(num: BigInt, den: BigInt) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        Some(Scalar(BigRational::new(num, den)))
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn is_negative(&self) -> bool {
        self.0.is_negative()
    }

    /// -1, 0 or 1.
    pub fn signum(&self) -> i8 {
        match self.0.numer().sign() {
            Sign::Minus => -1,
            Sign::NoSign => 0,
            Sign::Plus => 1,
        }
    }

    pub fn abs(&self) -> Self {
        Scalar(self.0.abs())
    }

    /// Midpoint of two scalars.
    pub fn midpoint(&self, other: &Scalar) -> Scalar {
        Scalar((&self.0 + &other.0) / BigRational::from_integer(BigInt::from(2)))
    }

    /// Division that refuses a zero divisor.
    pub fn checked_div(&self, other: &Scalar) -> Option<Scalar> {
        if other.is_zero() {
            None
        } else {
            Some(Scalar(&self.0 / &other.0))
        }
    }

    /// Lossy conversion for reporting only.
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.0.to_f64().unwrap_or(f64::NAN)
    }
}

impl From<BigRational> for Scalar {
    fn from(v: BigRational) -> Self {
        Scalar(v)
    }
}

impl From<i64> for Scalar {
    fn from(v: i64) -> Self {
        Scalar::from_int(v)
    }
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Accepts `p`, `p/q` and plain decimals such as `-1.25`.
impl FromStr for Scalar {
    type Err = ScalarParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() {
            return Err(ScalarParseError::Empty);
        }
        let invalid = || ScalarParseError::Invalid(s.to_string());
        if let Some((p, q)) = s.split_once('/') {
            let num: BigInt = p.trim().parse().map_err(|_| invalid())?;
            let den: BigInt = q.trim().parse().map_err(|_| invalid())?;
            return Scalar::from_big(num, den)
                .ok_or_else(|| ScalarParseError::ZeroDenominator(s.to_string()));
        }
        if let Some((int_part, frac_part)) = s.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(invalid());
            }
            let negative = int_part.starts_with('-');
            let int_digits = int_part.trim_start_matches(['-', '+']);
            if !int_digits.bytes().all(|b| b.is_ascii_digit()) {
                return Err(invalid());
            }
            let digits = format!("{}{}", int_digits, frac_part);
            let mut num: BigInt = digits.parse().map_err(|_| invalid())?;
            if negative {
                num = -num;
            }
            let den = num_traits::pow(BigInt::from(10), frac_part.len());
            return Ok(Scalar(BigRational::new(num, den)));
        }
        let num: BigInt = s.parse().map_err(|_| invalid())?;
        Ok(Scalar(BigRational::from_integer(num)))
    }
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident) => {
        impl $trait<&Scalar> for &Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar($trait::$method(&self.0, &rhs.0))
            }
        }
        impl $trait<Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: Scalar) -> Scalar {
                Scalar($trait::$method(self.0, rhs.0))
            }
        }
        impl $trait<&Scalar> for Scalar {
            type Output = Scalar;
            fn $method(self, rhs: &Scalar) -> Scalar {
                Scalar($trait::$method(self.0, &rhs.0))
            }
        }
    };
}

forward_binop!(Add, add);
forward_binop!(Sub, sub);
forward_binop!(Mul, mul);

impl Div<&Scalar> for &Scalar {
    type Output = Scalar;
    /// Panics on a zero divisor; use [`Scalar::checked_div`] when that is possible.
    fn div(self, rhs: &Scalar) -> Scalar {
        self.checked_div(rhs).expect("division by zero scalar")
    }
}

impl Div<&Scalar> for Scalar {
    type Output = Scalar;
    fn div(self, rhs: &Scalar) -> Scalar {
        &self / rhs
    }
}

impl Div<Scalar> for Scalar {
    type Output = Scalar;
    fn div(self, rhs: Scalar) -> Scalar {
        &self / &rhs
    }
}

impl Neg for Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-self.0)
    }
}

impl Neg for &Scalar {
    type Output = Scalar;
    fn neg(self) -> Scalar {
        Scalar(-&self.0)
    }
}

impl std::iter::Sum for Scalar {
    fn sum<I: Iterator<Item = Scalar>>(iter: I) -> Scalar {
        iter.fold(Scalar::zero(), |acc, v| acc + v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_fractions_decimals_and_integers() {
        assert_eq!(
            "3/6".parse::<Scalar>().unwrap(),
            Scalar::ratio(1, 2).unwrap()
        );
        assert_eq!(
            "-1.25".parse::<Scalar>().unwrap(),
            Scalar::ratio(-5, 4).unwrap()
        );
        assert_eq!("4.0".parse::<Scalar>().unwrap(), Scalar::from_int(4));
        assert_eq!("17".parse::<Scalar>().unwrap(), Scalar::from_int(17));
        assert_eq!(
            "-0.5".parse::<Scalar>().unwrap(),
            Scalar::ratio(-1, 2).unwrap()
        );
    }

    #[test]
    fn rejects_bad_literals() {
        assert!(matches!(
            "1/0".parse::<Scalar>(),
            Err(ScalarParseError::ZeroDenominator(_))
        ));
        assert!("".parse::<Scalar>().is_err());
        assert!("1.".parse::<Scalar>().is_err());
        assert!("a/2".parse::<Scalar>().is_err());
        assert!("1.-2".parse::<Scalar>().is_err());
    }

    #[test]
    fn normalized_display() {
        let v = Scalar::ratio(6, -4).unwrap();
        assert_eq!(v.to_string(), "-3/2");
        assert!(v.denom() > &BigInt::zero());
        assert_eq!(Scalar::ratio(8, 4).unwrap().to_string(), "2");
    }

    #[test]
    fn arithmetic_is_exact() {
        let a = Scalar::ratio(1, 3).unwrap();
        let b = Scalar::ratio(2, 3).unwrap();
        assert_eq!(&a + &b, Scalar::one());
        assert_eq!(&a * &Scalar::from_int(3), Scalar::one());
        assert_eq!(a.midpoint(&b), Scalar::ratio(1, 2).unwrap());
        assert!(a.checked_div(&Scalar::zero()).is_none());
        assert_eq!((-&a).signum(), -1);
    }
}
