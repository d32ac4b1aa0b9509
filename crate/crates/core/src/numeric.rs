//! Exact rational helpers and compensated summation.
//!
//! Every frequency in the pipeline is a ratio of integer counts, so RR values
//! are carried as exact rationals and only converted to `f64` for display and
//! for probability accumulation.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, AddAssign};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// An exact non-negative rational quantity (frequency, RR factor, divisor).
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Exact(BigRational);

impl Exact {
    pub fn zero() -> Self {
        Exact(BigRational::zero())
    }

    pub fn one() -> Self {
        Exact(BigRational::one())
    }

    pub fn ratio(numer: u64, denom: u64) -> Self {
        assert!(denom != 0, "zero denominator");
        Exact(BigRational::new(BigInt::from(numer), BigInt::from(denom)))
    }

    pub fn from_integer(value: u64) -> Self {
        Exact(BigRational::from_integer(BigInt::from(value)))
    }

    /// Converts a finite `f64` by way of its shortest round-trip decimal
    /// representation, so that `1.2` becomes exactly `6/5`.
    pub fn from_decimal_f64(value: f64) -> Option<Self> {
        if !value.is_finite() {
            return None;
        }
        Self::parse_decimal(&format!("{value}"))
    }

    /// Parses `[-]digits[.digits]`, or `num/den`.
    pub fn parse_decimal(text: &str) -> Option<Self> {
        let text = text.trim();
        if let Some((n, d)) = text.split_once('/') {
            let n: BigInt = n.trim().parse().ok()?;
            let d: BigInt = d.trim().parse().ok()?;
            if d.is_zero() {
                return None;
            }
            return Some(Exact(BigRational::new(n, d)));
        }
        let (negative, body) = match text.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, text),
        };
        let (int_part, frac_part) = body.split_once('.').unwrap_or((body, ""));
        if int_part.is_empty() && frac_part.is_empty() {
            return None;
        }
        if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
            return None;
        }
        let digits = format!("{int_part}{frac_part}");
        let numer: BigInt = if digits.is_empty() { BigInt::zero() } else { digits.parse().ok()? };
        let denom = num_traits::pow(BigInt::from(10u32), frac_part.len());
        let mut r = BigRational::new(numer, denom);
        if negative {
            r = -r;
        }
        Some(Exact(r))
    }

    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
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

    pub fn pow(&self, exp: u32) -> Self {
        Exact(num_traits::pow(self.0.clone(), exp as usize))
    }

    pub fn recip(&self) -> Self {
        Exact(self.0.recip())
    }

    pub fn as_rational(&self) -> &BigRational {
        &self.0
    }

    /// `numer/denom` in lowest terms.
    pub fn to_fraction_string(&self) -> String {
        format!("{}/{}", self.0.numer(), self.0.denom())
    }

    pub fn product<'a, I: IntoIterator<Item = &'a Exact>>(factors: I) -> Self {
        let mut acc = BigRational::one();
        for f in factors {
            acc *= &f.0;
        }
        Exact(acc)
    }
}

impl fmt::Debug for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} (~{:e})", self.to_fraction_string(), self.to_f64())
    }
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_f64())
    }
}

macro_rules! exact_binop {
    ($trait:ident, $method:ident, $op:tt) => {
        impl std::ops::$trait<&Exact> for &Exact {
            type Output = Exact;
            fn $method(self, rhs: &Exact) -> Exact {
                Exact(&self.0 $op &rhs.0)
            }
        }
        impl std::ops::$trait for Exact {
            type Output = Exact;
            fn $method(self, rhs: Exact) -> Exact {
                Exact(self.0 $op rhs.0)
            }
        }
    };
}

exact_binop!(Add, add, +);
exact_binop!(Sub, sub, -);
exact_binop!(Mul, mul, *);
exact_binop!(Div, div, /);

impl std::iter::Sum for Exact {
    fn sum<I: Iterator<Item = Exact>>(iter: I) -> Self {
        iter.fold(Exact::zero(), |a, b| a + b)
    }
}

/// A JSON number when the shortest f64 text reads back to the same value,
/// otherwise a `num/den` string, so documents round-trip exactly.
impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let v = self.to_f64();
        if Exact::from_decimal_f64(v).as_ref() == Some(self) {
            serializer.serialize_f64(v)
        } else {
            serializer.serialize_str(&self.to_fraction_string())
        }
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Number(f64),
            Text(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Number(v) => Exact::from_decimal_f64(v)
                .ok_or_else(|| serde::de::Error::custom(format!("not a finite number: {v}"))),
            Repr::Text(s) => Exact::parse_decimal(&s)
                .ok_or_else(|| serde::de::Error::custom(format!("not a decimal or fraction: {s:?}"))),
        }
    }
}

/// A comparison threshold that decides `product <= t` in floating point when
/// the answer is unambiguous and falls back to exact arithmetic near ties.
#[derive(Clone, Debug)]
pub struct Threshold {
    exact: Exact,
    approx: f64,
}

/// Relative band around the threshold inside which the exact product is used.
/// A product of a few dozen correctly rounded factors is accurate to well
/// under 1e-13 relative.
const TIE_BAND: f64 = 1e-9;

impl Threshold {
    pub fn new(exact: Exact) -> Self {
        let approx = exact.to_f64();
        Threshold { exact, approx }
    }

    pub fn exact(&self) -> &Exact {
        &self.exact
    }

    pub fn value(&self) -> f64 {
        self.approx
    }

    /// Compares `numerators / divisors` (given in both representations) to
    /// the threshold.
    pub fn compare_product(
        &self,
        approx_value: f64,
        exact_value: impl FnOnce() -> Exact,
    ) -> Ordering {
        if approx_value < self.approx * (1.0 - TIE_BAND) {
            Ordering::Less
        } else if approx_value > self.approx * (1.0 + TIE_BAND) {
            Ordering::Greater
        } else {
            exact_value().cmp(&self.exact)
        }
    }

    pub fn admits(&self, approx_value: f64, exact_value: impl FnOnce() -> Exact) -> bool {
        self.compare_product(approx_value, exact_value) != Ordering::Greater
    }
}

/// Kahan–Babuška–Neumaier running sum.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct NeumaierSum {
    sum: f64,
    compensation: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.compensation);
    }
}

impl AddAssign<f64> for NeumaierSum {
    fn add_assign(&mut self, rhs: f64) {
        self.add(rhs);
    }
}

impl Add<f64> for NeumaierSum {
    type Output = NeumaierSum;
    fn add(mut self, rhs: f64) -> NeumaierSum {
        self += rhs;
        self
    }
}

impl std::iter::Sum<f64> for NeumaierSum {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        iter.fold(NeumaierSum::new(), |acc, x| acc + x)
    }
}

/// Binomial standard error of a proportion `p` estimated from `n` trials.
pub fn binomial_std_error(p: f64, n: u64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}
