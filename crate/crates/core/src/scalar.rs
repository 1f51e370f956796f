//! Scalar abstractions.
//!
//! Signal and KPI arithmetic is written against [`TimeScalar`] so the same code
//! runs on `f64` seconds and on exact rationals. Network code is written against
//! [`NetScalar`] (`f32` / `f64`).

use std::fmt::{Debug, Display};
use std::str::FromStr;

use ndarray::{LinalgScalar, ScalarOperand};
use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, Num, ToPrimitive, Zero};

/// Exact rational time, used for event-exact traces.
pub type Rational = Ratio<i64>;

/// Time and measure scalar for piecewise-constant signals.
pub trait TimeScalar:
    Num + Copy + PartialOrd + Debug + Display + ToPrimitive + FromPrimitive + Send + Sync + 'static
{
    /// Parse a decimal literal such as `0.0025` or `-3e-4`.
    fn from_decimal(s: &str) -> Option<Self>;

    /// Decimal text that [`TimeScalar::from_decimal`] maps back to the same value.
    fn to_decimal(&self) -> String;

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable")
    }

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }

    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl TimeScalar for f64 {
    fn from_decimal(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }

    fn to_decimal(&self) -> String {
        // Display on f64 is shortest-round-trip.
        format!("{self}")
    }
}

impl TimeScalar for f32 {
    fn from_decimal(s: &str) -> Option<Self> {
        s.trim().parse().ok()
    }

    fn to_decimal(&self) -> String {
        format!("{self}")
    }
}

impl TimeScalar for Rational {
    fn from_decimal(s: &str) -> Option<Self> {
        parse_decimal_ratio(s.trim())
    }

    fn to_decimal(&self) -> String {
        decimal_or_fraction(self)
    }
}

fn parse_decimal_ratio(s: &str) -> Option<Rational> {
    if let Some((n, d)) = s.split_once('/') {
        let n: i64 = n.trim().parse().ok()?;
        let d: i64 = d.trim().parse().ok()?;
        if d == 0 {
            return None;
        }
        return Some(Ratio::new(n, d));
    }
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().ok()?),
        None => (s, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let mut numer: i64 = if digits.is_empty() { 0 } else { digits.parse().ok()? };
    let scale = exp - frac_part.len() as i32;
    let mut denom: i64 = 1;
    if scale >= 0 {
        numer = numer.checked_mul(10i64.checked_pow(scale as u32)?)?;
    } else {
        denom = 10i64.checked_pow((-scale) as u32)?;
    }
    if neg {
        numer = -numer;
    }
    Some(Ratio::new(numer, denom))
}

fn decimal_or_fraction(r: &Rational) -> String {
    let mut d = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let Some(pow) = 10i64.checked_pow(places) else {
        return format!("{}/{}", r.numer(), r.denom());
    };
    let Some(scaled) = r.numer().checked_mul(pow / r.denom()) else {
        return format!("{}/{}", r.numer(), r.denom());
    };
    if places == 0 {
        return scaled.to_string();
    }
    let sign = if scaled < 0 { "-" } else { "" };
    let abs = scaled.unsigned_abs();
    let p = pow as u64;
    let frac = format!("{:0width$}", abs % p, width = places as usize);
    let frac = frac.trim_end_matches('0');
    if frac.is_empty() {
        format!("{sign}{}", abs / p)
    } else {
        format!("{sign}{}.{frac}", abs / p)
    }
}

/// Floating-point scalar for the neural function approximators.
pub trait NetScalar:
    Float
    + FromPrimitive
    + LinalgScalar
    + ScalarOperand
    + Debug
    + Display
    + FromStr
    + Default
    + Send
    + Sync
    + 'static
{
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable")
    }
}

impl NetScalar for f32 {}
impl NetScalar for f64 {}

/// Approximate a float duration as an exact rational (decimal configs map exactly).
pub fn rational_from_f64(v: f64) -> Option<Rational> {
    if !v.is_finite() {
        return None;
    }
    if v.is_zero() {
        return Some(Rational::zero());
    }
    Rational::from_decimal(&format!("{v}")).or_else(|| Ratio::approximate_float(v))
}
