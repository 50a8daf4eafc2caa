//! Scalar types used for probabilities.
//!
//! Every probability computation in this crate is written against
//! [`Probability`], so the same code runs in `f32`, `f64`, or exactly in
//! [`BigRational`]. The exact instantiation is what the micro-oracle tests
//! use to check closed forms without any rounding slack.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{Float, One, ToPrimitive, Zero};

/// Number of trials above which floating-point binomial terms are computed in
/// log space instead of by exact products.
pub const LOG_BINOMIAL_THRESHOLD: u32 = 50;

/// A numeric type able to represent probabilities.
pub trait Probability:
    Clone
    + Debug
    + PartialOrd
    + Send
    + Sync
    + Zero
    + One
    + std::ops::Add<Output = Self>
    + std::ops::Sub<Output = Self>
    + std::ops::Mul<Output = Self>
    + std::ops::Div<Output = Self>
    + 'static
{
    /// Converts a decimal value from a configuration file. Rational types
    /// interpret the shortest decimal representation exactly, so `0.2`
    /// becomes `1/5`.
    fn from_decimal(x: f64) -> Option<Self>;

    fn as_f64(&self) -> f64;

    fn from_ratio(num: u64, den: u64) -> Self;

    fn powu(&self, exp: u32) -> Self {
        let mut acc = Self::one();
        let mut base = self.clone();
        let mut e = exp;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }

    /// `C(n, r) s^r (1 - s)^(n - r)`.
    fn binomial_pmf(n: u32, r: u32, success: &Self) -> Self {
        if r > n {
            return Self::zero();
        }
        let fail = Self::one() - success.clone();
        binomial_coefficient::<Self>(n, r) * success.powu(r) * fail.powu(n - r)
    }
}

/// Exact `C(n, r)` accumulated in `P` through the multiplicative formula.
pub fn binomial_coefficient<P: Probability>(n: u32, r: u32) -> P {
    if r > n {
        return P::zero();
    }
    let r = r.min(n - r);
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for j in 1..=r {
        num *= BigInt::from(n - r + j);
        den *= BigInt::from(j);
    }
    let c = num / den;
    match c.to_u64() {
        Some(v) => P::from_ratio(v, 1),
        None => {
            // Only reachable for exact types with huge n.
            let mut acc = P::zero();
            let base = P::from_ratio(1 << 32, 1);
            for digit in c.to_u32_digits().1.iter().rev() {
                acc = acc * base.clone() + P::from_ratio(u64::from(*digit), 1);
            }
            acc
        }
    }
}

fn float_binomial_pmf<F: Float>(n: u32, r: u32, success: F) -> F {
    if r > n {
        return F::zero();
    }
    let fail = F::one() - success;
    if success == F::zero() {
        return if r == 0 { F::one() } else { F::zero() };
    }
    if fail == F::zero() {
        return if r == n { F::one() } else { F::zero() };
    }
    if n <= LOG_BINOMIAL_THRESHOLD {
        let c = F::from(exact_binomial_u128(n, r)).unwrap();
        return c * success.powi(r as i32) * fail.powi((n - r) as i32);
    }
    let ln_c = ln_binomial(n, r);
    let ln = F::from(ln_c).unwrap()
        + F::from(r).unwrap() * success.ln()
        + F::from(n - r).unwrap() * fail.ln();
    ln.exp()
}

fn exact_binomial_u128(n: u32, r: u32) -> u128 {
    let r = r.min(n - r);
    let mut acc: u128 = 1;
    for j in 1..=u128::from(r) {
        acc = acc * (u128::from(n - r) + j) / j;
    }
    acc
}

fn ln_binomial(n: u32, r: u32) -> f64 {
    let r = r.min(n - r);
    (1..=r)
        .map(|j| (f64::from(n - r + j) / f64::from(j)).ln())
        .sum()
}

macro_rules! float_probability {
    ($t:ty) => {
        impl Probability for $t {
            fn from_decimal(x: f64) -> Option<Self> {
                x.is_finite().then_some(x as $t)
            }

            fn as_f64(&self) -> f64 {
                f64::from(*self)
            }

            fn from_ratio(num: u64, den: u64) -> Self {
                (num as f64 / den as f64) as $t
            }

            fn powu(&self, exp: u32) -> Self {
                self.powi(exp as i32)
            }

            fn binomial_pmf(n: u32, r: u32, success: &Self) -> Self {
                float_binomial_pmf(n, r, *success)
            }
        }
    };
}

float_probability!(f32);
float_probability!(f64);

impl Probability for BigRational {
    fn from_decimal(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        // Display for f64 prints the shortest round-trip decimal, never in
        // exponent form.
        let text = format!("{}", x.abs());
        let (int_part, frac_part) = text.split_once('.').unwrap_or((&text, ""));
        let digits: BigInt = format!("{int_part}{frac_part}").parse().ok()?;
        let den = num_traits::pow(BigInt::from(10u32), frac_part.len());
        let value = BigRational::new(digits, den);
        Some(if x < 0.0 { -value } else { value })
    }

    fn as_f64(&self) -> f64 {
        // Scale down both parts to stay inside the f64 exponent range.
        let (n, d) = (self.numer(), self.denom());
        let shift = n.bits().max(d.bits()).saturating_sub(1000);
        let n = n >> shift;
        let d = d >> shift;
        match (n.to_f64(), d.to_f64()) {
            (Some(a), Some(b)) if b != 0.0 => a / b,
            _ => f64::NAN,
        }
    }

    fn from_ratio(num: u64, den: u64) -> Self {
        let g = num.gcd(&den).max(1);
        BigRational::new(BigInt::from(num / g), BigInt::from(den / g))
    }
}
