//! Exact complex arithmetic and quantization onto the μ-bit amplitude grid.
//!
//! A [`Resolution`] of `mu` bits per amplitude gives `mu / 2` bits to each of
//! the real and imaginary parts, so stored amplitudes are integer multiples of
//! `delta = 2^(-mu/2)`. The same quantity is the truncation threshold: an
//! amplitude of magnitude below `delta` cannot be stored.
//!
//! All linear algebra happens on [`ExactComplex`] values (pairs of arbitrary
//! precision rationals). Rounding only ever happens in [`quantize`] and
//! [`quantize_normalized`], which round each component to the nearest grid
//! multiple with ties going to the even multiple.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::{BigInt, BigUint};
use num_integer::{Integer, Roots};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_MU: u32 = 128;

/// Bits per amplitude. Always even, `2 <= mu <= 128`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Resolution {
    mu: u32,
}

impl Resolution {
    pub fn new(mu: u32) -> Result<Self> {
        if mu < 2 || !mu.is_multiple_of(2) || mu > MAX_MU {
            return Err(Error::InvalidResolution(mu));
        }
        Ok(Self { mu })
    }

    pub fn mu(self) -> u32 {
        self.mu
    }

    /// Bits per component, `mu / 2`.
    pub fn half_bits(self) -> u32 {
        self.mu / 2
    }

    /// Grid spacing `2^(-mu/2)`.
    pub fn delta(self) -> BigRational {
        pow2(-(self.half_bits() as i64))
    }

    /// Truncation threshold on amplitude magnitude; equal to [`Self::delta`].
    pub fn threshold(self) -> BigRational {
        self.delta()
    }

    /// `threshold^2 = 2^(-mu)`.
    pub fn threshold_sq(self) -> BigRational {
        pow2(-(self.mu as i64))
    }

    /// Whether `n <= 2^mu`, the largest uniform superposition the grid admits.
    pub fn admits(self, n: u128) -> bool {
        self.mu >= 128 || n <= 1u128 << self.mu
    }

    /// `2^mu` when it fits in a `u128`.
    pub fn coherence_bound(self) -> Option<u128> {
        (self.mu < 128).then(|| 1u128 << self.mu)
    }

    /// One unit of the grid expressed as a unit count: `2^(mu/2)`.
    pub fn units_per_one(self) -> i128 {
        1i128 << self.half_bits()
    }

    fn max_units(self) -> i128 {
        2 * self.units_per_one()
    }
}

impl TryFrom<u32> for Resolution {
    type Error = Error;
    fn try_from(mu: u32) -> Result<Self> {
        Self::new(mu)
    }
}

impl From<Resolution> for u32 {
    fn from(r: Resolution) -> u32 {
        r.mu
    }
}

/// `2^k` as an exact rational, for any sign of `k`.
pub fn pow2(k: i64) -> BigRational {
    let p = BigInt::one() << k.unsigned_abs();
    if k >= 0 {
        BigRational::from_integer(p)
    } else {
        BigRational::new(BigInt::one(), p)
    }
}

/// A complex number with exact rational components.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExactComplex {
    pub re: BigRational,
    pub im: BigRational,
}

impl ExactComplex {
    pub fn new(re: BigRational, im: BigRational) -> Self {
        Self { re, im }
    }

    pub fn zero() -> Self {
        Self::new(BigRational::zero(), BigRational::zero())
    }

    pub fn one() -> Self {
        Self::real(BigRational::one())
    }

    pub fn i() -> Self {
        Self::new(BigRational::zero(), BigRational::one())
    }

    pub fn real(re: BigRational) -> Self {
        Self::new(re, BigRational::zero())
    }

    /// `(re_num/den) + i(im_num/den)`.
    pub fn from_ratio(re_num: i64, im_num: i64, den: i64) -> Self {
        Self::new(
            BigRational::new(re_num.into(), den.into()),
            BigRational::new(im_num.into(), den.into()),
        )
    }

    pub fn from_ints(re: i64, im: i64) -> Self {
        Self::from_ratio(re, im, 1)
    }

    pub fn is_zero(&self) -> bool {
        self.re.is_zero() && self.im.is_zero()
    }

    pub fn conj(&self) -> Self {
        Self::new(self.re.clone(), -&self.im)
    }

    /// `re^2 + im^2`.
    pub fn magnitude_sq(&self) -> BigRational {
        &self.re * &self.re + &self.im * &self.im
    }

    pub fn scale(&self, k: &BigRational) -> Self {
        Self::new(&self.re * k, &self.im * k)
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        (
            self.re.to_f64().unwrap_or(f64::NAN),
            self.im.to_f64().unwrap_or(f64::NAN),
        )
    }
}

impl fmt::Display for ExactComplex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} + {}i", self.re, self.im)
    }
}

impl Add for &ExactComplex {
    type Output = ExactComplex;
    fn add(self, rhs: &ExactComplex) -> ExactComplex {
        ExactComplex::new(&self.re + &rhs.re, &self.im + &rhs.im)
    }
}

impl Add for ExactComplex {
    type Output = ExactComplex;
    fn add(self, rhs: ExactComplex) -> ExactComplex {
        ExactComplex::new(self.re + rhs.re, self.im + rhs.im)
    }
}

impl Sub for &ExactComplex {
    type Output = ExactComplex;
    fn sub(self, rhs: &ExactComplex) -> ExactComplex {
        ExactComplex::new(&self.re - &rhs.re, &self.im - &rhs.im)
    }
}

impl Mul for &ExactComplex {
    type Output = ExactComplex;
    fn mul(self, rhs: &ExactComplex) -> ExactComplex {
        ExactComplex::new(
            &self.re * &rhs.re - &self.im * &rhs.im,
            &self.re * &rhs.im + &self.im * &rhs.re,
        )
    }
}

impl Mul for ExactComplex {
    type Output = ExactComplex;
    fn mul(self, rhs: ExactComplex) -> ExactComplex {
        &self * &rhs
    }
}

impl Neg for &ExactComplex {
    type Output = ExactComplex;
    fn neg(self) -> ExactComplex {
        ExactComplex::new(-&self.re, -&self.im)
    }
}

/// A complex amplitude on the `2^(-mu/2)` grid, stored as unit counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct FixedComplex {
    re_units: i128,
    im_units: i128,
    resolution: Resolution,
}

impl FixedComplex {
    pub fn from_units(re_units: i128, im_units: i128, resolution: Resolution) -> Result<Self> {
        let max = resolution.max_units();
        if re_units.abs() > max || im_units.abs() > max {
            return Err(Error::RangeExceeded);
        }
        Ok(Self {
            re_units,
            im_units,
            resolution,
        })
    }

    pub fn zero(resolution: Resolution) -> Self {
        Self {
            re_units: 0,
            im_units: 0,
            resolution,
        }
    }

    pub fn re_units(&self) -> i128 {
        self.re_units
    }

    pub fn im_units(&self) -> i128 {
        self.im_units
    }

    pub fn resolution(&self) -> Resolution {
        self.resolution
    }

    pub fn is_zero(&self) -> bool {
        self.re_units == 0 && self.im_units == 0
    }

    /// The represented value `(re_units + i im_units) * 2^(-mu/2)`.
    pub fn value(&self) -> ExactComplex {
        let d = self.resolution.delta();
        ExactComplex::new(
            BigRational::from_integer(self.re_units.into()) * &d,
            BigRational::from_integer(self.im_units.into()) * &d,
        )
    }

    /// `re_units^2 + im_units^2`, the squared magnitude in units of `2^(-mu)`.
    pub fn magnitude_sq_units(&self) -> BigUint {
        let re = BigInt::from(self.re_units);
        let im = BigInt::from(self.im_units);
        (&re * &re + &im * &im).magnitude().clone()
    }

    pub fn to_f64_pair(&self) -> (f64, f64) {
        let scale = (self.resolution.half_bits() as f64).exp2();
        (self.re_units as f64 / scale, self.im_units as f64 / scale)
    }
}

/// Nearest integer to `q`, ties to even.
pub fn round_half_even(q: &BigRational) -> BigInt {
    let (n, d) = (q.numer(), q.denom());
    let (fl, rem): (BigInt, BigInt) = n.div_mod_floor(d);
    let twice: BigInt = &rem * 2;
    match twice.cmp(d) {
        std::cmp::Ordering::Less => fl,
        std::cmp::Ordering::Greater => fl + 1,
        std::cmp::Ordering::Equal => {
            if fl.is_even() {
                fl
            } else {
                fl + 1
            }
        }
    }
}

/// Nearest integer to `z / sqrt(n)` for rational `z` and positive rational
/// `n`, ties to even. Exact: no floating point or truncated square roots.
pub fn round_div_sqrt(z: &BigRational, n: &BigRational) -> BigInt {
    assert!(n.is_positive(), "norm must be positive");
    if z.is_zero() {
        return BigInt::zero();
    }
    // w = (z / sqrt(n))^2 = z^2 / n; floor(sqrt(w)) = isqrt(floor(w)).
    let w = z * z / n;
    let m = Roots::sqrt(&w.floor().to_integer());
    // Compare sqrt(w) with m + 1/2, i.e. 4w with 4m^2 + 4m + 1.
    let four_w = &w * BigRational::from_integer(4.into());
    let mid = BigRational::from_integer(&m * &m * 4 + &m * 4 + 1);
    let magnitude = match four_w.cmp(&mid) {
        std::cmp::Ordering::Less => m,
        std::cmp::Ordering::Greater => m + 1,
        std::cmp::Ordering::Equal => {
            if m.is_even() {
                m
            } else {
                m + 1
            }
        }
    };
    if z.is_negative() {
        -magnitude
    } else {
        magnitude
    }
}

fn within_headroom(x: &BigRational) -> bool {
    x.abs() <= BigRational::from_integer(2.into())
}

fn units_to_i128(units: BigInt) -> Result<i128> {
    units.to_i128().ok_or(Error::RangeExceeded)
}

/// Rounds each component of `c` to the nearest multiple of `2^(-mu/2)`.
pub fn quantize(c: &ExactComplex, r: Resolution) -> Result<FixedComplex> {
    if !within_headroom(&c.re) || !within_headroom(&c.im) {
        return Err(Error::RangeExceeded);
    }
    let scale = pow2(r.half_bits() as i64);
    let re = units_to_i128(round_half_even(&(&c.re * &scale)))?;
    let im = units_to_i128(round_half_even(&(&c.im * &scale)))?;
    FixedComplex::from_units(re, im, r)
}

/// Rounds each component of `c / sqrt(norm_sq)` to the grid, exactly.
///
/// This is how renormalized amplitudes are committed without ever forming
/// the irrational value `1 / sqrt(norm_sq)`.
pub fn quantize_normalized(
    c: &ExactComplex,
    norm_sq: &BigRational,
    r: Resolution,
) -> Result<FixedComplex> {
    let scale = pow2(r.half_bits() as i64);
    let re = units_to_i128(round_div_sqrt(&(&c.re * &scale), norm_sq))?;
    let im = units_to_i128(round_div_sqrt(&(&c.im * &scale), norm_sq))?;
    FixedComplex::from_units(re, im, r)
}

/// `|c| < 2^(-mu/2)`, decided by comparing `|c|^2` with `2^(-mu)` exactly.
pub fn below_resolution(c: &ExactComplex, r: Resolution) -> bool {
    c.magnitude_sq() < r.threshold_sq()
}

/// Parses `"p/q"` or `"p"` into an exact rational.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidArgument(format!("not a rational: {s:?}"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(BigRational::new(n, d))
        }
        None => Ok(BigRational::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Renders `q` as `"p/q"` (or `"p"` for integers).
pub fn format_rational(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// The exact value of a finite `f64`; every finite double is a dyadic rational.
pub fn rational_from_f64(x: f64) -> Result<BigRational> {
    BigRational::from_float(x)
        .ok_or_else(|| Error::InvalidArgument(format!("non-finite value {x}")))
}

/// Serde adapter writing exact rationals as `"p/q"` strings.
pub mod rational_string {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &BigRational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&super::format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
        let text = String::deserialize(d)?;
        super::parse_rational(&text).map_err(serde::de::Error::custom)
    }
}
