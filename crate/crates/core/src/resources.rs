//! Log-space estimates of the memory `M = e^(S/k_B) mu` and the operation
//! rate `V = 2^(mu/2) e^(S/k_B) E/hbar` of a finite-resolution universe.
//!
//! Values are kept as `log2`, split into an exact rational part and a
//! floating-point residual, so that inputs such as `mu = 10^23` never have
//! to be materialized and exact inputs give exact exponents.

use std::cmp::Ordering;
use std::ops::Add;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Bits of storage in all human computing devices.
pub const HUMAN_STORAGE_BITS: &str = "1e21";
/// Operations per second of all human computing devices.
pub const HUMAN_OPS_PER_SEC: &str = "1e23";
/// Information content of the observable universe, gravitational degrees of
/// freedom included.
pub const COSMIC_INFORMATION_BITS: &str = "1e120";

/// `exact + residual`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Log2Value {
    #[serde(with = "crate::fixedpoint::rational_string")]
    pub exact: BigRational,
    pub residual: f64,
}

impl Log2Value {
    pub fn exact(q: BigRational) -> Self {
        Self {
            exact: q,
            residual: 0.0,
        }
    }

    pub fn total(&self) -> f64 {
        self.exact.to_f64().unwrap_or(f64::NAN) + self.residual
    }

    /// `log2 q` for `q > 0`: the binary exponent exactly, `log2` of the
    /// mantissa in `[1, 2)` as the residual.
    pub fn of(q: &BigRational) -> Result<Self> {
        if !q.is_positive() {
            return Err(Error::InvalidArgument("logarithm of a non-positive number".into()));
        }
        let (n, d) = (q.numer(), q.denom());
        let mut k = n.bits() as i64 - d.bits() as i64;
        let mut m = q / crate::fixedpoint::pow2(k);
        if m < BigRational::one() {
            m *= BigRational::from_integer(2.into());
            k -= 1;
        }
        let residual = if m.is_one() { 0.0 } else { m.to_f64().unwrap_or(f64::NAN).log2() };
        Ok(Self {
            exact: BigRational::from_integer(k.into()),
            residual,
        })
    }

    pub fn cmp_value(&self, other: &Self) -> Ordering {
        if self.exact == other.exact {
            return self.residual.total_cmp(&other.residual);
        }
        let diff = (&self.exact - &other.exact).to_f64().unwrap_or(f64::NAN) + (self.residual - other.residual);
        if diff == 0.0 {
            // rounding hid the difference; fall back to the exact parts
            self.exact.cmp(&other.exact)
        } else {
            diff.total_cmp(&0.0)
        }
    }
}

impl Add for Log2Value {
    type Output = Log2Value;

    fn add(self, rhs: Self) -> Self {
        Log2Value {
            exact: self.exact + rhs.exact,
            residual: self.residual + rhs.residual,
        }
    }
}

/// Parses `"1.5e23"`, `"42"`, `"-0.25"` or `"p/q"` exactly.
pub fn parse_decimal(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidArgument(format!("not a number: {s:?}"));
    let t = s.trim();
    if t.contains('/') {
        return crate::fixedpoint::parse_rational(t);
    }
    let (mantissa, exp) = match t.find(['e', 'E']) {
        Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (t, 0),
    };
    let (neg, mantissa) = match mantissa.strip_prefix('-') {
        Some(m) => (true, m),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int.is_empty() && frac.is_empty() || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return Err(bad());
    }
    if exp.unsigned_abs() > 100_000 {
        return Err(bad());
    }
    let digits: BigInt = format!("{int}{frac}").parse().map_err(|_| bad())?;
    let scale = exp - frac.len() as i32;
    let ten = BigInt::from(10);
    let mut v = if scale >= 0 {
        BigRational::from_integer(digits * num_traits::pow(ten, scale as usize))
    } else {
        BigRational::new(digits, num_traits::pow(ten, (-scale) as usize))
    };
    if neg {
        v = -v;
    }
    Ok(v)
}

/// The entropy term `e^(S/k_B)`, given either as `S/k_B` or directly as
/// `log2` of the multiplicity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entropy {
    SOverKb(f64),
    Log2Multiplicity(#[serde(with = "crate::fixedpoint::rational_string")] BigRational),
}

impl Entropy {
    pub fn log2(&self) -> Result<Log2Value> {
        match self {
            Entropy::SOverKb(s) if s.is_finite() && *s >= 0.0 => Ok(Log2Value {
                exact: BigRational::zero(),
                residual: s * std::f64::consts::LOG2_E,
            }),
            Entropy::Log2Multiplicity(b) if !b.is_negative() => Ok(Log2Value::exact(b.clone())),
            _ => Err(Error::InvalidArgument("entropy must be finite and non-negative".into())),
        }
    }
}

/// `log2 M = S log2(e) + log2(mu)`.
pub fn estimate_memory(entropy: &Entropy, mu: &BigRational) -> Result<Log2Value> {
    if *mu < BigRational::one() {
        return Err(Error::InvalidArgument("mu must be at least 1".into()));
    }
    Ok(entropy.log2()? + Log2Value::of(mu)?)
}

/// `log2 V = mu/2 + S log2(e) + log2(E/hbar)`.
pub fn estimate_ops(entropy: &Entropy, mu: &BigRational, e_over_hbar: &BigRational) -> Result<Log2Value> {
    if mu.is_negative() {
        return Err(Error::InvalidArgument("mu must be non-negative".into()));
    }
    let half_mu = Log2Value::exact(mu / BigRational::from_integer(2.into()));
    Ok(half_mu + entropy.log2()? + Log2Value::of(e_over_hbar)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceInputs {
    pub entropy: Entropy,
    #[serde(with = "crate::fixedpoint::rational_string")]
    pub mu: BigRational,
    #[serde(with = "crate::fixedpoint::rational_string")]
    pub e_over_hbar: BigRational,
}

impl ResourceInputs {
    /// `e^(S/k_B) = 2^(10^23)`, `mu = 10^23`, `E/hbar = 1`.
    pub fn universe() -> Self {
        Self {
            entropy: Entropy::Log2Multiplicity(parse_decimal("1e23").expect("literal")),
            mu: parse_decimal("1e23").expect("literal"),
            e_over_hbar: BigRational::one(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResourceEstimate {
    pub inputs: ResourceInputs,
    pub log2_memory_bits: Log2Value,
    pub log2_ops_per_sec: Log2Value,
    /// The `log2(mu)` share of `log2_memory_bits`.
    pub log2_mu_term: f64,
}

pub fn estimate(inputs: &ResourceInputs) -> Result<ResourceEstimate> {
    Ok(ResourceEstimate {
        log2_memory_bits: estimate_memory(&inputs.entropy, &inputs.mu)?,
        log2_ops_per_sec: estimate_ops(&inputs.entropy, &inputs.mu, &inputs.e_over_hbar)?,
        log2_mu_term: Log2Value::of(&inputs.mu)?.total(),
        inputs: inputs.clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Order {
    Greater,
    Equal,
    Less,
}

impl From<Ordering> for Order {
    fn from(o: Ordering) -> Self {
        match o {
            Ordering::Greater => Order::Greater,
            Ordering::Equal => Order::Equal,
            Ordering::Less => Order::Less,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub log2_value: f64,
    pub log2_reference: f64,
    /// `log2(value / reference)`.
    pub log2_ratio: f64,
    pub order: Order,
}

pub fn compare(value: &Log2Value, reference: &Log2Value) -> Comparison {
    let order: Order = value.cmp_value(reference).into();
    let log2_ratio = if order == Order::Equal {
        0.0
    } else {
        (&value.exact - &reference.exact).to_f64().unwrap_or(f64::NAN) + (value.residual - reference.residual)
    };
    Comparison {
        log2_value: value.total(),
        log2_reference: reference.total(),
        log2_ratio,
        order,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceReport {
    pub memory_vs_human_storage: Comparison,
    pub ops_vs_human_rate: Comparison,
    pub memory_vs_cosmic_information: Comparison,
}

fn reference(literal: &str) -> Log2Value {
    Log2Value::of(&parse_decimal(literal).expect("literal")).expect("positive")
}

pub fn compare_reference(e: &ResourceEstimate) -> ReferenceReport {
    ReferenceReport {
        memory_vs_human_storage: compare(&e.log2_memory_bits, &reference(HUMAN_STORAGE_BITS)),
        ops_vs_human_rate: compare(&e.log2_ops_per_sec, &reference(HUMAN_OPS_PER_SEC)),
        memory_vs_cosmic_information: compare(&e.log2_memory_bits, &reference(COSMIC_INFORMATION_BITS)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(s: &str) -> BigRational {
        parse_decimal(s).unwrap()
    }

    #[test]
    fn parses_decimals() {
        assert_eq!(q("1e23"), BigRational::from_integer(num_traits::pow(BigInt::from(10), 23)));
        assert_eq!(q("1.5e2"), BigRational::from_integer(150.into()));
        assert_eq!(q("-0.25"), BigRational::new((-1).into(), 4.into()));
        assert_eq!(q("3/4"), BigRational::new(3.into(), 4.into()));
        assert_eq!(q(".5"), BigRational::new(1.into(), 2.into()));
        for bad in ["", "e5", "1e", "abc", "1.2.3", "--1"] {
            assert!(parse_decimal(bad).is_err(), "{bad:?}");
        }
    }

    #[test]
    fn memory_examples() {
        let m = estimate_memory(&Entropy::SOverKb(0.0), &q("4")).unwrap();
        assert_eq!(m.total(), 2.0);
        let u = ResourceInputs::universe();
        let m = estimate_memory(&u.entropy, &u.mu).unwrap();
        let mu_term = Log2Value::of(&u.mu).unwrap().total();
        assert!(mu_term > 76.0 && mu_term < 77.0);
        let excess = (&m.exact - q("1e23")).to_f64().unwrap() + m.residual;
        assert!((excess - mu_term).abs() < 1e-9);
        assert!((m.total() / 1e23 - 1.0).abs() < 1e-15);
        let doubled = estimate_memory(&u.entropy, &(&u.mu * BigRational::from_integer(2.into()))).unwrap();
        assert_eq!(&doubled.exact - &m.exact, BigRational::one());
        assert_eq!(doubled.residual, m.residual);
    }

    #[test]
    fn ops_examples() {
        let u = ResourceInputs::universe();
        let v = estimate_ops(&u.entropy, &u.mu, &u.e_over_hbar).unwrap();
        assert_eq!(v.exact, q("1.5e23"));
        assert_eq!(v.residual, 0.0);
        let v = estimate_ops(&Entropy::SOverKb(0.0), &q("2"), &BigRational::one()).unwrap();
        assert_eq!(v.total(), 1.0);
        let a = estimate_ops(&Entropy::SOverKb(3.0), &q("10"), &q("7")).unwrap();
        let b = estimate_ops(&Entropy::SOverKb(3.0), &q("12"), &q("7")).unwrap();
        assert_eq!(&b.exact - &a.exact, BigRational::one());
        assert_eq!(a.residual, b.residual);
    }

    #[test]
    fn matches_direct_arithmetic() {
        for s in [0.0, 0.5, 1.0, 7.25, 20.0, 40.0] {
            for mu in [1u32, 3, 4, 64, 1000] {
                for e in [1u32, 5, 1 << 20] {
                    let ent = Entropy::SOverKb(s);
                    let mu_q = BigRational::from_integer(mu.into());
                    let m = estimate_memory(&ent, &mu_q).unwrap().total();
                    let direct_m = (s.exp() * mu as f64).log2();
                    assert!((m - direct_m).abs() <= 1e-12 * direct_m.abs().max(1.0));
                    let v = estimate_ops(&ent, &mu_q, &BigRational::from_integer(e.into())).unwrap().total();
                    let direct_v = (2f64.powf(mu as f64 / 2.0) * s.exp() * e as f64).log2();
                    assert!((v - direct_v).abs() <= 1e-9 * direct_v.abs().max(1.0));
                }
            }
        }
    }

    #[test]
    fn references() {
        let e = estimate(&ResourceInputs::universe()).unwrap();
        let r = compare_reference(&e);
        assert_eq!(r.memory_vs_human_storage.order, Order::Greater);
        assert!((r.memory_vs_human_storage.log2_reference - 69.76).abs() < 0.01);
        assert!((r.memory_vs_human_storage.log2_ratio - 1e23).abs() < 1e8);
        assert!((r.ops_vs_human_rate.log2_reference - 76.40).abs() < 0.01);
        assert_eq!(r.memory_vs_cosmic_information.order, Order::Greater);

        let small = estimate(&ResourceInputs {
            entropy: Entropy::SOverKb(0.0),
            mu: q("64"),
            e_over_hbar: BigRational::one(),
        })
        .unwrap();
        assert_eq!(small.log2_memory_bits.total(), 6.0);
        assert_eq!(compare_reference(&small).memory_vs_human_storage.order, Order::Less);

        let c = compare(&e.log2_memory_bits, &e.log2_memory_bits.clone());
        assert_eq!(c.order, Order::Equal);
        assert_eq!(c.log2_ratio, 0.0);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(estimate_memory(&Entropy::SOverKb(-1.0), &q("4")).is_err());
        assert!(estimate_memory(&Entropy::SOverKb(f64::NAN), &q("4")).is_err());
        assert!(estimate_memory(&Entropy::SOverKb(1.0), &q("1/2")).is_err());
        assert!(estimate_ops(&Entropy::SOverKb(1.0), &q("4"), &q("0")).is_err());
    }
}
